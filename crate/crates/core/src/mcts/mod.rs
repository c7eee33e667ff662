//! Planning phase: dual-value MCTS over molecule and reaction nodes.

mod search;
mod tree;

pub use search::{
    run_episode, trace_from_text, trace_to_text, Episode, EpisodeResult, MctsConfig, Outcome, RootOrder, TraceEvent,
};
pub use tree::{MoleculeNode, NodeStatus, ReactionNode, SearchTree, SimulationPath};
