//! Retrosynthetic planning with dual value networks.
//!
//! The crate bundles a synthetic string-rewriting reaction world, a small
//! MLP engine, the two-branch policy, the MCTS planning phase with
//! synthesizability and cost values, training-target extraction and the
//! network-updating loop, and the evaluation planners (best-first AND-OR
//! search and greedy DFS).

pub mod analysis;
pub mod bundle;
pub mod error;
pub mod mcts;
pub mod nnet;
pub mod planners;
pub mod policy;
pub mod route;
pub mod solver;
pub mod train;
pub mod values;
pub mod world;

pub use error::{Error, Result};
pub use route::{
    route_cost, route_is_synthesizable, route_length, CostModel, Expansion, LeafStatus, Molecule,
    RouteNode, RouteTree, TemplateId,
};
pub use mcts::{run_episode, MctsConfig, Outcome, SearchTree};
pub use planners::{evaluate, retro_star, greedy_dfs, EvalReport, Heuristic, Planner, PlannerBudget, PlannerKind};
pub use policy::TwoBranchPolicy;
pub use train::{pdvn_train, TrainConfig, TrainMode};
pub use values::{ValueMode, ValueNets};
pub use world::{generate_world, Fingerprint, WorldSpec};
