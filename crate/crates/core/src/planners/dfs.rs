use crate::error::{Error, Result};
use crate::policy::TwoBranchPolicy;
use crate::route::{LeafStatus, Molecule, RouteTree};
use crate::world::WorldSpec;

use super::SearchStats;

pub const DFS_MAX_DEPTH: usize = 15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DfsEvent {
    Expand { molecule: Molecule, depth: usize },
    /// A reaction failed and the next proposal is tried.
    Backtrack { molecule: Molecule, template: usize },
    DeadEnd { molecule: Molecule },
    DepthLimit { molecule: Molecule },
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct DfsResult {
    pub route: Option<RouteTree>,
    pub stats: SearchStats,
    pub trace: Vec<DfsEvent>,
}

struct Dfs<'a> {
    world: &'a WorldSpec,
    policy: &'a TwoBranchPolicy,
    budget: usize,
    max_depth: usize,
    stats: SearchStats,
    trace: Vec<DfsEvent>,
}

enum Step {
    Found(RouteTree),
    Failed,
    OutOfBudget,
}

impl Dfs<'_> {
    fn solve(&mut self, m: &Molecule, depth: usize) -> Result<Step> {
        self.stats.molecule_nodes += 1;
        if self.world.is_building_block(m)? {
            return Ok(Step::Found(RouteTree::leaf(m.clone(), LeafStatus::BuildingBlock)));
        }
        if self.world.is_dead_end(m)? {
            self.trace.push(DfsEvent::DeadEnd { molecule: m.clone() });
            return Ok(Step::Failed);
        }
        if depth >= self.max_depth {
            self.trace.push(DfsEvent::DepthLimit { molecule: m.clone() });
            return Ok(Step::Failed);
        }
        if self.stats.model_calls >= self.budget {
            self.trace.push(DfsEvent::BudgetExhausted);
            return Ok(Step::OutOfBudget);
        }
        self.stats.model_calls += 1;
        self.trace.push(DfsEvent::Expand {
            molecule: m.clone(),
            depth,
        });
        let proposals = self.policy.propose(self.world, m)?;
        if proposals.is_empty() {
            self.trace.push(DfsEvent::DeadEnd { molecule: m.clone() });
        }
        'proposals: for e in proposals {
            self.stats.reaction_nodes += 1;
            let mut children = Vec::with_capacity(e.reactants().len());
            for r in e.reactants() {
                match self.solve(r, depth + 1)? {
                    Step::Found(route) => children.push(route),
                    Step::Failed => {
                        self.trace.push(DfsEvent::Backtrack {
                            molecule: m.clone(),
                            template: e.template.index(),
                        });
                        continue 'proposals;
                    }
                    Step::OutOfBudget => return Ok(Step::OutOfBudget),
                }
            }
            return Ok(Step::Found(RouteTree::reaction(m.clone(), e.template, children)));
        }
        Ok(Step::Failed)
    }
}

/// Depth-first search that always tries the highest-prior proposal first
/// and backtracks to the next one when a reactant cannot be resolved.
pub fn greedy_dfs(target: &Molecule, policy: &TwoBranchPolicy, world: &WorldSpec, budget: usize) -> Result<DfsResult> {
    greedy_dfs_with_depth(target, policy, world, budget, DFS_MAX_DEPTH)
}

pub fn greedy_dfs_with_depth(
    target: &Molecule,
    policy: &TwoBranchPolicy,
    world: &WorldSpec,
    budget: usize,
    max_depth: usize,
) -> Result<DfsResult> {
    if world.is_terminal(target)? {
        return Err(Error::TerminalTarget(target.id().to_string()));
    }
    let mut dfs = Dfs {
        world,
        policy,
        budget,
        max_depth,
        stats: SearchStats::default(),
        trace: Vec::new(),
    };
    let route = match dfs.solve(target, 0)? {
        Step::Found(route) => Some(route),
        Step::Failed | Step::OutOfBudget => None,
    };
    Ok(DfsResult {
        route,
        stats: dfs.stats,
        trace: dfs.trace,
    })
}
