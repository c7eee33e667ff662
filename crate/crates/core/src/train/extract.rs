use crate::error::{Error, Result};
use crate::mcts::{NodeStatus, SearchTree};
use crate::route::{CostModel, Molecule};
use crate::values::ValueMode;

/// Policy training pair: the best solved reaction of a node within the
/// node's proposal set.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyExample {
    pub molecule: Molecule,
    pub mask: Vec<usize>,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueExample {
    pub molecule: Molecule,
    pub target: f64,
}

/// Examples extracted from one or more episode trees.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Examples {
    pub policy: Vec<PolicyExample>,
    pub syn: Vec<ValueExample>,
    pub cost: Vec<ValueExample>,
    pub single: Vec<ValueExample>,
}

impl Examples {
    pub fn extend(&mut self, other: Examples) {
        self.policy.extend(other.policy);
        self.syn.extend(other.syn);
        self.cost.extend(other.cost);
        self.single.extend(other.single);
    }

    pub fn is_empty(&self) -> bool {
        self.policy.is_empty() && self.syn.is_empty() && self.cost.is_empty() && self.single.is_empty()
    }
}

/// Solved flag per molecule node: a building block, or some reaction whose
/// reactants are all solved. Children always have larger ids than their
/// parent, so one reverse sweep reaches the fixpoint.
pub fn label_solved(tree: &SearchTree) -> Vec<bool> {
    let mut solved = vec![false; tree.mols.len()];
    for m in (0..tree.mols.len()).rev() {
        let node = &tree.mols[m];
        solved[m] = node.status == NodeStatus::BuildingBlock
            || node
                .children
                .iter()
                .any(|&a| tree.rxns[a].children.iter().all(|&c| solved[c]));
    }
    solved
}

fn reaction_cost(tree: &SearchTree, rxn: usize, costs: &[Option<f64>], cm: &CostModel) -> Option<f64> {
    let mut total = cm.c_rxn;
    for &c in &tree.rxns[rxn].children {
        total += costs[c]?;
    }
    Some(total)
}

/// Cheapest solved reaction under `mol`, ties to the lower template index.
pub fn best_reaction(tree: &SearchTree, mol: usize, costs: &[Option<f64>], cm: &CostModel) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &a in &tree.mols[mol].children {
        let Some(c) = reaction_cost(tree, a, costs, cm) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((b, bc)) => c < bc || (c == bc && tree.rxns[a].template < tree.rxns[b].template),
        };
        if better {
            best = Some((a, c));
        }
    }
    best
}

/// Minimal successful route cost per molecule node; `None` on unsolved nodes.
pub fn min_costs(tree: &SearchTree, solved: &[bool], cm: &CostModel) -> Vec<Option<f64>> {
    let mut costs = vec![None; tree.mols.len()];
    for m in (0..tree.mols.len()).rev() {
        if !solved[m] {
            continue;
        }
        costs[m] = if tree.mols[m].status == NodeStatus::BuildingBlock {
            Some(0.0)
        } else {
            best_reaction(tree, m, &costs, cm).map(|(_, c)| c)
        };
    }
    costs
}

pub fn min_cost(costs: &[Option<f64>], mol: usize) -> Result<f64> {
    costs
        .get(mol)
        .copied()
        .flatten()
        .ok_or_else(|| Error::Search(format!("molecule node {mol} is not solved")))
}

pub fn extract_policy_targets(tree: &SearchTree, solved: &[bool], costs: &[Option<f64>], cm: &CostModel) -> Vec<PolicyExample> {
    let mut out = Vec::new();
    for m in tree.reachable() {
        let node = &tree.mols[m];
        if !solved[m] || node.status == NodeStatus::BuildingBlock || node.children.is_empty() {
            continue;
        }
        if let Some((a, _)) = best_reaction(tree, m, costs, cm) {
            out.push(PolicyExample {
                molecule: node.molecule.clone(),
                mask: node.proposals.iter().map(|t| t.index()).collect(),
                target: tree.rxns[a].template.index(),
            });
        }
    }
    out
}

/// 1 for solved nodes, 0 for dead-ends, `alpha` times the averaged value otherwise.
pub fn extract_syn_targets(tree: &SearchTree, solved: &[bool], alpha: f64) -> Vec<ValueExample> {
    tree.reachable()
        .into_iter()
        .map(|m| {
            let node = &tree.mols[m];
            let target = if solved[m] {
                1.0
            } else if node.status == NodeStatus::DeadEnd {
                0.0
            } else {
                alpha * node.v_syn
            };
            ValueExample {
                molecule: node.molecule.clone(),
                target,
            }
        })
        .collect()
}

pub fn extract_cost_targets(tree: &SearchTree, costs: &[Option<f64>]) -> Vec<ValueExample> {
    tree.reachable()
        .into_iter()
        .filter_map(|m| {
            costs[m].map(|target| ValueExample {
                molecule: tree.mols[m].molecule.clone(),
                target,
            })
        })
        .collect()
}

/// Expected-total-cost targets for the single value network: route cost
/// when solved, the dead-end penalty for dead-ends, otherwise the averaged
/// value pulled toward the penalty by `1 - alpha`.
pub fn extract_single_targets(
    tree: &SearchTree,
    solved: &[bool],
    costs: &[Option<f64>],
    alpha: f64,
    cm: &CostModel,
) -> Vec<ValueExample> {
    tree.reachable()
        .into_iter()
        .map(|m| {
            let node = &tree.mols[m];
            let target = match costs[m] {
                Some(c) if solved[m] => c,
                _ if node.status == NodeStatus::DeadEnd => cm.c_dead,
                _ => alpha * node.v_cost + (1.0 - alpha) * cm.c_dead,
            };
            ValueExample {
                molecule: node.molecule.clone(),
                target,
            }
        })
        .collect()
}

/// All examples one tree yields for a value mode.
pub fn extract(tree: &SearchTree, mode: ValueMode, alpha: f64, cm: &CostModel) -> Examples {
    let solved = label_solved(tree);
    let costs = min_costs(tree, &solved, cm);
    let mut ex = Examples {
        policy: extract_policy_targets(tree, &solved, &costs, cm),
        ..Examples::default()
    };
    match mode {
        ValueMode::Dual => {
            ex.syn = extract_syn_targets(tree, &solved, alpha);
            ex.cost = extract_cost_targets(tree, &costs);
        }
        ValueMode::SynOnly => ex.syn = extract_syn_targets(tree, &solved, alpha),
        ValueMode::Single => ex.single = extract_single_targets(tree, &solved, &costs, alpha, cm),
    }
    ex
}
