#![allow(dead_code)]

use std::collections::HashMap;

use pdvn_core::mcts::{NodeStatus, SearchTree};
use pdvn_core::{CostModel, Molecule, TemplateId};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn mol(id: &str) -> Molecule {
    Molecule::new(id).unwrap()
}

pub fn tid(i: usize) -> TemplateId {
    TemplateId::new(i, 64).unwrap()
}

/// Random well-formed search tree with at most about `max_nodes` molecule
/// nodes. Leaves are building blocks, dead-ends or unexpanded open nodes;
/// expanded nodes with no reaction are marked as having no actions.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, cm: &CostModel) -> SearchTree {
    let mut tree = SearchTree::new(mol("M0"), NodeStatus::Open, (rng.gen(), rng.gen_range(0.0..3.0)));
    let mut frontier = vec![0usize];
    let mut counter = 1usize;
    while let Some(m) = frontier.pop() {
        if tree.mols.len() >= max_nodes || tree.mols[m].depth >= 5 {
            continue;
        }
        if m != 0 && rng.gen_bool(0.2) {
            continue;
        }
        let n_rxn = rng.gen_range(0..=3);
        let mut templates: Vec<usize> = (0..64).collect();
        templates.shuffle(rng);
        tree.mols[m].expanded = true;
        tree.mols[m].proposals = templates[..n_rxn + rng.gen_range(0..3)].iter().map(|&t| tid(t)).collect();
        for &t in &templates[..n_rxn] {
            let mut children = Vec::new();
            for _ in 0..rng.gen_range(1..=3) {
                let depth = tree.mols[m].depth + 1;
                let r: f64 = rng.gen();
                let name = format!("M{counter}");
                counter += 1;
                let id = if r < 0.35 {
                    tree.add_molecule(mol(&name), None, depth, NodeStatus::BuildingBlock, (1.0, 0.0))
                } else if r < 0.5 {
                    tree.add_molecule(mol(&name), None, depth, NodeStatus::DeadEnd, (0.0, 0.0))
                } else {
                    let id = tree.add_molecule(mol(&name), None, depth, NodeStatus::Open, (rng.gen(), rng.gen_range(0.0..3.0)));
                    frontier.push(id);
                    id
                };
                children.push(id);
            }
            tree.add_reaction(m, tid(t), 1.0 / n_rxn as f64, children, cm);
        }
        if n_rxn == 0 {
            tree.mols[m].status = NodeStatus::NoActions;
            tree.mols[m].v_syn = 0.0;
            tree.mols[m].v_cost = 0.0;
        }
    }
    tree
}

/// Every successful route cost below each node, by explicit enumeration of
/// reaction choices. Costs are rounded to avoid duplicate float variants.
pub struct Enumerator<'t> {
    tree: &'t SearchTree,
    cm: CostModel,
    memo: HashMap<usize, Vec<f64>>,
}

impl<'t> Enumerator<'t> {
    pub fn new(tree: &'t SearchTree, cm: CostModel) -> Self {
        Enumerator { tree, cm, memo: HashMap::new() }
    }

    pub fn route_costs(&mut self, m: usize) -> Vec<f64> {
        if let Some(v) = self.memo.get(&m) {
            return v.clone();
        }
        let node = &self.tree.mols[m];
        let out = if node.status == NodeStatus::BuildingBlock {
            vec![0.0]
        } else {
            let mut all = Vec::new();
            for &a in &node.children.clone() {
                all.extend(self.reaction_costs(a));
            }
            all
        };
        self.memo.insert(m, out.clone());
        out
    }

    /// Costs of every successful route that starts with reaction `a`.
    pub fn reaction_costs(&mut self, a: usize) -> Vec<f64> {
        let mut partial = vec![self.cm.c_rxn];
        for &c in &self.tree.rxns[a].children.clone() {
            let sub = self.route_costs(c);
            let mut next = Vec::new();
            for p in &partial {
                for s in &sub {
                    next.push(p + s);
                }
            }
            next.sort_by(f64::total_cmp);
            next.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
            partial = next;
        }
        partial
    }
}

/// One outcome of a sampled route: probability, total cost, no dead leaf.
pub type Outcome = (f64, f64, bool);

/// Full outcome distribution of routes sampled from `policy`, by explicit
/// enumeration of every action and child combination. `None` for molecules
/// with no available action. Equal outcomes are merged.
pub fn route_distribution(
    world: &pdvn_core::WorldSpec,
    policy: &pdvn_core::analysis::PolicyFn<'_>,
    m: &Molecule,
    cm: &CostModel,
    memo: &mut HashMap<Molecule, Option<Vec<Outcome>>>,
) -> Option<Vec<Outcome>> {
    if let Some(v) = memo.get(m) {
        return v.clone();
    }
    let out = if world.is_building_block(m).unwrap() {
        Some(vec![(1.0, 0.0, true)])
    } else {
        let actions = policy(m).unwrap();
        if actions.is_empty() {
            None
        } else {
            let mut all: Vec<Outcome> = Vec::new();
            for (t, p) in actions {
                let mut partial: Vec<Outcome> = vec![(p, cm.c_rxn, true)];
                for c in world.reactants(m, t).unwrap() {
                    let next: Vec<Outcome> = match route_distribution(world, policy, &c, cm, memo) {
                        None => partial.iter().map(|&(q, x, _)| (q, x + cm.c_dead, false)).collect(),
                        Some(sub) => partial
                            .iter()
                            .flat_map(|&(q, x, y)| sub.iter().map(move |&(qs, xs, ys)| (q * qs, x + xs, y && ys)))
                            .collect(),
                    };
                    partial = merge(next);
                }
                all.extend(partial);
            }
            Some(merge(all))
        }
    };
    memo.insert(m.clone(), out.clone());
    out
}

fn merge(mut v: Vec<Outcome>) -> Vec<Outcome> {
    v.sort_by(|a, b| a.2.cmp(&b.2).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<Outcome> = Vec::with_capacity(v.len());
    for o in v {
        match out.last_mut() {
            Some(last) if last.2 == o.2 && (last.1 - o.1).abs() < 1e-12 => last.0 += o.0,
            _ => out.push(o),
        }
    }
    out
}
