use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::policy::TwoBranchPolicy;
use crate::route::{CostModel, LeafStatus, Molecule, RouteTree, TemplateId};
use crate::values::ValueNets;
use crate::world::WorldSpec;

use super::SearchStats;

/// Leaf cost estimate used to order the frontier.
#[derive(Clone, Copy, Debug)]
pub enum Heuristic<'a> {
    Zero,
    /// Selection utility of the value networks at the leaf.
    Values(&'a ValueNets),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Open,
    BuildingBlock,
    Dead,
    Expanded,
}

#[derive(Clone, Debug)]
struct OrNode {
    molecule: Molecule,
    parent: Option<usize>,
    state: State,
    /// Cheapest estimated route cost below this node.
    v: f64,
    /// Cheapest fully resolved route cost, infinite when unsolved.
    solved: f64,
    children: Vec<usize>,
}

#[derive(Clone, Debug)]
struct AndNode {
    template: TemplateId,
    parent: usize,
    v: f64,
    solved: f64,
    children: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct RetroResult {
    pub route: Option<RouteTree>,
    pub stats: SearchStats,
}

struct Search<'a> {
    world: &'a WorldSpec,
    policy: &'a TwoBranchPolicy,
    heuristic: Heuristic<'a>,
    cm: &'a CostModel,
    ors: Vec<OrNode>,
    ands: Vec<AndNode>,
    h_cache: HashMap<Molecule, f64>,
}

impl<'a> Search<'a> {
    fn leaf_value(&mut self, m: &Molecule) -> Result<f64> {
        match self.heuristic {
            Heuristic::Zero => Ok(0.0),
            Heuristic::Values(nets) => {
                if let Some(&h) = self.h_cache.get(m) {
                    return Ok(h);
                }
                let (syn, cost) = nets.evaluate(m)?;
                let h = nets.mode().utility(syn, cost, self.cm);
                self.h_cache.insert(m.clone(), h);
                Ok(h)
            }
        }
    }

    fn add_or(&mut self, molecule: Molecule, parent: Option<usize>) -> Result<usize> {
        let (state, h) = if self.world.is_building_block(&molecule)? {
            (State::BuildingBlock, 0.0)
        } else if self.world.is_dead_end(&molecule)? {
            (State::Dead, f64::INFINITY)
        } else {
            (State::Open, self.leaf_value(&molecule)?)
        };
        let solved = if state == State::BuildingBlock { 0.0 } else { f64::INFINITY };
        self.ors.push(OrNode {
            molecule,
            parent,
            state,
            v: h,
            solved,
            children: Vec::new(),
        });
        Ok(self.ors.len() - 1)
    }

    fn refresh_and(&mut self, a: usize) {
        let (mut v, mut solved) = (self.cm.c_rxn, self.cm.c_rxn);
        for &c in &self.ands[a].children {
            v += self.ors[c].v;
            solved += self.ors[c].solved;
        }
        self.ands[a].v = v;
        self.ands[a].solved = solved;
    }

    fn refresh_or(&mut self, m: usize) {
        let node = &self.ors[m];
        if node.state != State::Expanded {
            return;
        }
        let v = node.children.iter().map(|&a| self.ands[a].v).fold(f64::INFINITY, f64::min);
        let solved = node.children.iter().map(|&a| self.ands[a].solved).fold(f64::INFINITY, f64::min);
        self.ors[m].v = v;
        self.ors[m].solved = solved;
    }

    fn propagate(&mut self, mut m: usize) {
        self.refresh_or(m);
        while let Some(a) = self.ors[m].parent {
            self.refresh_and(a);
            m = self.ands[a].parent;
            self.refresh_or(m);
        }
    }

    /// Open leaf with the cheapest best-route estimate through it, ties to
    /// the earliest created. `None` when no finite candidate remains.
    fn select(&self) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![(0usize, self.ors[0].v)];
        while let Some((m, rn)) = stack.pop() {
            if !rn.is_finite() {
                continue;
            }
            let node = &self.ors[m];
            match node.state {
                State::Open => {
                    if best.map_or(true, |(b, id)| rn < b || (rn == b && m < id)) {
                        best = Some((rn, m));
                    }
                }
                State::Expanded => {
                    for &a in &node.children {
                        let r = rn - node.v + self.ands[a].v;
                        for &c in &self.ands[a].children {
                            stack.push((c, r));
                        }
                    }
                }
                _ => {}
            }
        }
        best.map(|(_, m)| m)
    }

    fn expand(&mut self, m: usize) -> Result<()> {
        let molecule = self.ors[m].molecule.clone();
        let proposals = self.policy.propose(self.world, &molecule)?;
        self.ors[m].state = State::Expanded;
        for e in proposals {
            let a = self.ands.len();
            self.ands.push(AndNode {
                template: e.template,
                parent: m,
                v: 0.0,
                solved: 0.0,
                children: Vec::new(),
            });
            for r in e.reactants() {
                let c = self.add_or(r.clone(), Some(a))?;
                self.ands[a].children.push(c);
            }
            self.refresh_and(a);
            self.ors[m].children.push(a);
        }
        if self.ors[m].children.is_empty() {
            self.ors[m].state = State::Dead;
            self.ors[m].v = f64::INFINITY;
        }
        self.propagate(m);
        Ok(())
    }

    /// Cheapest solved route below `m`, ties to the lower template index.
    fn extract(&self, m: usize) -> RouteTree {
        let node = &self.ors[m];
        if node.state == State::BuildingBlock {
            return RouteTree::leaf(node.molecule.clone(), LeafStatus::BuildingBlock);
        }
        let a = node
            .children
            .iter()
            .copied()
            .filter(|&a| self.ands[a].solved.is_finite())
            .min_by(|&x, &y| {
                self.ands[x]
                    .solved
                    .total_cmp(&self.ands[y].solved)
                    .then(self.ands[x].template.cmp(&self.ands[y].template))
            })
            .expect("solved node has a solved reaction");
        let children = self.ands[a].children.iter().map(|&c| self.extract(c)).collect();
        RouteTree::reaction(node.molecule.clone(), self.ands[a].template, children)
    }
}

/// Best-first AND-OR search. Each iteration expands the open leaf whose best
/// partial route (reactions at `c_rxn`, open leaves at the heuristic) is
/// cheapest; stops at the first resolved route, when `budget` expansions are
/// spent, or when no viable leaf remains.
pub fn retro_star(
    target: &Molecule,
    policy: &TwoBranchPolicy,
    heuristic: Heuristic<'_>,
    world: &WorldSpec,
    budget: usize,
    cm: &CostModel,
) -> Result<RetroResult> {
    if world.is_terminal(target)? {
        return Err(Error::TerminalTarget(target.id().to_string()));
    }
    let mut s = Search {
        world,
        policy,
        heuristic,
        cm,
        ors: Vec::new(),
        ands: Vec::new(),
        h_cache: HashMap::new(),
    };
    s.add_or(target.clone(), None)?;
    let mut calls = 0;
    while !s.ors[0].solved.is_finite() && calls < budget {
        let Some(leaf) = s.select() else {
            break;
        };
        s.expand(leaf)?;
        calls += 1;
    }
    let route = s.ors[0].solved.is_finite().then(|| s.extract(0));
    Ok(RetroResult {
        route,
        stats: SearchStats {
            model_calls: calls,
            molecule_nodes: s.ors.len(),
            reaction_nodes: s.ands.len(),
        },
    })
}
