//! Memoized AND-OR dynamic programs over the full expansion graph of a world.
//!
//! Molecules are OR nodes (pick one template), reactions are AND nodes (all
//! reactants must be solved). Reactants are strictly shorter than their
//! product, so the graph is acyclic and plain memoized recursion terminates.

use std::collections::HashMap;

use crate::error::Result;
use crate::route::{CostModel, LeafStatus, Molecule, RouteTree, TemplateId};
use crate::world::WorldSpec;

pub struct Solver<'w> {
    world: &'w WorldSpec,
    height: HashMap<Molecule, Option<usize>>,
    cost: HashMap<Molecule, Option<(f64, Option<TemplateId>)>>,
}

impl<'w> Solver<'w> {
    pub fn new(world: &'w WorldSpec) -> Self {
        Solver {
            world,
            height: HashMap::new(),
            cost: HashMap::new(),
        }
    }

    pub fn world(&self) -> &'w WorldSpec {
        self.world
    }

    /// Smallest depth of a synthesizable route, or `None` if there is none.
    pub fn min_height(&mut self, m: &Molecule) -> Result<Option<usize>> {
        if let Some(h) = self.height.get(m) {
            return Ok(*h);
        }
        let h = if self.world.is_building_block(m)? {
            Some(0)
        } else {
            let mut best: Option<usize> = None;
            for t in self.world.applicable_templates(m)? {
                let mut worst = Some(0usize);
                for r in self.world.reactants(m, t)? {
                    match (worst, self.min_height(&r)?) {
                        (Some(w), Some(h)) => worst = Some(w.max(h)),
                        _ => {
                            worst = None;
                            break;
                        }
                    }
                }
                if let Some(w) = worst {
                    best = Some(best.map_or(w + 1, |b| b.min(w + 1)));
                }
            }
            best
        };
        self.height.insert(m.clone(), h);
        Ok(h)
    }

    pub fn is_solvable(&mut self, m: &Molecule) -> Result<bool> {
        Ok(self.min_height(m)?.is_some())
    }

    /// Minimum cost of a synthesizable route (`c_rxn` per reaction), with the
    /// template chosen at `m` (lowest index among ties).
    pub fn min_cost(&mut self, m: &Molecule, cm: &CostModel) -> Result<Option<(f64, Option<TemplateId>)>> {
        if let Some(c) = self.cost.get(m) {
            return Ok(*c);
        }
        let c = if self.world.is_building_block(m)? {
            Some((0.0, None))
        } else {
            let mut best: Option<(f64, Option<TemplateId>)> = None;
            for t in self.world.applicable_templates(m)? {
                let mut total = Some(cm.c_rxn);
                for r in self.world.reactants(m, t)? {
                    match (total, self.min_cost(&r, cm)?) {
                        (Some(acc), Some((c, _))) => total = Some(acc + c),
                        _ => {
                            total = None;
                            break;
                        }
                    }
                }
                if let Some(total) = total {
                    if best.is_none_or(|(b, _)| total < b) {
                        best = Some((total, Some(t)));
                    }
                }
            }
            best
        };
        self.cost.insert(m.clone(), c);
        Ok(c)
    }

    /// A minimum-cost synthesizable route, if one exists.
    pub fn best_route(&mut self, m: &Molecule, cm: &CostModel) -> Result<Option<RouteTree>> {
        match self.min_cost(m, cm)? {
            None => Ok(None),
            Some((_, None)) => Ok(Some(RouteTree::leaf(m.clone(), LeafStatus::BuildingBlock))),
            Some((_, Some(t))) => {
                let mut children = Vec::new();
                for r in self.world.reactants(m, t)? {
                    children.push(self.best_route(&r, cm)?.expect("reactants of a solved choice are solved"));
                }
                Ok(Some(RouteTree::reaction(m.clone(), t, children)))
            }
        }
    }

    /// Number of distinct molecules memoized so far.
    pub fn visited(&self) -> usize {
        self.height.len().max(self.cost.len())
    }
}
