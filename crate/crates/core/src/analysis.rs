//! Exact statistics of the route distribution induced by a fixed stochastic
//! policy: synthesizability probability, expected total cost and the split
//! of that cost by outcome.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::policy::TwoBranchPolicy;
use crate::route::{CostModel, Molecule, TemplateId};
use crate::world::WorldSpec;

/// Moments of the total cost X and the no-dead-end indicator Y for routes
/// sampled from one molecule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// P(Y = 1)
    pub p_syn: f64,
    /// E[X]
    pub expected_cost: f64,
    /// E[X Y]
    pub expected_cost_syn: f64,
}

impl Moments {
    const BUILDING_BLOCK: Moments = Moments {
        p_syn: 1.0,
        expected_cost: 0.0,
        expected_cost_syn: 0.0,
    };

    /// E[X | Y = 1]; `None` when P(Y = 1) = 0.
    pub fn cost_given_syn(&self) -> Option<f64> {
        (self.p_syn > 0.0).then(|| self.expected_cost_syn / self.p_syn)
    }

    /// E[X | Y = 0]; `None` when P(Y = 0) = 0.
    pub fn cost_given_dead(&self) -> Option<f64> {
        (self.p_syn < 1.0).then(|| (self.expected_cost - self.expected_cost_syn) / (1.0 - self.p_syn))
    }

    /// P(Y=1) E[X|Y=1] + P(Y=0) E[X|Y=0].
    pub fn recombined(&self) -> f64 {
        self.cost_given_syn().map_or(0.0, |c| self.p_syn * c)
            + self.cost_given_dead().map_or(0.0, |c| (1.0 - self.p_syn) * c)
    }

    /// P(Y=1) E[X|Y=1] + P(Y=0) c_dead, the two-value approximation.
    pub fn approximation(&self, cm: &CostModel) -> f64 {
        self.cost_given_syn().map_or(0.0, |c| self.p_syn * c) + (1.0 - self.p_syn) * cm.c_dead
    }
}

/// Action distribution of a molecule; empty means no action is available.
pub type PolicyFn<'a> = dyn Fn(&Molecule) -> Result<Vec<(TemplateId, f64)>> + 'a;

/// Uniform distribution over applicable templates.
pub fn uniform_policy(world: &WorldSpec) -> impl Fn(&Molecule) -> Result<Vec<(TemplateId, f64)>> + '_ {
    move |m| {
        let ts = world.applicable_templates(m)?;
        let p = 1.0 / ts.len().max(1) as f64;
        Ok(ts.into_iter().map(|t| (t, p)).collect())
    }
}

/// Priors of a two-branch policy.
pub fn policy_distribution<'a>(
    world: &'a WorldSpec,
    policy: &'a TwoBranchPolicy,
) -> impl Fn(&Molecule) -> Result<Vec<(TemplateId, f64)>> + 'a {
    move |m| Ok(policy.propose(world, m)?.into_iter().map(|e| (e.template, e.prior)).collect())
}

/// Memoized recursion over the (finite, acyclic) expansion graph. A child
/// with no available action counts as a dead-end and its penalty is paid
/// by the reaction that produced it.
pub struct Decomposer<'a> {
    world: &'a WorldSpec,
    policy: &'a PolicyFn<'a>,
    cm: CostModel,
    memo: HashMap<Molecule, Option<Moments>>,
}

impl<'a> Decomposer<'a> {
    pub fn new(world: &'a WorldSpec, policy: &'a PolicyFn<'a>, cm: CostModel) -> Self {
        Decomposer {
            world,
            policy,
            cm,
            memo: HashMap::new(),
        }
    }

    /// Molecules evaluated so far.
    pub fn visited(&self) -> usize {
        self.memo.len()
    }

    /// `None` for dead molecules.
    fn node(&mut self, m: &Molecule) -> Result<Option<Moments>> {
        if let Some(v) = self.memo.get(m) {
            return Ok(*v);
        }
        let v = if self.world.is_building_block(m)? {
            Some(Moments::BUILDING_BLOCK)
        } else {
            let actions = (self.policy)(m)?;
            if actions.is_empty() {
                None
            } else {
                let total: f64 = actions.iter().map(|(_, p)| p).sum();
                if actions.iter().any(|(_, p)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Parameter(format!("action distribution of {m} does not sum to 1")));
                }
                let mut acc = Moments {
                    p_syn: 0.0,
                    expected_cost: 0.0,
                    expected_cost_syn: 0.0,
                };
                for (t, p) in actions {
                    let a = self.action(m, t)?;
                    acc.p_syn += p * a.p_syn;
                    acc.expected_cost += p * a.expected_cost;
                    acc.expected_cost_syn += p * a.expected_cost_syn;
                }
                Some(acc)
            }
        };
        self.memo.insert(m.clone(), v);
        Ok(v)
    }

    /// Moments conditioned on taking `t` at `m`.
    pub fn action(&mut self, m: &Molecule, t: TemplateId) -> Result<Moments> {
        let children = self.world.reactants(m, t)?;
        let mut live = Vec::with_capacity(children.len());
        let mut dead = 0usize;
        for c in &children {
            match self.node(c)? {
                Some(mc) => live.push(mc),
                None => dead += 1,
            }
        }
        let step = self.cm.reaction_cost(dead);
        let expected_cost = step + live.iter().map(|c| c.expected_cost).sum::<f64>();
        if dead > 0 {
            return Ok(Moments {
                p_syn: 0.0,
                expected_cost,
                expected_cost_syn: 0.0,
            });
        }
        let p_syn: f64 = live.iter().map(|c| c.p_syn).product();
        // E[XY] with independent children: c_rxn P(Y) + sum_i E[X_i Y_i] prod_{j != i} P(Y_j)
        let mut expected_cost_syn = step * p_syn;
        for (i, c) in live.iter().enumerate() {
            let others: f64 = live
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, d)| d.p_syn)
                .product();
            expected_cost_syn += c.expected_cost_syn * others;
        }
        Ok(Moments {
            p_syn,
            expected_cost,
            expected_cost_syn,
        })
    }

    pub fn moments(&mut self, target: &Molecule) -> Result<Moments> {
        if self.world.is_terminal(target)? {
            return Err(Error::TerminalTarget(target.id().to_string()));
        }
        self.node(target)?
            .ok_or_else(|| Error::TerminalTarget(format!("{} has no available action", target.id())))
    }
}
