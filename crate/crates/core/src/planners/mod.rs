//! Evaluation planners and the success-rate harness.

mod dfs;
mod retro;

pub use dfs::{greedy_dfs, greedy_dfs_with_depth, DfsEvent, DfsResult, DFS_MAX_DEPTH};
pub use retro::{retro_star, Heuristic, RetroResult};

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::TwoBranchPolicy;
use crate::route::{route_cost, route_is_synthesizable, route_length, CostModel, Molecule, RouteNode, RouteTree};
use crate::world::WorldSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Policy expansions performed.
    pub model_calls: usize,
    pub molecule_nodes: usize,
    pub reaction_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannerBudget {
    pub max_calls: usize,
    pub checkpoints: Vec<usize>,
}

impl Default for PlannerBudget {
    fn default() -> Self {
        PlannerBudget {
            max_calls: 500,
            checkpoints: vec![50, 100, 200, 300, 400, 500],
        }
    }
}

impl PlannerBudget {
    /// Checkpoints are clipped to `max_calls`, which is always included.
    pub fn with_max(max_calls: usize) -> Self {
        let mut checkpoints: Vec<usize> = PlannerBudget::default()
            .checkpoints
            .into_iter()
            .filter(|&c| c < max_calls)
            .collect();
        checkpoints.push(max_calls);
        PlannerBudget { max_calls, checkpoints }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_calls == 0 || self.checkpoints.is_empty() {
            return Err(Error::Parameter("budget needs a positive maximum and checkpoints".into()));
        }
        if self.checkpoints[0] == 0
            || self.checkpoints.windows(2).any(|w| w[0] >= w[1])
            || *self.checkpoints.last().unwrap() > self.max_calls
        {
            return Err(Error::Parameter(format!(
                "checkpoints {:?} must be positive, ascending and <= {}",
                self.checkpoints, self.max_calls
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PlannerKind<'a> {
    RetroStar(Heuristic<'a>),
    GreedyDfs,
}

#[derive(Clone, Debug)]
pub struct Planner<'a> {
    pub name: String,
    pub policy: &'a TwoBranchPolicy,
    pub kind: PlannerKind<'a>,
}

impl<'a> Planner<'a> {
    pub fn new(name: impl Into<String>, policy: &'a TwoBranchPolicy, kind: PlannerKind<'a>) -> Self {
        Planner {
            name: name.into(),
            policy,
            kind,
        }
    }

    pub fn plan(&self, target: &Molecule, world: &WorldSpec, budget: usize, cm: &CostModel) -> Result<(Option<RouteTree>, SearchStats)> {
        match self.kind {
            PlannerKind::RetroStar(h) => {
                let r = retro_star(target, self.policy, h, world, budget, cm)?;
                Ok((r.route, r.stats))
            }
            PlannerKind::GreedyDfs => {
                let r = greedy_dfs(target, self.policy, world, budget)?;
                Ok((r.route, r.stats))
            }
        }
    }
}

/// Checks that every reaction of `route` is reproduced by the world and
/// every leaf is a building block.
pub fn validate_route(world: &WorldSpec, route: &RouteTree) -> Result<()> {
    if !route_is_synthesizable(route)? {
        return Err(Error::Search(format!("route for {} has dead leaves", route.molecule)));
    }
    for (_, node) in route.walk() {
        if let RouteNode::Reaction { template, children } = &node.node {
            let mut got: Vec<Molecule> = children.iter().map(|c| c.molecule.clone()).collect();
            got.sort();
            if world.reactants(&node.molecule, *template)? != got {
                return Err(Error::Search(format!(
                    "reaction {} on {} is not reproducible",
                    template.index(),
                    node.molecule
                )));
            }
        } else if !world.is_building_block(&node.molecule)? {
            return Err(Error::Search(format!("leaf {} is not a building block", node.molecule)));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetResult {
    pub target: Molecule,
    pub route: Option<RouteTree>,
    pub stats: SearchStats,
}

impl TargetResult {
    pub fn solved_within(&self, calls: usize) -> bool {
        self.route.is_some() && self.stats.model_calls <= calls
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerReport {
    pub name: String,
    pub results: Vec<TargetResult>,
    /// `(budget, fraction solved)` per checkpoint.
    pub success_at: Vec<(usize, f64)>,
    pub avg_calls_solved: Option<f64>,
    pub avg_molecule_nodes: f64,
    pub avg_reaction_nodes: f64,
    /// Over the targets every planner solved.
    pub avg_length_common: Option<f64>,
    pub avg_cost_common: Option<f64>,
}

impl PlannerReport {
    pub fn success(&self, budget: usize) -> Option<f64> {
        self.success_at.iter().find(|(b, _)| *b == budget).map(|&(_, s)| s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub budget: PlannerBudget,
    pub n_targets: usize,
    pub n_common: usize,
    pub planners: Vec<PlannerReport>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

/// Runs every planner on every target at the maximum budget; success at a
/// smaller checkpoint is read off the call count, which is exact because a
/// smaller budget only truncates the same deterministic search.
pub fn evaluate(
    targets: &[Molecule],
    planners: &[Planner<'_>],
    world: &WorldSpec,
    budget: &PlannerBudget,
    cm: &CostModel,
) -> Result<EvalReport> {
    budget.validate()?;
    if targets.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut all: Vec<Vec<TargetResult>> = Vec::with_capacity(planners.len());
    for p in planners {
        let results = targets
            .par_iter()
            .map(|t| {
                let (route, stats) = p.plan(t, world, budget.max_calls, cm)?;
                if let Some(r) = &route {
                    validate_route(world, r)?;
                }
                Ok(TargetResult {
                    target: t.clone(),
                    route,
                    stats,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        all.push(results);
    }
    let common: HashSet<usize> = (0..targets.len())
        .filter(|&i| all.iter().all(|r| r[i].route.is_some()))
        .collect();
    let n = targets.len() as f64;
    let mut reports = Vec::with_capacity(planners.len());
    for (p, results) in planners.iter().zip(all) {
        let success_at = budget
            .checkpoints
            .iter()
            .map(|&b| (b, results.iter().filter(|r| r.solved_within(b)).count() as f64 / n))
            .collect();
        let solved = results.iter().filter(|r| r.route.is_some());
        let avg_calls_solved = mean(solved.map(|r| r.stats.model_calls as f64));
        let mut lengths = Vec::new();
        let mut costs = Vec::new();
        for i in 0..targets.len() {
            if common.contains(&i) {
                let route = results[i].route.as_ref().expect("common targets are solved");
                lengths.push(route_length(route)? as f64);
                costs.push(route_cost(route, cm)?);
            }
        }
        reports.push(PlannerReport {
            name: p.name.clone(),
            success_at,
            avg_calls_solved,
            avg_molecule_nodes: mean(results.iter().map(|r| r.stats.molecule_nodes as f64)).unwrap_or(0.0),
            avg_reaction_nodes: mean(results.iter().map(|r| r.stats.reaction_nodes as f64)).unwrap_or(0.0),
            avg_length_common: mean(lengths),
            avg_cost_common: mean(costs),
            results,
        });
    }
    Ok(EvalReport {
        budget: budget.clone(),
        n_targets: targets.len(),
        n_common: common.len(),
        planners: reports,
    })
}

impl EvalReport {
    pub fn planner(&self, name: &str) -> Option<&PlannerReport> {
        self.planners.iter().find(|p| p.name == name)
    }

    /// One row per planner and checkpoint.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "planner,budget,success_rate,avg_calls_solved,avg_molecule_nodes,avg_reaction_nodes,avg_length_common,avg_cost_common,n_common\n",
        );
        for p in &self.planners {
            for &(b, s) in &p.success_at {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{},{:.6},{:.6},{},{},{}",
                    p.name,
                    b,
                    s,
                    fmt_opt(p.avg_calls_solved),
                    p.avg_molecule_nodes,
                    p.avg_reaction_nodes,
                    fmt_opt(p.avg_length_common),
                    fmt_opt(p.avg_cost_common),
                    self.n_common
                );
            }
        }
        out
    }

    /// Success rates per budget, then calls, node counts and route length.
    pub fn summary(&self) -> String {
        let name_w = self.planners.iter().map(|p| p.name.len()).max().unwrap_or(7).max(7);
        let mut out = format!("{:<name_w$}", "planner");
        for b in &self.budget.checkpoints {
            let _ = write!(out, " {:>7}", format!("N={b}"));
        }
        let _ = writeln!(out, " {:>8} {:>8} {:>8} {:>8}", "calls", "#M", "#T", "length");
        for p in &self.planners {
            let _ = write!(out, "{:<name_w$}", p.name);
            for (_, s) in &p.success_at {
                let _ = write!(out, " {:>6.2}%", s * 100.0);
            }
            let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
            let _ = writeln!(
                out,
                " {:>8} {:>8.1} {:>8.1} {:>8}",
                show(p.avg_calls_solved),
                p.avg_molecule_nodes,
                p.avg_reaction_nodes,
                show(p.avg_length_common)
            );
        }
        let _ = writeln!(
            out,
            "targets: {}, solved by every planner: {}",
            self.n_targets, self.n_common
        );
        out
    }
}
