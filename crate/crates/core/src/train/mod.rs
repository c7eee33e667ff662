//! Updating phase: target extraction from episode trees, network updates,
//! and the outer loop alternating planning with updating.

mod extract;
mod update;

pub use extract::{
    best_reaction, extract, extract_cost_targets, extract_policy_targets, extract_single_targets, extract_syn_targets,
    label_solved, min_cost, min_costs, Examples, PolicyExample, ValueExample,
};
pub use update::{Learner, LossReport};

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mcts::{run_episode, MctsConfig};
use crate::nnet::{self, Head, Mlp};
use crate::planners::{retro_star, Heuristic};
use crate::policy::TwoBranchPolicy;
use crate::route::{Molecule, RouteTree};
use crate::values::ValueNets;
use crate::world::WorldSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrainMode {
    Pdvn,
    SingleValue,
    NoCost,
    SelfImitation,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [TrainMode::Pdvn, TrainMode::SingleValue, TrainMode::NoCost, TrainMode::SelfImitation];

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Pdvn => "pdvn",
            TrainMode::SingleValue => "single-value",
            TrainMode::NoCost => "no-cost",
            TrainMode::SelfImitation => "self-imitation",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown training mode {s:?}")))
    }
}

/// What to do when a molecule yields examples in several trees of one batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dedup {
    KeepAll,
    /// Only the examples from the last tree mentioning the molecule.
    KeepLatest,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub mini_batch: usize,
    pub lr: f64,
    pub alpha: f64,
    pub hidden: usize,
    pub dropout: f64,
    /// Gradient passes over the pooled examples of each planning batch.
    pub passes: usize,
    pub workers: usize,
    pub dedup: Dedup,
    pub mcts: MctsConfig,
    /// Model-call budget of the search whose routes are imitated.
    pub imitation_budget: usize,
    pub record_wall_time: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Pdvn,
            epochs: 3,
            batch_size: 1024,
            mini_batch: nnet::MINI_BATCH,
            lr: nnet::Adam::DEFAULT_LR,
            alpha: 0.8,
            hidden: nnet::HIDDEN_UNITS,
            dropout: nnet::DROPOUT,
            passes: 1,
            workers: 1,
            dedup: Dedup::KeepAll,
            mcts: MctsConfig::default(),
            imitation_budget: 100,
            record_wall_time: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.epochs == 0
            || self.batch_size == 0
            || self.mini_batch == 0
            || self.hidden == 0
            || self.passes == 0
            || self.imitation_budget == 0
        {
            return Err(Error::Parameter("training sizes must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        self.mcts.validate()
    }

    fn initial_values(&self) -> Result<Option<ValueNets>> {
        let seed = derive_seed(self.seed, &[0xA1]);
        Ok(match self.mode {
            TrainMode::Pdvn => Some(ValueNets::dual(self.hidden, self.dropout, seed)?),
            TrainMode::NoCost => Some(ValueNets::syn_only(self.hidden, self.dropout, seed)?),
            TrainMode::SingleValue => Some(ValueNets::single(self.hidden, self.dropout, seed)?),
            TrainMode::SelfImitation => None,
        })
    }
}

/// SplitMix64 over the seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut x = seed;
    for &p in path {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub batch: usize,
    pub solve_rate: f64,
    pub policy_loss: Option<f64>,
    pub syn_loss: Option<f64>,
    /// Cost head loss, or the single value head in that mode.
    pub cost_loss: Option<f64>,
    pub wall_ms: u64,
}

pub const LOG_HEADER: &str = "epoch,batch,solve_rate,policy_loss,syn_loss,cost_loss,wall_ms";

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut out = format!("{LOG_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epoch,
            r.batch,
            r.solve_rate,
            opt(r.policy_loss),
            opt(r.syn_loss),
            opt(r.cost_loss),
            r.wall_ms
        );
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub learner: Learner,
    pub log: Vec<LogRow>,
}

fn keep_latest<T: Clone>(items: &[T], key: impl Fn(&T) -> &Molecule) -> Vec<T> {
    let mut seen = HashSet::new();
    let mut out: Vec<T> = items.iter().rev().filter(|e| seen.insert(key(e).clone())).cloned().collect();
    out.reverse();
    out
}

/// Pools per-tree example sets in batch order.
fn pool(per_tree: Vec<Examples>, dedup: Dedup) -> Examples {
    let mut all = Examples::default();
    for ex in per_tree {
        all.extend(ex);
    }
    if dedup == Dedup::KeepLatest {
        all.policy = keep_latest(&all.policy, |e| &e.molecule);
        all.syn = keep_latest(&all.syn, |e| &e.molecule);
        all.cost = keep_latest(&all.cost, |e| &e.molecule);
        all.single = keep_latest(&all.single, |e| &e.molecule);
    }
    all
}

/// Policy examples from the reactions of found routes; the mask is the
/// realistic set at each product.
pub fn imitation_examples(world: &WorldSpec, policy: &TwoBranchPolicy, routes: &[RouteTree]) -> Result<Vec<PolicyExample>> {
    let mut out = Vec::new();
    for route in routes {
        for (m, t) in route.reactions() {
            let mask: Vec<usize> = policy.realistic_set(world, m)?.iter().map(|t| t.index()).collect();
            if !mask.contains(&t.index()) {
                return Err(Error::Target(format!("template {} outside the realistic set of {m}", t.index())));
            }
            out.push(PolicyExample {
                molecule: m.clone(),
                mask,
                target: t.index(),
            });
        }
    }
    Ok(out)
}

fn plan_batch(learner: &Learner, world: &WorldSpec, batch: &[Molecule], cfg: &TrainConfig, seeds: &[u64]) -> Result<(f64, Examples)> {
    let (solved, per_tree): (Vec<bool>, Vec<Examples>) = match &learner.values {
        Some(values) => batch
            .par_iter()
            .zip(seeds)
            .map(|(t, &seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ep = run_episode(t, &learner.policy, values, world, &cfg.mcts, &mut rng)?;
                let ex = extract(&ep.tree, values.mode(), cfg.alpha, &cfg.mcts.cost);
                Ok((ep.outcome.is_success(), ex))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
        None => batch
            .par_iter()
            .map(|t| {
                let r = retro_star(t, &learner.policy, Heuristic::Zero, world, cfg.imitation_budget, &cfg.mcts.cost)?;
                let routes: Vec<RouteTree> = r.route.into_iter().collect();
                let policy = imitation_examples(world, &learner.policy, &routes)?;
                Ok((!routes.is_empty(), Examples { policy, ..Examples::default() }))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
    };
    let rate = solved.iter().filter(|&&s| s).count() as f64 / batch.len() as f64;
    Ok((rate, pool(per_tree, cfg.dedup)))
}

/// Alternates planning over batches of `targets` with network updates.
/// `on_epoch` runs after every epoch with the current networks.
pub fn pdvn_train(
    world: &WorldSpec,
    targets: &[Molecule],
    reference: &Mlp,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &Learner, &[LogRow]) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::Empty("training targets"));
    }
    if reference.head() != Head::Logits || reference.output_dim() != world.vocab_size() {
        return Err(Error::Dimension("reference does not match the world's template vocabulary".into()));
    }
    for t in targets {
        if world.is_terminal(t)? {
            return Err(Error::TerminalTarget(t.id().to_string()));
        }
    }
    let policy = TwoBranchPolicy::new(reference.clone(), cfg.mcts.top_k)?;
    let mut learner = Learner::new(policy, cfg.initial_values()?, cfg.lr);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Parameter(format!("worker pool: {e}")))?;
    let mut log = Vec::new();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<&Molecule> = targets.iter().collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1, epoch as u64])));
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let start = Instant::now();
            let batch: Vec<Molecule> = chunk.iter().map(|&m| m.clone()).collect();
            let seeds: Vec<u64> = (0..batch.len())
                .map(|i| derive_seed(cfg.seed, &[2, epoch as u64, b as u64, i as u64]))
                .collect();
            let (solve_rate, examples) = pool.install(|| plan_batch(&learner, world, &batch, cfg, &seeds))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[3, epoch as u64, b as u64]));
            let mut report = LossReport::default();
            for _ in 0..cfg.passes {
                report = learner.update(&examples, cfg.mini_batch, &mut rng)?;
            }
            log.push(LogRow {
                epoch,
                batch: b,
                solve_rate,
                policy_loss: report.policy,
                syn_loss: report.syn,
                cost_loss: report.cost.or(report.single),
                wall_ms: if cfg.record_wall_time { start.elapsed().as_millis() as u64 } else { 0 },
            });
        }
        on_epoch(epoch, &learner, &log)?;
    }
    Ok(TrainOutput { learner, log })
}
