//! Run configuration: built-in defaults, overridden by a TOML file, overridden
//! by command-line flags.

use std::path::Path;

use pdvn_core::mcts::RootOrder;
use pdvn_core::planners::PlannerBudget;
use pdvn_core::policy::SlConfig;
use pdvn_core::train::{Dedup, TrainConfig, TrainMode};
use pdvn_core::{CostModel, MctsConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub world: WorldSection,
    pub sl: SlSection,
    pub cost: CostSection,
    pub mcts: MctsSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub rules: usize,
    pub train_targets: usize,
    pub test_targets: usize,
    /// Maximum depth of sampled training routes and test targets.
    pub route_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlSection {
    pub epochs: usize,
    pub hidden: usize,
    pub mini_batch: usize,
    pub lr: f64,
    pub dropout: f64,
    pub holdout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub c_rxn: f64,
    pub c_dead: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsSection {
    pub c_puct: f64,
    pub simulations: usize,
    pub max_depth: usize,
    pub top_k: usize,
    pub root_order: String,
    pub reuse_tree: bool,
    pub sample_moves: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub mode: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub mini_batch: usize,
    pub lr: f64,
    pub alpha: f64,
    pub hidden: usize,
    pub dropout: f64,
    pub passes: usize,
    pub dedup: String,
    pub imitation_budget: usize,
    pub record_wall_time: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub budget: usize,
    pub checkpoints: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 1,
            world: WorldSection::default(),
            sl: SlSection::default(),
            cost: CostSection::default(),
            mcts: MctsSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl Default for WorldSection {
    fn default() -> Self {
        WorldSection {
            rules: 50,
            train_targets: 2000,
            test_targets: 200,
            route_depth: 8,
        }
    }
}

impl Default for SlSection {
    fn default() -> Self {
        let d = SlConfig::default();
        SlSection {
            epochs: d.epochs,
            hidden: d.hidden,
            mini_batch: d.mini_batch,
            lr: d.lr,
            dropout: d.dropout,
            holdout: d.holdout,
        }
    }
}

impl Default for CostSection {
    fn default() -> Self {
        let d = CostModel::default();
        CostSection {
            c_rxn: d.c_rxn,
            c_dead: d.c_dead,
        }
    }
}

impl Default for MctsSection {
    fn default() -> Self {
        let d = MctsConfig::default();
        MctsSection {
            c_puct: d.c_puct,
            simulations: d.simulations,
            max_depth: d.max_depth,
            top_k: d.top_k,
            root_order: root_order_name(d.root_order).into(),
            reuse_tree: d.reuse_tree,
            sample_moves: d.sample_moves,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            mode: d.mode.name().into(),
            epochs: d.epochs,
            batch_size: d.batch_size,
            mini_batch: d.mini_batch,
            lr: d.lr,
            alpha: d.alpha,
            hidden: d.hidden,
            dropout: d.dropout,
            passes: d.passes,
            dedup: dedup_name(d.dedup).into(),
            imitation_budget: d.imitation_budget,
            record_wall_time: d.record_wall_time,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        let d = PlannerBudget::default();
        EvalSection {
            budget: d.max_calls,
            checkpoints: d.checkpoints,
        }
    }
}

fn root_order_name(o: RootOrder) -> &'static str {
    match o {
        RootOrder::Fifo => "fifo",
        RootOrder::Lifo => "lifo",
    }
}

pub fn parse_root_order(s: &str) -> Result<RootOrder> {
    match s {
        "fifo" => Ok(RootOrder::Fifo),
        "lifo" => Ok(RootOrder::Lifo),
        _ => Err(CliError::Config(format!("root_order must be fifo or lifo, got {s:?}"))),
    }
}

fn dedup_name(d: Dedup) -> &'static str {
    match d {
        Dedup::KeepAll => "keep-all",
        Dedup::KeepLatest => "keep-latest",
    }
}

fn parse_dedup(s: &str) -> Result<Dedup> {
    match s {
        "keep-all" => Ok(Dedup::KeepAll),
        "keep-latest" => Ok(Dedup::KeepLatest),
        _ => Err(CliError::Config(format!("dedup must be keep-all or keep-latest, got {s:?}"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        Ok(CostModel::new(self.cost.c_rxn, self.cost.c_dead)?)
    }

    pub fn mcts_config(&self) -> Result<MctsConfig> {
        let cfg = MctsConfig {
            c_puct: self.mcts.c_puct,
            simulations: self.mcts.simulations,
            max_depth: self.mcts.max_depth,
            top_k: self.mcts.top_k,
            cost: self.cost_model()?,
            root_order: parse_root_order(&self.mcts.root_order)?,
            reuse_tree: self.mcts.reuse_tree,
            sample_moves: self.mcts.sample_moves,
            ..MctsConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_mode(&self) -> Result<TrainMode> {
        Ok(self.train.mode.parse()?)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            mode: self.train_mode()?,
            epochs: t.epochs,
            batch_size: t.batch_size,
            mini_batch: t.mini_batch,
            lr: t.lr,
            alpha: t.alpha,
            hidden: t.hidden,
            dropout: t.dropout,
            passes: t.passes,
            workers: self.workers,
            dedup: parse_dedup(&t.dedup)?,
            mcts: self.mcts_config()?,
            imitation_budget: t.imitation_budget,
            record_wall_time: t.record_wall_time,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sl_config(&self) -> SlConfig {
        SlConfig {
            epochs: self.sl.epochs,
            hidden: self.sl.hidden,
            mini_batch: self.sl.mini_batch,
            lr: self.sl.lr,
            dropout: self.sl.dropout,
            holdout: self.sl.holdout,
            top_k: self.mcts.top_k,
            seed: self.seed,
        }
    }

    pub fn budget(&self) -> Result<PlannerBudget> {
        let mut checkpoints: Vec<usize> = self.eval.checkpoints.iter().copied().filter(|&c| c < self.eval.budget).collect();
        checkpoints.push(self.eval.budget);
        let b = PlannerBudget {
            max_calls: self.eval.budget,
            checkpoints,
        };
        b.validate()?;
        Ok(b)
    }

    /// Every derived configuration, so conflicts surface before any work.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(CliError::Config("workers must be positive".into()));
        }
        if self.world.rules == 0 || self.world.train_targets == 0 || self.world.test_targets == 0 || self.world.route_depth == 0 {
            return Err(CliError::Config("world sizes must be positive".into()));
        }
        if self.sl.epochs == 0 || self.sl.hidden == 0 || self.sl.mini_batch == 0 || !(0.0..1.0).contains(&self.sl.holdout) {
            return Err(CliError::Config("invalid [sl] section".into()));
        }
        self.train_config()?;
        self.budget()?;
        Ok(())
    }
}
