mod commands;
mod config;
mod data;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdvn_core::train::TrainMode;

use config::RunConfig;
use error::Result;

/// Retrosynthetic planning with dual value networks on a synthetic world.
#[derive(Parser)]
#[command(name = "pdvn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world, training routes and held-out test targets.
    GenWorld {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Supervised pretraining of the reference policy.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Planning and learning from a pretrained checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint written by `pretrain`.
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run planners on the held-out targets.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Any checkpoint; one without value networks supports retro0 and dfs.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Checkpoint for the `sl-` planners.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// retro, retro0, dfs, sl-retro0, sl-dfs
        #[arg(long = "planner", value_delimiter = ',')]
        planners: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train and evaluate several modes over several seeds.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "pdvn,single-value,no-cost,self-imitation")]
        modes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render CSV outputs as tables.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    rules: Option<usize>,
    #[arg(long)]
    train_targets: Option<usize>,
    #[arg(long)]
    test_targets: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    simulations: Option<usize>,
    #[arg(long)]
    c_puct: Option<f64>,
    #[arg(long)]
    c_dead: Option<f64>,
    #[arg(long)]
    c_rxn: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
    /// Maximum model calls per target during evaluation.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    root_order: Option<String>,
    /// Write 0 in the wall_ms column of training logs.
    #[arg(long)]
    no_wall_time: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(workers => workers);
        set!(rules => world.rules);
        set!(train_targets => world.train_targets);
        set!(test_targets => world.test_targets);
        set!(epochs => train.epochs);
        set!(simulations => mcts.simulations);
        set!(c_puct => mcts.c_puct);
        set!(c_dead => cost.c_dead);
        set!(c_rxn => cost.c_rxn);
        set!(top_k => mcts.top_k);
        set!(max_depth => mcts.max_depth);
        set!(mode => train.mode);
        set!(budget => eval.budget);
        set!(root_order => mcts.root_order);
        if self.no_wall_time {
            c.train.record_wall_time = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenWorld { out, run } => commands::gen_world(&run.resolve()?, &out),
        Command::Pretrain { data, out, run } => commands::pretrain(&run.resolve()?, &data, &out),
        Command::Train { data, init, out, run } => commands::train(&run.resolve()?, &data, &init, &out),
        Command::Eval {
            data,
            checkpoint,
            baseline,
            planners,
            out,
            run,
        } => commands::eval(&run.resolve()?, &data, &checkpoint, baseline.as_deref(), &planners, &out).map(|_| ()),
        Command::Ablate {
            data,
            init,
            modes,
            seeds,
            out,
            run,
        } => {
            let cfg = run.resolve()?;
            let modes = modes
                .iter()
                .map(|m| m.parse::<TrainMode>())
                .collect::<pdvn_core::Result<Vec<_>>>()?;
            commands::ablate(&cfg, &data, &init, &modes, &seeds, &out)
        }
        Command::Report { inputs } => commands::report(&inputs),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
