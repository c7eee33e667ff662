use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use pdvn_core::bundle::{load_bundle, save_bundle, Bundle, Provenance};
use pdvn_core::planners::{evaluate, EvalReport, Heuristic, Planner, PlannerKind};
use pdvn_core::policy::{pretrain_reference, sl_corpus};
use pdvn_core::train::{derive_seed, log_to_csv, pdvn_train, TrainMode, TrainOutput};
use pdvn_core::world::{generate_world, sample_targets, sample_training_routes};

use crate::config::RunConfig;
use crate::data::{self, header, write, Dataset, CONFIG_FILE};
use crate::error::{CliError, Result};

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))
}

pub fn gen_world(cfg: &RunConfig, out: &Path) -> Result<()> {
    let w = &cfg.world;
    let world = generate_world(w.rules, cfg.seed)?;
    let routes = sample_training_routes(&world, w.train_targets, w.route_depth, derive_seed(cfg.seed, &[1]), &HashSet::new())?;
    let exclude: HashSet<_> = routes.iter().map(|(_, m)| m.clone()).collect();
    let test_targets = sample_targets(&world, w.test_targets, w.route_depth, derive_seed(cfg.seed, &[2]), &exclude)?;
    let data = Dataset {
        world,
        train_routes: routes.into_iter().map(|(r, _)| r).collect(),
        test_targets,
    };
    data.save(out, &header("gen-world", cfg))?;
    write(&out.join(CONFIG_FILE), &cfg.to_toml())?;
    println!(
        "world with {} rules, {} training routes, {} test targets -> {}",
        data.world.vocab_size(),
        data.train_routes.len(),
        data.test_targets.len(),
        out.display()
    );
    Ok(())
}

pub fn pretrain(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<()> {
    let data = Dataset::load(data_dir)?;
    let corpus = sl_corpus(&data.train_routes);
    let (reference, report) = pretrain_reference(&data.world, &corpus, &cfg.sl_config())?;
    let policy = pdvn_core::TwoBranchPolicy::new(reference, cfg.mcts.top_k)?;
    let mut extra = BTreeMap::new();
    extra.insert("kind".to_string(), "sl".to_string());
    extra.insert("train_top1".to_string(), report.train_top1.to_string());
    extra.insert("holdout_top1".to_string(), report.holdout_top1.to_string());
    extra.insert("holdout_topk".to_string(), report.holdout_topk.to_string());
    save_bundle(out, &policy, None, &provenance(cfg), &extra)?;
    let mut csv = header("pretrain", cfg);
    csv += "epoch,loss\n";
    for (e, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(csv, "{e},{l}");
    }
    write(&out.join("sl_report.csv"), &csv)?;
    write(&out.join(CONFIG_FILE), &cfg.to_toml())?;
    println!(
        "{} pairs ({} held out): train top-1 {:.3}, held-out top-1 {:.3}, top-{} {:.3}",
        corpus.len(),
        report.n_holdout,
        report.train_top1,
        report.holdout_top1,
        cfg.mcts.top_k,
        report.holdout_topk
    );
    Ok(())
}

fn load_init(cfg: &RunConfig, init: &Path) -> Result<Bundle> {
    let b = load_bundle(init)?;
    if b.policy.k() != cfg.mcts.top_k {
        return Err(CliError::Config(format!(
            "top_k {} differs from the {} the policy in {} was built with",
            cfg.mcts.top_k,
            b.policy.k(),
            init.display()
        )));
    }
    Ok(b)
}

fn train_one(cfg: &RunConfig, data: &Dataset, init: &Bundle, out: &Path) -> Result<TrainOutput> {
    let train_cfg = cfg.train_config()?;
    let targets = data.train_targets();
    let output = pdvn_train(&data.world, &targets, init.policy.reference(), &train_cfg, |epoch, _, log| {
        if let Some(last) = log.last() {
            let rate: Vec<f64> = log.iter().filter(|r| r.epoch == epoch).map(|r| r.solve_rate).collect();
            println!(
                "[{}] epoch {epoch}: mean solve rate {:.3} over {} batches",
                train_cfg.mode.name(),
                rate.iter().sum::<f64>() / rate.len() as f64,
                last.batch + 1
            );
        }
        Ok(())
    })?;
    let mut extra = BTreeMap::new();
    extra.insert("kind".to_string(), "trained".to_string());
    extra.insert("mode".to_string(), train_cfg.mode.name().to_string());
    save_bundle(out, &output.learner.policy, output.learner.values.as_ref(), &provenance(cfg), &extra)?;
    write(&out.join("train_log.csv"), &format!("{}{}", header("train", cfg), log_to_csv(&output.log)))?;
    write(&out.join(CONFIG_FILE), &cfg.to_toml())?;
    Ok(output)
}

pub fn train(cfg: &RunConfig, data_dir: &Path, init: &Path, out: &Path) -> Result<()> {
    let init = load_init(cfg, init)?;
    let data = Dataset::load(data_dir)?;
    train_one(cfg, &data, &init, out)?;
    println!("checkpoint -> {}", out.display());
    Ok(())
}

/// Planner names: `retro`, `retro0` and `dfs` run the checkpoint's policy;
/// the `sl-` variants run the baseline's.
pub fn build_planners<'a>(
    names: &[String],
    checkpoint: &'a Bundle,
    baseline: Option<&'a Bundle>,
) -> Result<Vec<Planner<'a>>> {
    let mut out = Vec::new();
    for name in names {
        let (bundle, kind) = match name.strip_prefix("sl-") {
            Some(rest) => (
                baseline.ok_or_else(|| CliError::Usage(format!("planner {name} needs --baseline")))?,
                rest,
            ),
            None => (checkpoint, name.as_str()),
        };
        let kind = match kind {
            "retro0" => PlannerKind::RetroStar(Heuristic::Zero),
            "dfs" => PlannerKind::GreedyDfs,
            "retro" => PlannerKind::RetroStar(Heuristic::Values(bundle.values.as_ref().ok_or_else(|| {
                CliError::Usage(format!("planner {name} needs a checkpoint with value networks"))
            })?)),
            _ => return Err(CliError::Usage(format!("unknown planner {name:?}"))),
        };
        out.push(Planner::new(name.clone(), &bundle.policy, kind));
    }
    Ok(out)
}

pub fn default_planners(checkpoint: &Bundle, baseline: bool) -> Vec<String> {
    let mut names = Vec::new();
    if checkpoint.values.is_some() {
        names.push("retro".to_string());
    }
    names.extend(["retro0".to_string(), "dfs".to_string()]);
    if baseline {
        names.extend(["sl-retro0".to_string(), "sl-dfs".to_string()]);
    }
    names
}

fn routes_dump(report: &EvalReport) -> String {
    let mut out = String::new();
    for p in &report.planners {
        for r in &p.results {
            match &r.route {
                Some(route) => {
                    let _ = writeln!(out, "> {}\t{}\tcalls={}", p.name, r.target, r.stats.model_calls);
                    out += &route.to_text();
                }
                None => {
                    let _ = writeln!(out, "> {}\t{}\tcalls={}\tFAILED", p.name, r.target, r.stats.model_calls);
                }
            }
        }
    }
    out
}

pub fn eval(
    cfg: &RunConfig,
    data_dir: &Path,
    checkpoint: &Path,
    baseline: Option<&Path>,
    planners: &[String],
    out: &Path,
) -> Result<EvalReport> {
    let budget = cfg.budget()?;
    let cm = cfg.cost_model()?;
    let ckpt = load_bundle(checkpoint)?;
    let base = baseline.map(load_bundle).transpose()?;
    let names = if planners.is_empty() {
        default_planners(&ckpt, base.is_some())
    } else {
        planners.to_vec()
    };
    let planners = build_planners(&names, &ckpt, base.as_ref())?;
    let data = Dataset::load(data_dir)?;
    let report = pool(cfg.workers)?.install(|| evaluate(&data.test_targets, &planners, &data.world, &budget, &cm))?;
    let head = header("eval", cfg);
    write(&out.join("eval.csv"), &format!("{head}{}", report.to_csv()))?;
    write(&out.join("summary.txt"), &format!("{head}{}", report.summary()))?;
    write(&out.join("routes.txt"), &format!("{head}{}", routes_dump(&report)))?;
    write(&out.join(CONFIG_FILE), &cfg.to_toml())?;
    print!("{}", report.summary());
    Ok(report)
}

pub const ABLATION_HEADER: &str = "seed,mode,budget,success_rate,avg_calls_solved,avg_length_common,avg_cost_common,n_common";

pub fn ablate(cfg: &RunConfig, data_dir: &Path, init: &Path, modes: &[TrainMode], seeds: &[u64], out: &Path) -> Result<()> {
    if modes.is_empty() || seeds.is_empty() {
        return Err(CliError::Usage("ablate needs at least one mode and one seed".into()));
    }
    let budget = cfg.budget()?;
    let cm = cfg.cost_model()?;
    for &m in modes {
        let mut c = cfg.clone();
        c.train.mode = m.name().into();
        c.validate()?;
    }
    let init = load_init(cfg, init)?;
    let data = Dataset::load(data_dir)?;
    let mut csv = format!("{}{ABLATION_HEADER}\n", header("ablate", cfg));
    for &seed in seeds {
        let mut trained = Vec::new();
        for &mode in modes {
            let mut c = cfg.clone();
            c.seed = seed;
            c.train.mode = mode.name().into();
            let dir = out.join(format!("{}-seed{seed}", mode.name()));
            let output = train_one(&c, &data, &init, &dir)?;
            trained.push((mode, output.learner));
        }
        let planners: Vec<Planner<'_>> = trained
            .iter()
            .map(|(mode, l)| {
                let kind = match &l.values {
                    Some(v) => PlannerKind::RetroStar(Heuristic::Values(v)),
                    None => PlannerKind::RetroStar(Heuristic::Zero),
                };
                Planner::new(mode.name(), &l.policy, kind)
            })
            .collect();
        let report = pool(cfg.workers)?.install(|| evaluate(&data.test_targets, &planners, &data.world, &budget, &cm))?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        for p in &report.planners {
            for &(b, s) in &p.success_at {
                let _ = writeln!(
                    csv,
                    "{seed},{},{b},{s:.6},{},{},{},{}",
                    p.name,
                    opt(p.avg_calls_solved),
                    opt(p.avg_length_common),
                    opt(p.avg_cost_common),
                    report.n_common
                );
            }
        }
        println!("seed {seed}\n{}", report.summary());
    }
    write(&out.join("ablation.csv"), &csv)?;
    write(&out.join(CONFIG_FILE), &cfg.to_toml())?;
    print!("{}", crate::report::render(&csv)?);
    Ok(())
}

pub fn report(inputs: &[impl AsRef<Path>]) -> Result<()> {
    if inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one input file".into()));
    }
    for path in inputs {
        let path = path.as_ref();
        println!("== {}", path.display());
        print!("{}", crate::report::render(&data::read(path)?)?);
    }
    Ok(())
}
