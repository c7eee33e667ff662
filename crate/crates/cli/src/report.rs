//! Plain-text tables rendered from the CSV outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pdvn_core::train::LOG_HEADER;

use crate::commands::ABLATION_HEADER;
use crate::error::{CliError, Result};

const EVAL_PREFIX: &str = "planner,budget,success_rate,";

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    comments: Vec<String>,
}

fn parse(text: &str) -> Result<Table> {
    let mut comments = Vec::new();
    let mut lines = Vec::new();
    for l in text.lines() {
        if let Some(c) = l.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else if !l.trim().is_empty() {
            lines.push(l);
        }
    }
    let (first, rest) = lines.split_first().ok_or_else(|| CliError::Usage("empty CSV".into()))?;
    let header: Vec<String> = first.split(',').map(str::to_string).collect();
    let rows: Vec<Vec<String>> = rest.iter().map(|l| l.split(',').map(str::to_string).collect()).collect();
    if rows.iter().any(|r| r.len() != header.len()) {
        return Err(CliError::Usage("ragged CSV rows".into()));
    }
    Ok(Table { header, rows, comments })
}

impl Table {
    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("CSV lacks column {name}")))
    }

    fn num(&self, row: &[String], name: &str) -> Result<Option<f64>> {
        let v = &row[self.col(name)?];
        if v.is_empty() {
            return Ok(None);
        }
        v.parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("bad number {v:?} in column {name}")))
    }
}

fn fmt(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", x * scale))
}

/// Success rate per planner (rows) and budget (columns), then length and calls.
fn eval_table(t: &Table) -> Result<String> {
    let mut planners: Vec<String> = Vec::new();
    let mut budgets: Vec<usize> = Vec::new();
    let mut cells: BTreeMap<(String, usize), f64> = BTreeMap::new();
    let mut extra: BTreeMap<String, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in &t.rows {
        let p = r[t.col("planner")?].clone();
        let b: usize = r[t.col("budget")?].parse().map_err(|_| CliError::Usage("bad budget".into()))?;
        if !planners.contains(&p) {
            planners.push(p.clone());
        }
        if !budgets.contains(&b) {
            budgets.push(b);
        }
        cells.insert((p.clone(), b), t.num(r, "success_rate")?.unwrap_or(0.0));
        extra.insert(p, (t.num(r, "avg_calls_solved")?, t.num(r, "avg_length_common")?));
    }
    budgets.sort_unstable();
    let w = planners.iter().map(String::len).max().unwrap_or(7).max(7);
    let mut out = format!("{:<w$}", "planner");
    for b in &budgets {
        let _ = write!(out, " {:>7}", format!("N={b}"));
    }
    let _ = writeln!(out, " {:>8} {:>8}", "calls", "length");
    for p in &planners {
        let _ = write!(out, "{p:<w$}");
        for b in &budgets {
            let _ = write!(out, " {:>7}", fmt(cells.get(&(p.clone(), *b)).copied(), 100.0));
        }
        let (calls, len) = extra[p];
        let _ = writeln!(out, " {:>8} {:>8}", fmt(calls, 1.0), fmt(len, 1.0));
    }
    Ok(out)
}

/// Mean over seeds per mode.
fn ablation_table(t: &Table) -> Result<String> {
    let mut modes: Vec<String> = Vec::new();
    let mut budgets: Vec<usize> = Vec::new();
    let mut success: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    let mut length: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &t.rows {
        let m = r[t.col("mode")?].clone();
        let b: usize = r[t.col("budget")?].parse().map_err(|_| CliError::Usage("bad budget".into()))?;
        if !modes.contains(&m) {
            modes.push(m.clone());
        }
        if !budgets.contains(&b) {
            budgets.push(b);
        }
        success.entry((m.clone(), b)).or_default().push(t.num(r, "success_rate")?.unwrap_or(0.0));
        if let Some(l) = t.num(r, "avg_length_common")? {
            length.entry(m).or_default().push(l);
        }
    }
    budgets.sort_unstable();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let w = modes.iter().map(String::len).max().unwrap_or(4).max(4);
    let mut out = format!("{:<w$}", "mode");
    for b in &budgets {
        let _ = write!(out, " {:>7}", format!("N={b}"));
    }
    let _ = writeln!(out, " {:>8}", "length");
    for m in &modes {
        let _ = write!(out, "{m:<w$}");
        for b in &budgets {
            let _ = write!(out, " {:>7}", fmt(success.get(&(m.clone(), *b)).and_then(|v| mean(v)), 100.0));
        }
        let _ = writeln!(out, " {:>8}", fmt(length.get(m).and_then(|v| mean(v)), 1.0));
    }
    Ok(out)
}

/// Mean solve rate and final losses per epoch.
fn train_table(t: &Table) -> Result<String> {
    let mut out = format!("{:>5} {:>10} {:>10} {:>10} {:>10}\n", "epoch", "solve", "policy", "syn", "cost");
    let mut epochs: BTreeMap<usize, Vec<&Vec<String>>> = BTreeMap::new();
    for r in &t.rows {
        let e: usize = r[t.col("epoch")?].parse().map_err(|_| CliError::Usage("bad epoch".into()))?;
        epochs.entry(e).or_default().push(r);
    }
    for (e, rows) in epochs {
        let mut rate = 0.0;
        for r in &rows {
            rate += t.num(r, "solve_rate")?.unwrap_or(0.0);
        }
        let last = rows[rows.len() - 1];
        let show = |name: &str| -> Result<String> { Ok(t.num(last, name)?.map_or_else(|| "-".into(), |x| format!("{x:.4}"))) };
        let _ = writeln!(
            out,
            "{e:>5} {:>10.4} {:>10} {:>10} {:>10}",
            rate / rows.len() as f64,
            show("policy_loss")?,
            show("syn_loss")?,
            show("cost_loss")?
        );
    }
    Ok(out)
}

pub fn render(text: &str) -> Result<String> {
    let t = parse(text)?;
    let joined = t.header.join(",");
    let mut out: String = t.comments.iter().map(|c| format!("{c}\n")).collect();
    out += &if joined.starts_with(EVAL_PREFIX) {
        eval_table(&t)?
    } else if joined == ABLATION_HEADER {
        ablation_table(&t)?
    } else if joined == LOG_HEADER {
        train_table(&t)?
    } else {
        return Err(CliError::Usage(format!("unrecognised CSV header {joined:?}")));
    };
    Ok(out)
}
