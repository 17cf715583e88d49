//! Post-hoc aggregation: collects run directories, groups replicates by
//! configuration, and emits the figure-ready CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::binpack;
use crate::classes::ClassModel;
use crate::ensemble::ensemble_accuracy;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {what}")]
    Parse { path: String, what: String },
    #[error("no run directories found under {0}")]
    NoRuns(String),
    #[error(transparent)]
    Ensemble(#[from] crate::ensemble::EnsembleError),
    #[error(transparent)]
    Binpack(#[from] binpack::BinpackError),
    #[error(transparent)]
    Model(#[from] crate::classes::ModelError),
}

/// One parsed trace row (the columns the figures need).
#[derive(Debug, Clone)]
pub struct ParsedFrame {
    pub step: u64,
    pub observed_coverage: f64,
    pub consolidation_coverage: f64,
    pub map_accuracy: Option<f64>,
    pub bytes_sent_total: u64,
    pub realized_cost: f64,
    pub optimal_cost: f64,
    pub worst_cost: f64,
    pub worst_cost_exact: f64,
}

/// One discovered replicate.
#[derive(Debug)]
pub struct RunSummary {
    pub n_agents: u32,
    pub min_votes: u32,
    pub dt: f64,
    pub seed: u64,
    pub frames: Vec<ParsedFrame>,
    pub nodeid_histogram: BTreeMap<u64, u64>,
    pub hash_histogram: BTreeMap<u64, u64>,
}

fn parse_err(path: &Path, what: impl Into<String>) -> ReportError {
    ReportError::Parse {
        path: path.display().to_string(),
        what: what.into(),
    }
}

fn info_value(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|line| {
        let (k, v) = line.split_once('=')?;
        (k.trim() == key).then(|| v.trim().to_string())
    })
}

/// Reads one run directory written by the simulator.
pub fn load_run(dir: &Path) -> Result<RunSummary, ReportError> {
    let info_path = dir.join("run_info.txt");
    let info = std::fs::read_to_string(&info_path)?;
    let field = |key: &str| -> Result<String, ReportError> {
        info_value(&info, key).ok_or_else(|| parse_err(&info_path, format!("missing key {key}")))
    };
    let n_agents = field("n_agents")?
        .parse()
        .map_err(|_| parse_err(&info_path, "bad n_agents"))?;
    let min_votes = field("min_votes")?
        .parse()
        .map_err(|_| parse_err(&info_path, "bad min_votes"))?;
    let dt = field("dt")?
        .parse()
        .map_err(|_| parse_err(&info_path, "bad dt"))?;
    let seed = field("seed")?
        .parse()
        .map_err(|_| parse_err(&info_path, "bad seed"))?;

    let metrics_path = dir.join("metrics.csv");
    let metrics = std::fs::read_to_string(&metrics_path)?;
    let mut frames = Vec::new();
    for (lineno, line) in metrics.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(parse_err(&metrics_path, format!("line {}: bad column count", lineno + 1)));
        }
        let num = |i: usize| -> Result<f64, ReportError> {
            cols[i]
                .parse()
                .map_err(|_| parse_err(&metrics_path, format!("line {}: bad number", lineno + 1)))
        };
        frames.push(ParsedFrame {
            step: num(0)? as u64,
            observed_coverage: num(1)?,
            consolidation_coverage: num(2)?,
            map_accuracy: if cols[3].is_empty() { None } else { Some(num(3)?) },
            bytes_sent_total: num(4)? as u64,
            realized_cost: num(5)?,
            optimal_cost: num(6)?,
            worst_cost: num(7)?,
            worst_cost_exact: num(8)?,
        });
    }

    let hist_path = dir.join("histograms.csv");
    let mut nodeid_histogram = BTreeMap::new();
    let mut hash_histogram = BTreeMap::new();
    if hist_path.exists() {
        let text = std::fs::read_to_string(&hist_path)?;
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(parse_err(&hist_path, "bad column count"));
            }
            let value: u64 = cols[1].parse().map_err(|_| parse_err(&hist_path, "bad value"))?;
            let count: u64 = cols[2].parse().map_err(|_| parse_err(&hist_path, "bad count"))?;
            match cols[0] {
                "nodeid" => *nodeid_histogram.entry(value).or_insert(0) += count,
                "hash" => *hash_histogram.entry(value).or_insert(0) += count,
                other => return Err(parse_err(&hist_path, format!("unknown kind {other}"))),
            }
        }
    }

    Ok(RunSummary {
        n_agents,
        min_votes,
        dt,
        seed,
        frames,
        nodeid_histogram,
        hash_histogram,
    })
}

/// Finds every run directory (any subdirectory containing `run_info.txt`)
/// below `root`, recursively.
pub fn discover_runs(root: &Path) -> Result<Vec<RunSummary>, ReportError> {
    let mut runs = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join("run_info.txt").is_file() {
            runs.push(load_run(&dir)?);
            continue;
        }
        let mut children: Vec<_> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        children.sort();
        stack.extend(children);
    }
    if runs.is_empty() {
        return Err(ReportError::NoRuns(root.display().to_string()));
    }
    runs.sort_by_key(|r| (r.n_agents, r.min_votes, r.seed));
    Ok(runs)
}

/// Interpolated quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

fn group_runs(runs: &[RunSummary]) -> BTreeMap<(u32, u32), Vec<&RunSummary>> {
    let mut groups: BTreeMap<(u32, u32), Vec<&RunSummary>> = BTreeMap::new();
    for run in runs {
        groups.entry((run.n_agents, run.min_votes)).or_default().push(run);
    }
    groups
}

fn common_steps(group: &[&RunSummary]) -> usize {
    group.iter().map(|r| r.frames.len()).min().unwrap_or(0)
}

/// Per-class ensemble accuracy curves for vote counts `1..=n_max`.
pub fn fig3_ensemble(model: &ClassModel, n_max: u32) -> Result<String, ReportError> {
    let mut out = String::from("class,p,n,p_ens\n");
    let c = model.class_count();
    for id in model.ids() {
        let p = model.accuracy(id)?;
        for n in 1..=n_max {
            writeln!(out, "{},{},{},{}", model.name(id)?, p, n, ensemble_accuracy(n, p, c)?)
                .unwrap();
        }
    }
    Ok(out)
}

/// Median and quartiles of both coverage curves, per configuration.
pub fn fig4_coverage(runs: &[RunSummary]) -> String {
    let mut out = String::from(
        "n_agents,min_votes,step,obs_med,obs_q1,obs_q3,con_med,con_q1,con_q3\n",
    );
    for ((n_agents, min_votes), group) in group_runs(runs) {
        for i in 0..common_steps(&group) {
            let obs: Vec<f64> = group.iter().map(|r| r.frames[i].observed_coverage).collect();
            let con: Vec<f64> = group
                .iter()
                .map(|r| r.frames[i].consolidation_coverage)
                .collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                n_agents,
                min_votes,
                group[0].frames[i].step,
                median(&obs),
                quantile(&obs, 0.25),
                quantile(&obs, 0.75),
                median(&con),
                quantile(&con, 0.25),
                quantile(&con, 0.75),
            )
            .unwrap();
        }
    }
    out
}

/// Map accuracy (and consolidation coverage) over time, per configuration.
pub fn fig5_accuracy(runs: &[RunSummary]) -> String {
    let mut out =
        String::from("n_agents,min_votes,step,acc_med,acc_q1,acc_q3,con_med\n");
    for ((n_agents, min_votes), group) in group_runs(runs) {
        for i in 0..common_steps(&group) {
            let acc: Vec<f64> = group
                .iter()
                .filter_map(|r| r.frames[i].map_accuracy)
                .collect();
            let con: Vec<f64> = group
                .iter()
                .map(|r| r.frames[i].consolidation_coverage)
                .collect();
            let (m, q1, q3) = if acc.is_empty() {
                (String::new(), String::new(), String::new())
            } else {
                (
                    median(&acc).to_string(),
                    quantile(&acc, 0.25).to_string(),
                    quantile(&acc, 0.75).to_string(),
                )
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                n_agents,
                min_votes,
                group[0].frames[i].step,
                m,
                q1,
                q3,
                median(&con),
            )
            .unwrap();
        }
    }
    out
}

/// The three storage-cost curves (realized, optimal, worst) plus the exact
/// adversarial bound, per configuration.
pub fn fig6_cost(runs: &[RunSummary]) -> String {
    let mut out = String::from(
        "n_agents,min_votes,step,realized_med,optimal_med,worst_med,worst_exact_med\n",
    );
    for ((n_agents, min_votes), group) in group_runs(runs) {
        for i in 0..common_steps(&group) {
            let pick = |f: fn(&ParsedFrame) -> f64| -> f64 {
                let v: Vec<f64> = group.iter().map(|r| f(&r.frames[i])).collect();
                median(&v)
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                n_agents,
                min_votes,
                group[0].frames[i].step,
                pick(|f| f.realized_cost),
                pick(|f| f.optimal_cost),
                pick(|f| f.worst_cost),
                pick(|f| f.worst_cost_exact),
            )
            .unwrap();
        }
    }
    out
}

/// NodeID and tuple-hash histograms, summed over replicates.
pub fn fig7_histograms(runs: &[RunSummary]) -> String {
    let mut out = String::from("n_agents,min_votes,kind,value,count\n");
    for ((n_agents, min_votes), group) in group_runs(runs) {
        let mut nodeid: BTreeMap<u64, u64> = BTreeMap::new();
        let mut hash: BTreeMap<u64, u64> = BTreeMap::new();
        for run in &group {
            for (&v, &c) in &run.nodeid_histogram {
                *nodeid.entry(v).or_insert(0) += c;
            }
            for (&v, &c) in &run.hash_histogram {
                *hash.entry(v).or_insert(0) += c;
            }
        }
        for (v, c) in nodeid {
            writeln!(out, "{n_agents},{min_votes},nodeid,{v},{c}").unwrap();
        }
        for (v, c) in hash {
            writeln!(out, "{n_agents},{min_votes},hash,{v},{c}").unwrap();
        }
    }
    out
}

/// Bytes per second per agent over time, per configuration.
pub fn fig8_bandwidth(runs: &[RunSummary]) -> String {
    let mut out = String::from("n_agents,min_votes,step,bytes_per_s_med,q1,q3\n");
    for ((n_agents, min_votes), group) in group_runs(runs) {
        for i in 0..common_steps(&group) {
            let rates: Vec<f64> = group
                .iter()
                .map(|r| {
                    r.frames[i].bytes_sent_total as f64 / r.n_agents as f64 / r.dt
                })
                .collect();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                n_agents,
                min_votes,
                group[0].frames[i].step,
                median(&rates),
                quantile(&rates, 0.25),
                quantile(&rates, 0.75),
            )
            .unwrap();
        }
    }
    out
}

/// Produces every figure CSV into `out_dir`.
pub fn write_report(
    runs_root: &Path,
    out_dir: &Path,
    model: &ClassModel,
    n_max: u32,
) -> Result<(), ReportError> {
    let runs = discover_runs(runs_root)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("fig3_ensemble.csv"), fig3_ensemble(model, n_max)?)?;
    std::fs::write(out_dir.join("fig4_coverage.csv"), fig4_coverage(&runs))?;
    std::fs::write(out_dir.join("fig5_accuracy.csv"), fig5_accuracy(&runs))?;
    std::fs::write(out_dir.join("fig6_cost.csv"), fig6_cost(&runs))?;
    std::fs::write(out_dir.join("fig7_histograms.csv"), fig7_histograms(&runs))?;
    std::fs::write(out_dir.join("fig8_bandwidth.csv"), fig8_bandwidth(&runs))?;
    Ok(())
}

/// Recomputes the cost curves from a packing trace
/// (`step,agent,neighbors,stored` rows) with the given uniform capacity.
///
/// `worst` is the reference construction; it is not a sound upper bound at
/// low load, so the exact adversarial maximum is emitted alongside it and
/// the sandwich `optimal <= realized <= worst_exact` always holds.
pub fn binpack_audit(packing_csv: &str, capacity: u32) -> Result<String, ReportError> {
    let mut by_step: BTreeMap<u64, Vec<(u32, u32)>> = BTreeMap::new();
    for (lineno, line) in packing_csv.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || ReportError::Parse {
            path: "packing trace".into(),
            what: format!("line {}: expected step,agent,neighbors,stored", lineno + 1),
        };
        if cols.len() != 4 {
            return Err(bad());
        }
        let step: u64 = cols[0].parse().map_err(|_| bad())?;
        let neighbors: u32 = cols[2].parse().map_err(|_| bad())?;
        let stored: u32 = cols[3].parse().map_err(|_| bad())?;
        by_step.entry(step).or_default().push((neighbors, stored));
    }
    let mut out = String::from("step,realized,optimal,worst,worst_exact\n");
    for (step, rows) in by_step {
        let neighbor_counts: Vec<u32> = rows.iter().map(|&(n, _)| n).collect();
        let loads: Vec<u32> = rows.iter().map(|&(_, s)| s).collect();
        let items: u32 = loads.iter().sum();
        let realized = binpack::realized_cost(&loads, &neighbor_counts, capacity)?;
        let optimal = binpack::optimal_cost(items, &neighbor_counts, capacity)?;
        let worst = binpack::worst_cost(items, &neighbor_counts, capacity)?;
        let worst_exact = binpack::worst_cost_exact(items, &neighbor_counts, capacity)?;
        writeln!(out, "{step},{realized},{optimal},{worst},{worst_exact}").unwrap();
    }
    Ok(out)
}
