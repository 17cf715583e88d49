//! Quick diagnostic run: prints coverage/accuracy/cost milestones.

use swarmmap::sim::run_experiment;
use swarmmap::SimConfig;

fn main() {
    let mut cfg = SimConfig::default();
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2500);
    if let Some(n) = args.next().and_then(|s| s.parse().ok()) {
        cfg.n_agents = n;
    }
    if let Some(v) = args.next().and_then(|s| s.parse().ok()) {
        cfg.min_votes = v;
    }
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let t0 = std::time::Instant::now();
    let run = run_experiment(&cfg, seed, steps).unwrap();
    let dt = t0.elapsed();

    println!(
        "N={} V={} seed={} steps={} wall={:.2?}",
        cfg.n_agents, cfg.min_votes, seed, steps, dt
    );
    for &at in &[steps / 10, steps / 4, steps / 2, steps - 1] {
        let f = &run.frames[at as usize];
        println!(
            "step {:>6}: obs={:.3} con={:.3} acc={:?} bytes={} realized={:.3} opt={:.4} worst={:.3} worst_exact={:.3}",
            f.step,
            f.observed_coverage,
            f.consolidation_coverage,
            f.map_accuracy.map(|a| (a * 1000.0).round() / 1000.0),
            f.bytes_sent_total,
            f.realized_cost,
            f.optimal_cost,
            f.worst_cost,
            f.worst_cost_exact
        );
    }
    println!(
        "observations={} consolidations={} tuples={} audit={:?}",
        run.observations.len(),
        run.consolidations.len(),
        run.tuples.len(),
        run.audit
    );
    let live: usize = run.tuples.iter().filter(|t| t.erased_step.is_none()).count();
    let live_raw: usize = run
        .tuples
        .iter()
        .filter(|t| t.erased_step.is_none() && !t.consolidated)
        .count();
    println!("live tuples={live} (raw {live_raw})");
    let sandwich_exact = run
        .frames
        .iter()
        .filter(|f| !(f.optimal_cost <= f.realized_cost + 1e-9 && f.realized_cost <= f.worst_cost_exact + 1e-9))
        .count();
    let sandwich_constructed = run
        .frames
        .iter()
        .filter(|f| f.realized_cost > f.worst_cost + 1e-9)
        .count();
    println!("sandwich violations: exact={sandwich_exact} construction={sandwich_constructed}");
    let median_of = |hist: &std::collections::BTreeMap<u64, u64>| -> u64 {
        let total: u64 = hist.values().sum();
        let mut acc = 0;
        for (&v, &c) in hist {
            acc += c;
            if acc * 2 >= total {
                return v;
            }
        }
        0
    };
    let nodeid64: std::collections::BTreeMap<u64, u64> =
        run.nodeid_histogram.iter().map(|(&v, &c)| (v as u64, c)).collect();
    let hash64: std::collections::BTreeMap<u64, u64> =
        run.hash_histogram.iter().map(|(&v, &c)| (v as u64, c)).collect();
    // fraction of (nodeid sample, hash sample) pairs with nodeid above hash
    let total_n: u64 = nodeid64.values().sum();
    let total_h: u64 = hash64.values().sum();
    let mut wins = 0u128;
    for (&dv, &dc) in &nodeid64 {
        for (&hv, &hc) in &hash64 {
            if dv > hv {
                wins += dc as u128 * hc as u128;
            }
        }
    }
    println!(
        "median NodeID = {}, median hash = {}, P(nodeid > hash) = {:.3}",
        median_of(&nodeid64),
        median_of(&hash64),
        wins as f64 / (total_n as f64 * total_h as f64)
    );
    let mean_bytes_per_s_per_agent: f64 = run
        .frames
        .iter()
        .map(|f| f.bytes_sent_total as f64)
        .sum::<f64>()
        / run.frames.len() as f64
        / cfg.n_agents as f64
        / cfg.dt;
    println!("mean bytes/s/agent = {mean_bytes_per_s_per_agent:.2}");
    let active_end = run
        .frames
        .iter()
        .position(|f| f.consolidation_coverage >= 0.8)
        .unwrap_or(run.frames.len() - 1)
        .max(1);
    let active_mean: f64 = run.frames[..active_end]
        .iter()
        .map(|f| f.bytes_sent_total as f64)
        .sum::<f64>()
        / active_end as f64
        / cfg.n_agents as f64
        / cfg.dt;
    println!("mapping-phase mean bytes/s/agent = {active_mean:.2} (through step {active_end})");
}
