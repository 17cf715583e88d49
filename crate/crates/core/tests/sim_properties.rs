//! Whole-simulation properties: determinism, the degenerate single-agent
//! swarm, vote floors, timeout behavior, metric consistency, and
//! quiescent-map shape on a well-connected world.

use std::collections::BTreeMap;

use swarmmap::sim::{
    self, consolidation_coverage, map_accuracy, observation_coverage, output, run_experiment,
};
use swarmmap::SimConfig;

fn quick_config() -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.n_agents = 12;
    cfg.scene_objects = 20;
    cfg
}

#[test]
fn identical_seeds_give_bit_identical_traces() {
    let cfg = quick_config();
    let a = run_experiment(&cfg, 99, 500).unwrap();
    let b = run_experiment(&cfg, 99, 500).unwrap();
    assert_eq!(output::render_metrics_csv(&a), output::render_metrics_csv(&b));
    assert_eq!(output::render_packing_csv(&a), output::render_packing_csv(&b));
    assert_eq!(output::render_final_map_csv(&a), output::render_final_map_csv(&b));
    assert_eq!(output::render_mesh_dump(&a), output::render_mesh_dump(&b));
    assert_eq!(output::render_histograms_csv(&a), output::render_histograms_csv(&b));
    // different seeds genuinely differ
    let c = run_experiment(&cfg, 100, 500).unwrap();
    assert_ne!(output::render_metrics_csv(&a), output::render_metrics_csv(&c));
}

#[test]
fn degenerate_single_agent_swarm_completes_its_map() {
    // one agent, one vote: with a perfect classifier every observed object
    // ends up consolidated under its observed (true) label
    let classes_path = std::env::temp_dir().join("swarmmap_perfect_classes.csv");
    let table: String = (1..=13).map(|i| format!("class{i},1.0\n")).collect();
    std::fs::write(&classes_path, table).unwrap();

    let mut cfg = SimConfig::default();
    cfg.n_agents = 1;
    cfg.min_votes = 1;
    cfg.arena_size = 4.0;
    cfg.scene_objects = 5;
    cfg.classes_file = Some(classes_path.display().to_string());
    // a lone diffusing agent needs two sightings of an object to trigger
    // consolidation; give it a long horizon
    let run = run_experiment(&cfg, 5, 16000).unwrap();

    let observed: Vec<u32> = {
        let mut ids: Vec<u32> = run.observations.iter().map(|o| o.object).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    assert!(!observed.is_empty(), "the agent found nothing at all");
    let map = run.final_map();
    for obj in &observed {
        let (class, votes) = map
            .get(obj)
            .unwrap_or_else(|| panic!("object {obj} observed but never consolidated"));
        assert_eq!(*class, run.scene[*obj as usize].class);
        assert!(*votes >= 1);
    }
    assert_eq!(run.audit.tuple_losses, 0);
}

#[test]
fn consolidations_respect_the_vote_floor() {
    let mut cfg = quick_config();
    cfg.min_votes = 3;
    let run = run_experiment(&cfg, 11, 2500).unwrap();
    assert!(!run.consolidations.is_empty(), "no consolidations to check");
    for c in &run.consolidations {
        assert!(c.votes >= 3, "consolidation from {} votes", c.votes);
    }
}

#[test]
fn recording_timeout_spaces_observations() {
    let cfg = quick_config();
    let run = run_experiment(&cfg, 21, 1500).unwrap();
    let mut last_by_agent: BTreeMap<u16, u64> = BTreeMap::new();
    assert!(run.observations.len() > 10);
    for obs in &run.observations {
        if let Some(&prev) = last_by_agent.get(&obs.agent) {
            assert!(
                obs.step - prev >= cfg.recording_timeout as u64,
                "agent {} recorded at {} and {}",
                obs.agent,
                prev,
                obs.step
            );
        }
        last_by_agent.insert(obs.agent, obs.step);
    }
}

#[test]
fn coverage_ordering_and_monotonicity() {
    let run = run_experiment(&quick_config(), 31, 2000).unwrap();
    let mut prev_obs = 0.0;
    for f in &run.frames {
        assert!(f.consolidation_coverage <= f.observed_coverage + 1e-12);
        assert!(f.observed_coverage + 1e-12 >= prev_obs, "observation coverage dipped");
        prev_obs = f.observed_coverage;
        assert!((0.0..=1.0).contains(&f.observed_coverage));
        assert!((0.0..=1.0).contains(&f.consolidation_coverage));
        if let Some(acc) = f.map_accuracy {
            assert!((0.0..=1.0).contains(&acc));
        }
    }
}

#[test]
fn frames_agree_with_post_hoc_recomputation() {
    let run = run_experiment(&quick_config(), 41, 1200).unwrap();
    for &at in &[0usize, 137, 600, 1199] {
        let f = &run.frames[at];
        assert_eq!(f.observed_coverage, observation_coverage(&run, f.step), "step {at}");
        assert_eq!(
            f.consolidation_coverage,
            consolidation_coverage(&run, f.step),
            "step {at}"
        );
        assert_eq!(f.map_accuracy, map_accuracy(&run, f.step), "step {at}");
    }
}

#[test]
fn bytes_accounting_matches_the_node_counters() {
    let run = run_experiment(&quick_config(), 51, 800).unwrap();
    let from_frames: u64 = run.frames.iter().map(|f| f.bytes_sent_total).sum();
    assert_eq!(from_frames, run.bytes_sent_by_node_stats);
    let from_rows: u64 = run
        .per_agent_bytes
        .iter()
        .flat_map(|row| row.iter().map(|&b| b as u64))
        .sum();
    assert_eq!(from_frames, from_rows);
}

#[test]
fn cost_sandwich_holds_with_the_exact_bound() {
    let run = run_experiment(&quick_config(), 61, 1500).unwrap();
    for f in &run.frames {
        assert!(
            f.optimal_cost <= f.realized_cost + 1e-9,
            "step {}: optimal {} > realized {}",
            f.step,
            f.optimal_cost,
            f.realized_cost
        );
        assert!(
            f.realized_cost <= f.worst_cost_exact + 1e-9,
            "step {}: realized {} > exact worst {}",
            f.step,
            f.realized_cost,
            f.worst_cost_exact
        );
        assert!(f.worst_cost <= f.worst_cost_exact + 1e-9);
    }
}

#[test]
fn quiescent_connected_world_holds_one_consolidation_per_object() {
    // complete communication graph, few objects, long tail
    let mut cfg = SimConfig::default();
    cfg.n_agents = 6;
    cfg.arena_size = 4.0;
    cfg.comm_range = 6.0;
    cfg.scene_objects = 8;
    cfg.min_votes = 2;
    let run = run_experiment(&cfg, 71, 6000).unwrap();

    let observed: std::collections::BTreeSet<u32> =
        run.observations.iter().map(|o| o.object).collect();
    assert_eq!(observed.len(), 8, "all objects observed in a tiny arena");

    // exactly one live consolidated annotation per observed object
    let mut per_object: BTreeMap<u32, u32> = BTreeMap::new();
    for t in &run.tuples {
        if t.consolidated && t.erased_step.is_none() {
            *per_object.entry(t.object.expect("consolidated at object center")).or_insert(0) += 1;
        }
    }
    for obj in &observed {
        assert_eq!(
            per_object.get(obj),
            Some(&1),
            "object {obj} has {:?} live consolidated annotations",
            per_object.get(obj)
        );
    }

    // no agent is sitting on an unprocessed consolidation trigger
    let dump = output::render_mesh_dump(&run);
    let mut by_agent_location: BTreeMap<(String, String, String), u32> = BTreeMap::new();
    for line in dump.lines().skip(1) {
        let cols: Vec<&str> = line.split(' ').collect();
        let key = (cols[0].to_string(), cols[4].to_string(), cols[5].to_string());
        *by_agent_location.entry(key).or_insert(0) += 1;
    }
    for ((agent, x, y), count) in by_agent_location {
        assert!(
            count < 2,
            "agent {agent} still holds {count} tuples at ({x}, {y})"
        );
    }
}

#[test]
fn node_ids_dominate_hash_buckets_in_the_standard_swarm() {
    let run = run_experiment(&SimConfig::default(), 3, 2000).unwrap();
    let median_of = |counts: Vec<(u64, u64)>| -> u64 {
        let total: u64 = counts.iter().map(|&(_, c)| c).sum();
        let mut acc = 0;
        for (v, c) in counts {
            acc += c;
            if acc * 2 >= total {
                return v;
            }
        }
        0
    };
    let median_nodeid = median_of(
        run.nodeid_histogram.iter().map(|(&v, &c)| (v as u64, c)).collect(),
    );
    let median_hash = median_of(
        run.hash_histogram.iter().map(|(&v, &c)| (v as u64, c)).collect(),
    );
    // the staircase tops out at 13 classes * step 5
    assert!(
        median_nodeid > 65,
        "median NodeID {median_nodeid} does not clear the top hash bucket"
    );
    assert!(median_hash <= 65);
}

#[test]
fn single_isolated_agent_has_unit_node_id_histogram() {
    let mut cfg = SimConfig::default();
    cfg.n_agents = 1;
    cfg.scene_objects = 3;
    cfg.arena_size = 4.0;
    let run = run_experiment(&cfg, 81, 400).unwrap();
    let keys: Vec<u32> = run.nodeid_histogram.keys().copied().collect();
    assert_eq!(keys, vec![1], "isolated agent always advertises NodeID 1");
}

#[test]
fn hash_histogram_sits_on_the_staircase() {
    let run = run_experiment(&quick_config(), 91, 1500).unwrap();
    for &bucket in run.hash_histogram.keys() {
        assert!(
            bucket % 5 == 0 && bucket <= 65,
            "unexpected hash bucket {bucket}"
        );
    }
    assert!(run.hash_histogram.keys().any(|&b| b > 0), "raw buckets seen");
}

#[test]
fn externally_supplied_scenes_drive_the_run() {
    // generate a scene, write it out, and feed it back through the config
    let cfg = quick_config();
    let generated = run_experiment(&cfg, 17, 5).unwrap().scene;
    let path = std::env::temp_dir().join(format!(
        "swarmmap_scene_{}.txt",
        std::process::id()
    ));
    std::fs::write(&path, swarmmap::env::scene_to_text(&generated)).unwrap();

    let mut cfg2 = cfg.clone();
    cfg2.scene_file = Some(path.display().to_string());
    let run = run_experiment(&cfg2, 99, 300).unwrap();
    assert_eq!(run.scene, generated, "loaded scene drives the world");
    assert!(run.frames.len() == 300);
    std::fs::remove_file(&path).ok();
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut cfg = SimConfig::default();
    cfg.min_votes = 0;
    assert!(matches!(
        run_experiment(&cfg, 1, 10),
        Err(sim::SimError::Config(_))
    ));
}
