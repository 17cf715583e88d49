//! Renders a [`RunOutput`] to the on-disk run directory.
//!
//! All renderers produce complete strings so determinism checks can compare
//! runs byte for byte without touching the filesystem.

use std::fmt::Write as _;
use std::path::Path;

use super::runner::RunOutput;

pub fn render_metrics_csv(run: &RunOutput) -> String {
    let mut out = String::from(
        "step,observed_coverage,consolidation_coverage,map_accuracy,bytes_sent_total,\
         realized_cost,optimal_cost,worst_cost,worst_cost_exact\n",
    );
    for f in &run.frames {
        let acc = f.map_accuracy.map(|a| a.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            f.step,
            f.observed_coverage,
            f.consolidation_coverage,
            acc,
            f.bytes_sent_total,
            f.realized_cost,
            f.optimal_cost,
            f.worst_cost,
            f.worst_cost_exact
        )
        .unwrap();
    }
    out
}

pub fn render_packing_csv(run: &RunOutput) -> String {
    let mut out = String::from("step,agent,neighbors,stored\n");
    for snap in &run.packing {
        for (agent, (&nbr, &load)) in snap
            .neighbor_counts
            .iter()
            .zip(&snap.loads)
            .enumerate()
        {
            writeln!(out, "{},{},{},{}", snap.step, agent, nbr, load).unwrap();
        }
    }
    out
}

pub fn render_observations_csv(run: &RunOutput) -> String {
    let mut out = String::from("step,agent,object,label\n");
    for o in &run.observations {
        writeln!(out, "{},{},{},{}", o.step, o.agent, o.object, o.label).unwrap();
    }
    out
}

pub fn render_consolidations_csv(run: &RunOutput) -> String {
    let mut out = String::from("step,agent,object,true_class,label,votes,correct\n");
    for c in &run.consolidations {
        let (object, truth, correct) = match c.object {
            Some(obj) => {
                let truth = run.scene[obj as usize].class;
                (
                    obj.to_string(),
                    truth.to_string(),
                    i64::from(truth == c.label),
                )
            }
            None => (String::new(), String::new(), -1),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.step, c.agent, object, truth, c.label, c.votes, correct
        )
        .unwrap();
    }
    out
}

pub fn render_final_map_csv(run: &RunOutput) -> String {
    let map = run.final_map();
    let mut out = String::from("object,true_class,consolidated_class,votes\n");
    for obj in &run.scene {
        match map.get(&obj.id) {
            Some((class, votes)) => {
                writeln!(out, "{},{},{},{}", obj.id, obj.class, class, votes).unwrap()
            }
            None => writeln!(out, "{},{},,", obj.id, obj.class).unwrap(),
        }
    }
    out
}

pub fn render_histograms_csv(run: &RunOutput) -> String {
    let mut out = String::from("kind,value,count\n");
    for (&value, &count) in &run.nodeid_histogram {
        writeln!(out, "nodeid,{value},{count}").unwrap();
    }
    for (&value, &count) in &run.hash_histogram {
        writeln!(out, "hash,{value},{count}").unwrap();
    }
    out
}

pub fn render_run_info(run: &RunOutput) -> String {
    let mut out = String::new();
    writeln!(out, "seed = {}", run.seed).unwrap();
    writeln!(out, "steps = {}", run.steps).unwrap();
    writeln!(
        out,
        "tuple_losses = {}\nforced_stores = {}\nreplies_dropped = {}\nfloods_dropped = {}",
        run.audit.tuple_losses,
        run.audit.forced_stores,
        run.audit.replies_dropped,
        run.audit.floods_dropped
    )
    .unwrap();
    out.push_str(&run.config.to_text());
    out
}

pub fn render_mesh_dump(run: &RunOutput) -> String {
    let mut out = String::from("# agent tuple hash class x y consolidated\n");
    for line in &run.final_dump {
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Writes the complete run directory: metrics, packing trace, event logs,
/// final map, histograms, scene, mesh dump, and run info.
pub fn write_run(dir: &Path, run: &RunOutput) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let files: [(&str, String); 9] = [
        ("metrics.csv", render_metrics_csv(run)),
        ("packing.csv", render_packing_csv(run)),
        ("observations.csv", render_observations_csv(run)),
        ("consolidations.csv", render_consolidations_csv(run)),
        ("final_map.csv", render_final_map_csv(run)),
        ("histograms.csv", render_histograms_csv(run)),
        ("run_info.txt", render_run_info(run)),
        ("mesh_dump.txt", render_mesh_dump(run)),
        ("scene.txt", crate::env::scene_to_text(&run.scene)),
    ];
    for (name, content) in files {
        std::fs::write(dir.join(name), content)?;
    }
    Ok(())
}
