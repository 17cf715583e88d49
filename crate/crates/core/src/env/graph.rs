//! Communication graph: who hears whom this step.

/// Symmetric adjacency under a disc model: an edge whenever the planar
/// distance is at most `range` (boundary inclusive). No line-of-sight
/// occlusion. Entry `i` lists the neighbors of agent `i`, ascending.
pub fn neighbor_graph(positions: &[[f64; 2]], range: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let range_sq = range * range;
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if dx * dx + dy * dy <= range_sq {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    adjacency
}
