//! Storage cost model: items (tuples) packed into bins (agents) whose cost
//! grows as connectivity and free memory shrink.
//!
//! A selected bin costs `1 / (|N_i| * m_i)` with `m_i` the memory left after
//! the assignment; each term is capped at 1, and bins with no neighbors or
//! no free memory contribute exactly 1. The evaluation-grade solvers assume
//! unit item volumes and a uniform capacity, which is what the swarm runs
//! use.

use thiserror::Error;

use crate::ensemble::partitions_bounded;

#[derive(Debug, Error, PartialEq)]
pub enum BinpackError {
    #[error("bin {bin} holds volume {load} over its capacity {capacity}")]
    CapacityExceeded { bin: usize, load: u64, capacity: u64 },
    #[error("item {item} is assigned to nonexistent bin {bin}")]
    BadAssignment { item: usize, bin: usize },
    #[error("{items} unit items cannot fit into total capacity {capacity}")]
    TooManyItems { items: u64, capacity: u64 },
    #[error("instance has no bins")]
    NoBins,
}

/// A concrete item-to-bin assignment to evaluate.
#[derive(Debug, Clone)]
pub struct PackingInstance {
    pub bin_capacity: Vec<u32>,
    pub bin_neighbors: Vec<u32>,
    pub item_volumes: Vec<u32>,
    /// `assignment[item]` is the bin the item is stored on.
    pub assignment: Vec<usize>,
}

impl PackingInstance {
    fn loads(&self) -> Result<Vec<u64>, BinpackError> {
        let mut loads = vec![0u64; self.bin_capacity.len()];
        for (item, &bin) in self.assignment.iter().enumerate() {
            if bin >= loads.len() {
                return Err(BinpackError::BadAssignment { item, bin });
            }
            loads[bin] += self.item_volumes[item] as u64;
        }
        Ok(loads)
    }
}

/// Cost of one selected bin: capped reciprocal of connectivity times free
/// memory. Zero neighbors or zero free memory pin the term at 1.
fn bin_term(neighbors: u32, free: u64) -> f64 {
    if neighbors == 0 || free == 0 {
        1.0
    } else {
        (1.0 / (neighbors as f64 * free as f64)).min(1.0)
    }
}

/// Total cost of the bins selected by an assignment. Empty bins are not
/// selected and contribute nothing.
pub fn assignment_cost(instance: &PackingInstance) -> Result<f64, BinpackError> {
    let loads = instance.loads()?;
    let mut cost = 0.0;
    for (bin, &load) in loads.iter().enumerate() {
        let capacity = instance.bin_capacity[bin] as u64;
        if load > capacity {
            return Err(BinpackError::CapacityExceeded { bin, load, capacity });
        }
        if load > 0 {
            cost += bin_term(instance.bin_neighbors[bin], capacity - load);
        }
    }
    Ok(cost)
}

/// Realized cost straight from per-bin loads, as logged by the simulator.
pub fn realized_cost(
    loads: &[u32],
    neighbor_counts: &[u32],
    capacity: u32,
) -> Result<f64, BinpackError> {
    let mut cost = 0.0;
    for (bin, (&load, &nbr)) in loads.iter().zip(neighbor_counts).enumerate() {
        if load > capacity {
            return Err(BinpackError::CapacityExceeded {
                bin,
                load: load as u64,
                capacity: capacity as u64,
            });
        }
        if load > 0 {
            cost += bin_term(nbr, (capacity - load) as u64);
        }
    }
    Ok(cost)
}

fn check_unit_instance(
    item_count: u32,
    neighbor_counts: &[u32],
    capacity: u32,
) -> Result<(), BinpackError> {
    if neighbor_counts.is_empty() {
        return Err(BinpackError::NoBins);
    }
    let total = neighbor_counts.len() as u64 * capacity as u64;
    if item_count as u64 > total {
        return Err(BinpackError::TooManyItems {
            items: item_count as u64,
            capacity: total,
        });
    }
    Ok(())
}

/// Partition enumeration is the method of record up to this item count
/// (at most 3718 shapes); beyond it the exact allocation sweep takes over.
const PARTITION_ROUTE_MAX_ITEMS: u32 = 28;
/// Distinct load-to-bin pairings are tried exhaustively up to this many bins.
const EXHAUSTIVE_PAIRING_BINS: usize = 8;

/// Minimum achievable cost of storing `item_count` unit items on bins with
/// the given neighbor counts and a uniform `capacity`.
///
/// Small instances enumerate the integer partitions of the item count (at
/// most one part per bin, no part over the capacity) and realize each shape
/// with a rearrangement pairing of loads against connectivity — verified
/// exhaustively on up to [`EXHAUSTIVE_PAIRING_BINS`] bins. Instances whose
/// partition count explodes fall back to an exact allocation sweep over
/// per-bin loads; both routes return the same minimum.
pub fn optimal_cost(
    item_count: u32,
    neighbor_counts: &[u32],
    capacity: u32,
) -> Result<f64, BinpackError> {
    check_unit_instance(item_count, neighbor_counts, capacity)?;
    if item_count == 0 {
        return Ok(0.0);
    }
    if item_count <= PARTITION_ROUTE_MAX_ITEMS {
        optimal_by_partitions(item_count, neighbor_counts, capacity)
    } else {
        Ok(allocation_sweep(item_count, neighbor_counts, capacity, false))
    }
}

fn optimal_by_partitions(
    item_count: u32,
    neighbor_counts: &[u32],
    capacity: u32,
) -> Result<f64, BinpackError> {
    let bins = neighbor_counts.len();
    let mut by_connectivity = neighbor_counts.to_vec();
    by_connectivity.sort_unstable_by(|a, b| b.cmp(a));

    let mut best = f64::INFINITY;
    for xi in partitions_bounded(item_count, capacity.min(item_count))
        .expect("item_count > 0, capacity > 0")
    {
        let k = xi.length();
        if k > bins {
            continue;
        }
        // swapping any used bin for an unused better-connected one never
        // raises a term, so the k best-connected bins suffice
        let chosen = &by_connectivity[..k];
        let cost = if bins <= EXHAUSTIVE_PAIRING_BINS {
            min_cost_exhaustive(xi.parts(), chosen, capacity)
        } else {
            rearrangement_cost(xi.parts(), chosen, capacity)
        };
        if cost < best {
            best = cost;
        }
    }
    Ok(best)
}

/// Rearrangement pairing: heaviest loads onto the best-connected bins, with
/// full bins (free memory zero, term pinned at 1) parked on the
/// worst-connected of the chosen bins so they waste no connectivity.
fn rearrangement_cost(parts: &[u32], chosen: &[u32], capacity: u32) -> f64 {
    let full = parts.iter().filter(|&&l| l == capacity).count();
    let mut cost = full as f64;
    let light = parts.iter().filter(|&&l| l != capacity); // still descending
    for (&nbr, &load) in chosen.iter().zip(light) {
        cost += bin_term(nbr, (capacity - load) as u64);
    }
    cost
}

fn min_cost_exhaustive(parts: &[u32], chosen: &[u32], capacity: u32) -> f64 {
    let mut perm = parts.to_vec();
    perm.sort_unstable();
    let mut best = f64::INFINITY;
    loop {
        let cost: f64 = chosen
            .iter()
            .zip(&perm)
            .map(|(&nbr, &load)| bin_term(nbr, (capacity - load) as u64))
            .sum();
        if cost < best {
            best = cost;
        }
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

/// Advances `v` to its lexicographic successor; false once exhausted.
/// Repeated values are visited once, so this walks distinct permutations.
fn next_permutation(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).unwrap();
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Exact optimum (or adversarial worst, with `maximize`) over all feasible
/// unit-volume assignments: a sweep over bins tracking how many items remain.
fn allocation_sweep(item_count: u32, neighbor_counts: &[u32], capacity: u32, maximize: bool) -> f64 {
    let n = item_count as usize;
    let sentinel = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut table = vec![sentinel; n + 1];
    table[n] = 0.0;
    for &nbr in neighbor_counts {
        let mut next = vec![sentinel; n + 1];
        for left in 0..=n {
            let base = table[left];
            if base == sentinel {
                continue;
            }
            for load in 0..=capacity.min(left as u32) {
                let term = if load > 0 {
                    bin_term(nbr, (capacity - load) as u64)
                } else {
                    0.0
                };
                let slot = &mut next[left - load as usize];
                let cand = base + term;
                if (maximize && cand > *slot) || (!maximize && cand < *slot) {
                    *slot = cand;
                }
            }
        }
        table = next;
    }
    table[0]
}

/// Cost of the reference worst-case construction: one item per isolated bin,
/// then whole bins filled to zero free memory, with any remainder on the bin
/// of lowest nonzero connectivity.
///
/// This is a pessimistic *construction*, not a proven maximum; see
/// [`worst_cost_exact`] for the true adversarial bound.
pub fn worst_cost(
    item_count: u32,
    neighbor_counts: &[u32],
    capacity: u32,
) -> Result<f64, BinpackError> {
    check_unit_instance(item_count, neighbor_counts, capacity)?;
    if item_count == 0 {
        return Ok(0.0);
    }
    let isolated = neighbor_counts.iter().filter(|&&n| n == 0).count() as u64;
    let bins = neighbor_counts.len() as u64;
    let mut left = item_count as u64;
    let mut cost = 0.0;

    // one item on every isolated bin: each term caps at 1
    let iso_used = left.min(isolated);
    cost += iso_used as f64;
    left -= iso_used;

    // fill untouched bins completely: zero free memory, term 1 each
    let fresh = bins - iso_used;
    let fills = (left / capacity as u64).min(fresh);
    cost += fills as f64;
    left -= fills * capacity as u64;

    if left > 0 {
        let fresh_after_fills = fresh - fills;
        if fresh_after_fills > 0 && left < capacity as u64 {
            // remainder goes to the fresh bin of lowest nonzero connectivity
            match neighbor_counts.iter().filter(|&&n| n > 0).min() {
                Some(&low) => cost += bin_term(low, capacity as u64 - left),
                None => cost += 1.0, // only isolated bins exist
            }
        }
        // otherwise the leftovers top up already-counted bins at no extra cost
    }
    Ok(cost)
}

/// Exact maximum assignment cost: the worst feasible placement of
/// `item_count` unit items, by the same allocation sweep as the optimum.
pub fn worst_cost_exact(
    item_count: u32,
    neighbor_counts: &[u32],
    capacity: u32,
) -> Result<f64, BinpackError> {
    check_unit_instance(item_count, neighbor_counts, capacity)?;
    if item_count == 0 {
        return Ok(0.0);
    }
    Ok(allocation_sweep(item_count, neighbor_counts, capacity, true))
}
