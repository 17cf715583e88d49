//! Probability that plurality voting identifies the true class.
//!
//! Class 1 is the correct class by convention. Each of the `n` votes is
//! independently correct with probability `p`, and each of the `c - 1`
//! incorrect classes is equally likely. The closed form sums over integer
//! partitions of `n` (vote-count shapes); an enumeration oracle over all
//! `c^n` ordered vote sequences checks it.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::partition::{partitions, Partition};
use super::EnsembleError;
use crate::numeric::{binomial, ratio_to_f64, KahanSum};

/// Enumeration guard for the brute-force oracle: at most 10^8 sequences.
const ORACLE_SEQUENCE_CAP: u128 = 100_000_000;
/// Partition enumeration stays exact and affordable up to this vote count.
const MAX_VOTES: u32 = 64;

/// Per-class vote counts `z = (z_1, ..., z_c)`; index 0 is the correct class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    counts: Vec<u32>,
}

impl VoteTally {
    pub fn new(counts: Vec<u32>) -> Result<Self, EnsembleError> {
        if counts.len() < 2 {
            return Err(EnsembleError::InvalidTally("need at least two classes"));
        }
        Ok(VoteTally { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn class_count(&self) -> u32 {
        self.counts.len() as u32
    }
}

/// Exact multinomial coefficient n! / (z_1! ... z_k!) with n the sum of the
/// parts, evaluated as a product of binomials.
pub fn multinomial_coefficient(parts: &[u32]) -> BigUint {
    let mut remaining: u64 = parts.iter().map(|&p| p as u64).sum();
    let mut acc = BigUint::one();
    for &z in parts {
        acc *= binomial(remaining, z as u64);
        remaining -= z as u64;
    }
    acc
}

fn check_probability(p: f64) -> Result<(), EnsembleError> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(EnsembleError::InvalidProbability(p));
    }
    Ok(())
}

fn check_classes(c: u32) -> Result<(), EnsembleError> {
    if c < 2 {
        return Err(EnsembleError::TooFewClasses(c));
    }
    Ok(())
}

/// Multinomial pmf of a tally: `phi(z | n, p)` with the correct class at
/// index 0 and the error mass spread evenly over the other classes.
pub fn pmf_phi(tally: &VoteTally, p: f64) -> Result<f64, EnsembleError> {
    check_probability(p)?;
    let c = tally.class_count();
    let n = tally.total();
    let z1 = tally.counts[0];
    let q = (1.0 - p) / (c - 1) as f64;
    let coeff = multinomial_coefficient(&tally.counts)
        .to_f64()
        .unwrap_or(f64::INFINITY);
    Ok(coeff * p.powi(z1 as i32) * q.powi((n - z1) as i32))
}

/// Number of vote-count vectors `z*` (correct class maximal) that share the
/// shape of `xi`: `C(c-1, w-1) * multinomial(w-1; k_1, ..., k_{xi_1} - 1)`.
pub fn preimage_count(xi: &Partition, c: u32) -> Result<BigUint, EnsembleError> {
    let omega = xi.length();
    if omega as u32 > c {
        return Err(EnsembleError::InfeasiblePartition {
            length: omega,
            classes: c,
        });
    }
    let mut mult = xi.multiplicities();
    // one slot at the top vote count is taken by the correct class
    *mult.last_mut().expect("partition is nonempty") -= 1;
    Ok(binomial(c as u64 - 1, omega as u64 - 1) * multinomial_coefficient(&mult))
}

/// Probability that the correct class wins given the vote shape: the
/// reciprocal of the winning tie width.
pub fn success_given_partition(xi: &Partition) -> f64 {
    1.0 / xi.multiplicity_of_largest() as f64
}

/// `p` as an exact dyadic rational `m / 2^k`, with `k` minimal.
fn f64_to_dyadic(p: f64) -> (BigUint, u64) {
    if p == 0.0 {
        return (BigUint::zero(), 0);
    }
    let bits = p.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut k) = if exp == 0 {
        (frac, 1074u64) // subnormal
    } else {
        ((1u64 << 52) | frac, (1075 - exp) as u64)
    };
    while m & 1 == 0 && k > 0 {
        m >>= 1;
        k -= 1;
    }
    (BigUint::from(m), k)
}

/// Closed-form probability that plurality voting over `n` independent votes
/// picks the correct class, for per-vote accuracy `p` and `c` classes.
///
/// The sum runs over integer partitions of `n`; shapes with more parts than
/// classes cannot occur and are skipped, which keeps the formula total for
/// `n > c`. All coefficients are exact; a single correctly rounded division
/// produces the result, so the algebraic identities `p_ens(1, p) = p` and
/// `p_ens(2, p) = p` hold bit-exactly.
pub fn ensemble_accuracy(n: u32, p: f64, c: u32) -> Result<f64, EnsembleError> {
    check_probability(p)?;
    check_classes(c)?;
    if n == 0 {
        return Err(EnsembleError::ZeroCount);
    }
    if n > MAX_VOTES {
        return Err(EnsembleError::VoteCountTooLarge(n));
    }

    let (pm, k) = f64_to_dyadic(p);
    let qm = (BigUint::one() << k) - &pm; // 1 - p, over the same 2^k
    let cm1 = BigUint::from(c - 1);

    // power tables for j in 0..=n
    let table = |base: &BigUint| -> Vec<BigUint> {
        let mut t = Vec::with_capacity(n as usize + 1);
        t.push(BigUint::one());
        for _ in 0..n {
            t.push(t.last().unwrap() * base);
        }
        t
    };
    let p_pow = table(&pm);
    let q_pow = table(&qm);
    let c_pow = table(&cm1);

    let mut numer = BigUint::zero();
    for xi in partitions(n)? {
        let omega = xi.length() as u64;
        if omega > c as u64 {
            continue;
        }
        let coeff = multinomial_coefficient(xi.parts())
            * binomial(c as u64, omega)
            * multinomial_coefficient(&xi.multiplicities());
        let top = xi.largest() as usize;
        numer += coeff * &p_pow[top] * &q_pow[n as usize - top] * &c_pow[top];
    }
    let denom = (BigUint::one() << (k * n as u64)) * &c_pow[n as usize] * BigUint::from(c);
    Ok(ratio_to_f64(&numer, &denom))
}

/// Independent oracle: enumerates every ordered vote sequence, weights it by
/// its probability, and credits the expected 1/(tie width) whenever the
/// correct class is among the winners.
pub fn brute_force_ensemble(n: u32, p: f64, c: u32) -> Result<f64, EnsembleError> {
    check_probability(p)?;
    check_classes(c)?;
    if n == 0 {
        return Err(EnsembleError::ZeroCount);
    }
    let size = (c as u128)
        .checked_pow(n)
        .filter(|&s| s <= ORACLE_SEQUENCE_CAP)
        .ok_or(EnsembleError::InstanceTooLarge { votes: n, classes: c })?;
    let _ = size;

    let q = (1.0 - p) / (c - 1) as f64;
    let mut p_pow = vec![1.0f64; n as usize + 1];
    let mut q_pow = vec![1.0f64; n as usize + 1];
    for i in 1..=n as usize {
        p_pow[i] = p_pow[i - 1] * p;
        q_pow[i] = q_pow[i - 1] * q;
    }

    struct Dfs<'a> {
        n: u32,
        c: u32,
        counts: Vec<u32>,
        p_pow: &'a [f64],
        q_pow: &'a [f64],
        acc: KahanSum,
    }
    impl Dfs<'_> {
        fn run(&mut self, depth: u32, max: u32, ties: u32) {
            if depth == self.n {
                if self.counts[0] == max {
                    let correct = self.counts[0] as usize;
                    let w = self.p_pow[correct] * self.q_pow[self.n as usize - correct];
                    self.acc.add(w / ties as f64);
                }
                return;
            }
            for cls in 0..self.c as usize {
                self.counts[cls] += 1;
                let (nmax, nties) = if self.counts[cls] > max {
                    (self.counts[cls], 1)
                } else if self.counts[cls] == max {
                    (max, ties + 1)
                } else {
                    (max, ties)
                };
                self.run(depth + 1, nmax, nties);
                self.counts[cls] -= 1;
            }
        }
    }

    let mut dfs = Dfs {
        n,
        c,
        counts: vec![0; c as usize],
        p_pow: &p_pow,
        q_pow: &q_pow,
        acc: KahanSum::default(),
    };
    dfs.run(0, 0, c); // zero votes: all classes tied at zero
    Ok(dfs.acc.value())
}

/// Smallest vote count whose ensemble accuracy reaches `target`, up to
/// `n_max`; `None` when no count in range suffices.
pub fn min_votes_for_target(
    p: f64,
    c: u32,
    target: f64,
    n_max: u32,
) -> Result<Option<u32>, EnsembleError> {
    if !target.is_finite() || target <= 0.0 || target > 1.0 {
        return Err(EnsembleError::InvalidProbability(target));
    }
    for n in 1..=n_max {
        if ensemble_accuracy(n, p, c)? >= target {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Test-side multinomial oracle: plain u128 factorial-free fold.
    fn multinomial_u128(parts: &[u32]) -> u128 {
        fn binom(n: u128, k: u128) -> u128 {
            let k = k.min(n - k);
            let mut acc = 1u128;
            for i in 0..k {
                acc = acc * (n - i) / (i + 1);
            }
            acc
        }
        let mut remaining: u128 = parts.iter().map(|&p| p as u128).sum();
        let mut acc = 1u128;
        for &z in parts {
            acc *= binom(remaining, z as u128);
            remaining -= z as u128;
        }
        acc
    }

    #[test]
    fn multinomial_examples() {
        assert_eq!(multinomial_coefficient(&[3]), BigUint::from(1u32));
        assert_eq!(multinomial_coefficient(&[1, 1, 1]), BigUint::from(6u32));
        // cross-checked against the repeated-binomial fold below
        assert_eq!(
            multinomial_coefficient(&[5, 3, 2, 1, 1]),
            BigUint::from(332_640u32)
        );
        assert_eq!(multinomial_u128(&[5, 3, 2, 1, 1]), 332_640);
        for parts in [vec![4, 4], vec![7, 0, 2], vec![2, 2, 2, 2]] {
            assert_eq!(
                multinomial_coefficient(&parts),
                BigUint::from(multinomial_u128(&parts))
            );
        }
    }

    #[test]
    fn pmf_all_correct_at_certainty() {
        let t = VoteTally::new(vec![4, 0, 0]).unwrap();
        assert_eq!(pmf_phi(&t, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn pmf_two_way_split() {
        let t = VoteTally::new(vec![1, 1]).unwrap();
        assert_eq!(pmf_phi(&t, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn pmf_normalizes() {
        // sum over all tallies with fixed total
        fn visit(c: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if prefix.len() == c - 1 {
                prefix.push(left);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for z in 0..=left {
                prefix.push(z);
                visit(c, left - z, prefix, out);
                prefix.pop();
            }
        }
        for (n, c, p) in [(3u32, 4usize, 0.3), (5, 3, 0.926), (6, 5, 0.0), (4, 6, 1.0)] {
            let mut tallies = Vec::new();
            visit(c, n, &mut Vec::new(), &mut tallies);
            let mut sum = KahanSum::default();
            for counts in tallies {
                sum.add(pmf_phi(&VoteTally::new(counts).unwrap(), p).unwrap());
            }
            assert!(
                (sum.value() - 1.0).abs() < 1e-12,
                "n={n} c={c} p={p}: sum={}",
                sum.value()
            );
        }
    }

    #[test]
    fn preimage_examples() {
        let all_correct = Partition::new(vec![5]).unwrap();
        assert_eq!(preimage_count(&all_correct, 13).unwrap(), BigUint::one());
        let split = Partition::new(vec![1, 1]).unwrap();
        assert_eq!(preimage_count(&split, 3).unwrap(), BigUint::from(2u32));
        let too_long = Partition::new(vec![1, 1, 1]).unwrap();
        assert_eq!(
            preimage_count(&too_long, 2).unwrap_err(),
            EnsembleError::InfeasiblePartition { length: 3, classes: 2 }
        );
    }

    /// Exhaustively count vectors z with z_1 maximal, for small n and c.
    fn zstar_count(n: u32, c: u32) -> u64 {
        fn rec(slot: u32, c: u32, left: u32, z1: Option<u32>) -> u64 {
            if slot == c {
                return (left == 0) as u64;
            }
            let mut total = 0;
            for z in 0..=left {
                match z1 {
                    None => total += rec(slot + 1, c, left - z, Some(z)),
                    Some(cap) if z <= cap => total += rec(slot + 1, c, left - z, z1),
                    _ => {}
                }
            }
            total
        }
        rec(0, c, n, None)
    }

    #[test]
    fn preimage_totals_match_exhaustive_zstar_enumeration() {
        for n in 1..=6u32 {
            for c in 2..=6u32 {
                let total: BigUint = partitions(n)
                    .unwrap()
                    .filter(|xi| xi.length() as u32 <= c)
                    .map(|xi| preimage_count(&xi, c).unwrap())
                    .sum();
                assert_eq!(total, BigUint::from(zstar_count(n, c)), "n={n} c={c}");
            }
        }
    }

    #[test]
    fn success_probability_is_reciprocal_tie_width() {
        let strict = Partition::new(vec![3, 1]).unwrap();
        assert_eq!(success_given_partition(&strict), 1.0);
        let pair = Partition::new(vec![2, 2]).unwrap();
        assert_eq!(success_given_partition(&pair), 0.5);
        let triple = Partition::new(vec![1, 1, 1]).unwrap();
        assert_eq!(success_given_partition(&triple), 1.0 / 3.0);
    }

    #[test]
    fn single_and_double_vote_identities_are_exact() {
        for p in [0.0, 0.05, 0.3, 1.0 / 3.0, 0.5, 0.7, 0.757, 0.926, 1.0] {
            for c in [2u32, 3, 5, 13] {
                assert_eq!(ensemble_accuracy(1, p, c).unwrap(), p, "n=1 p={p} c={c}");
                assert_eq!(ensemble_accuracy(2, p, c).unwrap(), p, "n=2 p={p} c={c}");
            }
        }
    }

    #[test]
    fn frozen_chair_value() {
        // brute-force oracle value, frozen; 0.926 is the strongest class
        let v = ensemble_accuracy(3, 0.926, 13).unwrap();
        assert_eq!(v, 0.9890306593333333);
        let oracle = brute_force_ensemble(3, 0.926, 13).unwrap();
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn two_votes_hand_enumeration() {
        // p^2 sure win plus 2 p (1-p) half-credit ties collapses to p
        assert_eq!(ensemble_accuracy(2, 0.7, 5).unwrap(), 0.7);
    }

    #[test]
    fn oracle_three_votes_binary() {
        let v = brute_force_ensemble(3, 0.8, 2).unwrap();
        assert!((v - 0.896).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_oracle_on_a_grid() {
        for n in 1..=4u32 {
            for c in [2u32, 3, 5, 13] {
                for p in [0.1, 0.5, 0.9] {
                    let a = ensemble_accuracy(n, p, c).unwrap();
                    let b = brute_force_ensemble(n, p, c).unwrap();
                    assert!((a - b).abs() < 1e-12, "n={n} c={c} p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn dominance_over_bundled_accuracies() {
        let model = crate::classes::ClassModel::bga_dgcnn();
        for id in model.ids() {
            let p = model.accuracy(id).unwrap();
            let mut prev = 0.0;
            for n in 1..=10u32 {
                let v = ensemble_accuracy(n, p, 13).unwrap();
                assert!(v >= p - 1e-12, "class {id} n={n}: {v} < {p}");
                assert!(v >= prev - 1e-12, "class {id} n={n}: {v} < {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn infeasible_shapes_are_skipped_not_fatal() {
        // n > c exercises the skip path; oracle agrees
        for p in [0.2, 0.8] {
            let a = ensemble_accuracy(5, p, 3).unwrap();
            let b = brute_force_ensemble(5, p, 3).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn min_votes_examples() {
        assert_eq!(min_votes_for_target(1.0, 13, 0.99, 10).unwrap(), Some(1));
        assert_eq!(min_votes_for_target(0.5, 2, 1.0, 40).unwrap(), None);
        // frozen: p_ens(6, 0.757, 13); p_ens(5, ...) sits strictly below it
        let target = 0.9888726357253137;
        assert_eq!(ensemble_accuracy(6, 0.757, 13).unwrap(), target);
        assert!(ensemble_accuracy(5, 0.757, 13).unwrap() < target);
        assert_eq!(min_votes_for_target(0.757, 13, target, 10).unwrap(), Some(6));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            ensemble_accuracy(3, 1.5, 13),
            Err(EnsembleError::InvalidProbability(_))
        ));
        assert!(matches!(
            ensemble_accuracy(3, 0.5, 1),
            Err(EnsembleError::TooFewClasses(1))
        ));
        assert!(matches!(
            ensemble_accuracy(0, 0.5, 3),
            Err(EnsembleError::ZeroCount)
        ));
        assert!(matches!(
            ensemble_accuracy(65, 0.5, 3),
            Err(EnsembleError::VoteCountTooLarge(65))
        ));
        assert!(matches!(
            brute_force_ensemble(30, 0.5, 13),
            Err(EnsembleError::InstanceTooLarge { .. })
        ));
        assert!(matches!(
            min_votes_for_target(0.5, 3, 0.0, 5),
            Err(EnsembleError::InvalidProbability(_))
        ));
    }
}
