//! Integer partitions in part and multiplicity notation.

use super::EnsembleError;

/// An integer partition: a nonincreasing sequence of positive parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self, EnsembleError> {
        if parts.is_empty() {
            return Err(EnsembleError::InvalidPartition("no parts"));
        }
        if parts.contains(&0) {
            return Err(EnsembleError::InvalidPartition("zero part"));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(EnsembleError::InvalidPartition("parts not nonincreasing"));
        }
        Ok(Partition { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// The partitioned integer n.
    pub fn total(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// Number of parts (the partition length).
    pub fn length(&self) -> usize {
        self.parts.len()
    }

    pub fn largest(&self) -> u32 {
        self.parts[0]
    }

    /// Multiplicity notation: entry `j - 1` counts the parts equal to `j`,
    /// for `j` in `1..=largest()`.
    pub fn multiplicities(&self) -> Vec<u32> {
        let mut mult = vec![0u32; self.largest() as usize];
        for &p in &self.parts {
            mult[p as usize - 1] += 1;
        }
        mult
    }

    /// How many parts equal the largest part (the width of a winning tie).
    pub fn multiplicity_of_largest(&self) -> u32 {
        let top = self.largest();
        self.parts.iter().take_while(|&&p| p == top).count() as u32
    }
}

/// Iterator over all partitions of `n` in descending lexicographic order,
/// optionally with every part bounded by `max_part`.
#[derive(Debug, Clone)]
pub struct Partitions {
    current: Option<Vec<u32>>,
}

impl Partitions {
    fn first(n: u32, max_part: u32) -> Vec<u32> {
        // greedy fill: largest allowed parts first
        let mut v = Vec::new();
        let mut left = n;
        while left > 0 {
            let p = left.min(max_part);
            v.push(p);
            left -= p;
        }
        v
    }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        let cur = self.current.take()?;
        let out = Partition { parts: cur.clone() };
        // successor in descending lexicographic order: shrink the rightmost
        // part greater than one, then re-pack the tail greedily
        if let Some(i) = cur.iter().rposition(|&p| p > 1) {
            let target = cur[i] - 1;
            let budget: u32 = cur[i..].iter().sum();
            let mut next = cur[..i].to_vec();
            let mut left = budget;
            while left > 0 {
                let p = left.min(target);
                next.push(p);
                left -= p;
            }
            self.current = Some(next);
        }
        Some(out)
    }
}

/// All partitions of `n`, largest-first within each partition, the whole
/// sequence in descending lexicographic order: (4), (3,1), (2,2), ...
pub fn partitions(n: u32) -> Result<Partitions, EnsembleError> {
    partitions_bounded(n, n)
}

/// Partitions of `n` with every part at most `max_part`.
pub fn partitions_bounded(n: u32, max_part: u32) -> Result<Partitions, EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::ZeroCount);
    }
    if max_part == 0 {
        return Err(EnsembleError::InvalidPartition("max_part must be positive"));
    }
    Ok(Partitions {
        current: Some(Partitions::first(n, max_part)),
    })
}

/// Counts partitions of `n` with parts at most `max_part` and at most
/// `max_len` parts, without enumerating them.
pub fn count_partitions(n: u32, max_part: u32, max_len: u32) -> u128 {
    if n == 0 {
        return 1;
    }
    // dp[m] after processing part sizes 1..=p: number of partitions of m
    // into parts <= p with at most max_len parts; track length explicitly.
    let n = n as usize;
    let max_len = max_len.min(n as u32) as usize;
    let mut dp = vec![vec![0u128; max_len + 1]; n + 1];
    dp[0][0] = 1;
    for part in 1..=(max_part as usize).min(n) {
        for m in part..=n {
            for l in 1..=max_len {
                dp[m][l] += dp[m - part][l - 1];
            }
        }
    }
    dp[n].iter().sum()
}
