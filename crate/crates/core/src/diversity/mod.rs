//! Hash-based tree distance and population diversity.
//!
//! Each tree is hashed once and its hash sequence sorted; the similarity of
//! two trees is the Sørensen-Dice coefficient of the two sorted sequences,
//! with multiset intersection counted by a linear merge. Distance is one
//! minus that similarity, and an individual's diversity is its mean distance
//! to the rest of the population.

pub mod oracle;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::expr::ExpressionTree;
use crate::hash::{HashMode, HashSequence, TreeHasher};
use crate::par;

/// Ascending copy of a hash sequence, duplicates kept.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SortedHashes(Vec<u64>);

impl SortedHashes {
    pub fn new(mut values: Vec<u64>) -> Self {
        values.sort_unstable();
        SortedHashes(values)
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<HashSequence> for SortedHashes {
    fn from(seq: HashSequence) -> Self {
        SortedHashes::new(seq.into_values())
    }
}

impl From<&HashSequence> for SortedHashes {
    fn from(seq: &HashSequence) -> Self {
        SortedHashes::new(seq.values().to_vec())
    }
}

/// Size of the multiset intersection of two ascending sequences.
pub fn intersection_size(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    // Branch-free steps: equal heads advance both sides and count once.
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        count += (x == y) as usize;
        i += (x <= y) as usize;
        j += (y <= x) as usize;
    }
    count
}

/// `2 |A ∩ B| / (|A| + |B|)`. Two empty sequences are identical (1); one
/// empty sequence shares nothing (0).
pub fn dice_similarity(a: &SortedHashes, b: &SortedHashes) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    let common = intersection_size(a.values(), b.values());
    (2 * common) as f64 / total as f64
}

pub fn hash_distance(a: &SortedHashes, b: &SortedHashes) -> f64 {
    1.0 - dice_similarity(a, b)
}

/// Sorted hash sequence of one tree.
pub fn sorted_hashes(hasher: &TreeHasher, tree: &ExpressionTree) -> SortedHashes {
    let (_, seq) = hasher.hash_tree(tree).expect("tree is valid");
    seq.into()
}

/// `1 - dice` between the hash sequences of two valid trees.
pub fn tree_distance(a: &ExpressionTree, b: &ExpressionTree, mode: HashMode) -> f64 {
    let hasher = TreeHasher::new(mode);
    hash_distance(&sorted_hashes(&hasher, a), &sorted_hashes(&hasher, b))
}

/// Symmetric population distance matrix with per-individual diversity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
    diversity: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds the matrix from a full row-major entry list.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n, "entries must be n x n");
        let diversity = (0..n)
            .map(|i| {
                if n < 2 {
                    return 0.0;
                }
                let row = &entries[i * n..(i + 1) * n];
                let mut sum = 0.0;
                for (j, d) in row.iter().enumerate() {
                    if j != i {
                        sum += d;
                    }
                }
                sum / (n - 1) as f64
            })
            .collect();
        DistanceMatrix {
            n,
            entries,
            diversity,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Mean distance of each individual to all others.
    pub fn diversity(&self) -> &[f64] {
        &self.diversity
    }

    pub fn average_diversity(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.diversity.iter().sum::<f64>() / self.n as f64
    }

    /// Mean pairwise distance restricted to `members`, each member averaged
    /// over the other members.
    pub fn average_diversity_of(&self, members: &[usize]) -> f64 {
        let m = members.len();
        if m < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for &i in members {
            let mut sum = 0.0;
            for &j in members {
                if j != i {
                    sum += self.get(i, j);
                }
            }
            total += sum / (m - 1) as f64;
        }
        total / m as f64
    }

    /// Row-major CSV with a header row of individual indices.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((0..self.n).map(|i| i.to_string()))?;
        for i in 0..self.n {
            w.write_record(self.row(i).iter().map(|d| format!("{d:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pairwise matrix from pre-sorted hash sequences.
pub fn matrix_from_hashes(hashes: &[SortedHashes]) -> DistanceMatrix {
    let n = hashes.len();
    let upper = par::map_range(n, |i| {
        (i + 1..n)
            .map(|j| hash_distance(&hashes[i], &hashes[j]))
            .collect::<Vec<_>>()
    });
    mirror(n, upper)
}

fn mirror(n: usize, upper: Vec<Vec<f64>>) -> DistanceMatrix {
    let mut entries = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (k, d) in row.into_iter().enumerate() {
            let j = i + 1 + k;
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix::from_entries(n, entries)
}

/// Hashes every tree once, sorts each sequence, then fills all pairs.
pub fn distance_matrix(hasher: &TreeHasher, population: &[ExpressionTree]) -> DistanceMatrix {
    let hashes = par::map(population, |t| sorted_hashes(hasher, t));
    matrix_from_hashes(&hashes)
}

/// Single-threaded [`distance_matrix`], available regardless of features.
pub fn distance_matrix_sequential(
    hasher: &TreeHasher,
    population: &[ExpressionTree],
) -> DistanceMatrix {
    let hashes = par::sequential::map(population, |t| sorted_hashes(hasher, t));
    let n = hashes.len();
    let upper = par::sequential::map_range(n, |i| {
        (i + 1..n)
            .map(|j| hash_distance(&hashes[i], &hashes[j]))
            .collect::<Vec<_>>()
    });
    mirror(n, upper)
}
