//! Deriving a coarse-mesh partition from a forest of leaf elements.
//!
//! Only the per-tree leaf counts and the tree-major leaf order matter here;
//! the space-filling curve internals never enter. Leaves are ordered by the
//! combined index (k, I): tree first, curve index within the tree second.

use crate::error::{CmeshError, Result};
use crate::offsets::{encode_offsets, OffsetArray, PartitionView, RankRange};

/// Per-tree leaf counts and optional per-leaf weights.
#[derive(Debug, Clone)]
pub struct ForestSummary {
    /// Number of leaves per tree, each at least 1.
    pub leaf_counts: Vec<u64>,
    /// Optional per-leaf weights in combined-index order; length must equal
    /// the total leaf count when present.
    pub weights: Option<Vec<u64>>,
}

impl ForestSummary {
    pub fn unweighted(leaf_counts: Vec<u64>) -> Self {
        ForestSummary {
            leaf_counts,
            weights: None,
        }
    }

    pub fn num_trees(&self) -> usize {
        self.leaf_counts.len()
    }

    pub fn total_leaves(&self) -> u64 {
        self.leaf_counts.iter().sum()
    }

    /// `forest K=<K> : N_0 N_1 ...`
    pub fn to_line(&self) -> String {
        let counts: Vec<String> = self.leaf_counts.iter().map(|c| c.to_string()).collect();
        format!("forest K={} : {}", self.num_trees(), counts.join(" "))
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let rest = line
            .trim()
            .strip_prefix("forest ")
            .ok_or_else(|| CmeshError::Parse("forest line must start with 'forest '".into()))?;
        let (_, vals) = rest
            .split_once(':')
            .ok_or_else(|| CmeshError::Parse("forest line missing ':'".into()))?;
        let leaf_counts: Vec<u64> = vals
            .split_whitespace()
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|e| CmeshError::Parse(format!("bad leaf count {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(ForestSummary::unweighted(leaf_counts))
    }
}

/// Leaf-count summary of a forest refined one extra level inside a band of
/// trees: `c^base_level` leaves per tree, `c^(base_level+1)` inside the band,
/// with `c = 4` in 2D and `c = 8` in 3D.
pub fn synthetic_band_forest(
    num_trees: usize,
    base_level: u32,
    refined_trees: &std::collections::HashSet<usize>,
    dim: usize,
) -> Result<ForestSummary> {
    let children: u64 = match dim {
        2 => 4,
        3 => 8,
        other => {
            return Err(CmeshError::Parse(format!(
                "band forest dimension must be 2 or 3, got {other}"
            )))
        }
    };
    let base = children
        .checked_pow(base_level)
        .ok_or(CmeshError::Overflow("band forest base count"))?;
    let refined = children
        .checked_pow(base_level + 1)
        .ok_or(CmeshError::Overflow("band forest refined count"))?;
    let leaf_counts = (0..num_trees)
        .map(|k| if refined_trees.contains(&k) { refined } else { base })
        .collect();
    Ok(ForestSummary::unweighted(leaf_counts))
}

/// Map monotone leaf cut points to the induced coarse-mesh partition.
///
/// `cuts` has length `P + 1` with `cuts[0] = 0`, `cuts[P] = N`; rank `p` owns
/// the leaves in `[cuts[p], cuts[p+1])`. A rank's first tree is shared exactly
/// when its first leaf is not the first leaf of that tree (the preceding leaf
/// then belongs to the same tree on a smaller rank).
pub fn partition_from_leaf_cuts(forest: &ForestSummary, cuts: &[u64]) -> Result<OffsetArray> {
    let total = forest.total_leaves();
    if cuts.first() != Some(&0) || cuts.last() != Some(&total) || cuts.windows(2).any(|w| w[0] > w[1])
    {
        return Err(CmeshError::InvalidView(format!(
            "leaf cuts must rise from 0 to {total}"
        )));
    }
    // tree_start[k] = combined index of tree k's first leaf
    let mut tree_start = Vec::with_capacity(forest.num_trees() + 1);
    let mut acc = 0u64;
    for &n in &forest.leaf_counts {
        tree_start.push(acc);
        acc += n;
    }
    tree_start.push(acc);

    let tree_of_leaf = |leaf: u64| -> usize {
        // last tree whose start is <= leaf
        tree_start.partition_point(|&s| s <= leaf) - 1
    };

    let p_count = cuts.len() - 1;
    let mut ranks = Vec::with_capacity(p_count);
    let mut last_end: i64 = -1; // K_q of the most recent nonempty rank
    for p in 0..p_count {
        let (lo, hi) = (cuts[p], cuts[p + 1]);
        if lo == hi {
            ranks.push(RankRange {
                first: last_end + 1,
                last: last_end,
                first_shared: false,
                empty: true,
            });
            continue;
        }
        let first = tree_of_leaf(lo) as i64;
        let last = tree_of_leaf(hi - 1) as i64;
        let first_shared = lo > tree_start[first as usize];
        ranks.push(RankRange {
            first,
            last,
            first_shared,
            empty: false,
        });
        last_end = last;
    }
    encode_offsets(&PartitionView { ranks }, forest.num_trees() as i64)
}

/// Equal-split SFC cuts: rank `p` owns leaf positions `[pN/P, (p+1)N/P)`,
/// or weight-balanced cuts when the forest carries weights (rank `p`'s range
/// ends at the smallest prefix whose cumulative weight reaches `(p+1) W/P`).
pub fn partition_from_forest(forest: &ForestSummary, num_ranks: usize) -> Result<OffsetArray> {
    if num_ranks == 0 {
        return Err(CmeshError::InvalidView("need at least one rank".into()));
    }
    let n = forest.total_leaves();
    let p_count = num_ranks as u64;
    let cuts: Vec<u64> = match &forest.weights {
        None => (0..=p_count).map(|p| p * n / p_count).collect(),
        Some(weights) => {
            if weights.len() as u64 != n {
                return Err(CmeshError::InvalidView(format!(
                    "{} weights for {} leaves",
                    weights.len(),
                    n
                )));
            }
            // prefix[m] = weight of the first m leaves
            let mut prefix = Vec::with_capacity(weights.len() + 1);
            let mut acc = 0u128;
            prefix.push(0u128);
            for &w in weights {
                acc += w as u128;
                prefix.push(acc);
            }
            let total_weight = acc;
            (0..=p_count)
                .map(|p| {
                    // smallest m with prefix[m] * P >= p * W; exact integer compare
                    let target = p as u128 * total_weight;
                    prefix.partition_point(|&s| s * (p_count as u128) < target) as u64
                })
                .collect()
        }
    };
    partition_from_leaf_cuts(forest, &cuts)
}

/// Leaf positions `[pN/P, (p+1)N/P)` owned by rank `p` under the unweighted rule.
pub fn leaf_range(forest: &ForestSummary, num_ranks: usize, p: usize) -> (u64, u64) {
    let n = forest.total_leaves();
    let pc = num_ranks as u64;
    (p as u64 * n / pc, (p as u64 + 1) * n / pc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offsets::OffsetArray;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn entries(o: &OffsetArray) -> &[i64] {
        o.entries()
    }

    #[test]
    fn two_tree_figure() {
        // K=2, 4 leaves per tree, P=3: leaves {0,1,2},{3,4,5},{6,7}
        let f = ForestSummary::unweighted(vec![4, 4]);
        let o = partition_from_forest(&f, 3).unwrap();
        assert_eq!(entries(&o), &[0, -1, -2, 2]);
    }

    #[test]
    fn single_tree_all_shared() {
        let f = ForestSummary::unweighted(vec![8]);
        let o = partition_from_forest(&f, 4).unwrap();
        assert_eq!(entries(&o), &[0, -1, -1, -1, 1]);
    }

    #[test]
    fn one_tree_per_rank() {
        let f = ForestSummary::unweighted(vec![1, 1, 1, 1, 1]);
        let o = partition_from_forest(&f, 5).unwrap();
        assert_eq!(entries(&o), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn empty_forest_all_empty_ranks() {
        let f = ForestSummary::unweighted(vec![]);
        let o = partition_from_forest(&f, 3).unwrap();
        assert_eq!(entries(&o), &[0, 0, 0, 0]);
        assert!(o.is_valid());
    }

    #[test]
    fn band_forest_examples() {
        let refined: HashSet<usize> = [1].into_iter().collect();
        let f = synthetic_band_forest(3, 1, &refined, 2).unwrap();
        assert_eq!(f.leaf_counts, vec![4, 16, 4]);

        let f = synthetic_band_forest(2, 0, &HashSet::new(), 3).unwrap();
        assert_eq!(f.leaf_counts, vec![1, 1]);

        let refined: HashSet<usize> = [0, 3].into_iter().collect();
        let f = synthetic_band_forest(4, 2, &refined, 3).unwrap();
        assert_eq!(f.leaf_counts, vec![512, 64, 64, 512]);

        assert!(synthetic_band_forest(2, 30, &HashSet::new(), 3).is_err());
        assert!(synthetic_band_forest(2, 1, &HashSet::new(), 4).is_err());
    }

    #[test]
    fn weighted_cuts_follow_weight_not_count() {
        // one heavy leaf forces the first cut right after it
        let f = ForestSummary {
            leaf_counts: vec![2, 2],
            weights: Some(vec![10, 1, 1, 1]),
        };
        let o = partition_from_forest(&f, 2).unwrap();
        // rank 0 takes only leaf 0 (weight 10 >= W/2), rank 1 the rest
        assert_eq!(entries(&o), &[0, -1, 2]);
    }

    #[test]
    fn forest_line_round_trip() {
        let f = ForestSummary::unweighted(vec![4, 16, 4]);
        let line = f.to_line();
        assert_eq!(line, "forest K=3 : 4 16 4");
        let back = ForestSummary::from_line(&line).unwrap();
        assert_eq!(back.leaf_counts, f.leaf_counts);
    }

    proptest! {
        #[test]
        fn forest_partitions_are_valid_and_balanced(
            counts in prop::collection::vec(1u64..20, 1..60),
            p in 1usize..33,
        ) {
            let f = ForestSummary::unweighted(counts);
            let o = partition_from_forest(&f, p).unwrap();
            let diags = o.validate();
            prop_assert!(diags.is_empty(), "{diags:?}");
            // element balance: owned-leaf counts differ by at most one
            let sizes: Vec<u64> = (0..p).map(|r| {
                let (lo, hi) = leaf_range(&f, p, r);
                hi - lo
            }).collect();
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            // cuts are disjoint, consecutive, covering
            prop_assert_eq!(sizes.iter().sum::<u64>(), f.total_leaves());
        }

        #[test]
        fn weighted_partitions_are_valid(
            counts in prop::collection::vec(1u64..8, 1..40),
            p in 1usize..17,
            seed in 0u64..1000,
        ) {
            let n: u64 = counts.iter().sum();
            let weights: Vec<u64> = (0..n).map(|i| 1 + (i.wrapping_mul(2654435761).wrapping_add(seed) % 9)).collect();
            let f = ForestSummary { leaf_counts: counts, weights: Some(weights) };
            let o = partition_from_forest(&f, p).unwrap();
            let diags = o.validate();
            prop_assert!(diags.is_empty(), "{diags:?}");
        }
    }
}
