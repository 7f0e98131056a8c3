//! Signed offset-array encoding of valid partitions.
//!
//! A partition of `K` trees over `P` ranks is stored as `P + 1` signed 64-bit
//! entries. Entry `p` holds the global index of rank `p`'s first local tree,
//! with a negative sign (`-k_p - 1`) when that tree is shared with the next
//! smaller nonempty rank; the final entry holds `K`. Empty ranks take the
//! start/end convention `k_p = K_q + 1`, `K_p = k_p - 1` for the largest
//! nonempty `q < p` (and `k_p = 0`, `K_p = -1` when there is none), which keeps
//! the decode formulas below valid without special cases.

use crate::error::{CmeshError, Result};

/// Global partition table of length `P + 1`.
///
/// Immutable after construction; every rank shares the same table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetArray {
    entries: Vec<i64>,
}

/// Decoded per-rank view of a partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionView {
    pub ranks: Vec<RankRange>,
}

/// One rank's slice of the tree range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankRange {
    /// Global index of the first local tree (empty-rank convention applies).
    pub first: i64,
    /// Global index of the last local tree; `first - 1` when empty.
    pub last: i64,
    /// First tree shared with the next smaller nonempty rank.
    pub first_shared: bool,
    pub empty: bool,
}

impl OffsetArray {
    /// Structural checks only: length, `O[0] = 0`, nonnegative total.
    /// Semantic validity is queried separately via [`OffsetArray::validate`].
    pub fn from_entries(entries: Vec<i64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(CmeshError::InvalidOffsets(format!(
                "need at least 2 entries, got {}",
                entries.len()
            )));
        }
        if entries[0] != 0 {
            return Err(CmeshError::InvalidOffsets(format!(
                "O[0] must be 0, got {}",
                entries[0]
            )));
        }
        if *entries.last().unwrap() < 0 {
            return Err(CmeshError::InvalidOffsets(format!(
                "O[P] must be the nonnegative tree count, got {}",
                entries.last().unwrap()
            )));
        }
        Ok(OffsetArray { entries })
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn num_ranks(&self) -> usize {
        self.entries.len() - 1
    }

    /// Total number of trees `K`.
    pub fn total_trees(&self) -> i64 {
        *self.entries.last().unwrap()
    }

    fn check_rank(&self, p: usize) -> Result<()> {
        if p >= self.num_ranks() {
            return Err(CmeshError::RankOutOfRange(p, self.num_ranks()));
        }
        Ok(())
    }

    /// First local tree `k_p`: `O[p]` if nonnegative, else `|O[p] + 1|`.
    pub fn first_tree(&self, p: usize) -> Result<i64> {
        self.check_rank(p)?;
        Ok(decode_first(self.entries[p]))
    }

    /// Last local tree `K_p = |O[p+1]| - 1`.
    pub fn last_tree(&self, p: usize) -> Result<i64> {
        self.check_rank(p)?;
        Ok(self.entries[p + 1].abs() - 1)
    }

    /// Number of local trees `n_p = |O[p+1]| - k_p`.
    pub fn num_local_trees(&self, p: usize) -> Result<i64> {
        self.check_rank(p)?;
        Ok(self.entries[p + 1].abs() - decode_first(self.entries[p]))
    }

    /// Whether rank `p`'s first tree is shared with the next smaller nonempty rank.
    pub fn first_shared(&self, p: usize) -> Result<bool> {
        self.check_rank(p)?;
        Ok(self.entries[p] < 0)
    }

    pub fn is_empty_rank(&self, p: usize) -> Result<bool> {
        Ok(self.num_local_trees(p)? == 0)
    }

    /// `k` is a local tree of rank `p`.
    pub fn owns(&self, p: usize, k: i64) -> bool {
        p < self.num_ranks()
            && decode_first(self.entries[p]) <= k
            && k <= self.entries[p + 1].abs() - 1
    }

    pub fn decode(&self) -> PartitionView {
        let ranks = (0..self.num_ranks())
            .map(|p| {
                let first = decode_first(self.entries[p]);
                let last = self.entries[p + 1].abs() - 1;
                RankRange {
                    first,
                    last,
                    first_shared: self.entries[p] < 0,
                    empty: last < first,
                }
            })
            .collect();
        PartitionView { ranks }
    }

    /// Decoded-property validity per the valid-partition characterization.
    ///
    /// Consecutiveness is implied by the decoding itself; the remaining checks
    /// are per-rank nonnegative tree counts, shared-flag consistency (a
    /// negative entry must point at the previous nonempty rank's last tree),
    /// and the redundant pairwise assertions that two ranks share at most one
    /// tree and that ranks strictly between two sharers hold exactly that tree
    /// or nothing.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let view = self.decode();
        let total = self.total_trees();
        let mut prev_nonempty: Option<usize> = None;
        for (p, r) in view.ranks.iter().enumerate() {
            if r.last < r.first - 1 {
                out.push(format!(
                    "rank {p}: negative local tree count (k_p={} > |O[p+1]|={})",
                    r.first,
                    r.last + 1
                ));
                continue;
            }
            if r.first < 0 || r.last >= total {
                out.push(format!(
                    "rank {p}: tree range [{}, {}] outside [0, {total})",
                    r.first, r.last
                ));
            }
            if r.first_shared {
                if r.empty {
                    out.push(format!("rank {p}: empty rank flagged as shared"));
                } else {
                    match prev_nonempty {
                        None => out.push(format!(
                            "rank {p}: first tree flagged shared but no smaller rank has local trees"
                        )),
                        Some(q) => {
                            if view.ranks[q].last != r.first {
                                out.push(format!(
                                    "rank {p}: first tree {} flagged shared but rank {q} ends at {}",
                                    r.first, view.ranks[q].last
                                ));
                            }
                        }
                    }
                }
            } else if !r.empty {
                if let Some(q) = prev_nonempty {
                    if view.ranks[q].last >= r.first {
                        out.push(format!(
                            "rank {p}: first tree {} overlaps rank {q} (ends {}) without shared flag",
                            r.first, view.ranks[q].last
                        ));
                    }
                }
            }
            // monotonicity K_p <= k_q for p <= q
            if let Some(q) = prev_nonempty {
                if !r.empty && view.ranks[q].last > r.first {
                    out.push(format!(
                        "rank {p}: first tree {} precedes rank {q}'s last tree {}",
                        r.first, view.ranks[q].last
                    ));
                }
            }
            if !r.empty {
                prev_nonempty = Some(p);
            }
        }
        // coverage: first nonempty rank starts at 0, last ends at K-1
        if total > 0 {
            match view.ranks.iter().find(|r| !r.empty) {
                Some(r0) if r0.first == 0 => {}
                Some(r0) => out.push(format!("first nonempty rank starts at {}, not 0", r0.first)),
                None => out.push("no rank has local trees but K > 0".to_string()),
            }
            if let Some(rl) = view.ranks.iter().rev().find(|r| !r.empty) {
                if rl.last != total - 1 {
                    out.push(format!("last nonempty rank ends at {}, not {}", rl.last, total - 1));
                }
            }
        }
        // redundant: each pair shares at most one tree; ranks strictly between
        // two sharers hold exactly that tree or nothing
        for p in 0..view.ranks.len() {
            if view.ranks[p].empty {
                continue;
            }
            for q in p + 1..view.ranks.len() {
                let (a, b) = (view.ranks[p], view.ranks[q]);
                if b.empty {
                    continue;
                }
                if b.first > a.last {
                    break;
                }
                let overlap = a.last.min(b.last) - a.first.max(b.first) + 1;
                if overlap > 1 {
                    out.push(format!("ranks {p} and {q} share {overlap} trees"));
                }
                if overlap == 1 {
                    let k = a.last;
                    for r in p + 1..q {
                        let m = view.ranks[r];
                        if !m.empty && !(m.first == k && m.last == k) {
                            out.push(format!(
                                "rank {r} lies between sharers {p} and {q} of tree {k} but holds [{}, {}]",
                                m.first, m.last
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// One-line serialization: `offsets P=<P> K=<K> : v0 v1 ... vP`.
    pub fn to_line(&self) -> String {
        let vals: Vec<String> = self.entries.iter().map(|v| v.to_string()).collect();
        format!(
            "offsets P={} K={} : {}",
            self.num_ranks(),
            self.total_trees(),
            vals.join(" ")
        )
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let rest = line
            .trim()
            .strip_prefix("offsets ")
            .ok_or_else(|| CmeshError::Parse("offsets line must start with 'offsets '".into()))?;
        let (head, vals) = rest
            .split_once(':')
            .ok_or_else(|| CmeshError::Parse("offsets line missing ':'".into()))?;
        let mut p_decl = None;
        for tok in head.split_whitespace() {
            if let Some(v) = tok.strip_prefix("P=") {
                p_decl = Some(
                    v.parse::<usize>()
                        .map_err(|e| CmeshError::Parse(format!("bad P: {e}")))?,
                );
            }
        }
        let entries: Vec<i64> = vals
            .split_whitespace()
            .map(|t| {
                t.parse::<i64>()
                    .map_err(|e| CmeshError::Parse(format!("bad offset entry {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if let Some(p) = p_decl {
            if entries.len() != p + 1 {
                return Err(CmeshError::Parse(format!(
                    "declared P={p} but found {} entries",
                    entries.len()
                )));
            }
        }
        Self::from_entries(entries)
    }
}

fn decode_first(entry: i64) -> i64 {
    if entry >= 0 {
        entry
    } else {
        (entry + 1).abs()
    }
}

/// Encode a per-rank view into the signed offset array.
///
/// The view must satisfy the valid-partition properties; a violation is
/// reported by name rather than silently encoded.
pub fn encode_offsets(view: &PartitionView, total_trees: i64) -> Result<OffsetArray> {
    let p_count = view.ranks.len();
    if p_count == 0 {
        return Err(CmeshError::InvalidView("no ranks".into()));
    }
    let mut entries = Vec::with_capacity(p_count + 1);
    for (p, r) in view.ranks.iter().enumerate() {
        if r.empty != (r.last < r.first) {
            return Err(CmeshError::InvalidView(format!(
                "rank {p}: empty flag inconsistent with range [{}, {}]",
                r.first, r.last
            )));
        }
        if r.empty && r.first_shared {
            return Err(CmeshError::InvalidView(format!(
                "rank {p}: empty rank cannot share its first tree"
            )));
        }
        let entry = if r.first_shared { -r.first - 1 } else { r.first };
        entries.push(entry);
    }
    entries.push(total_trees);
    let arr = OffsetArray::from_entries(entries)?;
    let diags = arr.validate();
    if !diags.is_empty() {
        return Err(CmeshError::InvalidView(diags.join("; ")));
    }
    Ok(arr)
}
