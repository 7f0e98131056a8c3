//! Handshake-free computation of the repartition communication pattern.
//!
//! Given only the old and new offset arrays, every rank determines which
//! ranks it sends local trees to (S_p), which it receives from (R_p), and the
//! contiguous global tree range behind each send, without any message
//! exchange. Ownership during repartition: a tree headed to rank p is moved
//! by p itself when p already holds it, otherwise it is sent by the minimal
//! old owner.

use crate::error::{CmeshError, Result};
use crate::offsets::OffsetArray;

/// One rank's view of the repartition traffic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommPattern {
    pub rank: usize,
    /// S_p, ascending; may contain the rank itself (local movement).
    pub senders_to: Vec<usize>,
    /// R_p, ascending; may contain the rank itself.
    pub receive_from: Vec<usize>,
    /// Per destination in `senders_to`: inclusive global tree range sent.
    pub send_ranges: Vec<(usize, i64, i64)>,
}

/// Smallest nonempty rank owning tree `k` under `offsets`.
///
/// Last-tree indices are nondecreasing across ranks (empty-rank convention
/// included), so the minimal owner is the first rank whose last tree reaches
/// `k`; that rank is necessarily nonempty.
pub fn min_owner(offsets: &OffsetArray, k: i64) -> Result<usize> {
    let p_count = offsets.num_ranks();
    if k < 0 || k >= offsets.total_trees() {
        return Err(CmeshError::InvalidOffsets(format!("tree {k} outside mesh")));
    }
    let mut lo = 0usize;
    let mut hi = p_count;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if offsets.last_tree(mid)? < k {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    debug_assert!(offsets.owns(lo, k));
    Ok(lo)
}

/// Biggest nonempty rank owning tree `k`.
///
/// First-tree indices are not monotone across empty ranks (an empty rank's
/// conventional first tree can exceed the next rank's shared first tree), so
/// this starts from the minimal owner of `k + 1` -- which for a valid
/// partition is either the sought rank itself or the first nonempty rank
/// past it -- and steps back over the empty run in between.
pub fn max_owner(offsets: &OffsetArray, k: i64) -> Result<usize> {
    if k < 0 || k >= offsets.total_trees() {
        return Err(CmeshError::InvalidOffsets(format!("tree {k} outside mesh")));
    }
    let mut p = if k + 1 < offsets.total_trees() {
        min_owner(offsets, k + 1)?
    } else {
        offsets.num_ranks() - 1
    };
    while !offsets.owns(p, k) {
        p -= 1;
    }
    Ok(p)
}

/// The rank that moves tree `k` to rank `p` during repartition.
pub fn sender_of_tree(
    o_old: &OffsetArray,
    o_new: &OffsetArray,
    k: i64,
    p: usize,
) -> Result<usize> {
    if !o_new.owns(p, k) {
        return Err(CmeshError::InvalidOffsets(format!(
            "tree {k} is not a new local tree of rank {p}"
        )));
    }
    if o_old.owns(p, k) {
        Ok(p)
    } else {
        min_owner(o_old, k)
    }
}

/// Constant-time test whether rank `p_tilde` sends any local tree to rank `q`.
///
/// For distinct ranks this is the four-inequality window test on
/// `p_tilde`'s sendable old range against `q`'s receivable new range. The
/// window endpoints: the sendable range starts at the first old tree not
/// shared with a smaller rank and drops its last tree when that tree is `q`'s
/// old first tree (q would keep it itself); the receivable range starts one
/// past `q`'s new first tree when q carries that tree over from its own old
/// range. The self case is plain interval intersection of old and new local
/// trees, which also covers a single shared tree kept in place -- the window
/// form would miss it because the sendable range excludes shared first trees.
pub fn sends_to(o_old: &OffsetArray, o_new: &OffsetArray, p_tilde: usize, q: usize) -> Result<bool> {
    let n_old = o_old.num_local_trees(p_tilde)?;
    if p_tilde == q {
        if n_old == 0 || o_new.num_local_trees(q)? == 0 {
            return Ok(false);
        }
        let lo = o_old.first_tree(q)?.max(o_new.first_tree(q)?);
        let hi = o_old.last_tree(q)?.min(o_new.last_tree(q)?);
        return Ok(lo <= hi);
    }
    if n_old == 0 || o_new.num_local_trees(q)? == 0 {
        return Ok(false);
    }
    let mut send_first = o_old.first_tree(p_tilde)?;
    if o_old.first_shared(p_tilde)? {
        send_first += 1;
    }
    let mut send_last = o_old.last_tree(p_tilde)?;
    let q_old_nonempty = o_old.num_local_trees(q)? > 0;
    if q_old_nonempty && o_old.first_tree(q)? == send_last {
        send_last -= 1;
    }
    let mut recv_first = o_new.first_tree(q)?;
    let recv_last = o_new.last_tree(q)?;
    if q_old_nonempty && o_old.first_tree(q)? == recv_first {
        recv_first += 1;
    }
    Ok(send_first <= send_last
        && send_first <= recv_last
        && recv_first <= send_last
        && recv_first <= recv_last)
}

/// Global tree range rank `p` sends to `q`, when any.
pub fn send_range(
    o_old: &OffsetArray,
    o_new: &OffsetArray,
    p: usize,
    q: usize,
) -> Result<Option<(i64, i64)>> {
    if !sends_to(o_old, o_new, p, q)? {
        return Ok(None);
    }
    if p == q {
        let lo = o_old.first_tree(p)?.max(o_new.first_tree(p)?);
        let hi = o_old.last_tree(p)?.min(o_new.last_tree(p)?);
        return Ok(Some((lo, hi)));
    }
    let mut send_first = o_old.first_tree(p)?;
    if o_old.first_shared(p)? {
        send_first += 1;
    }
    let mut send_last = o_old.last_tree(p)?;
    let q_old_nonempty = o_old.num_local_trees(q)? > 0;
    if q_old_nonempty && o_old.first_tree(q)? == send_last {
        send_last -= 1;
    }
    let mut recv_first = o_new.first_tree(q)?;
    if q_old_nonempty && o_old.first_tree(q)? == recv_first {
        recv_first += 1;
    }
    let lo = send_first.max(recv_first);
    let hi = send_last.min(o_new.last_tree(q)?);
    debug_assert!(lo <= hi);
    // every tree in the range is ours to send to q
    debug_assert!((lo..=hi).all(|k| sender_of_tree(o_old, o_new, k, q).unwrap() == p));
    Ok(Some((lo, hi)))
}

/// Ranks that `p` sends local trees to, ascending.
///
/// The empty-set circumstances are checked up front: a rank without old
/// local trees sends nothing, and a rank whose single tree is shared with a
/// smaller rank and dropped in the new partition sends nothing. The remaining
/// candidates lie between the smallest new owner of the first sendable tree
/// and the biggest new owner of the old last tree; each is screened with
/// [`sends_to`].
pub fn compute_s(o_old: &OffsetArray, o_new: &OffsetArray, p: usize) -> Result<Vec<usize>> {
    let n_old = o_old.num_local_trees(p)?;
    if n_old == 0 {
        return Ok(Vec::new());
    }
    let k_p = o_old.first_tree(p)?;
    let shared = o_old.first_shared(p)?;
    if n_old == 1 && shared && !o_new.owns(p, k_p) {
        return Ok(Vec::new());
    }
    let send_first = k_p + if shared { 1 } else { 0 };
    let send_last = o_old.last_tree(p)?;
    let mut out = Vec::new();
    if send_first <= send_last {
        let lo = min_owner(o_new, send_first)?;
        let hi = max_owner(o_new, send_last)?;
        for q in lo..=hi {
            if q != p && sends_to(o_old, o_new, p, q)? {
                out.push(q);
            }
        }
    }
    if sends_to(o_old, o_new, p, p)? {
        out.push(p);
        out.sort_unstable();
    }
    Ok(out)
}

/// Ranks that `p` receives local trees from, ascending. Empty exactly when
/// `p` has no local trees in the new partition.
pub fn compute_r(o_old: &OffsetArray, o_new: &OffsetArray, p: usize) -> Result<Vec<usize>> {
    if o_new.num_local_trees(p)? == 0 {
        return Ok(Vec::new());
    }
    let lo = min_owner(o_old, o_new.first_tree(p)?)?;
    let hi = max_owner(o_old, o_new.last_tree(p)?)?;
    let mut out = Vec::new();
    for p_tilde in lo..=hi {
        if p_tilde != p && sends_to(o_old, o_new, p_tilde, p)? {
            out.push(p_tilde);
        }
    }
    if sends_to(o_old, o_new, p, p)? {
        out.push(p);
        out.sort_unstable();
    }
    Ok(out)
}

/// Full pattern for one rank: S_p, R_p, and per-destination ranges.
pub fn compute_pattern(
    o_old: &OffsetArray,
    o_new: &OffsetArray,
    p: usize,
) -> Result<CommPattern> {
    let senders_to = compute_s(o_old, o_new, p)?;
    let receive_from = compute_r(o_old, o_new, p)?;
    let send_ranges = senders_to
        .iter()
        .map(|&q| {
            let (lo, hi) = send_range(o_old, o_new, p, q)?.expect("q in S_p");
            Ok((q, lo, hi))
        })
        .collect::<Result<_>>()?;
    Ok(CommPattern {
        rank: p,
        senders_to,
        receive_from,
        send_ranges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;

    fn o(v: &[i64]) -> OffsetArray {
        OffsetArray::from_entries(v.to_vec()).unwrap()
    }

    fn worked_example() -> (OffsetArray, OffsetArray) {
        (o(&[0, -2, 3, 5]), o(&[0, -3, -4, 5]))
    }

    #[test]
    fn sender_of_tree_worked_example() {
        let (old, new) = worked_example();
        // process 1 sends tree 2 to process 0
        assert_eq!(sender_of_tree(&old, &new, 2, 0).unwrap(), 1);
        // tree 1 is already local to process 0, so no one sends it
        assert_eq!(sender_of_tree(&old, &new, 1, 0).unwrap(), 0);
        assert!(sender_of_tree(&old, &new, 4, 0).is_err());
    }

    #[test]
    fn sender_is_identity_when_partition_unchanged() {
        let arr = o(&[0, -2, 3, 5]);
        for p in 0..3 {
            for k in arr.first_tree(p).unwrap()..=arr.last_tree(p).unwrap() {
                assert_eq!(sender_of_tree(&arr, &arr, k, p).unwrap(), p);
            }
        }
    }

    #[test]
    fn sends_to_worked_example() {
        let (old, new) = worked_example();
        assert!(sends_to(&old, &new, 1, 0).unwrap());
        assert!(!sends_to(&old, &new, 0, 1).unwrap());
        assert!(sends_to(&old, &new, 2, 1).unwrap());
    }

    #[test]
    fn sends_to_self_on_identity_iff_nonempty() {
        let arr = o(&[0, 1, 3, 3]);
        assert!(sends_to(&arr, &arr, 0, 0).unwrap());
        assert!(sends_to(&arr, &arr, 1, 1).unwrap());
        assert!(!sends_to(&arr, &arr, 2, 2).unwrap());
    }

    #[test]
    fn s_and_r_worked_example() {
        let (old, new) = worked_example();
        assert_eq!(compute_s(&old, &new, 0).unwrap(), vec![0]);
        assert_eq!(compute_s(&old, &new, 1).unwrap(), vec![0, 1]);
        assert_eq!(compute_s(&old, &new, 2).unwrap(), vec![1, 2]);
        assert_eq!(compute_r(&old, &new, 0).unwrap(), vec![0, 1]);
        assert_eq!(compute_r(&old, &new, 1).unwrap(), vec![1, 2]);
        assert_eq!(compute_r(&old, &new, 2).unwrap(), vec![2]);
    }

    #[test]
    fn empty_old_rank_sends_nothing() {
        let old = o(&[0, 0, 5, 5]);
        let new = o(&[0, 2, 4, 5]);
        assert_eq!(compute_s(&old, &new, 0).unwrap(), Vec::<usize>::new());
        assert_eq!(compute_s(&old, &new, 2).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn ring_example_sets() {
        // old {p0: {0}, p1: {1,2}, p2: {}}, new {p0: {0}, p1: {0,1}, p2: {2}}
        let old = o(&[0, 1, 3, 3]);
        let new = o(&[0, -1, 2, 3]);
        assert_eq!(compute_s(&old, &new, 0).unwrap(), vec![0, 1]);
        assert_eq!(compute_s(&old, &new, 1).unwrap(), vec![1, 2]);
        assert_eq!(compute_s(&old, &new, 2).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn send_ranges_worked_example() {
        let (old, new) = worked_example();
        let pat = compute_pattern(&old, &new, 1).unwrap();
        assert_eq!(pat.send_ranges, vec![(0, 2, 2), (1, 2, 2)]);
        let pat = compute_pattern(&old, &new, 2).unwrap();
        assert_eq!(pat.send_ranges, vec![(1, 3, 3), (2, 3, 4)]);
        let pat = compute_pattern(&old, &new, 0).unwrap();
        assert_eq!(pat.send_ranges, vec![(0, 0, 1)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn matches_brute_force_oracle(seed in 0u64..10_000) {
            let (old, new) = oracle::random_partition_pair(50, 12, seed);
            let expected = oracle::SendTable::build(&old, &new).unwrap();
            let p_count = old.num_ranks();
            for p in 0..p_count {
                prop_assert_eq!(
                    compute_s(&old, &new, p).unwrap(),
                    expected.s_set(p),
                    "S_{} for old={:?} new={:?}", p, old.entries(), new.entries()
                );
                prop_assert_eq!(
                    compute_r(&old, &new, p).unwrap(),
                    expected.r_set(p),
                    "R_{} for old={:?} new={:?}", p, old.entries(), new.entries()
                );
                for q in 0..p_count {
                    prop_assert_eq!(
                        sends_to(&old, &new, p, q).unwrap(),
                        !expected.trees(p, q).is_empty(),
                        "sends_to({}, {}) old={:?} new={:?}", p, q, old.entries(), new.entries()
                    );
                }
                for (q, lo, hi) in compute_pattern(&old, &new, p).unwrap().send_ranges {
                    let trees: Vec<i64> = (lo..=hi).collect();
                    prop_assert_eq!(&trees, expected.trees(p, q), "range {}->{}", p, q);
                }
            }
        }

        #[test]
        fn symmetry_of_s_and_r(seed in 0u64..3_000) {
            let (old, new) = oracle::random_partition_pair(40, 10, seed);
            for p in 0..old.num_ranks() {
                let r = compute_r(&old, &new, p).unwrap();
                for q in 0..old.num_ranks() {
                    let in_r = r.contains(&q);
                    let in_s = compute_s(&old, &new, q).unwrap().contains(&p);
                    prop_assert_eq!(in_r, in_s, "p={} q={}", p, q);
                }
            }
        }

        #[test]
        fn every_new_tree_has_exactly_one_sender(seed in 0u64..3_000) {
            let (old, new) = oracle::random_partition_pair(40, 10, seed);
            for p in 0..new.num_ranks() {
                if new.is_empty_rank(p).unwrap() {
                    continue;
                }
                for k in new.first_tree(p).unwrap()..=new.last_tree(p).unwrap() {
                    let s = sender_of_tree(&old, &new, k, p).unwrap();
                    if old.owns(p, k) {
                        prop_assert_eq!(s, p);
                    } else {
                        prop_assert!(old.owns(s, k));
                    }
                    // the designated sender's ranges cover k exactly once
                    let mut hits = 0;
                    for q in 0..old.num_ranks() {
                        if let Some((lo, hi)) = send_range(&old, &new, q, p).unwrap() {
                            if lo <= k && k <= hi {
                                prop_assert_eq!(q, s);
                                hits += 1;
                            }
                        }
                    }
                    prop_assert_eq!(hits, 1, "tree {} to rank {}", k, p);
                }
            }
        }
    }
}
