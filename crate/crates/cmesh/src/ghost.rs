//! Ghost-tree determination and the minimal-communication ghost-sending rule.
//!
//! A ghost of rank `p` is a nonlocal tree face-adjacent to one of `p`'s local
//! trees. During repartition each required ghost of a destination must arrive
//! exactly once or be retained from the destination's own pre-partition data;
//! the decision is taken independently on every rank from the offset arrays
//! alone, with no negotiation round.

use std::collections::{BTreeMap, BTreeSet};

use crate::cmesh::{Cmesh, GhostRecord, GlobalFace, NeighborRef};
use crate::error::{CmeshError, Result};
use crate::global::GlobalConnectivity;
use crate::offsets::OffsetArray;
use crate::pattern::{self, CommPattern};

/// The five kinds of face connection a partitioned mesh can store, by the
/// locality of the two endpoints on the inspecting rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionType {
    LocalToLocal = 1,
    LocalToGhost = 2,
    GhostToLocal = 3,
    GhostToGhost = 4,
    GhostToNonlocal = 5,
}

impl ConnectionType {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Classify a stored face connection on rank `p`. `ghosts` is `p`'s sorted
/// ghost id list.
pub fn classify_connection(
    offsets: &OffsetArray,
    p: usize,
    from_is_local: bool,
    to_global: i64,
    ghosts: &[i64],
) -> Result<ConnectionType> {
    let to_local = offsets.owns(p, to_global);
    let to_ghost = !to_local && ghosts.binary_search(&to_global).is_ok();
    Ok(match (from_is_local, to_local, to_ghost) {
        (true, true, _) => ConnectionType::LocalToLocal,
        (true, false, true) => ConnectionType::LocalToGhost,
        (true, false, false) => {
            // a local tree's neighbor is a ghost by definition
            return Err(CmeshError::MissingGhost {
                rank: p,
                ghost: to_global,
                tree: -1,
            });
        }
        (false, true, _) => ConnectionType::GhostToLocal,
        (false, false, true) => ConnectionType::GhostToGhost,
        (false, false, false) => ConnectionType::GhostToNonlocal,
    })
}

/// Ghost ids of rank `p` under `offsets`, from the global view: trees outside
/// `f(p)` with a face neighbor inside it. Sorted ascending. Independent of
/// any forest refinement.
pub fn ghost_ids(
    global: &GlobalConnectivity,
    offsets: &OffsetArray,
    p: usize,
) -> Result<Vec<i64>> {
    let mut out = BTreeSet::new();
    if offsets.num_local_trees(p)? == 0 {
        return Ok(Vec::new());
    }
    for k in offsets.first_tree(p)?..=offsets.last_tree(p)? {
        let tree = global
            .trees
            .get(k as usize)
            .ok_or(CmeshError::TreeCountMismatch(
                offsets.total_trees(),
                global.num_trees(),
            ))?;
        for face in &tree.faces {
            if let GlobalFace::Tree { id, .. } = *face {
                if !offsets.owns(p, id) {
                    out.insert(id);
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Ranks that deliver some face neighbor of `g` to `dest` as a new local
/// tree. Every member holds `g`'s record, so any of them could ship it; the
/// smallest one does, unless `dest` itself is a member and simply keeps its
/// own copy.
pub fn decider_set(
    g: &GhostRecord,
    o_old: &OffsetArray,
    o_new: &OffsetArray,
    dest: usize,
) -> Result<BTreeSet<usize>> {
    let mut s = BTreeSet::new();
    for face in &g.faces {
        if let GlobalFace::Tree { id: u, .. } = *face {
            if o_new.owns(dest, u) {
                s.insert(pattern::sender_of_tree(o_old, o_new, u, dest)?);
            }
        }
    }
    Ok(s)
}

/// Whether rank `c.rank` ships ghost `g` to `dest` during the move to
/// `o_new`: true iff `dest` cannot retain it and `c.rank` is the smallest
/// qualifying sender.
pub fn send_ghost(c: &Cmesh, g: &GhostRecord, dest: usize, o_new: &OffsetArray) -> Result<bool> {
    let s = decider_set(g, &c.offsets, o_new, dest)?;
    Ok(!s.contains(&dest) && s.iter().next() == Some(&c.rank))
}

/// Whether `dest` keeps ghost `g` from its own pre-partition data instead of
/// receiving it.
pub fn dest_retains(
    g: &GhostRecord,
    o_old: &OffsetArray,
    o_new: &OffsetArray,
    dest: usize,
) -> Result<bool> {
    Ok(decider_set(g, o_old, o_new, dest)?.contains(&dest))
}

/// Ghost ids to ship, per destination rank. A given (ghost, destination)
/// pair appears on at most one rank globally.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GhostPlan {
    pub by_dest: BTreeMap<usize, BTreeSet<i64>>,
}

impl GhostPlan {
    pub fn ids_for(&self, dest: usize) -> Vec<i64> {
        self.by_dest
            .get(&dest)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }
}

/// Examine the face neighbors of local tree `local` (which is in the send
/// range for `q`) and add to the plan every neighbor that will be a ghost on
/// `q` and that this rank is elected to ship.
pub fn parse_neighbors(
    c: &Cmesh,
    local: u32,
    q: usize,
    o_new: &OffsetArray,
    plan: &mut GhostPlan,
) -> Result<()> {
    let nfaces = c.trees[local as usize].tree_to_tree.len();
    for face in 0..nfaces {
        let NeighborRef::Global(u) = c.neighbor_global_index(local, face)? else {
            continue;
        };
        if o_new.owns(q, u) {
            continue; // becomes local on q, not a ghost
        }
        if let Some(existing) = plan.by_dest.get(&q) {
            if existing.contains(&u) {
                continue;
            }
        }
        let record = c
            .record_for_global(u)?
            .ok_or(CmeshError::MissingGhost {
                rank: c.rank,
                ghost: u,
                tree: c.global_of_local(local),
            })?;
        if send_ghost(c, &record, q, o_new)? {
            plan.by_dest.entry(q).or_default().insert(u);
        }
    }
    Ok(())
}

/// Full ghost plan for one sending rank, driven by its tree send ranges.
pub fn plan_ghost_sends(
    c: &Cmesh,
    o_new: &OffsetArray,
    pat: &CommPattern,
) -> Result<GhostPlan> {
    let mut plan = GhostPlan::default();
    let k_p = c.first_tree();
    for &(q, lo, hi) in &pat.send_ranges {
        for k in lo..=hi {
            parse_neighbors(c, (k - k_p) as u32, q, o_new, &mut plan)?;
        }
    }
    Ok(plan)
}
