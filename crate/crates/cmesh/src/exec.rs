//! The repartition step itself: building messages in the sending phase and
//! reconstructing each rank's mesh in the receiving phase.
//!
//! Index updates run in two phases. Senders rewrite every neighbor entry
//! that will be local on the destination to its new local index; entries that
//! will be ghosts stay global. Receivers assign ghost indices (grouped by
//! providing rank ascending, ascending ids within a group) and patch the
//! remaining global entries.

use std::collections::BTreeSet;

use crate::cmesh::{Cmesh, GhostRecord, GlobalFace, LocalTree, NeighborRef};
use crate::error::{CmeshError, Result};
use crate::ghost;
use crate::offsets::OffsetArray;
use crate::pattern;
use crate::tree::{encode_face, FaceCode, TreeClass};

/// A face entry as it crosses the wire: already local on the destination,
/// still global (ghost-bound), or domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireFace {
    Boundary,
    Local { index: u32, code: FaceCode },
    Ghost { id: i64, code: FaceCode },
}

/// One tree in flight, neighbor entries phase-1 rewritten.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireTree {
    pub id: i64,
    pub class: TreeClass,
    pub faces: Vec<WireFace>,
    pub data: Vec<u8>,
}

/// Everything one rank sends another in one repartition step. Trees ascend in
/// global index over a contiguous range; ghost records keep global neighbor
/// indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMessage {
    pub from: usize,
    pub to: usize,
    pub dim: usize,
    pub trees: Vec<WireTree>,
    pub ghosts: Vec<GhostRecord>,
}

const FACE_BOUNDARY: u8 = 0;
const FACE_LOCAL: u8 = 1;
const FACE_GHOST: u8 = 2;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_i64(buf: &mut Vec<u8>, v: i64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CmeshError::Parse("truncated message payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl RankMessage {
    /// `msg v1` header line, then a little-endian length-prefixed payload.
    /// Fixed-width integers throughout, so byte counts are reproducible.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        for t in &self.trees {
            put_i64(&mut payload, t.id);
            payload.push(t.class.code());
            payload.push(t.faces.len() as u8);
            for face in &t.faces {
                match *face {
                    WireFace::Boundary => {
                        payload.push(FACE_BOUNDARY);
                        payload.push(0);
                        put_i64(&mut payload, 0);
                    }
                    WireFace::Local { index, code } => {
                        payload.push(FACE_LOCAL);
                        payload.push(code.value());
                        put_i64(&mut payload, index as i64);
                    }
                    WireFace::Ghost { id, code } => {
                        payload.push(FACE_GHOST);
                        payload.push(code.value());
                        put_i64(&mut payload, id);
                    }
                }
            }
            put_u32(&mut payload, t.data.len() as u32);
            payload.extend_from_slice(&t.data);
        }
        for g in &self.ghosts {
            put_i64(&mut payload, g.id);
            payload.push(g.class.code());
            payload.push(g.faces.len() as u8);
            for face in &g.faces {
                match *face {
                    GlobalFace::Boundary => {
                        payload.push(FACE_BOUNDARY);
                        payload.push(0);
                        put_i64(&mut payload, 0);
                    }
                    GlobalFace::Tree { id, code } => {
                        payload.push(FACE_GHOST);
                        payload.push(code.value());
                        put_i64(&mut payload, id);
                    }
                }
            }
        }
        let mut out = format!(
            "msg v1 from={} to={} dim={} ntrees={} nghosts={}\n",
            self.from,
            self.to,
            self.dim,
            self.trees.len(),
            self.ghosts.len()
        )
        .into_bytes();
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn byte_length(&self) -> usize {
        self.to_bytes().len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<RankMessage> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| CmeshError::Parse("message missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|e| CmeshError::Parse(format!("bad header encoding: {e}")))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("msg") || parts.next() != Some("v1") {
            return Err(CmeshError::Parse("message must start with 'msg v1'".into()));
        }
        let mut field = |name: &str| -> Result<usize> {
            parts
                .next()
                .and_then(|t| t.strip_prefix(name))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CmeshError::Parse(format!("header missing {name}")))
        };
        let from = field("from=")?;
        let to = field("to=")?;
        let dim = field("dim=")?;
        let ntrees = field("ntrees=")?;
        let nghosts = field("nghosts=")?;
        let mut cur = Cursor {
            buf: &bytes[nl + 1..],
            pos: 0,
        };
        let declared = cur.i64()? as usize;
        if declared != cur.buf.len() - cur.pos {
            return Err(CmeshError::Parse(format!(
                "payload length {declared} does not match {} bytes present",
                cur.buf.len() - cur.pos
            )));
        }
        let mut trees = Vec::with_capacity(ntrees);
        for _ in 0..ntrees {
            let id = cur.i64()?;
            let class = TreeClass::from_code(cur.u8()?)?;
            let nfaces = cur.u8()? as usize;
            let mut faces = Vec::with_capacity(nfaces);
            for _ in 0..nfaces {
                let kind = cur.u8()?;
                let code = FaceCode::new(cur.u8()?, dim);
                let value = cur.i64()?;
                faces.push(match kind {
                    FACE_BOUNDARY => WireFace::Boundary,
                    FACE_LOCAL => WireFace::Local {
                        index: value as u32,
                        code,
                    },
                    FACE_GHOST => WireFace::Ghost { id: value, code },
                    other => {
                        return Err(CmeshError::Parse(format!("unknown face kind {other}")))
                    }
                });
            }
            let dlen = cur.u32()? as usize;
            let data = cur.take(dlen)?.to_vec();
            trees.push(WireTree {
                id,
                class,
                faces,
                data,
            });
        }
        let mut ghosts = Vec::with_capacity(nghosts);
        for _ in 0..nghosts {
            let id = cur.i64()?;
            let class = TreeClass::from_code(cur.u8()?)?;
            let nfaces = cur.u8()? as usize;
            let mut faces = Vec::with_capacity(nfaces);
            for _ in 0..nfaces {
                let kind = cur.u8()?;
                let code = FaceCode::new(cur.u8()?, dim);
                let value = cur.i64()?;
                faces.push(match kind {
                    FACE_BOUNDARY => GlobalFace::Boundary,
                    FACE_GHOST => GlobalFace::Tree { id: value, code },
                    other => {
                        return Err(CmeshError::Parse(format!(
                            "ghost records carry global faces only, got kind {other}"
                        )))
                    }
                });
            }
            ghosts.push(GhostRecord { id, class, faces });
        }
        Ok(RankMessage {
            from,
            to,
            dim,
            trees,
            ghosts,
        })
    }
}

/// Phase-1 rewrite of one local tree bound for destination `q`: neighbors in
/// `f'(q)` become destination-local indices, the rest stay global.
pub fn update_ids_phase1(c: &Cmesh, k_global: i64, q: usize, o_new: &OffsetArray) -> Result<WireTree> {
    let local = (k_global - c.first_tree()) as u32;
    let tree = &c.trees[local as usize];
    let dest_first = o_new.first_tree(q)?;
    let dest_count = o_new.num_local_trees(q)? as i64;
    let mut faces = Vec::with_capacity(tree.tree_to_tree.len());
    for f in 0..tree.tree_to_tree.len() {
        faces.push(match c.neighbor_global_index(local, f)? {
            NeighborRef::Boundary => WireFace::Boundary,
            NeighborRef::Global(id) => {
                if o_new.owns(q, id) {
                    let index = id - dest_first;
                    if index < 0 || index >= dest_count {
                        return Err(CmeshError::IndexOutOfDestRange {
                            rank: c.rank,
                            index,
                            dest: q,
                        });
                    }
                    WireFace::Local {
                        index: index as u32,
                        code: tree.tree_to_face[f],
                    }
                } else {
                    WireFace::Ghost {
                        id,
                        code: tree.tree_to_face[f],
                    }
                }
            }
        });
    }
    Ok(WireTree {
        id: k_global,
        class: tree.class,
        faces,
        data: tree.data.clone(),
    })
}

/// Build all outgoing messages of one rank, the self transfer included (it
/// never touches the wire; the runtime routes it directly).
pub fn sending_phase(c: &Cmesh, o_new: &OffsetArray) -> Result<Vec<RankMessage>> {
    let pat = pattern::compute_pattern(&c.offsets, o_new, c.rank)?;
    let plan = ghost::plan_ghost_sends(c, o_new, &pat)?;
    let mut out = Vec::with_capacity(pat.send_ranges.len());
    for &(q, lo, hi) in &pat.send_ranges {
        let trees = (lo..=hi)
            .map(|k| update_ids_phase1(c, k, q, o_new))
            .collect::<Result<Vec<_>>>()?;
        let ghosts = plan
            .ids_for(q)
            .into_iter()
            .map(|id| {
                c.record_for_global(id)?.ok_or(CmeshError::MissingGhost {
                    rank: c.rank,
                    ghost: id,
                    tree: lo,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(RankMessage {
            from: c.rank,
            to: q,
            dim: c.dim,
            trees,
            ghosts,
        });
    }
    Ok(out)
}

/// Rebuild rank `old.rank`'s mesh from its mailbox: place received trees,
/// merge received and retained ghosts, and patch the ghost-bound neighbor
/// entries (phase 2).
pub fn receiving_phase(
    old: &Cmesh,
    o_new: &OffsetArray,
    inbox: &[RankMessage],
) -> Result<Cmesh> {
    let p = old.rank;
    let n_new = o_new.num_local_trees(p)? as usize;
    let first = o_new.first_tree(p)?;
    let mut inbox: Vec<&RankMessage> = inbox.iter().collect();
    inbox.sort_by_key(|m| m.from);

    let mut slots: Vec<Option<&WireTree>> = vec![None; n_new];
    for msg in &inbox {
        debug_assert_eq!(msg.to, p);
        for wt in &msg.trees {
            let idx = wt.id - first;
            if idx < 0 || idx >= n_new as i64 {
                return Err(CmeshError::IndexOutOfDestRange {
                    rank: msg.from,
                    index: idx,
                    dest: p,
                });
            }
            if slots[idx as usize].is_some() {
                return Err(CmeshError::DuplicateTree { rank: p, tree: wt.id });
            }
            slots[idx as usize] = Some(wt);
        }
    }
    let mut trees_in = Vec::with_capacity(n_new);
    for (i, slot) in slots.into_iter().enumerate() {
        trees_in.push(slot.ok_or(CmeshError::UndeliveredTree {
            rank: p,
            tree: first + i as i64,
        })?);
    }

    // ghost requirement: every still-global neighbor entry
    let mut required: BTreeSet<i64> = BTreeSet::new();
    for wt in &trees_in {
        for face in &wt.faces {
            if let WireFace::Ghost { id, .. } = *face {
                required.insert(id);
            }
        }
    }

    // received ghosts, keyed by (provider, id); the self group carries the
    // retained ones
    let mut provided: Vec<(usize, GhostRecord)> = Vec::new();
    let mut provided_ids: BTreeSet<i64> = BTreeSet::new();
    for msg in &inbox {
        for g in &msg.ghosts {
            if !required.contains(&g.id) || !provided_ids.insert(g.id) {
                return Err(CmeshError::DuplicateGhost { rank: p, ghost: g.id });
            }
            provided.push((msg.from, g.clone()));
        }
    }
    for &id in required.iter() {
        if provided_ids.contains(&id) {
            continue;
        }
        let record = old.record_for_global(id)?.filter(|r| {
            ghost::dest_retains(r, &old.offsets, o_new, p).unwrap_or(false)
        });
        match record {
            Some(r) => provided.push((p, r)),
            None => {
                return Err(CmeshError::MissingGhost {
                    rank: p,
                    ghost: id,
                    tree: -1,
                })
            }
        }
    }
    provided.sort_by_key(|(from, g)| (*from, g.id));
    let ghosts: Vec<GhostRecord> = provided.into_iter().map(|(_, g)| g).collect();
    let ghost_index = |id: i64| -> Option<u32> {
        ghosts
            .iter()
            .position(|g| g.id == id)
            .map(|i| n_new as u32 + i as u32)
    };

    // phase 2: materialize local trees, resolving ghost-bound entries
    let dim = old.dim;
    let mut trees = Vec::with_capacity(n_new);
    for (i, wt) in trees_in.iter().enumerate() {
        let mut ttt = Vec::with_capacity(wt.faces.len());
        let mut ttf = Vec::with_capacity(wt.faces.len());
        for (f, face) in wt.faces.iter().enumerate() {
            match *face {
                WireFace::Boundary => {
                    ttt.push(i as u32);
                    ttf.push(encode_face(0, f, dim)?);
                }
                WireFace::Local { index, code } => {
                    ttt.push(index);
                    ttf.push(code);
                }
                WireFace::Ghost { id, code } => {
                    let gi = ghost_index(id).ok_or(CmeshError::MissingGhost {
                        rank: p,
                        ghost: id,
                        tree: wt.id,
                    })?;
                    ttt.push(gi);
                    ttf.push(code);
                }
            }
        }
        trees.push(LocalTree {
            class: wt.class,
            tree_to_tree: ttt,
            tree_to_face: ttf,
            data: wt.data.clone(),
        });
    }
    Ok(Cmesh {
        rank: p,
        dim,
        offsets: o_new.clone(),
        trees,
        ghosts,
    })
}

/// One full repartition step over all simulated ranks, sequentially. The
/// parallel runtime wraps the same two phases; this form is handy in tests.
pub fn partition_all(ranks: &[Cmesh], o_new: &OffsetArray) -> Result<Vec<Cmesh>> {
    if let Some(c) = ranks.first() {
        if c.offsets.total_trees() != o_new.total_trees() {
            return Err(CmeshError::TreeCountMismatch(
                c.offsets.total_trees(),
                o_new.total_trees(),
            ));
        }
    }
    let mut mailboxes: Vec<Vec<RankMessage>> = vec![Vec::new(); ranks.len()];
    for c in ranks {
        for msg in sending_phase(c, o_new)? {
            mailboxes[msg.to].push(msg);
        }
    }
    ranks
        .iter()
        .map(|c| receiving_phase(c, o_new, &mailboxes[c.rank]))
        .collect()
}
