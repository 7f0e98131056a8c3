//! Per-rank partitioned coarse-mesh container.

use crate::error::{CmeshError, Result};
use crate::offsets::OffsetArray;
use crate::tree::{FaceCode, TreeClass};

/// Face entry of a tree addressed by global index, used by ghost records and
/// the global connectivity view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalFace {
    Boundary,
    Tree { id: i64, code: FaceCode },
}

/// Result of resolving a local tree's face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborRef {
    Boundary,
    Global(i64),
}

/// A tree local to one rank.
///
/// `tree_to_tree[i]` holds a local index `u`: tree `u` when `u < n_p`, ghost
/// `u - n_p` otherwise. A face pointing back at the tree's own index with
/// `neighbor_face == i` marks a domain boundary; self-connection through two
/// different faces remains legal (one-tree periodicity).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTree {
    pub class: TreeClass,
    pub tree_to_tree: Vec<u32>,
    pub tree_to_face: Vec<FaceCode>,
    /// Opaque application payload, moved verbatim during partition.
    pub data: Vec<u8>,
}

/// Meta data of a nonlocal tree. Neighbors are stored by global index,
/// including neighbors that are neither local nor ghost on the holder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhostRecord {
    pub id: i64,
    pub class: TreeClass,
    pub faces: Vec<GlobalFace>,
}

/// One rank's slice of a partitioned coarse mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cmesh {
    pub rank: usize,
    pub dim: usize,
    pub offsets: OffsetArray,
    /// Local trees, contiguous and ascending in global index.
    pub trees: Vec<LocalTree>,
    /// Ghost records grouped by providing rank ascending, sorted by global id
    /// within a group.
    pub ghosts: Vec<GhostRecord>,
}

impl Cmesh {
    pub fn n_local(&self) -> u32 {
        self.trees.len() as u32
    }

    pub fn n_ghosts(&self) -> u32 {
        self.ghosts.len() as u32
    }

    /// Global index of the first local tree.
    pub fn first_tree(&self) -> i64 {
        self.offsets.first_tree(self.rank).expect("own rank in range")
    }

    /// k = k_p + l
    pub fn global_of_local(&self, local: u32) -> i64 {
        self.first_tree() + local as i64
    }

    pub fn ghost_index_of(&self, id: i64) -> Option<u32> {
        self.ghosts
            .iter()
            .position(|g| g.id == id)
            .map(|i| i as u32)
    }

    /// Resolve face `face` of local tree `local` to a global index or the
    /// boundary marker.
    pub fn neighbor_global_index(&self, local: u32, face: usize) -> Result<NeighborRef> {
        let tree = self
            .trees
            .get(local as usize)
            .ok_or(CmeshError::RankOutOfRange(local as usize, self.trees.len()))?;
        if face >= tree.tree_to_tree.len() {
            return Err(CmeshError::FaceOutOfRange {
                face,
                what: "neighbor_global_index",
            });
        }
        let u = tree.tree_to_tree[face];
        if u == local && tree.tree_to_face[face].neighbor_face() == face {
            return Ok(NeighborRef::Boundary);
        }
        let n_local = self.n_local();
        if u < n_local {
            Ok(NeighborRef::Global(self.global_of_local(u)))
        } else {
            let gi = (u - n_local) as usize;
            let ghost = self.ghosts.get(gi).ok_or(CmeshError::MissingGhost {
                rank: self.rank,
                ghost: u as i64,
                tree: self.global_of_local(local),
            })?;
            Ok(NeighborRef::Global(ghost.id))
        }
    }

    /// View a local tree as a ghost record: all faces resolved to global
    /// indices. This is what crosses the wire when the tree becomes a ghost
    /// elsewhere, and what ghost-sending decisions are evaluated on.
    pub fn local_as_ghost_record(&self, local: u32) -> Result<GhostRecord> {
        let tree = &self.trees[local as usize];
        let mut faces = Vec::with_capacity(tree.tree_to_tree.len());
        for face in 0..tree.tree_to_tree.len() {
            faces.push(match self.neighbor_global_index(local, face)? {
                NeighborRef::Boundary => GlobalFace::Boundary,
                NeighborRef::Global(id) => GlobalFace::Tree {
                    id,
                    code: tree.tree_to_face[face],
                },
            });
        }
        Ok(GhostRecord {
            id: self.global_of_local(local),
            class: tree.class,
            faces,
        })
    }

    /// Ghost-record view of any tree the rank has data for, local or ghost.
    pub fn record_for_global(&self, id: i64) -> Result<Option<GhostRecord>> {
        let k_p = self.first_tree();
        if id >= k_p && id < k_p + self.n_local() as i64 {
            return Ok(Some(self.local_as_ghost_record((id - k_p) as u32)?));
        }
        Ok(self.ghosts.iter().find(|g| g.id == id).cloned())
    }
}
