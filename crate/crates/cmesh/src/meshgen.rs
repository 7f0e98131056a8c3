//! Programmatic coarse-mesh generators for tests and benchmarks.

use crate::cmesh::GlobalFace;
use crate::error::{CmeshError, Result};
use crate::global::{connect, GlobalConnectivity, GlobalTree};
use crate::offsets::OffsetArray;
use crate::tree::{encode_face, TreeClass};

/// One structured block of quads or hexes per rank.
#[derive(Debug, Clone, Copy)]
pub struct BrickSpec {
    pub nx: usize,
    pub ny: usize,
    /// Ignored in 2D.
    pub nz: usize,
    pub ranks: usize,
    pub dim: usize,
    /// Glue consecutive blocks along x instead of leaving them disjoint.
    pub connected: bool,
}

impl BrickSpec {
    pub fn trees_per_rank(&self) -> usize {
        self.nx * self.ny * if self.dim == 3 { self.nz } else { 1 }
    }

    pub fn total_trees(&self) -> usize {
        self.trees_per_rank() * self.ranks
    }
}

/// Connectivity of all blocks: grid-face adjacency inside each block with
/// orientation 0, block boundaries as domain boundaries (or glued along x in
/// connected mode).
pub fn brick_connectivity(spec: &BrickSpec) -> Result<GlobalConnectivity> {
    if spec.dim != 2 && spec.dim != 3 {
        return Err(CmeshError::Parse(format!(
            "brick dimension must be 2 or 3, got {}",
            spec.dim
        )));
    }
    if spec.nx == 0 || spec.ny == 0 || (spec.dim == 3 && spec.nz == 0) || spec.ranks == 0 {
        return Err(CmeshError::Parse("brick dimensions must be at least 1".into()));
    }
    let per_rank = spec
        .nx
        .checked_mul(spec.ny)
        .and_then(|v| if spec.dim == 3 { v.checked_mul(spec.nz) } else { Some(v) })
        .ok_or(CmeshError::Overflow("brick tree count"))?;
    let total = per_rank
        .checked_mul(spec.ranks)
        .filter(|&t| t < i64::MAX as usize / 2)
        .ok_or(CmeshError::Overflow("brick tree count"))?;
    let class = if spec.dim == 3 {
        TreeClass::Hex
    } else {
        TreeClass::Quad
    };
    let nz = if spec.dim == 3 { spec.nz } else { 1 };
    let (nx, ny) = (spec.nx, spec.ny);
    let index = |r: usize, x: usize, y: usize, z: usize| -> i64 {
        (r * per_rank + (z * ny + y) * nx + x) as i64
    };
    let mut trees = Vec::with_capacity(total);
    for r in 0..spec.ranks {
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut faces = vec![GlobalFace::Boundary; class.num_faces()];
                    // faces: 0 -x, 1 +x, 2 -y, 3 +y, (4 -z, 5 +z)
                    let mut link = |f: usize, id: i64| {
                        // axis-aligned grid neighbors connect with orientation 0
                        // and the opposite face number
                        faces[f] = GlobalFace::Tree {
                            id,
                            code: encode_face(0, f ^ 1, spec.dim).expect("face in range"),
                        };
                    };
                    if x > 0 {
                        link(0, index(r, x - 1, y, z));
                    } else if spec.connected && r > 0 {
                        link(0, index(r - 1, nx - 1, y, z));
                    }
                    if x + 1 < nx {
                        link(1, index(r, x + 1, y, z));
                    } else if spec.connected && r + 1 < spec.ranks {
                        link(1, index(r + 1, 0, y, z));
                    }
                    if y > 0 {
                        link(2, index(r, x, y - 1, z));
                    }
                    if y + 1 < ny {
                        link(3, index(r, x, y + 1, z));
                    }
                    if spec.dim == 3 {
                        if z > 0 {
                            link(4, index(r, x, y, z - 1));
                        }
                        if z + 1 < nz {
                            link(5, index(r, x, y, z + 1));
                        }
                    }
                    trees.push(GlobalTree {
                        class,
                        faces,
                        data: Vec::new(),
                    });
                }
            }
        }
    }
    Ok(GlobalConnectivity {
        dim: spec.dim,
        trees,
    })
}

/// The uniform one-block-per-rank partition matching [`brick_connectivity`]:
/// no shared trees, all entries nonnegative.
pub fn brick_offsets(spec: &BrickSpec) -> Result<OffsetArray> {
    let per_rank = spec.trees_per_rank() as i64;
    OffsetArray::from_entries((0..=spec.ranks as i64).map(|p| p * per_rank).collect())
}

/// Shift `floor(fraction * n_p)` trees from each rank's tail to the next
/// rank, all computed from the input partition at once; the last rank keeps
/// everything it has. The result has no shared trees.
pub fn shift_partition(offsets: &OffsetArray, fraction: f64) -> Result<OffsetArray> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(CmeshError::Parse(format!(
            "shift fraction must be in [0, 1), got {fraction}"
        )));
    }
    let p_count = offsets.num_ranks();
    if fraction == 0.0 || p_count == 1 {
        return Ok(offsets.clone());
    }
    let mut entries = Vec::with_capacity(p_count + 1);
    entries.push(0i64);
    for p in 0..p_count - 1 {
        let n_p = offsets.num_local_trees(p)?;
        let moved = (fraction * n_p as f64).floor() as i64;
        // the empty-rank convention makes last_tree(p) the running high-water
        // mark, so this stays monotone even across empty ranks
        entries.push(offsets.last_tree(p)? - moved + 1);
    }
    entries.push(offsets.total_trees());
    OffsetArray::from_entries(entries)
}

/// Two triangles glued along one edge, the rest domain boundary.
pub fn two_triangle_mesh() -> GlobalConnectivity {
    let mut mesh = GlobalConnectivity {
        dim: 2,
        trees: (0..2)
            .map(|k| GlobalTree {
                class: TreeClass::Triangle,
                faces: vec![GlobalFace::Boundary; 3],
                data: vec![k as u8],
            })
            .collect(),
    };
    connect(&mut mesh, 0, 1, 1, 2, 1, 1).expect("triangle edges align");
    mesh
}

/// Three quads in a cycle: face 0 to the previous tree, face 1 to the next,
/// faces 2 and 3 domain boundary. Every pair of trees is face-adjacent.
pub fn three_tree_ring() -> GlobalConnectivity {
    let mut mesh = GlobalConnectivity {
        dim: 2,
        trees: (0..3)
            .map(|k| GlobalTree {
                class: TreeClass::Quad,
                faces: vec![GlobalFace::Boundary; 4],
                data: vec![k as u8],
            })
            .collect(),
    };
    for k in 0..3 {
        connect(&mut mesh, k, 1, (k + 1) % 3, 0, 0, 0).expect("quad edges align");
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;

    #[test]
    fn named_meshes_validate() {
        let two = two_triangle_mesh();
        assert_eq!(two.num_trees(), 2);
        assert!(two.validate().is_empty(), "{:?}", two.validate());
        let interior = two
            .trees
            .iter()
            .flat_map(|t| &t.faces)
            .filter(|f| matches!(f, GlobalFace::Tree { .. }))
            .count();
        assert_eq!(interior, 2); // one connection, stored from both sides
        let ring = three_tree_ring();
        assert!(ring.validate().is_empty(), "{:?}", ring.validate());
        for tree in &ring.trees {
            let n = tree
                .faces
                .iter()
                .filter(|f| matches!(f, GlobalFace::Tree { .. }))
                .count();
            assert_eq!(n, 2);
        }
    }

    #[test]
    fn brick_counts_and_validity() {
        let spec = BrickSpec {
            nx: 10,
            ny: 18,
            nz: 8,
            ranks: 6,
            dim: 3,
            connected: false,
        };
        assert_eq!(spec.trees_per_rank(), 1440);
        assert_eq!(spec.total_trees(), 8640);
        let mesh = brick_connectivity(&spec).unwrap();
        assert_eq!(mesh.num_trees(), 8640);
        let offsets = brick_offsets(&spec).unwrap();
        assert!(offsets.is_valid());
        assert!(offsets.entries().iter().all(|&e| e >= 0));
        assert_eq!(offsets.total_trees(), 8640);
    }

    #[test]
    fn single_tree_brick_is_all_boundary() {
        let spec = BrickSpec {
            nx: 1,
            ny: 1,
            nz: 1,
            ranks: 1,
            dim: 3,
            connected: false,
        };
        let mesh = brick_connectivity(&spec).unwrap();
        assert_eq!(mesh.num_trees(), 1);
        assert!(mesh.trees[0]
            .faces
            .iter()
            .all(|f| matches!(f, GlobalFace::Boundary)));
    }

    #[test]
    fn disjoint_blocks_have_no_cross_rank_ghosts() {
        let spec = BrickSpec {
            nx: 2,
            ny: 1,
            nz: 1,
            ranks: 2,
            dim: 2,
            connected: false,
        };
        let mesh = brick_connectivity(&spec).unwrap();
        assert_eq!(mesh.num_trees(), 4);
        assert!(mesh.validate().is_empty());
        let offsets = brick_offsets(&spec).unwrap();
        for p in 0..2 {
            assert!(oracle::ghost_set(&mesh, &offsets, p).unwrap().is_empty());
        }
    }

    #[test]
    fn connected_blocks_see_each_other() {
        let spec = BrickSpec {
            nx: 2,
            ny: 2,
            nz: 1,
            ranks: 3,
            dim: 2,
            connected: true,
        };
        let mesh = brick_connectivity(&spec).unwrap();
        assert!(mesh.validate().is_empty(), "{:?}", mesh.validate());
        let offsets = brick_offsets(&spec).unwrap();
        let ghosts = oracle::ghost_set(&mesh, &offsets, 1).unwrap();
        assert!(!ghosts.is_empty());
        assert!(ghosts.iter().all(|&g| !offsets.owns(1, g)));
    }

    #[test]
    fn bricks_validate_across_sizes() {
        for dim in [2, 3] {
            for ranks in 1..=8 {
                for (nx, ny, nz) in [(1, 1, 1), (2, 3, 1), (4, 4, 4)] {
                    for connected in [false, true] {
                        let spec = BrickSpec {
                            nx,
                            ny,
                            nz,
                            ranks,
                            dim,
                            connected,
                        };
                        let mesh = brick_connectivity(&spec).unwrap();
                        let report = mesh.validate();
                        assert!(report.is_empty(), "{spec:?}: {report:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn shift_arithmetic_uniform_hundred() {
        let o = OffsetArray::from_entries((0..=4).map(|p| p * 100).collect()).unwrap();
        let s = shift_partition(&o, 0.43).unwrap();
        assert_eq!(s.entries(), &[0, 57, 157, 257, 400]);
        assert_eq!(s.num_local_trees(0).unwrap(), 57);
        assert_eq!(s.num_local_trees(1).unwrap(), 100);
        assert_eq!(s.num_local_trees(3).unwrap(), 143);
    }

    #[test]
    fn shift_edge_cases() {
        let o = OffsetArray::from_entries(vec![0, 3, 7, 9]).unwrap();
        assert_eq!(shift_partition(&o, 0.0).unwrap().entries(), o.entries());
        let single = OffsetArray::from_entries(vec![0, 9]).unwrap();
        assert_eq!(shift_partition(&single, 0.43).unwrap().entries(), single.entries());
        assert!(shift_partition(&o, 1.0).is_err());
        assert!(shift_partition(&o, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn shift_outputs_are_valid_and_conserve_trees(
            seed in 0u64..5_000,
            frac in 0.0f64..0.99,
        ) {
            let (o, _) = oracle::random_partition_pair(60, 12, seed);
            let s = shift_partition(&o, frac).unwrap();
            prop_assert!(s.is_valid(), "{:?} -> {:?}", o.entries(), s.entries());
            prop_assert_eq!(s.total_trees(), o.total_trees());
            prop_assert!(s.entries().iter().all(|&e| e >= 0));
        }
    }
}
