//! Rank-independent view of a full coarse mesh: connectivity validation, the
//! text dump format, and distribution of a global mesh onto simulated ranks.

use std::fmt::Write as _;

use crate::cmesh::{Cmesh, GhostRecord, GlobalFace, LocalTree, NeighborRef};
use crate::error::{CmeshError, Result};
use crate::ghost::ghost_ids;
use crate::offsets::OffsetArray;
use crate::tree::{encode_face, max_faces, FaceCode, TreeClass};

/// One tree of a global connectivity, neighbors by global index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalTree {
    pub class: TreeClass,
    pub faces: Vec<GlobalFace>,
    pub data: Vec<u8>,
}

/// Whole-mesh connectivity, trees ascending by global index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalConnectivity {
    pub dim: usize,
    pub trees: Vec<GlobalTree>,
}

impl GlobalConnectivity {
    pub fn num_trees(&self) -> i64 {
        self.trees.len() as i64
    }

    /// Mutual-consistency check of the face-neighbor encoding.
    ///
    /// If tree `k` lists `k'` at face `f` with neighbor face `f'` and
    /// orientation `o`, then `k'` must list `k` at face `f'` with neighbor
    /// face `f` and the same `o`. Violations are returned as data, not errors.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, tree) in self.trees.iter().enumerate() {
            if tree.class.dimension() != self.dim {
                out.push(format!(
                    "tree {k}: class {} has dimension {}, mesh is {}D",
                    tree.class.name(),
                    tree.class.dimension(),
                    self.dim
                ));
                continue;
            }
            if tree.faces.len() != tree.class.num_faces() {
                out.push(format!(
                    "tree {k}: {} face entries for class {}",
                    tree.faces.len(),
                    tree.class.name()
                ));
                continue;
            }
            for (f, face) in tree.faces.iter().enumerate() {
                let GlobalFace::Tree { id, code } = *face else {
                    continue;
                };
                if id < 0 || id >= self.num_trees() {
                    out.push(format!("tree {k} face {f}: neighbor {id} out of range"));
                    continue;
                }
                if id == k as i64 && code.neighbor_face() == f {
                    out.push(format!(
                        "tree {k} face {f}: self-connection with identical face number"
                    ));
                    continue;
                }
                let nbr = &self.trees[id as usize];
                let f_prime = code.neighbor_face();
                if f_prime >= nbr.class.num_faces() {
                    out.push(format!(
                        "tree {k} face {f}: neighbor face {f_prime} out of range for {}",
                        nbr.class.name()
                    ));
                    continue;
                }
                let corners = tree.class.face_corner_count(f).unwrap();
                match nbr.class.face_corner_count(f_prime) {
                    Ok(c) if c == corners => {}
                    _ => {
                        out.push(format!(
                            "trees {k} and {id}: faces {f}/{f_prime} have mismatched corner counts"
                        ));
                        continue;
                    }
                }
                if code.orientation() >= corners {
                    out.push(format!(
                        "tree {k} face {f}: orientation {} exceeds corner count {corners}",
                        code.orientation()
                    ));
                }
                match nbr.faces[f_prime] {
                    GlobalFace::Tree {
                        id: back_id,
                        code: back_code,
                    } if back_id == k as i64
                        && back_code.neighbor_face() == f
                        && back_code.orientation() == code.orientation() => {}
                    _ => out.push(format!(
                        "trees {k} and {id}: face {f} -> {f_prime} not mirrored consistently"
                    )),
                }
            }
        }
        out
    }

    /// Text dump: `cmesh v1 dim=<d> K=<K>` header, one `tree` line per tree.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        writeln!(s, "cmesh v1 dim={} K={}", self.dim, self.num_trees()).unwrap();
        for (k, tree) in self.trees.iter().enumerate() {
            write!(s, "tree {k} {} ;", tree.class.name()).unwrap();
            for face in &tree.faces {
                match face {
                    GlobalFace::Boundary => write!(s, " B").unwrap(),
                    GlobalFace::Tree { id, code } => write!(s, " {id}:{}", code.value()).unwrap(),
                }
            }
            write!(s, " ; data=").unwrap();
            for b in &tree.data {
                write!(s, "{b:02x}").unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| CmeshError::Parse("empty dump".into()))?;
        let mut dim = None;
        let mut count = None;
        let mut header_parts = header.split_whitespace();
        if header_parts.next() != Some("cmesh") || header_parts.next() != Some("v1") {
            return Err(CmeshError::Parse("dump must start with 'cmesh v1'".into()));
        }
        for tok in header_parts {
            if let Some(v) = tok.strip_prefix("dim=") {
                dim = Some(v.parse::<usize>().map_err(|e| CmeshError::Parse(e.to_string()))?);
            } else if let Some(v) = tok.strip_prefix("K=") {
                count = Some(v.parse::<usize>().map_err(|e| CmeshError::Parse(e.to_string()))?);
            }
        }
        let dim = dim.ok_or_else(|| CmeshError::Parse("header missing dim=".into()))?;
        let count = count.ok_or_else(|| CmeshError::Parse("header missing K=".into()))?;
        let mut trees = Vec::with_capacity(count);
        for line in lines {
            let parts: Vec<&str> = line.splitn(2, ';').collect();
            let head: Vec<&str> = parts[0].split_whitespace().collect();
            if head.len() != 3 || head[0] != "tree" {
                return Err(CmeshError::Parse(format!("bad tree line: {line:?}")));
            }
            let k: usize = head[1]
                .parse()
                .map_err(|e| CmeshError::Parse(format!("bad tree index: {e}")))?;
            if k != trees.len() {
                return Err(CmeshError::Parse(format!(
                    "tree {k} out of order (expected {})",
                    trees.len()
                )));
            }
            let class = TreeClass::parse(head[2])?;
            let rest = parts
                .get(1)
                .ok_or_else(|| CmeshError::Parse(format!("tree {k}: missing face list")))?;
            let (face_str, data_str) = rest
                .split_once(';')
                .ok_or_else(|| CmeshError::Parse(format!("tree {k}: missing data section")))?;
            let mut faces = Vec::new();
            for tok in face_str.split_whitespace() {
                if tok == "B" {
                    faces.push(GlobalFace::Boundary);
                } else {
                    let (id, code) = tok
                        .split_once(':')
                        .ok_or_else(|| CmeshError::Parse(format!("bad face token {tok:?}")))?;
                    let id: i64 = id
                        .parse()
                        .map_err(|e| CmeshError::Parse(format!("bad neighbor id: {e}")))?;
                    let code: u8 = code
                        .parse()
                        .map_err(|e| CmeshError::Parse(format!("bad face code: {e}")))?;
                    faces.push(GlobalFace::Tree {
                        id,
                        code: FaceCode::new(code, dim),
                    });
                }
            }
            let data_hex = data_str
                .trim()
                .strip_prefix("data=")
                .ok_or_else(|| CmeshError::Parse(format!("tree {k}: missing data=")))?;
            if data_hex.len() % 2 != 0 {
                return Err(CmeshError::Parse(format!("tree {k}: odd hex payload")));
            }
            let data = (0..data_hex.len() / 2)
                .map(|i| {
                    u8::from_str_radix(&data_hex[2 * i..2 * i + 2], 16)
                        .map_err(|e| CmeshError::Parse(format!("tree {k}: bad hex: {e}")))
                })
                .collect::<Result<Vec<u8>>>()?;
            trees.push(GlobalTree { class, faces, data });
        }
        if trees.len() != count {
            return Err(CmeshError::Parse(format!(
                "header declares K={count} but found {} trees",
                trees.len()
            )));
        }
        Ok(GlobalConnectivity { dim, trees })
    }

    /// Cut out rank `p`'s slice: local trees with local-index neighbor
    /// entries and the full ghost layer, ghosts sorted by global id.
    pub fn distribute(&self, offsets: &OffsetArray, rank: usize) -> Result<Cmesh> {
        let k_p = offsets.first_tree(rank)?;
        let n_p = offsets.num_local_trees(rank)?;
        let ghost_list = ghost_ids(self, offsets, rank)?;
        let mut trees = Vec::with_capacity(n_p as usize);
        for local in 0..n_p {
            let k = (k_p + local) as usize;
            let src = &self.trees[k];
            let mut ttt = Vec::with_capacity(src.faces.len());
            let mut ttf = Vec::with_capacity(src.faces.len());
            for (f, face) in src.faces.iter().enumerate() {
                match *face {
                    GlobalFace::Boundary => {
                        ttt.push(local as u32);
                        ttf.push(encode_face(0, f, self.dim)?);
                    }
                    GlobalFace::Tree { id, code } => {
                        let u = if id >= k_p && id < k_p + n_p {
                            (id - k_p) as u32
                        } else {
                            let gi = ghost_list
                                .binary_search(&id)
                                .map_err(|_| CmeshError::MissingGhost {
                                    rank,
                                    ghost: id,
                                    tree: k as i64,
                                })?;
                            n_p as u32 + gi as u32
                        };
                        ttt.push(u);
                        ttf.push(code);
                    }
                }
            }
            trees.push(LocalTree {
                class: src.class,
                tree_to_tree: ttt,
                tree_to_face: ttf,
                data: src.data.clone(),
            });
        }
        let ghosts = ghost_list
            .iter()
            .map(|&id| {
                let src = &self.trees[id as usize];
                GhostRecord {
                    id,
                    class: src.class,
                    faces: src.faces.clone(),
                }
            })
            .collect();
        Ok(Cmesh {
            rank,
            dim: self.dim,
            offsets: offsets.clone(),
            trees,
            ghosts,
        })
    }

    /// Reassemble a global connectivity from all ranks' slices.
    ///
    /// Shared trees must agree bit-for-bit between their holders, including
    /// the payload.
    pub fn assemble(ranks: &[Cmesh]) -> Result<GlobalConnectivity> {
        let dim = ranks.first().map(|c| c.dim).unwrap_or(2);
        let total = ranks
            .first()
            .map(|c| c.offsets.total_trees())
            .unwrap_or(0) as usize;
        let mut trees: Vec<Option<GlobalTree>> = vec![None; total];
        for c in ranks {
            for local in 0..c.n_local() {
                let k = c.global_of_local(local);
                let src = &c.trees[local as usize];
                let mut faces = Vec::with_capacity(src.tree_to_tree.len());
                for f in 0..src.tree_to_tree.len() {
                    faces.push(match c.neighbor_global_index(local, f)? {
                        NeighborRef::Boundary => GlobalFace::Boundary,
                        NeighborRef::Global(id) => GlobalFace::Tree {
                            id,
                            code: src.tree_to_face[f],
                        },
                    });
                }
                let assembled = GlobalTree {
                    class: src.class,
                    faces,
                    data: src.data.clone(),
                };
                match &trees[k as usize] {
                    None => trees[k as usize] = Some(assembled),
                    Some(existing) if *existing == assembled => {}
                    Some(_) => {
                        return Err(CmeshError::DuplicateTree { rank: c.rank, tree: k });
                    }
                }
            }
        }
        let trees = trees
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                t.ok_or(CmeshError::UndeliveredTree {
                    rank: usize::MAX,
                    tree: k as i64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GlobalConnectivity { dim, trees })
    }
}

/// Glue two trees along one face each, writing both directions consistently.
///
/// `xi` / `xi_prime` describe the corner matching as in
/// [`crate::tree::compute_orientation`].
pub fn connect(
    mesh: &mut GlobalConnectivity,
    a: usize,
    face_a: usize,
    b: usize,
    face_b: usize,
    xi: usize,
    xi_prime: usize,
) -> Result<()> {
    let ta = mesh.trees[a].class;
    let tb = mesh.trees[b].class;
    let or = crate::tree::compute_orientation(ta, face_a, tb, face_b, xi, xi_prime)?;
    let f_max = max_faces(mesh.dim);
    debug_assert!(or * f_max + face_a.max(face_b) < 256);
    mesh.trees[a].faces[face_a] = GlobalFace::Tree {
        id: b as i64,
        code: encode_face(or, face_b, mesh.dim)?,
    };
    mesh.trees[b].faces[face_b] = GlobalFace::Tree {
        id: a as i64,
        code: encode_face(or, face_a, mesh.dim)?,
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen;

    #[test]
    fn two_glued_quads_validate() {
        let mut mesh = GlobalConnectivity {
            dim: 2,
            trees: (0..2)
                .map(|k| GlobalTree {
                    class: TreeClass::Quad,
                    faces: vec![GlobalFace::Boundary; 4],
                    data: vec![k as u8],
                })
                .collect(),
        };
        connect(&mut mesh, 0, 1, 1, 0, 0, 0).unwrap();
        assert!(mesh.validate().is_empty());
    }

    #[test]
    fn corrupted_mirror_is_reported() {
        let mut mesh = GlobalConnectivity {
            dim: 2,
            trees: (0..2)
                .map(|_| GlobalTree {
                    class: TreeClass::Quad,
                    faces: vec![GlobalFace::Boundary; 4],
                    data: vec![],
                })
                .collect(),
        };
        connect(&mut mesh, 0, 1, 1, 0, 0, 0).unwrap();
        // corrupt one side's neighbor face
        mesh.trees[1].faces[0] = GlobalFace::Tree {
            id: 0,
            code: encode_face(0, 2, 2).unwrap(),
        };
        // both directions notice the broken mirror
        let report = mesh.validate();
        assert!(!report.is_empty());
        assert!(report.iter().all(|d| d.contains("not mirrored")), "{report:?}");
    }

    #[test]
    fn lone_boundary_quad_validates() {
        let mesh = GlobalConnectivity {
            dim: 2,
            trees: vec![GlobalTree {
                class: TreeClass::Quad,
                faces: vec![GlobalFace::Boundary; 4],
                data: vec![],
            }],
        };
        assert!(mesh.validate().is_empty());
    }

    #[test]
    fn self_connection_same_face_rejected() {
        let mesh = GlobalConnectivity {
            dim: 2,
            trees: vec![GlobalTree {
                class: TreeClass::Quad,
                faces: vec![
                    GlobalFace::Tree {
                        id: 0,
                        code: encode_face(0, 0, 2).unwrap(),
                    },
                    GlobalFace::Boundary,
                    GlobalFace::Boundary,
                    GlobalFace::Boundary,
                ],
                data: vec![],
            }],
        };
        assert_eq!(mesh.validate().len(), 1);
    }

    #[test]
    fn one_tree_periodicity_is_legal() {
        // 2D torus from a single quad: face 0 glued to face 1, face 2 to face 3
        let mut mesh = GlobalConnectivity {
            dim: 2,
            trees: vec![GlobalTree {
                class: TreeClass::Quad,
                faces: vec![GlobalFace::Boundary; 4],
                data: vec![],
            }],
        };
        connect(&mut mesh, 0, 0, 0, 1, 0, 0).unwrap();
        connect(&mut mesh, 0, 2, 0, 3, 0, 0).unwrap();
        assert!(mesh.validate().is_empty(), "{:?}", mesh.validate());
    }

    #[test]
    fn dump_parse_round_trip() {
        let mesh = meshgen::two_triangle_mesh();
        let text = mesh.dump();
        assert!(text.starts_with("cmesh v1 dim=2 K=2\n"));
        let back = GlobalConnectivity::parse(&text).unwrap();
        assert_eq!(back, mesh);
        assert!(GlobalConnectivity::parse("cmesh v2\n").is_err());
        assert!(GlobalConnectivity::parse("cmesh v1 dim=2 K=3\n").is_err());
    }

    #[test]
    fn distribute_then_assemble_is_identity() {
        let mesh = meshgen::three_tree_ring();
        let offsets = OffsetArray::from_entries(vec![0, 1, 3, 3]).unwrap();
        let ranks: Vec<Cmesh> = (0..3)
            .map(|p| mesh.distribute(&offsets, p).unwrap())
            .collect();
        assert_eq!(ranks[0].n_local(), 1);
        assert_eq!(ranks[1].n_local(), 2);
        assert_eq!(ranks[2].n_local(), 0);
        let back = GlobalConnectivity::assemble(&ranks).unwrap();
        assert_eq!(back, mesh);
    }
}
