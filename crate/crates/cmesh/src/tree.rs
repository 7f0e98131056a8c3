//! Tree-type taxonomy and face-connection encoding.
//!
//! A coarse mesh patches together trees of the classes below. Adjacent trees
//! meet along codimension-1 faces, and a connection is stored as the pair
//! (neighbor face, orientation) packed into a single small integer.

use crate::error::{CmeshError, Result};

/// Shape class of a tree root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeClass {
    Point,
    Line,
    Quad,
    Triangle,
    Hex,
    Tet,
    Prism,
    Pyramid,
}

impl TreeClass {
    pub fn dimension(self) -> usize {
        match self {
            TreeClass::Point => 0,
            TreeClass::Line => 1,
            TreeClass::Quad | TreeClass::Triangle => 2,
            TreeClass::Hex | TreeClass::Tet | TreeClass::Prism | TreeClass::Pyramid => 3,
        }
    }

    pub fn num_faces(self) -> usize {
        match self {
            TreeClass::Point => 0,
            TreeClass::Line => 2,
            TreeClass::Quad => 4,
            TreeClass::Triangle => 3,
            TreeClass::Hex => 6,
            TreeClass::Tet => 4,
            TreeClass::Prism => 5,
            TreeClass::Pyramid => 5,
        }
    }

    /// Tree-vertex numbers of a face, ascending.
    ///
    /// Faces of quads and hexes are ordered -x,+x,-y,+y,-z,+z over z-order
    /// vertices; simplex face i is opposite vertex i. Prisms have three quad
    /// faces (opposite the bottom edges) followed by the bottom and top
    /// triangles; pyramids have four triangle faces followed by the quad base.
    pub fn face_corners(self, face: usize) -> Result<&'static [u8]> {
        const QUAD: [&[u8]; 4] = [&[0, 2], &[1, 3], &[0, 1], &[2, 3]];
        const TRIANGLE: [&[u8]; 3] = [&[1, 2], &[0, 2], &[0, 1]];
        const HEX: [&[u8]; 6] = [
            &[0, 2, 4, 6],
            &[1, 3, 5, 7],
            &[0, 1, 4, 5],
            &[2, 3, 6, 7],
            &[0, 1, 2, 3],
            &[4, 5, 6, 7],
        ];
        const TET: [&[u8]; 4] = [&[1, 2, 3], &[0, 2, 3], &[0, 1, 3], &[0, 1, 2]];
        const PRISM: [&[u8]; 5] = [
            &[1, 2, 4, 5],
            &[0, 2, 3, 5],
            &[0, 1, 3, 4],
            &[0, 1, 2],
            &[3, 4, 5],
        ];
        const PYRAMID: [&[u8]; 5] = [&[0, 2, 4], &[1, 3, 4], &[0, 1, 4], &[2, 3, 4], &[0, 1, 2, 3]];
        const LINE: [&[u8]; 2] = [&[0], &[1]];

        let table: &[&'static [u8]] = match self {
            TreeClass::Point => &[],
            TreeClass::Line => &LINE,
            TreeClass::Quad => &QUAD,
            TreeClass::Triangle => &TRIANGLE,
            TreeClass::Hex => &HEX,
            TreeClass::Tet => &TET,
            TreeClass::Prism => &PRISM,
            TreeClass::Pyramid => &PYRAMID,
        };
        table.get(face).copied().ok_or(CmeshError::FaceOutOfRange {
            face,
            what: "face_corners",
        })
    }

    pub fn face_corner_count(self, face: usize) -> Result<usize> {
        Ok(self.face_corners(face)?.len())
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(TreeClass::Point),
            "line" => Ok(TreeClass::Line),
            "quad" => Ok(TreeClass::Quad),
            "triangle" => Ok(TreeClass::Triangle),
            "hex" => Ok(TreeClass::Hex),
            "tet" => Ok(TreeClass::Tet),
            "prism" => Ok(TreeClass::Prism),
            "pyramid" => Ok(TreeClass::Pyramid),
            other => Err(CmeshError::Parse(format!("unknown tree class {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TreeClass::Point => "point",
            TreeClass::Line => "line",
            TreeClass::Quad => "quad",
            TreeClass::Triangle => "triangle",
            TreeClass::Hex => "hex",
            TreeClass::Tet => "tet",
            TreeClass::Prism => "prism",
            TreeClass::Pyramid => "pyramid",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            TreeClass::Point => 0,
            TreeClass::Line => 1,
            TreeClass::Quad => 2,
            TreeClass::Triangle => 3,
            TreeClass::Hex => 4,
            TreeClass::Tet => 5,
            TreeClass::Prism => 6,
            TreeClass::Pyramid => 7,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => TreeClass::Point,
            1 => TreeClass::Line,
            2 => TreeClass::Quad,
            3 => TreeClass::Triangle,
            4 => TreeClass::Hex,
            5 => TreeClass::Tet,
            6 => TreeClass::Prism,
            7 => TreeClass::Pyramid,
            other => return Err(CmeshError::Parse(format!("unknown class code {other}"))),
        })
    }
}

/// Maximal face count over all tree classes of a dimension.
pub fn max_faces(dim: usize) -> usize {
    match dim {
        0 => 1,
        1 => 2,
        2 => 4,
        _ => 6,
    }
}

/// Semiorder on tree classes: hex < prism < pyramid and tet < prism.
///
/// Classes of the same type and 2D classes are incomparable; the face number
/// breaks those ties in [`compute_orientation`].
fn semiorder_less(t: TreeClass, other: TreeClass) -> bool {
    use TreeClass::*;
    matches!(
        (t, other),
        (Hex, Prism) | (Hex, Pyramid) | (Tet, Prism) | (Tet, Pyramid) | (Prism, Pyramid)
    )
}

/// Packed face connection: `or * F + f_neighbor` with `F = max_faces(dim)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaceCode {
    value: u8,
    dim: u8,
}

impl FaceCode {
    pub fn new(value: u8, dim: usize) -> Self {
        FaceCode {
            value,
            dim: dim as u8,
        }
    }

    pub fn value(self) -> u8 {
        self.value
    }

    pub fn orientation(self) -> usize {
        self.value as usize / max_faces(self.dim as usize)
    }

    pub fn neighbor_face(self) -> usize {
        self.value as usize % max_faces(self.dim as usize)
    }

    pub fn dim(self) -> usize {
        self.dim as usize
    }
}

/// Pack an orientation and neighbor face number into a [`FaceCode`].
pub fn encode_face(orientation: usize, f_neighbor: usize, dim: usize) -> Result<FaceCode> {
    let f_max = max_faces(dim);
    if f_neighbor >= f_max {
        return Err(CmeshError::FaceCodeRange(f_neighbor, f_max));
    }
    Ok(FaceCode::new((orientation * f_max + f_neighbor) as u8, dim))
}

/// Unpack a [`FaceCode`] into (orientation, neighbor face).
pub fn decode_face(code: FaceCode) -> (usize, usize) {
    (code.orientation(), code.neighbor_face())
}

/// Orientation of a face connection between trees of classes `t` and `t_prime`
/// meeting at faces `f` and `f_prime`.
///
/// `xi` is the face corner of `f_prime` matching corner 0 of `f` and
/// `xi_prime` the face corner of `f` matching corner 0 of `f_prime`. The
/// result is `xi` when `t` comes first (semiorder, then face number) and
/// `xi_prime` otherwise, so evaluation from either side agrees.
pub fn compute_orientation(
    t: TreeClass,
    f: usize,
    t_prime: TreeClass,
    f_prime: usize,
    xi: usize,
    xi_prime: usize,
) -> Result<usize> {
    let n = t.face_corner_count(f)?;
    let n_prime = t_prime.face_corner_count(f_prime)?;
    if n != n_prime {
        return Err(CmeshError::FaceMismatch(n, n_prime));
    }
    if semiorder_less(t, t_prime) || (t == t_prime && f <= f_prime) {
        Ok(xi)
    } else {
        Ok(xi_prime)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn face_counts_per_class() {
        assert_eq!(TreeClass::Line.num_faces(), 2);
        assert_eq!(TreeClass::Quad.num_faces(), 4);
        assert_eq!(TreeClass::Triangle.num_faces(), 3);
        assert_eq!(TreeClass::Hex.num_faces(), 6);
        assert_eq!(TreeClass::Tet.num_faces(), 4);
        assert_eq!(TreeClass::Prism.num_faces(), 5);
        assert_eq!(TreeClass::Pyramid.num_faces(), 5);
        for c in [
            TreeClass::Quad,
            TreeClass::Triangle,
            TreeClass::Hex,
            TreeClass::Tet,
            TreeClass::Prism,
            TreeClass::Pyramid,
        ] {
            for f in 0..c.num_faces() {
                assert!(c.face_corner_count(f).unwrap() >= 2);
            }
            assert!(c.face_corners(c.num_faces()).is_err());
        }
    }

    #[test]
    fn encode_face_examples() {
        assert_eq!(encode_face(0, 3, 3).unwrap().value(), 3);
        assert_eq!(encode_face(2, 1, 3).unwrap().value(), 13);
        assert_eq!(encode_face(3, 2, 2).unwrap().value(), 14);
        assert!(encode_face(0, 6, 3).is_err());
        assert!(encode_face(0, 4, 2).is_err());
    }

    #[test]
    fn orientation_examples() {
        // same class, f <= f' picks xi
        assert_eq!(
            compute_orientation(TreeClass::Quad, 0, TreeClass::Quad, 2, 1, 0).unwrap(),
            1
        );
        // f > f' picks xi'
        assert_eq!(
            compute_orientation(TreeClass::Hex, 3, TreeClass::Hex, 1, 0, 2).unwrap(),
            2
        );
        // hex < prism regardless of face numbers
        assert_eq!(
            compute_orientation(TreeClass::Hex, 5, TreeClass::Prism, 0, 3, 1).unwrap(),
            3
        );
    }

    #[test]
    fn orientation_rejects_corner_mismatch() {
        // hex face (4 corners) against a prism triangle face (3 corners)
        let err = compute_orientation(TreeClass::Hex, 0, TreeClass::Prism, 3, 0, 0);
        assert!(matches!(err, Err(CmeshError::FaceMismatch(4, 3))));
    }

    /// All compatible face pairs of the classes that can meet.
    fn compatible_pairs() -> Vec<(TreeClass, usize, TreeClass, usize)> {
        use TreeClass::*;
        let classes = [Line, Quad, Triangle, Hex, Tet, Prism, Pyramid];
        let mut out = Vec::new();
        for &a in &classes {
            for &b in &classes {
                if a.dimension() != b.dimension() {
                    continue;
                }
                for fa in 0..a.num_faces() {
                    for fb in 0..b.num_faces() {
                        if a.face_corner_count(fa).unwrap() == b.face_corner_count(fb).unwrap() {
                            out.push((a, fa, b, fb));
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn orientation_side_independent() {
        // Corner matchings come from the reflection family m(x) = (r - x) mod n,
        // which yields exactly the 2/3/4 line/triangle/quad orientations and is
        // involutive, so xi and xi' are well defined from either side.
        for (a, fa, b, fb) in compatible_pairs() {
            let n = a.face_corner_count(fa).unwrap();
            for r in 0..n {
                let xi = r; // m(0)
                let xi_prime = r; // m^{-1}(0) for a reflection
                let from_a = compute_orientation(a, fa, b, fb, xi, xi_prime).unwrap();
                let from_b = compute_orientation(b, fb, a, fa, xi_prime, xi).unwrap();
                assert_eq!(from_a, from_b, "{a:?} f{fa} vs {b:?} f{fb} r={r}");
            }
        }
    }

    proptest! {
        #[test]
        fn face_code_round_trip(or in 0usize..6, f in 0usize..6, dim in 2usize..4) {
            prop_assume!(f < max_faces(dim));
            prop_assume!(or * max_faces(dim) + f < 256);
            let code = encode_face(or, f, dim).unwrap();
            prop_assert_eq!(decode_face(code), (or, f));
        }
    }
}
