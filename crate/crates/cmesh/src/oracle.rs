//! Brute-force reference implementations and randomized input generators.
//!
//! Everything here favors directness over speed: the send table is built by
//! scanning every (tree, destination) pair against the ownership rule, and the
//! generators produce arbitrary valid partitions by cutting random forests.
//! The optimized code paths are tested against these, never the other way
//! around.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::forest::{partition_from_leaf_cuts, ForestSummary};
use crate::cmesh::GlobalFace;
use crate::global::{connect, GlobalConnectivity, GlobalTree};
use crate::offsets::OffsetArray;
use crate::tree::TreeClass;

/// table[p][q] = global trees p sends to q, ascending (self transfers
/// included).
pub struct SendTable {
    table: Vec<Vec<Vec<i64>>>,
}

impl SendTable {
    /// Enumerate the ownership rule directly: for every new local tree of
    /// every rank, the mover is the rank itself when it already holds the
    /// tree, otherwise the smallest old owner found by linear scan.
    pub fn build(o_old: &OffsetArray, o_new: &OffsetArray) -> Result<SendTable> {
        let p_count = o_old.num_ranks();
        let mut table = vec![vec![Vec::new(); p_count]; p_count];
        for q in 0..p_count {
            if o_new.is_empty_rank(q)? {
                continue;
            }
            for k in o_new.first_tree(q)?..=o_new.last_tree(q)? {
                let sender = if o_old.owns(q, k) {
                    q
                } else {
                    (0..p_count)
                        .find(|&r| o_old.owns(r, k))
                        .expect("every tree has an old owner")
                };
                table[sender][q].push(k);
            }
        }
        Ok(SendTable { table })
    }

    pub fn trees(&self, p: usize, q: usize) -> &Vec<i64> {
        &self.table[p][q]
    }

    pub fn s_set(&self, p: usize) -> Vec<usize> {
        (0..self.table.len())
            .filter(|&q| !self.table[p][q].is_empty())
            .collect()
    }

    pub fn r_set(&self, p: usize) -> Vec<usize> {
        (0..self.table.len())
            .filter(|&q| !self.table[q][p].is_empty())
            .collect()
    }

    /// Wire traffic only: (trees, per-destination messages) with self
    /// transfers excluded.
    pub fn wire_counts(&self) -> (usize, usize) {
        let mut trees = 0;
        let mut messages = 0;
        for p in 0..self.table.len() {
            for q in 0..self.table.len() {
                if p != q && !self.table[p][q].is_empty() {
                    trees += self.table[p][q].len();
                    messages += 1;
                }
            }
        }
        (trees, messages)
    }
}

/// Ghost ids of rank `p` under `offsets`, straight from the definition:
/// nonlocal trees face-adjacent to a local tree.
pub fn ghost_set(
    global: &GlobalConnectivity,
    offsets: &OffsetArray,
    p: usize,
) -> Result<Vec<i64>> {
    crate::ghost::ghost_ids(global, offsets, p)
}

/// Random valid partition of `num_trees` trees over `num_ranks` ranks: cut a
/// random forest at random leaf positions. Covers empty ranks and shared
/// first trees.
pub fn random_partition(
    num_trees: usize,
    num_ranks: usize,
    rng: &mut impl Rng,
) -> OffsetArray {
    let counts: Vec<u64> = (0..num_trees).map(|_| rng.gen_range(1..=5)).collect();
    let forest = ForestSummary::unweighted(counts);
    random_cut_of(&forest, num_ranks, rng)
}

fn random_cut_of(forest: &ForestSummary, num_ranks: usize, rng: &mut impl Rng) -> OffsetArray {
    let n = forest.total_leaves();
    let mut cuts: Vec<u64> = (0..num_ranks - 1).map(|_| rng.gen_range(0..=n)).collect();
    cuts.push(0);
    cuts.push(n);
    cuts.sort_unstable();
    partition_from_leaf_cuts(forest, &cuts).expect("random cuts are monotone")
}

/// A pair of valid partitions of the same mesh over the same rank count,
/// with sizes drawn from the seed. Used as (old, new) repartition inputs.
pub fn random_partition_pair(
    max_trees: usize,
    max_ranks: usize,
    seed: u64,
) -> (OffsetArray, OffsetArray) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_trees = rng.gen_range(1..=max_trees);
    let num_ranks = rng.gen_range(1..=max_ranks);
    let counts: Vec<u64> = (0..num_trees).map(|_| rng.gen_range(1..=5)).collect();
    let forest = ForestSummary::unweighted(counts);
    let old = random_cut_of(&forest, num_ranks, &mut rng);
    let new = random_cut_of(&forest, num_ranks, &mut rng);
    (old, new)
}

/// Random quad connectivity: `num_trees` squares with a random subset of face
/// pairs glued (self-gluing through two different faces allowed, giving
/// periodic identifications). Valid by construction.
pub fn random_quad_connectivity(num_trees: usize, rng: &mut impl Rng) -> GlobalConnectivity {
    let mut mesh = GlobalConnectivity {
        dim: 2,
        trees: (0..num_trees)
            .map(|k| GlobalTree {
                class: TreeClass::Quad,
                faces: vec![GlobalFace::Boundary; 4],
                data: vec![(k % 251) as u8, (k / 251) as u8],
            })
            .collect(),
    };
    let mut slots: Vec<(usize, usize)> = (0..num_trees)
        .flat_map(|k| (0..4).map(move |f| (k, f)))
        .collect();
    slots.shuffle(rng);
    while slots.len() >= 2 {
        let (a, fa) = slots.pop().unwrap();
        let (b, fb) = slots.pop().unwrap();
        if a == b && fa == fb {
            continue;
        }
        if rng.gen_bool(0.7) {
            // reflection matching: corner r of each side matches corner 0 of
            // the other, well defined from either side
            let r = rng.gen_range(0..2);
            connect(&mut mesh, a, fa, b, fb, r, r).expect("quad faces align");
        }
    }
    debug_assert!(mesh.validate().is_empty());
    mesh
}

/// Random quad connectivity plus matching-size partition pair, all from one
/// seed. The workhorse input for end-to-end repartition fuzzing.
pub fn random_scenario(
    max_trees: usize,
    max_ranks: usize,
    seed: u64,
) -> (GlobalConnectivity, OffsetArray, OffsetArray) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_trees = rng.gen_range(1..=max_trees);
    let num_ranks = rng.gen_range(1..=max_ranks);
    let mesh = random_quad_connectivity(num_trees, &mut rng);
    let counts: Vec<u64> = (0..num_trees).map(|_| rng.gen_range(1..=5)).collect();
    let forest = ForestSummary::unweighted(counts);
    let old = random_cut_of(&forest, num_ranks, &mut rng);
    let new = random_cut_of(&forest, num_ranks, &mut rng);
    (mesh, old, new)
}

/// Extend a scenario with another valid partition of the same mesh, for
/// composition chains.
pub fn random_partition_like(model: &OffsetArray, rng: &mut impl Rng) -> OffsetArray {
    let num_trees = model.total_trees() as usize;
    let counts: Vec<u64> = (0..num_trees).map(|_| rng.gen_range(1..=5)).collect();
    let forest = ForestSummary::unweighted(counts);
    random_cut_of(&forest, model.num_ranks(), rng)
}
