//! Deterministic multi-rank execution harness.
//!
//! Each simulated rank owns its mesh slice exclusively; all cross-rank data
//! moves through [`RankMessage`] mailboxes. A step is two barrier-separated
//! phases (send, receive), both rank-parallel; mailboxes are sorted by sender
//! before delivery, so results do not depend on scheduling.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cmesh::Cmesh;
use crate::error::{CmeshError, Result};
use crate::exec::{self, RankMessage};
use crate::ghost;
use crate::global::GlobalConnectivity;
use crate::offsets::OffsetArray;
use crate::pattern;

/// All simulated ranks of one distributed mesh.
#[derive(Debug, Clone)]
pub struct World {
    pub dim: usize,
    pub offsets: OffsetArray,
    pub ranks: Vec<Cmesh>,
    pub step: u64,
}

impl World {
    /// Distribute a global mesh over `offsets.num_ranks()` simulated ranks.
    pub fn from_global(global: &GlobalConnectivity, offsets: &OffsetArray) -> Result<World> {
        let diags = offsets.validate();
        if !diags.is_empty() {
            return Err(CmeshError::InvalidOffsets(diags.join("; ")));
        }
        if offsets.total_trees() != global.num_trees() {
            return Err(CmeshError::TreeCountMismatch(
                offsets.total_trees(),
                global.num_trees(),
            ));
        }
        let ranks = (0..offsets.num_ranks())
            .into_par_iter()
            .map(|p| {
                global
                    .distribute(offsets, p)
                    .map_err(|e| CmeshError::AtRank {
                        rank: p,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(World {
            dim: global.dim,
            offsets: offsets.clone(),
            ranks,
            step: 0,
        })
    }

    pub fn num_ranks(&self) -> usize {
        self.ranks.len()
    }
}

/// Wire traffic of one rank in one step (self transfers excluded).
#[derive(Debug, Clone, Serialize)]
pub struct RankStats {
    pub rank: usize,
    pub trees_sent: u64,
    pub ghosts_sent: u64,
    pub bytes_sent: u64,
    pub s_size: usize,
}

/// Aggregate of one repartition step.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionStats {
    pub per_rank: Vec<RankStats>,
    pub wire_messages: u64,
    pub trees_over_wire: u64,
    pub ghosts_over_wire: u64,
    pub bytes_over_wire: u64,
    /// Distinct trees shared by more than one rank in the new partition.
    pub shared_tree_count: u64,
    pub total_trees: i64,
    pub wall_time_secs: f64,
}

impl PartitionStats {
    /// `rank,trees_sent,ghosts_sent,bytes,S_size` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,trees_sent,ghosts_sent,bytes,S_size\n");
        for r in &self.per_rank {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.rank, r.trees_sent, r.ghosts_sent, r.bytes_sent, r.s_size
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Distinct trees whose ownership spans more than one rank: one per negative
/// interior entry, counting each tree once.
pub fn shared_tree_count(offsets: &OffsetArray) -> u64 {
    let mut count = 0;
    let mut last_counted = i64::MIN;
    for p in 1..offsets.num_ranks() {
        if offsets.first_shared(p).unwrap_or(false) {
            let k = offsets.first_tree(p).unwrap_or(i64::MIN);
            if k != last_counted {
                count += 1;
                last_counted = k;
            }
        }
    }
    count
}

/// One barrier-synchronized repartition step over all ranks.
pub fn run_repartition(world: &World, o_new: &OffsetArray) -> Result<(World, PartitionStats)> {
    let start = Instant::now();
    let diags = o_new.validate();
    if !diags.is_empty() {
        return Err(CmeshError::InvalidOffsets(diags.join("; ")));
    }
    if o_new.total_trees() != world.offsets.total_trees() {
        return Err(CmeshError::TreeCountMismatch(
            world.offsets.total_trees(),
            o_new.total_trees(),
        ));
    }

    let outboxes: Vec<Vec<RankMessage>> = world
        .ranks
        .par_iter()
        .map(|c| {
            exec::sending_phase(c, o_new).map_err(|e| CmeshError::AtRank {
                rank: c.rank,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_rank: Vec<RankStats> = outboxes
        .par_iter()
        .enumerate()
        .map(|(p, msgs)| {
            let mut stats = RankStats {
                rank: p,
                trees_sent: 0,
                ghosts_sent: 0,
                bytes_sent: 0,
                s_size: msgs.len(),
            };
            for m in msgs {
                if m.to != m.from {
                    stats.trees_sent += m.trees.len() as u64;
                    stats.ghosts_sent += m.ghosts.len() as u64;
                    stats.bytes_sent += m.byte_length() as u64;
                }
            }
            stats
        })
        .collect();

    // barrier: all sends complete before any delivery
    let mut mailboxes: Vec<Vec<RankMessage>> = vec![Vec::new(); world.num_ranks()];
    for msgs in outboxes {
        for msg in msgs {
            mailboxes[msg.to].push(msg);
        }
    }
    for mb in &mut mailboxes {
        mb.sort_by_key(|m| m.from);
    }

    let ranks = world
        .ranks
        .par_iter()
        .zip(mailboxes.par_iter())
        .map(|(c, inbox)| {
            exec::receiving_phase(c, o_new, inbox).map_err(|e| CmeshError::AtRank {
                rank: c.rank,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let stats = PartitionStats {
        wire_messages: per_rank
            .iter()
            .map(|r| r.s_size as u64)
            .sum::<u64>()
            .saturating_sub(
                // s_size counts the self transfer; subtract those present
                (0..world.num_ranks())
                    .filter(|&p| {
                        pattern::sends_to(&world.offsets, o_new, p, p).unwrap_or(false)
                    })
                    .count() as u64,
            ),
        trees_over_wire: per_rank.iter().map(|r| r.trees_sent).sum(),
        ghosts_over_wire: per_rank.iter().map(|r| r.ghosts_sent).sum(),
        bytes_over_wire: per_rank.iter().map(|r| r.bytes_sent).sum(),
        shared_tree_count: shared_tree_count(o_new),
        total_trees: o_new.total_trees(),
        per_rank,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((
        World {
            dim: world.dim,
            offsets: o_new.clone(),
            ranks,
            step: world.step + 1,
        },
        stats,
    ))
}

/// Outcome of a whole-world consistency check.
#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub diffs: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Reassemble the world and diff it against the reference mesh; also rebuild
/// every rank's ghost set from the definition and compare.
pub fn verify_world(world: &World, reference: &GlobalConnectivity) -> VerifyReport {
    let mut report = VerifyReport::default();
    let diags = world.offsets.validate();
    if !diags.is_empty() {
        report.diffs.extend(diags);
        return report;
    }
    match GlobalConnectivity::assemble(&world.ranks) {
        Err(e) => report.diffs.push(format!("assembly failed: {e}")),
        Ok(assembled) => {
            if assembled.dim != reference.dim {
                report
                    .diffs
                    .push(format!("dim {} != reference {}", assembled.dim, reference.dim));
            }
            if assembled.num_trees() != reference.num_trees() {
                report.diffs.push(format!(
                    "tree count {} != reference {}",
                    assembled.num_trees(),
                    reference.num_trees()
                ));
            } else {
                for (k, (got, want)) in assembled
                    .trees
                    .iter()
                    .zip(reference.trees.iter())
                    .enumerate()
                {
                    if got != want {
                        report.diffs.push(format!("tree {k} differs from reference"));
                    }
                }
            }
        }
    }
    for c in &world.ranks {
        let want = match ghost::ghost_ids(reference, &world.offsets, c.rank) {
            Ok(w) => w,
            Err(e) => {
                report
                    .diffs
                    .push(format!("rank {}: ghost oracle failed: {e}", c.rank));
                continue;
            }
        };
        let mut got: Vec<i64> = c.ghosts.iter().map(|g| g.id).collect();
        got.sort_unstable();
        if got != want {
            let missing: Vec<i64> = want.iter().filter(|g| !got.contains(g)).copied().collect();
            let extra: Vec<i64> = got.iter().filter(|g| !want.contains(g)).copied().collect();
            report.diffs.push(format!(
                "rank {}: ghost set mismatch, missing {missing:?}, extra {extra:?}",
                c.rank
            ));
        }
    }
    report
}

/// Write every wire message of one step into `dir`, one file per message.
pub fn dump_messages(outboxes: &[Vec<RankMessage>], dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for msgs in outboxes {
        for msg in msgs {
            if msg.from == msg.to {
                continue;
            }
            let path = dir.join(format!("msg_{:05}_to_{:05}.bin", msg.from, msg.to));
            std::fs::write(path, msg.to_bytes())?;
        }
    }
    Ok(())
}

/// Sending phase only, for message inspection and `--dump-messages`.
pub fn sending_phase_all(world: &World, o_new: &OffsetArray) -> Result<Vec<Vec<RankMessage>>> {
    world
        .ranks
        .par_iter()
        .map(|c| {
            exec::sending_phase(c, o_new).map_err(|e| CmeshError::AtRank {
                rank: c.rank,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen;
    use crate::oracle;

    fn o(v: &[i64]) -> OffsetArray {
        OffsetArray::from_entries(v.to_vec()).unwrap()
    }

    #[test]
    fn worked_example_stats() {
        let mesh = oracle::random_quad_connectivity(
            5,
            &mut rand::rngs::mock::StepRng::new(3, 17),
        );
        let old = o(&[0, -2, 3, 5]);
        let new = o(&[0, -3, -4, 5]);
        let world = World::from_global(&mesh, &old).unwrap();
        let (moved, stats) = run_repartition(&world, &new).unwrap();
        assert_eq!(stats.wire_messages, 2);
        assert_eq!(stats.trees_over_wire, 2);
        assert_eq!(moved.step, 1);
        assert!(verify_world(&moved, &mesh).is_ok());
    }

    #[test]
    fn identity_step_moves_no_bytes() {
        let mesh = meshgen::three_tree_ring();
        let old = o(&[0, -1, 2, 3]);
        let world = World::from_global(&mesh, &old).unwrap();
        let (moved, stats) = run_repartition(&world, &old).unwrap();
        assert_eq!(stats.bytes_over_wire, 0);
        assert_eq!(stats.wire_messages, 0);
        assert!(verify_world(&moved, &mesh).is_ok());
    }

    #[test]
    fn ring_scenario_shared_count_and_ghosts() {
        let mesh = meshgen::three_tree_ring();
        let old = o(&[0, 1, 3, 3]);
        let new = o(&[0, -1, 2, 3]);
        let world = World::from_global(&mesh, &old).unwrap();
        let (moved, stats) = run_repartition(&world, &new).unwrap();
        assert_eq!(stats.shared_tree_count, 1);
        assert_eq!(stats.ghosts_over_wire, 2);
        assert!(verify_world(&moved, &mesh).is_ok());
    }

    #[test]
    fn verify_flags_dropped_ghost() {
        let mesh = meshgen::three_tree_ring();
        let offsets = o(&[0, 1, 3, 3]);
        let mut world = World::from_global(&mesh, &offsets).unwrap();
        world.ranks[0].ghosts.pop();
        let report = verify_world(&world, &mesh);
        assert!(!report.is_ok());
        assert!(report.diffs.iter().any(|d| d.contains("missing [2]")), "{report:?}");
    }

    #[test]
    fn stats_output_formats() {
        let mesh = meshgen::three_tree_ring();
        let old = o(&[0, 1, 3, 3]);
        let world = World::from_global(&mesh, &old).unwrap();
        let (_, stats) = run_repartition(&world, &o(&[0, -1, 2, 3])).unwrap();
        let csv = stats.to_csv();
        assert!(csv.starts_with("rank,trees_sent,ghosts_sent,bytes,S_size\n"));
        assert_eq!(csv.lines().count(), 4);
        let json: serde_json::Value = serde_json::from_str(&stats.to_json()).unwrap();
        assert_eq!(json["shared_tree_count"], 1);
    }

    #[test]
    fn determinism_across_runs() {
        let (mesh, old, new) = oracle::random_scenario(40, 8, 1234);
        let world = World::from_global(&mesh, &old).unwrap();
        let (a, sa) = run_repartition(&world, &new).unwrap();
        let (b, sb) = run_repartition(&world, &new).unwrap();
        assert_eq!(a.ranks, b.ranks);
        assert_eq!(sa.bytes_over_wire, sb.bytes_over_wire);
        assert_eq!(sa.to_csv(), sb.to_csv());
    }

    #[test]
    fn chained_random_steps_stay_verified() {
        use rand::SeedableRng;
        let (mesh, old, _) = oracle::random_scenario(30, 6, 77);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(78);
        let mut world = World::from_global(&mesh, &old).unwrap();
        for _ in 0..10 {
            let next = oracle::random_partition_like(&world.offsets, &mut rng);
            let (moved, _) = run_repartition(&world, &next).unwrap();
            world = moved;
            let report = verify_world(&world, &mesh);
            assert!(report.is_ok(), "{:?}", report.diffs);
        }
    }
}
