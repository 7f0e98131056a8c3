use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cmesh::forest::{partition_from_forest, synthetic_band_forest, ForestSummary};
use cmesh::global::GlobalConnectivity;
use cmesh::meshgen::{brick_connectivity, brick_offsets, shift_partition, three_tree_ring, two_triangle_mesh, BrickSpec};
use cmesh::offsets::OffsetArray;
use cmesh::oracle;
use cmesh::pattern;
use cmesh::sim::{self, World};

#[derive(Parser)]
#[command(
    name = "cmesh",
    about = "Distributed coarse-mesh partitioning over simulated ranks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct MeshSource {
    /// Per-rank brick dimensions, e.g. 10x18x8 (3D) or 4x4 (2D)
    #[arg(long)]
    brick: Option<String>,
    /// Glue brick blocks along x instead of leaving them disjoint
    #[arg(long, default_value_t = false)]
    connected: bool,
    /// Built-in mesh: two-triangle | three-ring
    #[arg(long)]
    preset: Option<String>,
    /// Read a `cmesh v1` dump instead of generating
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh and print its dump
    Generate {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, default_value_t = 1)]
        ranks: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a partition offset array and print it
    Partition {
        #[arg(long)]
        ranks: usize,
        /// Forest leaf counts: `K=<n>` (uniform) or comma-separated counts
        #[arg(long)]
        forest: Option<String>,
        /// Shift fraction applied to --offsets
        #[arg(long)]
        shift: Option<f64>,
        /// Offsets line, e.g. "offsets P=3 K=5 : 0 -2 3 5"
        #[arg(long)]
        offsets: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print S_p, R_p, and send ranges for an (old, new) partition pair
    Pattern {
        #[arg(long)]
        old: String,
        #[arg(long)]
        new: String,
        /// Restrict output to one rank
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Print the wire-level tree and ghost plan for a repartition
    Ghosts {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long)]
        old: String,
        #[arg(long)]
        new: String,
    },
    /// Run repartition steps and report statistics
    Bench {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long)]
        ranks: usize,
        /// Tail fraction shifted to the next rank each step
        #[arg(long)]
        shift: Option<f64>,
        /// Forest spec for forest-driven partitions (`K=<n>` or counts)
        #[arg(long)]
        forest: Option<String>,
        /// Move a refined band across the forest between steps
        #[arg(long, default_value_t = false)]
        band: bool,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write wire messages of each step into this directory
        #[arg(long)]
        dump_messages: Option<PathBuf>,
        /// Write <out>.csv and <out>.json stats files
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run consistency checks; exit 0 iff everything passes
    Verify {
        /// Validate a `cmesh v1` dump file
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Fuzz this many random repartition scenarios against the oracle
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Errors that should exit with the usage code rather than the failure code.
struct UsageError(String);

fn parse_brick(s: &str, ranks: usize, connected: bool) -> Result<BrickSpec, UsageError> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| UsageError(format!("bad --brick {s:?}: {e}")))?;
    let (nx, ny, nz, dim) = match dims.as_slice() {
        [nx, ny] => (*nx, *ny, 1, 2),
        [nx, ny, nz] => (*nx, *ny, *nz, 3),
        _ => return Err(UsageError(format!("--brick wants NXxNY or NXxNYxNZ, got {s:?}"))),
    };
    Ok(BrickSpec {
        nx,
        ny,
        nz,
        ranks,
        dim,
        connected,
    })
}

fn load_mesh(source: &MeshSource, ranks: usize) -> Result<GlobalConnectivity, UsageError> {
    if let Some(path) = &source.mesh {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        return GlobalConnectivity::parse(&text)
            .map_err(|e| UsageError(format!("cannot parse {}: {e}", path.display())));
    }
    if let Some(name) = &source.preset {
        return match name.as_str() {
            "two-triangle" => Ok(two_triangle_mesh()),
            "three-ring" => Ok(three_tree_ring()),
            other => Err(UsageError(format!("unknown preset {other:?}"))),
        };
    }
    if let Some(brick) = &source.brick {
        let spec = parse_brick(brick, ranks, source.connected)?;
        return brick_connectivity(&spec).map_err(|e| UsageError(e.to_string()));
    }
    Err(UsageError(
        "need a mesh source: --brick, --preset, or --mesh".into(),
    ))
}

fn parse_forest(spec: &str) -> Result<ForestSummary, UsageError> {
    if let Some(k) = spec.strip_prefix("K=") {
        let k: usize = k
            .parse()
            .map_err(|e| UsageError(format!("bad forest spec {spec:?}: {e}")))?;
        return Ok(ForestSummary::unweighted(vec![1; k]));
    }
    let counts: Vec<u64> = spec
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|e| UsageError(format!("bad forest spec {spec:?}: {e}")))?;
    Ok(ForestSummary::unweighted(counts))
}

fn parse_offsets_line(s: &str) -> Result<OffsetArray, UsageError> {
    OffsetArray::from_line(s).map_err(|e| UsageError(format!("bad offsets {s:?}: {e}")))
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<(), UsageError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| UsageError(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Ok(true): all checks passed. Ok(false): a verification failed (exit 1).
/// Err: usage problem (exit 2).
fn run(cli: Cli) -> Result<bool, UsageError> {
    match cli.command {
        Command::Generate { source, ranks, out } => {
            let mesh = load_mesh(&source, ranks)?;
            let report = mesh.validate();
            if !report.is_empty() {
                for d in report {
                    eprintln!("invalid mesh: {d}");
                }
                return Ok(false);
            }
            write_or_print(&out, &mesh.dump())?;
            Ok(true)
        }
        Command::Partition {
            ranks,
            forest,
            shift,
            offsets,
            out,
        } => {
            let result = match (forest, shift, offsets) {
                (Some(f), None, None) => {
                    let forest = parse_forest(&f)?;
                    partition_from_forest(&forest, ranks)
                        .map_err(|e| UsageError(e.to_string()))?
                }
                (None, Some(frac), Some(line)) => {
                    let o = parse_offsets_line(&line)?;
                    shift_partition(&o, frac).map_err(|e| UsageError(e.to_string()))?
                }
                (None, None, Some(line)) => parse_offsets_line(&line)?,
                _ => {
                    return Err(UsageError(
                        "need exactly one partition source: --forest, or --offsets (optionally with --shift)".into(),
                    ))
                }
            };
            let diags = result.validate();
            if !diags.is_empty() {
                for d in diags {
                    eprintln!("invalid partition: {d}");
                }
                return Ok(false);
            }
            write_or_print(&out, &format!("{}\n", result.to_line()))?;
            Ok(true)
        }
        Command::Pattern { old, new, rank } => {
            let o_old = parse_offsets_line(&old)?;
            let o_new = parse_offsets_line(&new)?;
            if o_old.num_ranks() != o_new.num_ranks() || o_old.total_trees() != o_new.total_trees()
            {
                return Err(UsageError(
                    "old and new partitions must cover the same trees and ranks".into(),
                ));
            }
            let ranks: Vec<usize> = match rank {
                Some(p) if p < o_old.num_ranks() => vec![p],
                Some(p) => {
                    return Err(UsageError(format!(
                        "rank {p} out of range ({} ranks)",
                        o_old.num_ranks()
                    )))
                }
                None => (0..o_old.num_ranks()).collect(),
            };
            for p in ranks {
                let pat = pattern::compute_pattern(&o_old, &o_new, p)
                    .map_err(|e| UsageError(e.to_string()))?;
                println!("S_{p} = {:?}  R_{p} = {:?}", pat.senders_to, pat.receive_from);
                for (q, lo, hi) in pat.send_ranges {
                    println!("  {p} -> {q} : trees [{lo}..{hi}]");
                }
            }
            Ok(true)
        }
        Command::Ghosts { source, old, new } => {
            let o_old = parse_offsets_line(&old)?;
            let o_new = parse_offsets_line(&new)?;
            let mesh = load_mesh(&source, o_old.num_ranks())?;
            if mesh.num_trees() != o_old.total_trees() {
                return Err(UsageError(format!(
                    "mesh has {} trees but offsets cover {}",
                    mesh.num_trees(),
                    o_old.total_trees()
                )));
            }
            let world = World::from_global(&mesh, &o_old).map_err(|e| UsageError(e.to_string()))?;
            let outboxes =
                sim::sending_phase_all(&world, &o_new).map_err(|e| UsageError(e.to_string()))?;
            for msgs in &outboxes {
                for msg in msgs {
                    if msg.from == msg.to {
                        continue;
                    }
                    let trees: Vec<i64> = msg.trees.iter().map(|t| t.id).collect();
                    let ghosts: Vec<i64> = msg.ghosts.iter().map(|g| g.id).collect();
                    println!(
                        "{} -> {} : trees {:?} ghosts {:?}",
                        msg.from, msg.to, trees, ghosts
                    );
                }
            }
            Ok(true)
        }
        Command::Bench {
            source,
            ranks,
            shift,
            forest,
            band,
            steps,
            seed,
            dump_messages,
            out,
        } => {
            let _ = seed; // reserved for randomized partition sources
            let (mesh, o_first) = if let Some(fspec) = &forest {
                let f = parse_forest(fspec)?;
                let k = f.num_trees();
                let spec = BrickSpec {
                    nx: k.max(1),
                    ny: 1,
                    nz: 1,
                    ranks: 1,
                    dim: 2,
                    connected: false,
                };
                let mesh = brick_connectivity(&spec).map_err(|e| UsageError(e.to_string()))?;
                let o = partition_from_forest(&f, ranks).map_err(|e| UsageError(e.to_string()))?;
                (mesh, o)
            } else {
                let brick = source
                    .brick
                    .as_deref()
                    .ok_or_else(|| UsageError("bench needs --brick or --forest".into()))?;
                let spec = parse_brick(brick, ranks, source.connected)?;
                let mesh = brick_connectivity(&spec).map_err(|e| UsageError(e.to_string()))?;
                let o = brick_offsets(&spec).map_err(|e| UsageError(e.to_string()))?;
                (mesh, o)
            };
            let k_total = mesh.num_trees();
            let mut world =
                World::from_global(&mesh, &o_first).map_err(|e| UsageError(e.to_string()))?;
            let started = std::time::Instant::now();
            let mut all_ok = true;
            let mut last_stats = None;
            for step in 0..steps.max(1) {
                let o_next = if band {
                    let k = k_total as usize;
                    let width = (k / 8).max(1);
                    let start = (step * width) % k.max(1);
                    let refined: HashSet<usize> = (0..width).map(|i| (start + i) % k).collect();
                    let f = synthetic_band_forest(k, 1, &refined, 2)
                        .map_err(|e| UsageError(e.to_string()))?;
                    partition_from_forest(&f, ranks).map_err(|e| UsageError(e.to_string()))?
                } else {
                    let frac = shift
                        .ok_or_else(|| UsageError("bench needs --shift or --band".into()))?;
                    shift_partition(&world.offsets, frac).map_err(|e| UsageError(e.to_string()))?
                };
                if let Some(dir) = &dump_messages {
                    let outboxes = sim::sending_phase_all(&world, &o_next)
                        .map_err(|e| UsageError(e.to_string()))?;
                    sim::dump_messages(&outboxes, &dir.join(format!("step{step}")))
                        .map_err(|e| UsageError(e.to_string()))?;
                }
                let (moved, stats) = match sim::run_repartition(&world, &o_next) {
                    Ok(v) => v,
                    Err(e) => {
                        eprintln!("step {step}: repartition failed: {e}");
                        return Ok(false);
                    }
                };
                world = moved;
                let report = sim::verify_world(&world, &mesh);
                if !report.is_ok() {
                    for d in &report.diffs {
                        eprintln!("step {step}: {d}");
                    }
                    all_ok = false;
                }
                println!(
                    "step {step}: {} wire msgs, {} trees, {} ghosts, {} bytes, {} shared, {:.3}s",
                    stats.wire_messages,
                    stats.trees_over_wire,
                    stats.ghosts_over_wire,
                    stats.bytes_over_wire,
                    stats.shared_tree_count,
                    stats.wall_time_secs
                );
                last_stats = Some(stats);
            }
            let elapsed = started.elapsed().as_secs_f64();
            let mean_s = last_stats
                .as_ref()
                .map(|s| {
                    s.per_rank.iter().map(|r| r.s_size).sum::<usize>() as f64
                        / s.per_rank.len().max(1) as f64
                })
                .unwrap_or(0.0);
            println!(
                "total: {k_total} trees x {} steps over {ranks} simulated ranks in {elapsed:.3}s \
                 ({:.0} trees/s simulated; mean |S_p| {mean_s:.2})",
                steps.max(1),
                k_total as f64 * steps.max(1) as f64 / elapsed.max(1e-9),
            );
            println!(
                "note: simulated single-machine throughput; not comparable to distributed-hardware timings"
            );
            if let (Some(base), Some(stats)) = (&out, &last_stats) {
                let csv = base.with_extension("csv");
                let json = base.with_extension("json");
                std::fs::write(&csv, stats.to_csv())
                    .map_err(|e| UsageError(format!("cannot write {}: {e}", csv.display())))?;
                std::fs::write(&json, stats.to_json())
                    .map_err(|e| UsageError(format!("cannot write {}: {e}", json.display())))?;
            }
            Ok(all_ok)
        }
        Command::Verify { mesh, trials, seed } => {
            if let Some(path) = &mesh {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
                let parsed = match GlobalConnectivity::parse(&text) {
                    Ok(m) => m,
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        return Ok(false);
                    }
                };
                let report = parsed.validate();
                if !report.is_empty() {
                    for d in report {
                        eprintln!("{}: {d}", path.display());
                    }
                    return Ok(false);
                }
                println!("{}: {} trees, consistent", path.display(), parsed.num_trees());
            }
            if let Some(n) = trials {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for trial in 0..n {
                    let scenario_seed = rng.gen_seed();
                    if let Err(msg) = fuzz_one(scenario_seed) {
                        eprintln!("trial {trial} (seed {scenario_seed}): {msg}");
                        return Ok(false);
                    }
                }
                println!("{n} randomized trials passed");
            }
            if mesh.is_none() && trials.is_none() {
                if let Err(msg) = golden_checks() {
                    eprintln!("{msg}");
                    return Ok(false);
                }
                println!("golden scenarios passed");
            }
            Ok(true)
        }
    }
}

trait SeedDraw {
    fn gen_seed(&mut self) -> u64;
}

impl SeedDraw for ChaCha8Rng {
    fn gen_seed(&mut self) -> u64 {
        use rand::Rng;
        self.gen()
    }
}

/// One randomized end-to-end repartition checked against the brute-force
/// oracle and the global reference.
fn fuzz_one(seed: u64) -> Result<(), String> {
    let (mesh, old, new) = oracle::random_scenario(50, 12, seed);
    let table = oracle::SendTable::build(&old, &new).map_err(|e| e.to_string())?;
    for p in 0..old.num_ranks() {
        let s = pattern::compute_s(&old, &new, p).map_err(|e| e.to_string())?;
        if s != table.s_set(p) {
            return Err(format!("S_{p} mismatch: {s:?} vs {:?}", table.s_set(p)));
        }
        let r = pattern::compute_r(&old, &new, p).map_err(|e| e.to_string())?;
        if r != table.r_set(p) {
            return Err(format!("R_{p} mismatch: {r:?} vs {:?}", table.r_set(p)));
        }
    }
    let world = World::from_global(&mesh, &old).map_err(|e| e.to_string())?;
    let (moved, _) = sim::run_repartition(&world, &new).map_err(|e| e.to_string())?;
    let report = sim::verify_world(&moved, &mesh);
    if !report.is_ok() {
        return Err(report.diffs.join("; "));
    }
    Ok(())
}

fn golden_checks() -> Result<(), String> {
    // five-tree worked example
    let old = OffsetArray::from_entries(vec![0, -2, 3, 5]).unwrap();
    let new = OffsetArray::from_entries(vec![0, -3, -4, 5]).unwrap();
    let expect_s = [vec![0], vec![0, 1], vec![1, 2]];
    let expect_r = [vec![0, 1], vec![1, 2], vec![2]];
    for p in 0..3 {
        let s = pattern::compute_s(&old, &new, p).map_err(|e| e.to_string())?;
        let r = pattern::compute_r(&old, &new, p).map_err(|e| e.to_string())?;
        if s != expect_s[p] || r != expect_r[p] {
            return Err(format!("worked example rank {p}: S={s:?} R={r:?}"));
        }
    }
    // three-quad ring with retained and shipped ghosts
    let mesh = three_tree_ring();
    let old = OffsetArray::from_entries(vec![0, 1, 3, 3]).unwrap();
    let new = OffsetArray::from_entries(vec![0, -1, 2, 3]).unwrap();
    let world = World::from_global(&mesh, &old).map_err(|e| e.to_string())?;
    let (moved, stats) = sim::run_repartition(&world, &new).map_err(|e| e.to_string())?;
    if stats.wire_messages != 2 || stats.ghosts_over_wire != 2 {
        return Err(format!(
            "ring scenario traffic: {} msgs, {} ghosts",
            stats.wire_messages, stats.ghosts_over_wire
        ));
    }
    let report = sim::verify_world(&moved, &mesh);
    if !report.is_ok() {
        return Err(report.diffs.join("; "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
