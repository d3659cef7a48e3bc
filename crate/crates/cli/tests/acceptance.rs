//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria 1-3 and 8-10 are exact checks and fail the target when red.
//! Criteria 4-7 run desk-scale evolution (tens of minutes in total) and
//! report their outcome without failing the target. Set
//! `SWARMEVO_SKIP_EVOLUTION=1` to skip them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarmevo_core::coverage::{CoverageGrid, CoverageParams};
use swarmevo_core::evolution::{derive_seed, run_evolution, RunArchive, RunConfig, SeedNamespace, OUTPUT_COUNT};
use swarmevo_core::fitness::{
    cluster_partition, clustering_fitness, dispersion_fitness, homing_fitness, monitoring_fitness,
    safety_coefficient, TrajectoryTrace,
};
use swarmevo_core::kriging::{fit_variogram, gaussian_field, KrigingModel, Neighbourhood, Sample, Variogram};
use swarmevo_core::neat::{add_node, compatibility_distance, crossover, mutate};
use swarmevo_core::neat::{self, Genome, InnovationRegistry, NeatParams, Population};
use swarmevo_core::scenario::{
    dispersion_error, run_scenario, Scenario, METRIC_COVERAGE_FRACTION, METRIC_WAYPOINT_DISTANCE,
};
use swarmevo_core::sensors::INPUT_COUNT;
use swarmevo_core::task::{run_trial, TaskConfig};
use swarmevo_core::{GeoFence, TaskKind, Vec2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. Fitness functions against literal re-evaluations of the equations.

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

struct MicroTrace {
    initial: Vec<(f64, f64)>,
    steps: Vec<Vec<(f64, f64)>>,
    waypoints: Vec<(f64, f64)>,
    active: Vec<usize>,
    fence: Vec<(f64, f64)>,
}

fn micro_trace(rng: &mut ChaCha8Rng, min_robots: usize) -> MicroTrace {
    let r = rng.gen_range(min_robots..=5);
    let t = rng.gen_range(1..=20);
    let box_side = rng.gen_range(5.0..40.0);
    let mut pos: Vec<(f64, f64)> = (0..r)
        .map(|_| (rng.gen_range(0.0..box_side), rng.gen_range(0.0..box_side)))
        .collect();
    let initial = pos.clone();
    let mut steps = Vec::new();
    for _ in 0..t {
        for p in pos.iter_mut() {
            p.0 += rng.gen_range(-2.0..2.0);
            p.1 += rng.gen_range(-2.0..2.0);
        }
        steps.push(pos.clone());
    }
    let waypoints: Vec<(f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| (rng.gen_range(-20.0..60.0), rng.gen_range(-20.0..60.0)))
        .collect();
    let mut active = Vec::new();
    let mut w = 0;
    for _ in 0..t {
        if rng.gen_bool(0.15) {
            w = rng.gen_range(0..waypoints.len());
        }
        active.push(w);
    }
    // Convex fence around the box: random radii on sorted angles.
    let c = (box_side / 2.0, box_side / 2.0);
    let n = rng.gen_range(3..=7);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let rad = rng.gen_range(8.0..30.0);
    let fence = angles
        .iter()
        .map(|a| (c.0 + rad * a.cos(), c.1 + rad * a.sin()))
        .collect();
    MicroTrace {
        initial,
        steps,
        waypoints,
        active,
        fence,
    }
}

fn v2(p: (f64, f64)) -> Vec2 {
    Vec2::new(p.0, p.1)
}

fn to_trace(m: &MicroTrace) -> Option<TrajectoryTrace> {
    let mut tr = TrajectoryTrace::new(m.initial.iter().copied().map(v2).collect());
    for (s, &a) in m.steps.iter().zip(&m.active) {
        tr.push_step(s.iter().copied().map(v2).collect(), a);
    }
    tr.waypoints = m.waypoints.iter().copied().map(v2).collect();
    tr.fence = Some(GeoFence::new(m.fence.iter().copied().map(v2).collect()).ok()?);
    Some(tr)
}

fn oracle_safety(m: &MicroTrace) -> f64 {
    let r = m.initial.len();
    if r == 1 {
        return 1.0;
    }
    let mut min_dist = f64::INFINITY;
    for s in &m.steps {
        for i in 0..r {
            for j in 0..r {
                if i != j {
                    min_dist = min_dist.min(dist(s[i], s[j]));
                }
            }
        }
    }
    0.1 + min_dist.max(0.0).min(3.0) / 3.0 * 0.9
}

fn oracle_homing(m: &MicroTrace) -> f64 {
    let (r, t) = (m.initial.len(), m.steps.len());
    let mut starting = vec![0.0; r];
    let mut sum = 0.0;
    for k in 0..t {
        let w = m.waypoints[m.active[k]];
        if k == 0 || m.active[k] != m.active[k - 1] {
            let before = if k == 0 { &m.initial } else { &m.steps[k - 1] };
            for i in 0..r {
                starting[i] = f64::max(dist(before[i], w), 1.0);
            }
        }
        let mut inner = 0.0;
        for i in 0..r {
            inner += (starting[i] - dist(m.steps[k][i], w)) / starting[i];
        }
        sum += inner / r as f64;
    }
    sum / t as f64 * oracle_safety(m)
}

fn nearest(s: &[(f64, f64)], i: usize) -> f64 {
    (0..s.len())
        .filter(|&j| j != i)
        .map(|j| dist(s[i], s[j]))
        .fold(f64::INFINITY, f64::min)
}

fn oracle_dispersion(m: &MicroTrace) -> f64 {
    let (r, t) = (m.initial.len(), m.steps.len());
    let mut sum = 0.0;
    for s in &m.steps {
        let mut inner = 0.0;
        for i in 0..r {
            inner += f64::max(0.0, 1.0 - (nearest(s, i) - 20.0).abs() / 20.0);
        }
        sum += inner / r as f64;
    }
    sum / t as f64 * oracle_safety(m)
}

/// Components by transitive closure of the "closer than 7 m" relation.
fn closure_components(s: &[(f64, f64)], threshold: f64) -> BTreeSet<BTreeSet<usize>> {
    let n = s.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = i == j || dist(s[i], s[j]) < threshold;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| reach[i][j]).collect())
        .collect()
}

fn oracle_clustering(m: &MicroTrace) -> f64 {
    let r = m.initial.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, s) in m.steps.iter().enumerate() {
        let t = (k + 1) as f64;
        let c = closure_components(s, 7.0).len() as f64;
        num += t * (r - c) / (r - 1.0);
        den += t;
    }
    num / den * oracle_safety(m)
}

fn inside(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut c = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.1 > p.1) != (b.1 > p.1) && p.0 < (b.0 - a.0) * (p.1 - a.1) / (b.1 - a.1) + a.0 {
            c = !c;
        }
        j = i;
    }
    c
}

fn oracle_monitoring(m: &MicroTrace) -> f64 {
    let xs = m.fence.iter().map(|p| p.0);
    let ys = m.fence.iter().map(|p| p.1);
    let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let mut cells = Vec::new();
    for cx in (x0.floor() as i64)..(x1.ceil() as i64) {
        for cy in (y0.floor() as i64)..(y1.ceil() as i64) {
            let c = (cx as f64 + 0.5, cy as f64 + 0.5);
            if inside(c, &m.fence) {
                cells.push(c);
            }
        }
    }
    let mut val = vec![0.0f64; cells.len()];
    let mut sum = 0.0;
    for (k, s) in m.steps.iter().enumerate() {
        for (v, &c) in val.iter_mut().zip(&cells) {
            let min_dist = s.iter().map(|&p| dist(p, c)).fold(f64::INFINITY, f64::min);
            *v = if k == 0 {
                0.0
            } else if min_dist <= 5.0 {
                1.0
            } else {
                f64::max(0.0, *v - 0.001)
            };
        }
        sum += val.iter().sum::<f64>() / cells.len() as f64;
    }
    sum / m.steps.len() as f64 * oracle_safety(m)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 5];
    let mut attempts = 0;
    while counts.iter().any(|&c| c < 60) && attempts < 10_000 {
        attempts += 1;
        let m = micro_trace(&mut rng, 1);
        let Some(tr) = to_trace(&m) else { continue };
        let mut check = |k: usize, got: f64, want: f64| {
            worst = worst.max((got - want).abs());
            counts[k] += 1;
        };
        check(0, safety_coefficient(&tr), oracle_safety(&m));
        check(1, homing_fitness(&tr).unwrap(), oracle_homing(&m));
        if m.initial.len() >= 2 {
            check(2, dispersion_fitness(&tr).unwrap(), oracle_dispersion(&m));
            check(3, clustering_fitness(&tr).unwrap(), oracle_clustering(&m));
        }
        if let Ok(v) = monitoring_fitness(&tr) {
            check(4, v, oracle_monitoring(&m));
        }
    }
    let min = *counts.iter().min().unwrap();
    outcome(
        worst <= 1e-9 && min >= 50,
        format!("{min}+ traces per function, max |diff| {worst:.2e} (tolerance 1e-9)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Cluster partition against transitive closure.

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let side = rng.gen_range(5.0..40.0);
        let mut pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
            .collect();
        if n >= 2 && rng.gen_bool(0.2) {
            // Exactly 7 m apart: not an edge.
            pts[1] = (pts[0].0 + 7.0, pts[0].1);
        }
        let got: BTreeSet<BTreeSet<usize>> = cluster_partition(&pts.iter().copied().map(v2).collect::<Vec<_>>(), 7.0)
            .clusters
            .into_iter()
            .map(|c| c.into_iter().collect())
            .collect();
        if got != closure_components(&pts, 7.0) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/200 partitions differ from the closure"))
}

// ---------------------------------------------------------------------------
// 3. Coverage decay.

fn criterion_3() -> Outcome {
    let fence = GeoFence::rectangle(Vec2::ZERO, Vec2::new(30.0, 30.0)).unwrap();
    let mut grid = CoverageGrid::new(&fence, CoverageParams::default()).unwrap();
    let far = [Vec2::new(500.0, 500.0)];
    grid.step(&far);
    grid.step(&[Vec2::new(15.5, 15.5)]);
    let mut values = vec![grid.value(15, 15).unwrap()];
    for _ in 0..1000 {
        grid.step(&far);
        values.push(grid.value(15, 15).unwrap());
    }
    let linear = (1..1000).all(|k| (values[k] - (1.0 - 0.001 * k as f64)).abs() < 1e-12);
    outcome(
        values[0] == 1.0 && values[999] > 0.0 && values[1000] == 0.0 && linear,
        format!(
            "value 1 at the visit, {:.3} after 999 steps, {} after 1000",
            values[999], values[1000]
        ),
    )
}

// ---------------------------------------------------------------------------
// 4-7. Desk-scale evolution.

fn desk_config(task: TaskKind, seed: u64, generations: usize) -> RunConfig {
    RunConfig {
        seed,
        generations: Some(generations),
        trials: 10,
        neat: NeatParams {
            population_size: 50,
            ..NeatParams::default()
        },
        ..RunConfig::for_task(task)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn best_post_evaluated(cfg: &RunConfig) -> (RunArchive, Genome, usize) {
    let archive = run_evolution(cfg).expect("evolution runs");
    let best = archive.best().expect("non-empty archive");
    let (g, gen) = (best.champion.clone(), best.generation);
    (archive, g, gen)
}

fn criterion_4() -> Outcome {
    let sc = Scenario::builtin("homing").unwrap();
    let mut passes = 0;
    let mut notes = Vec::new();
    for seed in 1..=3 {
        let cfg = RunConfig {
            robots: Some([5, 5]),
            post_eval: 100,
            ..desk_config(TaskKind::Homing, seed, 30)
        };
        let (_, genome, gen) = best_post_evaluated(&cfg);
        let finals: Vec<f64> = (1..=10)
            .map(|s| {
                run_scenario(&sc, &genome, s)
                    .unwrap()
                    .series
                    .last(METRIC_WAYPOINT_DISTANCE)
                    .unwrap()
            })
            .collect();
        let m = median(finals);
        if m <= 15.0 {
            passes += 1;
        }
        notes.push(format!("seed {seed}: gen {gen}, {m:.1} m"));
    }
    outcome(
        passes >= 2,
        format!("{passes}/3 seeds with median final distance <= 15 m ({})", notes.join("; ")),
    )
}

fn criterion_5() -> Outcome {
    let sc = Scenario::builtin("dispersion").unwrap();
    let mut notes = Vec::new();
    for seed in 1..=3 {
        let cfg = RunConfig {
            post_eval: 100,
            ..desk_config(TaskKind::Dispersion, seed, 100)
        };
        let (_, genome, gen) = best_post_evaluated(&cfg);
        let errors: Vec<f64> = (1..=10)
            .map(|s| dispersion_error(&run_scenario(&sc, &genome, s).unwrap().series, 10.0).unwrap())
            .collect();
        let e = errors.iter().sum::<f64>() / errors.len() as f64;
        notes.push(format!("seed {seed}: gen {gen}, {e:.2} m"));
        if e <= 5.0 {
            return outcome(true, format!("error <= 5 m reached ({})", notes.join("; ")));
        }
    }
    outcome(false, format!("no seed reached 5 m ({})", notes.join("; ")))
}

fn criterion_6() -> Outcome {
    let cfg = RunConfig {
        post_eval: 100,
        ..desk_config(TaskKind::Clustering, 1, 150)
    };
    let (_, genome, gen) = best_post_evaluated(&cfg);
    let task = TaskConfig::default_for(TaskKind::Clustering);
    let slope = NeatParams::default().sigmoid_slope;
    let (mut eligible, mut merged, mut excluded) = (0, 0, 0);
    let mut k = 0;
    while eligible < 10 && k < 1000 {
        // Fresh trials, disjoint from those used to pick the controller.
        let seed = derive_seed(cfg.seed, SeedNamespace::PostEval, 1, 0, k);
        k += 1;
        let out = run_trial(&genome, slope, &task, seed).expect("trial setup");
        let start = &out.trace.initial;
        if cluster_partition(start, 40.0).count() != 1 {
            excluded += 1;
            continue;
        }
        eligible += 1;
        if out.trace.positions.iter().any(|p| cluster_partition(p, 7.0).count() == 1) {
            merged += 1;
        }
    }
    outcome(
        merged >= 6 && eligible == 10,
        format!("single cluster in {merged}/{eligible} trials (gen {gen} champion, {excluded} disconnected starts excluded)"),
    )
}

fn criterion_7() -> Outcome {
    let cfg = RunConfig {
        trials: 5,
        ..desk_config(TaskKind::Monitoring, 1, 20)
    };
    let archive = run_evolution(&cfg).expect("evolution runs");
    let genome = archive.best().unwrap().champion.clone();
    let square = Scenario::builtin("monitoring-square").unwrap();
    let mut means = Vec::new();
    for n in [2, 4, 8] {
        let sc = square.clone().with_robots(n);
        let per_seed: Vec<f64> = (1..=3)
            .map(|s| {
                let c = run_scenario(&sc, &genome, s).unwrap().series.column(METRIC_COVERAGE_FRACTION).unwrap();
                c.iter().sum::<f64>() / c.len() as f64
            })
            .collect();
        means.push(per_seed.iter().sum::<f64>() / 3.0);
    }
    let increasing = means[0] < means[1] && means[1] < means[2];

    let robust = Scenario::builtin("monitoring-robustness").unwrap();
    let (mut before, mut removed, mut after) = (0.0, 0.0, 0.0);
    for s in 1..=3 {
        let series = run_scenario(&robust, &genome, s).unwrap().series;
        let window = |a, b| series.mean_between(METRIC_COVERAGE_FRACTION, a, b).unwrap() / 3.0;
        before += window(200.0, 300.0);
        removed += window(500.0, 600.0);
        after += window(800.0, 900.0);
    }
    let shape = removed < before && after > removed;
    outcome(
        increasing && shape,
        format!(
            "mean covered fraction {:.3} / {:.3} / {:.3} for 2 / 4 / 8 robots; robustness {:.3} -> {:.3} -> {:.3}",
            means[0], means[1], means[2], before, removed, after
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Determinism of the command-line outputs.

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Runs the binary inside `root` with the relative output directory `out`,
/// so that echoed input paths are the same for every repeat.
fn swarmevo(root: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_swarmevo"))
        .args(args)
        .current_dir(root)
        .env("SWARMEVO_OUT_DIR", "out")
        .env("RUST_LOG", "error")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let run_all = |out: &Path, serial: bool| -> bool {
        let mut ok = true;
        for task in ["homing", "dispersion", "monitoring", "clustering"] {
            let mut args = vec![
                "evolve", "--task", task, "--seed", "4", "--generations", "3", "--population", "12", "--trials", "2",
                "--post-eval", "3",
            ];
            if serial {
                args.push("--serial");
            }
            ok &= swarmevo(out, &args);
        }
        let gs: Vec<String> = ["homing", "dispersion", "monitoring", "clustering"]
            .iter()
            .map(|t| format!("out/{t}/seed_4/gen_0002.genome"))
            .collect();
        ok &= swarmevo(out, &["replay", "--scenario", "dispersion-robustness", "--genome", &gs[1], "--seed", "2"]);
        ok &= swarmevo(out, &["replay", "--scenario", "monitoring-l", "--genome", &gs[2], "--robots", "4"]);
        ok &= swarmevo(
            out,
            &["mission", "--seed", "9", "--genome", &gs[0], &gs[1], &gs[2], &gs[3]],
        );
        ok
    };
    let dirs: Vec<PathBuf> = ["a", "b", "serial"].iter().map(|d| tmp.path().join(d)).collect();
    for d in &dirs {
        std::fs::create_dir_all(d).unwrap();
    }
    let ran = run_all(&dirs[0], false) && run_all(&dirs[1], false) && run_all(&dirs[2], true);
    if !ran {
        return outcome(false, "a command failed");
    }
    let (a, b, mut c) = (files(&dirs[0]), files(&dirs[1]), files(&dirs[2]));
    // The serial run records its own evaluation mode.
    for (k, v) in c.iter_mut() {
        if k.ends_with("config.toml") {
            *v = String::from_utf8_lossy(v).replace("parallel = false", "parallel = true").into_bytes();
        }
    }
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v) || c.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let same_sets = a.keys().eq(b.keys()) && a.keys().eq(c.keys());
    outcome(
        same_sets && differing.is_empty() && !a.is_empty(),
        format!(
            "{} files from evolve, replay and mission; {} differ across repeats and serial/parallel evaluation {:?}",
            a.len(),
            differing.len(),
            differing
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. NEAT structural suite.

fn random_genome(rng: &mut ChaCha8Rng, reg: &mut InnovationRegistry) -> Genome {
    Genome::fully_connected(INPUT_COUNT, OUTPUT_COUNT, reg, rng)
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let params = NeatParams {
        add_connection_prob: 0.5,
        add_node_prob: 0.3,
        ..NeatParams::default()
    };

    // Innovation uniqueness: one number per structure, distinct across
    // structures, and never reused within a genome.
    let mut pop = Population::new(
        NeatParams {
            population_size: 60,
            ..params
        },
        INPUT_COUNT,
        OUTPUT_COUNT,
        &mut rng,
    );
    let mut meaning: HashMap<u64, (u32, u32)> = HashMap::new();
    let mut sizes = Vec::new();
    for _ in 0..25 {
        for g in pop.genomes_mut() {
            g.fitness = Some(rng.gen_range(0.0..1.0));
        }
        pop.next_generation(&mut rng);
        sizes.push(pop.genomes().len());
        for g in pop.genomes() {
            let mut seen = BTreeSet::new();
            for c in g.connections() {
                if !seen.insert(c.innovation) {
                    failures.push("duplicate innovation in a genome");
                }
                if *meaning.entry(c.innovation).or_insert((c.from, c.to)) != (c.from, c.to) {
                    failures.push("one innovation number for two structures");
                }
            }
        }
    }
    let mut reg = InnovationRegistry::new((INPUT_COUNT + OUTPUT_COUNT) as u32);
    let a = reg.connection(3, 12);
    if reg.connection(3, 12) != a || reg.connection(4, 12) == a {
        failures.push("registry contract within a generation");
    }

    // Population size invariance.
    if sizes.iter().any(|&s| s != 60) {
        failures.push("population size changed");
    }

    // Crossover gene subset, compatibility self-distance, add-node rewiring.
    let mut reg = InnovationRegistry::new((INPUT_COUNT + OUTPUT_COUNT) as u32);
    for _ in 0..200 {
        let mut x = random_genome(&mut rng, &mut reg);
        let mut y = random_genome(&mut rng, &mut reg);
        for _ in 0..rng.gen_range(0..6) {
            mutate(&mut x, &params, &mut reg, &mut rng);
            mutate(&mut y, &params, &mut reg, &mut rng);
        }
        x.fitness = Some(1.0);
        y.fitness = Some(0.5);
        let child = crossover(&x, &y, &params, &mut rng);
        let union: BTreeSet<u64> = x.innovations().union(&y.innovations()).copied().collect();
        if !child.innovations().is_subset(&union) {
            failures.push("crossover child gene outside the parents");
        }
        if !x.innovations().is_subset(&child.innovations()) {
            failures.push("crossover dropped a gene of the fitter parent");
        }
        if compatibility_distance(&x, &x, 1.0, 1.0, 0.4) != 0.0 {
            failures.push("compatibility_distance(a, a) != 0");
        }

        let before = x.clone();
        if add_node(&mut x, &mut reg, &mut rng) {
            let split = before
                .connections()
                .iter()
                .zip(x.connections())
                .find(|(b, a)| b.enabled && !a.enabled)
                .map(|(b, _)| *b);
            let ok = split.map_or(false, |old| {
                let hidden: Vec<u32> = x
                    .nodes()
                    .iter()
                    .map(|n| n.id)
                    .filter(|id| !before.has_node(*id))
                    .collect();
                hidden.len() == 1 && {
                    let h = hidden[0];
                    let find = |f: u32, t: u32| x.connections().iter().find(|c| c.from == f && c.to == t).copied();
                    matches!(find(old.from, h), Some(c) if c.weight == 1.0 && c.enabled)
                        && matches!(find(h, old.to), Some(c) if c.weight == old.weight && c.enabled)
                        && x.connections().len() == before.connections().len() + 2
                }
            });
            if !ok {
                failures.push("add-node rewiring");
            }
        }
        if x.validate().is_err() || neat::io::from_text(&neat::io::to_text(&x)).ok().as_ref() != Some(&x) {
            failures.push("genome invalid or not round-tripping");
        }
    }
    failures.sort();
    failures.dedup();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "innovation uniqueness, crossover subset, size invariance, self-distance 0, add-node rule: all hold"
                .to_string()
        } else {
            failures.join(", ")
        },
    )
}

// ---------------------------------------------------------------------------
// 10. Kriging suite.

fn random_samples(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let p = Vec2::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
            Sample::new(p, 20.0 + (p.x / 17.0).sin() + rng.gen_range(-0.5..0.5))
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut exact, mut weights, mut monotone): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        let n = rng.gen_range(5..40);
        let s = random_samples(&mut rng, n, 100.0);
        let v = Variogram::new(0.0, rng.gen_range(0.5..3.0), rng.gen_range(5.0..40.0)).unwrap();
        let m = KrigingModel::new(v, &s).unwrap();
        for x in m.samples() {
            let p = m.predict(x.position, Neighbourhood::Full);
            exact = exact.max((p.value - x.value).abs()).max(p.std());
        }
        let q = Vec2::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
        let mut prev = f64::INFINITY;
        for k in 1..=s.len() {
            let p = KrigingModel::new(v, &s[..k]).unwrap().predict(q, Neighbourhood::Full);
            weights = weights.max((p.weights.iter().sum::<f64>() - 1.0).abs());
            monotone = monotone.max(p.variance - prev);
            prev = p.variance;
        }
    }

    let (mut nugget, mut sill, mut range) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec2> = (0..200)
            .map(|_| Vec2::new(r.gen_range(0.0..200.0), r.gen_range(0.0..200.0)))
            .collect();
        let z = gaussian_field(&pts, 1.0, 30.0, seed + 100).unwrap();
        let samples: Vec<Sample> = pts.iter().zip(&z).map(|(&p, &v)| Sample::new(p, v)).collect();
        let v = fit_variogram(&samples).unwrap().variogram;
        nugget.push(v.nugget);
        sill.push(v.sill);
        range.push(v.range);
    }
    let (n, s, r) = (median(nugget), median(sill), median(range));
    let refit = (s - 1.0).abs() <= 0.25 && (r - 30.0).abs() <= 7.5 && n <= 0.25;
    outcome(
        exact <= 1e-6 && weights <= 1e-9 && monotone <= 1e-9 && refit,
        format!(
            "exactness {exact:.1e}, weight-sum error {weights:.1e}, max variance increase {monotone:.1e}; \
             median refit nugget {n:.3} sill {s:.3} range {r:.1} (true 0 / 1 / 30)"
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    // `cargo test -- --list` and filters: nothing to list, run everything.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let skip_evolution = std::env::var("SWARMEVO_SKIP_EVOLUTION").map_or(false, |v| v == "1");
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, bool, Check); 10] = [
        (1, "fitness oracle equivalence", true, criterion_1),
        (2, "cluster oracle", true, criterion_2),
        (3, "coverage decay", true, criterion_3),
        (4, "homing evolution at desk scale", false, criterion_4),
        (5, "dispersion evolution at desk scale", false, criterion_5),
        (6, "clustering property", false, criterion_6),
        (7, "monitoring scalability", false, criterion_7),
        (8, "determinism", true, criterion_8),
        (9, "NEAT structural suite", true, criterion_9),
        (10, "kriging suite", true, criterion_10),
    ];
    let mut exact_failures = 0;
    let mut passed = 0;
    for (id, name, exact, check) in criteria {
        if !exact && skip_evolution {
            println!("criterion {id:>2} SKIP {name}");
            continue;
        }
        let start = Instant::now();
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name}: {} [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if o.pass {
            passed += 1;
        } else if exact {
            exact_failures += 1;
        }
    }
    println!("acceptance: {passed} passed");
    if exact_failures > 0 {
        std::process::exit(1);
    }
}
