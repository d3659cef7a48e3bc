use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use swarmevo_core::coverage::GridData;
use swarmevo_core::evolution::{post_evaluate_archive, run_evolution_with, select_top, RunArchive, RunConfig};
use swarmevo_core::mission::{run_mission, MissionLog, MissionPlan};
use swarmevo_core::neat;
use swarmevo_core::scenario::{
    dispersion_error, parse_trajectory_csv, run_scenario, trajectory_csv, MetricSeries, Scenario,
    METRIC_CLUSTERS, METRIC_COVERAGE_FRACTION, METRIC_DISPERSION_ERROR, METRIC_WAYPOINT_DISTANCE,
};
use swarmevo_core::TaskKind;

use crate::plot::{self, Plot};

pub const OUT_DIR_ENV: &str = "SWARMEVO_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "swarmevo", version, about = "Evolve, replay and compose swarm controllers")]
pub struct Cli {
    /// Root directory for all outputs.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "results")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more evolutionary runs and archive every generation champion.
    Evolve(EvolveArgs),
    /// Re-score every champion of archived runs over fresh trials.
    Posteval(PostevalArgs),
    /// Pick the three best controllers across archived runs.
    Select(SelectArgs),
    /// Replay a controller on a built-in or file-defined scenario.
    Replay(ReplayArgs),
    /// Run a sequential multi-behaviour mission with temperature mapping.
    Mission(MissionArgs),
    /// Render logged data as SVG (with the plotted values as CSV).
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub task: Option<TaskKind>,
    /// Run configuration file (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed of the first run; further runs use consecutive seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    /// Trials per genome evaluation.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Fixed robot count per trial instead of the task's range.
    #[arg(long)]
    pub robots: Option<usize>,
    /// Post-evaluate each champion over this many trials during the run.
    #[arg(long)]
    pub post_eval: Option<usize>,
    /// Evaluate genomes on one thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct PostevalArgs {
    /// Archive directories written by `evolve`.
    #[arg(required = true)]
    pub archives: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(required = true)]
    pub archives: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Built-in scenario id or scenario file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub genome: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of consecutive seeds to replay.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    /// Override the scenario's robot count.
    #[arg(long)]
    pub robots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MissionArgs {
    /// Mission plan file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Without a plan: homing, dispersion, monitoring and clustering
    /// controllers, in that order.
    #[arg(long, num_args = 4)]
    pub genome: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub robots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub kind: PlotKind,
    /// Output SVG; the CSV is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// Per-generation fitness of archived runs, best three in red.
    Fitness {
        #[arg(required = true)]
        archives: Vec<PathBuf>,
        /// Plot raw evolution fitness even when post-evaluations exist.
        #[arg(long)]
        raw: bool,
    },
    /// One column of a metrics CSV over time.
    Metric {
        input: PathBuf,
        #[arg(long)]
        column: String,
    },
    /// Robot paths from a trajectory CSV.
    Trajectory {
        input: PathBuf,
        /// Draw this scenario's fence.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Grid file as a heatmap.
    Heatmap {
        input: PathBuf,
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let out = cli.out_dir;
    match cli.command {
        Command::Evolve(a) => evolve(&a, &out).map(|_| ()),
        Command::Posteval(a) => posteval(&a),
        Command::Select(a) => select(&a, &out),
        Command::Replay(a) => replay(&a, &out).map(|_| ()),
        Command::Mission(a) => mission(&a, &out).map(|_| ()),
        Command::Plot(a) => plot_cmd(&a, &out),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write `stem.svg` and `stem.csv` into `dir`.
fn write_plot(dir: &Path, stem: &str, p: &Plot) -> Result<()> {
    write(&dir.join(format!("{stem}.svg")), &p.svg)?;
    write(&dir.join(format!("{stem}.csv")), &p.csv)
}

fn run_config(a: &EvolveArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => match a.task {
            Some(t) => RunConfig::for_task(t),
            None => bail!("evolve needs --task or --config"),
        },
    };
    if let Some(t) = a.task {
        cfg.task = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(g) = a.generations {
        cfg.generations = Some(g);
    }
    if let Some(p) = a.population {
        if p == 0 {
            bail!("--population must be at least 1");
        }
        cfg.neat.population_size = p;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(n) = a.robots {
        cfg.robots = Some([n, n]);
    }
    if let Some(n) = a.post_eval {
        cfg.post_eval = n;
    }
    if a.serial {
        cfg.parallel = false;
    }
    Ok(cfg)
}

pub fn archive_dir(out: &Path, task: TaskKind, seed: u64) -> PathBuf {
    out.join(task.as_str()).join(format!("seed_{seed}"))
}

pub fn evolve(a: &EvolveArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let base = run_config(a)?;
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let mut dirs = Vec::new();
    let mut archives = Vec::new();
    for k in 0..a.runs {
        let cfg = RunConfig {
            seed: base.seed + k,
            ..base.clone()
        };
        let archive = run_evolution_with(&cfg, |r| {
            if r.generation % 10 == 0 {
                info!("seed {} generation {}: champion {:.4}", cfg.seed, r.generation, r.raw_fitness);
            }
        })?;
        let dir = archive_dir(out, cfg.task, cfg.seed);
        archive.save(&dir)?;
        let best = archive.best().expect("at least one generation is archived");
        println!(
            "{} seed {}: {} generations, {} trials, best generation {} ({:.4}) -> {}",
            cfg.task,
            cfg.seed,
            archive.records.len(),
            archive.trials_run,
            best.generation,
            best.post.map_or(best.raw_fitness, |p| p.mean),
            dir.display()
        );
        dirs.push(dir);
        archives.push(archive);
    }
    let p = fitness_curves(&archives, false);
    write_plot(&out.join(base.task.as_str()), "fitness", &p)?;
    Ok(dirs)
}

/// Fitness curves of several archives: post-evaluation means when every
/// record of an archive has one (unless `raw`), champion fitness otherwise.
pub fn fitness_curves(archives: &[RunArchive], raw: bool) -> Plot {
    let mut label = "champion fitness";
    let runs: Vec<(u64, Vec<f64>)> = archives
        .iter()
        .map(|a| {
            let post = !raw && a.records.iter().all(|r| r.post.is_some());
            if post {
                label = "post-evaluated fitness";
            }
            let ys = a
                .records
                .iter()
                .map(|r| if post { r.post.map_or(f64::NAN, |p| p.mean) } else { r.raw_fitness })
                .collect();
            (a.seed, ys)
        })
        .collect();
    plot::fitness_plot(&runs, label)
}

pub fn posteval(a: &PostevalArgs) -> Result<()> {
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    for dir in &a.archives {
        let mut archive = RunArchive::load(dir).with_context(|| format!("loading archive {}", dir.display()))?;
        let scores = post_evaluate_archive(&mut archive, a.trials, !a.serial)?;
        write(&dir.join("summary.csv"), &archive.summary_csv())?;
        let mut csv = String::from("generation,trial,score\n");
        for (r, s) in archive.records.iter().zip(&scores) {
            for (k, v) in s.iter().enumerate() {
                let _ = writeln!(csv, "{},{k},{v}", r.generation);
            }
        }
        write(&dir.join("posteval.csv"), &csv)?;
        let best = archive.best().expect("archives are never empty");
        let p = best.post.expect("just post-evaluated");
        println!(
            "{}: best generation {} mean {:.4} std {:.4} over {} trials",
            dir.display(),
            best.generation,
            p.mean,
            p.std,
            a.trials
        );
    }
    Ok(())
}

pub fn select(a: &SelectArgs, out: &Path) -> Result<()> {
    let archives = a
        .archives
        .iter()
        .map(|d| RunArchive::load(d).with_context(|| format!("loading archive {}", d.display())))
        .collect::<Result<Vec<_>>>()?;
    if archives.iter().any(|a| a.records.iter().all(|r| r.post.is_none())) {
        warn!("some archives have no post-evaluation; their raw fitness is used");
    }
    let dir = out.join("selected");
    let top = select_top(&archives);
    let mut csv = String::from("rank,run_seed,generation,score,genome\n");
    for (k, s) in top.iter().enumerate() {
        let name = format!("top_{}.genome", k + 1);
        fs::create_dir_all(&dir)?;
        neat::io::save(&s.genome, &dir.join(&name))?;
        let _ = writeln!(csv, "{},{},{},{},{name}", k + 1, s.run_seed, s.generation, s.score);
        println!("{}: seed {} generation {} score {:.4}", k + 1, s.run_seed, s.generation, s.score);
    }
    write(&dir.join("selected.csv"), &csv)?;
    write_plot(&dir, "fitness", &fitness_curves(&archives, false))
}

fn primary_metric(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Homing => METRIC_WAYPOINT_DISTANCE,
        TaskKind::Dispersion => METRIC_DISPERSION_ERROR,
        TaskKind::Clustering => METRIC_CLUSTERS,
        TaskKind::Monitoring => METRIC_COVERAGE_FRACTION,
    }
}

pub fn replay_dir(out: &Path, sc: &Scenario, genome: &Path) -> PathBuf {
    let stem = genome.file_stem().map_or("genome".into(), |s| s.to_string_lossy().into_owned());
    out.join("replay").join(&sc.id).join(format!("{stem}_n{}", sc.robots))
}

/// Returns the directory holding the replays.
pub fn replay(a: &ReplayArgs, out: &Path) -> Result<PathBuf> {
    let mut sc = Scenario::resolve(&a.scenario)?;
    if let Some(n) = a.robots {
        sc = sc.with_robots(n);
    }
    let genome = neat::io::load(&a.genome)?;
    let dir = replay_dir(out, &sc, &a.genome);
    let metric = primary_metric(sc.task);
    let mut runs = Vec::new();
    for seed in a.seed..a.seed + a.repeats.max(1) {
        let run = run_scenario(&sc, &genome, seed)?;
        let d = dir.join(format!("seed_{seed}"));
        write(&d.join("metrics.csv"), &run.series.to_csv())?;
        write(&d.join("trajectory.csv"), &trajectory_csv(&run.trajectory))?;
        write(
            &d.join("trajectory.svg"),
            &plot::trajectory_svg(&run.trajectory, sc.fence.as_ref(), &format!("{} seed {seed}", sc.id)),
        )?;
        write_plot(&d, metric, &plot::metric_plot(&run.series, metric)?)?;
        if let Some(grid) = &run.coverage {
            let text = grid.to_text();
            write(&d.join("coverage.grid"), &text)?;
            let data = GridData::parse(&text).map_err(anyhow::Error::msg)?;
            write_plot(&d, "coverage", &plot::heatmap(&data, "coverage", Some((0.0, 1.0))))?;
        }
        println!("{} seed {seed}: {}", sc.id, summary_line(&sc, &run.series));
        runs.push((format!("seed_{seed}"), run.series));
    }
    if runs.len() > 1 {
        write_plot(&dir, metric, &plot::metric_runs_plot(&runs, metric)?)?;
    }
    Ok(dir)
}

fn summary_line(sc: &Scenario, s: &MetricSeries) -> String {
    let last = |m| s.last(m).unwrap_or(f64::NAN);
    match sc.task {
        TaskKind::Homing => format!("final mean distance to waypoint {:.2} m", last(METRIC_WAYPOINT_DISTANCE)),
        TaskKind::Dispersion => match dispersion_error(s, 10.0) {
            Ok(e) => format!("dispersion error over the last 10 s {e:.2} m"),
            Err(e) => format!("dispersion error unavailable: {e}"),
        },
        TaskKind::Clustering => format!("final cluster count {}", last(METRIC_CLUSTERS)),
        TaskKind::Monitoring => {
            let c = s.column(METRIC_COVERAGE_FRACTION).unwrap_or_default();
            let mean = c.iter().sum::<f64>() / c.len().max(1) as f64;
            format!("mean covered fraction {mean:.4}, final {:.4}", last(METRIC_COVERAGE_FRACTION))
        }
    }
}

fn mission_plan(a: &MissionArgs) -> Result<MissionPlan> {
    let mut plan = match (&a.config, a.genome.as_slice()) {
        (Some(p), []) => MissionPlan::load(p)?,
        (None, [h, d, m, c]) => MissionPlan::with_genomes([h.clone(), d.clone(), m.clone(), c.clone()]),
        (Some(_), _) => bail!("give either --config or --genome, not both"),
        (None, _) => bail!("mission needs --config or four --genome files"),
    };
    if let Some(n) = a.robots {
        plan.robots = n;
    }
    plan.validate()?;
    Ok(plan)
}

pub fn mission(a: &MissionArgs, out: &Path) -> Result<PathBuf> {
    let plan = mission_plan(a)?;
    let genomes = plan.load_genomes()?;
    let log = run_mission(&plan, &genomes, a.seed)?;
    let dir = out.join("mission").join(format!("seed_{}", a.seed));
    save_mission(&plan, &log, &dir)?;
    for c in &log.checkpoints {
        println!(
            "t = {} s: {} samples, mean error std {:.4} °C",
            c.time,
            c.samples,
            c.maps.mean_error_std()
        );
    }
    Ok(dir)
}

fn save_mission(plan: &MissionPlan, log: &MissionLog, dir: &Path) -> Result<()> {
    write(&dir.join("plan.toml"), &plan.to_toml())?;
    log.save(plan, dir)?;
    for (k, (stage, rows)) in plan.stages.iter().zip(&log.trajectories).enumerate() {
        let fence = stage.fence.as_ref().or(Some(&plan.area));
        write(
            &dir.join(format!("stage_{k}_{}.svg", stage.behavior)),
            &plot::trajectory_svg(rows, fence, &format!("stage {k}: {}", stage.behavior)),
        )?;
    }
    let mut csv = String::from("time,samples,mean_error_std\n");
    for c in &log.checkpoints {
        let _ = writeln!(csv, "{},{},{}", c.time, c.samples, c.maps.mean_error_std());
    }
    write(&dir.join("checkpoints.csv"), &csv)?;

    let finite = |v: &[f64]| v.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    };
    let value_range = span(
        log.checkpoints
            .iter()
            .flat_map(|c| finite(&c.maps.prediction))
            .chain(log.truth.iter().flat_map(|t| finite(&t.prediction)))
            .collect(),
    );
    let error_range = span(log.checkpoints.iter().flat_map(|c| finite(&c.maps.error_std)).collect());
    let grid_of = |m: &swarmevo_core::kriging::KrigedMaps, values: &[f64]| GridData {
        origin: m.grid.origin,
        cell_size: m.grid.cell_size,
        cols: m.grid.cols,
        rows: m.grid.rows,
        values: values.to_vec(),
    };
    for c in &log.checkpoints {
        let t = c.time.round() as i64;
        let pred = grid_of(&c.maps, &c.maps.prediction);
        let err = grid_of(&c.maps, &c.maps.error_std);
        write_plot(
            dir,
            &format!("prediction_{t:04}"),
            &plot::heatmap(&pred, &format!("temperature at t = {t} s (°C)"), value_range),
        )?;
        write_plot(
            dir,
            &format!("error_std_{t:04}"),
            &plot::heatmap(&err, &format!("error std at t = {t} s (°C)"), error_range),
        )?;
    }
    if let Some(truth) = &log.truth {
        write_plot(
            dir,
            "truth",
            &plot::heatmap(&grid_of(truth, &truth.prediction), "ground truth (°C)", value_range),
        )?;
    }
    Ok(())
}

fn plot_cmd(a: &PlotArgs, out: &Path) -> Result<()> {
    let target = |default: PathBuf| a.out.clone().unwrap_or(default);
    let (svg_path, p) = match &a.kind {
        PlotKind::Fitness { archives, raw } => {
            let loaded = archives
                .iter()
                .map(|d| RunArchive::load(d).with_context(|| format!("loading archive {}", d.display())))
                .collect::<Result<Vec<_>>>()?;
            (target(out.join("fitness.svg")), fitness_curves(&loaded, *raw))
        }
        PlotKind::Metric { input, column } => {
            let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let series = MetricSeries::from_csv(&text).map_err(|e| anyhow::anyhow!("{}: {e}", input.display()))?;
            (
                target(sibling(input, &format!("{column}_plot.svg"))),
                plot::metric_plot(&series, column)?,
            )
        }
        PlotKind::Trajectory { input, scenario } => {
            let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let rows = parse_trajectory_csv(&text).map_err(|e| anyhow::anyhow!("{}: {e}", input.display()))?;
            let fence = match scenario {
                Some(s) => Scenario::resolve(s)?.fence,
                None => None,
            };
            let title = input.file_stem().map_or(String::new(), |s| s.to_string_lossy().into_owned());
            let svg = plot::trajectory_svg(&rows, fence.as_ref(), &title);
            (
                target(sibling(input, "trajectory_plot.svg")),
                Plot {
                    svg,
                    csv: trajectory_csv(&rows),
                },
            )
        }
        PlotKind::Heatmap { input, min, max } => {
            let grid = GridData::load(input)?;
            let range = match (min, max) {
                (Some(lo), Some(hi)) => Some((*lo, *hi)),
                (None, None) => None,
                _ => bail!("give both --min and --max, or neither"),
            };
            let title = input.file_stem().map_or(String::new(), |s| s.to_string_lossy().into_owned());
            let stem = format!("{title}_heatmap.svg");
            (target(sibling(input, &stem)), plot::heatmap(&grid, &title, range))
        }
    };
    write(&svg_path, &p.svg)?;
    let csv_path = svg_path.with_extension("csv");
    write(&csv_path, &p.csv)?;
    println!("wrote {} and {}", svg_path.display(), csv_path.display());
    Ok(())
}

fn sibling(input: &Path, name: &str) -> PathBuf {
    input.parent().unwrap_or(Path::new(".")).join(name)
}
