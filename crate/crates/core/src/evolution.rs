//! Generational runs: multi-trial evaluation, champion archiving,
//! post-evaluation and controller selection.
//!
//! Every trial seed is derived from `(base seed, namespace, generation,
//! genome index, trial index)` by a counter-based mixer, so results never
//! depend on evaluation order or thread count.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};
use crate::neat::{self, Genome, NeatParams, Population};
use crate::sensors::{SensorConfig, INPUT_COUNT};
use crate::sim::SimConfig;
use crate::task::{run_trial, TaskConfig, TaskKind};

/// Output count of every swarm controller: forward speed and turn rate.
pub const OUTPUT_COUNT: usize = 2;

/// Disjoint seed streams. Post-evaluation never reuses an evolution seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedNamespace {
    Evolve = 1,
    PostEval = 2,
    Reproduce = 3,
    Scenario = 4,
    Mission = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed for one trial.
pub fn derive_seed(base: u64, ns: SeedNamespace, generation: u64, genome: u64, trial: u64) -> u64 {
    let mut h = splitmix64(base);
    for x in [ns as u64, generation, genome, trial] {
        h = splitmix64(h ^ x);
    }
    h
}

/// Where a genome's trial seeds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedKey {
    pub base: u64,
    pub namespace: SeedNamespace,
    pub generation: u64,
    pub genome: u64,
}

impl SeedKey {
    pub fn trial(&self, t: usize) -> u64 {
        derive_seed(self.base, self.namespace, self.generation, self.genome, t as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSpec {
    pub task: TaskConfig,
    pub trials: usize,
    pub sigmoid_slope: f64,
}

impl EvaluationSpec {
    pub fn new(task: TaskConfig, trials: usize, sigmoid_slope: f64) -> Result<Self> {
        if trials == 0 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()).into());
        }
        if task.steps() == 0 {
            return Err(ConfigError::Invalid("trial duration must be at least one step".into()).into());
        }
        Ok(EvaluationSpec {
            task,
            trials,
            sigmoid_slope,
        })
    }
}

/// Score of every trial; a trial whose setup fails scores 0.
pub fn trial_scores(genome: &Genome, spec: &EvaluationSpec, key: SeedKey) -> Vec<f64> {
    (0..spec.trials)
        .map(|t| {
            let seed = key.trial(t);
            match run_trial(genome, spec.sigmoid_slope, &spec.task, seed) {
                Ok(o) => o.fitness,
                Err(e) => {
                    warn!("trial setup failed (seed {seed}): {e}");
                    0.0
                }
            }
        })
        .collect()
}

/// Mean trial score.
pub fn evaluate_genome(genome: &Genome, spec: &EvaluationSpec, key: SeedKey) -> f64 {
    mean(&trial_scores(genome, spec, key))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Evaluate a whole generation, optionally in parallel. Results are
/// identical either way.
pub fn evaluate_generation(
    genomes: &[Genome],
    spec: &EvaluationSpec,
    base: u64,
    generation: u64,
    parallel: bool,
) -> Vec<f64> {
    let eval = |(i, g): (usize, &Genome)| {
        let key = SeedKey {
            base,
            namespace: SeedNamespace::Evolve,
            generation,
            genome: i as u64,
        };
        evaluate_genome(g, spec, key)
    };
    if parallel {
        genomes.par_iter().enumerate().map(eval).collect()
    } else {
        genomes.iter().enumerate().map(eval).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostEvalStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostEvaluation {
    pub mean: f64,
    pub std: f64,
    pub scores: Vec<f64>,
}

impl PostEvaluation {
    pub fn stats(&self) -> PostEvalStats {
        PostEvalStats {
            mean: self.mean,
            std: self.std,
        }
    }
}

/// Re-score a controller on `n` fresh trials. Every controller sees the same
/// post-evaluation trials for a given base seed.
pub fn post_evaluate(genome: &Genome, spec: &EvaluationSpec, n: usize, base: u64) -> PostEvaluation {
    assert!(n >= 1, "post-evaluation needs at least one trial");
    let key = SeedKey {
        base,
        namespace: SeedNamespace::PostEval,
        generation: 0,
        genome: 0,
    };
    let spec = EvaluationSpec {
        trials: n,
        ..spec.clone()
    };
    let scores = trial_scores(genome, &spec, key);
    PostEvaluation {
        mean: mean(&scores),
        std: std_dev(&scores),
        scores,
    }
}

/// Run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub task: TaskKind,
    pub seed: u64,
    /// Evaluated generations; defaults to the task's budget.
    pub generations: Option<usize>,
    pub trials: usize,
    /// Post-evaluation trials per generation champion (0 disables).
    pub post_eval: usize,
    /// Inclusive robot count range per trial.
    pub robots: Option<[usize; 2]>,
    /// Trial length override (seconds).
    pub duration: Option<f64>,
    pub parallel: bool,
    pub neat: NeatParams,
    pub sim: SimConfig,
    pub sensors: SensorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: TaskKind::Homing,
            seed: 1,
            generations: None,
            trials: 10,
            post_eval: 0,
            robots: None,
            duration: None,
            parallel: true,
            neat: NeatParams::default(),
            sim: SimConfig::default(),
            sensors: SensorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn for_task(task: TaskKind) -> Self {
        RunConfig {
            task,
            ..RunConfig::default()
        }
    }

    pub fn generations(&self) -> usize {
        self.generations.unwrap_or(self.task.default_generations())
    }

    pub fn task_config(&self) -> TaskConfig {
        let mut t = TaskConfig::default_for(self.task);
        if let Some([lo, hi]) = self.robots {
            t.robots_min = lo;
            t.robots_max = hi;
        }
        if let Some(d) = self.duration {
            t.duration = d;
        }
        t.sim = self.sim;
        t.sensors = self.sensors;
        t
    }

    pub fn evaluation_spec(&self) -> Result<EvaluationSpec> {
        EvaluationSpec::new(self.task_config(), self.trials, self.neat.sigmoid_slope)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always serializable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub champion: Genome,
    /// Champion's evolution-time fitness.
    pub raw_fitness: f64,
    pub population_mean: f64,
    pub post: Option<PostEvalStats>,
}

/// Append-only record of one evolutionary run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArchive {
    pub seed: u64,
    pub config: RunConfig,
    pub records: Vec<GenerationRecord>,
    /// Simulated trials executed during evolution.
    pub trials_run: u64,
}

impl RunArchive {
    /// Running maximum of champion raw fitness.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.max(r.raw_fitness);
                best
            })
            .collect()
    }

    /// Best post-evaluated champion; ties go to the earlier generation.
    /// Falls back to raw fitness when nothing was post-evaluated.
    pub fn best(&self) -> Option<&GenerationRecord> {
        let evaluated = self.records.iter().any(|r| r.post.is_some());
        let key = |r: &GenerationRecord| {
            if evaluated {
                r.post.map(|p| p.mean)
            } else {
                Some(r.raw_fitness)
            }
        };
        let mut best: Option<(&GenerationRecord, f64)> = None;
        for r in &self.records {
            if let Some(v) = key(r) {
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some((r, v));
                }
            }
        }
        best.map(|(r, _)| r)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("generation,raw_fitness,population_mean,best_so_far,post_mean,post_std\n");
        for (r, b) in self.records.iter().zip(self.best_so_far()) {
            let (pm, ps) = match r.post {
                Some(p) => (p.mean.to_string(), p.std.to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.generation, r.raw_fitness, r.population_mean, b, pm, ps
            );
        }
        s
    }

    /// Write `config.toml`, `summary.csv` and one `gen_NNNN.genome` per
    /// generation into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("config.toml", &self.config.to_toml())?;
        write("summary.csv", &self.summary_csv())?;
        for r in &self.records {
            neat::io::save(&r.champion, &dir.join(genome_file_name(r.generation)))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = RunConfig::load(&dir.join("config.toml"))?;
        let summary_path = dir.join("summary.csv");
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let bad = |msg: String| Error::Parse {
            path: summary_path.clone(),
            msg,
        };
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("line {}: expected 6 fields", n + 1)));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 1)));
            let generation: usize = f[0].parse().map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
            let post = if f[4].is_empty() {
                None
            } else {
                Some(PostEvalStats {
                    mean: num(f[4])?,
                    std: num(f[5])?,
                })
            };
            records.push(GenerationRecord {
                generation,
                champion: neat::io::load(&dir.join(genome_file_name(generation)))?,
                raw_fitness: num(f[1])?,
                population_mean: num(f[2])?,
                post,
            });
        }
        Ok(RunArchive {
            seed: config.seed,
            config,
            records,
            trials_run: 0,
        })
    }
}

pub fn genome_file_name(generation: usize) -> String {
    format!("gen_{generation:04}.genome")
}

/// Run a full evolution. `observer` sees each record as it is archived.
///
/// `generations` counts evaluated generations; a budget of 0 still
/// evaluates and archives the initial population's champion.
pub fn run_evolution_with<F>(cfg: &RunConfig, mut observer: F) -> Result<RunArchive>
where
    F: FnMut(&GenerationRecord),
{
    let spec = cfg.evaluation_spec()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SeedNamespace::Reproduce, 0, 0, 0));
    let mut pop = Population::new(cfg.neat, INPUT_COUNT, OUTPUT_COUNT, &mut rng);
    let counter = AtomicU64::new(0);
    let mut records = Vec::new();
    let total = cfg.generations().max(1);
    let mut post_cache: HashMap<String, PostEvalStats> = HashMap::new();

    for gen in 0..total {
        if gen > 0 {
            pop.next_generation(&mut rng);
        }
        let fits = evaluate_generation(pop.genomes(), &spec, cfg.seed, gen as u64, cfg.parallel);
        counter.fetch_add((fits.len() * spec.trials) as u64, Ordering::Relaxed);
        for (g, f) in pop.genomes_mut().iter_mut().zip(&fits) {
            g.fitness = Some(*f);
        }
        let best = pop.champion_index().expect("population is never empty");
        let champion = pop.genomes()[best].clone();
        let post = (cfg.post_eval > 0).then(|| {
            *post_cache
                .entry(behaviour_key(&champion))
                .or_insert_with(|| post_evaluate(&champion, &spec, cfg.post_eval, cfg.seed).stats())
        });
        let record = GenerationRecord {
            generation: gen,
            raw_fitness: fits[best],
            population_mean: mean(&fits),
            champion,
            post,
        };
        info!(
            "{} seed {} gen {}: best {:.4} mean {:.4} species {}",
            cfg.task,
            cfg.seed,
            gen,
            record.raw_fitness,
            record.population_mean,
            pop.species().len()
        );
        observer(&record);
        records.push(record);
    }

    Ok(RunArchive {
        seed: cfg.seed,
        config: cfg.clone(),
        records,
        trials_run: counter.into_inner(),
    })
}

pub fn run_evolution(cfg: &RunConfig) -> Result<RunArchive> {
    run_evolution_with(cfg, |_| {})
}

/// Genome text without the fitness line; equal keys behave identically.
fn behaviour_key(g: &Genome) -> String {
    neat::io::to_text(&Genome {
        fitness: None,
        ..g.clone()
    })
}

/// Post-evaluate every generation champion of an archive in place and
/// return the per-trial scores, one vector per record.
///
/// Every champion faces the same trials, so a champion carried over
/// unchanged from an earlier generation is scored only once.
pub fn post_evaluate_archive(archive: &mut RunArchive, n: usize, parallel: bool) -> Result<Vec<Vec<f64>>> {
    let spec = archive.config.evaluation_spec()?;
    let seed = archive.seed;
    let mut unique: Vec<&Genome> = Vec::new();
    let mut index = HashMap::new();
    let slots: Vec<usize> = archive
        .records
        .iter()
        .map(|r| {
            *index.entry(behaviour_key(&r.champion)).or_insert_with(|| {
                unique.push(&r.champion);
                unique.len() - 1
            })
        })
        .collect();
    let eval = |g: &&Genome| post_evaluate(g, &spec, n, seed);
    let results: Vec<PostEvaluation> = if parallel {
        unique.par_iter().map(eval).collect()
    } else {
        unique.iter().map(eval).collect()
    };
    for (r, &k) in archive.records.iter_mut().zip(&slots) {
        r.post = Some(results[k].stats());
    }
    Ok(slots.iter().map(|&k| results[k].scores.clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub run_seed: u64,
    pub generation: usize,
    pub score: f64,
    pub genome: Genome,
}

/// Best-of-run controllers, top three across runs by post-evaluation mean.
/// Ties go to the earlier generation, then the lower run seed.
pub fn select_top(archives: &[RunArchive]) -> Vec<Selected> {
    if archives.len() < 3 {
        warn!("only {} archive(s); returning every best-of-run controller", archives.len());
    }
    let mut best: Vec<Selected> = archives
        .iter()
        .filter_map(|a| {
            a.best().map(|r| Selected {
                run_seed: a.seed,
                generation: r.generation,
                score: r.post.map_or(r.raw_fitness, |p| p.mean),
                genome: r.champion.clone(),
            })
        })
        .collect();
    best.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.generation.cmp(&b.generation))
            .then(a.run_seed.cmp(&b.run_seed))
    });
    best.truncate(3);
    best
}
