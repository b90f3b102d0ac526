//! Experiment runner: builds optimizers, fans seeds out over threads and writes
//! per-evaluation CSV rows plus one JSON summary line per run.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use boing_core::acquisition::AcqKind;
use boing_core::baselines::{BaselineConfig, ModelBo, RandomSearch};
use boing_core::boing::{Boing, BoingConfig};
use boing_core::boing_plus::{BoingPlus, BoingPlusConfig};
use boing_core::gp::FitOptions;
use boing_core::optimizer::{run_loop, AskTell, TrajectoryRow};
use boing_core::turbo::{Turbo, TurboConfig};
use boing_core::SearchSpace;
use serde::{Deserialize, Serialize};

use crate::objectives::{ObjectiveKind, ObjectiveSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Boing,
    BoingPlus,
    Gp,
    Rf,
    Turbo,
    Random,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Boing,
        OptimizerKind::BoingPlus,
        OptimizerKind::Gp,
        OptimizerKind::Rf,
        OptimizerKind::Turbo,
        OptimizerKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Boing => "boing",
            OptimizerKind::BoingPlus => "boing_plus",
            OptimizerKind::Gp => "gp",
            OptimizerKind::Rf => "rf",
            OptimizerKind::Turbo => "turbo",
            OptimizerKind::Random => "random",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| format!("unknown optimizer `{s}` (expected boing, boing_plus, gp, rf, turbo or random)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcqChoice {
    #[default]
    Ei,
    Logei,
}

impl From<AcqChoice> for AcqKind {
    fn from(a: AcqChoice) -> Self {
        match a {
            AcqChoice::Ei => AcqKind::Ei,
            AcqChoice::Logei => AcqKind::LogEi,
        }
    }
}

impl FromStr for AcqChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ei" => Ok(AcqChoice::Ei),
            "logei" => Ok(AcqChoice::Logei),
            other => Err(format!("unknown acquisition `{other}` (expected ei or logei)")),
        }
    }
}

/// Surrogate fitting knobs shared by all model-based optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub gp_restarts: usize,
    pub gp_max_iters: usize,
    pub acq_random: usize,
    pub acq_local: usize,
    pub acq_steps: usize,
    pub lgpga_max_evaluations: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let fit = boing_core::boing::loop_fit_options();
        let acq = boing_core::acquisition::AcqOptBudget::default();
        Self {
            gp_restarts: fit.restarts,
            gp_max_iters: fit.max_iters,
            acq_random: acq.n_random,
            acq_local: acq.n_local,
            acq_steps: acq.max_local_steps,
            lgpga_max_evaluations: boing_core::lgpga::LgpgaSettings::default().max_evaluations,
        }
    }
}

impl ModelSettings {
    fn fit(&self) -> FitOptions {
        FitOptions { restarts: self.gp_restarts, max_iters: self.gp_max_iters, warm_start: None }
    }

    fn acq_budget(&self) -> boing_core::acquisition::AcqOptBudget {
        boing_core::acquisition::AcqOptBudget {
            n_random: self.acq_random,
            n_local: self.acq_local,
            max_local_steps: self.acq_steps,
        }
    }

    pub fn boing_config(&self, acq: AcqKind, budget: Option<usize>) -> BoingConfig {
        let base = BoingConfig::default();
        BoingConfig {
            global_acq: acq,
            local_acq: acq,
            gp_fit: self.fit(),
            lgpga: boing_core::lgpga::LgpgaSettings {
                fit: self.fit(),
                max_evaluations: self.lgpga_max_evaluations,
                ..base.lgpga.clone()
            },
            acq_budget: self.acq_budget(),
            budget,
            ..base
        }
    }

    pub fn turbo_config(&self, acq: AcqKind, budget: Option<usize>) -> TurboConfig {
        TurboConfig { acq, fit: self.fit(), acq_budget: self.acq_budget(), budget, ..TurboConfig::default() }
    }

    pub fn baseline_config(&self, acq: AcqKind, budget: Option<usize>) -> BaselineConfig {
        BaselineConfig { acq, fit: self.fit(), acq_budget: self.acq_budget(), budget, ..BaselineConfig::default() }
    }
}

pub fn build_optimizer(
    kind: OptimizerKind,
    space: SearchSpace,
    acq: AcqKind,
    budget: Option<usize>,
    seed: u64,
    settings: &ModelSettings,
) -> boing_core::Result<Box<dyn AskTell + Send>> {
    Ok(match kind {
        OptimizerKind::Boing => Box::new(Boing::new(space, settings.boing_config(acq, budget), seed)?),
        OptimizerKind::BoingPlus => {
            let config = BoingPlusConfig {
                boing: settings.boing_config(acq, budget),
                turbo: settings.turbo_config(acq, budget),
                ..BoingPlusConfig::default()
            };
            Box::new(BoingPlus::new(space, config, seed)?)
        }
        OptimizerKind::Gp => Box::new(ModelBo::gp(space, settings.baseline_config(acq, budget), seed)),
        OptimizerKind::Rf => Box::new(ModelBo::rf(space, settings.baseline_config(acq, budget), seed)),
        OptimizerKind::Turbo => Box::new(Turbo::new(space, settings.turbo_config(acq, budget), seed)?),
        OptimizerKind::Random => Box::new(RandomSearch::new(space, budget, seed)),
    })
}

/// One experiment: an optimizer on an objective over a range of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub objective: ObjectiveKind,
    pub dim: usize,
    pub optimizer: OptimizerKind,
    pub budget: usize,
    pub seeds: usize,
    pub seed_base: u64,
    pub acq: AcqChoice,
    pub out: PathBuf,
    /// Write 0 for wall-time columns so identical configs give identical bytes.
    pub no_timing: bool,
    /// Worker threads; `None` uses `BOING_THREADS` or the available parallelism.
    pub threads: Option<usize>,
    /// Overrides the objective's standard domain.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub model: ModelSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::Branin,
            dim: 2,
            optimizer: OptimizerKind::Boing,
            budget: 100,
            seeds: 1,
            seed_base: 0,
            acq: AcqChoice::Ei,
            out: PathBuf::from("results"),
            no_timing: false,
            threads: None,
            bounds: None,
            model: ModelSettings::default(),
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Optimizer { seed: u64, error: boing_core::Error },
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Optimizer { seed, error } => write!(f, "run with seed {seed} failed: {error}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

impl RunConfig {
    pub fn objective_spec(&self) -> Result<ObjectiveSpec, RunError> {
        let spec = ObjectiveSpec::new(self.objective, self.dim).map_err(RunError::Config)?;
        match &self.bounds {
            Some(b) => spec.with_bounds(b.clone()).map_err(RunError::Config),
            None => Ok(spec),
        }
    }

    pub fn validate(&self) -> Result<ObjectiveSpec, RunError> {
        let spec = self.objective_spec()?;
        spec.space().map_err(|e| RunError::Config(e.to_string()))?;
        let min_budget = match self.optimizer {
            OptimizerKind::Random => 1,
            _ => 2 * spec.dim,
        };
        if self.budget < min_budget {
            return Err(RunError::Config(format!(
                "budget {} is below the initial design size {min_budget} of {}",
                self.budget, self.optimizer
            )));
        }
        if self.seeds == 0 {
            return Err(RunError::Config("at least one seed is required".into()));
        }
        Ok(spec)
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}_{}d", self.optimizer, self.objective, self.dim)
    }

    pub fn run_id(&self, seed: u64) -> String {
        format!("{}-{}-{}d-s{seed}", self.optimizer, self.objective, self.dim)
    }
}

/// Worker count: explicit request, else `BOING_THREADS`, else available parallelism.
pub fn thread_count(requested: Option<usize>, jobs: usize) -> usize {
    let from_env = std::env::var("BOING_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    let cap =
        requested.or(from_env).unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.clamp(1, jobs.max(1))
}

/// Result of one seeded run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<TrajectoryRow>,
    pub total_wall_ms: f64,
}

/// Runs one seed in-process; `no_timing` replaces the clock with a constant.
pub fn run_seed(config: &RunConfig, spec: &ObjectiveSpec, seed: u64) -> Result<SeedRun, RunError> {
    let space = spec.space().map_err(|e| RunError::Config(e.to_string()))?;
    let mut opt = build_optimizer(config.optimizer, space, config.acq.into(), Some(config.budget), seed, &config.model)
        .map_err(|error| RunError::Optimizer { seed, error })?;
    let start = Instant::now();
    let clock = || if config.no_timing { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
    let rows = run_loop(opt.as_mut(), |x| spec.evaluate(x), config.budget, clock)
        .map_err(|error| RunError::Optimizer { seed, error })?;
    let total_wall_ms = if config.no_timing { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
    Ok(SeedRun { seed, rows, total_wall_ms })
}

/// Seeds `seed_base .. seed_base + seeds` across worker threads; `on_done` sees runs in seed order.
pub fn run_seeds<F>(config: &RunConfig, spec: &ObjectiveSpec, mut on_done: F) -> Result<(), RunError>
where
    F: FnMut(SeedRun) -> Result<(), RunError>,
{
    let n = config.seeds;
    let workers = thread_count(config.threads, n);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<SeedRun, RunError>)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let seed = config.seed_base + i as u64;
                if tx.send((i, run_seed(config, spec, seed))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        let mut failure = None;
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&emitted) {
                emitted += 1;
                if failure.is_some() {
                    continue;
                }
                match result.and_then(&mut on_done) {
                    Ok(()) => {}
                    Err(e) => {
                        failure = Some(e);
                        next.store(n, Ordering::SeqCst);
                    }
                }
            }
        }
        failure.map_or(Ok(()), Err)
    })
}

/// Float formatting used in all output files: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.16e}")
}

pub fn csv_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["run_id", "optimizer", "objective", "seed", "t"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=dim).map(|j| format!("x_{j}")));
    h.extend(
        ["y", "incumbent", "phase", "origin", "subregion_volume_fraction", "inside_count", "iter_wall_ms"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

pub fn csv_record(config: &RunConfig, seed: u64, row: &TrajectoryRow) -> Vec<String> {
    let mut r = vec![
        config.run_id(seed),
        config.optimizer.to_string(),
        config.objective.to_string(),
        seed.to_string(),
        row.t.to_string(),
    ];
    r.extend(row.point.iter().map(|v| fmt_f64(*v)));
    r.push(fmt_f64(row.cost));
    r.push(fmt_f64(row.incumbent));
    r.push(row.step.phase.as_str().into());
    r.push(row.step.origin.as_str().into());
    r.push(fmt_f64(row.step.volume_fraction));
    r.push(row.step.inside_count.to_string());
    r.push(fmt_f64(row.wall_ms));
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub optimizer: String,
    pub objective: String,
    pub dim: usize,
    pub seed: u64,
    pub budget: usize,
    pub final_incumbent: f64,
    pub final_regret: f64,
    pub total_wall_ms: f64,
    pub phase_counts: BTreeMap<String, usize>,
    pub origin_counts: BTreeMap<String, usize>,
    /// Origin of the evaluation that set each new incumbent.
    pub incumbent_origins: BTreeMap<String, usize>,
}

pub fn summarize(config: &RunConfig, spec: &ObjectiveSpec, run: &SeedRun) -> RunSummary {
    let mut phase_counts = BTreeMap::new();
    let mut origin_counts = BTreeMap::new();
    let mut incumbent_origins = BTreeMap::new();
    let mut best = f64::INFINITY;
    for row in &run.rows {
        *phase_counts.entry(row.step.phase.as_str().to_string()).or_insert(0) += 1;
        *origin_counts.entry(row.step.origin.as_str().to_string()).or_insert(0) += 1;
        if row.cost < best {
            best = row.cost;
            *incumbent_origins.entry(row.step.origin.as_str().to_string()).or_insert(0) += 1;
        }
    }
    let final_incumbent = run.rows.last().map_or(f64::NAN, |r| r.incumbent);
    RunSummary {
        run_id: config.run_id(run.seed),
        optimizer: config.optimizer.to_string(),
        objective: config.objective.to_string(),
        dim: spec.dim,
        seed: run.seed,
        budget: config.budget,
        final_incumbent,
        final_regret: spec.regret(final_incumbent),
        total_wall_ms: run.total_wall_ms,
        phase_counts,
        origin_counts,
        incumbent_origins,
    }
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub summaries: Vec<RunSummary>,
}

/// Runs every seed and writes `<stem>.csv` and `<stem>.jsonl` under `config.out`.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentFiles, RunError> {
    let spec = config.validate()?;
    fs::create_dir_all(&config.out)?;
    let csv_path = config.out.join(format!("{}.csv", config.file_stem()));
    let summary_path = config.out.join(format!("{}.jsonl", config.file_stem()));
    let mut csv = csv::Writer::from_writer(BufWriter::new(File::create(&csv_path)?));
    let mut jsonl = BufWriter::new(File::create(&summary_path)?);
    csv.write_record(csv_header(spec.dim))?;
    let mut summaries = Vec::new();
    run_seeds(config, &spec, |run| {
        for row in &run.rows {
            csv.write_record(csv_record(config, run.seed, row))?;
        }
        let summary = summarize(config, &spec, &run);
        serde_json::to_writer(&mut jsonl, &summary).map_err(|e| RunError::Io(e.into()))?;
        jsonl.write_all(b"\n")?;
        summaries.push(summary);
        Ok(())
    })?;
    csv.flush()?;
    jsonl.flush()?;
    Ok(ExperimentFiles { csv: csv_path, summary: summary_path, summaries })
}

/// Loads a JSON run configuration; missing fields take their defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

/// Share of incumbent improvements by origin, over a set of run summaries.
pub fn incumbent_origin_shares(summaries: &[RunSummary]) -> HashMap<String, f64> {
    let mut totals: HashMap<String, usize> = HashMap::new();
    for s in summaries {
        for (k, v) in &s.incumbent_origins {
            *totals.entry(k.clone()).or_insert(0) += v;
        }
    }
    let sum: usize = totals.values().sum();
    totals.into_iter().map(|(k, v)| (k, v as f64 / sum.max(1) as f64)).collect()
}
