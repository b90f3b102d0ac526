//! The BOinG optimizer: Sobol design, then an exact GP on all data until `n_min`
//! observations exist, then two-stage suggestions. A random forest picks a global
//! candidate, the forest's splits around it bound a subregion, and a local model
//! (LGPGA, or an exact GP when too few points lie outside) is optimized inside it.

use alloc::vec::Vec;

use crate::acquisition::{
    expected_improvement, log_expected_improvement, log_shift, optimize_acquisition, AcqKind, AcqOptBudget,
};
use crate::error::{Error, Result};
use crate::forest::{extract_subregion, rf_fit, ForestConfig};
use crate::gp::{gp_fit_points, FitOptions, KernelParams};
use crate::lgpga::{inducing_count, lgpga_fit, LgpgaSettings};
use crate::optimizer::{AskTell, History, Origin, Phase, StepInfo};
use crate::rng::RngState;
use crate::sobol::sobol_init;
use crate::space::{AxisBox, Dataset, SearchSpace};

/// Suggestions closer than this (max-norm, unit cube) to an observation are perturbed.
pub const DUPLICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoingConfig {
    /// `n_min = n_min_factor · d`.
    pub n_min_factor: usize,
    /// Sobol design size; `None` means `2d`.
    pub init_size: Option<usize>,
    pub global_acq: AcqKind,
    pub local_acq: AcqKind,
    pub forest: ForestConfig,
    pub lgpga: LgpgaSettings,
    /// Hyperparameter fitting for exact GPs on all data.
    pub gp_fit: FitOptions,
    pub acq_budget: AcqOptBudget,
    /// Reuse the previous iteration's hyperparameters as the first restart.
    pub warm_start: bool,
    pub budget: Option<usize>,
}

/// Hyperparameter fitting used inside optimization loops.
pub fn loop_fit_options() -> FitOptions {
    FitOptions { restarts: 3, max_iters: 50, warm_start: None }
}

impl Default for BoingConfig {
    fn default() -> Self {
        Self {
            n_min_factor: 5,
            init_size: None,
            global_acq: AcqKind::Ei,
            local_acq: AcqKind::Ei,
            forest: ForestConfig::default(),
            lgpga: LgpgaSettings { fit: loop_fit_options(), ..LgpgaSettings::default() },
            gp_fit: loop_fit_options(),
            acq_budget: AcqOptBudget::default(),
            warm_start: true,
            budget: None,
        }
    }
}

impl BoingConfig {
    pub fn n_min(&self, dim: usize) -> usize {
        (self.n_min_factor * dim).max(1)
    }

    pub fn init_size(&self, dim: usize) -> usize {
        self.init_size.unwrap_or(2 * dim).max(1)
    }
}

/// Costs mapped into the frame a surrogate is trained in, plus the matching improvement score.
#[derive(Debug, Clone)]
pub(crate) struct ScoredTargets {
    pub values: Vec<f64>,
    kind: AcqKind,
    shift: f64,
}

impl ScoredTargets {
    pub fn new(kind: AcqKind, costs: &[f64]) -> Self {
        match kind {
            AcqKind::Ei => Self { values: costs.to_vec(), kind, shift: 0.0 },
            AcqKind::LogEi => {
                let shift = log_shift(costs);
                Self { values: costs.iter().map(|c| libm::log(c + shift)).collect(), kind, shift }
            }
        }
    }

    /// Acquisition value for a prediction in the training frame against an incumbent cost.
    pub fn score(&self, mean: f64, variance: f64, incumbent_cost: f64) -> f64 {
        match self.kind {
            AcqKind::Ei => expected_improvement(mean, variance, incumbent_cost, 0.0),
            AcqKind::LogEi => log_expected_improvement(mean, variance, incumbent_cost + self.shift).unwrap_or(0.0),
        }
    }
}

pub(crate) fn min_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::INFINITY, f64::min)
}

/// Nudges `x` uniformly within 1% of the region width until it is not a duplicate.
pub(crate) fn separate_from_history(x: &mut [f64], history: &History, region: &AxisBox, rng: &mut RngState) {
    for _ in 0..16 {
        if !history.is_duplicate(x, DUPLICATE_TOL) {
            return;
        }
        for j in 0..x.len() {
            let w = region.width(j);
            x[j] = (x[j] + rng.uniform_in(-0.01, 0.01) * w).clamp(region.lo()[j], region.hi()[j]);
        }
    }
}

/// Exact GP on `points` (unit cube) maximized over `region`.
pub(crate) fn gp_suggest(
    points: &[Vec<f64>],
    costs: &[f64],
    kind: AcqKind,
    incumbent: f64,
    region: &AxisBox,
    fit: &FitOptions,
    budget: &AcqOptBudget,
    rng: &mut RngState,
) -> Result<(Vec<f64>, KernelParams)> {
    let targets = ScoredTargets::new(kind, costs);
    let gp = gp_fit_points(points, &targets.values, fit, rng)?;
    let (x, _) = optimize_acquisition(
        |x| {
            let (m, v) = gp.predict_one(x);
            targets.score(m, v, incumbent)
        },
        region,
        budget,
        rng,
    );
    Ok((x, gp.params().clone()))
}

#[derive(Debug, Clone)]
pub struct Boing {
    config: BoingConfig,
    history: History,
    rng: RngState,
    design: Vec<Vec<f64>>,
    step: StepInfo,
    region: Option<AxisBox>,
    warm_full: Option<KernelParams>,
    warm_local: Option<KernelParams>,
}

impl Boing {
    pub fn new(space: SearchSpace, config: BoingConfig, seed: u64) -> Result<Self> {
        let dim = space.dim();
        let mut rng = RngState::new(seed);
        let design = sobol_init(&space, config.init_size(dim), &mut rng);
        Ok(Self {
            history: History::new(space, config.budget),
            config,
            rng,
            design,
            step: StepInfo::whole_space(Phase::Init, Origin::Boing, 0),
            region: None,
            warm_full: None,
            warm_local: None,
        })
    }

    pub fn config(&self) -> &BoingConfig {
        &self.config
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn n_min(&self) -> usize {
        self.config.n_min(self.history.space().dim())
    }

    pub fn init_size(&self) -> usize {
        self.config.init_size(self.history.space().dim())
    }

    /// Phase the next suggestion will use, as a function of the dataset size.
    pub fn phase(&self) -> Phase {
        let n = self.history.len();
        if n < self.init_size() {
            Phase::Init
        } else if n < self.n_min() {
            Phase::FullGp
        } else {
            Phase::TwoStage
        }
    }

    /// Subregion of the latest two-stage suggestion, in search-space coordinates.
    pub fn last_subregion(&self) -> Option<AxisBox> {
        self.region.as_ref().map(|r| self.history.space().denormalize_box(r))
    }

    fn with_warm(&self, base: &FitOptions, warm: &Option<KernelParams>) -> FitOptions {
        FitOptions { warm_start: if self.config.warm_start { warm.clone() } else { None }, ..base.clone() }
    }

    fn suggest_full_gp(&mut self) -> Result<Vec<f64>> {
        let dim = self.history.space().dim();
        let unit = AxisBox::unit(dim);
        let costs = self.history.costs();
        let best = min_of(costs.iter().copied());
        let fit = self.with_warm(&self.config.gp_fit, &self.warm_full);
        let (x, params) = gp_suggest(
            self.history.unit_points(),
            &costs,
            self.config.local_acq,
            best,
            &unit,
            &fit,
            &self.config.acq_budget,
            &mut self.rng,
        )?;
        self.warm_full = Some(params);
        self.step = StepInfo::whole_space(Phase::FullGp, Origin::Boing, self.history.len());
        self.region = None;
        Ok(x)
    }

    fn suggest_two_stage(&mut self) -> Result<Vec<f64>> {
        let dim = self.history.space().dim();
        let unit = AxisBox::unit(dim);
        let n = self.history.len();
        let points = self.history.unit_points();
        let costs = self.history.costs();
        let best = min_of(costs.iter().copied());

        let global = ScoredTargets::new(self.config.global_acq, &costs);
        let forest = rf_fit(points, &global.values, &self.config.forest, &mut self.rng)?;
        let (x_g, _) = optimize_acquisition(
            |x| {
                let (m, v) = forest.predict(x);
                global.score(m, v, best)
            },
            &unit,
            &self.config.acq_budget,
            &mut self.rng,
        );
        let sub = extract_subregion(&forest, &x_g, points, self.n_min(), &unit)?;
        let region = sub.region;
        let mut is_inside = alloc::vec![false; n];
        for &i in &sub.inside {
            is_inside[i] = true;
        }
        let outside: Vec<usize> = (0..n).filter(|&i| !is_inside[i]).collect();
        let best_inside = min_of(sub.inside.iter().map(|&i| costs[i]));
        let n_u = self.config.lgpga.n_inducing.unwrap_or_else(|| inducing_count(dim, n));

        let x = if outside.len() < n_u {
            let fit = self.with_warm(&self.config.gp_fit, &self.warm_full);
            let (x, params) = gp_suggest(
                points,
                &costs,
                self.config.local_acq,
                best_inside,
                &region,
                &fit,
                &self.config.acq_budget,
                &mut self.rng,
            )?;
            self.warm_full = Some(params);
            x
        } else {
            let local = ScoredTargets::new(self.config.local_acq, &costs);
            let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
                (idx.iter().map(|&i| points[i].clone()).collect(), idx.iter().map(|&i| local.values[i]).collect())
            };
            let (xi, yi) = pick(&sub.inside);
            let (xo, yo) = pick(&outside);
            let settings = LgpgaSettings {
                fit: self.with_warm(&self.config.lgpga.fit, &self.warm_local),
                center: Some(region.center()),
                domain: Some(unit.clone()),
                ..self.config.lgpga.clone()
            };
            let model = lgpga_fit(&xi, &yi, &xo, &yo, &settings, &mut self.rng)?;
            self.warm_local = Some(model.params().clone());
            let (x, _) = optimize_acquisition(
                |x| {
                    let (m, v) = model.predict_one(x);
                    local.score(m, v, best_inside)
                },
                &region,
                &self.config.acq_budget,
                &mut self.rng,
            );
            x
        };
        self.step = StepInfo {
            phase: Phase::TwoStage,
            origin: Origin::Boing,
            volume_fraction: region.volume() / unit.volume(),
            inside_count: sub.inside.len(),
        };
        self.region = Some(region);
        Ok(x)
    }

    /// Next suggestion in unit-cube coordinates.
    pub(crate) fn suggest_unit(&mut self) -> Result<Vec<f64>> {
        self.history.check_budget()?;
        let dim = self.history.space().dim();
        let mut x = match self.phase() {
            Phase::Init => {
                let n = self.history.len();
                self.step = StepInfo::whole_space(Phase::Init, Origin::Boing, n);
                self.region = None;
                self.history.space().normalize(&self.design[n])
            }
            Phase::FullGp => self.suggest_full_gp()?,
            _ => self.suggest_two_stage()?,
        };
        let region = self.region.clone().unwrap_or_else(|| AxisBox::unit(dim));
        separate_from_history(&mut x, &self.history, &region, &mut self.rng);
        Ok(x)
    }
}

impl AskTell for Boing {
    fn space(&self) -> &SearchSpace {
        self.history.space()
    }

    fn suggest(&mut self) -> Result<Vec<f64>> {
        let x = self.suggest_unit()?;
        Ok(self.history.space().denormalize(&x))
    }

    fn tell(&mut self, point: &[f64], cost: f64) -> Result<()> {
        if point.len() != self.history.space().dim() {
            return Err(Error::DimensionMismatch { expected: self.history.space().dim(), got: point.len() });
        }
        self.history.push(point, cost)
    }

    fn last_step(&self) -> &StepInfo {
        &self.step
    }

    fn dataset(&self) -> &Dataset {
        self.history.dataset()
    }
}
