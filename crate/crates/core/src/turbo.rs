//! Single trust-region local Bayesian optimization.
//!
//! A box centered at the local incumbent, with side `L·w_j` where `w` are the GP
//! lengthscales divided by their geometric mean, is searched with EI. `L` doubles
//! after `success_tol` consecutive successes, halves after `failure_tol` consecutive
//! failures, and the region asks for a restart once `L` drops below `length_min`.
//! Coordinates here are relative to the region's `bounds` box.

use alloc::vec::Vec;

use crate::acquisition::{optimize_acquisition, AcqKind, AcqOptBudget};
use crate::boing::{loop_fit_options, min_of, separate_from_history, ScoredTargets, DUPLICATE_TOL};
use crate::error::{Error, Result};
use crate::gp::{gp_fit_points, FitOptions, KernelParams};
use crate::optimizer::{AskTell, History, Origin, Phase, StepInfo};
use crate::rng::RngState;
use crate::sobol::Sobol;
use crate::space::{AxisBox, Dataset, SearchSpace};

/// Lengthscale range used for the box shape; the GP fit itself is not restricted.
pub const WEIGHT_LENGTHSCALES: (f64, f64) = (0.005, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TurboConfig {
    pub length_init: f64,
    pub length_max: f64,
    pub length_min: f64,
    pub success_tol: usize,
    /// `None` means `max(4, d)`.
    pub failure_tol: Option<usize>,
    /// Local points needed before the GP is used; `None` means `2d`.
    pub min_local: Option<usize>,
    pub acq: AcqKind,
    pub fit: FitOptions,
    pub acq_budget: AcqOptBudget,
    pub warm_start: bool,
    pub budget: Option<usize>,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            length_init: 0.8,
            length_max: 1.6,
            length_min: 1.0 / 16.0,
            success_tol: 3,
            failure_tol: None,
            min_local: None,
            acq: AcqKind::Ei,
            fit: loop_fit_options(),
            acq_budget: AcqOptBudget::default(),
            warm_start: true,
            budget: None,
        }
    }
}

impl TurboConfig {
    pub fn failure_tol(&self, dim: usize) -> usize {
        self.failure_tol.unwrap_or(dim.max(4))
    }

    pub fn min_local(&self, dim: usize) -> usize {
        self.min_local.unwrap_or(2 * dim).max(1)
    }
}

/// State of one trust region living inside `bounds` (unit-cube coordinates of the search space).
#[derive(Debug, Clone)]
pub struct TrustRegion {
    bounds: AxisBox,
    local: Vec<usize>,
    length: f64,
    successes: usize,
    failures: usize,
    sobol: Sobol,
    warm: Option<KernelParams>,
    last_box: AxisBox,
}

impl TrustRegion {
    /// `local` indexes the history entries that seed the region.
    pub fn new(bounds: AxisBox, local: Vec<usize>, config: &TurboConfig, rng: &mut RngState) -> Self {
        let dim = bounds.dim();
        Self {
            last_box: bounds.clone(),
            bounds,
            local,
            length: config.length_init,
            successes: 0,
            failures: 0,
            sobol: Sobol::new(dim, rng),
            warm: None,
        }
    }

    pub fn bounds(&self) -> &AxisBox {
        &self.bounds
    }

    pub fn local(&self) -> &[usize] {
        &self.local
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn successes(&self) -> usize {
        self.successes
    }

    pub fn failures(&self) -> usize {
        self.failures
    }

    /// Trust region box of the latest suggestion, unit-cube coordinates.
    pub fn last_box(&self) -> &AxisBox {
        &self.last_box
    }

    pub fn needs_restart(&self, config: &TurboConfig) -> bool {
        self.length < config.length_min
    }

    fn to_local(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, v)| (v - self.bounds.lo()[j]) / self.bounds.width(j)).collect()
    }

    fn to_global(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, v)| {
                (self.bounds.lo()[j] + v * self.bounds.width(j)).clamp(self.bounds.lo()[j], self.bounds.hi()[j])
            })
            .collect()
    }

    /// Box of side `length·weights_j` centered at `center`, clipped to the unit cube.
    pub fn region_box(&self, center: &[f64], weights: &[f64]) -> AxisBox {
        let lo = center.iter().zip(weights).map(|(c, w)| (c - 0.5 * self.length * w).max(0.0)).collect();
        let hi = center.iter().zip(weights).map(|(c, w)| (c + 0.5 * self.length * w).min(1.0)).collect();
        AxisBox::new(lo, hi).unwrap_or_else(|_| AxisBox::unit(center.len()))
    }

    /// Applies one outcome to the success/failure streaks and resizes the region.
    pub fn record_outcome(&mut self, success: bool, config: &TurboConfig) {
        let dim = self.bounds.dim();
        if success {
            self.successes += 1;
            self.failures = 0;
        } else {
            self.failures += 1;
            self.successes = 0;
        }
        if self.successes >= config.success_tol {
            self.length = (2.0 * self.length).min(config.length_max);
            self.successes = 0;
        } else if self.failures >= config.failure_tol(dim) {
            self.length *= 0.5;
            self.failures = 0;
        }
    }

    /// Records an evaluation made from this region's suggestion.
    pub fn observe(&mut self, index: usize, history: &History, config: &TurboConfig) {
        let dim = self.bounds.dim();
        let costs = history.dataset();
        if self.local.len() >= config.min_local(dim) {
            let best = min_of(self.local.iter().map(|&i| costs.get(i).cost));
            let y = costs.get(index).cost;
            self.record_outcome(y < best - 1e-3 * best.abs(), config);
        }
        self.local.push(index);
    }

    /// Next point in unit-cube coordinates of the search space.
    pub fn suggest(&mut self, history: &History, config: &TurboConfig, rng: &mut RngState) -> Result<Vec<f64>> {
        let dim = self.bounds.dim();
        let points = history.unit_points();
        let costs = history.dataset();
        let local_x: Vec<Vec<f64>> = self.local.iter().map(|&i| self.to_local(&points[i])).collect();
        let local_y: Vec<f64> = self.local.iter().map(|&i| costs.get(i).cost).collect();
        let center = local_y
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| local_x[i].clone())
            .unwrap_or_else(|| alloc::vec![0.5; dim]);

        let z = if self.local.len() < config.min_local(dim) {
            let tr = self.region_box(&center, &alloc::vec![1.0; dim]);
            let u = self.sobol.next_unit();
            self.last_box = tr.clone();
            (0..dim).map(|j| tr.lo()[j] + u[j] * tr.width(j)).collect()
        } else {
            let fit = FitOptions {
                warm_start: if config.warm_start { self.warm.clone() } else { None },
                ..config.fit.clone()
            };
            let targets = ScoredTargets::new(config.acq, &local_y);
            let gp = gp_fit_points(&local_x, &targets.values, &fit, rng)?;
            let params = gp.params().clone();
            let weights = region_weights(&params.lengthscales);
            let tr = self.region_box(&center, &weights);
            let best = min_of(local_y.iter().copied());
            let (z, _) = optimize_acquisition(
                |x| {
                    let (m, v) = gp.predict_one(x);
                    targets.score(m, v, best)
                },
                &tr,
                &config.acq_budget,
                rng,
            );
            self.warm = Some(params);
            self.last_box = tr;
            z
        };
        let mut x = self.to_global(&z);
        let region = AxisBox::new(self.to_global(self.last_box.lo()), self.to_global(self.last_box.hi()))
            .unwrap_or_else(|_| self.bounds.clone());
        if history.is_duplicate(&x, DUPLICATE_TOL) {
            separate_from_history(&mut x, history, &region, rng);
        }
        Ok(x)
    }
}

/// Lengthscales clamped to `WEIGHT_LENGTHSCALES`, divided by their geometric mean.
pub fn region_weights(lengthscales: &[f64]) -> Vec<f64> {
    let (lo, hi) = WEIGHT_LENGTHSCALES;
    let ls: Vec<f64> = lengthscales.iter().map(|l| l.clamp(lo, hi)).collect();
    let geo = libm::exp(ls.iter().map(|l| libm::log(*l)).sum::<f64>() / ls.len() as f64);
    ls.iter().map(|l| l / geo).collect()
}

/// Trust-region BO over the whole space, restarting with a fresh design when the region collapses.
#[derive(Debug, Clone)]
pub struct Turbo {
    config: TurboConfig,
    history: History,
    rng: RngState,
    region: TrustRegion,
    step: StepInfo,
    restarts: usize,
}

impl Turbo {
    pub fn new(space: SearchSpace, config: TurboConfig, seed: u64) -> Result<Self> {
        let mut rng = RngState::new(seed);
        let dim = space.dim();
        let region = TrustRegion::new(AxisBox::unit(dim), Vec::new(), &config, &mut rng);
        Ok(Self {
            history: History::new(space, config.budget),
            config,
            rng,
            region,
            step: StepInfo::whole_space(Phase::Turbo, Origin::Turbo, 0),
            restarts: 0,
        })
    }

    pub fn region(&self) -> &TrustRegion {
        &self.region
    }

    pub fn restarts(&self) -> usize {
        self.restarts
    }
}

impl AskTell for Turbo {
    fn space(&self) -> &SearchSpace {
        self.history.space()
    }

    fn suggest(&mut self) -> Result<Vec<f64>> {
        self.history.check_budget()?;
        let dim = self.history.space().dim();
        if self.region.needs_restart(&self.config) {
            self.region = TrustRegion::new(AxisBox::unit(dim), Vec::new(), &self.config, &mut self.rng);
            self.restarts += 1;
        }
        let x = self.region.suggest(&self.history, &self.config, &mut self.rng)?;
        let tr = self.region.last_box();
        self.step = StepInfo {
            phase: Phase::Turbo,
            origin: Origin::Turbo,
            volume_fraction: tr.volume(),
            inside_count: self.region.local().len(),
        };
        Ok(self.history.space().denormalize(&x))
    }

    fn tell(&mut self, point: &[f64], cost: f64) -> Result<()> {
        if point.len() != self.history.space().dim() {
            return Err(Error::DimensionMismatch { expected: self.history.space().dim(), got: point.len() });
        }
        self.history.push(point, cost)?;
        let index = self.history.len() - 1;
        self.region.observe(index, &self.history, &self.config);
        Ok(())
    }

    fn last_step(&self) -> &StepInfo {
        &self.step
    }

    fn dataset(&self) -> &Dataset {
        self.history.dataset()
    }
}
