//! Reference optimizers: exact-GP BO, random-forest BO and uniform random search.

use alloc::vec::Vec;

use crate::acquisition::{optimize_acquisition, AcqKind, AcqOptBudget};
use crate::boing::{gp_suggest, loop_fit_options, min_of, separate_from_history, ScoredTargets};
use crate::error::{Error, Result};
use crate::forest::{rf_fit, ForestConfig};
use crate::gp::{FitOptions, KernelParams};
use crate::optimizer::{AskTell, History, Origin, Phase, StepInfo};
use crate::rng::RngState;
use crate::sobol::sobol_init;
use crate::space::{AxisBox, Dataset, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    /// Sobol design size; `None` means `2d`.
    pub init_size: Option<usize>,
    pub acq: AcqKind,
    pub fit: FitOptions,
    pub forest: ForestConfig,
    pub acq_budget: AcqOptBudget,
    pub warm_start: bool,
    pub budget: Option<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            init_size: None,
            acq: AcqKind::Ei,
            fit: loop_fit_options(),
            forest: ForestConfig::default(),
            acq_budget: AcqOptBudget::default(),
            warm_start: true,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Surrogate {
    Gp,
    Rf,
}

/// Sobol design followed by EI on a surrogate fitted to all observations over the whole space.
#[derive(Debug, Clone)]
pub struct ModelBo {
    surrogate: Surrogate,
    config: BaselineConfig,
    history: History,
    rng: RngState,
    design: Vec<Vec<f64>>,
    step: StepInfo,
    warm: Option<KernelParams>,
}

impl ModelBo {
    fn new(surrogate: Surrogate, space: SearchSpace, config: BaselineConfig, seed: u64) -> Self {
        let mut rng = RngState::new(seed);
        let n_init = config.init_size.unwrap_or(2 * space.dim()).max(1);
        let design = sobol_init(&space, n_init, &mut rng);
        let origin = match surrogate {
            Surrogate::Gp => Origin::Gp,
            Surrogate::Rf => Origin::Rf,
        };
        Self {
            surrogate,
            history: History::new(space, config.budget),
            config,
            rng,
            design,
            step: StepInfo::whole_space(Phase::Init, origin, 0),
            warm: None,
        }
    }

    /// Exact-GP BO with EI.
    pub fn gp(space: SearchSpace, config: BaselineConfig, seed: u64) -> Self {
        Self::new(Surrogate::Gp, space, config, seed)
    }

    /// Random-forest BO with EI on the tree-spread variance.
    pub fn rf(space: SearchSpace, config: BaselineConfig, seed: u64) -> Self {
        Self::new(Surrogate::Rf, space, config, seed)
    }
}

impl AskTell for ModelBo {
    fn space(&self) -> &SearchSpace {
        self.history.space()
    }

    fn suggest(&mut self) -> Result<Vec<f64>> {
        self.history.check_budget()?;
        let n = self.history.len();
        let dim = self.history.space().dim();
        let unit = AxisBox::unit(dim);
        let origin = self.step.origin;
        if n < self.design.len() {
            self.step = StepInfo::whole_space(Phase::Init, origin, n);
            return Ok(self.design[n].clone());
        }
        let costs = self.history.costs();
        let best = min_of(costs.iter().copied());
        let mut x = match self.surrogate {
            Surrogate::Gp => {
                let fit = FitOptions {
                    warm_start: if self.config.warm_start { self.warm.clone() } else { None },
                    ..self.config.fit.clone()
                };
                let (x, params) = gp_suggest(
                    self.history.unit_points(),
                    &costs,
                    self.config.acq,
                    best,
                    &unit,
                    &fit,
                    &self.config.acq_budget,
                    &mut self.rng,
                )?;
                self.warm = Some(params);
                self.step = StepInfo::whole_space(Phase::Gp, origin, n);
                x
            }
            Surrogate::Rf => {
                let targets = ScoredTargets::new(self.config.acq, &costs);
                let forest = rf_fit(self.history.unit_points(), &targets.values, &self.config.forest, &mut self.rng)?;
                let (x, _) = optimize_acquisition(
                    |x| {
                        let (m, v) = forest.predict(x);
                        targets.score(m, v, best)
                    },
                    &unit,
                    &self.config.acq_budget,
                    &mut self.rng,
                );
                self.step = StepInfo::whole_space(Phase::Rf, origin, n);
                x
            }
        };
        separate_from_history(&mut x, &self.history, &unit, &mut self.rng);
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

/// Independent uniform samples over the search space.
#[derive(Debug, Clone)]
pub struct RandomSearch {
    history: History,
    rng: RngState,
    step: StepInfo,
}

impl RandomSearch {
    pub fn new(space: SearchSpace, budget: Option<usize>, seed: u64) -> Self {
        Self {
            history: History::new(space, budget),
            rng: RngState::new(seed),
            step: StepInfo::whole_space(Phase::Random, Origin::Random, 0),
        }
    }
}

impl AskTell for RandomSearch {
    fn space(&self) -> &SearchSpace {
        self.history.space()
    }

    fn suggest(&mut self) -> Result<Vec<f64>> {
        self.history.check_budget()?;
        let space = self.history.space();
        let x = (0..space.dim()).map(|j| self.rng.uniform_in(space.lower()[j], space.upper()[j])).collect();
        self.step = StepInfo::whole_space(Phase::Random, Origin::Random, self.history.len());
        Ok(x)
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
