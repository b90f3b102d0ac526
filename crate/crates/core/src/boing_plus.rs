//! BOinG+: alternates between BOinG (exploitation) and a trust region (exploration).
//!
//! Each side keeps a failure counter that grows by one for every `d` evaluations
//! without a new global incumbent and shrinks by one on improvement. Before each
//! suggestion the active side hands over with probability `min(0.1·c_fail, 1)`.
//! A trust region that finds a new incumbent hands back to BOinG at once, and
//! every switch halves both counters.

use alloc::vec::Vec;

use crate::boing::{Boing, BoingConfig, ScoredTargets};
use crate::error::{Error, Result};
use crate::forest::{extract_subregion, rf_fit, RandomForest, SubregionResult};
use crate::optimizer::{AskTell, Origin, Phase, StepInfo};
use crate::rng::RngState;
use crate::space::{AxisBox, Dataset, SearchSpace};
use crate::turbo::{TrustRegion, TurboConfig};

pub fn switch_probability(c_fail: usize) -> f64 {
    (c_fail as f64 / 10.0).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Boing,
    Turbo,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::Boing => 0,
            Side::Turbo => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Boing => Side::Turbo,
            Side::Turbo => Side::Boing,
        }
    }
}

/// Failure counters and per-side evaluations-since-improvement clocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchState {
    pub active: Side,
    pub c_fail: [usize; 2],
    pub since_improvement: [usize; 2],
    pub dim: usize,
}

impl SwitchState {
    pub fn new(dim: usize) -> Self {
        Self { active: Side::Boing, c_fail: [0, 0], since_improvement: [0, 0], dim: dim.max(1) }
    }

    pub fn counter(&self, side: Side) -> usize {
        self.c_fail[side.index()]
    }

    /// Updates the active side after one evaluation.
    pub fn update_failure_counter(&mut self, improved: bool) {
        let k = self.active.index();
        if improved {
            self.c_fail[k] = self.c_fail[k].saturating_sub(1);
            self.since_improvement[k] = 0;
        } else {
            self.since_improvement[k] += 1;
            if self.since_improvement[k].is_multiple_of(self.dim) {
                self.c_fail[k] += 1;
            }
        }
    }

    /// Hands over to the other side and halves both counters.
    pub fn switch(&mut self) {
        self.active = self.active.other();
        self.c_fail = [self.c_fail[0] / 2, self.c_fail[1] / 2];
    }
}

/// Candidate subregions around random anchors and the index of the largest.
#[derive(Debug, Clone)]
pub struct ExplorationChoice {
    pub chosen: usize,
    pub candidates: Vec<SubregionResult>,
}

impl ExplorationChoice {
    pub fn region(&self) -> &SubregionResult {
        &self.candidates[self.chosen]
    }
}

/// Extracts subregions around `n_anchors` uniform points of `domain` and picks the one
/// with the largest volume (first on ties).
pub fn select_exploration_subregion(
    forest: &RandomForest,
    points: &[Vec<f64>],
    n_min: usize,
    domain: &AxisBox,
    n_anchors: usize,
    rng: &mut RngState,
) -> Result<ExplorationChoice> {
    let mut candidates = Vec::with_capacity(n_anchors.max(1));
    for _ in 0..n_anchors.max(1) {
        let anchor: Vec<f64> = (0..domain.dim()).map(|j| rng.uniform_in(domain.lo()[j], domain.hi()[j])).collect();
        candidates.push(extract_subregion(forest, &anchor, points, n_min, domain)?);
    }
    let mut chosen = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.region.volume() > candidates[chosen].region.volume() {
            chosen = i;
        }
    }
    Ok(ExplorationChoice { chosen, candidates })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoingPlusConfig {
    pub boing: BoingConfig,
    pub turbo: TurboConfig,
    pub n_anchors: usize,
}

impl Default for BoingPlusConfig {
    fn default() -> Self {
        Self { boing: BoingConfig::default(), turbo: TurboConfig::default(), n_anchors: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct BoingPlus {
    config: BoingPlusConfig,
    boing: Boing,
    switch: SwitchState,
    region: Option<TrustRegion>,
    rng: RngState,
    step: StepInfo,
    switches: usize,
    region_builds: usize,
}

impl BoingPlus {
    pub fn new(space: SearchSpace, config: BoingPlusConfig, seed: u64) -> Result<Self> {
        let dim = space.dim();
        let boing = Boing::new(space, config.boing.clone(), seed)?;
        Ok(Self {
            config,
            boing,
            switch: SwitchState::new(dim),
            region: None,
            rng: RngState::with_stream(seed, 1),
            step: StepInfo::whole_space(Phase::Init, Origin::Boing, 0),
            switches: 0,
            region_builds: 0,
        })
    }

    pub fn switch_state(&self) -> &SwitchState {
        &self.switch
    }

    pub fn active_side(&self) -> Side {
        self.switch.active
    }

    pub fn trust_region(&self) -> Option<&TrustRegion> {
        self.region.as_ref()
    }

    pub fn boing(&self) -> &Boing {
        &self.boing
    }

    /// Number of side switches so far.
    pub fn switches(&self) -> usize {
        self.switches
    }

    /// Number of trust regions built (switches to the trust region plus restarts).
    pub fn region_builds(&self) -> usize {
        self.region_builds
    }

    /// Switches sides unless `side` is already active.
    pub fn switch_to(&mut self, side: Side) -> Result<()> {
        if self.switch.active != side {
            self.switch.switch();
            self.switches += 1;
            self.region = None;
            if side == Side::Turbo {
                self.build_region()?;
            }
        }
        Ok(())
    }

    fn build_region(&mut self) -> Result<()> {
        let history = self.boing.history();
        let dim = history.space().dim();
        let unit = AxisBox::unit(dim);
        let (bounds, inside) = if history.is_empty() {
            (unit, Vec::new())
        } else {
            let targets = ScoredTargets::new(self.config.boing.global_acq, &history.costs());
            let forest = rf_fit(history.unit_points(), &targets.values, &self.config.boing.forest, &mut self.rng)?;
            let n_min = self.config.boing.n_min(dim);
            let choice = select_exploration_subregion(
                &forest,
                history.unit_points(),
                n_min,
                &unit,
                self.config.n_anchors,
                &mut self.rng,
            )?;
            let r = choice.candidates.into_iter().nth(choice.chosen).expect("chosen candidate exists");
            (r.region, r.inside)
        };
        self.region = Some(TrustRegion::new(bounds, inside, &self.config.turbo, &mut self.rng));
        self.region_builds += 1;
        Ok(())
    }
}

impl AskTell for BoingPlus {
    fn space(&self) -> &SearchSpace {
        self.boing.space()
    }

    fn suggest(&mut self) -> Result<Vec<f64>> {
        self.boing.history().check_budget()?;
        let active = self.switch.active;
        if self.rng.bernoulli(switch_probability(self.switch.counter(active))) {
            self.switch_to(active.other())?;
        }
        let x = match self.switch.active {
            Side::Boing => {
                let x = self.boing.suggest_unit()?;
                self.step = self.boing.last_step().clone();
                x
            }
            Side::Turbo => {
                let restart = self.region.as_ref().is_none_or(|r| r.needs_restart(&self.config.turbo));
                if restart {
                    self.build_region()?;
                }
                let region = self.region.as_mut().expect("trust region exists");
                let x = region.suggest(self.boing.history(), &self.config.turbo, &mut self.rng)?;
                let tr = region.last_box();
                let b = region.bounds();
                let volume = (0..tr.dim()).map(|j| tr.width(j) * b.width(j)).product();
                self.step = StepInfo {
                    phase: Phase::Turbo,
                    origin: Origin::Turbo,
                    volume_fraction: volume,
                    inside_count: region.local().len(),
                };
                x
            }
        };
        Ok(self.boing.space().denormalize(&x))
    }

    fn tell(&mut self, point: &[f64], cost: f64) -> Result<()> {
        let dim = self.boing.space().dim();
        if point.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: point.len() });
        }
        let improved = self.boing.history().best_cost().is_none_or(|b| cost < b);
        self.boing.tell(point, cost)?;
        if self.switch.active == Side::Turbo {
            if let Some(region) = self.region.as_mut() {
                let index = self.boing.history().len() - 1;
                region.observe(index, self.boing.history(), &self.config.turbo);
            }
        }
        self.switch.update_failure_counter(improved);
        if improved && self.switch.active == Side::Turbo {
            self.switch_to(Side::Boing)?;
        }
        Ok(())
    }

    fn last_step(&self) -> &StepInfo {
        &self.step
    }

    fn dataset(&self) -> &Dataset {
        self.boing.dataset()
    }
}
