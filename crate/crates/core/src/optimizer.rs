//! Ask/tell interface shared by all optimizers and a driver loop that records trajectories.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::space::{Dataset, Observation, SearchSpace};

/// Which part of an optimizer produced a suggestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    FullGp,
    TwoStage,
    Turbo,
    Gp,
    Rf,
    Random,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::FullGp => "full_gp",
            Phase::TwoStage => "two_stage",
            Phase::Turbo => "turbo",
            Phase::Gp => "gp",
            Phase::Rf => "rf",
            Phase::Random => "random",
        }
    }
}

/// Side of the BOinG+ controller that produced an evaluation; plain optimizers report their own name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Boing,
    Turbo,
    Gp,
    Rf,
    Random,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Boing => "boing",
            Origin::Turbo => "turbo",
            Origin::Gp => "gp",
            Origin::Rf => "rf",
            Origin::Random => "random",
        }
    }
}

/// Metadata of the most recent suggestion.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub phase: Phase,
    pub origin: Origin,
    /// Fraction of the search-space volume the suggestion was optimized over.
    pub volume_fraction: f64,
    /// Observations inside that region when the suggestion was made.
    pub inside_count: usize,
}

impl StepInfo {
    pub fn whole_space(phase: Phase, origin: Origin, n: usize) -> Self {
        Self { phase, origin, volume_fraction: 1.0, inside_count: n }
    }
}

pub trait AskTell {
    fn space(&self) -> &SearchSpace;
    /// Next point to evaluate, in search-space coordinates.
    fn suggest(&mut self) -> Result<Vec<f64>>;
    /// Records an evaluation. Non-finite costs and out-of-bounds points are rejected without changing state.
    fn tell(&mut self, point: &[f64], cost: f64) -> Result<()>;
    fn last_step(&self) -> &StepInfo;
    fn dataset(&self) -> &Dataset;
}

/// Observations in search-space coordinates together with their unit-cube images.
#[derive(Debug, Clone)]
pub struct History {
    space: SearchSpace,
    dataset: Dataset,
    unit: Vec<Vec<f64>>,
    budget: Option<usize>,
}

impl History {
    pub fn new(space: SearchSpace, budget: Option<usize>) -> Self {
        Self { space, dataset: Dataset::new(), unit: Vec::new(), budget }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn unit_points(&self) -> &[Vec<f64>] {
        &self.unit
    }

    pub fn costs(&self) -> Vec<f64> {
        self.dataset.costs()
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.dataset.best_cost()
    }

    pub fn check_budget(&self) -> Result<()> {
        match self.budget {
            Some(b) if self.dataset.len() >= b => Err(Error::BudgetExhausted(b)),
            _ => Ok(()),
        }
    }

    pub fn push(&mut self, point: &[f64], cost: f64) -> Result<()> {
        self.space.check_point(point)?;
        let obs = Observation::new(point.to_vec(), cost)?;
        self.dataset.push(obs)?;
        self.unit.push(self.space.normalize(point));
        Ok(())
    }

    /// True if `unit_point` is within `tol` (max-norm) of an observed point.
    pub fn is_duplicate(&self, unit_point: &[f64], tol: f64) -> bool {
        self.unit.iter().any(|p| p.iter().zip(unit_point).all(|(a, b)| (a - b).abs() <= tol))
    }
}

/// One evaluation of an optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    /// 1-based evaluation index.
    pub t: usize,
    pub point: Vec<f64>,
    pub cost: f64,
    pub incumbent: f64,
    pub step: StepInfo,
    /// Wall time of suggest, evaluation and tell as reported by the injected clock.
    pub wall_ms: f64,
}

/// Runs `budget` suggest/evaluate/tell rounds. `clock` returns milliseconds.
pub fn run_loop<O, F, C>(opt: &mut O, mut objective: F, budget: usize, mut clock: C) -> Result<Vec<TrajectoryRow>>
where
    O: AskTell + ?Sized,
    F: FnMut(&[f64]) -> f64,
    C: FnMut() -> f64,
{
    let mut rows = Vec::with_capacity(budget);
    let at = |t: usize| move |e: Error| Error::AtIteration { t, cause: Box::new(e) };
    for t in 1..=budget {
        let start = clock();
        let x = opt.suggest().map_err(at(t))?;
        let y = objective(&x);
        opt.tell(&x, y).map_err(at(t))?;
        let wall_ms = clock() - start;
        let incumbent = opt.dataset().best_cost().unwrap_or(y);
        rows.push(TrajectoryRow { t, point: x, cost: y, incumbent, step: opt.last_step().clone(), wall_ms });
    }
    Ok(rows)
}
