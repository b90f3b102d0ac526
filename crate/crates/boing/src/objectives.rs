//! Synthetic benchmark functions with their standard domains and known minima.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use boing_core::{Result as CoreResult, SearchSpace};
use serde::{Deserialize, Serialize};

pub const BRANIN_MIN: f64 = 0.397_887_357_729_738;

pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let body: f64 = w[..d - 1].iter().map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2))).sum();
    let tail = (w[d - 1] - 1.0).powi(2) * (1.0 + (2.0 * PI * w[d - 1]).sin().powi(2));
    head + body + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Branin,
    Ackley,
    Levy,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Branin => "branin",
            ObjectiveKind::Ackley => "ackley",
            ObjectiveKind::Levy => "levy",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "branin" => Ok(ObjectiveKind::Branin),
            "ackley" => Ok(ObjectiveKind::Ackley),
            "levy" => Ok(ObjectiveKind::Levy),
            other => Err(format!("unknown objective `{other}` (expected branin, ackley or levy)")),
        }
    }
}

/// A benchmark function bound to a dimension and domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub optimum_value: f64,
    pub optimum_locations: Vec<Vec<f64>>,
}

impl ObjectiveSpec {
    /// Standard domain for `kind`; Branin ignores `dim` and is always 2-D.
    pub fn new(kind: ObjectiveKind, dim: usize) -> Result<Self, String> {
        match kind {
            ObjectiveKind::Branin => {
                if dim != 2 {
                    return Err(format!("branin is two-dimensional, got --dim {dim}"));
                }
                Ok(Self {
                    kind,
                    dim: 2,
                    bounds: vec![(-5.0, 10.0), (0.0, 15.0)],
                    optimum_value: BRANIN_MIN,
                    optimum_locations: vec![vec![-PI, 12.275], vec![PI, 2.275], vec![3.0 * PI, 2.475]],
                })
            }
            ObjectiveKind::Ackley | ObjectiveKind::Levy if dim == 0 => Err("dimension must be at least 1".into()),
            ObjectiveKind::Ackley => Ok(Self {
                kind,
                dim,
                bounds: vec![(-32.768, 32.768); dim],
                optimum_value: 0.0,
                optimum_locations: vec![vec![0.0; dim]],
            }),
            ObjectiveKind::Levy => Ok(Self {
                kind,
                dim,
                bounds: vec![(-10.0, 10.0); dim],
                optimum_value: 0.0,
                optimum_locations: vec![vec![1.0; dim]],
            }),
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self, String> {
        if bounds.len() != self.dim {
            return Err(format!("expected {} bounds, got {}", self.dim, bounds.len()));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn space(&self) -> CoreResult<SearchSpace> {
        SearchSpace::new(&self.bounds)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self.kind {
            ObjectiveKind::Branin => branin(x),
            ObjectiveKind::Ackley => ackley(x),
            ObjectiveKind::Levy => levy(x),
        }
    }

    pub fn regret(&self, value: f64) -> f64 {
        value - self.optimum_value
    }

    /// Largest deviation of the listed optima from the listed optimum value.
    pub fn self_check(&self) -> f64 {
        self.optimum_locations.iter().map(|x| (self.evaluate(x) - self.optimum_value).abs()).fold(0.0, f64::max)
    }
}

/// Branin-2D, Ackley-10D and Levy-10D on their standard domains.
pub fn standard_specs() -> Vec<ObjectiveSpec> {
    [(ObjectiveKind::Branin, 2), (ObjectiveKind::Ackley, 10), (ObjectiveKind::Levy, 10)]
        .into_iter()
        .map(|(k, d)| ObjectiveSpec::new(k, d).expect("standard dimension"))
        .collect()
}
