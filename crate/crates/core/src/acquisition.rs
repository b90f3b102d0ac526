//! Expected-improvement acquisitions (minimization) and their maximizer over a box.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::space::AxisBox;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_2: f64 = 0.707_106_781_186_547_5;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * libm::exp(-0.5 * z * z)
}

/// Standard normal distribution function, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `E[max(η − ξ − Y, 0)]` for `Y ~ N(mean, variance)`.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64, xi: f64) -> f64 {
    let gap = incumbent - xi - mean;
    let sigma = libm::sqrt(variance.max(0.0));
    if sigma == 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
}

/// `E[max(log η − L, 0)]` for `L ~ N(mean_log, variance_log)`.
pub fn log_expected_improvement(mean_log: f64, variance_log: f64, incumbent: f64) -> Result<f64> {
    if !(incumbent > 0.0) {
        return Err(Error::NonPositiveIncumbent(incumbent));
    }
    Ok(expected_improvement(mean_log, variance_log, libm::log(incumbent), 0.0))
}

/// Shift that makes every cost strictly positive before taking logs.
pub fn log_shift(costs: &[f64]) -> f64 {
    1e-6 - costs.iter().cloned().fold(0.0, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcqKind {
    #[default]
    Ei,
    LogEi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcqOptBudget {
    pub n_random: usize,
    pub n_local: usize,
    pub max_local_steps: usize,
}

impl Default for AcqOptBudget {
    fn default() -> Self {
        Self { n_random: 1000, n_local: 10, max_local_steps: 100 }
    }
}

const INITIAL_STEP: f64 = 0.1;
const MIN_STEP: f64 = 1e-4;

/// Random search followed by coordinate local search from the best samples.
/// Returns the best point found and its acquisition value.
pub fn optimize_acquisition<F>(
    mut acq: F,
    region: &AxisBox,
    budget: &AcqOptBudget,
    rng: &mut RngState,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = region.dim();
    let mut value_of = |x: &[f64]| {
        let v = acq(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut samples: Vec<(f64, Vec<f64>)> = (0..budget.n_random.max(1))
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|j| rng.uniform_in(region.lo()[j], region.hi()[j])).collect();
            (value_of(&x), x)
        })
        .collect();
    // stable: among equal values the earlier sample wins
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = samples[0].clone();

    let mut candidate = alloc::vec![0.0; dim];
    for (start_value, start) in samples.into_iter().take(budget.n_local.max(1)) {
        let (mut x, mut fx) = (start, start_value);
        let mut step = INITIAL_STEP;
        for _ in 0..budget.max_local_steps {
            if step < MIN_STEP {
                break;
            }
            let mut move_to: Option<(f64, usize, f64)> = None;
            for j in 0..dim {
                for sign in [1.0, -1.0] {
                    let v = (x[j] + sign * step * region.width(j)).clamp(region.lo()[j], region.hi()[j]);
                    if v == x[j] {
                        continue;
                    }
                    candidate.copy_from_slice(&x);
                    candidate[j] = v;
                    let f = value_of(&candidate);
                    if f > move_to.map_or(fx, |m| m.0) {
                        move_to = Some((f, j, v));
                    }
                }
            }
            match move_to {
                Some((f, j, v)) => {
                    x[j] = v;
                    fx = f;
                }
                None => step *= 0.5,
            }
        }
        if fx > best.0 {
            best = (fx, x);
        }
    }
    (best.1, best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    /// Box-Muller standard normal draws.
    fn normals(n: usize, rng: &mut RngState) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u1 = 1.0 - rng.uniform();
                let u2 = rng.uniform();
                libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
            })
            .collect()
    }

    fn mc_improvement(gap_of: impl Fn(f64) -> f64, n: usize, rng: &mut RngState) -> (f64, f64) {
        let vals: Vec<f64> = normals(n, rng).into_iter().map(|z| gap_of(z).max(0.0)).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        (mean, libm::sqrt(var / n as f64))
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(expected_improvement(2.0, 0.0, 1.0, 0.0), 0.0);
        assert_eq!(expected_improvement(0.5, 0.0, 1.0, 0.0), 0.5);
        assert!((expected_improvement(1.0, 1.0, 1.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(log_expected_improvement(libm::log(3.0), 0.0, 3.0).unwrap(), 0.0);
        assert!((log_expected_improvement(libm::log(3.0), 1.0, 3.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert!(log_expected_improvement(0.0, 1.0, 0.0).is_err());
        assert!(log_expected_improvement(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn ei_matches_monte_carlo() {
        let mut rng = RngState::new(3);
        let (mc, se) = mc_improvement(|z| 1.0 - (1.0 + z), 1_000_000, &mut rng);
        assert!((mc - expected_improvement(1.0, 1.0, 1.0, 0.0)).abs() < 3.0 * se);
        for _ in 0..5 {
            let (m, s, eta) = (rng.uniform_in(-2.0, 2.0), rng.uniform_in(0.1, 2.0), rng.uniform_in(-2.0, 2.0));
            let (mc, se) = mc_improvement(|z| eta - (m + s * z), 200_000, &mut rng);
            assert!((mc - expected_improvement(m, s * s, eta, 0.0)).abs() < 3.0 * se + 1e-6);
        }
    }

    #[test]
    fn log_ei_matches_monte_carlo() {
        let mut rng = RngState::new(4);
        for _ in 0..5 {
            let (m, s, eta) = (rng.uniform_in(-1.0, 2.0), rng.uniform_in(0.1, 1.5), rng.uniform_in(0.1, 5.0));
            let (mc, se) = mc_improvement(|z| libm::log(eta) - (m + s * z), 1_000_000, &mut rng);
            assert!((mc - log_expected_improvement(m, s * s, eta).unwrap()).abs() < 3.0 * se + 1e-6);
        }
    }

    #[test]
    fn log_shift_makes_costs_positive() {
        let costs = [-3.0, 0.5, 2.0];
        let s = log_shift(&costs);
        assert!(costs.iter().all(|c| c + s > 0.0));
        assert_eq!(log_shift(&[1.0, 2.0]), 1e-6);
    }

    #[test]
    fn finds_quadratic_optimum() {
        let region = AxisBox::new(vec![-1.0, 2.0], vec![3.0, 4.0]).unwrap();
        let c = region.center();
        let (x, v) = optimize_acquisition(
            |x| -((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)),
            &region,
            &AcqOptBudget::default(),
            &mut RngState::new(1),
        );
        assert!(libm::sqrt((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) < 0.01);
        assert!(v > -1e-4);
    }

    #[test]
    fn constant_surface_returns_point_in_box() {
        let region = AxisBox::new(vec![0.2, 0.2, 0.2], vec![0.3, 0.9, 0.4]).unwrap();
        let (x, v) = optimize_acquisition(|_| 1.0, &region, &AcqOptBudget::default(), &mut RngState::new(2));
        assert!(region.contains(&x));
        assert_eq!(v, 1.0);
    }

    proptest! {
        #[test]
        fn ei_nonnegative_and_monotone(m in -5.0..5.0f64, v in 0.0..4.0f64, eta in -5.0..5.0f64, dm in 0.01..1.0f64) {
            let e = expected_improvement(m, v, eta, 0.0);
            prop_assert!(e >= 0.0);
            let lower = expected_improvement(m - dm, v, eta, 0.0);
            prop_assert!(lower >= e);
            if v > 0.01 && (eta - m).abs() < 3.0 {
                prop_assert!(lower > e);
            }
        }

        #[test]
        fn ei_scales_with_affine_maps(m in -5.0..5.0f64, s in 0.0..2.0f64, eta in -5.0..5.0f64, a in 0.1..10.0f64, b in -10.0..10.0f64) {
            let base = expected_improvement(m, s * s, eta, 0.0);
            let scaled = expected_improvement(a * m + b, (a * s) * (a * s), a * eta + b, 0.0);
            prop_assert!((scaled - a * base).abs() <= 1e-9 * (1.0 + a * base));
        }

        #[test]
        fn optimizer_stays_in_box_and_beats_random(seed in 0u64..1_000_000) {
            let mut rng = RngState::new(seed);
            let d = 1 + rng.below(4);
            let lo: Vec<f64> = (0..d).map(|_| rng.uniform_in(-5.0, 5.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.uniform_in(1e-3, 3.0)).collect();
            let region = AxisBox::new(lo, hi).unwrap();
            let w: Vec<f64> = (0..d).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
            let f = |x: &[f64]| libm::sin(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
            let budget = AcqOptBudget { n_random: 50, n_local: 3, max_local_steps: 20 };
            let mut replay = RngState::new(seed ^ 0x55);
            let (x, v) = optimize_acquisition(f, &region, &budget, &mut replay);
            prop_assert!(region.contains(&x));
            prop_assert_eq!(v, f(&x));
            let mut again = RngState::new(seed ^ 0x55);
            for _ in 0..budget.n_random {
                let s: Vec<f64> = (0..d).map(|j| again.uniform_in(region.lo()[j], region.hi()[j])).collect();
                prop_assert!(v >= f(&s));
            }
        }
    }
}
