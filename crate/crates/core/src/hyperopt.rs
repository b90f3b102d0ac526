//! Box-constrained limited-memory quasi-Newton minimizer used for kernel
//! hyperparameters. Every accepted step strictly decreases the objective.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::linalg::dot;

const MEMORY: usize = 6;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;
const F_TOL: f64 = 2.2e-9;
const PG_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective value after every accepted iterate, starting point first.
    pub trace: Vec<f64>,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`.
///
/// `f` returns `None` where the objective cannot be evaluated; such points are
/// treated as infinitely bad. Returns `None` if the starting point itself fails.
pub fn minimize_bounded<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], max_iters: usize) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    let mut trace = alloc::vec![fx];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    for iter in 0..max_iters {
        // Free variables: not pinned at a bound with the gradient pushing outward.
        let free: Vec<bool> =
            (0..n).map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))).collect();
        let pg: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let pg_norm = libm::sqrt(dot(&pg, &pg));
        if pg.iter().all(|v| v.abs() < PG_TOL) {
            break;
        }

        // Two-loop recursion on the free subspace.
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += (a - b) * s[i];
            }
        }
        let mut dir: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&dir, &pg) >= 0.0 {
            memory.clear();
            dir = pg.iter().map(|v| -v).collect();
        }

        let mut step = if iter == 0 && memory.is_empty() { (1.0 / pg_norm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + step * dir[i]).collect();
            project(&mut xn, lo, hi);
            let moved: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
            let decrease = dot(&g, &moved);
            if let Some((fv, gv)) = f(&xn) {
                if fv.is_finite() && fv < fx && fv <= fx + ARMIJO * decrease.min(0.0) {
                    accepted = Some((xn, fv, gv, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fv, gv, s)) = accepted else { break };
        let y: Vec<f64> = (0..n).map(|i| gv[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - fv;
        x = xn;
        fx = fv;
        g = gv;
        trace.push(fx);
        if improvement <= F_TOL * fx.abs().max(1.0) {
            break;
        }
    }
    Some(Minimum { x, value: fx, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let m = minimize_bounded(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], 500).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds_and_is_monotone() {
        let m = minimize_bounded(rosenbrock, &[-1.2, 1.0], &[-2.0, -2.0], &[0.5, 0.5], 200).unwrap();
        assert!(m.x[0] <= 0.5 && m.x[1] <= 0.5);
        assert!(m.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn failing_start_returns_none() {
        assert!(minimize_bounded(|_| None, &[0.0], &[-1.0], &[1.0], 10).is_none());
    }
}
