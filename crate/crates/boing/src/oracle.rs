//! Dense reference computations with nalgebra, used to check the structured
//! models in `boing-core` instance by instance.

use std::io::Write;

use boing_core::gp::{matern52, GpModel, KernelParams, Standardizer};
use boing_core::lgpga::{fitc_global_prior, LgpgaModel};
use boing_core::RngState;
use nalgebra::{DMatrix, DVector};

fn kernel(a: &[Vec<f64>], b: &[Vec<f64>], p: &KernelParams) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| matern52(&a[i], &b[j], p))
}

/// Mean and covariance of the last block of a zero-mean Gaussian given the first
/// `observed.len()` coordinates.
pub fn condition_gaussian(joint: &DMatrix<f64>, observed: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = observed.len();
    let k = joint.nrows() - n;
    let s_oo = joint.view((0, 0), (n, n)).into_owned();
    let s_ot = joint.view((0, n), (n, k)).into_owned();
    let s_tt = joint.view((n, n), (k, k)).into_owned();
    let lu = s_oo.lu();
    let w = lu.solve(&DVector::from_column_slice(observed)).expect("singular observed block");
    let big_w = lu.solve(&s_ot).expect("singular observed block");
    let mean = s_ot.transpose() * w;
    let cov = s_tt - s_ot.transpose() * big_w;
    (mean, cov)
}

/// Exact GP posterior mean and latent variance at `queries`, zero prior mean.
pub fn dense_gp(xs: &[Vec<f64>], y: &[f64], p: &KernelParams, queries: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let all: Vec<Vec<f64>> = xs.iter().chain(queries).cloned().collect();
    let mut joint = kernel(&all, &all, p);
    for i in 0..xs.len() {
        joint[(i, i)] += p.noise_variance;
    }
    let (mean, cov) = condition_gaussian(&joint, y);
    (mean.iter().copied().collect(), cov.diagonal().iter().copied().collect())
}

/// `K_au K_uu⁻¹ K_ub` via an LU solve.
fn nystrom(a: &[Vec<f64>], b: &[Vec<f64>], u: &[Vec<f64>], p: &KernelParams) -> DMatrix<f64> {
    let k_uu = kernel(u, u, p);
    let k_ub = kernel(u, b, p);
    let sol = k_uu.lu().solve(&k_ub).expect("singular K_uu");
    kernel(a, u, p) * sol
}

/// Joint covariance over `[outside, inside, queries]` with the FITC outside block
/// and exact inside and query blocks, noise on the observed rows.
pub fn lgpga_joint_covariance(
    outside: &[Vec<f64>],
    inside: &[Vec<f64>],
    queries: &[Vec<f64>],
    inducing: &[Vec<f64>],
    p: &KernelParams,
) -> DMatrix<f64> {
    let (n_o, n_i) = (outside.len(), inside.len());
    let rest: Vec<Vec<f64>> = inside.iter().chain(queries).cloned().collect();
    let n = n_o + rest.len();
    let mut joint = DMatrix::zeros(n, n);
    let q_oo = nystrom(outside, outside, inducing, p);
    let q_or = nystrom(outside, &rest, inducing, p);
    let k_rr = kernel(&rest, &rest, p);
    for i in 0..n_o {
        for j in 0..n_o {
            joint[(i, j)] = q_oo[(i, j)];
        }
        joint[(i, i)] = p.signal_variance + p.noise_variance;
        for j in 0..rest.len() {
            joint[(i, n_o + j)] = q_or[(i, j)];
            joint[(n_o + j, i)] = q_or[(i, j)];
        }
    }
    for i in 0..rest.len() {
        for j in 0..rest.len() {
            joint[(n_o + i, n_o + j)] = k_rr[(i, j)];
        }
    }
    for i in 0..n_i {
        joint[(n_o + i, n_o + i)] += p.noise_variance;
    }
    joint
}

/// LGPGA posterior at `queries` by conditioning the dense joint on all targets.
pub fn dense_lgpga(
    outside: &[Vec<f64>],
    y_outside: &[f64],
    inside: &[Vec<f64>],
    y_inside: &[f64],
    inducing: &[Vec<f64>],
    p: &KernelParams,
    queries: &[Vec<f64>],
) -> (Vec<f64>, Vec<f64>) {
    let joint = lgpga_joint_covariance(outside, inside, queries, inducing, p);
    let observed: Vec<f64> = y_outside.iter().chain(y_inside).copied().collect();
    let (mean, cov) = condition_gaussian(&joint, &observed);
    (mean.iter().copied().collect(), cov.diagonal().iter().copied().collect())
}

/// Random kernel hyperparameters in a well-conditioned range.
pub fn random_params(d: usize, rng: &mut RngState) -> KernelParams {
    KernelParams {
        lengthscales: (0..d).map(|_| rng.uniform_in(0.2, 0.8)).collect(),
        signal_variance: rng.uniform_in(0.5, 2.0),
        noise_variance: rng.uniform_in(1e-3, 1e-1),
    }
}

pub fn random_points(n: usize, d: usize, rng: &mut RngState) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.uniform()).collect()).collect()
}

fn random_targets(n: usize, rng: &mut RngState) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect()
}

/// Largest absolute mean and variance errors over a batch of instances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MaxError {
    pub mean: f64,
    pub variance: f64,
    pub instances: usize,
}

impl MaxError {
    fn update(&mut self, m: (&[f64], &[f64]), reference: (&[f64], &[f64])) {
        for (a, b) in m.0.iter().zip(reference.0) {
            self.mean = self.mean.max((a - b).abs());
        }
        for (a, b) in m.1.iter().zip(reference.1) {
            self.variance = self.variance.max((a - b).abs());
        }
    }

    pub fn worst(&self) -> f64 {
        self.mean.max(self.variance)
    }
}

/// Exact GP against the dense formula: d ≤ 3, n ≤ 30, seeds `0..instances`.
pub fn check_gp(instances: usize) -> MaxError {
    let mut err = MaxError { instances, ..MaxError::default() };
    for seed in 0..instances as u64 {
        let mut rng = RngState::new(seed);
        let d = 1 + rng.below(3);
        let n = 1 + rng.below(30);
        let p = random_params(d, &mut rng);
        let xs = random_points(n, d, &mut rng);
        let y = random_targets(n, &mut rng);
        let q = random_points(5, d, &mut rng);
        let model = GpModel::condition(xs.clone(), &y, p.clone()).expect("gp conditioning");
        let (m, v): (Vec<f64>, Vec<f64>) = q.iter().map(|x| model.predict_latent_unclamped(x)).unzip();
        let (dm, dv) = dense_gp(&xs, &y, &p, &q);
        err.update((&m, &v), (&dm, &dv));
    }
    err
}

/// LGPGA against dense joint conditioning: d ≤ 3, n_o ≤ 40, n_i ≤ 15, m ≤ 8.
pub fn check_lgpga(instances: usize) -> MaxError {
    let mut err = MaxError { instances, ..MaxError::default() };
    for seed in 0..instances as u64 {
        let mut rng = RngState::new(seed);
        let d = 1 + rng.below(3);
        let (n_o, n_i, m) = (1 + rng.below(40), 1 + rng.below(15), 1 + rng.below(8));
        let p = random_params(d, &mut rng);
        let xo = random_points(n_o, d, &mut rng);
        let yo = random_targets(n_o, &mut rng);
        let xi = random_points(n_i, d, &mut rng);
        let yi = random_targets(n_i, &mut rng);
        let u = random_points(m, d, &mut rng);
        let q = random_points(3, d, &mut rng);
        let model =
            LgpgaModel::condition(xi.clone(), &yi, xo.clone(), &yo, p.clone(), u.clone(), Standardizer::IDENTITY)
                .expect("lgpga conditioning");
        let (mm, vv): (Vec<f64>, Vec<f64>) = q.iter().map(|x| model.predict_latent_unclamped(x)).unzip();
        let (dm, dv) = dense_lgpga(&xo, &yo, &xi, &yi, &u, &p, &q);
        err.update((&mm, &vv), (&dm, &dv));
    }
    err
}

/// FITC prior with the outside inputs as inducing set against exact conditioning.
/// The variance column holds the largest error over the full target covariance.
pub fn check_fitc_exact(instances: usize) -> MaxError {
    let mut err = MaxError { instances, ..MaxError::default() };
    for seed in 0..instances as u64 {
        let mut rng = RngState::new(10_000 + seed);
        let d = 1 + rng.below(3);
        let n_o = 1 + rng.below(30);
        let p = random_params(d, &mut rng);
        let xo = random_points(n_o, d, &mut rng);
        let yo = random_targets(n_o, &mut rng);
        let t = random_points(1 + rng.below(6), d, &mut rng);
        let (mean, cov) = fitc_global_prior(&xo, &yo, &xo, &p, &t).expect("fitc prior");
        let all: Vec<Vec<f64>> = xo.iter().chain(&t).cloned().collect();
        let mut joint = kernel(&all, &all, &p);
        for i in 0..n_o {
            joint[(i, i)] += p.noise_variance;
        }
        let (dm, dc) = condition_gaussian(&joint, &yo);
        for (a, b) in mean.iter().zip(dm.iter()) {
            err.mean = err.mean.max((a - b).abs());
        }
        for i in 0..t.len() {
            for j in 0..t.len() {
                err.variance = err.variance.max((cov[(i, j)] - dc[(i, j)]).abs());
            }
        }
    }
    err
}

pub const GP_TOLERANCE: f64 = 1e-8;
pub const LGPGA_TOLERANCE: f64 = 1e-6;
pub const FITC_TOLERANCE: f64 = 1e-6;

/// Runs the three oracle suites, printing one line each; fails if any exceeds its tolerance.
pub fn selftest(instances: usize, out: &mut impl Write) -> Result<(), Box<dyn std::error::Error>> {
    let checks: [(&str, MaxError, f64); 3] = [
        ("exact GP vs dense formula", check_gp(instances), GP_TOLERANCE),
        ("LGPGA vs dense joint conditioning", check_lgpga(instances), LGPGA_TOLERANCE),
        ("FITC with U = X_o vs exact conditioning", check_fitc_exact(instances.div_ceil(2)), FITC_TOLERANCE),
    ];
    let mut failed = 0;
    for (name, err, tol) in checks {
        let ok = err.worst() < tol;
        failed += usize::from(!ok);
        writeln!(
            out,
            "{} {name}: {} instances, max |Δmean| {:.2e}, max |Δvar| {:.2e} (tol {tol:.0e})",
            if ok { "PASS" } else { "FAIL" },
            err.instances,
            err.mean,
            err.variance
        )?;
    }
    if failed > 0 {
        return Err(format!("{failed} oracle check(s) failed").into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditioning_one_observation_by_hand() {
        // [[2, 1], [1, 3]] given x₀ = 4: mean 2, variance 3 − 1/2
        let joint = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let (m, c) = condition_gaussian(&joint, &[4.0]);
        assert!((m[0] - 2.0).abs() < 1e-15);
        assert!((c[(0, 0)] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn selftest_passes_on_a_few_instances() {
        let mut buf = Vec::new();
        selftest(10, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().filter(|l| l.starts_with("PASS")).count(), 3);
    }
}
