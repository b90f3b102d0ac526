//! Exact Gaussian process regression with a Matérn-5/2 kernel.
//!
//! The posterior is `μ(x) = k_*ᵀ (K + σ_n² I)⁻¹ y` and
//! `σ²(x) = k(x, x) − k_*ᵀ (K + σ_n² I)⁻¹ k_*` under a zero prior mean.
//! [`gp_fit`] standardizes targets before fitting and undoes it on prediction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hyperopt::minimize_bounded;
use crate::linalg::{dot, Cholesky, Matrix};
use crate::rng::RngState;
use crate::space::Dataset;

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (1e-8, 1.0);

const SQRT5: f64 = 2.236_067_977_499_79;
pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

// Ranges for random restart initial values (log-uniform), inside the bounds.
const INIT_LENGTHSCALE: (f64, f64) = (0.05, 2.0);
const INIT_SIGNAL_VARIANCE: (f64, f64) = (0.1, 10.0);
const INIT_NOISE_VARIANCE: (f64, f64) = (1e-6, 1e-1);

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self { lengthscales: alloc::vec![lengthscale; dim], signal_variance, noise_variance }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[log ℓ_1, …, log ℓ_d, log σ_f², log σ_n²]`
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|&l| libm::log(l)).collect();
        v.push(libm::log(self.signal_variance));
        v.push(libm::log(self.noise_variance));
        v
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|&t| libm::exp(t)).collect(),
            signal_variance: libm::exp(theta[d]),
            noise_variance: libm::exp(theta[d + 1]),
        }
    }

    fn log_bounds(dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = alloc::vec![libm::log(LENGTHSCALE_BOUNDS.0); dim];
        let mut hi = alloc::vec![libm::log(LENGTHSCALE_BOUNDS.1); dim];
        lo.push(libm::log(SIGNAL_VARIANCE_BOUNDS.0));
        hi.push(libm::log(SIGNAL_VARIANCE_BOUNDS.1));
        lo.push(libm::log(NOISE_VARIANCE_BOUNDS.0));
        hi.push(libm::log(NOISE_VARIANCE_BOUNDS.1));
        (lo, hi)
    }

    /// Clamps every component into the fitting bounds.
    pub fn clamped(&self) -> Self {
        Self {
            lengthscales: self
                .lengthscales
                .iter()
                .map(|l| l.clamp(LENGTHSCALE_BOUNDS.0, LENGTHSCALE_BOUNDS.1))
                .collect(),
            signal_variance: self.signal_variance.clamp(SIGNAL_VARIANCE_BOUNDS.0, SIGNAL_VARIANCE_BOUNDS.1),
            noise_variance: self.noise_variance.clamp(NOISE_VARIANCE_BOUNDS.0, NOISE_VARIANCE_BOUNDS.1),
        }
    }
}

#[inline]
pub(crate) fn scaled_distance(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((x, y), l) in a.iter().zip(b).zip(lengthscales) {
        let t = (x - y) / l;
        s += t * t;
    }
    libm::sqrt(s)
}

fn scale_by(x: &[f64], lengthscales: &[f64]) -> Vec<f64> {
    x.iter().zip(lengthscales).map(|(v, l)| v / l).collect()
}

#[inline]
pub(crate) fn matern52_of_r(r: f64, signal_variance: f64) -> f64 {
    let sr = SQRT5 * r;
    signal_variance * (1.0 + sr + sr * sr / 3.0) * libm::exp(-sr)
}

/// Matérn-5/2 covariance `σ_f² (1 + √5 r + 5r²/3) exp(−√5 r)` with per-dimension lengthscales.
pub fn matern52(a: &[f64], b: &[f64], params: &KernelParams) -> f64 {
    matern52_of_r(scaled_distance(a, b, &params.lengthscales), params.signal_variance)
}

/// Noise-free covariance matrix of `xs`.
pub fn kernel_matrix(xs: &[Vec<f64>], params: &KernelParams) -> Matrix {
    Matrix::symmetric_from_fn(xs.len(), |i, j| matern52(&xs[i], &xs[j], params))
}

/// Cross-covariance with rows indexed by `a` and columns by `b`.
pub fn cross_kernel(a: &[Vec<f64>], b: &[Vec<f64>], params: &KernelParams) -> Matrix {
    Matrix::from_fn(a.len(), b.len(), |i, j| matern52(&a[i], &b[j], params))
}

fn noisy_cholesky(xs: &[Vec<f64>], params: &KernelParams) -> Result<Cholesky> {
    let mut k = kernel_matrix(xs, params);
    k.add_diagonal(params.noise_variance);
    Cholesky::with_jitter(&k)
}

/// `−½ yᵀα − Σ log L_ii − (n/2) log 2π` for targets `y` as given.
pub fn log_marginal_likelihood(params: &KernelParams, xs: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let chol = noisy_cholesky(xs, params)?;
    let alpha = chol.solve(y);
    Ok(-0.5 * dot(y, &alpha) - chol.half_log_det() - 0.5 * xs.len() as f64 * LN_2PI)
}

/// Log marginal likelihood and its gradient with respect to [`KernelParams::to_log`].
pub fn log_marginal_likelihood_with_gradient(
    params: &KernelParams,
    xs: &[Vec<f64>],
    y: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = xs.len();
    let d = params.dim();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let scaled: Vec<Vec<f64>> =
        xs.iter().map(|x| x.iter().zip(&params.lengthscales).map(|(v, l)| v / l).collect()).collect();
    let sf2 = params.signal_variance;
    // √5 r for each pair, lower triangle row-major
    let mut sr_pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut k = Matrix::zeros(n, n);
    for a in 0..n {
        k[(a, a)] = sf2;
        for b in 0..a {
            let mut r2 = 0.0;
            for (u, v) in scaled[a].iter().zip(&scaled[b]) {
                r2 += (u - v) * (u - v);
            }
            let sr = SQRT5 * libm::sqrt(r2);
            let e = libm::exp(-sr);
            sr_pairs.push((sr, e));
            let kab = sf2 * (1.0 + sr + sr * sr / 3.0) * e;
            k[(a, b)] = kab;
            k[(b, a)] = kab;
        }
    }
    k.add_diagonal(params.noise_variance);
    let chol = Cholesky::with_jitter(&k)?;
    let alpha = chol.solve(y);
    let lml = -0.5 * dot(y, &alpha) - chol.half_log_det() - 0.5 * n as f64 * LN_2PI;

    // W = ααᵀ − K⁻¹; ∂lml/∂θ = ½ tr(W ∂K/∂θ)
    let kinv = chol.inverse();
    let mut grad = alloc::vec![0.0; d + 2];
    let mut trace_w = 0.0;
    let mut signal_term = 0.0;
    let mut pair = 0;
    for a in 0..n {
        let waa = alpha[a] * alpha[a] - kinv[(a, a)];
        trace_w += waa;
        signal_term += 0.5 * waa * sf2;
        let row = kinv.row(a);
        for b in 0..a {
            let w = alpha[a] * alpha[b] - row[b];
            let (sr, e) = sr_pairs[pair];
            pair += 1;
            signal_term += w * sf2 * (1.0 + sr + sr * sr / 3.0) * e;
            // ∂k/∂log ℓ_j = (5/3) σ_f² (1 + √5 r) e^{−√5 r} (Δ_j/ℓ_j)²
            let c = w * (5.0 / 3.0) * sf2 * (1.0 + sr) * e;
            for (g, (u, v)) in grad[..d].iter_mut().zip(scaled[a].iter().zip(&scaled[b])) {
                *g += c * (u - v) * (u - v);
            }
        }
    }
    grad[d] = signal_term;
    grad[d + 1] = 0.5 * params.noise_variance * trace_w;
    Ok((lml, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Replaces the first random restart when present.
    pub warm_start: Option<KernelParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 10, max_iters: 50, warm_start: None }
    }
}

/// Result of one restart: fitted params plus the accepted-iterate objective trace.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub params: KernelParams,
    pub log_likelihood: f64,
    /// Log marginal likelihood after every accepted optimizer iterate.
    pub trace: Vec<f64>,
}

fn log_uniform(rng: &mut RngState, (lo, hi): (f64, f64)) -> f64 {
    libm::exp(rng.uniform_in(libm::log(lo), libm::log(hi)))
}

fn random_start(dim: usize, rng: &mut RngState) -> KernelParams {
    KernelParams {
        lengthscales: (0..dim).map(|_| log_uniform(rng, INIT_LENGTHSCALE)).collect(),
        signal_variance: log_uniform(rng, INIT_SIGNAL_VARIANCE),
        noise_variance: log_uniform(rng, INIT_NOISE_VARIANCE),
    }
}

/// One local optimization of the log marginal likelihood from `start`.
pub fn optimize_from(start: &KernelParams, xs: &[Vec<f64>], y: &[f64], max_iters: usize) -> Option<FitTrace> {
    let (lo, hi) = KernelParams::log_bounds(start.dim());
    let m = minimize_bounded(
        |theta| {
            let p = KernelParams::from_log(theta);
            log_marginal_likelihood_with_gradient(&p, xs, y)
                .ok()
                .map(|(v, g)| (-v, g.into_iter().map(|x| -x).collect()))
        },
        &start.to_log(),
        &lo,
        &hi,
        max_iters,
    )?;
    Some(FitTrace {
        params: KernelParams::from_log(&m.x),
        log_likelihood: -m.value,
        trace: m.trace.iter().map(|v| -v).collect(),
    })
}

/// Kernel hyperparameters maximizing the log marginal likelihood of `y` as given.
pub fn fit_kernel(xs: &[Vec<f64>], y: &[f64], opts: &FitOptions, rng: &mut RngState) -> Result<KernelParams> {
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = xs[0].len();
    let mut best: Option<FitTrace> = None;
    for restart in 0..opts.restarts.max(1) {
        let start = match (&opts.warm_start, restart) {
            (Some(w), 0) if w.dim() == dim => w.clamped(),
            _ => random_start(dim, rng),
        };
        if let Some(fit) = optimize_from(&start, xs, y, opts.max_iters) {
            if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
                best = Some(fit);
            }
        }
    }
    best.map(|b| b.params).ok_or(Error::Numeric("every hyperparameter restart failed"))
}

/// Affine target transform `y ↦ (y − offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub offset: f64,
    pub scale: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer { offset: 0.0, scale: 1.0 };

    /// Zero mean, unit population variance; constant targets keep scale 1.
    pub fn fit(y: &[f64]) -> Self {
        if y.is_empty() {
            return Self::IDENTITY;
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = libm::sqrt(var);
        Self { offset: mean, scale: if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 1.0 } }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.offset) / self.scale).collect()
    }
}

/// A conditioned GP; immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    /// Inputs divided by the lengthscales.
    scaled: Vec<Vec<f64>>,
    params: KernelParams,
    targets: Vec<f64>,
    chol: Cholesky,
    alpha: Vec<f64>,
    transform: Standardizer,
}

impl GpModel {
    /// Conditions a zero-mean GP on `targets` exactly as given.
    pub fn condition(inputs: Vec<Vec<f64>>, targets: &[f64], params: KernelParams) -> Result<Self> {
        Self::condition_transformed(inputs, targets, params, Standardizer::IDENTITY)
    }

    /// `targets` are already in the transformed frame; predictions are mapped back.
    pub fn condition_transformed(
        inputs: Vec<Vec<f64>>,
        targets: &[f64],
        params: KernelParams,
        transform: Standardizer,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let chol = noisy_cholesky(&inputs, &params)?;
        let alpha = chol.solve(targets);
        let scaled = inputs.iter().map(|x| scale_by(x, &params.lengthscales)).collect();
        Ok(Self { inputs, scaled, params, targets: targets.to_vec(), chol, alpha, transform })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn transform(&self) -> Standardizer {
        self.transform
    }

    /// Noise variance actually on the diagonal (noise plus any jitter).
    pub fn effective_noise(&self) -> f64 {
        self.params.noise_variance + self.chol.jitter()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Latent mean and variance in the transformed frame, variance not clamped.
    pub fn predict_latent_unclamped(&self, x: &[f64]) -> (f64, f64) {
        let xs = scale_by(x, &self.params.lengthscales);
        let mut k: Vec<f64> = self
            .scaled
            .iter()
            .map(|xi| {
                let r2: f64 = xi.iter().zip(&xs).map(|(a, b)| (a - b) * (a - b)).sum();
                matern52_of_r(libm::sqrt(r2), self.params.signal_variance)
            })
            .collect();
        let mean = dot(&k, &self.alpha);
        self.chol.solve_lower_in_place(&mut k);
        (mean, self.params.signal_variance - dot(&k, &k))
    }

    /// Predictive mean and latent variance in the original target frame.
    pub fn predict_one(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.predict_latent_unclamped(x);
        let s = self.transform.scale;
        (m * s + self.transform.offset, v.max(0.0) * s * s)
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        xs.iter().map(|x| self.predict_one(x)).unzip()
    }

    /// Log marginal likelihood of the transformed targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        -0.5 * dot(&self.targets, &self.alpha) - self.chol.half_log_det() - 0.5 * self.alpha.len() as f64 * LN_2PI
    }
}

/// Standardizes `costs`, fits hyperparameters and conditions.
pub fn gp_fit_points(inputs: &[Vec<f64>], costs: &[f64], opts: &FitOptions, rng: &mut RngState) -> Result<GpModel> {
    let transform = Standardizer::fit(costs);
    let y = transform.apply(costs);
    let params = fit_kernel(inputs, &y, opts, rng)?;
    GpModel::condition_transformed(inputs.to_vec(), &y, params, transform)
}

pub fn gp_fit(dataset: &Dataset, opts: &FitOptions, rng: &mut RngState) -> Result<GpModel> {
    gp_fit_points(&dataset.points(), &dataset.costs(), opts, rng)
}
