//! Local GP with global augmentation.
//!
//! Observations inside a subregion are fitted by an exact GP whose prior is
//! the posterior given the outside observations. That posterior uses the FITC
//! approximation: with inducing inputs `U`, the outside block of the joint
//! covariance is `Q_oo − diag(Q_oo − K_oo)` where `Q_ab = K_au K_uu⁻¹ K_ub`, its
//! cross-covariances are `Q_oi` and `Q_o*`, and everything else is exact.
//!
//! Conditioning on the outside data goes through the m×m inducing system:
//! `A = L_u⁻¹ K_uo`, `D = diag(K_oo − Q_oo) + σ_n²`, `B = I + A D⁻¹ Aᵀ`. For targets
//! with `a_t = L_u⁻¹ K_ut` and `b_t = L_B⁻¹ a_t`, the prior mean is `b_tᵀ L_B⁻¹ A D⁻¹ y_o`
//! and the covariance is `K_tt − a_tᵀ a_t + b_tᵀ b_t`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gp::{fit_kernel, kernel_matrix, matern52, FitOptions, GpModel, KernelParams, Standardizer, LN_2PI};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::rng::RngState;
use crate::space::AxisBox;

/// Number of inducing points for `n_total` observations in `d` dimensions.
pub fn inducing_count(d: usize, n_total: usize) -> usize {
    (2 * d).min(10).max(n_total / 20).clamp(1, 50)
}

/// Outside-data posterior under the FITC model, ready to be evaluated at any target set.
#[derive(Debug, Clone)]
pub struct FitcPosterior {
    inducing: Vec<Vec<f64>>,
    params: KernelParams,
    l_u: Cholesky,
    l_b: Cholesky,
    /// `L_B⁻¹ A D⁻¹ y_o`
    c: Vec<f64>,
}

impl FitcPosterior {
    pub fn new(outside: &[Vec<f64>], y_outside: &[f64], inducing: Vec<Vec<f64>>, params: KernelParams) -> Result<Self> {
        if outside.len() != y_outside.len() {
            return Err(Error::DimensionMismatch { expected: outside.len(), got: y_outside.len() });
        }
        if inducing.is_empty() {
            return Err(Error::Config("inducing set must not be empty"));
        }
        let k_uo = Matrix::from_fn(inducing.len(), outside.len(), |r, o| matern52(&inducing[r], &outside[o], &params));
        let k_uu = kernel_matrix(&inducing, &params);
        let sys = InducingSystem::build(&k_uu, &k_uo, &params, y_outside)?;
        Ok(Self { inducing, params, l_u: sys.l_u, l_b: sys.l_b, c: sys.c })
    }

    pub fn inducing(&self) -> &[Vec<f64>] {
        &self.inducing
    }

    /// Returns `(a, b)` with `a = L_u⁻¹ k_u(x)` and `b = L_B⁻¹ a`.
    fn project(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a: Vec<f64> = self.inducing.iter().map(|u| matern52(u, x, &self.params)).collect();
        self.l_u.solve_lower_in_place(&mut a);
        let b = self.l_b.solve_lower(&a);
        (a, b)
    }

    /// Posterior mean vector and covariance matrix at `targets`.
    pub fn prior(&self, targets: &[Vec<f64>]) -> (Vec<f64>, Matrix) {
        let proj: Vec<(Vec<f64>, Vec<f64>)> = targets.iter().map(|t| self.project(t)).collect();
        let mean = proj.iter().map(|(_, b)| dot(b, &self.c)).collect();
        let cov = Matrix::symmetric_from_fn(targets.len(), |i, j| {
            matern52(&targets[i], &targets[j], &self.params) - dot(&proj[i].0, &proj[j].0) + dot(&proj[i].1, &proj[j].1)
        });
        (mean, cov)
    }
}

struct InducingSystem {
    l_u: Cholesky,
    l_b: Cholesky,
    c: Vec<f64>,
    lml: f64,
}

impl InducingSystem {
    fn build(k_uu: &Matrix, k_uo: &Matrix, params: &KernelParams, y: &[f64]) -> Result<Self> {
        let (m, n) = (k_uo.rows(), k_uo.cols());
        let l_u = Cholesky::with_jitter(k_uu)?;
        let l = l_u.factor();
        // A = L_u⁻¹ K_uo by forward substitution over rows
        let mut a = k_uo.clone();
        for r in 0..m {
            for s in 0..r {
                let lrs = l[(r, s)];
                if lrs != 0.0 {
                    let (head, tail) = a.as_mut_slice().split_at_mut(r * n);
                    let src = &head[s * n..s * n + n];
                    for (t, v) in tail[..n].iter_mut().zip(src) {
                        *t -= lrs * v;
                    }
                }
            }
            let inv = 1.0 / l[(r, r)];
            for v in a.row_mut(r) {
                *v *= inv;
            }
        }
        let mut d = alloc::vec![params.signal_variance; n];
        for r in 0..m {
            for (dv, av) in d.iter_mut().zip(a.row(r)) {
                *dv -= av * av;
            }
        }
        for dv in d.iter_mut() {
            *dv = dv.max(0.0) + params.noise_variance;
        }
        let inv_d: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        let mut b = Matrix::zeros(m, m);
        let mut scaled = alloc::vec![0.0; n];
        for r in 0..m {
            for ((s, av), w) in scaled.iter_mut().zip(a.row(r)).zip(&inv_d) {
                *s = av * w;
            }
            for q in 0..=r {
                let v = dot(&scaled, a.row(q));
                b[(r, q)] = v;
                b[(q, r)] = v;
            }
            b[(r, r)] += 1.0;
        }
        let l_b = Cholesky::with_jitter(&b)?;
        let v: Vec<f64> =
            (0..m).map(|r| a.row(r).iter().zip(y).zip(&inv_d).map(|((av, yv), w)| av * yv * w).sum()).collect();
        let c = l_b.solve_lower(&v);
        let quad: f64 = y.iter().zip(&inv_d).map(|(yv, w)| yv * yv * w).sum::<f64>() - dot(&c, &c);
        let log_det: f64 = l_b.log_det() + d.iter().map(|v| libm::log(*v)).sum::<f64>();
        let lml = -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;
        Ok(Self { l_u, l_b, c, lml })
    }
}

/// Posterior mean and covariance at `targets` given outside data under the FITC model.
pub fn fitc_global_prior(
    outside: &[Vec<f64>],
    y_outside: &[f64],
    inducing: &[Vec<f64>],
    params: &KernelParams,
    targets: &[Vec<f64>],
) -> Result<(Vec<f64>, Matrix)> {
    if outside.is_empty() {
        return Ok((alloc::vec![0.0; targets.len()], kernel_matrix(targets, params)));
    }
    Ok(FitcPosterior::new(outside, y_outside, inducing.to_vec(), params.clone())?.prior(targets))
}

/// FITC log marginal likelihood of `y_outside` for the given inducing inputs.
pub fn fitc_log_marginal_likelihood(
    outside: &[Vec<f64>],
    y_outside: &[f64],
    inducing: &[Vec<f64>],
    params: &KernelParams,
) -> Result<f64> {
    let k_uo = Matrix::from_fn(inducing.len(), outside.len(), |r, o| matern52(&inducing[r], &outside[o], params));
    Ok(InducingSystem::build(&kernel_matrix(inducing, params), &k_uo, params, y_outside)?.lml)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LgpgaSettings {
    /// Stage-1 hyperparameter fit on the inside data.
    pub fit: FitOptions,
    /// Overrides [`inducing_count`].
    pub n_inducing: Option<usize>,
    pub max_passes: usize,
    pub initial_step: f64,
    pub min_step: f64,
    /// Cap on stage-2 objective evaluations.
    pub max_evaluations: usize,
    /// Seed location for inducing initialization; defaults to the inside centroid.
    pub center: Option<Vec<f64>>,
    /// Box that inducing inputs stay in; defaults to the bounding box of all inputs.
    pub domain: Option<AxisBox>,
}

impl Default for LgpgaSettings {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            n_inducing: None,
            max_passes: 50,
            initial_step: 0.1,
            min_step: 1e-3,
            max_evaluations: 400,
            center: None,
            domain: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Posterior {
    Exact(GpModel),
    Augmented {
        fitc: FitcPosterior,
        inside_a: Vec<Vec<f64>>,
        inside_b: Vec<Vec<f64>>,
        l_c: Cholesky,
        alpha_c: Vec<f64>,
    },
}

/// Fitted LGPGA surrogate. Immutable once built.
#[derive(Debug, Clone)]
pub struct LgpgaModel {
    inside: Vec<Vec<f64>>,
    outside: Vec<Vec<f64>>,
    params: KernelParams,
    transform: Standardizer,
    inducing: Vec<Vec<f64>>,
    exact_fallback: bool,
    stage2_trace: Vec<f64>,
    posterior: Posterior,
}

impl LgpgaModel {
    /// Conditions on transformed targets with fixed hyperparameters and inducing inputs.
    ///
    /// An empty `inducing` set means the outside inputs themselves are used.
    pub fn condition(
        inside: Vec<Vec<f64>>,
        y_inside: &[f64],
        outside: Vec<Vec<f64>>,
        y_outside: &[f64],
        params: KernelParams,
        inducing: Vec<Vec<f64>>,
        transform: Standardizer,
    ) -> Result<Self> {
        if inside.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if outside.is_empty() {
            let gp = GpModel::condition_transformed(inside.clone(), y_inside, params.clone(), transform)?;
            return Ok(Self {
                inside,
                outside,
                params,
                transform,
                inducing: Vec::new(),
                exact_fallback: true,
                stage2_trace: Vec::new(),
                posterior: Posterior::Exact(gp),
            });
        }
        let exact_fallback = inducing.is_empty();
        let inducing = if exact_fallback { outside.clone() } else { inducing };
        let fitc = FitcPosterior::new(&outside, y_outside, inducing.clone(), params.clone())?;
        let (inside_a, inside_b): (Vec<Vec<f64>>, Vec<Vec<f64>>) = inside.iter().map(|x| fitc.project(x)).unzip();
        let n = inside.len();
        let mut cov = Matrix::symmetric_from_fn(n, |i, j| {
            matern52(&inside[i], &inside[j], &params) - dot(&inside_a[i], &inside_a[j])
                + dot(&inside_b[i], &inside_b[j])
        });
        cov.add_diagonal(params.noise_variance);
        let l_c = Cholesky::with_jitter(&cov)?;
        let residual: Vec<f64> = y_inside.iter().zip(&inside_b).map(|(y, b)| y - dot(b, &fitc.c)).collect();
        let alpha_c = l_c.solve(&residual);
        Ok(Self {
            inside,
            outside,
            params,
            transform,
            inducing,
            exact_fallback,
            stage2_trace: Vec::new(),
            posterior: Posterior::Augmented { fitc, inside_a, inside_b, l_c, alpha_c },
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn transform(&self) -> Standardizer {
        self.transform
    }

    pub fn inducing(&self) -> &[Vec<f64>] {
        &self.inducing
    }

    pub fn inside(&self) -> &[Vec<f64>] {
        &self.inside
    }

    pub fn outside(&self) -> &[Vec<f64>] {
        &self.outside
    }

    /// True when stage 2 was skipped (fewer outside points than inducing points).
    pub fn is_exact_fallback(&self) -> bool {
        self.exact_fallback
    }

    /// FITC log marginal likelihood after each stage-2 pass, starting with the initial set.
    pub fn stage2_trace(&self) -> &[f64] {
        &self.stage2_trace
    }

    /// Latent mean and variance in the transformed frame, variance not clamped.
    pub fn predict_latent_unclamped(&self, x: &[f64]) -> (f64, f64) {
        match &self.posterior {
            Posterior::Exact(gp) => gp.predict_latent_unclamped(x),
            Posterior::Augmented { fitc, inside_a, inside_b, l_c, alpha_c } => {
                let (a, b) = fitc.project(x);
                let prior_mean = dot(&b, &fitc.c);
                let prior_var = self.params.signal_variance - dot(&a, &a) + dot(&b, &b);
                let mut s: Vec<f64> = (0..self.inside.len())
                    .map(|i| matern52(&self.inside[i], x, &self.params) - dot(&inside_a[i], &a) + dot(&inside_b[i], &b))
                    .collect();
                let mean = prior_mean + dot(&s, alpha_c);
                l_c.solve_lower_in_place(&mut s);
                (mean, prior_var - dot(&s, &s))
            }
        }
    }

    /// Predictive mean and latent variance in the original target frame.
    pub fn predict_one(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.predict_latent_unclamped(x);
        let s = self.transform.scale;
        (m * s + self.transform.offset, v.clamp(0.0, self.params.signal_variance) * s * s)
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        xs.iter().map(|x| self.predict_one(x)).unzip()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy farthest-point subset of `points`, seeded at the point nearest `center`.
pub fn farthest_point_subset(points: &[Vec<f64>], m: usize, center: &[f64]) -> Vec<usize> {
    if points.is_empty() || m == 0 {
        return Vec::new();
    }
    let mut first = 0;
    for i in 1..points.len() {
        if sq_dist(&points[i], center) < sq_dist(&points[first], center) {
            first = i;
        }
    }
    let mut chosen = alloc::vec![first];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while chosen.len() < m.min(points.len()) {
        let mut next = 0;
        for i in 1..points.len() {
            if nearest[i] > nearest[next] {
                next = i;
            }
        }
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen
}

fn bounding_box(points: impl Iterator<Item = Vec<f64>>, dim: usize) -> AxisBox {
    let mut lo = alloc::vec![f64::INFINITY; dim];
    let mut hi = alloc::vec![f64::NEG_INFINITY; dim];
    for p in points {
        for j in 0..dim {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    AxisBox::new(lo, hi).unwrap_or_else(|_| AxisBox::unit(dim))
}

/// Coordinate-wise local search of inducing inputs maximizing the FITC marginal likelihood.
/// Returns the optimized inputs and the objective after each pass.
fn optimize_inducing(
    outside: &[Vec<f64>],
    y: &[f64],
    mut inducing: Vec<Vec<f64>>,
    params: &KernelParams,
    domain: &AxisBox,
    settings: &LgpgaSettings,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (m, n) = (inducing.len(), outside.len());
    let dim = params.dim();
    let mut k_uo = Matrix::from_fn(m, n, |r, o| matern52(&inducing[r], &outside[o], params));
    let mut k_uu = kernel_matrix(&inducing, params);
    let mut best = InducingSystem::build(&k_uu, &k_uo, params, y)?.lml;
    let mut trace = alloc::vec![best];
    let mut step = settings.initial_step;
    let mut evaluations = 0;
    let mut row = alloc::vec![0.0; n];
    let mut col = alloc::vec![0.0; m];

    'passes: for _ in 0..settings.max_passes {
        if step < settings.min_step {
            break;
        }
        let mut improved = false;
        for k in 0..m {
            for j in 0..dim {
                for sign in [1.0, -1.0] {
                    if evaluations >= settings.max_evaluations {
                        trace.push(best);
                        break 'passes;
                    }
                    let old = inducing[k][j];
                    let cand = (old + sign * step * domain.width(j)).clamp(domain.lo()[j], domain.hi()[j]);
                    if cand == old {
                        continue;
                    }
                    inducing[k][j] = cand;
                    for (o, v) in row.iter_mut().enumerate() {
                        *v = matern52(&inducing[k], &outside[o], params);
                    }
                    for (r, v) in col.iter_mut().enumerate() {
                        *v = matern52(&inducing[k], &inducing[r], params);
                    }
                    let saved_row = k_uo.row(k).to_vec();
                    let saved_col: Vec<f64> = (0..m).map(|r| k_uu[(r, k)]).collect();
                    k_uo.row_mut(k).copy_from_slice(&row);
                    for r in 0..m {
                        k_uu[(r, k)] = col[r];
                        k_uu[(k, r)] = col[r];
                    }
                    evaluations += 1;
                    let value =
                        InducingSystem::build(&k_uu, &k_uo, params, y).map(|s| s.lml).unwrap_or(f64::NEG_INFINITY);
                    if value > best {
                        best = value;
                        improved = true;
                        break;
                    }
                    inducing[k][j] = old;
                    k_uo.row_mut(k).copy_from_slice(&saved_row);
                    for r in 0..m {
                        k_uu[(r, k)] = saved_col[r];
                        k_uu[(k, r)] = saved_col[r];
                    }
                }
            }
        }
        trace.push(best);
        if !improved {
            step *= 0.5;
        }
    }
    Ok((inducing, trace))
}

/// Two-stage fit: exact GP hyperparameters from the inside data, then inducing
/// inputs placed by maximizing the FITC marginal likelihood of the outside data.
///
/// Both target sets are standardized with the statistics of all targets.
pub fn lgpga_fit(
    inside: &[Vec<f64>],
    y_inside: &[f64],
    outside: &[Vec<f64>],
    y_outside: &[f64],
    settings: &LgpgaSettings,
    rng: &mut RngState,
) -> Result<LgpgaModel> {
    if inside.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inside.len() != y_inside.len() {
        return Err(Error::DimensionMismatch { expected: inside.len(), got: y_inside.len() });
    }
    if outside.len() != y_outside.len() {
        return Err(Error::DimensionMismatch { expected: outside.len(), got: y_outside.len() });
    }
    let dim = inside[0].len();
    let all_targets: Vec<f64> = y_inside.iter().chain(y_outside).copied().collect();
    let transform = Standardizer::fit(&all_targets);
    let yi = transform.apply(y_inside);
    let yo = transform.apply(y_outside);
    let params = fit_kernel(inside, &yi, &settings.fit, rng)?;

    let m = settings.n_inducing.unwrap_or_else(|| inducing_count(dim, inside.len() + outside.len())).max(1);
    if outside.len() < m {
        return LgpgaModel::condition(inside.to_vec(), &yi, outside.to_vec(), &yo, params, Vec::new(), transform);
    }
    let center = settings.center.clone().unwrap_or_else(|| {
        let mut c = alloc::vec![0.0; dim];
        for p in inside {
            for j in 0..dim {
                c[j] += p[j] / inside.len() as f64;
            }
        }
        c
    });
    let init: Vec<Vec<f64>> =
        farthest_point_subset(outside, m, &center).into_iter().map(|i| outside[i].clone()).collect();
    let domain = settings.domain.clone().unwrap_or_else(|| bounding_box(inside.iter().chain(outside).cloned(), dim));
    let (inducing, trace) = optimize_inducing(outside, &yo, init, &params, &domain, settings)?;
    let mut model = LgpgaModel::condition(inside.to_vec(), &yi, outside.to_vec(), &yo, params, inducing, transform)?;
    model.stage2_trace = trace;
    Ok(model)
}
