//! Gaussian-process surrogate with a squared-exponential (ARD) kernel.
//!
//! Targets are z-scored per model; posterior queries answer in that
//! normalized space and [`Normalizer`] maps back to raw units.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::optim::minimize_box;

/// Largest noise variance the jitter ladder will try before giving up.
pub const MAX_JITTER: f64 = 1e-2;
/// Lower rung of the jitter ladder.
pub const MIN_JITTER: f64 = 1e-8;
/// Default observation-noise variance in normalized target space.
pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-6;

const SIGNAL_BOUNDS: (f64, f64) = (1e-4, 1e4);
const NOISE_BOUNDS: (f64, f64) = (1e-8, 1e-1);
const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeKernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl SeKernelParams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(signal_variance > 0.0) || !signal_variance.is_finite() {
            return Err(Error::Contract(format!("signal variance must be > 0, got {signal_variance}")));
        }
        if lengthscales.is_empty() || lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Contract(format!("lengthscales must be > 0, got {lengthscales:?}")));
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::Contract(format!("noise variance must be >= 0, got {noise_variance}")));
        }
        Ok(Self {
            signal_variance,
            lengthscales,
            noise_variance,
        })
    }

    /// Unit signal variance, lengthscale 0.2 in every dimension of a unit
    /// cube and the default noise floor.
    pub fn default_for(d: usize) -> Self {
        Self {
            signal_variance: 1.0,
            lengthscales: vec![0.2; d],
            noise_variance: DEFAULT_NOISE_VARIANCE,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }
}

/// `signal_variance * exp(-1/2 * sum_j ((a_j - b_j) / l_j)^2)`
pub fn se_kernel(a: &[f64], b: &[f64], p: &SeKernelParams) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&p.lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    p.signal_variance * (-0.5 * r2).exp()
}

/// Predictive mean and standard deviation at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub stddev: f64,
}

/// z-score transform of one objective's raw values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub stddev: f64,
}

impl Normalizer {
    /// Standard deviations below `1e-12` are replaced by 1.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Self {
            mean,
            stddev: if sd < 1e-12 { 1.0 } else { sd },
        }
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.mean) / self.stddev
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.stddev + self.mean
    }

    pub fn denormalize_posterior(&self, p: Posterior) -> Posterior {
        Posterior {
            mean: self.denormalize(p.mean),
            stddev: p.stddev * self.stddev,
        }
    }
}

/// A fitted GP. Immutable; refitting produces a new value.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: SeKernelParams,
    inv_ls2: Vec<f64>,
    d: usize,
    // row-major n x d
    inputs: Vec<f64>,
    raw_targets: Vec<f64>,
    targets: DVector<f64>,
    normalizer: Normalizer,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Condition a GP with kernel `prior` on the given data. If the kernel
    /// matrix cannot be factored, the noise variance is raised by decades up
    /// to [`MAX_JITTER`].
    pub fn fit<P: AsRef<[f64]>>(inputs: &[P], raw_targets: &[f64], prior: SeKernelParams) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Contract("GP fit needs at least one training point".into()));
        }
        check_dims(inputs.len(), raw_targets.len())?;
        if let Some(bad) = raw_targets.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite training target {bad}")));
        }
        let d = prior.dim();
        let mut flat = Vec::with_capacity(inputs.len() * d);
        for x in inputs {
            check_dims(d, x.as_ref().len())?;
            flat.extend_from_slice(x.as_ref());
        }
        let normalizer = Normalizer::from_values(raw_targets);
        let targets = DVector::from_iterator(raw_targets.len(), raw_targets.iter().map(|y| normalizer.normalize(*y)));

        let mut noise = prior.noise_variance;
        loop {
            let kernel = SeKernelParams {
                noise_variance: noise,
                ..prior.clone()
            };
            if let Some((chol, alpha)) = factor(&flat, d, &targets, &kernel) {
                let inv_ls2 = kernel.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
                return Ok(Self {
                    kernel,
                    inv_ls2,
                    d,
                    inputs: flat,
                    raw_targets: raw_targets.to_vec(),
                    targets,
                    normalizer,
                    chol,
                    alpha,
                });
            }
            if noise >= MAX_JITTER {
                return Err(Error::Factorization { noise });
            }
            noise = if noise < MIN_JITTER { MIN_JITTER } else { (noise * 10.0).min(MAX_JITTER) };
        }
    }

    /// Same hyperparameters, new data.
    pub fn condition_on<P: AsRef<[f64]>>(&self, inputs: &[P], raw_targets: &[f64]) -> Result<Self> {
        Self::fit(inputs, raw_targets, self.kernel.clone())
    }

    pub fn kernel(&self) -> &SeKernelParams {
        &self.kernel
    }

    pub fn normalizer(&self) -> Normalizer {
        self.normalizer
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.raw_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_targets.is_empty()
    }

    pub fn train_input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    pub fn train_inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.d)
    }

    pub fn raw_targets(&self) -> &[f64] {
        &self.raw_targets
    }

    /// z-scored training targets.
    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    /// Lower-triangular `L` with `L L^T = K + noise_variance * I`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Smallest normalized training target (the EI incumbent).
    pub fn best_target(&self) -> f64 {
        self.targets.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn cross_kernel(&self, x: &[f64]) -> DVector<f64> {
        let sv = self.kernel.signal_variance;
        DVector::from_iterator(
            self.len(),
            self.train_inputs().map(|t| {
                let mut r2 = 0.0;
                for j in 0..self.d {
                    let diff = x[j] - t[j];
                    r2 += diff * diff * self.inv_ls2[j];
                }
                sv * (-0.5 * r2).exp()
            }),
        )
    }

    /// Latent-function posterior at `x`, in normalized target space.
    pub fn posterior(&self, x: &[f64]) -> Posterior {
        debug_assert_eq!(x.len(), self.d);
        let mut k = self.cross_kernel(x);
        let mean = k.dot(&self.alpha);
        solve_lower_in_place(&self.chol, &mut k);
        let var = (self.kernel.signal_variance - k.norm_squared()).max(0.0);
        Posterior {
            mean,
            stddev: var.sqrt(),
        }
    }

    /// Posterior mean only (skips the triangular solve).
    pub fn posterior_mean(&self, x: &[f64]) -> f64 {
        self.cross_kernel(x).dot(&self.alpha)
    }

    /// Log marginal likelihood of the normalized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let logdet: f64 = self.chol.diagonal().iter().map(|v| v.ln()).sum();
        -0.5 * self.targets.dot(&self.alpha) - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

fn kernel_matrix(inputs: &[f64], d: usize, p: &SeKernelParams) -> DMatrix<f64> {
    let n = inputs.len() / d;
    let mut k = DMatrix::zeros(n, n);
    for a in 0..n {
        k[(a, a)] = p.signal_variance + p.noise_variance;
        for b in 0..a {
            let v = se_kernel(&inputs[a * d..(a + 1) * d], &inputs[b * d..(b + 1) * d], p);
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    k
}

fn factor(inputs: &[f64], d: usize, y: &DVector<f64>, p: &SeKernelParams) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let k = kernel_matrix(inputs, d, p);
    let chol = k.cholesky()?;
    let alpha = chol.solve(y);
    if alpha.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((chol.unpack(), alpha))
}

/// Forward substitution `L z = b`, overwriting `b`.
pub(crate) fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Log marginal likelihood and its gradient with respect to the log-space
/// parameter vector `[ln sv, ln l_1..ln l_m, ln noise]`, where `m` is `d`
/// (ARD) or 1 (one lengthscale shared by all dimensions).
pub fn log_marginal_likelihood_with_grad(
    inputs: &[f64],
    d: usize,
    y: &DVector<f64>,
    log_params: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let n = y.len();
    let m = log_params.len() - 2;
    let sv = log_params[0].exp();
    let nv = log_params[m + 1].exp();
    let ls: Vec<f64> = (0..d).map(|j| log_params[1 + if m == 1 { 0 } else { j }].exp()).collect();
    let inv_ls2: Vec<f64> = ls.iter().map(|l| 1.0 / (l * l)).collect();

    let mut kf = DMatrix::zeros(n, n);
    for a in 0..n {
        kf[(a, a)] = sv;
        for b in 0..a {
            let mut r2 = 0.0;
            for j in 0..d {
                let diff = inputs[a * d + j] - inputs[b * d + j];
                r2 += diff * diff * inv_ls2[j];
            }
            let v = sv * (-0.5 * r2).exp();
            kf[(a, b)] = v;
            kf[(b, a)] = v;
        }
    }
    let mut k = kf.clone();
    for a in 0..n {
        k[(a, a)] += nv;
    }
    let chol = k.cholesky()?;
    let alpha = chol.solve(y);
    let kinv = chol.inverse();
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum::<f64>() * 0.5;
    let lml = -0.5 * y.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !lml.is_finite() {
        return None;
    }

    // dL/dtheta = 1/2 tr(W dK/dtheta), W = alpha alpha^T - K^-1
    let mut grad = vec![0.0; m + 2];
    let mut trace_w = 0.0;
    for a in 0..n {
        let waa = alpha[a] * alpha[a] - kinv[(a, a)];
        trace_w += waa;
        grad[0] += 0.5 * waa * kf[(a, a)];
        for b in 0..a {
            // symmetric pair counted twice
            let w = alpha[a] * alpha[b] - kinv[(a, b)];
            let wk = w * kf[(a, b)];
            grad[0] += wk;
            for j in 0..d {
                let diff = inputs[a * d + j] - inputs[b * d + j];
                let g = wk * diff * diff * inv_ls2[j];
                grad[1 + if m == 1 { 0 } else { j }] += g;
            }
        }
    }
    grad[m + 1] = 0.5 * nv * trace_w;
    Some((lml, grad))
}

/// Settings for [`refit_hyperparameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitOptions {
    pub starts: usize,
    pub max_iters: usize,
    /// Per-dimension lengthscales when true, one shared lengthscale otherwise.
    pub ard: bool,
    pub seed: u64,
}

impl Default for RefitOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iters: 60,
            ard: true,
            seed: 0,
        }
    }
}

/// Outcome of one hyperparameter refit, also the text record written to
/// the model log.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitReport {
    pub n: usize,
    pub previous_lml: f64,
    pub lml: f64,
    pub params: SeKernelParams,
    pub warning: Option<String>,
}

impl fmt::Display for RefitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} lml={:.6} (was {:.6}) signal_variance={:.6e} noise_variance={:.6e} lengthscales=[",
            self.n, self.lml, self.previous_lml, self.params.signal_variance, self.params.noise_variance
        )?;
        for (i, l) in self.params.lengthscales.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l:.6e}")?;
        }
        write!(f, "]")?;
        if let Some(w) = &self.warning {
            write!(f, " warning: {w}")?;
        }
        Ok(())
    }
}

/// Maximizes the log marginal likelihood over the kernel parameters with a
/// multi-start bounded quasi-Newton search in log space. The result never
/// has lower likelihood than `model`; if no start succeeds the incoming
/// parameters are kept and the report carries a warning.
pub fn refit_hyperparameters(model: &GpModel, opts: &RefitOptions) -> Result<(GpModel, RefitReport)> {
    if model.len() < 2 {
        return Err(Error::Contract("hyperparameter refit needs at least 2 training points".into()));
    }
    let d = model.dim();
    let m = if opts.ard { d } else { 1 };

    let ranges: Vec<f64> = (0..d)
        .map(|j| {
            let (lo, hi) = model
                .train_inputs()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[j]), hi.max(x[j])));
            if hi - lo > 1e-12 {
                hi - lo
            } else {
                1.0
            }
        })
        .collect();
    let ls_ranges: Vec<f64> = if opts.ard {
        ranges.clone()
    } else {
        vec![ranges.iter().copied().fold(0.0, f64::max)]
    };

    let mut lo = vec![SIGNAL_BOUNDS.0.ln()];
    let mut hi = vec![SIGNAL_BOUNDS.1.ln()];
    for r in &ls_ranges {
        lo.push((LENGTHSCALE_BOUNDS.0 * r).ln());
        hi.push((LENGTHSCALE_BOUNDS.1 * r).ln());
    }
    lo.push(NOISE_BOUNDS.0.ln());
    hi.push(NOISE_BOUNDS.1.ln());

    let current = &model.kernel;
    let mut x0 = vec![current.signal_variance.ln()];
    if opts.ard {
        x0.extend(current.lengthscales.iter().map(|l| l.ln()));
    } else {
        let mean_log = current.lengthscales.iter().map(|l| l.ln()).sum::<f64>() / d as f64;
        x0.push(mean_log);
    }
    x0.push(current.noise_variance.max(NOISE_BOUNDS.0).ln());

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![x0];
    for _ in 1..opts.starts {
        let mut s = Vec::with_capacity(m + 2);
        s.push(rng.random_range(0.1f64.ln()..10.0f64.ln()));
        for r in &ls_ranges {
            s.push(rng.random_range((0.05 * r).ln()..(2.0 * r).ln()));
        }
        s.push(rng.random_range(NOISE_BOUNDS.0.ln()..1e-3f64.ln()));
        starts.push(s);
    }

    let y = model.targets.clone();
    let inputs = &model.inputs;
    let mut objective = |p: &[f64]| {
        log_marginal_likelihood_with_grad(inputs, d, &y, p).map(|(v, g)| (-v, g.into_iter().map(|x| -x).collect()))
    };

    let previous_lml = model.log_marginal_likelihood();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in &starts {
        if let Some(min) = minimize_box(&mut objective, s, &lo, &hi, opts.max_iters) {
            let lml = -min.value;
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, min.x));
            }
        }
    }

    let keep = |warning: Option<String>| {
        Ok((
            model.clone(),
            RefitReport {
                n: model.len(),
                previous_lml,
                lml: previous_lml,
                params: model.kernel.clone(),
                warning,
            },
        ))
    };

    let Some((_, p)) = best else {
        log::warn!("hyperparameter refit: all {} starts failed; keeping previous parameters", opts.starts);
        return keep(Some("all starts failed; kept previous parameters".into()));
    };
    let lengthscales = (0..d).map(|j| p[1 + if opts.ard { j } else { 0 }].exp()).collect();
    let params = SeKernelParams {
        signal_variance: p[0].exp(),
        lengthscales,
        noise_variance: p[m + 1].exp(),
    };
    let refit = match GpModel::fit(&model.inputs.chunks_exact(d).collect::<Vec<_>>(), &model.raw_targets, params) {
        Ok(g) => g,
        Err(e) => return keep(Some(format!("refit model could not be factored: {e}"))),
    };
    let lml = refit.log_marginal_likelihood();
    if !(lml >= previous_lml) {
        return keep(None);
    }
    let report = RefitReport {
        n: refit.len(),
        previous_lml,
        lml,
        params: refit.kernel.clone(),
        warning: None,
    };
    Ok((refit, report))
}
