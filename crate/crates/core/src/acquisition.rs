//! Single-objective acquisition functions (EI, UCB, LCB, Thompson sampling),
//! the confidence-width schedule `beta_t`, and random-feature sample paths.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpModel, Posterior, MAX_JITTER, MIN_JITTER};

/// Default stand-in for `|X|` on continuous domains.
pub const DEFAULT_CARDINALITY_PROXY: f64 = 1e6;
pub const DEFAULT_DELTA: f64 = 0.1;
/// Default number of random features per Thompson sample path.
pub const DEFAULT_FEATURES: usize = 500;

/// `beta_t = 2 ln(|X| pi^2 t^2 / (6 delta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub cardinality_proxy: f64,
    pub delta: f64,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self {
            cardinality_proxy: DEFAULT_CARDINALITY_PROXY,
            delta: DEFAULT_DELTA,
        }
    }
}

impl BetaSchedule {
    pub fn new(cardinality_proxy: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Contract(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(cardinality_proxy >= 1.0) || !cardinality_proxy.is_finite() {
            return Err(Error::Contract(format!(
                "cardinality proxy must be >= 1, got {cardinality_proxy}"
            )));
        }
        Ok(Self {
            cardinality_proxy,
            delta,
        })
    }

    /// `t` is 1-based; `t = 0` is treated as 1.
    pub fn beta(&self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        2.0 * (self.cardinality_proxy * PI * PI * t * t / (6.0 * self.delta)).ln()
    }
}

/// Free-function form of [`BetaSchedule::beta`].
pub fn beta_t(schedule: &BetaSchedule, t: usize) -> f64 {
    schedule.beta(t)
}

pub fn ucb(p: Posterior, beta: f64) -> f64 {
    p.mean + beta.sqrt() * p.stddev
}

pub fn lcb(p: Posterior, beta: f64) -> f64 {
    p.mean - beta.sqrt() * p.stddev
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Expected improvement below the incumbent `tau`.
pub fn ei(p: Posterior, tau: f64) -> f64 {
    if p.stddev <= 0.0 {
        return (tau - p.mean).max(0.0);
    }
    let a = (tau - p.mean) / p.stddev;
    (p.stddev * (a * normal_cdf(a) + normal_pdf(a))).max(0.0)
}

/// Floor for [`log_ei`] where the improvement is exactly zero.
pub const LOG_EI_FLOOR: f64 = -1e300;

/// `ln EI`, accurate far into the tail where [`ei`] underflows to zero.
/// Being strictly increasing in EI, it has the same maximizers and gives
/// the same Pareto sets when used as an objective.
pub fn log_ei(p: Posterior, tau: f64) -> f64 {
    if p.stddev <= 0.0 {
        let imp = tau - p.mean;
        return if imp > 0.0 { imp.ln() } else { LOG_EI_FLOOR };
    }
    let z = (tau - p.mean) / p.stddev;
    let log_h = if z > -25.0 {
        (z * normal_cdf(z) + normal_pdf(z)).ln()
    } else {
        // z Phi(z) + phi(z) = phi(z) / z^2 (1 - 3/z^2 + 15/z^4 - 105/z^6 + ...)
        let r = 1.0 / (z * z);
        let series = r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
        -0.5 * z * z - 0.5 * (2.0 * PI).ln() + series.ln()
    };
    (p.stddev.ln() + log_h).max(LOG_EI_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Ei,
    Ucb,
    Lcb,
    Ts,
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::Ucb => "ucb",
            AcquisitionKind::Lcb => "lcb",
            AcquisitionKind::Ts => "ts",
        })
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ei" => Ok(Self::Ei),
            "ucb" => Ok(Self::Ucb),
            "lcb" => Ok(Self::Lcb),
            "ts" => Ok(Self::Ts),
            other => Err(Error::config("acquisition", format!("unknown kind `{other}`"))),
        }
    }
}

/// The acquisition used for every objective of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    pub beta: BetaSchedule,
    /// Random features per Thompson sample path.
    pub ts_features: usize,
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind) -> Self {
        Self {
            kind,
            beta: BetaSchedule::default(),
            ts_features: DEFAULT_FEATURES,
        }
    }
}

/// One posterior function draw, approximated with random Fourier features:
/// `f(x) = scale * sum_i w_i cos(omega_i . x + b_i)`.
#[derive(Debug, Clone)]
pub struct SamplePath {
    /// `m x d` spectral frequencies.
    pub feature_weights: DMatrix<f64>,
    pub feature_phases: DVector<f64>,
    pub linear_weights: DVector<f64>,
    scale: f64,
}

impl SamplePath {
    pub fn num_features(&self) -> usize {
        self.feature_phases.len()
    }

    fn features(&self, x: &[f64]) -> DVector<f64> {
        let m = self.num_features();
        DVector::from_fn(m, |i, _| {
            let mut s = self.feature_phases[i];
            for (j, xj) in x.iter().enumerate() {
                s += self.feature_weights[(i, j)] * xj;
            }
            self.scale * s.cos()
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let m = self.num_features();
        let mut acc = 0.0;
        for i in 0..m {
            let mut s = self.feature_phases[i];
            for (j, xj) in x.iter().enumerate() {
                s += self.feature_weights[(i, j)] * xj;
            }
            acc += self.linear_weights[i] * s.cos();
        }
        self.scale * acc
    }

    /// Kernel implied by the features: `phi(a) . phi(b)`.
    pub fn feature_kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.features(a).dot(&self.features(b))
    }
}

/// Draws one posterior sample path of `model` (normalized target space).
///
/// Frequencies come from the SE kernel's spectral density; the linear
/// weights are a draw from their Gaussian posterior given the training
/// data, obtained by conditioning a prior draw on the observations.
pub fn draw_sample_path(model: &GpModel, m: usize, seed: u64) -> Result<SamplePath> {
    if m == 0 {
        return Err(Error::Contract("sample path needs at least one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let kernel = model.kernel();
    let feature_weights = DMatrix::from_fn(m, d, |_, j| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z / kernel.lengthscales[j]
    });
    let feature_phases = DVector::from_fn(m, |_, _| rng.random_range(0.0..2.0 * PI));
    let scale = (2.0 * kernel.signal_variance / m as f64).sqrt();
    let mut path = SamplePath {
        feature_weights,
        feature_phases,
        linear_weights: DVector::zeros(m),
        scale,
    };

    let n = model.len();
    let phi = DMatrix::from_fn(n, m, |_, _| 0.0);
    let mut phi = phi;
    for (r, x) in model.train_inputs().enumerate() {
        phi.row_mut(r).copy_from(&path.features(x).transpose());
    }
    let prior = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    let mut noise = kernel.noise_variance;
    let eps = DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    });

    let gram = &phi * phi.transpose();
    loop {
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += noise;
        }
        if let Some(chol) = a.cholesky() {
            let resid = model.targets() - &phi * &prior - eps.scale(noise.sqrt());
            let v = chol.solve(&resid);
            path.linear_weights = &prior + phi.transpose() * v;
            return Ok(path);
        }
        if noise >= MAX_JITTER {
            return Err(Error::Factorization { noise });
        }
        noise = if noise < MIN_JITTER { MIN_JITTER } else { (noise * 10.0).min(MAX_JITTER) };
    }
}

/// Value to minimize in the cheap multi-objective problem: LCB and Thompson
/// samples as-is, UCB and log-EI negated. `t` selects `beta_t`.
pub fn cheap_objective(
    spec: &AcquisitionSpec,
    model: &GpModel,
    path: Option<&SamplePath>,
    tau: f64,
    t: usize,
    x: &[f64],
) -> Result<f64> {
    let beta = spec.beta.beta(t);
    match spec.kind {
        AcquisitionKind::Lcb => Ok(lcb(model.posterior(x), beta)),
        AcquisitionKind::Ucb => Ok(-ucb(model.posterior(x), beta)),
        AcquisitionKind::Ei => Ok(-log_ei(model.posterior(x), tau)),
        AcquisitionKind::Ts => path
            .map(|p| p.eval(x))
            .ok_or_else(|| Error::Contract("Thompson sampling needs a sample path".into())),
    }
}

/// A cheap objective bound to one model for one outer iteration.
#[derive(Debug, Clone)]
pub struct BoundAcquisition<'a> {
    kind: AcquisitionKind,
    model: &'a GpModel,
    path: Option<SamplePath>,
    tau: f64,
    beta: f64,
}

impl<'a> BoundAcquisition<'a> {
    /// Draws a fresh sample path when `spec.kind` is Thompson sampling.
    pub fn new(spec: &AcquisitionSpec, model: &'a GpModel, t: usize, path_seed: u64) -> Result<Self> {
        let path = match spec.kind {
            AcquisitionKind::Ts => Some(draw_sample_path(model, spec.ts_features, path_seed)?),
            _ => None,
        };
        Ok(Self {
            kind: spec.kind,
            model,
            path,
            tau: model.best_target(),
            beta: spec.beta.beta(t),
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            AcquisitionKind::Lcb => lcb(self.model.posterior(x), self.beta),
            AcquisitionKind::Ucb => -ucb(self.model.posterior(x), self.beta),
            AcquisitionKind::Ei => -log_ei(self.model.posterior(x), self.tau),
            AcquisitionKind::Ts => self.path.as_ref().map_or(f64::NAN, |p| p.eval(x)),
        }
    }

    pub fn path(&self) -> Option<&SamplePath> {
        self.path.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::SeKernelParams;

    fn post(mean: f64, stddev: f64) -> Posterior {
        Posterior { mean, stddev }
    }

    #[test]
    fn beta_examples() {
        let s = BetaSchedule::new(1000.0, 0.05).unwrap();
        let direct = 2.0 * (1000.0 * PI * PI * 4.0 / 0.3f64).ln();
        assert!((s.beta(2) - direct).abs() < 1e-12);
        assert!((s.beta(2) - 23.57).abs() < 5e-3);
        assert!(s.beta(2) > s.beta(1));
        let near_one = BetaSchedule::new(1.0, 1.0 - 1e-9).unwrap();
        assert!(near_one.beta(1) > 0.0);
        assert!(BetaSchedule::new(10.0, 1.0).is_err());
        assert!(BetaSchedule::new(10.0, 0.0).is_err());
        assert!(BetaSchedule::new(0.5, 0.1).is_err());
    }

    #[test]
    fn confidence_bounds() {
        assert_eq!(ucb(post(1.0, 2.0), 4.0), 5.0);
        assert_eq!(lcb(post(1.0, 2.0), 4.0), -3.0);
        assert_eq!(ucb(post(1.0, 0.0), 4.0), 1.0);
        assert_eq!(lcb(post(1.0, 0.0), 4.0), 1.0);
        assert_eq!(ucb(post(1.0, 3.0), 0.0), 1.0);
        assert_eq!(lcb(post(1.0, 3.0), 0.0), 1.0);
    }

    #[test]
    fn ei_examples() {
        let phi0 = 1.0 / (2.0 * PI).sqrt();
        assert!((ei(post(0.3, 1.0), 0.3) - phi0).abs() < 1e-15);
        assert!((ei(post(0.3, 1.0), 0.3) - 0.39894).abs() < 1e-5);
        assert_eq!(ei(post(2.0, 0.0), 1.0), 0.0);
        assert_eq!(ei(post(0.5, 0.0), 1.0), 0.5);
    }

    #[test]
    fn log_ei_matches_direct_and_tail() {
        for i in 0..=200 {
            let z = -20.0 + 0.125 * i as f64;
            let p = post(0.0, 0.7);
            let tau = z * 0.7;
            let direct = ei(p, tau).ln();
            assert!((log_ei(p, tau) - direct).abs() < 1e-9 * direct.abs().max(1.0), "z={z}");
        }
        // series branch against the direct formula where doubles still resolve it
        for z in [-25.5, -28.0, -32.0, -36.0] {
            let h = z * normal_cdf(z) + normal_pdf(z);
            let p = post(0.0, 1.0);
            assert!((log_ei(p, z) - h.ln()).abs() < 1e-7, "z={z}");
        }
        // strictly increasing across the branch switch and far beyond underflow
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let z = -60.0 + 0.1 * i as f64;
            let v = log_ei(post(0.0, 1.0), z);
            assert!(v > prev && v.is_finite(), "z={z}");
            prev = v;
        }
        assert_eq!(ei(post(0.0, 1.0), -60.0), 0.0);
        assert_eq!(log_ei(post(2.0, 0.0), 1.0), LOG_EI_FLOOR);
        assert_eq!(log_ei(post(0.5, 0.0), 1.0), 0.5f64.ln());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-12);
    }

    fn toy_model() -> GpModel {
        let xs = vec![vec![0.1], vec![0.5], vec![0.8]];
        GpModel::fit(&xs, &[1.0, -1.0, 0.5], SeKernelParams::new(1.0, vec![0.2], 1e-6).unwrap()).unwrap()
    }

    #[test]
    fn cheap_objective_signs() {
        let m = toy_model();
        let spec = AcquisitionSpec::new(AcquisitionKind::Lcb);
        let x = [0.3];
        let p = m.posterior(&x);
        let b = spec.beta.beta(3);
        assert_eq!(cheap_objective(&spec, &m, None, 0.0, 3, &x).unwrap(), lcb(p, b));
        let spec = AcquisitionSpec::new(AcquisitionKind::Ucb);
        assert_eq!(cheap_objective(&spec, &m, None, 0.0, 3, &x).unwrap(), -ucb(p, b));
        let spec = AcquisitionSpec::new(AcquisitionKind::Ei);
        assert_eq!(cheap_objective(&spec, &m, None, -0.7, 3, &x).unwrap(), -log_ei(p, -0.7));
        let spec = AcquisitionSpec::new(AcquisitionKind::Ts);
        assert!(cheap_objective(&spec, &m, None, 0.0, 3, &x).is_err());
        let path = draw_sample_path(&m, 50, 1).unwrap();
        assert_eq!(cheap_objective(&spec, &m, Some(&path), 0.0, 3, &x).unwrap(), path.eval(&x));
    }

    #[test]
    fn bound_acquisition_matches_free_function() {
        let m = toy_model();
        for kind in [AcquisitionKind::Ei, AcquisitionKind::Ucb, AcquisitionKind::Lcb, AcquisitionKind::Ts] {
            let spec = AcquisitionSpec::new(kind);
            let bound = BoundAcquisition::new(&spec, &m, 4, 17).unwrap();
            let x = [0.65];
            let direct = cheap_objective(&spec, &m, bound.path(), m.best_target(), 4, &x).unwrap();
            assert_eq!(bound.value(&x), direct);
        }
    }

    #[test]
    fn sample_path_determinism() {
        let m = toy_model();
        let a = draw_sample_path(&m, 100, 42).unwrap();
        let b = draw_sample_path(&m, 100, 42).unwrap();
        let c = draw_sample_path(&m, 100, 43).unwrap();
        for i in 0..20 {
            let x = [i as f64 / 19.0];
            assert_eq!(a.eval(&x), b.eval(&x));
        }
        assert_ne!(a.eval(&[0.3]), c.eval(&[0.3]));
    }

    #[test]
    fn sample_path_covariance_matches_kernel() {
        // A single observation far away leaves the posterior at the probe
        // points equal to the prior.
        let p = SeKernelParams::new(1.0, vec![0.3], 1e-6).unwrap();
        let m = GpModel::fit(&[vec![100.0]], &[0.0], p.clone()).unwrap();
        let (a, b) = ([0.2], [0.5]);
        let exact = crate::gp::se_kernel(&a, &b, &p);

        // Kernel implied by the random features, averaged over 200 paths.
        let avg: f64 = (0..200)
            .map(|s| draw_sample_path(&m, 500, s).unwrap().feature_kernel(&a, &b))
            .sum::<f64>()
            / 200.0;
        assert!((avg - exact).abs() < 0.05, "feature kernel {avg} vs {exact}");

        // Monte-Carlo covariance of path values.
        let n = 4000;
        let vals: Vec<(f64, f64)> = (0..n)
            .map(|s| {
                let path = draw_sample_path(&m, 500, 1000 + s).unwrap();
                (path.eval(&a), path.eval(&b))
            })
            .collect();
        let ma = vals.iter().map(|v| v.0).sum::<f64>() / n as f64;
        let mb = vals.iter().map(|v| v.1).sum::<f64>() / n as f64;
        let cov = vals.iter().map(|v| (v.0 - ma) * (v.1 - mb)).sum::<f64>() / (n as f64 - 1.0);
        assert!((cov - exact).abs() < 0.05, "path covariance {cov} vs {exact}");
    }

    #[test]
    fn sample_path_mean_at_training_point() {
        let m = toy_model();
        let x = m.train_input(1).to_vec();
        let target = m.targets()[1];
        let mean = (0..200)
            .map(|s| draw_sample_path(&m, 500, s).unwrap().eval(&x))
            .sum::<f64>()
            / 200.0;
        assert!((mean - target).abs() < 0.1, "{mean} vs {target}");
    }
}
