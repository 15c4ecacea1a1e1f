//! Monte Carlo and closed-form checks of the estimator's distributional and
//! cosine claims. Trials run in parallel, one RNG stream per trial, and are
//! aggregated in trial order.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_cn, compute_omega, pa_cdf, theorem1_bounds, CosineBounds, SmoothnessProfile, TheoryError};
use crate::estimator::{cosine_to_truth, estimate, EstimatorConfig, SamplingMode};
use crate::numerics::{
    ks_statistic, mean_and_stderr, pearson, sample_orthonormal_frame, sample_unit_sphere, standard_normal_vector,
    RealMatrix, RealVector, RngSeed,
};
use crate::projections::{identity_projection, orthonormal_projection, Projection};
use crate::victims::{GroundTruth, LocalOracle, Victim};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub check: String,
    pub n: usize,
    pub samples: usize,
    pub ks_statistic: f64,
    /// `1.63/√samples`, the 1% two-sided critical value.
    pub critical_value: f64,
    pub pass: bool,
}

/// Compare `⟨u, v⟩` for uniform unit `u` and a fixed unit `v` against
/// [`pa_cdf`] with a one-sample Kolmogorov–Smirnov test.
pub fn verify_lemma1<R: Rng + ?Sized>(n: usize, samples: usize, rng: &mut R) -> Result<Lemma1Report, TheoryError> {
    if n < 2 || samples == 0 {
        return Err(TheoryError::Domain(format!("lemma1 check needs n >= 2 and samples > 0, got {n}, {samples}")));
    }
    let v = sample_unit_sphere(n, rng)?;
    let xs: Vec<f64> = (0..samples)
        .map(|_| sample_unit_sphere(n, rng).map(|u| u.dot(&v).clamp(-1.0, 1.0)))
        .collect::<Result<_, _>>()?;
    let ks = ks_statistic(&xs, |x| pa_cdf(n, x).expect("argument clamped to [-1, 1]"));
    let critical_value = 1.63 / (samples as f64).sqrt();
    Ok(Lemma1Report {
        check: "lemma1_distribution".into(),
        n,
        samples,
        ks_statistic: ks,
        critical_value,
        pass: ks < critical_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma4Report {
    pub check: String,
    pub n_max: usize,
    pub c2: f64,
    pub c2_error: f64,
    pub min_cn: f64,
    pub max_cn: f64,
    pub margin: f64,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// `2/π < c_n < 1` and `c_{n+2} < c_n` for every `n` in `[2, n_max]`, each
/// with margin `1e-12`, and `c_2 = 2√2/π`.
pub fn verify_lemma4(n_max: usize) -> Result<Lemma4Report, TheoryError> {
    if n_max < 4 {
        return Err(TheoryError::Domain(format!("lemma4 check needs n_max >= 4, got {n_max}")));
    }
    let margin = 1e-12;
    let values: Vec<f64> = (2..=n_max + 2).map(compute_cn).collect::<Result<_, _>>()?;
    let c = |n: usize| values[n - 2];
    let mut failures = Vec::new();
    for n in 2..=n_max {
        if !(c(n) > 2.0 / PI + margin) {
            failures.push(format!("c_{n} = {} not above 2/π", c(n)));
        }
        if !(c(n) < 1.0 - margin) {
            failures.push(format!("c_{n} = {} not below 1", c(n)));
        }
        if !(c(n + 2) < c(n) - margin) {
            failures.push(format!("c_{} = {} not below c_{n} = {}", n + 2, c(n + 2), c(n)));
        }
    }
    let c2_error = (c(2) - 2.0 * 2f64.sqrt() / PI).abs();
    if c2_error > 1e-12 {
        failures.push(format!("c_2 off by {c2_error:e}"));
    }
    let head = &values[..n_max - 1];
    Ok(Lemma4Report {
        check: "lemma4_constants".into(),
        n_max,
        c2: c(2),
        c2_error,
        min_cn: head.iter().copied().fold(f64::INFINITY, f64::min),
        max_cn: head.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        margin,
        pass: failures.is_empty(),
        failures,
    })
}

/// Victim family for the cosine checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SandwichVictim {
    /// `S(x) = w·(x − b)`, so `ω = 0`.
    Linear,
    /// `S(x) = w·(x − b) + ½(x − b)ᵀH(x − b)` with spectral radius `beta_s`;
    /// `δ` is chosen so that `ω / ‖Wᵀ∇S‖ = omega_ratio`.
    Quadratic { beta_s: f64, omega_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichConfig {
    pub victim: SandwichVictim,
    pub m: usize,
    pub n: usize,
    pub b: usize,
    /// Target `‖Wᵀ∇S‖ / ‖∇S‖` in `(0, 1]`.
    pub alignment: f64,
    /// Probe radius for the linear case.
    pub delta: f64,
    pub trials: usize,
    pub seed: RngSeed,
}

impl SandwichConfig {
    pub fn new(victim: SandwichVictim, m: usize, n: usize, b: usize, trials: usize, seed: RngSeed) -> Self {
        SandwichConfig { victim, m, n, b, alignment: 0.8, delta: 0.1, trials, seed }
    }
}

/// Victim and orthonormal projection with a prescribed alignment.
struct CosineSetup {
    victim: Arc<Victim>,
    w_proj: RealMatrix,
    x_b: RealVector,
    delta: f64,
    beta_s: f64,
}

/// Unit `w` with `‖Wᵀw‖ = alignment` for orthonormal `W`.
fn aligned_normal<R: Rng + ?Sized>(w_proj: &RealMatrix, alignment: f64, rng: &mut R) -> RealVector {
    let (m, n) = w_proj.shape();
    let inside = w_proj * sample_unit_sphere(n, rng).expect("n >= 1");
    if alignment >= 1.0 || n == m {
        return inside;
    }
    let g = standard_normal_vector(m, rng);
    let outside = &g - w_proj * w_proj.tr_mul(&g);
    let outside = &outside / outside.norm();
    inside * alignment + outside * (1.0 - alignment * alignment).sqrt()
}

/// Symmetric `m × m` matrix with eigenvalues `±beta` in random directions.
fn signed_hessian<R: Rng + ?Sized>(m: usize, beta: f64, rng: &mut R) -> Result<RealMatrix, TheoryError> {
    let q = sample_orthonormal_frame(m, m, rng)?;
    let signs = RealVector::from_iterator(m, (0..m).map(|_| if rng.random::<bool>() { beta } else { -beta }));
    let h = &q * RealMatrix::from_diagonal(&signs) * q.transpose();
    Ok((&h + h.transpose()) * 0.5)
}

fn build_setup(
    victim: SandwichVictim,
    m: usize,
    n: usize,
    alignment: f64,
    delta: f64,
    seed: RngSeed,
) -> Result<CosineSetup, TheoryError> {
    if n == 0 || n > m {
        return Err(TheoryError::Domain(format!("need 1 <= n <= m, got n = {n}, m = {m}")));
    }
    if !(alignment > 0.0 && alignment <= 1.0) {
        return Err(TheoryError::Domain(format!("alignment must lie in (0, 1], got {alignment}")));
    }
    let mut rng = seed.child(0).stream(0);
    let w_proj = sample_orthonormal_frame(m, n, &mut rng)?;
    let w = aligned_normal(&w_proj, alignment, &mut rng);
    let x_b = standard_normal_vector(m, &mut rng) * 0.1;
    let (victim, delta, beta_s) = match victim {
        SandwichVictim::Linear => (Victim::linear(w, x_b.clone())?, delta, 0.0),
        SandwichVictim::Quadratic { beta_s, omega_ratio } => {
            if !(beta_s > 0.0) || !(omega_ratio > 0.0) {
                return Err(TheoryError::Domain("quadratic case needs beta_s > 0 and omega_ratio > 0".into()));
            }
            let h = signed_hessian(m, beta_s, &mut rng)?;
            // ω = ½δβ_S with L_f = 1, so δ = 2·ratio·‖Wᵀw‖/β_S
            let a = w_proj.tr_mul(&w).norm();
            (Victim::quadratic(w, x_b.clone(), h)?, 2.0 * omega_ratio * a / beta_s, beta_s)
        }
    };
    Ok(CosineSetup { victim: Arc::new(victim), w_proj, x_b, delta, beta_s })
}

impl CosineSetup {
    fn profile(&self, b: usize) -> SmoothnessProfile {
        let grad = self.victim.gradient(&self.x_b);
        SmoothnessProfile {
            lipschitz_f: 1.0,
            lower_lipschitz_f: 1.0,
            beta_f: 0.0,
            lipschitz_s: grad.norm() + self.beta_s * self.delta,
            beta_s: self.beta_s,
            delta: self.delta,
            n: self.w_proj.ncols(),
            b,
            proj_align: self.w_proj.tr_mul(&grad).norm(),
            grad_norm: grad.norm(),
        }
    }

    /// Cosines of `trials` independent estimates, in trial order.
    fn cosines(&self, cfg: &EstimatorConfig, trials: usize, seed: RngSeed) -> Result<Vec<f64>, TheoryError> {
        let projection = orthonormal_projection(self.w_proj.clone(), self.x_b.clone())?;
        let truth = GroundTruth::new(self.victim.clone());
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let oracle = LocalOracle::new(self.victim.clone());
                let mut rng = seed.stream(i as u64);
                let e = estimate(&projection, &oracle, cfg, &mut rng)?;
                Ok(cosine_to_truth(&e, &truth, &self.x_b)?)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub check: String,
    pub parameters: SandwichConfig,
    pub delta: f64,
    pub omega: f64,
    pub proj_align: f64,
    pub alignment_ratio: f64,
    pub bounds: Option<CosineBounds>,
    pub mean_cos: f64,
    pub stderr: f64,
    /// `ratio·√(B/n)·c_n`, the value both bounds collapse to when `ω = 0`.
    pub collapsed: Option<f64>,
    pub collapsed_tolerance: f64,
    pub skipped: Option<String>,
    pub pass: bool,
}

/// Mean cosine over `trials` estimates must lie in
/// `[lower − 3σ̂, upper + 3σ̂]`; when `ω = 0` it must also be within 0.02 of
/// the collapsed value.
pub fn verify_theorem1_sandwich(cfg: &SandwichConfig) -> Result<SandwichReport, TheoryError> {
    if cfg.trials == 0 || cfg.b == 0 || cfg.b > cfg.n {
        return Err(TheoryError::Domain(format!("need trials > 0 and 1 <= B <= n, got B = {}", cfg.b)));
    }
    let setup = build_setup(cfg.victim, cfg.m, cfg.n, cfg.alignment, cfg.delta, cfg.seed)?;
    let profile = setup.profile(cfg.b);
    let omega = compute_omega(&profile);
    let collapsed_tolerance = 0.02;
    let mut report = SandwichReport {
        check: "theorem1_sandwich".into(),
        parameters: *cfg,
        delta: setup.delta,
        omega,
        proj_align: profile.proj_align,
        alignment_ratio: profile.alignment_ratio(),
        bounds: None,
        mean_cos: f64::NAN,
        stderr: f64::NAN,
        collapsed: None,
        collapsed_tolerance,
        skipped: None,
        pass: false,
    };
    let bounds = match theorem1_bounds(&profile, omega) {
        Ok(b) => b,
        Err(TheoryError::AssumptionViolated { .. }) => {
            report.skipped = Some("assumption_violated".into());
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let est = EstimatorConfig::new(cfg.b, setup.delta);
    let cosines = setup.cosines(&est, cfg.trials, cfg.seed.child(1))?;
    let (mean, se) = mean_and_stderr(&cosines);
    let mut pass = mean >= bounds.lower - 3.0 * se && mean <= bounds.upper + 3.0 * se;
    if omega == 0.0 {
        let collapsed = profile.alignment_ratio() * (cfg.b as f64 / cfg.n as f64).sqrt() * compute_cn(cfg.n)?;
        pass &= (mean - collapsed).abs() <= collapsed_tolerance;
        report.collapsed = Some(collapsed);
    }
    report.bounds = Some(bounds);
    report.mean_cos = mean;
    report.stderr = se;
    report.pass = pass;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcConfig {
    pub m: usize,
    pub n: usize,
    pub b_list: Vec<usize>,
    pub alignment: f64,
    pub trials: usize,
    pub seed: RngSeed,
    /// Pass when `R²` exceeds this.
    pub min_r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcPoint {
    pub b: usize,
    pub mean_cos: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcFitReport {
    pub check: String,
    pub parameters: QcConfig,
    pub points: Vec<QcPoint>,
    /// `a` in `s(B) ≈ a·√B`.
    pub slope: f64,
    pub r_squared: f64,
    /// `alignment·c_n`, the predicted value at `B = n`.
    pub predicted_full: f64,
    pub pass: bool,
}

/// Least-squares fit of mean cosine against `a·√B` through the origin, with
/// the usual centred `R²`.
pub fn fit_sqrt_law(points: &[(f64, f64)]) -> (f64, f64) {
    let sxy: f64 = points.iter().map(|(b, s)| b.sqrt() * s).sum();
    let sxx: f64 = points.iter().map(|(b, _)| *b).sum();
    let slope = sxy / sxx;
    let mean = points.iter().map(|(_, s)| s).sum::<f64>() / points.len() as f64;
    let ss_res: f64 = points.iter().map(|(b, s)| (s - slope * b.sqrt()).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|(_, s)| (s - mean).powi(2)).sum();
    (slope, 1.0 - ss_res / ss_tot)
}

/// Mean cosine for each `B` on a linear victim with an orthonormal
/// projection, then [`fit_sqrt_law`].
pub fn fit_query_complexity(cfg: &QcConfig) -> Result<QcFitReport, TheoryError> {
    if cfg.b_list.len() < 2 || cfg.b_list.iter().any(|&b| b == 0 || b > cfg.n) || cfg.trials == 0 {
        return Err(TheoryError::Domain(format!("need at least two B values in [1, n = {}] and trials > 0", cfg.n)));
    }
    let setup = build_setup(SandwichVictim::Linear, cfg.m, cfg.n, cfg.alignment, 0.1, cfg.seed)?;
    let mut points = Vec::with_capacity(cfg.b_list.len());
    for (k, &b) in cfg.b_list.iter().enumerate() {
        let est = EstimatorConfig::new(b, setup.delta);
        let cosines = setup.cosines(&est, cfg.trials, cfg.seed.child(1 + k as u64))?;
        let (mean_cos, stderr) = mean_and_stderr(&cosines);
        points.push(QcPoint { b, mean_cos, stderr });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.b as f64, p.mean_cos)).collect();
    let (slope, r_squared) = fit_sqrt_law(&pairs);
    let ratio = setup.profile(cfg.n).alignment_ratio();
    Ok(QcFitReport {
        check: "query_complexity_fit".into(),
        parameters: cfg.clone(),
        points,
        slope,
        r_squared,
        predicted_full: ratio * compute_cn(cfg.n)?,
        pass: r_squared > cfg.min_r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSweepConfig {
    /// Input dimension; the projection is the identity so `n = m`.
    pub m: usize,
    pub b: usize,
    pub delta: f64,
    pub beta_values: Vec<f64>,
    pub trials_per_point: usize,
    pub sampling: SamplingMode,
    pub seed: RngSeed,
    /// Pass when the trial-level correlation is below this.
    pub max_correlation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaPoint {
    pub beta_s: f64,
    pub omega: f64,
    pub mean_proxy: f64,
    pub mean_cos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSweepReport {
    pub check: String,
    pub parameters: OmegaSweepConfig,
    pub points: Vec<OmegaPoint>,
    /// `(omega_proxy, cosine)` for every trial, sweep point by sweep point.
    pub scatter: Vec<(f64, f64)>,
    /// Pearson correlation over all trials.
    pub correlation: f64,
    /// Pearson correlation of the per-point means.
    pub correlation_of_means: f64,
    pub pass: bool,
}

/// Sweep quadratic victims of growing curvature and correlate each
/// estimate's ω-proxy with its cosine to the true gradient.
pub fn omega_correlation_sweep(cfg: &OmegaSweepConfig) -> Result<OmegaSweepReport, TheoryError> {
    if cfg.beta_values.len() < 2 || cfg.trials_per_point < 2 {
        return Err(TheoryError::Domain("sweep needs two curvature values and two trials per point".into()));
    }
    let mut setup_rng = cfg.seed.child(0).stream(0);
    let w = sample_unit_sphere(cfg.m, &mut setup_rng)?;
    let x_b = standard_normal_vector(cfg.m, &mut setup_rng) * 0.1;
    let directions = signed_hessian(cfg.m, 1.0, &mut setup_rng)?;
    let est = EstimatorConfig::new(cfg.b, cfg.delta).with_sampling(cfg.sampling);
    let mut points = Vec::new();
    let mut scatter = Vec::new();
    for (k, &beta) in cfg.beta_values.iter().enumerate() {
        let victim = Arc::new(Victim::quadratic(w.clone(), x_b.clone(), &directions * beta)?);
        let truth = GroundTruth::new(victim.clone());
        let projection = identity_projection(x_b.clone())?;
        let seed = cfg.seed.child(1 + k as u64);
        let pairs: Vec<(f64, f64)> = (0..cfg.trials_per_point)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64), TheoryError> {
                let oracle = LocalOracle::new(victim.clone());
                let e = estimate(&projection as &dyn Projection, &oracle, &est, &mut seed.stream(i as u64))?;
                Ok((e.omega_proxy.expect("estimate fills the proxy"), cosine_to_truth(&e, &truth, &x_b)?))
            })
            .collect::<Result<_, _>>()?;
        let count = pairs.len() as f64;
        points.push(OmegaPoint {
            beta_s: beta,
            omega: 0.5 * cfg.delta * beta,
            mean_proxy: pairs.iter().map(|p| p.0).sum::<f64>() / count,
            mean_cos: pairs.iter().map(|p| p.1).sum::<f64>() / count,
        });
        scatter.extend(pairs);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = scatter.iter().copied().unzip();
    let correlation = pearson(&xs, &ys).unwrap_or(f64::NAN);
    let (mx, my): (Vec<f64>, Vec<f64>) = points.iter().map(|p| (p.mean_proxy, p.mean_cos)).unzip();
    let correlation_of_means = pearson(&mx, &my).unwrap_or(f64::NAN);
    Ok(OmegaSweepReport {
        check: "omega_proxy_correlation".into(),
        parameters: cfg.clone(),
        points,
        scatter,
        correlation,
        correlation_of_means,
        pass: correlation < cfg.max_correlation,
    })
}
