//! Targeted decision-based attack: estimate the boundary gradient through a
//! projection, step along it, and bisect back towards the target.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{estimate_raw, lift_estimate, EstimatorConfig, EstimatorError, LiftMode, SamplingMode};
use crate::numerics::{RealVector, RngSeed};
use crate::projections::{Projection, ProjectionError};
use crate::victims::{DifferenceOracle, GroundTruth, Sign, VictimError};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("trivial instance: {0}")]
    TrivialInstance(String),
    #[error(transparent)]
    Oracle(#[from] VictimError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Estimator(EstimatorError),
}

/// Hard query cap in front of another oracle. Refused queries are not
/// forwarded and not counted.
pub struct BudgetedOracle<'a> {
    inner: &'a dyn DifferenceOracle,
    budget: u64,
    spent: AtomicU64,
}

impl<'a> BudgetedOracle<'a> {
    pub fn new(inner: &'a dyn DifferenceOracle, budget: u64) -> Self {
        BudgetedOracle { inner, budget, spent: AtomicU64::new(0) }
    }

    pub fn spent(&self) -> u64 {
        self.spent.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.spent()
    }
}

impl DifferenceOracle for BudgetedOracle<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn query_sign(&self, x: &RealVector) -> Result<Sign, VictimError> {
        if self.spent() >= self.budget {
            return Err(VictimError::BudgetExhausted);
        }
        let s = self.inner.query_sign(x)?;
        self.spent.fetch_add(1, Ordering::SeqCst);
        Ok(s)
    }

    fn query_count(&self) -> u64 {
        self.spent()
    }

    fn labels(&self) -> (usize, usize) {
        self.inner.labels()
    }
}

fn mix(alpha: f64, x_tgt: &RealVector, x_hat: &RealVector) -> RealVector {
    x_tgt * alpha + x_hat * (1.0 - alpha)
}

/// Result of bisecting the segment `α·x_tgt + (1−α)·x̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySearch {
    /// Adversarial point at `alpha`.
    pub point: RealVector,
    /// Largest `α` known adversarial.
    pub alpha: f64,
    /// Smallest `α` known benign.
    pub benign_alpha: f64,
    pub queries: u64,
}

/// Bisection that keeps whatever it learned when the oracle fails.
fn bisect(
    oracle: &dyn DifferenceOracle,
    x_hat: &RealVector,
    x_tgt: &RealVector,
    theta: f64,
) -> (BoundarySearch, Option<VictimError>) {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut queries = 0;
    let mut failure = None;
    while hi - lo > theta {
        let mid = 0.5 * (lo + hi);
        match oracle.query_sign(&mix(mid, x_tgt, x_hat)) {
            Ok(s) => {
                queries += 1;
                if s.is_adversarial() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let search = BoundarySearch { point: mix(lo, x_tgt, x_hat), alpha: lo, benign_alpha: hi, queries };
    (search, failure)
}

fn check_theta(theta: f64) -> Result<(), AttackError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(AttackError::Config(format!("theta must lie in (0, 1), got {theta}")));
    }
    Ok(())
}

/// Bisect from adversarial `x_hat` towards benign `x_tgt` until the bracket
/// on `α` is at most `theta` wide. Uses `⌈log₂(1/θ)⌉` queries and trusts the
/// endpoint labels; see [`binary_search_to_boundary_checked`].
pub fn binary_search_to_boundary(
    oracle: &dyn DifferenceOracle,
    x_hat: &RealVector,
    x_tgt: &RealVector,
    theta: f64,
) -> Result<BoundarySearch, AttackError> {
    check_theta(theta)?;
    let (search, failure) = bisect(oracle, x_hat, x_tgt, theta);
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(search),
    }
}

/// [`binary_search_to_boundary`] after spending two queries on the endpoints.
pub fn binary_search_to_boundary_checked(
    oracle: &dyn DifferenceOracle,
    x_hat: &RealVector,
    x_tgt: &RealVector,
    theta: f64,
) -> Result<BoundarySearch, AttackError> {
    check_theta(theta)?;
    check_endpoints(oracle, x_hat, x_tgt)?;
    let mut search = binary_search_to_boundary(oracle, x_hat, x_tgt, theta)?;
    search.queries += 2;
    Ok(search)
}

fn check_endpoints(oracle: &dyn DifferenceOracle, x_hat: &RealVector, x_tgt: &RealVector) -> Result<(), AttackError> {
    if !oracle.query_sign(x_hat)?.is_adversarial() {
        return Err(AttackError::Precondition("starting point is not adversarial".into()));
    }
    if oracle.query_sign(x_tgt)?.is_adversarial() {
        return Err(AttackError::TrivialInstance("target is already adversarial".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSearch {
    /// First adversarial trial point, or `x_t` when none was found.
    pub x_hat: RealVector,
    pub xi: f64,
    pub queries: u64,
    pub progress: bool,
}

/// Geometric step search: try `ξ = d_t/√t` and halve until
/// `x_t + ξ·direction` is adversarial or `ξ < 1e-12·d_t`.
pub fn step_size_search(
    oracle: &dyn DifferenceOracle,
    x_t: &RealVector,
    direction: &RealVector,
    d_t: f64,
    t: usize,
) -> Result<StepSearch, AttackError> {
    if (direction.norm() - 1.0).abs() > 1e-10 {
        return Err(AttackError::Precondition(format!("direction has norm {}", direction.norm())));
    }
    if t == 0 || !(d_t > 0.0) {
        return Err(AttackError::Precondition(format!("step search needs t >= 1 and d_t > 0, got {t}, {d_t}")));
    }
    let xi_min = 1e-12 * d_t;
    let mut xi = d_t / (t as f64).sqrt();
    let mut queries = 0;
    while xi >= xi_min {
        let candidate = x_t + direction * xi;
        let s = oracle.query_sign(&candidate)?;
        queries += 1;
        if s.is_adversarial() {
            return Ok(StepSearch { x_hat: candidate, xi, queries, progress: true });
        }
        xi *= 0.5;
    }
    Ok(StepSearch { x_hat: x_t.clone(), xi, queries, progress: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub budget: u64,
    /// Bisection precision on `α`.
    pub theta: f64,
    /// `B_t = min(⌊initial_b·√t⌋, n)` (the cap applies to frame sampling).
    pub initial_b: usize,
    pub max_iterations: usize,
    pub seed: RngSeed,
    #[serde(default)]
    pub sampling: SamplingMode,
    #[serde(default)]
    pub lift: Option<LiftMode>,
    /// `δ_t = delta_factor · θ · √m · d_t`.
    #[serde(default = "unit")]
    pub delta_factor: f64,
    /// A run succeeds when its final MSE is at most this.
    #[serde(default = "default_success_mse")]
    pub success_mse: f64,
    /// Keep every traced point (for validity checks).
    #[serde(default)]
    pub keep_points: bool,
}

fn unit() -> f64 {
    1.0
}

fn default_success_mse() -> f64 {
    1e-4
}

impl AttackConfig {
    pub fn new(budget: u64, theta: f64, seed: RngSeed) -> Self {
        AttackConfig {
            budget,
            theta,
            initial_b: 100,
            max_iterations: usize::MAX,
            seed,
            sampling: SamplingMode::default(),
            lift: None,
            delta_factor: 1.0,
            success_mse: default_success_mse(),
            keep_points: false,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.budget == 0 {
            return Err(AttackError::Config("budget must be positive".into()));
        }
        check_theta(self.theta)?;
        if self.initial_b == 0 {
            return Err(AttackError::Config("initial_b must be positive".into()));
        }
        if !(self.delta_factor > 0.0) {
            return Err(AttackError::Config("delta_factor must be positive".into()));
        }
        Ok(())
    }

    fn batch_size(&self, t: usize, n: usize) -> usize {
        let b = ((self.initial_b as f64) * (t as f64).sqrt()).floor() as usize;
        match self.sampling {
            SamplingMode::OrthonormalFrame => b.clamp(1, n),
            SamplingMode::NormalizedGaussian => b.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Init,
    GradEst,
    Step,
    Binsearch,
}

impl TraceEvent {
    pub fn name(self) -> &'static str {
        match self {
            TraceEvent::Init => "init",
            TraceEvent::GradEst => "grad_est",
            TraceEvent::Step => "step",
            TraceEvent::Binsearch => "binsearch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub queries: u64,
    pub l2: f64,
    pub mse: f64,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackTrace {
    pub rows: Vec<TraceRow>,
    /// Adversarial point behind each row, when requested.
    pub points: Vec<RealVector>,
    pub success: bool,
}

impl AttackTrace {
    pub fn final_mse(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mse)
    }

    /// MSE of the latest point traced within the first `queries` queries.
    pub fn mse_at(&self, queries: u64) -> Option<f64> {
        self.rows.iter().take_while(|r| r.queries <= queries).map(|r| r.mse).last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("queries,l2,mse,event\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.16e},{:.16e},{}", r.queries, r.l2, r.mse, r.event.name());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub trace: AttackTrace,
    /// Final adversarial point (`x_src` if initialisation never finished).
    pub x_adv: RealVector,
    pub queries: u64,
    pub iterations: usize,
    /// The budget ran out before `max_iterations`.
    pub truncated: bool,
}

struct Recorder<'a> {
    trace: AttackTrace,
    x_tgt: &'a RealVector,
    keep_points: bool,
}

impl Recorder<'_> {
    fn record(&mut self, queries: u64, x_adv: &RealVector, event: TraceEvent) {
        if self.trace.rows.last().is_some_and(|r| r.queries >= queries) {
            return;
        }
        let l2 = (x_adv - self.x_tgt).norm();
        let mse = l2 * l2 / x_adv.len() as f64;
        self.trace.rows.push(TraceRow { queries, l2, mse, event });
        if self.keep_points {
            self.trace.points.push(x_adv.clone());
        }
    }
}

fn is_budget(e: &VictimError) -> bool {
    matches!(e, VictimError::BudgetExhausted)
}

/// Run the attack from adversarial `x_src` towards benign `x_tgt`.
///
/// `projection_at` builds the projection anchored at the current boundary
/// image each iteration. Running out of budget ends the run cleanly; the
/// outcome then has `truncated` set.
pub fn run_attack(
    oracle: &dyn DifferenceOracle,
    projection_at: &dyn Fn(&RealVector) -> Result<Box<dyn Projection>, ProjectionError>,
    x_src: &RealVector,
    x_tgt: &RealVector,
    cfg: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    cfg.validate()?;
    let m = oracle.dim();
    if x_src.len() != m || x_tgt.len() != m {
        return Err(AttackError::Config(format!(
            "points have dimensions {} and {}, victim expects {m}",
            x_src.len(),
            x_tgt.len()
        )));
    }
    let budgeted = BudgetedOracle::new(oracle, cfg.budget);
    let oracle = &budgeted;
    let mut rec = Recorder { trace: AttackTrace::default(), x_tgt, keep_points: cfg.keep_points };
    let finish = |rec: Recorder, x_adv: RealVector, iterations: usize, truncated: bool| {
        let mut trace = rec.trace;
        trace.success = trace.final_mse().is_some_and(|mse| mse <= cfg.success_mse);
        Ok(AttackOutcome { trace, x_adv, queries: oracle.spent(), iterations, truncated })
    };

    match check_endpoints(oracle, x_src, x_tgt) {
        Ok(()) => {}
        Err(AttackError::Oracle(e)) if is_budget(&e) => return finish(rec, x_src.clone(), 0, true),
        Err(e) => return Err(e),
    }
    let (init, failure) = bisect(oracle, x_src, x_tgt, cfg.theta);
    let mut x_adv = init.point;
    rec.record(oracle.spent(), &x_adv, TraceEvent::Init);
    if let Some(e) = failure {
        return if is_budget(&e) { finish(rec, x_adv, 0, true) } else { Err(e.into()) };
    }

    let mut rng = cfg.seed.stream(0);
    let theta_scale = cfg.delta_factor * cfg.theta * (m as f64).sqrt();
    let mut t = 0;
    while t < cfg.max_iterations {
        t += 1;
        let d_t = (&x_adv - x_tgt).norm();
        if d_t == 0.0 {
            break;
        }
        let projection = projection_at(&x_adv)?;
        let b = cfg.batch_size(t, projection.latent_dim());
        let mut delta = theta_scale * d_t;
        let mut stepped = None;
        for _attempt in 0..2 {
            let est_cfg = EstimatorConfig { queries: b, delta, sampling: cfg.sampling, lift: cfg.lift };
            let estimate = match estimate_raw(projection.as_ref(), oracle, &est_cfg, &mut rng)
                .and_then(|e| lift_estimate(projection.as_ref(), e, &est_cfg))
            {
                Ok(e) => e,
                Err(EstimatorError::Oracle { source, .. }) if is_budget(&source) => {
                    rec.record(oracle.spent(), &x_adv, TraceEvent::GradEst);
                    return finish(rec, x_adv, t, true);
                }
                Err(e) => return Err(AttackError::Estimator(e)),
            };
            rec.record(oracle.spent(), &x_adv, TraceEvent::GradEst);
            let lifted = estimate.lifted.expect("lift_estimate fills lifted");
            let norm = lifted.norm();
            if norm > 0.0 {
                let direction = lifted / norm;
                match step_size_search(oracle, &x_adv, &direction, d_t, t) {
                    Ok(step) => {
                        if step.progress {
                            rec.record(oracle.spent(), &step.x_hat, TraceEvent::Step);
                            stepped = Some(step.x_hat);
                            break;
                        }
                        rec.record(oracle.spent(), &x_adv, TraceEvent::Step);
                    }
                    Err(AttackError::Oracle(e)) if is_budget(&e) => {
                        rec.record(oracle.spent(), &x_adv, TraceEvent::Step);
                        return finish(rec, x_adv, t, true);
                    }
                    Err(e) => return Err(e),
                }
            }
            delta *= 0.5;
        }
        let Some(x_hat) = stepped else {
            log::debug!("iteration {t}: no progress, skipped");
            continue;
        };
        let (search, failure) = bisect(oracle, &x_hat, x_tgt, cfg.theta);
        // A partial bisection still yields a valid adversarial point.
        x_adv = search.point;
        rec.record(oracle.spent(), &x_adv, TraceEvent::Binsearch);
        if let Some(e) = failure {
            return if is_budget(&e) { finish(rec, x_adv, t, true) } else { Err(e.into()) };
        }
        if oracle.remaining() == 0 {
            return finish(rec, x_adv, t, true);
        }
    }
    finish(rec, x_adv, t, false)
}

/// A (source, target) pair for a targeted attack.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPair {
    pub x_src: RealVector,
    pub x_tgt: RealVector,
}

/// Draw a pair uniformly from `[lo, hi]^m` using white-box access: `x_src`
/// adversarial, `x_tgt` benign. With `target_margin = Some(ε)`, the target
/// is moved to distance `ε` from the boundary point found by bisecting the
/// segment, on the benign side.
pub fn generate_pair<R: Rng + ?Sized>(
    truth: &GroundTruth,
    lo: f64,
    hi: f64,
    target_margin: Option<f64>,
    rng: &mut R,
) -> Result<AttackPair, AttackError> {
    sample_pair(|x| Ok(truth.value(x) >= 0.0), truth.dim(), lo, hi, target_margin, rng)
}

/// [`generate_pair`] through sign queries only. Draws the same pair as the
/// white-box version for the same victim and RNG state; the queries spent
/// here are the caller's to account for.
pub fn generate_pair_blackbox<R: Rng + ?Sized>(
    oracle: &dyn DifferenceOracle,
    lo: f64,
    hi: f64,
    target_margin: Option<f64>,
    rng: &mut R,
) -> Result<AttackPair, AttackError> {
    sample_pair(|x| Ok(oracle.query_sign(x)?.is_adversarial()), oracle.dim(), lo, hi, target_margin, rng)
}

fn sample_pair<R: Rng + ?Sized>(
    is_adversarial: impl Fn(&RealVector) -> Result<bool, AttackError>,
    m: usize,
    lo: f64,
    hi: f64,
    target_margin: Option<f64>,
    rng: &mut R,
) -> Result<AttackPair, AttackError> {
    if !(lo < hi) {
        return Err(AttackError::Config(format!("empty box [{lo}, {hi}]")));
    }
    let draw = |rng: &mut R| RealVector::from_iterator(m, (0..m).map(|_| rng.random_range(lo..hi)));
    let sample_until = |rng: &mut R, want_adv: bool| -> Result<RealVector, AttackError> {
        for _ in 0..100_000 {
            let x = draw(rng);
            if is_adversarial(&x)? == want_adv {
                return Ok(x);
            }
        }
        Err(AttackError::Precondition(format!(
            "no {} point found in the box",
            if want_adv { "adversarial" } else { "benign" }
        )))
    };
    let x_src = sample_until(rng, true)?;
    let mut x_tgt = sample_until(rng, false)?;
    if let Some(eps) = target_margin {
        let (mut a, mut b) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if is_adversarial(&mix(mid, &x_tgt, &x_src))? {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        let boundary = mix(b, &x_tgt, &x_src);
        let toward = &x_tgt - &boundary;
        let len = toward.norm();
        if len > eps {
            let candidate = &boundary + toward * (eps / len);
            if !is_adversarial(&candidate)? {
                x_tgt = candidate;
            }
        }
    }
    Ok(AttackPair { x_src, x_tgt })
}

/// Convenience seeding: pair `i` of an experiment uses `seed.child(i)`.
pub fn pair_seed(seed: RngSeed, index: u64) -> RngSeed {
    seed.child(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projections::identity_projection;
    use crate::victims::{make_linear_victim, LocalOracle};

    fn v(xs: &[f64]) -> RealVector {
        RealVector::from_row_slice(xs)
    }

    /// Adversarial iff `x₁ ≤ 0`.
    fn left_half_plane() -> (LocalOracle, GroundTruth) {
        make_linear_victim(v(&[-1.0, 0.0]), v(&[0.0, 0.0])).unwrap()
    }

    #[test]
    fn bisection_finds_analytic_boundary() {
        let (oracle, _) = left_half_plane();
        let r = binary_search_to_boundary(&oracle, &v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), 1e-3).unwrap();
        assert!(r.alpha <= 0.5 && r.alpha >= 0.5 - 1e-3);
        assert!(r.point[0] <= 0.0 && r.point[0] >= -2e-3);
        assert!(r.benign_alpha - r.alpha <= 1e-3);
        assert_eq!(r.queries, 10);
        assert_eq!(oracle.query_count(), 10);
    }

    #[test]
    fn bisection_depth_bound_and_monotone_distance() {
        let (oracle, _) = left_half_plane();
        let tgt = v(&[1.0, 0.0]);
        for &theta in &[0.3, 0.1, 1e-2, 1e-6] {
            let x_hat = v(&[-1e-9, 0.5]);
            let r = binary_search_to_boundary(&oracle, &x_hat, &tgt, theta).unwrap();
            assert!(r.queries as f64 <= (1.0 / theta).log2().ceil());
            assert!((&r.point - &tgt).norm() <= (&x_hat - &tgt).norm());
            assert!(oracle.query_sign(&r.point).unwrap().is_adversarial());
        }
    }

    #[test]
    fn checked_bisection_errors() {
        let (oracle, _) = left_half_plane();
        assert!(matches!(
            binary_search_to_boundary_checked(&oracle, &v(&[1.0, 0.0]), &v(&[2.0, 0.0]), 0.01),
            Err(AttackError::Precondition(_))
        ));
        assert!(matches!(
            binary_search_to_boundary_checked(&oracle, &v(&[-1.0, 0.0]), &v(&[-2.0, 0.0]), 0.01),
            Err(AttackError::TrivialInstance(_))
        ));
        assert!(binary_search_to_boundary(&oracle, &v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn step_search_cases() {
        let (oracle, _) = left_half_plane();
        let x_t = v(&[0.0, 1.0]);
        let into = step_size_search(&oracle, &x_t, &v(&[-1.0, 0.0]), 1.0, 1).unwrap();
        assert!(into.progress && into.queries == 1 && into.xi == 1.0);

        // Moving away never becomes adversarial from a strictly benign start.
        let start = v(&[1e-3, 1.0]);
        let away = step_size_search(&oracle, &start, &v(&[1.0, 0.0]), 1.0, 4).unwrap();
        assert!(!away.progress);
        assert_eq!(away.x_hat, start);
        assert!(away.xi < 1e-12);

        // 45° into the benign side from x₁ = −0.1: accepted once ξ/√2 ≤ 0.1,
        // i.e. the first of 1, ½, ¼, ⅛ below 0.1414 is ⅛.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x = v(&[-0.1, 0.0]);
        let r = step_size_search(&oracle, &x, &v(&[h, h]), 1.0, 1).unwrap();
        assert!(r.progress);
        assert_eq!((r.xi, r.queries), (0.125, 4));
        let r = step_size_search(&oracle, &x, &v(&[h, h]), 2.0, 4).unwrap();
        assert_eq!((r.xi, r.queries), (0.125, 4));
        assert!(step_size_search(&oracle, &x, &v(&[1.0, 1.0]), 1.0, 1).is_err());
    }

    #[test]
    fn budget_wrapper_refuses_and_does_not_count() {
        let (oracle, _) = left_half_plane();
        let b = BudgetedOracle::new(&oracle, 2);
        assert!(b.query_sign(&v(&[0.0, 0.0])).is_ok());
        assert!(b.query_sign(&v(&[0.0, 0.0])).is_ok());
        assert!(matches!(b.query_sign(&v(&[0.0, 0.0])), Err(VictimError::BudgetExhausted)));
        assert_eq!((b.spent(), oracle.query_count()), (2, 2));
    }

    fn linear_2d_attack(budget: u64, seed: u64) -> (AttackOutcome, u64) {
        let (oracle, truth) = make_linear_victim(v(&[0.6, -0.8]), v(&[0.1, 0.2])).unwrap();
        let mut rng = RngSeed(seed).stream(0);
        let pair = generate_pair(&truth, -1.0, 1.0, Some(1e-5), &mut rng).unwrap();
        let cfg = AttackConfig::new(budget, 1e-3, RngSeed(seed));
        let factory = |x_b: &RealVector| -> Result<Box<dyn Projection>, ProjectionError> {
            Ok(Box::new(identity_projection(x_b.clone())?))
        };
        let out = run_attack(&oracle, &factory, &pair.x_src, &pair.x_tgt, &cfg).unwrap();
        (out, oracle.query_count())
    }

    #[test]
    fn linear_2d_converges() {
        let (out, count) = linear_2d_attack(500, 1);
        assert_eq!(out.queries, count);
        assert!(count <= 500);
        assert!(out.trace.final_mse().unwrap() < 1e-8, "{:?}", out.trace.final_mse());
        assert!(out.trace.success);
        assert!(out.trace.rows.windows(2).all(|w| w[0].queries < w[1].queries));
    }

    #[test]
    fn tiny_budget_truncates_in_init() {
        let (out, count) = linear_2d_attack(3, 2);
        assert!(out.truncated && !out.trace.success);
        assert_eq!(count, 3);
        assert!(out.trace.rows.iter().all(|r| r.event == TraceEvent::Init));
        assert_eq!(out.trace.rows.len(), 1);
    }

    #[test]
    fn deterministic_csv() {
        let a = linear_2d_attack(300, 5).0.trace.to_csv();
        let b = linear_2d_attack(300, 5).0.trace.to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("queries,l2,mse,event\n"));
        let row = a.lines().nth(1).unwrap();
        let fields: Vec<_> = row.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[1].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }

    #[test]
    fn mse_is_l2_squared_over_m() {
        let (out, _) = linear_2d_attack(200, 7);
        for r in &out.trace.rows {
            assert!((r.mse - r.l2 * r.l2 / 2.0).abs() <= 1e-15 * r.mse.max(1e-300));
        }
    }

    #[test]
    fn precondition_errors() {
        let (oracle, _) = left_half_plane();
        let cfg = AttackConfig::new(100, 1e-2, RngSeed(0));
        let factory = |x_b: &RealVector| -> Result<Box<dyn Projection>, ProjectionError> {
            Ok(Box::new(identity_projection(x_b.clone())?))
        };
        assert!(matches!(
            run_attack(&oracle, &factory, &v(&[1.0, 0.0]), &v(&[2.0, 0.0]), &cfg),
            Err(AttackError::Precondition(_))
        ));
        let bad = AttackConfig { theta: 0.0, ..cfg };
        assert!(matches!(
            run_attack(&oracle, &factory, &v(&[-1.0, 0.0]), &v(&[2.0, 0.0]), &bad),
            Err(AttackError::Config(_))
        ));
    }

    #[test]
    fn pair_margin_places_target_near_boundary() {
        let (_, truth) = make_linear_victim(v(&[1.0, 1.0, 0.0]), RealVector::zeros(3)).unwrap();
        let mut rng = RngSeed(3).stream(0);
        for _ in 0..20 {
            let p = generate_pair(&truth, -1.0, 1.0, Some(1e-3), &mut rng).unwrap();
            assert!(truth.value(&p.x_src) >= 0.0);
            let s = truth.value(&p.x_tgt);
            assert!(s < 0.0);
            assert!(-s / 2f64.sqrt() <= 1e-3 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn blackbox_pairs_match_whitebox_pairs() {
        let (oracle, truth) = left_half_plane();
        for seed in 0..5 {
            let a = generate_pair(&truth, -1.0, 1.0, Some(0.01), &mut RngSeed(seed).stream(0)).unwrap();
            let b = generate_pair_blackbox(&oracle, -1.0, 1.0, Some(0.01), &mut RngSeed(seed).stream(0)).unwrap();
            assert_eq!(a, b);
            assert!(truth.value(&a.x_src) >= 0.0 && truth.value(&a.x_tgt) < 0.0);
            assert!(a.x_tgt[0] <= 0.01 + 1e-12);
        }
    }
}
