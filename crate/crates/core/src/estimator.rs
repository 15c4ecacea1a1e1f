//! Sign-based gradient estimation through a projection.
//!
//! For a projection `f` anchored at a boundary image and unit latent
//! directions `u_1..u_B`, the low-dimensional estimate is
//! `(1/B) Σ sgn S(f(δ u_i)) u_i`, and the input-space estimate pushes it
//! forward through `∇f(x0)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{cosine, sample_orthonormal_frame, sample_unit_sphere, NumericsError, RealMatrix, RealVector};
use crate::projections::Projection;
use crate::victims::{DifferenceOracle, GroundTruth, Sign, VictimError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid estimator config: {0}")]
    Config(String),
    #[error("oracle failed after {queries_used} queries: {source}")]
    Oracle {
        #[source]
        source: VictimError,
        queries_used: u64,
    },
    #[error("precise lift needs the projection's Jacobian, which it does not provide")]
    MissingJacobian,
    #[error("estimate has not been lifted to input space")]
    NotLifted,
    #[error("cosine undefined: {0}")]
    UndefinedCosine(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Orthonormal `B`-frame, requires `B ≤ n`.
    #[default]
    OrthonormalFrame,
    /// Independent uniform unit vectors.
    NormalizedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMode {
    /// `(1/B) Σ s_i ∇f(x0) u_i`.
    Precise,
    /// `(1/B) Σ s_i (f(x0 + u_i) − f(x0))`, no Jacobian needed.
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Sign queries per estimate (`B`).
    pub queries: usize,
    /// Probe radius `δ` in latent space.
    pub delta: f64,
    #[serde(default)]
    pub sampling: SamplingMode,
    /// `None` picks precise when the projection has a Jacobian.
    #[serde(default)]
    pub lift: Option<LiftMode>,
}

impl EstimatorConfig {
    pub fn new(queries: usize, delta: f64) -> Self {
        EstimatorConfig { queries, delta, sampling: SamplingMode::default(), lift: None }
    }

    pub fn with_sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_lift(mut self, lift: LiftMode) -> Self {
        self.lift = Some(lift);
        self
    }

    pub fn validate(&self, latent_dim: usize) -> Result<(), EstimatorError> {
        if self.queries == 0 {
            return Err(EstimatorError::Config("B must be positive".into()));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(EstimatorError::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if self.sampling == SamplingMode::OrthonormalFrame && self.queries > latent_dim {
            return Err(EstimatorError::Config(format!(
                "orthonormal frame of B = {} vectors in n = {latent_dim} dimensions",
                self.queries
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    /// `(1/B) Σ s_i u_i` in latent space.
    pub raw_low: RealVector,
    /// Input-space estimate, once lifted.
    pub lifted: Option<RealVector>,
    pub lift_mode: Option<LiftMode>,
    /// Latent directions `u_i` as columns (`n × B`).
    pub directions: RealMatrix,
    pub signs: Vec<Sign>,
    pub queries_used: u64,
    /// Some query landed exactly on the boundary and was counted as `+1`.
    pub has_ties: bool,
    pub omega_proxy: Option<f64>,
}

impl GradientEstimate {
    pub fn sign_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.signs.iter().map(|s| s.value())
    }
}

fn draw_directions<R: Rng + ?Sized>(n: usize, cfg: &EstimatorConfig, rng: &mut R) -> Result<RealMatrix, EstimatorError> {
    Ok(match cfg.sampling {
        SamplingMode::OrthonormalFrame => sample_orthonormal_frame(n, cfg.queries, rng)?,
        SamplingMode::NormalizedGaussian => {
            let cols = (0..cfg.queries)
                .map(|_| sample_unit_sphere(n, rng))
                .collect::<Result<Vec<_>, _>>()?;
            RealMatrix::from_columns(&cols)
        }
    })
}

/// Query `sgn S(f(δ u_i))` for fresh directions and form the latent estimate.
/// Issues exactly `B` queries, in sample order.
pub fn estimate_raw<R: Rng + ?Sized>(
    p: &dyn Projection,
    oracle: &dyn DifferenceOracle,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<GradientEstimate, EstimatorError> {
    cfg.validate(p.latent_dim())?;
    let directions = draw_directions(p.latent_dim(), cfg, rng)?;
    estimate_raw_with(p, oracle, cfg, directions)
}

/// [`estimate_raw`] with caller-supplied directions (`n × B`, unit columns).
pub fn estimate_raw_with(
    p: &dyn Projection,
    oracle: &dyn DifferenceOracle,
    cfg: &EstimatorConfig,
    directions: RealMatrix,
) -> Result<GradientEstimate, EstimatorError> {
    let n = p.latent_dim();
    if directions.nrows() != n || directions.ncols() == 0 {
        return Err(EstimatorError::Config(format!(
            "directions are {}x{}, latent dimension is {n}",
            directions.nrows(),
            directions.ncols()
        )));
    }
    if !(cfg.delta > 0.0) {
        return Err(EstimatorError::Config(format!("delta must be positive, got {}", cfg.delta)));
    }
    let b = directions.ncols();
    let mut signs = Vec::with_capacity(b);
    let mut acc = RealVector::zeros(n);
    for (i, u) in directions.column_iter().enumerate() {
        let u = u.clone_owned();
        let query = p.apply(&(&u * cfg.delta));
        let s = oracle
            .query_sign(&query)
            .map_err(|source| EstimatorError::Oracle { source, queries_used: i as u64 })?;
        acc.axpy(s.value(), &u, 1.0);
        signs.push(s);
    }
    let has_ties = signs.iter().any(|s| s.is_tie());
    Ok(GradientEstimate {
        raw_low: acc / b as f64,
        lifted: None,
        lift_mode: None,
        directions,
        signs,
        queries_used: b as u64,
        has_ties,
        omega_proxy: None,
    })
}

/// Push the latent estimate into input space using the same samples and signs.
pub fn lift_estimate(
    p: &dyn Projection,
    mut e: GradientEstimate,
    cfg: &EstimatorConfig,
) -> Result<GradientEstimate, EstimatorError> {
    let first = e.directions.column(0).clone_owned();
    let mode = match cfg.lift {
        Some(mode) => mode,
        None if p.push_forward(&first).is_some() => LiftMode::Precise,
        None => LiftMode::Approximate,
    };
    let x_b = p.boundary_image();
    let mut acc = RealVector::zeros(p.ambient_dim());
    for (u, s) in e.directions.column_iter().zip(&e.signs) {
        let u = u.clone_owned();
        let image = match mode {
            LiftMode::Precise => p.push_forward(&u).ok_or(EstimatorError::MissingJacobian)?,
            LiftMode::Approximate => p.apply(&u) - x_b,
        };
        acc.axpy(s.value(), &image, 1.0);
    }
    e.lifted = Some(acc / e.signs.len() as f64);
    e.lift_mode = Some(mode);
    Ok(e)
}

/// Fraction of samples whose sign disagrees with the side of the lifted
/// estimate their image `f(x0 + u_i) − f(x0)` lies on. A zero inner product
/// counts as the `+1` side.
pub fn omega_proxy(p: &dyn Projection, e: &GradientEstimate) -> Result<f64, EstimatorError> {
    let lifted = e.lifted.as_ref().ok_or(EstimatorError::NotLifted)?;
    let x_b = p.boundary_image();
    let disagreements = e
        .directions
        .column_iter()
        .zip(&e.signs)
        .filter(|(u, s)| {
            let image = p.apply(&u.clone_owned()) - x_b;
            let side = lifted.dot(&image) >= 0.0;
            side != s.is_adversarial()
        })
        .count();
    Ok(disagreements as f64 / e.signs.len() as f64)
}

/// `cos ⟨lifted, ∇S(x_b)⟩`.
pub fn cosine_to_truth(e: &GradientEstimate, truth: &GroundTruth, x_b: &RealVector) -> Result<f64, EstimatorError> {
    let lifted = e.lifted.as_ref().ok_or(EstimatorError::NotLifted)?;
    let grad = truth.gradient(x_b);
    if grad.norm() == 0.0 {
        return Err(EstimatorError::UndefinedCosine("true gradient is zero"));
    }
    cosine(lifted, &grad).ok_or(EstimatorError::UndefinedCosine("estimate is zero"))
}

/// Raw estimate, lift and ω-proxy in one call.
pub fn estimate<R: Rng + ?Sized>(
    p: &dyn Projection,
    oracle: &dyn DifferenceOracle,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<GradientEstimate, EstimatorError> {
    let e = estimate_raw(p, oracle, cfg, rng)?;
    let mut e = lift_estimate(p, e, cfg)?;
    e.omega_proxy = Some(omega_proxy(p, &e)?);
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_orthonormal_frame, RngSeed};
    use crate::projections::{constructed_nonlinear_b, identity_projection, orthonormal_projection};
    use crate::victims::make_linear_victim;

    fn v(xs: &[f64]) -> RealVector {
        RealVector::from_row_slice(xs)
    }

    fn linear_x1() -> (crate::victims::LocalOracle, GroundTruth) {
        make_linear_victim(v(&[1.0, 0.0]), v(&[0.0, 0.0])).unwrap()
    }

    #[test]
    fn rotated_frame_hand_enumeration() {
        let (oracle, truth) = linear_x1();
        let p = identity_projection(RealVector::zeros(2)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let frame = RealMatrix::from_columns(&[v(&[h, h]), v(&[-h, h])]);
        let cfg = EstimatorConfig::new(2, 0.1);
        let e = estimate_raw_with(&p, &oracle, &cfg, frame).unwrap();
        assert_eq!(e.sign_values().collect::<Vec<_>>(), vec![1.0, -1.0]);
        assert!((e.raw_low[0] - h).abs() < 1e-15 && e.raw_low[1].abs() < 1e-15);
        let e = lift_estimate(&p, e, &cfg).unwrap();
        assert!((cosine_to_truth(&e, &truth, &RealVector::zeros(2)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(oracle.query_count(), 2);
    }

    #[test]
    fn axis_frame_exercises_tie() {
        let (oracle, truth) = linear_x1();
        let p = identity_projection(RealVector::zeros(2)).unwrap();
        let cfg = EstimatorConfig::new(2, 0.1);
        let e = estimate_raw_with(&p, &oracle, &cfg, RealMatrix::identity(2, 2)).unwrap();
        assert_eq!(e.sign_values().collect::<Vec<_>>(), vec![1.0, 1.0]);
        assert!(e.has_ties);
        assert_eq!(e.raw_low, v(&[0.5, 0.5]));
        let e = lift_estimate(&p, e, &cfg).unwrap();
        let c = cosine_to_truth(&e, &truth, &RealVector::zeros(2)).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn frame_norm_law_and_query_count() {
        let (oracle, _) = make_linear_victim(v(&[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]), RealVector::zeros(6)).unwrap();
        let p = identity_projection(v(&[0.1, 0.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        let mut rng = RngSeed(1).stream(0);
        for b in 1..=6 {
            let before = oracle.query_count();
            let e = estimate_raw(&p, &oracle, &EstimatorConfig::new(b, 0.05), &mut rng).unwrap();
            assert_eq!(oracle.query_count() - before, b as u64);
            assert!(!e.has_ties);
            assert!((e.raw_low.norm() - 1.0 / (b as f64).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn config_validation() {
        let (oracle, _) = linear_x1();
        let p = identity_projection(RealVector::zeros(2)).unwrap();
        let mut rng = RngSeed(1).stream(0);
        for cfg in [EstimatorConfig::new(3, 0.1), EstimatorConfig::new(0, 0.1), EstimatorConfig::new(2, 0.0)] {
            assert!(matches!(estimate_raw(&p, &oracle, &cfg, &mut rng), Err(EstimatorError::Config(_))));
        }
        assert_eq!(oracle.query_count(), 0);
        let gaussian = EstimatorConfig::new(5, 0.1).with_sampling(SamplingMode::NormalizedGaussian);
        assert_eq!(estimate_raw(&p, &oracle, &gaussian, &mut rng).unwrap().queries_used, 5);
    }

    #[test]
    fn identity_lifts_agree() {
        let (oracle, _) = make_linear_victim(v(&[1.0, 1.0, -1.0]), RealVector::zeros(3)).unwrap();
        let p = identity_projection(v(&[0.5, -0.25, 0.25])).unwrap();
        let cfg = EstimatorConfig::new(3, 0.1);
        let e = estimate_raw(&p, &oracle, &cfg, &mut RngSeed(2).stream(0)).unwrap();
        let precise = lift_estimate(&p, e.clone(), &cfg.with_lift(LiftMode::Precise)).unwrap();
        let approx = lift_estimate(&p, e, &cfg.with_lift(LiftMode::Approximate)).unwrap();
        assert_eq!(precise.raw_low, precise.lifted.clone().unwrap());
        assert!((precise.lifted.unwrap() - approx.lifted.unwrap()).abs().max() < 1e-15);
    }

    #[test]
    fn orthonormal_lift_is_isometric() {
        let mut rng = RngSeed(3).stream(0);
        let w = sample_orthonormal_frame(20, 5, &mut rng).unwrap();
        let (oracle, _) = make_linear_victim(crate::numerics::standard_normal_vector(20, &mut rng), RealVector::zeros(20))
            .unwrap();
        let p = orthonormal_projection(w.clone(), RealVector::zeros(20)).unwrap();
        let cfg = EstimatorConfig::new(4, 0.1);
        let e = lift_estimate(&p, estimate_raw(&p, &oracle, &cfg, &mut rng).unwrap(), &cfg).unwrap();
        let lifted = e.lifted.clone().unwrap();
        assert!((lifted.norm() - e.raw_low.norm()).abs() < 1e-12);
        assert!((&lifted - &w * &e.raw_low).abs().max() < 1e-15);
    }

    #[test]
    fn constructed_b_lifts_nearly_parallel() {
        let mut rng = RngSeed(4).stream(0);
        let j = sample_orthonormal_frame(30, 8, &mut rng).unwrap();
        let (oracle, _) = make_linear_victim(crate::numerics::standard_normal_vector(30, &mut rng), RealVector::zeros(30))
            .unwrap();
        let p = constructed_nonlinear_b(j, RealVector::zeros(30), 0.8, 1.0).unwrap();
        let cfg = EstimatorConfig::new(8, 0.05);
        for _ in 0..100 {
            let e = estimate_raw(&p, &oracle, &cfg, &mut rng).unwrap();
            let a = lift_estimate(&p, e.clone(), &cfg.with_lift(LiftMode::Precise)).unwrap().lifted.unwrap();
            let b = lift_estimate(&p, e, &cfg.with_lift(LiftMode::Approximate)).unwrap().lifted.unwrap();
            assert!(cosine(&a, &b).unwrap() > 5f64.to_radians().cos());
        }
    }

    #[test]
    fn omega_proxy_extremes() {
        let (oracle, _) = make_linear_victim(v(&[1.0, 2.0, -1.0, 0.5]), RealVector::zeros(4)).unwrap();
        let p = identity_projection(RealVector::zeros(4)).unwrap();
        let cfg = EstimatorConfig::new(4, 0.1);
        let e = estimate(&p, &oracle, &cfg, &mut RngSeed(5).stream(0)).unwrap();
        assert_eq!(e.omega_proxy, Some(0.0));
        let mut flipped = e.clone();
        flipped.signs = e
            .signs
            .iter()
            .map(|s| if s.is_adversarial() { Sign::Negative } else { Sign::Positive })
            .collect();
        assert_eq!(omega_proxy(&p, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn cosine_errors() {
        let (oracle, truth) = linear_x1();
        let p = identity_projection(RealVector::zeros(2)).unwrap();
        let cfg = EstimatorConfig::new(2, 0.1);
        let e = estimate_raw(&p, &oracle, &cfg, &mut RngSeed(6).stream(0)).unwrap();
        assert!(matches!(cosine_to_truth(&e, &truth, &RealVector::zeros(2)), Err(EstimatorError::NotLifted)));
    }

    #[test]
    fn oracle_failure_reports_partial_count() {
        struct FailsAfter(std::sync::atomic::AtomicU64);
        impl DifferenceOracle for FailsAfter {
            fn dim(&self) -> usize {
                3
            }
            fn query_sign(&self, _x: &RealVector) -> Result<Sign, VictimError> {
                if self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst) >= 2 {
                    return Err(VictimError::BudgetExhausted);
                }
                Ok(Sign::Positive)
            }
            fn query_count(&self) -> u64 {
                self.0.load(std::sync::atomic::Ordering::SeqCst).min(2)
            }
        }
        let p = identity_projection(RealVector::zeros(3)).unwrap();
        let err = estimate_raw(&p, &FailsAfter(0.into()), &EstimatorConfig::new(3, 0.1), &mut RngSeed(7).stream(0))
            .unwrap_err();
        assert!(matches!(err, EstimatorError::Oracle { queries_used: 2, source: VictimError::BudgetExhausted }));
    }
}
