//! Victim classifiers seen only through the sign of their difference
//! function `S(x) = G(x)[y_mal] − G(x)[y_ben]`.
//!
//! Every victim comes in two halves: a [`DifferenceOracle`] that answers
//! counted sign queries (the attacker's view) and a [`GroundTruth`] with
//! exact values and gradients (the experimenter's view, never counted).

mod protocol;
mod spec;

pub use protocol::{connect_remote_victim, serve_victim, RemoteOracle, ServerHandle, VictimServer};
pub use spec::{LayerSpec, RandomMlpSpec, SmoothFirstLayer, VictimSpec};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::numerics::{sample_unit_sphere, RealMatrix, RealVector, RngSeed};

#[derive(Debug, Error)]
pub enum VictimError {
    #[error("degenerate victim: {0}")]
    Degenerate(String),
    #[error("invalid victim: {0}")]
    Invalid(String),
    #[error("query has dimension {got}, victim expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("transport error: {0}")]
    Transport(#[from] std::io::Error),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("query budget exhausted")]
    BudgetExhausted,
}

/// Answer to a sign query.
///
/// `Tie` means `S(x) = 0` exactly; it counts as adversarial (`+1`). Only
/// local oracles can report it, the wire protocol folds it into `Positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
    Tie,
}

impl Sign {
    pub fn of_score(s: f64) -> Sign {
        if s > 0.0 {
            Sign::Positive
        } else if s == 0.0 {
            Sign::Tie
        } else {
            Sign::Negative
        }
    }

    /// `+1.0` for adversarial answers (including ties), `-1.0` otherwise.
    pub fn value(self) -> f64 {
        if self.is_adversarial() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn is_adversarial(self) -> bool {
        !matches!(self, Sign::Negative)
    }

    pub fn is_tie(self) -> bool {
        matches!(self, Sign::Tie)
    }
}

/// Label-only query access to a victim.
pub trait DifferenceOracle: Send + Sync {
    /// Input dimension `m`.
    fn dim(&self) -> usize;
    /// One counted query of `sgn S(x)`.
    fn query_sign(&self, x: &RealVector) -> Result<Sign, VictimError>;
    /// Number of completed queries so far.
    fn query_count(&self) -> u64;
    /// `(y_ben, y_mal)` class indices behind the difference function.
    fn labels(&self) -> (usize, usize) {
        (0, 1)
    }
}

impl<T: DifferenceOracle + ?Sized> DifferenceOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn query_sign(&self, x: &RealVector) -> Result<Sign, VictimError> {
        (**self).query_sign(x)
    }
    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
    fn labels(&self) -> (usize, usize) {
        (**self).labels()
    }
}

impl<T: DifferenceOracle + ?Sized> DifferenceOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn query_sign(&self, x: &RealVector) -> Result<Sign, VictimError> {
        (**self).query_sign(x)
    }
    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
    fn labels(&self) -> (usize, usize) {
        (**self).labels()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearVictim {
    pub w: RealVector,
    pub b: RealVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticVictim {
    pub w: RealVector,
    pub b: RealVector,
    pub h: RealMatrix,
    /// Spectral radius of `h`, i.e. the exact smoothness constant.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub w: RealMatrix,
    pub b: RealVector,
}

/// Fully connected network with `tanh` between layers and raw logits out.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpVictim {
    pub layers: Vec<DenseLayer>,
    pub y_ben: usize,
    pub y_mal: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Victim {
    Linear(LinearVictim),
    Quadratic(QuadraticVictim),
    Mlp(MlpVictim),
}

/// Local Lipschitz and smoothness constants of `S` around a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalConstants {
    pub lipschitz: f64,
    pub smoothness: f64,
}

/// Directions sampled when estimating local constants.
const CONSTANT_DIRECTIONS: usize = 64;

impl Victim {
    pub fn linear(w: RealVector, b: RealVector) -> Result<Victim, VictimError> {
        if w.len() != b.len() {
            return Err(VictimError::Invalid(format!("w has {} entries, b has {}", w.len(), b.len())));
        }
        if w.is_empty() || w.norm() == 0.0 {
            return Err(VictimError::Degenerate("linear victim with zero normal".into()));
        }
        check_finite(w.iter().chain(b.iter()))?;
        Ok(Victim::Linear(LinearVictim { w, b }))
    }

    pub fn quadratic(w: RealVector, b: RealVector, h: RealMatrix) -> Result<Victim, VictimError> {
        let m = w.len();
        if m == 0 || b.len() != m || h.shape() != (m, m) {
            return Err(VictimError::Invalid(format!(
                "quadratic victim shapes: w {}, b {}, H {}x{}",
                m,
                b.len(),
                h.nrows(),
                h.ncols()
            )));
        }
        check_finite(w.iter().chain(b.iter()).chain(h.iter()))?;
        let asym = (&h - h.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(VictimError::Invalid(format!("H is not symmetric (max asymmetry {asym:e})")));
        }
        let beta = h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, l| acc.max(l.abs()));
        Ok(Victim::Quadratic(QuadraticVictim { w, b, h, beta }))
    }

    pub fn mlp(layers: Vec<DenseLayer>, y_ben: usize, y_mal: usize) -> Result<Victim, VictimError> {
        let first = layers
            .first()
            .ok_or_else(|| VictimError::Invalid("MLP without layers".into()))?;
        if first.w.ncols() == 0 {
            return Err(VictimError::Invalid("MLP input dimension is zero".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.b.len() != layer.w.nrows() {
                return Err(VictimError::Invalid(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    layer.b.len(),
                    layer.w.nrows()
                )));
            }
            if i > 0 && layers[i - 1].w.nrows() != layer.w.ncols() {
                return Err(VictimError::Invalid(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    layer.w.ncols(),
                    i - 1,
                    layers[i - 1].w.nrows()
                )));
            }
            check_finite(layer.w.iter().chain(layer.b.iter()))?;
        }
        let classes = layers.last().map_or(0, |l| l.w.nrows());
        if classes < 2 {
            return Err(VictimError::Invalid(format!("MLP has {classes} classes, need at least 2")));
        }
        if y_ben >= classes || y_mal >= classes || y_ben == y_mal {
            return Err(VictimError::Invalid(format!(
                "labels y_ben={y_ben}, y_mal={y_mal} invalid for {classes} classes"
            )));
        }
        Ok(Victim::Mlp(MlpVictim { layers, y_ben, y_mal }))
    }

    /// `(y_ben, y_mal)`; the analytic victims use `(0, 1)`.
    pub fn labels(&self) -> (usize, usize) {
        match self {
            Victim::Mlp(v) => (v.y_ben, v.y_mal),
            _ => (0, 1),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Victim::Linear(v) => v.w.len(),
            Victim::Quadratic(v) => v.w.len(),
            Victim::Mlp(v) => v.layers[0].w.ncols(),
        }
    }

    /// `S(x)`.
    pub fn value(&self, x: &RealVector) -> f64 {
        match self {
            Victim::Linear(v) => v.w.dot(&(x - &v.b)),
            Victim::Quadratic(v) => {
                let d = x - &v.b;
                v.w.dot(&d) + 0.5 * d.dot(&(&v.h * &d))
            }
            Victim::Mlp(v) => {
                let logits = v.logits(x);
                logits[v.y_mal] - logits[v.y_ben]
            }
        }
    }

    /// `∇S(x)`.
    pub fn gradient(&self, x: &RealVector) -> RealVector {
        match self {
            Victim::Linear(v) => v.w.clone(),
            Victim::Quadratic(v) => &v.w + &v.h * (x - &v.b),
            Victim::Mlp(v) => v.gradient(x),
        }
    }

    /// The same victim with every class score multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Victim {
        match self {
            Victim::Linear(v) => Victim::Linear(LinearVictim { w: &v.w * c, b: v.b.clone() }),
            Victim::Quadratic(v) => Victim::Quadratic(QuadraticVictim {
                w: &v.w * c,
                b: v.b.clone(),
                h: &v.h * c,
                beta: v.beta * c,
            }),
            Victim::Mlp(v) => {
                let mut layers = v.layers.clone();
                let last = layers.last_mut().expect("validated MLP has layers");
                last.w *= c;
                last.b *= c;
                Victim::Mlp(MlpVictim { layers, y_ben: v.y_ben, y_mal: v.y_mal })
            }
        }
    }

    /// Local `(L_S, β_S)` within radius `r` of `x`.
    ///
    /// Linear victims are exact. Otherwise gradient norms are sampled along
    /// 64 random directions at distances `0, r/2, r`; quadratic victims use
    /// their exact spectral radius for `β_S`, MLPs the largest pairwise
    /// gradient-difference ratio among the same samples.
    pub fn local_constants(&self, x: &RealVector, r: f64) -> LocalConstants {
        match self {
            Victim::Linear(v) => LocalConstants { lipschitz: v.w.norm(), smoothness: 0.0 },
            _ => {
                let mut rng = RngSeed(0x5eed_c0de).stream(0);
                let mut points = vec![x.clone()];
                for _ in 0..CONSTANT_DIRECTIONS {
                    let d = sample_unit_sphere(self.dim(), &mut rng).expect("dim >= 1");
                    points.push(x + &d * (0.5 * r));
                    points.push(x + &d * r);
                }
                let grads: Vec<RealVector> = points.iter().map(|p| self.gradient(p)).collect();
                let lipschitz = grads.iter().map(|g| g.norm()).fold(0.0, f64::max);
                let smoothness = match self {
                    Victim::Quadratic(v) => v.beta,
                    _ => {
                        let mut worst = 0.0_f64;
                        for i in 0..points.len() {
                            for j in (i + 1)..points.len() {
                                let dist = (&points[i] - &points[j]).norm();
                                if dist > 0.0 {
                                    worst = worst.max((&grads[i] - &grads[j]).norm() / dist);
                                }
                            }
                        }
                        worst
                    }
                };
                LocalConstants { lipschitz, smoothness }
            }
        }
    }
}

impl MlpVictim {
    pub fn logits(&self, x: &RealVector) -> RealVector {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = &layer.w * &a + &layer.b;
            if i < last {
                a.apply(|z| *z = z.tanh());
            }
        }
        a
    }

    /// Reverse-mode gradient of `logit[y_mal] − logit[y_ben]`.
    fn gradient(&self, x: &RealVector) -> RealVector {
        let last = self.layers.len() - 1;
        // activations[i] is the input of layer i
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            activations.push(a.clone());
            a = &layer.w * &a + &layer.b;
            if i < last {
                a.apply(|z| *z = z.tanh());
            }
        }
        let mut g = RealVector::zeros(a.len());
        g[self.y_mal] = 1.0;
        g[self.y_ben] = -1.0;
        for i in (0..self.layers.len()).rev() {
            g = self.layers[i].w.tr_mul(&g);
            if i > 0 {
                // activations[i] = tanh(pre-activation of layer i-1)
                g.zip_apply(&activations[i], |gi, ai| *gi *= 1.0 - ai * ai);
            }
        }
        g
    }
}

fn check_finite<'a>(mut values: impl Iterator<Item = &'a f64>) -> Result<(), VictimError> {
    if values.any(|v| !v.is_finite()) {
        return Err(VictimError::Invalid("non-finite parameter".into()));
    }
    Ok(())
}

/// Counted, in-process sign oracle.
#[derive(Debug)]
pub struct LocalOracle {
    victim: Arc<Victim>,
    queries: AtomicU64,
}

impl LocalOracle {
    pub fn new(victim: Arc<Victim>) -> Self {
        LocalOracle { victim, queries: AtomicU64::new(0) }
    }

    pub fn victim(&self) -> &Arc<Victim> {
        &self.victim
    }
}

impl DifferenceOracle for LocalOracle {
    fn dim(&self) -> usize {
        self.victim.dim()
    }

    fn query_sign(&self, x: &RealVector) -> Result<Sign, VictimError> {
        if x.len() != self.dim() {
            return Err(VictimError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(Sign::of_score(self.victim.value(x)))
    }

    fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    fn labels(&self) -> (usize, usize) {
        self.victim.labels()
    }
}

/// Uncounted white-box access for measurement.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    victim: Arc<Victim>,
}

impl GroundTruth {
    pub fn new(victim: Arc<Victim>) -> Self {
        GroundTruth { victim }
    }

    pub fn victim(&self) -> &Victim {
        &self.victim
    }

    pub fn dim(&self) -> usize {
        self.victim.dim()
    }

    pub fn value(&self, x: &RealVector) -> f64 {
        self.victim.value(x)
    }

    pub fn gradient(&self, x: &RealVector) -> RealVector {
        self.victim.gradient(x)
    }

    pub fn local_constants(&self, x: &RealVector, r: f64) -> LocalConstants {
        self.victim.local_constants(x, r)
    }
}

/// Oracle and ground truth sharing one victim.
pub fn instrument(victim: Victim) -> (LocalOracle, GroundTruth) {
    let victim = Arc::new(victim);
    (LocalOracle::new(victim.clone()), GroundTruth::new(victim))
}

/// `S(x) = w·(x − b)`.
pub fn make_linear_victim(w: RealVector, b: RealVector) -> Result<(LocalOracle, GroundTruth), VictimError> {
    Ok(instrument(Victim::linear(w, b)?))
}

/// `S(x) = w·(x − b) + ½ (x − b)ᵀ H (x − b)`.
pub fn make_quadratic_victim(
    w: RealVector,
    b: RealVector,
    h: RealMatrix,
) -> Result<(LocalOracle, GroundTruth), VictimError> {
    Ok(instrument(Victim::quadratic(w, b, h)?))
}

pub fn make_mlp_victim(
    layers: Vec<DenseLayer>,
    y_ben: usize,
    y_mal: usize,
) -> Result<(LocalOracle, GroundTruth), VictimError> {
    Ok(instrument(Victim::mlp(layers, y_ben, y_mal)?))
}

/// Random `tanh` MLP with layer widths `sizes` (input first, classes last).
///
/// Weights are `N(0, gain²/fan_in)`, biases `N(0, 0.1²)`. With
/// `smooth_first_layer`, each first-layer row is a bilinear upsampling of a
/// random coarse grid plus a small isotropic component, which makes `∇S`
/// concentrate on a low-frequency subspace.
pub fn random_mlp<R: Rng + ?Sized>(
    sizes: &[usize],
    gain: f64,
    smooth_first_layer: Option<&SmoothFirstLayer>,
    rng: &mut R,
) -> Result<Vec<DenseLayer>, VictimError> {
    use crate::numerics::standard_normal_vector;
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(VictimError::Invalid(format!("bad MLP sizes {sizes:?}")));
    }
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for (i, pair) in sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = gain / (fan_in as f64).sqrt();
        let w = match (i, smooth_first_layer) {
            (0, Some(smooth)) => {
                let basis = crate::projections::upsample_operator(smooth.n_side, smooth.m_side, smooth.channels)
                    .map_err(|e| VictimError::Invalid(e.to_string()))?;
                if basis.nrows() != fan_in {
                    return Err(VictimError::Invalid(format!(
                        "smooth first layer spans dimension {}, network input is {fan_in}",
                        basis.nrows()
                    )));
                }
                let n = basis.ncols();
                let rows: Vec<RealVector> = (0..fan_out)
                    .map(|_| {
                        let coarse = standard_normal_vector(n, rng);
                        let smooth_part = &basis * coarse * (gain / (n as f64).sqrt());
                        let rough = standard_normal_vector(fan_in, rng) * (smooth.rough_fraction * std);
                        smooth_part + rough
                    })
                    .collect();
                RealMatrix::from_fn(fan_out, fan_in, |r, c| rows[r][c])
            }
            _ => RealMatrix::from_fn(fan_out, fan_in, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * std),
        };
        let b = standard_normal_vector(fan_out, rng) * 0.1;
        layers.push(DenseLayer { w, b });
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_difference_jacobian;

    fn v(xs: &[f64]) -> RealVector {
        RealVector::from_row_slice(xs)
    }

    fn fd_gradient(victim: &Victim, x: &RealVector) -> RealVector {
        let h = 1e-5 * (1.0 + x.norm());
        let j = finite_difference_jacobian(|p| RealVector::from_element(1, victim.value(p)), x, h);
        j.row(0).transpose()
    }

    fn rel_err(a: &RealVector, b: &RealVector) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn linear_signs_and_tie() {
        let (oracle, truth) = make_linear_victim(v(&[1.0, 0.0]), v(&[0.0, 0.0])).unwrap();
        assert_eq!(oracle.query_sign(&v(&[0.5, 7.0])).unwrap().value(), 1.0);
        assert_eq!(oracle.query_sign(&v(&[-0.5, 7.0])).unwrap().value(), -1.0);
        let tie = oracle.query_sign(&v(&[0.0, 3.0])).unwrap();
        assert!(tie.is_tie());
        assert_eq!(tie.value(), 1.0);
        assert_eq!(oracle.query_count(), 3);
        assert_eq!(truth.gradient(&v(&[4.0, 4.0])), v(&[1.0, 0.0]));
        let c = truth.local_constants(&v(&[0.0, 0.0]), 1.0);
        assert_eq!((c.lipschitz, c.smoothness), (1.0, 0.0));
    }

    #[test]
    fn zero_normal_is_degenerate() {
        assert!(matches!(
            make_linear_victim(v(&[0.0, 0.0]), v(&[1.0, 1.0])),
            Err(VictimError::Degenerate(_))
        ));
    }

    #[test]
    fn wrong_query_dimension_is_not_counted() {
        let (oracle, _) = make_linear_victim(v(&[1.0, 0.0]), v(&[0.0, 0.0])).unwrap();
        assert!(oracle.query_sign(&v(&[1.0])).is_err());
        assert_eq!(oracle.query_count(), 0);
    }

    #[test]
    fn quadratic_with_zero_hessian_is_linear() {
        let w = v(&[0.3, -1.2, 2.0]);
        let b = v(&[0.1, 0.2, -0.4]);
        let (_, lin) = make_linear_victim(w.clone(), b.clone()).unwrap();
        let (_, quad) = make_quadratic_victim(w, b, RealMatrix::zeros(3, 3)).unwrap();
        let mut rng = RngSeed(2).stream(0);
        for _ in 0..50 {
            let x = crate::numerics::standard_normal_vector(3, &mut rng);
            assert!((lin.value(&x) - quad.value(&x)).abs() <= 1e-15 * (1.0 + lin.value(&x).abs()));
            assert_eq!(lin.gradient(&x), quad.gradient(&x));
        }
    }

    #[test]
    fn quadratic_gradient_by_hand() {
        let h = RealMatrix::from_diagonal(&v(&[2.0, 0.0]));
        let (_, t) = make_quadratic_victim(v(&[1.0, 0.0]), v(&[0.0, 0.0]), h).unwrap();
        assert_eq!(t.gradient(&v(&[1.0, 1.0])), v(&[3.0, 0.0]));
    }

    #[test]
    fn quadratic_rejects_asymmetric_hessian() {
        let h = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            make_quadratic_victim(v(&[1.0, 0.0]), v(&[0.0, 0.0]), h),
            Err(VictimError::Invalid(_))
        ));
    }

    #[test]
    fn quadratic_beta_is_spectral_radius() {
        let h = RealMatrix::from_diagonal(&v(&[1.5, -4.0, 0.5]));
        let (_, t) = make_quadratic_victim(v(&[1.0, 0.0, 0.0]), RealVector::zeros(3), h).unwrap();
        let c = t.local_constants(&RealVector::zeros(3), 0.1);
        assert!((c.smoothness - 4.0).abs() < 1e-12);
        assert!(c.lipschitz >= 1.0);
    }

    #[test]
    fn random_quadratic_matches_finite_differences() {
        let mut rng = RngSeed(21).stream(0);
        let a = RealMatrix::from_fn(8, 8, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let h = (&a + a.transpose()) * 0.5;
        let w = crate::numerics::standard_normal_vector(8, &mut rng);
        let b = crate::numerics::standard_normal_vector(8, &mut rng);
        let victim = Victim::quadratic(w, b, h).unwrap();
        for _ in 0..20 {
            let x = crate::numerics::standard_normal_vector(8, &mut rng);
            assert!(rel_err(&fd_gradient(&victim, &x), &victim.gradient(&x)) < 1e-6);
        }
    }

    #[test]
    fn single_layer_mlp_is_linear() {
        let w = RealMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.25, 3.0, -1.0]);
        let bias = v(&[0.1, -0.2, 0.3]);
        let mlp = Victim::mlp(vec![DenseLayer { w: w.clone(), b: bias.clone() }], 0, 2).unwrap();
        let normal = (w.row(2) - w.row(0)).transpose();
        // w·(x − b) = w·x + (bias_mal − bias_ben) with b chosen along w
        let offset = bias[2] - bias[0];
        let anchor = &normal * (-offset / normal.norm_squared());
        let lin = Victim::linear(normal.clone(), anchor).unwrap();
        let mut rng = RngSeed(4).stream(0);
        for _ in 0..100 {
            let x = crate::numerics::standard_normal_vector(2, &mut rng);
            assert!((mlp.value(&x) - lin.value(&x)).abs() < 1e-12);
            assert_eq!(mlp.gradient(&x), normal);
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = RngSeed(8).stream(0);
        let layers = random_mlp(&[2, 16, 3], 1.5, None, &mut rng).unwrap();
        let victim = Victim::mlp(layers, 0, 1).unwrap();
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let x = crate::numerics::standard_normal_vector(2, &mut rng);
            worst = worst.max(rel_err(&fd_gradient(&victim, &x), &victim.gradient(&x)));
        }
        assert!(worst < 1e-5, "worst relative error {worst:e}");
    }

    #[test]
    fn mlp_shape_validation() {
        let good = DenseLayer { w: RealMatrix::zeros(4, 3), b: RealVector::zeros(4) };
        let bad = DenseLayer { w: RealMatrix::zeros(2, 5), b: RealVector::zeros(2) };
        assert!(matches!(Victim::mlp(vec![good.clone(), bad], 0, 1), Err(VictimError::Invalid(_))));
        let out = DenseLayer { w: RealMatrix::zeros(3, 4), b: RealVector::zeros(3) };
        assert!(Victim::mlp(vec![good.clone(), out.clone()], 1, 1).is_err());
        assert!(Victim::mlp(vec![good.clone(), out.clone()], 0, 3).is_err());
        assert!(Victim::mlp(vec![good, out], 0, 2).is_ok());
    }

    #[test]
    fn positive_scaling_preserves_every_sign() {
        let mut rng = RngSeed(31).stream(0);
        let layers = random_mlp(&[6, 16, 16, 3], 1.5, None, &mut rng).unwrap();
        let victims = vec![
            Victim::linear(v(&[1.0, -2.0, 0.5, 0.0, 1.0, 1.0]), RealVector::zeros(6)).unwrap(),
            Victim::quadratic(
                v(&[1.0, -2.0, 0.5, 0.0, 1.0, 1.0]),
                RealVector::zeros(6),
                RealMatrix::identity(6, 6) * -0.7,
            )
            .unwrap(),
            Victim::mlp(layers, 0, 2).unwrap(),
        ];
        for victim in victims {
            for c in [10.0, 0.01, 3.7] {
                let scaled = victim.scaled(c);
                let a = LocalOracle::new(Arc::new(victim.clone()));
                let b = LocalOracle::new(Arc::new(scaled));
                for _ in 0..1000 {
                    let x = crate::numerics::standard_normal_vector(6, &mut rng);
                    assert_eq!(a.query_sign(&x).unwrap().value(), b.query_sign(&x).unwrap().value());
                }
            }
        }
    }

    #[test]
    fn concurrent_queries_are_all_counted() {
        let (oracle, _) = make_linear_victim(v(&[1.0, 0.0]), v(&[0.0, 0.0])).unwrap();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for i in 0..500 {
                        oracle.query_sign(&v(&[i as f64 - 250.0, 0.0])).unwrap();
                    }
                });
            }
        });
        assert_eq!(oracle.query_count(), 4000);
    }
}
