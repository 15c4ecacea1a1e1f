//! Maps `f: R^n → R^m` from a low-dimensional search space onto the input
//! space, anchored so that the latent origin lands on a boundary image.
//!
//! All projections are parameterised by the latent offset `u` from the base
//! point, so `apply(0) = x_b`.

mod constructed;
mod decoder;
mod spec;

pub use constructed::{constructed_nonlinear_a, constructed_nonlinear_b, ConstructedA, ConstructedB};
pub use decoder::{decoder_projection, load_decoder, DecoderFile, DecoderLayer, DecoderProjection, DecoderSpec};
pub use spec::{JacobianSource, ProjectionFactory, ProjectionSpec};

use std::fmt::Debug;

use rand::Rng;
use thiserror::Error;

use crate::numerics::{
    finite_difference_jacobian, max_abs_deviation_from_identity, sample_unit_sphere, spectral_extremes, spectral_norm,
    NumericsError, RealMatrix, RealVector,
};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("invalid projection: {0}")]
    InvalidProjection(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("decoder format error: {0}")]
    Format(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T, E = ProjectionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    Identity,
    Orthonormal,
    Upsample,
    ConstructedA,
    ConstructedB,
    Decoder,
}

impl ProjectionKind {
    pub fn name(self) -> &'static str {
        match self {
            ProjectionKind::Identity => "identity",
            ProjectionKind::Orthonormal => "orthonormal",
            ProjectionKind::Upsample => "upsample",
            ProjectionKind::ConstructedA => "constructed_a",
            ProjectionKind::ConstructedB => "constructed_b",
            ProjectionKind::Decoder => "decoder",
        }
    }
}

pub trait Projection: Send + Sync + Debug {
    fn kind(&self) -> ProjectionKind;
    /// `n`
    fn latent_dim(&self) -> usize;
    /// `m`
    fn ambient_dim(&self) -> usize;
    /// `f(x0)`, the image the projection was anchored to.
    fn boundary_image(&self) -> &RealVector;
    /// `f(x0 + u)`.
    fn apply(&self, u: &RealVector) -> RealVector;
    /// `∇f(x0)` as an `m × n` matrix, when the projection can provide it.
    fn jacobian_at_base(&self) -> Option<RealMatrix>;

    /// `∇f(x0) · u`.
    fn push_forward(&self, u: &RealVector) -> Option<RealVector> {
        self.jacobian_at_base().map(|j| j * u)
    }

    /// `∇f(x0 + u)`; central differences unless overridden.
    fn jacobian_at(&self, u: &RealVector) -> RealMatrix {
        let h = 1e-6 * (1.0 + u.norm());
        finite_difference_jacobian(|v| self.apply(v), u, h)
    }
}

/// Affine projection `x_b + J u` (identity, orthonormal and upsample kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjection {
    kind: ProjectionKind,
    /// `None` stands for the identity.
    j: Option<RealMatrix>,
    x_b: RealVector,
}

impl LinearProjection {
    pub fn matrix(&self) -> RealMatrix {
        self.j.clone().unwrap_or_else(|| RealMatrix::identity(self.x_b.len(), self.x_b.len()))
    }
}

impl Projection for LinearProjection {
    fn kind(&self) -> ProjectionKind {
        self.kind
    }

    fn latent_dim(&self) -> usize {
        self.j.as_ref().map_or(self.x_b.len(), |j| j.ncols())
    }

    fn ambient_dim(&self) -> usize {
        self.x_b.len()
    }

    fn boundary_image(&self) -> &RealVector {
        &self.x_b
    }

    fn apply(&self, u: &RealVector) -> RealVector {
        match &self.j {
            None => &self.x_b + u,
            Some(j) => &self.x_b + j * u,
        }
    }

    fn jacobian_at_base(&self) -> Option<RealMatrix> {
        Some(self.matrix())
    }

    fn push_forward(&self, u: &RealVector) -> Option<RealVector> {
        Some(match &self.j {
            None => u.clone(),
            Some(j) => j * u,
        })
    }

    fn jacobian_at(&self, _u: &RealVector) -> RealMatrix {
        self.matrix()
    }
}

pub fn identity_projection(x_b: RealVector) -> Result<LinearProjection> {
    if x_b.is_empty() {
        return Err(ProjectionError::InvalidProjection("empty boundary image".into()));
    }
    Ok(LinearProjection { kind: ProjectionKind::Identity, j: None, x_b })
}

/// `x_b + W u` for `W` with orthonormal columns.
pub fn orthonormal_projection(w: RealMatrix, x_b: RealVector) -> Result<LinearProjection> {
    check_linear_shape(&w, &x_b)?;
    let dev = max_abs_deviation_from_identity(&w);
    if !(dev <= 1e-10) {
        return Err(ProjectionError::InvalidProjection(format!("WᵀW deviates from I by {dev:e}")));
    }
    Ok(LinearProjection { kind: ProjectionKind::Orthonormal, j: Some(w), x_b })
}

/// `x_b` plus a bilinear upsampling of `channels` grids of `n_side²` pixels
/// to `m_side²`, see [`upsample_operator`].
pub fn upsample_projection(n_side: usize, m_side: usize, channels: usize, x_b: RealVector) -> Result<LinearProjection> {
    let j = upsample_operator(n_side, m_side, channels)?;
    check_linear_shape(&j, &x_b)?;
    Ok(LinearProjection { kind: ProjectionKind::Upsample, j: Some(j), x_b })
}

fn check_linear_shape(j: &RealMatrix, x_b: &RealVector) -> Result<()> {
    if j.nrows() != x_b.len() {
        return Err(ProjectionError::InvalidProjection(format!(
            "matrix has {} rows, boundary image has {} entries",
            j.nrows(),
            x_b.len()
        )));
    }
    if j.ncols() == 0 || j.ncols() > j.nrows() {
        return Err(ProjectionError::InvalidProjection(format!("latent dimension {} for m = {}", j.ncols(), j.nrows())));
    }
    Ok(())
}

/// One-dimensional periodic bilinear interpolation with half-pixel centres,
/// `m_side × n_side`.
fn upsample_1d(n_side: usize, m_side: usize) -> RealMatrix {
    let f = (m_side / n_side) as f64;
    let mut u = RealMatrix::zeros(m_side, n_side);
    for i in 0..m_side {
        let s = (i as f64 + 0.5) / f - 0.5;
        let lo = s.floor();
        let t = s - lo;
        let lo = (lo as isize).rem_euclid(n_side as isize) as usize;
        let hi = (lo + 1) % n_side;
        u[(i, lo)] += 1.0 - t;
        u[(i, hi)] += t;
    }
    u
}

/// Bilinear upsampling matrix with unit-norm columns.
///
/// Layout is channel-major, then row, then column. Edges wrap around, so
/// every column has the same norm before normalisation and constant grids
/// still map to constant images.
pub fn upsample_operator(n_side: usize, m_side: usize, channels: usize) -> Result<RealMatrix> {
    if n_side == 0 || channels == 0 || m_side < n_side || m_side % n_side != 0 {
        return Err(ProjectionError::InvalidProjection(format!(
            "cannot upsample {n_side}x{n_side} to {m_side}x{m_side} with {channels} channels"
        )));
    }
    let mut one = upsample_1d(n_side, m_side);
    for mut col in one.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    let plane = one.kronecker(&one);
    let (pm, pn) = plane.shape();
    let mut full = RealMatrix::zeros(pm * channels, pn * channels);
    for c in 0..channels {
        full.view_mut((c * pm, c * pn), (pm, pn)).copy_from(&plane);
    }
    Ok(full)
}

/// Orthonormal basis for the column space of `a` (thin QR).
pub fn orthonormal_basis(a: &RealMatrix) -> Result<RealMatrix> {
    if a.ncols() == 0 || a.ncols() > a.nrows() {
        return Err(ProjectionError::InvalidProjection(format!("cannot orthonormalise {}x{}", a.nrows(), a.ncols())));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(ProjectionError::InvalidProjection("columns are linearly dependent".into()));
    }
    Ok(qr.q())
}

/// Estimated Lipschitz, co-Lipschitz and smoothness constants near the base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConstants {
    /// `L_f`, largest singular value of `∇f(x0)`.
    pub lipschitz: f64,
    /// `l_f`, smallest singular value of `∇f(x0)`.
    pub lower: f64,
    /// `β_f`, sampled lower estimate.
    pub smoothness: f64,
}

/// `L_f` and `l_f` from the base Jacobian, and `β_f` as the largest
/// `‖∇f(x) − ∇f(x′)‖₂ / ‖x − x′‖` over `samples` random pairs in the ball
/// of radius `delta` around the base.
pub fn measure_projection_constants<R: Rng + ?Sized>(
    p: &dyn Projection,
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<ProjectionConstants> {
    if !(delta > 0.0) || samples < 2 {
        return Err(ProjectionError::InvalidParameter(format!(
            "need delta > 0 and samples >= 2, got {delta} and {samples}"
        )));
    }
    let n = p.latent_dim();
    let j0 = p.jacobian_at_base().unwrap_or_else(|| p.jacobian_at(&RealVector::zeros(n)));
    let (lipschitz, lower) = spectral_extremes(&j0)?;
    let draw = |rng: &mut R| -> Result<RealVector> {
        let r = delta * rng.random::<f64>();
        Ok(sample_unit_sphere(n, rng)? * r)
    };
    let mut smoothness = 0.0_f64;
    for _ in 0..samples {
        let a = draw(rng)?;
        let b = draw(rng)?;
        let dist = (&a - &b).norm();
        if dist == 0.0 {
            continue;
        }
        let diff = p.jacobian_at(&a) - p.jacobian_at(&b);
        smoothness = smoothness.max(spectral_norm(&diff) / dist);
    }
    Ok(ProjectionConstants { lipschitz, lower, smoothness })
}
