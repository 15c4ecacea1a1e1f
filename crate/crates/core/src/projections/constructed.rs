//! Two explicit nonlinear projections that agree with a linear map `x_b + Ju`
//! to first order at the base but bend away from it.

use super::{check_linear_shape, Projection, ProjectionError, ProjectionKind, Result};
use crate::numerics::{spectral_extremes, RealMatrix, RealVector};

/// `f(x0 + u) = x_b + Ju − ½ α ‖u‖ Ju`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedB {
    j: RealMatrix,
    x_b: RealVector,
    alpha: f64,
    lipschitz: f64,
    beta_f: f64,
}

/// Build [`ConstructedB`]; `alpha` must lie in `[0, 0.8 β_f / L_f]` where
/// `L_f` is the largest singular value of `J`.
pub fn constructed_nonlinear_b(j: RealMatrix, x_b: RealVector, alpha: f64, beta_f: f64) -> Result<ConstructedB> {
    check_linear_shape(&j, &x_b)?;
    let (lipschitz, _) = spectral_extremes(&j)?;
    if !(beta_f >= 0.0) || !beta_f.is_finite() {
        return Err(ProjectionError::InvalidParameter(format!("beta_f = {beta_f}")));
    }
    let max_alpha = 0.8 * beta_f / lipschitz;
    // small relative slack so that alpha = 0.8·β_f/L_f computed elsewhere is accepted
    if !(alpha >= 0.0) || alpha > max_alpha * (1.0 + 1e-12) {
        return Err(ProjectionError::InvalidParameter(format!("alpha = {alpha} outside [0, {max_alpha}]")));
    }
    Ok(ConstructedB { j, x_b, alpha, lipschitz, beta_f })
}

impl ConstructedB {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta_f(&self) -> f64 {
        self.beta_f
    }

    /// `L_f` of the underlying linear map.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl Projection for ConstructedB {
    fn kind(&self) -> ProjectionKind {
        ProjectionKind::ConstructedB
    }

    fn latent_dim(&self) -> usize {
        self.j.ncols()
    }

    fn ambient_dim(&self) -> usize {
        self.j.nrows()
    }

    fn boundary_image(&self) -> &RealVector {
        &self.x_b
    }

    fn apply(&self, u: &RealVector) -> RealVector {
        let ju = &self.j * u;
        &self.x_b + ju * (1.0 - 0.5 * self.alpha * u.norm())
    }

    fn jacobian_at_base(&self) -> Option<RealMatrix> {
        Some(self.j.clone())
    }

    fn push_forward(&self, u: &RealVector) -> Option<RealVector> {
        Some(&self.j * u)
    }

    /// `(1 − ½α‖u‖) J − (α / 2‖u‖) (Ju) uᵀ`.
    fn jacobian_at(&self, u: &RealVector) -> RealMatrix {
        let r = u.norm();
        let mut out = &self.j * (1.0 - 0.5 * self.alpha * r);
        if r > 0.0 {
            let ju = &self.j * u;
            out -= ju * u.transpose() * (0.5 * self.alpha / r);
        }
        out
    }
}

/// `f(x0 + u) = x_b + Ju + ½ sgn(⟨u,v⟩) ⟨u,v⟩² k ∇S` with
/// `v = Jᵀ∇S / ‖Jᵀ∇S‖`. Needs the true gradient, so it is a white-box tool.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedA {
    j: RealMatrix,
    x_b: RealVector,
    grad_s: RealVector,
    v: RealVector,
    k: f64,
}

/// Build [`ConstructedA`]; `k` must lie in `[0, β_f / L_S]`.
pub fn constructed_nonlinear_a(
    j: RealMatrix,
    x_b: RealVector,
    grad_s: RealVector,
    k: f64,
    beta_f: f64,
    lipschitz_s: f64,
) -> Result<ConstructedA> {
    check_linear_shape(&j, &x_b)?;
    if grad_s.len() != x_b.len() {
        return Err(ProjectionError::InvalidProjection(format!(
            "gradient has {} entries, boundary image {}",
            grad_s.len(),
            x_b.len()
        )));
    }
    let pulled = j.tr_mul(&grad_s);
    let norm = pulled.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(ProjectionError::InvalidParameter("Jᵀ∇S is zero".into()));
    }
    if !(lipschitz_s > 0.0) || !(beta_f >= 0.0) {
        return Err(ProjectionError::InvalidParameter(format!("L_S = {lipschitz_s}, beta_f = {beta_f}")));
    }
    let max_k = beta_f / lipschitz_s;
    if !(k >= 0.0) || k > max_k * (1.0 + 1e-12) {
        return Err(ProjectionError::InvalidParameter(format!("k = {k} outside [0, {max_k}]")));
    }
    Ok(ConstructedA { j, x_b, grad_s, v: pulled / norm, k })
}

impl ConstructedA {
    /// Unit latent direction `v` along which the bend acts.
    pub fn direction(&self) -> &RealVector {
        &self.v
    }
}

impl Projection for ConstructedA {
    fn kind(&self) -> ProjectionKind {
        ProjectionKind::ConstructedA
    }

    fn latent_dim(&self) -> usize {
        self.j.ncols()
    }

    fn ambient_dim(&self) -> usize {
        self.j.nrows()
    }

    fn boundary_image(&self) -> &RealVector {
        &self.x_b
    }

    fn apply(&self, u: &RealVector) -> RealVector {
        let t = u.dot(&self.v);
        let mut out = &self.x_b + &self.j * u;
        if t != 0.0 {
            out.axpy(0.5 * t.signum() * t * t * self.k, &self.grad_s, 1.0);
        }
        out
    }

    fn jacobian_at_base(&self) -> Option<RealMatrix> {
        Some(self.j.clone())
    }

    fn push_forward(&self, u: &RealVector) -> Option<RealVector> {
        Some(&self.j * u)
    }

    /// `J + k |⟨u,v⟩| ∇S vᵀ`.
    fn jacobian_at(&self, u: &RealVector) -> RealMatrix {
        let t = u.dot(&self.v).abs();
        &self.j + &self.grad_s * self.v.transpose() * (self.k * t)
    }
}
