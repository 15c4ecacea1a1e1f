use serde::{Deserialize, Serialize};

use super::{compute_cn, TheoryError};

/// Local constants of a projection `f` and difference function `S` at one
/// boundary image, plus the estimator's `n` and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothnessProfile {
    /// `L_f`
    pub lipschitz_f: f64,
    /// `l_f`, lower Lipschitz constant of `f`.
    pub lower_lipschitz_f: f64,
    /// `β_f`
    pub beta_f: f64,
    /// `L_S`
    pub lipschitz_s: f64,
    /// `β_S`
    pub beta_s: f64,
    pub delta: f64,
    pub n: usize,
    pub b: usize,
    /// `‖∇fᵀ ∇S‖`
    pub proj_align: f64,
    /// `‖∇S‖`
    pub grad_norm: f64,
}

impl SmoothnessProfile {
    pub fn validate(&self) -> Result<(), TheoryError> {
        let nonneg = [
            ("lipschitz_f", self.lipschitz_f),
            ("lower_lipschitz_f", self.lower_lipschitz_f),
            ("beta_f", self.beta_f),
            ("lipschitz_s", self.lipschitz_s),
            ("beta_s", self.beta_s),
            ("proj_align", self.proj_align),
            ("grad_norm", self.grad_norm),
        ];
        for (name, value) in nonneg {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(TheoryError::InvalidProfile(format!("{name} = {value}")));
            }
        }
        if self.lower_lipschitz_f > self.lipschitz_f {
            return Err(TheoryError::InvalidProfile("l_f exceeds L_f".into()));
        }
        if !(self.delta > 0.0) {
            return Err(TheoryError::InvalidProfile(format!("delta = {}", self.delta)));
        }
        if self.b == 0 || self.b > self.n || self.n < 2 {
            return Err(TheoryError::InvalidProfile(format!("B = {}, n = {}", self.b, self.n)));
        }
        if self.proj_align > self.lipschitz_f * self.grad_norm * (1.0 + 1e-12) {
            return Err(TheoryError::InvalidProfile("‖∇fᵀ∇S‖ exceeds L_f‖∇S‖".into()));
        }
        Ok(())
    }

    /// `‖∇fᵀ∇S‖ / (L_f ‖∇S‖)`.
    pub fn alignment_ratio(&self) -> f64 {
        self.proj_align / (self.lipschitz_f * self.grad_norm)
    }
}

/// `ω = δ(½β_f L_S + ½β_S L_f² + ½δ β_f β_S L_f + ⅛δ² β_f² β_S)`.
pub fn compute_omega(p: &SmoothnessProfile) -> f64 {
    let d = p.delta;
    d * (0.5 * p.beta_f * p.lipschitz_s
        + 0.5 * p.beta_s * p.lipschitz_f * p.lipschitz_f
        + 0.5 * d * p.beta_f * p.beta_s * p.lipschitz_f
        + 0.125 * d * d * p.beta_f * p.beta_f * p.beta_s)
}

/// `ω` for a linear projection (`β_f = 0`): `½δ β_S L_f²`.
pub fn compute_omega_linear(p: &SmoothnessProfile) -> f64 {
    0.5 * p.delta * p.beta_s * p.lipschitz_f * p.lipschitz_f
}

/// `ω` for the bent projection `f′(x0+u) = f(x0) + Ju − ½α‖u‖Ju`:
/// `½δ β_S L_f² − ⅕ β_f β_S δ² L_f`.
pub fn compute_omega_thm2(p: &SmoothnessProfile) -> f64 {
    compute_omega_linear(p) - 0.2 * p.beta_f * p.beta_s * p.delta * p.delta * p.lipschitz_f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineBounds {
    pub lower: f64,
    pub upper: f64,
    /// `(1 − (n−1)ω²/‖∇fᵀ∇S‖²)` in place of the exact lower factor; below
    /// `lower` for `n ≥ 3`.
    pub relaxed_lower: f64,
}

/// Bounds on the expected cosine between the lifted estimate and `∇S`:
///
/// `lower = (2(1 − ω²/a²)^{(n−1)/2} − 1)·(a/(L_f‖∇S‖))·√(B/n)·c_n`
/// `upper = (a/(l_f‖∇S‖))·√(B/n)·c_n`
///
/// with `a = ‖∇fᵀ∇S‖`. Requires `ω ≤ a`. `upper` is capped at 1.
pub fn theorem1_bounds(p: &SmoothnessProfile, omega: f64) -> Result<CosineBounds, TheoryError> {
    p.validate()?;
    let a = p.proj_align;
    if !(omega >= 0.0) || omega > a || a == 0.0 {
        return Err(TheoryError::AssumptionViolated { omega, proj_align: a });
    }
    let cn = compute_cn(p.n)?;
    let scale = (p.b as f64 / p.n as f64).sqrt() * cn;
    let x2 = (omega / a).powi(2);
    let inner = 2.0 * (1.0 - x2).powf((p.n as f64 - 1.0) / 2.0) - 1.0;
    let lower_factor = a / (p.lipschitz_f * p.grad_norm) * scale;
    let upper = if p.lower_lipschitz_f > 0.0 { (a / (p.lower_lipschitz_f * p.grad_norm) * scale).min(1.0) } else { 1.0 };
    Ok(CosineBounds {
        lower: inner * lower_factor,
        upper,
        relaxed_lower: (1.0 - (p.n as f64 - 1.0) * x2) * lower_factor,
    })
}
