use super::TheoryError;
use crate::numerics::{adaptive_simpson, log_beta};

/// Stand-in for the infinite `n = 2` density at `x = ±1`.
pub const PDF_CAP: f64 = 1e308;

/// `c_n = 2√n / (B((n−1)/2, ½)·(n−1))`.
pub fn compute_cn(n: usize) -> Result<f64, TheoryError> {
    if n < 2 {
        return Err(TheoryError::Domain(format!("c_n needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let lb = log_beta((nf - 1.0) / 2.0, 0.5)?;
    Ok((2f64.ln() + 0.5 * nf.ln() - lb - (nf - 1.0).ln()).exp())
}

fn check_pa_args(n: usize, x: f64) -> Result<(), TheoryError> {
    if n < 2 {
        return Err(TheoryError::Domain(format!("p_a needs n >= 2, got {n}")));
    }
    if !(x.abs() <= 1.0) {
        return Err(TheoryError::Domain(format!("p_a is supported on [-1, 1], got {x}")));
    }
    Ok(())
}

/// Density of one coordinate of a uniform unit vector in `R^n`:
/// `(1 − x²)^{(n−3)/2} / B((n−1)/2, ½)`. Returns [`PDF_CAP`] at the
/// singular endpoints when `n = 2`.
pub fn pa_pdf(n: usize, x: f64) -> Result<f64, TheoryError> {
    check_pa_args(n, x)?;
    let nf = n as f64;
    let lb = log_beta((nf - 1.0) / 2.0, 0.5)?;
    let base = 1.0 - x * x;
    if n == 2 && base == 0.0 {
        return Ok(PDF_CAP);
    }
    Ok(base.powf((nf - 3.0) / 2.0) / lb.exp())
}

/// `P[X ≤ x]` for the density [`pa_pdf`].
///
/// Substituting `x = sin θ` turns the integrand into the bounded
/// `cos^{n−2} θ`, which is integrated from 0 by adaptive Simpson; the
/// lower half is supplied by symmetry so `pa_cdf(n, 0) = ½` exactly.
pub fn pa_cdf(n: usize, x: f64) -> Result<f64, TheoryError> {
    check_pa_args(n, x)?;
    if x == 0.0 {
        return Ok(0.5);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x == -1.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let norm = log_beta((nf - 1.0) / 2.0, 0.5)?.exp();
    let upper = x.abs().asin();
    let half = adaptive_simpson(|t| t.cos().powi(n as i32 - 2), 0.0, upper, 1e-13) / norm;
    let right = (0.5 + half).clamp(0.5, 1.0);
    Ok(if x > 0.0 { right } else { 1.0 - right })
}
