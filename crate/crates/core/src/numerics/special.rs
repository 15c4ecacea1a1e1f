use std::f64::consts::PI;

use super::NumericsError;

const LANCZOS_R: f64 = 10.900511;
const LANCZOS_DK: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];
// ln(2·sqrt(e/π))
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;
// ½·ln(2π)
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this argument the Stirling series is used instead of Lanczos.
const STIRLING_CUTOFF: f64 = 10.0;

/// `ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π]` for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    // Bernoulli-number coefficients B_{2k} / (2k (2k-1)).
    r * (1.0 / 12.0
        + r2 * (-1.0 / 360.0
            + r2 * (1.0 / 1260.0
                + r2 * (-1.0 / 1680.0
                    + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 * (1.0 / 156.0)))))))
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let s = LANCZOS_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_DK[0], |s, (k, d)| s + d / (x + k as f64 - 1.0));
    s.ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + LANCZOS_R) / std::f64::consts::E).ln()
}

/// Natural log of the Gamma function for positive arguments.
pub fn log_gamma(x: f64) -> Result<f64, NumericsError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(NumericsError::Domain { function: "log_gamma", value: x });
    }
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        let s = LANCZOS_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_DK[0], |s, (k, d)| s + d / (k as f64 - x));
        return Ok(PI.ln()
            - (PI * x).sin().ln()
            - s.ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + LANCZOS_R) / std::f64::consts::E).ln());
    }
    if x >= STIRLING_CUTOFF {
        return Ok((x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x));
    }
    Ok(lanczos_ln_gamma(x))
}

/// `ln Γ(a) − ln Γ(a + b)` for `a >= 10`, without forming either large term.
fn log_gamma_ratio_large(a: f64, b: f64) -> f64 {
    let ab = a + b;
    -(a - 0.5) * (b / a).ln_1p() - b * ab.ln() + b + stirling_correction(a) - stirling_correction(ab)
}

/// `ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b)`.
///
/// When either argument is large the two big log-gamma terms are combined
/// analytically so the cancellation does not eat the precision.
pub fn log_beta(a: f64, b: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(NumericsError::Domain { function: "log_beta", value: a });
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(NumericsError::Domain { function: "log_beta", value: b });
    }
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    if large >= STIRLING_CUTOFF {
        return Ok(log_gamma(small)? + log_gamma_ratio_large(large, small));
    }
    Ok(log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(k: u32) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn log_gamma_at_integers() {
        for k in 1..=170u32 {
            let expected = ln_factorial(k - 1);
            let got = log_gamma(k as f64).unwrap();
            let tol = 1e-13 * expected.abs().max(1.0);
            assert!((got - expected).abs() < tol, "k={k}: {got} vs {expected}");
        }
    }

    #[test]
    fn log_gamma_at_half_integers() {
        // Γ(k + ½) = (2k)! √π / (4^k k!)
        for k in 0..=120u32 {
            let expected = ln_factorial(2 * k) + 0.5 * PI.ln() - (k as f64) * 4f64.ln() - ln_factorial(k);
            let got = log_gamma(k as f64 + 0.5).unwrap();
            let tol = 1e-13 * expected.abs().max(1.0);
            assert!((got - expected).abs() < tol, "k={k}: {got} vs {expected}");
        }
    }

    #[test]
    fn log_gamma_continuous_across_cutoff() {
        let below = log_gamma(STIRLING_CUTOFF - 1e-9).unwrap();
        let above = log_gamma(STIRLING_CUTOFF).unwrap();
        assert!((below - above).abs() < 1e-8);
        assert!((lanczos_ln_gamma(STIRLING_CUTOFF) - above).abs() < 1e-13);
    }

    #[test]
    fn log_beta_identities() {
        assert!(log_beta(1.0, 1.0).unwrap().abs() < 1e-15);
        assert!((log_beta(1.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-12 * 2f64.ln());
        assert!((log_beta(0.5, 0.5).unwrap() - PI.ln()).abs() < 1e-12 * PI.ln());
    }

    #[test]
    fn log_beta_large_argument_matches_recurrence() {
        // B(a+1, b) = B(a, b) · a / (a + b)
        for &(a, b) in &[(12.5, 0.5), (250.0, 0.5), (4999.5, 0.5), (30.0, 7.0)] {
            let lhs = log_beta(a + 1.0, b).unwrap();
            let rhs = log_beta(a, b).unwrap() + (a / (a + b)).ln();
            assert!((lhs - rhs).abs() < 1e-13, "a={a} b={b}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_beta(0.0, 1.0).is_err());
        assert!(log_beta(1.0, -2.0).is_err());
    }

    #[test]
    fn simpson_polynomial_and_sine() {
        let cubic = adaptive_simpson(|x| x * x * x - x, 0.0, 2.0, 1e-12);
        assert!((cubic - 2.0).abs() < 1e-12);
        let s = adaptive_simpson(f64::sin, 0.0, PI, 1e-12);
        assert!((s - 2.0).abs() < 1e-11);
    }
}
