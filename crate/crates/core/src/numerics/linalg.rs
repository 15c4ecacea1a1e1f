use super::{NumericsError, RealMatrix, RealVector};

/// Largest and smallest singular values of `j` (rows >= cols), from the
/// eigenvalues of the small Gram matrix `jᵀj`.
pub fn spectral_extremes(j: &RealMatrix) -> Result<(f64, f64), NumericsError> {
    let (rows, cols) = j.shape();
    if rows == 0 || cols == 0 {
        return Err(NumericsError::InvalidDimension("empty matrix".into()));
    }
    if rows < cols {
        return Err(NumericsError::InvalidDimension(format!(
            "spectral_extremes expects rows >= cols, got {rows}x{cols}"
        )));
    }
    let gram = j.tr_mul(j);
    let eig = gram.symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    Ok((max.sqrt(), min.sqrt()))
}

/// Operator 2-norm of an arbitrary matrix.
pub fn spectral_norm(a: &RealMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() >= a.ncols() { a.tr_mul(a) } else { a * a.transpose() };
    gram.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max)
        .sqrt()
}

/// Cosine of the angle between two vectors; `None` when either is zero.
pub fn cosine(a: &RealVector, b: &RealVector) -> Option<f64> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `max |UᵀU − I|` over all entries.
pub fn max_abs_deviation_from_identity(u: &RealMatrix) -> f64 {
    let g = u.tr_mul(u);
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Central-difference Jacobian of `f` at `x` with step `h` per coordinate.
pub fn finite_difference_jacobian<F>(f: F, x: &RealVector, h: f64) -> RealMatrix
where
    F: Fn(&RealVector) -> RealVector,
{
    let n = x.len();
    let mut columns = Vec::with_capacity(n);
    let mut probe = x.clone();
    for k in 0..n {
        let orig = probe[k];
        probe[k] = orig + h;
        let plus = f(&probe);
        probe[k] = orig - h;
        let minus = f(&probe);
        probe[k] = orig;
        columns.push((plus - minus) / (2.0 * h));
    }
    RealMatrix::from_columns(&columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_extremes() {
        let (hi, lo) = spectral_extremes(&RealMatrix::identity(3, 3)).unwrap();
        assert!((hi - 1.0).abs() < 1e-12 && (lo - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedded_diagonal() {
        let mut j = RealMatrix::zeros(4, 2);
        j[(0, 0)] = 3.0;
        j[(1, 1)] = 2.0;
        let (hi, lo) = spectral_extremes(&j).unwrap();
        assert!((hi - 3.0).abs() < 1e-12);
        assert!((lo - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_wide_rejected() {
        assert!(spectral_extremes(&RealMatrix::zeros(0, 0)).is_err());
        assert!(spectral_extremes(&RealMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn cosine_of_zero_is_none() {
        let z = RealVector::zeros(3);
        let a = RealVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(cosine(&z, &a).is_none());
        assert_eq!(cosine(&a, &a), Some(1.0));
    }

    #[test]
    fn fd_jacobian_of_linear_map() {
        let a = RealMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 4.0]);
        let x = RealVector::from_vec(vec![0.3, -0.2, 0.9]);
        let j = finite_difference_jacobian(|v| &a * v, &x, 1e-5);
        assert!((j - &a).abs().max() < 1e-9);
    }
}
