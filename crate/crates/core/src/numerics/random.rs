use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{NumericsError, RealMatrix, RealVector};

/// Counter-based generator used for every random draw in the crate.
pub type RngStream = ChaCha20Rng;

/// Root of all randomness in an experiment.
///
/// Streams are addressed by index (`stream(i)`), and whole sub-experiments
/// can be given their own seed with `child(i)`, so parallel work never shares
/// a generator and replays are bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent ChaCha stream number `index` under this seed.
    pub fn stream(self, index: u64) -> RngStream {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    /// Derived seed for a nested task (splitmix64 finaliser over seed and index).
    pub fn child(self, index: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RealVector {
    RealVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform draw from the unit sphere in `R^n` (normalised Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<RealVector, NumericsError> {
    if n == 0 {
        return Err(NumericsError::InvalidDimension("unit sphere in R^0".into()));
    }
    loop {
        let g = standard_normal_vector(n, rng);
        let norm = g.norm();
        if norm > 1e-12 {
            return Ok(g / norm);
        }
    }
}

/// Uniformly distributed orthonormal `b`-frame in `R^n`, returned as the
/// columns of an `n × b` matrix.
///
/// Modified Gram–Schmidt with a second re-orthogonalisation pass on a
/// standard Gaussian matrix. A column whose residual norm drops below
/// `1e-12` is redrawn. With `b == 1` this consumes the generator exactly
/// like [`sample_unit_sphere`] and returns the same vector.
pub fn sample_orthonormal_frame<R: Rng + ?Sized>(
    n: usize,
    b: usize,
    rng: &mut R,
) -> Result<RealMatrix, NumericsError> {
    if n == 0 || b == 0 {
        return Err(NumericsError::InvalidDimension(format!("frame of {b} columns in R^{n}")));
    }
    if b > n {
        return Err(NumericsError::InvalidFrame { dim: n, requested: b });
    }
    let mut columns: Vec<RealVector> = Vec::with_capacity(b);
    while columns.len() < b {
        let mut g = standard_normal_vector(n, rng);
        for _pass in 0..2 {
            for q in &columns {
                let proj = q.dot(&g);
                g.axpy(-proj, q, 1.0);
            }
        }
        let norm = g.norm();
        if norm < 1e-12 {
            continue;
        }
        g /= norm;
        columns.push(g);
    }
    Ok(RealMatrix::from_columns(&columns))
}
