//! Small fully connected decoder loaded from JSON:
//!
//! ```json
//! {"n": 2, "m": 3,
//!  "layers": [{"w": [[...], ...], "b": [...], "act": "tanh"},
//!             {"w": [[...], ...], "b": [...], "act": "id"}]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Projection, ProjectionError, ProjectionKind, Result};
use crate::numerics::{matrix_from_rows, RealMatrix, RealVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderFile {
    pub n: usize,
    pub m: usize,
    pub layers: Vec<DecoderLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderLayer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Id,
}

/// Validated decoder network `D: R^n → R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderSpec {
    layers: Vec<(RealMatrix, RealVector, Activation)>,
}

impl DecoderSpec {
    pub fn from_file(file: &DecoderFile) -> Result<DecoderSpec> {
        if file.layers.is_empty() {
            return Err(ProjectionError::Format("decoder has no layers".into()));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        let mut width = file.n;
        for (i, layer) in file.layers.iter().enumerate() {
            let w = matrix_from_rows(&layer.w).map_err(|e| ProjectionError::Format(format!("layer {i}: {e}")))?;
            if w.ncols() != width || layer.b.len() != w.nrows() {
                return Err(ProjectionError::Format(format!(
                    "layer {i} is {}x{} with {} biases, expected {width} inputs",
                    w.nrows(),
                    w.ncols(),
                    layer.b.len()
                )));
            }
            if layer.b.iter().any(|b| !b.is_finite()) {
                return Err(ProjectionError::Format(format!("layer {i}: non-finite bias")));
            }
            width = w.nrows();
            layers.push((w, RealVector::from_vec(layer.b.clone()), layer.act));
        }
        if width != file.m {
            return Err(ProjectionError::Format(format!("decoder emits {width} values, header says m = {}", file.m)));
        }
        Ok(DecoderSpec { layers })
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].0.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.0.nrows())
    }

    pub fn forward(&self, v: &RealVector) -> RealVector {
        let mut a = v.clone();
        for (w, b, act) in &self.layers {
            a = w * a + b;
            if *act == Activation::Tanh {
                a.apply(|z| *z = z.tanh());
            }
        }
        a
    }

    /// `∂D/∂v` by propagating the running Jacobian through each layer.
    pub fn jacobian(&self, v: &RealVector) -> RealMatrix {
        let mut a = v.clone();
        let mut jac = RealMatrix::identity(v.len(), v.len());
        for (w, b, act) in &self.layers {
            a = w * a + b;
            jac = w * jac;
            if *act == Activation::Tanh {
                a.apply(|z| *z = z.tanh());
                for (mut row, ai) in jac.row_iter_mut().zip(a.iter()) {
                    row *= 1.0 - ai * ai;
                }
            }
        }
        jac
    }
}

pub fn load_decoder(path: &Path) -> Result<DecoderSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ProjectionError::Format(format!("cannot read {}: {e}", path.display())))?;
    let file: DecoderFile = serde_json::from_str(&text).map_err(|e| ProjectionError::Format(e.to_string()))?;
    DecoderSpec::from_file(&file)
}

/// `x_b + D(u) − D(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderProjection {
    decoder: DecoderSpec,
    x_b: RealVector,
    d0: RealVector,
    j0: RealMatrix,
}

pub fn decoder_projection(decoder: DecoderSpec, x_b: RealVector) -> Result<DecoderProjection> {
    if decoder.output_dim() != x_b.len() {
        return Err(ProjectionError::InvalidProjection(format!(
            "decoder output has {} entries, boundary image {}",
            decoder.output_dim(),
            x_b.len()
        )));
    }
    let zero = RealVector::zeros(decoder.latent_dim());
    let d0 = decoder.forward(&zero);
    let j0 = decoder.jacobian(&zero);
    Ok(DecoderProjection { decoder, x_b, d0, j0 })
}

impl Projection for DecoderProjection {
    fn kind(&self) -> ProjectionKind {
        ProjectionKind::Decoder
    }

    fn latent_dim(&self) -> usize {
        self.decoder.latent_dim()
    }

    fn ambient_dim(&self) -> usize {
        self.x_b.len()
    }

    fn boundary_image(&self) -> &RealVector {
        &self.x_b
    }

    fn apply(&self, u: &RealVector) -> RealVector {
        &self.x_b + (self.decoder.forward(u) - &self.d0)
    }

    fn jacobian_at_base(&self) -> Option<RealMatrix> {
        Some(self.j0.clone())
    }

    fn push_forward(&self, u: &RealVector) -> Option<RealVector> {
        Some(&self.j0 * u)
    }

    fn jacobian_at(&self, u: &RealVector) -> RealMatrix {
        self.decoder.jacobian(u)
    }
}
