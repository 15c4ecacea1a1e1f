use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{connect_remote_victim, random_mlp, DenseLayer, DifferenceOracle, GroundTruth, LocalOracle, Victim, VictimError};
use crate::numerics::{matrix_from_rows, RealVector, RngSeed};

/// JSON description of a victim. Matrices are row-major arrays of rows.
///
/// ```json
/// {"kind": "linear", "w": [1.0, 0.0], "b": [0.0, 0.0]}
/// {"kind": "quadratic", "w": [1.0, 0.0], "h": [[2.0, 0.0], [0.0, 0.0]]}
/// {"kind": "mlp", "layers": [{"w": [[...], ...], "b": [...]}, ...], "y_ben": 0, "y_mal": 1}
/// {"kind": "mlp", "random": {"sizes": [32, 16, 16, 3], "seed": 7}, "y_ben": 0, "y_mal": 2}
/// {"kind": "remote", "address": "127.0.0.1:7070", "dim": 2, "timeout_ms": 5000}
/// ```
///
/// `b` defaults to the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VictimSpec {
    Linear {
        w: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
    },
    Quadratic {
        w: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        h: Vec<Vec<f64>>,
    },
    Mlp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layers: Option<Vec<LayerSpec>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random: Option<RandomMlpSpec>,
        #[serde(default = "default_activation")]
        activation: String,
        y_ben: usize,
        y_mal: usize,
    },
    Remote {
        address: String,
        dim: usize,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Seeded random network, see [`random_mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMlpSpec {
    pub sizes: Vec<usize>,
    pub seed: u64,
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_first_layer: Option<SmoothFirstLayer>,
}

/// First-layer rows drawn from the range of a bilinear upsampler from an
/// `n_side × n_side` grid to `m_side × m_side`, per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothFirstLayer {
    pub n_side: usize,
    pub m_side: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    /// Weight of the isotropic component relative to a plain random row.
    #[serde(default)]
    pub rough_fraction: f64,
}

fn default_activation() -> String {
    "tanh".into()
}

fn default_timeout_ms() -> u64 {
    5000
}

fn default_gain() -> f64 {
    1.5
}

fn default_channels() -> usize {
    1
}

impl VictimSpec {
    pub fn from_json(text: &str) -> Result<VictimSpec, VictimError> {
        serde_json::from_str(text).map_err(|e| VictimError::Invalid(format!("victim spec: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<VictimSpec, VictimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VictimError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        VictimSpec::from_json(&text)
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, VictimSpec::Remote { .. })
    }

    /// Materialise a local victim; remote specs are rejected.
    pub fn build(&self) -> Result<Victim, VictimError> {
        match self {
            VictimSpec::Linear { w, b } => {
                let w = RealVector::from_vec(w.clone());
                let b = anchor(b, w.len());
                Victim::linear(w, b)
            }
            VictimSpec::Quadratic { w, b, h } => {
                let w = RealVector::from_vec(w.clone());
                let b = anchor(b, w.len());
                let h = matrix_from_rows(h).map_err(|e| VictimError::Invalid(format!("H: {e}")))?;
                Victim::quadratic(w, b, h)
            }
            VictimSpec::Mlp { layers, random, activation, y_ben, y_mal } => {
                if activation != "tanh" {
                    return Err(VictimError::Invalid(format!("unsupported activation {activation:?}")));
                }
                let layers = match (layers, random) {
                    (Some(layers), None) => layers
                        .iter()
                        .enumerate()
                        .map(|(i, l)| {
                            Ok(DenseLayer {
                                w: matrix_from_rows(&l.w)
                                    .map_err(|e| VictimError::Invalid(format!("layer {i}: {e}")))?,
                                b: RealVector::from_vec(l.b.clone()),
                            })
                        })
                        .collect::<Result<Vec<_>, VictimError>>()?,
                    (None, Some(r)) => {
                        let mut rng = RngSeed(r.seed).stream(0);
                        random_mlp(&r.sizes, r.gain, r.smooth_first_layer.as_ref(), &mut rng)?
                    }
                    _ => {
                        return Err(VictimError::Invalid(
                            "mlp spec needs exactly one of \"layers\" or \"random\"".into(),
                        ))
                    }
                };
                Victim::mlp(layers, *y_ben, *y_mal)
            }
            VictimSpec::Remote { .. } => Err(VictimError::Invalid("remote victim has no local model".into())),
        }
    }

    /// Counted oracle for any kind, plus ground truth when the model is local.
    pub fn open(&self) -> Result<(Box<dyn DifferenceOracle>, Option<GroundTruth>), VictimError> {
        match self {
            VictimSpec::Remote { address, dim, timeout_ms } => {
                Ok((Box::new(connect_remote_victim(address, *dim, *timeout_ms)?), None))
            }
            _ => {
                let victim = Arc::new(self.build()?);
                Ok((Box::new(LocalOracle::new(victim.clone())), Some(GroundTruth::new(victim))))
            }
        }
    }
}

fn anchor(b: &Option<Vec<f64>>, m: usize) -> RealVector {
    match b {
        Some(b) => RealVector::from_vec(b.clone()),
        None => RealVector::zeros(m),
    }
}
