use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    constructed_nonlinear_a, constructed_nonlinear_b, decoder_projection, identity_projection, load_decoder,
    orthonormal_basis, orthonormal_projection, upsample_operator, upsample_projection, DecoderSpec, Projection,
    ProjectionError, Result,
};
use crate::numerics::{matrix_from_rows, sample_orthonormal_frame, RealMatrix, RealVector, RngSeed};
use crate::victims::GroundTruth;

/// JSON description of a projection family. The boundary image is supplied
/// later, once per attack iteration.
///
/// ```json
/// {"kind": "identity"}
/// {"kind": "orthonormal", "basis": {"random": {"n": 64, "seed": 3}}}
/// {"kind": "upsample", "n_side": 8, "m_side": 32}
/// {"kind": "constructed_b", "basis": {"matrix": [[1.0, 0.0], [0.0, 1.0]]}, "alpha": 0.4, "beta_f": 1.0}
/// {"kind": "constructed_a", "basis": {"upsample": {"n_side": 4, "m_side": 16}}, "k": 0.1, "beta_f": 1.0}
/// {"kind": "decoder", "path": "decoder.json"}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectionSpec {
    Identity {},
    Orthonormal {
        basis: JacobianSource,
    },
    Upsample {
        n_side: usize,
        m_side: usize,
        #[serde(default = "one")]
        channels: usize,
    },
    ConstructedA {
        basis: JacobianSource,
        k: f64,
        beta_f: f64,
        /// Defaults to `‖∇S(x_b)‖`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_s: Option<f64>,
    },
    ConstructedB {
        basis: JacobianSource,
        alpha: f64,
        beta_f: f64,
    },
    Decoder {
        path: PathBuf,
    },
}

/// Where the `m × n` base Jacobian comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum JacobianSource {
    /// Row-major `m × n` matrix, used as given.
    Matrix(Vec<Vec<f64>>),
    /// Uniformly random orthonormal `n`-frame.
    Random { n: usize, seed: u64 },
    /// Orthonormal basis of the bilinear upsampling subspace.
    Upsample {
        n_side: usize,
        m_side: usize,
        #[serde(default = "one")]
        channels: usize,
    },
}

fn one() -> usize {
    1
}

impl JacobianSource {
    pub fn resolve(&self, m: usize) -> Result<RealMatrix> {
        let j = match self {
            JacobianSource::Matrix(rows) => matrix_from_rows(rows)?,
            JacobianSource::Random { n, seed } => sample_orthonormal_frame(m, *n, &mut RngSeed(*seed).stream(0))?,
            JacobianSource::Upsample { n_side, m_side, channels } => {
                orthonormal_basis(&upsample_operator(*n_side, *m_side, *channels)?)?
            }
        };
        if j.nrows() != m {
            return Err(ProjectionError::InvalidProjection(format!("basis has {} rows, inputs have {m}", j.nrows())));
        }
        Ok(j)
    }
}

impl ProjectionSpec {
    pub fn from_json(text: &str) -> Result<ProjectionSpec> {
        serde_json::from_str(text).map_err(|e| ProjectionError::InvalidProjection(format!("projection spec: {e}")))
    }

    /// Whether building needs the victim's true gradient.
    pub fn is_whitebox(&self) -> bool {
        matches!(self, ProjectionSpec::ConstructedA { .. })
    }

    /// Resolve matrices and files once for inputs of dimension `m`.
    pub fn factory(&self, m: usize) -> Result<ProjectionFactory> {
        let resolved = match self {
            ProjectionSpec::Orthonormal { basis }
            | ProjectionSpec::ConstructedA { basis, .. }
            | ProjectionSpec::ConstructedB { basis, .. } => Resolved::Matrix(basis.resolve(m)?),
            ProjectionSpec::Decoder { path } => {
                let d = load_decoder(path)?;
                if d.output_dim() != m {
                    return Err(ProjectionError::InvalidProjection(format!(
                        "decoder emits {} values, inputs have {m}",
                        d.output_dim()
                    )));
                }
                Resolved::Decoder(d)
            }
            ProjectionSpec::Identity {} | ProjectionSpec::Upsample { .. } => Resolved::Nothing,
        };
        Ok(ProjectionFactory { spec: self.clone(), resolved })
    }
}

#[derive(Debug, Clone)]
enum Resolved {
    Nothing,
    Matrix(RealMatrix),
    Decoder(DecoderSpec),
}

/// Builds a projection anchored at each new boundary image.
#[derive(Debug, Clone)]
pub struct ProjectionFactory {
    spec: ProjectionSpec,
    resolved: Resolved,
}

impl ProjectionFactory {
    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    /// Latent dimension `n` of every projection this factory builds for
    /// inputs of dimension `m`.
    pub fn latent_dim(&self, m: usize) -> usize {
        match (&self.spec, &self.resolved) {
            (ProjectionSpec::Upsample { n_side, channels, .. }, _) => n_side * n_side * channels,
            (_, Resolved::Matrix(j)) => j.ncols(),
            (_, Resolved::Decoder(d)) => d.latent_dim(),
            _ => m,
        }
    }

    /// `truth` is only consulted by the white-box construction.
    pub fn build(&self, x_b: &RealVector, truth: Option<&GroundTruth>) -> Result<Box<dyn Projection>> {
        let x_b = x_b.clone();
        Ok(match (&self.spec, &self.resolved) {
            (ProjectionSpec::Identity {}, _) => Box::new(identity_projection(x_b)?),
            (ProjectionSpec::Upsample { n_side, m_side, channels }, _) => {
                Box::new(upsample_projection(*n_side, *m_side, *channels, x_b)?)
            }
            (ProjectionSpec::Orthonormal { .. }, Resolved::Matrix(w)) => Box::new(orthonormal_projection(w.clone(), x_b)?),
            (ProjectionSpec::ConstructedB { alpha, beta_f, .. }, Resolved::Matrix(j)) => {
                Box::new(constructed_nonlinear_b(j.clone(), x_b, *alpha, *beta_f)?)
            }
            (ProjectionSpec::ConstructedA { k, beta_f, lipschitz_s, .. }, Resolved::Matrix(j)) => {
                let truth = truth.ok_or_else(|| {
                    ProjectionError::InvalidParameter("constructed_a needs white-box gradient access".into())
                })?;
                let grad = truth.gradient(&x_b);
                let lipschitz_s = lipschitz_s.unwrap_or_else(|| grad.norm());
                Box::new(constructed_nonlinear_a(j.clone(), x_b, grad, *k, *beta_f, lipschitz_s)?)
            }
            (ProjectionSpec::Decoder { .. }, Resolved::Decoder(d)) => Box::new(decoder_projection(d.clone(), x_b)?),
            _ => unreachable!("factory resolves every kind it accepts"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs_deviation_from_identity;
    use crate::projections::ProjectionKind;
    use crate::victims::{make_linear_victim, GroundTruth};

    fn truth() -> GroundTruth {
        make_linear_victim(RealVector::from_vec(vec![1.0, 2.0, 0.0, 0.0]), RealVector::zeros(4)).unwrap().1
    }

    #[test]
    fn every_kind_builds_and_anchors() {
        let dir = tempfile::tempdir().unwrap();
        let dec = dir.path().join("dec.json");
        std::fs::write(&dec, r#"{"n":2,"m":4,"layers":[{"w":[[1,0],[0,1],[1,1],[0,0]],"b":[0,0,0,1],"act":"tanh"}]}"#)
            .unwrap();
        let specs = [
            r#"{"kind":"identity"}"#.to_string(),
            r#"{"kind":"orthonormal","basis":{"random":{"n":2,"seed":1}}}"#.to_string(),
            r#"{"kind":"upsample","n_side":1,"m_side":2}"#.to_string(),
            r#"{"kind":"constructed_b","basis":{"upsample":{"n_side":1,"m_side":2}},"alpha":0.5,"beta_f":1.0}"#
                .to_string(),
            r#"{"kind":"constructed_a","basis":{"matrix":[[1,0],[0,1],[0,0],[0,0]]},"k":0.1,"beta_f":1.0}"#.to_string(),
            format!(r#"{{"kind":"decoder","path":{:?}}}"#, dec.to_str().unwrap()),
        ];
        let x_b = RealVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        let t = truth();
        for s in &specs {
            let spec = ProjectionSpec::from_json(s).unwrap();
            let factory = spec.factory(4).unwrap();
            let p = factory.build(&x_b, Some(&t)).unwrap();
            assert_eq!(p.apply(&RealVector::zeros(p.latent_dim())), x_b, "{s}");
            assert_eq!(factory.latent_dim(4), p.latent_dim(), "{s}");
        }
    }

    #[test]
    fn upsample_basis_is_orthonormalised() {
        let j = JacobianSource::Upsample { n_side: 2, m_side: 4, channels: 1 }.resolve(16).unwrap();
        assert!(max_abs_deviation_from_identity(&j) < 1e-12);
        assert!(JacobianSource::Upsample { n_side: 2, m_side: 4, channels: 1 }.resolve(15).is_err());
    }

    #[test]
    fn whitebox_needs_truth() {
        let spec = ProjectionSpec::from_json(r#"{"kind":"constructed_a","basis":{"random":{"n":2,"seed":1}},"k":0.1,"beta_f":1.0}"#)
            .unwrap();
        assert!(spec.is_whitebox());
        let f = spec.factory(4).unwrap();
        assert!(f.build(&RealVector::zeros(4), None).is_err());
        let p = f.build(&RealVector::zeros(4), Some(&truth())).unwrap();
        assert_eq!(p.kind(), ProjectionKind::ConstructedA);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(ProjectionSpec::from_json(r#"{"kind":"pca"}"#).is_err());
        assert!(ProjectionSpec::from_json(r#"{"kind":"identity","n":3}"#).is_err());
        let missing = ProjectionSpec::from_json(r#"{"kind":"decoder","path":"/nonexistent/x.json"}"#).unwrap();
        assert!(matches!(missing.factory(4), Err(ProjectionError::Format(_))));
    }
}
