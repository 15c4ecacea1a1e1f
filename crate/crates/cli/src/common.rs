use std::path::Path;

use attacklab::estimator::{LiftMode, SamplingMode};
use attacklab::projections::ProjectionSpec;
use clap::ValueEnum;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingArg {
    /// Random orthonormal frame (needs B ≤ n).
    Frame,
    /// Independent normalised Gaussian directions.
    Gaussian,
}

impl From<SamplingArg> for SamplingMode {
    fn from(s: SamplingArg) -> SamplingMode {
        match s {
            SamplingArg::Frame => SamplingMode::OrthonormalFrame,
            SamplingArg::Gaussian => SamplingMode::NormalizedGaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftArg {
    Precise,
    Approximate,
}

impl From<LiftArg> for LiftMode {
    fn from(l: LiftArg) -> LiftMode {
        match l {
            LiftArg::Precise => LiftMode::Precise,
            LiftArg::Approximate => LiftMode::Approximate,
        }
    }
}

/// Projection spec from a file, or the identity when no file is given.
/// Relative decoder paths are taken relative to the spec file.
pub fn load_projection(path: Option<&Path>) -> Result<ProjectionSpec, CliError> {
    let Some(path) = path else {
        return Ok(ProjectionSpec::Identity {});
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut spec = ProjectionSpec::from_json(&text)?;
    if let ProjectionSpec::Decoder { path: decoder } = &mut spec {
        if decoder.is_relative() {
            if let Some(dir) = path.parent() {
                *decoder = dir.join(&*decoder);
            }
        }
    }
    Ok(spec)
}

pub fn parse_list(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| CliError::config(format!("bad list entry {s:?}: {e}"))))
        .collect()
}
