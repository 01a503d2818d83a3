//! Run configuration: an optional TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use microtwin::deformation::DeformationSpec;
use microtwin::potential::PotentialSpec;
use serde::Deserialize;

use crate::output::Format;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tol: Option<f64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub sigma: Option<f64>,
    pub potential: Option<PotentialSpec>,
    pub deformation: Option<DeformationSpec>,
    pub params: Option<SequenceParams>,
    #[serde(default)]
    pub taylor: TaylorSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub invert: InvertSection,
}

/// `(a₁, a₂)` of the ε-sequence `εₙ = n/(n² + a₁n + a₂)`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceParams {
    pub a1: f64,
    pub a2: f64,
}

impl Default for SequenceParams {
    fn default() -> Self {
        Self { a1: 0.5, a2: 0.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorSection {
    /// Sequence indices `n` to evaluate, in increasing order.
    pub n: Option<Vec<usize>>,
    /// Interior twin profile `y(1/m), …, y((m−1)/m)`.
    pub twin_profile: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub starts: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertSection {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file_parses() {
        let cfg: RunConfig = toml::from_str(
            r#"
            tol = 1e-10
            format = "json"
            m = [2, 3]
            sigma = 1.5
            [potential]
            kind = "lennard-jones"
            sigma = 1.5
            [deformation]
            breakpoints = [-1.0, 0.0, 1.0]
            pieces = [[0.0, 1.0], [0.0, 1.2]]
            [params]
            a1 = 0.5
            a2 = 0.0
            [taylor]
            n = [10, 20, 40, 80]
            twin_profile = [0.3, 0.7]
            [profile]
            a = 1.1
            starts = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.format, Some(Format::Json));
        assert_eq!(cfg.m, Some(vec![2, 3]));
        assert_eq!(cfg.profile.starts, Some(3));
        assert!(cfg.deformation.unwrap().build().is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("tolerance = 1e-3").is_err());
        assert!(toml::from_str::<RunConfig>("[params]\na1 = 0.5\na2 = 0.0\na3 = 1.0").is_err());
        assert!(toml::from_str::<RunConfig>("[taylor]\nmode = \"smooth\"").is_err());
    }
}
