//! Strict JSON configs for the subcommands. Unknown keys are rejected and
//! every error carries the path of the offending field.

use std::path::{Path, PathBuf};

use dtnlab::forward::KernelFormat;
use dtnlab::grid::FourierParams;
use dtnlab::lab::parse_json;
use dtnlab::{DomainParams, PotentialSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_order() -> usize {
    3
}

fn default_alpha() -> f64 {
    dtnlab::born::DEFAULT_ALPHA
}

fn zero() -> PotentialSpec {
    PotentialSpec::Zero {}
}

fn csv_format() -> KernelFormat {
    KernelFormat::Csv
}

fn invalid(path: &str, reason: impl Into<String>) -> CliError {
    CliError::Lab(dtnlab::LabError::Config {
        path: path.into(),
        reason: reason.into(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPotential {
    pub name: String,
    pub spec: PotentialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardConfig {
    pub domain: DomainParams,
    #[serde(default = "default_order")]
    pub order: usize,
    pub potentials: Vec<NamedPotential>,
    #[serde(default = "csv_format")]
    pub format: KernelFormat,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ForwardConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.potentials.is_empty() {
            return Err(invalid("potentials", "at least one potential is required"));
        }
        for (i, p) in self.potentials.iter().enumerate() {
            let ok = !p.name.is_empty()
                && p.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return Err(invalid(
                    &format!("potentials[{i}].name"),
                    "names must be non-empty and use [A-Za-z0-9_-] only",
                ));
            }
            if self.potentials[..i].iter().any(|q| q.name == p.name) {
                return Err(invalid(&format!("potentials[{i}].name"), "duplicate name"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub p: Vec<f64>,
    /// `|Im k|`; defaults to the Born value `|p|/2`.
    #[serde(default)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub domain: DomainParams,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "zero")]
    pub background: PotentialSpec,
    pub potential: PotentialSpec,
    pub pairs: Vec<PairSpec>,
    /// Fail when any route gap exceeds this relative tolerance.
    #[serde(default)]
    pub max_gap: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ScatterConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.pairs.is_empty() {
            return Err(invalid("pairs", "at least one pair is required"));
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            if pair.p.len() != self.domain.dimension {
                return Err(invalid(
                    &format!("pairs[{i}].p"),
                    format!("expected {} components", self.domain.dimension),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub domain: DomainParams,
    #[serde(default = "default_order")]
    pub order: usize,
    pub fourier: FourierParams,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Fixed cutoff; when absent the cutoff rule picks `ρ` from `δ`.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Reference potential whose map is subtracted (zero by default).
    #[serde(default = "zero")]
    pub background: PotentialSpec,
    /// Synthetic data: the map is computed from this potential and the
    /// reconstruction is scored against it.
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// Measured data: a map written by `dtnlab forward`, relative to the config.
    #[serde(default)]
    pub dtn: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ReconstructConfig {
    fn validate(&self) -> Result<(), CliError> {
        match (&self.potential, &self.dtn) {
            (Some(_), Some(_)) => Err(invalid("dtn", "give either `potential` or `dtn`, not both")),
            (None, None) => Err(invalid("potential", "one of `potential` or `dtn` is required")),
            _ => Ok(()),
        }?;
        if let Some(rho) = self.rho {
            if !(rho >= 0.0 && rho <= self.fourier.p_max) {
                return Err(invalid("rho", format!("must lie in [0, p_max = {}]", self.fourier.p_max)));
            }
        }
        Ok(())
    }

    /// Resolve `dtn` against the directory holding the config file.
    fn resolve(&mut self, base: &Path) -> Result<(), CliError> {
        if let Some(p) = &self.dtn {
            let full = if p.is_absolute() { p.clone() } else { base.join(p) };
            if !full.is_file() {
                return Err(invalid("dtn", format!("{} does not exist", full.display())));
            }
            self.dtn = Some(full);
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Read(path.to_path_buf(), e))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn load_forward(path: &Path) -> Result<ForwardConfig, CliError> {
    let cfg: ForwardConfig = parse_json(&read(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scatter(path: &Path) -> Result<ScatterConfig, CliError> {
    let cfg: ScatterConfig = parse_json(&read(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_reconstruct(path: &Path) -> Result<ReconstructConfig, CliError> {
    let mut cfg: ReconstructConfig = parse_json(&read(path)?)?;
    cfg.validate()?;
    cfg.resolve(&base_dir(path))?;
    Ok(cfg)
}

pub fn load_sweep(path: &Path) -> Result<dtnlab::lab::ExperimentConfig, CliError> {
    Ok(dtnlab::lab::ExperimentConfig::from_json(&read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_path(err: CliError) -> String {
        match err {
            CliError::Lab(dtnlab::LabError::Config { path, .. }) => path,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_nested_key_is_located() {
        let text = r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},
            "potentials":[{"name":"a","spec":{"kind":"zero","extra":1}}]}"#;
        let err = parse_json::<ForwardConfig>(text).map_err(CliError::from).unwrap_err();
        assert_eq!(config_path(err), "potentials[0].spec.extra");
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},
            "potentials":[{"name":"a","spec":{"kind":"zero"}},{"name":"a","spec":{"kind":"zero"}}]}"#;
        let cfg: ForwardConfig = parse_json(text).unwrap();
        assert_eq!(config_path(cfg.validate().unwrap_err()), "potentials[1].name");
    }

    #[test]
    fn reconstruct_needs_exactly_one_source() {
        let text = r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},
            "fourier":{"p_max":8.0,"n_p":17}}"#;
        let cfg: ReconstructConfig = parse_json(text).unwrap();
        assert_eq!(config_path(cfg.validate().unwrap_err()), "potential");
    }

    #[test]
    fn pair_dimension_checked() {
        let text = r#"{"domain":{"dimension":2,"resolution":16,"side":1.0},
            "potential":{"kind":"zero"},"pairs":[{"p":[1.0,0.0,0.0]}]}"#;
        let cfg: ScatterConfig = parse_json(text).unwrap();
        assert_eq!(config_path(cfg.validate().unwrap_err()), "pairs[0].p");
    }
}
