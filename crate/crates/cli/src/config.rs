use std::path::{Path, PathBuf};

use serde::Deserialize;

use quadratic_reset::io::{Beta, Entry, ModelFile, ProtocolConfig, ProtocolMode};
use quadratic_reset::{build_open_chain, build_random, build_ring, Partition, QuadraticModel, SolverConfig};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(tag = "builder", rename_all = "lowercase", deny_unknown_fields)]
pub enum Builder {
    Ring {
        n_sites: usize,
        #[serde(default = "unit_hopping")]
        hopping: f64,
    },
    Chain {
        onsite: Vec<f64>,
        #[serde(default = "unit_hopping")]
        hopping: f64,
    },
    /// Random Hermitian coupling drawn from the config seed.
    Random { n_sites: usize },
}

fn unit_hopping() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Builder(Builder),
    File { file: PathBuf },
    Inline { inline: ModelFile },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Sites(Vec<usize>),
    Segment { start: usize, len: usize },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BetaList {
    One(Beta),
    Many(Vec<Beta>),
}

impl BetaList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            BetaList::One(b) => vec![b.0],
            BetaList::Many(bs) => bs.iter().map(|b| b.0).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumTarget {
    #[default]
    Model,
    Map,
}

/// Everything an experiment can be configured with; subcommands read the
/// fields they need and command-line flags override the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelSpec>,
    pub system: Option<SystemSpec>,
    /// `RI`, `EC`, `custom`, or `both` (ring sweep only).
    pub mode: Option<String>,
    pub tau: Option<f64>,
    pub beta: Option<BetaList>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub custom_pairs: Option<Vec<Entry>>,
    /// Environment occupations, in the order of the environment sites.
    pub env_occupations: Option<Vec<f64>>,
    /// Environment reset block, indexed by position in the environment.
    pub reset_block: Option<Vec<Entry>>,
    pub tol_unit: Option<f64>,
    pub target: Option<SpectrumTarget>,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("cannot parse config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn model(&self) -> Result<Option<QuadraticModel>, CliError> {
        let Some(spec) = &self.model else { return Ok(None) };
        let model = match spec {
            ModelSpec::Builder(Builder::Ring { n_sites, hopping }) => build_ring(*n_sites, *hopping)?,
            ModelSpec::Builder(Builder::Chain { onsite, hopping }) => build_open_chain(onsite, *hopping)?,
            ModelSpec::Builder(Builder::Random { n_sites }) => build_random(*n_sites, self.seed.unwrap_or(0))?,
            ModelSpec::File { file } => {
                let path = self.resolve(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Invalid(format!("cannot read model {}: {e}", path.display())))?;
                let mf: ModelFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Invalid(format!("cannot parse model {}: {e}", path.display())))?;
                mf.to_model()?
            }
            ModelSpec::Inline { inline } => inline.to_model()?,
        };
        Ok(Some(model))
    }

    pub fn require_model(&self) -> Result<QuadraticModel, CliError> {
        self.model()?.ok_or_else(|| CliError::Invalid("config has no model".into()))
    }

    pub fn partition(&self, n_sites: usize) -> Result<Option<Partition>, CliError> {
        Ok(match &self.system {
            None => None,
            Some(SystemSpec::Sites(sites)) => Some(Partition::new(n_sites, sites)?),
            Some(SystemSpec::Segment { start, len }) => Some(Partition::segment(n_sites, *start, *len)?),
        })
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let mut cfg = SolverConfig::default();
        if let Some(t) = self.tol_unit {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Invalid(format!("tol_unit must be positive, got {t}")));
            }
            cfg.tol_unit = t;
        }
        Ok(cfg)
    }

    /// Protocol for a single solve; `mode`, `tau` and `betas` override the file.
    pub fn protocol(
        &self,
        mode: Option<&str>,
        tau: Option<f64>,
        betas: Option<Vec<f64>>,
    ) -> Result<ProtocolConfig, CliError> {
        let mode = match mode.or(self.mode.as_deref()) {
            Some("RI") | Some("ri") => ProtocolMode::RepeatedInteractions,
            Some("EC") | Some("ec") => ProtocolMode::EvolvingCorrelations,
            Some("custom") => ProtocolMode::Custom,
            Some(other) => return Err(CliError::Invalid(format!("unknown mode {other:?}"))),
            None => return Err(CliError::Invalid("no reset mode given".into())),
        };
        let tau = tau.or(self.tau).ok_or_else(|| CliError::Invalid("no reset period (tau) given".into()))?;
        let betas = betas.or_else(|| self.beta.as_ref().map(BetaList::values));
        let beta = match betas.as_deref() {
            None => None,
            Some([b]) => Some(Beta(*b)),
            Some(_) => return Err(CliError::Invalid("a single solve takes a single beta".into())),
        };
        Ok(ProtocolConfig { mode, tau, beta, custom_pairs: self.custom_pairs.clone() })
    }
}

/// `0.01,0.1,inf`
pub fn parse_beta_list(s: &str) -> Result<BetaList, CliError> {
    let betas =
        s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.parse::<Beta>()).collect::<Result<Vec<_>, _>>()?;
    if betas.is_empty() {
        return Err(CliError::Invalid("empty beta list".into()));
    }
    Ok(BetaList::Many(betas))
}
