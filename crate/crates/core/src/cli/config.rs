use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{model_zoo, MrwSpec, RawModel};
use crate::sim::flower::PetalRule;
use crate::theory::{McBudget, PipelineOptions, Tolerances};
use crate::wiener_hopf::TruncationPolicy;

/// Where the model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Zoo {
        name: String,
        #[serde(default = "empty_object")]
        params: serde_json::Value,
    },
    /// JSON model file, relative to the config file.
    Path(PathBuf),
    Inline(RawModel),
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub initial_state: usize,
    pub n_steps: usize,
    pub n_ladder: usize,
    pub burn_in: usize,
    pub replicates: usize,
    pub max_steps: u64,
    pub n_back: usize,
    pub sigma0_replicates: usize,
    /// State whose embedded renewal sequence is reported; defaults to the
    /// most frequent ladder state of the path.
    pub renewal_state: Option<usize>,
    pub coupling: Option<CouplingConfig>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            initial_state: 0,
            n_steps: 10_000,
            n_ladder: 1000,
            burn_in: 100,
            replicates: 100,
            max_steps: 10_000_000,
            n_back: 1000,
            sigma0_replicates: 10_000,
            renewal_state: None,
            coupling: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub i: usize,
    pub j: usize,
    pub horizon: u64,
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub rule: PetalRule,
    pub path_steps: usize,
    pub n: u64,
    pub b: i64,
    pub replicates: usize,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            rule: PetalRule::Geometric,
            path_steps: 100_000,
            n: 10_000,
            b: 100,
            replicates: 20_000,
        }
    }
}

/// Contents of `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required by every command except `counterexample`.
    #[serde(default)]
    pub model: Option<ModelSource>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default)]
    pub allow_nonpositive_drift: bool,
    /// Test mode: corrupt `G^>` by this mass to exercise failure paths.
    #[serde(default)]
    pub inject_perturbation: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub mc: McBudget,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub counterexample: CounterexampleConfig,
    /// Directory for resolving relative model paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_m_max() -> usize {
    PipelineOptions::default().m_max
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let t = &self.truncation;
        if !(t.tol > 0.0 && t.tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation.tol must be in (0, 1), got {}",
                t.tol
            )));
        }
        if t.max_depth == 0 || t.max_depth > 1 << 20 {
            return Err(Error::InvalidArgument(
                "truncation.max_depth must be in [1, 2^20]".into(),
            ));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be positive".into()));
        }
        if self.tolerances.mc_sigmas <= 0.0 {
            return Err(Error::InvalidArgument("tolerances.mc_sigmas must be positive".into()));
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument("this command is stochastic and needs a seed".into()))
    }

    pub fn load_model(&self) -> Result<(String, MrwSpec)> {
        match &self.model {
            None => Err(Error::InvalidArgument("config has no model".into())),
            Some(ModelSource::Zoo { name, params }) => Ok((name.clone(), model_zoo(name, params)?)),
            Some(ModelSource::Path(p)) => {
                let full = self.base_dir.join(p);
                let text = std::fs::read_to_string(&full).map_err(|e| Error::Io(format!("{}: {e}", full.display())))?;
                Ok((p.display().to_string(), MrwSpec::from_json(&text)?))
            }
            Some(ModelSource::Inline(raw)) => Ok(("inline".into(), crate::model::validate_spec(raw.clone())?)),
        }
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            truncation: self.truncation,
            m_max: self.m_max,
            allow_nonpositive_drift: self.allow_nonpositive_drift,
            perturbation: self.inject_perturbation,
            tolerances: self.tolerances,
        }
    }
}
