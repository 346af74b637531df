//! TOML run configuration shared by the command-line tools.

use crate::copula::CopulaFamily;
use crate::data::ColumnMap;
use crate::error::{Error, Result};
use crate::pipeline::{AssocModel, FitConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub resolution: usize,
    pub padding: f64,
    /// Load a mesh from this file instead of building a regular one.
    pub path: Option<String>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            resolution: 26,
            padding: 0.2,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// "independence", "gaussian", "clayton", or "gumbel".
    pub family: String,
    pub covariate_association: bool,
    /// Let the spatial range vary with the nonstationarity covariate.
    pub nonstationary: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: "clayton".into(),
            covariate_association: false,
            nonstationary: false,
        }
    }
}

impl ModelConfig {
    pub fn assoc_model(&self) -> Result<AssocModel> {
        if self.family.eq_ignore_ascii_case("independence") {
            return Ok(AssocModel::Independence);
        }
        let family: CopulaFamily = self.family.parse()?;
        Ok(if self.covariate_association {
            AssocModel::Covariate(family)
        } else {
            AssocModel::Constant(family)
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iters: usize,
    pub burn: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    pub calibration_draws: usize,
    pub pseudo_obs_average: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        let f = FitConfig::default();
        McmcConfig {
            iters: f.iters,
            burn: f.burn,
            thin: f.thin,
            chains: f.n_chains,
            seed: 1,
            calibration_draws: f.calibration_draws,
            pseudo_obs_average: f.pseudo_obs_average,
        }
    }
}

impl McmcConfig {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            iters: self.iters,
            burn: self.burn,
            thin: self.thin,
            n_chains: self.chains,
            calibration_draws: self.calibration_draws,
            pseudo_obs_average: self.pseudo_obs_average,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<String>,
    #[serde(flatten)]
    pub columns: ColumnMap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub n_obs: usize,
    pub family: String,
    pub covariate_association: bool,
    pub nonstationary: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            n_obs: 250,
            family: "clayton".into(),
            covariate_association: false,
            nonstationary: false,
        }
    }
}

impl ScenarioSection {
    pub fn scenario(&self) -> Result<crate::sim::ScenarioConfig> {
        let family: CopulaFamily = self.family.parse()?;
        let mut cfg = crate::sim::ScenarioConfig::reference(family, self.covariate_association);
        cfg.n_obs = self.n_obs;
        if self.nonstationary {
            cfg.theta.push(0.5);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub model: ModelConfig,
    pub mcmc: McmcConfig,
    pub data: DataConfig,
    pub scenario: ScenarioSection,
    /// Number of cross-validation folds for `score`.
    pub cv_folds: usize,
    /// Predictive draws used for scoring.
    pub pred_draws: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        if cfg.cv_folds == 0 {
            cfg.cv_folds = 10;
        }
        if cfg.pred_draws == 0 {
            cfg.pred_draws = 200;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh.resolution < 2 {
            return Err(Error::Config("mesh resolution must be at least 2".into()));
        }
        if self.mcmc.iters == 0 || self.mcmc.burn >= self.mcmc.iters || self.mcmc.thin == 0 {
            return Err(Error::Config(format!(
                "bad chain lengths: iters {} burn {} thin {}",
                self.mcmc.iters, self.mcmc.burn, self.mcmc.thin
            )));
        }
        if self.mcmc.chains == 0 {
            return Err(Error::Config("need at least one chain".into()));
        }
        self.model.assoc_model()?;
        self.scenario.scenario()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.mesh.resolution, 26);
        assert_eq!(cfg.mcmc.iters, 15_000);
        assert_eq!(cfg.mcmc.burn, 7_000);
        assert_eq!(cfg.mcmc.thin, 8);
        assert_eq!(cfg.mcmc.chains, 8);
        assert_eq!(cfg.cv_folds, 10);
        let text = cfg.to_toml();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.mesh.resolution, cfg.mesh.resolution);
    }

    #[test]
    fn parses_explicit_settings() {
        let cfg = RunConfig::parse(
            r#"
            [mesh]
            resolution = 10
            padding = 0.15

            [model]
            family = "gumbel"
            covariate_association = true

            [mcmc]
            iters = 500
            burn = 100
            thin = 2
            chains = 2
            seed = 9

            [scenario]
            n_obs = 50
            family = "gaussian"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mesh.resolution, 10);
        assert_eq!(
            cfg.model.assoc_model().unwrap(),
            AssocModel::Covariate(CopulaFamily::Gumbel)
        );
        assert_eq!(cfg.mcmc.seed, 9);
        assert_eq!(cfg.scenario.scenario().unwrap().n_obs, 50);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("[mcmc]\nitters = 5\n").is_err());
        assert!(RunConfig::parse("[mcmc]\niters = 100\nburn = 100\n").is_err());
        assert!(RunConfig::parse("[model]\nfamily = \"cauchy\"\n").is_err());
        assert!(RunConfig::parse("[mesh]\nresolution = 1\n").is_err());
    }

    #[test]
    fn independence_model_parses() {
        let cfg = RunConfig::parse("[model]\nfamily = \"independence\"\n").unwrap();
        assert_eq!(cfg.model.assoc_model().unwrap(), AssocModel::Independence);
    }
}
