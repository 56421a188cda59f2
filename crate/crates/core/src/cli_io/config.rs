use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::{TimeGrid, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::ewma::{EwmaConfig, VariabilityMode};
use crate::frechet::FrechetConfig;

/// Settings shared by the commands, read from TOML or JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Working grid size; Phase I defaults to 101 points, Phase II to the
    /// grid of the databank.
    pub grid_points: Option<usize>,
    pub frechet: FrechetConfig,
    pub ewma: EwmaConfig,
    /// Train only on days that pass the threshold rule.
    pub who_ic_only: bool,
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub limit_level: Option<f64>,
    pub fix_kappa: bool,
    pub seed: Option<u64>,
    pub variability_mode: Option<VariabilityMode>,
    pub raw_deviance: bool,
    pub enrich: bool,
    pub grid_points: Option<usize>,
    pub who_ic_only: bool,
}

impl RunConfig {
    /// Reads a configuration file; the format follows the extension
    /// (`.json`, anything else is TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(l) = o.lambda {
            self.ewma.lambda = l;
        }
        if let Some(l) = o.limit_level {
            self.ewma.limit_level = l;
        }
        if o.fix_kappa {
            self.frechet.registration.fix_kappa = true;
            self.ewma.registration.fix_kappa = true;
        }
        if let Some(s) = o.seed {
            self.ewma.seed = s;
            self.frechet.registration.search.seed = s;
            self.ewma.registration.search.seed = s;
        }
        if let Some(m) = o.variability_mode {
            self.ewma.variability_mode = m;
        }
        self.ewma.raw_deviance |= o.raw_deviance;
        self.ewma.enrich |= o.enrich;
        if o.grid_points.is_some() {
            self.grid_points = o.grid_points;
        }
        self.who_ic_only |= o.who_ic_only;
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().map_err(|e| Error::Config(format!("grid_points: {e}")))?;
        self.ewma.validate()?;
        self.frechet.registration.validate()?;
        if !(self.frechet.tolerance > 0.0) {
            return Err(Error::Config("frechet.tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid_points.unwrap_or(DEFAULT_GRID_POINTS))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(
            &t,
            "grid_points = 51\n[ewma]\nlambda = 0.2\nvariability_mode = \"frechet_function\"\n[frechet.registration]\nfix_kappa = true\n",
        )
        .unwrap();
        let j = dir.path().join("c.json");
        std::fs::write(
            &j,
            r#"{"grid_points": 51, "ewma": {"lambda": 0.2, "variability_mode": "frechet_function"},
                "frechet": {"registration": {"fix_kappa": true}}}"#,
        )
        .unwrap();
        let a = RunConfig::load(&t).unwrap();
        assert_eq!(a, RunConfig::load(&j).unwrap());
        assert_eq!(a.ewma.lambda, 0.2);
        assert_eq!(a.ewma.limit_level, 0.95);
        assert!(a.frechet.registration.fix_kappa);
    }

    #[test]
    fn invalid_files_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "[ewma]\nlambda = 1.5\n").unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
        std::fs::write(&p, "nonsense = 3\n").unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
        assert!(matches!(RunConfig::load(&dir.path().join("missing.toml")), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            lambda: Some(0.05),
            fix_kappa: true,
            seed: Some(7),
            grid_points: Some(61),
            ..Overrides::default()
        });
        assert_eq!(c.ewma.lambda, 0.05);
        assert!(c.ewma.registration.fix_kappa && c.frechet.registration.fix_kappa);
        assert_eq!(c.ewma.seed, 7);
        assert_eq!(c.grid_points, Some(61));
    }
}
