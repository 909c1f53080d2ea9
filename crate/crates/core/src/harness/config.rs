use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::DEFAULT_ENUMERATION_CAP;
use crate::hypothesis::ScenarioLabel;
use crate::inference::{Flavor, UpsilonPolicy};
use crate::model::CovarianceKind;

/// How a total dimension `D` is divided between the two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DimSplit {
    /// `d1` fixed, `d2 = D − d1`.
    Semi { d1: usize },
    /// `d1 = round(fraction·D)`.
    Proportional { fraction: f64 },
}

impl DimSplit {
    pub fn dims(&self, total: usize) -> Result<[usize; 2]> {
        let d1 = match *self {
            DimSplit::Semi { d1 } => d1,
            DimSplit::Proportional { fraction } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::Config(format!("split fraction {fraction} outside (0, 1)")));
                }
                (fraction * total as f64).round() as usize
            }
        };
        if d1 == 0 || d1 >= total {
            return Err(Error::Config(format!("D = {total} cannot be split with d1 = {d1}")));
        }
        Ok([d1, total - d1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScenarioConfig {
    A,
    B,
    /// A standard hypothesis with user-chosen covariance families.
    #[serde(rename = "custom")]
    Custom {
        hypothesis: ScenarioLabel,
        covariances: Vec<CovarianceKind>,
    },
}

impl ScenarioConfig {
    pub fn name(&self) -> String {
        match self {
            ScenarioConfig::A => "A".into(),
            ScenarioConfig::B => "B".into(),
            ScenarioConfig::Custom { hypothesis, .. } => format!("custom-{hypothesis}"),
        }
    }

    pub fn hypothesis(&self) -> ScenarioLabel {
        match self {
            ScenarioConfig::A => ScenarioLabel::A,
            ScenarioConfig::B => ScenarioLabel::B,
            ScenarioConfig::Custom { hypothesis, .. } => *hypothesis,
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_flavors() -> Vec<Flavor> {
    vec![Flavor::BStar]
}

fn default_b_permutations() -> usize {
    10
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub d_grid: Vec<usize>,
    pub split: DimSplit,
    /// `(n1, n2)` pairs.
    pub sizes: Vec<[usize; 2]>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub replications: usize,
    #[serde(default = "default_flavors")]
    pub flavors: Vec<Flavor>,
    #[serde(default)]
    pub upsilon: UpsilonPolicy,
    #[serde(default = "default_b_permutations")]
    pub b_permutations: usize,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Added to every component of the first group's mean.
    #[serde(default)]
    pub mean_shift: Option<f64>,
}

/// One `(D, n1, n2)` cell of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub index: usize,
    pub total_dim: usize,
    pub dims: [usize; 2],
    pub sizes: [usize; 2],
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml_str(&text)?;
        if let (Some(out), Some(dir)) = (&config.output, path.parent()) {
            if out.is_relative() {
                config.output = Some(dir.join(out));
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_grid.is_empty() || self.sizes.is_empty() {
            return Err(Error::Config("d_grid and sizes must be non-empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.flavors.is_empty() {
            return Err(Error::Config("at least one flavor is required".into()));
        }
        if self.upsilon.multipliers.contains(&0) || self.upsilon.subsamples == 0 || self.b_permutations == 0 {
            return Err(Error::Config("subsample and permutation counts must be positive".into()));
        }
        if let ScenarioConfig::Custom { covariances, .. } = &self.scenario {
            if covariances.len() != 2 {
                return Err(Error::Config("custom scenarios need one covariance per group (2)".into()));
            }
        }
        for s in &self.sizes {
            if s.iter().any(|&n| n < 2) {
                return Err(Error::Config(format!("sample sizes {s:?} must be at least 2")));
            }
        }
        for &d in &self.d_grid {
            self.split.dims(d)?;
        }
        Ok(())
    }

    /// Grid cells, sizes outermost.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let mut out = Vec::new();
        for &sizes in &self.sizes {
            for &total_dim in &self.d_grid {
                out.push(GridPoint {
                    index: out.len(),
                    total_dim,
                    dims: self.split.dims(total_dim)?,
                    sizes,
                });
            }
        }
        Ok(out)
    }

    /// Scenario B, semi split with `d1 = 5`, `D ∈ {100, 300}`, `n = (20, 30)`,
    /// B★ with the default subsample policy, 5000 replications.
    pub fn desk_reproduction(seed: u64) -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::B,
            d_grid: vec![100, 300],
            split: DimSplit::Semi { d1: 5 },
            sizes: vec![[20, 30]],
            alpha: 0.05,
            replications: 5000,
            flavors: vec![Flavor::BStar],
            upsilon: UpsilonPolicy::default(),
            b_permutations: default_b_permutations(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            seed,
            output: None,
            mean_shift: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits() {
        assert_eq!(DimSplit::Semi { d1: 5 }.dims(10).unwrap(), [5, 5]);
        assert_eq!(DimSplit::Proportional { fraction: 0.2 }.dims(100).unwrap(), [20, 80]);
        assert!(DimSplit::Semi { d1: 5 }.dims(5).is_err());
        assert!(DimSplit::Proportional { fraction: 1.2 }.dims(100).is_err());
    }

    #[test]
    fn parses_toml_with_defaults() {
        let text = r#"
            scenario = "B"
            d_grid = [10, 20]
            split = { kind = "semi", d1 = 5 }
            sizes = [[10, 15], [50, 75]]
            replications = 100
            seed = 7
            flavors = ["Bstar", "oracle"]
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.upsilon, UpsilonPolicy::default());
        assert_eq!(c.flavors, vec![Flavor::BStar, Flavor::Oracle]);
        let grid = c.grid().unwrap();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[3].dims, [5, 15]);
        assert_eq!(grid[3].sizes, [50, 75]);
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn parses_custom_scenario() {
        let text = r#"
            d_grid = [12]
            split = { kind = "proportional", fraction = 0.25 }
            sizes = [[8, 8]]
            replications = 3
            seed = 1
            [scenario.custom]
            hypothesis = "A"
            covariances = [{ kind = "ar", rho = 0.3 }, { kind = "compound_symmetry", base = 1.0, jfactor = 2.0 }]
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.scenario.name(), "custom-A");
    }

    #[test]
    fn rejects_bad_configs() {
        let base = ExperimentConfig::desk_reproduction(1);
        let mut c = base.clone();
        c.d_grid = vec![5];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.replications = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml_str("scenario = \"B\"\nbogus = 1").is_err());
        assert!(base.validate().is_ok());
    }
}
