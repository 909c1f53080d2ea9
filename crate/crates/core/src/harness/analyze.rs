use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{require_valid, scenario_a_matrix, scenario_b_matrix, BlockMatrix, ScenarioLabel, ValidationReport};
use crate::inference::{run_test, EstimatorConfig, Flavor, TestReport};
use crate::model::StudyDesign;

use super::ingest::{ingest_data, read_matrix_csv, IngestOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HypothesisSource {
    Scenario(ScenarioLabel),
    File(PathBuf),
}

impl FromStr for HypothesisSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(HypothesisSource::Scenario(ScenarioLabel::A)),
            "B" | "b" => Ok(HypothesisSource::Scenario(ScenarioLabel::B)),
            "" => Err(Error::Config("empty hypothesis source".into())),
            path => Ok(HypothesisSource::File(PathBuf::from(path))),
        }
    }
}

impl std::fmt::Display for HypothesisSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HypothesisSource::Scenario(l) => write!(f, "scenario {l}"),
            HypothesisSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Reads a `D × D` matrix from CSV and checks it is a projection.
pub fn load_hypothesis_file(path: &Path, design: &StudyDesign) -> Result<(BlockMatrix, ValidationReport)> {
    let m = read_matrix_csv(path, false)?;
    let t = BlockMatrix::new(design.clone(), m)?;
    let report = require_valid(&t)?;
    Ok((t, report))
}

pub fn load_hypothesis(source: &HypothesisSource, design: &StudyDesign) -> Result<(BlockMatrix, ValidationReport)> {
    match source {
        HypothesisSource::Scenario(label) => {
            let t = match label {
                ScenarioLabel::A => scenario_a_matrix(design)?,
                ScenarioLabel::B => scenario_b_matrix(design)?,
            };
            let report = require_valid(&t)?;
            Ok((t, report))
        }
        HypothesisSource::File(path) => load_hypothesis_file(path, design),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub data: PathBuf,
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub hypothesis: String,
    pub validation: ValidationReport,
    pub alpha: f64,
    pub flavor: Flavor,
    pub seed: u64,
    pub report: TestReport,
}

impl AnalysisRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render(&self) -> String {
        let r = &self.report;
        let mut s = String::new();
        let _ = writeln!(s, "data        {}", self.data.display());
        let _ = writeln!(s, "design      d = {:?}, n = {:?}", self.dims, self.sizes);
        let _ = writeln!(s, "hypothesis  {} (rank {})", self.hypothesis, self.validation.rank);
        let _ = writeln!(s, "flavor      {} (seed {})", self.flavor, self.seed);
        let _ = writeln!(s, "Q_N         {:.6}", r.q);
        let t3 = r.traces.t3.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "traces      t1 = {:.6}, t2 = {:.6}, t3 = {t3}", r.traces.t1, r.traces.t2);
        match r.statistic {
            Some(w) => {
                let _ = writeln!(s, "W_N         {w:.6}");
            }
            None => {
                let _ = writeln!(s, "W_N         undefined");
            }
        }
        if let (Some(f), Some(regime)) = (r.fhat, r.regime) {
            let _ = writeln!(s, "f estimate  {:.4} ({regime:?})", f.value);
        }
        for d in &r.decisions {
            let verdict = if d.reject { "reject" } else { "retain" };
            let _ = writeln!(s, "rule {:<6} threshold {:>9.5}  {verdict} at alpha = {}", d.rule.to_string(), d.threshold, self.alpha);
        }
        for note in &r.diagnostics {
            let _ = writeln!(s, "note        {note}");
        }
        s
    }
}

pub fn analyze(
    manifest: &Path,
    options: IngestOptions,
    source: &HypothesisSource,
    alpha: f64,
    flavor: Flavor,
    seed: u64,
    config: &EstimatorConfig,
) -> Result<AnalysisRecord> {
    if flavor == Flavor::Oracle {
        return Err(Error::Config("the oracle flavor needs known covariances and is not available for data".into()));
    }
    let sample = ingest_data(manifest, options)?;
    let (t, validation) = load_hypothesis(source, sample.design())?;
    let report = run_test(&sample, &t, alpha, flavor, config, seed)?;
    Ok(AnalysisRecord {
        data: manifest.to_path_buf(),
        dims: sample.design().dims().to_vec(),
        sizes: sample.design().sizes().to_vec(),
        hypothesis: source.to_string(),
        validation,
        alpha,
        flavor,
        seed,
        report,
    })
}
