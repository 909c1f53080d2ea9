use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ContrastGram, TraceEstimates};
use crate::hypothesis::{scenario_a_matrix, scenario_b_matrix, BlockMatrix, ScenarioLabel};
use crate::inference::{estimate_traces, report_from_traces, EstimatorConfig, Flavor, Rule};
use crate::linalg::{Matrix, Vector};
use crate::model::{materialize_covariance, zero_means, CovarianceModel, GaussianGenerator, StudyDesign};
use crate::moments::{build_vn, q_statistic, spectral_summary};
use crate::rng::{derive_seed, RngStream};
use crate::summary::binomial_band;

use super::config::{ExperimentConfig, GridPoint, ScenarioConfig};

/// Confidence of the reference band around `alpha`.
pub const BAND_CONFIDENCE: f64 = 0.99;

/// One `(grid cell, flavor, rule)` rejection tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    #[serde(rename = "D")]
    pub total_dim: usize,
    pub d1: usize,
    pub d2: usize,
    pub n1: usize,
    pub n2: usize,
    pub flavor: Flavor,
    pub rule: Rule,
    pub rejection_rate: f64,
    pub replications: usize,
    /// 99% binomial band around the nominal level.
    pub binomial_ci_low: f64,
    pub binomial_ci_high: f64,
    /// Seed of the grid cell; replication `r` uses stream `(seed, r)`.
    pub seed: u64,
    pub rejections: usize,
    /// Replications without a decision for this rule.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTiming {
    #[serde(rename = "D")]
    pub total_dim: usize,
    pub n1: usize,
    pub n2: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<PointTiming>,
}

/// Everything a replication needs that does not depend on the data.
pub struct PointSetup {
    pub point: GridPoint,
    pub seed: u64,
    pub hypothesis: BlockMatrix,
    pub generator: GaussianGenerator,
    pub exact: TraceEstimates,
}

fn hypothesis_for(label: ScenarioLabel, design: &StudyDesign) -> Result<BlockMatrix> {
    match label {
        ScenarioLabel::A => scenario_a_matrix(design),
        ScenarioLabel::B => scenario_b_matrix(design),
    }
}

pub fn setup_point(config: &ExperimentConfig, point: GridPoint) -> Result<PointSetup> {
    let design = StudyDesign::new(point.dims.to_vec(), point.sizes.to_vec())?;
    let models: Vec<CovarianceModel> = match &config.scenario {
        ScenarioConfig::A => point.dims.iter().map(|&d| CovarianceModel::compound_symmetry(d)).collect(),
        ScenarioConfig::B => vec![
            CovarianceModel::ar(0.6, point.dims[0]),
            CovarianceModel::scaled_ar(0.6, point.dims[1]),
        ],
        ScenarioConfig::Custom { covariances, .. } => covariances
            .iter()
            .zip(point.dims)
            .map(|(kind, dim)| CovarianceModel { kind: kind.clone(), dim })
            .collect(),
    };
    let covs: Vec<Matrix> = models.iter().map(materialize_covariance).collect::<Result<_>>()?;
    let hypothesis = hypothesis_for(config.scenario.hypothesis(), &design)?;
    let exact = TraceEstimates::exact(&spectral_summary(&hypothesis, &build_vn(&design, &covs)?)?);
    let mut means = zero_means(&design);
    if let Some(shift) = config.mean_shift {
        means[0] = Vector::from_element(point.dims[0], shift);
    }
    let generator = GaussianGenerator::from_matrices(&design, &means, &covs)?;
    Ok(PointSetup {
        point,
        seed: derive_seed(&[config.seed, point.index as u64]),
        hypothesis,
        generator,
        exact,
    })
}

fn estimator_config(config: &ExperimentConfig, setup: &PointSetup) -> EstimatorConfig {
    EstimatorConfig {
        enumeration_cap: config.enumeration_cap,
        upsilon: config.upsilon,
        b_permutations: config.b_permutations,
        oracle: Some(setup.exact.clone()),
    }
}

/// Decisions of one replication, flavor-major then rule; `None` when a rule
/// produced no decision.
pub fn run_replication(config: &ExperimentConfig, setup: &PointSetup, replication: u64) -> Result<Vec<Option<bool>>> {
    let stream = RngStream::new(setup.seed, replication);
    let sample = setup.generator.sample(&stream);
    let q = q_statistic(&sample, &setup.hypothesis);
    let needs_gram = config.flavors.iter().any(|&f| f != Flavor::Oracle);
    let gram = if needs_gram {
        Some(ContrastGram::new(&sample, &setup.hypothesis)?)
    } else {
        None
    };
    let est = estimator_config(config, setup);
    let mut out = Vec::with_capacity(config.flavors.len() * 3);
    for &flavor in &config.flavors {
        let traces = match (&gram, flavor) {
            (_, Flavor::Oracle) | (None, _) => setup.exact.clone(),
            (Some(g), _) => estimate_traces(g, flavor, &est, &stream)?,
        };
        let report = report_from_traces(q, traces, config.alpha, flavor, setup.seed)?;
        out.extend(Rule::ALL.iter().map(|&r| report.decision(r).map(|d| d.reject)));
    }
    Ok(out)
}

/// Recomputes the decisions of one logged replication.
pub fn replay_replication(
    config: &ExperimentConfig,
    point_index: usize,
    replication: u64,
) -> Result<Vec<(Flavor, Rule, Option<bool>)>> {
    let point = *config
        .grid()?
        .get(point_index)
        .ok_or_else(|| Error::Config(format!("grid has no cell {point_index}")))?;
    let setup = setup_point(config, point)?;
    let decisions = run_replication(config, &setup, replication)?;
    let labels = config
        .flavors
        .iter()
        .flat_map(|&f| Rule::ALL.iter().map(move |&r| (f, r)));
    Ok(labels.zip(decisions).map(|((f, r), d)| (f, r, d)).collect())
}

/// Runs every grid cell; replications run in parallel, tallies are
/// assembled in a fixed order, so the rows do not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let band = binomial_band(config.alpha, config.replications, BAND_CONFIDENCE)?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for point in config.grid()? {
        let start = Instant::now();
        let setup = setup_point(config, point)?;
        let per_rep: Vec<Vec<Option<bool>>> = (0..config.replications as u64)
            .into_par_iter()
            .map(|r| run_replication(config, &setup, r))
            .collect::<Result<_>>()?;
        let labels = config
            .flavors
            .iter()
            .flat_map(|&f| Rule::ALL.iter().map(move |&r| (f, r)));
        for (k, (flavor, rule)) in labels.enumerate() {
            let rejections = per_rep.iter().filter(|d| d[k] == Some(true)).count();
            let skipped = per_rep.iter().filter(|d| d[k].is_none()).count();
            rows.push(ResultRow {
                scenario: config.scenario.name(),
                total_dim: point.total_dim,
                d1: point.dims[0],
                d2: point.dims[1],
                n1: point.sizes[0],
                n2: point.sizes[1],
                flavor,
                rule,
                rejection_rate: rejections as f64 / config.replications as f64,
                replications: config.replications,
                binomial_ci_low: band.low,
                binomial_ci_high: band.high,
                seed: setup.seed,
                rejections,
                skipped,
            });
        }
        timings.push(PointTiming {
            total_dim: point.total_dim,
            n1: point.sizes[0],
            n2: point.sizes[1],
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    if let Some(path) = &config.output {
        write_rows(path, &rows)?;
    }
    Ok(ExperimentOutcome { rows, timings })
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    writer.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let bytes = rows_to_csv(rows)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_timings(path: &Path, timings: &[PointTiming]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    for t in timings {
        writer.serialize(t)?;
    }
    writer.flush()?;
    Ok(())
}
