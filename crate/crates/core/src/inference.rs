//! Standardized statistics and the three decision rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dists::{kf_quantile, normal_quantile};
use crate::error::{Error, Result};
use crate::estimators::{
    a_estimates, a_star_estimates, b_estimators, b_star_estimates, fhat_pearson, ContrastGram, IndexSource, PearsonDf,
    PermutationSet, TraceEstimates, DEFAULT_ENUMERATION_CAP,
};
use crate::hypothesis::BlockMatrix;
use crate::model::GroupedSample;
use crate::moments::q_statistic;
use crate::rng::{Lane, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Flavor {
    A,
    #[serde(rename = "Astar", alias = "AStar")]
    AStar,
    B,
    #[serde(rename = "Bstar", alias = "BStar")]
    BStar,
    #[serde(rename = "oracle")]
    Oracle,
}

impl Flavor {
    pub const ALL: [Flavor; 5] = [Flavor::A, Flavor::AStar, Flavor::B, Flavor::BStar, Flavor::Oracle];
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::A => "A",
            Flavor::AStar => "Astar",
            Flavor::B => "B",
            Flavor::BStar => "Bstar",
            Flavor::Oracle => "oracle",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Flavor::A),
            "astar" | "a*" | "a★" => Ok(Flavor::AStar),
            "b" => Ok(Flavor::B),
            "bstar" | "b*" | "b★" => Ok(Flavor::BStar),
            "oracle" | "exact" => Ok(Flavor::Oracle),
            _ => Err(Error::Config(format!("unknown flavor '{s}' (A, Astar, B, Bstar, oracle)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Z,
    Chi1,
    Kf,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Z, Rule::Chi1, Rule::Kf];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Z => "z",
            Rule::Chi1 => "chi1",
            Rule::Kf => "kf",
        })
    }
}

/// Subsample counts: order `k` uses `multipliers[k]·N` permutations (B★)
/// and `subsamples` shared tuples per permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpsilonPolicy {
    pub multipliers: [usize; 3],
    pub subsamples: usize,
}

impl Default for UpsilonPolicy {
    fn default() -> Self {
        UpsilonPolicy {
            multipliers: [5, 10, 100],
            subsamples: 10,
        }
    }
}

impl UpsilonPolicy {
    pub fn permutations(&self, total_size: usize) -> [usize; 3] {
        self.multipliers.map(|m| m * total_size)
    }

    /// A★ draws, matched to the B★ kernel count.
    pub fn draws(&self, total_size: usize) -> [usize; 3] {
        self.permutations(total_size).map(|p| p * self.subsamples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub enumeration_cap: u64,
    pub upsilon: UpsilonPolicy,
    /// Permutation repetitions of the full B estimators.
    pub b_permutations: usize,
    /// Exact traces for the oracle flavor.
    pub oracle: Option<TraceEstimates>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            upsilon: UpsilonPolicy::default(),
            b_permutations: 10,
            oracle: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpRegime {
    NearChi1,
    Intermediate,
    NearNormal,
}

/// Reporting band for `f̂`; decisions never depend on it.
pub fn fp_regime_diagnostic(fhat: f64) -> FpRegime {
    if fhat <= 1.2 {
        FpRegime::NearChi1
    } else if fhat >= 50.0 {
        FpRegime::NearNormal
    } else {
        FpRegime::Intermediate
    }
}

/// `(q − t1) / sqrt(2·t2)`.
pub fn w_statistic(q: f64, traces: &TraceEstimates) -> Result<f64> {
    if !(traces.t2 > 0.0) {
        return Err(Error::Degenerate(format!("variance estimate t2 = {} is not positive", traces.t2)));
    }
    Ok((q - traces.t1) / (2.0 * traces.t2).sqrt())
}

/// Critical value of `rule` at level `alpha`; `kf` needs `f̂`.
pub fn threshold(rule: Rule, alpha: f64, fhat: Option<f64>) -> Result<f64> {
    let level = 1.0 - alpha;
    match rule {
        Rule::Z => normal_quantile(level),
        Rule::Chi1 => kf_quantile(level, 1.0),
        Rule::Kf => {
            let f = fhat.ok_or_else(|| Error::Degenerate("kf rule needs a degrees-of-freedom estimate".into()))?;
            kf_quantile(level, f.max(1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub rule: Rule,
    pub threshold: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub flavor: Flavor,
    pub alpha: f64,
    pub seed: u64,
    pub q: f64,
    /// `None` when the variance estimate is not positive.
    pub statistic: Option<f64>,
    pub traces: TraceEstimates,
    pub fhat: Option<PearsonDf>,
    pub regime: Option<FpRegime>,
    pub decisions: Vec<Decision>,
    pub diagnostics: Vec<String>,
}

impl TestReport {
    pub fn decision(&self, rule: Rule) -> Option<&Decision> {
        self.decisions.iter().find(|d| d.rule == rule)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Trace estimates of one flavor on one dataset.
pub fn estimate_traces(
    gram: &ContrastGram,
    flavor: Flavor,
    config: &EstimatorConfig,
    stream: &RngStream,
) -> Result<TraceEstimates> {
    let n_total = gram.design().total_size();
    let source = IndexSource::Random(*stream);
    match flavor {
        Flavor::A => a_estimates(gram, config.enumeration_cap),
        Flavor::AStar => a_star_estimates(gram, config.upsilon.draws(n_total), &source, config.enumeration_cap),
        Flavor::B => {
            let mut rng = stream.rng(Lane::Permutations(0));
            let perms = PermutationSet::random(gram.design(), config.b_permutations, &mut rng);
            b_estimators(gram, &perms, config.b_permutations, config.enumeration_cap)
        }
        Flavor::BStar => {
            let upsilon1 = config.upsilon.permutations(n_total);
            let count = upsilon1.iter().copied().max().unwrap_or(0);
            let mut rng = stream.rng(Lane::Permutations(0));
            let perms = PermutationSet::random(gram.design(), count, &mut rng);
            b_star_estimates(gram, &perms, upsilon1, config.upsilon.subsamples, &source, config.enumeration_cap)
        }
        Flavor::Oracle => config
            .oracle
            .clone()
            .ok_or_else(|| Error::Config("oracle flavor needs exact traces".into())),
    }
}

/// Standardizes `q` with `traces` and applies every rule that is defined.
pub fn report_from_traces(q: f64, traces: TraceEstimates, alpha: f64, flavor: Flavor, seed: u64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let mut diagnostics = traces.notes.clone();
    let fhat = match fhat_pearson(&traces) {
        Ok(f) => {
            if f.floored {
                diagnostics.push(format!("f estimate {:.4} floored at 1", f.raw));
            }
            Some(f)
        }
        Err(e) => {
            if traces.t3.is_some() {
                diagnostics.push(format!("kf rule skipped: {e}"));
            }
            None
        }
    };
    let regime = fhat.map(|f| fp_regime_diagnostic(f.value));
    let (statistic, decisions) = match w_statistic(q, &traces) {
        Ok(w) => {
            let mut decisions = Vec::with_capacity(3);
            for rule in Rule::ALL {
                if rule == Rule::Kf && fhat.is_none() {
                    continue;
                }
                let threshold = threshold(rule, alpha, fhat.map(|f| f.value))?;
                decisions.push(Decision {
                    rule,
                    threshold,
                    reject: w > threshold,
                });
            }
            (Some(w), decisions)
        }
        Err(e) => {
            diagnostics.push(format!("no decisions: {e}"));
            (None, Vec::new())
        }
    };
    Ok(TestReport {
        flavor,
        alpha,
        seed,
        q,
        statistic,
        traces,
        fhat,
        regime,
        decisions,
        diagnostics,
    })
}

/// Full test on one dataset; deterministic given `seed`.
pub fn run_test(
    sample: &GroupedSample,
    t: &BlockMatrix,
    alpha: f64,
    flavor: Flavor,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let t = t.with_design(sample.design())?;
    let q = q_statistic(sample, &t);
    let stream = RngStream::new(seed, 0);
    let traces = if flavor == Flavor::Oracle {
        estimate_traces_without_data(config)?
    } else {
        let gram = ContrastGram::new(sample, &t)?;
        estimate_traces(&gram, flavor, config, &stream)?
    };
    report_from_traces(q, traces, alpha, flavor, seed)
}

fn estimate_traces_without_data(config: &EstimatorConfig) -> Result<TraceEstimates> {
    config
        .oracle
        .clone()
        .ok_or_else(|| Error::Config("oracle flavor needs exact traces".into()))
}
