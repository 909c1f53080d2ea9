//! Study designs, covariance models and Gaussian data generation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, Vector};
use crate::rng::{Lane, RngStream};

/// Group dimensions `d_i` and sample sizes `n_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyDesign {
    dims: Vec<usize>,
    sizes: Vec<usize>,
}

impl StudyDesign {
    pub fn new(dims: Vec<usize>, sizes: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDesign("at least one group is required".into()));
        }
        if dims.len() != sizes.len() {
            return Err(Error::InvalidDesign(format!(
                "{} dimensions but {} sample sizes",
                dims.len(),
                sizes.len()
            )));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidDesign(format!("group {i} has dimension 0")));
        }
        if let Some(i) = sizes.iter().position(|&n| n < 2) {
            return Err(Error::InvalidDesign(format!(
                "group {i} has {} observations, at least 2 are needed",
                sizes[i]
            )));
        }
        Ok(StudyDesign { dims, sizes })
    }

    pub fn groups(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `N = Σ n_i`.
    pub fn total_size(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `D = Σ d_i`.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn min_size(&self) -> usize {
        *self.sizes.iter().min().expect("non-empty design")
    }

    /// Start of each group's block in the pooled `D`-vector.
    pub fn dim_offsets(&self) -> Vec<usize> {
        prefix_sums(&self.dims)
    }

    /// Start of each group's rows when all observations are stacked.
    pub fn size_offsets(&self) -> Vec<usize> {
        prefix_sums(&self.sizes)
    }

    /// `N / n_i`.
    pub fn weight(&self, group: usize) -> f64 {
        self.total_size() as f64 / self.sizes[group] as f64
    }
}

fn prefix_sums(v: &[usize]) -> Vec<usize> {
    v.iter()
        .scan(0, |acc, &x| {
            let start = *acc;
            *acc += x;
            Some(start)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceKind {
    /// `base·I + jfactor·J/d`.
    CompoundSymmetry { base: f64, jfactor: f64 },
    /// Entries `ρ^|s−t|`.
    Ar { rho: f64 },
    /// Entries `ρ^(|s−t|/(d−1))`.
    ScaledAr { rho: f64 },
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub kind: CovarianceKind,
    pub dim: usize,
}

impl CovarianceModel {
    /// `I_d + J_d/d`.
    pub fn compound_symmetry(dim: usize) -> Self {
        CovarianceModel {
            kind: CovarianceKind::CompoundSymmetry { base: 1.0, jfactor: 1.0 },
            dim,
        }
    }

    pub fn ar(rho: f64, dim: usize) -> Self {
        CovarianceModel { kind: CovarianceKind::Ar { rho }, dim }
    }

    pub fn scaled_ar(rho: f64, dim: usize) -> Self {
        CovarianceModel { kind: CovarianceKind::ScaledAr { rho }, dim }
    }

    pub fn explicit(matrix: &Matrix) -> Self {
        let rows = (0..matrix.nrows())
            .map(|r| matrix.row(r).iter().cloned().collect())
            .collect();
        CovarianceModel {
            kind: CovarianceKind::Explicit { matrix: rows },
            dim: matrix.nrows(),
        }
    }
}

pub fn materialize_covariance(model: &CovarianceModel) -> Result<Matrix> {
    let d = model.dim;
    if d == 0 {
        return Err(Error::InvalidDimension("covariance dimension must be positive".into()));
    }
    let lag = |s: usize, t: usize| s.abs_diff(t) as f64;
    match &model.kind {
        CovarianceKind::CompoundSymmetry { base, jfactor } => {
            // eigenvalues: base (d−1 times) and base + jfactor
            if !(*base > 0.0 && base + jfactor > 0.0) {
                return Err(Error::InvalidDimension(format!(
                    "compound symmetry with base {base} and J factor {jfactor} is not positive definite"
                )));
            }
            let off = jfactor / d as f64;
            Ok(Matrix::from_fn(d, d, |s, t| if s == t { base + off } else { off }))
        }
        CovarianceKind::Ar { rho } => {
            check_rho(*rho)?;
            Ok(Matrix::from_fn(d, d, |s, t| rho.powf(lag(s, t))))
        }
        CovarianceKind::ScaledAr { rho } => {
            check_rho(*rho)?;
            if d < 2 {
                return Err(Error::InvalidDimension(
                    "scaled autoregressive covariance needs dimension >= 2".into(),
                ));
            }
            let scale = (d - 1) as f64;
            Ok(Matrix::from_fn(d, d, |s, t| rho.powf(lag(s, t) / scale)))
        }
        CovarianceKind::Explicit { matrix } => {
            if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidDimension(format!(
                    "explicit covariance is not {d}x{d}"
                )));
            }
            Ok(Matrix::from_fn(d, d, |s, t| matrix[s][t]))
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDimension(format!("autoregressive parameter {rho} outside (-1, 1)")))
    }
}

/// Observations of all groups; group `i` is an `n_i × d_i` matrix, one subject per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    design: StudyDesign,
    groups: Vec<Matrix>,
}

impl GroupedSample {
    pub fn new(design: StudyDesign, groups: Vec<Matrix>) -> Result<Self> {
        if groups.len() != design.groups() {
            return Err(Error::Structural(format!(
                "design has {} groups, sample has {}",
                design.groups(),
                groups.len()
            )));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.shape() != (design.sizes()[i], design.dims()[i]) {
                return Err(Error::Structural(format!(
                    "group {i} is {}x{}, design expects {}x{}",
                    g.nrows(),
                    g.ncols(),
                    design.sizes()[i],
                    design.dims()[i]
                )));
            }
        }
        Ok(GroupedSample { design, groups })
    }

    /// Builds the design from the group shapes.
    pub fn from_groups(groups: Vec<Matrix>) -> Result<Self> {
        let dims = groups.iter().map(|g| g.ncols()).collect();
        let sizes = groups.iter().map(|g| g.nrows()).collect();
        GroupedSample::new(StudyDesign::new(dims, sizes)?, groups)
    }

    pub fn design(&self) -> &StudyDesign {
        &self.design
    }

    pub fn groups(&self) -> &[Matrix] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &Matrix {
        &self.groups[i]
    }

    pub fn group_mean(&self, i: usize) -> Vector {
        let g = &self.groups[i];
        g.row_mean().transpose()
    }

    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> GroupedSample {
        let groups = self
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| Matrix::from_fn(g.nrows(), g.ncols(), |r, c| f(i, c, g[(r, c)])))
            .collect();
        GroupedSample {
            design: self.design.clone(),
            groups,
        }
    }
}

/// Concatenation of the group means, length `D`.
pub fn pooled_mean(sample: &GroupedSample) -> Vector {
    let design = sample.design();
    let mut out = Vector::zeros(design.total_dim());
    for (i, off) in design.dim_offsets().into_iter().enumerate() {
        out.rows_mut(off, design.dims()[i]).copy_from(&sample.group_mean(i));
    }
    out
}

/// Draws `X_{i,j} = μ_i + L_i ξ` with `L_i L_iᵀ = Σ_i`; factors are computed once.
#[derive(Debug, Clone)]
pub struct GaussianGenerator {
    design: StudyDesign,
    means: Vec<Vector>,
    factors: Vec<Matrix>,
}

impl GaussianGenerator {
    pub fn new(design: &StudyDesign, means: &[Vector], covs: &[CovarianceModel]) -> Result<Self> {
        let mats = covs
            .iter()
            .map(materialize_covariance)
            .collect::<Result<Vec<_>>>()?;
        Self::from_matrices(design, means, &mats)
    }

    pub fn from_matrices(design: &StudyDesign, means: &[Vector], covs: &[Matrix]) -> Result<Self> {
        let a = design.groups();
        if means.len() != a || covs.len() != a {
            return Err(Error::Structural(format!(
                "design has {a} groups, got {} means and {} covariances",
                means.len(),
                covs.len()
            )));
        }
        for i in 0..a {
            let d = design.dims()[i];
            if means[i].len() != d || covs[i].shape() != (d, d) {
                return Err(Error::Structural(format!(
                    "group {i}: mean length {} / covariance {}x{} do not match dimension {d}",
                    means[i].len(),
                    covs[i].nrows(),
                    covs[i].ncols()
                )));
            }
        }
        let factors = covs.iter().map(cholesky).collect::<Result<Vec<_>>>()?;
        Ok(GaussianGenerator {
            design: design.clone(),
            means: means.to_vec(),
            factors,
        })
    }

    pub fn design(&self) -> &StudyDesign {
        &self.design
    }

    pub fn sample(&self, stream: &RngStream) -> GroupedSample {
        let groups = (0..self.design.groups())
            .map(|i| {
                let (n, d) = (self.design.sizes()[i], self.design.dims()[i]);
                let mut rng = stream.rng(Lane::Group(i));
                let xi = Matrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let mut x = xi * self.factors[i].transpose();
                for mut row in x.row_iter_mut() {
                    row += self.means[i].transpose();
                }
                x
            })
            .collect();
        GroupedSample {
            design: self.design.clone(),
            groups,
        }
    }
}

pub fn sample(
    design: &StudyDesign,
    means: &[Vector],
    covs: &[CovarianceModel],
    stream: &RngStream,
) -> Result<GroupedSample> {
    Ok(GaussianGenerator::new(design, means, covs)?.sample(stream))
}

pub fn zero_means(design: &StudyDesign) -> Vec<Vector> {
    design.dims().iter().map(|&d| Vector::zeros(d)).collect()
}
