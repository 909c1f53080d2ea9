//! The quadratic form `Q_N = N·X̄ᵀTX̄` and its exact null moments when the
//! covariances are known. This is the ground truth the estimators are checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::BlockMatrix;
use crate::linalg::{sym_eigen, symmetrize, trace_of_product, Matrix};
use crate::model::{pooled_mean, GroupedSample, StudyDesign};

/// Relative level below which negative eigenvalues of `T V_N T` are rounding noise.
const CLAMP_LEVEL: f64 = 1e-8;

/// `V_N = ⊕ (N/n_i) Σ_i`.
pub fn build_vn(design: &StudyDesign, covs: &[Matrix]) -> Result<BlockMatrix> {
    if covs.len() != design.groups() {
        return Err(Error::Structural(format!(
            "design has {} groups, got {} covariance matrices",
            design.groups(),
            covs.len()
        )));
    }
    let total = design.total_dim();
    let mut vn = Matrix::zeros(total, total);
    for (i, off) in design.dim_offsets().into_iter().enumerate() {
        let d = design.dims()[i];
        if covs[i].shape() != (d, d) {
            return Err(Error::Structural(format!(
                "covariance {i} is {}x{}, expected {d}x{d}",
                covs[i].nrows(),
                covs[i].ncols()
            )));
        }
        vn.view_mut((off, off), (d, d)).copy_from(&(&covs[i] * design.weight(i)));
    }
    BlockMatrix::new(design.clone(), vn)
}

pub fn q_statistic(sample: &GroupedSample, t: &BlockMatrix) -> f64 {
    let xbar = pooled_mean(sample);
    let n = sample.design().total_size() as f64;
    n * xbar.dot(&(t.matrix() * &xbar))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    /// `tr(T V_N)`.
    pub mean: f64,
    /// `2 tr((T V_N)²)`.
    pub variance: f64,
    /// Mean from the block formula `Σ_i (N/n_i) tr(T_ii Σ_i)`.
    pub blockwise_mean: f64,
    /// Variance from `2 Σ_i Σ_r (N²/(n_i n_r)) tr(T_ir Σ_r T_ri Σ_i)`.
    pub blockwise_variance: f64,
}

impl ExactMoments {
    pub fn route_discrepancy(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        rel(self.mean, self.blockwise_mean).max(rel(self.variance, self.blockwise_variance))
    }
}

/// Null moments of `Q_N` from the per-group covariances.
pub fn moments_blockwise(t: &BlockMatrix, covs: &[Matrix]) -> (f64, f64) {
    let design = t.design();
    let a = design.groups();
    let blocks: Vec<Vec<Matrix>> = (0..a).map(|i| (0..a).map(|r| t.block(i, r)).collect()).collect();
    let mut mean = 0.0;
    let mut var = 0.0;
    for i in 0..a {
        mean += design.weight(i) * trace_of_product(&blocks[i][i], &covs[i]);
        for r in 0..a {
            let left = &blocks[i][r] * &covs[r];
            let right = &blocks[r][i] * &covs[i];
            var += design.weight(i) * design.weight(r) * trace_of_product(&left, &right);
        }
    }
    (mean, 2.0 * var)
}

pub fn exact_moments(t: &BlockMatrix, vn: &BlockMatrix) -> Result<ExactMoments> {
    let design = t.design();
    if design != vn.design() {
        return Err(Error::Structural("T and V_N use different designs".into()));
    }
    let tv = t.matrix() * vn.matrix();
    let mean = tv.trace();
    let variance = 2.0 * trace_of_product(&tv, &tv);
    let covs: Vec<Matrix> = (0..design.groups())
        .map(|i| vn.block(i, i) / design.weight(i))
        .collect();
    let (blockwise_mean, blockwise_variance) = moments_blockwise(t, &covs);
    Ok(ExactMoments {
        mean,
        variance,
        blockwise_mean,
        blockwise_variance,
    })
}

/// Spectrum of `T V_N T` and the quantities derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Descending, with rounding-level negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// `β_s = λ_s / sqrt(Σ λ²)`; empty when the spectrum is zero.
    pub weights: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// `t2³ / t3²`.
    pub f_p: Option<f64>,
    pub degenerate: bool,
    /// Eigenvalues clamped from `[−1e-8·λ_max, 0)`.
    pub clamped: usize,
    pub warnings: Vec<String>,
}

impl SpectralSummary {
    fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let mut clamped = 0;
        let mut warnings = Vec::new();
        for v in eigenvalues.iter_mut() {
            if *v < 0.0 {
                if *v < -CLAMP_LEVEL * lambda_max {
                    warnings.push(format!("eigenvalue {v:e} of T V_N T is clearly negative"));
                } else {
                    *v = 0.0;
                    clamped += 1;
                }
            }
        }
        let power = |k: i32| eigenvalues.iter().map(|v| v.powi(k)).sum::<f64>();
        let (t1, t2, t3) = (power(1), power(2), power(3));
        let degenerate = t2 <= 0.0;
        let weights = if degenerate {
            Vec::new()
        } else {
            let norm = t2.sqrt();
            eigenvalues.iter().map(|v| v / norm).collect()
        };
        let f_p = (t3 != 0.0).then(|| t2.powi(3) / (t3 * t3));
        SpectralSummary {
            eigenvalues,
            weights,
            t1,
            t2,
            t3,
            f_p,
            degenerate,
            clamped,
            warnings,
        }
    }

    /// Nonzero weights only (those above `1e-12` of the largest).
    pub fn active_weights(&self) -> Vec<f64> {
        let top = self.weights.first().copied().unwrap_or(0.0).abs();
        self.weights
            .iter()
            .copied()
            .filter(|w| w.abs() > 1e-12 * top)
            .collect()
    }
}

pub fn spectral_summary(t: &BlockMatrix, vn: &BlockMatrix) -> Result<SpectralSummary> {
    if t.design() != vn.design() {
        return Err(Error::Structural("T and V_N use different designs".into()));
    }
    let tvt = symmetrize(&(t.matrix() * vn.matrix() * t.matrix()));
    let eig = sym_eigen(&tvt, f64::INFINITY)?;
    Ok(SpectralSummary::from_eigenvalues(eig.values))
}

/// `(q − mean) / sqrt(variance)`.
pub fn standardized_statistic(q: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Degenerate(format!(
            "null variance {variance} is not positive"
        )));
    }
    Ok((q - mean) / variance.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{projection_from_h, scenario_a_matrix, scenario_b_matrix};
    use crate::linalg::{max_abs, Vector};
    use crate::model::{materialize_covariance, CovarianceModel, GroupedSample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_covs(design: &StudyDesign) -> Vec<Matrix> {
        design.dims().iter().map(|&d| Matrix::identity(d, d)).collect()
    }

    #[test]
    fn vn_examples() {
        let design = StudyDesign::new(vec![2, 3], vec![4, 6]).unwrap();
        let vn = build_vn(&design, &identity_covs(&design)).unwrap();
        let expected = Matrix::from_diagonal(&Vector::from_row_slice(&[
            2.5,
            2.5,
            10.0 / 6.0,
            10.0 / 6.0,
            10.0 / 6.0,
        ]));
        assert!(crate::linalg::max_abs_diff(vn.matrix(), &expected) < 1e-15);
        assert_eq!(max_abs(&vn.block(0, 1)), 0.0);

        let one = StudyDesign::new(vec![3], vec![7]).unwrap();
        let sigma = materialize_covariance(&CovarianceModel::ar(0.4, 3)).unwrap();
        let vn = build_vn(&one, std::slice::from_ref(&sigma)).unwrap();
        assert!(crate::linalg::max_abs_diff(vn.matrix(), &sigma) < 1e-15);

        assert!(build_vn(&design, &identity_covs(&one)).is_err());
    }

    #[test]
    fn q_statistic_examples() {
        let design = StudyDesign::new(vec![2], vec![10]).unwrap();
        let zeros = GroupedSample::new(design.clone(), vec![Matrix::zeros(10, 2)]).unwrap();
        let t = BlockMatrix::new(design.clone(), Matrix::identity(2, 2)).unwrap();
        assert_eq!(q_statistic(&zeros, &t), 0.0);

        let e1 = GroupedSample::new(design, vec![Matrix::from_fn(10, 2, |_, c| if c == 0 { 1.0 } else { 0.0 })])
            .unwrap();
        assert!((q_statistic(&e1, &t) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exact_moment_examples() {
        let design = StudyDesign::new(vec![2, 3], vec![4, 6]).unwrap();
        let vn = build_vn(&design, &identity_covs(&design)).unwrap();
        let t = BlockMatrix::new(design.clone(), Matrix::identity(5, 5)).unwrap();
        let m = exact_moments(&t, &vn).unwrap();
        assert!((m.mean - 10.0).abs() < 1e-12);
        let expected_var = 2.0 * (2.0 * 2.5 * 2.5 + 3.0 * (10.0_f64 / 6.0).powi(2));
        assert!((m.variance - expected_var).abs() < 1e-12);
        assert!((m.variance - 41.666_666_666_7).abs() < 1e-9);
        assert!(m.route_discrepancy() < 1e-12);

        let design = StudyDesign::new(vec![2, 2], vec![5, 5]).unwrap();
        let t = scenario_b_matrix(&design).unwrap();
        let vn = BlockMatrix::new(design, Matrix::identity(4, 4)).unwrap();
        let m = exact_moments(&t, &vn).unwrap();
        assert!((m.mean - 1.0).abs() < 1e-12 && (m.variance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_examples() {
        let design = StudyDesign::new(vec![2, 3], vec![4, 4]).unwrap();
        let t = BlockMatrix::new(design.clone(), Matrix::identity(5, 5)).unwrap();
        let vn = BlockMatrix::new(design.clone(), Matrix::identity(5, 5) * 2.0).unwrap();
        let s = spectral_summary(&t, &vn).unwrap();
        assert!(s.eigenvalues.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(s.weights.iter().all(|w| (w - 1.0 / 5f64.sqrt()).abs() < 1e-12));
        assert!((s.f_p.unwrap() - 5.0).abs() < 1e-10);

        let t = scenario_b_matrix(&design).unwrap();
        let covs = vec![
            materialize_covariance(&CovarianceModel::ar(0.6, 2)).unwrap(),
            materialize_covariance(&CovarianceModel::scaled_ar(0.6, 3)).unwrap(),
        ];
        let vn = build_vn(&design, &covs).unwrap();
        let s = spectral_summary(&t, &vn).unwrap();
        assert!((s.weights[0] - 1.0).abs() < 1e-10);
        assert!((s.f_p.unwrap() - 1.0).abs() < 1e-10);

        let zero = BlockMatrix::new(design.clone(), Matrix::zeros(5, 5)).unwrap();
        let s = spectral_summary(&zero, &vn).unwrap();
        assert!(s.degenerate && s.weights.is_empty() && s.f_p.is_none());
    }

    #[test]
    fn spectral_and_trace_routes_agree_scenario_a() {
        let design = StudyDesign::new(vec![5, 5], vec![7, 9]).unwrap();
        let t = scenario_a_matrix(&design).unwrap();
        let covs: Vec<Matrix> = design
            .dims()
            .iter()
            .map(|&d| materialize_covariance(&CovarianceModel::compound_symmetry(d)).unwrap())
            .collect();
        let vn = build_vn(&design, &covs).unwrap();
        let s = spectral_summary(&t, &vn).unwrap();
        let tv = t.matrix() * vn.matrix();
        let tv2 = &tv * &tv;
        let traces = [tv.trace(), tv2.trace(), (&tv2 * &tv).trace()];
        for (got, want) in [s.t1, s.t2, s.t3].iter().zip(traces) {
            assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
        }
        let beta_sq: f64 = s.weights.iter().map(|w| w * w).sum();
        assert!((beta_sq - 1.0).abs() < 1e-12);
        assert!(s.f_p.unwrap() >= 1.0);
    }

    #[test]
    fn equal_eigenvalues_give_their_count() {
        for r in [1usize, 3, 8] {
            let design = StudyDesign::new(vec![r + 1], vec![4]).unwrap();
            let h = Matrix::from_fn(r, r + 1, |i, j| if i == j { 1.0 } else { 0.0 });
            let t = projection_from_h(&h, &design).unwrap();
            let vn = BlockMatrix::new(design, Matrix::identity(r + 1, r + 1) * 3.0).unwrap();
            let s = spectral_summary(&t, &vn).unwrap();
            assert!((s.f_p.unwrap() - r as f64).abs() < 1e-10 * r as f64);
        }
    }

    #[test]
    fn idempotent_trace_identity_and_routes_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let dims = vec![rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..4)];
            let sizes = vec![rng.random_range(2..9), rng.random_range(2..9), rng.random_range(2..9)];
            let design = StudyDesign::new(dims.clone(), sizes).unwrap();
            let total = design.total_dim();
            let rows = rng.random_range(1..=total);
            let h = Matrix::from_fn(rows, total, |_, _| rng.random_range(-1.0..1.0));
            let t = projection_from_h(&h, &design).unwrap();
            let covs: Vec<Matrix> = dims
                .iter()
                .map(|&d| {
                    let a = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                    &a * a.transpose() + Matrix::identity(d, d) * 0.5
                })
                .collect();
            let vn = build_vn(&design, &covs).unwrap();
            let tvt = (t.matrix() * vn.matrix() * t.matrix()).trace();
            let tv = (t.matrix() * vn.matrix()).trace();
            assert!((tvt - tv).abs() <= 1e-8 * tv.abs());
            let m = exact_moments(&t, &vn).unwrap();
            assert!(m.route_discrepancy() < 1e-6);
        }
    }

    #[test]
    fn standardized_examples() {
        assert_eq!(standardized_statistic(3.0, 3.0, 4.0).unwrap(), 0.0);
        assert!((standardized_statistic(5.0, 3.0, 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(standardized_statistic(1.0, 0.0, 0.0), Err(Error::Degenerate(_))));
        assert!(matches!(standardized_statistic(1.0, 0.0, -1.0), Err(Error::Degenerate(_))));
    }
}
