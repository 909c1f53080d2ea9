//! Block hypothesis matrices `T` and the two canned simulation scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    asymmetry, max_abs_diff, pseudo_inverse, sym_eigen, symmetrize, Matrix, Vector, DEFAULT_RANK_TOL,
};
use crate::model::{CovarianceModel, StudyDesign};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const IDEMPOTENCE_TOL: f64 = 1e-8;

/// A `D × D` matrix whose blocks follow the group dimensions of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    design: StudyDesign,
    data: Matrix,
}

impl BlockMatrix {
    pub fn new(design: StudyDesign, data: Matrix) -> Result<Self> {
        let d = design.total_dim();
        if data.shape() != (d, d) {
            return Err(Error::Structural(format!(
                "block matrix is {}x{}, design has D = {d}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(BlockMatrix { design, data })
    }

    pub fn design(&self) -> &StudyDesign {
        &self.design
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    /// The `d_i × d_j` block `T_ij`.
    pub fn block(&self, i: usize, j: usize) -> Matrix {
        let off = self.design.dim_offsets();
        let dims = self.design.dims();
        self.data.view((off[i], off[j]), (dims[i], dims[j])).into_owned()
    }

    /// Same matrix, block boundaries taken from another design with identical dimensions.
    pub fn with_design(&self, design: &StudyDesign) -> Result<Self> {
        if design.dims() != self.design.dims() {
            return Err(Error::Structural(format!(
                "hypothesis blocks {:?} do not match data dimensions {:?}",
                self.design.dims(),
                design.dims()
            )));
        }
        Ok(BlockMatrix {
            design: design.clone(),
            data: self.data.clone(),
        })
    }
}

/// `T = Hᵀ (H Hᵀ)⁺ H`, the orthogonal projection onto the row space of `h`.
pub fn projection_from_h(h: &Matrix, design: &StudyDesign) -> Result<BlockMatrix> {
    let d = design.total_dim();
    if h.ncols() != d {
        return Err(Error::Structural(format!(
            "hypothesis matrix has {} columns, design has D = {d}",
            h.ncols()
        )));
    }
    let gram = h * h.transpose();
    let t = h.transpose() * pseudo_inverse(&gram, DEFAULT_RANK_TOL)? * h;
    BlockMatrix::new(design.clone(), symmetrize(&t))
}

fn require_two_groups(design: &StudyDesign, name: &str) -> Result<()> {
    if design.groups() != 2 {
        return Err(Error::UnsupportedScenario(format!(
            "scenario {name} is defined for two groups, design has {}",
            design.groups()
        )));
    }
    Ok(())
}

/// Rank-one projection onto the contrast of the two groups' averaged profiles,
/// `v = (1_{d1}/d1 ; −1_{d2}/d2)`.
pub fn scenario_b_matrix(design: &StudyDesign) -> Result<BlockMatrix> {
    require_two_groups(design, "B")?;
    let (d1, d2) = (design.dims()[0], design.dims()[1]);
    let v = Vector::from_fn(d1 + d2, |k, _| {
        if k < d1 {
            1.0 / d1 as f64
        } else {
            -1.0 / d2 as f64
        }
    });
    let t = &v * v.transpose() / v.norm_squared();
    BlockMatrix::new(design.clone(), t)
}

/// Block-diagonal centering projection `diag(P_{d1}, P_{d2})`, `P_d = I_d − J_d/d`.
pub fn scenario_a_matrix(design: &StudyDesign) -> Result<BlockMatrix> {
    require_two_groups(design, "A")?;
    if let Some(i) = design.dims().iter().position(|&d| d < 2) {
        return Err(Error::InvalidDimension(format!(
            "scenario A needs d_i >= 2, group {i} has dimension {}",
            design.dims()[i]
        )));
    }
    let total = design.total_dim();
    let offsets = design.dim_offsets();
    let mut t = Matrix::zeros(total, total);
    for (i, &d) in design.dims().iter().enumerate() {
        let off = offsets[i];
        for r in 0..d {
            for c in 0..d {
                t[(off + r, off + c)] = if r == c { 1.0 } else { 0.0 } - 1.0 / d as f64;
            }
        }
    }
    BlockMatrix::new(design.clone(), t)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport {
    pub asymmetry: f64,
    pub idempotence_defect: f64,
    pub block_transpose_defect: f64,
    /// Number of eigenvalues ≥ 0.5.
    pub rank: usize,
    pub passed: bool,
}

pub fn validate_hypothesis(t: &BlockMatrix) -> ValidationReport {
    let m = t.matrix();
    let skew = asymmetry(m);
    let idem = max_abs_diff(&(m * m), m);
    let a = t.design().groups();
    let mut block_defect = 0.0_f64;
    for i in 0..a {
        for j in (i + 1)..a {
            block_defect = block_defect.max(max_abs_diff(&t.block(i, j), &t.block(j, i).transpose()));
        }
    }
    let rank = sym_eigen(&symmetrize(m), f64::INFINITY)
        .map(|e| e.values.iter().filter(|&&v| v >= 0.5).count())
        .unwrap_or(0);
    let passed = skew <= SYMMETRY_TOL && idem <= IDEMPOTENCE_TOL && block_defect <= SYMMETRY_TOL;
    ValidationReport {
        asymmetry: skew,
        idempotence_defect: idem,
        block_transpose_defect: block_defect,
        rank,
        passed,
    }
}

/// Gate for externally supplied matrices.
pub fn require_valid(t: &BlockMatrix) -> Result<ValidationReport> {
    let report = validate_hypothesis(t);
    if report.passed {
        Ok(report)
    } else {
        Err(Error::InvalidHypothesis {
            asymmetry: report.asymmetry.max(report.block_transpose_defect),
            idempotence: report.idempotence_defect,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioLabel {
    A,
    B,
}

impl std::fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioLabel::A => write!(f, "A"),
            ScenarioLabel::B => write!(f, "B"),
        }
    }
}

/// One of the two canned two-group settings with its covariance models.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub label: ScenarioLabel,
    pub design: StudyDesign,
    pub covariances: Vec<CovarianceModel>,
}

impl ScenarioSpec {
    /// Scenario A uses `I + J/d_i` in both groups; scenario B uses `0.6^|s−t|`
    /// and `0.6^(|s−t|/(d2−1))`.
    pub fn standard(label: ScenarioLabel, design: StudyDesign) -> Result<Self> {
        require_two_groups(&design, &label.to_string())?;
        let (d1, d2) = (design.dims()[0], design.dims()[1]);
        let covariances = match label {
            ScenarioLabel::A => vec![
                CovarianceModel::compound_symmetry(d1),
                CovarianceModel::compound_symmetry(d2),
            ],
            ScenarioLabel::B => vec![CovarianceModel::ar(0.6, d1), CovarianceModel::scaled_ar(0.6, d2)],
        };
        Ok(ScenarioSpec {
            label,
            design,
            covariances,
        })
    }

    pub fn hypothesis(&self) -> Result<BlockMatrix> {
        match self.label {
            ScenarioLabel::A => scenario_a_matrix(&self.design),
            ScenarioLabel::B => scenario_b_matrix(&self.design),
        }
    }
}
