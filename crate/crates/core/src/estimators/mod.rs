//! Unbiased estimators of `tr(TV_N)`, `tr((TV_N)²)` and `tr((TV_N)³)`.
//!
//! All kernels are built from difference vectors
//! `Z = concat_i sqrt(N/n_i)(X_{i,l} − X_{i,l'})`, whose covariance is `2V_N`.
//! The A family averages over independent index tuples per group, the B family
//! over one shared tuple mapped through random within-group permutations. The
//! starred variants average over random subsets of either index set.

mod a_family;
mod b_family;
mod gram;
mod tuples;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::BlockMatrix;
use crate::linalg::Vector;
use crate::model::GroupedSample;
use crate::moments::SpectralSummary;
use crate::rng::RngStream;

pub use a_family::{a_full, a_full_cost, a_star};
pub use b_family::{b_full, b_star};
pub use gram::ContrastGram;
pub use tuples::{
    admissible_count, admissible_tuples, canonical_tuples, draw_admissible, orbit_size, IndexTuple, PermutationSet,
    Slots, TraceOrder,
};

/// Default bound on kernel evaluations for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Where subsampled estimators take their index tuples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexSource {
    /// Every admissible combination exactly once.
    Exhaustive,
    /// Independent uniform draws from the admissible set.
    Random(RngStream),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    AStar,
    B,
    BStar,
    Exact,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::AStar => "Astar",
            Family::B => "B",
            Family::BStar => "Bstar",
            Family::Exact => "exact",
        };
        f.write_str(s)
    }
}

/// Subsampling and permutation counts behind an estimate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpsilonRecord {
    None,
    Exhaustive,
    Subsamples { per_order: [usize; 3] },
    Permutations { count: usize },
    PermutationsAndSubsamples { permutations: [usize; 3], subsamples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimates {
    pub family: Family,
    pub t1: f64,
    pub t2: f64,
    pub t3: Option<f64>,
    pub upsilon: UpsilonRecord,
    /// Reasons an optional trace is missing.
    pub notes: Vec<String>,
}

impl TraceEstimates {
    pub fn exact(summary: &SpectralSummary) -> Self {
        TraceEstimates {
            family: Family::Exact,
            t1: summary.t1,
            t2: summary.t2,
            t3: Some(summary.t3),
            upsilon: UpsilonRecord::None,
            notes: Vec::new(),
        }
    }

    /// Unfloored `t2³ / t3²`.
    pub fn fhat_raw(&self) -> Option<f64> {
        self.t3.filter(|&t3| t3 != 0.0).map(|t3| self.t2.powi(3) / (t3 * t3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonDf {
    pub value: f64,
    pub raw: f64,
    pub floored: bool,
}

/// `t2³ / t3²`, floored at 1.
pub fn fhat_pearson(est: &TraceEstimates) -> Result<PearsonDf> {
    let raw = match est.t3 {
        None => return Err(Error::Degenerate("no third-trace estimate".into())),
        Some(0.0) => return Err(Error::Degenerate("third-trace estimate is zero".into())),
        Some(t3) => est.t2.powi(3) / (t3 * t3),
    };
    if !raw.is_finite() {
        return Err(Error::Degenerate(format!("Pearson degrees of freedom not finite ({raw})")));
    }
    let floored = raw < 1.0;
    Ok(PearsonDf {
        value: raw.max(1.0),
        raw,
        floored,
    })
}

/// `Z` for per-group index pairs `(first[i], second[i])`.
pub fn z_vector(sample: &GroupedSample, first: &[usize], second: &[usize]) -> Result<Vector> {
    let design = sample.design();
    let a = design.groups();
    if first.len() != a || second.len() != a {
        return Err(Error::InvalidTuple(format!("expected one index per group ({a})")));
    }
    let offsets = design.dim_offsets();
    let mut z = Vector::zeros(design.total_dim());
    for i in 0..a {
        let n = design.sizes()[i];
        let (l1, l2) = (first[i], second[i]);
        if l1 >= n || l2 >= n {
            return Err(Error::InvalidTuple(format!("index out of range for group {i} (n = {n})")));
        }
        if l1 == l2 {
            return Err(Error::InvalidTuple(format!("equal indices {l1} in group {i}")));
        }
        let scale = design.weight(i).sqrt();
        let x = sample.group(i);
        for c in 0..design.dims()[i] {
            z[offsets[i] + c] = scale * (x[(l1, c)] - x[(l2, c)]);
        }
    }
    Ok(z)
}

/// Normalized kernel at one index tuple.
pub fn kernel_at(gram: &ContrastGram, tuple: &IndexTuple) -> Result<f64> {
    let design = gram.design();
    for i in 0..design.groups() {
        if tuple.group(i).iter().any(|&v| v >= design.sizes()[i]) {
            return Err(Error::InvalidTuple(format!("tuple does not fit group {i}")));
        }
    }
    let order = tuple.order();
    let global: Vec<Slots> = tuple
        .slots()
        .iter()
        .enumerate()
        .map(|(i, s)| gram.globalize(i, s, order.width()))
        .collect();
    Ok(gram.kernel(order, &global))
}

fn full_for(sample: &GroupedSample, t: &BlockMatrix, order: TraceOrder) -> Result<f64> {
    a_full(&ContrastGram::new(sample, t)?, order, DEFAULT_ENUMERATION_CAP)
}

pub fn a1_full(sample: &GroupedSample, t: &BlockMatrix) -> Result<f64> {
    full_for(sample, t, TraceOrder::First)
}

pub fn a2_full(sample: &GroupedSample, t: &BlockMatrix) -> Result<f64> {
    full_for(sample, t, TraceOrder::Second)
}

pub fn a3_full(sample: &GroupedSample, t: &BlockMatrix) -> Result<f64> {
    full_for(sample, t, TraceOrder::Third)
}

/// The third trace is optional: a design too small or too large for it
/// yields `None` and a note instead of an error.
fn optional_third(result: Result<f64>, notes: &mut Vec<String>) -> Result<Option<f64>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::InvalidDesign(_) | Error::EnumerationCap { .. })) => {
            notes.push(format!("t3 unavailable: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn a_estimates(gram: &ContrastGram, cap: u64) -> Result<TraceEstimates> {
    let t1 = a_full(gram, TraceOrder::First, cap)?;
    let t2 = a_full(gram, TraceOrder::Second, cap)?;
    let mut notes = Vec::new();
    let t3 = optional_third(a_full(gram, TraceOrder::Third, cap), &mut notes)?;
    Ok(TraceEstimates {
        family: Family::A,
        t1,
        t2,
        t3,
        upsilon: UpsilonRecord::Exhaustive,
        notes,
    })
}

pub fn a_star_estimates(gram: &ContrastGram, upsilon: [usize; 3], source: &IndexSource, cap: u64) -> Result<TraceEstimates> {
    let t1 = a_star(gram, TraceOrder::First, upsilon[0], source, cap)?;
    let t2 = a_star(gram, TraceOrder::Second, upsilon[1], source, cap)?;
    let mut notes = Vec::new();
    let t3 = optional_third(a_star(gram, TraceOrder::Third, upsilon[2], source, cap), &mut notes)?;
    let upsilon = match source {
        IndexSource::Exhaustive => UpsilonRecord::Exhaustive,
        IndexSource::Random(_) => UpsilonRecord::Subsamples { per_order: upsilon },
    };
    Ok(TraceEstimates {
        family: Family::AStar,
        t1,
        t2,
        t3,
        upsilon,
        notes,
    })
}

/// `B_1..B_3` over the first `upsilon` repetitions of `perms`.
pub fn b_estimators(gram: &ContrastGram, perms: &PermutationSet, upsilon: usize, cap: u64) -> Result<TraceEstimates> {
    let t1 = b_full(gram, TraceOrder::First, perms, upsilon, cap)?;
    let t2 = b_full(gram, TraceOrder::Second, perms, upsilon, cap)?;
    let mut notes = Vec::new();
    let t3 = optional_third(b_full(gram, TraceOrder::Third, perms, upsilon, cap), &mut notes)?;
    Ok(TraceEstimates {
        family: Family::B,
        t1,
        t2,
        t3,
        upsilon: UpsilonRecord::Permutations { count: upsilon },
        notes,
    })
}

/// `B★_1..B★_3`; order `k` uses the first `upsilon1[k]` repetitions of `perms`.
pub fn b_star_estimates(
    gram: &ContrastGram,
    perms: &PermutationSet,
    upsilon1: [usize; 3],
    upsilon2: usize,
    source: &IndexSource,
    cap: u64,
) -> Result<TraceEstimates> {
    let t1 = b_star(gram, TraceOrder::First, perms, upsilon1[0], upsilon2, source, cap)?;
    let t2 = b_star(gram, TraceOrder::Second, perms, upsilon1[1], upsilon2, source, cap)?;
    let mut notes = Vec::new();
    let t3 = optional_third(
        b_star(gram, TraceOrder::Third, perms, upsilon1[2], upsilon2, source, cap),
        &mut notes,
    )?;
    let upsilon = match source {
        IndexSource::Exhaustive => UpsilonRecord::Exhaustive,
        IndexSource::Random(_) => UpsilonRecord::PermutationsAndSubsamples {
            permutations: upsilon1,
            subsamples: upsilon2,
        },
    };
    Ok(TraceEstimates {
        family: Family::BStar,
        t1,
        t2,
        t3,
        upsilon,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{scenario_a_matrix, scenario_b_matrix};
    use crate::linalg::Matrix;
    use crate::model::StudyDesign;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(dims: &[usize], sizes: &[usize], seed: u64) -> GroupedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = dims
            .iter()
            .zip(sizes)
            .map(|(&d, &n)| Matrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0)))
            .collect();
        GroupedSample::from_groups(groups).unwrap()
    }

    fn random_projection(design: &StudyDesign, rank: usize, seed: u64) -> BlockMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = Matrix::from_fn(rank, design.total_dim(), |_, _| rng.random_range(-1.0..1.0));
        crate::hypothesis::projection_from_h(&h, design).unwrap()
    }

    /// Ordered distinct tuples of `{0..n}` satisfying the admissible pair constraint.
    fn brute_tuples(order: TraceOrder, n: usize) -> Vec<Vec<usize>> {
        let k = order.width();
        let mut out = Vec::new();
        let mut idx = vec![0usize; k];
        loop {
            let distinct = (0..k).all(|a| (0..a).all(|b| idx[a] != idx[b]));
            let ordered = match order {
                TraceOrder::First => idx[0] < idx[1],
                TraceOrder::Second => idx[0] < idx[1] && idx[2] < idx[3],
                TraceOrder::Third => true,
            };
            if distinct && ordered {
                out.push(idx.clone());
            }
            let mut pos = k;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// Kernel average computed from explicit `Z` vectors and the dense `T`.
    fn brute_a(sample: &GroupedSample, t: &BlockMatrix, order: TraceOrder) -> f64 {
        let design = sample.design();
        let lists: Vec<Vec<Vec<usize>>> = design.sizes().iter().map(|&n| brute_tuples(order, n)).collect();
        let mut cursor = vec![0usize; lists.len()];
        let (mut acc, mut count) = (0.0, 0.0);
        loop {
            let pick: Vec<&Vec<usize>> = cursor.iter().zip(&lists).map(|(&c, l)| &l[c]).collect();
            let z: Vec<Vector> = (0..order.pairs())
                .map(|p| {
                    let first: Vec<usize> = pick.iter().map(|s| s[2 * p]).collect();
                    let second: Vec<usize> = pick.iter().map(|s| s[2 * p + 1]).collect();
                    z_vector(sample, &first, &second).unwrap()
                })
                .collect();
            let form = |p: usize, q: usize| (z[p].transpose() * t.matrix() * &z[q])[(0, 0)];
            acc += match order {
                TraceOrder::First => form(0, 0) / 2.0,
                TraceOrder::Second => form(0, 1).powi(2) / 4.0,
                TraceOrder::Third => form(0, 1) * form(1, 2) * form(2, 0) / 8.0,
            };
            count += 1.0;
            let mut g = lists.len();
            loop {
                if g == 0 {
                    return acc / count;
                }
                g -= 1;
                cursor[g] += 1;
                if cursor[g] < lists[g].len() {
                    break;
                }
                cursor[g] = 0;
            }
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn z_vector_examples() {
        let sample = random_sample(&[2, 3], &[3, 4], 1);
        let z = z_vector(&sample, &[0, 1], &[2, 3]).unwrap();
        let swapped = z_vector(&sample, &[2, 3], &[0, 1]).unwrap();
        assert!((z.clone() + swapped).amax() == 0.0);
        assert!((z[0] - (7.0f64 / 3.0).sqrt() * (sample.group(0)[(0, 0)] - sample.group(0)[(2, 0)])).abs() < 1e-14);
        assert!(z_vector(&sample, &[0, 1], &[0, 3]).is_err());

        let one = GroupedSample::from_groups(vec![Matrix::from_row_slice(2, 2, &[1.0, 5.0, 4.0, 1.0])]).unwrap();
        let z = z_vector(&one, &[0], &[1]).unwrap();
        assert_eq!(z.as_slice(), &[-3.0, 4.0]);

        let flat = GroupedSample::from_groups(vec![Matrix::from_element(3, 2, 0.7), Matrix::from_element(4, 1, 2.0)]).unwrap();
        assert_eq!(z_vector(&flat, &[0, 1], &[2, 3]).unwrap().amax(), 0.0);
    }

    #[test]
    fn kernel_at_matches_z_vectors() {
        let sample = random_sample(&[2, 3], &[6, 7], 5);
        let t = random_projection(sample.design(), 2, 6);
        let gram = ContrastGram::new(&sample, &t).unwrap();
        let tuple = IndexTuple::new(sample.design(), vec![vec![0, 3, 5, 1, 2, 4], vec![6, 1, 2, 0, 3, 5]]).unwrap();
        let z: Vec<Vector> = (0..3)
            .map(|p| {
                let first = [tuple.group(0)[2 * p], tuple.group(1)[2 * p]];
                let second = [tuple.group(0)[2 * p + 1], tuple.group(1)[2 * p + 1]];
                z_vector(&sample, &first, &second).unwrap()
            })
            .collect();
        let form = |p: usize, q: usize| (z[p].transpose() * t.matrix() * &z[q])[(0, 0)];
        let expected = form(0, 1) * form(1, 2) * form(2, 0) / 8.0;
        assert!(close(kernel_at(&gram, &tuple).unwrap(), expected, 1e-12));
    }

    #[test]
    fn a1_scalar_hand_enumeration() {
        let x = [1.5, -0.25, 3.0, 0.5];
        let sample = GroupedSample::from_groups(vec![Matrix::from_column_slice(4, 1, &x)]).unwrap();
        let t = BlockMatrix::new(sample.design().clone(), Matrix::identity(1, 1)).unwrap();
        let mut s = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                s += (x[a] - x[b]) * (x[a] - x[b]);
            }
        }
        let expected = 1.0 * s / (2.0 * 6.0);
        assert!((a1_full(&sample, &t).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn full_estimators_match_explicit_z_oracle() {
        let cases: &[(&[usize], &[usize], TraceOrder)] = &[
            (&[2, 3], &[4, 5], TraceOrder::First),
            (&[2, 3], &[4, 5], TraceOrder::Second),
            (&[1, 2, 2], &[4, 4, 5], TraceOrder::First),
            (&[1, 2, 2], &[4, 5, 4], TraceOrder::Second),
            (&[3], &[7], TraceOrder::Third),
            (&[2, 2], &[6, 6], TraceOrder::Third),
        ];
        for (k, &(dims, sizes, order)) in cases.iter().enumerate() {
            let sample = random_sample(dims, sizes, 10 + k as u64);
            let t = random_projection(sample.design(), 2, 20 + k as u64);
            let gram = ContrastGram::new(&sample, &t).unwrap();
            let fast = a_full(&gram, order, DEFAULT_ENUMERATION_CAP).unwrap();
            let slow = brute_a(&sample, &t, order);
            assert!(close(fast, slow, 1e-10), "{dims:?} {sizes:?} {order:?}: {fast} vs {slow}");
        }
    }

    #[test]
    fn exhaustive_sources_reproduce_full_estimators() {
        let designs: &[(&[usize], &[usize])] = &[(&[2, 3], &[6, 6]), (&[3, 1], &[6, 5]), (&[1, 1, 2], &[4, 4, 5])];
        for (k, &(dims, sizes)) in designs.iter().enumerate() {
            let sample = random_sample(dims, sizes, 30 + k as u64);
            let t = random_projection(sample.design(), 2, 40 + k as u64);
            let gram = ContrastGram::new(&sample, &t).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(50 + k as u64);
            let perms = PermutationSet::random(sample.design(), 3, &mut rng);
            for order in TraceOrder::ALL {
                if sizes.iter().any(|&n| n < order.width()) {
                    continue;
                }
                let full = a_full(&gram, order, u64::MAX).unwrap();
                let star = a_star(&gram, order, 1, &IndexSource::Exhaustive, u64::MAX).unwrap();
                assert!(close(full, star, 1e-10), "A {order:?}: {full} vs {star}");
                let full = b_full(&gram, order, &perms, 3, u64::MAX).unwrap();
                let star = b_star(&gram, order, &perms, 3, 1, &IndexSource::Exhaustive, u64::MAX).unwrap();
                assert!(close(full, star, 1e-10), "B {order:?}: {full} vs {star}");
            }
        }
    }

    #[test]
    fn single_group_identity_b_equals_a() {
        let sample = random_sample(&[3], &[7], 60);
        let t = random_projection(sample.design(), 2, 61);
        let gram = ContrastGram::new(&sample, &t).unwrap();
        let perms = PermutationSet::identity(sample.design(), 1);
        for order in TraceOrder::ALL {
            let a = a_full(&gram, order, u64::MAX).unwrap();
            let b = b_full(&gram, order, &perms, 1, u64::MAX).unwrap();
            assert!(close(a, b, 1e-12), "{order:?}");
        }
    }

    #[test]
    fn balanced_identity_b1_is_same_index_restriction() {
        let sample = random_sample(&[2, 2], &[6, 6], 62);
        let t = random_projection(sample.design(), 3, 63);
        let gram = ContrastGram::new(&sample, &t).unwrap();
        let perms = PermutationSet::identity(sample.design(), 1);
        let mut acc = 0.0;
        let mut count = 0.0;
        for l1 in 0..6 {
            for l2 in (l1 + 1)..6 {
                let z = z_vector(&sample, &[l1, l1], &[l2, l2]).unwrap();
                acc += (z.transpose() * t.matrix() * &z)[(0, 0)] / 2.0;
                count += 1.0;
            }
        }
        let b1 = b_full(&gram, TraceOrder::First, &perms, 1, u64::MAX).unwrap();
        assert!(close(b1, acc / count, 1e-12));
    }

    #[test]
    fn constant_data_gives_zero() {
        let sample = GroupedSample::from_groups(vec![Matrix::from_element(6, 2, 1.3), Matrix::from_element(7, 3, -4.0)]).unwrap();
        let t = scenario_b_matrix(sample.design()).unwrap();
        let gram = ContrastGram::new(&sample, &t).unwrap();
        let a = a_estimates(&gram, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!((a.t1, a.t2, a.t3), (0.0, 0.0, Some(0.0)));
        let perms = PermutationSet::identity(sample.design(), 2);
        let b = b_estimators(&gram, &perms, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!((b.t1, b.t2, b.t3), (0.0, 0.0, Some(0.0)));
        let src = IndexSource::Random(RngStream::new(1, 0));
        let s = a_star_estimates(&gram, [5, 5, 5], &src, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!((s.t1, s.t2, s.t3), (0.0, 0.0, Some(0.0)));
        let s = b_star_estimates(&gram, &perms, [1, 2, 2], 4, &src, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!((s.t1, s.t2, s.t3), (0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn size_and_cap_errors() {
        let sample = random_sample(&[2, 2], &[3, 5], 70);
        let t = scenario_a_matrix(sample.design()).unwrap();
        let gram = ContrastGram::new(&sample, &t).unwrap();
        assert!(matches!(a_full(&gram, TraceOrder::Second, u64::MAX), Err(Error::InvalidDesign(_))));
        let perms = PermutationSet::identity(sample.design(), 1);
        assert!(matches!(b_full(&gram, TraceOrder::Second, &perms, 1, u64::MAX), Err(Error::InvalidDesign(_))));
        assert!(matches!(
            a_full(&gram, TraceOrder::First, 5),
            Err(Error::EnumerationCap { required: 30, cap: 5 })
        ));
        let est = a_estimates(&ContrastGram::new(&random_sample(&[2, 2], &[4, 5], 71), &t).unwrap(), u64::MAX).unwrap();
        assert!(est.t3.is_none() && est.notes.len() == 1);
    }

    #[test]
    fn subsampled_estimates_are_reproducible() {
        let sample = random_sample(&[2, 3], &[8, 9], 80);
        let t = random_projection(sample.design(), 2, 81);
        let gram = ContrastGram::new(&sample, &t).unwrap();
        let src = IndexSource::Random(RngStream::new(5, 3));
        let a = a_star_estimates(&gram, [50, 50, 50], &src, DEFAULT_ENUMERATION_CAP).unwrap();
        let b = a_star_estimates(&gram, [50, 50, 50], &src, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(a, b);
        let other = IndexSource::Random(RngStream::new(5, 4));
        let c = a_star_estimates(&gram, [50, 50, 50], &other, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_ne!(a.t1, c.t1);
    }

    #[test]
    fn fhat_examples() {
        let mut est = TraceEstimates {
            family: Family::Exact,
            t1: 3.0,
            t2: 4.0,
            t3: Some(8.0),
            upsilon: UpsilonRecord::None,
            notes: vec![],
        };
        // a single eigenvalue 2, then five eigenvalues 1
        let f = fhat_pearson(&est).unwrap();
        assert_eq!((f.value, f.floored), (1.0, false));
        est.t2 = 5.0;
        est.t3 = Some(5.0);
        assert_eq!(fhat_pearson(&est).unwrap().value, 5.0);
        est.t2 = 0.5;
        let f = fhat_pearson(&est).unwrap();
        assert!(f.floored && f.value == 1.0 && f.raw == 0.125 / 25.0);
        est.t3 = Some(-5.0);
        assert_eq!(fhat_pearson(&est).unwrap().raw, 0.125 / 25.0);
        est.t3 = Some(0.0);
        assert!(matches!(fhat_pearson(&est), Err(Error::Degenerate(_))));
        est.t3 = None;
        assert!(fhat_pearson(&est).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn translation_invariance(seed in 0u64..1000, c0 in -5.0f64..5.0, c1 in -5.0f64..5.0) {
            let sample = random_sample(&[2, 3], &[6, 7], seed);
            let t = random_projection(sample.design(), 2, seed + 1);
            let shifted = sample.map_values(|g, col, v| v + if g == 0 { c0 } else { c1 * (col as f64 + 1.0) });
            let g1 = ContrastGram::new(&sample, &t).unwrap();
            let g2 = ContrastGram::new(&shifted, &t).unwrap();
            let perms = PermutationSet::identity(sample.design(), 1);
            let src = IndexSource::Random(RngStream::new(seed, 0));
            let pairs = [
                (a_estimates(&g1, u64::MAX).unwrap(), a_estimates(&g2, u64::MAX).unwrap()),
                (b_estimators(&g1, &perms, 1, u64::MAX).unwrap(), b_estimators(&g2, &perms, 1, u64::MAX).unwrap()),
                (a_star_estimates(&g1, [20; 3], &src, u64::MAX).unwrap(), a_star_estimates(&g2, [20; 3], &src, u64::MAX).unwrap()),
            ];
            for (x, y) in pairs {
                prop_assert!(close(x.t1, y.t1, 1e-10));
                prop_assert!(close(x.t2, y.t2, 1e-10));
                prop_assert!(close(x.t3.unwrap(), y.t3.unwrap(), 1e-10));
            }
        }

        #[test]
        fn scale_equivariance(seed in 0u64..1000, c in 0.1f64..10.0) {
            let sample = random_sample(&[3, 2], &[6, 6], seed);
            let t = random_projection(sample.design(), 3, seed + 7);
            let scaled = sample.map_values(|_, _, v| c * v);
            let x = a_estimates(&ContrastGram::new(&sample, &t).unwrap(), u64::MAX).unwrap();
            let y = a_estimates(&ContrastGram::new(&scaled, &t).unwrap(), u64::MAX).unwrap();
            prop_assert!(close(y.t1, c.powi(2) * x.t1, 1e-10));
            prop_assert!(close(y.t2, c.powi(4) * x.t2, 1e-10));
            prop_assert!(close(y.t3.unwrap(), c.powi(6) * x.t3.unwrap(), 1e-10));
        }
    }
}
