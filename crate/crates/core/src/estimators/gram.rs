//! Kernel evaluation through the Gram matrix of the scaled observations.
//!
//! With `Y_{i,j} = sqrt(N/n_i)·(X_{i,j} − X̄_i)` stacked into an `N`-row block
//! matrix `Ỹ`, every `Z` vector is `Ỹᵀ c` for a sparse `c` holding `+1`/`−1` at
//! two rows per group. Bilinear forms `Zᵀ T Z'` are therefore sums of entries of
//! `G = Ỹ T Ỹᵀ`, which costs `O(a²)` per kernel instead of `O(D²)`. Centering
//! leaves every `Z` unchanged.

use crate::error::Result;
use crate::hypothesis::BlockMatrix;
use crate::linalg::Matrix;
use crate::model::{GroupedSample, StudyDesign};

use super::tuples::{Slots, TraceOrder};

#[derive(Debug, Clone)]
pub struct ContrastGram {
    design: StudyDesign,
    n: usize,
    /// Row-major `N × N`.
    g: Vec<f64>,
    offsets: Vec<usize>,
}

impl ContrastGram {
    pub fn new(sample: &GroupedSample, t: &BlockMatrix) -> Result<Self> {
        let t = t.with_design(sample.design())?;
        let design = sample.design().clone();
        let dim_off = design.dim_offsets();
        let offsets = design.size_offsets();
        let n = design.total_size();
        let total_dim = design.total_dim();

        let scaled: Vec<Matrix> = (0..design.groups())
            .map(|i| {
                let x = sample.group(i);
                let mean = x.row_mean();
                let mut y = x.clone();
                for mut row in y.row_iter_mut() {
                    row -= &mean;
                }
                y * design.weight(i).sqrt()
            })
            .collect();

        let mut g = vec![0.0; n * n];
        for (i, yi) in scaled.iter().enumerate() {
            let di = design.dims()[i];
            let w = yi * t.matrix().view((dim_off[i], 0), (di, total_dim));
            for (r, yr) in scaled.iter().enumerate() {
                let dr = design.dims()[r];
                let block = w.columns(dim_off[r], dr) * yr.transpose();
                for a in 0..block.nrows() {
                    let row = &mut g[(offsets[i] + a) * n + offsets[r]..][..block.ncols()];
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = block[(a, b)];
                    }
                }
            }
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let s = 0.5 * (g[a * n + b] + g[b * n + a]);
                g[a * n + b] = s;
                g[b * n + a] = s;
            }
        }
        Ok(ContrastGram { design, n, g, offsets })
    }

    pub fn design(&self) -> &StudyDesign {
        &self.design
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub(crate) fn at(&self, r: usize, c: usize) -> f64 {
        self.g[r * self.n + c]
    }

    #[inline]
    pub(crate) fn row(&self, r: usize) -> &[f64] {
        &self.g[r * self.n..(r + 1) * self.n]
    }

    /// `(e_a − e_b)ᵀ G (e_c − e_e)` for global rows.
    #[inline]
    pub(crate) fn cross(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        self.at(a, c) - self.at(a, e) - self.at(b, c) + self.at(b, e)
    }

    /// `Z_pᵀ T Z_q` where `global[i]` holds group `i`'s slots as global row indices.
    pub(crate) fn pair_form(&self, global: &[Slots], p: usize, q: usize) -> f64 {
        let mut acc = 0.0;
        for si in global {
            for sr in global {
                acc += self.cross(si[2 * p], si[2 * p + 1], sr[2 * q], sr[2 * q + 1]);
            }
        }
        acc
    }

    /// Normalized kernel: `ZᵀTZ/2`, `(Z₁ᵀTZ₂)²/4` or the cyclic triple product `/8`.
    pub(crate) fn kernel(&self, order: TraceOrder, global: &[Slots]) -> f64 {
        match order {
            TraceOrder::First => 0.5 * self.pair_form(global, 0, 0),
            TraceOrder::Second => 0.25 * self.pair_form(global, 0, 1).powi(2),
            TraceOrder::Third => {
                0.125
                    * self.pair_form(global, 0, 1)
                    * self.pair_form(global, 1, 2)
                    * self.pair_form(global, 2, 0)
            }
        }
    }

    pub(crate) fn globalize(&self, group: usize, local: &Slots, width: usize) -> Slots {
        let mut s = *local;
        for v in s.iter_mut().take(width) {
            *v += self.offsets[group];
        }
        s
    }
}

/// The `(p, q)` pair forms each kernel multiplies together.
pub(crate) fn form_pairs(order: TraceOrder) -> &'static [(usize, usize)] {
    match order {
        TraceOrder::First => &[(0, 0)],
        TraceOrder::Second => &[(0, 1)],
        TraceOrder::Third => &[(0, 1), (1, 2), (2, 0)],
    }
}

pub(crate) fn combine(order: TraceOrder, forms: &[f64; 3]) -> f64 {
    match order {
        TraceOrder::First => 0.5 * forms[0],
        TraceOrder::Second => 0.25 * forms[0] * forms[0],
        TraceOrder::Third => 0.125 * forms[0] * forms[1] * forms[2],
    }
}
