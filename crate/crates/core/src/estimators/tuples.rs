//! Index tuples, admissible index sets and within-group permutations.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StudyDesign;

/// Which trace a kernel estimates: `tr(TV)`, `tr((TV)²)` or `tr((TV)³)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceOrder {
    First,
    Second,
    Third,
}

impl TraceOrder {
    pub const ALL: [TraceOrder; 3] = [TraceOrder::First, TraceOrder::Second, TraceOrder::Third];

    /// Number of observation indices a kernel needs per group.
    pub fn width(self) -> usize {
        2 * self.pairs()
    }

    /// Number of difference vectors `Z` in the kernel.
    pub fn pairs(self) -> usize {
        match self {
            TraceOrder::First => 1,
            TraceOrder::Second => 2,
            TraceOrder::Third => 3,
        }
    }

    pub fn index(self) -> usize {
        self.pairs() - 1
    }
}

/// Indices of one kernel evaluation within one group; only the first
/// `order.width()` slots are used.
pub type Slots = [usize; 6];

fn falling_factorial(n: usize, k: usize) -> u128 {
    if n < k {
        return 0;
    }
    ((n - k + 1)..=n).map(|v| v as u128).product()
}

/// Size of the per-group admissible index set: `C(n,2)`, `6·C(n,4)` or `n!/(n−6)!`.
pub fn admissible_count(order: TraceOrder, n: usize) -> u128 {
    match order {
        TraceOrder::First => falling_factorial(n, 2) / 2,
        TraceOrder::Second => falling_factorial(n, 4) / 4,
        TraceOrder::Third => falling_factorial(n, 6),
    }
}

/// Pair orientation constraint of the admissible sets.
fn is_admissible(order: TraceOrder, s: &[usize]) -> bool {
    match order {
        TraceOrder::First => s[0] < s[1],
        TraceOrder::Second => s[0] < s[1] && s[2] < s[3],
        TraceOrder::Third => true,
    }
}

fn ordered_distinct(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], visit: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            visit(cur);
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                rec(n, k, cur, used, visit);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut used = vec![false; n];
    rec(n, k, &mut Vec::with_capacity(k), &mut used, &mut visit);
}

fn to_slots(s: &[usize]) -> Slots {
    let mut out = [0; 6];
    out[..s.len()].copy_from_slice(s);
    out
}

/// Every admissible tuple of `{0..n}` for `order`, in lexicographic order.
pub fn admissible_tuples(order: TraceOrder, n: usize) -> Vec<Slots> {
    let mut out = Vec::new();
    ordered_distinct(n, order.width(), |s| {
        if is_admissible(order, s) {
            out.push(to_slots(s));
        }
    });
    out
}

/// Number of admissible tuples sharing one kernel value by symmetry.
pub fn orbit_size(order: TraceOrder) -> u128 {
    match order {
        TraceOrder::First => 1,
        TraceOrder::Second => 2,
        TraceOrder::Third => 48,
    }
}

/// One representative per orbit of the kernel's symmetry group, with the orbit size.
///
/// The kernel is invariant under reordering its difference vectors and, for the
/// third order, under flipping a vector's sign. Representatives keep each pair
/// increasing and the pairs sorted by their first index.
pub fn canonical_tuples(order: TraceOrder, n: usize) -> (Vec<Slots>, f64) {
    let mut out = Vec::new();
    match order {
        TraceOrder::First => {
            ordered_distinct(n, 2, |s| {
                if s[0] < s[1] {
                    out.push(to_slots(s));
                }
            });
        }
        TraceOrder::Second => {
            ordered_distinct(n, 4, |s| {
                if s[0] < s[1] && s[2] < s[3] && s[0] < s[2] {
                    out.push(to_slots(s));
                }
            });
        }
        TraceOrder::Third => {
            ordered_distinct(n, 6, |s| {
                if s[0] < s[1] && s[2] < s[3] && s[4] < s[5] && s[0] < s[2] && s[2] < s[4] {
                    out.push(to_slots(s));
                }
            });
        }
    }
    (out, orbit_size(order) as f64)
}

/// Uniform draw from the admissible set of `{0..n}`; `scratch` is reused between calls.
pub fn draw_admissible(order: TraceOrder, n: usize, rng: &mut impl Rng, scratch: &mut Vec<usize>) -> Slots {
    if scratch.len() != n {
        scratch.clear();
        scratch.extend(0..n);
    }
    let k = order.width();
    let (picked, _) = scratch.partial_shuffle(rng, k);
    let mut s = to_slots(picked);
    if order != TraceOrder::Third {
        for p in 0..order.pairs() {
            if s[2 * p] > s[2 * p + 1] {
                s.swap(2 * p, 2 * p + 1);
            }
        }
    }
    s
}

/// Per group, an ordered list of distinct observation indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTuple {
    groups: Vec<Vec<usize>>,
}

impl IndexTuple {
    pub fn new(design: &StudyDesign, groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.len() != design.groups() {
            return Err(Error::InvalidTuple(format!(
                "{} groups in tuple, design has {}",
                groups.len(),
                design.groups()
            )));
        }
        let m = groups[0].len();
        if !matches!(m, 2 | 4 | 6) {
            return Err(Error::InvalidTuple(format!("tuple length {m} is not 2, 4 or 6")));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.len() != m {
                return Err(Error::InvalidTuple("groups use different tuple lengths".into()));
            }
            let n = design.sizes()[i];
            if let Some(&bad) = g.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidTuple(format!("index {bad} out of range for group {i} (n = {n})")));
            }
            let mut sorted = g.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidTuple(format!("repeated index in group {i}")));
            }
        }
        Ok(IndexTuple { groups })
    }

    pub fn order(&self) -> TraceOrder {
        match self.groups[0].len() {
            2 => TraceOrder::First,
            4 => TraceOrder::Second,
            _ => TraceOrder::Third,
        }
    }

    pub fn group(&self, i: usize) -> &[usize] {
        &self.groups[i]
    }

    pub(crate) fn slots(&self) -> Vec<Slots> {
        self.groups.iter().map(|g| to_slots(g)).collect()
    }
}

/// `Υ` repetitions of one permutation of `{0..n_i}` per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSet {
    reps: Vec<Vec<Vec<usize>>>,
}

impl PermutationSet {
    pub fn new(design: &StudyDesign, reps: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        for (j, rep) in reps.iter().enumerate() {
            if rep.len() != design.groups() {
                return Err(Error::InvalidTuple(format!("repetition {j} has {} groups", rep.len())));
            }
            for (i, perm) in rep.iter().enumerate() {
                let n = design.sizes()[i];
                let mut seen = vec![false; n];
                let ok = perm.len() == n
                    && perm.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true));
                if !ok {
                    return Err(Error::InvalidTuple(format!(
                        "repetition {j}, group {i} is not a permutation of 0..{n}"
                    )));
                }
            }
        }
        Ok(PermutationSet { reps })
    }

    pub fn identity(design: &StudyDesign, count: usize) -> Self {
        let rep: Vec<Vec<usize>> = design.sizes().iter().map(|&n| (0..n).collect()).collect();
        PermutationSet {
            reps: vec![rep; count],
        }
    }

    pub fn random(design: &StudyDesign, count: usize, rng: &mut impl Rng) -> Self {
        let reps = (0..count)
            .map(|_| {
                design
                    .sizes()
                    .iter()
                    .map(|&n| {
                        let mut p: Vec<usize> = (0..n).collect();
                        p.shuffle(rng);
                        p
                    })
                    .collect()
            })
            .collect();
        PermutationSet { reps }
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn get(&self, rep: usize, group: usize) -> &[usize] {
        &self.reps[rep][group]
    }
}
