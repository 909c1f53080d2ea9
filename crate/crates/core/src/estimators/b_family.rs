use crate::error::{Error, Result};
use crate::rng::Lane;

use super::gram::ContrastGram;
use super::tuples::{admissible_count, admissible_tuples, canonical_tuples, draw_admissible, PermutationSet, Slots, TraceOrder};
use super::IndexSource;

fn require_min_size(gram: &ContrastGram, order: TraceOrder) -> Result<usize> {
    let n_min = gram.design().min_size();
    let need = order.width();
    if n_min < need {
        return Err(Error::InvalidDesign(format!(
            "{order:?}-order B estimator needs n_min >= {need}, got {n_min}"
        )));
    }
    Ok(n_min)
}

fn check_perms(gram: &ContrastGram, perms: &PermutationSet, needed: usize) -> Result<()> {
    if needed == 0 {
        return Err(Error::Domain("permutation count must be positive".into()));
    }
    if perms.len() < needed {
        return Err(Error::Domain(format!(
            "{needed} permutations requested, {} supplied",
            perms.len()
        )));
    }
    for i in 0..gram.design().groups() {
        if perms.get(0, i).len() != gram.design().sizes()[i] {
            return Err(Error::Structural("permutation set does not match the design".into()));
        }
    }
    Ok(())
}

#[inline]
fn map_shared(gram: &ContrastGram, perms: &PermutationSet, rep: usize, shared: &Slots, width: usize, out: &mut [Slots]) {
    for (i, slot) in out.iter_mut().enumerate() {
        let perm = perms.get(rep, i);
        let off = gram.offsets()[i];
        for k in 0..width {
            slot[k] = off + perm[shared[k]];
        }
    }
}

/// `B_k`: shared indices from `{0..n_min}` mapped into each group through the
/// permutations, averaged over every admissible shared tuple and over the
/// first `upsilon` permutation repetitions.
pub fn b_full(gram: &ContrastGram, order: TraceOrder, perms: &PermutationSet, upsilon: usize, cap: u64) -> Result<f64> {
    let n_min = require_min_size(gram, order)?;
    check_perms(gram, perms, upsilon)?;
    let (canon, weight) = canonical_tuples(order, n_min);
    let required = canon.len() as u128 * upsilon as u128;
    if required > cap as u128 {
        return Err(Error::EnumerationCap { required, cap });
    }
    let width = order.width();
    let mut global = vec![[0usize; 6]; gram.design().groups()];
    let count = admissible_count(order, n_min) as f64;
    let mut total = 0.0;
    for rep in 0..upsilon {
        let mut acc = 0.0;
        for shared in &canon {
            map_shared(gram, perms, rep, shared, width, &mut global);
            acc += gram.kernel(order, &global);
        }
        total += weight * acc / count;
    }
    Ok(total / upsilon as f64)
}

/// `B★_k`: the `B_k` kernel averaged over the first `upsilon1` permutation
/// repetitions and `upsilon2` shared tuples, drawn once and reused across
/// repetitions. An exhaustive source uses every admissible shared tuple.
pub fn b_star(
    gram: &ContrastGram,
    order: TraceOrder,
    perms: &PermutationSet,
    upsilon1: usize,
    upsilon2: usize,
    source: &IndexSource,
    cap: u64,
) -> Result<f64> {
    let n_min = require_min_size(gram, order)?;
    check_perms(gram, perms, upsilon1)?;
    let width = order.width();
    let shared: Vec<Slots> = match source {
        IndexSource::Exhaustive => {
            let required = admissible_count(order, n_min).saturating_mul(upsilon1 as u128);
            if required > cap as u128 {
                return Err(Error::EnumerationCap { required, cap });
            }
            admissible_tuples(order, n_min)
        }
        IndexSource::Random(stream) => {
            if upsilon2 == 0 {
                return Err(Error::Domain("subsample count must be positive".into()));
            }
            let mut rng = stream.rng(Lane::Indices(order.index() as u32));
            let mut scratch = Vec::new();
            (0..upsilon2)
                .map(|_| draw_admissible(order, n_min, &mut rng, &mut scratch))
                .collect()
        }
    };
    let mut global = vec![[0usize; 6]; gram.design().groups()];
    let mut acc = 0.0;
    for rep in 0..upsilon1 {
        for s in &shared {
            map_shared(gram, perms, rep, s, width, &mut global);
            acc += gram.kernel(order, &global);
        }
    }
    Ok(acc / (upsilon1 * shared.len()) as f64)
}
