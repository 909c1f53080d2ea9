use crate::error::{Error, Result};
use crate::rng::Lane;

use super::gram::{combine, form_pairs, ContrastGram};
use super::tuples::{admissible_count, admissible_tuples, canonical_tuples, draw_admissible, orbit_size, Slots, TraceOrder};
use super::IndexSource;

pub(crate) fn require_sizes(gram: &ContrastGram, order: TraceOrder) -> Result<()> {
    let need = order.width();
    if let Some((i, &n)) = gram.design().sizes().iter().enumerate().find(|(_, &n)| n < need) {
        return Err(Error::InvalidDesign(format!(
            "{order:?}-order estimator needs n_i >= {need}, group {i} has {n}"
        )));
    }
    Ok(())
}

fn check_cap(required: u128, cap: u64) -> Result<()> {
    if required > cap as u128 {
        return Err(Error::EnumerationCap { required, cap });
    }
    Ok(())
}

/// Kernel evaluations the exact A estimator performs.
pub fn a_full_cost(sizes: &[usize], order: TraceOrder) -> u128 {
    let reduced = reduced_group(sizes, order);
    let mut cost = admissible_count(order, sizes[reduced]) / orbit_size(order);
    for (i, &n) in sizes.iter().enumerate() {
        if i != reduced {
            cost = cost.saturating_mul(admissible_count(order, n));
        }
    }
    cost
}

fn reduced_group(sizes: &[usize], order: TraceOrder) -> usize {
    (0..sizes.len())
        .max_by_key(|&i| (admissible_count(order, sizes[i]), std::cmp::Reverse(i)))
        .unwrap_or(0)
}

struct Enumerator<'a> {
    gram: &'a ContrastGram,
    order: TraceOrder,
    /// Groups other than the reduced one, with their global tuple lists and within-group forms.
    lists: Vec<Vec<Slots>>,
    within: Vec<Vec<[f64; 3]>>,
}

impl Enumerator<'_> {
    fn within_forms(&self, s: &Slots) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, &(p, q)) in form_pairs(self.order).iter().enumerate() {
            out[k] = self.gram.cross(s[2 * p], s[2 * p + 1], s[2 * q], s[2 * q + 1]);
        }
        out
    }

    fn descend(&self, level: usize, chosen: &mut Vec<Slots>, partial: [f64; 3], h: &[Vec<f64>], acc: &mut f64) {
        if level == self.lists.len() {
            *acc += combine(self.order, &partial);
            return;
        }
        let pairs = form_pairs(self.order);
        for (s, w) in self.lists[level].iter().zip(&self.within[level]) {
            let mut m = partial;
            for (k, &(p, q)) in pairs.iter().enumerate() {
                let mut v = w[k];
                v += h[p][s[2 * q]] - h[p][s[2 * q + 1]] + h[q][s[2 * p]] - h[q][s[2 * p + 1]];
                for prev in chosen.iter() {
                    v += self.gram.cross(prev[2 * p], prev[2 * p + 1], s[2 * q], s[2 * q + 1])
                        + self.gram.cross(prev[2 * q], prev[2 * q + 1], s[2 * p], s[2 * p + 1]);
                }
                m[k] += v;
            }
            chosen.push(*s);
            self.descend(level + 1, chosen, m, h, acc);
            chosen.pop();
        }
    }
}

/// Full U-statistic `A_k` over every admissible index combination.
///
/// Only one orbit representative is visited in the group with the most
/// combinations; `cap` bounds the kernel evaluations after that reduction.
pub fn a_full(gram: &ContrastGram, order: TraceOrder, cap: u64) -> Result<f64> {
    require_sizes(gram, order)?;
    let sizes = gram.design().sizes().to_vec();
    check_cap(a_full_cost(&sizes, order), cap)?;

    let reduced = reduced_group(&sizes, order);
    let width = order.width();
    let (canon, weight) = canonical_tuples(order, sizes[reduced]);
    let mut e = Enumerator {
        gram,
        order,
        lists: Vec::new(),
        within: Vec::new(),
    };
    for (i, &n) in sizes.iter().enumerate() {
        if i == reduced {
            continue;
        }
        let list: Vec<Slots> = admissible_tuples(order, n)
            .iter()
            .map(|s| gram.globalize(i, s, width))
            .collect();
        let within = list.iter().map(|s| e.within_forms(s)).collect();
        e.lists.push(list);
        e.within.push(within);
    }

    let pairs = order.pairs();
    let n_total = gram.design().total_size();
    let mut h = vec![vec![0.0; n_total]; pairs];
    let mut chosen = Vec::with_capacity(sizes.len());
    let mut acc = 0.0;
    for local in &canon {
        let s = gram.globalize(reduced, local, width);
        for (p, hp) in h.iter_mut().enumerate() {
            let (ra, rb) = (gram.row(s[2 * p]), gram.row(s[2 * p + 1]));
            for ((v, a), b) in hp.iter_mut().zip(ra).zip(rb) {
                *v = a - b;
            }
        }
        let start = e.within_forms(&s);
        e.descend(0, &mut chosen, start, &h, &mut acc);
    }
    let total: f64 = sizes.iter().map(|&n| admissible_count(order, n) as f64).product();
    Ok(weight * acc / total)
}

/// `A★_k`: the `A_k` kernel averaged over `upsilon` random admissible
/// combinations, or over all of them when the source is exhaustive.
pub fn a_star(gram: &ContrastGram, order: TraceOrder, upsilon: usize, source: &IndexSource, cap: u64) -> Result<f64> {
    require_sizes(gram, order)?;
    let sizes = gram.design().sizes();
    let width = order.width();
    match source {
        IndexSource::Exhaustive => {
            let required = sizes
                .iter()
                .fold(1u128, |acc, &n| acc.saturating_mul(admissible_count(order, n)));
            check_cap(required, cap)?;
            let lists: Vec<Vec<Slots>> = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    admissible_tuples(order, n)
                        .iter()
                        .map(|s| gram.globalize(i, s, width))
                        .collect()
                })
                .collect();
            let mut cursor = vec![0usize; sizes.len()];
            let mut global: Vec<Slots> = lists.iter().map(|l| l[0]).collect();
            let mut acc = 0.0;
            'outer: loop {
                acc += gram.kernel(order, &global);
                for i in (0..sizes.len()).rev() {
                    cursor[i] += 1;
                    if cursor[i] < lists[i].len() {
                        global[i] = lists[i][cursor[i]];
                        continue 'outer;
                    }
                    cursor[i] = 0;
                    global[i] = lists[i][0];
                }
                break;
            }
            Ok(acc / required as f64)
        }
        IndexSource::Random(stream) => {
            if upsilon == 0 {
                return Err(Error::Domain("subsample count must be positive".into()));
            }
            let mut rng = stream.rng(Lane::Indices(order.index() as u32));
            let mut scratch: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
            let mut global: Vec<Slots> = vec![[0; 6]; sizes.len()];
            let mut acc = 0.0;
            for _ in 0..upsilon {
                for (i, &n) in sizes.iter().enumerate() {
                    let s = draw_admissible(order, n, &mut rng, &mut scratch[i]);
                    global[i] = gram.globalize(i, &s, width);
                }
                acc += gram.kernel(order, &global);
            }
            Ok(acc / upsilon as f64)
        }
    }
}
