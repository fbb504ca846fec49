//! Exact brute-force ground truth for small instances.
//!
//! Everything here enumerates the state space explicitly and exists to
//! validate the samplers and estimators. An explicit budget on the number of
//! generated subsets guards against combinatorial blow-up.

use std::collections::BTreeMap;
use std::io::Write;

use crate::dataset::{Dataset, ItemId, KApps};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::index::InvertedIndex;
use crate::rng::Rng;
use crate::sampler::{choose_positions, Sampler};

pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = match r.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    r
}

/// Calls `f` with every `k`-subset of `items` in lexicographic order.
pub fn for_each_subset(items: &[ItemId], k: usize, mut f: impl FnMut(&[ItemId])) {
    let n = items.len();
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<ItemId> = idx.iter().map(|&i| items[i]).collect();
    loop {
        f(&buf);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            buf[j] = items[idx[j]];
        }
    }
}

fn check_budget(data: &Dataset, k: usize, budget: u128) -> Result<()> {
    let needed = data
        .records()
        .iter()
        .fold(0u128, |acc, r| acc.saturating_add(binomial(r.len(), k)));
    if needed > budget {
        return Err(Error::TooLarge { needed, budget });
    }
    Ok(())
}

/// Every `K`-subset occurring in at least one record, with its support.
pub fn enumerate_omega(data: &Dataset, k: usize, budget: u128) -> Result<BTreeMap<KApps, usize>> {
    if k == 0 {
        return Err(Error::InvalidSpec("K must be at least 1".into()));
    }
    check_budget(data, k, budget)?;
    const CHUNK: usize = 256;
    let records = data.records();
    let parts = Execution::default().map(records.len().div_ceil(CHUNK), |c| {
        let mut part: BTreeMap<KApps, usize> = BTreeMap::new();
        for r in &records[c * CHUNK..((c + 1) * CHUNK).min(records.len())] {
            for_each_subset(r.items(), k, |s| {
                *part.entry(KApps::from_sorted(s.to_vec())).or_default() += 1;
            });
        }
        part
    });
    let mut omega = BTreeMap::new();
    for part in parts {
        for (x, c) in part {
            *omega.entry(x).or_default() += c;
        }
    }
    Ok(omega)
}

/// Exact relative abundance distribution as integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactRad {
    /// Number of distinct subsets per support value.
    pub counts: BTreeMap<usize, u64>,
    /// `|Ω^K|`.
    pub total: u64,
}

impl ExactRad {
    pub fn frequency(&self, support: usize) -> f64 {
        self.counts.get(&support).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn frequencies(&self) -> BTreeMap<usize, f64> {
        self.counts.keys().map(|&s| (s, self.frequency(s))).collect()
    }
}

pub fn exact_rad(data: &Dataset, k: usize, budget: u128) -> Result<ExactRad> {
    rad_of(&enumerate_omega(data, k, budget)?)
}

pub fn rad_of(omega: &BTreeMap<KApps, usize>) -> Result<ExactRad> {
    if omega.is_empty() {
        return Err(Error::Undefined);
    }
    let mut counts = BTreeMap::new();
    for &s in omega.values() {
        *counts.entry(s).or_default() += 1;
    }
    Ok(ExactRad { counts, total: omega.len() as u64 })
}

/// `|{x : supp(x) = 1}| / |Ω^K|`.
pub fn exact_unicity(data: &Dataset, k: usize, budget: u128) -> Result<f64> {
    Ok(exact_rad(data, k, budget)?.frequency(1))
}

/// Exact probability that a uniform `K`-subset of the largest record is
/// unique.
pub fn exact_h1_star(data: &Dataset, index: &InvertedIndex, k: usize, budget: u128) -> Result<f64> {
    let rec = data.record(data.largest_record()).items();
    if k == 0 || rec.len() < k {
        return Err(Error::NoEligibleRecord { k });
    }
    let needed = binomial(rec.len(), k);
    if needed > budget {
        return Err(Error::TooLarge { needed, budget });
    }
    let mut unique = 0u64;
    let mut total = 0u64;
    for_each_subset(rec, k, |s| {
        total += 1;
        let x = KApps::from_sorted(s.to_vec());
        if index.support(&x).map(|s| s.count) == Ok(1) {
            unique += 1;
        }
    });
    Ok(unique as f64 / total as f64)
}

/// Draws uniform `K`-subsets of the whole item universe until one occurs
/// in the data. Exactly uniform over `Ω^K`.
pub fn rejection_sample(
    data: &Dataset,
    index: &InvertedIndex,
    k: usize,
    rng: &mut Rng,
    max_tries: usize,
) -> Result<KApps> {
    let universe = data.num_items();
    if k == 0 || universe < k {
        return Err(Error::InvalidSpec(format!("cannot draw {k} of {universe} items")));
    }
    let mut positions = Vec::with_capacity(k);
    let mut scratch = crate::intersect::Scratch::new();
    for _ in 0..max_tries {
        choose_positions(rng, universe, k, &mut positions);
        let mut items: Vec<ItemId> = positions.iter().map(|&p| ItemId(p as u32)).collect();
        items.sort_unstable();
        if !index.users_unchecked(&items, &mut scratch).is_empty() {
            return Ok(KApps::from_sorted(items));
        }
    }
    Err(Error::RejectionBudgetExceeded(max_tries))
}

/// Probability that the user-first proposal yields each state:
/// `(1/|U|) Σ_{u ⊇ x} 1/C(|D_u|, K)`, from binomial coefficients.
pub fn proposal_probabilities(data: &Dataset, k: usize, states: &[KApps]) -> Vec<f64> {
    let eligible = data.records().iter().filter(|r| r.len() >= k).count() as f64;
    states
        .iter()
        .map(|x| {
            data.records()
                .iter()
                .filter(|r| r.is_superset_of(x.items()))
                .map(|r| 1.0 / binomial(r.len(), k) as f64)
                .sum::<f64>()
                / eligible
        })
        .collect()
}

/// Expected unicity under biased sampling: `Σ_x P(x proposed)·[supp(x)=1]`.
pub fn biased_expected_unicity(data: &Dataset, k: usize, budget: u128) -> Result<f64> {
    let omega = enumerate_omega(data, k, budget)?;
    if omega.is_empty() {
        return Err(Error::Undefined);
    }
    let states: Vec<KApps> = omega.keys().cloned().collect();
    let p = proposal_probabilities(data, k, &states);
    Ok(states
        .iter()
        .zip(&p)
        .filter(|(x, _)| omega[*x] == 1)
        .map(|(_, p)| p)
        .sum())
}

/// Metropolis-Hastings transition matrix over `states` (assumed to be all
/// of `Ω^K`): `P(x,y) = p(y)·min(1, q(x)/q(y))` off the diagonal, with the
/// rejected mass on the diagonal.
pub fn transition_matrix(sampler: &Sampler<'_>, states: &[KApps]) -> Result<Vec<Vec<f64>>> {
    let p = proposal_probabilities(sampler.data(), sampler.k(), states);
    let q = states
        .iter()
        .map(|x| sampler.q_weight(x))
        .collect::<Result<Vec<_>>>()?;
    let n = states.len();
    let mut m = vec![vec![0.0; n]; n];
    for x in 0..n {
        let mut off = 0.0;
        for y in 0..n {
            if x != y {
                m[x][y] = p[y] * (q[x] / q[y]).min(1.0);
                off += m[x][y];
            }
        }
        m[x][x] = 1.0 - off;
    }
    Ok(m)
}

/// Writes the enumeration as CSV: `item1..itemK,support`, tokens as items.
pub fn write_enumeration_csv(
    mut w: impl Write,
    data: &Dataset,
    omega: &BTreeMap<KApps, usize>,
) -> Result<()> {
    let k = omega.keys().next().map_or(0, KApps::k);
    let header: Vec<String> = (1..=k).map(|i| format!("item{i}")).collect();
    writeln!(w, "{}{}support", header.join(","), if k > 0 { "," } else { "" })?;
    for (x, s) in omega {
        for i in x.items() {
            write!(w, "{},", data.token(*i).unwrap_or("?"))?;
        }
        writeln!(w, "{s}")?;
    }
    Ok(())
}
