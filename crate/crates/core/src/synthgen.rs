//! Seeded synthetic set-valued datasets.
//!
//! Item popularity follows a Zipf law over ranks `1..=num_items`
//! (`weight(r) = r^-s`); record sizes follow a discretized distribution
//! truncated to `[1, num_items]`. Each record draws its items by weighted
//! sampling without replacement, i.e. sequential draws renormalized over the
//! items not yet chosen.

use std::collections::HashSet;

use rand::Rng as _;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SizeDistribution {
    /// `round(exp(N(mu, sigma²)))`, redrawn until it lies in range.
    LogNormal { mu: f64, sigma: f64 },
    /// Uniform integer in `min..=max`.
    Uniform { min: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenSpec {
    pub num_users: usize,
    pub num_items: usize,
    pub popularity_exponent: f64,
    pub size: SizeDistribution,
    pub seed: u64,
}

/// Redraw budget for one truncated size draw.
const MAX_SIZE_DRAWS: usize = 10_000;

impl GenSpec {
    /// Calibrated to a population of 54,893 records with about 92k distinct
    /// items, mean record size 42 (sd 39) and a majority of items held by a
    /// single record.
    pub fn paper_shaped(seed: u64) -> Self {
        GenSpec {
            num_users: 54_893,
            num_items: 250_000,
            popularity_exponent: 1.33,
            size: SizeDistribution::LogNormal { mu: 3.4268, sigma: 0.7885 },
            seed,
        }
    }

    /// Same shape as [`GenSpec::paper_shaped`] with `num_users` records and
    /// a proportionally smaller item universe.
    pub fn paper_shaped_scaled(num_users: usize, seed: u64) -> Self {
        let full = Self::paper_shaped(seed);
        let ratio = num_users as f64 / full.num_users as f64;
        GenSpec {
            num_users,
            num_items: ((full.num_items as f64 * ratio).round() as usize).max(1000),
            ..full
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_items == 0 {
            return Err(Error::InvalidSpec("need at least one user and one item".into()));
        }
        if !(self.popularity_exponent >= 0.0 && self.popularity_exponent.is_finite()) {
            return Err(Error::InvalidSpec("popularity exponent must be finite and ≥ 0".into()));
        }
        match self.size {
            SizeDistribution::LogNormal { mu, sigma } => {
                if !(mu.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidSpec(format!("bad lognormal ({mu}, {sigma})")));
                }
            }
            SizeDistribution::Uniform { min, max } => {
                if min == 0 || min > max || min > self.num_items {
                    return Err(Error::InvalidSpec(format!(
                        "size range {min}..={max} infeasible with {} items",
                        self.num_items
                    )));
                }
            }
        }
        Ok(())
    }
}

struct SizeSampler {
    dist: SizeDistribution,
    lognormal: Option<LogNormal<f64>>,
    max: usize,
}

impl SizeSampler {
    fn new(spec: &GenSpec) -> Result<Self> {
        let lognormal = match spec.size {
            SizeDistribution::LogNormal { mu, sigma } => Some(
                LogNormal::new(mu, sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?,
            ),
            SizeDistribution::Uniform { .. } => None,
        };
        Ok(SizeSampler { dist: spec.size, lognormal, max: spec.num_items })
    }

    fn draw(&self, rng: &mut Rng) -> Result<usize> {
        match (self.dist, &self.lognormal) {
            (SizeDistribution::Uniform { min, max }, _) => Ok(rng.random_range(min..=max.min(self.max))),
            (_, Some(ln)) => {
                for _ in 0..MAX_SIZE_DRAWS {
                    let s = ln.sample(rng).round();
                    if s >= 1.0 && s <= self.max as f64 {
                        return Ok(s as usize);
                    }
                }
                Err(Error::InvalidSpec("size distribution has almost no mass in range".into()))
            }
            _ => unreachable!("lognormal sampler built with its distribution"),
        }
    }
}

/// Cumulative Zipf weights over ranks `1..=n`.
struct Popularity {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Popularity {
    fn new(n: usize, exponent: f64) -> Self {
        let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-exponent)).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Popularity { weights, cumulative }
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().expect("at least one item")
    }

    fn draw(&self, rng: &mut Rng) -> u32 {
        let u = rng.random::<f64>() * self.total();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.weights.len() - 1) as u32
    }

    /// `size` distinct ranks (0-based) by sequential renormalized draws.
    fn draw_distinct(&self, rng: &mut Rng, size: usize) -> Vec<u32> {
        let n = self.weights.len();
        let mut chosen: HashSet<u32> = HashSet::with_capacity(size);
        let mut out = Vec::with_capacity(size);
        if 2 * size <= n {
            // rejecting repeats is equivalent to renormalizing over the rest
            let mut rejections = 0usize;
            let limit = 50 * size + 1000;
            while out.len() < size && rejections < limit {
                let r = self.draw(rng);
                if chosen.insert(r) {
                    out.push(r);
                } else {
                    rejections += 1;
                }
            }
        }
        if out.len() < size {
            let mut remaining: Vec<(u32, f64)> = (0..n as u32)
                .filter(|r| !chosen.contains(r))
                .map(|r| (r, self.weights[r as usize]))
                .collect();
            while out.len() < size {
                let total: f64 = remaining.iter().map(|(_, w)| w).sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = remaining.len() - 1;
                for (j, (_, w)) in remaining.iter().enumerate() {
                    if u < *w {
                        pick = j;
                        break;
                    }
                    u -= w;
                }
                out.push(remaining.swap_remove(pick).0);
            }
        }
        out
    }
}

fn item_name(rank0: u32) -> String {
    format!("item{}", rank0 + 1)
}

/// Generates the dataset described by `spec`; user `u` uses its own stream,
/// so the output is identical for any execution strategy.
pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    generate_with(spec, Execution::default())
}

pub fn generate_with(spec: &GenSpec, execution: Execution) -> Result<Dataset> {
    spec.validate()?;
    let sizes = SizeSampler::new(spec)?;
    let popularity = Popularity::new(spec.num_items, spec.popularity_exponent);
    let records = execution.try_map(spec.num_users, |u| -> Result<Vec<u32>> {
        let mut rng = rng::stream(spec.seed, u as u64);
        let size = sizes.draw(&mut rng)?;
        Ok(popularity.draw_distinct(&mut rng, size))
    })?;
    Dataset::from_label_records(records, item_name)
}

/// Expected characteristics of datasets drawn from a spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpectedStats {
    pub mean_record_size: f64,
    pub stdev_record_size: f64,
    /// Mean support over the whole item universe, `users·E[size]/items`.
    pub mean_item_support: f64,
    /// Expected number of items held by at least one record.
    pub expected_num_items: f64,
    /// Expected fraction of held items that are held by exactly one record.
    pub support_one_fraction: f64,
}

/// Monte-Carlo draws used to tabulate a lognormal size distribution.
const DESCRIBE_SIZE_DRAWS: usize = 200_000;
/// `p·τ` below which `1 - exp(-p·τ)` is replaced by its cubic expansion.
const SERIES_CUTOFF: f64 = 1e-3;

/// Expected statistics of `generate(spec)`.
///
/// Inclusion probabilities under successive sampling are approximated by
/// `π_i(s) = 1 - exp(-p_i·τ_s)` with `τ_s` chosen so the `π_i(s)` sum to
/// `s`; this is exact for uniform popularity. Supports are then binomial.
pub fn describe(spec: &GenSpec) -> Result<ExpectedStats> {
    spec.validate()?;
    let pmf = size_pmf(spec)?;
    let mean = pmf.iter().map(|&(s, w)| s as f64 * w).sum::<f64>();
    let var = pmf.iter().map(|&(s, w)| (s as f64 - mean).powi(2) * w).sum::<f64>();

    let pop = Popularity::new(spec.num_items, spec.popularity_exponent);
    let total = pop.total();
    let p: Vec<f64> = pop.weights.iter().map(|w| w / total).collect();
    let s_max = pmf.last().map_or(1, |&(s, _)| s);
    let full = s_max >= spec.num_items;
    let tau_max = if full { f64::INFINITY } else { solve_tau(&p, p.len(), [0.0; 3], s_max as f64) };
    // weights are non-increasing in rank, so the exact part is a prefix
    let head = if full { p.len() } else { p.partition_point(|&pi| pi * tau_max >= SERIES_CUTOFF) };
    let tail_moments = p[head..].iter().fold([0.0; 3], |m, &pi| {
        [m[0] + pi, m[1] + pi * pi, m[2] + pi * pi * pi]
    });

    // per-size τ, then moments of τ for the tail expansion
    let mut inclusion = vec![0.0; head];
    let mut tau_moments = [0.0; 3];
    let mut tau = 0.0f64;
    for &(s, w) in &pmf {
        if s >= spec.num_items {
            inclusion.iter_mut().for_each(|v| *v += w);
            continue;
        }
        tau = solve_tau_from(&p, head, tail_moments, s as f64, tau);
        for (v, &pi) in inclusion.iter_mut().zip(&p[..head]) {
            *v += w * -(-pi * tau).exp_m1();
        }
        tau_moments[0] += w * tau;
        tau_moments[1] += w * tau * tau;
        tau_moments[2] += w * tau * tau * tau;
    }
    let users = spec.num_users as f64;
    let mut held = 0.0;
    let mut single = 0.0;
    let mut accumulate = |pi_bar: f64| {
        let pi_bar = pi_bar.clamp(0.0, 1.0);
        let log_miss = (-pi_bar).ln_1p();
        held += -(users * log_miss).exp_m1();
        single += users * pi_bar * ((users - 1.0) * log_miss).exp();
    };
    for &v in &inclusion {
        accumulate(v);
    }
    for &pi in &p[head..] {
        accumulate(pi * tau_moments[0] - pi * pi * tau_moments[1] / 2.0 + pi.powi(3) * tau_moments[2] / 6.0);
    }
    Ok(ExpectedStats {
        mean_record_size: mean,
        stdev_record_size: var.sqrt(),
        mean_item_support: users * mean / spec.num_items as f64,
        expected_num_items: held,
        support_one_fraction: if held > 0.0 { single / held } else { 0.0 },
    })
}

/// `(size, probability)` pairs in increasing size order.
fn size_pmf(spec: &GenSpec) -> Result<Vec<(usize, f64)>> {
    match spec.size {
        SizeDistribution::Uniform { min, max } => {
            let max = max.min(spec.num_items);
            let w = 1.0 / (max - min + 1) as f64;
            Ok((min..=max).map(|s| (s, w)).collect())
        }
        SizeDistribution::LogNormal { .. } => {
            let sampler = SizeSampler::new(spec)?;
            let mut rng = rng::from_seed(rng::derive(spec.seed, 0x6465_7363));
            let mut counts = std::collections::BTreeMap::new();
            for _ in 0..DESCRIBE_SIZE_DRAWS {
                *counts.entry(sampler.draw(&mut rng)?).or_insert(0usize) += 1;
            }
            Ok(counts
                .into_iter()
                .map(|(s, c)| (s, c as f64 / DESCRIBE_SIZE_DRAWS as f64))
                .collect())
        }
    }
}

/// Expected number of distinct items after "τ" weighted draws: the exact
/// sum over the first `head` items plus a cubic expansion over the rest.
fn included(p: &[f64], head: usize, tail: [f64; 3], tau: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    for &pi in &p[..head] {
        let e = (-pi * tau).exp();
        g += 1.0 - e;
        dg += pi * e;
    }
    g += tail[0] * tau - tail[1] * tau * tau / 2.0 + tail[2] * tau.powi(3) / 6.0;
    dg += tail[0] - tail[1] * tau + tail[2] * tau * tau / 2.0;
    (g, dg)
}

fn solve_tau(p: &[f64], head: usize, tail: [f64; 3], s: f64) -> f64 {
    solve_tau_from(p, head, tail, s, 0.0)
}

/// Newton iteration on the concave map τ ↦ E[distinct]; starting below the
/// root it increases monotonically.
fn solve_tau_from(p: &[f64], head: usize, tail: [f64; 3], s: f64, start: f64) -> f64 {
    let mut tau = start.max(s);
    for _ in 0..100 {
        let (g, dg) = included(p, head, tail, tau);
        if dg <= 0.0 {
            break;
        }
        let step = (s - g) / dg;
        tau += step;
        if step.abs() <= 1e-12 * tau.max(1.0) {
            break;
        }
    }
    tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::InvertedIndex;
    use crate::dataset::ItemId;

    fn small(exponent: f64, seed: u64) -> GenSpec {
        GenSpec {
            num_users: 200,
            num_items: 60,
            popularity_exponent: exponent,
            size: SizeDistribution::LogNormal { mu: 1.2, sigma: 0.5 },
            seed,
        }
    }

    #[test]
    fn records_are_valid_and_reproducible() {
        let spec = small(1.0, 4);
        let a = generate(&spec).unwrap();
        assert_eq!(a.len(), 200);
        for r in a.records() {
            assert!(!r.is_empty());
            assert!(r.items().windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(generate(&spec).unwrap(), a);
        assert_eq!(generate_with(&spec, Execution::Sequential).unwrap(), a);
        assert_ne!(generate(&GenSpec { seed: 5, ..spec }).unwrap(), a);
    }

    #[test]
    fn single_user() {
        let d = generate(&GenSpec { num_users: 1, ..small(1.0, 1) }).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn infeasible_specs() {
        let bad = GenSpec { size: SizeDistribution::Uniform { min: 70, max: 80 }, ..small(1.0, 1) };
        assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))));
        let bad = GenSpec { popularity_exponent: -1.0, ..small(1.0, 1) };
        assert!(generate(&bad).is_err());
        let bad = GenSpec { size: SizeDistribution::LogNormal { mu: 50.0, sigma: 0.01 }, ..small(1.0, 1) };
        assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))));
        assert!(generate(&GenSpec { num_users: 0, ..small(1.0, 1) }).is_err());
    }

    #[test]
    fn dense_records_use_the_explicit_path() {
        let spec = GenSpec {
            num_users: 50,
            num_items: 10,
            popularity_exponent: 3.0,
            size: SizeDistribution::Uniform { min: 9, max: 10 },
            seed: 2,
        };
        let d = generate(&spec).unwrap();
        assert!(d.records().iter().all(|r| r.len() >= 9));
    }

    #[test]
    fn zero_exponent_is_uniform_over_items() {
        let spec = GenSpec {
            num_users: 10_000,
            num_items: 20,
            popularity_exponent: 0.0,
            size: SizeDistribution::Uniform { min: 1, max: 5 },
            seed: 9,
        };
        let d = generate(&spec).unwrap();
        let idx = InvertedIndex::build(&d);
        let expected = describe(&spec).unwrap().mean_item_support;
        assert_eq!(expected, 10_000.0 * 3.0 / 20.0);
        // per-item support is a sum of independent Bernoulli(s/20) draws
        let sd = (0..5).map(|s| (s + 1) as f64 / 20.0).map(|p| p * (1.0 - p)).sum::<f64>() / 5.0;
        let sd = (10_000.0 * sd).sqrt();
        for i in 0..d.num_items() as u32 {
            let c = idx.postings(ItemId(i)).unwrap().len() as f64;
            assert!((c - expected).abs() < 3.0 * sd + 1.0, "item {i}: {c} vs {expected}");
        }
    }

    #[test]
    fn describe_is_deterministic_and_consistent() {
        let spec = GenSpec {
            num_users: 4000,
            num_items: 5000,
            popularity_exponent: 1.1,
            size: SizeDistribution::LogNormal { mu: 2.5, sigma: 0.7 },
            seed: 21,
        };
        let e = describe(&spec).unwrap();
        assert_eq!(e, describe(&spec).unwrap());
        let s = generate(&spec).unwrap().stats();
        let close = |a: f64, b: f64| (a - b).abs() / b < 0.05;
        assert!(close(s.mean_record_size, e.mean_record_size), "{s:?} {e:?}");
        assert!(close(s.stdev_record_size, e.stdev_record_size), "{s:?} {e:?}");
        assert!(close(s.num_items as f64, e.expected_num_items), "{s:?} {e:?}");
        let d = generate(&spec).unwrap();
        let idx = InvertedIndex::build(&d);
        let ones = (0..d.num_items() as u32)
            .filter(|&i| idx.postings(ItemId(i)).unwrap().len() == 1)
            .count() as f64
            / d.num_items() as f64;
        assert!(close(ones, e.support_one_fraction), "{ones} vs {e:?}");
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = GenSpec::paper_shaped(3);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"popularityExponent\""));
        assert_eq!(serde_json::from_str::<GenSpec>(&text).unwrap(), spec);
    }
}
