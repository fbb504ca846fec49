//! Unicity and RAD estimation with Hoeffding-controlled sample sizes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ItemId, KApps};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::index::InvertedIndex;
use crate::intersect::Scratch;
use crate::rng;
use crate::sampler::{Sampler, StepScratch, DEFAULT_BURN_IN};

/// Sampling error, confidence and RAD depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub epsilon: f64,
    pub sigma: f64,
    pub depth: usize,
}

impl SampleSpec {
    pub fn new(epsilon: f64, sigma: f64) -> Result<Self> {
        Self::with_depth(epsilon, sigma, 1)
    }

    pub fn with_depth(epsilon: f64, sigma: f64, depth: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidSpec(format!("epsilon must be in (0, 1), got {epsilon}")));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidSpec(format!("sigma must be in (0, 1), got {sigma}")));
        }
        if depth == 0 {
            return Err(Error::InvalidSpec("RAD depth must be at least 1".into()));
        }
        Ok(SampleSpec { epsilon, sigma, depth })
    }

    pub fn unicity_samples(&self) -> usize {
        hoeffding_n(self.epsilon, self.sigma, 1)
    }

    pub fn rad_samples(&self) -> usize {
        hoeffding_n(self.epsilon, self.sigma, self.depth)
    }
}

fn hoeffding_n(epsilon: f64, sigma: f64, k: usize) -> usize {
    ((2.0 * k as f64 / (1.0 - sigma)).ln() / (2.0 * epsilon * epsilon)).ceil() as usize
}

/// Samples needed so that `|Ĥ1 - H1| < epsilon` with probability `sigma`.
pub fn sample_size_unicity(epsilon: f64, sigma: f64) -> Result<usize> {
    Ok(SampleSpec::new(epsilon, sigma)?.unicity_samples())
}

/// Samples needed so that the first `k` RAD entries are all within
/// `epsilon` with probability `sigma` (union bound).
pub fn sample_size_rad(epsilon: f64, sigma: f64, k: usize) -> Result<usize> {
    Ok(SampleSpec::with_depth(epsilon, sigma, k)?.rad_samples())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// User-first sampling; over-represents popular subsets.
    Biased,
    /// Metropolis-Hastings chain, uniform over occurring subsets.
    Uniform,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "biased" => Ok(Mode::Biased),
            "uniform" => Ok(Mode::Uniform),
            other => Err(Error::InvalidSpec(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Biased => "biased",
            Mode::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnicityEstimate {
    pub h1_hat: f64,
    pub n: usize,
    pub mode: Mode,
    #[serde(rename = "K")]
    pub k: usize,
}

impl UnicityEstimate {
    /// Binomial standard error of `h1_hat`.
    pub fn std_error(&self) -> f64 {
        (self.h1_hat * (1.0 - self.h1_hat) / self.n as f64).sqrt()
    }
}

/// Relative frequencies of sampled subsets by support, `h[i-1]` for support
/// `i` up to the depth, with the remaining mass in `tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadHistogram {
    pub h: Vec<f64>,
    pub tail: f64,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

impl RadHistogram {
    pub fn from_supports(supports: &[usize], depth: usize, k: usize) -> Self {
        let mut counts = vec![0usize; depth];
        let mut tail = 0usize;
        for &s in supports {
            if (1..=depth).contains(&s) {
                counts[s - 1] += 1;
            } else {
                tail += 1;
            }
        }
        let n = supports.len();
        RadHistogram {
            h: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            tail: tail as f64 / n as f64,
            n,
            k,
        }
    }

    pub fn depth(&self) -> usize {
        self.h.len()
    }

    /// Sum of all buckets including the tail.
    pub fn total(&self) -> f64 {
        self.h.iter().sum::<f64>() + self.tail
    }
}

/// One point of a unicity-versus-size curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub size: usize,
    pub mean: f64,
    /// Sample standard deviation across trials; 0 for a single trial.
    pub stdev: f64,
    pub trials: usize,
}

/// Estimation over one dataset and its index.
#[derive(Debug, Clone, Copy)]
pub struct Estimator<'a> {
    data: &'a Dataset,
    index: &'a InvertedIndex,
    burn_in: usize,
    execution: Execution,
}

impl<'a> Estimator<'a> {
    pub fn new(data: &'a Dataset, index: &'a InvertedIndex) -> Self {
        Estimator {
            data,
            index,
            burn_in: DEFAULT_BURN_IN,
            execution: Execution::default(),
        }
    }

    /// Chain length per uniform sample.
    pub fn burn_in(mut self, steps: usize) -> Self {
        self.burn_in = steps;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Supports of `n` independent samples. Sample `j` uses its own stream
    /// derived from `seed`; uniform samples each run a fresh chain.
    pub fn sample_supports(&self, k: usize, n: usize, mode: Mode, seed: u64) -> Result<Vec<usize>> {
        let sampler = Sampler::new(self.data, self.index, k)?;
        let burn_in = self.burn_in;
        let supports = self.execution.try_map(n, |j| -> Result<usize> {
            let mut rng = rng::stream(seed, j as u64);
            match mode {
                Mode::Biased => {
                    let x = sampler.biased_sample(&mut rng);
                    let mut scratch = Scratch::new();
                    Ok(self.index.users_unchecked(x.items(), &mut scratch).len())
                }
                Mode::Uniform => {
                    let mut state = sampler.start(None, &mut rng)?;
                    let mut scratch = StepScratch::default();
                    for _ in 0..burn_in {
                        sampler.mcmc_step(&mut state, &mut rng, &mut scratch);
                    }
                    Ok(state.current_support)
                }
            }
        })?;
        Ok(supports)
    }

    /// Fraction of unique subsets among `n` samples.
    pub fn unicity_n(&self, k: usize, n: usize, mode: Mode, seed: u64) -> Result<UnicityEstimate> {
        if n == 0 {
            return Err(Error::InvalidSpec("need at least one sample".into()));
        }
        let supports = self.sample_supports(k, n, mode, seed)?;
        let unique = supports.iter().filter(|&&s| s == 1).count();
        Ok(UnicityEstimate { h1_hat: unique as f64 / n as f64, n, mode, k })
    }

    /// Unicity from `sample_size_unicity(spec)` samples.
    pub fn unicity(&self, k: usize, spec: &SampleSpec, mode: Mode, seed: u64) -> Result<UnicityEstimate> {
        self.unicity_n(k, spec.unicity_samples(), mode, seed)
    }

    /// RAD from `sample_size_rad(spec)` uniform samples.
    pub fn rad(&self, k: usize, spec: &SampleSpec, seed: u64) -> Result<RadHistogram> {
        let supports = self.sample_supports(k, spec.rad_samples(), Mode::Uniform, seed)?;
        Ok(RadHistogram::from_supports(&supports, spec.depth, k))
    }

    /// Mean and spread of uniform unicity over random subsets of the data.
    /// Every trial subsamples `size` records, reindexes them and estimates.
    pub fn unicity_vs_size(
        &self,
        k: usize,
        sizes: &[usize],
        spec: &SampleSpec,
        trials: usize,
        seed: u64,
    ) -> Result<Vec<CurveRow>> {
        if trials == 0 {
            return Err(Error::InvalidSpec("need at least one trial".into()));
        }
        if let Some(&bad) = sizes.iter().find(|&&m| m == 0 || m > self.data.len()) {
            return Err(Error::InvalidSize { size: bad, max: self.data.len() });
        }
        let mut rows = Vec::with_capacity(sizes.len());
        for (si, &size) in sizes.iter().enumerate() {
            let mut values = Vec::with_capacity(trials);
            for t in 0..trials {
                let tag = 2 * (si * trials + t) as u64;
                let sub = self.data.subsample(size, rng::derive(seed, tag))?;
                let idx = InvertedIndex::build(&sub);
                let est = Estimator {
                    data: &sub,
                    index: &idx,
                    ..*self
                }
                .unicity(k, spec, Mode::Uniform, rng::derive(seed, tag + 1))?;
                values.push(est.h1_hat);
            }
            let mean = values.iter().sum::<f64>() / trials as f64;
            let stdev = if trials > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
            } else {
                0.0
            };
            log::debug!("size {size}: mean unicity {mean:.4} (sd {stdev:.4})");
            rows.push(CurveRow { size, mean, stdev, trials });
        }
        Ok(rows)
    }
}

/// Items shared by every record containing `x`, other than `x` itself.
pub fn homogeneity(index: &InvertedIndex, data: &Dataset, x: &KApps) -> Result<Vec<ItemId>> {
    let users = index.support(x)?.users;
    let (&first, rest) = users.split_first().ok_or(Error::NotInDataset)?;
    let mut common: Vec<ItemId> = data.record(first as usize).items().to_vec();
    for &u in rest {
        let r = data.record(u as usize);
        common.retain(|&i| r.contains(i));
    }
    common.retain(|i| x.items().binary_search(i).is_err());
    Ok(common)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::from_id_records(vec![vec![1, 2, 3], vec![2, 3], vec![3]]).unwrap()
    }

    #[test]
    fn sample_sizes_from_hoeffding() {
        assert_eq!(sample_size_unicity(0.01, 0.99).unwrap(), 26492);
        assert_eq!(sample_size_unicity(0.05, 0.95).unwrap(), 738);
        assert_eq!(sample_size_rad(0.01, 0.99, 10).unwrap(), 38005);
        // 41470.25 rounds up
        assert_eq!(sample_size_rad(0.01, 0.99, 20).unwrap(), 41471);
        for (e, s) in [(0.01, 0.9), (0.02, 0.5), (0.3, 0.999)] {
            assert_eq!(sample_size_rad(e, s, 1).unwrap(), sample_size_unicity(e, s).unwrap());
        }
        let mut last = 0;
        for s in [0.1, 0.5, 0.9, 0.99, 0.999] {
            let n = sample_size_unicity(0.02, s).unwrap();
            assert!(n >= last);
            last = n;
        }
        for (e, s) in [(0.0, 0.5), (1.0, 0.5), (0.1, 0.0), (0.1, 1.0), (f64::NAN, 0.5)] {
            assert!(matches!(sample_size_unicity(e, s), Err(Error::InvalidSpec(_))));
        }
        assert!(sample_size_rad(0.1, 0.5, 0).is_err());
    }

    #[test]
    fn identical_records_are_never_unique() {
        let d = Dataset::from_id_records(vec![vec![0, 1, 2]; 4]).unwrap();
        let idx = InvertedIndex::build(&d);
        let est = Estimator::new(&d, &idx).burn_in(50);
        for k in 1..=3 {
            for mode in [Mode::Biased, Mode::Uniform] {
                assert_eq!(est.unicity_n(k, 300, mode, 1).unwrap().h1_hat, 0.0);
            }
        }
    }

    #[test]
    fn disjoint_records_are_always_unique() {
        let d = Dataset::from_id_records(vec![vec![0, 1, 2], vec![3, 4], vec![5, 6, 7, 8]]).unwrap();
        let idx = InvertedIndex::build(&d);
        let est = Estimator::new(&d, &idx).burn_in(50);
        for mode in [Mode::Biased, Mode::Uniform] {
            assert_eq!(est.unicity_n(2, 300, mode, 1).unwrap().h1_hat, 1.0);
        }
        let spec = SampleSpec::with_depth(0.1, 0.9, 5).unwrap();
        let rad = est.rad(2, &spec, 3).unwrap();
        assert_eq!(rad.h[0], 1.0);
        assert!(rad.h[1..].iter().all(|&v| v == 0.0) && rad.tail == 0.0);
    }

    #[test]
    fn identical_records_land_in_the_matching_bucket() {
        let d = Dataset::from_id_records(vec![vec![0, 1]; 3]).unwrap();
        let idx = InvertedIndex::build(&d);
        let est = Estimator::new(&d, &idx).burn_in(10);
        let deep = est.rad(1, &SampleSpec::with_depth(0.2, 0.5, 5).unwrap(), 0).unwrap();
        assert_eq!(deep.h[2], 1.0);
        let shallow = est.rad(1, &SampleSpec::with_depth(0.2, 0.5, 2).unwrap(), 0).unwrap();
        assert_eq!(shallow.tail, 1.0);
    }

    #[test]
    fn toy_uniform_unicity_and_rad() {
        let d = toy();
        let idx = InvertedIndex::build(&d);
        let est = Estimator::new(&d, &idx).burn_in(200);
        let spec = SampleSpec::new(0.01, 0.99).unwrap();
        let u = est.unicity(2, &spec, Mode::Uniform, 7).unwrap();
        assert_eq!(u.n, 26492);
        assert!((u.h1_hat - 2.0 / 3.0).abs() < 0.01, "{}", u.h1_hat);

        let spec = SampleSpec::with_depth(0.01, 0.99, 3).unwrap();
        let rad = est.rad(1, &spec, 8).unwrap();
        for h in &rad.h {
            assert!((h - 1.0 / 3.0).abs() < 0.01, "{rad:?}");
        }
        assert!((rad.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn execution_strategy_does_not_change_results() {
        let d = toy();
        let idx = InvertedIndex::build(&d);
        let base = Estimator::new(&d, &idx).burn_in(30);
        for mode in [Mode::Biased, Mode::Uniform] {
            let a = base.execution(Execution::Sequential).sample_supports(2, 500, mode, 5).unwrap();
            let b = base.execution(Execution::Parallel).sample_supports(2, 500, mode, 5).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn no_eligible_record_propagates() {
        let d = toy();
        let idx = InvertedIndex::build(&d);
        let err = Estimator::new(&d, &idx).unicity_n(4, 10, Mode::Uniform, 0).unwrap_err();
        assert_eq!(err, Error::NoEligibleRecord { k: 4 });
    }

    #[test]
    fn homogeneity_examples() {
        let d = Dataset::from_id_records(vec![vec![1, 2, 3], vec![1, 2, 3], vec![4]]).unwrap();
        let idx = InvertedIndex::build(&d);
        let id = |t: &str| d.id(t).unwrap();
        let x = KApps::new(vec![id("1"), id("2")]).unwrap();
        assert_eq!(homogeneity(&idx, &d, &x).unwrap(), vec![id("3")]);

        let d = Dataset::from_id_records(vec![vec![1, 2, 3, 4], vec![1, 5]]).unwrap();
        let idx = InvertedIndex::build(&d);
        let id = |t: &str| d.id(t).unwrap();
        let x = KApps::new(vec![id("2")]).unwrap();
        assert_eq!(homogeneity(&idx, &d, &x).unwrap(), vec![id("1"), id("3"), id("4")]);
        let x = KApps::new(vec![id("1")]).unwrap();
        assert!(homogeneity(&idx, &d, &x).unwrap().is_empty());
        let absent = KApps::new(vec![id("4"), id("5")]).unwrap();
        assert_eq!(homogeneity(&idx, &d, &absent).unwrap_err(), Error::NotInDataset);
    }

    #[test]
    fn curve_degenerate_and_errors() {
        let d = Dataset::from_id_records(vec![vec![0, 1, 2], vec![0, 1], vec![2, 3, 4], vec![0, 4]]).unwrap();
        let idx = InvertedIndex::build(&d);
        let est = Estimator::new(&d, &idx).burn_in(20);
        let spec = SampleSpec::new(0.1, 0.9).unwrap();
        // a single record of size ≥ 2: every subset is unique
        let d2 = Dataset::from_id_records(vec![vec![0, 1, 2], vec![3, 4, 5, 6]]).unwrap();
        let idx2 = InvertedIndex::build(&d2);
        let rows = Estimator::new(&d2, &idx2).burn_in(20).unicity_vs_size(2, &[1], &spec, 5, 1).unwrap();
        assert_eq!(rows[0].mean, 1.0);
        assert_eq!(rows[0].stdev, 0.0);

        let full = est.unicity_vs_size(1, &[4], &spec, 1, 9).unwrap();
        let direct = est.unicity(1, &spec, Mode::Uniform, 9).unwrap();
        assert!((full[0].mean - direct.h1_hat).abs() < 2.0 * spec.epsilon);
        assert!(matches!(est.unicity_vs_size(1, &[5], &spec, 1, 0), Err(Error::InvalidSize { .. })));
        assert!(est.unicity_vs_size(1, &[2], &spec, 0, 0).is_err());
    }

    #[test]
    fn rad_histogram_normalizes() {
        let h = RadHistogram::from_supports(&[1, 1, 2, 5, 9, 3, 1], 3, 2);
        assert_eq!(h.h, vec![3.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0]);
        assert_eq!(h.tail, 2.0 / 7.0);
        assert!((h.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_json_shape() {
        let e = UnicityEstimate { h1_hat: 0.5, n: 10, mode: Mode::Uniform, k: 2 };
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["h1Hat"], 0.5);
        assert_eq!(v["mode"], "uniform");
        assert_eq!(v["K"], 2);
        assert_eq!("biased".parse::<Mode>().unwrap(), Mode::Biased);
        assert!("other".parse::<Mode>().is_err());
    }
}
