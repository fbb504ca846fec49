//! Sampling of `K`-item subsets.
//!
//! Two regimes share one proposal mechanism: pick an eligible record (one
//! with at least `K` items) uniformly, then `K` of its items uniformly
//! without replacement. Used directly this is the *biased* sampler, which
//! favours subsets shared by many records. The Metropolis-Hastings chain
//! uses it as an independence proposal and accepts a move from `S` to `C`
//! with probability `min(1, q(S)/q(C))`, where
//!
//! ```text
//! q(x) = Σ_{u : D_u ⊇ x} Π_{i=1..K} 1 / (|D_u| - K + i)
//! ```
//!
//! is proportional to the proposal probability of `x`. The chain's
//! stationary distribution is uniform over all subsets occurring in the data.

use rand::Rng as _;
use smallvec::SmallVec;

use crate::dataset::{Dataset, ItemId, KApps};
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::intersect::{seek, Scratch};
use crate::rng::{self, Rng};

pub const DEFAULT_BURN_IN: usize = 3000;
pub const DEFAULT_CHECK_EVERY: usize = 100;
/// Minimum number of checks' worth of steps before testing convergence.
pub const MIN_CHECKS: usize = 20;

/// Parameters of one chain run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub k: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        ChainConfig { k, burn_in: DEFAULT_BURN_IN, seed }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// `Π_{i=1..k} 1/(size-k+i)`, i.e. `1/(K!·C(size,K))`.
pub(crate) fn record_weight(size: usize, k: usize) -> f64 {
    if size < k {
        return 0.0;
    }
    (1..=k).map(|i| 1.0 / (size - k + i) as f64).product()
}

/// Records with at least `K` items, plus the per-record proposal weight.
#[derive(Debug, Clone)]
pub struct EligibleView {
    k: usize,
    users: Vec<u32>,
    weights: Vec<f64>,
}

impl EligibleView {
    pub fn new(data: &Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSpec("K must be at least 1".into()));
        }
        let weights: Vec<f64> = data
            .records()
            .iter()
            .map(|r| record_weight(r.len(), k))
            .collect();
        let users: Vec<u32> = data
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.len() >= k)
            .map(|(i, _)| i as u32)
            .collect();
        if users.is_empty() {
            return Err(Error::NoEligibleRecord { k });
        }
        Ok(EligibleView { k, users, weights })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn users(&self) -> &[u32] {
        &self.users
    }

    /// Proposal weight of record `r`; zero for records smaller than `K`.
    pub fn weight(&self, r: usize) -> f64 {
        self.weights[r]
    }
}

/// Current position of a chain and its unique-indicator trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub current: KApps,
    /// `q(current)`.
    pub current_weight: f64,
    pub current_support: usize,
    pub step_count: usize,
    /// Bit `t` is set iff the state after step `t+1` had support 1.
    pub unique_trace: Vec<bool>,
}

impl ChainState {
    pub fn is_unique(&self) -> bool {
        self.current_support == 1
    }
}

/// Reusable buffers for the proposal and support computation.
#[derive(Debug, Default, Clone)]
pub struct StepScratch {
    positions: Vec<usize>,
    candidate: Vec<ItemId>,
}

/// Writes `k` distinct indices drawn uniformly from `0..n` (Floyd's method).
pub(crate) fn choose_positions(rng: &mut Rng, n: usize, k: usize, out: &mut Vec<usize>) {
    debug_assert!(k <= n);
    out.clear();
    for j in n - k..n {
        let t = rng.random_range(0..=j);
        if out.contains(&t) {
            out.push(j);
        } else {
            out.push(t);
        }
    }
}

/// Result of [`Sampler::run_until_converged`].
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub sample: KApps,
    pub steps: usize,
    /// `(step, z)` at every convergence check.
    pub z_history: Vec<(usize, f64)>,
}

/// Samplers over a fixed dataset and `K`. Cheap to share between threads.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    data: &'a Dataset,
    index: &'a InvertedIndex,
    view: EligibleView,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a Dataset, index: &'a InvertedIndex, k: usize) -> Result<Self> {
        Ok(Sampler { data, index, view: EligibleView::new(data, k)? })
    }

    pub fn k(&self) -> usize {
        self.view.k
    }

    pub fn view(&self) -> &EligibleView {
        &self.view
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn index(&self) -> &'a InvertedIndex {
        self.index
    }

    /// Draws a proposal into `scratch.candidate` (sorted).
    fn propose(&self, rng: &mut Rng, scratch: &mut StepScratch) {
        let users = &self.view.users;
        let u = users[rng.random_range(0..users.len())] as usize;
        let items = self.data.record(u).items();
        choose_positions(rng, items.len(), self.view.k, &mut scratch.positions);
        scratch.candidate.clear();
        scratch.candidate.extend(scratch.positions.iter().map(|&p| items[p]));
        scratch.candidate.sort_unstable();
    }

    /// `(support, q)` of `items`, or `None` as soon as the partial sum of
    /// `q` reaches `threshold`. Users are visited in ascending order, so a
    /// completed sum equals the one `q_weight` computes.
    fn measure_below(&self, items: &[ItemId], threshold: f64) -> Option<(usize, f64)> {
        let mut lists: SmallVec<[&[u32]; 16]> = items
            .iter()
            .map(|&i| self.index.postings(i).expect("proposed items are indexed"))
            .collect();
        lists.sort_unstable_by_key(|l| l.len());
        let (shortest, others) = lists.split_first().expect("K >= 1");
        let mut cursors: SmallVec<[usize; 16]> = SmallVec::from_elem(0, others.len());
        let mut support = 0;
        let mut q = 0.0;
        'users: for &u in *shortest {
            for (list, cur) in others.iter().zip(cursors.iter_mut()) {
                *cur = seek(list, *cur, u);
                match list.get(*cur) {
                    None => break 'users,
                    Some(&v) if v != u => continue 'users,
                    Some(_) => {}
                }
            }
            support += 1;
            q += self.view.weights[u as usize];
            if q >= threshold {
                return None;
            }
        }
        Some((support, q))
    }

    /// User-first sampling: a uniform eligible record, then `K` of its items.
    pub fn biased_sample(&self, rng: &mut Rng) -> KApps {
        let mut scratch = StepScratch::default();
        self.propose(rng, &mut scratch);
        KApps::from_sorted(scratch.candidate)
    }

    /// `q(x)`, proportional to the probability that `x` is proposed.
    pub fn q_weight(&self, x: &KApps) -> Result<f64> {
        if x.k() != self.view.k {
            return Err(Error::InvalidKApps(format!("expected {} items, got {}", self.view.k, x.k())));
        }
        let users = self.index.support(x)?.users;
        if users.is_empty() {
            return Err(Error::NotInDataset);
        }
        Ok(users.iter().map(|&u| self.view.weights[u as usize]).sum())
    }

    /// A fresh chain at `start`, or at a biased draw when `start` is `None`.
    pub fn start(&self, start: Option<KApps>, rng: &mut Rng) -> Result<ChainState> {
        let current = match start {
            Some(x) => x,
            None => self.biased_sample(rng),
        };
        let current_weight = self.q_weight(&current)?;
        let current_support = self.index.support(&current)?.count;
        Ok(ChainState {
            current,
            current_weight,
            current_support,
            step_count: 0,
            unique_trace: Vec::new(),
        })
    }

    /// One Metropolis-Hastings transition.
    ///
    /// The candidate `C` is accepted iff `q(C) < q(S)/u` for `u` uniform in
    /// `[0, 1)`, which happens with probability `min(1, q(S)/q(C))`. The sum
    /// for `q(C)` stops early once it reaches the threshold.
    pub fn mcmc_step(&self, state: &mut ChainState, rng: &mut Rng, scratch: &mut StepScratch) {
        self.propose(rng, scratch);
        let u: f64 = rng.random();
        let threshold = state.current_weight / u;
        if let Some((support, q)) = self.measure_below(&scratch.candidate, threshold) {
            state.current.assign_sorted(&scratch.candidate);
            state.current_weight = q;
            state.current_support = support;
        }
        state.step_count += 1;
        state.unique_trace.push(state.current_support == 1);
    }

    /// Runs `steps` transitions.
    pub fn run(&self, state: &mut ChainState, steps: usize, rng: &mut Rng) {
        let mut scratch = StepScratch::default();
        state.unique_trace.reserve(steps);
        for _ in 0..steps {
            self.mcmc_step(state, rng, &mut scratch);
        }
    }

    /// Final state after `cfg.burn_in` steps from `start` (a biased draw if
    /// `None`).
    pub fn mcmc_sample(&self, cfg: &ChainConfig, start: Option<KApps>) -> Result<KApps> {
        if cfg.k != self.view.k {
            return Err(Error::InvalidSpec(format!("chain K={} on a K={} sampler", cfg.k, self.view.k)));
        }
        let mut rng = rng::from_seed(cfg.seed);
        Ok(self.sample_with(&mut rng, start, cfg.burn_in)?.current)
    }

    pub(crate) fn sample_with(&self, rng: &mut Rng, start: Option<KApps>, steps: usize) -> Result<ChainState> {
        let mut state = self.start(start, rng)?;
        self.run(&mut state, steps, rng);
        Ok(state)
    }

    /// Steps a fresh chain until the Geweke score of its unique-indicator
    /// trace lies in `[-1, 1]`. Checks happen every `check_every` steps once
    /// `20 * check_every` steps have been taken.
    pub fn run_until_converged(&self, seed: u64, check_every: usize, max_steps: usize) -> Result<Convergence> {
        if check_every == 0 {
            return Err(Error::InvalidSpec("check interval must be positive".into()));
        }
        let mut rng = rng::from_seed(seed);
        let mut state = self.start(None, &mut rng)?;
        let mut scratch = StepScratch::default();
        let mut z_history = Vec::new();
        let first = MIN_CHECKS * check_every;
        while state.step_count < max_steps {
            self.mcmc_step(&mut state, &mut rng, &mut scratch);
            let t = state.step_count;
            if t >= first && t % check_every == 0 {
                let z = geweke_z(&state.unique_trace)?;
                z_history.push((t, z));
                if (-1.0..=1.0).contains(&z) {
                    return Ok(Convergence { sample: state.current, steps: t, z_history });
                }
            }
        }
        Err(Error::NotConverged { steps: state.step_count, z_history })
    }
}

/// Minimum trace length accepted by [`geweke_z`].
pub const MIN_TRACE: usize = 20;

/// Geweke score comparing the first 10% of a 0/1 trace with its last 50%:
/// `(mean_a - mean_b) / sqrt(var_a + var_b)` with population variances.
///
/// When both windows are constant the score is 0 for equal means and a
/// signed infinity otherwise.
pub fn geweke_z(trace: &[bool]) -> Result<f64> {
    if trace.len() < MIN_TRACE {
        return Err(Error::InsufficientTrace { len: trace.len(), min: MIN_TRACE });
    }
    let head = &trace[..trace.len() / 10];
    let tail = &trace[trace.len() - trace.len() / 2..];
    let moments = |w: &[bool]| {
        let p = w.iter().filter(|&&b| b).count() as f64 / w.len() as f64;
        // Bernoulli population variance
        (p, p * (1.0 - p))
    };
    let (ma, va) = moments(head);
    let (mb, vb) = moments(tail);
    let diff = ma - mb;
    let var = va + vb;
    if var == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY });
    }
    Ok(diff / var.sqrt())
}

/// Worst-case mixing time `ceil(n · ln(1/xi) / h1*)`.
pub fn mixing_bound(num_records: usize, xi: f64, h1_star: f64) -> Result<u64> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::InvalidSpec(format!("xi must be in (0, 1], got {xi}")));
    }
    if h1_star == 0.0 {
        return Err(Error::BoundUndefined);
    }
    if !(h1_star > 0.0 && h1_star <= 1.0) {
        return Err(Error::InvalidSpec(format!("h1* must be in (0, 1], got {h1_star}")));
    }
    Ok((num_records as f64 * (1.0 / xi).ln() / h1_star).ceil() as u64)
}

/// Fraction of `n` uniform `K`-subsets of the largest record that are
/// unique in the dataset.
pub fn estimate_h1_star(data: &Dataset, index: &InvertedIndex, k: usize, n: usize, seed: u64) -> Result<f64> {
    let rec = data.record(data.largest_record()).items();
    if k == 0 || rec.len() < k {
        return Err(Error::NoEligibleRecord { k });
    }
    if n == 0 {
        return Err(Error::InvalidSpec("need at least one draw".into()));
    }
    let mut rng = rng::from_seed(seed);
    let mut positions = Vec::with_capacity(k);
    let mut items = Vec::with_capacity(k);
    let mut scratch = Scratch::new();
    let mut unique = 0usize;
    for _ in 0..n {
        choose_positions(&mut rng, rec.len(), k, &mut positions);
        items.clear();
        items.extend(positions.iter().map(|&p| rec[p]));
        items.sort_unstable();
        if index.users_unchecked(&items, &mut scratch).len() == 1 {
            unique += 1;
        }
    }
    Ok(unique as f64 / n as f64)
}
