use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use unicity::oracle::{self, DEFAULT_BUDGET};
use unicity::sampler::StepScratch;
use unicity::{geweke_z, rng, ChainConfig, Dataset, InvertedIndex, KApps, Sampler};

fn states(data: &Dataset, k: usize) -> Vec<KApps> {
    oracle::enumerate_omega(data, k, DEFAULT_BUDGET).unwrap().into_keys().collect()
}

fn chi_square_p(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new(counts.len() as f64 - 1.0).unwrap().cdf(stat)
}

#[test]
fn fresh_chains_are_uniform_on_three_states() {
    let data = Dataset::parse_str("a b c\nb c\nc\n").unwrap();
    let idx = InvertedIndex::build(&data);
    let sampler = Sampler::new(&data, &idx, 1).unwrap();
    let omega = states(&data, 1);
    assert_eq!(omega.len(), 3);
    let mut counts = vec![0u64; 3];
    for j in 0..30_000 {
        let x = sampler.mcmc_sample(&ChainConfig::new(1, rng::derive(9, j)).with_burn_in(500), None).unwrap();
        counts[omega.iter().position(|s| *s == x).unwrap()] += 1;
    }
    assert!(chi_square_p(&counts) > 0.001, "{counts:?}");
}

#[test]
fn observed_transitions_match_the_matrix() {
    let data = Dataset::parse_str("1 2 3\n2 3\n3 4\n1 4 5\n").unwrap();
    let idx = InvertedIndex::build(&data);
    let sampler = Sampler::new(&data, &idx, 2).unwrap();
    let omega = states(&data, 2);
    let pos: BTreeMap<&KApps, usize> = omega.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let p = oracle::transition_matrix(&sampler, &omega).unwrap();

    let n = omega.len();
    let mut counts = vec![vec![0u64; n]; n];
    let mut rng = rng::from_seed(31);
    let mut state = sampler.start(None, &mut rng).unwrap();
    let mut scratch = StepScratch::default();
    for _ in 0..1_000_000 {
        let from = pos[&state.current];
        sampler.mcmc_step(&mut state, &mut rng, &mut scratch);
        counts[from][pos[&state.current]] += 1;
    }
    for x in 0..n {
        let visits: u64 = counts[x].iter().sum();
        assert!(visits > 10_000);
        for y in 0..n {
            let freq = counts[x][y] as f64 / visits as f64;
            assert!((freq - p[x][y]).abs() < 0.01, "P({x},{y}) = {} observed {freq}", p[x][y]);
        }
    }
}

#[test]
fn chain_never_leaves_omega() {
    let data = Dataset::parse_str("1 2 3 4\n3 4 5\n5 6\n7\n").unwrap();
    let idx = InvertedIndex::build(&data);
    let omega = states(&data, 2);
    let sampler = Sampler::new(&data, &idx, 2).unwrap();
    let mut rng = rng::from_seed(2);
    let mut state = sampler.start(None, &mut rng).unwrap();
    let mut scratch = StepScratch::default();
    for _ in 0..20_000 {
        sampler.mcmc_step(&mut state, &mut rng, &mut scratch);
        assert!(omega.binary_search(&state.current).is_ok());
        assert!(state.current_support >= 1);
    }
}

#[test]
fn geweke_on_independent_bernoulli_traces_is_mostly_small() {
    use rand::Rng;
    let mut rng = rng::from_seed(77);
    let trials = 1000;
    let small = (0..trials)
        .filter(|_| {
            let trace: Vec<bool> = (0..1000).map(|_| rng.random_bool(0.3)).collect();
            geweke_z(&trace).unwrap().abs() <= 3.0
        })
        .count();
    assert!(small >= 990, "{small}/{trials}");
}
