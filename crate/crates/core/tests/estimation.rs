use unicity::oracle::{self, DEFAULT_BUDGET};
use unicity::sampler::estimate_h1_star;
use unicity::{mixing_bound, rng, sample_size_unicity, Dataset, Estimator, InvertedIndex, Mode, SampleSpec};

const TOY: &str = "1 2 3\n2 3\n3 4 5\n1 5\n2 4 5 6\n6 7\n";

fn toy() -> (Dataset, InvertedIndex) {
    let d = Dataset::parse_str(TOY).unwrap();
    let idx = InvertedIndex::build(&d);
    (d, idx)
}

fn bound(d: &Dataset, idx: &InvertedIndex, k: usize) -> usize {
    let h1_star = oracle::exact_h1_star(d, idx, k, DEFAULT_BUDGET).unwrap();
    mixing_bound(d.len(), 1e-3, h1_star).unwrap() as usize
}

#[test]
fn hoeffding_interval_covers_the_truth() {
    let (d, idx) = toy();
    let exact = oracle::exact_unicity(&d, 2, DEFAULT_BUDGET).unwrap();
    let spec = SampleSpec::new(0.05, 0.9).unwrap();
    let est = Estimator::new(&d, &idx).burn_in(bound(&d, &idx, 2));
    let runs = 300;
    let covered = (0..runs)
        .filter(|&r| {
            let h = est.unicity(2, &spec, Mode::Uniform, rng::derive(3, r)).unwrap().h1_hat;
            (h - exact).abs() <= 0.05
        })
        .count();
    assert!(covered as f64 >= 0.9 * runs as f64, "{covered}/{runs}");
}

#[test]
fn biased_sampling_underestimates() {
    let d = Dataset::parse_str("a b\na b\na b\na b\nc d e f\n").unwrap();
    let idx = InvertedIndex::build(&d);
    let est = Estimator::new(&d, &idx).burn_in(bound(&d, &idx, 2));
    let exact = oracle::exact_unicity(&d, 2, DEFAULT_BUDGET).unwrap();
    let expected_biased = oracle::biased_expected_unicity(&d, 2, DEFAULT_BUDGET).unwrap();
    assert!(expected_biased < exact);
    let n = sample_size_unicity(0.02, 0.99).unwrap();
    let uniform = est.unicity_n(2, n, Mode::Uniform, 1).unwrap().h1_hat;
    let biased = est.unicity_n(2, n, Mode::Biased, 1).unwrap().h1_hat;
    assert!((uniform - exact).abs() < 0.02, "{uniform} vs {exact}");
    assert!((biased - expected_biased).abs() < 0.02, "{biased} vs {expected_biased}");
}

#[test]
fn rad_tail_holds_mass_beyond_the_depth() {
    let d = Dataset::parse_str(&"x y\n".repeat(6)).unwrap();
    let idx = InvertedIndex::build(&d);
    let est = Estimator::new(&d, &idx).burn_in(10);
    let spec = SampleSpec::with_depth(0.1, 0.9, 3).unwrap();
    let hist = est.rad(1, &spec, 0).unwrap();
    assert_eq!(hist.h, vec![0.0, 0.0, 0.0]);
    assert_eq!(hist.tail, 1.0);
}

#[test]
fn h1_star_estimate_is_within_hoeffding_error() {
    let (d, idx) = toy();
    for k in 1..=3 {
        let exact = oracle::exact_h1_star(&d, &idx, k, DEFAULT_BUDGET).unwrap();
        let n = sample_size_unicity(0.02, 0.99).unwrap();
        let approx = estimate_h1_star(&d, &idx, k, n, 5).unwrap();
        assert!((approx - exact).abs() <= 0.02, "K={k}: {approx} vs {exact}");
    }
}

#[test]
fn estimates_do_not_depend_on_execution() {
    let (d, idx) = toy();
    let spec = SampleSpec::new(0.05, 0.9).unwrap();
    let seq = Estimator::new(&d, &idx).execution(unicity::Execution::Sequential);
    let par = Estimator::new(&d, &idx).execution(unicity::Execution::Parallel);
    for mode in [Mode::Uniform, Mode::Biased] {
        assert_eq!(seq.unicity(2, &spec, mode, 8).unwrap(), par.unicity(2, &spec, mode, 8).unwrap());
    }
    assert_eq!(seq.rad(2, &SampleSpec::with_depth(0.05, 0.9, 4).unwrap(), 3).unwrap(), par.rad(2, &SampleSpec::with_depth(0.05, 0.9, 4).unwrap(), 3).unwrap());
    let sizes = [3, 5, 6];
    assert_eq!(
        seq.unicity_vs_size(2, &sizes, &spec, 2, 4).unwrap(),
        par.unicity_vs_size(2, &sizes, &spec, 2, 4).unwrap()
    );
}
