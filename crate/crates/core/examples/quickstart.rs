//! Generates a small synthetic population and reports how identifying a
//! handful of known items is.
//!
//! ```text
//! cargo run --release -p unicity --example quickstart
//! ```

use unicity::synthgen::{generate, GenSpec};
use unicity::{Estimator, InvertedIndex, Mode, SampleSpec};

fn main() -> unicity::Result<()> {
    let data = generate(&GenSpec::paper_shaped_scaled(5_000, 42))?;
    let index = InvertedIndex::build(&data);
    let stats = data.stats();
    println!(
        "{} records, {} items, mean record size {:.1}",
        stats.num_users, stats.num_items, stats.mean_record_size
    );

    let spec = SampleSpec::new(0.02, 0.95)?;
    let est = Estimator::new(&data, &index);
    for k in 1..=4 {
        let uniform = est.unicity(k, &spec, Mode::Uniform, 1)?;
        let biased = est.unicity(k, &spec, Mode::Biased, 1)?;
        println!(
            "K={k}: unicity {:.3} ± {:.3} (biased sampling would report {:.3})",
            uniform.h1_hat,
            uniform.std_error(),
            biased.h1_hat
        );
    }

    let rad = est.rad(2, &SampleSpec::with_depth(0.02, 0.95, 5)?, 2)?;
    for (i, h) in rad.h.iter().enumerate() {
        println!("pairs held by exactly {} records: {:.3}", i + 1, h);
    }
    println!("pairs held by more than {}: {:.3}", rad.depth(), rad.tail);
    Ok(())
}
