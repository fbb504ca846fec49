//! Re-identification risk of set-valued data.
//!
//! A dataset is a collection of records, each a set of items. The unicity of
//! `K`-item subsets is the fraction of distinct subsets occurring in the data
//! that are contained in exactly one record. This crate estimates unicity and
//! the full relative abundance distribution (RAD) by sampling subsets
//! uniformly with a Metropolis-Hastings chain, controls sample sizes with
//! Hoeffding bounds, provides exact brute-force oracles for small instances
//! and fits an exponential decay model to extrapolate unicity to larger
//! populations.
//!
//! ```
//! use unicity::{Dataset, InvertedIndex, KApps};
//!
//! let data = Dataset::parse_str("a b c\nb c\nc\n").unwrap();
//! let index = InvertedIndex::build(&data);
//! let bc = KApps::from_tokens(&data, ["b", "c"]).unwrap();
//! assert_eq!(index.support(&bc).unwrap().count, 2);
//! ```

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod index;
pub mod intersect;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod synthgen;

pub use dataset::{Dataset, DatasetStats, ItemId, KApps, Loaded, Record};
pub use error::{Error, Result};
pub use estimator::{
    homogeneity, sample_size_rad, sample_size_unicity, CurveRow, Estimator, Mode, RadHistogram,
    SampleSpec, UnicityEstimate,
};
pub use exec::Execution;
pub use index::{InvertedIndex, Support};
pub use model::{CurvePoint, FitOptions, FitResult};
pub use sampler::{geweke_z, mixing_bound, ChainConfig, ChainState, Convergence, EligibleView, Sampler};
pub use synthgen::{ExpectedStats, GenSpec, SizeDistribution};
