//! Cardinality estimation with Gumbel-distributed registers.
//!
//! Each item is hashed to a uniform `t` and mapped to a `Gumbel(0)` draw
//! `-ln(-ln t)`. A register holding the maximum of `n` such draws is
//! distributed `Gumbel(ln n)`, so `n` can be read back from the register
//! through either the geometric mean of the registers or the harmonic mean
//! of `exp(-register)`.
//!
//! ```
//! use gumbel_sketch::{Estimator, HarmonicNorm, Sketch, SketchConfig, Variant};
//!
//! let config = SketchConfig::new(1024, 7, Variant::StochasticAveraging).unwrap();
//! let mut sketch = Sketch::new(config);
//! for i in 0..100_000u32 {
//!     sketch.update(&i.to_le_bytes());
//! }
//! let est = sketch.estimate(Estimator::Harmonic, HarmonicNorm::default()).unwrap();
//! assert!((est.value / 100_000.0 - 1.0).abs() < 5.0 * est.predicted_rse);
//! ```
//!
//! Modules:
//! * [`gumbel`]: distribution functions and moment constants
//! * [`hashing`]: seeded hashing onto `(0, 1)`, buckets, init values and shifts
//! * [`sketch`]: the sketch variants, estimators and merge
//! * [`codec`]: the binary sketch file format
//! * [`validation`]: oracles and Monte Carlo experiments for the error bounds

pub mod codec;
pub mod error;
pub mod gumbel;
pub mod hashing;
pub mod sketch;
pub mod validation;

pub use error::{CodecError, Error, Result};
pub use hashing::HashSeed;
pub use sketch::{
    predicted_rse, shift_round, ContinuousSketch, DiscreteSketch, Estimate, Estimator,
    HarmonicNorm, Sketch, SketchConfig, Variant,
};
