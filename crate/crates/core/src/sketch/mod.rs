//! Gumbel max-register sketches.
//!
//! Three variants share one configuration type:
//!
//! * [`Variant::FullReplication`]: every item updates all `k` registers
//!   through `k` independent lanes. Registers start at `-inf`.
//! * [`Variant::StochasticAveraging`]: every item updates one register chosen
//!   by hash. Registers start at a deterministic `Gumbel(0)` draw so that
//!   each register is the maximum of `n_i + 1` draws.
//! * [`Variant::DiscretizedSa`]: stochastic averaging with registers stored as
//!   small integers `m_i`, representing `m_i - c_i` where `c_i` is a per-register
//!   hashed shift. Shift-rounding commutes with the maximum, so the discrete
//!   sketch tracks `floor(X_i + c_i) - c_i` of its continuous twin exactly.

mod continuous;
mod discrete;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use continuous::ContinuousSketch;
pub use discrete::{DiscreteSketch, REGISTER_MAX, REGISTER_MIN};

use crate::error::{Error, Result};
use crate::gumbel;
use crate::hashing::HashSeed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    FullReplication,
    StochasticAveraging,
    DiscretizedSa,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::FullReplication,
        Variant::StochasticAveraging,
        Variant::DiscretizedSa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FullReplication => "full-replication",
            Variant::StochasticAveraging => "stochastic-averaging",
            Variant::DiscretizedSa => "discretized-sa",
        }
    }

    pub fn is_discrete(self) -> bool {
        self == Variant::DiscretizedSa
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-replication" | "fr" => Ok(Variant::FullReplication),
            "stochastic-averaging" | "sa" => Ok(Variant::StochasticAveraging),
            "discretized-sa" | "discrete" => Ok(Variant::DiscretizedSa),
            _ => Err(Error::InvalidParameter {
                name: "variant",
                reason: format!("unknown variant `{s}`"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// `exp` of the mean register, normalized by `e^-gamma`.
    Geometric,
    /// Reciprocal of the sum of `exp(-register)`.
    Harmonic,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Geometric => "geometric",
            Estimator::Harmonic => "harmonic",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Estimator::Geometric),
            "harmonic" => Ok(Estimator::Harmonic),
            _ => Err(Error::InvalidParameter {
                name: "estimator",
                reason: format!("unknown estimator `{s}`"),
            }),
        }
    }
}

/// Normalization of the harmonic estimate over shift-rounded registers,
/// where `S = sum_i exp(-(m_i - c_i))`.
///
/// A rounded register is its continuous value minus an independent `U[0, 1)`
/// term, which inflates `E[exp(-X')]` by `E[e^U] = e - 1`. The `Offset` form
/// with `1/2` is the published formula; it does not undo that inflation and
/// saturates near `2k` for large streams. `Scale(e - 1)` does.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarmonicNorm {
    /// `Z = k / (offset + S / k) - 1`
    Offset(f64),
    /// `Z = scale * k^2 / S - 1`
    Scale(f64),
}

impl HarmonicNorm {
    pub const PUBLISHED_OFFSET: f64 = 0.5;

    pub const PUBLISHED: HarmonicNorm = HarmonicNorm::Offset(Self::PUBLISHED_OFFSET);

    /// `Scale(e - 1)`, the first-moment correction for a uniform rounding shift.
    pub const MOMENT_MATCHED: HarmonicNorm = HarmonicNorm::Scale(std::f64::consts::E - 1.0);
}

impl Default for HarmonicNorm {
    fn default() -> Self {
        HarmonicNorm::PUBLISHED
    }
}

/// Immutable parameters that define a sketch. Two sketches merge only when
/// their configurations are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SketchConfig {
    k: u32,
    seed: HashSeed,
    variant: Variant,
}

impl SketchConfig {
    pub fn new(k: u32, seed: impl Into<HashSeed>, variant: Variant) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: "register count must be at least 1".into(),
            });
        }
        Ok(SketchConfig {
            k,
            seed: seed.into(),
            variant,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> HashSeed {
        self.seed
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn with_variant(self, variant: Variant) -> Self {
        SketchConfig { variant, ..self }
    }

    pub fn with_seed(self, seed: impl Into<HashSeed>) -> Self {
        SketchConfig {
            seed: seed.into(),
            ..self
        }
    }

    pub(crate) fn ensure_compatible(&self, other: &SketchConfig) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::IncompatibleConfig {
                left: *self,
                right: *other,
            })
        }
    }
}

impl fmt::Display for SketchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, k={}, seed={})", self.variant, self.k, self.seed.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Estimated number of distinct items.
    pub value: f64,
    /// Predicted relative standard error for this estimator, variant and `k`.
    pub predicted_rse: f64,
    pub estimator: Estimator,
}

/// Per-register relative standard deviation constant `c` such that the
/// estimator's relative standard error is about `c / sqrt(k)`.
///
/// * geometric, continuous: `sd(X) = pi / sqrt(6)`
/// * geometric, discrete: `sqrt(pi^2 / 6 + 1/4)`. An independent `U[0, 1)`
///   rounding term only adds `1/12` to the register variance, so this
///   prediction is conservative by about 4.5%.
/// * harmonic, continuous: `sd(e^-X) / E[e^-X] = 1`
/// * harmonic, discrete: `sqrt(2 / (e - 1))`, the relative sd of `e^-X e^U`
pub fn rse_constant(estimator: Estimator, variant: Variant) -> f64 {
    match (estimator, variant.is_discrete()) {
        (Estimator::Geometric, false) => gumbel::VARIANCE.sqrt(),
        (Estimator::Geometric, true) => (gumbel::VARIANCE + 0.25).sqrt(),
        (Estimator::Harmonic, false) => 1.0,
        (Estimator::Harmonic, true) => (2.0 / (std::f64::consts::E - 1.0)).sqrt(),
    }
}

pub fn predicted_rse(estimator: Estimator, variant: Variant, k: u32) -> f64 {
    rse_constant(estimator, variant) / (k as f64).sqrt()
}

/// Shift-rounding `floor(x + c) - c`. The result lies in `(x - 1, x]` and
/// `shift_round(max(x, y), c) == max(shift_round(x, c), shift_round(y, c))`.
#[inline]
pub fn shift_round(x: f64, c: f64) -> f64 {
    (x + c).floor() - c
}

/// Either kind of sketch, as stored in a sketch file.
#[derive(Clone, Debug, PartialEq)]
pub enum Sketch {
    Continuous(ContinuousSketch),
    Discrete(DiscreteSketch),
}

impl Sketch {
    pub fn new(config: SketchConfig) -> Self {
        match config.variant() {
            Variant::DiscretizedSa => Sketch::Discrete(DiscreteSketch::from_config(config)),
            _ => Sketch::Continuous(ContinuousSketch::from_config(config)),
        }
    }

    pub fn config(&self) -> &SketchConfig {
        match self {
            Sketch::Continuous(s) => s.config(),
            Sketch::Discrete(s) => s.config(),
        }
    }

    pub fn update(&mut self, item: &[u8]) {
        match self {
            Sketch::Continuous(s) => s.update(item),
            Sketch::Discrete(s) => s.update(item),
        }
    }

    /// `norm` applies only to the harmonic estimate of a discretized sketch.
    pub fn estimate(&self, estimator: Estimator, norm: HarmonicNorm) -> Result<Estimate> {
        match (self, estimator) {
            (Sketch::Continuous(s), Estimator::Geometric) => s.geometric_estimate(),
            (Sketch::Continuous(s), Estimator::Harmonic) => s.harmonic_estimate(),
            (Sketch::Discrete(s), Estimator::Geometric) => Ok(s.geometric_estimate()),
            (Sketch::Discrete(s), Estimator::Harmonic) => s.harmonic_estimate_with(norm),
        }
    }

    pub fn merge(&self, other: &Sketch) -> Result<Sketch> {
        match (self, other) {
            (Sketch::Continuous(a), Sketch::Continuous(b)) => a.merge(b).map(Sketch::Continuous),
            (Sketch::Discrete(a), Sketch::Discrete(b)) => a.merge(b).map(Sketch::Discrete),
            _ => Err(Error::IncompatibleConfig {
                left: *self.config(),
                right: *other.config(),
            }),
        }
    }
}

impl From<ContinuousSketch> for Sketch {
    fn from(s: ContinuousSketch) -> Self {
        Sketch::Continuous(s)
    }
}

impl From<DiscreteSketch> for Sketch {
    fn from(s: DiscreteSketch) -> Self {
        Sketch::Discrete(s)
    }
}
