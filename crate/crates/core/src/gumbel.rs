//! Unit-scale Gumbel distribution.
//!
//! `Gumbel(mu)` has CDF `exp(-exp(-(x - mu)))`. The maximum of `n` independent
//! `Gumbel(0)` draws is `Gumbel(ln n)`, which is what lets a running maximum
//! of hashed draws encode a distinct count.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant: the mean of `Gumbel(0)`.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Variance of any unit-scale Gumbel distribution, `pi^2 / 6`.
pub const VARIANCE: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// Largest double strictly below one, `1 - 2^-53`.
pub const MAX_UNIFORM: f64 = 1.0 - f64::EPSILON / 2.0;

/// Location parameter of a unit-scale Gumbel distribution.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct GumbelLocation(f64);

impl GumbelLocation {
    pub const STANDARD: GumbelLocation = GumbelLocation(0.0);

    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_finite() {
            Ok(GumbelLocation(mu))
        } else {
            Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("location must be finite, got {mu}"),
            })
        }
    }

    /// Location of the maximum of `n` iid `Gumbel(0)` variables.
    pub fn max_of(n: u64) -> Self {
        GumbelLocation((n.max(1) as f64).ln())
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn mean(self) -> f64 {
        self.0 + EULER_GAMMA
    }

    pub fn cdf(self, x: f64) -> f64 {
        cdf(x, self.0)
    }

    pub fn pdf(self, x: f64) -> f64 {
        pdf(x, self.0)
    }

    pub fn quantile(self, p: f64) -> Result<f64> {
        quantile(p, self.0)
    }
}

pub fn cdf(x: f64, mu: f64) -> f64 {
    (-(-(x - mu)).exp()).exp()
}

pub fn pdf(x: f64, mu: f64) -> f64 {
    let z = -(x - mu);
    // exp(z - exp(z)) stays finite where exp(z) * exp(-exp(z)) would be inf * 0.
    (z - z.exp()).exp()
}

/// Maps a uniform `t` in `(0, 1)` to a `Gumbel(mu)` draw, `-ln(-ln t) + mu`.
pub fn sample_from_uniform(t: f64, mu: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain {
            name: "t",
            value: t,
        });
    }
    Ok(transform(t) + mu)
}

pub fn quantile(p: f64, mu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            name: "p",
            value: p,
        });
    }
    Ok(transform(p) + mu)
}

/// Unchecked `Gumbel(0)` transform for callers that already hold a value in
/// `(0, 1)` (the hashing module guarantees this).
#[inline]
pub(crate) fn transform(t: f64) -> f64 {
    -(-t.min(MAX_UNIFORM).ln()).ln()
}
