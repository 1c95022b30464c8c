//! Empirical distributions of the maximum of `n` draws, for plotting.
//!
//! Two register models are tabulated side by side: the maximum of `n`
//! `Gumbel(0)` draws against the `Gumbel(ln n)` density, and the maximum of
//! `n` geometric(1/2) draws (the position of the first one-bit of a uniform
//! hash) against its exact mass function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gumbel;
use crate::hashing::{subkey, HashSeed};

use super::ks::max_of_gumbel_samples;

const DOMAIN_GEOMETRIC: u64 = u64::from_le_bytes(*b"gs-geom\0");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Gumbel,
    Geometric,
}

/// One histogram cell. For `gumbel`, `x` is the bin center and both columns
/// are densities; for `geometric`, `x` is the integer value and both columns
/// are probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramRow {
    pub distribution: Distribution,
    pub n: u64,
    pub x: f64,
    pub empirical: f64,
    pub reference: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramSpec {
    pub n: u64,
    pub samples: usize,
    pub seed: u64,
    pub bin_width: f64,
}

impl HistogramSpec {
    pub fn new(n: u64, samples: usize, seed: u64) -> Self {
        HistogramSpec {
            n,
            samples,
            seed,
            bin_width: 0.25,
        }
    }
}

/// Number of trailing draws before the first success of a fair coin, plus one.
fn geometric_draw<R: Rng>(rng: &mut R) -> u32 {
    rng.random::<u64>().trailing_zeros().min(63) + 1
}

fn max_geometric_pmf(j: u32, n: u64) -> f64 {
    let cdf = |j: u32| (1.0 - 0.5f64.powi(j as i32)).powf(n as f64);
    cdf(j) - if j == 0 { 0.0 } else { cdf(j - 1) }
}

pub fn max_of_n_histogram(spec: &HistogramSpec) -> Result<Vec<HistogramRow>> {
    if spec.n == 0 || spec.samples == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "histogram needs n >= 1 and at least one sample".into(),
        });
    }
    if !(spec.bin_width > 0.0 && spec.bin_width.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "bin_width",
            reason: format!("must be positive, got {}", spec.bin_width),
        });
    }
    let mu = (spec.n as f64).ln();
    let samples = spec.samples as f64;
    let mut rows = Vec::new();

    let w = spec.bin_width;
    let lo = ((mu - 4.0) / w).floor() as i64;
    let hi = ((mu + 8.0) / w).ceil() as i64;
    let mut counts = vec![0u64; (hi - lo) as usize];
    for x in max_of_gumbel_samples(spec.n, spec.samples, spec.seed) {
        let b = (x / w).floor() as i64;
        if (lo..hi).contains(&b) {
            counts[(b - lo) as usize] += 1;
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        let center = (lo + i as i64) as f64 * w + w / 2.0;
        rows.push(HistogramRow {
            distribution: Distribution::Gumbel,
            n: spec.n,
            x: center,
            empirical: c as f64 / (samples * w),
            reference: gumbel::pdf(center, mu),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(subkey(HashSeed(spec.seed), DOMAIN_GEOMETRIC, 0));
    let mut counts = vec![0u64; 65];
    for _ in 0..spec.samples {
        let m = (0..spec.n)
            .map(|_| geometric_draw(&mut rng))
            .max()
            .unwrap_or(0);
        counts[m as usize] += 1;
    }
    let top = (spec.n as f64).log2().ceil() as u32 + 12;
    for j in 1..=top.min(64) {
        rows.push(HistogramRow {
            distribution: Distribution::Geometric,
            n: spec.n,
            x: j as f64,
            empirical: counts[j as usize] as f64 / samples,
            reference: max_geometric_pmf(j, spec.n),
        });
    }
    Ok(rows)
}
