//! Kolmogorov-Smirnov statistics and the max-stability check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gumbel;
use crate::hashing::{subkey, HashSeed};

/// Asymptotic KS coefficient at the 1% level, `sqrt(-ln(0.005) / 2)`.
pub const KS_COEFF_1PCT: f64 = 1.627_6;

const DOMAIN_KS: u64 = u64::from_le_bytes(*b"gs-kstt\0");
const BLOCK: usize = 4096;

/// One-sample statistic `sup |F_n(x) - F(x)|`. Sorts `samples` in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample statistic `sup |F_a(x) - F_b(x)|`. Sorts both inputs.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn critical_value_1pct(n: usize) -> f64 {
    KS_COEFF_1PCT / (n as f64).sqrt()
}

pub fn critical_value_two_sample_1pct(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    KS_COEFF_1PCT * ((na + nb) / (na * nb)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsReport {
    pub n: u64,
    pub samples: usize,
    /// Location of the reference `Gumbel` the maxima were compared against.
    pub location: f64,
    pub statistic: f64,
    pub critical_value: f64,
}

impl KsReport {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_value
    }
}

/// Draws `samples` maxima of `n` iid `Gumbel(0)` variables through the
/// inverse-CDF transform of seeded uniforms.
pub fn max_of_gumbel_samples(n: u64, samples: usize, seed: u64) -> Vec<f64> {
    let blocks = samples.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(subkey(HashSeed(seed), DOMAIN_KS, b as u64));
            let len = BLOCK.min(samples - b * BLOCK);
            (0..len)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let t: f64 = rng.random();
                            // rng.random() is in [0, 1); 0 is remapped to stay in the domain
                            let t = if t == 0.0 { f64::MIN_POSITIVE } else { t };
                            gumbel::sample_from_uniform(t, 0.0).expect("t in (0, 1)")
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// KS distance between maxima of `n` `Gumbel(0)` draws and `Gumbel(ln n)`.
pub fn max_stability_ks(n: u64, samples: usize, seed: u64) -> Result<KsReport> {
    max_stability_ks_at(n, samples, seed, (n.max(1) as f64).ln())
}

/// As [`max_stability_ks`] against an arbitrary reference location; a wrong
/// location serves as a negative control.
pub fn max_stability_ks_at(n: u64, samples: usize, seed: u64, location: f64) -> Result<KsReport> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "need at least one draw per maximum".into(),
        });
    }
    if samples < 1000 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need at least 1000 samples, got {samples}"),
        });
    }
    let mut xs = max_of_gumbel_samples(n, samples, seed);
    let statistic = ks_statistic(&mut xs, |x| gumbel::cdf(x, location));
    Ok(KsReport {
        n,
        samples,
        location,
        statistic,
        critical_value: critical_value_1pct(samples),
    })
}
