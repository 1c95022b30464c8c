//! Monte Carlo experiments over whole sketches.
//!
//! Each trial builds an independent sketch (its own hash seed, derived from
//! the experiment seed and the trial index) over the items `0..n` encoded as
//! little-endian `u64`s. Results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hashing::{bucket_shift, subkey, HashSeed, ItemHash};
use crate::sketch::{
    rse_constant, ContinuousSketch, DiscreteSketch, Estimator, HarmonicNorm, Sketch, SketchConfig,
    Variant,
};

pub const MIN_TRIALS: u32 = 30;

const DOMAIN_TRIAL: u64 = u64::from_le_bytes(*b"gs-tral\0");
const DOMAIN_STREAM: u64 = u64::from_le_bytes(*b"gs-strm\0");

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentParams {
    pub variant: Variant,
    pub n: u64,
    pub k: u32,
    pub trials: u32,
    pub seed: u64,
    /// Used only for harmonic estimates of discretized sketches.
    pub harmonic_norm: HarmonicNorm,
}

impl ExperimentParams {
    pub fn new(variant: Variant, n: u64, k: u32, trials: u32, seed: u64) -> Self {
        ExperimentParams {
            variant,
            n,
            k,
            trials,
            seed,
            harmonic_norm: HarmonicNorm::MOMENT_MATCHED,
        }
    }

    pub fn with_harmonic_norm(self, harmonic_norm: HarmonicNorm) -> Self {
        ExperimentParams {
            harmonic_norm,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: format!("need at least {MIN_TRIALS} trials, got {}", self.trials),
            });
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "need at least one distinct item".into(),
            });
        }
        SketchConfig::new(self.k, 0, self.variant).map(|_| ())
    }

    pub fn trial_config(&self, trial: u32) -> SketchConfig {
        let seed = subkey(HashSeed(self.seed), DOMAIN_TRIAL, trial as u64);
        SketchConfig::new(self.k, seed, self.variant).expect("validated k")
    }
}

/// Chebyshev multiplier used for the coverage bound and the probability it
/// guarantees: `sqrt(6)` sigma (5/6) for geometric, `2` sigma (3/4) for harmonic.
pub fn chebyshev_multiplier(estimator: Estimator) -> f64 {
    match estimator {
        Estimator::Geometric => 6f64.sqrt(),
        Estimator::Harmonic => 2.0,
    }
}

/// Coverage probability the error bound is guaranteed to hold with.
pub fn guaranteed_coverage(variant: Variant, estimator: Estimator) -> f64 {
    match (variant, estimator) {
        (Variant::FullReplication, Estimator::Geometric) => 5.0 / 6.0,
        (Variant::FullReplication, Estimator::Harmonic) => 3.0 / 4.0,
        (Variant::StochasticAveraging, Estimator::Geometric) => 2.0 / 3.0,
        (Variant::StochasticAveraging, Estimator::Harmonic) => 3.0 / 4.0,
        (Variant::DiscretizedSa, _) => 2.0 / 3.0,
    }
}

/// Absolute error bound `multiplier * c * n / sqrt(k)` with lower-order
/// terms dropped; `pi * n / sqrt(k)` for the continuous geometric estimate and
/// `2 n / sqrt(k)` for the continuous harmonic one.
pub fn error_bound(variant: Variant, estimator: Estimator, n: u64, k: u32) -> f64 {
    chebyshev_multiplier(estimator) * rse_constant(estimator, variant) * n as f64
        / (k as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub variant: Variant,
    pub estimator: Estimator,
    pub n: u64,
    pub k: u32,
    pub trials: u32,
    pub seed: u64,
    /// Sample standard deviation of the estimates divided by `n`.
    pub empirical_rse: f64,
    /// `mean(Z) / n - 1`.
    pub relative_bias: f64,
    pub predicted_rse: f64,
    /// Fraction of trials with `|Z - n| <= bound_value`.
    pub coverage_fraction: f64,
    pub bound_value: f64,
    pub guaranteed_coverage: f64,
    #[serde(skip)]
    pub estimates: Vec<f64>,
}

impl ExperimentReport {
    fn from_estimates(
        params: &ExperimentParams,
        estimator: Estimator,
        estimates: Vec<f64>,
    ) -> Self {
        let n = params.n as f64;
        let t = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / t;
        let var = estimates.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (t - 1.0);
        let bound_value = error_bound(params.variant, estimator, params.n, params.k);
        let covered = estimates
            .iter()
            .filter(|&&z| (z - n).abs() <= bound_value)
            .count();
        ExperimentReport {
            variant: params.variant,
            estimator,
            n: params.n,
            k: params.k,
            trials: params.trials,
            seed: params.seed,
            empirical_rse: var.sqrt() / n,
            relative_bias: mean / n - 1.0,
            predicted_rse: crate::sketch::predicted_rse(estimator, params.variant, params.k),
            coverage_fraction: covered as f64 / t,
            bound_value,
            guaranteed_coverage: guaranteed_coverage(params.variant, estimator),
            estimates,
        }
    }

    /// Empirical RSE in units of `k^-1/2`.
    pub fn normalized_rse(&self) -> f64 {
        self.empirical_rse * (self.k as f64).sqrt()
    }
}

/// Sketch for one trial over the items `0..n`.
pub fn build_trial_sketch(params: &ExperimentParams, trial: u32) -> Sketch {
    let mut sketch = Sketch::new(params.trial_config(trial));
    for i in 0..params.n {
        sketch.update(&i.to_le_bytes());
    }
    sketch
}

/// Runs `params.trials` sketch builds and evaluates every requested estimator
/// on the same sketches.
pub fn run_experiment(
    params: &ExperimentParams,
    estimators: &[Estimator],
) -> Result<Vec<ExperimentReport>> {
    params.validate()?;
    let per_trial: Vec<Vec<f64>> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let sketch = build_trial_sketch(params, t);
            estimators
                .iter()
                .map(|&e| {
                    sketch
                        .estimate(e, params.harmonic_norm)
                        .map(|est| est.value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(estimators
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let zs = per_trial.iter().map(|row| row[j]).collect();
            ExperimentReport::from_estimates(params, e, zs)
        })
        .collect())
}

pub fn run_estimator_experiment(
    params: &ExperimentParams,
    estimator: Estimator,
) -> Result<ExperimentReport> {
    Ok(run_experiment(params, &[estimator])?.remove(0))
}

/// Continuous and discretized stochastic-averaging sketches fed the same
/// stream side by side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwinReport {
    pub n: u64,
    pub k: u32,
    pub trials: u32,
    /// Steps at which some discrete register differed from the shift-rounded
    /// continuous register (excluding saturated registers).
    pub invariant_violations: u64,
    pub steps_checked: u64,
    pub continuous_rse: f64,
    pub discrete_rse: f64,
}

impl TwinReport {
    pub fn rse_ratio(&self) -> f64 {
        self.discrete_rse / self.continuous_rse
    }
}

fn twin_matches(c: &ContinuousSketch, d: &DiscreteSketch, b: usize) -> bool {
    let m = d.registers()[b];
    if m == crate::sketch::REGISTER_MIN || m == crate::sketch::REGISTER_MAX {
        return true;
    }
    m as f64 == (c.registers()[b] + d.shift(b)).floor()
}

/// Runs the twin pair for every trial, checking after each update that the
/// touched discrete register equals `floor(X_b + c_b)` of the continuous one,
/// and compares the geometric estimates' RSE.
pub fn run_twin_experiment(n: u64, k: u32, trials: u32, seed: u64) -> Result<TwinReport> {
    let params = ExperimentParams::new(Variant::DiscretizedSa, n, k, trials, seed);
    params.validate()?;
    let rows: Vec<(u64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let dcfg = params.trial_config(t);
            let ccfg = dcfg.with_variant(Variant::StochasticAveraging);
            let mut c = ContinuousSketch::new(ccfg).expect("continuous config");
            let mut d = DiscreteSketch::new(dcfg).expect("discrete config");
            let seed = dcfg.seed();
            let mut violations = (0..k as usize)
                .filter(|&b| !twin_matches(&c, &d, b))
                .count() as u64;
            for i in 0..n {
                let h = ItemHash::new(&i.to_le_bytes(), seed);
                c.update_hash(h);
                d.update_hash(h);
                let b = h.bucket(seed, k) as usize;
                if !twin_matches(&c, &d, b) {
                    violations += 1;
                }
            }
            violations += (0..k as usize)
                .filter(|&b| !twin_matches(&c, &d, b))
                .count() as u64;
            debug_assert_eq!(d.shift(0), bucket_shift(0, seed));
            let zc = c.geometric_estimate().expect("initialized").value;
            let zd = d.geometric_estimate().value;
            (violations, zc, zd)
        })
        .collect();
    let sd = |zs: Vec<f64>| {
        let m = zs.iter().sum::<f64>() / zs.len() as f64;
        (zs.iter().map(|z| (z - m).powi(2)).sum::<f64>() / (zs.len() as f64 - 1.0)).sqrt()
    };
    Ok(TwinReport {
        n,
        k,
        trials,
        invariant_violations: rows.iter().map(|r| r.0).sum(),
        steps_checked: trials as u64 * (n + 2 * k as u64),
        continuous_rse: sd(rows.iter().map(|r| r.1).collect()) / n as f64,
        discrete_rse: sd(rows.iter().map(|r| r.2).collect()) / n as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundingReport {
    pub eps: f64,
    pub sketches: u32,
    /// Largest `|ln Z' - ln Z|` over all sketches, geometric estimate.
    pub max_geometric_distortion: f64,
    /// Same for the harmonic estimate.
    pub max_harmonic_distortion: f64,
}

/// Rounds `sketches` random sketches (mixed variants, random stream sizes)
/// to multiples of `eps` and records the worst log-distortion of the estimates.
pub fn rounding_distortion(eps: f64, sketches: u32, seed: u64) -> Result<RoundingReport> {
    let rows: Vec<(f64, f64)> = (0..sketches)
        .into_par_iter()
        .map(|s| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(subkey(HashSeed(seed), DOMAIN_STREAM, s as u64));
            let variant = if s % 2 == 0 {
                Variant::StochasticAveraging
            } else {
                Variant::FullReplication
            };
            let k = [16u32, 64, 256][rng.random_range(0..3)];
            let n: u64 = match variant {
                Variant::FullReplication => rng.random_range(1..2_000),
                _ => rng.random_range(k as u64..50_000),
            };
            let cfg = SketchConfig::new(k, rng.random::<u64>(), variant).expect("k >= 1");
            let mut sketch = ContinuousSketch::new(cfg).expect("continuous");
            let offset: u64 = rng.random();
            for i in 0..n {
                sketch.update(&offset.wrapping_add(i).to_le_bytes());
            }
            let rounded = sketch.round_registers(eps)?;
            let dist = |e: Estimator| -> Result<f64> {
                Ok((rounded.estimate(e)?.value.ln() - sketch.estimate(e)?.value.ln()).abs())
            };
            Ok((dist(Estimator::Geometric)?, dist(Estimator::Harmonic)?))
        })
        .collect::<Result<_>>()?;
    Ok(RoundingReport {
        eps,
        sketches,
        max_geometric_distortion: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        max_harmonic_distortion: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MergeReport {
    pub pairs: u32,
    /// Pairs whose merged registers differed from the union sketch.
    pub register_mismatches: u32,
    /// Pairs whose merged estimates differed bit-wise from the union sketch.
    pub estimate_mismatches: u32,
}

/// Builds sketches of random overlapping streams `A`, `B` and of `A u B`
/// and compares `merge(sketch(A), sketch(B))` with `sketch(A u B)`.
pub fn merge_union_check(pairs: u32, seed: u64) -> MergeReport {
    let rows: Vec<(bool, bool)> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(subkey(
                HashSeed(seed),
                DOMAIN_STREAM,
                1 << 32 | p as u64,
            ));
            let variant = Variant::ALL[p as usize % 3];
            let k = rng.random_range(1..=512u32);
            let cfg = SketchConfig::new(k, rng.random::<u64>(), variant).expect("k >= 1");
            let a_lo = rng.random_range(0..5_000u64);
            let a_hi = a_lo + rng.random_range(0..3_000u64);
            let b_lo = rng.random_range(0..5_000u64);
            let b_hi = b_lo + rng.random_range(0..3_000u64);
            let (mut a, mut b, mut u) = (Sketch::new(cfg), Sketch::new(cfg), Sketch::new(cfg));
            for i in a_lo..a_hi {
                a.update(&i.to_le_bytes());
                u.update(&i.to_le_bytes());
            }
            for i in b_lo..b_hi {
                b.update(&i.to_le_bytes());
                u.update(&i.to_le_bytes());
            }
            let merged = a.merge(&b).expect("same config");
            let registers_equal = merged == u;
            let estimates_equal = [Estimator::Geometric, Estimator::Harmonic]
                .iter()
                .all(|&e| {
                    let norm = HarmonicNorm::MOMENT_MATCHED;
                    match (merged.estimate(e, norm), u.estimate(e, norm)) {
                        (Ok(x), Ok(y)) => x.value.to_bits() == y.value.to_bits(),
                        (Err(x), Err(y)) => x == y,
                        _ => false,
                    }
                });
            (registers_equal, estimates_equal)
        })
        .collect();
    MergeReport {
        pairs,
        register_mismatches: rows.iter().filter(|r| !r.0).count() as u32,
        estimate_mismatches: rows.iter().filter(|r| !r.1).count() as u32,
    }
}
