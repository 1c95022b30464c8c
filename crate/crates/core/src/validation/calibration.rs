//! Fitting the normalization of the harmonic estimate on simulated streams.
//!
//! For a stochastic-averaging sketch with harmonic sum `S`, the offset form
//! `Z = k / (a + S/k) - 1` equals `n` exactly when `a = k/(n+1) - S/k`, and the
//! scale form `Z = s k^2 / S - 1` equals `n` when `s = (n+1) S / k^2`. Both
//! estimates are monotone in the constant, so the constant that puts the
//! median of `Z` at `n` is the median of the per-trial solutions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sketch::{HarmonicNorm, Sketch, Variant};

use super::experiment::{build_trial_sketch, ExperimentParams, MIN_TRIALS};

/// Two-sided normal quantile for a 95% interval.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CalibrationForm {
    Offset,
    Scale,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub form: CalibrationForm,
    pub variant: Variant,
    pub k: u32,
    pub n: u64,
    pub trials: u32,
    pub constant: f64,
    /// Distribution-free 95% interval for the median (order statistics).
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Calibration {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    pub fn norm(&self) -> HarmonicNorm {
        match self.form {
            CalibrationForm::Offset => HarmonicNorm::Offset(self.constant),
            CalibrationForm::Scale => HarmonicNorm::Scale(self.constant),
        }
    }
}

fn harmonic_sum(sketch: &Sketch) -> f64 {
    match sketch {
        Sketch::Continuous(s) => s.harmonic_sum(),
        Sketch::Discrete(s) => s.harmonic_sum(),
    }
}

fn fit(params: &ExperimentParams, form: CalibrationForm) -> Result<Calibration> {
    if params.variant == Variant::FullReplication {
        return Err(Error::InvalidParameter {
            name: "variant",
            reason: "calibration applies to stochastic-averaging sketches".into(),
        });
    }
    if params.trials < MIN_TRIALS {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: format!("need at least {MIN_TRIALS} trials, got {}", params.trials),
        });
    }
    if params.n <= params.k as u64 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("calibration needs n > k, got n={} k={}", params.n, params.k),
        });
    }
    let k = params.k as f64;
    let n1 = params.n as f64 + 1.0;
    let mut solutions: Vec<f64> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let s = harmonic_sum(&build_trial_sketch(params, t));
            match form {
                CalibrationForm::Offset => k / n1 - s / k,
                CalibrationForm::Scale => n1 * s / (k * k),
            }
        })
        .collect();
    solutions.sort_by(f64::total_cmp);
    let (constant, ci_low, ci_high) = median_with_ci(&solutions);
    Ok(Calibration {
        form,
        variant: params.variant,
        k: params.k,
        n: params.n,
        trials: params.trials,
        constant,
        ci_low,
        ci_high,
    })
}

/// Median and the order-statistic 95% interval of a sorted sample.
fn median_with_ci(sorted: &[f64]) -> (f64, f64, f64) {
    let t = sorted.len();
    let median = if t % 2 == 1 {
        sorted[t / 2]
    } else {
        0.5 * (sorted[t / 2 - 1] + sorted[t / 2])
    };
    let half = Z_95 * (t as f64).sqrt() / 2.0;
    let hi = ((t as f64 / 2.0 + half).ceil() as usize).min(t) - 1;
    (median, sorted[t - 1 - hi], sorted[hi])
}

/// Fits the additive constant `a` of `Z = k / (a + S/k) - 1`.
///
/// For continuous registers the fit is near 0. For shift-rounded registers it
/// is near `-(e - 2) k / (n + 1)`: it depends on `n / k`, so no single offset
/// serves every stream size.
pub fn calibrate_harmonic_offset(
    variant: Variant,
    k: u32,
    n: u64,
    trials: u32,
    seed: u64,
) -> Result<Calibration> {
    fit(
        &ExperimentParams::new(variant, n, k, trials, seed),
        CalibrationForm::Offset,
    )
}

/// Fits the multiplicative constant `s` of `Z = s k^2 / S - 1`; near 1 for
/// continuous registers and near `e - 1` for shift-rounded ones, for any `n`.
pub fn calibrate_harmonic_scale(
    variant: Variant,
    k: u32,
    n: u64,
    trials: u32,
    seed: u64,
) -> Result<Calibration> {
    fit(
        &ExperimentParams::new(variant, n, k, trials, seed),
        CalibrationForm::Scale,
    )
}
