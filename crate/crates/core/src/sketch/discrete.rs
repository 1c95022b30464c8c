use crate::error::{Error, Result};
use crate::gumbel::{self, EULER_GAMMA};
use crate::hashing::{bucket_shift, ItemHash};

use super::continuous::initial_registers;
use super::{predicted_rse, Estimate, Estimator, HarmonicNorm, SketchConfig, Variant};

pub const REGISTER_MIN: i8 = -32;
pub const REGISTER_MAX: i8 = 95;

/// Stochastic-averaging sketch with shift-rounded integer registers.
///
/// Register `i` stores `m_i`; the value it represents is `m_i - c_i` with
/// `c_i = bucket_shift(i, seed)`, so every represented value lies in `Z - c_i`.
/// Stored values saturate at `[REGISTER_MIN, REGISTER_MAX]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteSketch {
    config: SketchConfig,
    registers: Vec<i8>,
}

#[inline]
fn quantize(x: f64, c: f64) -> i8 {
    (x + c)
        .floor()
        .clamp(REGISTER_MIN as f64, REGISTER_MAX as f64) as i8
}

impl DiscreteSketch {
    pub fn new(config: SketchConfig) -> Result<Self> {
        if !config.variant().is_discrete() {
            return Err(Error::VariantMismatch {
                expected: Variant::DiscretizedSa,
                found: config.variant(),
            });
        }
        Ok(Self::from_config(config))
    }

    pub(crate) fn from_config(config: SketchConfig) -> Self {
        let seed = config.seed();
        let registers = initial_registers(&config)
            .enumerate()
            .map(|(i, x)| quantize(x, bucket_shift(i as u32, seed)))
            .collect();
        DiscreteSketch { config, registers }
    }

    pub fn from_registers(config: SketchConfig, registers: Vec<i8>) -> Result<Self> {
        if !config.variant().is_discrete() {
            return Err(Error::VariantMismatch {
                expected: Variant::DiscretizedSa,
                found: config.variant(),
            });
        }
        if registers.len() != config.k() as usize {
            return Err(Error::InvalidParameter {
                name: "registers",
                reason: format!("expected {} registers, got {}", config.k(), registers.len()),
            });
        }
        if let Some(i) = registers
            .iter()
            .position(|m| !(REGISTER_MIN..=REGISTER_MAX).contains(m))
        {
            return Err(Error::InvalidParameter {
                name: "registers",
                reason: format!(
                    "register {i} holds {} outside [{REGISTER_MIN}, {REGISTER_MAX}]",
                    registers[i]
                ),
            });
        }
        Ok(DiscreteSketch { config, registers })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    /// Stored integers `m_i`.
    pub fn registers(&self) -> &[i8] {
        &self.registers
    }

    pub fn k(&self) -> usize {
        self.registers.len()
    }

    pub fn shift(&self, i: usize) -> f64 {
        bucket_shift(i as u32, self.config.seed())
    }

    /// Represented value `m_i - c_i`.
    pub fn register_value(&self, i: usize) -> f64 {
        self.registers[i] as f64 - self.shift(i)
    }

    pub fn register_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.k()).map(|i| self.register_value(i))
    }

    pub fn update(&mut self, item: &[u8]) {
        self.update_hash(ItemHash::new(item, self.config.seed()));
    }

    pub(crate) fn update_hash(&mut self, h: ItemHash) {
        let seed = self.config.seed();
        let b = h.bucket(seed, self.config.k());
        let v = gumbel::transform(h.lane_unit(seed, 0));
        let m = quantize(v, bucket_shift(b, seed));
        let reg = &mut self.registers[b as usize];
        if m > *reg {
            *reg = m;
        }
    }

    /// `k * exp(-gamma + 1/2 + mean(m_i - c_i))`.
    pub fn geometric_estimate(&self) -> Estimate {
        let k = self.k() as f64;
        let mean = self.register_values().sum::<f64>() / k;
        Estimate {
            value: k * (mean - EULER_GAMMA + 0.5).exp(),
            predicted_rse: predicted_rse(
                Estimator::Geometric,
                Variant::DiscretizedSa,
                self.config.k(),
            ),
            estimator: Estimator::Geometric,
        }
    }

    /// Harmonic estimate under the published normalization
    /// ([`HarmonicNorm::PUBLISHED`]).
    pub fn harmonic_estimate(&self) -> Result<Estimate> {
        self.harmonic_estimate_with(HarmonicNorm::PUBLISHED)
    }

    pub fn harmonic_estimate_with(&self, norm: HarmonicNorm) -> Result<Estimate> {
        let k = self.k() as f64;
        let sum = self.harmonic_sum();
        let value = match norm {
            HarmonicNorm::Offset(a) => {
                let denom = a + sum / k;
                if denom.is_nan() || denom <= 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "offset",
                        reason: format!("offset {a} leaves a non-positive denominator {denom}"),
                    });
                }
                k / denom - 1.0
            }
            HarmonicNorm::Scale(s) => {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "scale",
                        reason: format!("scale must be positive and finite, got {s}"),
                    });
                }
                s * k * k / sum - 1.0
            }
        };
        Ok(Estimate {
            value: value.max(0.0),
            predicted_rse: predicted_rse(
                Estimator::Harmonic,
                Variant::DiscretizedSa,
                self.config.k(),
            ),
            estimator: Estimator::Harmonic,
        })
    }

    /// `sum_i exp(-(m_i - c_i))`.
    pub fn harmonic_sum(&self) -> f64 {
        self.register_values().map(|x| (-x).exp()).sum()
    }

    pub fn merge(&self, other: &DiscreteSketch) -> Result<DiscreteSketch> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &DiscreteSketch) -> Result<()> {
        self.config.ensure_compatible(&other.config)?;
        for (a, &b) in self.registers.iter_mut().zip(&other.registers) {
            *a = (*a).max(b);
        }
        Ok(())
    }
}
