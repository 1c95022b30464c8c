use crate::error::{Error, Result};
use crate::gumbel::{self, EULER_GAMMA};
use crate::hashing::{bucket_init_uniform, ItemHash};

use super::{predicted_rse, Estimate, Estimator, SketchConfig, Variant};

/// Sketch with `k` real-valued registers, each a running maximum of
/// `Gumbel(0)` draws.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousSketch {
    config: SketchConfig,
    registers: Vec<f64>,
}

impl ContinuousSketch {
    /// Fails with [`Error::VariantMismatch`] for a discretized configuration.
    pub fn new(config: SketchConfig) -> Result<Self> {
        if config.variant().is_discrete() {
            return Err(Error::VariantMismatch {
                expected: Variant::StochasticAveraging,
                found: config.variant(),
            });
        }
        Ok(Self::from_config(config))
    }

    pub(crate) fn from_config(config: SketchConfig) -> Self {
        let registers = match config.variant() {
            Variant::FullReplication => vec![f64::NEG_INFINITY; config.k() as usize],
            _ => initial_registers(&config).collect(),
        };
        ContinuousSketch { config, registers }
    }

    /// Rebuilds a sketch from stored registers, checking the per-variant
    /// register invariants.
    pub fn from_registers(config: SketchConfig, registers: Vec<f64>) -> Result<Self> {
        if config.variant().is_discrete() {
            return Err(Error::VariantMismatch {
                expected: Variant::StochasticAveraging,
                found: config.variant(),
            });
        }
        if registers.len() != config.k() as usize {
            return Err(Error::InvalidParameter {
                name: "registers",
                reason: format!("expected {} registers, got {}", config.k(), registers.len()),
            });
        }
        let allow_sentinel = config.variant() == Variant::FullReplication;
        if let Some(i) = registers
            .iter()
            .position(|&x| !(x.is_finite() || (allow_sentinel && x == f64::NEG_INFINITY)))
        {
            return Err(Error::InvalidParameter {
                name: "registers",
                reason: format!("register {i} holds {}", registers[i]),
            });
        }
        Ok(ContinuousSketch { config, registers })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn registers(&self) -> &[f64] {
        &self.registers
    }

    pub fn k(&self) -> usize {
        self.registers.len()
    }

    /// True while a full-replication sketch has seen no item.
    pub fn is_empty(&self) -> bool {
        self.registers.contains(&f64::NEG_INFINITY)
    }

    pub fn update(&mut self, item: &[u8]) {
        self.update_hash(ItemHash::new(item, self.config.seed()));
    }

    pub(crate) fn update_hash(&mut self, h: ItemHash) {
        let seed = self.config.seed();
        match self.config.variant() {
            Variant::FullReplication => {
                for (lane, reg) in self.registers.iter_mut().enumerate() {
                    let v = gumbel::transform(h.lane_unit(seed, lane as u64));
                    if v > *reg {
                        *reg = v;
                    }
                }
            }
            _ => {
                let b = h.bucket(seed, self.config.k()) as usize;
                let v = gumbel::transform(h.lane_unit(seed, 0));
                if v > self.registers[b] {
                    self.registers[b] = v;
                }
            }
        }
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptySketch)
        } else {
            Ok(())
        }
    }

    /// `exp(-gamma + mean X)`, times `k` under stochastic averaging.
    pub fn geometric_estimate(&self) -> Result<Estimate> {
        self.ensure_nonempty()?;
        let k = self.k() as f64;
        let mean = self.registers.iter().sum::<f64>() / k;
        let base = (mean - EULER_GAMMA).exp();
        let value = match self.config.variant() {
            Variant::FullReplication => base,
            _ => k * base,
        };
        Ok(Estimate {
            value,
            predicted_rse: predicted_rse(
                Estimator::Geometric,
                self.config.variant(),
                self.config.k(),
            ),
            estimator: Estimator::Geometric,
        })
    }

    /// Full replication: `k / sum exp(-X_i)`. Stochastic averaging:
    /// `k^2 / sum exp(-X_i) - 1`, clamped at zero.
    pub fn harmonic_estimate(&self) -> Result<Estimate> {
        self.ensure_nonempty()?;
        let k = self.k() as f64;
        let sum = harmonic_sum(&self.registers);
        let value = match self.config.variant() {
            Variant::FullReplication => k / sum,
            _ => (k * k / sum - 1.0).max(0.0),
        };
        Ok(Estimate {
            value,
            predicted_rse: predicted_rse(
                Estimator::Harmonic,
                self.config.variant(),
                self.config.k(),
            ),
            estimator: Estimator::Harmonic,
        })
    }

    pub fn estimate(&self, estimator: Estimator) -> Result<Estimate> {
        match estimator {
            Estimator::Geometric => self.geometric_estimate(),
            Estimator::Harmonic => self.harmonic_estimate(),
        }
    }

    /// `sum_i exp(-X_i)`.
    pub fn harmonic_sum(&self) -> f64 {
        harmonic_sum(&self.registers)
    }

    /// Register-wise maximum. Equivalent to sketching the union of both
    /// streams.
    pub fn merge(&self, other: &ContinuousSketch) -> Result<ContinuousSketch> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &ContinuousSketch) -> Result<()> {
        self.config.ensure_compatible(&other.config)?;
        for (a, &b) in self.registers.iter_mut().zip(&other.registers) {
            if b > *a {
                *a = b;
            }
        }
        Ok(())
    }

    /// Rounds every finite register to the nearest multiple of `eps`. The
    /// geometric estimate moves by a factor within `exp(+-eps / 2)`.
    pub fn round_registers(&self, eps: f64) -> Result<ContinuousSketch> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("rounding step must be positive and finite, got {eps}"),
            });
        }
        let registers = self
            .registers
            .iter()
            .map(|&x| {
                if x.is_finite() {
                    (x / eps).round() * eps
                } else {
                    x
                }
            })
            .collect();
        Ok(ContinuousSketch {
            config: self.config,
            registers,
        })
    }
}

/// `X_i = -ln(-ln u_i)` with `u_i` hashed from `(i, seed)`.
pub(crate) fn initial_registers(config: &SketchConfig) -> impl Iterator<Item = f64> + '_ {
    (0..config.k()).map(|i| gumbel::transform(bucket_init_uniform(i, config.seed())))
}

pub(crate) fn harmonic_sum(registers: &[f64]) -> f64 {
    registers.iter().map(|&x| (-x).exp()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn config(variant: Variant, k: u32) -> SketchConfig {
        SketchConfig::new(k, 42, variant).unwrap()
    }

    fn with_registers(variant: Variant, registers: Vec<f64>) -> ContinuousSketch {
        ContinuousSketch::from_registers(config(variant, registers.len() as u32), registers)
            .unwrap()
    }

    #[test]
    fn full_replication_starts_empty() {
        let s = ContinuousSketch::new(config(Variant::FullReplication, 4)).unwrap();
        assert_eq!(s.registers(), &[f64::NEG_INFINITY; 4]);
        assert!(s.is_empty());
        assert_eq!(s.geometric_estimate(), Err(Error::EmptySketch));
        assert_eq!(s.harmonic_estimate(), Err(Error::EmptySketch));
    }

    #[test]
    fn stochastic_averaging_init_is_deterministic() {
        let a = ContinuousSketch::new(config(Variant::StochasticAveraging, 64)).unwrap();
        let b = ContinuousSketch::new(config(Variant::StochasticAveraging, 64)).unwrap();
        assert_eq!(a, b);
        assert!(a.registers().iter().all(|x| x.is_finite()));
        assert!(!a.is_empty());
        let c =
            ContinuousSketch::new(SketchConfig::new(64, 43, Variant::StochasticAveraging).unwrap())
                .unwrap();
        assert_ne!(a.registers(), c.registers());
    }

    #[test]
    fn rejects_discrete_config() {
        assert!(matches!(
            ContinuousSketch::new(config(Variant::DiscretizedSa, 4)),
            Err(Error::VariantMismatch { .. })
        ));
    }

    #[test]
    fn from_registers_checks_invariants() {
        let sa = config(Variant::StochasticAveraging, 2);
        assert!(ContinuousSketch::from_registers(sa, vec![0.0, f64::NEG_INFINITY]).is_err());
        assert!(ContinuousSketch::from_registers(sa, vec![0.0]).is_err());
        let fr = config(Variant::FullReplication, 2);
        assert!(ContinuousSketch::from_registers(fr, vec![0.0, f64::NEG_INFINITY]).is_ok());
        assert!(ContinuousSketch::from_registers(fr, vec![0.0, f64::NAN]).is_err());
        assert!(ContinuousSketch::from_registers(fr, vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn update_is_idempotent_and_monotone() {
        for variant in [Variant::FullReplication, Variant::StochasticAveraging] {
            let mut s = ContinuousSketch::new(config(variant, 16)).unwrap();
            for i in 0u32..200 {
                let before = s.clone();
                s.update(&i.to_le_bytes());
                assert!(s
                    .registers()
                    .iter()
                    .zip(before.registers())
                    .all(|(a, b)| a >= b));
                let once = s.clone();
                s.update(&i.to_le_bytes());
                assert_eq!(s, once);
            }
        }
    }

    #[test]
    fn stochastic_averaging_touches_one_register() {
        let mut s = ContinuousSketch::new(config(Variant::StochasticAveraging, 32)).unwrap();
        for i in 0u32..100 {
            let before = s.clone();
            s.update(&i.to_le_bytes());
            let changed = s
                .registers()
                .iter()
                .zip(before.registers())
                .filter(|(a, b)| a != b)
                .count();
            assert!(changed <= 1);
        }
    }

    #[test]
    fn full_replication_touches_every_register_on_first_item() {
        let mut s = ContinuousSketch::new(config(Variant::FullReplication, 32)).unwrap();
        s.update(b"first");
        assert!(s.registers().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn geometric_formula() {
        let k = 8;
        let s = with_registers(Variant::StochasticAveraging, vec![EULER_GAMMA; k]);
        assert!((s.geometric_estimate().unwrap().value - k as f64).abs() < 1e-12);

        let s = with_registers(Variant::FullReplication, vec![EULER_GAMMA + 100f64.ln()]);
        assert!((s.geometric_estimate().unwrap().value - 100.0).abs() < 1e-10);
    }

    #[test]
    fn harmonic_formula() {
        let s = with_registers(Variant::FullReplication, vec![0.0; 8]);
        assert!((s.harmonic_estimate().unwrap().value - 1.0).abs() < 1e-15);
        let s = with_registers(Variant::StochasticAveraging, vec![0.0; 8]);
        assert!((s.harmonic_estimate().unwrap().value - 7.0).abs() < 1e-12);
        // the -1 correction never drives the estimate negative
        let s = with_registers(Variant::StochasticAveraging, vec![-3.0; 1]);
        assert_eq!(s.harmonic_estimate().unwrap().value, 0.0);
    }

    #[test]
    fn estimate_carries_predicted_rse() {
        let s = with_registers(Variant::StochasticAveraging, vec![1.0; 1024]);
        let g = s.geometric_estimate().unwrap();
        let h = s.harmonic_estimate().unwrap();
        assert_eq!(g.estimator, Estimator::Geometric);
        assert!((g.predicted_rse - std::f64::consts::PI / 6f64.sqrt() / 32.0).abs() < 1e-15);
        assert_eq!(h.predicted_rse, 1.0 / 32.0);
    }

    #[test]
    fn merge_rules() {
        let mut a = ContinuousSketch::new(config(Variant::StochasticAveraging, 16)).unwrap();
        let mut b = a.clone();
        for i in 0u32..50 {
            a.update(&i.to_le_bytes());
            b.update(&(i + 1000).to_le_bytes());
        }
        assert_eq!(a.merge(&a).unwrap(), a);
        assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
        let other =
            ContinuousSketch::new(SketchConfig::new(16, 7, Variant::StochasticAveraging).unwrap())
                .unwrap();
        assert!(matches!(
            a.merge(&other),
            Err(Error::IncompatibleConfig { .. })
        ));
        let fr = ContinuousSketch::new(config(Variant::FullReplication, 16)).unwrap();
        assert!(a.merge(&fr).is_err());
    }

    #[test]
    fn merge_with_empty_full_replication() {
        let empty = ContinuousSketch::new(config(Variant::FullReplication, 4)).unwrap();
        let mut s = empty.clone();
        s.update(b"x");
        assert_eq!(empty.merge(&s).unwrap(), s);
    }

    #[test]
    fn rounding() {
        let s = with_registers(Variant::FullReplication, vec![1.26]);
        let r = s.round_registers(0.5).unwrap();
        assert_eq!(r.registers(), &[1.5]);
        let ratio = r.geometric_estimate().unwrap().value / s.geometric_estimate().unwrap().value;
        assert!(ratio >= (-0.5f64).exp() && ratio <= 0.5f64.exp());

        let s = with_registers(Variant::StochasticAveraging, vec![0.5, 1.0, -2.5]);
        assert_eq!(s.round_registers(0.5).unwrap(), s);

        let empty = ContinuousSketch::new(config(Variant::FullReplication, 3)).unwrap();
        assert_eq!(empty.round_registers(0.1).unwrap(), empty);

        for eps in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(s.round_registers(eps).is_err());
        }
    }
}
