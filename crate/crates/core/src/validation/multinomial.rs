//! Bucket-count statistics under stochastic averaging.
//!
//! `n` distinct items spread over `k` buckets give counts
//! `(n_1, ..., n_k) ~ Multinomial(n; 1/k, ..., 1/k)`. The oracle evaluates
//! expectations of functions of the counts either exactly, by enumerating
//! every composition of `n` into `k` parts, or by Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hashing::{subkey, HashSeed};

/// Largest `k^n` the exhaustive mode accepts.
pub const EXHAUSTIVE_STATE_LIMIT: f64 = 1e7;

const DOMAIN_MULTINOMIAL: u64 = u64::from_le_bytes(*b"gs-mnom\0");
const BLOCK: u64 = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OracleMode {
    Exhaustive,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MultinomialOracle {
    n: u32,
    k: u32,
    mode: OracleMode,
}

/// Mean and variance of a statistic, plus the probability mass visited
/// (exactly 1 up to rounding in exhaustive mode).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub total_probability: f64,
}

impl MultinomialOracle {
    pub fn exhaustive(n: u32, k: u32) -> Result<Self> {
        check_k(k)?;
        if n as f64 * (k as f64).ln() > EXHAUSTIVE_STATE_LIMIT.ln() + 1e-9 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("k^n = {k}^{n} exceeds the exhaustive limit of 1e7 states"),
            });
        }
        Ok(MultinomialOracle {
            n,
            k,
            mode: OracleMode::Exhaustive,
        })
    }

    pub fn monte_carlo(n: u32, k: u32, trials: u64, seed: u64) -> Result<Self> {
        check_k(k)?;
        if trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "need at least one trial".into(),
            });
        }
        Ok(MultinomialOracle {
            n,
            k,
            mode: OracleMode::MonteCarlo { trials, seed },
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    /// Visits every composition of `n` into `k` parts with its exact
    /// probability. Only meaningful in exhaustive mode.
    pub fn for_each_outcome(&self, mut f: impl FnMut(&[u32], f64)) {
        let mut counts = vec![0u32; self.k as usize];
        let scale = (self.k as f64).powi(-(self.n as i32));
        enumerate(&mut counts, 0, self.n, scale, &mut f);
    }

    pub fn moments<F>(&self, f: F) -> Moments
    where
        F: Fn(&[u32]) -> f64 + Sync,
    {
        match self.mode {
            OracleMode::Exhaustive => {
                let mut outcomes = Vec::new();
                self.for_each_outcome(|c, p| outcomes.push((f(c), p)));
                let total: f64 = outcomes.iter().map(|&(_, p)| p).sum();
                let mean: f64 = outcomes.iter().map(|&(v, p)| v * p).sum();
                let variance = outcomes
                    .iter()
                    .map(|&(v, p)| p * (v - mean) * (v - mean))
                    .sum();
                Moments {
                    mean,
                    variance,
                    total_probability: total,
                }
            }
            OracleMode::MonteCarlo { trials, seed } => {
                let blocks = trials.div_ceil(BLOCK);
                let partial: Vec<Welford> = (0..blocks)
                    .into_par_iter()
                    .map(|b| {
                        let mut rng = ChaCha8Rng::seed_from_u64(subkey(
                            HashSeed(seed),
                            DOMAIN_MULTINOMIAL,
                            b,
                        ));
                        let len = BLOCK.min(trials - b * BLOCK);
                        let mut acc = Welford::default();
                        let mut counts = vec![0u32; self.k as usize];
                        for _ in 0..len {
                            sample_counts(self.n, &mut counts, &mut rng);
                            acc.push(f(&counts));
                        }
                        acc
                    })
                    .collect();
                let acc = partial
                    .into_iter()
                    .fold(Welford::default(), Welford::combine);
                Moments {
                    mean: acc.mean,
                    variance: acc.variance(),
                    total_probability: 1.0,
                }
            }
        }
    }

    pub fn expectation<F>(&self, f: F) -> f64
    where
        F: Fn(&[u32]) -> f64 + Sync,
    {
        self.moments(f).mean
    }

    pub fn probability<P>(&self, pred: P) -> f64
    where
        P: Fn(&[u32]) -> bool + Sync,
    {
        self.expectation(|c| if pred(c) { 1.0 } else { 0.0 })
    }
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter {
            name: "k",
            reason: "need at least one bucket".into(),
        })
    } else {
        Ok(())
    }
}

fn binomial(n: u32, r: u32) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn enumerate(
    counts: &mut [u32],
    idx: usize,
    remaining: u32,
    weight: f64,
    f: &mut impl FnMut(&[u32], f64),
) {
    if idx + 1 == counts.len() {
        counts[idx] = remaining;
        f(counts, weight);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        enumerate(
            counts,
            idx + 1,
            remaining - c,
            weight * binomial(remaining, c),
            f,
        );
    }
}

/// Draws multinomial counts through conditional binomials:
/// `n_i ~ Bin(remaining, 1 / (k - i))`.
pub fn sample_counts<R: rand::Rng>(n: u32, counts: &mut [u32], rng: &mut R) {
    let k = counts.len();
    let mut remaining = n as u64;
    for (i, slot) in counts.iter_mut().enumerate() {
        let left = (k - i) as f64;
        let c = if i + 1 == k || remaining == 0 {
            remaining
        } else {
            Binomial::new(remaining, 1.0 / left)
                .expect("probability in (0, 1]")
                .sample(rng)
        };
        *slot = c as u32;
        remaining -= c;
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn combine(a: Welford, b: Welford) -> Welford {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let d = b.mean - a.mean;
        Welford {
            count,
            mean: a.mean + d * b.count as f64 / count as f64,
            m2: a.m2 + b.m2 + d * d * (a.count as f64 * b.count as f64) / count as f64,
        }
    }

    fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// `V = sum_i 1 / (n_i + 1)`.
pub fn v_stat(counts: &[u32]) -> f64 {
    counts.iter().map(|&c| 1.0 / (c as f64 + 1.0)).sum()
}

/// `W = sum_i 2 / ((n_i + 1)(n_i + 2))`.
pub fn w_stat(counts: &[u32]) -> f64 {
    counts
        .iter()
        .map(|&c| 2.0 / ((c as f64 + 1.0) * (c as f64 + 2.0)))
        .sum()
}

/// `Y = sum_i ln(n_i + 1)`.
pub fn y_stat(counts: &[u32]) -> f64 {
    counts.iter().map(|&c| (c as f64 + 1.0).ln()).sum()
}

/// `exp(-Y) = prod_i 1 / (n_i + 1)`.
pub fn exp_neg_y(counts: &[u32]) -> f64 {
    (-y_stat(counts)).exp()
}

/// `beta_k = (1 - 1/k)^k`, at most `1/e`.
pub fn beta_k(k: u32) -> f64 {
    (1.0 - 1.0 / k as f64).powi(k as i32)
}

/// Exact `E[V] = k^2 / (n + 1) * (1 - (1 - 1/k)^(n + 1))`.
pub fn expected_v_closed_form(n: u32, k: u32) -> f64 {
    let k = k as f64;
    let n1 = n as f64 + 1.0;
    k * k / n1 * (1.0 - (1.0 - 1.0 / k).powf(n1))
}

/// Exact `E[W]` by the binomial-sum identity
/// `2k / ((n+1)(n+2)) * (k^(n+2) - (k-1)^(n+2) - (n+2)(k-1)^(n+1)) / k^n`,
/// written in terms of `q = 1 - 1/k` to stay finite for large `n`.
pub fn expected_w_closed_form(n: u32, k: u32) -> f64 {
    let kf = k as f64;
    let n1 = n as f64 + 1.0;
    let n2 = n as f64 + 2.0;
    let q = 1.0 - 1.0 / kf;
    // (k-1)^(n+1) / k^n = k * q^(n+1), (k-1)^(n+2) / k^n = k^2 * q^(n+2)
    2.0 * kf / (n1 * n2) * (kf * kf - kf * kf * q.powf(n2) - n2 * kf * q.powf(n1))
}

/// Upper bound `E[W] <= 2k^3 / (n + 1)^2`.
pub fn bound_w(n: u32, k: u32) -> f64 {
    let k = k as f64;
    2.0 * k * k * k / ((n as f64 + 1.0).powi(2))
}

/// Upper bound `Var[V] <= k^3/(n+1)^2 + k^4/(n+1)^2 * 2 beta_k^((n+1)/k)`.
pub fn bound_var_v(n: u32, k: u32) -> f64 {
    let kf = k as f64;
    let n1 = n as f64 + 1.0;
    let tail = beta_k(k).powf(n1 / kf);
    kf.powi(3) / (n1 * n1) + kf.powi(4) / (n1 * n1) * 2.0 * tail
}

/// Upper bound `E[exp(-Y)] <= (k/n)^k`.
pub fn bound_exp_neg_y(n: u32, k: u32) -> f64 {
    (k as f64 / n as f64).powi(k as i32)
}

/// Outcome of checking the lower-tail statement for `Y`: `Y >= k ln(n/k) - t`
/// fails with probability at most `e^-t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailCheck {
    pub n: u32,
    pub k: u32,
    pub t: f64,
    /// Observed `Pr[Y < k ln(n/k) - t]`.
    pub failure_probability: f64,
    /// `e^-t`.
    pub tail_bound: f64,
    /// Observed `E[exp(-Y)]`.
    pub exp_neg_y: f64,
    /// `(k/n)^k`.
    pub moment_bound: f64,
}

impl TailCheck {
    pub fn holds(&self) -> bool {
        self.failure_probability <= self.tail_bound && self.exp_neg_y <= self.moment_bound
    }
}

pub fn tail_check(oracle: &MultinomialOracle, t: f64) -> Result<TailCheck> {
    let (n, k) = (oracle.n(), oracle.k());
    if n < k {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("tail check needs n >= k, got n={n}, k={k}"),
        });
    }
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("t must be positive, got {t}"),
        });
    }
    let threshold = k as f64 * (n as f64 / k as f64).ln() - t;
    let failure_probability = oracle.probability(|c| y_stat(c) < threshold);
    let exp_neg_y = oracle.expectation(exp_neg_y);
    Ok(TailCheck {
        n,
        k,
        t,
        failure_probability,
        tail_bound: (-t).exp(),
        exp_neg_y,
        moment_bound: bound_exp_neg_y(n, k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert!((expected_v_closed_form(1, 1) - 0.5).abs() < 1e-15);
        assert!((expected_v_closed_form(2, 2) - 7.0 / 6.0).abs() < 1e-15);
        assert!((expected_v_closed_form(0, 3) - 3.0).abs() < 1e-15);
        assert!((bound_w(2, 2) - 16.0 / 9.0).abs() < 1e-15);
        assert_eq!(bound_w(0, 1), 2.0);
        assert!((expected_w_closed_form(2, 2) - 11.0 / 12.0).abs() < 1e-15);
        assert!((expected_w_closed_form(0, 1) - 1.0).abs() < 1e-15);
        assert!((bound_var_v(2, 2) - 12.0 / 9.0).abs() < 1e-15);
        assert!(beta_k(1000) < (-1.0f64).exp());
    }

    #[test]
    fn exhaustive_two_by_two() {
        let o = MultinomialOracle::exhaustive(2, 2).unwrap();
        let mut seen = Vec::new();
        o.for_each_outcome(|c, p| seen.push((c.to_vec(), p)));
        assert_eq!(
            seen,
            vec![(vec![0, 2], 0.25), (vec![1, 1], 0.5), (vec![2, 0], 0.25)]
        );
        let v = o.moments(v_stat);
        assert!((v.mean - 7.0 / 6.0).abs() < 1e-15);
        assert!((v.variance - 1.0 / 36.0).abs() < 1e-15);
        assert!((o.expectation(w_stat) - 11.0 / 12.0).abs() < 1e-15);
        assert!((o.expectation(exp_neg_y) - 7.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn empty_and_single_bucket() {
        let o = MultinomialOracle::exhaustive(0, 1).unwrap();
        assert_eq!(o.moments(v_stat).variance, 0.0);
        assert_eq!(o.expectation(w_stat), 1.0);
        let o = MultinomialOracle::exhaustive(5, 1).unwrap();
        assert_eq!(o.expectation(v_stat), 1.0 / 6.0);
    }

    #[test]
    fn exhaustive_guard() {
        assert!(MultinomialOracle::exhaustive(12, 4).is_err()); // 4^12 > 1e7
        assert!(MultinomialOracle::exhaustive(11, 3).is_ok());
        assert!(MultinomialOracle::exhaustive(7, 10).is_ok()); // exactly 1e7
        assert!(MultinomialOracle::exhaustive(3, 0).is_err());
        assert!(MultinomialOracle::monte_carlo(3, 2, 0, 1).is_err());
    }

    #[test]
    fn sampled_counts_sum_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = vec![0u32; 7];
        for _ in 0..1000 {
            sample_counts(50, &mut counts, &mut rng);
            assert_eq!(counts.iter().sum::<u32>(), 50);
        }
    }

    #[test]
    fn monte_carlo_matches_exhaustive() {
        let exact = MultinomialOracle::exhaustive(6, 3).unwrap().moments(v_stat);
        let mc = MultinomialOracle::monte_carlo(6, 3, 200_000, 9)
            .unwrap()
            .moments(v_stat);
        let se = (exact.variance / 200_000.0).sqrt();
        assert!(
            (mc.mean - exact.mean).abs() < 5.0 * se,
            "{mc:?} vs {exact:?}"
        );
        assert!((mc.variance / exact.variance - 1.0).abs() < 0.05);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let a = MultinomialOracle::monte_carlo(30, 4, 20_000, 3)
            .unwrap()
            .moments(w_stat);
        let b = MultinomialOracle::monte_carlo(30, 4, 20_000, 3)
            .unwrap()
            .moments(w_stat);
        assert_eq!(a, b);
    }

    #[test]
    fn tail_check_limits() {
        let o = MultinomialOracle::exhaustive(2, 2).unwrap();
        let c = tail_check(&o, 50.0).unwrap();
        assert_eq!(c.failure_probability, 0.0);
        assert!(c.holds());
        assert!(tail_check(&MultinomialOracle::exhaustive(1, 2).unwrap(), 1.0).is_err());
        assert!(tail_check(&o, 0.0).is_err());
    }
}
