//! The full validation run behind `gumbel-sketch validate`: every check
//! returns rows of `(experiment, parameter, observed, target, pass)`.

use serde::Serialize;

use crate::codec;
use crate::error::Result;
use crate::sketch::{rse_constant, Estimator, HarmonicNorm, Sketch, SketchConfig, Variant};

use super::experiment::{
    merge_union_check, rounding_distortion, run_experiment, run_twin_experiment, ExperimentParams,
};
use super::ks::{max_stability_ks, max_stability_ks_at};
use super::multinomial::{
    bound_exp_neg_y, bound_var_v, bound_w, exp_neg_y, expected_v_closed_form, tail_check, v_stat,
    w_stat, MultinomialOracle,
};

/// Relative half-width of the RSE acceptance windows around the derived
/// constants.
pub const RSE_WINDOW: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub experiment: String,
    pub parameter: String,
    pub observed: f64,
    pub target: String,
    pub pass: bool,
}

impl CheckRow {
    fn new(
        experiment: &str,
        parameter: impl Into<String>,
        observed: f64,
        target: impl Into<String>,
        pass: bool,
    ) -> Self {
        CheckRow {
            experiment: experiment.into(),
            parameter: parameter.into(),
            observed,
            target: target.into(),
            pass,
        }
    }

    fn at_most(experiment: &str, parameter: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::new(
            experiment,
            parameter,
            observed,
            format!("<= {bound:.6e}"),
            observed <= bound,
        )
    }

    fn at_least(experiment: &str, parameter: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::new(
            experiment,
            parameter,
            observed,
            format!(">= {bound:.4}"),
            observed >= bound,
        )
    }

    fn within(
        experiment: &str,
        parameter: impl Into<String>,
        observed: f64,
        lo: f64,
        hi: f64,
    ) -> Self {
        Self::new(
            experiment,
            parameter,
            observed,
            format!("in [{lo:.4}, {hi:.4}]"),
            (lo..=hi).contains(&observed),
        )
    }
}

/// Experiment sizes. The defaults are the full acceptance budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Stream size and sketch size for the stochastic-averaging experiments.
    pub n: u64,
    pub k: u32,
    pub trials: u32,
    pub fr_n: u64,
    pub fr_k: u32,
    pub twin_n: u64,
    pub twin_k: u32,
    pub mc_trials: u64,
    pub ks_samples: usize,
    pub rounding_sketches: u32,
    pub merge_pairs: u32,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            n: 1_000_000,
            k: 1024,
            trials: 200,
            fr_n: 1000,
            fr_k: 256,
            twin_n: 100_000,
            twin_k: 1024,
            mc_trials: 1_000_000,
            ks_samples: 100_000,
            rounding_sketches: 100,
            merge_pairs: 100,
        }
    }
}

pub fn multinomial_exact_checks() -> Result<Vec<CheckRow>> {
    let mut worst_eq = 0.0f64;
    let mut worst_total = 0.0f64;
    let mut violations = 0u32;
    for k in 1..=4 {
        for n in 0..=8 {
            let o = MultinomialOracle::exhaustive(n, k)?;
            let v = o.moments(v_stat);
            worst_eq = worst_eq.max((v.mean - expected_v_closed_form(n, k)).abs());
            worst_total = worst_total.max((v.total_probability - 1.0).abs());
            if o.expectation(w_stat) > bound_w(n, k) {
                violations += 1;
            }
            if v.variance > bound_var_v(n, k) {
                violations += 1;
            }
            if n >= 1 && o.expectation(exp_neg_y) > bound_exp_neg_y(n, k) {
                violations += 1;
            }
        }
    }
    Ok(vec![
        CheckRow::at_most(
            "multinomial-exact",
            "n<=8,k<=4 |sum p - 1|",
            worst_total,
            1e-12,
        ),
        CheckRow::at_most(
            "multinomial-exact",
            "n<=8,k<=4 |E[V] - closed form|",
            worst_eq,
            1e-12,
        ),
        CheckRow::at_most(
            "multinomial-exact",
            "n<=8,k<=4 bound violations",
            violations as f64,
            0.0,
        ),
    ])
}

pub fn multinomial_monte_carlo_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for (i, &(n, k)) in [(100u32, 10u32), (1000, 32)].iter().enumerate() {
        let o =
            MultinomialOracle::monte_carlo(n, k, cfg.mc_trials, cfg.seed.wrapping_add(i as u64))?;
        let p = format!("n={n},k={k}");
        rows.push(CheckRow::at_most(
            "multinomial-mc",
            format!("{p} E[W]"),
            o.expectation(w_stat),
            bound_w(n, k),
        ));
        rows.push(CheckRow::at_most(
            "multinomial-mc",
            format!("{p} Var[V]"),
            o.moments(v_stat).variance,
            bound_var_v(n, k),
        ));
        rows.push(CheckRow::at_most(
            "multinomial-mc",
            format!("{p} E[exp(-Y)]"),
            o.expectation(exp_neg_y),
            bound_exp_neg_y(n, k),
        ));
    }
    let o = MultinomialOracle::monte_carlo(
        1000,
        10,
        cfg.mc_trials.min(100_000),
        cfg.seed.wrapping_add(7),
    )?;
    let tc = tail_check(&o, 3.0)?;
    rows.push(CheckRow::at_most(
        "multinomial-mc",
        "n=1000,k=10,t=3 Pr[Y < k ln(n/k) - t]",
        tc.failure_probability,
        tc.tail_bound,
    ));
    Ok(rows)
}

pub fn max_stability_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for n in [2u64, 8, 64] {
        let r = max_stability_ks(n, cfg.ks_samples, cfg.seed.wrapping_add(n))?;
        rows.push(CheckRow::new(
            "max-stability",
            format!("n={n} KS vs Gumbel(ln n)"),
            r.statistic,
            format!("< {:.6}", r.critical_value),
            r.passes(),
        ));
    }
    let r = max_stability_ks_at(64, cfg.ks_samples, cfg.seed.wrapping_add(64), 128f64.ln())?;
    rows.push(CheckRow::new(
        "max-stability",
        "n=64 KS vs Gumbel(ln 2n) (negative control)",
        r.statistic,
        format!(">= {:.6}", r.critical_value),
        !r.passes(),
    ));
    Ok(rows)
}

fn rse_window(estimator: Estimator, variant: Variant) -> (f64, f64) {
    let c = rse_constant(estimator, variant);
    (c * (1.0 - RSE_WINDOW), c * (1.0 + RSE_WINDOW))
}

pub fn stochastic_averaging_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let params = ExperimentParams::new(
        Variant::StochasticAveraging,
        cfg.n,
        cfg.k,
        cfg.trials,
        cfg.seed,
    );
    let reports = run_experiment(&params, &[Estimator::Geometric, Estimator::Harmonic])?;
    let p = format!("k={},n={},trials={}", cfg.k, cfg.n, cfg.trials);
    let mut rows = Vec::new();
    for r in &reports {
        let exp = format!("sa-{}", r.estimator.name());
        let (lo, hi) = rse_window(r.estimator, r.variant);
        rows.push(CheckRow::within(
            &exp,
            format!("{p} rse*sqrt(k)"),
            r.normalized_rse(),
            lo,
            hi,
        ));
        rows.push(CheckRow::at_least(
            &exp,
            format!("{p} coverage"),
            r.coverage_fraction,
            r.guaranteed_coverage,
        ));
    }
    rows.push(CheckRow::new(
        "sa-harmonic-vs-geometric",
        format!("{p} rse ratio"),
        reports[1].empirical_rse / reports[0].empirical_rse,
        "< 0.9",
        reports[1].empirical_rse / reports[0].empirical_rse < 0.9,
    ));
    Ok(rows)
}

pub fn discretized_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let params = ExperimentParams::new(Variant::DiscretizedSa, cfg.n, cfg.k, cfg.trials, cfg.seed)
        .with_harmonic_norm(HarmonicNorm::MOMENT_MATCHED);
    let reports = run_experiment(&params, &[Estimator::Geometric, Estimator::Harmonic])?;
    let p = format!("k={},n={},trials={}", cfg.k, cfg.n, cfg.trials);
    let mut rows = Vec::new();
    for r in &reports {
        let exp = format!("discrete-{}", r.estimator.name());
        // the geometric constant is conservative, so only its upper edge is meaningful
        let (lo, hi) = match r.estimator {
            Estimator::Geometric => (
                rse_window(r.estimator, Variant::StochasticAveraging).0,
                rse_window(r.estimator, r.variant).1,
            ),
            Estimator::Harmonic => rse_window(r.estimator, r.variant),
        };
        rows.push(CheckRow::within(
            &exp,
            format!("{p} rse*sqrt(k)"),
            r.normalized_rse(),
            lo,
            hi,
        ));
        rows.push(CheckRow::at_least(
            &exp,
            format!("{p} coverage"),
            r.coverage_fraction,
            r.guaranteed_coverage,
        ));
    }
    Ok(rows)
}

pub fn full_replication_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let params = ExperimentParams::new(
        Variant::FullReplication,
        cfg.fr_n,
        cfg.fr_k,
        cfg.trials,
        cfg.seed,
    );
    let reports = run_experiment(&params, &[Estimator::Geometric, Estimator::Harmonic])?;
    let p = format!("k={},n={},trials={}", cfg.fr_k, cfg.fr_n, cfg.trials);
    Ok(reports
        .iter()
        .map(|r| {
            CheckRow::at_least(
                &format!("fr-{}", r.estimator.name()),
                format!("{p} coverage"),
                r.coverage_fraction,
                r.guaranteed_coverage,
            )
        })
        .collect())
}

pub fn twin_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let r = run_twin_experiment(cfg.twin_n, cfg.twin_k, cfg.trials, cfg.seed)?;
    let p = format!("k={},n={},trials={}", r.k, r.n, r.trials);
    Ok(vec![
        CheckRow::at_most(
            "twin",
            format!("{p} invariant violations"),
            r.invariant_violations as f64,
            0.0,
        ),
        CheckRow::at_most(
            "twin",
            format!("{p} discrete/continuous rse"),
            r.rse_ratio(),
            1.15,
        ),
    ])
}

pub fn rounding_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for eps in [0.01, 0.1] {
        let r = rounding_distortion(eps, cfg.rounding_sketches, cfg.seed)?;
        let p = format!("eps={eps},sketches={}", r.sketches);
        rows.push(CheckRow::at_most(
            "rounding",
            format!("{p} geometric |ln Z' - ln Z|"),
            r.max_geometric_distortion,
            eps,
        ));
        rows.push(CheckRow::at_most(
            "rounding",
            format!("{p} harmonic |ln Z' - ln Z|"),
            r.max_harmonic_distortion,
            eps,
        ));
    }
    Ok(rows)
}

pub fn merge_and_codec_checks(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let m = merge_union_check(cfg.merge_pairs, cfg.seed);
    let p = format!("pairs={}", m.pairs);
    let mut round_trip_failures = 0u32;
    let mut accepted_corruptions = 0u32;
    for (i, variant) in Variant::ALL.into_iter().enumerate() {
        let cfg = SketchConfig::new(64, cfg.seed.wrapping_add(i as u64), variant)?;
        let mut s = Sketch::new(cfg);
        for item in 0u32..500 {
            s.update(&item.to_le_bytes());
        }
        let bytes = codec::serialize(&s);
        match codec::deserialize(&bytes) {
            Ok(back) if back == s && codec::serialize(&back) == bytes => {}
            _ => round_trip_failures += 1,
        }
        for pos in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x01;
            if codec::deserialize(&bad).is_ok() {
                accepted_corruptions += 1;
            }
        }
        if codec::deserialize(&bytes[..bytes.len() - 1]).is_ok() {
            accepted_corruptions += 1;
        }
    }
    Ok(vec![
        CheckRow::at_most(
            "merge",
            format!("{p} register mismatches"),
            m.register_mismatches as f64,
            0.0,
        ),
        CheckRow::at_most(
            "merge",
            format!("{p} estimate mismatches"),
            m.estimate_mismatches as f64,
            0.0,
        ),
        CheckRow::at_most(
            "codec",
            "round-trip failures",
            round_trip_failures as f64,
            0.0,
        ),
        CheckRow::at_most(
            "codec",
            "corrupted files accepted",
            accepted_corruptions as f64,
            0.0,
        ),
    ])
}

/// Runs every check in order.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = multinomial_exact_checks()?;
    rows.extend(multinomial_monte_carlo_checks(cfg)?);
    rows.extend(max_stability_checks(cfg)?);
    rows.extend(stochastic_averaging_checks(cfg)?);
    rows.extend(discretized_checks(cfg)?);
    rows.extend(full_replication_checks(cfg)?);
    rows.extend(twin_checks(cfg)?);
    rows.extend(rounding_checks(cfg)?);
    rows.extend(merge_and_codec_checks(cfg)?);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            n: 20_000,
            k: 64,
            trials: 40,
            fr_n: 500,
            fr_k: 32,
            twin_n: 5_000,
            twin_k: 64,
            mc_trials: 20_000,
            ks_samples: 5_000,
            rounding_sketches: 10,
            merge_pairs: 10,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn exact_checks_pass() {
        assert!(multinomial_exact_checks().unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn small_suite_runs() {
        let rows = run_suite(&small()).unwrap();
        assert!(rows.len() > 20);
        let failing: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
        // small budgets may miss a statistical window, but the exact checks never fail
        assert!(
            failing
                .iter()
                .all(|r| !r.experiment.starts_with("multinomial-exact")
                    && r.experiment != "merge"
                    && r.experiment != "codec"
                    && r.experiment != "twin"
                    || r.parameter.contains("rse")),
            "{failing:?}"
        );
    }
}
