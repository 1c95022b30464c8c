//! Numerical checks of the sketches' distributional claims: exact and Monte
//! Carlo oracles for the balls-into-bins statistics, KS tests of Gumbel max
//! stability, whole-sketch error experiments and the calibration of the
//! harmonic normalization.

pub mod calibration;
pub mod experiment;
pub mod histogram;
pub mod ks;
pub mod multinomial;
pub mod suite;

pub use calibration::{calibrate_harmonic_offset, calibrate_harmonic_scale, Calibration};
pub use experiment::{
    merge_union_check, rounding_distortion, run_estimator_experiment, run_experiment,
    run_twin_experiment, ExperimentParams, ExperimentReport,
};
pub use histogram::{max_of_n_histogram, HistogramRow, HistogramSpec};
pub use ks::{max_stability_ks, KsReport};
pub use multinomial::{MultinomialOracle, OracleMode};
pub use suite::{run_suite, CheckRow, SuiteConfig};
