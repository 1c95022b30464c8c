use std::io::Write;

use gumbel_sketch::codec;
use gumbel_sketch::validation::{
    max_of_n_histogram, run_estimator_experiment, run_suite, CheckRow, ExperimentParams,
    HistogramSpec, SuiteConfig,
};
use gumbel_sketch::{Error, Estimator, HarmonicNorm, Sketch, SketchConfig, Variant};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{for_each_line, open_input, open_output, read_all, write_bytes, write_records};
use crate::{EstimateArgs, Format, MergeArgs, SimulateArgs, SketchArgs, ValidateArgs};

/// Library errors caused by bad flag values are usage errors; the rest come
/// from the data.
fn lib_error(e: Error) -> CliError {
    match e {
        Error::InvalidParameter { .. } | Error::Domain { .. } => CliError::Usage(e.to_string()),
        other => CliError::Format(other.to_string()),
    }
}

/// Rejects a harmonic normalization that would be ignored.
fn check_norm(
    norm: Option<HarmonicNorm>,
    variant: Variant,
    estimator: Estimator,
) -> Result<HarmonicNorm, CliError> {
    match norm {
        Some(_) if estimator != Estimator::Harmonic => Err(CliError::Usage(
            "--harmonic-norm applies only to the harmonic estimator".into(),
        )),
        Some(_) if !variant.is_discrete() => Err(CliError::Usage(format!(
            "--harmonic-norm applies only to discretized-sa sketches, not {variant}"
        ))),
        Some(n) => Ok(n),
        None => Ok(HarmonicNorm::MOMENT_MATCHED),
    }
}

fn norm_label(norm: HarmonicNorm) -> String {
    if norm == HarmonicNorm::MOMENT_MATCHED {
        "moment".into()
    } else if norm == HarmonicNorm::PUBLISHED {
        "published".into()
    } else {
        match norm {
            HarmonicNorm::Offset(a) => format!("offset={a}"),
            HarmonicNorm::Scale(s) => format!("scale={s}"),
        }
    }
}

fn sketch_stream(
    args_input: &Option<std::path::PathBuf>,
    config: SketchConfig,
) -> Result<Sketch, CliError> {
    let mut input = open_input(args_input)?;
    let mut sketch = Sketch::new(config);
    let count = for_each_line(input.as_mut(), args_input, |item| sketch.update(item))?;
    eprintln!("{count} items");
    Ok(sketch)
}

pub fn sketch(args: SketchArgs) -> Result<(), CliError> {
    let c = &args.config;
    let config = SketchConfig::new(c.k, c.seed, c.variant).map_err(lib_error)?;
    let sketch = sketch_stream(&args.input, config)?;
    write_bytes(&args.output, &codec::serialize(&sketch))
}

#[derive(Debug, Serialize)]
struct EstimateRecord {
    estimate: f64,
    k: u32,
    variant: Variant,
    estimator: Estimator,
    predicted_rse: f64,
    seed: u64,
    harmonic_norm: Option<String>,
}

pub fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    // checks that do not need the sketch run before any input is read
    check_norm(
        args.harmonic_norm,
        args.variant.unwrap_or(Variant::DiscretizedSa),
        args.estimator,
    )?;
    let sketch = if args.from_stream {
        let variant = args.variant.unwrap_or(Variant::DiscretizedSa);
        let config = SketchConfig::new(args.k.unwrap_or(1024), args.seed.unwrap_or(0), variant)
            .map_err(lib_error)?;
        sketch_stream(&args.input, config)?
    } else {
        let bytes = read_all(&args.input)?;
        let sketch = codec::deserialize(&bytes).map_err(|e| CliError::Format(e.to_string()))?;
        let found = sketch.config().variant();
        if let Some(expected) = args.variant.filter(|&v| v != found) {
            return Err(CliError::Format(format!(
                "sketch file holds a {found} sketch, but --variant {expected} was given"
            )));
        }
        sketch
    };
    let config = *sketch.config();
    let norm = check_norm(args.harmonic_norm, config.variant(), args.estimator)?;
    let est = sketch.estimate(args.estimator, norm).map_err(lib_error)?;
    let uses_norm = config.variant().is_discrete() && args.estimator == Estimator::Harmonic;
    let record = EstimateRecord {
        estimate: est.value,
        k: config.k(),
        variant: config.variant(),
        estimator: est.estimator,
        predicted_rse: est.predicted_rse,
        seed: config.seed().0,
        harmonic_norm: uses_norm.then(|| norm_label(norm)),
    };
    write_records(&args.output, args.format, &[record], true)
}

pub fn merge(args: MergeArgs) -> Result<(), CliError> {
    let mut sketches = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let bytes = read_all(&Some(path.clone()))?;
        let sketch = codec::deserialize(&bytes)
            .map_err(|e| CliError::Format(format!("`{}`: {e}", path.display())))?;
        sketches.push(sketch);
    }
    let mut merged = sketches[0].clone();
    for (i, s) in sketches.iter().enumerate().skip(1) {
        merged = merged.merge(s).map_err(|_| {
            CliError::Format(format!(
                "cannot merge `{}` {} with `{}` {}",
                args.inputs[0].display(),
                sketches[0].config(),
                args.inputs[i].display(),
                s.config()
            ))
        })?;
    }
    write_bytes(&args.output, &codec::serialize(&merged))
}

fn suite_config(args: &ValidateArgs) -> SuiteConfig {
    let mut cfg = if args.quick {
        SuiteConfig {
            n: 100_000,
            k: 256,
            trials: 400,
            fr_n: 1000,
            fr_k: 64,
            twin_n: 20_000,
            twin_k: 256,
            mc_trials: 100_000,
            ks_samples: 20_000,
            rounding_sketches: 30,
            merge_pairs: 30,
            ..SuiteConfig::default()
        }
    } else {
        SuiteConfig::default()
    };
    cfg.seed = args.seed;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg
}

pub fn validate(args: ValidateArgs) -> Result<(), CliError> {
    if args.n == Some(0) {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let cfg = suite_config(&args);
    let rows = run_suite(&cfg).map_err(lib_error)?;
    if args.format == Format::Text {
        write_check_table(&args.output, &rows)?;
    } else {
        write_records(&args.output, args.format, &rows, false)?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Checks {
            failed,
            total: rows.len(),
        });
    }
    Ok(())
}

fn write_check_table(path: &Option<std::path::PathBuf>, rows: &[CheckRow]) -> Result<(), CliError> {
    let werr = |e| CliError::io(path.as_deref(), "writing", e);
    let mut out = open_output(path)?;
    let w_exp = rows.iter().map(|r| r.experiment.len()).max().unwrap_or(0);
    let w_par = rows.iter().map(|r| r.parameter.len()).max().unwrap_or(0);
    for r in rows {
        writeln!(
            out,
            "{}  {:w_exp$}  {:w_par$}  {:>14.6e}  {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.experiment,
            r.parameter,
            r.observed,
            r.target
        )
        .map_err(werr)?;
    }
    out.flush().map_err(werr)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.emit_histogram {
        if args.harmonic_norm.is_some() {
            return Err(CliError::Usage(
                "--harmonic-norm has no effect with --emit-histogram".into(),
            ));
        }
        if args.format == Format::Text {
            return Err(CliError::Usage(
                "--emit-histogram writes csv or json".into(),
            ));
        }
        let rows = max_of_n_histogram(&HistogramSpec::new(args.n, args.samples, args.seed))
            .map_err(lib_error)?;
        return write_records(&args.output, args.format, &rows, false);
    }
    let norm = check_norm(args.harmonic_norm, args.variant, args.estimator)?;
    let params = ExperimentParams::new(args.variant, args.n, args.k, args.trials, args.seed)
        .with_harmonic_norm(norm);
    let report = run_estimator_experiment(&params, args.estimator).map_err(lib_error)?;
    write_records(&args.output, args.format, &[report], true)
}
