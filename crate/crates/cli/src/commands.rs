use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use qcd_core::detectors::DetectorSpec;
use qcd_core::distributions::{check_least_favorable, kl, Density, FamilySpec};
use qcd_core::simulation::rng::{derive_seed, stream_rng, Purpose};
use qcd_core::simulation::{
    detector_pdc, estimate_pdc_longrun, pdc_bound, tradeoff_curve, tradeoff_curve_with, Engine,
    MetricsReport, SimulationError,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::output::{sig6, CurveRow, CurveWriter};

const DRIFT_SAMPLES: usize = 100_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Assumption(String),
    #[error("{0}")]
    Estimator(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Assumption(_) => 2,
            CliError::Estimator(_) => 3,
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::AssumptionViolated(_) => CliError::Assumption(e.to_string()),
            _ => CliError::Estimator(e.to_string()),
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub stdout: bool,
}

/// Reads and validates a configuration, applying the `--seed` override.
pub fn load(path: &Path, opts: &Options) -> Result<Experiment, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    Ok(cfg.validate()?)
}

pub fn engine(opts: &Options) -> Result<Engine, CliError> {
    Engine::new(opts.threads).map_err(|e| {
        CliError::Config(ConfigError {
            location: "--threads".into(),
            message: e.to_string(),
        })
    })
}

/// The family with the control density that drives this detector's skips.
fn control_family(exp: &Experiment, spec: &DetectorSpec) -> FamilySpec {
    match spec.target {
        Some(t) if !spec.kind.is_composite() => exp.family.clone().with_control(t),
        _ => exp.family.clone(),
    }
}

/// Prints the control drift under every post-change member; fails if any is not positive.
pub fn check_family(exp: &Experiment, out: &mut dyn Write) -> Result<(), CliError> {
    check_drift(exp, &exp.family, Some(out))
}

fn check_drift(
    exp: &Experiment,
    family: &FamilySpec,
    out: Option<&mut dyn Write>,
) -> Result<(), CliError> {
    let report = check_least_favorable(
        family,
        &mut stream_rng(derive_seed(exp.config.seed, Purpose::Drift, 0), 0),
        DRIFT_SAMPLES,
    )
    .map_err(|e| CliError::Assumption(e.to_string()))?;
    if let Some(out) = out {
        let write = |out: &mut dyn Write| -> io::Result<()> {
            writeln!(out, "pre-change {}", family.pre())?;
            writeln!(out, "control    {}", report.control)?;
            writeln!(
                out,
                "{:<24} {:>12} {:>12} {:>14}",
                "member", "drift", "drift_se", "kl_post_pre"
            )?;
            for m in &report.members {
                writeln!(
                    out,
                    "{:<24} {:>12.6} {:>12.6} {:>14.6}",
                    m.member.to_string(),
                    m.drift.value,
                    m.drift.std_error,
                    m.kl_post_pre
                )?;
            }
            if report.assumption_holds {
                writeln!(out, "control drift is positive under every member")?;
            }
            Ok(())
        };
        write(out).map_err(|e| CliError::Estimator(e.to_string()))?;
    }
    if report.assumption_holds {
        return Ok(());
    }
    let bad: Vec<String> = report
        .members
        .iter()
        .filter(|m| !m.is_positive())
        .map(|m| format!("{} (drift {})", m.member, sig6(m.drift.value)))
        .collect();
    Err(CliError::Assumption(format!(
        "control {} does not drift upward under {}",
        report.control,
        bad.join(", ")
    )))
}

/// Runs every detector over every threshold and writes one CSV row per pair.
///
/// Rows go to the output file, to `stdout` with `--stdout`, or both. On an
/// estimator failure the partially written file is removed.
pub fn curve(exp: &Experiment, opts: &Options, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = opts.out.clone().or_else(|| exp.config.output.clone());
    if path.is_none() && !opts.stdout {
        return Err(CliError::Config(ConfigError {
            location: "output".into(),
            message: "no destination; set output, pass --out, or pass --stdout".into(),
        }));
    }
    for spec in exp.detectors.iter().filter(|d| d.is_data_efficient()) {
        check_drift(exp, &control_family(exp, spec), None)?;
    }
    let engine = engine(opts)?;

    let mut file = match &path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Estimator(format!("{}: {e}", p.display())))?;
            Some(CurveWriter::new(f).map_err(|e| CliError::Estimator(e.to_string()))?)
        }
        None => None,
    };
    let result = write_curves(exp, &engine, &mut file, opts.stdout.then_some(stdout));
    if result.is_err() {
        drop(file);
        if let Some(p) = &path {
            let _ = std::fs::remove_file(p);
        }
    }
    result
}

fn write_curves(
    exp: &Experiment,
    engine: &Engine,
    file: &mut Option<CurveWriter<File>>,
    stdout: Option<&mut dyn Write>,
) -> Result<(), CliError> {
    let mut stdout = match stdout {
        Some(s) => Some(CurveWriter::new(s).map_err(|e| CliError::Estimator(e.to_string()))?),
        None => None,
    };
    let thresholds = &exp.config.thresholds;
    let theta = exp.theta_true_value();
    for (i, d) in exp.config.detectors.iter().enumerate() {
        let name = d.name();
        let mut write_err = None;
        tradeoff_curve_with(&exp.curve_config(i), thresholds, engine, |k, r| {
            eprintln!(
                "[{name}] A={} far={} cadd={} pdc={} ({}/{})",
                sig6(r.threshold),
                sig6(r.far.far),
                sig6(r.cadd.cadd),
                sig6(r.pdc.value),
                k + 1,
                thresholds.len()
            );
            let row = CurveRow::new(name.clone(), theta, r);
            for w in [
                file.as_mut().map(|w| w.write(&row)),
                stdout.as_mut().map(|w| w.write(&row)),
            ]
            .into_iter()
            .flatten()
            {
                if let Err(e) = w {
                    write_err.get_or_insert(e.to_string());
                }
            }
        })?;
        if let Some(e) = write_err {
            return Err(CliError::Estimator(e));
        }
    }
    Ok(())
}

/// Prints both duty-cycle estimators for each data-efficient detector.
pub fn pdc(exp: &Experiment, opts: &Options, out: &mut dyn Write) -> Result<(), CliError> {
    let engine = engine(opts)?;
    let mut reported = 0;
    for (i, d) in exp.config.detectors.iter().enumerate() {
        let spec = &exp.detectors[i];
        if !spec.is_data_efficient() {
            eprintln!(
                "{}: PDC is identically 1, every observation is used",
                d.name()
            );
            continue;
        }
        let cfg = exp.curve_config(i);
        let renewal = detector_pdc(&cfg, &engine)?;
        let longrun = estimate_pdc_longrun(
            &cfg.trial(f64::INFINITY),
            cfg.longrun_horizon,
            cfg.longrun_trials,
            &engine,
        )?;
        let control: Density = *control_family(exp, spec).control();
        let mut text = format!("{} (mu={}, h={}, control {control})\n", d.name(), d.mu, d.h);
        for (est, what) in [
            (renewal, format!("{} cycles", renewal.replications)),
            (
                longrun,
                format!(
                    "{} runs of {} steps",
                    longrun.replications, cfg.longrun_horizon
                ),
            ),
        ] {
            text.push_str(&format!(
                "  {:<15} {:.6}  se {:.6}  95% CI [{:.6}, {:.6}]  {what}\n",
                est.method.to_string(),
                est.value,
                est.std_error,
                est.ci.lo,
                est.ci.hi
            ));
        }
        if !spec.params.h.is_finite() {
            let d0 = kl(
                exp.family.pre(),
                &control,
                &mut stream_rng(derive_seed(exp.config.seed, Purpose::Drift, 0), 0),
                DRIFT_SAMPLES,
            )
            .map_err(|e| CliError::Estimator(e.to_string()))?;
            text.push_str(&format!(
                "  {:<15} {:.6}\n",
                "bound (h=inf)",
                pdc_bound(spec.params.mu, d0.value)
            ));
        }
        out.write_all(text.as_bytes())
            .map_err(|e| CliError::Estimator(e.to_string()))?;
        reported += 1;
    }
    if reported == 0 {
        return Err(CliError::Assumption(
            "PDC is identically 1 for detectors that observe every sample; configure decusum or gdecusum".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    detector: String,
    reports: &'a [MetricsReport],
}

/// Full metrics for every detector and threshold, as JSON on `stdout` or in `--out`.
pub fn simulate(exp: &Experiment, opts: &Options, stdout: &mut dyn Write) -> Result<(), CliError> {
    let engine = engine(opts)?;
    let mut all = Vec::with_capacity(exp.detectors.len());
    for (i, d) in exp.config.detectors.iter().enumerate() {
        eprintln!("[{}] {} thresholds", d.name(), exp.config.thresholds.len());
        all.push((
            d.name(),
            tradeoff_curve(&exp.curve_config(i), &exp.config.thresholds, &engine)?,
        ));
    }
    let doc: Vec<SimulationOutput> = all
        .iter()
        .map(|(name, reports)| SimulationOutput {
            detector: name.clone(),
            reports,
        })
        .collect();
    let json =
        serde_json::to_string_pretty(&doc).map_err(|e| CliError::Estimator(e.to_string()))? + "\n";
    let written = match &opts.out {
        Some(p) => std::fs::write(p, json),
        None => stdout.write_all(json.as_bytes()),
    };
    written.map_err(|e| CliError::Estimator(e.to_string()))
}
