use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use ews_core::detector::{Calibration, DetectorConfig, Threshold};
use ews_core::pipeline::{
    calibrate_on_design, calibrate_on_null, detect, EntropyDetector, PipelineConfig,
};
use ews_core::report::DetectionReport;
use ews_core::series::SeriesFrame;
use ews_core::simlab::{gaussian_null, generate, run_replications, DgpSpec};
use serde::{Deserialize, Serialize};

use crate::settings::Settings;
use crate::CliError;

// Sub-streams of the configured seed.
const DGP_STREAM: u64 = 1;
const CALIBRATION_STREAM: u64 = 2;
const PIPELINE_STREAM: u64 = 3;

/// Contents of `threshold.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub calibration: Calibration,
    /// Where the change-free series came from.
    pub null: String,
    pub pipeline: PipelineConfig,
    pub detector: DetectorConfig,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub pfa: f64,
    pub add: Option<f64>,
    pub nd: f64,
    pub n_reps: usize,
    pub failures: usize,
    pub threshold: f64,
    pub calibration: Option<Calibration>,
    pub dgp: DgpSpec,
    pub pipeline: PipelineConfig,
    pub detector: DetectorConfig,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn design(s: &Settings) -> Result<DgpSpec, CliError> {
    let spec = DgpSpec {
        kind: s.dgp,
        len: s.len,
        theta: s.theta.unwrap_or(s.len / 2),
        seed: s.seed.derive(DGP_STREAM),
    };
    spec.validate()?;
    Ok(spec)
}

fn warn_if_unattained(c: &Calibration) {
    if !c.attained {
        eprintln!(
            "warning: target PFA {} not attained on the threshold grid; using {} (null PFA {:.3})",
            c.target_pfa, c.threshold, c.achieved_pfa
        );
    }
}

/// Change-free law of a design: its pre-change regime over `theta` rows.
fn calibrate_design(s: &Settings, spec: &DgpSpec) -> Result<Calibration, CliError> {
    let c = calibrate_on_design(
        spec.kind,
        spec.theta,
        &s.pipeline,
        &s.detector,
        s.target_pfa,
        s.n_mc,
        s.seed.derive(CALIBRATION_STREAM),
    )?;
    warn_if_unattained(&c);
    Ok(c)
}

/// Independent Gaussian series shaped like the input.
fn calibrate_gaussian(s: &Settings, frame: &SeriesFrame) -> Result<Calibration, CliError> {
    let (len, d) = (frame.len(), frame.n_covariates());
    let c = calibrate_on_null(
        |seed| gaussian_null(len, d, seed),
        len,
        &s.pipeline,
        &s.detector,
        s.target_pfa,
        s.n_mc,
        s.seed.derive(CALIBRATION_STREAM),
    )?;
    warn_if_unattained(&c);
    Ok(c)
}

fn write_detection(s: &Settings, report: &DetectionReport) -> Result<(), CliError> {
    let dir = &s.output_dir;
    report.entropy.write_csv(create(dir, "entropy.csv")?)?;
    report.write_sr_csv(create(dir, "sr.csv")?)?;
    report.write_orders_csv(create(dir, "orders.csv")?)?;
    let mut json = create(dir, "report.json")?;
    report.write_json(&mut json)?;
    json.write_all(b"\n")?;
    json.flush()?;
    Ok(())
}

fn summarize(report: &DetectionReport) {
    let times: Vec<String> = report
        .alarms
        .iter()
        .map(|a| a.timestamp.to_string())
        .collect();
    eprintln!(
        "{} windows, threshold {:.4}, {} alarm(s){}{}",
        report.entropy.values.len(),
        report.threshold,
        report.alarms.len(),
        if times.is_empty() {
            String::new()
        } else {
            format!(" at {}", times.join(", "))
        },
        match report.score.and_then(|sc| sc.delay) {
            Some(d) => format!("; delay {d}"),
            None => String::new(),
        }
    );
}

pub fn simulate(s: &Settings) -> Result<(), CliError> {
    let spec = design(s)?;
    let frame = generate(&spec)?;
    let (threshold, calibration) = match s.detector.threshold {
        Threshold::Fixed(a) => (a, None),
        Threshold::Calibrate => {
            let c = calibrate_design(s, &spec)?;
            (c.threshold, Some(c))
        }
    };
    let seed = s.seed.derive(PIPELINE_STREAM);
    let detection = detect(&frame, &s.pipeline, &s.detector, threshold, seed)?;
    let report = DetectionReport::new(
        &frame,
        detection,
        s.pipeline,
        s.detector,
        calibration,
        seed,
        Some(spec.theta),
    );
    frame.write_csv(create(&s.output_dir, "series.csv")?)?;
    write_detection(s, &report)?;
    summarize(&report);
    Ok(())
}

pub fn load_input(s: &Settings) -> Result<SeriesFrame, CliError> {
    let path = s.require_input()?;
    let (frame, dropped) = SeriesFrame::read_csv(File::open(path)?)?;
    if dropped > 0 {
        eprintln!("dropped {dropped} row(s) with missing values");
    }
    Ok(if s.returns {
        frame.to_log_returns()?
    } else {
        frame
    })
}

pub fn detect_cmd(s: &Settings) -> Result<(), CliError> {
    let frame = load_input(s)?;
    if s.pipeline.variant.uses_llf() && frame.n_covariates() == 0 {
        return Err(CliError::Config(
            "the LLF variants need at least one covariate column".into(),
        ));
    }
    let (threshold, calibration) = match s.detector.threshold {
        Threshold::Fixed(a) => (a, None),
        Threshold::Calibrate => {
            let c = calibrate_gaussian(s, &frame)?;
            (c.threshold, Some(c))
        }
    };
    let seed = s.seed.derive(PIPELINE_STREAM);
    let detection = detect(&frame, &s.pipeline, &s.detector, threshold, seed)?;
    let report = DetectionReport::new(
        &frame,
        detection,
        s.pipeline,
        s.detector,
        calibration,
        seed,
        s.theta,
    );
    write_detection(s, &report)?;
    summarize(&report);
    Ok(())
}

pub fn calibrate(s: &Settings) -> Result<(), CliError> {
    let (calibration, null) = match s.input {
        Some(_) => {
            let frame = load_input(s)?;
            (
                calibrate_gaussian(s, &frame)?,
                format!(
                    "gaussian, {} rows, {} covariates",
                    frame.len(),
                    frame.n_covariates()
                ),
            )
        }
        None => {
            let spec = design(s)?;
            (
                calibrate_design(s, &spec)?,
                format!("{} pre-change, {} rows", spec.kind, spec.theta),
            )
        }
    };
    eprintln!(
        "threshold {} (null PFA {:.3})",
        calibration.threshold, calibration.achieved_pfa
    );
    let file = ThresholdFile {
        calibration,
        null,
        pipeline: s.pipeline,
        detector: s.detector,
    };
    let mut out = create(&s.output_dir, "threshold.json")?;
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn metrics(s: &Settings) -> Result<(), CliError> {
    if s.reps == 0 {
        return Err(CliError::Config("--reps must be >= 1".into()));
    }
    let spec = design(s)?;
    let (threshold, calibration) = match s.detector.threshold {
        Threshold::Fixed(a) => (a, None),
        Threshold::Calibrate => {
            let c = calibrate_design(s, &spec)?;
            (c.threshold, Some(c))
        }
    };
    let detector = EntropyDetector {
        pipeline: s.pipeline,
        detector: s.detector,
        threshold,
    };
    let result = run_replications(&spec, &detector, s.reps)?;
    let failures = result
        .records
        .iter()
        .filter(|r| r.diagnostic.is_some())
        .count();
    if failures > 0 {
        eprintln!("{failures} replication(s) failed and count as non-detections");
    }
    result.write_csv(create(&s.output_dir, "reps.csv")?)?;
    let file = MetricsFile {
        pfa: result.pfa,
        add: result.add,
        nd: result.nd,
        n_reps: result.n_reps,
        failures,
        threshold,
        calibration,
        dgp: spec,
        pipeline: s.pipeline,
        detector: s.detector,
    };
    let mut out = create(&s.output_dir, "metrics.json")?;
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    out.flush()?;
    eprintln!(
        "PFA {:.3}  ADD {}  ND {:.3}  over {} replications",
        file.pfa,
        file.add.map_or("-".into(), |a| format!("{a:.2}")),
        file.nd,
        file.n_reps
    );
    Ok(())
}
