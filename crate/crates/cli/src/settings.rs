//! Flags, the optional flat config file, and per-command defaults.
//!
//! A config file holds `key = value` lines using the long flag names
//! (`delta = 50`, `variant = llf`); `#` starts a comment. Flags given on the
//! command line win over the file, and the file wins over the defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use ews_core::detector::{DetectorConfig, Threshold};
use ews_core::entropy::{EntropyConfig, Variant};
use ews_core::forest::ForestConfig;
use ews_core::pipeline::PipelineConfig;
use ews_core::seed::RngSeed;
use ews_core::simlab::DgpKind;
use ews_core::window::WindowPlan;

use crate::CliError;

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Flat `key = value` file with defaults for any flag below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV with timestamp, target, covariates
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// baseline, llf, rank or llf-rank
    #[arg(long)]
    pub variant: Option<String>,
    /// Window length
    #[arg(long)]
    pub delta: Option<usize>,
    /// Gap between window starts
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub max_ar_order: Option<usize>,
    #[arg(long)]
    pub max_cov_lag: Option<usize>,
    /// Number of candidate mean shifts
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Alarm level, or "calibrate"
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// termination, inversion or tail
    #[arg(long)]
    pub dgp: Option<String>,
    /// Series length for synthetic designs
    #[arg(long)]
    pub len: Option<usize>,
    /// Change row for synthetic designs, or the known change row of an input
    #[arg(long)]
    pub theta: Option<usize>,
    /// Convert target and covariates from prices to log-returns
    #[arg(long)]
    pub returns: bool,
    #[arg(long)]
    pub restart_after_alarm: Option<bool>,
    /// False-alarm probability targeted by calibration
    #[arg(long)]
    pub target_pfa: Option<f64>,
    /// Null runs used by calibration
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Trees per forest
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Slope penalty of the local linear forest
    #[arg(long)]
    pub ridge: Option<f64>,
}

const KEYS: &[&str] = &[
    "input",
    "output-dir",
    "variant",
    "delta",
    "step",
    "max-ar-order",
    "max-cov-lag",
    "m",
    "alpha",
    "beta",
    "threshold",
    "seed",
    "reps",
    "dgp",
    "len",
    "theta",
    "returns",
    "restart-after-alarm",
    "target-pfa",
    "n-mc",
    "trees",
    "min-leaf",
    "ridge",
];

pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected key = value", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "config line {}: unknown key {key:?}",
                i + 1
            )));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// Defaults that differ between synthetic and empirical runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Simulation,
    Empirical,
}

/// Everything a command needs, after merging flags, file and defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub pipeline: PipelineConfig,
    pub detector: DetectorConfig,
    pub seed: RngSeed,
    pub reps: usize,
    pub dgp: DgpKind,
    pub len: usize,
    pub theta: Option<usize>,
    pub returns: bool,
    pub target_pfa: f64,
    pub n_mc: usize,
}

struct Merge {
    file: BTreeMap<String, String>,
}

impl Merge {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Config(format!("config key {key}: {e}"))),
        }
    }
}

fn parse_threshold(raw: &str) -> Result<Threshold, CliError> {
    if raw.trim().eq_ignore_ascii_case("calibrate") {
        return Ok(Threshold::Calibrate);
    }
    raw.trim()
        .parse::<f64>()
        .map(Threshold::Fixed)
        .map_err(|_| {
            CliError::Config(format!(
                "threshold must be a number or \"calibrate\", got {raw:?}"
            ))
        })
}

impl Settings {
    pub fn resolve(flags: &Flags, profile: Profile) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let mg = Merge { file };
        let f = flags;

        let (delta, detector) = match profile {
            Profile::Simulation => (50, DetectorConfig::simulation()),
            Profile::Empirical => (100, DetectorConfig::empirical()),
        };
        let plan = WindowPlan {
            delta: mg.pick(f.delta, "delta")?.unwrap_or(delta),
            step: mg.pick(f.step, "step")?.unwrap_or(1),
            max_ar_order: mg.pick(f.max_ar_order, "max-ar-order")?.unwrap_or(10),
            max_cov_lag: mg.pick(f.max_cov_lag, "max-cov-lag")?.unwrap_or(10),
        };
        let variant = match mg.pick(f.variant.clone(), "variant")? {
            Some(v) => v.parse::<Variant>()?,
            None => Variant::Baseline,
        };
        let forest = ForestConfig {
            n_trees: mg
                .pick(f.trees, "trees")?
                .unwrap_or(ForestConfig::default().n_trees),
            min_leaf: mg
                .pick(f.min_leaf, "min-leaf")?
                .unwrap_or(ForestConfig::default().min_leaf),
            ..ForestConfig::default()
        };
        let pipeline = PipelineConfig {
            plan,
            variant,
            entropy: EntropyConfig {
                forest,
                ..EntropyConfig::default()
            },
            ridge: mg.pick(f.ridge, "ridge")?.unwrap_or(0.01),
        };
        let threshold = match mg.pick(f.threshold.clone(), "threshold")? {
            Some(raw) => parse_threshold(&raw)?,
            None => Threshold::Calibrate,
        };
        let detector = DetectorConfig {
            m: mg.pick(f.m, "m")?.unwrap_or(detector.m),
            alpha: mg.pick(f.alpha, "alpha")?.unwrap_or(detector.alpha),
            beta: mg.pick(f.beta, "beta")?.unwrap_or(detector.beta),
            threshold,
            restart_after_alarm: mg
                .pick(f.restart_after_alarm, "restart-after-alarm")?
                .unwrap_or(detector.restart_after_alarm),
        };
        let dgp = match mg.pick(f.dgp.clone(), "dgp")? {
            Some(d) => d.parse::<DgpKind>()?,
            None => DgpKind::Termination,
        };
        let returns = f.returns || mg.pick(None::<bool>, "returns")?.unwrap_or(false);
        let settings = Settings {
            input: mg.pick(f.input.clone(), "input")?,
            output_dir: mg
                .pick(f.output_dir.clone(), "output-dir")?
                .unwrap_or_else(|| PathBuf::from("out")),
            pipeline,
            detector,
            seed: RngSeed(mg.pick(f.seed, "seed")?.unwrap_or(0)),
            reps: mg.pick(f.reps, "reps")?.unwrap_or(100),
            dgp,
            len: mg.pick(f.len, "len")?.unwrap_or(1000),
            theta: mg.pick(f.theta, "theta")?,
            returns,
            target_pfa: mg.pick(f.target_pfa, "target-pfa")?.unwrap_or(0.1),
            n_mc: mg.pick(f.n_mc, "n-mc")?.unwrap_or(200),
        };
        settings.pipeline.validate()?;
        settings.detector.validate()?;
        Ok(settings)
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        let path = self
            .input
            .as_deref()
            .ok_or_else(|| CliError::Config("--input is required".into()))?;
        if !path.is_file() {
            return Err(CliError::Config(format!(
                "input file {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parses_and_rejects_unknown_keys() {
        let map = parse_config_file("# run\ndelta = 60\nmax_ar_order=4 # inline\n\n").unwrap();
        assert_eq!(map["delta"], "60");
        assert_eq!(map["max-ar-order"], "4");
        assert!(parse_config_file("bogus = 1").is_err());
        assert!(parse_config_file("delta 50").is_err());
    }

    #[test]
    fn flags_override_file_and_defaults_follow_profile() {
        let dir = std::env::temp_dir().join(format!("ews-settings-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        fs::write(&path, "delta = 60\nm = 3\nthreshold = 25\n").unwrap();
        let flags = Flags {
            config: Some(path),
            m: Some(4),
            ..Flags::default()
        };
        let s = Settings::resolve(&flags, Profile::Empirical).unwrap();
        assert_eq!(s.pipeline.plan.delta, 60);
        assert_eq!(s.detector.m, 4);
        assert_eq!(s.detector.threshold, Threshold::Fixed(25.0));
        assert_eq!(s.detector.alpha, 0.95);
        let s = Settings::resolve(&Flags::default(), Profile::Simulation).unwrap();
        assert_eq!((s.pipeline.plan.delta, s.detector.m), (50, 6));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn invalid_plan_is_a_config_error() {
        let flags = Flags {
            delta: Some(12),
            ..Flags::default()
        };
        assert!(matches!(
            Settings::resolve(&flags, Profile::Simulation),
            Err(CliError::Core(_))
        ));
        let flags = Flags {
            threshold: Some("high".into()),
            ..Flags::default()
        };
        assert!(matches!(
            Settings::resolve(&flags, Profile::Simulation),
            Err(CliError::Config(_))
        ));
    }
}
