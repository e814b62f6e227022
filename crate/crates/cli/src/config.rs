//! Flat key=value experiment configuration with CLI flag overrides.
//!
//! Lists are comma-separated; `#` starts a comment. The seed is mandatory so
//! no run ever depends on the wall clock.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use geograph::model::{ConnectionFunction, ModelParams, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    WeakRecoverySweep,
    ExactRecoverySweep,
    PercolationSweep,
    Distinguish,
    InfoFlow,
    Thresholds,
    FlipBad,
}

impl Experiment {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        Ok(match name {
            "weak_recovery_sweep" => Experiment::WeakRecoverySweep,
            "exact_recovery_sweep" => Experiment::ExactRecoverySweep,
            "percolation_sweep" => Experiment::PercolationSweep,
            "distinguish" => Experiment::Distinguish,
            "infoflow" => Experiment::InfoFlow,
            "thresholds" => Experiment::Thresholds,
            "flipbad" => Experiment::FlipBad,
            other => {
                return Err(ConfigError::new("experiment", format!("unknown experiment `{other}`")))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::WeakRecoverySweep => "weak_recovery_sweep",
            Experiment::ExactRecoverySweep => "exact_recovery_sweep",
            Experiment::PercolationSweep => "percolation_sweep",
            Experiment::Distinguish => "distinguish",
            Experiment::InfoFlow => "infoflow",
            Experiment::Thresholds => "thresholds",
            Experiment::FlipBad => "flipbad",
        }
    }
}

/// A validation failure naming the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Declarative description of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub lambda: Vec<f64>,
    pub n: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub d: usize,
    pub regime: Regime,
    pub epsilon: f64,
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<String>,
    /// Window side for percolation estimates, in units of the gap support.
    pub window: f64,
    /// Reveal radius for the information-flow experiment.
    pub reveal_r: f64,
    /// Statistic radius for Detect-Partitions; defaults to half the window
    /// side.
    pub l_radius: Option<f64>,
    /// Optional tessellation-scale override (e.g. `log(n)^{1/d} / (2d)`).
    pub grid_r: Option<f64>,
    pub workers: usize,
}

impl ExperimentConfig {
    /// Parse the key=value text, then apply overrides (same syntax) from the
    /// command line.
    pub fn from_text(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    "<file>",
                    format!("line {}: expected key = value, got `{line}`", lineno + 1),
                ));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in overrides {
            map.insert(key.clone(), value.clone());
        }
        Self::from_map(map)
    }

    pub fn from_file(
        path: &Path,
        overrides: &[(String, String)],
    ) -> Result<Self, Box<dyn std::error::Error>> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_text(&text, overrides)?)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        fn take(map: &mut BTreeMap<String, String>, key: &str) -> Option<String> {
            map.remove(key)
        }
        fn parse_f64(field: &str, v: &str) -> Result<f64, ConfigError> {
            v.parse::<f64>().map_err(|e| ConfigError::new(field, format!("bad number `{v}`: {e}")))
        }
        fn parse_list(field: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
            let out: Result<Vec<f64>, _> =
                v.split(',').map(|s| parse_f64(field, s.trim())).collect();
            let out = out?;
            if out.is_empty() {
                return Err(ConfigError::new(field, "list must be nonempty"));
            }
            Ok(out)
        }

        let experiment = match take(&mut map, "experiment") {
            Some(v) => Experiment::parse(&v)?,
            None => return Err(ConfigError::new("experiment", "missing")),
        };
        let seed = match take(&mut map, "seed") {
            Some(v) => v
                .parse::<u64>()
                .map_err(|e| ConfigError::new("seed", format!("bad seed `{v}`: {e}")))?,
            None => return Err(ConfigError::new("seed", "missing (no wall-clock default)")),
        };
        let lambda = match take(&mut map, "lambda") {
            Some(v) => parse_list("lambda", &v)?,
            None => return Err(ConfigError::new("lambda", "missing")),
        };
        let n = match take(&mut map, "n") {
            Some(v) => parse_list("n", &v)?,
            None => vec![10_000.0],
        };
        let a = match take(&mut map, "a") {
            Some(v) => parse_f64("a", &v)?,
            None => 1.0,
        };
        let b = match take(&mut map, "b") {
            Some(v) => parse_f64("b", &v)?,
            None => 0.0,
        };
        let r_in = match take(&mut map, "r_in") {
            Some(v) => parse_f64("r_in", &v)?,
            None => 1.0,
        };
        let r_out = match take(&mut map, "r_out") {
            Some(v) => parse_f64("r_out", &v)?,
            None => r_in,
        };
        let d = match take(&mut map, "d") {
            Some(v) => v.parse::<usize>().map_err(|e| ConfigError::new("d", e.to_string()))?,
            None => 2,
        };
        let regime = match take(&mut map, "regime").as_deref() {
            Some("sparse_euclidean") => Regime::SparseEuclidean,
            Some("log_torus") => Regime::LogTorus,
            Some(other) => {
                return Err(ConfigError::new("regime", format!("unknown regime `{other}`")))
            }
            None => {
                if experiment == Experiment::ExactRecoverySweep || experiment == Experiment::FlipBad
                {
                    Regime::LogTorus
                } else {
                    Regime::SparseEuclidean
                }
            }
        };
        let epsilon = match take(&mut map, "epsilon") {
            Some(v) => parse_f64("epsilon", &v)?,
            None => 0.1,
        };
        let eta = match take(&mut map, "eta") {
            Some(v) => parse_f64("eta", &v)?,
            None => 0.05,
        };
        let trials = match take(&mut map, "trials") {
            Some(v) => v.parse::<usize>().map_err(|e| ConfigError::new("trials", e.to_string()))?,
            // percolation estimates default to 200 trials, everything else 20
            None if experiment == Experiment::PercolationSweep => 200,
            None => 20,
        };
        let out = take(&mut map, "out");
        let window = match take(&mut map, "window") {
            Some(v) => parse_f64("window", &v)?,
            None => 40.0,
        };
        let reveal_r = match take(&mut map, "reveal_r") {
            Some(v) => parse_f64("reveal_r", &v)?,
            None => 4.0 * r_in,
        };
        let l_radius = match take(&mut map, "l_radius") {
            Some(v) => Some(parse_f64("l_radius", &v)?),
            None => None,
        };
        let grid_r = match take(&mut map, "grid_r") {
            Some(v) => Some(parse_f64("grid_r", &v)?),
            None => None,
        };
        let workers = match take(&mut map, "workers") {
            Some(v) => {
                v.parse::<usize>().map_err(|e| ConfigError::new("workers", e.to_string()))?
            }
            None => 0,
        };
        if let Some(unknown) = map.keys().next() {
            return Err(ConfigError::new(unknown, "unknown field"));
        }

        let config = ExperimentConfig {
            experiment,
            lambda,
            n,
            a,
            b,
            r_in,
            r_out,
            d,
            regime,
            epsilon,
            eta,
            trials,
            seed,
            out,
            window,
            reveal_r,
            l_radius,
            grid_r,
            workers,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(ConfigError::new("lambda", "intensities must be finite and >= 0"));
        }
        if self.n.iter().any(|&n| !(n > 0.0)) {
            return Err(ConfigError::new("n", "window volumes must be positive"));
        }
        if self.trials == 0 && self.experiment != Experiment::Thresholds {
            return Err(ConfigError::new("trials", "must be >= 1"));
        }
        if !(0.0 < self.epsilon && self.epsilon < 0.5) {
            return Err(ConfigError::new("epsilon", "must lie in (0, 1/2)"));
        }
        if !(0.0 < self.eta && self.eta < 0.5) {
            return Err(ConfigError::new("eta", "must lie in (0, 1/2)"));
        }
        // probe the model construction at the first sweep point so (f_in >=
        // f_out, regime constraints) are rejected before any work happens
        self.model_params(self.lambda[0], self.n[0])
            .map_err(|e| ConfigError::new("model", e.to_string()))?;
        Ok(())
    }

    /// Instantiate model parameters at one sweep point.
    pub fn model_params(&self, lambda: f64, n: f64) -> geograph::Result<ModelParams> {
        let (f_in, f_out) = match self.regime {
            Regime::SparseEuclidean => (
                ConnectionFunction::indicator(self.a, self.r_in),
                ConnectionFunction::indicator(self.b, self.r_out),
            ),
            Regime::LogTorus => {
                let radius = n.ln().powf(1.0 / self.d as f64);
                (
                    ConnectionFunction::indicator(self.a, radius),
                    ConnectionFunction::indicator(self.b, radius),
                )
            }
        };
        ModelParams::new(lambda, self.d, n, f_in, f_out, self.regime)
    }
}
