//! Run configuration in laboratory units and its flat `key = value` file
//! format.
//!
//! ```text
//! # comments start with '#'
//! omega_r_mhz = 0.8
//! k_khz = 51
//! mode = hierarchy
//! output_dir = "out/run1"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use qdemon_core::params::step_count;
use qdemon_core::{FeedbackMode, InfoTiming, Mode, Params};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` given twice (line {line})")]
    Duplicate { key: String, line: usize },
    #[error("`{key}`: cannot parse {value:?} as {expected}")]
    Type {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("`{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

pub const KEYS: &[&str] = &[
    "omega_r_mhz",
    "k_khz",
    "eta",
    "beta",
    "tau_us",
    "dt_ns",
    "n_traj",
    "seed",
    "mode",
    "feedback_mode",
    "initial_projection",
    "info_timing",
    "path_stride",
    "emit_paths",
    "bootstrap_b",
    "output_dir",
];

/// Everything a command needs. Rates are cyclic frequencies and times are in
/// μs/ns as quoted in the lab; [`RunConfig::params`] converts them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub omega_r_mhz: f64,
    pub k_khz: f64,
    pub eta: f64,
    pub beta: f64,
    pub tau_us: f64,
    pub dt_ns: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub mode: Mode,
    pub feedback_mode: FeedbackMode,
    pub initial_projection: bool,
    pub info_timing: InfoTiming,
    pub path_stride: usize,
    pub emit_paths: bool,
    pub bootstrap_b: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega_r_mhz: 0.8,
            k_khz: 51.0,
            eta: 0.30,
            beta: 4.0,
            tau_us: 2.0,
            dt_ns: 1.0,
            n_traj: 20_000,
            seed: 0x5EED,
            mode: Mode::Hierarchy,
            feedback_mode: FeedbackMode::Ideal,
            initial_projection: true,
            info_timing: InfoTiming::PostFeedback,
            path_stride: 20,
            emit_paths: false,
            bootstrap_b: 1000,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<V: std::str::FromStr>(key: &'static str, value: &str, expected: &'static str) -> Result<V, ConfigError> {
    value.parse().map_err(|_| ConfigError::Type {
        key,
        value: value.to_string(),
        expected,
    })
}

fn parse_bool(key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::Type {
            key,
            value: value.to_string(),
            expected: "a boolean",
        }),
    }
}

fn parse_seed(key: &'static str, value: &str) -> Result<u64, ConfigError> {
    let parsed = match value.strip_prefix("0x").or_else(|| value.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => value.replace('_', "").parse().ok(),
    };
    parsed.ok_or_else(|| ConfigError::Type {
        key,
        value: value.to_string(),
        expected: "an unsigned 64-bit integer",
    })
}

pub fn parse_mode(value: &str) -> Result<Mode, ConfigError> {
    match value {
        "hierarchy" => Ok(Mode::Hierarchy),
        "filter-only" | "filter_only" => Ok(Mode::FilterOnly),
        _ => Err(ConfigError::Type {
            key: "mode",
            value: value.to_string(),
            expected: "one of hierarchy, filter-only",
        }),
    }
}

pub fn parse_feedback_mode(value: &str) -> Result<FeedbackMode, ConfigError> {
    match value {
        "ideal" => Ok(FeedbackMode::Ideal),
        "randomized" => Ok(FeedbackMode::Randomized),
        "off" => Ok(FeedbackMode::Off),
        _ => Err(ConfigError::Type {
            key: "feedback_mode",
            value: value.to_string(),
            expected: "one of ideal, randomized, off",
        }),
    }
}

pub fn parse_info_timing(value: &str) -> Result<InfoTiming, ConfigError> {
    match value {
        "post-feedback" | "post_feedback" => Ok(InfoTiming::PostFeedback),
        "pre-feedback" | "pre_feedback" => Ok(InfoTiming::PreFeedback),
        _ => Err(ConfigError::Type {
            key: "info_timing",
            value: value.to_string(),
            expected: "one of post-feedback, pre-feedback",
        }),
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = unquote(value);
        match key {
            "omega_r_mhz" => self.omega_r_mhz = parse_num("omega_r_mhz", value, "a number")?,
            "k_khz" => self.k_khz = parse_num("k_khz", value, "a number")?,
            "eta" => self.eta = parse_num("eta", value, "a number")?,
            "beta" => self.beta = parse_num("beta", value, "a number")?,
            "tau_us" => self.tau_us = parse_num("tau_us", value, "a number")?,
            "dt_ns" => self.dt_ns = parse_num("dt_ns", value, "a number")?,
            "n_traj" => self.n_traj = parse_num("n_traj", value, "a non-negative integer")?,
            "seed" => self.seed = parse_seed("seed", value)?,
            "mode" => self.mode = parse_mode(value)?,
            "feedback_mode" => self.feedback_mode = parse_feedback_mode(value)?,
            "initial_projection" => self.initial_projection = parse_bool("initial_projection", value)?,
            "info_timing" => self.info_timing = parse_info_timing(value)?,
            "path_stride" => self.path_stride = parse_num("path_stride", value, "a positive integer")?,
            "emit_paths" => self.emit_paths = parse_bool("emit_paths", value)?,
            "bootstrap_b" => self.bootstrap_b = parse_num("bootstrap_b", value, "a positive integer")?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses a document on top of the defaults. Does not validate.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                // a '#' inside a quoted value is kept
                Some(pos) if !raw[..pos].contains('"') && !raw[..pos].contains('\'') => &raw[..pos],
                _ => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    key: key.to_string(),
                    line: i + 1,
                });
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key, reason: &str| {
            Err(ConfigError::Invalid {
                key,
                reason: reason.to_string(),
            })
        };
        let finite = [
            ("omega_r_mhz", self.omega_r_mhz),
            ("k_khz", self.k_khz),
            ("eta", self.eta),
            ("beta", self.beta),
            ("tau_us", self.tau_us),
            ("dt_ns", self.dt_ns),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return bad(key, "must be finite");
            }
        }
        if self.omega_r_mhz < 0.0 {
            return bad("omega_r_mhz", "must be non-negative");
        }
        if self.k_khz < 0.0 {
            return bad("k_khz", "must be non-negative");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta", "must lie in (0, 1]");
        }
        if self.beta < 0.0 {
            return bad("beta", "must be non-negative");
        }
        if self.tau_us < 0.0 {
            return bad("tau_us", "must be non-negative");
        }
        if self.dt_ns <= 0.0 {
            return bad("dt_ns", "must be positive");
        }
        if step_count(self.tau_us, self.dt_us()).is_err() {
            return bad("tau_us", "tau_us / dt_ns must be a whole number of steps");
        }
        if self.n_traj == 0 {
            return bad("n_traj", "must be at least 1");
        }
        if self.path_stride == 0 {
            return bad("path_stride", "must be at least 1");
        }
        if self.bootstrap_b < 100 {
            return bad("bootstrap_b", "must be at least 100");
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir", "must not be empty");
        }
        Ok(())
    }

    pub fn dt_us(&self) -> f64 {
        self.dt_ns * 1e-3
    }

    pub fn n_steps(&self) -> Result<usize, ConfigError> {
        step_count(self.tau_us, self.dt_us()).map_err(|e| ConfigError::Invalid {
            key: "tau_us",
            reason: e.to_string(),
        })
    }

    /// Simulation parameters in rad/μs and μs.
    pub fn params(&self) -> Params {
        let two_pi = std::f64::consts::TAU;
        Params {
            omega_r: two_pi * self.omega_r_mhz,
            k: two_pi * self.k_khz * 1e-3,
            eta: self.eta,
            beta: self.beta,
            tau: self.tau_us,
            dt: self.dt_us(),
            mode: self.mode,
            feedback_mode: self.feedback_mode,
            initial_projection: self.initial_projection,
            info_timing: self.info_timing,
            n_traj: self.n_traj,
            seed: self.seed,
        }
    }
}
