//! Flat `key=value` configuration covering every pipeline knob.
//!
//! The canonical serialization lists every key in a fixed order with
//! round-trippable numbers; its SHA-256 is the config fingerprint stamped on
//! every output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::encode::AngleMode;
use crate::error::{Error, Result};
use crate::matching::{MatchParams, ThresholdRule};
use crate::minutiae::MinutiaeParams;
use crate::ridgefield::FrequencyParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub block_size: usize,
    pub segments: usize,
    pub trim: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub k_theta: usize,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub half_width: usize,
    pub passes: usize,
    pub kappa_max: f64,
    pub window: usize,
    pub d_min: f64,
    pub border: usize,
    pub trace_len: usize,
    pub neighbors: usize,
    pub rho_tol: f64,
    pub theta_tol: f64,
    pub phi_tol: f64,
    pub matched_threshold: usize,
    pub mode: AngleMode,
    pub rule: ThresholdRule,
    pub g_thresh: f64,
    pub norm_mean: f64,
    pub norm_var: f64,
    pub orient_smooth: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            block_size: 16,
            segments: 4,
            trim: 1,
            f_min: 1.0 / 25.0,
            f_max: 1.0 / 3.0,
            k_theta: 16,
            sigma_x: 4.0,
            sigma_y: 4.0,
            half_width: 11,
            passes: 1,
            kappa_max: PI / 6.0,
            window: 17,
            d_min: 8.0,
            border: 8,
            trace_len: 10,
            neighbors: 9,
            rho_tol: 8.0,
            theta_tol: 0.2618,
            phi_tol: 0.2618,
            matched_threshold: 5,
            mode: AngleMode::Normalized,
            rule: ThresholdRule::AtLeast,
            g_thresh: 0.05,
            norm_mean: 0.5,
            norm_var: 0.01,
            orient_smooth: 3,
        }
    }
}

pub const KEYS: [&str; 26] = [
    "block_size",
    "segments",
    "trim",
    "f_min",
    "f_max",
    "k_theta",
    "sigma_x",
    "sigma_y",
    "half_width",
    "passes",
    "kappa_max",
    "window",
    "d_min",
    "border",
    "trace_len",
    "neighbors",
    "rho_tol",
    "theta_tol",
    "phi_tol",
    "matched_threshold",
    "mode",
    "rule",
    "g_thresh",
    "norm_mean",
    "norm_var",
    "orient_smooth",
];

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    // "p/q" is accepted so that frequencies can be written as 1/25
    let parsed = match v.split_once('/') {
        Some((p, q)) => match (p.trim().parse::<f64>(), q.trim().parse::<f64>()) {
            (Ok(p), Ok(q)) if q != 0.0 => Some(p / q),
            _ => None,
        },
        None => v.parse::<f64>().ok(),
    };
    parsed
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: not a number: {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: not a nonnegative integer: {v:?}")))
}

fn rule_name(r: ThresholdRule) -> &'static str {
    match r {
        ThresholdRule::AtLeast => "at_least",
        ThresholdRule::Exactly => "exactly",
    }
}

impl Config {
    /// Sets one key. Dashes are accepted in place of underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "block_size" => self.block_size = parse_usize(&key, v)?,
            "segments" => self.segments = parse_usize(&key, v)?,
            "trim" => self.trim = parse_usize(&key, v)?,
            "f_min" => self.f_min = parse_f64(&key, v)?,
            "f_max" => self.f_max = parse_f64(&key, v)?,
            "k_theta" => self.k_theta = parse_usize(&key, v)?,
            "sigma_x" => self.sigma_x = parse_f64(&key, v)?,
            "sigma_y" => self.sigma_y = parse_f64(&key, v)?,
            "half_width" => self.half_width = parse_usize(&key, v)?,
            "passes" => self.passes = parse_usize(&key, v)?,
            "kappa_max" => self.kappa_max = parse_f64(&key, v)?,
            "window" => self.window = parse_usize(&key, v)?,
            "d_min" => self.d_min = parse_f64(&key, v)?,
            "border" => self.border = parse_usize(&key, v)?,
            "trace_len" => self.trace_len = parse_usize(&key, v)?,
            "neighbors" => self.neighbors = parse_usize(&key, v)?,
            "rho_tol" => self.rho_tol = parse_f64(&key, v)?,
            "theta_tol" => self.theta_tol = parse_f64(&key, v)?,
            "phi_tol" => self.phi_tol = parse_f64(&key, v)?,
            "matched_threshold" => self.matched_threshold = parse_usize(&key, v)?,
            "mode" => self.mode = v.parse()?,
            "rule" => {
                self.rule = match v {
                    "at_least" => ThresholdRule::AtLeast,
                    "exactly" => ThresholdRule::Exactly,
                    _ => return Err(Error::Config(format!("rule: expected at_least or exactly, got {v:?}"))),
                }
            }
            "g_thresh" => self.g_thresh = parse_f64(&key, v)?,
            "norm_mean" => self.norm_mean = parse_f64(&key, v)?,
            "norm_var" => self.norm_var = parse_f64(&key, v)?,
            "orient_smooth" => self.orient_smooth = parse_usize(&key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = std::collections::BTreeSet::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            let k = k.trim().replace('-', "_");
            if !seen.insert(k.clone()) {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", no + 1)));
            }
            cfg.set(&k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} out of range")));
        if self.block_size < 4 {
            return bad("block_size (>= 4)");
        }
        if self.segments < 3 || self.segments > self.block_size {
            return bad("segments (3..=block_size)");
        }
        if 2 * self.trim >= self.segments {
            return bad("trim (2*trim < segments)");
        }
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max < 0.5) {
            return bad("f_min/f_max (0 < f_min < f_max < 0.5)");
        }
        if self.k_theta < 4 {
            return bad("k_theta (>= 4)");
        }
        if !(self.sigma_x > 0.0 && self.sigma_y > 0.0) {
            return bad("sigma_x/sigma_y (> 0)");
        }
        if self.half_width < 1 {
            return bad("half_width (>= 1)");
        }
        if self.passes < 1 {
            return bad("passes (>= 1)");
        }
        if !(self.kappa_max > 0.0 && self.kappa_max <= PI / 2.0) {
            return bad("kappa_max (0, pi/2]");
        }
        if self.window < 3 || self.window % 2 == 0 {
            return bad("window (odd, >= 3)");
        }
        if !(self.d_min > 0.0) {
            return bad("d_min (> 0)");
        }
        if self.trace_len < 1 {
            return bad("trace_len (>= 1)");
        }
        if self.neighbors < 1 {
            return bad("neighbors (>= 1)");
        }
        if self.matched_threshold < 1 || self.matched_threshold > self.neighbors {
            return bad("matched_threshold (1..=neighbors)");
        }
        let angle_ok = |a: f64| a > 0.0 && a < PI;
        if !(self.rho_tol > 0.0) || !angle_ok(self.theta_tol) || !angle_ok(self.phi_tol) {
            return bad("rho_tol/theta_tol/phi_tol");
        }
        if !(self.g_thresh >= 0.0) {
            return bad("g_thresh (>= 0)");
        }
        if !(self.norm_var > 0.0) {
            return bad("norm_var (> 0)");
        }
        if self.orient_smooth < 1 || self.orient_smooth % 2 == 0 {
            return bad("orient_smooth (odd, >= 1)");
        }
        Ok(())
    }

    /// One `key=value` line per key in [`KEYS`] order.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.value_of(key));
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "block_size" => self.block_size.to_string(),
            "segments" => self.segments.to_string(),
            "trim" => self.trim.to_string(),
            "f_min" => self.f_min.to_string(),
            "f_max" => self.f_max.to_string(),
            "k_theta" => self.k_theta.to_string(),
            "sigma_x" => self.sigma_x.to_string(),
            "sigma_y" => self.sigma_y.to_string(),
            "half_width" => self.half_width.to_string(),
            "passes" => self.passes.to_string(),
            "kappa_max" => self.kappa_max.to_string(),
            "window" => self.window.to_string(),
            "d_min" => self.d_min.to_string(),
            "border" => self.border.to_string(),
            "trace_len" => self.trace_len.to_string(),
            "neighbors" => self.neighbors.to_string(),
            "rho_tol" => self.rho_tol.to_string(),
            "theta_tol" => self.theta_tol.to_string(),
            "phi_tol" => self.phi_tol.to_string(),
            "matched_threshold" => self.matched_threshold.to_string(),
            "mode" => self.mode.to_string(),
            "rule" => rule_name(self.rule).to_string(),
            "g_thresh" => self.g_thresh.to_string(),
            "norm_mean" => self.norm_mean.to_string(),
            "norm_var" => self.norm_var.to_string(),
            "orient_smooth" => self.orient_smooth.to_string(),
            _ => unreachable!("unknown config key {key}"),
        }
    }

    /// Hex SHA-256 of [`Config::canonical`].
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Header comment lines stamped on every artifact.
    pub fn header_comments(&self) -> Vec<String> {
        vec![format!("config={}", self.fingerprint())]
    }

    pub fn frequency_params(&self) -> FrequencyParams {
        FrequencyParams {
            block: self.block_size,
            segments: self.segments,
            trim: self.trim,
            f_min: self.f_min,
            f_max: self.f_max,
        }
    }

    pub fn minutiae_params(&self) -> MinutiaeParams {
        MinutiaeParams {
            kappa_max: self.kappa_max,
            window: self.window,
            d_min: self.d_min,
            border: self.border,
            trace_len: self.trace_len,
        }
    }

    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            rho_tol: self.rho_tol,
            theta_tol: self.theta_tol,
            phi_tol: self.phi_tol,
            t: self.matched_threshold,
            mode: self.mode,
            rule: self.rule,
        }
    }
}
