//! Run configuration shared by the command-line front end: a flat
//! `key=value` file whose keys are the flag names.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianKind {
    /// `½(p+P)² − amplitude·sin²(πx)`.
    Pendulum,
    /// `½p² + V(x)` with `V` from the coefficient list `v`.
    Mechanical,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Critical,
    #[serde(untagged)]
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizeTime {
    Auto,
    #[serde(untagged)]
    Value(f64),
}

/// Starting function for `regularize`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Zero,
    /// The converged iterate of the critical value estimate.
    Critical,
    /// `d(x, ½)`.
    Kink,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub hamiltonian: HamiltonianKind,
    #[serde(rename = "P")]
    pub p: f64,
    pub amplitude: f64,
    /// `mean, a1, b1, a2, b2, ...` for `V(x) = mean + Σ a_k cos(2πkx) + b_k sin(2πkx)`.
    pub v: Vec<f64>,
    pub grid_n: usize,
    pub h: f64,
    pub c: Level,
    pub t: f64,
    pub s: RegularizeTime,
    pub members: usize,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub iterations: usize,
    pub input: InputKind,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub json: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianKind::Pendulum,
            p: 0.0,
            amplitude: 1.0,
            v: vec![-0.5, 0.5],
            grid_n: 512,
            h: 0.01,
            c: Level::Critical,
            t: 0.1,
            s: RegularizeTime::Value(0.05),
            members: 8,
            seed: 7,
            epsilon: None,
            iterations: 500,
            input: InputKind::Critical,
            out: None,
            json: None,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: expected a number, got {value:?}")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {value:?}")))
}

impl RunConfig {
    /// Sets one key. Keys accept `-` or `_` as separator.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "hamiltonian" => {
                self.hamiltonian = match value {
                    "pendulum" => HamiltonianKind::Pendulum,
                    "mechanical" => HamiltonianKind::Mechanical,
                    "free" => HamiltonianKind::Free,
                    _ => return Err(Error::Config(format!("unknown hamiltonian {value:?}"))),
                }
            }
            "P" | "p" => self.p = parse_f64("P", value)?,
            "amplitude" => self.amplitude = parse_f64("amplitude", value)?,
            "v" => {
                self.v = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_f64("v", s))
                    .collect::<Result<_>>()?
            }
            "grid-n" => self.grid_n = parse_usize("grid-n", value)?,
            "h" => self.h = parse_f64("h", value)?,
            "c" => {
                self.c = if value == "critical" { Level::Critical } else { Level::Value(parse_f64("c", value)?) }
            }
            "t" => self.t = parse_f64("t", value)?,
            "s" => {
                self.s = if value == "auto" { RegularizeTime::Auto } else { RegularizeTime::Value(parse_f64("s", value)?) }
            }
            "members" => self.members = parse_usize("members", value)?,
            "seed" => self.seed = value.parse().map_err(|_| Error::Config(format!("seed: bad value {value:?}")))?,
            "epsilon" => self.epsilon = Some(parse_f64("epsilon", value)?),
            "iterations" => self.iterations = parse_usize("iterations", value)?,
            "input" => {
                self.input = match value {
                    "zero" => InputKind::Zero,
                    "critical" => InputKind::Critical,
                    "kink" => InputKind::Kink,
                    _ => return Err(Error::Config(format!("unknown input {value:?}"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "json" => self.json = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.grid_n.is_power_of_two() || self.grid_n < 16 {
            return bad(format!("grid-n must be a power of two >= 16, got {}", self.grid_n));
        }
        if !(self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.t > 0.0) {
            return bad(format!("t must be positive, got {}", self.t));
        }
        if let RegularizeTime::Value(s) = self.s {
            if !(s > 0.0 && s <= self.t) {
                return bad(format!("need 0 < s <= t, got s={s}, t={}", self.t));
            }
        }
        if matches!(self.epsilon, Some(e) if !(e > 0.0)) {
            return bad("epsilon must be positive".into());
        }
        if self.hamiltonian == HamiltonianKind::Pendulum && !(self.amplitude >= 0.0) {
            return bad("amplitude must be non-negative".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        Ok(())
    }

    pub fn build_hamiltonian(&self) -> Hamiltonian {
        match self.hamiltonian {
            HamiltonianKind::Pendulum => Hamiltonian::tilted_pendulum_with_amplitude(self.p, self.amplitude),
            HamiltonianKind::Mechanical => Hamiltonian::mechanical(Potential::from_coefficients(&self.v)),
            HamiltonianKind::Free => Hamiltonian::free_particle(),
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}
