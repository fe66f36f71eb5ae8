use std::path::PathBuf;

use thiserror::Error;

use crate::scheme::{Mode, StartUp};
use crate::sparse::DEFAULT_TOL;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{key}: {msg}")]
    Key { key: String, msg: String },
}

fn key_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// How the time step follows from the mesh width `h = 1/M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    SqrtH,
    H,
    Fixed(f64),
}

impl DtRule {
    pub fn raw_dt(&self, subdivisions: usize) -> f64 {
        let h = 1.0 / subdivisions as f64;
        match *self {
            DtRule::SqrtH => h.sqrt(),
            DtRule::H => h,
            DtRule::Fixed(dt) => dt,
        }
    }

    pub fn name(&self) -> String {
        match self {
            DtRule::SqrtH => "sqrt_h".into(),
            DtRule::H => "h".into(),
            DtRule::Fixed(dt) => format!("{dt}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dim: usize,
    pub order: usize,
    pub levels: Vec<usize>,
    /// `None` picks `sqrt_h` for linear and `h` for quadratic elements.
    pub dt_rule: Option<DtRule>,
    pub t_final: f64,
    pub v0: f64,
    pub mode: Mode,
    pub snapshots: Vec<f64>,
    pub out: PathBuf,
    pub tol: f64,
    pub seed: u64,
    pub check_gauge: bool,
    pub start: StartUp,
    pub quad_degree: Option<usize>,
    pub parallel_levels: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            order: 1,
            levels: vec![4, 8, 16],
            dt_rule: None,
            t_final: 4.0,
            v0: 5.0,
            mode: Mode::Mms,
            snapshots: vec![1.0, 2.0, 3.0, 4.0],
            out: PathBuf::from("out"),
            tol: DEFAULT_TOL,
            seed: 20241015,
            check_gauge: false,
            start: StartUp::FirstOrder,
            quad_degree: None,
            parallel_levels: false,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| key_err(key, format!("cannot parse list entry `{}`", t.trim())))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| key_err(key, format!("cannot parse `{}`", value.trim())))
}

impl StudyConfig {
    /// Sets one key. Keys use either `_` or `-` as separator.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        let norm = key.to_ascii_lowercase().replace('-', "_");
        let v = value.trim();
        match norm.as_str() {
            "dim" => self.dim = parse_num(key, v)?,
            "order" | "r" => self.order = parse_num(key, v)?,
            "levels" => self.levels = parse_list(key, v)?,
            "dt_rule" | "dt" => {
                self.dt_rule = Some(match v {
                    "sqrt_h" => DtRule::SqrtH,
                    "h" => DtRule::H,
                    other => {
                        let dt: f64 = other.parse().map_err(|_| {
                            key_err(
                                key,
                                format!("expected sqrt_h, h or a number, got `{other}`"),
                            )
                        })?;
                        DtRule::Fixed(dt)
                    }
                })
            }
            "tmax" | "t" | "t_final" => self.t_final = parse_num(key, v)?,
            "v0" => self.v0 = parse_num(key, v)?,
            "mode" => {
                self.mode = match v {
                    "mms" => Mode::Mms,
                    "free" => Mode::Free,
                    other => {
                        return Err(key_err(key, format!("expected mms or free, got `{other}`")))
                    }
                }
            }
            "snapshots" => self.snapshots = parse_list(key, v)?,
            "out" => {
                if v.is_empty() {
                    return Err(key_err(key, "empty output path"));
                }
                self.out = PathBuf::from(v)
            }
            "tol" => self.tol = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "check_gauge" => self.check_gauge = parse_bool(key, v)?,
            "start" => {
                self.start = match v {
                    "first_order" => StartUp::FirstOrder,
                    "second_order" => StartUp::SecondOrder,
                    other => {
                        return Err(key_err(
                            key,
                            format!("expected first_order or second_order, got `{other}`"),
                        ))
                    }
                }
            }
            "quad_degree" => self.quad_degree = Some(parse_num(key, v)?),
            "parallel_levels" => self.parallel_levels = parse_bool(key, v)?,
            _ => return Err(key_err(key, "unknown key")),
        }
        Ok(())
    }

    pub fn dt_rule(&self) -> DtRule {
        self.dt_rule.unwrap_or(if self.order == 1 {
            DtRule::SqrtH
        } else {
            DtRule::H
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim != 2 && self.dim != 3 {
            return Err(key_err("dim", format!("must be 2 or 3, got {}", self.dim)));
        }
        if self.order != 1 && self.order != 2 {
            return Err(key_err(
                "order",
                format!("must be 1 or 2, got {}", self.order),
            ));
        }
        if self.levels.is_empty() {
            return Err(key_err("levels", "at least one mesh level is required"));
        }
        if self.levels[0] == 0 {
            return Err(key_err("levels", "levels must be positive"));
        }
        for w in self.levels.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(key_err(
                    "levels",
                    format!(
                        "each level must double the previous one, got {} after {}",
                        w[1], w[0]
                    ),
                ));
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(key_err(
                "tmax",
                format!("must be positive, got {}", self.t_final),
            ));
        }
        if !self.v0.is_finite() {
            return Err(key_err("v0", "must be finite"));
        }
        if let DtRule::Fixed(dt) = self.dt_rule() {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(key_err(
                    "dt_rule",
                    format!("time step must be positive, got {dt}"),
                ));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(key_err(
                "tol",
                format!("must lie in (0, 1), got {}", self.tol),
            ));
        }
        for w in self.snapshots.windows(2) {
            if w[1] <= w[0] {
                return Err(key_err("snapshots", "times must be strictly increasing"));
            }
        }
        if let Some(&t) = self
            .snapshots
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_final))
        {
            return Err(key_err(
                "snapshots",
                format!("time {t} outside [0, {}]", self.t_final),
            ));
        }
        if let Some(q) = self.quad_degree {
            if q < 2 * self.order + 2 || q > crate::element::MAX_QUADRATURE_DEGREE {
                return Err(key_err(
                    "quad_degree",
                    format!(
                        "must lie in [{}, {}], got {q}",
                        2 * self.order + 2,
                        crate::element::MAX_QUADRATURE_DEGREE
                    ),
                ));
            }
        }
        time_grid(&self.snapshots, self.t_final)
            .map(|_| ())
            .ok_or_else(|| {
                key_err(
                    "snapshots",
                    "times and tmax must be multiples of a common step 1/q, q <= 1000",
                )
            })
    }

    /// Raw and adjusted time step for mesh level `M`.
    pub fn time_step(&self, subdivisions: usize) -> Result<(f64, f64), ConfigError> {
        let raw = self.dt_rule().raw_dt(subdivisions);
        let grid = time_grid(&self.snapshots, self.t_final)
            .ok_or_else(|| key_err("snapshots", "no common time grid"))?;
        Ok((raw, adjust_dt(raw, grid)))
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(key_err(
            key,
            format!("expected true or false, got `{other}`"),
        )),
    }
}

/// Parses `key = value` lines; `#` starts a comment. Unset keys keep their
/// defaults. The result is validated.
pub fn parse_config(text: &str) -> Result<StudyConfig, ConfigError> {
    let mut cfg = StudyConfig::default();
    apply_config(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies `key = value` lines on top of an existing configuration without
/// validating.
pub fn apply_config(cfg: &mut StudyConfig, text: &str) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        if key.trim().is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                msg: "missing key".into(),
            });
        }
        cfg.set(key, value)?;
    }
    Ok(())
}

/// Largest step `tau = g/q` such that `t_final` and every snapshot time are
/// integer multiples of it, with `q <= 1000`.
pub fn time_grid(times: &[f64], t_final: f64) -> Option<f64> {
    let all: Vec<f64> = times.iter().copied().chain([t_final]).collect();
    for q in 1..=1000u64 {
        let ints: Option<Vec<u64>> = all
            .iter()
            .map(|t| {
                let s = t * q as f64;
                ((s - s.round()).abs() <= 1e-9 * s.abs().max(1.0) && s >= -0.5)
                    .then(|| s.round() as u64)
            })
            .collect();
        if let Some(ints) = ints {
            let g = ints.iter().fold(0u64, |a, &b| gcd(a, b));
            if g > 0 {
                return Some(g as f64 / q as f64);
            }
        }
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `tau / ceil(tau / dt)`: the largest step not above `dt` that divides
/// `tau`. A `dt` already dividing `tau` up to roundoff is kept.
pub fn adjust_dt(dt: f64, tau: f64) -> f64 {
    let n = tau / dt;
    let n = if (n - n.round()).abs() <= 1e-9 * n.max(1.0) {
        n.round()
    } else {
        n.ceil()
    };
    tau / n.max(1.0)
}
