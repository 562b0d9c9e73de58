//! `key = value unit` scenario files.
//!
//! Every dimensioned value carries a unit suffix; dimensionless knobs carry
//! none. Lists are comma separated with one trailing unit for all entries.
//! [`Scenario::canonical`] writes every key in SI units and parses back to
//! the same scenario.

use std::fmt::Write as _;
use std::path::PathBuf;

use atomflux_core::ReferenceScenario;

use crate::error::CliError;

pub const DEFAULT_OUTPUT: &str = "atomflux-out";

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub physics: ReferenceScenario,
    /// Density snapshot times, s.
    pub snapshot_times: Vec<f64>,
    /// `σ₀` values for the transmission sweep, m.
    pub sigma_sweep: Vec<f64>,
    /// Detunings for the transmission sweep, rad/s.
    pub detuning_sweep: Vec<f64>,
    /// Samples across the packet support in `snapshots`.
    pub snapshot_points: usize,
    pub output_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            physics: ReferenceScenario::default(),
            snapshot_times: [0.0, 8.7, 14.7, 23.7, 29.7, 104.7].iter().map(|ms| ms / 1e3).collect(),
            sigma_sweep: [5.0, 10.0, 20.0, 30.0, 40.0, 50.0].iter().map(|um| um / 1e6).collect(),
            detuning_sweep: (0..=10).map(|i| khz(10.0 * i as f64)).collect(),
            snapshot_points: 2001,
            output_dir: PathBuf::from(DEFAULT_OUTPUT),
        }
    }
}

/// Detuning for a frequency in kHz, rad/s.
pub fn khz(f: f64) -> f64 {
    2.0 * std::f64::consts::PI * f * 1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Mass,
    Velocity,
    Length,
    Time,
    Rate,
    Angle,
    Plain,
}

impl Dimension {
    /// Accepted suffixes with the SI value `v * mul / div`; decimal prefixes
    /// divide so that `20 um` gives the double nearest 2e-5. The first entry
    /// is canonical.
    fn units(self) -> &'static [(&'static str, f64, f64)] {
        const TAU_K: f64 = 2.0 * std::f64::consts::PI * 1e3;
        match self {
            Dimension::Mass => &[("kg", 1.0, 1.0)],
            Dimension::Velocity => &[("m/s", 1.0, 1.0), ("mm/s", 1.0, 1e3)],
            Dimension::Length => &[("m", 1.0, 1.0), ("mm", 1.0, 1e3), ("um", 1.0, 1e6)],
            Dimension::Time => &[("s", 1.0, 1.0), ("ms", 1.0, 1e3)],
            Dimension::Rate => &[("rad/s", 1.0, 1.0), ("kHz", TAU_K, 1.0)],
            Dimension::Angle => &[("rad", 1.0, 1.0)],
            Dimension::Plain => &[],
        }
    }
}

const KEYS: &[(&str, Dimension)] = &[
    ("mass", Dimension::Mass),
    ("velocity", Dimension::Velocity),
    ("length", Dimension::Length),
    ("rabi_n", Dimension::Plain),
    ("rabi", Dimension::Rate),
    ("detuning", Dimension::Rate),
    ("phase", Dimension::Angle),
    ("sigma0", Dimension::Length),
    ("x0", Dimension::Length),
    ("n_nodes", Dimension::Plain),
    ("span", Dimension::Plain),
    ("t_end", Dimension::Time),
    ("n_steps", Dimension::Plain),
    ("trajectory_t_end", Dimension::Time),
    ("n_trajectories", Dimension::Plain),
    ("rk_tolerance", Dimension::Plain),
    ("snapshot_times", Dimension::Time),
    ("snapshot_points", Dimension::Plain),
    ("sigma_sweep", Dimension::Length),
    ("detuning_sweep", Dimension::Rate),
    ("output_dir", Dimension::Plain),
];

struct Line<'a> {
    number: usize,
    key: &'a str,
    value: &'a str,
    dim: Dimension,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> CliError {
        CliError::Config { line: self.number, message: format!("`{}`: {}", self.key, message.into()) }
    }

    /// Numbers with the unit factor applied.
    fn numbers(&self) -> Result<Vec<f64>, CliError> {
        let text = self.value.trim();
        let split = text.rfind(|c: char| c.is_ascii_digit() || c == '.').map_or(0, |i| i + 1);
        let (body, suffix) = text.split_at(split);
        let suffix = suffix.trim();
        let (mul, div) = match (self.dim, suffix) {
            (Dimension::Plain, "") => (1.0, 1.0),
            (Dimension::Plain, s) => return Err(self.err(format!("takes no unit, found `{s}`"))),
            (_, "") => {
                let names: Vec<_> = self.dim.units().iter().map(|u| u.0).collect();
                return Err(self.err(format!("missing unit, expected one of {}", names.join(", "))));
            }
            (dim, s) => match dim.units().iter().find(|u| u.0 == s) {
                Some(u) => (u.1, u.2),
                None => {
                    let names: Vec<_> = dim.units().iter().map(|u| u.0).collect();
                    return Err(self.err(format!("unit `{s}` not one of {}", names.join(", "))));
                }
            },
        };
        if body.trim().is_empty() {
            return Err(self.err("no value"));
        }
        body.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(|v| v * mul / div)
                    .ok_or_else(|| self.err(format!("malformed number `{item}`")))
            })
            .collect()
    }

    fn number(&self) -> Result<f64, CliError> {
        match self.numbers()?.as_slice() {
            [v] => Ok(*v),
            _ => Err(self.err("expected a single value")),
        }
    }

    fn count(&self) -> Result<usize, CliError> {
        let text = self.value.trim();
        text.parse::<usize>().map_err(|_| self.err(format!("expected a non-negative integer, found `{text}`")))
    }
}

/// Parses a scenario file; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<Scenario, CliError> {
    let mut s = Scenario::default();
    let mut seen = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let number = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::Config { line: number, message: format!("expected `key = value`, found `{content}`") })?;
        let key = key.trim();
        let dim = KEYS
            .iter()
            .find(|k| k.0 == key)
            .map(|k| k.1)
            .ok_or_else(|| CliError::Config { line: number, message: format!("unknown key `{key}`") })?;
        if seen.contains(&key) {
            return Err(CliError::Config { line: number, message: format!("`{key}` given twice") });
        }
        seen.push(key);
        let line = Line { number, key, value: value.trim(), dim };
        let p = &mut s.physics;
        match key {
            "mass" => p.mass = line.number()?,
            "velocity" => p.velocity = line.number()?,
            "length" => p.length = line.number()?,
            "rabi_n" => {
                p.rabi_n = u32::try_from(line.count()?).map_err(|_| line.err("too large"))?;
            }
            "rabi" => p.rabi_override = if line.value == "auto" { None } else { Some(line.number()?) },
            "detuning" => p.detuning = line.number()?,
            "phase" => p.phase = line.number()?,
            "sigma0" => p.sigma0 = line.number()?,
            "x0" => p.x0 = line.number()?,
            "n_nodes" => p.n_nodes = line.count()?,
            "span" => p.span = line.number()?,
            "t_end" => p.t_end = line.number()?,
            "n_steps" => p.n_steps = line.count()?,
            "trajectory_t_end" => p.trajectory_t_end = line.number()?,
            "n_trajectories" => p.n_trajectories = line.count()?,
            "rk_tolerance" => p.rk_tolerance = line.number()?,
            "snapshot_times" => s.snapshot_times = line.numbers()?,
            "snapshot_points" => s.snapshot_points = line.count()?,
            "sigma_sweep" => s.sigma_sweep = line.numbers()?,
            "detuning_sweep" => s.detuning_sweep = line.numbers()?,
            "output_dir" => {
                if line.value.is_empty() {
                    return Err(line.err("empty path"));
                }
                s.output_dir = PathBuf::from(line.value);
            }
            _ => unreachable!("key table and match agree"),
        }
    }
    Ok(s)
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", ")
}

impl Scenario {
    /// Every key in table order, SI units, shortest round-tripping numbers.
    pub fn canonical(&self) -> String {
        let p = &self.physics;
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("mass", format!("{:e} kg", p.mass));
        put("velocity", format!("{:e} m/s", p.velocity));
        put("length", format!("{:e} m", p.length));
        put("rabi_n", p.rabi_n.to_string());
        put("rabi", p.rabi_override.map_or_else(|| "auto".to_string(), |r| format!("{r:e} rad/s")));
        put("detuning", format!("{:e} rad/s", p.detuning));
        put("phase", format!("{:e} rad", p.phase));
        put("sigma0", format!("{:e} m", p.sigma0));
        put("x0", format!("{:e} m", p.x0));
        put("n_nodes", p.n_nodes.to_string());
        put("span", format!("{:e}", p.span));
        put("t_end", format!("{:e} s", p.t_end));
        put("n_steps", p.n_steps.to_string());
        put("trajectory_t_end", format!("{:e} s", p.trajectory_t_end));
        put("n_trajectories", p.n_trajectories.to_string());
        put("rk_tolerance", format!("{:e}", p.rk_tolerance));
        put("snapshot_times", format!("{} s", list(&self.snapshot_times)));
        put("snapshot_points", self.snapshot_points.to_string());
        put("sigma_sweep", format!("{} m", list(&self.sigma_sweep)));
        put("detuning_sweep", format!("{} rad/s", list(&self.detuning_sweep)));
        put("output_dir", self.output_dir.display().to_string());
        out
    }
}
