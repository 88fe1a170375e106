//! Harness configuration: plain key=value files with flag overrides.

use std::path::PathBuf;

use crate::levelset::catalog;
use crate::{Error, Result};

pub const PRESETS: [&str; 6] = [
    "example1",
    "example3",
    "example4",
    "quadratic",
    "quadratic_oracle",
    "molecule",
];

/// Settings shared by all harness commands. Unused keys are harmless: a
/// convergence run ignores the evolution knobs and vice versa.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub preset: String,
    /// Catalog surface name; ignored by the molecule preset.
    pub surface: String,
    /// Radius used when the surface is `sphere`.
    pub sphere_radius: f64,
    /// Grid sweep; a single entry means one solve.
    pub ns: Vec<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub output_dir: PathBuf,
    /// Rayon worker count; 0 keeps the library default.
    pub threads: usize,
    /// 0 quiet, 1 per-run lines, 2 adds per-step detail.
    pub verbosity: u8,
    pub t_final: f64,
    pub cfl: f64,
    /// Reinitialize the level set every this many steps; 0 disables.
    pub reinit_every: usize,
    pub pqr: Option<PathBuf>,
    /// Surface level c of the molecular sum-of-Gaussians field.
    pub molecule_c: f64,
    /// Gaussian decay rate eta.
    pub molecule_eta: f64,
    /// Fraction of the box half-width kept clear around the molecule.
    pub molecule_margin: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: "example1".into(),
            surface: "ellipsoid".into(),
            sphere_radius: 0.5,
            ns: vec![20, 30, 40],
            tol: 1e-9,
            max_iter: 10_000,
            output_dir: PathBuf::from("out"),
            threads: 0,
            verbosity: 1,
            t_final: 0.1,
            cfl: 0.5,
            reinit_every: 0,
            pqr: None,
            molecule_c: 0.25,
            molecule_eta: 0.025,
            molecule_margin: 0.2,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for {key}: `{value}`")))
}

impl RunConfig {
    /// Applies one key=value assignment. Later assignments win, so file
    /// entries can be overridden by command-line flags applied afterwards.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => self.preset = value.trim().to_string(),
            "surface" => self.surface = value.trim().to_string(),
            "sphere_radius" => self.sphere_radius = parse_num(key, value)?,
            "n" => self.ns = vec![parse_num(key, value)?],
            "ns" => {
                let mut ns = Vec::new();
                for part in value.split(',') {
                    ns.push(parse_num("ns", part)?);
                }
                self.ns = ns;
            }
            "tol" => self.tol = parse_num(key, value)?,
            "max_iter" => self.max_iter = parse_num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "threads" => self.threads = parse_num(key, value)?,
            "verbosity" => self.verbosity = parse_num(key, value)?,
            "t_final" => self.t_final = parse_num(key, value)?,
            "cfl" => self.cfl = parse_num(key, value)?,
            "reinit_every" => self.reinit_every = parse_num(key, value)?,
            "pqr" => self.pqr = Some(PathBuf::from(value.trim())),
            "molecule_c" => self.molecule_c = parse_num(key, value)?,
            "molecule_eta" => self.molecule_eta = parse_num(key, value)?,
            "molecule_margin" => self.molecule_margin = parse_num(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown configuration key `{other}`")));
            }
        }
        Ok(())
    }

    /// Parses key=value lines; `#` starts a comment, blank lines are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got `{line}`",
                    lineno + 1
                )));
            };
            self.apply(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !PRESETS.contains(&self.preset.as_str()) {
            return Err(Error::Config(format!(
                "unknown preset `{}`; expected one of {}",
                self.preset,
                PRESETS.join(", ")
            )));
        }
        if self.ns.is_empty() {
            return Err(Error::Config("grid sweep is empty".into()));
        }
        for n in &self.ns {
            if *n < 2 {
                return Err(Error::Config(format!("grid resolution {n} is too small")));
            }
        }
        if !self.ns.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(format!(
                "grid sweep must be strictly increasing, got {:?}",
                self.ns
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!(
                "solver tolerance must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Config(format!(
                "CFL number must lie in (0, 0.5], got {}",
                self.cfl
            )));
        }
        if self.preset == "molecule" {
            if self.pqr.is_none() {
                return Err(Error::Config(
                    "molecule preset needs a pqr=<path> entry".into(),
                ));
            }
            if !(self.molecule_c > 0.0) || !(self.molecule_eta > 0.0) {
                return Err(Error::Config(
                    "molecule surface level and decay rate must be positive".into(),
                ));
            }
            if !(self.molecule_margin > 0.0 && self.molecule_margin < 1.0) {
                return Err(Error::Config(format!(
                    "molecule margin must lie in (0, 1), got {}",
                    self.molecule_margin
                )));
            }
        } else {
            // Fails early on unknown catalog names.
            catalog::by_name(&self.surface, self.sphere_radius)?;
        }
        Ok(())
    }
}
