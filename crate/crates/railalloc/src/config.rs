//! Experiment configuration.
//!
//! The file is line oriented: `[section]` headers followed by `key = value`
//! lines. `#` starts a comment. Lists are comma separated. Every key is
//! optional; missing keys keep their defaults.
//!
//! ```text
//! [layout]
//! area_side = 500
//! relays = 9
//! users = 200
//!
//! [radio]
//! beta = 1e-7
//!
//! [sweep]
//! bandwidths_mhz = 1000, 1100, 1200
//! seeds = 5
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use railalloc_core::allocators::{BarrierOptions, Method};
use railalloc_core::{RadioParams, RadioSettings, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutConfig {
    pub area_side: f64,
    pub relays: usize,
    pub users: usize,
    pub bs_offset: f64,
    pub rail_offset: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            area_side: 500.0,
            relays: 9,
            users: 200,
            bs_offset: 50.0,
            rail_offset: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub bandwidths_mhz: Vec<f64>,
    /// Fixed bandwidth for the beta sweep and the solver comparison.
    pub bandwidth_mhz: f64,
    pub betas: Vec<f64>,
    pub methods: Vec<Method>,
    pub compare_methods: Vec<Method>,
    pub master_seed: u64,
    pub seeds: usize,
    pub groups: usize,
    pub certify_instances: usize,
    pub certify_devices: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            bandwidths_mhz: (0..10).map(|k| 1000.0 + 100.0 * k as f64).collect(),
            bandwidth_mhz: 1200.0,
            betas: vec![
                1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3,
            ],
            methods: vec![Method::Sqp, Method::Pnou, Method::Pd],
            compare_methods: vec![Method::Sqp, Method::Ip],
            master_seed: 1,
            seeds: 1,
            groups: 10,
            certify_instances: 50,
            certify_devices: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub sqp: SolverConfig,
    /// Barrier gap tolerance, bit/s.
    pub ip_tol: f64,
    pub dual_tol: f64,
    pub grid_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            sqp: SolverConfig::default(),
            ip_tol: BarrierOptions::default().tol,
            dual_tol: 1e-13,
            grid_step: 1e-3,
        }
    }
}

impl SolverSettings {
    pub fn barrier(&self) -> BarrierOptions {
        BarrierOptions {
            tol: self.ip_tol,
            ..BarrierOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub layout: LayoutConfig,
    pub radio: RadioSettings,
    pub solver: SolverSettings,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        text.parse()
    }

    pub fn radio_params(&self) -> Result<RadioParams, ConfigError> {
        RadioParams::new(&self.radio).map_err(|e| ConfigError {
            line: 0,
            message: format!("radio: {e}"),
        })
    }

    /// Scenario seeds derived from the master seed.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.sweep.seeds as u64)
            .map(|k| railalloc_core::geometry::derive_seed(self.sweep.master_seed, k))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |message: &str| {
            Err(ConfigError {
                line: 0,
                message: message.to_string(),
            })
        };
        let l = &self.layout;
        if !(l.area_side.is_finite() && l.area_side > 0.0) {
            return err("layout.area_side must be positive");
        }
        if l.relays == 0 || l.users == 0 {
            return err("layout.relays and layout.users must be at least 1");
        }
        for (name, v) in [("bs_offset", l.bs_offset), ("rail_offset", l.rail_offset)] {
            if !(v >= 0.0 && v < l.area_side / 2.0) {
                return Err(ConfigError {
                    line: 0,
                    message: format!("layout.{name} must lie in [0, area_side / 2)"),
                });
            }
        }
        self.radio_params()?;
        self.solver.sqp.validate().map_err(|e| ConfigError {
            line: 0,
            message: format!("solver: {e}"),
        })?;
        if !(self.solver.ip_tol > 0.0 && self.solver.dual_tol > 0.0) {
            return err("solver.ip_tol and solver.dual_tol must be positive");
        }
        if !(1e-3..=1.0).contains(&self.solver.grid_step) {
            return err("solver.grid_step must lie in [1e-3, 1]");
        }
        let s = &self.sweep;
        if s.bandwidths_mhz.is_empty() || s.betas.is_empty() {
            return err("sweep.bandwidths_mhz and sweep.betas must be nonempty");
        }
        if s.bandwidths_mhz
            .iter()
            .chain([&s.bandwidth_mhz])
            .any(|w| !(*w > 0.0 && w.is_finite()))
        {
            return err("bandwidths must be positive");
        }
        if s.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return err("betas must be non-negative");
        }
        if s.methods.is_empty() {
            return err("sweep.methods must be nonempty");
        }
        if s.compare_methods.len() < 2 {
            return err("sweep.compare_methods needs at least two methods");
        }
        if s.seeds == 0 || s.groups == 0 || s.certify_instances == 0 {
            return err("sweep.seeds, sweep.groups and sweep.certify_instances must be at least 1");
        }
        if !(2..=4).contains(&s.certify_devices) {
            return err("sweep.certify_devices must lie in [2, 4]");
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError {
        line,
        message: format!("invalid value {v:?} for key {key}"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

fn parse_methods(line: usize, key: &str, v: &str) -> Result<Vec<Method>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            Method::parse(s).ok_or_else(|| ConfigError {
                line,
                message: format!("unknown method {s:?} for key {key}"),
            })
        })
        .collect()
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let n = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(name, "layout" | "radio" | "solver" | "sweep") {
                    return Err(ConfigError {
                        line: n,
                        message: format!("unknown section [{name}]"),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError {
                line: n,
                message: format!("expected `key = value`, found {line:?}"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            let l = &mut cfg.layout;
            let r = &mut cfg.radio;
            let s = &mut cfg.solver;
            let w = &mut cfg.sweep;
            match (section.as_str(), key) {
                ("layout", "area_side") => l.area_side = parse_value(n, key, v)?,
                ("layout", "relays") => l.relays = parse_value(n, key, v)?,
                ("layout", "users") => l.users = parse_value(n, key, v)?,
                ("layout", "bs_offset") => l.bs_offset = parse_value(n, key, v)?,
                ("layout", "rail_offset") => l.rail_offset = parse_value(n, key, v)?,
                ("radio", "carrier_ghz") => r.carrier_hz = parse_value::<f64>(n, key, v)? * 1e9,
                ("radio", "pt_mw") => r.pt_mw = parse_value(n, key, v)?,
                ("radio", "path_loss_exp") => r.path_loss_exp = parse_value(n, key, v)?,
                ("radio", "eta") => r.eta = parse_value(n, key, v)?,
                ("radio", "n0_dbm_per_mhz") => r.n0_dbm_per_mhz = parse_value(n, key, v)?,
                ("radio", "theta_3db_deg") => r.theta_3db_deg = parse_value(n, key, v)?,
                ("radio", "beta") => r.beta = parse_value(n, key, v)?,
                ("radio", "p_b") => r.p_b = parse_value(n, key, v)?,
                ("solver", "sigma") => s.sqp.sigma = parse_value(n, key, v)?,
                ("solver", "sigma_kkt") => s.sqp.sigma_kkt = parse_value(n, key, v)?,
                ("solver", "eps1") => s.sqp.eps1 = parse_value(n, key, v)?,
                ("solver", "eps2") => s.sqp.eps2 = parse_value(n, key, v)?,
                ("solver", "max_iters") => s.sqp.max_iters = parse_value(n, key, v)?,
                ("solver", "alpha_floor") => s.sqp.alpha_floor = parse_value(n, key, v)?,
                ("solver", "ip_tol") => s.ip_tol = parse_value(n, key, v)?,
                ("solver", "dual_tol") => s.dual_tol = parse_value(n, key, v)?,
                ("solver", "grid_step") => s.grid_step = parse_value(n, key, v)?,
                ("sweep", "bandwidths_mhz") => w.bandwidths_mhz = parse_list(n, key, v)?,
                ("sweep", "bandwidth_mhz") => w.bandwidth_mhz = parse_value(n, key, v)?,
                ("sweep", "betas") => w.betas = parse_list(n, key, v)?,
                ("sweep", "methods") => w.methods = parse_methods(n, key, v)?,
                ("sweep", "compare_methods") => w.compare_methods = parse_methods(n, key, v)?,
                ("sweep", "seed") => w.master_seed = parse_value(n, key, v)?,
                ("sweep", "seeds") => w.seeds = parse_value(n, key, v)?,
                ("sweep", "groups") => w.groups = parse_value(n, key, v)?,
                ("sweep", "certify_instances") => w.certify_instances = parse_value(n, key, v)?,
                ("sweep", "certify_devices") => w.certify_devices = parse_value(n, key, v)?,
                ("", _) => {
                    return Err(ConfigError {
                        line: n,
                        message: format!("key {key} appears before any section"),
                    })
                }
                (sec, _) => {
                    return Err(ConfigError {
                        line: n,
                        message: format!("unknown key {key} in [{sec}]"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
