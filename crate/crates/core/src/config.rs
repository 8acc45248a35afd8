//! Tolerances, sample counts and caps shared by every check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Activity threshold for `|g_i| <= tol` and `|G_i| <= tol`.
    pub tol_act: f64,
    pub tol_kkt: f64,
    /// Smallest admissible singular value of active constraint gradients.
    pub tol_licq: f64,
    pub tol_sc: f64,
    /// Definiteness margin for second-order tests.
    pub tol_pd: f64,
    pub tol_mfcq: f64,
    pub tol_newton: f64,
    pub max_iter: usize,
    pub lower_cone_samples: usize,
    pub upper_cone_samples: usize,
    /// Grid points per free index when sampling the Clarke box.
    pub clarke_resolution: usize,
    pub beta_cap: usize,
    /// Largest `n1 + |I|` for which multiplier vertices are enumerated.
    pub vertex_cap: usize,
    pub fd_step_gradient: f64,
    pub fd_step_hessian: f64,
    /// Condition number above which sensitivity matrices get a warning.
    pub condition_warning: f64,
    pub seed: u64,
    /// Run the grid check of the local minimax definition after certification.
    pub oracle: bool,
    pub oracle_radius: f64,
    pub oracle_step: f64,
    pub oracle_eta: f64,
    pub oracle_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            tol_act: 1e-8,
            tol_kkt: 1e-8,
            tol_licq: 1e-8,
            tol_sc: 1e-8,
            tol_pd: 1e-8,
            tol_mfcq: 1e-8,
            tol_newton: 1e-10,
            max_iter: 30,
            lower_cone_samples: 256,
            upper_cone_samples: 128,
            clarke_resolution: 5,
            beta_cap: 16,
            vertex_cap: 12,
            fd_step_gradient: 1e-5,
            fd_step_hessian: 1e-4,
            condition_warning: 1e12,
            seed: 0x5eed,
            oracle: false,
            oracle_radius: 0.1,
            oracle_step: 1e-3,
            oracle_eta: 2.0,
            oracle_tol: 1e-9,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` expects a number, got `{value}`")))
}

impl CheckConfig {
    /// Set one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "tol_act" => self.tol_act = parse_num(key, v)?,
            "tol_kkt" => self.tol_kkt = parse_num(key, v)?,
            "tol_licq" => self.tol_licq = parse_num(key, v)?,
            "tol_sc" => self.tol_sc = parse_num(key, v)?,
            "tol_pd" => self.tol_pd = parse_num(key, v)?,
            "tol_mfcq" => self.tol_mfcq = parse_num(key, v)?,
            "tol_newton" => self.tol_newton = parse_num(key, v)?,
            "max_iter" => self.max_iter = parse_num(key, v)?,
            "lower_cone_samples" => self.lower_cone_samples = parse_num(key, v)?,
            "upper_cone_samples" => self.upper_cone_samples = parse_num(key, v)?,
            "clarke_resolution" => self.clarke_resolution = parse_num(key, v)?,
            "beta_cap" => self.beta_cap = parse_num(key, v)?,
            "vertex_cap" => self.vertex_cap = parse_num(key, v)?,
            "fd_step_gradient" => self.fd_step_gradient = parse_num(key, v)?,
            "fd_step_hessian" => self.fd_step_hessian = parse_num(key, v)?,
            "condition_warning" => self.condition_warning = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "oracle" => {
                self.oracle = match v {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::Config(format!("`oracle` expects true or false, got `{v}`"))),
                }
            }
            "oracle_radius" => self.oracle_radius = parse_num(key, v)?,
            "oracle_step" => self.oracle_step = parse_num(key, v)?,
            "oracle_eta" => self.oracle_eta = parse_num(key, v)?,
            "oracle_tol" => self.oracle_tol = parse_num(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines (blank lines and `#` comments ignored), then validate.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", no + 1, e)))?;
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = CheckConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("tol_act", self.tol_act),
            ("tol_kkt", self.tol_kkt),
            ("tol_licq", self.tol_licq),
            ("tol_sc", self.tol_sc),
            ("tol_pd", self.tol_pd),
            ("tol_mfcq", self.tol_mfcq),
            ("tol_newton", self.tol_newton),
            ("fd_step_gradient", self.fd_step_gradient),
            ("fd_step_hessian", self.fd_step_hessian),
            ("condition_warning", self.condition_warning),
            ("oracle_radius", self.oracle_radius),
            ("oracle_step", self.oracle_step),
            ("oracle_eta", self.oracle_eta),
            ("oracle_tol", self.oracle_tol),
        ];
        for (name, v) in tols {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("`{name}` must be positive and finite, got {v}")));
            }
        }
        let caps = [
            ("max_iter", self.max_iter),
            ("lower_cone_samples", self.lower_cone_samples),
            ("upper_cone_samples", self.upper_cone_samples),
            ("beta_cap", self.beta_cap),
            ("vertex_cap", self.vertex_cap),
        ];
        for (name, v) in caps {
            if v < 1 {
                return Err(Error::Config(format!("`{name}` must be at least 1")));
            }
        }
        if self.clarke_resolution < 2 {
            return Err(Error::Config("`clarke_resolution` must be at least 2".into()));
        }
        if self.beta_cap > 30 {
            return Err(Error::Config("`beta_cap` above 30 is not supported".into()));
        }
        Ok(())
    }
}
