//! Flat sectioned key = value run configuration.
//!
//! The canonical serialization is deterministic (fixed section and key
//! order, 17 significant digits for reals), so identical configurations
//! hash identically and reports can embed the hash.

use anyhow::{anyhow, Result};
use nls_core::dynamics::EvolveSettings;
use nls_core::landscape::ProblemParams;
use nls_core::optimizer::SolverSettings;
use nls_core::potential::{build_potential, Peak, PotentialSpec};
use nls_core::Grid;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub m: usize,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
    pub gammas: Vec<f64>,
    pub theta_target: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 10.0, sample_every: 100, gammas: vec![1e-2], theta_target: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ProblemParams,
    pub h_infty: f64,
    pub peaks: Vec<Peak>,
    pub grid: GridConfig,
    pub solver: SolverSettingsConfig,
    pub dynamics: DynamicsConfig,
    pub seed: u64,
    pub out: Option<String>,
}

/// Solver knobs as stored in the file (mirrors the solver defaults).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettingsConfig {
    pub tol_res_factor: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub step_init: f64,
    pub step_max: f64,
    pub region_check_every: usize,
    pub restarts: u32,
}

impl Default for SolverSettingsConfig {
    fn default() -> Self {
        let d = SolverSettings::default();
        Self {
            tol_res_factor: d.tol_res_factor,
            max_iter: d.max_iter,
            armijo_c: d.armijo_c,
            step_init: d.step_init,
            step_max: d.step_max,
            region_check_every: d.region_check_every,
            restarts: d.restarts,
        }
    }
}

impl RunConfig {
    pub fn solver_settings(&self, seed: u64) -> SolverSettings {
        SolverSettings {
            tol_res_factor: self.solver.tol_res_factor,
            max_iter: self.solver.max_iter,
            armijo_c: self.solver.armijo_c,
            step_init: self.solver.step_init,
            step_max: self.solver.step_max,
            step_min: SolverSettings::default().step_min,
            region_check_every: self.solver.region_check_every,
            seed,
            restarts: self.solver.restarts,
        }
    }

    pub fn evolve_settings(&self) -> EvolveSettings {
        EvolveSettings {
            dt: self.dynamics.dt,
            t_final: self.dynamics.t_final,
            sample_every: self.dynamics.sample_every,
        }
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.params.n, self.grid.m, self.grid.l).map_err(|e| anyhow!("grid: {e}"))
    }

    pub fn build_spec(&self) -> Result<PotentialSpec> {
        build_potential(self.params.n, self.h_infty, self.peaks.clone()).map_err(|e| anyhow!("potential: {e}"))
    }

    /// The box must hold every translated starter with its tails: the
    /// farthest maximum lands at |center|/ε and the boundary shell starts at
    /// 0.45·L.
    pub fn validate_box_for_regions(&self, spec: &PotentialSpec) -> Result<()> {
        let reach = spec
            .maxima()
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            / self.params.epsilon;
        let shell = 0.45 * self.grid.l;
        if reach >= shell {
            return Err(anyhow!(
                "box too small: the farthest maximum translates to {reach:.3} but the boundary shell starts at {shell:.3}; increase grid.l or epsilon"
            ));
        }
        Ok(())
    }

    /// Canonical text form; parsing it back reproduces the value exactly.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        s.push_str("[problem]\n");
        s.push_str(&format!("n = {}\n", self.params.n));
        s.push_str(&format!("a = {:.16e}\n", self.params.a));
        s.push_str(&format!("epsilon = {:.16e}\n", self.params.epsilon));
        s.push_str(&format!("eta = {:.16e}\n", self.params.eta));
        s.push_str(&format!("p = {:.16e}\n", self.params.p));
        s.push_str(&format!("q = {:.16e}\n", self.params.q));
        s.push_str("\n[potential]\n");
        s.push_str(&format!("h_infty = {:.16e}\n", self.h_infty));
        for peak in &self.peaks {
            let coords: Vec<String> = peak.center.iter().map(|c| format!("{c:.16e}")).collect();
            s.push_str(&format!(
                "peak = {} {:.16e} {:.16e}\n",
                coords.join(" "),
                peak.amplitude,
                peak.radius
            ));
        }
        s.push_str("\n[grid]\n");
        s.push_str(&format!("m = {}\n", self.grid.m));
        s.push_str(&format!("l = {:.16e}\n", self.grid.l));
        s.push_str("\n[solver]\n");
        s.push_str(&format!("tol_res_factor = {:.16e}\n", self.solver.tol_res_factor));
        s.push_str(&format!("max_iter = {}\n", self.solver.max_iter));
        s.push_str(&format!("armijo_c = {:.16e}\n", self.solver.armijo_c));
        s.push_str(&format!("step_init = {:.16e}\n", self.solver.step_init));
        s.push_str(&format!("step_max = {:.16e}\n", self.solver.step_max));
        s.push_str(&format!("region_check_every = {}\n", self.solver.region_check_every));
        s.push_str(&format!("restarts = {}\n", self.solver.restarts));
        s.push_str("\n[dynamics]\n");
        s.push_str(&format!("dt = {:.16e}\n", self.dynamics.dt));
        s.push_str(&format!("t_final = {:.16e}\n", self.dynamics.t_final));
        s.push_str(&format!("sample_every = {}\n", self.dynamics.sample_every));
        for g in &self.dynamics.gammas {
            s.push_str(&format!("gamma = {g:.16e}\n"));
        }
        s.push_str(&format!("theta_target = {:.16e}\n", self.dynamics.theta_target));
        s.push_str("\n[run]\n");
        s.push_str(&format!("seed = {}\n", self.seed));
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {out}\n"));
        }
        s
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

struct RawConfig {
    problem: std::collections::HashMap<String, (usize, String)>,
    potential: Vec<(usize, String)>,
    h_infty: Option<(usize, String)>,
    grid: std::collections::HashMap<String, (usize, String)>,
    solver: std::collections::HashMap<String, (usize, String)>,
    dynamics: std::collections::HashMap<String, (usize, String)>,
    gammas: Vec<(usize, String)>,
    run: std::collections::HashMap<String, (usize, String)>,
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let err = |line: usize, message: String| ConfigError { line, message };
    let mut raw = RawConfig {
        problem: Default::default(),
        potential: Vec::new(),
        h_infty: None,
        grid: Default::default(),
        solver: Default::default(),
        dynamics: Default::default(),
        gammas: Vec::new(),
        run: Default::default(),
    };
    let mut section = String::new();
    for (i, full_line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = full_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(lineno, format!("unterminated section header {line:?}")))?;
            section = name.trim().to_string();
            match section.as_str() {
                "problem" | "potential" | "grid" | "solver" | "dynamics" | "run" => continue,
                other => return Err(err(lineno, format!("unknown section [{other}]"))),
            }
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(lineno, format!("expected key = value, got {line:?}")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let entry = (lineno, value);
        match (section.as_str(), key.as_str()) {
            ("problem", "n" | "a" | "epsilon" | "eta" | "p" | "q") => {
                raw.problem.insert(key, entry);
            }
            ("potential", "h_infty") => raw.h_infty = Some(entry),
            ("potential", "peak") => raw.potential.push(entry),
            ("grid", "m" | "l") => {
                raw.grid.insert(key, entry);
            }
            (
                "solver",
                "tol_res_factor" | "max_iter" | "armijo_c" | "step_init" | "step_max"
                | "region_check_every" | "restarts",
            ) => {
                raw.solver.insert(key, entry);
            }
            ("dynamics", "gamma") => raw.gammas.push(entry),
            ("dynamics", "dt" | "t_final" | "sample_every" | "theta_target") => {
                raw.dynamics.insert(key, entry);
            }
            ("run", "seed" | "out") => {
                raw.run.insert(key, entry);
            }
            ("", _) => return Err(err(lineno, "key outside any section".into())),
            (s, k) => return Err(err(lineno, format!("unknown key {k:?} in section [{s}]"))),
        }
    }

    fn want_f64(map: &std::collections::HashMap<String, (usize, String)>, key: &str) -> Result<f64, ConfigError> {
        let (line, value) = map
            .get(key)
            .ok_or(ConfigError { line: 0, message: format!("missing required key {key:?}") })?;
        value
            .parse()
            .map_err(|_| ConfigError { line: *line, message: format!("cannot parse {value:?} as a real") })
    }
    fn want_usize(map: &std::collections::HashMap<String, (usize, String)>, key: &str) -> Result<usize, ConfigError> {
        let (line, value) = map
            .get(key)
            .ok_or(ConfigError { line: 0, message: format!("missing required key {key:?}") })?;
        value
            .parse()
            .map_err(|_| ConfigError { line: *line, message: format!("cannot parse {value:?} as an integer") })
    }
    fn opt_f64(
        map: &std::collections::HashMap<String, (usize, String)>,
        key: &str,
        default: f64,
    ) -> Result<f64, ConfigError> {
        match map.get(key) {
            None => Ok(default),
            Some((line, value)) => value
                .parse()
                .map_err(|_| ConfigError { line: *line, message: format!("cannot parse {value:?} as a real") }),
        }
    }
    fn opt_usize(
        map: &std::collections::HashMap<String, (usize, String)>,
        key: &str,
        default: usize,
    ) -> Result<usize, ConfigError> {
        match map.get(key) {
            None => Ok(default),
            Some((line, value)) => value
                .parse()
                .map_err(|_| ConfigError { line: *line, message: format!("cannot parse {value:?} as an integer") }),
        }
    }

    let n = want_usize(&raw.problem, "n")? as u32;
    let params = ProblemParams {
        n,
        a: want_f64(&raw.problem, "a")?,
        epsilon: want_f64(&raw.problem, "epsilon")?,
        eta: want_f64(&raw.problem, "eta")?,
        p: want_f64(&raw.problem, "p")?,
        q: want_f64(&raw.problem, "q")?,
    };
    params
        .validate()
        .map_err(|e| err(0, format!("problem section: {e}")))?;

    let (h_line, h_value) =
        raw.h_infty.ok_or_else(|| err(0, "missing required key \"h_infty\" in [potential]".into()))?;
    let h_infty: f64 = h_value
        .parse()
        .map_err(|_| err(h_line, format!("cannot parse {h_value:?} as a real")))?;
    let mut peaks = Vec::new();
    for (line, body) in &raw.potential {
        let parts: Vec<&str> = body.split_whitespace().collect();
        if parts.len() != n as usize + 2 {
            return Err(err(
                *line,
                format!(
                    "peak needs {} numbers (center…, amplitude, radius), got {}",
                    n as usize + 2,
                    parts.len()
                ),
            ));
        }
        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
        let nums = nums.map_err(|_| err(*line, format!("cannot parse peak entry {body:?}")))?;
        peaks.push(Peak {
            center: nums[..n as usize].to_vec(),
            amplitude: nums[n as usize],
            radius: nums[n as usize + 1],
        });
    }
    if peaks.is_empty() {
        return Err(err(0, "the [potential] section needs at least one peak".into()));
    }

    let grid = GridConfig { m: want_usize(&raw.grid, "m")?, l: want_f64(&raw.grid, "l")? };

    let sd = SolverSettingsConfig::default();
    let solver = SolverSettingsConfig {
        tol_res_factor: opt_f64(&raw.solver, "tol_res_factor", sd.tol_res_factor)?,
        max_iter: opt_usize(&raw.solver, "max_iter", sd.max_iter)?,
        armijo_c: opt_f64(&raw.solver, "armijo_c", sd.armijo_c)?,
        step_init: opt_f64(&raw.solver, "step_init", sd.step_init)?,
        step_max: opt_f64(&raw.solver, "step_max", sd.step_max)?,
        region_check_every: opt_usize(&raw.solver, "region_check_every", sd.region_check_every)?,
        restarts: opt_usize(&raw.solver, "restarts", sd.restarts as usize)? as u32,
    };

    let dd = DynamicsConfig::default();
    let mut gammas = Vec::new();
    for (line, value) in &raw.gammas {
        gammas.push(
            value
                .parse::<f64>()
                .map_err(|_| err(*line, format!("cannot parse {value:?} as a real")))?,
        );
    }
    if gammas.is_empty() {
        gammas = dd.gammas.clone();
    }
    let dynamics = DynamicsConfig {
        dt: opt_f64(&raw.dynamics, "dt", dd.dt)?,
        t_final: opt_f64(&raw.dynamics, "t_final", dd.t_final)?,
        sample_every: opt_usize(&raw.dynamics, "sample_every", dd.sample_every)?,
        gammas,
        theta_target: opt_f64(&raw.dynamics, "theta_target", dd.theta_target)?,
    };

    let seed = opt_usize(&raw.run, "seed", 0)? as u64;
    let out = raw.run.get("out").map(|(_, v)| v.clone());

    Ok(RunConfig { params, h_infty, peaks, grid, solver, dynamics, seed, out })
}

pub fn load(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read config {}: {e}", path.display()))?;
    parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_text() -> &'static str {
        "# desk configuration\n\
         [problem]\n\
         n = 1\n\
         a = 0.5\n\
         epsilon = 0.1\n\
         eta = 1.0\n\
         p = 8.0\n\
         q = 4.0\n\
         \n\
         [potential]\n\
         h_infty = 0.5\n\
         peak = 0.0 0.5 3.0\n\
         peak = 10.0 0.5 3.0\n\
         \n\
         [grid]\n\
         m = 256\n\
         l = 640.0\n\
         \n\
         [run]\n\
         seed = 42\n"
    }

    #[test]
    fn parse_and_canonical_round_trip() {
        let cfg = parse(desk_text()).unwrap();
        assert_eq!(cfg.params.n, 1);
        assert_eq!(cfg.peaks.len(), 2);
        assert_eq!(cfg.seed, 42);
        let canon = cfg.canonical_string();
        let re = parse(&canon).unwrap();
        assert_eq!(re, cfg);
        assert_eq!(re.canonical_string(), canon, "canonical form is a fixed point");
        assert_eq!(re.hash(), cfg.hash());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "[problem]\nn = 1\na = whoops\n";
        let e = parse(bad).unwrap_err();
        assert_eq!(e.line, 3);
        let unknown = "[problem]\nn = 1\nbogus_key = 2\n";
        let e2 = parse(unknown).unwrap_err();
        assert_eq!(e2.line, 3);
        let nosec = "n = 1\n";
        assert_eq!(parse(nosec).unwrap_err().line, 1);
        let badsec = "[problem\nn = 1\n";
        assert_eq!(parse(badsec).unwrap_err().line, 1);
    }

    #[test]
    fn missing_keys_and_invalid_params_reported() {
        let missing = "[problem]\nn = 1\na = 0.5\nepsilon = 0.1\neta = 1.0\np = 8.0\n";
        assert!(parse(missing).is_err());
        // q outside the admissible window.
        let text = desk_text().replace("q = 4.0", "q = 7.0");
        let e = parse(&text).unwrap_err();
        assert!(e.message.contains("problem section"));
    }

    #[test]
    fn peak_arity_checked() {
        let text = desk_text().replace("peak = 0.0 0.5 3.0", "peak = 0.0 0.5");
        let e = parse(&text).unwrap_err();
        assert!(e.message.contains("peak needs 3 numbers"));
    }

    #[test]
    fn box_validation_for_regions() {
        let cfg = parse(desk_text()).unwrap();
        let spec = cfg.build_spec().unwrap();
        assert!(cfg.validate_box_for_regions(&spec).is_ok());
        let mut tight = cfg.clone();
        tight.params.epsilon = 0.01;
        assert!(tight.validate_box_for_regions(&spec).is_err());
    }
}
