//! Flat `key=value` run configuration.
//!
//! ```text
//! # Allen-Cahn convergence study, k = 1
//! problem=allen_cahn
//! mesh=square:8
//! k=1
//! scheme=crank_nicolson
//! dt=h^2
//! T=1
//! ```
//!
//! Required keys: `problem`, `mesh`, `k`, `dt`, `T`. Everything else has a
//! default; see [`RunConfig::render`] for the full key set. `mesh` is either
//! `square:N` or a path to a mesh file, `dt` a number, `h` or `h^2` (with `h`
//! the mesh parameter `h_max / sqrt(2)`).

use std::fmt;
use std::path::PathBuf;

use crate::analysis::{mesh_parameter, ConvergenceSettings, DtRule};
use crate::felib::MAX_DEGREE;
use crate::mesh::Mesh;
use crate::problems::{by_name, PROBLEM_NAMES};
use crate::solver::{InitialGuess, LinearSolver, Scheme, SolverConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Syntax { line: usize, text: String },
    UnknownKey { line: usize, key: String },
    DuplicateKey { line: usize, key: String },
    InvalidValue { line: usize, key: String, message: String },
    MissingKey(&'static str),
    Inconsistent { key: &'static str, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected key=value, found '{text}'"),
            ConfigError::UnknownKey { line, key } => write!(f, "line {line}: unknown key '{key}'"),
            ConfigError::DuplicateKey { line, key } => write!(f, "line {line}: key '{key}' given twice"),
            ConfigError::InvalidValue { line, key, message } => write!(f, "line {line}: invalid value for '{key}': {message}"),
            ConfigError::MissingKey(key) => write!(f, "missing required key '{key}'"),
            ConfigError::Inconsistent { key, message } => write!(f, "invalid '{key}': {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Square(usize),
    File(PathBuf),
}

impl MeshSource {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.strip_prefix("square:") {
            Some(n) => match n.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(MeshSource::Square(n)),
                _ => Err(format!("'{n}' is not a positive integer")),
            },
            None if s.is_empty() => Err("empty mesh source".into()),
            None => Ok(MeshSource::File(PathBuf::from(s))),
        }
    }

    /// Reads or generates the mesh. File errors are returned as I/O errors,
    /// parse errors as mesh errors.
    pub fn load(&self) -> Result<Mesh, MeshLoadError> {
        match self {
            MeshSource::Square(n) => Ok(Mesh::structured_square(*n)?),
            MeshSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| MeshLoadError::Io(path.clone(), e))?;
                Ok(Mesh::parse(&text)?)
            }
        }
    }
}

impl fmt::Display for MeshSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSource::Square(n) => write!(f, "square:{n}"),
            MeshSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MeshLoadError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub mesh: MeshSource,
    pub k: usize,
    pub scheme: Scheme,
    pub dt: DtRule,
    pub final_time: f64,
    pub tau: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub snapshots: Vec<f64>,
    pub output_dir: PathBuf,
    /// Structured-square resolutions for convergence studies.
    pub levels: Vec<usize>,
    pub linear_solver: LinearSolver,
    pub dump_matrices: bool,
}

const KEYS: [&str; 14] = [
    "problem",
    "mesh",
    "k",
    "scheme",
    "dt",
    "T",
    "tau",
    "newton_tol",
    "newton_max_iter",
    "snapshots",
    "output_dir",
    "levels",
    "linear_solver",
    "dump_matrices",
];

fn positive(v: f64) -> Result<f64, String> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not a positive finite number"))
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| item(p.trim())).collect()
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::BackwardEuler => "backward_euler",
        Scheme::CrankNicolson => "crank_nicolson",
    }
}

fn solver_name(s: LinearSolver) -> &'static str {
    match s {
        LinearSolver::Dense => "dense",
        LinearSolver::SparseDirect => "sparse",
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Defaults for everything except the required keys.
    pub fn new(problem: &str, mesh: MeshSource, k: usize, dt: DtRule, final_time: f64) -> Self {
        Self {
            problem: problem.to_string(),
            mesh,
            k,
            scheme: Scheme::BackwardEuler,
            dt,
            final_time,
            tau: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            snapshots: Vec::new(),
            output_dir: PathBuf::from("output"),
            levels: vec![2, 4, 8, 16, 32],
            linear_solver: LinearSolver::SparseDirect,
            dump_matrices: false,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen: Vec<(&str, usize, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: content.to_string() });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if seen.iter().any(|(k, _, _)| *k == key) {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
            }
            seen.push((key, line, value));
        }
        let get = |key: &'static str| seen.iter().find(|(k, _, _)| *k == key).map(|&(_, l, v)| (l, v));
        let require = |key: &'static str| get(key).ok_or(ConfigError::MissingKey(key));
        let invalid = |line: usize, key: &str, message: String| ConfigError::InvalidValue { line, key: key.to_string(), message };

        let (line, problem) = require("problem")?;
        if by_name(problem).is_none() {
            return Err(invalid(line, "problem", format!("unknown problem '{problem}' (known: {})", PROBLEM_NAMES.join(", "))));
        }
        let (line, mesh) = require("mesh")?;
        let mesh = MeshSource::parse(mesh).map_err(|m| invalid(line, "mesh", m))?;
        let (line, k) = require("k")?;
        let k = match k.parse::<usize>() {
            Ok(k) if k <= MAX_DEGREE => k,
            _ => return Err(invalid(line, "k", format!("'{k}' is not a degree in 0..={MAX_DEGREE}"))),
        };
        let (line, dt) = require("dt")?;
        let dt = match dt {
            "h" => DtRule::H,
            "h^2" => DtRule::H2,
            other => DtRule::Fixed(number(other).and_then(positive).map_err(|m| invalid(line, "dt", m))?),
        };
        let (line, t) = require("T")?;
        let final_time = number(t).and_then(positive).map_err(|m| invalid(line, "T", m))?;

        let mut cfg = RunConfig::new(problem, mesh, k, dt, final_time);
        if let Some((line, v)) = get("scheme") {
            cfg.scheme = match v {
                "backward_euler" => Scheme::BackwardEuler,
                "crank_nicolson" => Scheme::CrankNicolson,
                _ => return Err(invalid(line, "scheme", format!("'{v}' is not backward_euler or crank_nicolson"))),
            };
        }
        if let Some((line, v)) = get("tau") {
            cfg.tau = number(v).and_then(positive).map_err(|m| invalid(line, "tau", m))?;
        }
        if let Some((line, v)) = get("newton_tol") {
            cfg.newton_tol = number(v).and_then(positive).map_err(|m| invalid(line, "newton_tol", m))?;
        }
        if let Some((line, v)) = get("newton_max_iter") {
            cfg.newton_max_iter = match v.parse::<usize>() {
                Ok(n) if n >= 1 => n,
                _ => return Err(invalid(line, "newton_max_iter", format!("'{v}' is not a positive integer"))),
            };
        }
        if let Some((line, v)) = get("snapshots") {
            cfg.snapshots = list(v, |s| {
                number(s).and_then(|x| if x.is_finite() && x >= 0.0 { Ok(x) } else { Err(format!("{x} is not a nonnegative time")) })
            })
            .map_err(|m| invalid(line, "snapshots", m))?;
        }
        if let Some((line, v)) = get("output_dir") {
            if v.is_empty() {
                return Err(invalid(line, "output_dir", "empty path".into()));
            }
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some((line, v)) = get("levels") {
            cfg.levels = list(v, |s| match s.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(format!("'{s}' is not a positive integer")),
            })
            .map_err(|m| invalid(line, "levels", m))?;
            if cfg.levels.is_empty() {
                return Err(invalid(line, "levels", "at least one level is required".into()));
            }
        }
        if let Some((line, v)) = get("linear_solver") {
            cfg.linear_solver = match v {
                "dense" => LinearSolver::Dense,
                "sparse" => LinearSolver::SparseDirect,
                _ => return Err(invalid(line, "linear_solver", format!("'{v}' is not dense or sparse"))),
            };
        }
        if let Some((line, v)) = get("dump_matrices") {
            cfg.dump_matrices = match v {
                "true" => true,
                "false" => false,
                _ => return Err(invalid(line, "dump_matrices", format!("'{v}' is not true or false"))),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field checks; [`RunConfig::parse`] runs these too.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(s) = self.snapshots.iter().find(|s| **s > self.final_time) {
            return Err(ConfigError::Inconsistent {
                key: "snapshots",
                message: format!("snapshot time {s} is beyond T = {}", self.final_time),
            });
        }
        Ok(())
    }

    /// Every key, one per line, in a form [`RunConfig::parse`] reads back.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("problem", self.problem.clone());
        kv("mesh", self.mesh.to_string());
        kv("k", self.k.to_string());
        kv("scheme", scheme_name(self.scheme).into());
        kv("dt", self.dt.to_string());
        kv("T", self.final_time.to_string());
        kv("tau", self.tau.to_string());
        kv("newton_tol", self.newton_tol.to_string());
        kv("newton_max_iter", self.newton_max_iter.to_string());
        kv("snapshots", join(&self.snapshots));
        kv("output_dir", self.output_dir.display().to_string());
        kv("levels", join(&self.levels));
        kv("linear_solver", solver_name(self.linear_solver).into());
        kv("dump_matrices", self.dump_matrices.to_string());
        out
    }

    pub fn solver_config(&self, mesh: &Mesh) -> SolverConfig {
        SolverConfig {
            dt: self.dt.dt(mesh_parameter(mesh)),
            final_time: self.final_time,
            scheme: self.scheme,
            tau: self.tau,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            linear_solver: self.linear_solver,
            initial_guess: InitialGuess::PreviousStep,
        }
    }

    pub fn convergence_settings(&self) -> ConvergenceSettings {
        ConvergenceSettings {
            scheme: self.scheme,
            dt_rule: self.dt,
            final_time: self.final_time,
            tau: self.tau,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            linear_solver: self.linear_solver,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "problem=allen_cahn\nmesh=square:4\nk=1\ndt=h^2\nT=1\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg, RunConfig::new("allen_cahn", MeshSource::Square(4), 1, DtRule::H2, 1.0));
        assert_eq!(cfg.newton_max_iter, 25);
        assert_eq!(cfg.scheme, Scheme::BackwardEuler);
    }

    #[test]
    fn comments_and_whitespace() {
        let text = "# header\n problem = heat # trailing\n\nmesh=meshes/disk.mesh\nk=0\ndt=0.01\nT=0.5\nsnapshots=0, 0.25,0.5\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.mesh, MeshSource::File("meshes/disk.mesh".into()));
        assert_eq!(cfg.snapshots, vec![0.0, 0.25, 0.5]);
        assert_eq!(cfg.dt, DtRule::Fixed(0.01));
    }

    #[test]
    fn negative_dt_names_key_and_line() {
        let err = RunConfig::parse("problem=heat\nmesh=square:2\nk=0\ndt=-0.1\nT=1\n").unwrap_err();
        assert_eq!(err, ConfigError::InvalidValue { line: 4, key: "dt".into(), message: "-0.1 is not a positive finite number".into() });
        assert!(err.to_string().contains("'dt'"));
    }

    #[test]
    fn error_kinds() {
        let cases = [
            (format!("{MINIMAL}dtt=3\n"), ConfigError::UnknownKey { line: 6, key: "dtt".into() }),
            (format!("{MINIMAL}k=2\n"), ConfigError::DuplicateKey { line: 6, key: "k".into() }),
            (format!("{MINIMAL}oops\n"), ConfigError::Syntax { line: 6, text: "oops".into() }),
            ("problem=heat\nmesh=square:2\nk=0\nT=1\n".to_string(), ConfigError::MissingKey("dt")),
        ];
        for (text, expect) in cases {
            assert_eq!(RunConfig::parse(&text).unwrap_err(), expect);
        }
        for bad in ["k=7", "scheme=rk4", "mesh=square:0", "problem=navier_stokes", "levels=2,x", "tau=0"] {
            let key = bad.split('=').next().unwrap();
            let text = MINIMAL.lines().filter(|l| !l.starts_with(&format!("{key}="))).collect::<Vec<_>>().join("\n") + "\n" + bad;
            match RunConfig::parse(&text).unwrap_err() {
                ConfigError::InvalidValue { key: k, .. } => assert_eq!(k, key),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn snapshots_beyond_final_time() {
        let err = RunConfig::parse(&format!("{MINIMAL}snapshots=0.5,1.5\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Inconsistent { key: "snapshots", .. }));
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::new("schnakenberg", MeshSource::File("a b/c.mesh".into()), 1, DtRule::Fixed(0.001), 2.0);
        cfg.snapshots = vec![0.0, 0.1 + 0.2, 2.0];
        cfg.scheme = Scheme::CrankNicolson;
        cfg.tau = 0.3;
        cfg.newton_tol = 1e-12;
        cfg.levels = vec![3, 6];
        cfg.linear_solver = LinearSolver::Dense;
        cfg.dump_matrices = true;
        assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
    }
}
