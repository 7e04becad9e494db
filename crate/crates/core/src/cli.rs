//! Configuration-driven runs behind the `nehari` binary: `solve`, `check`, `eigen` and `sweep`.
//!
//! Each command reads a JSON [`RunConfig`], writes its outputs into the output
//! directory and maps the outcome to an exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::energy::{EnergyBreakdown, Problem};
use crate::error::{Error, Result};
use crate::mesh::{Field, Mesh, MeshDescriptor};
use crate::nfunction::{NFunction, NFunctionSpec, PhiKind};
use crate::nonlinearity::{Nonlinearity, NonlinearitySpec};
use crate::scalar::Real;
use crate::solver::{estimate_lambda1, solve, Armijo, Initial, Mode, Preconditioner, SolveOptions};
use crate::verify::{run_suite, solve_all_modes, SuiteOptions, ALL_CHECKS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

pub const DEFAULT_OUTPUT_DIR: &str = "nehari-output";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Check,
    Eigen,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    Bump,
    /// Smoothed random field; `seed` defaults to the top-level seed.
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
    /// CSV with a header row whose last column holds nodal values.
    Provided { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real"))]
pub struct SolveConfig<T> {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_tol")]
    pub tol: T,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_initial")]
    pub initial: InitialConfig,
    #[serde(default)]
    pub armijo: Armijo<T>,
    #[serde(default = "default_stride")]
    pub history_stride: usize,
    #[serde(default = "default_tol_sign")]
    pub tol_sign: T,
    #[serde(default)]
    pub preconditioner: Preconditioner,
}

fn default_mode() -> Mode {
    Mode::Ground
}
fn default_tol<T: Real>() -> T {
    T::lit(1e-8)
}
fn default_max_iters() -> usize {
    500
}
fn default_initial() -> InitialConfig {
    InitialConfig::Bump
}
fn default_stride() -> usize {
    1
}
fn default_tol_sign<T: Real>() -> T {
    T::lit(1e-10)
}
fn default_dimension() -> usize {
    3
}

impl<T: Real> Default for SolveConfig<T> {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            tol: default_tol(),
            max_iters: default_max_iters(),
            initial: default_initial(),
            armijo: Armijo::default(),
            history_stride: default_stride(),
            tol_sign: default_tol_sign(),
            preconditioner: Preconditioner::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Random fields for the fibering scan and the Poincaré check.
    pub fields: usize,
    /// Random fields for the Nehari norm floor.
    pub floor_samples: usize,
    /// Random points for the growth and Young inequalities.
    pub grid_samples: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { fields: 100, floor_samples: 100, grid_samples: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Dotted path into the configuration, e.g. `"f.q"` or `"phi.gamma"`.
    pub parameter: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real"))]
pub struct RunConfig<T> {
    pub phi: PhiKind<T>,
    #[serde(default = "default_dimension")]
    pub ambient_dimension: usize,
    pub f: NonlinearitySpec<T>,
    pub domain: MeshDescriptor<T>,
    #[serde(default)]
    pub solve: SolveConfig<T>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Subset of check ids to run; all checks when absent.
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    #[serde(default)]
    pub samples: SampleConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl<T: Real> RunConfig<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl<T: Real> RunConfig<T> {
    pub fn phi(&self) -> Result<NFunction<T>> {
        NFunction::new(NFunctionSpec { kind: self.phi.clone(), ambient_dimension: self.ambient_dimension })
    }

    pub fn problem(&self) -> Result<Problem<T>> {
        Problem::new(self.phi()?, Nonlinearity::new(self.f.clone(), self.ambient_dimension)?, Mesh::new(self.domain.clone())?)
    }

    pub fn solve_options(&self, mesh: &Mesh<T>) -> Result<SolveOptions<T>> {
        let s = &self.solve;
        let initial = match &s.initial {
            InitialConfig::Bump => Initial::Bump,
            InitialConfig::Random { seed } => Initial::Random(seed.unwrap_or(self.seed)),
            InitialConfig::Provided { path } => Initial::Provided(read_field_csv(path, mesh)?),
        };
        let opts = SolveOptions {
            mode: s.mode,
            tol: s.tol,
            max_iters: s.max_iters,
            initial,
            armijo: s.armijo,
            history_stride: s.history_stride,
            tol_sign: s.tol_sign,
            preconditioner: s.preconditioner,
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn suite_options(&self, mesh: &Mesh<T>) -> Result<SuiteOptions<T>> {
        if let Some(ids) = &self.checks {
            if let Some(bad) = ids.iter().find(|id| !ALL_CHECKS.contains(&id.as_str())) {
                return Err(Error::Config(format!("unknown check id {bad:?}; known ids: {}", ALL_CHECKS.join(", "))));
            }
        }
        Ok(SuiteOptions {
            fields: self.samples.fields,
            floor_samples: self.samples.floor_samples,
            grid_samples: self.samples.grid_samples,
            seed: self.seed,
            checks: self.checks.clone(),
            solve: self.solve_options(mesh)?,
        })
    }
}

/// Reads nodal values from the last column of a CSV with a header row.
pub fn read_field_csv<T: Real>(path: &Path, mesh: &Mesh<T>) -> Result<Field<T>> {
    let text = fs::read_to_string(path)?;
    let values = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cell = line.rsplit(',').next().unwrap_or("").trim();
            cell.parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::Config(format!("{}: row {} is not numeric: {line:?}", path.display(), i + 2)))
        })
        .collect::<Result<Vec<T>>>()?;
    mesh.check_len(values.len())?;
    Field::from_values(mesh, values)
}

fn float<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

/// CSV of vertex coordinates and nodal values, 17 significant digits.
pub fn field_csv<T: Real>(mesh: &Mesh<T>, u: &Field<T>) -> String {
    let mut out = String::from(if mesh.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
    for (p, v) in mesh.vertices().iter().zip(u.values()) {
        if mesh.dim() == 1 {
            let _ = writeln!(out, "{},{}", float(p[0]), float(*v));
        } else {
            let _ = writeln!(out, "{},{},{}", float(p[0]), float(p[1]), float(*v));
        }
    }
    out
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn num<T: Real>(x: T) -> Value {
    let f = x.to_f64_lossy();
    if f.is_finite() {
        json!(f)
    } else {
        Value::Null
    }
}

fn energy_json<T: Real>(e: &EnergyBreakdown<T>) -> Value {
    json!({"dirichlet": num(e.dirichlet), "reaction": num(e.reaction), "total": num(e.total)})
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        Ok(())
    }
}

enum Failure {
    Config(Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn config_stage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Config)
}

/// Runs `command` on the configuration at `config_path`; `output_dir` overrides the configured directory.
/// Diagnostics go to standard error. Returns the process exit code.
pub fn run(command: Command, config_path: &Path, output_dir: Option<&Path>) -> i32 {
    let outcome = (|| -> std::result::Result<i32, Failure> {
        let text = config_stage(fs::read_to_string(config_path).map_err(Error::from))?;
        match command {
            Command::Sweep => run_sweep(&text, output_dir),
            _ => {
                let cfg: RunConfig<f64> = config_stage(RunConfig::from_json(&text))?;
                let dir = output_dir
                    .map(Path::to_path_buf)
                    .or_else(|| cfg.output_dir.clone())
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
                match command {
                    Command::Solve => run_solve(&cfg, dir),
                    Command::Check => run_check(&cfg, dir),
                    Command::Eigen => run_eigen(&cfg, dir),
                    Command::Sweep => unreachable!(),
                }
            }
        }
    })();
    match outcome {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_NOT_CONVERGED
        }
    }
}

fn run_solve<T: Real>(cfg: &RunConfig<T>, dir: PathBuf) -> std::result::Result<i32, Failure> {
    let problem = config_stage(cfg.problem())?;
    let opts = config_stage(cfg.solve_options(problem.mesh()))?;
    if opts.mode == Mode::Eigen {
        return run_eigen(cfg, dir);
    }
    let res = solve(&problem, &opts)?;
    let mut eigen_opts = opts.clone();
    eigen_opts.mode = Mode::Eigen;
    eigen_opts.initial = Initial::Bump;
    let lambda1 = match estimate_lambda1(problem.phi(), problem.mesh(), &eigen_opts) {
        Ok(e) => num(e.lambda1),
        Err(e) => {
            eprintln!("warning: eigenvalue estimate failed: {e}");
            Value::Null
        }
    };
    let summary = json!({
        "mode": res.mode.name(),
        "level": num(res.level),
        "energy": energy_json(&res.energy),
        "residual": num(res.residual_norm),
        "iterations": res.iterations,
        "converged": res.converged,
        "lambda1": lambda1,
        "nodal_domains": res.nodal_domains,
        "stop_reason": res.stop_reason,
    });
    let out = Outputs::new(dir)?;
    out.write("solution.csv", &field_csv(problem.mesh(), &res.field))?;
    out.write("summary.json", &json_text(&summary))?;
    if res.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("solver did not converge: {}", res.stop_reason);
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn run_eigen<T: Real>(cfg: &RunConfig<T>, dir: PathBuf) -> std::result::Result<i32, Failure> {
    let phi = config_stage(cfg.phi())?;
    let mesh = config_stage(Mesh::new(cfg.domain.clone()))?;
    let mut opts = config_stage(cfg.solve_options(&mesh))?;
    opts.mode = Mode::Eigen;
    let res = estimate_lambda1(&phi, &mesh, &opts)?;
    let report = json!({
        "lambda1": num(res.lambda1),
        "converged": res.converged,
        "residual": num(res.residual_norm),
        "iterations": res.iterations,
        "stop_reason": res.stop_reason,
    });
    let out = Outputs::new(dir)?;
    out.write("eigenfield.csv", &field_csv(&mesh, &res.field))?;
    out.write("eigen.json", &json_text(&report))?;
    Ok(if res.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_check<T: Real>(cfg: &RunConfig<T>, dir: PathBuf) -> std::result::Result<i32, Failure> {
    let problem = config_stage(cfg.problem())?;
    let suite = config_stage(cfg.suite_options(problem.mesh()))?;
    let reports = run_suite(&problem, &suite)?;
    let out = Outputs::new(dir)?;
    out.write("checks.json", &json_text(&serde_json::to_value(&reports).map_err(Error::from)?))?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.check_id.as_str()).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}

/// Replaces the value at a dotted path, failing if any segment is missing.
fn substitute(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    for key in path.split('.') {
        cur = cur
            .get_mut(key)
            .ok_or_else(|| Error::Config(format!("sweep parameter {path:?} does not exist in the configuration")))?;
    }
    *cur = value;
    Ok(())
}

pub const SWEEP_HEADER: &str = "parameter,c_ground,c_plus,c_minus,c_nodal,lambda1,\
residual_ground,residual_plus,residual_minus,residual_nodal";

fn sweep_row(cfg: &RunConfig<f64>) -> Result<[f64; 9]> {
    let problem = cfg.problem()?;
    let opts = cfg.solve_options(problem.mesh())?;
    let [g, p, m, n] = solve_all_modes(&problem, &opts)?;
    if let Some(r) = [&g, &p, &m, &n].into_iter().find(|r| !r.converged) {
        return Err(Error::Precondition(format!("{} solve did not converge: {}", r.mode.name(), r.stop_reason)));
    }
    let mut eigen_opts = opts.clone();
    eigen_opts.mode = Mode::Eigen;
    eigen_opts.initial = Initial::Bump;
    let e = estimate_lambda1(problem.phi(), problem.mesh(), &eigen_opts)?;
    Ok([
        g.level,
        p.level,
        m.level,
        n.level,
        e.lambda1,
        g.residual_norm,
        p.residual_norm,
        m.residual_norm,
        n.residual_norm,
    ])
}

fn run_sweep(text: &str, output_dir: Option<&Path>) -> std::result::Result<i32, Failure> {
    let base: Value = config_stage(serde_json::from_str(text).map_err(Error::from))?;
    let cfg: RunConfig<f64> = config_stage(serde_json::from_value(base.clone()).map_err(Error::from))?;
    let sweep = config_stage(cfg.sweep.clone().ok_or_else(|| Error::Config("sweep requires a \"sweep\" section".into())))?;
    if sweep.values.is_empty() {
        return Err(Failure::Config(Error::Config("sweep value list is empty".into())));
    }
    let mut configs = Vec::with_capacity(sweep.values.len());
    for value in &sweep.values {
        let mut doc = base.clone();
        config_stage(substitute(&mut doc, &sweep.parameter, value.clone()))?;
        configs.push(config_stage(serde_json::from_value::<RunConfig<f64>>(doc).map_err(Error::from))?);
    }
    let dir = output_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    let rows: Vec<Result<[f64; 9]>> = configs.par_iter().map(sweep_row).collect();
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut succeeded = 0;
    for (value, row) in sweep.values.iter().zip(&rows) {
        let cells = match row {
            Ok(r) => {
                succeeded += 1;
                *r
            }
            Err(e) => {
                eprintln!("sweep {}={value}: {e}", sweep.parameter);
                [f64::NAN; 9]
            }
        };
        let _ = write!(csv, "{value}");
        for c in cells {
            let _ = write!(csv, ",{}", if c.is_nan() { "NaN".to_string() } else { float(c) });
        }
        csv.push('\n');
    }
    let out = Outputs::new(dir)?;
    out.write("sweep.csv", &csv)?;
    Ok(if succeeded > 0 { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"{
        "phi": {"kind": "power", "p": 2.0},
        "f": {"kind": "power", "q": 4.0},
        "domain": {"kind": "interval", "a": 0.0, "b": 1.0, "n": 64}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg: RunConfig<f64> = RunConfig::from_json(MODEL).unwrap();
        assert_eq!(cfg.ambient_dimension, 3);
        assert_eq!(cfg.solve.mode, Mode::Ground);
        assert_eq!(cfg.solve.max_iters, 500);
        assert_eq!(cfg.samples.fields, 100);
        assert!(cfg.problem().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: Value = serde_json::from_str(MODEL).unwrap();
        v["colour"] = json!("blue");
        assert!(RunConfig::<f64>::from_json(&v.to_string()).is_err());
        let mut v: Value = serde_json::from_str(MODEL).unwrap();
        v["solve"] = json!({"tolerance": 1e-6});
        assert!(RunConfig::<f64>::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn substitution_follows_dotted_paths() {
        let mut v: Value = serde_json::from_str(MODEL).unwrap();
        substitute(&mut v, "f.q", json!(5.0)).unwrap();
        assert_eq!(v["f"]["q"], json!(5.0));
        assert!(substitute(&mut v, "f.r", json!(1.0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let cfg: RunConfig<f64> = RunConfig::from_json(MODEL).unwrap();
        let mesh = Mesh::new(cfg.domain.clone()).unwrap();
        let u = Field::from_fn(&mesh, |x, _| x * (1.0 - x) * (1.0 + x));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        fs::write(&path, field_csv(&mesh, &u)).unwrap();
        let back = read_field_csv(&path, &mesh).unwrap();
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn unknown_check_id_is_a_config_error() {
        let mut cfg: RunConfig<f64> = RunConfig::from_json(MODEL).unwrap();
        cfg.checks = Some(vec!["no_such_check".into()]);
        let mesh = Mesh::new(cfg.domain.clone()).unwrap();
        assert!(matches!(cfg.suite_options(&mesh), Err(Error::Config(_))));
    }
}
