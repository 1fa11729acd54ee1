//! TOML run configuration and the analytic field catalog.
//!
//! ```toml
//! [mesh]
//! nx = 16
//! ny = 16
//! gamma1 = ["left"]
//!
//! [time]
//! final_time = 1.0
//! n_steps = 32
//!
//! [problem]
//! variant = "dirichlet"
//! m1 = 0.01
//! m2 = 0.01
//! alpha = 10.0
//! alphas = [10.0, 100.0, 1000.0, 10000.0]
//! b = { kind = "constant", value = 1.0 }
//! v_b = { kind = "linear", c0 = 1.0, cx = -1.0 }
//! z_d = { kind = "gaussian", amplitude = 1.0, center = [0.5, 0.5], width = 0.2 }
//!
//! [solver]
//! tol = 1e-8
//! max_iter = 500
//! optimizer = "cg"
//!
//! [sweep]
//! mode = "optimal"
//!
//! [output]
//! directory = "out"
//! formats = ["csv", "json"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_ALPHAS;
use crate::assembly::{assemble, DiscreteOperators};
use crate::control::DEFAULT_MAX_ITER;
use crate::error::{Error, Result};
use crate::mesh::{build_rect_mesh, Mesh, Side, TimeGrid};
use crate::state::{ControlPair, ProblemData, Propagator, TimeSeries, Variant};

/// Tolerance for `v_b` against `b` on Dirichlet nodes before `v_b` is pinned.
pub const LIFT_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `c0 + cx x + cy y`
    Linear {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cx: f64,
        #[serde(default)]
        cy: f64,
    },
    /// `amplitude exp(-|x - center|^2 / (2 width^2))`
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
    /// Columns `node,value`, or `step,node,value` for a time-dependent target.
    Csv {
        path: PathBuf,
    },
    /// The state of the uncontrolled system (`g = 0`, `q = 0`); targets only.
    Uncontrolled,
}

impl FieldSpec {
    fn check(&self, name: &str, base: &Path) -> Result<()> {
        match self {
            FieldSpec::Gaussian { width, .. } if !(*width > 0.0) => {
                Err(Error::config(format!("{name}: gaussian width must be positive, got {width}")))
            }
            FieldSpec::Csv { path } => {
                let full = base.join(path);
                if full.is_file() {
                    Ok(())
                } else {
                    Err(Error::config(format!("{name}: csv file {} does not exist", full.display())))
                }
            }
            _ => Ok(()),
        }
    }

    fn analytic(&self, x: [f64; 2]) -> f64 {
        match *self {
            FieldSpec::Zero => 0.0,
            FieldSpec::Constant { value } => value,
            FieldSpec::Linear { c0, cx, cy } => c0 + cx * x[0] + cy * x[1],
            FieldSpec::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            FieldSpec::Csv { .. } | FieldSpec::Uncontrolled => unreachable!("not an analytic field"),
        }
    }

    /// Values at `nodes`; CSV files are indexed by global node number.
    fn at_nodes(&self, name: &str, mesh: &Mesh, nodes: &[usize], base: &Path) -> Result<Vec<f64>> {
        match self {
            FieldSpec::Csv { path } => {
                let table = read_field_csv(name, &base.join(path), mesh.n_nodes())?;
                if table.len() != 1 {
                    return Err(Error::config(format!("{name}: expected a node,value table")));
                }
                Ok(nodes.iter().map(|&i| table[0][i]).collect())
            }
            FieldSpec::Uncontrolled => Err(Error::config(format!(
                "{name}: 'uncontrolled' is only available for z_d"
            ))),
            spec => Ok(nodes.iter().map(|&i| spec.analytic(mesh.nodes()[i])).collect()),
        }
    }
}

/// Reads `node,value` (one slice) or `step,node,value` (slices 1..=steps).
fn read_field_csv(name: &str, path: &Path, n_nodes: usize) -> Result<Vec<Vec<f64>>> {
    let fail = |msg: String| Error::config(format!("{name}: {}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| fail(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let timed = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["node", "value"] => false,
        ["step", "node", "value"] => true,
        _ => return Err(fail(format!("header must be node,value or step,node,value, got {headers:?}"))),
    };
    let mut slices: Vec<Vec<Option<f64>>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| fail(e.to_string()))?;
        let field = |k: usize| -> Result<&str> {
            record
                .get(k)
                .map(str::trim)
                .ok_or_else(|| fail(format!("line {line}: missing column {}", headers[k])))
        };
        let parse_index = |k: usize| -> Result<usize> {
            field(k)?
                .parse::<usize>()
                .map_err(|e| fail(format!("line {line}, column {}: {e}", headers[k])))
        };
        let (slot, node, vcol) = if timed {
            let step = parse_index(0)?;
            if step == 0 {
                return Err(fail(format!("line {line}: steps are numbered from 1")));
            }
            (step - 1, parse_index(1)?, 2)
        } else {
            (0, parse_index(0)?, 1)
        };
        let value = field(vcol)?
            .parse::<f64>()
            .map_err(|e| fail(format!("line {line}, column value: {e}")))?;
        if node >= n_nodes {
            return Err(fail(format!("line {line}: node {node} out of range (mesh has {n_nodes})")));
        }
        if slices.len() <= slot {
            slices.resize(slot + 1, vec![None; n_nodes]);
        }
        slices[slot][node] = Some(value);
    }
    if slices.is_empty() {
        return Err(fail("no data rows".into()));
    }
    slices
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            s.into_iter()
                .enumerate()
                .map(|(i, v)| v.ok_or_else(|| fail(format!("no value for node {i} in slice {}", k + 1))))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_gamma1")]
    pub gamma1: Vec<Side>,
}

fn default_gamma1() -> Vec<Side> {
    vec![Side::Left]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub final_time: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    pub m1: f64,
    pub m2: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "zero_field")]
    pub b: FieldSpec,
    /// Defaults to the `b` field evaluated on every node.
    #[serde(default)]
    pub v_b: Option<FieldSpec>,
    pub z_d: FieldSpec,
}

fn default_variant() -> Variant {
    Variant::Dirichlet
}

fn default_alpha() -> f64 {
    10.0
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

fn zero_field() -> FieldSpec {
    FieldSpec::Zero
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Cg,
    FixedPoint,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_optimizer() -> Optimizer {
    Optimizer::Cg
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            max_iter: default_max_iter(),
            optimizer: default_optimizer(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Optimal,
    FixedControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_mode")]
    pub mode: SweepMode,
    /// Distributed control of a fixed-control sweep, constant in time.
    #[serde(default = "zero_field")]
    pub g: FieldSpec,
    /// Boundary flux of a fixed-control sweep, constant in time.
    #[serde(default = "zero_field")]
    pub q: FieldSpec,
}

fn default_mode() -> SweepMode {
    SweepMode::Optimal
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mode: default_mode(),
            g: FieldSpec::Zero,
            q: FieldSpec::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("heatopt-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub time: TimeSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory that relative CSV paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and validates; relative CSV paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<RunConfig> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return Err(Error::config("mesh.nx and mesh.ny must be positive"));
        }
        if !(self.time.final_time > 0.0 && self.time.final_time.is_finite()) {
            return Err(Error::config(format!(
                "time.final_time must be positive, got {}",
                self.time.final_time
            )));
        }
        if self.time.n_steps == 0 {
            return Err(Error::config("time.n_steps must be positive"));
        }
        let p = &self.problem;
        if !(p.m1 > 0.0 && p.m2 > 0.0) {
            return Err(Error::config(format!(
                "problem.m1 and problem.m2 must be positive, got {} and {}",
                p.m1, p.m2
            )));
        }
        if !(p.alpha > 0.0 && p.alpha.is_finite()) {
            return Err(Error::config(format!("problem.alpha must be positive, got {}", p.alpha)));
        }
        if p.alphas.is_empty() {
            return Err(Error::config("problem.alphas must not be empty"));
        }
        if let Some(a) = p.alphas.iter().find(|&&a| !(a > 1.0 && a.is_finite())) {
            return Err(Error::config(format!("problem.alphas: every alpha must exceed 1, got {a}")));
        }
        if p.alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("problem.alphas must be strictly increasing"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::config(format!("solver.tol must be positive, got {}", self.solver.tol)));
        }
        if self.solver.max_iter == 0 {
            return Err(Error::config("solver.max_iter must be positive"));
        }
        p.b.check("problem.b", &self.base_dir)?;
        if let Some(v_b) = &p.v_b {
            v_b.check("problem.v_b", &self.base_dir)?;
        }
        p.z_d.check("problem.z_d", &self.base_dir)?;
        self.sweep.g.check("sweep.g", &self.base_dir)?;
        self.sweep.q.check("sweep.q", &self.base_dir)?;
        for (name, spec) in [("problem.b", &p.b), ("sweep.g", &self.sweep.g), ("sweep.q", &self.sweep.q)] {
            if *spec == FieldSpec::Uncontrolled {
                return Err(Error::config(format!("{name}: 'uncontrolled' is only available for z_d")));
            }
        }
        if p.v_b == Some(FieldSpec::Uncontrolled) {
            return Err(Error::config("problem.v_b: 'uncontrolled' is only available for z_d"));
        }
        Ok(())
    }

    /// Builds the mesh, operators and problem data. An `uncontrolled` target
    /// is the uncontrolled state of `target_variant`.
    pub fn instance(&self, target_variant: Variant) -> Result<Instance> {
        let mesh = build_rect_mesh(self.mesh.nx, self.mesh.ny, &self.mesh.gamma1)
            .map_err(|e| Error::config(format!("mesh: {e}")))?;
        let ops = assemble(&mesh)?;
        let grid = TimeGrid::new(self.time.final_time, self.time.n_steps)
            .map_err(|e| Error::config(format!("time: {e}")))?;
        let p = &self.problem;
        let n = mesh.n_nodes();
        let all: Vec<usize> = (0..n).collect();
        let base = &self.base_dir;

        let b = p.b.at_nodes("problem.b", &mesh, &ops.dirichlet_nodes, base)?;
        let mut v_b = p
            .v_b
            .as_ref()
            .unwrap_or(&p.b)
            .at_nodes("problem.v_b", &mesh, &all, base)?;
        for (k, &i) in ops.dirichlet_nodes.iter().enumerate() {
            let diff = (v_b[i] - b[k]).abs();
            if diff > LIFT_MATCH_TOL * (1.0 + b[k].abs()) {
                return Err(Error::config(format!(
                    "problem.v_b: v_b = {} differs from b = {} at Dirichlet node {i}",
                    v_b[i], b[k]
                )));
            }
            v_b[i] = b[k];
        }

        let steps = grid.n_steps();
        let z_d: TimeSeries = match &p.z_d {
            FieldSpec::Uncontrolled => Vec::new(),
            FieldSpec::Csv { path } => {
                let table = read_field_csv("problem.z_d", &base.join(path), n)?;
                match table.len() {
                    1 => vec![table[0].clone(); steps],
                    k if k == steps => table,
                    k => {
                        return Err(Error::config(format!(
                            "problem.z_d: csv has {k} steps, expected {steps}"
                        )))
                    }
                }
            }
            spec => vec![spec.at_nodes("problem.z_d", &mesh, &all, base)?; steps],
        };

        let data = if z_d.is_empty() {
            let placeholder = vec![vec![0.0; n]; steps];
            let data = ProblemData::new(&ops, grid, b, v_b, placeholder, p.m1, p.m2, p.alpha)
                .map_err(as_config)?;
            let zero = ControlPair::zeros(&ops, steps);
            let u00 = Propagator::new(&data, &ops, target_variant)?.state(&data, &zero)?;
            data.with_target_trajectory(&u00)?
        } else {
            ProblemData::new(&ops, grid, b, v_b, z_d, p.m1, p.m2, p.alpha).map_err(as_config)?
        };

        let mut sweep_control = ControlPair::zeros(&ops, steps);
        let g = self.sweep.g.at_nodes("sweep.g", &mesh, &all, base)?;
        let q = self.sweep.q.at_nodes("sweep.q", &mesh, &ops.gamma2_nodes, base)?;
        sweep_control.g.iter_mut().for_each(|s| s.clone_from(&g));
        sweep_control.q.iter_mut().for_each(|s| s.clone_from(&q));

        Ok(Instance {
            mesh,
            ops,
            data,
            sweep_control,
        })
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Contract(msg) => Error::config(format!("problem: {msg}")),
        other => other,
    }
}

pub struct Instance {
    pub mesh: Mesh,
    pub ops: DiscreteOperators,
    pub data: ProblemData,
    /// Control used by fixed-control sweeps.
    pub sweep_control: ControlPair,
}
