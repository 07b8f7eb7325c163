//! Run configuration: a flat JSON object with dotted keys.
//!
//! ```json
//! { "grid.nx": 64, "grid.ny": 64, "scenario.kind": "spinodal", "model.rho2": 3.0 }
//! ```
//!
//! Every key except `grid.nx`, `grid.ny` and `scenario.kind` has a default;
//! unknown keys are rejected. [`RunConfig::echo`] writes back every resolved
//! setting so that the echo reproduces the run.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::grid::MacGrid;
use crate::model::{CoefficientProfile, ModelParams, Variant};
use crate::potential::{PotentialKind, PotentialSpec};
use crate::scenario::{InitialCondition, Scenario};
use crate::stepper::StepperConfig;

pub const KEYS: &[&str] = &[
    "name",
    "grid.nx",
    "grid.ny",
    "grid.lx",
    "grid.ly",
    "scenario.kind",
    "scenario.seed",
    "scenario.mean",
    "scenario.amplitude",
    "scenario.center_x",
    "scenario.center_y",
    "scenario.radius",
    "scenario.width",
    "scenario.height",
    "scenario.smoothing_sweeps",
    "model.rho1",
    "model.rho2",
    "model.variant",
    "model.a",
    "model.mobility",
    "model.viscosity",
    "model.m0",
    "model.K",
    "potential.kind",
    "potential.theta",
    "potential.theta_c",
    "potential.scale",
    "time.h",
    "time.steps",
    "solver.outer_tol",
    "solver.outer_max_iter",
    "solver.under_relaxation",
    "solver.newton_tol",
    "solver.newton_max_iter",
    "solver.damping_min",
    "solver.lin_tol",
    "solver.lin_max_iter",
    "solver.audit_eps",
    "output.dir",
    "output.snapshot_every",
    "output.vtk",
];

/// Default domain edge when `grid.lx` / `grid.ly` are absent.
pub const DEFAULT_EXTENT: f64 = 25.6;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    /// Snapshot period in steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub stepper: StepperConfig,
    pub steps: usize,
    pub output: OutputConfig,
}

struct Reader<'a> {
    map: &'a Map<String, Value>,
}

fn parse_err(key: &str, message: impl Into<String>) -> Error {
    Error::Parse { line: None, key: Some(key.to_string()), message: message.into() }
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| parse_err(key, "expected a number")),
        }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| v.as_f64().ok_or_else(|| parse_err(key, "expected a number"))).transpose()
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| parse_err(key, "expected a non-negative integer")),
        }
    }

    fn required_usize(&self, key: &str) -> Result<usize> {
        self.get(key).ok_or_else(|| parse_err(key, "required key missing"))?;
        self.usize_or(key, 0)
    }

    fn str_or<'b>(&'b self, key: &str, default: &'b str) -> Result<&'b str> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| parse_err(key, "expected a string")),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| parse_err(key, "expected true or false")),
        }
    }

    /// A number, or an array of samples on a uniform grid of `[-1, 1]`.
    fn profile_or(&self, key: &str, default: f64) -> Result<CoefficientProfile> {
        match self.get(key) {
            None => Ok(CoefficientProfile::Constant(default)),
            Some(Value::Array(items)) => {
                let vals = items
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| parse_err(key, "table entries must be numbers")))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() < 2 {
                    return Err(parse_err(key, "a table needs at least two samples"));
                }
                Ok(CoefficientProfile::SmoothTable(vals))
            }
            Some(v) => v
                .as_f64()
                .map(CoefficientProfile::Constant)
                .ok_or_else(|| parse_err(key, "expected a number or an array of numbers")),
        }
    }
}

fn profile_value(p: &CoefficientProfile) -> Value {
    match p {
        CoefficientProfile::Constant(c) => Value::from(*c),
        CoefficientProfile::SmoothTable(v) => Value::from(v.clone()),
    }
}

impl RunConfig {
    /// Parse configuration text; errors carry the line when the JSON itself
    /// is malformed and the key when a value is wrong.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: Some(e.line()),
            key: None,
            message: e.to_string(),
        })?;
        let map = value
            .as_object()
            .ok_or_else(|| Error::Parse { line: None, key: None, message: "top level must be an object".into() })?;
        for k in map.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(parse_err(k, "unknown key"));
            }
        }
        Self::from_map(&Reader { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    fn from_map(r: &Reader) -> Result<Self> {
        let nx = r.required_usize("grid.nx")?;
        let ny = r.required_usize("grid.ny")?;
        let lx = r.f64_or("grid.lx", DEFAULT_EXTENT)?;
        let ly = r.f64_or("grid.ly", DEFAULT_EXTENT)?;
        let grid = MacGrid::new(nx, ny, lx, ly)?;

        let kind = r.get("scenario.kind").ok_or_else(|| parse_err("scenario.kind", "required key missing"))?;
        let kind = kind.as_str().ok_or_else(|| parse_err("scenario.kind", "expected a string"))?;
        let initial = match kind {
            "spinodal" => InitialCondition::Spinodal {
                seed: r.usize_or("scenario.seed", 1)? as u64,
                mean: r.f64_or("scenario.mean", 0.0)?,
                amplitude: r.f64_or("scenario.amplitude", 0.05)?,
            },
            "bubble" => InitialCondition::Bubble {
                center_x: r.f64_or("scenario.center_x", 0.5 * lx)?,
                center_y: r.f64_or("scenario.center_y", 0.5 * ly)?,
                radius: r.f64_or("scenario.radius", 0.25 * lx.min(ly))?,
                width: r.f64_or("scenario.width", 1.0)?,
            },
            "stratified" => InitialCondition::Stratified {
                height: r.f64_or("scenario.height", 0.5 * ly)?,
                width: r.f64_or("scenario.width", 1.0)?,
            },
            "cosine" => InitialCondition::Cosine {
                mean: r.f64_or("scenario.mean", 0.0)?,
                amplitude: r.f64_or("scenario.amplitude", 0.05)?,
            },
            other => return Err(parse_err("scenario.kind", format!("unknown scenario `{other}`"))),
        };

        let variant_name = r.str_or("model.variant", "agg")?;
        let variant = Variant::from_name(variant_name)
            .ok_or_else(|| parse_err("model.variant", format!("unknown variant `{variant_name}`")))?;
        let potential = match r.str_or("potential.kind", "logarithmic")? {
            "logarithmic" => {
                PotentialSpec::logarithmic(r.f64_or("potential.theta", 1.0)?, r.f64_or("potential.theta_c", 2.0)?)
            }
            "polynomial" => PotentialSpec::double_well(r.f64_or("potential.scale", 1.0)?),
            other => return Err(parse_err("potential.kind", format!("unknown potential `{other}`"))),
        };
        let a_coeff = r.profile_or("model.a", 1.0)?;
        let mobility = r.profile_or("model.mobility", 1.0)?;
        let viscosity = r.profile_or("model.viscosity", 1.0)?;
        let ranges = [&a_coeff, &mobility, &viscosity].map(|p| p.range());
        let lo = ranges.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let hi = ranges.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let params = ModelParams {
            rho1: r.f64_or("model.rho1", 1.0)?,
            rho2: r.f64_or("model.rho2", 3.0)?,
            a_coeff,
            mobility,
            viscosity,
            potential,
            variant,
            m0: r.f64_or("model.m0", lo)?,
            k_max: r.f64_or("model.K", hi)?,
        };
        params.validate()?;

        let d = StepperConfig::default();
        let stepper = StepperConfig {
            h: r.f64_or("time.h", d.h)?,
            outer_tol: r.f64_or("solver.outer_tol", d.outer_tol)?,
            outer_max_iter: r.usize_or("solver.outer_max_iter", d.outer_max_iter)?,
            under_relaxation: r.f64_or("solver.under_relaxation", d.under_relaxation)?,
            audit_eps: r.opt_f64("solver.audit_eps")?,
            newton_tol: r.f64_or("solver.newton_tol", d.newton_tol)?,
            newton_max_iter: r.usize_or("solver.newton_max_iter", d.newton_max_iter)?,
            damping_min: r.f64_or("solver.damping_min", d.damping_min)?,
            lin_tol: r.f64_or("solver.lin_tol", d.lin_tol)?,
            lin_max_iter: r.usize_or("solver.lin_max_iter", d.lin_max_iter)?,
        };
        stepper.validate()?;

        let name = r.str_or("name", "run")?.to_string();
        let scenario = Scenario {
            name: name.clone(),
            grid,
            initial,
            smoothing_sweeps: r.usize_or("scenario.smoothing_sweeps", 0)?,
            params,
        };
        // surfaces bound violations of the generated field at load time
        scenario.initial_phi()?;

        Ok(RunConfig {
            scenario,
            stepper,
            steps: r.usize_or("time.steps", 100)?,
            output: OutputConfig {
                dir: r.str_or("output.dir", &format!("output/{name}"))?.to_string(),
                snapshot_every: r.usize_or("output.snapshot_every", 0)?,
                vtk: r.bool_or("output.vtk", false)?,
            },
        })
    }

    /// Fully resolved configuration as a flat JSON object.
    pub fn echo(&self) -> Value {
        let s = &self.scenario;
        let p = &s.params;
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("name", s.name.clone().into());
        put("grid.nx", s.grid.nx.into());
        put("grid.ny", s.grid.ny.into());
        put("grid.lx", s.grid.lx.into());
        put("grid.ly", s.grid.ly.into());
        put("scenario.kind", s.initial.kind_name().into());
        match s.initial {
            InitialCondition::Spinodal { seed, mean, amplitude } => {
                put("scenario.seed", seed.into());
                put("scenario.mean", mean.into());
                put("scenario.amplitude", amplitude.into());
            }
            InitialCondition::Bubble { center_x, center_y, radius, width } => {
                put("scenario.center_x", center_x.into());
                put("scenario.center_y", center_y.into());
                put("scenario.radius", radius.into());
                put("scenario.width", width.into());
            }
            InitialCondition::Stratified { height, width } => {
                put("scenario.height", height.into());
                put("scenario.width", width.into());
            }
            InitialCondition::Cosine { mean, amplitude } => {
                put("scenario.mean", mean.into());
                put("scenario.amplitude", amplitude.into());
            }
        }
        put("scenario.smoothing_sweeps", s.smoothing_sweeps.into());
        put("model.rho1", p.rho1.into());
        put("model.rho2", p.rho2.into());
        put("model.variant", p.variant.name().into());
        put("model.a", profile_value(&p.a_coeff));
        put("model.mobility", profile_value(&p.mobility));
        put("model.viscosity", profile_value(&p.viscosity));
        put("model.m0", p.m0.into());
        put("model.K", p.k_max.into());
        match p.potential.kind {
            PotentialKind::Logarithmic { theta, theta_c } => {
                put("potential.kind", "logarithmic".into());
                put("potential.theta", theta.into());
                put("potential.theta_c", theta_c.into());
            }
            PotentialKind::PolynomialDoubleWell { scale } => {
                put("potential.kind", "polynomial".into());
                put("potential.scale", scale.into());
            }
        }
        let c = &self.stepper;
        put("time.h", c.h.into());
        put("time.steps", self.steps.into());
        put("solver.outer_tol", c.outer_tol.into());
        put("solver.outer_max_iter", c.outer_max_iter.into());
        put("solver.under_relaxation", c.under_relaxation.into());
        put("solver.newton_tol", c.newton_tol.into());
        put("solver.newton_max_iter", c.newton_max_iter.into());
        put("solver.damping_min", c.damping_min.into());
        put("solver.lin_tol", c.lin_tol.into());
        put("solver.lin_max_iter", c.lin_max_iter.into());
        put("solver.audit_eps", c.audit_eps.map(Value::from).unwrap_or(Value::Null));
        put("output.dir", self.output.dir.clone().into());
        put("output.snapshot_every", self.output.snapshot_every.into());
        put("output.vtk", self.output.vtk.into());
        Value::Object(m)
    }

    pub fn echo_string(&self) -> String {
        serde_json::to_string_pretty(&self.echo()).expect("config echo serializes")
    }
}
