//! Run configuration: JSON file plus `--set key.path=value` overrides.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hkflow_core::flow::{FlowMode, Integrator};
use hkflow_core::harness::{CounterexampleKind, InequalityName, InequalityParams};
use hkflow_core::mesh::{build_grid_with_cap, DensityBuilder, DensityKind, DomainKind, Grid, DEFAULT_CELL_CAP};
use hkflow_core::profiles::{GSpec, ProfileJson, PsiSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Validate,
    Simulate,
    Inequality,
    Counterexample,
    Sweep,
    Decay,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::Inequality => "inequality",
            Command::Counterexample => "counterexample",
            Command::Sweep => "sweep",
            Command::Decay => "decay",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub domain_kind: DomainKind,
    pub n: usize,
    #[serde(default = "default_cap")]
    pub max_cells: usize,
}

fn default_cap() -> usize {
    DEFAULT_CELL_CAP
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, Failure> {
        Ok(build_grid_with_cap(self.domain_kind, self.n, self.max_cells)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(ProfileJson),
    Many(Vec<ProfileJson>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: InequalityName,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub band: Option<(f64, f64)>,
    /// Ratios above this count as a falsification.
    #[serde(default)]
    pub ratio_cap: Option<f64>,
}

impl CaseConfig {
    pub fn params(&self) -> InequalityParams {
        InequalityParams { p: self.p, alpha: self.alpha, band: self.band }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub mode: FlowMode,
    pub t_end: f64,
    pub cfl: f64,
    pub snapshot_every: usize,
    pub field_every: Option<usize>,
    pub integrator: Integrator,
    /// Fit window: samples with `E > floor_fraction * E(0)`.
    pub floor_fraction: f64,
    pub margin: f64,
    pub max_steps: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            mode: FlowMode::Full,
            t_end: 1.0,
            cfl: 0.45,
            snapshot_every: 1,
            field_every: None,
            integrator: Integrator::SspRk2,
            floor_fraction: 1e-12,
            margin: 0.05,
            max_steps: 100_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSection {
    pub kind: CounterexampleKind,
    pub range: Vec<f64>,
    /// Cells per axis for every member; defaults to `grid.n`.
    #[serde(default)]
    pub grid_n: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigFamily {
    pub count: usize,
    #[serde(default = "default_modes")]
    pub modes: u32,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn default_modes() -> u32 {
    4
}
fn default_amplitude() -> f64 {
    0.9
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub family: Vec<DensityBuilder>,
    /// Appends `count` seeded random members, seeds `seed, seed + 1, ...`.
    #[serde(default)]
    pub trig_random: Option<TrigFamily>,
    #[serde(default = "default_mass_floor")]
    pub mass_floor: f64,
    #[serde(default = "default_entropy_cap")]
    pub entropy_cap: f64,
    #[serde(default)]
    pub ratio_cap: Option<f64>,
}

fn default_mass_floor() -> f64 {
    0.5
}
fn default_entropy_cap() -> f64 {
    5.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgtermSection {
    pub eps: Vec<f64>,
    pub s_max: f64,
    pub samples: usize,
}

impl Default for AlgtermSection {
    fn default() -> Self {
        AlgtermSection { eps: vec![0.1, 0.3, 0.5], s_max: 1e6, samples: 2000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Informational; the command given on the command line is the one run.
    #[serde(default)]
    pub command: Option<Command>,
    pub grid: GridConfig,
    pub steady: DensityBuilder,
    #[serde(default)]
    pub initial: Option<DensityBuilder>,
    pub g: ProfileJson,
    pub psi: OneOrMany,
    #[serde(default)]
    pub case: Option<CaseConfig>,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub counterexample: Option<CounterexampleSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub algterm: AlgtermSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn g(&self) -> Result<GSpec, Failure> {
        Ok(GSpec::try_from(self.g.clone())?)
    }

    pub fn psi(&self) -> Result<Vec<PsiSpec>, Failure> {
        let list = match &self.psi {
            OneOrMany::One(p) => vec![p.clone()],
            OneOrMany::Many(ps) => ps.clone(),
        };
        if list.is_empty() {
            return Err(Failure::Config("psi list is empty".into()));
        }
        list.into_iter().map(|p| Ok(PsiSpec::try_from(p)?)).collect()
    }

    /// Fills the run seed into random builders that do not carry their own.
    pub fn seeded(&self, builder: &DensityBuilder, offset: u64) -> DensityBuilder {
        let mut b = builder.clone();
        if let DensityKind::TrigRandom { seed, .. } = &mut b.kind {
            seed.get_or_insert(self.seed.wrapping_add(offset));
        }
        b
    }

    pub fn output_dir(&self) -> Result<PathBuf, Failure> {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os("HKFLOW_OUTPUT_DIR").map(PathBuf::from))
            .ok_or_else(|| Failure::Config("no output_dir in the config and HKFLOW_OUTPUT_DIR is unset".into()))
    }
}

/// Sets `path` (dot-separated; numeric segments index arrays) to `value`,
/// read as JSON when it parses and as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), Failure> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override `{assignment}` is not of the form key.path=value")))?;
    if path.is_empty() {
        return Err(Failure::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Failure::Config(format!("override `{path}`: `{seg}` does not index an array")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Failure::Config(format!("override `{path}`: index {idx} out of range ({len})")))?
            }
            Value::Object(map) => map.entry(seg.to_string()).or_insert(if last { Value::Null } else { Value::Object(Default::default()) }),
            other => {
                if !other.is_null() {
                    return Err(Failure::Config(format!("override `{path}`: cannot descend into `{seg}`")));
                }
                *other = Value::Object(Default::default());
                other.as_object_mut().unwrap().entry(seg.to_string()).or_insert(Value::Null)
            }
        };
    }
    *node = value;
    Ok(())
}

/// Reads, overrides and type-checks a configuration file. Returns the typed
/// config and the effective JSON value.
pub fn load(path: &Path, overrides: &[String]) -> Result<(RunConfig, Value), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let config: RunConfig = serde_path_to_error::deserialize(value.clone())
        .map_err(|e| Failure::Config(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))?;
    Ok((config, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_walk_objects_and_arrays() {
        let mut v = json!({"grid": {"n": 64}, "psi": [{"kind": "beckner", "p": 1}]});
        apply_override(&mut v, "grid.n=128").unwrap();
        apply_override(&mut v, "psi.0.p=3").unwrap();
        apply_override(&mut v, "flow.t_end=0.5").unwrap();
        apply_override(&mut v, "output_dir=out/run").unwrap();
        assert_eq!(v["grid"]["n"], 128);
        assert_eq!(v["psi"][0]["p"], 3);
        assert_eq!(v["flow"]["t_end"], 0.5);
        assert_eq!(v["output_dir"], "out/run");
        assert!(apply_override(&mut v, "psi.4.p=3").is_err());
        assert!(apply_override(&mut v, "grid.n.x=3").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }
}
