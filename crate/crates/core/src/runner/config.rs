use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use super::source::SourceTerm;
use crate::convex::TabulatedFunction;
use crate::error::{Error, Result};
use crate::fields::{FieldRecord, MonotoneField};

/// A pipeline stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Verify,
    Selfdualize,
    Cell,
    Tabulate,
    Solve,
    Sweep,
    Checks,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Verify => "verify",
            Stage::Selfdualize => "selfdualize",
            Stage::Cell => "cell",
            Stage::Tabulate => "tabulate",
            Stage::Solve => "solve",
            Stage::Sweep => "sweep",
            Stage::Checks => "checks",
        }
    }

    /// Stages that work from the monotone field itself.
    fn needs_field(self) -> bool {
        matches!(self, Stage::Verify | Stage::Selfdualize)
    }

    /// Stages that need a Lagrangian, from the field or a table file.
    fn needs_lagrangian(self) -> bool {
        !matches!(self, Stage::Checks)
    }

    /// Stages that must appear earlier in the pipeline.
    fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Sweep => &[Stage::Tabulate, Stage::Solve],
            _ => &[],
        }
    }
}

/// A field given by path (relative to the config file) or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Path(PathBuf),
    Inline(FieldRecord),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    /// Half-width and nodes per axis of the selfdualization boxes.
    pub selfdual_radius: f64,
    pub selfdual_nodes: usize,
    /// Cell grid nodes per axis.
    pub cell_nodes: usize,
    /// Box of the homogenized table, `a` factor.
    pub ab_radius: f64,
    pub ab_nodes: usize,
    /// `b` factor; defaults to the `a` factor.
    pub b_radius: Option<f64>,
    pub b_nodes: Option<usize>,
    /// Dirichlet mesh intervals per axis for the solve stage.
    pub mesh: usize,
    /// `1/eps` of the solve stage.
    pub solve_inverse_eps: usize,
    /// `1/eps` values of the sweep.
    pub eps: Vec<usize>,
    pub nodes_per_period: usize,
    /// Slopes `xi` at which the cell stage evaluates `beta_hom(xi e_1)`.
    pub cell_samples: Vec<f64>,
    pub checks_cases: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            selfdual_radius: 8.0,
            selfdual_nodes: 129,
            cell_nodes: 256,
            ab_radius: 2.0,
            ab_nodes: 33,
            b_radius: None,
            b_nodes: None,
            mesh: 256,
            solve_inverse_eps: 16,
            eps: vec![4, 8, 16, 32, 64],
            nodes_per_period: 8,
            cell_samples: vec![0.5, 1.0],
            checks_cases: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tol_gap: f64,
    /// Dirichlet gap certificate threshold; chosen from the growth exponent
    /// when absent.
    pub tol_solve: Option<f64>,
    /// Cell solver KKT tolerance; chosen from the growth exponent when absent.
    pub tol_cell: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_gap: 1e-6,
            tol_solve: None,
            tol_cell: None,
        }
    }
}

fn default_source() -> SourceTerm {
    SourceTerm::Const(1.0)
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub field: Option<FieldSpec>,
    /// An `x`-independent Lagrangian given as a two-factor table file, used
    /// when no field is given.
    #[serde(default)]
    pub lagrangian: Option<PathBuf>,
    #[serde(default)]
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_source")]
    pub source: SourceTerm,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: String::new(),
            field: None,
            lagrangian: None,
            pipeline: Vec::new(),
            resolution: Resolution::default(),
            tolerances: Tolerances::default(),
            source: default_source(),
            seed: 0,
        }
    }
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("/{index}")),
            Segment::Map { key } => s.push_str(&format!("/{key}")),
            Segment::Enum { variant } => s.push_str(&format!("/{variant}")),
            Segment::Unknown => s.push_str("/?"),
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

impl ExperimentConfig {
    /// Parse and validate; every failure is an [`Error::Config`] carrying a
    /// JSON pointer.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let p = pointer(e.path());
            Error::config(p, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("/", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.resolution;
        let t = &self.tolerances;
        for (name, v) in [("tol_gap", t.tol_gap), ("tol_solve", t.tol_solve.unwrap_or(1.0)), ("tol_cell", t.tol_cell.unwrap_or(1.0))] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("/tolerances/{name}"), format!("must be positive, got {v}")));
            }
        }
        let positive = [
            ("selfdual_radius", r.selfdual_radius),
            ("ab_radius", r.ab_radius),
            ("b_radius", r.b_radius.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("/resolution/{name}"), format!("must be positive, got {v}")));
            }
        }
        let odd = [("selfdual_nodes", r.selfdual_nodes), ("ab_nodes", r.ab_nodes), ("b_nodes", r.b_nodes.unwrap_or(3))];
        for (name, v) in odd {
            if v < 3 || v % 2 == 0 {
                return Err(Error::config(format!("/resolution/{name}"), format!("needs an odd count of at least 3, got {v}")));
            }
        }
        if r.cell_nodes < 8 {
            return Err(Error::config("/resolution/cell_nodes", format!("needs at least 8 nodes, got {}", r.cell_nodes)));
        }
        if r.mesh < 9 {
            return Err(Error::config("/resolution/mesh", format!("needs at least 9 intervals, got {}", r.mesh)));
        }
        if r.solve_inverse_eps == 0 {
            return Err(Error::config("/resolution/solve_inverse_eps", "must be positive"));
        }
        if let Err(e) = crate::harness::EpsSchedule::new(r.eps.clone(), r.nodes_per_period) {
            let at = if r.nodes_per_period < 8 { "/resolution/nodes_per_period" } else { "/resolution/eps" };
            return Err(Error::config(at, e.to_string()));
        }
        if r.cell_samples.is_empty() || r.cell_samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("/resolution/cell_samples", "needs at least one finite slope"));
        }
        if r.checks_cases == 0 {
            return Err(Error::config("/resolution/checks_cases", "must be positive"));
        }
        for (i, stage) in self.pipeline.iter().enumerate() {
            if self.pipeline[..i].contains(stage) {
                return Err(Error::config(format!("/pipeline/{i}"), format!("stage `{}` listed twice", stage.name())));
            }
            if stage.needs_field() && self.field.is_none() {
                return Err(Error::config(format!("/pipeline/{i}"), format!("stage `{}` requires a field", stage.name())));
            }
            if stage.needs_lagrangian() && self.field.is_none() && self.lagrangian.is_none() {
                return Err(Error::config(format!("/pipeline/{i}"), format!("stage `{}` requires a field or a Lagrangian", stage.name())));
            }
            for dep in stage.requires() {
                if !self.pipeline[..i].contains(dep) {
                    return Err(Error::config(
                        format!("/pipeline/{i}"),
                        format!("stage `{}` requires `{}` earlier in the pipeline", stage.name(), dep.name()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolve the field, reading relative paths against `base`.
    pub fn load_field(&self, base: &Path) -> Result<Option<MonotoneField>> {
        let Some(spec) = &self.field else { return Ok(None) };
        let field = match spec {
            FieldSpec::Path(p) => {
                let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                let text = std::fs::read_to_string(&full).map_err(|e| Error::config("/field", format!("cannot read {}: {e}", full.display())))?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                let rec: FieldRecord = serde_path_to_error::deserialize(de)
                    .map_err(|e| Error::config(format!("/field{}", pointer(e.path()).trim_end_matches('/')), e.into_inner().to_string()))?;
                MonotoneField::from_record(&rec)
            }
            FieldSpec::Inline(rec) => MonotoneField::from_record(rec),
        };
        field.map(Some).map_err(|e| match e {
            Error::Config { pointer, message } => Error::config(format!("/field{pointer}"), message),
            other => Error::config("/field", other.to_string()),
        })
    }

    /// Load the Lagrangian table named by `lagrangian`, reading relative
    /// paths against `base`.
    pub fn load_lagrangian_table(&self, base: &Path) -> Result<Option<TabulatedFunction>> {
        let Some(p) = &self.lagrangian else { return Ok(None) };
        let full = if p.is_absolute() { p.clone() } else { base.join(p) };
        let t = TabulatedFunction::load(&full).map_err(|e| Error::config("/lagrangian", format!("{}: {e}", full.display())))?;
        if t.arity() % 2 != 0 || t.factors().len() != 2 {
            return Err(Error::config("/lagrangian", "expected a table over (a, b)"));
        }
        Ok(Some(t))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("configs serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_pointer(text: &str) -> String {
        match ExperimentConfig::from_json(text) {
            Err(Error::Config { pointer, .. }) => pointer,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_and_pointers() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c.resolution.cell_nodes, 256);
        assert_eq!(c.source, SourceTerm::Const(1.0));
        assert_eq!(err_pointer(r#"{"tolerances": {"tol_gap": -1}}"#), "/tolerances/tol_gap");
        assert_eq!(err_pointer(r#"{"resolution": {"cell_nodes": "x"}}"#), "/resolution/cell_nodes");
        assert_eq!(err_pointer(r#"{"pipeline": ["verify", "bogus"]}"#), "/pipeline/1");
        assert_eq!(err_pointer(r#"{"pipeline": ["cell"]}"#), "/pipeline/0");
        assert_eq!(err_pointer(r#"{"resolution": {"eps": [8, 4]}}"#), "/resolution/eps");
        assert_eq!(err_pointer(r#"{"source": "cos:1"}"#), "/source");
        assert_eq!(err_pointer(r#"{"extra": 1}"#), "/extra");
    }

    #[test]
    fn sweep_needs_tabulate() {
        let field = r#""field": {"kind": "linear", "regions": [{"params": {"a": 1.0}}], "growth": {"c1": 1, "c2": 1, "p": 2}}"#;
        let bad = format!(r#"{{{field}, "pipeline": ["tabulate", "sweep"]}}"#);
        assert_eq!(err_pointer(&bad), "/pipeline/1");
        let good = format!(r#"{{{field}, "pipeline": ["tabulate", "solve", "sweep"]}}"#);
        let c = ExperimentConfig::from_json(&good).unwrap();
        assert!(c.load_field(Path::new(".")).unwrap().is_some());
        assert_eq!(c.hash(), ExperimentConfig::from_json(&good).unwrap().hash());
    }
}
