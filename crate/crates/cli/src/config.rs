//! Experiment configuration: parsing, validation and resolution of map
//! references against the corpus.

use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use semireg::certify::{CertifyOptions, DescentConstants, DescentForm, DescentOracle};
use semireg::corpus::{self, Example};
use semireg::covering::{KaluzaInput, RoslInput, SelectionInput};
use semireg::moduli::{LiminfSchedule, ModulusKind};
use semireg::newton::{Constraint, DerivativeOracle, GeProblem, InexactnessModel, NewtonOptions};
use semireg::{GraphPoint, MapSpec, Matrix, NormKind, SetMap, Settings, Vector};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write reports: {0}")]
    Write(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] semireg::Error),
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

fn schema(msg: impl Into<String>) -> ConfigError {
    ConfigError::Schema(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Moduli,
    Certify,
    Cover,
    Solve,
    Suite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides `settings.norm` when present.
    #[serde(default)]
    pub norm: Option<NormKind>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moduli: Option<ModuliSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteSection>,
}

fn default_seed() -> u64 {
    semireg::rng::DEFAULT_SEED
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// A corpus name, or an inline map description.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum MapRef {
    Corpus(String),
    Inline(MapSpec),
}

impl<'de> Deserialize<'de> for MapRef {
    // Untagged enums swallow the inner error; parse by shape instead so a
    // typo inside an inline map is reported as such.
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => Ok(MapRef::Corpus(s)),
            v @ Value::Object(_) => serde_json::from_value(v).map(MapRef::Inline).map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("map must be a corpus name or an object, got {other}"))),
        }
    }
}

/// A graph point; `y` defaults to f(x) for single-valued maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuliSection {
    pub map: MapRef,
    #[serde(default)]
    pub point: Option<PointSpec>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<ModulusKind>,
    #[serde(default)]
    pub schedule: LiminfSchedule,
}

pub fn default_kinds() -> Vec<ModulusKind> {
    vec![ModulusKind::Lopen, ModulusKind::Semireg, ModulusKind::Sur, ModulusKind::Reg]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSpec {
    /// (x′, v′) = (y, y).
    Diagonal,
    /// The preimage of y nearest to x̄ within `reach`.
    NearestPreimage { reach: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub map: MapRef,
    #[serde(default)]
    pub point: Option<PointSpec>,
    pub form: DescentForm,
    pub constants: DescentConstants,
    #[serde(default = "default_oracle")]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub options: CertifyOptions,
}

fn default_oracle() -> OracleSpec {
    OracleSpec::Diagonal
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverSection {
    /// Covering of a single-valued f near a surjective matrix A.
    Kaluza { map: MapRef, a: Vec<Vec<f64>>, xbar: Vec<f64>, input: Value },
    /// Inner-product condition and the covering it grants.
    Rosl {
        map: MapRef,
        #[serde(default)]
        point: Option<PointSpec>,
        input: Value,
    },
    /// Calmness of the Picard selection of f⁻¹.
    Selection { map: MapRef, a: Vec<Vec<f64>>, xbar: Vec<f64>, input: Value },
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Corpus(String),
    Inline(InlineProblem),
}

impl<'de> Deserialize<'de> for ProblemRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => Ok(ProblemRef::Corpus(s)),
            v @ Value::Object(_) => serde_json::from_value(v).map(ProblemRef::Inline).map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("problem must be a corpus name or an object, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSpec {
    #[default]
    FiniteDifference,
    /// Seeded sampling of nearby Jacobians.
    Clarke,
}

/// f(x) + F(x) ∋ 0 with f given by expressions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    #[serde(default = "default_problem_name")]
    pub name: String,
    pub f: MapSpec,
    #[serde(default = "default_constraint")]
    pub constraint: Constraint,
    #[serde(default)]
    pub solution: Option<Vec<f64>>,
    #[serde(default)]
    pub derivative: DerivativeSpec,
}

fn default_problem_name() -> String {
    "inline".into()
}

fn default_constraint() -> Constraint {
    Constraint::Zero
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub problem: ProblemRef,
    /// Starting points; the corpus starts when empty.
    #[serde(default)]
    pub x0: Vec<Vec<f64>>,
    #[serde(default)]
    pub model: InexactnessModel,
    #[serde(default)]
    pub options: NewtonOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    /// The twelve acceptance criteria.
    Acceptance,
    /// lopen and semireg estimates plus their product identity.
    Moduli,
    /// Newton runs from the corpus starts.
    Solve,
    /// Every corpus reference value.
    Corpus,
}

impl std::str::FromStr for SuiteName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    pub name: SuiteName,
    /// Entries run concurrently on this many threads.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Map for the moduli suite; two_branch when absent.
    #[serde(default)]
    pub map: Option<String>,
    /// Problem for the solve suite; abs_newton when absent.
    #[serde(default)]
    pub problem: Option<String>,
}

fn default_workers() -> usize {
    1
}

impl SuiteSection {
    pub fn named(name: SuiteName) -> Self {
        SuiteSection { name, workers: default_workers(), map: None, problem: None }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> ConfigResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A config that runs `name` with every other field at its default.
    pub fn for_suite(name: SuiteName) -> Self {
        ExperimentConfig {
            command: Command::Suite,
            seed: default_seed(),
            norm: None,
            out: default_out(),
            settings: Settings::default(),
            moduli: None,
            certify: None,
            cover: None,
            solve: None,
            suite: Some(SuiteSection::named(name)),
        }
    }

    /// Exactly the section named by `command` must be present.
    pub fn validate(&self) -> ConfigResult<()> {
        let present = [
            (Command::Moduli, self.moduli.is_some()),
            (Command::Certify, self.certify.is_some()),
            (Command::Cover, self.cover.is_some()),
            (Command::Solve, self.solve.is_some()),
            (Command::Suite, self.suite.is_some()),
        ];
        for (cmd, here) in present {
            let key = serde_json::to_value(cmd).expect("command serializes");
            let key = key.as_str().unwrap_or_default();
            if cmd == self.command && !here {
                return Err(schema(format!("command `{key}` needs a `{key}` section")));
            }
            if cmd != self.command && here {
                return Err(schema(format!("section `{key}` does not belong to this command")));
            }
        }
        if let Some(s) = &self.suite {
            if s.workers == 0 {
                return Err(schema("suite.workers must be at least 1"));
            }
        }
        if let Some(m) = &self.moduli {
            if m.kinds.is_empty() {
                return Err(schema("moduli.kinds is empty"));
            }
            m.schedule.validate()?;
        }
        Ok(())
    }

    pub fn effective_settings(&self) -> Settings {
        match self.norm {
            Some(norm) => Settings { norm, ..self.settings },
            None => self.settings,
        }
    }
}

/// Replaces the `seed` of an input object by the global seed.
pub fn with_seed<T: serde::de::DeserializeOwned>(input: &Value, seed: u64) -> ConfigResult<T> {
    let mut v = input.clone();
    let obj = v.as_object_mut().ok_or_else(|| schema("input must be an object"))?;
    obj.insert("seed".into(), Value::from(seed));
    serde_json::from_value(v).map_err(|e| schema(e.to_string()))
}

pub fn kaluza_input(input: &Value, seed: u64) -> ConfigResult<KaluzaInput> {
    with_seed(input, seed)
}

pub fn rosl_input(input: &Value, seed: u64) -> ConfigResult<RoslInput> {
    with_seed(input, seed)
}

pub fn selection_input(input: &Value, seed: u64) -> ConfigResult<SelectionInput> {
    with_seed(input, seed)
}

pub fn matrix(rows: &[Vec<f64>]) -> ConfigResult<Matrix> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(schema("matrix must be a non-empty list of equal-length rows"));
    }
    Ok(Matrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// The map and base point named by `map`/`point`.
pub fn resolve_map(map: &MapRef, point: Option<&PointSpec>, seed: u64) -> ConfigResult<(SetMap, GraphPoint)> {
    let (f, default_point) = match map {
        MapRef::Inline(spec) => (spec.build()?, None),
        MapRef::Corpus(name) => match corpus::load_example(name, seed)?.example {
            Example::Map { map, point } => (map, Some(point)),
            Example::Sum { f, g, x, y, z } => (SetMap::sum(f, g)?, Some(GraphPoint::new(x, y + z))),
            Example::Linear { a } => {
                let (m, n) = a.shape();
                (SetMap::linear(a), Some(GraphPoint::new(Vector::zeros(n), Vector::zeros(m))))
            }
            Example::Problem { .. } => return Err(schema(format!("`{name}` is a generalized equation, not a map"))),
        },
    };
    let point = match (point, default_point) {
        (Some(p), _) => {
            let x = Vector::from_vec(p.x.clone());
            let y = match &p.y {
                Some(y) => Vector::from_vec(y.clone()),
                None if f.is_single_valued() => f.eval(&x)?,
                None => return Err(schema("point.y is required for a set-valued map")),
            };
            GraphPoint::new(x, y)
        }
        (None, Some(p)) => p,
        (None, None) => return Err(schema("an inline map needs a point")),
    };
    Ok((f, point))
}

pub fn resolve_oracle(spec: &OracleSpec, f: &SetMap, point: &GraphPoint, settings: &Settings) -> DescentOracle {
    match spec {
        OracleSpec::Diagonal => DescentOracle::diagonal(),
        OracleSpec::NearestPreimage { reach } => DescentOracle::nearest_preimage(f.clone(), point.x.clone(), *reach, *settings),
    }
}

pub struct ResolvedProblem {
    pub problem: GeProblem,
    pub derivative: DerivativeOracle,
    pub starts: Vec<Vector>,
}

pub fn resolve_problem(section: &SolveSection, seed: u64, settings: &Settings) -> ConfigResult<ResolvedProblem> {
    let (problem, derivative, corpus_starts) = match &section.problem {
        ProblemRef::Corpus(name) => match corpus::load_example(name, seed)?.example {
            Example::Problem { problem, derivative, starts } => (problem, derivative, starts),
            _ => return Err(schema(format!("`{name}` is not a generalized equation"))),
        },
        ProblemRef::Inline(p) => {
            let solution = p.solution.clone().map(Vector::from_vec);
            let problem = GeProblem::new(p.name.clone(), p.f.build()?, p.constraint.clone(), solution, settings.tol_feas)?;
            let derivative = match p.derivative {
                DerivativeSpec::FiniteDifference => DerivativeOracle::finite_difference(),
                DerivativeSpec::Clarke => DerivativeOracle::clarke(seed),
            };
            (problem, derivative, Vec::new())
        }
    };
    let starts: Vec<Vector> = if section.x0.is_empty() {
        corpus_starts
    } else {
        section.x0.iter().map(|x| Vector::from_vec(x.clone())).collect()
    };
    if starts.is_empty() {
        return Err(schema("solve.x0 is required for an inline problem"));
    }
    Ok(ResolvedProblem { problem, derivative, starts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"command": "suite", "suite": {"name": "corpus"}, "sede": 3}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(ConfigError::Schema(_))));
        let nested = r#"{"command": "moduli", "moduli": {"map": "two_branch", "shedule": {}}}"#;
        assert!(ExperimentConfig::from_json(nested).is_err());
    }

    #[test]
    fn sections_must_match_the_command() {
        let missing = r#"{"command": "solve"}"#;
        assert!(ExperimentConfig::from_json(missing).unwrap_err().to_string().contains("needs a `solve` section"));
        let extra = r#"{"command": "suite", "suite": {"name": "corpus"}, "solve": {"problem": "abs_newton"}}"#;
        assert!(ExperimentConfig::from_json(extra).is_err());
    }

    #[test]
    fn inline_map_errors_surface() {
        let cfg = r#"{"command": "moduli", "moduli": {"map": {"kind": "linear", "matrx": [[1]]}}}"#;
        let err = ExperimentConfig::from_json(cfg).unwrap_err().to_string();
        assert!(err.contains("matrx"), "{err}");
    }

    #[test]
    fn point_value_defaults_to_f_of_x() {
        let map: MapRef = serde_json::from_str(r#"{"kind": "single_valued", "dim": 1, "exprs": ["2*x1 + 1"]}"#).unwrap();
        let p = PointSpec { x: vec![0.5], y: None };
        let (_, gp) = resolve_map(&map, Some(&p), 0).unwrap();
        assert_eq!(gp.y[0], 2.0);
    }

    #[test]
    fn norm_flag_overrides_settings() {
        let mut cfg = ExperimentConfig::for_suite(SuiteName::Corpus);
        assert_eq!(cfg.effective_settings().norm, NormKind::Euclidean);
        cfg.norm = Some(NormKind::Max);
        assert_eq!(cfg.effective_settings().norm, NormKind::Max);
    }

    #[test]
    fn global_seed_replaces_input_seed() {
        let input = serde_json::json!({"ell": 2.0, "r": 0.2, "condition": "C2", "samples": 10, "seed": 1});
        assert_eq!(rosl_input(&input, 77).unwrap().seed, 77);
    }
}
