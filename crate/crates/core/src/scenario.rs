//! Declarative scenario files.
//!
//! A scenario is a single UTF-8 JSON document describing the Hilbert space
//! (as a list of subsystem dimensions), an initial state, a time grid, one
//! evolution per interval and a list of observers with the measurements they
//! perform. Complex numbers are `[re, im]` pairs and matrices are row-major
//! nested arrays. Unknown fields are rejected everywhere. The grammar is
//! documented in `docs/format.md`.
//!
//! Parsing ([`parse_scenario`]) checks structure: shapes, names, times and
//! dimensions. Numerical checks (Hermiticity, unitarity, normalization,
//! decomposition validity) happen in [`resolve`].

use std::fmt;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::histories::{HistoryError, HistoryFamily, SlotSpec, TimeGrid, DEFAULT_MAX_HISTORIES};
use crate::linalg::{self, ComplexMatrix, Ket, LinalgError, Tolerance, C64};
use crate::stablefacts::ObserverRecord;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MAX_DIM: usize = 64;

pub const OPERATOR_NAMES: [&str; 4] = ["sigma_x", "sigma_y", "sigma_z", "identity"];
pub const PRESET_NAMES: [&str; 6] = ["up_z", "down_z", "plus_x", "minus_x", "plus_y", "minus_y"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unknown field `{field}`")]
    UnknownField { path: String, field: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: expected dimension {expected}, got {got}")]
    DimMismatch { path: String, expected: usize, got: usize },
    #[error(
        "{path}: unknown operator `{name}` (expected one of sigma_x, sigma_y, sigma_z, identity, optionally with @k)"
    )]
    UnknownOperatorName { path: String, name: String },
    #[error("{path}: unknown state preset `{name}`")]
    UnknownPreset { path: String, name: String },
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    UnsupportedFormat { found: u32 },
    #[error("{path}: {source}")]
    Build {
        path: String,
        #[source]
        source: HistoryError,
    },
    #[error("{path}: {source}")]
    Linalg {
        path: String,
        #[source]
        source: LinalgError,
    },
}

pub type Result<T, E = ScenarioError> = std::result::Result<T, E>;

/// Row-major nested rows of complex entries.
pub type MatrixRows = Vec<Vec<C64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub subsystem_dims: Vec<usize>,
    pub initial_state: InitialState,
    pub times: Vec<String>,
    /// One per interval. May be omitted in the file, in which case every
    /// interval is the identity; always written out explicitly.
    #[serde(default)]
    pub evolutions: Vec<EvolutionSpec>,
    pub observers: Vec<ObserverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceOverrides>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// One qubit preset per subsystem, tensored in order.
    Presets(Vec<String>),
    Amplitudes(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvolutionSpec {
    Identity,
    Matrix(MatrixRows),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    pub name: String,
    pub measurements: Vec<MeasurementSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub time: String,
    pub observable: ObservableSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableSpec {
    /// `sigma_x`, `sigma_y`, `sigma_z` or `identity`, optionally `@k` for the
    /// k-th subsystem (1-based).
    Named(String),
    Hermitian(MatrixRows),
    Projectors(Vec<LabeledProjector>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledProjector {
    pub label: String,
    pub matrix: MatrixRows,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_herm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_proj: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_comm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_cons: Option<f64>,
}

// --- serde for the string-or-object shapes -------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmplitudesRepr {
    amplitudes: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    matrix: MatrixRows,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitObservable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hermitian: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    projectors: Option<Vec<LabeledProjector>>,
}

impl Serialize for InitialState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            InitialState::Presets(p) if p.len() == 1 => s.serialize_str(&p[0]),
            InitialState::Presets(p) => p.serialize(s),
            InitialState::Amplitudes(a) => AmplitudesRepr { amplitudes: a.clone() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = InitialState;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a preset name, a list of preset names, or {\"amplitudes\": [...]}")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Ok(InitialState::Presets(vec![v.to_string()]))
            }
            fn visit_seq<A: SeqAccess<'de>>(self, seq: A) -> Result<Self::Value, A::Error> {
                Vec::<String>::deserialize(de::value::SeqAccessDeserializer::new(seq)).map(InitialState::Presets)
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                AmplitudesRepr::deserialize(de::value::MapAccessDeserializer::new(map))
                    .map(|r| InitialState::Amplitudes(r.amplitudes))
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for EvolutionSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EvolutionSpec::Identity => s.serialize_str("identity"),
            EvolutionSpec::Matrix(m) => MatrixRepr { matrix: m.clone() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for EvolutionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = EvolutionSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"identity\" or {\"matrix\": [[...]]}")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "identity" {
                    Ok(EvolutionSpec::Identity)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                MatrixRepr::deserialize(de::value::MapAccessDeserializer::new(map))
                    .map(|r| EvolutionSpec::Matrix(r.matrix))
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for ObservableSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ObservableSpec::Named(n) => s.serialize_str(n),
            ObservableSpec::Hermitian(m) => ExplicitObservable {
                hermitian: Some(m.clone()),
                projectors: None,
            }
            .serialize(s),
            ObservableSpec::Projectors(p) => ExplicitObservable {
                hermitian: None,
                projectors: Some(p.clone()),
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ObservableSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ObservableSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an operator name, {\"hermitian\": [[...]]} or {\"projectors\": [...]}")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Ok(ObservableSpec::Named(v.to_string()))
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                let e = ExplicitObservable::deserialize(de::value::MapAccessDeserializer::new(map))?;
                match (e.hermitian, e.projectors) {
                    (Some(m), None) => Ok(ObservableSpec::Hermitian(m)),
                    (None, Some(p)) => Ok(ObservableSpec::Projectors(p)),
                    _ => Err(de::Error::custom("expected exactly one of `hermitian` or `projectors`")),
                }
            }
        }
        d.deserialize_any(V)
    }
}

// --- parsing ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Largest allowed total Hilbert space dimension.
    pub max_dim: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

fn display_path(path: &serde_path_to_error::Path) -> String {
    let p = path.to_string();
    if p == "." {
        "$".to_string()
    } else {
        format!("$.{p}")
    }
}

fn map_serde_error(err: serde_path_to_error::Error<serde_json::Error>) -> ScenarioError {
    let path = display_path(err.path());
    let inner = err.into_inner();
    match inner.classify() {
        serde_json::error::Category::Syntax | serde_json::error::Category::Eof | serde_json::error::Category::Io => {
            ScenarioError::Syntax {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        }
        serde_json::error::Category::Data => {
            let message = inner.to_string();
            if let Some(rest) = message.strip_prefix("unknown field `") {
                let field = rest.split('`').next().unwrap_or_default().to_string();
                ScenarioError::UnknownField { path, field }
            } else {
                ScenarioError::Invalid { path, message }
            }
        }
    }
}

/// Parses and structurally validates a scenario document.
pub fn parse_scenario(text: &[u8]) -> Result<Scenario> {
    parse_scenario_with(text, &ParseOptions::default())
}

pub fn parse_scenario_with(text: &[u8], options: &ParseOptions) -> Result<Scenario> {
    let text = std::str::from_utf8(text).map_err(|e| ScenarioError::Syntax {
        line: 0,
        column: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let mut de = serde_json::Deserializer::from_str(text);
    let mut scenario: Scenario = serde_path_to_error::deserialize(&mut de).map_err(map_serde_error)?;
    de.end().map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if scenario.evolutions.is_empty() && scenario.times.len() > 1 {
        scenario.evolutions = vec![EvolutionSpec::Identity; scenario.times.len() - 1];
    }
    scenario.validate(options)?;
    Ok(scenario)
}

/// Canonical pretty-printed JSON; every defaulted field is written out.
pub fn serialize_scenario(scenario: &Scenario) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(scenario).expect("scenario serializes");
    out.push(b'\n');
    out
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

fn check_matrix(path: &str, m: &MatrixRows, dim: usize) -> Result<()> {
    if m.len() != dim {
        return Err(ScenarioError::DimMismatch {
            path: path.to_string(),
            expected: dim,
            got: m.len(),
        });
    }
    for (r, row) in m.iter().enumerate() {
        if row.len() != dim {
            return Err(ScenarioError::DimMismatch {
                path: format!("{path}[{r}]"),
                expected: dim,
                got: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid(format!("{path}[{r}][{c}]"), "entry is not finite"));
        }
    }
    Ok(())
}

/// A parsed `name[@k]` operator reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NamedOperator {
    pub kind: OperatorKind,
    /// 0-based subsystem, if addressed.
    pub factor: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    SigmaX,
    SigmaY,
    SigmaZ,
    Identity,
}

impl NamedOperator {
    /// Parses and checks a name against the subsystem layout.
    pub fn parse(name: &str, dims: &[usize], path: &str) -> Result<Self> {
        let unknown = || ScenarioError::UnknownOperatorName {
            path: path.to_string(),
            name: name.to_string(),
        };
        let (base, factor) = match name.split_once('@') {
            Some((base, idx)) => {
                let k: usize = idx.parse().map_err(|_| unknown())?;
                if k == 0 || k > dims.len() {
                    return Err(invalid(
                        path,
                        format!("subsystem index {k} out of range 1..={}", dims.len()),
                    ));
                }
                (base, Some(k - 1))
            }
            None => (name, None),
        };
        let kind = match base {
            "sigma_x" => OperatorKind::SigmaX,
            "sigma_y" => OperatorKind::SigmaY,
            "sigma_z" => OperatorKind::SigmaZ,
            "identity" => OperatorKind::Identity,
            _ => return Err(unknown()),
        };
        if kind != OperatorKind::Identity {
            let factor = match factor {
                Some(f) => f,
                None if dims.len() == 1 => 0,
                None => {
                    return Err(invalid(
                        path,
                        format!("`{name}` needs a subsystem index (@k) with {} subsystems", dims.len()),
                    ))
                }
            };
            if dims[factor] != 2 {
                return Err(invalid(
                    path,
                    format!(
                        "Pauli operators need a qubit, subsystem {} has dimension {}",
                        factor + 1,
                        dims[factor]
                    ),
                ));
            }
        }
        Ok(NamedOperator { kind, factor })
    }

    /// The operator on the full space.
    pub fn matrix(&self, dims: &[usize]) -> ComplexMatrix {
        let local = match self.kind {
            OperatorKind::SigmaX => linalg::sigma_x(),
            OperatorKind::SigmaY => linalg::sigma_y(),
            OperatorKind::SigmaZ => linalg::sigma_z(),
            OperatorKind::Identity => {
                return ComplexMatrix::identity(dims.iter().product());
            }
        };
        let factor = self.factor.unwrap_or(0);
        linalg::embed_operator(&local, factor, dims).expect("validated layout")
    }
}

/// Single-qubit preset states.
pub fn preset_ket(name: &str) -> Option<Ket> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = match name {
        "up_z" => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        "down_z" => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        "plus_x" => (C64::new(h, 0.0), C64::new(h, 0.0)),
        "minus_x" => (C64::new(h, 0.0), C64::new(-h, 0.0)),
        "plus_y" => (C64::new(h, 0.0), C64::new(0.0, h)),
        "minus_y" => (C64::new(h, 0.0), C64::new(0.0, -h)),
        _ => return None,
    };
    Some(Ket::new(vec![a, b]).expect("finite"))
}

impl Scenario {
    pub fn total_dim(&self) -> usize {
        self.subsystem_dims.iter().product()
    }

    /// Structural checks: shapes, names, times, dimensions.
    pub fn validate(&self, options: &ParseOptions) -> Result<()> {
        if self.format != FORMAT_VERSION {
            return Err(ScenarioError::UnsupportedFormat { found: self.format });
        }
        let dims = &self.subsystem_dims;
        if dims.is_empty() {
            return Err(invalid("$.subsystem_dims", "at least one subsystem is required"));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(invalid(
                format!("$.subsystem_dims[{i}]"),
                "dimension must be at least 1",
            ));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if total > options.max_dim {
            return Err(invalid(
                "$.subsystem_dims",
                format!("total dimension {total} exceeds the cap of {}", options.max_dim),
            ));
        }

        match &self.initial_state {
            InitialState::Presets(names) => {
                if names.len() != dims.len() {
                    return Err(ScenarioError::DimMismatch {
                        path: "$.initial_state".into(),
                        expected: dims.len(),
                        got: names.len(),
                    });
                }
                for (i, name) in names.iter().enumerate() {
                    if preset_ket(name).is_none() {
                        return Err(ScenarioError::UnknownPreset {
                            path: format!("$.initial_state[{i}]"),
                            name: name.clone(),
                        });
                    }
                    if dims[i] != 2 {
                        return Err(invalid(
                            format!("$.initial_state[{i}]"),
                            format!("presets describe qubits, subsystem {} has dimension {}", i + 1, dims[i]),
                        ));
                    }
                }
            }
            InitialState::Amplitudes(a) => {
                if a.len() != total {
                    return Err(ScenarioError::DimMismatch {
                        path: "$.initial_state.amplitudes".into(),
                        expected: total,
                        got: a.len(),
                    });
                }
                if let Some(i) = a.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(invalid(
                        format!("$.initial_state.amplitudes[{i}]"),
                        "entry is not finite",
                    ));
                }
            }
        }

        if self.times.len() < 2 {
            return Err(invalid(
                "$.times",
                "at least two times (t0 and one measurement time) are required",
            ));
        }
        for (i, t) in self.times.iter().enumerate() {
            if self.times[..i].contains(t) {
                return Err(invalid(format!("$.times[{i}]"), format!("duplicate time `{t}`")));
            }
        }
        if self.evolutions.len() != self.times.len() - 1 {
            return Err(invalid(
                "$.evolutions",
                format!(
                    "expected {} evolutions, got {}",
                    self.times.len() - 1,
                    self.evolutions.len()
                ),
            ));
        }
        for (i, e) in self.evolutions.iter().enumerate() {
            if let EvolutionSpec::Matrix(m) = e {
                check_matrix(&format!("$.evolutions[{i}].matrix"), m, total)?;
            }
        }

        for (oi, obs) in self.observers.iter().enumerate() {
            let opath = format!("$.observers[{oi}]");
            if obs.name.is_empty() {
                return Err(invalid(format!("{opath}.name"), "observer name is empty"));
            }
            if self.observers[..oi].iter().any(|o| o.name == obs.name) {
                return Err(invalid(
                    format!("{opath}.name"),
                    format!("duplicate observer `{}`", obs.name),
                ));
            }
            for (mi, m) in obs.measurements.iter().enumerate() {
                let mpath = format!("{opath}.measurements[{mi}]");
                match self.times.iter().position(|t| *t == m.time) {
                    None => return Err(invalid(format!("{mpath}.time"), format!("unknown time `{}`", m.time))),
                    Some(0) => {
                        return Err(invalid(
                            format!("{mpath}.time"),
                            format!(
                                "`{}` is the initial time; measurements start at the second time",
                                m.time
                            ),
                        ))
                    }
                    Some(_) => {}
                }
                if obs.measurements[..mi].iter().any(|p| p.time == m.time) {
                    return Err(invalid(
                        format!("{mpath}.time"),
                        format!("observer `{}` already measures at `{}`", obs.name, m.time),
                    ));
                }
                let path = format!("{mpath}.observable");
                match &m.observable {
                    ObservableSpec::Named(name) => {
                        NamedOperator::parse(name, dims, &path)?;
                    }
                    ObservableSpec::Hermitian(mat) => check_matrix(&format!("{path}.hermitian"), mat, total)?,
                    ObservableSpec::Projectors(list) => {
                        if list.is_empty() {
                            return Err(invalid(format!("{path}.projectors"), "projector list is empty"));
                        }
                        for (pi, p) in list.iter().enumerate() {
                            if list[..pi].iter().any(|q| q.label == p.label) {
                                return Err(invalid(
                                    format!("{path}.projectors[{pi}].label"),
                                    format!("duplicate label `{}`", p.label),
                                ));
                            }
                            check_matrix(&format!("{path}.projectors[{pi}].matrix"), &p.matrix, total)?;
                        }
                    }
                }
            }
        }

        if let Some(t) = &self.tolerance {
            t.apply(Tolerance::default()).map_err(|source| ScenarioError::Linalg {
                path: "$.tolerance".into(),
                source,
            })?;
        }
        Ok(())
    }

    /// Tolerance with this scenario's overrides applied on top of `base`.
    pub fn tolerance(&self, base: Tolerance) -> Result<Tolerance> {
        match &self.tolerance {
            None => Ok(base),
            Some(t) => t.apply(base).map_err(|source| ScenarioError::Linalg {
                path: "$.tolerance".into(),
                source,
            }),
        }
    }

    pub fn observer(&self, name: &str) -> Option<&ObserverSpec> {
        self.observers.iter().find(|o| o.name == name)
    }
}

impl ToleranceOverrides {
    pub fn apply(&self, base: Tolerance) -> Result<Tolerance, LinalgError> {
        Tolerance::new(
            self.eps_norm.unwrap_or(base.norm()),
            self.eps_herm.unwrap_or(base.herm()),
            self.eps_proj.unwrap_or(base.proj()),
            self.eps_comm.unwrap_or(base.comm()),
            self.eps_cons.unwrap_or(base.cons()),
        )
    }
}

fn to_matrix(path: &str, rows: &MatrixRows) -> Result<ComplexMatrix> {
    ComplexMatrix::from_rows(rows).map_err(|source| ScenarioError::Linalg {
        path: path.to_string(),
        source,
    })
}

/// Builds one observer family per observer.
pub fn resolve(scenario: &Scenario) -> Result<Vec<ObserverRecord>> {
    resolve_with(
        scenario,
        &scenario.tolerance(Tolerance::default())?,
        DEFAULT_MAX_HISTORIES,
    )
}

pub fn resolve_with(scenario: &Scenario, tol: &Tolerance, max_histories: usize) -> Result<Vec<ObserverRecord>> {
    scenario.validate(&ParseOptions { max_dim: usize::MAX })?;
    let dims = &scenario.subsystem_dims;
    let total = scenario.total_dim();

    let initial = match &scenario.initial_state {
        InitialState::Presets(names) => names
            .iter()
            .map(|n| preset_ket(n).expect("validated preset"))
            .reduce(|acc, k| acc.tensor(&k))
            .expect("at least one subsystem"),
        InitialState::Amplitudes(a) => Ket::new(a.clone()).map_err(|source| ScenarioError::Linalg {
            path: "$.initial_state.amplitudes".into(),
            source,
        })?,
    };
    let grid = TimeGrid::new(scenario.times.iter().cloned()).map_err(|source| ScenarioError::Build {
        path: "$.times".into(),
        source,
    })?;
    let evolutions = scenario
        .evolutions
        .iter()
        .enumerate()
        .map(|(i, e)| match e {
            EvolutionSpec::Identity => Ok(ComplexMatrix::identity(total)),
            EvolutionSpec::Matrix(m) => to_matrix(&format!("$.evolutions[{i}].matrix"), m),
        })
        .collect::<Result<Vec<_>>>()?;

    scenario
        .observers
        .iter()
        .enumerate()
        .map(|(oi, obs)| {
            let opath = format!("$.observers[{oi}]");
            let mut slots = vec![SlotSpec::Trivial; grid.slot_count()];
            for (mi, m) in obs.measurements.iter().enumerate() {
                let path = format!("{opath}.measurements[{mi}].observable");
                let slot = grid.slot_of(&m.time).expect("validated time");
                slots[slot] = match &m.observable {
                    ObservableSpec::Named(name) => {
                        let op = NamedOperator::parse(name, dims, &path)?;
                        if op.kind == OperatorKind::Identity {
                            SlotSpec::Trivial
                        } else {
                            SlotSpec::Observable(op.matrix(dims))
                        }
                    }
                    ObservableSpec::Hermitian(rows) => {
                        SlotSpec::Observable(to_matrix(&format!("{path}.hermitian"), rows)?)
                    }
                    ObservableSpec::Projectors(list) => SlotSpec::Projectors(
                        list.iter()
                            .enumerate()
                            .map(|(pi, p)| {
                                Ok((
                                    p.label.clone(),
                                    to_matrix(&format!("{path}.projectors[{pi}].matrix"), &p.matrix)?,
                                ))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    ),
                };
            }
            let family = HistoryFamily::build(
                initial.clone(),
                grid.clone(),
                evolutions.clone(),
                slots,
                tol,
                max_histories,
            )
            .map_err(|source| ScenarioError::Build {
                path: build_error_path(&opath, &source, obs, &scenario.times),
                source,
            })?;
            Ok(ObserverRecord::new(obs.name.clone(), family))
        })
        .collect()
}

fn build_error_path(opath: &str, err: &HistoryError, obs: &ObserverSpec, times: &[String]) -> String {
    match err {
        HistoryError::NotNormalized { .. } => "$.initial_state".to_string(),
        HistoryError::NotUnitaryEvolution { index } => format!("$.evolutions[{index}]"),
        HistoryError::BadDecomposition { slot, .. } => times
            .get(slot + 1)
            .and_then(|t| obs.measurements.iter().position(|m| m.time == *t))
            .map(|mi| format!("{opath}.measurements[{mi}].observable"))
            .unwrap_or_else(|| opath.to_string()),
        _ => opath.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "format": 1,
        "name": "minimal",
        "subsystem_dims": [2],
        "initial_state": "up_z",
        "times": ["t0", "t1"],
        "observers": [
            {"name": "O", "measurements": [{"time": "t1", "observable": "sigma_z"}]}
        ]
    }"#;

    fn with(replace: &str, by: &str) -> String {
        assert!(MINIMAL.contains(replace), "{replace}");
        MINIMAL.replacen(replace, by, 1)
    }

    #[test]
    fn minimal_document() {
        let s = parse_scenario(MINIMAL.as_bytes()).unwrap();
        assert_eq!(s.observers.len(), 1);
        assert_eq!(s.evolutions, vec![EvolutionSpec::Identity]);
        let records = resolve(&s).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].family().slots().len(), 1);
        assert_eq!(records[0].family().histories().len(), 2);
    }

    #[test]
    fn unknown_operator_is_reported_with_path() {
        let err = parse_scenario(with("\"sigma_z\"", "\"sigma_q\"").as_bytes()).unwrap_err();
        assert_eq!(
            err,
            ScenarioError::UnknownOperatorName {
                path: "$.observers[0].measurements[0].observable".into(),
                name: "sigma_q".into()
            }
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse_scenario(with("\"name\": \"minimal\",", "\"name\": \"minimal\", \"colour\": 3,").as_bytes())
            .unwrap_err();
        assert!(
            matches!(err, ScenarioError::UnknownField { ref field, .. } if field == "colour"),
            "{err:?}"
        );

        let err = parse_scenario(with("\"time\": \"t1\",", "\"time\": \"t1\", \"tme\": 1,").as_bytes()).unwrap_err();
        match err {
            ScenarioError::UnknownField { path, field } => {
                assert_eq!(field, "tme");
                assert!(path.contains("observers[0].measurements[0]"), "{path}");
            }
            other => panic!("{other:?}"),
        }

        let err = parse_scenario(
            with(
                "\"sigma_z\"",
                "{\"hermitian\": [[[1,0],[0,0]],[[0,0],[-1,0]]], \"extra\": 1}",
            )
            .as_bytes(),
        )
        .unwrap_err();
        assert!(
            matches!(err, ScenarioError::UnknownField { ref field, .. } if field == "extra"),
            "{err:?}"
        );

        let both = with(
            "\"sigma_z\"",
            "{\"hermitian\": [[[1,0],[0,0]],[[0,0],[-1,0]]], \"projectors\": []}",
        );
        assert!(matches!(
            parse_scenario(both.as_bytes()).unwrap_err(),
            ScenarioError::Invalid { .. }
        ));
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = parse_scenario(b"{\n  \"format\": 1,\n  oops }").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 3, .. }), "{err:?}");
        assert!(matches!(parse_scenario(b"").unwrap_err(), ScenarioError::Syntax { .. }));
        assert!(matches!(
            parse_scenario(&[0xff, 0xfe]).unwrap_err(),
            ScenarioError::Syntax { .. }
        ));
    }

    #[test]
    fn format_version_is_required() {
        let err = parse_scenario(with("\"format\": 1", "\"format\": 2").as_bytes()).unwrap_err();
        assert_eq!(err, ScenarioError::UnsupportedFormat { found: 2 });
        let err = parse_scenario(with("\"format\": 1,", "").as_bytes()).unwrap_err();
        assert!(
            matches!(err, ScenarioError::Invalid { ref message, .. } if message.contains("format")),
            "{err:?}"
        );
    }

    #[test]
    fn dimension_errors() {
        let err = parse_scenario(with("\"sigma_z\"", "{\"hermitian\": [[[1,0]]]}").as_bytes()).unwrap_err();
        assert!(
            matches!(
                err,
                ScenarioError::DimMismatch {
                    expected: 2,
                    got: 1,
                    ..
                }
            ),
            "{err:?}"
        );

        let err = parse_scenario(with("\"up_z\"", "[\"up_z\", \"up_z\"]").as_bytes()).unwrap_err();
        assert!(matches!(err, ScenarioError::DimMismatch { .. }), "{err:?}");

        let err = parse_scenario(with("\"up_z\"", "{\"amplitudes\": [[1,0]]}").as_bytes()).unwrap_err();
        assert_eq!(
            err,
            ScenarioError::DimMismatch {
                path: "$.initial_state.amplitudes".into(),
                expected: 2,
                got: 1
            }
        );

        let big = with("[2]", "[4, 4, 5]").replace("\"up_z\"", "{\"amplitudes\": []}");
        assert!(matches!(
            parse_scenario(big.as_bytes()).unwrap_err(),
            ScenarioError::Invalid { .. }
        ));
    }

    #[test]
    fn named_operator_rules() {
        let dims = [2, 3];
        assert!(NamedOperator::parse("sigma_x", &dims, "p").is_err());
        assert!(NamedOperator::parse("sigma_x@2", &dims, "p").is_err());
        assert!(NamedOperator::parse("sigma_x@3", &dims, "p").is_err());
        assert!(matches!(
            NamedOperator::parse("sigma_x@one", &dims, "p"),
            Err(ScenarioError::UnknownOperatorName { .. })
        ));
        let op = NamedOperator::parse("sigma_z@1", &[2, 2], "p").unwrap();
        assert_eq!(
            op.matrix(&[2, 2]),
            linalg::tensor_product(&linalg::sigma_z(), &ComplexMatrix::identity(2))
        );
        let op = NamedOperator::parse("sigma_x", &[2], "p").unwrap();
        assert_eq!(op.matrix(&[2]), linalg::sigma_x());
        let op = NamedOperator::parse("identity", &dims, "p").unwrap();
        assert_eq!(op.matrix(&dims), ComplexMatrix::identity(6));
    }

    #[test]
    fn measurement_time_rules() {
        let err = parse_scenario(with("\"time\": \"t1\"", "\"time\": \"t0\"").as_bytes()).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref path, .. } if path.ends_with(".time")));
        let err = parse_scenario(with("\"time\": \"t1\"", "\"time\": \"t9\"").as_bytes()).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { .. }));
        let twice = with(
            "{\"time\": \"t1\", \"observable\": \"sigma_z\"}",
            "{\"time\": \"t1\", \"observable\": \"sigma_z\"}, {\"time\": \"t1\", \"observable\": \"sigma_x\"}",
        );
        assert!(matches!(
            parse_scenario(twice.as_bytes()).unwrap_err(),
            ScenarioError::Invalid { .. }
        ));
    }

    #[test]
    fn resolve_errors_are_path_qualified() {
        let s = with("\"up_z\"", "{\"amplitudes\": [[1,0],[1,0]]}");
        let err = resolve(&parse_scenario(s.as_bytes()).unwrap()).unwrap_err();
        assert!(
            matches!(err, ScenarioError::Build { ref path, .. } if path == "$.initial_state"),
            "{err:?}"
        );

        let s = with(
            "\"times\": [\"t0\", \"t1\"],",
            "\"times\": [\"t0\", \"t1\"], \"evolutions\": [{\"matrix\": [[[1,0],[1,0]],[[0,0],[1,0]]]}],",
        );
        let err = resolve(&parse_scenario(s.as_bytes()).unwrap()).unwrap_err();
        assert!(
            matches!(err, ScenarioError::Build { ref path, .. } if path == "$.evolutions[0]"),
            "{err:?}"
        );

        let s = with("\"sigma_z\"", "{\"hermitian\": [[[0,0],[1,0]],[[0,0],[0,0]]]}");
        let err = resolve(&parse_scenario(s.as_bytes()).unwrap()).unwrap_err();
        assert!(
            matches!(err, ScenarioError::Build { ref path, .. } if path == "$.observers[0].measurements[0].observable"),
            "{err:?}"
        );
    }

    #[test]
    fn serialization_is_canonical_and_round_trips() {
        let s = parse_scenario(MINIMAL.as_bytes()).unwrap();
        let text = String::from_utf8(serialize_scenario(&s)).unwrap();
        assert!(text.contains("\"evolutions\": [\n    \"identity\"\n  ]"), "{text}");
        assert_eq!(parse_scenario(text.as_bytes()).unwrap(), s);

        let amp = with("\"up_z\"", "{\"amplitudes\": [[0.6, 0.1], [-0.1, 0.7810249675906654]]}");
        let s = parse_scenario(amp.as_bytes()).unwrap();
        let back = parse_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(back, s);
        match back.initial_state {
            InitialState::Amplitudes(a) => assert_eq!(a[1], C64::new(-0.1, 0.7810249675906654)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tolerance_overrides() {
        let s = with("\"observers\"", "\"tolerance\": {\"eps_cons\": 1e-6}, \"observers\"");
        let s = parse_scenario(s.as_bytes()).unwrap();
        let t = s.tolerance(Tolerance::default()).unwrap();
        assert_eq!(t.cons(), 1e-6);
        assert_eq!(t.comm(), 1e-9);

        let bad = with("\"observers\"", "\"tolerance\": {\"eps_cons\": 0.5}, \"observers\"");
        assert!(matches!(
            parse_scenario(bad.as_bytes()).unwrap_err(),
            ScenarioError::Linalg { .. }
        ));
        let typo = with("\"observers\"", "\"tolerance\": {\"eps_con\": 1e-6}, \"observers\"");
        assert!(matches!(
            parse_scenario(typo.as_bytes()).unwrap_err(),
            ScenarioError::UnknownField { .. }
        ));
    }

    #[test]
    fn resolve_is_deterministic() {
        let a = resolve(&parse_scenario(MINIMAL.as_bytes()).unwrap()).unwrap();
        let b = resolve(&parse_scenario(MINIMAL.as_bytes()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    mod roundtrip {
        use super::*;
        use crate::sample::random_scenario;
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn serialize_then_parse_is_identity(seed in any::<u64>()) {
                let s = random_scenario(&mut ChaCha8Rng::seed_from_u64(seed));
                s.validate(&ParseOptions::default()).unwrap();
                let back = parse_scenario(&serialize_scenario(&s)).unwrap();
                prop_assert_eq!(&back, &s);
                prop_assert!(resolve(&back).is_ok());
            }
        }
    }
}
