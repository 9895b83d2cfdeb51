//! Scenario files: one JSON document per domain or exterior.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::PolytopeDomain;
use crate::dsl::{Expression, ParseError, ParseOptions, Params};
use crate::imcf::{ExteriorTolerances, RotSymExterior};
use crate::morrey::MorreyConfig;
use crate::riemann::{self, MetricField};
use crate::surface::{NormalWeights, SurfaceOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{} at {field}: {source}", source.kind_name())]
    Expression { field: String, source: ParseError },
    #[error("missing field `{field}` ({message})")]
    Missing { field: String, message: String },
    #[error("invalid value at {field}: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    /// The field the error refers to, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Io { .. } => None,
            ScenarioError::Schema { path, .. } => Some(path),
            ScenarioError::Expression { field, .. }
            | ScenarioError::Missing { field, .. }
            | ScenarioError::Invalid { field, .. } => Some(field),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Polytope,
    Exterior,
}

/// Metric block: `"euclidean"`, `{"conformal": f}` for `e^{2f} g0`, or
/// `{"upper": [[g11, g12, ...], [g22, ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Euclidean,
    Conformal(String),
    Upper(Vec<Vec<String>>),
}

/// Every tolerance used by the checks, with defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Required `|F_λ − 1|` at surface samples.
    pub surface_residual: f64,
    /// Slack in `H − ‖dN‖_tr ≥ V_λ`.
    pub proposition: f64,
    /// Slack in `‖dN_i‖_tr ≤ H_g`.
    pub lemma: f64,
    pub matching_angle: f64,
    pub mc_comparison: f64,
    /// Floor on `|∇u_i|` at boundary samples.
    pub regular_value: f64,
    /// Agreement of independently computed quantities.
    pub cross_check: f64,
    /// Agreement of `dN` with finite differences.
    pub finite_difference: f64,
    pub exterior_inequality: f64,
    pub scalar_curvature: f64,
    pub monotone: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let ext = ExteriorTolerances::default();
        Self {
            surface_residual: 1e-12,
            proposition: 1e-8,
            lemma: 1e-8,
            matching_angle: 1e-8,
            mc_comparison: 1e-8,
            regular_value: crate::domain::REGULAR_VALUE_FLOOR,
            cross_check: 1e-8,
            finite_difference: 1e-5,
            exterior_inequality: ext.inequality,
            scalar_curvature: ext.curvature,
            monotone: ext.monotone,
        }
    }
}

impl Tolerances {
    pub fn exterior(&self) -> ExteriorTolerances {
        ExteriorTolerances {
            inequality: self.exterior_inequality,
            curvature: self.scalar_curvature,
            monotone: self.monotone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorreySettings {
    pub sigma: f64,
    pub r_min: f64,
    pub radii: usize,
    pub half_radii: bool,
}

impl Default for MorreySettings {
    fn default() -> Self {
        let d = MorreyConfig::default();
        Self {
            sigma: d.sigma,
            r_min: d.r_min,
            radii: d.radii,
            half_radii: d.half_radii,
        }
    }
}

/// The file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub defining_functions: Option<Vec<String>>,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: Option<Vec<f64>>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub morrey: MorreySettings,
    #[serde(default)]
    pub rays: Option<usize>,
    #[serde(default)]
    pub normal_weights: NormalWeights,
    #[serde(default)]
    pub hypothesis_samples: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub warp: Option<String>,
    #[serde(default)]
    pub s0: Option<f64>,
    #[serde(default)]
    pub s_max: Option<f64>,
    #[serde(default)]
    pub flow_rows: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PolytopeScenario {
    pub domain: PolytopeDomain,
    pub surface: SurfaceOptions,
    pub hypothesis_samples: usize,
}

#[derive(Debug, Clone)]
pub struct ExteriorScenario {
    pub exterior: RotSymExterior,
    pub flow_rows: usize,
}

#[derive(Debug, Clone)]
pub enum ScenarioBody {
    Polytope(PolytopeScenario),
    Exterior(ExteriorScenario),
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub body: ScenarioBody,
    /// λ list, ray count and Morrey settings combined.
    pub morrey: MorreyConfig,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.file.kind
    }

    pub fn dim(&self) -> usize {
        match &self.body {
            ScenarioBody::Polytope(p) => p.domain.dim(),
            ScenarioBody::Exterior(_) => 3,
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    validate(file)
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn missing(field: &str, kind: &str) -> ScenarioError {
    ScenarioError::Missing {
        field: field.into(),
        message: format!("required for {kind} scenarios"),
    }
}

fn parse_expr(text: &str, field: String, opts: &ParseOptions) -> Result<Expression, ScenarioError> {
    Expression::parse_with(text, opts).map_err(|source| ScenarioError::Expression { field, source })
}

pub fn validate(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    if file.name.is_empty()
        || !file
            .name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    {
        return Err(invalid("name", "use letters, digits, '-' and '_' only"));
    }
    let defaults = MorreyConfig::default();
    let morrey = MorreyConfig {
        sigma: file.morrey.sigma,
        r_min: file.morrey.r_min,
        radii: file.morrey.radii,
        half_radii: file.morrey.half_radii,
        lambdas: file.lambdas.clone().unwrap_or(defaults.lambdas),
        rays: file.rays.unwrap_or(defaults.rays),
    };
    morrey.validate().map_err(|e| invalid("morrey", e.to_string()))?;
    if morrey.lambdas.is_empty() || morrey.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(invalid("lambdas", "need a nonempty list of positive values"));
    }
    let param_names: Vec<String> = file.parameters.keys().cloned().collect();
    let params: Params = file.parameters.clone();

    let body = match file.kind {
        ScenarioKind::Polytope => {
            let n = file.dimension.ok_or_else(|| missing("dimension", "polytope"))?;
            if !(2..=24).contains(&n) {
                return Err(invalid("dimension", format!("expected 2..=24, got {n}")));
            }
            let opts = ParseOptions::new(n).with_params(param_names.clone());
            let texts = file
                .defining_functions
                .as_ref()
                .ok_or_else(|| missing("defining_functions", "polytope"))?;
            if texts.is_empty() {
                return Err(invalid("defining_functions", "need at least one function"));
            }
            let faces = texts
                .iter()
                .enumerate()
                .map(|(i, t)| parse_expr(t, format!("defining_functions[{i}]"), &opts))
                .collect::<Result<Vec<_>, _>>()?;
            let metric = match &file.metric {
                MetricSpec::Euclidean => MetricField::euclidean(n),
                MetricSpec::Conformal(t) => {
                    let f = parse_expr(t, "metric.conformal".into(), &opts)?;
                    MetricField::conformal(&f).map_err(|e| invalid("metric.conformal", e.to_string()))?
                }
                MetricSpec::Upper(rows) => {
                    let parsed = rows
                        .iter()
                        .enumerate()
                        .map(|(i, r)| {
                            r.iter()
                                .enumerate()
                                .map(|(j, t)| parse_expr(t, format!("metric.upper[{i}][{j}]"), &opts))
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    MetricField::from_upper(n, parsed).map_err(|e| invalid("metric.upper", e.to_string()))?
                }
            };
            let seed = file.seed.clone().ok_or_else(|| missing("seed", "polytope"))?;
            if seed.len() != n {
                return Err(invalid("seed", format!("expected {n} coordinates, got {}", seed.len())));
            }
            riemann::metric_jet(&metric, &seed, &params).map_err(|e| invalid("metric", e.to_string()))?;
            let domain = PolytopeDomain::new(faces, metric, params, seed)
                .map_err(|e| invalid("seed", e.to_string()))?;
            let surface = SurfaceOptions {
                weights: file.normal_weights,
                residual_tol: file.tolerances.surface_residual,
                ..SurfaceOptions::default()
            };
            ScenarioBody::Polytope(PolytopeScenario {
                domain,
                surface,
                hypothesis_samples: file.hypothesis_samples.unwrap_or(256),
            })
        }
        ScenarioKind::Exterior => {
            if let Some(n) = file.dimension {
                if n != 3 {
                    return Err(invalid("dimension", "exteriors live in dimension 3"));
                }
            }
            let warp = file.warp.as_ref().ok_or_else(|| missing("warp", "exterior"))?;
            let s0 = file.s0.ok_or_else(|| missing("s0", "exterior"))?;
            let opts = ParseOptions::new(1).with_alias("s", 0).with_params(param_names);
            let phi = parse_expr(warp, "warp".into(), &opts)?;
            let exterior = RotSymExterior::new(phi, s0, file.s_max, params)
                .map_err(|e| invalid("warp", e.to_string()))?;
            ScenarioBody::Exterior(ExteriorScenario {
                exterior,
                flow_rows: file.flow_rows.unwrap_or(65).max(2),
            })
        }
    };
    Ok(Scenario {
        name: file.name.clone(),
        tolerances: file.tolerances,
        file,
        body,
        morrey,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = r#"{
        "name": "cube",
        "kind": "polytope",
        "dimension": 3,
        "defining_functions": ["x1 - 1", "-x1 - 1", "x2 - 1", "-x2 - 1", "x3 - 1", "-x3 - 1"],
        "seed": [0, 0, 0]
    }"#;

    #[test]
    fn loads_minimal_cube() {
        let s = parse_scenario(CUBE).unwrap();
        assert_eq!(s.dim(), 3);
        match &s.body {
            ScenarioBody::Polytope(p) => assert_eq!(p.domain.face_count(), 6),
            _ => panic!("wrong kind"),
        }
        assert_eq!(s.morrey.lambdas, vec![50.0, 100.0, 200.0, 400.0]);
        assert_eq!(s.tolerances.finite_difference, 1e-5);
    }

    #[test]
    fn variable_out_of_range_names_the_field() {
        let text = CUBE.replace("\"x2 - 1\"", "\"x4 - 1\"");
        let err = parse_scenario(&text).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.starts_with("variable index out of range at defining_functions[2]"),
            "{msg}"
        );
    }

    #[test]
    fn missing_seed_names_the_field() {
        let text = CUBE.replace(",\n        \"seed\": [0, 0, 0]", "");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.field(), Some("seed"));
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let text = CUBE.replace("\"seed\": [0, 0, 0]", "\"seed\": [0, \"a\", 0]");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(&err, ScenarioError::Schema { path, .. } if path == "seed[1]"), "{err}");
        let text = CUBE.replace("\"seed\"", "\"tolerances\": {\"lemma\": 1e-6, \"bogus\": 1}, \"seed\"");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("tolerances"), "{err}");
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        let text = CUBE.replace("\"x1 - 1\"", "\"x1 - a\"");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().starts_with("unknown identifier at defining_functions[0]"), "{err}");
        let text = text.replace("\"seed\"", "\"parameters\": {\"a\": 1.0}, \"seed\"");
        assert!(parse_scenario(&text).is_ok());
    }

    #[test]
    fn seed_outside_is_rejected() {
        let text = CUBE.replace("[0, 0, 0]", "[2, 0, 0]");
        assert_eq!(parse_scenario(&text).unwrap_err().field(), Some("seed"));
    }

    #[test]
    fn exterior_needs_warp() {
        let text = r#"{"name": "e", "kind": "exterior", "s0": 1.0}"#;
        assert_eq!(parse_scenario(text).unwrap_err().field(), Some("warp"));
        let text = r#"{"name": "e", "kind": "exterior", "s0": 3.0, "warp": "(1 - 2*m/s)^(-0.5)", "parameters": {"m": 1}}"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.kind(), ScenarioKind::Exterior);
    }

    #[test]
    fn metric_blocks() {
        let text = CUBE.replace("\"seed\"", "\"metric\": {\"conformal\": \"0.1*x1^2\"}, \"seed\"");
        assert!(parse_scenario(&text).is_ok());
        let text = CUBE.replace(
            "\"seed\"",
            "\"metric\": {\"upper\": [[\"1\", \"0\", \"0\"], [\"1\", \"0\"], [\"1\"]]}, \"seed\"",
        );
        assert!(parse_scenario(&text).is_ok());
        let text = CUBE.replace("\"seed\"", "\"metric\": {\"upper\": [[\"1\", \"0\"], [\"1\"]]}, \"seed\"");
        assert_eq!(parse_scenario(&text).unwrap_err().field(), Some("metric.upper"));
        let text = CUBE.replace("\"seed\"", "\"metric\": \"euclidean\", \"seed\"");
        assert!(parse_scenario(&text).is_ok());
    }
}
