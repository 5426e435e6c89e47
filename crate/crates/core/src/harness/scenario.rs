use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::operators::OperatorSpec;
use crate::vecspace::{Grid, PairPoint, ToleranceConfig, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedGrid {
    pub name: String,
    pub lower: Vector,
    pub upper: Vector,
    pub spacing: f64,
}

impl NamedGrid {
    pub fn grid(&self) -> Result<Grid, HarnessError> {
        Grid::new(self.lower.clone(), self.upper.clone(), self.spacing)
            .map_err(|e| HarnessError::Validation(format!("grid '{}': {e}", self.name)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedOperator {
    pub name: String,
    /// Overrides the scenario dimension for this operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(flatten)]
    pub spec: OperatorSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    FitzInequality,
    ShiftIdentity,
    Theorem36,
    SupQuotient,
    NearConvexity,
    ConvDomain,
    SimonsLowerBound,
    Br,
    BrRandom,
    BlowupSequence,
    Monotone,
    MaximalityProbe,
}

impl CheckKind {
    pub const ALL: [CheckKind; 12] = [
        CheckKind::FitzInequality,
        CheckKind::ShiftIdentity,
        CheckKind::Theorem36,
        CheckKind::SupQuotient,
        CheckKind::NearConvexity,
        CheckKind::ConvDomain,
        CheckKind::SimonsLowerBound,
        CheckKind::Br,
        CheckKind::BrRandom,
        CheckKind::BlowupSequence,
        CheckKind::Monotone,
        CheckKind::MaximalityProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::FitzInequality => "fitz_inequality",
            CheckKind::ShiftIdentity => "shift_identity",
            CheckKind::Theorem36 => "theorem36",
            CheckKind::SupQuotient => "sup_quotient",
            CheckKind::NearConvexity => "near_convexity",
            CheckKind::ConvDomain => "conv_domain",
            CheckKind::SimonsLowerBound => "simons_lower_bound",
            CheckKind::Br => "br",
            CheckKind::BrRandom => "br_random",
            CheckKind::BlowupSequence => "blowup_sequence",
            CheckKind::Monotone => "monotone",
            CheckKind::MaximalityProbe => "maximality_probe",
        }
    }

    pub fn parse(s: &str) -> Option<CheckKind> {
        CheckKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Parameters that must be present.
    fn required(self) -> &'static [&'static str] {
        match self {
            CheckKind::ShiftIdentity => &["z", "zstar"],
            CheckKind::SupQuotient => &["z"],
            CheckKind::NearConvexity | CheckKind::ConvDomain => &["z", "p", "lambdas"],
            CheckKind::SimonsLowerBound => &["z", "zstar"],
            CheckKind::Br => &["x", "xstar", "alpha", "beta"],
            CheckKind::BrRandom => &["trials"],
            CheckKind::BlowupSequence => &["z", "ns"],
            _ => &[],
        }
    }

    /// Whether the check samples its target over a grid.
    fn needs_grid(self) -> bool {
        !matches!(self, CheckKind::ShiftIdentity)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zstar: Option<Vector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xstar: Option<Vector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    /// Random probe points drawn from the grid box (fitz_inequality).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Randomized trials (br_random).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Explicit probe points (fitz_inequality).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<PairPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zstar_probes: Option<Vec<Vector>>,
    /// Run against the inverse operator (primal and dual swapped).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverse: Option<bool>,
}

impl CheckParams {
    fn has(&self, field: &str) -> bool {
        match field {
            "z" => self.z.is_some(),
            "zstar" => self.zstar.is_some(),
            "x" => self.x.is_some(),
            "xstar" => self.xstar.is_some(),
            "p" => self.p.is_some(),
            "lambdas" => self.lambdas.is_some(),
            "ns" => self.ns.is_some(),
            "alpha" => self.alpha.is_some(),
            "beta" => self.beta.is_some(),
            "trials" => self.trials.is_some(),
            _ => false,
        }
    }

    fn vectors(&self) -> Vec<(&'static str, &Vector)> {
        let mut out = Vec::new();
        for (name, v) in [("z", &self.z), ("zstar", &self.zstar), ("x", &self.x), ("xstar", &self.xstar)] {
            if let Some(v) = v {
                out.push((name, v));
            }
        }
        for v in self.zstar_probes.iter().flatten() {
            out.push(("zstar_probes", v));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub check: CheckKind,
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default)]
    pub params: CheckParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub dimension: usize,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub grids: Vec<NamedGrid>,
    #[serde(default)]
    pub operators: Vec<NamedOperator>,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn operator(&self, name: &str) -> Option<&NamedOperator> {
        self.operators.iter().find(|o| o.name == name)
    }

    pub fn grid(&self, name: &str) -> Option<&NamedGrid> {
        self.grids.iter().find(|g| g.name == name)
    }

    pub fn operator_dim(&self, op: &NamedOperator) -> usize {
        op.dimension.unwrap_or(self.dimension)
    }

    /// Every construction invariant, checked up front.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        self.tolerances
            .validate()
            .map_err(|e| HarnessError::Validation(format!("tolerances: {e}")))?;
        let mut names = HashSet::new();
        for g in &self.grids {
            if !names.insert(&g.name) {
                return bad(format!("duplicate grid name '{}'", g.name));
            }
            g.grid()?;
        }
        let mut names = HashSet::new();
        for o in &self.operators {
            if !names.insert(&o.name) {
                return bad(format!("duplicate operator name '{}'", o.name));
            }
            let dim = self.operator_dim(o);
            o.spec
                .validate(dim, &self.tolerances)
                .map_err(|e| HarnessError::Validation(format!("operator '{}': {}", o.name, invariant(&e))))?;
        }
        for (i, c) in self.checks.iter().enumerate() {
            let ctx = format!("check #{} ({})", i + 1, c.check.name());
            if c.targets.is_empty() {
                return bad(format!("{ctx}: no targets"));
            }
            for field in c.check.required() {
                if !c.params.has(field) {
                    return bad(format!("{ctx}: missing parameter '{field}'"));
                }
            }
            let grid = match &c.grid {
                Some(name) => match self.grid(name) {
                    Some(g) => Some(g),
                    None => return bad(format!("{ctx}: unresolved grid name '{name}'")),
                },
                None if c.check.needs_grid() => return bad(format!("{ctx}: missing grid")),
                None => None,
            };
            for t in &c.targets {
                let Some(op) = self.operator(t) else {
                    return bad(format!("{ctx}: unresolved operator name '{t}'"));
                };
                let dim = self.operator_dim(op);
                if let Some(g) = grid {
                    let want = if c.check == CheckKind::MaximalityProbe { 2 * dim } else { dim };
                    if g.lower.dim() != want {
                        return bad(format!(
                            "{ctx}: grid '{}' has dimension {} but target '{t}' needs {want}",
                            g.name,
                            g.lower.dim()
                        ));
                    }
                }
                for (name, v) in c.params.vectors() {
                    if v.dim() != dim {
                        return bad(format!("{ctx}: parameter '{name}' has dimension {} but target '{t}' has {dim}", v.dim()));
                    }
                }
                for p in c.params.points.iter().flatten() {
                    if p.dim() != dim {
                        return bad(format!("{ctx}: probe point dimension mismatch for target '{t}'"));
                    }
                }
                if c.check == CheckKind::ShiftIdentity && !matches!(op.spec, OperatorSpec::Graph { .. }) {
                    return bad(format!("{ctx}: target '{t}' must be a finite graph"));
                }
                if c.params.inverse == Some(true)
                    && op.spec.inverse().is_none()
                    && !crate::operators::has_resolvent(&op.spec)
                {
                    return bad(format!("{ctx}: target '{t}' has no computable inverse"));
                }
            }
            if let Some(p) = c.params.p {
                if !(p.is_finite() && p >= 1.0) {
                    return bad(format!("{ctx}: p must be >= 1"));
                }
            }
            for (name, v) in [("alpha", c.params.alpha), ("beta", c.params.beta)] {
                if v.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
                    return bad(format!("{ctx}: {name} must be positive"));
                }
            }
            if c.params.lambdas.as_ref().is_some_and(|l| l.is_empty() || l.iter().any(|x| !(*x > 0.0))) {
                return bad(format!("{ctx}: lambdas must be a nonempty list of positive reals"));
            }
            if c.params.ns.as_ref().is_some_and(|n| n.is_empty() || n.contains(&0)) {
                return bad(format!("{ctx}: ns must be a nonempty list of positive integers"));
            }
        }
        Ok(())
    }
}

fn invariant(e: &crate::error::FitzError) -> String {
    match e {
        crate::error::FitzError::InvalidSpec(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text).map_err(|e| match e {
        HarnessError::Parse(m) => HarnessError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
