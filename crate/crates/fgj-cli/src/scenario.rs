//! Scenario files: parsing, validation and the normalized echo.

use std::collections::BTreeMap;
use std::sync::Arc;

use fgj_core::gapset::GapSet;
use fgj_core::jacobi::{JacobiCoeffs, OperatorJson};
use serde::{Deserialize, Serialize};

/// Suites the runner knows, with their default tolerances.
pub const SUITES: &[(&str, f64)] = &[
    ("equilibrium", 1e-10),
    ("sumrule", 1e-6),
    ("widom", 1e-6),
    ("szego_ratio", 1e-8),
    ("green", 1e-8),
    ("l2", 1e-3),
    ("background", 1e-8),
    ("interlacing", 1e-10),
    ("rank", 1e-12),
    ("disk", 1e-6),
    ("oscillatory", 1e-10),
    ("coeff", 1e-12),
];

const RANDOMIZED: &[&str] = &["rank"];

/// Failure before any suite runs; maps to exit status 2.
#[derive(Debug, Clone, Serialize)]
pub struct InputError {
    pub code: String,
    pub message: String,
}

impl InputError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into() }
    }
}

impl From<fgj_core::FgjError> for InputError {
    fn from(e: fgj_core::FgjError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapSetJson {
    pub bands: Vec<[f64; 2]>,
}

/// Optional knobs shared by the suites.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Largest n for sumrule/widom/coeff series.
    pub n_max: Option<usize>,
    /// Site at which green and szego_ratio are judged.
    pub n_check: Option<usize>,
    /// Trials for randomized suites.
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub gapset: Option<GapSetJson>,
    pub operator: Option<OperatorJson>,
    pub suites: Vec<String>,
    #[serde(default)]
    pub tol: BTreeMap<String, f64>,
    #[serde(default)]
    pub params: Params,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

/// Validated scenario with every default filled in.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub gapset: Arc<GapSet>,
    pub operator: Option<JacobiCoeffs>,
    pub suites: Vec<String>,
    pub tol: BTreeMap<String, f64>,
    pub params: Params,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

impl Scenario {
    pub fn tol(&self, suite: &str) -> f64 {
        self.tol[suite]
    }

    pub fn operator(&self, suite: &str) -> Result<&JacobiCoeffs, InputError> {
        self.operator
            .as_ref()
            .ok_or_else(|| InputError::new("scenario.invalid", format!("suite {suite} needs an operator")))
    }

    /// The normalized scenario as JSON (the echo printed by `validate`).
    pub fn normalized(&self) -> ScenarioFile {
        ScenarioFile {
            name: Some(self.name.clone()),
            gapset: Some(GapSetJson { bands: self.gapset.bands().iter().map(|&(a, b)| [a, b]).collect() }),
            operator: self.operator.as_ref().map(|j| j.to_json()),
            suites: self.suites.clone(),
            tol: self.tol.clone(),
            params: self.params.clone(),
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

pub fn parse(text: &str, tol_scale: f64) -> Result<Scenario, InputError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| InputError::new("scenario.parse", e.to_string()))?;
    validate(file, tol_scale)
}

fn validate(file: ScenarioFile, tol_scale: f64) -> Result<Scenario, InputError> {
    let gapset = match &file.gapset {
        Some(g) => Some(GapSet::new(g.bands.iter().map(|b| (b[0], b[1])).collect())?),
        None => None,
    };
    let operator = match &file.operator {
        Some(op) => Some(op.build()?),
        None => None,
    };
    let gapset = match (gapset, &operator) {
        (Some(g), Some(j)) => {
            let h = j.gapset();
            let span = g.span();
            let same = g.ell() == h.ell() && g.edges().iter().zip(h.edges()).all(|(x, y)| (x - y).abs() <= 1e-9 * span);
            if !same {
                return Err(InputError::new("gapset.invalid", "gap set differs from the operator's essential spectrum"));
            }
            g
        }
        (Some(g), None) => g,
        (None, Some(j)) => j.gapset().clone(),
        (None, None) => return Err(InputError::new("scenario.invalid", "scenario needs a gapset or an operator")),
    };
    if file.suites.is_empty() {
        return Err(InputError::new("scenario.invalid", "no suites selected"));
    }
    let mut suites = Vec::new();
    for s in &file.suites {
        if !SUITES.iter().any(|(n, _)| n == s) {
            return Err(InputError::new("suite.unknown", format!("unknown suite {s:?}")));
        }
        if suites.contains(s) {
            return Err(InputError::new("scenario.invalid", format!("suite {s:?} listed twice")));
        }
        suites.push(s.clone());
    }
    for (k, v) in &file.tol {
        if !SUITES.iter().any(|(n, _)| n == k) {
            return Err(InputError::new("suite.unknown", format!("tolerance for unknown suite {k:?}")));
        }
        if !(v.is_finite() && *v > 0.0) {
            return Err(InputError::new("scenario.invalid", format!("tolerance for {k} must be positive")));
        }
    }
    if !(tol_scale.is_finite() && tol_scale > 0.0) {
        return Err(InputError::new("scenario.invalid", "FGJ_TOL_SCALE must be a positive number"));
    }
    let tol = suites
        .iter()
        .map(|s| {
            let default = SUITES.iter().find(|(n, _)| n == s).unwrap().1;
            (s.clone(), file.tol.get(s).copied().unwrap_or(default) * tol_scale)
        })
        .collect();
    if file.seed.is_none() && suites.iter().any(|s| RANDOMIZED.contains(&s.as_str())) {
        return Err(InputError::new("scenario.invalid", "randomized suites need a seed"));
    }
    let needs_op = suites.iter().any(|s| !matches!(s.as_str(), "equilibrium" | "oscillatory"));
    if needs_op && operator.is_none() {
        return Err(InputError::new("scenario.invalid", "selected suites need an operator"));
    }
    Ok(Scenario {
        name: file.name.unwrap_or_else(|| "scenario".into()),
        gapset: Arc::new(gapset),
        operator,
        suites,
        tol,
        params: file.params,
        seed: file.seed,
        out: file.out,
    })
}
