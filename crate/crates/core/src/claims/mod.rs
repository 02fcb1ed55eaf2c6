//! A catalogue of geometric statements about solutions of the overdetermined
//! problem, each checked numerically with residual statistics and a verdict
//! that only refutes when the residual is stable under grid refinement.

mod checks;
mod scenario;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::io::round9;
use crate::thickness::ThicknessTable;

pub use checks::{gnp_ray_distance, run_check, Case, CheckConfig, LevelResidual, Measurement};
pub use scenario::{Scenario, ScenarioOutput};

/// Fraction of the residual scale below which a claim is verified.
pub const PASS_FRACTION: f64 = 5e-3;
/// Fraction of the residual scale above which a claim can be refuted.
pub const FAIL_FRACTION: f64 = 5e-2;
/// Largest relative disagreement between the two finest residuals for a
/// refutation to count as refinement-stable.
pub const STABILITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimId {
    RadialMonotonicity,
    LevelParametrisation,
    DifferentialRelation,
    UniqueDecomposition,
    Subharmonicity,
    Rigidity,
    ThicknessSlope,
    ParallelLevels,
    RayLinearity,
    Gnp,
}

/// How a claim's tolerances scale with the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Residuals in units of u (or lengths compared against max u / |∇u|
    /// with |∇u| = 1 on ∂Ω): tolerances scale with max u.
    Value,
    /// Slopes, gradients and indicator residuals: unit scale.
    Unit,
}

impl ClaimId {
    pub const ALL: [ClaimId; 10] = [
        ClaimId::RadialMonotonicity,
        ClaimId::LevelParametrisation,
        ClaimId::DifferentialRelation,
        ClaimId::UniqueDecomposition,
        ClaimId::Subharmonicity,
        ClaimId::Rigidity,
        ClaimId::ThicknessSlope,
        ClaimId::ParallelLevels,
        ClaimId::RayLinearity,
        ClaimId::Gnp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimId::RadialMonotonicity => "radial-monotonicity",
            ClaimId::LevelParametrisation => "level-parametrisation",
            ClaimId::DifferentialRelation => "differential-relation",
            ClaimId::UniqueDecomposition => "unique-decomposition",
            ClaimId::Subharmonicity => "subharmonicity",
            ClaimId::Rigidity => "rigidity",
            ClaimId::ThicknessSlope => "thickness-slope",
            ClaimId::ParallelLevels => "parallel-levels",
            ClaimId::RayLinearity => "ray-linearity",
            ClaimId::Gnp => "gnp",
        }
    }

    pub fn parse(s: &str) -> Option<ClaimId> {
        ClaimId::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// The statement under test.
    pub fn statement(self) -> &'static str {
        match self {
            ClaimId::RadialMonotonicity => "r -> u(c + r nu(c)) is strictly decreasing on [0, d(c)] for every c on the boundary of C",
            ClaimId::LevelParametrisation => "the level set {u = t} equals {c + d_t(c) nu(c) : c on the boundary of C}",
            ClaimId::DifferentialRelation => "d/dt d_t(c) = -1 / |grad u(c + d_t(c) nu(c))| for almost every c",
            ClaimId::UniqueDecomposition => "every x in Omega \\ C is uniquely c + r nu(c) with c on the boundary of C and 0 < r < d(c)",
            ClaimId::Subharmonicity => "w = |grad u|^2 satisfies Laplacian(w) >= 0 in Omega \\ C",
            ClaimId::Rigidity => "|grad u| = 1 on every level set {u = t}, 0 <= t < max u",
            ClaimId::ThicknessSlope => "d/dt d_t(c) = -1 for every c and every t",
            ClaimId::ParallelLevels => "d_t(c) = d(c) - t, so the level sets are parallel to the boundary of C",
            ClaimId::RayLinearity => "u(c + r nu(c)) = d(c) - r along every normal ray",
            ClaimId::Gnp => "C lies in Omega, d is Lipschitz on the boundary of C, every inward normal ray of the boundary of Omega meets C, and every normal ray of C meets Omega in one interval",
        }
    }

    pub fn scale(self) -> Scale {
        match self {
            ClaimId::RadialMonotonicity
            | ClaimId::LevelParametrisation
            | ClaimId::ParallelLevels
            | ClaimId::RayLinearity => Scale::Value,
            _ => Scale::Unit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Verified,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Verified => "VERIFIED",
            Verdict::Refuted => "REFUTED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// VERIFIED iff the finest residual is below `tau_pass`; REFUTED iff the two
/// finest residuals both exceed `tau_fail` and agree within 25%; otherwise
/// INCONCLUSIVE. A single resolution can never refute.
pub fn verdict(residual_max: &[f64], tau_pass: f64, tau_fail: f64) -> Verdict {
    let Some(&finest) = residual_max.last() else {
        return Verdict::Inconclusive;
    };
    if finest < tau_pass {
        return Verdict::Verified;
    }
    if let [.., a, b] = residual_max {
        if *a > tau_fail && *b > tau_fail && (a - b).abs() <= STABILITY * a.max(*b) {
            return Verdict::Refuted;
        }
    }
    Verdict::Inconclusive
}

/// One claim checked at one or more resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimReport {
    pub claim: ClaimId,
    pub resolutions: Vec<usize>,
    pub measurements: Vec<Measurement>,
    pub tau_pass: f64,
    pub tau_fail: f64,
    pub verdict: Verdict,
}

impl ClaimReport {
    pub fn assemble(claim: ClaimId, resolutions: Vec<usize>, measurements: Vec<Measurement>, max_u: f64) -> Self {
        let scale = match claim.scale() {
            Scale::Value => max_u,
            Scale::Unit => 1.0,
        };
        let tau_pass = PASS_FRACTION * scale;
        let tau_fail = FAIL_FRACTION * scale;
        let maxes: Vec<f64> = measurements.iter().map(|m| m.max).collect();
        ClaimReport {
            claim,
            resolutions,
            verdict: verdict(&maxes, tau_pass, tau_fail),
            measurements,
            tau_pass,
            tau_fail,
        }
    }

    pub fn residual_max(&self) -> Vec<f64> {
        self.measurements.iter().map(|m| m.max).collect()
    }

    /// Residual at level `t` for each resolution (NaN where absent).
    pub fn level_residual(&self, t: f64) -> Vec<f64> {
        self.measurements
            .iter()
            .map(|m| m.level(t).map_or(f64::NAN, |l| l.max))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let mut per_level: Vec<Value> = Vec::new();
        if let Some(first) = self.measurements.first() {
            for (k, lvl) in first.per_level.iter().enumerate() {
                let pick = |f: &dyn Fn(&LevelResidual) -> f64| -> Vec<f64> {
                    self.measurements
                        .iter()
                        .map(|m| m.per_level.get(k).map_or(f64::NAN, f))
                        .collect()
                };
                let mut entry = Map::new();
                entry.insert(lvl.kind.to_string(), json!(lvl.at));
                entry.insert("residual_max".into(), json!(pick(&|l| l.max)));
                entry.insert("residual_mean".into(), json!(pick(&|l| l.mean)));
                if lvl.measured.is_some() {
                    entry.insert("measured_mean".into(), json!(pick(&|l| l.measured.unwrap_or(f64::NAN))));
                }
                per_level.push(Value::Object(entry));
            }
        }
        let mut samples = Map::new();
        samples.insert("per_level".into(), Value::Array(per_level));
        samples.insert(
            "details".into(),
            Value::Array(self.measurements.iter().map(|m| Value::Object(m.details.clone())).collect()),
        );
        let v = json!({
            "claim_id": self.claim.as_str(),
            "paper_ref": self.claim.statement(),
            "resolutions": self.resolutions,
            "residual_max": self.residual_max(),
            "residual_mean": self.measurements.iter().map(|m| m.mean).collect::<Vec<_>>(),
            "residual_l2": self.measurements.iter().map(|m| m.l2).collect::<Vec<_>>(),
            "tau_pass": self.tau_pass,
            "tau_fail": self.tau_fail,
            "verdict": self.verdict.as_str(),
            "samples": Value::Object(samples),
        });
        round_json(v)
    }
}

/// All claims for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub scenario: String,
    pub resolutions: Vec<usize>,
    pub claims: Vec<ClaimReport>,
}

impl SuiteReport {
    pub fn claim(&self, id: ClaimId) -> Option<&ClaimReport> {
        self.claims.iter().find(|c| c.claim == id)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "scenario": self.scenario,
            "resolutions": self.resolutions,
            "claims": self.claims.iter().map(ClaimReport::to_json).collect::<Vec<_>>(),
        })
    }

    /// Pretty JSON with a trailing newline; byte-identical across runs.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Rounds every number to 9 significant digits; non-finite numbers become
/// null.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => serde_json::Number::from_f64(round9(x)).map_or(Value::Null, Value::Number),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Runs every claim on the cases (one per resolution, coarse to fine) and
/// returns the report with the thickness table of each case.
pub fn run_claims(
    scenario: &str,
    resolutions: &[usize],
    cases: &[Case],
    config: &CheckConfig,
) -> Result<(SuiteReport, Vec<ThicknessTable>)> {
    if resolutions.len() != cases.len() {
        return Err(Error::InvalidParameter("one case per resolution is required".into()));
    }
    let prepared = cases.iter().map(|c| checks::prepare(c, config)).collect::<Result<Vec<_>>>()?;
    let max_u = cases.last().map_or(1.0, |c| c.max_u);
    let claims = ClaimId::ALL
        .into_iter()
        .map(|id| {
            let measurements = prepared.iter().map(|p| checks::measure(id, p)).collect();
            ClaimReport::assemble(id, resolutions.to_vec(), measurements, max_u)
        })
        .collect();
    let tables = prepared.iter().map(|p| p.table().clone()).collect();
    let report = SuiteReport {
        scenario: scenario.to_string(),
        resolutions: resolutions.to_vec(),
        claims,
    };
    Ok((report, tables))
}

/// Builds `scenario` at each grid resolution (h = 1/n) and runs every claim.
/// Each output carries the thickness table the claims were measured on.
pub fn run_all(scenario: &Scenario, resolutions: &[usize], config: &CheckConfig) -> Result<(SuiteReport, Vec<ScenarioOutput>)> {
    if resolutions.is_empty() {
        return Err(Error::InvalidParameter("at least one resolution is required".into()));
    }
    let mut outputs = resolutions.iter().map(|&n| scenario.build(n)).collect::<Result<Vec<_>>>()?;
    let cases: Vec<Case> = outputs.iter().map(|o| o.case.clone()).collect();
    let (report, tables) = run_claims(&scenario.name(), resolutions, &cases, config)?;
    for (o, t) in outputs.iter_mut().zip(tables) {
        o.table = Some(t);
    }
    Ok((report, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        assert_eq!(verdict(&[0.1, 0.001], 0.005, 0.05), Verdict::Verified);
        assert_eq!(verdict(&[0.2214, 0.2214], 0.005, 0.05), Verdict::Refuted);
        assert_eq!(verdict(&[0.2214], 0.005, 0.05), Verdict::Inconclusive);
        assert_eq!(verdict(&[0.4, 0.2], 0.005, 0.05), Verdict::Inconclusive);
        assert_eq!(verdict(&[0.04, 0.04], 0.005, 0.05), Verdict::Inconclusive);
        assert_eq!(verdict(&[f64::NAN, f64::NAN], 0.005, 0.05), Verdict::Inconclusive);
        assert_eq!(verdict(&[], 0.005, 0.05), Verdict::Inconclusive);
    }

    #[test]
    fn ids_round_trip() {
        for id in ClaimId::ALL {
            assert_eq!(ClaimId::parse(id.as_str()), Some(id));
        }
    }

    #[test]
    fn json_rounding() {
        let v = round_json(json!({"a": [1.0 / 3.0, f64::NAN], "b": 7}));
        assert_eq!(v.to_string(), r#"{"a":[0.333333333,null],"b":7}"#);
    }
}
