use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{CheckConfig, CheckKind, ScenarioConfig};
use crate::certificate::{Certificate, Verdict};
use crate::criteria::{
    blowup_witness_sequence, br_check, br_check_with, conv_domain_certificate, near_convexity_certificate,
    simons_lower_bound_check, sup_quotient_certificate, theorem36_experiment, NearConvexityOptions,
};
use crate::error::{FitzError, Result};
use crate::fitzpatrick::{fitz_inequality_check, shift_identity_check};
use crate::operators::{graph_sample, maximality_probe, monotone_check, OperatorSpec, Surrogate};
use crate::vecspace::{Grid, PairPoint, ToleranceConfig, Vector};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Report-level annotations; the regularity hypotheses beyond the reflexive
/// case are recorded, not tested.
pub const ANNOTATIONS: [&str; 3] = [
    "finite Fitzpatrick values are lower bounds relative to the sample budget",
    "type (FPV) and Verona regularity are untested hypotheses; only the finite-dimensional case is exercised",
    "unbounded claims are threshold/schedule claims, never symbolic",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub index: usize,
    pub check: String,
    pub target: String,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    pub per_check_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub digest: String,
    pub tool_version: String,
    pub seed: u64,
    pub tolerances: ToleranceConfig,
    pub annotations: Vec<String>,
    pub results: Vec<CheckResult>,
    pub timing: Timing,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.results.iter().any(|r| r.certificate.verdict == Verdict::Fail) {
            1
        } else {
            0
        }
    }

    /// The report with timing zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Report {
        Report {
            timing: Timing::default(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub parallel: bool,
}

/// SHA-256 of the canonical JSON form of the configuration.
pub fn scenario_digest(config: &ScenarioConfig) -> String {
    let canonical = serde_json::to_string(config).expect("scenario serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Runs every (check, target) in listed order. Check-level errors become Fail
/// certificates; randomness comes from one seeded stream per job, so the
/// parallel and sequential runs agree.
pub fn run_suite(config: &ScenarioConfig, opts: &RunOptions) -> Report {
    let start = Instant::now();
    let jobs: Vec<(&CheckConfig, &str)> = config
        .checks
        .iter()
        .flat_map(|c| c.targets.iter().map(move |t| (c, t.as_str())))
        .collect();
    let run = |(i, (c, t)): (usize, &(&CheckConfig, &str))| {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let cert = match run_check(config, c, t, &mut rng) {
            Ok(cert) => cert,
            Err(e) => Certificate::fail(c.check.name(), format!("check aborted: {e}")).scalar("error", 1.0),
        };
        let cert = cert.note(ANNOTATIONS[0]);
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        (
            CheckResult {
                index: i,
                check: c.check.name().to_string(),
                target: t.to_string(),
                certificate: cert,
            },
            ms,
        )
    };
    let out: Vec<(CheckResult, f64)> = if opts.parallel {
        jobs.par_iter().enumerate().map(run).collect()
    } else {
        jobs.iter().enumerate().map(run).collect()
    };
    let (results, per_check_ms): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Report {
        scenario: config.name.clone(),
        digest: scenario_digest(config),
        tool_version: TOOL_VERSION.to_string(),
        seed: config.seed,
        tolerances: config.tolerances.clone(),
        annotations: ANNOTATIONS.iter().map(|s| s.to_string()).collect(),
        results,
        timing: Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
            per_check_ms,
        },
    }
}

fn need<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| FitzError::InvalidSpec(format!("missing parameter '{name}'")))
}

fn uniform_in(rng: &mut ChaCha8Rng, g: &Grid) -> Vector {
    Vector::new(
        g.lower
            .iter()
            .zip(g.upper.iter())
            .map(|(l, u)| rng.random_range(*l..=*u))
            .collect(),
    )
    .expect("grid bounds are finite")
}

/// Inverse operator when expressible; otherwise the swapped Minty sample.
fn inverse_of(op: &OperatorSpec, grid: &Grid, tol: &ToleranceConfig) -> Result<OperatorSpec> {
    match op.inverse() {
        Some(inv) => Ok(inv),
        None => Ok(OperatorSpec::graph(graph_sample(op, grid, tol)?.inverse())),
    }
}

pub(crate) fn run_check(
    config: &ScenarioConfig,
    c: &CheckConfig,
    target: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Certificate> {
    let tol = &config.tolerances;
    let named = config
        .operator(target)
        .ok_or_else(|| FitzError::InvalidSpec(format!("unresolved operator name '{target}'")))?;
    let grid = match &c.grid {
        Some(name) => Some(
            config
                .grid(name)
                .ok_or_else(|| FitzError::InvalidSpec(format!("unresolved grid name '{name}'")))?
                .grid()
                .map_err(|e| FitzError::InvalidSpec(e.to_string()))?,
        ),
        None => None,
    };
    let grid_ref = || grid.as_ref().ok_or_else(|| FitzError::InvalidSpec("missing grid".into()));
    let op = if c.params.inverse == Some(true) {
        inverse_of(&named.spec, grid_ref()?, tol)?
    } else {
        named.spec.clone()
    };
    let p = &c.params;
    match c.check {
        CheckKind::FitzInequality => {
            let g = grid_ref()?;
            let graph = match &op {
                OperatorSpec::Graph { graph } => graph.clone(),
                _ => graph_sample(&op, g, tol)?,
            };
            let mut pts: Vec<PairPoint> = p.points.clone().unwrap_or_default();
            for _ in 0..p.samples.unwrap_or(0) {
                let x = uniform_in(rng, g);
                let xs = uniform_in(rng, g);
                pts.push(PairPoint { primal: x, dual: xs });
            }
            fitz_inequality_check(&op, &pts, &graph, tol)
        }
        CheckKind::ShiftIdentity => {
            let OperatorSpec::Graph { graph } = &op else {
                return Err(FitzError::InvalidSpec("shift identity needs a finite graph".into()));
            };
            shift_identity_check(graph, need(&p.z, "z")?, need(&p.zstar, "zstar")?, tol)
        }
        CheckKind::Theorem36 => Ok(theorem36_experiment(&op, grid_ref()?, tol)?.1),
        CheckKind::SupQuotient => sup_quotient_certificate(&op, need(&p.z, "z")?, grid_ref()?, tol),
        CheckKind::NearConvexity => near_convexity_certificate(
            &op,
            need(&p.z, "z")?,
            *need(&p.p, "p")?,
            need(&p.lambdas, "lambdas")?,
            grid_ref()?,
            &NearConvexityOptions {
                strict: p.strict.unwrap_or(false),
                ..Default::default()
            },
            tol,
        ),
        CheckKind::ConvDomain => conv_domain_certificate(
            &op,
            need(&p.z, "z")?,
            *need(&p.p, "p")?,
            need(&p.lambdas, "lambdas")?,
            grid_ref()?,
            p.zstar_probes.as_deref().unwrap_or(&[]),
            tol,
        ),
        CheckKind::SimonsLowerBound => {
            let zpair = PairPoint::new(need(&p.z, "z")?.clone(), need(&p.zstar, "zstar")?.clone())?;
            simons_lower_bound_check(&op, &zpair, grid_ref()?, tol)
        }
        CheckKind::Br => {
            let xpair = PairPoint::new(need(&p.x, "x")?.clone(), need(&p.xstar, "xstar")?.clone())?;
            br_check(&op, &xpair, *need(&p.alpha, "alpha")?, *need(&p.beta, "beta")?, grid_ref()?, tol)
        }
        CheckKind::BrRandom => br_random(&op, *need(&p.trials, "trials")?, grid_ref()?, rng, tol),
        CheckKind::BlowupSequence => {
            Ok(blowup_witness_sequence(&op, need(&p.z, "z")?, need(&p.ns, "ns")?, grid_ref()?, tol)?.1)
        }
        CheckKind::Monotone => {
            let graph = match &op {
                OperatorSpec::Graph { graph } => graph.clone(),
                _ => graph_sample(&op, grid_ref()?, tol)?,
            };
            Ok(match monotone_check(&graph, tol) {
                None => Certificate::pass("monotone", "no violating pair")
                    .scalar("pairs_checked", graph.len() as f64),
                Some((a, b)) => Certificate::fail("monotone", "violating pair found")
                    .scalar("product", a.monotone_product(&b))
                    .pair("first", &a)
                    .pair("second", &b),
            })
        }
        CheckKind::MaximalityProbe => {
            let found = maximality_probe(&op, grid_ref()?, tol)?;
            let cert = if found.is_empty() {
                Certificate::pass(
                    "maximality_probe",
                    "no related non-member probe points (consistent with maximality, not a proof)",
                )
            } else {
                Certificate::fail("maximality_probe", "related probe points outside the graph: evidence against maximality")
            };
            let cert = cert.scalar("related_non_members", found.len() as f64);
            Ok(match found.first() {
                Some(pt) => cert.pair("first", pt),
                None => cert,
            })
        }
    }
}

/// Randomized (BR) trials against one Minty sample: pairs drawn uniformly
/// from the grid box, `alpha`, `beta` uniform in `[0.05, 1]`. Passes when every
/// trial that activates the hypothesis passes.
fn br_random(
    op: &OperatorSpec,
    trials: usize,
    grid: &Grid,
    rng: &mut ChaCha8Rng,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    const NAME: &str = "br_random";
    let sur = Surrogate::build(op, grid, tol)?;
    let cases: Vec<(PairPoint, f64, f64)> = (0..trials)
        .map(|_| {
            let x = uniform_in(rng, grid);
            let xs = uniform_in(rng, grid);
            let a = rng.random_range(0.05..=1.0);
            let b = rng.random_range(0.05..=1.0);
            (PairPoint { primal: x, dual: xs }, a, b)
        })
        .collect();
    let certs = cases
        .par_iter()
        .map(|(pt, a, b)| br_check_with(&sur, pt, *a, *b, tol))
        .collect::<Result<Vec<_>>>()?;
    let activated = certs.iter().filter(|c| c.verdict != Verdict::NotApplicable).count();
    let failures: Vec<usize> = certs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.verdict == Verdict::Fail)
        .map(|(i, _)| i)
        .collect();
    let worst = certs
        .iter()
        .filter_map(|c| (c.verdict != Verdict::NotApplicable).then(|| c.get_scalar("score")).flatten())
        .fold(0.0, f64::max);
    let cert = if failures.is_empty() {
        Certificate::pass(NAME, "every trial with an active hypothesis found (b, b*)")
    } else {
        Certificate::fail(NAME, format!("{} activated trial(s) failed", failures.len()))
    };
    let mut cert = cert
        .scalar("failures", failures.len() as f64)
        .scalar("trials", trials as f64)
        .scalar("activated", activated as f64)
        .scalar("worst_score", worst);
    if let Some(&i) = failures.first() {
        cert = cert
            .pair("failing_xpair", &cases[i].0)
            .scalar("failing_alpha", cases[i].1)
            .scalar("failing_beta", cases[i].2);
    }
    Ok(cert)
}
