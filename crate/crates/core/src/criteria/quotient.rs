use super::{candidates_by_distance, min_distance, search_exceeding};
use crate::certificate::{Certificate, QuotientTrace};
use crate::error::{FitzError, Result};
use crate::fitzpatrick::{FitzSampler, FitzValue};
use crate::operators::{duality_map, fiber, maximality_probe, membership, perturb, OperatorSpec, Surrogate};
use crate::vecspace::{conv_hull, dist_to_polytope, Grid, PairPoint, ToleranceConfig, Vector};

/// `sup <z - a, a*> / ||z - a||` over a sampled graph.
///
/// A fiber ray with `<z - a, r> > 0` makes the quotient unbounded; it is
/// recorded as a witness scaled to quotient `2 * inf_threshold` and ends the
/// scan. The trace lists each improvement of the running maximum, keyed by
/// sample index. Samples within `eq_tol` of `z` raise `ZOnDomain` unless
/// `allow_on_domain` is set, in which case they are skipped.
pub fn sup_quotient(
    op: &OperatorSpec,
    z: &Vector,
    wgrid: &Grid,
    allow_on_domain: bool,
    tol: &ToleranceConfig,
) -> Result<(f64, QuotientTrace)> {
    let sur = Surrogate::build(op, wgrid, tol)?;
    sup_quotient_on(&sur, z, allow_on_domain, tol)
}

fn sup_quotient_on(
    sur: &Surrogate,
    z: &Vector,
    allow_on_domain: bool,
    tol: &ToleranceConfig,
) -> Result<(f64, QuotientTrace)> {
    let mut trace = QuotientTrace::default();
    let mut best = f64::NEG_INFINITY;
    for (i, a) in sur.pairs().iter().enumerate() {
        let diff = z - &a.primal;
        let d = diff.norm();
        if d <= tol.eq_tol {
            if allow_on_domain {
                continue;
            }
            return Err(FitzError::ZOnDomain);
        }
        let q = diff.inner(&a.dual) / d;
        for r in sur.rays_at(i) {
            let slope = diff.inner(r);
            if slope > tol.slack(d) {
                let target = 2.0 * tol.inf_threshold;
                let t = ((target * d - diff.inner(&a.dual)) / slope).max(0.0);
                let w = PairPoint {
                    primal: a.primal.clone(),
                    dual: a.dual.add_scaled(t, r),
                };
                let qw = diff.inner(&w.dual) / d;
                trace.push(i as f64, qw, w);
                return Ok((qw, trace));
            }
        }
        if q > best {
            best = q;
            trace.push(i as f64, q, a.clone());
        }
    }
    if trace.is_empty() {
        return Err(FitzError::EmptyInput("graph samples away from z"));
    }
    Ok((best, trace))
}

/// Pass when `z` lies outside the domain and the quotient supremum crosses
/// `inf_threshold`; Fail when it stays bounded there. For `z` in the domain
/// the estimate is reported with verdict NotApplicable.
pub fn sup_quotient_certificate(
    op: &OperatorSpec,
    z: &Vector,
    wgrid: &Grid,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    const NAME: &str = "sup_quotient";
    let off_domain = fiber(op, z, tol)?.is_empty();
    let (est, trace) = match sup_quotient(op, z, wgrid, !off_domain, tol) {
        Err(FitzError::ZOnDomain) => {
            return Ok(Certificate::not_applicable(NAME, "a sampled domain point lies within eq_tol of z")
                .vector("z", z))
        }
        other => other?,
    };
    let last = trace.entries.last().expect("nonempty trace").witness.clone();
    let cert = if !off_domain {
        Certificate::not_applicable(NAME, "z lies in the domain; the quotient need not blow up")
    } else if est >= tol.inf_threshold {
        Certificate::pass(NAME, "quotient crosses inf_threshold (unbounded as a threshold claim)")
    } else {
        Certificate::fail(NAME, "z lies outside the domain but the sampled quotient stays bounded")
    };
    Ok(cert
        .scalar("estimate", est)
        .pair("maximizer", &last)
        .vector("z", z)
        .with_trace(trace))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NearConvexityOptions {
    /// Also run a maximality probe on the perturbed operator around `(z, 0)`.
    pub strict: bool,
    pub probe_radius: f64,
    pub probe_spacing: f64,
}

impl Default for NearConvexityOptions {
    fn default() -> Self {
        NearConvexityOptions {
            strict: false,
            probe_radius: 1.0,
            probe_spacing: 0.5,
        }
    }
}

struct Chain {
    trace: QuotientTrace,
    missing: Vec<f64>,
    below_bound: Vec<f64>,
    not_member: Vec<f64>,
    min_margin: f64,
    last_perturbed: Option<PairPoint>,
}

impl Chain {
    fn clean(&self) -> bool {
        self.missing.is_empty() && self.below_bound.is_empty() && self.not_member.is_empty()
    }

    fn trending(&self, tol: &ToleranceConfig) -> bool {
        let q = self.trace.quotients();
        let last_big = q.last().is_some_and(|&l| l >= tol.inf_threshold.sqrt());
        last_big || q.windows(2).all(|w| w[1] > w[0])
    }
}

/// For each `lambda`, a point of `gra(A + lambda J_p(. - z))` not monotonically
/// related to `(z, 0)`, together with `<z - a, a*> / ||z - a||`.
fn witness_chain(
    op: &OperatorSpec,
    sur: &Surrogate,
    z: &Vector,
    p: f64,
    schedule: &[f64],
    alpha: f64,
    tol: &ToleranceConfig,
) -> Result<Chain> {
    let order = candidates_by_distance(sur, z);
    let mut chain = Chain {
        trace: QuotientTrace::default(),
        missing: Vec::new(),
        below_bound: Vec::new(),
        not_member: Vec::new(),
        min_margin: f64::INFINITY,
        last_perturbed: None,
    };
    for &lambda in schedule {
        let need = |a: &PairPoint| lambda * a.primal.dist(z).powf(p);
        let Some(w) = search_exceeding(sur, &order, z, need, tol) else {
            chain.missing.push(lambda);
            continue;
        };
        let diff = z - &w.primal;
        let d = diff.norm();
        let quotient = diff.inner(&w.dual) / d;
        let bstar = duality_map(p, z, &w.primal, tol).points[0].clone();
        let perturbed = PairPoint {
            primal: w.primal.clone(),
            dual: w.dual.add_scaled(lambda, &bstar),
        };
        let pop = perturb(op, lambda, p, z)?;
        let related_product = -diff.inner(&perturbed.dual);
        if !membership(&pop, &perturbed, tol) || related_product >= 0.0 {
            chain.not_member.push(lambda);
        }
        let bound = lambda * alpha.powf(p - 1.0);
        let margin = quotient - bound;
        if margin <= -tol.eq_tol {
            chain.below_bound.push(lambda);
        }
        chain.min_margin = chain.min_margin.min(margin);
        chain.trace.push(lambda, quotient, w);
        chain.last_perturbed = Some(perturbed);
    }
    Ok(chain)
}

fn sorted_schedule(schedule: &[f64]) -> Result<Vec<f64>> {
    if schedule.is_empty() {
        return Err(FitzError::EmptyInput("lambda schedule"));
    }
    if schedule.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(FitzError::InvalidSpec("schedule entries must be positive".into()));
    }
    let mut s = schedule.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn chain_certificate(name: &str, chain: Chain, alpha: f64, tol: &ToleranceConfig) -> Certificate {
    let trending = chain.trending(tol);
    let last_q = chain.trace.quotients().last().copied().unwrap_or(0.0);
    let mut cert = if chain.clean() && trending {
        Certificate::pass(
            name,
            "every lambda has a non-related perturbed witness; quotients exceed lambda*alpha^(p-1) \
             and grow across the schedule (unbounded as a schedule claim)",
        )
    } else if !chain.missing.is_empty() {
        Certificate::fail(name, format!("no witness found for lambda in {:?}", chain.missing))
    } else if !chain.not_member.is_empty() {
        Certificate::fail(
            name,
            format!("perturbed witness failed re-verification for lambda in {:?}", chain.not_member),
        )
    } else if !chain.below_bound.is_empty() {
        Certificate::fail(
            name,
            format!("quotient below lambda*alpha^(p-1) for lambda in {:?}", chain.below_bound),
        )
    } else {
        Certificate::fail(name, "quotients do not grow across the schedule")
    };
    cert = cert
        .scalar("last_quotient", last_q)
        .scalar("alpha", alpha)
        .scalar(
            "min_margin",
            if chain.min_margin.is_finite() { chain.min_margin } else { 0.0 },
        );
    if let Some(last) = chain.trace.entries.last() {
        cert = cert.pair("last_witness", &last.witness.clone());
    }
    if let Some(pw) = &chain.last_perturbed {
        cert = cert.pair("perturbed_witness", pw);
    }
    cert.with_trace(chain.trace)
}

/// Witnesses that `(z, 0)` is not monotonically related to
/// `gra(A + lambda J_p(. - z))` for each scheduled `lambda`, with the quotient
/// bound `lambda * alpha^(p-1)` asserted at every witness.
pub fn near_convexity_certificate(
    op: &OperatorSpec,
    z: &Vector,
    p: f64,
    lambda_schedule: &[f64],
    wgrid: &Grid,
    opts: &NearConvexityOptions,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    const NAME: &str = "near_convexity";
    let schedule = sorted_schedule(lambda_schedule)?;
    let sur = Surrogate::build(op, wgrid, tol)?;
    let alpha = min_distance(&sur, z);
    if alpha <= tol.eq_tol {
        return Ok(Certificate::not_applicable(NAME, "z lies within eq_tol of the sampled domain")
            .scalar("alpha", alpha)
            .vector("z", z));
    }
    let chain = witness_chain(op, &sur, z, p, &schedule, alpha, tol)?;
    let mut cert = chain_certificate(NAME, chain, alpha, tol);
    if opts.strict {
        let pop = perturb(op, schedule[0], p, z)?;
        let r = opts.probe_radius;
        let n = z.dim();
        let lower: Vec<f64> = z.iter().map(|c| c - r).chain(std::iter::repeat_n(-r, n)).collect();
        let upper: Vec<f64> = z.iter().map(|c| c + r).chain(std::iter::repeat_n(r, n)).collect();
        let grid = Grid::new(Vector::new(lower)?, Vector::new(upper)?, opts.probe_spacing)?;
        match maximality_probe(&pop, &grid, tol) {
            Ok(found) => {
                cert = cert
                    .scalar("strict_probe_violations", found.len() as f64)
                    .note("strict mode: maximality probe on the perturbed operator near (z, 0)");
            }
            Err(e) => cert = cert.note(format!("strict mode skipped: {e}")),
        }
    }
    Ok(cert)
}

/// The near-convexity witness search gated on distance to the hull of the
/// sampled domain, plus the bound `sup quotient <= ||z*|| - r_emp` for each
/// probe `z*` at which `F_A(z, z*)` is finite.
pub fn conv_domain_certificate(
    op: &OperatorSpec,
    z: &Vector,
    p: f64,
    lambda_schedule: &[f64],
    wgrid: &Grid,
    zstar_probes: &[Vector],
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    const NAME: &str = "conv_domain";
    let schedule = sorted_schedule(lambda_schedule)?;
    let sur = Surrogate::build(op, wgrid, tol)?;
    let hull = conv_hull(&sur.domain_points(tol), tol)?;
    let (hull_dist, _) = dist_to_polytope(z, &hull)?;
    if hull_dist <= tol.eq_tol {
        return Ok(Certificate::not_applicable(NAME, "z lies within eq_tol of the sampled domain hull")
            .scalar("hull_distance", hull_dist)
            .vector("z", z));
    }
    let alpha = min_distance(&sur, z);
    let chain = witness_chain(op, &sur, z, p, &schedule, alpha, tol)?;
    let chain_ok = chain.clean() && chain.trending(tol);

    let probes: Vec<Vector> = if zstar_probes.is_empty() {
        let nearest = &sur.pairs()[candidates_by_distance(&sur, z)[0]];
        vec![Vector::zeros(z.dim()), nearest.dual.clone()]
    } else {
        zstar_probes.to_vec()
    };
    let sampler = FitzSampler::new(sur.clone(), tol);
    let mut finite_probes = 0usize;
    let mut bound_failures = 0usize;
    let mut first: Option<(Vector, f64, f64)> = None;
    for zs in &probes {
        let pt = PairPoint::new(z.clone(), zs.clone())?;
        if !matches!(sampler.eval(&pt)?, FitzValue::Finite { .. }) {
            continue;
        }
        finite_probes += 1;
        let (mut r_emp, mut supq) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in sur.pairs() {
            let diff = z - &a.primal;
            let d = diff.norm();
            r_emp = r_emp.min(diff.inner(&(zs - &a.dual)) / d);
            supq = supq.max(diff.inner(&a.dual) / d);
        }
        if supq > zs.norm() - r_emp + tol.eq_tol {
            bound_failures += 1;
        }
        first.get_or_insert((zs.clone(), r_emp, supq));
    }

    let bound_ok = bound_failures == 0;
    let mut cert = chain_certificate(NAME, chain, alpha, tol);
    cert.verdict = if chain_ok && bound_ok {
        crate::certificate::Verdict::Pass
    } else {
        crate::certificate::Verdict::Fail
    };
    cert.narrative = format!(
        "{}; bound chain {} on {finite_probes} finite probe(s)",
        if chain_ok { "witness chain complete" } else { "witness chain incomplete" },
        if bound_ok { "verified" } else { "violated" },
    );
    cert = cert
        .scalar("hull_distance", hull_dist)
        .scalar("bound_failures", bound_failures as f64);
    if let Some((zs, r, s)) = first {
        cert = cert
            .vector("probe_zstar", &zs)
            .scalar("r_emp", r)
            .scalar("sup_quotient", s)
            .scalar("bound", zs.norm() - r);
    }
    Ok(cert)
}

fn r_emp(sur: &Surrogate, zpair: &PairPoint) -> f64 {
    sur.pairs()
        .iter()
        .map(|a| {
            let diff = &zpair.primal - &a.primal;
            diff.inner(&(&zpair.dual - &a.dual)) / diff.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `r_emp = min <z - a, z* - a*> / ||z - a||`, required finite and stable
/// (relative change at most 10%) when the resolvent grid is refined.
pub fn simons_lower_bound_check(
    op: &OperatorSpec,
    zpair: &PairPoint,
    wgrid: &Grid,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    const NAME: &str = "simons_lower_bound";
    let sur = Surrogate::build(op, wgrid, tol)?;
    let sampler = FitzSampler::new(sur, tol);
    if let FitzValue::InfiniteSuspected { term, .. } = sampler.eval(zpair)? {
        return Ok(Certificate::not_applicable(NAME, "F_A at the probe is infinite-suspected")
            .scalar("crossing_term", term)
            .pair("zpair", zpair));
    }
    let sur = sampler.surrogate();
    let inf_f = min_distance(sur, &zpair.primal);
    if inf_f <= tol.eq_tol {
        return Ok(Certificate::not_applicable(NAME, "inf ||z - a|| over the sampled graph is not positive")
            .scalar("inf_f", inf_f)
            .pair("zpair", zpair));
    }
    let r1 = r_emp(sur, zpair);
    let r2 = match op {
        OperatorSpec::Graph { .. } => r1,
        _ => {
            let fine = Surrogate::build(op, &wgrid.refined(), tol)?;
            if min_distance(&fine, &zpair.primal) <= tol.eq_tol {
                return Ok(Certificate::not_applicable(
                    NAME,
                    "refined sample reaches within eq_tol of z",
                )
                .pair("zpair", zpair));
            }
            r_emp(&fine, zpair)
        }
    };
    let rel = (r1 - r2).abs() / r1.abs().max(1.0);
    let cert = if rel <= 0.1 {
        Certificate::pass(NAME, "r_emp finite and stable under grid refinement")
    } else {
        Certificate::fail(NAME, "r_emp moves by more than 10% under grid refinement")
    };
    Ok(cert
        .scalar("r_emp", r1)
        .scalar("r_emp_refined", r2)
        .scalar("relative_change", rel)
        .scalar("inf_f", inf_f)
        .pair("zpair", zpair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::Verdict;
    use crate::operators::FiniteGraph;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn pp(x: &[f64], y: &[f64]) -> PairPoint {
        PairPoint::new(v(x), v(y)).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn interval() -> OperatorSpec {
        OperatorSpec::normal_cone_box(v(&[0.0]), v(&[1.0]))
    }

    fn square() -> OperatorSpec {
        OperatorSpec::normal_cone_box(v(&[0., 0.]), v(&[1., 1.]))
    }

    fn two_point() -> OperatorSpec {
        OperatorSpec::graph(FiniteGraph::new(vec![pp(&[0.], &[0.]), pp(&[1.], &[1.])], &tol()).unwrap())
    }

    fn wgrid1() -> Grid {
        Grid::cube(1, -3.0, 5.0, 0.05).unwrap()
    }

    #[test]
    fn sup_quotient_examples() {
        let t = tol();
        let (est, trace) = sup_quotient(&interval(), &v(&[2.0]), &wgrid1(), false, &t).unwrap();
        assert!(est >= t.inf_threshold);
        assert_eq!(trace.entries.last().unwrap().witness.primal, v(&[1.0]));

        let (est, _) = sup_quotient(&interval(), &v(&[0.5]), &wgrid1(), true, &t).unwrap();
        assert!(est.abs() <= 1e-9);
        assert_eq!(
            sup_quotient(&interval(), &v(&[0.5]), &wgrid1(), false, &t).unwrap_err(),
            FitzError::ZOnDomain
        );

        let lgrid = Grid::cube(1, -20.0, 20.0, 0.1).unwrap();
        let (est, _) = sup_quotient(&OperatorSpec::identity(1), &v(&[5.0]), &lgrid, true, &t).unwrap();
        assert!((4.9..=5.1).contains(&est), "{est}");
    }

    #[test]
    fn near_convexity_interval_p1() {
        let t = tol();
        let cert = near_convexity_certificate(
            &interval(),
            &v(&[2.0]),
            1.0,
            &[1.0, 10.0, 100.0],
            &wgrid1(),
            &NearConvexityOptions::default(),
            &t,
        )
        .unwrap();
        assert_eq!(cert.verdict, Verdict::Pass, "{cert:?}");
        let q = cert.trace.as_ref().unwrap().quotients();
        assert_eq!(q, vec![2.0, 11.0, 101.0]);
    }

    #[test]
    fn near_convexity_square_p2_and_inside() {
        let t = tol();
        let wgrid = Grid::cube(2, -2.0, 4.0, 0.25).unwrap();
        let cert = near_convexity_certificate(
            &square(),
            &v(&[2.0, 2.0]),
            2.0,
            &[10.0],
            &wgrid,
            &NearConvexityOptions::default(),
            &t,
        )
        .unwrap();
        assert!(cert.is_pass(), "{cert:?}");
        assert!(cert.get_scalar("last_quotient").unwrap() > 10.0 * 2f64.sqrt());

        let cert = near_convexity_certificate(
            &OperatorSpec::identity(1),
            &v(&[0.0]),
            2.0,
            &[1.0],
            &Grid::cube(1, -2.0, 2.0, 0.5).unwrap(),
            &NearConvexityOptions::default(),
            &t,
        )
        .unwrap();
        assert_eq!(cert.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn strict_mode_reports_probe() {
        let t = tol();
        let opts = NearConvexityOptions { strict: true, ..Default::default() };
        let cert = near_convexity_certificate(&interval(), &v(&[2.0]), 2.0, &[1.0, 10.0], &wgrid1(), &opts, &t)
            .unwrap();
        assert!(cert.is_pass());
        assert!(cert.get_scalar("strict_probe_violations").is_some(), "{cert:?}");
    }

    #[test]
    fn conv_domain_examples() {
        let t = tol();
        let g = two_point();
        let cert = conv_domain_certificate(&g, &v(&[2.0]), 1.0, &[1.0], &wgrid1(), &[v(&[1.0])], &t).unwrap();
        assert_eq!(cert.get_scalar("r_emp"), Some(0.0));
        assert_eq!(cert.get_scalar("sup_quotient"), Some(1.0));
        assert_eq!(cert.get_scalar("bound_failures"), Some(0.0));

        let cert = conv_domain_certificate(&interval(), &v(&[2.0]), 1.0, &[1.0, 10.0, 100.0], &wgrid1(), &[], &t)
            .unwrap();
        assert!(cert.is_pass(), "{cert:?}");

        let cert = conv_domain_certificate(&interval(), &v(&[0.5]), 1.0, &[1.0], &wgrid1(), &[], &t).unwrap();
        assert_eq!(cert.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn simons_examples() {
        let t = tol();
        let cert = simons_lower_bound_check(&two_point(), &pp(&[2.], &[1.]), &wgrid1(), &t).unwrap();
        assert!(cert.is_pass());
        assert_eq!(cert.get_scalar("r_emp"), Some(0.0));

        let cert = simons_lower_bound_check(&interval(), &pp(&[2.], &[0.]), &wgrid1(), &t).unwrap();
        assert_eq!(cert.verdict, Verdict::NotApplicable);

        let cert = simons_lower_bound_check(&two_point(), &pp(&[3.], &[2.]), &wgrid1(), &t).unwrap();
        assert!(cert.get_scalar("r_emp").unwrap() >= 0.0);
    }
}
