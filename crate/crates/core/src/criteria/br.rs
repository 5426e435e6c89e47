use crate::certificate::Certificate;
use crate::error::{FitzError, Result};
use crate::operators::{membership, resolvent_scaled, OperatorSpec, Surrogate};
use crate::vecspace::{Grid, PairPoint, ToleranceConfig};

/// If `inf <x - a, x* - a*> > -alpha beta` over the sampled graph, look for a
/// graph point `(b, b*)` with `||x - b|| < alpha` and `||x* - b*|| < beta`.
///
/// Besides the grid samples, the candidate set includes the resolvent point of
/// `gamma A` at `x + gamma x*` with `gamma = alpha / beta`, which is the local
/// refinement around `xpair`.
pub fn br_check(
    op: &OperatorSpec,
    xpair: &PairPoint,
    alpha: f64,
    beta: f64,
    wgrid: &Grid,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    let sur = Surrogate::build(op, wgrid, tol)?;
    br_check_with(&sur, xpair, alpha, beta, tol)
}

/// [`br_check`] against a prebuilt surrogate, for repeated trials.
pub fn br_check_with(
    sur: &Surrogate,
    xpair: &PairPoint,
    alpha: f64,
    beta: f64,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    const NAME: &str = "br";
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(FitzError::InvalidSpec("alpha and beta must be positive".into()));
    }
    let op = sur.op();
    let (x, xs) = (&xpair.primal, &xpair.dual);

    let mut candidates: Vec<PairPoint> = sur.pairs().to_vec();
    if !sur.is_finite_graph() {
        let gamma = alpha / beta;
        let w = x.add_scaled(gamma, xs);
        if let Ok(b) = resolvent_scaled(op, gamma, &w, tol) {
            let bs = (1.0 / gamma) * &(&w - &b);
            let pt = PairPoint { primal: b, dual: bs };
            if membership(op, &pt, tol) {
                candidates.push(pt);
            }
        }
    }

    let mut inf = f64::INFINITY;
    let mut argmin = 0usize;
    for (i, a) in candidates.iter().enumerate() {
        let prod = xpair.monotone_product(a);
        if prod < inf {
            inf = prod;
            argmin = i;
        }
    }
    for r in &sur.rays {
        let a = &sur.pairs()[r.index];
        if (x - &a.primal).inner(&r.ray) > tol.slack(x.dist(&a.primal)) {
            return Ok(Certificate::not_applicable(NAME, "inf product is unbounded below along a fiber ray")
                .scalar("inf_product", f64::MIN)
                .pair("ray_base", a)
                .vector("ray", &r.ray));
        }
    }
    if inf <= -alpha * beta + tol.eq_tol {
        return Ok(Certificate::not_applicable(NAME, "hypothesis inf > -alpha*beta does not hold")
            .scalar("inf_product", inf)
            .scalar("neg_alpha_beta", -alpha * beta)
            .pair("argmin", &candidates[argmin]));
    }

    let score = |b: &PairPoint| (x.dist(&b.primal) / alpha).max(xs.dist(&b.dual) / beta);
    let mut best = 0usize;
    let mut best_score = f64::INFINITY;
    for (i, b) in candidates.iter().enumerate() {
        let s = score(b);
        if s < best_score || (s == best_score && b.lex_cmp(&candidates[best]).is_lt()) {
            best = i;
            best_score = s;
        }
    }
    let b = &candidates[best];
    let cert = if best_score < 1.0 {
        Certificate::pass(NAME, "found (b, b*) in the graph within (alpha, beta)")
    } else {
        Certificate::fail(NAME, "no sampled graph point within (alpha, beta); best near-miss recorded")
    };
    Ok(cert
        .scalar("score", best_score)
        .pair("b", b)
        .scalar("inf_product", inf)
        .scalar("primal_gap", x.dist(&b.primal))
        .scalar("dual_gap", xs.dist(&b.dual)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::Verdict;
    use crate::operators::FunSpec;
    use crate::vecspace::Vector;

    fn pp(x: f64, y: f64) -> PairPoint {
        PairPoint::new(Vector::new(vec![x]).unwrap(), Vector::new(vec![y]).unwrap()).unwrap()
    }

    #[test]
    fn br_examples() {
        let t = ToleranceConfig::default();
        let op = OperatorSpec::subdiff(FunSpec::half_norm_sq());
        let grid = Grid::cube(1, -4.0, 4.0, 0.1).unwrap();
        let cert = br_check(&op, &pp(1.0, 0.0), 0.6, 0.6, &grid, &t).unwrap();
        assert!(cert.is_pass(), "{cert:?}");
        assert!((cert.get_scalar("inf_product").unwrap() + 0.25).abs() < 1e-12);
        let b = cert.get_pair("b").unwrap();
        assert!(b.dist(&pp(0.5, 0.5)) < 1e-12);

        let cert = br_check(&op, &pp(0.7, 0.7), 0.01, 0.01, &grid, &t).unwrap();
        assert!(cert.is_pass());
        assert!(cert.get_scalar("score").unwrap() < 1e-12);

        let cert = br_check(&op, &pp(1.0, 0.0), 0.1, 0.1, &grid, &t).unwrap();
        assert_eq!(cert.verdict, Verdict::NotApplicable);
    }
}
