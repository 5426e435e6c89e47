use rayon::prelude::*;

use super::{candidates_by_distance, search_exceeding};
use crate::certificate::{Certificate, QuotientTrace};
use crate::error::{FitzError, Result};
use crate::fitzpatrick::fitz_domain_projection;
use crate::operators::{fiber, membership, OperatorSpec, Surrogate};
use crate::vecspace::{conv_hull, dist_to_polytope, hausdorff, separate, Grid, PairPoint, ToleranceConfig, Vector};

/// Separates `z` from the hull of the sampled domain by `(y0*, delta)` and, for
/// each `n`, finds `(b_n, b_n*)` in the graph not monotonically related to
/// `(z, n y0*)`; each must satisfy `<z - b_n, b_n*> > n delta`.
pub fn blowup_witness_sequence(
    op: &OperatorSpec,
    z: &Vector,
    n_schedule: &[u64],
    wgrid: &Grid,
    tol: &ToleranceConfig,
) -> Result<(QuotientTrace, Certificate)> {
    const NAME: &str = "blowup_sequence";
    if n_schedule.is_empty() {
        return Err(FitzError::EmptyInput("n schedule"));
    }
    let mut schedule = n_schedule.to_vec();
    schedule.sort_unstable();
    let sur = Surrogate::build(op, wgrid, tol)?;
    let hull = conv_hull(&sur.domain_points(tol), tol)?;
    let (y0, delta) = match separate(z, &hull, tol) {
        Ok(s) => s,
        Err(FitzError::NotSeparable) => {
            let d = dist_to_polytope(z, &hull)?.0;
            return Ok((
                QuotientTrace::default(),
                Certificate::not_applicable(NAME, "z is not separable from the sampled domain hull")
                    .scalar("hull_distance", d)
                    .vector("z", z),
            ));
        }
        Err(e) => return Err(e),
    };
    let order = candidates_by_distance(&sur, z);
    let mut trace = QuotientTrace::default();
    let mut missing = Vec::new();
    let mut short = Vec::new();
    let mut invalid = Vec::new();
    for &n in &schedule {
        let nf = n as f64;
        let target = nf * &y0;
        let need = |b: &PairPoint| nf * y0.inner(&(z - &b.primal));
        let Some(w) = search_exceeding(&sur, &order, z, need, tol) else {
            missing.push(n);
            continue;
        };
        let product = (z - &w.primal).inner(&w.dual);
        let related = PairPoint {
            primal: z.clone(),
            dual: target,
        }
        .monotone_product(&w);
        if !membership(op, &w, tol) || related >= 0.0 {
            invalid.push(n);
        }
        if product <= nf * delta - tol.eq_tol {
            short.push(n);
        }
        trace.push(nf, product, w);
    }
    let cert = if missing.is_empty() && short.is_empty() && invalid.is_empty() {
        Certificate::pass(NAME, "every n has a witness with <z - b_n, b_n*> > n*delta")
    } else if !missing.is_empty() {
        Certificate::fail(NAME, format!("no witness for n in {missing:?}"))
    } else if !invalid.is_empty() {
        Certificate::fail(NAME, format!("witness failed re-verification for n in {invalid:?}"))
    } else {
        Certificate::fail(NAME, format!("product at most n*delta for n in {short:?}"))
    };
    let mut cert = cert.scalar("delta", delta).vector("y0star", &y0);
    if let Some(last) = trace.entries.last() {
        cert = cert.scalar("last_product", last.quotient).pair("last_witness", &last.witness.clone());
    }
    let cert = cert.with_trace(trace.clone());
    Ok((trace, cert))
}

/// Compares the fibre-based projection of `dom F_A` with the hull of the
/// sampled domain, both restricted to the nodes of `xgrid`. Passes when their
/// Hausdorff distance is at most twice the grid spacing.
pub fn theorem36_experiment(op: &OperatorSpec, xgrid: &Grid, tol: &ToleranceConfig) -> Result<(f64, Certificate)> {
    const NAME: &str = "theorem36";
    let nodes = xgrid.nodes(tol.budget)?;
    let in_domain = nodes
        .par_iter()
        .map(|x| Ok(!fiber(op, x, tol)?.is_empty()))
        .collect::<Result<Vec<bool>>>()?;
    let domain: Vec<Vector> = nodes
        .iter()
        .zip(&in_domain)
        .filter_map(|(x, &d)| d.then(|| x.clone()))
        .collect();
    if domain.is_empty() {
        return Ok((
            0.0,
            Certificate::not_applicable(NAME, "the domain does not meet the grid box").scalar("grid_nodes", nodes.len() as f64),
        ));
    }
    let scan = fitz_domain_projection(op, xgrid, tol)?;
    let hull = conv_hull(&domain, tol)?;
    let hull_nodes: Vec<Vector> = nodes
        .par_iter()
        .filter(|x| hull.contains(x, tol))
        .cloned()
        .collect();
    let bound = 2.0 * xgrid.spacing;
    if scan.member_points.is_empty() {
        return Ok((
            f64::MAX,
            Certificate::fail(NAME, "the projection scan found no member points")
                .scalar("hausdorff", f64::MAX)
                .scalar("bound", bound),
        ));
    }
    let d = hausdorff(&scan.member_points, &hull_nodes)?;
    let hull_gap = hausdorff(&domain, &hull_nodes)?;
    let cert = if d <= bound {
        Certificate::pass(NAME, "projection of dom F matches the domain hull within 2*spacing")
    } else {
        Certificate::fail(NAME, "projection of dom F and the domain hull differ beyond 2*spacing")
    };
    let cert = cert
        .scalar("hausdorff", d)
        .scalar("bound", bound)
        .scalar("domain_vs_hull", hull_gap)
        .scalar("member_count", scan.member_points.len() as f64)
        .scalar("hull_node_count", hull_nodes.len() as f64)
        .note(format!("scan method: {:?}", scan.method));
    Ok((d, cert))
}
