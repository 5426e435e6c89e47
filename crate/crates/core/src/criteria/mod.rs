//! Near-convexity criteria and proof constructions as witness-carrying checks.

mod blowup;
mod br;
mod quotient;

pub use crate::certificate::{Certificate, Labeled, QuotientTrace, TraceEntry, Verdict, Witness};
pub use blowup::{blowup_witness_sequence, theorem36_experiment};
pub use br::{br_check, br_check_with};
pub use quotient::{
    conv_domain_certificate, near_convexity_certificate, simons_lower_bound_check, sup_quotient,
    sup_quotient_certificate, NearConvexityOptions,
};

use crate::operators::Surrogate;
use crate::vecspace::{PairPoint, ToleranceConfig, Vector};

/// Sample indices ordered by distance of the primal to `z`, ties broken
/// lexicographically on the pair.
pub(crate) fn candidates_by_distance(sur: &Surrogate, z: &Vector) -> Vec<usize> {
    let pairs = sur.pairs();
    let dists: Vec<f64> = pairs.iter().map(|p| p.primal.dist(z)).collect();
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.sort_by(|&i, &j| {
        dists[i]
            .total_cmp(&dists[j])
            .then_with(|| pairs[i].lex_cmp(&pairs[j]))
    });
    idx
}

/// First graph point `(b, b*)` with `<z - b, b*> > need(b)`: polyhedral rays
/// first (scaled analytically to clear the bound by a unit margin), then
/// sampled duals. `need` must not depend on `b*`.
pub(crate) fn search_exceeding(
    sur: &Surrogate,
    order: &[usize],
    z: &Vector,
    need: impl Fn(&PairPoint) -> f64,
    tol: &ToleranceConfig,
) -> Option<PairPoint> {
    let pairs = sur.pairs();
    for &i in order {
        let a = &pairs[i];
        let diff = z - &a.primal;
        for r in sur.rays_at(i) {
            let slope = diff.inner(r);
            if slope > tol.slack(diff.norm()) {
                let t = (need(a) - diff.inner(&a.dual)).max(0.0) / slope + 1.0;
                return Some(PairPoint {
                    primal: a.primal.clone(),
                    dual: a.dual.add_scaled(t, r),
                });
            }
        }
    }
    order.iter().find_map(|&i| {
        let a = &pairs[i];
        (( z - &a.primal).inner(&a.dual) > need(a)).then(|| a.clone())
    })
}

/// Smallest `||z - a||` over sampled primals.
pub(crate) fn min_distance(sur: &Surrogate, z: &Vector) -> f64 {
    sur.pairs()
        .iter()
        .map(|p| p.primal.dist(z))
        .fold(f64::INFINITY, f64::min)
}
