use rayon::prelude::*;

use super::fiber::fiber_of;
use super::resolvent::resolvent;
use super::{FiniteGraph, OperatorSpec};
use crate::error::{FitzError, Result};
use crate::vecspace::{Grid, PairPoint, ToleranceConfig, Vector};

fn product_slack(a: &PairPoint, b: &PairPoint, tol: &ToleranceConfig) -> f64 {
    tol.slack(a.primal.dist(&b.primal) * a.dual.dist(&b.dual))
}

/// First pair (in index order) with `<x - y, x* - y*> < -eq_tol`.
pub fn monotone_check(g: &FiniteGraph, tol: &ToleranceConfig) -> Option<(PairPoint, PairPoint)> {
    let pts = g.pairs();
    (0..pts.len()).into_par_iter().find_map_first(|i| {
        (i + 1..pts.len()).find_map(|j| {
            let (a, b) = (&pts[i], &pts[j]);
            (a.monotone_product(b) < -product_slack(a, b, tol)).then(|| (a.clone(), b.clone()))
        })
    })
}

/// `None` when `pt` is monotonically related to every pair of `g`; otherwise
/// the pair with the most negative product (ties go to the lexicographically
/// larger pair).
pub fn monotonically_related(pt: &PairPoint, g: &FiniteGraph, tol: &ToleranceConfig) -> Option<PairPoint> {
    let mut best: Option<(f64, &PairPoint)> = None;
    for q in g.pairs() {
        let prod = pt.monotone_product(q);
        if prod >= -product_slack(pt, q, tol) {
            continue;
        }
        let better = match best {
            None => true,
            Some((bp, bq)) => prod < bp || (prod == bp && q.lex_cmp(bq).is_gt()),
        };
        if better {
            best = Some((prod, q));
        }
    }
    best.map(|(_, q)| q.clone())
}

const MONOTONE_GUARD_SAMPLES: usize = 1024;

/// Minty samples `(J_A w, w - J_A w)` over the nodes of `wgrid`.
pub fn graph_sample(op: &OperatorSpec, wgrid: &Grid, tol: &ToleranceConfig) -> Result<FiniteGraph> {
    if matches!(op, OperatorSpec::Graph { .. }) {
        return Err(FitzError::NotMaximal);
    }
    let nodes = wgrid.nodes(tol.budget)?;
    let pairs = nodes
        .par_iter()
        .map(|w| {
            let x = resolvent(op, w, tol)?;
            let xs = w - &x;
            let residual = fiber_of(op, &x, tol).dist(&xs);
            if residual > tol.slack(xs.norm()) {
                return Err(FitzError::ResidualTooLarge {
                    residual,
                    w: w.as_slice().to_vec(),
                });
            }
            Ok(PairPoint { primal: x, dual: xs })
        })
        .collect::<Result<Vec<_>>>()?;
    let g = FiniteGraph::from_samples(pairs);
    // Residuals already certify each sample; the pairwise guard runs on an
    // evenly strided subset so large grids stay near-linear.
    let stride = g.len().div_ceil(MONOTONE_GUARD_SAMPLES).max(1);
    let guard = FiniteGraph::from_samples(g.pairs().iter().step_by(stride).cloned().collect());
    if let Some((a, b)) = monotone_check(&guard, tol) {
        return Err(FitzError::InvalidSpec(format!(
            "sampled graph not monotone: {:?} vs {:?}",
            a, b
        )));
    }
    Ok(g)
}

/// Points of a grid over `X x X*` that are monotonically related to a graph
/// surrogate of `op` but are not in its graph. Empty is consistent with
/// maximality without proving it.
pub fn maximality_probe(op: &OperatorSpec, probe_grid: &Grid, tol: &ToleranceConfig) -> Result<Vec<PairPoint>> {
    if probe_grid.dim() % 2 != 0 {
        return Err(FitzError::InvalidSpec("probe grid must live in X x X*".into()));
    }
    let n = probe_grid.dim() / 2;
    let split = |v: &Vector| {
        let c = v.as_slice();
        PairPoint {
            primal: Vector::from_raw(c[..n].to_vec()),
            dual: Vector::from_raw(c[n..].to_vec()),
        }
    };
    let surrogate = match op {
        OperatorSpec::Graph { graph } => graph.clone(),
        _ => {
            let lo = split(&probe_grid.lower);
            let hi = split(&probe_grid.upper);
            let wgrid = Grid::new(
                &lo.primal + &lo.dual,
                &hi.primal + &hi.dual,
                probe_grid.spacing / 2.0,
            )?;
            graph_sample(op, &wgrid, tol)?
        }
    };
    let probes = probe_grid.nodes(tol.budget)?;
    Ok(probes
        .par_iter()
        .map(split)
        .filter(|pt| {
            monotonically_related(pt, &surrogate, tol).is_none()
                && !match op {
                    OperatorSpec::Graph { graph } => {
                        graph.pairs().iter().any(|q| q.dist(pt) <= tol.eq_tol)
                    }
                    _ => fiber_of(op, &pt.primal, tol).contains(&pt.dual, tol),
                }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{shift_operator, FunSpec};

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn pp(x: &[f64], y: &[f64]) -> PairPoint {
        PairPoint::new(v(x), v(y)).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn two_point() -> FiniteGraph {
        FiniteGraph::new(vec![pp(&[0.], &[0.]), pp(&[1.], &[1.])], &tol()).unwrap()
    }

    #[test]
    fn monotone_check_examples() {
        let t = tol();
        let g = FiniteGraph::new(vec![pp(&[0., 0.], &[0., 0.]), pp(&[1., 1.], &[1., 1.])], &t).unwrap();
        assert_eq!(monotone_check(&g, &t), None);
        let g = FiniteGraph::new(vec![pp(&[0.], &[0.]), pp(&[1.], &[-1.])], &t).unwrap();
        let (a, b) = monotone_check(&g, &t).unwrap();
        assert_eq!(a.monotone_product(&b), -1.0);
        let g = FiniteGraph::new(vec![pp(&[0., 0.], &[0., 1.]), pp(&[1., 0.], &[-1., 0.])], &t).unwrap();
        let (a, b) = monotone_check(&g, &t).unwrap();
        assert_eq!(a.monotone_product(&b), -1.0);
    }

    #[test]
    fn monotonically_related_examples() {
        let t = tol();
        assert_eq!(monotonically_related(&pp(&[0.5], &[0.5]), &two_point(), &t), None);
        let single = FiniteGraph::new(vec![pp(&[0.], &[0.])], &t).unwrap();
        assert_eq!(monotonically_related(&pp(&[0.], &[1.]), &single, &t), None);
        let w = monotonically_related(&pp(&[2.], &[-1.]), &two_point(), &t).unwrap();
        assert_eq!(w, pp(&[1.], &[1.]));
        assert_eq!(pp(&[2.], &[-1.]).monotone_product(&w), -2.0);
    }

    #[test]
    fn graph_sample_examples() {
        let t = tol();
        let nc = OperatorSpec::normal_cone_box(v(&[0.0]), v(&[1.0]));
        let grid = Grid::new(v(&[-1.0]), v(&[2.0]), 1.5).unwrap();
        let g = graph_sample(&nc, &grid, &t).unwrap();
        assert_eq!(g.pairs(), &[pp(&[0.], &[-1.]), pp(&[0.5], &[0.]), pp(&[1.], &[1.])]);

        let grid = Grid::new(v(&[0.0]), v(&[2.0]), 2.0).unwrap();
        let g = graph_sample(&OperatorSpec::identity(1), &grid, &t).unwrap();
        assert_eq!(g.pairs(), &[pp(&[0.], &[0.]), pp(&[1.], &[1.])]);

        let grid = Grid::new(v(&[-2.0]), v(&[2.0]), 2.0).unwrap();
        let half = OperatorSpec::subdiff(FunSpec::half_norm_sq());
        let g = graph_sample(&half, &grid, &t).unwrap();
        assert_eq!(g.pairs(), &[pp(&[-1.], &[-1.]), pp(&[0.], &[0.]), pp(&[1.], &[1.])]);
    }

    #[test]
    fn maximality_probe_examples() {
        let t = tol();
        let grid = Grid::new(v(&[0.0, 0.0]), v(&[1.0, 1.0]), 0.5).unwrap();
        let found = maximality_probe(&OperatorSpec::graph(two_point()), &grid, &t).unwrap();
        assert!(found.contains(&pp(&[0.5], &[0.5])));

        let grid = Grid::new(v(&[-1.0, -1.0]), v(&[1.0, 1.0]), 0.25).unwrap();
        let found = maximality_probe(&OperatorSpec::identity(1), &grid, &t).unwrap();
        assert!(found.is_empty(), "{found:?}");
    }

    #[test]
    fn shift_preserves_monotone_verdicts() {
        let t = tol();
        let g = FiniteGraph::new(vec![pp(&[0.], &[0.]), pp(&[1.], &[-1.])], &t).unwrap();
        let s = shift_operator(&OperatorSpec::graph(g.clone()), &v(&[3.0]));
        let OperatorSpec::Graph { graph } = s else { unreachable!() };
        assert_eq!(monotone_check(&g, &t).is_some(), monotone_check(&graph, &t).is_some());
    }
}
