//! Fitzpatrick function evaluation: exact on finite graphs, closed form for
//! linear maps, and Minty-sampled suprema for everything else.

use std::collections::HashSet;

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{check_dim, FitzError, Result};
use crate::linalg::{sym_pinv, to_dvector};
use crate::operators::{fiber, shift_operator, FiniteGraph, Matrix, OperatorSpec, Surrogate};
use crate::vecspace::{Grid, PairPoint, ToleranceConfig, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FitzValue {
    Finite {
        value: f64,
    },
    /// Some graph point's affine term (`term`) went past `crossed_threshold`.
    InfiniteSuspected {
        crossed_threshold: f64,
        term: f64,
        witness: PairPoint,
    },
}

impl FitzValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, FitzValue::Finite { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            FitzValue::Finite { value } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanMethod {
    LinearConsistency,
    SampledThreshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainScan {
    pub grid: Grid,
    pub member_points: Vec<Vector>,
    pub method: ScanMethod,
}

/// `<x, a*> + <a, x*> - <a, a*>`
#[inline]
pub fn affine_term(pt: &PairPoint, a: &PairPoint) -> f64 {
    pt.primal.inner(&a.dual) + a.primal.inner(&pt.dual) - a.primal.inner(&a.dual)
}

fn check_pair_dims(g: &FiniteGraph, pt: &PairPoint) -> Result<()> {
    check_dim(g.dim(), pt.primal.dim())?;
    check_dim(g.dim(), pt.dual.dim())
}

fn max_term(pairs: &[PairPoint], pt: &PairPoint) -> f64 {
    pairs
        .iter()
        .map(|a| affine_term(pt, a))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact `F_A` for a finite graph.
pub fn fitz_finite(g: &FiniteGraph, pt: &PairPoint) -> Result<f64> {
    if g.is_empty() {
        return Err(FitzError::EmptyInput("finite graph"));
    }
    check_pair_dims(g, pt)?;
    Ok(max_term(g.pairs(), pt))
}

/// Closed form for `x -> Mx + c`: with `M_s = (M + M^T)/2` and
/// `s = M^T x + x* - c`, `F = <x, c> + 1/4 s^T M_s^+ s` when `s` lies in the
/// range of `M_s`, and `+inf` otherwise.
pub fn fitz_linear(m: &Matrix, c: &Vector, pt: &PairPoint, tol: &ToleranceConfig) -> Result<FitzValue> {
    check_dim(m.dim(), c.dim())?;
    check_dim(m.dim(), pt.dim())?;
    let (x, xs) = (&pt.primal, &pt.dual);
    let s = &(&m.apply_transpose(x) + xs) - c;
    let (pinv, null) = sym_pinv(&m.symmetric_part(), tol.rank_tol);
    let sd = to_dvector(&s);
    let mut perp = nalgebra::DVector::zeros(s.dim());
    for u in &null {
        perp += u * u.dot(&sd);
    }
    let perp_norm = perp.norm();
    let base = x.inner(c);
    if perp_norm <= tol.rank_tol * s.norm().max(1.0) {
        let value = base + 0.25 * sd.dot(&(&pinv * &sd));
        return Ok(FitzValue::Finite { value });
    }
    // Along the null direction u the term is base + t ||s_perp||.
    let u = Vector::from_raw((perp / perp_norm).iter().copied().collect());
    let t = (tol.inf_threshold - base).max(0.0) / perp_norm + 1.0;
    let a = t * &u;
    let astar = &m.apply(&a) + c;
    let witness = PairPoint { primal: a, dual: astar };
    let term = affine_term(pt, &witness);
    Ok(FitzValue::InfiniteSuspected {
        crossed_threshold: tol.inf_threshold,
        term,
        witness,
    })
}

/// Sampled lower bound for `F_A` over a [`Surrogate`].
///
/// Samples are scanned in order; the first affine term past `inf_threshold`
/// (including terms pushed along fiber rays, which grow linearly whenever
/// `<x - a, r> > 0`) ends the scan. For a maximal operator the Minty point of
/// `x + x*` is included as well, which supplies the term
/// `<x, x*> + ||x - J_A(x + x*)||^2`.
#[derive(Clone, Debug)]
pub struct FitzSampler {
    surrogate: Surrogate,
    tol: ToleranceConfig,
}

impl FitzSampler {
    pub fn new(surrogate: Surrogate, tol: &ToleranceConfig) -> Self {
        FitzSampler {
            surrogate,
            tol: tol.clone(),
        }
    }

    pub fn build(op: &OperatorSpec, wgrid: &Grid, tol: &ToleranceConfig) -> Result<Self> {
        Ok(Self::new(Surrogate::build(op, wgrid, tol)?, tol))
    }

    pub fn surrogate(&self) -> &Surrogate {
        &self.surrogate
    }

    pub fn eval(&self, pt: &PairPoint) -> Result<FitzValue> {
        check_pair_dims(&self.surrogate.graph, pt)?;
        let pairs = self.surrogate.pairs();
        if self.surrogate.is_finite_graph() {
            // Exact: no threshold, bit-identical to `fitz_finite`.
            return Ok(FitzValue::Finite {
                value: max_term(pairs, pt),
            });
        }
        let tol = &self.tol;
        let threshold = tol.inf_threshold;
        let rays = &self.surrogate.rays;
        let mut next_ray = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, a) in pairs.iter().enumerate() {
            let term = affine_term(pt, a);
            if term > threshold {
                return Ok(FitzValue::InfiniteSuspected {
                    crossed_threshold: threshold,
                    term,
                    witness: a.clone(),
                });
            }
            best = best.max(term);
            while next_ray < rays.len() && rays[next_ray].index <= i {
                let r = &rays[next_ray];
                next_ray += 1;
                if r.index < i {
                    continue;
                }
                let slope = pt.primal.inner(&r.ray) - a.primal.inner(&r.ray);
                if slope > tol.slack(pt.primal.dist(&a.primal)) {
                    let t = (threshold - term) / slope + 1.0;
                    let witness = PairPoint {
                        primal: a.primal.clone(),
                        dual: a.dual.add_scaled(t, &r.ray),
                    };
                    return Ok(FitzValue::InfiniteSuspected {
                        crossed_threshold: threshold,
                        term: affine_term(pt, &witness),
                        witness,
                    });
                }
            }
        }
        if let Some(m) = self.surrogate.minty(pt, tol) {
            best = best.max(affine_term(pt, &m));
        }
        Ok(FitzValue::Finite { value: best })
    }
}

/// Sampled `F_A(pt)` over the Minty image of `wgrid`.
pub fn fitz_sampled(op: &OperatorSpec, pt: &PairPoint, wgrid: &Grid, tol: &ToleranceConfig) -> Result<FitzValue> {
    FitzSampler::build(op, wgrid, tol)?.eval(pt)
}

/// Grid nodes `x` admitting a probe `x*` with finite `F_A(x, x*)`.
///
/// Linear maps use the exact probe `x* = Mx + c`. Other operators are sampled
/// over a grid of resolvent arguments twice the width of `xgrid`; the probes
/// are the dual of the nearest sample and the fiber at that sample's primal.
pub fn fitz_domain_projection(op: &OperatorSpec, xgrid: &Grid, tol: &ToleranceConfig) -> Result<DomainScan> {
    let nodes = xgrid.nodes(tol.budget)?;
    match op {
        OperatorSpec::Graph { .. } => Err(FitzError::VacuousForFiniteGraph),
        OperatorSpec::Linear { matrix, offset } => {
            let flags = nodes
                .par_iter()
                .map(|x| {
                    let probe = PairPoint {
                        primal: x.clone(),
                        dual: &matrix.apply(x) + offset,
                    };
                    fitz_linear(matrix, offset, &probe, tol).map(|v| v.is_finite())
                })
                .collect::<Result<Vec<bool>>>()?;
            Ok(DomainScan {
                grid: xgrid.clone(),
                member_points: select(nodes, &flags),
                method: ScanMethod::LinearConsistency,
            })
        }
        _ => {
            let sampler = FitzSampler::build(op, &xgrid.expanded(0.5), tol)?;
            let pairs = sampler.surrogate().pairs();
            let index = NearestPrimal::new(pairs);
            let flags = nodes
                .par_iter()
                .map(|x| {
                    let nearest = &pairs[index.nearest(x)];
                    let mut probes = vec![nearest.dual.clone()];
                    probes.extend(fiber(op, &nearest.primal, tol)?.points);
                    for p in probes {
                        let pt = PairPoint {
                            primal: x.clone(),
                            dual: p,
                        };
                        if sampler.eval(&pt)?.is_finite() {
                            return Ok(true);
                        }
                    }
                    Ok(false)
                })
                .collect::<Result<Vec<bool>>>()?;
            Ok(DomainScan {
                grid: xgrid.clone(),
                member_points: select(nodes, &flags),
                method: ScanMethod::SampledThreshold,
            })
        }
    }
}

/// Nearest-sample lookup over distinct primals; ties go to the lowest sample index.
struct NearestPrimal {
    tree: KdTree<f64, usize, Vec<f64>>,
}

impl NearestPrimal {
    const CANDIDATES: usize = 4;

    fn new(pairs: &[PairPoint]) -> Self {
        let dim = pairs.first().map_or(1, |p| p.dim());
        let mut tree = KdTree::new(dim);
        let mut seen = HashSet::new();
        for (i, p) in pairs.iter().enumerate() {
            let key: Vec<u64> = p.primal.iter().map(|c| c.to_bits()).collect();
            if seen.insert(key) {
                tree.add(p.primal.as_slice().to_vec(), i).expect("finite sample coordinates");
            }
        }
        NearestPrimal { tree }
    }

    fn nearest(&self, x: &Vector) -> usize {
        let found = self
            .tree
            .nearest(x.as_slice(), Self::CANDIDATES, &squared_euclidean)
            .expect("finite query point");
        let best = found.iter().map(|(d, _)| *d).fold(f64::INFINITY, f64::min);
        found
            .iter()
            .filter(|(d, _)| *d == best)
            .map(|(_, &i)| i)
            .min()
            .expect("sampled graph is nonempty")
    }
}

fn select(nodes: Vec<Vector>, flags: &[bool]) -> Vec<Vector> {
    nodes
        .into_iter()
        .zip(flags)
        .filter_map(|(x, &keep)| keep.then_some(x))
        .collect()
}

/// `F >= <x, x*>` on `sample_pts`, and `F = <x, x*>` on `graph_pts` up to a
/// sampling slack of `2 h L`, where `h` is the largest nearest-neighbour gap
/// in `graph_pts` and `L` the largest sampled `||(a, a*)||`.
pub fn fitz_inequality_check(
    op: &OperatorSpec,
    sample_pts: &[PairPoint],
    graph_pts: &FiniteGraph,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    const NAME: &str = "fitz_inequality";
    let sampler = FitzSampler::new(Surrogate::from_graph(op, graph_pts.clone(), tol), tol);
    let gaps = sample_pts
        .par_iter()
        .map(|pt| {
            Ok(match sampler.eval(pt)? {
                FitzValue::Finite { value } => pt.pairing() - value,
                FitzValue::InfiniteSuspected { .. } => f64::NEG_INFINITY,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some((i, gap)) = gaps
        .iter()
        .copied()
        .enumerate()
        .find(|&(_, g)| g > tol.eq_tol)
    {
        let pt = &sample_pts[i];
        let f = pt.pairing() - gap;
        return Ok(Certificate::fail(
            NAME,
            "F falls below the pairing at a sample point; the sampled operator is not maximal",
        )
        .scalar("gap", gap)
        .pair("violating_point", pt)
        .scalar("fitz_value", f)
        .scalar("pairing", pt.pairing()));
    }

    let pairs = graph_pts.pairs();
    let h = pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            pairs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| p.dist(q))
                .fold(f64::INFINITY, f64::min)
        })
        .map(|d| if d.is_finite() { d } else { 0.0 })
        .reduce(|| 0.0, f64::max);
    let lip = pairs
        .iter()
        .map(|p| (p.primal.norm_sq() + p.dual.norm_sq()).sqrt())
        .fold(0.0, f64::max);
    let slack = (2.0 * h * lip).max(tol.eq_tol);
    let deviations = pairs
        .par_iter()
        .map(|pt| {
            Ok(match sampler.eval(pt)? {
                FitzValue::Finite { value } => (value - pt.pairing()).abs(),
                FitzValue::InfiniteSuspected { .. } => f64::INFINITY,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = deviations.iter().copied().enumerate().fold(
        (0usize, 0.0_f64),
        |acc, (i, d)| if d > acc.1 { (i, d) } else { acc },
    );
    let worst_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if worst.1 > slack {
        return Ok(Certificate::fail(NAME, "F differs from the pairing at a sampled graph point")
            .scalar("deviation", worst.1)
            .pair("graph_point", &pairs[worst.0])
            .scalar("slack", slack));
    }
    Ok(Certificate::pass(
        NAME,
        format!(
            "F >= pairing on {} samples; F = pairing on {} graph points within 2*h*L",
            sample_pts.len(),
            pairs.len()
        ),
    )
    .scalar("max_graph_deviation", worst.1)
    .scalar("slack", slack)
    .scalar("spacing_h", h)
    .scalar("local_bound_l", lip)
    .scalar("worst_sample_gap", if worst_gap.is_finite() { worst_gap } else { 0.0 }))
}

/// `F_B(z, 0) = -<z, z*> + F_A(z, z*)` where `gra B = gra A - {(0, z*)}`.
pub fn shift_identity_check(g: &FiniteGraph, z: &Vector, zstar: &Vector, tol: &ToleranceConfig) -> Result<Certificate> {
    const NAME: &str = "shift_identity";
    let OperatorSpec::Graph { graph: shifted } = shift_operator(&OperatorSpec::graph(g.clone()), zstar)
    else {
        unreachable!("shifting a graph yields a graph")
    };
    let lhs = fitz_finite(&shifted, &PairPoint::new(z.clone(), Vector::zeros(z.dim()))?)?;
    let rhs = -z.inner(zstar) + fitz_finite(g, &PairPoint::new(z.clone(), zstar.clone())?)?;
    let diff = (lhs - rhs).abs();
    let cert = if diff <= tol.eq_tol {
        Certificate::pass(NAME, "both sides agree")
    } else {
        Certificate::fail(NAME, "sides differ beyond eq_tol")
    };
    Ok(cert.scalar("difference", diff).scalar("lhs", lhs).scalar("rhs", rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::Verdict;
    use crate::operators::FunSpec;

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

    fn skew() -> Matrix {
        Matrix::new(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn finite_examples() {
        assert_eq!(fitz_finite(&two_point(), &pp(&[2.], &[1.])).unwrap(), 2.0);
        assert_eq!(fitz_finite(&two_point(), &pp(&[1.], &[1.])).unwrap(), 1.0);
        let single = FiniteGraph::new(vec![pp(&[0.], &[0.])], &tol()).unwrap();
        assert_eq!(fitz_finite(&single, &pp(&[-3.], &[7.])).unwrap(), 0.0);
    }

    #[test]
    fn linear_examples() {
        let t = tol();
        let z = v(&[0., 0.]);
        let f = fitz_linear(&Matrix::identity(2), &z, &pp(&[1., 0.], &[1., 0.]), &t).unwrap();
        assert!((f.value().unwrap() - 1.0).abs() < 1e-12);
        let f = fitz_linear(&skew(), &z, &pp(&[1., 0.], &[0., 1.]), &t).unwrap();
        assert!(f.value().unwrap().abs() < 1e-12);
        let f = fitz_linear(&skew(), &z, &pp(&[1., 0.], &[0., 0.]), &t).unwrap();
        let FitzValue::InfiniteSuspected { term, witness, .. } = f else {
            panic!("expected infinite, got {f:?}")
        };
        assert!(term > t.inf_threshold);
        let check = affine_term(&pp(&[1., 0.], &[0., 0.]), &witness);
        assert_eq!(check, term);
    }

    #[test]
    fn sampled_examples() {
        let t = tol();
        let g = OperatorSpec::graph(two_point());
        let wgrid = Grid::cube(1, -1.0, 1.0, 0.5).unwrap();
        assert_eq!(
            fitz_sampled(&g, &pp(&[2.], &[1.]), &wgrid, &t).unwrap(),
            FitzValue::Finite { value: 2.0 }
        );

        let fine = Grid::cube(2, -2.0, 6.0, 0.1).unwrap();
        let f = fitz_sampled(&OperatorSpec::identity(2), &pp(&[1., 1.], &[1., 1.]), &fine, &t).unwrap();
        assert!((f.value().unwrap() - 2.0).abs() < 1e-3);

        let nc = OperatorSpec::normal_cone_box(v(&[0.0]), v(&[1.0]));
        let wgrid = Grid::cube(1, -3.0, 5.0, 0.05).unwrap();
        let f = fitz_sampled(&nc, &pp(&[2.], &[0.]), &wgrid, &t).unwrap();
        let FitzValue::InfiniteSuspected { witness, term, .. } = f else { panic!() };
        assert_eq!(witness.primal, v(&[1.0]));
        assert!(term > t.inf_threshold);
    }

    #[test]
    fn domain_projection_examples() {
        let t = tol();
        let grid = Grid::cube(1, -1.0, 3.0, 0.05).unwrap();
        let nc = OperatorSpec::normal_cone_box(v(&[0.0]), v(&[1.0]));
        let scan = fitz_domain_projection(&nc, &grid, &t).unwrap();
        assert_eq!(scan.method, ScanMethod::SampledThreshold);
        assert_eq!(scan.member_points.len(), 21);
        assert!(scan.member_points.iter().all(|x| x[0] > -1e-9 && x[0] < 1.0 + 1e-9));

        let grid2 = Grid::cube(2, -1.0, 1.0, 0.25).unwrap();
        let scan = fitz_domain_projection(&OperatorSpec::identity(2), &grid2, &t).unwrap();
        assert_eq!(scan.member_points.len(), grid2.count());
        let rot = OperatorSpec::linear(skew(), v(&[0., 0.]), &t).unwrap();
        let scan = fitz_domain_projection(&rot, &grid2, &t).unwrap();
        assert_eq!(scan.method, ScanMethod::LinearConsistency);
        assert_eq!(scan.member_points.len(), grid2.count());

        assert_eq!(
            fitz_domain_projection(&OperatorSpec::graph(two_point()), &grid, &t),
            Err(FitzError::VacuousForFiniteGraph)
        );
    }

    #[test]
    fn inequality_fails_on_nonmaximal_graph() {
        let t = tol();
        let g = two_point();
        let cert = fitz_inequality_check(&OperatorSpec::graph(g.clone()), &[pp(&[0.5], &[0.5])], &g, &t).unwrap();
        assert_eq!(cert.verdict, Verdict::Fail);
        assert!((cert.get_scalar("gap").unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn inequality_passes_on_sampled_subdifferential() {
        let t = tol();
        let op = OperatorSpec::subdiff(FunSpec::half_norm_sq());
        let g = crate::operators::graph_sample(&op, &Grid::cube(1, -4.0, 4.0, 0.05).unwrap(), &t).unwrap();
        let samples: Vec<PairPoint> = (0..50)
            .map(|k| pp(&[(k as f64 * 0.37).sin() * 3.0], &[(k as f64 * 0.91).cos() * 3.0]))
            .collect();
        let cert = fitz_inequality_check(&op, &samples, &g, &t).unwrap();
        assert_eq!(cert.verdict, Verdict::Pass, "{cert:?}");
    }

    #[test]
    fn shift_identity_examples() {
        let t = tol();
        let cert = shift_identity_check(&two_point(), &v(&[2.0]), &v(&[1.0]), &t).unwrap();
        assert!(cert.is_pass());
        assert_eq!(cert.get_scalar("lhs"), Some(0.0));
        let cert = shift_identity_check(&two_point(), &v(&[2.0]), &v(&[0.0]), &t).unwrap();
        assert!(cert.is_pass());
    }
}
