use super::{ConvexSet, FunSpec, Matrix, OperatorSpec};
use crate::error::{check_dim, FitzError, Result};
use crate::linalg::{from_dvector, nearest_in_hull, solve, to_dvector};
use crate::vecspace::{ToleranceConfig, Vector};

use super::fiber::function_fiber;

/// The unique `x` with `w - x in A(x)`.
pub fn resolvent(op: &OperatorSpec, w: &Vector, tol: &ToleranceConfig) -> Result<Vector> {
    resolvent_scaled(op, 1.0, w, tol)
}

/// Whether [`resolvent`] has a computable path for `op`.
pub fn has_resolvent(op: &OperatorSpec) -> bool {
    match op {
        OperatorSpec::Graph { .. } => false,
        OperatorSpec::Shifted { inner, .. } => has_resolvent(inner),
        OperatorSpec::Perturbed { inner, p, .. } => {
            if *p == 2.0 {
                has_resolvent(inner)
            } else {
                as_function(inner).is_some()
            }
        }
        _ => true,
    }
}

/// `J_{gamma A}(w)`, the resolvent of the scaled operator.
pub(crate) fn resolvent_scaled(
    op: &OperatorSpec,
    gamma: f64,
    w: &Vector,
    tol: &ToleranceConfig,
) -> Result<Vector> {
    if let Some(dim) = op.infer_dim() {
        check_dim(dim, w.dim())?;
    }
    match op {
        OperatorSpec::Graph { .. } => Err(FitzError::NotMaximal),
        OperatorSpec::Linear { matrix, offset } => {
            let n = matrix.dim();
            let a = nalgebra::DMatrix::identity(n, n) + matrix.to_dmatrix() * gamma;
            let rhs = to_dvector(&w.add_scaled(-gamma, offset));
            solve(a, &rhs)
                .map(|x| from_dvector(&x))
                .ok_or_else(|| FitzError::NoClosedForm("singular linear resolvent".into()))
        }
        OperatorSpec::Subdiff { function } => prox(function, gamma, w, tol),
        OperatorSpec::NormalCone { set } => Ok(match set {
            ConvexSet::Box { lo, hi } => clamp(w, lo, hi),
            ConvexSet::Polytope { vertices } => nearest_in_hull(w, vertices).0,
        }),
        OperatorSpec::DualityMap { p, center } => {
            Ok(center + &norm_power_prox(*p, gamma, &(w - center)))
        }
        OperatorSpec::Shifted { inner, zstar } => {
            resolvent_scaled(inner, gamma, &w.add_scaled(gamma, zstar), tol)
        }
        OperatorSpec::Perturbed {
            inner,
            lambda,
            p,
            center,
        } => {
            if *p == 2.0 {
                let k = 1.0 + gamma * lambda;
                let w2 = (1.0 / k) * &w.add_scaled(gamma * lambda, center);
                resolvent_scaled(inner, gamma / k, &w2, tol)
            } else {
                match as_function(op) {
                    Some(f) => prox(&f, gamma, w, tol),
                    None => Err(FitzError::NoClosedForm(format!(
                        "perturbation with p = {p} over an operator without a potential"
                    ))),
                }
            }
        }
    }
}

/// A convex potential `f` with `op = df`, when one is expressible.
pub(crate) fn as_function(op: &OperatorSpec) -> Option<FunSpec> {
    match op {
        OperatorSpec::Graph { .. } => None,
        OperatorSpec::Linear { matrix, offset } => (matrix.asymmetry() == 0.0).then(|| {
            FunSpec::Quadratic {
                q: matrix.clone(),
                b: offset.clone(),
            }
        }),
        OperatorSpec::Subdiff { function } => Some(function.clone()),
        OperatorSpec::NormalCone { set } => match set {
            ConvexSet::Box { lo, hi } => Some(FunSpec::BoxIndicator {
                lo: lo.clone(),
                hi: hi.clone(),
            }),
            ConvexSet::Polytope { .. } => None,
        },
        OperatorSpec::DualityMap { p, center } => Some(FunSpec::TranslatedNormPower {
            p: *p,
            scale: 1.0,
            center: center.clone(),
        }),
        OperatorSpec::Shifted { inner, zstar } => {
            let f = as_function(inner)?;
            let n = zstar.dim();
            Some(FunSpec::Sum {
                terms: vec![
                    f,
                    FunSpec::Quadratic {
                        q: Matrix::zeros(n),
                        b: -zstar,
                    },
                ],
            })
        }
        OperatorSpec::Perturbed {
            inner,
            lambda,
            p,
            center,
        } => {
            let f = as_function(inner)?;
            Some(FunSpec::Sum {
                terms: vec![
                    f,
                    FunSpec::TranslatedNormPower {
                        p: *p,
                        scale: *lambda,
                        center: center.clone(),
                    },
                ],
            })
        }
    }
}

fn clamp(w: &Vector, lo: &Vector, hi: &Vector) -> Vector {
    Vector::from_raw(
        w.iter()
            .zip(lo.iter().zip(hi.iter()))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect(),
    )
}

/// `prox_{g (1/p)||.||^p}(w)` with `g = gamma * scale` folded in by the caller.
fn norm_power_prox(p: f64, g: f64, w: &Vector) -> Vector {
    let r = w.norm();
    if r == 0.0 {
        return w.clone();
    }
    let t = if p == 1.0 {
        (r - g).max(0.0)
    } else if p == 2.0 {
        r / (1.0 + g)
    } else {
        // t + g t^{p-1} = r has a unique root in [0, r].
        let (mut lo, mut hi) = (0.0_f64, r);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + g * mid.powf(p - 1.0) > r {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-16 * r {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    (t / r) * w
}

/// Proximal map of `gamma * f`.
pub(crate) fn prox(f: &FunSpec, gamma: f64, w: &Vector, tol: &ToleranceConfig) -> Result<Vector> {
    match f {
        FunSpec::Quadratic { q, b } => {
            let n = q.dim();
            let a = nalgebra::DMatrix::identity(n, n) + q.to_dmatrix() * gamma;
            solve(a, &to_dvector(&w.add_scaled(-gamma, b)))
                .map(|x| from_dvector(&x))
                .ok_or_else(|| FitzError::NoClosedForm("singular quadratic prox".into()))
        }
        FunSpec::BoxIndicator { lo, hi } => Ok(clamp(w, lo, hi)),
        FunSpec::NormPower { p, scale } => Ok(norm_power_prox(*p, gamma * scale, w)),
        FunSpec::TranslatedNormPower { p, scale, center } => {
            Ok(center + &norm_power_prox(*p, gamma * scale, &(w - center)))
        }
        FunSpec::Sum { .. } => {
            let leaves = f.flatten();
            if let Some(x) = diagonal_quadratic_box(&leaves, gamma, w) {
                return Ok(x);
            }
            let x = dykstra(&leaves, gamma, w, tol)?;
            let residual = function_fiber(f, &x, tol).dist(&((1.0 / gamma) * &(w - &x)));
            if residual <= tol.slack(w.norm()).max(10.0 * tol.eq_tol) {
                Ok(x)
            } else {
                Err(FitzError::NoClosedForm(format!(
                    "composite prox did not converge within budget (residual {residual:.3e})"
                )))
            }
        }
    }
}

/// Sums of quadratics with diagonal total and boxes: separable, closed form.
fn diagonal_quadratic_box(leaves: &[FunSpec], gamma: f64, w: &Vector) -> Option<Vector> {
    let n = w.dim();
    let mut qd = vec![0.0; n];
    let mut qfull = Matrix::zeros(n);
    let mut b = vec![0.0; n];
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    for leaf in leaves {
        match leaf {
            FunSpec::Quadratic { q, b: bb } => {
                qfull = qfull.plus(q);
                for i in 0..n {
                    b[i] += bb[i];
                }
            }
            FunSpec::BoxIndicator { lo: l, hi: h } => {
                for i in 0..n {
                    lo[i] = lo[i].max(l[i]);
                    hi[i] = hi[i].min(h[i]);
                }
            }
            _ => return None,
        }
    }
    if !qfull.is_diagonal() {
        return None;
    }
    for (i, d) in qd.iter_mut().enumerate() {
        *d = qfull.get(i, i);
    }
    Some(Vector::from_raw(
        (0..n)
            .map(|i| ((w[i] - gamma * b[i]) / (1.0 + gamma * qd[i])).clamp(lo[i], hi[i]))
            .collect(),
    ))
}

/// Dykstra-like proximal splitting for `prox_{gamma (f_1 + ... + f_k)}`,
/// splitting off the first term recursively.
fn dykstra(leaves: &[FunSpec], gamma: f64, w: &Vector, tol: &ToleranceConfig) -> Result<Vector> {
    if leaves.len() == 1 {
        return prox(&leaves[0], gamma, w, tol);
    }
    let (first, rest) = (&leaves[0], &leaves[1..]);
    let n = w.dim();
    let mut x = w.clone();
    let mut p = Vector::zeros(n);
    let mut q = Vector::zeros(n);
    let iters = tol.budget.clamp(1, 20_000);
    for _ in 0..iters {
        let y = dykstra(rest, gamma, &(&x + &p), tol)?;
        p = &(&x + &p) - &y;
        let x_new = prox(first, gamma, &(&y + &q), tol)?;
        q = &(&y + &q) - &x_new;
        let step = x_new.dist(&x).max(x_new.dist(&y));
        x = x_new;
        if step <= 1e-3 * tol.eq_tol * x.norm().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// `dist(w - x, A(x))` for a resolvent output.
#[cfg(test)]
pub(crate) fn resolvent_residual(op: &OperatorSpec, w: &Vector, x: &Vector, tol: &ToleranceConfig) -> f64 {
    super::fiber::fiber_of(op, x, tol).dist(&(w - x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{perturb, shift_operator, FiniteGraph};
    use crate::vecspace::PairPoint;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn closed_form_examples() {
        let t = tol();
        assert_eq!(
            resolvent(&OperatorSpec::identity(2), &v(&[2.0, 2.0]), &t).unwrap(),
            v(&[1.0, 1.0])
        );
        let square = OperatorSpec::normal_cone_box(v(&[0., 0.]), v(&[1., 1.]));
        assert_eq!(resolvent(&square, &v(&[2.0, 0.5]), &t).unwrap(), v(&[1.0, 0.5]));
        let half = OperatorSpec::subdiff(FunSpec::half_norm_sq());
        assert_eq!(resolvent(&half, &v(&[4.0]), &t).unwrap(), v(&[2.0]));
    }

    #[test]
    fn graph_has_no_resolvent() {
        let t = tol();
        let g = FiniteGraph::new(vec![PairPoint::new(v(&[0.0]), v(&[0.0])).unwrap()], &t).unwrap();
        let op = OperatorSpec::graph(g);
        assert!(!has_resolvent(&op));
        assert_eq!(resolvent(&op, &v(&[0.0]), &t), Err(FitzError::NotMaximal));
    }

    #[test]
    fn norm_power_prox_solves_its_equation() {
        for p in [1.0, 1.5, 2.0, 3.0, 4.5] {
            let w = v(&[3.0, -1.0]);
            let x = norm_power_prox(p, 0.7, &w);
            let r = x.norm();
            let grad = if r > 0.0 { 0.7 * r.powf(p - 2.0) } else { 0.0 };
            let back = x.add_scaled(grad, &x);
            assert!(back.dist(&w) < 1e-10, "p = {p}");
        }
        assert_eq!(norm_power_prox(1.0, 5.0, &v(&[3.0, 4.0])), v(&[0.0, 0.0]));
    }

    #[test]
    fn perturbed_reduction_matches_direct_solve() {
        let t = tol();
        let c = v(&[0.5, -1.0]);
        let base = OperatorSpec::normal_cone_box(v(&[0., 0.]), v(&[1., 1.]));
        let op = perturb(&base, 3.0, 2.0, &c).unwrap();
        for w in [[2.0, 0.5], [-1.0, 3.0], [0.4, 0.6]] {
            let w = v(&w);
            let x = resolvent(&op, &w, &t).unwrap();
            assert!(resolvent_residual(&op, &w, &x, &t) < 1e-9);
        }
    }

    #[test]
    fn perturbed_p1_uses_composite_prox() {
        let t = tol();
        let base = OperatorSpec::normal_cone_box(v(&[0.0]), v(&[1.0]));
        let op = perturb(&base, 1.0, 1.0, &v(&[2.0])).unwrap();
        assert!(has_resolvent(&op));
        for w in [-3.0, 0.0, 0.5, 1.7, 4.0] {
            let w = v(&[w]);
            let x = resolvent(&op, &w, &t).unwrap();
            assert!(resolvent_residual(&op, &w, &x, &t) < 1e-8, "w = {w:?}, x = {x:?}");
        }
    }

    #[test]
    fn shifted_resolvent_moves_the_dual() {
        let t = tol();
        let op = shift_operator(&OperatorSpec::subdiff(FunSpec::half_norm_sq()), &v(&[1.0]));
        // x + x - 1 = w
        assert!((resolvent(&op, &v(&[3.0]), &t).unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_plus_box_fast_path() {
        let t = tol();
        let f = FunSpec::Sum {
            terms: vec![
                FunSpec::half_norm_sq(),
                FunSpec::BoxIndicator { lo: v(&[0.0]), hi: v(&[1.0]) },
            ],
        };
        let op = OperatorSpec::subdiff(f.clone());
        // NormPower leaves force the iterative path; the result must still be exact.
        let x = resolvent(&op, &v(&[4.0]), &t).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9);
        let fq = FunSpec::Sum {
            terms: vec![
                FunSpec::Quadratic { q: Matrix::identity(1), b: v(&[0.0]) },
                FunSpec::BoxIndicator { lo: v(&[0.0]), hi: v(&[1.0]) },
            ],
        };
        assert_eq!(prox(&fq, 1.0, &v(&[1.5]), &t).unwrap(), v(&[0.75]));
    }
}
