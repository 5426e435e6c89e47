use std::f64::consts::PI;

use super::{ConvexSet, FunSpec, OperatorSpec};
use crate::error::{check_dim, Result};
use crate::linalg::{cone_generators, dist_to_cone};
use crate::vecspace::{dist_to_polytope, PairPoint, ToleranceConfig, Vector};

/// Boundary samples used for a ball-valued fiber.
pub const DEFAULT_SPHERE_SAMPLES: usize = 64;

/// The dual set `A(x)`.
///
/// The set described is `U_a (a + cone(rays) + radius * B)` over the anchors
/// `a`. Polyhedral fibers (normal cones, box subdifferentials) are exact with
/// radius zero. A positive radius only arises from `J_1` at its center, whose
/// `points` are then boundary samples and `exact` is false.
#[derive(Clone, Debug, PartialEq)]
pub struct Fiber {
    pub base: Vector,
    pub points: Vec<Vector>,
    pub rays: Vec<Vector>,
    pub exact: bool,
    anchors: Vec<Vector>,
    radius: f64,
}

impl Fiber {
    pub(crate) fn empty(base: &Vector) -> Fiber {
        Fiber {
            base: base.clone(),
            points: Vec::new(),
            rays: Vec::new(),
            exact: true,
            anchors: Vec::new(),
            radius: 0.0,
        }
    }

    pub(crate) fn single(base: &Vector, value: Vector) -> Fiber {
        Fiber {
            base: base.clone(),
            points: vec![value.clone()],
            rays: Vec::new(),
            exact: true,
            anchors: vec![value],
            radius: 0.0,
        }
    }

    pub(crate) fn polyhedral(base: &Vector, anchor: Vector, rays: Vec<Vector>) -> Fiber {
        Fiber {
            base: base.clone(),
            points: vec![anchor.clone()],
            rays,
            exact: true,
            anchors: vec![anchor],
            radius: 0.0,
        }
    }

    pub(crate) fn finite(base: &Vector, values: Vec<Vector>) -> Fiber {
        Fiber {
            base: base.clone(),
            points: values.clone(),
            rays: Vec::new(),
            exact: true,
            anchors: values,
            radius: 0.0,
        }
    }

    pub(crate) fn ball(base: &Vector, center: Vector, radius: f64) -> Fiber {
        let mut f = Fiber {
            base: base.clone(),
            points: Vec::new(),
            rays: Vec::new(),
            exact: false,
            anchors: vec![center],
            radius,
        };
        f.resample();
        f
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[Vector] {
        &self.anchors
    }

    /// Radius of the ball summand (zero unless `J_1` at its center is involved).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Distance from `v` to the fiber (`+inf` when empty).
    pub fn dist(&self, v: &Vector) -> f64 {
        self.anchors
            .iter()
            .map(|a| (dist_to_cone(&(v - a), &self.rays) - self.radius).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership within `eq_tol`, relative to `max(1, ||v||)`.
    pub fn contains(&self, v: &Vector, tol: &ToleranceConfig) -> bool {
        v.dim() == self.base.dim() && self.dist(v) <= tol.slack(v.norm())
    }

    fn resample(&mut self) {
        if self.radius > 0.0 {
            let dirs = sphere_samples(self.base.dim(), DEFAULT_SPHERE_SAMPLES);
            let radius = self.radius;
            self.points = self
                .anchors
                .iter()
                .flat_map(|a| dirs.iter().map(move |d| a.add_scaled(radius, d)))
                .collect();
        } else {
            self.points = self.anchors.clone();
        }
    }

    /// Minkowski sum of two fibers at the same base point.
    pub(crate) fn minkowski(&self, other: &Fiber) -> Fiber {
        if self.is_empty() || other.is_empty() {
            return Fiber::empty(&self.base);
        }
        let mut anchors = Vec::with_capacity(self.anchors.len() * other.anchors.len());
        for a in &self.anchors {
            for b in &other.anchors {
                anchors.push(a + b);
            }
        }
        let mut rays = self.rays.clone();
        for r in &other.rays {
            if !rays.iter().any(|q| q.dist(r) < 1e-12) {
                rays.push(r.clone());
            }
        }
        let mut f = Fiber {
            base: self.base.clone(),
            points: Vec::new(),
            rays,
            exact: self.exact && other.exact,
            anchors,
            radius: self.radius + other.radius,
        };
        f.resample();
        f
    }

    pub(crate) fn translated(&self, by: &Vector) -> Fiber {
        let mut f = self.clone();
        f.anchors = f.anchors.iter().map(|a| a + by).collect();
        f.resample();
        f
    }

    pub(crate) fn scaled(&self, s: f64) -> Fiber {
        let mut f = self.clone();
        f.anchors = f.anchors.iter().map(|a| s * a).collect();
        f.radius *= s;
        f.resample();
        f
    }
}

/// Deterministic unit-sphere directions.
pub(crate) fn sphere_samples(dim: usize, count: usize) -> Vec<Vector> {
    match dim {
        1 => vec![Vector::from_raw(vec![-1.0]), Vector::from_raw(vec![1.0])],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                Vector::from_raw(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci lattice.
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - y * y).sqrt();
                    let t = golden * k as f64;
                    Vector::from_raw(vec![r * t.cos(), y, r * t.sin()])
                })
                .collect()
        }
        _ => {
            let mut out = Vec::new();
            for mask in 0..3usize.pow(dim as u32) {
                let mut m = mask;
                let v: Vec<f64> = (0..dim)
                    .map(|_| {
                        let r = (m % 3) as f64 - 1.0;
                        m /= 3;
                        r
                    })
                    .collect();
                let v = Vector::from_raw(v);
                let n = v.norm();
                if n > 0.0 {
                    out.push((1.0 / n) * &v);
                }
            }
            out
        }
    }
}

/// `J_p(x - center)` for the Euclidean norm.
pub fn duality_map(p: f64, center: &Vector, x: &Vector, tol: &ToleranceConfig) -> Fiber {
    scaled_norm_power_fiber(p, 1.0, center, x, tol)
}

/// Subdifferential of `scale * (1/p) ||. - center||^p` at `x`.
fn scaled_norm_power_fiber(
    p: f64,
    scale: f64,
    center: &Vector,
    x: &Vector,
    tol: &ToleranceConfig,
) -> Fiber {
    let d = x - center;
    let r = d.norm();
    if p == 1.0 {
        if r <= tol.eq_tol {
            Fiber::ball(x, Vector::zeros(x.dim()), scale)
        } else {
            Fiber::single(x, (scale / r) * &d)
        }
    } else if r == 0.0 {
        Fiber::single(x, Vector::zeros(x.dim()))
    } else {
        Fiber::single(x, (scale * r.powf(p - 2.0)) * &d)
    }
}

fn box_fiber(lo: &Vector, hi: &Vector, x: &Vector, tol: &ToleranceConfig) -> Fiber {
    let n = x.dim();
    let mut rays = Vec::new();
    for i in 0..n {
        if x[i] < lo[i] - tol.eq_tol || x[i] > hi[i] + tol.eq_tol {
            return Fiber::empty(x);
        }
    }
    for i in 0..n {
        if x[i] >= hi[i] - tol.eq_tol {
            rays.push(Vector::basis(n, i));
        }
        if x[i] <= lo[i] + tol.eq_tol {
            rays.push(-&Vector::basis(n, i));
        }
    }
    Fiber::polyhedral(x, Vector::zeros(n), rays)
}

pub(crate) fn function_fiber(f: &FunSpec, x: &Vector, tol: &ToleranceConfig) -> Fiber {
    match f {
        FunSpec::Quadratic { q, b } => Fiber::single(x, &q.apply(x) + b),
        FunSpec::BoxIndicator { lo, hi } => box_fiber(lo, hi, x, tol),
        FunSpec::NormPower { p, scale } => {
            scaled_norm_power_fiber(*p, *scale, &Vector::zeros(x.dim()), x, tol)
        }
        FunSpec::TranslatedNormPower { p, scale, center } => {
            scaled_norm_power_fiber(*p, *scale, center, x, tol)
        }
        FunSpec::Sum { terms } => {
            let mut acc = Fiber::single(x, Vector::zeros(x.dim()));
            for t in terms {
                acc = acc.minkowski(&function_fiber(t, x, tol));
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
    }
}

pub(crate) fn fiber_of(op: &OperatorSpec, x: &Vector, tol: &ToleranceConfig) -> Fiber {
    match op {
        OperatorSpec::Graph { graph } => {
            let duals: Vec<Vector> = graph
                .pairs()
                .iter()
                .filter(|p| p.primal.dist(x) <= tol.eq_tol)
                .map(|p| p.dual.clone())
                .collect();
            if duals.is_empty() {
                Fiber::empty(x)
            } else {
                Fiber::finite(x, duals)
            }
        }
        OperatorSpec::Linear { matrix, offset } => Fiber::single(x, &matrix.apply(x) + offset),
        OperatorSpec::Subdiff { function } => function_fiber(function, x, tol),
        OperatorSpec::NormalCone { set } => match set {
            ConvexSet::Box { lo, hi } => box_fiber(lo, hi, x, tol),
            ConvexSet::Polytope { vertices } => polytope_normal_cone(vertices, x, tol),
        },
        OperatorSpec::DualityMap { p, center } => duality_map(*p, center, x, tol),
        OperatorSpec::Shifted { inner, zstar } => fiber_of(inner, x, tol).translated(&-zstar),
        OperatorSpec::Perturbed {
            inner,
            lambda,
            p,
            center,
        } => {
            let a = fiber_of(inner, x, tol);
            if a.is_empty() {
                return a;
            }
            a.minkowski(&duality_map(*p, center, x, tol).scaled(*lambda))
        }
    }
}

fn polytope_normal_cone(vertices: &[Vector], x: &Vector, tol: &ToleranceConfig) -> Fiber {
    let Ok(poly) = crate::vecspace::Polytope::new(vertices.to_vec(), tol) else {
        return Fiber::empty(x);
    };
    let Ok((d, proj)) = dist_to_polytope(x, &poly) else {
        return Fiber::empty(x);
    };
    if d > tol.eq_tol {
        return Fiber::empty(x);
    }
    let rows: Vec<Vector> = poly.vertices().iter().map(|c| c - &proj).collect();
    let rays = cone_generators(&rows, x.dim(), tol.eq_tol);
    Fiber::polyhedral(x, Vector::zeros(x.dim()), rays)
}

/// `A(x)`; empty outside the domain.
pub fn fiber(op: &OperatorSpec, x: &Vector, tol: &ToleranceConfig) -> Result<Fiber> {
    if let Some(dim) = op.infer_dim() {
        check_dim(dim, x.dim())?;
    }
    Ok(fiber_of(op, x, tol))
}

/// Whether `x* in A(x)` within `eq_tol`.
pub fn membership(op: &OperatorSpec, pt: &PairPoint, tol: &ToleranceConfig) -> bool {
    if let Some(dim) = op.infer_dim() {
        if dim != pt.dim() {
            return false;
        }
    }
    fiber_of(op, &pt.primal, tol).contains(&pt.dual, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{perturb, FiniteGraph, Matrix};

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn unit_interval() -> OperatorSpec {
        OperatorSpec::normal_cone_box(v(&[0.0]), v(&[1.0]))
    }

    #[test]
    fn normal_cone_fibers() {
        let f = fiber(&unit_interval(), &v(&[1.0]), &tol()).unwrap();
        assert_eq!(f.base, v(&[1.0]));
        assert_eq!(f.points, vec![v(&[0.0])]);
        assert_eq!(f.rays, vec![v(&[1.0])]);
        assert!(f.exact);
        assert!(fiber(&unit_interval(), &v(&[2.0]), &tol()).unwrap().is_empty());
    }

    #[test]
    fn linear_fiber_is_single_valued() {
        let f = fiber(&OperatorSpec::identity(1), &v(&[3.0]), &tol()).unwrap();
        assert_eq!(f.points, vec![v(&[3.0])]);
        assert!(f.exact && f.rays.is_empty());
    }

    #[test]
    fn membership_examples() {
        let t = tol();
        let pt = |x: f64, y: f64| PairPoint::new(v(&[x]), v(&[y])).unwrap();
        assert!(membership(&unit_interval(), &pt(0.5, 0.0), &t));
        assert!(!membership(&unit_interval(), &pt(0.5, 1.0), &t));
        assert!(membership(&unit_interval(), &pt(1.0, 7.0), &t));
        assert!(!membership(&unit_interval(), &pt(1.0, -7.0), &t));
        assert!(membership(&OperatorSpec::identity(1), &pt(2.0, 2.0), &t));
    }

    #[test]
    fn duality_map_examples() {
        let t = tol();
        let z = v(&[0.0, 0.0]);
        let f = duality_map(2.0, &z, &v(&[3.0, 4.0]), &t);
        assert_eq!(f.points, vec![v(&[3.0, 4.0])]);
        let f = duality_map(1.0, &z, &v(&[3.0, 4.0]), &t);
        assert!(f.points[0].dist(&v(&[0.6, 0.8])) < 1e-15);
        let f = duality_map(1.0, &z, &z, &t);
        assert!(!f.exact);
        assert_eq!(f.points.len(), DEFAULT_SPHERE_SAMPLES);
        assert!(f.points.iter().all(|p| p.norm() <= 1.0 + 1e-12));
        assert!(f.contains(&v(&[0.3, -0.2]), &t));
        assert!(!f.contains(&v(&[1.0, 1.0]), &t));
    }

    #[test]
    fn perturbed_fiber_is_minkowski_sum() {
        let t = tol();
        let op = perturb(&OperatorSpec::identity(1), 1.0, 2.0, &v(&[0.0])).unwrap();
        assert_eq!(fiber(&op, &v(&[1.5]), &t).unwrap().points, vec![v(&[3.0])]);
        let op = perturb(&unit_interval(), 1.0, 1.0, &v(&[2.0])).unwrap();
        assert_eq!(fiber(&op, &v(&[0.5]), &t).unwrap().points, vec![v(&[-1.0])]);
    }

    #[test]
    fn graph_fiber_collects_matching_duals() {
        let t = tol();
        let g = FiniteGraph::new(
            vec![
                PairPoint::new(v(&[0.0]), v(&[0.0])).unwrap(),
                PairPoint::new(v(&[0.0]), v(&[-1.0])).unwrap(),
                PairPoint::new(v(&[1.0]), v(&[1.0])).unwrap(),
            ],
            &t,
        )
        .unwrap();
        let f = fiber(&OperatorSpec::graph(g), &v(&[0.0]), &t).unwrap();
        assert_eq!(f.points.len(), 2);
    }

    #[test]
    fn polytope_normal_cone_matches_box() {
        let t = tol();
        let square = OperatorSpec::NormalCone {
            set: ConvexSet::Polytope {
                vertices: vec![v(&[0., 0.]), v(&[1., 0.]), v(&[0., 1.]), v(&[1., 1.])],
            },
        };
        let boxed = OperatorSpec::normal_cone_box(v(&[0., 0.]), v(&[1., 1.]));
        for x in [[1.0, 1.0], [1.0, 0.5], [0.5, 0.5], [0.0, 0.3]] {
            for d in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0], [0.0, 0.0]] {
                let pt = PairPoint::new(v(&x), v(&d)).unwrap();
                assert_eq!(membership(&square, &pt, &t), membership(&boxed, &pt, &t));
            }
        }
    }

    #[test]
    fn sum_fiber_of_quadratic_and_box() {
        let t = tol();
        let f = FunSpec::Sum {
            terms: vec![
                FunSpec::Quadratic {
                    q: Matrix::identity(1),
                    b: v(&[0.0]),
                },
                FunSpec::BoxIndicator { lo: v(&[0.0]), hi: v(&[1.0]) },
            ],
        };
        let op = OperatorSpec::subdiff(f);
        let fb = fiber(&op, &v(&[1.0]), &t).unwrap();
        assert_eq!(fb.points, vec![v(&[1.0])]);
        assert_eq!(fb.rays, vec![v(&[1.0])]);
        assert!(fiber(&op, &v(&[1.5]), &t).unwrap().is_empty());
    }
}
