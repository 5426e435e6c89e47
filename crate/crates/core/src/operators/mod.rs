//! The operator zoo: finite graphs, monotone linear maps, subdifferentials,
//! normal cones, duality maps `J_p`, and the shift / perturbation combinators.

mod fiber;
mod graph;
mod resolvent;
mod surrogate;

pub use fiber::{duality_map, fiber, membership, Fiber, DEFAULT_SPHERE_SAMPLES};
pub use graph::{graph_sample, maximality_probe, monotone_check, monotonically_related};
pub use resolvent::{has_resolvent, resolvent};
pub use surrogate::{RayAt, Surrogate};

#[allow(unused_imports)]
pub(crate) use resolvent::resolvent_scaled;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, FitzError, Result};
use crate::linalg::min_sym_eigenvalue;
use crate::vecspace::{PairPoint, Polytope, ToleranceConfig, Vector};

/// Square real matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: Vec<Vec<f64>>,
}

impl Matrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(FitzError::EmptyInput("matrix"));
        }
        for r in &rows {
            check_dim(n, r.len())?;
            if r.iter().any(|c| !c.is_finite()) {
                return Err(FitzError::NonFinite("matrix"));
            }
        }
        Ok(Matrix { rows })
    }

    pub fn identity(n: usize) -> Self {
        Matrix {
            rows: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Matrix {
            rows: vec![vec![0.0; n]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        Vector::from_raw(
            self.rows
                .iter()
                .map(|r| r.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    pub fn apply_transpose(&self, x: &Vector) -> Vector {
        let n = self.dim();
        Vector::from_raw(
            (0..n)
                .map(|j| (0..n).map(|i| self.rows[i][j] * x[i]).sum())
                .collect(),
        )
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.rows[i][j])
    }

    /// `(M + M^T) / 2`
    pub fn symmetric_part(&self) -> DMatrix<f64> {
        let m = self.to_dmatrix();
        (&m + m.transpose()) * 0.5
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    pub fn plus(&self, other: &Matrix) -> Matrix {
        Matrix {
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.rows[i][j] - self.rows[j][i]).abs());
            }
        }
        worst
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.rows[i][j] == 0.0))
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = FitzError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::new(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.rows
    }
}

/// Explicit graph: a nonempty list of primal-dual pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteGraph {
    pairs: Vec<PairPoint>,
}

impl FiniteGraph {
    pub fn new(pairs: Vec<PairPoint>, tol: &ToleranceConfig) -> Result<Self> {
        let g = FiniteGraph { pairs };
        g.validate(tol)?;
        Ok(g)
    }

    /// Drops pairs within `eq_tol` of an earlier pair.
    pub fn dedup(pairs: Vec<PairPoint>, tol: &ToleranceConfig) -> Result<Self> {
        let mut kept: Vec<PairPoint> = Vec::with_capacity(pairs.len());
        for p in pairs {
            if !kept.iter().any(|q| q.dist(&p) <= tol.eq_tol) {
                kept.push(p);
            }
        }
        FiniteGraph::new(kept, tol)
    }

    /// Assembles sampled pairs whose distinctness follows from construction.
    pub(crate) fn from_samples(pairs: Vec<PairPoint>) -> Self {
        debug_assert!(!pairs.is_empty());
        FiniteGraph { pairs }
    }

    pub fn validate(&self, tol: &ToleranceConfig) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(FitzError::EmptyInput("finite graph"));
        }
        let dim = self.pairs[0].dim();
        for p in &self.pairs {
            check_dim(dim, p.primal.dim())?;
            check_dim(dim, p.dual.dim())?;
        }
        for i in 0..self.pairs.len() {
            for j in 0..i {
                if self.pairs[i].dist(&self.pairs[j]) <= tol.eq_tol {
                    return Err(FitzError::InvalidSpec(format!(
                        "duplicate graph pair at positions {j} and {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[PairPoint] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].dim()
    }

    /// `{(x, x* - z*)}`
    pub fn shifted(&self, zstar: &Vector) -> FiniteGraph {
        FiniteGraph {
            pairs: self
                .pairs
                .iter()
                .map(|p| PairPoint {
                    primal: p.primal.clone(),
                    dual: &p.dual - zstar,
                })
                .collect(),
        }
    }

    /// Graph of the inverse operator.
    pub fn inverse(&self) -> FiniteGraph {
        FiniteGraph {
            pairs: self.pairs.iter().map(PairPoint::swapped).collect(),
        }
    }

    pub fn domain_points(&self) -> Vec<Vector> {
        self.pairs.iter().map(|p| p.primal.clone()).collect()
    }
}

/// Proper lsc convex functions with computable subdifferentials and proximal maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FunSpec {
    /// `1/2 <x, Qx> + <b, x>`
    Quadratic { q: Matrix, b: Vector },
    /// Indicator of the box `[lo, hi]`.
    BoxIndicator { lo: Vector, hi: Vector },
    /// `scale * (1/p) ||x||^p`
    NormPower { p: f64, scale: f64 },
    /// `scale * (1/p) ||x - center||^p`
    TranslatedNormPower { p: f64, scale: f64, center: Vector },
    Sum { terms: Vec<FunSpec> },
}

impl FunSpec {
    pub fn half_norm_sq() -> FunSpec {
        FunSpec::NormPower { p: 2.0, scale: 1.0 }
    }

    pub fn validate(&self, dim: usize, tol: &ToleranceConfig) -> Result<()> {
        match self {
            FunSpec::Quadratic { q, b } => {
                check_dim(dim, q.dim())?;
                check_dim(dim, b.dim())?;
                if q.asymmetry() > tol.rank_tol {
                    return Err(FitzError::InvalidSpec("quadratic matrix not symmetric".into()));
                }
                if min_sym_eigenvalue(&q.symmetric_part()) < -tol.rank_tol {
                    return Err(FitzError::InvalidSpec(
                        "quadratic matrix not positive semidefinite".into(),
                    ));
                }
            }
            FunSpec::BoxIndicator { lo, hi } => validate_box(dim, lo, hi)?,
            FunSpec::NormPower { p, scale } => validate_power(*p, *scale)?,
            FunSpec::TranslatedNormPower { p, scale, center } => {
                validate_power(*p, *scale)?;
                check_dim(dim, center.dim())?;
            }
            FunSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(FitzError::EmptyInput("function sum"));
                }
                for t in terms {
                    t.validate(dim, tol)?;
                }
                let boxes = self.flatten().into_iter().filter_map(|t| match t {
                    FunSpec::BoxIndicator { lo, hi } => Some((lo, hi)),
                    _ => None,
                });
                let mut acc: Option<(Vec<f64>, Vec<f64>)> = None;
                for (lo, hi) in boxes {
                    let (l, h) = acc.get_or_insert_with(|| (vec![f64::MIN; dim], vec![f64::MAX; dim]));
                    for i in 0..dim {
                        l[i] = l[i].max(lo[i]);
                        h[i] = h[i].min(hi[i]);
                    }
                }
                if let Some((l, h)) = acc {
                    if l.iter().zip(&h).any(|(a, b)| a > b) {
                        return Err(FitzError::InvalidSpec(
                            "box indicators in sum have empty intersection".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Leaves of nested sums.
    pub fn flatten(&self) -> Vec<FunSpec> {
        match self {
            FunSpec::Sum { terms } => terms.iter().flat_map(|t| t.flatten()).collect(),
            other => vec![other.clone()],
        }
    }

    pub fn infer_dim(&self) -> Option<usize> {
        match self {
            FunSpec::Quadratic { b, .. } => Some(b.dim()),
            FunSpec::BoxIndicator { lo, .. } => Some(lo.dim()),
            FunSpec::NormPower { .. } => None,
            FunSpec::TranslatedNormPower { center, .. } => Some(center.dim()),
            FunSpec::Sum { terms } => terms.iter().find_map(|t| t.infer_dim()),
        }
    }
}

fn validate_box(dim: usize, lo: &Vector, hi: &Vector) -> Result<()> {
    check_dim(dim, lo.dim())?;
    check_dim(dim, hi.dim())?;
    if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
        return Err(FitzError::InvalidSpec("box requires lo <= hi componentwise".into()));
    }
    Ok(())
}

fn validate_power(p: f64, scale: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(FitzError::InvalidSpec("norm power requires p >= 1".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(FitzError::InvalidSpec("norm power requires scale > 0".into()));
    }
    Ok(())
}

/// Closed convex set carrying a normal cone operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ConvexSet {
    Box { lo: Vector, hi: Vector },
    Polytope { vertices: Vec<Vector> },
}

impl ConvexSet {
    pub fn unit_box(dim: usize) -> ConvexSet {
        ConvexSet::Box {
            lo: Vector::zeros(dim),
            hi: Vector::from_raw(vec![1.0; dim]),
        }
    }

    pub fn polytope(&self, tol: &ToleranceConfig) -> Result<Polytope> {
        match self {
            ConvexSet::Box { lo, hi } => Polytope::from_box(lo, hi),
            ConvexSet::Polytope { vertices } => Polytope::new(vertices.clone(), tol),
        }
    }

    fn infer_dim(&self) -> Option<usize> {
        match self {
            ConvexSet::Box { lo, .. } => Some(lo.dim()),
            ConvexSet::Polytope { vertices } => vertices.first().map(|v| v.dim()),
        }
    }
}

/// Declarative set-valued monotone operator on `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Graph {
        graph: FiniteGraph,
    },
    /// `x -> {Mx + c}`
    Linear {
        matrix: Matrix,
        offset: Vector,
    },
    Subdiff {
        function: FunSpec,
    },
    NormalCone {
        set: ConvexSet,
    },
    /// `x -> J_p(x - center)`
    DualityMap {
        p: f64,
        center: Vector,
    },
    /// `gra B = gra A - {(0, z*)}`
    Shifted {
        inner: Box<OperatorSpec>,
        zstar: Vector,
    },
    /// `A + lambda J_p(. - center)`
    Perturbed {
        inner: Box<OperatorSpec>,
        lambda: f64,
        p: f64,
        center: Vector,
    },
}

impl OperatorSpec {
    pub fn graph(g: FiniteGraph) -> Self {
        OperatorSpec::Graph { graph: g }
    }

    /// Monotone linear operator; rejects `M` whose symmetric part is indefinite.
    pub fn linear(matrix: Matrix, offset: Vector, tol: &ToleranceConfig) -> Result<Self> {
        let dim = matrix.dim();
        let op = OperatorSpec::Linear { matrix, offset };
        op.validate(dim, tol)?;
        Ok(op)
    }

    pub fn identity(dim: usize) -> Self {
        OperatorSpec::Linear {
            matrix: Matrix::identity(dim),
            offset: Vector::zeros(dim),
        }
    }

    pub fn subdiff(function: FunSpec) -> Self {
        OperatorSpec::Subdiff { function }
    }

    pub fn normal_cone_box(lo: Vector, hi: Vector) -> Self {
        OperatorSpec::NormalCone {
            set: ConvexSet::Box { lo, hi },
        }
    }

    pub fn duality_map(p: f64, center: Vector) -> Self {
        OperatorSpec::DualityMap { p, center }
    }

    pub fn infer_dim(&self) -> Option<usize> {
        match self {
            OperatorSpec::Graph { graph } => graph.pairs.first().map(|p| p.dim()),
            OperatorSpec::Linear { offset, .. } => Some(offset.dim()),
            OperatorSpec::Subdiff { function } => function.infer_dim(),
            OperatorSpec::NormalCone { set } => set.infer_dim(),
            OperatorSpec::DualityMap { center, .. } => Some(center.dim()),
            OperatorSpec::Shifted { zstar, .. } => Some(zstar.dim()),
            OperatorSpec::Perturbed { center, .. } => Some(center.dim()),
        }
    }

    /// Checks every construction invariant for an operator on `R^dim`.
    pub fn validate(&self, dim: usize, tol: &ToleranceConfig) -> Result<()> {
        match self {
            OperatorSpec::Graph { graph } => {
                graph.validate(tol)?;
                check_dim(dim, graph.dim())?;
            }
            OperatorSpec::Linear { matrix, offset } => {
                check_dim(dim, matrix.dim())?;
                check_dim(dim, offset.dim())?;
                if min_sym_eigenvalue(&matrix.symmetric_part()) < -tol.rank_tol {
                    return Err(FitzError::InvalidSpec("linear operator not monotone".into()));
                }
            }
            OperatorSpec::Subdiff { function } => function.validate(dim, tol)?,
            OperatorSpec::NormalCone { set } => match set {
                ConvexSet::Box { lo, hi } => validate_box(dim, lo, hi)?,
                ConvexSet::Polytope { vertices } => {
                    if vertices.is_empty() {
                        return Err(FitzError::EmptyInput("polytope vertex list"));
                    }
                    for v in vertices {
                        check_dim(dim, v.dim())?;
                    }
                }
            },
            OperatorSpec::DualityMap { p, center } => {
                validate_power(*p, 1.0)?;
                check_dim(dim, center.dim())?;
            }
            OperatorSpec::Shifted { inner, zstar } => {
                inner.validate(dim, tol)?;
                check_dim(dim, zstar.dim())?;
            }
            OperatorSpec::Perturbed {
                inner,
                lambda,
                p,
                center,
            } => {
                inner.validate(dim, tol)?;
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(FitzError::InvalidSpec("perturbation requires lambda > 0".into()));
                }
                validate_power(*p, 1.0)?;
                check_dim(dim, center.dim())?;
            }
        }
        Ok(())
    }

    /// Whether the domain is all of `R^n`.
    pub fn has_full_domain(&self) -> bool {
        match self {
            OperatorSpec::Graph { .. } | OperatorSpec::NormalCone { .. } => false,
            OperatorSpec::Linear { .. } | OperatorSpec::DualityMap { .. } => true,
            OperatorSpec::Subdiff { function } => !function
                .flatten()
                .iter()
                .any(|t| matches!(t, FunSpec::BoxIndicator { .. })),
            OperatorSpec::Shifted { inner, .. } | OperatorSpec::Perturbed { inner, .. } => {
                inner.has_full_domain()
            }
        }
    }

    /// Inverse operator, when it can be written in this vocabulary.
    pub fn inverse(&self) -> Option<OperatorSpec> {
        match self {
            OperatorSpec::Graph { graph } => Some(OperatorSpec::graph(graph.inverse())),
            // x* = Mx + c  <=>  x = M^{-1} x* - M^{-1} c
            OperatorSpec::Linear { matrix, offset } => {
                let inv = matrix.to_dmatrix().try_inverse()?;
                let n = matrix.dim();
                let rows = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect();
                let minv = Matrix::new(rows).ok()?;
                let off = -&minv.apply(offset);
                Some(OperatorSpec::Linear { matrix: minv, offset: off })
            }
            _ => None,
        }
    }
}

/// `gra B = gra A - {(0, z*)}`, so `B(x) = A(x) - z*`.
pub fn shift_operator(op: &OperatorSpec, zstar: &Vector) -> OperatorSpec {
    match op {
        OperatorSpec::Graph { graph } => OperatorSpec::graph(graph.shifted(zstar)),
        OperatorSpec::Linear { matrix, offset } => OperatorSpec::Linear {
            matrix: matrix.clone(),
            offset: offset - zstar,
        },
        OperatorSpec::Shifted { inner, zstar: z0 } => OperatorSpec::Shifted {
            inner: inner.clone(),
            zstar: z0 + zstar,
        },
        other => OperatorSpec::Shifted {
            inner: Box::new(other.clone()),
            zstar: zstar.clone(),
        },
    }
}

/// `A + lambda J_p(. - center)`
pub fn perturb(op: &OperatorSpec, lambda: f64, p: f64, center: &Vector) -> Result<OperatorSpec> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(FitzError::InvalidSpec("perturbation requires lambda > 0".into()));
    }
    validate_power(p, 1.0)?;
    Ok(OperatorSpec::Perturbed {
        inner: Box::new(op.clone()),
        lambda,
        p,
        center: center.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn pp(x: &[f64], y: &[f64]) -> PairPoint {
        PairPoint::new(v(x), v(y)).unwrap()
    }

    #[test]
    fn linear_rejects_nonmonotone() {
        let tol = ToleranceConfig::default();
        let m = Matrix::new(vec![vec![-1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let err = OperatorSpec::linear(m, v(&[0.0, 0.0]), &tol).unwrap_err();
        assert_eq!(err, FitzError::InvalidSpec("linear operator not monotone".into()));
        let skew = Matrix::new(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(OperatorSpec::linear(skew, v(&[0.0, 0.0]), &tol).is_ok());
    }

    #[test]
    fn graph_rejects_duplicates_and_empty() {
        let tol = ToleranceConfig::default();
        assert!(FiniteGraph::new(vec![], &tol).is_err());
        let dup = vec![pp(&[0.0], &[0.0]), pp(&[0.0], &[1e-12])];
        assert!(FiniteGraph::new(dup.clone(), &tol).is_err());
        assert_eq!(FiniteGraph::dedup(dup, &tol).unwrap().len(), 1);
    }

    #[test]
    fn shift_examples() {
        let tol = ToleranceConfig::default();
        let g = FiniteGraph::new(vec![pp(&[0.], &[0.]), pp(&[1.], &[1.])], &tol).unwrap();
        let shifted = shift_operator(&OperatorSpec::graph(g), &v(&[1.0]));
        let expected =
            FiniteGraph::new(vec![pp(&[0.], &[-1.]), pp(&[1.], &[0.])], &tol).unwrap();
        assert_eq!(shifted, OperatorSpec::graph(expected));

        let lin = shift_operator(&OperatorSpec::identity(1), &v(&[2.0]));
        assert_eq!(
            lin,
            OperatorSpec::Linear {
                matrix: Matrix::identity(1),
                offset: v(&[-2.0])
            }
        );
    }

    #[test]
    fn perturb_rejects_bad_parameters() {
        let op = OperatorSpec::identity(1);
        assert!(perturb(&op, 0.0, 2.0, &v(&[0.0])).is_err());
        assert!(perturb(&op, 1.0, 0.5, &v(&[0.0])).is_err());
        assert!(perturb(&op, 1.0, 1.0, &v(&[0.0])).is_ok());
    }

    #[test]
    fn sum_with_disjoint_boxes_is_rejected() {
        let tol = ToleranceConfig::default();
        let f = FunSpec::Sum {
            terms: vec![
                FunSpec::BoxIndicator { lo: v(&[0.0]), hi: v(&[1.0]) },
                FunSpec::BoxIndicator { lo: v(&[2.0]), hi: v(&[3.0]) },
            ],
        };
        assert!(f.validate(1, &tol).is_err());
    }

    #[test]
    fn operator_spec_serde_shape() {
        let op = OperatorSpec::Shifted {
            inner: Box::new(OperatorSpec::normal_cone_box(v(&[0.0]), v(&[1.0]))),
            zstar: v(&[1.0]),
        };
        let s = serde_json::to_string(&op).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"shifted","inner":{"kind":"normal_cone","set":{"shape":"box","lo":[0.0],"hi":[1.0]}},"zstar":[1.0]}"#
        );
        let back: OperatorSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, op);
    }
}
