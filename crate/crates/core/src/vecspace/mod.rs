//! Euclidean substrate: vectors, primal-dual pairs, grids and tolerances.
//!
//! The dual space is identified with `R^n` through the dot product, so a
//! dual vector `x*` is stored as an ordinary [`Vector`].

mod polytope;

pub use polytope::{conv_hull, dist_to_polytope, separate, Polytope};

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, FitzError, Result};

/// A finite vector in `R^n`, `n >= 1`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(FitzError::EmptyInput("vector"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(FitzError::NonFinite("vector"));
        }
        Ok(Vector(coords))
    }

    /// Builds a vector without validation. Callers guarantee finiteness.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim.max(1)])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Unchecked inner product; panics on dimension mismatch.
    pub fn inner(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in inner product");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in distance");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + t * dir`
    pub fn add_scaled(&self, t: f64, dir: &Vector) -> Vector {
        assert_eq!(self.dim(), dir.dim());
        Vector(self.0.iter().zip(&dir.0).map(|(a, d)| a + t * d).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&c| f(c)).collect())
    }

    /// Lexicographic comparison; total because coordinates are finite.
    pub fn lex_cmp(&self, other: &Vector) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        self.dim().cmp(&other.dim())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = FitzError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        Vector(self.0.iter().map(|a| -a).collect())
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        Vector(rhs.0.iter().map(|a| self * a).collect())
    }
}

/// Standard inner product with dimension checking.
pub fn dot(x: &Vector, y: &Vector) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(x.inner(y))
}

/// A point `(x, x*)` of `X x X*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPoint {
    pub primal: Vector,
    pub dual: Vector,
}

impl PairPoint {
    pub fn new(primal: Vector, dual: Vector) -> Result<Self> {
        check_dim(primal.dim(), dual.dim())?;
        Ok(PairPoint { primal, dual })
    }

    pub fn dim(&self) -> usize {
        self.primal.dim()
    }

    /// The duality pairing `<x, x*>`.
    pub fn pairing(&self) -> f64 {
        self.primal.inner(&self.dual)
    }

    /// `<x - y, x* - y*>`
    pub fn monotone_product(&self, other: &PairPoint) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            acc += (self.primal[i] - other.primal[i]) * (self.dual[i] - other.dual[i]);
        }
        acc
    }

    /// Euclidean distance in the product space.
    pub fn dist(&self, other: &PairPoint) -> f64 {
        (self.primal.dist(&other.primal).powi(2) + self.dual.dist(&other.dual).powi(2)).sqrt()
    }

    /// Swaps primal and dual, giving a point of the inverse graph.
    pub fn swapped(&self) -> PairPoint {
        PairPoint {
            primal: self.dual.clone(),
            dual: self.primal.clone(),
        }
    }

    pub fn lex_cmp(&self, other: &PairPoint) -> std::cmp::Ordering {
        self.primal
            .lex_cmp(&other.primal)
            .then_with(|| self.dual.lex_cmp(&other.dual))
    }
}

/// Numerical tolerances and budgets shared by every check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    /// Equality slack.
    pub eq_tol: f64,
    /// Values above this are reported as suspected `+inf`.
    pub inf_threshold: f64,
    /// Residual bound for range membership and eigenvalue truncation.
    pub rank_tol: f64,
    /// Cap on grid nodes and iterations.
    pub budget: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            eq_tol: 1e-9,
            inf_threshold: 1e8,
            rank_tol: 1e-8,
            budget: 100_000,
        }
    }
}

impl ToleranceConfig {
    /// Minimum ratio `inf_threshold / eq_tol`.
    pub const MIN_THRESHOLD_RATIO: f64 = 1e6;

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.eq_tol) || !positive(self.inf_threshold) || !positive(self.rank_tol) {
            return Err(FitzError::InvalidSpec(
                "tolerances must be finite and strictly positive".into(),
            ));
        }
        if self.budget == 0 {
            return Err(FitzError::InvalidSpec("budget must be positive".into()));
        }
        if self.inf_threshold / self.eq_tol < Self::MIN_THRESHOLD_RATIO {
            return Err(FitzError::InvalidSpec(format!(
                "inf_threshold / eq_tol must be at least {:e}",
                Self::MIN_THRESHOLD_RATIO
            )));
        }
        Ok(())
    }

    /// Slack used when comparing a quantity of magnitude `scale` against zero.
    pub(crate) fn slack(&self, scale: f64) -> f64 {
        self.eq_tol * scale.abs().max(1.0)
    }
}

/// Axis-aligned regular grid `lower + k * spacing`, `0 <= k <= floor((upper-lower)/spacing)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lower: Vector,
    pub upper: Vector,
    pub spacing: f64,
}

impl Grid {
    pub fn new(lower: Vector, upper: Vector, spacing: f64) -> Result<Self> {
        let g = Grid {
            lower,
            upper,
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// Cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        Grid::new(
            Vector::new(vec![lo; dim])?,
            Vector::new(vec![hi; dim])?,
            spacing,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.lower.dim(), self.upper.dim())?;
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(FitzError::InvalidSpec("grid spacing must be positive".into()));
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| l >= u) {
            return Err(FitzError::InvalidSpec(
                "grid lower bound must be below upper bound in every coordinate".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    fn steps(&self, axis: usize) -> usize {
        ((self.upper[axis] - self.lower[axis]) / self.spacing + 1e-9).floor() as usize
    }

    /// Node count, saturating on overflow.
    pub fn count(&self) -> usize {
        (0..self.dim()).fold(1usize, |acc, i| acc.saturating_mul(self.steps(i) + 1))
    }

    /// All nodes in lexicographic order (first coordinate slowest).
    pub fn nodes(&self, cap: usize) -> Result<Vec<Vector>> {
        let count = self.count();
        if count > cap {
            return Err(FitzError::GridTooLarge { count, cap });
        }
        let dim = self.dim();
        let steps: Vec<usize> = (0..dim).map(|i| self.steps(i)).collect();
        let mut out = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        loop {
            out.push(Vector::from_raw(
                (0..dim)
                    .map(|i| self.lower[i] + idx[i] as f64 * self.spacing)
                    .collect(),
            ));
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                if idx[axis] < steps[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    /// Same box with the spacing halved; its nodes contain the original nodes.
    pub fn refined(&self) -> Grid {
        Grid {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            spacing: self.spacing / 2.0,
        }
    }

    /// Box enlarged by `margin` times its width on every side, same spacing.
    pub fn expanded(&self, margin: f64) -> Grid {
        let width = &self.upper - &self.lower;
        Grid {
            lower: self.lower.add_scaled(-margin, &width),
            upper: self.upper.add_scaled(margin, &width),
            spacing: self.spacing,
        }
    }

    pub fn contains(&self, x: &Vector, slack: f64) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lower[i] - slack && x[i] <= self.upper[i] + slack)
    }
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(s: &[Vector], t: &[Vector]) -> Result<f64> {
    if s.is_empty() || t.is_empty() {
        return Err(FitzError::EmptyInput("hausdorff point set"));
    }
    let dim = s[0].dim();
    for v in s.iter().chain(t) {
        check_dim(dim, v.dim())?;
    }
    Ok(directed_hausdorff(s, t).max(directed_hausdorff(t, s)))
}

fn directed_hausdorff(s: &[Vector], t: &[Vector]) -> f64 {
    use rayon::prelude::*;
    s.par_iter()
        .map(|a| t.iter().map(|b| a.dist(b)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(dot(&v(&[2.0]), &v(&[1.0])).unwrap(), 2.0);
        assert_eq!(dot(&v(&[1.0, 2.0, 3.0]), &v(&[3.0, 2.0, 1.0])).unwrap(), 10.0);
    }

    #[test]
    fn dot_rejects_mismatch() {
        assert_eq!(
            dot(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(FitzError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn vector_rejects_nonfinite_and_empty() {
        assert!(Vector::new(vec![f64::NAN]).is_err());
        assert!(Vector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(Vector::new(vec![]).is_err());
        assert!(serde_json::from_str::<Vector>("[]").is_err());
    }

    #[test]
    fn hausdorff_examples() {
        let s = [v(&[0.0]), v(&[1.0])];
        assert_eq!(hausdorff(&s, &s).unwrap(), 0.0);
        assert_eq!(hausdorff(&[v(&[0.0])], &[v(&[3.0])]).unwrap(), 3.0);
        let t = [v(&[0.0]), v(&[1.0]), v(&[1.5])];
        assert_eq!(hausdorff(&s, &t).unwrap(), 0.5);
        assert!(hausdorff(&[], &t).is_err());
    }

    #[test]
    fn grid_nodes_are_lexicographic_and_nested_under_refinement() {
        let g = Grid::new(v(&[0.0, 0.0]), v(&[1.0, 0.5]), 0.5).unwrap();
        let nodes = g.nodes(100).unwrap();
        assert_eq!(nodes.len(), 6);
        assert_eq!(nodes[1], v(&[0.0, 0.5]));
        assert_eq!(nodes[2], v(&[0.5, 0.0]));
        let fine = g.refined().nodes(100).unwrap();
        for n in &nodes {
            assert!(fine.contains(n));
        }
        assert!(matches!(
            g.nodes(5),
            Err(FitzError::GridTooLarge { count: 6, cap: 5 })
        ));
    }

    #[test]
    fn grid_spacing_is_exact_at_endpoints() {
        let g = Grid::cube(1, -1.0, 3.0, 0.05).unwrap();
        let nodes = g.nodes(1000).unwrap();
        assert_eq!(nodes.len(), 81);
        assert_eq!(nodes[20][0], 0.0);
        assert_eq!(nodes[40][0], 1.0);
    }

    #[test]
    fn tolerance_defaults_validate() {
        let t = ToleranceConfig::default();
        assert!(t.validate().is_ok());
        let bad = ToleranceConfig {
            inf_threshold: 1e-4,
            ..t
        };
        assert!(bad.validate().is_err());
        let bad = ToleranceConfig { eq_tol: 0.0, ..t };
        assert!(bad.validate().is_err());
    }
}
