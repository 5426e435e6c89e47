use serde::{Deserialize, Serialize};

use super::{ToleranceConfig, Vector};
use crate::error::{check_dim, FitzError, Result};
use crate::linalg::nearest_in_hull;

/// A polytope in V-representation with a minimal vertex list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    vertices: Vec<Vector>,
}

impl Polytope {
    /// Hull of `points`; redundant points are dropped.
    pub fn new(points: Vec<Vector>, tol: &ToleranceConfig) -> Result<Self> {
        conv_hull(&points, tol)
    }

    /// The box `[lo, hi]` as its corner set.
    pub fn from_box(lo: &Vector, hi: &Vector) -> Result<Self> {
        check_dim(lo.dim(), hi.dim())?;
        let n = lo.dim();
        let mut corners: Vec<Vector> = Vec::new();
        for mask in 0..(1usize << n) {
            let c = Vector::from_raw(
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect(),
            );
            if !corners.contains(&c) {
                corners.push(c);
            }
        }
        corners.sort_by(|a, b| a.lex_cmp(b));
        Ok(Polytope { vertices: corners })
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn contains(&self, z: &Vector, tol: &ToleranceConfig) -> bool {
        dist_to_polytope(z, self)
            .map(|(d, _)| d <= tol.eq_tol)
            .unwrap_or(false)
    }
}

/// Distance from `z` to `P` and the (unique) nearest point.
pub fn dist_to_polytope(z: &Vector, p: &Polytope) -> Result<(f64, Vector)> {
    check_dim(p.dim(), z.dim())?;
    let (proj, _) = nearest_in_hull(z, &p.vertices);
    Ok((z.dist(&proj), proj))
}

/// Minimal V-representation of `conv(points)`.
pub fn conv_hull(points: &[Vector], tol: &ToleranceConfig) -> Result<Polytope> {
    if points.is_empty() {
        return Err(FitzError::EmptyInput("convex hull point list"));
    }
    let dim = points[0].dim();
    for p in points {
        check_dim(dim, p.dim())?;
    }
    let mut sorted: Vec<Vector> = points.to_vec();
    sorted.sort_by(|a, b| a.lex_cmp(b));
    let mut uniq: Vec<Vector> = Vec::with_capacity(sorted.len());
    for p in sorted {
        // Sorted by first coordinate, so near-duplicates sit in a trailing window.
        let duplicate = uniq
            .iter()
            .rev()
            .take_while(|q| q[0] >= p[0] - tol.eq_tol)
            .any(|q| q.dist(&p) <= tol.eq_tol);
        if !duplicate {
            uniq.push(p);
        }
    }
    let vertices = match dim {
        1 => {
            let lo = uniq.first().unwrap().clone();
            let hi = uniq.last().unwrap().clone();
            if lo.dist(&hi) <= tol.eq_tol {
                vec![lo]
            } else {
                vec![lo, hi]
            }
        }
        2 => monotone_chain(uniq, tol.eq_tol),
        _ => redundancy_elimination(uniq, tol.eq_tol),
    };
    let mut vertices = vertices;
    vertices.sort_by(|a, b| a.lex_cmp(b));
    Ok(Polytope { vertices })
}

fn cross(o: &Vector, a: &Vector, b: &Vector) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; points within `eps` of the chord are dropped.
fn monotone_chain(pts: Vec<Vector>, eps: f64) -> Vec<Vector> {
    if pts.len() <= 2 {
        return pts;
    }
    let keeps_turn = |o: &Vector, a: &Vector, b: &Vector| {
        let base = o.dist(b).max(1e-300);
        cross(o, a, b) / base > eps
    };
    let mut lower: Vec<Vector> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && !keeps_turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p)
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vector> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !keeps_turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p)
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() == 2 && lower[0].dist(&lower[1]) <= eps {
        lower.truncate(1);
    }
    lower
}

/// General-dimension hull: keep points extreme along probe directions, drop
/// points inside their hull, then test the rest against all others.
fn redundancy_elimination(pts: Vec<Vector>, eps: f64) -> Vec<Vector> {
    if pts.len() <= 2 {
        return pts;
    }
    let dim = pts[0].dim();
    let mut directions: Vec<Vector> = Vec::new();
    for i in 0..dim {
        directions.push(Vector::basis(dim, i));
        directions.push(-&Vector::basis(dim, i));
    }
    for mask in 0..(3usize.pow(dim as u32)) {
        let mut m = mask;
        let d: Vec<f64> = (0..dim)
            .map(|_| {
                let r = (m % 3) as f64 - 1.0;
                m /= 3;
                r
            })
            .collect();
        let v = Vector::from_raw(d);
        if v.norm() > 0.0 {
            directions.push(v);
        }
    }
    let mut extreme = vec![false; pts.len()];
    for d in &directions {
        let best = (0..pts.len())
            .max_by(|&i, &j| pts[i].inner(d).total_cmp(&pts[j].inner(d)))
            .unwrap();
        extreme[best] = true;
    }
    let core: Vec<Vector> = (0..pts.len())
        .filter(|&i| extreme[i])
        .map(|i| pts[i].clone())
        .collect();
    let mut alive: Vec<bool> = vec![true; pts.len()];
    for i in 0..pts.len() {
        if !extreme[i] {
            let (proj, _) = nearest_in_hull(&pts[i], &core);
            if proj.dist(&pts[i]) <= eps {
                alive[i] = false;
            }
        }
    }
    for i in 0..pts.len() {
        if !alive[i] {
            continue;
        }
        let others: Vec<Vector> = (0..pts.len())
            .filter(|&j| j != i && alive[j])
            .map(|j| pts[j].clone())
            .collect();
        if others.is_empty() {
            continue;
        }
        let (proj, _) = nearest_in_hull(&pts[i], &others);
        if proj.dist(&pts[i]) <= eps {
            alive[i] = false;
        }
    }
    pts.into_iter()
        .zip(alive)
        .filter_map(|(p, a)| a.then_some(p))
        .collect()
}

/// Unit functional `y0*` and margin `delta` with `<y0*, z - b> > delta` on `P`.
pub fn separate(z: &Vector, p: &Polytope, tol: &ToleranceConfig) -> Result<(Vector, f64)> {
    let (d, proj) = dist_to_polytope(z, p)?;
    if d <= tol.eq_tol {
        return Err(FitzError::NotSeparable);
    }
    let y0 = (1.0 / d) * &(z - &proj);
    Ok((y0, d / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn interval() -> Polytope {
        Polytope::new(vec![v(&[0.0]), v(&[1.0])], &tol()).unwrap()
    }

    fn square() -> Polytope {
        Polytope::from_box(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap()
    }

    #[test]
    fn dist_examples() {
        let (d, p) = dist_to_polytope(&v(&[2.0]), &interval()).unwrap();
        assert_eq!((d, p), (1.0, v(&[1.0])));
        let (d, p) = dist_to_polytope(&v(&[0.5]), &interval()).unwrap();
        assert!(d < 1e-15 && p.dist(&v(&[0.5])) < 1e-15);
        let (d, p) = dist_to_polytope(&v(&[2.0, 2.0]), &square()).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(p.dist(&v(&[1.0, 1.0])) < 1e-12);
    }

    #[test]
    fn hull_examples() {
        let h = conv_hull(&[v(&[0.0]), v(&[1.0]), v(&[0.5])], &tol()).unwrap();
        assert_eq!(h.vertices(), &[v(&[0.0]), v(&[1.0])]);
        let h = conv_hull(
            &[v(&[0., 0.]), v(&[1., 0.]), v(&[0., 1.]), v(&[0.2, 0.2])],
            &tol(),
        )
        .unwrap();
        assert_eq!(h.vertices(), &[v(&[0., 0.]), v(&[0., 1.]), v(&[1., 0.])]);
        let h = conv_hull(&[v(&[3.0])], &tol()).unwrap();
        assert_eq!(h.vertices(), &[v(&[3.0])]);
        assert!(conv_hull(&[], &tol()).is_err());
    }

    #[test]
    fn hull_drops_edge_midpoints_in_2d_and_3d() {
        let h = conv_hull(
            &[v(&[0., 0.]), v(&[0.5, 0.]), v(&[1., 0.]), v(&[1., 1.]), v(&[0., 1.])],
            &tol(),
        )
        .unwrap();
        assert_eq!(h.vertices().len(), 4);
        let mut pts = Polytope::from_box(&v(&[0., 0., 0.]), &v(&[1., 1., 1.]))
            .unwrap()
            .vertices()
            .to_vec();
        pts.push(v(&[0.5, 0.5, 0.5]));
        pts.push(v(&[0.5, 0.5, 1.0]));
        pts.push(v(&[1.0, 0.5, 0.0]));
        let h = conv_hull(&pts, &tol()).unwrap();
        assert_eq!(h.vertices().len(), 8);
    }

    #[test]
    fn separate_examples() {
        let (y, d) = separate(&v(&[2.0]), &interval(), &tol()).unwrap();
        assert_eq!((y, d), (v(&[1.0]), 0.5));
        assert_eq!(
            separate(&v(&[0.5]), &interval(), &tol()),
            Err(FitzError::NotSeparable)
        );
        let (y, d) = separate(&v(&[2.0, 0.5]), &square(), &tol()).unwrap();
        assert!(y.dist(&v(&[1.0, 0.0])) < 1e-12);
        assert!((d - 0.5).abs() < 1e-12);
    }
}
