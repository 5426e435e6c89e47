//! Small dense solvers used at desk scale: least squares, NNLS, Wolfe's
//! nearest point in a polytope and generators of polyhedral cones.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::vecspace::Vector;

pub(crate) fn to_dvector(v: &Vector) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

pub(crate) fn from_dvector(v: &DVector<f64>) -> Vector {
    Vector::from_raw(v.iter().copied().collect())
}

/// Columns as a dense matrix.
pub(crate) fn columns(cols: &[&Vector], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Minimum-norm least-squares solution of `a x ~ b`.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-12).max(1e-300);
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Solves a square system, `None` when singular.
pub(crate) fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.lu().solve(b)
}

/// Pseudo-inverse of a symmetric matrix, truncating eigenvalues with
/// `|lambda| < tol`. Also returns the orthonormal null-space basis.
pub(crate) fn sym_pinv(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<DVector<f64>>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut pinv = DMatrix::zeros(n, n);
    let mut null = Vec::new();
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        let u = eig.eigenvectors.column(k).into_owned();
        if lam.abs() < tol {
            null.push(u);
        } else {
            pinv += (&u * u.transpose()) / lam;
        }
    }
    (pinv, null)
}

pub(crate) fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Non-negative least squares, Lawson–Hanson: `min ||A mu - b||`, `mu >= 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let k = a.ncols();
    let mut x = DVector::zeros(k);
    if k == 0 {
        return x;
    }
    let scale = a.norm().max(1.0) * b.norm().max(1.0);
    let tol = 1e-13 * scale;
    let mut passive = vec![false; k];
    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let z_sub = lstsq(&sub, b);
            let mut z = DVector::zeros(k);
            for (c, &i) in idx.iter().enumerate() {
                z[i] = z_sub[c];
            }
            if idx.iter().all(|&i| z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = 1.0f64;
            for &i in &idx {
                if z[i] <= 0.0 {
                    let denom = x[i] - z[i];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            x = &x + (z - &x) * alpha;
            for &i in &idx {
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if passive.iter().all(|p| !p) {
                break;
            }
        }
    }
    x
}

/// Distance from `v` to `cone(rays)`.
pub(crate) fn dist_to_cone(v: &Vector, rays: &[Vector]) -> f64 {
    if rays.is_empty() {
        return v.norm();
    }
    let refs: Vec<&Vector> = rays.iter().collect();
    let a = columns(&refs, v.dim());
    let b = to_dvector(v);
    let mu = nnls(&a, &b, 20 * (rays.len() + v.dim()));
    (b - a * mu).norm()
}

/// Wolfe's minimum-norm-point algorithm on `conv(verts) - z`.
///
/// Returns the nearest point of `conv(verts)` to `z` and the convex weights.
pub(crate) fn nearest_in_hull(z: &Vector, verts: &[Vector]) -> (Vector, Vec<f64>) {
    let m = verts.len();
    assert!(m > 0);
    let pts: Vec<Vector> = verts.iter().map(|v| v - z).collect();
    let scale = pts.iter().map(|p| p.norm_sq()).fold(0.0, f64::max).max(1e-300);
    let start = (0..m)
        .min_by(|&i, &j| pts[i].norm_sq().total_cmp(&pts[j].norm_sq()))
        .unwrap();
    let mut corral: Vec<usize> = vec![start];
    let mut lam: Vec<f64> = vec![1.0];
    let mut x = pts[start].clone();
    let weight_tol = 1e-14;

    for _ in 0..(100 * (m + z.dim())) {
        let j = (0..m)
            .min_by(|&a, &b| x.inner(&pts[a]).total_cmp(&x.inner(&pts[b])))
            .unwrap();
        if x.norm_sq() - x.inner(&pts[j]) <= 1e-15 * scale || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lam.push(0.0);
        loop {
            let alpha = affine_min_weights(&corral, &pts);
            if alpha.iter().all(|&a| a > weight_tol) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for k in 0..corral.len() {
                if alpha[k] <= weight_tol {
                    let denom = lam[k] - alpha[k];
                    if denom > 0.0 {
                        theta = theta.min(lam[k] / denom);
                    }
                }
            }
            for k in 0..corral.len() {
                lam[k] = theta * alpha[k] + (1.0 - theta) * lam[k];
            }
            let mut k = 0;
            let mut removed = false;
            while k < corral.len() {
                if lam[k] <= weight_tol && corral.len() > 1 {
                    corral.remove(k);
                    lam.remove(k);
                    removed = true;
                } else {
                    k += 1;
                }
            }
            if !removed {
                // Degenerate step; drop the smallest weight to guarantee progress.
                let (kmin, _) = lam
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .unwrap();
                if corral.len() > 1 {
                    corral.remove(kmin);
                    lam.remove(kmin);
                }
            }
            let s: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= s);
            if corral.len() == 1 {
                lam[0] = 1.0;
                break;
            }
        }
        x = Vector::zeros(z.dim());
        for (k, &i) in corral.iter().enumerate() {
            x = x.add_scaled(lam[k], &pts[i]);
        }
    }
    let mut weights = vec![0.0; m];
    for (k, &i) in corral.iter().enumerate() {
        weights[i] = lam[k];
    }
    (&x + z, weights)
}

/// Weights `alpha` (summing to one) minimizing `||sum alpha_i p_i||` over the
/// affine hull of the corral.
fn affine_min_weights(corral: &[usize], pts: &[Vector]) -> Vec<f64> {
    let k = corral.len();
    if k == 1 {
        return vec![1.0];
    }
    let p0 = &pts[corral[0]];
    let diffs: Vec<Vector> = corral[1..].iter().map(|&i| &pts[i] - p0).collect();
    let refs: Vec<&Vector> = diffs.iter().collect();
    let d = columns(&refs, p0.dim());
    let beta = lstsq(&d, &(-to_dvector(p0)));
    let mut alpha = Vec::with_capacity(k);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter().copied());
    alpha
}

/// Extreme rays (plus both signs of a lineality basis) of the cone
/// `{v : <row_i, v> <= 0}`. Rows with negligible norm are ignored.
pub(crate) fn cone_generators(rows: &[Vector], dim: usize, tol: f64) -> Vec<Vector> {
    let rows: Vec<&Vector> = rows.iter().filter(|r| r.norm() > tol).collect();
    let mut gens: Vec<Vector> = Vec::new();
    let push_unique = |gens: &mut Vec<Vector>, v: Vector| {
        if !gens.iter().any(|g| g.dist(&v) < 1e-9) {
            gens.push(v);
        }
    };
    let gram = if rows.is_empty() {
        DMatrix::zeros(dim, dim)
    } else {
        let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        a.transpose() * a
    };
    let eig = SymmetricEigen::new(gram);
    let emax = eig.eigenvalues.max().max(1.0);
    let mut lineality: Vec<DVector<f64>> = Vec::new();
    for k in 0..dim {
        if eig.eigenvalues[k].abs() <= 1e-12 * emax {
            lineality.push(eig.eigenvectors.column(k).into_owned());
        }
    }
    for l in &lineality {
        let v = from_dvector(l);
        push_unique(&mut gens, v.clone());
        push_unique(&mut gens, -&v);
    }
    let rank = dim - lineality.len();
    if rank == 0 {
        return gens;
    }
    let feasible = |v: &Vector| rows.iter().all(|r| r.inner(v) <= tol * r.norm().max(1.0));
    for subset in (0..rows.len()).combinations(rank - 1) {
        let mut constraint: Vec<DVector<f64>> =
            subset.iter().map(|&i| to_dvector(rows[i])).collect();
        constraint.extend(lineality.iter().cloned());
        let b = if constraint.is_empty() {
            DMatrix::zeros(dim, dim)
        } else {
            let c = DMatrix::from_fn(constraint.len(), dim, |i, j| constraint[i][j]);
            c.transpose() * c
        };
        let e = SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
        let scale = e.eigenvalues.max().max(1.0);
        if e.eigenvalues[order[0]].abs() > 1e-10 * scale {
            continue;
        }
        if dim > 1 && e.eigenvalues[order[1]].abs() <= 1e-10 * scale {
            continue;
        }
        let u = from_dvector(&e.eigenvectors.column(order[0]).into_owned());
        let u = (1.0 / u.norm()) * &u;
        for cand in [u.clone(), -&u] {
            if feasible(&cand) && rows.iter().any(|r| r.inner(&cand) < -tol) {
                push_unique(&mut gens, cand);
            }
        }
    }
    gens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn nnls_projects_onto_orthant() {
        let rays = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        assert!(dist_to_cone(&v(&[2.0, 3.0]), &rays) < 1e-12);
        assert!((dist_to_cone(&v(&[-2.0, 3.0]), &rays) - 2.0).abs() < 1e-12);
        assert!((dist_to_cone(&v(&[-3.0, -4.0]), &rays) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn wolfe_on_square_corner() {
        let sq = vec![v(&[0., 0.]), v(&[1., 0.]), v(&[0., 1.]), v(&[1., 1.])];
        let (p, w) = nearest_in_hull(&v(&[2.0, 2.0]), &sq);
        assert!(p.dist(&v(&[1.0, 1.0])) < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (p, _) = nearest_in_hull(&v(&[0.3, 0.6]), &sq);
        assert!(p.dist(&v(&[0.3, 0.6])) < 1e-12);
        let (p, _) = nearest_in_hull(&v(&[0.5, -3.0]), &sq);
        assert!(p.dist(&v(&[0.5, 0.0])) < 1e-12);
    }

    #[test]
    fn cone_generators_of_square_corner_normal_cone() {
        // Normal cone of [0,1]^2 at (1,1): rows are c - x over vertices.
        let x = v(&[1.0, 1.0]);
        let rows: Vec<Vector> = [[0., 0.], [1., 0.], [0., 1.], [1., 1.]]
            .iter()
            .map(|c| &v(c) - &x)
            .collect();
        let mut g = cone_generators(&rows, 2, 1e-12);
        g.sort_by(|a, b| a.lex_cmp(b));
        assert_eq!(g.len(), 2);
        assert!(g[0].dist(&v(&[0.0, 1.0])) < 1e-9);
        assert!(g[1].dist(&v(&[1.0, 0.0])) < 1e-9);
    }

    #[test]
    fn cone_generators_with_lineality() {
        // Segment [(0,0),(1,0)] at its endpoint (1,0): cone {v: v1 >= 0} contains the v2 axis.
        let rows = vec![v(&[-1.0, 0.0]), v(&[0.0, 0.0])];
        let g = cone_generators(&rows, 2, 1e-12);
        assert_eq!(g.len(), 3);
        assert!(g.iter().any(|r| r.dist(&v(&[1.0, 0.0])) < 1e-9));
        assert!(dist_to_cone(&v(&[3.0, -7.0]), &g) < 1e-10);
        assert!((dist_to_cone(&v(&[-3.0, -7.0]), &g) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn interior_point_has_trivial_cone() {
        let x = v(&[0.5, 0.5]);
        let rows: Vec<Vector> = [[0., 0.], [1., 0.], [0., 1.], [1., 1.]]
            .iter()
            .map(|c| &v(c) - &x)
            .collect();
        assert!(cone_generators(&rows, 2, 1e-12).is_empty());
    }
}
