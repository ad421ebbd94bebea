//! Thin wrappers around the dense factorizations used by the solvers.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Col, Mat};

use crate::error::{BbemError, Result};

pub fn col_from(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

pub fn col_to_vec(c: &Col<f64>) -> Vec<f64> {
    c.iter().copied().collect()
}

pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    col_to_vec(&(a * col_from(x)))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LU factorization with partial pivoting.
pub struct LuFactor {
    lu: PartialPivLu<f64>,
    n: usize,
}

impl LuFactor {
    pub fn new(a: &Mat<f64>) -> Result<LuFactor> {
        if a.nrows() != a.ncols() {
            return Err(BbemError::Mismatch(format!("LU of a {}x{} matrix", a.nrows(), a.ncols())));
        }
        if a.nrows() == 0 {
            return Err(BbemError::IllConditioned("empty system".into()));
        }
        let lu = a.partial_piv_lu();
        let n = a.nrows();
        let f = LuFactor { lu, n };
        // Pivot breakdown shows up as non-finite solves.
        let probe = f.solve(&vec![1.0; n]);
        if probe.iter().any(|x| !x.is_finite()) {
            return Err(BbemError::IllConditioned("LU factorization broke down".into()));
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        col_to_vec(&self.lu.solve(col_from(b)))
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        col_to_vec(&self.lu.solve_transpose(col_from(b)))
    }

    /// Solves for every column of `b`.
    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.lu.solve(b)
    }

    pub fn solve_checked(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = self.solve(b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BbemError::IllConditioned("LU solve produced non-finite values".into()));
        }
        Ok(x)
    }

    /// Smallest singular value by inverse iteration on `(AᵀA)⁻¹`.
    pub fn sigma_min(&self, iters: usize) -> f64 {
        let mut x: Vec<f64> = (0..self.n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut lambda = 0.0;
        for _ in 0..iters.max(1) {
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            let y = self.solve_transpose(&self.solve(&x));
            lambda = dot(&x, &y);
            x = y;
        }
        if lambda > 0.0 {
            1.0 / lambda.sqrt()
        } else {
            0.0
        }
    }
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn sigma_max_estimate(a: &Mat<f64>, iters: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let nx = norm(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = col_to_vec(&(a.transpose() * (a * col_from(&x))));
        lambda = dot(&x, &y);
        x = y;
    }
    lambda.max(0.0).sqrt()
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, values descending.
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

impl Svd {
    pub fn new(a: &Mat<f64>) -> Result<Svd> {
        let svd = a.thin_svd().map_err(|e| BbemError::IllConditioned(format!("SVD failed: {e:?}")))?;
        let s = svd.S().column_vector().iter().copied().collect();
        Ok(Svd { u: svd.U().to_owned(), s, v: svd.V().to_owned() })
    }

    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    pub fn left_vector(&self, k: usize) -> Vec<f64> {
        self.u.col(k).iter().copied().collect()
    }

    pub fn right_vector(&self, k: usize) -> Vec<f64> {
        self.v.col(k).iter().copied().collect()
    }

    /// Least-squares solve discarding singular values below `rel_cut·σ_max`
    /// as well as the explicitly listed modes.
    pub fn solve_truncated(&self, b: &[f64], rel_cut: f64, drop: &[usize]) -> (Vec<f64>, usize) {
        let cut = rel_cut * self.sigma_max();
        let utb = col_to_vec(&(self.u.transpose() * col_from(b)));
        let mut coeff = vec![0.0; self.s.len()];
        let mut dropped = 0;
        for (k, &s) in self.s.iter().enumerate() {
            if s <= cut || drop.contains(&k) {
                dropped += 1;
                continue;
            }
            coeff[k] = utb[k] / s;
        }
        (matvec(&self.v, &coeff), dropped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> Mat<f64> {
        Mat::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 + if i == j { 3.0 } else { 0.0 })
    }

    #[test]
    fn lu_solves_and_transposes() {
        let a = test_matrix(12);
        let lu = LuFactor::new(&a).unwrap();
        let b: Vec<f64> = (0..12).map(|i| i as f64 - 4.0).collect();
        let x = lu.solve(&b);
        let r: Vec<f64> = matvec(&a, &x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) < 1e-12);
        let xt = lu.solve_transpose(&b);
        let rt: Vec<f64> = matvec(&a.transpose().to_owned(), &xt).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&rt) < 1e-12);
    }

    #[test]
    fn sigma_min_matches_svd() {
        let a = test_matrix(20);
        let svd = Svd::new(&a).unwrap();
        let lu = LuFactor::new(&a).unwrap();
        assert!((lu.sigma_min(60) - svd.sigma_min()).abs() < 1e-8 * svd.sigma_min());
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn truncated_solve_ignores_null_direction() {
        // Rank-deficient: last column equals the first.
        let mut a = test_matrix(6);
        for i in 0..6 {
            a[(i, 5)] = a[(i, 0)];
        }
        let svd = Svd::new(&a).unwrap();
        let x_true = [1.0, 2.0, -1.0, 0.5, 0.0, 0.0];
        let b = matvec(&a, &x_true);
        let (x, dropped) = svd.solve_truncated(&b, 1e-10, &[]);
        assert_eq!(dropped, 1);
        let r: Vec<f64> = matvec(&a, &x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) < 1e-10);
        assert!(LuFactor::new(&Mat::<f64>::zeros(0, 0)).is_err());
    }
}
