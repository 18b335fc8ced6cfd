//! Linear algebra for the Leontief solve `(I - A) s = f`.
//!
//! Two routes: a dense LU factorization with partial pivoting for systems up
//! to a configurable size, and a Jacobi-preconditioned BiCGSTAB on the sparse
//! matrix above it. Every reduction runs in a fixed sequential order, so
//! identical inputs give bit-identical outputs.

use nalgebra::{DMatrix, DVector, Dyn, LU};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    /// Dense row-major copy of `I - A`.
    fn identity_minus_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
            for (j, v) in self.row(i) {
                m[i * n + j] -= v;
            }
        }
        m
    }
}

/// `out = s - A s` computed without forming `I - A`.
fn apply_identity_minus(a: &CsrMatrix, s: &[f64]) -> Vec<f64> {
    let as_ = a.mul_vec(s);
    s.iter().zip(&as_).map(|(x, y)| x - y).collect()
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Relative residual `||s - f - A s|| / ||f||` (zero when `f = 0` and `s = 0`).
pub fn relative_residual(a: &CsrMatrix, s: &[f64], f: &[f64]) -> f64 {
    let ms = apply_identity_minus(a, s);
    let r: Vec<f64> = ms.iter().zip(f).map(|(x, y)| x - y).collect();
    let fnorm = norm2(f);
    let rnorm = norm2(&r);
    if fnorm == 0.0 {
        if rnorm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        rnorm / fnorm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    Singular { pivot_row: usize },
    NotConverged { iterations: usize, residual: f64 },
    Breakdown { iterations: usize, residual: f64 },
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveError::Singular { pivot_row } => write!(f, "matrix I - A is singular (zero pivot at row {pivot_row})"),
            SolveError::NotConverged { iterations, residual } => {
                write!(
                    f,
                    "BiCGSTAB did not converge after {iterations} iterations (residual {residual:e})"
                )
            }
            SolveError::Breakdown { iterations, residual } => {
                write!(
                    f,
                    "BiCGSTAB broke down at iteration {iterations} (residual {residual:e})"
                )
            }
        }
    }
}

/// LU factorization of `I - A` with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: LU<f64, Dyn, Dyn>,
}

impl DenseLu {
    /// Fails when a pivot is negligible relative to the largest entry of
    /// `I - A`, i.e. when the system is numerically singular.
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolveError> {
        let n = a.dim();
        let m = DMatrix::from_row_slice(n, n, &a.identity_minus_dense());
        let scale = m.amax();
        let threshold = scale * f64::EPSILON * n.max(1) as f64;
        let lu = m.lu();
        let u = lu.u();
        if let Some(k) = (0..n).find(|&k| u[(k, k)].abs() <= threshold) {
            return Err(SolveError::Singular { pivot_row: k });
        }
        Ok(DenseLu { n, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let x = self
            .lu
            .solve(&DVector::from_column_slice(b))
            .expect("pivots were checked at factorization");
        x.as_slice().to_vec()
    }
}

/// Solves `(I - A) s = f` with Jacobi-preconditioned BiCGSTAB, starting
/// from `s = f`. Stops once the recursive residual drops below `tol`
/// relative to `||f||`.
pub fn bicgstab(a: &CsrMatrix, f: &[f64], tol: f64, max_iterations: usize) -> Result<Vec<f64>, SolveError> {
    let n = a.dim();
    let fnorm = norm2(f);
    if fnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| {
            let m = 1.0 - d;
            if m.abs() > f64::EPSILON {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    let precondition = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };

    let mut x = f.to_vec();
    let mx = apply_identity_minus(a, &x);
    let mut r: Vec<f64> = f.iter().zip(&mx).map(|(b, m)| b - m).collect();
    if norm2(&r) / fnorm <= tol {
        return Ok(x);
    }
    // An exact breakdown (r̂·r = 0 or r̂·v = 0) is common on acyclic
    // supply chains, where successive residuals move to disjoint supports.
    // The iteration then restarts with the current residual as the new
    // shadow vector; a breakdown right after a restart is fatal.
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut fresh = true;

    for it in 1..=max_iterations {
        let rho_new = dot(&r_hat, &r);
        let broke = if rho_new == 0.0 || omega == 0.0 {
            true
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            false
        };
        let step = if broke {
            None
        } else {
            let y = precondition(&p);
            v = apply_identity_minus(a, &y);
            let denom = dot(&r_hat, &v);
            (denom != 0.0).then(|| (y, rho_new / denom))
        };
        let Some((y, step_alpha)) = step else {
            if fresh {
                return Err(SolveError::Breakdown {
                    iterations: it,
                    residual: norm2(&r) / fnorm,
                });
            }
            r_hat = r.clone();
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.fill(0.0);
            p.fill(0.0);
            fresh = true;
            continue;
        };
        fresh = false;
        alpha = step_alpha;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm2(&s) / fnorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(x);
        }
        let z = precondition(&s);
        let t = apply_identity_minus(a, &z);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        if norm2(&r) / fnorm <= tol {
            return Ok(x);
        }
    }
    Err(SolveError::NotConverged {
        iterations: max_iterations,
        residual: norm2(&r) / fnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> CsrMatrix {
        // p1 consumes 0.5 p2 per unit: A[p2][p1] = 0.5.
        CsrMatrix::from_triplets(2, vec![(1, 0, 0.5)])
    }

    #[test]
    fn csr_sums_duplicates_and_multiplies() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 4.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 4.0]);
        assert_eq!(a.diagonal(), vec![0.0, 0.0]);
    }

    #[test]
    fn dense_lu_solves_hand_system() {
        let lu = DenseLu::factor(&two_by_two()).unwrap();
        assert_eq!(lu.solve(&[1.0, 0.0]), vec![1.0, 0.5]);
    }

    #[test]
    fn bicgstab_solves_hand_system() {
        let s = bicgstab(&two_by_two(), &[1.0, 0.0], 1e-14, 100).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_detected() {
        let a = CsrMatrix::from_triplets(1, vec![(0, 0, 1.0)]);
        assert!(matches!(DenseLu::factor(&a), Err(SolveError::Singular { .. })));
    }

    #[test]
    fn bicgstab_restarts_after_exact_breakdown() {
        // A chain p0 -> p1 -> p2 -> p3: residuals shift one slot per step,
        // so the first shadow vector becomes orthogonal to them.
        let a = CsrMatrix::from_triplets(4, vec![(1, 0, 0.5), (2, 1, 0.5), (3, 2, 0.5)]);
        let f = [1.0, 0.0, 0.0, 0.0];
        let s = bicgstab(&a, &f, 1e-14, 100).unwrap();
        for (got, want) in s.iter().zip([1.0, 0.5, 0.25, 0.125]) {
            assert!((got - want).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn routes_agree_on_a_cycle() {
        let a = CsrMatrix::from_triplets(
            3,
            vec![(0, 1, 0.3), (1, 2, 0.4), (2, 0, 0.2), (0, 0, 0.1), (1, 0, 0.25)],
        );
        let f = [1.0, 2.0, 0.5];
        let dense = DenseLu::factor(&a).unwrap().solve(&f);
        let iter = bicgstab(&a, &f, 1e-14, 200).unwrap();
        for (d, i) in dense.iter().zip(&iter) {
            assert!((d - i).abs() <= 1e-12 * d.abs().max(1.0));
        }
        assert!(relative_residual(&a, &dense, &f) < 1e-14);
    }
}
