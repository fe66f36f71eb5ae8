use std::time::{Duration, Instant};

use num_complex::Complex64;
use thiserror::Error;

use super::{CsrMatrix, Scalar};

/// Relative residual target used when callers do not ask for another.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Krylov iterations (0 for a trivial right-hand side).
    pub iterations: usize,
    /// Recomputed `||Ax - b|| / ||b||`.
    pub relative_residual: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no convergence after {} iterations (relative residual {:.3e})", .report.iterations, .report.relative_residual)]
    NonConvergence { report: SolveReport },
    #[error("solver breakdown after {} iterations", .report.iterations)]
    Breakdown { report: SolveReport },
    #[error("right-hand side or matrix contains non-finite values")]
    NonFinite,
    #[error("dimension mismatch: matrix {rows}x{cols}, vector {len}")]
    Dimension {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("zero on the diagonal at row {0}")]
    ZeroDiagonal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES restart length.
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: 20_000,
            restart: 80,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

fn norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs2()).sum::<f64>().sqrt()
}

/// `sum conj(a_i) b_i`
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * *y;
    }
    acc
}

fn residual<T: Scalar>(a: &CsrMatrix<T>, x: &[T], b: &[T], r: &mut [T]) -> f64 {
    a.matvec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    norm(r)
}

fn check_inputs<T: Scalar>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>, SolveError> {
    if a.n_rows() != a.n_cols() || b.len() != a.n_rows() {
        return Err(SolveError::Dimension {
            rows: a.n_rows(),
            cols: a.n_cols(),
            len: b.len(),
        });
    }
    if !b.iter().all(|v| v.is_finite()) || !a.values().iter().all(|v| v.is_finite()) {
        return Err(SolveError::NonFinite);
    }
    let diag = a.diagonal();
    diag.iter()
        .enumerate()
        .map(|(i, d)| {
            if d.abs() == 0.0 {
                Err(SolveError::ZeroDiagonal(i))
            } else {
                Ok(T::one() / *d)
            }
        })
        .collect()
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite matrix. The preconditioner is built once and reused across solves.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    matrix: CsrMatrix<f64>,
    inv_diag: Vec<f64>,
    options: SolverOptions,
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix<f64>, options: SolverOptions) -> Result<Self, SolveError> {
        let zero = vec![0.0; matrix.n_rows()];
        let inv_diag = check_inputs(&matrix, &zero)?;
        debug_assert!(
            matrix.hermitian_deviation() <= 1e-12 * max_abs(matrix.values()).max(1.0),
            "SPD solve requested for a non-symmetric matrix"
        );
        Ok(Self {
            matrix,
            inv_diag,
            options,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    pub fn solve(
        &self,
        b: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveReport), SolveError> {
        let start = Instant::now();
        let a = &self.matrix;
        let n = a.n_rows();
        if b.len() != n {
            return Err(SolveError::Dimension {
                rows: n,
                cols: n,
                len: b.len(),
            });
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(SolveError::NonFinite);
        }
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], report(0, 0.0, start)));
        }
        let tol = self.options.tol;
        let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let mut r = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut ap = vec![0.0; n];
        let mut iters = 0;
        // Outer loop re-derives the true residual so the final bound is honest.
        loop {
            let rnorm = residual(a, &x, b, &mut r);
            if rnorm <= tol * bnorm {
                return Ok((x, report(iters, rnorm / bnorm, start)));
            }
            if iters >= self.options.max_iter {
                return Err(SolveError::NonConvergence {
                    report: report(iters, rnorm / bnorm, start),
                });
            }
            for i in 0..n {
                z[i] = self.inv_diag[i] * r[i];
            }
            p.copy_from_slice(&z);
            let mut rz = dot(&r, &z);
            let inner_target = 0.5 * tol * bnorm;
            while iters < self.options.max_iter {
                a.matvec_into(&p, &mut ap);
                let pap = dot(&p, &ap);
                iters += 1;
                if pap <= 0.0 || !pap.is_finite() {
                    return Err(SolveError::Breakdown {
                        report: report(iters, norm(&r) / bnorm, start),
                    });
                }
                let alpha = rz / pap;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                }
                if norm(&r) <= inner_target {
                    break;
                }
                for i in 0..n {
                    z[i] = self.inv_diag[i] * r[i];
                }
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..n {
                    p[i] = z[i] + beta * p[i];
                }
            }
        }
    }
}

/// One-shot SPD solve with default iteration limits.
pub fn solve_spd(
    a: &CsrMatrix<f64>,
    b: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    SpdSolver::new(a.clone(), SolverOptions::with_tol(tol))?.solve(b, None)
}

/// Restarted GMRES with right Jacobi preconditioning for general square
/// complex matrices.
#[derive(Debug, Clone)]
pub struct ComplexSolver {
    matrix: CsrMatrix<Complex64>,
    inv_diag: Vec<Complex64>,
    options: SolverOptions,
}

impl ComplexSolver {
    pub fn new(matrix: CsrMatrix<Complex64>, options: SolverOptions) -> Result<Self, SolveError> {
        let zero = vec![Complex64::new(0.0, 0.0); matrix.n_rows()];
        let inv_diag = check_inputs(&matrix, &zero)?;
        Ok(Self {
            matrix,
            inv_diag,
            options,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix<Complex64> {
        &self.matrix
    }

    pub fn solve(
        &self,
        b: &[Complex64],
        guess: Option<&[Complex64]>,
    ) -> Result<(Vec<Complex64>, SolveReport), SolveError> {
        gmres(&self.matrix, &self.inv_diag, b, guess, &self.options)
    }
}

pub fn solve_complex(
    a: &CsrMatrix<Complex64>,
    b: &[Complex64],
    tol: f64,
) -> Result<(Vec<Complex64>, SolveReport), SolveError> {
    ComplexSolver::new(a.clone(), SolverOptions::with_tol(tol))?.solve(b, None)
}

fn gmres<T: Scalar>(
    a: &CsrMatrix<T>,
    inv_diag: &[T],
    b: &[T],
    guess: Option<&[T]>,
    opts: &SolverOptions,
) -> Result<(Vec<T>, SolveReport), SolveError> {
    let start = Instant::now();
    let n = a.n_rows();
    if b.len() != n {
        return Err(SolveError::Dimension {
            rows: n,
            cols: n,
            len: b.len(),
        });
    }
    if !b.iter().all(|v| v.is_finite()) {
        return Err(SolveError::NonFinite);
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![T::zero(); n], report(0, 0.0, start)));
    }
    let m = opts.restart.max(1);
    let mut x = guess.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let mut r = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    // Hessenberg columns, each of length m + 1.
    let mut hess: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![T::zero(); m];
    let mut g = vec![T::zero(); m + 1];
    let mut iters = 0;

    loop {
        let beta = residual(a, &x, b, &mut r);
        if beta <= opts.tol * bnorm {
            return Ok((x, report(iters, beta / bnorm, start)));
        }
        if iters >= opts.max_iter {
            return Err(SolveError::NonConvergence {
                report: report(iters, beta / bnorm, start),
            });
        }
        basis.clear();
        hess.clear();
        basis.push(r.iter().map(|&v| v * T::from_real(1.0 / beta)).collect());
        g.iter_mut().for_each(|v| *v = T::zero());
        g[0] = T::from_real(beta);
        let mut k_used = 0;
        let inner_target = 0.5 * opts.tol * bnorm;
        for k in 0..m {
            for i in 0..n {
                z[i] = inv_diag[i] * basis[k][i];
            }
            a.matvec_into(&z, &mut w);
            iters += 1;
            let mut h = vec![T::zero(); m + 1];
            for (j, v) in basis.iter().enumerate() {
                let hj = dot(v, &w);
                h[j] = hj;
                for i in 0..n {
                    w[i] -= hj * v[i];
                }
            }
            let wnorm = norm(&w);
            h[k + 1] = T::from_real(wnorm);
            for j in 0..k {
                let (c, s) = (cs[j], sn[j]);
                let t = T::from_real(c) * h[j] + s * h[j + 1];
                h[j + 1] = -s.conj() * h[j] + T::from_real(c) * h[j + 1];
                h[j] = t;
            }
            let (c, s, rr) = givens(h[k], h[k + 1]);
            cs[k] = c;
            sn[k] = s;
            h[k] = rr;
            h[k + 1] = T::zero();
            g[k + 1] = -s.conj() * g[k];
            g[k] = T::from_real(c) * g[k];
            hess.push(h);
            k_used = k + 1;
            if g[k + 1].abs() <= inner_target || iters >= opts.max_iter {
                break;
            }
            if wnorm == 0.0 {
                break;
            }
            basis.push(w.iter().map(|&v| v * T::from_real(1.0 / wnorm)).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[j][i] * y[j];
            }
            let d = hess[i][i];
            if d.abs() == 0.0 {
                return Err(SolveError::Breakdown {
                    report: report(iters, beta / bnorm, start),
                });
            }
            y[i] = acc / d;
        }
        // x += D^{-1} V y
        w.iter_mut().for_each(|v| *v = T::zero());
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                w[i] += *yj * basis[j][i];
            }
        }
        for i in 0..n {
            x[i] += inv_diag[i] * w[i];
        }
    }
}

/// Rotation `[c s; -conj(s) c]` taking `(a, b)` to `(r, 0)`.
fn givens<T: Scalar>(a: T, b: T) -> (f64, T, T) {
    let (aa, bb) = (a.abs(), b.abs());
    let den = (aa * aa + bb * bb).sqrt();
    if den == 0.0 {
        return (1.0, T::zero(), T::zero());
    }
    if aa == 0.0 {
        return (0.0, b.conj() * T::from_real(1.0 / den), T::from_real(den));
    }
    let phase = a * T::from_real(1.0 / aa);
    let c = aa / den;
    let s = phase * b.conj() * T::from_real(1.0 / den);
    (c, s, phase * T::from_real(den))
}

fn max_abs<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn report(iterations: usize, relative_residual: f64, start: Instant) -> SolveReport {
    SolveReport {
        iterations,
        relative_residual,
        wall_time: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::<f64>::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let (x, rep) = solve_spd(&a, &b, 1e-12).unwrap();
        assert_eq!(x, b);
        assert!(rep.relative_residual <= 1e-12);

        let a = CsrMatrix::<C>::identity(3);
        let b = vec![C::new(1.0, 2.0), C::new(0.0, -1.0), C::new(3.0, 0.0)];
        let (x, _) = solve_complex(&a, &b, 1e-12).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_systems() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let (x, _) = solve_spd(&a, &[2.0, 8.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);

        let a =
            CsrMatrix::from_triplets(2, 2, &[(0, 0, C::new(0.0, 1.0)), (1, 1, C::new(2.0, 0.0))])
                .unwrap();
        let (x, _) = solve_complex(&a, &[C::new(0.0, 1.0), C::new(2.0, 0.0)], 1e-12).unwrap();
        assert!((x[0] - C::new(1.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - C::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::<f64>::identity(3);
        let (x, rep) = solve_spd(&a, &[0.0; 3], 1e-10).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn non_finite_rhs_is_rejected() {
        let a = CsrMatrix::<f64>::identity(2);
        assert_eq!(
            solve_spd(&a, &[f64::NAN, 1.0], 1e-10).unwrap_err(),
            SolveError::NonFinite
        );
    }

    #[test]
    fn iteration_cap_reports_failure() {
        // 1D Laplacian, far too few iterations allowed.
        let n = 200;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: 5,
            restart: 80,
        };
        let err = SpdSolver::new(a, opts)
            .unwrap()
            .solve(&vec![1.0; n], None)
            .unwrap_err();
        match err {
            SolveError::NonConvergence { report } => assert!(report.iterations >= 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gmres_on_nonsymmetric_complex_system() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C::new(4.0, 1.0)));
            if i + 1 < n {
                t.push((i, i + 1, C::new(-1.0, 0.5)));
                t.push((i + 1, i, C::new(-0.5, -1.0)));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<C> = (0..n).map(|i| C::new(i as f64, 1.0)).collect();
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: 1000,
            restart: 7,
        };
        let (x, rep) = ComplexSolver::new(a.clone(), opts)
            .unwrap()
            .solve(&b, None)
            .unwrap();
        let ax = a.matvec(&x);
        let res: f64 = ax
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let bn: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(res / bn <= 1e-12);
        assert!((rep.relative_residual - res / bn).abs() < 1e-14);
    }
}
