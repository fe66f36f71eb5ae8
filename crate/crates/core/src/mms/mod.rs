//! Manufactured solutions: exact fields, the source terms they induce, and
//! error norms of discrete fields against them.

mod gate;
mod norms;

pub use gate::{verify_sources, GateReport, FD_STEP, GATE_SAMPLES, GATE_TOL};
pub use norms::{
    format_order, format_sci, gauge_residuals, mean_order, observed_order, scalar_errors,
    vector_errors, ErrorReport, FieldErrors, FieldId, GaugeResiduals, LevelErrors, SnapshotErrors,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::mesh::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmsError {
    #[error("observed order needs positive errors, got {coarse:e} and {fine:e}")]
    NonPositive { coarse: f64, fine: f64 },
    #[error("source gate failed: max deviation {max_dev:e} at x = {x:?}, t = {t} ({term})")]
    GateFailed {
        max_dev: f64,
        x: Point,
        t: f64,
        term: &'static str,
    },
}

/// An exact solution `(psi, A, phi)` together with the derivatives needed to
/// form the source terms. Gradients are `grad[i] = d/dx_i`; vector gradients
/// are `grad[c][i] = d A_c / d x_i`.
pub trait ExactSolution: Sync {
    fn dim(&self) -> usize;

    fn psi(&self, x: &Point, t: f64) -> Complex64;
    fn psi_t(&self, x: &Point, t: f64) -> Complex64;
    fn grad_psi(&self, x: &Point, t: f64) -> [Complex64; 3];
    fn laplacian_psi(&self, x: &Point, t: f64) -> Complex64;

    fn a(&self, x: &Point, t: f64) -> Point;
    fn a_t(&self, x: &Point, t: f64) -> Point;
    fn a_tt(&self, x: &Point, t: f64) -> Point;
    fn grad_a_t(&self, x: &Point, t: f64) -> [[f64; 3]; 3];
    fn grad_a(&self, x: &Point, t: f64) -> [[f64; 3]; 3];
    fn laplacian_a(&self, x: &Point, t: f64) -> Point;

    fn phi(&self, x: &Point, t: f64) -> f64;
    fn phi_t(&self, x: &Point, t: f64) -> f64;
    fn phi_tt(&self, x: &Point, t: f64) -> f64;
    fn grad_phi(&self, x: &Point, t: f64) -> Point;
    fn laplacian_phi(&self, x: &Point, t: f64) -> f64;
}

/// Right-hand sides of the forced system at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sources {
    /// Schrödinger source.
    pub f: Complex64,
    /// Vector potential source.
    pub g: Point,
    /// Scalar potential source.
    pub l: f64,
}

/// Substitutes an exact solution into
///
/// ```text
/// -i psi_t + 1/2 (i grad + A)^2 psi + V0 psi + phi psi               = f
/// A_tt + curl curl A - grad div A + (i/2)(psi* grad psi - psi grad psi*)
///      + |psi|^2 A                                                   = g
/// phi_tt - lap phi - |psi|^2                                         = l
/// ```
///
/// using `(i grad + A)^2 psi = -lap psi + i (div A) psi + 2i A.grad psi
/// + |A|^2 psi` and `curl curl A - grad div A = -lap A`.
pub fn sources(case: &dyn ExactSolution, v0: f64, x: &Point, t: f64) -> Sources {
    let d = case.dim();
    let i = Complex64::i();
    let psi = case.psi(x, t);
    let gpsi = case.grad_psi(x, t);
    let a = case.a(x, t);
    let ga = case.grad_a(x, t);
    let phi = case.phi(x, t);

    let div_a: f64 = (0..d).map(|c| ga[c][c]).sum();
    let a_dot_gpsi: Complex64 = (0..d).map(|c| gpsi[c] * a[c]).sum();
    let a2: f64 = (0..d).map(|c| a[c] * a[c]).sum();
    let magnetic = -case.laplacian_psi(x, t) + i * div_a * psi + 2.0 * i * a_dot_gpsi + a2 * psi;
    let f = -i * case.psi_t(x, t) + 0.5 * magnetic + (v0 + phi) * psi;

    let rho = psi.norm_sqr();
    let att = case.a_tt(x, t);
    let lap_a = case.laplacian_a(x, t);
    let mut g = [0.0; 3];
    for c in 0..d {
        let current = -(psi.conj() * gpsi[c]).im;
        g[c] = att[c] - lap_a[c] + current + rho * a[c];
    }

    let l = case.phi_tt(x, t) - case.laplacian_phi(x, t) - rho;
    Sources { f, g, l }
}

/// The manufactured solution of the numerical experiment on `(0,1)^d`:
///
/// ```text
/// psi = (1 + t/2) e^{i pi t} prod_i sin(2 pi x_i)
/// A_c = cos(pi t) prod_i F_ci(x_i),  F_ci = cos(pi x_i) if i == c else sin(pi x_i)
/// phi = (t + sin(pi t)) prod_i x_i (1 - x_i)
/// ```
///
/// `d = 3` is the published case; `d = 2` is the same construction in the
/// plane, used for fast convergence runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManufacturedCase {
    dim: usize,
}

/// The three-dimensional experiment.
pub fn paper_case() -> ManufacturedCase {
    ManufacturedCase { dim: 3 }
}

/// The planar analogue of [`paper_case`].
pub fn analogue_2d() -> ManufacturedCase {
    ManufacturedCase { dim: 2 }
}

impl ManufacturedCase {
    pub fn new(dim: usize) -> Option<Self> {
        (dim == 2 || dim == 3).then_some(Self { dim })
    }

    fn sin_product(&self, x: &Point, skip: Option<usize>) -> f64 {
        (0..self.dim)
            .filter(|&i| Some(i) != skip)
            .map(|i| (2.0 * PI * x[i]).sin())
            .product()
    }

    fn psi_amplitude(t: f64) -> Complex64 {
        (1.0 + 0.5 * t) * Complex64::from_polar(1.0, PI * t)
    }

    /// Spatial part of `A_c`, and its derivative along `x_j`.
    fn a_shape(&self, x: &Point, c: usize, deriv: Option<usize>) -> f64 {
        (0..self.dim)
            .map(|i| {
                let s = (PI * x[i]).sin();
                let co = (PI * x[i]).cos();
                match (i == c, deriv == Some(i)) {
                    (true, false) => co,
                    (false, false) => s,
                    (true, true) => -PI * s,
                    (false, true) => PI * co,
                }
            })
            .product()
    }

    fn bubble(&self, x: &Point, skip: Option<usize>) -> f64 {
        (0..self.dim)
            .filter(|&i| Some(i) != skip)
            .map(|i| x[i] * (1.0 - x[i]))
            .product()
    }
}

impl ExactSolution for ManufacturedCase {
    fn dim(&self) -> usize {
        self.dim
    }

    fn psi(&self, x: &Point, t: f64) -> Complex64 {
        Self::psi_amplitude(t) * self.sin_product(x, None)
    }

    fn psi_t(&self, x: &Point, t: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, PI * t);
        let amp_t = e * Complex64::new(0.5, PI * (1.0 + 0.5 * t));
        amp_t * self.sin_product(x, None)
    }

    fn grad_psi(&self, x: &Point, t: f64) -> [Complex64; 3] {
        let amp = Self::psi_amplitude(t);
        let mut g = [Complex64::new(0.0, 0.0); 3];
        for j in 0..self.dim {
            g[j] = amp * (2.0 * PI * (2.0 * PI * x[j]).cos() * self.sin_product(x, Some(j)));
        }
        g
    }

    fn laplacian_psi(&self, x: &Point, t: f64) -> Complex64 {
        -4.0 * PI * PI * self.dim as f64 * self.psi(x, t)
    }

    fn a(&self, x: &Point, t: f64) -> Point {
        let mut out = [0.0; 3];
        for c in 0..self.dim {
            out[c] = (PI * t).cos() * self.a_shape(x, c, None);
        }
        out
    }

    fn a_t(&self, x: &Point, t: f64) -> Point {
        let mut out = [0.0; 3];
        for c in 0..self.dim {
            out[c] = -PI * (PI * t).sin() * self.a_shape(x, c, None);
        }
        out
    }

    fn a_tt(&self, x: &Point, t: f64) -> Point {
        let a = self.a(x, t);
        a.map(|v| -PI * PI * v)
    }

    fn grad_a_t(&self, x: &Point, t: f64) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for c in 0..self.dim {
            for j in 0..self.dim {
                g[c][j] = -PI * (PI * t).sin() * self.a_shape(x, c, Some(j));
            }
        }
        g
    }

    fn grad_a(&self, x: &Point, t: f64) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for c in 0..self.dim {
            for j in 0..self.dim {
                g[c][j] = (PI * t).cos() * self.a_shape(x, c, Some(j));
            }
        }
        g
    }

    fn laplacian_a(&self, x: &Point, t: f64) -> Point {
        let k = -PI * PI * self.dim as f64;
        self.a(x, t).map(|v| k * v)
    }

    fn phi(&self, x: &Point, t: f64) -> f64 {
        (t + (PI * t).sin()) * self.bubble(x, None)
    }

    fn phi_t(&self, x: &Point, t: f64) -> f64 {
        (1.0 + PI * (PI * t).cos()) * self.bubble(x, None)
    }

    fn phi_tt(&self, x: &Point, t: f64) -> f64 {
        -PI * PI * (PI * t).sin() * self.bubble(x, None)
    }

    fn grad_phi(&self, x: &Point, t: f64) -> Point {
        let c = t + (PI * t).sin();
        let mut g = [0.0; 3];
        for j in 0..self.dim {
            g[j] = c * (1.0 - 2.0 * x[j]) * self.bubble(x, Some(j));
        }
        g
    }

    fn laplacian_phi(&self, x: &Point, t: f64) -> f64 {
        let c = t + (PI * t).sin();
        c * (0..self.dim)
            .map(|j| -2.0 * self.bubble(x, Some(j)))
            .sum::<f64>()
    }
}
