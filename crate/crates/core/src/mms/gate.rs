//! Finite-difference oracle for the analytic source terms.
//!
//! Every derivative in the forced system is recomputed from point values of
//! `psi`, `A` and `phi` alone by central differences, Richardson
//! extrapolated from steps `h` and `2h`, and compared with [`sources`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sources, ExactSolution, MmsError, Sources};
use crate::mesh::Point;

pub const FD_STEP: f64 = 1e-4;
pub const GATE_SAMPLES: usize = 1000;
pub const GATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateReport {
    pub samples: usize,
    pub max_dev_f: f64,
    pub max_dev_g: f64,
    pub max_dev_l: f64,
}

impl GateReport {
    pub fn max_dev(&self) -> f64 {
        self.max_dev_f.max(self.max_dev_g).max(self.max_dev_l)
    }
}

type Probe<'a> = dyn Fn(&Point, f64) -> Complex64 + 'a;

fn shifted(x: &Point, i: usize, s: f64) -> Point {
    let mut y = *x;
    y[i] += s;
    y
}

fn richardson(d: impl Fn(f64) -> Complex64, h: f64) -> Complex64 {
    (4.0 * d(h) - d(2.0 * h)) / 3.0
}

fn dx(u: &Probe, x: &Point, t: f64, i: usize, h: f64) -> Complex64 {
    richardson(
        |s| (u(&shifted(x, i, s), t) - u(&shifted(x, i, -s), t)) / (2.0 * s),
        h,
    )
}

fn dxx(u: &Probe, x: &Point, t: f64, i: usize, h: f64) -> Complex64 {
    let u0 = u(x, t);
    richardson(
        |s| (u(&shifted(x, i, s), t) - 2.0 * u0 + u(&shifted(x, i, -s), t)) / (s * s),
        h,
    )
}

fn dt(u: &Probe, x: &Point, t: f64, h: f64) -> Complex64 {
    richardson(|s| (u(x, t + s) - u(x, t - s)) / (2.0 * s), h)
}

fn dtt(u: &Probe, x: &Point, t: f64, h: f64) -> Complex64 {
    let u0 = u(x, t);
    richardson(|s| (u(x, t + s) - 2.0 * u0 + u(x, t - s)) / (s * s), h)
}

/// Sources rebuilt from finite differences of the exact fields.
pub fn fd_sources(case: &dyn ExactSolution, v0: f64, x: &Point, t: f64, h: f64) -> Sources {
    let d = case.dim();
    let i = Complex64::i();
    let psi_fn = |y: &Point, s: f64| case.psi(y, s);
    let phi_fn = |y: &Point, s: f64| Complex64::from(case.phi(y, s));
    let a_fn: Vec<Box<Probe>> = (0..d)
        .map(|c| Box::new(move |y: &Point, s: f64| Complex64::from(case.a(y, s)[c])) as Box<Probe>)
        .collect();

    let psi = case.psi(x, t);
    let a = case.a(x, t);
    let phi = case.phi(x, t);

    let mut gpsi = [Complex64::new(0.0, 0.0); 3];
    let mut lap_psi = Complex64::new(0.0, 0.0);
    let mut div_a = 0.0;
    for j in 0..d {
        gpsi[j] = dx(&psi_fn, x, t, j, h);
        lap_psi += dxx(&psi_fn, x, t, j, h);
        div_a += dx(&*a_fn[j], x, t, j, h).re;
    }
    let mut covariant = -lap_psi + i * div_a * psi;
    for j in 0..d {
        covariant += 2.0 * i * a[j] * gpsi[j] + a[j] * a[j] * psi;
    }
    let f = -i * dt(&psi_fn, x, t, h) + 0.5 * covariant + (v0 + phi) * psi;

    let rho = psi.norm_sqr();
    let mut g = [0.0; 3];
    for c in 0..d {
        // curl curl A - grad div A = -lap A componentwise.
        let lap: f64 = (0..d).map(|j| dxx(&*a_fn[c], x, t, j, h).re).sum();
        let current = 0.5 * i * (psi.conj() * gpsi[c] - psi * gpsi[c].conj());
        g[c] = dtt(&*a_fn[c], x, t, h).re - lap + current.re + rho * a[c];
    }

    let lap_phi: f64 = (0..d).map(|j| dxx(&phi_fn, x, t, j, h).re).sum();
    let l = dtt(&phi_fn, x, t, h).re - lap_phi - rho;
    Sources { f, g, l }
}

/// Compares analytic and finite-difference sources at `samples` seeded
/// random points of `(0,1)^d x [0, t_max]`.
pub fn verify_sources(
    case: &dyn ExactSolution,
    v0: f64,
    t_max: f64,
    samples: usize,
    seed: u64,
) -> Result<GateReport, MmsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = case.dim();
    let mut report = GateReport {
        samples,
        max_dev_f: 0.0,
        max_dev_g: 0.0,
        max_dev_l: 0.0,
    };
    for _ in 0..samples {
        let mut x = [0.0; 3];
        for xi in x.iter_mut().take(d) {
            *xi = rng.gen::<f64>();
        }
        let t = rng.gen::<f64>() * t_max;
        let exact = sources(case, v0, &x, t);
        let fd = fd_sources(case, v0, &x, t, FD_STEP);
        let df = (exact.f - fd.f).norm();
        let dg = (0..d)
            .map(|c| (exact.g[c] - fd.g[c]).abs())
            .fold(0.0, f64::max);
        let dl = (exact.l - fd.l).abs();
        report.max_dev_f = report.max_dev_f.max(df);
        report.max_dev_g = report.max_dev_g.max(dg);
        report.max_dev_l = report.max_dev_l.max(dl);
        for (dev, term) in [(df, "f"), (dg, "g"), (dl, "l")] {
            if !(dev <= GATE_TOL) {
                return Err(MmsError::GateFailed {
                    max_dev: dev,
                    x,
                    t,
                    term,
                });
            }
        }
    }
    Ok(report)
}
