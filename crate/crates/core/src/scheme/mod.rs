//! The alternating Crank–Nicolson time stepper.
//!
//! One step from level `k-1` to level `k`:
//!
//! 1. `A^k` from the leapfrog-averaged wave equation with the current and
//!    density of `psi^{k-1}`,
//! 2. `phi^k` likewise with the density `|psi^{k-1}|^2`,
//! 3. `psi^k` from the Crank–Nicolson Schrödinger equation with the averaged
//!    potentials `(A^k + A^{k-1})/2` and `(phi^k + phi^{k-1})/2`.
//!
//! Wave steps use `U~^k = (U^k + U^{k-2})/2` in the stiffness and weight
//! terms, so their matrices are symmetric positive definite. The
//! Schrödinger matrix is complex and is solved without assuming
//! definiteness.
//!
//! Manufactured sources are sampled at `t_{k-1}` for the wave equations and
//! at `t_{k-1/2}` for the Schrödinger equation.

mod run;

pub use run::{run, NormRecord, RunFailure, RunOutput, Snapshot, SolveStats};

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::forms::{
    assemble_b, assemble_current_load, assemble_d, assemble_density_load, assemble_mass,
    assemble_source_load, assemble_stiffness, assemble_vector_source_load, assemble_weighted_mass,
    default_quadrature_degree, mass_norm_sqr, FormError, Weight,
};
use crate::mesh::{Mesh, MeshError, Point};
use crate::mms::{sources, ExactSolution};
use crate::space::{
    interpolate_scalar, interpolate_vector, Boundary, BoundaryCheck, FeSpace, FieldVector,
    SpaceError,
};
use crate::sparse::{
    ComplexSolver, CsrMatrix, SolveError, SolveReport, SolverOptions, SpdSolver, DEFAULT_TOL,
};

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("{field} solve failed at step {step} (t = {time}): {source}")]
    Solve {
        step: usize,
        time: f64,
        field: &'static str,
        #[source]
        source: SolveError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No sources.
    Free,
    /// Sources from an exact solution; errors are measured against it.
    Mms,
}

/// How `A^{-1}` and `phi^{-1}` are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartUp {
    /// `U^{-1} = U^0 - dt I_h U_1`.
    FirstOrder,
    /// `U^{-1} = U^0 - dt I_h U_1 + dt^2/2 I_h U_2` with the initial
    /// acceleration `U_2`.
    SecondOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub dim: usize,
    pub subdivisions: usize,
    pub degree: usize,
    pub t_final: f64,
    pub dt: f64,
    pub v0: f64,
    pub mode: Mode,
    pub tol: f64,
    pub quad_degree: usize,
    pub start: StartUp,
    pub boundary: Boundary,
}

impl SchemeConfig {
    /// Defaults: `T = 4`, `V0 = 5`, manufactured sources, tolerance `1e-10`,
    /// quadrature degree `2r + 2`, first-order start-up, constrained
    /// boundary.
    pub fn new(dim: usize, subdivisions: usize, degree: usize, dt: f64) -> Self {
        Self {
            dim,
            subdivisions,
            degree,
            t_final: 4.0,
            dt,
            v0: 5.0,
            mode: Mode::Mms,
            tol: DEFAULT_TOL,
            quad_degree: default_quadrature_degree(degree),
            start: StartUp::FirstOrder,
            boundary: Boundary::Constrained,
        }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::Config(m));
        if self.dim != 2 && self.dim != 3 {
            return bad(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.degree != 1 && self.degree != 2 {
            return bad(format!(
                "element degree must be 1 or 2, got {}",
                self.degree
            ));
        }
        if self.subdivisions == 0 {
            return bad("subdivisions must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!(
                "final time must be non-negative, got {}",
                self.t_final
            ));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!(
                "solver tolerance must lie in (0, 1), got {}",
                self.tol
            ));
        }
        if self.quad_degree < 2 * self.degree {
            return bad(format!(
                "quadrature degree {} is below 2r = {}",
                self.quad_degree,
                2 * self.degree
            ));
        }
        self.n_steps().map(|_| ())
    }

    /// `T / dt`, which must be an integer up to a few ulps.
    pub fn n_steps(&self) -> Result<usize, SchemeError> {
        steps_to(self.t_final, self.dt).ok_or_else(|| {
            SchemeError::Config(format!(
                "T = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            ))
        })
    }
}

/// Number of steps of size `dt` reaching `t`, if `t / dt` is an integer up
/// to roundoff.
pub fn steps_to(t: f64, dt: f64) -> Option<usize> {
    let n = t / dt;
    let r = n.round();
    ((n - r).abs() <= 8.0 * f64::EPSILON * r.max(1.0) && r >= 0.0).then_some(r as usize)
}

type ScalarFn<'a, T> = Box<dyn Fn(&Point) -> T + Sync + 'a>;

/// Initial data `psi_0, A_0, A_1, phi_0, phi_1` and optionally the initial
/// accelerations `A_2 = A_tt(0)`, `phi_2 = phi_tt(0)`.
pub struct InitialData<'a> {
    pub psi0: ScalarFn<'a, Complex64>,
    pub a0: ScalarFn<'a, Point>,
    pub a1: ScalarFn<'a, Point>,
    pub phi0: ScalarFn<'a, f64>,
    pub phi1: ScalarFn<'a, f64>,
    pub a2: Option<ScalarFn<'a, Point>>,
    pub phi2: Option<ScalarFn<'a, f64>>,
}

impl<'a> InitialData<'a> {
    /// Traces of an exact solution at `t = 0`.
    pub fn from_exact(case: &'a dyn ExactSolution) -> Self {
        Self {
            psi0: Box::new(move |x| case.psi(x, 0.0)),
            a0: Box::new(move |x| case.a(x, 0.0)),
            a1: Box::new(move |x| case.a_t(x, 0.0)),
            phi0: Box::new(move |x| case.phi(x, 0.0)),
            phi1: Box::new(move |x| case.phi_t(x, 0.0)),
            a2: Some(Box::new(move |x| case.a_tt(x, 0.0))),
            phi2: Some(Box::new(move |x| case.phi_tt(x, 0.0))),
        }
    }

    /// `psi_0` of an exact solution with quiescent potentials.
    pub fn wave_packet(case: &'a dyn ExactSolution) -> Self {
        Self {
            psi0: Box::new(move |x| case.psi(x, 0.0)),
            a0: Box::new(|_| [0.0; 3]),
            a1: Box::new(|_| [0.0; 3]),
            phi0: Box::new(|_| 0.0),
            phi1: Box::new(|_| 0.0),
            a2: Some(Box::new(|_| [0.0; 3])),
            phi2: Some(Box::new(|_| 0.0)),
        }
    }
}

/// Discrete fields at the current level `k` and the levels below it.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub step: usize,
    pub dt: f64,
    pub psi: FieldVector<Complex64>,
    pub psi_prev: FieldVector<Complex64>,
    pub a: FieldVector<f64>,
    pub a_prev: FieldVector<f64>,
    pub a_prev2: FieldVector<f64>,
    pub phi: FieldVector<f64>,
    pub phi_prev: FieldVector<f64>,
    pub phi_prev2: FieldVector<f64>,
}

impl FieldState {
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    fn shift(&mut self, psi: FieldVector<Complex64>, a: FieldVector<f64>, phi: FieldVector<f64>) {
        self.psi_prev = std::mem::replace(&mut self.psi, psi);
        self.a_prev2 = std::mem::replace(&mut self.a_prev, std::mem::replace(&mut self.a, a));
        self.phi_prev2 =
            std::mem::replace(&mut self.phi_prev, std::mem::replace(&mut self.phi, phi));
        self.step += 1;
    }
}

/// A linear system `matrix * x = rhs` with a suggested initial guess.
#[derive(Debug, Clone)]
pub struct StepSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub guess: Vec<T>,
}

/// Per-step solver reports.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub a: SolveReport,
    pub phi: SolveReport,
    pub psi: SolveReport,
}

/// Spaces and cached operators for one configuration.
pub struct Stepper<'a> {
    config: SchemeConfig,
    exact: Option<&'a dyn ExactSolution>,
    psi_space: Arc<FeSpace>,
    a_space: Arc<FeSpace>,
    phi_space: Arc<FeSpace>,
    mass_c: CsrMatrix<Complex64>,
    mass_psi: CsrMatrix<f64>,
    mass_v: CsrMatrix<f64>,
    curl_div: CsrMatrix<f64>,
    mass_s: CsrMatrix<f64>,
    stiff_s: CsrMatrix<f64>,
    phi_solver: SpdSolver,
}

impl<'a> Stepper<'a> {
    /// Builds the mesh, the three spaces and the time-independent operators.
    /// `exact` supplies the sources in [`Mode::Mms`] and is ignored in
    /// [`Mode::Free`].
    pub fn new(
        config: SchemeConfig,
        exact: Option<&'a dyn ExactSolution>,
    ) -> Result<Self, SchemeError> {
        config.validate()?;
        if config.mode == Mode::Mms {
            match exact {
                None => {
                    return Err(SchemeError::Config(
                        "manufactured mode needs an exact solution".into(),
                    ))
                }
                Some(e) if e.dim() != config.dim => {
                    return Err(SchemeError::Config(format!(
                        "exact solution is {}-dimensional, mesh is {}-dimensional",
                        e.dim(),
                        config.dim
                    )))
                }
                _ => {}
            }
        }
        let mesh = Arc::new(Mesh::build_structured(config.dim, config.subdivisions)?);
        let r = config.degree;
        let psi_space = FeSpace::scalar(mesh.clone(), r, true, config.boundary)?;
        let a_space = FeSpace::vector(mesh.clone(), r, config.boundary)?;
        let phi_space = FeSpace::scalar(mesh, r, false, config.boundary)?;
        let q = config.quad_degree;

        let mass_psi = assemble_mass(&psi_space, q)?.matrix;
        let mass_c = mass_psi.to_complex();
        let mass_v = assemble_mass(&a_space, q)?.matrix;
        let curl_div = assemble_d(&a_space, q)?.matrix;
        let mass_s = assemble_mass(&phi_space, q)?.matrix;
        let stiff_s = assemble_stiffness(&phi_space, q)?.matrix;
        let inv_dt2 = 1.0 / (config.dt * config.dt);
        let phi_matrix = CsrMatrix::linear_combination(&[(inv_dt2, &mass_s), (0.5, &stiff_s)])
            .expect("mass and stiffness share the space pattern");
        let phi_solver =
            SpdSolver::new(phi_matrix, SolverOptions::with_tol(config.tol)).map_err(|source| {
                SchemeError::Solve {
                    step: 0,
                    time: 0.0,
                    field: "phi",
                    source,
                }
            })?;
        Ok(Self {
            exact: if config.mode == Mode::Mms {
                exact
            } else {
                None
            },
            config,
            psi_space,
            a_space,
            phi_space,
            mass_c,
            mass_psi,
            mass_v,
            curl_div,
            mass_s,
            stiff_s,
            phi_solver,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn exact(&self) -> Option<&'a dyn ExactSolution> {
        self.exact
    }

    pub fn psi_space(&self) -> &Arc<FeSpace> {
        &self.psi_space
    }

    pub fn a_space(&self) -> &Arc<FeSpace> {
        &self.a_space
    }

    pub fn phi_space(&self) -> &Arc<FeSpace> {
        &self.phi_space
    }

    /// Scalar mass matrix on the `psi` space.
    pub fn psi_mass(&self) -> &CsrMatrix<Complex64> {
        &self.mass_c
    }

    /// `psi^H M psi`.
    pub fn psi_norm_sqr(&self, psi: &FieldVector<Complex64>) -> f64 {
        mass_norm_sqr(&self.mass_psi, psi.coefficients())
    }

    /// Interpolates the initial data into level 0 and level -1. Values
    /// on constrained boundary nodes must vanish to `1e-10`.
    pub fn initialize(&self, data: &InitialData) -> Result<FieldState, SchemeError> {
        let check = BoundaryCheck::Strict;
        let dt = self.config.dt;
        let psi = interpolate_scalar(&self.psi_space, &data.psi0, check)?;
        let a = interpolate_vector(&self.a_space, &data.a0, check)?;
        let a1 = interpolate_vector(&self.a_space, &data.a1, check)?;
        let phi = interpolate_scalar(&self.phi_space, &data.phi0, check)?;
        let phi1 = interpolate_scalar(&self.phi_space, &data.phi1, check)?;
        let mut a_prev = a.combine(1.0, &a1, -dt);
        let mut phi_prev = phi.combine(1.0, &phi1, -dt);
        if self.config.start == StartUp::SecondOrder {
            let (Some(a2), Some(phi2)) = (&data.a2, &data.phi2) else {
                return Err(SchemeError::Config(
                    "second-order start-up needs initial accelerations".into(),
                ));
            };
            let a2 = interpolate_vector(&self.a_space, a2, check)?;
            let phi2 = interpolate_scalar(&self.phi_space, phi2, check)?;
            a_prev = a_prev.combine(1.0, &a2, 0.5 * dt * dt);
            phi_prev = phi_prev.combine(1.0, &phi2, 0.5 * dt * dt);
        }
        Ok(FieldState {
            step: 0,
            dt,
            psi_prev: psi.clone(),
            psi,
            a_prev2: a_prev.clone(),
            a_prev,
            a,
            phi_prev2: phi_prev.clone(),
            phi_prev,
            phi,
        })
    }

    fn source_time(&self, state: &FieldState) -> f64 {
        state.time()
    }

    /// System for `A^{k}` given `A^{k-1} = state.a`, `A^{k-2} = state.a_prev`
    /// and `psi^{k-1} = state.psi`.
    pub fn wave_a_system(&self, state: &FieldState) -> Result<StepSystem<f64>, SchemeError> {
        let q = self.config.quad_degree;
        let dt = self.config.dt;
        let inv_dt2 = 1.0 / (dt * dt);
        let weight = assemble_weighted_mass(&self.a_space, &Weight::Density(&state.psi), q)?.matrix;
        let elliptic = CsrMatrix::linear_combination(&[(1.0, &self.curl_div), (1.0, &weight)])
            .expect("shared vector pattern");
        let matrix = CsrMatrix::linear_combination(&[(inv_dt2, &self.mass_v), (0.5, &elliptic)])
            .expect("shared vector pattern");

        let a1 = state.a.coefficients();
        let a2 = state.a_prev.coefficients();
        let extrap: Vec<f64> = a1.iter().zip(a2).map(|(x, y)| 2.0 * x - y).collect();
        let m_part = self.mass_v.matvec(&extrap);
        let e_part = elliptic.matvec(a2);
        let current = assemble_current_load(&self.a_space, &state.psi, q)?;
        let mut rhs: Vec<f64> = (0..m_part.len())
            .map(|i| inv_dt2 * m_part[i] - 0.5 * e_part[i] - current[i])
            .collect();
        if let Some(case) = self.exact {
            let (v0, t) = (self.config.v0, self.source_time(state));
            let g = assemble_vector_source_load(&self.a_space, |x| sources(case, v0, x, t).g, q)?;
            rhs.iter_mut().zip(g).for_each(|(r, g)| *r += g);
        }
        Ok(StepSystem {
            matrix,
            rhs,
            guess: extrap,
        })
    }

    /// System for `phi^{k}`; the matrix is the cached one.
    pub fn wave_phi_system(&self, state: &FieldState) -> Result<StepSystem<f64>, SchemeError> {
        let (rhs, guess) = self.wave_phi_rhs(state)?;
        Ok(StepSystem {
            matrix: self.phi_solver.matrix().clone(),
            rhs,
            guess,
        })
    }

    fn wave_phi_rhs(&self, state: &FieldState) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
        let q = self.config.quad_degree;
        let dt = self.config.dt;
        let inv_dt2 = 1.0 / (dt * dt);
        let p1 = state.phi.coefficients();
        let p2 = state.phi_prev.coefficients();
        let extrap: Vec<f64> = p1.iter().zip(p2).map(|(x, y)| 2.0 * x - y).collect();
        let m_part = self.mass_s.matvec(&extrap);
        let k_part = self.stiff_s.matvec(p2);
        let density = assemble_density_load(&self.phi_space, &state.psi, q)?;
        let mut rhs: Vec<f64> = (0..m_part.len())
            .map(|i| inv_dt2 * m_part[i] - 0.5 * k_part[i] + density[i])
            .collect();
        if let Some(case) = self.exact {
            let (v0, t) = (self.config.v0, self.source_time(state));
            let l = assemble_source_load(&self.phi_space, |x| sources(case, v0, x, t).l, q)?;
            rhs.iter_mut().zip(l).for_each(|(r, l)| *r += l);
        }
        Ok((rhs, extrap))
    }

    /// System for `psi^{k}` given the new potentials `A^k`, `phi^k`.
    pub fn schrodinger_system(
        &self,
        state: &FieldState,
        a_new: &FieldVector<f64>,
        phi_new: &FieldVector<f64>,
    ) -> Result<StepSystem<Complex64>, SchemeError> {
        let q = self.config.quad_degree;
        let dt = self.config.dt;
        let a_bar = a_new.combine(0.5, &state.a, 0.5);
        let phi_bar = phi_new.combine(0.5, &state.phi, 0.5);
        let kb = assemble_b(&self.psi_space, &a_bar, q)?.matrix;
        let mw = assemble_weighted_mass(
            &self.psi_space,
            &Weight::ShiftedPotential {
                shift: self.config.v0,
                field: &phi_bar,
            },
            q,
        )?
        .matrix
        .to_complex();
        let elliptic = CsrMatrix::linear_combination(&[
            (Complex64::new(0.25, 0.0), &kb),
            (Complex64::new(0.5, 0.0), &mw),
        ])
        .expect("shared scalar pattern");
        let time = Complex64::new(0.0, -1.0 / dt);
        let matrix = CsrMatrix::linear_combination(&[
            (time, &self.mass_c),
            (Complex64::new(1.0, 0.0), &elliptic),
        ])
        .expect("shared scalar pattern");

        let prev = state.psi.coefficients();
        let m_part = self.mass_c.matvec(prev);
        let e_part = elliptic.matvec(prev);
        let mut rhs: Vec<Complex64> = m_part
            .iter()
            .zip(&e_part)
            .map(|(m, e)| time * m - e)
            .collect();
        if let Some(case) = self.exact {
            let (v0, t) = (self.config.v0, self.source_time(state) + 0.5 * dt);
            let f = assemble_source_load(&self.psi_space, |x| sources(case, v0, x, t).f, q)?;
            rhs.iter_mut().zip(f).for_each(|(r, f)| *r += f);
        }
        Ok(StepSystem {
            matrix,
            rhs,
            guess: prev.to_vec(),
        })
    }

    fn solve_error(
        &self,
        state: &FieldState,
        field: &'static str,
    ) -> impl Fn(SolveError) -> SchemeError {
        let (step, time) = (state.step + 1, state.time() + self.config.dt);
        move |source| SchemeError::Solve {
            step,
            time,
            field,
            source,
        }
    }

    pub fn step_wave_a(
        &self,
        state: &FieldState,
    ) -> Result<(FieldVector<f64>, SolveReport), SchemeError> {
        let sys = self.wave_a_system(state)?;
        let solver = SpdSolver::new(sys.matrix, SolverOptions::with_tol(self.config.tol))
            .map_err(self.solve_error(state, "A"))?;
        let (x, report) = solver
            .solve(&sys.rhs, Some(&sys.guess))
            .map_err(self.solve_error(state, "A"))?;
        Ok((FieldVector::from_coefficients(&self.a_space, x)?, report))
    }

    pub fn step_wave_phi(
        &self,
        state: &FieldState,
    ) -> Result<(FieldVector<f64>, SolveReport), SchemeError> {
        let (rhs, guess) = self.wave_phi_rhs(state)?;
        let (x, report) = self
            .phi_solver
            .solve(&rhs, Some(&guess))
            .map_err(self.solve_error(state, "phi"))?;
        Ok((FieldVector::from_coefficients(&self.phi_space, x)?, report))
    }

    pub fn step_schrodinger(
        &self,
        state: &FieldState,
        a_new: &FieldVector<f64>,
        phi_new: &FieldVector<f64>,
    ) -> Result<(FieldVector<Complex64>, SolveReport), SchemeError> {
        let sys = self.schrodinger_system(state, a_new, phi_new)?;
        let solver = ComplexSolver::new(sys.matrix, SolverOptions::with_tol(self.config.tol))
            .map_err(self.solve_error(state, "psi"))?;
        let (x, report) = solver
            .solve(&sys.rhs, Some(&sys.guess))
            .map_err(self.solve_error(state, "psi"))?;
        Ok((FieldVector::from_coefficients(&self.psi_space, x)?, report))
    }

    /// One full step `k -> k+1` in the order A, phi, psi.
    pub fn advance(&self, state: &mut FieldState) -> Result<StepReport, SchemeError> {
        let (a, ra) = self.step_wave_a(state)?;
        let (phi, rphi) = self.step_wave_phi(state)?;
        let (psi, rpsi) = self.step_schrodinger(state, &a, &phi)?;
        state.shift(psi, a, phi);
        Ok(StepReport {
            a: ra,
            phi: rphi,
            psi: rpsi,
        })
    }
}
