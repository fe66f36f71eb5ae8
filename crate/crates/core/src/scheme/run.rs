use std::time::{Duration, Instant};

use num_complex::Complex64;

use super::{steps_to, FieldState, InitialData, SchemeConfig, SchemeError, Stepper};
use crate::mms::{scalar_errors, vector_errors, ExactSolution, LevelErrors, SnapshotErrors};
use crate::sparse::SolveReport;

/// Field norms and coefficient checksums at one requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub step: usize,
    pub psi_norm: f64,
    pub psi_checksum: Complex64,
    pub a_checksum: f64,
    pub phi_checksum: f64,
    /// Present in manufactured mode.
    pub errors: Option<SnapshotErrors>,
}

/// `||psi_h^k||_{L2}` after step `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub step: usize,
    pub time: f64,
    pub psi_norm: f64,
}

/// Accumulated solver statistics per field: `[A, phi, psi]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: [usize; 3],
    pub max_iterations: [usize; 3],
    pub max_residual: [f64; 3],
    pub solve_time: [Duration; 3],
}

impl SolveStats {
    fn record(&mut self, i: usize, r: &SolveReport) {
        self.iterations[i] += r.iterations;
        self.max_iterations[i] = self.max_iterations[i].max(r.iterations);
        self.max_residual[i] = self.max_residual[i].max(r.relative_residual);
        self.solve_time[i] += r.wall_time;
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: SchemeConfig,
    /// `1/M`.
    pub h: f64,
    pub steps_done: usize,
    pub snapshots: Vec<Snapshot>,
    pub norm_log: Vec<NormRecord>,
    pub stats: SolveStats,
    pub wall_time: Duration,
}

impl RunOutput {
    /// Errors of all snapshots, if they were measured.
    pub fn level_errors(&self) -> Option<LevelErrors> {
        let snapshots: Option<Vec<SnapshotErrors>> =
            self.snapshots.iter().map(|s| s.errors).collect();
        Some(LevelErrors {
            subdivisions: self.config.subdivisions,
            h: self.h,
            dt: self.config.dt,
            snapshots: snapshots?,
        })
    }

    /// Largest `| ||psi^k|| - ||psi^0|| | / ||psi^0||` over the norm log.
    pub fn max_norm_drift(&self) -> f64 {
        let Some(first) = self.norm_log.first() else {
            return 0.0;
        };
        if first.psi_norm == 0.0 {
            return self.norm_log.iter().map(|r| r.psi_norm).fold(0.0, f64::max);
        }
        self.norm_log
            .iter()
            .map(|r| (r.psi_norm - first.psi_norm).abs() / first.psi_norm)
            .fold(0.0, f64::max)
    }
}

/// A failed run with everything computed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: SchemeError,
    pub elapsed: Duration,
    pub partial: Option<RunOutput>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {:.2} s)",
            self.error,
            self.elapsed.as_secs_f64()
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn snapshot(stepper: &Stepper, state: &FieldState) -> Result<Snapshot, SchemeError> {
    let q = stepper.config().quad_degree;
    let t = state.time();
    let errors = match stepper.exact() {
        Some(case) => Some(measure(case, state, t, q)?),
        None => None,
    };
    Ok(Snapshot {
        time: t,
        step: state.step,
        psi_norm: stepper.psi_norm_sqr(&state.psi).sqrt(),
        psi_checksum: state.psi.coefficients().iter().sum(),
        a_checksum: state.a.coefficients().iter().sum(),
        phi_checksum: state.phi.coefficients().iter().sum(),
        errors,
    })
}

/// Errors of the current level against an exact solution at time `t`.
pub(crate) fn measure(
    case: &dyn ExactSolution,
    state: &FieldState,
    t: f64,
    q: usize,
) -> Result<SnapshotErrors, SchemeError> {
    Ok(SnapshotErrors {
        time: t,
        psi: scalar_errors(&state.psi, |x| case.psi(x, t), |x| case.grad_psi(x, t), q)?,
        a: vector_errors(&state.a, |x| case.a(x, t), |x| case.grad_a(x, t), q)?,
        phi: scalar_errors(&state.phi, |x| case.phi(x, t), |x| case.grad_phi(x, t), q)?,
    })
}

/// Runs `config` to its final time from `initial`, recording a snapshot at
/// each requested time and `||psi_h^k||` after every step.
pub fn run(
    config: &SchemeConfig,
    exact: Option<&dyn ExactSolution>,
    initial: &InitialData,
    snapshot_times: &[f64],
) -> Result<RunOutput, RunFailure> {
    let start = Instant::now();
    let fail = |error, partial| RunFailure {
        error,
        elapsed: start.elapsed(),
        partial,
    };
    let setup = (|| {
        let stepper = Stepper::new(config.clone(), exact)?;
        let n_steps = config.n_steps()?;
        let mut wanted = Vec::with_capacity(snapshot_times.len());
        for &t in snapshot_times {
            match steps_to(t, config.dt) {
                Some(k) if k <= n_steps => wanted.push(k),
                _ => {
                    return Err(SchemeError::Config(format!(
                        "snapshot time {t} is not a step of dt = {} in [0, {}]",
                        config.dt, config.t_final
                    )))
                }
            }
        }
        let state = stepper.initialize(initial)?;
        Ok((stepper, n_steps, wanted, state))
    })();
    let (stepper, n_steps, wanted, mut state) = setup.map_err(|e| fail(e, None))?;

    let mut out = RunOutput {
        config: config.clone(),
        h: 1.0 / config.subdivisions as f64,
        steps_done: 0,
        snapshots: Vec::new(),
        norm_log: vec![NormRecord {
            step: 0,
            time: 0.0,
            psi_norm: stepper.psi_norm_sqr(&state.psi).sqrt(),
        }],
        stats: SolveStats::default(),
        wall_time: Duration::ZERO,
    };
    loop {
        if wanted.contains(&state.step) {
            match snapshot(&stepper, &state) {
                Ok(s) => out.snapshots.push(s),
                Err(e) => {
                    out.wall_time = start.elapsed();
                    return Err(fail(e, Some(out)));
                }
            }
        }
        if state.step == n_steps {
            break;
        }
        match stepper.advance(&mut state) {
            Ok(rep) => {
                out.stats.record(0, &rep.a);
                out.stats.record(1, &rep.phi);
                out.stats.record(2, &rep.psi);
                out.steps_done = state.step;
                out.norm_log.push(NormRecord {
                    step: state.step,
                    time: state.time(),
                    psi_norm: stepper.psi_norm_sqr(&state.psi).sqrt(),
                });
            }
            Err(e) => {
                out.wall_time = start.elapsed();
                return Err(fail(e, Some(out)));
            }
        }
    }
    out.wall_time = start.elapsed();
    Ok(out)
}
