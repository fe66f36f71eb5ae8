//! Convergence studies: configuration, orchestration across mesh levels and
//! CSV output.

mod config;
mod reference;

pub use config::{
    adjust_dt, apply_config, parse_config, time_grid, ConfigError, DtRule, StudyConfig,
};
pub use reference::{
    compare_reference, reference_error, ReferenceCheck, REFERENCE_LEVELS, REFERENCE_TOLERANCE,
};

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::forms::default_quadrature_degree;
use crate::mesh::Mesh;
use crate::mms::{
    format_sci, gauge_residuals, verify_sources, ErrorReport, ExactSolution, FieldId, GateReport,
    ManufacturedCase, MmsError, GATE_SAMPLES,
};
use crate::scheme::{run, InitialData, Mode, RunFailure, RunOutput, SchemeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Solver,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Solver => 3,
            ErrorCategory::Io => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Solver => "solver",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("source check failed, refusing to run: {0}")]
    Gate(MmsError),
    #[error("level M={subdivisions}: {failure}")]
    Solver {
        subdivisions: usize,
        failure: RunFailure,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl StudyError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            StudyError::Config(_) | StudyError::Gate(_) => ErrorCategory::Config,
            StudyError::Solver { failure, .. } => match failure.error {
                crate::scheme::SchemeError::Solve { .. } => ErrorCategory::Solver,
                _ => ErrorCategory::Config,
            },
            StudyError::Io { .. } => ErrorCategory::Io,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> StudyError + '_ {
    move |source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What a study produced.
#[derive(Debug)]
pub struct StudyOutcome {
    pub report: ErrorReport,
    pub runs: Vec<RunOutput>,
    pub gate: Option<GateReport>,
    pub files: Vec<PathBuf>,
}

/// Writes one per-field table to `path`.
pub fn emit_csv(report: &ErrorReport, field: FieldId, path: &Path) -> Result<(), StudyError> {
    fs::write(path, report.table_csv(field)).map_err(io_err(path))
}

fn scheme_config(cfg: &StudyConfig, m: usize) -> Result<SchemeConfig, ConfigError> {
    let (_, dt) = cfg.time_step(m)?;
    let mut sc = SchemeConfig::new(cfg.dim, m, cfg.order, dt);
    sc.t_final = cfg.t_final;
    sc.v0 = cfg.v0;
    sc.mode = cfg.mode;
    sc.tol = cfg.tol;
    sc.quad_degree = cfg
        .quad_degree
        .unwrap_or(default_quadrature_degree(cfg.order));
    sc.start = cfg.start;
    Ok(sc)
}

fn norms_csv(runs: &[RunOutput]) -> String {
    let mut out = String::from("M,step,t,psi_norm,rel_drift\n");
    for r in runs {
        let n0 = r.norm_log.first().map_or(0.0, |n| n.psi_norm);
        for n in &r.norm_log {
            let drift = if n0 > 0.0 {
                (n.psi_norm - n0).abs() / n0
            } else {
                n.psi_norm
            };
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.15e},{}",
                r.config.subdivisions,
                n.step,
                n.time,
                n.psi_norm,
                format_sci(drift)
            );
        }
    }
    out
}

fn snapshots_csv(runs: &[RunOutput]) -> String {
    let mut out = String::from("t,M,step,psi_norm,psi_sum_re,psi_sum_im,A_sum,phi_sum\n");
    for r in runs {
        for s in &r.snapshots {
            let _ = writeln!(
                out,
                "{:.6},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                s.time,
                r.config.subdivisions,
                s.step,
                s.psi_norm,
                s.psi_checksum.re,
                s.psi_checksum.im,
                s.a_checksum,
                s.phi_checksum
            );
        }
    }
    out
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, body: &str) -> Result<(), StudyError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        if !self.files.contains(&path) {
            self.files.push(path);
        }
        Ok(())
    }

    /// Rewrites every CSV from the levels completed so far; `marker` is
    /// appended as a comment line when the study did not finish.
    fn flush(
        &mut self,
        cfg: &StudyConfig,
        runs: &[RunOutput],
        marker: Option<&str>,
    ) -> Result<(), StudyError> {
        let tail = marker
            .map(|m| format!("# incomplete: {m}\n"))
            .unwrap_or_default();
        if cfg.mode == Mode::Mms {
            let report = ErrorReport {
                levels: runs.iter().filter_map(|r| r.level_errors()).collect(),
            };
            for field in FieldId::ALL {
                self.write(
                    &format!("{}.csv", field.name()),
                    &(report.table_csv(field) + &tail),
                )?;
            }
            self.write("errors_long.csv", &(report.long_csv() + &tail))?;
        } else {
            self.write("norms.csv", &(norms_csv(runs) + &tail))?;
        }
        self.write("snapshots.csv", &(snapshots_csv(runs) + &tail))
    }
}

fn log_run(log: &mut dyn Write, cfg: &StudyConfig, r: &RunOutput) -> io::Result<()> {
    let m = r.config.subdivisions;
    let (raw, dt) = cfg.time_step(m).unwrap_or((r.config.dt, r.config.dt));
    writeln!(
        log,
        "level M={m}: h={} dt={} (rule {} gives {}), steps={}, wall={:.3}s",
        format_sci(r.h),
        format_sci(dt),
        cfg.dt_rule().name(),
        format_sci(raw),
        r.steps_done,
        r.wall_time.as_secs_f64()
    )?;
    for (i, name) in ["A", "phi", "psi"].iter().enumerate() {
        writeln!(
            log,
            "  {name:>3} solves: {} iterations (max {} per step), max residual {}, {:.3}s",
            r.stats.iterations[i],
            r.stats.max_iterations[i],
            format_sci(r.stats.max_residual[i]),
            r.stats.solve_time[i].as_secs_f64()
        )?;
    }
    if r.config.mode == Mode::Free {
        writeln!(
            log,
            "  max relative drift of ||psi_h||: {}",
            format_sci(r.max_norm_drift())
        )?;
    }
    Ok(())
}

/// Copies everything written to it into a buffer for `run.log`.
struct Tee<'a> {
    buf: Vec<u8>,
    inner: &'a mut dyn Write,
}

impl Write for Tee<'_> {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.buf.extend_from_slice(data);
        self.inner.write_all(data)?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Runs every mesh level of `cfg`, writing tables and `run.log` into
/// `cfg.out` and echoing the log to `log`. In manufactured mode the
/// finite-difference source check runs first and a failure aborts the
/// study. On a solver failure the CSVs of the completed levels are kept and
/// marked as incomplete.
pub fn run_study(cfg: &StudyConfig, log: &mut dyn Write) -> Result<StudyOutcome, StudyError> {
    cfg.validate()?;
    let case = ManufacturedCase::new(cfg.dim).expect("validated dimension");
    run_study_with(cfg, &case, log)
}

/// [`run_study`] against another exact solution of dimension `cfg.dim`.
pub fn run_study_with(
    cfg: &StudyConfig,
    case: &dyn ExactSolution,
    log: &mut dyn Write,
) -> Result<StudyOutcome, StudyError> {
    cfg.validate()?;
    if case.dim() != cfg.dim {
        return Err(StudyError::Config(ConfigError::Key {
            key: "dim".into(),
            msg: format!("exact solution is {}-dimensional", case.dim()),
        }));
    }
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let mut tee = Tee {
        buf: Vec::new(),
        inner: log,
    };
    let result = study_levels(cfg, case, &mut tee);
    let log_path = cfg.out.join("run.log");
    if let Err(e) = &result {
        let _ = writeln!(tee, "error ({}): {e}", e.category().name());
    }
    fs::write(&log_path, &tee.buf).map_err(io_err(&log_path))?;
    result.map(|mut o| {
        o.files.push(log_path);
        o
    })
}

fn study_levels(
    cfg: &StudyConfig,
    case: &dyn ExactSolution,
    log: &mut dyn Write,
) -> Result<StudyOutcome, StudyError> {
    let started = Instant::now();
    let lerr = |e| StudyError::Io {
        path: PathBuf::from("<log>"),
        source: e,
    };

    writeln!(
        log,
        "study: dim={} r={} levels={:?} dt_rule={} T={} V0={} mode={} tol={:e} start={:?}",
        cfg.dim,
        cfg.order,
        cfg.levels,
        cfg.dt_rule().name(),
        cfg.t_final,
        cfg.v0,
        if cfg.mode == Mode::Mms { "mms" } else { "free" },
        cfg.tol,
        cfg.start
    )
    .map_err(lerr)?;

    let mut gate = None;
    if cfg.mode == Mode::Mms {
        writeln!(
            log,
            "sources: A and phi equations sampled at t_(k-1), psi equation at t_(k-1/2)"
        )
        .map_err(lerr)?;
        let report = verify_sources(case, cfg.v0, cfg.t_final, GATE_SAMPLES, cfg.seed)
            .map_err(StudyError::Gate)?;
        writeln!(
            log,
            "source check: {} samples, max deviation f {} g {} l {}",
            report.samples,
            format_sci(report.max_dev_f),
            format_sci(report.max_dev_g),
            format_sci(report.max_dev_l)
        )
        .map_err(lerr)?;
        gate = Some(report);
    }
    if cfg.check_gauge {
        let mesh = Mesh::build_structured(cfg.dim, cfg.levels[0]).map_err(|e| {
            StudyError::Config(ConfigError::Key {
                key: "levels".into(),
                msg: e.to_string(),
            })
        })?;
        let q = cfg
            .quad_degree
            .unwrap_or(default_quadrature_degree(cfg.order));
        match gauge_residuals(case, &mesh, q) {
            Ok(g) => writeln!(
                log,
                "gauge residuals at t=0: ||div A0 + phi1|| = {}, ||div A1 + lap phi0 + |psi0|^2|| = {}",
                format_sci(g.potential),
                format_sci(g.velocity)
            ),
            Err(e) => writeln!(log, "gauge residuals unavailable: {e}"),
        }
        .map_err(lerr)?;
    }

    let configs: Vec<SchemeConfig> = cfg
        .levels
        .iter()
        .map(|&m| scheme_config(cfg, m))
        .collect::<Result<_, _>>()?;
    let mut out = Outputs {
        dir: &cfg.out,
        files: Vec::new(),
    };
    let run_one = |sc: &SchemeConfig| {
        let init = match cfg.mode {
            Mode::Mms => InitialData::from_exact(case),
            Mode::Free => InitialData::wave_packet(case),
        };
        run(sc, Some(case), &init, &cfg.snapshots)
    };

    let mut runs = Vec::new();
    let results: Vec<Result<RunOutput, RunFailure>> = if cfg.parallel_levels {
        configs.par_iter().map(run_one).collect()
    } else {
        let mut acc = Vec::new();
        for sc in &configs {
            let r = run_one(sc);
            let failed = r.is_err();
            acc.push(r);
            if failed {
                break;
            }
        }
        acc
    };
    for (sc, result) in configs.iter().zip(results) {
        match result {
            Ok(r) => {
                log_run(log, cfg, &r).map_err(lerr)?;
                runs.push(r);
                out.flush(cfg, &runs, None)?;
            }
            Err(failure) => {
                let msg = format!("level M={} failed: {}", sc.subdivisions, failure);
                writeln!(log, "{msg}").map_err(lerr)?;
                out.flush(cfg, &runs, Some(&msg))?;
                return Err(StudyError::Solver {
                    subdivisions: sc.subdivisions,
                    failure,
                });
            }
        }
    }

    let report = ErrorReport {
        levels: runs.iter().filter_map(|r| r.level_errors()).collect(),
    };
    if cfg.mode == Mode::Mms {
        for field in FieldId::ALL {
            writeln!(
                log,
                "H1 errors of {}:\n{}",
                field.name(),
                report.table_csv(field).trim_end()
            )
            .map_err(lerr)?;
        }
    }
    writeln!(
        log,
        "total wall time {:.3}s",
        started.elapsed().as_secs_f64()
    )
    .map_err(lerr)?;
    Ok(StudyOutcome {
        report,
        runs,
        gate,
        files: out.files,
    })
}
