use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use msfem::mms::{format_order, format_sci};
use msfem::study::{
    apply_config, compare_reference, run_study, ConfigError, ErrorCategory, StudyConfig,
    StudyError, REFERENCE_TOLERANCE,
};

/// Convergence studies for the alternating Crank–Nicolson finite element
/// scheme of the Maxwell–Schrödinger system.
#[derive(Debug, Parser)]
#[command(name = "msfem", version)]
struct Cli {
    /// key = value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spatial dimension (2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Element degree (1 or 2).
    #[arg(long)]
    order: Option<usize>,
    /// Mesh levels M, each doubling the previous, e.g. 8,16,32.
    #[arg(long)]
    levels: Option<String>,
    /// Time step rule: sqrt_h, h or a fixed value.
    #[arg(long = "dt-rule")]
    dt_rule: Option<String>,
    /// Final time.
    #[arg(long)]
    tmax: Option<String>,
    /// Constant potential V0.
    #[arg(long)]
    v0: Option<String>,
    /// mms (manufactured sources, error tables) or free (norm log).
    #[arg(long)]
    mode: Option<String>,
    /// Snapshot times, e.g. 1,2,3,4.
    #[arg(long)]
    snapshots: Option<String>,
    /// Relative residual tolerance of the linear solvers.
    #[arg(long)]
    tol: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report the residuals of the initial gauge conditions.
    #[arg(long = "check-gauge")]
    check_gauge: bool,
    /// Seed of the randomized source check.
    #[arg(long)]
    seed: Option<u64>,
    /// Start-up of the wave equations: first_order or second_order.
    #[arg(long)]
    start: Option<String>,
    /// Quadrature degree for assembly and error norms.
    #[arg(long = "quad-degree")]
    quad_degree: Option<usize>,
    /// Run mesh levels concurrently.
    #[arg(long = "parallel-levels")]
    parallel_levels: bool,
    /// Three-dimensional study on M = 25, 50, 100 to t = 4, compared with the
    /// reference tables.
    #[arg(long = "full-paper")]
    full_paper: bool,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut kv = Vec::new();
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k, v));
            }
        };
        push("dim", self.dim.map(|v| v.to_string()));
        push("order", self.order.map(|v| v.to_string()));
        push("levels", self.levels.clone());
        push("dt_rule", self.dt_rule.clone());
        push("tmax", self.tmax.clone());
        push("v0", self.v0.clone());
        push("mode", self.mode.clone());
        push("snapshots", self.snapshots.clone());
        push("tol", self.tol.clone());
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("start", self.start.clone());
        push("quad_degree", self.quad_degree.map(|v| v.to_string()));
        if self.check_gauge {
            push("check_gauge", Some("true".into()));
        }
        if self.parallel_levels {
            push("parallel_levels", Some("true".into()));
        }
        kv
    }
}

fn build_config(cli: &Cli) -> Result<StudyConfig, StudyError> {
    let mut cfg = StudyConfig::default();
    if cli.full_paper {
        for (k, v) in [
            ("dim", "3"),
            ("levels", "25,50,100"),
            ("tmax", "4"),
            ("snapshots", "1,2,3,4"),
            ("v0", "5"),
            ("mode", "mms"),
        ] {
            cfg.set(k, v)?;
        }
    }
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|source| StudyError::Io {
            path: path.clone(),
            source,
        })?;
        apply_config(&mut cfg, &text)?;
    }
    for (k, v) in cli.overrides() {
        cfg.set(k, &v)?;
    }
    if cli.full_paper && (cfg.dim != 3 || cfg.levels != [25, 50, 100]) {
        return Err(ConfigError::Key {
            key: "full_paper".into(),
            msg: "the reference study needs dim = 3 and levels = 25,50,100".into(),
        }
        .into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let mut stdout = io::stdout().lock();
    let outcome = match run_study(&cfg, &mut stdout) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if cli.full_paper {
        let checks = compare_reference(&outcome.report, cfg.order);
        let mut all_ok = true;
        for c in &checks {
            all_ok &= c.pass;
            println!(
                "{} {} t={:.1} M={}: computed {} reference {} (relative deviation {}, tolerance {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.field.name(),
                c.time,
                c.subdivisions,
                format_sci(c.computed),
                format_sci(c.reference),
                format_order(c.relative_deviation * 100.0) + "%",
                format_order(REFERENCE_TOLERANCE * 100.0) + "%",
            );
        }
        if !all_ok {
            eprintln!("reference comparison failed for some entries");
            return ExitCode::from(1);
        }
    }
    ExitCode::SUCCESS
}

fn fail(e: &StudyError) -> ExitCode {
    let cat: ErrorCategory = e.category();
    eprintln!("error ({}): {e}", cat.name());
    ExitCode::from(cat.exit_code() as u8)
}
