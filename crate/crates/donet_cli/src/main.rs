use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use do_nonlocal::cli::{self, CliError, ConfigError, Preset, RunConfig};

/// Distributed-order nonlocal rod: continuum and lattice solves, energies
/// and stiffness reports.
#[derive(Parser, Debug)]
#[command(name = "donet", version)]
struct Args {
    /// Config file (`[section]` headers with `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// case1, case2 or lattice2d.
    #[arg(long)]
    preset: Option<String>,
    /// e.g. `uniform`, `beta a=2 b=5`, `dirac alpha=0.7`.
    #[arg(long)]
    dist: Option<String>,
    /// dbc:VALUE or tbc:VALUE.
    #[arg(long)]
    bc: Option<String>,
    /// Number of intervals.
    #[arg(long)]
    n: Option<usize>,
    /// Number of order intervals.
    #[arg(long)]
    nalpha: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// donet, mslm or both.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    stiffness_report: bool,
}

fn config_from(args: &Args) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| ConfigError {
                line: None,
                msg: format!("cannot read {}: {e}", path.display()),
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.preset {
        let p: Preset = p.parse()?;
        if p == Preset::Custom {
            cfg.preset = p;
        } else {
            cfg.set_preset(p);
        }
    }
    if let Some(d) = &args.dist {
        cfg.dist = Some(d.parse().map_err(|e: do_nonlocal::Error| ConfigError { line: None, msg: e.to_string() })?);
    }
    if let Some(bc) = &args.bc {
        cfg.bc = Some(cli::parse_bc(bc)?);
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(n) = args.nalpha {
        cfg.n_alpha = n;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(s) = &args.solver {
        cfg.solver = s.parse()?;
    }
    cfg.stiffness_report |= args.stiffness_report;
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = config_from(&args).map_err(CliError::from).and_then(|cfg| cli::run(&cfg));
    match result {
        Ok(outcome) => {
            for r in &outcome.runs {
                let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                println!(
                    "{}: C1 {} C2 {} M {} discrepancy {}{}",
                    r.label,
                    fmt_opt(r.totals.pi_c1),
                    fmt_opt(r.totals.pi_c2),
                    fmt_opt(r.totals.pi_m),
                    r.discrepancy.map(|d| format!("{d:.3e}")).unwrap_or_else(|| "-".into()),
                    if failed.is_empty() { String::new() } else { format!(" (outside tolerance: {})", failed.join(", ")) }
                );
            }
            if let Some(l) = &outcome.lattice {
                for row in &l.rows {
                    println!("dx {:.5} layers {:3} rel error {:.4e}", row.dx, row.n_layers, row.rel_error);
                }
                println!("monotone: {}", l.monotone);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
