use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mesoscope_cli::config::validate_with;
use mesoscope_cli::output::{run_to_dir, write_config_errors, EXIT_CONFIG};
use mesoscope_cli::sweep::{run_sweep, Sweep};
use mesoscope_cli::Scenario;

/// Simulate mesoscopic nonlinear optics scenarios.
#[derive(Debug, Parser)]
#[command(name = "mesoscope", version)]
struct Args {
    /// oracle | gif | condition | qnd-xppx | wigner | fom
    scenario: Scenario,

    /// TOML configuration; defaults are used for anything missing.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, env = "MESOSCOPE_OUT_DIR")]
    out: Option<PathBuf>,

    /// Seed for sampling scenarios; overrides the file.
    #[arg(long)]
    seed: Option<u64>,

    /// Sweep one parameter: `section.field=start:stop:count` or `=v1,v2,...`.
    #[arg(long)]
    sweep: Option<Sweep>,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let informational = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            return code(if informational { 0 } else { EXIT_CONFIG });
        }
    };
    let Some(out) = args.out else {
        eprintln!("error: no output directory (pass --out or set MESOSCOPE_OUT_DIR)");
        return code(EXIT_CONFIG);
    };
    let raw = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return code(EXIT_CONFIG);
            }
        },
        None => String::new(),
    };
    let cfg = match validate_with(&raw, Some(args.scenario), args.seed) {
        Ok(cfg) => cfg,
        Err(errors) => {
            eprintln!("{errors}");
            if let Err(e) = write_config_errors(&out, &errors.0) {
                eprintln!("error: cannot write diagnostics to {}: {e}", out.display());
            }
            return code(EXIT_CONFIG);
        }
    };
    let outcome = match &args.sweep {
        Some(sweep) => run_sweep(&raw, args.scenario, args.seed, sweep, &out),
        None => run_to_dir(&cfg, &out).map(|report| {
            let status = report.result["status"].as_str().unwrap_or("?");
            eprintln!("{}: {status} -> {}", cfg.scenario, out.join("result.json").display());
            report.exit_code
        }),
    };
    match outcome {
        Ok(c) => code(c),
        Err(e) => {
            eprintln!("error: writing to {}: {e}", out.display());
            code(EXIT_CONFIG)
        }
    }
}
