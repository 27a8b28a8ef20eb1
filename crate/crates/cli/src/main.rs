//! `rdp`: rate-distortion-perception curves and checks from a JSON config.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or I/O
//! error, 3 solver non-convergence (per the config's policy or `--strict`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rdp_core::report::{
    run_dal, run_plot_data, run_rd_curve, run_rdp_curve, run_two_stage, run_verify,
    write_verify_json, NonConvergencePolicy, RunConfig, RunOutputs, Status,
};
use rdp_core::{Error, Source};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rdp",
    version,
    about = "Rate-distortion-perception laboratory for discrete sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classic rate-distortion curve (Blahut–Arimoto).
    RdCurve(Common),
    /// Rate-distortion curve under perfect perception.
    RdpCurve(Common),
    /// Operational frontiers of the two-stage encoder/decoder pairs.
    TwoStage(Common),
    /// Distortion-plus-divergence decoder sweep.
    DalSweep(Common),
    /// Run the verification battery and write verify.json.
    Verify(Common),
    /// Merge the two information curves into one plotting CSV.
    PlotData(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Treat any non-converged solver point as a failure.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let code = exit_code_for(&err);
            let kind = match err.downcast_ref::<Error>() {
                Some(Error::Solver(_)) => "solver",
                _ => "config",
            };
            let report = serde_json::json!({
                "error": kind,
                "message": format!("{err:#}"),
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Solver(_)) => EXIT_NONCONVERGED,
        _ => EXIT_CONFIG,
    }
}

fn load(common: &Common) -> Result<(RunConfig, Source, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = match &common.out {
        Some(dir) => dir.clone(),
        None => cfg.output_dir(),
    };
    std::fs::create_dir_all(&out)
        .map_err(Error::from)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let src = cfg.build_source()?;
    Ok((cfg, src, out))
}

fn report_outputs(outputs: &RunOutputs, cfg: &RunConfig, strict: bool) -> u8 {
    for f in &outputs.files {
        println!("wrote {}", f.display());
    }
    for p in &outputs.nonconverged {
        eprintln!("warning: not converged: {p}");
    }
    let fail = strict || cfg.nonconvergence == NonConvergencePolicy::Fail;
    if fail && !outputs.nonconverged.is_empty() {
        EXIT_NONCONVERGED
    } else {
        0
    }
}

type Step = fn(&RunConfig, &Source, &Path) -> rdp_core::Result<RunOutputs>;

fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::RdCurve(c) => step(c, run_rd_curve),
        Command::RdpCurve(c) => step(c, run_rdp_curve),
        Command::TwoStage(c) => step(c, run_two_stage),
        Command::DalSweep(c) => step(c, run_dal),
        Command::PlotData(c) => plot_data(c),
        Command::Verify(c) => verify(c),
    }
}

fn step(common: &Common, f: Step) -> Result<u8> {
    let (cfg, src, out) = load(common)?;
    let outputs = f(&cfg, &src, &out)?;
    Ok(report_outputs(&outputs, &cfg, common.strict))
}

fn plot_data(common: &Common) -> Result<u8> {
    let (cfg, src, out) = load(common)?;
    let (outputs, summary) = run_plot_data(&cfg, &src, &out)?;
    if let Some(g) = summary.gap {
        println!(
            "gap R(D,0) - R(D/2,inf): max {} bits, mean {} bits over [{}, {}]",
            g.max_gap_bits, g.mean_gap_bits, g.overlap.0, g.overlap.1
        );
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(report_outputs(&outputs, &cfg, common.strict))
}

fn verify(common: &Common) -> Result<u8> {
    let (cfg, src, out) = load(common)?;
    let report = run_verify(&cfg, &src);
    let path = write_verify_json(&report, &out)?;
    for c in &report.checks {
        let status = if c.status == Status::Pass {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "{status} {:22} {:18} measured {:e} threshold {:e}",
            c.anchor, c.source, c.measured, c.threshold
        );
    }
    println!("wrote {}", path.display());
    if !report.passed() {
        return Ok(EXIT_VERIFY_FAILED);
    }
    let outputs = RunOutputs {
        files: Vec::new(),
        nonconverged: report.nonconverged,
    };
    Ok(report_outputs(&outputs, &cfg, common.strict))
}
