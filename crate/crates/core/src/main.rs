use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use thinlayer::harness::{emit_report, run_stages, Command, RunConfig};
use thinlayer::{Error, Result};

#[derive(Parser)]
#[command(name = "thinlayer", version, about = "Homogenized interface conditions for thin perforated elastic layers")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Build the reference cell mesh
    Cell(Common),
    /// Effective tensors A*, a*, b*, c* and ρ̄
    Tensors(Common),
    /// Memory kernels G and F
    Kernels(Common),
    /// Homogenized macro run
    Macro(Common),
    /// ε-resolved runs without comparison
    Micro(Common),
    /// Macro run plus the micro ladder with error tables
    Converge(Common),
    /// Every stage with a section in the config
    Report(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: outputs.dir or the current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the cell mesh as text
    #[arg(long)]
    mesh_out: Option<PathBuf>,
    /// Write the assembled cell stiffness in COO form
    #[arg(long)]
    dump_system: Option<PathBuf>,
    /// Worker threads (default: THINLAYER_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cmd: Command, args: Common) -> Result<()> {
    let threads = args.threads.or_else(|| std::env::var("THINLAYER_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::from_path(&args.config)?;
    if args.mesh_out.is_some() {
        cfg.outputs.mesh = args.mesh_out.clone();
    }
    if args.dump_system.is_some() {
        cfg.outputs.system = args.dump_system.clone();
    }
    let report = run_stages(&cfg, &cmd.stages(&cfg))?;
    if let (Some(p), Some(text)) = (&cfg.outputs.mesh, &report.mesh_text) {
        std::fs::write(p, text)?;
    }
    if let (Some(p), Some(text)) = (&cfg.outputs.system, &report.system_text) {
        std::fs::write(p, text)?;
    }
    let dir = args.out.or(cfg.outputs.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    for p in emit_report(&report, cfg.outputs.format, &dir)? {
        println!("{}", p.display());
    }
    for c in report.invariants.iter().filter(|c| !c.pass) {
        log::warn!("invariant {} failed: {:e} > {:e}", c.name, c.value, c.tolerance);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Cell(a) => (Command::Cell, a),
        Sub::Tensors(a) => (Command::Tensors, a),
        Sub::Kernels(a) => (Command::Kernels, a),
        Sub::Macro(a) => (Command::Macro, a),
        Sub::Micro(a) => (Command::Micro, a),
        Sub::Converge(a) => (Command::Converge, a),
        Sub::Report(a) => (Command::Report, a),
    };
    match run(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
