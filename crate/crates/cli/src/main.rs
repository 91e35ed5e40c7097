use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crdtsim::checker::{
    fuzz_with_trace, replay_file, replay_logs, run_campaign, run_oracle_spec, CheckerError, Report, ReportFormat,
    Scenario, DEFAULT_BOUND,
};
use crdtsim::network::FaultRates;
use crdtsim::DatatypeKind;
use crdtsim_net::{run_interactive, PeerConfig};

const USAGE_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "crdtsim", version, about = "Fuzz, replay and exhaustively check operation-based CRDTs")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, default_value = "text", value_parser = parse_format)]
    report: ReportFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded simulations with fault injection.
    Fuzz(FuzzArgs),
    /// Re-execute a trace file, or the per-node logs of a TCP run.
    Replay(ReplayArgs),
    /// Check every hb-consistent order of a message set.
    Oracle(OracleArgs),
    /// Run one TCP node, reading control commands from stdin.
    Serve(ServeArgs),
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long)]
    datatype: DatatypeKind,
    #[arg(long, default_value_t = 3)]
    nodes: usize,
    #[arg(long, default_value_t = 20)]
    ops: usize,
    #[arg(long, env = "CRDTSIM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    crash_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    partition_rate: f64,
    /// Run this many consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Write the trace of the run (single runs only).
    #[arg(long)]
    emit_trace: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["trace", "logs"]))]
struct ReplayArgs {
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Per-node event logs written by `serve --log`, in node order.
    #[arg(long, num_args = 1..)]
    logs: Vec<PathBuf>,
    /// Datatype of the logs; inferred when omitted.
    #[arg(long)]
    datatype: Option<DatatypeKind>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    datatype: Option<DatatypeKind>,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BOUND)]
    bound: usize,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("crdtsim: {e}");
    ExitCode::from(USAGE_ERROR)
}

fn emit(report: &Report, format: ReportFormat) -> ExitCode {
    print!("{}", report.render(format));
    ExitCode::from(report.verdict.exit_code() as u8)
}

fn fuzz(args: FuzzArgs, format: ReportFormat) -> ExitCode {
    let rates = FaultRates { drop: args.drop_rate, crash: args.crash_rate, partition: args.partition_rate };
    let scenario = |seed| Scenario::new(args.datatype, args.nodes, args.ops, seed).with_faults(rates);
    if args.runs <= 1 {
        let out = match fuzz_with_trace(&scenario(args.seed)) {
            Ok(out) => out,
            Err(e) => return fail(e),
        };
        if let Some(path) = &args.emit_trace {
            if let Err(e) = std::fs::write(path, &out.trace) {
                return fail(format!("{}: {e}", path.display()));
            }
        }
        return emit(&out.report, format);
    }
    if args.emit_trace.is_some() {
        return fail("--emit-trace needs a single run");
    }
    let runs = run_campaign((args.seed..args.seed + args.runs).map(scenario).collect());
    let mut reports = Vec::new();
    for (s, r) in runs {
        match r {
            Ok(r) => reports.push(r),
            Err(e) => return fail(format!("seed {}: {e}", s.seed)),
        }
    }
    let worst = reports.iter().map(|r| r.verdict.exit_code()).max().unwrap_or(0);
    match format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize")),
        ReportFormat::Text => {
            for r in &reports {
                println!("seed {}: {}", r.seed.unwrap_or_default(), r.verdict.name());
            }
            let bad = reports.iter().filter(|r| r.verdict.exit_code() != 0).count();
            println!("{} runs, {bad} not converged", reports.len());
        }
    }
    ExitCode::from(worst as u8)
}

fn replay(args: ReplayArgs, format: ReportFormat) -> ExitCode {
    let result = match &args.trace {
        Some(path) => replay_file(path),
        None => args
            .logs
            .iter()
            .map(|p| std::fs::read_to_string(p).map_err(|e| CheckerError::Config(format!("{}: {e}", p.display()))))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|texts| replay_logs(&texts, args.datatype)),
    };
    match result {
        Ok(report) => emit(&report, format),
        Err(e) => fail(e),
    }
}

fn oracle(args: OracleArgs, format: ReportFormat) -> ExitCode {
    let text = match std::fs::read_to_string(&args.spec) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", args.spec.display())),
    };
    match run_oracle_spec(&text, args.datatype, args.bound) {
        Ok(report) => emit(&report, format),
        Err(e) => fail(e),
    }
}

fn serve(args: ServeArgs) -> ExitCode {
    let config = match PeerConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let stdin = io::BufReader::new(io::stdin());
    let mut stdout = io::stdout();
    match run_interactive(&config, args.log, stdin, &mut stdout) {
        Ok(()) => {
            let _ = stdout.flush();
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Fuzz(a) => fuzz(a, cli.report),
        Command::Replay(a) => replay(a, cli.report),
        Command::Oracle(a) => oracle(a, cli.report),
        Command::Serve(a) => serve(a),
    }
}
