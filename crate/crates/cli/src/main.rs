use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use cyclelab_cli::golden::{list_golden, run_golden};
use cyclelab_cli::{exit, exit_code_for, run::run_file};

#[derive(Parser)]
#[command(name = "cyclelab", version, about = "Asymptotic cycles, solenoid classes and stable norms on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Route estimates and the two-sided Schwartzman class of a curve.
    Asymptotic(RunArgs),
    /// Sampled full, one-sided and balanced clusters.
    Cluster(RunArgs),
    /// Solenoid leaf classes against the Ruelle–Sullivan class.
    Solenoid(RunArgs),
    /// Trapping k-solenoids and controlled exhaustions.
    Ksolenoid(RunArgs),
    /// Stable norms from minimal loop lengths.
    Stablenorm(RunArgs),
    /// The curve whose balanced cluster misses 0.
    Counterexample(RunArgs),
    /// List or run the bundled acceptance configs.
    Golden(GoldenArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GoldenArgs {
    /// Run every entry into this directory; without it the manifest is printed.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn threads(n: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn run_subcommand(name: &str, args: &RunArgs) -> u8 {
    let result = threads(args.threads).and_then(|_| run_file(name, &args.config, &args.out));
    match result {
        Ok(report) => {
            for a in &report.assertions {
                println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            println!("report written to {}", args.out.join(cyclelab_cli::report::REPORT_FILE).display());
            if report.passed {
                exit::PASS
            } else {
                exit::ASSERTION
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

fn golden(args: &GoldenArgs) -> u8 {
    let entries = list_golden();
    let Some(out) = &args.out else {
        for e in &entries {
            println!("{:<24} exit {}  {}  ({})", e.name, e.expected_exit, e.description, e.config);
        }
        return exit::PASS;
    };
    if let Err(e) = threads(args.threads) {
        eprintln!("error: {e:#}");
        return exit::CONFIG;
    }
    let mut failures = 0;
    for e in &entries {
        let r = run_golden(e, out);
        let mark = if r.as_expected() { "ok  " } else { "FAIL" };
        println!("{mark} {:<24} exit {} (expected {})", e.name, r.exit, e.expected_exit);
        if let (false, Some(err)) = (r.as_expected(), &r.error) {
            println!("     {err}");
        }
        failures += usize::from(!r.as_expected());
    }
    println!("{} of {} entries as expected", entries.len() - failures, entries.len());
    if failures == 0 {
        exit::PASS
    } else {
        exit::ASSERTION
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Asymptotic(a) => run_subcommand("asymptotic", a),
        Command::Cluster(a) => run_subcommand("cluster", a),
        Command::Solenoid(a) => run_subcommand("solenoid", a),
        Command::Ksolenoid(a) => run_subcommand("ksolenoid", a),
        Command::Stablenorm(a) => run_subcommand("stablenorm", a),
        Command::Counterexample(a) => run_subcommand("counterexample", a),
        Command::Golden(a) => golden(a),
    };
    ExitCode::from(code)
}
