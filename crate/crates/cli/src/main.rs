use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use growthfista::experiment::{
    builtin, experiment_dir, run_experiment, verify_trace_csv, ExperimentConfig, Verdict, BUILTINS,
};

#[derive(Parser)]
#[command(
    name = "growthfista",
    version,
    about = "Run FISTA/AVD rate experiments and verifier suites"
)]
struct Cli {
    /// Output root; each experiment writes to <out>/<name>. Defaults to $GROWTHFISTA_OUT or ./growthfista-out
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config's rng seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Treat flagged checks as failures
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run configs given as files (.json or flat key=value) or built-in names
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
    },
    /// List the built-in configs
    List,
    /// Re-run the verifiers on the iterates stored in a trace CSV
    Verify { trace: PathBuf },
    /// Print the version
    Version,
}

fn load(spec: &str) -> Result<ExperimentConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()));
    }
    builtin(spec).with_context(|| format!("`{spec}` is neither a file nor a built-in config"))
}

fn run(cli: &Cli, configs: &[String]) -> Result<bool> {
    let mut ok = true;
    for spec in configs {
        let mut cfg = load(spec)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let dir = experiment_dir(&cfg, cli.out.as_deref());
        let out = run_experiment(&cfg, &dir).with_context(|| format!("running {}", cfg.name))?;
        let report = &out.report;
        println!("{} ({}, seed {})", report.name, report.problem, report.seed);
        for c in &report.checks {
            let alpha = c.alpha.map(|a| format!(" alpha={a:.4}")).unwrap_or_default();
            println!(
                "  {:<7} run {}{alpha} {}: {}",
                c.verdict.as_str().to_uppercase(),
                c.run,
                c.label,
                c.detail
            );
        }
        let failed = report.failures(cli.strict).len();
        let flagged = report.checks.iter().filter(|c| c.verdict == Verdict::Flagged).count();
        println!(
            "  {} checks, {failed} failed, {flagged} flagged, {:.2} s -> {}",
            report.checks.len(),
            report.wall_time_s,
            dir.display()
        );
        ok &= failed == 0;
    }
    Ok(ok)
}

fn verify(trace: &Path) -> Result<bool> {
    let reports = verify_trace_csv(trace).with_context(|| format!("verifying {}", trace.display()))?;
    if reports.is_empty() {
        bail!("the originating config requests no verifiers");
    }
    let mut ok = true;
    for r in &reports {
        println!(
            "  {:<5} {}: {} indices in [{}, {}], worst {:.3e} (tolerance {:.0e})",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.checked,
            r.range.0,
            r.range.1,
            r.worst_violation,
            r.tolerance
        );
        ok &= r.pass;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run { configs } => run(&cli, configs),
        Command::List => {
            for (name, _) in BUILTINS {
                let desc = builtin(name).map(|c| c.description).unwrap_or_default();
                println!("{name:<30} {desc}");
            }
            Ok(true)
        }
        Command::Verify { trace } => verify(trace),
        Command::Version => {
            println!("growthfista {}", env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
