use std::path::PathBuf;
use std::process::ExitCode;

use boing::objectives::ObjectiveKind;
use boing::runner::{self, AcqChoice, OptimizerKind, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boing", version, about = "Two-stage RF / local GP Bayesian optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimizer on a synthetic objective over several seeds.
    Run(RunArgs),
    /// Check the structured models against dense reference computations.
    Selftest {
        /// Random instances per check.
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Write full GP, local GP and LGPGA predictions on the heteroscedastic toy.
    ToyRegression {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<ObjectiveKind>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long)]
    acq: Option<AcqChoice>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zero wall-times so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, runner::RunError> {
        let mut c = match &self.config {
            Some(p) => runner::load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.objective {
            c.objective = v;
            if self.dim.is_none() && self.config.is_none() {
                c.dim = if v == ObjectiveKind::Branin { 2 } else { 10 };
            }
        }
        if let Some(v) = self.dim {
            c.dim = v;
        }
        if let Some(v) = self.optimizer {
            c.optimizer = v;
        }
        if let Some(v) = self.budget {
            c.budget = v;
        }
        if let Some(v) = self.seeds {
            c.seeds = v;
        }
        if let Some(v) = self.seed_base {
            c.seed_base = v;
        }
        if let Some(v) = self.acq {
            c.acq = v;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        c.no_timing |= self.no_timing;
        Ok(c)
    }
}

fn run(args: RunArgs) -> Result<(), Box<dyn std::error::Error>> {
    let config = args.into_config()?;
    let files = runner::run_experiment(&config)?;
    for s in &files.summaries {
        println!(
            "{}  incumbent {:.6e}  regret {:.3e}  {:.1} s",
            s.run_id,
            s.final_incumbent,
            s.final_regret,
            s.total_wall_ms / 1e3
        );
    }
    let mut regrets: Vec<f64> = files.summaries.iter().map(|s| s.final_regret).collect();
    regrets.sort_by(f64::total_cmp);
    println!("median regret {:.6e}", regrets[regrets.len() / 2]);
    println!("wrote {} and {}", files.csv.display(), files.summary.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    for spec in boing::objectives::standard_specs() {
        let err = spec.self_check();
        if err > 1e-6 {
            eprintln!("objective self-check failed for {}: listed optimum off by {err:e}", spec.kind);
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Selftest { instances } => boing::oracle::selftest(instances, &mut std::io::stdout()),
        Command::ToyRegression { out, seed } => boing::toy::write_toy_regression(&out, seed).map(|path| {
            println!("wrote {}", path.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
