mod commands;
mod manifest;

use std::process::ExitCode;

use boltzmap::ErrorClass;
use clap::{Parser, Subcommand};

use commands::{
    CumulantsArgs, EmbedArgs, EvalArgs, MapArgs, SampleArgs, StatsArgs, TrainArgs, ValidateArgs,
};

/// Restricted Boltzmann machines and their exact interaction-model expansions.
///
/// Exit status: 0 success, 1 usage error, 2 data error, 3 numerical error.
#[derive(Debug, Parser)]
#[command(name = "boltzmap", version)]
struct Cli {
    /// Master seed; every random stream is derived from it [default: 0, or `seed` from a
    /// training config file]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on this value.
    #[arg(long, global = true, env = "BOLTZMAP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an RBM with contrastive divergence
    Train(TrainArgs),
    /// Compute interaction coefficients of an RBM
    Map(MapArgs),
    /// Build a linear-activation RBM from a pairwise coupling matrix
    Embed(EmbedArgs),
    /// Draw visible samples with blocked Gibbs sampling
    Sample(SampleArgs),
    /// Compare Gibbs sample frequencies with exact probabilities
    Validate(ValidateArgs),
    /// Pseudo-likelihood, AIS and exact partition functions
    Eval(EvalArgs),
    /// Coefficient comparison statistics and strength by order
    Stats(StatsArgs),
    /// Cumulants and cumulant generating function of a hidden unit
    Cumulants(CumulantsArgs),
}

/// Configuration mistakes detected by the front-end.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<boltzmap::Error>() {
            return match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            };
        }
        if cause.is::<UsageError>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let seed = cli.seed;
    let result = match cli.command {
        Command::Train(args) => commands::train(args, seed),
        Command::Map(args) => commands::map(args, seed),
        Command::Embed(args) => commands::embed(args, seed),
        Command::Sample(args) => commands::sample(args, seed),
        Command::Validate(args) => commands::validate(args, seed),
        Command::Eval(args) => commands::eval(args, seed),
        Command::Stats(args) => commands::stats(args, seed),
        Command::Cumulants(args) => commands::cumulants(args, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
