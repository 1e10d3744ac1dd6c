//! `make-kex`: parameter generation, exchanges, attacks, statistics,
//! benchmarks and a TCP demo for the matrix action key exchange.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use make_kex::attacks::AttackMethod;
use make_kex::paramgen::DEFAULT_DIM;
use make_kex::stats::DEFAULT_TRIALS;
use make_kex::Error;

#[derive(Parser, Debug)]
#[command(name = "make-kex", version, about = "Matrix action key exchange over Z_p")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where public parameters come from.
#[derive(Args, Debug, Clone)]
pub struct ParamsArgs {
    /// Parameters file written by `gen` (binary or hex text).
    #[arg(long, conflicts_with_all = ["bits", "builtin_prime"])]
    params: Option<PathBuf>,
    /// Bit length of a freshly generated safe prime.
    #[arg(long)]
    bits: Option<u64>,
    /// Use the built-in 2000-bit safe prime.
    #[arg(long, conflicts_with = "bits")]
    builtin_prime: bool,
    /// Matrix dimension.
    #[arg(long, default_value_t = DEFAULT_DIM, value_parser = parse_dim)]
    dim: usize,
}

fn parse_dim(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if (2..=64).contains(&n) => Ok(n),
        _ => Err(format!("dimension must be an integer in 2..=64, got {s:?}")),
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    Brute,
    Det,
    Dlreduce,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate public parameters and write them to a file.
    Gen {
        #[command(flatten)]
        params: ParamsArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write the hex text fixture instead of the binary form.
        #[arg(long)]
        hex: bool,
    },
    /// Run both parties in-process and compare keys.
    Exchange {
        #[command(flatten)]
        params: ParamsArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover a private exponent from a public instance.
    Attack {
        #[arg(value_enum)]
        method: Method,
        #[command(flatten)]
        params: ParamsArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Largest exponent tried by brute force (default 2^20, or p for dlreduce).
        #[arg(long)]
        bound: Option<u64>,
        /// Generate invertible H1, H2 so the determinant attack applies.
        #[arg(long)]
        allow_invertible_h: bool,
        /// Victim's private exponent instead of a random one.
        #[arg(long)]
        secret: Option<u64>,
        /// dlreduce: base of the discrete logarithm (default: smallest generator).
        #[arg(long)]
        generator: Option<u64>,
        /// dlreduce: exponent k of the target g^k (default: random).
        #[arg(long)]
        target_exponent: Option<u64>,
    },
    /// Histogram and chi-square checks on many shared keys.
    Stats {
        #[command(flatten)]
        params: ParamsArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        /// Fresh matrices over the same prime for every trial.
        #[arg(long)]
        fresh_matrices: bool,
        /// Directory for histogram CSV files.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Median timings of the matrix exchange against classic Diffie-Hellman.
    Bench {
        /// Comma-separated prime sizes; 2000 uses the built-in prime.
        #[arg(long, value_delimiter = ',', default_values_t = [256, 2000])]
        bits: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_DIM, value_parser = parse_dim)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Offer parameters and run one session as the responder.
    Serve {
        #[arg(long)]
        listen: String,
        #[command(flatten)]
        params: ParamsArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Connect to a server and run one session as the initiator.
    Connect {
        #[arg(long)]
        remote: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotFound => 3,
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { params, seed, out, hex } => commands::gen(params, *seed, out, *hex),
        Command::Exchange { params, seed } => commands::exchange(params, *seed),
        Command::Attack { method, params, seed, bound, allow_invertible_h, secret, generator, target_exponent } => {
            commands::attack(&commands::AttackArgs {
                method: match method {
                    Method::Brute => AttackMethod::BruteForce,
                    Method::Det => AttackMethod::Determinant,
                    Method::Dlreduce => AttackMethod::DlReduction,
                },
                params,
                seed: *seed,
                bound: *bound,
                allow_invertible_h: *allow_invertible_h,
                secret: *secret,
                generator: *generator,
                target_exponent: *target_exponent,
            })
        }
        Command::Stats { params, seed, trials, fresh_matrices, csv } => {
            commands::stats(params, *seed, *trials, *fresh_matrices, csv.as_deref())
        }
        Command::Bench { bits, dim, trials, seed } => commands::bench(bits, *dim, *trials, *seed),
        Command::Serve { listen, params, seed } => commands::serve(listen, params, *seed),
        Command::Connect { remote, seed } => commands::connect_cmd(remote, *seed),
    };
    match result {
        Ok(report) => {
            if let Err(e) = report.emit() {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(report.exit_code)
        }
        Err(e) => {
            println!("error={e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn bits_and_builtin_conflict() {
        assert!(Cli::try_parse_from(["make-kex", "exchange", "--bits", "16", "--builtin-prime"]).is_err());
        assert!(Cli::try_parse_from(["make-kex", "exchange", "--dim", "1"]).is_err());
        assert!(Cli::try_parse_from(["make-kex", "bench", "--bits", "64,128"]).is_ok());
    }
}
