use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stw::functionals::Normalization;
use stw_cli::commands::{self, CliError, CliResult, ConnesArgs, Output, Settings, TransformArgs, EXIT_ASSERT};
use stw_cli::report::Report;

#[derive(Parser)]
#[command(name = "stw", version, about = "Dyadic transforms, Dixmier envelopes and trace checks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Index window `a:b`; endpoints accept `2^k` and `4^k`.
    #[arg(long, global = true)]
    window: Option<String>,
    #[arg(long, global = true)]
    pmax: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with any of tol, window, pmax, seed.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    #[command(subcommand)]
    Weights(WeightsCmd),
    #[command(subcommand)]
    Seq(SeqCmd),
    /// Dixmier envelope of a mu spec.
    Dixmier {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        weight: String,
        /// Also report the classical Dixmier means.
        #[arg(long)]
        classic: bool,
        #[arg(long, default_value = "one")]
        prefactor: String,
    },
    /// Transported envelope next to the Dixmier envelope of `--to`.
    Transport {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        mu: String,
    },
    /// Measurability verdict.
    Measure {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        weight: String,
        #[arg(long, value_enum, default_value_t = Norm::Dyadic)]
        normalization: Norm,
    },
    #[command(subcommand)]
    Connes(ConnesCmd),
    #[command(subcommand)]
    Reproduce(ReproduceCmd),
}

#[derive(Subcommand)]
enum WeightsCmd {
    List,
    Check {
        #[arg(long)]
        name: String,
        #[arg(long)]
        horizon: Option<String>,
    },
}

#[derive(Subcommand)]
enum SeqCmd {
    /// tail, banach, almost, invariance or ordering (CSV).
    Analyze {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        op: String,
    },
    /// D, phi, cesaro, M, Cinv, N, split or transport; CSV unless --json.
    Transform {
        #[arg(long)]
        op: String,
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        mu: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        level: Option<f64>,
    },
}

#[derive(Subcommand)]
enum ConnesCmd {
    Check {
        #[arg(long, default_value = "model")]
        symbol: String,
        #[arg(long, default_value = "g_pow(1)")]
        weight: String,
        #[arg(long, default_value = "2^20")]
        xi_max: String,
        #[arg(long, default_value = "2^18")]
        k_max: String,
    },
}

#[derive(Subcommand)]
enum ReproduceCmd {
    Dixcor,
    Schrodinger {
        #[arg(long, default_value_t = 1.0)]
        c3: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Dyadic,
    Diagonal,
}

fn settings(g: &Global) -> CliResult<Settings> {
    let base = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            Settings::from_toml(&text)?
        }
        None => Settings::default(),
    };
    Ok(base.merged(Settings {
        tol: g.tol,
        window: g.window.clone(),
        pmax: g.pmax.clone(),
        seed: g.seed,
    }))
}

fn dispatch(cli: &Cli) -> CliResult<Output> {
    let s = settings(&cli.global)?;
    let rep = |r: CliResult<Report>| r.map(Output::Report);
    match &cli.cmd {
        Cmd::Weights(WeightsCmd::List) => Ok(Output::Report(commands::weights_list())),
        Cmd::Weights(WeightsCmd::Check { name, horizon }) => {
            rep(commands::weights_check(name, horizon.as_deref(), &s))
        }
        Cmd::Seq(SeqCmd::Analyze { spec, op }) => commands::seq_analyze(spec, op, &s),
        Cmd::Seq(SeqCmd::Transform { op, spec, mu, weight, to, level }) => {
            let a = TransformArgs {
                op: op.clone(),
                spec: spec.clone(),
                mu: mu.clone(),
                weight: weight.clone(),
                to: to.clone(),
                level: *level,
            };
            commands::seq_transform(&a, &s, cli.global.json)
        }
        Cmd::Dixmier { mu, weight, classic, prefactor } => {
            rep(commands::dixmier(mu, weight, classic.then_some(prefactor.as_str()), &s))
        }
        Cmd::Transport { from, to, mu } => rep(commands::transport(from, to, mu, &s)),
        Cmd::Measure { mu, weight, normalization } => {
            let n = match normalization {
                Norm::Dyadic => Normalization::Dyadic,
                Norm::Diagonal => Normalization::Diagonal,
            };
            rep(commands::measure(mu, weight, n, &s))
        }
        Cmd::Connes(ConnesCmd::Check { symbol, weight, xi_max, k_max }) => {
            let a = ConnesArgs {
                symbol: symbol.clone(),
                weight: weight.clone(),
                xi_max: xi_max.clone(),
                k_max: k_max.clone(),
            };
            rep(commands::connes_check(&a, &s))
        }
        Cmd::Reproduce(ReproduceCmd::Dixcor) => rep(commands::reproduce_dixcor(&s)),
        Cmd::Reproduce(ReproduceCmd::Schrodinger { c3 }) => rep(commands::reproduce_schrodinger(*c3, &s)),
    }
}

/// Write to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    let _ = std::io::stdout().lock().write_all(s.as_bytes());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(Output::Csv(s)) => {
            emit(&s);
            ExitCode::SUCCESS
        }
        Ok(Output::Report(r)) => {
            if cli.global.json {
                emit(&(r.to_json() + "\n"));
            } else {
                emit(&r.to_text());
            }
            if r.passed() {
                ExitCode::SUCCESS
            } else {
                for i in r.results.iter().filter(|i| i.check.as_ref().is_some_and(|c| !c.passed)) {
                    eprintln!("assertion failed: {}", i.name);
                }
                ExitCode::from(EXIT_ASSERT as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code as u8)
        }
    }
}
