use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use thetagk_cli::{run, write_artifact, CliError, Command, ExperimentConfig, Format, OUT_DIR_ENV};

/// Experiments on θ-expansions and their Gauss-Kuzmin error terms.
#[derive(Parser, Debug)]
#[command(name = "thetagk", version, about)]
struct Cli {
    command: Command,
    /// Values of m (θ = 1/√m), comma separated
    #[arg(long, value_delimiter = ',')]
    m: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    x: f64,
    #[arg(long, default_value_t = 0.5)]
    y: f64,
    /// Points per axis on uniform grids over [0, θ] (default 65; 4097 for
    /// kuzmin-1d, 1025 for pf-contract)
    #[arg(long)]
    grid: Option<usize>,
    /// Series cutoff; each command has its own default
    #[arg(long)]
    i_max: Option<u64>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Values of a in [0, θ], comma separated (default 0, θ/2, θ)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    a: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; defaults to $THETAGK_OUT_DIR/<command>.<ext>, else stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn into_config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.command);
        if !self.m.is_empty() {
            cfg.m = self.m;
        }
        cfg.n = self.n;
        cfg.x = self.x;
        cfg.y = self.y;
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        cfg.i_max = self.i_max;
        cfg.samples = self.samples;
        cfg.seed = self.seed;
        cfg.a = self.a;
        cfg.format = self.format;
        cfg.out = self.out;
        cfg
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let err = CliError::Config(e.kind().to_string());
            eprint!("{e}");
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let cfg = cli.into_config();
    let start = Instant::now();
    let env_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match run(&cfg).and_then(|art| write_artifact(&art, &cfg, env_dir)) {
        Ok(()) => {
            eprintln!(
                "{} finished in {:.3}s",
                cfg.command.name(),
                start.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
