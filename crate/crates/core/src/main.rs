use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cdspec::harness::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "cdspec", version, about = "Convolution-dominated matrices, Gabor frames and Weyl symbol inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower-bound transfer between ℓ^p and ℓ^q.
    Stability(Common),
    /// Neumann envelope of the inverse of a CD matrix.
    InvertMatrix(Common),
    /// Gabor frame, dual and tight windows, reconstruction.
    Gabor(Common),
    /// Almost diagonalization of a Weyl operator by a tight Gabor frame.
    Almostdiag(Common),
    /// Inverse symbol of an invertible Weyl operator.
    InvertWeyl(Common),
    /// Weyl symbol of a Gabor frame operator.
    Framesymbol(Common),
    /// Run the full acceptance suite.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 means one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, c) = match cli.command {
        Command::Stability(c) => (ExperimentKind::Stability, c),
        Command::InvertMatrix(c) => (ExperimentKind::InvertMatrix, c),
        Command::Gabor(c) => (ExperimentKind::Gabor, c),
        Command::Almostdiag(c) => (ExperimentKind::Almostdiag, c),
        Command::InvertWeyl(c) => (ExperimentKind::InvertWeyl, c),
        Command::Framesymbol(c) => (ExperimentKind::Framesymbol, c),
        Command::Verify(c) => (ExperimentKind::Verify, c),
    };
    let mut cfg = match &c.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("cdspec: config {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let out = c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(c.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cdspec: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let threads = pool.current_num_threads();
    match pool.install(|| harness::run(kind, &cfg, &out, threads)) {
        Ok(s) => {
            match &s.failure {
                Some(f) => eprintln!("cdspec {}: {f} (partial artifacts in {})", kind.name(), s.out_dir.display()),
                None if s.exit_code != 0 => eprintln!("cdspec {}: failed, see {}", kind.name(), s.out_dir.display()),
                None => println!("cdspec {}: ok, artifacts in {}", kind.name(), s.out_dir.display()),
            }
            ExitCode::from(s.exit_code as u8)
        }
        Err(e) => {
            eprintln!("cdspec {}: {e}", kind.name());
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
