use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use doamp_core::denoisers::{Basis, DenoiserSpec};
use doamp_core::harness::{
    self, compare_csv, gen_bernoulli_gaussian, ExperimentConfig, MatrixKind, NoiseLevel,
    SignalSource,
};
use doamp_core::recovery::{Algorithm, SigmaEstimator};
use doamp_core::Result;

#[derive(Parser)]
#[command(
    name = "doamp",
    version,
    about = "Denoising-based AMP and orthogonal AMP recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover one seeded instance and write its per-iteration trace.
    Recover {
        #[command(flatten)]
        common: CommonArgs,
        /// Reconstructed image (requires a PGM input).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the state-evolution recursion.
    Se {
        #[command(flatten)]
        common: CommonArgs,
        /// Monte-Carlo draws per MSE evaluation.
        #[arg(long, default_value_t = 8)]
        samples: usize,
    },
    /// Mean simulated NMSE over seeded trials next to the SE prediction.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Write a Bernoulli-Gaussian vector as raw little-endian f64.
    Gen {
        /// N,SPARSITY
        #[arg(long, value_parser = parse_synthetic)]
        synthetic: (usize, f64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_enum, default_value_t = MatrixArg::PartialDct)]
    matrix: MatrixArg,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, value_enum, default_value_t = AlgoArg::Doamp)]
    algo: AlgoArg,
    /// soft[:MULT] | let[:K1,K2,...] | plugin:CMD
    #[arg(long, default_value = "let")]
    denoiser: DenoiserSpec,
    /// Orthonormal basis for the soft and LET denoisers.
    #[arg(long, value_enum, default_value_t = BasisArg::Identity)]
    basis: BasisArg,
    #[arg(long, default_value_t = 30)]
    iters: usize,
    /// Known noise variance.
    #[arg(long, conflicts_with = "snr_db")]
    sigma2: Option<f64>,
    /// Noise level as measurement SNR in dB.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// PGM image or raw f64 vector.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    input: Option<PathBuf>,
    /// N,SPARSITY
    #[arg(long, value_parser = parse_synthetic)]
    synthetic: Option<(usize, f64)>,
    /// D-AMP noise estimator.
    #[arg(long, value_enum, default_value_t = EstimatorArg::Median)]
    sigma_estimator: EstimatorArg,
    /// Relative-change early stopping tolerance; 0 disables.
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixArg {
    Gaussian,
    PartialDct,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Damp,
    Doamp,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Identity,
    Dct,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Median,
    MeanSquare,
}

fn parse_synthetic(s: &str) -> std::result::Result<(usize, f64), String> {
    let (n, p) = s.split_once(',').ok_or("expected N,SPARSITY")?;
    let n: usize = n.trim().parse().map_err(|e| format!("bad N: {e}"))?;
    let p: f64 = p.trim().parse().map_err(|e| format!("bad sparsity: {e}"))?;
    if n == 0 || !(0.0..=1.0).contains(&p) {
        return Err(format!("need N > 0 and sparsity in [0, 1], got {n},{p}"));
    }
    Ok((n, p))
}

impl CommonArgs {
    fn config(&self) -> ExperimentConfig {
        let input = match (&self.input, self.synthetic) {
            (Some(path), _) => {
                let is_pgm = path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
                if is_pgm {
                    SignalSource::Pgm(path.clone())
                } else {
                    SignalSource::Raw(path.clone())
                }
            }
            (None, Some((n, sparsity))) => SignalSource::Synthetic { n, sparsity },
            (None, None) => unreachable!("clap enforces an input"),
        };
        let mut cfg = ExperimentConfig::new(input);
        cfg.matrix = match self.matrix {
            MatrixArg::Gaussian => MatrixKind::Gaussian,
            MatrixArg::PartialDct => MatrixKind::PartialDct,
        };
        cfg.rate = self.rate;
        cfg.algorithm = match self.algo {
            AlgoArg::Damp => Algorithm::Damp,
            AlgoArg::Doamp => Algorithm::Doamp,
        };
        cfg.denoiser = self.denoiser.clone().with_basis(match self.basis {
            BasisArg::Identity => Basis::Identity,
            BasisArg::Dct => Basis::Dct,
        });
        cfg.iters = self.iters;
        cfg.noise = match self.snr_db {
            Some(snr) => NoiseLevel::SnrDb(snr),
            None => NoiseLevel::Variance(self.sigma2.unwrap_or(0.0)),
        };
        cfg.seed = self.seed;
        cfg.sigma_estimator = match self.sigma_estimator {
            EstimatorArg::Median => SigmaEstimator::Median,
            EstimatorArg::MeanSquare => SigmaEstimator::MeanSquare,
        };
        if let Some(tol) = self.stop_tol {
            cfg.stop_rel_tol = tol;
        }
        cfg.trace_path = self.trace.clone();
        cfg
    }
}

/// Divergence flagged during a run.
const EXIT_DIVERGED: u8 = 3;

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Recover { common, output } => {
            let mut cfg = common.config();
            cfg.image_path = output;
            let out = harness::run_experiment(&cfg)?;
            let last = out.trace.per_iteration.len();
            match (out.final_nmse, out.final_psnr) {
                (Some(nmse), Some(psnr)) => eprintln!(
                    "iterations {last}, NMSE {:.2} dB, PSNR {psnr:.2} dB",
                    harness::to_db(nmse)
                ),
                (Some(nmse), None) => {
                    eprintln!("iterations {last}, NMSE {:.2} dB", harness::to_db(nmse))
                }
                _ => eprintln!("iterations {last}"),
            }
            if out.trace.diverged {
                eprintln!("divergence flagged");
                return Ok(EXIT_DIVERGED);
            }
            Ok(0)
        }
        Command::Se { common, samples } => {
            let cfg = common.config();
            let (se, _) = harness::run_se_experiment(&cfg, samples)?;
            if cfg.trace_path.is_none() {
                print!("{}", harness::se_csv(&se));
            }
            Ok(0)
        }
        Command::Compare {
            common,
            samples,
            trials,
        } => {
            let cfg = common.config();
            let out = harness::compare_se(&cfg, trials, samples)?;
            if cfg.trace_path.is_none() {
                print!("{}", compare_csv(&out.rows));
            }
            if out.any_diverged {
                eprintln!("divergence flagged in at least one trial");
                return Ok(EXIT_DIVERGED);
            }
            Ok(0)
        }
        Command::Gen {
            synthetic: (n, sparsity),
            seed,
            out,
        } => {
            let x = gen_bernoulli_gaussian(n, sparsity, seed)?;
            harness::write_raw_vector(out, &x)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
