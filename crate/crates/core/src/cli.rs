use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::grad::{batch_features, exact_features};
use crate::harness::{detection_study, mixture_curve, repeated_tests, ExperimentConfig};
use crate::io::{read_cloud, read_csv_rows, write_diagram_csv, write_emb};
use crate::mmdtest::{KernelMethod, KernelParams, SampleSet};
use crate::pcp::{dirichlet_mle, mst_length_study, sample_pcp, sample_pcp_interleaved, standard_simplex, PcpParams};
use crate::persistence::cloud_persistence;
use crate::tcloss::{median_heuristic_sigma, tc_loss, TcMethod, TcParams};

#[derive(Debug, Parser)]
#[command(name = "topsig", version, about = "Topological signatures for adversarial batch detection")]
pub struct Cli {
    /// L2-normalize every ingested row.
    #[arg(long, global = true)]
    pub l2_normalize: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vietoris-Rips persistence diagram as CSV.
    Persistence {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        max_dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Topological-contrastive loss between two clouds.
    TcLoss {
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
    /// Per-sample topological features (loss gradients) as EMB1.
    Features {
        #[arg(long)]
        batch: PathBuf,
        #[arg(long)]
        holdout: PathBuf,
        #[arg(long)]
        text: PathBuf,
        #[command(flatten)]
        loss: LossArgs,
        /// One filtration per sample instead of one per batch.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated permutation two-sample tests.
    MmdTest(MmdTestArgs),
    /// Poisson cluster process simulations.
    Pcp {
        #[command(subcommand)]
        command: PcpCommand,
    },
    /// Loss of clean/adversarial mixtures against a text cloud.
    MixtureCurve {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        adv: PathBuf,
        #[arg(long)]
        text: PathBuf,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum-likelihood Dirichlet fit of barycentric rows.
    DirichletFit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection power or Type-I study driven by a JSON config.
    DetectStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-trial row indices of every split.
        #[arg(long)]
        index_log: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, default_value = "tp")]
    pub method: TcMethod,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// MK scale, or `median` for the median heuristic.
    #[arg(long, default_value = "1")]
    pub sigma: String,
    #[arg(long, default_value_t = 1)]
    pub max_dim: usize,
}

#[derive(Debug, Args)]
pub struct MmdTestArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, requires = "test_feats")]
    pub clean_feats: Option<PathBuf>,
    #[arg(long, requires = "clean_feats")]
    pub test_feats: Option<PathBuf>,
    #[arg(long, default_value = "tpsammd")]
    pub kernel: KernelMethod,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Rows per side per trial; defaults to the smaller file.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PcpCommand {
    /// Monte Carlo MST lengths over an (alpha_small, ratio) grid.
    Sim {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        alpha_small: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        ratio: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One sampled cloud as EMB1.
    Sample {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long)]
        alpha_small: f64,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Order rows as 0, 1, ..., K, 0, 1, ... by cluster.
        #[arg(long)]
        interleave: bool,
        #[arg(long)]
        out: PathBuf,
        /// Barycentric coordinates as headerless CSV.
        #[arg(long)]
        lambdas_out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Error::InvalidInput(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = output(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

impl LossArgs {
    /// Parameters with a fixed sigma; `median` is resolved by the caller.
    fn params(&self, sigma: f64) -> Result<TcParams> {
        let p = TcParams {
            method: self.method,
            alpha: self.alpha,
            sigma,
            max_dim: self.max_dim,
        };
        p.validate()?;
        Ok(p)
    }

    fn fixed_sigma(&self) -> Result<Option<f64>> {
        if self.sigma.eq_ignore_ascii_case("median") {
            return Ok(None);
        }
        self.sigma
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Parse(format!("`{}` is neither a number nor `median`", self.sigma)))
    }

    /// Resolves `median` against a pair of clouds (dimension 0 diagrams).
    fn resolve(&self, x: &crate::PointCloud, y: &crate::PointCloud) -> Result<TcParams> {
        match self.fixed_sigma()? {
            Some(s) => self.params(s),
            None => {
                let dx = cloud_persistence(x, 0)?;
                let dy = cloud_persistence(y, 0)?;
                let s = median_heuristic_sigma(&dx, &dy, 0).ok_or_else(|| {
                    Error::Parameter("median heuristic is undefined for these diagrams".into())
                })?;
                self.params(s)
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let l2 = cli.l2_normalize;
    match cli.command {
        Command::Persistence { input, max_dim, out } => {
            let cloud = read_cloud(&input, l2)?;
            let diagram = cloud_persistence(&cloud, max_dim)?;
            let mut w = output(out.as_deref())?;
            write_diagram_csv(&mut w, &diagram)?;
            w.flush()?;
        }
        Command::TcLoss { loss, x, y } => {
            let x = read_cloud(&x, l2)?;
            let y = read_cloud(&y, l2)?;
            let params = loss.resolve(&x, &y)?;
            let value = tc_loss(
                &cloud_persistence(&x, params.max_dim)?,
                &cloud_persistence(&y, params.max_dim)?,
                &params,
            )?;
            println!("{value}");
        }
        Command::Features {
            batch,
            holdout,
            text,
            loss,
            exact,
            out,
        } => {
            let batch = read_cloud(&batch, l2)?;
            let holdout = read_cloud(&holdout, l2)?;
            let text = read_cloud(&text, l2)?;
            let params = loss.resolve(&batch.concat(&holdout)?, &text)?;
            let f = if exact {
                exact_features(&batch, &holdout, &text, &params)?
            } else {
                batch_features(&batch, &holdout, &text, &params)?
            };
            write_emb(&out, &f.grads)?;
        }
        Command::MmdTest(args) => mmd_test(args, l2)?,
        Command::Pcp { command } => pcp(command)?,
        Command::MixtureCurve {
            clean,
            adv,
            text,
            steps,
            loss,
            seeds,
            out,
        } => {
            let clean = read_cloud(&clean, l2)?;
            let adv = read_cloud(&adv, l2)?;
            let text = read_cloud(&text, l2)?;
            let params = loss.resolve(&clean, &text)?;
            let curve = mixture_curve(&clean, &adv, &text, steps, &params, &seeds)?;
            write_text(out.as_deref(), &curve.to_csv()?)?;
            if out.is_some() {
                let rho = curve.spearman.map_or("undefined".to_string(), |r| r.to_string());
                println!("trend {} ({}), spearman {rho}", curve.trend, curve.trend.symbol());
            }
        }
        Command::DirichletFit { input, out } => {
            let rows = read_csv_rows(&input)?;
            let fit = dirichlet_mle(&rows)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["component", "alpha"])?;
            for (i, a) in fit.alpha.iter().enumerate() {
                w.write_record([i.to_string(), a.to_string()])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write_text(out.as_deref(), &String::from_utf8_lossy(&bytes))?;
            if out.is_some() {
                let ll = fit.log_likelihood.last().copied().unwrap_or(f64::NAN);
                println!(
                    "iterations {}, alpha_total {}, mean log-likelihood {ll}",
                    fit.iterations,
                    fit.total()
                );
            }
        }
        Command::DetectStudy {
            config,
            out,
            index_log,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.l2_normalize |= l2;
            let report = detection_study(&cfg)?;
            write_text(out.as_deref(), &report.to_csv()?)?;
            if let Some(p) = index_log {
                write_text(Some(&p), &report.index_log_csv()?)?;
            }
            if out.is_some() {
                println!(
                    "{} {} rejection rate {} over {} trials (seed {})",
                    report.kernel,
                    report.mode,
                    report.rejection_rate,
                    report.trials.len(),
                    report.seed
                );
            }
        }
    }
    Ok(())
}

fn mmd_test(args: MmdTestArgs, l2: bool) -> Result<()> {
    let clean = read_cloud(&args.clean, l2)?;
    let test = read_cloud(&args.test, l2)?;
    let (clean_aux, test_aux) = match (&args.clean_feats, &args.test_feats) {
        (Some(a), Some(b)) => (Some(read_cloud(a, false)?), Some(read_cloud(b, false)?)),
        _ => (None, None),
    };
    let x = SampleSet::new(clean, clean_aux)?;
    let y = SampleSet::new(test, test_aux)?;
    let pooled_emb = x.emb().concat(y.emb())?;
    let pooled_aux = match (x.aux(), y.aux()) {
        (Some(a), Some(b)) => Some(a.concat(b)?),
        _ => None,
    };
    let mut params = KernelParams::initial(args.kernel, &pooled_emb, pooled_aux.as_ref());
    params.eps0 = args.eps0;
    let batch = args.batch.unwrap_or(x.len().min(y.len()));
    let results = repeated_tests(
        &x,
        &y,
        &params,
        batch,
        args.trials,
        args.permutations,
        args.alpha,
        args.seed,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "statistic", "threshold", "p_value", "reject"])?;
    for r in &results {
        w.write_record([
            r.trial.to_string(),
            r.outcome.statistic.to_string(),
            r.outcome.threshold.to_string(),
            r.outcome.p_value.to_string(),
            r.outcome.reject.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_text(args.out.as_deref(), &String::from_utf8_lossy(&bytes))?;
    if args.out.is_some() {
        let rate = results.iter().filter(|r| r.outcome.reject).count() as f64 / results.len().max(1) as f64;
        println!("rejection rate {rate} over {} trials (seed {})", results.len(), args.seed);
    }
    Ok(())
}

fn pcp(command: PcpCommand) -> Result<()> {
    match command {
        PcpCommand::Sim {
            k,
            n,
            alpha_small,
            ratio,
            reps,
            seed,
            out,
        } => {
            let grid: Vec<(f64, f64)> = ratio
                .iter()
                .flat_map(|&r| alpha_small.iter().map(move |&a| (a, r)))
                .collect();
            let cells = mst_length_study(&grid, n, k, reps, seed)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for c in &cells {
                w.serialize(c)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write_text(out.as_deref(), &String::from_utf8_lossy(&bytes))?;
        }
        PcpCommand::Sample {
            k,
            n,
            alpha_small,
            ratio,
            seed,
            interleave,
            out,
            lambdas_out,
        } => {
            let simplex = standard_simplex(k)?;
            let params = PcpParams::even(k, alpha_small, ratio, n, seed);
            let sample = if interleave {
                sample_pcp_interleaved(&params, &simplex)?
            } else {
                sample_pcp(&params, &simplex)?
            };
            write_emb(&out, &sample.cloud)?;
            if let Some(p) = lambdas_out {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                for l in &sample.barycentric {
                    w.write_record(l.iter().map(|v| v.to_string()))?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                write_text(Some(&p), &String::from_utf8_lossy(&bytes))?;
            }
        }
    }
    Ok(())
}
