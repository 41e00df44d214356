//! `spikecov`: simulate spiked covariance data, fit the sparse Bayesian
//! model, and score estimates.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikecov::estimators::credible_intervals;
use spikecov::harness::experiment::{
    key_feature_sets, write_loss_table_csv, write_motivating_csv, write_replicates_csv,
};
use spikecov::harness::io::{
    read_matrix_csv, read_truth, write_chain, write_json, write_matrix_csv, write_truth,
    ChainEncoding, ChainHeader,
};
use spikecov::harness::{
    fit, log_grid, loss_against_truth, median_table, motivating_curves, run_replicates, simulate,
    ExperimentConfig, RankChoice,
};
use spikecov::{Error, OrthoFrame, Result};

#[derive(Parser, Debug)]
#[command(
    name = "spikecov",
    version,
    about = "Sparse spiked covariance estimation under a spike-and-slab LASSO prior"
)]
struct Cli {
    /// JSON experiment configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    p: Option<usize>,
    #[arg(long, global = true)]
    r: Option<usize>,
    #[arg(long, global = true)]
    s: Option<usize>,
    #[arg(long, global = true)]
    lam_min: Option<f64>,
    #[arg(long, global = true)]
    lam_max: Option<f64>,
    /// Noise variance of the simulated truth.
    #[arg(long, global = true)]
    sigma0_sq: Option<f64>,
    /// Slab rate.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    a_sigma: Option<f64>,
    #[arg(long, global = true)]
    b_sigma: Option<f64>,
    #[arg(long, global = true)]
    burnin: Option<usize>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    thin: Option<usize>,
    #[arg(long, global = true)]
    proposal_sd: Option<f64>,
    /// Keep the initial proposal scales fixed.
    #[arg(long, global = true)]
    no_adapt: bool,
    /// Use only random-walk row updates.
    #[arg(long, global = true)]
    no_component_moves: bool,
    /// Seed for simulation, the chain, and the first replicate.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Worker threads for replicates (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Rank-rule threshold multiplier.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, short = 'o', global = true)]
    output_dir: Option<PathBuf>,
    /// Data CSV files carry a header line.
    #[arg(long, global = true)]
    header: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a sparse truth and Gaussian data (truth.json, data.csv).
    Simulate,
    /// Run the sampler on a data CSV and write the posterior summary.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Number of spikes, or "auto" for the diagonal-thresholding rule.
        #[arg(long)]
        rank: Option<String>,
        /// Write the chain as CSV instead of binary.
        #[arg(long)]
        csv_chain: bool,
        /// Credible level for the aligned loading intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Score a covariance estimate and frame against a truth file.
    Losses {
        #[arg(long)]
        sigma_hat: PathBuf,
        #[arg(long)]
        u_hat: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Simulate, fit and score many replicates; write per-replicate and median losses.
    Replicate {
        #[arg(long)]
        rank: Option<String>,
    },
    /// Loss curves of the two equal-projection-loss perturbations.
    Motivating {
        #[arg(long, default_value_t = 1e-3)]
        eps_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        eps_max: f64,
        #[arg(long, default_value_t = 20)]
        n_eps: usize,
    },
    /// Fit, then list rows whose mean absolute loading exceeds each threshold.
    Keypixels {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        rank: Option<String>,
        #[arg(long, required = true, num_args = 1..)]
        tau: Vec<f64>,
    },
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    let o = &cli.overrides;
    macro_rules! set {
        ($src:expr => $($dst:tt)+) => {
            if let Some(v) = $src {
                cfg.$($dst)+ = v;
            }
        };
    }
    set!(o.n => n);
    set!(o.p => p);
    set!(o.r => r);
    set!(o.s => s);
    set!(o.lam_min => lam_min);
    set!(o.lam_max => lam_max);
    set!(o.sigma0_sq => sigma0_sq);
    set!(o.lambda => hyper.lambda);
    set!(o.kappa => hyper.kappa);
    set!(o.a_sigma => hyper.a_sigma);
    set!(o.b_sigma => hyper.b_sigma);
    set!(o.burnin => mcmc.n_burnin);
    set!(o.samples => mcmc.n_samples);
    set!(o.thin => mcmc.thin);
    set!(o.proposal_sd => mcmc.proposal_sd);
    set!(o.replicates => n_replicates);
    set!(o.jobs => jobs);
    set!(o.gamma => gamma);
    set!(o.output_dir.clone() => output_dir);
    if let Some(seed) = o.seed {
        cfg.base_seed = seed;
        cfg.mcmc.seed = seed;
    }
    if o.no_adapt {
        cfg.mcmc.adapt = false;
    }
    if o.no_component_moves {
        cfg.mcmc.component_moves = false;
    }
    Ok(cfg)
}

fn rank_choice(arg: &Option<String>, cfg: &ExperimentConfig) -> Result<RankChoice> {
    match arg {
        Some(s) => s.parse(),
        None => Ok(RankChoice::Fixed(cfg.r)),
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.join(name))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    let header = cli.overrides.header;
    match &cli.command {
        Command::Simulate => {
            cfg.validate()?;
            let (model, y) = simulate(&cfg, cfg.base_seed)?;
            let truth = out_path(&cfg, "truth.json")?;
            let data = out_path(&cfg, "data.csv")?;
            write_truth(&truth, &model)?;
            write_matrix_csv(&data, &y, header)?;
            println!(
                "wrote {} and {} ({}x{})",
                truth.display(),
                data.display(),
                y.nrows(),
                y.ncols()
            );
        }
        Command::Fit {
            data,
            rank,
            csv_chain,
            level,
        } => {
            let y = read_matrix_csv(data, header)?;
            let out = fit_and_write(&y, rank_choice(rank, &cfg)?, &cfg)?;
            let enc = if *csv_chain {
                ChainEncoding::Csv
            } else {
                ChainEncoding::Binary
            };
            let hyper = cfg.hyper.for_dims(y.ncols(), out.r);
            let chain = out_path(&cfg, if *csv_chain { "chain.csv" } else { "chain.bin" })?;
            let head = ChainHeader::new(y.nrows(), &hyper, &cfg.mcmc, out.samples.n_draws(), enc);
            write_chain(&chain, &head, &out.samples.draws)?;
            let ci = credible_intervals(&out.samples, *level)?;
            write_matrix_csv(&out_path(&cfg, "ci_lower.csv")?, &ci.lower, false)?;
            write_matrix_csv(&out_path(&cfg, "ci_upper.csv")?, &ci.upper, false)?;
            println!(
                "fitted r = {} with {} draws; summary in {}",
                out.r,
                out.samples.n_draws(),
                cfg.output_dir.display()
            );
        }
        Command::Losses {
            sigma_hat,
            u_hat,
            truth,
        } => {
            let model = read_truth(truth)?;
            let sigma = read_matrix_csv(sigma_hat, false)?;
            let u = OrthoFrame::with_tolerance(read_matrix_csv(u_hat, false)?, 1e-8)?;
            let rep = loss_against_truth(&sigma, &u, &model)?;
            let rows = [spikecov::harness::MedianRow {
                method: "estimate".into(),
                losses: rep,
            }];
            let path = out_path(&cfg, "losses.csv")?;
            write_loss_table_csv(&path, &rows)?;
            println!("{}", serde_json::to_string(&rep)?);
        }
        Command::Replicate { rank } => {
            let results = run_replicates(&cfg, rank_choice(rank, &cfg)?)?;
            write_replicates_csv(&out_path(&cfg, "replicates.csv")?, &results)?;
            let table = median_table(&results)?;
            write_loss_table_csv(&out_path(&cfg, "medians.csv")?, &table)?;
            write_json(&out_path(&cfg, "config.json")?, &cfg)?;
            for row in &table {
                println!("{}: {}", row.method, serde_json::to_string(&row.losses)?);
            }
        }
        Command::Motivating {
            eps_min,
            eps_max,
            n_eps,
        } => {
            let grid = log_grid(*eps_min, *eps_max, *n_eps)?;
            let rows = motivating_curves(cfg.s, cfg.p.max(cfg.s), &grid)?;
            let path = out_path(&cfg, "motivating.csv")?;
            write_motivating_csv(&path, cfg.s, &rows)?;
            println!(
                "wrote {} ({} points, s = {})",
                path.display(),
                rows.len(),
                cfg.s
            );
        }
        Command::Keypixels { data, rank, tau } => {
            let y = read_matrix_csv(data, header)?;
            let out = fit_and_write(&y, rank_choice(rank, &cfg)?, &cfg)?;
            let sets = key_feature_sets(&out.summary, tau)?;
            let path = out_path(&cfg, "key_features.csv")?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["tau", "count", "indices"])?;
            for (t, idx) in &sets {
                let list: Vec<String> = idx.iter().map(|j| j.to_string()).collect();
                w.write_record([t.to_string(), idx.len().to_string(), list.join(" ")])?;
            }
            w.flush()?;
            for (t, idx) in &sets {
                println!("tau {t}: {} features", idx.len());
            }
        }
    }
    Ok(())
}

fn fit_and_write(
    y: &spikecov::Mat,
    rank: RankChoice,
    cfg: &ExperimentConfig,
) -> Result<spikecov::harness::FitOutput> {
    let out = fit(y, rank, cfg, &cfg.mcmc)?;
    out.write(Path::new(&cfg.output_dir), cfg.mcmc.seed)?;
    Ok(out)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::parse_from([
            "spikecov",
            "--p",
            "40",
            "--seed",
            "9",
            "--no-adapt",
            "--kappa",
            "0.5",
            "simulate",
        ]);
        let cfg = build_config(&cli).unwrap();
        assert_eq!(cfg.p, 40);
        assert_eq!((cfg.base_seed, cfg.mcmc.seed), (9, 9));
        assert!(!cfg.mcmc.adapt);
        assert_eq!(cfg.hyper.kappa, 0.5);
        assert_eq!(cfg.n, 100);
    }
}
