//! Simulation, fitting and scoring pipelines.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_rank, key_features, summarize, PosteriorSummary, RankEstimate};
use crate::linalg::{projection_distance, two_to_inf_loss, Mat};
use crate::sampler::{run_chain, AcceptanceStats, ChainSamples, McmcConfig};
use crate::synth::{generate_truth, motivating_pair, sample_data, SpikedCovModel};

use super::config::ExperimentConfig;
use super::io::{format_value, write_json, write_matrix_csv, write_vector_csv};
use super::losses::{loss_against_truth, median_report, naive_losses, LossReport};

/// Number of spikes to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankChoice {
    Fixed(usize),
    /// Diagonal thresholding on the data.
    Auto,
}

impl std::str::FromStr for RankChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RankChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(r) if r >= 1 => Ok(RankChoice::Fixed(r)),
            _ => Err(Error::Config(format!(
                "rank must be a positive integer or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub r: usize,
    pub rank: Option<RankEstimate>,
    pub samples: ChainSamples,
    pub summary: PosteriorSummary,
}

/// Fit report written next to the summary matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub rank_estimate: Option<RankEstimate>,
    pub n_draws: usize,
    pub n_padded: usize,
    pub sigma2_mean: f64,
    pub acceptance: AcceptanceStats,
    pub lambda0_sd: f64,
    pub seed: u64,
}

pub fn fit(
    y: &Mat,
    rank: RankChoice,
    cfg: &ExperimentConfig,
    mcmc: &McmcConfig,
) -> Result<FitOutput> {
    let p = y.ncols();
    let (r, est) = match rank {
        RankChoice::Fixed(r) => (r, None),
        RankChoice::Auto => {
            let e = estimate_rank(y, cfg.gamma)?;
            (e.rank.min(p), Some(e))
        }
    };
    let hyper = cfg.hyper.for_dims(p, r);
    let samples = run_chain(y, r, &hyper, mcmc)?;
    let summary = summarize(&samples)?;
    Ok(FitOutput {
        r,
        rank: est,
        samples,
        summary,
    })
}

impl FitOutput {
    pub fn report(&self, seed: u64) -> FitReport {
        FitReport {
            n: self.samples.n,
            p: self.samples.p,
            r: self.r,
            rank_estimate: self.rank,
            n_draws: self.summary.n_draws,
            n_padded: self.summary.n_padded,
            sigma2_mean: self.summary.sigma2_mean,
            acceptance: self.samples.acceptance.clone(),
            lambda0_sd: self.samples.lambda0_sd,
            seed,
        }
    }

    /// `sigma_hat.csv`, `u_hat.csv`, `omega_hat.csv`, `xi_freq.csv` and
    /// `summary.json` in `dir`.
    pub fn write(&self, dir: &Path, seed: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_matrix_csv(&dir.join("sigma_hat.csv"), &self.summary.sigma_hat, false)?;
        write_matrix_csv(&dir.join("omega_hat.csv"), &self.summary.omega_hat, false)?;
        write_matrix_csv(&dir.join("u_hat.csv"), self.summary.u_hat.mat(), false)?;
        write_vector_csv(&dir.join("xi_freq.csv"), "xi_freq", &self.summary.xi_freq)?;
        write_json(&dir.join("summary.json"), &self.report(seed))
    }
}

/// Seeds of one replicate. The data stream and the chain share the seed but
/// use different ChaCha streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateSeeds {
    pub index: usize,
    pub seed: u64,
}

const DATA_STREAM: u64 = 1;

pub fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM);
    rng
}

/// Truth and data for one seed.
pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<(SpikedCovModel, Mat)> {
    let mut rng = data_rng(seed);
    let model = generate_truth(
        cfg.p,
        cfg.r,
        cfg.s,
        cfg.lam_min,
        cfg.lam_max,
        cfg.sigma0_sq,
        &mut rng,
    )?;
    let y = sample_data(&model, cfg.n, &mut rng)?;
    Ok((model, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub seeds: ReplicateSeeds,
    pub r_fit: usize,
    pub mssl: LossReport,
    pub naive: LossReport,
}

pub fn run_replicate(
    cfg: &ExperimentConfig,
    index: usize,
    rank: RankChoice,
) -> Result<ReplicateResult> {
    let seed = cfg.base_seed.wrapping_add(index as u64);
    let (model, y) = simulate(cfg, seed)?;
    let mcmc = McmcConfig { seed, ..cfg.mcmc };
    let out = fit(&y, rank, cfg, &mcmc)?;
    let mssl = if out.r == model.r() {
        loss_against_truth(&out.summary.sigma_hat, &out.summary.u_hat, &model)?
    } else {
        // subspace losses are undefined across ranks; keep the covariance losses
        let sub = loss_against_truth(&out.summary.sigma_hat, &model.u0, &model)?;
        LossReport {
            proj_loss_sq: f64::NAN,
            two_inf_loss_sq: f64::NAN,
            ..sub
        }
    };
    Ok(ReplicateResult {
        seeds: ReplicateSeeds { index, seed },
        r_fit: out.r,
        mssl,
        naive: naive_losses(&y, &model)?,
    })
}

/// All replicates, in index order regardless of scheduling.
pub fn run_replicates(cfg: &ExperimentConfig, rank: RankChoice) -> Result<Vec<ReplicateResult>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.n_replicates)
            .into_par_iter()
            .map(|i| run_replicate(cfg, i, rank))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub method: String,
    pub losses: LossReport,
}

pub fn median_table(results: &[ReplicateResult]) -> Result<Vec<MedianRow>> {
    let mssl: Vec<LossReport> = results.iter().map(|r| r.mssl).collect();
    let naive: Vec<LossReport> = results.iter().map(|r| r.naive).collect();
    Ok(vec![
        MedianRow {
            method: "mssl".into(),
            losses: median_report(&mssl)?,
        },
        MedianRow {
            method: "sample_covariance".into(),
            losses: median_report(&naive)?,
        },
    ])
}

pub fn write_replicates_csv(path: &Path, results: &[ReplicateResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec![
        "index".to_string(),
        "seed".into(),
        "r_fit".into(),
        "method".into(),
    ];
    head.extend(LossReport::FIELDS.iter().map(|s| s.to_string()));
    w.write_record(&head)?;
    for res in results {
        for (method, rep) in [("mssl", &res.mssl), ("sample_covariance", &res.naive)] {
            let mut rec = vec![
                res.seeds.index.to_string(),
                res.seeds.seed.to_string(),
                res.r_fit.to_string(),
                method.into(),
            ];
            rec.extend(rep.values().iter().map(|&v| format_value(v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_loss_table_csv(path: &Path, rows: &[MedianRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["method".to_string()];
    head.extend(LossReport::FIELDS.iter().map(|s| s.to_string()));
    w.write_record(&head)?;
    for row in rows {
        let mut rec = vec![row.method.clone()];
        rec.extend(row.losses.values().iter().map(|&v| format_value(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `k` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo <= hi) || k == 0 {
        return Err(Error::Config(format!(
            "need 0 < lo <= hi and k >= 1, got [{lo}, {hi}], k = {k}"
        )));
    }
    if k == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..k)
        .map(|i| match i {
            0 => lo,
            i if i == k - 1 => hi,
            _ => (a + (b - a) * i as f64 / (k - 1) as f64).exp(),
        })
        .collect())
}

/// One point of the four motivating-example loss curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotivatingRow {
    pub eps: f64,
    pub neg_log_eps: f64,
    pub delta: f64,
    pub proj_u1: f64,
    pub proj_u2: f64,
    pub two_inf_u1: f64,
    pub two_inf_u2: f64,
}

pub fn motivating_curves(s: usize, p: usize, eps: &[f64]) -> Result<Vec<MotivatingRow>> {
    eps.iter()
        .map(|&e| {
            let mp = motivating_pair(s, p, e)?;
            Ok(MotivatingRow {
                eps: e,
                neg_log_eps: -e.ln(),
                delta: mp.delta,
                proj_u1: projection_distance(&mp.u1_hat, &mp.u0)?,
                proj_u2: projection_distance(&mp.u2_hat, &mp.u0)?,
                two_inf_u1: two_to_inf_loss(&mp.u1_hat, &mp.u0)?,
                two_inf_u2: two_to_inf_loss(&mp.u2_hat, &mp.u0)?,
            })
        })
        .collect()
}

pub fn write_motivating_csv(path: &Path, s: usize, rows: &[MotivatingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "s",
        "eps",
        "neg_log_eps",
        "delta",
        "proj_u1",
        "proj_u2",
        "two_inf_u1",
        "two_inf_u2",
    ])?;
    for r in rows {
        let mut rec = vec![s.to_string()];
        rec.extend(
            [
                r.eps,
                r.neg_log_eps,
                r.delta,
                r.proj_u1,
                r.proj_u2,
                r.two_inf_u1,
                r.two_inf_u2,
            ]
            .iter()
            .map(|&v| format_value(v)),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Key features for each threshold in `taus`.
pub fn key_feature_sets(
    summary: &PosteriorSummary,
    taus: &[f64],
) -> Result<Vec<(f64, Vec<usize>)>> {
    taus.iter()
        .map(|&t| Ok((t, key_features(&summary.u_hat, t)?)))
        .collect()
}
