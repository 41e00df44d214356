//! Metropolis-within-Gibbs sampler for `(B, ξ, Z, θ, λ₀, σ²)` under the
//! latent factor model `y_i = B z_i + ε_i`.
//!
//! One sweep updates, in order: `Z` (Gaussian), rows of `B` (random walk,
//! plus optional prior-driven refresh/flip moves), `ξ` (Bernoulli), `θ`
//! (Beta), `λ₀` (random walk on the log scale), `σ²` (inverse Gamma).

mod updates;

pub use updates::{
    b_row_log_accept, lambda0_log_accept, lambda0_log_target, row_jump_log_accept, row_log_lik,
    sample_inv_gamma, sigma2_conditional, theta_conditional, update_b_rows, update_lambda0,
    update_rows_jump, update_sigma2, update_theta, update_xi, update_z, xi_inclusion_prob,
    z_conditional, JumpCounts, Sufficient,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::estimators::loading_frame;
use crate::linalg::{dims, ensure_finite, sample_covariance, sym_eig_topk, Mat};
use crate::prior::{lambda0_log_prior, row_logprior, sample_lambda0, MsslHyper};

/// Full sampler state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub b: Mat,
    pub xi: Vec<bool>,
    /// Latent factors as rows, `n×r`.
    pub z: Mat,
    pub theta: f64,
    pub lambda0: f64,
    pub sigma2: f64,
}

impl ChainState {
    pub fn validate(&self, n: usize, p: usize, r: usize) -> Result<()> {
        if self.b.shape() != (p, r) {
            return Err(Error::shape(format!("{p}x{r}"), dims(&self.b)));
        }
        if self.z.shape() != (n, r) {
            return Err(Error::shape(format!("{n}x{r}"), dims(&self.z)));
        }
        if self.xi.len() != p {
            return Err(Error::shape(
                format!("{p} indicators"),
                self.xi.len().to_string(),
            ));
        }
        if !(self.sigma2 > 0.0) || !(self.lambda0 > 0.0) || !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "state out of range: sigma2 = {}, lambda0 = {}, theta = {}",
                self.sigma2, self.lambda0, self.theta
            )));
        }
        Ok(())
    }
}

fn default_burnin() -> usize {
    1000
}
fn default_samples() -> usize {
    1000
}
fn default_thin() -> usize {
    1
}
fn default_sd() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    #[serde(default = "default_burnin")]
    pub n_burnin: usize,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    /// Initial per-row random-walk scale.
    #[serde(default = "default_sd")]
    pub proposal_sd: f64,
    /// Robbins–Monro tuning of proposal scales during burn-in.
    #[serde(default = "default_true")]
    pub adapt: bool,
    #[serde(default)]
    pub seed: u64,
    /// Add the prior-driven refresh and indicator-flip row moves.
    #[serde(default = "default_true")]
    pub component_moves: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_burnin: default_burnin(),
            n_samples: default_samples(),
            thin: default_thin(),
            proposal_sd: default_sd(),
            adapt: true,
            seed: 0,
            component_moves: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burnin == 0 || self.n_samples == 0 || self.thin == 0 {
            return Err(Error::Config(format!(
                "burn-in, sample and thin counts must be >= 1 (got {}, {}, {})",
                self.n_burnin, self.n_samples, self.thin
            )));
        }
        if !(self.proposal_sd > 0.0 && self.proposal_sd.is_finite()) {
            return Err(Error::Config(format!(
                "proposal_sd must be positive, got {}",
                self.proposal_sd
            )));
        }
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        self.n_samples / self.thin
    }
}

/// Accepted / proposed counts of one Metropolis block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub accepted: u64,
    pub proposed: u64,
}

impl Rate {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }

    fn add(&mut self, accepted: usize, proposed: usize) {
        self.accepted += accepted as u64;
        self.proposed += proposed as u64;
    }
}

/// Post-burn-in acceptance counts per block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub b_rows: Rate,
    pub row_refresh: Rate,
    pub row_flip: Rate,
    pub lambda0: Rate,
}

/// One kept draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub b: Mat,
    pub sigma2: f64,
    pub xi: Vec<bool>,
}

/// Output of [`run_chain`]: the kept draws plus running sums for the
/// posterior means of `BBᵀ + σ²I` and `U_B U_Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSamples {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub draws: Vec<Draw>,
    pub sigma_sum: Mat,
    pub omega_sum: Mat,
    pub xi_counts: Vec<usize>,
    /// Draws whose `B` was numerically rank deficient.
    pub n_padded: usize,
    pub theta_trace: Vec<f64>,
    pub lambda0_trace: Vec<f64>,
    pub log_post: Vec<f64>,
    pub acceptance: AcceptanceStats,
    /// Per-row random-walk scales in force after burn-in.
    pub row_sd: Vec<f64>,
    pub lambda0_sd: f64,
}

impl ChainSamples {
    pub fn new(n: usize, p: usize, r: usize) -> Self {
        ChainSamples {
            n,
            p,
            r,
            draws: Vec::new(),
            sigma_sum: Mat::zeros(p, p),
            omega_sum: Mat::zeros(p, p),
            xi_counts: vec![0; p],
            n_padded: 0,
            theta_trace: Vec::new(),
            lambda0_trace: Vec::new(),
            log_post: Vec::new(),
            acceptance: AcceptanceStats::default(),
            row_sd: Vec::new(),
            lambda0_sd: f64::NAN,
        }
    }

    /// Rebuild the running sums from a list of draws.
    pub fn from_draws(n: usize, draws: Vec<Draw>) -> Result<Self> {
        let first = draws.first().ok_or_else(|| Error::invalid("no draws"))?;
        let (p, r) = first.b.shape();
        let mut out = ChainSamples::new(n, p, r);
        for d in draws {
            out.push_draw(d)?;
        }
        Ok(out)
    }

    pub fn push_draw(&mut self, draw: Draw) -> Result<()> {
        if draw.b.shape() != (self.p, self.r) || draw.xi.len() != self.p {
            return Err(Error::shape(
                format!("{}x{}", self.p, self.r),
                dims(&draw.b),
            ));
        }
        let (frame, padded) = loading_frame(&draw.b)?;
        self.omega_sum += frame.projector();
        self.sigma_sum += &draw.b * draw.b.transpose();
        for i in 0..self.p {
            self.sigma_sum[(i, i)] += draw.sigma2;
        }
        for (c, &x) in self.xi_counts.iter_mut().zip(&draw.xi) {
            *c += x as usize;
        }
        self.n_padded += padded as usize;
        self.draws.push(draw);
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }
}

/// Log joint density of `(Y, Z, B, ξ, θ, λ₀, σ²)` up to an additive constant.
pub fn log_posterior(state: &ChainState, y: &Mat, hyper: &MsslHyper) -> f64 {
    let (n, p) = (y.nrows(), y.ncols());
    let r = state.b.ncols();
    let resid = y - &state.z * state.b.transpose();
    let mut lp =
        -0.5 * resid.norm_squared() / state.sigma2 - 0.5 * (n * p) as f64 * state.sigma2.ln();
    lp -= 0.5 * state.z.norm_squared();
    for j in 0..p {
        lp += row_logprior(
            state.b.row(j).iter().copied(),
            r,
            state.xi[j],
            hyper.lambda,
            state.lambda0,
        );
    }
    let k = state.xi.iter().filter(|&&x| x).count() as f64;
    let beta = hyper.theta_beta();
    lp += k * state.theta.ln() + (p as f64 - k) * (-state.theta).ln_1p();
    lp += (beta - 1.0) * (-state.theta).ln_1p() - (ln_gamma(beta) - ln_gamma(1.0 + beta));
    lp += lambda0_log_prior(state.lambda0, hyper.lambda0_shape());
    lp += -(hyper.a_sigma + 1.0) * state.sigma2.ln() - hyper.b_sigma / state.sigma2;
    lp
}

/// Spectral warm start from the sample covariance.
pub fn initial_state<R: Rng + ?Sized>(
    y: &Mat,
    hyper: &MsslHyper,
    rng: &mut R,
) -> Result<ChainState> {
    let (n, p) = (y.nrows(), y.ncols());
    let r = hyper.r;
    let eig = sym_eig_topk(&sample_covariance(y), p)?;
    let tail = &eig.values[r..];
    let sigma2 = if tail.is_empty() {
        eig.values[p - 1]
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let mean_diag = eig.values.iter().sum::<f64>() / p as f64;
    let sigma2 = sigma2.max(1e-6 * mean_diag).max(f64::MIN_POSITIVE);
    let mut b = eig.vectors.mat().columns(0, r).into_owned();
    for k in 0..r {
        b.column_mut(k)
            .scale_mut((eig.values[k] - sigma2).max(0.0).sqrt());
    }

    let n_on = p.div_ceil(10);
    let mut order: Vec<usize> = (0..p).collect();
    let norms: Vec<f64> = (0..p).map(|j| b.row(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut xi = vec![false; p];
    for &j in &order[..n_on] {
        xi[j] = true;
    }

    let theta = Beta::new(1.0, hyper.theta_beta())
        .map_err(|e| Error::Numeric(format!("theta prior: {e}")))?
        .sample(rng);
    let lambda0 = sample_lambda0(hyper.lambda0_shape(), rng);
    Ok(ChainState {
        b,
        xi,
        z: Mat::zeros(n, r),
        theta,
        lambda0,
        sigma2,
    })
}

const TARGET_ACCEPT: f64 = 0.3;
const LOG_SD_MIN: f64 = -32.236_191_301_916_64; // ln 1e-14
const LOG_SD_MAX: f64 = std::f64::consts::LN_10;

/// Proposal scales and their Robbins–Monro tuning.
#[derive(Debug, Clone)]
struct Tuner {
    row_log_sd: Vec<f64>,
    lambda0_log_sd: f64,
}

impl Tuner {
    fn new(p: usize, sd: f64) -> Self {
        Tuner {
            row_log_sd: vec![sd.ln(); p],
            lambda0_log_sd: 0.0,
        }
    }

    fn row_sds(&self) -> Vec<f64> {
        self.row_log_sd.iter().map(|l| l.exp()).collect()
    }

    fn adapt(&mut self, t: usize, row_acc: &[bool], lambda0_acc: bool) {
        let gain = 1.0 / (t as f64).sqrt();
        let step = |l: &mut f64, acc: bool| {
            *l = (*l + gain * (acc as u8 as f64 - TARGET_ACCEPT)).clamp(LOG_SD_MIN, LOG_SD_MAX);
        };
        for (l, &a) in self.row_log_sd.iter_mut().zip(row_acc) {
            step(l, a);
        }
        step(&mut self.lambda0_log_sd, lambda0_acc);
    }
}

/// Per-sweep accept flags.
#[derive(Debug, Clone)]
pub struct SweepStats {
    pub rows: Vec<bool>,
    pub jumps: JumpCounts,
    pub lambda0: bool,
}

/// One full sweep in the fixed order `Z, B, ξ, θ, λ₀, σ²`.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    y: &Mat,
    hyper: &MsslHyper,
    row_sds: &[f64],
    lambda0_sd: f64,
    component_moves: bool,
    rng: &mut R,
) -> Result<SweepStats> {
    update_z(state, y, rng)?;
    let suff = Sufficient::new(&state.z, y);
    let rows = update_b_rows(state, &suff, hyper, row_sds, rng);
    let jumps = if component_moves {
        update_rows_jump(state, &suff, hyper, rng)
    } else {
        JumpCounts::default()
    };
    update_xi(state, hyper, rng);
    update_theta(state, hyper, rng)?;
    let lambda0 = update_lambda0(state, hyper, lambda0_sd, rng);
    update_sigma2(state, y, hyper, rng)?;
    Ok(SweepStats {
        rows,
        jumps,
        lambda0,
    })
}

/// Run burn-in then sampling sweeps. Deterministic given `cfg.seed`.
pub fn run_chain(y: &Mat, r: usize, hyper: &MsslHyper, cfg: &McmcConfig) -> Result<ChainSamples> {
    let (n, p) = (y.nrows(), y.ncols());
    ensure_finite(y, "data")?;
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    if r == 0 || r > p {
        return Err(Error::invalid(format!(
            "need 1 <= r <= p, got r = {r}, p = {p}"
        )));
    }
    if hyper.p != p || hyper.r != r {
        return Err(Error::Config(format!(
            "hyperparameters were built for p = {}, r = {} but data has p = {p}, r = {r}",
            hyper.p, hyper.r
        )));
    }
    hyper.validate()?;
    cfg.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = initial_state(y, hyper, &mut rng)?;
    let mut tuner = Tuner::new(p, cfg.proposal_sd);

    for t in 1..=cfg.n_burnin {
        let sds = tuner.row_sds();
        let st = sweep(
            &mut state,
            y,
            hyper,
            &sds,
            tuner.lambda0_log_sd.exp(),
            cfg.component_moves,
            &mut rng,
        )?;
        if cfg.adapt {
            tuner.adapt(t, &st.rows, st.lambda0);
        }
    }

    let sds = tuner.row_sds();
    let lambda0_sd = tuner.lambda0_log_sd.exp();
    let mut out = ChainSamples::new(n, p, r);
    out.row_sd = sds.clone();
    out.lambda0_sd = lambda0_sd;
    for t in 1..=cfg.n_samples {
        let st = sweep(
            &mut state,
            y,
            hyper,
            &sds,
            lambda0_sd,
            cfg.component_moves,
            &mut rng,
        )?;
        let acc = &mut out.acceptance;
        acc.b_rows.add(st.rows.iter().filter(|&&a| a).count(), p);
        if cfg.component_moves {
            acc.row_refresh.add(st.jumps.refresh, p);
            acc.row_flip.add(st.jumps.flip, p);
        }
        acc.lambda0.add(st.lambda0 as usize, 1);
        if t % cfg.thin == 0 {
            out.log_post.push(log_posterior(&state, y, hyper));
            out.theta_trace.push(state.theta);
            out.lambda0_trace.push(state.lambda0);
            out.push_draw(Draw {
                b: state.b.clone(),
                sigma2: state.sigma2,
                xi: state.xi.clone(),
            })?;
        }
    }
    Ok(out)
}

/// Draw `Y | B, Z, σ²` from the latent factor model.
pub fn sample_y_given<R: Rng + ?Sized>(state: &ChainState, p: usize, rng: &mut R) -> Mat {
    let n = state.z.nrows();
    let sd = state.sigma2.sqrt();
    let noise = Mat::from_fn(n, p, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    &state.z * state.b.transpose() + noise
}
