use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::MsslHyper;
use crate::sampler::McmcConfig;

/// Prior hyperparameters that do not depend on the data dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperSettings {
    pub lambda: f64,
    pub kappa: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
}

impl Default for HyperSettings {
    fn default() -> Self {
        let h = MsslHyper::new(1, 1);
        HyperSettings {
            lambda: h.lambda,
            kappa: h.kappa,
            a_sigma: h.a_sigma,
            b_sigma: h.b_sigma,
        }
    }
}

impl HyperSettings {
    pub fn for_dims(&self, p: usize, r: usize) -> MsslHyper {
        MsslHyper {
            lambda: self.lambda,
            kappa: self.kappa,
            a_sigma: self.a_sigma,
            b_sigma: self.b_sigma,
            p,
            r,
        }
    }
}

/// Everything needed to simulate, fit and score one synthetic study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub lam_min: f64,
    pub lam_max: f64,
    /// Noise variance of the truth. Not a published value; 1 by default.
    pub sigma0_sq: f64,
    pub hyper: HyperSettings,
    pub mcmc: McmcConfig,
    pub n_replicates: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Multiplier in the diagonal-thresholding rank rule.
    pub gamma: f64,
    /// Worker threads for replicates; 0 uses every core.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 100,
            p: 200,
            r: 1,
            s: 8,
            lam_min: 10.0,
            lam_max: 20.0,
            sigma0_sq: 1.0,
            hyper: HyperSettings::default(),
            mcmc: McmcConfig::default(),
            n_replicates: 50,
            base_seed: 0,
            output_dir: PathBuf::from("out"),
            gamma: 2.0,
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 || self.p == 0 || self.r == 0 || self.s == 0 || self.n_replicates == 0 {
            return bad("n, p, r, s and n_replicates must all be positive".into());
        }
        if !(self.r <= self.s && self.s <= self.p) {
            return bad(format!(
                "need r <= s <= p, got r = {}, s = {}, p = {}",
                self.r, self.s, self.p
            ));
        }
        if !(self.lam_min > 0.0 && self.lam_min <= self.lam_max && self.lam_max.is_finite()) {
            return bad(format!(
                "need 0 < lam_min <= lam_max, got [{}, {}]",
                self.lam_min, self.lam_max
            ));
        }
        if !(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite()) {
            return bad(format!(
                "sigma0_sq must be positive, got {}",
                self.sigma0_sq
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        self.hyper
            .for_dims(self.p, self.r)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.mcmc.validate()
    }

    pub fn hyper_for(&self, r: usize) -> MsslHyper {
        self.hyper.for_dims(self.p, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_json() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!((cfg.n, cfg.p, cfg.r, cfg.s), (100, 200, 1, 8));
        assert_eq!(cfg.sigma0_sq, 1.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_json_overrides() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"p": 50, "hyper": {"kappa": 0.5}, "mcmc": {"n_burnin": 10}}"#)
                .unwrap();
        assert_eq!(cfg.p, 50);
        assert_eq!(cfg.hyper.kappa, 0.5);
        assert_eq!(cfg.hyper.lambda, 1.0);
        assert_eq!(cfg.mcmc.n_burnin, 10);
        assert_eq!(cfg.mcmc.n_samples, 1000);
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::default();
        assert!(ExperimentConfig {
            s: 300,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig { r: 9, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig {
            lam_min: 30.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        let mut bad = ok.clone();
        bad.hyper.kappa = 2.0;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
