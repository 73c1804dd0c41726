//! Experiment configuration, loadable from TOML. Every field has a default,
//! so a file only needs the values it changes.

use dagcast_core::{ParamsError, ProtocolParams};
use serde::{Deserialize, Serialize};

use crate::netsim::{DelayModel, LossModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Budget,
    BudgetGreedy,
    Bernoulli,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    /// Fixed f; `None` means `floor((n - 1) / 3)`.
    pub f: Option<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    /// Fraction of seeds in which every honest participant must complete.
    pub success_threshold: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub resolution: f64,
    /// Loss levels of a sweep.
    pub rho_values: Vec<f64>,
    pub loss_mode: LossMode,
    pub t_slot_ms: f64,
    pub r_max: u32,
    pub e_max: u32,
    pub history_depth: u32,
    pub delay: DelayModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_values: vec![4, 8, 12, 16, 20],
            f: None,
            seeds: 20,
            base_seed: 1,
            success_threshold: 0.95,
            rho_lo: 0.0,
            rho_hi: 0.95,
            resolution: 0.01,
            rho_values: vec![0.0, 0.1, 0.2, 0.3],
            loss_mode: LossMode::Budget,
            t_slot_ms: 25.0,
            r_max: 5,
            e_max: 2,
            history_depth: 1,
            delay: DelayModel::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("plain data")
    }

    pub fn f_for(&self, n: usize) -> usize {
        self.f.unwrap_or((n.saturating_sub(1)) / 3)
    }

    pub fn params(&self, n: usize) -> Result<ProtocolParams, ParamsError> {
        Ok(ProtocolParams::new(n, self.f_for(n), self.r_max)?
            .with_history_depth(self.history_depth)?
            .with_e_max(self.e_max))
    }

    /// Transmissions per budget block: every ordered pair, every round.
    pub fn budget_block(&self, n: usize) -> u64 {
        (n * (n - 1)) as u64 * u64::from(self.r_max + 1)
    }

    pub fn loss(&self, n: usize, rho: f64) -> LossModel {
        match self.loss_mode {
            LossMode::Budget => LossModel::Budget {
                rho,
                block: self.budget_block(n),
            },
            LossMode::BudgetGreedy => LossModel::BudgetGreedy {
                rho,
                block: self.budget_block(n),
            },
            LossMode::Bernoulli => LossModel::Bernoulli { p: rho },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.seeds == 0 {
            return Err("seeds must be at least 1".into());
        }
        if !(self.resolution > 0.0) {
            return Err("resolution must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.rho_lo) || !(self.rho_lo..=1.0).contains(&self.rho_hi) {
            return Err("rho bounds must satisfy 0 <= lo <= hi <= 1".into());
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err("success threshold outside [0, 1]".into());
        }
        if self.t_slot_ms <= 0.0 {
            return Err("t_slot must be positive".into());
        }
        self.delay.validate()?;
        for &n in &self.n_values {
            self.params(n).map_err(|e| format!("n = {n}: {e}"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        let p = ExperimentConfig::from_toml("n_values = [5]\nseeds = 3\n[delay]\nbase_ms = 1.0\njitter_ms = 0.0\nstraggler_prob = 0.0\nstraggler_extra_ms = 0.0\n").unwrap();
        assert_eq!(p.n_values, vec![5]);
        assert_eq!(p.seeds, 3);
        assert_eq!(p.r_max, c.r_max);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn default_f_rule() {
        let c = ExperimentConfig::default();
        assert_eq!([4, 7, 8, 20].map(|n| c.f_for(n)), [1, 2, 2, 6]);
    }
}
