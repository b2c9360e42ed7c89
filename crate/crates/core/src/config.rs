//! Scenario configuration files.
//!
//! The file is TOML with dotted keys, one value per line, e.g.
//!
//! ```toml
//! channel.K = 0.01
//! channel.n0_dbm = -114.0
//! game.beta2 = 10.0
//! scenario.n_values = [5, 10, 15]
//! ```
//!
//! Every key is optional; an empty file gives the default scenario (cell
//! radius 500 m, N0 -114 dBm, K 1e-2, eta 4, 100 mW on both sides, 20 m
//! D2D links, 20 CEUs, beta1 = 1, beta2 = 10, 5 dB CEU requirement).
//! Powers are written in mW and dBm and converted to watts on load.

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, dbm_to_watts, ChannelParams, OutageConditioning};
use crate::simulation::{ScenarioConfig, Scheme, UnmatchedRate};
use crate::stackelberg::GameParams;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    #[serde(rename = "K")]
    pub k: f64,
    pub eta: f64,
    pub n0_dbm: f64,
    pub cell_radius: f64,
    pub edge_band: f64,
    pub d2d_separation: f64,
    pub relay_range: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            k: 1e-2,
            eta: 4.0,
            n0_dbm: -114.0,
            cell_radius: 500.0,
            edge_band: 50.0,
            d2d_separation: 20.0,
            relay_range: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSection {
    pub beta1: f64,
    pub beta2: f64,
    pub p_c_mw: f64,
    pub p_d_mw: f64,
    /// CEU requirement as an SNR; the rate requirement is `log2(1 + snr)`.
    pub required_snr_db: f64,
    /// Overrides `required_snr_db` with a rate in bits/s/Hz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_th: Option<f64>,
}

impl Default for GameSection {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 10.0,
            p_c_mw: 100.0,
            p_d_mw: 100.0,
            required_snr_db: 5.0,
            r_th: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub m: usize,
    pub n_values: Vec<usize>,
    pub drops: usize,
    pub schemes: Vec<Scheme>,
    /// Price for the fixed-price scheme; defaults to `beta2 P_D / 2 + beta1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_fixed: Option<f64>,
    pub master_seed: u64,
    pub condition_outage: bool,
    pub max_conditioning_draws: usize,
    pub unmatched_rate: UnmatchedRate,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            m: 20,
            n_values: vec![5, 10, 15, 20, 25, 30, 35, 40],
            drops: 500,
            schemes: Scheme::ALL.to_vec(),
            c_fixed: None,
            master_seed: 1,
            condition_outage: true,
            max_conditioning_draws: OutageConditioning::DEFAULT_MAX_DRAWS,
            unmatched_rate: UnmatchedRate::Direct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub channel: ChannelSection,
    pub game: GameSection,
    pub scenario: ScenarioSection,
}

/// Parse failure, with the parser's line/column report.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(String);

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Resolves units and defaults into a validated scenario.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let n0 = dbm_to_watts(self.channel.n0_dbm);
        let channel = ChannelParams {
            k: self.channel.k,
            eta: self.channel.eta,
            n0,
            cell_radius: self.channel.cell_radius,
            edge_band: self.channel.edge_band,
            d2d_separation: self.channel.d2d_separation,
            relay_range: self.channel.relay_range,
        };
        let game = GameParams {
            beta1: self.game.beta1,
            beta2: self.game.beta2,
            p_c: self.game.p_c_mw * 1e-3,
            p_d: self.game.p_d_mw * 1e-3,
            n0,
            r_th: self
                .game
                .r_th
                .unwrap_or_else(|| (1.0 + db_to_linear(self.game.required_snr_db)).log2()),
        };
        let s = &self.scenario;
        let config = ScenarioConfig {
            channel,
            game,
            m: s.m,
            n_values: s.n_values.clone(),
            drops: s.drops,
            schemes: s.schemes.clone(),
            c_fixed: s.c_fixed.unwrap_or_else(|| game.default_fixed_price()),
            master_seed: s.master_seed,
            condition_outage: s.condition_outage,
            max_conditioning_draws: s.max_conditioning_draws,
            unmatched_rate: s.unmatched_rate,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_scenario() {
        let cfg = ConfigFile::parse("").unwrap().scenario().unwrap();
        let def = ScenarioConfig::default();
        assert_eq!(cfg.channel, def.channel);
        assert_eq!(cfg.game.beta1, 1.0);
        assert_eq!(cfg.game.beta2, 10.0);
        assert!((cfg.game.p_c - 0.1).abs() < 1e-15);
        assert!((cfg.game.n0 - 3.981e-15).abs() < 1e-18);
        assert!((cfg.game.r_th - 2.0574).abs() < 1e-4);
        assert!((cfg.c_fixed - 1.5).abs() < 1e-12);
        assert_eq!(cfg.n_values, vec![5, 10, 15, 20, 25, 30, 35, 40]);
        assert_eq!(cfg.m, 20);
        assert!(cfg.condition_outage);
    }

    #[test]
    fn dotted_keys_override() {
        let text = "channel.K = 0.02\ngame.beta2 = 30.0\nscenario.schemes = [\"proposed\"]\nscenario.c_fixed = 2.5\n";
        let cfg = ConfigFile::parse(text).unwrap().scenario().unwrap();
        assert_eq!(cfg.channel.k, 0.02);
        assert_eq!(cfg.game.beta2, 30.0);
        assert_eq!(cfg.schemes, vec![Scheme::Proposed]);
        assert_eq!(cfg.c_fixed, 2.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ConfigFile::parse("game.beta1 = 1.0\n\ngame.bogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = ConfigFile::parse("channel.K = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn invalid_values_fail_validation() {
        let file = ConfigFile::parse("scenario.drops = 0").unwrap();
        assert!(file.scenario().is_err());
        let file = ConfigFile::parse("channel.edge_band = 600.0").unwrap();
        assert!(file.scenario().is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut file = ConfigFile::default();
        file.channel.k = 0.1 + 0.2;
        file.scenario.c_fixed = Some(1.0 / 3.0);
        file.scenario.master_seed = 987654321;
        let back = ConfigFile::parse(&file.to_toml()).unwrap();
        assert_eq!(back, file);
    }
}
