//! Scenario configuration: everything that determines a session, loadable
//! from a TOML file with named sections mirroring the module types.

use serde::{Deserialize, Serialize};

use crate::attack::AttackConfig;
use crate::countermeasure::WatchdogConfig;
use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::protocol::{BasisMode, BobReceiver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Mean photon number of Alice's weak coherent pulses.
    pub mean_photon_number: f64,
    pub slots: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ChannelConfig {
    /// Fibre loss Alice -> Eve's position, dB.
    pub alice_eve_loss_db: f64,
    /// Fibre loss Eve's position -> Bob, dB.
    pub eve_bob_loss_db: f64,
    /// Channel-induced bit-flip probability applied to Bob's resolved bits.
    pub bit_flip_prob: f64,
}

impl ChannelConfig {
    pub fn total_loss_db(&self) -> f64 {
        self.alice_eve_loss_db + self.eve_bob_loss_db
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BobConfig {
    #[serde(default = "default_basis_mode")]
    pub basis_mode: BasisMode,
    /// Detector preset names, one per detector (exactly two).
    pub detectors: Vec<String>,
    /// Optional quantum-efficiency override applied to both detectors.
    #[serde(default)]
    pub efficiency: Option<f64>,
    /// Optional per-gate dark-count probability override.
    #[serde(default)]
    pub dark_count_prob: Option<f64>,
}

fn default_basis_mode() -> BasisMode {
    BasisMode::Active
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AttackSection {
    pub enabled: bool,
    #[serde(flatten)]
    pub config: AttackConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WatchdogSection {
    pub enabled: bool,
    #[serde(flatten)]
    pub config: WatchdogConfig,
}

impl Default for WatchdogSection {
    fn default() -> Self {
        Self { enabled: false, config: WatchdogConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostConfig {
    /// Fraction of the sifted key disclosed for QBER estimation.
    pub sample_fraction: f64,
    pub qber_abort_threshold: f64,
    /// Reconciliation block-size schedule; derived from the measured QBER
    /// when absent.
    pub ec_block_sizes: Option<Vec<usize>>,
    /// Extra bits removed by privacy amplification beyond the disclosed
    /// parity count.
    pub pa_safety_margin: usize,
}

impl Default for PostConfig {
    fn default() -> Self {
        Self {
            sample_fraction: 0.1,
            qber_abort_threshold: 0.11,
            ec_block_sizes: None,
            pa_safety_margin: 64,
        }
    }
}

/// Full description of one session; together with the seed it determines
/// the run completely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub source: SourceConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub bob: BobConfig,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub watchdog: WatchdogSection,
    #[serde(default)]
    pub postprocessing: PostConfig,
}

fn default_seed() -> u64 {
    1
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.mean_photon_number <= 0.0 {
            return Err(Error::InvalidScenario(format!(
                "source.mean_photon_number must be > 0, got {}",
                self.source.mean_photon_number
            )));
        }
        if self.source.slots == 0 {
            return Err(Error::InvalidScenario("source.slots must be >= 1".into()));
        }
        if self.bob.detectors.len() != 2 {
            return Err(Error::InvalidScenario(format!(
                "bob.detectors needs exactly 2 preset names, got {}",
                self.bob.detectors.len()
            )));
        }
        if self.channel.alice_eve_loss_db < 0.0 || self.channel.eve_bob_loss_db < 0.0 {
            return Err(Error::InvalidScenario("channel losses must be >= 0 dB".into()));
        }
        if !(0.0..=1.0).contains(&self.channel.bit_flip_prob) {
            return Err(Error::InvalidScenario("channel.bit_flip_prob must be in [0, 1]".into()));
        }
        if !(0.0 < self.postprocessing.sample_fraction && self.postprocessing.sample_fraction <= 1.0) {
            return Err(Error::InvalidScenario(
                "postprocessing.sample_fraction must be in (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.attack.config.dark_count_emulation_rate) {
            return Err(Error::InvalidScenario(
                "attack.dark_count_emulation_rate must be in [0, 1]".into(),
            ));
        }
        // preset names resolve
        self.build_detectors()?;
        Ok(())
    }

    pub fn build_detectors(&self) -> Result<(DetectorModel, DetectorModel)> {
        let mut dets = Vec::with_capacity(2);
        for name in &self.bob.detectors {
            let mut d = DetectorModel::preset(name)?;
            if let Some(eta) = self.bob.efficiency {
                d.geiger.efficiency = eta;
            }
            if let Some(pdc) = self.bob.dark_count_prob {
                d.geiger.dark_count_prob = pdc;
            }
            dets.push(d);
        }
        let d1 = dets.pop().expect("two presets");
        let d0 = dets.pop().expect("two presets");
        Ok((d0, d1))
    }

    pub fn build_receiver(&self) -> Result<BobReceiver> {
        let (d0, d1) = self.build_detectors()?;
        Ok(match self.bob.basis_mode {
            BasisMode::Active => BobReceiver::active(d0, d1),
            BasisMode::Passive => BobReceiver::passive(d0, d1),
        })
    }
}

/// Baseline scenario used by the CLI and tests: Clavis2 detectors, ideal
/// noiseless channel, attack and watchdog off.
pub fn clavis2_baseline() -> Scenario {
    Scenario {
        seed: 1,
        source: SourceConfig { mean_photon_number: 0.5, slots: 10_000 },
        channel: ChannelConfig::default(),
        bob: BobConfig {
            basis_mode: BasisMode::Active,
            detectors: vec!["clavis2-det0".into(), "clavis2-det1".into()],
            efficiency: None,
            dark_count_prob: None,
        },
        attack: AttackSection::default(),
        watchdog: WatchdogSection::default(),
        postprocessing: PostConfig::default(),
    }
}
