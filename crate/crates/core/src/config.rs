//! TOML run configurations and single-instance files.
//!
//! Run configuration, every key optional:
//!
//! ```toml
//! [phy]
//! bandwidth_mhz = 20.0
//! slot_ms = 50.0
//! noise_dbm = -87.0
//! p_max_dbm = 33.0
//! p_mean_dbm = 30.0
//! r_max_mbit = 15.0
//!
//! [scenario]
//! name = "scenario1"          # or distances_m = [60.0, 100.0]
//! pathloss_exponent = 4.0
//!
//! [control]
//! v = 30.0                    # defaults to the preset's V
//! policy = "noma_opt"
//! horizon = 50000
//! seed = 1
//!
//! [output]
//! dir = "out"
//! traces = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::SchedulerPolicy;
use crate::channel::{dbm_to_watts, Topology};
use crate::dppa::{EffectiveWeights, PowerProblem};
use crate::error::{Error, Result};
use crate::experiments::{ScenarioPreset, DEFAULT_HORIZON};
use crate::phy::PhyConfig;
use crate::sim::SimConfig;

/// V used with explicit `distances_m` when `control.v` is absent.
pub const CUSTOM_DEFAULT_V: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhySection {
    pub bandwidth_mhz: f64,
    pub slot_ms: f64,
    pub noise_dbm: f64,
    pub p_max_dbm: f64,
    pub p_mean_dbm: f64,
    pub r_max_mbit: f64,
}

impl Default for PhySection {
    fn default() -> Self {
        PhySection {
            bandwidth_mhz: 20.0,
            slot_ms: 50.0,
            noise_dbm: -87.0,
            p_max_dbm: 33.0,
            p_mean_dbm: 30.0,
            r_max_mbit: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances_m: Option<Vec<f64>>,
    pub pathloss_exponent: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            name: None,
            distances_m: None,
            pathloss_exponent: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    pub policy: SchedulerPolicy,
    pub horizon: u64,
    pub seed: u64,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            v: None,
            policy: SchedulerPolicy::NomaOpt,
            horizon: DEFAULT_HORIZON,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub traces: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub phy: PhySection,
    pub scenario: ScenarioSection,
    pub control: ControlSection,
    pub output: OutputSection,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("{v} must be finite and > 0")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("{v} must be finite")))
    }
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.phy;
        positive("phy.bandwidth_mhz", p.bandwidth_mhz)?;
        positive("phy.slot_ms", p.slot_ms)?;
        finite("phy.noise_dbm", p.noise_dbm)?;
        finite("phy.p_max_dbm", p.p_max_dbm)?;
        finite("phy.p_mean_dbm", p.p_mean_dbm)?;
        positive("phy.r_max_mbit", p.r_max_mbit)?;
        if p.p_mean_dbm > p.p_max_dbm {
            return Err(Error::invalid(
                "phy.p_mean_dbm",
                format!("{} dBm exceeds p_max_dbm = {} dBm", p.p_mean_dbm, p.p_max_dbm),
            ));
        }
        let s = &self.scenario;
        positive("scenario.pathloss_exponent", s.pathloss_exponent)?;
        if s.name.is_some() && s.distances_m.is_some() {
            return Err(Error::invalid("scenario", "give either `name` or `distances_m`, not both"));
        }
        if let Some(name) = &s.name {
            let preset = ScenarioPreset::by_name(name)?;
            if preset.name == "usercount" {
                return Err(Error::invalid(
                    "scenario.name",
                    "`usercount` is a sweep; use the sweep-k command",
                ));
            }
        }
        if let Some(d) = &s.distances_m {
            if d.is_empty() {
                return Err(Error::invalid("scenario.distances_m", "needs at least one user"));
            }
            for &x in d {
                positive("scenario.distances_m", x)?;
            }
        }
        if let Some(v) = self.control.v {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("control.v", format!("{v} must be finite and >= 0")));
            }
        }
        if self.control.horizon == 0 {
            return Err(Error::invalid("control.horizon", "must be at least one slot"));
        }
        self.phy_config()?;
        Ok(())
    }

    /// Physical constants in SI units.
    pub fn phy_config(&self) -> Result<PhyConfig> {
        let p = &self.phy;
        PhyConfig::new(
            p.bandwidth_mhz * 1e6,
            p.slot_ms * 1e-3,
            dbm_to_watts(p.noise_dbm),
            dbm_to_watts(p.p_max_dbm),
            dbm_to_watts(p.p_mean_dbm),
            p.r_max_mbit * 1e6,
        )
    }

    fn base_preset(&self) -> Result<ScenarioPreset> {
        match (&self.scenario.name, &self.scenario.distances_m) {
            (_, Some(d)) => {
                let mut p = ScenarioPreset::scenario1();
                p.name = "custom".into();
                p.distances = d.clone();
                p.v = CUSTOM_DEFAULT_V;
                Ok(p)
            }
            (Some(name), None) => ScenarioPreset::by_name(name),
            (None, None) => Ok(ScenarioPreset::scenario1()),
        }
    }

    /// The scenario as a preset restricted to this config's policy and seed.
    pub fn preset(&self) -> Result<ScenarioPreset> {
        let mut p = self.base_preset()?;
        p.v = self.control.v.unwrap_or(p.v);
        p.pathloss_exponent = self.scenario.pathloss_exponent;
        p.phy = self.phy_config()?;
        p.horizon = self.control.horizon;
        p.seeds = vec![self.control.seed];
        p.policies = vec![self.control.policy];
        p.record_traces = self.output.traces;
        Ok(p)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let p = self.preset()?;
        let mut cfg = SimConfig::new(
            p.phy,
            Topology::new(p.distances.clone(), p.pathloss_exponent)?,
            p.v,
            self.control.policy,
            self.control.horizon,
            self.control.seed,
        );
        cfg.record_traces = self.output.traces;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a TOML run configuration straight into a simulator configuration.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    RunConfig::from_toml(text)?.sim_config()
}

/// One power-allocation instance for the `solve` and `verify` commands.
///
/// Either `weights` (already scaled) or `backlogs_bits` must be given;
/// backlogs are turned into weights with the physical constants below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub gains: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backlogs_bits: Option<Vec<f64>>,
    pub z: f64,
    #[serde(default = "default_p_max_w")]
    pub p_max_w: f64,
    #[serde(default = "default_eta_w")]
    pub eta_w: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_mhz: f64,
    #[serde(default = "default_slot")]
    pub slot_ms: f64,
}

fn default_p_max_w() -> f64 {
    dbm_to_watts(33.0)
}

fn default_eta_w() -> f64 {
    dbm_to_watts(-87.0)
}

fn default_bandwidth() -> f64 {
    20.0
}

fn default_slot() -> f64 {
    50.0
}

impl InstanceFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn effective_weights(&self) -> Result<EffectiveWeights> {
        match (&self.weights, &self.backlogs_bits) {
            (Some(w), None) => EffectiveWeights::new(w.clone(), self.z),
            (None, Some(q)) => {
                positive("bandwidth_mhz", self.bandwidth_mhz)?;
                positive("slot_ms", self.slot_ms)?;
                EffectiveWeights::from_backlogs(q, self.bandwidth_mhz * 1e3 * self.slot_ms, 1e6, self.z)
            }
            _ => Err(Error::invalid("weights", "give exactly one of `weights` and `backlogs_bits`")),
        }
    }

    /// The instance in descending-gain order.
    pub fn problem(&self) -> Result<PowerProblem> {
        let w = self.effective_weights()?;
        if w.w.len() != self.gains.len() {
            return Err(Error::DimensionMismatch {
                expected: self.gains.len(),
                got: w.w.len(),
            });
        }
        let chan = crate::channel::ChannelRealization::from_gains(self.gains.clone())?;
        PowerProblem::from_channel(&w, &chan, self.eta_w, self.p_max_w)
    }
}
