//! Deliverable bits per slot under NOMA superposition with SIC, and under
//! equal time-shared OMA.

use crate::channel::{dbm_to_watts, ChannelRealization};
use crate::error::{Error, Result};

/// Physical-layer constants, all in SI units (bits for `r_max_bits`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyConfig {
    pub bandwidth_hz: f64,
    pub slot_s: f64,
    pub noise_w: f64,
    pub p_max_w: f64,
    pub p_mean_w: f64,
    pub r_max_bits: f64,
}

impl PhyConfig {
    pub fn new(
        bandwidth_hz: f64,
        slot_s: f64,
        noise_w: f64,
        p_max_w: f64,
        p_mean_w: f64,
        r_max_bits: f64,
    ) -> Result<Self> {
        let phy = PhyConfig {
            bandwidth_hz,
            slot_s,
            noise_w,
            p_max_w,
            p_mean_w,
            r_max_bits,
        };
        phy.validate()?;
        Ok(phy)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("bandwidth", self.bandwidth_hz),
            ("slot", self.slot_s),
            ("noise", self.noise_w),
            ("p_max", self.p_max_w),
            ("p_mean", self.p_mean_w),
            ("r_max", self.r_max_bits),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, format!("{v} must be finite and > 0")));
            }
        }
        if self.p_mean_w > self.p_max_w {
            return Err(Error::invalid(
                "p_mean",
                format!(
                    "average budget {} W exceeds peak budget {} W",
                    self.p_mean_w, self.p_max_w
                ),
            ));
        }
        Ok(())
    }

    /// `W * tau`: channel uses per slot.
    pub fn symbols_per_slot(&self) -> f64 {
        self.bandwidth_hz * self.slot_s
    }
}

impl Default for PhyConfig {
    /// 20 MHz, 50 ms slots, -87 dBm noise, 33/30 dBm peak/mean, 15 Mbit cap.
    fn default() -> Self {
        PhyConfig {
            bandwidth_hz: 20e6,
            slot_s: 0.05,
            noise_w: dbm_to_watts(-87.0),
            p_max_w: dbm_to_watts(33.0),
            p_mean_w: dbm_to_watts(30.0),
            r_max_bits: 15e6,
        }
    }
}

/// Per-user transmit powers in original user order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    /// Objective value the producing solver assigned to these powers.
    pub objective: f64,
}

impl PowerAllocation {
    pub fn zeros(k: usize) -> Self {
        PowerAllocation {
            powers: vec![0.0; k],
            objective: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn user_count(&self) -> usize {
        self.powers.len()
    }

    /// Non-negative powers with total at most `p_max` (1e-9 W slack).
    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.powers.iter().all(|p| p.is_finite() && *p >= 0.0) && self.total() <= p_max + 1e-9
    }
}

/// Deliverable bits per user for one slot, original user order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    pub bits: Vec<f64>,
}

impl RateVector {
    pub fn total(&self) -> f64 {
        self.bits.iter().sum()
    }
}

fn check_dims(alloc: &PowerAllocation, chan: &ChannelRealization) -> Result<()> {
    if alloc.user_count() != chan.user_count() {
        return Err(Error::DimensionMismatch {
            expected: chan.user_count(),
            got: alloc.user_count(),
        });
    }
    Ok(())
}

/// SIC rate stack: the k-th strongest user sees the powers of all stronger
/// users as interference and decodes the weaker users away.
pub fn noma_rates(
    alloc: &PowerAllocation,
    chan: &ChannelRealization,
    phy: &PhyConfig,
) -> Result<RateVector> {
    check_dims(alloc, chan)?;
    let scale = phy.symbols_per_slot();
    let mut bits = vec![0.0; chan.user_count()];
    let mut prefix = 0.0;
    for &user in chan.sort_perm() {
        let g = chan.gains()[user];
        let p = alloc.powers[user];
        let sinr = p * g / (prefix * g + phy.noise_w);
        bits[user] = scale * sinr.ln_1p() / std::f64::consts::LN_2;
        prefix += p;
    }
    Ok(RateVector { bits })
}

/// Equal time shares, no interference.
pub fn oma_rates(
    alloc: &PowerAllocation,
    chan: &ChannelRealization,
    phy: &PhyConfig,
) -> Result<RateVector> {
    check_dims(alloc, chan)?;
    let scale = phy.symbols_per_slot() / chan.user_count() as f64;
    let bits = alloc
        .powers
        .iter()
        .zip(chan.gains())
        .map(|(p, g)| scale * (p * g / phy.noise_w).ln_1p() / std::f64::consts::LN_2)
        .collect();
    Ok(RateVector { bits })
}
