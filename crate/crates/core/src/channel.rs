//! Per-slot channel gains: pathloss times unit-mean Rayleigh power fading,
//! plus the descending-gain order that SIC decoding follows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Node geometry: distance of every user to the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    distances: Vec<f64>,
    pathloss_exponent: f64,
}

impl Topology {
    pub fn new(distances: Vec<f64>, pathloss_exponent: f64) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::invalid("distances", "at least one user is required"));
        }
        if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::invalid(
                "distances",
                format!("distance {d} is not strictly positive"),
            ));
        }
        if !pathloss_exponent.is_finite() || pathloss_exponent < 0.0 {
            return Err(Error::invalid(
                "pathloss_exponent",
                format!("{pathloss_exponent} is not a non-negative number"),
            ));
        }
        Ok(Topology {
            distances,
            pathloss_exponent,
        })
    }

    /// Pathloss exponent 4.
    pub fn with_distances(distances: Vec<f64>) -> Result<Self> {
        Self::new(distances, 4.0)
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn pathloss_exponent(&self) -> f64 {
        self.pathloss_exponent
    }

    pub fn user_count(&self) -> usize {
        self.distances.len()
    }

    /// Mean linear gain `1 / D^alpha` of user `i`.
    pub fn mean_gain(&self, i: usize) -> f64 {
        self.distances[i].powf(-self.pathloss_exponent)
    }
}

/// Deterministic generator for the fading process, one per simulation run.
#[derive(Debug, Clone)]
pub struct RngState {
    inner: ChaCha12Rng,
}

impl RngState {
    pub fn from_seed(seed: u64) -> Self {
        RngState {
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Unit-mean exponential draw (normalized Rayleigh power fading).
    pub fn next_unit_exponential(&mut self) -> f64 {
        unit_exponential(self.next_uniform())
    }
}

/// Inverse CDF of the unit-mean exponential distribution.
pub fn unit_exponential(u: f64) -> f64 {
    -(-u).ln_1p()
}

/// Gains of one slot in original user order, with the SIC decoding order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: Vec<f64>,
    sort_perm: Vec<usize>,
}

impl ChannelRealization {
    pub fn from_gains(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("gains", "at least one user is required"));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid("gains", format!("gain {g} is not finite and >= 0")));
        }
        let sort_perm = sort_users(&gains);
        Ok(ChannelRealization { gains, sort_perm })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// `sort_perm()[k]` is the original index of the user with the
    /// (k+1)-th largest gain (0-based).
    pub fn sort_perm(&self) -> &[usize] {
        &self.sort_perm
    }

    pub fn user_count(&self) -> usize {
        self.gains.len()
    }

    pub fn sorted_gains(&self) -> Vec<f64> {
        self.sort_perm.iter().map(|&i| self.gains[i]).collect()
    }
}

/// Stable descending sort of user indices by gain; ties keep ascending index.
pub fn sort_users(gains: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..gains.len()).collect();
    perm.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    perm
}

/// Builds the realization from explicit uniform draws, one per user.
pub fn gains_from_uniforms(topology: &Topology, uniforms: &[f64]) -> Result<ChannelRealization> {
    if uniforms.len() != topology.user_count() {
        return Err(Error::DimensionMismatch {
            expected: topology.user_count(),
            got: uniforms.len(),
        });
    }
    let gains = uniforms
        .iter()
        .enumerate()
        .map(|(i, &u)| unit_exponential(u) * topology.mean_gain(i))
        .collect();
    ChannelRealization::from_gains(gains)
}

/// Draws one slot of independent fading for every user.
pub fn sample_gains(topology: &Topology, rng: &mut RngState) -> ChannelRealization {
    let uniforms: Vec<f64> = (0..topology.user_count())
        .map(|_| rng.next_uniform())
        .collect();
    gains_from_uniforms(topology, &uniforms).expect("valid topology yields valid gains")
}
