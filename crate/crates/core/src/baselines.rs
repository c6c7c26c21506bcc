//! Benchmark power allocation schemes run inside the same queueing shell.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dppa::PowerProblem;
use crate::error::Error;
use crate::phy::PowerAllocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerPolicy {
    /// Exact NOMA power allocation (DPPA).
    NomaOpt,
    /// Equal time shares with water-filling powers.
    Oma,
    /// NOMA objective, at most one user served.
    Single,
    /// NOMA, `p_mean / K` to every user.
    NomaEq,
    /// NOMA, `p_mean` split in proportion to backlogs.
    NomaProQ,
}

impl SchedulerPolicy {
    pub const ALL: [SchedulerPolicy; 5] = [
        SchedulerPolicy::NomaOpt,
        SchedulerPolicy::Oma,
        SchedulerPolicy::Single,
        SchedulerPolicy::NomaEq,
        SchedulerPolicy::NomaProQ,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SchedulerPolicy::NomaOpt => "noma_opt",
            SchedulerPolicy::Oma => "oma",
            SchedulerPolicy::Single => "single",
            SchedulerPolicy::NomaEq => "noma_eq",
            SchedulerPolicy::NomaProQ => "noma_pro_q",
        }
    }

    /// Whether deliverable bits follow the time-shared OMA model.
    pub fn is_orthogonal(self) -> bool {
        self == SchedulerPolicy::Oma
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SchedulerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        SchedulerPolicy::ALL
            .into_iter()
            .find(|p| p.tag() == norm)
            .ok_or_else(|| Error::invalid("policy", format!("unknown policy `{s}`")))
    }
}

/// Water-filling for the time-shared objective
/// `sum (w_i / K) ln(1 + p_i g_i / eta) - z sum p_i` under the peak cap.
/// `problem` carries the ordinary (NOMA) weights; the `1/K` share is
/// applied here.
pub fn oma_allocate(problem: &PowerProblem) -> PowerAllocation {
    let k = problem.user_count();
    let shared = problem.with_scaled_weights(1.0 / k as f64);
    let (w, g, eta, z, p_max) = (shared.weights(), shared.gains(), shared.eta(), shared.z(), shared.p_max());

    let fill = |mu: f64| -> Vec<f64> {
        w.iter()
            .zip(g)
            .map(|(&wi, &gi)| {
                if wi == 0.0 || gi == 0.0 {
                    0.0
                } else {
                    (wi / (z + mu) - eta / gi).max(0.0)
                }
            })
            .collect()
    };
    let total = |p: &[f64]| p.iter().sum::<f64>();

    let powers = if z > 0.0 && total(&fill(0.0)) <= p_max {
        fill(0.0)
    } else {
        // Above this multiplier every user is switched off.
        let mut hi = w
            .iter()
            .zip(g)
            .map(|(wi, gi)| wi * gi / eta)
            .fold(0.0f64, f64::max);
        let mut lo = 0.0;
        if hi == 0.0 {
            vec![0.0; k]
        } else {
            for _ in 0..400 {
                let mid = 0.5 * (lo + hi);
                if total(&fill(mid)) > p_max {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if p_max - total(&fill(hi)) <= 1e-9 * p_max {
                    break;
                }
            }
            fill(hi)
        }
    };
    let objective: f64 = powers
        .iter()
        .enumerate()
        .map(|(i, &p)| shared.f(i, 0.0, p))
        .sum();
    shared.allocation(&powers, objective)
}

/// Serve the one user whose single-user optimum scores best.
pub fn single_allocate(problem: &PowerProblem) -> PowerAllocation {
    let k = problem.user_count();
    let (w, g, eta, z, p_max) = (problem.weights(), problem.gains(), problem.eta(), problem.z(), problem.p_max());
    let mut best: Option<(usize, f64, f64)> = None;
    for i in 0..k {
        let p = if g[i] == 0.0 {
            0.0
        } else if z > 0.0 {
            (w[i] / z - eta / g[i]).clamp(0.0, p_max)
        } else {
            p_max
        };
        let value = problem.f(i, 0.0, p);
        if value > 0.0 && best.is_none_or(|(_, _, v)| value > v) {
            best = Some((i, p, value));
        }
    }
    let mut powers = vec![0.0; k];
    let mut objective = 0.0;
    if let Some((i, p, v)) = best {
        powers[i] = p;
        objective = v;
    }
    problem.allocation(&powers, objective)
}

/// `p_mean / K` to everyone.
pub fn eq_allocate(k: usize, p_mean: f64) -> PowerAllocation {
    PowerAllocation {
        powers: vec![p_mean / k as f64; k],
        objective: f64::NAN,
    }
}

/// `p_mean` split in proportion to backlogs; nothing when all queues are empty.
pub fn proq_allocate(backlogs: &[f64], p_mean: f64) -> PowerAllocation {
    let total: f64 = backlogs.iter().sum();
    let powers = if total > 0.0 {
        backlogs.iter().map(|q| p_mean * q / total).collect()
    } else {
        vec![0.0; backlogs.len()]
    };
    PowerAllocation {
        powers,
        objective: f64::NAN,
    }
}
