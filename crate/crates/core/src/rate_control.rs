//! Per-user admission control: pick `R` in `[0, r_max]` maximizing
//! `V * U(R) - Q * R`.

/// Shape of a concave, non-decreasing utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityShape {
    /// `ln(R)`.
    Log,
    /// `R`.
    Linear,
    /// `-(R - peak)^2`, used only on its non-decreasing branch `R <= peak`.
    Quadratic { peak: f64 },
}

/// A utility of the admitted rate. The rate argument is expressed in
/// `unit_bits`-sized units (1e6 for "Mbit per slot"); queues handed to the
/// controller are converted with the same constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityFunction {
    pub shape: UtilityShape,
    pub unit_bits: f64,
}

/// Smallest average rate (in utility units) passed to `ln` when reporting.
pub const REPORT_RATE_FLOOR: f64 = 1e-12;

impl UtilityFunction {
    /// `ln(rate in Mbit per slot)`.
    pub fn ln_mbit() -> Self {
        UtilityFunction {
            shape: UtilityShape::Log,
            unit_bits: 1e6,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self.shape {
            UtilityShape::Log => r.ln(),
            UtilityShape::Linear => r,
            UtilityShape::Quadratic { peak } => -(r - peak) * (r - peak),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self.shape {
            UtilityShape::Log => 1.0 / r,
            UtilityShape::Linear => 1.0,
            UtilityShape::Quadratic { peak } => 2.0 * (peak - r),
        }
    }

    /// Utility of a long-run average rate given in bits per slot. The rate is
    /// floored at [`REPORT_RATE_FLOOR`] units so that `ln` stays finite.
    pub fn report_value(&self, avg_bits: f64) -> f64 {
        self.value((avg_bits / self.unit_bits).max(REPORT_RATE_FLOOR))
    }
}

impl Default for UtilityFunction {
    fn default() -> Self {
        Self::ln_mbit()
    }
}

/// Admitted bits for every user in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RateDecision {
    pub admitted_bits: Vec<f64>,
}

/// Closed-form maximizer of `V * U(R) - Q * R` on `[0, r_max]`.
///
/// `q_bits` and `r_max_bits` are converted into utility units internally; the
/// result is returned in bits.
pub fn optimal_rate(q_bits: f64, v: f64, u: &UtilityFunction, r_max_bits: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let q = q_bits / u.unit_bits;
    let r_max = r_max_bits / u.unit_bits;
    let r = match u.shape {
        UtilityShape::Log => {
            if q <= 0.0 {
                r_max
            } else {
                v / q
            }
        }
        UtilityShape::Linear => {
            if q < v {
                r_max
            } else if q > v {
                0.0
            } else {
                r_max
            }
        }
        UtilityShape::Quadratic { peak } => peak - q / (2.0 * v),
    };
    r.clamp(0.0, r_max) * u.unit_bits
}

/// Bisection on `V * U'(R) - Q` for utilities without a closed form.
pub fn optimal_rate_numeric(q_bits: f64, v: f64, u: &UtilityFunction, r_max_bits: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let q = q_bits / u.unit_bits;
    let r_max = r_max_bits / u.unit_bits;
    let excess = |r: f64| v * u.derivative(r) - q;
    let tol = 1e-9 * r_max;
    let mut lo = 1e-9 * r_max;
    let mut hi = r_max;
    if excess(hi) >= 0.0 {
        return r_max_bits;
    }
    if excess(lo) <= 0.0 {
        return 0.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) * u.unit_bits
}
