//! Exact solver for the single-slot power allocation problem
//!
//! ```text
//! max_p  sum_k w_k ln(1 + p_k g_k / (S_{k-1} g_k + eta)) - z * S_K
//! s.t.   p >= 0,  S_K <= p_max,         S_k = p_1 + ... + p_k
//! ```
//!
//! with users indexed in non-increasing gain order. At any KKT point every
//! prefix sum `S_k` belongs to a finite candidate set (pairwise crossing
//! points of the marginal utilities, single-user water levels, `0` and
//! `p_max`), so the problem reduces to choosing a non-decreasing path of
//! prefix levels through that set. The dynamic program below walks that path
//! one user at a time.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::phy::PowerAllocation;

/// Queue-derived weights and the power-debt price for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveWeights {
    /// One weight per user, in whatever order the caller keeps users.
    pub w: Vec<f64>,
    pub z: f64,
}

impl EffectiveWeights {
    pub fn new(w: Vec<f64>, z: f64) -> Result<Self> {
        if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::invalid("weights", format!("{x} is not finite and >= 0")));
        }
        if !(z.is_finite() && z >= 0.0) {
            return Err(Error::invalid("z", format!("{z} is not finite and >= 0")));
        }
        Ok(EffectiveWeights { w, z })
    }

    /// Weights from backlogs: `w_i = (Q_i / unit) * (W tau / unit) / ln 2`, so
    /// that `w_i * ln(1 + sinr)` is the backlog times the deliverable data,
    /// both measured in `unit_bits`.
    pub fn from_backlogs(backlog_bits: &[f64], symbols_per_slot: f64, unit_bits: f64, z: f64) -> Result<Self> {
        let scale = symbols_per_slot / unit_bits / std::f64::consts::LN_2;
        let w = backlog_bits.iter().map(|q| q / unit_bits * scale).collect();
        Self::new(w, z)
    }
}

/// `w ln(1 + p g / (prefix g + eta)) - z p`: contribution of one user that
/// transmits `p` on top of `prefix` watts allocated to stronger users.
#[inline]
pub fn marginal_gain(w: f64, g: f64, z: f64, eta: f64, prefix: f64, p: f64) -> f64 {
    w * (p * g / (prefix * g + eta)).ln_1p() - z * p
}

/// A power allocation instance with users in decoding (non-increasing gain)
/// order, plus the map back to original user indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    weights: Vec<f64>,
    gains: Vec<f64>,
    z: f64,
    eta: f64,
    p_max: f64,
    order: Vec<usize>,
}

impl PowerProblem {
    /// Instance whose users are already sorted by non-increasing gain.
    pub fn sorted(weights: Vec<f64>, gains: Vec<f64>, z: f64, eta: f64, p_max: f64) -> Result<Self> {
        let k = gains.len();
        Self::build(weights, gains, z, eta, p_max, (0..k).collect())
    }

    /// Instance for one channel realization; `weights.w` is in original
    /// user order.
    pub fn from_channel(weights: &EffectiveWeights, chan: &ChannelRealization, eta: f64, p_max: f64) -> Result<Self> {
        if weights.w.len() != chan.user_count() {
            return Err(Error::DimensionMismatch {
                expected: chan.user_count(),
                got: weights.w.len(),
            });
        }
        let order = chan.sort_perm().to_vec();
        let w = order.iter().map(|&i| weights.w[i]).collect();
        Self::build(w, chan.sorted_gains(), weights.z, eta, p_max, order)
    }

    fn build(weights: Vec<f64>, gains: Vec<f64>, z: f64, eta: f64, p_max: f64, order: Vec<usize>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("gains", "at least one user is required"));
        }
        if weights.len() != gains.len() {
            return Err(Error::DimensionMismatch {
                expected: gains.len(),
                got: weights.len(),
            });
        }
        let EffectiveWeights { w: weights, z } = EffectiveWeights::new(weights, z)?;
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid("gains", format!("{g} is not finite and >= 0")));
        }
        if gains.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("gains", "must be sorted in non-increasing order"));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid("eta", format!("{eta} must be finite and > 0")));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::invalid("p_max", format!("{p_max} must be finite and > 0")));
        }
        Ok(PowerProblem {
            weights,
            gains,
            z,
            eta,
            p_max,
            order,
        })
    }

    pub fn user_count(&self) -> usize {
        self.gains.len()
    }

    /// Weights in decoding order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Gains in decoding order.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// `order()[k]` is the original index of the k-th strongest user.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Same instance with every weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Self {
        PowerProblem {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }

    /// `f_k(prefix, p)` for user `k` in decoding order.
    #[inline]
    pub fn f(&self, k: usize, prefix: f64, p: f64) -> f64 {
        marginal_gain(self.weights[k], self.gains[k], self.z, self.eta, prefix, p)
    }

    /// Objective evaluated directly from powers given in decoding order.
    pub fn objective_sorted(&self, powers: &[f64]) -> f64 {
        let mut prefix = 0.0;
        let mut total = 0.0;
        for (k, &p) in powers.iter().enumerate() {
            total += self.f(k, prefix, p);
            prefix += p;
        }
        total
    }

    pub fn to_original(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; sorted.len()];
        for (k, &user) in self.order.iter().enumerate() {
            out[user] = sorted[k];
        }
        out
    }

    pub fn to_sorted(&self, original: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&user| original[user]).collect()
    }

    /// Wraps decoding-order powers into an allocation in original order.
    pub fn allocation(&self, sorted_powers: &[f64], objective: f64) -> PowerAllocation {
        PowerAllocation {
            powers: self.to_original(sorted_powers),
            objective,
        }
    }
}

/// Objective of an allocation (original user order), computed term by term
/// without touching any solver state.
pub fn objective_value(alloc: &PowerAllocation, problem: &PowerProblem) -> f64 {
    problem.objective_sorted(&problem.to_sorted(&alloc.powers))
}

/// Upper bound on the number of candidate prefix levels for `k` users.
pub fn candidate_bound(k: usize) -> usize {
    k * (k - 1) / 2 + k + 2
}

/// Sorted, deduplicated prefix-power levels `0 = pi_1 < ... < pi_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pi: Vec<f64>,
}

impl CandidateSet {
    pub fn levels(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// True if `x` lies within `tol` of some level.
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        let idx = self.pi.partition_point(|&v| v < x - tol);
        self.pi.get(idx).is_some_and(|&v| (v - x).abs() <= tol)
    }
}

/// Pairwise level where users `i < j` (decoding order) have equal marginal
/// utility; `None` when the weights coincide.
pub fn pairwise_level(w_i: f64, g_i: f64, w_j: f64, g_j: f64, eta: f64) -> Option<f64> {
    let den = g_i * g_j * (w_i - w_j);
    if den == 0.0 {
        return None;
    }
    let v = eta * (g_j * w_j - g_i * w_i) / den;
    v.is_finite().then_some(v)
}

/// Water level `w / z - eta / g` of a single user; `None` when `z = 0`.
pub fn water_level(w: f64, g: f64, z: f64, eta: f64) -> Option<f64> {
    if z == 0.0 {
        return None;
    }
    let v = w / z - eta / g;
    v.is_finite().then_some(v)
}

pub fn build_candidate_set(problem: &PowerProblem) -> CandidateSet {
    let k = problem.user_count();
    let (w, g, eta, p_max) = (problem.weights(), problem.gains(), problem.eta, problem.p_max);
    let inside = |v: &f64| (0.0..=p_max).contains(v);

    let mut raw = Vec::with_capacity(candidate_bound(k));
    raw.push(0.0);
    raw.push(p_max);
    for i in 0..k {
        for j in i + 1..k {
            raw.extend(pairwise_level(w[i], g[i], w[j], g[j], eta).filter(inside));
        }
        raw.extend(water_level(w[i], g[i], problem.z, eta).filter(inside));
    }
    for v in &mut raw {
        *v += 0.0;
    }
    raw.sort_by(f64::total_cmp);

    let tol = 1e-12 * p_max;
    let mut pi: Vec<f64> = Vec::with_capacity(raw.len());
    for v in raw {
        match pi.last() {
            Some(&last) if v - last <= tol => {}
            _ => pi.push(v),
        }
    }
    assert!(
        pi.len() <= candidate_bound(k),
        "candidate set of size {} exceeds bound {} for K = {k}",
        pi.len(),
        candidate_bound(k)
    );
    CandidateSet { pi }
}

/// Which form of the Bellman recursion fills the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recursion {
    /// `H(l,k) = max_{l' <= l} H(l',k-1) + f_k(pi_l', pi_l - pi_l')`, the
    /// textbook O(K L^2) sweep.
    #[default]
    Bellman,
    /// Same recursion after telescoping
    /// `f_k(a, b - a) = A_k(b) - A_k(a)` with `A_k(x) = w_k ln(x g_k + eta) - z x`,
    /// which turns the inner max into a running prefix maximum: O(K L).
    PrefixMax,
}

/// `H(l,k)` values and argmax back-pointers, stored column-major by user.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTable {
    levels: usize,
    users: usize,
    h: Vec<f64>,
    back: Vec<usize>,
}

impl DpTable {
    fn new(levels: usize, users: usize) -> Self {
        DpTable {
            levels,
            users,
            h: vec![f64::NEG_INFINITY; levels * users],
            back: vec![0; levels * users],
        }
    }

    #[inline]
    fn idx(&self, l: usize, k: usize) -> usize {
        k * self.levels + l
    }

    /// Best objective of the first `k + 1` users with prefix sum `pi_l`.
    pub fn h(&self, l: usize, k: usize) -> f64 {
        self.h[self.idx(l, k)]
    }

    /// Level index of the prefix sum before user `k` on the best path into
    /// `(l, k)`. Always `<= l`; zero for the first user.
    pub fn back(&self, l: usize, k: usize) -> usize {
        self.back[self.idx(l, k)]
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn users(&self) -> usize {
        self.users
    }
}

#[derive(Debug, Clone)]
pub struct DppaSolution {
    pub allocation: PowerAllocation,
    pub candidates: CandidateSet,
    pub table: DpTable,
    /// Prefix sums `S_1..S_K` of the returned allocation, decoding order.
    pub prefix_sums: Vec<f64>,
    /// Number of `f_k` (or telescoped `A_k`) evaluations spent on the table.
    pub f_evaluations: u64,
}

/// Globally optimal allocation via the Bellman recursion.
pub fn dppa_solve(problem: &PowerProblem) -> PowerAllocation {
    dppa_solve_with(problem, Recursion::Bellman).allocation
}

pub fn dppa_solve_with(problem: &PowerProblem, recursion: Recursion) -> DppaSolution {
    let candidates = build_candidate_set(problem);
    let pi = candidates.levels();
    let (levels, users) = (pi.len(), problem.user_count());
    let mut table = DpTable::new(levels, users);
    let mut evals: u64 = 0;

    for (l, &level) in pi.iter().enumerate() {
        let at = table.idx(l, 0);
        table.h[at] = problem.f(0, 0.0, level);
        evals += 1;
    }

    match recursion {
        Recursion::Bellman => {
            for k in 1..users {
                for l in 0..levels {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for lp in 0..=l {
                        let v = table.h(lp, k - 1) + problem.f(k, pi[lp], pi[l] - pi[lp]);
                        if v > best {
                            best = v;
                            arg = lp;
                        }
                    }
                    evals += l as u64 + 1;
                    let at = table.idx(l, k);
                    table.h[at] = best;
                    table.back[at] = arg;
                }
            }
        }
        Recursion::PrefixMax => {
            let (eta, z) = (problem.eta, problem.z);
            for k in 1..users {
                let (w, g) = (problem.weights[k], problem.gains[k]);
                let potential = |x: f64| w * (x * g + eta).ln() - z * x;
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (l, &level) in pi.iter().enumerate() {
                    let a = potential(level);
                    let v = table.h(l, k - 1) - a;
                    if v > best {
                        best = v;
                        arg = l;
                    }
                    let at = table.idx(l, k);
                    table.h[at] = best + a;
                    table.back[at] = arg;
                }
                evals += 2 * levels as u64;
            }
        }
    }

    let budget = (users * levels * levels) as u64;
    assert!(evals <= budget, "DP used {evals} evaluations, above K L^2 = {budget}");

    let mut l_star = 0;
    for l in 1..levels {
        if table.h(l, users - 1) > table.h(l_star, users - 1) {
            l_star = l;
        }
    }

    let mut path = vec![0usize; users];
    path[users - 1] = l_star;
    for k in (1..users).rev() {
        path[k - 1] = table.back(path[k], k);
    }
    let prefix_sums: Vec<f64> = path.iter().map(|&l| pi[l]).collect();
    let mut powers = Vec::with_capacity(users);
    let mut prev = 0.0;
    for &s in &prefix_sums {
        powers.push((s - prev).max(0.0));
        prev = s;
    }

    let objective = match recursion {
        Recursion::Bellman => table.h(l_star, users - 1),
        Recursion::PrefixMax => problem.objective_sorted(&powers),
    };
    DppaSolution {
        allocation: problem.allocation(&powers, objective),
        candidates,
        table,
        prefix_sums,
        f_evaluations: evals,
    }
}
