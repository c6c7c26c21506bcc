//! Slow, obviously-correct solvers for small power allocation instances:
//! exhaustive enumeration of KKT supports and a uniform simplex grid.

use crate::channel::{sample_gains, RngState, Topology};
use crate::dppa::{pairwise_level, water_level, EffectiveWeights, PowerProblem};
use crate::error::{Error, Result};
use crate::phy::{PhyConfig, PowerAllocation};

/// Largest K the KKT enumeration accepts.
pub const KKT_MAX_USERS: usize = 20;

/// Grid sizes above this are refused.
pub const GRID_MAX_POINTS: f64 = 1e9;

/// Users (decoding order) allowed positive power.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(indices: Vec<usize>, k: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("support", "must be non-empty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.iter().any(|&i| i >= k) {
            return Err(Error::invalid("support", "must be strictly increasing indices below K"));
        }
        Ok(SupportSet(indices))
    }

    fn from_mask(mask: u32, k: usize) -> Self {
        SupportSet((0..k).filter(|i| mask & (1 << i) != 0).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

/// How the last active user's prefix sum is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Peak constraint slack: last marginal utility equals the price `z`.
    Interior,
    /// Peak constraint tight: total power equals `p_max`.
    Boundary,
}

/// Powers (decoding order) implied by a support and closure, or `None` if
/// the stationarity system has no feasible solution.
pub fn support_powers(problem: &PowerProblem, support: &SupportSet, closure: Closure) -> Option<Vec<f64>> {
    let (w, g, eta) = (problem.weights(), problem.gains(), problem.eta());
    let idx = support.indices();
    let mut prefixes = Vec::with_capacity(idx.len());
    for pair in idx.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        prefixes.push(pairwise_level(w[i], g[i], w[j], g[j], eta)?);
    }
    let last = *idx.last().expect("support is non-empty");
    prefixes.push(match closure {
        Closure::Interior => water_level(w[last], g[last], problem.z(), eta)?,
        Closure::Boundary => problem.p_max(),
    });

    let mut powers = vec![0.0; problem.user_count()];
    let mut prev = 0.0;
    for (&user, &s) in idx.iter().zip(&prefixes) {
        let p = s - prev;
        if p.is_nan() || p < 0.0 {
            return None;
        }
        powers[user] = p;
        prev = s;
    }
    (prev <= problem.p_max()).then_some(powers)
}

#[derive(Debug, Clone)]
pub struct KktOutcome {
    pub allocation: PowerAllocation,
    /// Every (support, closure) pair tried plus the all-zero point.
    pub cases_examined: u64,
    pub feasible_cases: u64,
}

/// Best point among all KKT-candidate supports; O(2^K).
pub fn kkt_enumerate(problem: &PowerProblem) -> Result<KktOutcome> {
    let k = problem.user_count();
    if k > KKT_MAX_USERS {
        return Err(Error::TooManyUsers { k, limit: KKT_MAX_USERS });
    }
    let mut best = vec![0.0; k];
    let mut best_value = problem.objective_sorted(&best);
    let mut examined = 1u64;
    let mut feasible = 1u64;

    for mask in 1u32..(1u32 << k) {
        let support = SupportSet::from_mask(mask, k);
        for closure in [Closure::Interior, Closure::Boundary] {
            examined += 1;
            let Some(powers) = support_powers(problem, &support, closure) else {
                continue;
            };
            feasible += 1;
            let value = problem.objective_sorted(&powers);
            if value > best_value {
                best_value = value;
                best = powers;
            }
        }
    }
    Ok(KktOutcome {
        allocation: problem.allocation(&best, best_value),
        cases_examined: examined,
        feasible_cases: feasible,
    })
}

pub fn kkt_enumerate_solve(problem: &PowerProblem) -> Result<PowerAllocation> {
    kkt_enumerate(problem).map(|o| o.allocation)
}

/// Number of lattice points `a >= 0`, `sum a <= n` in `k` dimensions.
fn simplex_points(n: u64, k: usize) -> f64 {
    (1..=k as u64).fold(1.0, |acc, i| acc * (n + i) as f64 / i as f64)
}

/// Best point of the uniform grid `{r a : a in N^K, sum a <= p_max / r}`.
pub fn grid_search_solve(problem: &PowerProblem, resolution: f64) -> Result<PowerAllocation> {
    let k = problem.user_count();
    if k > 4 {
        return Err(Error::TooManyUsers { k, limit: 4 });
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::invalid("resolution", format!("{resolution} must be > 0")));
    }
    let steps = (problem.p_max() / resolution * (1.0 + 1e-12)).floor();
    let points = simplex_points(steps as u64, k);
    if points.is_nan() || points > GRID_MAX_POINTS {
        return Err(Error::GridTooLarge { points });
    }

    struct Search<'a> {
        problem: &'a PowerProblem,
        r: f64,
        current: Vec<f64>,
        best: Vec<f64>,
        best_value: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, k: usize, left: u64, prefix: f64, value: f64) {
            if k == self.current.len() {
                if value > self.best_value {
                    self.best_value = value;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            for a in 0..=left {
                let p = a as f64 * self.r;
                self.current[k] = p;
                let v = value + self.problem.f(k, prefix, p);
                self.visit(k + 1, left - a, prefix + p, v);
            }
        }
    }

    let mut search = Search {
        problem,
        r: resolution,
        current: vec![0.0; k],
        best: vec![0.0; k],
        best_value: f64::NEG_INFINITY,
    };
    search.visit(0, steps as u64, 0.0, 0.0);
    Ok(problem.allocation(&search.best, search.best_value))
}

/// Bound on every partial derivative of the objective over the feasible
/// box: `sum_j w_j g_j / eta + z`. The objective is therefore
/// `lipschitz_bound`-Lipschitz in the L1 norm.
pub fn lipschitz_bound(problem: &PowerProblem) -> f64 {
    problem
        .weights()
        .iter()
        .zip(problem.gains())
        .map(|(w, g)| w * g / problem.eta())
        .sum::<f64>()
        + problem.z()
}

/// Random instance shaped like the simulator's per-slot problems: users
/// between 20 and 200 m with Rayleigh fading, backlogs up to 30 Mbit, a debt
/// price around the mean weight, default noise and peak power. One draw in
/// ten has `z = 0` and another one in ten has equal backlogs.
pub fn random_problem(rng: &mut RngState, k: usize) -> Result<PowerProblem> {
    let phy = PhyConfig::default();
    let distances = (0..k).map(|_| 20.0 + 180.0 * rng.next_uniform()).collect();
    let chan = sample_gains(&Topology::with_distances(distances)?, rng);
    let mut backlogs: Vec<f64> = (0..k).map(|_| (30e6 * rng.next_uniform()).floor()).collect();
    if rng.next_uniform() < 0.1 {
        let q = backlogs[0];
        backlogs.iter_mut().for_each(|b| *b = q);
    }
    let mean_w = EffectiveWeights::from_backlogs(&backlogs, phy.symbols_per_slot(), 1e6, 0.0)?
        .w
        .iter()
        .sum::<f64>()
        / k as f64;
    let z = if rng.next_uniform() < 0.1 {
        0.0
    } else {
        3.0 * rng.next_uniform() * mean_w
    };
    let weights = EffectiveWeights::from_backlogs(&backlogs, phy.symbols_per_slot(), 1e6, z)?;
    PowerProblem::from_channel(&weights, &chan, phy.noise_w, phy.p_max_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dppa::{dppa_solve, objective_value};
    use approx::assert_relative_eq;

    const ETA: f64 = 2e-12;

    #[test]
    fn single_user_matches_water_filling() {
        let p = PowerProblem::sorted(vec![3e5], vec![2e-9], 1.5e5, ETA, 2.0).unwrap();
        let kkt = kkt_enumerate_solve(&p).unwrap();
        assert_eq!(kkt, dppa_solve(&p));
    }

    #[test]
    fn zero_weights_give_zero_point() {
        let p = PowerProblem::sorted(vec![0.0; 3], vec![3e-8, 2e-8, 1e-8], 1.0, ETA, 2.0).unwrap();
        assert!(kkt_enumerate_solve(&p).unwrap().powers.iter().all(|&x| x == 0.0));
        assert!(grid_search_solve(&p, 0.01).unwrap().powers.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn enumeration_counts_every_case() {
        for k in 1..=6 {
            let g: Vec<f64> = (0..k).map(|i| 1e-8 / (i + 1) as f64).collect();
            let w: Vec<f64> = (0..k).map(|i| 1e5 * (i + 1) as f64).collect();
            let p = PowerProblem::sorted(w, g, 1e5, ETA, 2.0).unwrap();
            let out = kkt_enumerate(&p).unwrap();
            assert_eq!(out.cases_examined, 2 * ((1u64 << k) - 1) + 1);
        }
    }

    #[test]
    fn refuses_large_instances() {
        let k = KKT_MAX_USERS + 1;
        let g: Vec<f64> = (0..k).map(|i| 1e-8 / (i + 1) as f64).collect();
        let p = PowerProblem::sorted(vec![1.0; k], g, 1.0, ETA, 2.0).unwrap();
        assert!(matches!(kkt_enumerate(&p), Err(Error::TooManyUsers { .. })));

        let p4 = PowerProblem::sorted(vec![1.0; 4], vec![4e-8, 3e-8, 2e-8, 1e-8], 1.0, ETA, 2.0).unwrap();
        assert!(matches!(grid_search_solve(&p4, 1e-3), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn grid_brackets_single_user_optimum() {
        let (w, g, z) = (3e5, 2e-9, 2e5);
        let p = PowerProblem::sorted(vec![w], vec![g], z, ETA, 2.0).unwrap();
        let r = 1e-3;
        let grid = grid_search_solve(&p, r).unwrap();
        assert!((grid.powers[0] - (w / z - ETA / g)).abs() <= r);
    }

    #[test]
    fn reference_instance_agrees_with_grid() {
        let p = PowerProblem::sorted(vec![1e5, 2e5, 4e5], vec![1e-8, 0.5e-8, 0.25e-8], 1e5, ETA, 2.0).unwrap();
        let kkt = kkt_enumerate_solve(&p).unwrap();
        assert_relative_eq!(kkt.objective, 2_929_778.372_351_047_6, max_relative = 1e-12);
        let r = 2e-3;
        let grid = grid_search_solve(&p, r).unwrap();
        assert!(kkt.objective >= grid.objective);
        assert!(kkt.objective - grid.objective <= lipschitz_bound(&p) * r * 3.0);
        assert_relative_eq!(objective_value(&grid, &p), grid.objective, max_relative = 1e-12);
    }

    #[test]
    fn support_set_validation() {
        assert!(SupportSet::new(vec![], 3).is_err());
        assert!(SupportSet::new(vec![1, 1], 3).is_err());
        assert!(SupportSet::new(vec![0, 3], 3).is_err());
        assert!(SupportSet::new(vec![0, 2], 3).is_ok());
    }
}
