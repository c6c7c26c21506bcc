//! Built-in scenarios and the sweeps run over them.
//!
//! Every (policy, V, K, seed) tuple is an independent run. Runs are farmed
//! out to the rayon pool and collected back in job order, so a report only
//! depends on its inputs.

use rayon::prelude::*;

use crate::baselines::SchedulerPolicy;
use crate::channel::Topology;
use crate::dppa::Recursion;
use crate::error::{Error, Result};
use crate::phy::PhyConfig;
use crate::sim::{run_simulation, SimConfig, SimMetrics};

pub const DEFAULT_HORIZON: u64 = 50_000;
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
pub const USERCOUNT_K: [usize; 4] = [5, 10, 20, 40];

/// `n` points spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

/// The default V grid: 9 points from 0.1 to 1000.
pub fn default_v_grid() -> Vec<f64> {
    log_spaced(0.1, 1000.0, 9)
}

/// `k` users at equal intervals from 50 m to 150 m.
pub fn usercount_distances(k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::invalid("k", format!("user-count sweep needs K >= 2, got {k}")));
    }
    Ok((0..k).map(|i| 50.0 + 100.0 * i as f64 / (k - 1) as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPreset {
    pub name: String,
    pub distances: Vec<f64>,
    pub pathloss_exponent: f64,
    pub v: f64,
    pub v_list: Vec<f64>,
    pub k_list: Vec<usize>,
    pub policies: Vec<SchedulerPolicy>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub phy: PhyConfig,
    pub recursion: Recursion,
    pub record_traces: bool,
}

impl ScenarioPreset {
    fn base(name: &str, distances: Vec<f64>, v: f64) -> Self {
        ScenarioPreset {
            name: name.to_string(),
            distances,
            pathloss_exponent: 4.0,
            v,
            v_list: default_v_grid(),
            k_list: Vec::new(),
            policies: SchedulerPolicy::ALL.to_vec(),
            horizon: DEFAULT_HORIZON,
            seeds: DEFAULT_SEEDS.to_vec(),
            phy: PhyConfig::default(),
            recursion: Recursion::PrefixMax,
            record_traces: false,
        }
    }

    /// Five users, all at 100 m.
    pub fn scenario1() -> Self {
        Self::base("scenario1", vec![100.0; 5], 30.0)
    }

    /// Five users at 60, 80, 100, 120 and 140 m.
    pub fn scenario2() -> Self {
        Self::base("scenario2", vec![60.0, 80.0, 100.0, 120.0, 140.0], 30.0)
    }

    /// Three users at 20, 100 and 200 m.
    pub fn scenario3() -> Self {
        Self::base("scenario3", vec![20.0, 100.0, 200.0], 50.0)
    }

    /// K users spread over 50 to 150 m; `distances` holds the K = 5 layout.
    pub fn usercount() -> Self {
        let mut p = Self::base("usercount", usercount_distances(5).unwrap(), 20.0);
        p.k_list = USERCOUNT_K.to_vec();
        p
    }

    pub fn names() -> [&'static str; 4] {
        ["scenario1", "scenario2", "scenario3", "usercount"]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "scenario1" => Ok(Self::scenario1()),
            "scenario2" => Ok(Self::scenario2()),
            "scenario3" => Ok(Self::scenario3()),
            "usercount" => Ok(Self::usercount()),
            _ => Err(Error::invalid(
                "scenario.name",
                format!("unknown preset `{name}` (expected one of {})", Self::names().join(", ")),
            )),
        }
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_policies(mut self, policies: Vec<SchedulerPolicy>) -> Self {
        self.policies = policies;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.phy.validate()?;
        Topology::new(self.distances.clone(), self.pathloss_exponent)?;
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least one slot"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "need at least one seed"));
        }
        if self.policies.is_empty() {
            return Err(Error::invalid("policies", "need at least one policy"));
        }
        Ok(())
    }

    fn sim_config(&self, distances: &[f64], v: f64, policy: SchedulerPolicy, seed: u64) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(
            self.phy,
            Topology::new(distances.to_vec(), self.pathloss_exponent)?,
            v,
            policy,
            self.horizon,
            seed,
        );
        cfg.recursion = self.recursion;
        cfg.record_traces = self.record_traces;
        Ok(cfg)
    }
}

/// One simulation inside a report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub preset: String,
    pub policy: SchedulerPolicy,
    pub v: f64,
    pub seed: u64,
    pub distances: Vec<f64>,
    pub metrics: SimMetrics,
}

impl RunRecord {
    pub fn k(&self) -> usize {
        self.distances.len()
    }
}

/// Seed-averaged results for one (policy, V, K).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub preset: String,
    pub policy: SchedulerPolicy,
    pub v: f64,
    pub seeds: Vec<u64>,
    pub distances: Vec<f64>,
    pub rate_mbps: Vec<f64>,
    pub delay_slots: Vec<f64>,
    pub delay_ms: Vec<f64>,
    pub backlog_bits: Vec<f64>,
    pub backlog_mbit: Vec<f64>,
    pub utility: f64,
    pub avg_power_w: f64,
    pub overall_delay_ms: f64,
    pub total_backlog_mbit: f64,
}

impl PointSummary {
    pub fn k(&self) -> usize {
        self.distances.len()
    }

    fn from_runs(runs: &[&RunRecord]) -> Self {
        let first = runs[0];
        let n = runs.len() as f64;
        let k = first.k();
        let mean = |f: &dyn Fn(&SimMetrics) -> f64| runs.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
        let per_user = |f: &dyn Fn(&SimMetrics, usize) -> f64| {
            (0..k)
                .map(|i| runs.iter().map(|r| f(&r.metrics, i)).sum::<f64>() / n)
                .collect::<Vec<_>>()
        };
        PointSummary {
            preset: first.preset.clone(),
            policy: first.policy,
            v: first.v,
            seeds: runs.iter().map(|r| r.seed).collect(),
            distances: first.distances.clone(),
            rate_mbps: per_user(&|m, i| m.rate_mbps(i)),
            delay_slots: per_user(&|m, i| m.avg_delay_slots[i]),
            delay_ms: per_user(&|m, i| m.delay_ms(i)),
            backlog_bits: per_user(&|m, i| m.avg_backlog_bits[i]),
            backlog_mbit: per_user(&|m, i| m.backlog_mbit(i)),
            utility: mean(&|m| m.utility),
            avg_power_w: mean(&|m| m.avg_power_w),
            overall_delay_ms: mean(&|m| m.overall_delay_ms()),
            total_backlog_mbit: mean(&|m| m.total_backlog_mbit()),
        }
    }
}

/// NOMA-OPT against one baseline at a given (V, K).
#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub preset: String,
    pub v: f64,
    pub k: usize,
    pub baseline: SchedulerPolicy,
    /// `U(NOMA-OPT) - U(baseline)`.
    pub utility_gain: f64,
    /// Overall delay of NOMA-OPT divided by that of the baseline.
    pub delay_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub runs: Vec<RunRecord>,
    pub points: Vec<PointSummary>,
    pub gains: Vec<GainRow>,
}

impl ComparisonReport {
    pub fn point(&self, policy: SchedulerPolicy, v: f64, k: usize) -> Option<&PointSummary> {
        self.points
            .iter()
            .find(|p| p.policy == policy && p.v == v && p.k() == k)
    }

    pub fn gain(&self, baseline: SchedulerPolicy, v: f64, k: usize) -> Option<&GainRow> {
        self.gains
            .iter()
            .find(|g| g.baseline == baseline && g.v == v && g.k == k)
    }

    fn from_runs(runs: Vec<RunRecord>, seeds: usize) -> Self {
        let points: Vec<PointSummary> = runs
            .chunks(seeds)
            .map(|c| PointSummary::from_runs(&c.iter().collect::<Vec<_>>()))
            .collect();
        let mut gains = Vec::new();
        for opt in points.iter().filter(|p| p.policy == SchedulerPolicy::NomaOpt) {
            for base in points
                .iter()
                .filter(|p| p.policy != SchedulerPolicy::NomaOpt && p.v == opt.v && p.k() == opt.k())
            {
                gains.push(GainRow {
                    preset: opt.preset.clone(),
                    v: opt.v,
                    k: opt.k(),
                    baseline: base.policy,
                    utility_gain: opt.utility - base.utility,
                    delay_ratio: if base.overall_delay_ms > 0.0 {
                        opt.overall_delay_ms / base.overall_delay_ms
                    } else {
                        f64::NAN
                    },
                });
            }
        }
        ComparisonReport { runs, points, gains }
    }
}

struct Job {
    distances: Vec<f64>,
    v: f64,
    policy: SchedulerPolicy,
    seed: u64,
}

/// Runs jobs in parallel; consecutive `seeds.len()` jobs form one point.
fn execute(preset: &ScenarioPreset, jobs: Vec<Job>) -> Result<ComparisonReport> {
    let runs = jobs
        .into_par_iter()
        .map(|job| {
            let cfg = preset.sim_config(&job.distances, job.v, job.policy, job.seed)?;
            Ok(RunRecord {
                preset: preset.name.clone(),
                policy: job.policy,
                v: job.v,
                seed: job.seed,
                metrics: run_simulation(&cfg)?,
                distances: job.distances,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport::from_runs(runs, preset.seeds.len()))
}

fn grid_jobs(preset: &ScenarioPreset, layouts: &[Vec<f64>], v_list: &[f64]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for distances in layouts {
        for &v in v_list {
            for &policy in &preset.policies {
                for &seed in &preset.seeds {
                    jobs.push(Job {
                        distances: distances.clone(),
                        v,
                        policy,
                        seed,
                    });
                }
            }
        }
    }
    jobs
}

/// Every policy of the preset at every V in `v_list`.
pub fn run_v_sweep(preset: &ScenarioPreset, v_list: &[f64]) -> Result<ComparisonReport> {
    preset.validate()?;
    if let Some(v) = v_list.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid("v", format!("{v} must be finite and >= 0")));
    }
    execute(preset, grid_jobs(preset, std::slice::from_ref(&preset.distances), v_list))
}

/// Every policy of the preset at a single V.
pub fn run_comparison(preset: &ScenarioPreset, v: f64) -> Result<ComparisonReport> {
    run_v_sweep(preset, &[v])
}

/// Every policy at each K in `k_list`, users spread over 50 to 150 m.
pub fn run_usercount_sweep(preset: &ScenarioPreset, k_list: &[usize], v: f64) -> Result<ComparisonReport> {
    preset.validate()?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::invalid("v", format!("{v} must be finite and >= 0")));
    }
    let layouts = k_list
        .iter()
        .map(|&k| usercount_distances(k))
        .collect::<Result<Vec<_>>>()?;
    execute(preset, grid_jobs(preset, &layouts, &[v]))
}

/// Ranks starting at 1, ties sharing their mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &id in &idx[i..=j] {
            r[id] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
