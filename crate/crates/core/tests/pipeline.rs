use noma_core::baselines::SchedulerPolicy;
use noma_core::channel::{ChannelRealization, RngState};
use noma_core::config::{parse_config, RunConfig};
use noma_core::dppa::{dppa_solve, dppa_solve_with, objective_value, Recursion};
use noma_core::experiments::{run_comparison, ScenarioPreset};
use noma_core::oracle::{grid_search_solve, kkt_enumerate_solve, lipschitz_bound, random_problem};
use noma_core::report::{write_summary, SUMMARY_HEADER};
use noma_core::sim::{controller_step, run_simulation, Simulation};

#[test]
fn config_to_metrics() {
    let cfg = parse_config("[scenario]\nname = \"scenario2\"\n[control]\nhorizon = 400\nseed = 12\n").unwrap();
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.slots, 400);
    assert!(a.avg_power_w <= cfg.phy.p_max_w);
    assert!(a.max_slot_power_w <= cfg.phy.p_max_w * (1.0 + 1e-12));
    let served: f64 = a.avg_served_bits.iter().sum();
    assert!(served > 0.0);
}

#[test]
fn emitted_config_reproduces_the_simulation() {
    let cfg = RunConfig::from_toml("[scenario]\ndistances_m = [40.0, 90.0, 160.0]\n[control]\nv = 12.5\nhorizon = 100\n").unwrap();
    let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(
        run_simulation(&cfg.sim_config().unwrap()).unwrap(),
        run_simulation(&again.sim_config().unwrap()).unwrap()
    );
}

#[test]
fn controller_allocation_is_optimal_on_live_states() {
    // Solve the problems the simulator actually produces with every exact
    // method and compare.
    let cfg = parse_config("[scenario]\nname = \"scenario3\"\n[control]\nhorizon = 300\n").unwrap();
    let mut sim = Simulation::new(cfg.clone()).unwrap();
    let mut checked = 0;
    for _ in 0..300 {
        let rec = sim.step().unwrap();
        if rec.before.q.iter().all(|&q| q == 0) {
            continue;
        }
        let weights = noma_core::sim::controller_weights(&rec.before, &cfg).unwrap();
        let problem =
            noma_core::dppa::PowerProblem::from_channel(&weights, &rec.channel, cfg.phy.noise_w, cfg.phy.p_max_w)
                .unwrap();
        let kkt = kkt_enumerate_solve(&problem).unwrap();
        let used = objective_value(&rec.allocation, &problem);
        assert!((used - kkt.objective).abs() <= 1e-9 * kkt.objective.abs().max(1.0));
        let (_, again) = controller_step(&rec.before, &rec.channel, &cfg).unwrap();
        assert_eq!(again, rec.allocation);
        checked += 1;
    }
    assert!(checked > 250);
}

#[test]
fn grid_search_brackets_the_dp_on_small_instances() {
    let mut rng = RngState::from_seed(41);
    for k in [1, 2] {
        for _ in 0..5 {
            let problem = random_problem(&mut rng, k).unwrap();
            let r = 1e-3;
            let grid = grid_search_solve(&problem, r).unwrap();
            let dp = dppa_solve(&problem);
            let slack = lipschitz_bound(&problem) * r * k as f64;
            assert!(grid.objective <= dp.objective + 1e-9 * dp.objective.abs().max(1.0));
            assert!(grid.objective >= dp.objective - slack);
        }
    }
}

#[test]
fn recursions_agree_at_forty_users() {
    let mut rng = RngState::from_seed(3);
    for _ in 0..5 {
        let problem = random_problem(&mut rng, 40).unwrap();
        let a = dppa_solve_with(&problem, Recursion::Bellman);
        let b = dppa_solve_with(&problem, Recursion::PrefixMax);
        let scale = a.allocation.objective.abs().max(1.0);
        assert!((a.allocation.objective - b.allocation.objective).abs() <= 1e-9 * scale);
        assert!(b.f_evaluations < a.f_evaluations || a.candidates.len() <= 2);
    }
}

#[test]
fn scenario1_symmetric_users_get_similar_service() {
    let preset = ScenarioPreset::scenario1()
        .with_horizon(3000)
        .with_seeds(vec![1])
        .with_policies(vec![SchedulerPolicy::NomaOpt]);
    let r = run_comparison(&preset, 30.0).unwrap();
    let rates = &r.points[0].rate_mbps;
    let (lo, hi) = rates.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 1.15, "{rates:?}");
}

#[test]
fn summary_csv_is_rfc4180() {
    let preset = ScenarioPreset::scenario2().with_horizon(50).with_seeds(vec![1, 2]);
    let r = run_comparison(&preset, 30.0).unwrap();
    let mut buf = Vec::new();
    write_summary(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(&SUMMARY_HEADER.join(",")));
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5 * 5);
    assert!(rows.iter().all(|r| r.len() == SUMMARY_HEADER.len() && &r[1] == "1;2"));
}

#[test]
fn sorted_gains_are_handled_in_any_input_order() {
    let chan = ChannelRealization::from_gains(vec![1e-9, 5e-8, 2e-8]).unwrap();
    assert_eq!(chan.sort_perm(), &[1, 2, 0]);
}
