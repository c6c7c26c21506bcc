use std::ffi::{c_char, CStr, CString};
use std::ptr;

use noma_ffi::*;

const ETA: f64 = 2e-12;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { noma_last_error_message(buf.as_mut_ptr(), buf.len()) };
    if n == 0 {
        return String::new();
    }
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn dbm_conversion() {
    for (dbm, w) in [(33.0, 1.9952623149688796), (-87.0, 1.9952623149688796e-12)] {
        assert!((noma_dbm_to_watts(dbm) - w).abs() <= 1e-14 * w);
    }
}

#[test]
fn dppa_and_kkt_agree_on_the_reference_instance() {
    // Given in reverse gain order to exercise the order mapping.
    let g = [0.25e-8, 0.5e-8, 1e-8];
    let w = [4e5, 2e5, 1e5];
    let mut p = [f64::NAN; 3];
    let mut obj = 0.0;
    let mut levels = 0usize;
    let s = unsafe { noma_dppa_solve(3, g.as_ptr(), w.as_ptr(), 1e5, ETA, 2.0, p.as_mut_ptr(), &mut obj, &mut levels) };
    assert_eq!(s, NomaStatus::Ok);
    assert_eq!(p, [2.0, 0.0, 0.0]);
    assert!((obj - 2929778.3723510476).abs() <= 1e-9 * obj);
    assert!((2..=3 * 2 / 2 + 3 + 2).contains(&levels));

    let mut q = [f64::NAN; 3];
    let mut kobj = 0.0;
    let s = unsafe { noma_kkt_solve(3, g.as_ptr(), w.as_ptr(), 1e5, ETA, 2.0, q.as_mut_ptr(), &mut kobj) };
    assert_eq!(s, NomaStatus::Ok);
    assert!((kobj - obj).abs() <= 1e-9 * obj);
}

#[test]
fn optional_outputs_may_be_null() {
    let (g, w) = ([2e-9], [3e5]);
    let mut p = [0.0];
    let s = unsafe { noma_dppa_solve(1, g.as_ptr(), w.as_ptr(), 1.5e5, ETA, 5.0, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, NomaStatus::Ok);
    assert!((p[0] - 1.999).abs() < 1e-9);
}

#[test]
fn argument_errors() {
    let (g, w) = ([1e-8, 1e-9], [1.0, 1.0]);
    let mut p = [0.0; 2];
    let s = unsafe { noma_dppa_solve(2, ptr::null(), w.as_ptr(), 1.0, ETA, 2.0, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, NomaStatus::NullPointer);
    assert!(last_error().contains("gains"));

    let s = unsafe { noma_dppa_solve(0, g.as_ptr(), w.as_ptr(), 1.0, ETA, 2.0, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, NomaStatus::InvalidArgument);

    let s = unsafe { noma_dppa_solve(2, g.as_ptr(), w.as_ptr(), -1.0, ETA, 2.0, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, NomaStatus::InvalidArgument);
    assert!(!last_error().is_empty());

    let g21 = [1e-8; 21];
    let w21 = [1.0; 21];
    let mut p21 = [0.0; 21];
    let s = unsafe { noma_kkt_solve(21, g21.as_ptr(), w21.as_ptr(), 1.0, ETA, 2.0, p21.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, NomaStatus::InvalidArgument);
    assert!(last_error().contains("21"));

    // A successful call clears the message.
    let s = unsafe { noma_dppa_solve(2, g.as_ptr(), w.as_ptr(), 1.0, ETA, 2.0, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, NomaStatus::Ok);
    assert_eq!(unsafe { noma_last_error_message(ptr::null_mut(), 0) }, 0);
}

#[test]
fn short_error_buffer_is_truncated_and_terminated() {
    let mut p = [0.0];
    unsafe { noma_dppa_solve(1, ptr::null(), ptr::null(), 1.0, ETA, 2.0, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    let mut buf = [1 as c_char; 4];
    let need = unsafe { noma_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(need > 4);
    assert_eq!(buf[3], 0);
}

#[test]
fn status_strings() {
    let s = unsafe { CStr::from_ptr(noma_status_str(NomaStatus::Solver)) };
    assert_eq!(s.to_str().unwrap(), "solver failure");
}

fn new_sim(toml: &str) -> (NomaStatus, *mut NomaSimulation) {
    let text = CString::new(toml).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { noma_simulation_new(text.as_ptr(), &mut h) };
    (s, h)
}

#[test]
fn simulation_lifecycle() {
    let (s, h) = new_sim("[scenario]\nname = \"scenario3\"\n[control]\nhorizon = 300\nseed = 4\n");
    assert_eq!(s, NomaStatus::Ok);
    assert!(!h.is_null());
    unsafe {
        assert_eq!(noma_simulation_user_count(h), 3);
        assert_eq!(noma_simulation_step(h, 100), NomaStatus::Ok);
        assert_eq!(noma_simulation_slot(h), 100);
        assert_eq!(noma_simulation_run(h), NomaStatus::Ok);
        assert_eq!(noma_simulation_slot(h), 300);
        assert_eq!(noma_simulation_step(h, 10), NomaStatus::Ok);
        assert_eq!(noma_simulation_slot(h), 300);

        let mut q = [0u64; 3];
        assert_eq!(noma_simulation_backlogs(h, q.as_mut_ptr(), 3), NomaStatus::Ok);
        assert!(q.iter().all(|&x| x > 0));
        assert_eq!(noma_simulation_backlogs(h, q.as_mut_ptr(), 2), NomaStatus::InvalidArgument);

        let mut m = NomaMetrics::default();
        let mut rate = [0.0; 3];
        assert_eq!(
            noma_simulation_metrics(h, &mut m, rate.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 3),
            NomaStatus::Ok
        );
        assert_eq!(m.slots, 300);
        assert!(m.max_slot_power_w <= noma_dbm_to_watts(33.0) * (1.0 + 1e-12));
        assert!(rate[0] > rate[2] && rate[2] > 0.0);
        noma_simulation_free(h);
        noma_simulation_free(ptr::null_mut());
    }
}

#[test]
fn simulation_matches_the_core_library() {
    let doc = "[scenario]\ndistances_m = [50.0, 120.0]\n[control]\nhorizon = 200\npolicy = \"oma\"\n";
    let (s, h) = new_sim(doc);
    assert_eq!(s, NomaStatus::Ok);
    let mut m = NomaMetrics::default();
    unsafe {
        noma_simulation_run(h);
        noma_simulation_metrics(h, &mut m, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), 0);
        noma_simulation_free(h);
    }
    let direct = noma_core::sim::run_simulation(&noma_core::config::parse_config(doc).unwrap()).unwrap();
    assert_eq!(m.utility, direct.utility);
    assert_eq!(m.avg_power_w, direct.avg_power_w);
}

#[test]
fn bad_configs_are_reported() {
    let (s, h) = new_sim("[phy]\np_max_dbm = 30.0\np_mean_dbm = 33.0\n");
    assert_eq!(s, NomaStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains("p_mean_dbm"));

    let (s, _) = new_sim("[phy\n");
    assert_eq!(s, NomaStatus::Config);

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { noma_simulation_new(ptr::null(), &mut h) }, NomaStatus::NullPointer);
    assert_eq!(unsafe { noma_simulation_run(ptr::null_mut()) }, NomaStatus::NullPointer);
}
