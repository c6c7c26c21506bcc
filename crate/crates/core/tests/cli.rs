use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn noma(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noma"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn solve_prints_the_allocation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("one.toml"),
        "gains = [2e-9]\nweights = [3e5]\nz = 1.5e5\neta_w = 2e-12\np_max_w = 5.0\n",
    )
    .unwrap();
    let o = noma(&["solve", "one.toml"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("1,2e-09,300000,1.999"), "{text}");
    assert!(text.contains("candidate levels L = "));

    fs::write(
        dir.path().join("idle.toml"),
        "gains = [1e-8, 1e-9, 3e-10]\nbacklogs_bits = [0.0, 0.0, 0.0]\nz = 2.0\n",
    )
    .unwrap();
    let o = noma(&["solve", "idle.toml", "--verify"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("objective: 0\n"), "{text}");
    assert!(text.contains("relative gap: 0e0"), "{text}");
}

#[test]
fn verify_reports_the_worst_gap() {
    let dir = tempfile::tempdir().unwrap();
    let o = noma(&["verify", "--instances", "200"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("200 instances"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[phy]\np_max_dbm = 30.0\np_mean_dbm = 33.0\n").unwrap();
    let o = noma(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_mean_dbm"));

    let o = noma(&["run", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    fs::write(dir.path().join("ok.toml"), "[control]\nhorizon = 5\n").unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let o = noma(&["run", "ok.toml", "--out", "blocker/sub"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("blocker"));

    let o = noma(&["sweep-v", "--preset", "scenario9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scenario3_run_has_three_rows_per_policy_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s3.toml"),
        "[scenario]\nname = \"scenario3\"\n[control]\nhorizon = 300\n[output]\ndir = \"first\"\ntraces = true\n",
    )
    .unwrap();
    let all = "noma_opt,oma,single,noma_eq,noma_pro_q";
    assert!(noma(&["run", "s3.toml", "--policies", all], dir.path()).status.success());
    assert!(noma(&["run", "s3.toml", "--policies", all, "--out", "second"], dir.path()).status.success());

    let rows = csv_rows(&dir.path().join("first/summary.csv"));
    assert_eq!(rows.len(), 15);
    for name in ["summary.csv", "gains.csv", "trace.csv"] {
        let a = fs::read(dir.path().join("first").join(name)).unwrap();
        let b = fs::read(dir.path().join("second").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    assert_eq!(csv_rows(&dir.path().join("first/trace.csv")).len(), 5 * 300 * 3);

    assert!(noma(&["run", "s3.toml", "--seed", "8", "--out", "third"], dir.path()).status.success());
    let seeded = csv_rows(&dir.path().join("third/summary.csv"));
    assert_eq!(seeded.len(), 3);
    assert_eq!(&seeded[0][1], "8");
}

#[test]
fn sweeps_write_one_row_per_policy_v_and_user() {
    let dir = tempfile::tempdir().unwrap();
    let o = noma(
        &["sweep-v", "--preset", "scenario1", "--v", "1,10,100", "--policies", "noma_opt", "--horizon", "100", "--seed", "3"],
        dir.path(),
    );
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("out/summary.csv"));
    assert_eq!(rows.len(), 3 * 5);
    assert!(rows.iter().all(|r| &r[2] == "noma_opt"));

    let o = noma(
        &["sweep-k", "--k", "2,3", "--policies", "noma_opt,single", "--horizon", "50", "--seeds", "1,2", "--out", "k"],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(csv_rows(&dir.path().join("k/summary.csv")).len(), 2 * (2 + 3));
    let gains = csv_rows(&dir.path().join("k/gains.csv"));
    assert_eq!(gains.len(), 2);
    assert!(gains.iter().all(|r| &r[3] == "single"));
}
