use std::fs;
use std::process::{Command, Output};

fn topocbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topocbt")).args(args).env_remove("TOPOCBT_LOG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SCENARIOS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios");

#[test]
fn run_builtin_car_trading() {
    let o = topocbt(&["run", "--scenario", "car-trading", "--seed", "1", "--protocol", "topocbt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("txn,protocol,status,"));
    assert!(lines.next().unwrap().starts_with("1,topocbt,committed,3,"));
    assert!(lines.next().unwrap().starts_with("digest,"));
}

#[test]
fn run_writes_csv_and_wal_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| (dir.path().join(format!("r{i}.csv")), dir.path().join(format!("r{i}.wal")))).collect();
    for (csv, wal) in &paths {
        let scenario = format!("{SCENARIOS}/suite/update-failure.scn");
        let o = topocbt(&[
            "run",
            "--scenario",
            &scenario,
            "--seed",
            "3",
            "--out",
            csv.to_str().unwrap(),
            "--wal-out",
            wal.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&paths[0].0).unwrap(), fs::read(&paths[1].0).unwrap());
    assert_eq!(fs::read(&paths[0].1).unwrap(), fs::read(&paths[1].1).unwrap());
    assert!(fs::read_to_string(&paths[0].0).unwrap().contains(",aborted,"));
}

#[test]
fn ac2s_walk_away_is_flagged_but_exits_zero() {
    let scenario = format!("{SCENARIOS}/suite/walk-away.scn");
    let o = topocbt(&["run", "--scenario", &scenario, "--protocol", "ac2s"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("partial_commit,1,8,20,0,Alice,"));
    assert!(stdout(&o).contains("VIOLATION"));
}

#[test]
fn empty_scenario_gives_an_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.scn");
    fs::write(&path, "[federation]\nname = empty\n").unwrap();
    let o = topocbt(&["run", "--scenario", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn betti_of_builtins_and_files() {
    let o = topocbt(&["betti", "--scenario", "forked-pair"]);
    assert!(stdout(&o).starts_with("betti=(1, 4, 0, 0)\n"), "{}", stdout(&o));
    let o = topocbt(&["betti", "--scenario", "chain-hole", "--at", "2"]);
    assert!(stdout(&o).starts_with("betti=(1, 1, 0)\n"));
    let tetra = format!("{SCENARIOS}/tetra-join.complex");
    let o = topocbt(&["betti", "--complex", &tetra]);
    assert!(stdout(&o).starts_with("betti=(1, 0, 0, 0)\n"));
}

#[test]
fn betti_writes_complex_and_tags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("forked-pair.complex");
    let o = topocbt(&["betti", "--scenario", "forked-pair", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let complex = fs::read_to_string(&out).unwrap();
    let tags = fs::read_to_string(dir.path().join("forked-pair.complex.tags")).unwrap();
    assert_eq!(complex.lines().count(), tags.lines().count());
    assert_eq!(complex.lines().count(), 8 + 14 + 4 + 1);
    assert!(tags.lines().any(|t| t == "txn:1"));
    // The written file reads back to the same Betti numbers.
    let o = topocbt(&["betti", "--complex", out.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("betti=(1, 4, 0, 0)\n"));
}

#[test]
fn compare_prints_the_marks() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cmp.csv");
    let suite = format!("{SCENARIOS}/suite");
    let o = topocbt(&["compare", "--scenario-dir", &suite, "--seeds", "1,2", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("topocbt,12,") && out.lines().nth(1).unwrap().ends_with(",✓,✓"));
    assert!(out.lines().nth(2).unwrap().ends_with(",✗,✓"));
    assert!(out.lines().nth(3).unwrap().ends_with(",✓,✗"));
    let table = fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("protocol,scenario,seed,status,messages,primitive_ops,space_bytes,worse_off\n"));
}

#[test]
fn fit_passes_on_the_default_grid() {
    let o = topocbt(&["fit", "--grid", "6,4"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict=PASS"));
}

#[test]
fn recover_demo_restores_the_pre_state() {
    let dir = tempfile::tempdir().unwrap();
    let wal = dir.path().join("crash.wal");
    let scenario = format!("{SCENARIOS}/suite/witness-crash.scn");
    let o = topocbt(&["recover", "--wal", wal.to_str().unwrap(), "--scenario", &scenario]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let field = |k: &str| out.lines().find_map(|l| l.strip_prefix(k)).unwrap().to_string();
    assert_eq!(field("digest_before="), field("digest_after="));
    assert_eq!(field("second_pass_noop="), "true");
    assert!(fs::metadata(&wal).unwrap().len() > 0);
}

fn assert_error_line(o: &Output, kind: &str) {
    assert!(!o.status.success());
    let err = stderr(o);
    let line = err.lines().find(|l| l.starts_with("error: kind=")).unwrap_or_else(|| panic!("no error line in {err:?}"));
    assert!(line.starts_with(&format!("error: kind={kind}")), "want {kind}: {line}");
    assert!(line.contains(" msg="));
}

#[test]
fn invalid_input_exits_nonzero_with_an_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    fs::write(&bad, "[chain]\nid = 1\nlength = lots\n").unwrap();
    let o = topocbt(&["run", "--scenario", bad.to_str().unwrap()]);
    assert_error_line(&o, "parse");
    assert!(stderr(&o).contains("line=3 field=length"));

    assert_error_line(&topocbt(&["run", "--scenario", "/no/such/file.scn"]), "io");
    assert_error_line(&topocbt(&["run", "--scenario", "car-trading", "--protocol", "3pc"]), "usage");
    assert_error_line(&topocbt(&["betti", "--scenario", "chain-hole", "--at", "9"]), "run");
    assert_error_line(&topocbt(&["fit", "--grid", "3"]), "usage");
    assert_error_line(&topocbt(&["fit", "--grid", "3,2"]), "fit");
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_error_line(&topocbt(&["compare", "--scenario-dir", empty.to_str().unwrap()]), "usage");
    assert_error_line(&topocbt(&["frobnicate"]), "usage");
    let garbage = dir.path().join("garbage.complex");
    fs::write(&garbage, "0 1\n1 x\n").unwrap();
    assert_error_line(&topocbt(&["betti", "--complex", garbage.to_str().unwrap()]), "parse");
}
