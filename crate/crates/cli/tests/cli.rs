use std::fs;
use std::path::Path;
use std::process::Command;

use stifflwr_cli::{compare, parse_config, run, sweep, versioned_dir, ConfigError, SolverKind};

const BLOCK: &str = "\
x_min = -1
x_max = 3
n_cells = 200
velocity = affine 2 -1
block = 0 0.5 1
k = 8
t_end = 0.5
output_interval = 0.25
";

const COLLISION: &str = "\
# two saturated blocks meeting at t = ln 3
solver = fronttrack
x_min = -2
x_max = 3
n_cells = 1000
velocity = affine 2 -1
block = -1 -0.5 1
block = 0.5 1 1
k = 256
t_end = 1.4
output_interval = 0.02
";

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.txt" {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = parse_config(BLOCK).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a).unwrap().ok());
    assert!(run(&cfg, &b).unwrap().ok());
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta.len(), 3 + 3, "{:?}", ta.iter().map(|t| &t.0).collect::<Vec<_>>());
    assert_eq!(ta, tb);
    let snap = String::from_utf8(fs::read(a.join("snapshots/snap_0002.txt")).unwrap()).unwrap();
    assert!(snap.starts_with("# t=5.000000000000e-1 k=8 eps=0\n# x rho p\n"));
}

#[test]
fn occupied_out_dir_gets_a_version() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(versioned_dir(&out).unwrap(), out);
    fs::create_dir_all(&out).unwrap();
    assert_eq!(versioned_dir(&out).unwrap(), out);
    fs::write(out.join("x"), "").unwrap();
    assert_eq!(versioned_dir(&out).unwrap(), tmp.path().join("out.v2"));
}

#[test]
fn k_sweep_writes_trend_files() {
    let text = format!("{BLOCK}sweep_k = 16 64 256\nsat_threshold = congested\n")
        .replace("t_end = 0.5", "t_end = 1")
        .replace("n_cells = 200", "n_cells = 1000");
    let cfg = parse_config(&text).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let serial = sweep(&cfg, &tmp.path().join("s"), 1).unwrap();
    let parallel = sweep(&cfg, &tmp.path().join("p"), 3).unwrap();
    assert!(serial.ok() && parallel.ok(), "{:?}", serial.points.iter().map(|p| &p.1).collect::<Vec<_>>());
    assert_eq!(serial.points.len(), 3);
    assert_eq!(read_tree(&tmp.path().join("s")), read_tree(&tmp.path().join("p")));
    let trend = fs::read_to_string(tmp.path().join("s/trend.txt")).unwrap();
    assert_eq!(trend.lines().count(), 4);
    let summary = fs::read_to_string(tmp.path().join("s/trend_summary.txt")).unwrap();
    assert!(summary.contains("frontal_trace_decreasing_in_k = true\n") && summary.contains("complementarity_decreasing_in_k = true"), "{summary}");
}

#[test]
fn empty_sweep_is_a_single_run() {
    let cfg = parse_config(BLOCK).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let r = sweep(&cfg, tmp.path(), 2).unwrap();
    assert_eq!(r.points.len(), 1);
    assert!(r.ok());
}

#[test]
fn collision_comparison() {
    let cfg = parse_config(COLLISION).unwrap();
    assert_eq!(cfg.manifest.solver, SolverKind::FrontTrack);
    let tmp = tempfile::tempdir().unwrap();
    let rep = compare(&cfg, tmp.path()).unwrap();
    assert_eq!(rep.k, 256.0);
    let ln3 = 3f64.ln();
    assert!((rep.merge_time_fronttrack.unwrap() - ln3).abs() < 1e-8);
    assert!(rep.merge_discrepancy().unwrap() < 0.1, "{rep:?}");
    assert!(rep.front_max_error < 0.1, "{rep:?}");
    let events = fs::read_to_string(tmp.path().join("fronttrack/events.txt")).unwrap();
    assert!(events.lines().nth(1).unwrap().ends_with(" 0"));
}

#[test]
fn fronttrack_and_ftl_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let ft = run(&parse_config(COLLISION).unwrap(), &tmp.path().join("ft")).unwrap();
    assert!(ft.ok(), "{ft:?}");
    let ftl_text = BLOCK.replace("k = 8", "k = 4\nsolver = ftl\nagents = 200");
    let o = run(&parse_config(&ftl_text).unwrap(), &tmp.path().join("ftl")).unwrap();
    assert!(o.ok(), "{o:?}");
    assert!(tmp.path().join("ftl/agents.txt").exists());
}

#[test]
fn two_d_run() {
    let text = "solver = fv2d
x_min = -2
x_max = 2
n_cells = 40
y_min = -2
y_max = 2
ny_cells = 40
velocity = radial 0 0 1
block = -1 -0.2 -0.5 0.5 0.6
block = 0.2 1 -0.5 0.5 0.6
k = 16
t_end = 0.5
";
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&parse_config(text).unwrap(), tmp.path()).unwrap();
    assert!(o.ok(), "{o:?}");
    let snap = fs::read_to_string(tmp.path().join("snapshots/snap_0000.txt")).unwrap();
    assert_eq!(snap.lines().count(), 2 + 1600);
}

#[test]
fn validation_errors_name_keys() {
    let cases = [
        ("k = 8", "k = -1", "k"),
        ("t_end = 0.5", "t_end = 0", "t_end"),
        ("block = 0 0.5 1", "block = 0 0.5 1.5", "block"),
        ("block = 0 0.5 1", "block = 0 0.5 0", "block"),
        ("velocity = affine 2 -1", "velocity = affine 2 1", "velocity"),
        ("n_cells = 200", "n_cells = 2", "n_cells"),
    ];
    for (from, to, key) in cases {
        let err = parse_config(&BLOCK.replace(from, to)).unwrap_err();
        assert_eq!(err.key(), Some(key), "{to}: {err}");
    }
    let err = parse_config(&BLOCK.replace("k = 8", "k = 8\nk = 9")).unwrap_err();
    assert!(matches!(err, ConfigError::Parse { line: 7, .. }), "{err}");
    let err = parse_config(&format!("{BLOCK}nonsense\n")).unwrap_err();
    assert!(matches!(err, ConfigError::Parse { line: 9, .. }), "{err}");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stifflwr"))
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("block.cfg");
    fs::write(&cfg, BLOCK).unwrap();
    let out = tmp.path().join("out");
    let ok = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("summary.txt").exists());
    let again = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(again.status.success());
    assert!(tmp.path().join("out.v2/summary.txt").exists());

    let unknown = bin().args(["acceptance", "everything"]).output().unwrap();
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown acceptance suite"));

    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, BLOCK.replace("k = 8", "k = -1")).unwrap();
    let r = bin().arg("run").arg(&bad).output().unwrap();
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("`k`"));
}

#[test]
fn overflow_is_a_failed_run() {
    // the block reaches the right edge well before t_end
    let text = BLOCK.replace("velocity = affine 2 -1", "velocity = constant 3").replace("t_end = 0.5", "t_end = 2");
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&parse_config(&text).unwrap(), tmp.path()).unwrap();
    assert!(!o.ok());
    assert!(o.failures[0].contains("guard band"), "{:?}", o.failures);
}
