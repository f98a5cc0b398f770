use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bangbang::analysis::{correlation, CellRecord};
use bangbang::io::ProtocolRecord;
use bangbang::protocol::Control;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bangbang"));
    c.env_remove("BANGBANG_OUTPUT_ROOT").env_remove("BANGBANG_THREADS").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every file below `dir`, by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

const FAST: &str = "[pipeline]\ndbmc_sweeps = 10\ncbmc_sweeps = 20\n[run]\nseed = 3\n";

fn write_config(dir: &Path, name: &str, grid: &str) -> String {
    fs::write(dir.join(name), format!("{grid}\n{FAST}")).unwrap();
    name.to_string()
}

/// Reads the non-comment rows of a gnuplot matrix file, header row dropped.
fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn optimize_reaches_threshold_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["optimize", "--M", "4", "--C", "2", "--lnri", "-1.5", "--lnrt", "1.5", "--seed", "7"];
    let a = run(&[&args[..], &["--out", "a", "--verify"]].concat(), tmp.path());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let record = ProtocolRecord::load(&tmp.path().join("a/record.toml")).unwrap();
    assert!((0.018..=0.022).contains(&record.result.dist_state), "{}", record.result.dist_state);
    for f in ["record.toml", "config.toml", "history.dat", "protocol.dat", "trace.log", "switching.dat", "verify.toml"] {
        assert!(tmp.path().join("a").join(f).exists(), "{f}");
    }
    let verify = fs::read_to_string(tmp.path().join("a/verify.toml")).unwrap();
    assert!(verify.contains("consistency_fraction"));

    let b = run(&[&args[..], &["--out", "b"]].concat(), tmp.path());
    assert_eq!(code(&b), 0);
    assert_eq!(fs::read(tmp.path().join("a/record.toml")).unwrap(), fs::read(tmp.path().join("b/record.toml")).unwrap());

    // Standalone verify and baseline read the record without touching it.
    let before = snapshot(&tmp.path().join("a"));
    let v = run(&["verify", "a/record.toml", "--out", "v"], tmp.path());
    assert_eq!(code(&v), 0, "{}", stderr(&v));
    assert_eq!(fs::read(tmp.path().join("v/switching.dat")).unwrap(), fs::read(tmp.path().join("a/switching.dat")).unwrap());
    let base = run(&["baseline", "--record", "a/record.toml", "--out", "bl"], tmp.path());
    assert_eq!(code(&base), 0, "{}", stderr(&base));
    let line = stdout(&base).lines().find(|l| l.contains("adiabatic_dist_state")).unwrap().to_string();
    let d: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(d > 5.0 * 0.02, "{line}");
    assert_eq!(snapshot(&tmp.path().join("a")), before);
}

#[test]
fn usage_and_degenerate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = run(&["optimize", "--M", "4", "--C", "2", "--lnri", "0.5"], tmp.path());
    assert_eq!(code(&missing), 2);

    let same = run(&["optimize", "--M", "4", "--C", "2", "--lnri", "0.5", "--lnrt", "0.5", "--out", "s"], tmp.path());
    assert_eq!(code(&same), 3);
    assert!(stderr(&same).contains("kind = \"states_coincide\""));
    let doc = fs::read_to_string(tmp.path().join("s/error.toml")).unwrap();
    assert!(doc.contains("format_version = 1") && doc.contains("exit_code = 3"));

    let not_square = run(&["optimize", "--M", "5", "--C", "2", "--lnri", "0", "--lnrt", "1"], tmp.path());
    assert_eq!(code(&not_square), 2);
    let bad_c = run(&["overlap", "--M", "4", "--C", "5", "--out", "o"], tmp.path());
    assert_eq!(code(&bad_c), 2);
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["overlap", "--M", "4", "--C", "2", "--points", "3"])
        .env("BANGBANG_OUTPUT_ROOT", tmp.path().join("root"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let made: Vec<_> = fs::read_dir(tmp.path().join("root")).unwrap().flatten().collect();
    assert_eq!(made.len(), 1);
    let m = read_matrix(&made[0].path().join("overlap.dat"));
    for i in 0..3 {
        assert_eq!(m[i][i], 1.0);
        for j in 0..3 {
            assert_eq!(m[i][j], m[j][i]);
        }
    }
}

#[test]
fn sweep_resumes_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "grid.toml", "[grid]\npoints = 3\nln_r_min = -1.5\nln_r_max = 1.5\n");

    let dry = run(&["sweep", "--config", &cfg, "--out", "x", "--dry-run"], tmp.path());
    assert_eq!(code(&dry), 0);
    assert!(stdout(&dry).contains("cells = 9") && stdout(&dry).contains("skipped_estimate = 3"));
    assert!(!tmp.path().join("x").exists());

    let full = run(&["sweep", "--config", &cfg, "--out", "full"], tmp.path());
    assert_eq!(code(&full), 0, "{}", stderr(&full));
    let reference = snapshot(&tmp.path().join("full"));

    let again = run(&["sweep", "--config", &cfg, "--out", "full", "--resume"], tmp.path());
    assert_eq!(code(&again), 0);
    assert!(stdout(&again).contains("computed = 0"));
    assert_eq!(snapshot(&tmp.path().join("full")), reference);

    let refused = run(&["sweep", "--config", &cfg, "--out", "full"], tmp.path());
    assert_eq!(code(&refused), 4);

    let half = run(&["sweep", "--config", &cfg, "--out", "part", "--max-cells", "4"], tmp.path());
    assert_eq!(code(&half), 0);
    assert!(stdout(&half).contains("missing = 5"));
    let rest = run(&["sweep", "--config", &cfg, "--out", "part", "--resume"], tmp.path());
    assert_eq!(code(&rest), 0);
    assert_eq!(snapshot(&tmp.path().join("part")), reference);

    // A damaged cell is moved aside and recomputed.
    let victim = tmp.path().join("part/cells/cell_000_002.toml");
    fs::write(&victim, "format_version = 1\n[cell]\ni = 0\n").unwrap();
    let fixed = run(&["sweep", "--config", &cfg, "--out", "part", "--resume"], tmp.path());
    assert_eq!(code(&fixed), 0);
    assert!(stdout(&fixed).contains("quarantined = 1"));
    assert!(tmp.path().join("part/quarantine/cell_000_002.toml").exists());
    let mut repaired = snapshot(&tmp.path().join("part"));
    repaired.retain(|p, _| !p.starts_with("quarantine"));
    assert_eq!(repaired, reference);
}

#[test]
fn analyze_reads_a_toy_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "toy.toml", "[grid]\naxis = [-1.0, 1.0]\n");
    let s = run(&["sweep", "--config", &cfg, "--out", "toy"], tmp.path());
    assert_eq!(code(&s), 0, "{}", stderr(&s));
    let before = snapshot(&tmp.path().join("toy"));

    let a = run(&["analyze", "toy", "--out", "an", "--reference", "0,1"], tmp.path());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(snapshot(&tmp.path().join("toy")), before);
    let regions = fs::read_to_string(tmp.path().join("an/phases.toml")).unwrap().matches("[[region]]").count();
    assert!((1..=2).contains(&regions), "{regions}");
    for f in ["tau_critical.dat", "overlap.dat", "pulses_J.dat", "on_fraction_K.dat", "fits.toml", "summary.toml"] {
        let text = fs::read_to_string(tmp.path().join("an").join(f)).unwrap();
        assert!(text.contains("config_hash"), "{f}");
    }

    // C_m from the cell records alone.
    let load = |i: usize, j: usize| {
        let rec = CellRecord::load(&tmp.path().join(format!("toy/cells/cell_{i:03}_{j:03}.toml"))).unwrap();
        rec.canonical_protocol(1e-4).unwrap().normalize().unwrap()
    };
    let reference = load(0, 1);
    let m = read_matrix(&tmp.path().join("an/correlation_J.dat"));
    for (i, j) in [(0, 1), (1, 0)] {
        let expect = correlation(reference.trace(Control::J), load(i, j).trace(Control::J)).modified;
        assert_eq!(m[i][j], expect);
    }
    assert!(m[0][0].is_nan() && m[1][1].is_nan());
}

#[test]
fn analyze_refuses_empty_and_mismatched_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write_config(tmp.path(), "empty.toml", "[grid]\naxis = [0.5]\n");
    assert_eq!(code(&run(&["sweep", "--config", &empty, "--out", "e"], tmp.path())), 0);
    let a = run(&["analyze", "e", "--out", "ea"], tmp.path());
    assert_ne!(code(&a), 0);
    assert!(stderr(&a).contains("no finished cells"));

    let one = write_config(tmp.path(), "one.toml", "[grid]\naxis = [-1.0, 1.0]\n");
    let two = write_config(tmp.path(), "two.toml", "[grid]\naxis = [-1.0, 1.2]\n");
    assert_eq!(code(&run(&["sweep", "--config", &one, "--out", "one"], tmp.path())), 0);
    assert_eq!(code(&run(&["sweep", "--config", &two, "--out", "two"], tmp.path())), 0);
    let r = run(&["analyze", "one", "--compare", "two", "--out", "r"], tmp.path());
    assert_eq!(code(&r), 4, "{}", stderr(&r));
    let same = run(&["analyze", "one", "--compare", "one", "--out", "same"], tmp.path());
    assert_eq!(code(&same), 0);
    let ratio = read_matrix(&tmp.path().join("same/tau_ratio.dat"));
    assert_eq!(ratio[0][1], 0.0);
    assert_eq!(ratio[1][0], 0.0);
}
