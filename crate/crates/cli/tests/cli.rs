use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_FULL: &str = r#"
[scenario]
name = "small"
model = "u1_square"

[lattice]
extent_x = 4
extent_y = 3

[charges]
source = [1, 0]
sink = [3, 1]

[string]
shape = "l_shaped"

[couplings]
mass = 1.5
efield = 3
plaq = [0, 1]

[time]
t_max = 2
n_points = 21
"#;

const SMALL_MINIMAL: &str = r#"
[scenario]
name = "patch"
model = "minimal_model"

[lattice]
geometry = "square"
extent_x = 5
extent_y = 3

[charges]
source = [1, 0]
sink = [4, 2]

[string]
shape = "l_shaped"

[couplings]
mass = 1.5
efield = 3
plaq = [0, 1]

[time]
t_max = 2
n_points = 21
"#;

fn gaugestring(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaugestring")).args(args).env("GAUGESTRING_CACHE_DIR", cache).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn presets_listing() {
    let tmp = TempDir::new().unwrap();
    let o = gaugestring(tmp.path(), &["presets"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["square-L-resonant", "square-L-offres", "hex-S-resonant", "hex-1d-resonant", "z2-diag-2ndres"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
    assert!(text.lines().all(|l| l.split_whitespace().count() > 1), "every preset has a summary");
    let shown = stdout(&gaugestring(tmp.path(), &["presets", "--show", "z2-diag-2ndres"]));
    assert!(shown.contains("mass = 4\nefield = 4"));
}

#[test]
fn validate_reports_dimensions() {
    let tmp = TempDir::new().unwrap();
    let o = gaugestring(tmp.path(), &["validate", "--preset", "square-L-resonant"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("ok"));
    assert!(text.contains("35 minimal strings"));
    assert!(text.contains("manifold dimension 560"));
    let cfg = write(tmp.path(), "s.toml", SMALL_FULL);
    let text = stdout(&gaugestring(tmp.path(), &["validate", &cfg]));
    assert!(text.contains("sector dimension 1478"), "{text}");
}

#[test]
fn parse_errors_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "neg.toml", &SMALL_FULL.replace("n_points = 21", "n_points = -3"));
    let o = gaugestring(tmp.path(), &["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let line = SMALL_FULL.lines().position(|l| l.starts_with("n_points")).unwrap() + 1;
    assert!(stderr(&o).contains(&format!("line {line}")), "{}", stderr(&o));

    let cfg = write(tmp.path(), "model.toml", &SMALL_FULL.replace("\"u1_square\"", "\"u1_triangle\""));
    let o = gaugestring(tmp.path(), &["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    for name in ["u1_square", "u1_hex", "z2_square", "z2_hex", "qlm1d", "minimal_model"] {
        assert!(stderr(&o).contains(name), "{}", stderr(&o));
    }

    let o = gaugestring(tmp.path(), &["run", "--preset", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("square-L-resonant"));
}

#[test]
fn infeasible_scenarios_exit_with_code_three() {
    let tmp = TempDir::new().unwrap();
    let off = write(tmp.path(), "off.toml", &SMALL_FULL.replace("sink = [3, 1]", "sink = [9, 1]"));
    assert_eq!(gaugestring(tmp.path(), &["validate", &off]).status.code(), Some(3));
    // a diagonal cannot be drawn on a cylinder of circumference 3
    let odd = write(tmp.path(), "odd.toml", &SMALL_FULL.replace("extent_y = 3", "extent_y = 3\nboundary = \"cylinder\""));
    assert_eq!(gaugestring(tmp.path(), &["validate", &odd]).status.code(), Some(3));
    let snake = SMALL_FULL
        .replace("shape = \"l_shaped\"", "shape = \"explicit\"\npath = [[1, 0], [1, 1], [2, 1], [2, 0], [3, 0], [3, 1]]");
    let snake = write(tmp.path(), "snake.toml", &snake);
    let o = gaugestring(tmp.path(), &["validate", &snake]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("Gauss"), "{}", stderr(&o));
}

#[test]
fn caps_and_convergence_failures_have_their_own_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL_FULL);
    let o = gaugestring(tmp.path(), &["run", &cfg, "--max-dim", "100", "--no-cache", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = gaugestring(tmp.path(), &["validate", "--preset", "square-L-resonant", "--max-dim", "500"]);
    assert_eq!(o.status.code(), Some(4));

    let strict = SMALL_FULL.replace("n_points = 21", "n_points = 3\nkrylov_tol = 1e-300");
    let cfg = write(tmp.path(), "strict.toml", &strict);
    let o = gaugestring(tmp.path(), &["run", &cfg, "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,fidelity,overlap_other_strings,matter_occupation,energy,norm_error"));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn full_ed_sweep_writes_one_csv_per_member() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(tmp.path(), "s.toml", SMALL_FULL);
    let o = gaugestring(tmp.path(), &["run", &cfg, "--workers", "2", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for j in ["0", "1"] {
        let rows = read_csv(&out.join(format!("small_m1.5_g3_J{j}.csv")));
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0][..4], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(rows[20][0], 2.0);
        for r in &rows {
            assert!(r[5] <= 1e-10);
            assert!((r[4] - rows[0][4]).abs() <= 1e-8);
        }
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("small_m1.5_g3_J{j}.meta.json"))).unwrap()).unwrap();
        assert_eq!(meta["method"], "full_ed");
        assert_eq!(meta["dimension"], 1478);
        assert_eq!(meta["propagator"], "krylov");
        assert!(meta["code_version"].is_string() && meta["wall_time_seconds"].is_number());
    }
    // away from the confined limit higher-order hops already move the string
    // at J=0; the plaquette term still moves it much more
    let p_max = |j: &str| read_csv(&out.join(format!("small_m1.5_g3_J{j}.csv"))).iter().map(|r| r[2]).fold(0.0, f64::max);
    assert!(p_max("1") > 5.0 * p_max("0"), "{} vs {}", p_max("1"), p_max("0"));
    // the sector dump is now cached
    assert!(fs::read_dir(tmp.path()).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "basis")));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "m.toml", SMALL_MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(gaugestring(tmp.path(), &["run", &cfg, "--out-dir", a.to_str().unwrap()]).status.success());
    assert!(gaugestring(tmp.path(), &["run", &cfg, "--workers", "1", "--out-dir", b.to_str().unwrap()]).status.success());
    for name in ["patch_m1.5_g3_J0.csv", "patch_m1.5_g3_J1.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("patch_m1.5_g3_J1.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["method"], "minimal_model");
    assert_eq!(meta["dimension"], 80);
    assert_eq!(meta["propagator"], "dense_spectral");
}

#[test]
fn minimal_and_full_runs_share_conventions() {
    // both report absolute energies, so the t=0 rows coincide
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let minimal = write(tmp.path(), "m.toml", &SMALL_MINIMAL.replace("plaq = [0, 1]", "plaq = 0"));
    assert!(gaugestring(tmp.path(), &["run", &minimal, "--out-dir", out.to_str().unwrap()]).status.success());
    let m = read_csv(&out.join("patch_m1.5_g3_J0.csv"));
    let full = SMALL_MINIMAL
        .replace("plaq = [0, 1]", "plaq = 0")
        .replace("minimal_model", "u1_square")
        .replace("name = \"patch\"", "name = \"full\"");
    let full = write(tmp.path(), "f.toml", &full);
    let o = gaugestring(tmp.path(), &["run", &full, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = read_csv(&out.join("full_m1.5_g3_J0.csv"));
    assert_eq!(m[0], f[0]);
}

#[test]
fn export_manifold_writes_the_text_dump() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(tmp.path(), "m.toml", SMALL_MINIMAL);
    let o = gaugestring(tmp.path(), &["export-manifold", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("patch_m1.5_g3.manifold")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# gaugestring manifold v1 sites=15 links=22 strings=10 dimension=80"));
    assert_eq!(lines.count(), 80);
    let o = gaugestring(tmp.path(), &["export-manifold", "--preset", "qlm1d-resonant"]);
    assert_eq!(o.status.code(), Some(2));
}
