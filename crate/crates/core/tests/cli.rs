use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphop::gnn::{Activation, GnnParams};

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn graphop(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphop")).args(args).arg("--config").arg(config).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_params(dir: &Path, name: &str, p: &GnnParams) -> PathBuf {
    write(dir, name, &serde_json::to_string(p).unwrap())
}

#[test]
fn distance_to_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "k_max = 2\n[operator]\nkind = \"hypercube\"\ndim = 6\n[compare_to]\nkind = \"hypercube\"\ndim = 6\n",
    );
    let out = dir.path().join("d.json");
    let o = graphop(&["distance", "--out", out.to_str().unwrap()], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(report["total"], 0.0);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn distance_to_discretization_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[operator]\nkind = \"hypercube\"\ndim = 6\n[compare_to]\nkind = \"discretized\"\nn = 64\nof = { kind = \"hypercube\", dim = 6 }\n",
    );
    let o = graphop(&["distance"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let total = report["total"].as_f64().unwrap();
    assert!(total > 0.0 && total <= 0.29, "{total}");
    assert_eq!(report["per_k"].as_array().unwrap().len(), 4);
}

#[test]
fn distance_across_constructions_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "k_max = 1\n[operator]\nkind = \"hypercube\"\ndim = 4\n[compare_to]\nkind = \"graphon\"\nkernel = \"min\"\n",
    );
    assert_eq!(graphop(&["distance"], &cfg).status.code(), Some(3));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[operator]\nkind = \"hypercube\"\ndimm = 6\n");
    let o = graphop(&["sweep"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimm"), "{}", stderr(&o));
    let cfg = write(dir.path(), "d.toml", "resolutions = [4]\n[profile]\nnum_tuple = 3\n");
    let o = graphop(&["sweep"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("num_tuple"), "{}", stderr(&o));
    let missing = graphop(&["sweep"], &dir.path().join("absent.toml"));
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn hypercube_sweep_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "resolutions = [4, 16, 64]\nk_max = 2\nseed = 3\n[operator]\nkind = \"hypercube\"\ndim = 8\n[profile]\nnum_tuples = 16\n",
    );
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = graphop(&["sweep", "--out", a.to_str().unwrap()], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("3 rows, 3 pass"), "{}", stdout(&o));
    graphop(&["sweep", "--threads", "2", "--out", b.to_str().unwrap()], &cfg);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let pass = reader.headers().unwrap().iter().position(|h| h == "pass").unwrap();
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[pass] == "true"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "resolutions = [16]\nk_max = 1\nseed = 3\n[operator]\nkind = \"hypercube\"\ndim = 8\n[profile]\nnum_tuples = 8\n[output]\nformat = \"json\"\n",
    );
    let o = graphop(&["sweep", "--seed", "11"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[0]["seed"], 11);
    assert_eq!(rows[0]["theorem"], "thm41");
}

#[test]
fn strict_rejects_resolutions_outside_hypotheses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "resolutions = [4, 5]\nk_max = 1\n[operator]\nkind = \"hypercube\"\ndim = 8\n[profile]\nnum_tuples = 4\n",
    );
    assert_eq!(graphop(&["sweep", "--strict"], &cfg).status.code(), Some(3));
    // without --strict the row is measured and flagged
    let o = graphop(&["sweep"], &cfg);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().nth(2).unwrap().ends_with(",false"), "{text}");
}

#[test]
fn identity_network_has_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    write_params(dir.path(), "id.json", &GnnParams::identity(2, Activation::Clip));
    let cfg = write(
        dir.path(),
        "c.toml",
        "resolutions = [16]\nk_max = 1\ngnn = \"id.json\"\n[operator]\nkind = \"hypercube\"\ndim = 6\n[profile]\nnum_tuples = 8\n[output]\nformat = \"json\"\n",
    );
    let o = graphop(&["gnn-compare"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[0]["theorem"], "lemma-E3");
    assert_eq!(rows[0]["measured"], 0.0);
}

#[test]
fn oversized_filter_tap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = GnnParams::random(&[1, 2, 1], 2, Activation::Clip, 1);
    p.h[0][1][0][0] = 1.5;
    write_params(dir.path(), "bad.json", &p);
    let cfg = write(
        dir.path(),
        "c.toml",
        "resolutions = [16]\ngnn = \"bad.json\"\n[operator]\nkind = \"hypercube\"\ndim = 6\n",
    );
    let o = graphop(&["gnn-compare"], &cfg);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("h[0][1][0][0]"));
    assert_eq!(graphop(&["check"], &cfg).status.code(), Some(4));
}

#[test]
fn small_network_passes_both_bounds() {
    let dir = tempfile::tempdir().unwrap();
    write_params(dir.path(), "p.json", &GnnParams::random(&[1, 2, 1], 2, Activation::Clip, 5));
    let cfg = write(
        dir.path(),
        "c.toml",
        "resolutions = [64]\nk_max = 2\ngnn = \"p.json\"\n[operator]\nkind = \"hypercube\"\ndim = 6\n[profile]\nnum_tuples = 16\n",
    );
    let o = graphop(&["gnn-compare", "--format", "csv"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("lemma-E3") && rows[1].starts_with("thm43-approx"));
    assert!(rows.iter().all(|r| r.contains(",true,16,")), "{text}");
}

#[test]
fn check_reports_every_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write(dir.path(), "c.toml", "resolutions = [4, 6]\ntrials = 10\n[operator]\nkind = \"hypercube\"\ndim = 3\n");
    let o = graphop(&["check"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["assumption"].as_str().unwrap()).collect();
    assert!(
        names.contains(&"lipschitz-map") && names.contains(&"self-adjoint") && names.contains(&"constant-to-constant")
    );
    let at6 = rows.iter().find(|r| r["assumption"] == "constant-to-constant" && r["n"] == 6).unwrap();
    assert_eq!(at6["declared"], false);
    let at4 = rows.iter().find(|r| r["assumption"] == "constant-to-constant" && r["n"] == 4).unwrap();
    assert_eq!(at4["pass"], true);
}

#[test]
fn asymmetric_matrix_needs_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.csv", "2\n0,1\n0,0\n");
    let cfg = write(dir.path(), "c.toml", "[operator]\nkind = \"matrix\"\npath = \"m.csv\"\n");
    assert_eq!(graphop(&["check"], &cfg).status.code(), Some(3));
    let cfg = write(
        dir.path(),
        "d.toml",
        "trials = 10\n[operator]\nkind = \"matrix\"\npath = \"m.csv\"\nallow_asymmetric = true\n",
    );
    let o = graphop(&["check", "--strict"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn bound_is_pure_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "resolutions = [4, 16, 64, 256]\nc_a = 1.0\n");
    let o = graphop(&["bound"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("[1.5, 0.625, 0.28125, 0.1328125]"), "{}", stderr(&o));
    let empty = write(dir.path(), "e.toml", "c_a = 1.0\n");
    let out = dir.path().join("e.csv");
    let o = graphop(&["bound", "--out", out.to_str().unwrap()], &empty);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 1);
    let nothing = write(dir.path(), "n.toml", "resolutions = [4]\n");
    assert_eq!(graphop(&["bound"], &nothing).status.code(), Some(2));
}
