use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

use graphtest::distances::euclidean_distances;
use graphtest::io;
use graphtest::simulation::sample_gaussian_shift;
use graphtest::SimilarityGraph;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Gaussian two-sample data with `m + n` rows; writes data, distances and labels.
    fn new(m: usize, n: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, layout) = sample_gaussian_shift(m, n, 4, 0.8, &mut rng).unwrap();
        io::write_vectors(&dir.path().join("x.csv"), &data).unwrap();
        io::write_distance_matrix(&dir.path().join("d.csv"), &euclidean_distances(&data).unwrap()).unwrap();
        io::write_labels(&dir.path().join("l.csv"), &layout).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }
}

fn graphtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphtest")).args(args).env_remove("GRAPHTEST_THREADS").output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.trim().is_empty()).count()
}

#[test]
fn test_happy_path_reports_both_pvalues() {
    let fx = Fixture::new(30, 40, 1);
    let out = graphtest(&[
        "test", "--dist", &fx.arg("d.csv"), "--labels", &fx.arg("l.csv"), "--graph", "kmst:5", "--stat", "weighted",
        "--pvalue", "both", "--seed", "42",
    ]);
    let json = stdout_json(&out);
    assert_eq!(json["statistic"], "weighted");
    let p_perm = json["p_perm"].as_f64().unwrap();
    let p_asym = json["p_asym"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p_perm) && (0.0..=1.0).contains(&p_asym));
    assert_eq!(json["graph"]["kind"], "kmst");
    assert_eq!(json["graph"]["edges"], 5 * 69);
    assert_eq!(json["config"]["seed"], 42);
    // the summary table goes to stderr only
    assert!(String::from_utf8_lossy(&out.stderr).contains("weighted"));
}

#[test]
fn vector_input_matches_distance_input() {
    let fx = Fixture::new(20, 25, 2);
    let common = ["--labels", &fx.arg("l.csv"), "--stat", "all", "--seed", "3", "--nperm", "200"];
    let from_dist = graphtest(&[&["test", "--dist", &fx.arg("d.csv")][..], &common].concat());
    let from_data = graphtest(&[&["test", "--data", &fx.arg("x.csv")][..], &common].concat());
    assert_eq!(stdout_json(&from_dist), stdout_json(&from_data));
}

#[test]
fn stat_all_returns_every_statistic() {
    let fx = Fixture::new(25, 25, 3);
    let out = graphtest(&["test", "--dist", &fx.arg("d.csv"), "--labels", &fx.arg("l.csv"), "--stat", "all"]);
    let json = stdout_json(&out);
    let names: Vec<&str> = json.as_array().unwrap().iter().map(|r| r["statistic"].as_str().unwrap()).collect();
    assert_eq!(names, ["edge", "weighted", "weighted_tilde", "generalized", "maxtype"]);
}

#[test]
fn generalized_on_even_kmdp_is_a_flat_graph_error() {
    let fx = Fixture::new(20, 20, 4);
    let out = graphtest(&[
        "test", "--dist", &fx.arg("d.csv"), "--labels", &fx.arg("l.csv"), "--graph", "kmdp:3", "--stat", "generalized",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular covariance (flat graph)"));
}

#[test]
fn graph_kmst9_on_299_points_has_2682_edges() {
    let fx = Fixture::new(214, 85, 5);
    let out = graphtest(&["graph", "--dist", &fx.arg("d.csv"), "--graph", "kmst:9", "--out", &fx.arg("g.txt")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert_eq!(line_count(&fx.path("g.txt")), 2682);
    let g = io::read_edge_list(&fx.path("g.txt"), 299).unwrap();
    assert_eq!(g.edge_count(), 2682);
}

#[test]
fn graph_kmdp1_on_odd_n() {
    let fx = Fixture::new(10, 11, 6);
    let out = graphtest(&["graph", "--dist", &fx.arg("d.csv"), "--graph", "kmdp:1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn malformed_csv_exits_2() {
    let fx = Fixture::new(5, 5, 7);
    std::fs::write(fx.path("bad.csv"), "0,1,2\n1,0,oops\n2,1,0\n").unwrap();
    let out = graphtest(&["graph", "--dist", &fx.arg("bad.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let missing = graphtest(&["graph", "--dist", &fx.arg("nope.csv")]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn input_modes_are_exclusive_and_required() {
    let fx = Fixture::new(5, 5, 8);
    let both = graphtest(&["graph", "--dist", &fx.arg("d.csv"), "--data", &fx.arg("x.csv")]);
    assert_eq!(both.status.code(), Some(2));
    let none = graphtest(&["graph"]);
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn label_length_mismatch_exits_2() {
    let fx = Fixture::new(6, 6, 9);
    std::fs::write(fx.path("short.csv"), "1\n1\n2\n2\n").unwrap();
    let out = graphtest(&["test", "--dist", &fx.arg("d.csv"), "--labels", &fx.arg("short.csv")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnose_reports_flatness_gap() {
    let fx = Fixture::new(3, 3, 10);
    let path4 = SimilarityGraph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
    io::write_edge_list_file(&fx.path("path.txt"), &path4).unwrap();
    std::fs::write(fx.path("d4.csv"), "0,1,2,3\n1,0,1,2\n2,1,0,1\n3,2,1,0\n").unwrap();
    let spec = format!("external:{}", fx.arg("path.txt"));
    let json = stdout_json(&graphtest(&["diagnose", "--dist", &fx.arg("d4.csv"), "--graph", &spec]));
    assert_eq!(json["edge_count"], 3);
    assert!((json["flatness_gap"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let flat = stdout_json(&graphtest(&["diagnose", "--dist", &fx.arg("d.csv"), "--graph", "kmdp:2"]));
    assert_eq!(flat["flatness_gap"].as_f64().unwrap(), 0.0);
}

#[test]
fn diagnose_on_kmst_gaussian_data_is_far_from_flat() {
    let fx = Fixture::new(50, 50, 11);
    let json = stdout_json(&graphtest(&["diagnose", "--data", &fx.arg("x.csv"), "--graph", "kmst:5"]));
    let ratio = json["flatness_gap_over_edges"].as_f64().unwrap();
    assert!(ratio > 1.0, "D/|G| = {ratio}");
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let fx = Fixture::new(30, 30, 12);
    let args = ["test", "--dist", &fx.arg("d.csv"), "--labels", &fx.arg("l.csv"), "--stat", "all", "--seed", "9"];
    let one = graphtest(&[&["--threads", "1"][..], &args].concat());
    let four = graphtest(&[&["--threads", "4"][..], &args].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_graphtest")).args(args).env("GRAPHTEST_THREADS", "2").output().unwrap();
    assert!(one.status.success() && env.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, env.stdout);
}

fn write_spec(fx: &Fixture, name: &str, body: &str) -> String {
    std::fs::write(fx.path(name), body).unwrap();
    fx.arg(name)
}

#[test]
fn power_reruns_are_byte_identical() {
    let fx = Fixture::new(2, 2, 13);
    let spec = write_spec(
        &fx,
        "power.json",
        r#"{"m": 20, "n": 30, "d": 5, "shift": 1.0, "graph": "kmst:3", "statistics": ["edge", "weighted"], "trials": 40, "seed": 5}"#,
    );
    let a = graphtest(&["power", "--spec", &spec, "--out", &fx.arg("a.csv")]);
    let b = graphtest(&["--threads", "1", "power", "--spec", &spec, "--out", &fx.arg("b.csv")]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(fx.path("a.csv")).unwrap(), std::fs::read(fx.path("b.csv")).unwrap());
    let json: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn null_power_is_near_alpha() {
    let fx = Fixture::new(2, 2, 14);
    let spec = write_spec(
        &fx,
        "null.json",
        r#"{"m": 30, "n": 30, "d": 5, "shift": 0.0, "graph": "kmst:5", "statistics": ["weighted"], "trials": 400, "seed": 6}"#,
    );
    let json = stdout_json(&graphtest(&["power", "--spec", &spec]));
    let power = json["rows"][0]["power"].as_f64().unwrap();
    // binomial sd at 400 trials is about 0.011
    assert!((power - 0.05).abs() < 0.04, "null rejection rate {power}");
}

#[test]
fn accuracy_command_writes_pairs() {
    let fx = Fixture::new(2, 2, 15);
    let spec = write_spec(
        &fx,
        "acc.json",
        r#"{"m": 20, "n": 20, "d": 3, "shift": 0.0, "graph": "kmst:3", "statistics": ["weighted"], "trials": 5, "seed": 7, "n_permutations": 200}"#,
    );
    let json = stdout_json(&graphtest(&["accuracy", "--spec", &spec, "--out", &fx.arg("acc.csv")]));
    assert_eq!(json["summaries"][0]["pairs"].as_array().unwrap().len(), 5);
    assert_eq!(line_count(&fx.path("acc.csv")), 6);
}

#[test]
fn invalid_spec_exits_2() {
    let fx = Fixture::new(2, 2, 16);
    let unknown = write_spec(&fx, "u.json", r#"{"m": 20, "n": 20, "d": 3, "graph": "kmst:3", "trials": 5, "seed": 1, "bogus": 1}"#);
    assert_eq!(graphtest(&["power", "--spec", &unknown]).status.code(), Some(2));
    let tiny = write_spec(&fx, "t.json", r#"{"m": 1, "n": 20, "d": 3, "graph": "kmst:3", "trials": 5, "seed": 1}"#);
    assert_eq!(graphtest(&["power", "--spec", &tiny]).status.code(), Some(2));
}
