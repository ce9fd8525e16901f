use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use labelflow::metrics::CommunityReport;
use labelflow::{FloodFillReport, Risk};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn labelflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn prefix(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn detect_two_triangles_with_clpa() {
    let dir = tempfile::tempdir().unwrap();
    let out = prefix(&dir, "tt");
    let graph = fixture("two_triangles.txt");
    let res = labelflow(&["detect", "--algo", "clpa", "--k", "100", "--seed", "7", graph.to_str().unwrap(), "--out", &out]);
    assert!(res.status.success(), "{}", stderr(&res));

    let report: CommunityReport = serde_json::from_str(&fs::read_to_string(format!("{out}.report.json")).unwrap()).unwrap();
    assert_eq!(report.community_count, 2);
    assert!((report.modularity - 0.357143).abs() < 1e-6);
    assert_eq!(report.objective_h, 12);

    let communities = fs::read_to_string(format!("{out}.communities.csv")).unwrap();
    let mut lines = communities.lines();
    assert_eq!(lines.next(), Some("external_node_id,community_id"));
    let rows: Vec<(u64, usize)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows, vec![(0, 0), (1, 0), (2, 0), (3, 1), (4, 1), (5, 1)]);

    let trace = fs::read_to_string(format!("{out}.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iteration,changes,labels,capacity"));
    let caps: Vec<usize> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(caps.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*caps.last().unwrap(), 6);

    let remap = fs::read_to_string(format!("{out}.remap.csv")).unwrap();
    assert!(remap.starts_with("external_id,internal_id\n0,0\n"));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{out}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "detect");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["variant"], "clpa");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn detect_single_edge_classic() {
    let dir = tempfile::tempdir().unwrap();
    let out = prefix(&dir, "edge");
    let res = labelflow(&["detect", "--algo", "classic", fixture("single_edge.txt").to_str().unwrap(), "--out", &out]);
    assert!(res.status.success(), "{}", stderr(&res));
    let report: CommunityReport = serde_json::from_str(&fs::read_to_string(format!("{out}.report.json")).unwrap()).unwrap();
    assert_eq!(report.community_count, 1);
}

#[test]
fn detect_rejects_k_above_t() {
    let dir = tempfile::tempdir().unwrap();
    let out = prefix(&dir, "bad");
    let res = labelflow(&[
        "detect", "--algo", "clpa", "--k", "200", "--T", "100",
        fixture("two_triangles.txt").to_str().unwrap(), "--out", &out,
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("k exceeds T"), "{}", stderr(&res));
}

#[test]
fn detect_reports_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0 1\n1 two\n").unwrap();
    let res = labelflow(&["detect", bad.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("line 2"), "{}", stderr(&res));

    let res = labelflow(&["detect", "--algo", "nope", fixture("single_edge.txt").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let res = labelflow(&["detect", "--bogus-flag"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn diagnose_cycle_and_star() {
    let dir = tempfile::tempdir().unwrap();
    let out = prefix(&dir, "cycle");
    let res = labelflow(&["diagnose", fixture("cycle12.txt").to_str().unwrap(), "--out", &out]);
    assert!(res.status.success(), "{}", stderr(&res));
    let report: FloodFillReport = serde_json::from_str(&fs::read_to_string(format!("{out}.risk.json")).unwrap()).unwrap();
    assert_eq!(report.attraction_variance, 0.0);
    assert_eq!(report.risk, Risk::Low);
    let csv = fs::read_to_string(format!("{out}.attraction.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("rank,external_id,attraction_power"));
    assert_eq!(csv.lines().count(), 13);

    let out = prefix(&dir, "star");
    let res = labelflow(&["diagnose", fixture("star101.txt").to_str().unwrap(), "--out", &out]);
    assert!(res.status.success(), "{}", stderr(&res));
    let report: FloodFillReport = serde_json::from_str(&fs::read_to_string(format!("{out}.risk.json")).unwrap()).unwrap();
    assert_eq!(report.risk, Risk::High);
    assert!((report.hub_fraction - 1.0 / 101.0).abs() < 1e-12);
    let csv = fs::read_to_string(format!("{out}.attraction.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("1,0,100"));
}

#[test]
fn diagnose_missing_file() {
    let res = labelflow(&["diagnose", "/nonexistent/graph.txt"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn generate_writes_graph_truth_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = prefix(&dir, "g");
    let res = labelflow(&["generate", "--n", "1000", "--dbar", "20", "--dmax", "100", "--mu", "0.3", "--seed", "1", "--out", &out]);
    assert!(res.status.success(), "{}", stderr(&res));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{out}.meta.json")).unwrap()).unwrap();
    let mu = meta["realized_mu"].as_f64().unwrap();
    assert!((mu - 0.3).abs() <= 0.02, "realized mu {mu}");

    // The written graph and ground truth load back consistently.
    let bytes = fs::read(format!("{out}.edges.txt")).unwrap();
    let (g, _) = labelflow::Graph::load_edge_list(bytes.as_slice(), &Default::default()).unwrap();
    assert_eq!(g.edge_count() as u64, meta["edge_count"].as_u64().unwrap());
    let gt_bytes = fs::read(format!("{out}.groundtruth.txt")).unwrap();
    let gt = labelflow::metrics::load_ground_truth(gt_bytes.as_slice(), &g).unwrap();
    assert_eq!(gt.multi_assigned, 0);
    assert_eq!(gt.labeling.community_count() as u64, meta["community_count"].as_u64().unwrap());
}

#[test]
fn bench_row_count_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = prefix(&dir, "sweep");
    let res = labelflow(&[
        "bench", "--mu-list", "0.1,0.3,0.5", "--seeds", "3", "--algos", "classic,clpa", "--jobs", "2", "--out", &out,
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = fs::read_to_string(format!("{out}.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 18);
    let summary = fs::read_to_string(format!("{out}.summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 6);
}

#[test]
fn bench_rejects_mu_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = prefix(&dir, "sweep");
    let res = labelflow(&["bench", "--mu-list", "1.0", "--seeds", "1", "--out", &out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("mu"), "{}", stderr(&res));
}
