use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use m3fed_core::federation::{Category, CostLedger, Direction};
use m3fed_core::inference::{read_anomaly_csv, Verdict};
use m3fed_core::model::{GridConfig, M3Model, ModelConfig, ShipType};

const BIN: &str = env!("CARGO_BIN_EXE_m3fed");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("spawn m3fed")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "m3fed {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(!out.status.success(), "m3fed {args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn model(path: impl AsRef<Path>) -> M3Model {
    M3Model::from_bytes(&std::fs::read(path).unwrap()).unwrap()
}

fn ledger(path: impl AsRef<Path>) -> CostLedger {
    CostLedger::read_csv(std::fs::File::open(path).unwrap()).unwrap()
}

fn cells(m: &M3Model) -> BTreeSet<(i32, i32)> {
    m.cells().map(|c| (c.index.row, c.index.col)).collect()
}

fn gen(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["gen-synthetic", "--out", out];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn pipeline_from_synthetic_data_to_geojson() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "train.csv", &["--days", "2", "--trips-per-lane", "8", "--dirty-rows", "6"]);
    gen(
        d,
        "test.csv",
        &["--seed", "3", "--start", "2018-07-05", "--anomaly-rate", "0.5", "--labels", "labels.csv"],
    );
    let summary = ok(d, &["ingest", "--input", "train.csv", "--out-dir", "ing"]);
    assert!(summary.contains("dropped 3 other type, 3 incomplete"), "{summary}");
    for f in ["records.csv", "client-1.csv", "client-2.csv", "client-3.csv"] {
        assert!(d.join("ing").join(f).is_file(), "{f}");
    }

    ok(d, &["train-central", "--data", "ing/records.csv", "--out-dir", "central"]);
    ok(d, &["train-federated", "--data", "ing/records.csv", "--out-dir", "fed"]);
    for t in ["cargo", "tanker", "passenger"] {
        assert!(d.join(format!("central/{t}.m3")).is_file());
        assert_eq!(model(d.join(format!("fed/{t}.m3"))).config().ship_type.as_str(), t);
    }

    ok(d, &["detect", "--models", "central", "--data", "test.csv", "--out", "a.csv"]);
    let rows = read_anomaly_csv(std::fs::File::open(d.join("a.csv")).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r.verdict.is_anomaly()));

    let hist = ok(d, &["events", "--anomalies", "a.csv", "--out", "events.csv", "--histogram", "hist.txt"]);
    assert!(hist.starts_with("events: "));
    assert!(d.join("hist.txt").is_file());
    let events = std::fs::read_to_string(d.join("events.csv")).unwrap();
    assert!(events.starts_with("mmsi,start,end,duration_s,n_records,main_type"));

    let report = ok(d, &["compare", "--baseline", "a.csv", "--candidate", "a.csv", "--out", "cmp.txt"]);
    let anomalies = rows.iter().filter(|r| r.verdict.is_anomaly()).count();
    // rows: baseline anomaly (tp, fn), baseline normal (fp, tn)
    let table: Vec<Vec<&str>> = report
        .lines()
        .skip(1)
        .take(2)
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(table[0][1], anomalies.to_string(), "{report}");
    assert_eq!(table[0][3], "0", "{report}");
    assert_eq!(table[1][1], "0", "{report}");
    assert_eq!(table[1][3], (rows.len() - anomalies).to_string(), "{report}");

    let geo = ok(d, &["export-geojson", "--model", "fed/cargo.m3", "--out", "m.geojson"]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("m.geojson")).unwrap()).unwrap();
    assert_eq!(v["type"], "FeatureCollection");
    let n = model(d.join("fed/cargo.m3")).prototype_count();
    assert_eq!(v["features"].as_array().unwrap().len(), n);
    assert!(geo.starts_with(&format!("{n} features")));
    ok(d, &["export-geojson", "--events", "a.csv", "--out", "e.geojson"]);
    ok(d, &["export-geojson", "--anomalies", "a.csv", "--out", "p.geojson"]);
}

#[test]
fn train_central_is_deterministic_and_counts_records() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "data.csv", &["--lanes", "disjoint", "--trips-per-lane", "4"]);
    ok(d, &["train-central", "--data", "data.csv", "--out-dir", "a"]);
    ok(d, &["train-central", "--data", "data.csv", "--out-dir", "b"]);
    let a = std::fs::read(d.join("a/cargo.m3")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/cargo.m3")).unwrap());
    assert!(!d.join("a/tanker.m3").exists());
    let rows = std::fs::read_to_string(d.join("data.csv")).unwrap().lines().count() - 1;
    assert_eq!(M3Model::from_bytes(&a).unwrap().trained_records(), rows as u64);
}

#[test]
fn empty_dataset_is_an_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("empty.csv"), "# Timestamp,MMSI,Latitude,Longitude,SOG,COG,Ship type\n").unwrap();
    let err = fails(d, &["train-central", "--data", "empty.csv", "--out-dir", "m"]);
    assert!(err.contains("no training records"), "{err}");
    assert!(!d.join("m").exists());
    let err = fails(d, &["train-central", "--data", "missing.csv", "--out-dir", "m"]);
    assert!(err.contains("does not exist"), "{err}");
}

#[test]
fn single_client_federation_matches_central_training() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "data.csv", &["--days", "3", "--trips-per-lane", "5"]);
    // one round over all days: the client model is the sequential model
    ok(d, &["train-central", "--data", "data.csv", "--out-dir", "central"]);
    ok(d, &["train-federated", "--client-data", "data.csv", "--days-per-round", "3", "--out-dir", "one"]);
    // daily rounds: the per-day aggregated variant
    ok(d, &["train-central", "--data", "data.csv", "--chunked", "--out-dir", "chunked"]);
    ok(d, &["train-federated", "--client-data", "data.csv", "--out-dir", "daily"]);
    for t in ["cargo", "tanker", "passenger"] {
        let f = |dir: &str| std::fs::read(d.join(dir).join(format!("{t}.m3"))).unwrap();
        assert_eq!(f("one"), f("central"), "{t}");
        assert_eq!(f("daily"), f("chunked"), "{t}");
    }
}

#[test]
fn ledger_counts_and_cell_union_on_disjoint_clients() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let lanes = ["--lanes", "disjoint", "--days", "2", "--trips-per-lane", "3"];
    gen(d, "all.csv", &lanes);
    // split the three lanes by latitude band into one file per client
    let text = std::fs::read_to_string(d.join("all.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let mut parts = vec![String::from(header) + "\n"; 3];
    for l in lines {
        let lat: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        let band = (((lat - 57.30) / 0.25).round() as usize).min(2);
        parts[band] += &format!("{l}\n");
    }
    let names = ["c1.csv", "c2.csv", "c3.csv"];
    for (p, n) in parts.iter().zip(names) {
        std::fs::write(d.join(n), p).unwrap();
    }
    let clients = ["--client-data", "c1.csv", "--client-data", "c2.csv", "--client-data", "c3.csv"];

    let mut args = vec!["train-federated", "--out-dir", "up", "--ship-type", "cargo"];
    args.extend_from_slice(&clients);
    ok(d, &args);
    let up = ledger(d.join("up/ledger.csv"));
    assert_eq!(up.count_for(Direction::ClientToServer, Category::Model), 2 * 3);
    assert_eq!(up.total_for(Direction::ServerToClient, Category::Model), 0);

    let mut args = vec!["train-federated", "--out-dir", "both", "--ship-type", "cargo", "--return-global"];
    args.extend_from_slice(&clients);
    ok(d, &args);
    let both = ledger(d.join("both/ledger.csv"));
    assert_eq!(both.count_for(Direction::ClientToServer, Category::Model), 2 * 3);
    assert_eq!(both.count_for(Direction::ServerToClient, Category::Model), 2 * 3);

    let global = model(d.join("up/cargo.m3"));
    let mut union = BTreeSet::new();
    for (i, n) in names.iter().enumerate() {
        let out = format!("own{i}");
        ok(d, &["train-central", "--data", n, "--out-dir", &out]);
        let own = cells(&model(d.join(&out).join("cargo.m3")));
        assert!(union.is_disjoint(&own));
        union.extend(own);
    }
    assert_eq!(cells(&global), union);
}

#[test]
fn separate_server_and_client_processes_match_in_process_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "all.csv", &["--days", "2", "--trips-per-lane", "4"]);
    ok(d, &["ingest", "--input", "all.csv", "--out-dir", "ing"]);

    let mut server = Command::new(BIN)
        .current_dir(d)
        .args(["serve", "--listen", "127.0.0.1:0", "--clients", "3", "--data", "ing/records.csv"])
        .args(["--rounds", "2", "--return-global", "--out-dir", "srv"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();

    let clients: Vec<_> = (1..=3)
        .map(|i| {
            Command::new(BIN)
                .current_dir(d)
                .args(["client", "--connect", &addr, "--client-id", &i.to_string()])
                .args(["--data", &format!("ing/client-{i}.csv"), "--global-out", &format!("g{i}.m3")])
                .stdout(Stdio::null())
                .stderr(Stdio::piped())
                .spawn()
                .unwrap()
        })
        .collect();
    for c in clients {
        let out = c.wait_with_output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = server.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    ok(
        d,
        &[
            "train-federated", "--data", "ing/records.csv", "--ship-type", "cargo", "--return-global", "--out-dir",
            "inproc",
        ],
    );
    let served = std::fs::read(d.join("srv/cargo.m3")).unwrap();
    assert_eq!(served, std::fs::read(d.join("inproc/cargo.m3")).unwrap());
    assert_eq!(ledger(d.join("srv/ledger.csv")), ledger(d.join("inproc/ledger.csv")));
    // clients hold the global model of the last round's start
    let g1 = model(d.join("g1.m3"));
    assert!(g1.trained_records() < model(d.join("srv/cargo.m3")).trained_records());
}

#[test]
fn detect_with_an_empty_model_flags_every_record_as_position() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "data.csv", &["--trips-per-lane", "2"]);
    std::fs::create_dir(d.join("m")).unwrap();
    let empty = M3Model::empty(ModelConfig::with_defaults(GridConfig::default(), ShipType::Cargo));
    std::fs::write(d.join("m/cargo.m3"), empty.to_bytes()).unwrap();
    let summary = ok(d, &["detect", "--models", "m", "--data", "data.csv", "--out", "a.csv"]);
    let rows = read_anomaly_csv(std::fs::File::open(d.join("a.csv")).unwrap()).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.verdict == Verdict::Position && r.p_value.is_none()));
    assert!(summary.contains("0 normal"), "{summary}");

    let wrong = M3Model::empty(ModelConfig::with_defaults(GridConfig::default(), ShipType::Tanker));
    std::fs::write(d.join("m/cargo.m3"), wrong.to_bytes()).unwrap();
    fails(d, &["detect", "--models", "m", "--data", "data.csv", "--out", "b.csv"]);
}

#[test]
fn compare_rejects_outputs_over_different_records() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "x.csv", &["--trips-per-lane", "2"]);
    gen(d, "y.csv", &["--trips-per-lane", "2", "--seed", "99"]);
    ok(d, &["train-central", "--data", "x.csv", "--out-dir", "m"]);
    ok(d, &["detect", "--models", "m", "--data", "x.csv", "--out", "a.csv"]);
    ok(d, &["detect", "--models", "m", "--data", "y.csv", "--out", "b.csv"]);
    let err = fails(d, &["compare", "--baseline", "a.csv", "--candidate", "b.csv", "--out", "r.txt"]);
    assert!(err.contains("differ"), "{err}");
    assert!(!d.join("r.txt").exists());
}

#[test]
fn costs_report_zero_reduction_at_baseline_size() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "data.csv", &["--trips-per-lane", "2"]);
    ok(d, &["train-federated", "--data", "data.csv", "--out-dir", "f"]);
    let l = ledger(d.join("f/ledger.csv"));
    let up = l.total_for(Direction::ClientToServer, Category::Model).to_string();
    let report = ok(d, &["costs", "--ledger", "f/ledger.csv", "--baseline-bytes", &up, "--out", "c.txt"]);
    assert!(report.contains("reduction (upload only):     0.00%"), "{report}");
    let err = fails(d, &["costs", "--ledger", "f/ledger.csv", "--baseline-bytes", "0"]);
    assert!(err.contains("baseline"), "{err}");
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen(d, "data.csv", &["--trips-per-lane", "6"]);
    std::fs::write(d.join("run.toml"), "max_prototypes = 1\nnew_prototype_distance = 0.2\n").unwrap();
    ok(d, &["--config", "run.toml", "train-central", "--data", "data.csv", "--out-dir", "file"]);
    ok(
        d,
        &["train-central", "--config", "run.toml", "--max-prototypes", "3", "--data", "data.csv", "--out-dir", "flag"],
    );
    let file = model(d.join("file/cargo.m3"));
    let flag = model(d.join("flag/cargo.m3"));
    assert!(file.cells().all(|c| c.prototypes.len() == 1));
    assert!(flag.cells().all(|c| c.prototypes.len() <= 3));
    assert!(flag.cells().any(|c| c.prototypes.len() > 1));
    assert_eq!(flag.config().hyper.new_prototype_distance, 0.2);

    std::fs::write(d.join("bad.toml"), "max_prototype = 1\n").unwrap();
    let err = fails(d, &["--config", "bad.toml", "train-central", "--data", "data.csv", "--out-dir", "x"]);
    assert!(err.contains("bad.toml"), "{err}");
}
