use std::fs;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtsvd::Tensor3;
use rtsvd_cli::{dataset, pgm, tensor_file};

fn rtsvd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rtsvd"));
    c.env_remove("RTSVD_WORKERS");
    c
}

fn run(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn random_file(path: &Path, dims: (usize, usize, usize), seed: u64) -> Tensor3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Tensor3::from_fn(dims.0, dims.1, dims.2, |_, _, _| rng.random_range(-1.0..1.0));
    tensor_file::write(path, &t).unwrap();
    t
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn decompose_tsvd_reaches_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.tt3");
    let a = random_file(&input, (9, 7, 5), 1);
    let out = dir.path().join("k3");
    run(rtsvd().args(["decompose", "--method", "tsvd", "--k", "3", "--workers", "2", "--out"]).arg(&out).arg(&input));
    let r = report(&out);
    let (realized, optimal) = (r["realized"].as_f64().unwrap(), r["optimal"].as_f64().unwrap());
    assert!((realized - optimal).abs() <= 1e-10, "{realized} vs {optimal}");
    let u = tensor_file::read(out.join("U.tt3")).unwrap();
    assert_eq!(u.dims(), (9, 3, 5));
    assert!(rtsvd::is_orthogonal(&u, 1e-10));

    let full = dir.path().join("k7");
    run(rtsvd().args(["decompose", "--method", "tsvd", "--k", "7", "--out"]).arg(&full).arg(&input));
    assert!(report(&full)["realized"].as_f64().unwrap() <= 1e-10);
    assert_eq!(a, tensor_file::read(&input).unwrap());
}

#[test]
fn decompose_randomized_reports_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.tt3");
    random_file(&input, (20, 16, 6), 2);
    let out = dir.path().join("r");
    run(rtsvd()
        .args(["decompose", "--method", "rtsvd-q", "--k", "4", "--p", "4", "--eps", "0.05", "--seed", "3", "--out"])
        .arg(&out)
        .arg(&input));
    let r = &report(&out)["randomized"];
    assert!(r["projection"].as_f64().unwrap() <= r["tail_bound_relative"].as_f64().unwrap());
    assert!(r["realized"].as_f64().unwrap() >= r["optimal"].as_f64().unwrap());
    assert_eq!(r["iterations"].as_array().unwrap().len(), 6);
}

#[test]
fn decompose_files_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.tt3");
    random_file(&input, (60, 50, 16), 3);
    let mut outputs = Vec::new();
    for w in ["1", "4"] {
        let out = dir.path().join(w);
        run(rtsvd()
            .args(["decompose", "--method", "rtsvd-q", "--k", "10", "--q", "2", "--workers", w, "--out"])
            .arg(&out)
            .arg(&input));
        outputs.push(["U.tt3", "S.tt3", "V.tt3"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[derive(Debug, serde::Deserialize)]
struct Row {
    k: usize,
    q: usize,
    e_k: f64,
    mean_e: f64,
    min_e: f64,
    max_e: f64,
    mean_proj: f64,
    bound: Option<f64>,
    tail_bound: f64,
    wall_time: f64,
}

#[test]
fn bench_error_rows_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.tt3");
    random_file(&input, (24, 12, 4), 4);
    let csv_path = dir.path().join("bench.csv");
    run(rtsvd()
        .args(["bench-error", "--k", "3,6,12", "--q", "0,1,2", "--p", "4", "--trials", "12", "--out"])
        .arg(&csv_path)
        .arg(&input));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["k", "q", "e_k", "mean_e", "min_e", "max_e", "mean_proj", "bound", "tail_bound", "wall_time"]
    );
    let rows: Vec<Row> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!(r.e_k <= r.mean_e + 1e-12, "{r:?}");
        assert!(r.min_e <= r.mean_e && r.mean_e <= r.max_e);
        assert!(r.mean_proj <= r.mean_e + 1e-12);
        if let Some(b) = r.bound {
            assert!(r.mean_proj <= b + 1e-12, "{r:?}");
        }
        assert!(r.mean_proj <= r.tail_bound + 1e-12, "{r:?}");
        assert!(r.wall_time >= 0.0);
        if r.k == 12 {
            assert_eq!(r.e_k, 0.0);
            assert!(r.mean_e <= 1e-8);
        }
    }
    for k in [3, 6] {
        let by_q: Vec<&Row> = rows.iter().filter(|r| r.k == k).collect();
        assert_eq!(by_q.iter().map(|r| r.q).collect::<Vec<_>>(), [0, 1, 2]);
        for w in by_q.windows(2) {
            let spread = (w[0].max_e - w[0].min_e).max(w[1].max_e - w[1].min_e);
            assert!(w[1].mean_e <= w[0].mean_e + 2.0 * spread / 12f64.sqrt(), "{w:?}");
        }
    }

    let json = run(rtsvd().args(["bench-error", "--k", "3", "--trials", "2", "--format", "json"]).arg(&input));
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 1);
}

/// Three people, ten 6×5 images each, on disjoint rows.
fn face_dir(root: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for person in 0..3 {
        let sub = root.join(format!("person{person}"));
        fs::create_dir_all(&sub).unwrap();
        for shot in 0..10 {
            let samples: Vec<u16> = (0..30)
                .map(|i| {
                    let row = i / 5;
                    let base = if row / 2 == person { 200 } else { 10 };
                    (base + rng.random_range(0..20)) as u16
                })
                .collect();
            fs::write(sub.join(format!("{shot:02}.pgm")), pgm::encode(5, 6, 255, &samples)).unwrap();
        }
    }
}

#[test]
fn recognize_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let faces = dir.path().join("faces");
    face_dir(&faces);
    let mut tables = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        run(rtsvd()
            .args(["recognize", "--k", "3", "--p", "2", "--trials", "4", "--seed", "5", "--workers", workers, "--out"])
            .arg(&out)
            .arg(&faces));
        tables.push((fs::read(out.join("report.json")).unwrap(), fs::read_to_string(out.join("table.csv")).unwrap()));
        let timing = fs::read_to_string(out.join("timing.csv")).unwrap();
        assert_eq!(timing.lines().count(), 1 + 3 * 10);
    }
    assert_eq!(tables[0], tables[1]);
    let table = &tables[0].1;
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("method,stat,fold1,"));
    assert_eq!(lines.len(), 1 + 3 * 3);
    for line in &lines[1..] {
        assert!(line.split(',').skip(2).all(|c| c == "1.00000"), "{line}");
    }
}

#[test]
fn cross_validate_on_tensor_file_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let faces = dir.path().join("faces");
    face_dir(&faces);
    let ds = dataset::load_image_dir(&faces, dataset::Layout::RowsFirst).unwrap();
    let tensor = dir.path().join("faces.tt3");
    tensor_file::write(&tensor, &ds.tensor).unwrap();
    let labels = dir.path().join("labels.txt");
    let names: Vec<String> = ds.labels.iter().map(|&l| ds.class_names[l].clone()).collect();
    fs::write(&labels, names.join("\n")).unwrap();

    let out = run(rtsvd()
        .args(["cross-validate", "--k", "3", "--method", "tsvd,rtsvd", "--trials", "3", "--folds", "5", "--labels"])
        .arg(&labels)
        .arg(&tensor));
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5 + 5 * 3);
    assert!(rows.iter().all(|r| &r[4] == "1.0"));
}

#[test]
fn tensor_file_round_trip_through_images() {
    let dir = tempfile::tempdir().unwrap();
    let faces = dir.path().join("faces");
    face_dir(&faces);
    let ds = dataset::load_image_dir(&faces, dataset::Layout::RowsFirst).unwrap();
    assert_eq!(ds.tensor.dims(), (6, 30, 5));
    let path = dir.path().join("t.tt3");
    tensor_file::write(&path, &ds.tensor).unwrap();
    let bytes = fs::read(&path).unwrap();
    let back = tensor_file::read(&path).unwrap();
    assert_eq!(tensor_file::encode(&back), bytes);

    let white = dir.path().join("white/x");
    fs::create_dir_all(&white).unwrap();
    fs::write(white.join("w.pgm"), pgm::encode(3, 2, 65535, &[65535; 6])).unwrap();
    let w = dataset::load_image_dir(dir.path().join("white"), dataset::Layout::RowsFirst).unwrap();
    assert!(w.tensor.data().iter().all(|&x| x == 1.0));
}

#[test]
fn info_and_configuration_sources() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.tt3");
    random_file(&input, (4, 3, 2), 9);
    let text = run(rtsvd().arg("info").arg(&input));
    assert!(text.contains("dims: 4 x 3 x 2"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&run(rtsvd().args(["info", "--format", "json"]).arg(&input))).unwrap();
    assert_eq!(json["dims"], serde_json::json!([4, 3, 2]));

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "k = 2\nmethod = \"tsvd\"\nworkers = 2\n").unwrap();
    let out = dir.path().join("o");
    run(rtsvd().args(["decompose", "--config"]).arg(&cfg).arg("--out").arg(&out).arg(&input).env("RTSVD_WORKERS", "3"));
    assert_eq!(report(&out)["workers"], 3);
    assert_eq!(report(&out)["k"], 2);
    run(rtsvd().args(["decompose", "--workers", "1", "--config"]).arg(&cfg).arg("--out").arg(&out).arg(&input));
    assert_eq!(report(&out)["workers"], 1);

    let bad = rtsvd().args(["decompose", "--k", "2", "--delta", "2"]).arg(&input).output().unwrap();
    assert!(!bad.status.success());
    let mut corrupt = fs::read(&input).unwrap();
    corrupt[40] ^= 1;
    fs::write(&input, corrupt).unwrap();
    let bad = rtsvd().arg("info").arg(&input).output().unwrap();
    assert!(String::from_utf8_lossy(&bad.stderr).contains("checksum"));
}
