use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use smm_core::data::load_dataset;
use smm_core::{kkt_residual, DualPoint, Hyperparams, Matrix, PrimalPoint, Vector};
use tempfile::{tempdir, TempDir};

fn smm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smm"))
        .args(args)
        .env_remove("SMM_THREADS")
        .output()
        .expect("failed to run smm")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small generated dataset shared by several tests.
fn generate(dir: &TempDir, format: &str) -> std::path::PathBuf {
    let out = dir.path().join("data");
    let o = smm(&[
        "gen", "--n", "300", "--p", "6", "--q", "5", "--r", "2", "--seed", "4", "--out",
        p(&out), "--format", format,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn matrix(v: &Value) -> Matrix {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn vector(v: &Value) -> Vector {
    Vector::from_vec(serde_json::from_value(v.clone()).unwrap())
}

#[test]
fn gen_is_deterministic_and_writes_all_files() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let da = generate(&a, "binary");
    let db = generate(&b, "binary");
    for f in ["train.bin", "test.bin", "w_true.model"] {
        assert_eq!(std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap(), "{f}");
    }
    let summary = read_json(&da.join("gen.json"));
    assert_eq!(summary["n_train"], 240);
    assert_eq!(summary["n_test"], 60);
    assert_eq!(summary["config"]["seed"], 4);

    let c = tempdir().unwrap();
    let dc = generate(&c, "csv");
    let bin = load_dataset(&da.join("train.bin")).unwrap();
    let csv = load_dataset(&dc.join("train.csv")).unwrap();
    assert_eq!(bin.features(), csv.features());
    assert_eq!(bin.labels(), csv.labels());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("x");
    let o = smm(&["gen", "--p", "3", "--q", "3", "--r", "5", "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&smm(&["train", "--tau", "1"])), 1);
    assert_eq!(code(&smm(&["frobnicate"])), 1);
    assert_eq!(code(&smm(&["--help"])), 0);

    let d = generate(&dir, "binary");
    let train = d.join("train.bin");
    let o = smm(&["train", "--data", p(&train), "--C", "-1", "--tau", "1"]);
    assert_eq!(code(&o), 1);
    let o = smm(&["path", "--data", p(&train), "--tau", "1", "--c-min", "2", "--c-max", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn io_errors_exit_three() {
    let dir = tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    assert_eq!(code(&smm(&["train", "--data", p(&missing), "--C", "1", "--tau", "1"])), 3);
    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"garbage").unwrap();
    assert_eq!(code(&smm(&["train", "--data", p(&junk), "--C", "1", "--tau", "1"])), 3);
    let model = dir.path().join("m.model");
    assert_eq!(code(&smm(&["predict", "--model", p(&model), "--data", p(&junk)])), 3);
}

#[test]
fn train_report_is_consistent_with_its_solution() {
    let dir = tempdir().unwrap();
    let d = generate(&dir, "binary");
    let train = d.join("train.bin");
    let report = dir.path().join("r.json");
    let model = dir.path().join("m.model");
    let o = smm(&[
        "train", "--data", p(&train), "--C", "1", "--tau", "1", "--tol", "1e-7", "--report",
        p(&report), "--model", p(&model),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&report);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["report"]["converged"], true);
    let eta = r["report"]["eta_kkt"].as_f64().unwrap();
    assert!(eta <= 1e-7);

    let s = &r["solution"];
    let primal = PrimalPoint {
        w: matrix(&s["w"]),
        b: s["b"].as_f64().unwrap(),
        v: vector(&s["v"]),
        u: matrix(&s["u"]),
    };
    let dual = DualPoint {
        lambda: vector(&s["lambda"]),
        lambda_mat: matrix(&s["lambda_mat"]),
    };
    let ds = load_dataset(&train).unwrap();
    let h = Hyperparams::new(1.0, 1.0).unwrap();
    let recomputed = kkt_residual(&ds, &h, &primal, &dual).unwrap().eta;
    assert!((recomputed - eta).abs() <= 1e-12, "{recomputed:e} vs {eta:e}");

    // The same objective as a reference gives relobj 0.
    let again = dir.path().join("r2.json");
    let o = smm(&[
        "train", "--data", p(&train), "--C", "1", "--tau", "1", "--tol", "1e-7", "--reference",
        p(&report), "--report", p(&again), "--no-solution",
    ]);
    assert_eq!(code(&o), 0);
    let r2 = read_json(&again);
    assert!(r2["report"]["relobj"].as_f64().unwrap() < 1e-12);
    assert!(r2.get("solution").is_none());

    let pr = dir.path().join("p.json");
    let test = d.join("test.bin");
    let o = smm(&["predict", "--model", p(&model), "--data", p(&test), "--report", p(&pr)]);
    assert_eq!(code(&o), 0);
    let pred = read_json(&pr);
    assert!(pred["accuracy"].as_f64().unwrap() >= 0.8);
    assert_eq!(pred["n_samples"], 60);
}

#[test]
fn admm_solvers_and_iteration_cap() {
    let dir = tempdir().unwrap();
    let d = generate(&dir, "binary");
    let train = d.join("train.bin");
    for solver in ["ispadmm", "sgs"] {
        let o = smm(&["train", "--data", p(&train), "--C", "1", "--tau", "1", "--solver", solver]);
        assert_eq!(code(&o), 0, "{solver}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = smm(&[
        "train", "--data", p(&train), "--C", "1", "--tau", "1", "--solver", "sgs", "--max-iter",
        "2", "--tol", "1e-12",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn path_strategies_agree() {
    let dir = tempdir().unwrap();
    let d = generate(&dir, "binary");
    let train = d.join("train.bin");
    let mut objectives = Vec::new();
    for strategy in ["as", "warm"] {
        let report = dir.path().join(format!("{strategy}.json"));
        let models = dir.path().join(format!("{strategy}_models"));
        let o = smm(&[
            "path", "--data", p(&train), "--tau", "1", "--c-min", "0.1", "--c-max", "10",
            "--grid-points", "4", "--log-scale", "--c0", "0.05", "--strategy", strategy,
            "--report", p(&report), "--models-dir", p(&models),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let r = read_json(&report);
        let pts = r["points"].as_array().unwrap();
        assert_eq!(pts.len(), 4);
        assert!(models.join("model_003.model").exists());
        objectives.push(
            pts.iter()
                .map(|pt| pt["primal_objective"].as_f64().unwrap())
                .collect::<Vec<_>>(),
        );
    }
    for (a, w) in objectives[0].iter().zip(&objectives[1]) {
        assert!((a - w).abs() / (1.0 + w.abs()) < 1e-6, "{a} vs {w}");
    }
}

#[test]
fn bench_reports_every_solver() {
    let dir = tempdir().unwrap();
    let report = dir.path().join("b.json");
    let o = smm(&[
        "bench", "--n", "200", "--p", "5", "--q", "5", "--r", "2", "--scenarios", "1:1",
        "--time-limit", "60", "--report", p(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&report);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row["status"], "ok");
        assert!(row["relobj"].as_f64().unwrap() <= 1e-6);
    }
    assert_eq!(code(&smm(&["bench", "--scenarios", "1-1"])), 1);
}

#[test]
fn thread_variable_is_recorded() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("d");
    let o = Command::new(env!("CARGO_BIN_EXE_smm"))
        .args(["gen", "--n", "20", "--p", "2", "--q", "2", "--r", "1", "--out", p(&out)])
        .env("SMM_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let s = read_json(&out.join("gen.json"));
    assert_eq!(s["environment"]["threads_requested"], 4);
    assert_eq!(s["environment"]["threads"], 1);
}
