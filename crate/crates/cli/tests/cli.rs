use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spdkit::dataio::{generate_synthetic, write_dataset, SyntheticSpec};

fn spdkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = spdkit(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Data lines of a CSV, after checking the provenance comment and header.
fn csv_body(path: &Path, header: &str) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let prov = lines.next().unwrap();
    assert!(prov.starts_with("# spdkit ") && prov.contains("seed"), "{prov}");
    assert_eq!(lines.next().unwrap(), header);
    lines.map(str::to_string).collect()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(classes: u32) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        ok(
            f.path(),
            &["synth", "--classes", &classes.to_string(), "--dim", "3", "--per-class", "12", "--seed", "3", "--out", "all.spds"],
        );
        ok(f.path(), &["split", "--data", "all.spds", "--seed", "3", "--train", "train.spds", "--test", "test.spds"]);
        f
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn train_writes_model_summary_and_convergence() {
    let f = Fixture::new(3);
    let summary = ok(
        f.path(),
        &["train", "--data", "train.spds", "--atoms", "4", "--variant", "N", "--gamma", "1e-3", "--seed", "7", "--outer-iters", "4", "--out", "m.iddl"],
    );
    assert!(summary["final_objective"].as_f64().unwrap() >= 0.0);
    assert!((1..=4).contains(&summary["outer_iters"].as_u64().unwrap()));
    let acc = summary["train_acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let rows = csv_body(
        &f.file("m.convergence.csv"),
        "outer_iter,objective,start,dictionary_delta,params_delta,w_delta,dictionary_status,params_status",
    );
    assert_eq!(rows.len() as u64, summary["outer_iters"].as_u64().unwrap());
    assert!(rows.iter().all(|r| r.ends_with("updated,updated")));
}

#[test]
fn frozen_variant_reports_the_parameter_block_as_skipped() {
    let f = Fixture::new(2);
    ok(
        f.path(),
        &["train", "--data", "train.spds", "--atoms", "3", "--variant", "A", "--outer-iters", "2", "--out", "a.iddl", "--convergence", "conv.csv"],
    );
    let rows = csv_body(
        &f.file("conv.csv"),
        "outer_iter,objective,start,dictionary_delta,params_delta,w_delta,dictionary_status,params_status",
    );
    assert!(!rows.is_empty());
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert_eq!(cells[4], "");
        assert_eq!(cells[7], "skipped");
    }
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let f = Fixture::new(2);
    let missing = spdkit(f.path(), &["train", "--data", "missing.spds", "--atoms", "2", "--out", "m.iddl"]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_variant = spdkit(f.path(), &["train", "--data", "train.spds", "--atoms", "2", "--variant", "Q", "--out", "m.iddl"]);
    assert_eq!(bad_variant.status.code(), Some(2));
    let too_many_atoms = spdkit(f.path(), &["train", "--data", "train.spds", "--atoms", "500", "--out", "m.iddl"]);
    assert_eq!(too_many_atoms.status.code(), Some(2));
    std::fs::write(f.file("junk.spds"), b"not a dataset").unwrap();
    let corrupt = spdkit(f.path(), &["train", "--data", "junk.spds", "--atoms", "2", "--out", "m.iddl"]);
    assert_eq!(corrupt.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&corrupt.stderr).contains("corrupt"));
}

#[test]
fn eval_reports_model_and_baseline_reproducibly() {
    let f = Fixture::new(3);
    ok(f.path(), &["train", "--data", "train.spds", "--atoms", "4", "--outer-iters", "3", "--out", "m.iddl"]);
    let args = ["eval", "--model", "m.iddl", "--data", "test.spds", "--baseline", "le", "--train", "train.spds", "--out", "r1"];
    let summary = ok(f.path(), &args);
    let acc = summary["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!((0.0..=1.0).contains(&summary["nn_le_accuracy"].as_f64().unwrap()));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(f.file("r1.json")).unwrap()).unwrap();
    assert_eq!(report["accuracy"].as_f64().unwrap(), acc);
    assert_eq!(report["confusion"].as_array().unwrap().len(), 3);
    let rows = csv_body(&f.file("r1.nn-le.csv"), "index,label,predicted,score");
    assert_eq!(rows.len(), report["per_sample"].as_array().unwrap().len());

    let mut again = args;
    again[10] = "r2";
    ok(f.path(), &again);
    for ext in ["json", "nn-le.json"] {
        assert_eq!(
            std::fs::read(f.file(&format!("r1.{ext}"))).unwrap(),
            std::fs::read(f.file(&format!("r2.{ext}"))).unwrap()
        );
    }
}

#[test]
fn eval_rejects_a_larger_label_space() {
    let f = Fixture::new(2);
    ok(f.path(), &["train", "--data", "train.spds", "--atoms", "3", "--outer-iters", "2", "--out", "m.iddl"]);
    let three = generate_synthetic(&SyntheticSpec {
        classes: 3,
        dim: 3,
        per_class: 4,
        spread: 10.0,
        seed: 1,
    })
    .unwrap();
    write_dataset(f.file("three.spds"), &three).unwrap();
    let out = spdkit(f.path(), &["eval", "--model", "m.iddl", "--data", "three.spds", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn encode_writes_one_row_per_sample() {
    let f = Fixture::new(2);
    ok(f.path(), &["train", "--data", "train.spds", "--atoms", "3", "--outer-iters", "2", "--out", "m.iddl"]);
    let out = spdkit(f.path(), &["encode", "--model", "m.iddl", "--data", "test.spds", "--out", "v.csv"]);
    assert!(out.status.success());
    let rows = csv_body(&f.file("v.csv"), "index,label,v1,v2,v3");
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split(',').skip(2).all(|v| v.parse::<f64>().unwrap() >= 0.0)));
}

#[test]
fn grid_sweeps_every_cell_and_flags_the_floor() {
    let f = Fixture::new(3);
    let base = ["grid", "--train", "train.spds", "--test", "test.spds", "--atoms", "4", "--seed", "1"];
    let summary = ok(f.path(), &[&base[..], &["--out", "g1.csv"]].concat());
    assert_eq!(summary["cells"], 25);
    let header = "alpha,beta,train_acc,test_acc,flag";
    let rows = csv_body(&f.file("g1.csv"), header);
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().any(|r| r.starts_with("0.5,0.5,")));
    assert!(rows.iter().any(|r| r.starts_with("1.0,1.0,")));
    ok(f.path(), &[&base[..], &["--out", "g2.csv"]].concat());
    assert_eq!(rows, csv_body(&f.file("g2.csv"), header));

    ok(f.path(), &[&base[..], &["--alphas", "0.0001,0.001,1", "--betas", "1", "--out", "g3.csv"]].concat());
    let rows = csv_body(&f.file("g3.csv"), header);
    assert_eq!(rows.len(), 3);
    assert!(rows[0].ends_with(",,,below_floor"));
    assert!(rows[1].ends_with(",at_floor"));
    assert!(rows[2].ends_with(",ok"));
}

#[test]
fn bench_honors_values_and_reps() {
    let f = Fixture::new(2);
    let summary = ok(
        f.path(),
        &["bench", "--sweep", "atoms", "--values", "1,2,4", "--samples", "6", "--dim", "3", "--reps", "3", "--out", "b.csv"],
    );
    assert!(summary["grad_slope"].as_f64().unwrap().is_finite());
    let rows = csv_body(&f.file("b.csv"), "sweep,value,grad_median_ms,objective_median_ms,reps");
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("atoms,") && r.ends_with(",3")));
}

#[test]
fn ablate_emits_three_rows_per_atom_count() {
    let f = Fixture::new(2);
    let args = ["ablate", "--data", "all.spds", "--atoms", "2,3", "--seeds", "0,1", "--outer-iters", "2"];
    ok(f.path(), &[&args[..], &["--out", "t1.csv"]].concat());
    let header = "atoms,method,seeds,mean_test_acc,mean_train_acc,per_seed_test_acc";
    let rows = csv_body(&f.file("t1.csv"), header);
    let methods: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(methods, ["fix_params", "fix_dictionary", "joint", "fix_params", "fix_dictionary", "joint"]);
    ok(f.path(), &[&args[..], &["--out", "t2.csv"]].concat());
    assert_eq!(rows, csv_body(&f.file("t2.csv"), header));
}
