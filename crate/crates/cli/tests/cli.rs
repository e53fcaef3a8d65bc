use std::path::Path;
use std::process::{Command, Output};

fn mtlso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtlso"))
        .args(args)
        .env("MTLSO_THREADS", "1")
        .output()
        .expect("run mtlso")
}

fn ok(args: &[&str]) -> String {
    let out = mtlso(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn datagen(dir: &Path, graphs: &str) {
    ok(&["datagen", "--seed", "1", "--graphs", graphs, "--k", "20", "--n", "20", "--out", dir.to_str().unwrap()]);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(mtlso(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mtlso(&[]).status.code(), Some(2));
    assert_eq!(mtlso(&["train", "--bogus"]).status.code(), Some(2));
    let out = mtlso(&["datagen"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
    assert_eq!(mtlso(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = mtlso(&["inspect", "--data", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn datagen_is_loadable_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    datagen(&a, "8");
    datagen(&b, "8");
    let index = mtlso::dataset::load_dataset(&a).unwrap();
    assert_eq!((index.num_graphs(), index.k()), (8, 20));
    for f in ["qor.csv", "recipes.csv", "graphs/g000.aag", "graphs/g007.aag"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let stats = ok(&["inspect", "--data", a.to_str().unwrap()]);
    assert!(stats.contains("graphs   8"), "{stats}");
    let one = ok(&["inspect", "--aig", a.join("graphs/g000.aag").to_str().unwrap()]);
    assert!(one.contains("depth"));
}

#[test]
fn train_eval_rank_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let ckpt = dir.path().join("ckpt");
    datagen(&ds, "6");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# short run\nepochs = 3\nbatch_size = 16\n").unwrap();
    ok(&["train", "--config", cfg.to_str().unwrap(), "--data", ds.to_str().unwrap(), "--out", ckpt.to_str().unwrap()]);
    let log = std::fs::read_to_string(ckpt.join("metrics.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,loss_total,loss_cls,loss_reg,train_mape"));
    assert_eq!(log.lines().count(), 4);

    let csv_path = dir.path().join("metrics.csv");
    let printed = ok(&["eval", "--ckpt", ckpt.to_str().unwrap(), "--data", ds.to_str().unwrap(), "--out", csv_path.to_str().unwrap()]);
    let row: Vec<&str> = printed.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 11);
    let mape: f64 = row[6].parse().unwrap();
    assert!(mape.is_finite() && mape >= 0.0);
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), printed);

    let ranked = ok(&["rank", "--ckpt", ckpt.to_str().unwrap(), "--aig", ds.join("graphs/g000.aag").to_str().unwrap(), "--top", "3"]);
    assert_eq!(ranked.lines().count(), 4);

    // flags override the file
    let ckpt2 = dir.path().join("ckpt2");
    ok(&["train", "--config", cfg.to_str().unwrap(), "--epochs", "1", "--data", ds.to_str().unwrap(), "--out", ckpt2.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(ckpt2.join("metrics.csv")).unwrap().lines().count(), 2);

    // rerun is byte-identical
    let ckpt3 = dir.path().join("ckpt3");
    ok(&["train", "--config", cfg.to_str().unwrap(), "--data", ds.to_str().unwrap(), "--out", ckpt3.to_str().unwrap()]);
    for f in ["metrics.csv", "checkpoint.json"] {
        assert_eq!(std::fs::read(ckpt.join(f)).unwrap(), std::fs::read(ckpt3.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn ablate_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    datagen(&ds, "6");
    let results = dir.path().join("results.csv");
    ok(&[
        "ablate", "--data", ds.to_str().unwrap(), "--out", results.to_str().unwrap(),
        "--variants", "MTLSO,STL,PGRL", "--L", "1,2", "--alphas", "0.5", "--seeds", "0", "--epochs", "1",
    ]);
    let text = std::fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    let svg = dir.path().join("svg");
    ok(&["plot", "--results", results.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    for f in ["variants.svg", "classification.svg", "layers.svg", "alpha.svg"] {
        assert!(std::fs::read_to_string(svg.join(f)).unwrap().starts_with("<svg"), "{f}");
    }

    let drifted = dir.path().join("drift.csv");
    std::fs::write(&drifted, text.replacen("test_mape", "mape", 1)).unwrap();
    let out = mtlso(&["plot", "--results", drifted.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
