use std::path::Path;

use mtlso::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
use mtlso::dataset::{make_batches, load_dataset, DatasetIndex};
use mtlso::evaluator::{evaluate, rank_recipes, SplitPart};
use mtlso::model::{ForwardOptions, Model, PreparedGraph, Variant};
use mtlso::nn::{Adam, Tape};
use mtlso::synth::{generate_dataset, DatagenConfig};
use mtlso::trainer::{gradient_check, train, train_step, Component, StepOptions, TrainConfig, TrainContext};
use mtlso::Error;

fn fixture(dir: &Path, graphs: usize) -> DatasetIndex {
    let cfg = DatagenConfig {
        seed: 6,
        num_graphs: graphs,
        ..DatagenConfig::default()
    };
    generate_dataset(&cfg, dir).unwrap();
    load_dataset(dir).unwrap()
}

fn short(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        ..TrainConfig::default()
    }
}

#[test]
fn batches_cover_every_pair_once() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 5);
    let part = [0usize, 2, 4];
    let batches = make_batches(&index, &part, 7, 11).unwrap();
    let mut seen: Vec<(usize, usize)> = batches.iter().flat_map(|b| b.samples.iter().map(|s| (s.graph, s.recipe))).collect();
    seen.sort_unstable();
    let expect: Vec<(usize, usize)> = part.iter().flat_map(|&g| (0..index.k()).map(move |r| (g, r))).collect();
    assert_eq!(seen, expect);
    for b in &batches {
        assert!(b.len() <= 7);
        let mut distinct: Vec<usize> = b.samples.iter().map(|s| s.graph).collect();
        distinct.dedup();
        assert!(b.graphs.iter().all(|g| distinct.contains(g)));
    }
    assert_eq!(make_batches(&index, &part, 7, 11).unwrap(), batches);
    assert_ne!(make_batches(&index, &part, 7, 12).unwrap(), batches);
}

#[test]
fn zero_epochs_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let config = short(0);
    let out = train::<f32>(&config, &index).unwrap();
    assert!(out.history.is_empty());
    let init = Model::<f32>::new(config.architecture(), config.seed).unwrap();
    assert_eq!(out.model.store, init.store);
}

#[test]
fn same_seed_same_history() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let a = train::<f32>(&short(4), &index).unwrap();
    let b = train::<f32>(&short(4), &index).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.store, b.model.store);
    let c = train::<f32>(&TrainConfig { seed: 1, ..short(4) }, &index).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn loss_does_not_increase_early() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let out = train::<f32>(&short(10), &index).unwrap();
    for w in out.history.windows(2) {
        assert!(w[1].fit_loss <= w[0].fit_loss, "epoch {}: {} -> {}", w[1].epoch, w[0].fit_loss, w[1].fit_loss);
    }
}

#[test]
fn stl_step_equals_mtlso_step_without_classification() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let mtl_cfg = short(1);
    let stl_cfg = TrainConfig {
        variant: Variant::Stl,
        ..short(1)
    };
    let train_part = [0usize, 1, 2, 3];
    let batch = make_batches(&index, &train_part, 32, 5).unwrap().remove(0);

    let mut mtl = Model::<f64>::new(mtl_cfg.architecture(), 3).unwrap();
    let mut stl = Model::<f64>::new(stl_cfg.architecture(), 3).unwrap();
    let shared: Vec<_> = stl.store.iter().map(|p| p.name.clone()).collect();
    for name in &shared {
        let id = mtl.store.find(name).unwrap();
        assert_eq!(mtl.store.value(id), stl.store.value(stl.store.find(name).unwrap()), "{name}");
    }

    let ctx_m = TrainContext::<f64>::new(&index, &mtl_cfg, &train_part).unwrap();
    let ctx_s = TrainContext::<f64>::new(&index, &stl_cfg, &train_part).unwrap();
    let mut adam_m = Adam::new(&mtl.store, 1e-3);
    let mut adam_s = Adam::new(&stl.store, 1e-3);
    let lm = train_step(&mut mtl, &mut adam_m, &ctx_m, &batch, StepOptions { zero_classification: true }).unwrap();
    let ls = train_step(&mut stl, &mut adam_s, &ctx_s, &batch, StepOptions::default()).unwrap();
    assert_eq!(lm, ls);
    for name in &shared {
        let a = mtl.store.value(mtl.store.find(name).unwrap());
        let b = stl.store.value(stl.store.find(name).unwrap());
        assert_eq!(a, b, "{name} diverged after one step");
    }
}

#[test]
fn stop_gradient_isolates_classifier() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let train_part = [0usize, 1, 2, 3];
    let batch = make_batches(&index, &train_part, 32, 5).unwrap().remove(0);
    let run = |gamma: f64| {
        let cfg = TrainConfig {
            stop_gradient_p: true,
            gamma,
            ..short(1)
        };
        let mut model = Model::<f64>::new(cfg.architecture(), 3).unwrap();
        let ctx = TrainContext::<f64>::new(&index, &cfg, &train_part).unwrap();
        let mut adam = Adam::new(&model.store, 1e-3);
        train_step(&mut model, &mut adam, &ctx, &batch, StepOptions::default()).unwrap();
        model
    };
    let with_reg = run(1.0);
    let cls_only = run(0.0);
    for id in with_reg.classifier_params() {
        assert_eq!(with_reg.store.value(id), cls_only.store.value(id), "{}", with_reg.store.name(id));
    }
}

#[test]
fn classify_ignores_batch_composition() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 3);
    let model = Model::<f64>::new(short(1).architecture(), 2).unwrap();
    let graphs: Vec<PreparedGraph<f64>> = index.graphs.iter().map(|g| PreparedGraph::new(&g.aig)).collect();
    let recipe = [0usize, 1, 2, 3, 4, 5, 6, 0];
    let probs = |gs: &[&PreparedGraph<f64>]| {
        let mut tape = Tape::new();
        let pairs: Vec<(usize, usize)> = (0..gs.len()).map(|g| (g, 0)).collect();
        let out = model.forward_on(&mut tape, gs, &[&recipe], &pairs, ForwardOptions::default()).unwrap();
        tape.value(out.probs.unwrap()).clone()
    };
    let alone = probs(&[&graphs[1]]);
    let together = probs(&[&graphs[0], &graphs[1], &graphs[2]]);
    assert_eq!(alone.row(0), together.row(1));
}

#[test]
fn non_finite_loss_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let cfg = TrainConfig {
        learning_rate: 1e38,
        ..short(5)
    };
    match train::<f32>(&cfg, &index) {
        Err(Error::NonFinite(msg)) => assert!(msg.contains("epoch"), "{msg}"),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("training with lr 1e38 should diverge"),
    }
}

#[test]
fn config_must_match_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 3);
    assert!(train::<f32>(&TrainConfig { k: 10, ..short(1) }, &index).is_err());
    assert!(train::<f32>(&TrainConfig { n: 5, ..short(1) }, &index).is_err());
    assert!(train::<f32>(&TrainConfig { alpha: 0.0, ..short(1) }, &index).is_err());
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(&dir.path().join("ds"), 6);
    let config = TrainConfig {
        precision: mtlso::Precision::F64,
        ..short(2)
    };
    let out = train::<f64>(&config, &index).unwrap();
    let ckpt = Checkpoint::from_training(&config, &index, &out);
    let path = dir.path().join("c.json");
    save_checkpoint(&ckpt, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, ckpt);
    assert_eq!(loaded.to_model::<f64>().unwrap().store, out.model.store);
    assert!(loaded.to_model::<f32>().is_err());

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));

    let bumped = text.replacen(&format!("\"version\":{CHECKPOINT_VERSION}"), "\"version\":999", 1);
    std::fs::write(&path, bumped).unwrap();
    let err = load_checkpoint(&path).unwrap_err().to_string();
    assert!(err.contains("version"), "{err}");
}

#[test]
fn evaluation_reproduces_train_mape_and_checks_k() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(&dir.path().join("a"), 6);
    let config = short(3);
    let out = train::<f32>(&config, &index).unwrap();
    let ckpt = Checkpoint::from_training(&config, &index, &out);
    let report = evaluate(&ckpt, &index, SplitPart::Train).unwrap();
    assert_eq!(report.test_mape, out.history.last().unwrap().train_mape);
    let test = evaluate(&ckpt, &index, SplitPart::Test).unwrap();
    assert!(test.is_finite());
    assert_eq!(test, evaluate(&ckpt, &index, SplitPart::Test).unwrap());

    let other = DatagenConfig {
        k: 10,
        num_graphs: 3,
        ..DatagenConfig::default()
    };
    generate_dataset(&other, &dir.path().join("b")).unwrap();
    let other = load_dataset(&dir.path().join("b")).unwrap();
    assert!(evaluate(&ckpt, &other, SplitPart::Test).is_err());
}

#[test]
fn stl_metrics_are_finite() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let config = TrainConfig {
        variant: Variant::Stl,
        ..short(2)
    };
    let out = train::<f32>(&config, &index).unwrap();
    let r = evaluate(&Checkpoint::from_training(&config, &index, &out), &index, SplitPart::Test).unwrap();
    assert!(r.is_finite());
    assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
}

#[test]
fn ranking_finds_oracle_best_on_overfit_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let index = fixture(dir.path(), 6);
    let config = TrainConfig::default();
    let out = train::<f32>(&config, &index).unwrap();
    let ckpt = Checkpoint::from_training(&config, &index, &out);
    let index = index.with_target(config.target);
    let mut hits = 0;
    for (g, entry) in index.graphs.iter().enumerate() {
        let ranked = rank_recipes(&ckpt, &entry.aig).unwrap();
        assert_eq!(ranked.len(), index.k());
        let row = index.target_row(g);
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        let top = index.recipes.iter().position(|r| r.id == ranked[0]).unwrap();
        if row[top] == best {
            hits += 1;
        }
    }
    assert!(hits >= 4, "top recipe optimal for {hits} of 6 graphs");
}

#[test]
fn gradient_check_head_small() {
    assert!(gradient_check(Component::MultitaskHead, 1, 1e-4).unwrap() < 1e-3);
}
