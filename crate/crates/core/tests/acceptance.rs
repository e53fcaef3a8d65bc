//! Acceptance checks, one line per criterion.
//!
//! `MTLSO_ACCEPT=1,4` runs a subset. The ablation grid runs one seed at a
//! reduced epoch budget unless `MTLSO_FULL_ABLATION=1`.

use std::path::Path;
use std::time::{Duration, Instant};

use mtlso::aig::{and_count, depth, simulate, MessageGraph};
use mtlso::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use mtlso::dataset::{labels_for, load_dataset, DatasetIndex};
use mtlso::evaluator::{
    ablation_run, evaluate, mape, mean_predictor_mape, train_and_evaluate, write_results_csv, AblationSpec, SplitPart,
    RESULTS_HEADER,
};
use mtlso::model::{PreparedGraph, Variant};
use mtlso::nn::graph_encoder::{downsample, encode_graph, select_top_k, GraphEncoder};
use mtlso::nn::head::{bce_loss, rse_loss};
use mtlso::nn::ParamStore;
use mtlso::synth::{apply_transform, generate_dataset, random_aig, DatagenConfig, TransformToken};
use mtlso::trainer::{gradient_check, predict_part, train, write_metrics_log, Component, TrainConfig};
use mtlso::util::{mix_seed, rng};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn dataset(dir: &Path, seed: u64, graphs: usize) -> DatasetIndex {
    let cfg = DatagenConfig {
        seed,
        num_graphs: graphs,
        ..DatagenConfig::default()
    };
    generate_dataset(&cfg, dir).expect("datagen");
    load_dataset(dir).expect("load")
}

fn labels_oracle() -> Outcome {
    let mut r = rng(1, 1);
    for case in 0..1000 {
        let k = r.gen_range(2..=100);
        let tenths = r.gen_range(1..=10usize);
        let spread = r.gen_range(1..=200u32);
        let values: Vec<f64> = (0..k).map(|_| r.gen_range(0..spread) as f64).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        let take = (tenths * k).div_ceil(10);
        let mut expect = vec![false; k];
        for &i in &order[..take] {
            expect[i] = true;
        }
        let got = labels_for(&values, tenths as f64 / 10.0).map_err(|e| e.to_string())?;
        ensure(got == expect, || format!("case {case}: K={k}, rho={tenths}/10 differs"))?;
    }
    Ok("1000 tables match".into())
}

fn downsampling_law() -> Outcome {
    let mut r = rng(2, 1);
    let mut checked = 0;
    for n in 1..=200usize {
        for tenths in [1usize, 3, 5, 7, 9] {
            let alpha = tenths as f64 / 10.0;
            let want = (tenths * n).div_ceil(10);
            // coarse scores force ties
            let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0..8) as f64 * 0.25).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            let mut expect = order[..want].to_vec();
            expect.sort_unstable();
            ensure(select_top_k(&scores, want) == expect, || format!("N={n}, alpha={alpha}: selection differs"))?;

            let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
            let graph = MessageGraph::from_edges(n, &edges);
            let h = Array2::from_shape_vec((n, 1), scores.clone()).unwrap();
            let (sub, x, kept) = downsample(&graph, &h, &Array2::ones((1, 1)), alpha).map_err(|e| e.to_string())?;
            ensure(kept == expect && sub.num_nodes() == want && x.nrows() == want, || {
                format!("N={n}, alpha={alpha}: kept {} nodes, want {want}", kept.len())
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (N, alpha) cases exact"))
}

fn gradient_checks() -> Outcome {
    let mut parts = Vec::new();
    for (name, c) in [
        ("graph-encoder", Component::GraphEncoder),
        ("recipe-encoder", Component::RecipeEncoder),
        ("multitask-head", Component::MultitaskHead),
    ] {
        let err = gradient_check(c, 7, 1e-4).map_err(|e| e.to_string())?;
        parts.push(format!("{name} {err:.2e}"));
        ensure(err < 1e-3, || format!("{name} max relative error {err:.3e} >= 1e-3"))?;
    }
    Ok(parts.join(", "))
}

fn transform_soundness() -> Outcome {
    let mut r = rng(4, 1);
    for case in 0..200u64 {
        let inputs = r.gen_range(1..=12);
        let ands = r.gen_range(0..=200);
        let outputs = r.gen_range(1..=6);
        let aig = random_aig(mix_seed(4, case), inputs, ands, outputs).map_err(|e| e.to_string())?;
        let patterns: Vec<u64> = (0..inputs).map(|_| r.gen()).collect();
        let before = simulate(&aig, &patterns).map_err(|e| e.to_string())?;
        for t in TransformToken::ALL {
            let out = apply_transform(&aig, t);
            let after = simulate(&out, &patterns).map_err(|e| e.to_string())?;
            ensure(before == after, || format!("case {case}: {t} changed the function"))?;
            if t == TransformToken::B {
                ensure(depth(&out) <= depth(&aig), || format!("case {case}: b raised depth"))?;
            } else {
                ensure(and_count(&out) <= and_count(&aig), || format!("case {case}: {t} raised area"))?;
            }
        }
    }
    Ok("200 graphs x 7 tokens equivalent and monotone".into())
}

fn unit_values() -> Outcome {
    let rse: f64 = rse_loss(&[2.0, 2.0], &[1.0, 3.0]).map_err(|e| e.to_string())?;
    let bce: f64 = bce_loss(&[0.5, 0.5], &[true, false]).map_err(|e| e.to_string())?;
    let m = mape(&[100.0, 200.0], &[110.0, 180.0]).map_err(|e| e.to_string())?;
    ensure((rse - 1.0).abs() < 1e-8, || format!("rse {rse}"))?;
    ensure((bce - std::f64::consts::LN_2).abs() < 1e-9, || format!("bce {bce}"))?;
    ensure((m - 10.0).abs() < 1e-9, || format!("mape {m}"))?;
    Ok(format!("rse {rse}, bce {bce:.12}, mape {m}"))
}

fn overfit() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let index = dataset(dir.path(), 6, 6);
    let config = TrainConfig::default();
    let out = train::<f32>(&config, &index).map_err(|e| e.to_string())?;
    let last = out.history.last().ok_or("no epochs")?;
    ensure(last.train_mape < 5.0, || format!("final train MAPE {:.3}% >= 5%", last.train_mape))?;
    Ok(format!("final train MAPE {:.3}% after {} epochs", last.train_mape, last.epoch))
}

fn generalization() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let index = dataset(dir.path(), 30, 30);
    let (mut ours, mut stl, mut base) = (0.0, 0.0, 0.0);
    let seeds = [0u64, 1, 2];
    for &seed in &seeds {
        let config = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        ours += train_and_evaluate(&config, &index).map_err(|e| e.to_string())?.test_mape;
        let stl_config = TrainConfig {
            variant: Variant::Stl,
            ..config.clone()
        };
        stl += train_and_evaluate(&stl_config, &index).map_err(|e| e.to_string())?.test_mape;
        let split = mtlso::dataset::split_graphs(index.num_graphs(), seed).map_err(|e| e.to_string())?;
        let idx = index.clone().with_target(config.target);
        base += mean_predictor_mape(&idx, &split.train, &split.test).map_err(|e| e.to_string())?;
    }
    let n = seeds.len() as f64;
    let (ours, stl, base) = (ours / n, stl / n, base / n);
    let summary = format!("MTLSO {ours:.3}% vs mean predictor {base:.3}%; STL {stl:.3}% (MTLSO - STL = {:+.3})", ours - stl);
    ensure(ours < base, || summary.clone())?;
    Ok(summary)
}

fn ablation_shape() -> Outcome {
    let full = std::env::var("MTLSO_FULL_ABLATION").is_ok_and(|v| v == "1");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let index = dataset(dir.path(), 30, 30);
    let (spec, base) = if full {
        (AblationSpec::default(), TrainConfig::default())
    } else {
        let spec = AblationSpec {
            seeds: vec![0],
            ..AblationSpec::default()
        };
        let base = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        (spec, base)
    };
    let rows = ablation_run(&base, &spec, &index).map_err(|e| e.to_string())?;
    let expect = spec.variants.len() * spec.layers.len() * spec.alphas.len() * spec.seeds.len();
    ensure(rows.len() == expect, || format!("{} rows, want {expect}", rows.len()))?;
    ensure(rows.iter().all(|r| r.is_finite()), || "non-finite row".into())?;
    let csv = dir.path().join("results.csv");
    write_results_csv(&csv, &rows).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure(lines.next() == Some(RESULTS_HEADER), || "header differs".into())?;
    ensure(lines.all(|l| l.split(',').count() == 11), || "row width differs".into())?;
    let mode = if full { "full grid" } else { "reduced grid (1 seed, 3 epochs)" };
    Ok(format!("{} finite rows, {mode}", rows.len()))
}

fn determinism() -> Outcome {
    std::env::set_var("MTLSO_THREADS", "1");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let index = dataset(&dir.path().join("ds"), 9, 6);
    let config = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let a = train::<f32>(&config, &index).map_err(|e| e.to_string())?;
    let b = train::<f32>(&config, &index).map_err(|e| e.to_string())?;
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_metrics_log(&pa, &a.history).map_err(|e| e.to_string())?;
    write_metrics_log(&pb, &b.history).map_err(|e| e.to_string())?;
    let (ta, tb) = (std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    ensure(ta == tb, || "metrics logs differ".into())?;

    let ckpt = Checkpoint::from_training(&config, &index, &a);
    let path = dir.path().join("ckpt.json");
    save_checkpoint(&ckpt, &path).map_err(|e| e.to_string())?;
    let loaded = load_checkpoint(&path).map_err(|e| e.to_string())?;
    ensure(loaded == ckpt, || "checkpoint round-trip differs".into())?;
    let model = loaded.to_model::<f32>().map_err(|e| e.to_string())?;
    let idx = index.clone().with_target(config.target);
    let graphs: Vec<PreparedGraph<f32>> = idx.graphs.iter().map(|g| PreparedGraph::new(&g.aig)).collect();
    let recipes = loaded.recipe_tokens().map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..idx.num_graphs()).collect();
    let before = predict_part(&a.model, &graphs, &recipes, &all).map_err(|e| e.to_string())?;
    let after = predict_part(&model, &graphs, &recipes, &all).map_err(|e| e.to_string())?;
    ensure(before.iter().zip(&after).all(|(x, y)| x.to_bits() == y.to_bits()), || "reloaded predictions differ".into())?;
    let report = evaluate(&loaded, &index, SplitPart::Train).map_err(|e| e.to_string())?;
    let last = a.history.last().unwrap().train_mape;
    ensure(report.test_mape == last, || format!("train-split evaluation {} vs log {last}", report.test_mape))?;
    Ok(format!("{} log bytes identical, {} predictions bit-exact after reload", ta.len(), after.len()))
}

fn permutation_invariance() -> Outcome {
    let mut r = rng(10, 1);
    let mut store = ParamStore::<f64>::new();
    let encoder = GraphEncoder::hierarchical(&mut store, &mut rng(10, 2), 7, 2, 0.5).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = 10;
        let mut edges = Vec::new();
        for i in 1..n {
            edges.push((r.gen_range(0..i), i));
        }
        for _ in 0..5 {
            let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
            edges.push((a, b));
        }
        let graph = MessageGraph::from_edges(n, &edges);
        let x = Array2::from_shape_fn((n, 7), |_| r.gen_range(-1.0..1.0));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        // node i of the original becomes node perm[i]
        let pedges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let pgraph = MessageGraph::from_edges(n, &pedges);
        let mut px = Array2::zeros((n, 7));
        for (i, &pi) in perm.iter().enumerate() {
            px.row_mut(pi).assign(&x.row(i));
        }
        let a = encode_graph(&store, &encoder, &x, &graph).map_err(|e| e.to_string())?;
        let b = encode_graph(&store, &encoder, &px, &pgraph).map_err(|e| e.to_string())?;
        let diff = a.0.iter().zip(b.0.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
        ensure(diff < 1e-5, || format!("case {case}: max deviation {diff:.3e}"))?;
    }
    Ok(format!("20 graphs, max deviation {worst:.2e}"))
}

type Criterion = (usize, &'static str, fn() -> Outcome, Duration);

fn main() {
    let only: Option<Vec<usize>> = std::env::var("MTLSO_ACCEPT")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [Criterion; 10] = [
        (1, "label construction matches brute force", labels_oracle, Duration::from_secs(10)),
        (2, "downsampling size law and selection", downsampling_law, Duration::from_secs(10)),
        (3, "gradient checks below 1e-3", gradient_checks, Duration::from_secs(60)),
        (4, "transform soundness", transform_soundness, Duration::from_secs(60)),
        (5, "loss and metric unit values", unit_values, Duration::from_secs(1)),
        (6, "overfit capacity below 5% train MAPE", overfit, Duration::from_secs(600)),
        (7, "test MAPE below mean predictor", generalization, Duration::from_secs(2700)),
        (8, "ablation CSV shape", ablation_shape, Duration::from_secs(7200)),
        (9, "determinism and persistence", determinism, Duration::from_secs(300)),
        (10, "permutation invariance", permutation_invariance, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {elapsed:.1?}, budget {budget:?}")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} [{id:>2}] {name}: {detail} ({elapsed:.2?})");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
