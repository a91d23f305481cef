//! End-to-end acceptance checks. Runs as a plain binary (no test harness)
//! and prints one PASS/FAIL line per criterion. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 3 5`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use tabseq::cluster::KMeansConfig;
use tabseq::data::{apply_permutation, invert_permutation, Dataset};
use tabseq::eval::roc_auc_binary;
use tabseq::experiment::{
    ablate, run_experiment, seed_dir, ExperimentConfig, ABLATION_FILE, CHECKPOINT_FILE, METRICS_FILE, ORDERING_FILE,
};
use tabseq::nn::{
    encode, train_classifier, train_dae, Architecture, ClassifierParams, DaeParams, Graph, ParamList, Tensor, TrainConfig,
};
use tabseq::ordering::{
    global_combine, minla_exact, minla_heuristic, order_features, weighted_footrule, ClusterMethod, CombineMode, Edge, FeatureGraph,
    OrderingConfig, Permutation, SortDirection,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn wdbc_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&root().join("configs/wdbc.toml")).expect("wdbc config");
    cfg.output_dir = out.to_path_buf();
    cfg
}

/// Every permutation of `items`, in lexicographic order of positions.
fn all_orders(items: &[usize]) -> Vec<Vec<usize>> {
    fn rec(rest: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            cur.push(x);
            rec(rest, cur, out);
            cur.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    rec(&mut sorted, &mut Vec::new(), &mut out);
    out
}

fn wdbc_reproduction() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = wdbc_config(&tmp.path().join("ordered"));
    let n = cfg.seeds.len() as f64;
    let t0 = Instant::now();
    let ordered = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let per_seed = t0.elapsed().as_secs_f64() / n;

    let mut plain = wdbc_config(&tmp.path().join("plain"));
    plain.ordering.enabled = false;
    let unordered = run_experiment(&plain).map_err(|e| e.to_string())?;

    ensure(ordered.seeds.len() == 5 && ordered.failures().next().is_none(), || "ordered run had failing seeds".into())?;
    ensure(unordered.failures().next().is_none(), || "unordered run had failing seeds".into())?;
    let (acc, auc) = (ordered.mean_accuracy.unwrap_or(0.0), ordered.mean_auc.unwrap_or(0.0));
    let plain_acc = unordered.mean_accuracy.unwrap_or(0.0);
    let detail = format!(
        "ordered acc {acc:.4} auc {auc:.4}; unordered acc {plain_acc:.4} auc {:.4}; {per_seed:.1} s/seed",
        unordered.mean_auc.unwrap_or(0.0)
    );
    ensure(acc >= 0.90 && auc >= 0.93 && plain_acc >= 0.90 && per_seed < 180.0, || detail.clone())?;
    Ok(detail)
}

fn synthetic_wide() -> Outcome {
    let (n, m, informative) = (316, 393, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(393);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv_path = tmp.path().join("wide.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| e.to_string())?;
    let mut header: Vec<String> = (0..m).map(|j| format!("f{j}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| e.to_string())?;
    for r in 0..n {
        let y = r % 2;
        let mut row: Vec<String> = (0..m)
            .map(|j| {
                let shift = if j < informative && y == 1 { 1.0 } else { 0.0 };
                format!("{}", noise.sample(&mut rng) + shift)
            })
            .collect();
        row.push(if y == 1 { "pos".into() } else { "neg".into() });
        w.write_record(&row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())?;
    drop(w);

    let text = format!(
        "seeds = [0]\noutput_dir = {:?}\n[data]\npath = {:?}\ntarget = \"y\"\n[clustering]\nalgorithm = \"kmeans\"\nnum_clusters = 5\n",
        tmp.path().join("out").display().to_string(),
        csv_path.display().to_string()
    );
    let cfg = ExperimentConfig::from_toml_str(&text, tmp.path()).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let s = run_experiment(&cfg).map_err(|e| e.to_string())?;
    if let Some((seed, e)) = s.failures().next() {
        return Err(format!("seed {seed}: {e}"));
    }
    let run = s.ok_runs().next().ok_or("no run")?;
    let (acc, auc) = (run.report.accuracy, run.report.auc);
    ensure((0.0..=1.0).contains(&acc) && (0.0..=1.0).contains(&auc), || format!("metrics out of range: {acc} {auc}"))?;
    ensure(run.n_clusters == Some(5), || format!("expected 5 clusters, got {:?}", run.n_clusters))?;
    let metrics = std::fs::read_to_string(cfg.output_dir.join(METRICS_FILE)).map_err(|e| e.to_string())?;
    ensure(metrics.lines().nth(1).is_some_and(|l| l.starts_with("0,ok,")), || format!("metrics.csv: {metrics}"))?;
    Ok(format!("316x393, k=5: acc {acc:.4} auc {auc:.4} in {:.0} s", t0.elapsed().as_secs_f64()))
}

fn total_loss(dae: &DaeParams, clf: &ClassifierParams, x: &Tensor, y: &[usize]) -> (f64, Vec<Tensor>) {
    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let (z, x_hat) = dae.nodes(&mut g, xi, 0).unwrap();
    let rec = g.mse(x_hat, x).unwrap();
    let logits = clf.nodes(&mut g, z, DaeParams::N_TENSORS).unwrap();
    let ce = clf.loss_node(&mut g, logits, y).unwrap();
    let loss = g.add(rec, ce).unwrap();
    let mut shapes = dae.shapes();
    shapes.extend(clf.shapes());
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let grads = g.backward(loss).unwrap().dense(&shape_refs);
    (g.value(loss).unwrap().item(), grads)
}

fn gradient_check() -> Outcome {
    const H: f64 = 1e-5;
    // Relative error is taken against max(|analytic|, |numeric|, FLOOR) so
    // that exactly-zero gradients compare absolutely.
    const FLOOR: f64 = 1e-8;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for n_classes in [2, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(31 + n_classes as u64);
        let cfg = TrainConfig {
            model_dim: 4,
            heads: 2,
            latent_dim: 4,
            hidden_dim: 3,
            ..TrainConfig::default()
        };
        let arch = Architecture::new(6, n_classes, &cfg);
        let mut dae = DaeParams::init(&arch, &mut rng);
        let mut clf = ClassifierParams::init(&arch, &mut rng);
        // Non-zero biases so their gradients are exercised away from zero.
        for t in dae.tensors_mut().into_iter().chain(clf.tensors_mut()) {
            if t.shape().len() == 1 {
                t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
            }
        }
        let x = Tensor::new(vec![5, 6], (0..30).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let y: Vec<usize> = (0..5).map(|i| i % n_classes).collect();
        let (_, analytic) = total_loss(&dae, &clf, &x, &y);
        let n_dae = DaeParams::N_TENSORS;
        for slot in 0..analytic.len() {
            for i in 0..analytic[slot].len() {
                let eval = |delta: f64| {
                    let (mut d, mut c) = (dae.clone(), clf.clone());
                    if slot < n_dae {
                        d.tensors_mut()[slot].data_mut()[i] += delta;
                    } else {
                        c.tensors_mut()[slot - n_dae].data_mut()[i] += delta;
                    }
                    total_loss(&d, &c, &x, &y).0
                };
                let numeric = (eval(H) - eval(-H)) / (2.0 * H);
                let a = analytic[slot].data()[i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let detail = format!("{checked} parameters, worst relative error {worst:.2e}");
    ensure(worst < 1e-4, || detail.clone())?;
    Ok(detail)
}

fn arrangement_cost(g: &FeatureGraph, order: &[usize]) -> f64 {
    let pos = |v: usize| order.iter().position(|&x| x == v).unwrap();
    g.edges().iter().map(|e| e.weight * pos(e.i).abs_diff(pos(e.j)) as f64).sum()
}

fn minla_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_ratio = 1.0f64;
    for case in 0..50 {
        let n = rng.gen_range(1..=8);
        let mut pool: Vec<usize> = (0..20).collect();
        pool.shuffle(&mut rng);
        let vertices: Vec<usize> = pool[..n].to_vec();
        let density = rng.gen_range(0.2..0.9);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(density) {
                    edges.push(Edge {
                        i: vertices[a],
                        j: vertices[b],
                        weight: rng.gen_range(1..=5) as f64 * 0.25,
                    });
                }
            }
        }
        let g = FeatureGraph::new(vertices.clone(), edges).map_err(|e| e.to_string())?;
        let best = all_orders(&vertices).iter().map(|o| arrangement_cost(&g, o)).fold(f64::INFINITY, f64::min);
        let exact = minla_exact(&g).map_err(|e| e.to_string())?;
        let heur = minla_heuristic(&g).map_err(|e| e.to_string())?;
        let (ce, ch) = (arrangement_cost(&g, exact.order()), arrangement_cost(&g, heur.order()));
        ensure((ce - best).abs() < 1e-9, || format!("case {case}: exact {ce} vs brute force {best}"))?;
        ensure(ch <= 1.5 * best + 1e-9, || format!("case {case}: heuristic {ch} vs optimum {best}"))?;
        if best > 0.0 {
            worst_ratio = worst_ratio.max(ch / best);
        }
    }
    Ok(format!("50 graphs, exact optimal, worst heuristic ratio {worst_ratio:.3}"))
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let n = rng.gen_range(2..60);
        let levels = rng.gen_range(2..8);
        let mut pos: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        pos[0] = true;
        pos[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let (mut conc, mut tied) = (0u64, 0u64);
        for i in (0..n).filter(|&i| pos[i]) {
            for j in (0..n).filter(|&j| !pos[j]) {
                if scores[i] > scores[j] {
                    conc += 1;
                } else if scores[i] == scores[j] {
                    tied += 1;
                }
            }
        }
        let p = pos.iter().filter(|&&b| b).count() as u64;
        let want = (conc as f64 + 0.5 * tied as f64) / (p * (n as u64 - p)) as f64;
        let got = roc_auc_binary(&pos, &scores).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("case {case}: fast {got} vs pairwise {want}"))?;
    }
    Ok("100 instances with ties, exact equality".into())
}

fn borda_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..100 {
        let m = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=3);
        let counts: Vec<u64> = (0..k).map(|_| rng.gen_range(1..6)).collect();
        let total: u64 = counts.iter().sum();
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let locals: Vec<Permutation> = (0..k)
            .map(|c| {
                let mut o: Vec<usize> = (0..m).collect();
                o.shuffle(&mut rng);
                Permutation::local(c, o)
            })
            .collect();
        // Weighted squared rank distance, in integers scaled by `total`.
        // The lexicographically first minimizer is the reference order.
        let rank: Vec<Vec<i64>> = locals
            .iter()
            .map(|p| {
                let mut r = vec![0i64; m];
                for (i, &f) in p.order().iter().enumerate() {
                    r[f] = i as i64;
                }
                r
            })
            .collect();
        let dist = |order: &[usize]| -> i64 {
            order
                .iter()
                .enumerate()
                .map(|(pos, &f)| (0..k).map(|c| counts[c] as i64 * (pos as i64 - rank[c][f]).pow(2)).sum::<i64>())
                .sum()
        };
        let mut best: Option<(i64, Vec<usize>)> = None;
        for o in all_orders(&(0..m).collect::<Vec<_>>()) {
            let d = dist(&o);
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, o));
            }
        }
        let want = best.unwrap().1;
        let got = global_combine(&locals, &weights, CombineMode::Borda, m).map_err(|e| e.to_string())?;
        ensure(got.order() == want.as_slice(), || format!("case {case}: {:?} vs oracle {want:?}", got.order()))?;
        let foot: f64 = locals
            .iter()
            .zip(&weights)
            .map(|(p, &w)| {
                w * p.order().iter().enumerate().map(|(i, f)| i.abs_diff(want.iter().position(|x| x == f).unwrap())).sum::<usize>() as f64
            })
            .sum();
        let cost = got.cost().ok_or("missing cost")?;
        ensure((cost - foot).abs() < 1e-9, || format!("case {case}: cost {cost} vs footrule {foot}"))?;
        let recomputed = weighted_footrule(&got, &locals, &weights).map_err(|e| e.to_string())?;
        ensure((recomputed - foot).abs() < 1e-9, || format!("case {case}: footrule {recomputed} vs {foot}"))?;
    }
    Ok("100 instances match the brute-force weighted rank aggregate".into())
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Dataset {
    let scales: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..3.0)).collect();
    let values = Array2::from_shape_fn((n, m), |(_, j)| rng.gen_range(0.0..1.0) * scales[j]);
    let labels = (0..n).map(|i| i % 2).collect();
    Dataset::new(values, (0..m).map(|j| format!("x{j}")).collect(), labels, vec!["a".into(), "b".into()]).unwrap()
}

fn naive_variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

fn ordering_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for case in 0..20 {
        let (n, m) = (rng.gen_range(12..60), rng.gen_range(2..15));
        let d = random_dataset(&mut rng, n, m);
        let k = rng.gen_range(1..=4);
        for dir in [SortDirection::Ascending, SortDirection::Descending] {
            let method = ClusterMethod::Kmeans(KMeansConfig::new(k, case));
            let out = order_features(&d, &OrderingConfig::variance(dir), &method).map_err(|e| e.to_string())?;
            out.permutation.check_bijective(m).map_err(|e| format!("case {case}: {e}"))?;
            let members = out.clustering.members();
            for (c, local) in out.locals.iter().enumerate() {
                local.check_bijective(m).map_err(|e| format!("case {case}: {e}"))?;
                let vars: Vec<f64> = local
                    .order()
                    .iter()
                    .map(|&f| naive_variance(&members[c].iter().map(|&r| d.values[[r, f]]).collect::<Vec<_>>()))
                    .collect();
                let monotone = vars.windows(2).all(|w| match dir {
                    SortDirection::Ascending => w[0] <= w[1] + 1e-12,
                    SortDirection::Descending => w[0] + 1e-12 >= w[1],
                });
                ensure(monotone, || format!("case {case} cluster {c}: variances {vars:?} not sorted {dir:?}"))?;
            }
            let there = apply_permutation(&d, &out.permutation).map_err(|e| e.to_string())?;
            let inv = invert_permutation(&out.permutation).map_err(|e| e.to_string())?;
            let back = apply_permutation(&there, &inv).map_err(|e| e.to_string())?;
            ensure(back == d, || format!("case {case}: apply then invert is not the identity"))?;
            checked += 1;
        }
        let graph = order_features(&d, &OrderingConfig::graph(0.0), &ClusterMethod::Kmeans(KMeansConfig::new(k.min(m), case)))
            .map_err(|e| format!("case {case} graph mode: {e}"))?;
        graph.permutation.check_bijective(m).map_err(|e| format!("case {case} graph mode: {e}"))?;
        checked += 1;
    }
    Ok(format!("{checked} orderings: bijective, invertible, variance-monotone"))
}

fn training_progress() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, m, rank) = (200, 20, 3);
    let u = Array2::from_shape_fn((n, rank), |_| rng.gen_range(0.0..1.0));
    let v = Array2::from_shape_fn((rank, m), |_| rng.gen_range(0.0..1.0));
    let mut x = u.dot(&v);
    for mut col in x.columns_mut() {
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        col.mapv_inplace(|v| (v - lo) / (hi - lo));
    }
    let cfg = TrainConfig {
        epochs: 20,
        seed: 8,
        ..TrainConfig::default()
    };
    let dae = train_dae(x.view(), None, &cfg).map_err(|e| e.to_string())?;
    let (first, last) = (dae.curve[0].train_loss, dae.curve.last().unwrap().train_loss);
    ensure(last < first, || format!("DAE loss {first:.5} -> {last:.5}"))?;

    let m2 = 10;
    let blobs = Array2::from_shape_fn((120, m2), |(r, _)| {
        let centre = if r % 2 == 0 { 0.2 } else { 0.8 };
        centre + rng.gen_range(-0.08..0.08)
    });
    let y: Vec<usize> = (0..120).map(|r| r % 2).collect();
    let enc_cfg = TrainConfig {
        epochs: 5,
        seed: 9,
        ..TrainConfig::default()
    };
    let enc = train_dae(blobs.view(), None, &enc_cfg).map_err(|e| e.to_string())?;
    let z = encode(&enc.params, blobs.view()).map_err(|e| e.to_string())?;
    let clf = train_classifier(z.view(), &y, None, 2, &TrainConfig { seed: 10, ..TrainConfig::default() }).map_err(|e| e.to_string())?;
    let acc = clf.curve.last().unwrap().train_accuracy;
    ensure(acc >= 0.99, || format!("classifier train accuracy {acc:.4}"))?;
    Ok(format!("DAE MSE {first:.5} -> {last:.5}; classifier train accuracy {acc:.4}"))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let mut cfg = wdbc_config(d);
        cfg.seeds = vec![3];
        run_experiment(&cfg).map_err(|e| e.to_string())?;
    }
    let files = [
        PathBuf::from(METRICS_FILE),
        seed_dir(Path::new(""), 3).join(ORDERING_FILE),
        seed_dir(Path::new(""), 3).join(CHECKPOINT_FILE),
    ];
    for f in &files {
        let a = std::fs::read(dirs[0].join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        let b = std::fs::read(dirs[1].join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        ensure(!a.is_empty() && a == b, || format!("{} differs between runs", f.display()))?;
    }
    Ok("metrics.csv, ordering.txt, checkpoint.txt byte-identical".into())
}

fn ablation_grid() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = wdbc_config(tmp.path());
    cfg.seeds = vec![0];
    cfg.ablation.cluster_counts = (1..=8).collect();
    cfg.ablation.directions = vec![SortDirection::Ascending, SortDirection::Descending];
    let rows = ablate(&cfg).map_err(|e| e.to_string())?;
    ensure(rows.len() == 16, || format!("{} rows", rows.len()))?;
    let bad: Vec<String> = rows.iter().filter(|r| r.status != "ok").map(|r| format!("k={} {:?}: {}", r.num_clusters, r.direction, r.status)).collect();
    ensure(bad.is_empty(), || bad.join("; "))?;
    let mut rdr = csv::Reader::from_path(tmp.path().join(ABLATION_FILE)).map_err(|e| e.to_string())?;
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure(records.len() == 16, || format!("csv has {} data rows", records.len()))?;
    let mut cells: Vec<(String, String)> = records.iter().map(|r| (r[1].to_string(), r[2].to_string())).collect();
    cells.sort();
    cells.dedup();
    ensure(cells.len() == 16, || "duplicate (k, direction) cells".into())?;
    for r in &records {
        for col in ["F_G", "accuracy", "auc"] {
            let i = header.iter().position(|h| h == col).ok_or(format!("missing column {col}"))?;
            let v: f64 = r[i].parse().map_err(|_| format!("{col} = {:?}", &r[i]))?;
            ensure(v.is_finite(), || format!("{col} = {v}"))?;
        }
    }
    Ok("16 rows, every cell ok with finite F_G, accuracy and AUC".into())
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "WDBC accuracy/AUC band and runtime", wdbc_reproduction),
        (2, "synthetic 316x393 end to end", synthetic_wide),
        (3, "gradients vs finite differences", gradient_check),
        (4, "MinLA exact and heuristic vs brute force", minla_oracle),
        (5, "ROC AUC vs pairwise oracle", auc_oracle),
        (6, "Borda vs brute-force aggregation", borda_oracle),
        (7, "ordering invariants", ordering_invariants),
        (8, "training progress", training_progress),
        (9, "determinism", determinism),
        (10, "ablation grid", ablation_grid),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
