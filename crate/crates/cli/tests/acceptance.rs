//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use hierdoc_core::embedding::{hashed_embed, read_emb1, write_embeddings, Emb1Record};
use hierdoc_core::model::{predict, Classifier, ClassDistribution, GeometrySpec, ModelConfig, ModelVersion};
use hierdoc_core::nncore::checkpoint::{read_checkpoint, read_tensors, write_tensors, NamedTensor};
use hierdoc_core::nncore::{
    cross_entropy_clipped, lstm_sequence_forward, Initializer, Matrix, Params, SequenceMode, SequenceOutput,
};
use hierdoc_core::rng::SplitMix64;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn hierdoc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierdoc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HIERDOC_SEED")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn hierdoc")
}

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn write_json(path: &Path, v: &Value) -> Result<(), String> {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).map_err(|e| e.to_string())
}

fn train(dir: &Path, name: &str, cfg: &Value, quiet: bool) -> Result<(Value, String), String> {
    let cfg_path = dir.join(format!("{name}.json"));
    write_json(&cfg_path, cfg)?;
    let mut args = vec!["train", "--config", cfg_path.to_str().unwrap(), "--out", "runs"];
    if quiet {
        args.insert(0, "-q");
    }
    let o = hierdoc(&args, dir);
    let log = String::from_utf8_lossy(&o.stderr).into_owned();
    if !o.status.success() {
        return Err(format!("train {name} exited {:?}: {log}", o.status.code()));
    }
    let record = fs::read_to_string(dir.join("runs").join(name).join("run.json")).map_err(|e| e.to_string())?;
    Ok((serde_json::from_str(&record).map_err(|e| e.to_string())?, log))
}

fn desk_config(version: &str, seed: u64, overlap: f64, vocab: usize) -> Value {
    json!({
        "corpus": {"synthetic": {"docs_per_class": 50, "vocab_per_class": vocab, "overlap": overlap, "seed": seed}},
        "model": {
            "version": version,
            "geometry": {"sentences": 10, "words": 8},
            "embedding": {"kind": "hashed", "dim": 32},
            "hidden_word": 32,
            "hidden_sentence": 32,
            "dense_hidden": 64
        },
        "train": {"epochs": 10, "batch_size": 10, "seed": seed, "split": {"seed": seed},
                  "optimizer": {"kind": "adam", "lr": 0.001}}
    })
}

fn tiny_config(version: &str, docs_per_class: usize, geometry: Value) -> Value {
    json!({
        "corpus": {"synthetic": {"docs_per_class": docs_per_class, "seed": 4}},
        "model": {
            "version": version,
            "geometry": geometry,
            "embedding": {"kind": if version == "ver_0" { "lookup-trainable" } else { "hashed" }, "dim": 8},
            "hidden_word": 4,
            "hidden_sentence": 4,
            "dense_hidden": 8
        },
        "train": {"epochs": 1, "batch_size": 10, "seed": 4}
    })
}

fn loss_ceiling() -> Outcome {
    let l = cross_entropy_clipped(&[1.0f64, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1, 1e-7).map_err(|e| e.to_string())?;
    check((l - 16.1181).abs() <= 1e-3, format!("loss {l:.6} vs 16.1181 ± 1e-3"))
}

fn loss_floor() -> Outcome {
    let l = cross_entropy_clipped(&[1.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0, 1e-7).map_err(|e| e.to_string())?;
    check((1.19e-7..=1.20e-7).contains(&l), format!("loss {l:e} in [1.19e-7, 1.20e-7]"))
}

fn worked_example() -> Outcome {
    let v = [
        8.74730467e-05,
        1.11537855e-04,
        1.27863220e-03,
        9.55423748e-04,
        5.19969326e-04,
        9.96643186e-01,
        5.63649974e-06,
        3.98051459e-04,
    ];
    let sum: f64 = v.iter().sum();
    let d = ClassDistribution::from_probs(&v).map_err(|e| e.to_string())?;
    let cat = predict(&d);
    check(
        d.argmax() == 5 && (sum - 1.0).abs() <= 1e-6,
        format!("argmax {} ({}), sum {sum:.9}", d.argmax(), cat.name()),
    )
}

fn gradient_check(dir: &Path) -> Outcome {
    let o = hierdoc(&["gradcheck", "--tolerance", "1e-4", "--samples", "200"], dir);
    let out = String::from_utf8_lossy(&o.stdout);
    let worst: Vec<String> = out
        .lines()
        .filter(|l| l.starts_with("ver_"))
        .map(|l| {
            let v = l.split('\t').next().unwrap_or("");
            let e = l.rsplit(' ').next().unwrap_or("");
            format!("{v} {e}")
        })
        .collect();
    check(
        o.status.success() && worst.len() == 3,
        format!("max relative error: {} (exit {:?})", worst.join(", "), o.status.code()),
    )
}

fn desk_scale(dir: &Path) -> Outcome {
    let (record, _) = train(dir, "desk", &desk_config("ver_2", 1, 0.0, 12), true)?;
    let metrics = record["metrics"].as_array().ok_or("no metrics")?;
    let hit = metrics
        .iter()
        .find(|m| m["train_acc"].as_f64() == Some(1.0) && m["val_acc"].as_f64().unwrap_or(0.0) >= 0.95);
    let last = metrics.last().ok_or("no epochs")?;
    let summary = format!(
        "final train {} val {}",
        last["train_acc"].as_f64().unwrap_or(f64::NAN),
        last["val_acc"].as_f64().unwrap_or(f64::NAN)
    );
    match hit {
        Some(m) => Ok(format!("reached at epoch {}; {summary}", m["epoch"])),
        None => Err(format!("not reached in {} epochs; {summary}", metrics.len())),
    }
}

fn version_ordering(dir: &Path) -> Outcome {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 1..=3u64 {
        let mut acc = [0.0; 2];
        for (k, v) in ["ver_1", "ver_2"].iter().enumerate() {
            let (record, _) = train(dir, &format!("order-{v}-{seed}"), &desk_config(v, seed, 0.3, 10), true)?;
            acc[k] = record["final_metrics"]["val_acc"].as_f64().ok_or("no val_acc")?;
        }
        if acc[1] >= acc[0] {
            wins += 1;
        }
        detail.push(format!("seed {seed}: ver_1 {} ver_2 {}", acc[0], acc[1]));
    }
    check(wins >= 2, format!("ver_2 >= ver_1 on {wins}/3 seeds ({})", detail.join("; ")))
}

fn steps_from_log(log: &str) -> Vec<usize> {
    log.lines()
        .filter_map(|l| {
            let rest = &l[l.find("epoch ")?..];
            let (_, tail) = rest.split_once(": ")?;
            tail.split(' ').next()?.parse().ok()
        })
        .collect()
}

fn batch_protocol(dir: &Path) -> Outcome {
    let mut cfg = tiny_config("ver_2", 25, json!({"sentences": 2, "words": 3}));
    let mut seen = Vec::new();
    let mut train_size = 0;
    for batch in [10, 1] {
        cfg["train"]["batch_size"] = json!(batch);
        let (record, log) = train(dir, &format!("batch{batch}"), &cfg, false)?;
        train_size = record["train_size"].as_u64().unwrap_or(0);
        seen.push(steps_from_log(&log));
    }
    check(
        train_size == 160 && seen[0] == [16] && seen[1] == [160],
        format!("{train_size} train docs; logged steps batch 10 {:?}, batch 1 {:?}", seen[0], seen[1]),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let mut cfg = desk_config("ver_2", 7, 0.0, 12);
    cfg["train"]["epochs"] = json!(3);
    let mut csvs = Vec::new();
    for name in ["det-a", "det-b"] {
        train(dir, name, &cfg, true)?;
        csvs.push(fs::read(dir.join("runs").join(name).join("metrics.csv")).map_err(|e| e.to_string())?);
    }
    check(csvs[0] == csvs[1] && !csvs[0].is_empty(), format!("metrics.csv {} bytes, identical: {}", csvs[0].len(), csvs[0] == csvs[1]))
}

fn oracle_equivalences(dir: &Path) -> Outcome {
    let mut rng = SplitMix64::new(2024);
    let mut mismatches = 0;
    for case in 0..1000u64 {
        let t = 1 + rng.below(12) as usize;
        let i = 1 + rng.below(6) as usize;
        let h = 1 + rng.below(6) as usize;
        let p = Initializer::new(case).lstm::<f64>(i, h);
        let xs = Matrix::from_vec(t, i, (0..t * i).map(|_| rng.next_signed_unit()).collect());
        let all = lstm_sequence_forward(&xs, &p, SequenceMode::ManyToMany).map_err(|e| e.to_string())?;
        let last = lstm_sequence_forward(&xs, &p, SequenceMode::ManyToOne).map_err(|e| e.to_string())?;
        match (all, last) {
            (SequenceOutput::All(m), SequenceOutput::Last(v)) if m.row(t - 1) == v.as_slice() => {}
            _ => mismatches += 1,
        }
    }

    let golden: [u64; 4] = [0xbfa41ce31afc7642, 0xbf660d5971f686de, 0xbfa090e9318dc0bb, 0x3f9769ba8fb61913];
    let v = hashed_embed("台", 768).map_err(|e| e.to_string())?;
    let hashed_ok = v.iter().zip(golden).all(|(x, g)| x.to_bits() == g);

    let records = vec![
        Emb1Record { doc_id: "n1".into(), token_count: 2, values: vec![0.5, -1.0, 2.0, 0.0, 1e-8, 3.5, -0.25, 7.0] },
        Emb1Record { doc_id: "空".into(), token_count: 0, values: vec![] },
    ];
    let emb = dir.join("rt.emb1");
    write_embeddings(&emb, 4, &records).map_err(|e| e.to_string())?;
    let back = read_emb1(&emb).map_err(|e| e.to_string())?;
    let emb_ok = back.dim == 4 && back.records == records;

    let tensors = vec![
        NamedTensor { name: "a.w".into(), dims: vec![2, 3], data: vec![1.0, -2.0, 3.5, 0.0, f32::MIN_POSITIVE, 9.0] },
        NamedTensor { name: "b".into(), dims: vec![1], data: vec![-0.125] },
    ];
    let prm = dir.join("rt.prm1");
    write_tensors(&prm, &tensors).map_err(|e| e.to_string())?;
    let mut prm_ok = read_tensors(&prm).map_err(|e| e.to_string())? == tensors;
    for version in ModelVersion::ALL {
        let mut cfg = ModelConfig::new(version);
        cfg.embedding.dim = 8;
        cfg.hidden_word = 4;
        cfg.hidden_sentence = 4;
        cfg.dense_hidden = 6;
        cfg.geometry = GeometrySpec::Explicit(hierdoc_core::corpus::Geometry::new(3, 4));
        let m = Classifier::<f32>::init(&cfg, 10, 3).map_err(|e| e.to_string())?;
        let path = dir.join(format!("{version}.prm1"));
        hierdoc_core::nncore::checkpoint::write_checkpoint(&path, &m).map_err(|e| e.to_string())?;
        let mut r = Classifier::<f32>::init(&cfg, 10, 4).map_err(|e| e.to_string())?;
        read_checkpoint(&path, &mut r).map_err(|e| e.to_string())?;
        prm_ok &= r.flatten() == m.flatten();
    }

    check(
        mismatches == 0 && hashed_ok && emb_ok && prm_ok,
        format!("lstm mismatches {mismatches}/1000, hashed bits {hashed_ok}, EMB1 {emb_ok}, PRM1 {prm_ok}"),
    )
}

fn geometry_coverage(dir: &Path) -> Outcome {
    let mut done = Vec::new();
    for preset in ["DE_1", "DE_150", "DE_600", "DE_1000_A", "DE_1000_B"] {
        let cfg = tiny_config("ver_2", 4, json!(preset));
        let name = format!("geo-{}", preset.to_lowercase());
        let (record, _) = train(dir, &name, &cfg, true)?;
        let total = record["corpus_size"].as_u64().unwrap_or(0);
        let csv = fs::read_to_string(dir.join("runs").join(&name).join("metrics.csv")).map_err(|e| e.to_string())?;
        let rows: Vec<&str> = csv.lines().collect();
        let valid = rows.len() == 2
            && rows[1].split(',').skip(1).all(|x| x.parse::<f64>().map(f64::is_finite).unwrap_or(false));
        if total != 32 || !valid {
            return Err(format!("{preset}: {total} docs, metrics {rows:?}"));
        }
        done.push(preset);
    }
    Ok(format!("{} trained one epoch on 32 docs", done.join(", ")))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("loss ceiling", Box::new(loss_ceiling)),
        ("loss floor", Box::new(loss_floor)),
        ("worked example", Box::new(worked_example)),
        ("gradient check", Box::new(|| gradient_check(dir))),
        ("desk-scale separable", Box::new(|| desk_scale(dir))),
        ("version ordering", Box::new(|| version_ordering(dir))),
        ("batch protocol", Box::new(|| batch_protocol(dir))),
        ("determinism", Box::new(|| determinism(dir))),
        ("oracle equivalences", Box::new(|| oracle_equivalences(dir))),
        ("geometry coverage", Box::new(|| geometry_coverage(dir))),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS  {name:<22} {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<22} {msg} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
