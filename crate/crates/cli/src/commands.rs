use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;

use hierdoc_core::config::{
    apply_override, from_value, load_run_config, read_json, seed_from_env, CorpusSource, RunConfig,
};
use hierdoc_core::corpus::{split_train_valid, Category, Document, Geometry, Segmenter};
use hierdoc_core::embedding::{write_embeddings, Emb1Record, EmbeddingProvider, HashedProvider, ProviderKind};
use hierdoc_core::model::{
    check_gradients, Classifier, GeometrySpec, ModelConfig, ModelInput, ModelVersion,
};
use hierdoc_core::nncore::GradCheckOptions;
use hierdoc_core::synthetic::SyntheticSpec;
use hierdoc_core::trainer::{
    evaluate as evaluate_set, format_sig, load_corpus, run_experiment, segment_labeled, write_comparison_csv,
    ComparisonRow, InputBuilder,
};

use crate::failure::{Failure, OrFail, EXIT_CONFIG, EXIT_DATA, EXIT_FAILURE, EXIT_GRADCHECK};
use crate::rundir::{load_run, write_run, CHECKPOINT_FILE};
use crate::{EvaluateArgs, GradcheckArgs, PredictArgs, PrepareArgs, SweepArgs, TrainArgs};

const MAX_GRADCHECK_HIDDEN: usize = 32;

fn parse_geometry(s: &str) -> Result<Geometry, Failure> {
    if let Ok(spec) = serde_json::from_value::<GeometrySpec>(Value::String(s.to_string())) {
        return Ok(spec.geometry());
    }
    let bad = || Failure::msg(EXIT_CONFIG, format!("geometry {s:?}: expected a DE_* preset or SxW"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (sentences, words) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if sentences == 0 || words == 0 {
        return Err(bad());
    }
    Ok(Geometry::new(sentences, words))
}

pub fn prepare(args: &PrepareArgs) -> Result<(), Failure> {
    let (docs, mut geometry, mut dim) = match (&args.corpus, &args.config) {
        (Some(path), _) => (load_corpus(&CorpusSource::Path(path.clone()))?, ModelConfig::new(ModelVersion::Ver2).geometry(), 768),
        (None, Some(cfg)) => {
            let cfg = load_run_config(cfg, &[], None)?;
            (load_corpus(&cfg.corpus)?, cfg.model.geometry(), cfg.model.embedding.dim)
        }
        (None, None) => return Err(Failure::msg(EXIT_CONFIG, "either --corpus or --config is required")),
    };
    if let Some(g) = &args.geometry {
        geometry = parse_geometry(g)?;
    }
    if let Some(d) = args.dim {
        if d == 0 {
            return Err(Failure::msg(EXIT_CONFIG, "--dim must be positive"));
        }
        dim = d;
    }
    let mut counts = [0usize; Category::COUNT];
    let mut unlabeled = 0;
    for d in &docs {
        match d.label {
            Some(c) => counts[c.index()] += 1,
            None => unlabeled += 1,
        }
    }
    let segmenter = Segmenter::new(geometry);
    let grids: Vec<_> = docs.par_iter().map(|d| segmenter.segment(d)).collect();
    let kept: usize = grids.iter().map(|g| g.token_count()).sum();
    let mut out = std::io::stdout().lock();
    let mut emit = |line: String| writeln!(out, "{line}").or_fail("writing to stdout");
    emit(format!("documents\t{}", docs.len()))?;
    for c in Category::ALL {
        emit(format!("{}\t{}", c.name(), counts[c.index()]))?;
    }
    if unlabeled > 0 {
        emit(format!("unlabeled\t{unlabeled}"))?;
    }
    emit(format!("geometry\t{}x{}", geometry.sentences, geometry.words))?;
    emit(format!("tokens_kept\t{kept}"))?;
    if let Some(path) = &args.write_corpus {
        let mut text = String::new();
        for d in &docs {
            let mut obj = serde_json::Map::new();
            obj.insert("id".into(), Value::String(d.id.clone()));
            obj.insert("text".into(), Value::String(d.text.clone()));
            if let Some(c) = d.label {
                obj.insert("category".into(), Value::String(c.name().into()));
            }
            text.push_str(&Value::Object(obj).to_string());
            text.push('\n');
        }
        fs::write(path, text).or_fail(format!("writing {}", path.display()))?;
        emit(format!("corpus\t{}", path.display()))?;
    }
    if let Some(path) = &args.emb1 {
        let provider = HashedProvider::new(dim);
        let records = docs
            .par_iter()
            .zip(&grids)
            .map(|(d, g)| {
                let mut values = Vec::with_capacity(g.token_count() * dim);
                for (_, tok) in g.real_tokens() {
                    values.extend(provider.embed(tok)?);
                }
                Ok(Emb1Record { doc_id: d.id.clone(), token_count: g.token_count(), values })
            })
            .collect::<Result<Vec<_>, hierdoc_core::embedding::EmbeddingError>>()?;
        write_embeddings(path, dim, &records)?;
        emit(format!("emb1\t{}\t{} records, dim {dim}", path.display(), records.len()))?;
    }
    Ok(())
}

fn default_run_name(cfg: &RunConfig, config_path: &Path) -> String {
    cfg.name.clone().unwrap_or_else(|| {
        config_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| cfg.run_name(0))
    })
}

pub fn train(args: &TrainArgs, out: &Path) -> Result<(), Failure> {
    let cfg = load_run_config(&args.config, &args.overrides, seed_from_env()?)?;
    let dir = out.join(default_run_name(&cfg, &args.config));
    let exp = run_experiment(&cfg)?;
    write_run(&dir, &exp)?;
    let f = &exp.record.final_metrics;
    println!("run\t{}", dir.display());
    println!(
        "final\tacc {} loss {} val_acc {} val_loss {}",
        format_sig(f.train_acc, 6),
        format_sig(f.train_loss, 6),
        format_sig(f.val_acc, 6),
        format_sig(f.val_loss, 6)
    );
    Ok(())
}

fn checkpoint_path(run: Option<&PathBuf>, checkpoint: Option<&PathBuf>) -> PathBuf {
    match (checkpoint, run) {
        (Some(c), _) => c.clone(),
        (None, Some(r)) => r.join(CHECKPOINT_FILE),
        (None, None) => PathBuf::from(CHECKPOINT_FILE),
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let run = load_run(&args.run.join(CHECKPOINT_FILE))?;
    let docs: Vec<Document> = match &args.corpus {
        Some(p) => load_corpus(&CorpusSource::Path(p.clone()))?,
        None => {
            let all = load_corpus(&run.config.corpus)?;
            split_train_valid(&all, &run.config.train.split)?.1
        }
    };
    let segmenter = Segmenter::new(run.config.model.geometry());
    let grids = segment_labeled(&docs, &segmenter)?;
    let builder =
        InputBuilder::for_inference(&run.config.model, &segmenter, run.vocab, &docs, grids.iter().map(|g| &g.grid))?;
    let (acc, loss) = evaluate_set(&run.model, &grids, &builder, run.config.model.clip_epsilon)?;
    println!("documents\t{}", grids.len());
    println!("accuracy\t{}", format_sig(acc, 6));
    println!("loss\t{}", format_sig(loss, 6));
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<(), Failure> {
    let run = load_run(&checkpoint_path(args.run.as_ref(), args.checkpoint.as_ref()))?;
    let text = match (&args.text, &args.file) {
        (Some(t), _) => t.clone(),
        (None, Some(f)) => fs::read_to_string(f).map_err(|e| Failure::msg(EXIT_DATA, format!("{}: {e}", f.display())))?,
        (None, None) => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).or_fail("reading stdin")?;
            s
        }
    };
    let doc = Document::new(args.id.clone(), text, None);
    let segmenter = Segmenter::new(run.config.model.geometry());
    let grid = segmenter.segment(&doc);
    let builder = InputBuilder::for_inference(
        &run.config.model,
        &segmenter,
        run.vocab,
        std::slice::from_ref(&doc),
        [&grid],
    )?;
    let input = builder.build(&doc.id, &grid)?;
    let dist = run.model.forward(&input)?;
    println!("{}", dist.category().name());
    for (c, p) in Category::ALL.iter().zip(dist.probs()) {
        println!("{}\t{}", c.name(), format_sig(*p, 8));
    }
    Ok(())
}

fn toy_model_config() -> ModelConfig {
    let mut m = ModelConfig::new(ModelVersion::Ver2);
    m.geometry = GeometrySpec::Explicit(Geometry::new(3, 4));
    m.embedding.dim = 8;
    m.hidden_word = 4;
    m.hidden_sentence = 4;
    m.dense_hidden = 4;
    m
}

fn gradcheck_input(model: &ModelConfig, seed: u64) -> Result<(ModelInput, Category, usize), Failure> {
    let g = model.geometry();
    let spec = SyntheticSpec {
        docs_per_class: 1,
        vocab_per_class: 6,
        sentences: (1, g.sentences + 1),
        words: (1, g.words + 1),
        seed,
        ..Default::default()
    };
    let docs = spec.generate().map_err(|e| Failure::msg(EXIT_CONFIG, e))?;
    let doc = &docs[Category::Sports.index()];
    let segmenter = Segmenter::new(g);
    let grids = segment_labeled(std::slice::from_ref(doc), &segmenter)?;
    let builder = InputBuilder::for_training(model, &segmenter, &grids, std::slice::from_ref(doc), &grids)?;
    let input = builder.build(&doc.id, &grids[0].grid)?;
    Ok((input, grids[0].label, builder.table_rows()))
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<(), Failure> {
    let mut base = match &args.config {
        Some(path) => {
            let mut value = read_json(path)?;
            for o in &args.overrides {
                apply_override(&mut value, o)?;
            }
            from_value(value, &path.display().to_string())?.model
        }
        None => {
            let mut value = serde_json::to_value(toy_model_config()).or_fail("serializing toy config")?;
            for o in &args.overrides {
                apply_override(&mut value, o)?;
            }
            serde_json::from_value(value).map_err(|e| Failure::msg(EXIT_CONFIG, format!("override: {e}")))?
        }
    };
    let largest = base.hidden_word.max(base.hidden_sentence).max(base.dense_hidden);
    if largest > MAX_GRADCHECK_HIDDEN {
        return Err(Failure::msg(
            EXIT_CONFIG,
            format!("gradcheck runs at toy sizes only; hidden size {largest} exceeds {MAX_GRADCHECK_HIDDEN}"),
        ));
    }
    base.embedding.kind = ProviderKind::Hashed;
    base.embedding.source_path = None;
    let versions: Vec<ModelVersion> = if args.versions.is_empty() {
        if args.config.is_some() { vec![base.version] } else { ModelVersion::ALL.to_vec() }
    } else {
        args.versions.iter().map(|v| v.parse()).collect::<Result<_, _>>()?
    };
    let opts = GradCheckOptions { samples: args.samples, seed: args.seed, ..Default::default() };
    let mut failed = Vec::new();
    for version in versions {
        let mut cfg = base.clone();
        cfg.version = version;
        cfg.validate()?;
        let (input, target, rows) = gradcheck_input(&cfg, args.seed)?;
        let model = Classifier::<f64>::init(&cfg, rows, args.seed)?;
        let report = check_gradients(&model, &input, target, cfg.clip_epsilon, &opts, args.inject_fault)?;
        println!("{version}\tchecked {}\tmax_rel_error {:.3e}", report.checked, report.max_rel_error);
        for b in &report.blocks {
            println!("  {:<28}{:>6}  {:.3e}", b.name, b.checked, b.max_rel_error);
        }
        if !report.passes(args.tolerance) {
            if let Some(w) = &report.worst {
                println!(
                    "  worst: {}[{}] analytic {:.9e} numeric {:.9e} rel {:.3e}",
                    w.block, w.index, w.analytic, w.numeric, w.rel_error
                );
            }
            failed.push(version);
        }
    }
    if failed.is_empty() {
        println!("gradcheck passed (tolerance {:e})", args.tolerance);
        Ok(())
    } else {
        let names: Vec<String> = failed.iter().map(ToString::to_string).collect();
        Err(Failure::msg(EXIT_GRADCHECK, format!("gradient check failed for {}", names.join(", "))))
    }
}

pub fn sweep(args: &SweepArgs, out: &Path) -> Result<(), Failure> {
    let manifest = read_json(&args.manifest)?;
    let Value::Array(entries) = manifest else {
        return Err(Failure::msg(EXIT_CONFIG, format!("{}: manifest must be a JSON array", args.manifest.display())));
    };
    let base = args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let env_seed = seed_from_env()?;
    let parsed: Vec<(String, Result<RunConfig, Failure>)> = entries
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let context = format!("{} entry {i}", args.manifest.display());
            let cfg = from_value(v, &context).map_err(Failure::from).and_then(|mut c| {
                if let Some(s) = env_seed {
                    c.train.seed = s;
                }
                c.resolve_paths(&base);
                c.validate()?;
                Ok(c)
            });
            let name = match &cfg {
                Ok(c) => c.run_name(i),
                Err(_) => format!("run{i:02}"),
            };
            (name, cfg)
        })
        .collect();
    let mut seen = HashSet::new();
    for (name, _) in &parsed {
        if !seen.insert(name) {
            return Err(Failure::msg(EXIT_CONFIG, format!("duplicate run name {name:?} in manifest")));
        }
    }
    fs::create_dir_all(out).or_fail(format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build().or_fail("starting workers")?;
    let results: Vec<Result<ComparisonRow, Failure>> = pool.install(|| {
        parsed
            .par_iter()
            .with_max_len(1)
            .map(|(name, cfg)| {
                let cfg = cfg.as_ref().map_err(|f| Failure::msg(f.code, format!("{:#}", f.error)))?;
                log::info!("sweep: starting {name}");
                let exp = run_experiment(cfg)?;
                write_run(&out.join(name), &exp)?;
                Ok(ComparisonRow::from_record(&exp.record))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = 0;
    for ((name, _), r) in parsed.iter().zip(results) {
        match r {
            Ok(row) => {
                println!("{name}\tok\tacc {} val_acc {}", format_sig(row.acc, 6), format_sig(row.val_acc, 6));
                rows.push(row);
            }
            Err(f) => {
                failures += 1;
                println!("{name}\tfailed (exit {})", f.code);
                eprintln!("run {name} failed: {:#}", f.error);
            }
        }
    }
    let table = out.join("comparison.csv");
    write_comparison_csv(&rows, &table)?;
    println!("comparison\t{}", table.display());
    if failures > 0 {
        return Err(Failure::msg(EXIT_FAILURE, format!("{failures} of {} runs failed", parsed.len())));
    }
    Ok(())
}
