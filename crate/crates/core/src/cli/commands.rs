use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{Layers, List};
use super::{
    Command, EvalArgs, IngestArgs, PredictArgs, RenderArgs, SplitArgs, SynthArgs, TrainArgs, WeightsArgs,
};
use crate::corpus::{
    build_vocabs, default_rules, generate_synthetic, load_rules, make_cv_folds, make_generalized_triplet_split,
    make_generalized_word_split, make_held_out_triplet_split, parse_scene_graph, preprocess, read_corpus,
    read_image_sizes, write_corpus, BBox, CorpusMeta, Fold, InputFormat, Instance, ParseMode, Partition, Role,
    SplitMode, SplitPlan, Stoplist, Triplet, DEFAULT_HELD_OUT_WORDS,
};
use crate::embed::{open_text, pretrained_tokens, EmbeddingRegistry, EmbeddingSource, EmbeddingTables};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate, format_table, run_folds, EvalOptions, EvalReport, Method,
};
use crate::render::{render_scene, RenderStyle, Scene, DEFAULT_CANVAS};
use crate::templates::{
    fit_linear_interpreter, load_bundle, rank_weights, save_bundle, train, FoldModel, HeadKind, HeadRegistry,
    ModelBundle, PredictionRecord, Provenance, Query, RankOrder, TrainConfig, TrainedModel,
};

pub(super) fn dispatch(command: Command, layers: Layers) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, layers),
        Command::Split(a) => split(a, layers),
        Command::Synth(a) => synth(a, layers),
        Command::Train(a) => train_cmd(a, layers),
        Command::Eval(a) => eval(a, layers),
        Command::Predict(a) => predict(a, layers),
        Command::Render(a) => render(a, layers),
        Command::Weights(a) => weights(a, layers),
    }
}

/// Split plan file: the plan plus the config that produced it.
#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    config: Value,
    plan: SplitPlan,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn parse_flag<T>(key: &str, raw: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::Config(format!("--{key} {raw:?}: {e}")))
}

struct LoadedCorpus {
    instances: Vec<Instance>,
    provenance: Provenance,
}

fn load_corpus(path: &Path) -> Result<LoadedCorpus> {
    let file = read_corpus(open(path)?)?;
    let meta = file.meta.ok_or_else(|| {
        Error::Config(format!(
            "{} has no meta header; produce corpora with `ingest` or `synth`",
            path.display()
        ))
    })?;
    if let Some((k, inst)) = file.instances.iter().enumerate().find(|(k, i)| i.id != *k) {
        return Err(Error::Config(format!("corpus line for instance {} sits at position {k}", inst.id)));
    }
    if file.instances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(LoadedCorpus {
        instances: file.instances,
        provenance: Provenance {
            stoplist_hash: meta.stoplist_hash,
            mirrored: meta.mirrored,
        },
    })
}

fn load_plan(path: &Path, corpus_size: usize) -> Result<SplitPlan> {
    let file: PlanFile = serde_json::from_reader(open(path)?)?;
    if file.plan.corpus_size != corpus_size {
        return Err(Error::InvalidSplit(format!(
            "plan was built for {} instances, corpus has {corpus_size}",
            file.plan.corpus_size
        )));
    }
    Ok(file.plan)
}

fn ingest(a: IngestArgs, mut l: Layers) -> Result<()> {
    let input: PathBuf = l.required("input", a.input)?;
    let format: InputFormat = parse_flag("format", &l.value("format", a.format, "canonical_jsonl".into())?)?;
    let image_data: Option<PathBuf> = l.optional("image-data", a.image_data)?;
    let stoplist_path: Option<PathBuf> = l.optional("stoplist", a.stoplist)?;
    let strict = l.switch("strict", a.strict)?;
    let partition: Partition = parse_flag("partition", &l.value("partition", a.partition, "implicit".into())?)?;
    let vectors: Option<PathBuf> = l.optional("vectors", a.vectors)?;
    let emb_dim = l.value("emb-dim", a.emb_dim, 300usize)?;
    let out: PathBuf = l.required("out", a.out)?;
    let config = l.into_config("ingest");

    let stoplist = match &stoplist_path {
        Some(p) => Stoplist::read(open(p)?)?,
        None => Stoplist::default(),
    };
    let sizes = match &image_data {
        Some(p) => Some(read_image_sizes(open_text(p)?)?),
        None if format == InputFormat::VgRelationships => {
            return Err(Error::Config("vg_relationships input needs --image-data".into()))
        }
        None => None,
    };
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let (records, parse_report) = parse_scene_graph(open_text(&input)?, format, mode, sizes.as_ref())?;
    let (mut instances, report) = preprocess(records, &stoplist, partition);
    log::info!("kept {} of {} records", report.kept, report.input_records);
    let mut without_vectors = None;
    if let Some(p) = &vectors {
        let wanted: HashSet<String> = instances
            .iter()
            .flat_map(|i| [i.subject_word.clone(), i.relation_word.clone(), i.object_word.clone()])
            .collect();
        let found = pretrained_tokens(open_text(p)?, emb_dim, &wanted)?;
        let before = instances.len();
        instances.retain(|i| {
            found.contains(&i.subject_word) && found.contains(&i.relation_word) && found.contains(&i.object_word)
        });
        for (k, inst) in instances.iter_mut().enumerate() {
            inst.id = k;
        }
        without_vectors = Some(before - instances.len());
    }
    let meta = CorpusMeta {
        stoplist_hash: stoplist.hash(),
        mirrored: true,
        config,
        report: json!({
            "parse": parse_report,
            "preprocess": report,
            "dropped_without_vectors": without_vectors,
        }),
    };
    let mut w = create(&out)?;
    write_corpus(&mut w, &meta, &instances)?;
    eprintln!(
        "wrote {} instances to {} ({} skipped, {} explicit, {} mirrored)",
        instances.len(),
        out.display(),
        parse_report.skipped(),
        report.explicit,
        report.mirrored
    );
    Ok(())
}

fn parse_triplets(text: &str) -> Result<Vec<Triplet>> {
    text.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| Triplet::parse(t).ok_or_else(|| Error::Config(format!("triplet {t:?} is not `s,r,o`"))))
        .collect()
}

fn split(a: SplitArgs, mut l: Layers) -> Result<()> {
    let corpus_path: PathBuf = l.required("corpus", a.corpus)?;
    let mode: SplitMode = parse_flag("mode", &l.value("mode", a.mode, "cv".into())?)?;
    let k = l.value("k", a.k, 10usize)?;
    let seed = l.value("seed", a.seed, 0u64)?;
    let words_file: Option<PathBuf> = l.optional("words-file", a.words_file)?;
    let held_out: Option<String> = l.optional("held-out", a.held_out)?;
    let n_pick = l.value("n-pick", a.n_pick, 100usize)?;
    let top_m = l.value("top-m", a.top_m, 1000usize)?;
    let out: PathBuf = l.required("out", a.out)?;
    let config = l.into_config("split");

    let corpus = load_corpus(&corpus_path)?;
    let plan = match mode {
        SplitMode::Cv => make_cv_folds(&corpus.instances, k, seed)?,
        SplitMode::GenTriplets => match held_out {
            Some(text) => make_held_out_triplet_split(&corpus.instances, &parse_triplets(&text)?)?,
            None => make_generalized_triplet_split(&corpus.instances, n_pick, top_m, seed)?,
        },
        SplitMode::GenWords => {
            let words: Vec<String> = match &words_file {
                Some(p) => open(p)?
                    .lines()
                    .collect::<io::Result<Vec<_>>>()?
                    .into_iter()
                    .map(|w| crate::corpus::normalize_token(&w))
                    .filter(|w| !w.is_empty())
                    .collect(),
                None => DEFAULT_HELD_OUT_WORDS.iter().map(|w| w.to_string()).collect(),
            };
            make_generalized_word_split(&corpus.instances, &words)?
        }
    };
    for (n, f) in plan.folds.iter().enumerate() {
        eprintln!("fold {n} {}: {} train, {} test", f.name, f.train.len(), f.test.len());
    }
    write_json(&out, &PlanFile { config, plan })
}

fn synth(a: SynthArgs, mut l: Layers) -> Result<()> {
    let rules_name = l.value("rules", a.rules, "default8".to_string())?;
    let n = l.value("n", a.n, 20_000usize)?;
    let noise = l.value("noise", a.noise, 0.02f64)?;
    let seed = l.value("seed", a.seed, 0u64)?;
    let out: PathBuf = l.required("out", a.out)?;
    let config = l.into_config("synth");

    let rules = if rules_name == "default8" {
        default_rules()
    } else {
        load_rules(open(Path::new(&rules_name))?)?
    };
    let instances = generate_synthetic(&rules, n, noise, seed)?;
    let meta = CorpusMeta {
        stoplist_hash: Stoplist::default().hash(),
        mirrored: true,
        config,
        report: json!({
            "instances": instances.len(),
            "rules": rules.len(),
            "mirrored": instances.iter().filter(|i| i.mirrored).count(),
        }),
    };
    let mut w = create(&out)?;
    write_corpus(&mut w, &meta, &instances)?;
    eprintln!("wrote {} synthetic instances to {}", instances.len(), out.display());
    Ok(())
}

/// Every fold of the plan, or only `fold`.
fn selected_folds(plan: &SplitPlan, fold: Option<usize>) -> Result<Vec<usize>> {
    match fold {
        Some(f) => {
            plan.fold(f)?;
            Ok(vec![f])
        }
        None => Ok((0..plan.folds.len()).collect()),
    }
}

fn whole_corpus_plan(n: usize) -> SplitPlan {
    SplitPlan {
        mode: SplitMode::Cv,
        seed: None,
        corpus_size: n,
        folds: vec![Fold {
            name: "all".into(),
            train: (0..n).collect(),
            test: Vec::new(),
        }],
        held_out_triplets: Vec::new(),
        held_out_words: Vec::new(),
    }
}

fn build_tables(
    instances: &[Instance],
    emb: &str,
    emb_file: Option<PathBuf>,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTables> {
    let vocabs = build_vocabs(instances)?;
    let provider = EmbeddingRegistry::default().get(emb)?;
    let source = EmbeddingSource {
        pretrained_path: emb_file,
        dim,
        seed,
    };
    provider.build(&vocabs, &source)
}

fn train_cmd(a: TrainArgs, mut l: Layers) -> Result<()> {
    let corpus_path: PathBuf = l.required("corpus", a.corpus)?;
    let plan_path: Option<PathBuf> = l.optional("split-plan", a.split_plan)?;
    let fold: Option<usize> = l.optional("fold", a.fold)?;
    let head_name = l.value("head", a.head, "reg".to_string())?;
    let emb = l.value("emb", a.emb, "emb".to_string())?;
    let emb_file: Option<PathBuf> = l.optional("emb-file", a.emb_file)?;
    let emb_dim = l.value("emb-dim", a.emb_dim, 300usize)?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        epochs: l.value("epochs", a.epochs, defaults.epochs)?,
        batch_size: l.value("batch", a.batch, defaults.batch_size)?,
        learning_rate: l.value("lr", a.lr, defaults.learning_rate)?,
        hidden: l.value("hidden", a.hidden, List(defaults.hidden.clone()))?.0,
        grid_size: l.value("grid-size", a.grid_size, defaults.grid_size)?,
        seed: l.value("seed", a.seed, defaults.seed)?,
        drop_subject_size: l.switch("drop-subject-size", a.drop_subject_size)?,
    };
    let jobs = l.value("jobs", a.jobs, 1usize)?;
    let out: PathBuf = l.required("out", a.out)?;
    let report_path: Option<PathBuf> = l.optional("report", a.report)?;
    let run_config = l.into_config("train");
    config.validate()?;

    let head = HeadRegistry::default().get(&head_name)?;
    let corpus = load_corpus(&corpus_path)?;
    let plan = match &plan_path {
        Some(p) => load_plan(p, corpus.instances.len())?,
        None => whole_corpus_plan(corpus.instances.len()),
    };
    if plan_path.is_none() && report_path.is_some() {
        return Err(Error::Config("--report needs --split-plan".into()));
    }
    let folds = selected_folds(&plan, fold)?;
    let tables = build_tables(&corpus.instances, &emb, emb_file, emb_dim, config.seed)?;
    let models = run_folds(&folds, jobs, |k| {
        let f = plan.fold(k)?;
        log::info!("training {} fold {} on {} instances", head.kind(), f.name, f.train.len());
        let model = train(
            &corpus.instances,
            &f.train,
            head.as_ref(),
            tables.clone(),
            &config,
            corpus.provenance.clone(),
        )?;
        Ok(FoldModel { fold: k, model })
    })?;
    for m in &models {
        let last = m.model.loss_history.last().copied().unwrap_or(f64::NAN);
        eprintln!("fold {}: final training loss {last:.6}", m.fold);
    }
    let bundle = ModelBundle::new(run_config.clone(), models);
    save_bundle(&out, &bundle)?;
    eprintln!("wrote {} with {} model(s)", out.display(), bundle.models.len());

    if let Some(path) = report_path {
        let methods: Vec<(usize, Method<'_>)> =
            bundle.models.iter().map(|m| (m.fold, Method::Model(&m.model))).collect();
        let report = evaluate(
            &methods,
            &corpus.instances,
            &plan,
            &corpus.provenance,
            &EvalOptions::default(),
            run_config,
            jobs,
        )?;
        print!("{}", format_table(&report));
        write_json(&path, &report)?;
    }
    Ok(())
}

fn eval_options(l: &mut Layers, r2: Option<String>, acc: Option<String>) -> Result<EvalOptions> {
    let r2 = l.value("r2-weighting", r2, "uniform".to_string())?;
    let acc = l.value("macro-accuracy", acc, "mean_recall".to_string())?;
    let r2_weighting = serde_json::from_value(Value::String(r2.replace('-', "_")))
        .map_err(|_| Error::Config(format!("--r2-weighting {r2:?}: expected uniform or variance")))?;
    let macro_accuracy = serde_json::from_value(Value::String(acc.replace('-', "_")))
        .map_err(|_| Error::Config(format!("--macro-accuracy {acc:?}: expected mean_recall or plain")))?;
    Ok(EvalOptions {
        r2_weighting,
        macro_accuracy,
    })
}

fn eval(a: EvalArgs, mut l: Layers) -> Result<()> {
    let model_path: Option<PathBuf> = l.optional("model", a.model)?;
    let ctrl = l.switch("ctrl", a.ctrl)?;
    let corpus_path: PathBuf = l.required("corpus", a.corpus)?;
    let plan_path: PathBuf = l.required("split-plan", a.split_plan)?;
    let fold: Option<usize> = l.optional("fold", a.fold)?;
    let opts = eval_options(&mut l, a.r2_weighting, a.macro_accuracy)?;
    let jobs = l.value("jobs", a.jobs, 1usize)?;
    let out: Option<PathBuf> = l.optional("out", a.out)?;
    let (ctrl_head, grid_size, seed) = if ctrl {
        (
            l.value("head", a.head, "reg".to_string())?,
            l.value("grid-size", a.grid_size, 15usize)?,
            l.value("seed", a.seed, 0u64)?,
        )
    } else {
        (String::new(), 0, 0)
    };
    let mut config = l.into_config("eval");

    let corpus = load_corpus(&corpus_path)?;
    let plan = load_plan(&plan_path, corpus.instances.len())?;
    let report: EvalReport = match (ctrl, &model_path) {
        (true, Some(_)) => return Err(Error::Config("give either --model or --ctrl, not both".into())),
        (false, None) => return Err(Error::Config("give --model or --ctrl".into())),
        (true, None) => {
            let head: HeadKind = ctrl_head.parse()?;
            let methods: Vec<(usize, Method<'_>)> = selected_folds(&plan, fold)?
                .into_iter()
                .map(|k| {
                    let m = Method::Ctrl {
                        head,
                        grid_size,
                        seed: seed.wrapping_add(k as u64),
                    };
                    (k, m)
                })
                .collect();
            evaluate(&methods, &corpus.instances, &plan, &corpus.provenance, &opts, config, jobs)?
        }
        (false, Some(path)) => {
            let bundle = load_bundle(path)?;
            config["model"] = bundle.run_config.clone();
            let methods: Vec<(usize, Method<'_>)> = bundle
                .models
                .iter()
                .filter(|m| fold.map_or(true, |f| f == m.fold))
                .map(|m| (m.fold, Method::Model(&m.model)))
                .collect();
            if methods.is_empty() {
                return Err(Error::Config(format!("checkpoint has no model for fold {fold:?}")));
            }
            evaluate(&methods, &corpus.instances, &plan, &corpus.provenance, &opts, config, jobs)?
        }
    };
    print!("{}", format_table(&report));
    if let Some(path) = out {
        write_json(&path, &report)?;
    }
    Ok(())
}

fn check_model_provenance(model: &TrainedModel, expected: &Provenance) -> Result<()> {
    if model.provenance != *expected {
        return Err(Error::Provenance {
            model: format!("{} (mirrored: {})", model.provenance.stoplist_hash, model.provenance.mirrored),
            corpus: format!("{} (mirrored: {})", expected.stoplist_hash, expected.mirrored),
        });
    }
    Ok(())
}

fn predict(a: PredictArgs, mut l: Layers) -> Result<()> {
    let model_path: PathBuf = l.required("model", a.model)?;
    let fold: Option<usize> = l.optional("fold", a.fold)?;
    let query: Option<String> = l.optional("query", a.query)?;
    let subject_box: Option<List<f64>> = l.optional("subject-box", a.subject_box)?;
    let queries_path: Option<PathBuf> = l.optional("queries", a.queries)?;
    let corpus_path: Option<PathBuf> = l.optional("corpus", a.corpus)?;
    let stoplist_path: Option<PathBuf> = l.optional("stoplist", a.stoplist)?;
    let out: Option<PathBuf> = l.optional("out", a.out)?;

    let bundle = load_bundle(&model_path)?;
    let model = bundle.model_for_fold(fold)?;
    if let Some(p) = &corpus_path {
        check_model_provenance(model, &load_corpus(p)?.provenance)?;
    }
    if let Some(p) = &stoplist_path {
        let hash = Stoplist::read(open(p)?)?.hash();
        if hash != model.provenance.stoplist_hash {
            return Err(Error::Provenance {
                model: model.provenance.stoplist_hash.clone(),
                corpus: hash,
            });
        }
    }

    let mut queries = Vec::new();
    match (query, subject_box) {
        (Some(q), Some(List(b))) => {
            let triplet = Triplet::parse(&q).ok_or_else(|| Error::Config(format!("--query {q:?} is not `s,r,o`")))?;
            let b: [f64; 4] = b
                .try_into()
                .map_err(|_| Error::Config("--subject-box needs four values x,y,hx,hy".into()))?;
            queries.push(Query::new(&triplet, BBox::from_array(b)));
        }
        (None, None) => {}
        _ => return Err(Error::Config("--query and --subject-box go together".into())),
    }
    if let Some(p) = &queries_path {
        for (n, line) in open(p)?.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let q: Query = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                location: format!("{} line {}", p.display(), n + 1),
                reason: e.to_string(),
            })?;
            queries.push(q);
        }
    }
    if queries.is_empty() {
        return Err(Error::Config("no queries: give --query with --subject-box, or --queries".into()));
    }

    let records: Vec<PredictionRecord> = match model.head {
        HeadKind::Reg => model
            .predict_reg_batch(&queries)?
            .iter()
            .zip(queries)
            .map(|(p, q)| PredictionRecord::reg(q, p))
            .collect(),
        HeadKind::Pix => model
            .predict_pix_batch(&queries)?
            .iter()
            .zip(queries)
            .map(|(g, q)| PredictionRecord::pix(q, g))
            .collect(),
    };
    let mut sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    for r in &records {
        serde_json::to_writer(&mut sink, r)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

fn file_stem(record: &PredictionRecord, index: usize) -> String {
    let words = [
        &record.query.subject_word,
        &record.query.relation_word,
        &record.query.object_word,
    ];
    let mut stem = format!("{index:04}");
    for w in words {
        stem.push('_');
        stem.extend(w.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }));
    }
    stem
}

fn render(a: RenderArgs, mut l: Layers) -> Result<()> {
    let input: PathBuf = l.required("prediction-file", a.prediction_file)?;
    let out: PathBuf = l.required("out", a.out)?;
    let canvas = l.value("canvas", a.canvas, DEFAULT_CANVAS)?;
    let mirrored_view = l.switch("mirrored-view", a.mirrored_view)?;
    let _ = l.into_config("render");

    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let style = RenderStyle {
        canvas,
        ..RenderStyle::default()
    };
    let mut written = 0;
    for (n, line) in open(&input)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            location: format!("{} line {}", input.display(), n + 1),
            reason: e.to_string(),
        })?;
        let scene = Scene::from_record(&record, canvas)?;
        let path = out.join(format!("{}.svg", file_stem(&record, written)));
        let mut w = create(&path)?;
        w.write_all(render_scene(&scene, &style, mirrored_view).as_bytes())?;
        w.flush()?;
        written += 1;
    }
    eprintln!("wrote {written} figure(s) to {}", out.display());
    Ok(())
}

const OUTPUT_NAMES: [&str; 4] = ["O_cx", "O_cy", "O_hw", "O_hh"];

#[derive(Serialize)]
struct Ranking {
    output: &'static str,
    role: &'static str,
    top: Vec<(String, f64)>,
    bottom: Vec<(String, f64)>,
}

fn weights(a: WeightsArgs, mut l: Layers) -> Result<()> {
    let corpus_path: PathBuf = l.required("corpus", a.corpus)?;
    let plan_path: Option<PathBuf> = l.optional("split-plan", a.split_plan)?;
    let fold = l.value("fold", a.fold, 0usize)?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        epochs: l.value("epochs", a.epochs, defaults.epochs)?,
        batch_size: l.value("batch", a.batch, defaults.batch_size)?,
        learning_rate: l.value("lr", a.lr, defaults.learning_rate)?,
        seed: l.value("seed", a.seed, defaults.seed)?,
        ..defaults
    };
    let top_k = l.value("top-k", a.top_k, 10usize)?;
    let no_center = l.switch("no-center", a.no_center)?;
    let csv_path: Option<PathBuf> = l.optional("csv", a.csv)?;
    let out: Option<PathBuf> = l.optional("out", a.out)?;
    let run_config = l.into_config("weights");

    let corpus = load_corpus(&corpus_path)?;
    let train_idx: Vec<usize> = match &plan_path {
        Some(p) => load_plan(p, corpus.instances.len())?.fold(fold)?.train.clone(),
        None => (0..corpus.instances.len()).collect(),
    };
    let tables = build_tables(&corpus.instances, "1h", None, 0, config.seed)?;
    let model = fit_linear_interpreter(&corpus.instances, &train_idx, &tables, &config, !no_center)?;

    let roles = [Role::Relation, Role::Object, Role::Subject];
    let mut rankings = Vec::new();
    for (dim, output) in OUTPUT_NAMES.iter().enumerate() {
        for role in roles {
            rankings.push(Ranking {
                output,
                role: role.name(),
                top: rank_weights(&model, dim, role, top_k, RankOrder::Largest)?,
                bottom: rank_weights(&model, dim, role, top_k, RankOrder::Smallest)?,
            });
        }
    }

    if let Some(path) = csv_path {
        let csv_error = |e: csv::Error| Error::io(&path, io::Error::other(e.to_string()));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["role", "token", "abs_w_O_cx", "abs_w_O_cy", "abs_w_O_hw", "abs_w_O_hh"])
            .map_err(csv_error)?;
        for role in roles {
            for token in model.vocabularies.get(role).tokens() {
                let mut row = vec![role.name().to_string(), token.clone()];
                for dim in 0..4 {
                    row.push(format!("{}", model.weight(dim, role, token)?.abs()));
                }
                w.write_record(&row).map_err(csv_error)?;
            }
        }
        w.flush()?;
    }
    if let Some(path) = out {
        write_json(
            &path,
            &json!({
                "config": run_config,
                "centered": model.centered,
                "final_loss": model.loss_history.last(),
                "rankings": rankings,
            }),
        )?;
    }
    let mut so = io::stdout().lock();
    for r in &rankings {
        for (label, list) in [("largest", &r.top), ("smallest", &r.bottom)] {
            writeln!(so, "{} / {}: {label} |w|", r.output, r.role)?;
            for (t, w) in list {
                writeln!(so, "  {t:<24} {w:>9.4}")?;
            }
        }
    }
    so.flush()?;
    Ok(())
}

