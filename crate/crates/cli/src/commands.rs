use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use iest::checkpoint::{example_digest, load_model, save_model, ProbaCache, MAGIC};
use iest::config::{KeyValue, RunConfig};
use iest::dataset::{self, Labels, Record, Split};
use iest::ensemble::{accuracy_by_size, average_probs, search_best_subset};
use iest::eval::report::{self, json};
use iest::eval::{
    compute_metrics, data_amount_curve, emoji_removal_all, group_effect, kmeans2, pca_project, project_and_cluster,
    trigger_pattern_report, Selector,
};
use iest::proba::{Classifier, ProbabilityMatrix};
use iest::sweep::{run_sweep, sweep_tsv, SweepSpec};
use iest::synth::{generate, SynthSpec};
use iest::tokenizer::{extract_features, join_tokens, preprocess, EmojiDatabase, Token, TokenizerOptions, TweetFeatures};
use iest::training::{fit, history_csv};
use iest::Emotion;

use crate::args::{Analysis, Command, Output, Preset, ReportFormat};
use crate::manifest::{manifest_path, RunManifest};
use crate::Usage;

fn db() -> &'static EmojiDatabase {
    EmojiDatabase::bundled()
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn format_error(what: &'static str, msg: String) -> anyhow::Error {
    iest::Error::Format { what, msg }.into()
}

fn base_config(preset: Preset) -> RunConfig {
    match preset {
        Preset::Default => RunConfig::default(),
        Preset::Toy => RunConfig::toy(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(iest::Error::from).with_context(|| format!("reading {}", path.display()))
}

/// Data errors already name the file; I/O errors get the path added.
fn read_records(path: &Path, labels: Labels) -> Result<Vec<Record>> {
    match dataset::read(path, labels) {
        Err(e @ iest::Error::Io(_)) => Err(anyhow::Error::from(e).context(format!("reading {}", path.display()))),
        other => Ok(other?),
    }
}

struct Labeled {
    records: Vec<Record>,
    split: Split,
}

impl Labeled {
    fn read(path: &Path) -> Result<Self> {
        let records = read_records(path, Labels::Required)?;
        let split = Split::from_records(&records, db())?;
        Ok(Labeled { records, split })
    }

    fn digests(&self) -> Vec<String> {
        self.records.iter().map(|r| example_digest(&r.text)).collect()
    }

    fn features(&self) -> Vec<TweetFeatures> {
        self.split.docs.iter().map(|d| extract_features(d, db())).collect()
    }
}

fn check_order(cache: &ProbaCache, source: &Path, gold: &Labeled) -> Result<()> {
    if cache.order != gold.digests() {
        return Err(format_error(
            "probability cache",
            format!("{} does not cover the examples of the gold file in order", source.display()),
        ));
    }
    Ok(())
}

/// Predicted labels from a probability cache or from one label per line.
fn read_predictions(path: &Path, gold: &Labeled) -> Result<Vec<Emotion>> {
    let bytes = std::fs::read(path).map_err(iest::Error::from).with_context(|| format!("reading {}", path.display()))?;
    let labels = if bytes.starts_with(MAGIC) {
        let cache = ProbaCache::load(path)?;
        check_order(&cache, path, gold)?;
        cache.matrix.predictions()
    } else {
        dataset::parse(&String::from_utf8_lossy(&bytes), path, dataset::Labels::Optional)?
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.label
                    .or_else(|| r.text.trim().parse().ok())
                    .ok_or_else(|| iest::Error::Data {
                        path: path.to_path_buf(),
                        line: i + 1,
                        msg: "expected a label".into(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    if labels.len() != gold.records.len() {
        return Err(format_error(
            "predictions",
            format!("{} predictions for {} gold examples", labels.len(), gold.records.len()),
        ));
    }
    Ok(labels)
}

/// Prints the report or writes it with a manifest next to it.
fn emit<T: Serialize>(output: &Output, value: &T, tsv: impl FnOnce() -> String, mut manifest: RunManifest) -> Result<()> {
    let text = match output.report {
        ReportFormat::Tsv => tsv(),
        ReportFormat::Json => json(value),
    };
    match &output.out {
        None => print!("{text}"),
        Some(path) => {
            std::fs::write(path, text)?;
            manifest.artifact(path)?;
            manifest.write(&manifest_path(path))?;
        }
    }
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { input, out, lowercase } => {
            let opts = TokenizerOptions { lowercase };
            let records: Vec<Record> = read_records(&input, Labels::Optional)?
                .into_iter()
                .map(|r| Record {
                    text: join_tokens(&preprocess(&r.text, db(), opts)),
                    ..r
                })
                .collect();
            dataset::write(&out, &records)?;
            let mut m = RunManifest::new("preprocess");
            m.input(&input)?.artifact(&out)?;
            m.write(&manifest_path(&out))
        }
        Command::GenData { examples, seed, spec, set, out } => gen_data(examples, seed, spec, &set, &out),
        Command::Train {
            train,
            val,
            config,
            preset,
            seed,
            members,
            out,
            history,
        } => train_models(&train, &val, config.as_deref(), preset, seed, members, &out, history),
        Command::Predict { models, input, out } => predict(&models, &input, &out),
        Command::Ensemble {
            probs,
            gold,
            top,
            best_out,
            output,
        } => ensemble(&probs, &gold, top, best_out.as_deref(), &output),
        Command::Evaluate { pred, gold, output } => {
            let gold_set = Labeled::read(&gold)?;
            let predicted = read_predictions(&pred, &gold_set)?;
            let r = compute_metrics(&gold_set.split.labels, &predicted)?;
            let mut m = RunManifest::new("evaluate");
            m.input(&pred)?.input(&gold)?;
            emit(&output, &r, || report::metrics_tsv(&r), m)
        }
        Command::Analyze { what } => analyze(what),
        Command::Sweep {
            spec,
            train,
            val,
            preset,
            seed,
            fractions,
            output,
        } => sweep(&spec, &train, &val, preset, seed, fractions, &output),
    }
}

fn gen_data(examples: Option<usize>, seed: u64, spec_path: Option<PathBuf>, set: &[String], out: &Path) -> Result<()> {
    let mut spec = match &spec_path {
        Some(p) => SynthSpec::parse(&read_text(p)?)?,
        None => SynthSpec::default(),
    };
    if let Some(n) = examples {
        spec.examples = n;
    }
    for kv in set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set `{kv}`: expected KEY=VALUE")))?;
        if !spec.set(k.trim(), v.trim())? {
            return Err(usage(format!("--set: unknown generator key `{}`", k.trim())));
        }
    }
    spec.validate()?;
    let records = generate(&spec, seed)?;
    dataset::write(out, &records)?;
    let mut m = RunManifest::new("gen-data");
    m.seeds = vec![seed];
    m.config = Some(spec.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect());
    if let Some(p) = &spec_path {
        m.input(p)?;
    }
    m.artifact(out)?;
    m.write(&manifest_path(out))
}

fn history_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".history.csv");
    s.into()
}

#[allow(clippy::too_many_arguments)]
fn train_models(
    train: &Path,
    val: &Path,
    config: Option<&Path>,
    preset: Preset,
    seed: u64,
    members: usize,
    out: &Path,
    history: Option<PathBuf>,
) -> Result<()> {
    if members == 0 {
        return Err(usage("--members must be at least 1"));
    }
    if members > 1 && history.is_some() {
        return Err(usage("--history applies to single-model runs only"));
    }
    let cfg = match config {
        Some(p) => RunConfig::parse_onto(base_config(preset), &read_text(p)?)?,
        None => base_config(preset),
    };
    let train_set = Labeled::read(train)?;
    let val_set = Labeled::read(val)?;
    let seeds: Vec<u64> = (0..members as u64).map(|i| seed + i).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&s| fit(&train_set.split, &val_set.split, &cfg.model, &cfg.train, s))
        .collect::<Result<Vec<_>, _>>()?;

    if members > 1 {
        std::fs::create_dir_all(out)?;
    }
    let mut m = RunManifest::new("train");
    m.seeds = seeds.clone();
    m.config = Some(cfg.render());
    m.input(train)?.input(val)?;
    if let Some(p) = config {
        m.input(p)?;
    }
    for (&s, outcome) in seeds.iter().zip(&outcomes) {
        let ckpt = if members == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("model-{s}.ckpt"))
        };
        let hist = match (&history, members) {
            (Some(h), 1) => h.clone(),
            _ => history_path(&ckpt),
        };
        save_model(&ckpt, &outcome.model, &cfg)?;
        std::fs::write(&hist, history_csv(&outcome.history))?;
        m.artifact(&ckpt)?.artifact(&hist)?;
        let best = &outcome.history[outcome.best_epoch - 1];
        eprintln!(
            "seed {s}: best epoch {} of {}, validation accuracy {}",
            outcome.best_epoch,
            outcome.history.len(),
            report::fixed(best.val_accuracy)
        );
    }
    m.write(&manifest_path(out))
}

fn predict(models: &[PathBuf], input: &Path, out: &Path) -> Result<()> {
    let records = read_records(input, Labels::Optional)?;
    let docs: Vec<Vec<Token>> = records
        .iter()
        .map(|r| preprocess(&r.text, db(), TokenizerOptions::default()))
        .collect();
    let order: Vec<String> = records.iter().map(|r| example_digest(&r.text)).collect();
    let stems: Vec<String> = models
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let mut seen = BTreeSet::new();
    for stem in &stems {
        if !seen.insert(stem) {
            return Err(usage(format!("two checkpoints share the name `{stem}`")));
        }
    }
    std::fs::create_dir_all(out)?;
    let caches = models
        .par_iter()
        .zip(&stems)
        .map(|(p, stem)| -> Result<(PathBuf, ProbaCache)> {
            let (model, _) = load_model(p).with_context(|| format!("loading {}", p.display()))?;
            let matrix = model.predict_proba(&docs)?.with_id(stem.clone());
            Ok((out.join(format!("{stem}.proba")), ProbaCache { matrix, order: order.clone() }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = RunManifest::new("predict");
    m.input(input)?;
    for p in models {
        m.input(p)?;
    }
    for (path, cache) in &caches {
        cache.save(path)?;
        m.artifact(path)?.artifact(&iest::checkpoint::order_path(path))?;
    }
    m.write(&manifest_path(out))
}

#[derive(Serialize)]
struct RankedSubset {
    rank: usize,
    members: Vec<String>,
    size: usize,
    correct: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct SizeRow {
    size: usize,
    best_accuracy: f64,
    mean_accuracy: f64,
}

#[derive(Serialize)]
struct EnsembleReport {
    members: Vec<String>,
    subsets: usize,
    top: Vec<RankedSubset>,
    by_size: Vec<SizeRow>,
}

impl EnsembleReport {
    fn tsv(&self) -> String {
        let mut s = String::from("rank\tsize\tcorrect\taccuracy\tmembers\n");
        for r in &self.top {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.rank,
                r.size,
                r.correct,
                report::fixed(r.accuracy),
                r.members.join("+")
            ));
        }
        s.push_str("\nsize\tbest_accuracy\tmean_accuracy\n");
        for r in &self.by_size {
            s.push_str(&format!(
                "{}\t{}\t{}\n",
                r.size,
                report::fixed(r.best_accuracy),
                report::fixed(r.mean_accuracy)
            ));
        }
        s
    }
}

fn ensemble(probs: &Path, gold: &Path, top: usize, best_out: Option<&Path>, output: &Output) -> Result<()> {
    let gold_set = Labeled::read(gold)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(probs)
        .map_err(iest::Error::from)
        .with_context(|| format!("listing {}", probs.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "proba"));
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no .proba files in {}", probs.display())));
    }
    let mut caches = Vec::new();
    for p in &paths {
        let c = ProbaCache::load(p).with_context(|| format!("loading {}", p.display()))?;
        check_order(&c, p, &gold_set)?;
        caches.push(c);
    }
    let members: Vec<&ProbabilityMatrix> = caches.iter().map(|c| &c.matrix).collect();
    let names: Vec<String> = members.iter().map(|m| m.id.clone()).collect();
    let results = search_best_subset(&members, &gold_set.split.labels)?;
    let report = EnsembleReport {
        members: names.clone(),
        subsets: results.len(),
        top: results
            .iter()
            .take(top)
            .enumerate()
            .map(|(i, r)| RankedSubset {
                rank: i + 1,
                members: r.members().into_iter().map(|j| names[j].clone()).collect(),
                size: r.size,
                correct: r.correct,
                accuracy: r.accuracy,
            })
            .collect(),
        by_size: accuracy_by_size(&results, members.len())
            .into_iter()
            .map(|(size, best_accuracy, mean_accuracy)| SizeRow {
                size,
                best_accuracy,
                mean_accuracy,
            })
            .collect(),
    };
    let mut m = RunManifest::new("ensemble");
    m.input(gold)?;
    for p in &paths {
        m.input(p)?;
    }
    if let Some(path) = best_out {
        let chosen: Vec<&ProbabilityMatrix> = results[0].members().into_iter().map(|j| members[j]).collect();
        let cache = ProbaCache {
            matrix: average_probs(&chosen)?,
            order: gold_set.digests(),
        };
        cache.save(path)?;
        m.artifact(path)?.artifact(&iest::checkpoint::order_path(path))?;
        if output.out.is_none() {
            m.write(&manifest_path(path))?;
        }
    }
    emit(output, &report, || report.tsv(), m)
}

#[derive(Serialize)]
struct PcaReport<'a> {
    projection: &'a iest::eval::Projection,
    labels: Vec<&'static str>,
    clusters: &'a [usize],
}

fn analyze(what: Analysis) -> Result<()> {
    match what {
        Analysis::Emoji {
            data,
            pred,
            model,
            min_count,
            output,
        } => {
            let set = Labeled::read(&data.data)?;
            let mut m = RunManifest::new("analyze emoji");
            m.input(&data.data)?;
            if let Some(mp) = model {
                let (model, _) = load_model(&mp)?;
                m.input(&mp)?;
                let effects =
                    emoji_removal_all(&model, &set.split.docs, &set.split.labels, &set.features(), min_count, db())?;
                emit(&output, &effects, || report::emoji_tsv(&effects), m)
            } else {
                let pred = pred.expect("clap requires --pred without --model");
                let predicted = read_predictions(&pred, &set)?;
                m.input(&pred)?;
                let g = group_effect(&set.features(), &set.split.labels, &predicted, Selector::Emoji)?;
                emit(&output, &g, || report::groups_tsv(std::slice::from_ref(&g)), m)
            }
        }
        Analysis::Hashtag { data, pred, output } => {
            let set = Labeled::read(&data.data)?;
            let predicted = read_predictions(&pred, &set)?;
            let g = group_effect(&set.features(), &set.split.labels, &predicted, Selector::Hashtag)?;
            let mut m = RunManifest::new("analyze hashtag");
            m.input(&data.data)?.input(&pred)?;
            emit(&output, &g, || report::groups_tsv(std::slice::from_ref(&g)), m)
        }
        Analysis::Pattern {
            data,
            pred,
            model,
            seed,
            output,
        } => {
            let set = Labeled::read(&data.data)?;
            let predicted = read_predictions(&pred, &set)?;
            let mut m = RunManifest::new("analyze pattern");
            m.seeds = vec![seed];
            m.input(&data.data)?.input(&pred)?;
            let clusters = match &model {
                Some(mp) => {
                    let (model, _) = load_model(mp)?;
                    m.input(mp)?;
                    let (_, c) = project_and_cluster(&model.sentence_vectors(&set.split.docs)?, seed)?;
                    Some(c.assignment)
                }
                None => None,
            };
            let r = trigger_pattern_report(&set.features(), &set.split.labels, &predicted, clusters.as_deref())?;
            emit(&output, &r, || report::pattern_tsv(&r), m)
        }
        Analysis::Pca {
            data,
            model,
            k,
            seed,
            output,
        } => {
            let set = Labeled::read(&data.data)?;
            let (net, _) = load_model(&model)?;
            let projection = pca_project(&net.sentence_vectors(&set.split.docs)?, k)?;
            if projection.components() < k {
                eprintln!("warning: representations have rank {}; fewer components than requested", projection.components());
            }
            let clusters = kmeans2(&projection.coords, seed)?.assignment;
            let mut m = RunManifest::new("analyze pca");
            m.seeds = vec![seed];
            m.input(&data.data)?.input(&model)?;
            let r = PcaReport {
                projection: &projection,
                labels: set.split.labels.iter().map(|l| l.name()).collect(),
                clusters: &clusters,
            };
            emit(
                &output,
                &r,
                || report::projection_tsv(&projection, Some(&set.split.labels), Some(&clusters)),
                m,
            )
        }
    }
}

fn sweep(
    spec: &Path,
    train: &Path,
    val: &Path,
    preset: Preset,
    seed: u64,
    fractions: Option<Vec<f64>>,
    output: &Output,
) -> Result<()> {
    let spec_cfg = SweepSpec::parse_onto(base_config(preset), &read_text(spec)?)?;
    let train_set = Labeled::read(train)?;
    let val_set = Labeled::read(val)?;
    let mut m = RunManifest::new("sweep");
    m.seeds = vec![seed];
    m.config = Some(spec_cfg.base.render());
    m.input(spec)?.input(train)?.input(val)?;
    match fractions {
        Some(fr) => {
            if !spec_cfg.overrides.is_empty() {
                return Err(usage("--fractions runs the base configuration only; remove the overrides"));
            }
            let base = &spec_cfg.base;
            let points = data_amount_curve(&train_set.split, &val_set.split, &fr, &base.model, &base.train, seed)?;
            emit(output, &points, || report::curve_tsv(&points), m)
        }
        None => {
            let rows = run_sweep(&spec_cfg, &train_set.split, &val_set.split, seed)?;
            emit(output, &rows, || sweep_tsv(&rows), m)
        }
    }
}
