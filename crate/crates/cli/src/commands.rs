use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::{json, Value};

use semtag_core::baselines::{build_baseline, evaluate_baseline, load_stopwords, run_baselines, Inventory};
use semtag_core::corpus::{
    build_splits, corpus_stats, group_by_work, load_corpus, sample_negatives, save_corpus, write_stats_csv, AuthorMeta,
    SentenceRecord,
};
use semtag_core::diagnostics::{
    analyze_attention, disguise_experiment, punctuation_attention_stats, rank_histogram, write_histogram_csv,
    write_punctuation_csv,
};
use semtag_core::features::ExternalVectors;
use semtag_core::training::{
    evaluate, load_checkpoint, load_predictions, run_multiseed, run_single, save_checkpoint, save_predictions,
    tag_corpus, Model,
};
use semtag_review::{export_accepted, read_log, ReviewService};

use crate::args::*;
use crate::config::{load_data, load_resources, FileConfig};
use crate::error::CliError;
use crate::manifest::{write_manifest, ManifestBuilder};
use crate::{json_bytes, print_bytes, write_bytes, write_json};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Split(a) => split(a),
        Command::SampleNegatives(a) => negatives(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Multiseed(a) => multiseed(a),
        Command::Baseline(a) => baseline(a),
        Command::Tag(a) => tag(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Serve(a) => serve(a),
        Command::Export(a) => export(a),
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes to `out` when given, else to stdout. Returns the outputs written.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<Vec<PathBuf>, CliError> {
    match out {
        Some(path) => {
            write_bytes(path, bytes)?;
            Ok(vec![path.to_path_buf()])
        }
        None => print_bytes(bytes).map(|_| Vec::new()),
    }
}

fn finish(
    m: ManifestBuilder,
    anchor: Option<&Path>,
    config: Value,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
) -> Result<(), CliError> {
    if let Some(anchor) = anchor {
        write_manifest(&m.finish(config, seeds, inputs, outputs), anchor)?;
    }
    Ok(())
}

fn split(a: SplitArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("split");
    let records = load_corpus(&a.corpus)?;
    let split = build_splits(&records, a.name.into(), a.seed, a.ratio)?;
    write_json(&a.out, &split)?;
    let config = json!({ "name": split.name, "ratio": a.ratio });
    finish(
        m,
        Some(&a.out),
        config,
        vec![a.seed],
        vec![a.corpus],
        vec![a.out.clone()],
    )
}

fn negatives(a: SampleNegativesArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("sample-negatives");
    let works = group_by_work(load_corpus(&a.works)?);
    let positives: HashSet<Vec<String>> = load_corpus(&a.positives)?.into_iter().map(|r| r.tokens).collect();
    let drawn = sample_negatives(&works, &positives, a.k, a.seed)?;
    save_corpus(&a.out, &drawn)?;
    let config = json!({ "k": a.k });
    finish(
        m,
        Some(&a.out),
        config,
        vec![a.seed],
        vec![a.works, a.positives],
        vec![a.out.clone()],
    )
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("stats");
    let rows = corpus_stats(&load_corpus(&a.corpus)?, a.bucket_years)?;
    let mut bytes = Vec::new();
    write_stats_csv(&rows, &mut bytes)?;
    let outputs = emit(a.out.as_deref(), &bytes)?;
    let config = json!({ "bucket_years": a.bucket_years });
    finish(m, a.out.as_deref(), config, Vec::new(), vec![a.corpus], outputs)
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<FileConfig, CliError> {
    let mut config = FileConfig::load(path)?;
    config.apply(overrides);
    Ok(config)
}

fn config_value(config: &FileConfig) -> Value {
    serde_json::to_value(config).unwrap_or(Value::Null)
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("train");
    let config = load_config(&a.config, &a.overrides)?;
    let run = config.run_config()?;
    let data = load_data(&config.data)?;
    let resources = load_resources(&config.data)?;
    let output = run_single(&run, &data.dataset(), &resources, run.train.seed)?;
    create_dir(&a.out)?;
    let ckpt = a.out.join("model.ckpt");
    let report = a.out.join("report.json");
    save_checkpoint(&output.model, &ckpt)?;
    write_json(&report, &output.report)?;
    eprintln!(
        "best epoch {} of {}; test F1 {:.4}",
        output.report.best_epoch,
        output.report.epoch_history.len(),
        output.report.final_.f1
    );
    let mut inputs = vec![a.config.clone()];
    inputs.extend(config.inputs());
    finish(
        m,
        Some(&a.out),
        config_value(&config),
        vec![run.train.seed],
        inputs,
        vec![ckpt, report],
    )
}

fn load_model(path: &Path, external: Option<&Path>) -> Result<Model<f32>, CliError> {
    let mut model = load_checkpoint::<f32>(path)?;
    if let Some(p) = external {
        model.set_external(Arc::new(ExternalVectors::load(p)?));
    }
    Ok(model)
}

fn inputs_of(paths: &[Option<&Path>]) -> Vec<PathBuf> {
    paths.iter().flatten().map(|p| p.to_path_buf()).collect()
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("eval");
    let model = load_model(&a.model, a.external.as_deref())?;
    let records = load_corpus(&a.corpus)?;
    let refs: Vec<&SentenceRecord> = records.iter().collect();
    let metrics = evaluate(&model, &refs)?;
    let outputs = emit(a.out.as_deref(), &json_bytes(&metrics)?)?;
    let inputs = inputs_of(&[Some(&a.model), Some(&a.corpus), a.external.as_deref()]);
    finish(m, a.out.as_deref(), Value::Null, Vec::new(), inputs, outputs)
}

fn multiseed(a: MultiseedArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("multiseed");
    let config = load_config(&a.config, &a.overrides)?;
    let run = config.run_config()?;
    let data = load_data(&config.data)?;
    let resources = load_resources(&config.data)?;
    let (outputs, aggregate) = run_multiseed(&run, &data.dataset(), &resources, run.train.seed, a.runs, a.jobs)?;
    create_dir(&a.out)?;
    let mut written = Vec::new();
    for o in &outputs {
        let dir = a.out.join(format!("run-{}", o.report.seed));
        create_dir(&dir)?;
        let report = dir.join("report.json");
        write_json(&report, &o.report)?;
        written.push(report);
        if a.keep_models {
            let ckpt = dir.join("model.ckpt");
            save_checkpoint(&o.model, &ckpt)?;
            written.push(ckpt);
        }
    }
    let agg = a.out.join("aggregate.json");
    write_json(&agg, &aggregate)?;
    written.push(agg);
    eprintln!(
        "{} runs; TPR {}  TNR {}  precision {}  F1 {}",
        aggregate.runs, aggregate.table.tpr, aggregate.table.tnr, aggregate.table.precision, aggregate.table.f1
    );
    let mut inputs = vec![a.config.clone()];
    inputs.extend(config.inputs());
    let mut value = config_value(&config);
    value["jobs"] = json!(a.jobs);
    finish(m, Some(&a.out), value, aggregate.seeds.clone(), inputs, written)
}

fn baseline(a: BaselineArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("baseline");
    let mut inventory = Inventory::load(&a.inventory)?;
    if let Some(p) = &a.stopwords {
        inventory = inventory.with_stopwords(&load_stopwords(p)?);
    }
    let records = load_corpus(&a.corpus)?;
    let bytes = match a.variant {
        Some(v) => {
            let lexicon = build_baseline(&inventory, v)?;
            json_bytes(&evaluate_baseline(&lexicon, &records))?
        }
        None => {
            let refs: Vec<&SentenceRecord> = records.iter().collect();
            json_bytes(&run_baselines(&inventory, &refs)?)?
        }
    };
    let outputs = emit(a.out.as_deref(), &bytes)?;
    let inputs = inputs_of(&[Some(&a.inventory), a.stopwords.as_deref(), Some(&a.corpus)]);
    finish(
        m,
        a.out.as_deref(),
        json!({ "variant": a.variant }),
        Vec::new(),
        inputs,
        outputs,
    )
}

fn tag(a: TagArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("tag");
    let model = load_model(&a.model, a.external.as_deref())?;
    let records = load_corpus(&a.corpus)?;
    let refs: Vec<&SentenceRecord> = records.iter().collect();
    let predictions = tag_corpus(&model, &refs)?;
    save_predictions(&a.out, &predictions)?;
    let inputs = inputs_of(&[Some(&a.model), Some(&a.corpus), a.external.as_deref()]);
    finish(m, Some(&a.out), Value::Null, Vec::new(), inputs, vec![a.out.clone()])
}

#[derive(Deserialize)]
struct Persona {
    name: String,
    metadata: AuthorMeta,
}

fn diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("diagnose");
    if a.predictions.is_none() && a.disguise_models.is_empty() {
        return Err(CliError::Validation(
            "nothing to do: give --predictions and/or --disguise-model with --personas".into(),
        ));
    }
    let records = load_corpus(&a.corpus)?;
    let refs: Vec<&SentenceRecord> = records.iter().collect();
    create_dir(&a.out)?;
    let mut inputs = vec![a.corpus.clone()];
    let mut outputs = Vec::new();

    if let Some(path) = &a.predictions {
        let predictions = load_predictions(path)?;
        if let Some(p) = predictions.iter().find(|p| p.attention.is_none()) {
            return Err(CliError::Validation(format!(
                "prediction {} has no attention weights; tag with an attention model",
                p.id
            )));
        }
        let analysis = analyze_attention(&refs, &predictions)?;
        let hist = rank_histogram(&analysis, a.buckets)?;
        let marks: Vec<String> = a.marks.chars().map(String::from).collect();
        let mark_refs: Vec<&str> = marks.iter().map(String::as_str).collect();
        let punct = punctuation_attention_stats(&refs, &predictions, &mark_refs)?;

        let ranks_json = a.out.join("ranks.json");
        write_json(&ranks_json, &analysis)?;
        let mut bytes = Vec::new();
        write_histogram_csv(&hist, &mut bytes)?;
        let ranks_csv = a.out.join("rank_histogram.csv");
        write_bytes(&ranks_csv, &bytes)?;
        let mut bytes = Vec::new();
        write_punctuation_csv(&punct, &mut bytes)?;
        let punct_csv = a.out.join("punctuation.csv");
        write_bytes(&punct_csv, &bytes)?;
        inputs.push(path.clone());
        outputs.extend([ranks_json, ranks_csv, punct_csv]);
    }

    if !a.disguise_models.is_empty() {
        let personas_path = a
            .personas
            .as_ref()
            .ok_or_else(|| CliError::Validation("--disguise-model needs --personas".into()))?;
        let personas: Vec<Persona> = crate::read_json(personas_path)?;
        let personas: Vec<(String, AuthorMeta)> = personas.into_iter().map(|p| (p.name, p.metadata)).collect();
        let mut models = Vec::new();
        for (name, path) in &a.disguise_models {
            models.push((name.clone(), load_model(path, a.external.as_deref())?));
            inputs.push(path.clone());
        }
        let named: Vec<(String, &Model<f32>)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
        let report = disguise_experiment(&named, &refs, &personas)?;
        let mut bytes = Vec::new();
        report.write_csv(&mut bytes)?;
        let csv_path = a.out.join("disguise.csv");
        write_bytes(&csv_path, &bytes)?;
        let json_path = a.out.join("disguise.json");
        write_json(&json_path, &report)?;
        inputs.push(personas_path.clone());
        outputs.extend([csv_path, json_path]);
    }
    let config = json!({ "buckets": a.buckets, "marks": a.marks });
    finish(m, Some(&a.out), config, Vec::new(), inputs, outputs)
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let service = Arc::new(ReviewService::open(&a.predictions, &a.corpus, &a.log)?);
    let pending = service.read(|s| s.stats().pending);
    eprintln!("serving {pending} pending items on http://{}", a.bind);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(semtag_review::serve(service, a.bind))?;
    Ok(())
}

fn export(a: ExportArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("export");
    let corpus = load_corpus(&a.corpus)?;
    let mut accepted = export_accepted(&read_log(&a.log)?, &corpus)?;
    let mut inputs = vec![a.log.clone(), a.corpus.clone()];
    if let Some(path) = &a.exclude {
        let existing: HashSet<String> = load_corpus(path)?.into_iter().map(|r| r.id).collect();
        let before = accepted.len();
        accepted.retain(|r| !existing.contains(&r.id));
        if accepted.len() < before {
            eprintln!(
                "left out {} sentences already in {}",
                before - accepted.len(),
                path.display()
            );
        }
        inputs.push(path.clone());
    }
    save_corpus(&a.out, &accepted)?;
    finish(m, Some(&a.out), Value::Null, Vec::new(), inputs, vec![a.out.clone()])
}
