use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wavefm::dataset::{
    class_names, finetune_view, pretrain_view, read_container, stratified_split, write_container,
    Corpus, FinetunePlan, LabelFamily, SignalRecord, DEFAULT_RATIOS,
};
use wavefm::eval::{
    bench_table, complexity_benchmark, evaluate_classification, evaluate_regression, line_chart,
    MetricsReport, Series,
};
use wavefm::hash::tree_digest;
use wavefm::heads::HeadKind;
use wavefm::model::{load_checkpoint, save_checkpoint, Model};
use wavefm::synth::{generate_cir_corpus, generate_corpus, Catalog};
use wavefm::training::{
    finetune, pretrain_ssl, pretrain_supervised, FinetuneTask, FitOutcome, Phase, TrainConfig,
};
use wavefm::{Error, Result};

use crate::config::ExperimentConfig;
use crate::manifest::{input, now, RunManifest};
use crate::{Bench, Cli, Command, Eval, Finetune, GenData, Overrides, Pretrain, TaskArg};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const HISTORY_FILE: &str = "history.jsonl";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Finetune(a) => finetune_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    }
}

/// Missing inputs are usage errors, not runtime failures.
fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    require(path)?;
    read_container(path)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(path)
}

fn args() -> Vec<String> {
    std::env::args().skip(1).collect()
}

fn phase_config(cfg: &ExperimentConfig, phase: Phase, o: &Overrides) -> Result<TrainConfig> {
    let mut t = cfg.phase(phase).clone();
    if let Some(s) = o.seed {
        t.seed = s;
    }
    if let Some(e) = o.epochs {
        t.epochs = e;
    }
    if let Some(lr) = o.lr {
        t.lr = lr;
    }
    t.validate()?;
    Ok(t)
}

fn check_length(model_len: usize, corpus: &Corpus) -> Result<()> {
    if model_len != corpus.length {
        return Err(Error::Config(format!(
            "model length {model_len} does not match corpus length {}",
            corpus.length
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct Timing<'a> {
    epoch_seconds: &'a [f64],
    best_epoch: usize,
    steps: usize,
    activation_scalars_peak: usize,
}

fn timing(out: &FitOutcome) -> serde_json::Value {
    serde_json::to_value(Timing {
        epoch_seconds: &out.epoch_seconds,
        best_epoch: out.best_epoch,
        steps: out.steps,
        activation_scalars_peak: out.activation_scalars_peak,
    })
    .unwrap_or_default()
}

fn gen_data(a: GenData) -> Result<()> {
    let started = now();
    let catalog = match &a.catalog {
        Some(p) => {
            require(p)?;
            Catalog::load(p)?
        }
        None => Catalog::builtin(),
    };
    let ratios = match &a.split {
        Some(v) => [v[0], v[1], v[2]],
        None => DEFAULT_RATIOS,
    };
    let per_class = a.per_class.unwrap_or(catalog.per_class_count);
    let mut outputs = Vec::new();
    let mut corpora = Vec::new();
    if !catalog.technologies.is_empty() {
        corpora.push((
            "iq",
            generate_corpus(&catalog.technologies, per_class, catalog.length, a.seed)?,
        ));
    }
    if !catalog.environments.is_empty() {
        corpora.push((
            "cir",
            generate_cir_corpus(&catalog.environments, per_class, catalog.length, a.seed)?,
        ));
    }
    if corpora.is_empty() {
        return Err(Error::Config(
            "catalog lists no technologies or environments".into(),
        ));
    }
    for (name, mut corpus) in corpora {
        corpus.splits = Some(stratified_split(&corpus.records, ratios, a.seed)?);
        let dir = a.out.join(name);
        let summary = write_container(&corpus, &dir)?;
        println!(
            "{}: {} records, {} classes",
            dir.display(),
            summary.sample_count,
            summary.classes.len()
        );
        outputs.push(dir);
    }
    let inputs = a
        .catalog
        .as_deref()
        .map(input)
        .transpose()?
        .into_iter()
        .collect();
    RunManifest {
        command: "gen-data".into(),
        args: args(),
        config: serde_json::json!({ "per_class": per_class, "length": catalog.length, "split": ratios }),
        seed: a.seed,
        inputs,
        outputs,
        started_unix_s: started,
        finished_unix_s: now(),
        timing: serde_json::Value::Null,
    }
    .write(&a.out)
}

fn pretrain(a: Pretrain) -> Result<()> {
    let started = now();
    let cfg = ExperimentConfig::load(a.overrides.config.as_deref())?;
    let corpus = load_corpus(&a.data)?;
    check_length(cfg.model.length, &corpus)?;
    let view = pretrain_view(&corpus, a.exclude_class.as_deref())?;
    let (phase, (mut model, outcome)) = if a.ssl {
        let t = phase_config(&cfg, Phase::PretrainSsl, &a.overrides)?;
        (
            t.clone(),
            pretrain_ssl(&view.train, &view.val, cfg.model, &t)?,
        )
    } else {
        let t = phase_config(&cfg, Phase::PretrainSupervised, &a.overrides)?;
        let classes = match corpus.family {
            LabelFamily::Classification => view.classes.clone(),
            LabelFamily::Ranging => class_names(&corpus),
        };
        (
            t.clone(),
            pretrain_supervised(&view.train, &view.val, classes, cfg.model, &t)?,
        )
    };
    model.provenance.corpus_digest = Some(tree_digest(&a.data)?);
    model.provenance.excluded_class = a.exclude_class.clone();
    model.provenance.split = Some(view.split.clone());
    create_dir(&a.out)?;
    save_checkpoint(&model, &a.out)?;
    outcome.history.write_jsonl(&a.out.join(HISTORY_FILE))?;
    println!("{}", a.out.display());
    RunManifest {
        command: "pretrain".into(),
        args: args(),
        config: serde_json::json!({ "model": cfg.model, "train": phase }),
        seed: phase.seed,
        inputs: vec![input(&a.data)?],
        outputs: vec![a.out.clone()],
        started_unix_s: started,
        finished_unix_s: now(),
        timing: timing(&outcome),
    }
    .write(&a.out)
}

/// The fine-tuning pool: the pre-training test records plus the held-out
/// class when the corpus is the one pre-trained on; every record of a
/// corpus the checkpoint has never seen.
fn finetune_pool(
    model: &Model,
    corpus: &Corpus,
    digest: &str,
) -> Result<(Vec<u64>, Option<String>)> {
    let p = &model.provenance;
    match (&p.corpus_digest, &p.split) {
        (Some(d), Some(split)) if d == digest => Ok((split.test.clone(), p.excluded_class.clone())),
        _ => Ok((corpus.records.iter().map(|r| r.id).collect(), None)),
    }
}

fn finetune_cmd(a: Finetune) -> Result<()> {
    let started = now();
    let cfg = ExperimentConfig::load(a.overrides.config.as_deref())?;
    require(&a.checkpoint)?;
    let pre = load_checkpoint(&a.checkpoint)?;
    let corpus = load_corpus(&a.data)?;
    check_length(pre.config.length, &corpus)?;
    let (phase, task) = match a.task {
        TaskArg::Cls => (
            Phase::FinetuneCls,
            FinetuneTask::Classification {
                classes: class_names(&corpus),
            },
        ),
        TaskArg::Reg => {
            if corpus.family != LabelFamily::Ranging {
                return Err(Error::LabelFamily {
                    expected: LabelFamily::Ranging.to_string(),
                    found: corpus.family.to_string(),
                });
            }
            (Phase::FinetuneReg, FinetuneTask::Regression)
        }
    };
    let t = phase_config(&cfg, phase, &a.overrides)?;
    let digest = tree_digest(&a.data)?;
    let (pool, excluded) = finetune_pool(&pre, &corpus, &digest)?;
    let plan = FinetunePlan {
        ratios: cfg.finetune_ratios,
        samples_per_class: a.samples_per_class,
        max_per_class: a.max_per_class,
        seed: t.seed,
    };
    let view = finetune_view(&corpus, &pool, excluded.as_deref(), &plan)?;
    let (mut model, outcome) = finetune(&pre, &view.train, &view.val, task, &t)?;
    model.provenance.corpus_digest = Some(digest);
    model.provenance.excluded_class = None;
    model.provenance.split = Some(view.split.clone());
    let report = evaluate(&model, &view.test, &t)?;

    create_dir(&a.out)?;
    save_checkpoint(&model, &a.out)?;
    outcome.history.write_jsonl(&a.out.join(HISTORY_FILE))?;
    let path = write_report(&report, &a.out)?;
    println!("{}", path.display());
    RunManifest {
        command: "finetune".into(),
        args: args(),
        config: serde_json::json!({ "train": t, "plan": plan, "train_records": view.train.len() }),
        seed: t.seed,
        inputs: vec![input(&a.checkpoint)?, input(&a.data)?],
        outputs: vec![a.out.clone()],
        started_unix_s: started,
        finished_unix_s: now(),
        timing: timing(&outcome),
    }
    .write(&a.out)
}

fn evaluate(model: &Model, test: &[SignalRecord], t: &TrainConfig) -> Result<MetricsReport> {
    let mut report = match model.head {
        HeadKind::Classification { .. } => evaluate_classification(model, test, t.eval_batch_size)?,
        HeadKind::Regression => evaluate_regression(model, test, t.eval_batch_size)?,
        HeadKind::Reconstruction => {
            return Err(Error::Config(
                "a reconstruction checkpoint has no task metrics; fine-tune it first".into(),
            ))
        }
    };
    report.param_count = Some(model.params.scalar_count(|_| true));
    Ok(report)
}

fn write_report(report: &MetricsReport, dir: &Path) -> Result<PathBuf> {
    write(dir.join(REPORT_TXT), &report.to_table())?;
    write(
        dir.join(REPORT_JSON),
        &(serde_json::to_string_pretty(report)? + "\n"),
    )
}

fn eval(a: Eval) -> Result<()> {
    require(&a.checkpoint)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let corpus = load_corpus(&a.data)?;
    check_length(model.config.length, &corpus)?;
    let ids = match &model.provenance.split {
        Some(s)
            if model.provenance.corpus_digest.as_deref()
                == Some(tree_digest(&a.data)?.as_str()) =>
        {
            s.test.clone()
        }
        _ => corpus
            .splits
            .as_ref()
            .map(|s| s.test.clone())
            .unwrap_or_default(),
    };
    let test = corpus.select(&ids)?;
    let report = evaluate(&model, &test, &TrainConfig::new(Phase::FinetuneCls))?;
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            println!("{}", write_report(&report, dir)?.display());
        }
        None => print!("{}", report.to_table()),
    }
    Ok(())
}

fn bench(a: Bench) -> Result<()> {
    let started = now();
    let cfg = ExperimentConfig::load(a.overrides.config.as_deref())?;
    let corpus = load_corpus(&a.data)?;
    check_length(cfg.model.length, &corpus)?;
    if corpus.family != LabelFamily::Classification {
        return Err(Error::LabelFamily {
            expected: LabelFamily::Classification.to_string(),
            found: corpus.family.to_string(),
        });
    }
    let mut t = phase_config(&cfg, Phase::PretrainSupervised, &a.overrides)?;
    if a.overrides.epochs.is_none() {
        t.epochs = wavefm::eval::BENCH_EPOCHS;
    }
    let view = pretrain_view(&corpus, None)?;
    let cap = |records: Vec<SignalRecord>| -> Vec<SignalRecord> {
        let Some(m) = a.max_per_class else {
            return records;
        };
        let mut seen = vec![0usize; corpus.classes.len()];
        records
            .into_iter()
            .filter(|r| {
                let c = r.label.unwrap_or(0);
                seen[c] += 1;
                seen[c] <= m
            })
            .collect()
    };
    let (train, test) = (cap(view.train), cap(view.test));
    let rows = complexity_benchmark(&train, &test, &view.classes, &cfg.model, &a.patch_sizes, &t)?;
    create_dir(&a.out)?;
    let table = bench_table(&rows);
    print!("{table}");
    write(a.out.join("bench.txt"), &table)?;
    write(
        a.out.join("bench.json"),
        &(serde_json::to_string_pretty(&rows)? + "\n"),
    )?;
    let series = Series {
        name: "accuracy".into(),
        points: rows
            .iter()
            .map(|r| (r.patch_len as f64, r.accuracy))
            .collect(),
    };
    write(
        a.out.join("bench.svg"),
        &line_chart(
            "Accuracy vs patch size",
            "patch size",
            "accuracy",
            &[series],
        ),
    )?;
    RunManifest {
        command: "bench".into(),
        args: args(),
        config: serde_json::json!({ "model": cfg.model, "train": t, "patch_sizes": a.patch_sizes }),
        seed: t.seed,
        inputs: vec![input(&a.data)?],
        outputs: vec![a.out.clone()],
        started_unix_s: started,
        finished_unix_s: now(),
        timing: serde_json::Value::Null,
    }
    .write(&a.out)
}
