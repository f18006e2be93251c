//! End-to-end run: load, clean, split, train/collect backends, vote,
//! evaluate and report.
//!
//! Output layout under the run directory:
//!
//! ```text
//! splits/{train,dev,test}.tsv        cleaned splits
//! models/<id>.model                  native baselines
//! predictions/<id>.{dev,test}.tsv    per-model and `ensemble` predictions
//! reports/<id>.{dev,test}.json       per-model metrics
//! reports/results.{dev,test}.{txt,tsv,json}
//! reports/agreement.{dev,test}.{txt,tsv}
//! reports/confusion.ensemble.{dev,test}.tsv
//! submission.txt                     ensemble test labels, one per line
//! run_manifest.json                  configs, seeds, sizes, file hashes
//! ```
//!
//! A `RUN_INCOMPLETE` marker exists while the run is in progress; a failed
//! run leaves `RUN_FAILED` naming the stage instead.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::baseline::BaselineModel;
use crate::config::{BackendConfig, RunConfig};
use crate::corpus::{load_corpus, save_corpus, split_corpus, Corpus, CorpusFormat};
use crate::ensemble::{agreement_report, vote, TieBreak, VotePolicy, VoteStrategy, ENSEMBLE_MODEL_ID};
use crate::error::{Error, Result};
use crate::eval::{compare_models, evaluate, MetricsReport, ResultsTable};
use crate::fsutil;
use crate::predfile::{read_predictions, write_predictions, write_submission, BackendKind, BackendManifest, PredictionSet};
use crate::preprocess::{clean_corpus_with_stats, CleaningStats};

pub const INCOMPLETE_MARKER: &str = "RUN_INCOMPLETE";
pub const FAILED_MARKER: &str = "RUN_FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub cleaning: CleaningStats,
    pub split_sizes: (usize, usize, usize),
    /// Results tables for each split with gold labels.
    pub tables: BTreeMap<Split, ResultsTable>,
    pub reports: BTreeMap<Split, Vec<(String, MetricsReport)>>,
    pub model_priority: Vec<String>,
}

struct Splits {
    train: Corpus,
    eval: BTreeMap<Split, Corpus>,
}

/// Executes `config` into `output_dir`.
pub fn run(config: &RunConfig, output_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let _ = fs::remove_file(output_dir.join(FAILED_MARKER));
    fsutil::write_atomic(&output_dir.join(INCOMPLETE_MARKER), b"run in progress\n")?;

    match run_stages(config, output_dir) {
        Ok(summary) => {
            fs::remove_file(output_dir.join(INCOMPLETE_MARKER))
                .map_err(|e| Error::io(output_dir.join(INCOMPLETE_MARKER), e))?;
            Ok(summary)
        }
        Err(err) => {
            let _ = fsutil::write_atomic(&output_dir.join(FAILED_MARKER), format!("{err}\n").as_bytes());
            let _ = fs::remove_file(output_dir.join(INCOMPLETE_MARKER));
            Err(err)
        }
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

fn load_all(config: &RunConfig, paths: &[PathBuf]) -> Result<Corpus> {
    let parts = paths
        .iter()
        .map(|p| load_corpus(p, config.corpus_format(p)))
        .collect::<Result<Vec<_>>>()?;
    Corpus::concat(&parts)
}

fn run_stages(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    let digits = config.evaluation.digits;
    let average = config.evaluation.average;
    let mut written: Vec<PathBuf> = Vec::new();

    // Load and clean.
    let (splits, cleaning, sizes) = stage("load", || {
        let c = &config.corpus;
        let mut stats = CleaningStats::default();
        let mut clean = |corpus: Corpus| {
            let (cleaned, s) = clean_corpus_with_stats(&corpus, &config.cleaning);
            stats.examples += s.examples;
            stats.tokens_removed += s.tokens_removed;
            stats.emptied += s.emptied;
            cleaned
        };
        let (train, dev, test) = if !c.data.is_empty() {
            let data = clean(load_all(config, &c.data)?);
            let spec = config.split.as_ref().expect("validated").spec()?;
            let (train, dev, test) = split_corpus(&data, &spec)?;
            (train, Some(dev), Some(test))
        } else {
            let train = clean(load_all(config, &c.train)?);
            let dev = c.dev.as_ref().map(|p| load_all(config, std::slice::from_ref(p))).transpose()?.map(&mut clean);
            let test = c.test.as_ref().map(|p| load_all(config, std::slice::from_ref(p))).transpose()?.map(&mut clean);
            (train, dev, test)
        };
        let train = if c.extra_train.is_empty() {
            train
        } else {
            let extra = clean(load_all(config, &c.extra_train)?);
            Corpus::concat(&[train, extra])?
        };
        // Evaluation splits score against the training label space.
        let mut space: Vec<String> = train.label_space().to_vec();
        for corpus in dev.iter().chain(&test) {
            space.extend(corpus.label_space().iter().cloned());
        }
        space.sort();
        space.dedup();
        let relabel = |c: Corpus| Corpus::with_label_space(c.examples().to_vec(), space.clone());
        let train = relabel(train)?;
        let mut eval = BTreeMap::new();
        if let Some(dev) = dev {
            eval.insert(Split::Dev, relabel(dev)?);
        }
        if let Some(test) = test {
            eval.insert(Split::Test, relabel(test)?);
        }
        let sizes = (
            train.len(),
            eval.get(&Split::Dev).map_or(0, Corpus::len),
            eval.get(&Split::Test).map_or(0, Corpus::len),
        );
        Ok((Splits { train, eval }, stats, sizes))
    })?;

    stage("write-splits", || {
        let dir = out.join("splits");
        let path = dir.join("train.tsv");
        save_corpus(&splits.train, &path, CorpusFormat::Tsv)?;
        written.push(path);
        for (split, corpus) in &splits.eval {
            let path = dir.join(format!("{}.tsv", split.name()));
            save_corpus(corpus, &path, CorpusFormat::Tsv)?;
            written.push(path);
        }
        Ok(())
    })?;

    // Backends. Native models train in parallel; each is deterministic on its own.
    let natives: Vec<_> = config
        .backends
        .iter()
        .filter_map(|b| match b {
            BackendConfig::Native(n) => Some(n),
            BackendConfig::External(_) => None,
        })
        .collect();
    let width = config.threads.unwrap_or(natives.len()).max(1);
    let mut trained: Vec<Result<BaselineModel>> = Vec::with_capacity(natives.len());
    for group in natives.chunks(width) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = group
                .iter()
                .map(|n| {
                    let train = &splits.train;
                    scope.spawn(move || {
                        BaselineModel::fit(train, n.feature_config(), n.train_config())
                            .map_err(|e| e.in_stage(format!("train:{}", n.model_id)))
                    })
                })
                .collect();
            trained.extend(
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("training thread panicked".into())))),
            );
        });
    }
    let mut trained = natives.iter().zip(trained);

    let mut manifests = Vec::new();
    let mut predictions: BTreeMap<Split, Vec<PredictionSet>> = BTreeMap::new();
    for backend in &config.backends {
        let id = backend.model_id();
        match backend {
            BackendConfig::Native(native) => {
                let (_, model) = trained.next().expect("one result per native backend");
                let model = model?;
                stage(&format!("predict:{id}"), || {
                    let path = out.join("models").join(format!("{id}.model"));
                    model.save(&path)?;
                    written.push(path);
                    for (split, corpus) in &splits.eval {
                        let set = model.predict_corpus(corpus, id)?;
                        let path = prediction_path(out, id, *split);
                        write_predictions(&set, &path)?;
                        written.push(path);
                        predictions.entry(*split).or_default().push(set);
                    }
                    let cfg = serde_json::json!({
                        "features": native.feature_config(),
                        "train": native.train_config(),
                        "profile": native.profile,
                        "final_loss": model.loss_history.last(),
                    });
                    manifests.push(BackendManifest::new(id, BackendKind::NativeBaseline, cfg));
                    Ok(())
                })?;
            }
            BackendConfig::External(ext) => {
                stage(&format!("collect:{id}"), || {
                    for (split, corpus) in &splits.eval {
                        let source = match split {
                            Split::Dev => &ext.dev_predictions,
                            Split::Test => &ext.test_predictions,
                        };
                        let source = source.as_ref().ok_or_else(|| {
                            Error::validation(format!("`{id}` has no {} predictions", split.name()))
                        })?;
                        let set = read_predictions(source, &corpus.ids())?.with_model_id(id)?;
                        let path = prediction_path(out, id, *split);
                        write_predictions(&set, &path)?;
                        written.push(path);
                        predictions.entry(*split).or_default().push(set);
                    }
                    let cfg = match &ext.manifest {
                        Some(p) => serde_json::from_slice(&fsutil::read_bytes(p)?)
                            .map_err(|e| Error::validation(format!("{}: {e}", p.display())))?,
                        None => serde_json::json!({}),
                    };
                    manifests.push(BackendManifest::new(id, BackendKind::External, cfg));
                    Ok(())
                })?;
            }
        }
    }
    crate::predfile::check_unique_model_ids(&manifests)?;

    // Per-model scores on every labeled split.
    let mut reports: BTreeMap<Split, Vec<(String, MetricsReport)>> = BTreeMap::new();
    stage("evaluate", || {
        for (split, sets) in &predictions {
            let gold = &splits.eval[split];
            if !gold.is_fully_labeled() || gold.is_empty() {
                continue;
            }
            for set in sets {
                let (_, report) = evaluate(gold, set)?;
                let path = out.join("reports").join(format!("{}.{}.json", set.model_id(), split.name()));
                fsutil::write_atomic(&path, report.to_json(average, digits).as_bytes())?;
                written.push(path);
                reports.entry(*split).or_default().push((set.model_id().to_owned(), report));
            }
        }
        Ok(())
    })?;

    // Priority for tie breaking: configured, else best dev score first.
    let model_priority = if !config.ensemble.model_priority.is_empty() {
        config.ensemble.model_priority.clone()
    } else {
        let mut order: Vec<(usize, &str, f64)> = config
            .backends
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let score = reports
                    .get(&Split::Dev)
                    .and_then(|r| r.iter().find(|(id, _)| id == b.model_id()))
                    .map_or(f64::NEG_INFINITY, |(_, r)| r.f1(average));
                (i, b.model_id(), score)
            })
            .collect();
        order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        order.into_iter().map(|(_, id, _)| id.to_owned()).collect()
    };
    let policy = VotePolicy {
        model_priority: model_priority.clone(),
        ..config.ensemble.clone()
    };

    let mut tables = BTreeMap::new();
    stage("ensemble", || {
        for (split, sets) in &predictions {
            let combined = vote(sets, &policy)?;
            let path = prediction_path(out, ENSEMBLE_MODEL_ID, *split);
            write_predictions(&combined, &path)?;
            written.push(path);

            let agreement = agreement_report(sets)?;
            for (ext, body) in [("tsv", agreement.to_tsv(digits)), ("txt", agreement.to_text(digits))] {
                let path = out.join("reports").join(format!("agreement.{}.{ext}", split.name()));
                fsutil::write_atomic(&path, body.as_bytes())?;
                written.push(path);
            }

            if *split == Split::Test {
                let path = out.join("submission.txt");
                write_submission(&combined, &path)?;
                written.push(path);
            }

            let gold = &splits.eval[split];
            if let Some(split_reports) = reports.get_mut(split) {
                let (matrix, report) = evaluate(gold, &combined)?;
                let path = out.join("reports").join(format!("{ENSEMBLE_MODEL_ID}.{}.json", split.name()));
                fsutil::write_atomic(&path, report.to_json(average, digits).as_bytes())?;
                written.push(path);
                let path = out.join("reports").join(format!("confusion.{ENSEMBLE_MODEL_ID}.{}.tsv", split.name()));
                fsutil::write_atomic(&path, matrix.to_tsv().as_bytes())?;
                written.push(path);
                split_reports.push((ENSEMBLE_MODEL_ID.to_owned(), report));
            }
        }
        Ok(())
    })?;

    stage("report", || {
        let strategy = match policy.strategy {
            VoteStrategy::Hard => "Hard Voting",
            VoteStrategy::Soft => "Soft Voting",
        };
        for (split, split_reports) in &reports {
            let title = format!("Results on the {} split ({} examples)", split.name(), splits.eval[split].len());
            let table = compare_models(&title, split_reports, average)?;
            for (ext, body) in [
                ("txt", table.to_text(digits, strategy)),
                ("tsv", table.to_tsv(digits)),
                ("json", table.to_json(digits)),
            ] {
                let path = out.join("reports").join(format!("results.{}.{ext}", split.name()));
                fsutil::write_atomic(&path, body.as_bytes())?;
                written.push(path);
            }
            tables.insert(*split, table);
        }
        Ok(())
    })?;

    stage("manifest", || {
        let mut files = BTreeMap::new();
        for path in &written {
            let rel = path.strip_prefix(out).unwrap_or(path).to_string_lossy().into_owned();
            files.insert(rel, fsutil::sha256_file(path)?);
        }
        let mut inputs = BTreeMap::new();
        let c = &config.corpus;
        for path in c.data.iter().chain(&c.train).chain(&c.extra_train).chain(c.dev.iter()).chain(c.test.iter()) {
            inputs.insert(path.to_string_lossy().into_owned(), fsutil::sha256_file(path)?);
        }
        let manifest = serde_json::json!({
            "config": config,
            "split_sizes": { "train": sizes.0, "dev": sizes.1, "test": sizes.2 },
            "cleaning": cleaning,
            "vote_policy": {
                "strategy": policy.strategy,
                "tie_break": policy.tie_break,
                "model_priority": if policy.tie_break == TieBreak::ModelPriority { Some(&model_priority) } else { None },
            },
            "backends": manifests,
            "inputs": inputs,
            "outputs": files,
            "created_unix": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        });
        let mut body = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        body.push('\n');
        fsutil::write_atomic(&out.join("run_manifest.json"), body.as_bytes())
    })?;

    Ok(RunSummary {
        output_dir: out.to_path_buf(),
        cleaning,
        split_sizes: sizes,
        tables,
        reports,
        model_priority,
    })
}

pub fn prediction_path(out: &Path, model_id: &str, split: Split) -> PathBuf {
    out.join("predictions").join(format!("{model_id}.{}.tsv", split.name()))
}
