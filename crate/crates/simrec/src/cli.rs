use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use simrec_core::corpus::{FeatureCombo, JournalProfile};
use simrec_core::eval::{evaluate_model, format_table, EvalReport, EvalRow, ReportMetadata};
use simrec_core::synthetic::{generate, SyntheticSpec};

use crate::artifact::{load_encoder, load_model, save_encoder, save_model};
use crate::config::{Config, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::io::{load_corpus, load_normalizer, load_prepared, split_entries, write_jsonl};
use crate::pipeline::{finetune_stage, normalize_record, sweep_stage, train_stage};
use crate::report::{export_report, table_path};
use crate::service::{router, AppState, Recommender};

#[derive(Debug, Parser)]
#[command(name = "simrec", version, about = "Journal recommendation: fine-tune, train, evaluate, serve")]
pub struct Cli {
    /// TOML config merged over the defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus with disjoint per-journal vocabularies.
    Synth(SynthArgs),
    /// Normalize a corpus and write train/test split files.
    Prepare(PrepareArgs),
    /// Contrastive fine-tuning of a fresh toy encoder.
    Finetune(FinetuneArgs),
    /// Train a classification head for one feature combination.
    Train(TrainArgs),
    /// Accuracy@K sweep over feature combinations, or one trained model.
    Evaluate(EvaluateArgs),
    /// Serve recommendations over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub journals: usize,
    #[arg(long, default_value_t = 25)]
    pub docs: usize,
    #[arg(long, default_value_t = 7)]
    pub corpus_seed: u64,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub papers: PathBuf,
    #[arg(long)]
    pub journals: PathBuf,
    /// Explicit split; without it ids are split 80/20 by hash.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    /// Encoder artifact directory to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Encoder artifact directory.
    #[arg(long)]
    pub encoder: PathBuf,
    #[arg(long, default_value = "TAKS")]
    pub combo: FeatureCombo,
    /// Model artifact directory to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Encoder artifact; one head per combination is trained on top of it.
    #[arg(long, required_unless_present = "artifact", conflicts_with = "artifact")]
    pub encoder: Option<PathBuf>,
    /// Evaluate this trained model only.
    #[arg(long)]
    pub artifact: Option<PathBuf>,
    /// Comma list such as `TAK,TAKS`; all fourteen by default.
    #[arg(long, value_delimiter = ',', conflicts_with = "artifact")]
    pub combos: Vec<FeatureCombo>,
    /// Report path (JSON lines); the table goes next to it as `.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    #[arg(long)]
    pub host: Option<String>,
    /// 0 picks a free port.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Serialize)]
struct PrepareSummary {
    train: usize,
    test: usize,
    journals: usize,
    empty_records: usize,
}

/// `SOURCE_DATE_EPOCH`, when set, stamps reports; otherwise they carry none.
fn report_timestamp() -> Option<String> {
    std::env::var("SOURCE_DATE_EPOCH").ok().filter(|s| !s.is_empty())
}

pub fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?.with_seed(cli.seed);
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Prepare(a) => prepare(&config, &a),
        Command::Finetune(a) => finetune_cmd(&config, &a),
        Command::Train(a) => train_cmd(&config, &a),
        Command::Evaluate(a) => evaluate_cmd(&config, &a),
        Command::Serve(a) => serve_cmd(&config, &a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec { journals: a.journals, docs_per_journal: a.docs, seed: a.corpus_seed, ..Default::default() };
    let corpus = generate(&spec);
    create_dir(&a.out)?;
    write_jsonl(&a.out.join("papers.jsonl"), &corpus.papers)?;
    write_jsonl(&a.out.join("journals.jsonl"), &corpus.journals)?;
    println!("{} papers, {} journals", corpus.papers.len(), corpus.journals.len());
    Ok(())
}

fn prepare(config: &Config, a: &PrepareArgs) -> Result<()> {
    let normalizer = load_normalizer(config.data.stopwords_extra.as_deref())?;
    let split = load_corpus(&a.papers, &a.journals, a.split.as_deref(), &normalizer)?;
    create_dir(&a.out)?;
    let train: Vec<_> = split.train.iter().map(|r| normalize_record(&normalizer, r)).collect();
    let test: Vec<_> = split.test.iter().map(|r| normalize_record(&normalizer, r)).collect();
    let empty = train
        .iter()
        .chain(&test)
        .filter(|r| r.title.is_empty() && r.abstract_text.is_empty() && r.keywords.is_empty())
        .count();
    write_jsonl(&a.out.join("train.jsonl"), &train)?;
    write_jsonl(&a.out.join("test.jsonl"), &test)?;
    let journals: Vec<&JournalProfile> = split.journals.iter().collect();
    write_jsonl(&a.out.join("journals.jsonl"), journals)?;
    write_jsonl(&a.out.join("split.jsonl"), &split_entries(&split))?;
    let summary = PrepareSummary { train: train.len(), test: test.len(), journals: split.journals.len(), empty_records: empty };
    let text = serde_json::to_string(&summary).expect("summary serializes");
    let path = a.out.join("summary.json");
    std::fs::write(&path, format!("{text}\n")).map_err(|e| Error::io(&path, e))?;
    if empty > 0 {
        log::warn!("{empty} records have no usable text after normalization");
    }
    println!("{text}");
    Ok(())
}

fn finetune_cmd(config: &Config, a: &FinetuneArgs) -> Result<()> {
    let normalizer = load_normalizer(config.data.stopwords_extra.as_deref())?;
    let split = load_prepared(&a.data, &normalizer)?;
    let outcome = finetune_stage(config, &split, &normalizer)?;
    let fp = split.journals.fingerprint();
    save_encoder(&a.out, &outcome.encoder, Some(&fp), Some(&config.contrastive), &outcome.log)?;
    let means = outcome.epoch_means();
    info!("epoch mean losses {means:?}");
    println!("encoder {} ({} steps) -> {}", outcome.encoder.fingerprint(), outcome.log.len(), a.out.display());
    Ok(())
}

fn train_cmd(config: &Config, a: &TrainArgs) -> Result<()> {
    let normalizer = load_normalizer(config.data.stopwords_extra.as_deref())?;
    let split = load_prepared(&a.data, &normalizer)?;
    let enc = load_encoder(&a.encoder)?;
    let model = train_stage(config, enc.encoder, &split, a.combo, &normalizer, enc.journal_table.as_deref())?;
    save_model(&a.out, &model, &normalizer, Some(&config.head))?;
    println!("model {} ({}) -> {}", model.fingerprint(), a.combo, a.out.display());
    Ok(())
}

fn evaluate_cmd(config: &Config, a: &EvaluateArgs) -> Result<()> {
    let (report, failure) = if let Some(dir) = &a.artifact {
        let art = load_model(dir)?;
        let split = load_prepared(&a.data, &art.normalizer)?;
        let accuracy = evaluate_model(&art.model, &split, &art.normalizer)?;
        let row = EvalRow {
            combo: art.model.combo,
            accuracy,
            model_hash: art.model.fingerprint(),
            train_size: split.train.len(),
            test_size: split.test.len(),
            skipped: art.model.skipped,
        };
        let metadata =
            ReportMetadata { dataset_hash: split.fingerprint(), seed: art.model.seed, timestamp: report_timestamp() };
        (EvalReport { rows: vec![row], metadata }, None)
    } else {
        let normalizer = load_normalizer(config.data.stopwords_extra.as_deref())?;
        let split = load_prepared(&a.data, &normalizer)?;
        let enc_dir = a.encoder.as_ref().expect("clap enforces --encoder without --artifact");
        let enc = load_encoder(enc_dir)?;
        let combos = if a.combos.is_empty() { FeatureCombo::all() } else { a.combos.clone() };
        let mut out = sweep_stage(config, &enc.encoder, &split, &combos, &normalizer, enc.journal_table.as_deref());
        out.report.metadata.timestamp = report_timestamp();
        (out.report, out.failures.into_iter().next())
    };
    export_report(&report, &a.out)?;
    print!("{}", format_table(&report));
    println!("report -> {} and {}", a.out.display(), table_path(&a.out).display());
    match failure {
        Some(f) => Err(f.error.into()),
        None => Ok(()),
    }
}

fn serve_cmd(config: &Config, a: &ServeArgs) -> Result<()> {
    let host = a.host.clone().unwrap_or_else(|| config.serve.host.clone());
    let port = a.port.unwrap_or(config.serve.port);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| Error::io("tokio", e))?;
    runtime.block_on(async {
        let listener =
            tokio::net::TcpListener::bind((host.as_str(), port)).await.map_err(|e| Error::io(format!("{host}:{port}"), e))?;
        let addr: SocketAddr = listener.local_addr().map_err(|e| Error::io("listener", e))?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();

        let state = AppState::pending();
        let loader = state.clone();
        let dir = a.artifact.clone();
        let loaded = tokio::task::spawn_blocking(move || -> Result<()> {
            let art = load_model(&dir)?;
            info!("loaded model {} ({})", art.manifest.model_hash, art.model.combo);
            loader.install(Recommender::from(art));
            Ok(())
        });
        let server = tokio::spawn(async move { axum::serve(listener, router(state)).await });
        match loaded.await {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                server.abort();
                return Err(e);
            }
            Err(e) => {
                server.abort();
                return Err(Error::io("artifact loader", std::io::Error::other(e)));
            }
        }
        match server.await {
            Ok(r) => r.map_err(|e| Error::io("server", e)),
            Err(e) => Err(Error::io("server", std::io::Error::other(e))),
        }
    })
}
