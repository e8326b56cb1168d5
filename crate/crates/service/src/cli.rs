//! Command-line entry points.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use tod_core::belief::serialize_belief;
use tod_core::corpus::{
    build_pretrain_corpus, load_corpus, normalize_dialog, training_samples, SlotNormalizer,
};
use tod_core::engine::{Engine, EngineConfig, Session};
use tod_core::kb::Database;
use tod_core::polish::polish;
use tod_core::seqmodel::ngram::{train_ngram, NgramConfig, NgramModel, NgramSource};
use tod_core::seqmodel::{flatten, GeneratorBackend, TurnSample, MAX_SEQUENCE_TOKENS};
use tod_core::simeval::{
    generate_goals, load_goals, run_campaign, simulator_backend, CampaignConfig, NluMode,
    OracleKind,
};

use crate::http::{router, AppState, SessionStore};

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad paths or arguments; exit status 2.
    Usage(anyhow::Error),
    /// Anything that went wrong after the inputs were accepted; exit status 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "tod", version, about = "Task-oriented dialog engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Trained n-gram model file, or `scripted:perfect` / `scripted:lossy`.
    #[arg(long)]
    pub model: String,
    /// Directory of `<domain>.json` tables; the bundled database when omitted.
    #[arg(long)]
    pub db: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a JSONL corpus into training turns, held-out turns and pretraining chunks.
    Preprocess {
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        db: Option<PathBuf>,
        /// Every n-th dialog goes to the held-out split.
        #[arg(long, default_value_t = 10)]
        dev_every: usize,
    },
    /// Fit an n-gram model on utterance chunks.
    Pretrain {
        chunks: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        order: usize,
    },
    /// Fit an n-gram model and its end-of-sequence head on flattened turns.
    Train {
        turns: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Pretrained model whose counts are merged in.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        pretrain_weight: f64,
        /// Held-out turns for a perplexity report.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a simulated-user campaign and print the metrics table.
    Eval {
        /// Goal file; the bundled goals when omitted.
        #[arg(long)]
        goals: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        max_turns: usize,
        /// Read system turns by keyword spotting instead of structured values.
        #[arg(long)]
        keyword_nlu: bool,
        /// Also print the evaluation report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Interactive chat on stdin/stdout.
    Chat {
        #[command(flatten)]
        model: ModelArgs,
        /// Show belief, DB match and template for each turn.
        #[arg(long)]
        debug: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP session API.
    Serve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, env = "TOD_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Idle seconds before a session is evicted.
        #[arg(long, default_value_t = 3600)]
        session_ttl: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write random goals over a database.
    GenGoals {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(short = 'n', long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        db: Option<PathBuf>,
    },
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(anyhow!("{what} `{}` does not exist", path.display())))
    }
}

fn load_db(dir: Option<&Path>) -> CliResult<Database> {
    match dir {
        None => tod_core::data::database().context("bundled database").map_err(CliError::Runtime),
        Some(dir) if !dir.is_dir() => Err(CliError::Usage(anyhow!(
            "database directory `{}` does not exist",
            dir.display()
        ))),
        Some(dir) => Database::load_dir(dir)
            .with_context(|| format!("loading database from {}", dir.display()))
            .map_err(CliError::Usage),
    }
}

/// Resolves a `--model` argument to a backend.
pub fn load_backend(model: &str, db: &Arc<Database>) -> CliResult<Arc<dyn GeneratorBackend>> {
    match model {
        "scripted:perfect" => Ok(Arc::new(simulator_backend(db.clone(), OracleKind::Perfect))),
        "scripted:lossy" => Ok(Arc::new(simulator_backend(db.clone(), OracleKind::Lossy))),
        path => {
            require_file(Path::new(path), "model")?;
            let m = NgramModel::load(path).with_context(|| format!("loading model {path}"))?;
            Ok(Arc::new(m))
        }
    }
}

fn build_engine(args: &ModelArgs) -> CliResult<Engine> {
    let db = Arc::new(load_db(args.db.as_deref())?);
    let backend = load_backend(&args.model, &db)?;
    Ok(Engine::new(backend, db, EngineConfig::default()))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_turns(path: &Path) -> CliResult<Vec<TurnSample>> {
    require_file(path, "turns file")?;
    let text = fs::read_to_string(path).context("reading turns")?;
    let samples = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect::<anyhow::Result<Vec<TurnSample>>>()?;
    Ok(samples)
}

fn preprocess(corpus: &Path, output: &Path, db: Option<&Path>, dev_every: usize, out: &mut dyn Write) -> CliResult {
    require_file(corpus, "corpus")?;
    let db = load_db(db)?;
    let text = fs::read_to_string(corpus).context("reading corpus")?;
    let raw = load_corpus(&text).context("parsing corpus")?;
    let norm = SlotNormalizer::default();
    let dialogs = raw
        .iter()
        .map(|d| normalize_dialog(d, &norm))
        .collect::<Result<Vec<_>, _>>()
        .context("normalizing corpus")?;
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (i, d) in dialogs.into_iter().enumerate() {
        if dev_every > 0 && i % dev_every == dev_every - 1 {
            dev.push(d);
        } else {
            train.push(d);
        }
    }
    fs::create_dir_all(output).context("creating output directory")?;
    let train_turns = training_samples(&train, &db);
    let dev_turns = training_samples(&dev, &db);
    let chunks: Vec<String> = build_pretrain_corpus(&train, MAX_SEQUENCE_TOKENS)
        .iter()
        .map(|c| c.tokens().join(" "))
        .collect();
    write_jsonl(&output.join("turns.jsonl"), &train_turns)?;
    write_jsonl(&output.join("dev.jsonl"), &dev_turns)?;
    fs::write(output.join("chunks.txt"), chunks.join("\n") + "\n").context("writing chunks")?;
    writeln!(
        out,
        "{} dialogs -> {} training turns, {} held-out turns, {} pretraining chunks in {}",
        train.len() + dev.len(),
        train_turns.len(),
        dev_turns.len(),
        chunks.len(),
        output.display()
    )
    .context("writing output")?;
    Ok(())
}

fn pretrain(chunks: &Path, output: &Path, order: usize, out: &mut dyn Write) -> CliResult {
    require_file(chunks, "chunks file")?;
    let text = fs::read_to_string(chunks).context("reading chunks")?;
    let sequences: Vec<Vec<String>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect();
    let config = NgramConfig {
        order,
        ..Default::default()
    };
    let model = train_ngram(&[NgramSource::Sequences { sequences: sequences.clone(), weight: 1.0 }], &config)
        .context("training")?;
    model.save(output).context("saving model")?;
    writeln!(
        out,
        "pretrained order-{order} model on {} chunks; training perplexity {:.3}; saved to {}",
        sequences.len(),
        model.perplexity(&sequences),
        output.display()
    )
    .context("writing output")?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    turns: &Path,
    output: &Path,
    init: Option<&Path>,
    pretrain_weight: f64,
    dev: Option<&Path>,
    order: usize,
    seed: u64,
    out: &mut dyn Write,
) -> CliResult {
    let samples = read_turns(turns)?;
    let dev_samples = dev.map(read_turns).transpose()?;
    let mut sources = vec![NgramSource::Sequences {
        sequences: samples.iter().map(flatten).collect(),
        weight: 1.0,
    }];
    if let Some(init) = init {
        require_file(init, "init model")?;
        let pre = NgramModel::load(init).context("loading init model")?;
        sources.push(NgramSource::Counts {
            counts: pre.counts().clone(),
            weight: pretrain_weight,
        });
    }
    let config = NgramConfig {
        order,
        seed,
        ..Default::default()
    };
    let mut model = train_ngram(&sources, &config).map_err(|e| CliError::Usage(e.into()))?;
    model.fit_eos_head(&samples, &config);
    model.save(output).context("saving model")?;
    writeln!(out, "trained order-{order} model on {} turns; saved to {}", samples.len(), output.display())
        .context("writing output")?;
    if let Some(dev) = dev_samples {
        let seqs: Vec<Vec<String>> = dev.iter().map(flatten).collect();
        writeln!(out, "held-out perplexity: {:.4}", model.perplexity(&seqs)).context("writing output")?;
    }
    Ok(())
}

fn eval(
    goals: Option<&Path>,
    model: &ModelArgs,
    config: CampaignConfig,
    json: bool,
    out: &mut dyn Write,
) -> CliResult {
    let goals = match goals {
        Some(path) => {
            require_file(path, "goal file")?;
            let text = fs::read_to_string(path).context("reading goals")?;
            load_goals(&text).map_err(|e| CliError::Usage(e.into()))?
        }
        None => tod_core::data::goals().context("bundled goals")?,
    };
    let engine = build_engine(model)?;
    let (report, _) = run_campaign(&engine, &goals, &config).context("evaluation")?;
    writeln!(out, "backend: {}", engine.backend().describe()).context("writing output")?;
    write!(out, "{report}").context("writing output")?;
    if json {
        writeln!(out, "{}", serde_json::to_string(&report).context("serializing report")?)
            .context("writing output")?;
    }
    Ok(())
}

/// Reads user lines from `input` until EOF or `/quit`.
pub fn chat(engine: &Engine, seed: u64, debug: bool, input: &mut dyn BufRead, out: &mut dyn Write) -> CliResult {
    let mut session = Session::new("cli", seed);
    let mut line = String::new();
    loop {
        write!(out, "user> ").and_then(|_| out.flush()).context("writing output")?;
        line.clear();
        if input.read_line(&mut line).context("reading input")? == 0 {
            writeln!(out).context("writing output")?;
            return Ok(());
        }
        let text = line.trim();
        if text == "/quit" {
            return Ok(());
        }
        if text.is_empty() {
            continue;
        }
        let turn = engine.respond(&mut session, text).context("responding")?;
        let polished = polish(&turn, engine.db());
        writeln!(out, "system> {polished}").context("writing output")?;
        if debug {
            writeln!(out, "  domain:   {}", turn.domain).context("writing output")?;
            writeln!(out, "  belief:   {}", serialize_belief(&turn.belief)).context("writing output")?;
            writeln!(out, "  db match: {}", turn.db).context("writing output")?;
            writeln!(out, "  template: {}", turn.template.as_str()).context("writing output")?;
            writeln!(out, "  raw:      {}", turn.raw_response).context("writing output")?;
            if !turn.tolerance_events.is_empty() {
                writeln!(out, "  events:   {:?}", turn.tolerance_events).context("writing output")?;
            }
        }
    }
}

async fn serve(model: ModelArgs, host: String, port: u16, ttl: u64, seed: u64) -> CliResult {
    // Reject bad paths before binding; the model itself loads in the background.
    let db = Arc::new(load_db(model.db.as_deref())?);
    if !model.model.starts_with("scripted:") {
        require_file(Path::new(&model.model), "model")?;
    }
    let state = AppState::new(None, SessionStore::new(Duration::from_secs(ttl), seed));
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match load_backend(&model.model, &db) {
        Ok(backend) => {
            tracing::info!(backend = %backend.describe(), "backend loaded");
            loader.set_engine(Engine::new(backend, db, EngineConfig::default()));
        }
        Err(e) => tracing::error!("failed to load backend: {e}"),
    });
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.store().evict_expired();
        }
    });
    let listener = tokio::net::TcpListener::bind((host.as_str(), port))
        .await
        .with_context(|| format!("binding {host}:{port}"))?;
    tracing::info!("listening on {}", listener.local_addr().context("local address")?);
    axum::serve(listener, router(state)).await.context("server")?;
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Preprocess { corpus, output, db, dev_every } => {
            preprocess(&corpus, &output, db.as_deref(), dev_every, out)
        }
        Command::Pretrain { chunks, output, order } => pretrain(&chunks, &output, order, out),
        Command::Train { turns, output, init, pretrain_weight, dev, order, seed } => train(
            &turns,
            &output,
            init.as_deref(),
            pretrain_weight,
            dev.as_deref(),
            order,
            seed,
            out,
        ),
        Command::Eval { goals, model, seed, max_turns, keyword_nlu, json } => {
            let config = CampaignConfig {
                max_turns,
                seed,
                nlu: if keyword_nlu { NluMode::Keyword } else { NluMode::Structured },
            };
            eval(goals.as_deref(), &model, config, json, out)
        }
        Command::Chat { model, debug, seed } => {
            let engine = build_engine(&model)?;
            let stdin = std::io::stdin();
            chat(&engine, seed, debug, &mut stdin.lock(), out)
        }
        Command::Serve { model, port, host, session_ttl, seed } => {
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(serve(model, host, port, session_ttl, seed))
        }
        Command::GenGoals { output, count, seed, db } => {
            let db = load_db(db.as_deref())?;
            let goals = generate_goals(&db, count, seed);
            let json = serde_json::to_string_pretty(&goals).context("serializing goals")?;
            fs::write(&output, json + "\n").with_context(|| format!("writing {}", output.display()))?;
            writeln!(out, "wrote {} goals to {}", goals.len(), output.display()).context("writing output")?;
            Ok(())
        }
    }
}
