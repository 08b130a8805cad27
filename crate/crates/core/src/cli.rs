//! Command-line entry points: build-dialogues, gen-pretrain, evaluate, chat, serve.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::chat::{
    generate_turn, retrieval_index, understand_turn, Backend, ChatError, ChatSession, SessionLog,
};
use crate::config::{Config, ConfigError};
use crate::dialogue::{
    build_dataset, read_pairs, to_jsonl, CandidateProvider, DialogueError, EchoProvider,
    ReplayProvider,
};
use crate::metrics::{evaluate_generation, evaluate_understanding, read_records, EvalError, Task};
use crate::service::{serve, AppState};
use crate::tasks::{generate_pretrain, TaskError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "convmol",
    version,
    about = "Conversational molecular design workbench"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build multi-turn dialogues from molecule-description pairs.
    BuildDialogues {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the build statistics here.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// retrieval, echo or replay:<path>.
        #[arg(long, default_value = "retrieval")]
        provider: String,
        /// Pair corpus for the retrieval provider; defaults to the input.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Generate shuffled multi-task pre-training records.
    GenPretrain {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        text: Option<PathBuf>,
        #[arg(long)]
        smiles: Option<PathBuf>,
        #[arg(long)]
        properties: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Score predictions against references.
    Evaluate {
        #[arg(long, value_parser = parse_task)]
        task: Task,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Interactive session: plain lines are descriptions, "mol: <SMILES>" asks
    /// for a description, "pick <n>" refines from candidate n, "quit" ends.
    Chat {
        #[arg(long, default_value = "session.jsonl")]
        log: PathBuf,
        #[arg(long, default_value = "s1")]
        session: String,
        /// Fixed creation timestamp for reproducible logs.
        #[arg(long)]
        created_at: Option<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "generation" => Ok(Task::Generation),
        "understanding" => Ok(Task::Understanding),
        _ => Err(format!(
            "unknown task {s:?}; expected generation or understanding"
        )),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{e}");
            return e.exit_code();
        }
    };
    match execute(cli, input, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn execute(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let io = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    match cli.command {
        Command::BuildDialogues {
            input: path,
            output,
            stats,
            provider,
            corpus,
        } => {
            let pairs = read_pairs(&path)?;
            let provider: Box<dyn CandidateProvider> = match provider.as_str() {
                "retrieval" => {
                    let corpus = match corpus {
                        Some(c) => read_pairs(&c)?,
                        None => pairs.clone(),
                    };
                    Box::new(retrieval_index(&corpus, cfg.fingerprint)?)
                }
                "echo" => Box::new(EchoProvider::new(&pairs)),
                other => match other.strip_prefix("replay:") {
                    Some(p) => Box::new(ReplayProvider::load(Path::new(p))?),
                    None => return Err(CliError::Usage(format!("unknown provider {other:?}"))),
                },
            };
            let (dialogues, build_stats) = build_dataset(
                &pairs,
                provider.as_ref(),
                &cfg.builder,
                &cfg.fingerprint,
                cfg.seed,
            );
            write_file(&output, &to_jsonl(&dialogues))?;
            let summary = pretty(&build_stats);
            if let Some(p) = stats {
                write_file(&p, &summary)?;
            }
            out.write_all(summary.as_bytes()).map_err(io)?;
        }
        Command::GenPretrain {
            output,
            text,
            smiles,
            properties,
            lexicon,
            pairs,
        } => {
            let mut sources = cfg.pretrain.clone();
            let given = text.is_some()
                || smiles.is_some()
                || properties.is_some()
                || lexicon.is_some()
                || pairs.is_some();
            if given {
                sources.text = text;
                sources.smiles = smiles;
                sources.properties = properties;
                sources.lexicon = lexicon;
                sources.pairs = pairs;
            }
            let records = generate_pretrain(&sources, &cfg.tasks, cfg.seed)?;
            write_file(&output, &to_jsonl(&records))?;
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for r in &records {
                *counts.entry(r.prefix.clone()).or_default() += 1;
            }
            out.write_all(pretty(&counts).as_bytes()).map_err(io)?;
        }
        Command::Evaluate {
            task,
            predictions,
            references,
            report,
        } => {
            let preds = read_records(&predictions)?;
            let refs = read_records(&references)?;
            let r = match task {
                Task::Generation => evaluate_generation(&preds, &refs, &cfg.fingerprint)?,
                Task::Understanding => evaluate_understanding(&preds, &refs)?,
            };
            let text = pretty(&r);
            match report {
                Some(p) => write_file(&p, &text)?,
                None => out.write_all(text.as_bytes()).map_err(io)?,
            }
        }
        Command::Chat {
            log,
            session,
            created_at,
            k,
        } => {
            let backend = cfg.build_backend()?;
            let k = k.unwrap_or(cfg.k);
            chat_loop(
                backend.as_ref(),
                &cfg,
                k,
                &log,
                session,
                created_at,
                input,
                out,
            )?;
        }
        Command::Serve { bind } => {
            let backend: Arc<dyn Backend> = Arc::from(cfg.build_backend()?);
            let bind = bind.unwrap_or_else(|| cfg.service.bind.clone());
            if let Some(dir) = &cfg.service.log_dir {
                std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                    path: dir.clone(),
                    source,
                })?;
            }
            let state = AppState::new(
                vec![backend],
                cfg.fingerprint,
                cfg.k,
                cfg.service.log_dir.clone(),
            );
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<runtime>"),
                    source,
                })?;
            let bind_err = |source| CliError::Io {
                path: PathBuf::from(&bind),
                source,
            };
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .map_err(bind_err)?;
                eprintln!("listening on {}", listener.local_addr().map_err(bind_err)?);
                serve(listener, state, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
                .map_err(bind_err)
            })?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn chat_loop(
    backend: &dyn Backend,
    cfg: &Config,
    k: usize,
    log_path: &Path,
    session_id: String,
    created_at: Option<String>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut session = match created_at {
        Some(t) => ChatSession::new(session_id, backend.id(), t),
        None => ChatSession::start(session_id, backend.id()),
    };
    let mut log = SessionLog::create(log_path, &session)?;
    let io = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    let mut pick: Option<usize> = None;
    for line in input.lines() {
        let line = line.map_err(|source| CliError::Io {
            path: PathBuf::from("<stdin>"),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "quit" || line == "exit" {
            break;
        }
        if let Some(n) = line.strip_prefix("pick ") {
            match n.trim().parse::<usize>() {
                Ok(n) if n >= 1 => {
                    pick = Some(n - 1);
                    writeln!(out, "next turn refines from candidate {n}").map_err(io)?;
                }
                _ => writeln!(out, "error: pick expects a candidate number from 1").map_err(io)?,
            }
            continue;
        }
        let result = match line.strip_prefix("mol:") {
            Some(smiles) => {
                understand_turn(&mut session, backend, smiles).map(|d| writeln!(out, "{d}"))
            }
            None => {
                generate_turn(&mut session, backend, line, k, pick, &cfg.fingerprint).map(|set| {
                    pick = None;
                    set.candidates.iter().enumerate().try_for_each(|(i, c)| {
                        let validity = if c.valid { "valid" } else { "invalid" };
                        match c.sim_to_prev {
                            Some(s) => {
                                writeln!(out, "{}. {}  {validity}  sim {s:.3}", i + 1, c.smiles)
                            }
                            None => writeln!(out, "{}. {}  {validity}", i + 1, c.smiles),
                        }
                    })
                })
            }
        };
        match result {
            Ok(w) => w.map_err(io)?,
            Err(e) => writeln!(out, "error: {e}").map_err(io)?,
        }
        log.sync(&session)?;
    }
    log.sync(&session)?;
    Ok(())
}
