//! `ppattach` command-line front end.
//!
//! Exit codes: 0 ok, 2 I/O or configuration, 3 protocol, 4 dataset,
//! 5 scorer training.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use flate2::read::GzDecoder;

use crate::config::{Config, ConfigError, Overrides};
use crate::demo;
use crate::eval::{self, DatasetError, DatasetLayout, EvalError};
use crate::kb::{KbBuilder, KbStore, LanguageFilter, SkipReason};
use crate::morph::Inflector;
use crate::protocol::{self, DecisionReply};
use crate::resolver::{
    AmbiguityRequest, AttachmentDecision, BackendMode, Backends, Resolver, StartSide,
};
use crate::scorer::{
    EmbeddingStore, FallbackScorer, PrototypeScorer, RelationModels, WStarFallback,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_DATASET: i32 = 4;
pub const EXIT_TRAINING: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "ppattach",
    version,
    about = "Commonsense PP-attachment decisions"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// kb-only, fallback-only or hybrid.
    #[arg(long, global = true)]
    mode: Option<BackendMode>,
    /// ConceptNet assertion dump (.csv or .csv.gz) or JSON-lines fixture.
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Additional JSON-lines assertion fixture.
    #[arg(long, global = true)]
    kb_fixture: Option<PathBuf>,
    /// Word vectors in `term v1 ... vd` text format.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Relation model file written by `train-scorer`.
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    /// Noun exception table (`singular<TAB>plural`).
    #[arg(long, global = true)]
    exceptions: Option<PathBuf>,
    #[arg(long, global = true)]
    k_neighbors: Option<usize>,
    #[arg(long, global = true)]
    trim: Option<usize>,
    #[arg(long, global = true)]
    min_support: Option<usize>,
    /// Print the per-candidate score table to stderr.
    #[arg(long, global = true)]
    explain: bool,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load an assertion dump and write it as a JSON-lines fixture.
    Ingest {
        dump: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Decide one consultation message read from a file or stdin.
    Resolve {
        /// Request file; stdin when omitted or `-`.
        request: Option<PathBuf>,
    },
    /// Evaluate on a PP-attachment dataset directory.
    Eval {
        dir: PathBuf,
        #[arg(long, default_value = "with")]
        prep: String,
        #[arg(long, default_value_t = 3)]
        max_heads: usize,
        /// Common filename prefix, e.g. `wsj.23.txt.dep.pp.`; detected when omitted.
        #[arg(long)]
        prefix: Option<String>,
        /// Evaluate every mode the configured backends allow.
        #[arg(long)]
        all_modes: bool,
        /// Also write the report as JSON lines to this file.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Run the three guitar sentences end to end.
    Demo {
        /// Resolve with no knowledge at all (parser defaults).
        #[arg(long)]
        no_knowledge: bool,
    },
    /// Fit relation prototype models from embeddings and the knowledge base.
    TrainScorer {
        #[arg(short, long)]
        out: PathBuf,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_IO, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Run with explicit streams; returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_IO;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match dispatch(cli, stdin, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let g = cli.global;
    let overrides = Overrides {
        kb: g.kb.clone(),
        kb_fixture: g.kb_fixture.clone(),
        embeddings: g.embeddings.clone(),
        models: g.models.clone(),
        mode: g.mode,
        k_neighbors: g.k_neighbors,
        trim: g.trim,
        min_support: g.min_support,
        exceptions: g.exceptions.clone(),
    };
    let config = Config::load(g.config.as_deref(), overrides)?;
    let io = |e: io::Error| Failure::new(EXIT_IO, e.to_string());

    match cli.command {
        Command::Ingest { dump, out: path } => cmd_ingest(&dump, &path, out, err),
        Command::Resolve { request } => {
            let mut text = String::new();
            match request.as_deref() {
                None => stdin.read_to_string(&mut text).map_err(io)?,
                Some(p) if p == Path::new("-") => stdin.read_to_string(&mut text).map_err(io)?,
                Some(p) => {
                    text = std::fs::read_to_string(p)
                        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", p.display())))?;
                    0
                }
            };
            cmd_resolve(&config, &text, g.explain, g.json, out, err)
        }
        Command::Eval {
            dir,
            prep,
            max_heads,
            prefix,
            all_modes,
            json_out,
        } => {
            let layout = match prefix {
                Some(p) => DatasetLayout::with_prefix(p),
                None => DatasetLayout::default(),
            };
            let opts = EvalOptions {
                dir: &dir,
                layout: &layout,
                prep: &prep,
                max_heads,
                all_modes,
                json: g.json,
                json_out: json_out.as_deref(),
            };
            cmd_eval(&config, &opts, out, err)
        }
        Command::Demo { no_knowledge } => {
            let mode = if no_knowledge {
                BackendMode::KbOnly
            } else {
                g.mode.unwrap_or(BackendMode::Hybrid)
            };
            cmd_demo(&config, mode, no_knowledge, g.explain, out, err)
        }
        Command::TrainScorer { out: path } => cmd_train_scorer(&config, &path, out, err),
    }
}

fn open_text(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::new(GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn load_kb(config: &Config, err: &mut dyn Write) -> Result<KbStore, Failure> {
    let paths: Vec<&PathBuf> = config
        .kb_dump_path
        .iter()
        .chain(config.fixture_path.iter())
        .collect();
    let mut builder = KbBuilder::with_source(
        paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    for p in paths {
        let reader = open_text(p).map_err(|e| io_failure(p, e))?;
        let report = builder
            .ingest(reader, &LanguageFilter::default())
            .map_err(|e| io_failure(p, e))?;
        if report.malformed() > 0 {
            let _ = writeln!(err, "{}: {report}", p.display());
        }
    }
    Ok(builder.finish())
}

fn load_inflector(config: &Config) -> Result<Inflector, Failure> {
    let inflector = Inflector::default();
    match &config.exception_table_path {
        None => Ok(inflector),
        Some(p) => {
            let reader = open_text(p).map_err(|e| io_failure(p, e))?;
            inflector.with_table(reader).map_err(|e| io_failure(p, e))
        }
    }
}

fn load_embeddings(path: &Path) -> Result<EmbeddingStore, Failure> {
    let reader = open_text(path).map_err(|e| io_failure(path, e))?;
    EmbeddingStore::load(reader).map_err(|e| io_failure(path, e))
}

fn load_fallback(
    config: &Config,
    kb: Option<&KbStore>,
    err: &mut dyn Write,
) -> Result<WStarFallback<PrototypeScorer>, Failure> {
    let emb_path = config
        .embeddings_path
        .as_deref()
        .ok_or_else(|| Failure::new(EXIT_IO, "no --embeddings configured"))?;
    let store = load_embeddings(emb_path)?;
    let models = match (&config.relation_models_path, kb) {
        (Some(p), _) => {
            let file = File::open(p).map_err(|e| io_failure(p, e))?;
            RelationModels::read_json(BufReader::new(file)).map_err(|e| io_failure(p, e))?
        }
        (None, Some(kb)) => {
            let _ = writeln!(
                err,
                "note: no --models given; training relation models in memory"
            );
            RelationModels::train(&store, kb, config.min_support)
                .map_err(|e| Failure::new(EXIT_TRAINING, e.to_string()))?
        }
        (None, None) => return Err(Failure::new(EXIT_IO, "no --models configured")),
    };
    let scorer =
        PrototypeScorer::new(store, models).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    let agg = config.aggregation()?;
    WStarFallback::new(scorer, agg).map_err(|e| Failure::new(EXIT_IO, e.to_string()))
}

fn cmd_ingest(dump: &Path, path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let reader = open_text(dump).map_err(|e| io_failure(dump, e))?;
    let mut builder = KbBuilder::with_source(dump.display().to_string());
    let report = builder
        .ingest(reader, &LanguageFilter::default())
        .map_err(|e| io_failure(dump, e))?;
    let store = builder.finish();
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    store
        .write_fixture(io::BufWriter::new(file))
        .map_err(|e| io_failure(path, e))?;
    let _ = writeln!(out, "{report}");
    if !report.skipped.is_empty() {
        let _ = writeln!(
            err,
            "{} malformed, {} outside the language filter",
            report.malformed(),
            report.filtered()
        );
        for s in report
            .skipped
            .iter()
            .filter(|s| s.reason != SkipReason::LanguageFiltered)
        {
            let _ = writeln!(err, "  line {}: {:?}", s.line, s.reason);
        }
    }
    Ok(())
}

fn explain_table(decision: &AttachmentDecision, request: &AmbiguityRequest) -> String {
    let mut s = format!(
        "{:<4} {:<5} {:<16} {:<16} {:>10}  {:<9} {}\n",
        "idx", "kind", "pair", "relation", "weight", "source", "start"
    );
    for (score, cand) in decision.scores.iter().zip(&request.candidates) {
        let pair = format!("({}, {})", request.pp_noun, cand.head());
        let start = match score.start {
            Some(StartSide::PpNoun) => request.pp_noun.to_string(),
            Some(StartSide::Candidate) => cand.head().to_string(),
            None => "-".into(),
        };
        s.push_str(&format!(
            "{:<4} {:<5} {:<16} {:<16} {:>10}  {:<9} {}\n",
            score.candidate_index,
            cand.kind().tag(),
            pair,
            score.relation.as_deref().unwrap_or("---"),
            score.weight.map_or("---".to_string(), |w| format!("{w}")),
            score.source.as_str(),
            start
        ));
    }
    s
}

fn cmd_resolve(
    config: &Config,
    text: &str,
    explain: bool,
    json: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let request =
        protocol::parse_request(text).map_err(|e| Failure::new(EXIT_PROTOCOL, e.to_string()))?;
    config.validate_for(config.mode)?;
    let resolver = Resolver::new(load_inflector(config)?);
    let kb = if config.has_kb() {
        Some(load_kb(config, err)?)
    } else {
        None
    };
    let fallback = match config.mode {
        BackendMode::KbOnly => None,
        _ => Some(load_fallback(config, kb.as_ref(), err)?),
    };
    let backends = Backends {
        kb: kb.as_ref(),
        fallback: fallback.as_ref().map(|f| f as &dyn FallbackScorer),
    };
    let decision = resolver
        .decide(&request, backends, config.mode)
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    if explain {
        let _ = write!(err, "{}", explain_table(&decision, &request));
    }
    if json {
        let v = serde_json::json!({
            "reply": DecisionReply::from_decision(&decision),
            "decision": decision,
        });
        let _ = writeln!(out, "{v}");
    } else {
        let _ = writeln!(out, "{}", protocol::serialize_decision(&decision));
    }
    Ok(())
}

struct EvalOptions<'a> {
    dir: &'a Path,
    layout: &'a DatasetLayout,
    prep: &'a str,
    max_heads: usize,
    all_modes: bool,
    json: bool,
    json_out: Option<&'a Path>,
}

fn dataset_failure(e: DatasetError) -> Failure {
    Failure::new(EXIT_DATASET, e.to_string())
}

fn cmd_eval(
    config: &Config,
    opts: &EvalOptions<'_>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let records = eval::load_dataset(opts.dir, opts.layout).map_err(dataset_failure)?;
    let records = eval::filter_records(&records, opts.prep, opts.max_heads);
    if records.is_empty() {
        return Err(Failure::new(EXIT_DATASET, "no records"));
    }
    let modes: Vec<BackendMode> = if opts.all_modes {
        [
            BackendMode::KbOnly,
            BackendMode::FallbackOnly,
            BackendMode::Hybrid,
        ]
        .into_iter()
        .filter(|m| config.validate_for(*m).is_ok())
        .collect()
    } else {
        config.validate_for(config.mode)?;
        vec![config.mode]
    };
    if modes.is_empty() {
        return Err(Failure::new(
            EXIT_IO,
            "no backend configured; pass --kb and/or --embeddings",
        ));
    }

    let two = records.iter().filter(|r| r.n_heads == 2).count();
    let three = records.iter().filter(|r| r.n_heads == 3).count();
    let _ = writeln!(
        err,
        "{} records after filtering (prep={}, max_heads={}): {} with 2 heads, {} with 3 heads",
        records.len(),
        opts.prep,
        opts.max_heads,
        two,
        three
    );

    let resolver = Resolver::new(load_inflector(config)?);
    let needs_kb = modes.iter().any(|m| *m != BackendMode::FallbackOnly);
    let needs_fb = modes.iter().any(|m| *m != BackendMode::KbOnly);
    let kb = if needs_kb || (needs_fb && config.relation_models_path.is_none()) {
        Some(load_kb(config, err)?)
    } else {
        None
    };
    let fallback = if needs_fb {
        Some(load_fallback(config, kb.as_ref(), err)?)
    } else {
        None
    };
    let backends = Backends {
        kb: kb.as_ref(),
        fallback: fallback.as_ref().map(|f| f as &dyn FallbackScorer),
    };

    let mut json_lines = String::new();
    for (i, mode) in modes.iter().enumerate() {
        let report = eval::run_eval(&records, &resolver, backends, *mode).map_err(|e| match e {
            EvalError::Dataset(d) => dataset_failure(d),
            EvalError::Resolve(r) => Failure::new(EXIT_IO, r.to_string()),
        })?;
        json_lines.push_str(&report.to_json_lines());
        if opts.json {
            let _ = write!(out, "{}", report.to_json_lines());
        } else {
            if i > 0 {
                let _ = writeln!(out);
            }
            let _ = writeln!(out, "{report}");
        }
    }
    if let Some(p) = opts.json_out {
        std::fs::write(p, json_lines).map_err(|e| io_failure(p, e))?;
    }
    Ok(())
}

fn cmd_demo(
    config: &Config,
    mode: BackendMode,
    no_knowledge: bool,
    explain: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let resolver = Resolver::new(load_inflector(config)?);
    let kb = if no_knowledge {
        KbStore::default()
    } else if config.has_kb() {
        load_kb(config, err)?
    } else {
        demo::demo_kb()
    };
    let table = demo::demo_fallback();
    let trained;
    let fallback: Option<&dyn FallbackScorer> = if no_knowledge || mode == BackendMode::KbOnly {
        None
    } else if config.embeddings_path.is_some() {
        trained = load_fallback(config, Some(&kb), err)?;
        Some(&trained)
    } else {
        Some(&table)
    };
    let backends = Backends {
        kb: Some(&kb),
        fallback,
    };
    for (i, sentence) in demo::sentences().iter().enumerate() {
        let outcome = demo::run_sentence(sentence, &resolver, backends, mode)
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        if i > 0 {
            let _ = writeln!(out);
        }
        let _ = write!(out, "{}", outcome.report());
        if explain {
            for (req, dec) in outcome.requests.iter().zip(&outcome.decisions) {
                let _ = write!(err, "{}", explain_table(dec, req));
            }
        }
    }
    Ok(())
}

fn cmd_train_scorer(
    config: &Config,
    path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if !config.has_kb() {
        return Err(Failure::new(
            EXIT_IO,
            "train-scorer needs --kb or --kb-fixture",
        ));
    }
    let emb = config
        .embeddings_path
        .as_deref()
        .ok_or_else(|| Failure::new(EXIT_IO, "train-scorer needs --embeddings"))?;
    let kb = load_kb(config, err)?;
    let store = load_embeddings(emb)?;
    let models = RelationModels::train(&store, &kb, config.min_support)
        .map_err(|e| Failure::new(EXIT_TRAINING, e.to_string()))?;
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    models
        .write_json(io::BufWriter::new(file))
        .map_err(|e| io_failure(path, e))?;
    let _ = writeln!(
        out,
        "{} relations trained (min_support={})",
        models.models().len(),
        config.min_support
    );
    for m in models.models() {
        let _ = writeln!(
            out,
            "  {:<20} support {:>6}  mean weight {:.4}",
            m.relation, m.support, m.mean_weight
        );
    }
    Ok(())
}
