use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ees_core::eval::{generate_fixture, AblationRow, Evaluator, Fixture, LabeledQuery, ACTION_LEXICON};
use ees_core::graph::{Graph, SnapshotError};
use ees_core::ingest::{build_graph_from_reader, errors_only, validate_record, EesRecord};
use ees_core::pipeline::{run_pipeline, AliasError, ConfigError, ContextResult, MatchConfig, PipelineError, Providers, TypeNormalizer};
use ees_core::similarity::{EmbeddingProvider, LexiconExtractor, ReferenceEmbedder};

#[derive(Parser)]
#[command(name = "ees", version, about = "Entity-event-scene knowledge graph: ingest, match and evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph snapshot from a line-delimited record corpus
    Ingest(IngestArgs),
    /// Rank candidate contexts for each query record
    Match(MatchArgs),
    /// Match / Hit@1 / Hit@2 over labeled queries
    Eval(EvalArgs),
    /// Evaluate the seven mode/similarity ablation rows
    Ablate(AblateArgs),
    /// Write a seeded synthetic corpus, labeled queries and lexicon
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Corpus file, one JSON record per line
    #[arg(long)]
    corpus: PathBuf,
    /// Snapshot file to write
    #[arg(long)]
    out: PathBuf,
    /// Extra `raw = Canonical` type aliases on top of the built-in table
    #[arg(long)]
    aliases: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderKind {
    /// Built-in trigram hashing embedder
    Reference,
    /// HTTP service named by EES_EMBED_URL
    Remote,
}

#[derive(Args)]
struct MatchingArgs {
    /// Graph snapshot produced by `ingest`
    #[arg(long)]
    graph: PathBuf,
    /// `key=value` match configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Action lexicon, one phrase per line; the built-in lexicon when omitted
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Extra `raw = Canonical` type aliases on top of the built-in table
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Embedding provider
    #[arg(long, value_enum, default_value = "reference")]
    embedder: EmbedderKind,
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    common: MatchingArgs,
    /// Query file: plain records or labeled queries, one per line
    #[arg(long)]
    query: PathBuf,
    /// Write the ranking here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: MatchingArgs,
    /// Labeled query file, one `{"gold_context_id", "record"}` object per line
    #[arg(long)]
    queries: PathBuf,
    /// Worker threads; 0 uses every core, 1 runs sequentially
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the summary table here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-query rows (query id, candidates, gold rank)
    #[arg(long)]
    rows: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: MatchingArgs,
    /// Labeled query file, one `{"gold_context_id", "record"}` object per line
    #[arg(long)]
    queries: PathBuf,
    /// Worker threads; 0 uses every core, 1 runs sequentially
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the table here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    /// Number of contexts (at least 2)
    #[arg(long, default_value_t = 50)]
    contexts: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Directory for corpus.jsonl, queries.jsonl and lexicon.txt
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug)]
enum CliError {
    /// Bad input data; exit 2.
    Data(String),
    /// Anything the input could not have caused; exit 3.
    Internal(String),
}

impl CliError {
    fn at(path: &Path, line: Option<usize>, message: impl std::fmt::Display) -> Self {
        match line {
            Some(line) => CliError::Data(format!("{}:{line}: {message}", path.display())),
            None => CliError::Data(format!("{}: {message}", path.display())),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::at(path, None, e))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Internal(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph> {
    Graph::load_snapshot(path).map_err(|e| match e {
        SnapshotError::Malformed { line, message } => CliError::at(path, Some(line), message),
        SnapshotError::UnknownLabel { line, label } => CliError::at(path, Some(line), format!("unknown label {label:?}")),
        SnapshotError::DanglingEdge { line, node } => {
            CliError::at(path, Some(line), format!("edge endpoint {node} does not exist"))
        }
        other => CliError::at(path, None, other),
    })
}

fn load_normalizer(path: Option<&Path>) -> Result<TypeNormalizer> {
    let Some(path) = path else {
        return Ok(TypeNormalizer::default());
    };
    TypeNormalizer::from_file(path).map_err(|e| match e {
        AliasError::Malformed { line, message } => CliError::at(path, Some(line), message),
        other => CliError::at(path, None, other),
    })
}

fn load_config(path: Option<&Path>) -> Result<MatchConfig> {
    let Some(path) = path else {
        return Ok(MatchConfig::default());
    };
    MatchConfig::parse(&read_text(path)?).map_err(|e| match e {
        ConfigError::Syntax { line, message } => CliError::at(path, Some(line), message),
        other => CliError::at(path, None, other),
    })
}

fn load_lexicon(path: Option<&Path>) -> Result<LexiconExtractor> {
    match path {
        Some(p) => Ok(LexiconExtractor::parse(&read_text(p)?)),
        None => Ok(LexiconExtractor::new(ACTION_LEXICON.iter().copied())),
    }
}

fn load_embedder(kind: EmbedderKind) -> Result<Box<dyn EmbeddingProvider>> {
    match kind {
        EmbedderKind::Reference => Ok(Box::new(ReferenceEmbedder)),
        EmbedderKind::Remote => remote_embedder(),
    }
}

#[cfg(feature = "remote")]
fn remote_embedder() -> Result<Box<dyn EmbeddingProvider>> {
    use ees_core::similarity::RemoteEmbedder;
    RemoteEmbedder::from_env()
        .map(|e| Box::new(e) as Box<dyn EmbeddingProvider>)
        .map_err(|e| CliError::Internal(format!("remote embedder: {e}")))
}

#[cfg(not(feature = "remote"))]
fn remote_embedder() -> Result<Box<dyn EmbeddingProvider>> {
    Err(CliError::Internal("built without remote embedder support".into()))
}

/// One query line: a labeled query or a bare record.
struct QueryLine {
    line: usize,
    gold: Option<String>,
    record: EesRecord,
}

fn read_query_lines(path: &Path, require_gold: bool) -> Result<Vec<QueryLine>> {
    let mut out = Vec::new();
    for (idx, raw) in read_text(path)?.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| CliError::at(path, Some(line), e))?;
        let labeled = value.get("gold_context_id").is_some();
        let (gold, record) = if labeled {
            let q: LabeledQuery = serde_json::from_value(value).map_err(|e| CliError::at(path, Some(line), e))?;
            (Some(q.gold_context_id), q.record)
        } else if require_gold {
            return Err(CliError::at(path, Some(line), "expected a labeled query with gold_context_id"));
        } else {
            let r: EesRecord = serde_json::from_value(value).map_err(|e| CliError::at(path, Some(line), e))?;
            (None, r)
        };
        let errors = errors_only(validate_record(&record));
        if !errors.is_empty() {
            let joined = errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(CliError::at(path, Some(line), joined));
        }
        out.push(QueryLine { line, gold, record });
    }
    if out.is_empty() {
        return Err(CliError::at(path, None, "no queries"));
    }
    Ok(out)
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Embed(e) => CliError::Internal(format!("embedding: {e}")),
        PipelineError::Config(e) => CliError::Data(format!("config: {e}")),
        other => CliError::Internal(other.to_string()),
    }
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let normalizer = load_normalizer(args.aliases.as_deref())?;
    let file = fs::File::open(&args.corpus).map_err(|e| CliError::at(&args.corpus, None, e))?;
    let (graph, report) =
        build_graph_from_reader(BufReader::new(file), &normalizer).map_err(|e| CliError::at(&args.corpus, None, e))?;
    for r in &report.rejections {
        let line = r.line.map_or(String::new(), |l| format!(":{l}"));
        let id = r.record_id.as_deref().map_or(String::new(), |id| format!(" [{id}]"));
        eprintln!("{}{line}{id}: skipped: {}", args.corpus.display(), r.reason);
    }
    if report.accepted == 0 {
        return Err(CliError::at(&args.corpus, None, "no record was accepted"));
    }
    graph
        .save_snapshot(&args.out)
        .map_err(|e| CliError::Internal(format!("{}: {e}", args.out.display())))?;
    let mut out = String::from("read\taccepted\trejected\tnodes\tedges\tcontexts\n");
    let _ = writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}",
        report.read, report.accepted, report.rejected, report.nodes, report.edges, report.contexts
    );
    for (rule, n) in &report.error_counts {
        let _ = writeln!(out, "rejected:{rule}\t{n}");
    }
    print!("{out}");
    Ok(())
}

struct Session {
    graph: Graph,
    normalizer: TypeNormalizer,
    config: MatchConfig,
    lexicon: LexiconExtractor,
    embedder: Box<dyn EmbeddingProvider>,
}

impl Session {
    fn open(args: &MatchingArgs) -> Result<Self> {
        Ok(Self {
            graph: load_graph(&args.graph)?,
            normalizer: load_normalizer(args.aliases.as_deref())?,
            config: load_config(args.config.as_deref())?,
            lexicon: load_lexicon(args.lexicon.as_deref())?,
            embedder: load_embedder(args.embedder)?,
        })
    }

    fn evaluator(&self, jobs: usize) -> Evaluator<'_> {
        Evaluator::new(&self.graph, &self.normalizer, Providers::new(self.embedder.as_ref(), &self.lexicon))
            .with_jobs(jobs)
    }
}

fn score(value: Option<f64>) -> String {
    value.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn render_match(q: &QueryLine, result: &ContextResult, out: &mut String) {
    let gold = q.gold.as_deref().map_or(String::new(), |g| format!(" gold={g}"));
    let _ = writeln!(out, "# query {} line={}{gold} candidates={}", q.record.record_id, q.line, result.ranked.len());
    for (name, entity_type) in &result.unmatched_entities {
        let _ = writeln!(out, "# unmatched entity {name:?} ({entity_type})");
    }
    if result.no_entity_match {
        let _ = writeln!(out, "# no query entity matched the graph");
    }
    out.push_str("rank\tcontext_id\tkey\ttotal\tentity\tevent\tscene\n");
    for (i, r) in result.ranked.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{}\t{}",
            i + 1,
            r.id,
            r.key,
            r.total,
            r.entity_overlap,
            score(r.event),
            score(r.scene)
        );
    }
    out.push('\n');
}

fn match_queries(args: &MatchArgs) -> Result<()> {
    let session = Session::open(&args.common)?;
    let queries = read_query_lines(&args.query, false)?;
    let providers = Providers::new(session.embedder.as_ref(), &session.lexicon);
    let mut out = String::new();
    for q in &queries {
        let result = run_pipeline(&q.record, &session.graph, &session.config, &session.normalizer, &providers)
            .map_err(pipeline_error)?;
        render_match(q, &result, &mut out);
    }
    write_output(args.out.as_deref(), &out)
}

fn labeled(path: &Path) -> Result<Vec<LabeledQuery>> {
    Ok(read_query_lines(path, true)?
        .into_iter()
        .map(|q| LabeledQuery {
            gold_context_id: q.gold.expect("required above"),
            record: q.record,
        })
        .collect())
}

fn warn_missing_golds(path: &Path, graph: &Graph, queries: &[LabeledQuery]) {
    for q in queries {
        if graph.context_by_key(&q.gold_context_id).is_none() {
            eprintln!(
                "{}: query {}: gold context {:?} is not in the graph",
                path.display(),
                q.query_id(),
                q.gold_context_id
            );
        }
    }
}

fn eval(args: &EvalArgs) -> Result<()> {
    let session = Session::open(&args.common)?;
    let queries = labeled(&args.queries)?;
    warn_missing_golds(&args.queries, &session.graph, &queries);
    let report = session
        .evaluator(args.jobs)
        .evaluate(&queries, &session.config)
        .map_err(pipeline_error)?;
    if let Some(rows) = &args.rows {
        write_output(Some(rows), &report.rows_tsv())?;
    }
    write_output(args.out.as_deref(), &report.summary_tsv())
}

fn ablate(args: &AblateArgs) -> Result<()> {
    let session = Session::open(&args.common)?;
    let queries = labeled(&args.queries)?;
    warn_missing_golds(&args.queries, &session.graph, &queries);
    let rows = session
        .evaluator(args.jobs)
        .run_ablation(&queries, &session.config)
        .map_err(pipeline_error)?;
    write_output(args.out.as_deref(), &AblationRow::to_tsv(&rows))
}

fn fixture(args: &FixtureArgs) -> Result<()> {
    let fixture = generate_fixture(args.contexts, args.seed).map_err(|e| CliError::Data(e.to_string()))?;
    let internal = |p: &Path, e: std::io::Error| CliError::Internal(format!("{}: {e}", p.display()));
    fs::create_dir_all(&args.out_dir).map_err(|e| internal(&args.out_dir, e))?;
    let files = [
        ("corpus.jsonl", fixture.corpus_jsonl()),
        ("queries.jsonl", fixture.queries_jsonl()),
        ("lexicon.txt", Fixture::lexicon_text()),
    ];
    for (name, text) in files {
        let path = args.out_dir.join(name);
        fs::write(&path, text).map_err(|e| internal(&path, e))?;
    }
    println!(
        "contexts\trecords\tverbatim\tperturbed\n{}\t{}\t{}\t{}",
        args.contexts,
        fixture.corpus.len(),
        fixture.verbatim.len(),
        fixture.perturbed.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Match(a) => match_queries(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Fixture(a) => fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Data(msg) | CliError::Internal(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
