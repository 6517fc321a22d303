//! Command-line entry point. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 1 for bad
//! input (arguments, missing files, malformed data), 2 for internal
//! failures.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter, Log, Metadata, Record};
use serde::{Deserialize, Serialize};

use crate::embedstore::load_embeddings;
use crate::evalkit::{
    self, build_nomlex_evalset, convert_paraphrase_dataset, export_argument_vectors, nominal_argument_vectors,
    per_relation_report, read_gold, read_predictions, tune_test_split, write_gold, GoldInstance, ParaphraseRow,
};
use crate::identify::{coordinated_heads, find_noun_instances, identify_candidates, Candidate, IdentifyConfig};
use crate::label::{EnrichmentRecord, LabelerConfig, Method};
use crate::lexicon::load_lexicon;
use crate::pipeline::{Pipeline, PipelineError};
use crate::refbank::{build_refbank, load_refbank, save_refbank, DEFAULT_SENTENCE_CAP};
use crate::treebank::{parse_conllu, write_conllu, ParseOptions, RelationRenames, Sentence};

#[derive(Debug, Parser)]
#[command(name = "nomarg", version, about = "Label arguments of deverbal nouns with verbal relations")]
struct Cli {
    /// Log to stderr as line-delimited JSON.
    #[arg(long, global = true, env = "NOMARG_LOG_JSON")]
    log_json: bool,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label noun arguments and write enriched CoNLL-U.
    Enrich(EnrichArgs),
    /// Build a reference bank of verbal argument vectors.
    BuildRefbank(BuildRefbankArgs),
    /// Score predictions against gold instances.
    Evaluate(EvaluateArgs),
    /// Build gold evaluation sets.
    #[command(subcommand)]
    BuildEvalset(BuildEvalset),
    /// Convert external annotations into gold instances.
    #[command(subcommand)]
    ConvertEvalset(ConvertEvalset),
    /// List candidate arguments of lexicon nouns.
    Identify(IdentifyArgs),
    /// Dump reference (and optionally nominal) argument vectors as JSONL.
    ExportVectors(ExportVectorsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Knn,
    Avg,
}

#[derive(Debug, Args)]
struct ParseArgs {
    /// Rename UDv2 relations (obj, obl, nsubj:pass, ...) to UDv1 on input.
    #[arg(long, env = "NOMARG_UDV2")]
    udv2: bool,
}

impl ParseArgs {
    fn options(&self) -> ParseOptions {
        ParseOptions { renames: self.udv2.then(RelationRenames::udv2_to_udv1) }
    }
}

#[derive(Debug, Args)]
struct EnrichArgs {
    #[arg(long, env = "NOMARG_CONLLU")]
    conllu: PathBuf,
    #[arg(long, env = "NOMARG_LEXICON")]
    lexicon: PathBuf,
    #[arg(long, env = "NOMARG_BANK")]
    bank: PathBuf,
    /// Contextual vectors for the input sentences (NAVF or JSONL).
    #[arg(long, env = "NOMARG_EMBEDDINGS")]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "knn", env = "NOMARG_METHOD")]
    method: MethodArg,
    #[arg(long, default_value_t = crate::label::DEFAULT_K, env = "NOMARG_K")]
    k: usize,
    #[arg(long, default_value_t = crate::label::THRESHOLD_NOMLEX, env = "NOMARG_THRESHOLD")]
    threshold: f64,
    /// Allow one label on several candidates of the same noun.
    #[arg(long, env = "NOMARG_NO_UNIQUE")]
    no_unique: bool,
    /// Do not consider amod dependents as candidates.
    #[arg(long, env = "NOMARG_NO_AMOD")]
    no_amod: bool,
    #[command(flatten)]
    parse: ParseArgs,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0, env = "NOMARG_JOBS")]
    jobs: usize,
    /// Enriched CoNLL-U output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enrichment JSONL output.
    #[arg(long)]
    enrichments_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildRefbankArgs {
    /// Parsed reference corpus containing verbal sentences.
    #[arg(long, env = "NOMARG_CONLLU")]
    conllu: PathBuf,
    #[arg(long, env = "NOMARG_EMBEDDINGS")]
    embeddings: PathBuf,
    /// Take the verb list from a lexicon.
    #[arg(long, env = "NOMARG_LEXICON", required_unless_present = "verbs")]
    lexicon: Option<PathBuf>,
    /// Comma-separated verb lemmas.
    #[arg(long, value_delimiter = ',')]
    verbs: Vec<String>,
    /// Sentences per verb.
    #[arg(long, default_value_t = DEFAULT_SENTENCE_CAP)]
    cap: usize,
    #[command(flatten)]
    parse: ParseArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Enrichment JSONL (or gold-format JSONL).
    #[arg(long)]
    pred: PathBuf,
    /// Output of `identify`, enabling the ∅ row.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Also write a tune split here; `--out` then receives the test split.
    #[arg(long)]
    tune_out: Option<PathBuf>,
    #[arg(long, default_value_t = evalkit::TUNE_RATIO)]
    tune_ratio: f64,
    #[arg(long, default_value_t = 0, env = "NOMARG_SEED")]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum BuildEvalset {
    /// Instances whose lexicon patterns agree on exactly two arguments.
    Nomlex {
        #[arg(long, env = "NOMARG_CONLLU")]
        conllu: PathBuf,
        #[arg(long, env = "NOMARG_LEXICON")]
        lexicon: PathBuf,
        /// Instances per verb.
        #[arg(long, default_value_t = evalkit::NOMLEX_PER_VERB_CAP)]
        cap: usize,
        #[command(flatten)]
        parse: ParseArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum ConvertEvalset {
    /// Nominal/verbal paraphrase rows (JSONL) aligned to parsed sentences.
    Paraphrase {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long, env = "NOMARG_CONLLU")]
        conllu: PathBuf,
        #[command(flatten)]
        parse: ParseArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Dropped rows with reasons (JSONL).
        #[arg(long)]
        dropped_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long, env = "NOMARG_CONLLU")]
    conllu: PathBuf,
    #[arg(long, env = "NOMARG_LEXICON")]
    lexicon: PathBuf,
    #[arg(long, env = "NOMARG_NO_AMOD")]
    no_amod: bool,
    #[command(flatten)]
    parse: ParseArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportVectorsArgs {
    #[arg(long, env = "NOMARG_BANK")]
    bank: PathBuf,
    /// Enrichment JSONL whose labeled arguments are exported too.
    #[arg(long, requires = "embeddings")]
    enrichments: Option<PathBuf>,
    /// Vectors for the sentences in `--enrichments`.
    #[arg(long, env = "NOMARG_EMBEDDINGS")]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    fn input(e: impl ToString) -> Self {
        CliError::Input(e.to_string())
    }

    fn internal(e: impl ToString) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Pool(_) => CliError::internal(e),
            PipelineError::Sentence { .. } => CliError::input(e),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Run the command line `argv` (program name first) and return the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logger(cli.log_json, cli.verbose);
    match execute(cli.command) {
        Ok(()) => 0,
        Err(CliError::Input(msg)) => {
            log::error!("{msg}");
            1
        }
        Err(CliError::Internal(msg)) => {
            log::error!("internal error: {msg}");
            2
        }
    }
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Enrich(args) => enrich(args),
        Command::BuildRefbank(args) => build_bank(args),
        Command::Evaluate(args) => evaluate(args),
        Command::BuildEvalset(BuildEvalset::Nomlex { conllu, lexicon, cap, parse, split, out }) => {
            require(&[&conllu, &lexicon])?;
            let corpus = read_corpus(&conllu, &parse)?;
            let lexicon = load_lexicon(&lexicon).map_err(CliError::input)?;
            let gold = build_nomlex_evalset(&corpus, &lexicon, cap);
            info!("built {} instances from {} sentences", gold.len(), corpus.len());
            write_split(&gold, &split, &out)
        }
        Command::ConvertEvalset(ConvertEvalset::Paraphrase { rows, conllu, parse, split, dropped_out, out }) => {
            require(&[&rows, &conllu])?;
            let corpus = read_corpus(&conllu, &parse)?;
            let rows: Vec<ParaphraseRow> = read_jsonl(&rows)?;
            let conversion = convert_paraphrase_dataset(&rows, &corpus);
            info!("converted {} rows, dropped {}", conversion.instances.len(), conversion.dropped.len());
            if let Some(path) = dropped_out {
                let dropped: Vec<DroppedLine> = conversion
                    .dropped
                    .iter()
                    .map(|d| DroppedLine { row: d.row, sent_id: &d.sent_id, reason: &d.reason })
                    .collect();
                write_jsonl(&path, &dropped)?;
            }
            write_split(&conversion.instances, &split, &out)
        }
        Command::Identify(args) => identify(args),
        Command::ExportVectors(args) => export_vectors(args),
    }
}

#[derive(Serialize)]
struct DroppedLine<'a> {
    row: usize,
    sent_id: &'a str,
    reason: &'a str,
}

/// One line of `identify` output.
#[derive(Serialize, Deserialize)]
struct CandidateLine {
    sent_id: String,
    noun: usize,
    verb: String,
    candidates: Vec<CandidateOut>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    coordinated: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CandidateOut {
    head: usize,
    relation: String,
    span: (usize, usize),
}

impl From<&Candidate> for CandidateOut {
    fn from(c: &Candidate) -> Self {
        CandidateOut { head: c.head, relation: c.relation.clone(), span: c.span }
    }
}

fn require(paths: &[&Path]) -> CliResult<()> {
    match paths.iter().find(|p| !p.exists()) {
        Some(missing) => Err(CliError::Input(format!("{} does not exist", missing.display()))),
        None => Ok(()),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_corpus(path: &Path, parse: &ParseArgs) -> CliResult<Vec<Sentence>> {
    let corpus =
        parse_conllu(open(path)?, &parse.options()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    info!("read {} sentences from {}", corpus.len(), path.display());
    Ok(corpus)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(CliError::input)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn write_lines<T: Serialize>(w: &mut dyn Write, rows: &[T]) -> io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut *w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    write_lines(&mut create(path)?, rows).map_err(CliError::internal)
}

fn write_split(instances: &[GoldInstance], split: &SplitArgs, out: &Path) -> CliResult<()> {
    let write = |path: &Path, rows: &[GoldInstance]| write_gold(create(path)?, rows).map_err(CliError::internal);
    match &split.tune_out {
        None => write(out, instances),
        Some(tune_path) => {
            let (tune, test) =
                tune_test_split(instances, split.tune_ratio, split.seed, None).map_err(CliError::input)?;
            info!("split {} tune / {} test", tune.len(), test.len());
            write(tune_path, &tune)?;
            write(out, &test)
        }
    }
}

fn identify_config(no_amod: bool) -> IdentifyConfig {
    if no_amod {
        IdentifyConfig::without_amod()
    } else {
        IdentifyConfig::default()
    }
}

fn enrich(args: EnrichArgs) -> CliResult<()> {
    require(&[&args.conllu, &args.lexicon, &args.bank, &args.embeddings])?;
    let labeler = LabelerConfig {
        method: match args.method {
            MethodArg::Knn => Method::KNearest,
            MethodArg::Avg => Method::NearestAvg,
        },
        k: args.k,
        threshold: args.threshold,
        unique: !args.no_unique,
    };
    labeler.validate().map_err(CliError::input)?;
    let corpus = read_corpus(&args.conllu, &args.parse)?;
    let lexicon = load_lexicon(&args.lexicon).map_err(CliError::input)?;
    let bank = load_refbank(&args.bank).map_err(CliError::input)?;
    let store = load_embeddings(&args.embeddings).map_err(CliError::input)?;
    let pipeline =
        Pipeline { lexicon: &lexicon, bank: &bank, store: &store, identify: identify_config(args.no_amod), labeler };
    let enriched = pipeline.enrich_corpus(&corpus, args.jobs)?;
    let sentences: Vec<Sentence> = enriched.iter().map(|e| e.sentence.clone()).collect();
    let records: Vec<&EnrichmentRecord> = enriched.iter().flat_map(|e| &e.records).collect();
    info!("labeled {} pairs on {} noun instances", records.iter().map(|r| r.pairs.len()).sum::<usize>(), records.len());
    let mut out = output(args.out.as_deref())?;
    write_conllu(&mut out, &sentences).map_err(CliError::internal)?;
    if let Some(path) = &args.enrichments_out {
        write_jsonl(path, &records)?;
    }
    Ok(())
}

fn build_bank(args: BuildRefbankArgs) -> CliResult<()> {
    require(&[&args.conllu, &args.embeddings])?;
    let mut verbs: BTreeSet<String> = args.verbs.iter().map(|v| v.trim().to_lowercase()).collect();
    if let Some(path) = &args.lexicon {
        require(&[path])?;
        verbs.extend(load_lexicon(path).map_err(CliError::input)?.verbs());
    }
    verbs.remove("");
    if args.cap == 0 {
        return Err(CliError::Input("--cap must be positive".to_owned()));
    }
    let corpus = read_corpus(&args.conllu, &args.parse)?;
    let store = load_embeddings(&args.embeddings).map_err(CliError::input)?;
    let bank = build_refbank(&corpus, &verbs, &store, args.cap).map_err(CliError::input)?;
    for verb in &verbs {
        if bank.arguments(verb).is_empty() {
            log::warn!("no reference arguments for verb {verb}");
        }
    }
    info!("bank holds {} arguments for {} verbs", bank.len(), verbs.len());
    save_refbank(&bank, &args.out).map_err(CliError::internal)
}

fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    require(&[&args.gold, &args.pred])?;
    let gold = read_gold(open(&args.gold)?).map_err(CliError::input)?;
    let pred = read_predictions(open(&args.pred)?).map_err(CliError::input)?;
    let mut report = evalkit::score(&gold, &pred).map_err(CliError::input)?;
    if let Some(path) = &args.candidates {
        require(&[path])?;
        let identified: HashMap<(String, usize), Vec<usize>> = read_jsonl::<CandidateLine>(path)?
            .into_iter()
            .map(|line| ((line.sent_id, line.noun), line.candidates.iter().map(|c| c.head).collect()))
            .collect();
        report.per_relation = per_relation_report(&gold, &pred, &identified).map_err(CliError::input)?;
    }
    let mut out = output(args.out.as_deref())?;
    let text = if args.json {
        serde_json::to_string_pretty(&report).map_err(CliError::internal)? + "\n"
    } else {
        report.to_table()
    };
    out.write_all(text.as_bytes()).and_then(|()| out.flush()).map_err(CliError::internal)
}

fn identify(args: IdentifyArgs) -> CliResult<()> {
    require(&[&args.conllu, &args.lexicon])?;
    let corpus = read_corpus(&args.conllu, &args.parse)?;
    let lexicon = load_lexicon(&args.lexicon).map_err(CliError::input)?;
    let config = identify_config(args.no_amod);
    let mut lines = Vec::new();
    for sentence in &corpus {
        for instance in find_noun_instances(sentence, &lexicon) {
            let candidates = identify_candidates(&instance, &config);
            lines.push(CandidateLine {
                sent_id: sentence.sent_id.clone(),
                noun: instance.noun,
                verb: instance.verb_lemma.to_owned(),
                coordinated: coordinated_heads(sentence, &candidates),
                candidates: candidates.iter().map(CandidateOut::from).collect(),
            });
        }
    }
    write_lines(&mut *output(args.out.as_deref())?, &lines).map_err(CliError::internal)
}

fn export_vectors(args: ExportVectorsArgs) -> CliResult<()> {
    require(&[&args.bank])?;
    let bank = load_refbank(&args.bank).map_err(CliError::input)?;
    let nominal = match (&args.enrichments, &args.embeddings) {
        (Some(records), Some(embeddings)) => {
            require(&[records, embeddings])?;
            let records: Vec<EnrichmentRecord> = read_jsonl(records)?;
            let store = load_embeddings(embeddings).map_err(CliError::input)?;
            nominal_argument_vectors(&records, &store).map_err(CliError::input)?
        }
        _ => Vec::new(),
    };
    let count = export_argument_vectors(&bank, &nominal, output(args.out.as_deref())?).map_err(CliError::internal)?;
    info!("exported {count} vectors");
    Ok(())
}

struct StderrLogger {
    json: bool,
}

impl Log for StderrLogger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= log::max_level()
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let line = if self.json {
            let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
            serde_json::json!({
                "ts": ts,
                "level": record.level().as_str(),
                "target": record.target(),
                "msg": record.args().to_string(),
            })
            .to_string()
        } else {
            format!("[{}] {}", record.level().as_str().to_lowercase(), record.args())
        };
        let _ = writeln!(io::stderr().lock(), "{line}");
    }

    fn flush(&self) {}
}

fn init_logger(json: bool, verbose: u8) {
    static LOGGER: OnceLock<StderrLogger> = OnceLock::new();
    // A second `run` in the same process keeps the first logger.
    let _ = log::set_logger(LOGGER.get_or_init(|| StderrLogger { json }));
    log::set_max_level(match verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    });
}
