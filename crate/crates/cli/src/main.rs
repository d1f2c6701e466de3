use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seqlab::corpus::{
    convert_json_corpus, heuristic_pos_tag, parse_any, split_corpus, write_conll2000, write_crf_conll, Sentence, TagSet,
};
use seqlab::crf::baseline::{self, train_baseline, BaselineConfig, BaselineCrf};
use seqlab::embeddings::{train_skipgram, EmbeddingTable, SkipGramConfig};
use seqlab::eval::{build_report, render_kv, render_table, ScoringMode};
use seqlab::gradcheck::{all_passed, render_groups, run_all};
use seqlab::numerics::OptimizerState;
use seqlab::tagger::{self, fit_tagger, ModelConfig, TaggerModel, TrainOptions};
use seqlab::training::{EpochRecord, SequenceTagger, TrainData};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const CHECK: u8 = 3;

/// Named entity tagging for vulnerability descriptions with a BiLSTM-CRF or
/// a feature-template CRF.
#[derive(Parser, Debug)]
#[command(name = "seqlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a JSON corpus to a token-per-line file.
    Convert(ConvertArgs),
    /// Split a corpus 70/10/20 into train.conll, dev.conll and test.conll.
    Split(SplitArgs),
    /// Train skip-gram embeddings and write them in text format.
    Embed(EmbedArgs),
    /// Train a tagger and write its checkpoint.
    Train(TrainArgs),
    /// Tag a file with a trained checkpoint.
    Tag(TagArgs),
    /// Score predicted tags against gold tags.
    Eval(EvalArgs),
    /// Run the finite-difference gradient suites.
    Gradcheck(GradcheckArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    /// `word tag`
    Conll2000,
    /// `tag word pos chunk`, with heuristic POS tags
    Crf4col,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Arch {
    LstmCrf,
    CrfBaseline,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Entity,
    Token,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Report {
    Table,
    Kv,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// JSON corpus: `{name: [{"tokens": [...], "labels": [...]}, ...]}`
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Conll2000)]
    format: Format,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Corpus in any token-per-line layout
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Created if absent
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// Used for model selection on macro F1
    #[arg(long, value_name = "PATH")]
    dev: PathBuf,
    /// Also logs test accuracy each epoch; never used for selection
    #[arg(long, value_name = "PATH")]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Arch::LstmCrf)]
    arch: Arch,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Embedding size (lstm-crf)
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// LSTM size per direction (lstm-crf)
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    /// Learning rate [default: 0.01 for lstm-crf, 0.05 for crf-baseline]
    #[arg(long)]
    lr: Option<f64>,
    /// Gradient norm clipping threshold (lstm-crf)
    #[arg(long, default_value_t = 5.0)]
    clip: f64,
    /// Embedding dropout rate (lstm-crf)
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// Probability of replacing a training singleton with <UNK> (lstm-crf)
    #[arg(long, default_value_t = 0.5)]
    unk_dropout: f64,
    /// L2 penalty (crf-baseline)
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Embeddings in text format
    #[arg(long, value_name = "PATH")]
    pretrained: Option<PathBuf>,
    /// Checkpoint path
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TagArgs {
    /// Checkpoint written by `train`
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// CoNLL-2000, 4-column, or one word per line
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// CoNLL-2000 with predicted tags
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    gold: PathBuf,
    #[arg(long, value_name = "PATH")]
    pred: PathBuf,
    /// Types for the restricted table, in display order
    #[arg(long, value_delimiter = ',', default_value = "vendor,application,version,edition,os,hardware,file")]
    types: Vec<String>,
    #[arg(long, value_enum, default_value_t = Mode::Entity)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Report::Table)]
    report: Report,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = Arch::LstmCrf)]
    arch: Arch,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// A failure carrying its exit code and a one-line message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: DATA,
            message: message.into(),
        }
    }
}

impl From<seqlab::Error> for Failure {
    fn from(e: seqlab::Error) -> Self {
        match e {
            seqlab::Error::Config(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

fn corpus(path: &Path) -> Result<Vec<Sentence>, Failure> {
    parse_any(&read(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn convert(args: ConvertArgs) -> CmdResult {
    let text = read(&args.input)?;
    let sentences = convert_json_corpus(&text).map_err(|e| Failure::data(format!("{}: {e}", args.input.display())))?;
    let out = match args.format {
        Format::Conll2000 => write_conll2000(&sentences),
        Format::Crf4col => {
            let tagged: Vec<Sentence> = sentences.iter().map(heuristic_pos_tag).collect();
            write_crf_conll(&tagged)
        }
    };
    write(&args.out, out)
}

fn split(args: SplitArgs) -> CmdResult {
    let sentences = corpus(&args.input)?;
    let parts = split_corpus(&sentences, args.seed)?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    for (name, part) in [("train", &parts.train), ("dev", &parts.dev), ("test", &parts.test)] {
        write(&args.out_dir.join(format!("{name}.conll")), write_conll2000(part))?;
    }
    Ok(())
}

fn embed(args: EmbedArgs) -> CmdResult {
    let sentences = corpus(&args.input)?;
    let config = SkipGramConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        epochs: args.epochs,
        seed: args.seed,
        learning_rate: args.lr,
        min_count: args.min_count,
    };
    let table = train_skipgram(&sentences, config)?;
    write(&args.out, table.save_text())
}

fn print_epoch(record: &EpochRecord) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", record.log_line());
    let _ = out.flush();
}

fn train(args: TrainArgs) -> CmdResult {
    let train = corpus(&args.train)?;
    let dev = corpus(&args.dev)?;
    let test = args.test.as_deref().map(corpus).transpose()?;
    let pretrained = match &args.pretrained {
        Some(path) => Some(
            EmbeddingTable::load_text(&read(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let data = TrainData {
        train: &train,
        dev: &dev,
        test: test.as_deref(),
    };
    let bytes = match args.arch {
        Arch::LstmCrf => {
            let config = ModelConfig {
                embedding_dim: args.dim,
                hidden: args.hidden,
                dropout: args.dropout,
                unk_dropout: args.unk_dropout,
                seed: args.seed,
            };
            let options = TrainOptions {
                epochs: args.epochs,
                optimizer: OptimizerState::new(args.lr.unwrap_or(0.01), args.clip)?,
                seed: args.seed,
            };
            fit_tagger(data, pretrained.as_ref(), &config, &options, print_epoch)?.0.save()
        }
        Arch::CrfBaseline => {
            let config = BaselineConfig {
                l2: args.l2,
                epochs: args.epochs,
                seed: args.seed,
                learning_rate: args.lr.unwrap_or(BaselineConfig::default().learning_rate),
            };
            train_baseline(data, pretrained.as_ref(), &config, print_epoch)?.0.save()
        }
    };
    write(&args.out, bytes)
}

fn load_tagger(bytes: &[u8]) -> Result<Box<dyn SequenceTagger>, Failure> {
    if bytes.starts_with(tagger::MAGIC) {
        Ok(Box::new(TaggerModel::load(bytes)?))
    } else if bytes.starts_with(baseline::MAGIC) {
        Ok(Box::new(BaselineCrf::load(bytes)?))
    } else {
        Err(Failure::data("not a seqlab checkpoint"))
    }
}

fn tag(args: TagArgs) -> CmdResult {
    let model = load_tagger(&read_bytes(&args.model)?)
        .map_err(|f| Failure::data(format!("{}: {}", args.model.display(), f.message)))?;
    let sentences = corpus(&args.input)?;
    write(&args.out, write_conll2000(&model.tag_corpus(&sentences)))
}

fn eval(args: EvalArgs) -> CmdResult {
    let gold = corpus(&args.gold)?;
    let pred = corpus(&args.pred)?;
    let mut labels: Vec<String> = gold
        .iter()
        .chain(&pred)
        .flat_map(|s| s.tags().into_iter().map(str::to_string))
        .collect();
    labels.sort();
    labels.dedup();
    let tagset = TagSet::from_labels(labels)?;
    let mode = match args.mode {
        Mode::Entity => ScoringMode::Entity,
        Mode::Token => ScoringMode::Token,
    };
    let types: Vec<&str> = args.types.iter().map(String::as_str).filter(|t| !t.is_empty()).collect();
    let selected = (!types.is_empty()).then_some(&types[..]);
    let report = build_report(&gold, &pred, &tagset, selected, mode)?;
    let text = match args.report {
        Report::Table => render_table(&report),
        Report::Kv => render_kv(&report),
    };
    print!("{text}");
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> CmdResult {
    let groups = run_all(args.arch == Arch::CrfBaseline, args.seed)?;
    print!("{}", render_groups(&groups));
    if all_passed(&groups) {
        Ok(())
    } else {
        let failed = groups.iter().filter(|g| !g.passed).count();
        Err(Failure {
            code: CHECK,
            message: format!("{failed} of {} gradient groups failed", groups.len()),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("seqlab: {first} (see --help)");
            return ExitCode::from(USAGE);
        }
    };
    let result = match cli.command {
        Command::Convert(a) => convert(a),
        Command::Split(a) => split(a),
        Command::Embed(a) => embed(a),
        Command::Train(a) => train(a),
        Command::Tag(a) => tag(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("seqlab: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
