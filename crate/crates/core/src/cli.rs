//! The `subseg` command line.
//!
//! Exit codes: 0 on success, 1 when input data is bad, 2 on usage errors.
//! Data goes to stdout (or `-o`), diagnostics to stderr.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bpe::{bpe_train_with, MergeTable, UnderscoreMode};
use crate::compose::{import_external_segmentation, ComposedModel, PostSplitter};
use crate::corpus::{self, count_tokens_with, read_tokenized, MarkerConvention, SentenceStream, TokenCounts};
use crate::derivnet::DerivGraph;
use crate::error::{Error, Result};
use crate::eval::{self, eval_segmentation_with, split_histogram, WordSplitter};
use crate::exec::Exec;
use crate::lexicon::SegmentationLexicon;
use crate::ste::{ste_build_vocab_with, ste_unescape, SteBuildConfig, SubwordVocab};

#[derive(Debug, Parser)]
#[command(
    name = "subseg",
    version,
    about = "Subword and morphological segmentation for MT preprocessing"
)]
struct Cli {
    /// Worker threads for data-parallel loops; never changes output bytes.
    #[arg(long, global = true, env = "SUBSEG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Underscore {
    None,
    Every,
    NonFinal,
}

impl From<Underscore> for UnderscoreMode {
    fn from(u: Underscore) -> Self {
        match u {
            Underscore::None => UnderscoreMode::None,
            Underscore::Every => UnderscoreMode::Every,
            Underscore::NonFinal => UnderscoreMode::NonFinal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Convention {
    Continuation,
    EndMarker,
}

impl From<Convention> for MarkerConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Continuation => MarkerConvention::Continuation,
            Convention::EndMarker => MarkerConvention::EndMarker,
        }
    }
}

#[derive(Debug, Args)]
struct Io {
    /// Input file (default: stdin).
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Token/type totals and shared-type percentage of two corpora.
    Stats {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
    },
    /// Learn BPE merges.
    TrainBpe {
        #[arg(long, allow_negative_numbers = true)]
        merges: i64,
        #[arg(long, value_enum, default_value = "none")]
        underscore: Underscore,
        /// Train on the union of both sides (shared vocabulary).
        #[arg(long)]
        src: Option<PathBuf>,
        #[arg(long)]
        tgt: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split a tokenized corpus with a BPE model.
    ApplyBpe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "continuation")]
        convention: Convention,
        #[command(flatten)]
        io: Io,
    },
    /// Build a wordpiece vocabulary of roughly the target size.
    TrainSte {
        #[arg(long, allow_negative_numbers = true)]
        target_size: i64,
        /// Bytes read per input file.
        #[arg(long)]
        byte_budget: Option<u64>,
        #[arg(long, default_value_t = 4, allow_negative_numbers = true)]
        iters: i64,
        #[arg(long, default_value_t = 20, allow_negative_numbers = true)]
        max_len: i64,
        /// Size tolerance in percent.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tol: f64,
        /// Repeat for a shared vocabulary over several corpora.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split a tokenized corpus with a wordpiece vocabulary.
    ApplySte {
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        io: Io,
    },
    /// Segment a derivational network into a lexicon.
    BuildDerinet {
        #[arg(long)]
        derivations: PathBuf,
        #[arg(long)]
        inflections: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split tokens with a segmentation lexicon.
    ApplyLexicon {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, value_enum)]
        convention: Convention,
        #[command(flatten)]
        io: Io,
    },
    /// Verify and normalize an external `word<TAB>morphs` segmentation.
    ImportSegmentation {
        #[arg(long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a manifest chaining a lexicon with a BPE or wordpiece model.
    Compose {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split a tokenized corpus with a composed model.
    ApplyComposed {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        io: Io,
    },
    /// Remove subword markers and restore words.
    UndoSplits {
        #[arg(long, value_enum)]
        convention: Convention,
        /// Also reverse wordpiece escaping.
        #[arg(long)]
        unescape: bool,
        #[command(flatten)]
        io: Io,
    },
    /// Score a predicted lexicon against a gold one.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Vocabulary overlap between two encoded corpora.
    Overlap {
        /// Wordpiece vocabulary or one subword per line.
        #[arg(long)]
        vocab: PathBuf,
        /// Encoded source corpus.
        #[arg(long)]
        src_used: PathBuf,
        /// Encoded target corpus.
        #[arg(long)]
        tgt_used: PathBuf,
    },
    /// Mean subwords per type by frequency-rank bucket.
    Histogram {
        /// BPE model, wordpiece vocabulary, composed manifest or lexicon.
        #[arg(long)]
        model: PathBuf,
        /// Tokenized corpus to rank.
        #[arg(long)]
        counts: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Parses arguments, runs one subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let exec = match configure_threads(cli.threads) {
        Ok(exec) => exec,
        Err(msg) => {
            eprintln!("subseg: {msg}");
            return 2;
        }
    };
    match dispatch(cli.command, exec) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("subseg: usage error: {msg}");
            2
        }
        Err(Failure::Data(e)) => {
            eprintln!("subseg: {e}");
            1
        }
    }
}

fn configure_threads(threads: Option<usize>) -> std::result::Result<Exec, String> {
    let Some(n) = threads else {
        return Ok(Exec::default());
    };
    if n == 0 {
        return Err("--threads must be at least 1".into());
    }
    #[cfg(feature = "parallel")]
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(Exec::with_threads(n))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(open(p)?),
        None => Box::new(BufReader::new(io::stdin())),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let mut out = output(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn read_corpus(path: &Path, budget: Option<u64>) -> Result<SentenceStream> {
    read_tokenized(open(path)?, budget)
}

fn counts_of(path: &Path, budget: Option<u64>, exec: Exec) -> Result<TokenCounts> {
    Ok(count_tokens_with(&read_corpus(path, budget)?, exec))
}

fn read_lexicon(path: &Path) -> Result<SegmentationLexicon> {
    SegmentationLexicon::read_from(open(path)?)
}

/// Runs `f` over every input line and writes one output line per input line.
fn filter_lines<F>(io_args: &Io, exec: Exec, f: F) -> Result<()>
where
    F: Fn(&[String]) -> Result<Vec<String>> + Sync + Send,
{
    let stream = read_tokenized(input(io_args.input.as_deref())?, None)?;
    let lines = exec.map(&stream.sentences, |s| f(s).map(|v| v.join(" ")));
    let mut out = output(io_args.output.as_deref())?;
    for line in lines {
        writeln!(out, "{}", line?)?;
    }
    out.flush()?;
    Ok(())
}

fn dispatch(command: Command, exec: Exec) -> CliResult {
    match command {
        Command::Stats { src, tgt } => {
            let stats = corpus::corpus_stats(&counts_of(&src, None, exec)?, &counts_of(&tgt, None, exec)?);
            emit(None, &stats.to_tsv())?;
        }

        Command::TrainBpe {
            merges,
            underscore,
            src,
            tgt,
            input,
            output,
        } => {
            if merges < 0 {
                return usage("--merges must be a non-negative integer");
            }
            let counts = match (input, src, tgt) {
                (Some(i), None, None) => counts_of(&i, None, exec)?,
                (None, Some(s), Some(t)) => {
                    let mut c = counts_of(&s, None, exec)?;
                    c.merge(&counts_of(&t, None, exec)?);
                    c
                }
                _ => return usage("train-bpe needs either --input, or both --src and --tgt"),
            };
            let table = bpe_train_with(&counts, merges as usize, underscore.into(), exec)?;
            emit(output.as_deref(), &table.to_model_string())?;
        }

        Command::ApplyBpe { model, convention, io } => {
            let table = MergeTable::read_from(open(&model)?)?;
            let convention: MarkerConvention = convention.into();
            if convention == MarkerConvention::EndMarker && table.mode() == UnderscoreMode::None {
                return Err(
                    Error::Config("end-marker convention needs a model trained with underscores".into()).into(),
                );
            }
            filter_lines(&io, exec, |s| table.encode_sentence(s, convention))?;
        }

        Command::TrainSte {
            target_size,
            byte_budget,
            iters,
            max_len,
            tol,
            input,
            output,
        } => {
            if target_size <= 0 {
                return usage("--target-size must be positive");
            }
            if iters <= 0 || max_len <= 0 {
                return usage("--iters and --max-len must be positive");
            }
            if tol.is_nan() || tol < 0.0 {
                return usage("--tol must be a non-negative percentage");
            }
            let cfg = SteBuildConfig {
                target_size: target_size as usize,
                size_tolerance_pct: tol,
                num_refinement_iterations: iters as usize,
                max_subtoken_length: max_len as usize,
            };
            let mut counts = TokenCounts::default();
            for path in &input {
                counts.merge(&counts_of(path, byte_budget, exec)?);
            }
            let vocab = ste_build_vocab_with(&counts, &cfg, exec)?;
            emit(output.as_deref(), &vocab.to_vocab_string())?;
        }

        Command::ApplySte { vocab, io } => {
            let vocab = SubwordVocab::read_from(open(&vocab)?)?;
            filter_lines(&io, exec, |s| Ok(vocab.encode_sentence(s)))?;
        }

        Command::BuildDerinet {
            derivations,
            inflections,
            output,
        } => {
            let infl = inflections.as_deref().map(open).transpose()?;
            let mut graph = DerivGraph::load(open(&derivations)?, infl)?;
            graph.stem_edges_with(exec);
            graph.propagate_boundaries();
            emit(output.as_deref(), &graph.export_lexicon().to_tsv())?;
        }

        Command::ApplyLexicon {
            lexicon,
            convention,
            io,
        } => {
            let lex = read_lexicon(&lexicon)?;
            let convention = convention.into();
            filter_lines(&io, exec, |s| lex.apply(s, convention))?;
        }

        Command::ImportSegmentation { input, output } => {
            let lex = import_external_segmentation(open(&input)?)?;
            emit(output.as_deref(), &lex.to_tsv())?;
        }

        Command::Compose { lexicon, post, output } => {
            read_lexicon(&lexicon)?;
            let model = PostSplitter::load(&post)?;
            let lexicon = lexicon.canonicalize()?;
            let post = post.canonicalize()?;
            let mut buf = Vec::new();
            ComposedModel::write_manifest(&mut buf, &lexicon, model.kind(), &post)?;
            emit(
                output.as_deref(),
                std::str::from_utf8(&buf).expect("paths are displayed as UTF-8"),
            )?;
        }

        Command::ApplyComposed { manifest, io } => {
            let model = ComposedModel::load_manifest(&manifest)?;
            filter_lines(&io, exec, |s| model.encode(s))?;
        }

        Command::UndoSplits {
            convention,
            unescape,
            io,
        } => {
            let convention = convention.into();
            filter_lines(&io, exec, |s| {
                let words = corpus::undo_sentence(s, convention);
                Ok(if unescape {
                    words.iter().map(|w| ste_unescape(w)).collect()
                } else {
                    words
                })
            })?;
        }

        Command::Eval { gold, pred } => {
            let gold = read_lexicon(&gold)?;
            let pred = SegmentationLexicon::read_stripping_markers(open(&pred)?)?;
            emit(None, &eval_segmentation_with(&gold, &pred, exec)?.to_tsv())?;
        }

        Command::Overlap {
            vocab,
            src_used,
            tgt_used,
        } => {
            let vocab = read_vocab_list(&vocab)?;
            let src = used_in(&src_used)?;
            let tgt = used_in(&tgt_used)?;
            let text = format!(
                "shared_vocab_pct\t{:.2}\nused_overlap_pct\t{:.2}\n",
                eval::vocab_overlap(&vocab, &src, &tgt),
                eval::separate_overlap(&src, &tgt)
            );
            emit(None, &text)?;
        }

        Command::Histogram { model, counts } => {
            let splitter = load_splitter(&model)?;
            let counts = counts_of(&counts, None, exec)?;
            emit(None, &eval::histogram_tsv(&split_histogram(&counts, splitter.as_ref())))?;
        }
    }
    Ok(())
}

fn read_vocab_list(path: &Path) -> Result<HashSet<String>> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    if text.starts_with("#subseg-ste") {
        let v = SubwordVocab::read_from(text.as_bytes())?;
        return Ok(v.subtokens().iter().cloned().collect());
    }
    Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect())
}

fn used_in(path: &Path) -> Result<HashSet<String>> {
    let stream = read_corpus(path, None)?;
    Ok(eval::used_subwords(
        stream.sentences.iter().flatten().map(String::as_str),
    ))
}

fn load_splitter(path: &Path) -> Result<Box<dyn WordSplitter>> {
    let mut head = String::new();
    open(path)?.read_line(&mut head)?;
    let head = head.trim_end();
    Ok(if head.starts_with("#subseg-bpe") {
        Box::new(MergeTable::read_from(open(path)?)?)
    } else if head.starts_with("#subseg-ste") {
        Box::new(SubwordVocab::read_from(open(path)?)?)
    } else if head.starts_with("#subseg-compose") {
        Box::new(ComposedModel::load_manifest(path)?)
    } else {
        Box::new(read_lexicon(path)?)
    })
}
