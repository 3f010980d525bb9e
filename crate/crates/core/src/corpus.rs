//! Corpus ingestion, token counting, marker conventions and corpus statistics.
//!
//! Input is pre-tokenized UTF-8 text: one sentence per line, tokens separated
//! by spaces. Empty lines are kept as empty sentences so that the two sides of
//! a parallel corpus stay line-aligned.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Suffix on a subword that is followed by more of the same word.
pub const CONTINUATION: &str = "@@";
/// Suffix on the last subword of a word (zero-suffix mark).
pub const END_MARK: char = '_';

pub type Sentence = Vec<String>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentenceStream {
    pub sentences: Vec<Sentence>,
    /// Bytes consumed from the source, including newlines.
    pub bytes_read: u64,
}

impl SentenceStream {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Self {
            sentences,
            bytes_read: 0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        read_tokenized(text.as_bytes(), None)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Canonical form: single spaces between tokens, `\n` after every line.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for s in &self.sentences {
            writeln!(out, "{}", s.join(" "))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tokens are valid UTF-8")
    }
}

/// Reads one-sentence-per-line text.
///
/// With a byte budget, reading stops after the first line whose end reaches
/// the budget; that line is included whole.
pub fn read_tokenized<R: BufRead>(mut source: R, byte_budget: Option<u64>) -> Result<SentenceStream> {
    let mut sentences = Vec::new();
    let mut offset: u64 = 0;
    let mut line = Vec::new();
    loop {
        if byte_budget.is_some_and(|b| offset >= b && !sentences.is_empty()) {
            break;
        }
        line.clear();
        let n = source.read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        let text = std::str::from_utf8(&line).map_err(|e| Error::Decode {
            offset: offset + e.valid_up_to() as u64,
        })?;
        sentences.push(text.split_whitespace().map(str::to_owned).collect());
        offset += n as u64;
    }
    Ok(SentenceStream {
        sentences,
        bytes_read: offset,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TypeCount {
    pub non_final: u64,
    pub final_: u64,
}

impl TypeCount {
    pub fn new(non_final: u64, final_: u64) -> Self {
        Self { non_final, final_ }
    }

    pub fn total(&self) -> u64 {
        self.non_final + self.final_
    }
}

impl std::ops::AddAssign for TypeCount {
    fn add_assign(&mut self, rhs: Self) {
        self.non_final += rhs.non_final;
        self.final_ += rhs.final_;
    }
}

/// Word-type frequencies, split by whether the occurrence ended a sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCounts {
    pub entries: BTreeMap<String, TypeCount>,
    pub bytes_read: u64,
}

impl TokenCounts {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, TypeCount)>,
        S: Into<String>,
    {
        let mut out = TokenCounts::default();
        for (word, c) in entries {
            if c.total() > 0 {
                *out.entries.entry(word.into()).or_default() += c;
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.entries.values().map(TypeCount::total).sum()
    }

    pub fn get(&self, word: &str) -> Option<TypeCount> {
        self.entries.get(word).copied()
    }

    /// Adds the other table's counts to this one (shared-vocabulary training).
    pub fn merge(&mut self, other: &TokenCounts) {
        for (w, c) in &other.entries {
            *self.entries.entry(w.clone()).or_default() += *c;
        }
        self.bytes_read += other.bytes_read;
    }

    /// Types ordered by descending total frequency, ties lexicographic.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.entries.iter().map(|(w, c)| (w.as_str(), c.total())).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }
}

pub fn count_tokens(stream: &SentenceStream) -> TokenCounts {
    count_tokens_with(stream, Exec::default())
}

pub fn count_tokens_with(stream: &SentenceStream, exec: Exec) -> TokenCounts {
    let merged = exec.fold_reduce(
        &stream.sentences,
        HashMap::<&str, TypeCount>::new,
        |mut acc, sentence| {
            let last = sentence.len().saturating_sub(1);
            for (i, tok) in sentence.iter().enumerate() {
                let c = acc.entry(tok.as_str()).or_default();
                if i == last {
                    c.final_ += 1;
                } else {
                    c.non_final += 1;
                }
            }
            acc
        },
        |mut a, b| {
            if a.len() < b.len() {
                return merge_into(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        },
    );
    TokenCounts {
        entries: merged.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        bytes_read: stream.bytes_read,
    }
}

fn merge_into<'a>(
    mut big: HashMap<&'a str, TypeCount>,
    small: HashMap<&'a str, TypeCount>,
) -> HashMap<&'a str, TypeCount> {
    for (k, v) in small {
        *big.entry(k).or_default() += v;
    }
    big
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkerConvention {
    /// `@@` on every subword except the last one of each word.
    Continuation,
    /// `_` on the last subword of each word.
    EndMarker,
}

impl std::str::FromStr for MarkerConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuation" => Ok(Self::Continuation),
            "end-marker" | "end_marker" => Ok(Self::EndMarker),
            other => Err(Error::Config(format!("unknown marker convention `{other}`"))),
        }
    }
}

/// Rejects tokens that would make marker removal ambiguous.
pub fn check_marker_clean(token: &str) -> Result<()> {
    if token.contains(CONTINUATION) || token.contains(END_MARK) {
        return Err(Error::Input(format!(
            "token `{token}` contains a reserved marker (`{CONTINUATION}` or `{END_MARK}`)"
        )));
    }
    Ok(())
}

pub fn check_stream_marker_clean(stream: &SentenceStream) -> Result<()> {
    stream
        .sentences
        .iter()
        .flatten()
        .try_for_each(|t| check_marker_clean(t))
}

/// Removes subword splits from a whole stream.
pub fn undo_splits(stream: &SentenceStream, convention: MarkerConvention) -> SentenceStream {
    SentenceStream {
        sentences: stream.sentences.iter().map(|s| undo_sentence(s, convention)).collect(),
        bytes_read: stream.bytes_read,
    }
}

/// Rejoins one sentence of marked subwords into words.
///
/// Continuation: runs `x1@@ x2@@ … xn` join to `x1…xn`, and a word-final `_`
/// left over from underscore-mode BPE is dropped. End marker: a subword
/// ending in `_` closes a word; a trailing `@@` (morph continuation from a
/// composed model) is removed; the sentence end closes any open word.
pub fn undo_sentence<S: AsRef<str>>(subwords: &[S], convention: MarkerConvention) -> Sentence {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut open = false;
    for piece in subwords {
        let piece = piece.as_ref();
        match convention {
            MarkerConvention::Continuation => {
                if let Some(body) = piece.strip_suffix(CONTINUATION) {
                    word.push_str(body);
                    open = true;
                } else {
                    word.push_str(piece.strip_suffix(END_MARK).unwrap_or(piece));
                    out.push(std::mem::take(&mut word));
                    open = false;
                }
            }
            MarkerConvention::EndMarker => {
                if let Some(body) = piece.strip_suffix(END_MARK) {
                    word.push_str(body);
                    out.push(std::mem::take(&mut word));
                    open = false;
                } else {
                    word.push_str(piece.strip_suffix(CONTINUATION).unwrap_or(piece));
                    open = true;
                }
            }
        }
    }
    if open && !word.is_empty() {
        out.push(word);
    }
    out
}

/// Attaches markers to the pieces of one word and appends them to `out`.
///
/// Pieces already carrying `_` (underscore-mode BPE) keep it; under the
/// end-marker convention a piece gets `_` only if it does not have one.
pub(crate) fn push_marked(out: &mut Vec<String>, pieces: Vec<String>, convention: MarkerConvention) {
    let n = pieces.len();
    for (i, mut p) in pieces.into_iter().enumerate() {
        let last = i + 1 == n;
        match convention {
            MarkerConvention::Continuation if !last => p.push_str(CONTINUATION),
            MarkerConvention::EndMarker if last && !p.ends_with(END_MARK) => p.push(END_MARK),
            _ => {}
        }
        out.push(p);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub tokens_src: u64,
    pub tokens_tgt: u64,
    pub types_src: usize,
    pub types_tgt: usize,
    pub shared_pct: f64,
}

impl CorpusStats {
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tokens_src\t{}", self.tokens_src);
        let _ = writeln!(s, "tokens_tgt\t{}", self.tokens_tgt);
        let _ = writeln!(s, "types_src\t{}", self.types_src);
        let _ = writeln!(s, "types_tgt\t{}", self.types_tgt);
        let _ = writeln!(s, "shared_pct\t{:.2}", self.shared_pct);
        s
    }
}

/// Token and type totals per side; shared types as a share of the union.
pub fn corpus_stats(src: &TokenCounts, tgt: &TokenCounts) -> CorpusStats {
    let a: BTreeSet<&str> = src.entries.keys().map(String::as_str).collect();
    let b: BTreeSet<&str> = tgt.entries.keys().map(String::as_str).collect();
    let union = a.union(&b).count();
    let inter = a.intersection(&b).count();
    CorpusStats {
        tokens_src: src.total_tokens(),
        tokens_tgt: tgt.total_tokens(),
        types_src: a.len(),
        types_tgt: b.len(),
        shared_pct: if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64 * 100.0
        },
    }
}
