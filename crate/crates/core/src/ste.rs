//! Wordpiece encoder with an escaped alphabet and a `_` end-of-word mark.
//!
//! Every token is escaped (`\` → `\\`, `_` → `\u`, characters outside the
//! alphabet → `\<codepoint>;`) and suffixed with `_`, then split greedily by
//! longest vocabulary prefix. Because every alphabet character is itself a
//! subtoken, any string is encodable.
//!
//! The vocabulary is grown by repeated refinement rounds: segment each word
//! with the current vocabulary and count every substring starting at a
//! segment boundary. A minimum-count threshold keeps the frequent ones; the
//! threshold is found by binary search so the vocabulary lands near a target
//! size.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::corpus::{TokenCounts, CONTINUATION, END_MARK};
use crate::error::{Error, Result};
use crate::exec::Exec;

const HEADER: &str = "#subseg-ste v1";
/// Characters escape sequences are built from; always part of the alphabet.
const ESCAPE_CHARS: &str = "\\_u;0123456789";

#[derive(Debug, Clone, PartialEq)]
pub struct SteBuildConfig {
    pub target_size: usize,
    pub size_tolerance_pct: f64,
    pub num_refinement_iterations: usize,
    pub max_subtoken_length: usize,
}

impl SteBuildConfig {
    pub fn new(target_size: usize) -> Self {
        Self {
            target_size,
            ..Self::default()
        }
    }
}

impl Default for SteBuildConfig {
    fn default() -> Self {
        Self {
            target_size: 8192,
            size_tolerance_pct: 1.0,
            num_refinement_iterations: 4,
            max_subtoken_length: 20,
        }
    }
}

/// Escaped subtokens in priority order, plus the character alphabet.
#[derive(Debug, Clone)]
pub struct SubwordVocab {
    subtokens: Vec<String>,
    lookup: HashSet<String>,
    alphabet: BTreeSet<char>,
    max_len: usize,
}

impl PartialEq for SubwordVocab {
    fn eq(&self, other: &Self) -> bool {
        self.subtokens == other.subtokens
    }
}

impl SubwordVocab {
    /// Builds a vocabulary; single-character subtokens make up the alphabet.
    pub fn from_subtokens(subtokens: Vec<String>) -> Result<Self> {
        let mut lookup = HashSet::with_capacity(subtokens.len());
        let mut alphabet = BTreeSet::new();
        let mut max_len = 1;
        for s in &subtokens {
            if s.is_empty() {
                return Err(Error::Input("empty subtoken".into()));
            }
            if !lookup.insert(s.clone()) {
                return Err(Error::Input(format!("duplicate subtoken `{s}`")));
            }
            let mut chars = s.chars();
            let first = chars.next().expect("nonempty");
            if chars.next().is_none() {
                alphabet.insert(first);
            }
            max_len = max_len.max(s.chars().count());
        }
        for c in ESCAPE_CHARS.chars() {
            if !alphabet.contains(&c) {
                return Err(Error::Input(format!("vocabulary lacks escape character `{c}`")));
            }
        }
        Ok(Self {
            subtokens,
            lookup,
            alphabet,
            max_len,
        })
    }

    /// The character-only vocabulary over an alphabet (escape characters added).
    pub fn from_alphabet<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let alphabet: BTreeSet<char> = chars.into_iter().chain(ESCAPE_CHARS.chars()).collect();
        let subtokens = alphabet.iter().map(|c| c.to_string()).collect();
        Self::from_subtokens(subtokens).expect("alphabet vocabulary is valid")
    }

    pub fn subtokens(&self) -> &[String] {
        &self.subtokens
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.subtokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtokens.is_empty()
    }

    pub fn contains(&self, subtoken: &str) -> bool {
        self.lookup.contains(subtoken)
    }

    /// Escapes a token and appends the end-of-word `_`.
    pub fn escape(&self, token: &str) -> String {
        let mut s = self.escape_body(token);
        s.push(END_MARK);
        s
    }

    /// Escapes without the trailing `_`.
    pub fn escape_body(&self, token: &str) -> String {
        escape_with(token, &self.alphabet)
    }

    /// Greedy longest-prefix segmentation of an already escaped string.
    pub fn segment_escaped(&self, escaped: &str) -> Vec<String> {
        let chars: Vec<char> = escaped.chars().collect();
        let mut out = Vec::new();
        let mut start = 0;
        let mut buf = String::new();
        while start < chars.len() {
            let longest = self.max_len.min(chars.len() - start);
            let mut taken = None;
            for end in (start + 1..=start + longest).rev() {
                buf.clear();
                buf.extend(&chars[start..end]);
                if self.lookup.contains(buf.as_str()) {
                    taken = Some(end);
                    break;
                }
            }
            // unreachable for escaped input: every escaped char is in the alphabet
            let end = taken.unwrap_or(start + 1);
            out.push(chars[start..end].iter().collect());
            start = end;
        }
        out
    }

    pub fn encode_token(&self, token: &str) -> Vec<String> {
        self.segment_escaped(&self.escape(token))
    }

    pub fn encode_sentence<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        tokens.iter().flat_map(|t| self.encode_token(t.as_ref())).collect()
    }

    /// Inverse of [`encode_sentence`](Self::encode_sentence).
    pub fn decode<S: AsRef<str>>(&self, subtokens: &[S]) -> Vec<String> {
        ste_decode(subtokens)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{HEADER}")?;
        for s in &self.subtokens {
            writeln!(out, "{s}")?;
        }
        Ok(())
    }

    pub fn to_vocab_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("subtokens are UTF-8")
    }

    pub fn read_from<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        match lines.next().transpose()? {
            Some(h) if h == HEADER => {}
            Some(h) if h.starts_with("#subseg-ste ") => {
                return Err(Error::format(1, format!("unsupported vocabulary version `{h}`")))
            }
            _ => return Err(Error::format(1, "not a wordpiece vocabulary file")),
        }
        let subtokens = lines.collect::<std::io::Result<Vec<String>>>()?;
        Self::from_subtokens(subtokens)
    }
}

fn escape_with(token: &str, alphabet: &BTreeSet<char>) -> String {
    let mut s = String::with_capacity(token.len() + 1);
    for c in token.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '_' => s.push_str("\\u"),
            c if alphabet.contains(&c) && c != '\n' => s.push(c),
            c => {
                s.push('\\');
                s.push_str(&(c as u32).to_string());
                s.push(';');
            }
        }
    }
    s
}

/// Escapes against the alphabet of `vocab`.
pub fn ste_escape(token: &str, vocab: &SubwordVocab) -> String {
    vocab.escape(token)
}

/// Reverses escaping; malformed escapes are kept literally.
pub fn ste_unescape(escaped: &str) -> String {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.peek() {
            Some('\\') => {
                chars.next();
                out.push('\\');
            }
            Some('u') => {
                chars.next();
                out.push('_');
            }
            Some(d) if d.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let decoded = (chars.peek() == Some(&';'))
                    .then(|| digits.parse::<u32>().ok().and_then(char::from_u32))
                    .flatten();
                match decoded {
                    Some(ch) => {
                        chars.next();
                        out.push(ch);
                    }
                    None => {
                        out.push('\\');
                        out.push_str(&digits);
                    }
                }
            }
            _ => out.push('\\'),
        }
    }
    out
}

pub fn ste_encode_token(token: &str, vocab: &SubwordVocab) -> Vec<String> {
    vocab.encode_token(token)
}

/// Concatenates, cuts after every `_`, unescapes each piece.
///
/// A trailing piece with no `_` still becomes a token.
pub fn ste_decode<S: AsRef<str>>(subtokens: &[S]) -> Vec<String> {
    let joined: String = subtokens.iter().map(AsRef::as_ref).collect();
    let mut out = Vec::new();
    let mut rest = joined.as_str();
    while let Some(i) = rest.find(END_MARK) {
        if i > 0 {
            out.push(ste_unescape(&rest[..i]));
        }
        rest = &rest[i + END_MARK.len_utf8()..];
    }
    if !rest.is_empty() {
        out.push(ste_unescape(rest));
    }
    out
}

/// A weighted, already escaped training string.
pub type EscapedItem = (String, u64);

/// Training strings for a vocabulary with the given alphabet.
///
/// Tokens ending in `@@` are morph units: their body is escaped without the
/// `_` end mark, so subtokens never span the continuation marker.
pub fn escaped_training_items(counts: &TokenCounts, alphabet: &BTreeSet<char>) -> Vec<EscapedItem> {
    counts
        .entries
        .iter()
        .map(|(w, c)| {
            let item = match w.strip_suffix(CONTINUATION).filter(|b| !b.is_empty()) {
                Some(body) => escape_with(body, alphabet),
                None => {
                    let mut s = escape_with(w, alphabet);
                    s.push(END_MARK);
                    s
                }
            };
            (item, c.total())
        })
        .collect()
}

/// Every character of the training words, plus the escape characters.
pub fn training_alphabet(counts: &TokenCounts) -> BTreeSet<char> {
    counts
        .entries
        .keys()
        .flat_map(|w| {
            w.strip_suffix(CONTINUATION)
                .filter(|b| !b.is_empty())
                .unwrap_or(w)
                .chars()
        })
        .chain(ESCAPE_CHARS.chars())
        .collect()
}

pub fn ste_refine_vocab(
    counts: &TokenCounts,
    current: &SubwordVocab,
    min_count: u64,
    cfg: &SteBuildConfig,
) -> SubwordVocab {
    let items = escaped_training_items(counts, current.alphabet());
    refine_escaped(&items, current, min_count, cfg.max_subtoken_length, Exec::default())
}

/// Substring weights over segment start positions.
pub fn substring_weights(
    items: &[EscapedItem],
    current: &SubwordVocab,
    max_len: usize,
    exec: Exec,
) -> HashMap<String, u64> {
    exec.fold_reduce(
        items,
        HashMap::<String, u64>::new,
        |mut acc, (escaped, weight)| {
            let chars: Vec<char> = escaped.chars().collect();
            let mut start = 0;
            for piece in current.segment_escaped(escaped) {
                let end_max = chars.len().min(start + max_len);
                let mut sub = String::new();
                for &c in &chars[start..end_max] {
                    sub.push(c);
                    match acc.get_mut(sub.as_str()) {
                        Some(w) => *w += weight,
                        None => {
                            acc.insert(sub.clone(), *weight);
                        }
                    }
                }
                start += piece.chars().count();
            }
            acc
        },
        |mut a, b| {
            if a.len() < b.len() {
                let mut b = b;
                for (k, v) in a {
                    *b.entry(k).or_default() += v;
                }
                return b;
            }
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        },
    )
}

/// One refinement round over escaped training strings.
pub fn refine_escaped(
    items: &[EscapedItem],
    current: &SubwordVocab,
    min_count: u64,
    max_len: usize,
    exec: Exec,
) -> SubwordVocab {
    let weights = substring_weights(items, current, max_len.max(1), exec);
    let mut kept: HashMap<String, u64> = weights.into_iter().filter(|&(_, w)| w >= min_count).collect();
    for c in current.alphabet() {
        kept.entry(c.to_string()).or_insert(0);
    }
    let mut ordered: Vec<(String, u64, usize)> = kept
        .into_iter()
        .map(|(s, w)| {
            let n = s.chars().count();
            (s, w, n)
        })
        .collect();
    ordered.sort_by(|a, b| b.2.cmp(&a.2).then(b.1.cmp(&a.1)).then_with(|| a.0.cmp(&b.0)));
    let subtokens = ordered.into_iter().map(|(s, ..)| s).collect();
    SubwordVocab::from_subtokens(subtokens).expect("refined vocabulary keeps the alphabet")
}

/// Runs the configured number of refinement rounds from the character vocabulary.
pub fn vocab_for_min_count(
    items: &[EscapedItem],
    alphabet: &BTreeSet<char>,
    min_count: u64,
    cfg: &SteBuildConfig,
    exec: Exec,
) -> SubwordVocab {
    let mut vocab = SubwordVocab::from_alphabet(alphabet.iter().copied());
    for _ in 0..cfg.num_refinement_iterations.max(1) {
        vocab = refine_escaped(items, &vocab, min_count, cfg.max_subtoken_length, exec);
    }
    vocab
}

pub fn ste_build_vocab(counts: &TokenCounts, cfg: &SteBuildConfig) -> Result<SubwordVocab> {
    ste_build_vocab_with(counts, cfg, Exec::default())
}

pub fn ste_build_vocab_with(counts: &TokenCounts, cfg: &SteBuildConfig, exec: Exec) -> Result<SubwordVocab> {
    ste_search_vocab(counts, cfg, exec).map(|s| s.vocab)
}

/// Result of the threshold search, with every `(min_count, size)` probed.
#[derive(Debug, Clone)]
pub struct SteSearch {
    pub vocab: SubwordVocab,
    pub min_count: u64,
    pub probes: Vec<(u64, usize)>,
}

/// Binary search over the minimum count in `[1, max type weight]`.
///
/// Keeps the candidate whose size is closest to the target (the larger one
/// on ties) and stops as soon as a candidate lands within tolerance. When
/// size is monotone in the threshold, both ends of the final bracket have
/// been probed, so the result is the closest achievable size.
pub fn ste_search_vocab(counts: &TokenCounts, cfg: &SteBuildConfig, exec: Exec) -> Result<SteSearch> {
    if counts.is_empty() {
        return Err(Error::Input("cannot build a vocabulary from an empty corpus".into()));
    }
    let alphabet = training_alphabet(counts);
    if cfg.target_size <= alphabet.len() {
        return Err(Error::Config(format!(
            "target size {} does not exceed the alphabet size {}",
            cfg.target_size,
            alphabet.len()
        )));
    }
    let items = escaped_training_items(counts, &alphabet);
    let max_weight = counts.entries.values().map(|c| c.total()).max().unwrap_or(1);

    let target = cfg.target_size;
    let dist = |n: usize| n.abs_diff(target);
    let within = |n: usize| (dist(n) as f64) * 100.0 <= cfg.size_tolerance_pct * target as f64;

    let (mut lo, mut hi) = (1u64, max_weight.max(1));
    let mut best: Option<(SubwordVocab, u64)> = None;
    let mut probes = Vec::new();
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        let vocab = vocab_for_min_count(&items, &alphabet, mid, cfg, exec);
        let size = vocab.len();
        probes.push((mid, size));
        let better = match &best {
            None => true,
            Some((b, _)) => dist(size) < dist(b.len()) || (dist(size) == dist(b.len()) && size > b.len()),
        };
        if better {
            best = Some((vocab, mid));
        }
        if within(size) {
            break;
        }
        if size > target {
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    let (vocab, min_count) = best.expect("search range is nonempty");
    Ok(SteSearch {
        vocab,
        min_count,
        probes,
    })
}
