//! Byte-pair encoding with optional zero-suffix marking.
//!
//! Three training flavours differ only in how the end of a word is shown to
//! the merge learner:
//!
//! - [`UnderscoreMode::None`]: plain characters;
//! - [`UnderscoreMode::Every`]: every word gets a trailing `_` symbol, so a
//!   bare stem (zero suffix) and the stem inside a longer form can share units;
//! - [`UnderscoreMode::NonFinal`]: like `Every`, except for the last word of
//!   each sentence.
//!
//! Training tokens ending in `@@` are morph units from a pre-splitter
//! (see [`crate::compose`]); they are learned without `_`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::rc::Rc;

use crate::corpus::{self, MarkerConvention, TokenCounts, CONTINUATION, END_MARK};
use crate::error::{Error, Result};
use crate::exec::Exec;

const HEADER: &str = "#subseg-bpe";
const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnderscoreMode {
    None,
    Every,
    NonFinal,
}

impl UnderscoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            UnderscoreMode::None => "none",
            UnderscoreMode::Every => "every",
            UnderscoreMode::NonFinal => "non_final",
        }
    }

    /// Whether a word at this position gets the `_` symbol.
    pub fn marks(self, sentence_final: bool) -> bool {
        match self {
            UnderscoreMode::None => false,
            UnderscoreMode::Every => true,
            UnderscoreMode::NonFinal => !sentence_final,
        }
    }
}

impl fmt::Display for UnderscoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for UnderscoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "every" => Ok(Self::Every),
            "non_final" | "non-final" => Ok(Self::NonFinal),
            other => Err(Error::Config(format!("unknown underscore mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Known(u32),
    Unknown(char),
}

/// Ordered merge list; rank 0 was learned first.
#[derive(Debug, Clone)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    mode: UnderscoreMode,
    symbols: Vec<String>,
    symbol_ids: HashMap<String, u32>,
    /// (left, right) -> (rank, merged symbol)
    ranks: HashMap<(u32, u32), (u32, u32)>,
}

impl PartialEq for MergeTable {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges && self.mode == other.mode
    }
}

impl MergeTable {
    pub fn new(merges: Vec<(String, String)>, mode: UnderscoreMode) -> Result<Self> {
        let mut table = MergeTable {
            merges: Vec::with_capacity(merges.len()),
            mode,
            symbols: Vec::new(),
            symbol_ids: HashMap::new(),
            ranks: HashMap::new(),
        };
        for (left, right) in merges {
            if left.is_empty() || right.is_empty() {
                return Err(Error::Input("empty merge symbol".into()));
            }
            if left.chars().chain(right.chars()).any(char::is_whitespace) {
                return Err(Error::Input(format!("merge `{left} {right}` contains whitespace")));
            }
            let l = table.intern(&left);
            let r = table.intern(&right);
            let m = table.intern(&format!("{left}{right}"));
            let rank = table.merges.len() as u32;
            if table.ranks.insert((l, r), (rank, m)).is_some() {
                return Err(Error::Input(format!("duplicate merge `{left} {right}`")));
            }
            table.merges.push((left, right));
        }
        Ok(table)
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.symbol_ids.get(s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(s.to_owned());
        self.symbol_ids.insert(s.to_owned(), id);
        id
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn mode(&self) -> UnderscoreMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// Splits one word. `end_mark` appends the `_` symbol before merging.
    ///
    /// Merges are replayed in rank order: a merge applies iff its pair is
    /// present at the moment its rank comes up, replacing all
    /// non-overlapping occurrences left to right.
    pub fn encode_word(&self, word: &str, end_mark: bool) -> Vec<String> {
        let mut seq: Vec<Piece> = word
            .chars()
            .chain(end_mark.then_some(END_MARK))
            .map(|c| {
                let mut buf = [0u8; 4];
                match self.symbol_ids.get(&*c.encode_utf8(&mut buf)) {
                    Some(&id) => Piece::Known(id),
                    None => Piece::Unknown(c),
                }
            })
            .collect();

        let mut last_rank: Option<u32> = None;
        loop {
            let next = seq
                .windows(2)
                .filter_map(|w| match (w[0], w[1]) {
                    (Piece::Known(a), Piece::Known(b)) => self.ranks.get(&(a, b)).map(|&(r, m)| (r, a, b, m)),
                    _ => None,
                })
                .filter(|&(r, ..)| last_rank.is_none_or(|lr| r > lr))
                .min_by_key(|&(r, ..)| r);
            let Some((rank, a, b, merged)) = next else {
                break;
            };
            let mut out = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                if i + 1 < seq.len() && seq[i] == Piece::Known(a) && seq[i + 1] == Piece::Known(b) {
                    out.push(Piece::Known(merged));
                    i += 2;
                } else {
                    out.push(seq[i]);
                    i += 1;
                }
            }
            seq = out;
            last_rank = Some(rank);
        }

        seq.into_iter()
            .map(|p| match p {
                Piece::Known(id) => self.symbols[id as usize].clone(),
                Piece::Unknown(c) => c.to_string(),
            })
            .collect()
    }

    /// Encodes a sentence into a flat list of marked subwords.
    ///
    /// `Continuation` puts `@@` on every non-final subword of a word.
    /// `EndMarker` emits no `@@` and relies on the mode's `_` symbols to
    /// delimit words, so it needs a mode other than `None`.
    pub fn encode_sentence<S: AsRef<str>>(&self, tokens: &[S], convention: MarkerConvention) -> Result<Vec<String>> {
        if convention == MarkerConvention::EndMarker && self.mode == UnderscoreMode::None {
            return Err(Error::Config(
                "end-marker convention needs a model trained with underscore mode `every` or `non_final`".into(),
            ));
        }
        let mut out = Vec::with_capacity(tokens.len() * 2);
        let n = tokens.len();
        for (i, tok) in tokens.iter().enumerate() {
            let tok = tok.as_ref();
            corpus::check_marker_clean(tok)?;
            let pieces = self.encode_word(tok, self.mode.marks(i + 1 == n));
            match convention {
                MarkerConvention::Continuation => corpus::push_marked(&mut out, pieces, convention),
                MarkerConvention::EndMarker => out.extend(pieces),
            }
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{HEADER} {VERSION} mode={}", self.mode)?;
        for (l, r) in &self.merges {
            writeln!(out, "{l} {r}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format(1, "empty model file"))?;
        let mode = parse_header(&header)?;
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => merges.push((l.to_owned(), r.to_owned())),
                _ => return Err(Error::format(lineno, format!("malformed merge line `{line}`"))),
            }
        }
        MergeTable::new(merges, mode)
    }

    pub fn to_model_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("symbols are UTF-8")
    }
}

fn parse_header(header: &str) -> Result<UnderscoreMode> {
    let mut parts = header.split(' ');
    if parts.next() != Some(HEADER) {
        return Err(Error::format(1, "not a BPE model file"));
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(v) => return Err(Error::format(1, format!("unsupported BPE model version `{v}`"))),
        None => return Err(Error::format(1, "missing version")),
    }
    let mode = parts
        .next()
        .and_then(|m| m.strip_prefix("mode="))
        .ok_or_else(|| Error::format(1, "missing mode"))?;
    if parts.next().is_some() {
        return Err(Error::format(1, "trailing header fields"));
    }
    match mode {
        "none" => Ok(UnderscoreMode::None),
        "every" => Ok(UnderscoreMode::Every),
        "non_final" => Ok(UnderscoreMode::NonFinal),
        m => Err(Error::format(1, format!("unknown mode `{m}`"))),
    }
}

/// Weighted symbol sequences the merge learner sees.
pub fn training_entries(counts: &TokenCounts, mode: UnderscoreMode) -> Result<Vec<(Vec<String>, u64)>> {
    let chars = |w: &str, mark: bool| -> Vec<String> {
        w.chars()
            .map(String::from)
            .chain(mark.then(|| END_MARK.to_string()))
            .collect()
    };
    let mut out = Vec::new();
    for (word, c) in &counts.entries {
        if let Some(body) = word.strip_suffix(CONTINUATION).filter(|b| !b.is_empty()) {
            out.push((chars(body, false), c.total()));
            continue;
        }
        if mode != UnderscoreMode::None && word.contains(END_MARK) {
            return Err(Error::Input(format!(
                "type `{word}` contains `{END_MARK}`, which underscore mode `{mode}` reserves"
            )));
        }
        match mode {
            UnderscoreMode::None => out.push((chars(word, false), c.total())),
            UnderscoreMode::Every => out.push((chars(word, true), c.total())),
            UnderscoreMode::NonFinal => {
                if c.non_final > 0 {
                    out.push((chars(word, true), c.non_final));
                }
                if c.final_ > 0 {
                    out.push((chars(word, false), c.final_));
                }
            }
        }
    }
    Ok(out)
}

pub fn bpe_train(counts: &TokenCounts, num_merges: usize, mode: UnderscoreMode) -> Result<MergeTable> {
    bpe_train_with(counts, num_merges, mode, Exec::default())
}

type Pair = (u32, u32);

struct Candidate {
    count: u64,
    left: Rc<str>,
    right: Rc<str>,
    pair: Pair,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // max-heap: higher count first, then the lexicographically smaller pair
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

/// Learns up to `num_merges` merges; stops early once no pair occurs twice.
///
/// Pair frequency counts every adjacent position (overlapping), weighted by
/// the word count. Ties go to the smallest `(left, right)` by code point.
pub fn bpe_train_with(counts: &TokenCounts, num_merges: usize, mode: UnderscoreMode, exec: Exec) -> Result<MergeTable> {
    if counts.is_empty() {
        return Err(Error::Input("cannot train BPE on an empty corpus".into()));
    }
    let entries = training_entries(counts, mode)?;

    let mut names: Vec<Rc<str>> = Vec::new();
    let mut ids: HashMap<Rc<str>, u32> = HashMap::new();
    let mut intern = |s: &str, names: &mut Vec<Rc<str>>| -> u32 {
        if let Some(&id) = ids.get(s) {
            return id;
        }
        let rc: Rc<str> = Rc::from(s);
        let id = names.len() as u32;
        names.push(rc.clone());
        ids.insert(rc, id);
        id
    };

    let mut words: Vec<Vec<u32>> = Vec::with_capacity(entries.len());
    let mut weights: Vec<u64> = Vec::with_capacity(entries.len());
    for (syms, w) in &entries {
        words.push(syms.iter().map(|s| intern(s, &mut names)).collect());
        weights.push(*w);
    }

    let indexed: Vec<(usize, &Vec<u32>)> = words.iter().enumerate().collect();
    let mut stats: HashMap<Pair, (u64, Vec<usize>)> = exec.fold_reduce(
        &indexed,
        HashMap::new,
        |mut acc: HashMap<Pair, (u64, Vec<usize>)>, &(idx, word)| {
            for w in word.windows(2) {
                let e = acc.entry((w[0], w[1])).or_default();
                e.0 += weights[idx];
                if e.1.last() != Some(&idx) {
                    e.1.push(idx);
                }
            }
            acc
        },
        |mut a, b| {
            for (k, (c, mut ws)) in b {
                let e = a.entry(k).or_default();
                e.0 += c;
                e.1.append(&mut ws);
            }
            a
        },
    );

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(stats.len());
    for (&pair, &(count, _)) in &stats {
        heap.push(Candidate {
            count,
            left: names[pair.0 as usize].clone(),
            right: names[pair.1 as usize].clone(),
            pair,
        });
    }

    let mut merges = Vec::with_capacity(num_merges);
    while merges.len() < num_merges {
        let Some(top) = heap.pop() else { break };
        let current = stats.get(&top.pair).map_or(0, |s| s.0);
        if current != top.count {
            // stale entry; the live count was pushed separately
            continue;
        }
        if top.count < 2 {
            break;
        }
        let (a, b) = top.pair;
        let merged_name = format!("{}{}", top.left, top.right);
        let merged = intern(&merged_name, &mut names);
        merges.push((top.left.to_string(), top.right.to_string()));

        let mut affected = stats.remove(&top.pair).map(|s| s.1).unwrap_or_default();
        affected.sort_unstable();
        affected.dedup();
        let mut touched: HashSet<Pair> = HashSet::new();
        for idx in affected {
            let word = &words[idx];
            if !word.windows(2).any(|w| w[0] == a && w[1] == b) {
                continue;
            }
            let weight = weights[idx];
            for w in word.windows(2) {
                let p = (w[0], w[1]);
                if let Some(s) = stats.get_mut(&p) {
                    s.0 -= weight;
                }
                touched.insert(p);
            }
            let mut out = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len() && word[i] == a && word[i + 1] == b {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(word[i]);
                    i += 1;
                }
            }
            for w in out.windows(2) {
                let p = (w[0], w[1]);
                let s = stats.entry(p).or_default();
                s.0 += weight;
                if s.1.last() != Some(&idx) {
                    s.1.push(idx);
                }
                touched.insert(p);
            }
            words[idx] = out;
        }
        touched.remove(&top.pair);
        stats.remove(&top.pair);
        for p in touched {
            if let Some(&(count, _)) = stats.get(&p) {
                if count > 0 {
                    heap.push(Candidate {
                        count,
                        left: names[p.0 as usize].clone(),
                        right: names[p.1 as usize].clone(),
                        pair: p,
                    });
                }
            }
        }
    }

    MergeTable::new(merges, mode)
}
