//! Word → morph boundary lexicons and their TSV file format.
//!
//! A line reads `word<TAB>morph morph …`; the morphs must concatenate to the
//! word. Boundaries are character (Unicode scalar) offsets strictly inside
//! the word.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::{self, MarkerConvention, CONTINUATION, END_MARK};
use crate::error::{Error, Result};

pub type Boundaries = BTreeSet<usize>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentationLexicon {
    entries: BTreeMap<String, Boundaries>,
    /// lowercase form -> first headword with that folding and equal length
    folded: HashMap<String, String>,
}

impl SegmentationLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&Boundaries> {
        self.entries.get(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Boundaries)> {
        self.entries.iter().map(|(w, b)| (w.as_str(), b))
    }

    /// Adds boundaries to a word, merging with any existing entry.
    ///
    /// Non-internal positions are dropped.
    pub fn insert<I: IntoIterator<Item = usize>>(&mut self, word: &str, boundaries: I) {
        let len = word.chars().count();
        let set = self.entries.entry(word.to_owned()).or_default();
        set.extend(boundaries.into_iter().filter(|&p| p > 0 && p < len));
        let folded = word.to_lowercase();
        if folded.chars().count() == len {
            match self.folded.get(&folded) {
                Some(existing) if existing.as_str() <= word => {}
                _ => {
                    self.folded.insert(folded, word.to_owned());
                }
            }
        }
    }

    /// Exact lookup, then an equal-length case-folded match.
    pub fn lookup(&self, word: &str) -> Option<&Boundaries> {
        if let Some(b) = self.entries.get(word) {
            return Some(b);
        }
        let folded = word.to_lowercase();
        if folded.chars().count() != word.chars().count() {
            return None;
        }
        self.folded.get(&folded).and_then(|w| self.entries.get(w))
    }

    pub fn morphs(&self, word: &str) -> Option<Vec<String>> {
        self.entries.get(word).map(|b| split_at_boundaries(word, b))
    }

    /// Splits a token at its lexicon boundaries; absent tokens stay whole.
    pub fn segment(&self, token: &str) -> Vec<String> {
        match self.lookup(token) {
            Some(b) => split_at_boundaries(token, b),
            None => vec![token.to_owned()],
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (word, b) in &self.entries {
            writeln!(out, "{word}\t{}", split_at_boundaries(word, b).join(" "))?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("lexicon is UTF-8")
    }

    /// Loads a lexicon, verifying that every line's morphs rebuild its word.
    pub fn read_from<R: BufRead>(source: R) -> Result<Self> {
        Self::read_impl(source, false)
    }

    /// Like [`read_from`](Self::read_from), but first strips `@@` and a
    /// word-final `_` from the morphs, for predictions taken from marked
    /// segmenter output.
    pub fn read_stripping_markers<R: BufRead>(source: R) -> Result<Self> {
        Self::read_impl(source, true)
    }

    fn read_impl<R: BufRead>(source: R, strip: bool) -> Result<Self> {
        let mut lex = SegmentationLexicon::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (word, morphs) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(lineno, "expected `word<TAB>morphs`"))?;
            let mut morphs: Vec<&str> = morphs.split(' ').filter(|m| !m.is_empty()).collect();
            if strip {
                strip_morph_markers(word, &mut morphs);
            }
            let joined: String = morphs.concat();
            if word.is_empty() || joined != word {
                return Err(Error::format(
                    lineno,
                    format!("morphs `{}` do not concatenate to `{word}`", morphs.join(" ")),
                ));
            }
            let mut pos = 0;
            let mut bounds = Vec::with_capacity(morphs.len());
            for m in &morphs[..morphs.len() - 1] {
                pos += m.chars().count();
                bounds.push(pos);
            }
            lex.insert(word, bounds);
        }
        Ok(lex)
    }

    /// Splits every token of a sentence and marks the pieces.
    pub fn apply<S: AsRef<str>>(&self, tokens: &[S], convention: MarkerConvention) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(tokens.len());
        for tok in tokens {
            let tok = tok.as_ref();
            corpus::check_marker_clean(tok)?;
            corpus::push_marked(&mut out, self.segment(tok), convention);
        }
        Ok(out)
    }
}

fn strip_morph_markers(word: &str, morphs: &mut Vec<&str>) {
    for m in morphs.iter_mut() {
        if let Some(s) = m.strip_suffix(CONTINUATION) {
            *m = s;
        }
    }
    if !word.ends_with(END_MARK) {
        if let Some(last) = morphs.last_mut() {
            if let Some(s) = last.strip_suffix(END_MARK) {
                *last = s;
            }
        }
    }
    morphs.retain(|m| !m.is_empty());
}

/// Cuts a word at character offsets.
pub fn split_at_boundaries(word: &str, boundaries: &Boundaries) -> Vec<String> {
    let mut out = Vec::with_capacity(boundaries.len() + 1);
    let mut cur = String::new();
    for (i, c) in word.chars().enumerate() {
        if i > 0 && boundaries.contains(&i) {
            out.push(std::mem::take(&mut cur));
        }
        cur.push(c);
    }
    out.push(cur);
    out
}

/// Apply a lexicon to a single sentence.
pub fn apply_lexicon<S: AsRef<str>>(
    tokens: &[S],
    lexicon: &SegmentationLexicon,
    convention: MarkerConvention,
) -> Result<Vec<String>> {
    lexicon.apply(tokens, convention)
}
