//! Morphological pre-splitting followed by a data-driven splitter.
//!
//! The pre-splitter (a derivational lexicon or an imported external
//! segmentation) cuts each word into morph units; every unit but the last
//! carries `@@`. The post-splitter was trained on those units and splits
//! them further:
//!
//! ```text
//! Z tramvaje .  ->  Z tram@@ vaj@@ e .  ->  Z_ tra m@@ vaj@@ e_ ._
//! ```
//!
//! A subword carries at most one marker: `@@` when the morph continues,
//! `_` when the word ends.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::bpe::MergeTable;
use crate::corpus::{self, MarkerConvention, SentenceStream, CONTINUATION, END_MARK};
use crate::error::{Error, Result};
use crate::lexicon::SegmentationLexicon;
use crate::ste::{ste_unescape, SubwordVocab};

const MANIFEST_HEADER: &str = "#subseg-compose v1";
const MARKER_PLAN: &str = "pre=@@ post=end";

#[derive(Debug, Clone, PartialEq)]
pub enum PostSplitter {
    Bpe(MergeTable),
    Ste(SubwordVocab),
}

impl PostSplitter {
    pub fn kind(&self) -> &'static str {
        match self {
            PostSplitter::Bpe(_) => "bpe",
            PostSplitter::Ste(_) => "ste",
        }
    }

    /// Loads either model type, telling them apart by the header line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.starts_with("#subseg-bpe") {
            Ok(PostSplitter::Bpe(MergeTable::read_from(text.as_bytes())?))
        } else if text.starts_with("#subseg-ste") {
            Ok(PostSplitter::Ste(SubwordVocab::read_from(text.as_bytes())?))
        } else {
            Err(Error::Input(format!(
                "{}: not a BPE model or wordpiece vocabulary",
                path.display()
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedModel {
    pub pre: SegmentationLexicon,
    pub post: PostSplitter,
}

/// Cuts every word into morph units; non-final units get `@@`.
pub fn pre_split_sentence<S: AsRef<str>>(tokens: &[S], lexicon: &SegmentationLexicon) -> Result<Vec<String>> {
    lexicon.apply(tokens, MarkerConvention::Continuation)
}

pub fn pre_split_corpus(stream: &SentenceStream, lexicon: &SegmentationLexicon) -> Result<SentenceStream> {
    let sentences = stream
        .sentences
        .iter()
        .map(|s| pre_split_sentence(s, lexicon))
        .collect::<Result<_>>()?;
    Ok(SentenceStream {
        sentences,
        bytes_read: stream.bytes_read,
    })
}

/// Reads a `word<TAB>morph morph …` file produced by any external segmenter.
pub fn import_external_segmentation<R: BufRead>(source: R) -> Result<SegmentationLexicon> {
    SegmentationLexicon::read_from(source)
}

impl ComposedModel {
    pub fn new(pre: SegmentationLexicon, post: PostSplitter) -> Self {
        Self { pre, post }
    }

    /// Splits one morph unit. `end_mark` asks for the word-end mark; a
    /// continued unit's last piece gets `@@` instead.
    fn encode_unit(&self, unit: &str, end_mark: bool, out: &mut Vec<String>, word_end: bool) {
        let (body, continued) = match unit.strip_suffix(CONTINUATION) {
            Some(b) if !b.is_empty() => (b, true),
            _ => (unit, false),
        };
        let mut pieces = match &self.post {
            PostSplitter::Bpe(t) => t.encode_word(body, !continued && end_mark),
            PostSplitter::Ste(v) => {
                if continued {
                    v.segment_escaped(&v.escape_body(body))
                } else {
                    v.segment_escaped(&v.escape(body))
                }
            }
        };
        let n = pieces.len();
        for (i, p) in pieces.iter_mut().enumerate() {
            let last = i + 1 == n;
            let marks = match &self.post {
                // BPE pieces carry `@@` on everything but the word's last piece
                PostSplitter::Bpe(_) => !(last && word_end),
                PostSplitter::Ste(_) => last && continued,
            };
            if marks {
                p.push_str(CONTINUATION);
            }
        }
        out.append(&mut pieces);
    }

    /// Pre-splits and post-splits a whole sentence.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(tokens.len() * 3);
        let n = tokens.len();
        for (i, tok) in tokens.iter().enumerate() {
            self.encode_word_into(tok.as_ref(), i + 1 == n, &mut out)?;
        }
        Ok(out)
    }

    /// Encodes one word at the given sentence position.
    pub fn encode_word(&self, word: &str, sentence_final: bool) -> Result<Vec<String>> {
        let mut out = Vec::new();
        self.encode_word_into(word, sentence_final, &mut out)?;
        Ok(out)
    }

    fn encode_word_into(&self, word: &str, sentence_final: bool, out: &mut Vec<String>) -> Result<()> {
        corpus::check_marker_clean(word)?;
        let end_mark = match &self.post {
            PostSplitter::Bpe(t) => t.mode().marks(sentence_final),
            PostSplitter::Ste(_) => true,
        };
        let units = pre_split_sentence(&[word], &self.pre)?;
        let k = units.len();
        for (j, unit) in units.iter().enumerate() {
            self.encode_unit(unit, end_mark, out, j + 1 == k);
        }
        Ok(())
    }

    /// Restores the original tokens from [`encode`](Self::encode) output.
    pub fn decode<S: AsRef<str>>(&self, subwords: &[S]) -> Vec<String> {
        match &self.post {
            PostSplitter::Bpe(_) => corpus::undo_sentence(subwords, MarkerConvention::Continuation),
            PostSplitter::Ste(_) => decode_escaped_units(subwords),
        }
    }

    /// Writes a manifest pointing at the two model files.
    pub fn write_manifest<W: Write>(mut out: W, lexicon: &Path, post_kind: &str, post: &Path) -> std::io::Result<()> {
        writeln!(out, "{MANIFEST_HEADER}")?;
        writeln!(out, "lexicon\t{}", lexicon.display())?;
        writeln!(out, "post\t{post_kind}\t{}", post.display())?;
        writeln!(out, "markers\t{MARKER_PLAN}")
    }

    /// Loads a manifest; relative paths are resolved against its directory.
    pub fn load_manifest(path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let file = BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        if lines.next().transpose()?.as_deref() != Some(MANIFEST_HEADER) {
            return Err(Error::format(1, "not a composed-model manifest"));
        }
        let (mut lexicon, mut post) = (None, None);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["lexicon", p] => {
                    let f = BufReader::new(std::fs::File::open(resolve(p))?);
                    lexicon = Some(SegmentationLexicon::read_from(f)?);
                }
                ["post", kind, p] => {
                    let model = PostSplitter::load(&resolve(p))?;
                    if model.kind() != *kind {
                        return Err(Error::format(
                            lineno,
                            format!("post model is `{}`, manifest says `{kind}`", model.kind()),
                        ));
                    }
                    post = Some(model);
                }
                ["markers", plan] if *plan == MARKER_PLAN => {}
                ["markers", plan] => return Err(Error::format(lineno, format!("unsupported marker plan `{plan}`"))),
                [""] => {}
                _ => return Err(Error::format(lineno, format!("unexpected manifest line `{line}`"))),
            }
        }
        match (lexicon, post) {
            (Some(pre), Some(post)) => Ok(ComposedModel { pre, post }),
            _ => Err(Error::Input("manifest needs both `lexicon` and `post` lines".into())),
        }
    }
}

/// Undoes escaped wordpiece output that may carry `@@` morph markers.
fn decode_escaped_units<S: AsRef<str>>(subwords: &[S]) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for piece in subwords {
        let piece = piece.as_ref();
        if let Some(body) = piece.strip_suffix(CONTINUATION) {
            word.push_str(body);
        } else if let Some(body) = piece.strip_suffix(END_MARK) {
            word.push_str(body);
            out.push(ste_unescape(&std::mem::take(&mut word)));
        } else {
            word.push_str(piece);
        }
    }
    if !word.is_empty() {
        out.push(ste_unescape(&word));
    }
    out
}

pub fn compose_encode<S: AsRef<str>>(tokens: &[S], model: &ComposedModel) -> Result<Vec<String>> {
    model.encode(tokens)
}

pub fn compose_decode<S: AsRef<str>>(subwords: &[S], model: &ComposedModel) -> Vec<String> {
    model.decode(subwords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::UnderscoreMode;

    fn tram_lexicon() -> SegmentationLexicon {
        let mut l = SegmentationLexicon::new();
        l.insert("tramvaje", [4, 7]);
        l
    }

    fn ste_vocab() -> SubwordVocab {
        let alphabet = SubwordVocab::from_alphabet("Ztramvje.".chars());
        let mut subs: Vec<String> = ["tra", "vaj", "e_", "Z_", "._"].iter().map(|s| s.to_string()).collect();
        subs.extend(alphabet.subtokens().iter().cloned());
        SubwordVocab::from_subtokens(subs).unwrap()
    }

    #[test]
    fn pre_split() {
        let units = pre_split_sentence(&["Z", "tramvaje", "."], &tram_lexicon()).unwrap();
        assert_eq!(units, vec!["Z", "tram@@", "vaj@@", "e", "."]);
        let units = pre_split_sentence(&["Z", "x"], &SegmentationLexicon::new()).unwrap();
        assert_eq!(units, vec!["Z", "x"]);
    }

    #[test]
    fn import_checks_concatenation() {
        let l = import_external_segmentation("nevystoupili\tne vystoupil i\n".as_bytes()).unwrap();
        assert_eq!(
            l.get("nevystoupili").unwrap().iter().copied().collect::<Vec<_>>(),
            vec![2, 11]
        );
        assert!(import_external_segmentation("abc\tab d\n".as_bytes()).is_err());
        assert!(import_external_segmentation("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn ste_post_splitting() {
        let m = ComposedModel::new(tram_lexicon(), PostSplitter::Ste(ste_vocab()));
        let out = m.encode(&["Z", "tramvaje", "."]).unwrap();
        assert_eq!(out, vec!["Z_", "tra", "m@@", "vaj@@", "e_", "._"]);
        assert_eq!(m.decode(&out), vec!["Z", "tramvaje", "."]);
    }

    #[test]
    fn bpe_post_splitting() {
        let m = |l: &str, r: &str| (l.to_string(), r.to_string());
        let table = MergeTable::new(vec![m("t", "r"), m("tr", "a"), m("e", "_")], UnderscoreMode::NonFinal).unwrap();
        let model = ComposedModel::new(tram_lexicon(), PostSplitter::Bpe(table));
        let out = model.encode(&["tramvaje", "tramvaje"]).unwrap();
        assert_eq!(
            out,
            vec!["tra@@", "m@@", "v@@", "a@@", "j@@", "e_", "tra@@", "m@@", "v@@", "a@@", "j@@", "e"]
        );
        assert_eq!(model.decode(&out), vec!["tramvaje", "tramvaje"]);
    }

    #[test]
    fn empty_lexicon_is_bare_splitter() {
        let v = ste_vocab();
        let m = ComposedModel::new(SegmentationLexicon::new(), PostSplitter::Ste(v.clone()));
        let toks = ["Z", "tramvaje", "."];
        assert_eq!(m.encode(&toks).unwrap(), v.encode_sentence(&toks));
    }

    #[test]
    fn at_signs_survive() {
        let mut l = SegmentationLexicon::new();
        l.insert("x@", [1]);
        l.insert("@y", [1]);
        let m = ComposedModel::new(l, PostSplitter::Ste(SubwordVocab::from_alphabet("xy@".chars())));
        let toks = ["x@", "@y", "@"];
        let out = m.encode(&toks).unwrap();
        assert_eq!(m.decode(&out), toks);
    }
}
