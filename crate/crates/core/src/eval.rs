//! Intrinsic evaluation of segmentations.
//!
//! Scores are micro-averaged over the gold word list, one count per word
//! type. Only word-internal boundaries are scored; the word edges act as
//! implicit, always-correct boundaries when morphs are compared.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::bpe::MergeTable;
use crate::compose::ComposedModel;
use crate::corpus::TokenCounts;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lexicon::{Boundaries, SegmentationLexicon};
use crate::ste::SubwordVocab;

pub type GoldLexicon = SegmentationLexicon;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Percentages from raw counts; an empty denominator scores 0 unless
    /// both sides are empty, which scores 100.
    pub fn from_counts(correct: u64, predicted: u64, gold: u64) -> Self {
        if predicted == 0 && gold == 0 {
            return Prf {
                precision: 100.0,
                recall: 100.0,
                f1: 100.0,
            };
        }
        let pct = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 * 100.0 };
        let precision = pct(correct, predicted);
        let recall = pct(correct, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub morph: Prf,
    pub boundary: Prf,
    pub word_accuracy: f64,
}

impl MetricsReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("morph_p", self.morph.precision),
            ("morph_r", self.morph.recall),
            ("morph_f1", self.morph.f1),
            ("bnd_p", self.boundary.precision),
            ("bnd_r", self.boundary.recall),
            ("bnd_f1", self.boundary.f1),
            ("word_acc", self.word_accuracy),
        ] {
            let _ = writeln!(s, "{k}\t{v:.2}");
        }
        s
    }
}

/// Integer tallies behind a [`MetricsReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub bnd_correct: u64,
    pub bnd_pred: u64,
    pub bnd_gold: u64,
    pub morph_correct: u64,
    pub morph_pred: u64,
    pub morph_gold: u64,
    pub words_correct: u64,
    pub words: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            bnd_correct: self.bnd_correct + o.bnd_correct,
            bnd_pred: self.bnd_pred + o.bnd_pred,
            bnd_gold: self.bnd_gold + o.bnd_gold,
            morph_correct: self.morph_correct + o.morph_correct,
            morph_pred: self.morph_pred + o.morph_pred,
            morph_gold: self.morph_gold + o.morph_gold,
            words_correct: self.words_correct + o.words_correct,
            words: self.words + o.words,
        }
    }
}

impl Tally {
    /// Scores one word given both boundary sets.
    pub fn word(len: usize, pred: &Boundaries, gold: &Boundaries) -> Tally {
        let bnd_correct = pred.intersection(gold).count() as u64;
        // a predicted morph [s, e) is right iff s and e are both gold cuts
        // (word edges included) and no gold cut falls strictly between them
        let cuts = |b: &Boundaries| -> Vec<usize> {
            std::iter::once(0)
                .chain(b.iter().copied().filter(|&p| p > 0 && p < len))
                .chain(std::iter::once(len))
                .collect()
        };
        let pc = cuts(pred);
        let gc = cuts(gold);
        let mut morph_correct = 0;
        let (mut i, mut j) = (0, 0);
        // both cut lists are sorted; a shared consecutive pair is a shared span
        while i + 1 < pc.len() && j + 1 < gc.len() {
            match pc[i].cmp(&gc[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if pc[i + 1] == gc[j + 1] {
                        morph_correct += 1;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Tally {
            bnd_correct,
            bnd_pred: pred.len() as u64,
            bnd_gold: gold.len() as u64,
            morph_correct,
            morph_pred: pc.len() as u64 - 1,
            morph_gold: gc.len() as u64 - 1,
            words_correct: (pred == gold) as u64,
            words: 1,
        }
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport {
            morph: Prf::from_counts(self.morph_correct, self.morph_pred, self.morph_gold),
            boundary: Prf::from_counts(self.bnd_correct, self.bnd_pred, self.bnd_gold),
            word_accuracy: if self.words == 0 {
                0.0
            } else {
                self.words_correct as f64 / self.words as f64 * 100.0
            },
        }
    }
}

pub fn eval_segmentation(gold: &GoldLexicon, predicted: &SegmentationLexicon) -> Result<MetricsReport> {
    eval_segmentation_with(gold, predicted, Exec::default())
}

/// Scores predictions on every gold word; missing predictions count as unsplit.
pub fn eval_segmentation_with(
    gold: &GoldLexicon,
    predicted: &SegmentationLexicon,
    exec: Exec,
) -> Result<MetricsReport> {
    if gold.is_empty() {
        return Err(Error::Config("gold lexicon is empty".into()));
    }
    let words: Vec<(&str, &Boundaries)> = gold.iter().collect();
    let empty = Boundaries::new();
    let tally = exec.fold_reduce(
        &words,
        Tally::default,
        |acc, &(w, g)| {
            let p = predicted.get(w).unwrap_or(&empty);
            acc + Tally::word(w.chars().count(), p, g)
        },
        |a, b| a + b,
    );
    Ok(tally.report())
}

/// Share of a joint vocabulary used by both sides.
pub fn vocab_overlap(model_vocab: &HashSet<String>, src_used: &HashSet<String>, tgt_used: &HashSet<String>) -> f64 {
    if model_vocab.is_empty() {
        return 0.0;
    }
    let both = model_vocab
        .iter()
        .filter(|v| src_used.contains(*v) && tgt_used.contains(*v))
        .count();
    both as f64 / model_vocab.len() as f64 * 100.0
}

/// Overlap of two separate vocabularies: intersection over union.
pub fn separate_overlap(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64 * 100.0
}

/// Anything that can split a word into subwords.
pub trait WordSplitter {
    fn split_word(&self, word: &str) -> Vec<String>;
}

impl WordSplitter for MergeTable {
    fn split_word(&self, word: &str) -> Vec<String> {
        self.encode_word(word, self.mode().marks(false))
    }
}

impl WordSplitter for SubwordVocab {
    fn split_word(&self, word: &str) -> Vec<String> {
        self.encode_token(word)
    }
}

impl WordSplitter for SegmentationLexicon {
    fn split_word(&self, word: &str) -> Vec<String> {
        self.segment(word)
    }
}

impl WordSplitter for ComposedModel {
    fn split_word(&self, word: &str) -> Vec<String> {
        // marker-colliding words are left whole
        self.encode_word(word, false).unwrap_or_else(|_| vec![word.to_owned()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub rank_lo: usize,
    pub rank_hi: usize,
    pub mean_subwords: f64,
    pub n_types: usize,
}

/// Mean subwords per type in power-of-two frequency-rank buckets
/// (`[1,1]`, `[2,3]`, `[4,7]`, …), the last one clipped to the type count.
pub fn split_histogram<S: WordSplitter + ?Sized>(counts: &TokenCounts, splitter: &S) -> Vec<HistogramRow> {
    let ranked = counts.ranked();
    let mut rows = Vec::new();
    let mut lo = 1;
    while lo <= ranked.len() {
        let hi = (2 * lo - 1).min(ranked.len());
        let total: usize = ranked[lo - 1..hi]
            .iter()
            .map(|(w, _)| splitter.split_word(w).len())
            .sum();
        let n = hi - lo + 1;
        rows.push(HistogramRow {
            rank_lo: lo,
            rank_hi: hi,
            mean_subwords: total as f64 / n as f64,
            n_types: n,
        });
        lo *= 2;
    }
    rows
}

pub fn histogram_tsv(rows: &[HistogramRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{:.4}\t{}", r.rank_lo, r.rank_hi, r.mean_subwords, r.n_types);
    }
    s
}

/// Distinct subwords in marked output, markers removed.
pub fn used_subwords<'a, I: IntoIterator<Item = &'a str>>(pieces: I) -> HashSet<String> {
    pieces
        .into_iter()
        .map(|p| p.strip_suffix(crate::corpus::CONTINUATION).unwrap_or(p).to_owned())
        .collect()
}

/// Sorted view, handy for deterministic output.
pub fn sorted(set: &HashSet<String>) -> BTreeSet<&str> {
    set.iter().map(String::as_str).collect()
}
