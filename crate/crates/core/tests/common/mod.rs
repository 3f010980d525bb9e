//! Test-only oracles and generators, kept independent of the library's
//! algorithms.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subseg::corpus::{SentenceStream, TokenCounts, TypeCount};
use subseg::lexicon::{Boundaries, SegmentationLexicon};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reference BPE learner: recount every pair from scratch each round.
///
/// Entries are `(symbols, weight)`; pair frequency counts every adjacent
/// position; ties go to the smallest `(left, right)`; stops below 2.
pub fn brute_force_bpe(entries: &[(Vec<String>, u64)], num_merges: usize) -> Vec<(String, String)> {
    let mut words: Vec<(Vec<String>, u64)> = entries.to_vec();
    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let mut freq: HashMap<(String, String), u64> = HashMap::new();
        for (syms, w) in &words {
            for i in 0..syms.len().saturating_sub(1) {
                *freq.entry((syms[i].clone(), syms[i + 1].clone())).or_default() += w;
            }
        }
        let best = freq
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((l, r), count)) = best else { break };
        if count < 2 {
            break;
        }
        for (syms, _) in words.iter_mut() {
            let mut out = Vec::new();
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    out.push(format!("{l}{r}"));
                    i += 2;
                } else {
                    out.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = out;
        }
        merges.push((l, r));
    }
    merges
}

/// Naive morph/boundary scoring through explicit span sets.
/// Returns (bnd P, R, F1, morph P, R, F1, word acc).
pub fn naive_eval(gold: &[(String, Boundaries)], pred: &HashMap<String, Boundaries>) -> [f64; 7] {
    let spans = |len: usize, b: &Boundaries| -> BTreeSet<(usize, usize)> {
        let mut cuts = vec![0];
        cuts.extend(b.iter().copied());
        cuts.push(len);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let (mut bc, mut bp, mut bg, mut mc, mut mp, mut mg, mut wc) = (0u64, 0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    let empty = Boundaries::new();
    for (w, g) in gold {
        let p = pred.get(w).unwrap_or(&empty);
        let len = w.chars().count();
        bc += p.intersection(g).count() as u64;
        bp += p.len() as u64;
        bg += g.len() as u64;
        let ps = spans(len, p);
        let gs = spans(len, g);
        mc += ps.intersection(&gs).count() as u64;
        mp += ps.len() as u64;
        mg += gs.len() as u64;
        wc += (p == g) as u64;
    }
    let prf = |c: u64, p: u64, g: u64| -> (f64, f64, f64) {
        if p == 0 && g == 0 {
            return (100.0, 100.0, 100.0);
        }
        let pr = if p == 0 { 0.0 } else { 100.0 * c as f64 / p as f64 };
        let rc = if g == 0 { 0.0 } else { 100.0 * c as f64 / g as f64 };
        let f = if pr + rc == 0.0 { 0.0 } else { 2.0 * pr * rc / (pr + rc) };
        (pr, rc, f)
    };
    let b = prf(bc, bp, bg);
    let m = prf(mc, mp, mg);
    [b.0, b.1, b.2, m.0, m.1, m.2, 100.0 * wc as f64 / gold.len() as f64]
}

pub fn random_word<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> String {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

/// Marker-clean tokens (no `_`, no `@@`), including `\`, `@` and non-ASCII.
pub const CLEAN_ALPHABET: &[char] = &['a', 'b', 'c', 'á', 'č', 'ř', 'e', '@', '\\', '.', 'x', '7', 'ü', ';'];

pub fn clean_token<R: Rng>(rng: &mut R, max_len: usize) -> String {
    loop {
        let w = random_word(rng, CLEAN_ALPHABET, max_len);
        if !w.contains("@@") {
            return w;
        }
    }
}

pub fn clean_sentence<R: Rng>(rng: &mut R, max_tokens: usize, max_len: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max_tokens);
    (0..n).map(|_| clean_token(rng, max_len)).collect()
}

pub fn random_counts<R: Rng>(rng: &mut R, max_types: usize, alphabet: &[char], max_len: usize) -> TokenCounts {
    let n = rng.gen_range(1..=max_types);
    TokenCounts::from_entries((0..n).map(|_| {
        let w = random_word(rng, alphabet, max_len);
        (w, TypeCount::new(rng.gen_range(0..6), rng.gen_range(1..6)))
    }))
}

/// Random lexicon whose entries satisfy the concatenation invariant.
pub fn random_lexicon<R: Rng>(rng: &mut R, words: &[String]) -> SegmentationLexicon {
    let mut lex = SegmentationLexicon::new();
    for w in words {
        if rng.gen_bool(0.6) {
            let len = w.chars().count();
            let b: Vec<usize> = (1..len).filter(|_| rng.gen_bool(0.4)).collect();
            lex.insert(w, b);
        }
    }
    lex
}

/// Czech-flavoured synthetic corpus: Zipf-distributed stem+suffix words.
pub fn synthetic_corpus(seed: u64, target_bytes: usize) -> SentenceStream {
    let mut rng = rng(seed);
    let onsets = [
        "", "b", "d", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "st", "pr", "kr", "ch", "tř", "sk", "ž",
    ];
    let vowels = ["a", "e", "i", "o", "u", "á", "é", "í", "y", "ou"];
    let codas = ["", "", "", "n", "l", "k", "s", "j", "v"];
    let suffixes = [
        "", "", "a", "e", "i", "y", "u", "ou", "ami", "ech", "ovi", "em", "ní", "ost", "ský",
    ];
    let prefixes = ["", "", "", "", "ne", "po", "vy", "za", "pře", "roz"];
    let mut lexicon: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while lexicon.len() < 6000 {
        let syl = rng.gen_range(1..=3);
        let mut stem = String::new();
        stem.push_str(prefixes[rng.gen_range(0..prefixes.len())]);
        for _ in 0..syl {
            stem.push_str(onsets[rng.gen_range(0..onsets.len())]);
            stem.push_str(vowels[rng.gen_range(0..vowels.len())]);
            stem.push_str(codas[rng.gen_range(0..codas.len())]);
        }
        for _ in 0..rng.gen_range(1..=4) {
            let w = format!("{stem}{}", suffixes[rng.gen_range(0..suffixes.len())]);
            if seen.insert(w.clone()) {
                lexicon.push(w);
            }
        }
    }
    let mut cum = Vec::with_capacity(lexicon.len());
    let mut acc = 0.0;
    for r in 0..lexicon.len() {
        acc += 1.0 / (r as f64 + 1.0);
        cum.push(acc);
    }
    let mut sentences = Vec::new();
    let mut bytes = 0;
    while bytes < target_bytes {
        let n = rng.gen_range(3..=14);
        let mut s = Vec::with_capacity(n + 1);
        for _ in 0..n {
            let u = rng.gen::<f64>() * acc;
            let i = cum.partition_point(|&c| c < u).min(lexicon.len() - 1);
            s.push(lexicon[i].clone());
        }
        s.push(".".to_string());
        bytes += s.iter().map(|t| t.len() + 1).sum::<usize>();
        sentences.push(s);
    }
    SentenceStream::new(sentences)
}

/// Random derivation forest whose children share material with their parents.
pub fn random_forest<R: Rng>(rng: &mut R, max_nodes: usize) -> subseg::derivnet::DerivGraph {
    use subseg::derivnet::{DerivGraph, EdgeKind};
    const LETTERS: &[char] = &['a', 'e', 'o', 'm', 'n', 't', 'v', 'á', 'ř', 'k'];
    let mut g = DerivGraph::new();
    let n = rng.gen_range(1..=max_nodes);
    for i in 0..n {
        let parent = if i == 0 || rng.gen_bool(0.15) {
            None
        } else {
            Some(rng.gen_range(0..i))
        };
        let word = match parent {
            None => random_word(rng, LETTERS, 7),
            Some(p) => {
                let base: Vec<char> = g.word(p).chars().collect();
                let lo = rng.gen_range(0..base.len());
                let hi = rng.gen_range(lo + 1..=base.len());
                let mut w = String::new();
                if rng.gen_bool(0.4) {
                    w.push_str(&random_word(rng, LETTERS, 3));
                }
                w.extend(&base[lo..hi]);
                if rng.gen_bool(0.7) {
                    w.push_str(&random_word(rng, LETTERS, 4));
                }
                w
            }
        };
        let node = g.add_node(&word);
        if let Some(p) = parent {
            let kind = if rng.gen_bool(0.3) {
                EdgeKind::Inflection
            } else {
                EdgeKind::Derivation
            };
            g.add_edge(p, node, kind);
        }
    }
    g
}

/// Runs the built binary; returns (exit code, stdout, stderr).
pub fn subseg<I, S>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_subseg"))
        .args(args)
        .env_remove("SUBSEG_THREADS")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).expect("UTF-8 stdout"),
        String::from_utf8(out.stderr).expect("UTF-8 stderr"),
    )
}
