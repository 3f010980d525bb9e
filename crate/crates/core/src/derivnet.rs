//! Morph segmentation from a derivational network.
//!
//! Lemmas linked by derivation form a forest; inflected forms hang off their
//! lemma as leaves. Each edge is aligned by longest common substring, which
//! cuts both words into prefix / shared part / suffix. A boundary that one
//! word has strictly inside the shared part is then copied to the other word
//! at the aligned position, until nothing changes.
//!
//! ```
//! use subseg::derivnet::{DerivGraph, EdgeKind};
//!
//! let mut g = DerivGraph::new();
//! let mavat = g.add_node("mávat");
//! let mavnout = g.add_node("mávnout");
//! let mavajici = g.add_node("mávající");
//! g.add_edge(mavat, mavnout, EdgeKind::Derivation);
//! g.add_edge(mavat, mavajici, EdgeKind::Derivation);
//! g.stem_edges();
//! g.propagate_boundaries();
//! let lex = g.export_lexicon();
//! assert_eq!(lex.morphs("mávající").unwrap(), ["máv", "a", "jící"]);
//! ```

use std::collections::{HashMap, VecDeque};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lexicon::{Boundaries, SegmentationLexicon};

/// A maximal common substring: `a[offset_a..offset_a+length] == b[offset_b..offset_b+length]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LcsAlignment {
    pub offset_a: usize,
    pub offset_b: usize,
    pub length: usize,
}

/// Longest common substring over characters.
///
/// Ties go to the smallest offset in `a`, then in `b`. No shared character
/// gives a zero-length alignment at `(0, 0)`.
pub fn lcs_align(a: &str, b: &str) -> LcsAlignment {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    lcs_align_chars(&a, &b)
}

fn lcs_align_chars(a: &[char], b: &[char]) -> LcsAlignment {
    let mut best = LcsAlignment::default();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            let len = cur[j];
            if len == 0 {
                continue;
            }
            let cand = (i - len, j - len);
            if len > best.length || (len == best.length && cand < (best.offset_a, best.offset_b)) {
                best = LcsAlignment {
                    offset_a: cand.0,
                    offset_b: cand.1,
                    length: len,
                };
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Derivation,
    Inflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
struct Node {
    word: String,
    len: usize,
}

#[derive(Debug, Clone, Default)]
pub struct DerivGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    boundaries: Vec<Boundaries>,
    /// one alignment per edge, filled by `stem_edges`
    alignments: Vec<LcsAlignment>,
}

impl DerivGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, word: &str) -> usize {
        self.nodes.push(Node {
            word: word.to_owned(),
            len: word.chars().count(),
        });
        self.boundaries.push(Boundaries::new());
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize, kind: EdgeKind) {
        self.edges.push(Edge { a, b, kind });
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn word(&self, node: usize) -> &str {
        &self.nodes[node].word
    }

    pub fn boundaries(&self, node: usize) -> &Boundaries {
        &self.boundaries[node]
    }

    pub fn alignment(&self, edge: usize) -> Option<&LcsAlignment> {
        self.alignments.get(edge)
    }

    /// Returns a copy with the edge list permuted.
    pub fn with_edge_order(&self, order: &[usize]) -> Self {
        let mut g = self.clone();
        g.edges = order.iter().map(|&i| self.edges[i]).collect();
        if !self.alignments.is_empty() {
            g.alignments = order.iter().map(|&i| self.alignments[i]).collect();
        }
        g
    }

    pub fn stem_edges(&mut self) {
        self.stem_edges_with(Exec::default())
    }

    /// Aligns every edge and adds the two cut points of the shared part to
    /// both endpoints (edges of the word are not boundaries).
    pub fn stem_edges_with(&mut self, exec: Exec) {
        let chars: Vec<Vec<char>> = self.nodes.iter().map(|n| n.word.chars().collect()).collect();
        self.alignments = exec.map(&self.edges, |e| lcs_align_chars(&chars[e.a], &chars[e.b]));
        for (e, al) in self.edges.iter().zip(&self.alignments) {
            if al.length == 0 {
                continue;
            }
            for (node, off) in [(e.a, al.offset_a), (e.b, al.offset_b)] {
                let len = self.nodes[node].len;
                for p in [off, off + al.length] {
                    if p > 0 && p < len {
                        self.boundaries[node].insert(p);
                    }
                }
            }
        }
    }

    /// Copies boundaries across edges to a fixpoint.
    ///
    /// A boundary `p` of one endpoint with `off < p < off + length` maps to
    /// `other_off + (p - off)` on the other endpoint. Returns the number of
    /// boundaries added.
    pub fn propagate_boundaries(&mut self) -> usize {
        if self.alignments.len() != self.edges.len() {
            self.stem_edges();
        }
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            incident[e.a].push(i);
            if e.b != e.a {
                incident[e.b].push(i);
            }
        }
        let mut queue: VecDeque<usize> = (0..self.nodes.len()).collect();
        let mut queued = vec![true; self.nodes.len()];
        let mut added = 0;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &ei in &incident[u] {
                let e = self.edges[ei];
                let al = self.alignments[ei];
                if al.length < 2 {
                    continue;
                }
                let (from_off, v, to_off) = if e.a == u {
                    (al.offset_a, e.b, al.offset_b)
                } else {
                    (al.offset_b, e.a, al.offset_a)
                };
                let mapped: Vec<usize> = self.boundaries[u]
                    .range(from_off + 1..from_off + al.length)
                    .map(|&p| to_off + (p - from_off))
                    .collect();
                let mut changed = false;
                for q in mapped {
                    if self.boundaries[v].insert(q) {
                        changed = true;
                        added += 1;
                    }
                }
                if changed && !queued[v] {
                    queued[v] = true;
                    queue.push_back(v);
                }
            }
        }
        added
    }

    /// One entry per surface form; repeated forms take the union.
    pub fn export_lexicon(&self) -> SegmentationLexicon {
        let mut lex = SegmentationLexicon::new();
        for (node, b) in self.nodes.iter().zip(&self.boundaries) {
            lex.insert(&node.word, b.iter().copied());
        }
        lex
    }

    /// Stems, propagates and exports in one go.
    pub fn segment(mut self) -> SegmentationLexicon {
        self.stem_edges();
        self.propagate_boundaries();
        self.export_lexicon()
    }

    /// Reads a derivation forest and an optional lemma→form list.
    ///
    /// Derivation lines are `id<TAB>lemma<TAB>parent` or
    /// `id<TAB>lemma<TAB>techlemma<TAB>pos<TAB>parent`, detected from the
    /// first line. Forms of unknown lemmas get a fresh lemma node.
    pub fn load<R1: BufRead, R2: BufRead>(derivations: R1, inflections: Option<R2>) -> Result<Self> {
        let mut g = DerivGraph::new();
        let mut id_to_node: HashMap<String, usize> = HashMap::new();
        let mut lemma_to_node: HashMap<String, usize> = HashMap::new();
        let mut parent_of: Vec<(usize, String, usize)> = Vec::new();
        let mut columns: Option<usize> = None;

        for (i, line) in derivations.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let ncols = *columns.get_or_insert(fields.len());
            if fields.len() != ncols || !(ncols == 3 || ncols == 5) {
                return Err(Error::format(
                    lineno,
                    format!(
                        "expected 3 or 5 tab-separated columns consistently, got {}",
                        fields.len()
                    ),
                ));
            }
            let (id, lemma, parent) = (fields[0], fields[1], fields[ncols - 1]);
            if id.is_empty() || lemma.is_empty() {
                return Err(Error::format(lineno, "empty id or lemma"));
            }
            let node = g.add_node(lemma);
            if id_to_node.insert(id.to_owned(), node).is_some() {
                return Err(Error::format(lineno, format!("duplicate id `{id}`")));
            }
            lemma_to_node.entry(lemma.to_owned()).or_insert(node);
            if !parent.is_empty() {
                parent_of.push((node, parent.to_owned(), lineno));
            }
        }

        let mut parent: Vec<Option<usize>> = vec![None; g.num_nodes()];
        for (child, pid, lineno) in &parent_of {
            let p = *id_to_node
                .get(pid)
                .ok_or_else(|| Error::format(*lineno, format!("unknown parent id `{pid}`")))?;
            parent[*child] = Some(p);
        }
        check_forest(&parent, &g)?;
        for (child, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                g.add_edge(*p, child, EdgeKind::Derivation);
            }
        }

        if let Some(infl) = inflections {
            for (i, line) in infl.lines().enumerate() {
                let line = line?;
                let lineno = i + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let (lemma, form) = line
                    .split_once('\t')
                    .filter(|(l, f)| !l.is_empty() && !f.is_empty() && !f.contains('\t'))
                    .ok_or_else(|| Error::format(lineno, "expected `lemma<TAB>form`"))?;
                let lemma_node = match lemma_to_node.get(lemma) {
                    Some(&n) => n,
                    None => {
                        let n = g.add_node(lemma);
                        lemma_to_node.insert(lemma.to_owned(), n);
                        n
                    }
                };
                let form_node = g.add_node(form);
                g.add_edge(lemma_node, form_node, EdgeKind::Inflection);
            }
        }
        Ok(g)
    }
}

fn check_forest(parent: &[Option<usize>], g: &DerivGraph) -> Result<()> {
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; parent.len()];
    for start in 0..parent.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(n) = cur {
            match state[n] {
                2 => break,
                1 => return Err(Error::Input(format!("derivation cycle through lemma `{}`", g.word(n)))),
                _ => {
                    state[n] = 1;
                    path.push(n);
                    cur = parent[n];
                }
            }
        }
        for n in path {
            state[n] = 2;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[usize]) -> Boundaries {
        xs.iter().copied().collect()
    }

    fn brute_lcs(a: &str, b: &str) -> LcsAlignment {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut best = LcsAlignment::default();
        for i in 0..a.len() {
            for j in 0..b.len() {
                let mut l = 0;
                while i + l < a.len() && j + l < b.len() && a[i + l] == b[j + l] {
                    l += 1;
                }
                if l > best.length {
                    best = LcsAlignment {
                        offset_a: i,
                        offset_b: j,
                        length: l,
                    };
                }
            }
        }
        best
    }

    #[test]
    fn lcs_examples() {
        let al = |o_a, o_b, length| LcsAlignment {
            offset_a: o_a,
            offset_b: o_b,
            length,
        };
        assert_eq!(lcs_align("mávat", "mávnout"), al(0, 0, 3));
        assert_eq!(lcs_align("mávat", "mávající"), al(0, 0, 4));
        assert_eq!(lcs_align("abc", "xyz"), al(0, 0, 0));
        // ties: leftmost in a, then in b
        assert_eq!(lcs_align("abxab", "ab"), al(0, 0, 2));
        assert_eq!(lcs_align("ab", "xabab"), al(0, 1, 2));
    }

    #[test]
    fn lcs_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let mut w = |n| -> String {
                (0..rng.gen_range(1..=n))
                    .map(|_| ['a', 'b', 'č'][rng.gen_range(0..3)])
                    .collect()
            };
            let a = w(9);
            let b = w(9);
            assert_eq!(lcs_align(&a, &b), brute_lcs(&a, &b), "{a} / {b}");
        }
    }

    fn fixture() -> DerivGraph {
        let mut g = DerivGraph::new();
        let a = g.add_node("mávat");
        let b = g.add_node("mávnout");
        let c = g.add_node("mávající");
        g.add_edge(a, b, EdgeKind::Derivation);
        g.add_edge(a, c, EdgeKind::Derivation);
        g
    }

    #[test]
    fn stemming_fixture() {
        let mut g = fixture();
        g.stem_edges();
        assert_eq!(g.boundaries(0), &set(&[3, 4]));
        assert_eq!(g.boundaries(1), &set(&[3]));
        assert_eq!(g.boundaries(2), &set(&[4]));
    }

    #[test]
    fn propagation_fixture() {
        let mut g = fixture();
        g.stem_edges();
        g.propagate_boundaries();
        assert_eq!(g.boundaries(2), &set(&[3, 4]));
        let lex = g.export_lexicon();
        assert_eq!(lex.morphs("mávat").unwrap(), ["máv", "a", "t"]);
        assert_eq!(lex.morphs("mávnout").unwrap(), ["máv", "nout"]);
        assert_eq!(lex.morphs("mávající").unwrap(), ["máv", "a", "jící"]);
    }

    #[test]
    fn degenerate_edges() {
        let mut g = DerivGraph::new();
        let a = g.add_node("abc");
        let b = g.add_node("abc");
        g.add_edge(a, b, EdgeKind::Inflection);
        g.stem_edges();
        assert!(g.boundaries(0).is_empty() && g.boundaries(1).is_empty());

        let mut g = DerivGraph::new();
        let a = g.add_node("abc");
        let b = g.add_node("abd");
        let c = g.add_node("xyz");
        g.add_edge(a, b, EdgeKind::Derivation);
        g.add_edge(a, c, EdgeKind::Derivation);
        g.stem_edges();
        assert_eq!(g.boundaries(0), &set(&[2]));
        assert_eq!(g.boundaries(1), &set(&[2]));
        assert!(g.boundaries(2).is_empty());
    }

    #[test]
    fn boundary_at_alignment_edge_not_copied() {
        let mut g = DerivGraph::new();
        let a = g.add_node("xabcd");
        let b = g.add_node("abcy");
        g.add_edge(a, b, EdgeKind::Derivation);
        g.stem_edges();
        // alignment "abc" at (1, 0); a gets {1, 4}, b gets {3}
        g.boundaries[a].insert(2);
        g.boundaries[b].insert(1);
        g.propagate_boundaries();
        assert_eq!(g.boundaries(a), &set(&[1, 2, 4]));
        assert_eq!(g.boundaries(b), &set(&[1, 3]));
    }

    #[test]
    fn chain_propagation() {
        // b shares "abcde" with a and "abcd" with c; only a has the inner cut at 2
        let mut g = DerivGraph::new();
        let a = g.add_node("abcdeX");
        let b = g.add_node("abcdeYY");
        let c = g.add_node("abcdZ");
        g.add_edge(a, b, EdgeKind::Derivation);
        g.add_edge(b, c, EdgeKind::Derivation);
        g.stem_edges();
        g.boundaries[a].insert(2);
        g.propagate_boundaries();
        assert!(g.boundaries(b).contains(&2));
        assert!(g.boundaries(c).contains(&2));
    }

    #[test]
    fn export_merges_duplicates() {
        let mut g = DerivGraph::new();
        let a = g.add_node("pec");
        let b = g.add_node("pec");
        g.boundaries[a].insert(1);
        g.boundaries[b].insert(2);
        assert_eq!(g.export_lexicon().get("pec").unwrap(), &set(&[1, 2]));
        assert!(DerivGraph::new().export_lexicon().is_empty());
    }

    #[test]
    fn loading_three_and_five_columns() {
        let three = "1\tmávat\t\n2\tmávnout\t1\n3\tmávající\t1\n";
        let g = DerivGraph::load(three.as_bytes(), None::<&[u8]>).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges().len(), 2);

        let five = "1\tmávat\tmávat_:T\tV\t\n2\tmávnout\tx\tV\t1\n";
        let infl = "mávat\tmává\nplavat\tplave\n";
        let g = DerivGraph::load(five.as_bytes(), Some(infl.as_bytes())).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.edges().len(), 3);
        assert!(g.edges().iter().filter(|e| e.kind == EdgeKind::Inflection).count() == 2);
    }

    #[test]
    fn loading_rejects_cycles_and_bad_rows() {
        let cyc = "1\ta\t2\n2\tb\t1\n";
        assert!(DerivGraph::load(cyc.as_bytes(), None::<&[u8]>).is_err());
        let selfloop = "1\ta\t1\n";
        assert!(DerivGraph::load(selfloop.as_bytes(), None::<&[u8]>).is_err());
        let missing = "1\ta\t9\n";
        assert!(DerivGraph::load(missing.as_bytes(), None::<&[u8]>).is_err());
        let mixed = "1\ta\t\n2\tb\tx\ty\t1\n";
        assert!(DerivGraph::load(mixed.as_bytes(), None::<&[u8]>).is_err());
    }
}
