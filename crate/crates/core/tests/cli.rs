mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::{subseg, synthetic_corpus};
use tempfile::TempDir;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        Work {
            dir: TempDir::new().unwrap(),
        }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = subseg(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

const SRC: &str = "mávat rukou .\nmávnout a mávající\n";
const TGT: &str = "wave a hand .\nwave\n";

#[test]
fn stats_reports_fixed_keys() {
    let w = Work::new();
    let (a, b) = (w.file("a.txt", SRC), w.file("b.txt", TGT));
    let out = ok(&["stats", "--src", s(&a), "--tgt", s(&b)]);
    assert_eq!(
        out,
        "tokens_src\t6\ntokens_tgt\t5\ntypes_src\t6\ntypes_tgt\t4\nshared_pct\t25.00\n"
    );
}

#[test]
fn usage_errors_exit_two() {
    let w = Work::new();
    let a = w.file("a.txt", SRC);
    let cases: Vec<Vec<&str>> = vec![
        vec!["train-bpe", "--merges", "-5", "--input", s(&a)],
        vec![
            "train-bpe",
            "--merges",
            "5",
            "--input",
            s(&a),
            "--src",
            s(&a),
            "--tgt",
            s(&a),
        ],
        vec!["train-bpe", "--merges", "5", "--src", s(&a)],
        vec!["train-bpe", "--merges", "5"],
        vec!["train-ste", "--target-size", "0", "--input", s(&a)],
        vec!["frobnicate"],
        vec!["stats", "--src", s(&a)],
        vec!["undo-splits", "--convention", "sideways"],
        vec!["--threads", "0", "stats", "--src", s(&a), "--tgt", s(&a)],
    ];
    for args in cases {
        let (code, out, err) = subseg(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(out.is_empty());
        assert!(!err.is_empty());
    }
}

#[test]
fn data_errors_exit_one() {
    let w = Work::new();
    let bad_lex = w.file("bad.tsv", "mávat\tmá vt\n");
    let corpus = w.file("c.txt", SRC);
    let missing = w.path("nope.txt");
    let (code, _, err) = subseg([
        "apply-lexicon",
        "--lexicon",
        s(&bad_lex),
        "--convention",
        "continuation",
        "-i",
        s(&corpus),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("line 1"), "{err}");
    let (code, ..) = subseg(["stats", "--src", s(&missing), "--tgt", s(&corpus)]);
    assert_eq!(code, 1);
    let none_model = w.path("none.bpe");
    ok(&[
        "train-bpe",
        "--merges",
        "3",
        "--input",
        s(&corpus),
        "-o",
        s(&none_model),
    ]);
    let (code, ..) = subseg([
        "apply-bpe",
        "--model",
        s(&none_model),
        "--convention",
        "end-marker",
        "-i",
        s(&corpus),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn eval_on_worked_fixture() {
    let w = Work::new();
    let gold = w.file("gold.tsv", "mávat\tmáv a t\n");
    let pred = w.file("pred.tsv", "mávat\tmáva@@ t\n");
    let out = ok(&["eval", "--gold", s(&gold), "--pred", s(&pred)]);
    assert!(out.contains("morph_f1\t40.00\n"), "{out}");
    assert!(out.contains("bnd_f1\t66.67\n"), "{out}");
    assert!(out.contains("word_acc\t0.00\n"), "{out}");
}

#[test]
fn apply_commands_are_line_filters() {
    let w = Work::new();
    let text: String = synthetic_corpus(3, 20_000).to_text() + "\n\n";
    let corpus = w.file("corpus.txt", &text);
    let n = text.lines().count();
    let bpe = w.path("m.bpe");
    let ste = w.path("m.ste");
    let lex = w.file("lex.tsv", "mávat\tmáv a t\n");
    let manifest = w.path("m.compose");
    ok(&[
        "train-bpe",
        "--merges",
        "200",
        "--underscore",
        "every",
        "--input",
        s(&corpus),
        "-o",
        s(&bpe),
    ]);
    ok(&[
        "train-ste",
        "--target-size",
        "300",
        "--input",
        s(&corpus),
        "-o",
        s(&ste),
    ]);
    ok(&["compose", "--lexicon", s(&lex), "--post", s(&bpe), "-o", s(&manifest)]);
    let runs: Vec<Vec<&str>> = vec![
        vec!["apply-bpe", "--model", s(&bpe)],
        vec!["apply-bpe", "--model", s(&bpe), "--convention", "end-marker"],
        vec!["apply-ste", "--vocab", s(&ste)],
        vec!["apply-lexicon", "--lexicon", s(&lex), "--convention", "end-marker"],
        vec!["apply-composed", "--manifest", s(&manifest)],
        vec!["undo-splits", "--convention", "continuation"],
    ];
    for mut args in runs {
        args.extend(["-i", s(&corpus)]);
        let out = ok(&args);
        assert_eq!(out.lines().count(), n, "{args:?}");
    }
}

#[test]
fn pipelines_round_trip() {
    let w = Work::new();
    let text = synthetic_corpus(5, 30_000).to_text();
    let corpus = w.file("corpus.txt", &text);
    let bpe = w.path("m.bpe");
    let ste = w.path("m.ste");
    ok(&[
        "train-bpe",
        "--merges",
        "300",
        "--underscore",
        "non-final",
        "--input",
        s(&corpus),
        "-o",
        s(&bpe),
    ]);
    ok(&[
        "train-ste",
        "--target-size",
        "400",
        "--input",
        s(&corpus),
        "-o",
        s(&ste),
    ]);

    let deriv = w.file("deriv.tsv", "1\tmávat\t\n2\tmávnout\t1\n3\tmávající\t1\n");
    let lex = w.path("lex.tsv");
    ok(&["build-derinet", "--derivations", s(&deriv), "-o", s(&lex)]);
    assert_eq!(
        fs::read_to_string(&lex).unwrap(),
        "mávající\tmáv a jící\nmávat\tmáv a t\nmávnout\tmáv nout\n"
    );

    let sample = w.file("sample.txt", &(text.clone() + "mávat a mávnout x\\@ mávající .\n"));
    let original = fs::read_to_string(&sample).unwrap();
    for (post, kind) in [(&bpe, "bpe"), (&ste, "ste")] {
        let manifest = w.path(&format!("{kind}.compose"));
        ok(&["compose", "--lexicon", s(&lex), "--post", s(post), "-o", s(&manifest)]);
        let enc = w.path(&format!("{kind}.enc"));
        ok(&[
            "apply-composed",
            "--manifest",
            s(&manifest),
            "-i",
            s(&sample),
            "-o",
            s(&enc),
        ]);
        let mut undo = vec!["undo-splits", "-i", s(&enc)];
        if kind == "ste" {
            undo.extend(["--convention", "end-marker", "--unescape"]);
        } else {
            undo.extend(["--convention", "continuation"]);
        }
        assert!(ok(&undo) == original, "{kind} composed round trip");
    }

    let enc = w.path("bpe.end");
    ok(&[
        "apply-bpe",
        "--model",
        s(&bpe),
        "--convention",
        "end-marker",
        "-i",
        s(&sample),
        "-o",
        s(&enc),
    ]);
    assert!(ok(&["undo-splits", "--convention", "end-marker", "-i", s(&enc)]) == original);
}

#[test]
fn train_outputs_identical_across_runs_and_threads() {
    let w = Work::new();
    let corpus = w.file("corpus.txt", &synthetic_corpus(9, 40_000).to_text());
    let mut seen: Vec<(String, Vec<u8>)> = Vec::new();
    for threads in ["1", "4", "1", "4"] {
        let bpe = w.path("m.bpe");
        let ste = w.path("m.ste");
        ok(&[
            "--threads",
            threads,
            "train-bpe",
            "--merges",
            "400",
            "--input",
            s(&corpus),
            "-o",
            s(&bpe),
        ]);
        ok(&[
            "--threads",
            threads,
            "train-ste",
            "--target-size",
            "500",
            "--input",
            s(&corpus),
            "-o",
            s(&ste),
        ]);
        for p in [bpe, ste] {
            let bytes = fs::read(&p).unwrap();
            let key = p.file_name().unwrap().to_string_lossy().into_owned();
            match seen.iter().find(|(k, _)| *k == key) {
                Some((_, first)) => assert!(*first == bytes, "{key} differs at --threads {threads}"),
                None => seen.push((key, bytes)),
            }
        }
    }
}

#[test]
fn import_and_histogram() {
    let w = Work::new();
    let ext = w.file("ext.txt", "mávat\tmáv a t\nruka\tr uk a\n");
    let lex = w.path("lex.tsv");
    ok(&["import-segmentation", "--input", s(&ext), "-o", s(&lex)]);
    assert_eq!(fs::read_to_string(&lex).unwrap(), "mávat\tmáv a t\nruka\tr uk a\n");
    let broken = w.file("broken.txt", "mávat\tmáv t\n");
    assert_eq!(subseg(["import-segmentation", "--input", s(&broken)]).0, 1);

    let corpus = w.file("c.txt", "ruka mávat ruka\nruka .\n");
    let out = ok(&["histogram", "--model", s(&lex), "--counts", s(&corpus)]);
    assert_eq!(out, "1\t1\t3.0000\t1\n2\t3\t2.0000\t2\n");
}

#[test]
fn overlap_reports_both_measures() {
    let w = Work::new();
    let vocab = w.file("v.txt", "a\nb\nc\nd\n");
    let src = w.file("s.txt", "a b\nc\n");
    let tgt = w.file("t.txt", "c d\n");
    let out = ok(&[
        "overlap",
        "--vocab",
        s(&vocab),
        "--src-used",
        s(&src),
        "--tgt-used",
        s(&tgt),
    ]);
    assert_eq!(out, "shared_vocab_pct\t25.00\nused_overlap_pct\t25.00\n");
}

#[test]
fn threads_env_var_is_honoured() {
    let w = Work::new();
    let a = w.file("a.txt", SRC);
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_subseg"))
        .args(["stats", "--src", s(&a), "--tgt", s(&a)])
        .env("SUBSEG_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
