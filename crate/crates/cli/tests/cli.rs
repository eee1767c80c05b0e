//! Command-line behaviour: exit codes, file outputs and small examples.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use grammol::grammar::Grammar;

fn grammol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grammol"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A quick untrained grammar for the chain extenders.
fn small_grammar(dir: &Path) -> PathBuf {
    let o = grammol(&[
        "--out", path(dir), "train", "--dataset", "builtin:chain_extenders",
        "--epochs", "0", "--mc-samples", "2", "--eval-generations", "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("grammar.json")
}

#[test]
fn datasets_are_bundled_with_expected_sizes() {
    let o = grammol(&["datasets"]);
    assert!(o.status.success());
    let listing = stdout(&o);
    for id in ["isocyanates", "acrylates", "chain_extenders"] {
        assert!(listing.contains(id), "{listing}");
    }
    for (id, n) in [("isocyanates", 11), ("acrylates", 32), ("chain_extenders", 11)] {
        let o = grammol(&["datasets", "--show", id]);
        let text = stdout(&o);
        let lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count();
        assert_eq!(lines, n, "{id}");
    }
}

#[test]
fn hgraph_dumps_rings_and_bonds() {
    let o = grammol(&["hgraph", "--smiles", "c1ccccc1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# 6 nodes, 1 edges\n"), "{text}");
    assert!(text.contains(" 6 ring6:aromatic 0,1,2,3,4,5"), "{text}");

    let o = grammol(&["hgraph", "--smiles", "OCCO"]);
    assert!(stdout(&o).contains("3 edges"), "{}", stdout(&o));
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(grammol(&["hgraph", "--smiles", "C1CC"]).status.code(), Some(1));
    assert_eq!(grammol(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(grammol(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.smi");
    std::fs::write(&empty, "").unwrap();
    let o = grammol(&["--out", path(dir.path()), "train", "--dataset", path(&empty)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).to_lowercase().contains("empty"), "{}", stderr(&o));

    let o = grammol(&["train", "--dataset", path(&dir.path().join("missing.smi"))]);
    assert_eq!(o.status.code(), Some(1));

    let grammar = dir.path().join("grammar.json");
    std::fs::write(&grammar, "").unwrap();
    assert_eq!(grammol(&["rules", "--grammar", path(&grammar)]).status.code(), Some(1));
    std::fs::write(&grammar, "{\"format\": 3}").unwrap();
    let o = grammol(&["generate", "--grammar", path(&grammar), "-n", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_membership_pattern_lists_the_choices() {
    let o = grammol(&[
        "evaluate", "--generated", "builtin:acrylates", "--train", "builtin:acrylates",
        "--membership", "nitrile",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for id in ["isocyanate", "acrylate", "chain_extender"] {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn evaluating_the_training_set_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = grammol(&[
        "evaluate", "--generated", "builtin:isocyanates", "--train", "builtin:isocyanates",
        "--report", path(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let m = &doc["metrics"];
    assert_eq!(m["novelty"].as_f64(), Some(0.0));
    assert_eq!(m["chamfer"].as_f64(), Some(0.0));
    assert_eq!(m["validity"].as_f64(), Some(1.0));
    assert_eq!(m["membership"].as_f64(), Some(1.0));
    assert!((m["diversity"].as_f64().unwrap() - 0.61).abs() <= 0.05);
    assert_eq!(doc["provenance"]["inputs"].as_array().unwrap().len(), 2);
    assert!(stdout(&o).contains("diversity"));
}

#[test]
fn external_scorer_failures_do_not_abort_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = grammol(&[
        "evaluate", "--generated", "builtin:chain_extenders", "--train", "builtin:chain_extenders",
        "--external", "length=awk '{ print length($0) }'",
        "--external", "broken=echo nope",
        "--report", path(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let m = &doc["metrics"];
    assert!(m["external:length"].as_f64().unwrap() > 1.0);
    assert!(m["external:broken"]["error"].as_str().unwrap().contains("expected 11 scores"));
    let table = stdout(&o);
    let row = table.lines().find(|l| l.starts_with("external:broken")).unwrap();
    assert!(row.contains("error"), "{row}");
    assert!(m["uniqueness"].as_f64().is_some());
}

#[test]
fn train_writes_artifacts_that_agree() {
    let dir = tempfile::tempdir().unwrap();
    let grammar = small_grammar(dir.path());
    let g = Grammar::from_json(&std::fs::read_to_string(&grammar).unwrap()).unwrap();
    assert_eq!(g.provenance().len(), 11);
    let steps: usize = g.provenance().iter().map(|d| d.steps.len()).sum();
    assert_eq!(g.total_count(), steps);

    let log = std::fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    let ckpt = std::fs::read_to_string(dir.path().join("checkpoint.json")).unwrap();
    assert!(ckpt.contains("grammol-potential"));

    let o = grammol(&["rules", "--grammar", path(&grammar)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    assert!(header.contains(&format!("{} of {} rules", g.len(), g.len())), "{header}");
    let listed: usize = text
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(listed, steps);
}

#[test]
fn generate_writes_exactly_n_valid_lines() {
    let dir = tempfile::tempdir().unwrap();
    let grammar = small_grammar(dir.path());
    let out = dir.path().join("gen.smi");
    let o = grammol(&["generate", "--grammar", path(&grammar), "-n", "50", "-o", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 50);
    for line in text.lines() {
        let m = grammol::molgraph::parse_smiles(line).unwrap();
        assert_eq!(m.canonical_smiles(), line);
        assert!(grammol::metrics::is_valid(&m));
    }

    let o = grammol(&["generate", "--grammar", path(&grammar), "-n", "0", "-o", path(&out)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let grammar = small_grammar(dir.path());
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# sampling\ncount = 4\nalpha = 0.25\n").unwrap();
    let out = dir.path().join("gen.smi");
    let run = |extra: &[&str]| {
        let mut args = vec!["--config", path(&cfg), "generate", "--grammar", path(&grammar), "-o", path(&out)];
        args.extend_from_slice(extra);
        assert!(grammol(&args).status.success());
        std::fs::read_to_string(&out).unwrap().lines().count()
    };
    assert_eq!(run(&[]), 4);
    assert_eq!(run(&["-n", "6"]), 6);

    std::fs::write(&cfg, "count = 4\ncount = 5\n").unwrap();
    let o = grammol(&["--config", path(&cfg), "generate", "--grammar", path(&grammar)]);
    assert_eq!(o.status.code(), Some(1));
}
