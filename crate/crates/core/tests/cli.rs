//! End-to-end runs of the `housekge` binary.

use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, Output};

use house_kge::cli::exit;
use house_kge::data::{write_dataset, Interner, Triple, TripleStore, Vocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn housekge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_housekge")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().to_string()
}

fn gen_synth(dir: &Path) {
    let out = housekge(&["gen-synth", "--entities", "50", "--out", &s(dir)]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
}

/// MRR column of the data row in a metrics table.
fn read_mrr(path: &Path) -> f64 {
    let text = std::fs::read_to_string(path).unwrap();
    let row = text.lines().nth(1).expect("data row");
    row.split('\t').nth(2).unwrap().parse().unwrap()
}

#[test]
fn gen_synth_then_train_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("kg");
    gen_synth(&data);
    for f in ["train.txt", "valid.txt", "test.txt", "entities.dict", "relations.dict"] {
        assert!(data.join(f).is_file(), "missing {f}");
    }
    let run = dir.path().join("run");
    let out = housekge(&["train", "--data", &s(&data), "--out", &s(&run), "--max-steps", "100", "--valid-every", "50"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["train_log.tsv", "model.ckpt", "test_metrics.tsv", "test_per_relation.tsv", "test_rmp.tsv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let log = std::fs::read_to_string(run.join("train_log.tsv")).unwrap();
    assert!(log.lines().count() >= 3);
}

#[test]
fn eval_requires_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    gen_synth(dir.path());
    assert_eq!(code(&housekge(&["eval", "--data", &s(dir.path())])), exit::USAGE);
    let missing = dir.path().join("nope.ckpt");
    assert_eq!(code(&housekge(&["eval", "--data", &s(dir.path()), "--checkpoint", &s(&missing)])), exit::CHECKPOINT);
}

#[test]
fn eval_rejects_a_checkpoint_of_another_variant() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("kg");
    gen_synth(&data);
    let run = dir.path().join("run");
    let out = housekge(&["train", "--data", &s(&data), "--out", &s(&run), "--variant", "house-r", "--max-steps", "0"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = s(&run.join("model.ckpt"));
    let args = ["eval", "--data", &s(&data), "--checkpoint", &ckpt, "--out", &s(&run)];
    assert_eq!(code(&housekge(&[&args[..], &["--variant", "house"]].concat())), exit::CHECKPOINT);
    assert_eq!(code(&housekge(&[&args[..], &["--variant", "house-r"]].concat())), exit::OK);
}

#[test]
fn missing_data_and_bad_values_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let absent = s(&dir.path().join("absent"));
    assert_eq!(code(&housekge(&["train", "--data", &absent])), exit::MISSING_PATH);
    assert_eq!(code(&housekge(&["train", "--data", &absent, "--k", "1"])), exit::INVALID_VALUE);
    assert_eq!(code(&housekge(&["frobnicate"])), exit::USAGE);
}

#[test]
fn property_suite_passes_for_k8() {
    let out = housekge(&["test-props", "--k", "8"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

/// Expected MRR when the target's position among the remaining candidates
/// is uniform, estimated by sampling.
fn monte_carlo_random_mrr(candidates: &[usize], rng: &mut ChaCha8Rng) -> f64 {
    let draws = 2000;
    let mut total = 0.0;
    for _ in 0..draws {
        for &n in candidates {
            total += 1.0 / (1 + rng.random_range(0..n)) as f64;
        }
    }
    total / (draws * candidates.len()) as f64
}

#[test]
fn untrained_model_ranks_like_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (entities, relations) = (300, 3);
    let mut seen = HashSet::new();
    let mut triples = Vec::new();
    while triples.len() < 900 {
        let t = Triple::new(rng.random_range(0..entities), rng.random_range(0..relations), rng.random_range(0..entities));
        if seen.insert(t) {
            triples.push(t);
        }
    }
    let test = triples.split_off(650);
    let valid = triples.split_off(600);
    let store = TripleStore { train: triples, valid, test, num_entities: entities, num_relations: relations };
    let mut vocab = Vocab { entities: Interner::default(), relations: Interner::default() };
    (0..entities).for_each(|e| {
        vocab.entities.intern(&format!("e{e}"));
    });
    (0..relations).for_each(|r| {
        vocab.relations.intern(&format!("r{r}"));
    });
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("kg");
    write_dataset(&data, &vocab, &store).unwrap();

    let run = dir.path().join("run");
    let out = housekge(&["train", "--data", &s(&data), "--out", &s(&run), "--max-steps", "0", "--d", "8"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = s(&run.join("model.ckpt"));
    let eval_dir = dir.path().join("eval");
    let out = housekge(&["eval", "--data", &s(&data), "--checkpoint", &ckpt, "--out", &s(&eval_dir)]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let mrr = read_mrr(&eval_dir.join("test_metrics.tsv"));

    // candidates left after filtering, per query
    let all: HashSet<Triple> = store.all().copied().collect();
    let mut candidates = Vec::new();
    for t in &store.test {
        let tails = (0..entities).filter(|&c| c == t.tail || !all.contains(&Triple::new(t.head, t.relation, c))).count();
        let heads = (0..entities).filter(|&c| c == t.head || !all.contains(&Triple::new(c, t.relation, t.tail))).count();
        candidates.extend([tails, heads]);
    }
    let chance = monte_carlo_random_mrr(&candidates, &mut rng);
    assert!((mrr - chance).abs() < 0.02, "untrained MRR {mrr:.4}, chance {chance:.4}");
}
