//! Trains on a synthetic graph and prints held-out metrics.
//!
//! `cargo run --release --example synthetic -- pattern house 5 4 1 2000 64 16 6 1 0.01 0 0`
//! (kind variant d k m steps b l gamma alpha lr lambda seed)

use std::time::Instant;

use house_kge::data::build_filter_index;
use house_kge::evaluator::{evaluate, per_relation_report};
use house_kge::synth::{generate_many_to_one_kg, generate_pattern_kg, ManyToOneMix, PatternMix};
use house_kge::{init_parameters, train, ModelConfig, TrainConfig, Variant};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let kind = arg(0, "pattern");
    let variant: Variant = arg(1, "house").parse().expect("variant");
    let num = |i: usize, d: &str| arg(i, d).parse::<f64>().expect("number");
    let (d, k, m) = (num(2, "5") as usize, num(3, "4") as usize, num(4, "1") as usize);
    let seed = num(12, "0") as u64;
    let cfg = TrainConfig {
        max_steps: num(5, "2000") as u64,
        b: num(6, "64") as usize,
        l: num(7, "16") as usize,
        gamma: num(8, "6"),
        alpha: num(9, "1"),
        lr: num(10, "0.01"),
        lambda: num(11, "0"),
        valid_every: std::env::var("VE").ok().and_then(|v| v.parse().ok()).unwrap_or(0),
        halve_after: 0,
        seed,
        ..TrainConfig::default()
    };
    let (store, vocab) = if kind == "pattern" {
        let env = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
        let mix = PatternMix {
            composition_chains: env("COMP", 12.0) as usize,
            holdout_fraction: env("HOLD", 0.3),
            ..PatternMix::default()
        };
        let (v, s, _) = generate_pattern_kg(50, &mix, seed);
        (s, v)
    } else {
        let env = |k: &str, d: usize| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
        let base = ManyToOneMix::default();
        let mix = ManyToOneMix {
            groups: env("GROUPS", base.groups),
            heads_per_group: env("HPG", base.heads_per_group),
            many_to_one_relations: env("MREL", base.many_to_one_relations),
            ..base
        };
        let (v, s, _) = generate_many_to_one_kg(&mix, seed);
        (s, v)
    };
    let filter = build_filter_index(&store);
    let model_cfg = ModelConfig::new(variant, d, k, m, store.num_entities, store.num_relations, seed)
        .unwrap()
        .with_init_gamma(std::env::var("INITG").ok().and_then(|v| v.parse().ok()).unwrap_or(12.0));
    let start = Instant::now();
    let out = train(init_parameters(&model_cfg).unwrap(), &store, &filter, &cfg).unwrap();
    for e in &out.log {
        println!("{}", e.tsv());
    }
    println!("train seconds {:.1}", start.elapsed().as_secs_f64());
    let heldout: Vec<_> = store.valid.iter().chain(&store.test).copied().collect();
    println!("held-out {}", evaluate(&out.model, &heldout, &filter).unwrap());
    println!("train {}", evaluate(&out.model, &store.train, &filter).unwrap());
    let overall = evaluate(&out.model, &heldout, &filter).unwrap();
    let mut summary = format!("summary h1 {:.3} mrr {:.3}", overall.hits1, overall.mrr);
    for (r, m) in per_relation_report(&out.model, &heldout, &filter).unwrap() {
        println!("  {:20} {m}", vocab.relations.name(r).unwrap());
        summary += &format!(" | {} {:.3}/{:.3}", vocab.relations.name(r).unwrap(), m.hits1, m.mrr);
    }
    println!("{summary}");
    if std::env::var("TAUS").is_ok() {
        for r in 0..store.num_relations {
            let f = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
            println!("  {:20} head tau {} | tail tau {}", vocab.relations.name(r).unwrap(), f(out.model.head_taus.row(r)), f(out.model.tail_taus.row(r)));
        }
    }
}
