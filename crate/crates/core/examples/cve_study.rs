//! Trains both taggers on the synthetic CVE corpus and prints test metrics.
//!
//! `cargo run --release -p seqlab --example cve_study -- [dim] [hidden] [epochs] [baseline_epochs]`

use std::time::Instant;

use seqlab::corpus::split_corpus;
use seqlab::crf::baseline::{train_baseline, BaselineConfig};
use seqlab::eval::{build_report, ScoringMode};
use seqlab::synthetic::{cap_type_spans, generate_cve_corpus, span_counts, CveConfig, CVE_TYPES};
use seqlab::tagger::{fit_tagger, ModelConfig, TrainOptions};
use seqlab::training::{SequenceTagger, TrainData};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> seqlab::Result<()> {
    let (dim, hidden, epochs, base_epochs) = (arg(1, 50), arg(2, 50), arg(3, 10), arg(4, 30));
    let corpus = generate_cve_corpus(&CveConfig::default());
    let split = split_corpus(&corpus, 42)?;
    let train = cap_type_spans(&split.train, &["hardware", "edition"], 50);
    println!("train {} dev {} test {}", train.len(), split.dev.len(), split.test.len());
    println!("train spans {:?}", span_counts(&train));
    let data = TrainData { train: &train, dev: &split.dev, test: Some(&split.test) };

    let started = Instant::now();
    let config = BaselineConfig { epochs: base_epochs, ..BaselineConfig::default() };
    let (baseline, _) = train_baseline(data, None, &config, |r| println!("crf {}", r.log_line()))?;
    println!("baseline {:.1?}", started.elapsed());

    let started = Instant::now();
    let model_config = ModelConfig { embedding_dim: dim, hidden, ..ModelConfig::default() };
    let options = TrainOptions { epochs, ..TrainOptions::default() };
    let (tagger, _) = fit_tagger(data, None, &model_config, &options, |r| {
        println!("lstm {} {:.1?}", r.log_line(), r.wall_time)
    })?;
    println!("tagger {:.1?}", started.elapsed());

    for (name, model) in [("crf", &baseline as &dyn SequenceTagger), ("lstm", &tagger)] {
        let pred = model.tag_corpus(&split.test);
        let report = build_report(&split.test, &pred, model.tagset(), Some(&CVE_TYPES), ScoringMode::Entity)?;
        let rows: Vec<String> = report.selected.as_ref().unwrap().0.iter().map(|r| format!("{}={:.3}", r.entity_type, r.f1)).collect();
        println!("{name} acc {:.4} {}", report.token_accuracy, rows.join(" "));
    }
    Ok(())
}
