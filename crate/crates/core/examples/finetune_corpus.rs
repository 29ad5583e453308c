//! Building fine-tuning corpora from quadruples and resolving hyperparameters.
//!
//! cargo run -p qagkit --example finetune_corpus

use std::path::PathBuf;

use qagkit::finetune::{build_corpus_for, default_hyperparams, finetune, shuffle_corpus, Task};
use qagkit::types::read_quadruples;
use qagkit::{Approach, EncodingConfig, FinetuneConfig, MockBackend};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/quads.jsonl");
    let quads = read_quadruples(path)?;
    let enc = EncodingConfig::default();

    for approach in [Approach::PipelineAe, Approach::PipelineQg, Approach::Multitask, Approach::End2end] {
        let corpus = build_corpus_for(approach, &quads, &enc);
        println!(
            "{:<12} {:>4} examples (ae {}, qg {}, end2end {}), {} truncated",
            approach.as_str(),
            corpus.len(),
            corpus.count(Task::Ae),
            corpus.count(Task::Qg),
            corpus.count(Task::End2end),
            corpus.truncated
        );
    }

    let mut corpus = build_corpus_for(Approach::End2end, &quads, &enc);
    println!("\n{}\n=> {}\n", corpus.examples[0].input_text, corpus.examples[0].target_text);

    for model in ["facebook/bart-base", "t5-large", "my-own-model"] {
        match default_hyperparams(model, Approach::End2end) {
            Some(h) => println!("{model}: {h:?}"),
            None => println!("{model}: not registered, pass all four hyperparameters"),
        }
    }

    let cfg = FinetuneConfig::lookup("t5-small", Approach::End2end, 42)?;
    shuffle_corpus(&mut corpus.examples, cfg.seed);
    let mut model = MockBackend::empty();
    finetune(&mut model, &corpus.examples, &[], &cfg)?;
    // the mock only records what it was asked to do
    println!("\nmock fine-tune: {:?}", model.finetune_calls()[0]);
    Ok(())
}
