//! SQuAD-style exact match and token F1.
//!
//! cargo run -p qagkit --example qa_metrics

use std::collections::BTreeMap;

use qagkit::{corpus_scores, exact_match, normalize, token_f1};

fn main() -> qagkit::Result<()> {
    let gold = vec!["the Eiffel Tower".to_string(), "Eiffel Tower in Paris".to_string()];
    for pred in ["Eiffel tower!", "the tower", "Louvre", ""] {
        println!(
            "{pred:<15} normalized={:<14} em={} f1={:.3}",
            format!("{:?}", normalize(pred)),
            exact_match(pred, &gold),
            token_f1(pred, &gold)
        );
    }

    let predictions = BTreeMap::from([
        ("q1".to_string(), "Paris".to_string()),
        ("q2".to_string(), "in 1889".to_string()),
    ]);
    let answers = BTreeMap::from([
        ("q1".to_string(), vec!["Paris".to_string()]),
        ("q2".to_string(), vec!["1889".to_string()]),
    ]);
    let scores = corpus_scores(&predictions, &answers)?;
    println!("\ncorpus F1/EM: {scores}");

    let mut partial = answers.clone();
    partial.insert("q3".into(), vec!["Gustave Eiffel".into()]);
    if let Err(e) = corpus_scores(&predictions, &partial) {
        println!("unmatched ids: {e}");
    }
    Ok(())
}
