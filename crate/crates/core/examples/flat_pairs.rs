//! Flattening pairs into one target string and parsing model output back.
//!
//! cargo run -p qagkit --example flat_pairs

use qagkit::{flatten_pairs, parse_flat, EncodingConfig, QAPair, Strategy};

fn main() -> qagkit::Result<()> {
    let cfg = EncodingConfig::default();
    let pairs = vec![
        QAPair::new("Who met Bob?", "Ann", Strategy::Gold)?,
        QAPair::new("Where did Bob move?", "Rome", Strategy::Gold)?,
    ];
    let flat = flatten_pairs(&pairs, &cfg)?;
    println!("{flat}");

    let back = parse_flat(&flat, &cfg);
    assert_eq!(back.pairs.len(), 2);

    // sloppy output: missing spaces, a junk segment, a trailing separator
    let noisy = "question:Who met Bob?,answer: Ann | no markers here | question: Why?, answer: luck |";
    let parsed = parse_flat(noisy, &cfg);
    for p in &parsed.pairs {
        println!("{:<20} -> {}", p.question(), p.answer());
    }
    println!("dropped segments: {}", parsed.dropped);

    // the separator is reserved inside fields
    assert!(QAPair::new("a | b?", "c", Strategy::Gold).is_err());
    Ok(())
}
