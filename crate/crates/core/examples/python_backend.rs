//! Generating with a real seq2seq checkpoint through the Python worker.
//!
//! cargo run -p qagkit --example python_backend -- path/to/checkpoint "Some paragraph."
//!
//! Needs python3 with torch and transformers (or QAG_PYTHON pointing at one).

use qagkit::{load_backend, parse_flat, EncodingConfig, GenerationRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let Some(checkpoint) = args.next() else {
        eprintln!("usage: python_backend <checkpoint dir or hub name> [paragraph]");
        std::process::exit(2);
    };
    let paragraph = args
        .next()
        .unwrap_or_else(|| "The Eiffel Tower was completed in 1889 for the World's Fair in Paris.".into());

    let mut model = load_backend(&format!("hf:{checkpoint}"))?;
    println!("loaded {}", model.identity());
    let request = GenerationRequest::new(paragraph, 256).with_returns(2);
    for (rank, g) in model.generate(&[request])?.remove(0).outputs.iter().enumerate() {
        println!("#{rank} ll={:.3} {}", g.log_likelihood, g.text);
        let parsed = parse_flat(&g.text, &EncodingConfig::default());
        for p in parsed.pairs {
            println!("    {} -> {}", p.question(), p.answer());
        }
    }
    Ok(())
}
