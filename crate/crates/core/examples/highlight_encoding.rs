//! Sentence and answer highlighting, and its inverse.
//!
//! cargo run -p qagkit --example highlight_encoding

use qagkit::encoding::{encode_ae_input, encode_qg_input, remove_highlights};
use qagkit::{Context, EncodingConfig};

fn main() -> qagkit::Result<()> {
    let cfg = EncodingConfig::default();
    let ctx = Context::new("c1", "Ann met Bob in Paris. Bob moved to Rome. Ann stayed in Paris.");

    for i in 0..ctx.sentences().len() {
        let ae = encode_ae_input(&ctx, i, &cfg, true)?;
        println!("ae[{i}]  {ae}");
    }

    // the second "Ann" opens sentence 2
    let occurrence = ctx.occurrence_in_sentence("Ann", Some(2)).unwrap_or(0);
    let qg = encode_qg_input(&ctx, "Ann", occurrence, &cfg, false)?;
    println!("qg      {qg}");
    println!("plain   {}", remove_highlights(&qg, &cfg));
    assert_eq!(remove_highlights(&qg, &cfg), ctx.text());
    Ok(())
}
