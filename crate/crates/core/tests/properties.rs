use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::Path;

use proptest::prelude::*;
use qagkit::encoding::{encode_ae_input, encode_qg_input, remove_highlights};
use qagkit::types::dedupe;
use qagkit::{
    exact_match, flatten_pairs, normalize, parse_flat, token_f1, Context, EncodingConfig, QAGDataset,
    QAPair, Split, Strategy as QagStrategy,
};

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec("[A-Za-z0-9?.']{1,8}", 1..5).prop_map(|w| w.join(" "))
}

fn pair_list() -> impl Strategy<Value = Vec<QAPair>> {
    prop::collection::vec((phrase(), phrase()), 1..8).prop_map(|raw| {
        dedupe(
            raw.into_iter()
                .map(|(q, a)| QAPair::new(q, a, QagStrategy::End2end).unwrap())
                .collect(),
        )
    })
}

fn sentence() -> impl Strategy<Value = String> {
    ("[A-Z][a-z]{0,6}", prop::collection::vec("[a-z0-9]{1,7}", 0..6), "[.!?]")
        .prop_map(|(first, rest, end)| {
            let mut s = first;
            for w in rest {
                s.push(' ');
                s.push_str(&w);
            }
            s.push_str(&end);
            s
        })
}

fn paragraph() -> impl Strategy<Value = String> {
    prop::collection::vec(sentence(), 1..6).prop_map(|s| s.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flatten_parse_round_trip(pairs in pair_list()) {
        let cfg = EncodingConfig::default();
        let flat = flatten_pairs(&pairs, &cfg).unwrap();
        let parsed = parse_flat(&flat, &cfg);
        prop_assert_eq!(parsed.dropped, 0);
        prop_assert_eq!(parsed.pairs, pairs);
    }

    #[test]
    fn parse_never_panics(s in ".{0,200}") {
        let _ = parse_flat(&s, &EncodingConfig::default());
    }

    #[test]
    fn ae_encoding_has_two_tokens_and_inverts(text in paragraph()) {
        let cfg = EncodingConfig::default();
        let ctx = Context::new("p", text.as_str());
        for i in 0..ctx.sentences().len() {
            let enc = encode_ae_input(&ctx, i, &cfg, false).unwrap();
            prop_assert_eq!(enc.matches("<hl>").count(), 2);
            prop_assert_eq!(remove_highlights(&enc, &cfg), text.clone());
        }
    }

    #[test]
    fn qg_encoding_highlights_one_word(text in paragraph(), pick in any::<prop::sample::Index>()) {
        let cfg = EncodingConfig::default();
        let ctx = Context::new("p", text.as_str());
        let words: Vec<&str> = text.split(' ').collect();
        let answer = words[pick.index(words.len())];
        let occurrences = ctx.occurrences(answer).len();
        for occ in 0..occurrences {
            let enc = encode_qg_input(&ctx, answer, occ, &cfg, false).unwrap();
            prop_assert_eq!(enc.matches("<hl>").count(), 2);
            let inner = enc.split("<hl>").nth(1).unwrap();
            prop_assert_eq!(inner.trim(), answer);
            if words.iter().filter(|w| **w == answer).count() == occurrences {
                prop_assert_eq!(remove_highlights(&enc, &cfg), text.clone());
            }
        }
    }

    #[test]
    fn dedupe_idempotent(pairs in prop::collection::vec((phrase(), phrase()), 0..10)) {
        let pairs: Vec<QAPair> = pairs.into_iter().map(|(q, a)| QAPair::new(q, a, QagStrategy::Pipeline).unwrap()).collect();
        let once = dedupe(pairs);
        prop_assert_eq!(dedupe(once.clone()), once);
    }

    #[test]
    fn normalize_idempotent(s in ".{0,60}") {
        let n = normalize(&s);
        prop_assert_eq!(normalize(&n), n);
    }

    #[test]
    fn f1_symmetric_and_bounded(p in "[a-c ]{0,12}", g in "[a-c ]{0,12}") {
        let pg = token_f1(&p, std::slice::from_ref(&g));
        let gp = token_f1(&g, std::slice::from_ref(&p));
        prop_assert!((pg - gp).abs() < 1e-12);
        let em = exact_match(&p, std::slice::from_ref(&g));
        prop_assert!(0.0 <= em && em <= pg && pg <= 1.0);
    }

    #[test]
    fn jsonl_round_trip(texts in prop::collection::vec(paragraph(), 1..4), pairs in pair_list()) {
        let mut ds = QAGDataset::new(Split::Train);
        for (i, t) in texts.iter().enumerate() {
            ds.push(Context::new(format!("c{i}"), t.as_str()).with_domain("wiki"), pairs.clone());
        }
        let text = ds.to_jsonl_string();
        let back = QAGDataset::read_jsonl(Cursor::new(text), Split::Train, Path::new("mem")).unwrap();
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn domain_counts_match_lines() {
    let mut ds = QAGDataset::new(Split::Train);
    ds.push(Context::new("a", "X y.").with_domain("nyt"), vec![QAPair::new("Q?", "X", QagStrategy::Gold).unwrap()]);
    ds.push(Context::new("b", "Z w.").with_domain("nyt"), vec![]);
    let counts: BTreeMap<String, usize> = ds.pair_counts_by_domain();
    assert_eq!(counts["nyt"], 1);
    assert_eq!(ds.to_jsonl_string().lines().count(), 2);
}
