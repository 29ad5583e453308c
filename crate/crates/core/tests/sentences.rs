use qagkit::sentence::split_sentences;
use qagkit::Context;
use serde::Deserialize;

#[derive(Deserialize)]
struct Segmented {
    text: String,
    sentences: Vec<String>,
}

fn oracle() -> Vec<Segmented> {
    serde_json::from_str(include_str!("data/segmented_paragraphs.json")).unwrap()
}

#[test]
fn matches_hand_segmentation() {
    let mut failures = Vec::new();
    for case in oracle() {
        let ctx = Context::new("x", case.text.as_str());
        let got: Vec<&str> = (0..ctx.sentences().len())
            .map(|i| ctx.sentence_text(i).unwrap())
            .collect();
        if got != case.sentences {
            failures.push(format!("{:?}\n  want {:?}\n  got  {:?}", case.text, case.sentences, got));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn spans_are_ordered_and_disjoint() {
    for case in oracle() {
        let spans = split_sentences(&case.text);
        for w in spans.windows(2) {
            assert!(w[0].end <= w[1].start, "{:?}", case.text);
        }
        for s in &spans {
            assert!(s.start < s.end);
        }
    }
}

#[test]
fn separators_rebuild_text() {
    for case in oracle() {
        let ctx = Context::new("x", case.text.as_str());
        let seps = ctx.separators();
        let mut rebuilt = String::from(seps[0]);
        for i in 0..ctx.sentences().len() {
            rebuilt.push_str(ctx.sentence_text(i).unwrap());
            rebuilt.push_str(seps[i + 1]);
        }
        assert_eq!(rebuilt, case.text);
    }
}
