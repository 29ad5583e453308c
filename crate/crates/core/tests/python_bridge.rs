//! Drives the Python worker against tiny randomly initialised checkpoints
//! built on the fly. Skips (passing) when torch or transformers is missing.

use std::path::{Path, PathBuf};
use std::process::Command;

use qagkit::eval::{load_reader_trainer, ReaderExample};
use qagkit::finetune::{Task, TrainExample};
use qagkit::{load_backend, FinetuneConfig, GenerationRequest};

fn python() -> String {
    std::env::var("QAG_PYTHON").unwrap_or_else(|_| "python3".into())
}

fn python_available() -> bool {
    let probe = Command::new(python())
        .args(["-c", "import torch, transformers, tokenizers"])
        .output();
    let ok = matches!(probe, Ok(ref o) if o.status.success());
    if !ok {
        eprintln!("skipping: python with torch, transformers and tokenizers not available");
    }
    ok
}

fn tiny_models(dir: &Path) -> Option<(PathBuf, PathBuf)> {
    if !python_available() {
        return None;
    }
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/support/tiny_models.py");
    let out = Command::new(python()).arg(script).arg(dir).output().expect("python runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Some((dir.join("bart"), dir.join("bert")))
}

fn example(input: &str, target: &str) -> TrainExample {
    TrainExample {
        input_text: input.into(),
        target_text: target.into(),
        task: Task::End2end,
    }
}

#[test]
fn seq2seq_and_reader_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let Some((bart, bert)) = tiny_models(dir.path()) else { return };

    let mut model = load_backend(&format!("hf:{}", bart.display())).unwrap();
    assert!(model.identity().starts_with("hf:"));

    let requests = [
        GenerationRequest::new("Bob met Ann in Paris.", 8).with_returns(2),
        GenerationRequest::new("Bob met <hl> Ann <hl> in Paris.", 8),
    ];
    let results = model.generate(&requests).unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0].outputs.len(), 2);
    assert_eq!(results[1].outputs.len(), 1);
    for r in &results {
        let lls: Vec<f64> = r.outputs.iter().map(|g| g.log_likelihood).collect();
        assert!(lls.iter().all(|l| l.is_finite()));
        assert!(lls.windows(2).all(|w| w[0] >= w[1]), "best first: {lls:?}");
    }

    let train = [
        example("Bob met Ann in Paris.", "question: Who met Ann?, answer: Bob"),
        example("Ann wrote a book.", "question: What did Ann write?, answer: a book"),
        example("Alice repaired the bicycle in Lisbon.", "question: Who repaired the bicycle?, answer: Alice"),
    ];
    let cfg = FinetuneConfig {
        epochs: 2,
        learning_rate: 1e-3,
        label_smoothing: 0.1,
        batch_size: 2,
        seed: 7,
    };
    let log = qagkit::finetune::finetune(model.as_mut(), &train, &train[..1], &cfg).unwrap();
    assert_eq!(log.train_losses.len(), 2);
    assert_eq!(log.validation_losses.len(), 2);
    assert!(log.best_epoch.is_some());

    let saved = dir.path().join("saved");
    model.save(&saved).unwrap();
    assert!(saved.join("config.json").exists());
    let mut reloaded = load_backend(&format!("hf:{}", saved.display())).unwrap();
    assert_eq!(reloaded.generate(&requests[..1]).unwrap()[0].outputs.len(), 2);
    // longer than the tiny model's 128 positions: capped, not an index error
    let long = GenerationRequest::new("Bob met Ann in Paris.", 512);
    assert!(reloaded.generate(&[long]).is_ok());

    let mut trainer = load_reader_trainer(&format!("hf:{}", bert.display())).unwrap();
    let context = "Bob met Ann in Paris.";
    let examples = [ReaderExample {
        id: "r0".into(),
        context: context.into(),
        question: "Who met Ann?".into(),
        answer: "Bob".into(),
        answer_start: 0,
    }];
    let reader_cfg = FinetuneConfig {
        epochs: 1,
        learning_rate: 1e-3,
        label_smoothing: 0.0,
        batch_size: 4,
        seed: 7,
    };
    let mut reader = trainer.train(&examples, &[], &reader_cfg).unwrap();
    let answers = reader
        .predict(&[(context, "Who met Ann?"), (context, "Where?")])
        .unwrap();
    assert_eq!(answers.len(), 2);
    assert!(answers.iter().all(|a| context.contains(a.as_str())), "{answers:?}");
}

#[test]
fn worker_errors_surface_as_errors() {
    if !python_available() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no-such-checkpoint");
    assert!(load_backend(&format!("hf:{}", missing.display())).is_err());
}
