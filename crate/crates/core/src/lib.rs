//! Question and answer generation (QAG) from paragraphs.
//!
//! Three strategies share one seq2seq backend abstraction:
//!
//! * **pipeline**: an answer-extraction model proposes an answer per sentence
//!   and a separate question-generation model writes its question;
//! * **multitask**: the same control flow on a single model told apart by
//!   task prefixes;
//! * **end2end**: one generation per paragraph producing a flattened list
//!   `question: q, answer: a | question: ...`.
//!
//! Around them sit fine-tuning corpus builders ([`finetune`]), SQuAD-style
//! metrics ([`metrics`]) and a QA-based extrinsic evaluation harness
//! ([`eval`]).
//!
//! ```
//! use qagkit::{Context, MockBackend, MockFixture, QagDriver, Strategy, StrategyConfig};
//!
//! let ctx = Context::new("p1", "Paris is the capital of France.");
//! let mut fixture = MockFixture::default();
//! fixture.insert(ctx.text(), "question: What is the capital of France?, answer: Paris");
//! let mut model = MockBackend::new(fixture);
//!
//! let out = QagDriver::End2end(&mut model)
//!     .generate(&ctx, &StrategyConfig::new(Strategy::End2end))
//!     .unwrap();
//! assert_eq!(out.pairs[0].answer(), "Paris");
//! ```

pub mod backend;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod finetune;
pub mod manifest;
pub mod metrics;
pub mod sentence;
pub mod strategies;
pub mod types;

pub use backend::{
    load_backend, Generation, GenerationRequest, GenerationResult, Instrumented, MockBackend, MockFixture,
    ModelHandle, Seq2SeqBackend,
};
pub use encoding::{flatten_pairs, parse_flat, EncodingConfig, ParsedPairs};
pub use error::{Error, Result};
pub use finetune::{Approach, FinetuneConfig, HyperParams};
pub use manifest::RunManifest;
pub use metrics::{corpus_scores, exact_match, normalize, token_f1, ScorePair};
pub use strategies::{Generated, QagDriver, StrategyConfig};
pub use types::{Context, QAGDataset, QAPair, SentenceSpan, Split, Strategy};
