//! Training corpora for the AE, QG, multitask and end2end objectives, the
//! published hyperparameter registry, and the fine-tuning driver.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::Seq2SeqBackend;
use crate::encoding::{
    check_flattenable, encode_ae_input, encode_qg_input, flatten_pairs, truncate_chars,
    EncodingConfig,
};
use crate::error::{Error, Result};
use crate::types::{Context, QAGDataset, QAPair, QuadrupleRecord, Split, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ae,
    Qg,
    End2end,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub input_text: String,
    pub target_text: String,
    pub task: Task,
}

/// Which model is being trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    PipelineAe,
    PipelineQg,
    Multitask,
    End2end,
}

impl Approach {
    pub const ALL: [Approach; 4] = [
        Approach::PipelineAe,
        Approach::PipelineQg,
        Approach::Multitask,
        Approach::End2end,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::PipelineAe => "pipeline-ae",
            Approach::PipelineQg => "pipeline-qg",
            Approach::Multitask => "multitask",
            Approach::End2end => "end2end",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Approach::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown approach {s:?}")))
    }
}

/// The four tuned knobs published for each (model, approach).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub label_smoothing: f64,
    pub batch_size: usize,
}

const fn hp(epochs: usize, learning_rate: f64, label_smoothing: f64, batch_size: usize) -> HyperParams {
    HyperParams {
        epochs,
        learning_rate,
        label_smoothing,
        batch_size,
    }
}

/// Tuned hyperparameters per base model and approach.
pub const DEFAULT_HYPERPARAMS: [(&str, Approach, HyperParams); 20] = [
    ("bart-base", Approach::PipelineAe, hp(4, 0.00005, 0.15, 64)),
    ("bart-base", Approach::PipelineQg, hp(7, 0.0001, 0.15, 256)),
    ("bart-base", Approach::Multitask, hp(3, 0.00005, 0.15, 128)),
    ("bart-base", Approach::End2end, hp(2, 0.00001, 0.15, 128)),
    ("bart-large", Approach::PipelineAe, hp(5, 0.00005, 0.15, 64)),
    ("bart-large", Approach::PipelineQg, hp(4, 0.00005, 0.15, 128)),
    ("bart-large", Approach::Multitask, hp(6, 0.00001, 0.15, 64)),
    ("bart-large", Approach::End2end, hp(14, 0.00001, 0.15, 64)),
    ("t5-small", Approach::PipelineAe, hp(7, 0.0001, 0.15, 64)),
    ("t5-small", Approach::PipelineQg, hp(9, 0.0001, 0.15, 64)),
    ("t5-small", Approach::Multitask, hp(7, 0.0001, 0.15, 64)),
    ("t5-small", Approach::End2end, hp(18, 0.0001, 0.0, 64)),
    ("t5-base", Approach::PipelineAe, hp(8, 0.0001, 0.0, 64)),
    ("t5-base", Approach::PipelineQg, hp(5, 0.0001, 0.15, 64)),
    ("t5-base", Approach::Multitask, hp(6, 0.0001, 0.15, 128)),
    ("t5-base", Approach::End2end, hp(17, 0.0001, 0.15, 64)),
    ("t5-large", Approach::PipelineAe, hp(9, 0.0001, 0.0, 128)),
    ("t5-large", Approach::PipelineQg, hp(6, 0.00005, 0.15, 64)),
    ("t5-large", Approach::Multitask, hp(3, 0.0001, 0.15, 64)),
    ("t5-large", Approach::End2end, hp(12, 0.0001, 0.15, 64)),
];

/// Strips registry prefixes so `facebook/bart-base` and `hf:t5-small` resolve.
pub fn model_family(model: &str) -> String {
    let name = model.strip_prefix("hf:").unwrap_or(model);
    let name = name.rsplit('/').next().unwrap_or(name);
    name.to_ascii_lowercase()
}

/// Looks up the tuned hyperparameters; `None` for models outside the registry.
pub fn default_hyperparams(model: &str, approach: Approach) -> Option<HyperParams> {
    let family = model_family(model);
    DEFAULT_HYPERPARAMS
        .iter()
        .find(|(m, a, _)| *m == family && *a == approach)
        .map(|(_, _, h)| *h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub label_smoothing: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl FinetuneConfig {
    pub fn from_hyperparams(h: HyperParams, seed: u64) -> Self {
        Self {
            epochs: h.epochs,
            learning_rate: h.learning_rate,
            label_smoothing: h.label_smoothing,
            batch_size: h.batch_size,
            seed,
        }
    }

    /// Registry defaults for a (model, approach); errors for unregistered pairs.
    pub fn lookup(model: &str, approach: Approach, seed: u64) -> Result<Self> {
        default_hyperparams(model, approach)
            .map(|h| Self::from_hyperparams(h, seed))
            .ok_or_else(|| {
                Error::validation(format!(
                    "no default hyperparameters for ({model}, {approach}); pass an explicit config"
                ))
            })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::validation("label_smoothing must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

/// A built corpus plus what had to be altered to build it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub examples: Vec<TrainExample>,
    /// Examples whose input or target was cut to the length guard.
    pub truncated: usize,
    /// Records that could not be turned into an example.
    pub dropped: usize,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn count(&self, task: Task) -> usize {
        self.examples.iter().filter(|e| e.task == task).count()
    }

    fn push(&mut self, mut example: TrainExample, cfg: &EncodingConfig) {
        let mut cut = truncate_chars(&mut example.input_text, cfg.max_input_chars());
        cut |= truncate_chars(
            &mut example.target_text,
            cfg.max_output_chars(example.task == Task::End2end),
        );
        if cut {
            self.truncated += 1;
        }
        self.examples.push(example);
    }

    fn extend(&mut self, other: Corpus) {
        self.examples.extend(other.examples);
        self.truncated += other.truncated;
        self.dropped += other.dropped;
    }
}

/// Answer extraction: sentence-highlighted context → answer.
pub fn build_ae_corpus(
    quads: &[QuadrupleRecord],
    cfg: &EncodingConfig,
    with_prefix: bool,
) -> Corpus {
    let mut corpus = Corpus::default();
    for quad in quads {
        match encode_ae_input(&quad.context, quad.sentence_index, cfg, with_prefix) {
            Ok(input) => corpus.push(
                TrainExample {
                    input_text: input,
                    target_text: quad.answer.clone(),
                    task: Task::Ae,
                },
                cfg,
            ),
            Err(e) => {
                warn!("skipping AE example from {}: {e}", quad.context.id());
                corpus.dropped += 1;
            }
        }
    }
    corpus
}

/// Question generation: answer-highlighted context → question. The answer
/// occurrence inside the quad's sentence is highlighted when there is one.
pub fn build_qg_corpus(
    quads: &[QuadrupleRecord],
    cfg: &EncodingConfig,
    with_prefix: bool,
) -> Corpus {
    let mut corpus = Corpus::default();
    for quad in quads {
        let encoded = quad
            .context
            .occurrence_in_sentence(&quad.answer, Some(quad.sentence_index))
            .ok_or_else(|| Error::AnswerNotFound {
                answer: quad.answer.clone(),
                occurrence: 0,
            })
            .and_then(|occ| encode_qg_input(&quad.context, &quad.answer, occ, cfg, with_prefix));
        match encoded {
            Ok(input) => corpus.push(
                TrainExample {
                    input_text: input,
                    target_text: quad.question.clone(),
                    task: Task::Qg,
                },
                cfg,
            ),
            Err(e) => {
                warn!("skipping QG example from {}: {e}", quad.context.id());
                corpus.dropped += 1;
            }
        }
    }
    corpus
}

/// Prefixed AE examples followed by prefixed QG examples. Mixing is left to
/// [`shuffle_corpus`].
pub fn build_multitask_corpus(quads: &[QuadrupleRecord], cfg: &EncodingConfig) -> Corpus {
    let mut corpus = build_ae_corpus(quads, cfg, true);
    corpus.extend(build_qg_corpus(quads, cfg, true));
    corpus
}

/// Groups quadruples into per-context gold pairs, in order of first appearance.
///
/// Returns the dataset and the number of quadruples that could not become a
/// valid pair (for instance because a field contains `|`).
pub fn group_quadruples(quads: &[QuadrupleRecord], split: Split) -> (QAGDataset, usize) {
    let mut order: Vec<&Context> = Vec::new();
    let mut grouped: HashMap<*const Context, Vec<QAPair>> = HashMap::new();
    let mut dropped = 0;
    for quad in quads {
        let key = std::sync::Arc::as_ptr(&quad.context);
        if !grouped.contains_key(&key) {
            order.push(&quad.context);
        }
        let pairs = grouped.entry(key).or_default();
        match QAPair::new(quad.question.clone(), quad.answer.clone(), Strategy::Gold) {
            Ok(p) => pairs.push(p.with_source_sentence(quad.sentence_index)),
            Err(e) => {
                warn!("dropping gold pair from {}: {e}", quad.context.id());
                dropped += 1;
            }
        }
    }
    let mut dataset = QAGDataset::new(split);
    for ctx in order {
        let pairs = grouped.remove(&(ctx as *const Context)).unwrap_or_default();
        dataset.push(ctx.clone(), pairs);
    }
    (dataset, dropped)
}

/// Orders pairs by the position of the answer's first occurrence in the
/// context, then by question text. Answers absent from the context go last.
pub fn order_pairs_by_position(context: &Context, pairs: &mut [QAPair]) {
    pairs.sort_by_cached_key(|p| {
        let pos = context
            .occurrences(p.answer())
            .first()
            .copied()
            .unwrap_or(usize::MAX);
        (pos, p.question().to_string())
    });
}

/// End2end: raw context → flattened pair sequence, one example per context.
pub fn build_end2end_corpus(dataset: &QAGDataset, cfg: &EncodingConfig) -> Corpus {
    let mut corpus = Corpus::default();
    for entry in dataset.entries() {
        let mut pairs: Vec<QAPair> = Vec::with_capacity(entry.pairs.len());
        for pair in &entry.pairs {
            match check_flattenable(pair, cfg) {
                Ok(()) => pairs.push(pair.clone()),
                Err(e) => {
                    warn!("dropping pair from {}: {e}", entry.context.id());
                    corpus.dropped += 1;
                }
            }
        }
        if pairs.is_empty() {
            continue;
        }
        order_pairs_by_position(&entry.context, &mut pairs);
        let target = flatten_pairs(&pairs, cfg).expect("pairs checked above");
        corpus.push(
            TrainExample {
                input_text: entry.context.text().to_string(),
                target_text: target,
                task: Task::End2end,
            },
            cfg,
        );
    }
    corpus
}

/// Builds the corpus that trains the model for `approach`.
pub fn build_corpus_for(
    approach: Approach,
    quads: &[QuadrupleRecord],
    cfg: &EncodingConfig,
) -> Corpus {
    match approach {
        Approach::PipelineAe => build_ae_corpus(quads, cfg, false),
        Approach::PipelineQg => build_qg_corpus(quads, cfg, false),
        Approach::Multitask => build_multitask_corpus(quads, cfg),
        Approach::End2end => {
            let (dataset, dropped) = group_quadruples(quads, Split::Train);
            let mut corpus = build_end2end_corpus(&dataset, cfg);
            corpus.dropped += dropped;
            corpus
        }
    }
}

/// Seeded in-place shuffle; the same seed always gives the same permutation.
pub fn shuffle_corpus(examples: &mut [TrainExample], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    examples.shuffle(&mut rng);
}

/// Per-epoch losses reported by a backend.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub train_losses: Vec<f64>,
    #[serde(default)]
    pub validation_losses: Vec<f64>,
    /// 1-based epoch of the checkpoint kept (best validation loss).
    #[serde(default)]
    pub best_epoch: Option<usize>,
}

fn check_corpus(corpus: &[TrainExample], name: &str) -> Result<()> {
    for (i, ex) in corpus.iter().enumerate() {
        if ex.input_text.trim().is_empty() || ex.target_text.trim().is_empty() {
            return Err(Error::validation(format!("{name} example {i} has a blank field")));
        }
    }
    Ok(())
}

/// Fine-tunes `handle` in place. Training losses are logged per epoch; a
/// non-finite loss aborts with [`Error::Divergence`].
pub fn finetune(
    handle: &mut dyn Seq2SeqBackend,
    train: &[TrainExample],
    validation: &[TrainExample],
    cfg: &FinetuneConfig,
) -> Result<TrainingLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    check_corpus(train, "training")?;
    check_corpus(validation, "validation")?;
    let log = handle.finetune(train, validation, cfg)?;
    for (epoch, loss) in log.train_losses.iter().enumerate() {
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                loss: *loss,
            });
        }
        info!("{} epoch {}: train loss {loss:.4}", handle.identity(), epoch + 1);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backend::MockBackend;
    use crate::encoding::parse_flat;

    fn quad(text: &str, idx: usize, ans: &str, q: &str) -> QuadrupleRecord {
        QuadrupleRecord::new(Arc::new(Context::new("c", text)), idx, ans, q).unwrap()
    }

    #[test]
    fn ae_corpus_example() {
        let quads = [quad("A b. C d.", 1, "C", "What?")];
        let corpus = build_ae_corpus(&quads, &EncodingConfig::default(), false);
        assert_eq!(
            corpus.examples,
            vec![TrainExample {
                input_text: "A b. <hl> C d. <hl>".into(),
                target_text: "C".into(),
                task: Task::Ae,
            }]
        );
        let prefixed = build_ae_corpus(&quads, &EncodingConfig::default(), true);
        assert_eq!(prefixed.examples[0].input_text, "extract answer: A b. <hl> C d. <hl>");
        assert!(build_ae_corpus(&[], &EncodingConfig::default(), false).is_empty());
    }

    #[test]
    fn qg_corpus_uses_sentence_local_occurrence() {
        let quads = [quad("C is here. Then C again.", 1, "C", "Which letter?")];
        let corpus = build_qg_corpus(&quads, &EncodingConfig::default(), false);
        assert_eq!(corpus.examples[0].input_text, "C is here. Then <hl> C <hl> again.");
        assert_eq!(corpus.examples[0].target_text, "Which letter?");
        let prefixed = build_qg_corpus(&quads, &EncodingConfig::default(), true);
        assert!(prefixed.examples[0].input_text.starts_with("generate question: "));
        assert!(build_qg_corpus(&[], &EncodingConfig::default(), true).is_empty());
    }

    #[test]
    fn multitask_is_ae_plus_qg() {
        let quads = [
            quad("A b. C d.", 1, "C", "What?"),
            quad("A b. C d.", 0, "A", "Who?"),
            quad("X y. Z w.", 0, "y", "Why?"),
        ];
        let cfg = EncodingConfig::default();
        let corpus = build_multitask_corpus(&quads, &cfg);
        assert_eq!(corpus.len(), 6);
        assert_eq!(corpus.count(Task::Ae), 3);
        assert_eq!(corpus.count(Task::Qg), 3);
        assert_eq!(
            corpus.len(),
            build_ae_corpus(&quads, &cfg, true).len() + build_qg_corpus(&quads, &cfg, true).len()
        );
    }

    #[test]
    fn shuffle_is_reproducible() {
        let quads: Vec<_> = (0..20)
            .map(|i| quad("A b. C d.", i % 2, if i % 2 == 0 { "A" } else { "C" }, &format!("q{i}?")))
            .collect();
        let corpus = build_multitask_corpus(&quads, &EncodingConfig::default());
        let mut a = corpus.examples.clone();
        let mut b = corpus.examples.clone();
        shuffle_corpus(&mut a, 7);
        shuffle_corpus(&mut b, 7);
        assert_eq!(a, b);
        assert_ne!(a, corpus.examples);
    }

    #[test]
    fn end2end_target_orders_by_position() {
        let ctx = Arc::new(Context::new("c", "Bob came. He left at noon."));
        let quads = [
            QuadrupleRecord::new(ctx.clone(), 1, "noon", "When?").unwrap(),
            QuadrupleRecord::new(ctx.clone(), 0, "Bob", "Who?").unwrap(),
        ];
        let corpus = build_corpus_for(Approach::End2end, &quads, &EncodingConfig::default());
        assert_eq!(corpus.len(), 1);
        let ex = &corpus.examples[0];
        assert_eq!(ex.input_text, "Bob came. He left at noon.");
        assert_eq!(ex.target_text, "question: Who?, answer: Bob | question: When?, answer: noon");
        assert_eq!(ex.target_text.matches(" | ").count(), 1);
        let parsed = parse_flat(&ex.target_text, &EncodingConfig::default());
        let got: Vec<_> = parsed.pairs.iter().map(|p| (p.question(), p.answer())).collect();
        assert_eq!(got, vec![("Who?", "Bob"), ("When?", "noon")]);
    }

    #[test]
    fn end2end_ties_break_on_question() {
        let ctx = Context::new("c", "Bob came.");
        let mut pairs = vec![
            QAPair::new("Who came?", "Bob", Strategy::Gold).unwrap(),
            QAPair::new("Name?", "Bob", Strategy::Gold).unwrap(),
        ];
        order_pairs_by_position(&ctx, &mut pairs);
        assert_eq!(pairs[0].question(), "Name?");
    }

    #[test]
    fn end2end_drops_separator_collisions() {
        let ctx = Arc::new(Context::new("c", "Bob came. He left at noon."));
        let quads = [
            QuadrupleRecord::new(ctx.clone(), 0, "Bob", "Who | what?").unwrap(),
            QuadrupleRecord::new(ctx.clone(), 1, "noon", "When?").unwrap(),
        ];
        let corpus = build_corpus_for(Approach::End2end, &quads, &EncodingConfig::default());
        assert_eq!(corpus.dropped, 1);
        assert_eq!(corpus.examples[0].target_text, "question: When?, answer: noon");
    }

    #[test]
    fn overlong_examples_are_truncated() {
        let cfg = EncodingConfig {
            max_input_tokens: 4,
            max_output_tokens_short: 1,
            ..EncodingConfig::default()
        };
        let quads = [quad("A b. Cdefghijk is long.", 1, "Cdefghijk", "What?")];
        let corpus = build_ae_corpus(&quads, &cfg, false);
        assert_eq!(corpus.truncated, 1);
        assert_eq!(corpus.examples[0].input_text.chars().count(), 16);
        assert_eq!(corpus.examples[0].target_text, "Cdef");
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(default_hyperparams("t5-large", Approach::End2end), Some(hp(12, 1e-4, 0.15, 64)));
        assert_eq!(
            default_hyperparams("facebook/bart-base", Approach::Multitask),
            Some(hp(3, 5e-5, 0.15, 128))
        );
        assert_eq!(default_hyperparams("gpt2", Approach::End2end), None);
        assert!(FinetuneConfig::lookup("mock:", Approach::End2end, 0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = FinetuneConfig::lookup("t5-small", Approach::End2end, 1).unwrap();
        assert!(cfg.validate().is_ok());
        cfg.label_smoothing = 1.0;
        assert!(cfg.validate().is_err());
        cfg.label_smoothing = 0.1;
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn approach_names() {
        for a in Approach::ALL {
            assert_eq!(a.as_str().parse::<Approach>().unwrap(), a);
        }
        assert!("pipeline".parse::<Approach>().is_err());
    }

    #[test]
    fn mock_finetune_is_recorded_noop() {
        let mut mock = MockBackend::empty();
        let quads = [quad("A b. C d.", 1, "C", "What?")];
        let corpus = build_multitask_corpus(&quads, &EncodingConfig::default());
        let cfg = FinetuneConfig::lookup("bart-base", Approach::Multitask, 0).unwrap();
        let log = finetune(&mut mock, &corpus.examples, &[], &cfg).unwrap();
        assert!(log.train_losses.is_empty());
        assert_eq!(mock.finetune_calls().len(), 1);
        assert_eq!(mock.finetune_calls()[0].train_examples, 2);
        assert!(finetune(&mut mock, &[], &[], &cfg).is_err());
    }
}
