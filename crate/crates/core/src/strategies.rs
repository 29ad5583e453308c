//! The three QAG drivers: pipeline (separate AE and QG models), multitask
//! (one prefixed model for both subtasks) and end2end (one flattened pass).

use serde::{Deserialize, Serialize};

use crate::backend::{GenerationRequest, Seq2SeqBackend};
use crate::encoding::{encode_ae_input, encode_qg_input, parse_flat, truncate_chars, EncodingConfig};
use crate::error::{Error, Result};
use crate::types::{dedupe, Context, QAPair, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub encoding: EncodingConfig,
    /// Answer candidates requested from AE per sentence.
    pub answers_per_sentence: usize,
    /// Drop pairs whose answer is not a substring of the context.
    pub require_answer_in_context: bool,
    pub num_beams: usize,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            encoding: EncodingConfig::default(),
            answers_per_sentence: 1,
            require_answer_in_context: true,
            num_beams: crate::backend::DEFAULT_NUM_BEAMS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.answers_per_sentence == 0 {
            return Err(Error::validation("answers_per_sentence must be at least 1"));
        }
        if self.num_beams == 0 {
            return Err(Error::validation("num_beams must be at least 1"));
        }
        if self.strategy == Strategy::Gold {
            return Err(Error::validation("gold is not a generation strategy"));
        }
        self.encoding.validate()
    }

    fn request(&self, mut input: String, max_output_tokens: usize, returns: usize) -> GenerationRequest {
        truncate_chars(&mut input, self.encoding.max_input_chars());
        let mut req = GenerationRequest::new(input, max_output_tokens);
        req.num_beams = self.num_beams;
        req.with_returns(returns)
    }
}

/// Pairs produced for one context.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Generated {
    pub pairs: Vec<QAPair>,
    /// Malformed segments in end2end output.
    pub dropped_segments: usize,
    /// Candidates removed because the answer was empty, absent from the
    /// context, or not representable as a pair.
    pub filtered: usize,
}

struct Candidate {
    sentence: usize,
    answer: String,
    occurrence: usize,
    score: f64,
}

fn sentence_error(err: Error, map: impl Fn(usize) -> usize) -> Error {
    match err {
        Error::Backend { index, .. } => {
            let sentence = map(index);
            err.at_sentence(sentence)
        }
        other => other,
    }
}

/// Shared control flow of pipeline and multitask: AE over every sentence,
/// then QG over every surviving answer. Both stages are sent as one batch.
fn answer_then_question(
    ctx: &Context,
    ae: &mut dyn Seq2SeqBackend,
    qg: Option<&mut dyn Seq2SeqBackend>,
    cfg: &StrategyConfig,
    with_prefix: bool,
) -> Result<Generated> {
    cfg.validate()?;
    let enc = &cfg.encoding;
    let mut out = Generated::default();
    if ctx.sentences().is_empty() {
        return Ok(out);
    }

    let ae_requests = (0..ctx.sentences().len())
        .map(|i| {
            encode_ae_input(ctx, i, enc, with_prefix).map(|input| {
                cfg.request(input, enc.max_output_tokens_short, cfg.answers_per_sentence)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ae_results = ae
        .generate(&ae_requests)
        .map_err(|e| sentence_error(e, |i| i))?;

    let mut candidates = Vec::new();
    for (sentence, result) in ae_results.iter().enumerate() {
        for generation in &result.outputs {
            let answer = generation.text.trim();
            if answer.is_empty() {
                out.filtered += 1;
                continue;
            }
            // QG needs a highlightable span, so an answer outside the context
            // can never reach the second stage.
            let Some(occurrence) = ctx.occurrence_in_sentence(answer, Some(sentence)) else {
                out.filtered += 1;
                continue;
            };
            candidates.push(Candidate {
                sentence,
                answer: answer.to_string(),
                occurrence,
                score: generation.log_likelihood,
            });
        }
    }
    if candidates.is_empty() {
        return Ok(out);
    }

    let qg_requests = candidates
        .iter()
        .map(|c| {
            encode_qg_input(ctx, &c.answer, c.occurrence, enc, with_prefix)
                .map(|input| cfg.request(input, enc.max_output_tokens_short, 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let qg_results = match qg {
        Some(model) => model.generate(&qg_requests),
        None => ae.generate(&qg_requests),
    }
    .map_err(|e| sentence_error(e, |i| candidates[i].sentence))?;

    let mut pairs = Vec::with_capacity(candidates.len());
    for (cand, result) in candidates.iter().zip(&qg_results) {
        let Some(best) = result.best() else {
            out.filtered += 1;
            continue;
        };
        match QAPair::new(best.text.trim(), cand.answer.clone(), cfg.strategy) {
            Ok(pair) => pairs.push(
                pair.with_source_sentence(cand.sentence)
                    .with_score(cand.score + best.log_likelihood),
            ),
            Err(_) => out.filtered += 1,
        }
    }
    out.pairs = dedupe(pairs);
    Ok(out)
}

/// Pipeline QAG: an AE model proposes an answer per sentence, a separate QG
/// model writes the question. Inputs carry no task prefix.
pub fn generate_pipeline(
    ctx: &Context,
    ae: &mut dyn Seq2SeqBackend,
    qg: &mut dyn Seq2SeqBackend,
    cfg: &StrategyConfig,
) -> Result<Generated> {
    let cfg = StrategyConfig {
        strategy: Strategy::Pipeline,
        ..cfg.clone()
    };
    answer_then_question(ctx, ae, Some(qg), &cfg, false)
}

/// Multitask QAG: the pipeline control flow on one shared model, with the
/// AE and QG task prefixes on the inputs.
pub fn generate_multitask(
    ctx: &Context,
    shared: &mut dyn Seq2SeqBackend,
    cfg: &StrategyConfig,
) -> Result<Generated> {
    let cfg = StrategyConfig {
        strategy: Strategy::Multitask,
        ..cfg.clone()
    };
    answer_then_question(ctx, shared, None, &cfg, true)
}

/// End2end QAG: one generation over the raw paragraph, parsed as a flattened
/// pair sequence.
pub fn generate_end2end(
    ctx: &Context,
    model: &mut dyn Seq2SeqBackend,
    cfg: &StrategyConfig,
) -> Result<Generated> {
    cfg.validate()?;
    let mut out = Generated::default();
    if ctx.text().trim().is_empty() {
        return Ok(out);
    }
    let req = cfg.request(ctx.text().to_string(), cfg.encoding.max_output_tokens_e2e, 1);
    let results = model.generate(std::slice::from_ref(&req))?;
    let Some(best) = results.first().and_then(|r| r.best()) else {
        return Ok(out);
    };
    let parsed = parse_flat(&best.text, &cfg.encoding);
    out.dropped_segments = parsed.dropped;
    let mut pairs = Vec::with_capacity(parsed.pairs.len());
    for pair in parsed.pairs {
        if cfg.require_answer_in_context && !ctx.text().contains(pair.answer()) {
            out.filtered += 1;
            continue;
        }
        pairs.push(pair.with_score(best.log_likelihood));
    }
    out.pairs = dedupe(pairs);
    Ok(out)
}

/// QG-only baseline: skips AE and asks the QG model about known answers,
/// given as `(sentence index, answer)`.
pub fn generate_qg_only(
    ctx: &Context,
    answers: &[(usize, String)],
    qg: &mut dyn Seq2SeqBackend,
    cfg: &StrategyConfig,
) -> Result<Generated> {
    cfg.validate()?;
    let enc = &cfg.encoding;
    let mut out = Generated::default();
    let mut kept = Vec::new();
    let mut requests = Vec::new();
    for (sentence, answer) in answers {
        let Some(occ) = ctx.occurrence_in_sentence(answer, Some(*sentence)) else {
            out.filtered += 1;
            continue;
        };
        let input = encode_qg_input(ctx, answer, occ, enc, false)?;
        requests.push(cfg.request(input, enc.max_output_tokens_short, 1));
        kept.push((*sentence, answer));
    }
    if requests.is_empty() {
        return Ok(out);
    }
    let results = qg
        .generate(&requests)
        .map_err(|e| sentence_error(e, |i| kept[i].0))?;
    let mut pairs = Vec::new();
    for ((sentence, answer), result) in kept.into_iter().zip(&results) {
        let Some(best) = result.best() else { continue };
        match QAPair::new(best.text.trim(), answer.clone(), Strategy::Pipeline) {
            Ok(p) => pairs.push(p.with_source_sentence(sentence).with_score(best.log_likelihood)),
            Err(_) => out.filtered += 1,
        }
    }
    out.pairs = dedupe(pairs);
    Ok(out)
}

/// A QAG model bound to its backend handles.
pub enum QagDriver<'a> {
    Pipeline {
        ae: &'a mut dyn Seq2SeqBackend,
        qg: &'a mut dyn Seq2SeqBackend,
    },
    Multitask(&'a mut dyn Seq2SeqBackend),
    End2end(&'a mut dyn Seq2SeqBackend),
}

impl QagDriver<'_> {
    pub fn strategy(&self) -> Strategy {
        match self {
            QagDriver::Pipeline { .. } => Strategy::Pipeline,
            QagDriver::Multitask(_) => Strategy::Multitask,
            QagDriver::End2end(_) => Strategy::End2end,
        }
    }

    /// Number of distinct models held in memory.
    pub fn model_count(&self) -> usize {
        match self {
            QagDriver::Pipeline { .. } => 2,
            _ => 1,
        }
    }

    /// Runs the driver's strategy; `cfg.strategy` is ignored in favour of the driver's.
    pub fn generate(&mut self, ctx: &Context, cfg: &StrategyConfig) -> Result<Generated> {
        let cfg = StrategyConfig {
            strategy: self.strategy(),
            ..cfg.clone()
        };
        match self {
            QagDriver::Pipeline { ae, qg } => generate_pipeline(ctx, &mut **ae, &mut **qg, &cfg),
            QagDriver::Multitask(m) => generate_multitask(ctx, &mut **m, &cfg),
            QagDriver::End2end(m) => generate_end2end(ctx, &mut **m, &cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Instrumented, MockBackend, MockFixture};

    fn mock(entries: &[(&str, &str)]) -> Instrumented<MockBackend> {
        let mut fixture = MockFixture::default();
        for (k, v) in entries {
            fixture.insert(*k, *v);
        }
        Instrumented::new(MockBackend::new(fixture))
    }

    fn cfg(strategy: Strategy) -> StrategyConfig {
        StrategyConfig::new(strategy)
    }

    #[test]
    fn pipeline_golden_trace() {
        let ctx = Context::new("c", "A b. C d.");
        let mut ae = mock(&[("A b. <hl> C d. <hl>", "C")]);
        let mut qg = mock(&[("A b. <hl> C <hl> d.", "What letter?")]);
        let out = generate_pipeline(&ctx, &mut ae, &mut qg, &cfg(Strategy::Pipeline)).unwrap();
        assert_eq!(out.pairs.len(), 1);
        let p = &out.pairs[0];
        assert_eq!((p.question(), p.answer()), ("What letter?", "C"));
        assert_eq!(p.source_sentence_index(), Some(1));
        assert_eq!(p.strategy(), Strategy::Pipeline);
        assert_eq!(ae.calls(), 2);
        assert_eq!(qg.calls(), 1);
        assert!(ae.requests().iter().all(|r| r.max_output_tokens == 32));
        assert!(qg.requests().iter().all(|r| r.max_output_tokens == 32));
    }

    #[test]
    fn pipeline_empty_answers_give_nothing() {
        let ctx = Context::new("c", "One. Two. Three.");
        let mut ae = mock(&[]);
        let mut qg = mock(&[]);
        let out = generate_pipeline(&ctx, &mut ae, &mut qg, &cfg(Strategy::Pipeline)).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.filtered, 3);
        assert_eq!(qg.calls(), 0);
    }

    #[test]
    fn pipeline_drops_answers_outside_context() {
        let ctx = Context::new("c", "A b. C d.");
        let mut ae = mock(&[("A b. <hl> C d. <hl>", "Z")]);
        let mut qg = mock(&[]);
        let out = generate_pipeline(&ctx, &mut ae, &mut qg, &cfg(Strategy::Pipeline)).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(qg.calls(), 0);
    }

    #[test]
    fn pipeline_prefers_occurrence_in_source_sentence() {
        let ctx = Context::new("c", "Paris is big. I love Paris.");
        let mut ae = mock(&[("Paris is big. <hl> I love Paris. <hl>", "Paris")]);
        let mut qg = mock(&[("Paris is big. I love <hl> Paris <hl> .", "What do I love?")]);
        let out = generate_pipeline(&ctx, &mut ae, &mut qg, &cfg(Strategy::Pipeline)).unwrap();
        assert_eq!(out.pairs[0].question(), "What do I love?");
    }

    #[test]
    fn multitask_uses_prefixes_on_one_model() {
        let ctx = Context::new("c", "A b. C d.");
        let mut shared = mock(&[
            ("extract answer: A b. <hl> C d. <hl>", "C"),
            ("generate question: A b. <hl> C <hl> d.", "What letter?"),
        ]);
        let out = generate_multitask(&ctx, &mut shared, &cfg(Strategy::Multitask)).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].question(), "What letter?");
        assert_eq!(out.pairs[0].strategy(), Strategy::Multitask);
        assert_eq!(shared.requests()[0].input_text, "extract answer: <hl> A b. <hl> C d.");
        assert_eq!(shared.calls(), 3);
    }

    #[test]
    fn zero_sentence_context() {
        let ctx = Context::new("c", "   ");
        let mut shared = mock(&[]);
        let out = generate_multitask(&ctx, &mut shared, &cfg(Strategy::Multitask)).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(shared.calls(), 0);
    }

    #[test]
    fn end2end_parses_output() {
        let ctx = Context::new("c", "Bob came now.");
        let mut m = mock(&[("Bob came now.", "question: Who?, answer: Bob | question: When?, answer: now")]);
        let out = generate_end2end(&ctx, &mut m, &cfg(Strategy::End2end)).unwrap();
        assert_eq!(out.pairs.len(), 2);
        assert!(out.pairs.iter().all(|p| p.source_sentence_index().is_none()));
        assert_eq!(m.requests()[0].max_output_tokens, 256);
    }

    #[test]
    fn end2end_gibberish() {
        let ctx = Context::new("c", "Bob came now.");
        let mut m = mock(&[("Bob came now.", "gibberish")]);
        let out = generate_end2end(&ctx, &mut m, &cfg(Strategy::End2end)).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.dropped_segments, 1);
    }

    #[test]
    fn end2end_answer_filter_is_a_flag() {
        let ctx = Context::new("c", "Bob came now.");
        let mut m = mock(&[("Bob came now.", "question: Who?, answer: Alice")]);
        let strict = generate_end2end(&ctx, &mut m, &cfg(Strategy::End2end)).unwrap();
        assert!(strict.pairs.is_empty());
        assert_eq!(strict.filtered, 1);
        let mut loose_cfg = cfg(Strategy::End2end);
        loose_cfg.require_answer_in_context = false;
        let loose = generate_end2end(&ctx, &mut m, &loose_cfg).unwrap();
        assert_eq!(loose.pairs.len(), 1);
    }

    #[test]
    fn call_counts_end2end_vs_pipeline() {
        let text = "S one. S two. S three. S four. S five.";
        let ctx = Context::new("c", text);
        assert_eq!(ctx.sentences().len(), 5);
        let mut fixture = Vec::new();
        let enc = EncodingConfig::default();
        let answers = ["one", "two", "three", "four", "five"];
        for (i, a) in answers.iter().enumerate() {
            fixture.push((encode_ae_input(&ctx, i, &enc, false).unwrap(), a.to_string()));
        }
        let refs: Vec<(&str, &str)> = fixture.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let mut ae = mock(&refs);
        let mut qg = Instrumented::new(MockBackend::from_json(r#"{"fallback": "Which?"}"#).unwrap());
        let out = generate_pipeline(&ctx, &mut ae, &mut qg, &cfg(Strategy::Pipeline)).unwrap();
        assert_eq!(ae.calls() + qg.calls(), 10);
        // fallback question is identical for every answer, but answers differ
        assert_eq!(out.pairs.len(), 5);

        let mut e2e = mock(&[]);
        generate_end2end(&ctx, &mut e2e, &cfg(Strategy::End2end)).unwrap();
        assert_eq!(e2e.calls(), 1);
    }

    #[test]
    fn several_answers_per_sentence() {
        let ctx = Context::new("c", "Bob met Ann.");
        let mut ae = Instrumented::new(
            MockBackend::from_json(r#"{"map": {"<hl> Bob met Ann. <hl>": ["Bob", "Ann", "Bob"]}}"#).unwrap(),
        );
        let mut qg = mock(&[("<hl> Bob <hl> met Ann.", "Who met?"), ("Bob met <hl> Ann <hl> .", "Whom?")]);
        let mut c = cfg(Strategy::Pipeline);
        c.answers_per_sentence = 3;
        let out = generate_pipeline(&ctx, &mut ae, &mut qg, &c).unwrap();
        assert_eq!(ae.requests()[0].num_return_sequences, 3);
        assert!(ae.requests()[0].num_beams >= 3);
        assert_eq!(out.pairs.len(), 2);
        assert!(out.pairs.len() <= 3 * ctx.sentences().len());
    }

    #[test]
    fn backend_errors_carry_sentence_index() {
        struct Failing;
        impl Seq2SeqBackend for Failing {
            fn identity(&self) -> String {
                "failing".into()
            }
            fn generate(&mut self, _: &[GenerationRequest]) -> Result<Vec<crate::backend::GenerationResult>> {
                Err(Error::Backend { index: 1, message: "boom".into() })
            }
            fn finetune(
                &mut self,
                _: &[crate::finetune::TrainExample],
                _: &[crate::finetune::TrainExample],
                _: &crate::finetune::FinetuneConfig,
            ) -> Result<crate::finetune::TrainingLog> {
                unimplemented!()
            }
        }
        let ctx = Context::new("c", "A b. C d.");
        let err = generate_multitask(&ctx, &mut Failing, &cfg(Strategy::Multitask)).unwrap_err();
        assert!(matches!(err, Error::Sentence { sentence: 1, .. }));
    }

    #[test]
    fn qg_only_uses_given_answers() {
        let ctx = Context::new("c", "A b. C d.");
        let mut qg = mock(&[("A b. <hl> C <hl> d.", "What letter?")]);
        let out = generate_qg_only(
            &ctx,
            &[(1, "C".to_string()), (0, "missing".to_string())],
            &mut qg,
            &cfg(Strategy::Pipeline),
        )
        .unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.filtered, 1);
    }

    #[test]
    fn driver_reports_model_count() {
        let mut a = MockBackend::empty();
        let mut b = MockBackend::empty();
        let pipeline = QagDriver::Pipeline { ae: &mut a, qg: &mut b };
        assert_eq!(pipeline.model_count(), 2);
        let mut c = MockBackend::empty();
        assert_eq!(QagDriver::Multitask(&mut c).model_count(), 1);
        assert_eq!(QagDriver::End2end(&mut c).strategy(), Strategy::End2end);
    }
}
