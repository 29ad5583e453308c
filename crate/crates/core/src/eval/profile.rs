//! Resource accounting per strategy: backend calls, models held in memory,
//! and pair yield relative to a gold dataset.

use serde::{Deserialize, Serialize};

use super::{synthesize_dataset, Synthesis};
use crate::backend::Instrumented;
use crate::error::Result;
use crate::strategies::{QagDriver, StrategyConfig};
use crate::types::{Context, Split, Strategy};

/// Raw counts from one strategy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub paragraphs: usize,
    pub backend_calls: usize,
    pub model_count: usize,
    pub generated_pairs: usize,
    pub gold_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceProfile {
    pub strategy: Strategy,
    pub backend_calls_per_paragraph: f64,
    pub model_count: usize,
    /// Generated pairs per gold pair; 0 when there is no gold data.
    pub pairs_per_gold_pair: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl From<&StrategyRun> for ResourceProfile {
    fn from(run: &StrategyRun) -> Self {
        Self {
            strategy: run.strategy,
            backend_calls_per_paragraph: ratio(run.backend_calls, run.paragraphs),
            model_count: run.model_count,
            pairs_per_gold_pair: ratio(run.generated_pairs, run.gold_pairs),
        }
    }
}

pub fn profile_resources(runs: &[StrategyRun]) -> Vec<ResourceProfile> {
    runs.iter().map(ResourceProfile::from).collect()
}

/// Ratios of one profile to a baseline, e.g. pipeline over end2end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeProfile {
    pub cost: f64,
    pub memory: f64,
    pub pairs: f64,
}

impl ResourceProfile {
    pub fn relative_to(&self, baseline: &ResourceProfile) -> RelativeProfile {
        let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        RelativeProfile {
            cost: div(self.backend_calls_per_paragraph, baseline.backend_calls_per_paragraph),
            memory: div(self.model_count as f64, baseline.model_count as f64),
            pairs: div(self.pairs_per_gold_pair, baseline.pairs_per_gold_pair),
        }
    }
}

/// `9.2x`, `2x`, `1x`: one decimal, trailing `.0` dropped.
pub fn format_multiple(value: f64) -> String {
    let s = format!("{value:.1}");
    match s.strip_suffix(".0") {
        Some(whole) => format!("{whole}x"),
        None => format!("{s}x"),
    }
}

/// Synthesizes `contexts` through instrumented handles and reports the counts.
pub fn run_profiled(
    contexts: &[Context],
    gold_pairs: usize,
    driver: &mut QagDriver<'_>,
    cfg: &StrategyConfig,
) -> Result<(Synthesis, StrategyRun)> {
    let strategy = driver.strategy();
    let model_count = driver.model_count();
    let (synthesis, backend_calls) = match driver {
        QagDriver::Pipeline { ae, qg } => {
            let mut ae = Instrumented::new(&mut **ae);
            let mut qg = Instrumented::new(&mut **qg);
            let s = synthesize_dataset(
                contexts,
                &mut QagDriver::Pipeline {
                    ae: &mut ae,
                    qg: &mut qg,
                },
                cfg,
                Split::Train,
            )?;
            (s, ae.calls() + qg.calls())
        }
        QagDriver::Multitask(m) => {
            let mut m = Instrumented::new(&mut **m);
            let s = synthesize_dataset(contexts, &mut QagDriver::Multitask(&mut m), cfg, Split::Train)?;
            (s, m.calls())
        }
        QagDriver::End2end(m) => {
            let mut m = Instrumented::new(&mut **m);
            let s = synthesize_dataset(contexts, &mut QagDriver::End2end(&mut m), cfg, Split::Train)?;
            (s, m.calls())
        }
    };
    let run = StrategyRun {
        strategy,
        paragraphs: contexts.len(),
        backend_calls,
        model_count,
        generated_pairs: synthesis.dataset.pair_count(),
        gold_pairs,
    };
    Ok((synthesis, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{MockBackend, MockFixture};

    #[test]
    fn multiples() {
        assert_eq!(format_multiple(9.2), "9.2x");
        assert_eq!(format_multiple(2.0), "2x");
        assert_eq!(format_multiple(1.0), "1x");
        assert_eq!(format_multiple(2.66), "2.7x");
    }

    #[test]
    fn profile_from_counts() {
        let p = ResourceProfile::from(&StrategyRun {
            strategy: Strategy::Pipeline,
            paragraphs: 4,
            backend_calls: 40,
            model_count: 2,
            generated_pairs: 27,
            gold_pairs: 10,
        });
        assert_eq!(p.backend_calls_per_paragraph, 10.0);
        assert_eq!(p.pairs_per_gold_pair, 2.7);
    }

    #[test]
    fn five_sentence_paragraph_counts() {
        let ctx = Context::new("c", "A one. B two. C three. D four. E five.");
        let mut fixture = MockFixture::default();
        for (i, s) in ["A", "B", "C", "D", "E"].iter().enumerate() {
            let sentence = ctx.sentence_text(i).unwrap().to_string();
            let highlighted = ctx.text().replace(&sentence, &format!("<hl> {sentence} <hl>"));
            fixture.insert(highlighted, *s);
        }
        let mut ae = MockBackend::new(fixture.clone());
        let mut qg = MockBackend::new(MockFixture::default());
        let mut e2e = MockBackend::new(MockFixture::default());
        let cfg = StrategyConfig::new(Strategy::Pipeline);
        let (_, pipe) = run_profiled(
            std::slice::from_ref(&ctx),
            1,
            &mut QagDriver::Pipeline { ae: &mut ae, qg: &mut qg },
            &cfg,
        )
        .unwrap();
        let (_, end) = run_profiled(std::slice::from_ref(&ctx), 1, &mut QagDriver::End2end(&mut e2e), &cfg).unwrap();
        let pipe = ResourceProfile::from(&pipe);
        let end = ResourceProfile::from(&end);
        assert_eq!(pipe.backend_calls_per_paragraph, 10.0);
        assert_eq!(end.backend_calls_per_paragraph, 1.0);
        assert_eq!((pipe.model_count, end.model_count), (2, 1));
        assert_eq!(format_multiple(pipe.relative_to(&end).memory), "2x");
    }
}
