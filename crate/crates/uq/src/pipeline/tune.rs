use std::sync::Arc;

use uq_core::ensemble::{tune_weights, Objective, SearchConfig, TuneOutcome, TuningRecord};
use uq_core::judge::{render_grader_prompt, ScoringTemplate, DEFAULT_GRADER_TEMPLATE};
use uq_core::similarity::exact_match;

use super::ensemble::apply_weights;
use super::{Component, Engine, Scored};
use crate::backend::ChatProvider;
use crate::Result;

type GradeFn = dyn Fn(&str, &str, &str) -> Result<bool> + Send + Sync;

/// Produces the binary correctness grade of a response against its ideal.
#[derive(Clone)]
pub enum Grader {
    /// Trimmed, case-sensitive equality with the ideal response.
    ExactMatch,
    /// A chat model asked for a binary verdict, with one strict retry.
    Judge(Arc<dyn ChatProvider>),
    /// `(prompt, response, ideal) -> correct`.
    Custom(Arc<GradeFn>),
}

impl Grader {
    fn grade(&self, engine: &Engine, prompt: &str, response: &str, ideal: &str) -> Result<bool> {
        match self {
            Self::ExactMatch => Ok(exact_match(response, ideal) == 1.0),
            Self::Judge(provider) => {
                let question = render_grader_prompt(DEFAULT_GRADER_TEMPLATE, prompt, ideal, response)?;
                let verdict = uq_core::judge::run_judge("grader", &question, ScoringTemplate::Binary, |p| {
                    engine.ask(provider.as_ref(), p)
                });
                match verdict.parsed_score {
                    Some(s) => Ok(s == 1.0),
                    None => Err(crate::Error::from(uq_core::Error::ParseFailure {
                        template: "binary",
                        reply: verdict.error.unwrap_or(verdict.raw_reply),
                    })),
                }
            }
            Self::Custom(f) => f(prompt, response, ideal),
        }
    }
}

pub struct TuneRun {
    /// Per-prompt results with ensemble scores under the tuned weights.
    pub results: Vec<Scored>,
    /// `None` where grading failed or the prompt was not scored.
    pub grades: Vec<Option<bool>>,
    pub outcome: TuneOutcome,
}

impl Engine {
    /// Scores every `(prompt, ideal)` item, grades the responses, and fits
    /// ensemble weights over `components`. Items that fail to score or grade
    /// are left out of the fit with a warning.
    pub fn tune(
        &self,
        items: &[(String, String)],
        components: &[Component],
        objective: Objective,
        search: &SearchConfig,
        grader: &Grader,
    ) -> Result<TuneRun> {
        let plan = self.plan(components)?;
        let scored: Vec<(Scored, Option<bool>)> =
            crate::pool::map_ordered(items, self.settings.max_in_flight, |i, (prompt, ideal)| {
                let scored = match self.component_scores(prompt, &plan) {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("item {i} excluded from tuning: {e}");
                        return (Scored::failed(&e), None);
                    }
                };
                let response = scored.response.as_deref().unwrap_or_default();
                match grader.grade(self, prompt, response, ideal) {
                    Ok(g) => (scored, Some(g)),
                    Err(e) => {
                        log::warn!("item {i} excluded from tuning: grading failed: {e}");
                        (scored, None)
                    }
                }
            });

        let mut records = Vec::new();
        for (i, ((s, grade), (prompt, ideal))) in scored.iter().zip(items).enumerate() {
            let Some(grade) = grade else { continue };
            if let Some(missing) = plan.ids.iter().find(|id| !s.scores.contains_key(*id)) {
                log::warn!("item {i} excluded from tuning: component {missing} produced no score");
                continue;
            }
            records.push(TuningRecord {
                prompt: prompt.clone(),
                ideal_response: ideal.clone(),
                scorer_scores: s.scores.clone(),
                grade: *grade,
            });
        }
        let outcome = tune_weights(&records, &plan.ids, objective, search)?;
        let (results, grades) = scored
            .into_iter()
            .map(|(mut s, g)| {
                apply_weights(&mut s, &outcome.weights);
                (s, g)
            })
            .unzip();
        Ok(TuneRun {
            results,
            grades,
            outcome,
        })
    }
}
