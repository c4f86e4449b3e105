use uq_core::ensemble::{ensemble_score, EnsembleWeights};
use uq_core::{BlackBoxScorer, ScoreVector, WhiteBoxScorer};

use super::panel::aggregate_scores;
use super::{Component, Engine, Scored};
use crate::{Error, Result};

/// What one ensemble pass has to compute for its components.
#[derive(Debug, Clone, Default)]
pub(super) struct Plan {
    pub ids: Vec<String>,
    blackbox: Vec<BlackBoxScorer>,
    whitebox: Vec<WhiteBoxScorer>,
    self_judge: bool,
    panel: bool,
}

impl Engine {
    /// Validates components against the configured providers, before any
    /// generation happens.
    pub(super) fn plan(&self, components: &[Component]) -> Result<Plan> {
        if components.is_empty() {
            return Err(uq_core::Error::EmptyScorerSet.into());
        }
        let mut plan = Plan::default();
        for c in components {
            match c {
                Component::BlackBox(b) => plan.blackbox.push(*b),
                Component::WhiteBox(w) => plan.whitebox.push(*w),
                Component::SelfJudge => plan.self_judge = true,
                Component::Judge(name) => {
                    if !self.judges.iter().any(|j| &j.name == name) {
                        return Err(Error::config(format!("component {c} names no configured judge")));
                    }
                    plan.panel = true;
                }
                Component::Aggregate(_) => {
                    if self.judges.is_empty() {
                        return Err(Error::config(format!("component {c} needs at least one judge")));
                    }
                    plan.panel = true;
                }
            }
            plan.ids.push(c.to_string());
        }
        if !plan.blackbox.is_empty() {
            self.check_blackbox(&plan.blackbox)?;
        }
        if !plan.whitebox.is_empty() {
            self.check_logprobs()?;
        }
        Ok(plan)
    }

    /// Scores every component of `plan` for one prompt from a single
    /// generation pass. Missing judge verdicts leave their component absent.
    pub(super) fn component_scores(&self, prompt: &str, plan: &Plan) -> Result<Scored> {
        let want_logprobs = !plan.whitebox.is_empty();
        let (generation, mut scores) = if plan.blackbox.is_empty() {
            (self.generate_original(prompt, want_logprobs)?, ScoreVector::new())
        } else {
            let (set, scores) = self.blackbox_prompt(prompt, &plan.blackbox, want_logprobs)?;
            (set.original().clone(), scores)
        };
        if want_logprobs {
            scores.extend(super::whitebox_scores(&generation, &plan.whitebox)?);
        }
        let mut verdicts = Vec::new();
        if plan.self_judge {
            let v = self.verdict(
                "self_judge",
                self.generator.as_ref(),
                self.settings.self_judge_template,
                prompt,
                &generation.text,
            );
            if let Some(s) = v.parsed_score {
                scores.insert("self_judge".into(), s);
            }
            verdicts.push(v);
        }
        if plan.panel {
            let panel = self.panel_verdicts(prompt, &generation.text);
            for v in &panel.verdicts {
                if let Some(s) = v.parsed_score {
                    scores.insert(format!("judge:{}", v.judge_id), s);
                }
            }
            if let Some(named) = aggregate_scores(&panel) {
                scores.extend(named.map(|(k, v)| (k.to_string(), v)));
            }
            verdicts.extend(panel.verdicts);
        }
        scores.retain(|k, _| plan.ids.contains(k));
        Ok(Scored {
            response: Some(generation.text),
            scores,
            ensemble: None,
            verdicts: (plan.self_judge || plan.panel).then_some(verdicts),
            error: None,
        })
    }

    /// Component scores and the weighted ensemble for each prompt.
    pub fn ensemble(&self, prompts: &[String], weights: &EnsembleWeights) -> Result<Vec<Scored>> {
        let components = weights.ids().map(str::parse).collect::<Result<Vec<Component>>>()?;
        let plan = self.plan(&components)?;
        Ok(crate::pool::map_ordered(
            prompts,
            self.settings.max_in_flight,
            |_, prompt| {
                let mut scored = self
                    .component_scores(prompt, &plan)
                    .unwrap_or_else(|e| Scored::failed(&e));
                apply_weights(&mut scored, weights);
                scored
            },
        ))
    }
}

/// Sets the ensemble score, or flags the record when a component is missing.
pub(super) fn apply_weights(scored: &mut Scored, weights: &EnsembleWeights) {
    if scored.error.is_some() {
        return;
    }
    match ensemble_score(&scored.scores, weights) {
        Ok(v) => scored.ensemble = Some(v),
        Err(uq_core::Error::MissingScorer(id)) => {
            scored.error = Some(format!("component {id} produced no score"));
        }
        Err(e) => scored.error = Some(e.to_string()),
    }
}
