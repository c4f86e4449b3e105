use uq_core::judge::{render_judge_prompt, run_judge, Aggregates, JudgeVerdict, PanelResult, ScoringTemplate};
use uq_core::ScoreVector;

use super::{Engine, Judge, Scored};
use crate::backend::{chat_generate, ChatProvider, ChatRequest};
use crate::{Error, Result};

impl Engine {
    /// One verdict from `provider` on `response`, with one retry on an
    /// unparseable reply.
    pub(super) fn verdict(
        &self,
        judge_id: &str,
        provider: &dyn ChatProvider,
        template: ScoringTemplate,
        question: &str,
        response: &str,
    ) -> JudgeVerdict {
        let prompt = match render_judge_prompt(&self.settings.judge_template, question, response, template) {
            Ok(p) => p,
            Err(e) => {
                return JudgeVerdict {
                    judge_id: judge_id.to_string(),
                    raw_reply: String::new(),
                    parsed_score: None,
                    attempts: 0,
                    error: Some(e.to_string()),
                }
            }
        };
        run_judge(judge_id, &prompt, template, |p| self.ask(provider, p))
    }

    pub(super) fn ask(&self, provider: &dyn ChatProvider, prompt: &str) -> Result<String> {
        let request = ChatRequest::new(prompt)
            .temperature(self.settings.judge_temperature)
            .seed(self.settings.seed);
        Ok(chat_generate(provider, &request)?.remove(0).text)
    }

    /// Verdicts from every configured judge, in configured order.
    pub(super) fn panel_verdicts(&self, question: &str, response: &str) -> PanelResult {
        let verdicts = self
            .judges
            .iter()
            .map(
                |Judge {
                     name,
                     provider,
                     template,
                 }| { self.verdict(name, provider.as_ref(), *template, question, response) },
            )
            .collect();
        PanelResult::from_verdicts(verdicts)
    }

    /// One generation per prompt, scored by the judge panel. Scores hold
    /// each parsed judge as `judge:<name>` plus the four aggregates.
    pub fn panel(&self, prompts: &[String]) -> Result<Vec<Scored>> {
        if self.judges.is_empty() {
            return Err(Error::config("panel mode needs at least one judge"));
        }
        Ok(crate::pool::map_ordered(
            prompts,
            self.settings.max_in_flight,
            |_, prompt| {
                let generation = match self.generate_original(prompt, false) {
                    Ok(g) => g,
                    Err(e) => return Scored::failed(&e),
                };
                let panel = self.panel_verdicts(prompt, &generation.text);
                let mut scores = ScoreVector::new();
                for v in &panel.verdicts {
                    if let Some(s) = v.parsed_score {
                        scores.insert(format!("judge:{}", v.judge_id), s);
                    }
                }
                let error = match panel.aggregates {
                    Some(a) => {
                        scores.extend(a.named().map(|(k, v)| (k.to_string(), v)));
                        None
                    }
                    None => Some("unscored: no judge returned a usable verdict".to_string()),
                };
                Scored {
                    response: Some(generation.text),
                    scores,
                    ensemble: None,
                    verdicts: Some(panel.verdicts),
                    error,
                }
            },
        ))
    }
}

/// Aggregates over the panel, keyed by their component names.
pub(super) fn aggregate_scores(panel: &PanelResult) -> Option<[(&'static str, f64); 4]> {
    panel.aggregates.as_ref().map(Aggregates::named)
}
