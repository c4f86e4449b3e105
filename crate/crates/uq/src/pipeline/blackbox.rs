use std::collections::HashMap;

use uq_core::semantic::{consistency_score, select_best, semantic_cluster, semantic_entropy_confidence, CandidateSet};
use uq_core::similarity::{bertscore_f1, cosine_score, exact_match, noncontradiction, TokenEmbeddingSequence};
use uq_core::{BlackBoxScorer, EntailmentJudgment, ScoreVector};

use super::{Engine, Scored};
use crate::backend::{embed, entail};
use crate::{Error, Result};

impl Engine {
    /// Fails unless the providers needed by `scorers` are configured.
    pub(super) fn check_blackbox(&self, scorers: &[BlackBoxScorer]) -> Result<()> {
        if self.settings.num_responses == 0 {
            return Err(Error::config("num_responses must be at least 1"));
        }
        if self.settings.use_best || scorers.iter().any(|s| s.needs_entailment()) {
            self.entailer()?;
        }
        if scorers.iter().any(|s| s.needs_embeddings()) {
            self.embedder()?;
        }
        Ok(())
    }

    /// Consistency scores from one original and `num_responses` candidates
    /// per prompt.
    pub fn blackbox(&self, prompts: &[String], scorers: &[BlackBoxScorer]) -> Result<Vec<Scored>> {
        if scorers.is_empty() {
            return Err(Error::config("no black-box scorers requested"));
        }
        self.check_blackbox(scorers)?;
        Ok(crate::pool::map_ordered(
            prompts,
            self.settings.max_in_flight,
            |_, prompt| match self.blackbox_prompt(prompt, scorers, false) {
                Ok((set, scores)) => Scored {
                    response: Some(set.original().text.clone()),
                    scores,
                    ..Scored::default()
                },
                Err(e) => Scored::failed(&e),
            },
        ))
    }

    /// Generates the candidate set for one prompt, recenters it on the
    /// selected response when `use_best` is on, and scores it. The returned
    /// set's original is the reported response.
    pub(super) fn blackbox_prompt(
        &self,
        prompt: &str,
        scorers: &[BlackBoxScorer],
        want_logprobs: bool,
    ) -> Result<(CandidateSet, ScoreVector)> {
        let original = self.generate_original(prompt, want_logprobs)?;
        let candidates = self.generate_candidates(prompt, want_logprobs)?;
        let mut set = CandidateSet::new(prompt, original, candidates)?;

        // entailment is memoized per prompt; clustering and NCP share pairs
        let mut memo: HashMap<(String, String), EntailmentJudgment> = HashMap::new();
        let mut judge = |p: &str, h: &str| -> Result<EntailmentJudgment> {
            let key = (p.to_string(), h.to_string());
            if let Some(j) = memo.get(&key) {
                return Ok(*j);
            }
            let j = entail(self.entailer()?, p, h)?;
            memo.insert(key, j);
            Ok(j)
        };

        let needs_clusters = self.settings.use_best || scorers.contains(&BlackBoxScorer::SemanticEntropy);
        let clustering = if needs_clusters {
            Some(semantic_cluster(&set.texts(), &mut judge)?)
        } else {
            None
        };
        if let (true, Some(c)) = (self.settings.use_best, &clustering) {
            set = set.recentered(select_best(c));
        }

        let mut scores = ScoreVector::new();
        for scorer in scorers {
            let value = match scorer {
                BlackBoxScorer::ExactMatch => consistency_score(&set, |a, b| Ok::<_, Error>(exact_match(a, b)))?,
                BlackBoxScorer::CosineSim => {
                    let texts: Vec<String> = set.texts().iter().map(|t| t.to_string()).collect();
                    let vectors = embed(self.embedder()?, &texts)?;
                    let mut total = 0.0;
                    for v in &vectors[1..] {
                        total += cosine_score(&vectors[0], v)?;
                    }
                    (total / (vectors.len() - 1) as f64).clamp(0.0, 1.0)
                }
                BlackBoxScorer::BertScore => {
                    let seqs = self.token_embeddings(&set.texts())?;
                    let mut total = 0.0;
                    for s in &seqs[1..] {
                        total += bertscore_f1(&seqs[0], s)?;
                    }
                    (total / (seqs.len() - 1) as f64).clamp(0.0, 1.0)
                }
                BlackBoxScorer::NonContradiction => consistency_score(&set, |a, b| noncontradiction(a, b, &mut judge))?,
                BlackBoxScorer::SemanticEntropy => {
                    semantic_entropy_confidence(clustering.as_ref().expect("clustering computed"))
                }
            };
            scores.insert(scorer.to_string(), value);
        }
        Ok((set, scores))
    }

    /// Whitespace tokens of every text, embedded in a single request.
    fn token_embeddings(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingSequence>> {
        let tokenized: Vec<Vec<String>> = texts
            .iter()
            .map(|t| t.split_whitespace().map(str::to_string).collect())
            .collect();
        if tokenized.iter().any(Vec::is_empty) {
            return Err(uq_core::Error::Precondition("cannot embed an empty response".into()).into());
        }
        let flat: Vec<String> = tokenized.iter().flatten().cloned().collect();
        let mut vectors = embed(self.embedder()?, &flat)?.into_iter();
        tokenized
            .into_iter()
            .map(|tokens| {
                let vs = vectors.by_ref().take(tokens.len()).collect();
                Ok(TokenEmbeddingSequence::new(tokens, vs)?)
            })
            .collect()
    }
}
