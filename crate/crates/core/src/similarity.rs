//! Pairwise consistency primitives. All outputs lie in `[0, 1]` and are
//! symmetric in their two arguments.

use alloc::vec::Vec;

use crate::{EmbeddingVector, EntailmentJudgment, Error, Result};

/// 1 when the trimmed texts are identical (case-sensitive), else 0.
pub fn exact_match(a: &str, b: &str) -> f64 {
    if a.trim() == b.trim() {
        1.0
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw cosine in `[-1, 1]`, given precomputed squared norms.
///
/// For `a == b` the squared norm equals the dot product and
/// `sqrt(d * d) == d` holds exactly in IEEE arithmetic, so self-similarity
/// is exactly 1.
fn cosine_with_norms(a: &[f64], b: &[f64], a_sq: f64, b_sq: f64) -> f64 {
    let c = dot(a, b) / libm::sqrt(a_sq * b_sq);
    c.clamp(-1.0, 1.0)
}

fn check_pair(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<(f64, f64)> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let a_sq = dot(a.values(), a.values());
    let b_sq = dot(b.values(), b.values());
    if a_sq == 0.0 || b_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a_sq, b_sq))
}

/// Cosine similarity mapped affinely onto `[0, 1]`: `(1 + cos) / 2`.
/// Orthogonal vectors score 0.5.
pub fn cosine_score(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    let (a_sq, b_sq) = check_pair(a, b)?;
    let c = cosine_with_norms(a.values(), b.values(), a_sq, b_sq);
    Ok(((1.0 + c) / 2.0).clamp(0.0, 1.0))
}

/// Per-token embeddings of one text.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSequence {
    tokens: Vec<alloc::string::String>,
    vectors: Vec<EmbeddingVector>,
}

impl TokenEmbeddingSequence {
    pub fn new(tokens: Vec<alloc::string::String>, vectors: Vec<EmbeddingVector>) -> Result<Self> {
        if tokens.is_empty() || vectors.is_empty() {
            return Err(Error::Precondition("token embedding sequence is empty".into()));
        }
        if tokens.len() != vectors.len() {
            return Err(Error::LengthMismatch {
                left: tokens.len(),
                right: vectors.len(),
            });
        }
        let dim = vectors[0].dimension();
        if let Some(v) = vectors.iter().find(|v| v.dimension() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: v.dimension(),
            });
        }
        Ok(Self { tokens, vectors })
    }

    pub fn tokens(&self) -> &[alloc::string::String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn dimension(&self) -> usize {
        self.vectors[0].dimension()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Greedy-matching BERTScore without IDF weighting or baseline rescaling.
///
/// Recall averages, over tokens of `reference`, the best clamped cosine to
/// any token of `candidate`; precision is the mirror image.
pub fn bertscore(candidate: &TokenEmbeddingSequence, reference: &TokenEmbeddingSequence) -> Result<BertScore> {
    if candidate.dimension() != reference.dimension() {
        return Err(Error::DimensionMismatch {
            left: candidate.dimension(),
            right: reference.dimension(),
        });
    }
    let norms = |s: &TokenEmbeddingSequence| -> Result<Vec<f64>> {
        s.vectors
            .iter()
            .map(|v| {
                let sq = dot(v.values(), v.values());
                if sq == 0.0 {
                    Err(Error::ZeroVector)
                } else {
                    Ok(sq)
                }
            })
            .collect()
    };
    let cand_sq = norms(candidate)?;
    let ref_sq = norms(reference)?;

    // sim[i][j]: candidate token i vs reference token j, clamped at zero.
    let sim: Vec<Vec<f64>> = candidate
        .vectors
        .iter()
        .zip(&cand_sq)
        .map(|(c, &csq)| {
            reference
                .vectors
                .iter()
                .zip(&ref_sq)
                .map(|(r, &rsq)| cosine_with_norms(c.values(), r.values(), csq, rsq).max(0.0))
                .collect()
        })
        .collect();

    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / candidate.len() as f64;
    let recall = (0..reference.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(0.0, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        (2.0 * precision * recall / (precision + recall)).clamp(0.0, 1.0)
    };
    Ok(BertScore { precision, recall, f1 })
}

pub fn bertscore_f1(a: &TokenEmbeddingSequence, b: &TokenEmbeddingSequence) -> Result<f64> {
    bertscore(a, b).map(|s| s.f1)
}

/// Mean of `1 - p_contradict` over both directions.
pub fn noncontradiction<F, E>(a: &str, b: &str, mut entail: F) -> core::result::Result<f64, E>
where
    F: FnMut(&str, &str) -> core::result::Result<EntailmentJudgment, E>,
    E: From<Error>,
{
    if a.trim().is_empty() || b.trim().is_empty() {
        return Err(Error::Precondition("non-contradiction needs non-empty texts".into()).into());
    }
    let forward = entail(a, b)?;
    let backward = entail(b, a)?;
    Ok(symmetric_noncontradiction(&forward, &backward))
}

pub fn symmetric_noncontradiction(forward: &EntailmentJudgment, backward: &EntailmentJudgment) -> f64 {
    (((1.0 - forward.p_contradict()) + (1.0 - backward.p_contradict())) / 2.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::{String, ToString};
    use alloc::vec;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    fn seq(vs: &[&[f64]]) -> TokenEmbeddingSequence {
        let tokens = (0..vs.len()).map(|i| i.to_string()).collect();
        TokenEmbeddingSequence::new(tokens, vs.iter().map(|x| v(x)).collect()).unwrap()
    }

    #[test]
    fn exact_match_rules() {
        assert_eq!(exact_match("Paris", "Paris "), 1.0);
        assert_eq!(exact_match("Paris", "paris"), 0.0);
        assert_eq!(exact_match("", ""), 1.0);
    }

    #[test]
    fn cosine_endpoints() {
        let a = v(&[0.6, 0.8]);
        assert_eq!(cosine_score(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_score(&v(&[1.0, 0.0]), &v(&[0.0, 2.0])).unwrap(), 0.5);
        assert_eq!(cosine_score(&v(&[1.0, 2.0]), &v(&[-1.0, -2.0])).unwrap(), 0.0);
        assert_eq!(cosine_score(&v(&[0.0, 0.0]), &a), Err(Error::ZeroVector));
        assert!(matches!(
            cosine_score(&v(&[1.0]), &a),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn bertscore_cases() {
        let s = seq(&[&[1.0, 0.0], &[0.3, 0.7]]);
        assert_eq!(bertscore_f1(&s, &s).unwrap(), 1.0);

        let neg = seq(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        let pos = seq(&[&[1.0, 0.0], &[0.0, 1.0]]);
        // cross cosines are -1 or 0, all clamp to 0
        assert_eq!(bertscore_f1(&pos, &neg).unwrap(), 0.0);

        // one token vs two tokens with cosines {1, 0}: R = 1, P = 0.5, F1 = 2/3
        let a = seq(&[&[1.0, 0.0]]);
        let b = seq(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let s = bertscore(&b, &a).unwrap();
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.precision, 0.5);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((bertscore_f1(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn token_sequence_validation() {
        assert!(TokenEmbeddingSequence::new(vec![], vec![]).is_err());
        assert!(TokenEmbeddingSequence::new(vec![String::from("a")], vec![v(&[1.0]), v(&[1.0])]).is_err());
        assert!(TokenEmbeddingSequence::new(
            vec![String::from("a"), String::from("b")],
            vec![v(&[1.0]), v(&[1.0, 0.0])]
        )
        .is_err());
    }

    #[test]
    fn noncontradiction_symmetrizes() {
        let table = |p: &str, _h: &str| -> Result<EntailmentJudgment> {
            if p == "a" {
                EntailmentJudgment::new(0.5, 0.3, 0.2)
            } else {
                EntailmentJudgment::new(0.3, 0.3, 0.4)
            }
        };
        let s = noncontradiction("a", "b", table).unwrap();
        assert!((s - 0.7).abs() < 1e-12);
        let s2 = noncontradiction("b", "a", table).unwrap();
        assert_eq!(s, s2);

        let never = |_: &str, _: &str| EntailmentJudgment::new(0.0, 1.0, 0.0);
        assert_eq!(noncontradiction("x", "y", never).unwrap(), 1.0);
        let always = |_: &str, _: &str| EntailmentJudgment::new(0.0, 0.0, 1.0);
        assert_eq!(noncontradiction("x", "y", always).unwrap(), 0.0);
        assert!(noncontradiction(" ", "y", never).is_err());
    }
}
