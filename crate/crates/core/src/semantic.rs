//! Candidate sets, consistency aggregation, entailment clustering, discrete
//! semantic entropy and uncertainty-minimized response selection.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{EntailmentJudgment, Error, Generation, Result};

/// The original response to a prompt plus `m >= 1` candidate responses.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    prompt: String,
    original: Generation,
    candidates: Vec<Generation>,
}

impl CandidateSet {
    pub fn new(prompt: impl Into<String>, original: Generation, candidates: Vec<Generation>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Precondition(
                "a candidate set needs at least one candidate".into(),
            ));
        }
        Ok(Self {
            prompt: prompt.into(),
            original,
            candidates,
        })
    }

    pub fn prompt(&self) -> &str {
        &self.prompt
    }

    pub fn original(&self) -> &Generation {
        &self.original
    }

    pub fn candidates(&self) -> &[Generation] {
        &self.candidates
    }

    /// Total number of responses, `1 + m`.
    pub fn len(&self) -> usize {
        1 + self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Response `i`, where 0 is the original and `1..=m` the candidates.
    pub fn response(&self, i: usize) -> &Generation {
        if i == 0 {
            &self.original
        } else {
            &self.candidates[i - 1]
        }
    }

    pub fn responses(&self) -> impl Iterator<Item = &Generation> {
        core::iter::once(&self.original).chain(&self.candidates)
    }

    pub fn texts(&self) -> Vec<&str> {
        self.responses().map(|g| g.text.as_str()).collect()
    }

    /// Makes response `index` the original; the remaining responses become
    /// the candidates in their existing order.
    pub fn recentered(&self, index: usize) -> CandidateSet {
        if index == 0 {
            return self.clone();
        }
        let original = self.response(index).clone();
        let candidates = (0..self.len())
            .filter(|&i| i != index)
            .map(|i| self.response(i).clone())
            .collect();
        CandidateSet {
            prompt: self.prompt.clone(),
            original,
            candidates,
        }
    }
}

/// Mean of `primitive(original, candidate_j)` over all candidates.
pub fn consistency_score<F, E>(set: &CandidateSet, mut primitive: F) -> core::result::Result<f64, E>
where
    F: FnMut(&str, &str) -> core::result::Result<f64, E>,
{
    let original = set.original.text.as_str();
    let mut total = 0.0;
    for c in &set.candidates {
        total += primitive(original, &c.text)?;
    }
    Ok((total / set.candidates.len() as f64).clamp(0.0, 1.0))
}

/// A partition of `n` responses into meaning-equivalence clusters. Cluster
/// order is founding order; members are listed in ascending index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticClustering {
    clusters: Vec<Vec<usize>>,
    assignment: Vec<usize>,
}

impl SemanticClustering {
    /// Builds a clustering from explicit clusters, checking that they
    /// partition `0..n`.
    pub fn from_clusters(mut clusters: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = clusters.iter().map(Vec::len).sum();
        if n == 0 || clusters.iter().any(Vec::is_empty) {
            return Err(Error::Precondition("clusters must be non-empty".into()));
        }
        let mut assignment = vec![usize::MAX; n];
        for (k, members) in clusters.iter_mut().enumerate() {
            members.sort_unstable();
            for &i in members.iter() {
                if i >= n || assignment[i] != usize::MAX {
                    return Err(Error::Precondition("clusters do not partition the responses".into()));
                }
                assignment[i] = k;
            }
        }
        Ok(Self { clusters, assignment })
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    pub fn cluster_of(&self, response: usize) -> usize {
        self.assignment[response]
    }

    pub fn response_count(&self) -> usize {
        self.assignment.len()
    }
}

/// Incremental bidirectional-entailment clustering.
///
/// Response `i` joins the first cluster whose representative (its first
/// member) it entails in both directions, where "entails" means entailment
/// is the argmax class; otherwise it founds a new cluster. Entailment calls
/// are issued sequentially in a fixed order, so the outcome depends only on
/// the judgments, never on scheduling.
pub fn semantic_cluster<F, E>(responses: &[&str], mut entail: F) -> core::result::Result<SemanticClustering, E>
where
    F: FnMut(&str, &str) -> core::result::Result<EntailmentJudgment, E>,
    E: From<Error>,
{
    if responses.is_empty() {
        return Err(Error::Precondition("nothing to cluster".into()).into());
    }
    if responses.iter().any(|r| r.trim().is_empty()) {
        return Err(Error::Precondition("cannot cluster empty responses".into()).into());
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    'outer: for (i, text) in responses.iter().enumerate() {
        for members in clusters.iter_mut() {
            let rep = responses[members[0]];
            if entail(rep, text)?.entails() && entail(text, rep)?.entails() {
                members.push(i);
                continue 'outer;
            }
        }
        clusters.push(vec![i]);
    }
    Ok(SemanticClustering::from_clusters(clusters)?)
}

/// `1 - H / ln(n)` where `H` is the entropy of the cluster-size
/// distribution; 1.0 for a single response.
pub fn semantic_entropy_confidence(clustering: &SemanticClustering) -> f64 {
    let n = clustering.response_count();
    if n <= 1 {
        return 1.0;
    }
    let mut sizes = clustering.cluster_sizes();
    // fixed summation order keeps the result independent of founding order
    sizes.sort_unstable();
    let nf = n as f64;
    let entropy: f64 = sizes
        .iter()
        .map(|&s| {
            let p = s as f64 / nf;
            -p * libm::log(p)
        })
        .sum();
    (1.0 - entropy / libm::log(nf)).clamp(0.0, 1.0)
}

/// Index of the uncertainty-minimized response: the earliest member of the
/// largest cluster. Ties prefer the cluster holding the original (index 0),
/// then the earliest-founded cluster.
pub fn select_best(clustering: &SemanticClustering) -> usize {
    let original_cluster = clustering.cluster_of(0);
    let best = clustering
        .clusters
        .iter()
        .enumerate()
        .max_by(|(ka, a), (kb, b)| {
            a.len()
                .cmp(&b.len())
                .then_with(|| (*ka == original_cluster).cmp(&(*kb == original_cluster)))
                .then_with(|| kb.cmp(ka))
        })
        .map(|(k, _)| k)
        .unwrap_or(0);
    clustering.clusters[best][0]
}
