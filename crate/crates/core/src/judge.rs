//! LLM-as-a-judge: prompt rendering, verdict parsing and panel aggregation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Judge prompt shipped with the crate. Placeholders: `{question}`,
/// `{response}`, `{value_vocabulary}`.
pub const DEFAULT_JUDGE_TEMPLATE: &str = include_str!("../templates/judge_v1.txt");

/// Grading prompt used when a judge grades responses against an answer key.
/// Placeholders: `{question}`, `{ideal}`, `{response}`.
pub const DEFAULT_GRADER_TEMPLATE: &str = include_str!("../templates/grader_v1.txt");

/// Appended to the prompt for the single retry after a parse failure.
pub const STRICT_SUFFIX: &str = "\nReply with only the value.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScoringTemplate {
    Binary,
    Ternary,
    Continuous,
    Likert,
}

impl ScoringTemplate {
    pub const ALL: [ScoringTemplate; 4] = [Self::Binary, Self::Ternary, Self::Continuous, Self::Likert];

    pub fn name(self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::Ternary => "ternary",
            Self::Continuous => "continuous",
            Self::Likert => "likert",
        }
    }

    /// Discrete admissible scores, or `None` for the continuous template.
    pub fn admissible_values(self) -> Option<&'static [f64]> {
        match self {
            Self::Binary => Some(&[0.0, 1.0]),
            Self::Ternary => Some(&[0.0, 0.5, 1.0]),
            Self::Likert => Some(&[0.0, 0.25, 0.5, 0.75, 1.0]),
            Self::Continuous => None,
        }
    }

    pub fn is_admissible(self, score: f64) -> bool {
        match self.admissible_values() {
            Some(values) => values.contains(&score),
            None => (0.0..=1.0).contains(&score),
        }
    }

    pub fn value_vocabulary(self) -> &'static str {
        match self {
            Self::Binary => "exactly 0 or 1, where 0 = incorrect and 1 = correct.",
            Self::Ternary => "exactly 0, 0.5 or 1, where 0 = incorrect, 0.5 = uncertain and 1 = correct.",
            Self::Continuous => {
                "any number between 0 and 1 inclusive, where 0 = certainly incorrect and 1 = certainly correct."
            }
            Self::Likert => {
                "an integer from 1 to 5, where 1 = completely incorrect (score 0), 2 = mostly incorrect \
                 (score 0.25), 3 = partially correct (score 0.5), 4 = mostly correct (score 0.75) and \
                 5 = completely correct (score 1)."
            }
        }
    }
}

impl FromStr for ScoringTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTemplate(s.into()))
    }
}

impl fmt::Display for ScoringTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Single-pass `{name}` substitution; substituted text is never rescanned.
fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let hit = vars.iter().find(|(name, _)| {
            tail.len() > name.len() + 1 && tail[1..].starts_with(name) && tail.as_bytes()[name.len() + 1] == b'}'
        });
        match hit {
            Some((name, value)) => {
                out.push_str(value);
                rest = &tail[name.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn render_judge_prompt(
    template_text: &str,
    question: &str,
    response: &str,
    scoring: ScoringTemplate,
) -> Result<String> {
    if question.trim().is_empty() || response.trim().is_empty() {
        return Err(Error::Precondition(
            "judge prompt needs a question and a response".into(),
        ));
    }
    Ok(substitute(
        template_text,
        &[
            ("question", question),
            ("response", response),
            ("value_vocabulary", scoring.value_vocabulary()),
        ],
    ))
}

pub fn render_grader_prompt(template_text: &str, question: &str, ideal: &str, response: &str) -> Result<String> {
    if question.trim().is_empty() || ideal.trim().is_empty() {
        return Err(Error::Precondition(
            "grader prompt needs a question and an ideal answer".into(),
        ));
    }
    Ok(substitute(
        template_text,
        &[("question", question), ("ideal", ideal), ("response", response)],
    ))
}

/// First decimal number in `s` (`12`, `0.5`, `.5`, with an optional
/// directly preceding minus sign).
fn first_number(s: &str) -> Option<f64> {
    let bytes = s.as_bytes();
    let start = (0..bytes.len()).find(|&i| {
        bytes[i].is_ascii_digit() || (bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
    })?;
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end < bytes.len() && bytes[end] == b'.' && bytes.get(end + 1).is_some_and(u8::is_ascii_digit) {
        end += 1;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
    }
    let value: f64 = s[start..end].parse().ok()?;
    let negative = start > 0 && bytes[start - 1] == b'-';
    Some(if negative { -value } else { value })
}

/// Maps a judge reply to a score in `[0, 1]`. Out-of-vocabulary replies are
/// rejected, never clamped.
pub fn parse_verdict(raw: &str, template: ScoringTemplate) -> Result<f64> {
    let fail = || Error::ParseFailure {
        template: template.name(),
        reply: raw.into(),
    };
    let value = first_number(raw).ok_or_else(fail)?;
    let score = match template {
        ScoringTemplate::Likert => {
            if value != libm::trunc(value) || !(1.0..=5.0).contains(&value) {
                return Err(fail());
            }
            (value - 1.0) / 4.0
        }
        _ => value,
    };
    // "-0" parses to -0.0
    let score = score + 0.0;
    if template.is_admissible(score) {
        Ok(score)
    } else {
        Err(fail())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JudgeVerdict {
    pub judge_id: String,
    pub raw_reply: String,
    pub parsed_score: Option<f64>,
    pub attempts: u32,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub error: Option<String>,
}

/// Queries a judge once and retries once with [`STRICT_SUFFIX`] if the reply
/// does not parse. A failed call ends the attempt with a null verdict that
/// carries the error.
pub fn run_judge<F, E>(judge_id: &str, prompt: &str, template: ScoringTemplate, mut ask: F) -> JudgeVerdict
where
    F: FnMut(&str) -> core::result::Result<String, E>,
    E: fmt::Display,
{
    let mut verdict = JudgeVerdict {
        judge_id: judge_id.into(),
        raw_reply: String::new(),
        parsed_score: None,
        attempts: 0,
        error: None,
    };
    let strict = {
        let mut p = String::from(prompt);
        p.push_str(STRICT_SUFFIX);
        p
    };
    for attempt_prompt in [prompt, strict.as_str()] {
        verdict.attempts += 1;
        match ask(attempt_prompt) {
            Ok(reply) => {
                let parsed = parse_verdict(&reply, template);
                verdict.raw_reply = reply;
                match parsed {
                    Ok(score) => {
                        verdict.parsed_score = Some(score);
                        verdict.error = None;
                        return verdict;
                    }
                    Err(e) => verdict.error = Some(e.to_string()),
                }
            }
            Err(e) => {
                verdict.error = Some(e.to_string());
                return verdict;
            }
        }
    }
    verdict
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aggregates {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub median: f64,
}

impl Aggregates {
    pub const NAMES: [&'static str; 4] = ["judge_min", "judge_max", "judge_avg", "judge_median"];

    /// Order statistics and mean; `None` for an empty slice. The median of an
    /// even count is the mean of the two middle values.
    pub fn of(scores: &[f64]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let mut sorted: Vec<f64> = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let (min, max) = (sorted[0], sorted[n - 1]);
        let avg = (sorted.iter().sum::<f64>() / n as f64).clamp(min, max);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            ((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0).clamp(min, max)
        };
        Some(Self { min, max, avg, median })
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            (Self::NAMES[0], self.min),
            (Self::NAMES[1], self.max),
            (Self::NAMES[2], self.avg),
            (Self::NAMES[3], self.median),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PanelResult {
    pub verdicts: Vec<JudgeVerdict>,
    pub aggregates: Option<Aggregates>,
}

impl PanelResult {
    /// Aggregates over the non-null verdicts only.
    pub fn from_verdicts(verdicts: Vec<JudgeVerdict>) -> Self {
        let scores: Vec<f64> = verdicts.iter().filter_map(|v| v.parsed_score).collect();
        let aggregates = Aggregates::of(&scores);
        Self { verdicts, aggregates }
    }

    pub fn is_unscored(&self) -> bool {
        self.aggregates.is_none()
    }
}
