//! Turning head outputs back into an evidence set and an error type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gold::{CellLabel, Tag, NUM_CELL_LABELS, NUM_TAGS};
use crate::align::{Span, SpanEdit};
use crate::corpus::ErrorType;
use crate::error::{Error, Result};
use crate::nn::{argmax, Mat};

/// Diagnostic scores attached to a prediction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionScores {
    /// Probability that each X token is evidence.
    pub token: Vec<f64>,
    /// Sentence-level type distribution from the fallback head.
    #[serde(rename = "type")]
    pub types: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    /// Sorted indices into X.
    pub evidence: Vec<usize>,
    pub error_type: ErrorType,
    pub scores: PredictionScores,
}

/// Prediction JSONL line: `{"id", "evidence", "type", "scores"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub evidence: Vec<usize>,
    #[serde(rename = "type")]
    pub error_type: String,
    #[serde(default)]
    pub scores: PredictionScores,
}

impl From<&Prediction> for PredictionRecord {
    fn from(p: &Prediction) -> Self {
        PredictionRecord {
            id: p.id.clone(),
            evidence: p.evidence.clone(),
            error_type: p.error_type.name().to_string(),
            scores: p.scores.clone(),
        }
    }
}

impl TryFrom<PredictionRecord> for Prediction {
    type Error = Error;

    fn try_from(r: PredictionRecord) -> Result<Self> {
        let mut evidence = r.evidence;
        evidence.sort_unstable();
        evidence.dedup();
        Ok(Prediction { id: r.id, evidence, error_type: r.error_type.parse()?, scores: r.scores })
    }
}

fn type_scores(type_probs: &[f64]) -> BTreeMap<String, f64> {
    ErrorType::ALL.iter().zip(type_probs).map(|(t, &p)| (t.name().to_string(), p)).collect()
}

fn fallback_type(type_probs: &[f64]) -> ErrorType {
    ErrorType::from_index(argmax(type_probs.iter().copied())).unwrap_or(ErrorType::Others)
}

/// Evidence = X positions whose argmax tag is not `O`. Type = majority over
/// those tags' types; ties go to the type with the highest summed tag
/// probability over the evidence positions. With no evidence, the
/// sentence-level fallback distribution decides.
pub fn decode_labeling(dist: &Mat, x_range: Span, type_probs: &[f64]) -> Prediction {
    debug_assert_eq!(dist.ncols(), NUM_TAGS);
    let mut evidence = Vec::new();
    let mut votes: BTreeMap<ErrorType, usize> = BTreeMap::new();
    let mut token = Vec::with_capacity(x_range.len());
    for (j, p) in x_range.iter().enumerate() {
        let row = dist.row(p);
        token.push(1.0 - row[0]);
        let tag = Tag::from_index(argmax(row.iter().copied())).unwrap_or(Tag::O);
        if let Some(t) = tag.error_type() {
            evidence.push(j);
            *votes.entry(t).or_default() += 1;
        }
    }
    let error_type = if evidence.is_empty() {
        fallback_type(type_probs)
    } else {
        let mass = |t: ErrorType| -> f64 {
            evidence
                .iter()
                .map(|&j| {
                    let row = dist.row(x_range.start + j);
                    row[Tag::B(t).index()] + row[Tag::I(t).index()]
                })
                .sum()
        };
        let top = *votes.values().max().unwrap();
        let tied: Vec<ErrorType> = votes.iter().filter(|(_, &c)| c == top).map(|(&t, _)| t).collect();
        let mut best = tied[0];
        for &t in &tied[1..] {
            if mass(t) > mass(best) {
                best = t;
            }
        }
        best
    };
    Prediction { id: String::new(), evidence, error_type, scores: PredictionScores { token, types: type_scores(type_probs) } }
}

/// Pools each X column over the edit rows (the Y edit span, or the Y tokens
/// flanking a deletion): max for evidence labels, min for `none`. A column
/// is evidence when its pooled argmax is not `none`. Type = majority over the pooled evidence labels;
/// ties and empty evidence defer to the fallback distribution.
pub fn decode_interaction(cells: &Mat, y_len: usize, x_len: usize, edit: &SpanEdit, type_probs: &[f64]) -> Prediction {
    debug_assert_eq!(cells.dim(), (y_len * x_len, NUM_CELL_LABELS));
    let rows = edit.y_anchor_rows(y_len);
    let mut evidence = Vec::new();
    let mut votes: BTreeMap<ErrorType, usize> = BTreeMap::new();
    let mut token = Vec::with_capacity(x_len);
    for j in 0..x_len {
        // evidence labels take their max over the rows, `none` its min, so a
        // column is evidence as soon as one edit row says so
        let mut pooled = [0.0f64; NUM_CELL_LABELS];
        pooled[0] = if rows.is_empty() { 1.0 } else { f64::INFINITY };
        for &i in &rows {
            let row = cells.row(i * x_len + j);
            pooled[0] = pooled[0].min(row[0]);
            for (l, v) in pooled.iter_mut().enumerate().skip(1) {
                *v = v.max(row[l]);
            }
        }
        let best = argmax(pooled.iter().copied());
        token.push(1.0 - pooled[0]);
        if let Some(t) = CellLabel::from_index(best).and_then(CellLabel::error_type) {
            evidence.push(j);
            *votes.entry(t).or_default() += 1;
        }
    }
    let error_type = if evidence.is_empty() {
        fallback_type(type_probs)
    } else {
        let top = *votes.values().max().unwrap();
        let tied: Vec<ErrorType> = votes.iter().filter(|(_, &c)| c == top).map(|(&t, _)| t).collect();
        if tied.len() == 1 {
            tied[0]
        } else {
            let mut best = tied[0];
            for &t in &tied[1..] {
                if type_probs[t.index()] > type_probs[best.index()] {
                    best = t;
                }
            }
            best
        }
    };
    Prediction { id: String::new(), evidence, error_type, scores: PredictionScores { token, types: type_scores(type_probs) } }
}
