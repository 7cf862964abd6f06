//! Token-level P/R/F and sentence-level exact match and label accuracy.
//!
//! Token scores are micro-averaged over evidence index sets and ignore the
//! type. Instances without gold evidence add no gold tokens but still count
//! for exact match and label accuracy.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedInstance, ErrorType};
use crate::error::{Error, Result};
use crate::models::Prediction;
use crate::par::{self, Parallelism};

/// Corpus-level true positive / false positive / false negative counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    fn add(self, o: Counts) -> Counts {
        Counts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f_beta(&self, beta: f64) -> f64 {
        f_beta(self.precision(), self.recall(), beta)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `(1+β²)PR / (β²P + R)`, zero when the denominator is zero.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * p + r;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / den
    }
}

/// Token counts for one sentence. Both index lists must be sorted and
/// duplicate-free.
pub fn sentence_counts(pred: &[usize], gold: &[usize]) -> Counts {
    let (mut i, mut j, mut tp) = (0, 0, 0);
    while i < pred.len() && j < gold.len() {
        match pred[i].cmp(&gold[j]) {
            std::cmp::Ordering::Equal => {
                tp += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    Counts { tp, fp: pred.len() - tp, fn_: gold.len() - tp }
}

/// Pairs each gold instance with the prediction of the same id.
pub fn align_by_id<'a>(
    preds: &'a [Prediction],
    golds: &'a [AnnotatedInstance],
) -> Result<Vec<(&'a Prediction, &'a AnnotatedInstance)>> {
    if preds.len() != golds.len() {
        return Err(Error::Alignment(format!("{} predictions for {} gold instances", preds.len(), golds.len())));
    }
    // the common case is already in order
    if preds.iter().zip(golds).all(|(p, g)| p.id == g.id) {
        return Ok(preds.iter().zip(golds).collect());
    }
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(Error::Alignment(format!("duplicate prediction id {:?}", p.id)));
        }
    }
    golds
        .iter()
        .map(|g| {
            by_id
                .get(g.id.as_str())
                .map(|p| (*p, g))
                .ok_or_else(|| Error::Alignment(format!("no prediction for gold id {:?}", g.id)))
        })
        .collect()
}

fn normalized(ev: &[usize]) -> std::borrow::Cow<'_, [usize]> {
    if ev.windows(2).all(|w| w[0] < w[1]) {
        std::borrow::Cow::Borrowed(ev)
    } else {
        let mut v = ev.to_vec();
        v.sort_unstable();
        v.dedup();
        std::borrow::Cow::Owned(v)
    }
}

pub fn token_counts(preds: &[Prediction], golds: &[AnnotatedInstance]) -> Result<Counts> {
    token_counts_with(preds, golds, Parallelism::default())
}

pub fn token_counts_with(preds: &[Prediction], golds: &[AnnotatedInstance], mode: Parallelism) -> Result<Counts> {
    let pairs = align_by_id(preds, golds)?;
    let per = par::map(&pairs, mode, |(p, g)| sentence_counts(&normalized(&p.evidence), &g.evidence));
    Ok(per.into_iter().fold(Counts::default(), Counts::add))
}

/// Micro-averaged `(P, R, F1, F0.5)`.
pub fn token_prf(preds: &[Prediction], golds: &[AnnotatedInstance]) -> Result<(f64, f64, f64, f64)> {
    let c = token_counts(preds, golds)?;
    Ok((c.precision(), c.recall(), c.f_beta(1.0), c.f_beta(0.5)))
}

fn percent_where(
    preds: &[Prediction],
    golds: &[AnnotatedInstance],
    hit: impl Fn(&Prediction, &AnnotatedInstance) -> bool,
) -> Result<f64> {
    let pairs = align_by_id(preds, golds)?;
    let n = pairs.iter().filter(|(p, g)| hit(p, g)).count();
    Ok(100.0 * ratio(n, pairs.len()))
}

/// Percent of instances with identical evidence set and type.
pub fn exact_match(preds: &[Prediction], golds: &[AnnotatedInstance]) -> Result<f64> {
    percent_where(preds, golds, |p, g| p.error_type == g.error_type && *normalized(&p.evidence) == *g.evidence)
}

/// Percent of instances with the correct type.
pub fn label_accuracy(preds: &[Prediction], golds: &[AnnotatedInstance]) -> Result<f64> {
    percent_where(preds, golds, |p, g| p.error_type == g.error_type)
}

/// Product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { what: "pearson input", expected: a.len(), got: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Token scores restricted to instances whose gold type is the key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeScores {
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    /// Gold instances of this type.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f05: f64,
    /// Percent.
    pub exact_match: f64,
    /// Percent.
    pub label_accuracy: f64,
    pub per_type: BTreeMap<ErrorType, TypeScores>,
    pub counts: Counts,
    pub instances: usize,
}

impl EvalReport {
    /// Per-type F0.5, for ablation deltas.
    pub fn type_f05(&self) -> BTreeMap<ErrorType, f64> {
        self.per_type.iter().map(|(t, s)| (*t, s.f05)).collect()
    }
}

pub fn evaluate(preds: &[Prediction], golds: &[AnnotatedInstance]) -> Result<EvalReport> {
    evaluate_with(preds, golds, Parallelism::default())
}

/// Full report. Per-sentence work is mapped in parallel; the merge is in
/// input order, and all sums are integers, so the result is deterministic.
pub fn evaluate_with(preds: &[Prediction], golds: &[AnnotatedInstance], mode: Parallelism) -> Result<EvalReport> {
    let pairs = align_by_id(preds, golds)?;
    let per = par::map(&pairs, mode, |(p, g)| {
        let c = sentence_counts(&normalized(&p.evidence), &g.evidence);
        let type_ok = p.error_type == g.error_type;
        (g.error_type, c, type_ok, type_ok && c.fp == 0 && c.fn_ == 0)
    });
    let mut counts = Counts::default();
    let (mut em, mut acc) = (0usize, 0usize);
    let mut by_type: BTreeMap<ErrorType, (Counts, usize)> = BTreeMap::new();
    for (t, c, type_ok, exact) in per {
        counts = counts.add(c);
        acc += type_ok as usize;
        em += exact as usize;
        let e = by_type.entry(t).or_default();
        e.0 = e.0.add(c);
        e.1 += 1;
    }
    let per_type = by_type
        .into_iter()
        .map(|(t, (c, support))| {
            (t, TypeScores { precision: c.precision(), recall: c.recall(), f05: c.f_beta(0.5), support })
        })
        .collect();
    Ok(EvalReport {
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f_beta(1.0),
        f05: counts.f_beta(0.5),
        exact_match: 100.0 * ratio(em, pairs.len()),
        label_accuracy: 100.0 * ratio(acc, pairs.len()),
        per_type,
        counts,
        instances: pairs.len(),
    })
}
