//! Triplet classification: per-relation score thresholds fit on validation
//! data, then accuracy over a labeled test set.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Triple};
use crate::models::Model;

/// Per-relation decision thresholds plus a pooled fallback for relations
/// unseen at fit time. A fact is predicted true iff its score is strictly
/// greater than the threshold of its relation.
#[derive(Debug, Clone)]
pub struct ThresholdTable {
    per_rel: HashMap<usize, f64>,
    fallback: f64,
}

impl ThresholdTable {
    pub fn threshold_for(&self, relation: usize) -> f64 {
        self.per_rel.get(&relation).copied().unwrap_or(self.fallback)
    }

    pub fn relations(&self) -> usize {
        self.per_rel.len()
    }
}

/// Accuracy of predicting `true` above a cut and `false` at or below it.
fn accuracy_at(theta: f64, pos: &[f64], neg: &[f64]) -> f64 {
    let correct = pos.iter().filter(|&&s| s > theta).count()
        + neg.iter().filter(|&&s| s <= theta).count();
    correct as f64 / (pos.len() + neg.len()) as f64
}

/// Accuracy-maximizing threshold over the candidate cut points: sentinels
/// below the minimum and above the maximum score, plus the midpoints of
/// adjacent distinct sorted scores. Ties resolve toward the lowest
/// threshold.
fn best_threshold(pos: &[f64], neg: &[f64]) -> (f64, f64) {
    let mut all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    all.dedup();
    let mut candidates = Vec::with_capacity(all.len() + 1);
    candidates.push(all[0] - 1.0);
    for w in all.windows(2) {
        candidates.push((w[0] + w[1]) / 2.0);
    }
    candidates.push(all[all.len() - 1] + 1.0);

    let mut best = (candidates[0], accuracy_at(candidates[0], pos, neg));
    for &theta in &candidates[1..] {
        let acc = accuracy_at(theta, pos, neg);
        if acc > best.1 {
            best = (theta, acc);
        }
    }
    best
}

/// Fits per-relation thresholds on a validation set and its negatively
/// sampled version (index-aligned, as produced by `corrupt_kg`).
pub fn fit_thresholds(
    model: &Model,
    valid_pos: &KnowledgeGraph,
    valid_neg: &[Triple],
) -> Result<ThresholdTable> {
    if valid_pos.is_empty() || valid_neg.is_empty() {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    if valid_pos.len() != valid_neg.len() {
        return Err(Error::InvalidArgument(
            "positive and negative validation sets must be index-aligned".into(),
        ));
    }
    let pos_scores = model.score_batch(valid_pos.triples())?;
    let neg_scores = model.score_batch(valid_neg)?;

    let mut by_rel: HashMap<usize, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for (t, (&ps, &ns)) in valid_pos
        .triples()
        .iter()
        .zip(pos_scores.iter().zip(&neg_scores))
    {
        let entry = by_rel.entry(t.relation).or_default();
        entry.0.push(ps);
        entry.1.push(ns);
    }
    let per_rel = by_rel
        .into_iter()
        .map(|(r, (pos, neg))| (r, best_threshold(&pos, &neg).0))
        .collect();
    let (fallback, _) = best_threshold(&pos_scores, &neg_scores);
    Ok(ThresholdTable { per_rel, fallback })
}

/// Classifies the test positives (label true) and negatives (label false)
/// with the fitted thresholds and reports accuracy.
pub fn classify(
    model: &Model,
    test_pos: &KnowledgeGraph,
    test_neg: &[Triple],
    thresholds: &ThresholdTable,
) -> Result<f64> {
    if test_pos.is_empty() || test_neg.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let pos_scores = model.score_batch(test_pos.triples())?;
    let neg_scores = model.score_batch(test_neg)?;
    let mut correct = 0usize;
    for (t, &s) in test_pos.triples().iter().zip(&pos_scores) {
        if s > thresholds.threshold_for(t.relation) {
            correct += 1;
        }
    }
    for (t, &s) in test_neg.iter().zip(&neg_scores) {
        if s <= thresholds.threshold_for(t.relation) {
            correct += 1;
        }
    }
    Ok(correct as f64 / (pos_scores.len() + neg_scores.len()) as f64)
}
