//! Link-prediction evaluation: recovery ranks for head and tail tests in raw
//! and filtered settings, aggregated into MR / MRR / Hit@k.
//!
//! The batched path groups facts by relation, prepares candidate projections
//! once per relation via `lp_prep_cands`, and scores whole batches with
//! `lp_score_all`. A deliberately naive per-triple loop (`RankMode::Looped`)
//! computes the same ranks one candidate scoring call at a time; the two
//! must agree exactly and the benchmark in [`bench`] times them against
//! each other.

mod bench;
mod classify;

pub use bench::{bench_compare, bench_eval, BenchReport, EvalMode};
pub use classify::{classify, fit_thresholds, ThresholdTable};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::{FilterSet, KnowledgeGraph, Triple};
use crate::models::{Model, Side};

/// Rank of `true_idx` within a score row: one plus the number of unfiltered
/// candidates with a strictly greater score (ties do not count against the
/// target). `filter_mask[e] = true` removes candidate e from the ranking;
/// the target itself must not be filtered.
pub fn rank_of(scores: &[f64], true_idx: usize, filter_mask: Option<&[bool]>) -> usize {
    let target = scores[true_idx];
    let mut greater = 0usize;
    match filter_mask {
        None => {
            for &s in scores {
                if s > target {
                    greater += 1;
                }
            }
        }
        Some(mask) => {
            debug_assert!(!mask[true_idx], "the target must never be filtered");
            for (e, &s) in scores.iter().enumerate() {
                if !mask[e] && s > target {
                    greater += 1;
                }
            }
        }
    }
    1 + greater
}

/// Raw and filtered recovery ranks for every fact, both sides, aligned with
/// the evaluation graph's triple order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankSet {
    pub head_raw: Vec<usize>,
    pub head_filt: Vec<usize>,
    pub tail_raw: Vec<usize>,
    pub tail_filt: Vec<usize>,
}

/// Aggregated metrics for one test side (or the equal-weight combination of
/// both sides).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideMetrics {
    pub mr_raw: f64,
    pub mr_filt: f64,
    pub mrr_raw: f64,
    pub mrr_filt: f64,
    pub hits_raw: BTreeMap<usize, f64>,
    pub hits_filt: BTreeMap<usize, f64>,
}

impl SideMetrics {
    fn from_ranks(raw: &[usize], filt: &[usize], k_values: &[usize]) -> SideMetrics {
        let n = raw.len() as f64;
        let mr = |ranks: &[usize]| ranks.iter().sum::<usize>() as f64 / n;
        let mrr = |ranks: &[usize]| ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
        let hits = |ranks: &[usize]| {
            k_values
                .iter()
                .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
                .collect::<BTreeMap<_, _>>()
        };
        SideMetrics {
            mr_raw: mr(raw),
            mr_filt: mr(filt),
            mrr_raw: mrr(raw),
            mrr_filt: mrr(filt),
            hits_raw: hits(raw),
            hits_filt: hits(filt),
        }
    }

    fn averaged(a: &SideMetrics, b: &SideMetrics) -> SideMetrics {
        let avg_map = |x: &BTreeMap<usize, f64>, y: &BTreeMap<usize, f64>| {
            x.iter().map(|(&k, &v)| (k, (v + y[&k]) / 2.0)).collect()
        };
        SideMetrics {
            mr_raw: (a.mr_raw + b.mr_raw) / 2.0,
            mr_filt: (a.mr_filt + b.mr_filt) / 2.0,
            mrr_raw: (a.mrr_raw + b.mrr_raw) / 2.0,
            mrr_filt: (a.mrr_filt + b.mrr_filt) / 2.0,
            hits_raw: avg_map(&a.hits_raw, &b.hits_raw),
            hits_filt: avg_map(&a.hits_filt, &b.hits_filt),
        }
    }
}

/// Raw and filtered MR, MRR and Hit@k for head tests, tail tests and their
/// equal-weight combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LPMetrics {
    pub head: SideMetrics,
    pub tail: SideMetrics,
    pub combined: SideMetrics,
    pub n_facts: usize,
}

impl LPMetrics {
    pub fn from_ranks(ranks: &RankSet, k_values: &[usize]) -> LPMetrics {
        let head = SideMetrics::from_ranks(&ranks.head_raw, &ranks.head_filt, k_values);
        let tail = SideMetrics::from_ranks(&ranks.tail_raw, &ranks.tail_filt, k_values);
        let combined = SideMetrics::averaged(&head, &tail);
        LPMetrics {
            head,
            tail,
            combined,
            n_facts: ranks.head_raw.len(),
        }
    }

    /// Deterministic JSON document (fixed key order, no volatile fields).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// How candidate scores are produced when computing ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// Relation-grouped batches through `lp_prep_cands` + `lp_score_all`.
    Batched,
    /// One `score_batch` call per candidate triple, the way naive evaluation
    /// loops do it.
    Looped,
}

fn check_eval_inputs(model: &Model, kg: &KnowledgeGraph, filter: &FilterSet) -> Result<()> {
    if kg.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if kg.n_ent() != model.n_ent() || kg.n_rel() != model.n_rel() {
        return Err(Error::DictMismatch(format!(
            "graph has {}x{} entities/relations, model {}x{}",
            kg.n_ent(),
            kg.n_rel(),
            model.n_ent(),
            model.n_rel()
        )));
    }
    if !filter.shares_dicts_with(kg) {
        return Err(Error::DictMismatch(
            "filter was built over different dictionaries".into(),
        ));
    }
    Ok(())
}

/// Computes raw and filtered ranks for both sides of every fact.
pub fn compute_ranks(
    model: &Model,
    kg: &KnowledgeGraph,
    filter: &FilterSet,
    batch_size: usize,
    mode: RankMode,
    threads: usize,
) -> Result<RankSet> {
    check_eval_inputs(model, kg, filter)?;
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    match mode {
        RankMode::Batched => compute_ranks_batched(model, kg, filter, batch_size, threads),
        RankMode::Looped => compute_ranks_looped(model, kg, filter),
    }
}

fn compute_ranks_batched(
    model: &Model,
    kg: &KnowledgeGraph,
    filter: &FilterSet,
    batch_size: usize,
    threads: usize,
) -> Result<RankSet> {
    let n = kg.len();
    // Group facts by relation so each batch materializes few projections.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| kg.triples()[i].relation);

    let chunks: Vec<&[usize]> = order.chunks(batch_size).collect();
    let mut results: Vec<Vec<(usize, [usize; 4])>> = Vec::with_capacity(chunks.len());

    if threads <= 1 || chunks.len() <= 1 {
        for chunk in &chunks {
            results.push(rank_chunk(model, kg, filter, chunk)?);
        }
    } else {
        // Contiguous chunk ranges per worker; results are stitched back in
        // order, so the outcome is independent of scheduling.
        let per = chunks.len().div_ceil(threads);
        let groups: Vec<&[&[usize]]> = chunks.chunks(per).collect();
        let outputs: Vec<Result<Vec<Vec<(usize, [usize; 4])>>>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = groups
                    .iter()
                    .map(|group| {
                        scope.spawn(move || {
                            group
                                .iter()
                                .map(|chunk| rank_chunk(model, kg, filter, chunk))
                                .collect()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
        for group in outputs {
            results.extend(group?);
        }
    }

    let mut ranks = RankSet {
        head_raw: vec![0; n],
        head_filt: vec![0; n],
        tail_raw: vec![0; n],
        tail_filt: vec![0; n],
    };
    for chunk in results {
        for (i, [hr, hf, tr, tf]) in chunk {
            ranks.head_raw[i] = hr;
            ranks.head_filt[i] = hf;
            ranks.tail_raw[i] = tr;
            ranks.tail_filt[i] = tf;
        }
    }
    Ok(ranks)
}

/// Ranks for one batch of fact indices via the batched scoring kernels.
fn rank_chunk(
    model: &Model,
    kg: &KnowledgeGraph,
    filter: &FilterSet,
    chunk: &[usize],
) -> Result<Vec<(usize, [usize; 4])>> {
    let batch: Vec<Triple> = chunk.iter().map(|&i| kg.triples()[i]).collect();
    let prep = model.lp_prep_cands(&batch)?;
    let head_scores = model.lp_score_all(&prep, &batch, Side::Head)?;
    let tail_scores = model.lp_score_all(&prep, &batch, Side::Tail)?;

    let mut out = Vec::with_capacity(chunk.len());
    for (bi, (&orig, t)) in chunk.iter().zip(&batch).enumerate() {
        let hrow = head_scores.row(bi);
        let trow = tail_scores.row(bi);
        let head_raw = rank_of(hrow, t.head, None);
        let tail_raw = rank_of(trow, t.tail, None);
        // Filtered rank: subtract known true competitors that outrank the
        // target instead of materializing a mask.
        let head_filt = head_raw
            - filter
                .known_heads(t.relation, t.tail)
                .iter()
                .filter(|&&e| e != t.head && hrow[e] > hrow[t.head])
                .count();
        let tail_filt = tail_raw
            - filter
                .known_tails(t.head, t.relation)
                .iter()
                .filter(|&&e| e != t.tail && trow[e] > trow[t.tail])
                .count();
        out.push((orig, [head_raw, head_filt, tail_raw, tail_filt]));
    }
    Ok(out)
}

/// The naive evaluator: loops over facts and scores one candidate triple per
/// `score_batch` call, filtering with a per-candidate membership test.
fn compute_ranks_looped(
    model: &Model,
    kg: &KnowledgeGraph,
    filter: &FilterSet,
) -> Result<RankSet> {
    let n = kg.len();
    let n_ent = kg.n_ent();
    let mut ranks = RankSet {
        head_raw: Vec::with_capacity(n),
        head_filt: Vec::with_capacity(n),
        tail_raw: Vec::with_capacity(n),
        tail_filt: Vec::with_capacity(n),
    };
    let mut scores = vec![0.0; n_ent];
    let mut mask = vec![false; n_ent];
    for t in kg.triples() {
        for e in 0..n_ent {
            scores[e] = model.score_batch(&[Triple::new(e, t.relation, t.tail)])?[0];
            mask[e] = e != t.head && filter.contains(Triple::new(e, t.relation, t.tail));
        }
        ranks.head_raw.push(rank_of(&scores, t.head, None));
        ranks.head_filt.push(rank_of(&scores, t.head, Some(&mask)));
        for e in 0..n_ent {
            scores[e] = model.score_batch(&[Triple::new(t.head, t.relation, e)])?[0];
            mask[e] = e != t.tail && filter.contains(Triple::new(t.head, t.relation, e));
        }
        ranks.tail_raw.push(rank_of(&scores, t.tail, None));
        ranks.tail_filt.push(rank_of(&scores, t.tail, Some(&mask)));
    }
    Ok(ranks)
}

/// Full batched link-prediction evaluation: head and tail tests for every
/// fact, raw and filtered metrics at the given cutoffs. The result is
/// independent of `batch_size` and `threads`.
pub fn link_prediction(
    model: &Model,
    eval_kg: &KnowledgeGraph,
    filter: &FilterSet,
    batch_size: usize,
    k_values: &[usize],
    threads: usize,
) -> Result<LPMetrics> {
    let ranks = compute_ranks(model, eval_kg, filter, batch_size, RankMode::Batched, threads)?;
    Ok(LPMetrics::from_ranks(&ranks, k_values))
}
