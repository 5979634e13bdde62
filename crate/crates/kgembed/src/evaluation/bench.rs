//! Wall-clock comparison of batched against looped link-prediction
//! evaluation. Correctness precedes speed: the two modes must produce
//! identical ranks before any timing is reported.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::{FilterSet, KnowledgeGraph};
use crate::models::Model;

use super::{compute_ranks, LPMetrics, RankMode, RankSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Batched,
    Looped,
}

impl EvalMode {
    fn rank_mode(self) -> RankMode {
        match self {
            EvalMode::Batched => RankMode::Batched,
            EvalMode::Looped => RankMode::Looped,
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalMode::Batched => "batched",
            EvalMode::Looped => "looped",
        })
    }
}

/// Timing report for one evaluation mode. `speedup` is looped time over
/// batched time and is filled on the batched report of a comparison run.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub mode: EvalMode,
    pub mean_time_s: f64,
    pub facts_per_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
}

fn timed_ranks(
    model: &Model,
    kg: &KnowledgeGraph,
    filter: &FilterSet,
    batch_size: usize,
    mode: EvalMode,
    repeats: usize,
    threads: usize,
) -> Result<(RankSet, f64)> {
    let mut total = 0.0;
    let mut ranks = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let r = compute_ranks(model, kg, filter, batch_size, mode.rank_mode(), threads)?;
        total += start.elapsed().as_secs_f64();
        ranks = Some(r);
    }
    Ok((ranks.expect("repeats >= 1"), total / repeats as f64))
}

fn report(mode: EvalMode, mean_time_s: f64, n_facts: usize) -> BenchReport {
    BenchReport {
        mode,
        mean_time_s,
        facts_per_s: n_facts as f64 / mean_time_s,
        speedup: None,
    }
}

fn assert_modes_agree(batched: &RankSet, looped: &RankSet) -> Result<()> {
    if batched != looped {
        return Err(Error::ModeMismatch(
            "batched and looped evaluation disagree on ranks".into(),
        ));
    }
    Ok(())
}

/// Times one evaluation mode (mean over `repeats` runs) after asserting that
/// both modes produce identical metrics on this input.
pub fn bench_eval(
    model: &Model,
    eval_kg: &KnowledgeGraph,
    filter: &FilterSet,
    batch_size: usize,
    mode: EvalMode,
    repeats: usize,
    threads: usize,
) -> Result<(BenchReport, LPMetrics)> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let (ranks, mean_time) =
        timed_ranks(model, eval_kg, filter, batch_size, mode, repeats, threads)?;
    // Cross-check against the other mode, untimed.
    let other = match mode {
        EvalMode::Batched => RankMode::Looped,
        EvalMode::Looped => RankMode::Batched,
    };
    let reference = compute_ranks(model, eval_kg, filter, batch_size, other, threads)?;
    assert_modes_agree(&ranks, &reference)?;
    let metrics = LPMetrics::from_ranks(&ranks, &[1, 3, 10]);
    Ok((report(mode, mean_time, eval_kg.len()), metrics))
}

/// Times both modes on the same input and returns (looped, batched) reports,
/// the batched one carrying the speedup ratio. Rank equality between the
/// modes is a hard error, not a warning.
pub fn bench_compare(
    model: &Model,
    eval_kg: &KnowledgeGraph,
    filter: &FilterSet,
    batch_size: usize,
    repeats: usize,
    threads: usize,
) -> Result<(BenchReport, BenchReport)> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let (looped_ranks, looped_time) = timed_ranks(
        model,
        eval_kg,
        filter,
        batch_size,
        EvalMode::Looped,
        repeats,
        threads,
    )?;
    let (batched_ranks, batched_time) = timed_ranks(
        model,
        eval_kg,
        filter,
        batch_size,
        EvalMode::Batched,
        repeats,
        threads,
    )?;
    assert_modes_agree(&batched_ranks, &looped_ranks)?;
    let looped = report(EvalMode::Looped, looped_time, eval_kg.len());
    let mut batched = report(EvalMode::Batched, batched_time, eval_kg.len());
    batched.speedup = Some(looped_time / batched_time);
    Ok((looped, batched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{build_filter, Triple};
    use crate::models::ModelKind;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_instance() -> (Model, KnowledgeGraph, FilterSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let triples: Vec<Triple> = (0..20)
            .map(|_| {
                Triple::new(
                    rng.random_range(0..10),
                    rng.random_range(0..2),
                    rng.random_range(0..10),
                )
            })
            .collect();
        let kg = KnowledgeGraph::from_indexed(10, 2, &triples).unwrap();
        let filter = build_filter(&[&kg]).unwrap();
        let model = Model::init(ModelKind::TransE, 10, 2, 6, 6, 4).unwrap();
        (model, kg, filter)
    }

    #[test]
    fn both_modes_report_identical_metrics() {
        let (model, kg, filter) = tiny_instance();
        let (looped_report, looped_metrics) =
            bench_eval(&model, &kg, &filter, 8, EvalMode::Looped, 1, 1).unwrap();
        let (batched_report, batched_metrics) =
            bench_eval(&model, &kg, &filter, 8, EvalMode::Batched, 1, 1).unwrap();
        assert_eq!(looped_metrics, batched_metrics);
        assert!(looped_report.mean_time_s > 0.0);
        assert!(batched_report.mean_time_s > 0.0);
        assert!(looped_report.facts_per_s > 0.0);
    }

    #[test]
    fn compare_fills_speedup_ratio() {
        let (model, kg, filter) = tiny_instance();
        let (looped, batched) = bench_compare(&model, &kg, &filter, 8, 2, 1).unwrap();
        assert_eq!(looped.mode, EvalMode::Looped);
        assert_eq!(batched.mode, EvalMode::Batched);
        let ratio = batched.speedup.unwrap();
        assert!((ratio - looped.mean_time_s / batched.mean_time_s).abs() < 1e-12);
    }

    #[test]
    fn zero_repeats_is_rejected() {
        let (model, kg, filter) = tiny_instance();
        assert!(bench_eval(&model, &kg, &filter, 8, EvalMode::Batched, 0, 1).is_err());
    }

    /// Full-scale probe (10k entities, 5k facts, d = 100); ignored in normal
    /// runs, the acceptance suite covers this scale. Run with
    /// `cargo test -p kgembed --release full_scale -- --ignored --nocapture`.
    #[test]
    #[ignore]
    fn full_scale_speedup_probe() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n_ent = 10_000;
        let triples: Vec<Triple> = (0..5_000)
            .map(|_| {
                Triple::new(
                    rng.random_range(0..n_ent),
                    rng.random_range(0..10),
                    rng.random_range(0..n_ent),
                )
            })
            .collect();
        let kg = KnowledgeGraph::from_indexed(n_ent, 10, &triples).unwrap();
        let filter = build_filter(&[&kg]).unwrap();
        let model = Model::init(ModelKind::TransE, n_ent, 10, 100, 100, 0).unwrap();
        {
            use crate::models::Side;
            let batch_size = 256;
            let chunks: Vec<Vec<Triple>> = kg
                .triples()
                .chunks(batch_size)
                .map(|c| c.to_vec())
                .collect();
            let preps: Vec<_> = chunks
                .iter()
                .map(|c| model.lp_prep_cands(c).unwrap())
                .collect();
            for side in [Side::Tail, Side::Head] {
                let start = std::time::Instant::now();
                let mut acc = 0.0f64;
                for (c, p) in chunks.iter().zip(&preps) {
                    let m = model.lp_score_all(p, c, side).unwrap();
                    acc += m.row(0)[0];
                }
                println!("side {side:?}: {:.2}s (acc {acc})", start.elapsed().as_secs_f64());
            }
            // Same, reusing one output buffer.
            let mut scratch = crate::mat::Matrix::zeros(batch_size, kg.n_ent());
            for side in [Side::Tail, Side::Head] {
                let start = std::time::Instant::now();
                let mut acc = 0.0f64;
                for (c, p) in chunks.iter().zip(&preps) {
                    if c.len() == batch_size {
                        model.lp_score_all_into(p, c, side, &mut scratch).unwrap();
                        acc += scratch.row(0)[0];
                    }
                }
                println!(
                    "side {side:?} reused: {:.2}s (acc {acc})",
                    start.elapsed().as_secs_f64()
                );
            }
            let start = std::time::Instant::now();
            let mut total = 0usize;
            for (c, p) in chunks.iter().zip(&preps) {
                let m = model.lp_score_all(p, c, Side::Tail).unwrap();
                for (i, t) in c.iter().enumerate() {
                    total += crate::evaluation::rank_of(m.row(i), t.tail, None);
                }
            }
            println!(
                "tail + ranks: {:.2}s (total {total})",
                start.elapsed().as_secs_f64()
            );
        }
        let (looped, batched) = bench_compare(&model, &kg, &filter, 32, 1, 1).unwrap();
        println!(
            "looped {:.2}s batched {:.2}s speedup {:.2}x",
            looped.mean_time_s,
            batched.mean_time_s,
            batched.speedup.unwrap()
        );
        assert!(batched.speedup.unwrap() >= 3.0);
    }
}
