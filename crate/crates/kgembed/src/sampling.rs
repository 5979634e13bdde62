//! Negative sampling: randomized generation of false facts by corrupting one
//! slot of a true fact. Three strategies behind one interface: uniform,
//! Bernoulli (corruption side biased by tails-per-head / heads-per-tail) and
//! positional (replacements drawn from entities seen in the corrupted
//! position for the same relation).

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{CorruptionStats, KnowledgeGraph, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform,
    Bernoulli,
    Positional,
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Bernoulli => "bernoulli",
            SamplerKind::Positional => "positional",
        })
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(SamplerKind::Uniform),
            "bernoulli" => Ok(SamplerKind::Bernoulli),
            "positional" => Ok(SamplerKind::Positional),
            other => Err(Error::InvalidArgument(format!(
                "unknown sampler kind `{other}`"
            ))),
        }
    }
}

/// A sampler owns mutable RNG state, so corruption calls are not safe to
/// share across threads; create one sampler per worker with distinct seeds.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
    stats: Option<CorruptionStats>,
    // Per relation: entities observed as heads / as tails, sorted.
    heads_of: HashMap<usize, Vec<usize>>,
    tails_of: HashMap<usize, Vec<usize>>,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn uniform(seed: u64) -> Self {
        Sampler {
            kind: SamplerKind::Uniform,
            stats: None,
            heads_of: HashMap::new(),
            tails_of: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn bernoulli(stats: CorruptionStats, seed: u64) -> Self {
        Sampler {
            kind: SamplerKind::Bernoulli,
            stats: Some(stats),
            heads_of: HashMap::new(),
            tails_of: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Builds the positional index (per-relation observed heads and tails)
    /// from `kg`.
    pub fn positional(kg: &KnowledgeGraph, seed: u64) -> Self {
        let mut heads_of: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut tails_of: HashMap<usize, Vec<usize>> = HashMap::new();
        for t in kg.triples() {
            heads_of.entry(t.relation).or_default().push(t.head);
            tails_of.entry(t.relation).or_default().push(t.tail);
        }
        for v in heads_of.values_mut().chain(tails_of.values_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        Sampler {
            kind: SamplerKind::Positional,
            stats: None,
            heads_of,
            tails_of,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Convenience constructor from a kind and the graph it trains on.
    pub fn for_kg(kind: SamplerKind, kg: &KnowledgeGraph, seed: u64) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Uniform => Sampler::uniform(seed),
            SamplerKind::Bernoulli => Sampler::bernoulli(kg.corruption_stats()?, seed),
            SamplerKind::Positional => Sampler::positional(kg, seed),
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    /// Corrupts every fact of the batch into a false fact that differs from
    /// its source in exactly one of {head, tail}. One negative per positive.
    pub fn corrupt_batch(&mut self, batch: &[Triple], n_ent: usize) -> Result<Vec<Triple>> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if n_ent < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 entities to corrupt a fact".into(),
            ));
        }
        let mut out = Vec::with_capacity(batch.len());
        for &t in batch {
            let corrupt_head = match self.kind {
                SamplerKind::Uniform | SamplerKind::Positional => self.rng.random_bool(0.5),
                SamplerKind::Bernoulli => {
                    let stats = self.stats.as_ref().expect("bernoulli sampler carries stats");
                    let tph = stats.tph(t.relation);
                    let hpt = stats.hpt(t.relation);
                    self.rng.random_bool(tph / (tph + hpt))
                }
            };
            let neg = if corrupt_head {
                let new_head = match self.kind {
                    SamplerKind::Positional => {
                        let set = self
                            .heads_of
                            .get(&t.relation)
                            .map_or(&[][..], |v| v.as_slice());
                        // Degenerate positional set: fall back to uniform.
                        positional_other(&mut self.rng, set, t.head)
                            .unwrap_or_else(|| uniform_other(&mut self.rng, n_ent, t.head))
                    }
                    _ => uniform_other(&mut self.rng, n_ent, t.head),
                };
                Triple::new(new_head, t.relation, t.tail)
            } else {
                let new_tail = match self.kind {
                    SamplerKind::Positional => {
                        let set = self
                            .tails_of
                            .get(&t.relation)
                            .map_or(&[][..], |v| v.as_slice());
                        positional_other(&mut self.rng, set, t.tail)
                            .unwrap_or_else(|| uniform_other(&mut self.rng, n_ent, t.tail))
                    }
                    _ => uniform_other(&mut self.rng, n_ent, t.tail),
                };
                Triple::new(t.head, t.relation, new_tail)
            };
            out.push(neg);
        }
        Ok(out)
    }

    /// Corrupts all facts of a graph at once.
    pub fn corrupt_kg(&mut self, kg: &KnowledgeGraph) -> Result<Vec<Triple>> {
        if kg.is_empty() {
            return Err(Error::EmptyGraph);
        }
        self.corrupt_batch(kg.triples(), kg.n_ent())
    }
}

/// Uniform over 0..n_ent excluding `current` (n_ent must be ≥ 2).
fn uniform_other(rng: &mut ChaCha8Rng, n_ent: usize, current: usize) -> usize {
    let e = rng.random_range(0..n_ent - 1);
    if e >= current {
        e + 1
    } else {
        e
    }
}

/// Uniform over the sorted, deduplicated `set` excluding `current`; `None`
/// when no such entity exists.
fn positional_other(rng: &mut ChaCha8Rng, set: &[usize], current: usize) -> Option<usize> {
    match set.binary_search(&current) {
        Ok(pos) => {
            if set.len() < 2 {
                return None;
            }
            let i = rng.random_range(0..set.len() - 1);
            Some(if i >= pos { set[i + 1] } else { set[i] })
        }
        Err(_) => {
            if set.is_empty() {
                return None;
            }
            Some(set[rng.random_range(0..set.len())])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn differs_in_exactly_one_slot(pos: Triple, neg: Triple) -> bool {
        let head_diff = pos.head != neg.head;
        let tail_diff = pos.tail != neg.tail;
        pos.relation == neg.relation && (head_diff ^ tail_diff)
    }

    #[test]
    fn uniform_two_entities_always_flips() {
        let mut s = Sampler::uniform(0);
        for _ in 0..100 {
            let neg = s.corrupt_batch(&[Triple::new(0, 0, 1)], 2).unwrap();
            assert!(
                neg[0] == Triple::new(1, 0, 1) || neg[0] == Triple::new(0, 0, 0),
                "unexpected negative {:?}",
                neg[0]
            );
            assert!(differs_in_exactly_one_slot(Triple::new(0, 0, 1), neg[0]));
        }
    }

    #[test]
    fn corrupt_rejects_degenerate_inputs() {
        let mut s = Sampler::uniform(0);
        assert!(s.corrupt_batch(&[], 5).is_err());
        assert!(s.corrupt_batch(&[Triple::new(0, 0, 0)], 1).is_err());
    }

    #[test]
    fn bernoulli_head_fraction_tracks_tph_over_sum() {
        // tph = 3, hpt = 1: entity 0 links to tails 1..=3 under relation 0.
        let kg = KnowledgeGraph::from_indexed(
            4,
            1,
            &[Triple::new(0, 0, 1), Triple::new(0, 0, 2), Triple::new(0, 0, 3)],
        )
        .unwrap();
        let stats = kg.corruption_stats().unwrap();
        assert_eq!(stats.tph(0), 3.0);
        assert_eq!(stats.hpt(0), 1.0);
        let mut s = Sampler::bernoulli(stats, 42);
        let fact = Triple::new(0, 0, 1);
        let n = 10_000;
        let mut heads = 0usize;
        for _ in 0..n {
            let neg = s.corrupt_batch(&[fact], 4).unwrap()[0];
            assert!(differs_in_exactly_one_slot(fact, neg));
            if neg.head != fact.head {
                heads += 1;
            }
        }
        let frac = heads as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.02, "head fraction {frac}");
    }

    #[test]
    fn positional_tails_stay_in_positional_set() {
        // Relation 0 tails are {1, 2}; heads are {0, 3}.
        let kg = KnowledgeGraph::from_indexed(
            6,
            1,
            &[Triple::new(0, 0, 1), Triple::new(3, 0, 2)],
        )
        .unwrap();
        let mut s = Sampler::positional(&kg, 7);
        let fact = Triple::new(0, 0, 1);
        for _ in 0..1000 {
            let neg = s.corrupt_batch(&[fact], 6).unwrap()[0];
            assert!(differs_in_exactly_one_slot(fact, neg));
            if neg.tail != fact.tail {
                assert_eq!(neg.tail, 2, "tail replacement outside positional set");
            } else {
                assert_eq!(neg.head, 3, "head replacement outside positional set");
            }
        }
    }

    #[test]
    fn positional_singleton_set_falls_back_to_uniform() {
        let kg = KnowledgeGraph::from_indexed(5, 1, &[Triple::new(0, 0, 1)]).unwrap();
        let mut s = Sampler::positional(&kg, 3);
        let fact = Triple::new(0, 0, 1);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..500 {
            let neg = s.corrupt_batch(&[fact], 5).unwrap()[0];
            assert!(differs_in_exactly_one_slot(fact, neg));
            seen.insert(neg);
        }
        // Fallback reaches entities outside the (singleton) positional sets.
        assert!(seen.len() > 2, "fallback should explore, saw {seen:?}");
    }

    #[test]
    fn corrupt_kg_is_deterministic_per_seed_and_length_preserving() {
        let kg = KnowledgeGraph::from_indexed(
            10,
            2,
            &(0..10).map(|i| Triple::new(i, i % 2, (i + 1) % 10)).collect::<Vec<_>>(),
        )
        .unwrap();
        let a = Sampler::uniform(9).corrupt_kg(&kg).unwrap();
        let b = Sampler::uniform(9).corrupt_kg(&kg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), kg.len());

        let single = KnowledgeGraph::from_indexed(2, 1, &[Triple::new(0, 0, 1)]).unwrap();
        let negs = Sampler::uniform(1).corrupt_kg(&single).unwrap();
        assert_eq!(negs.len(), 1);
    }

    #[test]
    fn uniform_side_frequency_is_balanced() {
        let mut s = Sampler::uniform(5);
        let fact = Triple::new(0, 0, 1);
        let n = 10_000;
        let mut heads = 0usize;
        for _ in 0..n {
            let neg = s.corrupt_batch(&[fact], 50).unwrap()[0];
            if neg.head != fact.head {
                heads += 1;
            }
        }
        // 3σ binomial bound around 0.5.
        let sigma = (0.25f64 / n as f64).sqrt();
        let frac = heads as f64 / n as f64;
        assert!((frac - 0.5).abs() < 3.0 * sigma + 1e-9, "head fraction {frac}");
    }
}
