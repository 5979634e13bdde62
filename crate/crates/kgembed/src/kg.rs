//! In-memory knowledge graph: triples, label dictionaries, dataset I/O,
//! coverage-preserving splits, corruption statistics and redundancy measures.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One fact: (head entity, relation, tail entity), all as 0-based indices
/// into the owning graph's dictionaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Bijection between labels and dense 0-based indices, in first-appearance
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dictionary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Dictionary {
    pub fn new() -> Self {
        Dictionary::default()
    }

    /// Builds a dictionary of numeric labels `"0".."n"`, for synthetic graphs.
    pub fn numeric(n: usize) -> Self {
        let mut d = Dictionary::new();
        for i in 0..n {
            d.get_or_insert(&i.to_string());
        }
        d
    }

    pub fn get_or_insert(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A knowledge graph: dictionaries plus an ordered, duplicate-free list of
/// triples. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    n_ent: usize,
    n_rel: usize,
    triples: Vec<Triple>,
    ent_dict: Dictionary,
    rel_dict: Dictionary,
}

/// Per-relation corruption statistics feeding Bernoulli negative sampling.
/// `tph[r]` is the mean number of distinct tails per head under relation r,
/// `hpt[r]` the mean number of heads per tail. Relations absent from the
/// graph default to 1/1 so the Bernoulli probability degrades to 0.5.
#[derive(Debug, Clone)]
pub struct CorruptionStats {
    tph: Vec<f64>,
    hpt: Vec<f64>,
}

impl CorruptionStats {
    pub fn tph(&self, relation: usize) -> f64 {
        self.tph[relation]
    }

    pub fn hpt(&self, relation: usize) -> f64 {
        self.hpt[relation]
    }

    pub fn n_rel(&self) -> usize {
        self.tph.len()
    }
}

/// Membership structure over the union of several graphs' triples, used to
/// exclude known true facts in filtered ranking. Also indexes known tails by
/// (head, relation) and known heads by (relation, tail).
#[derive(Debug, Clone)]
pub struct FilterSet {
    n_ent: usize,
    n_rel: usize,
    ent_labels: Vec<String>,
    tails_by_hr: HashMap<(usize, usize), Vec<usize>>,
    heads_by_rt: HashMap<(usize, usize), Vec<usize>>,
    len: usize,
}

impl FilterSet {
    /// Union of the triples of all input graphs. All graphs must share
    /// dictionaries.
    pub fn build(graphs: &[&KnowledgeGraph]) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::InvalidArgument("no graphs given to build_filter".into()))?;
        for g in &graphs[1..] {
            if g.ent_dict != first.ent_dict || g.rel_dict != first.rel_dict {
                return Err(Error::DictMismatch(
                    "all graphs in a filter must share entity and relation dictionaries".into(),
                ));
            }
        }
        let mut tails_by_hr: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut heads_by_rt: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for g in graphs {
            for t in &g.triples {
                tails_by_hr
                    .entry((t.head, t.relation))
                    .or_default()
                    .push(t.tail);
                heads_by_rt
                    .entry((t.relation, t.tail))
                    .or_default()
                    .push(t.head);
            }
        }
        let mut len = 0;
        for v in tails_by_hr.values_mut() {
            v.sort_unstable();
            v.dedup();
            len += v.len();
        }
        for v in heads_by_rt.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Ok(FilterSet {
            n_ent: first.n_ent,
            n_rel: first.n_rel,
            ent_labels: first.ent_dict.labels().to_vec(),
            tails_by_hr,
            heads_by_rt,
            len,
        })
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.tails_by_hr
            .get(&(t.head, t.relation))
            .is_some_and(|v| v.binary_search(&t.tail).is_ok())
    }

    /// Known true tails for (head, relation), sorted ascending.
    pub fn known_tails(&self, head: usize, relation: usize) -> &[usize] {
        self.tails_by_hr
            .get(&(head, relation))
            .map_or(&[], |v| v.as_slice())
    }

    /// Known true heads for (relation, tail), sorted ascending.
    pub fn known_heads(&self, relation: usize, tail: usize) -> &[usize] {
        self.heads_by_rt
            .get(&(relation, tail))
            .map_or(&[], |v| v.as_slice())
    }

    /// Number of distinct triples in the filter.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_ent(&self) -> usize {
        self.n_ent
    }

    pub fn n_rel(&self) -> usize {
        self.n_rel
    }

    pub(crate) fn shares_dicts_with(&self, kg: &KnowledgeGraph) -> bool {
        self.n_ent == kg.n_ent
            && self.n_rel == kg.n_rel
            && self.ent_labels == kg.ent_dict.labels()
    }
}

/// Triple-level redundancy fractions; both lie in [0, 1].
///
/// These are working definitions, not an established standard:
/// `duplicate_fraction` counts triples (h, r, t) for which some other
/// relation r' ≠ r also links (h, t); `reverse_duplicate_fraction` counts
/// triples whose inverse (t, r', h) is present for some relation r'.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedundancyReport {
    pub duplicate_fraction: f64,
    pub reverse_duplicate_fraction: f64,
}

/// Result of [`KnowledgeGraph::split`]. The parts partition the source
/// triples; every entity and relation of the source occurs in at least one
/// train triple. `train_share_exceeded` is set when the coverage pass alone
/// overruns the requested train share (the guarantee wins over the share).
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: KnowledgeGraph,
    pub valid: Option<KnowledgeGraph>,
    pub test: KnowledgeGraph,
    pub train_share_exceeded: bool,
}

impl KnowledgeGraph {
    /// Parses tab-separated `head<TAB>relation<TAB>tail` lines. Dictionaries
    /// assign indices in first-appearance order; duplicate lines collapse to
    /// one triple. Empty lines are skipped.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut ent_dict = Dictionary::new();
        let mut rel_dict = Dictionary::new();
        let mut triples = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (h, r, t) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(h), Some(r), Some(t), None) => (h, r, t),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected 3 tab-separated fields, got `{line}`"),
                    })
                }
            };
            let triple = Triple::new(
                ent_dict.get_or_insert(h),
                rel_dict.get_or_insert(r),
                ent_dict.get_or_insert(t),
            );
            if seen.insert(triple) {
                triples.push(triple);
            }
        }
        if triples.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(KnowledgeGraph {
            n_ent: ent_dict.len(),
            n_rel: rel_dict.len(),
            triples,
            ent_dict,
            rel_dict,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    /// Parses a triple file against existing dictionaries (e.g. the ones
    /// stored in a checkpoint). Unknown labels are an error naming the first
    /// offending label.
    pub fn from_reader_with_dicts(
        reader: impl BufRead,
        ent_dict: Dictionary,
        rel_dict: Dictionary,
    ) -> Result<Self> {
        let mut triples = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (h, r, t) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(h), Some(r), Some(t), None) => (h, r, t),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected 3 tab-separated fields, got `{line}`"),
                    })
                }
            };
            let head = ent_dict
                .index_of(h)
                .ok_or_else(|| Error::UnknownLabel(h.to_string()))?;
            let relation = rel_dict
                .index_of(r)
                .ok_or_else(|| Error::UnknownLabel(r.to_string()))?;
            let tail = ent_dict
                .index_of(t)
                .ok_or_else(|| Error::UnknownLabel(t.to_string()))?;
            let triple = Triple::new(head, relation, tail);
            if seen.insert(triple) {
                triples.push(triple);
            }
        }
        if triples.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(KnowledgeGraph {
            n_ent: ent_dict.len(),
            n_rel: rel_dict.len(),
            triples,
            ent_dict,
            rel_dict,
        })
    }

    pub fn load_with_dicts(
        path: impl AsRef<Path>,
        ent_dict: Dictionary,
        rel_dict: Dictionary,
    ) -> Result<Self> {
        Self::from_reader_with_dicts(BufReader::new(File::open(path)?), ent_dict, rel_dict)
    }

    /// Builds a graph from already-indexed triples with numeric labels.
    /// Duplicates collapse; indices must be within bounds.
    pub fn from_indexed(n_ent: usize, n_rel: usize, triples: &[Triple]) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for &t in triples {
            if t.head >= n_ent {
                return Err(Error::IndexOutOfRange {
                    what: "entity",
                    index: t.head,
                    bound: n_ent,
                });
            }
            if t.tail >= n_ent {
                return Err(Error::IndexOutOfRange {
                    what: "entity",
                    index: t.tail,
                    bound: n_ent,
                });
            }
            if t.relation >= n_rel {
                return Err(Error::IndexOutOfRange {
                    what: "relation",
                    index: t.relation,
                    bound: n_rel,
                });
            }
            if seen.insert(t) {
                kept.push(t);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(KnowledgeGraph {
            n_ent,
            n_rel,
            triples: kept,
            ent_dict: Dictionary::numeric(n_ent),
            rel_dict: Dictionary::numeric(n_rel),
        })
    }

    pub fn n_ent(&self) -> usize {
        self.n_ent
    }

    pub fn n_rel(&self) -> usize {
        self.n_rel
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn ent_dict(&self) -> &Dictionary {
        &self.ent_dict
    }

    pub fn rel_dict(&self) -> &Dictionary {
        &self.rel_dict
    }

    /// Writes triples in the same tab-separated format accepted by `load`.
    pub fn write_tsv(&self, mut w: impl Write) -> Result<()> {
        for t in &self.triples {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.ent_dict.label(t.head),
                self.rel_dict.label(t.relation),
                self.ent_dict.label(t.tail)
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_tsv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn subgraph(&self, triples: Vec<Triple>) -> KnowledgeGraph {
        KnowledgeGraph {
            n_ent: self.n_ent,
            n_rel: self.n_rel,
            triples,
            ent_dict: self.ent_dict.clone(),
            rel_dict: self.rel_dict.clone(),
        }
    }

    /// Splits the triples into train / (valid) / test parts that exactly
    /// partition the graph while keeping at least one fact involving each
    /// entity and each relation in train.
    ///
    /// Triples are shuffled with a generator seeded by `seed`; a first pass
    /// sends one covering fact per not-yet-covered entity/relation to train,
    /// a second pass tops train up to `share_train`, and the remainder is
    /// split between valid and test (valid gets the rounded-down half when
    /// requested). If the coverage pass alone exceeds the share, train grows
    /// beyond it and `train_share_exceeded` is set.
    pub fn split(&self, share_train: f64, with_validation: bool, seed: u64) -> Result<SplitOutcome> {
        if self.triples.is_empty() {
            return Err(Error::EmptyGraph);
        }
        if !(share_train > 0.0 && share_train < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "share_train must lie in (0, 1), got {share_train}"
            )));
        }
        let n = self.triples.len();
        let mut shuffled = self.triples.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        shuffled.shuffle(&mut rng);

        let mut ent_covered = vec![false; self.n_ent];
        let mut rel_covered = vec![false; self.n_rel];
        let mut in_train = vec![false; n];
        let mut n_train = 0usize;
        for (i, t) in shuffled.iter().enumerate() {
            if !ent_covered[t.head] || !ent_covered[t.tail] || !rel_covered[t.relation] {
                ent_covered[t.head] = true;
                ent_covered[t.tail] = true;
                rel_covered[t.relation] = true;
                in_train[i] = true;
                n_train += 1;
            }
        }
        let target = (share_train * n as f64).round() as usize;
        let train_share_exceeded = n_train > target;
        if train_share_exceeded {
            log::warn!(
                "coverage guarantee forced {n_train} train triples, exceeding the requested share of {target}"
            );
        }
        for i in 0..n {
            if n_train >= target {
                break;
            }
            if !in_train[i] {
                in_train[i] = true;
                n_train += 1;
            }
        }

        let mut train = Vec::with_capacity(n_train);
        let mut rest = Vec::with_capacity(n - n_train);
        for (i, t) in shuffled.into_iter().enumerate() {
            if in_train[i] {
                train.push(t);
            } else {
                rest.push(t);
            }
        }
        let (valid, test) = if with_validation {
            let n_valid = rest.len() / 2;
            let test = rest.split_off(n_valid);
            (Some(self.subgraph(rest)), self.subgraph(test))
        } else {
            (None, self.subgraph(rest))
        };
        Ok(SplitOutcome {
            train: self.subgraph(train),
            valid,
            test,
            train_share_exceeded,
        })
    }

    /// Per-relation tails-per-head and heads-per-tail means.
    pub fn corruption_stats(&self) -> Result<CorruptionStats> {
        if self.triples.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut count = vec![0usize; self.n_rel];
        let mut heads: Vec<HashSet<usize>> = vec![HashSet::new(); self.n_rel];
        let mut tails: Vec<HashSet<usize>> = vec![HashSet::new(); self.n_rel];
        for t in &self.triples {
            count[t.relation] += 1;
            heads[t.relation].insert(t.head);
            tails[t.relation].insert(t.tail);
        }
        let mut tph = vec![1.0; self.n_rel];
        let mut hpt = vec![1.0; self.n_rel];
        for r in 0..self.n_rel {
            if count[r] > 0 {
                tph[r] = count[r] as f64 / heads[r].len() as f64;
                hpt[r] = count[r] as f64 / tails[r].len() as f64;
            }
        }
        Ok(CorruptionStats { tph, hpt })
    }

    /// Exact duplicate and reverse-duplicate fractions (see
    /// [`RedundancyReport`]).
    pub fn redundancy_metrics(&self) -> Result<RedundancyReport> {
        if self.triples.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut rels_by_pair: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for t in &self.triples {
            rels_by_pair.entry((t.head, t.tail)).or_default().push(t.relation);
        }
        let mut duplicates = 0usize;
        let mut reverse = 0usize;
        for t in &self.triples {
            let same_pair = &rels_by_pair[&(t.head, t.tail)];
            if same_pair.iter().any(|&r| r != t.relation) {
                duplicates += 1;
            }
            if rels_by_pair.contains_key(&(t.tail, t.head)) {
                reverse += 1;
            }
        }
        let n = self.triples.len() as f64;
        Ok(RedundancyReport {
            duplicate_fraction: duplicates as f64 / n,
            reverse_duplicate_fraction: reverse as f64 / n,
        })
    }
}

/// Union filter over several graphs sharing dictionaries; see [`FilterSet`].
pub fn build_filter(graphs: &[&KnowledgeGraph]) -> Result<FilterSet> {
    FilterSet::build(graphs)
}
