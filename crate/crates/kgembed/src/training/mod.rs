//! Training: hyperparameter record, the epoch loop, and the reference
//! hyperparameter preset (`paper-table1`).

mod adam;
mod loss;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use loss::{margin_loss, sigmoid_loss};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::models::{Model, ModelKind};
use crate::sampling::{Sampler, SamplerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Margin,
    Sigmoid,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Margin => "margin",
            LossKind::Sigmoid => "sigmoid",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "margin" => Ok(LossKind::Margin),
            "sigmoid" => Ok(LossKind::Sigmoid),
            other => Err(Error::InvalidArgument(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// Full hyperparameter record for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub n_batches: usize,
    pub d: usize,
    pub d_r: usize,
    pub loss: LossKind,
    /// Required iff `loss` is `Margin`.
    pub margin: Option<f64>,
    pub lr: f64,
    pub l2: f64,
    pub n_epochs: usize,
    pub sampler: SamplerKind,
    pub seed: u64,
}

impl TrainConfig {
    /// Reference preset: embedding dimension 100, hidden dimension 50 where
    /// applicable, margin loss (margin 1) for the translation kinds with 10
    /// batches, sigmoid loss for the bilinear kinds (RESCAL trains on 20
    /// batches), Adam at lr 0.01 with L2 factor 1e-5, Bernoulli sampling,
    /// 100 epochs.
    pub fn paper_table1(kind: ModelKind) -> TrainConfig {
        let translation = matches!(
            kind,
            ModelKind::TransE | ModelKind::TransH | ModelKind::TransR | ModelKind::TransD
        );
        TrainConfig {
            n_batches: if kind == ModelKind::Rescal { 20 } else { 10 },
            d: 100,
            d_r: if kind.has_hidden_dim() { 50 } else { 100 },
            loss: if translation { LossKind::Margin } else { LossKind::Sigmoid },
            margin: if translation { Some(1.0) } else { None },
            lr: 0.01,
            l2: 1e-5,
            n_epochs: 100,
            sampler: SamplerKind::Bernoulli,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_batches == 0 || self.n_epochs == 0 {
            return Err(Error::InvalidArgument(
                "n_batches and n_epochs must be positive".into(),
            ));
        }
        // lr = 0 is allowed: it turns an epoch into a pure loss evaluation.
        if !(self.lr >= 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::InvalidArgument("rates must not be negative".into()));
        }
        match (self.loss, self.margin) {
            (LossKind::Margin, None) => Err(Error::InvalidArgument(
                "margin loss requires a margin value".into(),
            )),
            (LossKind::Margin, Some(m)) if m < 0.0 => Err(Error::InvalidArgument(
                "margin must be nonnegative".into(),
            )),
            (LossKind::Sigmoid, Some(_)) => Err(Error::InvalidArgument(
                "margin is only meaningful with the margin loss".into(),
            )),
            _ => Ok(()),
        }
    }

    /// The loss each kind was trained with in the reference setup; other
    /// pairings are permitted but worth a warning.
    pub fn conventional_loss(kind: ModelKind) -> LossKind {
        if kind.norm_constrained() {
            LossKind::Margin
        } else {
            LossKind::Sigmoid
        }
    }
}

/// Owns the mutable training state: optimizer accumulators and the per-epoch
/// shuffle generator. The model and sampler are passed in per epoch.
#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    adam: AdamState,
    shuffle_rng: ChaCha8Rng,
    epochs_run: usize,
}

impl Trainer {
    pub fn new(model: &Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if config.d != model.d() || config.d_r != model.d_r() {
            return Err(Error::InvalidArgument(format!(
                "config dimensions {}x{} do not match model {}x{}",
                config.d,
                config.d_r,
                model.d(),
                model.d_r()
            )));
        }
        Ok(Trainer {
            adam: AdamState::new(model),
            shuffle_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5851_f42d_4c95_7f2d),
            config,
            epochs_run: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    /// One pass over the training triples: shuffle, split into
    /// `n_batches` contiguous batches, and for each batch corrupt, score,
    /// backpropagate, take an Adam step and re-normalize. Returns the summed
    /// loss over the epoch.
    pub fn train_epoch(
        &mut self,
        model: &mut Model,
        kg: &KnowledgeGraph,
        sampler: &mut Sampler,
    ) -> Result<f64> {
        if kg.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut triples = kg.triples().to_vec();
        triples.shuffle(&mut self.shuffle_rng);
        let batch_size = triples.len().div_ceil(self.config.n_batches);

        let mut epoch_loss = 0.0;
        for batch in triples.chunks(batch_size) {
            let negatives = sampler.corrupt_batch(batch, kg.n_ent())?;
            let pos_scores = model.score_batch(batch)?;
            let neg_scores = model.score_batch(&negatives)?;

            let (loss, d_pos, d_neg) = match self.config.loss {
                LossKind::Margin => {
                    let margin = self.config.margin.expect("validated");
                    margin_loss(&pos_scores, &neg_scores, margin)
                }
                LossKind::Sigmoid => {
                    let mut scores = pos_scores.clone();
                    scores.extend_from_slice(&neg_scores);
                    let mut labels = vec![1.0; batch.len()];
                    labels.extend(std::iter::repeat_n(-1.0, batch.len()));
                    let (loss, d) = sigmoid_loss(&scores, &labels);
                    let (d_pos, d_neg) = d.split_at(batch.len());
                    (loss, d_pos.to_vec(), d_neg.to_vec())
                }
            };
            epoch_loss += loss;

            let mut grads = model.grad_batch(batch, &d_pos)?;
            grads.merge(model.grad_batch(&negatives, &d_neg)?);
            adam_step(model, &mut self.adam, &grads, self.config.lr, self.config.l2)?;
            model.normalize_parameters();
        }
        self.epochs_run += 1;
        Ok(epoch_loss)
    }
}
