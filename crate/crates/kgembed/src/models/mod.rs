//! Embedding models: parameter bundles for the seven supported kinds, random
//! initialization, norm constraints, and per-fact scoring.
//!
//! Higher score means more plausible. Scoring formulas:
//!
//! - TransE:   −‖h + r − t‖₂ (unit-norm entities)
//! - TransH:   −‖p(h) + r − p(t)‖₂² with p(x) = x − (w·x)w, unit normal w
//! - TransR:   −‖Mᵣh + r − Mᵣt‖₂²
//! - TransD:   −‖p(h) + r − p(t)‖₂² with p(x) = x̂ + (xₚ·x) rₚ
//! - RESCAL:   hᵀMᵣt
//! - DistMult: Σⱼ hⱼrⱼtⱼ
//! - ComplEx:  Re(Σⱼ hⱼrⱼ conj(tⱼ))
//!
//! The candidate-scoring kernels in [`lp`] must produce bitwise-identical
//! scores to [`Model::score_batch`], so every scoring expression here fixes
//! one operation order and the kernels replicate it exactly.

mod grad;
pub(crate) mod kernels;
mod lp;

pub use grad::{Gradients, SparseGrad};
pub use lp::{PreparedCandidates, Side};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::mat::Matrix;
use kernels::{complex_full, dot, prod3, sq_add_diff};

/// Norm deviation below which `normalize_parameters` leaves a row untouched,
/// making repeated normalization bitwise idempotent.
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    TransE,
    TransH,
    TransR,
    TransD,
    Rescal,
    DistMult,
    ComplEx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::TransE,
        ModelKind::TransH,
        ModelKind::TransR,
        ModelKind::TransD,
        ModelKind::Rescal,
        ModelKind::DistMult,
        ModelKind::ComplEx,
    ];

    /// Kinds whose entity vectors are rescaled to unit norm.
    pub fn norm_constrained(self) -> bool {
        matches!(
            self,
            ModelKind::TransE | ModelKind::TransH | ModelKind::TransR | ModelKind::TransD
        )
    }

    /// Kinds with a relation-space dimension distinct from the entity one.
    pub fn has_hidden_dim(self) -> bool {
        matches!(self, ModelKind::TransR | ModelKind::TransD)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::TransE => "transe",
            ModelKind::TransH => "transh",
            ModelKind::TransR => "transr",
            ModelKind::TransD => "transd",
            ModelKind::Rescal => "rescal",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "transh" => Ok(ModelKind::TransH),
            "transr" => Ok(ModelKind::TransR),
            "transd" => Ok(ModelKind::TransD),
            "rescal" => Ok(ModelKind::Rescal),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Identifies one parameter tensor of a model. `Model::slots()` lists the
/// slots a kind owns, in declaration order; that order fixes both the
/// initialization draw order and the checkpoint layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorSlot {
    /// Entity embeddings, n_ent × d (ComplEx: real part).
    Ent,
    /// Imaginary entity parts, n_ent × d (ComplEx).
    EntIm,
    /// Relation embeddings, n_rel × d_r (ComplEx: real part).
    Rel,
    /// Imaginary relation parts, n_rel × d (ComplEx).
    RelIm,
    /// Hyperplane normals, n_rel × d (TransH).
    Normal,
    /// Relation matrices, n_rel × (d_r·d) for TransR, n_rel × (d·d) for RESCAL.
    Proj,
    /// Entity projection vectors, n_ent × d (TransD).
    EntProj,
    /// Relation projection vectors, n_rel × d_r (TransD).
    RelProj,
}

/// A tagged parameter bundle: entity/relation embeddings plus model-specific
/// tensors, with scoring and gradient behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    n_ent: usize,
    n_rel: usize,
    d: usize,
    d_r: usize,
    ent: Matrix,
    ent_im: Option<Matrix>,
    rel: Option<Matrix>,
    rel_im: Option<Matrix>,
    normal: Option<Matrix>,
    proj: Option<Matrix>,
    ent_proj: Option<Matrix>,
    rel_proj: Option<Matrix>,
}

impl Model {
    /// Random initialization: every entry uniform in [−6/√d, +6/√d], drawn
    /// tensor by tensor in slot order, then `normalize_parameters`.
    /// Deterministic per seed. `d_r` is ignored (forced to `d`) for kinds
    /// without a hidden dimension.
    pub fn init(
        kind: ModelKind,
        n_ent: usize,
        n_rel: usize,
        d: usize,
        d_r: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_ent == 0 || n_rel == 0 || d == 0 || d_r == 0 {
            return Err(Error::InvalidArgument(
                "entity/relation counts and dimensions must be at least 1".into(),
            ));
        }
        let d_r = if kind.has_hidden_dim() { d_r } else { d };
        let mut model = Model {
            kind,
            n_ent,
            n_rel,
            d,
            d_r,
            ent: Matrix::zeros(n_ent, d),
            ent_im: None,
            rel: None,
            rel_im: None,
            normal: None,
            proj: None,
            ent_proj: None,
            rel_proj: None,
        };
        match kind {
            ModelKind::TransE | ModelKind::DistMult => {
                model.rel = Some(Matrix::zeros(n_rel, d));
            }
            ModelKind::TransH => {
                model.rel = Some(Matrix::zeros(n_rel, d));
                model.normal = Some(Matrix::zeros(n_rel, d));
            }
            ModelKind::TransR => {
                model.rel = Some(Matrix::zeros(n_rel, d_r));
                model.proj = Some(Matrix::zeros(n_rel, d_r * d));
            }
            ModelKind::TransD => {
                model.rel = Some(Matrix::zeros(n_rel, d_r));
                model.ent_proj = Some(Matrix::zeros(n_ent, d));
                model.rel_proj = Some(Matrix::zeros(n_rel, d_r));
            }
            ModelKind::Rescal => {
                model.proj = Some(Matrix::zeros(n_rel, d * d));
            }
            ModelKind::ComplEx => {
                model.ent_im = Some(Matrix::zeros(n_ent, d));
                model.rel = Some(Matrix::zeros(n_rel, d));
                model.rel_im = Some(Matrix::zeros(n_rel, d));
            }
        }
        let bound = 6.0 / (d as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in model.slots() {
            let t = model.tensor_mut(slot);
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        model.normalize_parameters();
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_ent(&self) -> usize {
        self.n_ent
    }

    pub fn n_rel(&self) -> usize {
        self.n_rel
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    /// Parameter tensors of this model in declaration order.
    pub fn slots(&self) -> Vec<TensorSlot> {
        match self.kind {
            ModelKind::TransE | ModelKind::DistMult => vec![TensorSlot::Ent, TensorSlot::Rel],
            ModelKind::TransH => vec![TensorSlot::Ent, TensorSlot::Rel, TensorSlot::Normal],
            ModelKind::TransR => vec![TensorSlot::Ent, TensorSlot::Rel, TensorSlot::Proj],
            ModelKind::TransD => vec![
                TensorSlot::Ent,
                TensorSlot::Rel,
                TensorSlot::EntProj,
                TensorSlot::RelProj,
            ],
            ModelKind::Rescal => vec![TensorSlot::Ent, TensorSlot::Proj],
            ModelKind::ComplEx => vec![
                TensorSlot::Ent,
                TensorSlot::EntIm,
                TensorSlot::Rel,
                TensorSlot::RelIm,
            ],
        }
    }

    pub fn tensor(&self, slot: TensorSlot) -> &Matrix {
        match slot {
            TensorSlot::Ent => &self.ent,
            TensorSlot::EntIm => self.ent_im.as_ref().expect("model has no EntIm tensor"),
            TensorSlot::Rel => self.rel.as_ref().expect("model has no Rel tensor"),
            TensorSlot::RelIm => self.rel_im.as_ref().expect("model has no RelIm tensor"),
            TensorSlot::Normal => self.normal.as_ref().expect("model has no Normal tensor"),
            TensorSlot::Proj => self.proj.as_ref().expect("model has no Proj tensor"),
            TensorSlot::EntProj => self.ent_proj.as_ref().expect("model has no EntProj tensor"),
            TensorSlot::RelProj => self.rel_proj.as_ref().expect("model has no RelProj tensor"),
        }
    }

    pub fn tensor_mut(&mut self, slot: TensorSlot) -> &mut Matrix {
        match slot {
            TensorSlot::Ent => &mut self.ent,
            TensorSlot::EntIm => self.ent_im.as_mut().expect("model has no EntIm tensor"),
            TensorSlot::Rel => self.rel.as_mut().expect("model has no Rel tensor"),
            TensorSlot::RelIm => self.rel_im.as_mut().expect("model has no RelIm tensor"),
            TensorSlot::Normal => self.normal.as_mut().expect("model has no Normal tensor"),
            TensorSlot::Proj => self.proj.as_mut().expect("model has no Proj tensor"),
            TensorSlot::EntProj => self.ent_proj.as_mut().expect("model has no EntProj tensor"),
            TensorSlot::RelProj => self.rel_proj.as_mut().expect("model has no RelProj tensor"),
        }
    }

    pub(crate) fn ent_row(&self, e: usize) -> &[f64] {
        self.ent.row(e)
    }

    pub(crate) fn rel_row(&self, r: usize) -> &[f64] {
        self.rel.as_ref().expect("rel tensor").row(r)
    }

    pub(crate) fn normal_row(&self, r: usize) -> &[f64] {
        self.normal.as_ref().expect("normal tensor").row(r)
    }

    pub(crate) fn proj_row(&self, r: usize) -> &[f64] {
        self.proj.as_ref().expect("proj tensor").row(r)
    }

    pub(crate) fn ent_im_row(&self, e: usize) -> &[f64] {
        self.ent_im.as_ref().expect("ent_im tensor").row(e)
    }

    pub(crate) fn rel_im_row(&self, r: usize) -> &[f64] {
        self.rel_im.as_ref().expect("rel_im tensor").row(r)
    }

    pub(crate) fn ent_proj_row(&self, e: usize) -> &[f64] {
        self.ent_proj.as_ref().expect("ent_proj tensor").row(e)
    }

    pub(crate) fn rel_proj_row(&self, r: usize) -> &[f64] {
        self.rel_proj.as_ref().expect("rel_proj tensor").row(r)
    }

    /// Rebuilds a model from raw parts; used by checkpoint loading.
    pub(crate) fn from_tensors(
        kind: ModelKind,
        n_ent: usize,
        n_rel: usize,
        d: usize,
        d_r: usize,
        mut tensors: Vec<Matrix>,
    ) -> Result<Self> {
        let mut model = Model::init(kind, n_ent, n_rel, d, d_r, 0)?;
        let slots = model.slots();
        if tensors.len() != slots.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors for {kind}, got {}",
                slots.len(),
                tensors.len()
            )));
        }
        for slot in slots.into_iter().rev() {
            let t = tensors.pop().unwrap();
            let dst = model.tensor_mut(slot);
            if t.rows() != dst.rows() || t.cols() != dst.cols() {
                return Err(Error::Checkpoint(format!(
                    "tensor shape {}x{} does not match expected {}x{}",
                    t.rows(),
                    t.cols(),
                    dst.rows(),
                    dst.cols()
                )));
            }
            *dst = t;
        }
        Ok(model)
    }

    /// Enforces the model's norm constraints: unit-L2 entity rows for the
    /// translation kinds and unit hyperplane normals for TransH. Bilinear
    /// kinds are unconstrained. Rows already within `NORM_TOL` of unit norm
    /// are left bit-for-bit untouched, so the operation is idempotent.
    pub fn normalize_parameters(&mut self) {
        if self.kind.norm_constrained() {
            normalize_rows(&mut self.ent);
        }
        if self.kind == ModelKind::TransH {
            normalize_rows(self.normal.as_mut().expect("normal tensor"));
        }
    }

    pub(crate) fn check_triples(&self, triples: &[Triple]) -> Result<()> {
        for t in triples {
            if t.head >= self.n_ent {
                return Err(Error::IndexOutOfRange {
                    what: "entity",
                    index: t.head,
                    bound: self.n_ent,
                });
            }
            if t.tail >= self.n_ent {
                return Err(Error::IndexOutOfRange {
                    what: "entity",
                    index: t.tail,
                    bound: self.n_ent,
                });
            }
            if t.relation >= self.n_rel {
                return Err(Error::IndexOutOfRange {
                    what: "relation",
                    index: t.relation,
                    bound: self.n_rel,
                });
            }
        }
        Ok(())
    }

    /// Scores each fact of the batch. `scores[i]` depends only on the rows
    /// referenced by `triples[i]`.
    pub fn score_batch(&self, triples: &[Triple]) -> Result<Vec<f64>> {
        self.check_triples(triples)?;
        let mut scratch = ScoreScratch::new(self);
        Ok(triples.iter().map(|&t| self.score_one(t, &mut scratch)).collect())
    }

    pub(crate) fn score_one(&self, t: Triple, scratch: &mut ScoreScratch) -> f64 {
        match self.kind {
            ModelKind::TransE => {
                let h = self.ent_row(t.head);
                let r = self.rel_row(t.relation);
                let tt = self.ent_row(t.tail);
                -sq_add_diff(h, r, tt).sqrt()
            }
            ModelKind::TransH => {
                let h = self.ent_row(t.head);
                let r = self.rel_row(t.relation);
                let tt = self.ent_row(t.tail);
                let w = self.normal_row(t.relation);
                hyperplane_project(h, w, &mut scratch.a);
                hyperplane_project(tt, w, &mut scratch.b);
                -sq_add_diff(&scratch.a[..self.d], r, &scratch.b[..self.d])
            }
            ModelKind::TransR => {
                let m = self.proj_row(t.relation);
                transr_project(m, self.ent_row(t.head), self.d, self.d_r, &mut scratch.a);
                transr_project(m, self.ent_row(t.tail), self.d, self.d_r, &mut scratch.b);
                let r = self.rel_row(t.relation);
                -sq_add_diff(&scratch.a[..self.d_r], r, &scratch.b[..self.d_r])
            }
            ModelKind::TransD => {
                let rp = self.rel_proj_row(t.relation);
                transd_project(
                    self.ent_row(t.head),
                    self.ent_proj_row(t.head),
                    rp,
                    self.d,
                    self.d_r,
                    &mut scratch.a,
                );
                transd_project(
                    self.ent_row(t.tail),
                    self.ent_proj_row(t.tail),
                    rp,
                    self.d,
                    self.d_r,
                    &mut scratch.b,
                );
                let r = self.rel_row(t.relation);
                -sq_add_diff(&scratch.a[..self.d_r], r, &scratch.b[..self.d_r])
            }
            ModelKind::Rescal => {
                rescal_left(
                    self.ent_row(t.head),
                    self.proj_row(t.relation),
                    self.d,
                    &mut scratch.a,
                );
                dot(&scratch.a[..self.d], self.ent_row(t.tail))
            }
            ModelKind::DistMult => {
                let h = self.ent_row(t.head);
                let r = self.rel_row(t.relation);
                let tt = self.ent_row(t.tail);
                prod3(h, r, tt)
            }
            ModelKind::ComplEx => complex_full(
                self.ent_row(t.head),
                self.ent_im_row(t.head),
                self.rel_row(t.relation),
                self.rel_im_row(t.relation),
                self.ent_row(t.tail),
                self.ent_im_row(t.tail),
            ),
        }
    }
}

/// Reusable per-call buffers for projected head/tail rows. Only the kinds
/// with an entity projection (or RESCAL's hᵀM vector) need them.
pub(crate) struct ScoreScratch {
    pub(crate) a: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl ScoreScratch {
    pub(crate) fn new(model: &Model) -> Self {
        let n = match model.kind {
            ModelKind::TransE | ModelKind::DistMult | ModelKind::ComplEx => 0,
            _ => model.d.max(model.d_r),
        };
        ScoreScratch {
            a: vec![0.0; n],
            b: vec![0.0; n],
        }
    }
}

/// out[j] = x[j] − (w·x)·w[j]
pub(crate) fn hyperplane_project(x: &[f64], w: &[f64], out: &mut [f64]) {
    let dwx = dot(w, x);
    for j in 0..x.len() {
        out[j] = x[j] - dwx * w[j];
    }
}

fn normalize_rows(m: &mut Matrix) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let norm = crate::mat::norm_sq(row).sqrt();
        if norm > 0.0 && (norm - 1.0).abs() > NORM_TOL {
            for v in row {
                *v /= norm;
            }
        }
    }
}

/// out[jr] = Σ_jc M[jr, jc] · x[jc], with M row-major d_r × d.
pub(crate) fn transr_project(m: &[f64], x: &[f64], d: usize, d_r: usize, out: &mut [f64]) {
    for jr in 0..d_r {
        out[jr] = dot(&m[jr * d..jr * d + d], x);
    }
}

/// out[j] = x̂[j] + (xₚ·x) rₚ[j], where x̂ is x truncated or zero-padded to d_r.
pub(crate) fn transd_project(
    x: &[f64],
    x_p: &[f64],
    r_p: &[f64],
    d: usize,
    d_r: usize,
    out: &mut [f64],
) {
    let dpx = dot(x_p, x);
    for jr in 0..d_r {
        let base = if jr < d { x[jr] } else { 0.0 };
        out[jr] = base + dpx * r_p[jr];
    }
}

/// out[k] = Σ_j h[j] · M[j, k], with M row-major d × d. The j-ascending
/// accumulation order is what the candidate kernels replicate.
pub(crate) fn rescal_left(h: &[f64], m: &[f64], d: usize, out: &mut [f64]) {
    let out = &mut out[..d];
    out.fill(0.0);
    for j in 0..d {
        let hj = h[j];
        let row = &m[j * d..j * d + d];
        for k in 0..d {
            out[k] += hj * row[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;
    use rand::Rng;

    fn set_row(model: &mut Model, slot: TensorSlot, i: usize, values: &[f64]) {
        model.tensor_mut(slot).row_mut(i).copy_from_slice(values);
    }

    #[test]
    fn init_is_deterministic() {
        let a = Model::init(ModelKind::TransE, 5, 2, 4, 4, 0).unwrap();
        let b = Model::init(ModelKind::TransE, 5, 2, 4, 4, 0).unwrap();
        assert_eq!(a, b);
        let c = Model::init(ModelKind::TransE, 5, 2, 4, 4, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_normalizes_entity_rows() {
        let m = Model::init(ModelKind::TransE, 7, 2, 16, 16, 3).unwrap();
        for i in 0..m.n_ent() {
            let norm = crate::mat::norm_sq(m.ent_row(i)).sqrt();
            assert!((norm - 1.0).abs() < 1e-12, "row {i} has norm {norm}");
        }
    }

    #[test]
    fn init_rejects_zero_dims() {
        assert!(Model::init(ModelKind::TransE, 0, 1, 4, 4, 0).is_err());
        assert!(Model::init(ModelKind::TransE, 1, 1, 0, 4, 0).is_err());
    }

    #[test]
    fn transr_extras_shape() {
        let m = Model::init(ModelKind::TransR, 5, 2, 4, 3, 1).unwrap();
        let proj = m.tensor(TensorSlot::Proj);
        assert_eq!(proj.rows(), 2);
        assert_eq!(proj.cols(), 3 * 4);
        assert_eq!(m.d_r(), 3);
    }

    #[test]
    fn transe_exact_translation_scores_zero() {
        let mut m = Model::init(ModelKind::TransE, 2, 1, 2, 2, 0).unwrap();
        set_row(&mut m, TensorSlot::Ent, 0, &[1.0, 0.0]);
        set_row(&mut m, TensorSlot::Ent, 1, &[1.0, 1.0]);
        set_row(&mut m, TensorSlot::Rel, 0, &[0.0, 1.0]);
        let s = m.score_batch(&[Triple::new(0, 0, 1)]).unwrap();
        assert_eq!(s[0], 0.0);
    }

    #[test]
    fn distmult_direct_sum() {
        let mut m = Model::init(ModelKind::DistMult, 2, 1, 2, 2, 0).unwrap();
        set_row(&mut m, TensorSlot::Ent, 0, &[1.0, 1.0]);
        set_row(&mut m, TensorSlot::Ent, 1, &[1.0, 1.0]);
        set_row(&mut m, TensorSlot::Rel, 0, &[1.0, 1.0]);
        let s = m.score_batch(&[Triple::new(0, 0, 1)]).unwrap();
        assert_eq!(s[0], 2.0);
    }

    #[test]
    fn complex_conjugation_identity() {
        let mut m = Model::init(ModelKind::ComplEx, 2, 1, 1, 1, 0).unwrap();
        set_row(&mut m, TensorSlot::Ent, 0, &[1.0]);
        set_row(&mut m, TensorSlot::EntIm, 0, &[0.0]);
        set_row(&mut m, TensorSlot::Ent, 1, &[0.0]);
        set_row(&mut m, TensorSlot::EntIm, 1, &[1.0]);
        set_row(&mut m, TensorSlot::Rel, 0, &[0.0]);
        set_row(&mut m, TensorSlot::RelIm, 0, &[1.0]);
        let s = m.score_batch(&[Triple::new(0, 0, 1)]).unwrap();
        assert_eq!(s[0], 1.0);
    }

    #[test]
    fn normalize_rescales_to_unit_norm() {
        let mut m = Model::init(ModelKind::TransE, 2, 1, 2, 2, 0).unwrap();
        set_row(&mut m, TensorSlot::Ent, 0, &[3.0, 4.0]);
        m.normalize_parameters();
        assert_eq!(m.ent_row(0), &[0.6, 0.8]);

        let mut m = Model::init(ModelKind::TransH, 2, 1, 2, 2, 0).unwrap();
        set_row(&mut m, TensorSlot::Normal, 0, &[0.0, 2.0]);
        m.normalize_parameters();
        assert_eq!(m.normal_row(0), &[0.0, 1.0]);
    }

    #[test]
    fn normalize_is_bitwise_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in ModelKind::ALL {
            let mut m = Model::init(kind, 6, 3, 5, 4, 2).unwrap();
            // Perturb every tensor, then normalize twice.
            for slot in m.slots() {
                for v in m.tensor_mut(slot).data_mut() {
                    *v += rng.random_range(-0.5..0.5);
                }
            }
            m.normalize_parameters();
            let snapshot = m.clone();
            m.normalize_parameters();
            assert_eq!(m, snapshot, "{kind} normalize not idempotent");
        }
    }

    #[test]
    fn score_rejects_out_of_range_indices() {
        let m = Model::init(ModelKind::TransE, 3, 1, 2, 2, 0).unwrap();
        assert!(m.score_batch(&[Triple::new(3, 0, 0)]).is_err());
        assert!(m.score_batch(&[Triple::new(0, 1, 0)]).is_err());
    }

    /// Independent scalar re-implementation of TransH scoring.
    fn transh_scalar(m: &Model, t: Triple) -> f64 {
        let project = |x: &[f64], w: &[f64]| -> Vec<f64> {
            let d: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            x.iter().zip(w).map(|(xi, wi)| xi - d * wi).collect()
        };
        let w = m.normal_row(t.relation);
        let ph = project(m.ent_row(t.head), w);
        let pt = project(m.ent_row(t.tail), w);
        let r = m.rel_row(t.relation);
        let sq: f64 = (0..m.d())
            .map(|j| {
                let v = ph[j] + r[j] - pt[j];
                v * v
            })
            .sum();
        -sq
    }

    #[test]
    fn transh_matches_scalar_loop_oracle() {
        let m = Model::init(ModelKind::TransH, 30, 4, 8, 8, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let batch: Vec<Triple> = (0..64)
            .map(|_| {
                Triple::new(
                    rng.random_range(0..30),
                    rng.random_range(0..4),
                    rng.random_range(0..30),
                )
            })
            .collect();
        let scores = m.score_batch(&batch).unwrap();
        for (s, t) in scores.iter().zip(&batch) {
            let expected = transh_scalar(&m, *t);
            let rel = (s - expected).abs() / expected.abs().max(1e-30);
            assert!(rel < 1e-10, "score {s} vs oracle {expected}");
        }
    }

    #[test]
    fn score_locality_under_entity_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in ModelKind::ALL {
            let m = Model::init(kind, 10, 3, 4, 3, 7).unwrap();
            // Rotate entities by one position; remap triples to match.
            let n = m.n_ent();
            let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
            let mut permuted = m.clone();
            for slot in m.slots() {
                if matches!(slot, TensorSlot::Ent | TensorSlot::EntIm | TensorSlot::EntProj) {
                    for i in 0..n {
                        let src = m.tensor(slot).row(i).to_vec();
                        permuted.tensor_mut(slot).row_mut(perm[i]).copy_from_slice(&src);
                    }
                }
            }
            let batch: Vec<Triple> = (0..20)
                .map(|_| {
                    Triple::new(
                        rng.random_range(0..n),
                        rng.random_range(0..3),
                        rng.random_range(0..n),
                    )
                })
                .collect();
            let mapped: Vec<Triple> = batch
                .iter()
                .map(|t| Triple::new(perm[t.head], t.relation, perm[t.tail]))
                .collect();
            let a = m.score_batch(&batch).unwrap();
            let b = permuted.score_batch(&mapped).unwrap();
            assert_eq!(a, b, "{kind} scores changed under entity permutation");
        }
    }
}
