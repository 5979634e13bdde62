//! Batched candidate scoring for link prediction.
//!
//! `lp_prep_cands` projects the candidate entity table once per distinct
//! relation of the batch (instead of once per fact) and caches the prepared
//! head/tail representations of the batch facts. `lp_score_all` then fills a
//! batch × n_ent score matrix per side.
//!
//! Every kernel reproduces the exact operation order of
//! [`Model::score_batch`] (see the [`kernels`](super::kernels) module), so a
//! cell of the returned matrix is bitwise equal to scoring the materialized
//! candidate triple.

use std::collections::HashMap;

use super::kernels::{complex_pair, dot, prod3, sq_add_diff, sq_diff};
use super::{
    hyperplane_project, rescal_left, transd_project, transr_project, Model, ModelKind,
};
use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::mat::Matrix;

/// Candidate entities are scanned in blocks so a block stays L1-resident
/// across all facts of the batch (32 rows × 100 dims × 8 B ≈ 25 KB).
const ENT_BLOCK: usize = 32;

/// Which slot of the fact is replaced by every candidate entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Head,
    Tail,
}

/// Per-batch cache built by [`Model::lp_prep_cands`].
#[derive(Debug, Clone)]
pub struct PreparedCandidates {
    batch: Vec<Triple>,
    inner: Prep,
}

#[derive(Debug, Clone)]
enum Prep {
    /// Candidate representations alias the raw entity table
    /// (TransE, DistMult, ComplEx).
    Plain,
    /// Projected candidate tables per distinct relation plus projected fact
    /// rows (TransH, TransR, TransD). Tables are n_ent × d_r; `head`/`tail`
    /// hold the projected batch facts, batch × d_r.
    Projected {
        rel_slot: HashMap<usize, usize>,
        tables: Vec<Matrix>,
        head: Matrix,
        tail: Matrix,
    },
    /// RESCAL: `tables[k]` holds eᵀMᵣ for every entity e (n_ent × d, head
    /// tests) and `head_v` holds hᵢᵀMᵣᵢ per fact (batch × d, tail tests).
    Rescal {
        rel_slot: HashMap<usize, usize>,
        tables: Vec<Matrix>,
        head_v: Matrix,
    },
}

impl PreparedCandidates {
    /// True when candidate representations are the raw entity table.
    pub fn is_alias(&self) -> bool {
        matches!(self.inner, Prep::Plain)
    }

    /// Number of per-relation candidate tables materialized, `None` for
    /// projection-free kinds.
    pub fn projected_relation_count(&self) -> Option<usize> {
        match &self.inner {
            Prep::Plain => None,
            Prep::Projected { tables, .. } | Prep::Rescal { tables, .. } => Some(tables.len()),
        }
    }
}

impl Model {
    /// Preprocesses embeddings and candidate entities for `lp_score_all`.
    /// Projection models project every entity once per distinct relation in
    /// the batch; projection-free models alias the raw embedding table.
    pub fn lp_prep_cands(&self, batch: &[Triple]) -> Result<PreparedCandidates> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        self.check_triples(batch)?;
        let d = self.d();
        let d_r = self.d_r();
        let n_ent = self.n_ent();

        // Distinct relations in first-appearance order.
        let mut rel_slot: HashMap<usize, usize> = HashMap::new();
        let mut rels: Vec<usize> = Vec::new();
        for t in batch {
            rel_slot.entry(t.relation).or_insert_with(|| {
                rels.push(t.relation);
                rels.len() - 1
            });
        }

        let inner = match self.kind() {
            ModelKind::TransE | ModelKind::DistMult | ModelKind::ComplEx => Prep::Plain,
            ModelKind::TransH => {
                let mut tables = Vec::with_capacity(rels.len());
                for &r in &rels {
                    let w = self.normal_row(r);
                    let mut table = Matrix::zeros(n_ent, d);
                    for e in 0..n_ent {
                        hyperplane_project(self.ent_row(e), w, table.row_mut(e));
                    }
                    tables.push(table);
                }
                let mut head = Matrix::zeros(batch.len(), d);
                let mut tail = Matrix::zeros(batch.len(), d);
                for (i, t) in batch.iter().enumerate() {
                    let w = self.normal_row(t.relation);
                    hyperplane_project(self.ent_row(t.head), w, head.row_mut(i));
                    hyperplane_project(self.ent_row(t.tail), w, tail.row_mut(i));
                }
                Prep::Projected {
                    rel_slot,
                    tables,
                    head,
                    tail,
                }
            }
            ModelKind::TransR => {
                let mut tables = Vec::with_capacity(rels.len());
                for &r in &rels {
                    let m = self.proj_row(r);
                    let mut table = Matrix::zeros(n_ent, d_r);
                    for e in 0..n_ent {
                        transr_project(m, self.ent_row(e), d, d_r, table.row_mut(e));
                    }
                    tables.push(table);
                }
                let mut head = Matrix::zeros(batch.len(), d_r);
                let mut tail = Matrix::zeros(batch.len(), d_r);
                for (i, t) in batch.iter().enumerate() {
                    let m = self.proj_row(t.relation);
                    transr_project(m, self.ent_row(t.head), d, d_r, head.row_mut(i));
                    transr_project(m, self.ent_row(t.tail), d, d_r, tail.row_mut(i));
                }
                Prep::Projected {
                    rel_slot,
                    tables,
                    head,
                    tail,
                }
            }
            ModelKind::TransD => {
                let mut tables = Vec::with_capacity(rels.len());
                for &r in &rels {
                    let rp = self.rel_proj_row(r);
                    let mut table = Matrix::zeros(n_ent, d_r);
                    for e in 0..n_ent {
                        transd_project(
                            self.ent_row(e),
                            self.ent_proj_row(e),
                            rp,
                            d,
                            d_r,
                            table.row_mut(e),
                        );
                    }
                    tables.push(table);
                }
                let mut head = Matrix::zeros(batch.len(), d_r);
                let mut tail = Matrix::zeros(batch.len(), d_r);
                for (i, t) in batch.iter().enumerate() {
                    let rp = self.rel_proj_row(t.relation);
                    transd_project(
                        self.ent_row(t.head),
                        self.ent_proj_row(t.head),
                        rp,
                        d,
                        d_r,
                        head.row_mut(i),
                    );
                    transd_project(
                        self.ent_row(t.tail),
                        self.ent_proj_row(t.tail),
                        rp,
                        d,
                        d_r,
                        tail.row_mut(i),
                    );
                }
                Prep::Projected {
                    rel_slot,
                    tables,
                    head,
                    tail,
                }
            }
            ModelKind::Rescal => {
                let mut tables = Vec::with_capacity(rels.len());
                for &r in &rels {
                    let m = self.proj_row(r);
                    let mut table = Matrix::zeros(n_ent, d);
                    for e in 0..n_ent {
                        rescal_left(self.ent_row(e), m, d, table.row_mut(e));
                    }
                    tables.push(table);
                }
                let mut head_v = Matrix::zeros(batch.len(), d);
                for (i, t) in batch.iter().enumerate() {
                    rescal_left(
                        self.ent_row(t.head),
                        self.proj_row(t.relation),
                        d,
                        head_v.row_mut(i),
                    );
                }
                Prep::Rescal {
                    rel_slot,
                    tables,
                    head_v,
                }
            }
        };
        Ok(PreparedCandidates {
            batch: batch.to_vec(),
            inner,
        })
    }

    /// Scores all candidate triples for each fact of the batch. Row i,
    /// column e of the result holds the score of (e, rᵢ, tᵢ) for
    /// `Side::Head` or (hᵢ, rᵢ, e) for `Side::Tail`.
    pub fn lp_score_all(
        &self,
        prepared: &PreparedCandidates,
        batch: &[Triple],
        side: Side,
    ) -> Result<Matrix> {
        let mut out = Matrix::zeros(batch.len(), self.n_ent());
        self.lp_score_all_into(prepared, batch, side, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`lp_score_all`](Self::lp_score_all):
    /// fills a caller-owned batch × n_ent matrix, letting evaluation loops
    /// reuse one buffer across batches.
    pub fn lp_score_all_into(
        &self,
        prepared: &PreparedCandidates,
        batch: &[Triple],
        side: Side,
        out: &mut Matrix,
    ) -> Result<()> {
        if prepared.batch != batch {
            return Err(Error::InvalidArgument(
                "prepared candidates were built from a different batch".into(),
            ));
        }
        let b = batch.len();
        let n_ent = self.n_ent();
        let d = self.d();
        let d_r = self.d_r();
        if out.rows() != b || out.cols() != n_ent {
            return Err(Error::InvalidArgument(format!(
                "output matrix is {}x{}, expected {}x{}",
                out.rows(),
                out.cols(),
                b,
                n_ent
            )));
        }

        match (&prepared.inner, self.kind()) {
            (Prep::Plain, ModelKind::TransE) => match side {
                Side::Tail => {
                    // q = h + r per fact, then −‖q − e‖.
                    let mut q = Matrix::zeros(b, d);
                    for (i, t) in batch.iter().enumerate() {
                        let h = self.ent_row(t.head);
                        let r = self.rel_row(t.relation);
                        let qi = q.row_mut(i);
                        for j in 0..d {
                            qi[j] = h[j] + r[j];
                        }
                    }
                    fill_neg_l2_tail(q.data(), self.ent.data(), d, n_ent, out.data_mut());
                }
                Side::Head => {
                    // Per fact the candidate enters as (e + r) − t with the
                    // relation and tail rows cached; pack those rows flat.
                    let mut rt = Matrix::zeros(2 * b, d);
                    for (i, t) in batch.iter().enumerate() {
                        rt.row_mut(2 * i).copy_from_slice(self.rel_row(t.relation));
                        rt.row_mut(2 * i + 1).copy_from_slice(self.ent_row(t.tail));
                    }
                    fill_neg_l2_head(rt.data(), self.ent.data(), d, n_ent, out.data_mut());
                }
            },
            (Prep::Projected { rel_slot, tables, head, tail }, _) => {
                match side {
                    Side::Tail => {
                        let mut q = Matrix::zeros(b, d_r);
                        for (i, t) in batch.iter().enumerate() {
                            let ph = head.row(i);
                            let r = self.rel_row(t.relation);
                            let qi = q.row_mut(i);
                            for j in 0..d_r {
                                qi[j] = ph[j] + r[j];
                            }
                        }
                        for eb in (0..n_ent).step_by(ENT_BLOCK) {
                            let end = (eb + ENT_BLOCK).min(n_ent);
                            for (i, t) in batch.iter().enumerate() {
                                let table = &tables[rel_slot[&t.relation]];
                                let qi = q.row(i);
                                let orow = out.row_mut(i);
                                for e in eb..end {
                                    orow[e] = -sq_diff(qi, table.row(e));
                                }
                            }
                        }
                    }
                    Side::Head => {
                        for eb in (0..n_ent).step_by(ENT_BLOCK) {
                            let end = (eb + ENT_BLOCK).min(n_ent);
                            for (i, t) in batch.iter().enumerate() {
                                let table = &tables[rel_slot[&t.relation]];
                                let r = self.rel_row(t.relation);
                                let pt = tail.row(i);
                                let orow = out.row_mut(i);
                                for e in eb..end {
                                    orow[e] = -sq_add_diff(table.row(e), r, pt);
                                }
                            }
                        }
                    }
                }
            }
            (Prep::Rescal { rel_slot, tables, head_v }, _) => match side {
                Side::Tail => {
                    for eb in (0..n_ent).step_by(ENT_BLOCK) {
                        let end = (eb + ENT_BLOCK).min(n_ent);
                        for i in 0..b {
                            let v = head_v.row(i);
                            let orow = out.row_mut(i);
                            for e in eb..end {
                                orow[e] = dot(v, self.ent_row(e));
                            }
                        }
                    }
                }
                Side::Head => {
                    for eb in (0..n_ent).step_by(ENT_BLOCK) {
                        let end = (eb + ENT_BLOCK).min(n_ent);
                        for (i, t) in batch.iter().enumerate() {
                            let table = &tables[rel_slot[&t.relation]];
                            let tt = self.ent_row(t.tail);
                            let orow = out.row_mut(i);
                            for e in eb..end {
                                orow[e] = dot(table.row(e), tt);
                            }
                        }
                    }
                }
            },
            (Prep::Plain, ModelKind::DistMult) => match side {
                Side::Tail => {
                    // u = h ⊙ r per fact, then Σ u·e.
                    let mut u = Matrix::zeros(b, d);
                    for (i, t) in batch.iter().enumerate() {
                        let h = self.ent_row(t.head);
                        let r = self.rel_row(t.relation);
                        let ui = u.row_mut(i);
                        for j in 0..d {
                            ui[j] = h[j] * r[j];
                        }
                    }
                    for eb in (0..n_ent).step_by(ENT_BLOCK) {
                        let end = (eb + ENT_BLOCK).min(n_ent);
                        for i in 0..b {
                            let ui = u.row(i);
                            let orow = out.row_mut(i);
                            for e in eb..end {
                                orow[e] = dot(ui, self.ent_row(e));
                            }
                        }
                    }
                }
                Side::Head => {
                    for eb in (0..n_ent).step_by(ENT_BLOCK) {
                        let end = (eb + ENT_BLOCK).min(n_ent);
                        for (i, t) in batch.iter().enumerate() {
                            let r = self.rel_row(t.relation);
                            let tt = self.ent_row(t.tail);
                            let orow = out.row_mut(i);
                            for e in eb..end {
                                orow[e] = prod3(self.ent_row(e), r, tt);
                            }
                        }
                    }
                }
            },
            (Prep::Plain, ModelKind::ComplEx) => match side {
                Side::Tail => {
                    // a + bi = h·r per fact, then Re((a+bi)·conj(e)).
                    let mut are = Matrix::zeros(b, d);
                    let mut bim = Matrix::zeros(b, d);
                    for (i, t) in batch.iter().enumerate() {
                        let hr = self.ent_row(t.head);
                        let hi = self.ent_im_row(t.head);
                        let rr = self.rel_row(t.relation);
                        let ri = self.rel_im_row(t.relation);
                        let ar = are.row_mut(i);
                        for j in 0..d {
                            ar[j] = hr[j] * rr[j] - hi[j] * ri[j];
                        }
                        let bi = bim.row_mut(i);
                        for j in 0..d {
                            bi[j] = hr[j] * ri[j] + hi[j] * rr[j];
                        }
                    }
                    for eb in (0..n_ent).step_by(ENT_BLOCK) {
                        let end = (eb + ENT_BLOCK).min(n_ent);
                        for i in 0..b {
                            let ar = are.row(i);
                            let bi = bim.row(i);
                            let orow = out.row_mut(i);
                            for e in eb..end {
                                orow[e] =
                                    complex_pair(ar, bi, self.ent_row(e), self.ent_im_row(e));
                            }
                        }
                    }
                }
                Side::Head => {
                    for eb in (0..n_ent).step_by(ENT_BLOCK) {
                        let end = (eb + ENT_BLOCK).min(n_ent);
                        for (i, t) in batch.iter().enumerate() {
                            let rr = self.rel_row(t.relation);
                            let ri = self.rel_im_row(t.relation);
                            let tr = self.ent_row(t.tail);
                            let ti = self.ent_im_row(t.tail);
                            let orow = out.row_mut(i);
                            for e in eb..end {
                                orow[e] = super::kernels::complex_full(
                                    self.ent_row(e),
                                    self.ent_im_row(e),
                                    rr,
                                    ri,
                                    tr,
                                    ti,
                                );
                            }
                        }
                    }
                }
            },
            _ => unreachable!("prep variant always matches model kind"),
        }
        Ok(())
    }
}

/// out[i·n_ent + e] = −‖qᵢ − candₑ‖ over flat row-major inputs.
fn fill_neg_l2_tail(q: &[f64], cand: &[f64], d: usize, n_ent: usize, out: &mut [f64]) {
    let b = q.len() / d;
    let mut block = [0.0f64; ENT_BLOCK];
    for eb in (0..n_ent).step_by(ENT_BLOCK) {
        let end = (eb + ENT_BLOCK).min(n_ent);
        let len = end - eb;
        for i in 0..b {
            let qi = &q[i * d..(i + 1) * d];
            super::kernels::sq_diff_rows(
                qi,
                &cand[eb * d..end * d],
                d,
                &mut block[..len],
            );
            let orow = &mut out[i * n_ent + eb..i * n_ent + end];
            for (o, s) in orow.iter_mut().zip(&block[..len]) {
                *o = -s.sqrt();
            }
        }
    }
}

/// out[i·n_ent + e] = −‖(candₑ + rᵢ) − tᵢ‖ with rᵢ and tᵢ packed
/// alternately in `rt` (row 2i holds rᵢ, row 2i+1 holds tᵢ).
fn fill_neg_l2_head(rt: &[f64], cand: &[f64], d: usize, n_ent: usize, out: &mut [f64]) {
    let b = rt.len() / (2 * d);
    let mut block = [0.0f64; ENT_BLOCK];
    for eb in (0..n_ent).step_by(ENT_BLOCK) {
        let end = (eb + ENT_BLOCK).min(n_ent);
        let len = end - eb;
        for i in 0..b {
            let r = &rt[2 * i * d..(2 * i + 1) * d];
            let t = &rt[(2 * i + 1) * d..(2 * i + 2) * d];
            super::kernels::sq_add_diff_rows(
                &cand[eb * d..end * d],
                r,
                t,
                d,
                &mut block[..len],
            );
            let orow = &mut out[i * n_ent + eb..i * n_ent + end];
            for (o, s) in orow.iter_mut().zip(&block[..len]) {
                *o = -s.sqrt();
            }
        }
    }
}
