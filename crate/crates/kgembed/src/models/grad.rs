//! Analytic gradients of batch scores with respect to every touched
//! parameter row, kept sparse so the optimizer only visits rows referenced
//! by the batch.

use std::collections::BTreeMap;

use super::{Model, ModelKind, ScoreScratch, TensorSlot};
use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::mat::dot;

/// Per-row gradient accumulator: row index → dense gradient of that row.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseGrad {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, row: usize) -> Option<&[f64]> {
        self.rows.get(&row).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(&i, v)| (i, v.as_slice()))
    }

    pub fn row_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    fn row_mut(&mut self, row: usize, dim: usize) -> &mut [f64] {
        self.rows.entry(row).or_insert_with(|| vec![0.0; dim])
    }

    #[cfg(test)]
    pub(crate) fn set_for_test(&mut self, row: usize, g: Vec<f64>) {
        self.rows.insert(row, g);
    }

    fn merge(&mut self, other: SparseGrad) {
        for (row, g) in other.rows {
            match self.rows.get_mut(&row) {
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                None => {
                    self.rows.insert(row, g);
                }
            }
        }
    }
}

/// Sparse gradients mirroring the model's parameter layout. Only slots the
/// model owns are ever populated.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub ent: SparseGrad,
    pub ent_im: SparseGrad,
    pub rel: SparseGrad,
    pub rel_im: SparseGrad,
    pub normal: SparseGrad,
    pub proj: SparseGrad,
    pub ent_proj: SparseGrad,
    pub rel_proj: SparseGrad,
}

impl Gradients {
    pub fn slot(&self, slot: TensorSlot) -> &SparseGrad {
        match slot {
            TensorSlot::Ent => &self.ent,
            TensorSlot::EntIm => &self.ent_im,
            TensorSlot::Rel => &self.rel,
            TensorSlot::RelIm => &self.rel_im,
            TensorSlot::Normal => &self.normal,
            TensorSlot::Proj => &self.proj,
            TensorSlot::EntProj => &self.ent_proj,
            TensorSlot::RelProj => &self.rel_proj,
        }
    }

    /// Accumulates another gradient set (e.g. the negative half of a batch).
    pub fn merge(&mut self, other: Gradients) {
        self.ent.merge(other.ent);
        self.ent_im.merge(other.ent_im);
        self.rel.merge(other.rel);
        self.rel_im.merge(other.rel_im);
        self.normal.merge(other.normal);
        self.proj.merge(other.proj);
        self.ent_proj.merge(other.ent_proj);
        self.rel_proj.merge(other.rel_proj);
    }
}

impl Model {
    /// Gradient of Σᵢ upstream[i] · score(triples[i]) with respect to every
    /// touched parameter row. Contributions from repeated indices accumulate.
    pub fn grad_batch(&self, triples: &[Triple], upstream: &[f64]) -> Result<Gradients> {
        if triples.len() != upstream.len() {
            return Err(Error::InvalidArgument(format!(
                "upstream length {} does not match batch length {}",
                upstream.len(),
                triples.len()
            )));
        }
        if let Some(bad) = upstream.iter().find(|u| !u.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite upstream gradient {bad}"
            )));
        }
        self.check_triples(triples)?;

        let d = self.d();
        let d_r = self.d_r();
        let mut g = Gradients::default();
        let mut scratch = ScoreScratch::new(self);
        let mut res = vec![0.0; d.max(d_r)];

        for (&t, &u) in triples.iter().zip(upstream) {
            if u == 0.0 {
                continue;
            }
            match self.kind() {
                ModelKind::TransE => {
                    let h = self.ent_row(t.head);
                    let r = self.rel_row(t.relation);
                    let tt = self.ent_row(t.tail);
                    let mut norm_sq = 0.0;
                    for j in 0..d {
                        res[j] = (h[j] + r[j]) - tt[j];
                        norm_sq += res[j] * res[j];
                    }
                    let norm = norm_sq.sqrt();
                    // Subgradient 0 at the zero-residual kink.
                    if norm == 0.0 {
                        continue;
                    }
                    let scale = -u / norm;
                    let gh = g.ent.row_mut(t.head, d);
                    for j in 0..d {
                        gh[j] += scale * res[j];
                    }
                    let gr = g.rel.row_mut(t.relation, d);
                    for j in 0..d {
                        gr[j] += scale * res[j];
                    }
                    let gt = g.ent.row_mut(t.tail, d);
                    for j in 0..d {
                        gt[j] -= scale * res[j];
                    }
                }
                ModelKind::TransH => {
                    let h = self.ent_row(t.head);
                    let r = self.rel_row(t.relation);
                    let tt = self.ent_row(t.tail);
                    let w = self.normal_row(t.relation);
                    let dwh = dot(w, h);
                    let dwt = dot(w, tt);
                    for j in 0..d {
                        let ph = h[j] - dwh * w[j];
                        let pt = tt[j] - dwt * w[j];
                        res[j] = (ph + r[j]) - pt;
                    }
                    let resw = dot(&res[..d], w);
                    let gr = g.rel.row_mut(t.relation, d);
                    for j in 0..d {
                        gr[j] += -2.0 * u * res[j];
                    }
                    let gh = g.ent.row_mut(t.head, d);
                    for j in 0..d {
                        gh[j] += -2.0 * u * (res[j] - resw * w[j]);
                    }
                    let gt = g.ent.row_mut(t.tail, d);
                    for j in 0..d {
                        gt[j] += 2.0 * u * (res[j] - resw * w[j]);
                    }
                    let gw = g.normal.row_mut(t.relation, d);
                    for j in 0..d {
                        gw[j] += 2.0 * u * (resw * (h[j] - tt[j]) + (dwh - dwt) * res[j]);
                    }
                }
                ModelKind::TransR => {
                    let m = self.proj_row(t.relation);
                    let h = self.ent_row(t.head);
                    let tt = self.ent_row(t.tail);
                    super::transr_project(m, h, d, d_r, &mut scratch.a);
                    super::transr_project(m, tt, d, d_r, &mut scratch.b);
                    let r = self.rel_row(t.relation);
                    for j in 0..d_r {
                        res[j] = (scratch.a[j] + r[j]) - scratch.b[j];
                    }
                    let gr = g.rel.row_mut(t.relation, d_r);
                    for j in 0..d_r {
                        gr[j] += -2.0 * u * res[j];
                    }
                    // ∂/∂h = −2u·Mᵀres, ∂/∂t = +2u·Mᵀres
                    {
                        let gh = g.ent.row_mut(t.head, d);
                        for jr in 0..d_r {
                            let c = -2.0 * u * res[jr];
                            let mrow = &m[jr * d..jr * d + d];
                            for jc in 0..d {
                                gh[jc] += c * mrow[jc];
                            }
                        }
                    }
                    {
                        let gt = g.ent.row_mut(t.tail, d);
                        for jr in 0..d_r {
                            let c = 2.0 * u * res[jr];
                            let mrow = &m[jr * d..jr * d + d];
                            for jc in 0..d {
                                gt[jc] += c * mrow[jc];
                            }
                        }
                    }
                    let gm = g.proj.row_mut(t.relation, d_r * d);
                    for jr in 0..d_r {
                        let c = -2.0 * u * res[jr];
                        let grow = &mut gm[jr * d..jr * d + d];
                        for jc in 0..d {
                            grow[jc] += c * (h[jc] - tt[jc]);
                        }
                    }
                }
                ModelKind::TransD => {
                    let h = self.ent_row(t.head);
                    let tt = self.ent_row(t.tail);
                    let hp = self.ent_proj_row(t.head);
                    let tp = self.ent_proj_row(t.tail);
                    let rp = self.rel_proj_row(t.relation);
                    let r = self.rel_row(t.relation);
                    let dph = dot(hp, h);
                    let dpt = dot(tp, tt);
                    super::transd_project(h, hp, rp, d, d_r, &mut scratch.a);
                    super::transd_project(tt, tp, rp, d, d_r, &mut scratch.b);
                    for j in 0..d_r {
                        res[j] = (scratch.a[j] + r[j]) - scratch.b[j];
                    }
                    let resrp = dot(&res[..d_r], rp);
                    let gr = g.rel.row_mut(t.relation, d_r);
                    for j in 0..d_r {
                        gr[j] += -2.0 * u * res[j];
                    }
                    {
                        let gh = g.ent.row_mut(t.head, d);
                        for k in 0..d {
                            let base = if k < d_r { res[k] } else { 0.0 };
                            gh[k] += -2.0 * u * (base + resrp * hp[k]);
                        }
                    }
                    {
                        let gt = g.ent.row_mut(t.tail, d);
                        for k in 0..d {
                            let base = if k < d_r { res[k] } else { 0.0 };
                            gt[k] += 2.0 * u * (base + resrp * tp[k]);
                        }
                    }
                    {
                        let ghp = g.ent_proj.row_mut(t.head, d);
                        for k in 0..d {
                            ghp[k] += -2.0 * u * resrp * h[k];
                        }
                    }
                    {
                        let gtp = g.ent_proj.row_mut(t.tail, d);
                        for k in 0..d {
                            gtp[k] += 2.0 * u * resrp * tt[k];
                        }
                    }
                    let grp = g.rel_proj.row_mut(t.relation, d_r);
                    for j in 0..d_r {
                        grp[j] += -2.0 * u * (dph - dpt) * res[j];
                    }
                }
                ModelKind::Rescal => {
                    let h = self.ent_row(t.head);
                    let tt = self.ent_row(t.tail);
                    let m = self.proj_row(t.relation);
                    {
                        let gh = g.ent.row_mut(t.head, d);
                        for j in 0..d {
                            let mrow = &m[j * d..j * d + d];
                            gh[j] += u * dot(mrow, tt);
                        }
                    }
                    {
                        let gt = g.ent.row_mut(t.tail, d);
                        for j in 0..d {
                            let hj = h[j];
                            let mrow = &m[j * d..j * d + d];
                            for k in 0..d {
                                gt[k] += u * hj * mrow[k];
                            }
                        }
                    }
                    let gm = g.proj.row_mut(t.relation, d * d);
                    for j in 0..d {
                        let c = u * h[j];
                        let grow = &mut gm[j * d..j * d + d];
                        for k in 0..d {
                            grow[k] += c * tt[k];
                        }
                    }
                }
                ModelKind::DistMult => {
                    let h = self.ent_row(t.head);
                    let r = self.rel_row(t.relation);
                    let tt = self.ent_row(t.tail);
                    let gh = g.ent.row_mut(t.head, d);
                    for j in 0..d {
                        gh[j] += u * r[j] * tt[j];
                    }
                    let gr = g.rel.row_mut(t.relation, d);
                    for j in 0..d {
                        gr[j] += u * h[j] * tt[j];
                    }
                    let gt = g.ent.row_mut(t.tail, d);
                    for j in 0..d {
                        gt[j] += u * h[j] * r[j];
                    }
                }
                ModelKind::ComplEx => {
                    let hr = self.ent_row(t.head);
                    let hi = self.ent_im_row(t.head);
                    let rr = self.rel_row(t.relation);
                    let ri = self.rel_im_row(t.relation);
                    let tr = self.ent_row(t.tail);
                    let ti = self.ent_im_row(t.tail);
                    {
                        let ghr = g.ent.row_mut(t.head, d);
                        for j in 0..d {
                            ghr[j] += u * (rr[j] * tr[j] + ri[j] * ti[j]);
                        }
                    }
                    {
                        let ghi = g.ent_im.row_mut(t.head, d);
                        for j in 0..d {
                            ghi[j] += u * (-ri[j] * tr[j] + rr[j] * ti[j]);
                        }
                    }
                    {
                        let grr = g.rel.row_mut(t.relation, d);
                        for j in 0..d {
                            grr[j] += u * (hr[j] * tr[j] + hi[j] * ti[j]);
                        }
                    }
                    {
                        let gri = g.rel_im.row_mut(t.relation, d);
                        for j in 0..d {
                            gri[j] += u * (-hi[j] * tr[j] + hr[j] * ti[j]);
                        }
                    }
                    {
                        let gtr = g.ent.row_mut(t.tail, d);
                        for j in 0..d {
                            gtr[j] += u * (hr[j] * rr[j] - hi[j] * ri[j]);
                        }
                    }
                    let gti = g.ent_im.row_mut(t.tail, d);
                    for j in 0..d {
                        gti[j] += u * (hr[j] * ri[j] + hi[j] * rr[j]);
                    }
                }
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central finite difference of Σᵢ upstream[i]·score(triples[i]) with
    /// respect to a single parameter coordinate.
    fn fd_grad(
        model: &Model,
        slot: TensorSlot,
        row: usize,
        col: usize,
        triples: &[Triple],
        upstream: &[f64],
        step: f64,
    ) -> f64 {
        let weighted = |m: &Model| -> f64 {
            m.score_batch(triples)
                .unwrap()
                .iter()
                .zip(upstream)
                .map(|(s, u)| s * u)
                .sum()
        };
        let mut plus = model.clone();
        plus.tensor_mut(slot).row_mut(row)[col] += step;
        let mut minus = model.clone();
        minus.tensor_mut(slot).row_mut(row)[col] -= step;
        (weighted(&plus) - weighted(&minus)) / (2.0 * step)
    }

    fn check_against_fd(kind: ModelKind, seed: u64) {
        let (n_ent, n_rel, d, d_r) = (8, 3, 6, 5);
        let model = Model::init(kind, n_ent, n_rel, d, d_r, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b9);
        let triples: Vec<Triple> = (0..5)
            .map(|_| {
                Triple::new(
                    rng.random_range(0..n_ent),
                    rng.random_range(0..n_rel),
                    rng.random_range(0..n_ent),
                )
            })
            .collect();
        let upstream: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grads = model.grad_batch(&triples, &upstream).unwrap();

        for slot in model.slots() {
            let sparse = grads.slot(slot);
            let dim = model.tensor(slot).cols();
            for (row, grow) in sparse.iter() {
                for col in 0..dim {
                    let fd = fd_grad(&model, slot, row, col, &triples, &upstream, 1e-5);
                    let analytic = grow[col];
                    let denom = analytic.abs().max(fd.abs()).max(1e-6);
                    let rel = (analytic - fd).abs() / denom;
                    assert!(
                        rel < 1e-4,
                        "{kind} {slot:?} row {row} col {col}: analytic {analytic} vs fd {fd}"
                    );
                }
            }
            // Rows not referenced by the batch must be absent.
            for row in 0..model.tensor(slot).rows() {
                if sparse.get(row).is_none() {
                    let fd = fd_grad(&model, slot, row, 0, &triples, &upstream, 1e-5);
                    assert!(fd.abs() < 1e-8, "{kind} {slot:?} untouched row {row} has fd {fd}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_all_kinds() {
        for kind in ModelKind::ALL {
            check_against_fd(kind, 3);
            check_against_fd(kind, 11);
        }
    }

    #[test]
    fn transe_single_fact_gradient_formula() {
        let model = Model::init(ModelKind::TransE, 4, 1, 5, 5, 2).unwrap();
        let t = Triple::new(0, 0, 1);
        let grads = model.grad_batch(&[t], &[1.0]).unwrap();
        let h = model.ent_row(0);
        let r = model.rel_row(0);
        let tt = model.ent_row(1);
        let res: Vec<f64> = (0..5).map(|j| h[j] + r[j] - tt[j]).collect();
        let norm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gh = grads.ent.get(0).unwrap();
        for j in 0..5 {
            let expected = -res[j] / norm;
            assert!((gh[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn transe_zero_residual_gives_zero_gradient() {
        let mut model = Model::init(ModelKind::TransE, 2, 1, 3, 3, 0).unwrap();
        // Exactly representable values so h + r == t bit-for-bit.
        model.tensor_mut(TensorSlot::Ent).row_mut(0).copy_from_slice(&[0.25, 0.5, 0.5]);
        model.tensor_mut(TensorSlot::Ent).row_mut(1).copy_from_slice(&[0.5, 0.625, 0.5]);
        model.tensor_mut(TensorSlot::Rel).row_mut(0).copy_from_slice(&[0.25, 0.125, 0.0]);
        let grads = model.grad_batch(&[Triple::new(0, 0, 1)], &[1.0]).unwrap();
        assert!(grads.ent.is_empty());
        assert!(grads.rel.is_empty());
    }

    #[test]
    fn zero_upstream_gives_empty_gradients() {
        let model = Model::init(ModelKind::TransH, 5, 2, 4, 4, 1).unwrap();
        let batch = [Triple::new(0, 0, 1), Triple::new(2, 1, 3)];
        let grads = model.grad_batch(&batch, &[0.0, 0.0]).unwrap();
        assert!(grads.ent.is_empty());
        assert!(grads.rel.is_empty());
        assert!(grads.normal.is_empty());
    }

    #[test]
    fn repeated_indices_accumulate() {
        let model = Model::init(ModelKind::DistMult, 4, 1, 3, 3, 5).unwrap();
        let t = Triple::new(0, 0, 1);
        let once = model.grad_batch(&[t], &[1.0]).unwrap();
        let twice = model.grad_batch(&[t, t], &[1.0, 1.0]).unwrap();
        let a = once.ent.get(0).unwrap();
        let b = twice.ent.get(0).unwrap();
        for j in 0..3 {
            assert!((b[j] - 2.0 * a[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_upstream_length_is_rejected() {
        let model = Model::init(ModelKind::TransE, 3, 1, 2, 2, 0).unwrap();
        assert!(model.grad_batch(&[Triple::new(0, 0, 1)], &[1.0, 2.0]).is_err());
        assert!(model
            .grad_batch(&[Triple::new(0, 0, 1)], &[f64::NAN])
            .is_err());
    }
}
