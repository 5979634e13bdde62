//! Shared reduction primitives for all scoring paths.
//!
//! Candidate ranking compares scores produced by `score_batch` with scores
//! produced by the batched `lp_score_all` kernels, and the two must agree
//! bitwise for ranks to be reproducible. Every reduction below therefore
//! accumulates in the same fixed pattern: sixteen independent partial sums
//! over j ≡ 0..15 (mod 16), combined by one fixed pairwise tree, with the
//! remainder accumulated in ascending order and added last. Both paths go
//! through these functions; do not inline a different summation order
//! anywhere on a scoring path.
//!
//! Sixteen lanes keep several SIMD accumulator chains in flight, which is
//! what makes the batched evaluator throughput- rather than
//! latency-bound.

const LANES: usize = 16;

/// Lane-halving reduction: 16 → 8 → 4 → 2 → 1, matching how vector
/// registers fold, so the accumulators stay packed inside the hot loops.
#[inline(always)]
fn combine(acc: [f64; LANES], rest: f64) -> f64 {
    let mut s = [0.0f64; 8];
    for k in 0..8 {
        s[k] = acc[k] + acc[k + 8];
    }
    let mut t = [0.0f64; 4];
    for k in 0..4 {
        t[k] = s[k] + s[k + 4];
    }
    let u0 = t[0] + t[2];
    let u1 = t[1] + t[3];
    (u0 + u1) + rest
}

/// Σⱼ a[j]·b[j]
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xs, ys) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += xs[k] * ys[k];
        }
    }
    let mut rest = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        rest += x * y;
    }
    combine(acc, rest)
}

/// Σⱼ (q[j] − c[j])²
#[inline]
pub fn sq_diff(q: &[f64], c: &[f64]) -> f64 {
    assert_eq!(q.len(), c.len());
    let mut acc = [0.0f64; LANES];
    let cq = q.chunks_exact(LANES);
    let cc = c.chunks_exact(LANES);
    let (rq, rc) = (cq.remainder(), cc.remainder());
    for (qs, cs) in cq.zip(cc) {
        for k in 0..LANES {
            let v = qs[k] - cs[k];
            acc[k] += v * v;
        }
    }
    let mut rest = 0.0;
    for (x, y) in rq.iter().zip(rc) {
        let v = x - y;
        rest += v * v;
    }
    combine(acc, rest)
}

/// Σⱼ ((a[j] + r[j]) − t[j])²
#[inline]
pub fn sq_add_diff(a: &[f64], r: &[f64], t: &[f64]) -> f64 {
    assert_eq!(a.len(), r.len());
    assert_eq!(a.len(), t.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cr = r.chunks_exact(LANES);
    let ct = t.chunks_exact(LANES);
    let (ra, rr, rt) = (ca.remainder(), cr.remainder(), ct.remainder());
    for ((xs, ys), zs) in ca.zip(cr).zip(ct) {
        for k in 0..LANES {
            let v = (xs[k] + ys[k]) - zs[k];
            acc[k] += v * v;
        }
    }
    let mut rest = 0.0;
    for j in 0..ra.len() {
        let v = (ra[j] + rr[j]) - rt[j];
        rest += v * v;
    }
    combine(acc, rest)
}

/// Σⱼ (a[j]·b[j])·c[j]
#[inline]
pub fn prod3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.len(), c.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let cc = c.chunks_exact(LANES);
    let (ra, rb, rc) = (ca.remainder(), cb.remainder(), cc.remainder());
    for ((xs, ys), zs) in ca.zip(cb).zip(cc) {
        for k in 0..LANES {
            acc[k] += (xs[k] * ys[k]) * zs[k];
        }
    }
    let mut rest = 0.0;
    for j in 0..ra.len() {
        rest += (ra[j] * rb[j]) * rc[j];
    }
    combine(acc, rest)
}

/// Σⱼ a[j]·x[j] + b[j]·y[j]
#[inline]
pub fn complex_pair(a: &[f64], b: &[f64], x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.len(), x.len());
    assert_eq!(a.len(), y.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let cx = x.chunks_exact(LANES);
    let cy = y.chunks_exact(LANES);
    let (ra, rb, rx, ry) = (ca.remainder(), cb.remainder(), cx.remainder(), cy.remainder());
    for (((xs, ys), zs), ws) in ca.zip(cb).zip(cx).zip(cy) {
        for k in 0..LANES {
            acc[k] += xs[k] * zs[k] + ys[k] * ws[k];
        }
    }
    let mut rest = 0.0;
    for j in 0..ra.len() {
        rest += ra[j] * rx[j] + rb[j] * ry[j];
    }
    combine(acc, rest)
}

/// `out[k] = sq_diff(q, row k of cand)` for a block of candidate rows.
/// Compiled standalone: as the innermost step of the batched evaluator it
/// must not inherit register pressure from its callers.
#[inline(never)]
pub fn sq_diff_rows(q: &[f64], cand: &[f64], d: usize, out: &mut [f64]) {
    debug_assert_eq!(cand.len(), out.len() * d);
    for (o, c) in out.iter_mut().zip(cand.chunks_exact(d)) {
        *o = sq_diff(q, c);
    }
}

/// `out[k] = sq_add_diff(row k of cand, r, t)` for a block of candidate rows.
#[inline(never)]
pub fn sq_add_diff_rows(cand: &[f64], r: &[f64], t: &[f64], d: usize, out: &mut [f64]) {
    debug_assert_eq!(cand.len(), out.len() * d);
    for (o, c) in out.iter_mut().zip(cand.chunks_exact(d)) {
        *o = sq_add_diff(c, r, t);
    }
}

/// Re(Σⱼ h[j]·r[j]·conj(t[j])) with the real/imaginary products expanded
/// exactly as `complex_pair` sees them after per-fact precomputation.
#[inline]
pub fn complex_full(
    h_re: &[f64],
    h_im: &[f64],
    r_re: &[f64],
    r_im: &[f64],
    t_re: &[f64],
    t_im: &[f64],
) -> f64 {
    let n = h_re.len();
    assert!(
        h_im.len() == n && r_re.len() == n && r_im.len() == n && t_re.len() == n && t_im.len() == n
    );
    let mut acc = [0.0f64; LANES];
    let chunks = n / LANES * LANES;
    let mut j = 0;
    while j < chunks {
        for k in 0..LANES {
            let i = j + k;
            let a = h_re[i] * r_re[i] - h_im[i] * r_im[i];
            let b = h_re[i] * r_im[i] + h_im[i] * r_re[i];
            acc[k] += a * t_re[i] + b * t_im[i];
        }
        j += LANES;
    }
    let mut rest = 0.0;
    while j < n {
        let a = h_re[j] * r_re[j] - h_im[j] * r_im[j];
        let b = h_re[j] * r_im[j] + h_im[j] * r_re[j];
        rest += a * t_re[j] + b * t_im[j];
        j += 1;
    }
    combine(acc, rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_sequential_value() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64).collect();
        let seq: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - seq).abs() < 1e-9);
    }

    #[test]
    fn sq_add_diff_equals_sq_diff_on_precomputed_sum() {
        // The defining property of the scoring paths: precomputing a+r and
        // then diffing must be bitwise identical to the fused form.
        for n in [0usize, 1, 3, 4, 15, 16, 17, 100] {
            let a: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let r: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let t: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).tan()).collect();
            let q: Vec<f64> = a.iter().zip(&r).map(|(x, y)| x + y).collect();
            assert_eq!(sq_add_diff(&a, &r, &t), sq_diff(&q, &t), "n = {n}");
        }
    }

    #[test]
    fn complex_full_equals_pair_on_precomputed_products() {
        for n in [1usize, 4, 16, 19, 32] {
            let hr: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let hi: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let rr: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let ri: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
            let tr: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin()).collect();
            let ti: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
            let a: Vec<f64> = (0..n).map(|j| hr[j] * rr[j] - hi[j] * ri[j]).collect();
            let b: Vec<f64> = (0..n).map(|j| hr[j] * ri[j] + hi[j] * rr[j]).collect();
            assert_eq!(
                complex_full(&hr, &hi, &rr, &ri, &tr, &ti),
                complex_pair(&a, &b, &tr, &ti),
                "n = {n}"
            );
        }
    }

    #[test]
    fn prod3_associates_left() {
        let a = [1e-300, 2.0];
        let b = [1e300, 3.0];
        let c = [1.0, 4.0];
        // (a*b)*c, not a*(b*c): the tiny/huge pair must not underflow.
        assert_eq!(prod3(&a, &b, &c), (1e-300 * 1e300) * 1.0 + (2.0 * 3.0) * 4.0);
    }
}
