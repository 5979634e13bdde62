//! Side-by-side timing of the library's batched scorer against a local
//! re-implementation of the same loop; used to sanity-check codegen.

use std::time::Instant;

use kgembed::{mat::Matrix, KnowledgeGraph, Model, ModelKind, Side, Triple};

#[inline]
fn sq_diff_local(q: &[f64], c: &[f64]) -> f64 {
    let mut acc = [0.0f64; 16];
    let cq = q.chunks_exact(16);
    let cc = c.chunks_exact(16);
    let (rq, rc) = (cq.remainder(), cc.remainder());
    for (qs, cs) in cq.zip(cc) {
        for k in 0..16 {
            let v = qs[k] - cs[k];
            acc[k] += v * v;
        }
    }
    let mut rest = 0.0;
    for (x, y) in rq.iter().zip(rc) {
        let v = x - y;
        rest += v * v;
    }
    let q0 = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    let q1 = (acc[4] + acc[5]) + (acc[6] + acc[7]);
    let q2 = (acc[8] + acc[9]) + (acc[10] + acc[11]);
    let q3 = (acc[12] + acc[13]) + (acc[14] + acc[15]);
    ((q0 + q1) + (q2 + q3)) + rest
}

fn main() {
    let d = 100usize;
    let n_ent = 10_000usize;
    let n_facts = 5_000usize;
    let bs = 256usize;

    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let triples: Vec<Triple> = (0..n_facts)
        .map(|_| {
            Triple::new(
                rng.random_range(0..n_ent),
                rng.random_range(0..10),
                rng.random_range(0..n_ent),
            )
        })
        .collect();
    let kg = KnowledgeGraph::from_indexed(n_ent, 10, &triples).unwrap();
    let model = Model::init(ModelKind::TransE, n_ent, 10, d, d, 0).unwrap();
    let ent: Vec<f64> = model.tensor(kgembed::TensorSlot::Ent).data().to_vec();
    let q: Vec<f64> = (0..n_facts * d).map(|i| (i as f64 * 0.002).cos()).collect();

    for rep in 0..2 {
        // Local loop.
        let start = Instant::now();
        let mut checksum = 0.0f64;
        for cb in (0..n_facts).step_by(bs) {
            let b = (cb + bs).min(n_facts) - cb;
            let mut out = vec![0.0f64; b * n_ent];
            for eb in (0..n_ent).step_by(32) {
                let end = (eb + 32).min(n_ent);
                for i in 0..b {
                    let qi = &q[(cb + i) * d..(cb + i + 1) * d];
                    for e in eb..end {
                        out[i * n_ent + e] =
                            -sq_diff_local(qi, &ent[e * d..(e + 1) * d]).sqrt();
                    }
                }
            }
            checksum += out[0];
        }
        println!(
            "rep {rep} local : {:.2}s (checksum {checksum})",
            start.elapsed().as_secs_f64()
        );

        // Library path.
        let start = Instant::now();
        let mut checksum = 0.0f64;
        let mut scratch = Matrix::zeros(bs, n_ent);
        for chunk in kg.triples().chunks(bs) {
            let prep = model.lp_prep_cands(chunk).unwrap();
            if chunk.len() == bs {
                model
                    .lp_score_all_into(&prep, chunk, Side::Tail, &mut scratch)
                    .unwrap();
                checksum += scratch.row(0)[0];
            } else {
                let m = model.lp_score_all(&prep, chunk, Side::Tail).unwrap();
                checksum += m.row(0)[0];
            }
        }
        println!(
            "rep {rep} library: {:.2}s (checksum {checksum})",
            start.elapsed().as_secs_f64()
        );
    }
}
