//! Training losses with hand-written gradients.

/// Hinge loss Σᵢ max(0, margin − posᵢ + negᵢ) with its gradients with
/// respect to the positive and negative scores. At the kink (argument
/// exactly zero) the gradients are zero.
pub fn margin_loss(pos: &[f64], neg: &[f64], margin: f64) -> (f64, Vec<f64>, Vec<f64>) {
    assert_eq!(pos.len(), neg.len(), "score vectors must pair index-wise");
    let mut loss = 0.0;
    let mut d_pos = vec![0.0; pos.len()];
    let mut d_neg = vec![0.0; neg.len()];
    for i in 0..pos.len() {
        let arg = margin - pos[i] + neg[i];
        if arg > 0.0 {
            loss += arg;
            d_pos[i] = -1.0;
            d_neg[i] = 1.0;
        }
    }
    (loss, d_pos, d_neg)
}

/// Logistic loss Σᵢ log(1 + exp(−yᵢ sᵢ)) over labels yᵢ ∈ {+1, −1}, in the
/// overflow-safe form, with d/dsᵢ = −yᵢ σ(−yᵢ sᵢ).
pub fn sigmoid_loss(scores: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(scores.len(), labels.len(), "scores and labels must pair");
    let mut loss = 0.0;
    let mut d = vec![0.0; scores.len()];
    for i in 0..scores.len() {
        let y = labels[i];
        debug_assert!(y == 1.0 || y == -1.0, "labels must be ±1");
        let z = -y * scores[i];
        // softplus(z) = max(z, 0) + ln(1 + e^{−|z|})
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p();
        // σ(z) computed from the negative-magnitude exponential only.
        let sig = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        d[i] = -y * sig;
    }
    (loss, d)
}
