//! Self-adversarial negative-sampling loss.
//!
//! For one positive with distance `d+` and negatives `d-_i`:
//!
//! ```text
//! L = -log s(gamma - d+) - sum_i w_i log s(d-_i - gamma) + (lambda / |E|) sum_e |S_e|^2
//! ```
//!
//! with `s` the logistic function and `w = softmax(-alpha d-)` treated as
//! constants.

/// Logistic function, stable for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln s(x)` without overflow or cancellation.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Softmax of `-alpha * d` over the negatives.
pub fn adversarial_weights(neg_distances: &[f64], alpha: f64) -> Vec<f64> {
    if neg_distances.is_empty() {
        return Vec::new();
    }
    let logits: Vec<f64> = neg_distances.iter().map(|d| -alpha * d).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Loss of one positive against its weighted negatives, plus `reg_term`.
pub fn loss(pos_d: f64, neg_ds: &[f64], weights: &[f64], gamma: f64, reg_term: f64) -> f64 {
    debug_assert_eq!(neg_ds.len(), weights.len());
    let pos = -log_sigmoid(gamma - pos_d);
    let neg: f64 = neg_ds
        .iter()
        .zip(weights)
        .map(|(d, w)| -w * log_sigmoid(d - gamma))
        .sum();
    pos + neg + reg_term
}

/// Derivatives of [`loss`] with respect to `pos_d` and each `neg_ds[i]`,
/// holding the weights fixed.
pub fn loss_distance_grads(pos_d: f64, neg_ds: &[f64], weights: &[f64], gamma: f64) -> (f64, Vec<f64>) {
    let g_pos = sigmoid(pos_d - gamma);
    let g_neg = neg_ds
        .iter()
        .zip(weights)
        .map(|(d, w)| -w * sigmoid(gamma - d))
        .collect();
    (g_pos, g_neg)
}

/// `(lambda / |E|) * sum of squared entries`.
pub fn regularization(lambda: f64, num_entities: usize, entity_values: &[f64]) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    lambda / num_entities as f64 * entity_values.iter().map(|v| v * v).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_log_sigmoid_agree() {
        for &x in &[-700.0, -30.0, -1.0, 0.0, 0.5, 12.0, 800.0] {
            let s = sigmoid(x);
            assert!((0.0..=1.0).contains(&s));
            if s > 0.0 {
                assert!((log_sigmoid(x) - s.ln()).abs() <= 1e-12 * s.ln().abs().max(1.0), "x={x}");
            }
        }
        assert!(log_sigmoid(-800.0).is_finite());
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(adversarial_weights(&[3.0, 3.0, 3.0, 3.0], 1.7), vec![0.25; 4]);
        assert_eq!(adversarial_weights(&[1.0, 5.0, 9.0], 0.0), vec![1.0 / 3.0; 3]);
        let w = adversarial_weights(&[1.0, 2.0], 1.0);
        assert!((w[0] - 0.7311).abs() < 1e-4 && (w[1] - 0.2689).abs() < 1e-4);
        let w = adversarial_weights(&[1e4, 1e4 + 1.0], 50.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((loss(12.0, &[], &[], 12.0, 0.0) - ln2).abs() < 1e-12);
        assert!((loss(9.0, &[9.0], &[1.0], 9.0, 0.0) - 2.0 * ln2).abs() < 1e-12);
        // -ln s(12) = ln(1 + e^-12)
        let v = loss(0.0, &[], &[], 12.0, 0.0);
        assert!((v - 6.144_193_477_732_805e-6).abs() < 1e-15, "{v}");
        assert_eq!(loss(1.0, &[2.0], &[1.0], 3.0, 0.25), loss(1.0, &[2.0], &[1.0], 3.0, 0.0) + 0.25);
    }

    #[test]
    fn distance_grads_match_finite_differences() {
        let (pos, negs, gamma) = (2.3, vec![1.0, 4.5, 7.2], 5.0);
        let w = adversarial_weights(&negs, 0.8);
        let (gp, gn) = loss_distance_grads(pos, &negs, &w, gamma);
        let h = 1e-6;
        let fd = (loss(pos + h, &negs, &w, gamma, 0.0) - loss(pos - h, &negs, &w, gamma, 0.0)) / (2.0 * h);
        assert!((fd - gp).abs() < 1e-8);
        for i in 0..negs.len() {
            let mut up = negs.clone();
            let mut dn = negs.clone();
            up[i] += h;
            dn[i] -= h;
            // weights held fixed: they are constants in the backward pass
            let fd = (loss(pos, &up, &w, gamma, 0.0) - loss(pos, &dn, &w, gamma, 0.0)) / (2.0 * h);
            assert!((fd - gn[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn terms_are_nonnegative() {
        for &(p, n) in &[(0.0, 0.0), (100.0, 0.0), (0.0, 100.0), (3.0, 4.0)] {
            assert!(-log_sigmoid(6.0 - p) >= 0.0);
            assert!(-log_sigmoid(n - 6.0) >= 0.0);
            assert!(loss(p, &[n], &[1.0], 6.0, regularization(0.1, 3, &[1.0, -2.0])) >= 0.0);
        }
    }
}
