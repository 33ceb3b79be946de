//! Lazy entity decay against a dense reference that decays every row on
//! every step.

use house_kge::gradients::GradientSet;
use house_kge::model::{init_parameters, ModelConfig, ParamKind, Variant};
use house_kge::optimizer::{AdamConfig, OptimizerState};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gradient that depends on the current row, so reading a stale row shows.
fn grad_of(row: &[f64], e: usize) -> Vec<f64> {
    row.iter().enumerate().map(|(i, v)| v - 0.1 * (e + i) as f64 + 0.3 * v.sin()).collect()
}

struct Dense {
    params: Vec<Vec<f64>>,
    m1: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
    step: i32,
}

impl Dense {
    fn step(&mut self, touched: &[usize], lr: f64, coef: f64) {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        self.step += 1;
        let (bc1, bc2) = (1.0 - b1.powi(self.step), 1.0 - b2.powi(self.step));
        let grads: Vec<(usize, Vec<f64>)> = touched.iter().map(|&e| (e, grad_of(&self.params[e], e))).collect();
        for row in &mut self.params {
            row.iter_mut().for_each(|v| *v *= 1.0 - lr * coef);
        }
        for (e, g) in grads {
            for i in 0..g.len() {
                self.m1[e][i] = b1 * self.m1[e][i] + (1.0 - b1) * g[i];
                self.m2[e][i] = b2 * self.m2[e][i] + (1.0 - b2) * g[i] * g[i];
                self.params[e][i] -= lr * (self.m1[e][i] / bc1) / ((self.m2[e][i] / bc2).sqrt() + eps);
            }
        }
    }
}

fn run(seed: u64, num_entities: usize, steps: usize, lambda: f64) -> f64 {
    let cfg = ModelConfig::new(Variant::House, 2, 3, 1, num_entities, 2, seed).unwrap();
    let mut model = init_parameters(&cfg).unwrap();
    let row_len = model.entities.row_len();
    let mut dense = Dense {
        params: (0..num_entities).map(|e| model.entities.row(e).to_vec()).collect(),
        m1: vec![vec![0.0; row_len]; num_entities],
        m2: vec![vec![0.0; row_len]; num_entities],
        step: 0,
    };
    let mut state = OptimizerState::new(&model, AdamConfig::default(), lambda);
    let coef = 2.0 * lambda / num_entities as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..steps {
        let lr = if s < steps / 2 { 0.05 } else { 0.025 };
        let count = rng.random_range(1..=num_entities / 4);
        let touched: Vec<usize> = sample(&mut rng, num_entities, count).into_vec();
        state.catch_up(&mut model, touched.iter().copied());
        let mut grads = GradientSet::new();
        for &e in &touched {
            let g = grad_of(model.entities.row(e), e);
            grads.row_mut(ParamKind::Entity, e, row_len).copy_from_slice(&g);
        }
        state.adam_step(&mut model, &grads, lr);
        dense.step(&touched, lr, coef);
    }
    state.flush(&mut model);
    let mut worst = 0.0f64;
    for (e, row) in dense.params.iter().enumerate() {
        for (a, b) in model.entities.row(e).iter().zip(row) {
            worst = worst.max((a - b).abs() / b.abs().max(1e-3));
        }
    }
    worst
}

#[test]
fn lazy_decay_matches_dense_reference() {
    for (seed, entities, lambda) in [(0, 50, 0.5), (1, 20, 2.0), (2, 8, 0.1)] {
        let err = run(seed, entities, 200, lambda);
        assert!(err <= 1e-9, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn zero_lambda_leaves_untouched_rows_alone() {
    assert!(run(3, 30, 50, 0.0) <= 1e-12);
}
