//! Reference computations shared by the integration tests.
//!
//! Everything here is written against explicit dense matrices (nalgebra) so
//! it does not share code paths with the library's vector-iteration kernels.

#![allow(dead_code)]

use house_kge::data::Triple;
use house_kge::gradients::{Batch, LossSettings, Regularization};
use house_kge::model::{HouseModel, ParamKind};
use nalgebra::{DMatrix, DVector};

pub fn unit(raw: &[f64]) -> DVector<f64> {
    let v = DVector::from_column_slice(raw);
    let n = v.norm();
    v / n
}

/// `I - tau p p^T` for the normalized `raw`.
pub fn modified_reflection(raw: &[f64], tau: f64) -> DMatrix<f64> {
    let p = unit(raw);
    DMatrix::identity(raw.len(), raw.len()) - (&p * p.transpose()) * tau
}

pub fn reflection(raw: &[f64]) -> DMatrix<f64> {
    modified_reflection(raw, 2.0)
}

/// Product of reflections applied in order: the first vector acts first.
pub fn chain_matrix(vectors: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    vectors.iter().fold(DMatrix::identity(k, k), |acc, u| reflection(u) * acc)
}

pub fn projection_matrix(axes: &[Vec<f64>], taus: &[f64], k: usize) -> DMatrix<f64> {
    axes.iter().zip(taus).fold(DMatrix::identity(k, k), |acc, (p, &t)| modified_reflection(p, t) * acc)
}

fn chunks(row: &[f64], k: usize, start: usize, count: usize) -> Vec<Vec<f64>> {
    (start..start + count).map(|j| row[j * k..(j + 1) * k].to_vec()).collect()
}

/// Distance of `(h, r, t)` computed with explicit matrices.
pub fn oracle_distance(model: &HouseModel, h: usize, r: usize, t: usize) -> f64 {
    let cfg = model.config();
    let (k, m, len) = (cfg.k, cfg.m, cfg.chain_len());
    let mut total = 0.0;
    for i in 0..cfg.d {
        let rot = chain_matrix(&chunks(model.rotations.row(r), k, i * len, len), k);
        let ph = projection_matrix(
            &chunks(model.head_axes.row(r), k, i * m, m),
            &model.head_taus.row(r)[i * m..(i + 1) * m],
            k,
        );
        let pt = projection_matrix(
            &chunks(model.tail_axes.row(r), k, i * m, m),
            &model.tail_taus.row(r)[i * m..(i + 1) * m],
            k,
        );
        let hv = DVector::from_column_slice(&model.entities.row(h)[i * k..(i + 1) * k]);
        let tv = DVector::from_column_slice(&model.entities.row(t)[i * k..(i + 1) * k]);
        let mut head = rot * ph * hv;
        if cfg.variant.uses_translation() {
            head += DVector::from_column_slice(&model.translations.row(r)[i * k..(i + 1) * k]);
        }
        total += (head - pt * tv).norm();
    }
    total
}

fn ln_sigmoid(x: f64) -> f64 {
    // direct form; arguments in the tests stay moderate
    -(1.0 + (-x).exp()).ln()
}

/// Softmax of `-alpha d` over each positive's negatives, computed from `model`.
pub fn oracle_weights(batch: &Batch, model: &HouseModel, alpha: f64) -> Vec<Vec<f64>> {
    (0..batch.len())
        .map(|i| {
            let z: Vec<f64> = batch
                .negatives_of(i)
                .iter()
                .map(|n| (-alpha * oracle_distance(model, n.head, n.relation, n.tail)).exp())
                .collect();
            let zs: f64 = z.iter().sum();
            z.into_iter().map(|w| w / zs).collect()
        })
        .collect()
}

/// Batch-mean loss from first principles, with weights recomputed at `model`.
pub fn oracle_loss(batch: &Batch, model: &HouseModel, s: &LossSettings) -> f64 {
    oracle_loss_with_weights(batch, model, s, &oracle_weights(batch, model, s.alpha))
}

/// Batch-mean loss with the negative weights held at `weights`.
pub fn oracle_loss_with_weights(batch: &Batch, model: &HouseModel, s: &LossSettings, weights: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (i, p) in batch.positives.iter().enumerate() {
        let pos = oracle_distance(model, p.head, p.relation, p.tail);
        let negs = batch.negatives_of(i).iter().map(|n| oracle_distance(model, n.head, n.relation, n.tail));
        total += -ln_sigmoid(s.gamma - pos) - negs.zip(&weights[i]).map(|(d, w)| w * ln_sigmoid(d - s.gamma)).sum::<f64>();
    }
    total /= batch.len() as f64;
    if s.regularization == Regularization::Dense {
        let ne = model.config().num_entities as f64;
        total += s.lambda / ne * model.entities.as_slice().iter().map(|v| v * v).sum::<f64>();
    }
    total
}

/// A batch over the model's ids with `l` negatives per positive.
pub fn random_batch<R: rand::Rng>(rng: &mut R, model: &HouseModel, b: usize, l: usize) -> Batch {
    let cfg = model.config();
    let pick = |rng: &mut R, n: usize| rng.random_range(0..n);
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for _ in 0..b {
        let p = Triple::new(pick(rng, cfg.num_entities), pick(rng, cfg.num_relations), pick(rng, cfg.num_entities));
        positives.push(p);
        for _ in 0..l {
            let e = pick(rng, cfg.num_entities);
            negatives.push(if rng.random_bool(0.5) { Triple { head: e, ..p } } else { Triple { tail: e, ..p } });
        }
    }
    Batch { positives, negatives, negatives_per_positive: l }
}

/// Worst relative disagreement between `loss_gradients` and central finite
/// differences of the oracle loss over every parameter of the model. The
/// negative weights are frozen at the unperturbed model, as in training.
///
/// Relative error is `|g - fd| / max(|g|, |fd|, floor)`; the floor keeps
/// entries that are zero up to rounding from dividing noise by noise.
pub fn gradient_check(model: &HouseModel, batch: &Batch, s: &LossSettings, step: f64, floor: f64) -> (f64, String) {
    let (_, grads) = house_kge::gradients::loss_gradients(batch, model, s).expect("valid batch");
    let mut worst = (0.0, String::new());
    let weights = oracle_weights(batch, model, s.alpha);
    let mut probe = model.clone();
    for kind in ParamKind::ALL {
        if kind == ParamKind::Translation && !model.config().variant.uses_translation() {
            continue;
        }
        let table = model.table(kind);
        for row in 0..table.rows() {
            for col in 0..table.row_len() {
                let base = table.row(row)[col];
                probe.table_mut(kind).row_mut(row)[col] = base + step;
                let up = oracle_loss_with_weights(batch, &probe, s, &weights);
                probe.table_mut(kind).row_mut(row)[col] = base - step;
                let down = oracle_loss_with_weights(batch, &probe, s, &weights);
                probe.table_mut(kind).row_mut(row)[col] = base;
                let fd = (up - down) / (2.0 * step);
                let g = grads.get(kind, row).map_or(0.0, |r| r[col]);
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
                if rel > worst.0 || rel.is_nan() {
                    worst = (rel, format!("{kind} row {row} col {col}: analytic {g:e} vs fd {fd:e}"));
                }
            }
        }
    }
    worst
}
