//! Exact reverse-mode gradients of the batch loss.
//!
//! The backward pass runs through the tail projection, the head projection,
//! the rotation chain, the translation, and the normalization of every raw
//! reflection vector and axis. Gradients are sparse: only rows touched by the
//! batch appear in the [`GradientSet`].

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::data::Triple;
use crate::householder::dot;
use crate::loss::{adversarial_weights, log_sigmoid, loss_distance_grads};
use crate::model::{DistanceScratch, HouseModel, ModelError, ParamKind, RelationView, Side};

/// Positives with their `l` negatives each (`negatives.len() == l * positives.len()`).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub positives: Vec<Triple>,
    pub negatives: Vec<Triple>,
    pub negatives_per_positive: usize,
}

impl Batch {
    pub fn negatives_of(&self, i: usize) -> &[Triple] {
        let l = self.negatives_per_positive;
        &self.negatives[i * l..(i + 1) * l]
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// How the `(lambda / |E|) sum |S_e|^2` term is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularization {
    /// Added to the loss and to the gradient of every entity.
    Dense,
    /// Left out; the optimizer applies it as multiplicative decay.
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSettings {
    pub gamma: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub regularization: Regularization,
}

/// Sparse per-row gradients, one map per parameter table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientSet {
    rows: BTreeMap<ParamKind, BTreeMap<usize, Vec<f64>>>,
}

impl GradientSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row_mut(&mut self, kind: ParamKind, id: usize, len: usize) -> &mut [f64] {
        self.rows
            .entry(kind)
            .or_default()
            .entry(id)
            .or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, kind: ParamKind, id: usize) -> Option<&[f64]> {
        self.rows.get(&kind).and_then(|m| m.get(&id)).map(Vec::as_slice)
    }

    pub fn rows(&self, kind: ParamKind) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows
            .get(&kind)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&id, g)| (id, g.as_slice())))
    }

    pub fn touched(&self, kind: ParamKind) -> Vec<usize> {
        self.rows.get(&kind).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }

    fn add_row(&mut self, kind: ParamKind, id: usize, values: &[f64]) {
        let row = self.row_mut(kind, id, values.len());
        for (a, b) in row.iter_mut().zip(values) {
            *a += b;
        }
    }

    /// Adds `other` into `self`.
    pub fn merge(&mut self, other: &GradientSet) {
        for (&kind, map) in &other.rows {
            for (&id, g) in map {
                self.add_row(kind, id, g);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for map in self.rows.values_mut() {
            for g in map.values_mut() {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .values()
            .flat_map(|m| m.values())
            .flat_map(|g| g.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().flat_map(|m| m.values()).flatten().all(|v| v.is_finite())
    }
}

/// Intermediate vectors of one row, kept for the backward pass.
struct RowTape {
    head: Vec<f64>,
    rot: Vec<f64>,
    tail: Vec<f64>,
    diff: Vec<f64>,
    grad: Vec<f64>,
    tmp: Vec<f64>,
}

impl RowTape {
    fn new(k: usize, m: usize, chain_len: usize) -> Self {
        Self {
            head: vec![0.0; (m + 1) * k],
            rot: vec![0.0; (chain_len + 1) * k],
            tail: vec![0.0; (m + 1) * k],
            diff: vec![0.0; k],
            grad: vec![0.0; k],
            tmp: vec![0.0; k],
        }
    }
}

/// Gradient buffers for one triple.
struct TripleGrads {
    head: Vec<f64>,
    tail: Vec<f64>,
    rotation: Vec<f64>,
    head_axes: Vec<f64>,
    head_taus: Vec<f64>,
    tail_axes: Vec<f64>,
    tail_taus: Vec<f64>,
    translation: Vec<f64>,
}

impl TripleGrads {
    fn new(model: &HouseModel) -> Self {
        let z = |kind: ParamKind| vec![0.0; model.table(kind).row_len()];
        Self {
            head: z(ParamKind::Entity),
            tail: z(ParamKind::Entity),
            rotation: z(ParamKind::Rotation),
            head_axes: z(ParamKind::HeadAxis),
            head_taus: z(ParamKind::HeadTau),
            tail_axes: z(ParamKind::TailAxis),
            tail_taus: z(ParamKind::TailTau),
            translation: vec![0.0; if model.config().variant.uses_translation() { model.entities.row_len() } else { 0 }],
        }
    }

    fn clear(&mut self) {
        for v in [
            &mut self.head,
            &mut self.tail,
            &mut self.rotation,
            &mut self.head_axes,
            &mut self.head_taus,
            &mut self.tail_axes,
            &mut self.tail_taus,
            &mut self.translation,
        ] {
            v.fill(0.0);
        }
    }
}

/// Backward through `x_{j+1} = x_j - tau <x_j, p> p` for `j = m-1 .. 0`, with
/// `p = raw / |raw|`. `grad` holds the gradient w.r.t. the chain output and
/// is overwritten with the gradient w.r.t. the input.
#[allow(clippy::too_many_arguments)]
fn projection_backward(
    view: &RelationView<'_>,
    side: Side,
    row: usize,
    stages: &[f64],
    grad: &mut [f64],
    tmp: &mut [f64],
    g_axes: &mut [f64],
    g_taus: &mut [f64],
) {
    let (k, m) = (view.k, view.m);
    let norms = match side {
        Side::Head => &view.head_norms,
        Side::Tail => &view.tail_norms,
    };
    for j in (0..m).rev() {
        let p = view.axis_unit(side, row, j);
        let tau = view.tau(side, row, j);
        let x_prev = &stages[j * k..(j + 1) * k];
        let s = dot(grad, p);
        let c = dot(x_prev, p);
        g_taus[row * m + j] -= c * s;
        // d/dp_hat, then through normalization
        for ((t, g), x) in tmp.iter_mut().zip(grad.iter()).zip(x_prev) {
            *t = -tau * (c * g + s * x);
        }
        let radial = dot(tmp, p);
        let inv_norm = 1.0 / norms[row * m + j];
        let off = (row * m + j) * k;
        for (idx, (t, pi)) in tmp.iter().zip(p).enumerate() {
            g_axes[off + idx] += (t - radial * pi) * inv_norm;
        }
        for (g, pi) in grad.iter_mut().zip(p) {
            *g -= tau * s * pi;
        }
    }
}

fn projection_forward(view: &RelationView<'_>, side: Side, row: usize, input: &[f64], stages: &mut [f64]) {
    let k = view.k;
    stages[..k].copy_from_slice(input);
    for j in 0..view.m {
        let (done, rest) = stages.split_at_mut((j + 1) * k);
        let prev = &done[j * k..];
        let next = &mut rest[..k];
        next.copy_from_slice(prev);
        crate::householder::project_in_place(view.axis_unit(side, row, j), view.tau(side, row, j), next);
    }
}

/// Accumulates `upstream * d(distance)/d(params)` for one triple into `out`
/// and returns the distance.
fn triple_backward(
    view: &RelationView<'_>,
    s_head: &[f64],
    s_tail: &[f64],
    upstream: f64,
    tape: &mut RowTape,
    out: &mut TripleGrads,
) -> f64 {
    let (k, m, chain_len) = (view.k, view.m, view.chain_len);
    let mut total = 0.0;
    for (row, (h, t)) in s_head.chunks_exact(k).zip(s_tail.chunks_exact(k)).enumerate() {
        projection_forward(view, Side::Head, row, h, &mut tape.head);
        tape.rot[..k].copy_from_slice(&tape.head[m * k..(m + 1) * k]);
        for j in 0..chain_len {
            let (done, rest) = tape.rot.split_at_mut((j + 1) * k);
            let next = &mut rest[..k];
            next.copy_from_slice(&done[j * k..]);
            crate::householder::reflect_in_place(view.rot_unit(row, j), next);
        }
        projection_forward(view, Side::Tail, row, t, &mut tape.tail);

        let rotated = &tape.rot[chain_len * k..(chain_len + 1) * k];
        let projected_tail = &tape.tail[m * k..(m + 1) * k];
        for c in 0..k {
            let b = view.translation.map_or(0.0, |b| b[row * k + c]);
            tape.diff[c] = rotated[c] + b - projected_tail[c];
        }
        let dist = dot(&tape.diff, &tape.diff).sqrt();
        total += dist;
        if dist == 0.0 || upstream == 0.0 {
            continue;
        }
        let scale = upstream / dist;

        // tail side
        for (g, d) in tape.grad.iter_mut().zip(&tape.diff) {
            *g = -scale * d;
        }
        projection_backward(view, Side::Tail, row, &tape.tail, &mut tape.grad, &mut tape.tmp, &mut out.tail_axes, &mut out.tail_taus);
        for (o, g) in out.tail[row * k..(row + 1) * k].iter_mut().zip(&tape.grad) {
            *o += g;
        }

        // head side: translation, rotation, projection
        for (g, d) in tape.grad.iter_mut().zip(&tape.diff) {
            *g = scale * d;
        }
        if !out.translation.is_empty() {
            for (o, g) in out.translation[row * k..(row + 1) * k].iter_mut().zip(&tape.grad) {
                *o += g;
            }
        }
        for j in (0..chain_len).rev() {
            let u = view.rot_unit(row, j);
            let y_prev = &tape.rot[j * k..(j + 1) * k];
            let s = dot(&tape.grad, u);
            let a = dot(y_prev, u);
            for ((t, g), y) in tape.tmp.iter_mut().zip(&tape.grad).zip(y_prev) {
                *t = -2.0 * (a * g + s * y);
            }
            let radial = dot(&tape.tmp, u);
            let inv_norm = 1.0 / view.rot_norms[row * chain_len + j];
            let off = (row * chain_len + j) * k;
            for (idx, (t, ui)) in tape.tmp.iter().zip(u).enumerate() {
                out.rotation[off + idx] += (t - radial * ui) * inv_norm;
            }
            for (g, ui) in tape.grad.iter_mut().zip(u) {
                *g -= 2.0 * s * ui;
            }
        }
        projection_backward(view, Side::Head, row, &tape.head, &mut tape.grad, &mut tape.tmp, &mut out.head_axes, &mut out.head_taus);
        for (o, g) in out.head[row * k..(row + 1) * k].iter_mut().zip(&tape.grad) {
            *o += g;
        }
    }
    total
}

/// Loss and gradients for a contiguous slice of positives; `scale` is the
/// per-positive weight (1 / batch size).
fn chunk_gradients(
    model: &HouseModel,
    views: &HashMap<usize, RelationView<'_>>,
    batch: &Batch,
    range: std::ops::Range<usize>,
    settings: &LossSettings,
    scale: f64,
) -> (f64, GradientSet) {
    let cfg = model.config();
    let mut grads = GradientSet::new();
    let mut tape = RowTape::new(cfg.k, cfg.m, cfg.chain_len());
    let mut tg = TripleGrads::new(model);
    let mut scratch = DistanceScratch::new(cfg.k);
    let mut loss_sum = 0.0;
    for i in range {
        let pos = batch.positives[i];
        let negs = batch.negatives_of(i);
        let view = &views[&pos.relation];
        let pos_d = view.distance(model.entities.row(pos.head), model.entities.row(pos.tail), &mut scratch);
        let neg_d: Vec<f64> = negs
            .iter()
            .map(|n| view.distance(model.entities.row(n.head), model.entities.row(n.tail), &mut scratch))
            .collect();
        let weights = adversarial_weights(&neg_d, settings.alpha);
        let data_loss = -log_sigmoid(settings.gamma - pos_d)
            - neg_d.iter().zip(&weights).map(|(d, w)| w * log_sigmoid(d - settings.gamma)).sum::<f64>();
        loss_sum += scale * data_loss;
        let (g_pos, g_neg) = loss_distance_grads(pos_d, &neg_d, &weights, settings.gamma);

        for (t, g) in std::iter::once((pos, g_pos)).chain(negs.iter().copied().zip(g_neg)) {
            tg.clear();
            triple_backward(view, model.entities.row(t.head), model.entities.row(t.tail), scale * g, &mut tape, &mut tg);
            grads.add_row(ParamKind::Entity, t.head, &tg.head);
            grads.add_row(ParamKind::Entity, t.tail, &tg.tail);
            grads.add_row(ParamKind::Rotation, t.relation, &tg.rotation);
            if cfg.m > 0 {
                grads.add_row(ParamKind::HeadAxis, t.relation, &tg.head_axes);
                grads.add_row(ParamKind::HeadTau, t.relation, &tg.head_taus);
                grads.add_row(ParamKind::TailAxis, t.relation, &tg.tail_axes);
                grads.add_row(ParamKind::TailTau, t.relation, &tg.tail_taus);
            }
            if !tg.translation.is_empty() {
                grads.add_row(ParamKind::Translation, t.relation, &tg.translation);
            }
        }
    }
    (loss_sum, grads)
}

/// Positives per parallel work unit. Fixed so results do not depend on the
/// number of threads.
pub const CHUNK: usize = 32;

/// Batch-mean loss and its gradients.
///
/// Work is split into fixed-size chunks that may run on the current rayon
/// pool; partial results are merged in chunk order.
pub fn loss_gradients(
    batch: &Batch,
    model: &HouseModel,
    settings: &LossSettings,
) -> Result<(f64, GradientSet), ModelError> {
    if batch.is_empty() {
        return Ok((0.0, GradientSet::new()));
    }
    let mut views = HashMap::new();
    for t in batch.positives.iter().chain(&batch.negatives) {
        model.check_entity(t.head)?;
        model.check_entity(t.tail)?;
        if !views.contains_key(&t.relation) {
            views.insert(t.relation, model.relation_view(t.relation)?);
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let ranges: Vec<_> = (0..batch.len())
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(batch.len()))
        .collect();
    let parts: Vec<(f64, GradientSet)> = ranges
        .into_par_iter()
        .map(|r| chunk_gradients(model, &views, batch, r, settings, scale))
        .collect();
    let mut total = 0.0;
    let mut grads = GradientSet::new();
    for (l, g) in &parts {
        total += l;
        grads.merge(g);
    }

    if settings.regularization == Regularization::Dense && settings.lambda != 0.0 {
        let ne = model.config().num_entities;
        let coef = settings.lambda / ne as f64;
        total += crate::loss::regularization(settings.lambda, ne, model.entities.as_slice());
        for e in 0..ne {
            let s = model.entities.row(e);
            let row = grads.row_mut(ParamKind::Entity, e, s.len());
            for (g, v) in row.iter_mut().zip(s) {
                *g += 2.0 * coef * v;
            }
        }
    }
    Ok((total, grads))
}

/// Batch-mean loss without gradients.
pub fn batch_loss(batch: &Batch, model: &HouseModel, settings: &LossSettings) -> Result<f64, ModelError> {
    let mut scratch = DistanceScratch::new(model.config().k);
    let mut total = 0.0;
    for (i, pos) in batch.positives.iter().enumerate() {
        model.check_entity(pos.head)?;
        model.check_entity(pos.tail)?;
        let view = model.relation_view(pos.relation)?;
        let pos_d = view.distance(model.entities.row(pos.head), model.entities.row(pos.tail), &mut scratch);
        let mut neg_d = Vec::with_capacity(batch.negatives_per_positive);
        for n in batch.negatives_of(i) {
            model.check_entity(n.head)?;
            model.check_entity(n.tail)?;
            neg_d.push(view.distance(model.entities.row(n.head), model.entities.row(n.tail), &mut scratch));
        }
        let w = adversarial_weights(&neg_d, settings.alpha);
        total += crate::loss::loss(pos_d, &neg_d, &w, settings.gamma, 0.0);
    }
    total /= batch.len().max(1) as f64;
    if settings.regularization == Regularization::Dense {
        total += crate::loss::regularization(settings.lambda, model.config().num_entities, model.entities.as_slice());
    }
    Ok(total)
}
