//! Lazy sparse Adam with decoupled entity decay.
//!
//! Only rows present in a [`GradientSet`] have their moments and values
//! updated. The entity regularizer is applied as multiplicative decay
//! `S <- S (1 - lr c)` with `c = 2 lambda / |E|` once per step for every
//! entity; rows that are not touched accumulate the factor and receive it in
//! one go when they are next read ([`OptimizerState::catch_up`]) or when the
//! whole table is flushed.

use crate::gradients::GradientSet;
use crate::model::{HouseModel, ParamKind, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub adam: AdamConfig,
    /// Completed steps.
    pub step: u64,
    first: Vec<Table>,
    second: Vec<Table>,
    /// Last step whose decay has been applied to each entity row.
    last_decay: Vec<u64>,
    /// `2 lambda / |E|`.
    decay_coef: f64,
    /// Learning rate the pending decay is measured in.
    lr: Option<f64>,
}

fn kind_index(kind: ParamKind) -> usize {
    ParamKind::ALL.iter().position(|k| *k == kind).expect("listed kind")
}

impl OptimizerState {
    pub fn new(model: &HouseModel, adam: AdamConfig, lambda: f64) -> Self {
        let shape = |kind: ParamKind| {
            let t = model.table(kind);
            Table::zeros(t.rows(), t.row_len())
        };
        let ne = model.config().num_entities;
        Self {
            adam,
            step: 0,
            first: ParamKind::ALL.iter().map(|&k| shape(k)).collect(),
            second: ParamKind::ALL.iter().map(|&k| shape(k)).collect(),
            last_decay: vec![0; ne],
            decay_coef: 2.0 * lambda / ne as f64,
            lr: None,
        }
    }

    pub fn decay_coef(&self) -> f64 {
        self.decay_coef
    }

    pub fn first_moment(&self, kind: ParamKind) -> &Table {
        &self.first[kind_index(kind)]
    }

    pub fn second_moment(&self, kind: ParamKind) -> &Table {
        &self.second[kind_index(kind)]
    }

    pub fn moments_finite(&self) -> bool {
        self.first.iter().chain(&self.second).all(|t| t.as_slice().iter().all(|v| v.is_finite()))
    }

    fn decay_rows_to(&mut self, model: &mut HouseModel, rows: impl IntoIterator<Item = usize>, target: u64) {
        let Some(lr) = self.lr else { return };
        if self.decay_coef == 0.0 {
            return;
        }
        let factor = 1.0 - lr * self.decay_coef;
        for e in rows {
            let pending = target.saturating_sub(self.last_decay[e]);
            if pending == 0 {
                continue;
            }
            let f = factor.powi(pending as i32);
            model.entities.row_mut(e).iter_mut().for_each(|v| *v *= f);
            self.last_decay[e] = target;
        }
    }

    /// Brings `entities` up to date with every completed step, so the next
    /// gradient is taken at the same values a dense update would have.
    pub fn catch_up(&mut self, model: &mut HouseModel, entities: impl IntoIterator<Item = usize>) {
        let target = self.step;
        self.decay_rows_to(model, entities, target);
    }

    /// Applies all pending decay to every entity row.
    pub fn flush(&mut self, model: &mut HouseModel) {
        let target = self.step;
        let ne = self.last_decay.len();
        self.decay_rows_to(model, 0..ne, target);
    }

    /// One optimizer step with learning rate `lr`.
    ///
    /// A change of `lr` flushes the decay accumulated under the old value.
    pub fn adam_step(&mut self, model: &mut HouseModel, grads: &GradientSet, lr: f64) {
        if self.lr != Some(lr) {
            self.flush(model);
            self.lr = Some(lr);
        }
        let touched = grads.touched(ParamKind::Entity);
        self.catch_up(model, touched.iter().copied());
        self.step += 1;
        let t = self.step;
        let AdamConfig { beta1, beta2, eps } = self.adam;
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        let decay = 1.0 - lr * self.decay_coef;

        for &kind in &ParamKind::ALL {
            let ki = kind_index(kind);
            for (row, g) in grads.rows(kind) {
                let m1 = self.first[ki].row_mut(row);
                let m2 = self.second[ki].row_mut(row);
                let p = model.table_mut(kind).row_mut(row);
                let decays = kind == ParamKind::Entity && self.decay_coef != 0.0;
                for i in 0..g.len() {
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
                    let step = lr * (m1[i] / bc1) / ((m2[i] / bc2).sqrt() + eps);
                    if decays {
                        p[i] = p[i] * decay - step;
                    } else {
                        p[i] -= step;
                    }
                }
            }
        }
        for e in touched {
            self.last_decay[e] = t;
        }
    }
}

/// Convenience wrapper matching the usual free-function form.
pub fn adam_step(model: &mut HouseModel, grads: &GradientSet, state: &mut OptimizerState, lr: f64) {
    state.adam_step(model, grads, lr);
}
