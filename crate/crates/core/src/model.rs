//! Embedding tables and the distance functions of every variant.
//!
//! Every entity is a `d x k` block of rows. A relation owns, per row, a chain
//! of `2 * floor(k / 2)` reflection vectors, two projection chains of length
//! `m` (head side and tail side) and, for the `+` variants, a translation.
//! The distance of `(h, r, t)` is the sum over rows of
//! `|rot(proj_head(S_h[i])) + b[i] - proj_tail(S_t[i])|`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use thiserror::Error;

use crate::householder::{self, normalize_into, project_in_place, reflect_in_place};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("{kind} id {id} out of range (have {limit})")]
    IdOutOfRange { kind: &'static str, id: usize, limit: usize },
    #[error("degenerate {param} vector at relation {relation}, row {row}, slot {slot} (norm {norm:e})")]
    Degenerate { param: ParamKind, relation: usize, row: usize, slot: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    HouseR,
    House,
    HouseRPlus,
    HousePlus,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::HouseR, Variant::House, Variant::HouseRPlus, Variant::HousePlus];

    pub fn uses_projection(self) -> bool {
        matches!(self, Variant::House | Variant::HousePlus)
    }

    pub fn uses_translation(self) -> bool {
        matches!(self, Variant::HouseRPlus | Variant::HousePlus)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::HouseR => "house-r",
            Variant::House => "house",
            Variant::HouseRPlus => "house-r-plus",
            Variant::HousePlus => "house-plus",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-").replace('+', "-plus");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| ModelError::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

/// Which slot of a triple an entity fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Head => "head",
            Side::Tail => "tail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Rows per entity.
    pub d: usize,
    /// Rotation dimension.
    pub k: usize,
    /// Modified reflections per projection chain; always 0 without projections.
    pub m: usize,
    pub num_entities: usize,
    pub num_relations: usize,
    pub seed: u64,
    /// Margin used to size the entity initialization range.
    pub init_gamma: f64,
}

impl ModelConfig {
    pub fn new(
        variant: Variant,
        d: usize,
        k: usize,
        m: usize,
        num_entities: usize,
        num_relations: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            variant,
            d,
            k,
            m: if variant.uses_projection() { m } else { 0 },
            num_entities,
            num_relations,
            seed,
            init_gamma: 12.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_init_gamma(mut self, gamma: f64) -> Self {
        self.init_gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(ModelError::InvalidConfig("d must be >= 1".into()));
        }
        if self.k < 2 {
            return Err(ModelError::InvalidConfig("k must be >= 2".into()));
        }
        if !self.variant.uses_projection() && self.m != 0 {
            return Err(ModelError::InvalidConfig(format!("{} takes no projections (m = 0)", self.variant)));
        }
        if self.num_entities == 0 || self.num_relations == 0 {
            return Err(ModelError::InvalidConfig("need at least one entity and one relation".into()));
        }
        if !(self.init_gamma.is_finite() && self.init_gamma >= 0.0) {
            return Err(ModelError::InvalidConfig("init gamma must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// `floor(k / 2)`.
    pub fn n(&self) -> usize {
        self.k / 2
    }

    /// Reflections per rotation chain, `2 * floor(k / 2)`.
    pub fn chain_len(&self) -> usize {
        2 * self.n()
    }
}

/// The parameter tensors of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Entity,
    Rotation,
    HeadAxis,
    HeadTau,
    TailAxis,
    TailTau,
    Translation,
}

impl ParamKind {
    pub const ALL: [ParamKind; 7] = [
        ParamKind::Entity,
        ParamKind::Rotation,
        ParamKind::HeadAxis,
        ParamKind::HeadTau,
        ParamKind::TailAxis,
        ParamKind::TailTau,
        ParamKind::Translation,
    ];
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamKind::Entity => "entity",
            ParamKind::Rotation => "rotation",
            ParamKind::HeadAxis => "head-axis",
            ParamKind::HeadTau => "head-tau",
            ParamKind::TailAxis => "tail-axis",
            ParamKind::TailTau => "tail-tau",
            ParamKind::Translation => "translation",
        };
        f.write_str(s)
    }
}

/// A dense table of equally sized rows (one row per entity or relation).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    row_len: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, row_len: usize) -> Self {
        Self { row_len, data: vec![0.0; rows * row_len] }
    }

    pub fn row_len(&self) -> usize {
        self.row_len
    }

    pub fn rows(&self) -> usize {
        if self.row_len == 0 {
            0
        } else {
            self.data.len() / self.row_len
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.row_len..(i + 1) * self.row_len]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.row_len..(i + 1) * self.row_len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Model parameters for any of the four variants.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseModel {
    config: ModelConfig,
    /// `num_entities` rows of `d * k`.
    pub entities: Table,
    /// `num_relations` rows of `d * 2n * k`.
    pub rotations: Table,
    /// `num_relations` rows of `d * m * k`.
    pub head_axes: Table,
    /// `num_relations` rows of `d * m`.
    pub head_taus: Table,
    pub tail_axes: Table,
    pub tail_taus: Table,
    /// `num_relations` rows of `d * k`, empty unless a `+` variant.
    pub translations: Table,
}

impl HouseModel {
    /// Zero-filled tables with the shapes implied by `config`.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (d, k, m) = (config.d, config.k, config.m);
        let (ne, nr) = (config.num_entities, config.num_relations);
        let trans_rows = if config.variant.uses_translation() { nr } else { 0 };
        Ok(Self {
            entities: Table::zeros(ne, d * k),
            rotations: Table::zeros(nr, d * config.chain_len() * k),
            head_axes: Table::zeros(nr, d * m * k),
            head_taus: Table::zeros(nr, d * m),
            tail_axes: Table::zeros(nr, d * m * k),
            tail_taus: Table::zeros(nr, d * m),
            translations: Table::zeros(trans_rows, d * k),
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn table(&self, kind: ParamKind) -> &Table {
        match kind {
            ParamKind::Entity => &self.entities,
            ParamKind::Rotation => &self.rotations,
            ParamKind::HeadAxis => &self.head_axes,
            ParamKind::HeadTau => &self.head_taus,
            ParamKind::TailAxis => &self.tail_axes,
            ParamKind::TailTau => &self.tail_taus,
            ParamKind::Translation => &self.translations,
        }
    }

    pub fn table_mut(&mut self, kind: ParamKind) -> &mut Table {
        match kind {
            ParamKind::Entity => &mut self.entities,
            ParamKind::Rotation => &mut self.rotations,
            ParamKind::HeadAxis => &mut self.head_axes,
            ParamKind::HeadTau => &mut self.head_taus,
            ParamKind::TailAxis => &mut self.tail_axes,
            ParamKind::TailTau => &mut self.tail_taus,
            ParamKind::Translation => &mut self.translations,
        }
    }

    pub fn num_parameters(&self) -> usize {
        ParamKind::ALL.iter().map(|&p| self.table(p).as_slice().len()).sum()
    }

    pub fn check_entity(&self, id: usize) -> Result<()> {
        if id < self.config.num_entities {
            Ok(())
        } else {
            Err(ModelError::IdOutOfRange { kind: "entity", id, limit: self.config.num_entities })
        }
    }

    pub fn check_relation(&self, id: usize) -> Result<()> {
        if id < self.config.num_relations {
            Ok(())
        } else {
            Err(ModelError::IdOutOfRange { kind: "relation", id, limit: self.config.num_relations })
        }
    }

    /// Normalized view of relation `r`, built once and reused across rows.
    pub fn relation_view(&self, r: usize) -> Result<RelationView<'_>> {
        self.check_relation(r)?;
        let cfg = &self.config;
        let k = cfg.k;
        let normalize = |param: ParamKind, raw: &[f64], per_row: usize| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut units = vec![0.0; raw.len()];
            let mut norms = Vec::with_capacity(raw.len() / k);
            for (idx, (src, dst)) in raw.chunks_exact(k).zip(units.chunks_exact_mut(k)).enumerate() {
                let n = normalize_into(src, dst).map_err(|_| ModelError::Degenerate {
                    param,
                    relation: r,
                    row: idx / per_row,
                    slot: idx % per_row,
                    norm: householder::norm(src),
                })?;
                norms.push(n);
            }
            Ok((units, norms))
        };
        let (rot_units, rot_norms) = normalize(ParamKind::Rotation, self.rotations.row(r), cfg.chain_len())?;
        let (head_units, head_norms, tail_units, tail_norms) = if cfg.m > 0 {
            let (hu, hn) = normalize(ParamKind::HeadAxis, self.head_axes.row(r), cfg.m)?;
            let (tu, tn) = normalize(ParamKind::TailAxis, self.tail_axes.row(r), cfg.m)?;
            (hu, hn, tu, tn)
        } else {
            Default::default()
        };
        Ok(RelationView {
            k,
            m: cfg.m,
            chain_len: cfg.chain_len(),
            rot_units,
            rot_norms,
            head_units,
            head_norms,
            head_taus: self.head_taus.row(r),
            tail_units,
            tail_norms,
            tail_taus: self.tail_taus.row(r),
            translation: if cfg.variant.uses_translation() { Some(self.translations.row(r)) } else { None },
        })
    }

    /// Relation-specific representation of entity `e` on the given side.
    pub fn project_entity(&self, e: usize, r: usize, side: Side) -> Result<Vec<f64>> {
        self.check_entity(e)?;
        let view = self.relation_view(r)?;
        let mut out = self.entities.row(e).to_vec();
        let k = self.config.k;
        for (i, row) in out.chunks_exact_mut(k).enumerate() {
            view.project_row(side, i, row);
        }
        Ok(out)
    }

    /// Row-wise rotation of an already projected `d x k` block.
    pub fn rotate_head(&self, projected: &[f64], r: usize) -> Result<Vec<f64>> {
        let view = self.relation_view(r)?;
        let k = self.config.k;
        if projected.len() != self.config.d * k {
            return Err(ModelError::InvalidConfig(format!(
                "expected a {}x{} block, got {} values",
                self.config.d,
                k,
                projected.len()
            )));
        }
        let mut out = projected.to_vec();
        for (i, row) in out.chunks_exact_mut(k).enumerate() {
            view.rotate_row(i, row);
        }
        Ok(out)
    }

    /// Distance of the triple `(h, r, t)`.
    pub fn distance(&self, h: usize, r: usize, t: usize) -> Result<f64> {
        self.check_entity(h)?;
        self.check_entity(t)?;
        let view = self.relation_view(r)?;
        let mut scratch = DistanceScratch::new(self.config.k);
        Ok(view.distance(self.entities.row(h), self.entities.row(t), &mut scratch))
    }

    /// Distances of every entity placed in `side`, with `fixed` in the other slot.
    ///
    /// The fixed entity's image is computed once.
    pub fn score_candidates(&self, fixed: usize, r: usize, side: Side) -> Result<Vec<f64>> {
        self.check_entity(fixed)?;
        let view = self.relation_view(r)?;
        let k = self.config.k;
        let dk = self.config.d * k;
        let fixed_row = self.entities.row(fixed);
        let mut fixed_image = fixed_row.to_vec();
        let mut cand = vec![0.0; dk];
        let mut out = Vec::with_capacity(self.config.num_entities);
        match side {
            Side::Tail => {
                view.head_image(&mut fixed_image);
                for j in 0..self.config.num_entities {
                    cand.copy_from_slice(self.entities.row(j));
                    view.tail_image(&mut cand);
                    out.push(block_distance(&fixed_image, &cand, k));
                }
            }
            Side::Head => {
                view.tail_image(&mut fixed_image);
                for j in 0..self.config.num_entities {
                    cand.copy_from_slice(self.entities.row(j));
                    view.head_image(&mut cand);
                    out.push(block_distance(&cand, &fixed_image, k));
                }
            }
        }
        Ok(out)
    }
}

/// Normalized parameters of one relation.
#[derive(Debug, Clone)]
pub struct RelationView<'a> {
    pub k: usize,
    pub m: usize,
    pub chain_len: usize,
    pub rot_units: Vec<f64>,
    pub rot_norms: Vec<f64>,
    pub head_units: Vec<f64>,
    pub head_norms: Vec<f64>,
    pub head_taus: &'a [f64],
    pub tail_units: Vec<f64>,
    pub tail_norms: Vec<f64>,
    pub tail_taus: &'a [f64],
    pub translation: Option<&'a [f64]>,
}

impl RelationView<'_> {
    #[inline]
    pub fn rot_unit(&self, row: usize, j: usize) -> &[f64] {
        let off = (row * self.chain_len + j) * self.k;
        &self.rot_units[off..off + self.k]
    }

    #[inline]
    pub fn axis_unit(&self, side: Side, row: usize, j: usize) -> &[f64] {
        let off = (row * self.m + j) * self.k;
        match side {
            Side::Head => &self.head_units[off..off + self.k],
            Side::Tail => &self.tail_units[off..off + self.k],
        }
    }

    #[inline]
    pub fn tau(&self, side: Side, row: usize, j: usize) -> f64 {
        match side {
            Side::Head => self.head_taus[row * self.m + j],
            Side::Tail => self.tail_taus[row * self.m + j],
        }
    }

    #[inline]
    pub fn project_row(&self, side: Side, row: usize, x: &mut [f64]) {
        for j in 0..self.m {
            project_in_place(self.axis_unit(side, row, j), self.tau(side, row, j), x);
        }
    }

    #[inline]
    pub fn rotate_row(&self, row: usize, x: &mut [f64]) {
        for j in 0..self.chain_len {
            reflect_in_place(self.rot_unit(row, j), x);
        }
    }

    /// Head-side image of one row: projection, rotation, then translation.
    #[inline]
    pub fn head_image_row(&self, row: usize, x: &mut [f64]) {
        self.project_row(Side::Head, row, x);
        self.rotate_row(row, x);
        if let Some(b) = self.translation {
            for (xi, bi) in x.iter_mut().zip(&b[row * self.k..(row + 1) * self.k]) {
                *xi += bi;
            }
        }
    }

    pub fn head_image(&self, block: &mut [f64]) {
        for (i, row) in block.chunks_exact_mut(self.k).enumerate() {
            self.head_image_row(i, row);
        }
    }

    pub fn tail_image(&self, block: &mut [f64]) {
        for (i, row) in block.chunks_exact_mut(self.k).enumerate() {
            self.project_row(Side::Tail, i, row);
        }
    }

    pub fn distance(&self, head: &[f64], tail: &[f64], scratch: &mut DistanceScratch) -> f64 {
        let k = self.k;
        let mut total = 0.0;
        for (i, (h, t)) in head.chunks_exact(k).zip(tail.chunks_exact(k)).enumerate() {
            scratch.a.copy_from_slice(h);
            scratch.b.copy_from_slice(t);
            self.head_image_row(i, &mut scratch.a);
            self.project_row(Side::Tail, i, &mut scratch.b);
            total += row_distance(&scratch.a, &scratch.b);
        }
        total
    }
}

/// Reusable per-row buffers.
#[derive(Debug, Clone)]
pub struct DistanceScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DistanceScratch {
    pub fn new(k: usize) -> Self {
        Self { a: vec![0.0; k], b: vec![0.0; k] }
    }
}

#[inline]
fn row_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sum of row-wise Euclidean distances between two `d x k` blocks.
#[inline]
pub fn block_distance(a: &[f64], b: &[f64], k: usize) -> f64 {
    a.chunks_exact(k).zip(b.chunks_exact(k)).map(|(x, y)| row_distance(x, y)).sum()
}

/// Standard deviation of the initial projection scalars.
pub const TAU_INIT_STD: f64 = 0.01;

/// Random initialization, deterministic in `config.seed`.
///
/// Entities are uniform in `[-beta, beta]` with `beta = (init_gamma + 2) / (d k)`;
/// reflection vectors and axes are standard Gaussian; `tau ~ N(0, 0.01^2)`;
/// translations start at zero.
pub fn init_parameters(config: &ModelConfig) -> Result<HouseModel> {
    let mut model = HouseModel::zeros(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let beta = (config.init_gamma + 2.0) / (config.d * config.k) as f64;
    let uniform = Uniform::new_inclusive(-beta, beta)
        .map_err(|e| ModelError::InvalidConfig(format!("entity init range: {e}")))?;
    model.entities.as_mut_slice().iter_mut().for_each(|v| *v = uniform.sample(&mut rng));
    fill_gaussian_nondegenerate(model.rotations.as_mut_slice(), config.k, &mut rng);
    let tau_dist = Normal::new(0.0, TAU_INIT_STD).expect("positive std");
    fill_gaussian_nondegenerate(model.head_axes.as_mut_slice(), config.k, &mut rng);
    model.head_taus.as_mut_slice().iter_mut().for_each(|v| *v = tau_dist.sample(&mut rng));
    fill_gaussian_nondegenerate(model.tail_axes.as_mut_slice(), config.k, &mut rng);
    model.tail_taus.as_mut_slice().iter_mut().for_each(|v| *v = tau_dist.sample(&mut rng));
    Ok(model)
}

/// Fills `k`-sized chunks with standard Gaussians, redrawing degenerate ones.
pub fn fill_gaussian_nondegenerate<R: Rng + ?Sized>(data: &mut [f64], k: usize, rng: &mut R) {
    for chunk in data.chunks_exact_mut(k) {
        loop {
            chunk.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            if householder::norm(chunk) >= householder::DEGENERATE_NORM {
                break;
            }
        }
    }
}
