//! Filtered link-prediction ranking and metric reports.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::data::{FilterIndex, RmpClass, RmpClasses, Triple};
use crate::model::{HouseModel, ModelError, Side};

/// Rank of the true entity for one query. `side` is the slot being predicted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankResult {
    pub triple: Triple,
    pub side: Side,
    pub rank: f64,
}

/// Tie-averaged filtered rank of the target among `distances`.
///
/// `distances[c]` is the distance with candidate `c` in the predicted slot;
/// candidates in `known` (other than the target) are skipped.
pub fn rank_from_distances(distances: &[f64], target: usize, known: impl Fn(usize) -> bool) -> f64 {
    let dt = distances[target];
    let mut less = 0usize;
    let mut equal = 0usize;
    let mut others = 0usize;
    for (c, &d) in distances.iter().enumerate() {
        if c == target || known(c) {
            continue;
        }
        others += 1;
        if d < dt {
            less += 1;
        } else if d == dt {
            equal += 1;
        }
    }
    if dt.is_nan() {
        // a target that cannot be scored ranks last
        return 1.0 + others as f64;
    }
    1.0 + less as f64 + 0.5 * equal as f64
}

pub fn filtered_rank(
    model: &HouseModel,
    triple: Triple,
    side: Side,
    filter: &FilterIndex,
) -> Result<RankResult, ModelError> {
    model.check_entity(triple.head)?;
    model.check_entity(triple.tail)?;
    let (fixed, target) = match side {
        Side::Tail => (triple.head, triple.tail),
        Side::Head => (triple.tail, triple.head),
    };
    let distances = model.score_candidates(fixed, triple.relation, side)?;
    let known = match side {
        Side::Tail => filter.tails(triple.head, triple.relation),
        Side::Head => filter.heads(triple.relation, triple.tail),
    };
    let rank = rank_from_distances(&distances, target, |c| known.is_some_and(|s| s.contains(&c)));
    Ok(RankResult { triple, side, rank })
}

/// Ranks both directions of every triple, tail query first. Output order is
/// fixed regardless of scheduling.
pub fn rank_all(model: &HouseModel, triples: &[Triple], filter: &FilterIndex) -> Result<Vec<RankResult>, ModelError> {
    let queries: Vec<(Triple, Side)> = triples.iter().flat_map(|&t| [(t, Side::Tail), (t, Side::Head)]).collect();
    queries.into_par_iter().map(|(t, s)| filtered_rank(model, t, s, filter)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub count: usize,
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl MetricsReport {
    pub fn from_ranks(ranks: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = MetricsAccumulator::default();
        ranks.into_iter().for_each(|r| acc.push(r));
        acc.report()
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MR {:.2}  MRR {:.4}  H@1 {:.4}  H@3 {:.4}  H@10 {:.4}  ({} queries)",
            self.mr, self.mrr, self.hits1, self.hits3, self.hits10, self.count
        )
    }
}

/// Running sums behind a [`MetricsReport`]; merging is exact.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsAccumulator {
    count: usize,
    rank_sum: f64,
    rr_sum: f64,
    hits: [usize; 3],
}

impl MetricsAccumulator {
    pub fn push(&mut self, rank: f64) {
        self.count += 1;
        self.rank_sum += rank;
        self.rr_sum += 1.0 / rank;
        for (h, k) in self.hits.iter_mut().zip([1.0, 3.0, 10.0]) {
            if rank <= k {
                *h += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.count += other.count;
        self.rank_sum += other.rank_sum;
        self.rr_sum += other.rr_sum;
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
    }

    pub fn report(&self) -> MetricsReport {
        if self.count == 0 {
            return MetricsReport::default();
        }
        let n = self.count as f64;
        MetricsReport {
            count: self.count,
            mr: self.rank_sum / n,
            mrr: self.rr_sum / n,
            hits1: self.hits[0] as f64 / n,
            hits3: self.hits[1] as f64 / n,
            hits10: self.hits[2] as f64 / n,
        }
    }
}

/// Metrics over both directions of every triple in `triples`.
pub fn evaluate(model: &HouseModel, triples: &[Triple], filter: &FilterIndex) -> Result<MetricsReport, ModelError> {
    Ok(MetricsReport::from_ranks(rank_all(model, triples, filter)?.iter().map(|r| r.rank)))
}

pub fn per_relation_from_ranks(ranks: &[RankResult]) -> BTreeMap<usize, MetricsReport> {
    let mut groups: BTreeMap<usize, MetricsAccumulator> = BTreeMap::new();
    for r in ranks {
        groups.entry(r.triple.relation).or_default().push(r.rank);
    }
    groups.into_iter().map(|(k, a)| (k, a.report())).collect()
}

/// Metrics per relation; relations absent from `triples` are omitted.
pub fn per_relation_report(
    model: &HouseModel,
    triples: &[Triple],
    filter: &FilterIndex,
) -> Result<BTreeMap<usize, MetricsReport>, ModelError> {
    Ok(per_relation_from_ranks(&rank_all(model, triples, filter)?))
}

/// Ordering key for relation-mapping-property cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RmpCell {
    pub side: Side,
    pub class: RmpClass,
}

fn side_label(side: Side) -> &'static str {
    match side {
        Side::Head => "predicting head",
        Side::Tail => "predicting tail",
    }
}

pub fn rmp_from_ranks(ranks: &[RankResult], classes: &RmpClasses) -> BTreeMap<RmpCell, MetricsReport> {
    let mut groups: BTreeMap<RmpCell, MetricsAccumulator> = BTreeMap::new();
    for r in ranks {
        let class = classes.class(r.triple.relation);
        if class == RmpClass::Undefined {
            continue;
        }
        groups.entry(RmpCell { side: r.side, class }).or_default().push(r.rank);
    }
    groups.into_iter().map(|(k, a)| (k, a.report())).collect()
}

/// Metrics grouped by predicted side and mapping class. Relations without
/// training triples are left out.
pub fn rmp_report(
    model: &HouseModel,
    triples: &[Triple],
    filter: &FilterIndex,
    classes: &RmpClasses,
) -> Result<BTreeMap<RmpCell, MetricsReport>, ModelError> {
    Ok(rmp_from_ranks(&rank_all(model, triples, filter)?, classes))
}

pub const METRICS_HEADER: &str = "MR\tMRR\tH@1\tH@3\tH@10\tqueries";

fn metrics_fields(m: &MetricsReport) -> String {
    format!("{:.4}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}", m.mr, m.mrr, m.hits1, m.hits3, m.hits10, m.count)
}

/// Tab-separated table with one labelled row per report.
pub fn write_metrics_tsv<'a, W: Write>(
    out: &mut W,
    label: &str,
    rows: impl IntoIterator<Item = (String, &'a MetricsReport)>,
) -> io::Result<()> {
    writeln!(out, "{label}\t{METRICS_HEADER}")?;
    for (name, m) in rows {
        writeln!(out, "{name}\t{}", metrics_fields(m))?;
    }
    Ok(())
}

pub fn write_rmp_tsv<W: Write>(out: &mut W, cells: &BTreeMap<RmpCell, MetricsReport>) -> io::Result<()> {
    writeln!(out, "side\tclass\t{METRICS_HEADER}")?;
    for (cell, m) in cells {
        writeln!(out, "{}\t{}\t{}", side_label(cell.side), cell.class.name(), metrics_fields(m))?;
    }
    Ok(())
}
