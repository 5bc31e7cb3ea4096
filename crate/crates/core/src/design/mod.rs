//! Space-filling designs selected from a candidate sample.
//!
//! Greedy conditional designs add one candidate at a time, each time
//! optimising a criterion conditional on the points already chosen:
//!
//! * `Cmm`: conditional maximin, maximising the distance to the nearest
//!   design point. Only the newest design point's distances are computed per
//!   step; `psi_cache` holds the running minimum.
//! * `Ard`: average reciprocal distance over every coordinate projection.
//! * `MaxPro`: reciprocal product of squared 1-D distances.
//!
//! ARD and MaxPro keep a per-candidate running sum of pair terms, so each step
//! costs one pass over the candidates against the newest design point.

mod fff;

use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::NeighborGraph;

pub use fff::{fff_design, FffDesign, FffSummary};

/// Substitute for undefined reciprocal terms (coincident projections).
pub const ZERO_DISTANCE_PENALTY: f64 = 1e12;
/// ARD projection enumeration is exponential in the dimension.
pub const MAX_ARD_DIM: usize = 10;
/// Rows closer than this are treated as duplicates.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum DistanceMetric {
    /// `(Σ_d ω_d (a_d - b_d)²)^{1/2}`.
    WeightedEuclidean(Vec<f64>),
    /// Shortest-path length on a neighbour graph whose nodes are the candidates.
    Geodesic(Arc<NeighborGraph>),
}

/// `(Σ_d ω_d (a_d - b_d)²)^{1/2}`.
pub fn weighted_distance(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| {
            let d = x - y;
            w * d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimum pairwise weighted-Euclidean distance of a point set.
pub fn mindist(points: &Array2<f64>, weights: &[f64]) -> Result<f64> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let rows: Vec<_> = points.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            best = best.min(weighted_distance(&rows[i], &rows[j], weights));
        }
    }
    Ok(best)
}

/// The finite sample designs are drawn from. Near-duplicate rows are removed
/// on construction; `source_row` maps back to the input row.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    points: Array2<f64>,
    source_rows: Vec<usize>,
    metric: DistanceMetric,
}

impl CandidateSet {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::EmptyCandidates);
        }
        let keep = dedup_rows(&points);
        let d = points.ncols();
        let mut flat = Vec::with_capacity(keep.len() * d);
        for &i in &keep {
            flat.extend(points.row(i).iter().copied());
        }
        let deduped = Array2::from_shape_vec((keep.len(), d), flat).expect("shape");
        Ok(CandidateSet {
            points: deduped,
            source_rows: keep,
            metric: DistanceMetric::WeightedEuclidean(vec![1.0; d]),
        })
    }

    pub fn with_metric(mut self, metric: DistanceMetric) -> Result<Self> {
        match &metric {
            DistanceMetric::WeightedEuclidean(w) => {
                if w.len() != self.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim(),
                        got: w.len(),
                    });
                }
                if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || w.iter().all(|v| *v == 0.0) {
                    return Err(Error::InvalidParameter(
                        "distance weights must be finite, >= 0, with at least one > 0".into(),
                    ));
                }
            }
            DistanceMetric::Geodesic(g) => {
                if g.len() != self.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.len(),
                        got: g.len(),
                    });
                }
            }
        }
        self.metric = metric;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    /// Input row that candidate `i` came from.
    pub fn source_row(&self, i: usize) -> usize {
        self.source_rows[i]
    }

    /// Candidate built from input `row`, or `None` if that row was dropped
    /// as a duplicate.
    pub fn candidate_for_row(&self, row: usize) -> Option<usize> {
        self.source_rows.binary_search(&row).ok()
    }

    pub fn metric(&self) -> &DistanceMetric {
        &self.metric
    }

    /// Distances from candidate `source` to every candidate under the metric.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        match &self.metric {
            DistanceMetric::WeightedEuclidean(w) => {
                let s = self.point(source);
                (0..self.len())
                    .into_par_iter()
                    .map(|i| weighted_distance(self.point(i), s, w))
                    .collect()
            }
            DistanceMetric::Geodesic(g) => g.shortest_paths(source),
        }
    }

    /// Minimum pairwise distance among the given candidates under the metric.
    pub fn mindist(&self, indices: &[usize]) -> Result<f64> {
        if indices.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: indices.len(),
            });
        }
        let mut best = f64::INFINITY;
        for (a, &i) in indices.iter().enumerate() {
            let d = self.distances_from(i);
            for &j in &indices[a + 1..] {
                best = best.min(d[j]);
            }
        }
        Ok(best)
    }
}

/// Indices of rows to keep: the first of every group within `DEDUP_TOL`.
fn dedup_rows(points: &Array2<f64>) -> Vec<usize> {
    let n = points.nrows();
    let rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rows[a][0].total_cmp(&rows[b][0]).then(a.cmp(&b)));
    let mut dropped = vec![false; n];
    for (pos, &i) in order.iter().enumerate() {
        if dropped[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if rows[j][0] - rows[i][0] > DEDUP_TOL {
                break;
            }
            if !dropped[j] && euclidean(&rows[i], &rows[j]) <= DEDUP_TOL {
                // Keep the lower original index.
                if j > i {
                    dropped[j] = true;
                } else {
                    dropped[i] = true;
                    break;
                }
            }
        }
    }
    (0..n).filter(|&i| !dropped[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Criterion {
    Cmm,
    Ard { k: u32 },
    MaxPro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub p: usize,
    pub selected_index: usize,
    /// `None` for the first point, which is drawn rather than optimised.
    pub criterion_value: Option<f64>,
}

/// An ordered greedy design over a candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub criterion: Criterion,
    pub indices: Vec<usize>,
    /// Per candidate: the running minimum distance to the design (cMm), or
    /// the running sum of pair terms against the design (ARD, MaxPro).
    pub psi_cache: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    /// Number of pair terms replaced by `ZERO_DISTANCE_PENALTY`.
    pub penalty_hits: usize,
}

impl Design {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_size(cands: &CandidateSet, p: usize) -> Result<()> {
    if cands.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if p == 0 || p > cands.len() {
        return Err(Error::DesignTooLarge {
            requested: p,
            available: cands.len(),
        });
    }
    Ok(())
}

fn first_index(cands: &CandidateSet, seed: u64, first: Option<usize>) -> Result<usize> {
    match first {
        Some(i) if i >= cands.len() => Err(Error::IndexOutOfRange {
            index: i,
            len: cands.len(),
        }),
        Some(i) => Ok(i),
        None => Ok(ChaCha8Rng::seed_from_u64(seed).random_range(0..cands.len())),
    }
}

/// Conditional maximin design: each new point maximises its distance to the
/// nearest point already in the design.
pub fn cmm_design(
    cands: &CandidateSet,
    p: usize,
    seed: u64,
    first: Option<usize>,
) -> Result<Design> {
    check_size(cands, p)?;
    let start = first_index(cands, seed, first)?;
    let n = cands.len();
    let mut selected = vec![false; n];
    let mut psi = cands.distances_from(start);
    selected[start] = true;
    let mut indices = vec![start];
    let mut trace = vec![TraceEntry {
        p: 1,
        selected_index: start,
        criterion_value: None,
    }];

    for step in 2..=p {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !selected[i] && best.is_none_or(|b| psi[i] > psi[b]) {
                best = Some(i);
            }
        }
        let best = best.expect("p <= n leaves a candidate");
        trace.push(TraceEntry {
            p: step,
            selected_index: best,
            criterion_value: Some(psi[best]),
        });
        selected[best] = true;
        indices.push(best);
        let fresh = cands.distances_from(best);
        psi.par_iter_mut()
            .zip(fresh.par_iter())
            .for_each(|(s, f)| *s = s.min(*f));
    }

    Ok(Design {
        criterion: Criterion::Cmm,
        indices,
        psi_cache: psi,
        trace,
        penalty_hits: 0,
    })
}

/// `Σ_r q_r^{k/2} / δ_r^k` over every non-empty coordinate subset `r`
/// (with `q_r = |r|`), and the number of zero-distance penalties applied.
pub fn ard_pair_term(a: &[f64], b: &[f64], k: u32) -> (f64, usize) {
    let d = a.len();
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    let subsets = 1usize << d;
    let mut sum_sq = vec![0.0; subsets];
    let mut total = 0.0;
    let mut hits = 0;
    for mask in 1..subsets {
        let low = mask.trailing_zeros() as usize;
        sum_sq[mask] = sum_sq[mask & (mask - 1)] + sq[low];
        let q = mask.count_ones() as f64;
        let dist = sum_sq[mask].sqrt();
        if dist == 0.0 {
            total += ZERO_DISTANCE_PENALTY;
            hits += 1;
        } else {
            total += q.powf(k as f64 / 2.0) / dist.powi(k as i32);
        }
    }
    (total, hits)
}

/// `1 / Π_d (a_d - b_d)²`, or the penalty on any 1-D coincidence.
pub fn maxpro_pair_term(a: &[f64], b: &[f64]) -> (f64, usize) {
    let prod: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).product();
    if prod == 0.0 {
        (ZERO_DISTANCE_PENALTY, 1)
    } else {
        (1.0 / prod, 0)
    }
}

/// Number of non-empty coordinate subsets, `Σ_q C(D, q) = 2^D - 1`.
pub fn projection_count(dim: usize) -> f64 {
    ((1u64 << dim) - 1) as f64
}

fn check_increment_args(cands: &CandidateSet, design: &[usize], candidate: usize) -> Result<()> {
    if design.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    for &i in design.iter().chain(std::iter::once(&candidate)) {
        if i >= cands.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: cands.len(),
            });
        }
    }
    if design.contains(&candidate) {
        return Err(Error::InvalidParameter(format!(
            "candidate {candidate} is already in the design"
        )));
    }
    Ok(())
}

fn check_ard_dim(d: usize) -> Result<()> {
    if d > MAX_ARD_DIM {
        return Err(Error::TooManyDimensions {
            max: MAX_ARD_DIM,
            got: d,
        });
    }
    Ok(())
}

/// The quantity a conditional ARD step minimises for `candidate`:
/// `(1 / Σ_q C(D,q)) Σ_q Σ_r Σ_j q^{k/2} / δ_{qr}^k(x*, x_j)`.
pub fn ard_increment(
    cands: &CandidateSet,
    design: &[usize],
    candidate: usize,
    k: u32,
) -> Result<f64> {
    check_increment_args(cands, design, candidate)?;
    check_ard_dim(cands.dim())?;
    let x = cands.point(candidate);
    let sum: f64 = design
        .iter()
        .map(|&j| ard_pair_term(x, cands.point(j), k).0)
        .sum();
    Ok(sum / projection_count(cands.dim()))
}

/// `{(1/m) Σ_j 1 / Π_d δ²(x*_d, x_jd)}^{1/D}` for a design of `m` points.
pub fn maxpro_increment(cands: &CandidateSet, design: &[usize], candidate: usize) -> Result<f64> {
    check_increment_args(cands, design, candidate)?;
    let x = cands.point(candidate);
    let sum: f64 = design
        .iter()
        .map(|&j| maxpro_pair_term(x, cands.point(j)).0)
        .sum();
    Ok((sum / design.len() as f64).powf(1.0 / cands.dim() as f64))
}

/// Greedy conditional design under any supported criterion. Ties go to the
/// lowest candidate index.
pub fn greedy_design(
    cands: &CandidateSet,
    p: usize,
    criterion: Criterion,
    seed: u64,
    first: Option<usize>,
) -> Result<Design> {
    match criterion {
        Criterion::Cmm => cmm_design(cands, p, seed, first),
        Criterion::Ard { k } => {
            if k == 0 {
                return Err(Error::InvalidParameter("ARD order k must be >= 1".into()));
            }
            check_ard_dim(cands.dim())?;
            let norm = projection_count(cands.dim());
            sum_greedy(
                cands,
                p,
                criterion,
                seed,
                first,
                |a, b| ard_pair_term(a, b, k),
                |s, _| s / norm,
            )
        }
        Criterion::MaxPro => {
            let inv_d = 1.0 / cands.dim() as f64;
            sum_greedy(
                cands,
                p,
                criterion,
                seed,
                first,
                maxpro_pair_term,
                |s, m| (s / m as f64).powf(inv_d),
            )
        }
    }
}

/// Greedy minimisation of a criterion that is a sum of pair terms against the
/// design. `finish(sum, m)` maps a running sum over `m` design points to the
/// reported increment; it must be increasing in `sum`.
fn sum_greedy<T, F>(
    cands: &CandidateSet,
    p: usize,
    criterion: Criterion,
    seed: u64,
    first: Option<usize>,
    term: T,
    finish: F,
) -> Result<Design>
where
    T: Fn(&[f64], &[f64]) -> (f64, usize) + Sync,
    F: Fn(f64, usize) -> f64,
{
    check_size(cands, p)?;
    let start = first_index(cands, seed, first)?;
    let n = cands.len();
    let mut selected = vec![false; n];
    let mut sums = vec![0.0; n];
    let mut penalty_hits = 0;
    let mut indices = Vec::with_capacity(p);
    let mut trace = Vec::with_capacity(p);

    let mut newest = start;
    trace.push(TraceEntry {
        p: 1,
        selected_index: start,
        criterion_value: None,
    });
    loop {
        selected[newest] = true;
        indices.push(newest);
        let anchor = cands.point(newest);
        let hits: usize = sums
            .par_iter_mut()
            .enumerate()
            .map(|(i, s)| {
                if selected[i] {
                    return 0;
                }
                let (t, h) = term(cands.point(i), anchor);
                *s += t;
                h
            })
            .sum();
        penalty_hits += hits;
        if indices.len() == p {
            break;
        }
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !selected[i] && best.is_none_or(|b| sums[i] < sums[b]) {
                best = Some(i);
            }
        }
        let best = best.expect("p <= n leaves a candidate");
        trace.push(TraceEntry {
            p: indices.len() + 1,
            selected_index: best,
            criterion_value: Some(finish(sums[best], indices.len())),
        });
        newest = best;
    }

    Ok(Design {
        criterion,
        indices,
        psi_cache: sums,
        trace,
        penalty_hits,
    })
}
