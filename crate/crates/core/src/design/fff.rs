//! Clustering-based designs: partition the candidates into `P` Ward clusters
//! and emit one summary point per cluster.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{maxpro_pair_term, CandidateSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FffSummary {
    /// Coordinate mean of each cluster. May lie outside a non-convex region.
    Centroid,
    /// The member point with the smallest MaxPro increment against the
    /// representatives already emitted.
    MedoidMaxpro,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FffDesign {
    pub summary: FffSummary,
    /// One row per cluster.
    pub points: Array2<f64>,
    /// Candidate index of each row for member summaries, `None` for centroids.
    pub indices: Option<Vec<usize>>,
    /// Cluster label of every candidate, `0..P`.
    pub labels: Vec<usize>,
    /// Members of each cluster in ascending order; clusters are ordered by
    /// their smallest member.
    pub clusters: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
struct Merge {
    height: f64,
    a: usize,
    b: usize,
}

/// Ward merge cost `|A||B| / (|A| + |B|) · ‖c_A - c_B‖²`.
fn ward_cost(ca: &[f64], na: f64, cb: &[f64], nb: f64) -> f64 {
    let sq: f64 = ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum();
    na * nb / (na + nb) * sq
}

/// Full Ward dendrogram by the nearest-neighbour chain algorithm. Memory is
/// `O(N·D)`; each merge records one member of either side.
fn ward_merges(points: &Array2<f64>) -> Vec<Merge> {
    let n = points.nrows();
    let d = points.ncols();
    let mut centroid: Vec<f64> = points.iter().copied().collect();
    let mut size = vec![1.0f64; n];
    // Smallest original member of each live cluster slot.
    let mut rep: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut slot_pos: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();

    let row = |i: usize| i * d..(i + 1) * d;

    while active.len() > 1 {
        if chain.is_empty() {
            chain.push(active[0]);
        }
        let top = *chain.last().unwrap();
        let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
        let ct = &centroid[row(top)];
        let nt = size[top];
        let (best_cost, best) = active
            .par_iter()
            .filter(|&&j| j != top)
            .map(|&j| (ward_cost(ct, nt, &centroid[row(j)], size[j]), j))
            .reduce(
                || (f64::INFINITY, usize::MAX),
                |x, y| {
                    if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                        y
                    } else {
                        x
                    }
                },
            );
        let next = match prev {
            Some(p) if ward_cost(ct, nt, &centroid[row(p)], size[p]) <= best_cost => p,
            _ => best,
        };
        if Some(next) != prev {
            chain.push(next);
            continue;
        }
        // Reciprocal nearest neighbours: merge `top` into `next`.
        chain.pop();
        chain.pop();
        let cost = ward_cost(ct, nt, &centroid[row(next)], size[next]);
        merges.push(Merge {
            height: (2.0 * cost).sqrt(),
            a: rep[top],
            b: rep[next],
        });
        let (nt, nn) = (size[top], size[next]);
        for k in 0..d {
            let merged = (nt * centroid[top * d + k] + nn * centroid[next * d + k]) / (nt + nn);
            centroid[next * d + k] = merged;
        }
        size[next] = nt + nn;
        rep[next] = rep[next].min(rep[top]);
        let pos = slot_pos[top];
        active.swap_remove(pos);
        if pos < active.len() {
            slot_pos[active[pos]] = pos;
        }
    }
    merges
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Partition into `p` Ward clusters by replaying the `N - p` lowest merges.
pub(crate) fn ward_clusters(points: &Array2<f64>, p: usize) -> Vec<Vec<usize>> {
    let n = points.nrows();
    let mut merges = ward_merges(points);
    // Stable: equal heights keep chain order, so children precede parents.
    merges.sort_by(|x, y| x.height.total_cmp(&y.height));
    let mut parent: Vec<usize> = (0..n).collect();
    for m in merges.iter().take(n - p) {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi] = lo;
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        by_root[r].push(i);
    }
    // Roots are the smallest members, so this is already ordered.
    by_root.into_iter().filter(|c| !c.is_empty()).collect()
}

/// Clustering design with `p` points.
pub fn fff_design(cands: &CandidateSet, p: usize, summary: FffSummary) -> Result<FffDesign> {
    if cands.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if p == 0 || p > cands.len() {
        return Err(Error::DesignTooLarge {
            requested: p,
            available: cands.len(),
        });
    }
    let d = cands.dim();
    let clusters = ward_clusters(cands.points(), p);
    let mut labels = vec![0; cands.len()];
    for (l, members) in clusters.iter().enumerate() {
        for &i in members {
            labels[i] = l;
        }
    }
    let centroids: Vec<Vec<f64>> = clusters
        .iter()
        .map(|members| {
            let mut m = vec![0.0; d];
            for &i in members {
                for (acc, x) in m.iter_mut().zip(cands.point(i)) {
                    *acc += x;
                }
            }
            m.iter_mut().for_each(|v| *v /= members.len() as f64);
            m
        })
        .collect();

    let (rows, indices) = match summary {
        FffSummary::Centroid => (centroids, None),
        FffSummary::MedoidMaxpro => {
            let mut chosen: Vec<usize> = Vec::with_capacity(p);
            for (members, centre) in clusters.iter().zip(&centroids) {
                let score = |i: usize| -> f64 {
                    if chosen.is_empty() {
                        cands
                            .point(i)
                            .iter()
                            .zip(centre)
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum()
                    } else {
                        chosen
                            .iter()
                            .map(|&j| maxpro_pair_term(cands.point(i), cands.point(j)).0)
                            .sum()
                    }
                };
                let mut best = members[0];
                let mut best_score = score(best);
                for &i in &members[1..] {
                    let s = score(i);
                    if s < best_score {
                        best = i;
                        best_score = s;
                    }
                }
                chosen.push(best);
            }
            let rows = chosen.iter().map(|&i| cands.point(i).to_vec()).collect();
            (rows, Some(chosen))
        }
    };
    let points =
        Array2::from_shape_vec((p, d), rows.into_iter().flatten().collect()).expect("shape");
    Ok(FffDesign {
        summary,
        points,
        indices,
        labels,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive Ward: repeatedly merge the pair with the lowest cost.
    fn naive_ward(points: &Array2<f64>, p: usize) -> Vec<Vec<usize>> {
        let d = points.ncols();
        let mut clusters: Vec<Vec<usize>> = (0..points.nrows()).map(|i| vec![i]).collect();
        let mean = |c: &[usize]| -> Vec<f64> {
            (0..d)
                .map(|k| c.iter().map(|&i| points[[i, k]]).sum::<f64>() / c.len() as f64)
                .collect()
        };
        while clusters.len() > p {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let cost = ward_cost(
                        &mean(&clusters[a]),
                        clusters[a].len() as f64,
                        &mean(&clusters[b]),
                        clusters[b].len() as f64,
                    );
                    if cost < best.0 {
                        best = (cost, a, b);
                    }
                }
            }
            let moved = clusters.remove(best.2);
            clusters[best.1].extend(moved);
        }
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort();
        clusters
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
    }

    #[test]
    fn two_blobs_recover_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut flat = Vec::new();
        for centre in [(0.0, 0.0), (10.0, 5.0)] {
            for _ in 0..200 {
                flat.push(centre.0 + rng.random::<f64>() - 0.5);
                flat.push(centre.1 + rng.random::<f64>() - 0.5);
            }
        }
        let pts = Array2::from_shape_vec((400, 2), flat).unwrap();
        let c = CandidateSet::new(pts.clone()).unwrap();
        let f = fff_design(&c, 2, FffSummary::Centroid).unwrap();
        assert_eq!(f.clusters[0], (0..200).collect::<Vec<_>>());
        for (k, rows) in [(0usize, 0..200), (1, 200..400)] {
            for dim in 0..2 {
                let mean = rows.clone().map(|i| pts[[i, dim]]).sum::<f64>() / 200.0;
                assert!((f.points[[k, dim]] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn p_equals_n_returns_the_points() {
        let pts = random_points(25, 2, 8);
        let c = CandidateSet::new(pts.clone()).unwrap();
        for s in [FffSummary::Centroid, FffSummary::MedoidMaxpro] {
            let f = fff_design(&c, 25, s).unwrap();
            assert_eq!(f.points, pts);
        }
    }

    #[test]
    fn two_squares_pathology() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut flat = Vec::new();
        for x0 in [0.0, 2.0] {
            for _ in 0..300 {
                flat.push(x0 + rng.random::<f64>());
                flat.push(rng.random::<f64>());
            }
        }
        let c = CandidateSet::new(Array2::from_shape_vec((600, 2), flat).unwrap()).unwrap();
        let cen = fff_design(&c, 1, FffSummary::Centroid).unwrap();
        let x = cen.points[[0, 0]];
        assert!(x > 1.0 && x < 2.0, "centroid x = {x} lies in the gap");
        let med = fff_design(&c, 1, FffSummary::MedoidMaxpro).unwrap();
        let i = med.indices.unwrap()[0];
        assert_eq!(med.points.row(0).to_vec(), c.point(i).to_vec());
    }

    #[test]
    fn too_large() {
        let c = CandidateSet::new(random_points(5, 2, 1)).unwrap();
        assert!(fff_design(&c, 6, FffSummary::Centroid).is_err());
        assert!(fff_design(&c, 0, FffSummary::Centroid).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn nn_chain_matches_naive_ward(seed in 0u64..100_000, n in 2usize..40, frac in 0.0f64..1.0) {
            let pts = random_points(n, 2, seed);
            let p = 1 + ((n - 1) as f64 * frac) as usize;
            prop_assert_eq!(ward_clusters(&pts, p), naive_ward(&pts, p));
        }

        #[test]
        fn medoids_are_members_of_their_cluster(seed in 0u64..100_000, p in 1usize..10) {
            let c = CandidateSet::new(random_points(60, 3, seed)).unwrap();
            let f = fff_design(&c, p, FffSummary::MedoidMaxpro).unwrap();
            let idx = f.indices.unwrap();
            for (k, &i) in idx.iter().enumerate() {
                prop_assert_eq!(f.labels[i], k);
            }
        }
    }
}
