//! Reference algorithms and quality metrics: Lloyd's k-means, exact KNN
//! graphs, recall and neighbour co-membership.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::graph::{neighbor_order, KnnGraph};
use crate::graph_kmeans::Clustering;
use crate::model::{centroid_sq_dist, distortion, sq_dist, Dataset, Partition};
use crate::trace::{MetricsTrace, TraceRow};

/// Classic Lloyd iterations from `init`: assign every sample to its nearest
/// centroid (ties to the lowest id), then recompute centroids. An emptied
/// cluster receives the sample farthest from its centroid. Stops when the
/// assignment is stable or after `max_iter` iterations.
pub fn lloyd_kmeans(data: &Dataset, init: &Partition, max_iter: usize) -> Result<Clustering> {
    if init.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: init.n(),
        });
    }
    let start = Instant::now();
    let (n, k) = (data.n(), init.k());
    let mut part = init.clone();
    let mut trace = MetricsTrace::default();
    trace.push(TraceRow {
        iteration: 0,
        elapsed_seconds: 0.0,
        distortion: distortion(data, &part)?,
        recall_at_1: None,
        moves_accepted: 0,
        distance_evals: 0,
    });
    let mut total_moves = 0;
    for iter in 1..=max_iter {
        let mut assignment = Vec::with_capacity(n);
        let mut nearest = Vec::with_capacity(n);
        for x in data.rows() {
            let mut best = (f64::INFINITY, 0usize);
            for r in 0..k {
                if part.size(r) == 0 {
                    continue;
                }
                let dist = centroid_sq_dist(x, part.composite(r), part.size(r));
                if dist < best.0 {
                    best = (dist, r);
                }
            }
            assignment.push(best.1);
            nearest.push(best.0);
        }
        repair_empty(&mut assignment, &nearest, k);
        let moved = assignment
            .iter()
            .zip(part.assignment())
            .filter(|(a, b)| a != b)
            .count() as u64;
        part = Partition::from_assignment(data, k, assignment)?;
        total_moves += moved;
        trace.push(TraceRow {
            iteration: iter,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            distortion: distortion(data, &part)?,
            recall_at_1: None,
            moves_accepted: moved,
            distance_evals: (n * k) as u64,
        });
        if moved == 0 {
            break;
        }
    }
    Ok(Clustering {
        partition: part,
        trace,
        min_accepted_gain: None,
        total_moves,
    })
}

/// Fills each empty cluster with the sample farthest from its own centroid,
/// taken from a cluster that keeps at least one member.
fn repair_empty(assignment: &mut [usize], nearest: &[f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    if sizes.iter().all(|&s| s > 0) {
        return;
    }
    let mut order: Vec<usize> = (0..assignment.len()).collect();
    order.sort_by(|&a, &b| nearest[b].total_cmp(&nearest[a]).then(a.cmp(&b)));
    let mut donors = order.into_iter();
    for r in 0..k {
        if sizes[r] > 0 {
            continue;
        }
        for i in donors.by_ref() {
            let from = assignment[i];
            if sizes[from] > 1 {
                sizes[from] -= 1;
                assignment[i] = r;
                sizes[r] = 1;
                break;
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        neighbor_order((self.0, self.1), (other.0, other.1))
    }
}

/// Exact KNN graph: row `i` holds the `kappa` nearest other samples, ties
/// broken by ascending id. Rows are computed in parallel.
pub fn brute_force_knn(data: &Dataset, kappa: usize) -> Result<KnnGraph> {
    let n = data.n();
    if kappa < 1 || kappa + 1 > n {
        return Err(invalid(format!(
            "kappa = {kappa} needs 1 <= kappa <= n - 1"
        )));
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = data.row(i);
            let mut heap: BinaryHeap<Entry> = BinaryHeap::with_capacity(kappa + 1);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let e = Entry(sq_dist(xi, data.row(j)), j as u32);
                if heap.len() < kappa {
                    heap.push(e);
                } else if e < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(e);
                }
            }
            heap.into_sorted_vec()
                .into_iter()
                .map(|Entry(d, j)| (j, d))
                .collect()
        })
        .collect();
    KnnGraph::from_rows(n, kappa, rows)
}

/// How a row counts as a hit for recall@1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecallMode {
    /// The exact nearest neighbour appears anywhere in the approximate row.
    #[default]
    AnyRank,
    /// The approximate row's first entry is the exact nearest neighbour.
    TopOnly,
}

/// Fraction of evaluated rows whose exact nearest neighbour is found in the
/// approximate row. `sample_ids = None` evaluates every row.
pub fn recall_at_1(
    approx: &KnnGraph,
    exact: &KnnGraph,
    sample_ids: Option<&[usize]>,
    mode: RecallMode,
) -> Result<f64> {
    if approx.n() != exact.n() {
        return Err(Error::DimensionMismatch {
            expected: exact.n(),
            actual: approx.n(),
        });
    }
    let hit = |i: usize| {
        let truth = exact.ids(i)[0];
        match mode {
            RecallMode::AnyRank => approx.ids(i).contains(&truth),
            RecallMode::TopOnly => approx.ids(i)[0] == truth,
        }
    };
    let (hits, total) = match sample_ids {
        Some(ids) => {
            if let Some(&bad) = ids.iter().find(|&&i| i >= approx.n()) {
                return Err(invalid(format!("sample id {bad} out of range")));
            }
            (ids.iter().filter(|&&i| hit(i)).count(), ids.len())
        }
        None => ((0..approx.n()).filter(|&i| hit(i)).count(), approx.n()),
    };
    if total == 0 {
        return Err(invalid("no rows to evaluate"));
    }
    Ok(hits as f64 / total as f64)
}

/// `count` distinct sample ids drawn uniformly, in ascending order.
pub fn sample_ids<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut ids = index::sample(rng, n, count.min(n)).into_vec();
    ids.sort_unstable();
    ids
}

/// Fraction of samples whose `rank`-th exact neighbour (1-based) lies in the
/// same cluster.
pub fn co_membership_rate(part: &Partition, exact: &KnnGraph, rank: usize) -> Result<f64> {
    if rank < 1 || rank > exact.kappa() {
        return Err(invalid(format!(
            "rank {rank} outside 1..={}",
            exact.kappa()
        )));
    }
    if part.n() != exact.n() {
        return Err(Error::DimensionMismatch {
            expected: exact.n(),
            actual: part.n(),
        });
    }
    let same = (0..part.n())
        .filter(|&i| part.cluster_of(i) == part.cluster_of(exact.ids(i)[rank - 1] as usize))
        .count();
    Ok(same as f64 / part.n() as f64)
}

/// Co-membership rate for ranks `1..=exact.kappa()`.
pub fn co_membership_curve(part: &Partition, exact: &KnnGraph) -> Result<Vec<f64>> {
    (1..=exact.kappa())
        .map(|r| co_membership_rate(part, exact, r))
        .collect()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // average rank over a tie group, 1-based
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            out[idx] = avg;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let m = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / m, ry.iter().sum::<f64>() / m);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::objective_value;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(d, (0..n * d).map(|_| rng.random::<f32>()).collect()).unwrap()
    }

    #[test]
    fn brute_force_collinear() {
        let data = Dataset::from_rows(&[[0.0f32], [1.0], [3.0]]).unwrap();
        let g = brute_force_knn(&data, 1).unwrap();
        assert_eq!((g.ids(0)[0], g.ids(1)[0], g.ids(2)[0]), (1, 0, 1));
        assert_eq!(
            (g.dists(0)[0], g.dists(1)[0], g.dists(2)[0]),
            (1.0, 1.0, 4.0)
        );
        assert!(brute_force_knn(&data, 3).is_err());
    }

    #[test]
    fn brute_force_duplicates_and_scan() {
        let data =
            Dataset::from_rows(&[[1.0f32, 1.0], [1.0, 1.0], [5.0, 2.0], [5.0, 2.0]]).unwrap();
        let g = brute_force_knn(&data, 2).unwrap();
        for i in 0..4 {
            assert_eq!(g.dists(i)[0], 0.0);
        }
        // tie between ids 2 and 3 at equal distance from 0 resolves to 2
        assert_eq!(g.ids(0), &[1, 2]);

        let data = random_data(500, 3, 1);
        let g = brute_force_knn(&data, 10).unwrap();
        g.check(&data).unwrap();
        for i in 0..500 {
            let worst = g.dists(i)[9];
            for j in 0..500 {
                if j != i && !g.ids(i).contains(&(j as u32)) {
                    assert!(sq_dist(data.row(i), data.row(j)) >= worst);
                }
            }
        }
    }

    #[test]
    fn recall_examples() {
        let data = random_data(200, 2, 3);
        let exact = brute_force_knn(&data, 4).unwrap();
        assert_eq!(
            recall_at_1(&exact, &exact, None, RecallMode::AnyRank).unwrap(),
            1.0
        );
        assert_eq!(
            recall_at_1(&exact, &exact, None, RecallMode::TopOnly).unwrap(),
            1.0
        );

        let mut corrupted = exact.clone();
        let row: Vec<(u32, f64)> = exact
            .ids(7)
            .iter()
            .copied()
            .skip(1)
            .chain([exact.ids(7)[0]])
            .map(|j| (j, 0.0))
            .collect();
        // shift the row so the true neighbour falls to the last slot
        corrupted.set_row(7, &row).unwrap();
        let ids: Vec<usize> = (0..100).collect();
        assert_eq!(
            recall_at_1(&corrupted, &exact, Some(&ids), RecallMode::AnyRank).unwrap(),
            1.0
        );
        assert_eq!(
            recall_at_1(&corrupted, &exact, Some(&ids), RecallMode::TopOnly).unwrap(),
            0.99
        );

        let mut bad = exact.clone();
        let far: Vec<(u32, f64)> = (0..200u32)
            .filter(|&j| j != 7 && !exact.ids(7).contains(&j))
            .take(4)
            .map(|j| (j, 0.0))
            .collect();
        bad.set_row(7, &far).unwrap();
        assert_eq!(
            recall_at_1(&bad, &exact, Some(&ids), RecallMode::AnyRank).unwrap(),
            0.99
        );

        let other = brute_force_knn(&random_data(50, 2, 0), 4).unwrap();
        assert!(recall_at_1(&other, &exact, None, RecallMode::AnyRank).is_err());
    }

    #[test]
    fn co_membership_extremes() {
        let data = random_data(100, 2, 4);
        let exact = brute_force_knn(&data, 5).unwrap();
        let singletons = Partition::from_assignment(&data, 100, (0..100).collect()).unwrap();
        assert_eq!(co_membership_rate(&singletons, &exact, 1).unwrap(), 0.0);
        let one = Partition::single(&data);
        assert_eq!(co_membership_rate(&one, &exact, 5).unwrap(), 1.0);
        assert!(co_membership_rate(&one, &exact, 0).is_err());
        assert!(co_membership_rate(&one, &exact, 6).is_err());
        assert_eq!(co_membership_curve(&one, &exact).unwrap(), vec![1.0; 5]);
    }

    /// Per-blob mean squared deviation averaged over all samples, from scratch.
    fn blob_distortion(data: &Dataset, labels: &[usize], k: usize) -> f64 {
        let d = data.d();
        let mut total = 0.0;
        for r in 0..k {
            let members: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == r).collect();
            let mean: Vec<f64> = (0..d)
                .map(|j| {
                    members
                        .iter()
                        .map(|&i| f64::from(data.row(i)[j]))
                        .sum::<f64>()
                        / members.len() as f64
                })
                .collect();
            for &i in &members {
                total += data
                    .row(i)
                    .iter()
                    .zip(&mean)
                    .map(|(&a, b)| (f64::from(a) - b).powi(2))
                    .sum::<f64>();
            }
        }
        total / data.n() as f64
    }

    fn blobs() -> (Dataset, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let centers = [[0.0f32, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let c = centers[i % 4];
            rows.push([
                c[0] + rng.random_range(-1.0..1.0),
                c[1] + rng.random_range(-1.0..1.0),
            ]);
            labels.push(i % 4);
        }
        (Dataset::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn lloyd_recovers_blobs() {
        let (data, labels) = blobs();
        // a deliberately imperfect start: a few samples mislabelled
        let mut init = labels.clone();
        for c in init.iter_mut().take(10) {
            *c = (*c + 1) % 4;
        }
        let init = Partition::from_assignment(&data, 4, init).unwrap();
        let out = lloyd_kmeans(&data, &init, 50).unwrap();
        assert_eq!(out.partition.assignment(), &labels[..]);
        let expected = blob_distortion(&data, &labels, 4);
        let got = distortion(&data, &out.partition).unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected);
        out.trace.validate(true).unwrap();
    }

    #[test]
    fn lloyd_fixed_point_is_unchanged() {
        let (data, labels) = blobs();
        let init = Partition::from_assignment(&data, 4, labels).unwrap();
        let out = lloyd_kmeans(&data, &init, 10).unwrap();
        assert_eq!(out.passes(), 1);
        assert_eq!(out.total_moves, 0);
        assert_eq!(out.partition.assignment(), init.assignment());
    }

    #[test]
    fn lloyd_repairs_empty_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows: Vec<[f32; 2]> = (0..60).map(|_| [rng.random(), rng.random()]).collect();
        // clusters 1 and 2 start on identical samples, so cluster 2 loses
        // every tie and empties after the first assignment
        rows[2] = rows[1];
        let data = Dataset::from_rows(&rows).unwrap();
        let mut a = vec![0usize; 60];
        a[1] = 1;
        a[2] = 2;
        let init = Partition::from_assignment(&data, 3, a).unwrap();
        let out = lloyd_kmeans(&data, &init, 20).unwrap();
        assert_eq!(out.partition.non_empty_clusters(), 3);
        out.trace.validate(true).unwrap();
        let total = data.total_sq_norm();
        let e = distortion(&data, &out.partition).unwrap();
        let i = objective_value(&out.partition).unwrap();
        assert!((60.0 * e + i - total).abs() <= 1e-9 * total);
    }

    #[test]
    fn repair_takes_farthest_sample() {
        let mut assignment = vec![0, 0, 0, 1];
        let nearest = [0.5, 3.0, 1.0, 0.0];
        repair_empty(&mut assignment, &nearest, 3);
        assert_eq!(assignment, vec![0, 2, 0, 1]);
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 1.0]), None);
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[0.9, 0.9, 0.5, 0.1]).unwrap();
        assert!(rho < -0.9);
    }

    #[test]
    fn sampled_ids_are_distinct() {
        let ids = sample_ids(1000, 100, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(ids.len(), 100);
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}
