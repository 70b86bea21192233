//! Two-means tree: repeatedly split the largest cluster into two halves of
//! (almost) equal size until `k` clusters exist.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::index;
use rand::Rng;

use crate::config::validate_k;
use crate::error::{invalid, Result};
use crate::model::{join_cost, leave_gain, sq_dist, Dataset, Partition};

/// Boost passes allowed per bisection.
pub const BISECT_PASSES: usize = 10;

/// Splits `members` in two with a 2-cluster boost k-means run seeded by two
/// distinct members drawn uniformly at random. Both sides are non-empty.
pub fn bisect<R: Rng + ?Sized>(
    data: &Dataset,
    members: &[usize],
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut evals = 0;
    bisect_counted(data, members, rng, &mut evals)
}

pub(crate) fn bisect_counted<R: Rng + ?Sized>(
    data: &Dataset,
    members: &[usize],
    rng: &mut R,
    evals: &mut u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = members.len();
    if m < 2 {
        return Err(invalid(format!("cannot bisect {m} sample(s)")));
    }
    let d = data.d();
    let seeds = index::sample(rng, m, 2);
    let (sa, sb) = (seeds.index(0), seeds.index(1));
    let (ca, cb) = (data.row(members[sa]), data.row(members[sb]));

    // side[p]: false = left, true = right
    let mut side = vec![false; m];
    let mut sums = [vec![0.0f64; d], vec![0.0f64; d]];
    let mut sizes = [0usize; 2];
    for (p, &i) in members.iter().enumerate() {
        let x = data.row(i);
        let right = if p == sa {
            false
        } else if p == sb {
            true
        } else {
            *evals += 2;
            sq_dist(x, cb) < sq_dist(x, ca)
        };
        side[p] = right;
        let s = usize::from(right);
        sizes[s] += 1;
        for (acc, &v) in sums[s].iter_mut().zip(x) {
            *acc += f64::from(v);
        }
    }

    for _ in 0..BISECT_PASSES {
        let mut moved = 0;
        for (p, &i) in members.iter().enumerate() {
            let u = usize::from(side[p]);
            let v = 1 - u;
            if sizes[u] < 2 {
                continue;
            }
            let x = data.row(i);
            *evals += 2;
            let gain = leave_gain(x, &sums[u], sizes[u]) - join_cost(x, &sums[v], sizes[v]);
            if gain > 0.0 {
                let [left, right] = &mut sums;
                let (from, to) = if u == 0 { (left, right) } else { (right, left) };
                for ((f, t), &xv) in from.iter_mut().zip(to.iter_mut()).zip(x) {
                    let xv = f64::from(xv);
                    *f -= xv;
                    *t += xv;
                }
                sizes[u] -= 1;
                sizes[v] += 1;
                side[p] = v == 1;
                moved += 1;
            }
        }
        if moved == 0 {
            break;
        }
    }

    let mut left = Vec::with_capacity(sizes[0]);
    let mut right = Vec::with_capacity(sizes[1]);
    for (p, &i) in members.iter().enumerate() {
        if side[p] {
            right.push(i);
        } else {
            left.push(i);
        }
    }
    Ok((left, right))
}

fn centroid(data: &Dataset, members: &[usize]) -> Vec<f32> {
    let mut acc = vec![0.0f64; data.d()];
    for &i in members {
        for (a, &v) in acc.iter_mut().zip(data.row(i)) {
            *a += f64::from(v);
        }
    }
    let m = members.len() as f64;
    acc.into_iter().map(|a| (a / m) as f32).collect()
}

/// Migrates samples from the larger side to the smaller one until the sizes
/// differ by at most one. Samples with the smallest margin
/// `|x - c_small|^2 - |x - c_large|^2` move first; centroids are computed
/// once, before any migration.
pub fn balance_equal_size(
    data: &Dataset,
    left: Vec<usize>,
    right: Vec<usize>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut evals = 0;
    balance_counted(data, left, right, &mut evals)
}

pub(crate) fn balance_counted(
    data: &Dataset,
    left: Vec<usize>,
    right: Vec<usize>,
    evals: &mut u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if left.is_empty() || right.is_empty() {
        return Err(invalid("both sides must be non-empty"));
    }
    let swap = left.len() < right.len();
    let (mut large, mut small) = if swap { (right, left) } else { (left, right) };
    let shift = (large.len() - small.len()) / 2;
    if shift > 0 {
        let c_large = centroid(data, &large);
        let c_small = centroid(data, &small);
        *evals += 2 * large.len() as u64;
        let mut keyed: Vec<(f64, usize)> = large
            .iter()
            .map(|&i| {
                let x = data.row(i);
                (sq_dist(x, &c_small) - sq_dist(x, &c_large), i)
            })
            .collect();
        keyed.select_nth_unstable_by(shift - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        small.extend(keyed[..shift].iter().map(|&(_, i)| i));
        large = keyed[shift..].iter().map(|&(_, i)| i).collect();
    }
    Ok(if swap { (small, large) } else { (large, small) })
}

/// Partition with exactly `k` clusters built by repeatedly bisecting and
/// balancing the largest cluster (ties broken by lowest cluster id).
pub fn two_means_tree<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<Partition> {
    let mut evals = 0;
    two_means_tree_counted(data, k, rng, &mut evals)
}

pub(crate) fn two_means_tree_counted<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    rng: &mut R,
    evals: &mut u64,
) -> Result<Partition> {
    validate_k(k, data.n())?;
    let mut clusters: Vec<Vec<usize>> = Vec::with_capacity(k);
    clusters.push((0..data.n()).collect());
    let mut heap = BinaryHeap::with_capacity(k);
    heap.push((data.n(), Reverse(0usize)));
    while clusters.len() < k {
        let (_, Reverse(id)) = heap.pop().expect("heap holds every cluster");
        let members = std::mem::take(&mut clusters[id]);
        let (left, right) = bisect_counted(data, &members, rng, evals)?;
        let (left, right) = balance_counted(data, left, right, evals)?;
        heap.push((left.len(), Reverse(id)));
        heap.push((right.len(), Reverse(clusters.len())));
        clusters[id] = left;
        clusters.push(right);
    }
    Partition::from_clusters(data, &clusters)
}
