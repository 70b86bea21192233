//! Sample matrix, cluster sufficient statistics and the closed-form
//! objective/gain arithmetic of boost k-means.
//!
//! A cluster `S_r` is summarised by its composite vector `D_r` (the sum of
//! its members) and its size `n_r`. The objective maximised by boost k-means
//! is `I = sum_r D_r.D_r / n_r`, which relates to the mean distortion `E` by
//! the conservation identity `n E + I = sum_i |x_i|^2`.

use crate::error::{invalid, Error, Result};

/// Immutable `n x d` matrix of samples, stored row-major in single precision.
///
/// Per-sample squared norms are cached in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f32>,
    sq_norms: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, values: Vec<f32>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidData("dimension must be at least 1".into()));
        }
        if values.is_empty() {
            return Err(Error::InvalidData(
                "dataset must hold at least one sample".into(),
            ));
        }
        if !values.len().is_multiple_of(d) {
            return Err(Error::InvalidData(format!(
                "{} values do not divide into rows of dimension {d}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at sample {}, component {}",
                pos / d,
                pos % d
            )));
        }
        let n = values.len() / d;
        let sq_norms = values.chunks_exact(d).map(sq_norm).collect();
        Ok(Self {
            n,
            d,
            values,
            sq_norms,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(d, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn sq_norm(&self, i: usize) -> f64 {
        self.sq_norms[i]
    }

    /// `sum_i |x_i|^2`, the upper bound of the boost objective.
    pub fn total_sq_norm(&self) -> f64 {
        self.sq_norms.iter().sum()
    }
}

#[inline]
fn sq_norm(x: &[f32]) -> f64 {
    x.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
}

/// Squared Euclidean distance accumulated in double precision.
#[inline]
pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let diff = f64::from(x) - f64::from(y);
        acc += diff * diff;
    }
    acc
}

pub fn squared_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(sq_dist(a, b))
}

/// `|scale * x - sum|^2` where `sum` is a composite vector.
#[inline]
pub(crate) fn scaled_gap(x: &[f32], scale: f64, sum: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for (&xv, &s) in x.iter().zip(sum) {
        let diff = scale * f64::from(xv) - s;
        acc += diff * diff;
    }
    acc
}

/// Squared distance from `x` to the centroid `D / n` of a cluster.
#[inline]
pub(crate) fn centroid_sq_dist(x: &[f32], composite: &[f64], size: usize) -> f64 {
    let m = size as f64;
    scaled_gap(x, m, composite) / (m * m)
}

/// Change of the boost objective when `x` leaves a cluster of size
/// `size_from >= 2` and joins one of size `size_to`.
///
/// Algebraically this is `(D_v+x)^2/(n_v+1) + (D_u-x)^2/(n_u-1) - D_v^2/n_v - D_u^2/n_u`;
/// it is evaluated as `|n_u x - D_u|^2 / (n_u (n_u-1)) - |n_v x - D_v|^2 / (n_v (n_v+1))`,
/// which avoids cancelling the large `D.D` terms against each other.
#[inline]
pub(crate) fn leave_gain(x: &[f32], from: &[f64], size_from: usize) -> f64 {
    let m = size_from as f64;
    scaled_gap(x, m, from) / (m * (m - 1.0))
}

#[inline]
pub(crate) fn join_cost(x: &[f32], to: &[f64], size_to: usize) -> f64 {
    if size_to == 0 {
        return 0.0;
    }
    let m = size_to as f64;
    scaled_gap(x, m, to) / (m * (m + 1.0))
}

/// Cluster assignment plus per-cluster composite vectors and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    k: usize,
    d: usize,
    assignment: Vec<usize>,
    composite: Vec<f64>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Builds the sufficient statistics for `assignment`. Empty clusters are
    /// permitted here; the objective and distortion reject them.
    pub fn from_assignment(data: &Dataset, k: usize, assignment: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("cluster count must be at least 1"));
        }
        if assignment.len() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                actual: assignment.len(),
            });
        }
        if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidData(format!(
                "cluster id {bad} out of range for k = {k}"
            )));
        }
        let d = data.d();
        let mut composite = vec![0.0; k * d];
        let mut sizes = vec![0; k];
        for (i, &c) in assignment.iter().enumerate() {
            sizes[c] += 1;
            let acc = &mut composite[c * d..(c + 1) * d];
            for (a, &v) in acc.iter_mut().zip(data.row(i)) {
                *a += f64::from(v);
            }
        }
        Ok(Self {
            k,
            d,
            assignment,
            composite,
            sizes,
        })
    }

    /// Partition from explicit member lists; `clusters[r]` becomes cluster `r`.
    pub fn from_clusters(data: &Dataset, clusters: &[Vec<usize>]) -> Result<Self> {
        let mut assignment = vec![usize::MAX; data.n()];
        for (r, members) in clusters.iter().enumerate() {
            for &i in members {
                if i >= data.n() {
                    return Err(Error::InvalidData(format!("sample id {i} out of range")));
                }
                if assignment[i] != usize::MAX {
                    return Err(Error::InvalidData(format!("sample {i} assigned twice")));
                }
                assignment[i] = r;
            }
        }
        if let Some(i) = assignment.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidData(format!("sample {i} is unassigned")));
        }
        Self::from_assignment(data, clusters.len(), assignment)
    }

    /// Every sample in one cluster.
    pub fn single(data: &Dataset) -> Self {
        Self::from_assignment(data, 1, vec![0; data.n()]).expect("single-cluster partition")
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn size(&self, r: usize) -> usize {
        self.sizes[r]
    }

    #[inline]
    pub fn composite(&self, r: usize) -> &[f64] {
        &self.composite[r * self.d..(r + 1) * self.d]
    }

    pub fn centroid(&self, r: usize) -> Vec<f64> {
        let m = self.sizes[r] as f64;
        self.composite(r).iter().map(|&s| s / m).collect()
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn non_empty_clusters(&self) -> usize {
        self.sizes.iter().filter(|&&s| s > 0).count()
    }

    fn check_empty(&self) -> Result<()> {
        match self.sizes.iter().position(|&s| s == 0) {
            Some(r) => Err(Error::EmptyCluster(r)),
            None => Ok(()),
        }
    }

    /// Largest absolute deviation between the stored composites/sizes and a
    /// from-scratch recomputation; `Err` if sizes or assignment disagree.
    pub fn statistics_drift(&self, data: &Dataset) -> Result<f64> {
        let fresh = Self::from_assignment(data, self.k, self.assignment.clone())?;
        if fresh.sizes != self.sizes {
            return Err(Error::InvalidData("stored cluster sizes are stale".into()));
        }
        Ok(fresh
            .composite
            .iter()
            .zip(&self.composite)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn validate_move(&self, data: &Dataset, i: usize, v: usize) -> Result<usize> {
        if i >= self.n() || self.n() != data.n() {
            return Err(Error::InvalidMove {
                sample: i,
                target: v,
                reason: "sample id out of range",
            });
        }
        if v >= self.k {
            return Err(Error::InvalidMove {
                sample: i,
                target: v,
                reason: "target cluster out of range",
            });
        }
        let u = self.assignment[i];
        if u == v {
            return Err(Error::InvalidMove {
                sample: i,
                target: v,
                reason: "sample already belongs to the target cluster",
            });
        }
        if self.sizes[u] < 2 {
            return Err(Error::InvalidMove {
                sample: i,
                target: v,
                reason: "move would empty the source cluster",
            });
        }
        Ok(u)
    }

    /// Moves sample `i` to cluster `v`, updating both clusters' statistics.
    pub fn apply_move(&mut self, data: &Dataset, i: usize, v: usize) -> Result<()> {
        self.validate_move(data, i, v)?;
        self.move_unchecked(data, i, v);
        Ok(())
    }

    #[inline]
    pub(crate) fn move_unchecked(&mut self, data: &Dataset, i: usize, v: usize) {
        let u = self.assignment[i];
        let d = self.d;
        let x = data.row(i);
        for (j, &xv) in x.iter().enumerate() {
            let xv = f64::from(xv);
            self.composite[u * d + j] -= xv;
            self.composite[v * d + j] += xv;
        }
        self.sizes[u] -= 1;
        self.sizes[v] += 1;
        self.assignment[i] = v;
    }
}

/// `I = sum_r D_r.D_r / n_r` from the stored statistics.
pub fn objective_value(part: &Partition) -> Result<f64> {
    part.check_empty()?;
    Ok((0..part.k)
        .map(|r| {
            let dr = part.composite(r);
            dr.iter().map(|v| v * v).sum::<f64>() / part.sizes[r] as f64
        })
        .sum())
}

/// Objective change from moving sample `i` into cluster `v`, in `O(d)`.
pub fn delta_move(data: &Dataset, part: &Partition, i: usize, v: usize) -> Result<f64> {
    let u = part.validate_move(data, i, v)?;
    let x = data.row(i);
    Ok(leave_gain(x, part.composite(u), part.sizes[u])
        - join_cost(x, part.composite(v), part.sizes[v]))
}

/// Mean squared distance of samples to their cluster centroid.
pub fn distortion(data: &Dataset, part: &Partition) -> Result<f64> {
    if part.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: part.n(),
        });
    }
    part.check_empty()?;
    let total: f64 = (0..data.n())
        .map(|i| {
            let r = part.cluster_of(i);
            centroid_sq_dist(data.row(i), part.composite(r), part.sizes[r])
        })
        .sum();
    Ok(total / data.n() as f64)
}

/// Distortion via `E = (sum |x|^2 - I) / n`; `O(k d)` instead of `O(n d)`.
pub(crate) fn distortion_from_objective(data: &Dataset, part: &Partition) -> Result<f64> {
    Ok((data.total_sq_norm() - objective_value(part)?) / data.n() as f64)
}
