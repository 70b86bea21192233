use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::model::{sq_dist, Dataset};

/// Fixed-width neighbour lists: row `i` holds `kappa` `(id, squared distance)`
/// pairs sorted ascending by distance, ties by id.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    n: usize,
    kappa: usize,
    ids: Vec<u32>,
    dists: Vec<f64>,
}

#[inline]
pub(crate) fn neighbor_order(a: (f64, u32), b: (f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KnnGraph {
    /// Builds a graph from unsorted rows; each row is sorted and checked
    /// for self-loops and duplicates.
    pub fn from_rows(n: usize, kappa: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: rows.len(),
            });
        }
        let mut ids = Vec::with_capacity(n * kappa);
        let mut dists = Vec::with_capacity(n * kappa);
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.len() != kappa {
                return Err(Error::InvalidData(format!(
                    "row {i} holds {} neighbours, expected {kappa}",
                    row.len()
                )));
            }
            row.sort_by(|a, b| neighbor_order((a.1, a.0), (b.1, b.0)));
            for (pos, &(j, d)) in row.iter().enumerate() {
                if j as usize >= n {
                    return Err(Error::InvalidData(format!(
                        "row {i}: neighbour {j} out of range"
                    )));
                }
                if j as usize == i {
                    return Err(Error::InvalidData(format!("row {i} lists itself")));
                }
                if row[..pos].iter().any(|&(o, _)| o == j) {
                    return Err(Error::InvalidData(format!("row {i} lists {j} twice")));
                }
                ids.push(j);
                dists.push(d);
            }
        }
        Ok(Self {
            n,
            kappa,
            ids,
            dists,
        })
    }

    /// Graph from neighbour ids alone; distances are recomputed from `data`.
    pub fn from_ids(data: &Dataset, kappa: usize, ids: &[u32]) -> Result<Self> {
        let n = data.n();
        if ids.len() != n * kappa {
            return Err(Error::DimensionMismatch {
                expected: n * kappa,
                actual: ids.len(),
            });
        }
        let rows = ids
            .chunks_exact(kappa.max(1))
            .take(n)
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|&j| {
                        let d = if (j as usize) < n {
                            sq_dist(data.row(i), data.row(j as usize))
                        } else {
                            f64::NAN
                        };
                        (j, d)
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(n, kappa, rows)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    #[inline]
    pub fn ids(&self, i: usize) -> &[u32] {
        &self.ids[i * self.kappa..(i + 1) * self.kappa]
    }

    #[inline]
    pub fn dists(&self, i: usize) -> &[f64] {
        &self.dists[i * self.kappa..(i + 1) * self.kappa]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.ids(i)
            .iter()
            .copied()
            .zip(self.dists(i).iter().copied())
    }

    pub fn all_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn all_dists(&self) -> &[f64] {
        &self.dists
    }

    /// Replaces row `i` wholesale. The row must be a valid sorted list.
    pub fn set_row(&mut self, i: usize, row: &[(u32, f64)]) -> Result<()> {
        if row.len() != self.kappa {
            return Err(Error::DimensionMismatch {
                expected: self.kappa,
                actual: row.len(),
            });
        }
        let base = i * self.kappa;
        for (pos, &(j, d)) in row.iter().enumerate() {
            self.ids[base + pos] = j;
            self.dists[base + pos] = d;
        }
        Ok(())
    }

    /// Offers `j` at squared distance `dist` to row `i`. The row changes only
    /// if `j` is absent and `(dist, j)` ranks before the current last entry.
    #[inline]
    pub(crate) fn offer(&mut self, i: usize, j: u32, dist: f64) -> bool {
        let k = self.kappa;
        let base = i * k;
        let last = base + k - 1;
        if neighbor_order((dist, j), (self.dists[last], self.ids[last])) != Ordering::Less {
            return false;
        }
        if self.ids[base..base + k].contains(&j) {
            return false;
        }
        let mut pos = last;
        while pos > base
            && neighbor_order((dist, j), (self.dists[pos - 1], self.ids[pos - 1])) == Ordering::Less
        {
            self.ids[pos] = self.ids[pos - 1];
            self.dists[pos] = self.dists[pos - 1];
            pos -= 1;
        }
        self.ids[pos] = j;
        self.dists[pos] = dist;
        true
    }

    /// Symmetric update of rows `i` and `j` with their mutual distance.
    /// Returns whether either row changed.
    pub fn update_knn_list(&mut self, i: usize, j: usize, sq_dist: f64) -> Result<bool> {
        if i == j {
            return Err(invalid("cannot link a sample to itself"));
        }
        if i >= self.n || j >= self.n {
            return Err(invalid(format!(
                "sample id out of range for n = {}",
                self.n
            )));
        }
        Ok(self.update_pair(i, j, sq_dist) > 0)
    }

    /// Number of rows (0, 1 or 2) mutated by the pair update.
    #[inline]
    pub(crate) fn update_pair(&mut self, i: usize, j: usize, sq_dist: f64) -> usize {
        usize::from(self.offer(i, j as u32, sq_dist))
            + usize::from(self.offer(j, i as u32, sq_dist))
    }

    /// Verifies ordering, uniqueness, self-exclusion and stored distances.
    pub fn check(&self, data: &Dataset) -> Result<()> {
        if data.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: data.n(),
            });
        }
        for i in 0..self.n {
            let ids = self.ids(i);
            let dists = self.dists(i);
            for pos in 0..self.kappa {
                let j = ids[pos] as usize;
                if j == i || j >= self.n {
                    return Err(Error::InvalidData(format!("row {i}: bad neighbour {j}")));
                }
                if ids[..pos].contains(&ids[pos]) {
                    return Err(Error::InvalidData(format!("row {i}: duplicate {j}")));
                }
                if pos > 0
                    && neighbor_order((dists[pos - 1], ids[pos - 1]), (dists[pos], ids[pos]))
                        != Ordering::Less
                {
                    return Err(Error::InvalidData(format!("row {i} is not sorted")));
                }
                if dists[pos] != sq_dist(data.row(i), data.row(j)) {
                    return Err(Error::InvalidData(format!(
                        "row {i}: stored distance to {j} is stale"
                    )));
                }
            }
        }
        Ok(())
    }
}
