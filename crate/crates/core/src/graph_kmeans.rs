//! Boost k-means where each sample only considers the clusters that host its
//! KNN-graph neighbours.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{Config, Mode};
use crate::error::{Error, Result};
use crate::graph::KnnGraph;
use crate::model::{
    centroid_sq_dist, distortion_from_objective, join_cost, leave_gain, Dataset, Partition,
};
use crate::trace::{MetricsTrace, TraceRow};
use crate::two_means::two_means_tree_counted;

/// Deduplicated cluster ids, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateSet {
    ids: Vec<usize>,
}

impl CandidateSet {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Self {
        let mut out = Self::default();
        for id in ids {
            if !out.ids.contains(&id) {
                out.ids.push(id);
            }
        }
        out
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }
}

/// Clusters of `i`'s graph neighbours, excluding `i`'s own cluster.
pub fn candidate_clusters(part: &Partition, graph: &KnnGraph, i: usize) -> CandidateSet {
    let own = part.cluster_of(i);
    CandidateSet::new(
        graph
            .ids(i)
            .iter()
            .map(|&b| part.cluster_of(b as usize))
            .filter(|&c| c != own),
    )
}

/// Best destination for sample `i` among `candidates`, if any improves on
/// staying put. Ties go to the lowest cluster id. The returned value is the
/// objective gain (boost) or the centroid-distance reduction (traditional).
pub fn best_move(
    data: &Dataset,
    part: &Partition,
    i: usize,
    candidates: &CandidateSet,
    mode: Mode,
) -> Option<(usize, f64)> {
    let mut evals = 0;
    choose(data, part, i, candidates.ids(), mode, &mut evals)
}

#[inline]
fn choose(
    data: &Dataset,
    part: &Partition,
    i: usize,
    candidates: &[usize],
    mode: Mode,
    evals: &mut u64,
) -> Option<(usize, f64)> {
    let u = part.cluster_of(i);
    let nu = part.size(u);
    if candidates.is_empty() || nu < 2 {
        return None;
    }
    let x = data.row(i);
    *evals += 1 + candidates.len() as u64;
    match mode {
        Mode::Boost => {
            let leave = leave_gain(x, part.composite(u), nu);
            let mut best: Option<(usize, f64)> = None;
            for &v in candidates {
                if v == u {
                    continue;
                }
                let gain = leave - join_cost(x, part.composite(v), part.size(v));
                best = match best {
                    Some((bv, bg)) if bg > gain || (bg == gain && bv < v) => Some((bv, bg)),
                    _ => Some((v, gain)),
                };
            }
            best.filter(|&(_, g)| g > 0.0)
        }
        Mode::Traditional => {
            let own = centroid_sq_dist(x, part.composite(u), nu);
            let mut best: Option<(usize, f64)> = None;
            for &v in candidates {
                if v == u || part.size(v) == 0 {
                    continue;
                }
                let dist = centroid_sq_dist(x, part.composite(v), part.size(v));
                best = match best {
                    Some((bv, bd)) if bd < dist || (bd == dist && bv < v) => Some((bv, bd)),
                    _ => Some((v, dist)),
                };
            }
            best.filter(|&(_, dist)| dist < own)
                .map(|(v, dist)| (v, own - dist))
        }
    }
}

/// Where the candidate clusters of a sample come from.
#[derive(Debug, Clone, Copy)]
pub enum Candidates<'a> {
    /// Clusters of the sample's graph neighbours.
    Graph(&'a KnnGraph),
    /// Every other cluster (plain boost k-means).
    Exhaustive,
}

/// Result of an optimisation run.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub partition: Partition,
    /// Row 0 describes the initial partition; row `t` the state after pass `t`.
    pub trace: MetricsTrace,
    /// Smallest value returned by an accepted move; `None` if nothing moved.
    pub min_accepted_gain: Option<f64>,
    pub total_moves: u64,
}

impl Clustering {
    pub fn passes(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Two-means-tree initialisation followed by graph-restricted optimisation.
pub fn gk_means<R: Rng + ?Sized>(
    data: &Dataset,
    graph: &KnnGraph,
    config: &Config,
    rng: &mut R,
) -> Result<Clustering> {
    check_graph(data, graph)?;
    optimize(data, None, Candidates::Graph(graph), config, rng)
}

/// Graph-restricted optimisation from a caller-supplied partition.
pub fn gk_means_from<R: Rng + ?Sized>(
    data: &Dataset,
    init: Partition,
    graph: &KnnGraph,
    config: &Config,
    rng: &mut R,
) -> Result<Clustering> {
    check_graph(data, graph)?;
    optimize(data, Some(init), Candidates::Graph(graph), config, rng)
}

/// Full boost (or online traditional) k-means that compares every sample
/// with every cluster; the quality reference for [`gk_means`].
pub fn boost_kmeans<R: Rng + ?Sized>(
    data: &Dataset,
    init: Option<Partition>,
    config: &Config,
    rng: &mut R,
) -> Result<Clustering> {
    optimize(data, init, Candidates::Exhaustive, config, rng)
}

fn check_graph(data: &Dataset, graph: &KnnGraph) -> Result<()> {
    if graph.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: graph.n(),
        });
    }
    Ok(())
}

/// Visits samples in a freshly shuffled order each pass and applies every
/// improving move immediately. Stops after a pass without moves or after
/// `config.max_iter` passes.
pub fn optimize<R: Rng + ?Sized>(
    data: &Dataset,
    init: Option<Partition>,
    candidates: Candidates<'_>,
    config: &Config,
    rng: &mut R,
) -> Result<Clustering> {
    config.validate(data.n())?;
    let start = Instant::now();
    let mut init_evals = 0;
    let mut part = match init {
        Some(p) => {
            if p.n() != data.n() || p.k() != config.k {
                return Err(Error::InvalidData(format!(
                    "initial partition has n = {}, k = {}; expected n = {}, k = {}",
                    p.n(),
                    p.k(),
                    data.n(),
                    config.k
                )));
            }
            p
        }
        None => two_means_tree_counted(data, config.k, rng, &mut init_evals)?,
    };
    let mut trace = MetricsTrace::default();
    trace.push(TraceRow {
        iteration: 0,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        distortion: distortion_from_objective(data, &part)?,
        recall_at_1: None,
        moves_accepted: 0,
        distance_evals: init_evals,
    });

    let k = part.k();
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut marks = vec![usize::MAX; k];
    let mut buf: Vec<usize> = Vec::with_capacity(k.min(256));
    let mut min_gain: Option<f64> = None;
    let mut total_moves = 0;

    for pass in 1..=config.max_iter {
        order.shuffle(rng);
        let mut moves = 0u64;
        let mut evals = 0u64;
        for &i in &order {
            let own = part.cluster_of(i);
            if part.size(own) < 2 {
                continue;
            }
            buf.clear();
            match candidates {
                Candidates::Graph(graph) => {
                    for &b in graph.ids(i) {
                        let c = part.cluster_of(b as usize);
                        if c != own && marks[c] != i {
                            marks[c] = i;
                            buf.push(c);
                        }
                    }
                }
                Candidates::Exhaustive => buf.extend((0..k).filter(|&c| c != own)),
            }
            if let Some((v, gain)) = choose(data, &part, i, &buf, config.mode, &mut evals) {
                part.move_unchecked(data, i, v);
                moves += 1;
                min_gain = Some(min_gain.map_or(gain, |g: f64| g.min(gain)));
            }
        }
        total_moves += moves;
        trace.push(TraceRow {
            iteration: pass,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            distortion: distortion_from_objective(data, &part)?,
            recall_at_1: None,
            moves_accepted: moves,
            distance_evals: evals,
        });
        if moves == 0 {
            break;
        }
    }

    Ok(Clustering {
        partition: part,
        trace,
        min_accepted_gain: min_gain,
        total_moves,
    })
}
