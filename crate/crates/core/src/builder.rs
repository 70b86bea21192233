//! Approximate KNN graph construction by alternating graph-guided clustering
//! with exhaustive comparison inside each small cluster.
//!
//! Starting from random neighbour lists, every round clusters the data into
//! `n / xi` groups with [`gk_means`] (one pass, guided by the current graph)
//! and then compares all pairs inside each group. Better lists give better
//! clusters, which in turn surface closer pairs.

use std::time::Instant;

use rand::seq::index;
use rand::Rng;

use crate::config::{Config, Mode};
use crate::error::{invalid, Result};
use crate::graph::KnnGraph;
use crate::graph_kmeans::{gk_means_from, optimize, Candidates};
use crate::model::{sq_dist, Dataset, Partition};

/// Random lists: row `i` receives `kappa` distinct ids other than `i`,
/// uniformly sampled, with their true distances.
pub fn random_graph_init<R: Rng + ?Sized>(
    data: &Dataset,
    kappa: usize,
    rng: &mut R,
) -> Result<KnnGraph> {
    let n = data.n();
    if kappa < 1 || kappa + 1 > n {
        return Err(invalid(format!(
            "kappa = {kappa} needs 1 <= kappa <= n - 1 = {}",
            n - 1
        )));
    }
    let rows = (0..n)
        .map(|i| {
            index::sample(rng, n - 1, kappa)
                .into_iter()
                .map(|j| {
                    let j = if j >= i { j + 1 } else { j };
                    (j as u32, sq_dist(data.row(i), data.row(j)))
                })
                .collect()
        })
        .collect();
    KnnGraph::from_rows(n, kappa, rows)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefineStats {
    /// Row mutations (a pair can mutate zero, one or both rows).
    pub updates: u64,
    /// Pairwise distance evaluations.
    pub evaluations: u64,
}

/// Compares every unordered pair inside each cluster once and offers the
/// distance to both rows.
pub fn refine_within_clusters(
    data: &Dataset,
    part: &Partition,
    graph: &mut KnnGraph,
) -> RefineStats {
    let mut stats = RefineStats::default();
    for members in part.members() {
        for (a, &i) in members.iter().enumerate() {
            let xi = data.row(i);
            for &j in &members[a + 1..] {
                let d = sq_dist(xi, data.row(j));
                stats.evaluations += 1;
                stats.updates += graph.update_pair(i, j, d) as u64;
            }
        }
    }
    stats
}

/// State after one outer round of construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildRound {
    pub round: usize,
    pub elapsed_seconds: f64,
    /// Distortion of this round's clustering.
    pub distortion: f64,
    pub moves_accepted: u64,
    pub row_updates: u64,
    /// Cluster-side evaluations (tree initialisation plus candidate checks).
    pub cluster_evals: u64,
    /// Pairwise comparisons inside clusters.
    pub pair_evals: u64,
    /// Size of the largest cluster this round.
    pub max_cluster: usize,
    /// `sum_m |S_m| (|S_m| - 1) / 2` for this round's clusters.
    pub pair_budget: u64,
}

#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: KnnGraph,
    pub rounds: Vec<BuildRound>,
}

impl GraphBuild {
    pub fn total_evals(&self) -> u64 {
        self.rounds
            .iter()
            .map(|r| r.cluster_evals + r.pair_evals)
            .sum()
    }
}

/// Builds an approximate KNN graph with `config.kappa` neighbours per row
/// over `config.tau` rounds of clustering into `n / config.xi` groups.
pub fn build_knn_graph<R: Rng + ?Sized>(
    data: &Dataset,
    config: &Config,
    rng: &mut R,
) -> Result<GraphBuild> {
    build_knn_graph_observed(data, config, rng, |_, _, _| {})
}

/// As [`build_knn_graph`], calling `observe(round, graph, partition)` after
/// each round's refinement. `config.tau == 0` returns the random graph.
pub fn build_knn_graph_observed<R, F>(
    data: &Dataset,
    config: &Config,
    rng: &mut R,
    mut observe: F,
) -> Result<GraphBuild>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &KnnGraph, &Partition),
{
    let n = data.n();
    if config.xi < 2 {
        return Err(invalid("xi must be at least 2"));
    }
    if n <= config.xi {
        return Err(invalid(format!(
            "n = {n} does not exceed xi = {}; compute the exact graph by brute force instead",
            config.xi
        )));
    }
    let start = Instant::now();
    let mut graph = random_graph_init(data, config.kappa, rng)?;
    let groups = n / config.xi;
    // one clustering pass per round
    let round_config = Config {
        k: groups,
        max_iter: 1,
        mode: Mode::Boost,
        ..config.clone()
    };
    let mut rounds = Vec::with_capacity(config.tau);
    let mut previous: Option<Partition> = None;
    for round in 0..config.tau {
        let clustering = match previous.take() {
            Some(init) if config.warm_start => {
                gk_means_from(data, init, &graph, &round_config, rng)?
            }
            _ => optimize(data, None, Candidates::Graph(&graph), &round_config, rng)?,
        };
        let part = clustering.partition;
        let stats = refine_within_clusters(data, &part, &mut graph);
        let sizes = part.sizes();
        rounds.push(BuildRound {
            round,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            distortion: clustering.trace.last().map_or(f64::NAN, |r| r.distortion),
            moves_accepted: clustering.total_moves,
            row_updates: stats.updates,
            cluster_evals: clustering.trace.rows.iter().map(|r| r.distance_evals).sum(),
            pair_evals: stats.evaluations,
            max_cluster: sizes.iter().copied().max().unwrap_or(0),
            pair_budget: sizes
                .iter()
                .map(|&m| (m * m.saturating_sub(1) / 2) as u64)
                .sum(),
        });
        observe(round, &graph, &part);
        previous = Some(part);
    }
    Ok(GraphBuild { graph, rounds })
}
