use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// How a sample picks its destination among the candidate clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Move to the candidate with the largest positive objective gain.
    #[default]
    Boost,
    /// Move to the candidate whose centroid is strictly nearer than the
    /// sample's current centroid.
    Traditional,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boost" => Ok(Mode::Boost),
            "traditional" => Ok(Mode::Traditional),
            other => Err(invalid(format!(
                "unknown mode {other:?}, expected boost or traditional"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Boost => "boost",
            Mode::Traditional => "traditional",
        })
    }
}

/// Tunables shared by clustering and graph construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Target cluster count.
    pub k: usize,
    /// Neighbour-list length of the KNN graph.
    pub kappa: usize,
    /// Average cluster size used while building the graph; the builder
    /// clusters into `n / xi` groups.
    pub xi: usize,
    /// Outer iterations of graph construction.
    pub tau: usize,
    /// Cap on full optimisation passes.
    pub max_iter: usize,
    pub seed: u64,
    pub mode: Mode,
    /// During graph construction, seed each round's clustering with the
    /// previous round's partition instead of a fresh two-means tree.
    pub warm_start: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k: 1,
            kappa: 50,
            xi: 50,
            tau: 10,
            max_iter: 30,
            seed: 0,
            mode: Mode::Boost,
            warm_start: false,
        }
    }
}

impl Config {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.kappa < 1 {
            return Err(invalid("kappa must be at least 1"));
        }
        if self.xi < 2 {
            return Err(invalid("xi must be at least 2"));
        }
        if self.tau < 1 {
            return Err(invalid("tau must be at least 1"));
        }
        if self.max_iter < 1 {
            return Err(invalid("max_iter must be at least 1"));
        }
        validate_k(self.k, n)
    }
}

pub(crate) fn validate_k(k: usize, n: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(invalid(format!("k = {k} must lie in [1, {n}]")));
    }
    Ok(())
}
