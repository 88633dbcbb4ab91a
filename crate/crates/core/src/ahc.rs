//! Agglomerative hierarchical clustering over a pairwise similarity matrix.
//!
//! Average linkage is recomputed from the original pairwise scores (not by
//! update formulas on transformed values), which matches the semantics of a
//! PLDA log-likelihood-ratio matrix. The stopping threshold supports the
//! deliberate underclustering used to initialize the Bayesian HMM stage.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    #[default]
    Average,
}

#[derive(Debug, Clone)]
pub struct AhcConfig {
    /// Stop when the best merge's average similarity falls below this.
    pub threshold: f64,
    pub linkage: Linkage,
    /// Also stop once the cluster count reaches this bound.
    pub max_clusters: Option<usize>,
}

impl Default for AhcConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            linkage: Linkage::Average,
            max_clusters: None,
        }
    }
}

impl AhcConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }
}

/// Cluster by repeatedly merging the pair with maximal average cross-cluster
/// similarity until the best score drops below the threshold or the cluster
/// count reaches `max_clusters`. Ties break toward the pair with the lowest
/// (first, second) smallest-member indices. Labels are renumbered 0..K−1 by
/// first occurrence.
pub fn cluster(similarity: &Array2<f64>, cfg: &AhcConfig) -> Result<Vec<usize>> {
    let n = similarity.nrows();
    if n == 0 {
        return Err(Error::invalid("cluster: empty similarity matrix"));
    }
    if similarity.ncols() != n {
        return Err(Error::invalid("cluster: matrix must be square"));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !similarity[[i, j]].is_finite() {
                return Err(Error::invalid(format!(
                    "cluster: non-finite similarity at ({i}, {j})"
                )));
            }
        }
    }
    if let Some(m) = cfg.max_clusters {
        if m == 0 {
            return Err(Error::config("max_clusters must be at least 1"));
        }
    }

    // Active clusters keyed by their smallest member. cross[a][b] holds the
    // sum of pairwise scores between clusters; averages divide by size
    // products on demand.
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut cross = similarity.clone();
    let mut active: Vec<usize> = (0..n).collect();

    while active.len() > 1 {
        if let Some(m) = cfg.max_clusters {
            if active.len() <= m {
                break;
            }
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            let size_a = members[a].as_ref().expect("active").len();
            for &b in &active[ai + 1..] {
                let size_b = members[b].as_ref().expect("active").len();
                let avg = cross[[a, b]] / (size_a * size_b) as f64;
                let better = match best {
                    None => true,
                    Some((score, _, _)) => avg > score,
                };
                if better {
                    best = Some((avg, a, b));
                }
            }
        }
        let (score, a, b) = best.expect("at least one pair");
        if score < cfg.threshold {
            break;
        }
        // merge b into a (a < b since active is sorted ascending)
        for &c in &active {
            if c != a && c != b {
                let sum = cross[[a, c]] + cross[[b, c]];
                cross[[a, c]] = sum;
                cross[[c, a]] = sum;
            }
        }
        let moved = members[b].take().expect("active");
        members[a].as_mut().expect("active").extend(moved);
        active.retain(|&c| c != b);
    }

    // renumber by first occurrence
    let mut labels = vec![usize::MAX; n];
    let mut cluster_of = vec![usize::MAX; n];
    for &a in &active {
        for &item in members[a].as_ref().expect("active") {
            cluster_of[item] = a;
        }
    }
    let mut next = 0usize;
    let mut renamed = vec![usize::MAX; n];
    for item in 0..n {
        let c = cluster_of[item];
        if renamed[c] == usize::MAX {
            renamed[c] = next;
            next += 1;
        }
        labels[item] = renamed[c];
    }
    Ok(labels)
}
