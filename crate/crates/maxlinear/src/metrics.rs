//! Structural distances between directed graphs, ensemble centroids and
//! edge-stability counts.

use crate::error::{Error, Result};
use crate::graph::Dag;

/// Structural Hamming distance: per unordered node pair, one unit for
/// an edge present in only one graph (addition/deletion) or present in
/// both with opposite direction (reversal).
pub fn shd(g1: &Dag, g2: &Dag) -> Result<usize> {
    if g1.node_count() != g2.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "graphs have {} and {} nodes",
            g1.node_count(),
            g2.node_count()
        )));
    }
    let d = g1.node_count();
    let mut total = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let s1 = pair_status(g1, i, j);
            let s2 = pair_status(g2, i, j);
            if s1 != s2 {
                total += 1;
            }
        }
    }
    Ok(total)
}

#[derive(PartialEq, Eq)]
enum PairStatus {
    None,
    Forward,
    Backward,
}

fn pair_status(g: &Dag, i: usize, j: usize) -> PairStatus {
    // acyclicity rules out both directions at once
    if g.has_edge(i, j) {
        PairStatus::Forward
    } else if g.has_edge(j, i) {
        PairStatus::Backward
    } else {
        PairStatus::None
    }
}

/// Normalised structural Hamming distance: the distance divided by the
/// total edge count of both graphs; two empty graphs are at distance 0.
pub fn nshd(g1: &Dag, g2: &Dag) -> Result<f64> {
    let dist = shd(g1, g2)?;
    let edges = g1.edge_count() + g2.edge_count();
    if edges == 0 {
        return Ok(0.0);
    }
    Ok(dist as f64 / edges as f64)
}

/// Estimated DAGs over a grid of exceedance counts at one threshold.
#[derive(Debug, Clone)]
pub struct DagEnsemble {
    members: Vec<(Dag, usize)>,
    delta: f64,
}

impl DagEnsemble {
    pub fn new(members: Vec<(Dag, usize)>, delta: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig("empty DAG ensemble".into()));
        }
        let d = members[0].0.node_count();
        for (g, _) in &members {
            if g.node_count() != d {
                return Err(Error::DimensionMismatch(
                    "ensemble members must share the node set".into(),
                ));
            }
        }
        let mut rs: Vec<usize> = members.iter().map(|&(_, r)| r).collect();
        rs.sort_unstable();
        rs.dedup();
        if rs.len() != members.len() {
            return Err(Error::InvalidConfig(
                "ensemble exceedance counts must be distinct".into(),
            ));
        }
        Ok(DagEnsemble { members, delta })
    }

    pub fn members(&self) -> &[(Dag, usize)] {
        &self.members
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sum of distances from each member to all others, in member order.
    pub fn nshd_sums(&self) -> Result<Vec<f64>> {
        let n = self.members.len();
        let mut sums = vec![0.0; n];
        for x in 0..n {
            for y in (x + 1)..n {
                let v = nshd(&self.members[x].0, &self.members[y].0)?;
                sums[x] += v;
                sums[y] += v;
            }
        }
        Ok(sums)
    }
}

/// The member minimising the total distance to the rest of the
/// ensemble; ties go to the smallest exceedance count.
pub fn centroid(ensemble: &DagEnsemble) -> Result<(Dag, usize)> {
    let sums = ensemble.nshd_sums()?;
    let best = ensemble
        .members()
        .iter()
        .zip(&sums)
        .min_by(|(ma, sa), (mb, sb)| sa.total_cmp(sb).then(ma.1.cmp(&mb.1)))
        .expect("ensemble is nonempty");
    Ok(best.0.clone())
}

/// Per-edge presence counts across an ensemble.
#[derive(Debug, Clone)]
pub struct StabilityScore {
    d: usize,
    counts: Vec<u32>,
}

impl StabilityScore {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// How many members contain the edge `parent -> child`.
    pub fn count(&self, parent: usize, child: usize) -> u32 {
        self.counts[child * self.d + parent]
    }

    /// Edges with positive counts as `(parent, child, count)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for child in 0..self.d {
            for parent in 0..self.d {
                let c = self.counts[child * self.d + parent];
                if c > 0 {
                    out.push((parent, child, c));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Edge lists bucketed by presence count; bucket `c - 1` holds the
    /// edges appearing in exactly `c` members.
    pub fn buckets(&self, ensemble_size: usize) -> Vec<Vec<(usize, usize)>> {
        let mut buckets = vec![Vec::new(); ensemble_size];
        for (parent, child, c) in self.edges() {
            buckets[(c as usize).min(ensemble_size) - 1].push((parent, child));
        }
        buckets
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

pub fn stability(ensemble: &DagEnsemble) -> StabilityScore {
    let d = ensemble.members()[0].0.node_count();
    let mut counts = vec![0u32; d * d];
    for (g, _) in ensemble.members() {
        for (parent, child) in g.edges() {
            counts[child * d + parent] += 1;
        }
    }
    StabilityScore { d, counts }
}
