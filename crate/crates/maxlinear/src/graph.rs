//! Directed acyclic graphs and weighted generative specifications.
//!
//! Nodes are `0..d` internally; all serialized formats use 1-based
//! labels (see the `io` module). An edge `(j, i)` points from parent
//! `j` to child `i`.

use std::collections::BTreeSet;

use rand::Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Pure graph structure: node count plus directed edges, guaranteed acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    d: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Dag {
    /// Build a DAG from `(parent, child)` pairs, rejecting self-loops,
    /// out-of-range nodes and cycles.
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(j, i) in &edges {
            if j >= d || i >= d {
                return Err(Error::InvalidMatrix(format!(
                    "edge ({j}, {i}) out of range for {d} nodes"
                )));
            }
            if j == i {
                return Err(Error::InvalidMatrix(format!("self-loop at node {j}")));
            }
        }
        topological_sort(d, &edges)?;
        Ok(Dag { d, edges })
    }

    pub fn empty(d: usize) -> Self {
        Dag {
            d,
            edges: BTreeSet::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.d
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(parent, child)` pairs, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.contains(&(parent, child))
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, c)| c == i)
            .map(|&(p, _)| p)
            .collect()
    }

    /// Ancestor sets computed by reachability; `ancestors[i]` excludes `i`.
    pub fn ancestor_sets(&self) -> Vec<BTreeSet<usize>> {
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); self.d];
        for &(j, i) in &self.edges {
            parents[i].push(j);
        }
        let order = topological_sort(self.d, &self.edges).expect("constructed acyclic");
        let mut an: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.d];
        for &i in &order {
            let mut acc = BTreeSet::new();
            for &p in &parents[i] {
                acc.insert(p);
                acc.extend(an[p].iter().copied());
            }
            an[i] = acc;
        }
        an
    }

    /// Whether `order` lists every node before all of its ancestors.
    pub fn is_valid_causal_order(&self, order: &[usize]) -> bool {
        if order.len() != self.d {
            return false;
        }
        let mut pos = vec![usize::MAX; self.d];
        for (p, &node) in order.iter().enumerate() {
            if node >= self.d || pos[node] != usize::MAX {
                return false;
            }
            pos[node] = p;
        }
        self.edges.iter().all(|&(j, i)| pos[i] < pos[j])
    }
}

/// Kahn topological sort; ties broken by smallest node index so the
/// result is deterministic. Errors on cycles.
pub fn topological_sort(d: usize, edges: &BTreeSet<(usize, usize)>) -> Result<Vec<usize>> {
    let mut indegree = vec![0usize; d];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); d];
    for &(j, i) in edges {
        indegree[i] += 1;
        children[j].push(i);
    }
    let mut ready: BTreeSet<usize> = (0..d).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(&next) = ready.iter().next() {
        ready.remove(&next);
        order.push(next);
        for &c in &children[next] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != d {
        return Err(Error::CycleDetected);
    }
    Ok(order)
}

/// Generative specification: an acyclic edge-weight matrix `C` where
/// `c_ik > 0` exactly when `k` is a parent of `i` or `k == i`, and every
/// diagonal entry is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DagSpec {
    weights: DenseMatrix,
}

impl DagSpec {
    pub fn from_weights(weights: DenseMatrix) -> Result<Self> {
        let d = weights.nrows();
        if weights.ncols() != d {
            return Err(Error::InvalidMatrix(format!(
                "weight matrix must be square, got {}x{}",
                d,
                weights.ncols()
            )));
        }
        let mut edges = BTreeSet::new();
        for i in 0..d {
            for k in 0..d {
                let c = weights[(i, k)];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "weight c[{i}][{k}] = {c} must be finite and nonnegative"
                    )));
                }
                if i == k {
                    if c <= 0.0 {
                        return Err(Error::InvalidMatrix(format!(
                            "diagonal weight c[{i}][{i}] must be strictly positive"
                        )));
                    }
                } else if c > 0.0 {
                    edges.insert((k, i));
                }
            }
        }
        topological_sort(d, &edges)?;
        Ok(DagSpec { weights })
    }

    /// Build from an explicit edge list plus weights, verifying that the
    /// positivity pattern of the weights matches the edges exactly.
    pub fn new(
        d: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        weights: DenseMatrix,
    ) -> Result<Self> {
        let declared: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        let spec = DagSpec::from_weights(weights)?;
        if spec.weights.nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "expected {d} nodes, weight matrix has {}",
                spec.weights.nrows()
            )));
        }
        let derived: BTreeSet<(usize, usize)> = spec.edge_set();
        if declared != derived {
            return Err(Error::InvalidMatrix(
                "edge set does not match positivity pattern of weights".into(),
            ));
        }
        Ok(spec)
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        let d = self.node_count();
        let mut edges = BTreeSet::new();
        for i in 0..d {
            for k in 0..d {
                if i != k && self.weights[(i, k)] > 0.0 {
                    edges.insert((k, i));
                }
            }
        }
        edges
    }

    pub fn dag(&self) -> Dag {
        Dag::new(self.node_count(), self.edge_set()).expect("validated acyclic")
    }

    /// Random well-ordered specification: an edge `j -> i` may exist only
    /// for `j > i`, so parents always carry larger labels. Weights are
    /// uniform on `[0.3, 1.0]`, bounded away from zero so that downstream
    /// strict inequalities have numeric margin.
    pub fn random_well_ordered<R: Rng>(d: usize, edge_prob: f64, rng: &mut R) -> Self {
        let mut w = DenseMatrix::zeros(d, d);
        for i in 0..d {
            w[(i, i)] = rng.gen_range(0.3..1.0);
            for j in (i + 1)..d {
                if rng.gen::<f64>() < edge_prob {
                    w[(i, j)] = rng.gen_range(0.3..1.0);
                }
            }
        }
        DagSpec::from_weights(w).expect("upper-triangular pattern is acyclic")
    }

    /// Relabel nodes by a permutation: node `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let d = self.node_count();
        if perm.len() != d {
            return Err(Error::DimensionMismatch(
                "permutation length must equal node count".into(),
            ));
        }
        let mut w = DenseMatrix::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                w[(perm[i], perm[k])] = self.weights[(i, k)];
            }
        }
        DagSpec::from_weights(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles() {
        assert!(matches!(
            Dag::new(3, [(0, 1), (1, 2), (2, 0)]),
            Err(Error::CycleDetected)
        ));
    }

    #[test]
    fn rejects_self_loops_and_range() {
        assert!(Dag::new(2, [(0, 0)]).is_err());
        assert!(Dag::new(2, [(0, 5)]).is_err());
    }

    #[test]
    fn topological_order_is_deterministic() {
        let edges: BTreeSet<_> = [(2, 0), (1, 0)].into_iter().collect();
        assert_eq!(topological_sort(3, &edges).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn ancestor_sets_follow_paths() {
        // chain 2 -> 1 -> 0 plus direct 2 -> 0
        let dag = Dag::new(3, [(2, 1), (1, 0), (2, 0)]).unwrap();
        let an = dag.ancestor_sets();
        assert_eq!(an[0], BTreeSet::from([1, 2]));
        assert_eq!(an[1], BTreeSet::from([2]));
        assert!(an[2].is_empty());
    }

    #[test]
    fn causal_order_validity() {
        let dag = Dag::new(3, [(2, 1), (1, 0)]).unwrap();
        assert!(dag.is_valid_causal_order(&[0, 1, 2]));
        assert!(!dag.is_valid_causal_order(&[2, 1, 0]));
        assert!(!dag.is_valid_causal_order(&[0, 0, 1]));
    }

    #[test]
    fn spec_pattern_must_match_edges() {
        let w = DenseMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(DagSpec::new(2, [(1, 0)], w.clone()).is_ok());
        assert!(DagSpec::new(2, [], w).is_err());
    }

    #[test]
    fn spec_rejects_zero_diagonal() {
        let w = DenseMatrix::from_rows(vec![vec![0.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(DagSpec::from_weights(w).is_err());
    }

    #[test]
    fn random_spec_is_well_ordered() {
        let mut rng = rand::rngs::mock::StepRng::new(42, 77);
        let spec = DagSpec::random_well_ordered(6, 0.5, &mut rng);
        for (j, i) in spec.edge_set() {
            assert!(j > i, "parent label must exceed child label");
        }
    }
}
