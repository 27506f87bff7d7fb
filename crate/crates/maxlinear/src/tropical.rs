//! Max-linear coefficient matrices and the tropical (max-times)
//! operations that connect them to DAGs.
//!
//! The coefficient matrix `A` of a recursive max-linear model stores in
//! `a_ij` the largest weight over all paths from `j` to `i`, with
//! `a_ii` the innovation weight of node `i` itself. Positive entries
//! therefore encode ancestry: `a_ij > 0` iff `j` is an ancestor of `i`
//! or `j == i`.

use std::collections::BTreeSet;

use crate::dense::{max_times_multiply, DenseMatrix};
use crate::error::{Error, Result};
use crate::graph::{topological_sort, Dag, DagSpec};

/// Absolute tolerance guarding strict inequalities between products of
/// coefficients; ties at this scale are treated as equalities.
pub const EQ_TOL: f64 = 1e-12;

/// Nonnegative square matrix with acyclic off-diagonal positivity
/// pattern and strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxLinearMatrix {
    values: DenseMatrix,
    standardised: bool,
}

impl MaxLinearMatrix {
    pub fn from_dense(values: DenseMatrix) -> Result<Self> {
        let d = values.nrows();
        if values.ncols() != d {
            return Err(Error::InvalidMatrix(format!(
                "coefficient matrix must be square, got {}x{}",
                d,
                values.ncols()
            )));
        }
        let mut edges = BTreeSet::new();
        for i in 0..d {
            for j in 0..d {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry a[{i}][{j}] = {v} must be finite and nonnegative"
                    )));
                }
                if i == j {
                    if v <= 0.0 {
                        return Err(Error::InvalidMatrix(format!(
                            "diagonal entry a[{i}][{i}] must be strictly positive"
                        )));
                    }
                } else if v > 0.0 {
                    edges.insert((j, i));
                }
            }
        }
        topological_sort(d, &edges)?;
        Ok(MaxLinearMatrix {
            values,
            standardised: false,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_dense(DenseMatrix::from_rows(rows)?)
    }

    pub fn identity(d: usize) -> Self {
        MaxLinearMatrix {
            values: DenseMatrix::identity_pattern(d),
            standardised: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn dense(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn is_standardised(&self) -> bool {
        self.standardised
    }

    /// Mark a matrix whose rows are already unit-norm as standardised.
    /// Used when loading serialized matrices; verifies the row norms.
    pub fn assume_standardised(mut self) -> Result<Self> {
        for i in 0..self.dim() {
            let norm = row_norm(self.row(i));
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has norm {norm}, expected 1"
                )));
            }
        }
        self.standardised = true;
        Ok(self)
    }

    /// Ancestors of each node under the positivity pattern:
    /// `an[i] = {j != i : a_ij > 0}`.
    pub fn ancestor_sets(&self) -> Vec<BTreeSet<usize>> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                (0..d)
                    .filter(|&j| j != i && self.get(i, j) > 0.0)
                    .collect()
            })
            .collect()
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Path-weight closure: computes the max-linear coefficient matrix from
/// an edge-weight specification by tropical power iteration,
/// `A <- (E xmax A) v diag(C)`, which converges after at most `d - 1`
/// steps on an acyclic pattern.
pub fn coefficients_from_weights(spec: &DagSpec) -> MaxLinearMatrix {
    let d = spec.node_count();
    let w = spec.weights();
    let mut edge = DenseMatrix::zeros(d, d);
    let mut diag = DenseMatrix::zeros(d, d);
    for i in 0..d {
        diag[(i, i)] = w[(i, i)];
        for k in 0..d {
            if i != k {
                edge[(i, k)] = w[(i, k)];
            }
        }
    }
    let mut a = diag.clone();
    for _ in 0..d.saturating_sub(1) {
        let step = max_times_multiply(&edge, &a).expect("square matrices");
        let mut next = diag.clone();
        for i in 0..d {
            for j in 0..d {
                let v = step[(i, j)].max(a[(i, j)]);
                if v > next[(i, j)] {
                    next[(i, j)] = v;
                }
            }
        }
        if next == a {
            break;
        }
        a = next;
    }
    MaxLinearMatrix {
        values: a,
        standardised: false,
    }
}

/// Divide each row by its Euclidean norm. Fails on a row with no
/// positive entry. The result carries the `standardised` flag.
pub fn standardize(a: &MaxLinearMatrix) -> Result<MaxLinearMatrix> {
    let d = a.dim();
    let mut out = a.values.clone();
    for i in 0..d {
        let norm = row_norm(a.row(i));
        if norm <= 0.0 {
            return Err(Error::ZeroRow(i));
        }
        for v in out.row_mut(i) {
            *v /= norm;
        }
        debug_assert!((row_norm(out.row(i)) - 1.0).abs() < 1e-12);
    }
    Ok(MaxLinearMatrix {
        values: out,
        standardised: true,
    })
}

/// Reachability DAG: every positive off-diagonal `a_ij` becomes the
/// edge `j -> i`.
pub fn reachability(a: &MaxLinearMatrix) -> Dag {
    let d = a.dim();
    let mut edges = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i != j && a.get(i, j) > 0.0 {
                edges.push((j, i));
            }
        }
    }
    Dag::new(d, edges).expect("positivity pattern validated acyclic")
}

/// Minimum max-linear DAG under hard thresholding: the edge `j -> i` is
/// kept iff its direct coefficient strictly beats every two-hop
/// composition through a common node,
/// `a_ij > max_k a_ik * a_kj / a_kk + delta`,
/// where `k` ranges over descendants of `j` that are parents of `i` in
/// the reachability pattern. Ties within `EQ_TOL` are excluded, so at
/// `delta = 0` an edge exactly attained by a composition is dropped.
pub fn minimum_dag(a: &MaxLinearMatrix, delta: f64) -> Dag {
    let d = a.dim();
    let mut edges = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i == j || a.get(i, j) <= 0.0 {
                continue;
            }
            let mut bound = 0.0f64;
            for k in 0..d {
                if k == i || k == j {
                    continue;
                }
                let (aik, akj, akk) = (a.get(i, k), a.get(k, j), a.get(k, k));
                if aik > 0.0 && akj > 0.0 && akk > 0.0 {
                    bound = bound.max(aik * akj / akk);
                }
            }
            if a.get(i, j) > bound + delta + EQ_TOL {
                edges.push((j, i));
            }
        }
    }
    Dag::new(d, edges).expect("subset of an acyclic pattern")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Chain 3 -> 2 -> 1 with an extra direct edge 3 -> 1, unit
    /// diagonal. Nodes are 0-based: 2 -> 1 -> 0 and 2 -> 0.
    fn chain_spec(c12: f64, c23: f64, c13: f64) -> DagSpec {
        let w = DenseMatrix::from_rows(vec![
            vec![1.0, c12, c13],
            vec![0.0, 1.0, c23],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        DagSpec::from_weights(w).unwrap()
    }

    #[test]
    fn chain_redundant_direct_edge() {
        // c13 <= c12 * c23: the two-hop path wins.
        let a = coefficients_from_weights(&chain_spec(0.8, 0.7, 0.3));
        assert_eq!(a.get(0, 2), 0.8 * 0.7);
    }

    #[test]
    fn chain_relevant_direct_edge() {
        let a = coefficients_from_weights(&chain_spec(0.8, 0.7, 0.9));
        assert_eq!(a.get(0, 2), 0.9);
    }

    #[test]
    fn edgeless_spec_gives_identity() {
        let spec = DagSpec::from_weights(DenseMatrix::identity_pattern(4)).unwrap();
        let a = coefficients_from_weights(&spec);
        assert_eq!(a.dense(), &DenseMatrix::identity_pattern(4));
    }

    fn random_spec(d: usize, seed: u64) -> DagSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DagSpec::random_well_ordered(d, 0.6, &mut rng)
    }

    /// Max path weight by explicit enumeration of simple paths. Products
    /// accumulate from the source end, matching the closure iteration,
    /// so equality is exact.
    fn brute_force_coefficients(spec: &DagSpec) -> DenseMatrix {
        let d = spec.node_count();
        let w = spec.weights();
        let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); d];
        for (j, i) in spec.edge_set() {
            parents_of[i].push(j);
        }
        let mut out = DenseMatrix::zeros(d, d);
        // walk forward from every source j along child edges
        for j in 0..d {
            let mut stack = vec![(j, w[(j, j)])];
            while let Some((node, weight)) = stack.pop() {
                if weight > out[(node, j)] {
                    out[(node, j)] = weight;
                }
                for i in 0..d {
                    if parents_of[i].contains(&node) {
                        stack.push((i, w[(i, node)] * weight));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn closure_matches_path_enumeration_exactly() {
        for d in 2..=5 {
            for seed in 0..20 {
                let spec = random_spec(d, seed);
                let a = coefficients_from_weights(&spec);
                let oracle = brute_force_coefficients(&spec);
                for i in 0..d {
                    for j in 0..d {
                        assert_eq!(
                            a.get(i, j),
                            oracle[(i, j)],
                            "d={d} seed={seed} entry ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn closure_is_a_fixpoint() {
        for seed in 0..10 {
            let spec = random_spec(5, seed);
            let a = coefficients_from_weights(&spec);
            let d = spec.node_count();
            let w = spec.weights();
            let mut edge = DenseMatrix::zeros(d, d);
            for i in 0..d {
                for k in 0..d {
                    if i != k {
                        edge[(i, k)] = w[(i, k)];
                    }
                }
            }
            let step = max_times_multiply(&edge, a.dense()).unwrap();
            for i in 0..d {
                for j in 0..d {
                    let again = step[(i, j)].max(a.get(i, j));
                    assert_eq!(again, a.get(i, j));
                }
            }
        }
    }

    #[test]
    fn standardize_unit_rows() {
        let a = MaxLinearMatrix::from_rows(vec![vec![3.0, 4.0], vec![0.0, 1.0]]).unwrap();
        let s = standardize(&a).unwrap();
        assert!((s.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.8).abs() < 1e-15);
        assert!(s.is_standardised());
    }

    #[test]
    fn standardize_is_idempotent() {
        let a = MaxLinearMatrix::from_rows(vec![vec![0.8, 0.26], vec![0.0, 0.43]]).unwrap();
        let once = standardize(&a).unwrap();
        let twice = standardize(&once).unwrap();
        for i in 0..2 {
            let norm: f64 = once.row(i).iter().map(|v| v * v).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
            for j in 0..2 {
                assert!((once.get(i, j) - twice.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn standardized_random_models_satisfy_column_dominance() {
        for seed in 0..30 {
            let spec = random_spec(6, seed);
            let s = standardize(&coefficients_from_weights(&spec)).unwrap();
            for j in 0..6 {
                for i in 0..6 {
                    if i != j {
                        assert!(
                            s.get(j, j) > s.get(i, j),
                            "seed={seed}: diagonal must dominate column {j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reachability_of_diagonal_is_empty() {
        let a = MaxLinearMatrix::identity(3);
        assert_eq!(reachability(&a).edge_count(), 0);
        assert_eq!(minimum_dag(&a, 0.0).edge_count(), 0);
    }

    #[test]
    fn minimum_dag_drops_tied_edge() {
        // c13 exactly redundant: after standardisation the direct
        // coefficient ties with the two-hop composition and is dropped.
        let a = standardize(&coefficients_from_weights(&chain_spec(0.8, 0.7, 0.3))).unwrap();
        let dag = minimum_dag(&a, 0.0);
        assert!(dag.has_edge(2, 1));
        assert!(dag.has_edge(1, 0));
        assert!(!dag.has_edge(2, 0));
    }

    #[test]
    fn minimum_dag_keeps_relevant_edge() {
        let a = standardize(&coefficients_from_weights(&chain_spec(0.8, 0.7, 0.9))).unwrap();
        let dag = minimum_dag(&a, 0.0);
        assert!(dag.has_edge(2, 0));
    }

    #[test]
    fn minimum_dag_is_monotone_in_delta() {
        for seed in 0..20 {
            let spec = random_spec(5, seed);
            let a = standardize(&coefficients_from_weights(&spec)).unwrap();
            let loose = minimum_dag(&a, 0.0);
            let tight = minimum_dag(&a, 10.0);
            for e in tight.edges() {
                assert!(loose.has_edge(e.0, e.1));
            }
            assert_eq!(tight.edge_count(), 0, "huge delta empties the graph");
        }
    }

    #[test]
    fn excluded_edges_are_exact_compositions() {
        for seed in 0..20 {
            let spec = random_spec(5, seed);
            let a = standardize(&coefficients_from_weights(&spec)).unwrap();
            let kept = minimum_dag(&a, 0.0);
            let reach = reachability(&a);
            for (j, i) in reach.edges() {
                if kept.has_edge(j, i) {
                    continue;
                }
                let mut bound = 0.0f64;
                for k in 0..5 {
                    if k != i && k != j && a.get(i, k) > 0.0 && a.get(k, j) > 0.0 {
                        bound = bound.max(a.get(i, k) * a.get(k, j) / a.get(k, k));
                    }
                }
                assert!(
                    (a.get(i, j) - bound).abs() <= EQ_TOL,
                    "dropped edge must be attained by a composition"
                );
            }
        }
    }

    #[test]
    fn minimum_dag_reconstruction_round_trip() {
        // Rebuilding the model on the surviving edges with ratio weights
        // reproduces the full coefficient matrix.
        for seed in 0..20 {
            let spec = random_spec(6, seed);
            let a = standardize(&coefficients_from_weights(&spec)).unwrap();
            let dag = minimum_dag(&a, 0.0);
            let d = a.dim();
            let mut w = DenseMatrix::zeros(d, d);
            for i in 0..d {
                w[(i, i)] = a.get(i, i);
            }
            for (j, i) in dag.edges() {
                w[(i, j)] = a.get(i, j) / a.get(j, j);
            }
            let rebuilt = coefficients_from_weights(&DagSpec::from_weights(w).unwrap());
            for i in 0..d {
                for j in 0..d {
                    assert!(
                        (rebuilt.get(i, j) - a.get(i, j)).abs() <= 1e-12,
                        "seed={seed} entry ({i},{j}): {} vs {}",
                        rebuilt.get(i, j),
                        a.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_cyclic_pattern() {
        let r = MaxLinearMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert!(matches!(r, Err(Error::CycleDetected)));
    }
}
