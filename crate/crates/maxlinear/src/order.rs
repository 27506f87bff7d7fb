//! Causal-order discovery from max-projection scalings.
//!
//! Each iteration scores every unordered candidate column `j` by how
//! far the observed rescaling gap falls short of the `(a^2 - 1)`
//! benchmark that characterises nodes with no unordered ancestors. The
//! benchmark shortfall is zero exactly for the "ready" nodes, so the
//! columns whose minima sit within a relative tolerance of the best one
//! are selected together and prepended to the order. Sources are found
//! first and end up at the back of the final order, which therefore
//! lists every node before all of its ancestors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{MaxProjection, ScalingSource};

/// Candidate-selection matrix for one iteration: finite shortfall
/// entries on unordered pairs, `+inf` on ordered rows/columns and the
/// diagonal.
#[derive(Debug, Clone)]
pub struct DeltaMatrix {
    d: usize,
    values: Vec<f64>,
}

impl DeltaMatrix {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    /// Minimum finite entry of column `j`, `+inf` if none.
    pub fn column_min(&self, j: usize) -> f64 {
        (0..self.d)
            .map(|i| self.entry(i, j))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Fill the selection matrix for the current ordered set. Entries are
/// `sigma^2(i, a j, a O) - sigma^2(i, j, O) - (a^2 - 1) sigma^2({j} u O)`
/// for unordered `i != j`; the theoretical value is never positive and
/// vanishes for every `i` exactly when `j` has no unordered ancestors.
pub fn delta_matrix<S: ScalingSource>(
    source: &S,
    ordered: &[usize],
    a: f64,
) -> Result<DeltaMatrix> {
    let d = source.dim();
    if ordered.len() >= d {
        return Err(Error::InvalidDescriptor(
            "all nodes already ordered".into(),
        ));
    }
    let mut in_order = vec![false; d];
    for &o in ordered {
        in_order[o] = true;
    }
    let mut values = vec![f64::INFINITY; d * d];
    for j in 0..d {
        if in_order[j] {
            continue;
        }
        let sigma2_jo = source.scaling(&MaxProjection::set(
            std::iter::once(j).chain(ordered.iter().copied()),
        )?)?;
        for i in 0..d {
            if i == j || in_order[i] {
                continue;
            }
            values[i * d + j] = source.delta_entry(i, j, ordered, a, sigma2_jo)?;
        }
    }
    Ok(DeltaMatrix { d, values })
}

/// Outcome of one selection step, kept for diagnostic logging.
#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    /// Ordered set at the start of the iteration.
    pub ordered: Vec<usize>,
    /// Benchmark shortfall per column (`None` for ordered columns).
    pub delta: Vec<Option<f64>>,
    /// Selection tolerance for this iteration.
    pub epsilon: f64,
    /// Nodes selected, in selection order.
    pub selected: Vec<usize>,
}

/// Nodes selected in one iteration: all unordered columns whose minimum
/// sits within `epsilon * |best|` of the best column minimum, sorted
/// closest-to-best first with ties broken by node index. Guaranteed
/// nonempty: when nothing qualifies (degenerate estimates) the single
/// best column is taken.
pub fn select_step(delta: &DeltaMatrix, ordered: &[usize], epsilon: f64) -> Vec<usize> {
    let d = delta.dim();
    let mut in_order = vec![false; d];
    for &o in ordered {
        in_order[o] = true;
    }
    let unordered: Vec<usize> = (0..d).filter(|&j| !in_order[j]).collect();
    if unordered.len() == 1 {
        return unordered;
    }
    let colmin: Vec<(usize, f64)> = unordered
        .iter()
        .map(|&j| (j, delta.column_min(j)))
        .collect();
    let best = colmin
        .iter()
        .map(|&(_, v)| v)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        // no usable entry at all; fall back to the smallest index
        return vec![unordered[0]];
    }
    let tol = epsilon * best.abs();
    let mut selected: Vec<(usize, f64)> = colmin
        .iter()
        .copied()
        .filter(|&(_, v)| v.is_finite() && (v - best).abs() <= tol)
        .collect();
    if selected.is_empty() {
        // numerically possible only with pathological estimates; take
        // the most source-like column
        let argmax = colmin
            .iter()
            .copied()
            .filter(|&(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(j, _)| j)
            .unwrap_or(unordered[0]);
        return vec![argmax];
    }
    selected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    selected.into_iter().map(|(j, _)| j).collect()
}

/// Parameters a causal order was computed with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderParams {
    pub a: f64,
    pub epsilon: f64,
    /// Exceedance count for empirical sources; `None` for the exact oracle.
    pub k: Option<usize>,
}

/// A discovered causal order together with its iteration grouping.
/// `order` lists every node before all of its ancestors; `steps` holds
/// the iteration groups in discovery sequence, sources first, so
/// concatenating the groups in reverse reproduces `order`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderResult {
    pub order: Vec<usize>,
    pub steps: Vec<Vec<usize>>,
    pub params: OrderParams,
}

impl OrderResult {
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Position of each node in `order`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0usize; self.order.len()];
        for (p, &node) in self.order.iter().enumerate() {
            pos[node] = p;
        }
        pos
    }

    /// Discovery step index of each node (0 = first step, sources).
    pub fn step_of(&self) -> Vec<usize> {
        let mut step = vec![0usize; self.order.len()];
        for (s, group) in self.steps.iter().enumerate() {
            for &node in group {
                step[node] = s;
            }
        }
        step
    }
}

/// Iterate selection until every node is ordered, prepending each
/// selected group. Runs at most `d` iterations.
pub fn causal_order<S: ScalingSource>(source: &S, a: f64, epsilon: f64) -> Result<OrderResult> {
    causal_order_traced(source, a, epsilon, None).map(|(r, _)| r)
}

/// As [`causal_order`], optionally collecting per-iteration traces.
pub fn causal_order_traced<S: ScalingSource>(
    source: &S,
    a: f64,
    epsilon: f64,
    k: Option<usize>,
) -> Result<(OrderResult, Vec<IterationTrace>)> {
    if !(a > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "scale factor a = {a} must exceed 1"
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon = {epsilon} must be nonnegative"
        )));
    }
    let d = source.dim();
    let mut order: Vec<usize> = Vec::with_capacity(d);
    let mut steps: Vec<Vec<usize>> = Vec::new();
    let mut traces = Vec::new();
    while order.len() < d {
        let selected;
        if order.len() + 1 == d {
            let last = (0..d).find(|n| !order.contains(n)).expect("one node left");
            traces.push(IterationTrace {
                ordered: order.clone(),
                delta: (0..d)
                    .map(|j| if j == last { Some(0.0) } else { None })
                    .collect(),
                epsilon: 0.0,
                selected: vec![last],
            });
            selected = vec![last];
        } else {
            let delta = delta_matrix(source, &order, a)?;
            selected = select_step(&delta, &order, epsilon);
            let best = (0..d)
                .filter(|j| !order.contains(j))
                .map(|j| delta.column_min(j))
                .filter(|v| v.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            traces.push(IterationTrace {
                ordered: order.clone(),
                delta: (0..d)
                    .map(|j| {
                        let v = delta.column_min(j);
                        v.is_finite().then(|| v - best)
                    })
                    .collect(),
                epsilon: if best.is_finite() {
                    epsilon * best.abs()
                } else {
                    0.0
                },
                selected: selected.clone(),
            });
        }
        debug_assert!(!selected.is_empty(), "selection must be nonempty");
        steps.push(selected.clone());
        let mut next = selected;
        next.extend(order.iter().copied());
        order = next;
    }
    Ok((
        OrderResult {
            order,
            steps,
            params: OrderParams { a, epsilon, k },
        },
        traces,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::graph::DagSpec;
    use crate::model::RmlmModel;
    use crate::tropical::MaxLinearMatrix;

    /// Four-node fixture: sources 3 and 4 feed 2; 2, 3 and 4 feed 1
    /// (1-based labels; 0-based edges below).
    fn four_node_model() -> RmlmModel {
        let w = DenseMatrix::from_rows(vec![
            vec![1.0, 0.50, 0.60, 0.70],
            vec![0.0, 1.00, 0.55, 0.65],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        RmlmModel::from_spec(&DagSpec::from_weights(w).unwrap(), 1).unwrap()
    }

    #[test]
    fn four_node_first_iteration_identifies_sources() {
        let model = four_node_model();
        let s = model.scalings();
        let delta = delta_matrix(&s, &[], 1.3).unwrap();
        // source columns are exactly zero, the rest strictly negative
        for j in [2usize, 3] {
            assert_eq!(delta.column_min(j), 0.0, "source column {j}");
        }
        for j in [0usize, 1] {
            assert!(delta.column_min(j) < -1e-6, "non-source column {j}");
        }
        assert_eq!(delta.entry(0, 0), f64::INFINITY);
    }

    #[test]
    fn four_node_second_iteration_separates_middle() {
        let model = four_node_model();
        let s = model.scalings();
        let delta = delta_matrix(&s, &[2, 3], 1.3).unwrap();
        assert_eq!(delta.column_min(1), 0.0, "node 2 is ready");
        assert!(delta.column_min(0) < -1e-6, "node 1 still has ancestors");
    }

    #[test]
    fn four_node_order_for_several_scale_factors() {
        let model = four_node_model();
        for a in [1.1, 1.3, 2.0] {
            let result = causal_order(&model.scalings(), a, 0.0).unwrap();
            assert_eq!(result.steps, vec![vec![2, 3], vec![1], vec![0]]);
            assert_eq!(result.order, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn diagonal_model_selected_in_one_step() {
        let model = RmlmModel::new(MaxLinearMatrix::identity(4), 0).unwrap();
        let result = causal_order(&model.scalings(), 1.3, 0.1).unwrap();
        assert_eq!(result.steps.len(), 1);
        assert_eq!(result.steps[0], vec![0, 1, 2, 3]);
    }

    #[test]
    fn exact_orders_are_valid_on_random_models() {
        let mut valid = 0;
        for seed in 0..200 {
            let model = RmlmModel::random(6, 0.5, seed).unwrap();
            let result = causal_order(&model.scalings(), 1.3, 0.1).unwrap();
            let dag = crate::tropical::reachability(model.matrix());
            if dag.is_valid_causal_order(&result.order) {
                valid += 1;
            }
            // step groups partition the nodes
            let mut all: Vec<usize> = result.steps.concat();
            all.sort_unstable();
            assert_eq!(all, (0..6).collect::<Vec<_>>());
            // reverse concatenation reproduces the order
            let rebuilt: Vec<usize> = result.steps.iter().rev().flatten().copied().collect();
            assert_eq!(rebuilt, result.order);
        }
        assert_eq!(valid, 200, "exact scalings must always yield valid orders");
    }

    #[test]
    fn same_step_nodes_are_mutually_non_ancestral() {
        for seed in 0..50 {
            let model = RmlmModel::random(6, 0.5, seed).unwrap();
            let result = causal_order(&model.scalings(), 1.3, 0.1).unwrap();
            let ancestors = model.ancestor_sets();
            for group in &result.steps {
                for &x in group {
                    for &y in group {
                        assert!(x == y || !ancestors[x].contains(&y));
                    }
                }
            }
        }
    }

    #[test]
    fn node_enters_exactly_when_ancestors_ordered() {
        for seed in 0..50 {
            let model = RmlmModel::random(6, 0.5, seed).unwrap();
            let result = causal_order(&model.scalings(), 1.3, 0.1).unwrap();
            let ancestors = model.ancestor_sets();
            let mut ordered: Vec<usize> = Vec::new();
            for group in &result.steps {
                for node in 0..6 {
                    let ready = ancestors[node].iter().all(|a| ordered.contains(a));
                    let selected = group.contains(&node);
                    if !ordered.contains(&node) {
                        assert_eq!(
                            selected, ready,
                            "seed {seed}: node {node} selected iff ready"
                        );
                    }
                }
                ordered.extend(group.iter().copied());
            }
        }
    }

    #[test]
    fn common_rescaling_leaves_selection_invariant() {
        struct Scaled<'a, S>(&'a S, f64);
        impl<S: ScalingSource> ScalingSource for Scaled<'_, S> {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn scaling(&self, p: &MaxProjection) -> Result<f64> {
                self.0.scaling(p).map(|v| v * self.1)
            }
            fn delta_entry(
                &self,
                i: usize,
                j: usize,
                ordered: &[usize],
                a: f64,
                sigma2_jo: f64,
            ) -> Result<f64> {
                self.0
                    .delta_entry(i, j, ordered, a, sigma2_jo / self.1)
                    .map(|v| v * self.1)
            }
        }
        let model = RmlmModel::random(5, 0.5, 77).unwrap();
        let base = causal_order(&model.scalings(), 1.3, 0.1).unwrap();
        let scaled_src = Scaled(&model.scalings(), 37.5);
        let scaled = causal_order(&scaled_src, 1.3, 0.1).unwrap();
        assert_eq!(base.steps, scaled.steps);
    }

    #[test]
    fn permutation_equivariance_of_steps() {
        let mut rng_seed = 0u64;
        for seed in 0..20 {
            rng_seed += 1;
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(900 + rng_seed);
            let mut perm: Vec<usize> = (0..5).collect();
            perm.shuffle(&mut rng);

            let mut inner = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let spec = DagSpec::random_well_ordered(5, 0.5, &mut inner);
            let base_model = RmlmModel::from_spec(&spec, 0).unwrap();
            let perm_model = RmlmModel::from_spec(&spec.relabel(&perm).unwrap(), 0).unwrap();

            let base = causal_order(&base_model.scalings(), 1.3, 0.1).unwrap();
            let permuted = causal_order(&perm_model.scalings(), 1.3, 0.1).unwrap();
            assert_eq!(base.steps.len(), permuted.steps.len());
            for (g1, g2) in base.steps.iter().zip(&permuted.steps) {
                let mapped: std::collections::BTreeSet<usize> =
                    g1.iter().map(|&n| perm[n]).collect();
                let got: std::collections::BTreeSet<usize> = g2.iter().copied().collect();
                assert_eq!(mapped, got);
            }
        }
    }
}
