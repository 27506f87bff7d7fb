//! Recovery of the squared coefficient matrix from suffix-set scalings.
//!
//! With nodes relabelled so the discovered order is the well-ordering,
//! the coefficient matrix is upper triangular and every squared entry
//! is a signed combination of the `d(d+1)/2` scalings of the suffix
//! max-projections. Two equivalent routes are shipped: a row-wise
//! recursion and a single sparse `{-1,0,1}` matrix applied to the
//! scaling vector. The linear route is the default; the recursion is
//! its cross-check.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::order::OrderResult;
use crate::projection::{MaxProjection, ScalingSource};
use crate::tail;
use crate::tropical::{minimum_dag, MaxLinearMatrix};

/// Length of the row-wise upper-triangular vectorisation.
pub fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)`, `i <= j` (0-based), in the row-wise
/// upper-triangular vectorisation.
pub fn tri_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < d);
    i * d - i * (i + 1) / 2 + j
}

/// The suffix-set scaling vector: for each row `i` the scalings of
/// `{i, i+1..d}, {i, i+2..d}, ..., {i, d}, {i}` in that order, so the
/// entry at `tri_index(d, i, j)` is the scaling of `{i} u {j+1..d}`
/// (the singleton `{i}` when `j` is the last node).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector {
    d: usize,
    values: Vec<f64>,
}

impl ScalingVector {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != tri_len(d) {
            return Err(Error::DimensionMismatch(format!(
                "scaling vector for {d} nodes needs {} entries, got {}",
                tri_len(d),
                values.len()
            )));
        }
        Ok(ScalingVector { d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[tri_index(self.d, i, j)]
    }
}

/// Row-wise vectorised squared coefficients of an upper-triangular
/// matrix; entries may be negative when recovered from noisy scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredCoefficients {
    d: usize,
    values: Vec<f64>,
}

impl SquaredCoefficients {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != tri_len(d) {
            return Err(Error::DimensionMismatch(format!(
                "squared coefficient vector for {d} nodes needs {} entries, got {}",
                tri_len(d),
                values.len()
            )));
        }
        Ok(SquaredCoefficients { d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[tri_index(self.d, i, j)]
    }
}

/// Evaluate every suffix-set scaling under the relabelling induced by
/// the discovered order: position `p` in the order becomes label `p`.
pub fn build_scaling_vector<S: ScalingSource>(
    source: &S,
    order: &OrderResult,
) -> Result<ScalingVector> {
    let d = order.dim();
    if source.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "source has {} components, order has {d}",
            source.dim()
        )));
    }
    let mut values = vec![0.0; tri_len(d)];
    for i in 0..d {
        for j in i..d {
            let p = suffix_projection(&order.order, i, j)?;
            values[tri_index(d, i, j)] = source.scaling(&p)?;
        }
    }
    ScalingVector::new(d, values)
}

/// Scaling vectors for several exceedance counts at once, sharing the
/// polar decompositions. Entry-for-entry identical to calling
/// [`build_scaling_vector`] with each count separately.
pub fn build_scaling_vector_grid(
    data: &DenseMatrix,
    ks: &[usize],
    order: &OrderResult,
) -> Result<Vec<ScalingVector>> {
    let d = order.dim();
    if data.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, order has {d}",
            data.ncols()
        )));
    }
    let mut grids: Vec<Vec<f64>> = vec![vec![0.0; tri_len(d)]; ks.len()];
    for i in 0..d {
        for j in i..d {
            let p = suffix_projection(&order.order, i, j)?;
            let estimates = tail::estimate_scaling_grid(data, ks, &p)?;
            for (g, v) in estimates.into_iter().enumerate() {
                grids[g][tri_index(d, i, j)] = v;
            }
        }
    }
    grids
        .into_iter()
        .map(|values| ScalingVector::new(d, values))
        .collect()
}

/// The projection `{i} u {j+1..d}` in relabelled coordinates, mapped
/// back to original node labels.
fn suffix_projection(order: &[usize], i: usize, j: usize) -> Result<MaxProjection> {
    let d = order.len();
    let nodes = std::iter::once(order[i]).chain(((j + 1)..d).map(|q| order[q]));
    MaxProjection::set(nodes)
}

/// Row-wise recursion recovering the squared coefficients:
/// diagonals are consecutive suffix differences, off-diagonals subtract
/// the already-recovered prefix of their row, and the last column
/// closes each row against the single-node scaling.
pub fn recover_squared_recursive(s: &ScalingVector) -> SquaredCoefficients {
    let d = s.dim();
    let mut a2 = vec![0.0; tri_len(d)];
    let idx = |i: usize, j: usize| tri_index(d, i, j);
    a2[idx(d - 1, d - 1)] = s.get(d - 1, d - 1);
    for i in 0..d.saturating_sub(1) {
        a2[idx(i, i)] = s.get(i, i) - s.get(i + 1, i + 1);
        for j in (i + 1)..(d - 1) {
            let consumed: f64 = (i..j).map(|k| a2[idx(i, k)]).sum();
            a2[idx(i, j)] = s.get(i, j) - s.get(j + 1, j + 1) - consumed;
        }
        let consumed: f64 = (i..(d - 1)).map(|k| a2[idx(i, k)]).sum();
        a2[idx(i, d - 1)] = s.get(i, d - 1) - consumed;
    }
    SquaredCoefficients { d, values: a2 }
}

/// The sparse `{-1, 0, 1}` matrix mapping the scaling vector to the
/// squared coefficient vector; at most four nonzero entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    d: usize,
    values: Vec<f64>,
}

impl TransformMatrix {
    pub fn build(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidConfig(format!(
                "transform matrix needs at least 2 nodes, got {d}"
            )));
        }
        let k = tri_len(d);
        let mut values = vec![0.0; k * k];
        let idx = |i: usize, j: usize| tri_index(d, i, j);
        let mut set = |row: usize, col: usize, v: f64| values[row * k + col] = v;
        // diagonal entries: consecutive suffix difference
        for i in 0..(d - 1) {
            set(idx(i, i), idx(i, i), 1.0);
            set(idx(i, i), idx(i + 1, i + 1), -1.0);
        }
        set(idx(d - 1, d - 1), idx(d - 1, d - 1), 1.0);
        // interior off-diagonal entries
        for i in 0..(d - 1) {
            for j in (i + 1)..(d - 1) {
                set(idx(i, j), idx(i, j), 1.0);
                set(idx(i, j), idx(j + 1, j + 1), -1.0);
                set(idx(i, j), idx(i, j - 1), -1.0);
                set(idx(i, j), idx(j, j), 1.0);
            }
        }
        // last column closes each row
        for i in 0..(d - 1) {
            set(idx(i, d - 1), idx(i, d - 1), 1.0);
            set(idx(i, d - 1), idx(i, d - 2), -1.0);
            set(idx(i, d - 1), idx(d - 1, d - 1), 1.0);
        }
        Ok(TransformMatrix { d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        tri_len(self.d)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side() + col]
    }
}

/// Single matrix-vector product `A^2 = T S`.
pub fn recover_squared_linear(
    s: &ScalingVector,
    t: &TransformMatrix,
) -> Result<SquaredCoefficients> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch(format!(
            "scaling vector is for {} nodes, transform for {}",
            s.dim(),
            t.dim()
        )));
    }
    let k = t.side();
    let mut values = vec![0.0; k];
    for (row, out) in values.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (col, sv) in s.values().iter().enumerate() {
            let tv = t.values[row * k + col];
            if tv != 0.0 {
                acc += tv * sv;
            }
        }
        *out = acc;
    }
    Ok(SquaredCoefficients {
        d: s.dim(),
        values,
    })
}

/// Rows replaced because their recovered diagonal was nonpositive.
#[derive(Debug, Clone, Default)]
pub struct PostprocessReport {
    /// Original node labels of degenerate rows.
    pub degenerate_rows: Vec<usize>,
}

/// Turn recovered squared coefficients into a standardised matrix in
/// the original labelling:
/// 1. zero every entry forbidden by the order (pairs discovered in the
///    same step cannot be causally related);
/// 2. clamp negatives to zero; squared entries at or below the
///    equality tolerance are treated as exact zeros, so coefficients
///    that vanish in exact arithmetic do not resurface as square roots
///    of rounding residue;
/// 3. take square roots;
/// 4. renormalise each row to unit Euclidean norm;
/// 5. relabel back to the original node labels.
/// A row whose diagonal estimate is nonpositive cannot represent a
/// node with its own innovation; it is replaced by the unit diagonal
/// row and reported.
pub fn postprocess(
    a2: &SquaredCoefficients,
    order: &OrderResult,
) -> Result<(MaxLinearMatrix, PostprocessReport)> {
    let d = order.dim();
    if a2.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "coefficients are for {} nodes, order for {d}",
            a2.dim()
        )));
    }
    let step_of = order.step_of();
    let step_rel: Vec<usize> = order.order.iter().map(|&n| step_of[n]).collect();
    let mut report = PostprocessReport::default();
    let mut rel = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut v = a2.get(i, j);
            if i != j && step_rel[i] == step_rel[j] {
                v = 0.0;
            }
            if v <= crate::tropical::EQ_TOL {
                v = 0.0;
            }
            rel[(i, j)] = v.sqrt();
        }
        if rel[(i, i)] <= 0.0 {
            report.degenerate_rows.push(order.order[i]);
            for j in 0..d {
                rel[(i, j)] = if j == i { 1.0 } else { 0.0 };
            }
        }
        let norm = rel.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in rel.row_mut(i) {
            *v /= norm;
        }
    }
    let mut original = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            original[(order.order[i], order.order[j])] = rel[(i, j)];
        }
    }
    report.degenerate_rows.sort_unstable();
    let matrix = MaxLinearMatrix::from_dense(original)?.assume_standardised()?;
    Ok((matrix, report))
}

/// Thresholded reachability DAG of a postprocessed matrix.
pub fn estimated_dag(a: &MaxLinearMatrix, delta: f64) -> Dag {
    minimum_dag(a, delta)
}
