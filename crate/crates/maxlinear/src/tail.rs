//! Empirical tail machinery: rank-based Frechet margins, polar
//! decomposition, order-statistic thresholding and scaling estimators.
//!
//! All estimators share the same normalisation convention: a scaling
//! over a subvector of dimension `m` is `m` times the mean of the
//! squared projection functional over the `k` largest radii, because
//! the angular measure of a standardised `m`-margin has total mass `m`.
//! Sums run in ascending row order so results do not depend on how the
//! selection was computed.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::projection::{MaxProjection, ScalingSource};

/// One observation in polar coordinates over some coordinate subset.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSample {
    radius: f64,
    angle: Vec<f64>,
}

impl AngularSample {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn angle(&self) -> &[f64] {
        &self.angle
    }
}

/// Polar decomposition of the rows of a sample restricted to a subset
/// of coordinates. Rows whose restriction is identically zero have no
/// angle; they are dropped and counted.
#[derive(Debug, Clone)]
pub struct PolarSamples {
    samples: Vec<AngularSample>,
    zero_rows: usize,
}

impl PolarSamples {
    pub fn samples(&self) -> &[AngularSample] {
        &self.samples
    }

    pub fn zero_rows(&self) -> usize {
        self.zero_rows
    }
}

/// Radius and unit angle of every row of `sample` restricted to
/// `subset` (sorted, 0-based coordinate indices).
pub fn polar(sample: &DenseMatrix, subset: &[usize]) -> Result<PolarSamples> {
    if subset.is_empty() {
        return Err(Error::InvalidDescriptor("empty coordinate subset".into()));
    }
    for &c in subset {
        if c >= sample.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "coordinate {c} out of range for {} columns",
                sample.ncols()
            )));
        }
    }
    let mut samples = Vec::with_capacity(sample.nrows());
    let mut zero_rows = 0;
    for r in 0..sample.nrows() {
        let row = sample.row(r);
        let radius = subset
            .iter()
            .map(|&c| row[c] * row[c])
            .sum::<f64>()
            .sqrt();
        if radius > 0.0 {
            samples.push(AngularSample {
                radius,
                angle: subset.iter().map(|&c| row[c] / radius).collect(),
            });
        } else {
            zero_rows += 1;
        }
    }
    Ok(PolarSamples { samples, zero_rows })
}

/// The `k` retained observations: indices into the sample list whose
/// radii are the `k` largest. Ties at the threshold are broken by list
/// position, earlier entries winning, so exactly `k` are selected.
#[derive(Debug, Clone)]
pub struct ExceedanceSet {
    k: usize,
    threshold: f64,
    selected: Vec<usize>,
}

impl ExceedanceSet {
    pub fn k(&self) -> usize {
        self.k
    }

    /// The k-th largest radius.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Selected indices in ascending order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }
}

pub fn exceedances(samples: &[AngularSample], k: usize) -> Result<ExceedanceSet> {
    let order = selection_order(samples, k)?;
    let mut selected = order;
    selected.sort_unstable();
    let threshold = selected
        .iter()
        .map(|&p| samples[p].radius)
        .fold(f64::INFINITY, f64::min);
    Ok(ExceedanceSet {
        k,
        threshold,
        selected,
    })
}

/// Indices of the `k` largest radii in descending-radius order, ties
/// broken by ascending position. This is also the canonical summation
/// order of every estimator, so estimates do not depend on the row
/// arrangement of the input as long as radii are distinct.
fn selection_order(samples: &[AngularSample], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > samples.len() {
        return Err(Error::InsufficientData {
            needed: k.max(1),
            available: samples.len(),
        });
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let rank = |&p: &usize| (std::cmp::Reverse(ordered(samples[p].radius)), p);
    if k < samples.len() {
        order.select_nth_unstable_by_key(k - 1, rank);
        order.truncate(k);
    }
    order.sort_unstable_by_key(rank);
    Ok(order)
}

fn ordered(v: f64) -> ordered_key::OrderedF64 {
    ordered_key::OrderedF64(v)
}

mod ordered_key {
    /// Total order on radii; radii are finite and nonnegative here, so
    /// plain bit-level comparison through `total_cmp` suffices.
    #[derive(PartialEq)]
    pub struct OrderedF64(pub f64);

    impl Eq for OrderedF64 {}

    impl PartialOrd for OrderedF64 {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for OrderedF64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

/// Empirical angular moment: `m/k` times the sum of `f` over the angles
/// of the `k` largest radii, where `m` is the angle dimension. The sum
/// runs in descending-radius order.
pub fn empirical_moment(
    samples: &[AngularSample],
    k: usize,
    f: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let order = selection_order(samples, k)?;
    let m = samples
        .first()
        .map(|s| s.angle.len())
        .unwrap_or_default();
    let sum: f64 = order.iter().map(|&p| f(samples[p].angle())).sum();
    Ok(m as f64 * sum / k as f64)
}

/// Empirical squared scaling of a max-projection: polar-decompose the
/// involved coordinates, keep the `k` largest radii and average the
/// squared projection functional, scaled by the subvector dimension.
pub fn estimate_scaling(
    sample: &DenseMatrix,
    k: usize,
    projection: &MaxProjection,
) -> Result<f64> {
    let coords = projection.involved();
    let pol = polar(sample, &coords)?;
    if pol.samples().len() < k {
        return Err(Error::InsufficientData {
            needed: k,
            available: pol.samples().len(),
        });
    }
    let f = projection.functional(&coords);
    empirical_moment(pol.samples(), k, f)
}

/// Scaling estimates for several exceedance counts at once, sharing the
/// polar decomposition. Each entry is numerically identical to the
/// corresponding single [`estimate_scaling`] call.
pub fn estimate_scaling_grid(
    sample: &DenseMatrix,
    ks: &[usize],
    projection: &MaxProjection,
) -> Result<Vec<f64>> {
    let coords = projection.involved();
    let pol = polar(sample, &coords)?;
    let samples = pol.samples();
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if samples.len() < max_k || max_k == 0 {
        return Err(Error::InsufficientData {
            needed: max_k.max(1),
            available: samples.len(),
        });
    }
    // rank all rows once: descending radius, ties by position
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_unstable_by_key(|&p| (std::cmp::Reverse(ordered(samples[p].radius)), p));
    let f = projection.functional(&coords);
    let m = coords.len() as f64;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let sum: f64 = order[..k].iter().map(|&p| f(samples[p].angle())).sum();
        out.push(m * sum / k as f64);
    }
    Ok(out)
}

/// Rank-based transform to standard Frechet(2) pseudo-observations,
/// columnwise: `x -> (-ln(rank_weak / (n + 1)))^(-1/2)` where
/// `rank_weak` counts entries `<=` the value, so tied raw values map to
/// identical outputs. Rejects constant columns.
pub fn frechet_transform(raw: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, d) = (raw.nrows(), raw.ncols());
    if n < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 rows to rank-transform, got {n}"
        )));
    }
    let mut out = DenseMatrix::zeros(n, d);
    let denom = (n + 1) as f64;
    let mut column = Vec::with_capacity(n);
    for c in 0..d {
        column.clear();
        for r in 0..n {
            let v = raw.row(r)[c];
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite value at row {r}, column {c}"
                )));
            }
            column.push(v);
        }
        let mut sorted = column.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        if sorted[0] == sorted[n - 1] {
            return Err(Error::ConstantColumn(c));
        }
        for r in 0..n {
            let v = column[r];
            let count = sorted.partition_point(|&x| x <= v);
            out.row_mut(r)[c] = (-(count as f64 / denom).ln()).powf(-0.5);
        }
    }
    Ok(out)
}

/// Scaling source backed by observed data and a fixed exceedance count.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalScalings<'a> {
    data: &'a DenseMatrix,
    k: usize,
}

impl<'a> EmpiricalScalings<'a> {
    pub fn new(data: &'a DenseMatrix, k: usize) -> Result<Self> {
        if k == 0 || k > data.nrows() {
            return Err(Error::InsufficientData {
                needed: k.max(1),
                available: data.nrows(),
            });
        }
        Ok(EmpiricalScalings { data, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl ScalingSource for EmpiricalScalings<'_> {
    fn dim(&self) -> usize {
        self.data.ncols()
    }

    fn scaling(&self, projection: &MaxProjection) -> Result<f64> {
        estimate_scaling(self.data, self.k, projection)
    }

    /// Shares one polar decomposition between the rescaled and the
    /// plain projection, which dominate the cost of an entry.
    fn delta_entry(
        &self,
        i: usize,
        j: usize,
        ordered_set: &[usize],
        a: f64,
        sigma2_jo: f64,
    ) -> Result<f64> {
        let rescaled = MaxProjection::scaled(i, j, ordered_set.iter().copied(), a)?;
        let plain = MaxProjection::scaled(i, j, ordered_set.iter().copied(), 1.0)?;
        let coords = rescaled.involved();
        let pol = polar(self.data, &coords)?;
        if pol.samples().len() < self.k {
            return Err(Error::InsufficientData {
                needed: self.k,
                available: pol.samples().len(),
            });
        }
        let order = selection_order(pol.samples(), self.k)?;
        let fr = rescaled.functional(&coords);
        let fp = plain.functional(&coords);
        let (mut sum_r, mut sum_p) = (0.0, 0.0);
        for &p in order.iter() {
            let angle = pol.samples()[p].angle();
            sum_r += fr(angle);
            sum_p += fp(angle);
        }
        let m = coords.len() as f64;
        let k = self.k as f64;
        Ok(m * sum_r / k - m * sum_p / k - (a * a - 1.0) * sigma2_jo)
    }
}
