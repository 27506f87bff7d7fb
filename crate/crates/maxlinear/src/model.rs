//! Generative recursive max-linear model with tail index 2 and the
//! exact scaling oracle derived from its discrete angular measure.
//!
//! The model is `X = A xmax Z` for a standardised coefficient matrix
//! `A` and innovations with independent standard Frechet(2) components.
//! Its angular measure is discrete with one atom per column of `A`,
//! which makes every max-projection scaling available in closed form;
//! those closed forms are the oracle every estimator in this crate is
//! validated against.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::DagSpec;
use crate::projection::{MaxProjection, ScalingSource};
use crate::tropical::{coefficients_from_weights, standardize, MaxLinearMatrix};

/// Fixed tail index: innovations are standard Frechet with this alpha
/// and every scaling below is a *squared* scaling.
pub const ALPHA: f64 = 2.0;

/// A standardised recursive max-linear model plus the seed of its
/// simulation stream.
#[derive(Debug, Clone)]
pub struct RmlmModel {
    matrix: MaxLinearMatrix,
    seed: u64,
}

impl RmlmModel {
    /// Requires a standardised matrix satisfying both standardisation
    /// properties: unit row norms and strict column diagonal dominance.
    pub fn new(matrix: MaxLinearMatrix, seed: u64) -> Result<Self> {
        if !matrix.is_standardised() {
            return Err(Error::InvalidModel(
                "model requires a standardised coefficient matrix".into(),
            ));
        }
        let d = matrix.dim();
        for i in 0..d {
            let norm: f64 = matrix.row(i).iter().map(|v| v * v).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "row {i} has squared norm {norm}, expected 1"
                )));
            }
        }
        for j in 0..d {
            for i in 0..d {
                if i != j && matrix.get(i, j) >= matrix.get(j, j) {
                    return Err(Error::InvalidModel(format!(
                        "diagonal entry a[{j}][{j}] must strictly dominate column {j}"
                    )));
                }
            }
        }
        Ok(RmlmModel { matrix, seed })
    }

    /// Convenience constructor: path weights from a specification,
    /// standardised.
    pub fn from_spec(spec: &DagSpec, seed: u64) -> Result<Self> {
        let a = standardize(&coefficients_from_weights(spec))?;
        RmlmModel::new(a, seed)
    }

    /// Random well-ordered model; the workhorse of the oracle suites.
    pub fn random(d: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = DagSpec::random_well_ordered(d, edge_prob, &mut rng);
        RmlmModel::from_spec(&spec, seed)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &MaxLinearMatrix {
        &self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scalings(&self) -> ExactScalings<'_> {
        ExactScalings { a: &self.matrix }
    }

    /// Ancestors of each node under the positivity pattern of `A`.
    pub fn ancestor_sets(&self) -> Vec<BTreeSet<usize>> {
        self.matrix.ancestor_sets()
    }

    /// `n` independent rows of `A xmax Z`. Each row draws its
    /// innovations from its own counter-indexed stream of the seeded
    /// generator, so the output is reproducible for a fixed seed and
    /// independent of how rows would be partitioned across threads.
    pub fn simulate(&self, n: usize) -> DenseMatrix {
        self.simulate_with_innovations(n).0
    }

    /// As [`simulate`], also returning the innovation matrix `Z`.
    ///
    /// [`simulate`]: RmlmModel::simulate
    pub fn simulate_with_innovations(&self, n: usize) -> (DenseMatrix, DenseMatrix) {
        let d = self.dim();
        let mut x = DenseMatrix::zeros(n, d);
        let mut z = DenseMatrix::zeros(n, d);
        for row in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(row as u64);
            let zr = z.row_mut(row);
            for v in zr.iter_mut() {
                *v = standard_frechet(rng.gen::<f64>());
            }
            let xr = x.row_mut(row);
            for i in 0..d {
                let mut best = 0.0f64;
                for (j, &zj) in z.row(row).iter().enumerate() {
                    let v = self.matrix.get(i, j) * zj;
                    if v > best {
                        best = v;
                    }
                }
                xr[i] = best;
            }
        }
        (x, z)
    }

    pub fn angular_atoms(&self) -> AngularAtomSet {
        angular_atoms(&self.matrix)
    }

    pub fn exact_scaling(&self, projection: &MaxProjection) -> Result<f64> {
        self.scalings().scaling(projection)
    }
}

/// Inverse CDF of the standard Frechet(2) law: `(-ln u)^(-1/2)`.
fn standard_frechet(u: f64) -> f64 {
    (-u.ln()).powf(-0.5)
}

/// Discrete angular measure: one atom per positive column of the
/// coefficient matrix, with mass the squared column norm.
#[derive(Debug, Clone)]
pub struct AngularAtomSet {
    atoms: Vec<(Vec<f64>, f64)>,
}

impl AngularAtomSet {
    /// `(unit vector, weight)` pairs in column order.
    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Moment of an angle functional under the (non-normalised) angular
    /// measure: the weighted sum of `f` over the atoms. This is the
    /// definition-level route against which the closed-form scalings
    /// are checked.
    pub fn moment(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms.iter().map(|(atom, w)| w * f(atom)).sum()
    }
}

/// Atoms `a_k / |a_k|` with weights `|a_k|^2` for every nonzero column.
/// Accepts unstandardised matrices; the total mass equals the dimension
/// only in the standardised case.
pub fn angular_atoms(a: &MaxLinearMatrix) -> AngularAtomSet {
    let d = a.dim();
    let mut atoms = Vec::with_capacity(d);
    for k in 0..d {
        let col: Vec<f64> = (0..d).map(|i| a.get(i, k)).collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            atoms.push((col.iter().map(|v| v / norm).collect(), norm * norm));
        }
    }
    AngularAtomSet { atoms }
}

/// Closed-form squared scalings of a standardised coefficient matrix.
#[derive(Debug, Clone, Copy)]
pub struct ExactScalings<'a> {
    a: &'a MaxLinearMatrix,
}

impl<'a> ExactScalings<'a> {
    pub fn new(a: &'a MaxLinearMatrix) -> Result<Self> {
        if !a.is_standardised() {
            return Err(Error::InvalidModel(
                "exact scalings require a standardised matrix".into(),
            ));
        }
        Ok(ExactScalings { a })
    }

    fn check_range(&self, projection: &MaxProjection) -> Result<()> {
        match projection.max_node() {
            Some(m) if m >= self.a.dim() => Err(Error::InvalidDescriptor(format!(
                "node {m} out of range for dimension {}",
                self.a.dim()
            ))),
            _ => Ok(()),
        }
    }
}

impl ScalingSource for ExactScalings<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Squared scaling formulas for a standardised matrix:
    /// - set `I`: `sum_l max_{i in I} a_il^2` (the full set reduces to
    ///   `sum_l a_ll^2` by column dominance);
    /// - triple `(i, a j, a I)`:
    ///   `sum_{l in I u {j}} a^2 a_ll^2
    ///    + sum_{l notin I u {j}} (a_il^2 v max_k a^2 a_kl^2)`.
    fn scaling(&self, projection: &MaxProjection) -> Result<f64> {
        self.check_range(projection)?;
        let a = self.a;
        let d = a.dim();
        match projection {
            MaxProjection::Node(i) => Ok(a.row(*i).iter().map(|v| v * v).sum()),
            MaxProjection::Set(set) => {
                if set.len() == d {
                    Ok((0..d).map(|l| a.get(l, l) * a.get(l, l)).sum())
                } else {
                    Ok((0..d)
                        .map(|l| {
                            set.iter()
                                .map(|&i| a.get(i, l) * a.get(i, l))
                                .fold(0.0, f64::max)
                        })
                        .sum())
                }
            }
            MaxProjection::Scaled { i, j, set, a: fac } => {
                let a2 = fac * fac;
                let mut rescaled: BTreeSet<usize> = set.clone();
                rescaled.insert(*j);
                let mut total = 0.0;
                for l in 0..d {
                    if rescaled.contains(&l) {
                        total += a2 * a.get(l, l) * a.get(l, l);
                    } else {
                        let own = a.get(*i, l) * a.get(*i, l);
                        let best = rescaled
                            .iter()
                            .map(|&k| a2 * a.get(k, l) * a.get(k, l))
                            .fold(own, f64::max);
                        total += best;
                    }
                }
                Ok(total)
            }
        }
    }

    /// Cancellation-free form of the selection entry. Algebraically the
    /// three-scaling difference collapses to a sum over columns outside
    /// `O u {j}`:
    /// `sum_l [ (a_il^2 v a^2 m_l^2) - (a_il^2 v m_l^2) - (a^2-1) m_l^2 ]`
    /// with `m_l = max_{k in O u {j}} a_kl`. Every term vanishes exactly
    /// when `m_l = 0`, so columns of source-like candidates evaluate to
    /// floating-point zero rather than to a difference of large sums.
    fn delta_entry(
        &self,
        i: usize,
        j: usize,
        ordered: &[usize],
        a: f64,
        _sigma2_jo: f64,
    ) -> Result<f64> {
        let m = self.a;
        let d = m.dim();
        if i >= d || j >= d {
            return Err(Error::InvalidDescriptor(format!(
                "nodes ({i}, {j}) out of range for dimension {d}"
            )));
        }
        let a2 = a * a;
        let mut rescaled: BTreeSet<usize> = ordered.iter().copied().collect();
        rescaled.insert(j);
        let mut total = 0.0;
        for l in 0..d {
            if rescaled.contains(&l) {
                continue;
            }
            let mu2 = rescaled
                .iter()
                .map(|&k| m.get(k, l) * m.get(k, l))
                .fold(0.0, f64::max);
            if mu2 == 0.0 {
                continue;
            }
            let own = m.get(i, l) * m.get(i, l);
            total += own.max(a2 * mu2) - own.max(mu2) - (a2 - 1.0) * mu2;
        }
        Ok(total)
    }
}

/// Both sides of the scaling-gap identity for an ancestrally closed set
/// `I` (no member may have an ancestor outside `I`), distinct nodes
/// `i, j` outside `I`, and scale factor `a > 1`:
/// the left side is the gap `sigma^2(i, a j, a I) - sigma^2(i, j, I)`;
/// the right side expands it over the ancestors of `j` outside `I`.
/// The two must agree up to floating-point error.
pub fn scaling_gap_identity(
    model: &RmlmModel,
    i: usize,
    j: usize,
    set: impl IntoIterator<Item = usize>,
    a: f64,
) -> Result<(f64, f64)> {
    let set: BTreeSet<usize> = set.into_iter().collect();
    if !(a > 1.0) {
        return Err(Error::InvalidDescriptor(format!(
            "scale factor a = {a} must exceed 1"
        )));
    }
    let ancestors = model.ancestor_sets();
    for &k in &set {
        if ancestors[k].iter().any(|an| !set.contains(an)) {
            return Err(Error::InvalidDescriptor(format!(
                "set is not ancestrally closed: node {k} has an ancestor outside"
            )));
        }
    }
    let scalings = model.scalings();
    let lhs = scalings.scaling(&MaxProjection::scaled(i, j, set.iter().copied(), a)?)?
        - scalings.scaling(&MaxProjection::scaled(i, j, set.iter().copied(), 1.0)?)?;

    let m = model.matrix();
    let a2 = a * a;
    let mut diag_part = m.get(j, j) * m.get(j, j);
    for &l in &set {
        diag_part += m.get(l, l) * m.get(l, l);
    }
    let mut cross = 0.0;
    for &l in &ancestors[j] {
        if set.contains(&l) {
            continue;
        }
        let own = m.get(i, l) * m.get(i, l);
        let anc = m.get(j, l) * m.get(j, l);
        cross += own.max(a2 * anc) - own.max(anc);
    }
    let rhs = (a2 - 1.0) * diag_part + cross;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure_matrix() -> MaxLinearMatrix {
        MaxLinearMatrix::from_rows(vec![vec![0.8, 0.26], vec![0.0, 0.43]]).unwrap()
    }

    #[test]
    fn atoms_of_two_node_example() {
        let atoms = angular_atoms(&figure_matrix());
        let [(a1, w1), (a2, w2)] = atoms.atoms() else {
            panic!("expected two atoms");
        };
        assert!((a1[0] - 1.0).abs() < 1e-12 && a1[1].abs() < 1e-12);
        assert!((a2[0] - 0.52).abs() < 0.01);
        assert!((a2[1] - 0.86).abs() < 0.01);
        assert!((w1 - 0.64).abs() < 1e-12);
        assert!((w2 - 0.2525).abs() < 1e-12);
    }

    #[test]
    fn atoms_of_identity_are_basis_vectors() {
        let atoms = angular_atoms(&MaxLinearMatrix::identity(3));
        assert_eq!(atoms.atoms().len(), 3);
        for (k, (atom, w)) in atoms.atoms().iter().enumerate() {
            assert_eq!(*w, 1.0);
            for (i, v) in atom.iter().enumerate() {
                assert_eq!(*v, if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn atom_mass_of_standardised_model_is_dimension() {
        for seed in 0..20 {
            let model = RmlmModel::random(5, 0.5, seed).unwrap();
            let mass = model.angular_atoms().total_mass();
            assert!((mass - 5.0).abs() < 1e-12, "seed {seed}: mass {mass}");
        }
    }

    #[test]
    fn model_rejects_unstandardised_matrix() {
        assert!(RmlmModel::new(figure_matrix(), 0).is_err());
    }

    #[test]
    fn unit_scaling_per_node() {
        for seed in 0..10 {
            let model = RmlmModel::random(6, 0.5, seed).unwrap();
            for i in 0..6 {
                let s = model.exact_scaling(&MaxProjection::node(i)).unwrap();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_set_scaling_is_diagonal_mass() {
        let model = RmlmModel::random(5, 0.5, 3).unwrap();
        let s = model
            .exact_scaling(&MaxProjection::set(0..5).unwrap())
            .unwrap();
        let diag: f64 = (0..5)
            .map(|l| model.matrix().get(l, l).powi(2))
            .sum();
        assert!((s - diag).abs() < 1e-15);
    }

    /// The closed forms must agree with the definition-level moment of
    /// the same functional under the atom representation.
    #[test]
    fn scalings_match_atom_moments() {
        for seed in 0..20 {
            let d = 5;
            let model = RmlmModel::random(d, 0.5, seed).unwrap();
            let atoms = model.angular_atoms();
            let scalings = model.scalings();
            // all nonempty subsets
            for mask in 1u32..(1 << d) {
                let set: Vec<usize> = (0..d).filter(|&i| mask >> i & 1 == 1).collect();
                let p = MaxProjection::set(set.clone()).unwrap();
                let direct = atoms.moment(|omega| {
                    set.iter().map(|&i| omega[i] * omega[i]).fold(0.0, f64::max)
                });
                let closed = scalings.scaling(&p).unwrap();
                assert!(
                    (direct - closed).abs() < 1e-12,
                    "seed {seed} set {set:?}: {direct} vs {closed}"
                );
            }
            // a sample of triples
            for (i, j) in [(0, 1), (3, 2), (4, 0)] {
                let set: BTreeSet<usize> =
                    (0..d).filter(|&k| k != i && k != j).take(2).collect();
                let a = 1.3;
                let p = MaxProjection::scaled(i, j, set.iter().copied(), a).unwrap();
                let direct = atoms.moment(|omega| {
                    let mut best = omega[i] * omega[i];
                    for &k in std::iter::once(&j).chain(set.iter()) {
                        best = best.max(a * a * omega[k] * omega[k]);
                    }
                    best
                });
                let closed = scalings.scaling(&p).unwrap();
                assert!(
                    (direct - closed).abs() < 1e-12,
                    "seed {seed} triple ({i},{j},{set:?}): {direct} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let model = RmlmModel::random(4, 0.5, 9).unwrap();
        let a = model.simulate(50);
        let b = model.simulate(50);
        assert_eq!(a, b);
        let other = RmlmModel::random(4, 0.5, 10).unwrap();
        assert_ne!(other.simulate(50), a);
    }

    #[test]
    fn single_node_simulation_matches_frechet_cdf() {
        let a = MaxLinearMatrix::from_rows(vec![vec![1.0]])
            .unwrap()
            .assume_standardised()
            .unwrap();
        let model = RmlmModel::new(a, 7).unwrap();
        let n = 100_000;
        let x = model.simulate(n);
        for z in [0.5, 1.0, 2.0] {
            let emp = (0..n).filter(|&r| x.row(r)[0] <= z).count() as f64 / n as f64;
            let exact = (-z.powi(-2)).exp();
            assert!(
                (emp - exact).abs() < 0.01,
                "z = {z}: empirical {emp} vs {exact}"
            );
        }
    }

    #[test]
    fn chain_simulation_recomputes_from_innovations() {
        // chain with redundant direct edge: X_0 = Z_0 v c12 Z_1 v c12 c23 Z_2
        let (c12, c23, c13) = (0.8, 0.7, 0.3);
        let w = DenseMatrix::from_rows(vec![
            vec![1.0, c12, c13],
            vec![0.0, 1.0, c23],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let spec = DagSpec::from_weights(w).unwrap();
        let model = RmlmModel::from_spec(&spec, 21).unwrap();
        let (x, z) = model.simulate_with_innovations(500);
        let m = model.matrix();
        for r in 0..500 {
            let zr = z.row(r);
            let expect = (m.get(0, 0) * zr[0])
                .max(m.get(0, 1) * zr[1])
                .max(m.get(0, 2) * zr[2]);
            assert_eq!(x.row(r)[0], expect);
        }
    }

    #[test]
    fn diagonal_model_components_independent() {
        let model = RmlmModel::new(MaxLinearMatrix::identity(2), 3).unwrap();
        let n = 200_000;
        let x = model.simulate(n);
        // pairwise extremal correlation: P(both exceed q) / P(one exceeds q)
        let q = standard_frechet(0.98);
        let both = (0..n)
            .filter(|&r| x.row(r)[0] > q && x.row(r)[1] > q)
            .count() as f64;
        let one = (0..n).filter(|&r| x.row(r)[0] > q).count() as f64;
        assert!(both / one < 0.05, "extremal correlation should be near 0");
    }

    #[test]
    fn gap_identity_on_random_admissible_tuples() {
        let mut checked = 0;
        for seed in 0..40 {
            let model = RmlmModel::random(6, 0.5, seed).unwrap();
            let ancestors = model.ancestor_sets();
            // ancestrally closed set: union of ancestor closures
            let mut set: BTreeSet<usize> = BTreeSet::new();
            for k in 0..6 {
                if seed.wrapping_mul(31).wrapping_add(k as u64) % 3 == 0 {
                    set.insert(k);
                    set.extend(ancestors[k].iter().copied());
                }
            }
            let outside: Vec<usize> = (0..6).filter(|k| !set.contains(k)).collect();
            if outside.len() < 2 {
                continue;
            }
            let (i, j) = (outside[0], outside[1]);
            for a in [1.1, 1.3, 2.0] {
                let (lhs, rhs) =
                    scaling_gap_identity(&model, i, j, set.iter().copied(), a).unwrap();
                assert!(
                    (lhs - rhs).abs() < 1e-12,
                    "seed {seed} a {a}: {lhs} vs {rhs}"
                );
                checked += 1;
            }
        }
        assert!(checked > 30, "need enough admissible tuples, got {checked}");
    }

    #[test]
    fn gap_for_source_candidate_is_exact() {
        for seed in 0..20 {
            let model = RmlmModel::random(5, 0.5, seed).unwrap();
            let ancestors = model.ancestor_sets();
            for j in 0..5 {
                if !ancestors[j].is_empty() {
                    continue;
                }
                for i in 0..5 {
                    if i == j {
                        continue;
                    }
                    for a in [1.1, 1.3, 2.0] {
                        let (lhs, _) =
                            scaling_gap_identity(&model, i, j, std::iter::empty(), a).unwrap();
                        assert!(
                            (lhs - (a * a - 1.0)).abs() < 1e-12,
                            "source gap must be a^2 - 1 exactly"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gap_identity_rejects_unclosed_set() {
        // chain 2 -> 1 -> 0: {1} is not ancestrally closed (2 outside)
        let w = DenseMatrix::from_rows(vec![
            vec![1.0, 0.8, 0.0],
            vec![0.0, 1.0, 0.7],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let model = RmlmModel::from_spec(&DagSpec::from_weights(w).unwrap(), 0).unwrap();
        assert!(scaling_gap_identity(&model, 0, 2, [1], 1.3).is_err());
    }

    #[test]
    fn stable_delta_matches_three_scaling_form() {
        for seed in 0..20 {
            let model = RmlmModel::random(6, 0.5, seed).unwrap();
            let s = model.scalings();
            let ordered = [4usize, 5];
            for i in 0..4 {
                for j in 0..4 {
                    if i == j {
                        continue;
                    }
                    let sigma2_jo = s
                        .scaling(
                            &MaxProjection::set(
                                std::iter::once(j).chain(ordered.iter().copied()),
                            )
                            .unwrap(),
                        )
                        .unwrap();
                    let stable = s.delta_entry(i, j, &ordered, 1.3, sigma2_jo).unwrap();
                    // default three-scaling evaluation
                    let rescaled = s
                        .scaling(&MaxProjection::scaled(i, j, ordered, 1.3).unwrap())
                        .unwrap();
                    let plain = s
                        .scaling(&MaxProjection::scaled(i, j, ordered, 1.0).unwrap())
                        .unwrap();
                    let direct = rescaled - plain - (1.3f64 * 1.3 - 1.0) * sigma2_jo;
                    assert!(
                        (stable - direct).abs() < 1e-12,
                        "seed {seed} ({i},{j}): {stable} vs {direct}"
                    );
                }
            }
        }
    }
}
