//! Max-projection descriptors and the scaling-source abstraction.
//!
//! A max-projection is a maximum over selected (possibly rescaled)
//! components of the model vector; its squared scaling is the second
//! moment of the corresponding functional under the angular measure.
//! Both the structure-learning and the coefficient-recovery algorithms
//! consume scalings only, so they run unchanged against either the
//! exact model oracle or the empirical tail estimator.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Which max-projection to take the squared scaling of.
#[derive(Debug, Clone, PartialEq)]
pub enum MaxProjection {
    /// A single component: the scaling of `X_i`.
    Node(usize),
    /// The maximum over a nonempty set of components.
    Set(BTreeSet<usize>),
    /// `X_i v a X_j v max_{k in set} a X_k` with `a >= 1` and
    /// `i, j` distinct and outside `set`.
    Scaled {
        i: usize,
        j: usize,
        set: BTreeSet<usize>,
        a: f64,
    },
}

impl MaxProjection {
    pub fn node(i: usize) -> Self {
        MaxProjection::Node(i)
    }

    pub fn set(nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = nodes.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidDescriptor("empty node set".into()));
        }
        Ok(MaxProjection::Set(set))
    }

    pub fn scaled(
        i: usize,
        j: usize,
        set: impl IntoIterator<Item = usize>,
        a: f64,
    ) -> Result<Self> {
        let set: BTreeSet<usize> = set.into_iter().collect();
        if i == j {
            return Err(Error::InvalidDescriptor(format!(
                "distinguished nodes coincide: i = j = {i}"
            )));
        }
        if set.contains(&i) || set.contains(&j) {
            return Err(Error::InvalidDescriptor(format!(
                "nodes {i}, {j} must lie outside the rescaled set"
            )));
        }
        if !(a >= 1.0) {
            return Err(Error::InvalidDescriptor(format!(
                "scale factor a = {a} must be >= 1"
            )));
        }
        Ok(MaxProjection::Scaled { i, j, set, a })
    }

    /// Coordinates the projection depends on, in increasing order.
    pub fn involved(&self) -> Vec<usize> {
        match self {
            MaxProjection::Node(i) => vec![*i],
            MaxProjection::Set(set) => set.iter().copied().collect(),
            MaxProjection::Scaled { i, j, set, .. } => {
                let mut all: BTreeSet<usize> = set.clone();
                all.insert(*i);
                all.insert(*j);
                all.into_iter().collect()
            }
        }
    }

    pub fn max_node(&self) -> Option<usize> {
        self.involved().last().copied()
    }

    /// The squared projection functional evaluated on an angle vector
    /// whose coordinates are `coords` (the output of [`involved`]).
    ///
    /// [`involved`]: MaxProjection::involved
    pub fn functional(&self, coords: &[usize]) -> impl Fn(&[f64]) -> f64 + '_ {
        let pos = |node: usize| {
            coords
                .binary_search(&node)
                .expect("coords must cover the involved nodes")
        };
        enum Plan {
            All,
            One(usize),
            Mixed { plain: usize, scaled: Vec<usize>, a2: f64 },
        }
        let plan = match self {
            MaxProjection::Node(i) => Plan::One(pos(*i)),
            MaxProjection::Set(_) => Plan::All,
            MaxProjection::Scaled { i, j, set, a } => Plan::Mixed {
                plain: pos(*i),
                scaled: std::iter::once(*j)
                    .chain(set.iter().copied())
                    .map(pos)
                    .collect(),
                a2: a * a,
            },
        };
        move |omega: &[f64]| match &plan {
            Plan::One(p) => omega[*p] * omega[*p],
            Plan::All => omega.iter().map(|w| w * w).fold(0.0, f64::max),
            Plan::Mixed { plain, scaled, a2 } => {
                let mut best = omega[*plain] * omega[*plain];
                for &p in scaled {
                    let v = a2 * omega[p] * omega[p];
                    if v > best {
                        best = v;
                    }
                }
                best
            }
        }
    }
}

/// Provider of squared scalings for max-projections. Implemented by the
/// exact model oracle and by the empirical tail estimator.
pub trait ScalingSource {
    /// Number of model components.
    fn dim(&self) -> usize;

    /// Squared scaling of the given max-projection.
    fn scaling(&self, projection: &MaxProjection) -> Result<f64>;

    /// One entry of the order-selection matrix for candidate column `j`
    /// and row `i` given the already-ordered set:
    /// the rescaling gap of `(i, a j, a O)` versus `(i, j, O)` minus the
    /// `(a^2 - 1)`-multiple of the plain `{j} u O` scaling.
    ///
    /// `sigma2_jo` is that plain scaling, precomputed once per column.
    /// Implementations may override this with an algebraically
    /// equivalent form (the default evaluates three scalings).
    fn delta_entry(
        &self,
        i: usize,
        j: usize,
        ordered: &[usize],
        a: f64,
        sigma2_jo: f64,
    ) -> Result<f64> {
        let rescaled = self.scaling(&MaxProjection::scaled(
            i,
            j,
            ordered.iter().copied(),
            a,
        )?)?;
        let plain = self.scaling(&MaxProjection::scaled(
            i,
            j,
            ordered.iter().copied(),
            1.0,
        )?)?;
        Ok(rescaled - plain - (a * a - 1.0) * sigma2_jo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_descriptors() {
        assert!(MaxProjection::set(std::iter::empty()).is_err());
        assert!(MaxProjection::scaled(1, 1, [2], 1.3).is_err());
        assert!(MaxProjection::scaled(0, 1, [1, 2], 1.3).is_err());
        assert!(MaxProjection::scaled(0, 1, [2], 0.9).is_err());
    }

    #[test]
    fn involved_coordinates_sorted() {
        let p = MaxProjection::scaled(4, 0, [2, 3], 1.3).unwrap();
        assert_eq!(p.involved(), vec![0, 2, 3, 4]);
    }

    #[test]
    fn scaled_functional_with_unit_factor_matches_set() {
        let p = MaxProjection::scaled(0, 1, [2], 1.0).unwrap();
        let s = MaxProjection::set([0, 1, 2]).unwrap();
        let coords = vec![0, 1, 2];
        let fp = p.functional(&coords);
        let fs = s.functional(&coords);
        let omega = [0.3, 0.5, 0.81];
        assert_eq!(fp(&omega), fs(&omega));
    }
}
