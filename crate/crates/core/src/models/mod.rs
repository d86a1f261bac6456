//! Concrete [`EmModel`](crate::em::EmModel) implementations.

mod dataset;
pub mod gmm;
pub mod mvt;
mod surrogate;

pub use dataset::Dataset;
pub use gmm::{GaussianMixture, GmmParams};
pub use mvt::{BivariateT, MvtParams};
pub use surrogate::SurrogateModel;

use crate::line_search::{Constraint, ConstraintSpec};

/// Model families with a built-in constraint catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Univariate mixture with this many components.
    Gmm(usize),
    /// Multivariate t in this many dimensions (only 2 is supported).
    Mvt(usize),
}

/// Constraint catalog for a model family, following its packing order.
pub fn constraints_for(kind: ModelKind) -> ConstraintSpec {
    match kind {
        ModelKind::Gmm(k) => ConstraintSpec::new(vec![
            Constraint::Simplex((0..k - 1).collect()),
            Constraint::Free,
            Constraint::Positive((2 * k - 1..3 * k - 1).collect()),
        ]),
        ModelKind::Mvt(d) => {
            assert_eq!(d, 2, "only the bivariate t is supported");
            ConstraintSpec::new(vec![
                Constraint::Free,
                Constraint::PosDef2x2([2, 3, 4]),
                Constraint::Positive(vec![5]),
            ])
        }
    }
}
