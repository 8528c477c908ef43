//! Diagnostics on the empirical measure of an ensemble.
//!
//! Every function here takes the ensemble at one time as a slice of fields
//! in sample order and reduces it in that fixed order, so results do not
//! depend on how many threads computed the per-sample pieces.

mod assignment;
mod cauchy;
mod moments;
mod structure;
mod wasserstein;

pub use assignment::{assignment_cost, solve_assignment};
pub use cauchy::{
    cauchy_rate_field, cauchy_rate_moments, ensemble_field_rate, restrict_ensemble, subsample, MomentRates,
};
pub use moments::{moments, Moments};
pub use structure::{
    default_fit_range, default_l_max, fit_slope, structure_function, structure_weight, SlopeFit,
    StructureFunctionCurve,
};
pub use wasserstein::{draw_tuples, wasserstein_marginal, wasserstein_on_tuples, WassersteinEstimate, MAX_MARGINAL};

use crate::error::{Error, Result};
use crate::mesh::{GridSpec, VectorField};

pub(crate) fn common_grid(fields: &[VectorField]) -> Result<GridSpec> {
    let first = fields
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    let grid = first.grid();
    for f in &fields[1..] {
        grid.require_same(&f.grid())?;
    }
    Ok(grid)
}
