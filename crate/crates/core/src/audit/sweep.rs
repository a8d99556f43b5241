//! Peakedness sweep for the Bayesian cross-entropy loss.

use super::Table;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::scalar::Real;
use crate::scoring::{s2, EvalMethod};
use crate::second_order::{Dirichlet, SecondOrderDist};

/// Rows `(c, S2(BayesCE(λ), Dir(c·α), Dir(α)))` evaluated exactly.
pub fn bayes_peakedness_sweep<T: Real>(alpha: &[T], c_grid: &[T], lambda: T) -> Result<Table<T>> {
    if c_grid.is_empty() || c_grid.iter().any(|c| !(*c > T::zero() && c.is_finite())) {
        return Err(Error::arg("the c grid must be non-empty, positive and finite"));
    }
    if c_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::arg("the c grid must be strictly increasing"));
    }
    let loss = LossSpec::BayesCe { lambda };
    let target: SecondOrderDist<T> = Dirichlet::new(alpha.to_vec())?.into();
    let mut table = Table::new("peakedness", &["c", "value"], "exact");
    for c in c_grid {
        let q_hat: SecondOrderDist<T> = Dirichlet::new(alpha.iter().map(|a| *a * *c).collect())?.into();
        table.rows.push(vec![*c, s2(&loss, &q_hat, &target, EvalMethod::Exact)?.value]);
    }
    Ok(table)
}
