//! Generalized capacity of a compact node set: the infimum of the energy
//! over fields pinned to the reference function on the set, vanishing on the
//! boundary, and boxed between zero and the reference function. Truncating
//! any admissible field at the reference function never increases the
//! energy, so the box constraint loses nothing.
//!
//! The reported value is the energy of a feasible iterate, hence always an
//! upper bound on the continuum capacity; for convex cases it converges to
//! it from above under refinement.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::SubsetMask;
use crate::problem::Problem;
use crate::solver::{free_nodes, minimize_box, SolverOptions, StopReason, VariationalResult};

/// Capacity of `compact` relative to the full domain.
pub fn capacity(
    problem: &Problem,
    reference: &ScalarField,
    compact: &SubsetMask,
    opts: &SolverOptions,
) -> Result<VariationalResult> {
    capacity_on_subdomain(problem, reference, compact, None, opts)
}

/// Capacity of `compact` relative to a subdomain: nodes outside `domain` are
/// held at zero, which is the discrete Dirichlet condition on the subdomain
/// boundary.
pub fn capacity_on_subdomain(
    problem: &Problem,
    reference: &ScalarField,
    compact: &SubsetMask,
    domain: Option<&SubsetMask>,
    opts: &SolverOptions,
) -> Result<VariationalResult> {
    problem.check_field(reference)?;
    if !reference.positive_on_interior() {
        return Err(Error::domain(
            "capacity requires a positive reference function on the interior".to_string(),
        ));
    }
    let geom = problem.geometry();
    if compact.is_empty() {
        // The zero field is admissible only for the empty set; its energy
        // vanishes.
        return Ok(VariationalResult {
            value: 0.0,
            minimizer: ScalarField::zeros(std::sync::Arc::clone(geom)),
            iterations: 0,
            residual: 0.0,
            converged: true,
            stop_reason: StopReason::GradientTolerance,
            multistart_spread: 0.0,
        });
    }
    if !compact.inside_interior() {
        return Err(Error::domain(format!(
            "compact set '{}' intersects the boundary",
            compact.descriptor()
        )));
    }
    if let Some(d) = domain {
        if !compact.is_subset_of(d) {
            return Err(Error::domain(format!(
                "compact set '{}' is not contained in the subdomain '{}'",
                compact.descriptor(),
                d.descriptor()
            )));
        }
    }
    let pinned = compact.flags().to_vec();
    let free = free_nodes(geom, domain, Some(&pinned));
    minimize_box(problem, reference, &pinned, &free, opts)
}

/// Capacities of a fixed compact set across a nested exhaustion, each solved
/// with Dirichlet conditions on the exhaustion element's boundary. By
/// feasible-set inclusion the sequence is nonincreasing up to solver
/// tolerance.
pub fn capacity_decay(
    problem: &Problem,
    reference: &ScalarField,
    compact: &SubsetMask,
    exhaustion: &[SubsetMask],
    opts: &SolverOptions,
) -> Result<Vec<VariationalResult>> {
    if exhaustion.is_empty() {
        return Err(Error::config("empty exhaustion".to_string()));
    }
    if !compact.is_subset_of(&exhaustion[0]) {
        return Err(Error::domain(format!(
            "compact set '{}' must lie inside the smallest exhaustion element",
            compact.descriptor()
        )));
    }
    exhaustion
        .iter()
        .map(|dom| capacity_on_subdomain(problem, reference, compact, Some(dom), opts))
        .collect()
}
