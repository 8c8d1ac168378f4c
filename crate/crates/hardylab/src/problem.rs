//! Problem bundles: exponent, coefficient, potential, weight, and an optional
//! positive reference function on a shared geometry.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{CellField, CoefficientA, ScalarField};
use crate::geometry::Geometry;

/// One instance of the energy functional and its Hardy data.
///
/// The weight is stored as `|g|`: every functional of this crate integrates
/// the weight in absolute value, so signs are dropped on ingestion.
#[derive(Debug, Clone)]
pub struct Problem {
    p: f64,
    geom: Arc<Geometry>,
    coeff: CoefficientA,
    potential: CellField,
    weight: CellField,
    reference: Option<ScalarField>,
}

impl Problem {
    pub fn new(
        p: f64,
        coeff: CoefficientA,
        potential: CellField,
        weight: CellField,
        reference: Option<ScalarField>,
    ) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::config(format!("exponent p must satisfy p > 1, got {p}")));
        }
        let geom = Arc::clone(coeff.geometry());
        if !potential.geometry().compatible(&geom) || !weight.geometry().compatible(&geom) {
            return Err(Error::usage(
                "potential/weight live on a different geometry than the coefficient".to_string(),
            ));
        }
        if let Some(u) = &reference {
            if !u.geometry().compatible(&geom) {
                return Err(Error::usage(
                    "reference function lives on a different geometry".to_string(),
                ));
            }
            if !u.positive_on_interior() {
                return Err(Error::domain(
                    "reference function must be positive on all interior nodes".to_string(),
                ));
            }
        }
        Ok(Problem {
            p,
            geom,
            coeff,
            potential,
            weight: weight.abs(),
            reference,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn coeff(&self) -> &CoefficientA {
        &self.coeff
    }

    pub fn potential(&self) -> &CellField {
        &self.potential
    }

    /// The Hardy-weight, already in absolute value.
    pub fn weight(&self) -> &CellField {
        &self.weight
    }

    pub fn reference(&self) -> Option<&ScalarField> {
        self.reference.as_ref()
    }

    /// Same problem with another weight.
    pub fn with_weight(&self, weight: CellField) -> Result<Self> {
        Problem::new(
            self.p,
            self.coeff.clone(),
            self.potential.clone(),
            weight,
            self.reference.clone(),
        )
    }

    /// Same problem with another potential.
    pub fn with_potential(&self, potential: CellField) -> Result<Self> {
        Problem::new(
            self.p,
            self.coeff.clone(),
            potential,
            self.weight.clone(),
            self.reference.clone(),
        )
    }

    /// Same problem with another exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Problem::new(
            p,
            self.coeff.clone(),
            self.potential.clone(),
            self.weight.clone(),
            self.reference.clone(),
        )
    }

    /// The problem with potential `V - s |g|`, the shift under which the
    /// constrained minimum becomes zero at s equal to the best constant.
    pub fn shifted_by_weight(&self, s: f64) -> Result<Self> {
        let shifted = self.potential.add(&self.weight.scaled(-s));
        self.with_potential(shifted)
    }

    /// Check a field for geometry compatibility.
    pub fn check_field(&self, f: &ScalarField) -> Result<()> {
        if !f.geometry().compatible(&self.geom) {
            return Err(Error::usage(
                "field lives on a different geometry than the problem".to_string(),
            ));
        }
        Ok(())
    }
}
