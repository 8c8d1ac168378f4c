//! Nodal and per-cell fields, and the diffusion coefficient matrix.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point};

/// A real value per node. Test functions entering the energy functional
/// vanish on non-interior nodes (the discrete analog of compact support).
#[derive(Debug, Clone)]
pub struct ScalarField {
    geom: Arc<Geometry>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(geom: Arc<Geometry>, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.num_nodes() {
            return Err(Error::usage(format!(
                "field has {} values for geometry with {} nodes",
                values.len(),
                geom.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("field contains non-finite values".to_string()));
        }
        Ok(ScalarField { geom, values })
    }

    pub fn zeros(geom: Arc<Geometry>) -> Self {
        let n = geom.num_nodes();
        ScalarField {
            geom,
            values: vec![0.0; n],
        }
    }

    pub fn constant(geom: Arc<Geometry>, v: f64) -> Self {
        let n = geom.num_nodes();
        ScalarField {
            geom,
            values: vec![v; n],
        }
    }

    pub fn from_fn(geom: Arc<Geometry>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..geom.num_nodes())
            .map(|i| f(geom.node_coord(i)))
            .collect();
        ScalarField::from_values(geom, values)
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Zero the field on all non-interior nodes, making it a valid test
    /// function.
    pub fn restricted_to_interior(mut self) -> Self {
        for i in 0..self.values.len() {
            if !self.geom.is_interior(i) {
                self.values[i] = 0.0;
            }
        }
        self
    }

    pub fn vanishes_off_interior(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, &v)| self.geom.is_interior(i) || v == 0.0)
    }

    pub fn positive_on_interior(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, &v)| !self.geom.is_interior(i) || v > 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarField {
            geom: Arc::clone(&self.geom),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        ScalarField {
            geom: Arc::clone(&self.geom),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Node-wise minimum of two fields.
    pub fn min_with(&self, other: &ScalarField) -> Self {
        ScalarField {
            geom: Arc::clone(&self.geom),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a.min(b))
                .collect(),
        }
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A real value per cell, the natural home of quadrature weights such as the
/// potential V and the Hardy-weight g. Singular expressions are evaluated at
/// cell midpoints, never at nodes, so quadrature stays finite.
#[derive(Debug, Clone)]
pub struct CellField {
    geom: Arc<Geometry>,
    values: Vec<f64>,
}

impl CellField {
    pub fn from_values(geom: Arc<Geometry>, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.num_cells() {
            return Err(Error::usage(format!(
                "cell field has {} values for geometry with {} cells",
                values.len(),
                geom.num_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage(
                "cell field contains non-finite values".to_string(),
            ));
        }
        Ok(CellField { geom, values })
    }

    pub fn zeros(geom: Arc<Geometry>) -> Self {
        let n = geom.num_cells();
        CellField {
            geom,
            values: vec![0.0; n],
        }
    }

    pub fn constant(geom: Arc<Geometry>, v: f64) -> Self {
        let n = geom.num_cells();
        CellField {
            geom,
            values: vec![v; n],
        }
    }

    /// Evaluate a function at cell midpoints.
    pub fn from_midpoint_fn(geom: Arc<Geometry>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..geom.num_cells())
            .map(|c| f(geom.cell_midpoint(c)))
            .collect();
        CellField::from_values(geom, values)
    }

    /// Corner-average a nodal field onto cells.
    pub fn from_nodal_average(field: &ScalarField) -> Self {
        let geom = Arc::clone(field.geometry());
        let values: Vec<f64> = (0..geom.num_cells())
            .map(|c| geom.cell_average(field.values(), c))
            .collect();
        CellField { geom, values }
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn abs(&self) -> Self {
        CellField {
            geom: Arc::clone(&self.geom),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        CellField {
            geom: Arc::clone(&self.geom),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &CellField) -> Self {
        CellField {
            geom: Arc::clone(&self.geom),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Integral over the whole domain: sum of cell value times cell measure.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.geom.cell_measures())
            .map(|(&v, &m)| v * m)
            .sum()
    }
}

/// Symmetric 2x2 matrix stored as its upper triangle. 1D geometries use a
/// scalar coefficient in `a11` (with `a22 = a11`, `a12 = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub fn identity() -> Self {
        SymMat2 {
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
        }
    }

    pub fn scalar(a: f64) -> Self {
        SymMat2 {
            a11: a,
            a12: 0.0,
            a22: a,
        }
    }

    /// Quadratic form `<A xi, xi>`.
    pub fn quad(&self, xi: [f64; 2]) -> f64 {
        self.a11 * xi[0] * xi[0] + 2.0 * self.a12 * xi[0] * xi[1] + self.a22 * xi[1] * xi[1]
    }

    /// Matrix-vector product `A xi`.
    pub fn apply(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * xi[0] + self.a12 * xi[1],
            self.a12 * xi[0] + self.a22 * xi[1],
        ]
    }

    /// Eigenvalue bounds (lambda_min, lambda_max) of the symmetric matrix.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let tr = self.a11 + self.a22;
        let det = self.a11 * self.a22 - self.a12 * self.a12;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }

    pub fn is_spd(&self) -> bool {
        let (lo, _) = self.eigen_bounds();
        lo > 0.0
    }
}

/// The per-cell coefficient matrix A(x) defining the anisotropic gradient
/// norm `|xi|_A^2 = <A xi, xi>`.
#[derive(Debug, Clone)]
pub struct CoefficientA {
    geom: Arc<Geometry>,
    cells: Vec<SymMat2>,
}

impl CoefficientA {
    pub fn identity(geom: Arc<Geometry>) -> Self {
        let n = geom.num_cells();
        CoefficientA {
            geom,
            cells: vec![SymMat2::identity(); n],
        }
    }

    pub fn scalar(geom: Arc<Geometry>, a: f64) -> Result<Self> {
        let n = geom.num_cells();
        let m = SymMat2::scalar(a);
        if !m.is_spd() {
            return Err(Error::usage(format!(
                "coefficient must be positive, got {a}"
            )));
        }
        Ok(CoefficientA {
            geom,
            cells: vec![m; n],
        })
    }

    /// Scalar coefficient sampled at cell midpoints.
    pub fn from_scalar_fn(geom: Arc<Geometry>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let cells: Vec<SymMat2> = (0..geom.num_cells())
            .map(|c| SymMat2::scalar(f(geom.cell_midpoint(c))))
            .collect();
        let coeff = CoefficientA { geom, cells };
        coeff.validate()?;
        Ok(coeff)
    }

    /// Full matrix coefficient sampled at cell midpoints.
    pub fn from_matrix_fn(geom: Arc<Geometry>, f: impl Fn(Point) -> SymMat2) -> Result<Self> {
        let cells: Vec<SymMat2> = (0..geom.num_cells())
            .map(|c| f(geom.cell_midpoint(c)))
            .collect();
        let coeff = CoefficientA { geom, cells };
        coeff.validate()?;
        Ok(coeff)
    }

    fn validate(&self) -> Result<()> {
        for (c, m) in self.cells.iter().enumerate() {
            if !m.is_spd() || !m.a11.is_finite() || !m.a12.is_finite() || !m.a22.is_finite() {
                return Err(Error::usage(format!(
                    "coefficient matrix on cell {c} is not symmetric positive definite"
                )));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn cell(&self, c: usize) -> &SymMat2 {
        &self.cells[c]
    }

    /// Per-cell eigenvalue bounds of A; the local uniform ellipticity data.
    pub fn ellipticity_bounds(&self) -> Vec<(f64, f64)> {
        self.cells.iter().map(|m| m.eigen_bounds()).collect()
    }
}
