//! The energy functional, its first variation, the simplified energy of a
//! positive solution, the Picone Lagrangian, and the weight-mass constraint
//! functional.
//!
//! Quadrature convention: the gradient term uses the per-cell gradient of the
//! piecewise-(bi)linear nodal field; zero-order terms pair the cell value of
//! the potential/weight with the corner average of the nodal field. Both
//! terms are exactly p-homogeneous in the field.

use crate::error::{Error, Result};
use crate::field::{CellField, ScalarField};
use crate::problem::Problem;

#[inline]
fn pow_p_half(q: f64, p: f64) -> f64 {
    // q >= 0 is the squared A-norm of the gradient; returns q^(p/2).
    if p == 2.0 {
        q
    } else if p == 3.0 {
        q * q.sqrt()
    } else {
        q.powf(p / 2.0)
    }
}

#[inline]
fn pow_abs_p(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else {
        v.abs().powf(p)
    }
}

pub(crate) fn energy_q_slice(problem: &Problem, vals: &[f64]) -> f64 {
    let geom = problem.geometry();
    let p = problem.p();
    let vcells = problem.potential().values();
    let mut total = 0.0;
    for c in 0..geom.num_cells() {
        let xi = geom.cell_gradient(vals, c);
        let q = problem.coeff().cell(c).quad(xi);
        let m = geom.cell_measure(c);
        let mut cell = pow_p_half(q, p);
        if vcells[c] != 0.0 {
            let avg = geom.cell_average(vals, c);
            cell += vcells[c] * pow_abs_p(avg, p);
        }
        total += m * cell;
    }
    total
}

pub(crate) fn energy_gradient_slice(problem: &Problem, vals: &[f64], grad: &mut [f64]) {
    let geom = problem.geometry();
    let p = problem.p();
    let vcells = problem.potential().values();
    grad.iter_mut().for_each(|g| *g = 0.0);

    let eps2 = if p < 2.0 {
        let mut scale: f64 = 0.0;
        for c in 0..geom.num_cells() {
            let xi = geom.cell_gradient(vals, c);
            scale = scale.max(problem.coeff().cell(c).quad(xi));
        }
        (1e-10_f64).powi(2) * scale
    } else {
        0.0
    };

    for c in 0..geom.num_cells() {
        let xi = geom.cell_gradient(vals, c);
        let a = problem.coeff().cell(c);
        let q = a.quad(xi);
        let m = geom.cell_measure(c);
        let w = if q > 0.0 || eps2 > 0.0 {
            if p == 2.0 {
                p
            } else {
                p * (q + eps2).powf((p - 2.0) / 2.0)
            }
        } else {
            0.0
        };
        let axi = a.apply(xi);
        let corners = geom.cell_corners(c);
        match corners {
            crate::geometry::CellCorners::Two([na, nb]) => {
                let h = geom.node_coord(nb).x - geom.node_coord(na).x;
                let d = m * w * axi[0] / h;
                grad[na] -= d;
                grad[nb] += d;
            }
            crate::geometry::CellCorners::Four([n00, n10, n01, n11]) => {
                let hx = geom.node_coord(n10).x - geom.node_coord(n00).x;
                let hy = geom.node_coord(n01).y - geom.node_coord(n00).y;
                let gx = m * w * axi[0] / (2.0 * hx);
                let gy = m * w * axi[1] / (2.0 * hy);
                grad[n00] += -gx - gy;
                grad[n10] += gx - gy;
                grad[n01] += -gx + gy;
                grad[n11] += gx + gy;
            }
        }
        if vcells[c] != 0.0 {
            let avg = geom.cell_average(vals, c);
            if avg != 0.0 {
                let slice = corners.as_slice();
                let k = slice.len() as f64;
                let vterm =
                    m * vcells[c] * p * avg.abs().powf(p - 2.0) * avg / k;
                for &n in slice {
                    grad[n] += vterm;
                }
            }
        }
    }
    for i in 0..grad.len() {
        if !geom.is_interior(i) {
            grad[i] = 0.0;
        }
    }
}

pub(crate) fn weight_mass_slice(problem: &Problem, vals: &[f64]) -> f64 {
    let geom = problem.geometry();
    let p = problem.p();
    let g = problem.weight().values();
    let mut total = 0.0;
    for c in 0..geom.num_cells() {
        if g[c] == 0.0 {
            continue;
        }
        let avg = geom.cell_average(vals, c);
        total += geom.cell_measure(c) * g[c] * pow_abs_p(avg, p);
    }
    total
}

pub(crate) fn weight_mass_gradient_slice(problem: &Problem, vals: &[f64], grad: &mut [f64]) {
    let geom = problem.geometry();
    let p = problem.p();
    let g = problem.weight().values();
    grad.iter_mut().for_each(|x| *x = 0.0);
    for c in 0..geom.num_cells() {
        if g[c] == 0.0 {
            continue;
        }
        let avg = geom.cell_average(vals, c);
        if avg == 0.0 {
            continue;
        }
        let corners = geom.cell_corners(c);
        let slice = corners.as_slice();
        let k = slice.len() as f64;
        let w = geom.cell_measure(c) * g[c] * p * avg.abs().powf(p - 2.0) * avg / k;
        for &n in slice {
            grad[n] += w;
        }
    }
    for i in 0..grad.len() {
        if !geom.is_interior(i) {
            grad[i] = 0.0;
        }
    }
}

/// Value of the energy functional: gradient term plus potential term.
pub fn energy_q(problem: &Problem, phi: &ScalarField) -> Result<f64> {
    problem.check_field(phi)?;
    Ok(energy_q_slice(problem, phi.values()))
}

/// Gradient term of the energy alone (no potential), used for diagnostics.
pub fn gradient_term(problem: &Problem, phi: &ScalarField) -> Result<f64> {
    problem.check_field(phi)?;
    let geom = problem.geometry();
    let p = problem.p();
    let vals = phi.values();
    let mut total = 0.0;
    for c in 0..geom.num_cells() {
        let xi = geom.cell_gradient(vals, c);
        let q = problem.coeff().cell(c).quad(xi);
        total += geom.cell_measure(c) * pow_p_half(q, p);
    }
    Ok(total)
}

/// First variation of the energy functional as a nodal field; components on
/// non-interior nodes are zero since those degrees of freedom are not free.
///
/// For p < 2 the degenerate factor `|grad|^{p-2}` is regularized inside the
/// derivative as `(|grad|^2 + eps^2)^{(p-2)/2}` with `eps` tied to the field
/// scale. Energy values are never regularized.
pub fn energy_gradient(problem: &Problem, phi: &ScalarField) -> Result<ScalarField> {
    problem.check_field(phi)?;
    let p = problem.p();
    if p < 1.1 {
        return Err(Error::usage(format!(
            "energy gradient requires p >= 1.1, got {p}"
        )));
    }
    let geom = problem.geometry();
    let mut grad = vec![0.0; geom.num_nodes()];
    energy_gradient_slice(problem, phi.values(), &mut grad);
    ScalarField::from_values(std::sync::Arc::clone(geom), grad)
}

/// The weight-mass functional: integral of `|g| |phi|^p`.
pub fn weight_mass(problem: &Problem, phi: &ScalarField) -> Result<f64> {
    problem.check_field(phi)?;
    Ok(weight_mass_slice(problem, phi.values()))
}

/// Gradient of the weight-mass functional; zero on non-interior nodes.
pub fn weight_mass_gradient(problem: &Problem, phi: &ScalarField) -> Result<ScalarField> {
    problem.check_field(phi)?;
    let geom = problem.geometry();
    let mut grad = vec![0.0; geom.num_nodes()];
    weight_mass_gradient_slice(problem, phi.values(), &mut grad);
    ScalarField::from_values(std::sync::Arc::clone(geom), grad)
}

/// The simplified energy of a positive solution u applied to a quotient
/// field: integral of `u^2 |grad phi|_A^2 (phi |grad u|_A + u |grad phi|_A)^{p-2}`.
///
/// With u identically 1 this collapses to the potential-free energy of phi.
pub fn simplified_energy(problem: &Problem, u: &ScalarField, phi: &ScalarField) -> Result<f64> {
    problem.check_field(u)?;
    problem.check_field(phi)?;
    if !u.positive_on_interior() {
        return Err(Error::domain(
            "simplified energy requires u > 0 on interior nodes".to_string(),
        ));
    }
    let geom = problem.geometry();
    let p = problem.p();
    let uv = u.values();
    let pv = phi.values();
    let mut total = 0.0;
    for c in 0..geom.num_cells() {
        let gu = geom.cell_gradient(uv, c);
        let gp = geom.cell_gradient(pv, c);
        let a = problem.coeff().cell(c);
        let nu = a.quad(gu).sqrt();
        let np2 = a.quad(gp);
        if np2 == 0.0 {
            // The factor u^2 |grad phi|^2 vanishes; the whole integrand does,
            // continuously in |grad phi| even for p < 2.
            continue;
        }
        let ubar = geom.cell_average(uv, c);
        let pbar = geom.cell_average(pv, c);
        let base = pbar * nu + ubar * np2.sqrt();
        total += geom.cell_measure(c) * ubar * ubar * np2 * base.powf(p - 2.0);
    }
    Ok(total)
}

/// Per-cell Picone Lagrangian comparing a nonnegative field against a
/// positive one. The continuum integrand is pointwise nonnegative; the
/// discrete cell values inherit that bound because the expression is an
/// algebraic inequality in the cell gradient pair and the value ratio.
pub fn picone_lagrangian(
    problem: &Problem,
    phi: &ScalarField,
    positive: &ScalarField,
) -> Result<CellField> {
    problem.check_field(phi)?;
    problem.check_field(positive)?;
    let geom = problem.geometry();
    let p = problem.p();
    let pv = phi.values();
    let bv = positive.values();
    let mut out = vec![0.0; geom.num_cells()];
    for c in 0..geom.num_cells() {
        let corners = geom.cell_corners(c);
        let touches_interior = corners
            .as_slice()
            .iter()
            .any(|&n| geom.is_interior(n));
        let bbar = geom.cell_average(bv, c);
        if touches_interior && bbar <= 0.0 {
            return Err(Error::domain(format!(
                "comparison field is not positive on cell {c}"
            )));
        }
        if bbar <= 0.0 {
            continue;
        }
        let pbar = geom.cell_average(pv, c);
        let t = pbar / bbar;
        let a = problem.coeff().cell(c);
        let gphi = geom.cell_gradient(pv, c);
        let gpos = geom.cell_gradient(bv, c);
        // zeta = t * grad(positive); the Lagrangian vanishes identically when
        // the cell data of phi is an exact multiple of the comparison field.
        let zeta = [t * gpos[0], t * gpos[1]];
        if zeta == gphi {
            out[c] = 0.0;
            continue;
        }
        let qphi = a.quad(gphi);
        let qzeta = a.quad(zeta);
        let cross = {
            let az = a.apply(zeta);
            az[0] * gphi[0] + az[1] * gphi[1]
        };
        let term3 = if qzeta > 0.0 {
            p * qzeta.powf((p - 2.0) / 2.0) * cross
        } else {
            0.0
        };
        out[c] = qphi.powf(p / 2.0) + (p - 1.0) * qzeta.powf(p / 2.0) - term3;
    }
    CellField::from_values(std::sync::Arc::clone(geom), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CoefficientA, SymMat2};
    use crate::geometry::{build_geometry, GeometrySpec};
    use rand::Rng;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn interval_problem(cells: usize, p: f64, a: f64, v: f64) -> Problem {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells,
        })
        .unwrap();
        let coeff = CoefficientA::scalar(Arc::clone(&g), a).unwrap();
        let pot = CellField::constant(Arc::clone(&g), v);
        let w = CellField::constant(Arc::clone(&g), 1.0);
        Problem::new(p, coeff, pot, w, None).unwrap()
    }

    fn hat(geom: &Arc<crate::geometry::Geometry>) -> ScalarField {
        ScalarField::from_fn(Arc::clone(geom), |pt| {
            if pt.x <= 0.5 {
                2.0 * pt.x
            } else {
                2.0 * (1.0 - pt.x)
            }
        })
        .unwrap()
        .restricted_to_interior()
    }

    #[test]
    fn zero_field_zero_energy() {
        let prob = interval_problem(8, 2.0, 1.0, 0.0);
        let phi = ScalarField::zeros(Arc::clone(prob.geometry()));
        assert_eq!(energy_q(&prob, &phi).unwrap(), 0.0);
    }

    #[test]
    fn hat_energy_hand_quadrature() {
        // Slope +-2 on each half: integral of 4 over (0,1) is 4.
        let prob = interval_problem(8, 2.0, 1.0, 0.0);
        let phi = hat(prob.geometry());
        assert!((energy_q(&prob, &phi).unwrap() - 4.0).abs() < 1e-12);
        // Scalar coefficient 4 multiplies the p=2 energy by 4.
        let prob4 = interval_problem(8, 2.0, 4.0, 0.0);
        let phi4 = hat(prob4.geometry());
        assert!((energy_q(&prob4, &phi4).unwrap() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn p_homogeneity_exact() {
        let prob = interval_problem(16, 2.5, 1.0, -0.7);
        let g = prob.geometry();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let phi = ScalarField::from_fn(Arc::clone(g), |_| rng.gen_range(-1.0..1.0))
            .unwrap()
            .restricted_to_interior();
        let e = energy_q(&prob, &phi).unwrap();
        for t in [-2.0, 0.5, 10.0] {
            let et = energy_q(&prob, &phi.scaled(t)).unwrap();
            let expect = t.abs().powf(2.5) * e;
            assert!(
                (et - expect).abs() <= 1e-12 * expect.abs().max(1e-12),
                "t={t}: {et} vs {expect}"
            );
        }
    }

    fn finite_difference_check(p: f64, tol: f64) {
        let prob = interval_problem(12, p, 1.0, 0.5);
        let g = prob.geometry();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let phi = ScalarField::from_fn(Arc::clone(g), |_| rng.gen_range(-1.0..1.0))
                .unwrap()
                .restricted_to_interior();
            let psi = ScalarField::from_fn(Arc::clone(g), |_| rng.gen_range(-1.0..1.0))
                .unwrap()
                .restricted_to_interior();
            let grad = energy_gradient(&prob, &phi).unwrap();
            let pair: f64 = grad
                .values()
                .iter()
                .zip(psi.values())
                .map(|(&a, &b)| a * b)
                .sum();
            let t = 1e-6;
            let mut plus = phi.clone();
            let mut minus = phi.clone();
            for i in 0..plus.values().len() {
                plus.values_mut()[i] += t * psi.values()[i];
                minus.values_mut()[i] -= t * psi.values()[i];
            }
            let fd = (energy_q(&prob, &plus).unwrap() - energy_q(&prob, &minus).unwrap())
                / (2.0 * t);
            let scale = pair.abs().max(fd.abs()).max(1e-8);
            assert!(
                (pair - fd).abs() / scale <= tol,
                "p={p}: directional derivative {pair} vs finite difference {fd}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_p2() {
        finite_difference_check(2.0, 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences_p3() {
        finite_difference_check(3.0, 1e-5);
    }

    #[test]
    fn gradient_matches_finite_differences_p15() {
        finite_difference_check(1.5, 1e-5);
    }

    #[test]
    fn gradient_of_zero_field_is_zero() {
        let prob = interval_problem(8, 2.0, 1.0, 0.3);
        let phi = ScalarField::zeros(Arc::clone(prob.geometry()));
        let grad = energy_gradient(&prob, &phi).unwrap();
        assert!(grad.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_rejects_small_p() {
        let prob = interval_problem(8, 1.05, 1.0, 0.0);
        let phi = ScalarField::zeros(Arc::clone(prob.geometry()));
        assert!(energy_gradient(&prob, &phi).is_err());
    }

    #[test]
    fn simplified_energy_collapses_for_constant_u() {
        for p in [1.5, 2.0, 3.0] {
            let prob = interval_problem(16, p, 1.0, 0.0);
            let g = prob.geometry();
            let u = ScalarField::constant(Arc::clone(g), 1.0);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
            let phi = ScalarField::from_fn(Arc::clone(g), |_| rng.gen_range(0.0..1.0))
                .unwrap()
                .restricted_to_interior();
            let e1 = simplified_energy(&prob, &u, &phi).unwrap();
            let eq = energy_q(&prob, &phi).unwrap();
            assert!(
                (e1 - eq).abs() <= 1e-12 * eq.abs().max(1e-12),
                "p={p}: {e1} vs {eq}"
            );
        }
    }

    #[test]
    fn simplified_energy_brute_force_cell_quadrature() {
        // u(x) = x on (1,2), phi a hat: compare against an independent
        // cell-by-cell sum written out longhand.
        let g = build_geometry(&GeometrySpec::Interval {
            start: 1.0,
            end: 2.0,
            cells: 4,
        })
        .unwrap();
        let coeff = CoefficientA::identity(Arc::clone(&g));
        let prob = Problem::new(
            2.0,
            coeff,
            CellField::zeros(Arc::clone(&g)),
            CellField::constant(Arc::clone(&g), 1.0),
            None,
        )
        .unwrap();
        let u = ScalarField::from_fn(Arc::clone(&g), |pt| pt.x).unwrap();
        let phi = ScalarField::from_fn(Arc::clone(&g), |pt| {
            if pt.x <= 1.5 {
                2.0 * (pt.x - 1.0)
            } else {
                2.0 * (2.0 - pt.x)
            }
        })
        .unwrap()
        .restricted_to_interior();
        // Independent quadrature: per cell, ubar^2 * (phi')^2 * h (p = 2 so
        // the middle factor has exponent 0).
        let mut expect = 0.0;
        let h = 0.25;
        let uvals = u.values();
        let pvals = phi.values();
        for c in 0..4 {
            let ubar = 0.5 * (uvals[c] + uvals[c + 1]);
            let dphi = (pvals[c + 1] - pvals[c]) / h;
            expect += ubar * ubar * dphi * dphi * h;
        }
        let got = simplified_energy(&prob, &u, &phi).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn simplified_energy_rejects_nonpositive_u() {
        let prob = interval_problem(8, 2.0, 1.0, 0.0);
        let g = prob.geometry();
        let u = ScalarField::zeros(Arc::clone(g));
        let phi = ScalarField::zeros(Arc::clone(g));
        assert!(simplified_energy(&prob, &u, &phi).is_err());
    }

    #[test]
    fn picone_equality_cases_exactly_zero() {
        // Dyadic nodal data and dyadic scaling keep the cell arithmetic exact,
        // so the equality case vanishes identically.
        let prob = interval_problem(8, 2.5, 1.0, 0.0);
        let g = prob.geometry();
        let base =
            ScalarField::from_values(Arc::clone(g), (0..9).map(|i| (i + 1) as f64).collect())
                .unwrap();
        let same = picone_lagrangian(&prob, &base, &base).unwrap();
        assert!(same.values().iter().all(|&v| v == 0.0));
        let scaled = base.scaled(2.5);
        let lag = picone_lagrangian(&prob, &scaled, &base).unwrap();
        assert!(lag.values().iter().all(|&v| v == 0.0), "{:?}", lag.values());
    }

    #[test]
    fn picone_nonnegative_on_random_pairs() {
        for p in [1.5, 2.0, 3.0] {
            let prob = interval_problem(16, p, 1.0, 0.0);
            let g = prob.geometry();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
            for _ in 0..200 {
                let phi = ScalarField::from_fn(Arc::clone(g), |_| rng.gen_range(0.0..1.0))
                    .unwrap();
                let pos = ScalarField::from_fn(Arc::clone(g), |_| rng.gen_range(0.1..1.1))
                    .unwrap();
                let lag = picone_lagrangian(&prob, &phi, &pos).unwrap();
                let max = lag.values().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                let min = lag.min_value();
                assert!(min >= -1e-10 * max.max(1e-300), "p={p}: min {min} max {max}");
            }
        }
    }

    #[test]
    fn picone_rejects_nonpositive_comparison() {
        let prob = interval_problem(8, 2.0, 1.0, 0.0);
        let g = prob.geometry();
        let phi = ScalarField::constant(Arc::clone(g), 1.0).restricted_to_interior();
        let bad = ScalarField::zeros(Arc::clone(g));
        assert!(picone_lagrangian(&prob, &phi, &bad).is_err());
    }

    #[test]
    fn picone_anisotropic_coefficient_nonnegative() {
        let g = build_geometry(&GeometrySpec::Box2d {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
            cells_x: 6,
            cells_y: 6,
        })
        .unwrap();
        let coeff = CoefficientA::from_matrix_fn(Arc::clone(&g), |pt| SymMat2 {
            a11: 1.5 + pt.x,
            a12: 0.3,
            a22: 1.0 + pt.y,
        })
        .unwrap();
        let prob = Problem::new(
            3.0,
            coeff,
            CellField::zeros(Arc::clone(&g)),
            CellField::constant(Arc::clone(&g), 1.0),
            None,
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let phi =
                ScalarField::from_fn(Arc::clone(&g), |_| rng.gen_range(0.0..1.0)).unwrap();
            let pos =
                ScalarField::from_fn(Arc::clone(&g), |_| rng.gen_range(0.2..1.2)).unwrap();
            let lag = picone_lagrangian(&prob, &phi, &pos).unwrap();
            let max = lag.values().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            assert!(lag.min_value() >= -1e-10 * max.max(1e-300));
        }
    }

    #[test]
    fn weight_mass_gradient_finite_differences() {
        let g = build_geometry(&GeometrySpec::Interval {
            start: 0.0,
            end: 1.0,
            cells: 10,
        })
        .unwrap();
        let coeff = CoefficientA::identity(Arc::clone(&g));
        let w = CellField::from_midpoint_fn(Arc::clone(&g), |pt| 1.0 / (pt.x * pt.x)).unwrap();
        let prob = Problem::new(2.0, coeff, CellField::zeros(Arc::clone(&g)), w, None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let phi = ScalarField::from_fn(Arc::clone(&g), |_| rng.gen_range(0.1..1.0))
            .unwrap()
            .restricted_to_interior();
        let psi = ScalarField::from_fn(Arc::clone(&g), |_| rng.gen_range(-1.0..1.0))
            .unwrap()
            .restricted_to_interior();
        let grad = weight_mass_gradient(&prob, &phi).unwrap();
        let pair: f64 = grad
            .values()
            .iter()
            .zip(psi.values())
            .map(|(&a, &b)| a * b)
            .sum();
        let t = 1e-7;
        let mut plus = phi.clone();
        let mut minus = phi.clone();
        for i in 0..plus.values().len() {
            plus.values_mut()[i] += t * psi.values()[i];
            minus.values_mut()[i] -= t * psi.values()[i];
        }
        let fd =
            (weight_mass(&prob, &plus).unwrap() - weight_mass(&prob, &minus).unwrap()) / (2.0 * t);
        assert!((pair - fd).abs() <= 1e-5 * fd.abs().max(1.0));
    }
}
