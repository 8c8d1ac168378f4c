//! Variational solvers: projected Barzilai-Borwein descent for
//! box-constrained energy minimization (capacities) and a preconditioned
//! descent on the weight-normalized Rayleigh quotient (best constants).
//!
//! Both solvers are deterministic for fixed options and seeds. Iterates stay
//! feasible throughout: the box solver projects onto the constraint set every
//! step, and the Rayleigh solver rescales every iterate so the weight-mass
//! constraint holds exactly.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{
    energy_gradient_slice, energy_q_slice, weight_mass_gradient_slice, weight_mass_slice,
};
use crate::error::{Error, Result};
use crate::field::{CellField, ScalarField};
use crate::geometry::{Geometry, GeometryKind, SubsetMask};
use crate::problem::Problem;

/// Iteration controls, exposed through the scenario config.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Relative energy-change tolerance for the plateau stop.
    pub tol_energy: f64,
    /// Projected-gradient tolerance, relative to the initial residual scale.
    pub tol_grad: f64,
    /// Number of random restarts used when the potential changes sign.
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 50_000,
            tol_energy: 1e-10,
            tol_grad: 1e-8,
            multistarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Projected-gradient norm fell below `tol_grad * scale`.
    GradientTolerance,
    /// Relative energy change stayed below `tol_energy` for many consecutive
    /// accepted steps.
    EnergyPlateau,
    /// Line search could not produce any further descent.
    Stalled,
    MaxIterations,
}

/// Outcome of one variational solve. `value` always equals the objective
/// re-evaluated at `minimizer`.
#[derive(Debug, Clone)]
pub struct VariationalResult {
    pub value: f64,
    pub minimizer: ScalarField,
    pub iterations: usize,
    /// Final projected-gradient norm.
    pub residual: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// (max - min) / |best| of the optimal values across restarts; 0 for a
    /// single start. Large spread signals possible nonconvexity.
    pub multistart_spread: f64,
}

const GLL_WINDOW: usize = 8;
const ARMIJO_C1: f64 = 1e-4;
const PLATEAU_STREAK: usize = 25;
const BB_MIN: f64 = 1e-14;
const BB_MAX: f64 = 1e14;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Node roles for the box-constrained solve.
struct BoxConstraints<'a> {
    upper: &'a [f64],
    pinned: &'a [bool],
    free: &'a [bool],
}

impl BoxConstraints<'_> {
    fn project(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            if self.pinned[i] {
                x[i] = self.upper[i];
            } else if self.free[i] {
                x[i] = x[i].clamp(0.0, self.upper[i]);
            } else {
                x[i] = 0.0;
            }
        }
    }
}

struct DescentOutcome {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
    stop_reason: StopReason,
}

/// Projected BB descent with a nonmonotone (GLL) line search for the
/// box-constrained energy minimization.
fn box_descend(
    problem: &Problem,
    cons: &BoxConstraints,
    x0: Vec<f64>,
    opts: &SolverOptions,
) -> DescentOutcome {
    let n = x0.len();
    let mut x = x0;
    cons.project(&mut x);
    let mut grad = vec![0.0; n];
    let mut energy = energy_q_slice(problem, &x);
    energy_gradient_slice(problem, &x, &mut grad);
    mask_grad(&mut grad, cons.free);

    let mut trial = vec![0.0; n];
    let mut hist: Vec<f64> = vec![energy];
    let mut lambda = initial_step(&x, &grad);
    let residual0 = projected_residual_box(&x, &grad, cons, &mut trial);
    let scale = residual0.max(1.0);
    let mut residual = residual0;
    let mut plateau = 0usize;
    let mut stop_reason = StopReason::MaxIterations;
    let mut iters = 0usize;

    for it in 0..opts.max_iters {
        iters = it;
        if residual <= opts.tol_grad * scale {
            stop_reason = StopReason::GradientTolerance;
            break;
        }
        // Trial point along the projected-gradient arc at the BB step.
        let fref = hist.iter().rev().take(GLL_WINDOW).cloned().fold(f64::MIN, f64::max);
        let mut t = 1.0;
        let mut accepted = false;
        let mut new_energy = energy;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] - t * lambda * grad[i];
            }
            cons.project(&mut trial);
            let d_dot_g = {
                let mut s = 0.0;
                for i in 0..n {
                    s += grad[i] * (trial[i] - x[i]);
                }
                s
            };
            if d_dot_g >= 0.0 {
                // Projection produced no descent direction at this step size.
                t *= 0.5;
                continue;
            }
            new_energy = energy_q_slice(problem, &trial);
            if new_energy <= fref + ARMIJO_C1 * d_dot_g {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            stop_reason = StopReason::Stalled;
            break;
        }

        let mut new_grad = vec![0.0; n];
        energy_gradient_slice(problem, &trial, &mut new_grad);
        mask_grad(&mut new_grad, cons.free);

        // BB step from the accepted displacement.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            let y = new_grad[i] - grad[i];
            ss += s * s;
            sy += s * y;
        }
        lambda = if sy > 0.0 {
            (ss / sy).clamp(BB_MIN, BB_MAX)
        } else {
            (lambda * 2.0).clamp(BB_MIN, BB_MAX)
        };

        let de = (energy - new_energy).abs();
        std::mem::swap(&mut x, &mut trial);
        grad = new_grad;
        energy = new_energy;
        hist.push(energy);

        residual = projected_residual_box(&x, &grad, cons, &mut trial);
        if de <= opts.tol_energy * energy.abs().max(1.0) {
            plateau += 1;
            if plateau >= PLATEAU_STREAK {
                stop_reason = StopReason::EnergyPlateau;
                break;
            }
        } else {
            plateau = 0;
        }
    }
    if residual <= opts.tol_grad * scale {
        stop_reason = StopReason::GradientTolerance;
    }
    let converged = matches!(
        stop_reason,
        StopReason::GradientTolerance | StopReason::EnergyPlateau
    );
    DescentOutcome {
        value: energy_q_slice(problem, &x),
        x,
        iterations: iters,
        residual,
        converged,
        stop_reason,
    }
}

fn mask_grad(grad: &mut [f64], free: &[bool]) {
    for i in 0..grad.len() {
        if !free[i] {
            grad[i] = 0.0;
        }
    }
}

fn initial_step(x: &[f64], grad: &[f64]) -> f64 {
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if gmax > 0.0 {
        (x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0) / gmax).clamp(BB_MIN, BB_MAX)
    } else {
        1.0
    }
}

/// Norm of the unit-step projected gradient: || P(x - grad) - x ||_2.
fn projected_residual_box(
    x: &[f64],
    grad: &[f64],
    cons: &BoxConstraints,
    scratch: &mut [f64],
) -> f64 {
    for i in 0..x.len() {
        scratch[i] = x[i] - grad[i];
    }
    cons.project(scratch);
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = scratch[i] - x[i];
        s += d * d;
    }
    s.sqrt()
}

/// Minimize the energy over `0 <= phi <= upper`, `phi = upper` on pinned
/// nodes, `phi = 0` outside the free set, starting from `x0` (projected).
///
/// When the exponent differs from 2 or the potential is nonzero, a quadratic
/// potential-free instance is solved first and its minimizer seeds the real
/// problem. When the potential changes sign the solve is repeated from
/// `opts.multistarts` random feasible points and the spread of the optimal
/// values is reported.
pub(crate) fn minimize_box(
    problem: &Problem,
    upper: &ScalarField,
    pinned: &[bool],
    free: &[bool],
    opts: &SolverOptions,
) -> Result<VariationalResult> {
    let geom = problem.geometry();
    let n = geom.num_nodes();
    let uvals = upper.values();
    let cons = BoxConstraints {
        upper: uvals,
        pinned,
        free,
    };

    // Feasible start: the reference function on the pinned set, zero
    // elsewhere.
    let mut x0 = vec![0.0; n];
    cons.project(&mut x0);

    // Continuation seed through the quadratic potential-free problem.
    let needs_seed = problem.p() != 2.0 || !problem.potential().is_zero();
    if needs_seed {
        let quad = Problem::new(
            2.0,
            problem.coeff().clone(),
            CellField::zeros(Arc::clone(geom)),
            problem.weight().clone(),
            None,
        )?;
        let seed = box_descend(&quad, &cons, x0.clone(), opts);
        x0 = seed.x;
    }

    let sign_changing = problem.potential().min_value() < 0.0;
    let mut outcomes = Vec::new();
    outcomes.push(box_descend(problem, &cons, x0, opts));
    if sign_changing && opts.multistarts > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 1..opts.multistarts {
            let mut xr: Vec<f64> = (0..n).map(|i| rng.gen_range(0.0..=1.0) * uvals[i]).collect();
            cons.project(&mut xr);
            outcomes.push(box_descend(problem, &cons, xr, opts));
        }
    }

    let best_idx = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let spread = if values.len() > 1 {
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / min.abs().max(1e-300)
    } else {
        0.0
    };
    let best = outcomes.swap_remove(best_idx);
    Ok(VariationalResult {
        value: best.value,
        minimizer: ScalarField::from_values(Arc::clone(geom), best.x)?,
        iterations: best.iterations,
        residual: best.residual,
        converged: best.converged,
        stop_reason: best.stop_reason,
        multistart_spread: spread,
    })
}

/// Outcome of a constrained Rayleigh-quotient solve: the constraint
/// `integral |g| |phi|^p = 1` may be unreachable on the given free set.
pub(crate) enum RayleighOutcome {
    Solved(VariationalResult),
    /// No admissible field has positive weight mass; the constrained infimum
    /// is an empty infimum (reported upstream as an infinite constant).
    Unreachable,
}

/// True when some cell carries positive weight and at least one of its
/// corners is a free node, so the constraint can be met.
fn constraint_reachable(problem: &Problem, free: &[bool]) -> bool {
    let geom = problem.geometry();
    let g = problem.weight().values();
    (0..geom.num_cells()).any(|c| {
        g[c] > 0.0
            && geom
                .cell_corners(c)
                .as_slice()
                .iter()
                .any(|&i| free[i])
    })
}

struct RayleighEval {
    value: f64,
    grad: Vec<f64>,
}

/// Ratio value and gradient at a constraint-normalized point (mass == 1).
fn rayleigh_eval(problem: &Problem, x: &[f64], free: &[bool]) -> RayleighEval {
    let n = x.len();
    let e = energy_q_slice(problem, x);
    let mut ge = vec![0.0; n];
    energy_gradient_slice(problem, x, &mut ge);
    let mut gm = vec![0.0; n];
    weight_mass_gradient_slice(problem, x, &mut gm);
    for i in 0..n {
        ge[i] -= e * gm[i];
        if !free[i] {
            ge[i] = 0.0;
        }
    }
    RayleighEval { value: e, grad: ge }
}

fn normalize_mass(problem: &Problem, x: &mut [f64]) -> bool {
    let m = weight_mass_slice(problem, x);
    if !(m > 0.0) || !m.is_finite() {
        return false;
    }
    let s = m.powf(-1.0 / problem.p());
    for v in x.iter_mut() {
        *v *= s;
    }
    true
}

/// Direction through the linearized stiffness operator for 1D geometries
/// (tridiagonal Thomas solve over the line of nodes; non-free rows are
/// identities). Falls back to the raw gradient when unavailable.
fn preconditioned_direction(
    problem: &Problem,
    x: &[f64],
    grad: &[f64],
    free: &[bool],
    dir: &mut Vec<f64>,
) -> bool {
    let geom = problem.geometry();
    if geom.kind() == GeometryKind::Box2d {
        return false;
    }
    let p = problem.p();
    let n_nodes = geom.num_nodes();
    let n_cells = geom.num_cells();
    // Per-cell edge weight from the local second-order model of the gradient
    // term, with a relative clamp so degenerate cells keep the matrix SPD.
    let mut q: Vec<f64> = Vec::with_capacity(n_cells);
    for c in 0..n_cells {
        let xi = geom.cell_gradient(x, c);
        q.push(problem.coeff().cell(c).quad(xi));
    }
    let mut positives: Vec<f64> = q.iter().cloned().filter(|&v| v > 0.0).collect();
    if positives.is_empty() {
        return false;
    }
    positives.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = positives[positives.len() / 2];
    let (qlo, qhi) = (med * 1e-6, med * 1e6);
    let mut k = vec![0.0; n_cells];
    for c in 0..n_cells {
        let a = problem.coeff().cell(c);
        let h = {
            let corners = geom.cell_corners(c).as_slice().to_vec();
            geom.node_coord(corners[1]).x - geom.node_coord(corners[0]).x
        };
        let qc = q[c].clamp(qlo, qhi);
        let theta = if p == 2.0 { 1.0 } else { qc.powf((p - 2.0) / 2.0) };
        k[c] = p * a.a11 * theta * geom.cell_measure(c) / (h * h);
    }
    // Tridiagonal assembly: diag[i], sub[i] couples node i to i-1.
    let mut diag = vec![1.0; n_nodes];
    let mut sub = vec![0.0; n_nodes];
    let mut rhs = vec![0.0; n_nodes];
    for i in 0..n_nodes {
        if free[i] {
            diag[i] = 0.0;
            rhs[i] = -grad[i];
        }
    }
    for c in 0..n_cells {
        let corners = geom.cell_corners(c);
        let s = corners.as_slice();
        let (a, b) = (s[0], s[1]);
        if free[a] {
            diag[a] += k[c];
        }
        if free[b] {
            diag[b] += k[c];
        }
        if free[a] && free[b] {
            sub[b] = -k[c];
        }
    }
    for i in 0..n_nodes {
        if free[i] && diag[i] <= 0.0 {
            return false;
        }
    }
    // Thomas elimination; the superdiagonal of row i equals sub[i + 1] by
    // symmetry.
    let mut cp = vec![0.0; n_nodes];
    let mut dp = vec![0.0; n_nodes];
    cp[0] = if n_nodes > 1 { sub[1] / diag[0] } else { 0.0 };
    dp[0] = rhs[0] / diag[0];
    for i in 1..n_nodes {
        let m = diag[i] - sub[i] * cp[i - 1];
        if m == 0.0 {
            return false;
        }
        cp[i] = if i + 1 < n_nodes { sub[i + 1] / m } else { 0.0 };
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m;
    }
    dir.resize(n_nodes, 0.0);
    dir[n_nodes - 1] = dp[n_nodes - 1];
    for i in (0..n_nodes - 1).rev() {
        dir[i] = dp[i] - cp[i] * dir[i + 1];
    }
    for i in 0..n_nodes {
        if !free[i] {
            dir[i] = 0.0;
        }
    }
    true
}

fn rayleigh_descend(
    problem: &Problem,
    free: &[bool],
    x0: Vec<f64>,
    opts: &SolverOptions,
) -> Option<DescentOutcome> {
    let n = x0.len();
    let mut x = x0;
    for i in 0..n {
        if !free[i] {
            x[i] = 0.0;
        }
    }
    if !normalize_mass(problem, &mut x) {
        return None;
    }
    let mut eval = rayleigh_eval(problem, &x, free);
    let mut hist = vec![eval.value];
    let scale = norm2(&eval.grad).max(1.0);
    let mut lambda = initial_step(&x, &eval.grad);
    let mut plateau = 0usize;
    let mut stop_reason = StopReason::MaxIterations;
    let mut iters = 0usize;
    let mut dir: Vec<f64> = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut t_prev = 1.0f64;

    for it in 0..opts.max_iters {
        iters = it;
        let gnorm = norm2(&eval.grad);
        if gnorm <= opts.tol_grad * scale {
            stop_reason = StopReason::GradientTolerance;
            break;
        }
        let have_dir = preconditioned_direction(problem, &x, &eval.grad, free, &mut dir);
        if !have_dir {
            for i in 0..n {
                dir[i] = -lambda * eval.grad[i];
            }
        }
        let mut gd = dot(&eval.grad, &dir);
        if gd >= 0.0 {
            for i in 0..n {
                dir[i] = -lambda * eval.grad[i];
            }
            gd = dot(&eval.grad, &dir);
            if gd >= 0.0 {
                stop_reason = StopReason::Stalled;
                break;
            }
        }
        let fref = hist.iter().rev().take(GLL_WINDOW).cloned().fold(f64::MIN, f64::max);
        let mut t = (t_prev * 2.0).min(1.0);
        let mut accepted = false;
        let mut new_value = eval.value;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] + t * dir[i];
            }
            if normalize_mass(problem, &mut trial) {
                new_value = energy_q_slice(problem, &trial);
                if new_value <= fref + ARMIJO_C1 * t * gd {
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            stop_reason = StopReason::Stalled;
            break;
        }
        t_prev = t;

        let new_eval = rayleigh_eval(problem, &trial, free);
        // BB scaling update for the fallback direction.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            let y = new_eval.grad[i] - eval.grad[i];
            ss += s * s;
            sy += s * y;
        }
        lambda = if sy > 0.0 {
            (ss / sy).clamp(BB_MIN, BB_MAX)
        } else {
            (lambda * 2.0).clamp(BB_MIN, BB_MAX)
        };

        let de = (eval.value - new_value).abs();
        std::mem::swap(&mut x, &mut trial);
        eval = new_eval;
        hist.push(eval.value);
        if de <= opts.tol_energy * eval.value.abs().max(1.0) {
            plateau += 1;
            if plateau >= PLATEAU_STREAK {
                stop_reason = StopReason::EnergyPlateau;
                break;
            }
        } else {
            plateau = 0;
        }
    }
    let residual = norm2(&eval.grad);
    if residual <= opts.tol_grad * scale {
        stop_reason = StopReason::GradientTolerance;
    }
    let converged = matches!(
        stop_reason,
        StopReason::GradientTolerance | StopReason::EnergyPlateau
    );
    // Final exact normalization; value re-evaluated at the reported point.
    normalize_mass(problem, &mut x);
    let value = energy_q_slice(problem, &x) / weight_mass_slice(problem, &x);
    Some(DescentOutcome {
        x,
        value,
        iterations: iters,
        residual,
        converged,
        stop_reason,
    })
}

/// Deterministic smooth default seed supported on the free set: the
/// indicator of the free nodes smoothed by a few neighbor-averaging sweeps.
fn default_seed(geom: &Arc<Geometry>, free: &[bool]) -> Vec<f64> {
    let n = geom.num_nodes();
    let mut x: Vec<f64> = (0..n).map(|i| if free[i] { 1.0 } else { 0.0 }).collect();
    let mut next = vec![0.0; n];
    for _ in 0..5 {
        let mut acc = vec![0.0; n];
        let mut cnt = vec![0.0; n];
        for c in 0..geom.num_cells() {
            let s = geom.cell_corners(c).as_slice().to_vec();
            for &i in &s {
                for &j in &s {
                    acc[i] += x[j];
                    cnt[i] += 1.0;
                }
            }
        }
        for i in 0..n {
            next[i] = if free[i] && cnt[i] > 0.0 {
                acc[i] / cnt[i]
            } else {
                0.0
            };
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

/// Minimize the Rayleigh quotient `energy / weight-mass` over fields
/// supported on the free set, keeping the constraint exactly normalized.
/// Additional seeds are tried alongside the default one; the best outcome is
/// returned.
pub(crate) fn minimize_rayleigh(
    problem: &Problem,
    free: &[bool],
    extra_seeds: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<RayleighOutcome> {
    let geom = problem.geometry();
    if free.iter().all(|&f| !f) {
        return Err(Error::resolution(
            "no free nodes on the requested subdomain".to_string(),
        ));
    }
    if !constraint_reachable(problem, free) {
        return Ok(RayleighOutcome::Unreachable);
    }
    let mut seeds: Vec<Vec<f64>> = vec![default_seed(geom, free)];
    seeds.extend(extra_seeds.iter().cloned());
    if problem.potential().min_value() < 0.0 && opts.multistarts > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
        for _ in 1..opts.multistarts {
            seeds.push(
                (0..geom.num_nodes())
                    .map(|i| if free[i] { rng.gen_range(0.0..1.0) } else { 0.0 })
                    .collect(),
            );
        }
    }
    let mut outcomes: Vec<DescentOutcome> = Vec::new();
    for seed in seeds {
        if let Some(out) = rayleigh_descend(problem, free, seed, opts) {
            outcomes.push(out);
        }
    }
    if outcomes.is_empty() {
        return Ok(RayleighOutcome::Unreachable);
    }
    let best_idx = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let spread = if values.len() > 1 {
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / min.abs().max(1e-300)
    } else {
        0.0
    };
    let best = outcomes.swap_remove(best_idx);
    Ok(RayleighOutcome::Solved(VariationalResult {
        value: best.value,
        minimizer: ScalarField::from_values(Arc::clone(geom), best.x)?,
        iterations: best.iterations,
        residual: best.residual,
        converged: best.converged,
        stop_reason: best.stop_reason,
        multistart_spread: spread,
    }))
}

/// Free node set of a subdomain solve: interior nodes, optionally restricted
/// to a mask, minus pinned nodes.
pub(crate) fn free_nodes(
    geom: &Geometry,
    domain: Option<&SubsetMask>,
    pinned: Option<&[bool]>,
) -> Vec<bool> {
    (0..geom.num_nodes())
        .map(|i| {
            geom.is_interior(i)
                && domain.map_or(true, |d| d.contains(i))
                && pinned.map_or(true, |p| !p[i])
        })
        .collect()
}
