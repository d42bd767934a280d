use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConvergenceConstants, DiagnosticReport};
use crate::error::Result;
use crate::manifold::{random_tangent, random_unit_tangent, Manifold, ManifoldPoint};
use crate::problems::FiniteSumProblem;

/// Forward-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Largest accepted relative error, measured against `max(|analytic|, 1)`.
pub const FD_TOL: f64 = 1e-4;

/// Compares `(f(retract(x, t v)) − f(x)) / t` with `<grad f(x), v>` for
/// random unit tangents, once for a random component and once for the full
/// objective per trial.
pub fn fd_gradient_check(problem: &dyn FiniteSumProblem, x: &ManifoldPoint, trials: usize, seed: u64) -> Result<DiagnosticReport> {
    assert!(trials >= 1, "need at least one trial");
    let m = problem.manifold();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f_full = problem.value(x)?;
    let g_full = problem.full_grad(x)?;
    let rel = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(1.0);
    let mut worst_comp: f64 = 0.0;
    let mut worst_full: f64 = 0.0;
    let mut max_full_deriv: f64 = 0.0;
    for _ in 0..trials {
        let v = random_unit_tangent(m, x, &mut rng)?;
        let xt = m.retract(x, &v.scaled(FD_STEP))?;
        let i = rng.random_range(0..problem.len());
        let fd = (problem.component_value(&xt, i)? - problem.component_value(x, i)?) / FD_STEP;
        let an = m.inner(x, &problem.component_grad(x, i)?, &v)?;
        worst_comp = worst_comp.max(rel(fd, an));
        let fd = (problem.value(&xt)? - f_full) / FD_STEP;
        let an = m.inner(x, &g_full, &v)?;
        worst_full = worst_full.max(rel(fd, an));
        max_full_deriv = max_full_deriv.max(an.abs());
    }
    let mut r = DiagnosticReport::new(format!("manifold={} trials={trials} seed={seed}", m.name()));
    r.at_most("fd", "component_rel_error", worst_comp, FD_TOL);
    r.at_most("fd", "full_rel_error", worst_full, FD_TOL);
    r.info("fd", "max_full_directional_derivative", max_full_deriv);
    Ok(r)
}

/// Empirical smoothness and strong-convexity constants over random point
/// pairs within `radius` of `center`:
/// `L̂ = max ‖∇f(x) − Γ_{y→x}∇f(y)‖ / dist(x, y)` and
/// `Ŝ = min 2(f(y) − f(x) − <∇f(x), log(x, y)>) / dist(x, y)²`.
/// κ is set to Ŝ. These are estimates, not certified bounds.
pub fn smoothness_convexity_probe(
    problem: &dyn FiniteSumProblem,
    center: &ManifoldPoint,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<ConvergenceConstants> {
    assert!(trials >= 1, "need at least one trial");
    let m = problem.manifold();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l_hat: f64 = 0.0;
    let mut s_hat = f64::INFINITY;
    let mut done = 0;
    while done < trials {
        let x = m.retract(center, &random_tangent(m, center, radius, &mut rng)?)?;
        let y = m.retract(center, &random_tangent(m, center, radius, &mut rng)?)?;
        let l = m.log(&x, &y)?;
        let d = m.norm(&x, &l)?;
        if d < 1e-6 {
            continue;
        }
        let gx = problem.full_grad(&x)?;
        let gy = m.transport(&y, &x, &problem.full_grad(&y)?)?;
        l_hat = l_hat.max(m.norm(&x, &gx.sub(&gy)?)? / d);
        let resid = problem.value(&y)? - problem.value(&x)? - m.inner(&x, &gx, &l)?;
        s_hat = s_hat.min(2.0 * resid / (d * d));
        done += 1;
    }
    Ok(ConvergenceConstants { l: l_hat, s: s_hat, kappa: s_hat, ..Default::default() })
}
