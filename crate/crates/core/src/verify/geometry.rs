use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{zeta_of, DiagnosticReport};
use crate::error::Result;
use crate::manifold::{random_tangent, Manifold, ManifoldHandle};

/// Sectional curvature lower bound of SPD under the affine-invariant metric.
pub const SPD_CURVATURE_LOWER_BOUND: f64 = -0.5;

/// Samples geodesic triangles with vertex `x` and the other two corners
/// within `radius` of it, and checks
/// `a² ≤ ζ(c_δ, c)·b² + c² − 2bc·cos A`, where `b, c` are the sides at `x`,
/// `A` the angle between them and `a` the opposite side.
pub fn triangle_check(m: &ManifoldHandle, c_delta: f64, trials: usize, radius: f64, seed: u64) -> Result<DiagnosticReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0usize;
    for _ in 0..trials {
        let x = m.random_point(&mut rng);
        let y = m.retract(&x, &random_tangent(m, &x, radius, &mut rng)?)?;
        let z = m.retract(&x, &random_tangent(m, &x, radius, &mut rng)?)?;
        let lb = m.log(&x, &y)?;
        let lc = m.log(&x, &z)?;
        let b = m.norm(&x, &lb)?;
        let c = m.norm(&x, &lc)?;
        let a = m.dist(&y, &z)?;
        // b·c·cos A is the inner product of the two log vectors
        let bc_cos = m.inner(&x, &lb, &lc)?;
        let rhs = zeta_of(c_delta, c) * b * b + c * c - 2.0 * bc_cos;
        let scale = a * a + zeta_of(c_delta, c) * b * b + c * c + 2.0 * b * c;
        let excess = (a * a - rhs) / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(excess);
        if excess > 1e-9 {
            failures += 1;
        }
    }
    let mut r = DiagnosticReport::new(format!("manifold={} c_delta={c_delta} radius={radius} seed={seed}", m.name()));
    r.at_most("triangle", &format!("{}_worst_excess", m.name()), worst, 1e-9);
    r.at_most("triangle", &format!("{}_violations", m.name()), failures as f64, 0.0);
    r.info("triangle", &format!("{}_trials", m.name()), trials as f64);
    Ok(r)
}

/// `|<Γu, Γv> − <u, v>|` over random pairs of points and tangents.
pub fn transport_isometry_check(m: &ManifoldHandle, trials: usize, radius: f64, seed: u64) -> Result<DiagnosticReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = m.random_point(&mut rng);
        let y = m.retract(&x, &random_tangent(m, &x, radius, &mut rng)?)?;
        let u = random_tangent(m, &x, 1.0, &mut rng)?;
        let v = random_tangent(m, &x, 1.0, &mut rng)?;
        let before = m.inner(&x, &u, &v)?;
        let after = m.inner(&y, &m.transport(&x, &y, &u)?, &m.transport(&x, &y, &v)?)?;
        worst = worst.max((after - before).abs());
    }
    let mut r = DiagnosticReport::new(format!("manifold={} radius={radius} seed={seed}", m.name()));
    r.at_most("transport", &format!("{}_isometry_gap", m.name()), worst, 1e-10);
    Ok(r)
}
