use crate::error::Result;
use crate::manifold::{Manifold, ManifoldPoint, TangentVector};
use crate::problems::FiniteSumProblem;

/// Variance-reduced gradient
/// `ν = ∇̃f(x) − Γ_{anchor→x}(∇̃f(anchor) − g)` with both stochastic
/// gradients taken over the same minibatch.
pub fn vr_gradient(
    problem: &dyn FiniteSumProblem,
    x: &ManifoldPoint,
    anchor: &ManifoldPoint,
    anchor_full_grad: &TangentVector,
    batch: &[usize],
) -> Result<TangentVector> {
    vr_gradient_parts(problem, x, anchor, anchor_full_grad, batch).map(|(nu, _)| nu)
}

/// Like [`vr_gradient`], also returning the plain minibatch gradient at `x`.
pub fn vr_gradient_parts(
    problem: &dyn FiniteSumProblem,
    x: &ManifoldPoint,
    anchor: &ManifoldPoint,
    anchor_full_grad: &TangentVector,
    batch: &[usize],
) -> Result<(TangentVector, TangentVector)> {
    let m = problem.manifold();
    let gx = problem.minibatch_grad(x, batch)?;
    let ga = problem.minibatch_grad(anchor, batch)?;
    let correction = ga.sub(anchor_full_grad)?;
    let moved = m.transport(anchor, x, &correction)?;
    let nu = gx.sub(&moved)?;
    Ok((nu, gx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::random_tangent;
    use crate::problems::{gen_eig_data, gen_spd_data, KarcherProblem, RayleighProblem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn problems() -> Vec<Box<dyn FiniteSumProblem>> {
        vec![
            Box::new(KarcherProblem::new(&gen_spd_data(3, 7, 10.0, 1).unwrap()).unwrap()),
            Box::new(RayleighProblem::new(Arc::new(gen_eig_data(6, 9, 0.1, 2).unwrap()))),
        ]
    }

    #[test]
    fn full_batch_gives_full_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in problems() {
            let m = p.manifold();
            let anchor = m.random_point(&mut rng);
            let x = m.retract(&anchor, &random_tangent(m, &anchor, 0.5, &mut rng).unwrap()).unwrap();
            let g = p.full_grad(&anchor).unwrap();
            let all: Vec<usize> = (0..p.len()).collect();
            let nu = vr_gradient(p.as_ref(), &x, &anchor, &g, &all).unwrap();
            let exact = p.full_grad(&x).unwrap();
            assert!((nu.rep() - exact.rep()).amax() <= 1e-12);
        }
    }

    #[test]
    fn coincident_anchor_is_unbiased_for_every_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in problems() {
            let m = p.manifold();
            let x = m.random_point(&mut rng);
            let g = p.full_grad(&x).unwrap();
            for i in 0..p.len() {
                let nu = vr_gradient(p.as_ref(), &x, &x, &g, &[i]).unwrap();
                assert!((nu.rep() - g.rep()).amax() <= 1e-12 * (1.0 + g.rep().amax()));
            }
        }
    }

    #[test]
    fn expectation_over_singletons_is_full_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in problems() {
            let m = p.manifold();
            let anchor = m.random_point(&mut rng);
            let x = m.retract(&anchor, &random_tangent(m, &anchor, 0.5, &mut rng).unwrap()).unwrap();
            let g = p.full_grad(&anchor).unwrap();
            let mut mean = TangentVector::zero(&x);
            for i in 0..p.len() {
                mean.axpy_mut(1.0 / p.len() as f64, &vr_gradient(p.as_ref(), &x, &anchor, &g, &[i]).unwrap()).unwrap();
            }
            let exact = p.full_grad(&x).unwrap();
            assert!((mean.rep() - exact.rep()).amax() <= 1e-12 * (1.0 + exact.rep().amax()));
        }
    }
}
