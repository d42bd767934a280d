//! Browser demo. Each exported function takes plain numbers and returns a
//! JSON string; on failure the JSON is `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use rslbfgs::harness::{generate, Algorithm, ExperimentSpec, Instance, Settings};
use rslbfgs::manifold::Sphere;
use rslbfgs::{Manifold, Result};

/// Desk-scale run sizes keep a browser tab responsive.
pub const MAX_KARCHER_N: usize = 30;
pub const MAX_EIG_DIM: usize = 200;
pub const MAX_EIG_SAMPLES: usize = 20_000;
pub const MAX_EPOCHS: usize = 40;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub algorithm: String,
    pub passes: Vec<f64>,
    pub error: Vec<f64>,
    pub termination: String,
}

#[derive(Debug, Serialize)]
pub struct Convergence {
    pub problem: String,
    pub curves: Vec<Curve>,
}

#[derive(Debug, Serialize)]
pub struct Transport {
    /// Points along the geodesic.
    pub path: Vec<[f64; 3]>,
    /// The transported vector at each point.
    pub vectors: Vec<[f64; 3]>,
    /// Its norm, constant up to roundoff.
    pub norms: Vec<f64>,
    /// Angle in radians between it and the geodesic's velocity, also constant.
    pub angles: Vec<f64>,
}

fn check(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(rslbfgs::Error::InvalidParameter(msg.into()))
    }
}

fn convergence(settings: &Settings) -> Result<Convergence> {
    let spec = ExperimentSpec::from_settings(settings)?;
    let inst = Instance::new(generate(&spec.problem, spec.data_seed())?)?;
    let x0 = inst.start(spec.start_seed());
    let mut curves = Vec::new();
    for (&a, cfg) in spec.algorithms.iter().zip(&spec.configs) {
        let t = inst.run(a, cfg, &x0)?;
        curves.push(Curve {
            algorithm: a.name().to_string(),
            passes: t.records.iter().map(|r| r.passes).collect(),
            error: t.records.iter().map(|r| r.error).collect(),
            termination: format!("{:?}", t.termination),
        });
    }
    Ok(Convergence { problem: spec.problem.kind().to_string(), curves })
}

/// Karcher mean of `count` random SPD matrices of size `n`, rSV-LBFGS
/// against RSVRG with the desk preset's other settings.
pub fn karcher_convergence(n: usize, count: usize, cond: f64, eta2: f64, epochs: usize, seed: u64) -> Result<Convergence> {
    check((2..=MAX_KARCHER_N).contains(&n), format!("n must lie in [2, {MAX_KARCHER_N}]"))?;
    check((2..=500).contains(&count), "count must lie in [2, 500]")?;
    check((1..=MAX_EPOCHS).contains(&epochs), format!("epochs must lie in [1, {MAX_EPOCHS}]"))?;
    let mut s = Settings::new();
    s.set("preset", "karcher-desk");
    for (k, v) in [
        ("n", n.to_string()),
        ("count", count.to_string()),
        ("cond", cond.to_string()),
        ("rsv-lbfgs.eta2", eta2.to_string()),
        ("epochs", epochs.to_string()),
        ("batch", 10.min(count).to_string()),
        ("seed", seed.to_string()),
    ] {
        s.set(k, v);
    }
    convergence(&s)
}

/// Leading eigenvector of `samples` vectors in dimension `d`, all three
/// algorithms. `option` picks how rSV-LBFGS forms correction pairs.
pub fn eig_convergence(d: usize, samples: usize, gap: f64, option: u32, epochs: usize, seed: u64) -> Result<Convergence> {
    check((2..=MAX_EIG_DIM).contains(&d), format!("d must lie in [2, {MAX_EIG_DIM}]"))?;
    check((d..=MAX_EIG_SAMPLES).contains(&samples), format!("samples must lie in [d, {MAX_EIG_SAMPLES}]"))?;
    check((1..=MAX_EPOCHS).contains(&epochs), format!("epochs must lie in [1, {MAX_EPOCHS}]"))?;
    let mut s = Settings::new();
    s.set("preset", "eig-desk");
    for (k, v) in [
        ("d", d.to_string()),
        ("samples", samples.to_string()),
        ("gap", gap.to_string()),
        ("rsv-lbfgs.option", option.to_string()),
        ("epochs", epochs.to_string()),
        ("batch", 100.min(samples).to_string()),
        ("seed", seed.to_string()),
    ] {
        s.set(k, v);
    }
    if option == 1 {
        // best of a small desk-scale grid for displacement pairs
        s.set("rsv-lbfgs.interval", "5");
        s.set("rsv-lbfgs.eta1", "0.3");
    }
    convergence(&s)
}

/// Transports a unit vector at the north pole of the 2-sphere along the
/// geodesic leaving in direction `heading` for arc length `arc`, sampled at
/// `steps + 1` points. The vector starts at angle `vector_angle` from the
/// velocity.
pub fn sphere_transport(heading: f64, arc: f64, vector_angle: f64, steps: usize) -> Result<Transport> {
    check((1..=1000).contains(&steps), "steps must lie in [1, 1000]")?;
    check(arc.is_finite() && arc.abs() < 3.1, "arc must be finite and below pi in magnitude")?;
    let s2 = Sphere::new(3);
    let x = s2.point(&[0.0, 0.0, 1.0])?;
    let dir = [heading.cos(), heading.sin(), 0.0];
    let perp = [-heading.sin(), heading.cos(), 0.0];
    let (c, sn) = (vector_angle.cos(), vector_angle.sin());
    let u = s2.tangent(&x, &[c * dir[0] + sn * perp[0], c * dir[1] + sn * perp[1], 0.0])?;
    let mut out = Transport { path: Vec::new(), vectors: Vec::new(), norms: Vec::new(), angles: Vec::new() };
    for k in 0..=steps {
        let t = arc * k as f64 / steps as f64;
        let y = s2.retract(&x, &s2.tangent(&x, &[t * dir[0], t * dir[1], 0.0])?)?;
        let v = s2.transport(&x, &y, &u)?;
        // velocity of the geodesic at y
        let vel = s2.transport(&x, &y, &s2.tangent(&x, &dir)?)?;
        let n = s2.norm(&y, &v)?;
        let cos = s2.inner(&y, &v, &vel)? / (n * s2.norm(&y, &vel)?);
        let p = y.rep();
        let r = v.rep();
        out.path.push([p[0], p[1], p[2]]);
        out.vectors.push([r[0], r[1], r[2]]);
        out.norms.push(n);
        out.angles.push(cos.clamp(-1.0, 1.0).acos());
    }
    Ok(out)
}

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[wasm_bindgen(js_name = karcherConvergence)]
pub fn karcher_convergence_js(n: usize, count: usize, cond: f64, eta2: f64, epochs: usize, seed: u32) -> String {
    to_json(karcher_convergence(n, count, cond, eta2, epochs, seed.into()))
}

#[wasm_bindgen(js_name = eigConvergence)]
pub fn eig_convergence_js(d: usize, samples: usize, gap: f64, option: u32, epochs: usize, seed: u32) -> String {
    to_json(eig_convergence(d, samples, gap, option, epochs, seed.into()))
}

#[wasm_bindgen(js_name = sphereTransport)]
pub fn sphere_transport_js(heading: f64, arc: f64, vector_angle: f64, steps: usize) -> String {
    to_json(sphere_transport(heading, arc, vector_angle, steps))
}

/// Names accepted by the convergence functions, for the page's legend.
#[wasm_bindgen(js_name = algorithmNames)]
pub fn algorithm_names() -> String {
    serde_json::to_string(&Algorithm::ALL.iter().map(|a| a.name()).collect::<Vec<_>>()).unwrap_or_default()
}
