//! Executable diagnostics for the convergence assumptions: gradient checks,
//! dense reconstructions of the L-BFGS operators, geodesic triangle bounds
//! and empirical smoothness/convexity constants.

mod dense;
mod geometry;
mod probe;

pub use dense::{dense_hessian, dense_inverse_hessian, lemma1_check, two_loop_vs_dense, Lemma1Outcome};
pub use geometry::{transport_isometry_check, triangle_check, SPD_CURVATURE_LOWER_BOUND};
pub use probe::{fd_gradient_check, smoothness_convexity_probe, FD_STEP, FD_TOL};

use std::fmt::Write as _;

/// One diagnostic line.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Group, e.g. `lemma1`.
    pub check: String,
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    /// Signed slack; positive when the check holds.
    pub margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticReport {
    /// Where the inputs came from (run id, seed, ...).
    pub provenance: String,
    pub checks: Vec<Check>,
}

impl DiagnosticReport {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self { provenance: provenance.into(), checks: Vec::new() }
    }

    /// Records `measured <= bound`.
    pub fn at_most(&mut self, check: &str, name: &str, measured: f64, bound: f64) {
        let pass = measured <= bound;
        self.push(check, name, measured, bound, pass, bound - measured);
    }

    /// Records `measured >= bound`.
    pub fn at_least(&mut self, check: &str, name: &str, measured: f64, bound: f64) {
        let pass = measured >= bound;
        self.push(check, name, measured, bound, pass, measured - bound);
    }

    /// Records a value with no pass condition.
    pub fn info(&mut self, check: &str, name: &str, measured: f64) {
        self.push(check, name, measured, f64::NAN, true, f64::NAN);
    }

    pub fn push(&mut self, check: &str, name: &str, measured: f64, bound: f64, pass: bool, margin: f64) {
        self.checks.push(Check { check: check.into(), name: name.into(), measured, bound, pass, margin });
    }

    pub fn extend(&mut self, other: DiagnosticReport) {
        self.checks.extend(other.checks);
        if self.provenance.is_empty() {
            self.provenance = other.provenance;
        } else if !other.provenance.is_empty() && other.provenance != self.provenance {
            self.provenance = format!("{}; {}", self.provenance, other.provenance);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, check: &str, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.check == check && c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,name,measured,bound,pass\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{:.16e},{:.16e},{}", c.check, c.name, c.measured, c.bound, c.pass);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if !self.provenance.is_empty() {
            let _ = writeln!(s, "# inputs: {}", self.provenance);
        }
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(4);
        let _ = writeln!(s, "{:<12} {:<w$} {:>14} {:>14} {:>14}  result", "check", "name", "measured", "bound", "margin");
        for c in &self.checks {
            let result = if c.bound.is_nan() { "info" } else if c.pass { "pass" } else { "FAIL" };
            let _ = writeln!(
                s,
                "{:<12} {:<w$} {:>14.6e} {:>14.6e} {:>14.6e}  {}",
                c.check, c.name, c.measured, c.bound, c.margin, result
            );
        }
        s
    }
}

/// Constants appearing in the convergence statements. Unknown entries are
/// NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceConstants {
    /// Smoothness constant.
    pub l: f64,
    /// Strong-convexity constant.
    pub s: f64,
    /// Gradient-dominance constant κ.
    pub kappa: f64,
    /// Inverse-Hessian eigenvalue bounds γ ≤ Γ.
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Hessian bounds λ ≤ Λ.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Sectional curvature lower bound.
    pub c_delta: f64,
    /// Diameter bound.
    pub d_diam: f64,
    pub zeta: f64,
    pub beta_rate: f64,
    pub p_const: f64,
    pub q_prime: f64,
    pub mu0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps: f64,
}

impl Default for ConvergenceConstants {
    fn default() -> Self {
        let n = f64::NAN;
        Self {
            l: n,
            s: n,
            kappa: n,
            gamma_lo: n,
            gamma_hi: n,
            lambda_lo: n,
            lambda_hi: n,
            c_delta: n,
            d_diam: n,
            zeta: n,
            beta_rate: n,
            p_const: n,
            q_prime: n,
            mu0: n,
            alpha1: n,
            alpha2: n,
            eps: n,
        }
    }
}

/// `ζ = d√|c| / tanh(d√|c|)` for `c < 0`, and 1 otherwise (its limit as
/// the curvature bound goes to zero).
pub fn zeta_of(c_delta: f64, d_diam: f64) -> f64 {
    assert!(d_diam >= 0.0, "diameter bound must be nonnegative");
    if c_delta >= 0.0 {
        return 1.0;
    }
    let x = d_diam * c_delta.abs().sqrt();
    if x < 1e-8 {
        // x / tanh x = 1 + x²/3 + O(x⁴)
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub p: f64,
    pub q_prime: f64,
    /// `None` when `p >= 1`, where the rate formula does not apply.
    pub beta: Option<f64>,
}

impl RateReport {
    pub fn linear(&self) -> bool {
        self.beta.is_some_and(|b| b < 1.0)
    }
}

/// Rate constants for the strongly convex case, evaluated at `T` epochs:
/// `p = L/S + (2η₂/S)(2η₂L³Γ² − Sκγ)`, `q′ = 6η₂²L³Γ²/S`,
/// `β = (q′ + pᵀ(1 − p − q′)) / (1 − p)`.
pub fn prop1_rate_report(c: &ConvergenceConstants, eta2: f64, epochs: u32) -> RateReport {
    let (l, s, g_hi) = (c.l, c.s, c.gamma_hi);
    let p = l / s + 2.0 * eta2 / s * (2.0 * eta2 * l.powi(3) * g_hi * g_hi - s * c.kappa * c.gamma_lo);
    let q_prime = 6.0 * eta2 * eta2 * l.powi(3) * g_hi * g_hi / s;
    let beta = if p < 1.0 && p.is_finite() && q_prime.is_finite() {
        let pt = if epochs > i32::MAX as u32 { 0.0 } else { p.powi(epochs as i32) };
        Some((q_prime + pt * (1.0 - p - q_prime)) / (1.0 - p))
    } else {
        None
    };
    RateReport { p, q_prime, beta }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        assert_eq!(zeta_of(-1.0, 0.0), 1.0);
        assert!((zeta_of(-1.0, 1.0) - 1.0 / 1f64.tanh()).abs() < 1e-15);
        assert!((zeta_of(-1.0, 1.0) - 1.3130352854993312).abs() < 1e-12);
        assert_eq!(zeta_of(0.0, 5.0), 1.0);
        assert_eq!(zeta_of(2.0, 5.0), 1.0);
    }

    #[test]
    fn zeta_is_monotone() {
        let grid: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
        for c in [-0.01, -0.5, -1.0, -4.0] {
            for w in grid.windows(2) {
                assert!(zeta_of(c, w[1]) >= zeta_of(c, w[0]));
            }
        }
        for d in [0.1, 1.0, 3.0] {
            assert!(zeta_of(-0.1, d) <= zeta_of(-0.5, d));
            assert!(zeta_of(-0.5, d) <= zeta_of(-2.0, d));
        }
    }

    #[test]
    fn rate_limits() {
        let c = ConvergenceConstants { l: 1.0, s: 2.0, kappa: 2.0, gamma_lo: 0.5, gamma_hi: 1.0, ..Default::default() };
        let r = prop1_rate_report(&c, 0.0, 10);
        assert_eq!(r.p, 0.5);
        assert_eq!(r.q_prime, 0.0);
        let small = prop1_rate_report(&c, 1e-4, 10);
        assert!(small.linear(), "{small:?}");
        let direct = (small.q_prime + small.p.powi(10) * (1.0 - small.p - small.q_prime)) / (1.0 - small.p);
        assert_eq!(small.beta, Some(direct));
    }

    #[test]
    fn rate_inapplicable_when_p_at_least_one() {
        let c = ConvergenceConstants { l: 3.0, s: 1.0, kappa: 1.0, gamma_lo: 0.1, gamma_hi: 1.0, ..Default::default() };
        let r = prop1_rate_report(&c, 0.01, 5);
        assert!(r.p >= 1.0);
        assert_eq!(r.beta, None);
        assert!(!r.linear());
    }

    #[test]
    fn report_serialization() {
        let mut r = DiagnosticReport::new("run=a seed=1");
        r.at_most("fd", "component", 1e-6, 1e-4);
        r.at_least("lemma1", "logdet", -1.0, 0.0);
        r.info("probe", "L", 2.0);
        assert!(!r.all_pass());
        assert_eq!(r.failures().count(), 1);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "check,name,measured,bound,pass");
        assert!(lines[1].ends_with(",true") && lines[2].ends_with(",false"));
        assert!(r.to_table().contains("FAIL"));
        assert!(r.to_table().contains("run=a seed=1"));
    }
}
