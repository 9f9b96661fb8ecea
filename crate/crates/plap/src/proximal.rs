//! Scalar convex calculus for ψ(r) = |r|^p/p, p ∈ [1,2].
//!
//! The Moreau–Yosida envelope
//!
//!   ψ^δ(r) = min_s [ (r−s)²/(2δ) + ψ(s) ]
//!
//! regularizes the singular flux: its derivative φ^δ = ∂ψ^δ is Lipschitz
//! with constant 1/δ and satisfies φ^δ(r) = φ(prox(r)) = (r − prox(r))/δ.
//! At p=1 this is the Huber derivative clamp(r/δ, −1, 1); at p=2 everything
//! is linear. For p ∈ (1,2) the prox solves s + δ·s^{p−1} = r on [0, |r|],
//! a monotone scalar equation handled by safeguarded Newton.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::signed_power;

const NEWTON_MAX_ITER: usize = 100;

fn validate_p(p: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::parameter(format!("power exponent p must be in [1,2], got {p}")));
    }
    Ok(())
}

/// Solve s + δ·s^{p−1} = a for s ∈ [0, a], a ≥ 0, p ∈ (1,2).
///
/// g is strictly increasing and concave on (0, ∞), with g(0) = −a ≤ 0 and
/// g(a) = δ·a^{p−1} ≥ 0; Newton steps are clipped to the shrinking bracket.
fn prox_newton(a: f64, delta: f64, p: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let g = |s: f64| s + delta * s.powf(p - 1.0) - a;
    let dg = |s: f64| 1.0 + delta * (p - 1.0) * s.powf(p - 2.0);
    let (mut lo, mut hi) = (0.0_f64, a);
    let mut s = a / (1.0 + delta * a.powf(p - 2.0));
    let tol = 1e-15 * (1.0 + a);
    for _ in 0..NEWTON_MAX_ITER {
        let gs = g(s);
        if gs.abs() <= tol {
            return Ok(s);
        }
        if gs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let step = gs / dg(s);
        let mut next = s - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= f64::EPSILON * a {
            return Ok(0.5 * (lo + hi));
        }
        s = next;
    }
    Err(Error::numeric(format!(
        "prox newton did not converge for a={a}, delta={delta}, p={p}"
    )))
}

/// Proximal map of ψ: the unique minimizer of (r−s)²/(2δ) + |s|^p/p.
///
/// Sign-preserving, |prox(r)| ≤ |r|, nonexpansive in r. Closed forms at
/// p=2 (r/(1+δ)) and p=1 (soft threshold).
pub fn prox(r: f64, delta_my: f64, p: f64) -> Result<f64> {
    validate_p(p)?;
    if !(delta_my > 0.0) {
        return Err(Error::parameter(format!("prox needs delta > 0, got {delta_my}")));
    }
    if p == 2.0 {
        return Ok(r / (1.0 + delta_my));
    }
    if p == 1.0 {
        return Ok(r.signum() * (r.abs() - delta_my).max(0.0));
    }
    Ok(prox_newton(r.abs(), delta_my, p)?.copysign(r))
}

/// Moreau–Yosida envelope ψ^δ(r) = (r−prox)²/(2δ) + ψ(prox).
///
/// 0 ≤ ψ^δ ≤ ψ, nondecreasing in |r|, increases to ψ as δ ↓ 0.
pub fn envelope(r: f64, delta_my: f64, p: f64) -> Result<f64> {
    let s = prox(r, delta_my, p)?;
    let d = r - s;
    Ok(d * d / (2.0 * delta_my) + s.abs().powf(p) / p)
}

/// Regularized flux φ^δ(r) = ∂ψ^δ(r) = (r − prox(r))/δ = φ(prox(r)).
///
/// Odd, monotone nondecreasing, |φ^δ(r)| ≤ min(|r|/δ, |r|^{p−1}).
pub fn regularized_flux(r: f64, delta_my: f64, p: f64) -> Result<f64> {
    if p == 1.0 {
        validate_p(p)?;
        if !(delta_my > 0.0) {
            return Err(Error::parameter(format!(
                "regularized flux needs delta > 0, got {delta_my}"
            )));
        }
        return Ok((r / delta_my).clamp(-1.0, 1.0));
    }
    let s = prox(r, delta_my, p)?;
    Ok((r - s) / delta_my)
}

/// The potential driving an operator: exponent p and Moreau–Yosida δ
/// (δ = 0 means the exact, unregularized flux; requires p > 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPotential {
    p: f64,
    delta_my: f64,
}

impl PowerPotential {
    pub fn new(p: f64, delta_my: f64) -> Result<Self> {
        validate_p(p)?;
        if !(delta_my >= 0.0) || !delta_my.is_finite() {
            return Err(Error::parameter(format!("delta must be >= 0, got {delta_my}")));
        }
        Ok(PowerPotential { p, delta_my })
    }

    pub fn unregularized(p: f64) -> Result<Self> {
        Self::new(p, 0.0)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn delta_my(&self) -> f64 {
        self.delta_my
    }

    /// True iff the flux is multivalued without regularization (p = 1, δ = 0).
    pub fn needs_regularization(&self) -> bool {
        self.p == 1.0 && self.delta_my == 0.0
    }

    /// ψ(r) or ψ^δ(r).
    pub fn psi(&self, r: f64) -> f64 {
        if self.delta_my == 0.0 {
            r.abs().powf(self.p) / self.p
        } else if self.p == 2.0 {
            r * r / (2.0 * (1.0 + self.delta_my))
        } else {
            envelope(r, self.delta_my, self.p).expect("validated at construction")
        }
    }

    /// φ(r) or φ^δ(r). Callers must reject p=1, δ=0 before entering loops.
    #[inline]
    pub fn flux(&self, r: f64) -> f64 {
        debug_assert!(!self.needs_regularization());
        if self.delta_my == 0.0 {
            if self.p == 2.0 {
                r
            } else if self.p == 1.5 {
                r.abs().sqrt().copysign(r)
            } else {
                signed_power(r, self.p - 1.0)
            }
        } else if self.p == 1.0 {
            (r / self.delta_my).clamp(-1.0, 1.0)
        } else if self.p == 2.0 {
            r / (1.0 + self.delta_my)
        } else {
            regularized_flux(r, self.delta_my, self.p).expect("validated at construction")
        }
    }

    /// Smallest Lipschitz constant of the flux on any interval containing 0
    /// (infinite for the unregularized singular case p < 2, δ = 0).
    pub fn flux_lipschitz(&self) -> f64 {
        if self.p == 2.0 {
            1.0 / (1.0 + self.delta_my)
        } else if self.delta_my > 0.0 {
            1.0 / self.delta_my
        } else {
            f64::INFINITY
        }
    }

    /// Pointwise slope of the flux, capped to stay finite at the singular
    /// origin; used as the diagonal metric of the implicit-step solver.
    pub fn flux_slope(&self, r: f64) -> f64 {
        const SLOPE_CAP: f64 = 1e16;
        if self.p == 2.0 {
            return 1.0 / (1.0 + self.delta_my);
        }
        if self.delta_my == 0.0 {
            // ψ″(r) = (p−1)|r|^{p−2}
            let s = (self.p - 1.0) * r.abs().powf(self.p - 2.0);
            return s.min(SLOPE_CAP);
        }
        if self.p == 1.0 {
            return if r.abs() < self.delta_my { 1.0 / self.delta_my } else { 0.0 };
        }
        // φ^δ′(r) = ψ″(s*) / (1 + δψ″(s*)) with s* = prox(r)
        let s_star = regularized_flux(r, self.delta_my, self.p)
            .map(|f| r - self.delta_my * f)
            .unwrap_or(0.0);
        if s_star == 0.0 {
            return 1.0 / self.delta_my;
        }
        let psi2 = (self.p - 1.0) * s_star.abs().powf(self.p - 2.0);
        psi2 / (1.0 + self.delta_my * psi2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prox_closed_forms_are_exact() {
        assert!((prox(1.0, 1.0, 2.0).unwrap() - 0.5).abs() <= 1e-14);
        assert_eq!(prox(0.3, 0.5, 1.0).unwrap(), 0.0); // soft threshold, |r| <= δ
        assert!((prox(2.0, 0.5, 1.0).unwrap() - 1.5).abs() <= 1e-14);
        assert!((prox(-2.0, 0.5, 1.0).unwrap() + 1.5).abs() <= 1e-14);
    }

    #[test]
    fn prox_rejects_bad_parameters() {
        assert!(prox(1.0, 0.0, 1.5).is_err());
        assert!(prox(1.0, 0.1, 2.5).is_err());
        assert!(prox(1.0, 0.1, 0.9).is_err());
    }

    #[test]
    fn prox_matches_grid_scan_of_the_objective() {
        let (r, delta, p) = (1.0, 0.1, 1.5);
        let objective =
            |s: f64| (r - s) * (r - s) / (2.0 * delta) + s.abs().powf(p) / p;
        let n = 2_000_000usize;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let s = -1.0 + 2.0 * i as f64 / n as f64;
            let v = objective(s);
            if v < best.0 {
                best = (v, s);
            }
        }
        let got = prox(r, delta, p).unwrap();
        assert!(
            (got - best.1).abs() <= 1.5e-6,
            "prox {got} vs scan {}",
            best.1
        );
    }

    #[test]
    fn prox_shrinks_and_preserves_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let r: f64 = rng.random_range(-5.0..5.0);
            let delta = rng.random_range(1e-4..1.0);
            let p = rng.random_range(1.0..2.0);
            let s = prox(r, delta, p).unwrap();
            assert!(s.abs() <= r.abs() + 1e-15);
            assert!(s == 0.0 || s.signum() == r.signum());
        }
    }

    #[test]
    fn prox_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let r1: f64 = rng.random_range(-5.0..5.0);
            let r2: f64 = rng.random_range(-5.0..5.0);
            let delta = rng.random_range(1e-4..1.0);
            let p = rng.random_range(1.0..2.0);
            let s1 = prox(r1, delta, p).unwrap();
            let s2 = prox(r2, delta, p).unwrap();
            assert!((s1 - s2).abs() <= (r1 - r2).abs() + 1e-14);
        }
    }

    #[test]
    fn envelope_at_zero_and_quadratic_closed_form() {
        assert_eq!(envelope(0.0, 0.3, 1.5).unwrap(), 0.0);
        for r in [0.5, -1.5, 3.0] {
            let d = 0.2;
            let got = envelope(r, d, 2.0).unwrap();
            assert!((got - r * r / (2.0 * (1.0 + d))).abs() < 1e-14);
        }
    }

    #[test]
    fn envelope_increases_to_psi_as_delta_shrinks() {
        let psi1 = 2.0 / 3.0; // ψ(1) at p = 1.5
        let mut prev = 0.0;
        for delta in [0.1, 0.01, 0.001] {
            let v = envelope(1.0, delta, 1.5).unwrap();
            assert!(v > prev && v < psi1, "delta={delta}: {v}");
            prev = v;
        }
        assert!(psi1 - prev < 1e-2);
    }

    #[test]
    fn flux_at_zero_and_huber_clamp() {
        assert_eq!(regularized_flux(0.0, 0.3, 1.5).unwrap(), 0.0);
        for r in [-1.0, -0.05, 0.02, 2.0] {
            let d = 0.1;
            let got = regularized_flux(r, d, 1.0).unwrap();
            assert_eq!(got, (r / d).clamp(-1.0, 1.0));
        }
    }

    #[test]
    fn flux_matches_envelope_finite_difference() {
        let (r, delta, p) = (2.0, 0.05, 1.5);
        let tau = 1e-6;
        let fd = (envelope(r + tau, delta, p).unwrap() - envelope(r - tau, delta, p).unwrap())
            / (2.0 * tau);
        let got = regularized_flux(r, delta, p).unwrap();
        assert!((got - fd).abs() < 1e-6, "flux {got} vs fd {fd}");
    }

    #[test]
    fn flux_is_odd_monotone_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let delta = rng.random_range(1e-3..0.5);
            let p = rng.random_range(1.0..=2.0);
            let mut pts: Vec<f64> = (0..20).map(|_| rng.random_range(-4.0..4.0)).collect();
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = f64::NEG_INFINITY;
            for &r in &pts {
                let f = regularized_flux(r, delta, p).unwrap();
                let fneg = regularized_flux(-r, delta, p).unwrap();
                assert!((f + fneg).abs() <= 1e-12 * (1.0 + f.abs()));
                assert!(f == 0.0 || f.signum() == r.signum());
                assert!(f.abs() <= r.abs() / delta + 1e-12);
                assert!(f.abs() <= r.abs().powf(p - 1.0) + 1e-12);
                assert!(f >= prev - 1e-12);
                prev = f;
            }
        }
    }

    #[test]
    fn flux_times_argument_dominates_envelope() {
        // φ^δ(a)·a ≥ ψ^δ(a), a consequence of convexity and ψ^δ(0) = 0
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-8.0..8.0);
            let delta = rng.random_range(1e-4..0.5);
            let p = rng.random_range(1.0..=2.0);
            let lhs = regularized_flux(a, delta, p).unwrap() * a;
            let rhs = envelope(a, delta, p).unwrap();
            assert!(lhs >= rhs - 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn envelope_error_is_linear_in_delta() {
        // |ψ^δ(a) − ψ(a)| ≤ C·δ·(1+ψ(a)) with one fitted C over the range
        let mut fitted: f64 = 0.0;
        for p in [1.0, 1.3, 1.5, 1.8, 2.0] {
            for k in 0..200 {
                let a = -10.0 + 20.0 * k as f64 / 199.0;
                for delta in [1e-4, 1e-3, 1e-2, 0.1] {
                    let psi = a.abs().powf(p) / p;
                    let gap = (envelope(a, delta, p).unwrap() - psi).abs();
                    fitted = fitted.max(gap / (delta * (1.0 + psi)));
                }
            }
        }
        assert!(fitted > 0.0 && fitted <= 1.5, "fitted C = {fitted}");
    }

    #[test]
    fn signed_power_difference_product_bound() {
        // (a−b)(a^{[m−1]}−b^{[m−1]}) ≥ c|a−b|^m with fitted c > 0;
        // the sharp constant is 2^{2−m}, attained at b = −a
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for m in [2.0, 3.0, 4.0] {
            let mut fitted = f64::INFINITY;
            for _ in 0..2000 {
                let a: f64 = rng.random_range(-3.0..3.0);
                let b: f64 = rng.random_range(-3.0..3.0);
                if (a - b).abs() < 1e-8 {
                    continue;
                }
                let lhs = (a - b) * (signed_power(a, m - 1.0) - signed_power(b, m - 1.0));
                fitted = fitted.min(lhs / (a - b).abs().powf(m));
            }
            let sharp = 2.0f64.powf(2.0 - m);
            assert!(fitted > 0.0, "m={m}: fitted {fitted}");
            assert!(fitted >= sharp - 1e-9, "m={m}: fitted {fitted} < {sharp}");
        }
    }

    #[test]
    fn potential_flux_selection_rules() {
        let exact = PowerPotential::unregularized(1.5).unwrap();
        assert_eq!(exact.flux(0.25), 0.5);
        assert_eq!(exact.flux(-0.25), -0.5);
        let tv = PowerPotential::new(1.0, 0.0).unwrap();
        assert!(tv.needs_regularization());
        let huber = PowerPotential::new(1.0, 0.1).unwrap();
        assert_eq!(huber.flux(0.05), 0.5);
        assert_eq!(huber.flux(5.0), 1.0);
        assert_eq!(huber.flux_lipschitz(), 10.0);
        let heat = PowerPotential::unregularized(2.0).unwrap();
        assert_eq!(heat.flux(1.25), 1.25);
        assert_eq!(heat.flux_lipschitz(), 1.0);
        assert_eq!(exact.flux_lipschitz(), f64::INFINITY);
    }

    #[test]
    fn potential_psi_matches_free_functions() {
        let pot = PowerPotential::new(1.5, 0.05).unwrap();
        for r in [-2.0, -0.3, 0.0, 0.7, 4.0] {
            assert_eq!(pot.psi(r), envelope(r, 0.05, 1.5).unwrap());
            assert!((pot.flux(r) - regularized_flux(r, 0.05, 1.5).unwrap()).abs() <= 1e-15);
        }
        let exact = PowerPotential::unregularized(1.5).unwrap();
        assert!((exact.psi(2.0) - 2.0f64.powf(1.5) / 1.5).abs() < 1e-15);
    }
}
