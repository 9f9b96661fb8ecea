//! Radial compact-support kernels, their ε-rescaling and discrete stencils.
//!
//! A profile J is nonnegative, even, nonincreasing in |z|, J(0) > 0, with
//! unit mass. The rescaled kernel is
//!
//!   J^ε(ξ) = C_{J,p}/ε^{p+1} · J(ξ/ε),   C_{J,p}⁻¹ = ½∫ J(z)|z|^p dz,
//!
//! so that p·φ^ε(u) ↑ ‖u′‖_p^p as ε ↓ 0 for smooth u. On a uniform grid the
//! stencil weight between nodes i and j depends only on |i−j|, which keeps
//! the stencil banded with bandwidth ~ ε/h.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// J(z) = 1/2 on [−1,1]; analytic moments (C_{J,1} = 4, C_{J,2} = 6).
    Box,
    /// J(z) = 1 − |z| on [−1,1].
    Tent,
    /// Smooth bump c·exp(−1/(1−z²)) on (−1,1).
    Bump,
}

/// A kernel profile: shape plus support radius, normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelProfile {
    shape: KernelShape,
    support_radius: f64,
    /// amplitude making the profile integrate to one
    bump_scale: f64,
}

impl KernelProfile {
    pub fn new(shape: KernelShape, support_radius: f64) -> Result<Self> {
        if !(support_radius > 0.0) || !support_radius.is_finite() {
            return Err(Error::parameter(format!(
                "support radius must be positive, got {support_radius}"
            )));
        }
        let bump_scale = match shape {
            KernelShape::Bump => {
                let raw = quad::integrate(
                    |z| (-1.0 / (1.0 - z * z)).exp(),
                    -1.0 + 1e-14,
                    1.0 - 1e-14,
                    &[],
                    1e-13,
                )?;
                1.0 / raw
            }
            _ => 1.0,
        };
        Ok(KernelProfile {
            shape,
            support_radius,
            bump_scale,
        })
    }

    /// Profile with the standard support radius 1.
    pub fn standard(shape: KernelShape) -> Result<Self> {
        Self::new(shape, 1.0)
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Kernel value J(z); even, nonincreasing in |z|, unit mass.
    pub fn evaluate(&self, z: f64) -> f64 {
        let s = z.abs() / self.support_radius;
        let base = match self.shape {
            KernelShape::Box => {
                if s <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            KernelShape::Tent => (1.0 - s).max(0.0),
            KernelShape::Bump => {
                if s < 1.0 {
                    self.bump_scale * (-1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
        };
        base / self.support_radius
    }

    /// Interior kink locations of z ↦ J(z)·g(z) integrands.
    fn breakpoints(&self) -> Vec<f64> {
        vec![-self.support_radius, 0.0, self.support_radius]
    }
}

/// C_{J,m} = 1 / (½ ∫ J(z)|z|^m dz), computed by adaptive quadrature.
///
/// For the box profile this is 2(m+1): C_{J,1} = 4, C_{J,2} = 6.
pub fn normalization_constant(profile: &KernelProfile, m: f64) -> Result<f64> {
    if !(m >= 1.0) || !m.is_finite() {
        return Err(Error::parameter(format!(
            "normalization constant needs exponent >= 1, got {m}"
        )));
    }
    let r = profile.support_radius;
    // even integrand: ½∫_{-r}^{r} = ∫_0^r
    let half_moment = quad::integrate(
        |z| profile.evaluate(z) * z.powf(m),
        0.0,
        r,
        &profile.breakpoints(),
        1e-12,
    )?;
    if !(half_moment > 0.0) {
        return Err(Error::numeric(format!(
            "kernel moment integral is not positive ({half_moment})"
        )));
    }
    Ok(1.0 / half_moment)
}

/// Banded symmetric weights w_ij = h·J^ε(x_i − x_j) on a uniform grid.
///
/// Weights depend only on |i−j|; near the boundary a row simply has fewer
/// neighbors (integration restricted to the domain, the nonlocal analogue of
/// a zero Neumann condition).
#[derive(Debug, Clone)]
pub struct DiscreteStencil {
    profile: KernelProfile,
    grid: Grid,
    epsilon: f64,
    p: f64,
    normalization: f64,
    band: usize,
    offset_weights: Vec<f64>,
}

impl DiscreteStencil {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn profile(&self) -> &KernelProfile {
        &self.profile
    }

    /// C_{J,p} used in the rescaling.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Largest node offset with a (possibly) nonzero weight.
    pub fn bandwidth(&self) -> usize {
        self.band
    }

    #[inline]
    pub fn offset_weight(&self, offset: usize) -> f64 {
        if offset <= self.band {
            self.offset_weights[offset]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.offset_weight(i.abs_diff(j))
    }

    /// Σ_j w_ij over the in-domain neighbors of node i.
    pub fn row_sum(&self, i: usize) -> f64 {
        let n = self.grid.n_nodes();
        let lo = i.saturating_sub(self.band);
        let hi = (i + self.band).min(n - 1);
        (lo..=hi).map(|j| self.weight(i, j)).sum()
    }

    /// Summary record (ε, p, bandwidth, C_{J,p}, row-sum statistics) for
    /// experiment provenance.
    pub fn summary(&self) -> serde_json::Value {
        let n = self.grid.n_nodes();
        let sums: Vec<f64> = (0..n).map(|i| self.row_sum(i)).collect();
        let min = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = sums.iter().cloned().fold(0.0_f64, f64::max);
        let mean = sums.iter().sum::<f64>() / n as f64;
        serde_json::json!({
            "epsilon": self.epsilon,
            "p": self.p,
            "kernel": self.profile.shape,
            "bandwidth": self.band,
            "c_jp": self.normalization,
            "row_sum": {"min": min, "max": max, "mean": mean},
        })
    }
}

/// Build the banded stencil for J^ε on `grid`.
///
/// Requires ε ≥ 2·spacing so the kernel is resolved.
pub fn build_stencil(
    profile: &KernelProfile,
    epsilon: f64,
    p: f64,
    grid: Grid,
) -> Result<DiscreteStencil> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::parameter(format!("stencil needs p in [1,2], got {p}")));
    }
    let h = grid.spacing();
    if !(epsilon >= 2.0 * h) {
        return Err(Error::parameter(format!(
            "epsilon = {epsilon} under-resolves the kernel on this grid; minimum epsilon is {}",
            2.0 * h
        )));
    }
    let c_jp = normalization_constant(profile, p)?;
    let scale = c_jp / epsilon.powf(p + 1.0);
    let band = (epsilon * profile.support_radius / h).ceil() as usize;
    let offset_weights: Vec<f64> = (0..=band)
        .map(|o| h * scale * profile.evaluate(o as f64 * h / epsilon))
        .collect();
    Ok(DiscreteStencil {
        profile: *profile,
        grid,
        epsilon,
        p,
        normalization: c_jp,
        band,
        offset_weights,
    })
}

/// Nonlocal Sobolev-type norm
///
///   ‖f‖_{J^ε,m} = [ C_{J,m}/(2m ε) · h²ΣΣ J((x_i−x_j)/ε) |(f_i−f_j)/ε|^m ]^{1/m},
///
/// evaluated through the banded stencil (which carries the exponent-p
/// rescaling; the exponent-m normalization is adjusted here). Zero iff f is
/// constant; for m = p the m-th power equals the nonlocal energy.
pub fn nonlocal_norm(f: &Field, stencil: &DiscreteStencil, m: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(Error::parameter(format!("nonlocal_norm needs m >= 1, got {m}")));
    }
    if f.grid() != stencil.grid() {
        return Err(Error::shape(format!(
            "field on {} nodes, stencil on {}",
            f.grid().n_nodes(),
            stencil.grid().n_nodes()
        )));
    }
    let c_jm = normalization_constant(&stencil.profile, m)?;
    let rescale = (c_jm / stencil.normalization) * stencil.epsilon.powf(stencil.p - m);
    let h = f.grid().spacing();
    let v = f.values();
    let n = v.len();
    // double sum over ordered pairs via symmetry: 2·Σ_{i<j}
    let mut acc = 0.0;
    for i in 0..n {
        let hi = (i + stencil.band).min(n - 1);
        for j in (i + 1)..=hi {
            let w = stencil.offset_weight(j - i);
            if w != 0.0 {
                acc += w * (v[i] - v[j]).abs().powf(m);
            }
        }
    }
    let power = rescale / (2.0 * m) * h * 2.0 * acc;
    Ok(power.powf(1.0 / m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{lm_norm, project_mean_zero};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_mean_zero(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Field::new(
            grid,
            (0..grid.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        project_mean_zero(&f)
    }

    #[test]
    fn profiles_have_unit_mass() {
        for shape in [KernelShape::Box, KernelShape::Tent, KernelShape::Bump] {
            for r in [1.0, 0.5, 2.0] {
                let prof = KernelProfile::new(shape, r).unwrap();
                let mass =
                    quad::integrate(|z| prof.evaluate(z), -r, r, &prof.breakpoints(), 1e-12)
                        .unwrap();
                assert!((mass - 1.0).abs() < 1e-10, "{shape:?} r={r}: mass {mass}");
            }
        }
    }

    #[test]
    fn profiles_are_even_nonincreasing_positive_at_zero() {
        for shape in [KernelShape::Box, KernelShape::Tent, KernelShape::Bump] {
            let prof = KernelProfile::standard(shape).unwrap();
            assert!(prof.evaluate(0.0) > 0.0);
            let mut prev = prof.evaluate(0.0);
            for i in 1..=100 {
                let z = i as f64 / 100.0;
                let v = prof.evaluate(z);
                assert!((v - prof.evaluate(-z)).abs() < 1e-15);
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn box_normalization_constants_are_analytic() {
        // ½∫ ½|z|^p dz over [−1,1] = 1/(2(p+1)), so C = 2(p+1)
        let prof = KernelProfile::standard(KernelShape::Box).unwrap();
        let c1 = normalization_constant(&prof, 1.0).unwrap();
        let c2 = normalization_constant(&prof, 2.0).unwrap();
        assert!((c1 - 4.0).abs() < 1e-9);
        assert!((c2 - 6.0).abs() < 1e-9);
    }

    #[test]
    fn normalization_independent_of_support_rescaling() {
        // profiles are mass-normalized internally, so C_{J,p} only changes
        // through the support radius, not through any amplitude scaling
        let p = 1.5;
        let a = KernelProfile::new(KernelShape::Tent, 1.0).unwrap();
        let c_a = normalization_constant(&a, p).unwrap();
        // radius-r tent has moments r^p times the unit tent's
        let b = KernelProfile::new(KernelShape::Tent, 2.0).unwrap();
        let c_b = normalization_constant(&b, p).unwrap();
        assert!((c_b * 2.0f64.powf(p) - c_a).abs() < 1e-9 * c_a);
    }

    #[test]
    fn stencil_rejects_unresolved_epsilon() {
        let grid = Grid::new(16).unwrap();
        let prof = KernelProfile::standard(KernelShape::Tent).unwrap();
        let err = build_stencil(&prof, 0.05, 1.5, grid).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("minimum epsilon"), "{msg}");
        assert!(msg.contains("0.125"), "{msg}");
    }

    #[test]
    fn flat_kernel_gives_equal_offdiagonal_weights() {
        // box kernel spanning the whole domain: J^ε constant on the support
        let grid = Grid::new(32).unwrap();
        let prof = KernelProfile::standard(KernelShape::Box).unwrap();
        let st = build_stencil(&prof, 1.0, 1.5, grid).unwrap();
        let w1 = st.weight(0, 1);
        assert!(w1 > 0.0);
        for o in 2..st.bandwidth() {
            let w = st.offset_weight(o);
            if w != 0.0 {
                assert!((w - w1).abs() < 1e-15 * w1);
            }
        }
    }

    #[test]
    fn stencil_weights_match_pointwise_kernel_evaluation() {
        let grid = Grid::new(64).unwrap();
        let prof = KernelProfile::standard(KernelShape::Tent).unwrap();
        let eps = 0.1;
        let p = 1.5;
        let st = build_stencil(&prof, eps, p, grid).unwrap();
        let c = normalization_constant(&prof, p).unwrap();
        let h = grid.spacing();
        for i in [0usize, 13, 40, 63] {
            for j in 0..64 {
                let expected = h * c / eps.powf(p + 1.0) * prof.evaluate((grid.node(i) - grid.node(j)) / eps);
                let got = if i.abs_diff(j) <= st.bandwidth() {
                    st.weight(i, j)
                } else {
                    0.0
                };
                assert!(
                    (got - expected).abs() <= 1e-13 * expected.max(1.0),
                    "i={i} j={j}: {got} vs {expected}"
                );
                assert_eq!(st.weight(i, j), st.weight(j, i));
            }
        }
    }

    #[test]
    fn interior_row_sums_match_the_kernel_mass_scaling() {
        // interior row sum ≈ C_{J,p} ε^{-p} ∫J = C_{J,p} ε^{-p}
        let grid = Grid::new(256).unwrap();
        let prof = KernelProfile::standard(KernelShape::Tent).unwrap();
        let eps = 0.1;
        let p = 1.5;
        let st = build_stencil(&prof, eps, p, grid).unwrap();
        let expected = st.normalization() * eps.powf(-p);
        let mid = st.row_sum(128);
        let rel = (mid - expected).abs() / expected;
        assert!(rel < grid.spacing() / eps, "rel err {rel}");
    }

    #[test]
    fn nonlocal_norm_zero_for_constants_and_homogeneous() {
        let grid = Grid::new(64).unwrap();
        let prof = KernelProfile::standard(KernelShape::Tent).unwrap();
        let st = build_stencil(&prof, 0.2, 1.5, grid).unwrap();
        let c = Field::constant(grid, 2.0);
        assert_eq!(nonlocal_norm(&c, &st, 1.5).unwrap(), 0.0);
        let f = random_mean_zero(grid, 5);
        let n1 = nonlocal_norm(&f, &st, 1.5).unwrap();
        let n3 = nonlocal_norm(&f.scale(-3.0), &st, 1.5).unwrap();
        assert!((n3 - 3.0 * n1).abs() < 1e-12 * n1);
        assert!(n1 > 0.0);
    }

    #[test]
    fn nonlocal_norm_matches_bruteforce_double_sum() {
        let grid = Grid::new(64).unwrap();
        let prof = KernelProfile::standard(KernelShape::Bump).unwrap();
        let eps = 0.15;
        let p = 1.3;
        let m = 2.0;
        let st = build_stencil(&prof, eps, p, grid).unwrap();
        let f = random_mean_zero(grid, 11);
        // brute force straight from the definition, O(N²), evaluating the
        // kernel directly instead of going through the banded stencil
        let h = grid.spacing();
        let c_jm = normalization_constant(&prof, m).unwrap();
        let mut acc = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let jeval = prof.evaluate((grid.node(i) - grid.node(j)) / eps);
                let diff = (f.values()[i] - f.values()[j]).abs() / eps;
                acc += h * h * jeval * diff.powf(m);
            }
        }
        let brute = (c_jm / (2.0 * m * eps) * acc).powf(1.0 / m);
        let got = nonlocal_norm(&f, &st, m).unwrap();
        assert!(
            (got - brute).abs() <= 1e-12 * brute,
            "got {got}, brute {brute}"
        );
    }

    fn w1p_seminorm(f: &Field, p: f64) -> f64 {
        let h = f.grid().spacing();
        let v = f.values();
        let s: f64 = v
            .windows(2)
            .map(|w| ((w[1] - w[0]) / h).abs().powf(p) * h)
            .sum();
        s.powf(1.0 / p)
    }

    #[test]
    fn nonlocal_norm_dominated_by_gradient_seminorm_uniformly_in_epsilon() {
        let grid = Grid::new(256).unwrap();
        let prof = KernelProfile::standard(KernelShape::Tent).unwrap();
        let p = 1.5;
        let fields: Vec<Field> = vec![
            Field::cosine_mode(grid, 1),
            Field::cosine_mode(grid, 2),
            Field::from_fn(grid, |x| {
                (std::f64::consts::PI * x).cos() + 0.3 * (5.0 * std::f64::consts::PI * x).cos()
            }),
        ];
        let ladder = [0.4, 0.2, 0.1, 0.05];
        let mut fitted: Vec<f64> = Vec::new();
        for &eps in &ladder {
            let st = build_stencil(&prof, eps, p, grid).unwrap();
            let c = fields
                .iter()
                .map(|f| nonlocal_norm(f, &st, p).unwrap() / w1p_seminorm(f, p))
                .fold(0.0_f64, f64::max);
            fitted.push(c);
        }
        for k in 1..fitted.len() {
            let prev_max = fitted[..k].iter().cloned().fold(0.0_f64, f64::max);
            assert!(
                fitted[k] <= 1.10 * prev_max,
                "domination constant grew: {fitted:?}"
            );
        }
    }

    #[test]
    fn energy_normalization_tends_to_gradient_norm() {
        // p·φ^ε(f) → ‖f′‖_p^p for smooth f along the ladder
        let grid = Grid::new(256).unwrap();
        let prof = KernelProfile::standard(KernelShape::Tent).unwrap();
        let p = 1.5;
        let f = Field::cosine_mode(grid, 1);
        let target = w1p_seminorm(&f, p).powf(p);
        let ladder = [0.4, 0.2, 0.1, 0.05];
        let mut gaps = Vec::new();
        for &eps in &ladder {
            let st = build_stencil(&prof, eps, p, grid).unwrap();
            // p·φ^ε = ‖f‖_{J^ε,p}^p scaled: the m=p norm's p-th power is φ^ε
            let phi = nonlocal_norm(&f, &st, p).unwrap().powf(p);
            gaps.push((p * phi - target).abs());
        }
        for k in 1..gaps.len() {
            assert!(gaps[k] < gaps[k - 1], "gaps not shrinking: {gaps:?}");
        }
        assert!(gaps.last().unwrap() / target < 0.05);
    }

    #[test]
    fn poincare_ratio_is_finite_for_fixed_epsilon() {
        let grid = Grid::new(64).unwrap();
        let prof = KernelProfile::standard(KernelShape::Tent).unwrap();
        let p = 1.5;
        let eps = 0.2;
        let st = build_stencil(&prof, eps, p, grid).unwrap();
        let h = grid.spacing();
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let f = random_mean_zero(grid, 1000 + seed);
            let lp = lm_norm(&f, p).unwrap().powf(p);
            let v = f.values();
            let mut energy = 0.0;
            for i in 0..v.len() {
                let hi = (i + st.bandwidth()).min(v.len() - 1);
                for j in (i + 1)..=hi {
                    energy += 2.0 * st.weight(i, j) * (v[i] - v[j]).abs().powf(p);
                }
            }
            let energy = h * energy;
            assert!(energy > 0.0);
            worst = worst.max(lp / energy);
        }
        assert!(worst.is_finite() && worst > 0.0);
    }
}
