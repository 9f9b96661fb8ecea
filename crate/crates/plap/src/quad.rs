//! Adaptive Simpson quadrature for kernel moments.
//!
//! The integrands are one-dimensional, compactly supported and smooth except
//! at known kink points (the box edge, the tent apex), so callers pass the
//! breakpoints and each smooth piece is integrated adaptively.

use crate::error::{Error, Result};

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

fn adapt(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a) < 1e-14 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::numeric(
            "adaptive quadrature failed to converge (integrand not integrable enough)",
        ));
    }
    let half = 0.5 * tol;
    Ok(adapt(f, a, fa, m, fm, left, lm, flm, half, depth - 1)?
        + adapt(f, m, fm, b, fb, right, rm, frm, half, depth - 1)?)
}

/// Integrate `f` over [a,b], splitting at the interior `breakpoints`.
/// `rel_tol` is relative to the accumulated magnitude, with a small absolute floor.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    let mut cuts: Vec<f64> = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // first pass for a magnitude estimate, second pass at the real tolerance
    let mut scale = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (s, _, _) = simpson(&f, lo, f(lo), hi, f(hi));
        scale += s.abs();
    }
    let tol_each = (rel_tol * scale.max(1e-30)).max(1e-300) / (cuts.len() - 1) as f64;

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (fa, fb) = (f(lo), f(hi));
        let (whole, m, fm) = simpson(&f, lo, fa, hi, fb);
        total += adapt(&f, lo, fa, hi, fb, whole, m, fm, tol_each, 48)?;
    }
    if !total.is_finite() {
        return Err(Error::numeric("quadrature produced a non-finite value"));
    }
    Ok(total)
}
