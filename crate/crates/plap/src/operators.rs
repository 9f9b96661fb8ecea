//! Discrete drift operators and their energies.
//!
//! Nonlocal: A(u)_i = Σ_j w_ij·φ(u_j − u_i), the negative L² gradient of
//! the double-sum energy φ^ε(u) = ½·h·ΣΣ w_ij·ψ(u_i − u_j).
//!
//! Local: face-flux form of div(φ(u′)) with zero-flux Neumann faces, the
//! negative L² gradient of h·Σ_faces ψ(Δu/h); optional viscosity adds the
//! 3-point Neumann Laplacian.
//!
//! Both operators are monotone (dissipative), conserve the discrete mean
//! (antisymmetry / telescoping) and vanish on constants.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::DiscreteStencil;
use crate::parallel::fill_indexed;
use crate::proximal::PowerPotential;

fn check_flux_single_valued(pot: &PowerPotential) -> Result<()> {
    if pot.needs_regularization() {
        return Err(Error::parameter(
            "p = 1 with delta_my = 0 has a multivalued flux; set delta_my > 0 \
             (Moreau–Yosida / Huber regularization)"
                .to_string(),
        ));
    }
    Ok(())
}

fn check_stencil_grid(u: &Field, stencil: &DiscreteStencil) -> Result<()> {
    if u.grid() != stencil.grid() {
        return Err(Error::shape(format!(
            "field on {} nodes, stencil on {}",
            u.grid().n_nodes(),
            stencil.grid().n_nodes()
        )));
    }
    Ok(())
}

#[inline]
fn nonlocal_row(v: &[f64], stencil: &DiscreteStencil, pot: &PowerPotential, i: usize) -> f64 {
    let n = v.len();
    let band = stencil.bandwidth();
    let lo = i.saturating_sub(band);
    let hi = (i + band).min(n - 1);
    let ui = v[i];
    let mut acc = 0.0;
    for j in lo..hi + 1 {
        if j != i {
            acc += stencil.offset_weight(i.abs_diff(j)) * pot.flux(v[j] - ui);
        }
    }
    acc
}

/// Nonlocal drift; parallel over rows when the stencil is large.
pub fn apply_nonlocal(
    u: &Field,
    stencil: &DiscreteStencil,
    pot: &PowerPotential,
) -> Result<Field> {
    check_flux_single_valued(pot)?;
    check_stencil_grid(u, stencil)?;
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    fill_indexed(&mut out, 2 * stencil.bandwidth() + 1, |i| {
        nonlocal_row(v, stencil, pot, i)
    });
    Field::new(u.grid(), out)
}

/// Always-sequential nonlocal drift (bench baseline; identical arithmetic).
pub fn apply_nonlocal_seq(
    u: &Field,
    stencil: &DiscreteStencil,
    pot: &PowerPotential,
) -> Result<Field> {
    check_flux_single_valued(pot)?;
    check_stencil_grid(u, stencil)?;
    let v = u.values();
    let out = (0..v.len()).map(|i| nonlocal_row(v, stencil, pot, i)).collect();
    Field::new(u.grid(), out)
}

/// Local p-Laplace drift in face-flux form with zero-flux Neumann faces,
/// plus `viscosity` times the 3-point Neumann Laplacian.
pub fn apply_local(u: &Field, pot: &PowerPotential, viscosity: f64) -> Result<Field> {
    check_flux_single_valued(pot)?;
    if !(viscosity >= 0.0) {
        return Err(Error::parameter(format!("viscosity must be >= 0, got {viscosity}")));
    }
    let h = u.grid().spacing();
    let v = u.values();
    let n = v.len();
    // interior face fluxes; boundary faces carry zero flux
    let mut face = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let slope = (v[i + 1] - v[i]) / h;
        face[i] = pot.flux(slope) + viscosity * slope;
    }
    let mut out = vec![0.0; n];
    out[0] = face[0] / h;
    for i in 1..n - 1 {
        out[i] = (face[i] - face[i - 1]) / h;
    }
    out[n - 1] = -face[n - 2] / h;
    Field::new(u.grid(), out)
}

/// Nonlocal energy ½·h·ΣΣ w_ij·ψ(u_i−u_j); with δ = 0 this is
/// (1/2p)·h·ΣΣ w_ij|u_i−u_j|^p. Convex, zero iff u is constant.
pub fn energy_nonlocal(
    u: &Field,
    stencil: &DiscreteStencil,
    pot: &PowerPotential,
) -> Result<f64> {
    check_stencil_grid(u, stencil)?;
    let v = u.values();
    let n = v.len();
    let band = stencil.bandwidth();
    let h = u.grid().spacing();
    let mut acc = 0.0;
    for i in 0..n {
        let hi = (i + band).min(n - 1);
        for j in i + 1..hi + 1 {
            let w = stencil.offset_weight(j - i);
            if w != 0.0 {
                acc += w * pot.psi(v[i] - v[j]);
            }
        }
    }
    Ok(h * acc)
}

/// Local energy h·Σ_faces ψ(Δu/h); with δ = 0 this is (1/p)·h·Σ|Δu/h|^p,
/// which at p = 1 is the discrete total variation Σ|u_{i+1}−u_i|.
pub fn energy_local(u: &Field, pot: &PowerPotential) -> Result<f64> {
    let h = u.grid().spacing();
    let v = u.values();
    let acc: f64 = v.windows(2).map(|w| pot.psi((w[1] - w[0]) / h)).sum();
    Ok(h * acc)
}
