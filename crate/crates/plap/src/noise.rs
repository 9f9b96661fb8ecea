//! Spectral trace-class Wiener process on the mean-zero Neumann cosine basis.
//!
//! W^B_t = Σ_k b_k β_k(t) e_k with e_k(x) = √2 cos(kπx) and b_k = σ·k^{−s}.
//! On the cell-centered grid the e_k are exactly orthonormal in `pairing`
//! (DCT-II orthogonality) and exactly mean-zero, so Σb_k² is both the
//! trace norm of B and the per-unit-time variance of ‖increments‖₂².
//!
//! Every Gaussian draw is keyed by (seed, step_index, mode): the stream is
//! counter-based, so increments are bit-reproducible, independent across
//! steps, and identical for two trajectories sharing a seed — which is what
//! the synchronous-coupling experiments rely on.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid};

/// Domain separation tags for derived RNG streams.
pub mod stream {
    /// Wiener mode increments.
    pub const WIENER: u64 = 0x5749454e;
    /// Synthetic initial conditions.
    pub const INITIAL: u64 = 0x494e4954;
    /// Dictionary reference fields.
    pub const DICT: u64 = 0x44494354;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent seed from a base seed and a salt (run index, role).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(splitmix64(base ^ 0x6a09e667f3bcc908) ^ splitmix64(salt))
}

/// One standard normal from the counter-based stream keyed by
/// (seed, step_index, mode, tag).
pub fn keyed_normal(seed: u64, step_index: u64, mode: u64, tag: u64) -> f64 {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step_index.to_le_bytes());
    key[16..24].copy_from_slice(&mode.to_le_bytes());
    key[24..32].copy_from_slice(&tag.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.sample(StandardNormal)
}

/// Truncated spectral model of the additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// number of retained cosine modes K
    pub n_modes: usize,
    /// overall amplitude σ ≥ 0
    pub amplitude: f64,
    /// spectral decay exponent s in b_k = σ·k^{−s}
    pub decay: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(n_modes: usize, amplitude: f64, decay: f64, seed: u64) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::parameter("noise model needs at least one mode"));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::parameter(format!("noise amplitude must be >= 0, got {amplitude}")));
        }
        // s ≥ 3.5 keeps the H³ summability surrogate Σ b_k²k⁶ finite
        if !(decay >= 3.5) {
            return Err(Error::parameter(format!(
                "noise decay must be >= 3.5 for third-order spatial regularity, got {decay}"
            )));
        }
        let model = NoiseModel {
            n_modes,
            amplitude,
            decay,
            seed,
        };
        if amplitude > 0.0 && n_modes > 1 {
            // truncation must be deep enough that the tail is negligible
            let k = n_modes as f64;
            let tail = model.mode_amplitude(n_modes).powi(2) * k;
            if tail >= 1e-6 * model.trace_norm() {
                return Err(Error::parameter(format!(
                    "spectral truncation too shallow: tail surrogate {tail:.3e} vs trace {:.3e}",
                    model.trace_norm()
                )));
            }
        }
        Ok(model)
    }

    /// Default mode count for a grid: N/4, avoiding aliased high modes.
    pub fn default_modes(grid: Grid) -> usize {
        (grid.n_nodes() / 4).max(1)
    }

    pub fn mode_amplitude(&self, k: usize) -> f64 {
        self.amplitude * (k as f64).powf(-self.decay)
    }

    /// ‖B‖²_{L₂(H)} = Σ b_k².
    pub fn trace_norm(&self) -> f64 {
        (1..=self.n_modes).map(|k| self.mode_amplitude(k).powi(2)).sum()
    }

    pub fn with_seed(&self, seed: u64) -> NoiseModel {
        NoiseModel { seed, ..*self }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
}

/// Precomputed e_k values on a grid; rebuildable, never persisted.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    grid: Grid,
    /// modes[k−1][i] = √2 cos(kπ x_i)
    modes: Vec<Vec<f64>>,
}

impl ModeBasis {
    pub fn new(grid: Grid, n_modes: usize) -> Result<Self> {
        if n_modes > grid.n_nodes() / 4 {
            return Err(Error::parameter(format!(
                "{n_modes} noise modes alias on a {}-node grid; keep K <= N/4",
                grid.n_nodes()
            )));
        }
        let modes = (1..=n_modes)
            .map(|k| Field::cosine_mode(grid, k).into_values())
            .collect();
        Ok(ModeBasis { grid, modes })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k - 1]
    }
}

/// W^B increment over one step: Σ_k b_k √dt ξ_k e_k with ξ_k keyed by
/// (seed, step_index, k). Mean-zero and bit-reproducible for a fixed key.
pub fn wiener_increment(
    model: &NoiseModel,
    dt: f64,
    step_index: u64,
    grid: Grid,
) -> Result<Field> {
    let basis = ModeBasis::new(grid, model.n_modes)?;
    Ok(wiener_increment_with_basis(model, dt, step_index, &basis))
}

/// Same, reusing a precomputed basis (the integrator's hot path).
pub fn wiener_increment_with_basis(
    model: &NoiseModel,
    dt: f64,
    step_index: u64,
    basis: &ModeBasis,
) -> Field {
    let n = basis.grid().n_nodes();
    let mut values = vec![0.0; n];
    if model.amplitude > 0.0 {
        let sqrt_dt = dt.sqrt();
        for k in 1..=model.n_modes {
            let xi = keyed_normal(model.seed, step_index, k as u64, stream::WIENER);
            let coeff = model.mode_amplitude(k) * sqrt_dt * xi;
            for (v, e) in values.iter_mut().zip(basis.mode(k)) {
                *v += coeff * e;
            }
        }
    }
    Field::new(basis.grid(), values).expect("basis grid matches by construction")
}

/// W^B at the first `n_steps` time points 0, dt, 2dt, …: cumulative sums of
/// the per-step increments, starting at W^B_0 = 0. Empty for n_steps = 0.
pub fn wiener_path(model: &NoiseModel, dt: f64, n_steps: usize, grid: Grid) -> Result<Vec<Field>> {
    if n_steps == 0 {
        return Ok(Vec::new());
    }
    let basis = ModeBasis::new(grid, model.n_modes)?;
    let mut path = Vec::with_capacity(n_steps);
    let mut current = Field::zeros(grid);
    path.push(current.clone());
    for step in 0..n_steps - 1 {
        let inc = wiener_increment_with_basis(model, dt, step as u64, &basis);
        current = current.add(&inc)?;
        path.push(current.clone());
    }
    Ok(path)
}

/// ‖B‖²_{L₂(H)} = Σ b_k².
pub fn trace_norm(model: &NoiseModel) -> f64 {
    model.trace_norm()
}
