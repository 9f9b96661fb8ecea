//! Grid geometry and mean-zero grid functions on the unit interval.
//!
//! The state space is the discrete stand-in for L²_av([0,1]): cell-centered
//! values with zero spatial average. The discrete integral is the
//! spacing-weighted (midpoint) sum, so `lm_norm(f, m)` approximates
//! (∫|f|^m dx)^{1/m} and `pairing` approximates the L² inner product.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

/// Uniform cell-centered grid on [0,1].
///
/// Node i sits at (i + 1/2)·spacing. The constructor rejects sizes for
/// which `spacing * n_nodes != 1.0` in f64 (about 9% of integers, the
/// first being 49); powers of two are always exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n_nodes: usize,
}

impl Grid {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::parameter(format!(
                "grid needs at least 2 nodes, got {n_nodes}"
            )));
        }
        let h = 1.0 / n_nodes as f64;
        if h * n_nodes as f64 != 1.0 {
            return Err(Error::parameter(format!(
                "n_nodes = {n_nodes} does not satisfy spacing*n_nodes == 1 exactly; \
                 use a power of two"
            )));
        }
        Ok(Grid { n_nodes })
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n_nodes as f64
    }

    /// Cell-center coordinate of node `i`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node(i)).collect()
    }
}

/// A grid function; the simulation state lives here.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::shape(format!(
                "field has {} values for a {}-node grid",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.n_nodes()],
        }
    }

    /// Sample a function of the node coordinate.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|i| f(grid.node(i))).collect();
        Field { grid, values }
    }

    /// Mean-zero cosine mode e_k(x) = √2 cos(kπx); orthonormal in `pairing`.
    pub fn cosine_mode(grid: Grid, k: usize) -> Self {
        let sqrt2 = std::f64::consts::SQRT_2;
        Field::from_fn(grid, |x| sqrt2 * (k as f64 * std::f64::consts::PI * x).cos())
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Plain average of the values (equals the spacing-weighted integral on [0,1]).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn scale(&self, lambda: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        check_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        check_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    /// self += lambda * other
    pub fn axpy(&mut self, lambda: f64, other: &Field) -> Result<()> {
        check_same_grid(self, other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += lambda * b;
        }
        Ok(())
    }
}

pub(crate) fn check_same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::shape(format!(
            "grid mismatch: {} vs {} nodes",
            a.grid().n_nodes(),
            b.grid().n_nodes()
        )));
    }
    Ok(())
}

/// Subtract the discrete mean: f ↦ f − mean(f). Idempotent and linear.
pub fn project_mean_zero(f: &Field) -> Field {
    let m = f.mean();
    Field {
        grid: f.grid,
        values: f.values.iter().map(|v| v - m).collect(),
    }
}

/// In-place variant used by the integrator after every state update.
pub fn project_mean_zero_in_place(f: &mut Field) {
    let m = f.mean();
    for v in f.values.iter_mut() {
        *v -= m;
    }
}

/// Discrete L^m norm (spacing · Σ|f_i|^m)^{1/m}, m ≥ 1.
pub fn lm_norm(f: &Field, m: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(Error::parameter(format!("lm_norm needs m >= 1, got {m}")));
    }
    let h = f.grid().spacing();
    let s: f64 = f.values.iter().map(|v| v.abs().powf(m)).sum();
    Ok((h * s).powf(1.0 / m))
}

/// Discrete L² inner product: spacing · Σ f_i g_i.
pub fn pairing(f: &Field, g: &Field) -> Result<f64> {
    check_same_grid(f, g)?;
    let h = f.grid().spacing();
    let s: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    Ok(h * s)
}

/// Signed power a ↦ |a|^{m−1}·a with 0 ↦ 0 (odd, sign-preserving), m ≥ 0.
pub fn signed_power(a: f64, m: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.abs().powf(m - 1.0) * a
    }
}

/// Pointwise signed power of a field.
pub fn power_map(f: &Field, m: f64) -> Result<Field> {
    if !(m >= 0.0) {
        return Err(Error::parameter(format!("power_map needs m >= 0, got {m}")));
    }
    Ok(Field {
        grid: f.grid,
        values: f.values.iter().map(|&v| signed_power(v, m)).collect(),
    })
}

// --- serialization ----------------------------------------------------------
//
// CSV rows are (node coordinate, value); the text round-trips bit-exactly
// because Rust prints the shortest representation that parses back to the
// same f64. The binary record is n_nodes (u64 LE) followed by the values
// (f64 LE each).

pub fn write_csv<W: Write>(f: &Field, mut w: W) -> Result<()> {
    for (i, v) in f.values().iter().enumerate() {
        writeln!(w, "{},{}", f.grid().node(i), v)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Field> {
    let mut values = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let val = t
            .rsplit(',')
            .next()
            .ok_or_else(|| Error::shape(format!("csv line {}: no value column", lineno + 1)))?;
        let v: f64 = val.trim().parse().map_err(|e| {
            Error::shape(format!("csv line {}: bad value {val:?}: {e}", lineno + 1))
        })?;
        values.push(v);
    }
    let grid = Grid::new(values.len())?;
    Field::new(grid, values)
}

pub fn write_binary<W: Write>(f: &Field, mut w: W) -> Result<()> {
    w.write_all(&(f.grid().n_nodes() as u64).to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Field> {
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let n = u64::from_le_bytes(len) as usize;
    let mut values = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    let grid = Grid::new(n)?;
    Field::new(grid, values)
}
