//! Euler–Maruyama time stepping for the stochastic p-Laplace dynamics,
//! the noise-transformed random PDE, and the variational-inequality check.
//!
//! The semi-implicit step solves v = x + dt·A(v) + ΔW. Since A is the
//! negative L² gradient of a convex energy, v is the unique minimizer of
//! ½‖v − rhs‖₂² + dt·Φ(v) and the residual F(v) = v − rhs − dt·A(v) is its
//! gradient; the solver is a damped residual (fixed-point) iteration with
//! Barzilai–Borwein step selection and a growth safeguard. Dissipation and
//! the pathwise L^m contraction under shared noise are inherited from
//! monotonicity of −A, independent of dt.
//!
//! Every update ends with an explicit mean-zero projection: the continuous
//! dynamics preserve the average exactly, floating point does not.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{lm_norm, project_mean_zero_in_place, Field, Grid};
use crate::kernel::{build_stencil, DiscreteStencil, KernelProfile, KernelShape};
use crate::noise::{wiener_increment_with_basis, ModeBasis, NoiseModel};
use crate::operators::{apply_local, apply_nonlocal, energy_local, energy_nonlocal};
use crate::proximal::PowerPotential;

/// Decay exponent m₀ = 4 − p of the noise-free flow, in (2,3] for p ∈ [1,2).
pub fn m0_exponent(p: f64) -> f64 {
    4.0 - p
}

/// Concentration exponent m₁ = m₀ + 2 − p = 6 − 2p, in (2,4] for p ∈ [1,2).
pub fn m1_exponent(p: f64) -> f64 {
    6.0 - 2.0 * p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OperatorKind {
    Nonlocal { kernel: KernelShape, epsilon: f64 },
    Local,
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub p: f64,
    pub operator: OperatorKind,
    /// Moreau–Yosida parameter; 0 means the exact flux (requires p > 1)
    pub delta_my: f64,
    /// coefficient of the extra Neumann Laplacian (local operator only)
    pub viscosity: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub scheme: Scheme,
    pub n_nodes: usize,
    pub noise: Option<NoiseModel>,
    /// states (and the noise path) are kept every `save_stride` steps
    pub save_stride: usize,
    /// diagnostics row every `diag_stride` steps
    pub diag_stride: usize,
    /// L^m norms recorded per diagnostics row
    pub m_list: Vec<f64>,
    pub record_energy: bool,
    /// semi-implicit residual target: ‖F(v)‖₂ ≤ fp_tol·(1 + ‖x‖₂)
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl SolverConfig {
    pub fn new(p: f64, operator: OperatorKind, n_nodes: usize, dt: f64, n_steps: usize) -> Self {
        SolverConfig {
            p,
            operator,
            delta_my: 0.0,
            viscosity: 0.0,
            dt,
            n_steps,
            scheme: Scheme::SemiImplicit,
            n_nodes,
            noise: None,
            save_stride: 1,
            diag_stride: 1,
            m_list: vec![2.0, 3.0, 4.0],
            record_energy: true,
            fp_tol: 1e-10,
            fp_max_iter: 500,
        }
    }

    pub fn potential(&self) -> Result<PowerPotential> {
        PowerPotential::new(self.p, self.delta_my)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_nodes)
    }

    pub fn validate(&self) -> Result<()> {
        let pot = self.potential()?;
        if pot.needs_regularization() {
            return Err(Error::parameter(
                "p = 1 requires delta_my > 0 (total variation flow is multivalued)",
            ));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.save_stride == 0 || self.diag_stride == 0 {
            return Err(Error::parameter("strides must be at least 1"));
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return Err(Error::parameter("fixed-point tolerance and iteration cap must be positive"));
        }
        if let OperatorKind::Nonlocal { epsilon, .. } = self.operator {
            if !(epsilon > 0.0) {
                return Err(Error::parameter(format!("epsilon must be positive, got {epsilon}")));
            }
        }
        for &m in &self.m_list {
            if !(m >= 1.0) {
                return Err(Error::parameter(format!("diagnostic norm index {m} < 1")));
            }
        }
        Ok(())
    }
}

/// Largest explicitly-stable dt (conservative: the frozen-coefficient bound,
/// halved). Zero when the flux has no finite Lipschitz bound (p < 2, δ = 0),
/// in which case the explicit scheme is rejected.
pub fn stability_bound(config: &SolverConfig) -> Result<f64> {
    let pot = config.potential()?;
    let lip = pot.flux_lipschitz();
    if !lip.is_finite() {
        return Ok(0.0);
    }
    let grid = config.grid()?;
    let bound = match config.operator {
        OperatorKind::Nonlocal { kernel, epsilon } => {
            let profile = KernelProfile::standard(kernel)?;
            let stencil = build_stencil(&profile, epsilon, config.p, grid)?;
            let max_row = (0..grid.n_nodes())
                .map(|i| stencil.row_sum(i))
                .fold(0.0_f64, f64::max);
            1.0 / (2.0 * max_row * lip)
        }
        OperatorKind::Local => {
            let h = grid.spacing();
            h * h / (2.0 * lip + 2.0 * config.viscosity)
        }
    };
    Ok(0.5 * bound)
}

/// Compiled stepper: stencil, potential and noise basis built once.
pub struct Stepper {
    config: SolverConfig,
    grid: Grid,
    pot: PowerPotential,
    stencil: Option<DiscreteStencil>,
    basis: Option<ModeBasis>,
    /// finite over-estimate of dt·Lip(A) used to seed the damping
    damping_seed: f64,
}

impl Stepper {
    pub fn new(config: &SolverConfig, grid: Grid) -> Result<Self> {
        config.validate()?;
        if grid.n_nodes() != config.n_nodes {
            return Err(Error::shape(format!(
                "config expects {} nodes, grid has {}",
                config.n_nodes,
                grid.n_nodes()
            )));
        }
        let pot = config.potential()?;
        let stencil = match config.operator {
            OperatorKind::Nonlocal { kernel, epsilon } => {
                let profile = KernelProfile::standard(kernel)?;
                Some(build_stencil(&profile, epsilon, config.p, grid)?)
            }
            OperatorKind::Local => None,
        };
        let basis = match &config.noise {
            Some(model) if !model.is_zero() => Some(ModeBasis::new(grid, model.n_modes)?),
            _ => None,
        };
        if config.scheme == Scheme::Explicit {
            let bound = stability_bound(config)?;
            if config.dt > bound {
                return Err(Error::parameter(format!(
                    "explicit scheme needs dt <= {bound:.3e} here, got {:.3e}",
                    config.dt
                )));
            }
        }
        let lip = pot.flux_lipschitz();
        let damping_seed = if lip.is_finite() {
            let op_lip = match &stencil {
                Some(st) => {
                    let max_row = (0..grid.n_nodes())
                        .map(|i| st.row_sum(i))
                        .fold(0.0_f64, f64::max);
                    2.0 * max_row * lip
                }
                None => {
                    let h = grid.spacing();
                    (4.0 / (h * h)) * (lip + config.viscosity)
                }
            };
            config.dt * op_lip
        } else {
            f64::INFINITY
        };
        Ok(Stepper {
            config: config.clone(),
            grid,
            pot,
            stencil,
            basis,
            damping_seed,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn stencil(&self) -> Option<&DiscreteStencil> {
        self.stencil.as_ref()
    }

    /// The drift A(u) for the configured operator.
    pub fn drift(&self, u: &Field) -> Result<Field> {
        match &self.stencil {
            Some(st) => apply_nonlocal(u, st, &self.pot),
            None => apply_local(u, &self.pot, self.config.viscosity),
        }
    }

    /// The energy whose negative L² gradient is the drift.
    pub fn energy(&self, u: &Field) -> Result<f64> {
        match &self.stencil {
            Some(st) => energy_nonlocal(u, st, &self.pot),
            None => energy_local(u, &self.pot),
        }
    }

    /// Noise increment for the transition step_index → step_index + 1.
    pub fn noise_increment(&self, step_index: u64) -> Option<Field> {
        match (&self.config.noise, &self.basis) {
            (Some(model), Some(basis)) => Some(wiener_increment_with_basis(
                model,
                self.config.dt,
                step_index,
                basis,
            )),
            _ => None,
        }
    }

    /// F(v) = v − rhs − dt·A(v); the gradient of the implicit-step objective.
    fn implicit_residual(&self, v: &Field, rhs: &Field) -> Result<Field> {
        let mut f = self.drift(v)?;
        let dt = self.config.dt;
        for ((fi, vi), ri) in f
            .values_mut()
            .iter_mut()
            .zip(v.values())
            .zip(rhs.values())
        {
            *fi = vi - ri - dt * *fi;
        }
        Ok(f)
    }

    /// Diagonal of the implicit-step Jacobian, D_i = 1 + dt·Σ_j w_ij·φ′(d_ij)
    /// (faces instead of stencil pairs for the local operator). The singular
    /// flux concentrates its stiffness here, so the diagonal is an effective
    /// metric for the damped iteration.
    fn implicit_diag(&self, v: &Field, out: &mut [f64]) {
        let dt = self.config.dt;
        let vals = v.values();
        let n = vals.len();
        match &self.stencil {
            Some(st) => {
                let band = st.bandwidth();
                for (i, d) in out.iter_mut().enumerate() {
                    let lo = i.saturating_sub(band);
                    let hi = (i + band).min(n - 1);
                    let mut acc = 0.0;
                    for j in lo..hi + 1 {
                        if j != i {
                            acc += st.offset_weight(i.abs_diff(j))
                                * self.pot.flux_slope(vals[j] - vals[i]);
                        }
                    }
                    *d = 1.0 + dt * acc;
                }
            }
            None => {
                let h = self.grid.spacing();
                let inv_h2 = 1.0 / (h * h);
                let face: Vec<f64> = vals
                    .windows(2)
                    .map(|w| self.pot.flux_slope((w[1] - w[0]) / h) + self.config.viscosity)
                    .collect();
                for (i, d) in out.iter_mut().enumerate() {
                    let left = if i > 0 { face[i - 1] } else { 0.0 };
                    let right = if i < n - 1 { face[i] } else { 0.0 };
                    *d = 1.0 + dt * inv_h2 * (left + right);
                }
            }
        }
    }

    /// Assemble the banded implicit-step Jacobian I + dt·(D − W_φ′) at v.
    /// Strictly diagonally dominant SPD (an M-matrix), so Cholesky is safe.
    fn assemble_jacobian(&self, v: &Field, out: &mut crate::banded::BandedSpd) {
        let dt = self.config.dt;
        let vals = v.values();
        let n = vals.len();
        match &self.stencil {
            Some(st) => {
                let band = st.bandwidth();
                for j in 0..n {
                    let lo = j.saturating_sub(band);
                    let hi = (j + band).min(n - 1);
                    let mut rowsum = 0.0;
                    for k in lo..hi + 1 {
                        if k != j {
                            rowsum += st.offset_weight(j.abs_diff(k))
                                * self.pot.flux_slope(vals[k] - vals[j]);
                        }
                    }
                    out.set(0, j, 1.0 + dt * rowsum);
                    for r in 1..=band.min(n - 1 - j) {
                        let w = st.offset_weight(r);
                        let s = self.pot.flux_slope(vals[j + r] - vals[j]);
                        out.set(r, j, -dt * w * s);
                    }
                }
            }
            None => {
                let h = self.grid.spacing();
                let c = dt / (h * h);
                let face: Vec<f64> = vals
                    .windows(2)
                    .map(|w| self.pot.flux_slope((w[1] - w[0]) / h) + self.config.viscosity)
                    .collect();
                for j in 0..n {
                    let left = if j > 0 { face[j - 1] } else { 0.0 };
                    let right = if j < n - 1 { face[j] } else { 0.0 };
                    out.set(0, j, 1.0 + c * (left + right));
                    if j < n - 1 {
                        out.set(1, j, -c * face[j]);
                    }
                }
            }
        }
    }

    /// Solve v − dt·A(v) = rhs to ‖F(v)‖₂ ≤ tol.
    ///
    /// Primary iteration: damped fixed point in the Jacobi metric,
    /// v ← v − ω·D⁻¹F(v), with BB step selection and a divergence
    /// safeguard. If it has not converged after a fixed share of the
    /// budget (stiff steps: singular flux near flat regions), the rest of
    /// the budget runs damped Newton steps with the banded Jacobian.
    fn solve_implicit(&self, rhs: &Field, tol: f64) -> Result<Field> {
        let mut v = rhs.clone();
        let mut f = self.implicit_residual(&v, rhs)?;
        let mut rnorm = lm_norm(&f, 2.0)?;
        if rnorm <= tol {
            return Ok(v);
        }
        let debug = std::env::var_os("PLAP_FP_TRACE").is_some();
        let n = rhs.grid().n_nodes();
        let fp_budget = self.config.fp_max_iter.min(40);
        let mut iterations_used = 0;

        let mut diag = vec![1.0; n];
        let mut g = Field::zeros(rhs.grid());
        let mut omega = 1.0;
        let mut best = (v.clone(), rnorm);
        let mut prev: Option<(Field, Field)> = None; // (v, g) of the last iterate
        for it in 0..fp_budget {
            if debug {
                eprintln!("fp it={it} omega={omega:.3e} rnorm={rnorm:.3e} tol={tol:.3e}");
            }
            iterations_used += 1;
            self.implicit_diag(&v, &mut diag);
            for ((gi, fi), di) in g.values_mut().iter_mut().zip(f.values()).zip(&diag) {
                *gi = fi / di;
            }
            // BB2 step in the current metric from the last secant pair
            if let Some((vp, gp)) = &prev {
                let mut dv_dg = 0.0;
                let mut dg_dg = 0.0;
                for ((vn, vo), (gn, go)) in v
                    .values()
                    .iter()
                    .zip(vp.values())
                    .zip(g.values().iter().zip(gp.values()))
                {
                    let dv = vn - vo;
                    let dg = gn - go;
                    dv_dg += dv * dg;
                    dg_dg += dg * dg;
                }
                if dg_dg > 0.0 && dv_dg > 0.0 {
                    omega = (dv_dg / dg_dg).clamp(1e-6, 4.0);
                }
            }
            prev = Some((v.clone(), g.clone()));
            let mut v_next = v.clone();
            v_next.axpy(-omega, &g)?;
            let f_next = self.implicit_residual(&v_next, rhs)?;
            let r_next = lm_norm(&f_next, 2.0)?;
            if r_next <= tol {
                return Ok(v_next);
            }
            if !r_next.is_finite() || r_next > 20.0 * best.1 {
                // diverging: restart from the best iterate with smaller damping
                v = best.0.clone();
                f = self.implicit_residual(&v, rhs)?;
                rnorm = lm_norm(&f, 2.0)?;
                omega *= 0.25;
                prev = None;
                continue;
            }
            if r_next < best.1 {
                best = (v_next.clone(), r_next);
            }
            v = v_next;
            f = f_next;
            rnorm = r_next;
        }

        // Newton fallback from the best damped iterate
        (v, rnorm) = best;
        f = self.implicit_residual(&v, rhs)?;
        let bw = match &self.stencil {
            Some(st) => st.bandwidth().min(n - 1),
            None => 1,
        };
        let mut jac = crate::banded::BandedSpd::zeros(n, bw);
        let mut step_dir = vec![0.0; n];
        while iterations_used < self.config.fp_max_iter {
            iterations_used += 1;
            if debug {
                eprintln!("newton it={iterations_used} rnorm={rnorm:.3e} tol={tol:.3e}");
            }
            self.assemble_jacobian(&v, &mut jac);
            if !jac.cholesky() {
                return Err(Error::numeric(
                    "implicit-step Jacobian lost positive definiteness".to_string(),
                ));
            }
            jac.solve(f.values(), &mut step_dir);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let mut v_try = v.clone();
                for (vi, si) in v_try.values_mut().iter_mut().zip(&step_dir) {
                    *vi -= lambda * si;
                }
                let f_try = self.implicit_residual(&v_try, rhs)?;
                let r_try = lm_norm(&f_try, 2.0)?;
                if r_try <= tol {
                    return Ok(v_try);
                }
                if r_try < rnorm {
                    v = v_try;
                    f = f_try;
                    rnorm = r_try;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break; // stuck at the floating-point floor of the residual
            }
        }
        Err(Error::numeric(format!(
            "semi-implicit step did not converge in {iterations_used} iterations; \
             residual {rnorm:.3e}, target {tol:.3e}"
        )))
    }

    /// One step of the X-dynamics; `noise_increment = None` means ΔW = 0.
    pub fn step(&self, x: &Field, noise_increment: Option<&Field>) -> Result<Field> {
        let mut rhs = x.clone();
        if let Some(dw) = noise_increment {
            rhs.axpy(1.0, dw)?;
        }
        let mut next = match self.config.scheme {
            Scheme::Explicit => {
                let mut v = rhs;
                let a = self.drift(x)?;
                v.axpy(self.config.dt, &a)?;
                v
            }
            Scheme::SemiImplicit => {
                let tol = self.config.fp_tol * (1.0 + lm_norm(x, 2.0)?);
                self.solve_implicit(&rhs, tol)?
            }
        };
        project_mean_zero_in_place(&mut next);
        Ok(next)
    }

    /// One step of the transformed random PDE dY/dt = A(Y + W_t), with W
    /// frozen at the left endpoint. The semi-implicit variant solves
    /// Z − dt·A(Z) = Y + W and returns Z − W.
    pub fn step_transformed(&self, y: &Field, w_left: &Field) -> Result<Field> {
        let rhs = y.add(w_left)?;
        let mut next = match self.config.scheme {
            Scheme::Explicit => {
                let mut v = y.clone();
                let a = self.drift(&rhs)?;
                v.axpy(self.config.dt, &a)?;
                v
            }
            Scheme::SemiImplicit => {
                let tol = self.config.fp_tol * (1.0 + lm_norm(y, 2.0)?);
                let z = self.solve_implicit(&rhs, tol)?;
                z.sub(w_left)?
            }
        };
        project_mean_zero_in_place(&mut next);
        Ok(next)
    }
}

/// Convenience single-step entry point; builds the stepper each call.
pub fn step(x: &Field, config: &SolverConfig, noise_increment: Option<&Field>) -> Result<Field> {
    Stepper::new(config, x.grid())?.step(x, noise_increment)
}

/// One diagnostics row.
#[derive(Debug, Clone, Serialize)]
pub struct DiagRow {
    pub step: usize,
    pub time: f64,
    /// L^m norms in the order of the config's m_list
    pub norms: Vec<f64>,
    pub energy: Option<f64>,
}

/// A simulated path: saved states, the replayable noise record, diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    config: SolverConfig,
    times: Vec<f64>,
    states: Vec<Field>,
    /// W^B at the saved times (all zeros when the run is noise-free)
    noise_path: Vec<Field>,
    diagnostics: Vec<DiagRow>,
}

impl Trajectory {
    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn saved_times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn noise_path(&self) -> &[Field] {
        &self.noise_path
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory always saves the initial state")
    }

    pub fn diagnostics(&self) -> &[DiagRow] {
        &self.diagnostics
    }

    /// Position of `m` in the recorded m_list.
    pub fn norm_index(&self, m: f64) -> Option<usize> {
        self.config.m_list.iter().position(|&x| x == m)
    }

    /// CSV stream: step,time,norm_m…,energy
    pub fn write_diagnostics_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "step,time")?;
        for m in &self.config.m_list {
            write!(w, ",norm_{m}")?;
        }
        writeln!(w, ",energy")?;
        for row in &self.diagnostics {
            write!(w, "{},{}", row.step, row.time)?;
            for v in &row.norms {
                write!(w, ",{v}")?;
            }
            match row.energy {
                Some(e) => writeln!(w, ",{e}")?,
                None => writeln!(w, ",")?,
            }
        }
        Ok(())
    }
}

enum Dynamics {
    Direct,
    Transformed,
}

fn run(x0: &Field, config: &SolverConfig, dynamics: Dynamics) -> Result<Trajectory> {
    let stepper = Stepper::new(config, x0.grid())?;
    let mut state = x0.clone();
    project_mean_zero_in_place(&mut state);
    // below this sup-norm the noise-free flow is numerically extinct and
    // pinned at zero (the singular flux makes the implicit solve needlessly
    // stiff at scales far below any statistic of interest)
    let noise_free = config.noise.as_ref().is_none_or(|m| m.is_zero());
    let extinction_floor = if noise_free {
        1e-10 * state.max_abs().max(1.0)
    } else {
        0.0
    };

    let mut w_cum = Field::zeros(x0.grid());
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut noise_path = Vec::new();
    let mut diagnostics = Vec::new();

    let mut record = |step: usize,
                      state: &Field,
                      w: &Field,
                      times: &mut Vec<f64>,
                      states: &mut Vec<Field>,
                      noise_path: &mut Vec<Field>,
                      diagnostics: &mut Vec<DiagRow>|
     -> Result<()> {
        let t = step as f64 * config.dt;
        if step % config.save_stride == 0 || step == config.n_steps {
            times.push(t);
            states.push(state.clone());
            noise_path.push(w.clone());
        }
        if step % config.diag_stride == 0 || step == config.n_steps {
            let norms = config
                .m_list
                .iter()
                .map(|&m| lm_norm(state, m))
                .collect::<Result<Vec<_>>>()?;
            let energy = if config.record_energy {
                Some(stepper.energy(state)?)
            } else {
                None
            };
            diagnostics.push(DiagRow {
                step,
                time: t,
                norms,
                energy,
            });
        }
        Ok(())
    };

    record(0, &state, &w_cum, &mut times, &mut states, &mut noise_path, &mut diagnostics)?;
    for step_index in 0..config.n_steps {
        let dw = stepper.noise_increment(step_index as u64);
        state = match dynamics {
            Dynamics::Direct => stepper.step(&state, dw.as_ref())?,
            Dynamics::Transformed => stepper.step_transformed(&state, &w_cum)?,
        };
        if let Some(dw) = dw {
            w_cum.axpy(1.0, &dw)?;
        }
        if extinction_floor > 0.0 && state.max_abs() < extinction_floor {
            state = Field::zeros(x0.grid());
        }
        record(
            step_index + 1,
            &state,
            &w_cum,
            &mut times,
            &mut states,
            &mut noise_path,
            &mut diagnostics,
        )?;
    }
    Ok(Trajectory {
        config: config.clone(),
        times,
        states,
        noise_path,
        diagnostics,
    })
}

/// Simulate the X-dynamics dX ∈ A(X)dt + B dW. Deterministic for a fixed
/// (config, seed); the diagnostics record ‖X‖_m for the configured m-list.
pub fn simulate(x0: &Field, config: &SolverConfig) -> Result<Trajectory> {
    run(x0, config, Dynamics::Direct)
}

/// Integrate the transformed random PDE dY/dt = A(Y + W_t) with the same
/// replayable noise path; X can be reconstructed as Y + W^B.
pub fn simulate_transformed(x0: &Field, config: &SolverConfig) -> Result<Trajectory> {
    run(x0, config, Dynamics::Transformed)
}

/// A smooth test path Z with time derivative G, sampled on a trajectory's
/// saved times.
#[derive(Debug, Clone)]
pub struct TestPath {
    pub values: Vec<Field>,
    pub derivs: Vec<Field>,
}

impl TestPath {
    pub fn sample(
        times: &[f64],
        grid: Grid,
        z: impl Fn(f64) -> Field,
        dz: impl Fn(f64) -> Field,
    ) -> Result<Self> {
        let values: Vec<Field> = times.iter().map(|&t| z(t)).collect();
        let derivs: Vec<Field> = times.iter().map(|&t| dz(t)).collect();
        for f in values.iter().chain(derivs.iter()) {
            if f.grid() != grid {
                return Err(Error::shape("test path field on a different grid".to_string()));
            }
        }
        Ok(TestPath { values, derivs })
    }
}

/// Maximum over saved times of LHS − RHS of the discrete variational
/// inequality
///
///   ‖Y_t−Z_t‖₂² + 2∫₀ᵗ φ(Y+W) ≤ ‖Y_0−Z_0‖₂² + 2∫₀ᵗ φ(Z+W) − 2∫₀ᵗ (Z′, Y−Z),
///
/// with trapezoid quadrature on the saved time grid. A consistent
/// trajectory keeps the residual below a tolerance of order dt + h.
pub fn svi_residual(traj: &Trajectory, test_path: &TestPath) -> Result<f64> {
    let n = traj.states().len();
    if test_path.values.len() != n || test_path.derivs.len() != n {
        return Err(Error::shape(format!(
            "test path has {} samples, trajectory saved {}",
            test_path.values.len(),
            n
        )));
    }
    let grid = traj.final_state().grid();
    for f in test_path.values.iter().chain(test_path.derivs.iter()) {
        if f.grid() != grid {
            return Err(Error::shape("test path field on a different grid".to_string()));
        }
    }
    let stepper = Stepper::new(traj.config(), grid)?;

    // pointwise integrands on the saved grid
    let mut phi_y = Vec::with_capacity(n);
    let mut phi_z = Vec::with_capacity(n);
    let mut g_pair = Vec::with_capacity(n);
    let mut dist2 = Vec::with_capacity(n);
    for i in 0..n {
        let y = &traj.states()[i];
        let w = &traj.noise_path()[i];
        let z = &test_path.values[i];
        phi_y.push(stepper.energy(&y.add(w)?)?);
        phi_z.push(stepper.energy(&z.add(w)?)?);
        let ymz = y.sub(z)?;
        g_pair.push(crate::field::pairing(&test_path.derivs[i], &ymz)?);
        dist2.push(crate::field::pairing(&ymz, &ymz)?);
    }

    let times = traj.saved_times();
    let mut int_y = 0.0;
    let mut int_z = 0.0;
    let mut int_g = 0.0;
    let mut residual = f64::NEG_INFINITY;
    for i in 0..n {
        if i > 0 {
            let w = 0.5 * (times[i] - times[i - 1]);
            int_y += w * (phi_y[i] + phi_y[i - 1]);
            int_z += w * (phi_z[i] + phi_z[i - 1]);
            int_g += w * (g_pair[i] + g_pair[i - 1]);
        }
        let lhs = dist2[i] + 2.0 * int_y;
        let rhs = dist2[0] + 2.0 * int_z - 2.0 * int_g;
        residual = residual.max(lhs - rhs);
    }
    Ok(residual)
}
