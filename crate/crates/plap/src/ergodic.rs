//! Ergodicity statistics: Cesàro hit frequencies, shared-noise contraction,
//! empirical invariant measures, bounded-Lipschitz distances, and the
//! energy–mass ratio of the invariant measure.
//!
//! Invariant measures are represented by thinned single-trajectory samples
//! (the Cesàro average is the object of interest, so time averaging *is*
//! the estimator). Distances between measures are dictionary lower bounds
//! on the bounded-Lipschitz metric: the supremum over all Lipschitz
//! functionals is not computable, a fixed dictionary of rescaled
//! cylindrical functionals is.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{lm_norm, pairing, read_binary, write_binary, Field, Grid};
use crate::integrator::{SolverConfig, Stepper};
use crate::noise::{derive_seed, keyed_normal, stream};
use crate::parallel::map_runs;

/// Mean and batch-means standard error of a (possibly autocorrelated)
/// series; `n_batches` capped so each batch keeps at least four points.
pub fn batch_mean_se(series: &[f64], n_batches: usize) -> (f64, f64) {
    let n = series.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let b = n_batches.clamp(2, (n / 4).max(2)).min(n);
    let len = n / b;
    if len == 0 {
        return (mean, f64::INFINITY);
    }
    let means: Vec<f64> = (0..b)
        .map(|i| series[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// Weighted sample of states standing in for an invariant measure.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    samples: Vec<Field>,
    metadata: MeasureMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureMetadata {
    pub config: SolverConfig,
    pub burn_in_steps: usize,
    pub stride: usize,
    pub n_samples: usize,
}

impl EmpiricalMeasure {
    pub fn samples(&self) -> &[Field] {
        &self.samples
    }

    pub fn metadata(&self) -> &MeasureMetadata {
        &self.metadata
    }

    pub fn grid(&self) -> Grid {
        self.samples[0].grid()
    }

    /// Sample average of a functional, with its batch-means standard error.
    pub fn mean_se(&self, f: impl Fn(&Field) -> Result<f64>) -> Result<(f64, f64)> {
        let series = self
            .samples
            .iter()
            .map(|s| f(s))
            .collect::<Result<Vec<f64>>>()?;
        Ok(batch_mean_se(&series, 30))
    }

    /// Persist as a directory: metadata JSON plus samples in the binary
    /// field format, concatenated.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let meta = serde_json::to_string_pretty(&self.metadata)?;
        std::fs::write(dir.join("meta.json"), meta)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("samples.fbin"))?);
        for s in &self.samples {
            write_binary(s, &mut w)?;
        }
        w.into_inner().map_err(|e| Error::numeric(e.to_string()))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: MeasureMetadata =
            serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
        let mut r = std::io::BufReader::new(std::fs::File::open(dir.join("samples.fbin"))?);
        let mut samples = Vec::with_capacity(meta.n_samples);
        for _ in 0..meta.n_samples {
            samples.push(read_binary(&mut r)?);
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::shape("trailing bytes after the declared samples".to_string()));
        }
        Ok(EmpiricalMeasure { samples, metadata: meta })
    }
}

/// Fraction of post-burn-in saved states with ‖X‖_m < radius; the
/// Cesàro-average surrogate for Q_T(x, B_radius(0)).
pub fn time_average_hit(
    traj: &crate::integrator::Trajectory,
    radius: f64,
    norm_m: f64,
    burn_in_steps: usize,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::parameter(format!("hit radius must be positive, got {radius}")));
    }
    let dt = traj.config().dt;
    let mut total = 0usize;
    let mut hits = 0usize;
    for (t, state) in traj.saved_times().iter().zip(traj.states()) {
        let step = (t / dt).round() as usize;
        if step < burn_in_steps {
            continue;
        }
        total += 1;
        if lm_norm(state, norm_m)? < radius {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::parameter("burn-in swallowed every saved state".to_string()));
    }
    Ok(hits as f64 / total as f64)
}

/// Result of a shared-noise two-trajectory contraction run.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub m_list: Vec<f64>,
    /// ‖x−y‖_m at time zero
    pub initial_distances: Vec<f64>,
    /// max over steps of ‖X^x_t − X^y_t‖_m / ‖x−y‖_m
    pub max_ratios: Vec<f64>,
    pub passed: bool,
}

/// Drive two initial conditions with the identical noise path and record
/// the worst L^m distance ratio; the pathwise e-property check.
pub fn contraction_check(
    x: &Field,
    y: &Field,
    config: &SolverConfig,
    m_list: &[f64],
) -> Result<ContractionReport> {
    crate::field::check_same_grid(x, y)?;
    let stepper = Stepper::new(config, x.grid())?;
    let initial_distances = m_list
        .iter()
        .map(|&m| lm_norm(&x.sub(y)?, m))
        .collect::<Result<Vec<f64>>>()?;
    let degenerate = initial_distances.iter().all(|&d| d == 0.0);
    let mut a = crate::field::project_mean_zero(x);
    let mut b = crate::field::project_mean_zero(y);
    let mut max_ratios = vec![0.0_f64; m_list.len()];
    for step_index in 0..config.n_steps {
        let dw = stepper.noise_increment(step_index as u64);
        a = stepper.step(&a, dw.as_ref())?;
        b = stepper.step(&b, dw.as_ref())?;
        if degenerate {
            continue;
        }
        let diff = a.sub(&b)?;
        for (k, &m) in m_list.iter().enumerate() {
            if initial_distances[k] > 0.0 {
                let r = lm_norm(&diff, m)? / initial_distances[k];
                if r > max_ratios[k] {
                    max_ratios[k] = r;
                }
            }
        }
    }
    let passed = max_ratios.iter().all(|&r| r <= 1.0 + 1e-8);
    Ok(ContractionReport {
        m_list: m_list.to_vec(),
        initial_distances,
        max_ratios,
        passed,
    })
}

/// Thinned post-burn-in snapshots of one long trajectory.
pub fn estimate_invariant_measure(
    x0: &Field,
    config: &SolverConfig,
    burn_in_steps: usize,
    n_samples: usize,
    stride: usize,
) -> Result<EmpiricalMeasure> {
    if n_samples == 0 {
        return Err(Error::parameter("invariant-measure estimate needs n_samples > 0".to_string()));
    }
    if stride == 0 {
        return Err(Error::parameter("sample stride must be at least 1".to_string()));
    }
    let mut cfg = config.clone();
    cfg.n_steps = burn_in_steps + n_samples * stride;
    let stepper = Stepper::new(&cfg, x0.grid())?;
    let mut state = crate::field::project_mean_zero(x0);
    let mut samples = Vec::with_capacity(n_samples);
    for step_index in 0..cfg.n_steps {
        let dw = stepper.noise_increment(step_index as u64);
        state = stepper.step(&state, dw.as_ref())?;
        let done = step_index + 1;
        if done > burn_in_steps && (done - burn_in_steps) % stride == 0 {
            samples.push(state.clone());
        }
    }
    Ok(EmpiricalMeasure {
        samples,
        metadata: MeasureMetadata {
            config: cfg,
            burn_in_steps,
            stride,
            n_samples,
        },
    })
}

/// One bounded-Lipschitz test functional, rescaled so ‖F‖_∞ + Lip(F) ≤ 1
/// in the L^p metric.
#[derive(Debug, Clone)]
pub enum Functional {
    /// scale·clip(pairing(x, probe)) with scale = 1/(1 + ‖probe‖_q)
    ClippedPairing { probe: Field, scale: f64 },
    /// ½·min(1, ‖x − center‖_p)
    ClippedDistance { center: Field, p: f64 },
}

impl Functional {
    pub fn eval(&self, x: &Field) -> Result<f64> {
        match self {
            Functional::ClippedPairing { probe, scale } => {
                Ok(scale * pairing(x, probe)?.clamp(-1.0, 1.0))
            }
            Functional::ClippedDistance { center, p } => {
                Ok(0.5 * lm_norm(&x.sub(center)?, *p)?.min(1.0))
            }
        }
    }

    pub fn label(&self, index: usize) -> String {
        match self {
            Functional::ClippedPairing { .. } => format!("pairing_{index}"),
            Functional::ClippedDistance { .. } => format!("ball_{index}"),
        }
    }
}

/// Dual exponent norm ‖v‖_q with 1/p + 1/q = 1 (q = ∞ for p = 1).
fn dual_norm(v: &Field, p: f64) -> Result<f64> {
    if p == 1.0 {
        Ok(v.max_abs())
    } else {
        lm_norm(v, p / (p - 1.0))
    }
}

/// A fixed dictionary of rescaled cylindrical functionals.
#[derive(Debug, Clone)]
pub struct FunctionalDictionary {
    functionals: Vec<Functional>,
    p_metric: f64,
}

impl FunctionalDictionary {
    /// Default 32-functional dictionary: clipped pairings against low
    /// cosine modes and clipped L^p distances to stored reference fields
    /// drawn deterministically from `seed`.
    pub fn standard(grid: Grid, p_metric: f64, seed: u64) -> Result<Self> {
        Self::with_counts(grid, p_metric, seed, 16, 16)
    }

    pub fn with_counts(
        grid: Grid,
        p_metric: f64,
        seed: u64,
        n_pairings: usize,
        n_balls: usize,
    ) -> Result<Self> {
        if !(1.0..=2.0).contains(&p_metric) {
            return Err(Error::parameter(format!(
                "dictionary metric exponent must be in [1,2], got {p_metric}"
            )));
        }
        let mut functionals = Vec::with_capacity(n_pairings + n_balls);
        for j in 0..n_pairings {
            let probe = Field::cosine_mode(grid, j + 1);
            let scale = 1.0 / (1.0 + dual_norm(&probe, p_metric)?);
            functionals.push(Functional::ClippedPairing { probe, scale });
        }
        for j in 0..n_balls {
            // smooth reference field from the first four modes
            let mut center = Field::zeros(grid);
            for k in 1..=4usize {
                let xi = keyed_normal(derive_seed(seed, j as u64), 0, k as u64, stream::DICT);
                center.axpy(0.3 * xi / k as f64, &Field::cosine_mode(grid, k))?;
            }
            functionals.push(Functional::ClippedDistance {
                center,
                p: p_metric,
            });
        }
        Ok(FunctionalDictionary {
            functionals,
            p_metric,
        })
    }

    pub fn single(f: Functional, p_metric: f64) -> Self {
        FunctionalDictionary {
            functionals: vec![f],
            p_metric,
        }
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn p_metric(&self) -> f64 {
        self.p_metric
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    /// Per-functional (mean, batch-means SE) over a measure's samples.
    pub fn profile(&self, mu: &EmpiricalMeasure) -> Result<Vec<(f64, f64)>> {
        self.functionals
            .iter()
            .map(|f| mu.mean_se(|x| f.eval(x)))
            .collect()
    }
}

/// Dictionary lower bound on the bounded-Lipschitz distance, with the
/// per-functional mean differences and combined standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct BetaReport {
    pub value: f64,
    /// |mean₁ − mean₂| per functional
    pub per_functional: Vec<f64>,
    /// sqrt(se₁² + se₂²) per functional
    pub combined_se: Vec<f64>,
    pub labels: Vec<String>,
}

impl BetaReport {
    /// Combined standard error at the maximizing functional.
    pub fn se_at_max(&self) -> f64 {
        self.per_functional
            .iter()
            .zip(&self.combined_se)
            .max_by(|a, b| a.0.partial_cmp(b.0).unwrap())
            .map(|(_, se)| *se)
            .unwrap_or(f64::NAN)
    }
}

/// max over the dictionary of |E_{μ1}F − E_{μ2}F|: a lower bound on the
/// bounded-Lipschitz distance β, symmetric and triangle-consistent for a
/// fixed dictionary.
pub fn beta_distance(
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    dict: &FunctionalDictionary,
) -> Result<BetaReport> {
    if mu1.grid() != mu2.grid() {
        return Err(Error::shape("measures live on different grids".to_string()));
    }
    let prof1 = dict.profile(mu1)?;
    let prof2 = dict.profile(mu2)?;
    let mut per_functional = Vec::with_capacity(dict.len());
    let mut combined_se = Vec::with_capacity(dict.len());
    let mut labels = Vec::with_capacity(dict.len());
    for (i, (a, b)) in prof1.iter().zip(&prof2).enumerate() {
        per_functional.push((a.0 - b.0).abs());
        combined_se.push((a.1 * a.1 + b.1 * b.1).sqrt());
        labels.push(dict.functionals[i].label(i));
    }
    let value = per_functional.iter().cloned().fold(0.0, f64::max);
    Ok(BetaReport {
        value,
        per_functional,
        combined_se,
        labels,
    })
}

/// Sample average of an energy functional over the measure; divided by the
/// noise trace norm this is the energy–mass ratio of the invariant measure.
pub fn energy_mass_estimate(
    mu: &EmpiricalMeasure,
    energy: impl Fn(&Field) -> Result<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    for s in &mu.samples {
        acc += energy(s)?;
    }
    Ok(acc / mu.samples.len() as f64)
}

/// Fraction of independent noise paths staying η-close (in squared L²)
/// to the noise-free flow from the same initial state.
pub fn deterministic_comparison(
    x0: &Field,
    config: &SolverConfig,
    eta: f64,
    n_paths: usize,
) -> Result<f64> {
    if n_paths == 0 {
        return Err(Error::parameter("comparison needs at least one path".to_string()));
    }
    if !(eta > 0.0) {
        return Err(Error::parameter(format!("eta must be positive, got {eta}")));
    }
    // noise-free reference at every step
    let mut det_cfg = config.clone();
    det_cfg.noise = None;
    det_cfg.save_stride = 1;
    let reference = crate::integrator::simulate(x0, &det_cfg)?;

    let noise = config
        .noise
        .as_ref()
        .ok_or_else(|| Error::config("deterministic comparison needs a noise model".to_string()))?;
    let base_seed = noise.seed;
    let results = map_runs((0..n_paths as u64).collect(), |path_index| -> Result<bool> {
        let mut cfg = config.clone();
        cfg.noise = Some(noise.with_seed(derive_seed(base_seed, path_index)));
        let stepper = Stepper::new(&cfg, x0.grid())?;
        let mut state = crate::field::project_mean_zero(x0);
        let mut sup = 0.0_f64;
        for step_index in 0..cfg.n_steps {
            let dw = stepper.noise_increment(step_index as u64);
            state = stepper.step(&state, dw.as_ref())?;
            let d = state.sub(&reference.states()[step_index + 1])?;
            sup = sup.max(lm_norm(&d, 2.0)?.powi(2));
            if sup > eta {
                return Ok(false);
            }
        }
        Ok(sup <= eta)
    });
    let mut close = 0usize;
    for r in results {
        if r? {
            close += 1;
        }
    }
    Ok(close as f64 / n_paths as f64)
}
