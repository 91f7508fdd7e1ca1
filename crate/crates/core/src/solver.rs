//! Spectral solvers on the periodic torus: deterministic fractional heat flow,
//! stochastic convolutions driven by one Brownian motion or by space-time white
//! noise, and the Dirichlet sine-series semigroup on `(0, π)`.
//!
//! The stochastic convolution is stepped exactly in Fourier space:
//! `û_{n+1} = e^{-dt λ}(û_n + F̂_n)` with `λ_k = |k|^{2α}` and `F_n` the left-endpoint
//! forcing increment, so `u(t_n) = Σ_{m<n} K(t_n - t_m) ∗ F_m` with the kernel
//! periodized on the torus and no `m = n` term.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{
    self, FieldSample, FieldsError, Forcing, ForcingSpec, GridSpec, NoiseKind, NoiseSpec,
    NormalStream, Provenance,
};
use crate::kernel::KernelSpec;
use crate::spectral::{SineSeries, Torus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Fields(#[from] FieldsError),
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("{0}")]
    Input(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;

fn default_store_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub noise: NoiseSpec,
    pub forcing: ForcingSpec,
    #[serde(default = "default_store_every")]
    pub store_every: usize,
    /// Moment order used only for the admissibility flags.
    #[serde(default)]
    pub moment_p: Option<f64>,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel
            .validate()
            .map_err(|e| SolverError::Kernel(e.to_string()))?;
        self.grid.validate()?;
        fields::make_forcing(&self.forcing)?;
        if self.store_every == 0 || self.grid.nt % self.store_every != 0 {
            return Err(SolverError::Input(format!(
                "store_every must divide nt = {}, got {}",
                self.grid.nt, self.store_every
            )));
        }
        if self.kernel.dim != 1 {
            return Err(SolverError::Unsupported(format!(
                "the torus solver is one-dimensional; kernel dimension is {}",
                self.kernel.dim
            )));
        }
        Ok(())
    }

    /// Parameter combinations outside the regimes where the regularity
    /// statements apply. These are reported, not enforced.
    pub fn admissibility_warnings(&self) -> Vec<String> {
        let alpha = self.kernel.alpha;
        let d = self.kernel.dim as f64;
        let mut w = Vec::new();
        match self.noise.kind {
            NoiseKind::SingleBm => {
                if let Some(p) = self.moment_p {
                    if alpha * p <= d {
                        w.push(format!(
                            "alpha*p = {} <= d = {d}: moment bound needs p > d/alpha",
                            alpha * p
                        ));
                    }
                }
            }
            NoiseKind::SpacetimeWhite => {
                if alpha <= 0.5 {
                    w.push(format!(
                        "alpha = {alpha} <= 1/2: white-noise convolution has infinite variance in the continuum"
                    ));
                }
                if let Some(p) = self.moment_p {
                    if alpha > 0.5 && p <= 2.0 / (2.0 * alpha - 1.0) {
                        w.push(format!(
                            "p = {p} <= 2/(2alpha-1): no admissible Hölder index"
                        ));
                    }
                }
            }
        }
        let ell = self.grid.t_max.powf(1.0 / (2.0 * alpha));
        if self.grid.domain_len < 8.0 * ell {
            w.push(format!(
                "domain_len = {} is below 8 diffusion lengths ({})",
                self.grid.domain_len,
                8.0 * ell
            ));
        }
        w
    }

    pub fn stored_times(&self) -> Vec<f64> {
        (0..=self.grid.nt / self.store_every)
            .map(|i| self.grid.t(i * self.store_every))
            .collect()
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SolverError::Input(format!(
            "{what} has non-finite value at index {i}"
        ))),
        None => Ok(()),
    }
}

/// Spectral heat flow `ρ̂(t, k) = e^{-t|k|^{2α}} ρ̂(0, k)` at every grid time.
pub fn evolve_deterministic(
    rho0: &[f64],
    kernel: &KernelSpec,
    grid: &GridSpec,
) -> Result<FieldSample> {
    grid.validate()?;
    let times: Vec<f64> = (0..=grid.nt).map(|i| grid.t(i)).collect();
    let mut out = evolve_at_times(rho0, kernel, grid.domain_len, &times)?;
    out.grid = Some(*grid);
    Ok(out)
}

/// Spectral heat flow sampled at arbitrary increasing non-negative times.
pub fn evolve_at_times(
    rho0: &[f64],
    kernel: &KernelSpec,
    domain_len: f64,
    times: &[f64],
) -> Result<FieldSample> {
    kernel
        .validate()
        .map_err(|e| SolverError::Kernel(e.to_string()))?;
    check_finite(rho0, "rho0")?;
    let nx = rho0.len();
    if nx < 4 || !nx.is_power_of_two() {
        return Err(SolverError::Input(format!(
            "rho0 length must be a power of two >= 4, got {nx}"
        )));
    }
    if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(SolverError::Input(
            "times must be finite and non-negative".into(),
        ));
    }
    let torus = Torus::new(nx, domain_len);
    let lambda = torus.symbol(kernel.alpha);
    let spec0 = torus.forward_real(rho0);
    let mut scratch = Vec::with_capacity(nx);
    let mut values = Vec::with_capacity(nx * times.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    for &t in times {
        for ((b, s), l) in buf.iter_mut().zip(&spec0).zip(&lambda) {
            *b = s * (-t * l).exp();
        }
        values.extend(torus.inverse_real(&buf, &mut scratch));
    }
    let xs = (0..nx)
        .map(|j| -0.5 * domain_len + j as f64 * torus.dx())
        .collect();
    let mut field = FieldSample::new(times.to_vec(), xs, values)?;
    field.provenance.kernel = Some(kernel.clone());
    Ok(field)
}

/// Reusable stepping state for one configuration; `solve` runs one replicate.
pub struct MildSolver {
    config: SolveConfig,
    forcing: Forcing,
    torus: Torus,
    decay: Vec<f64>,
    xs: Vec<f64>,
    g_hat: Option<Vec<Complex64>>,
    warnings: Vec<String>,
}

impl MildSolver {
    pub fn new(config: &SolveConfig) -> Result<Self> {
        config.validate()?;
        let forcing = fields::make_forcing(&config.forcing)?;
        let torus = Torus::new(config.grid.nx, config.grid.domain_len);
        let dt = config.grid.dt();
        let decay = torus
            .symbol(config.kernel.alpha)
            .iter()
            .map(|l| (-dt * l).exp())
            .collect();
        let xs = config.grid.xs();
        let g_hat = (config.noise.kind == NoiseKind::SingleBm && forcing.is_time_independent())
            .then(|| torus.forward_real(&forcing.row(0.0, &xs)));
        Ok(Self {
            warnings: config.admissibility_warnings(),
            config: config.clone(),
            forcing,
            torus,
            decay,
            xs,
            g_hat,
        })
    }

    pub fn config(&self) -> &SolveConfig {
        &self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Runs replicate `replicate_id` of the configured noise.
    pub fn solve(&self, replicate_id: u64) -> FieldSample {
        let cfg = &self.config;
        let grid = &cfg.grid;
        let nx = grid.nx;
        let noise = cfg.noise.with_replicate(replicate_id);
        let times = cfg.stored_times();
        let mut values = Vec::with_capacity(times.len() * nx);
        values.extend(std::iter::repeat_n(0.0, nx));
        let mut u_hat = vec![Complex64::new(0.0, 0.0); nx];
        let mut scratch = Vec::with_capacity(nx);

        match noise.kind {
            NoiseKind::SingleBm => {
                let mut stream = NormalStream::new(noise.seed, noise.replicate_id, 1);
                let sd = grid.dt().sqrt();
                let mut dw = [0.0];
                let mut g_hat_t = self.g_hat.clone().unwrap_or_default();
                for n in 0..grid.nt {
                    stream.fill_row(n, &mut dw);
                    let dw = sd * dw[0];
                    if self.g_hat.is_none() {
                        g_hat_t = self
                            .torus
                            .forward_real(&self.forcing.row(grid.t(n), &self.xs));
                    }
                    for ((u, g), e) in u_hat.iter_mut().zip(&g_hat_t).zip(&self.decay) {
                        *u = (*u + g * dw) * e;
                    }
                    self.store_if_due(n + 1, &u_hat, &mut scratch, &mut values);
                }
            }
            NoiseKind::SpacetimeWhite => {
                let mut stream = NormalStream::new(noise.seed, noise.replicate_id, nx);
                let sd = (grid.dt() * grid.dx()).sqrt();
                let inv_dx = 1.0 / grid.dx();
                let mut row = vec![0.0; nx];
                let mut g_row = self.forcing.row(0.0, &self.xs);
                let mut buf = vec![Complex64::new(0.0, 0.0); nx];
                for n in 0..grid.nt {
                    stream.fill_row(n, &mut row);
                    if !self.forcing.is_time_independent() {
                        g_row = self.forcing.row(grid.t(n), &self.xs);
                    }
                    for ((b, w), g) in buf.iter_mut().zip(&row).zip(&g_row) {
                        *b = Complex64::new(g * w * sd, 0.0);
                    }
                    self.torus.forward_in_place(&mut buf);
                    for ((u, f), e) in u_hat.iter_mut().zip(&buf).zip(&self.decay) {
                        *u = (*u + f * inv_dx) * e;
                    }
                    self.store_if_due(n + 1, &u_hat, &mut scratch, &mut values);
                }
            }
        }
        let mut field = FieldSample::new(times, self.xs.clone(), values)
            .expect("solver output has consistent shape");
        field.grid = Some(*grid);
        field.provenance = Provenance {
            noise: Some(noise),
            forcing: Some(cfg.forcing.clone()),
            kernel: Some(cfg.kernel.clone()),
            warnings: self.warnings.clone(),
        };
        field
    }

    fn store_if_due(
        &self,
        step: usize,
        u_hat: &[Complex64],
        scratch: &mut Vec<Complex64>,
        values: &mut Vec<f64>,
    ) {
        if step % self.config.store_every == 0 {
            values.extend(self.torus.inverse_real(u_hat, scratch));
        }
    }
}

/// Mild solution driven by a single Brownian motion.
pub fn solve_mild_bm(config: &SolveConfig) -> Result<FieldSample> {
    if config.noise.kind != NoiseKind::SingleBm {
        return Err(FieldsError::KindMismatch {
            expected: NoiseKind::SingleBm,
            got: config.noise.kind,
        }
        .into());
    }
    Ok(MildSolver::new(config)?.solve(config.noise.replicate_id))
}

/// Mild solution driven by space-time white noise (one space dimension).
pub fn solve_mild_stwn(config: &SolveConfig) -> Result<FieldSample> {
    if config.noise.kind != NoiseKind::SpacetimeWhite {
        return Err(FieldsError::KindMismatch {
            expected: NoiseKind::SpacetimeWhite,
            got: config.noise.kind,
        }
        .into());
    }
    if config.kernel.dim != 1 {
        return Err(SolverError::Unsupported(format!(
            "space-time white noise is only defined here for d = 1, got d = {}",
            config.kernel.dim
        )));
    }
    Ok(MildSolver::new(config)?.solve(config.noise.replicate_id))
}

/// Runs replicates `0..n` in parallel and returns them in replicate order.
pub fn solve_ensemble(config: &SolveConfig, replicates: usize) -> Result<Vec<FieldSample>> {
    use rayon::prelude::*;
    let solver = MildSolver::new(config)?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| solver.solve(r))
        .collect())
}

/// Dirichlet heat semigroup on `(0, π)`: `v̂_k(t) = e^{-k² t} F̂_k` for the sine
/// coefficients of `F` given at `x_j = jπ/(N+1)`.
pub fn dirichlet_semigroup(f: &[f64], t: f64) -> Result<Vec<f64>> {
    check_finite(f, "F")?;
    if f.is_empty() {
        return Err(SolverError::Input("F must be non-empty".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SolverError::Input(format!(
            "t must be non-negative, got {t}"
        )));
    }
    let s = SineSeries::new(f.len());
    let mut b = s.forward(f);
    for (k, c) in b.iter_mut().enumerate() {
        let k = (k + 1) as f64;
        *c *= (-k * k * t).exp();
    }
    Ok(s.inverse(&b))
}

/// Interior grid of [`dirichlet_semigroup`].
pub fn dirichlet_grid(n: usize) -> Vec<f64> {
    SineSeries::new(n).grid()
}
