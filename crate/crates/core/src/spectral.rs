//! FFT plumbing for the periodic torus and the sine series on `(0, π)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Uniform periodic grid `x_j = -L/2 + j dx` with cached FFT plans.
#[derive(Clone)]
pub struct Torus {
    nx: usize,
    len: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Torus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Torus")
            .field("nx", &self.nx)
            .field("len", &self.len)
            .finish()
    }
}

impl Torus {
    pub fn new(nx: usize, len: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nx);
        let inverse = planner.plan_fft_inverse(nx);
        let wavenumbers = (0..nx)
            .map(|m| {
                let signed = if m <= nx / 2 {
                    m as f64
                } else {
                    m as f64 - nx as f64
                };
                2.0 * PI * signed / len
            })
            .collect();
        Self {
            nx,
            len,
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn dx(&self) -> f64 {
        self.len / self.nx as f64
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `|k|^{2α}` for every mode, the symbol of `(-Δ)^α`.
    pub fn symbol(&self, alpha: f64) -> Vec<f64> {
        self.wavenumbers
            .iter()
            .map(|k| k.abs().powf(2.0 * alpha))
            .collect()
    }

    /// Unnormalized forward transform of a real array.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the `1/nx` factor; the imaginary part is dropped.
    pub fn inverse_real(&self, spectrum: &[Complex64], scratch: &mut Vec<Complex64>) -> Vec<f64> {
        scratch.clear();
        scratch.extend_from_slice(spectrum);
        self.inverse.process(scratch);
        let norm = 1.0 / self.nx as f64;
        scratch.iter().map(|c| c.re * norm).collect()
    }

    /// Applies `exp(-t |k|^{2α})` to a real periodic array.
    pub fn heat(&self, values: &[f64], alpha: f64, t: f64) -> Vec<f64> {
        let mut spec = self.forward_real(values);
        for (c, k) in spec.iter_mut().zip(&self.wavenumbers) {
            *c *= (-t * k.abs().powf(2.0 * alpha)).exp();
        }
        let mut scratch = Vec::with_capacity(self.nx);
        self.inverse_real(&spec, &mut scratch)
    }
}

/// Type-I discrete sine transform on the open-interval grid
/// `x_j = jπ/(N+1)`, `j = 1..=N`, through an odd extension of length `2(N+1)`.
#[derive(Clone)]
pub struct SineSeries {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineSeries {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    pub fn grid(&self) -> Vec<f64> {
        (1..=self.n)
            .map(|j| j as f64 * PI / (self.n + 1) as f64)
            .collect()
    }

    /// `b_k = Σ_j f_j sin(k x_j)` for `k = 1..=N`.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        let m = 2 * (self.n + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (j, &v) in f.iter().enumerate() {
            buf[j + 1] = Complex64::new(v, 0.0);
            buf[m - j - 1] = Complex64::new(-v, 0.0);
        }
        self.fft.process(&mut buf);
        // FFT of the odd extension is -2i Σ f_j sin(k x_j).
        (1..=self.n).map(|k| -0.5 * buf[k].im).collect()
    }

    /// Inverse of [`SineSeries::forward`].
    pub fn inverse(&self, b: &[f64]) -> Vec<f64> {
        let scale = 2.0 / (self.n + 1) as f64;
        self.forward(b).into_iter().map(|v| v * scale).collect()
    }
}
