//! Space-time grids, reproducible Gaussian noise, forcing coefficients and
//! realized fields.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("noise kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch { expected: NoiseKind, got: NoiseKind },
    #[error("invalid forcing: {0}")]
    InvalidForcing(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
}

pub type Result<T> = std::result::Result<T, FieldsError>;

/// Uniform grid on `[0, T] × torus of length L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    pub nt: usize,
    pub domain_len: f64,
    pub nx: usize,
}

impl GridSpec {
    pub fn new(t_max: f64, nt: usize, domain_len: f64, nx: usize) -> Result<Self> {
        let g = Self {
            t_max,
            nt,
            domain_len,
            nx,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(FieldsError::InvalidGrid(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if !(self.domain_len > 0.0 && self.domain_len.is_finite()) {
            return Err(FieldsError::InvalidGrid(format!(
                "domain_len must be positive, got {}",
                self.domain_len
            )));
        }
        if self.nt < 2 {
            return Err(FieldsError::InvalidGrid(format!(
                "nt must be at least 2, got {}",
                self.nt
            )));
        }
        if self.nx < 4 || !self.nx.is_power_of_two() {
            return Err(FieldsError::InvalidGrid(format!(
                "nx must be a power of two and at least 4, got {}",
                self.nx
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        self.domain_len / self.nx as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.domain_len + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    SingleBm,
    SpacetimeWhite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    #[serde(default)]
    pub replicate_id: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, seed: u64, replicate_id: u64) -> Self {
        Self {
            kind,
            seed,
            replicate_id,
        }
    }

    pub fn with_replicate(self, replicate_id: u64) -> Self {
        Self {
            replicate_id,
            ..self
        }
    }
}

/// Standard normal draws addressed by `(row, column)`.
///
/// Each `(seed, replicate)` pair selects a ChaCha stream; every cell owns a fixed
/// block of four 32-bit words at `row * width + column`, so the value of a cell
/// never depends on which other cells were drawn or in what order.
pub struct NormalStream {
    rng: ChaCha8Rng,
    width: u64,
}

impl NormalStream {
    pub fn new(seed: u64, replicate_id: u64, width: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate_id);
        Self {
            rng,
            width: width as u64,
        }
    }

    /// Fills `out` with the normals of `row`, columns `0..out.len()`.
    pub fn fill_row(&mut self, row: usize, out: &mut [f64]) {
        debug_assert!(out.len() as u64 <= self.width);
        self.rng
            .set_word_pos(4 * (row as u128) * (self.width as u128));
        for v in out.iter_mut() {
            *v = self.next_normal();
        }
    }

    fn next_normal(&mut self) -> f64 {
        // Box-Muller with u1 in (0, 1] and u2 in [0, 1).
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// `n` standard normals from `(seed, replicate_id)`.
pub fn standard_normals(seed: u64, replicate_id: u64, n: usize) -> Vec<f64> {
    let mut s = NormalStream::new(seed, replicate_id, n.max(1));
    let mut out = vec![0.0; n];
    s.fill_row(0, &mut out);
    out
}

/// Brownian increments `ΔW_i ~ N(0, dt)`, `i = 0..nt`.
pub fn sample_bm(noise: &NoiseSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    if noise.kind != NoiseKind::SingleBm {
        return Err(FieldsError::KindMismatch {
            expected: NoiseKind::SingleBm,
            got: noise.kind,
        });
    }
    let mut s = NormalStream::new(noise.seed, noise.replicate_id, 1);
    let sd = grid.dt().sqrt();
    let mut cell = [0.0];
    Ok((0..grid.nt)
        .map(|i| {
            s.fill_row(i, &mut cell);
            sd * cell[0]
        })
        .collect())
}

/// White-noise increments `ΔW_{ij} ~ N(0, dt dx)`, row-major `nt × nx`.
pub fn sample_stwn(noise: &NoiseSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    if noise.kind != NoiseKind::SpacetimeWhite {
        return Err(FieldsError::KindMismatch {
            expected: NoiseKind::SpacetimeWhite,
            got: noise.kind,
        });
    }
    let mut s = NormalStream::new(noise.seed, noise.replicate_id, grid.nx);
    let sd = (grid.dt() * grid.dx()).sqrt();
    let mut out = vec![0.0; grid.nt * grid.nx];
    for (i, row) in out.chunks_mut(grid.nx).enumerate() {
        s.fill_row(i, row);
        row.iter_mut().for_each(|v| *v *= sd);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingFamily {
    Constant,
    HolderVanishing,
    LpDecay,
}

/// Coefficient `g(t, x)`.
///
/// * `constant`: `params = [c]`, default `c = 1`.
/// * `holder_vanishing`: `params = [β, R]`, `g = min(max(√t, |x|), R)^β`, default `R = 1`.
/// * `lp_decay`: `params = [k]`, `g = (1 + |x|²)^{-k/2}`, default `k = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub family: ForcingFamily,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl ForcingSpec {
    pub fn constant(c: f64) -> Self {
        Self {
            family: ForcingFamily::Constant,
            params: vec![c],
        }
    }

    pub fn holder_vanishing(beta: f64) -> Self {
        Self {
            family: ForcingFamily::HolderVanishing,
            params: vec![beta],
        }
    }

    pub fn lp_decay(k: f64) -> Self {
        Self {
            family: ForcingFamily::LpDecay,
            params: vec![k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    Constant(f64),
    HolderVanishing { beta: f64, radius: f64 },
    LpDecay { k: f64 },
}

impl Forcing {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match *self {
            Forcing::Constant(c) => c,
            Forcing::HolderVanishing { beta, radius } => {
                t.max(0.0).sqrt().max(x.abs()).min(radius).powf(beta)
            }
            Forcing::LpDecay { k } => (1.0 + x * x).powf(-0.5 * k),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self, Forcing::HolderVanishing { .. })
    }

    /// Samples `g(t, ·)` on the grid nodes.
    pub fn row(&self, t: f64, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(t, x)).collect()
    }
}

pub fn make_forcing(spec: &ForcingSpec) -> Result<Forcing> {
    let p = &spec.params;
    let finite = p.iter().all(|v| v.is_finite());
    if !finite {
        return Err(FieldsError::InvalidForcing(
            "parameters must be finite".into(),
        ));
    }
    match spec.family {
        ForcingFamily::Constant => {
            if p.len() > 1 {
                return Err(FieldsError::InvalidForcing(
                    "constant takes at most one parameter".into(),
                ));
            }
            Ok(Forcing::Constant(p.first().copied().unwrap_or(1.0)))
        }
        ForcingFamily::HolderVanishing => {
            let beta = *p.first().ok_or_else(|| {
                FieldsError::InvalidForcing(
                    "holder_vanishing needs beta as its first parameter".into(),
                )
            })?;
            if !(beta > 0.0 && beta < 1.0) {
                return Err(FieldsError::InvalidForcing(format!(
                    "holder_vanishing needs beta in (0, 1), got {beta}"
                )));
            }
            let radius = p.get(1).copied().unwrap_or(1.0);
            if !(radius > 0.0) || p.len() > 2 {
                return Err(FieldsError::InvalidForcing(
                    "holder_vanishing takes [beta, radius > 0]".into(),
                ));
            }
            Ok(Forcing::HolderVanishing { beta, radius })
        }
        ForcingFamily::LpDecay => {
            let k = p.first().copied().unwrap_or(1.0);
            if !(k > 0.0) || p.len() > 1 {
                return Err(FieldsError::InvalidForcing(format!(
                    "lp_decay takes one decay power k > 0, got {p:?}"
                )));
            }
            Ok(Forcing::LpDecay { k })
        }
    }
}

/// Where a field came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub noise: Option<NoiseSpec>,
    pub forcing: Option<ForcingSpec>,
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Values `u(t_i, x_j)` stored row-major over the listed times and nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: Option<GridSpec>,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl FieldSample {
    pub fn new(times: Vec<f64>, xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || xs.is_empty() {
            return Err(FieldsError::InvalidField("empty time or space axis".into()));
        }
        if values.len() != times.len() * xs.len() {
            return Err(FieldsError::InvalidField(format!(
                "expected {} values for {} times and {} nodes, got {}",
                times.len() * xs.len(),
                times.len(),
                xs.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(FieldsError::InvalidField(format!("non-finite value {v}")));
        }
        let increasing = |a: &[f64]| a.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&times) || !increasing(&xs) {
            return Err(FieldsError::InvalidField(
                "time and space axes must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            grid: None,
            times,
            xs,
            values,
            provenance: Provenance::default(),
        })
    }

    /// Samples `f(t, x)` on a uniform `[t0, t1] × [x0, x1]` lattice, endpoints included.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(
        t_range: (f64, f64, usize),
        x_range: (f64, f64, usize),
        f: F,
    ) -> Result<Self> {
        let axis = |(a, b, n): (f64, f64, usize)| -> Vec<f64> {
            if n == 1 {
                vec![a]
            } else {
                (0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        };
        let times = axis(t_range);
        let xs = axis(x_range);
        let values = times
            .iter()
            .flat_map(|&t| xs.iter().map(move |&x| (t, x)))
            .map(|(t, x)| f(t, x))
            .collect();
        Self::new(times, xs, values)
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_space(&self) -> usize {
        self.xs.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.xs.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.xs.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= lambda);
        out
    }

    /// Writes `t,x,u` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x", "u"])?;
        for (i, &t) in self.times.iter().enumerate() {
            for (j, &x) in self.xs.iter().enumerate() {
                wr.write_record([t.to_string(), x.to_string(), self.at(i, j).to_string()])?;
            }
        }
        wr.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(1.0, 100, 1.0, 16).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1.0, 1, 1.0, 16).is_err());
        assert!(GridSpec::new(1.0, 4, 1.0, 12).is_err());
        assert!(GridSpec::new(1.0, 4, 1.0, 2).is_err());
        assert!(GridSpec::new(0.0, 4, 1.0, 8).is_err());
        let g = GridSpec::new(2.0, 4, 8.0, 8).unwrap();
        assert_eq!(g.dt(), 0.5);
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.x(0), -4.0);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let g = grid();
        let bm = NoiseSpec::new(NoiseKind::SingleBm, 1, 0);
        let wn = NoiseSpec::new(NoiseKind::SpacetimeWhite, 1, 0);
        assert!(sample_stwn(&bm, &g).is_err());
        assert!(sample_bm(&wn, &g).is_err());
    }

    #[test]
    fn noise_is_reproducible_and_replicates_differ() {
        let g = grid();
        let a = sample_stwn(&NoiseSpec::new(NoiseKind::SpacetimeWhite, 7, 3), &g).unwrap();
        let b = sample_stwn(&NoiseSpec::new(NoiseKind::SpacetimeWhite, 7, 3), &g).unwrap();
        let c = sample_stwn(&NoiseSpec::new(NoiseKind::SpacetimeWhite, 7, 4), &g).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn row_access_is_order_independent() {
        let mut s = NormalStream::new(5, 0, 8);
        let mut r2 = [0.0; 8];
        let mut r0 = [0.0; 8];
        s.fill_row(2, &mut r2);
        s.fill_row(0, &mut r0);
        let mut t = NormalStream::new(5, 0, 8);
        let mut q0 = [0.0; 8];
        let mut q2 = [0.0; 8];
        t.fill_row(0, &mut q0);
        t.fill_row(2, &mut q2);
        assert_eq!(r0, q0);
        assert_eq!(r2, q2);
    }

    #[test]
    fn forcing_families() {
        assert!(make_forcing(&ForcingSpec::holder_vanishing(1.0)).is_err());
        assert!(make_forcing(&ForcingSpec::holder_vanishing(0.0)).is_err());
        let g = make_forcing(&ForcingSpec::holder_vanishing(0.5)).unwrap();
        assert_eq!(g.eval(0.0, 0.0), 0.0);
        assert_eq!(g.eval(0.0, 4.0), 1.0);
        let c = make_forcing(&ForcingSpec {
            family: ForcingFamily::Constant,
            params: vec![],
        })
        .unwrap();
        assert_eq!(c.eval(0.3, -2.0), 1.0);
        let l = make_forcing(&ForcingSpec::lp_decay(2.0)).unwrap();
        assert!((l.eval(0.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn field_sample_shape_checks() {
        assert!(FieldSample::new(vec![0.0, 1.0], vec![0.0], vec![1.0]).is_err());
        assert!(FieldSample::new(vec![0.0], vec![0.0], vec![f64::NAN]).is_err());
        let f = FieldSample::from_fn((0.0, 1.0, 3), (0.0, 1.0, 5), |t, x| t + x).unwrap();
        assert_eq!(f.at(2, 4), 2.0);
        assert_eq!(f.row(1).len(), 5);
    }
}
