//! Parabolic geometry and discrete Campanato / Hölder seminorms.
//!
//! Points are `X = (t, x)` with the metric `δ(X, Y) = max(|x - y|, |t - s|^{1/2})`.
//! Suprema over cylinders and pairs are taken over finite samples, so every
//! value here is a lower bound for the continuum seminorm that grows as the
//! sample set grows.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::FieldSample;
use crate::quadrature::GaussLegendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeminormError {
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, SeminormError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicPoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl ParabolicPoint {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        Self { t, x }
    }

    pub fn d1(t: f64, x: f64) -> Self {
        Self { t, x: vec![x] }
    }
}

pub fn parabolic_dist(a: &ParabolicPoint, b: &ParabolicPoint) -> f64 {
    debug_assert_eq!(a.x.len(), b.x.len());
    let dx =
        a.x.iter()
            .zip(&b.x)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
    dx.max((a.t - b.t).abs().sqrt())
}

fn dist_1d(t0: f64, x0: f64, t1: f64, x1: f64) -> f64 {
    (x0 - x1).abs().max((t0 - t1).abs().sqrt())
}

/// `Q_c(X) = (t - c², t + c²) × B_c(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub center: ParabolicPoint,
    pub radius: f64,
}

pub fn cylinder(center: &ParabolicPoint, c: f64) -> Result<Cylinder> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(SeminormError::Invalid(format!(
            "radius must be positive, got {c}"
        )));
    }
    Ok(Cylinder {
        center: center.clone(),
        radius: c,
    })
}

impl Cylinder {
    pub fn contains(&self, y: &ParabolicPoint) -> bool {
        parabolic_dist(&self.center, y) < self.radius
    }

    pub fn measure(&self) -> f64 {
        cylinder_measure(self.radius, self.center.x.len())
    }
}

/// Lebesgue measure `2c² |B_c|` of a cylinder in `d = 1` or `2`.
pub fn cylinder_measure(c: f64, dim: usize) -> f64 {
    let ball = match dim {
        1 => 2.0 * c,
        2 => PI * c * c,
        _ => panic!("dimension {dim} not supported"),
    };
    2.0 * c * c * ball
}

/// `D_T = (t_min, t_max) × box`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub atype_constant_hat: Option<f64>,
}

impl DomainSpec {
    pub fn new(t: (f64, f64), lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Self {
            t_min: t.0,
            t_max: t.1,
            lower,
            upper,
            atype_constant_hat: None,
        };
        if !(d.t_max > d.t_min)
            || d.lower.len() != d.upper.len()
            || !(1..=2).contains(&d.lower.len())
            || d.lower.iter().zip(&d.upper).any(|(a, b)| !(b > a))
        {
            return Err(SeminormError::Invalid(format!("degenerate domain {d:?}")));
        }
        Ok(d)
    }

    /// The rectangle spanned by a field's time and space axes.
    pub fn of_field(field: &FieldSample) -> Result<Self> {
        let (t0, t1) = (field.times[0], *field.times.last().unwrap());
        let (x0, x1) = (field.xs[0], *field.xs.last().unwrap());
        Self::new((t0, t1), vec![x0], vec![x1])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Euclidean diameter of the spatial box.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// `|D_T ∩ Q_ρ(X)|`, exact up to quadrature of the disc chords in `d = 2`.
    pub fn intersection_measure(&self, center: &ParabolicPoint, rho: f64) -> f64 {
        let time = overlap(
            self.t_min,
            self.t_max,
            center.t - rho * rho,
            center.t + rho * rho,
        );
        if time == 0.0 {
            return 0.0;
        }
        let space = match self.dim() {
            1 => overlap(
                self.lower[0],
                self.upper[0],
                center.x[0] - rho,
                center.x[0] + rho,
            ),
            _ => disc_rect_area(
                (center.x[0], center.x[1]),
                rho,
                (self.lower[0], self.upper[0]),
                (self.lower[1], self.upper[1]),
            ),
        };
        time * space
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

fn disc_rect_area(c: (f64, f64), r: f64, xr: (f64, f64), yr: (f64, f64)) -> f64 {
    // s = c.0 + r sin φ; the clipped chord is piecewise smooth in φ with kinks
    // where the chord end crosses a horizontal edge or s crosses a vertical one.
    let mut breaks = vec![-0.5 * PI, 0.5 * PI];
    let mut push_s = |s: f64| {
        let v = (s - c.0) / r;
        if v.abs() < 1.0 {
            breaks.push(v.asin());
        }
    };
    push_s(xr.0);
    push_s(xr.1);
    for y in [yr.0, yr.1] {
        let h = (y - c.1).abs();
        if h < r {
            let w = (r * r - h * h).sqrt();
            push_s(c.0 - w);
            push_s(c.0 + w);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rule = GaussLegendre::new(16);
    let chord = |phi: f64| -> f64 {
        let s = c.0 + r * phi.sin();
        if s < xr.0 || s > xr.1 {
            return 0.0;
        }
        let half = r * phi.cos();
        overlap(yr.0, yr.1, c.1 - half, c.1 + half) * r * phi.cos()
    };
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| rule.integrate(w[0], w[1], chord))
        .sum()
}

/// Where a reported supremum was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    None,
    Cylinder {
        t_index: usize,
        x_index: usize,
        t: f64,
        x: f64,
        radius: f64,
    },
    Pair {
        a: (usize, usize),
        b: (usize, usize),
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub kind: String,
    pub p: f64,
    /// `θ` for Campanato reports, the Hölder exponent otherwise.
    pub exponent: f64,
    pub value: f64,
    pub witness: Witness,
    pub n_times: usize,
    pub n_space: usize,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Which cylinders a Campanato scan visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampanatoSampling {
    pub center_stride_t: usize,
    pub center_stride_x: usize,
    pub radii: Vec<f64>,
}

impl CampanatoSampling {
    /// Radii `d(D) 2^{-j}` down to `max(2 dx, √(2 dt))`; centers on every
    /// `stride`-th node.
    pub fn dyadic(
        field: &FieldSample,
        domain: &DomainSpec,
        stride_t: usize,
        stride_x: usize,
    ) -> Self {
        let dt = field
            .times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let dx = field.xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let floor = (2.0 * dx).max((2.0 * dt).sqrt());
        let mut radii = Vec::new();
        let mut r = domain.diameter();
        while r >= floor {
            radii.push(r);
            r *= 0.5;
        }
        Self {
            center_stride_t: stride_t.max(1),
            center_stride_x: stride_x.max(1),
            radii,
        }
    }
}

/// Cell extents from midpoints between nodes, clipped at the end nodes.
fn cells(axis: &[f64]) -> Vec<(f64, f64)> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 {
                axis[0]
            } else {
                0.5 * (axis[i - 1] + axis[i])
            };
            let hi = if i + 1 == n {
                axis[n - 1]
            } else {
                0.5 * (axis[i] + axis[i + 1])
            };
            (lo, hi)
        })
        .collect()
}

struct CellGeometry {
    t_cells: Vec<(f64, f64)>,
    x_width: Vec<f64>,
}

impl CellGeometry {
    fn new(field: &FieldSample) -> Self {
        let x_width = cells(&field.xs)
            .iter()
            .map(|(a, b)| b - a)
            .collect::<Vec<_>>();
        // A single node on an axis gets unit weight.
        let x_width = if field.xs.len() == 1 {
            vec![1.0]
        } else {
            x_width
        };
        let t_cells = if field.times.len() == 1 {
            vec![(field.times[0] - 0.5, field.times[0] + 0.5)]
        } else {
            cells(&field.times)
        };
        Self { t_cells, x_width }
    }
}

fn campanato_cell_sum(
    field: &FieldSample,
    geom: &CellGeometry,
    p: f64,
    theta: f64,
    ti: usize,
    xi: usize,
    rho: f64,
) -> Option<f64> {
    let tc = field.times[ti];
    let xc = field.xs[xi];
    let (t_lo, t_hi) = (tc - rho * rho, tc + rho * rho);
    let j0 = field.xs.partition_point(|&x| x <= xc - rho);
    let j1 = field.xs.partition_point(|&x| x < xc + rho);
    if j0 >= j1 {
        return None;
    }
    let i0 = geom.t_cells.partition_point(|c| c.1 <= t_lo);
    let i1 = geom.t_cells.partition_point(|c| c.0 < t_hi);
    let mut rows = Vec::with_capacity(i1.saturating_sub(i0));
    for i in i0..i1 {
        let (a, b) = geom.t_cells[i];
        let w = overlap(a, b, t_lo, t_hi);
        if w > 0.0 {
            rows.push((i, w));
        }
    }
    let mut measure = 0.0;
    let mut sum = 0.0;
    for &(i, wt) in &rows {
        let row = field.row(i);
        for j in j0..j1 {
            let w = wt * geom.x_width[j];
            measure += w;
            sum += w * row[j];
        }
    }
    if measure <= 0.0 {
        return None;
    }
    let mean = sum / measure;
    let mut osc = 0.0;
    for &(i, wt) in &rows {
        let row = field.row(i);
        for j in j0..j1 {
            osc += wt * geom.x_width[j] * (row[j] - mean).abs().powf(p);
        }
    }
    Some((measure.powf(-theta) * osc).powf(1.0 / p))
}

/// `(|D(X,ρ)|^{-θ} ∫_{D(X,ρ)} |u - u_{X,ρ}|^p)^{1/p}` for the cylinder centered at
/// node `(ti, xi)`; `None` when `D(X, ρ)` contains no cell.
pub fn campanato_at(
    field: &FieldSample,
    p: f64,
    theta: f64,
    ti: usize,
    xi: usize,
    rho: f64,
) -> Option<f64> {
    let geom = CellGeometry::new(field);
    campanato_cell_sum(field, &geom, p, theta, ti, xi, rho)
}

/// Discrete Campanato seminorm over the sampled centers and radii.
pub fn campanato_seminorm(
    field: &FieldSample,
    domain: &DomainSpec,
    p: f64,
    theta: f64,
    sampling: &CampanatoSampling,
) -> Result<SeminormReport> {
    use rayon::prelude::*;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(SeminormError::Invalid(format!("p must be >= 1, got {p}")));
    }
    if !(theta >= 0.0) {
        return Err(SeminormError::Invalid(format!(
            "theta must be >= 0, got {theta}"
        )));
    }
    let diam = domain.diameter();
    if let Some(r) = sampling
        .radii
        .iter()
        .find(|&&r| !(r > 0.0 && r <= diam * (1.0 + 1e-12)))
    {
        return Err(SeminormError::Invalid(format!(
            "radius {r} outside (0, d(D) = {diam}]"
        )));
    }
    let geom = CellGeometry::new(field);
    let st = sampling.center_stride_t.max(1);
    let sx = sampling.center_stride_x.max(1);
    let centers: Vec<(usize, usize)> = (0..field.n_times())
        .step_by(st)
        .flat_map(|i| (0..field.n_space()).step_by(sx).map(move |j| (i, j)))
        .collect();
    let per_center: Vec<(f64, Witness, usize, usize)> = centers
        .par_iter()
        .map(|&(i, j)| {
            let mut best = (0.0, Witness::None, 0usize, 0usize);
            for &rho in &sampling.radii {
                match campanato_cell_sum(field, &geom, p, theta, i, j, rho) {
                    Some(v) => {
                        best.2 += 1;
                        if v > best.0 || matches!(best.1, Witness::None) {
                            best.0 = v;
                            best.1 = Witness::Cylinder {
                                t_index: i,
                                x_index: j,
                                t: field.times[i],
                                x: field.xs[j],
                                radius: rho,
                            };
                        }
                    }
                    None => best.3 += 1,
                }
            }
            best
        })
        .collect();
    let mut value = 0.0;
    let mut witness = Witness::None;
    let (mut evaluated, mut skipped) = (0, 0);
    for (v, w, e, s) in per_center {
        evaluated += e;
        skipped += s;
        if e > 0 && (v > value || matches!(witness, Witness::None)) {
            value = v;
            witness = w;
        }
    }
    Ok(SeminormReport {
        kind: "campanato".into(),
        p,
        exponent: theta,
        value,
        witness,
        n_times: field.n_times(),
        n_space: field.n_space(),
        evaluated,
        skipped,
    })
}

/// Pair sampling for [`holder_seminorm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderSampling {
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for HolderSampling {
    fn default() -> Self {
        Self {
            random_pairs: 10_000,
            seed: 0,
        }
    }
}

fn pair_quotient(
    field: &FieldSample,
    a: (usize, usize),
    b: (usize, usize),
    gamma: f64,
) -> Option<f64> {
    let d = dist_1d(
        field.times[a.0],
        field.xs[a.1],
        field.times[b.0],
        field.xs[b.1],
    );
    if d == 0.0 {
        return None;
    }
    Some((field.at(a.0, a.1) - field.at(b.0, b.1)).abs() / d.powf(gamma))
}

/// `|u(X) - u(Y)| / δ(X, Y)^γ` for a stored witness pair.
pub fn holder_at(field: &FieldSample, a: (usize, usize), b: (usize, usize), gamma: f64) -> f64 {
    pair_quotient(field, a, b, gamma).unwrap_or(0.0)
}

/// Sup of `|u(X) - u(Y)| / δ(X,Y)^γ` over all node pairs separated by dyadic
/// index offsets along time, space and both diagonals, plus seeded random pairs.
pub fn holder_seminorm(
    field: &FieldSample,
    gamma_exp: f64,
    sampling: &HolderSampling,
) -> Result<SeminormReport> {
    use rayon::prelude::*;
    if !(gamma_exp > 0.0 && gamma_exp <= 1.0) {
        return Err(SeminormError::Invalid(format!(
            "Hölder exponent must lie in (0, 1], got {gamma_exp}"
        )));
    }
    let (nt, nx) = (field.n_times() as isize, field.n_space() as isize);
    let mut offsets = Vec::new();
    let mut s = 1isize;
    while s < nt.max(nx) {
        offsets.extend([(0, s), (s, 0), (s, s), (s, -s)]);
        s *= 2;
    }
    let rows: Vec<(f64, Witness, usize)> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let mut best = (0.0, Witness::None, 0usize);
            for j in 0..nx {
                for &(di, dj) in &offsets {
                    let (k, l) = (i + di, j + dj);
                    if k >= nt || l < 0 || l >= nx {
                        continue;
                    }
                    let (a, b) = ((i as usize, j as usize), (k as usize, l as usize));
                    if let Some(q) = pair_quotient(field, a, b, gamma_exp) {
                        best.2 += 1;
                        if q > best.0 || matches!(best.1, Witness::None) {
                            let delta = dist_1d(
                                field.times[a.0],
                                field.xs[a.1],
                                field.times[b.0],
                                field.xs[b.1],
                            );
                            best = (q, Witness::Pair { a, b, delta }, best.2);
                        }
                    }
                }
            }
            best
        })
        .collect();
    let mut value = 0.0;
    let mut witness = Witness::None;
    let mut evaluated = 0;
    for (v, w, e) in rows {
        evaluated += e;
        if e > 0 && (v > value || matches!(witness, Witness::None)) {
            value = v;
            witness = w;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    for _ in 0..sampling.random_pairs {
        let a = (
            rng.random_range(0..nt as usize),
            rng.random_range(0..nx as usize),
        );
        let b = (
            rng.random_range(0..nt as usize),
            rng.random_range(0..nx as usize),
        );
        if let Some(q) = pair_quotient(field, a, b, gamma_exp) {
            evaluated += 1;
            if q > value || matches!(witness, Witness::None) {
                value = q;
                let delta = dist_1d(
                    field.times[a.0],
                    field.xs[a.1],
                    field.times[b.0],
                    field.xs[b.1],
                );
                witness = Witness::Pair { a, b, delta };
            }
        }
    }
    Ok(SeminormReport {
        kind: "holder".into(),
        p: f64::INFINITY,
        exponent: gamma_exp,
        value,
        witness,
        n_times: field.n_times(),
        n_space: field.n_space(),
        evaluated,
        skipped: 0,
    })
}

/// Re-evaluates a report's witness; equals `report.value` bit for bit.
pub fn reevaluate_witness(field: &FieldSample, report: &SeminormReport) -> Option<f64> {
    match report.witness {
        Witness::None => None,
        Witness::Cylinder {
            t_index,
            x_index,
            radius,
            ..
        } => campanato_at(field, report.p, report.exponent, t_index, x_index, radius),
        Witness::Pair { a, b, .. } => Some(holder_at(field, a, b, report.exponent)),
    }
}

/// Spatial Hölder quotient `sup_h sup_x |f(x+h) - f(x)| / |h|^γ` of one row with
/// spacing `dx`. Lags `1..=64` are scanned exhaustively and longer lags on a
/// geometric ladder of ratio `2^{1/16}`. With `periodic`, lags wrap and run up to
/// half the period. Returns the value and the maximizing lag in grid steps.
pub fn spatial_holder(values: &[f64], dx: f64, gamma: f64, periodic: bool) -> (f64, usize) {
    let n = values.len();
    let max_lag = if periodic { n / 2 } else { n - 1 };
    let mut lags: Vec<usize> = (1..=max_lag.min(64)).collect();
    let mut h = 64.0f64;
    loop {
        h *= 2f64.powf(1.0 / 16.0);
        let l = h.round() as usize;
        if l > max_lag {
            break;
        }
        if l > *lags.last().unwrap_or(&0) {
            lags.push(l);
        }
    }
    let mut best = (0.0, 0usize);
    for &lag in &lags {
        let mut m = 0.0f64;
        if periodic {
            for j in 0..n {
                m = m.max((values[(j + lag) % n] - values[j]).abs());
            }
        } else {
            for j in 0..n - lag {
                m = m.max((values[j + lag] - values[j]).abs());
            }
        }
        let q = m / (lag as f64 * dx).powf(gamma);
        if q > best.0 {
            best = (q, lag);
        }
    }
    best
}

/// Result of an A-type scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtypeReport {
    pub constant: f64,
    pub witness_center: Option<ParabolicPoint>,
    pub witness_radius: f64,
    pub evaluated: usize,
}

/// `min |D_T ∩ Q_ρ(X)| / |Q_ρ(X)|` over the sampled centers and radii.
pub fn atype_constant(
    domain: &DomainSpec,
    centers: &[ParabolicPoint],
    radii: &[f64],
) -> Result<AtypeReport> {
    let diam = domain.diameter();
    if let Some(r) = radii
        .iter()
        .find(|&&r| !(r > 0.0 && r <= diam * (1.0 + 1e-12)))
    {
        return Err(SeminormError::Invalid(format!(
            "radius {r} outside (0, d(D) = {diam}]"
        )));
    }
    let mut rep = AtypeReport {
        constant: f64::INFINITY,
        witness_center: None,
        witness_radius: f64::NAN,
        evaluated: 0,
    };
    for c in centers {
        if c.x.len() != domain.dim() {
            return Err(SeminormError::Invalid("center dimension mismatch".into()));
        }
        for &r in radii {
            let ratio = domain.intersection_measure(c, r) / cylinder_measure(r, domain.dim());
            rep.evaluated += 1;
            if ratio < rep.constant {
                rep.constant = ratio;
                rep.witness_center = Some(c.clone());
                rep.witness_radius = r;
            }
        }
    }
    Ok(rep)
}

/// Hölder exponent `(d + 2)(θ - 1)/p` carried by the Campanato space `ℒ^{p,θ}`.
pub fn embedding_gamma(p: f64, theta: f64, d: usize) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(SeminormError::Invalid(format!("p must be >= 1, got {p}")));
    }
    let d = d as f64;
    let top = 1.0 + p / (d + 2.0);
    if !(theta > 1.0 && theta <= top) {
        return Err(SeminormError::Invalid(format!(
            "theta must lie in (1, {top}], got {theta}"
        )));
    }
    Ok(((d + 2.0) * (theta - 1.0) / p).min(1.0))
}
