//! Fixed-order Gauss–Legendre panels and the tail integrators built on them.

use num_complex::Complex64;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Gauss-Legendre rule needs at least two nodes");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Maps the rule onto `[a, b]` and returns `(node, weight)` pairs.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(
        &self,
        a: f64,
        b: f64,
        mut f: F,
    ) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }

    pub fn try_integrate<E, F: FnMut(f64) -> Result<f64, E>>(
        &self,
        a: f64,
        b: f64,
        mut f: F,
    ) -> Result<f64, E> {
        let mut acc = 0.0;
        for (x, w) in self.mapped(a, b) {
            acc += w * f(x)?;
        }
        Ok(acc)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over `[r, ∞)` when `f(x) ~ C x^{-1-kappa}` at infinity.
///
/// Substitutes `x = r v^{-1/kappa}` so the integrand is bounded on `v ∈ (0, 1]`,
/// sums geometric panels `[16^{-k-1}, 16^{-k}]` until they stop contributing, then
/// closes with a single panel on `[0, 16^{-k}]` where the integrand is smooth.
pub fn power_tail<E, F>(rule: &GaussLegendre, r: f64, kappa: f64, mut f: F) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    debug_assert!(kappa > 0.0 && r > 0.0);
    let mut g = |v: f64| -> Result<f64, E> {
        let x = r * v.powf(-1.0 / kappa);
        Ok(f(x)? * (r / kappa) * v.powf(-1.0 / kappa - 1.0))
    };
    let mut total = 0.0;
    let mut hi = 1.0;
    let mut prev = f64::NAN;
    for k in 0..20 {
        let lo = hi / 16.0;
        let part = rule.try_integrate(lo, hi, &mut g)?;
        total += part;
        hi = lo;
        // A constant integrand in v shrinks panel by panel by exactly 16; once
        // that regime is reached the closing panel is accurate.
        let settled = k >= 2 && (16.0 * part - prev).abs() <= 1e-4 * prev.abs();
        if settled || (k >= 3 && part.abs() <= 1e-11 * total.abs()) {
            break;
        }
        prev = part;
    }
    total += rule.try_integrate(0.0, hi, &mut g)?;
    Ok(total)
}

/// Sum of `rule` over `n` equal panels of `[a, b]`.
pub fn panels<E, F>(rule: &GaussLegendre, a: f64, b: f64, n: usize, mut f: F) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    for k in 0..n {
        let lo = a + h * k as f64;
        total += rule.try_integrate(lo, lo + h, &mut f)?;
    }
    Ok(total)
}
