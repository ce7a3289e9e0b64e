//! Computational substrate: small dense complex matrices, branch-continued
//! determinant powers, Gaussian integrals, quadrature rules and
//! asymptotic-series fitting.
//!
//! Everything here is pure and deterministic; values are immutable after
//! construction and safe to share across threads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

/// Double-precision complex scalar used throughout the crate.
pub type C64 = Complex<f64>;

/// Relative symmetry tolerance for matrix inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not symmetric: |M - M^T| = {defect:.3e} exceeds {tol:.3e}")]
    NonSymmetric { defect: f64, tol: f64 },
    #[error("real part is not positive definite: smallest eigenvalue {min_eig:.3e}")]
    RealPartNotPositiveDefinite { min_eig: f64 },
    #[error("A is not positive definite: smallest eigenvalue {min_eig:.3e}")]
    ANotPositiveDefinite { min_eig: f64 },
    #[error("determinant passes within {0:.3e} of zero along the continuation path")]
    PathDegeneracy(f64),
    #[error("node count {0} is too small (need at least 2)")]
    BadNodeCount(usize),
    #[error("need at least {needed} samples for order-{order} fit, got {got}")]
    InsufficientSamples { needed: usize, got: usize, order: usize },
    #[error("fit design matrix is ill-conditioned: condition number {0:.3e}")]
    IllConditioned(f64),
    #[error("zero value in log-log exponent estimate at index {0}")]
    ZeroValue(usize),
    #[error("matrix dimensions {0}x{1} do not match expected {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, entries }
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = C64::new(1.0, 0.0);
        }
        Self { rows: n, cols: n, entries }
    }

    /// Build a square matrix from real and imaginary parts.
    pub fn from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Self {
        assert_eq!(re.shape(), im.shape());
        let (rows, cols) = re.shape();
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(C64::new(re[(i, j)], im[(i, j)]));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.cols + j]
    }

    pub fn real(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).re)
    }

    pub fn imag(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).im)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Checks `|M - M^T|_inf <= SYMMETRY_TOL * |M|_inf`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                defect = defect.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        defect
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), NumericsError> {
    let scale = m.amax().max(1e-300);
    let defect = (m - m.transpose()).amax();
    if defect > SYMMETRY_TOL * scale {
        return Err(NumericsError::NonSymmetric { defect, tol: SYMMETRY_TOL * scale });
    }
    Ok(())
}

/// Smallest eigenvalue of a real symmetric matrix.
fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn complex_det(m: &DMatrix<C64>) -> C64 {
    m.clone().lu().determinant()
}

/// `det^{-1/2}(A + iB)` with the branch continued along `t -> A + t i B`
/// from the positive real value at `t = 0`.
///
/// The path is subdivided adaptively until the determinant argument changes
/// by less than pi/2 per step, and the unwound phase is accumulated.
pub fn det_sqrt_continued(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<C64, NumericsError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(NumericsError::ShapeMismatch(b.nrows(), b.ncols(), n, n));
    }
    if n == 0 {
        // Empty matrix: det = 1 by convention (full-overlap degenerate case).
        return Ok(C64::new(1.0, 0.0));
    }
    check_symmetric(a)?;
    check_symmetric(b)?;
    let min_eig = min_symmetric_eigenvalue(a);
    let trace = a.trace().abs().max(1e-300);
    if min_eig <= 1e-10 * trace {
        return Err(NumericsError::ANotPositiveDefinite { min_eig });
    }

    let det_at = |t: f64| -> C64 {
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(a[(i, j)], t * b[(i, j)]));
        complex_det(&m)
    };

    // Walk t: 0 -> 1, halving the step whenever the principal argument jumps
    // by >= pi/2, and accumulate the continuous argument.
    let d0 = det_at(0.0);
    let mut arg_total = 0.0_f64;
    let mut prev = d0;
    let mut t = 0.0_f64;
    let mut dt = 1.0_f64;
    let mut guard = 0usize;
    while t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let d = det_at(t_next);
        if d.norm() < 1e-14 * d0.norm() {
            return Err(NumericsError::PathDegeneracy(d.norm()));
        }
        let delta = (d / prev).arg();
        if delta.abs() >= std::f64::consts::FRAC_PI_2 {
            dt /= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(NumericsError::PathDegeneracy(d.norm()));
            }
            continue;
        }
        arg_total += delta;
        prev = d;
        t = t_next;
        dt *= 1.5;
    }
    let modulus = prev.norm();
    Ok(C64::from_polar(modulus.powf(-0.5), -arg_total / 2.0))
}

/// Gaussian integral `int_{R^k} exp(-pi <Z, C Z>) dZ = det^{-1/2} C` for a
/// complex symmetric `C` with positive-definite real part; the square-root
/// branch comes from [`det_sqrt_continued`].
pub fn gaussian_integral_closed(c: &ComplexMatrix) -> Result<C64, NumericsError> {
    let scale = c.max_abs().max(1e-300);
    let defect = c.symmetry_defect();
    if defect > SYMMETRY_TOL * scale {
        return Err(NumericsError::NonSymmetric { defect, tol: SYMMETRY_TOL * scale });
    }
    let a = c.real();
    let b = c.imag();
    let min_eig = min_symmetric_eigenvalue(&a);
    let trace = a.trace().abs().max(1e-300);
    if min_eig <= 1e-10 * trace {
        return Err(NumericsError::RealPartNotPositiveDefinite { min_eig });
    }
    det_sqrt_continued(&a, &b)
}

/// Quadrature rule kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleKind {
    /// Panel-wise Gauss-Legendre.
    GaussLegendreComposite,
    /// Equispaced nodes with equal weights; spectrally accurate for smooth
    /// periodic integrands.
    PeriodicTrapezoid,
}

/// Nodes and positive weights on a finite interval.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn integrate_c(&self, mut f: impl FnMut(f64) -> C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += f(x) * w;
        }
        acc
    }
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const GL_PANEL_ORDER: usize = 16;

/// Builds a quadrature rule on `[a, b]` with at least `node_count` nodes.
///
/// Periodic-trapezoid places `node_count` equispaced nodes with equal
/// weights (the right endpoint is the left one by periodicity). The
/// composite Gauss-Legendre rule tiles the interval with 16-point panels.
pub fn build_rule(
    kind: RuleKind,
    interval: (f64, f64),
    node_count: usize,
) -> Result<QuadratureRule, NumericsError> {
    let (a, b) = interval;
    if node_count < 2 {
        return Err(NumericsError::BadNodeCount(node_count));
    }
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(NumericsError::BadNodeCount(node_count));
    }
    match kind {
        RuleKind::PeriodicTrapezoid => {
            let h = (b - a) / node_count as f64;
            let nodes = (0..node_count).map(|i| a + h * i as f64).collect();
            let weights = vec![h; node_count];
            Ok(QuadratureRule { nodes, weights, kind })
        }
        RuleKind::GaussLegendreComposite => {
            let panels = node_count.div_ceil(GL_PANEL_ORDER);
            let (xs, ws) = gauss_legendre(GL_PANEL_ORDER);
            let panel_len = (b - a) / panels as f64;
            let mut nodes = Vec::with_capacity(panels * GL_PANEL_ORDER);
            let mut weights = Vec::with_capacity(panels * GL_PANEL_ORDER);
            for p in 0..panels {
                let lo = a + panel_len * p as f64;
                let mid = lo + panel_len / 2.0;
                let half = panel_len / 2.0;
                for (&x, &w) in xs.iter().zip(&ws) {
                    nodes.push(mid + half * x);
                    weights.push(half * w);
                }
            }
            Ok(QuadratureRule { nodes, weights, kind })
        }
    }
}

/// Extracted asymptotic expansion `values[i] ~ p_i^exponent * sum_r b_r p_i^{-r}`.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticFit {
    pub exponent: f64,
    /// Coefficients b_0..b_k.
    pub coefficients: Vec<C64>,
    /// RMS misfit of `values[i] / p_i^exponent` against the fitted series.
    pub residual_norm: f64,
    pub p_values: Vec<u32>,
}

/// Least-squares fit of `values[i] / p_i^exponent` against `sum_{r<=k} b_r p_i^{-r}`.
pub fn fit_power_series(
    p_values: &[u32],
    values: &[C64],
    exponent: f64,
    k: usize,
) -> Result<AsymptoticFit, NumericsError> {
    let n = p_values.len();
    if n != values.len() || n < k + 2 {
        return Err(NumericsError::InsufficientSamples { needed: k + 2, got: n, order: k });
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(NumericsError::ZeroValue(0));
    }
    let design = DMatrix::from_fn(n, k + 1, |i, r| (p_values[i] as f64).powi(-(r as i32)));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > 1e12 {
        return Err(NumericsError::IllConditioned(cond));
    }
    let scaled: Vec<C64> = values
        .iter()
        .zip(p_values)
        .map(|(v, &p)| v / (p as f64).powf(exponent))
        .collect();
    let y_re = DVector::from_fn(n, |i, _| scaled[i].re);
    let y_im = DVector::from_fn(n, |i, _| scaled[i].im);
    let b_re = svd.solve(&y_re, 1e-14).expect("svd solve");
    let b_im = svd.solve(&y_im, 1e-14).expect("svd solve");
    let coefficients: Vec<C64> =
        (0..=k).map(|r| C64::new(b_re[r], b_im[r])).collect();
    let mut ss = 0.0;
    for i in 0..n {
        let mut fit = C64::new(0.0, 0.0);
        for (r, c) in coefficients.iter().enumerate() {
            fit += c * (p_values[i] as f64).powi(-(r as i32));
        }
        ss += (scaled[i] - fit).norm_sqr();
    }
    Ok(AsymptoticFit {
        exponent,
        coefficients,
        residual_norm: (ss / n as f64).sqrt(),
        p_values: p_values.to_vec(),
    })
}

/// Leading power: least-squares slope of `log |values|` against `log p`.
pub fn estimate_exponent(p_values: &[u32], values: &[C64]) -> Result<f64, NumericsError> {
    assert!(p_values.len() >= 3 && p_values.len() == values.len());
    let mut xs = Vec::with_capacity(p_values.len());
    let mut ys = Vec::with_capacity(p_values.len());
    for (i, (&p, v)) in p_values.iter().zip(values).enumerate() {
        let m = v.norm();
        if m <= 0.0 {
            return Err(NumericsError::ZeroValue(i));
        }
        xs.push((p as f64).ln());
        ys.push(m.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Integrates the scalar linear ODE `y' = a(t) y` from `t0` to `t1` with
/// fixed-step RK4. Used as the independent parallel-transport route.
pub fn integrate_linear_ode(
    a: impl Fn(f64) -> C64,
    t0: f64,
    t1: f64,
    steps: usize,
    y0: C64,
) -> C64 {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for i in 0..steps {
        // t from the index: accumulating t += h drifts over millions of steps.
        let t = t0 + h * i as f64;
        let k1 = a(t) * y;
        let k2 = a(t + h / 2.0) * (y + k1 * (h / 2.0));
        let k3 = a(t + h / 2.0) * (y + k2 * (h / 2.0));
        let k4 = a(t + h) * (y + k3 * h);
        y += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    }
    y
}

/// Fixed-tree pairwise sum; bit-reproducible regardless of how the inputs
/// were produced (workers only fill independent slots).
pub fn pairwise_sum(values: &[C64]) -> C64 {
    match values.len() {
        0 => C64::new(0.0, 0.0),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
