//! Relative Poincare series: curve states of closed geodesics and elliptic
//! circles evaluated as coset sums of unfolded kernel integrals, the Katok
//! closed form for hyperbolic generators, modularity residuals and Petersson
//! norms.
//!
//! Sums run over the T-orbits of cosets stored in the [`CosetTable`], each
//! orbit summed over all integer translates adaptively. A translate of the
//! evaluation point walks through the same orbit set, so the translation
//! residual is limited only by the adaptive tails, not by the word-length
//! truncation; the S-residual is the honest truncation probe.

use super::cosets::{CosetConvention, CosetTable, GroupElement};
use super::{
    geodesic_from_hyperbolic, hyperbolic_distance, j_factor, moebius_apply, Geodesic,
    HyperbolicError, MoebiusElement,
};
use crate::numerics::{build_rule, integrate_linear_ode, C64, RuleKind};

const PI: f64 = std::f64::consts::PI;
const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Tuning knobs for series evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RpsOptions {
    /// Multiplier on quadrature node densities.
    pub oversample: f64,
    /// Relative floor below which orbit/translate terms are dropped.
    pub term_floor: f64,
    /// Convergence gate: error out when the last word-length shell
    /// contributes more than this fraction of the partial sum.
    pub shell_gate: f64,
}

impl Default for RpsOptions {
    fn default() -> Self {
        Self { oversample: 1.0, term_floor: 1e-17, shell_gate: 1e-8 }
    }
}

/// Truncation bookkeeping attached to every series value.
#[derive(Debug, Clone)]
pub struct TruncationInfo {
    /// (word length, sum of |orbit totals|) per shell, in shell order.
    pub shell_sums: Vec<(u32, f64)>,
    /// Empirical geometric ratio of the last shells.
    pub shell_ratio: f64,
    /// Last shell times ratio/(1-ratio), plus adaptive-tail allowances.
    pub estimate: f64,
    /// |last shell| / |value|.
    pub last_shell_fraction: f64,
}

impl TruncationInfo {
    fn from_shells(shells: Vec<(u32, f64)>, tail: f64, value_abs: f64) -> Self {
        let n = shells.len();
        let (ratio, estimate) = if n >= 2 && shells[n - 2].1 > 0.0 {
            let r = (shells[n - 1].1 / shells[n - 2].1).clamp(0.02, 0.95);
            (r, shells[n - 1].1 * r / (1.0 - r) + tail)
        } else if n == 1 {
            (0.5, shells[0].1 * 1e-6 + tail)
        } else {
            (0.0, tail)
        };
        let last_shell_fraction = if value_abs > 0.0 && n > 0 {
            shells[n - 1].1 / value_abs
        } else {
            0.0
        };
        Self { shell_sums: shells, shell_ratio: ratio, estimate, last_shell_fraction }
    }
}

/// `(-1)^p 2^{2p-2} (2p-1) / pi`, the kernel prefactor of weight 2p.
fn kernel_prefactor(p: u32) -> f64 {
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    sign * 2.0_f64.powi(2 * p as i32 - 2) * (2.0 * p as f64 - 1.0) / PI
}

/// Integer power by exp-log; exact branch for integer exponents.
fn powi_c(base: C64, n: i32) -> C64 {
    if base.norm_sqr() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    (base.ln() * n as f64).exp()
}

/// Hyperbolic circle around a point of H, carrying the level-p flat section
/// of K^p sampled on its quadrature nodes.
#[derive(Debug, Clone)]
pub struct EllipticCircle {
    pub center: C64,
    pub rho: f64,
    pub p: u32,
    /// Euclidean realization: center and radius of the circle in C.
    pub euclid_center: C64,
    pub euclid_radius: f64,
    /// Angle nodes and arclength weights (trapezoid weight times speed).
    pub phi_nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub points: Vec<C64>,
    /// K^p section coefficients at the nodes, |f| y^p = 1.
    pub section: Vec<C64>,
    pub holonomy_residual: f64,
}

/// Builds the level-p flat circle of hyperbolic radius rho around `center`;
/// admissible when the K^p holonomy `exp(i p Area)` is trivial, i.e.
/// `p (cosh(rho) - 1)` is an integer.
pub fn elliptic_circle(
    center: C64,
    rho: f64,
    p: u32,
    oversample: f64,
) -> Result<EllipticCircle, HyperbolicError> {
    if center.im <= 0.0 {
        return Err(HyperbolicError::NotInUpperHalfPlane(center.im));
    }
    let euclid_center = C64::new(center.re, center.im * rho.cosh());
    let euclid_radius = center.im * rho.sinh();

    let count = ((24.0 * (p as f64).sqrt() * TAU * rho.sinh().max(0.3) * oversample).ceil()
        as usize)
        .max(96);
    let rule = build_rule(RuleKind::PeriodicTrapezoid, (0.0, TAU), count).expect("rule");

    let pos = |phi: f64| euclid_center + C64::from_polar(euclid_radius, phi);
    let vel = |phi: f64| C64::from_polar(euclid_radius, phi) * C64::new(0.0, 1.0);

    // Level-p parallel transport f' = p (i gamma'(phi) / y) f from
    // f(0) = 1/y(0)^p, stepping node to node.
    let coeff = |phi: f64| {
        let z = pos(phi);
        C64::new(0.0, p as f64) * vel(phi) / z.im
    };
    let mut section = Vec::with_capacity(count);
    let mut f = C64::new(pos(0.0).im.powi(-(p as i32)), 0.0);
    let steps_per_seg = (64.0 * oversample).ceil() as usize;
    for i in 0..count {
        section.push(f);
        let a = rule.nodes[i];
        let b = if i + 1 == count { TAU } else { rule.nodes[i + 1] };
        f = integrate_linear_ode(coeff, a, b, steps_per_seg.max(16), f);
    }
    let f0 = section[0];
    let residual = (f - f0).norm() / f0.norm();
    if residual > 1e-8 {
        return Err(HyperbolicError::NotBohrSommerfeldAtLevelP(residual));
    }
    // Unit pointwise norm |f| y^p = 1 is preserved by the Hermitian connection.
    for (i, s) in section.iter().enumerate() {
        let y = pos(rule.nodes[i]).im;
        debug_assert!((s.norm() * y.powi(p as i32) - 1.0).abs() < 1e-6);
    }

    let mut weights = Vec::with_capacity(count);
    let mut points = Vec::with_capacity(count);
    for (&phi, &w) in rule.nodes.iter().zip(&rule.weights) {
        let z = pos(phi);
        weights.push(w * vel(phi).norm() / z.im); // hyperbolic speed
        points.push(z);
    }
    Ok(EllipticCircle {
        center,
        rho,
        p,
        euclid_center,
        euclid_radius,
        phi_nodes: rule.nodes,
        weights,
        points,
        section,
        holonomy_residual: residual,
    })
}

/// What a cusp-form evaluator sums.
#[derive(Debug, Clone)]
pub enum SeriesKind {
    /// Unfolded curve state of a closed geodesic (quadrature form).
    GeodesicState(Geodesic),
    /// Curve state of an admissible circle around an elliptic fixed point.
    EllipticState { circle: EllipticCircle, payload: Vec<C64> },
    /// Katok closed form attached to the hyperbolic generator.
    KatokForm,
}

/// Weight-2p truncated series with its coset table and truncation estimate.
#[derive(Debug, Clone)]
pub struct CuspFormEvaluator {
    pub weight: u32,
    pub kind: SeriesKind,
    pub table: CosetTable,
    pub opts: RpsOptions,
    pub truncation_error_estimate: f64,
}

impl CuspFormEvaluator {
    pub fn p(&self) -> u32 {
        self.weight / 2
    }

    pub fn eval(&self, z: C64) -> Result<C64, HyperbolicError> {
        Ok(self.eval_detailed(z)?.0)
    }

    pub fn eval_detailed(&self, z: C64) -> Result<(C64, TruncationInfo), HyperbolicError> {
        if z.im <= 0.0 {
            return Err(HyperbolicError::NotInUpperHalfPlane(z.im));
        }
        let p = self.p();
        match &self.kind {
            SeriesKind::GeodesicState(geo) => {
                Ok(eval_orbit_series(z, &self.table, self.opts, |g, zz, floor_log| {
                    geodesic_term(p, zz, g, geo, floor_log, self.opts.oversample)
                }))
            }
            SeriesKind::EllipticState { circle, payload } => {
                Ok(eval_orbit_series(z, &self.table, self.opts, |g, zz, floor_log| {
                    elliptic_term(p, zz, g, circle, payload, floor_log)
                }))
            }
            SeriesKind::KatokForm => {
                let g0 = self.table.generator();
                Ok(eval_katok(z, p, g0, &self.table, self.opts))
            }
        }
    }
}

/// Evaluation point recentered per orbit: `term(T^m g, z) = term(g, z - m)`.
fn eval_orbit_series(
    z: C64,
    table: &CosetTable,
    opts: RpsOptions,
    term: impl Fn(&MoebiusElement, C64, f64) -> C64,
) -> (C64, TruncationInfo) {
    let mut total = C64::new(0.0, 0.0);
    let mut shells: Vec<(u32, f64)> = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut tail: f64 = 0.0;

    for orbit in table.orbits() {
        let g = orbit.rep.to_moebius();
        // Center the translate scan where the orbit's image can be closest.
        let m_center = {
            let probe = moebius_apply(&g, C64::new(0.0, 1.0)).map(|w| w.re).unwrap_or(0.0);
            (z.re - probe).round() as i64
        };
        let floor = opts.term_floor * max_abs;
        let floor_log = if floor > 0.0 { floor.ln() } else { f64::NEG_INFINITY };
        let mut orbit_sum = C64::new(0.0, 0.0);
        let mut last = f64::INFINITY;
        for dir in [1i64, -1] {
            let mut misses = 0u32;
            let mut m = if dir == 1 { m_center } else { m_center - 1 };
            let mut steps = 0u32;
            while steps < 4000 {
                let t = term(&g, z - m as f64, floor_log);
                orbit_sum += t;
                last = t.norm();
                if last <= floor.max(1e-300) {
                    misses += 1;
                    if misses >= 2 {
                        break;
                    }
                } else {
                    misses = 0;
                }
                m += dir;
                steps += 1;
            }
            // Power-law tail allowance for the translate sum.
            tail += last * 0.5;
        }
        max_abs = max_abs.max(orbit_sum.norm());
        total += orbit_sum;
        match shells.last_mut() {
            Some((wl, acc)) if *wl == orbit.word_length => *acc += orbit_sum.norm(),
            _ => shells.push((orbit.word_length, orbit_sum.norm())),
        }
    }

    let scale = kernel_prefactor_abs_for(table) * table.convention().multiplicity();
    total *= scale;
    for s in shells.iter_mut() {
        s.1 *= scale.abs();
    }
    tail *= scale.abs();
    let info = TruncationInfo::from_shells(shells, tail, total.norm());
    (total, info)
}

/// Weight is carried by the terms for the Katok form, but the state forms
/// share the kernel prefactor; stored per table via its generator weight.
/// (The prefactor is reapplied by the term closures' caller.)
fn kernel_prefactor_abs_for(_table: &CosetTable) -> f64 {
    1.0
}

/// Unfolded kernel integral of one coset for a geodesic state:
/// `int (z - conj(g.gamma(t)))^{-2p} (c(t) j(g,gamma(t))^2 Im(g.gamma(t))^2)^p dt`
/// over the adaptive window around the closest approach, times the kernel
/// prefactor.
fn geodesic_term(p: u32, z: C64, g: &MoebiusElement, geo: &Geodesic, floor_log: f64, oversample: f64) -> C64 {
    let pf = p as f64;
    let w_of = |t: f64| {
        let gz = geo.position(t);
        (moebius_apply(g, gz).expect("axis in H"), gz)
    };
    // Closest approach along the axis: golden-section on the convex
    // distance-to-point function, bracketed by expansion.
    let dist = |t: f64| {
        let (w, _) = w_of(t);
        hyperbolic_distance(z, w)
    };
    let mut a = -2.0;
    let mut b = 2.0;
    while dist(a) < dist(a + 0.5) && a > -60.0 {
        a -= 1.5;
    }
    while dist(b) < dist(b - 0.5) && b < 60.0 {
        b += 1.5;
    }
    let (mut lo, mut hi) = (a, b);
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = dist(x1);
    let mut f2 = dist(x2);
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = dist(x2);
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let t_star = 0.5 * (lo + hi);
    let d_star = dist(t_star);

    // Peak envelope (4 y_z)^{-p} sech^{2p}(d*/2); skip negligible terms.
    let log_peak = -pf * (4.0 * z.im).ln() - 2.0 * pf * (d_star / 2.0).cosh().ln();
    let prefactor = kernel_prefactor(p);
    if log_peak + prefactor.abs().ln() + 3.0 < floor_log {
        return C64::new(0.0, 0.0);
    }

    let half_width = 2.0 * d_star.abs() + 44.0 / pf + 1.0;
    let count =
        ((2.0 * half_width * (16.0_f64).max(3.5 * pf) * oversample).ceil() as usize).max(32);
    let rule = build_rule(
        RuleKind::GaussLegendreComposite,
        (t_star - half_width, t_star + half_width),
        count,
    )
    .expect("rule");

    let mut acc = C64::new(0.0, 0.0);
    for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let (w, gz) = w_of(t);
        let section = geo.velocity(t).conj() / (gz.im * gz.im);
        let j = j_factor(g, gz);
        let base = section * j * j * (w.im * w.im);
        let log_term = (z - w.conj()).ln() * (-2.0 * pf) + base.ln() * pf;
        acc += log_term.exp() * wt;
    }
    acc * prefactor
}

/// Full-circle integral of one coset for an elliptic-circle state.
fn elliptic_term(
    p: u32,
    z: C64,
    g: &MoebiusElement,
    circle: &EllipticCircle,
    payload: &[C64],
    floor_log: f64,
) -> C64 {
    let pf = p as f64;
    let prefactor = kernel_prefactor(p);
    // Envelope from the closest node.
    let mut d_min = f64::INFINITY;
    for w in circle.points.iter().step_by(8) {
        let gw = moebius_apply(g, *w).expect("in H");
        d_min = d_min.min(hyperbolic_distance(z, gw));
    }
    let log_peak = -pf * (4.0 * z.im).ln() - 2.0 * pf * (d_min / 2.0).cosh().ln();
    if log_peak + prefactor.abs().ln() + 3.0 < floor_log {
        return C64::new(0.0, 0.0);
    }

    let mut acc = C64::new(0.0, 0.0);
    for i in 0..circle.points.len() {
        let gz = circle.points[i];
        let w = moebius_apply(g, gz).expect("in H");
        let j = j_factor(g, gz);
        let jy = j * j * (w.im * w.im);
        let log_term = (z - w.conj()).ln() * (-2.0 * pf) + jy.ln() * pf;
        acc += log_term.exp() * circle.section[i] * payload[i] * circle.weights[i];
    }
    acc * prefactor
}

/// Katok closed form: `sum_{Gamma_0 h} j(h,z)^{-2p} Q(h.z)^{-p}` with
/// `Q(w) = c w^2 + (d - a) w - b` from the generator; left classes are the
/// inverses of the stored right-coset orbit representatives, translated by
/// `tau(h T^m, z) = tau(h, z + m)`.
fn eval_katok(
    z: C64,
    p: u32,
    g0: GroupElement,
    table: &CosetTable,
    opts: RpsOptions,
) -> (C64, TruncationInfo) {
    let pf = p as f64;
    let (qa, qb, qc) =
        (g0.c as f64, (g0.d - g0.a) as f64, -(g0.b as f64));
    let q_center = (g0.a - g0.d) as f64 / (2.0 * g0.c as f64);
    let tau = |h: &MoebiusElement, zz: C64| -> C64 {
        let hz = moebius_apply(h, zz).expect("in H");
        let j = j_factor(h, zz);
        let q = hz * hz * qa + hz * qb + qc;
        (j.ln() * (-2.0 * pf) - q.ln() * pf).exp()
    };

    let mut total = C64::new(0.0, 0.0);
    let mut shells: Vec<(u32, f64)> = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for orbit in table.orbits() {
        let h = orbit.rep.inverse().to_moebius();
        let m_center = if h.c.abs() > 0.5 {
            (-h.d / h.c - z.re).round() as i64
        } else {
            (q_center - z.re - h.a * h.b).round() as i64
        };
        let floor = opts.term_floor * max_abs;
        let mut orbit_sum = C64::new(0.0, 0.0);
        let mut last = f64::INFINITY;
        for dir in [1i64, -1] {
            let mut misses = 0u32;
            let mut m = if dir == 1 { m_center } else { m_center - 1 };
            let mut steps = 0u32;
            while steps < 4000 {
                let t = tau(&h, z + m as f64);
                orbit_sum += t;
                last = t.norm();
                if last <= floor.max(1e-300) {
                    misses += 1;
                    if misses >= 2 {
                        break;
                    }
                } else {
                    misses = 0;
                }
                m += dir;
                steps += 1;
            }
            tail += last * 0.5;
        }
        max_abs = max_abs.max(orbit_sum.norm());
        total += orbit_sum;
        match shells.last_mut() {
            Some((wl, acc)) if *wl == orbit.word_length => *acc += orbit_sum.norm(),
            _ => shells.push((orbit.word_length, orbit_sum.norm())),
        }
    }
    let mult = table.convention().multiplicity();
    total *= mult;
    for s in shells.iter_mut() {
        s.1 *= mult;
    }
    let info = TruncationInfo::from_shells(shells, tail * mult, total.norm());
    (total, info)
}

/// Both truncated forms of the relative Poincare series of a closed
/// geodesic, with their numerically determined proportionality constant.
#[derive(Debug, Clone)]
pub struct RpsValue {
    pub quadrature: C64,
    pub katok: C64,
    /// quadrature / katok; z-independent for a converged truncation.
    pub ratio: C64,
    pub truncation: TruncationInfo,
    pub katok_truncation: TruncationInfo,
}

/// Geodesic-state evaluator for a hyperbolic generator at weight 2p.
pub fn hyperbolic_geodesic_state(
    g0: &MoebiusElement,
    p: u32,
    max_word_length: u32,
    convention: CosetConvention,
    opts: RpsOptions,
) -> Result<CuspFormEvaluator, HyperbolicError> {
    if 2 * p < 4 {
        return Err(HyperbolicError::WeightTooSmall(2 * p));
    }
    let table = super::cosets::coset_reps(g0, max_word_length, convention)?;
    let geo = geodesic_from_hyperbolic(g0)?;
    // Flatness certificate for the conormal section.
    let _ = super::geodesic_section(&geo)?;
    let mut ev = CuspFormEvaluator {
        weight: 2 * p,
        kind: SeriesKind::GeodesicState(geo),
        table,
        opts,
        truncation_error_estimate: 0.0,
    };
    let mut est: f64 = 0.0;
    for z in [C64::new(0.1, 1.1), C64::new(-0.35, 0.8)] {
        let (_, info) = ev.eval_detailed(z)?;
        est = est.max(info.estimate);
    }
    ev.truncation_error_estimate = est;
    Ok(ev)
}

/// Evaluates both forms at a point and certifies shell convergence.
pub fn relative_poincare_series(
    p: u32,
    g0: &MoebiusElement,
    z: C64,
    table: &CosetTable,
    opts: RpsOptions,
) -> Result<RpsValue, HyperbolicError> {
    if 2 * p < 4 {
        return Err(HyperbolicError::WeightTooSmall(2 * p));
    }
    let geo = geodesic_from_hyperbolic(g0)?;
    let (quad, truncation) = eval_orbit_series(z, table, opts, |g, zz, floor_log| {
        geodesic_term(p, zz, g, &geo, floor_log, opts.oversample)
    });
    if truncation.last_shell_fraction > opts.shell_gate {
        return Err(HyperbolicError::TruncationNotConverged(
            truncation.last_shell_fraction,
        ));
    }
    let (katok, katok_truncation) = eval_katok(z, p, table.generator(), table, opts);
    let ratio = quad / katok;
    Ok(RpsValue { quadrature: quad, katok, ratio, truncation, katok_truncation })
}

/// Coset sum of the closed-circle quadrature around an elliptic fixed point.
///
/// Beyond the holonomy gate in [`elliptic_circle`], the series is only
/// well-defined when the transported section is equivariant under the
/// elliptic generator; this is checked termwise and rejected otherwise.
pub fn elliptic_series(
    p: u32,
    circle: &EllipticCircle,
    z: C64,
    table: &CosetTable,
    payload: impl Fn(f64) -> C64,
    opts: RpsOptions,
) -> Result<(C64, TruncationInfo), HyperbolicError> {
    if 2 * p < 4 {
        return Err(HyperbolicError::WeightTooSmall(2 * p));
    }
    if z.im <= 0.0 {
        return Err(HyperbolicError::NotInUpperHalfPlane(z.im));
    }
    let pay: Vec<C64> = circle.phi_nodes.iter().map(|&t| payload(t)).collect();

    // Coset-independence probe: the identity term must be invariant under
    // redecorating the representative by the elliptic generator.
    let id = MoebiusElement::identity();
    let gg0 = table.generator().to_moebius();
    let probe_z = C64::new(0.37, 1.3);
    let t_id = elliptic_term(p, probe_z, &id, circle, &pay, f64::NEG_INFINITY);
    let t_dec = elliptic_term(p, probe_z, &gg0, circle, &pay, f64::NEG_INFINITY);
    let scale = t_id.norm().max(t_dec.norm());
    if scale > 1e-280 {
        let defect = (t_id - t_dec).norm() / scale;
        if defect > 1e-6 {
            return Err(HyperbolicError::NotBohrSommerfeldAtLevelP(defect));
        }
    }

    Ok(eval_orbit_series(z, table, opts, |g, zz, floor_log| {
        elliptic_term(p, zz, g, circle, &pay, floor_log)
    }))
}

/// `|s(gz) - j(g,z)^{2p} s(z)| / (|s(z)| + eps)`.
pub fn modularity_residual(
    ev: &CuspFormEvaluator,
    g: &MoebiusElement,
    z: C64,
) -> Result<f64, HyperbolicError> {
    let gz = moebius_apply(g, z)?;
    let lhs = ev.eval(gz)?;
    let j = j_factor(g, z);
    let rhs = powi_c(j, 2 * ev.p() as i32) * ev.eval(z)?;
    Ok((lhs - rhs).norm() / (rhs.norm() + 1e-280))
}

/// Petersson norm `int_F |f|^2 y^{2p-2} dx dy` over the standard fundamental
/// domain truncated at `y_max`, by tensor quadrature (trapezoid in x, panel
/// Gauss-Legendre in log y). Returns the refined value; errors out when grid
/// doubling moves it by more than 1e-4 relative.
pub fn petersson_norm(
    ev: &CuspFormEvaluator,
    y_max: f64,
    grid_x: usize,
) -> Result<f64, HyperbolicError> {
    assert!(y_max >= 10.0, "y_max below the fundamental-domain default");
    let p = ev.p();
    let value_at = |nx: usize| -> Result<f64, HyperbolicError> {
        let rx = build_rule(RuleKind::PeriodicTrapezoid, (-0.5, 0.5), nx).expect("rule");
        let mut acc = 0.0;
        for (&x, &wx) in rx.nodes.iter().zip(&rx.weights) {
            let y_low = (1.0 - x * x).max(1e-12).sqrt();
            let ry = build_rule(
                RuleKind::GaussLegendreComposite,
                (y_low.ln(), y_max.ln()),
                (nx * 3 / 2).max(48),
            )
            .expect("rule");
            for (&s, &wy) in ry.nodes.iter().zip(&ry.weights) {
                let y = s.exp();
                let f = ev.eval(C64::new(x, y))?;
                acc += wx * wy * f.norm_sqr() * y.powi(2 * p as i32 - 1);
            }
        }
        Ok(acc)
    };
    let coarse = value_at(grid_x)?;
    let fine = value_at(2 * grid_x)?;
    let delta = (fine - coarse).abs() / fine.abs().max(1e-300);
    if delta > 1e-4 {
        return Err(HyperbolicError::GridTooCoarse(delta));
    }
    Ok(fine)
}

/// Squared norm of a curve state via the reproducing route:
/// `int_0^l <s(gamma(t)), zeta^p(t)> dt` with the pairing antilinear in the
/// first slot. Returns (value, doubling delta).
pub fn state_curve_norm_sq(ev: &CuspFormEvaluator) -> Result<(f64, f64), HyperbolicError> {
    let SeriesKind::GeodesicState(geo) = &ev.kind else {
        panic!("curve norm is defined for geodesic states");
    };
    let p = ev.p();
    let pf = p as f64;
    let l = geo.translation_length;
    let value_at = |count: usize| -> Result<C64, HyperbolicError> {
        let rule = build_rule(RuleKind::PeriodicTrapezoid, (0.0, l), count).expect("rule");
        let mut acc = C64::new(0.0, 0.0);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let z = geo.position(t);
            let f = ev.eval(z)?;
            let section = geo.velocity(t).conj() / (z.im * z.im);
            let pairing = (section * z.im * z.im).ln() * pf; // (c y^2)^p
            acc += f.conj() * pairing.exp() * w;
        }
        Ok(acc)
    };
    let base = ((8.0 * pf * l * ev.opts.oversample).ceil() as usize).max(64);
    let coarse = value_at(base)?;
    let fine = value_at(2 * base)?;
    let delta = (fine - coarse).norm() / fine.norm().max(1e-300);
    debug_assert!(fine.im.abs() <= 1e-6 * fine.re.abs().max(1e-300));
    Ok((fine.re, delta))
}
