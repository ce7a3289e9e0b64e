//! The flat model geometry X = C (= R^2 with the standard symplectic form
//! and g = g_omega): exact Bergman kernel, Bohr-Sommerfeld circles, curve
//! states built by quadrature, inner products, Toeplitz matrix elements and
//! circle intersections.
//!
//! The line bundle is trivialized in the radial gauge in which the flat
//! kernel is `p exp(-(pi p/2)|Z-Z'|^2 - i pi p Omega(Z,Z'))`; the matching
//! connection form is `-i pi p (u dv - v du)`, so parallel transport along a
//! curve multiplies by `exp(i pi p int (u v' - v u') dt)` and the holonomy of
//! a closed curve is `exp(2 pi i p Area)`.
//!
//! Hermitian pairings are antilinear in the first argument throughout.

use crate::numerics::{
    build_rule, integrate_linear_ode, pairwise_sum, C64, RuleKind,
};
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

const PI: f64 = std::f64::consts::PI;
const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error, PartialEq)]
pub enum BargmannError {
    #[error("curve is not closed: |position(t+T) - position(t)| = {0:.3e}")]
    OpenCurve(f64),
    #[error("curve is not an immersion: |velocity| = {0:.3e} at t = {1}")]
    NotImmersed(f64, f64),
    #[error("not Bohr-Sommerfeld at level p: holonomy residual {0:.3e}")]
    NotBohrSommerfeldAtLevelP(f64),
    #[error("states live on different geometries")]
    GeometryMismatch,
    #[error("states have different tensor powers: {0} vs {1}")]
    PowerMismatch(u32, u32),
    #[error("circles are tangent or degenerate (separation {0:.3e})")]
    TangentCircles(f64),
    #[error("kernel mass outside quadrature domain estimated at {0:.3e}")]
    DomainTooSmall(f64),
}

/// Geometry tag carried by states; bundles which closed-form kernel,
/// connection and metric data apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelModel {
    Bargmann,
    Hyperbolic,
    ModularQuotient,
}

impl KernelModel {
    /// det(R_dot^L / 2 pi); both model geometries have g = g_omega.
    pub fn det_rl_over_2pi(&self) -> f64 {
        1.0
    }
}

/// Exact flat-model Bergman kernel `p P(sqrt(p) Z, sqrt(p) Z')` for n = 1.
pub fn bargmann_kernel(p: u32, z: [f64; 2], zp: [f64; 2]) -> C64 {
    let pf = p as f64;
    let du = z[0] - zp[0];
    let dv = z[1] - zp[1];
    let om = z[0] * zp[1] - z[1] * zp[0];
    C64::new(-0.5 * PI * pf * (du * du + dv * dv), -PI * pf * om).exp() * pf
}

type CurveMap = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;

/// Closed parametrized curve in R^2.
#[derive(Clone)]
pub struct ParametrizedCurve {
    pub period: f64,
    position: CurveMap,
    velocity: CurveMap,
    pub arclength: bool,
}

impl std::fmt::Debug for ParametrizedCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametrizedCurve")
            .field("period", &self.period)
            .field("arclength", &self.arclength)
            .finish()
    }
}

impl ParametrizedCurve {
    /// Checks closure `position(t + T) = position(t)` on a sample of
    /// parameters; immersion is checked separately where it is required.
    pub fn new(
        period: f64,
        position: CurveMap,
        velocity: CurveMap,
        arclength: bool,
    ) -> Result<Self, BargmannError> {
        let curve = Self { period, position, velocity, arclength };
        let mut worst: f64 = 0.0;
        for i in 0..8 {
            let t = period * i as f64 / 8.0;
            let a = curve.position(t);
            let b = curve.position(t + period);
            worst = worst.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
        if worst > 1e-12 {
            return Err(BargmannError::OpenCurve(worst));
        }
        if curve.arclength {
            for i in 0..16 {
                let t = period * i as f64 / 16.0;
                let v = curve.velocity(t);
                let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if (speed - 1.0).abs() > 1e-10 {
                    return Err(BargmannError::NotImmersed(speed, t));
                }
            }
        }
        Ok(curve)
    }

    /// Circle of given center and radius, angle-parametrized with period 2 pi.
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        let c = center;
        Self {
            period: TAU,
            position: Arc::new(move |t| [c[0] + radius * t.cos(), c[1] + radius * t.sin()]),
            velocity: Arc::new(move |t| [-radius * t.sin(), radius * t.cos()]),
            arclength: false,
        }
    }

    /// Degenerate point curve (zero area; used as a holonomy edge case).
    pub fn point(center: [f64; 2]) -> Self {
        Self {
            period: TAU,
            position: Arc::new(move |_| center),
            velocity: Arc::new(move |_| [0.0, 0.0]),
            arclength: false,
        }
    }

    pub fn position(&self, t: f64) -> [f64; 2] {
        (self.position)(t)
    }

    pub fn velocity(&self, t: f64) -> [f64; 2] {
        (self.velocity)(t)
    }

    pub fn speed(&self, t: f64) -> f64 {
        let v = self.velocity(t);
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }

    /// Euclidean length by spectral quadrature.
    pub fn length(&self, nodes: usize) -> f64 {
        let rule = build_rule(RuleKind::PeriodicTrapezoid, (0.0, self.period), nodes.max(64))
            .expect("valid rule");
        rule.integrate(|t| self.speed(t))
    }
}

/// Signed symplectic area `(1/2) oint (u dv - v du)` by periodic-trapezoid
/// quadrature (spectrally exact for smooth closed curves).
pub fn signed_area(curve: &ParametrizedCurve, nodes: usize) -> f64 {
    let rule = build_rule(RuleKind::PeriodicTrapezoid, (0.0, curve.period), nodes.max(64))
        .expect("valid rule");
    0.5 * rule.integrate(|t| {
        let z = curve.position(t);
        let v = curve.velocity(t);
        z[0] * v[1] - z[1] * v[0]
    })
}

/// Parallel-transport factor of L^p around a closed curve, computed both by
/// the signed-area route `exp(2 pi i p Area)` and by RK4 integration of the
/// connection ODE `f' = i pi p (u v' - v u') f`; the two must agree to 1e-8.
pub fn holonomy(curve: &ParametrizedCurve, p: u32) -> Result<C64, BargmannError> {
    let area = signed_area(curve, 256);
    let shoelace = C64::from_polar(1.0, TAU * p as f64 * area);

    let pf = p as f64;
    let rate_bound = (0..64)
        .map(|i| {
            let t = curve.period * i as f64 / 64.0;
            let z = curve.position(t);
            let v = curve.velocity(t);
            (z[0] * v[1] - z[1] * v[0]).abs()
        })
        .fold(0.0, f64::max);
    let phase_total = PI * pf * rate_bound * curve.period + 1.0;
    // RK4 phase error ~ Phi^5 / (120 N^4); start from the Phi^{5/4} scaling
    // that keeps it near 1e-9 and double until two runs agree.
    let mut steps = ((55.0 * phase_total.powf(1.25)) as usize).clamp(4096, 16_000_000);
    let run = |steps: usize| {
        integrate_linear_ode(
            |t| {
                let z = curve.position(t);
                let v = curve.velocity(t);
                C64::new(0.0, PI * pf * (z[0] * v[1] - z[1] * v[0]))
            },
            0.0,
            curve.period,
            steps,
            C64::new(1.0, 0.0),
        )
    };
    let mut ode = run(steps);
    for _ in 0..4 {
        let refined = run(steps * 2);
        let delta = (refined - ode).norm();
        ode = refined;
        steps *= 2;
        if delta < 1e-9 {
            break;
        }
    }
    let gap = (ode - shoelace).norm();
    assert!(
        gap < 1e-8,
        "transport routes disagree: ode {ode} vs shoelace {shoelace} (gap {gap:.3e})"
    );
    Ok(ode)
}

/// Closed curve together with its level-p flat unit section samples.
#[derive(Debug, Clone)]
pub struct BohrSommerfeldCurve {
    pub curve: ParametrizedCurve,
    pub p: u32,
    pub node_params: Vec<f64>,
    pub section_values: Vec<C64>,
    pub holonomy_residual: f64,
    circle: Option<CircleSpec>,
}

impl BohrSommerfeldCurve {
    /// Flat section value at an arbitrary parameter (closed-form transport
    /// from t = 0 with zeta(0) = 1; exact for circles).
    pub fn section_value(&self, t: f64) -> C64 {
        match self.circle {
            Some(c) => circle_section(c, self.p, t),
            None => {
                let pf = self.p as f64;
                integrate_linear_ode(
                    |s| {
                        let z = self.curve.position(s);
                        let v = self.curve.velocity(s);
                        C64::new(0.0, PI * pf * (z[0] * v[1] - z[1] * v[0]))
                    },
                    0.0,
                    t,
                    ((64.0 * TAU * pf * t.abs()) as usize).clamp(4096, 4_000_000),
                    C64::new(1.0, 0.0),
                )
            }
        }
    }
}

/// Circle description used by intersection plumbing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Transport phase along the angle-parametrized circle:
/// `int_0^theta (u v' - v u') = r^2 theta + a r sin(theta) + b r (1 - cos(theta))`.
fn circle_section(c: CircleSpec, p: u32, theta: f64) -> C64 {
    let [a, b] = c.center;
    let r = c.radius;
    let integral = r * r * theta + a * r * theta.sin() + b * r * (1.0 - theta.cos());
    C64::from_polar(1.0, PI * p as f64 * integral)
}

/// Quadrature-backed quantum state attached to a curve: evaluation is the
/// weighted kernel sum over the stored nodes and is linear in the payload.
#[derive(Debug, Clone)]
pub struct StateEvaluator {
    pub p: u32,
    pub geometry: KernelModel,
    pub nodes: Vec<[f64; 2]>,
    /// Quadrature weights times |velocity| (the curve measure).
    pub weights: Vec<f64>,
    /// `zeta^p(t) f(t)` at the nodes.
    pub payload: Vec<C64>,
    support_hint: Option<CircleSpec>,
}

impl StateEvaluator {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Replaces the payload (linearity makes this the cheap way to reuse a
    /// node layout for several symbols f).
    pub fn with_payload(&self, payload: Vec<C64>) -> Self {
        assert_eq!(payload.len(), self.nodes.len());
        Self { payload, ..self.clone() }
    }
}

/// Node count for a curve state: 16 nodes per kernel correlation length
/// 1/sqrt(p), floored at 64.
pub fn state_node_count(p: u32, length: f64, oversample: f64) -> usize {
    let n = (16.0 * (p as f64).sqrt() * length * oversample).ceil() as usize;
    n.max(64)
}

/// Builds the Bohr-Sommerfeld circle state at level p.
///
/// Admissibility requires `p * pi * r^2` within 1e-8 of an integer; section
/// values are transported from `zeta(0) = 1` and the holonomy is recomputed
/// by the ODE route as the flatness certificate.
pub fn make_bs_circle(
    center: [f64; 2],
    radius: f64,
    p: u32,
    f: impl Fn(f64) -> C64,
    oversample: f64,
) -> Result<(BohrSommerfeldCurve, StateEvaluator), BargmannError> {
    let area = PI * radius * radius;
    let quantum = p as f64 * area;
    let defect = (quantum - quantum.round()).abs();
    if defect > 1e-8 {
        return Err(BargmannError::NotBohrSommerfeldAtLevelP(defect));
    }
    let curve = ParametrizedCurve::circle(center, radius);
    let hol = holonomy(&curve, p)?;
    let residual = (hol - C64::new(1.0, 0.0)).norm();
    if residual > 1e-8 {
        return Err(BargmannError::NotBohrSommerfeldAtLevelP(residual));
    }

    let spec = CircleSpec { center, radius };
    let count = state_node_count(p, TAU * radius, oversample);
    let rule = build_rule(RuleKind::PeriodicTrapezoid, (0.0, TAU), count).expect("valid rule");
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut payload = Vec::with_capacity(count);
    let mut section_values = Vec::with_capacity(count);
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let zeta = circle_section(spec, p, t);
        nodes.push(curve.position(t));
        weights.push(w * curve.speed(t));
        payload.push(zeta * f(t));
        section_values.push(zeta);
    }
    let bs = BohrSommerfeldCurve {
        curve,
        p,
        node_params: rule.nodes,
        section_values,
        holonomy_residual: residual,
        circle: Some(spec),
    };
    let state = StateEvaluator {
        p,
        geometry: KernelModel::Bargmann,
        nodes,
        weights,
        payload,
        support_hint: Some(spec),
    };
    Ok((bs, state))
}

/// `s(x) = sum_i w_i P_p(x, node_i) payload_i`.
pub fn state_eval(state: &StateEvaluator, x: [f64; 2]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..state.nodes.len() {
        acc += bargmann_kernel(state.p, x, state.nodes[i]) * state.payload[i] * state.weights[i];
    }
    acc
}

/// `<s1, s2> = sum_i w2_i conj(s1(node2_i)) payload2_i` (antilinear in the
/// first argument). Deterministic fixed-tree reduction regardless of worker
/// count.
pub fn inner_product(s1: &StateEvaluator, s2: &StateEvaluator) -> Result<C64, BargmannError> {
    if s1.geometry != s2.geometry {
        return Err(BargmannError::GeometryMismatch);
    }
    if s1.p != s2.p {
        return Err(BargmannError::PowerMismatch(s1.p, s2.p));
    }
    let terms: Vec<C64> = (0..s2.nodes.len())
        .into_par_iter()
        .map(|i| {
            let si = state_eval(s1, s2.nodes[i]);
            si.conj() * s2.payload[i] * s2.weights[i]
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Options for the Toeplitz middle quadrature.
#[derive(Debug, Clone, Copy)]
pub struct ToeplitzOptions {
    /// Inflation margin around the curves, in units of 1/sqrt(p).
    pub margin_units: f64,
    /// Multiplier on the 16-per-correlation-length grid density.
    pub oversample: f64,
}

impl Default for ToeplitzOptions {
    fn default() -> Self {
        Self { margin_units: 6.0, oversample: 1.0 }
    }
}

/// `<T_F s1, s2>` by inserting a 2D tensor quadrature over the inflated
/// bounding box of both curves: `sum_w W_w conj(F(w) s1(w)) s2(w)`.
pub fn toeplitz_inner(
    f_symbol: impl Fn([f64; 2]) -> C64 + Sync,
    s1: &StateEvaluator,
    s2: &StateEvaluator,
    opts: ToeplitzOptions,
) -> Result<C64, BargmannError> {
    if s1.geometry != s2.geometry {
        return Err(BargmannError::GeometryMismatch);
    }
    if s1.p != s2.p {
        return Err(BargmannError::PowerMismatch(s1.p, s2.p));
    }
    let p = s1.p;
    let pf = p as f64;
    let margin = opts.margin_units / pf.sqrt();
    let tail = (-0.5 * PI * pf * margin * margin).exp();
    if tail > 1e-10 {
        return Err(BargmannError::DomainTooSmall(tail));
    }

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for n in s1.nodes.iter().chain(&s2.nodes) {
        for d in 0..2 {
            lo[d] = lo[d].min(n[d]);
            hi[d] = hi[d].max(n[d]);
        }
    }
    let lo = [lo[0] - margin, lo[1] - margin];
    let hi = [hi[0] + margin, hi[1] + margin];
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let per_axis = ((16.0 * pf.sqrt() * side * opts.oversample).ceil() as usize).max(32);
    let rx = build_rule(RuleKind::GaussLegendreComposite, (lo[0], hi[0]), per_axis)
        .expect("valid rule");
    let ry = build_rule(RuleKind::GaussLegendreComposite, (lo[1], hi[1]), per_axis)
        .expect("valid rule");

    // Skip grid points where the Gaussian envelopes of both states are
    // negligible; the distance to a circle support is |(|w-c| - r)|.
    let hints = (s1.support_hint, s2.support_hint);
    let negligible = |w: [f64; 2]| -> bool {
        if let (Some(c1), Some(c2)) = hints {
            let d1 = ((w[0] - c1.center[0]).hypot(w[1] - c1.center[1]) - c1.radius).abs();
            let d2 = ((w[0] - c2.center[0]).hypot(w[1] - c2.center[1]) - c2.radius).abs();
            0.5 * PI * pf * (d1 * d1 + d2 * d2) > 46.0
        } else {
            false
        }
    };

    let rows: Vec<C64> = ry
        .nodes
        .par_iter()
        .zip(ry.weights.par_iter())
        .map(|(&y, &wy)| {
            let mut row = C64::new(0.0, 0.0);
            for (&x, &wx) in rx.nodes.iter().zip(&rx.weights) {
                let w = [x, y];
                if negligible(w) {
                    continue;
                }
                let v1 = state_eval(s1, w);
                let v2 = state_eval(s2, w);
                row += (f_symbol(w) * v1).conj() * v2 * (wx * wy);
            }
            row
        })
        .collect();
    Ok(pairwise_sum(&rows))
}

/// One transverse intersection of two circles.
#[derive(Debug, Clone, Copy)]
pub struct CircleIntersection {
    pub point: [f64; 2],
    /// Oriented angle from the curve-1 tangent to the curve-2 tangent, in [0, 2 pi).
    pub theta: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Transverse intersection points of two circles with angle-parameter data.
pub fn intersect_circles(
    c1: CircleSpec,
    c2: CircleSpec,
) -> Result<Vec<CircleIntersection>, BargmannError> {
    let dx = c2.center[0] - c1.center[0];
    let dy = c2.center[1] - c1.center[1];
    let d = (dx * dx + dy * dy).sqrt();
    let sep_outer = (d - (c1.radius + c2.radius)).abs();
    let sep_inner = (d - (c1.radius - c2.radius).abs()).abs();
    if sep_outer <= 1e-6 || sep_inner <= 1e-6 || (d <= 1e-6 && (c1.radius - c2.radius).abs() <= 1e-6)
    {
        return Err(BargmannError::TangentCircles(sep_outer.min(sep_inner)));
    }
    if d > c1.radius + c2.radius || d < (c1.radius - c2.radius).abs() {
        return Ok(Vec::new());
    }
    let a = (d * d + c1.radius * c1.radius - c2.radius * c2.radius) / (2.0 * d);
    let h = (c1.radius * c1.radius - a * a).sqrt();
    let ex = dx / d;
    let ey = dy / d;
    let base = [c1.center[0] + a * ex, c1.center[1] + a * ey];
    let mut out = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let point = [base[0] - sign * h * ey, base[1] + sign * h * ex];
        let t1 = (point[1] - c1.center[1]).atan2(point[0] - c1.center[0]).rem_euclid(TAU);
        let t2 = (point[1] - c2.center[1]).atan2(point[0] - c2.center[0]).rem_euclid(TAU);
        let tan1 = [-(t1.sin()), t1.cos()];
        let tan2 = [-(t2.sin()), t2.cos()];
        let cross = tan1[0] * tan2[1] - tan1[1] * tan2[0];
        let dot = tan1[0] * tan2[0] + tan1[1] * tan2[1];
        let theta = cross.atan2(dot).rem_euclid(TAU);
        out.push(CircleIntersection { point, theta, t1, t2 });
    }
    Ok(out)
}
