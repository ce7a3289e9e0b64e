//! The upper half-plane H and its modular quotient: Moebius machinery, the
//! closed-form Bergman kernel of weight-2p forms, geodesics with their flat
//! conormal sections, SL2(Z) coset enumeration, relative Poincare series,
//! Petersson norms and quotient-geodesic intersections.
//!
//! Conventions: the metric is the unrenormalized hyperbolic metric
//! `(dx^2 + dy^2)/y^2` with volume `dx dy / y^2`; sections of K^p are written
//! `f(z) dz^p` with pointwise norm `|f| y^p`; Hermitian pairings are
//! antilinear in the first argument.

mod cosets;
mod series;

pub use cosets::{coset_reps, CosetConvention, CosetTable, GroupElement};
pub use series::{
    elliptic_circle, elliptic_series, hyperbolic_geodesic_state, modularity_residual,
    petersson_norm, relative_poincare_series, state_curve_norm_sq, CuspFormEvaluator,
    EllipticCircle, RpsOptions, RpsValue, SeriesKind, TruncationInfo,
};

use crate::numerics::{integrate_linear_ode, C64};
use thiserror::Error;

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Error, PartialEq)]
pub enum HyperbolicError {
    #[error("point is not in the upper half-plane: Im z = {0:.3e}")]
    NotInUpperHalfPlane(f64),
    #[error("matrix is not unimodular: ad - bc = {0}")]
    NotUnimodular(f64),
    #[error("element is not hyperbolic: |trace| = {0}")]
    NotHyperbolic(f64),
    #[error("element is not elliptic: |trace| = {0}")]
    NotElliptic(f64),
    #[error("matrix entries are not integers")]
    NotInteger,
    #[error("flat-section transport does not reproduce the conormal: residual {0:.3e}")]
    FlatnessViolation(f64),
    #[error("weight 2p = {0} too small for convergence (need >= 4)")]
    WeightTooSmall(u32),
    #[error("truncation not converged: last shell contributes {0:.3e} of the partial sum")]
    TruncationNotConverged(f64),
    #[error("not Bohr-Sommerfeld at level p: residual {0:.3e}")]
    NotBohrSommerfeldAtLevelP(f64),
    #[error("geodesics share an axis modulo the group")]
    SameAxis,
    #[error("intersections found within {0} word lengths of the truncation boundary")]
    TruncationSuspect(u32),
    #[error("fundamental-domain grid too coarse: doubling changes the value by {0:.3e}")]
    GridTooCoarse(f64),
}

/// Real Moebius transformation with ad - bc = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Conjugacy classification by |trace|.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoebiusClass {
    Hyperbolic,
    Parabolic,
    Elliptic,
}

impl MoebiusElement {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, HyperbolicError> {
        let det = a * d - b * c;
        if (det - 1.0).abs() > 1e-12 {
            return Err(HyperbolicError::NotUnimodular(det));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn classify(&self) -> MoebiusClass {
        let t = self.trace().abs();
        if t > 2.0 {
            MoebiusClass::Hyperbolic
        } else if (t - 2.0).abs() < 1e-12 {
            MoebiusClass::Parabolic
        } else {
            MoebiusClass::Elliptic
        }
    }

    pub fn compose(&self, other: &MoebiusElement) -> MoebiusElement {
        MoebiusElement {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> MoebiusElement {
        MoebiusElement { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Action on the boundary R u {infinity}; `None` encodes infinity.
    pub fn apply_boundary(&self, x: Option<f64>) -> Option<f64> {
        match x {
            None => {
                if self.c.abs() < 1e-300 {
                    None
                } else {
                    Some(self.a / self.c)
                }
            }
            Some(x) => {
                let den = self.c * x + self.d;
                if den.abs() < 1e-300 {
                    None
                } else {
                    Some((self.a * x + self.b) / den)
                }
            }
        }
    }
}

/// `g.z = (az + b)/(cz + d)`; the image stays in H.
pub fn moebius_apply(g: &MoebiusElement, z: C64) -> Result<C64, HyperbolicError> {
    if z.im <= 0.0 {
        return Err(HyperbolicError::NotInUpperHalfPlane(z.im));
    }
    let num = z * g.a + g.b;
    let den = z * g.c + g.d;
    Ok(num / den)
}

/// Automorphy factor `j(g, z) = cz + d`.
pub fn j_factor(g: &MoebiusElement, z: C64) -> C64 {
    z * g.c + g.d
}

/// Hyperbolic distance: `cosh d = 1 + |z - w|^2 / (2 Im z Im w)`.
pub fn hyperbolic_distance(z: C64, w: C64) -> f64 {
    let q = 1.0 + (z - w).norm_sqr() / (2.0 * z.im * w.im);
    q.acosh()
}

/// Coefficient of `dz^p dwbar^p` in the Bergman kernel of square-integrable
/// p-th canonical powers: `(-1)^p 2^{2p-2} (2p-1) / (pi (z - wbar)^{2p})`.
pub fn hyperbolic_kernel(p: u32, z: C64, w: C64) -> C64 {
    let two_p = 2.0 * p as f64;
    // exp-log form; integer exponents make the branch choice immaterial.
    let log_mod = (two_p - 2.0) * std::f64::consts::LN_2 + (two_p - 1.0).ln() - PI.ln();
    let log_den = (z - w.conj()).ln() * two_p;
    let phase = C64::new(0.0, PI * p as f64); // (-1)^p
    (C64::new(log_mod, 0.0) - log_den + phase).exp()
}

/// Oriented geodesic of H: a vertical line or a semicircle centered on R,
/// parametrized by hyperbolic arclength.
#[derive(Debug, Clone, Copy)]
pub enum GeodesicShape {
    /// `z(t) = x0 + i e^{s t}`.
    Vertical { x0: f64, dir: f64 },
    /// `z(t) = m + rho (s tanh t + i sech t)`.
    Semicircle { center: f64, radius: f64, dir: f64 },
}

/// Closed geodesic data: axis, unit-speed parametrization, translation
/// length and the hyperbolic generator translating along it.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    pub shape: GeodesicShape,
    pub translation_length: f64,
    pub generator: MoebiusElement,
}

impl Geodesic {
    pub fn position(&self, t: f64) -> C64 {
        match self.shape {
            GeodesicShape::Vertical { x0, dir } => C64::new(x0, (dir * t).exp()),
            GeodesicShape::Semicircle { center, radius, dir } => {
                let th = (dir * t).tanh();
                let sh = 1.0 / (dir * t).cosh();
                C64::new(center + radius * th, radius * sh)
            }
        }
    }

    pub fn velocity(&self, t: f64) -> C64 {
        match self.shape {
            GeodesicShape::Vertical { dir, .. } => C64::new(0.0, dir * (dir * t).exp()),
            GeodesicShape::Semicircle { radius, dir, .. } => {
                let u = dir * t;
                let sech = 1.0 / u.cosh();
                C64::new(radius * dir * sech * sech, -radius * dir * sech * u.tanh())
            }
        }
    }

    /// Arclength parameter of a point assumed to lie on the axis.
    pub fn param_of(&self, z: C64) -> f64 {
        match self.shape {
            GeodesicShape::Vertical { dir, .. } => dir * z.im.ln(),
            GeodesicShape::Semicircle { center, radius, dir } => {
                let x = ((z.re - center) / radius).clamp(-1.0, 1.0);
                dir * x.atanh()
            }
        }
    }

    /// Boundary endpoints (None = infinity), ordered (repelling, attracting).
    pub fn endpoints(&self) -> (Option<f64>, Option<f64>) {
        match self.shape {
            GeodesicShape::Vertical { x0, dir } => {
                if dir > 0.0 {
                    (Some(x0), None)
                } else {
                    (None, Some(x0))
                }
            }
            GeodesicShape::Semicircle { center, radius, dir } => {
                let lo = center - radius;
                let hi = center + radius;
                if dir > 0.0 {
                    (Some(lo), Some(hi))
                } else {
                    (Some(hi), Some(lo))
                }
            }
        }
    }
}

/// Axis of a hyperbolic element, oriented so `g0 . z(t) = z(t + l)` with
/// `l = 2 arccosh(|tr|/2)` (the standard trace-length relation; re-verified
/// numerically at construction).
pub fn geodesic_from_hyperbolic(g0: &MoebiusElement) -> Result<Geodesic, HyperbolicError> {
    let tr = g0.trace();
    if tr.abs() <= 2.0 {
        return Err(HyperbolicError::NotHyperbolic(tr.abs()));
    }
    let length = 2.0 * (tr.abs() / 2.0).acosh();

    let make = |shape: GeodesicShape| Geodesic {
        shape,
        translation_length: length,
        generator: *g0,
    };
    let candidate = if g0.c.abs() > 1e-14 {
        let disc = (tr * tr - 4.0).sqrt();
        let x1 = (g0.a - g0.d - disc) / (2.0 * g0.c);
        let x2 = (g0.a - g0.d + disc) / (2.0 * g0.c);
        let center = 0.5 * (x1 + x2);
        let radius = 0.5 * (x2 - x1).abs();
        make(GeodesicShape::Semicircle { center, radius, dir: 1.0 })
    } else {
        let x0 = g0.b / (g0.d - g0.a);
        make(GeodesicShape::Vertical { x0, dir: 1.0 })
    };

    // Fix the orientation by the defining invariant.
    let z0 = candidate.position(0.0);
    let image = moebius_apply(g0, z0).expect("axis point in H");
    let fwd = hyperbolic_distance(image, candidate.position(length));
    let bwd = hyperbolic_distance(image, candidate.position(-length));
    let geo = if fwd <= bwd {
        candidate
    } else {
        match candidate.shape {
            GeodesicShape::Vertical { x0, dir } => {
                make(GeodesicShape::Vertical { x0, dir: -dir })
            }
            GeodesicShape::Semicircle { center, radius, dir } => {
                make(GeodesicShape::Semicircle { center, radius, dir: -dir })
            }
        }
    };

    // g0 . z(t) = z(t + l) across a sample of parameters.
    for i in 0..5 {
        let t = -1.0 + i as f64 * 0.7;
        let lhs = moebius_apply(g0, geo.position(t)).expect("in H");
        let rhs = geo.position(t + length);
        if (lhs - rhs).norm() > 1e-10 * (1.0 + rhs.norm()) {
            return Err(HyperbolicError::NotHyperbolic(tr.abs()));
        }
        // Unit hyperbolic speed.
        let v = geo.velocity(t);
        let speed = v.norm() / geo.position(t).im;
        debug_assert!((speed - 1.0).abs() < 1e-10);
    }
    Ok(geo)
}

/// Conormal section coefficient `c(t) = conj(gamma'(t)) / (Im gamma(t))^2`
/// of the flat unit section `c(t) dz` along a unit-speed geodesic.
///
/// Construction guarantees `|c| Im gamma = 1`; flatness against the
/// connection ODE `f' = (i gamma' / Im gamma) f` is certified numerically.
pub fn geodesic_section(geo: &Geodesic) -> Result<impl Fn(f64) -> C64 + '_, HyperbolicError> {
    let section = move |t: f64| {
        let z = geo.position(t);
        geo.velocity(t).conj() / (z.im * z.im)
    };
    // Parallel-transport recomputation over one period.
    let l = geo.translation_length;
    let transported = integrate_linear_ode(
        |t| {
            let z = geo.position(t);
            let v = geo.velocity(t);
            C64::new(0.0, 1.0) * v / z.im
        },
        0.0,
        l,
        20_000,
        section(0.0),
    );
    let expect = section(l);
    let residual = (transported - expect).norm() / expect.norm();
    if residual > 1e-8 {
        return Err(HyperbolicError::FlatnessViolation(residual));
    }
    Ok(section)
}

/// One intersection of two quotient geodesics.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicIntersection {
    pub t1: f64,
    pub t2: f64,
    /// Oriented angle from the first curve to the second, in [0, 2 pi).
    pub theta: f64,
    /// Section pairing `<zeta_1(t1), g.zeta_2(t2)>` at the common point.
    pub lambda: C64,
    /// Word length of the coset that produced the lift.
    pub word_length: u32,
    pub point: C64,
}

/// Intersection point in H of two distinct geodesics, if any.
fn geodesic_cross(a: &Geodesic, b: &Geodesic) -> Option<C64> {
    use GeodesicShape::*;
    match (a.shape, b.shape) {
        (Vertical { x0: xa, .. }, Vertical { .. }) => {
            let _ = xa;
            None
        }
        (Vertical { x0, .. }, Semicircle { center, radius, .. })
        | (Semicircle { center, radius, .. }, Vertical { x0, .. }) => {
            let dx = x0 - center;
            let y_sq = radius * radius - dx * dx;
            if y_sq > 1e-14 {
                Some(C64::new(x0, y_sq.sqrt()))
            } else {
                None
            }
        }
        (
            Semicircle { center: m1, radius: r1, .. },
            Semicircle { center: m2, radius: r2, .. },
        ) => {
            if (m1 - m2).abs() < 1e-14 {
                return None;
            }
            let x = (m2 * m2 - r2 * r2 - m1 * m1 + r1 * r1) / (2.0 * (m2 - m1));
            let y_sq = r1 * r1 - (x - m1) * (x - m1);
            if y_sq > 1e-14 {
                Some(C64::new(x, y_sq.sqrt()))
            } else {
                None
            }
        }
    }
}

/// Image of a geodesic under a Moebius element, with orientation tracked by
/// pushing the parametrization forward.
fn map_geodesic(g: &MoebiusElement, geo: &Geodesic) -> Geodesic {
    let (rep, att) = geo.endpoints();
    let rep_i = g.apply_boundary(rep);
    let att_i = g.apply_boundary(att);
    let shape = match (rep_i, att_i) {
        (Some(lo), Some(hi)) => GeodesicShape::Semicircle {
            center: 0.5 * (lo + hi),
            radius: 0.5 * (hi - lo).abs(),
            dir: if hi > lo { 1.0 } else { -1.0 },
        },
        (Some(x0), None) => GeodesicShape::Vertical { x0, dir: 1.0 },
        (None, Some(x0)) => GeodesicShape::Vertical { x0, dir: -1.0 },
        (None, None) => unreachable!("distinct endpoints"),
    };
    Geodesic {
        shape,
        translation_length: geo.translation_length,
        generator: geo.generator,
    }
}

/// Enumerates intersections of the fundamental segments of two closed
/// quotient geodesics by intersecting lifts `g . axis2` with `axis1`.
pub fn quotient_geodesic_intersections(
    geo1: &Geodesic,
    geo2: &Geodesic,
    table: &CosetTable,
) -> Result<Vec<GeodesicIntersection>, HyperbolicError> {
    let l1 = geo1.translation_length;
    let l2 = geo2.translation_length;
    let sec1 = move |t: f64| {
        let z = geo1.position(t);
        geo1.velocity(t).conj() / (z.im * z.im)
    };
    let sec2 = move |t: f64| {
        let z = geo2.position(t);
        geo2.velocity(t).conj() / (z.im * z.im)
    };

    // Reach of the fundamental segment of axis 1 along the real line.
    let (seg_lo, seg_hi) = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=32 {
            let z = geo1.position(l1 * i as f64 / 32.0);
            lo = lo.min(z.re - z.im);
            hi = hi.max(z.re + z.im);
        }
        (lo, hi)
    };

    let mut out: Vec<GeodesicIntersection> = Vec::new();
    let mut deepest: u32 = 0;
    for orbit in table.orbits() {
        let base = orbit.rep.to_moebius();
        // Horizontal translates T^m g . axis2 that can reach the segment.
        let probe = map_geodesic(&base, geo2);
        let (reach_lo, reach_hi) = match probe.shape {
            GeodesicShape::Vertical { x0, .. } => (x0, x0),
            GeodesicShape::Semicircle { center, radius, .. } => {
                (center - radius, center + radius)
            }
        };
        let m_min = (seg_lo - reach_hi).floor() as i64 - 1;
        let m_max = (seg_hi - reach_lo).ceil() as i64 + 1;
        for m in m_min..=m_max {
            let g = MoebiusElement {
                a: base.a + m as f64 * base.c,
                b: base.b + m as f64 * base.d,
                c: base.c,
                d: base.d,
            };
            let lift = map_geodesic(&g, geo2);
            // Same axis as geo1: the quotient curves coincide.
            let same = {
                let e1 = geo1.endpoints();
                let el = lift.endpoints();
                let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                    (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                    (None, None) => true,
                    _ => false,
                };
                (close(e1.0, el.0) && close(e1.1, el.1))
                    || (close(e1.0, el.1) && close(e1.1, el.0))
            };
            if same {
                return Err(HyperbolicError::SameAxis);
            }
            let Some(point) = geodesic_cross(geo1, &lift) else { continue };
            let t1 = geo1.param_of(point);
            if !(0.0..l1).contains(&t1) {
                continue;
            }
            let ginv = g.inverse();
            let pre = moebius_apply(&ginv, point)?;
            let t2 = geo2.param_of(pre).rem_euclid(l2);
            let jg = j_factor(&g, geo2.position(t2));
            // Lift tangent = gamma2'(t2) / j^2; oriented angle from curve 1.
            let v1 = geo1.velocity(t1);
            let v2 = geo2.velocity(t2) / (jg * jg);
            let theta = (v2 / v1).arg().rem_euclid(2.0 * PI);
            let lambda = sec1(t1).conj() * sec2(t2) * jg * jg * point.im * point.im;
            deepest = deepest.max(orbit.word_length);
            out.push(GeodesicIntersection {
                t1,
                t2,
                theta,
                lambda,
                word_length: orbit.word_length,
                point,
            });
        }
    }
    if deepest + 2 >= table.max_word_length() {
        return Err(HyperbolicError::TruncationSuspect(
            table.max_word_length().saturating_sub(deepest),
        ));
    }
    out.sort_by(|a, b| a.t1.total_cmp(&b.t1));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_psl2r(rng: &mut ChaCha8Rng) -> MoebiusElement {
        loop {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            let cc: f64 = rng.gen_range(-2.0..2.0);
            if a.abs() < 0.1 {
                continue;
            }
            let d = (1.0 + b * cc) / a;
            if d.abs() < 5.0 {
                return MoebiusElement::new(a, b, cc, d).unwrap();
            }
        }
    }

    #[test]
    fn moebius_basics() {
        let id = MoebiusElement::identity();
        assert_eq!(moebius_apply(&id, c(0.0, 1.0)).unwrap(), c(0.0, 1.0));
        assert_eq!(j_factor(&id, c(0.3, 2.0)), c(1.0, 0.0));

        let s = MoebiusElement::new(0.0, -1.0, 1.0, 0.0).unwrap();
        assert!((moebius_apply(&s, c(0.0, 1.0)).unwrap() - c(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(j_factor(&s, c(0.0, 1.0)), c(0.0, 1.0));

        let t = MoebiusElement::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let z = c(0.4, 0.9);
        assert!((moebius_apply(&t, z).unwrap() - (z + 1.0)).norm() < 1e-15);
        assert_eq!(j_factor(&t, z), c(1.0, 0.0));

        assert!(moebius_apply(&s, c(0.0, -1.0)).is_err());
        assert!(MoebiusElement::new(1.0, 0.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn cocycle_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let g = random_psl2r(&mut rng);
            let h = random_psl2r(&mut rng);
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let lhs = j_factor(&g.compose(&h), z);
            let rhs = j_factor(&g, moebius_apply(&h, z).unwrap()) * j_factor(&h, z);
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn kernel_spot_values() {
        let i = c(0.0, 1.0);
        let k1 = hyperbolic_kernel(1, i, i);
        assert!((k1 - c(1.0 / (4.0 * PI), 0.0)).norm() < 1e-12);
        let k2 = hyperbolic_kernel(2, i, i);
        assert!((k2 - c(3.0 / (4.0 * PI), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn weighted_kernel_moebius_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [1u32, 2, 6] {
            for _ in 0..20 {
                let g = random_psl2r(&mut rng);
                let z = c(rng.gen_range(-1.5..1.5), rng.gen_range(0.3..2.5));
                let w = c(rng.gen_range(-1.5..1.5), rng.gen_range(0.3..2.5));
                let base = hyperbolic_kernel(p, z, w).norm()
                    * (z.im * w.im).powi(p as i32);
                let gz = moebius_apply(&g, z).unwrap();
                let gw = moebius_apply(&g, w).unwrap();
                let moved = hyperbolic_kernel(p, gz, gw).norm()
                    * (gz.im * gw.im).powi(p as i32);
                assert!(
                    (base - moved).abs() < 1e-10 * base,
                    "p={p} base={base} moved={moved}"
                );
            }
        }
    }

    #[test]
    fn geodesic_of_standard_element() {
        let g0 = MoebiusElement::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let geo = geodesic_from_hyperbolic(&g0).unwrap();
        let expect = 2.0 * (1.5_f64).acosh();
        assert!((geo.translation_length - expect).abs() < 1e-12);

        // Oracle: hyperbolic distance from z(0) to g0 . z(0) along the axis.
        let z0 = geo.position(0.0);
        let img = moebius_apply(&g0, z0).unwrap();
        assert!((hyperbolic_distance(z0, img) - expect).abs() < 1e-10);
        assert!((img - geo.position(expect)).norm() < 1e-10);
    }

    #[test]
    fn geodesic_vertical_and_conjugation() {
        let lam = 1.7;
        let g0 = MoebiusElement::new(lam, 0.0, 0.0, 1.0 / lam).unwrap();
        let geo = geodesic_from_hyperbolic(&g0).unwrap();
        assert!((geo.translation_length - 2.0 * lam.ln()).abs() < 1e-12);
        assert!(matches!(geo.shape, GeodesicShape::Vertical { .. }));
        // d(i, lam^2 i) = 2 ln lam.
        assert!(
            (hyperbolic_distance(c(0.0, 1.0), c(0.0, lam * lam)) - 2.0 * lam.ln()).abs()
                < 1e-12
        );

        let h = MoebiusElement::new(1.0, 2.0, 1.0, 3.0).unwrap();
        let conj = h.compose(&g0).compose(&h.inverse());
        let geo2 = geodesic_from_hyperbolic(&conj).unwrap();
        assert!((geo2.translation_length - geo.translation_length).abs() < 1e-10);

        let para = MoebiusElement::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            geodesic_from_hyperbolic(&para),
            Err(HyperbolicError::NotHyperbolic(_))
        ));
    }

    #[test]
    fn section_explicit_vertical() {
        let lam = 2.0;
        let g0 = MoebiusElement::new(lam, 0.0, 0.0, 1.0 / lam).unwrap();
        let geo = geodesic_from_hyperbolic(&g0).unwrap();
        let sec = geodesic_section(&geo).unwrap();
        // z(t) = i e^t: c(t) = -i e^{-t}.
        for t in [0.0_f64, 0.3, 1.1] {
            let expect = c(0.0, -(-t).exp());
            assert!((sec(t) - expect).norm() < 1e-12, "t={t}");
            let z = geo.position(t);
            assert!((sec(t).norm() * z.im - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn section_unit_norm_and_equivariance() {
        let g0 = MoebiusElement::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let geo = geodesic_from_hyperbolic(&g0).unwrap();
        let sec = geodesic_section(&geo).unwrap();
        let l = geo.translation_length;
        for i in 0..7 {
            let t = -0.9 + 0.35 * i as f64;
            let z = geo.position(t);
            assert!((sec(t).norm() * z.im - 1.0).abs() < 1e-10);
            // c(t + l) = c(t) j(g0, gamma(t))^2.
            let j = j_factor(&g0, z);
            let lhs = sec(t + l);
            let rhs = sec(t) * j * j;
            assert!((lhs - rhs).norm() < 1e-8 * rhs.norm(), "t={t}");
        }
    }
}
