//! The flat local model kernel on R^{2n} and the analytic leading-coefficient
//! predictors for norms, discrete intersections and clean intersections.
//!
//! Coordinates are Z = (u_1..u_n, v_1..v_n) with the standard symplectic
//! pairing Omega(Z, Z') = sum_j (u_j v'_j - v_j u'_j) and the Euclidean
//! metric; the compatible complex structure is J(u, v) = (-v, u).

use crate::numerics::{det_sqrt_continued, C64};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LocalModelError {
    #[error("vector has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("frame is not orthonormal: Gram defect {0:.3e}")]
    NotOrthonormal(f64),
    #[error("frame is not isotropic: |Omega(v_i, v_j)| = {0:.3e}")]
    NotIsotropic(f64),
    #[error("sigma1 must be Lagrangian (d = n): got d = {got}, n = {n}")]
    NotLagrangian { got: usize, n: usize },
    #[error("subspaces overlap: smallest principal angle {0:.3e} rad")]
    OverlappingSubspaces(f64),
    #[error("branch continuation failed: {0}")]
    BranchPathInvalid(String),
    #[error("tangential intersection: |sin theta| = {0:.3e}")]
    TangentialIntersection(f64),
}

/// Base-point data for the flat model kernel.
#[derive(Debug, Clone, Copy)]
pub struct LocalKernelParams {
    /// Complex dimension n (ambient real dimension 2n).
    pub n: usize,
    /// det(R_dot^L / 2 pi) at the base point; 1 when g = g_omega.
    pub det_rl_over_2pi: f64,
}

impl LocalKernelParams {
    pub fn standard(n: usize) -> Self {
        Self { n, det_rl_over_2pi: 1.0 }
    }
}

/// Standard symplectic pairing on R^{2n}.
pub fn omega(z: &[f64], zp: &[f64]) -> f64 {
    debug_assert_eq!(z.len(), zp.len());
    debug_assert_eq!(z.len() % 2, 0);
    let n = z.len() / 2;
    let mut acc = 0.0;
    for j in 0..n {
        acc += z[j] * zp[n + j] - z[n + j] * zp[j];
    }
    acc
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Model Bergman kernel `det(R/2pi) exp(-(pi/2)|Z-Z'|^2 - pi i Omega(Z,Z'))`.
pub fn model_kernel(
    params: &LocalKernelParams,
    z: &[f64],
    zp: &[f64],
) -> Result<C64, LocalModelError> {
    let dim = 2 * params.n;
    if z.len() != dim {
        return Err(LocalModelError::DimensionMismatch { got: z.len(), expected: dim });
    }
    if zp.len() != dim {
        return Err(LocalModelError::DimensionMismatch { got: zp.len(), expected: dim });
    }
    let diff_sq: f64 = z.iter().zip(zp).map(|(a, b)| (a - b) * (a - b)).sum();
    let om = omega(z, zp);
    let pi = std::f64::consts::PI;
    let exponent = C64::new(-0.5 * pi * diff_sq, -pi * om);
    Ok(exponent.exp() * params.det_rl_over_2pi)
}

/// A tuple of orthonormal, pairwise Omega-isotropic vectors in R^{2n}.
#[derive(Debug, Clone)]
pub struct IsotropicFrame {
    dim_ambient: usize,
    vectors: Vec<Vec<f64>>,
}

impl IsotropicFrame {
    /// Validates orthonormality and isotropy to 1e-12.
    pub fn new(dim_ambient: usize, vectors: Vec<Vec<f64>>) -> Result<Self, LocalModelError> {
        for v in &vectors {
            if v.len() != dim_ambient {
                return Err(LocalModelError::DimensionMismatch {
                    got: v.len(),
                    expected: dim_ambient,
                });
            }
        }
        let d = vectors.len();
        for i in 0..d {
            for j in 0..d {
                let g = dot(&vectors[i], &vectors[j]) - if i == j { 1.0 } else { 0.0 };
                if g.abs() > 1e-12 {
                    return Err(LocalModelError::NotOrthonormal(g.abs()));
                }
                let om = omega(&vectors[i], &vectors[j]);
                if om.abs() > 1e-12 {
                    return Err(LocalModelError::NotIsotropic(om.abs()));
                }
            }
        }
        Ok(Self { dim_ambient, vectors })
    }

    /// Empty frame (used for full-overlap clean intersections).
    pub fn empty(dim_ambient: usize) -> Self {
        Self { dim_ambient, vectors: Vec::new() }
    }

    pub fn dim_ambient(&self) -> usize {
        self.dim_ambient
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Smallest principal angle between the spans of two frames, via the
/// singular values of (I - P1) M2 (accurate near zero).
fn smallest_principal_angle(f1: &IsotropicFrame, f2: &IsotropicFrame) -> f64 {
    let dim = f1.dim_ambient;
    let m1 = DMatrix::from_fn(dim, f1.len(), |i, j| f1.vectors[j][i]);
    let m2 = DMatrix::from_fn(dim, f2.len(), |i, j| f2.vectors[j][i]);
    let proj = &m1 * m1.transpose();
    let residual = &m2 - proj * &m2;
    let svd = residual.svd(false, false);
    let sin_min = svd.singular_values.min().clamp(-1.0, 1.0);
    sin_min.asin()
}

/// The matrices A, B of the pair-integral closed form: `a_k^j = Omega(e_k, nu_j)`,
/// `b_k^j = <e_k, nu_j>`, rows over the e-frame, columns over the nu-frame.
fn pairing_matrices(e: &IsotropicFrame, nu: &IsotropicFrame) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_fn(e.len(), nu.len(), |k, j| omega(&e.vectors[k], &nu.vectors[j]));
    let b = DMatrix::from_fn(e.len(), nu.len(), |k, j| dot(&e.vectors[k], &nu.vectors[j]));
    (a, b)
}

/// `det^{-1/2}{ i sum_k h_omega(e_k, nu_i) omega(e_k, nu_j) }` with
/// `h_omega = g_omega - i omega`; equals `det_sqrt_continued(A^T A, B^T A)`.
fn frame_det_factor(
    e: &IsotropicFrame,
    nu: &IsotropicFrame,
) -> Result<C64, LocalModelError> {
    let (a, b) = pairing_matrices(e, nu);
    let re = a.transpose() * &a;
    let im = b.transpose() * &a;
    // B^T A is symmetric exactly when the nu-frame is isotropic; symmetrize
    // to keep floating-point noise out of the branch walk.
    let im = (&im + im.transpose()) * 0.5;
    det_sqrt_continued(&re, &im).map_err(|e| LocalModelError::BranchPathInvalid(e.to_string()))
}

/// Closed form of the double Gaussian integral of the model kernel over a
/// Lagrangian frame and a second isotropic frame:
/// `int_{S2} int_{S1} P(u, w) du dw = 2^{n/2} det^{-1/2}(A^T A + i B^T A) det(R/2pi)`,
/// with `u` running over `sigma1` in the first kernel slot. This is the
/// orientation that pairs with Hermitian products taken antilinear in the
/// first argument, and it reproduces [`angle_coefficient`] at n = 1.
pub fn gaussian_pair_integral(
    sigma1: &IsotropicFrame,
    sigma2: &IsotropicFrame,
    params: &LocalKernelParams,
) -> Result<C64, LocalModelError> {
    let n = params.n;
    if sigma1.dim_ambient != 2 * n || sigma2.dim_ambient != 2 * n {
        return Err(LocalModelError::DimensionMismatch {
            got: sigma1.dim_ambient,
            expected: 2 * n,
        });
    }
    if sigma1.len() != n {
        return Err(LocalModelError::NotLagrangian { got: sigma1.len(), n });
    }
    let angle = smallest_principal_angle(sigma1, sigma2);
    if angle <= 1e-8 {
        return Err(LocalModelError::OverlappingSubspaces(angle));
    }
    let det = frame_det_factor(sigma1, sigma2)?;
    Ok(det * 2.0_f64.powf(n as f64 / 2.0) * params.det_rl_over_2pi)
}

/// Leading norm coefficient `b_0 = 2^{d/2} * int |f|^2 * det(R/2pi) * (dv/dv_omega)`,
/// specialized to constant factors along the submanifold.
pub fn predict_norm_b0(d: usize, f_sq_integral: f64, det_factor: f64, density_ratio: f64) -> f64 {
    2.0_f64.powf(d as f64 / 2.0) * f_sq_integral * det_factor * density_ratio
}

/// Leading intersection coefficient at one intersection point:
/// `2^{n/2} <F f_1, f_2> det^{1/2}(R/2pi) (dv/dv_omega) det^{-1/2}{i h_omega omega}`.
///
/// `e_frame` holds the n - l vectors normal to the intersection inside the
/// first (Lagrangian) submanifold, `nu_frame` the d_2 - l vectors normal to
/// it inside the second; empty frames give the full-overlap case with the
/// empty determinant equal to 1.
pub fn predict_intersection_b0(
    e_frame: &IsotropicFrame,
    nu_frame: &IsotropicFrame,
    ff_pairing: C64,
    det_factor: f64,
    density_ratio: f64,
) -> Result<C64, LocalModelError> {
    if e_frame.dim_ambient != nu_frame.dim_ambient {
        return Err(LocalModelError::DimensionMismatch {
            got: nu_frame.dim_ambient,
            expected: e_frame.dim_ambient,
        });
    }
    let n = e_frame.dim_ambient / 2;
    let det = frame_det_factor(e_frame, nu_frame)?;
    Ok(det * ff_pairing * 2.0_f64.powf(n as f64 / 2.0) * det_factor.sqrt() * density_ratio)
}

/// Transverse-curve coefficient `sqrt(2) e^{i(theta/2 - pi/4)} / sqrt(sin theta)`
/// for the oriented angle theta in (0, 2pi), with the branch convention
/// `sqrt(-a) = i sqrt(a)` for a > 0.
pub fn angle_coefficient(theta: f64) -> Result<C64, LocalModelError> {
    let s = theta.sin();
    if s.abs() < 1e-8 {
        return Err(LocalModelError::TangentialIntersection(s.abs()));
    }
    let sqrt_sin = if s > 0.0 {
        C64::new(s.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-s).sqrt())
    };
    let phase = C64::from_polar(1.0, theta / 2.0 - std::f64::consts::FRAC_PI_4);
    Ok(phase * 2.0_f64.sqrt() / sqrt_sin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{build_rule, RuleKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PI: f64 = std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Quadrature oracle for the pair integral: tensor Gauss-Legendre over
    /// [-8, 8]^{d1+d2} in the frame coordinates.
    fn pair_integral_brute(
        sigma1: &IsotropicFrame,
        sigma2: &IsotropicFrame,
        params: &LocalKernelParams,
        per_axis: usize,
    ) -> C64 {
        let rule = build_rule(RuleKind::GaussLegendreComposite, (-8.0, 8.0), per_axis).unwrap();
        let d1 = sigma1.len();
        let d2 = sigma2.len();
        let k = d1 + d2;
        let n = rule.len();
        let dim = sigma1.dim_ambient();
        let mut total = c(0.0, 0.0);
        let mut idx = vec![0usize; k];
        loop {
            let mut w = 1.0;
            let mut u = vec![0.0; dim];
            let mut v = vec![0.0; dim];
            for (axis, &i) in idx.iter().enumerate() {
                w *= rule.weights[i];
                let t = rule.nodes[i];
                if axis < d1 {
                    for (x, e) in u.iter_mut().zip(&sigma1.vectors()[axis]) {
                        *x += t * e;
                    }
                } else {
                    for (x, e) in v.iter_mut().zip(&sigma2.vectors()[axis - d1]) {
                        *x += t * e;
                    }
                }
            }
            total += model_kernel(params, &u, &v).unwrap() * w;
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == k {
                    return total;
                }
            }
        }
    }

    fn line_frame(theta: f64) -> IsotropicFrame {
        IsotropicFrame::new(2, vec![vec![theta.cos(), theta.sin()]]).unwrap()
    }

    #[test]
    fn kernel_values() {
        let params = LocalKernelParams::standard(1);
        let v = model_kernel(&params, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-15);

        let v = model_kernel(&params, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((v - c((-PI / 2.0).exp(), 0.0)).norm() < 1e-15);

        // Omega((1,0),(0,1)) = 1, so the phase is exp(-i pi) = -1.
        let v = model_kernel(&params, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - c(-(-PI).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn kernel_hermitian_and_modulus() {
        let params = LocalKernelParams::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let z: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let zp: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let k1 = model_kernel(&params, &z, &zp).unwrap();
            let k2 = model_kernel(&params, &zp, &z).unwrap();
            assert!((k1 - k2.conj()).norm() < 1e-14);
            let dist_sq: f64 = z.iter().zip(&zp).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((k1.norm() - (-PI / 2.0 * dist_sq).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_rejects_dimension_mismatch() {
        let params = LocalKernelParams::standard(1);
        assert!(matches!(
            model_kernel(&params, &[0.0, 0.0, 0.0], &[0.0, 0.0]),
            Err(LocalModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frame_validation() {
        assert!(IsotropicFrame::new(2, vec![vec![1.0, 0.0]]).is_ok());
        assert!(matches!(
            IsotropicFrame::new(2, vec![vec![2.0, 0.0]]),
            Err(LocalModelError::NotOrthonormal(_))
        ));
        // e1 and J e1 = f1 span a symplectic (non-isotropic) plane in R^2... use R^4.
        let e1 = vec![1.0, 0.0, 0.0, 0.0];
        let f1 = vec![0.0, 0.0, 1.0, 0.0];
        assert!(matches!(
            IsotropicFrame::new(4, vec![e1, f1]),
            Err(LocalModelError::NotIsotropic(_))
        ));
    }

    #[test]
    fn pair_integral_perpendicular_lines() {
        // Sigma1 = span(e1), Sigma2 = span(f1): A = [1], B = [0], result sqrt(2).
        let params = LocalKernelParams::standard(1);
        let s1 = line_frame(0.0);
        let s2 = line_frame(PI / 2.0);
        let v = gaussian_pair_integral(&s1, &s2, &params).unwrap();
        assert!((v - c(2.0_f64.sqrt(), 0.0)).norm() < 1e-12);
        let brute = pair_integral_brute(&s1, &s2, &params, 200);
        assert!((v - brute).norm() / v.norm() < 1e-6);
    }

    #[test]
    fn pair_integral_angle_pi_over_4() {
        let params = LocalKernelParams::standard(1);
        let s1 = line_frame(0.0);
        let s2 = line_frame(PI / 4.0);
        let v = gaussian_pair_integral(&s1, &s2, &params).unwrap();
        let expected = angle_coefficient(PI / 4.0).unwrap();
        assert!((v - expected).norm() < 1e-12);
        let brute = pair_integral_brute(&s1, &s2, &params, 240);
        assert!((v - brute).norm() / v.norm() < 1e-6);
    }

    #[test]
    fn pair_integral_matches_quadrature_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // n = 1: random line pairs with angle bounded away from 0 and pi.
        let params = LocalKernelParams::standard(1);
        for _ in 0..30 {
            let t1 = rng.gen_range(0.0..PI);
            let gap = rng.gen_range(PI / 4.0..3.0 * PI / 4.0);
            let s1 = line_frame(t1);
            let s2 = line_frame(t1 + gap);
            let v = gaussian_pair_integral(&s1, &s2, &params).unwrap();
            let brute = pair_integral_brute(&s1, &s2, &params, 160);
            let rel = (v - brute).norm() / v.norm();
            assert!(rel < 1e-6, "t1={t1} gap={gap} rel={rel}");
        }
        // n = 2: Lagrangian plane vs rotated Lagrangian plane (d2 = 2).
        let params2 = LocalKernelParams::standard(2);
        for _ in 0..10 {
            let a = rng.gen_range(PI / 4.0..3.0 * PI / 4.0);
            let b = rng.gen_range(PI / 4.0..3.0 * PI / 4.0);
            let e1 = vec![1.0, 0.0, 0.0, 0.0];
            let e2 = vec![0.0, 1.0, 0.0, 0.0];
            let n1 = vec![a.cos(), 0.0, a.sin(), 0.0];
            let n2 = vec![0.0, b.cos(), 0.0, b.sin()];
            let s1 = IsotropicFrame::new(4, vec![e1, e2]).unwrap();
            let s2 = IsotropicFrame::new(4, vec![n1, n2]).unwrap();
            let v = gaussian_pair_integral(&s1, &s2, &params2).unwrap();
            let brute = pair_integral_brute(&s1, &s2, &params2, 64);
            let rel = (v - brute).norm() / v.norm();
            assert!(rel < 1e-6, "a={a} b={b} rel={rel}");
        }
    }

    #[test]
    fn pair_integral_rejects_overlap() {
        let params = LocalKernelParams::standard(1);
        let s1 = line_frame(0.3);
        let s2 = line_frame(0.3);
        assert!(matches!(
            gaussian_pair_integral(&s1, &s2, &params),
            Err(LocalModelError::OverlappingSubspaces(_))
        ));
    }

    #[test]
    fn norm_b0_values() {
        let tau = 2.0 * PI;
        assert!((predict_norm_b0(1, tau, 1.0, 1.0) - 2.0_f64.sqrt() * tau).abs() < 1e-12);
        assert_eq!(predict_norm_b0(1, 0.0, 1.0, 1.0), 0.0);
        let r = 1.7;
        assert!(
            (predict_norm_b0(1, tau * r, 1.0, 1.0) - 2.0_f64.sqrt() * tau * r).abs() < 1e-12
        );
    }

    #[test]
    fn intersection_b0_matches_angle_coefficient() {
        // At n = 1 the predictor must reproduce the angle formula for every
        // transverse angle, including the sin < 0 branch convention.
        let mut theta = 0.1;
        while theta < 2.0 * PI {
            if (theta - PI).abs() > 0.05 {
                let e = line_frame(0.0);
                let nu = line_frame(theta);
                let b0 =
                    predict_intersection_b0(&e, &nu, c(1.0, 0.0), 1.0, 1.0).unwrap();
                let expect = angle_coefficient(theta).unwrap();
                assert!(
                    (b0 - expect).norm() < 1e-10,
                    "theta={theta} b0={b0} expect={expect}"
                );
            }
            theta += 0.1;
        }
    }

    #[test]
    fn intersection_b0_full_overlap_reduces_to_norm_shape() {
        let e = IsotropicFrame::empty(2);
        let nu = IsotropicFrame::empty(2);
        let b0 = predict_intersection_b0(&e, &nu, c(0.5, 0.5), 1.0, 1.0).unwrap();
        assert!((b0 - c(0.5, 0.5) * 2.0_f64.sqrt()).norm() < 1e-14);
    }

    #[test]
    fn angle_coefficient_values() {
        let v = angle_coefficient(PI / 2.0).unwrap();
        assert!((v - c(2.0_f64.sqrt(), 0.0)).norm() < 1e-14);

        let v = angle_coefficient(PI / 4.0).unwrap();
        let expected = C64::from_polar(2.0_f64.powf(0.75), -PI / 8.0);
        assert!((v - expected).norm() < 1e-12);

        // Paper convention sqrt(-1) = i makes theta = 3 pi/2 come out real.
        let v = angle_coefficient(3.0 * PI / 2.0).unwrap();
        assert!((v - c(2.0_f64.sqrt(), 0.0)).norm() < 1e-12);

        assert!(matches!(
            angle_coefficient(PI),
            Err(LocalModelError::TangentialIntersection(_))
        ));
    }

    #[test]
    fn odd_moments_vanish() {
        // int Q(u) P(0, u) du = 0 for odd Q up to degree 5, on lines in R^2
        // and on a plane in R^4, by quadrature.
        let params = LocalKernelParams::standard(1);
        let rule = build_rule(RuleKind::GaussLegendreComposite, (-8.0, 8.0), 160).unwrap();
        for &theta in &[0.0_f64, 0.7, 2.1] {
            let dir = [theta.cos(), theta.sin()];
            for deg in [1, 3, 5] {
                let v = rule.integrate_c(|t| {
                    let z = [t * dir[0], t * dir[1]];
                    model_kernel(&params, &[0.0, 0.0], &z).unwrap() * t.powi(deg)
                });
                assert!(v.norm() < 1e-10, "deg={deg} theta={theta} v={v}");
            }
        }
        let params2 = LocalKernelParams::standard(2);
        let rule2 = build_rule(RuleKind::GaussLegendreComposite, (-8.0, 8.0), 64).unwrap();
        // Q(u) = u1^3 u2^2 (odd total parity) on the Lagrangian u-plane.
        let mut total = c(0.0, 0.0);
        for (&x, &wx) in rule2.nodes.iter().zip(&rule2.weights) {
            for (&y, &wy) in rule2.nodes.iter().zip(&rule2.weights) {
                let z = [x, y, 0.0, 0.0];
                total += model_kernel(&params2, &[0.0; 4], &z).unwrap()
                    * (x.powi(3) * y.powi(2))
                    * (wx * wy);
            }
        }
        assert!(total.norm() < 1e-10);
    }
}
