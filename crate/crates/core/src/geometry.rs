//! Conformal disk surfaces and the circle-bundle frame.
//!
//! The surface is a round disk carrying the metric g = e^{2 phi} (dx^2 + dy^2)
//! with phi a real polynomial field. The unit circle bundle is globally
//! trivialized by (x, y, theta) with attached unit vector
//! v = e^{-phi} (cos theta, sin theta), and the frame
//!
//!   X      = e^{-phi} (cos th d_x + sin th d_y + (-phi_x sin th + phi_y cos th) d_th)
//!   X_perp = e^{-phi} (sin th d_x - cos th d_y + ( phi_x cos th + phi_y sin th) d_th)
//!   V      = d_th
//!
//! satisfies [X, V] = X_perp, [X_perp, V] = -X, [X, X_perp] = -K V with
//! K = -e^{-2 phi} (phi_xx + phi_yy). {X, -X_perp, V} is orthonormal for the
//! Sasaki metric G(xi, eta) = e^{2 phi}(xi_x eta_x + xi_y eta_y)
//! + omega(xi) omega(eta), omega(xi) = xi_th - phi_y xi_x + phi_x xi_y.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::PolyField;

/// Point of the unit circle bundle in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        PhaseState { x, y, theta }
    }

    /// Fiber antipode (x, y, theta + pi): the reversed direction.
    pub fn reversed(&self) -> Self {
        PhaseState {
            x: self.x,
            y: self.y,
            theta: self.theta + std::f64::consts::PI,
        }
    }
}

/// Tags for the global frame of T(SM).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameVector {
    X,
    XPerp,
    V,
}

/// Round disk with conformal metric e^{2 phi} |dx|^2.
#[derive(Debug, Clone)]
pub struct ConformalSurface {
    phi: PolyField,
    radius: f64,
}

impl ConformalSurface {
    pub fn new(phi: PolyField, radius: f64) -> Result<Self> {
        if !phi.is_scalar() {
            return Err(Error::ShapeMismatch("phi must be a scalar field".into()));
        }
        if !phi.is_real() {
            return Err(Error::Invalid("phi must have real coefficients".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::Invalid(format!("radius must be positive, got {radius}")));
        }
        Ok(ConformalSurface { phi, radius })
    }

    /// Euclidean disk (phi = 0).
    pub fn flat(radius: f64) -> Self {
        Self::new(PolyField::zero(1, 1), radius).expect("flat disk")
    }

    pub fn flat_unit() -> Self {
        Self::flat(1.0)
    }

    pub fn phi(&self) -> &PolyField {
        &self.phi
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// Same conformal factor on a disk of radius scaled by (1 + delta).
    pub fn enlarged(&self, delta: f64) -> Result<Self> {
        Self::new(self.phi.clone(), self.radius * (1.0 + delta))
    }

    pub fn phi_at(&self, x: f64, y: f64) -> f64 {
        self.phi.eval_real(x, y)
    }

    pub fn phi_d(&self, x: f64, y: f64, a: u32, b: u32) -> f64 {
        self.phi.eval_deriv_real(x, y, a, b)
    }

    /// Conformal stretch e^{phi}.
    pub fn conf(&self, x: f64, y: f64) -> f64 {
        self.phi_at(x, y).exp()
    }

    /// Boundary defining function rho = radius^2 - x^2 - y^2.
    pub fn rho(&self, x: f64, y: f64) -> f64 {
        self.radius * self.radius - x * x - y * y
    }

    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        self.rho(x, y) >= -tol
    }

    /// Chart components of the attached unit vector e^{-phi}(cos th, sin th).
    pub fn unit_vector(&self, s: &PhaseState) -> [f64; 2] {
        let e = (-self.phi_at(s.x, s.y)).exp();
        [e * s.theta.cos(), e * s.theta.sin()]
    }

    /// Metric pairing of chart vectors at (x, y).
    pub fn metric_dot(&self, x: f64, y: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
        (2.0 * self.phi_at(x, y)).exp() * (a[0] * b[0] + a[1] * b[1])
    }

    /// Boundary point at angle beta.
    pub fn boundary_point(&self, beta: f64) -> [f64; 2] {
        [self.radius * beta.cos(), self.radius * beta.sin()]
    }

    /// <v, nu>_g for a boundary state; nu is the inward unit normal.
    /// Positive means inward-pointing. Equals -(x cos th + y sin th)/radius.
    pub fn boundary_inner(&self, s: &PhaseState) -> f64 {
        -(s.x * s.theta.cos() + s.y * s.theta.sin()) / self.radius
    }

    /// Gaussian curvature K = -e^{-2 phi} (phi_xx + phi_yy).
    pub fn gaussian_curvature(&self, x: f64, y: f64) -> f64 {
        let lap = self.phi_d(x, y, 2, 0) + self.phi_d(x, y, 0, 2);
        -(-2.0 * self.phi_at(x, y)).exp() * lap
    }

    /// Sasaki pairing of chart tangent vectors (d_x, d_y, d_th components) at s.
    pub fn sasaki_inner(&self, s: &PhaseState, xi: [f64; 3], eta: [f64; 3]) -> f64 {
        let px = self.phi_d(s.x, s.y, 1, 0);
        let py = self.phi_d(s.x, s.y, 0, 1);
        let om_xi = xi[2] - py * xi[0] + px * xi[1];
        let om_eta = eta[2] - py * eta[0] + px * eta[1];
        self.metric_dot(s.x, s.y, [xi[0], xi[1]], [eta[0], eta[1]]) + om_xi * om_eta
    }
}

/// Chart coefficients (a, b, c) of the frame vector W = a d_x + b d_y + c d_th.
pub fn frame_coefficients(surface: &ConformalSurface, tag: FrameVector, s: &PhaseState) -> [f64; 3] {
    let (ct, st) = (s.theta.cos(), s.theta.sin());
    let e = (-surface.phi_at(s.x, s.y)).exp();
    let px = surface.phi_d(s.x, s.y, 1, 0);
    let py = surface.phi_d(s.x, s.y, 0, 1);
    match tag {
        FrameVector::X => [e * ct, e * st, e * (-px * st + py * ct)],
        FrameVector::XPerp => [e * st, -e * ct, e * (px * ct + py * st)],
        FrameVector::V => [0.0, 0.0, 1.0],
    }
}

/// Jacobian d(a, b, c)/d(x, y, theta) of the frame coefficients.
/// Row r is the derivative of coefficient r; column order (x, y, theta).
pub fn frame_jacobian(surface: &ConformalSurface, tag: FrameVector, s: &PhaseState) -> [[f64; 3]; 3] {
    let (ct, st) = (s.theta.cos(), s.theta.sin());
    let e = (-surface.phi_at(s.x, s.y)).exp();
    let px = surface.phi_d(s.x, s.y, 1, 0);
    let py = surface.phi_d(s.x, s.y, 0, 1);
    let pxx = surface.phi_d(s.x, s.y, 2, 0);
    let pxy = surface.phi_d(s.x, s.y, 1, 1);
    let pyy = surface.phi_d(s.x, s.y, 0, 2);
    let (ex, ey) = (-px * e, -py * e);
    match tag {
        FrameVector::X => {
            let w = -px * st + py * ct;
            [
                [ex * ct, ey * ct, -e * st],
                [ex * st, ey * st, e * ct],
                [
                    ex * w + e * (-pxx * st + pxy * ct),
                    ey * w + e * (-pxy * st + pyy * ct),
                    e * (-px * ct - py * st),
                ],
            ]
        }
        FrameVector::XPerp => {
            let w = px * ct + py * st;
            [
                [ex * st, ey * st, e * ct],
                [-ex * ct, -ey * ct, e * st],
                [
                    ex * w + e * (pxx * ct + pxy * st),
                    ey * w + e * (pxy * ct + pyy * st),
                    e * (-px * st + py * ct),
                ],
            ]
        }
        FrameVector::V => [[0.0; 3]; 3],
    }
}

/// Test function on the circle bundle with exact value and first partials.
pub trait PhaseFunction {
    fn value(&self, s: &PhaseState) -> Complex64;
    /// (d_x u, d_y u, d_theta u).
    fn gradient(&self, s: &PhaseState) -> [Complex64; 3];
}

/// Apply a frame vector field to a test function at s.
pub fn frame_apply(
    surface: &ConformalSurface,
    tag: FrameVector,
    u: &dyn PhaseFunction,
    s: &PhaseState,
) -> Complex64 {
    let coeff = frame_coefficients(surface, tag, s);
    let grad = u.gradient(s);
    grad[0] * coeff[0] + grad[1] * coeff[1] + grad[2] * coeff[2]
}

/// Commutator coefficients of two frame vectors at s; second-order terms
/// cancel by symmetry of mixed partials, so [W1, W2] is again first order:
/// [W1, W2]_j = W1(W2_j) - W2(W1_j).
fn commutator_coefficients(
    surface: &ConformalSurface,
    w1: FrameVector,
    w2: FrameVector,
    s: &PhaseState,
) -> [f64; 3] {
    let c1 = frame_coefficients(surface, w1, s);
    let c2 = frame_coefficients(surface, w2, s);
    let j1 = frame_jacobian(surface, w1, s);
    let j2 = frame_jacobian(surface, w2, s);
    let mut out = [0.0; 3];
    for j in 0..3 {
        let mut acc = 0.0;
        for i in 0..3 {
            acc += c1[i] * j2[j][i] - c2[i] * j1[j][i];
        }
        out[j] = acc;
    }
    out
}

/// Max residuals of the three structure equations evaluated on a test function.
#[derive(Debug, Clone, Copy)]
pub struct StructureResiduals {
    /// max |([X, V] - X_perp) u|
    pub xv: f64,
    /// max |([X_perp, V] + X) u|
    pub xperp_v: f64,
    /// max |([X, X_perp] + K V) u|
    pub x_xperp: f64,
}

impl StructureResiduals {
    pub fn max(&self) -> f64 {
        self.xv.max(self.xperp_v).max(self.x_xperp)
    }
}

/// Evaluate the structure-equation residuals on the given samples.
pub fn check_structure_equations(
    surface: &ConformalSurface,
    u: &dyn PhaseFunction,
    samples: &[PhaseState],
) -> StructureResiduals {
    let mut res = StructureResiduals {
        xv: 0.0,
        xperp_v: 0.0,
        x_xperp: 0.0,
    };
    for s in samples {
        let grad = u.gradient(s);
        let apply = |coeff: [f64; 3]| -> Complex64 {
            grad[0] * coeff[0] + grad[1] * coeff[1] + grad[2] * coeff[2]
        };

        let xv = commutator_coefficients(surface, FrameVector::X, FrameVector::V, s);
        let xperp = frame_coefficients(surface, FrameVector::XPerp, s);
        let r1 = apply([xv[0] - xperp[0], xv[1] - xperp[1], xv[2] - xperp[2]]);

        let xpv = commutator_coefficients(surface, FrameVector::XPerp, FrameVector::V, s);
        let x = frame_coefficients(surface, FrameVector::X, s);
        let r2 = apply([xpv[0] + x[0], xpv[1] + x[1], xpv[2] + x[2]]);

        let xxp = commutator_coefficients(surface, FrameVector::X, FrameVector::XPerp, s);
        let k = surface.gaussian_curvature(s.x, s.y);
        let r3 = apply([xxp[0], xxp[1], xxp[2] + k]);

        res.xv = res.xv.max(r1.norm());
        res.xperp_v = res.xperp_v.max(r2.norm());
        res.x_xperp = res.x_xperp.max(r3.norm());
    }
    res
}

const BOUNDARY_TOL: f64 = 1e-10;

/// Second fundamental form Pi_b(v, v) of the boundary circle with respect to
/// the inward normal; v must be a g-unit tangent to the boundary at b.
///
/// In the conformal chart Pi = e^{-phi} (1/r + (x phi_x + y phi_y)/r), which
/// is independent of the tangential orientation of v.
pub fn second_fundamental_form(
    surface: &ConformalSurface,
    b: [f64; 2],
    v: [f64; 2],
) -> Result<f64> {
    let r = surface.radius();
    let dist = (b[0] * b[0] + b[1] * b[1]).sqrt() - r;
    if dist.abs() > BOUNDARY_TOL {
        return Err(Error::OffBoundary {
            x: b[0],
            y: b[1],
            rho: surface.rho(b[0], b[1]),
        });
    }
    let vnorm = surface.metric_dot(b[0], b[1], v, v);
    if (vnorm - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "v is not g-unit at the boundary: |v|_g^2 = {vnorm}"
        )));
    }
    let radial = (b[0] * v[0] + b[1] * v[1]) / r;
    if radial.abs() > 1e-8 * (1.0 + v[0].abs() + v[1].abs()) {
        return Err(Error::Invalid(format!(
            "v is not tangent to the boundary: <v, x/r> = {radial}"
        )));
    }
    let px = surface.phi_d(b[0], b[1], 1, 0);
    let py = surface.phi_d(b[0], b[1], 0, 1);
    Ok((-surface.phi_at(b[0], b[1])).exp() * (1.0 / r + (b[0] * px + b[1] * py) / r))
}

/// One sampled convexity margin: Pi(v, v) + <lambda(x, v) i v, nu>.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityWitness {
    pub beta: f64,
    pub theta: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvexityReport {
    pub min_margin: f64,
    pub witness: ConvexityWitness,
    pub samples: usize,
}

impl ConvexityReport {
    pub fn certified(&self) -> bool {
        self.min_margin > 0.0
    }
}

/// Sample the strict convexity margin over the boundary for a generator twist
/// lambda given as a chart function (x, y, theta) -> real.
///
/// For the counterclockwise tangent v at boundary angle beta, i v equals the
/// inward normal, so the margin is Pi + lambda; for the clockwise tangent it
/// is Pi - lambda. Positive minimum certifies strict convexity on the sample.
pub fn convexity_report_with(
    surface: &ConformalSurface,
    lambda: &dyn Fn(f64, f64, f64) -> f64,
    n_boundary: usize,
) -> ConvexityReport {
    let n = n_boundary.max(8);
    let mut min_margin = f64::INFINITY;
    let mut witness = ConvexityWitness {
        beta: 0.0,
        theta: 0.0,
        margin: f64::INFINITY,
    };
    for k in 0..n {
        let beta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
        let b = surface.boundary_point(beta);
        let e = (-surface.phi_at(b[0], b[1])).exp();
        let tangent_ccw = [-e * beta.sin(), e * beta.cos()];
        let pi_val = second_fundamental_form(surface, b, tangent_ccw)
            .expect("boundary sample is on the circle");
        for (sign, theta) in [
            (1.0, beta + std::f64::consts::FRAC_PI_2),
            (-1.0, beta - std::f64::consts::FRAC_PI_2),
        ] {
            let margin = pi_val + sign * lambda(b[0], b[1], theta);
            if margin < min_margin {
                min_margin = margin;
                witness = ConvexityWitness { beta, theta, margin };
            }
        }
    }
    ConvexityReport {
        min_margin,
        witness,
        samples: 2 * n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fn3 {
        v: fn(&PhaseState) -> Complex64,
        g: fn(&PhaseState) -> [Complex64; 3],
    }

    impl PhaseFunction for Fn3 {
        fn value(&self, s: &PhaseState) -> Complex64 {
            (self.v)(s)
        }
        fn gradient(&self, s: &PhaseState) -> [Complex64; 3] {
            (self.g)(s)
        }
    }

    fn re(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn sample_states(n: usize, rmax: f64) -> Vec<PhaseState> {
        // Deterministic well-spread interior samples.
        (0..n)
            .map(|k| {
                let t = k as f64 + 0.5;
                let r = rmax * (t / n as f64).sqrt();
                let a = 2.399963229728653 * t; // golden angle
                PhaseState::new(r * a.cos(), r * a.sin(), (1.7 * t) % (2.0 * std::f64::consts::PI))
            })
            .collect()
    }

    #[test]
    fn curvature_flat_is_zero() {
        let s = ConformalSurface::flat_unit();
        assert_eq!(s.gaussian_curvature(0.3, 0.1), 0.0);
    }

    #[test]
    fn curvature_quadratic_phi_matches_laplacian() {
        // phi = c (x^2 + y^2) has Delta phi = 4c, so K(0) = -4c.
        let c = 0.35;
        let phi = PolyField::scalar_real(&[(2, 0, c), (0, 2, c)]);
        let s = ConformalSurface::new(phi, 1.0).unwrap();
        assert!((s.gaussian_curvature(0.0, 0.0) + 4.0 * c).abs() < 1e-14);
        // Oracle away from the origin: K = -e^{-2 phi} * 4c exactly.
        let (x, y) = (0.4, -0.2);
        let want = -(-2.0 * c * (x * x + y * y)).exp() * 4.0 * c;
        assert!((s.gaussian_curvature(x, y) - want).abs() < 1e-14);
    }

    #[test]
    fn curvature_linear_phi_is_zero() {
        let phi = PolyField::scalar_real(&[(1, 0, 0.1)]);
        let s = ConformalSurface::new(phi, 1.0).unwrap();
        assert_eq!(s.gaussian_curvature(0.0, 0.0), 0.0);
    }

    #[test]
    fn frame_apply_examples() {
        let flat = ConformalSurface::flat_unit();
        let ux = Fn3 {
            v: |s| re(s.x),
            g: |_| [re(1.0), re(0.0), re(0.0)],
        };
        let s0 = PhaseState::new(0.0, 0.0, 0.0);
        assert!((frame_apply(&flat, FrameVector::X, &ux, &s0) - re(1.0)).norm() < 1e-15);

        // u independent of theta has V u = 0 on any surface.
        let phi = PolyField::scalar_real(&[(1, 0, 0.2), (0, 2, 0.1)]);
        let curved = ConformalSurface::new(phi, 1.0).unwrap();
        assert_eq!(
            frame_apply(&curved, FrameVector::V, &ux, &PhaseState::new(0.3, -0.2, 1.1)),
            re(0.0)
        );

        // u = theta on a flat disk: X u = 0 (geodesics keep theta constant).
        let utheta = Fn3 {
            v: |s| re(s.theta),
            g: |_| [re(0.0), re(0.0), re(1.0)],
        };
        assert_eq!(
            frame_apply(&flat, FrameVector::X, &utheta, &PhaseState::new(0.2, 0.5, 2.4)),
            re(0.0)
        );
    }

    #[test]
    fn structure_equations_flat_x_sin_theta() {
        let flat = ConformalSurface::flat_unit();
        let u = Fn3 {
            v: |s| re(s.x * s.theta.sin()),
            g: |s| [re(s.theta.sin()), re(0.0), re(s.x * s.theta.cos())],
        };
        let res = check_structure_equations(&flat, &u, &sample_states(100, 0.95));
        assert!(res.max() < 1e-12, "residuals {res:?}");
    }

    #[test]
    fn structure_equations_curved_y_cos_theta() {
        let phi = PolyField::scalar_real(&[(1, 0, 0.2), (0, 2, 0.1)]);
        let surf = ConformalSurface::new(phi, 1.0).unwrap();
        let u = Fn3 {
            v: |s| re(s.y * s.theta.cos()),
            g: |s| [re(0.0), re(s.theta.cos()), re(-s.y * s.theta.sin())],
        };
        let res = check_structure_equations(&surf, &u, &sample_states(100, 0.95));
        assert!(res.max() < 1e-10, "residuals {res:?}");
    }

    #[test]
    fn structure_equations_constant_function() {
        let phi = PolyField::scalar_real(&[(2, 1, 0.15)]);
        let surf = ConformalSurface::new(phi, 1.0).unwrap();
        let u = Fn3 {
            v: |_| re(4.2),
            g: |_| [re(0.0); 3],
        };
        let res = check_structure_equations(&surf, &u, &sample_states(20, 0.9));
        assert_eq!(res.max(), 0.0);
    }

    #[test]
    fn fundamental_form_round_disks() {
        for r in [1.0, 2.0] {
            let s = ConformalSurface::flat(r);
            for beta in [0.0, 1.0, 2.5] {
                let b = s.boundary_point(beta);
                let v = [-beta.sin(), beta.cos()];
                let val = second_fundamental_form(&s, b, v).unwrap();
                assert!((val - 1.0 / r).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fundamental_form_rejects_off_boundary() {
        let s = ConformalSurface::flat_unit();
        let err = second_fundamental_form(&s, [0.5, 0.0], [0.0, 1.0]);
        assert!(matches!(err, Err(Error::OffBoundary { .. })));
    }

    /// Independent oracle: geodesic curvature of the boundary circle by
    /// covariant differentiation of the g-unit tangent field, with the
    /// beta-derivative taken by central differences.
    fn fundamental_form_oracle(surface: &ConformalSurface, beta: f64) -> f64 {
        let r = surface.radius();
        let vfield = |b: f64| -> [f64; 2] {
            let p = surface.boundary_point(b);
            let e = (-surface.phi_at(p[0], p[1])).exp();
            [-e * b.sin(), e * b.cos()]
        };
        let h = 1e-6;
        let vp = vfield(beta + h);
        let vm = vfield(beta - h);
        let dv = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];

        let b = surface.boundary_point(beta);
        let v = vfield(beta);
        let cprime = [-r * beta.sin(), r * beta.cos()];
        let px = surface.phi_d(b[0], b[1], 1, 0);
        let py = surface.phi_d(b[0], b[1], 0, 1);
        // Christoffel contraction Gamma(c', v) for the conformal metric.
        let g1 = px * cprime[0] * v[0] + py * (cprime[0] * v[1] + cprime[1] * v[0])
            - px * cprime[1] * v[1];
        let g2 = -py * cprime[0] * v[0] + px * (cprime[0] * v[1] + cprime[1] * v[0])
            + py * cprime[1] * v[1];
        let dbeta_v = [dv[0] + g1, dv[1] + g2];
        // D_v v = (1/|c'|_g) D_beta v, and nu = e^{-phi} (-cos, -sin).
        let speed = surface.conf(b[0], b[1]) * r;
        let dvv = [dbeta_v[0] / speed, dbeta_v[1] / speed];
        let e = (-surface.phi_at(b[0], b[1])).exp();
        let nu = [-e * beta.cos(), -e * beta.sin()];
        surface.metric_dot(b[0], b[1], dvv, nu)
    }

    #[test]
    fn fundamental_form_matches_curve_curvature_oracle() {
        let phi = PolyField::scalar_real(&[(1, 0, 0.1)]);
        let surf = ConformalSurface::new(phi, 1.0).unwrap();
        for beta in [0.0, 0.7, 2.0, 4.4] {
            let b = surf.boundary_point(beta);
            let e = (-surf.phi_at(b[0], b[1])).exp();
            let v = [-e * beta.sin(), e * beta.cos()];
            let got = second_fundamental_form(&surf, b, v).unwrap();
            let want = fundamental_form_oracle(&surf, beta);
            assert!(
                (got - want).abs() < 1e-6,
                "beta={beta}: got {got}, oracle {want}"
            );
        }
        // Frozen closed-form value at b = (1, 0): e^{-0.1} * (1 + 0.1).
        let got = second_fundamental_form(&surf, [1.0, 0.0], [0.0, (0.1f64).exp().recip()]);
        // v must be g-unit: e^{-phi} (0, 1) with phi(1, 0) = 0.1.
        let e = (-0.1f64).exp();
        let got = got.or_else(|_| second_fundamental_form(&surf, [1.0, 0.0], [0.0, e]));
        assert!((got.unwrap() - e * 1.1).abs() < 1e-12);
    }

    #[test]
    fn convexity_margins_flat_disk() {
        let s = ConformalSurface::flat_unit();
        let zero = |_: f64, _: f64, _: f64| 0.0;
        let r = convexity_report_with(&s, &zero, 64);
        assert!((r.min_margin - 1.0).abs() < 1e-13);

        let half = |_: f64, _: f64, _: f64| 0.5;
        let r = convexity_report_with(&s, &half, 64);
        assert!((r.min_margin - 0.5).abs() < 1e-13);
        assert!(r.certified());

        let big = |_: f64, _: f64, _: f64| 1.5;
        let r = convexity_report_with(&s, &big, 64);
        assert!((r.min_margin + 0.5).abs() < 1e-13);
        assert!(!r.certified());
    }

    #[test]
    fn frame_is_sasaki_orthonormal() {
        let surfaces = [
            ConformalSurface::flat_unit(),
            ConformalSurface::new(PolyField::scalar_real(&[(1, 0, 0.2), (0, 2, 0.1)]), 1.0).unwrap(),
            ConformalSurface::new(PolyField::scalar_real(&[(2, 0, 0.15), (0, 2, 0.15), (1, 1, 0.1)]), 1.3)
                .unwrap(),
        ];
        for surf in &surfaces {
            for s in sample_states(50, 0.9 * surf.radius()) {
                let x = frame_coefficients(surf, FrameVector::X, &s);
                let xp = frame_coefficients(surf, FrameVector::XPerp, &s);
                let v = frame_coefficients(surf, FrameVector::V, &s);
                let mxp = [-xp[0], -xp[1], -xp[2]];
                let frame = [x, mxp, v];
                for i in 0..3 {
                    for j in 0..3 {
                        let g = surf.sasaki_inner(&s, frame[i], frame[j]);
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (g - want).abs() < 1e-12,
                            "Gram[{i}][{j}] = {g} at {s:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn frame_jacobian_matches_finite_differences() {
        let phi = PolyField::scalar_real(&[(2, 0, 0.1), (1, 1, 0.05), (0, 3, 0.02)]);
        let surf = ConformalSurface::new(phi, 1.0).unwrap();
        let s = PhaseState::new(0.3, -0.4, 1.2);
        let h = 1e-6;
        for tag in [FrameVector::X, FrameVector::XPerp] {
            let jac = frame_jacobian(&surf, tag, &s);
            for col in 0..3 {
                let mut sp = s;
                let mut sm = s;
                match col {
                    0 => {
                        sp.x += h;
                        sm.x -= h;
                    }
                    1 => {
                        sp.y += h;
                        sm.y -= h;
                    }
                    _ => {
                        sp.theta += h;
                        sm.theta -= h;
                    }
                }
                let cp = frame_coefficients(&surf, tag, &sp);
                let cm = frame_coefficients(&surf, tag, &sm);
                for row in 0..3 {
                    let fd = (cp[row] - cm[row]) / (2.0 * h);
                    assert!(
                        (jac[row][col] - fd).abs() < 1e-8,
                        "{tag:?} jac[{row}][{col}]"
                    );
                }
            }
        }
    }
}
