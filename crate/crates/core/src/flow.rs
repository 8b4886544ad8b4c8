//! Twisted geodesic flow on the circle bundle of a conformal disk.
//!
//! The generator is X + lambda V; in chart coordinates the flow ODE reads
//!
//!   dx/dt     = e^{-phi} cos theta
//!   dy/dt     = e^{-phi} sin theta
//!   dtheta/dt = e^{-phi} (-phi_x sin theta + phi_y cos theta) + lambda(x, y, theta)
//!
//! Integration is fixed-step RK4; the boundary crossing is located by
//! bisection on the last partial step down to |rho| < 1e-12. Backward exit
//! times integrate the reversed generator -(X + lambda V) as a fresh forward
//! problem, so there is a single integrator code path.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::PolyField;
use crate::geometry::{convexity_report_with, ConformalSurface, ConvexityReport, PhaseState};

/// Boundary hit tolerance for the bisection event location.
pub const BOUNDARY_LOCATE_TOL: f64 = 1e-12;
/// How far a state may sit outside the disk before being rejected.
const OUTSIDE_TOL: f64 = 1e-9;
/// |rho| below which a starting state counts as lying on the boundary.
const ON_BOUNDARY_TOL: f64 = 1e-11;

/// Twist field lambda(x, v) = sum_k c_k(x, y) e^{i k theta} with scalar
/// polynomial mode coefficients. Real-valued: c_{-k} = conj(c_k).
#[derive(Debug, Clone)]
pub struct LambdaField {
    modes: Vec<(i32, PolyField)>,
}

impl LambdaField {
    pub fn zero() -> Self {
        LambdaField { modes: Vec::new() }
    }

    /// Constant magnetic twist.
    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        LambdaField {
            modes: vec![(0, PolyField::scalar_real(&[(0, 0, c)]))],
        }
    }

    /// Magnetic twist lambda = c0(x, y), a real scalar field.
    pub fn magnetic(c0: PolyField) -> Result<Self> {
        Self::from_modes(vec![(0, c0)])
    }

    /// Thermostat twist from the mode +1 coefficient; mode -1 is its conjugate.
    pub fn thermostat(c1: PolyField) -> Result<Self> {
        let c_minus = c1.conj();
        Self::from_modes(vec![(1, c1), (-1, c_minus)])
    }

    /// General finite-degree twist. Checks scalar shapes and real-valuedness
    /// (c_{-k} = conj(c_k)) on a deterministic sample grid.
    pub fn from_modes(modes: Vec<(i32, PolyField)>) -> Result<Self> {
        let mut merged: std::collections::BTreeMap<i32, PolyField> = std::collections::BTreeMap::new();
        for (k, c) in modes {
            if !c.is_scalar() {
                return Err(Error::ShapeMismatch("lambda modes must be scalar fields".into()));
            }
            if c.is_zero() {
                continue;
            }
            match merged.remove(&k) {
                Some(prev) => {
                    merged.insert(k, prev.add(&c)?);
                }
                None => {
                    merged.insert(k, c);
                }
            }
        }
        let field = LambdaField {
            modes: merged.into_iter().collect(),
        };
        // Realness spot check on a fixed grid of base points and angles.
        for (x, y) in [(0.0, 0.0), (0.3, -0.2), (-0.5, 0.4), (0.7, 0.6), (-0.1, -0.8)] {
            for m in 0..8 {
                let theta = 2.0 * std::f64::consts::PI * (m as f64) / 8.0;
                let v = field.eval_complex(x, y, theta);
                if v.im.abs() > 1e-10 * (1.0 + v.re.abs()) {
                    return Err(Error::NotReal {
                        x,
                        y,
                        residual: v.im.abs(),
                    });
                }
            }
        }
        Ok(field)
    }

    pub fn modes(&self) -> &[(i32, PolyField)] {
        &self.modes
    }

    pub fn mode(&self, k: i32) -> Option<&PolyField> {
        self.modes
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, c)| c)
    }

    /// Max |k| carrying a nonzero coefficient.
    pub fn degree(&self) -> i32 {
        self.modes.iter().map(|(k, _)| k.abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn is_magnetic(&self) -> bool {
        self.degree() == 0
    }

    pub fn is_thermostat(&self) -> bool {
        !self.modes.is_empty() && self.modes.iter().all(|(k, _)| k.abs() == 1)
    }

    pub fn eval_complex(&self, x: f64, y: f64, theta: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.modes {
            let ph = Complex64::from_polar(1.0, (*k as f64) * theta);
            acc += c.eval_scalar(x, y) * ph;
        }
        acc
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, theta: f64) -> f64 {
        self.eval_complex(x, y, theta).re
    }

    /// Twist generating the time-reversed curves: lambda~(x, v) = -lambda(x, -v),
    /// i.e. mode k picks up the factor (-1)^{k+1}.
    pub fn reversal_pullback(&self) -> LambdaField {
        let modes = self
            .modes
            .iter()
            .map(|(k, c)| {
                let sign = if k.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
                (*k, c.scale(Complex64::new(sign, 0.0)))
            })
            .collect();
        LambdaField { modes }
    }

    pub fn scale(&self, s: f64) -> LambdaField {
        LambdaField {
            modes: self
                .modes
                .iter()
                .map(|(k, c)| (*k, c.scale(Complex64::new(s, 0.0))))
                .collect(),
        }
    }
}

/// Integrator and sampling parameters. Step and cap defaults scale with the
/// disk diameter.
#[derive(Debug, Clone)]
pub struct Numerics {
    /// RK4 step (default 1e-3 x diameter).
    pub h: f64,
    /// Fiber grid size for decompositions and loop assembly.
    pub n_theta: usize,
    /// Flow finite-difference step.
    pub h_fd: f64,
    /// Trapping detection cap (default 100 x diameter).
    pub time_cap: f64,
    /// Extension margin: outer radius = radius (1 + delta).
    pub delta: f64,
    /// Loop Fourier truncation order.
    pub k_trunc: usize,
    /// Glancing exclusion on |<v, nu>|.
    pub eps_glance: f64,
    /// Fiber grid for flow-displaced loop factorizations (finite differences).
    pub n_theta_fd: usize,
    /// Use every quad_stride-th RK4 trace node as a Simpson node in the
    /// integral-representation quadrature.
    pub quad_stride: usize,
    /// Spectral factorization stopping tolerance on the update norm.
    pub newton_tol: f64,
    /// Spectral factorization iteration cap.
    pub newton_max_iter: usize,
    /// Probe count for nontrapping sweeps.
    pub n_probe: usize,
}

impl Numerics {
    pub fn for_radius(radius: f64) -> Self {
        let diameter = 2.0 * radius;
        Numerics {
            h: 1e-3 * diameter,
            n_theta: 256,
            h_fd: 1e-4,
            time_cap: 100.0 * diameter,
            delta: 0.2,
            k_trunc: 64,
            eps_glance: 1e-3,
            n_theta_fd: 64,
            quad_stride: 8,
            newton_tol: 1e-10,
            newton_max_iter: 200,
            n_probe: 64,
        }
    }
}

/// Complete dynamical setup: surface, twist and numerics.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub surface: ConformalSurface,
    pub lambda: LambdaField,
    pub numerics: Numerics,
}

impl Scenario {
    pub fn new(surface: ConformalSurface, lambda: LambdaField) -> Self {
        let numerics = Numerics::for_radius(surface.radius());
        Scenario {
            surface,
            lambda,
            numerics,
        }
    }

    pub fn flat_unit(lambda: LambdaField) -> Self {
        Self::new(ConformalSurface::flat_unit(), lambda)
    }

    /// Strict convexity margins of the boundary against this twist.
    pub fn convexity_report(&self, n_boundary: usize) -> ConvexityReport {
        let lam = |x: f64, y: f64, th: f64| self.lambda.eval(x, y, th);
        convexity_report_with(&self.surface, &lam, n_boundary)
    }
}

/// Strict convexity margins for a scenario boundary (twist included).
pub fn strict_lambda_convexity_report(scenario: &Scenario, n_boundary: usize) -> ConvexityReport {
    scenario.convexity_report(n_boundary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    /// Integrate X + lambda V.
    Forward,
    /// Integrate -(X + lambda V).
    Backward,
}

impl FlowDirection {
    fn sign(self) -> f64 {
        match self {
            FlowDirection::Forward => 1.0,
            FlowDirection::Backward => -1.0,
        }
    }
}

/// Chart components of the generator X + lambda V at s.
pub fn generator_rhs(scenario: &Scenario, s: &PhaseState) -> [f64; 3] {
    rhs(scenario, s, 1.0)
}

#[inline]
fn rhs(scenario: &Scenario, s: &PhaseState, sign: f64) -> [f64; 3] {
    let surf = &scenario.surface;
    let e = (-surf.phi_at(s.x, s.y)).exp();
    let (ct, st) = (s.theta.cos(), s.theta.sin());
    let px = surf.phi_d(s.x, s.y, 1, 0);
    let py = surf.phi_d(s.x, s.y, 0, 1);
    let lam = scenario.lambda.eval(s.x, s.y, s.theta);
    [
        sign * e * ct,
        sign * e * st,
        sign * (e * (-px * st + py * ct) + lam),
    ]
}

#[inline]
fn rk4_step(scenario: &Scenario, s: &PhaseState, h: f64, sign: f64) -> PhaseState {
    let k1 = rhs(scenario, s, sign);
    let s2 = advance(s, &k1, 0.5 * h);
    let k2 = rhs(scenario, &s2, sign);
    let s3 = advance(s, &k2, 0.5 * h);
    let k3 = rhs(scenario, &s3, sign);
    let s4 = advance(s, &k3, h);
    let k4 = rhs(scenario, &s4, sign);
    PhaseState {
        x: s.x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y: s.y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        theta: s.theta + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    }
}

#[inline]
fn advance(s: &PhaseState, k: &[f64; 3], dt: f64) -> PhaseState {
    PhaseState {
        x: s.x + dt * k[0],
        y: s.y + dt * k[1],
        theta: s.theta + dt * k[2],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceExit {
    /// Reached the boundary circle at the recorded final time.
    Boundary,
    /// Hit the time cap without exiting.
    Capped,
}

/// Time-sampled orbit with exit metadata. For a forward trace the final time
/// is tau^+; for a backward trace it is tau^-.
#[derive(Debug, Clone)]
pub struct CurveTrace {
    pub samples: Vec<(f64, PhaseState)>,
    pub exit: TraceExit,
    pub direction: FlowDirection,
}

impl CurveTrace {
    pub fn exit_time(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }

    pub fn end_state(&self) -> PhaseState {
        self.samples.last().expect("nonempty trace").1
    }
}

fn drho_dt(scenario: &Scenario, s: &PhaseState, sign: f64) -> f64 {
    let k = rhs(scenario, s, sign);
    -2.0 * (s.x * k[0] + s.y * k[1])
}

fn integrate_core(
    scenario: &Scenario,
    s0: &PhaseState,
    t_max: f64,
    h: f64,
    dir: FlowDirection,
    mut sink: Option<&mut Vec<(f64, PhaseState)>>,
) -> Result<(f64, PhaseState, TraceExit)> {
    let surf = &scenario.surface;
    let sign = dir.sign();
    let rho0 = surf.rho(s0.x, s0.y);
    if rho0 < -OUTSIDE_TOL {
        return Err(Error::OutsideManifold {
            x: s0.x,
            y: s0.y,
            rho: rho0,
        });
    }
    if let Some(v) = sink.as_deref_mut() {
        v.push((0.0, *s0));
    }
    // A boundary start that moves outward exits immediately.
    if rho0 <= ON_BOUNDARY_TOL && drho_dt(scenario, s0, sign) < 0.0 {
        return Ok((0.0, *s0, TraceExit::Boundary));
    }

    let mut t = 0.0;
    let mut s = *s0;
    let max_steps = (t_max / h).ceil() as usize + 2;
    for _ in 0..max_steps {
        if t >= t_max {
            return Ok((t, s, TraceExit::Capped));
        }
        let s_next = rk4_step(scenario, &s, h, sign);
        if surf.rho(s_next.x, s_next.y) < 0.0 {
            let (dt, s_exit) = locate_boundary(scenario, &s, h, sign);
            let t_exit = t + dt;
            if let Some(v) = sink.as_deref_mut() {
                v.push((t_exit, s_exit));
            }
            return Ok((t_exit, s_exit, TraceExit::Boundary));
        }
        t += h;
        s = s_next;
        if let Some(v) = sink.as_deref_mut() {
            v.push((t, s));
        }
    }
    Ok((t, s, TraceExit::Capped))
}

/// Bisect the step fraction of the boundary-crossing RK4 step.
fn locate_boundary(scenario: &Scenario, s: &PhaseState, h: f64, sign: f64) -> (f64, PhaseState) {
    let surf = &scenario.surface;
    let mut lo = 0.0;
    let mut hi = h;
    let mut best = rk4_step(scenario, s, hi, sign);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let cand = rk4_step(scenario, s, mid, sign);
        let r = surf.rho(cand.x, cand.y);
        if r.abs() < BOUNDARY_LOCATE_TOL {
            return (mid, cand);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            best = cand;
        }
    }
    (hi, best)
}

/// Integrate the flow from s0 until boundary exit; errors with CapReached if
/// the orbit does not leave within t_max.
pub fn integrate_flow(
    scenario: &Scenario,
    s0: &PhaseState,
    t_max: f64,
    h: f64,
    dir: FlowDirection,
) -> Result<CurveTrace> {
    let mut samples = Vec::new();
    let (_, _, exit) = integrate_core(scenario, s0, t_max, h, dir, Some(&mut samples))?;
    match exit {
        TraceExit::Boundary => Ok(CurveTrace {
            samples,
            exit,
            direction: dir,
        }),
        TraceExit::Capped => Err(Error::CapReached {
            x: s0.x,
            y: s0.y,
            theta: s0.theta,
            cap: t_max,
        }),
    }
}

/// Like `integrate_flow` but capping is reported in the trace instead of
/// erroring; used by trapping probes.
pub fn integrate_flow_capped(
    scenario: &Scenario,
    s0: &PhaseState,
    t_max: f64,
    h: f64,
    dir: FlowDirection,
) -> Result<CurveTrace> {
    let mut samples = Vec::new();
    let (_, _, exit) = integrate_core(scenario, s0, t_max, h, dir, Some(&mut samples))?;
    Ok(CurveTrace {
        samples,
        exit,
        direction: dir,
    })
}

/// Exit time and exit state without storing the trace.
pub fn exit_event(scenario: &Scenario, s: &PhaseState, dir: FlowDirection) -> Result<(f64, PhaseState)> {
    let (tau, end, exit) = integrate_core(
        scenario,
        s,
        scenario.numerics.time_cap,
        scenario.numerics.h,
        dir,
        None,
    )?;
    match exit {
        TraceExit::Boundary => Ok((tau, end)),
        TraceExit::Capped => Err(Error::CapReached {
            x: s.x,
            y: s.y,
            theta: s.theta,
            cap: scenario.numerics.time_cap,
        }),
    }
}

/// Forward and backward exit times (tau^+, tau^-).
pub fn exit_times(scenario: &Scenario, s: &PhaseState) -> Result<(f64, f64)> {
    let (tp, _) = exit_event(scenario, s, FlowDirection::Forward)?;
    let (tm, _) = exit_event(scenario, s, FlowDirection::Backward)?;
    Ok((tp, tm))
}

/// Flow displacement phi_t(s) for |t| that keeps the orbit inside the disk;
/// integrates with uniform substeps of size at most the scenario step.
pub fn flow_point(scenario: &Scenario, s: &PhaseState, t: f64) -> Result<PhaseState> {
    if t == 0.0 {
        return Ok(*s);
    }
    let dir = if t > 0.0 {
        FlowDirection::Forward
    } else {
        FlowDirection::Backward
    };
    let total = t.abs();
    let n = (total / scenario.numerics.h).ceil().max(1.0) as usize;
    let dt = total / n as f64;
    let sign = dir.sign();
    let mut cur = *s;
    for k in 0..n {
        cur = rk4_step(scenario, &cur, dt, sign);
        let rho = scenario.surface.rho(cur.x, cur.y);
        if rho < -OUTSIDE_TOL {
            return Err(Error::LeftManifold {
                t: (k + 1) as f64 * dt * sign,
                x: cur.x,
                y: cur.y,
            });
        }
    }
    Ok(cur)
}

/// Reject glancing boundary states: |<v, nu>| must exceed eps_glance.
pub fn require_non_glancing(scenario: &Scenario, s: &PhaseState) -> Result<f64> {
    let inner = scenario.surface.boundary_inner(s);
    if inner.abs() <= scenario.numerics.eps_glance {
        return Err(Error::GlancingRay {
            x: s.x,
            y: s.y,
            theta: s.theta,
            inner,
        });
    }
    Ok(inner)
}

/// Validate an influx boundary state (on the circle, inward, non-glancing).
pub fn require_influx(scenario: &Scenario, s: &PhaseState) -> Result<()> {
    let rho = scenario.surface.rho(s.x, s.y);
    if rho.abs() > 1e-8 * scenario.surface.radius() {
        return Err(Error::OffBoundary { x: s.x, y: s.y, rho });
    }
    let inner = require_non_glancing(scenario, s)?;
    if inner < 0.0 {
        return Err(Error::Invalid(format!(
            "state points outward (<v, nu> = {inner:.3e}); expected an influx state"
        )));
    }
    Ok(())
}

/// The scattering relation alpha(s) = phi_{tau~}(s) with tau~ = tau^+ - tau^-.
/// Maps influx states to outflux states and conversely.
pub fn scattering_relation(scenario: &Scenario, s: &PhaseState) -> Result<PhaseState> {
    let rho = scenario.surface.rho(s.x, s.y);
    if rho.abs() > 1e-8 * scenario.surface.radius() {
        return Err(Error::OffBoundary { x: s.x, y: s.y, rho });
    }
    let inner = require_non_glancing(scenario, s)?;
    let dir = if inner > 0.0 {
        FlowDirection::Forward
    } else {
        FlowDirection::Backward
    };
    let (_, end) = exit_event(scenario, s, dir)?;
    Ok(end)
}

/// Per-state nontrapping certificate values.
#[derive(Debug, Clone)]
pub struct NontrappingReport {
    /// max |(X + lambda V)(-tau~) - 2| over the fan
    pub max_deviation: f64,
    pub worst_state: PhaseState,
    pub states: usize,
}

fn tau_tilde(scenario: &Scenario, s: &PhaseState) -> Result<f64> {
    let (tp, tm) = exit_times(scenario, s)?;
    Ok(tp - tm)
}

/// Central finite difference of -tau~ along the flow; the exact value is 2.
pub fn nontrapping_certificate(
    scenario: &Scenario,
    fan: &[PhaseState],
    h_fd: f64,
) -> Result<NontrappingReport> {
    let mut max_deviation: f64 = 0.0;
    let mut worst = fan.first().copied().unwrap_or(PhaseState::new(0.0, 0.0, 0.0));
    for s in fan {
        let sp = flow_point(scenario, s, h_fd)?;
        let sm = flow_point(scenario, s, -h_fd)?;
        let value = -(tau_tilde(scenario, &sp)? - tau_tilde(scenario, &sm)?) / (2.0 * h_fd);
        let dev = (value - 2.0).abs();
        if dev > max_deviation {
            max_deviation = dev;
            worst = *s;
        }
    }
    Ok(NontrappingReport {
        max_deviation,
        worst_state: worst,
        states: fan.len(),
    })
}

/// Certification data of a strictly convex nontrapping extension.
#[derive(Debug, Clone)]
pub struct ExtensionReport {
    pub convexity: ConvexityReport,
    pub probes: usize,
    pub max_probe_time: f64,
}

/// Scenario together with a certified engulfing disk.
#[derive(Debug, Clone)]
pub struct ExtendedScenario {
    pub inner: Scenario,
    pub outer: Scenario,
    pub delta: f64,
    pub report: ExtensionReport,
}

/// Deterministic interior probe states spread by golden-angle sampling.
pub fn probe_states(surface: &ConformalSurface, n: usize, radial_fill: f64) -> Vec<PhaseState> {
    let golden = 2.399963229728653;
    (0..n)
        .map(|k| {
            let t = k as f64 + 0.5;
            let r = surface.radius() * radial_fill * (t / n as f64).sqrt();
            let a = golden * t;
            PhaseState::new(r * a.cos(), r * a.sin(), (golden * 1.7 * t) % (2.0 * std::f64::consts::PI))
        })
        .collect()
}

/// Enlarge the disk to radius (1 + delta), keeping the same field expressions,
/// and certify strict convexity plus a nontrapping probe sweep on the result.
pub fn extend_scenario(
    scenario: &Scenario,
    delta: f64,
    time_cap: f64,
    n_probe: usize,
) -> Result<ExtendedScenario> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    let outer_surface = scenario.surface.enlarged(delta)?;
    let mut numerics = scenario.numerics.clone();
    numerics.time_cap = time_cap;
    let outer = Scenario {
        surface: outer_surface,
        lambda: scenario.lambda.clone(),
        numerics,
    };

    let convexity = outer.convexity_report(256);
    if !convexity.certified() {
        return Err(Error::ExtensionNotConvex {
            margin: convexity.min_margin,
            beta: convexity.witness.beta,
            theta: convexity.witness.theta,
        });
    }

    let mut max_probe_time: f64 = 0.0;
    for s in probe_states(&outer.surface, n_probe, 0.95) {
        let trace = integrate_flow_capped(&outer, &s, time_cap, outer.numerics.h, FlowDirection::Forward)?;
        if trace.exit == TraceExit::Capped {
            return Err(Error::ExtensionTrapped {
                x: s.x,
                y: s.y,
                theta: s.theta,
                cap: time_cap,
            });
        }
        max_probe_time = max_probe_time.max(trace.exit_time());
    }

    Ok(ExtendedScenario {
        inner: scenario.clone(),
        outer,
        delta,
        report: ExtensionReport {
            convexity,
            probes: n_probe,
            max_probe_time,
        },
    })
}

impl ExtendedScenario {
    /// Extend with the scenario's default margin, cap and probe count.
    pub fn with_defaults(scenario: &Scenario) -> Result<Self> {
        extend_scenario(
            scenario,
            scenario.numerics.delta,
            scenario.numerics.time_cap,
            scenario.numerics.n_probe,
        )
    }
}

/// Influx fan: n_beta boundary angles x n_alpha inward directions, with the
/// direction offset alpha from the inward normal kept away from glancing.
pub fn influx_fan(scenario: &Scenario, n_beta: usize, n_alpha: usize, alpha_margin: f64) -> Vec<PhaseState> {
    let r = scenario.surface.radius();
    let alpha_max = std::f64::consts::FRAC_PI_2 - alpha_margin.max(scenario.numerics.eps_glance);
    let mut fan = Vec::with_capacity(n_beta * n_alpha);
    for i in 0..n_beta {
        let beta = 2.0 * std::f64::consts::PI * (i as f64) / (n_beta as f64);
        for j in 0..n_alpha {
            let alpha = -alpha_max + 2.0 * alpha_max * ((j as f64 + 0.5) / n_alpha as f64);
            fan.push(PhaseState::new(
                r * beta.cos(),
                r * beta.sin(),
                beta + std::f64::consts::PI + alpha,
            ));
        }
    }
    fan
}

/// State payload co-integrated along a ray (matrix or vector ODE right-hand
/// side evaluated on the moving phase point).
pub trait RayPayload {
    fn rhs(&mut self, s: &PhaseState, z: &DVector<Complex64>, out: &mut DVector<Complex64>);
}

pub struct CoIntegration {
    pub end_state: PhaseState,
    pub end_z: DVector<Complex64>,
}

/// RK4 on the combined state (base point, payload) with n uniform steps over
/// [0, total_t]. The base flow does not depend on the payload, so stage base
/// states are shared. `on_node` observes every node including the start.
pub fn integrate_with_payload(
    scenario: &Scenario,
    start: &PhaseState,
    dir: FlowDirection,
    total_t: f64,
    n_steps: usize,
    z0: DVector<Complex64>,
    payload: &mut dyn RayPayload,
    mut on_node: Option<&mut dyn FnMut(usize, f64, &PhaseState, &DVector<Complex64>)>,
    containment_tol: Option<f64>,
) -> Result<CoIntegration> {
    let sign = dir.sign();
    let n = n_steps.max(1);
    let h = total_t / n as f64;
    let dim = z0.len();
    let mut s = *start;
    let mut z = z0;
    let mut k1 = DVector::zeros(dim);
    let mut k2 = DVector::zeros(dim);
    let mut k3 = DVector::zeros(dim);
    let mut k4 = DVector::zeros(dim);
    let mut ztmp = DVector::zeros(dim);

    if let Some(cb) = on_node.as_deref_mut() {
        cb(0, 0.0, &s, &z);
    }
    for step in 0..n {
        let b1 = rhs(scenario, &s, sign);
        payload.rhs(&s, &z, &mut k1);

        let s2 = advance(&s, &b1, 0.5 * h);
        let b2 = rhs(scenario, &s2, sign);
        ztmp.copy_from(&z);
        ztmp.axpy(Complex64::new(0.5 * h, 0.0), &k1, Complex64::new(1.0, 0.0));
        payload.rhs(&s2, &ztmp, &mut k2);

        let s3 = advance(&s, &b2, 0.5 * h);
        let b3 = rhs(scenario, &s3, sign);
        ztmp.copy_from(&z);
        ztmp.axpy(Complex64::new(0.5 * h, 0.0), &k2, Complex64::new(1.0, 0.0));
        payload.rhs(&s3, &ztmp, &mut k3);

        let s4 = advance(&s, &b3, h);
        let b4 = rhs(scenario, &s4, sign);
        ztmp.copy_from(&z);
        ztmp.axpy(Complex64::new(h, 0.0), &k3, Complex64::new(1.0, 0.0));
        payload.rhs(&s4, &ztmp, &mut k4);

        s = PhaseState {
            x: s.x + h / 6.0 * (b1[0] + 2.0 * b2[0] + 2.0 * b3[0] + b4[0]),
            y: s.y + h / 6.0 * (b1[1] + 2.0 * b2[1] + 2.0 * b3[1] + b4[1]),
            theta: s.theta + h / 6.0 * (b1[2] + 2.0 * b2[2] + 2.0 * b3[2] + b4[2]),
        };
        let w = Complex64::new(h / 6.0, 0.0);
        z.axpy(w, &k1, Complex64::new(1.0, 0.0));
        z.axpy(w * 2.0, &k2, Complex64::new(1.0, 0.0));
        z.axpy(w * 2.0, &k3, Complex64::new(1.0, 0.0));
        z.axpy(w, &k4, Complex64::new(1.0, 0.0));

        let t = (step + 1) as f64 * h;
        if let Some(tol) = containment_tol {
            let rho = scenario.surface.rho(s.x, s.y);
            if rho < -tol {
                return Err(Error::LeftManifold {
                    t: sign * t,
                    x: s.x,
                    y: s.y,
                });
            }
        }
        if let Some(cb) = on_node.as_deref_mut() {
            cb(step + 1, t, &s, &z);
        }
    }
    Ok(CoIntegration {
        end_state: s,
        end_z: z,
    })
}

/// Even step count close to tau/h for Simpson-compatible resampling.
pub fn even_steps(tau: f64, h: f64) -> usize {
    let n = (tau / h).ceil() as usize;
    let n = n.max(2);
    if n % 2 == 0 {
        n
    } else {
        n + 1
    }
}
