//! Linear stability of periodic orbits through the impact-to-impact maps.
//!
//! Each flight leg maps `(t_l, Ż_l)` to `(t_{l+1}, Ż_{l+1})`, where the
//! velocities are pre-impact values. The leg Jacobian follows from implicit
//! differentiation of the position equation; the return map of a periodic
//! orbit is the product of its leg Jacobians, last leg on the left.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::{map_residual, next_impact, ImpactEvent, MapKind, Side};
use crate::model::{Forcing, SystemParams};
use crate::solver::{Orbit21, SolvedOrbit};

/// Below this magnitude the arrival velocity of a leg is treated as zero.
pub const GRAZING_DENOMINATOR_EPS: f64 = 1e-12;
/// Eigenvalue moduli this close to one are reported as marginal.
pub const MARGINAL_MODULUS_TOL: f64 = 1e-8;
/// Discriminants this close to zero are reported as marginal.
pub const MARGINAL_DELTA_TOL: f64 = 1e-12;
/// Perturbation used by the finite-difference leg Jacobian.
pub const FD_LEG_STEP: f64 = 1e-6;

/// One flight between consecutive impacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub kind: MapKind,
    pub t0: f64,
    /// Pre-impact velocity at the departure impact.
    pub v0: f64,
    pub t1: f64,
    /// Pre-impact velocity at the arrival impact.
    pub v1: f64,
}

impl Leg {
    pub fn between(a: &ImpactEvent, b: &ImpactEvent) -> Self {
        Self {
            kind: MapKind::between(a.side, b.side),
            t0: a.t,
            v0: a.v_pre,
            t1: b.t,
            v1: b.v_pre,
        }
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    fn sides(&self) -> (Side, Side) {
        match self.kind {
            MapKind::P1 => (Side::Bottom, Side::Bottom),
            MapKind::P2 => (Side::Bottom, Side::Top),
            MapKind::P3 => (Side::Top, Side::Bottom),
            MapKind::P4 => (Side::Top, Side::Top),
        }
    }

    /// Largest absolute residual of the leg's map equations.
    pub fn residual<F: Forcing>(&self, params: &SystemParams, forcing: &F) -> f64 {
        let (a, b) = map_residual(
            self.kind, self.t0, self.v0, self.t1, self.v1, params, forcing,
        );
        a.abs().max(b.abs())
    }
}

/// Legs of one period of a solved orbit, in the orbit's own frame.
pub fn orbit_legs(orbit: &SolvedOrbit) -> Vec<Leg> {
    orbit
        .impacts()
        .windows(2)
        .map(|w| Leg::between(&w[0], &w[1]))
        .collect()
}

/// Jacobian of `(t_l, Ż_l) ↦ (t_{l+1}, Ż_{l+1})` for one leg.
pub fn jacobian_single<F: Forcing>(
    leg: &Leg,
    params: &SystemParams,
    forcing: &F,
) -> Result<Matrix2<f64>> {
    let r = params.r;
    let g = params.gbar;
    let big_t = leg.duration();
    let den = r * leg.v0 - g * big_t - forcing.f1(leg.t1) + forcing.f1(leg.t0);
    if den.abs() < GRAZING_DENOMINATOR_EPS {
        return Err(Error::GrazingSingularity {
            t: leg.t1,
            velocity: -den,
        });
    }
    let dt_dt = (r * leg.v0 - g * big_t - forcing.f(leg.t0) * big_t) / den;
    let dt_dv = -r * big_t / den;
    let acc1 = forcing.f(leg.t1) + g;
    let acc0 = forcing.f(leg.t0) + g;
    let dv_dt = dt_dt * acc1 - acc0;
    let dv_dv = -r + dt_dv * acc1;
    Ok(Matrix2::new(dt_dt, dt_dv, dv_dt, dv_dv))
}

/// The leg map evaluated by event location: starting from an impact at `t`
/// with pre-impact velocity `v` on the leg's departure barrier, returns the
/// time and pre-impact velocity of the next impact.
pub fn simulated_leg_map<F: Forcing>(
    leg: &Leg,
    t: f64,
    v: f64,
    params: &SystemParams,
    forcing: &F,
) -> Result<(f64, f64)> {
    let (from, to) = leg.sides();
    let start = ImpactEvent::new(t, from, v, params);
    let horizon = t + 2.0 * leg.duration() + 1.0;
    let next = next_impact(&start, params, forcing, horizon)?;
    if next.side != to {
        return Err(Error::Domain(format!(
            "perturbed leg arrived at {} instead of {}",
            next.side.label(),
            to.label()
        )));
    }
    Ok((next.t, next.v_pre))
}

/// Central finite-difference Jacobian of [`simulated_leg_map`].
pub fn fd_leg_jacobian<F: Forcing>(
    leg: &Leg,
    params: &SystemParams,
    forcing: &F,
    h: f64,
) -> Result<Matrix2<f64>> {
    let map = |t: f64, v: f64| simulated_leg_map(leg, t, v, params, forcing);
    let (tp, vp) = map(leg.t0 + h, leg.v0)?;
    let (tm, vm) = map(leg.t0 - h, leg.v0)?;
    let (tq, vq) = map(leg.t0, leg.v0 + h)?;
    let (tr, vr) = map(leg.t0, leg.v0 - h)?;
    let s = 2.0 * h;
    Ok(Matrix2::new(
        (tp - tm) / s,
        (tq - tr) / s,
        (vp - vm) / s,
        (vq - vr) / s,
    ))
}

/// Linear stability class of a fixed point of a planar map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabilityClass {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Marginal,
}

impl StabilityClass {
    pub fn is_stable(self) -> bool {
        matches!(
            self,
            StabilityClass::StableNode | StabilityClass::StableFocus
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            StabilityClass::StableNode => "stable-node",
            StabilityClass::StableFocus => "stable-focus",
            StabilityClass::UnstableNode => "unstable-node",
            StabilityClass::UnstableFocus => "unstable-focus",
            StabilityClass::Marginal => "marginal",
        }
    }
}

/// Composed Jacobian and its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Row-major product of the leg Jacobians.
    pub dp: [[f64; 2]; 2],
    pub trace: f64,
    pub det: f64,
    pub delta: f64,
    /// Real parts, larger first for real pairs.
    pub lambda_re: [f64; 2],
    pub lambda_im: [f64; 2],
    pub class: StabilityClass,
}

impl StabilityReport {
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        let trace = m.trace();
        let det = m.determinant();
        let (lambda_re, lambda_im, delta) = eigenvalues(trace, det);
        Self {
            dp: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
            trace,
            det,
            delta,
            lambda_re,
            lambda_im,
            class: classify(trace, det),
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.dp[0][0], self.dp[0][1], self.dp[1][0], self.dp[1][1])
    }

    pub fn moduli(&self) -> [f64; 2] {
        [0, 1].map(|i| self.lambda_re[i].hypot(self.lambda_im[i]))
    }

    pub fn spectral_radius(&self) -> f64 {
        let [a, b] = self.moduli();
        a.max(b)
    }

    /// Smallest real eigenvalue, or `None` for a complex pair.
    pub fn lambda_min(&self) -> Option<f64> {
        (self.delta >= 0.0).then(|| self.lambda_re[1])
    }

    pub fn is_stable(&self) -> bool {
        self.class.is_stable()
    }
}

/// Eigenvalues `(Tr ± √Δ)/2` with `Δ = Tr² − 4 Det`.
pub fn eigenvalues(trace: f64, det: f64) -> ([f64; 2], [f64; 2], f64) {
    let delta = trace * trace - 4.0 * det;
    if delta >= 0.0 {
        let s = delta.sqrt();
        ([(trace + s) / 2.0, (trace - s) / 2.0], [0.0, 0.0], delta)
    } else {
        let s = (-delta).sqrt();
        ([trace / 2.0, trace / 2.0], [s / 2.0, -s / 2.0], delta)
    }
}

/// Node/focus and stable/unstable classification from trace and determinant.
pub fn classify(trace: f64, det: f64) -> StabilityClass {
    let (re, im, delta) = eigenvalues(trace, det);
    let moduli = [0, 1].map(|i| re[i].hypot(im[i]));
    if delta.abs() < MARGINAL_DELTA_TOL
        || moduli
            .iter()
            .any(|m| (m - 1.0).abs() < MARGINAL_MODULUS_TOL)
    {
        return StabilityClass::Marginal;
    }
    let stable = moduli.iter().all(|m| *m < 1.0);
    match (delta > 0.0, stable) {
        (true, true) => StabilityClass::StableNode,
        (false, true) => StabilityClass::StableFocus,
        (true, false) => StabilityClass::UnstableNode,
        (false, false) => StabilityClass::UnstableFocus,
    }
}

/// Leg Jacobians of a solved orbit in leg order.
pub fn leg_jacobians<F: Forcing>(orbit: &SolvedOrbit, forcing: &F) -> Result<Vec<Matrix2<f64>>> {
    let params = orbit.params();
    let fc = forcing.with_phase(params.phi);
    orbit_legs(orbit)
        .iter()
        .map(|leg| jacobian_single(leg, &params, &fc))
        .collect()
}

/// Product of matrices applied in order: the last one ends up leftmost.
pub fn compose(legs: &[Matrix2<f64>]) -> Matrix2<f64> {
    legs.iter().fold(Matrix2::identity(), |acc, m| m * acc)
}

/// Stability of a solved 1:1 or 2:1 orbit.
pub fn compose_dp<F: Forcing>(orbit: &SolvedOrbit, forcing: &F) -> Result<StabilityReport> {
    let legs = leg_jacobians(orbit, forcing)?;
    Ok(StabilityReport::from_matrix(&compose(&legs)))
}

/// The closed-form trace expression for 2:1 orbits, evaluated as printed.
///
/// The denominator equals minus the closing pre-impact velocity, so the
/// expression reduces to `r⁶`, which is the determinant of the composed
/// map rather than its trace. [`trace_check`] reports the comparison.
pub fn trace_closed_form<F: Forcing>(orbit: &Orbit21, forcing: &F) -> f64 {
    let fc = forcing.with_phase(orbit.phi_k);
    let r = orbit.r;
    let g = orbit.gbar;
    let [t1_len, t2_len, t3_len] = orbit.intervals();
    let t = [0.0, t1_len, t1_len + t2_len, 2.0];
    let f1 = t.map(|x| fc.f1(x));
    let sigma1 = r.powi(3) * orbit.v_k - g * t3_len + r * g * t2_len - r * r * g * t1_len;
    let den = f1[2] - f1[3] - r * f1[1] + r * f1[2] + r * r * f1[0] - r * r * f1[1] + sigma1;
    -r.powi(6) * orbit.v_k / den
}

/// Comparison of the closed-form expression with the composed map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub matrix_trace: f64,
    pub matrix_det: f64,
    pub closed_form: f64,
    pub trace_rel_error: f64,
    pub det_rel_error: f64,
}

impl TraceCheck {
    pub fn trace_matches(&self, tol: f64) -> bool {
        self.trace_rel_error <= tol
    }

    pub fn det_matches(&self, tol: f64) -> bool {
        self.det_rel_error <= tol
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn trace_check<F: Forcing>(orbit: &Orbit21, forcing: &F) -> Result<TraceCheck> {
    let report = compose_dp(&SolvedOrbit::TwoOne(orbit.clone()), forcing)?;
    let closed_form = trace_closed_form(orbit, forcing);
    Ok(TraceCheck {
        matrix_trace: report.trace,
        matrix_det: report.det,
        closed_form,
        trace_rel_error: rel_err(closed_form, report.trace),
        det_rel_error: rel_err(closed_form, report.det),
    })
}

/// Kind of a critical point along a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalKind {
    /// A real eigenvalue crosses −1.
    PeriodDoubling,
    /// The discriminant changes sign; numbered along the branch from 1.
    Inflection(u32),
    /// Loss of physical validity, the analytic signature of grazing.
    GrazingProxy,
}

impl CriticalKind {
    pub fn label(&self) -> String {
        match self {
            CriticalKind::PeriodDoubling => "B".into(),
            CriticalKind::Inflection(j) => format!("A{j}"),
            CriticalKind::GrazingProxy => "G".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointTag {
    pub kind: CriticalKind,
    pub d: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cosine_forcing, NoForcing};
    use crate::solver::{cold_start_2to1, solve_2to1_lenient, SolveOptions};

    const GBAR_30: f64 = 0.1245 * 9.8 * 0.5 / 5.0;

    fn orbit(d: f64) -> Orbit21 {
        let p = SystemParams::new(0.5, d, GBAR_30, 0.0).unwrap();
        cold_start_2to1(&p, &cosine_forcing(0.0), &SolveOptions::default())
            .into_iter()
            .find(|o| o.valid)
            .unwrap()
    }

    fn rel_matrix_err(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn analytic_leg_jacobians_match_finite_differences() {
        let o = SolvedOrbit::TwoOne(orbit(0.17));
        let params = o.params();
        let f = cosine_forcing(params.phi);
        for leg in orbit_legs(&o) {
            let a = jacobian_single(&leg, &params, &f).unwrap();
            let n = fd_leg_jacobian(&leg, &params, &f, FD_LEG_STEP).unwrap();
            assert!(rel_matrix_err(&a, &n) < 1e-5, "{:?}: {a} vs {n}", leg.kind);
        }
    }

    #[test]
    fn force_free_velocity_derivative_is_minus_r() {
        let p = SystemParams::new(0.5, 0.2, 0.0, 0.0).unwrap();
        let leg = Leg {
            kind: MapKind::P3,
            t0: 0.0,
            v0: -0.4,
            t1: 1.0,
            v1: 0.2,
        };
        let j = jacobian_single(&leg, &p, &NoForcing::default()).unwrap();
        assert_eq!(j[(1, 1)], -0.5);
    }

    #[test]
    fn grazing_leg_is_singular() {
        let p = SystemParams::new(0.5, 0.2, 0.0, 0.0).unwrap();
        let leg = Leg {
            kind: MapKind::P1,
            t0: 0.0,
            v0: 0.0,
            t1: 1.0,
            v1: 0.0,
        };
        assert!(matches!(
            jacobian_single(&leg, &p, &NoForcing::default()),
            Err(Error::GrazingSingularity { .. })
        ));
    }

    #[test]
    fn determinant_is_product_of_leg_determinants() {
        let o = SolvedOrbit::TwoOne(orbit(0.18));
        let legs = leg_jacobians(&o, &cosine_forcing(0.0)).unwrap();
        let product: f64 = legs.iter().map(|m| m.determinant()).product();
        let report = compose_dp(&o, &cosine_forcing(0.0)).unwrap();
        assert!((report.det - product).abs() < 1e-10);
        assert!((report.det - 0.5f64.powi(6)).abs() < 1e-10);
    }

    #[test]
    fn spectrum_is_invariant_under_cyclic_reordering() {
        let o = SolvedOrbit::TwoOne(orbit(0.18));
        let legs = leg_jacobians(&o, &cosine_forcing(0.0)).unwrap();
        let base = StabilityReport::from_matrix(&compose(&legs));
        for shift in 1..3 {
            let mut rotated = legs.clone();
            rotated.rotate_left(shift);
            let other = StabilityReport::from_matrix(&compose(&rotated));
            assert!((other.trace - base.trace).abs() < 1e-10);
            assert!((other.det - base.det).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_reproduce_trace_and_determinant() {
        for (tr, det) in [(0.3, 0.015625), (-1.3, 0.2), (2.5, 1.0), (0.0, -0.4)] {
            let (re, im, _) = eigenvalues(tr, det);
            let sum = re[0] + re[1];
            let prod_re = re[0] * re[1] - im[0] * im[1];
            assert!((sum - tr).abs() < 1e-10 && (prod_re - det).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_pair_modulus_is_root_of_determinant() {
        let (re, im, delta) = eigenvalues(0.1, 0.5);
        assert!(delta < 0.0);
        assert!((re[0].hypot(im[0]) - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn classification_table() {
        // λ = (−1.2, −0.3)
        assert_eq!(classify(-1.5, 0.36), StabilityClass::UnstableNode);
        // complex pair of modulus 0.7
        assert_eq!(classify(0.2, 0.49), StabilityClass::StableFocus);
        // λ = (−1, −0.25)
        assert_eq!(classify(-1.25, 0.25), StabilityClass::Marginal);
        // λ = (0.5, 0.2)
        assert_eq!(classify(0.7, 0.1), StabilityClass::StableNode);
        assert_eq!(classify(0.0, 1.5), StabilityClass::UnstableFocus);
    }

    #[test]
    fn below_period_doubling_an_eigenvalue_is_below_minus_one() {
        let seed = orbit(0.14);
        let p = SystemParams::new(0.5, 0.13, GBAR_30, 0.0).unwrap();
        let mut o = seed.clone();
        for d in [0.137, 0.134, 0.13] {
            o = solve_2to1_lenient(
                &p.with_d(d),
                &cosine_forcing(0.0),
                o.core(),
                &SolveOptions::default(),
            )
            .unwrap();
        }
        let report = compose_dp(&SolvedOrbit::TwoOne(o), &cosine_forcing(0.0)).unwrap();
        assert!(report.lambda_min().unwrap() < -1.0, "{report:?}");
    }

    #[test]
    fn closed_form_expression_equals_determinant() {
        let o = orbit(0.18);
        let check = trace_check(&o, &cosine_forcing(0.0)).unwrap();
        assert!(check.det_matches(1e-9), "{check:?}");
        assert!((check.closed_form - 0.5f64.powi(6)).abs() < 1e-12);
    }

    #[test]
    fn report_serializes_expected_keys() {
        let report = StabilityReport::from_matrix(&Matrix2::new(0.1, 0.2, 0.3, 0.4));
        let json = serde_json::to_value(&report).unwrap();
        for key in ["trace", "det", "delta", "lambda_re", "lambda_im", "class"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
