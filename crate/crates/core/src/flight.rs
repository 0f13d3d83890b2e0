//! Closed-form flight between impacts, the restitution law, impact location,
//! and the residual form of the four impact-to-impact maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{wrap_phase, Forcing, SystemParams, FORCING_PERIOD};

/// Scan step for event location, 1/64 of the forcing period.
pub const H_SCAN: f64 = FORCING_PERIOD / 64.0;
/// Positional tolerance on located impacts.
pub const POS_TOL: f64 = 1e-12;
/// Event search restarts this long after an impact.
pub const T_EPS: f64 = 1e-10;
/// Impacts slower than this are tagged as grazing.
pub const V_GRAZ: f64 = 1e-6;
/// Two consecutive inter-impact gaps below this abort with chatter.
pub const CHATTER_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `Z = +d/2`.
    Bottom,
    /// `Z = -d/2`.
    Top,
}

impl Side {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Side::Bottom => 1.0,
            Side::Top => -1.0,
        }
    }

    #[inline]
    pub fn position(self, d: f64) -> f64 {
        0.5 * self.sign() * d
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Bottom => "B",
            Side::Top => "T",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "B" | "bottom" | "Bottom" => Some(Side::Bottom),
            "T" | "top" | "Top" => Some(Side::Top),
            _ => None,
        }
    }
}

/// Velocity right after an impact.
#[inline]
pub fn apply_impact(v_pre: f64, r: f64) -> f64 {
    -r * v_pre
}

/// One impact with a barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEvent {
    pub t: f64,
    pub side: Side,
    pub v_pre: f64,
    pub v_post: f64,
    /// `(πt + φ) mod 2π`.
    pub phase: f64,
}

impl ImpactEvent {
    pub fn new(t: f64, side: Side, v_pre: f64, params: &SystemParams) -> Self {
        Self {
            t,
            side,
            v_pre,
            v_post: apply_impact(v_pre, params.r),
            phase: wrap_phase(std::f64::consts::PI * t + params.phi),
        }
    }

    pub fn position(&self, d: f64) -> f64 {
        self.side.position(d)
    }

    pub fn is_grazing(&self) -> bool {
        self.v_pre.abs() < V_GRAZ
    }

    /// Post-impact state, the starting point of the next flight.
    pub fn departure(&self, d: f64) -> FlightState {
        FlightState {
            t: self.t,
            z: self.position(d),
            v: self.v_post,
        }
    }
}

/// Free-flight state `(t, Z, Ż)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightState {
    pub t: f64,
    pub z: f64,
    pub v: f64,
}

impl FlightState {
    /// Position and velocity at `t` under `Z'' = f + gbar`.
    #[inline]
    pub fn propagate<F: Forcing>(&self, t: f64, gbar: f64, forcing: &F) -> (f64, f64) {
        let s = t - self.t;
        let f1_0 = forcing.f1(self.t);
        let v = self.v + gbar * s + forcing.f1(t) - f1_0;
        let z = self.z + self.v * s + 0.5 * gbar * s * s + forcing.f2(t)
            - forcing.f2(self.t)
            - f1_0 * s;
        (z, v)
    }
}

/// Relative position and velocity at `t` on the flight leaving `prev`.
pub fn flight_eval<F: Forcing>(
    prev: &ImpactEvent,
    t: f64,
    params: &SystemParams,
    forcing: &F,
) -> Result<(f64, f64)> {
    if t < prev.t {
        return Err(Error::Domain(format!(
            "flight evaluated at t = {t} before its impact at {}",
            prev.t
        )));
    }
    Ok(prev.departure(params.d).propagate(t, params.gbar, forcing))
}

/// A flight between two consecutive impacts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightSegment {
    pub start: ImpactEvent,
    pub end: ImpactEvent,
}

impl FlightSegment {
    pub fn duration(&self) -> f64 {
        self.end.t - self.start.t
    }

    pub fn state_at<F: Forcing>(&self, t: f64, params: &SystemParams, forcing: &F) -> (f64, f64) {
        self.start
            .departure(params.d)
            .propagate(t, params.gbar, forcing)
    }

    /// Interior turning points `(t, Z)` where `Ż` changes sign.
    pub fn extrema<F: Forcing>(&self, params: &SystemParams, forcing: &F) -> Vec<(f64, f64)> {
        let start = self.start.departure(params.d);
        velocity_roots(&start, self.start.t, self.end.t, params.gbar, forcing)
            .into_iter()
            .map(|t| (t, start.propagate(t, params.gbar, forcing).0))
            .collect()
    }

    /// Smallest distance from the interior of the flight to either barrier,
    /// measured at turning points. Positive means clear of both barriers.
    pub fn clearance<F: Forcing>(&self, params: &SystemParams, forcing: &F) -> f64 {
        let half = params.half_gap();
        self.extrema(params, forcing)
            .into_iter()
            .map(|(_, z)| (half - z).min(z + half))
            .fold(f64::INFINITY, f64::min)
    }
}

fn velocity_roots<F: Forcing>(
    start: &FlightState,
    ta: f64,
    tb: f64,
    gbar: f64,
    forcing: &F,
) -> Vec<f64> {
    let h = H_SCAN / 8.0;
    let n = ((tb - ta) / h).ceil().max(1.0) as usize;
    let vel = |t: f64| start.propagate(t, gbar, forcing).1;
    let mut roots = Vec::new();
    let mut t0 = ta;
    let mut v0 = vel(t0);
    for i in 1..=n {
        let t1 = if i == n {
            tb
        } else {
            ta + i as f64 * (tb - ta) / n as f64
        };
        let v1 = vel(t1);
        if v0 != 0.0 && v1 != 0.0 && (v0 > 0.0) != (v1 > 0.0) {
            let root = bisect(&vel, t0, t1);
            if root > ta + 1e-12 && root < tb - 1e-12 {
                roots.push(root);
            }
        }
        t0 = t1;
        v0 = v1;
    }
    roots
}

/// Bisection on a sign change of `g` over `[a, b]`, run to machine precision.
fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    let gb = g(b);
    if ga.abs() <= gb.abs() {
        a
    } else {
        b
    }
}

/// Locates the first barrier contact after `state.t` and returns it as an
/// impact. Contact with zero normal velocity is reported as a grazing impact.
pub fn next_impact_from<F: Forcing>(
    state: &FlightState,
    params: &SystemParams,
    forcing: &F,
    t_max: f64,
) -> Result<ImpactEvent> {
    let half = params.half_gap();
    let eval = |t: f64| state.propagate(t, params.gbar, forcing);
    let gap = |side: Side, z: f64| side.sign() * z - half;

    let mut ta = state.t + T_EPS;
    let (mut za, mut va) = eval(ta);
    for side in [Side::Bottom, Side::Top] {
        if gap(side, za) > 0.0 {
            // Already in contact right after the previous impact (sticking).
            return Ok(ImpactEvent::new(ta, side, va, params));
        }
    }

    while ta < t_max {
        let tb = (ta + H_SCAN).min(t_max);
        let (zb, vb) = eval(tb);
        let mut hit: Option<(f64, Side)> = None;
        for side in [Side::Bottom, Side::Top] {
            let s = side.sign();
            let gb = gap(side, zb);
            let candidate = if gb > 0.0 {
                let g = |t: f64| gap(side, eval(t).0);
                Some(bisect(&g, ta, tb))
            } else if s * va > 0.0 && s * vb < 0.0 {
                let sv = |t: f64| s * eval(t).1;
                let tm = bisect(&sv, ta, tb);
                let gm = gap(side, eval(tm).0);
                if gm > 0.0 {
                    let g = |t: f64| gap(side, eval(t).0);
                    Some(bisect(&g, ta, tm))
                } else if gm > -POS_TOL {
                    Some(tm)
                } else {
                    None
                }
            } else {
                None
            };
            if let Some(t) = candidate {
                if hit.is_none_or(|(th, _)| t < th) {
                    hit = Some((t, side));
                }
            }
        }
        if let Some((t, side)) = hit {
            let (_, v) = eval(t);
            return Ok(ImpactEvent::new(t, side, v, params));
        }
        ta = tb;
        za = zb;
        va = vb;
    }
    let _ = za;
    Err(Error::NoImpact { t_max })
}

/// Next impact on the flight that leaves `prev`.
pub fn next_impact<F: Forcing>(
    prev: &ImpactEvent,
    params: &SystemParams,
    forcing: &F,
    t_max: f64,
) -> Result<ImpactEvent> {
    if t_max <= prev.t {
        return Err(Error::Domain(format!(
            "search horizon {t_max} precedes impact at {}",
            prev.t
        )));
    }
    next_impact_from(&prev.departure(params.d), params, forcing, t_max)
}

/// The four barrier-to-barrier maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapKind {
    /// Bottom to bottom.
    P1,
    /// Bottom to top.
    P2,
    /// Top to bottom.
    P3,
    /// Top to top.
    P4,
}

impl MapKind {
    pub fn between(from: Side, to: Side) -> Self {
        match (from, to) {
            (Side::Bottom, Side::Bottom) => MapKind::P1,
            (Side::Bottom, Side::Top) => MapKind::P2,
            (Side::Top, Side::Bottom) => MapKind::P3,
            (Side::Top, Side::Top) => MapKind::P4,
        }
    }

    /// Displacement `Z_{j+1} - Z_j` across the map.
    pub fn displacement(self, d: f64) -> f64 {
        match self {
            MapKind::P1 | MapKind::P4 => 0.0,
            MapKind::P2 => -d,
            MapKind::P3 => d,
        }
    }
}

/// Residuals of the velocity and position equations of a map, in terms of
/// pre-impact velocities at both ends.
pub fn map_residual<F: Forcing>(
    kind: MapKind,
    t_j: f64,
    v_j: f64,
    t_next: f64,
    v_next: f64,
    params: &SystemParams,
    forcing: &F,
) -> (f64, f64) {
    let r = params.r;
    let g = params.gbar;
    let dt = t_next - t_j;
    let f1_j = forcing.f1(t_j);
    let res_v = (-r * v_j + g * dt + forcing.f1(t_next) - f1_j) - v_next;
    let res_z =
        (-r * v_j * dt + 0.5 * g * dt * dt + forcing.f2(t_next) - forcing.f2(t_j) - f1_j * dt)
            - kind.displacement(params.d);
    (res_v, res_z)
}
