//! Semi-analytical periodic orbits.
//!
//! A 2:1 orbit has impacts bottom → bottom → top → bottom per forcing period
//! with flight times `T1 = 2q`, `T2 = 2p`, `T3 = 2(1 - q - p)`. The opening
//! impact is placed at `t = 0`, so its phase equals the forcing phase. The
//! unknowns `(Ż_k, φ_k, q, p)` satisfy four scalar equations obtained by
//! eliminating the intermediate velocities from the three flight maps.
//!
//! A 1:1 orbit alternates bottom and top impacts and is described by
//! `(Ż_k, φ_k, Δt_k)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::{
    map_residual, next_impact, FlightSegment, ImpactEvent, MapKind, Side, H_SCAN, POS_TOL,
};
use crate::model::{
    cosine_forcing, phase_distance, wrap_phase, Forcing, ForcingKind, SystemParams,
};
use crate::newton::{damped_newton, NewtonOptions};
use crate::par;

/// Below this magnitude the denominator of the summed-position equation is
/// treated as vanishing and the equation is used in multiplied-out form.
pub const SUM_DENOMINATOR_EPS: f64 = 1e-10;
/// Slack allowed when checking that flights stay between the barriers.
pub const CONTAINMENT_TOL: f64 = 1e-9;
/// Samples per flight segment during validation.
pub const VALIDATION_SAMPLES: usize = 256;

/// Unknowns of the 2:1 system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadruple {
    pub v: f64,
    pub phi: f64,
    pub q: f64,
    pub p: f64,
}

impl Quadruple {
    fn to_vec(self) -> Vec<f64> {
        vec![self.v, self.phi, self.q, self.p]
    }

    fn from_slice(x: &[f64]) -> Self {
        Self {
            v: x[0],
            phi: x[1],
            q: x[2],
            p: x[3],
        }
    }

    /// Flight times `(T1, T2, T3)` for a forcing period of 2.
    pub fn intervals(&self) -> [f64; 3] {
        [2.0 * self.q, 2.0 * self.p, 2.0 * (1.0 - self.q - self.p)]
    }
}

/// Unknowns of the 1:1 system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub v: f64,
    pub phi: f64,
    /// Bottom-to-top flight time.
    pub dt: f64,
}

fn check_fractions(q: f64, p: f64) -> Result<()> {
    if !(q > 0.0 && p > 0.0) || !q.is_finite() || !p.is_finite() {
        return Err(Error::Domain(format!(
            "period fractions must be positive (q = {q}, p = {p})"
        )));
    }
    Ok(())
}

fn close_fourth(v: f64, num: f64, den: f64) -> f64 {
    if den.abs() < SUM_DENOMINATOR_EPS {
        v * den - num
    } else {
        v - num / den
    }
}

/// 2:1 residuals for cosine forcing, written out in terms of `(φ, q, p)`.
///
/// The four entries are `Ż_k` minus the right-hand sides of: the summed
/// velocity equations, the first bottom-to-bottom position equation, the
/// bottom-to-top position equation after substituting the first velocity
/// map, and the summed position equations.
pub fn residual_2to1(x: &Quadruple, params: &SystemParams) -> Result<[f64; 4]> {
    check_fractions(x.q, x.p)?;
    let Quadruple { v, phi, q, p } = *x;
    let r = params.r;
    let g = params.gbar;
    let d = params.d;
    let n = 1.0;
    let s = 1.0 - p - q;
    let (sin0, cos0) = phi.sin_cos();
    let (sin1, cos1) = (2.0 * PI * n * q + phi).sin_cos();
    let (sin2, cos2) = (2.0 * PI * n * (q + p) + phi).sin_cos();

    let rhs1 =
        (2.0 * n * q * (r - 1.0) * g - 2.0 * n * p * g + (1.0 - r) / PI * sin0 + r / PI * sin1
            - sin2 / PI
            + 2.0 * n * g / (r + 1.0))
            / (1.0 - r + r * r);

    let rhs2 =
        (n * PI * q * g - sin0 - cos1 / (2.0 * n * PI * q) + cos0 / (2.0 * n * PI * q)) / (PI * r);

    let rhs3 = (sin1 + 2.0 * n * PI * q * r * g + r * sin1 - r * sin0) / (PI * r * r)
        + (cos2 / (2.0 * n * PI * p)
            - cos1 / (2.0 * n * PI * p)
            - n * PI * p * g
            - PI * d / (2.0 * n * p))
            / (PI * r * r);

    let den = 2.0 * n * r.powi(3) * s - 2.0 * n * p * r * r + 2.0 * n * q * r;
    let num = sin0 / PI * (-2.0 * n * r * r * s + 2.0 * n * p * r - 2.0 * n * q)
        - 2.0 * n * sin2 / PI * s * (1.0 + r)
        + sin1 / PI * (2.0 * n * r * r * s - 2.0 * n * p * r + 2.0 * n * r * s - 2.0 * n * p)
        + 4.0 * n * n * r * r * g * q * s
        - 4.0 * n * n * g * r * p * q
        - 4.0 * n * n * g * r * p * s
        + g * (2.0 * n * n * q * q + 2.0 * n * n * p * p + 2.0 * n * n * s * s);

    Ok([v - rhs1, v - rhs2, v - rhs3, close_fourth(v, num, den)])
}

/// 2:1 residuals for an arbitrary period-2 forcing, built from `f1`/`f2`.
pub fn residual_2to1_general<F: Forcing>(
    x: &Quadruple,
    params: &SystemParams,
    forcing: &F,
) -> Result<[f64; 4]> {
    check_fractions(x.q, x.p)?;
    let fc = forcing.with_phase(x.phi);
    let r = params.r;
    let g = params.gbar;
    let d = params.d;
    let period = fc.period();
    let t1_len = period * x.q;
    let t2_len = period * x.p;
    let t3_len = period - t1_len - t2_len;
    let (t0, t1, t2) = (0.0, t1_len, t1_len + t2_len);
    let (a0, a1, a2) = (fc.f1(t0), fc.f1(t1), fc.f1(t2));
    let (b0, b1, b2) = (fc.f2(t0), fc.f2(t1), fc.f2(t2));

    let rhs1 = ((r - 1.0) * g * t1_len - g * t2_len + (1.0 - r) * a0 + r * a1 - a2
        + period * g / (r + 1.0))
        / (1.0 - r + r * r);
    let rhs2 = (b1 - b0) / (r * t1_len) + (g * t1_len - 2.0 * a0) / (2.0 * r);
    let rhs3 = (g * t1_len + a1 - a0) / r
        - (d + b2 - b1) / (r * r * t2_len)
        - (g * t2_len - 2.0 * a1) / (2.0 * r * r);

    let den = r.powi(3) * t3_len - r * r * t2_len + r * t1_len;
    let num = 0.5 * g * (t1_len * t1_len + t2_len * t2_len + t3_len * t3_len)
        + a0 * (-r * r * t3_len + r * t2_len - t1_len)
        + a1 * (r * r * t3_len - r * t2_len + r * t3_len - t2_len)
        + r * r * g * t1_len * t3_len
        - r * g * t1_len * t2_len
        - r * g * t2_len * t3_len
        - (1.0 + r) * t3_len * a2;

    Ok([
        x.v - rhs1,
        x.v - rhs2,
        x.v - rhs3,
        close_fourth(x.v, num, den),
    ])
}

fn residual_2to1_dispatch<F: Forcing>(
    x: &Quadruple,
    params: &SystemParams,
    forcing: &F,
) -> Result<[f64; 4]> {
    match forcing.kind() {
        ForcingKind::Cosine => residual_2to1(x, params),
        ForcingKind::General => residual_2to1_general(x, params, forcing),
    }
}

/// Pre-impact velocities at the second and third impacts of a 2:1 orbit.
pub fn recover_velocities<F: Forcing>(
    x: &Quadruple,
    params: &SystemParams,
    forcing: &F,
) -> (f64, f64) {
    let fc = forcing.with_phase(x.phi);
    let r = params.r;
    let g = params.gbar;
    let [t1_len, t2_len, _] = x.intervals();
    let (t0, t1, t2) = (0.0, t1_len, t1_len + t2_len);
    let v1 = -r * x.v + g * t1_len + fc.f1(t1) - fc.f1(t0);
    let v2 = r * r * x.v - r * g * t1_len + g * t2_len + r * fc.f1(t0) - (1.0 + r) * fc.f1(t1)
        + fc.f1(t2);
    (v1, v2)
}

/// Outcome of the physical admissibility checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

/// Solved 2:1 orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit21 {
    pub d: f64,
    pub r: f64,
    pub gbar: f64,
    pub v_k: f64,
    pub phi_k: f64,
    pub q: f64,
    pub p: f64,
    pub v_k1: f64,
    pub v_k2: f64,
    pub residual_norm: f64,
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

impl Orbit21 {
    pub fn core(&self) -> Quadruple {
        Quadruple {
            v: self.v_k,
            phi: self.phi_k,
            q: self.q,
            p: self.p,
        }
    }

    pub fn intervals(&self) -> [f64; 3] {
        self.core().intervals()
    }
}

/// Solved 1:1 orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit11 {
    pub d: f64,
    pub r: f64,
    pub gbar: f64,
    pub v_k: f64,
    pub phi_k: f64,
    /// Bottom-to-top flight time.
    pub dt_k: f64,
    /// Pre-impact velocity at the top impact.
    pub v_k1: f64,
    pub residual_norm: f64,
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

impl Orbit11 {
    pub fn core(&self) -> Triple {
        Triple {
            v: self.v_k,
            phi: self.phi_k,
            dt: self.dt_k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitType {
    #[serde(rename = "1:1")]
    OneOne,
    #[serde(rename = "2:1")]
    TwoOne,
}

impl OrbitType {
    pub fn label(self) -> &'static str {
        match self {
            OrbitType::OneOne => "1:1",
            OrbitType::TwoOne => "2:1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolvedOrbit {
    OneOne(Orbit11),
    TwoOne(Orbit21),
}

impl SolvedOrbit {
    pub fn orbit_type(&self) -> OrbitType {
        match self {
            SolvedOrbit::OneOne(_) => OrbitType::OneOne,
            SolvedOrbit::TwoOne(_) => OrbitType::TwoOne,
        }
    }

    pub fn d(&self) -> f64 {
        match self {
            SolvedOrbit::OneOne(o) => o.d,
            SolvedOrbit::TwoOne(o) => o.d,
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            SolvedOrbit::OneOne(o) => o.valid,
            SolvedOrbit::TwoOne(o) => o.valid,
        }
    }

    pub fn residual_norm(&self) -> f64 {
        match self {
            SolvedOrbit::OneOne(o) => o.residual_norm,
            SolvedOrbit::TwoOne(o) => o.residual_norm,
        }
    }

    pub fn phi_k(&self) -> f64 {
        match self {
            SolvedOrbit::OneOne(o) => o.phi_k,
            SolvedOrbit::TwoOne(o) => o.phi_k,
        }
    }

    /// Parameters in the orbit's own frame: opening impact at `t = 0`,
    /// forcing phase `φ_k`.
    pub fn params(&self) -> SystemParams {
        let (r, d, gbar, phi) = match self {
            SolvedOrbit::OneOne(o) => (o.r, o.d, o.gbar, o.phi_k),
            SolvedOrbit::TwoOne(o) => (o.r, o.d, o.gbar, o.phi_k),
        };
        SystemParams {
            r,
            d,
            gbar,
            phi: wrap_phase(phi),
        }
    }

    /// One period of impacts starting at `t = 0`, followed by the closing
    /// impact at `t = 2`.
    pub fn impacts(&self) -> Vec<ImpactEvent> {
        let params = self.params();
        match self {
            SolvedOrbit::OneOne(o) => vec![
                ImpactEvent::new(0.0, Side::Bottom, o.v_k, &params),
                ImpactEvent::new(o.dt_k, Side::Top, o.v_k1, &params),
                ImpactEvent::new(2.0, Side::Bottom, o.v_k, &params),
            ],
            SolvedOrbit::TwoOne(o) => {
                let [t1, t2, _] = o.intervals();
                vec![
                    ImpactEvent::new(0.0, Side::Bottom, o.v_k, &params),
                    ImpactEvent::new(t1, Side::Bottom, o.v_k1, &params),
                    ImpactEvent::new(t1 + t2, Side::Top, o.v_k2, &params),
                    ImpactEvent::new(2.0, Side::Bottom, o.v_k, &params),
                ]
            }
        }
    }

    /// Flight times between consecutive impacts over one period.
    pub fn intervals(&self) -> Vec<f64> {
        self.impacts().windows(2).map(|w| w[1].t - w[0].t).collect()
    }

    /// Serializable summary.
    pub fn record(&self) -> OrbitRecord {
        match self {
            SolvedOrbit::OneOne(o) => OrbitRecord {
                orbit_type: OrbitType::OneOne,
                d: o.d,
                r: o.r,
                gbar: o.gbar,
                v_k: o.v_k,
                phi_k: o.phi_k,
                q: 0.5 * o.dt_k,
                p: 1.0 - 0.5 * o.dt_k,
                v_k1: o.v_k1,
                v_k2: None,
                residual: o.residual_norm,
                valid: o.valid,
            },
            SolvedOrbit::TwoOne(o) => OrbitRecord {
                orbit_type: OrbitType::TwoOne,
                d: o.d,
                r: o.r,
                gbar: o.gbar,
                v_k: o.v_k,
                phi_k: o.phi_k,
                q: o.q,
                p: o.p,
                v_k1: o.v_k1,
                v_k2: Some(o.v_k2),
                residual: o.residual_norm,
                valid: o.valid,
            },
        }
    }
}

/// Flat JSON form of a solved orbit. For 1:1 orbits `q` and `p` are the
/// fractions of the period spent on the bottom-to-top and top-to-bottom
/// flights and `v_k2` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    #[serde(rename = "type")]
    pub orbit_type: OrbitType,
    pub d: f64,
    pub r: f64,
    pub gbar: f64,
    pub v_k: f64,
    pub phi_k: f64,
    pub q: f64,
    pub p: f64,
    pub v_k1: f64,
    pub v_k2: Option<f64>,
    pub residual: f64,
    pub valid: bool,
}

/// Physical admissibility of a periodic impact sequence: positive flight
/// times, approach velocities pointing into the barrier, flights confined to
/// the gap, and no impact missed between the listed ones.
pub fn validate_impacts<F: Forcing>(
    impacts: &[ImpactEvent],
    params: &SystemParams,
    forcing: &F,
) -> Validity {
    let mut diagnostics = Vec::new();
    for (i, w) in impacts.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        if !(dt > 0.0) {
            diagnostics.push(format!("flight {i} has non-positive duration {dt:.3e}"));
        }
    }
    for (i, e) in impacts
        .iter()
        .enumerate()
        .take(impacts.len().saturating_sub(1))
    {
        if !(e.side.sign() * e.v_pre > 0.0) {
            diagnostics.push(format!(
                "impact {i} on {} approaches with velocity {:.3e}",
                e.side.label(),
                e.v_pre
            ));
        }
    }
    if !diagnostics.is_empty() {
        return Validity {
            valid: false,
            diagnostics,
        };
    }

    let half = params.half_gap();
    for (i, w) in impacts.windows(2).enumerate() {
        let seg = FlightSegment {
            start: w[0],
            end: w[1],
        };
        let dt = seg.duration();
        let mut worst: f64 = 0.0;
        for j in 1..VALIDATION_SAMPLES {
            let t = seg.start.t + dt * j as f64 / VALIDATION_SAMPLES as f64;
            let (z, _) = seg.state_at(t, params, forcing);
            worst = worst.max(z.abs() - half);
        }
        for (_, z) in seg.extrema(params, forcing) {
            worst = worst.max(z.abs() - half);
        }
        if worst > CONTAINMENT_TOL {
            diagnostics.push(format!("flight {i} leaves the gap by {worst:.3e}"));
            continue;
        }
        match next_impact(&seg.start, params, forcing, seg.end.t + 10.0 * H_SCAN) {
            Ok(ev) if (ev.t - seg.end.t).abs() < 1e-7 && ev.side == seg.end.side => {}
            Ok(ev) => diagnostics.push(format!(
                "flight {i} hits {} at t = {:.6} before the expected impact at {:.6}",
                ev.side.label(),
                ev.t,
                seg.end.t
            )),
            Err(e) => diagnostics.push(format!("flight {i}: {e}")),
        }
    }
    Validity {
        valid: diagnostics.is_empty(),
        diagnostics,
    }
}

/// Runs the admissibility checks on a solved orbit.
pub fn validate_orbit<F: Forcing>(orbit: &SolvedOrbit, forcing: &F) -> Validity {
    let params = orbit.params();
    let fc = forcing.with_phase(params.phi);
    if let SolvedOrbit::TwoOne(o) = orbit {
        if o.q + o.p >= 1.0 {
            return Validity {
                valid: false,
                diagnostics: vec![format!(
                    "q + p = {:.6} leaves no time for the top-to-bottom flight",
                    o.q + o.p
                )],
            };
        }
    }
    if let SolvedOrbit::OneOne(o) = orbit {
        if !(o.dt_k > 0.0 && o.dt_k < 2.0) {
            return Validity {
                valid: false,
                diagnostics: vec![format!("bottom-to-top time {:.6} outside (0, 2)", o.dt_k)],
            };
        }
    }
    validate_impacts(&orbit.impacts(), &params, &fc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub newton: NewtonOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
        }
    }
}

fn finish_2to1<F: Forcing>(
    x: Quadruple,
    residual: f64,
    params: &SystemParams,
    forcing: &F,
) -> Result<Orbit21> {
    let x = Quadruple {
        phi: wrap_phase(x.phi),
        ..x
    };
    let (v_k1, v_k2) = recover_velocities(&x, params, forcing);
    let mut orbit = Orbit21 {
        d: params.d,
        r: params.r,
        gbar: params.gbar,
        v_k: x.v,
        phi_k: x.phi,
        q: x.q,
        p: x.p,
        v_k1,
        v_k2,
        residual_norm: residual,
        valid: false,
        diagnostics: Vec::new(),
    };
    let solved = SolvedOrbit::TwoOne(orbit.clone());
    let validity = validate_orbit(&solved, forcing);
    orbit.valid = validity.valid;
    orbit.diagnostics = validity.diagnostics.clone();
    if validity.valid {
        Ok(orbit)
    } else {
        Err(Error::SpuriousRoot {
            orbit: Box::new(SolvedOrbit::TwoOne(orbit)),
            diagnostics: validity.diagnostics,
        })
    }
}

/// Solves the 2:1 system from `guess` by damped Newton.
///
/// Converged roots that fail validation come back as
/// [`Error::SpuriousRoot`] carrying the orbit.
pub fn solve_2to1<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    guess: Quadruple,
    options: &SolveOptions,
) -> Result<Orbit21> {
    let residual = |x: &[f64]| {
        residual_2to1_dispatch(&Quadruple::from_slice(x), params, forcing).map(|r| r.to_vec())
    };
    let out = damped_newton(residual, &guess.to_vec(), &options.newton)?;
    finish_2to1(Quadruple::from_slice(&out.x), out.residual, params, forcing)
}

/// Like [`solve_2to1`], but returns spurious roots as orbits flagged invalid.
pub fn solve_2to1_lenient<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    guess: Quadruple,
    options: &SolveOptions,
) -> Result<Orbit21> {
    match solve_2to1(params, forcing, guess, options) {
        Err(Error::SpuriousRoot { orbit, .. }) => match *orbit {
            SolvedOrbit::TwoOne(o) => Ok(o),
            SolvedOrbit::OneOne(_) => unreachable!(),
        },
        other => other,
    }
}

/// Velocity and position residuals of the 1:1 bottom → top → bottom cycle.
pub fn residual_1to1<F: Forcing>(
    x: &Triple,
    params: &SystemParams,
    forcing: &F,
) -> Result<[f64; 3]> {
    if !x.dt.is_finite() || x.dt <= 0.0 {
        return Err(Error::Domain(format!(
            "bottom-to-top time must be positive, got {}",
            x.dt
        )));
    }
    let fc = forcing.with_phase(x.phi);
    let period = fc.period();
    let v_top = top_velocity_1to1(x, params, &fc);
    let (_, res_up) = map_residual(MapKind::P2, 0.0, x.v, x.dt, v_top, params, &fc);
    let (res_v, res_down) = map_residual(MapKind::P3, x.dt, v_top, period, x.v, params, &fc);
    Ok([res_v, res_up, res_down])
}

fn top_velocity_1to1<F: Forcing>(x: &Triple, params: &SystemParams, fc: &F) -> f64 {
    -params.r * x.v + params.gbar * x.dt + fc.f1(x.dt) - fc.f1(0.0)
}

/// Solves the 1:1 system from `guess`.
pub fn solve_1to1<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    guess: Triple,
    options: &SolveOptions,
) -> Result<Orbit11> {
    let residual = |x: &[f64]| {
        residual_1to1(
            &Triple {
                v: x[0],
                phi: x[1],
                dt: x[2],
            },
            params,
            forcing,
        )
        .map(|r| r.to_vec())
    };
    let out = damped_newton(residual, &[guess.v, guess.phi, guess.dt], &options.newton)?;
    let x = Triple {
        v: out.x[0],
        phi: wrap_phase(out.x[1]),
        dt: out.x[2],
    };
    let v_top = top_velocity_1to1(&x, params, &forcing.with_phase(x.phi));
    let mut orbit = Orbit11 {
        d: params.d,
        r: params.r,
        gbar: params.gbar,
        v_k: x.v,
        phi_k: x.phi,
        dt_k: x.dt,
        v_k1: v_top,
        residual_norm: out.residual,
        valid: false,
        diagnostics: Vec::new(),
    };
    let validity = validate_orbit(&SolvedOrbit::OneOne(orbit.clone()), forcing);
    orbit.valid = validity.valid;
    orbit.diagnostics = validity.diagnostics.clone();
    if validity.valid {
        Ok(orbit)
    } else {
        Err(Error::SpuriousRoot {
            orbit: Box::new(SolvedOrbit::OneOne(orbit)),
            diagnostics: validity.diagnostics,
        })
    }
}

/// Like [`solve_1to1`], but returns spurious roots as orbits flagged invalid.
pub fn solve_1to1_lenient<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    guess: Triple,
    options: &SolveOptions,
) -> Result<Orbit11> {
    match solve_1to1(params, forcing, guess, options) {
        Err(Error::SpuriousRoot { orbit, .. }) => match *orbit {
            SolvedOrbit::OneOne(o) => Ok(o),
            SolvedOrbit::TwoOne(_) => unreachable!(),
        },
        other => other,
    }
}

/// Cold-start seeds for the 2:1 system: a grid over phase and the two
/// period fractions, with the velocity taken from the summed velocity
/// equation at each grid point.
pub fn seeds_2to1(params: &SystemParams) -> Vec<Quadruple> {
    let mut seeds = Vec::with_capacity(72);
    for i in 0..8 {
        let phi = i as f64 * PI / 4.0;
        for q in [0.05, 0.15, 0.25] {
            for p in [0.3, 0.45, 0.6] {
                let probe = Quadruple { v: 0.0, phi, q, p };
                // the first residual at v = 0 is minus its right-hand side
                let v = residual_2to1(&probe, params).map(|r| -r[0]).unwrap_or(0.3);
                seeds.push(Quadruple { v, ..probe });
            }
        }
    }
    seeds
}

/// Cold-start seeds for the 1:1 system over phase and bottom-to-top time.
pub fn seeds_1to1<F: Forcing>(params: &SystemParams, forcing: &F) -> Vec<Triple> {
    let r = params.r;
    let g = params.gbar;
    let mut seeds = Vec::with_capacity(24);
    for i in 0..8 {
        let phi = i as f64 * PI / 4.0;
        let fc = forcing.with_phase(phi);
        for dt in [0.5, 1.0, 1.5] {
            let up = g * dt + fc.f1(dt) - fc.f1(0.0);
            let down = g * (2.0 - dt) + fc.f1(2.0) - fc.f1(dt);
            let v = (down - r * up) / (1.0 - r * r);
            seeds.push(Triple { v, phi, dt });
        }
    }
    seeds
}

fn same_quadruple(a: &Orbit21, b: &Orbit21) -> bool {
    (a.v_k - b.v_k).abs() < 1e-6
        && phase_distance(a.phi_k, b.phi_k).abs() < 1e-6
        && (a.q - b.q).abs() < 1e-6
        && (a.p - b.p).abs() < 1e-6
}

/// Every distinct 2:1 root reached from the seed grid, valid or not,
/// ordered by validity then velocity.
pub fn cold_start_2to1<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    options: &SolveOptions,
) -> Vec<Orbit21> {
    let seeds = seeds_2to1(params);
    let found = par::map(&seeds, |s| {
        solve_2to1_lenient(params, forcing, *s, options).ok()
    });
    let mut roots: Vec<Orbit21> = Vec::new();
    for o in found.into_iter().flatten() {
        if !roots.iter().any(|r| same_quadruple(r, &o)) {
            roots.push(o);
        }
    }
    roots.sort_by(|a, b| b.valid.cmp(&a.valid).then(a.v_k.total_cmp(&b.v_k)));
    roots
}

/// Every distinct 1:1 root reached from the seed grid.
pub fn cold_start_1to1<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    options: &SolveOptions,
) -> Vec<Orbit11> {
    let seeds = seeds_1to1(params, forcing);
    let found = par::map(&seeds, |s| {
        solve_1to1_lenient(params, forcing, *s, options).ok()
    });
    let mut roots: Vec<Orbit11> = Vec::new();
    for o in found.into_iter().flatten() {
        if o.dt_k <= 0.0 || o.dt_k >= 2.0 {
            continue;
        }
        let dup = roots.iter().any(|r| {
            (r.v_k - o.v_k).abs() < 1e-6
                && phase_distance(r.phi_k, o.phi_k).abs() < 1e-6
                && (r.dt_k - o.dt_k).abs() < 1e-6
        });
        if !dup {
            roots.push(o);
        }
    }
    roots.sort_by(|a, b| b.valid.cmp(&a.valid).then(a.v_k.total_cmp(&b.v_k)));
    roots
}

/// Impact `(|Ż|, φ)` pairs of an orbit, for comparison with reported values.
pub fn impact_signatures(orbit: &SolvedOrbit) -> Vec<(f64, f64)> {
    let impacts = orbit.impacts();
    impacts[..impacts.len() - 1]
        .iter()
        .map(|e| (e.v_pre.abs(), e.phase))
        .collect()
}

/// Smallest combined distance between an orbit's impacts and a reported
/// `(|Ż|, φ)` pair; returns `(velocity error, phase error)` of the best match.
pub fn best_match(orbit: &SolvedOrbit, speed: f64, phase: f64) -> (f64, f64) {
    impact_signatures(orbit)
        .into_iter()
        .map(|(v, p)| ((v - speed).abs(), phase_distance(p, phase).abs()))
        .min_by(|a, b| (a.0 + a.1 / TAU).total_cmp(&(b.0 + b.1 / TAU)))
        .unwrap_or((f64::INFINITY, f64::INFINITY))
}

/// Positional residual bound used in tests of located impacts.
pub const fn located_position_tol() -> f64 {
    POS_TOL
}

/// Convenience: cosine forcing matching a parameter set's phase.
pub fn cosine_for(params: &SystemParams) -> crate::model::CosineForcing {
    cosine_forcing(params.phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cosine_forcing, NoForcing};
    use proptest::prelude::*;

    const GBAR_30: f64 = 0.1245 * 9.8 * 0.5 / 5.0;

    fn params(d: f64, gbar: f64) -> SystemParams {
        SystemParams::new(0.5, d, gbar, 0.0).unwrap()
    }

    fn solved(d: f64) -> Orbit21 {
        let p = params(d, GBAR_30);
        let roots = cold_start_2to1(&p, &cosine_forcing(0.0), &SolveOptions::default());
        roots
            .into_iter()
            .find(|o| o.valid)
            .expect("a valid 2:1 root")
    }

    #[test]
    fn zero_fraction_is_singular() {
        let p = params(0.16, GBAR_30);
        let x = Quadruple {
            v: 0.3,
            phi: 1.0,
            q: 0.0,
            p: 0.4,
        };
        assert!(matches!(residual_2to1(&x, &p), Err(Error::Domain(_))));
        let x = Quadruple {
            v: 0.3,
            phi: 1.0,
            q: 0.2,
            p: 0.0,
        };
        assert!(residual_2to1_general(&x, &p, &cosine_forcing(0.0)).is_err());
    }

    #[test]
    fn solved_orbit_has_tiny_residual_and_matches_reported_pair() {
        let o = solved(0.16);
        let res = residual_2to1(&o.core(), &params(0.16, GBAR_30)).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-9), "{res:?}");
        let (dv, dphi) = best_match(&SolvedOrbit::TwoOne(o), 0.1924, 1.015);
        assert!(dv < 5e-3 && dphi < 2e-2, "{dv} {dphi}");
    }

    #[test]
    fn recovered_velocities_chain_consistently() {
        let o = solved(0.18);
        let p = params(0.18, GBAR_30);
        let f = cosine_forcing(o.phi_k);
        let [t1, t2, _] = o.intervals();
        // second velocity via the bottom-to-top velocity map
        let sequential = -p.r * o.v_k1 + p.gbar * t2 + f.f1(t1 + t2) - f.f1(t1);
        assert!((sequential - o.v_k2).abs() < 1e-12);
        // maps P1, P2, P3 close
        for (kind, ta, va, tb, vb) in [
            (MapKind::P1, 0.0, o.v_k, t1, o.v_k1),
            (MapKind::P2, t1, o.v_k1, t1 + t2, o.v_k2),
            (MapKind::P3, t1 + t2, o.v_k2, 2.0, o.v_k),
        ] {
            let (rv, rz) = map_residual(kind, ta, va, tb, vb, &p, &f);
            assert!(rv.abs() < 1e-9 && rz.abs() < 1e-9, "{kind:?}: {rv} {rz}");
        }
    }

    #[test]
    fn force_free_recovery() {
        let p = params(0.2, 0.0);
        let x = Quadruple {
            v: 0.7,
            phi: 0.3,
            q: 0.2,
            p: 0.4,
        };
        let (v1, _) = recover_velocities(&x, &p, &NoForcing::default());
        assert!((v1 + 0.5 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn polishing_a_solution_is_idempotent() {
        let o = solved(0.17);
        let p = params(0.17, GBAR_30);
        let again =
            solve_2to1(&p, &cosine_forcing(0.0), o.core(), &SolveOptions::default()).unwrap();
        assert!((again.v_k - o.v_k).abs() < 1e-12);
        assert!(phase_distance(again.phi_k, o.phi_k).abs() < 1e-12);
        assert!((again.q - o.q).abs() < 1e-12 && (again.p - o.p).abs() < 1e-12);
    }

    #[test]
    fn warm_start_converges_quickly() {
        let o = solved(0.17);
        for d in [0.169, 0.171] {
            let p = params(d, GBAR_30);
            let residual =
                |x: &[f64]| residual_2to1(&Quadruple::from_slice(x), &p).map(|r| r.to_vec());
            let out =
                damped_newton(residual, &o.core().to_vec(), &NewtonOptions::default()).unwrap();
            assert!(out.iterations <= 5, "{} iterations", out.iterations);
        }
    }

    #[test]
    fn overlong_fractions_are_invalid() {
        let mut o = solved(0.17);
        o.p = 1.0 - o.q + 0.01;
        let v = validate_orbit(&SolvedOrbit::TwoOne(o), &cosine_forcing(0.0));
        assert!(!v.valid);
        assert!(v.diagnostics[0].contains("q + p"));
    }

    #[test]
    fn spurious_root_is_reported_with_orbit() {
        // at d = 0.16 one of the 2:1 roots has a negative approach velocity
        // at the second bottom impact
        let p = params(0.16, GBAR_30);
        let roots = cold_start_2to1(&p, &cosine_forcing(0.0), &SolveOptions::default());
        let bad = roots.iter().find(|o| !o.valid).expect("an invalid root");
        match solve_2to1(
            &p,
            &cosine_forcing(0.0),
            bad.core(),
            &SolveOptions::default(),
        ) {
            Err(Error::SpuriousRoot { orbit, diagnostics }) => {
                assert!(!orbit.is_valid());
                assert!(!diagnostics.is_empty());
            }
            other => panic!("expected a spurious root, got {other:?}"),
        }
    }

    #[test]
    fn grazed_branch_below_transition_is_invalid() {
        // below the grazing value the bottom-to-top flight loops back
        // through the bottom barrier
        let p = params(0.136, GBAR_30);
        let seed = solved(0.14);
        let o = solve_2to1_lenient(
            &p,
            &cosine_forcing(0.0),
            seed.core(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(!o.valid);
        assert!(
            o.diagnostics.iter().any(|m| m.contains("flight 1")),
            "{:?}",
            o.diagnostics
        );
    }

    #[test]
    fn one_to_one_orbit_matches_reported_pair() {
        let p = params(0.252, GBAR_30);
        let roots = cold_start_1to1(&p, &cosine_forcing(0.0), &SolveOptions::default());
        let best = roots
            .iter()
            .filter(|o| o.valid)
            .map(|o| best_match(&SolvedOrbit::OneOne(o.clone()), 0.669, 0.128))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        assert!(best.0 < 5e-3 && best.1 < 2e-2, "{best:?}");
    }

    #[test]
    fn orbit_record_serializes() {
        let o = solved(0.17);
        let json = serde_json::to_value(SolvedOrbit::TwoOne(o).record()).unwrap();
        assert_eq!(json["type"], "2:1");
        for key in [
            "d", "r", "gbar", "v_k", "phi_k", "q", "p", "v_k1", "v_k2", "residual", "valid",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn general_and_specialized_residuals_agree(
            v in -1.0f64..1.0, phi in 0.0f64..TAU, q in 0.02f64..0.9, frac in 0.02f64..0.98,
            d in 0.05f64..0.5, gbar in 0.0f64..0.3,
        ) {
            let p_frac = (1.0 - q) * frac;
            let params = SystemParams { r: 0.5, d, gbar, phi: 0.0 };
            let x = Quadruple { v, phi, q, p: p_frac };
            let a = residual_2to1(&x, &params).unwrap();
            let b = residual_2to1_general(&x, &params, &cosine_forcing(0.0)).unwrap();
            for i in 0..4 {
                let scale = 1.0f64.max(a[i].abs());
                prop_assert!((a[i] - b[i]).abs() < 1e-11 * scale, "{i}: {} vs {}", a[i], b[i]);
            }
        }
    }
}
