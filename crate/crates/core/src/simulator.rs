//! Event-driven simulation, steady-state pattern classification, and
//! reconstruction of absolute displacements.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::{next_impact, next_impact_from, FlightState, ImpactEvent, Side, CHATTER_GAP};
use crate::model::{phase_distance, Forcing, SystemParams, FORCING_PERIOD};
use crate::solver::OrbitType;

/// Longest flight searched before giving up on the next impact.
pub const NO_IMPACT_HORIZON: f64 = 50.0 * FORCING_PERIOD;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// Start at an impact with the given pre-impact velocity.
    Impact { t: f64, side: Side, v_pre: f64 },
    /// Start from a free-flight state.
    Flight(FlightState),
}

impl InitialState {
    pub fn bottom_impact(t: f64, v_pre: f64) -> Self {
        InitialState::Impact {
            t,
            side: Side::Bottom,
            v_pre,
        }
    }

    /// Warm-start state carried over from a previous run: the impact is kept
    /// and its time reduced modulo the forcing period.
    pub fn resume_from(ev: &ImpactEvent) -> Self {
        InitialState::Impact {
            t: ev.t.rem_euclid(FORCING_PERIOD),
            side: ev.side,
            v_pre: ev.v_pre,
        }
    }

    fn start_time(&self) -> f64 {
        match self {
            InitialState::Impact { t, .. } => *t,
            InitialState::Flight(s) => s.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Time discarded before recording, in dimensionless units.
    pub t_transient: f64,
    /// Length of the recorded window.
    pub t_window: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_transient: 200.0 * FORCING_PERIOD,
            t_window: 40.0 * FORCING_PERIOD,
        }
    }
}

impl SimulationConfig {
    pub fn periods(transient: usize, window: usize) -> Self {
        Self {
            t_transient: transient as f64 * FORCING_PERIOD,
            t_window: window as f64 * FORCING_PERIOD,
        }
    }
}

/// Impacts recorded inside `[window.0, window.1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSequence {
    pub events: Vec<ImpactEvent>,
    pub params: SystemParams,
    pub t_transient: f64,
    pub window: (f64, f64),
    /// Last impact at or before the end of the window.
    pub resume: ImpactEvent,
}

impl ImpactSequence {
    pub fn window_length(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// Events inside a sub-window `[t0, t1)`.
    pub fn between(&self, t0: f64, t1: f64) -> impl Iterator<Item = &ImpactEvent> {
        self.events.iter().filter(move |e| e.t >= t0 && e.t < t1)
    }
}

/// Advances `count` impacts from `ev`.
pub fn advance<F: Forcing>(
    ev: &ImpactEvent,
    params: &SystemParams,
    forcing: &F,
    count: usize,
) -> Result<Vec<ImpactEvent>> {
    let mut out = Vec::with_capacity(count);
    let mut cur = *ev;
    for _ in 0..count {
        cur = next_impact(&cur, params, forcing, cur.t + NO_IMPACT_HORIZON)?;
        out.push(cur);
    }
    Ok(out)
}

/// Runs the impact dynamics and records the impacts after the transient.
///
/// `forcing` must already carry the phase `params.phi`.
pub fn simulate<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    init: InitialState,
    config: &SimulationConfig,
) -> Result<ImpactSequence> {
    let t0 = init.start_time();
    let t_start = t0 + config.t_transient;
    let t_end = t_start + config.t_window;

    let mut ev = match init {
        InitialState::Impact { t, side, v_pre } => ImpactEvent::new(t, side, v_pre, params),
        InitialState::Flight(state) => {
            if state.z.abs() > params.half_gap() {
                return Err(Error::Domain(format!(
                    "initial position {} outside [-d/2, d/2]",
                    state.z
                )));
            }
            next_impact_from(&state, params, forcing, t0 + NO_IMPACT_HORIZON)?
        }
    };

    let mut events = Vec::new();
    if ev.t >= t_start && ev.t <= t_end {
        events.push(ev);
    }
    let mut short_gaps = 0;
    loop {
        let horizon = (ev.t + NO_IMPACT_HORIZON).min(t_end + 1e-9);
        if horizon <= ev.t {
            break;
        }
        let next = match next_impact(&ev, params, forcing, horizon) {
            Ok(next) => next,
            Err(Error::NoImpact { .. }) if horizon >= t_end => break,
            Err(e) => return Err(e),
        };
        if next.t > t_end {
            break;
        }
        if next.t - ev.t < CHATTER_GAP {
            short_gaps += 1;
            if short_gaps >= 2 {
                return Err(Error::Chatter {
                    t: next.t,
                    min_gap: CHATTER_GAP,
                });
            }
        } else {
            short_gaps = 0;
        }
        if next.t >= t_start {
            events.push(next);
        }
        ev = next;
    }
    if events.is_empty() {
        return Err(Error::NoImpact { t_max: t_end });
    }
    Ok(ImpactSequence {
        events,
        params: *params,
        t_transient: config.t_transient,
        window: (t_start, t_end),
        resume: ev,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternClass {
    Periodic,
    Aperiodic,
    Chatter,
}

/// Steady impact pattern: `n` bottom and `m` top impacts per
/// `period_multiple` forcing periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternLabel {
    pub n: usize,
    pub m: usize,
    pub period_multiple: usize,
    pub class: PatternClass,
}

impl PatternLabel {
    pub fn aperiodic() -> Self {
        Self {
            n: 0,
            m: 0,
            period_multiple: 0,
            class: PatternClass::Aperiodic,
        }
    }

    pub fn chatter() -> Self {
        Self {
            class: PatternClass::Chatter,
            ..Self::aperiodic()
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.class == PatternClass::Periodic
    }

    /// Bottom and top impacts per single forcing period.
    pub fn per_period(&self) -> Option<(f64, f64)> {
        self.is_periodic().then(|| {
            let k = self.period_multiple as f64;
            (self.n as f64 / k, self.m as f64 / k)
        })
    }

    /// `true` for an n:1 orbit of one forcing period.
    pub fn is_n_to_one(&self, n: usize) -> bool {
        self.is_periodic() && self.period_multiple == 1 && self.n == n && self.m == 1
    }

    /// `true` for motion that alternates bottom and top impacts, including
    /// its period-doubled versions.
    pub fn is_alternating(&self) -> bool {
        self.is_periodic() && self.n == self.m
    }

    /// The solvable orbit family this label belongs to, if any.
    pub fn orbit_type(&self) -> Option<OrbitType> {
        if self.is_n_to_one(1) {
            Some(OrbitType::OneOne)
        } else if self.is_n_to_one(2) {
            Some(OrbitType::TwoOne)
        } else {
            None
        }
    }

    /// Period length in dimensionless time units (2 per forcing period).
    pub fn period_in_time_units(&self) -> f64 {
        self.period_multiple as f64 * FORCING_PERIOD
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            PatternClass::Periodic => {
                let k = self.period_multiple;
                if self.n.is_multiple_of(k) && self.m.is_multiple_of(k) {
                    write!(f, "{}:{}", self.n / k, self.m / k)?;
                } else {
                    write!(f, "{}:{}", self.n, self.m)?;
                }
                write!(f, " period-{}", 2 * k)
            }
            PatternClass::Aperiodic => write!(f, "aperiodic"),
            PatternClass::Chatter => write!(f, "chatter"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternOptions {
    pub k_max: usize,
    /// Tolerance on impact time shifts, compared through phases.
    pub time_tol: f64,
    pub velocity_tol: f64,
}

impl Default for PatternOptions {
    fn default() -> Self {
        Self {
            k_max: 16,
            time_tol: 1e-5,
            velocity_tol: 1e-5,
        }
    }
}

/// Smallest period multiple `k ≤ k_max` under which the recorded impacts
/// repeat. Falls through to an aperiodic label.
pub fn classify_pattern(seq: &ImpactSequence, options: &PatternOptions) -> Result<PatternLabel> {
    let needed = 2.0 * options.k_max as f64 * FORCING_PERIOD;
    if seq.window_length() + 1e-9 < needed {
        return Err(Error::InsufficientWindow {
            window: seq.window_length(),
            k_max: options.k_max,
        });
    }
    let events = &seq.events;
    let Some(first) = events.first() else {
        return Ok(PatternLabel::aperiodic());
    };
    let phase_tol = options.time_tol * std::f64::consts::PI;
    for k in 1..=options.k_max {
        let period = k as f64 * FORCING_PERIOD;
        // anchored on the first impact so one landing on the window edge is not counted twice
        let per = events
            .iter()
            .take_while(|e| e.t < first.t + period - 10.0 * options.time_tol)
            .count();
        if per == 0 || events.len() < 2 * per {
            continue;
        }
        let repeats = (0..events.len() - per).all(|i| {
            let a = &events[i];
            let b = &events[i + per];
            a.side == b.side
                && ((b.t - a.t) - period).abs() < 0.5
                && phase_distance(b.phase, a.phase).abs() < phase_tol
                && (b.v_pre - a.v_pre).abs() < options.velocity_tol
        });
        if repeats {
            let n = events[..per]
                .iter()
                .filter(|e| e.side == Side::Bottom)
                .count();
            return Ok(PatternLabel {
                n,
                m: per - n,
                period_multiple: k,
                class: PatternClass::Periodic,
            });
        }
    }
    Ok(PatternLabel::aperiodic())
}

/// Classifies the outcome of a simulation, mapping chatter to its own label.
pub fn classify_outcome(
    outcome: &Result<ImpactSequence>,
    options: &PatternOptions,
) -> Result<PatternLabel> {
    match outcome {
        Ok(seq) => classify_pattern(seq, options),
        Err(Error::Chatter { .. }) => Ok(PatternLabel::chatter()),
        Err(Error::NoImpact { t_max }) => Err(Error::NoImpact { t_max: *t_max }),
        Err(e) => Err(Error::Domain(e.to_string())),
    }
}

/// One row of a reconstructed time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub z: f64,
    pub zdot: f64,
    /// Absolute position of the top membrane, `X* + d/2`.
    pub x_top: f64,
    /// Absolute position of the bottom membrane, `X* - d/2`.
    pub x_bottom: f64,
    /// Absolute ball position `X* - Z`.
    pub x_ball: f64,
}

/// Absolute cylinder displacement `X*(t) = F2(t) + c1 t + c0`, pinned by
/// `X*(t0) = 0` and `Ẋ*(t0) = F1(t0)`.
pub fn cylinder_displacement<F: Forcing>(forcing: &F, t0: f64, t: f64) -> f64 {
    let c1 = 0.0;
    let c0 = -forcing.f2(t0) - c1 * t0;
    forcing.f2(t) + c1 * t + c0
}

/// Samples the recorded motion on a uniform grid and returns relative and
/// absolute coordinates. Each impact contributes two rows at the same time:
/// the arrival with the pre-impact velocity and the departure with the
/// post-impact one.
pub fn reconstruct_absolute<F: Forcing>(
    seq: &ImpactSequence,
    forcing: &F,
    samples_per_unit: usize,
) -> Vec<TrajectorySample> {
    let params = &seq.params;
    let half = params.half_gap();
    let Some(first) = seq.events.first() else {
        return Vec::new();
    };
    let t0 = first.t;
    let sample = |t: f64, z: f64, zdot: f64| {
        let x = cylinder_displacement(forcing, t0, t);
        TrajectorySample {
            t,
            z,
            zdot,
            x_top: x + half,
            x_bottom: x - half,
            x_ball: x - z,
        }
    };
    let step = 1.0 / samples_per_unit.max(1) as f64;
    let mut out = Vec::new();
    for pair in seq.events.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dep = a.departure(params.d);
        out.push(sample(a.t, a.position(params.d), a.v_post));
        let mut t = (a.t / step).floor() * step + step;
        while t < b.t {
            let (z, v) = dep.propagate(t, params.gbar, forcing);
            out.push(sample(t, z, v));
            t += step;
        }
        out.push(sample(b.t, b.position(params.d), b.v_pre));
    }
    let last = seq.events.last().unwrap();
    out.push(sample(last.t, last.position(params.d), last.v_post));
    out
}
