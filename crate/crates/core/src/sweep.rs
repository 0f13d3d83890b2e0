//! Parameter sweeps: analytic branch continuation in `d`, critical points,
//! stable windows, and simulated hysteresis scans for grazing transitions.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::energy::EnergySummary;
use crate::error::{Error, Result};
use crate::flight::{FlightSegment, ImpactEvent, Side};
use crate::model::{phase_distance, Forcing, PhysicalParams, SystemParams};
use crate::par;
use crate::simulator::{
    classify_outcome, simulate, InitialState, PatternLabel, PatternOptions, SimulationConfig,
};
use crate::solver::{
    solve_1to1_lenient, solve_2to1_lenient, OrbitType, Quadruple, SolveOptions, SolvedOrbit, Triple,
};
use crate::stability::{compose_dp, CriticalKind, CriticalPointTag, StabilityReport};

/// Bisection width for critical points located with the analytic solver.
pub const CRITICAL_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Analytic,
    Simulated,
}

/// Steady state reached by simulation at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPoint {
    pub pattern: PatternLabel,
    pub events: Vec<ImpactEvent>,
    pub window: (f64, f64),
}

impl SimulatedPoint {
    /// Impacts of one pattern period, starting with the first bottom impact
    /// in the window.
    pub fn cycle(&self) -> &[ImpactEvent] {
        let count = if self.pattern.is_periodic() {
            self.pattern.n + self.pattern.m
        } else {
            self.events.len()
        };
        let start = self
            .events
            .iter()
            .position(|e| e.side == Side::Bottom)
            .unwrap_or(0);
        let end = (start + count).min(self.events.len());
        &self.events[start..end]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub d: f64,
    pub source: PointSource,
    pub orbit: Option<SolvedOrbit>,
    pub stability: Option<StabilityReport>,
    pub simulated: Option<SimulatedPoint>,
    pub energy: Option<EnergySummary>,
}

impl BranchPoint {
    pub fn analytic(orbit: SolvedOrbit, stability: Option<StabilityReport>) -> Self {
        Self {
            d: orbit.d(),
            source: PointSource::Analytic,
            orbit: Some(orbit),
            stability,
            simulated: None,
            energy: None,
        }
    }

    pub fn simulated(d: f64, sim: SimulatedPoint) -> Self {
        Self {
            d,
            source: PointSource::Simulated,
            orbit: None,
            stability: None,
            simulated: Some(sim),
            energy: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        match (&self.orbit, &self.simulated) {
            (Some(o), _) => o.is_valid(),
            (None, Some(s)) => s.pattern.is_periodic(),
            _ => false,
        }
    }

    /// Valid and linearly stable.
    pub fn is_stable(&self) -> bool {
        self.is_valid() && self.stability.as_ref().is_some_and(|s| s.is_stable())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchEnd {
    /// The requested range was covered.
    RangeEnd,
    /// Newton failed at the smallest step; typically a fold.
    NoConvergence,
    /// A leg arrived with zero velocity.
    GrazingSingularity,
}

/// A continued family of analytic orbits, sorted by `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub orbit_type: OrbitType,
    pub points: Vec<BranchPoint>,
    pub end: BranchEnd,
    /// Last `d` reached in the continuation direction.
    pub end_d: f64,
    /// Direction of continuation, `+1` or `-1`.
    pub direction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub step: f64,
    /// The step may shrink down to `step / min_step_divisor`.
    pub min_step_divisor: f64,
    /// Largest accepted deviation from the secant predictor, per unit of
    /// `step`, in the max-norm of the unknowns (phase in turns).
    pub jump_tol: f64,
    pub solve: SolveOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            min_step_divisor: 64.0,
            jump_tol: 0.05,
            solve: SolveOptions::default(),
        }
    }
}

fn core_vec(orbit: &SolvedOrbit) -> Vec<f64> {
    match orbit {
        SolvedOrbit::TwoOne(o) => vec![o.v_k, o.phi_k, o.q, o.p],
        SolvedOrbit::OneOne(o) => vec![o.v_k, o.phi_k, o.dt_k],
    }
}

fn core_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            if i == 1 {
                phase_distance(*x, *y).abs() / TAU
            } else {
                (x - y).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the orbit family of `kind` at `params` from a guess vector.
pub fn solve_from_guess<F: Forcing>(
    kind: OrbitType,
    guess: &[f64],
    params: &SystemParams,
    forcing: &F,
    options: &SolveOptions,
) -> Result<SolvedOrbit> {
    match kind {
        OrbitType::TwoOne => {
            let g = Quadruple {
                v: guess[0],
                phi: guess[1],
                q: guess[2],
                p: guess[3],
            };
            solve_2to1_lenient(params, forcing, g, options).map(SolvedOrbit::TwoOne)
        }
        OrbitType::OneOne => {
            let g = Triple {
                v: guess[0],
                phi: guess[1],
                dt: guess[2],
            };
            solve_1to1_lenient(params, forcing, g, options).map(SolvedOrbit::OneOne)
        }
    }
}

/// Analytic point with stability attached; stability is absent when a leg
/// is exactly grazing.
pub fn analytic_point<F: Forcing>(orbit: SolvedOrbit, forcing: &F) -> Result<BranchPoint> {
    match compose_dp(&orbit, forcing) {
        Ok(report) => Ok(BranchPoint::analytic(orbit, Some(report))),
        Err(Error::GrazingSingularity { .. }) => Ok(BranchPoint::analytic(orbit, None)),
        Err(e) => Err(e),
    }
}

/// Follows the family of `seed` from `seed.d()` towards `d_stop`, warm
/// starting each solve from a secant predictor. Invalid orbits are kept.
pub fn continue_branch<F: Forcing>(
    seed: &SolvedOrbit,
    template: &SystemParams,
    forcing: &F,
    d_stop: f64,
    options: &ContinuationOptions,
) -> Result<Branch> {
    let kind = seed.orbit_type();
    let d0 = seed.d();
    let direction = if d_stop >= d0 { 1.0 } else { -1.0 };
    let min_step = options.step / options.min_step_divisor;

    let mut points = vec![analytic_point(seed.clone(), forcing)?];
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut cur = (d0, core_vec(seed));
    let mut h = options.step;
    let mut end = BranchEnd::RangeEnd;

    while direction * (d_stop - cur.0) > 1e-12 {
        let d_next = if direction * (d_stop - cur.0) <= h + 1e-12 {
            d_stop
        } else {
            cur.0 + direction * h
        };
        let dd = d_next - cur.0;
        let guess: Vec<f64> = match &prev {
            Some((dp, xp)) => cur
                .1
                .iter()
                .zip(xp)
                .enumerate()
                .map(|(i, (x, y))| {
                    let diff = if i == 1 {
                        phase_distance(*x, *y)
                    } else {
                        x - y
                    };
                    x + diff * dd / (cur.0 - dp)
                })
                .collect(),
            None => cur.1.clone(),
        };
        let params = template.with_d(d_next);
        let attempt =
            solve_from_guess(kind, &guess, &params, forcing, &options.solve).and_then(|o| {
                let x = core_vec(&o);
                if core_distance(&x, &guess) > options.jump_tol * (dd.abs() / options.step).sqrt() {
                    Err(Error::NoConvergence {
                        iterations: 0,
                        residual: f64::NAN,
                    })
                } else {
                    Ok(o)
                }
            });
        match attempt {
            Ok(orbit) => {
                let point = analytic_point(orbit, forcing)?;
                let singular = point.stability.is_none();
                let x = core_vec(point.orbit.as_ref().unwrap());
                points.push(point);
                prev = Some(cur);
                cur = (d_next, x);
                if singular {
                    end = BranchEnd::GrazingSingularity;
                    break;
                }
                h = (2.0 * h).min(options.step);
            }
            Err(Error::NoConvergence { .. }) | Err(Error::Domain(_)) => {
                h *= 0.5;
                if h < min_step {
                    end = BranchEnd::NoConvergence;
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let end_d = cur.0;
    points.sort_by(|a, b| a.d.total_cmp(&b.d));
    Ok(Branch {
        orbit_type: kind,
        points,
        end,
        end_d,
        direction,
    })
}

/// Sign predicates bisected by [`locate_critical`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalPredicate {
    /// Smallest real eigenvalue plus one.
    LambdaCrossesMinusOne,
    /// The discriminant.
    DeltaCrossesZero,
    /// Physical validity of the orbit.
    ValidityLoss,
}

fn predicate_value(point: &BranchPoint, predicate: CriticalPredicate) -> Option<f64> {
    match predicate {
        CriticalPredicate::ValidityLoss => Some(if point.is_valid() { 1.0 } else { -1.0 }),
        CriticalPredicate::LambdaCrossesMinusOne => {
            let s = point.stability.as_ref()?;
            // a complex pair has modulus below one here, far from -1
            Some(s.lambda_min().map_or(1.0, |l| l + 1.0))
        }
        CriticalPredicate::DeltaCrossesZero => point.stability.as_ref().map(|s| s.delta),
    }
}

fn bisect_predicate<F: Forcing>(
    lo: &BranchPoint,
    hi: &BranchPoint,
    predicate: CriticalPredicate,
    template: &SystemParams,
    forcing: &F,
    options: &SolveOptions,
) -> Result<f64> {
    let kind = lo
        .orbit
        .as_ref()
        .map(|o| o.orbit_type())
        .unwrap_or(OrbitType::TwoOne);
    let mut a = (
        lo.d,
        core_vec(lo.orbit.as_ref().unwrap()),
        predicate_value(lo, predicate).unwrap(),
    );
    let mut b = (hi.d, core_vec(hi.orbit.as_ref().unwrap()));
    while (b.0 - a.0).abs() > CRITICAL_TOL {
        let m = 0.5 * (a.0 + b.0);
        let guess: Vec<f64> =
            a.1.iter()
                .zip(&b.1)
                .enumerate()
                .map(|(i, (x, y))| {
                    if i == 1 {
                        x + 0.5 * phase_distance(*y, *x)
                    } else {
                        0.5 * (x + y)
                    }
                })
                .collect();
        let orbit = solve_from_guess(kind, &guess, &template.with_d(m), forcing, options)?;
        let point = analytic_point(orbit, forcing)?;
        let Some(v) = predicate_value(&point, predicate) else {
            return Err(Error::GrazingSingularity {
                t: 0.0,
                velocity: 0.0,
            });
        };
        let x = core_vec(point.orbit.as_ref().unwrap());
        if (v > 0.0) == (a.2 > 0.0) {
            a = (m, x, v);
        } else {
            b = (m, x);
        }
    }
    Ok(0.5 * (a.0 + b.0))
}

/// Locates sign changes of `predicate` between adjacent branch points by
/// bisection with the analytic solver.
pub fn locate_critical<F: Forcing>(
    branch: &Branch,
    predicate: CriticalPredicate,
    template: &SystemParams,
    forcing: &F,
    options: &SolveOptions,
) -> Vec<f64> {
    let mut found = Vec::new();
    for w in branch.points.windows(2) {
        let (Some(va), Some(vb)) = (
            predicate_value(&w[0], predicate),
            predicate_value(&w[1], predicate),
        ) else {
            continue;
        };
        if (va > 0.0) != (vb > 0.0) {
            if let Ok(d) = bisect_predicate(&w[0], &w[1], predicate, template, forcing, options) {
                found.push(d);
            }
        }
    }
    found
}

/// All critical points of a branch: period doubling, node/focus
/// inflections numbered in increasing `d`, and loss of validity.
pub fn critical_points<F: Forcing>(
    branch: &Branch,
    template: &SystemParams,
    forcing: &F,
    options: &SolveOptions,
) -> Vec<CriticalPointTag> {
    let mut tags: Vec<CriticalPointTag> = locate_critical(
        branch,
        CriticalPredicate::LambdaCrossesMinusOne,
        template,
        forcing,
        options,
    )
    .into_iter()
    .map(|d| CriticalPointTag {
        kind: CriticalKind::PeriodDoubling,
        d,
    })
    .collect();
    tags.extend(
        locate_critical(
            branch,
            CriticalPredicate::DeltaCrossesZero,
            template,
            forcing,
            options,
        )
        .into_iter()
        .enumerate()
        .map(|(j, d)| CriticalPointTag {
            kind: CriticalKind::Inflection(j as u32 + 1),
            d,
        }),
    );
    tags.extend(
        locate_critical(
            branch,
            CriticalPredicate::ValidityLoss,
            template,
            forcing,
            options,
        )
        .into_iter()
        .map(|d| CriticalPointTag {
            kind: CriticalKind::GrazingProxy,
            d,
        }),
    );
    tags.sort_by(|a, b| a.d.total_cmp(&b.d));
    tags
}

/// What bounds a stable window on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowEdge {
    PeriodDoubling,
    /// The orbit stops being physically admissible.
    Grazing,
    /// Continuation ended without convergence.
    BranchEnd,
    GrazingSingularity,
    /// Some other change of stability class.
    StabilityChange,
    /// Edge of the swept range.
    RangeEdge,
    /// The simulated attractor switches to this family here.
    AttractorOnset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_edge: WindowEdge,
    pub hi_edge: WindowEdge,
}

impl StableInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Caps the upper end at the simulated onset of the family, if lower.
    pub fn clip_to_onset(&self, onset: f64) -> Self {
        if onset < self.hi && onset > self.lo {
            Self {
                hi: onset,
                hi_edge: WindowEdge::AttractorOnset,
                ..*self
            }
        } else {
            *self
        }
    }
}

fn edge_from_tags(
    tags: &[CriticalPointTag],
    a: f64,
    b: f64,
    take_max: bool,
) -> Option<(f64, WindowEdge)> {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let inside = tags
        .iter()
        .filter(|t| t.d >= lo && t.d <= hi)
        .filter_map(|t| match t.kind {
            CriticalKind::PeriodDoubling => Some((t.d, WindowEdge::PeriodDoubling)),
            CriticalKind::GrazingProxy => Some((t.d, WindowEdge::Grazing)),
            CriticalKind::Inflection(_) => None,
        });
    if take_max {
        inside.max_by(|x, y| x.0.total_cmp(&y.0))
    } else {
        inside.min_by(|x, y| x.0.total_cmp(&y.0))
    }
}

/// Maximal runs of valid, linearly stable points, with ends refined by the
/// critical points that bound them.
pub fn stable_windows(branch: &Branch, tags: &[CriticalPointTag]) -> Vec<StableInterval> {
    let pts = &branch.points;
    let mut out = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if !pts[i].is_stable() {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < pts.len() && pts[i + 1].is_stable() {
            i += 1;
        }
        let stop = i;
        let (lo, lo_edge) = if start == 0 {
            let edge = if branch.direction < 0.0 {
                match branch.end {
                    BranchEnd::RangeEnd => WindowEdge::RangeEdge,
                    BranchEnd::NoConvergence => WindowEdge::BranchEnd,
                    BranchEnd::GrazingSingularity => WindowEdge::GrazingSingularity,
                }
            } else {
                WindowEdge::RangeEdge
            };
            (pts[0].d, edge)
        } else {
            edge_from_tags(tags, pts[start - 1].d, pts[start].d, true)
                .unwrap_or((pts[start].d, WindowEdge::StabilityChange))
        };
        let (hi, hi_edge) = if stop + 1 == pts.len() {
            let edge = if branch.direction > 0.0 {
                match branch.end {
                    BranchEnd::RangeEnd => WindowEdge::RangeEdge,
                    BranchEnd::NoConvergence => WindowEdge::BranchEnd,
                    BranchEnd::GrazingSingularity => WindowEdge::GrazingSingularity,
                }
            } else {
                WindowEdge::RangeEdge
            };
            (pts[stop].d, edge)
        } else {
            edge_from_tags(tags, pts[stop].d, pts[stop + 1].d, false)
                .unwrap_or((pts[stop].d, WindowEdge::StabilityChange))
        };
        out.push(StableInterval {
            lo,
            hi,
            lo_edge,
            hi_edge,
        });
        i += 1;
    }
    out
}

/// Settings for simulated sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub step: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
    pub simulation: SimulationConfig,
    pub pattern: PatternOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            step: 5e-4,
            tol: 1e-4,
            simulation: SimulationConfig {
                t_transient: 500.0,
                t_window: 80.0,
            },
            pattern: PatternOptions::default(),
        }
    }
}

/// One simulated sample of a scan, with grazing diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStep {
    pub d: f64,
    pub label: PatternLabel,
    /// Smallest pre-impact speed in the window.
    pub min_speed: f64,
    /// Smallest interior distance from a flight to a barrier.
    pub min_clearance: f64,
    pub resume: ImpactEvent,
    pub point: SimulatedPoint,
}

/// Simulates at `d` from `init` and classifies the steady state.
pub fn scan_step<F: Forcing>(
    template: &SystemParams,
    forcing: &F,
    d: f64,
    init: InitialState,
    options: &ScanOptions,
) -> Result<ScanStep> {
    let params = template.with_d(d);
    let fc = forcing.with_phase(params.phi);
    let outcome = simulate(&params, &fc, init, &options.simulation);
    let label = classify_outcome(&outcome, &options.pattern)?;
    let seq = match outcome {
        Ok(seq) => seq,
        Err(Error::Chatter { t, min_gap }) => return Err(Error::Chatter { t, min_gap }),
        Err(e) => return Err(e),
    };
    let min_speed = seq
        .events
        .iter()
        .map(|e| e.v_pre.abs())
        .fold(f64::INFINITY, f64::min);
    let min_clearance = seq
        .events
        .windows(2)
        .map(|w| {
            FlightSegment {
                start: w[0],
                end: w[1],
            }
            .clearance(&params, &fc)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(ScanStep {
        d,
        label,
        min_speed,
        min_clearance,
        resume: seq.resume,
        point: SimulatedPoint {
            pattern: label,
            events: seq.events,
            window: seq.window,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Down,
    Up,
}

/// When a hysteresis scan stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScanTarget {
    /// At the first label different from the starting one.
    LabelChange,
    /// At the first sample whose label is an n:1 orbit of one period.
    NToOne(usize),
}

impl ScanTarget {
    fn reached(&self, start: &PatternLabel, label: &PatternLabel) -> bool {
        match self {
            ScanTarget::LabelChange => label != start,
            ScanTarget::NToOne(n) => label.is_n_to_one(*n),
        }
    }
}

/// Result of a hysteresis scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrazingResult {
    pub direction: Direction,
    /// Midpoint of the final bracket.
    pub d: f64,
    pub bracket: (f64, f64),
    pub before: ScanStep,
    pub after: ScanStep,
    /// Every sample of the coarse scan, in scan order.
    pub path: Vec<ScanStep>,
}

/// Steps `d` from `d_from` to `d_to`, carrying the final impact of each run
/// into the next, until `target` is reached; then bisects the bracket while
/// always restarting from the state on the pre-transition side.
pub fn grazing_scan<F: Forcing>(
    template: &SystemParams,
    forcing: &F,
    d_from: f64,
    d_to: f64,
    init: InitialState,
    target: ScanTarget,
    options: &ScanOptions,
) -> Result<GrazingResult> {
    if !(options.step > 0.0) || d_from == d_to {
        return Err(Error::Domain(
            "scan needs a positive step and a non-empty range".into(),
        ));
    }
    let direction = if d_to < d_from {
        Direction::Down
    } else {
        Direction::Up
    };
    let sign = if d_to < d_from { -1.0 } else { 1.0 };
    let n_steps = ((d_to - d_from).abs() / options.step).round() as usize;

    let first = scan_step(template, forcing, d_from, init, options)?;
    let start_label = first.label;
    if target.reached(&start_label, &start_label) && !matches!(target, ScanTarget::LabelChange) {
        return Err(Error::Domain(format!(
            "scan starts on its target pattern {start_label}"
        )));
    }
    let mut path = vec![first];
    let mut bracket = None;
    for i in 1..=n_steps {
        let d = d_from + sign * options.step * i as f64;
        let prev = path.last().unwrap();
        let step = scan_step(
            template,
            forcing,
            d,
            InitialState::resume_from(&prev.resume),
            options,
        )?;
        let hit = target.reached(&start_label, &step.label);
        path.push(step);
        if hit {
            bracket = Some(path.len() - 1);
            break;
        }
    }
    let Some(hit) = bracket else {
        return Err(Error::NotFound {
            from: d_from,
            to: d_to,
        });
    };
    let mut before = path[hit - 1].clone();
    let mut after = path[hit].clone();
    while (after.d - before.d).abs() > options.tol {
        let m = 0.5 * (before.d + after.d);
        let step = scan_step(
            template,
            forcing,
            m,
            InitialState::resume_from(&before.resume),
            options,
        )?;
        if target.reached(&start_label, &step.label) {
            after = step;
        } else {
            before = step;
        }
    }
    Ok(GrazingResult {
        direction,
        d: 0.5 * (before.d + after.d),
        bracket: (before.d.min(after.d), before.d.max(after.d)),
        before,
        after,
        path,
    })
}

/// Attractors found at one `d` by the two lineages of a bistability run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coexistence {
    pub d: f64,
    /// Distinct attractors: pattern plus one cycle of impacts.
    pub attractors: Vec<SimulatedPoint>,
}

impl Coexistence {
    pub fn is_bistable(&self) -> bool {
        self.attractors.len() > 1
    }
}

/// Follows two warm-start lineages over `ds`: the first from the top of the
/// range downward, the second from the bottom upward. Each sample reports
/// the distinct attractors reached.
pub fn bistability_report<F: Forcing>(
    template: &SystemParams,
    forcing: &F,
    ds: &[f64],
    from_above: InitialState,
    from_below: InitialState,
    options: &ScanOptions,
) -> Result<Vec<Coexistence>> {
    let mut sorted = ds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lineages = [(true, from_above), (false, from_below)];
    let runs = par::map(&lineages, |(down, init)| -> Result<Vec<ScanStep>> {
        let order: Vec<f64> = if *down {
            sorted.iter().rev().copied().collect()
        } else {
            sorted.clone()
        };
        let mut state = *init;
        let mut out = Vec::with_capacity(order.len());
        for d in order {
            let step = scan_step(template, forcing, d, state, options)?;
            state = InitialState::resume_from(&step.resume);
            out.push(step);
        }
        if *down {
            out.reverse();
        }
        Ok(out)
    });
    let mut runs = runs.into_iter();
    let down = runs.next().unwrap()?;
    let up = runs.next().unwrap()?;
    Ok(down
        .into_iter()
        .zip(up)
        .map(|(a, b)| {
            let mut attractors = vec![a.point];
            if !same_attractor(&attractors[0], &b.point, &options.pattern) {
                attractors.push(b.point);
            }
            Coexistence { d: a.d, attractors }
        })
        .collect())
}

fn same_attractor(a: &SimulatedPoint, b: &SimulatedPoint, options: &PatternOptions) -> bool {
    if a.pattern != b.pattern {
        return false;
    }
    let tol = 1e3 * options.velocity_tol;
    a.cycle().iter().all(|ea| {
        b.cycle().iter().any(|eb| {
            ea.side == eb.side
                && (ea.v_pre - eb.v_pre).abs() < tol
                && phase_distance(ea.phase, eb.phase).abs() < tol
        })
    })
}

/// Independent simulations at each parameter set, run in parallel.
pub fn cold_sweep<F: Forcing>(
    params: &[SystemParams],
    forcing: &F,
    init: InitialState,
    options: &ScanOptions,
) -> Vec<Result<ScanStep>> {
    par::map(params, |p| scan_step(p, forcing, p.d, init, options))
}

/// Warm-started simulations along `params` in order.
pub fn lineage_sweep<F: Forcing>(
    params: &[SystemParams],
    forcing: &F,
    init: InitialState,
    options: &ScanOptions,
) -> Result<Vec<ScanStep>> {
    let mut state = init;
    let mut out = Vec::with_capacity(params.len());
    for p in params {
        let step = scan_step(p, forcing, p.d, state, options)?;
        state = InitialState::resume_from(&step.resume);
        out.push(step);
    }
    Ok(out)
}

/// Parameter sets for a sweep in the forcing strength at fixed length: both
/// `d` and `ḡ` follow from the physical parameters at each value.
pub fn force_sweep_params(
    physical: &PhysicalParams,
    r: f64,
    phi: f64,
    force_norms: &[f64],
) -> Result<Vec<SystemParams>> {
    force_norms
        .iter()
        .map(|&f| {
            let p = PhysicalParams {
                force_norm: f,
                ..*physical
            };
            p.nondimensionalize(r, phi)
        })
        .collect()
}

/// Evenly spaced values from `a` to `b` inclusive with spacing close to `step`.
pub fn grid(a: f64, b: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "empty sweep range [{a}, {b}] with step {step}"
        )));
    }
    let n = ((b - a) / step).round().max(1.0) as usize;
    Ok((0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect())
}

/// Everything a sweep produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub branches: Vec<Branch>,
    pub simulated: Vec<BranchPoint>,
    pub critical: Vec<CriticalPointTag>,
    pub windows: Vec<StableInterval>,
    pub grazing: Vec<GrazingResult>,
    pub bistability: Vec<Coexistence>,
}

impl SweepReport {
    /// Branch points of all branches and simulated samples, sorted by `d`.
    pub fn all_points(&self) -> Vec<&BranchPoint> {
        let mut pts: Vec<&BranchPoint> = self
            .branches
            .iter()
            .flat_map(|b| b.points.iter())
            .chain(self.simulated.iter())
            .collect();
        pts.sort_by(|a, b| a.d.total_cmp(&b.d));
        pts
    }
}
