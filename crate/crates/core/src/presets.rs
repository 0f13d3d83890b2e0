//! Reference device settings and the composite studies built on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cosine_forcing, reference_device, CosineForcing, PhysicalParams, SystemParams};
use crate::simulator::InitialState;
use crate::solver::{cold_start_1to1, cold_start_2to1, SolveOptions, SolvedOrbit};
use crate::stability::CriticalPointTag;
use crate::sweep::{
    continue_branch, critical_points, grazing_scan, stable_windows, Branch, ContinuationOptions,
    GrazingResult, ScanOptions, ScanTarget, StableInterval,
};

pub const RESTITUTION: f64 = 0.5;

/// A device configuration with its dimensionless template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub beta: f64,
    pub physical: PhysicalParams,
    pub params: SystemParams,
}

impl Scenario {
    pub fn new(beta: f64, force_norm: f64, omega: f64) -> Result<Self> {
        let physical = reference_device(beta, force_norm, omega);
        let params = physical.nondimensionalize(RESTITUTION, 0.0)?;
        Ok(Self {
            beta,
            physical,
            params,
        })
    }

    /// 5 N forcing at 5π rad/s.
    pub fn standard(beta: f64) -> Self {
        Self::new(beta, 5.0, 5.0 * PI).expect("reference device is valid")
    }

    pub fn at(&self, d: f64) -> SystemParams {
        self.params.with_d(d)
    }

    pub fn forcing(&self) -> CosineForcing {
        cosine_forcing(self.params.phi)
    }
}

/// A reference simulation started at a bottom impact:
/// `Z(t0) = d/2`, pre-impact velocity `v0`, forcing phase `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCase {
    pub label: String,
    pub beta: f64,
    pub force_norm: f64,
    pub omega: f64,
    pub d: f64,
    pub s: f64,
    pub v0: f64,
    pub phi: f64,
    /// Expected pattern, e.g. "1:1" or "1:1 period-8".
    pub pattern: String,
}

impl ReferenceCase {
    pub fn params(&self) -> Result<SystemParams> {
        let sc = Scenario::new(self.beta, self.force_norm, self.omega)?;
        Ok(sc.at(self.d).with_phi(self.phi))
    }

    pub fn forcing(&self) -> CosineForcing {
        cosine_forcing(self.phi)
    }

    pub fn init(&self) -> InitialState {
        InitialState::bottom_impact(0.0, self.v0)
    }
}

fn case(
    label: &str,
    beta: f64,
    force_norm: f64,
    omega: f64,
    d: f64,
    s: f64,
    v0: f64,
    phi: f64,
    pattern: &str,
) -> ReferenceCase {
    ReferenceCase {
        label: label.into(),
        beta,
        force_norm,
        omega,
        d,
        s,
        v0,
        phi,
        pattern: pattern.into(),
    }
}

/// Phase-portrait cases for the vertical and the 30° device.
pub fn fig2_cases() -> Vec<ReferenceCase> {
    let (b90, f90, w90) = (PI / 2.0, 61.0, 18.0 * PI);
    let (b30, f30, w30) = (PI / 6.0, 5.0, 5.0 * PI);
    vec![
        case("a", b90, f90, w90, 0.197, 0.316, 0.5474, 6.211, "1:1"),
        case(
            "b",
            b90,
            f90,
            w90,
            0.193,
            0.309,
            0.561,
            6.229,
            "1:1 period-4",
        ),
        case("c", b90, f90, w90, 0.189, 0.302, 0.465, 6.177, "2:1"),
        case("d", b30, f30, w30, 0.252, 0.405, 0.669, 0.128, "1:1"),
        case(
            "e",
            b30,
            f30,
            w30,
            0.222,
            0.357,
            0.676,
            0.242,
            "1:1 period-8",
        ),
        case(
            "f",
            b30,
            f30,
            w30,
            0.213,
            0.342,
            0.674,
            0.321,
            "1:1 period-10",
        ),
        case("g", b30, f30, w30, 0.204, 0.328, 0.532, 6.106, "2:1"),
    ]
}

/// Time-series cases at 5 N, 5π rad/s; the incline is not stated for these
/// and the 30° device is used.
pub fn fig3_cases() -> Vec<ReferenceCase> {
    let (b, f, w) = (PI / 6.0, 5.0, 5.0 * PI);
    vec![
        case("a", b, f, w, 0.38, 0.61, 0.8673, 0.4217, "1:1"),
        case("b", b, f, w, 0.184, 0.30, 0.2164, 1.21, "2:1"),
        case("c", b, f, w, 0.137, 0.22, 0.2059, 0.6503, "3:1"),
    ]
}

/// Phase portraits of 2:1 motion approaching grazing and the 3:1 motion
/// beyond it, 30° device.
pub fn grazing_portrait_cases() -> Vec<ReferenceCase> {
    let (b, f, w) = (PI / 6.0, 5.0, 5.0 * PI);
    vec![
        case("a", b, f, w, 0.16, 0.27, 0.1924, 1.015, "2:1"),
        case("d", b, f, w, 0.139, 0.23, 0.1959, 0.7788, "2:1"),
        case("g", b, f, w, 0.138, 0.23, 0.1845, 0.7342, "3:1"),
    ]
}

/// Bistability cases for the 30° device.
pub fn fig6_cases() -> Vec<ReferenceCase> {
    let (b, f, w) = (PI / 6.0, 5.0, 5.0 * PI);
    vec![
        case("d", b, f, w, 0.1378, 0.221, 0.416, 5.842, "G1"),
        case("e", b, f, w, 0.14, 0.224, 0.4185, 5.855, "2:1"),
        case("f", b, f, w, 0.14, 0.224, 0.3967, 5.88, "3:1"),
        case("g", b, f, w, 0.1419, 0.228, 0.4069, 5.864, "G2"),
    ]
}

/// Period multiple named by a pattern's "period-N" suffix, where N counts
/// dimensionless time units.
pub fn pattern_period_multiple(pattern: &str) -> usize {
    pattern
        .split_whitespace()
        .find_map(|w| w.strip_prefix("period-"))
        .and_then(|n| n.parse::<usize>().ok())
        .map(|n| n / 2)
        .unwrap_or(1)
}

/// Valid 2:1 orbit from the cold-start seed grid, preferring stable roots.
pub fn cold_2to1(params: &SystemParams, options: &SolveOptions) -> Option<SolvedOrbit> {
    let f = cosine_forcing(params.phi);
    let roots = cold_start_2to1(params, &f, options);
    let mut valid: Vec<SolvedOrbit> = roots
        .into_iter()
        .filter(|o| o.valid)
        .map(SolvedOrbit::TwoOne)
        .collect();
    valid.sort_by_key(|o| {
        !crate::stability::compose_dp(o, &f)
            .map(|s| s.is_stable())
            .unwrap_or(false)
    });
    valid.into_iter().next()
}

/// Valid 1:1 orbit from the cold-start seed grid, preferring stable roots.
pub fn cold_1to1(params: &SystemParams, options: &SolveOptions) -> Option<SolvedOrbit> {
    let f = cosine_forcing(params.phi);
    let roots = cold_start_1to1(params, &f, options);
    let mut valid: Vec<SolvedOrbit> = roots
        .into_iter()
        .filter(|o| o.valid)
        .map(SolvedOrbit::OneOne)
        .collect();
    valid.sort_by_key(|o| {
        !crate::stability::compose_dp(o, &f)
            .map(|s| s.is_stable())
            .unwrap_or(false)
    });
    valid.into_iter().next()
}

/// Settings of the stable-window study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStudyOptions {
    /// Where the 2:1 branch is seeded.
    pub seed_d: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub continuation: ContinuationOptions,
    /// Where the downward scan out of the 1:1 family starts.
    pub onset_from: f64,
    pub onset_to: f64,
    pub onset_scan: ScanOptions,
}

impl Default for WindowStudyOptions {
    fn default() -> Self {
        Self {
            seed_d: 0.18,
            d_min: 0.12,
            d_max: 0.24,
            continuation: ContinuationOptions::default(),
            onset_from: 0.235,
            onset_to: 0.19,
            onset_scan: ScanOptions {
                step: 1e-3,
                tol: 1e-4,
                simulation: crate::simulator::SimulationConfig {
                    t_transient: 800.0,
                    t_window: 80.0,
                },
                ..ScanOptions::default()
            },
        }
    }
}

/// Analytic 2:1 branch, its critical points and stable windows, and the
/// simulated onset of 2:1 motion when `d` is lowered out of the 1:1 regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStudy {
    pub beta: f64,
    pub lower: Branch,
    pub upper: Branch,
    pub critical: Vec<CriticalPointTag>,
    pub analytic_windows: Vec<StableInterval>,
    pub onset: Option<GrazingResult>,
    /// Analytic window containing the seed, capped at the simulated onset.
    pub window: Option<StableInterval>,
}

impl WindowStudy {
    /// Both halves of the branch as one sorted branch.
    pub fn merged(&self) -> Branch {
        let mut points = self.lower.points.clone();
        points.extend(self.upper.points.iter().skip(1).cloned());
        points.sort_by(|a, b| a.d.total_cmp(&b.d));
        Branch {
            points,
            ..self.upper.clone()
        }
    }
}

/// Runs the stable-window study for one incline.
pub fn window_study(
    scenario: &Scenario,
    options: &WindowStudyOptions,
    with_onset: bool,
) -> Result<WindowStudy> {
    let solve = options.continuation.solve;
    let seed_params = scenario.at(options.seed_d);
    let seed = cold_2to1(&seed_params, &solve).ok_or_else(|| {
        Error::Domain(format!(
            "no valid 2:1 orbit at d = {} for the seed",
            options.seed_d
        ))
    })?;
    let f = scenario.forcing();
    let template = scenario.params;
    let (lower, upper) = if crate::par::is_parallel() {
        let dirs = [options.d_min, options.d_max];
        let mut out = crate::par::map(&dirs, |&stop| {
            continue_branch(&seed, &template, &f, stop, &options.continuation)
        });
        let upper = out.pop().unwrap()?;
        let lower = out.pop().unwrap()?;
        (lower, upper)
    } else {
        (
            continue_branch(&seed, &template, &f, options.d_min, &options.continuation)?,
            continue_branch(&seed, &template, &f, options.d_max, &options.continuation)?,
        )
    };
    let mut study = WindowStudy {
        beta: scenario.beta,
        lower,
        upper,
        critical: Vec::new(),
        analytic_windows: Vec::new(),
        onset: None,
        window: None,
    };
    let merged = study.merged();
    study.critical = critical_points(&merged, &template, &f, &solve);
    study.analytic_windows = stable_windows(&merged, &study.critical);
    let containing = study
        .analytic_windows
        .iter()
        .find(|w| w.lo <= options.seed_d && w.hi >= options.seed_d)
        .copied();

    if with_onset {
        let start = scenario.at(options.onset_from);
        let init_orbit = cold_1to1(&start, &solve);
        let (template, init) = match &init_orbit {
            Some(o) => (
                scenario.params.with_phi(o.phi_k()),
                InitialState::bottom_impact(0.0, o.impacts()[0].v_pre),
            ),
            None => (scenario.params, InitialState::bottom_impact(0.0, 0.6)),
        };
        let fc = cosine_forcing(template.phi);
        study.onset = grazing_scan(
            &template,
            &fc,
            options.onset_from,
            options.onset_to,
            init,
            ScanTarget::NToOne(2),
            &options.onset_scan,
        )
        .ok();
    }
    study.window = match (containing, &study.onset) {
        (Some(w), Some(onset)) => Some(w.clip_to_onset(onset.d)),
        (w, _) => w,
    };
    Ok(study)
}
