//! Named reproduction recipes. Each pins its own parameters; only the
//! output settings and the voltage model come from the run config.

use std::f64::consts::PI;

use impact_harvest::energy::{branch_energy, WindowPolicy};
use impact_harvest::export::CriticalRow;
use impact_harvest::model::cosine_forcing;
use impact_harvest::par;
use impact_harvest::presets::{
    cold_1to1, cold_2to1, fig2_cases, fig3_cases, fig6_cases, grazing_portrait_cases,
    pattern_period_multiple, window_study, ReferenceCase, Scenario, WindowStudy,
    WindowStudyOptions, RESTITUTION,
};
use impact_harvest::simulator::{InitialState, PatternLabel};
use impact_harvest::solver::{SolveOptions, SolvedOrbit};
use impact_harvest::sweep::{
    analytic_point, bistability_report, continue_branch, force_sweep_params, grazing_scan, grid,
    BranchPoint, ContinuationOptions, GrazingResult, ScanOptions, ScanTarget,
};
use impact_harvest::{Error, PhysicalParams};
use serde_json::{json, Value};

use crate::commands::{branch_plots, simulate_case, simulated_lineage, write_motion};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{critical_rows, sweep_rows, Output};
use crate::plot::{branch_svg, BranchQuantity};

/// Transient used by the reference-case recipes, in forcing periods.
pub const REFERENCE_TRANSIENT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recipe {
    Fig2,
    Fig3,
    Fig4 { degrees: u32 },
    Fig5,
    Fig6,
    Fig7,
}

pub const RECIPE_NAMES: [&str; 9] = [
    "fig2",
    "fig3",
    "fig4-beta90",
    "fig4-beta60",
    "fig4-beta45",
    "fig4-beta30",
    "fig5",
    "fig6",
    "fig7",
];

const INCLINES: [(u32, f64); 4] = [
    (90, PI / 2.0),
    (60, PI / 3.0),
    (45, PI / 4.0),
    (30, PI / 6.0),
];

impl Recipe {
    pub fn parse(name: &str) -> CliResult<Self> {
        let r = match name {
            "fig2" => Recipe::Fig2,
            "fig3" => Recipe::Fig3,
            "fig5" => Recipe::Fig5,
            "fig6" => Recipe::Fig6,
            "fig7" => Recipe::Fig7,
            other => match other
                .strip_prefix("fig4-beta")
                .and_then(|b| b.parse::<u32>().ok())
            {
                Some(deg) if INCLINES.iter().any(|(d, _)| *d == deg) => {
                    Recipe::Fig4 { degrees: deg }
                }
                _ => {
                    return Err(CliError::Config(format!(
                        "unknown recipe `{name}`; expected one of {}",
                        RECIPE_NAMES.join(", ")
                    )))
                }
            },
        };
        Ok(r)
    }

    pub fn run(self, cfg: &RunConfig, out: &Output) -> CliResult<Value> {
        match self {
            Recipe::Fig2 => reference_recipe(cfg, out, &fig2_cases()),
            Recipe::Fig3 => reference_recipe(cfg, out, &fig3_cases()),
            Recipe::Fig4 { degrees } => fig4(cfg, out, degrees),
            Recipe::Fig5 => fig5(out),
            Recipe::Fig6 => fig6(cfg, out),
            Recipe::Fig7 => fig7(cfg, out),
        }
    }
}

fn beta_of(degrees: u32) -> f64 {
    INCLINES
        .iter()
        .find(|(d, _)| *d == degrees)
        .map(|(_, b)| *b)
        .unwrap()
}

fn numerical(err: Error, context: Value) -> CliError {
    CliError::numerical(err, context)
}

/// Whether a simulated label agrees with an expected pattern name.
pub fn reference_agrees(pattern: &str, label: &PatternLabel) -> Option<bool> {
    let head = pattern.split_whitespace().next()?;
    let k = pattern_period_multiple(pattern);
    match head {
        "1:1" => Some(label.is_alternating() && label.n == k && label.period_multiple == k),
        "2:1" => Some(label.is_n_to_one(2)),
        "3:1" => Some(label.is_n_to_one(3)),
        _ => None,
    }
}

fn reference_config(cfg: &RunConfig) -> RunConfig {
    let mut c = cfg.clone();
    c.simulation.transient_periods = REFERENCE_TRANSIENT;
    c
}

fn reference_recipe(cfg: &RunConfig, out: &Output, cases: &[ReferenceCase]) -> CliResult<Value> {
    let cfg = reference_config(cfg);
    let runs = par::map(cases, |c| -> CliResult<_> {
        let params = c.params()?;
        simulate_case(&params, c.init(), &cfg)
    });
    let mut summary = Vec::new();
    for (c, run) in cases.iter().zip(runs) {
        let (seq, label, samples) = run?;
        let title = format!("({}) d = {}: {}", c.label, c.d, label);
        write_motion(out, &format!("_{}", c.label), &seq, &samples, &title)?;
        summary.push(json!({
            "case": c,
            "pattern": label.to_string(),
            "agrees_with_reference": reference_agrees(&c.pattern, &label),
        }));
    }
    Ok(json!({ "transient_periods": REFERENCE_TRANSIENT, "cases": summary }))
}

fn study(beta: f64, with_onset: bool) -> CliResult<WindowStudy> {
    window_study(
        &Scenario::standard(beta),
        &WindowStudyOptions::default(),
        with_onset,
    )
    .map_err(|e| numerical(e, json!({ "beta": beta })))
}

/// Downward and upward hysteresis scans around the 2:1/3:1 transition of
/// the 30° device, with the lineage states needed for a bistability run.
struct Hysteresis {
    down: GrazingResult,
    up: GrazingResult,
    template: impact_harvest::SystemParams,
    init: InitialState,
}

fn hysteresis() -> CliResult<Hysteresis> {
    let sc = Scenario::standard(PI / 6.0);
    let seed = cold_2to1(&sc.at(0.16), &SolveOptions::default()).ok_or_else(|| {
        numerical(
            Error::NotFound {
                from: 0.16,
                to: 0.16,
            },
            json!({ "reason": "no 2:1 orbit at d = 0.16" }),
        )
    })?;
    let template = sc.params.with_phi(seed.phi_k());
    let init = InitialState::bottom_impact(0.0, seed.impacts()[0].v_pre);
    let f = cosine_forcing(template.phi);
    let scans = par::map(
        &[
            (0.16, 0.13, ScanTarget::LabelChange),
            (0.13, 0.16, ScanTarget::NToOne(2)),
        ],
        |(a, b, t)| grazing_scan(&template, &f, *a, *b, init, *t, &ScanOptions::default()),
    );
    let mut it = scans.into_iter();
    let down = it
        .next()
        .unwrap()
        .map_err(|e| numerical(e, json!({ "scan": "down" })))?;
    let up = it
        .next()
        .unwrap()
        .map_err(|e| numerical(e, json!({ "scan": "up" })))?;
    Ok(Hysteresis {
        down,
        up,
        template,
        init,
    })
}

fn grazing_markers(h: &Hysteresis) -> Vec<CriticalRow> {
    vec![
        CriticalRow {
            kind: "G1".into(),
            d: h.down.d,
        },
        CriticalRow {
            kind: "G2".into(),
            d: h.up.d,
        },
    ]
}

fn fig4(cfg: &RunConfig, out: &Output, degrees: u32) -> CliResult<Value> {
    let beta = beta_of(degrees);
    let s = study(beta, true)?;
    let opts = WindowStudyOptions::default();
    let sc = Scenario::standard(beta);

    // simulated samples follow the stable 2:1 motion away from the seed in both directions
    let seed = cold_2to1(&sc.at(opts.seed_d), &SolveOptions::default()).unwrap();
    let template = sc.params.with_phi(seed.phi_k());
    let init = InitialState::bottom_impact(0.0, seed.impacts()[0].v_pre);
    let below: Vec<f64> = grid(opts.d_min, opts.seed_d, 0.002)?
        .into_iter()
        .rev()
        .collect();
    let above = grid(opts.seed_d, opts.d_max, 0.002)?;
    let scan = ScanOptions::default();
    let lineages = par::map(&[below, above], |ds| {
        simulated_lineage(&template, ds, init, &scan)
    });

    let mut points = s.merged().points;
    let mut skipped = Vec::new();
    for (pts, skip) in lineages {
        points.extend(pts);
        skipped.extend(skip);
    }
    branch_energy(&mut points, &cfg.voltage, &WindowPolicy::default())?;

    let hyst = if degrees == 30 {
        Some(hysteresis()?)
    } else {
        None
    };
    let extra = hyst.as_ref().map(grazing_markers).unwrap_or_default();
    out.points("sweep", &points, Some(&sc.physical))?;
    out.critical("critical", &s.critical, &extra)?;
    let rows = sweep_rows(&points, Some(&sc.physical));
    let markers = critical_rows(&s.critical, &extra);
    branch_plots(
        out,
        "branch",
        &rows,
        &markers,
        &format!("2:1 branch, beta = {degrees} deg"),
    )?;
    Ok(json!({
        "beta": beta,
        "stable_window": s.window,
        "analytic_windows": s.analytic_windows,
        "onset": s.onset.as_ref().map(|o| json!({ "d": o.d, "before": o.before.label.to_string(), "after": o.after.label.to_string() })),
        "critical": s.critical,
        "grazing": hyst.as_ref().map(|h| json!({ "G1": h.down.d, "G2": h.up.d })),
        "skipped": skipped,
    }))
}

fn fig5(out: &Output) -> CliResult<Value> {
    let studies = par::map(&INCLINES, |(_, beta)| study(*beta, false));
    let mut summary = Vec::new();
    for ((deg, beta), s) in INCLINES.iter().zip(studies) {
        let s = s?;
        let sc = Scenario::standard(*beta);
        let points = s.merged().points;
        let stem = format!("stability_beta{deg}");
        out.points(&stem, &points, Some(&sc.physical))?;
        out.critical(&format!("critical_beta{deg}"), &s.critical, &[])?;
        let rows = sweep_rows(&points, Some(&sc.physical));
        let markers = critical_rows(&s.critical, &[]);
        let title = format!("beta = {deg} deg");
        out.svg(&format!("{stem}_delta.svg"), || {
            branch_svg(&rows, &markers, BranchQuantity::Delta, &title)
        })?;
        out.svg(&format!("{stem}_eigenvalues.svg"), || {
            branch_svg(&rows, &markers, BranchQuantity::Eigenvalue, &title)
        })?;
        summary.push(
            json!({ "beta": beta, "critical": s.critical, "analytic_windows": s.analytic_windows }),
        );
    }
    Ok(json!({ "inclines": summary }))
}

fn fig6(cfg: &RunConfig, out: &Output) -> CliResult<Value> {
    let h = hysteresis()?;
    let f = cosine_forcing(h.template.phi);
    let ds = grid(0.1370, 0.1430, 0.0005)?;
    let coexist = bistability_report(
        &h.template,
        &f,
        &ds,
        h.init,
        InitialState::resume_from(&h.down.after.resume),
        &ScanOptions::default(),
    )
    .map_err(|e| numerical(e, json!({ "stage": "bistability" })))?;
    let mut points: Vec<BranchPoint> = coexist
        .iter()
        .flat_map(|c| {
            c.attractors
                .iter()
                .map(move |a| BranchPoint::simulated(c.d, a.clone()))
        })
        .collect();
    branch_energy(&mut points, &cfg.voltage, &WindowPolicy::default())?;
    let sc = Scenario::standard(PI / 6.0);
    out.points("bistability", &points, Some(&sc.physical))?;
    let markers = grazing_markers(&h);
    out.critical("critical", &[], &markers)?;
    let rows = sweep_rows(&points, Some(&sc.physical));
    for (suffix, q) in [
        ("velocity", BranchQuantity::Velocity),
        ("phase", BranchQuantity::Phase),
        ("interval", BranchQuantity::Interval),
    ] {
        out.svg(&format!("bistability_{suffix}.svg"), || {
            branch_svg(&rows, &markers, q, "2:1 and 3:1 coexistence")
        })?;
    }

    let mut cases = fig6_cases();
    cases.extend(grazing_portrait_cases().into_iter().map(|mut c| {
        c.label = format!("graze-{}", c.label);
        c
    }));
    let portraits = reference_recipe(cfg, out, &cases)?;
    Ok(json!({
        "G1": { "d": h.down.d, "bracket": h.down.bracket, "before": h.down.before.label.to_string(), "after": h.down.after.label.to_string() },
        "G2": { "d": h.up.d, "bracket": h.up.bracket, "before": h.up.before.label.to_string(), "after": h.up.after.label.to_string() },
        "coexistence": coexist.iter().map(|c| json!({
            "d": c.d,
            "attractors": c.attractors.iter().map(|a| a.pattern.to_string()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "portraits": portraits,
    }))
}

/// Analytic 1:1 and 2:1 families plus simulated samples against `d`, with
/// energies attached.
fn energy_panel(beta: f64, cfg: &RunConfig) -> CliResult<(Vec<BranchPoint>, Vec<Value>)> {
    let sc = Scenario::standard(beta);
    let f = sc.forcing();
    let length = |s: f64| PhysicalParams { s, ..sc.physical }.dimensionless_length();
    let (d_lo, d_hi) = (length(0.19), length(0.72));
    let cont = ContinuationOptions::default();
    let mut points = Vec::new();

    let seeds: Vec<(Option<SolvedOrbit>, f64)> = vec![
        (cold_1to1(&sc.at(0.40), &cont.solve), 0.40),
        (cold_2to1(&sc.at(0.18), &cont.solve), 0.18),
    ];
    let jobs: Vec<(SolvedOrbit, f64)> = seeds
        .into_iter()
        .filter_map(|(o, _)| o)
        .flat_map(|o| [(o.clone(), d_lo), (o, d_hi)])
        .collect();
    let branches = par::map(&jobs, |(seed, stop)| {
        continue_branch(seed, &sc.params, &f, *stop, &cont)
    });
    for b in branches {
        let b = b.map_err(|e| numerical(e, json!({ "beta": beta, "stage": "continuation" })))?;
        points.extend(b.points);
    }

    let start = cold_1to1(&sc.at(d_hi), &cont.solve);
    let (template, init) = match &start {
        Some(o) => (
            sc.params.with_phi(o.phi_k()),
            InitialState::bottom_impact(0.0, o.impacts()[0].v_pre),
        ),
        None => (sc.params, InitialState::bottom_impact(0.0, 0.6)),
    };
    let ds: Vec<f64> = grid(d_lo, d_hi, 0.005)?.into_iter().rev().collect();
    let (sim, skipped) = simulated_lineage(&template, &ds, init, &ScanOptions::default());
    points.extend(sim);
    branch_energy(&mut points, &cfg.voltage, &WindowPolicy::default())?;
    Ok((points, skipped))
}

/// Simulated and analytic samples along a sweep in forcing strength at
/// fixed cylinder length 0.85 m.
fn force_panel(beta: f64, cfg: &RunConfig) -> CliResult<(Vec<BranchPoint>, Vec<Value>)> {
    let mut physical = Scenario::standard(beta).physical;
    physical.s = 0.85;
    let forces = grid(6.0, 22.0, 0.25)?;
    let params = force_sweep_params(&physical, RESTITUTION, 0.0, &forces)?;
    let solve = SolveOptions::default();
    let analytic = par::map(&params, |p| {
        let f = cosine_forcing(p.phi);
        [cold_1to1(p, &solve), cold_2to1(p, &solve)]
            .into_iter()
            .flatten()
            .filter_map(|o| analytic_point(o, &f).ok())
            .collect::<Vec<_>>()
    });
    let mut points: Vec<BranchPoint> = analytic.into_iter().flatten().collect();

    let first = &params[0];
    let init = cold_1to1(first, &solve)
        .map(|o| InitialState::bottom_impact(0.0, o.impacts()[0].v_pre))
        .unwrap_or(InitialState::bottom_impact(0.0, 0.6));
    let f = cosine_forcing(first.phi);
    let scan = ScanOptions::default();
    let mut state = init;
    let mut skipped = Vec::new();
    for (p, force) in params.iter().zip(&forces) {
        match impact_harvest::sweep::scan_step(p, &f, p.d, state, &scan) {
            Ok(step) => {
                state = InitialState::resume_from(&step.resume);
                points.push(BranchPoint::simulated(p.d, step.point));
            }
            Err(e) => {
                skipped.push(json!({ "F_norm": force, "error": e.to_string() }));
                state = init;
            }
        }
    }
    branch_energy(&mut points, &cfg.voltage, &WindowPolicy::default())?;
    Ok((points, skipped))
}

fn fig7(cfg: &RunConfig, out: &Output) -> CliResult<Value> {
    let panels = par::map(&INCLINES, |(_, beta)| energy_panel(*beta, cfg));
    let mut summary = Vec::new();
    for ((deg, beta), panel) in INCLINES.iter().zip(panels) {
        let (points, skipped) = panel?;
        let sc = Scenario::standard(*beta);
        let stem = format!("energy_beta{deg}");
        out.points(&stem, &points, Some(&sc.physical))?;
        let rows = sweep_rows(&points, Some(&sc.physical));
        out.svg(&format!("{stem}.svg"), || {
            branch_svg(
                &rows,
                &[],
                BranchQuantity::Energy,
                &format!("beta = {deg} deg, F = 5 N"),
            )
        })?;
        summary.push(json!({ "beta": beta, "points": points.len(), "skipped": skipped }));
    }
    for deg in [90, 30] {
        let (points, skipped) = force_panel(beta_of(deg), cfg)?;
        let stem = format!("energy_force_beta{deg}");
        out.points(&stem, &points, None)?;
        let rows = sweep_rows(&points, None);
        out.svg(&format!("{stem}.svg"), || {
            branch_svg(
                &rows,
                &[],
                BranchQuantity::Energy,
                &format!("beta = {deg} deg, s = 0.85 m"),
            )
        })?;
        summary.push(
            json!({ "beta": beta_of(deg), "s": 0.85, "points": points.len(), "skipped": skipped }),
        );
    }
    Ok(json!({ "voltage": cfg.voltage, "panels": summary }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_names() {
        for n in RECIPE_NAMES {
            Recipe::parse(n).unwrap();
        }
        assert!(Recipe::parse("fig4-beta10").is_err());
        assert!(Recipe::parse("fig8").is_err());
    }

    #[test]
    fn reference_matching() {
        let l = PatternLabel {
            n: 4,
            m: 4,
            period_multiple: 4,
            class: impact_harvest::simulator::PatternClass::Periodic,
        };
        assert_eq!(reference_agrees("1:1 period-8", &l), Some(true));
        assert_eq!(reference_agrees("1:1", &l), Some(false));
        assert_eq!(reference_agrees("G1", &l), None);
    }
}
