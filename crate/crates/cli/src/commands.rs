//! One runner per scenario. Each returns a JSON summary that is also
//! written to `summary.json` in the output directory.

use impact_harvest::energy::{branch_energy, sequence_energy, WindowPolicy};
use impact_harvest::export::CriticalRow;
use impact_harvest::model::{cosine_forcing, SystemParams};
use impact_harvest::par;
use impact_harvest::presets::{cold_1to1, cold_2to1};
use impact_harvest::simulator::{
    classify_pattern, reconstruct_absolute, simulate, ImpactSequence, InitialState, PatternLabel,
};
use impact_harvest::solver::{
    cold_start_1to1, cold_start_2to1, OrbitType, SolveOptions, SolvedOrbit,
};
use impact_harvest::sweep::{
    analytic_point, continue_branch, critical_points, grazing_scan, grid, scan_step,
    stable_windows, BranchPoint, ContinuationOptions, Direction, ScanOptions,
};
use impact_harvest::Error;
use serde_json::{json, Value};

use crate::config::{OrbitChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{critical_rows, sweep_rows, trajectory_rows, Output};
use crate::plot::{branch_svg, phase_portrait_svg, time_series_svg, BranchQuantity};

fn fail(err: Error, context: Value) -> CliError {
    match err {
        Error::Domain(msg) => CliError::Config(msg),
        other => CliError::numerical(other, context),
    }
}

/// Simulates and classifies; the trajectory covers two pattern periods from
/// the start of the window.
pub fn simulate_case(
    params: &SystemParams,
    init: InitialState,
    cfg: &RunConfig,
) -> CliResult<(
    ImpactSequence,
    PatternLabel,
    Vec<impact_harvest::simulator::TrajectorySample>,
)> {
    let f = cosine_forcing(params.phi);
    let seq = simulate(params, &f, init, &cfg.simulation.config())
        .map_err(|e| fail(e, json!({ "params": params, "init": init })))?;
    let label = classify_pattern(&seq, &cfg.simulation.pattern())?;
    let span = if label.is_periodic() {
        2.0 * label.period_in_time_units()
    } else {
        8.0
    };
    let t_end = seq.window.0 + span;
    let mut samples = reconstruct_absolute(&seq, &f, cfg.simulation.samples_per_unit);
    samples.retain(|s| s.t <= t_end + 1e-12);
    Ok((seq, label, samples))
}

pub fn write_motion(
    out: &Output,
    suffix: &str,
    seq: &ImpactSequence,
    samples: &[impact_harvest::simulator::TrajectorySample],
    title: &str,
) -> CliResult<()> {
    out.impacts(&format!("impacts{suffix}"), &seq.events)?;
    out.trajectory(&format!("trajectory{suffix}"), samples)?;
    let rows = trajectory_rows(samples);
    let d = seq.params.d;
    out.svg(&format!("phase{suffix}.svg"), || {
        phase_portrait_svg(&rows, d, title)
    })?;
    out.svg(&format!("timeseries{suffix}.svg"), || {
        time_series_svg(&rows, title)
    })?;
    Ok(())
}

pub fn run_simulate(cfg: &RunConfig, out: &Output) -> CliResult<Value> {
    let params = cfg.params.resolve()?;
    let (seq, label, samples) = simulate_case(&params, cfg.init.state(), cfg)?;
    write_motion(
        out,
        "",
        &seq,
        &samples,
        &format!("{label}, d = {}", params.d),
    )?;
    Ok(json!({
        "params": params,
        "pattern": label.to_string(),
        "label": label,
        "window": seq.window,
        "impacts_in_window": seq.events.len(),
    }))
}

pub fn run_energy(cfg: &RunConfig, out: &Output) -> CliResult<Value> {
    let params = cfg.params.resolve()?;
    let (seq, label, samples) = simulate_case(&params, cfg.init.state(), cfg)?;
    let policy = WindowPolicy::default();
    let summary = sequence_energy(&seq, &cfg.voltage, policy.length_for(label.orbit_type()))
        .map_err(|e| fail(e, json!({ "params": params, "pattern": label.to_string() })))?;
    out.energy("energy", &seq.events, &cfg.voltage)?;
    write_motion(
        out,
        "",
        &seq,
        &samples,
        &format!("{label}, d = {}", params.d),
    )?;
    Ok(json!({
        "params": params,
        "pattern": label.to_string(),
        "voltage": cfg.voltage,
        "energy": summary,
    }))
}

fn solve_kind(choice: OrbitChoice) -> OrbitType {
    choice.into()
}

pub fn run_solve(cfg: &RunConfig, out: &Output) -> CliResult<Value> {
    let params = cfg.params.resolve()?;
    let f = cosine_forcing(params.phi);
    let opts = SolveOptions::default();
    let kind = solve_kind(cfg.solve.orbit);
    let orbits: Vec<SolvedOrbit> = if cfg.solve.seed_grid {
        match kind {
            OrbitType::TwoOne => cold_start_2to1(&params, &f, &opts)
                .into_iter()
                .map(SolvedOrbit::TwoOne)
                .collect(),
            OrbitType::OneOne => cold_start_1to1(&params, &f, &opts)
                .into_iter()
                .map(SolvedOrbit::OneOne)
                .collect(),
        }
    } else {
        let guess = cfg.solve.guess.as_deref().unwrap_or_default();
        let orbit = impact_harvest::sweep::solve_from_guess(kind, guess, &params, &f, &opts)
            .map_err(|e| fail(e, json!({ "params": params, "guess": guess })))?;
        vec![orbit]
    };
    if orbits.is_empty() {
        return Err(CliError::numerical(
            Error::NotFound {
                from: params.d,
                to: params.d,
            },
            json!({ "params": params, "orbit": kind.label(), "reason": "seed grid found no root" }),
        ));
    }
    let mut points = orbits
        .into_iter()
        .map(|o| analytic_point(o, &f))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| fail(e, json!({ "params": params })))?;
    branch_energy(&mut points, &cfg.voltage, &WindowPolicy::default())?;
    out.points("orbits", &points, cfg.params.physical.as_ref())?;
    let records: Vec<Value> = points
        .iter()
        .map(|p| {
            let o = p.orbit.as_ref().unwrap();
            json!({
                "orbit": o.record(),
                "stability": p.stability,
                "energy": p.energy,
            })
        })
        .collect();
    Ok(json!({ "params": params, "orbits": records }))
}

/// Simulated samples along `ds`, each warm-started from the previous one.
/// A failed sample is skipped and the lineage restarts from `init`.
pub fn simulated_lineage(
    template: &SystemParams,
    ds: &[f64],
    init: InitialState,
    options: &ScanOptions,
) -> (Vec<BranchPoint>, Vec<Value>) {
    let f = cosine_forcing(template.phi);
    let mut state = init;
    let mut points = Vec::with_capacity(ds.len());
    let mut skipped = Vec::new();
    for &d in ds {
        match scan_step(template, &f, d, state, options) {
            Ok(step) => {
                state = InitialState::resume_from(&step.resume);
                points.push(BranchPoint::simulated(d, step.point));
            }
            Err(e) => {
                skipped.push(json!({ "d": d, "error": e.to_string() }));
                state = init;
            }
        }
    }
    (points, skipped)
}

pub fn branch_plots(
    out: &Output,
    stem: &str,
    rows: &[impact_harvest::export::SweepRow],
    markers: &[CriticalRow],
    title: &str,
) -> CliResult<()> {
    for (suffix, q) in [
        ("velocity", BranchQuantity::Velocity),
        ("phase", BranchQuantity::Phase),
        ("interval", BranchQuantity::Interval),
        ("delta", BranchQuantity::Delta),
        ("eigenvalues", BranchQuantity::Eigenvalue),
        ("energy", BranchQuantity::Energy),
    ] {
        out.svg(&format!("{stem}_{suffix}.svg"), || {
            branch_svg(rows, markers, q, title)
        })?;
    }
    Ok(())
}

pub fn run_sweep(cfg: &RunConfig, out: &Output) -> CliResult<Value> {
    let s = &cfg.sweep;
    let template = cfg.params.resolve()?;
    let f = cosine_forcing(template.phi);
    let opts = ContinuationOptions {
        step: s.step.min(1e-3),
        ..ContinuationOptions::default()
    };
    let seed_d = s.seed_d.unwrap_or(0.5 * (s.from + s.to));
    let seed_params = template.with_d(seed_d);
    let seed = match s.orbit {
        OrbitChoice::TwoOne => cold_2to1(&seed_params, &opts.solve),
        OrbitChoice::OneOne => cold_1to1(&seed_params, &opts.solve),
    }
    .ok_or_else(|| {
        CliError::numerical(
            Error::NotFound {
                from: seed_d,
                to: seed_d,
            },
            json!({ "params": seed_params, "reason": "no valid orbit to seed the branch" }),
        )
    })?;
    let halves = par::map(&[s.from, s.to], |&stop| {
        continue_branch(&seed, &template, &f, stop, &opts)
    });
    let mut branches = Vec::new();
    for h in halves {
        branches.push(h.map_err(|e| fail(e, json!({ "seed": seed.record() })))?);
    }
    let mut merged = branches[0].clone();
    merged
        .points
        .extend(branches[1].points.iter().skip(1).cloned());
    merged.points.sort_by(|a, b| a.d.total_cmp(&b.d));
    let critical = critical_points(&merged, &template, &f, &opts.solve);
    let windows = stable_windows(&merged, &critical);

    let mut points = merged.points.clone();
    let mut skipped = Vec::new();
    if s.simulate {
        let mut ds = grid(s.from, s.to, s.step)?;
        if s.direction == Direction::Down {
            ds.reverse();
        }
        let scan = ScanOptions {
            simulation: cfg.simulation.config(),
            pattern: cfg.simulation.pattern(),
            ..ScanOptions::default()
        };
        let (sim, skip) = simulated_lineage(&template, &ds, cfg.init.state(), &scan);
        points.extend(sim);
        skipped = skip;
    }
    branch_energy(&mut points, &cfg.voltage, &WindowPolicy::default())?;
    let physical = cfg.params.physical.as_ref();
    out.points("sweep", &points, physical)?;
    out.critical("critical", &critical, &[])?;
    out.json("windows.json", &windows)?;
    let rows = sweep_rows(&points, physical);
    let markers = critical_rows(&critical, &[]);
    branch_plots(
        out,
        "sweep",
        &rows,
        &markers,
        &format!("{} branch", seed.orbit_type().label()),
    )?;
    Ok(json!({
        "params": template,
        "orbit": seed.orbit_type().label(),
        "branch_ends": branches.iter().map(|b| json!({ "end": b.end, "d": b.end_d })).collect::<Vec<_>>(),
        "critical": critical,
        "stable_windows": windows,
        "skipped": skipped,
    }))
}

pub fn run_graze(cfg: &RunConfig, out: &Output) -> CliResult<Value> {
    let g = &cfg.graze;
    let params = cfg.params.resolve()?;
    let (template, init) = match g.start_on {
        Some(choice) => {
            let at = params.with_d(g.from);
            let orbit = match choice {
                OrbitChoice::TwoOne => cold_2to1(&at, &SolveOptions::default()),
                OrbitChoice::OneOne => cold_1to1(&at, &SolveOptions::default()),
            }
            .ok_or_else(|| {
                CliError::numerical(
                    Error::NotFound {
                        from: g.from,
                        to: g.from,
                    },
                    json!({ "params": at, "reason": "no valid orbit to start the scan" }),
                )
            })?;
            (
                params.with_phi(orbit.phi_k()),
                InitialState::bottom_impact(0.0, orbit.impacts()[0].v_pre),
            )
        }
        None => (params, cfg.init.state()),
    };
    let f = cosine_forcing(template.phi);
    let scan = g.scan_options(&cfg.simulation);
    let result =
        grazing_scan(&template, &f, g.from, g.to, init, g.target.into(), &scan).map_err(|e| {
            fail(
                e,
                json!({ "template": template, "from": g.from, "to": g.to, "target": g.target }),
            )
        })?;
    let kind = match result.direction {
        Direction::Down => "G1",
        Direction::Up => "G2",
    };
    let marker = vec![CriticalRow {
        kind: kind.into(),
        d: result.d,
    }];
    let mut points: Vec<BranchPoint> = result
        .path
        .iter()
        .chain([&result.before, &result.after])
        .map(|s| BranchPoint::simulated(s.d, s.point.clone()))
        .collect();
    points.sort_by(|a, b| a.d.total_cmp(&b.d));
    points.dedup_by(|a, b| a.d == b.d);
    branch_energy(&mut points, &cfg.voltage, &WindowPolicy::default())?;
    let physical = cfg.params.physical.as_ref();
    out.points("scan", &points, physical)?;
    out.critical("critical", &[], &marker)?;
    let rows = sweep_rows(&points, physical);
    out.svg("scan_velocity.svg", || {
        branch_svg(&rows, &marker, BranchQuantity::Velocity, "hysteresis scan")
    })?;
    Ok(json!({
        "direction": result.direction,
        "d": result.d,
        "bracket": result.bracket,
        "before": result.before.label.to_string(),
        "after": result.after.label.to_string(),
        "min_clearance_before": result.before.min_clearance,
        "template": template,
    }))
}
