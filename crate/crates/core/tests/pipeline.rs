use std::f64::consts::PI;

use impact_harvest::export::{read_sweep, write_sweep, SweepRow};
use impact_harvest::model::cosine_forcing;
use impact_harvest::par;
use impact_harvest::presets::{cold_2to1, Scenario};
use impact_harvest::simulator::{
    classify_pattern, simulate, InitialState, PatternOptions, SimulationConfig,
};
use impact_harvest::solver::{best_match, seeds_2to1, solve_2to1_lenient, SolveOptions};
use impact_harvest::sweep::{continue_branch, ContinuationOptions};

#[test]
fn parallel_and_sequential_seed_grids_agree() {
    let params = Scenario::standard(PI / 6.0).at(0.18);
    let f = cosine_forcing(params.phi);
    let seeds = seeds_2to1(&params);
    let opts = SolveOptions::default();
    let solve = |s: &_| solve_2to1_lenient(&params, &f, *s, &opts).ok();
    assert_eq!(par::map(&seeds, solve), par::map_sequential(&seeds, solve));
}

#[test]
fn simulation_settles_on_the_solved_orbit() {
    let params = Scenario::standard(PI / 6.0).at(0.16);
    let orbit = cold_2to1(&params, &SolveOptions::default()).expect("2:1 orbit at d = 0.16");
    let p = orbit.params();
    let f = cosine_forcing(p.phi);
    let first = orbit.impacts()[0];
    let init = InitialState::bottom_impact(0.0, first.v_pre + 1e-4);
    let seq = simulate(&p, &f, init, &SimulationConfig::periods(300, 40)).unwrap();
    let label = classify_pattern(&seq, &PatternOptions::default()).unwrap();
    assert_eq!(label.to_string(), "2:1 period-2");
    for e in &seq.events {
        let (dv, dphi) = best_match(&orbit, e.v_pre.abs(), e.t * PI + p.phi);
        assert!(
            dv < 1e-8 && dphi < 1e-8,
            "impact at t = {} off orbit: {dv:e}, {dphi:e}",
            e.t
        );
    }
}

#[test]
fn branch_rows_survive_csv_round_trip() {
    let sc = Scenario::standard(PI / 6.0);
    let seed = cold_2to1(&sc.at(0.18), &SolveOptions::default()).unwrap();
    let branch = continue_branch(
        &seed,
        &sc.params,
        &cosine_forcing(sc.params.phi),
        0.19,
        &ContinuationOptions::default(),
    )
    .unwrap();
    assert!(branch.points.len() > 5);
    let rows: Vec<SweepRow> = branch
        .points
        .iter()
        .map(|p| SweepRow::from_point(p, Some(&sc.physical)))
        .collect();
    let mut buf = Vec::new();
    write_sweep(&mut buf, &rows).unwrap();
    let back = read_sweep(buf.as_slice()).unwrap();
    assert_eq!(format!("{rows:?}"), format!("{back:?}"));
}
