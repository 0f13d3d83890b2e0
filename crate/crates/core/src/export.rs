//! CSV tables for trajectories, impacts, sweeps, critical points and energy.
//!
//! Floats are written with 17 significant digits so that a table read back
//! reproduces the values bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize, Serializer};

use crate::energy::{voltage, VoltageModel};
use crate::error::{Error, Result};
use crate::flight::ImpactEvent;
use crate::model::PhysicalParams;
use crate::simulator::TrajectorySample;
use crate::solver::SolvedOrbit;
use crate::stability::CriticalPointTag;
use crate::sweep::BranchPoint;

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_f64(*x))
}

fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.map(fmt_f64).unwrap_or_default())
}

fn ser_list<S: Serializer>(x: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"))
}

fn de_list<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let s = String::deserialize(d)?;
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(serde::de::Error::custom))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Domain(format!("csv: {other:?}")),
    }
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    #[serde(serialize_with = "ser_f64")]
    pub t: f64,
    #[serde(rename = "Z", serialize_with = "ser_f64")]
    pub z: f64,
    #[serde(rename = "Zdot", serialize_with = "ser_f64")]
    pub zdot: f64,
    #[serde(rename = "X_top", serialize_with = "ser_f64")]
    pub x_top: f64,
    #[serde(rename = "X_bottom", serialize_with = "ser_f64")]
    pub x_bottom: f64,
    #[serde(serialize_with = "ser_f64")]
    pub x_ball: f64,
}

impl From<&TrajectorySample> for TrajectoryRow {
    fn from(s: &TrajectorySample) -> Self {
        Self {
            t: s.t,
            z: s.z,
            zdot: s.zdot,
            x_top: s.x_top,
            x_bottom: s.x_bottom,
            x_ball: s.x_ball,
        }
    }
}

pub fn write_trajectory<W: Write>(w: W, samples: &[TrajectorySample]) -> Result<()> {
    let rows: Vec<TrajectoryRow> = samples.iter().map(TrajectoryRow::from).collect();
    write_rows(w, &rows)
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Vec<TrajectoryRow>> {
    read_rows(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    #[serde(serialize_with = "ser_f64")]
    pub t: f64,
    pub side: String,
    #[serde(serialize_with = "ser_f64")]
    pub v_pre: f64,
    #[serde(serialize_with = "ser_f64")]
    pub v_post: f64,
    #[serde(serialize_with = "ser_f64")]
    pub phase: f64,
}

impl From<&ImpactEvent> for ImpactRow {
    fn from(e: &ImpactEvent) -> Self {
        Self {
            t: e.t,
            side: e.side.label().into(),
            v_pre: e.v_pre,
            v_post: e.v_post,
            phase: e.phase,
        }
    }
}

pub fn write_impacts<W: Write>(w: W, events: &[ImpactEvent]) -> Result<()> {
    let rows: Vec<ImpactRow> = events.iter().map(ImpactRow::from).collect();
    write_rows(w, &rows)
}

pub fn read_impacts<R: Read>(r: R) -> Result<Vec<ImpactRow>> {
    read_rows(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    #[serde(serialize_with = "ser_f64")]
    pub t_impact: f64,
    pub side: String,
    #[serde(serialize_with = "ser_f64")]
    pub v_pre: f64,
    #[serde(rename = "U_out", serialize_with = "ser_f64")]
    pub u_out: f64,
}

pub fn write_energy<W: Write>(w: W, events: &[ImpactEvent], model: &VoltageModel) -> Result<()> {
    let rows: Vec<EnergyRow> = events
        .iter()
        .map(|e| EnergyRow {
            t_impact: e.t,
            side: e.side.label().into(),
            v_pre: e.v_pre,
            u_out: voltage(e.v_pre, model),
        })
        .collect();
    write_rows(w, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalRow {
    pub kind: String,
    #[serde(serialize_with = "ser_f64")]
    pub d: f64,
}

pub fn write_critical<W: Write>(w: W, tags: &[CriticalPointTag]) -> Result<()> {
    let rows: Vec<CriticalRow> = tags
        .iter()
        .map(|t| CriticalRow {
            kind: t.kind.label(),
            d: t.d,
        })
        .collect();
    write_rows(w, &rows)
}

/// Critical-point table from rows, for markers that do not come from the
/// analytic branch (simulated grazing points, for instance).
pub fn write_critical_rows<W: Write>(w: W, rows: &[CriticalRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_critical<R: Read>(r: R) -> Result<Vec<CriticalRow>> {
    read_rows(r)
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(serialize_with = "ser_f64")]
    pub d: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    pub s_equiv: Option<f64>,
    /// "1:1", "2:1", or the simulated pattern label.
    pub orbit_type: String,
    pub source: String,
    #[serde(serialize_with = "ser_opt_f64")]
    pub v_k: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub phi_k: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub dt_k: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub dt_k1: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub v_k1: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub v_k2: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub trace: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub det: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub delta: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub lambda1_re: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub lambda1_im: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub lambda2_re: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub lambda2_im: Option<f64>,
    pub class: String,
    pub valid: bool,
    #[serde(
        rename = "U_k_list",
        serialize_with = "ser_list",
        deserialize_with = "de_list"
    )]
    pub u_k_list: Vec<f64>,
    #[serde(rename = "U_I_avg", serialize_with = "ser_opt_f64")]
    pub u_i_avg: Option<f64>,
    #[serde(rename = "U_T_avg", serialize_with = "ser_opt_f64")]
    pub u_t_avg: Option<f64>,
}

impl SweepRow {
    pub fn from_point(p: &BranchPoint, physical: Option<&PhysicalParams>) -> Self {
        let mut row = SweepRow {
            d: p.d,
            s_equiv: physical.map(|ph| ph.length_for(p.d)),
            orbit_type: String::new(),
            source: match p.source {
                crate::sweep::PointSource::Analytic => "analytic".into(),
                crate::sweep::PointSource::Simulated => "simulated".into(),
            },
            v_k: None,
            phi_k: None,
            dt_k: None,
            dt_k1: None,
            v_k1: None,
            v_k2: None,
            trace: None,
            det: None,
            delta: None,
            lambda1_re: None,
            lambda1_im: None,
            lambda2_re: None,
            lambda2_im: None,
            class: String::new(),
            valid: p.is_valid(),
            u_k_list: Vec::new(),
            u_i_avg: None,
            u_t_avg: None,
        };
        match (&p.orbit, &p.simulated) {
            (Some(orbit), _) => {
                row.orbit_type = orbit.orbit_type().label().into();
                row.v_k = Some(orbit.impacts()[0].v_pre);
                row.phi_k = Some(orbit.phi_k());
                let iv = orbit.intervals();
                row.dt_k = iv.first().copied();
                row.dt_k1 = iv.get(1).copied();
                match orbit {
                    SolvedOrbit::TwoOne(o) => {
                        row.v_k1 = Some(o.v_k1);
                        row.v_k2 = Some(o.v_k2);
                    }
                    SolvedOrbit::OneOne(o) => row.v_k1 = Some(o.v_k1),
                }
            }
            (None, Some(sim)) => {
                row.orbit_type = sim.pattern.to_string();
                let cycle = sim.cycle();
                row.v_k = cycle.first().map(|e| e.v_pre);
                row.phi_k = cycle.first().map(|e| e.phase);
                row.v_k1 = cycle.get(1).map(|e| e.v_pre);
                row.v_k2 = cycle.get(2).map(|e| e.v_pre);
                let dts: Vec<f64> = sim.events.windows(2).map(|w| w[1].t - w[0].t).collect();
                let start = sim
                    .events
                    .iter()
                    .position(|e| std::ptr::eq(e, &cycle[0]))
                    .unwrap_or(0);
                row.dt_k = dts.get(start).copied();
                row.dt_k1 = dts.get(start + 1).copied();
            }
            (None, None) => {}
        }
        if let Some(s) = &p.stability {
            row.trace = Some(s.trace);
            row.det = Some(s.det);
            row.delta = Some(s.delta);
            row.lambda1_re = Some(s.lambda_re[0]);
            row.lambda1_im = Some(s.lambda_im[0]);
            row.lambda2_re = Some(s.lambda_re[1]);
            row.lambda2_im = Some(s.lambda_im[1]);
            row.class = s.class.label().into();
        }
        if let Some(e) = &p.energy {
            row.u_k_list = e.u_list.clone();
            row.u_i_avg = Some(e.u_i_avg);
            row.u_t_avg = Some(e.u_t_avg);
        }
        row
    }

    pub fn is_stable(&self) -> bool {
        self.valid && self.class.starts_with("stable")
    }
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_sweep<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    read_rows(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::Side;
    use crate::model::SystemParams;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.210_999_999_999_999, -2.5e-300] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn impacts_round_trip() {
        let p = SystemParams::new(0.5, 0.2, 0.1, 0.3).unwrap();
        let evs = vec![
            ImpactEvent::new(0.1, Side::Bottom, 0.4, &p),
            ImpactEvent::new(0.9, Side::Top, -0.3, &p),
        ];
        let mut buf = Vec::new();
        write_impacts(&mut buf, &evs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,side,v_pre,v_post,phase\n"));
        let back = read_impacts(buf.as_slice()).unwrap();
        assert_eq!(back[1].v_pre, -0.3);
        assert_eq!(back[1].side, "T");
    }

    #[test]
    fn sweep_header_has_all_columns() {
        let mut buf = Vec::new();
        let row = SweepRow {
            d: 0.2,
            s_equiv: None,
            orbit_type: "2:1".into(),
            source: "analytic".into(),
            v_k: Some(0.4),
            phi_k: None,
            dt_k: None,
            dt_k1: None,
            v_k1: None,
            v_k2: None,
            trace: None,
            det: None,
            delta: None,
            lambda1_re: None,
            lambda1_im: None,
            lambda2_re: None,
            lambda2_im: None,
            class: String::new(),
            valid: true,
            u_k_list: vec![0.1, 0.2],
            u_i_avg: None,
            u_t_avg: None,
        };
        write_sweep(&mut buf, std::slice::from_ref(&row)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        for col in [
            "d",
            "s_equiv",
            "orbit_type",
            "v_k",
            "phi_k",
            "dt_k",
            "dt_k1",
            "v_k1",
            "v_k2",
            "trace",
            "det",
            "delta",
            "lambda1_re",
            "lambda1_im",
            "lambda2_re",
            "lambda2_im",
            "class",
            "valid",
            "U_k_list",
            "U_I_avg",
            "U_T_avg",
        ] {
            assert!(header.split(',').any(|h| h == col), "missing {col}");
        }
        let back = read_sweep(buf.as_slice()).unwrap();
        assert_eq!(back[0], row);
    }
}
