//! Harvested-voltage proxy per impact and its time and impact averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::ImpactEvent;
use crate::simulator::ImpactSequence;
use crate::solver::{OrbitType, SolvedOrbit};
use crate::sweep::BranchPoint;

/// Maps the impact speed `|Ż⁻|` to the output voltage `U − U_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VoltageLaw {
    /// `U = c |Ż⁻|^γ`.
    PowerLaw { c: f64, gamma: f64 },
    /// Piecewise-linear interpolation through `(speed, output)` pairs,
    /// anchored at the origin and extrapolated with the last slope.
    UserTable { speeds: Vec<f64>, outputs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageModel {
    #[serde(flatten)]
    pub law: VoltageLaw,
    /// Input voltage, carried for reporting only.
    #[serde(default, rename = "U_in")]
    pub u_in: f64,
}

impl Default for VoltageModel {
    fn default() -> Self {
        Self::power_law(1.0, 2.0)
    }
}

impl VoltageModel {
    pub fn power_law(c: f64, gamma: f64) -> Self {
        Self {
            law: VoltageLaw::PowerLaw { c, gamma },
            u_in: 0.0,
        }
    }

    pub fn table(speeds: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        let model = Self {
            law: VoltageLaw::UserTable { speeds, outputs },
            u_in: 0.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.law {
            VoltageLaw::PowerLaw { c, gamma } => {
                if !(*c > 0.0 && *gamma > 0.0 && c.is_finite() && gamma.is_finite()) {
                    return Err(Error::Domain(format!(
                        "power law needs c > 0 and gamma > 0 (c = {c}, gamma = {gamma})"
                    )));
                }
            }
            VoltageLaw::UserTable { speeds, outputs } => {
                if speeds.is_empty() || speeds.len() != outputs.len() {
                    return Err(Error::Domain(
                        "voltage table needs matching, non-empty columns".into(),
                    ));
                }
                let mut prev = (0.0, 0.0);
                for (&s, &u) in speeds.iter().zip(outputs) {
                    if !(s > prev.0 && u > prev.1) {
                        return Err(Error::Domain(
                            "voltage table must be strictly increasing from the origin".into(),
                        ));
                    }
                    prev = (s, u);
                }
            }
        }
        Ok(())
    }
}

/// Output voltage of one impact.
pub fn voltage(v_pre: f64, model: &VoltageModel) -> f64 {
    let speed = v_pre.abs();
    match &model.law {
        VoltageLaw::PowerLaw { c, gamma } => c * speed.powf(*gamma),
        VoltageLaw::UserTable { speeds, outputs } => {
            let mut prev = (0.0, 0.0);
            for (&s, &u) in speeds.iter().zip(outputs) {
                if speed <= s {
                    return prev.1 + (u - prev.1) * (speed - prev.0) / (s - prev.0);
                }
                prev = (s, u);
            }
            let n = speeds.len();
            let (s0, u0) = if n >= 2 {
                (speeds[n - 2], outputs[n - 2])
            } else {
                (0.0, 0.0)
            };
            prev.1 + (prev.1 - u0) / (prev.0 - s0) * (speed - prev.0)
        }
    }
}

/// Per-impact outputs and their two averages over `[t0, tf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    #[serde(rename = "U_list")]
    pub u_list: Vec<f64>,
    /// Average output per impact.
    #[serde(rename = "U_I_avg")]
    pub u_i_avg: f64,
    /// Average output per unit time.
    #[serde(rename = "U_T_avg")]
    pub u_t_avg: f64,
    pub window: (f64, f64),
}

impl EnergySummary {
    pub fn impacts(&self) -> usize {
        self.u_list.len()
    }
}

/// Averages over the impacts with `t0 <= t < tf`.
pub fn averages<'a, I>(events: I, model: &VoltageModel, window: (f64, f64)) -> Result<EnergySummary>
where
    I: IntoIterator<Item = &'a ImpactEvent>,
{
    let (t0, tf) = window;
    if !(tf > t0) {
        return Err(Error::Domain(format!(
            "energy window [{t0}, {tf}) is empty"
        )));
    }
    let u_list: Vec<f64> = events
        .into_iter()
        .filter(|e| e.t >= t0 && e.t < tf)
        .map(|e| voltage(e.v_pre, model))
        .collect();
    if u_list.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let total: f64 = u_list.iter().sum();
    Ok(EnergySummary {
        u_i_avg: total / u_list.len() as f64,
        u_t_avg: total / (tf - t0),
        u_list,
        window,
    })
}

/// Exact averages over one period of a solved orbit.
pub fn orbit_energy(orbit: &SolvedOrbit, model: &VoltageModel) -> Result<EnergySummary> {
    let impacts = orbit.impacts();
    averages(&impacts, model, (0.0, 2.0))
}

/// Averaging windows for simulated points, in dimensionless time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPolicy {
    pub one_to_one: f64,
    pub two_to_one: f64,
    /// Any other pattern.
    pub other: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            one_to_one: 30.0,
            two_to_one: 20.0,
            other: 20.0,
        }
    }
}

impl WindowPolicy {
    pub fn length_for(&self, orbit_type: Option<OrbitType>) -> f64 {
        match orbit_type {
            Some(OrbitType::OneOne) => self.one_to_one,
            Some(OrbitType::TwoOne) => self.two_to_one,
            None => self.other,
        }
    }
}

/// Windowed averages from the start of a simulated sequence's record.
pub fn sequence_energy(
    seq: &ImpactSequence,
    model: &VoltageModel,
    length: f64,
) -> Result<EnergySummary> {
    let t0 = seq.window.0;
    let tf = (t0 + length).min(seq.window.1);
    averages(&seq.events, model, (t0, tf))
}

/// Attaches energy summaries to every point of a branch. Analytic points use
/// one exact period; simulated points use the policy's window.
pub fn branch_energy(
    points: &mut [BranchPoint],
    model: &VoltageModel,
    policy: &WindowPolicy,
) -> Result<()> {
    for point in points {
        point.energy = Some(match (&point.orbit, &point.simulated) {
            (Some(orbit), _) => orbit_energy(orbit, model)?,
            (None, Some(sim)) => {
                let len = policy.length_for(sim.pattern.orbit_type());
                let t0 = sim.window.0;
                averages(&sim.events, model, (t0, (t0 + len).min(sim.window.1)))?
            }
            (None, None) => continue,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::Side;
    use crate::model::{cosine_forcing, SystemParams};
    use crate::solver::{cold_start_1to1, cold_start_2to1, SolveOptions};
    use proptest::prelude::*;

    const GBAR_30: f64 = 0.1245 * 9.8 * 0.5 / 5.0;

    fn params(d: f64) -> SystemParams {
        SystemParams::new(0.5, d, GBAR_30, 0.0).unwrap()
    }

    #[test]
    fn power_law_values() {
        let m = VoltageModel::default();
        assert_eq!(voltage(0.0, &m), 0.0);
        assert_eq!(voltage(0.5, &m), 0.25);
        assert_eq!(voltage(-0.5, &m), 0.25);
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let m = VoltageModel::table(vec![0.5, 1.0], vec![1.0, 3.0]).unwrap();
        assert!((voltage(0.25, &m) - 0.5).abs() < 1e-15);
        assert!((voltage(0.75, &m) - 2.0).abs() < 1e-15);
        assert!((voltage(1.5, &m) - 5.0).abs() < 1e-15);
        assert!(VoltageModel::table(vec![0.5, 0.4], vec![1.0, 3.0]).is_err());
    }

    #[test]
    fn single_impact_window() {
        let p = params(0.2);
        let ev = ImpactEvent::new(0.5, Side::Bottom, 0.5, &p);
        let s = averages([&ev], &VoltageModel::default(), (0.0, 2.0)).unwrap();
        assert_eq!(s.u_i_avg, 0.25);
        assert_eq!(s.u_t_avg, 0.125);
        assert!(matches!(
            averages([&ev], &VoltageModel::default(), (1.0, 2.0)),
            Err(Error::EmptyWindow)
        ));
    }

    #[test]
    fn ratio_laws_for_periodic_orbits() {
        let m = VoltageModel::default();
        let o21 = cold_start_2to1(
            &params(0.17),
            &cosine_forcing(0.0),
            &SolveOptions::default(),
        )
        .into_iter()
        .find(|o| o.valid)
        .unwrap();
        let e = orbit_energy(&SolvedOrbit::TwoOne(o21), &m).unwrap();
        assert!((e.u_t_avg - 1.5 * e.u_i_avg).abs() < 1e-12);
        let o11 = cold_start_1to1(
            &params(0.252),
            &cosine_forcing(0.0),
            &SolveOptions::default(),
        )
        .into_iter()
        .find(|o| o.valid)
        .unwrap();
        let e = orbit_energy(&SolvedOrbit::OneOne(o11), &m).unwrap();
        assert!((e.u_t_avg - e.u_i_avg).abs() < 1e-12);
    }

    #[test]
    fn low_velocity_impact_follows_the_bottom_bottom_flight() {
        let m = VoltageModel::default();
        let o = cold_start_2to1(
            &params(0.17),
            &cosine_forcing(0.0),
            &SolveOptions::default(),
        )
        .into_iter()
        .find(|o| o.valid)
        .unwrap();
        let u1 = voltage(o.v_k1, &m);
        assert!(u1 < voltage(o.v_k2, &m) && u1 < voltage(o.v_k, &m));
    }

    proptest! {
        #[test]
        fn scale_is_linear(c in 0.1f64..10.0, v in -2.0f64..2.0, gamma in 0.5f64..3.0) {
            let a = voltage(v, &VoltageModel::power_law(c, gamma));
            let b = voltage(v, &VoltageModel::power_law(2.0 * c, gamma));
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * b.abs().max(1.0));
        }

        #[test]
        fn monotone_in_speed(a in 0.0f64..2.0, b in 0.0f64..2.0, gamma in 0.5f64..3.0) {
            let m = VoltageModel::power_law(1.0, gamma);
            prop_assume!(a < b);
            prop_assert!(voltage(a, &m) < voltage(b, &m));
        }
    }
}
