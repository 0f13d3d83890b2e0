//! JSON run configuration. Every field has a default, so `{}` is a valid
//! config; command-line flags are folded in before validation.

use std::f64::consts::PI;
use std::path::PathBuf;

use impact_harvest::energy::VoltageModel;
use impact_harvest::flight::Side;
use impact_harvest::model::{reference_device, PhysicalParams, SystemParams};
use impact_harvest::simulator::{InitialState, PatternOptions, SimulationConfig};
use impact_harvest::solver::OrbitType;
use impact_harvest::sweep::{Direction, ScanOptions, ScanTarget};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Simulate,
    Solve,
    Sweep,
    Graze,
    Energy,
    Reproduce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitChoice {
    #[serde(rename = "1:1")]
    OneOne,
    #[serde(rename = "2:1")]
    TwoOne,
}

impl From<OrbitChoice> for OrbitType {
    fn from(c: OrbitChoice) -> Self {
        match c {
            OrbitChoice::OneOne => OrbitType::OneOne,
            OrbitChoice::TwoOne => OrbitType::TwoOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensionless {
    pub d: f64,
    pub gbar: f64,
}

/// Either set may be given; the dimensionless one wins when both are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub r: f64,
    pub phi: f64,
    pub dimensionless: Option<Dimensionless>,
    pub physical: Option<PhysicalParams>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let mut physical = reference_device(PI / 6.0, 5.0, 5.0 * PI);
        physical.s = physical.length_for(0.16);
        Self {
            r: 0.5,
            phi: 1.015,
            dimensionless: None,
            physical: Some(physical),
        }
    }
}

impl ParamsConfig {
    pub fn resolve(&self) -> CliResult<SystemParams> {
        let p = match (&self.dimensionless, &self.physical) {
            (Some(dl), _) => SystemParams::new(self.r, dl.d, dl.gbar, self.phi)?,
            (None, Some(ph)) => ph.nondimensionalize(self.r, self.phi)?,
            (None, None) => {
                return Err(CliError::Config(
                    "params need `dimensionless` or `physical`".into(),
                ))
            }
        };
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub t0: f64,
    pub v0: f64,
    pub side: Side,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            v0: 0.1924,
            side: Side::Bottom,
        }
    }
}

impl InitConfig {
    pub fn state(&self) -> InitialState {
        InitialState::Impact {
            t: self.t0,
            side: self.side,
            v_pre: self.v0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub transient_periods: usize,
    pub window_periods: usize,
    /// Trajectory samples per dimensionless time unit.
    pub samples_per_unit: usize,
    pub k_max: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            transient_periods: 500,
            window_periods: 40,
            samples_per_unit: 100,
            k_max: 16,
        }
    }
}

impl SimulationSpec {
    pub fn config(&self) -> SimulationConfig {
        SimulationConfig::periods(self.transient_periods, self.window_periods)
    }

    pub fn pattern(&self) -> PatternOptions {
        PatternOptions {
            k_max: self.k_max,
            ..PatternOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSpec {
    pub orbit: OrbitChoice,
    /// Run the cold-start seed grid instead of a single Newton solve.
    pub seed_grid: bool,
    /// `[v, phi, q, p]` for 2:1, `[v, phi, dt]` for 1:1.
    pub guess: Option<Vec<f64>>,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self {
            orbit: OrbitChoice::TwoOne,
            seed_grid: false,
            guess: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub orbit: OrbitChoice,
    /// Where the analytic branch is seeded; defaults to the middle of the range.
    pub seed_d: Option<f64>,
    /// Add simulated points along a warm-started lineage.
    pub simulate: bool,
    /// Order of the simulated lineage.
    pub direction: Direction,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            from: 0.13,
            to: 0.23,
            step: 1e-3,
            orbit: OrbitChoice::TwoOne,
            seed_d: None,
            simulate: true,
            direction: Direction::Down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum TargetSpec {
    LabelChange,
    NToOne(usize),
}

impl From<TargetSpec> for ScanTarget {
    fn from(t: TargetSpec) -> Self {
        match t {
            TargetSpec::LabelChange => ScanTarget::LabelChange,
            TargetSpec::NToOne(n) => ScanTarget::NToOne(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrazeSpec {
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub tol: f64,
    pub target: TargetSpec,
    /// Start from the solved orbit of this type at `from` instead of `init`.
    pub start_on: Option<OrbitChoice>,
}

impl Default for GrazeSpec {
    fn default() -> Self {
        Self {
            from: 0.16,
            to: 0.13,
            step: 5e-4,
            tol: 1e-4,
            target: TargetSpec::LabelChange,
            start_on: Some(OrbitChoice::TwoOne),
        }
    }
}

impl GrazeSpec {
    pub fn scan_options(&self, sim: &SimulationSpec) -> ScanOptions {
        ScanOptions {
            step: self.step,
            tol: self.tol,
            simulation: sim.config(),
            pattern: sim.pattern(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub format: Format,
    pub svg: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Csv,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Recipe name for `reproduce`.
    pub recipe: Option<String>,
    pub params: ParamsConfig,
    pub init: InitConfig,
    pub simulation: SimulationSpec,
    pub solve: SolveSpec,
    pub sweep: SweepSpec,
    pub graze: GrazeSpec,
    pub voltage: VoltageModel,
    pub output: OutputSpec,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Simulate,
            recipe: None,
            params: ParamsConfig::default(),
            init: InitConfig::default(),
            simulation: SimulationSpec::default(),
            solve: SolveSpec::default(),
            sweep: SweepSpec::default(),
            graze: GrazeSpec::default(),
            voltage: VoltageModel::default(),
            output: OutputSpec::default(),
            jobs: None,
        }
    }
}

fn positive(name: &str, x: f64) -> CliResult<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be positive, got {x}"
        )))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything the chosen scenario will use.
    pub fn validate(&self) -> CliResult<()> {
        self.voltage.validate()?;
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if self.scenario == ScenarioKind::Reproduce {
            let name = self
                .recipe
                .as_deref()
                .ok_or_else(|| CliError::Config("reproduce needs a recipe name".into()))?;
            crate::recipes::Recipe::parse(name)?;
            return Ok(());
        }
        self.params.resolve()?;
        let sim = &self.simulation;
        if sim.window_periods == 0 || sim.samples_per_unit == 0 || sim.k_max == 0 {
            return Err(CliError::Config(
                "simulation window_periods, samples_per_unit and k_max must be positive".into(),
            ));
        }
        match self.scenario {
            ScenarioKind::Simulate | ScenarioKind::Energy => {
                if !self.init.t0.is_finite() || !self.init.v0.is_finite() {
                    return Err(CliError::Config("init values must be finite".into()));
                }
            }
            ScenarioKind::Solve => {
                let s = &self.solve;
                if !s.seed_grid {
                    let need = match s.orbit {
                        OrbitChoice::TwoOne => 4,
                        OrbitChoice::OneOne => 3,
                    };
                    match &s.guess {
                        Some(g) if g.len() == need && g.iter().all(|x| x.is_finite()) => {}
                        Some(g) => {
                            return Err(CliError::Config(format!(
                                "solve.guess needs {need} finite values, got {}",
                                g.len()
                            )))
                        }
                        None => {
                            return Err(CliError::Config(
                                "solve needs solve.guess or --seed-grid".into(),
                            ))
                        }
                    }
                }
            }
            ScenarioKind::Sweep => {
                let s = &self.sweep;
                positive("sweep.step", s.step)?;
                positive("sweep.from", s.from)?;
                if !(s.to > s.from) {
                    return Err(CliError::Config(format!(
                        "empty sweep range [{}, {}]",
                        s.from, s.to
                    )));
                }
                if let Some(seed) = s.seed_d {
                    if !(seed >= s.from && seed <= s.to) {
                        return Err(CliError::Config(format!(
                            "sweep.seed_d = {seed} lies outside the range"
                        )));
                    }
                }
            }
            ScenarioKind::Graze => {
                let g = &self.graze;
                positive("graze.step", g.step)?;
                positive("graze.tol", g.tol)?;
                positive("graze.from", g.from)?;
                positive("graze.to", g.to)?;
                if g.from == g.to {
                    return Err(CliError::Config("empty scan range".into()));
                }
            }
            ScenarioKind::Reproduce => unreachable!(),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.scenario = ScenarioKind::Graze;
        c.graze.target = TargetSpec::NToOne(2);
        c.params.dimensionless = Some(Dimensionless { d: 0.2, gbar: 0.1 });
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn dimensionless_wins() {
        let mut p = ParamsConfig::default();
        p.dimensionless = Some(Dimensionless { d: 0.3, gbar: 0.05 });
        let s = p.resolve().unwrap();
        assert_eq!((s.d, s.gbar), (0.3, 0.05));
    }

    #[test]
    fn default_params_are_the_thirty_degree_device() {
        let s = ParamsConfig::default().resolve().unwrap();
        assert!((s.d - 0.16).abs() < 1e-12);
        assert!((s.gbar - 0.12201).abs() < 1e-5);
    }

    #[test]
    fn rejects_empty_sweep() {
        let mut c = RunConfig::default();
        c.scenario = ScenarioKind::Sweep;
        c.sweep.from = 0.2;
        c.sweep.to = 0.2;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(RunConfig::from_json(r#"{"sweeep": {}}"#).is_err());
    }
}
