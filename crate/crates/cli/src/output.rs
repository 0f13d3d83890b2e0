//! Artifact writing: one directory per run, tables as CSV or JSON, optional
//! SVG plots. Each file is written by a single thread.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use impact_harvest::energy::VoltageModel;
use impact_harvest::export::{
    write_critical_rows, write_energy, write_impacts, write_sweep, write_trajectory, CriticalRow,
    SweepRow, TrajectoryRow,
};
use impact_harvest::flight::ImpactEvent;
use impact_harvest::simulator::TrajectorySample;
use impact_harvest::stability::CriticalPointTag;
use impact_harvest::sweep::BranchPoint;
use impact_harvest::PhysicalParams;
use serde::Serialize;

use crate::config::{Format, OutputSpec};
use crate::error::CliResult;

#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
    pub svg: bool,
}

impl Output {
    pub fn new(spec: &OutputSpec) -> CliResult<Self> {
        fs::create_dir_all(&spec.dir)?;
        Ok(Self {
            dir: spec.dir.clone(),
            format: spec.format,
            svg: spec.svg,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn create(&self, file: &str) -> CliResult<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(file))?))
    }

    /// Pretty JSON regardless of the table format.
    pub fn json<T: Serialize + ?Sized>(&self, file: &str, value: &T) -> CliResult<PathBuf> {
        let mut w = self.create(file)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(self.path(file))
    }

    /// Writes `stem.csv` with `csv` or `stem.json` with `json`.
    fn table<T: Serialize + ?Sized>(
        &self,
        stem: &str,
        csv: impl FnOnce(BufWriter<File>) -> impact_harvest::Result<()>,
        json: &T,
    ) -> CliResult<PathBuf> {
        match self.format {
            Format::Csv => {
                let file = format!("{stem}.csv");
                csv(self.create(&file)?)?;
                Ok(self.path(&file))
            }
            Format::Json => self.json(&format!("{stem}.json"), json),
        }
    }

    pub fn impacts(&self, stem: &str, events: &[ImpactEvent]) -> CliResult<PathBuf> {
        self.table(stem, |w| write_impacts(w, events), events)
    }

    pub fn trajectory(&self, stem: &str, samples: &[TrajectorySample]) -> CliResult<PathBuf> {
        self.table(stem, |w| write_trajectory(w, samples), samples)
    }

    pub fn energy(
        &self,
        stem: &str,
        events: &[ImpactEvent],
        model: &VoltageModel,
    ) -> CliResult<PathBuf> {
        let rows: Vec<serde_json::Value> = events
            .iter()
            .map(|e| {
                serde_json::json!({
                    "t_impact": e.t,
                    "side": e.side.label(),
                    "v_pre": e.v_pre,
                    "U_out": impact_harvest::energy::voltage(e.v_pre, model),
                })
            })
            .collect();
        self.table(stem, |w| write_energy(w, events, model), &rows)
    }

    pub fn critical(
        &self,
        stem: &str,
        tags: &[CriticalPointTag],
        extra: &[CriticalRow],
    ) -> CliResult<PathBuf> {
        let rows = critical_rows(tags, extra);
        self.table(stem, |w| write_critical_rows(w, &rows), &rows)
    }

    pub fn points(
        &self,
        stem: &str,
        points: &[BranchPoint],
        physical: Option<&PhysicalParams>,
    ) -> CliResult<PathBuf> {
        let rows = sweep_rows(points, physical);
        self.table(stem, |w| write_sweep(w, &rows), points)
    }

    pub fn svg(&self, file: &str, content: impl FnOnce() -> String) -> CliResult<Option<PathBuf>> {
        if !self.svg {
            return Ok(None);
        }
        fs::write(self.path(file), content())?;
        Ok(Some(self.path(file)))
    }

    /// Writes the diagnostics file for a failed run.
    pub fn diagnostics(dir: &Path, value: &serde_json::Value) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("diagnostics.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(value).unwrap_or_default() + "\n",
        )?;
        Ok(path)
    }
}

pub fn sweep_rows(points: &[BranchPoint], physical: Option<&PhysicalParams>) -> Vec<SweepRow> {
    points
        .iter()
        .map(|p| SweepRow::from_point(p, physical))
        .collect()
}

pub fn critical_rows(tags: &[CriticalPointTag], extra: &[CriticalRow]) -> Vec<CriticalRow> {
    tags.iter()
        .map(|t| CriticalRow {
            kind: t.kind.label(),
            d: t.d,
        })
        .chain(extra.iter().cloned())
        .collect()
}

pub fn trajectory_rows(samples: &[TrajectorySample]) -> Vec<TrajectoryRow> {
    samples.iter().map(TrajectoryRow::from).collect()
}
