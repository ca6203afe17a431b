//! Trajectory snapshots and their on-disk layout: one directory holding a
//! run.csv series, a meta.txt key=value copy of the configuration, and
//! coefficient snapshot files u_/w_/z_{step}.spf.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::config::{InitialData, SolverConfig};
use crate::spectral::{load_spf, save_spf, SpectralField};

/// Sampled history of one run. Parallel vectors, one entry per snapshot.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub u_snapshots: Vec<SpectralField>,
    pub w_snapshots: Vec<SpectralField>,
    /// Stochastic convolution at snapshot times; zero fields when noise is off.
    pub z_snapshots: Vec<SpectralField>,
    pub mass_series: Vec<f64>,
    pub energy_series: Vec<f64>,
    /// Running integral of the cubed spatial L3 norm of Y = u - u_A - Z,
    /// nondecreasing; all zeros when residual tracking is off.
    pub y_l3_series: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Write the record and its configuration under `dir` (created if needed).
    /// Field-valued initial data is materialized to initial.spf so the saved
    /// metadata always describes a reproducible run.
    pub fn save(&self, dir: &Path, cfg: &SolverConfig) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        fs::create_dir_all(dir)?;
        let grid_hint = 2 * cfg.cutoff;

        let mut kv = cfg.to_key_values();
        if let InitialData::Field(field) = &cfg.initial {
            save_spf(field, grid_hint, &dir.join("initial.spf"))?;
            for pair in kv.iter_mut() {
                if pair.0 == "initial.kind" {
                    pair.1 = "file".to_string();
                }
            }
            kv.push(("initial.path".to_string(), "initial.spf".to_string()));
        }
        let mut meta = String::new();
        for (k, v) in &kv {
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        fs::write(dir.join("meta.txt"), meta)?;

        let mut csv = fs::File::create(dir.join("run.csv"))?;
        writeln!(csv, "step,t,mass,energy,y_l3_accum")?;
        for i in 0..self.len() {
            writeln!(
                csv,
                "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.steps[i],
                self.times[i],
                self.mass_series[i],
                self.energy_series[i],
                self.y_l3_series[i],
            )?;
        }

        for i in 0..self.len() {
            let tag = format!("{:08}", self.steps[i]);
            save_spf(&self.u_snapshots[i], grid_hint, &dir.join(format!("u_{tag}.spf")))?;
            save_spf(&self.w_snapshots[i], grid_hint, &dir.join(format!("w_{tag}.spf")))?;
            save_spf(&self.z_snapshots[i], grid_hint, &dir.join(format!("z_{tag}.spf")))?;
        }
        Ok(())
    }

    /// Read a record saved by [`TrajectoryRecord::save`]. Relative
    /// initial-file paths in the metadata are resolved against `dir`.
    pub fn load(dir: &Path) -> Result<(Self, SolverConfig)> {
        let meta_path = dir.join("meta.txt");
        let meta = fs::read_to_string(&meta_path)?;
        let pairs = crate::solver::config::parse_flat_text(&meta)?;
        let mut cfg = SolverConfig::default().apply_key_values(&pairs)?;
        if let InitialData::File(path) = &cfg.initial {
            if path.is_relative() {
                cfg.initial = InitialData::File(dir.join(path));
            }
        }

        let csv_path = dir.join("run.csv");
        let body = fs::read_to_string(&csv_path)?;
        let mut record = TrajectoryRecord::default();
        let bad_row = |reason: String| Error::SnapshotFormat {
            path: csv_path.clone(),
            reason,
        };
        for (line_no, line) in body.lines().enumerate() {
            if line_no == 0 {
                if line != "step,t,mass,energy,y_l3_accum" {
                    return Err(bad_row(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad_row(format!("row {line_no} has {} columns, need 5", cols.len())));
            }
            let parse_f = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| bad_row(format!("row {line_no}: bad number {s:?}")))
            };
            let step: u64 = cols[0]
                .parse()
                .map_err(|_| bad_row(format!("row {line_no}: bad step {:?}", cols[0])))?;
            record.steps.push(step);
            record.times.push(parse_f(cols[1])?);
            record.mass_series.push(parse_f(cols[2])?);
            record.energy_series.push(parse_f(cols[3])?);
            record.y_l3_series.push(parse_f(cols[4])?);
        }
        if record.steps.is_empty() {
            return Err(Error::EmptyTrajectory);
        }

        for &step in &record.steps {
            let tag = format!("{step:08}");
            let (u, _) = load_spf(&dir.join(format!("u_{tag}.spf")))?;
            let (w, _) = load_spf(&dir.join(format!("w_{tag}.spf")))?;
            let z_path = dir.join(format!("z_{tag}.spf"));
            let z = if z_path.exists() {
                load_spf(&z_path)?.0
            } else {
                SpectralField::zeros(u.cutoff())
            };
            record.u_snapshots.push(u);
            record.w_snapshots.push(w);
            record.z_snapshots.push(z);
        }
        Ok((record, cfg))
    }
}
