//! Result files: JSON records, plot-ready CSV, manifests and stored runs.
//!
//! CSV output uses a header row, `.` decimals and LF line endings. Floats in
//! JSON round-trip exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::{Aggregate, Conventions, GapStudy, ResultRecord, SweepOutput};
use crate::error::{Error, Result};
use crate::evolve::{IntegratorConfig, Sample};
use crate::hamiltonian::ProblemInstance;
use crate::optimize::{OptimizerConfig, Strategy};
use crate::spectrum::GapProfile;

pub const SWEEP_COLUMNS: [&str; 7] = ["N", "T", "strategy", "mean_err_pct", "mean_fidelity", "n_ok", "n_fail"];

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_records_json<W: Write>(w: W, records: &[ResultRecord]) -> Result<()> {
    serde_json::to_writer_pretty(w, records)?;
    Ok(())
}

pub fn read_records_json<R: Read>(r: R) -> Result<Vec<ResultRecord>> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_sweep_csv<W: Write>(w: W, aggregates: &[Aggregate]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SWEEP_COLUMNS)?;
    for a in aggregates {
        out.write_record([
            a.n.to_string(),
            a.total_time.to_string(),
            a.strategy.name().to_string(),
            a.mean_err_pct.to_string(),
            a.mean_fidelity.to_string(),
            a.n_ok.to_string(),
            a.n_fail.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<Aggregate>> {
    let mut rd = csv::ReaderBuilder::new().from_reader(r);
    if rd.headers()?.iter().ne(SWEEP_COLUMNS) {
        return Err(Error::Validation("unexpected sweep CSV header".into()));
    }
    let parse_f = |v: &str| v.parse::<f64>().map_err(|e| Error::Validation(format!("{v:?}: {e}")));
    let parse_u = |v: &str| v.parse::<usize>().map_err(|e| Error::Validation(format!("{v:?}: {e}")));
    rd.records()
        .map(|row| {
            let row = row?;
            Ok(Aggregate {
                n: parse_u(&row[0])?,
                total_time: parse_f(&row[1])?,
                strategy: row[2].parse()?,
                mean_err_pct: parse_f(&row[3])?,
                mean_fidelity: parse_f(&row[4])?,
                n_ok: parse_u(&row[5])?,
                n_fail: parse_u(&row[6])?,
            })
        })
        .collect()
}

/// `s,gap` rows preceded by `#` comment lines describing the ensemble.
pub fn write_gap_csv<W: Write>(mut w: W, study: &GapStudy, profile: &GapProfile, instances: usize) -> Result<()> {
    writeln!(w, "# strategy={} connectivity={} N={} instances={}", profile.strategy, study.connectivity, study.n, instances)?;
    let seeds: Vec<String> = study.instance_seeds[..instances].iter().map(u64::to_string).collect();
    writeln!(w, "# seeds={}", seeds.join(" "))?;
    let mut out = csv_writer(w);
    out.write_record(["s", "gap"])?;
    for (s, g) in profile.grid.iter().zip(&profile.gaps) {
        out.write_record([s.to_string(), g.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_gap_csv<R: Read>(r: R, strategy: &str) -> Result<GapProfile> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut grid = Vec::new();
    let mut gaps = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |v: &str| v.parse::<f64>().map_err(|e| Error::Validation(format!("{v:?}: {e}")));
        grid.push(f(&row[0])?);
        gaps.push(f(&row[1])?);
    }
    Ok(GapProfile { strategy: strategy.to_string(), grid, gaps })
}

/// Provenance of one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    /// Canonical TOML of the configuration; replays parse this.
    pub config: String,
    pub master_seed: u64,
    /// `(N, instance seeds)` per ensemble size.
    pub instance_seeds: Vec<(usize, Vec<u64>)>,
    pub library_version: String,
    pub conventions: Conventions,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let instance_seeds = config
            .n
            .iter()
            .map(|&n| (n, (0..config.instance_count).map(|i| super::sweep::instance_seed(config, n, i)).collect()))
            .collect();
        Ok(Self {
            config_hash: config.hash()?,
            config: config.to_toml_string()?,
            master_seed: config.seed,
            instance_seeds,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            conventions: Conventions::of(config),
        })
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let config = ExperimentConfig::from_toml_str(&self.config)?;
        if config.hash()? != self.config_hash {
            return Err(Error::Validation("manifest hash does not match its configuration".into()));
        }
        Ok(config)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.json";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Writes records, aggregates and the manifest into `dir`; returns the paths.
pub fn emit_sweep(dir: &Path, config: &ExperimentConfig, output: &SweepOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths = [dir.join(RECORDS_FILE), dir.join(SWEEP_FILE), dir.join(MANIFEST_FILE)];
    write_records_json(fs::File::create(&paths[0])?, &output.records)?;
    write_sweep_csv(fs::File::create(&paths[1])?, &output.aggregates)?;
    Manifest::new(config)?.write(&paths[2])?;
    Ok(paths.to_vec())
}

/// One `gap_<connectivity>_N<n>_<strategy>.csv` per profile, plus the manifest.
pub fn emit_gap_study(dir: &Path, config: &ExperimentConfig, studies: &[GapStudy]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for study in studies {
        for (profile, &used) in study.profiles.iter().zip(&study.instances_used) {
            let path = dir.join(format!("gap_{}_N{}_{}.csv", study.connectivity, study.n, profile.strategy));
            write_gap_csv(fs::File::create(&path)?, study, profile, used)?;
            paths.push(path);
        }
    }
    let path = dir.join("gap.json");
    fs::write(&path, serde_json::to_string_pretty(studies)?)?;
    paths.push(path);
    let path = dir.join(MANIFEST_FILE);
    Manifest::new(config)?.write(&path)?;
    paths.push(path);
    Ok(paths)
}

/// Everything the annealing-time report needs from a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRun {
    pub instance: ProblemInstance,
    pub strategy: Strategy,
    pub total_time: f64,
    pub epsilon: f64,
    /// Knots; absent for the ramp.
    pub params: Option<Vec<f64>>,
    pub optimizer: OptimizerConfig,
    pub integrator: IntegratorConfig,
    pub samples: Vec<Sample>,
}

impl StoredRun {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::run_sweep;

    fn output() -> (ExperimentConfig, SweepOutput) {
        let config = ExperimentConfig {
            n: vec![2],
            instance_count: 2,
            t_grid: vec![0.5, 1.5],
            strategies: vec![Strategy::Ramp],
            ..Default::default()
        };
        let mut out = run_sweep(&config).unwrap();
        out.records[1].ok = false;
        out.records[1].error = Some("synthetic".into());
        out.records[1].percent_error = None;
        (config, out)
    }

    #[test]
    fn records_round_trip() {
        let (_, out) = output();
        let mut buf = Vec::new();
        write_records_json(&mut buf, &out.records).unwrap();
        assert_eq!(read_records_json(&buf[..]).unwrap(), out.records);
    }

    #[test]
    fn sweep_csv_contract() {
        let (_, out) = output();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &out.aggregates).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("N,T,strategy,mean_err_pct,mean_fidelity,n_ok,n_fail\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), out.aggregates);
    }

    #[test]
    fn files_and_manifest() {
        let (config, out) = output();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_sweep(dir.path(), &config, &out).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        let m = Manifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.experiment_config().unwrap(), config);
        assert_eq!(m.instance_seeds[0].1.len(), 2);
        let mut other = config.clone();
        other.instance_count = 3;
        assert_ne!(Manifest::new(&other).unwrap().config_hash, m.config_hash);
        assert_eq!(Manifest::new(&config).unwrap().config_hash, m.config_hash);
    }

    #[test]
    fn gap_csv_round_trip() {
        let study = GapStudy {
            connectivity: crate::hamiltonian::Connectivity::Full,
            n: 4,
            instance_seeds: vec![7, 8],
            profiles: vec![GapProfile { strategy: "ramp".into(), grid: vec![0.0, 0.5, 1.0], gaps: vec![2.0, 0.1, 0.3] }],
            instances_used: vec![2],
            z_dominance: None,
        };
        let mut buf = Vec::new();
        write_gap_csv(&mut buf, &study, &study.profiles[0], 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("# seeds=7 8\ns,gap\n0,2\n"));
        assert_eq!(read_gap_csv(&buf[..], "ramp").unwrap(), study.profiles[0]);
    }
}
