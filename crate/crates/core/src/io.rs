//! CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::SystemConfig;
use crate::engine::{Summary, SweepRow, TraceResult};
use crate::error::{Error, Result};

pub const NMSE_FILE: &str = "nmse.csv";
pub const UL_RATE_FILE: &str = "ul_rate.csv";
pub const DL_RATE_FILE: &str = "dl_rate.csv";
pub const FP_TRACE_FILE: &str = "fp_objective.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const NMSE_HEADER: [&str; 7] = ["method", "combiner", "p_ul_dbm", "mean_nmse", "ci_low", "ci_high", "trials"];
pub const UL_RATE_HEADER: [&str; 7] = ["method", "combiner", "p_ul_dbm", "mean_ul_rate", "ci_low", "ci_high", "trials"];
pub const DL_RATE_HEADER: [&str; 7] = ["method", "combiner", "p_ul_dbm", "mean_dl_rate", "ci_low", "ci_high", "trials"];
pub const FP_TRACE_HEADER: [&str; 4] = ["iteration", "objective", "dl_ar_joint", "dl_ar_dlonly"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn summary_row(row: &SweepRow, s: &Summary) -> Vec<String> {
    vec![
        row.pipeline.method.name().to_string(),
        row.pipeline.combiner.name().to_string(),
        num(row.p_ul_dbm),
        num(s.mean),
        num(s.ci_low),
        num(s.ci_high),
        s.trials.to_string(),
    ]
}

type TableSpec = (&'static str, &'static [&'static str], fn(&SweepRow) -> &Summary);

/// Writes the three sweep tables into `dir` and returns their paths.
pub fn write_sweep_tables(dir: &Path, rows: &[SweepRow]) -> Result<Vec<PathBuf>> {
    let tables: [TableSpec; 3] = [
        (NMSE_FILE, &NMSE_HEADER, |r| &r.nmse),
        (UL_RATE_FILE, &UL_RATE_HEADER, |r| &r.ul_rate),
        (DL_RATE_FILE, &DL_RATE_HEADER, |r| &r.dl_rate),
    ];
    tables
        .iter()
        .map(|(name, header, pick)| {
            let path = dir.join(name);
            write_table(&path, header, rows.iter().map(|r| summary_row(r, pick(r))))?;
            Ok(path)
        })
        .collect()
}

pub fn write_fp_trace(dir: &Path, trace: &TraceResult) -> Result<PathBuf> {
    let path = dir.join(FP_TRACE_FILE);
    let rows = (0..trace.objective.len()).map(|i| {
        vec![
            i.to_string(),
            num(trace.objective[i]),
            num(trace.dl_ar_joint[i]),
            num(trace.dl_ar_dlonly[i]),
        ]
    });
    write_table(&path, &FP_TRACE_HEADER, rows)?;
    Ok(path)
}

/// Modelling choices that are not visible in the config.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub epsilon_rule: &'static str,
    pub fp_victim_sum_scope: &'static str,
    pub fp_duct_penalty: String,
    pub null_residual: &'static str,
    pub aod_estimation: &'static str,
    pub fp_victim_inputs: &'static str,
}

impl RunMetadata {
    pub fn for_config(cfg: &SystemConfig) -> Self {
        Self {
            epsilon_rule: "trace(err_cov)/M",
            fp_victim_sum_scope: "all_victims",
            fp_duct_penalty: format!("{:?}", cfg.fp_duct_penalty).to_lowercase(),
            null_residual: if cfg.paper_literal_null_scalar {
                "literal: p_ul tau |S| (|U_s|-1) L / (p_dl (K+1))"
            } else {
                "derived: (p_dl/p_ul) tau |S| L/(K+1)"
            },
            aod_estimation: "root-MUSIC on reciprocal guard-period samples, angle sign flipped",
            fp_victim_inputs: "null-precoded CE pre-pass",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub mode: String,
    pub seed: u64,
    pub trials: usize,
    pub methods: Vec<String>,
    pub combiners: Vec<String>,
    pub p_ul_grid_dbm: Vec<f64>,
    pub config: SystemConfig,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    /// File paths per method; every emitted data file appears here.
    pub files: BTreeMap<String, Vec<String>>,
    pub metadata: RunMetadata,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
