//! Result records and their CSV / JSON sidecar encoding.

use crate::config::{DesignType, ExperimentConfig, ExperimentId, GridPoint};
use anyhow::{Context, Result};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use surveil_core::model::DelayMode;

/// One design evaluated on one channel realization (or one iteration of a
/// trace). Absent quantities are empty in the CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment: ExperimentId,
    pub trial: usize,
    /// Seed of the channel estimate and of the solver's random start.
    pub seed: u64,
    pub mode: DelayMode,
    pub design: DesignType,
    pub point: GridPoint,
    /// `path`, `outer` or `inner` for trace records.
    pub stage: Option<&'static str>,
    /// Iteration index for trace records.
    pub iteration: Option<usize>,
    pub status: String,
    /// True NEE of the design on the (estimated) channels.
    pub nee: Option<f64>,
    pub eta_d: Option<f64>,
    pub eta_r: Option<f64>,
    pub rate_d: Option<f64>,
    pub rate_r: Option<f64>,
    pub rate_m: Option<f64>,
    /// Transmit power of T in watts.
    pub power: Option<f64>,
    /// Total consumption in watts.
    pub q: Option<f64>,
    /// Certified worst-case NEE of robust designs.
    pub worst_case_nee: Option<f64>,
    /// Method objective (trace records) or ratio parameter.
    pub objective: Option<f64>,
    pub lambda: Option<f64>,
    /// Fraction of sampled true channels in outage.
    pub outage: Option<f64>,
    pub outage_evaluations: Option<usize>,
    pub iterations: Option<usize>,
    pub wall_time_s: f64,
}

pub const HEADER: [&str; 29] = [
    "experiment",
    "trial",
    "seed",
    "mode",
    "design",
    "p_max",
    "r_th",
    "alpha_d",
    "eps",
    "d_t",
    "d_m",
    "stage",
    "iteration",
    "status",
    "nee",
    "eta_d",
    "eta_r",
    "rate_d",
    "rate_r",
    "rate_m",
    "power",
    "q",
    "worst_case_nee",
    "objective",
    "lambda",
    "outage",
    "outage_evaluations",
    "iterations",
    "wall_time_s",
];

/// Columns that legitimately differ between identical runs.
pub const TIMING_COLUMNS: [&str; 1] = ["wall_time_s"];

/// Twelve significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        x.to_string()
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn opt_u(x: Option<usize>) -> String {
    x.map(|k| k.to_string()).unwrap_or_default()
}

impl ResultRecord {
    pub fn new(
        experiment: ExperimentId,
        trial: usize,
        seed: u64,
        mode: DelayMode,
        design: DesignType,
        point: GridPoint,
    ) -> ResultRecord {
        ResultRecord {
            experiment,
            trial,
            seed,
            mode,
            design,
            point,
            stage: None,
            iteration: None,
            status: "ok".into(),
            nee: None,
            eta_d: None,
            eta_r: None,
            rate_d: None,
            rate_r: None,
            rate_m: None,
            power: None,
            q: None,
            worst_case_nee: None,
            objective: None,
            lambda: None,
            outage: None,
            outage_evaluations: None,
            iterations: None,
            wall_time_s: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn fields(&self) -> Vec<String> {
        let p = &self.point;
        vec![
            self.experiment.as_str().into(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.mode.as_str().into(),
            self.design.as_str().into(),
            fmt_f64(p.p_max),
            fmt_f64(p.r_th),
            fmt_f64(p.alpha_d),
            fmt_f64(p.eps),
            fmt_f64(p.d_t),
            fmt_f64(p.d_m),
            self.stage.unwrap_or_default().into(),
            opt_u(self.iteration),
            self.status.clone(),
            opt_f(self.nee),
            opt_f(self.eta_d),
            opt_f(self.eta_r),
            opt_f(self.rate_d),
            opt_f(self.rate_r),
            opt_f(self.rate_m),
            opt_f(self.power),
            opt_f(self.q),
            opt_f(self.worst_case_nee),
            opt_f(self.objective),
            opt_f(self.lambda),
            opt_f(self.outage),
            opt_u(self.outage_evaluations),
            opt_u(self.iterations),
            fmt_f64(self.wall_time_s),
        ]
    }
}

pub fn write_csv<W: Write>(w: W, records: &[ResultRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for r in records {
        out.write_record(r.fields())?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string(records: &[ResultRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf)?)
}

/// Rows of a CSV file with the timing columns removed.
pub fn comparable_rows(text: &str) -> Result<Vec<Vec<String>>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !TIMING_COLUMNS.contains(&header[i].as_str())).collect();
    let mut rows = vec![keep.iter().map(|&i| header[i].clone()).collect()];
    for rec in rd.records() {
        let rec = rec?;
        rows.push(keep.iter().map(|&i| rec[i].to_string()).collect());
    }
    Ok(rows)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    records: usize,
    failed: usize,
    wall_time_s: f64,
    config: &'a ExperimentConfig,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Writes the CSV and a JSON sidecar with the configuration and version.
pub fn write_outputs(path: &Path, records: &[ResultRecord], cfg: &ExperimentConfig, wall_time_s: f64) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(std::io::BufWriter::new(f), records)?;
    let meta = Sidecar {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        records: records.len(),
        failed: records.iter().filter(|r| !r.is_ok()).count(),
        wall_time_s,
        config: cfg,
    };
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&meta)?).with_context(|| format!("writing {}", side.display()))?;
    Ok(())
}
