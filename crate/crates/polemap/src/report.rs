//! CSV and plain-text tables for evaluation results.

use std::io::Write;

use polemap_core::sim::{EvalReport, LocalizationReport};

use crate::error::Error;

pub const RELOC_HEADER: [&str; 10] =
    ["retention", "success_count", "trial_count", "success_rate", "p50", "p90", "p95", "p99", "rmse", "cluster_density"];
pub const LOC_HEADER: [&str; 4] = ["variant", "rmse", "fixes_applied", "frames"];

fn csv_err(e: csv::Error) -> Error {
    Error::Other(format!("csv: {e}"))
}

pub fn write_reloc_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RELOC_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.variant.to_string(),
            r.success_count.to_string(),
            r.trial_count.to_string(),
            r.success_rate.to_string(),
            r.p50.to_string(),
            r.p90.to_string(),
            r.p95.to_string(),
            r.p99.to_string(),
            r.rmse.map(|v| v.to_string()).unwrap_or_default(),
            r.cluster_density.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Other(format!("csv: {e}")))
}

pub fn write_loc_csv<W: Write>(out: W, report: &LocalizationReport) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOC_HEADER).map_err(csv_err)?;
    let frames = report.frames.to_string();
    w.write_record(["pipeline", &report.rmse_pipeline.to_string(), &report.fixes_applied.to_string(), &frames]).map_err(csv_err)?;
    w.write_record(["odometry", &report.rmse_odometry.to_string(), "0", &frames]).map_err(csv_err)?;
    w.flush().map_err(|e| Error::Other(format!("csv: {e}")))
}

/// Whitespace-aligned table of the relocalization reports.
pub fn reloc_table(reports: &[EvalReport]) -> String {
    let mut s = format!("{:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "retention", "success", "p50", "p90", "p95", "p99", "density");
    for r in reports {
        s.push_str(&format!(
            "{:>9.2} {:>8.3} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.3}\n",
            r.variant, r.success_rate, r.p50, r.p90, r.p95, r.p99, r.cluster_density
        ));
    }
    s
}
