//! `fedkan report`: tables and curve data from a directory of trial logs.

use std::path::Path;

use fedkan_core::metrics::scan_logs;
use fedkan_core::stats::{curves_csv, report_tables, ReportOptions};
use fedkan_core::Error;

use crate::{CliError, CliResult};

pub fn cmd_report(log_dir: &Path, out: &Path, opts: &ReportOptions) -> CliResult<()> {
    if !log_dir.is_dir() {
        return Err(CliError::data(format!(
            "log directory {} does not exist",
            log_dir.display()
        )));
    }
    let groups = scan_logs(log_dir)?;
    let report = report_tables(&groups, opts)
        .map_err(|e| CliError::from(e).with_context(&format!("in {}", log_dir.display())))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let text = report.to_text();
    for (name, body) in [
        ("report.txt", text.clone()),
        ("accuracy.csv", report.accuracy_csv()),
        ("welch.csv", report.welch_csv()),
        ("timing.csv", report.timing_csv()),
        ("curves.csv", curves_csv(&groups)?),
    ] {
        let p = out.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    print!("{text}");
    Ok(())
}
