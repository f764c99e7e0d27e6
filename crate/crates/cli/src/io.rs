//! Output artifacts: CSV and text renderings, written atomically.

use dstatcom_core::pso::IterationRecord;
use dstatcom_core::sim::{ComparisonRow, CriteriaValues, PerfMetrics, Trajectory};
use std::io;
use std::path::Path;

/// Write a file via a temporary sibling plus rename, so readers never see a
/// half-written artifact.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let tmp = match dir {
        Some(dir) => dir.join(format!(".{file_name}.tmp")),
        None => Path::new(&format!(".{file_name}.tmp")).to_path_buf(),
    };
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Full-precision float rendering: 17 significant digits, lossless to
/// re-parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 + traj.len() * 300);
    out.push_str("t,id,iq,vdc,id_ref,iq_ref,u1,u2,m,alpha,p,q\n");
    for s in &traj.samples {
        let row = [
            s.t, s.id, s.iq, s.vdc, s.id_ref, s.iq_ref, s.u1, s.u2, s.m, s.alpha, s.p, s.q,
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "name,kp,ki,itae,iae,ise,itse,overshoot_pct,rise_time,settling_time,\
         steady_state_error,diverged\n",
    );
    for r in rows {
        let c = r.criteria;
        let m = r.metrics;
        let cells = [
            r.name.clone(),
            fmt_f64(r.kp),
            fmt_f64(r.ki),
            fmt_opt(c.map(|c| c.itae)),
            fmt_opt(c.map(|c| c.iae)),
            fmt_opt(c.map(|c| c.ise)),
            fmt_opt(c.map(|c| c.itse)),
            fmt_opt(m.and_then(|m| m.overshoot_pct)),
            fmt_opt(m.and_then(|m| m.rise_time)),
            fmt_opt(m.and_then(|m| m.settling_time)),
            fmt_opt(m.map(|m| m.steady_state_error)),
            r.diverged.to_string(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn convergence_csv(history: &[IterationRecord]) -> String {
    let mut out = String::new();
    out.push_str("iteration,gbest_fitness,kp,ki\n");
    for (i, rec) in history.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            fmt_f64(rec.best_fitness),
            fmt_f64(rec.best_position[0]),
            fmt_f64(rec.best_position[1]),
        ));
    }
    out
}

fn metric_lines(out: &mut String, metrics: &PerfMetrics, criteria: &CriteriaValues) {
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_else(|| "(undefined)".to_string());
    out.push_str(&format!("overshoot_pct = {}\n", opt(metrics.overshoot_pct)));
    out.push_str(&format!("rise_time = {}\n", opt(metrics.rise_time)));
    out.push_str(&format!("settling_time = {}\n", opt(metrics.settling_time)));
    out.push_str(&format!("steady_state_error = {}\n", fmt_f64(metrics.steady_state_error)));
    out.push_str(&format!("itae = {}\n", fmt_f64(criteria.itae)));
    out.push_str(&format!("iae = {}\n", fmt_f64(criteria.iae)));
    out.push_str(&format!("ise = {}\n", fmt_f64(criteria.ise)));
    out.push_str(&format!("itse = {}\n", fmt_f64(criteria.itse)));
}

pub struct MetricsReport<'a> {
    pub scenario_origin: &'a str,
    pub samples: usize,
    pub t_last: Option<f64>,
    pub diverged: Option<&'a str>,
    /// (signal label, metrics, criteria) blocks; empty when diverged.
    pub blocks: Vec<(&'static str, PerfMetrics, CriteriaValues)>,
}

pub fn metrics_txt(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario = {}\n", report.scenario_origin));
    out.push_str(&format!("samples = {}\n", report.samples));
    if let Some(t) = report.t_last {
        out.push_str(&format!("t_last = {}\n", fmt_f64(t)));
    }
    match report.diverged {
        Some(reason) => {
            out.push_str("diverged = true\n");
            out.push_str(&format!("reason = {reason}\n"));
            out.push_str("\n(no response metrics: the run did not complete)\n");
        }
        None => {
            out.push_str("diverged = false\n");
            for (label, metrics, criteria) in &report.blocks {
                out.push_str(&format!("\n[{label}]\n"));
                metric_lines(&mut out, metrics, criteria);
            }
        }
    }
    out
}
