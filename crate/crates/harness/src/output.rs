//! CSV, JSON and SVG artifacts.

use crate::error::Result;
use crate::experiment::ExperimentOutput;
use crate::scaling::ScalingReport;
use drc_core::oco::RegretReport;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn write_trace(path: &Path, out: &ExperimentOutput) -> Result<()> {
    let (dy, du) = (out.system.dy(), out.system.du());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..dy).map(|i| format!("y{i}")));
    header.extend((0..du).map(|i| format!("u{i}")));
    header.push("loss".into());
    w.write_record(&header)?;
    let tr = &out.run.trace;
    for t in 0..tr.len() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(tr.y[t].iter().map(|v| v.to_string()));
        rec.extend(tr.u[t].iter().map(|v| v.to_string()));
        rec.push(tr.loss[t].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_regret(path: &Path, report: &RegretReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "loss_alg", "loss_cmp", "regret"])?;
    for t in 0..report.regret.len() {
        w.write_record(&[
            (t + 1).to_string(),
            report.loss_alg[t].to_string(),
            report.loss_cmp[t].to_string(),
            report.regret[t].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_regret(path: &Path, comparator: &str) -> Result<RegretReport> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rep = RegretReport { loss_alg: vec![], loss_cmp: vec![], regret: vec![], comparator: comparator.into(), regret_counterfactual: None };
    for rec in r.deserialize() {
        let (_, a, c, g): (usize, f64, f64, f64) = rec?;
        rep.loss_alg.push(a);
        rep.loss_cmp.push(c);
        rep.regret.push(g);
    }
    Ok(rep)
}

pub fn write_scaling(path: &Path, report: &ScalingReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["T", "seed", "regret"])?;
    for r in &report.rows {
        w.write_record(&[r.t.to_string(), r.seed.to_string(), r.regret.to_string()])?;
    }
    w.write_record(&["slope".to_string(), report.slope.to_string(), report.stderr.to_string()])?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    final_regret: f64,
    final_regret_counterfactual: Option<f64>,
    comparator: &'a str,
    comparator_objective: Option<f64>,
    r_nat: f64,
    n_explore: Option<usize>,
    eps_g: Option<f64>,
    schedule: &'a drc_core::oco::StepSchedule,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

/// Write every artifact of a run into `dir`; returns the written paths.
pub fn emit_outputs(out: &ExperimentOutput, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = vec![dir.join("trace.csv"), dir.join("regret.csv"), dir.join("summary.json")];
    write_trace(&written[0], out)?;
    write_regret(&written[1], &out.report)?;
    let summary = Summary {
        final_regret: out.report.final_regret(),
        final_regret_counterfactual: out.report.regret_counterfactual.as_ref().and_then(|r| r.last().copied()),
        comparator: &out.report.comparator,
        comparator_objective: out.comparator.as_ref().map(|c| c.objective),
        r_nat: out.r_nat,
        n_explore: out.n_explore,
        eps_g: out.estimate.as_ref().and_then(|e| e.eps_g),
        schedule: &out.schedule,
    };
    write_json(&written[2], &summary)?;
    if let Some(c) = &out.certificate {
        let p = dir.join("certificate.json");
        write_json(&p, c)?;
        written.push(p);
    }
    if plot {
        let p = dir.join("regret.svg");
        std::fs::write(&p, regret_svg(&out.report.regret))?;
        written.push(p);
    }
    Ok(written)
}

fn polyline(points: &[(f64, f64)], x0: f64, w: f64, h: f64) -> String {
    if points.is_empty() {
        return String::new();
    }
    let (xmin, xmax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (ymin, ymax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let sx = if xmax > xmin { w / (xmax - xmin) } else { 0.0 };
    let sy = if ymax > ymin { h / (ymax - ymin) } else { 0.0 };
    let mut s = String::new();
    for (x, y) in points {
        let _ = write!(s, "{:.2},{:.2} ", x0 + (x - xmin) * sx, 20.0 + h - (y - ymin) * sy);
    }
    let mut out = format!("<polyline fill=\"none\" stroke=\"#1f4e99\" stroke-width=\"1.5\" points=\"{}\"/>\n", s.trim_end());
    let _ = writeln!(
        out,
        "<text x=\"{x0}\" y=\"{:.0}\" font-size=\"10\">x [{xmin:.3e}, {xmax:.3e}]  y [{ymin:.3e}, {ymax:.3e}]</text>",
        h + 40.0
    );
    out
}

/// Regret against `t` on linear axes (left) and log-log axes of the
/// positive part (right).
pub fn regret_svg(regret: &[f64]) -> String {
    // at most ~2000 points per panel
    let stride = (regret.len() / 2000).max(1);
    let lin: Vec<(f64, f64)> = regret.iter().enumerate().step_by(stride).map(|(i, r)| ((i + 1) as f64, *r)).collect();
    let log: Vec<(f64, f64)> = lin.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.log10(), p.1.log10())).collect();
    let (w, h) = (360.0, 240.0);
    let mut s = String::from("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"300\">\n");
    s.push_str("<rect width=\"800\" height=\"300\" fill=\"white\"/>\n");
    s.push_str("<text x=\"20\" y=\"14\" font-size=\"12\">regret vs t</text>\n");
    s.push_str("<text x=\"420\" y=\"14\" font-size=\"12\">log10 regret vs log10 t</text>\n");
    s.push_str(&polyline(&lin, 20.0, w, h));
    s.push_str(&polyline(&log, 420.0, w, h));
    s.push_str("</svg>\n");
    s
}
