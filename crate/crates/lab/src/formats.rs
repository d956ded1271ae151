//! CSV and text formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::io::{Read, Write};

use serde::Serialize;
use tacsyn_core::gp::{GpHyper, Transition};
use tacsyn_core::harness::{Comparison, ExperimentReport, RolloutTrace};
use tacsyn_core::Policy;
use tacsyn_core::reactive::LabeledForceSample;
use tacsyn_core::{Event, SlipCalibration, SlipClass};

use crate::error::LabError;

/// Minimal error context for formats that do not know their file name.
#[derive(Debug)]
pub struct FormatError(pub String);

impl From<csv::Error> for FormatError {
    fn from(e: csv::Error) -> Self {
        FormatError(e.to_string())
    }
}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError(e.to_string())
    }
}

impl FormatError {
    pub fn at(self, path: &std::path::Path) -> LabError {
        LabError::Data { path: path.to_path_buf(), message: self.0 }
    }
}

/// Reads `f1,f2,f3,label` rows; labels are `firmly_held`, `not_firmly_held`
/// or `slipped`.
pub fn read_samples(input: impl Read) -> Result<Vec<LabeledForceSample>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let expected = ["f1", "f2", "f3", "label"];
    if headers.iter().ne(expected) {
        return Err(FormatError(format!("expected header {}, found {}", expected.join(","), headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let mut forces = [0.0; 3];
        for (k, f) in forces.iter_mut().enumerate() {
            *f = row[k].parse().map_err(|_| FormatError(format!("line {line}: bad force {:?}", &row[k])))?;
        }
        let label = SlipClass::parse(&row[3]).ok_or_else(|| FormatError(format!("line {line}: unknown label {:?}", &row[3])))?;
        out.push(LabeledForceSample { forces, label });
    }
    if out.is_empty() {
        return Err(FormatError("no samples".into()));
    }
    Ok(out)
}

pub fn write_samples(out: impl Write, samples: &[LabeledForceSample]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["f1", "f2", "f3", "label"])?;
    for s in samples {
        w.write_record([s.forces[0].to_string(), s.forces[1].to_string(), s.forces[2].to_string(), s.label.as_str().to_owned()])?;
    }
    w.flush()?;
    Ok(())
}

/// Calibration files are TOML so they can be pasted under `[calibration]`.
pub fn render_calibration(cal: &SlipCalibration) -> String {
    toml::to_string(cal).expect("calibration serializes")
}

pub fn parse_calibration(text: &str) -> Result<SlipCalibration, FormatError> {
    toml::from_str(text).map_err(|e| FormatError(e.to_string()))
}

pub fn render_policy(policy: &Policy) -> String {
    toml::to_string(policy).expect("policy serializes")
}

#[derive(Serialize)]
struct Hypers<'a> {
    output: &'a [GpHyper],
}

/// One `[[output]]` table per modeled state dimension.
pub fn render_hypers(hypers: &[GpHyper]) -> String {
    toml::to_string(&Hypers { output: hypers }).expect("hyperparameters serialize")
}

/// `x1..xd, u1..u3, next1..nextd` per transition.
pub fn write_transitions(out: impl Write, data: &[Transition]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    let d = data.first().map_or(0, |t| t.state.len());
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.extend((1..=3).map(|i| format!("u{i}")));
    header.extend((1..=d).map(|i| format!("next{i}")));
    w.write_record(&header)?;
    for t in data {
        let row: Vec<String> = t.state.iter().chain(&t.control).chain(&t.next).map(f64::to_string).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn event_name(e: Event) -> &'static str {
    match e {
        Event::None => "none",
        Event::Fell => "fell",
    }
}

pub const TRACE_HEADER: [&str; 19] = [
    "tick", "yaw", "f1", "f2", "f3", "up1", "up2", "up3", "ur1", "ur2", "ur3", "u1", "u2", "u3", "alpha",
    "pseudoenergy", "cost", "event", "phase",
];

pub fn write_trace(out: impl Write, trace: &RolloutTrace) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        let mut row = Vec::with_capacity(TRACE_HEADER.len());
        row.push(r.tick.to_string());
        row.push(r.state.yaw.to_string());
        row.extend(r.state.forces.iter().map(f64::to_string));
        row.extend(r.u_p.iter().map(f64::to_string));
        row.extend(r.u_r.iter().map(f64::to_string));
        row.extend(r.u.iter().map(f64::to_string));
        row.push(r.alpha.to_string());
        row.push(r.pseudoenergy.to_string());
        row.push(r.cost.to_string());
        row.push(event_name(r.event).to_owned());
        row.push(if (r.tick as usize) < trace.episode_ticks { "episode" } else { "hold" }.to_owned());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows are trials, `rollout_k` columns hold the mean per-tick cost of
/// that rollout (empty once the trial stopped), then the verdict.
pub fn write_cost_matrix(out: impl Write, report: &ExperimentReport) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trial".to_owned(), "seed".to_owned()];
    header.extend((1..=report.max_rollouts).map(|r| format!("rollout_{r}")));
    header.push("verdict".to_owned());
    w.write_record(&header)?;
    for (i, (o, row)) in report.outcomes.iter().zip(report.cost_matrix()).enumerate() {
        let mut rec = vec![(i + 1).to_string(), o.seed.to_string()];
        rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
        rec.push(o.verdict.as_str().to_owned());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per trial and rollout: final yaw and intervention count.
pub fn write_rollouts(out: impl Write, report: &ExperimentReport) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "rollout", "final_yaw_deg", "cost", "interventions", "fell"])?;
    for (i, o) in report.outcomes.iter().enumerate() {
        for (r, s) in o.rollouts.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                (r + 1).to_string(),
                s.final_yaw.to_degrees().to_string(),
                s.cost.to_string(),
                s.interventions.to_string(),
                s.fell.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_interventions(out: impl Write, report: &ExperimentReport) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rollout", "trials", "median_interventions"])?;
    for (r, m) in report.median_interventions().iter().enumerate() {
        let trials = report.outcomes.iter().filter(|o| o.rollouts.len() > r).count();
        w.write_record([(r + 1).to_string(), trials.to_string(), m.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison(out: impl Write, cmp: &Comparison) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["condition", "trials", "success_rate", "slip_rate"])?;
    for r in &cmp.rows {
        w.write_record([r.condition.as_str().to_owned(), r.trials.to_string(), r.success_rate.to_string(), r.slip_rate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `success=9/10 slip=0/10`.
pub fn summary_line(report: &ExperimentReport) -> String {
    use tacsyn_core::Verdict;
    let n = report.trials();
    format!(
        "success={}/{n} slip={}/{n}",
        report.count(Verdict::TaskLearned),
        report.count(Verdict::ObjectSlipped)
    )
}

/// Plain-text rendering of a comparison.
pub fn comparison_table(cmp: &Comparison) -> String {
    let mut s = format!("{:<14} {:>7} {:>8} {:>8}\n", "condition", "trials", "success", "slip");
    for r in &cmp.rows {
        s.push_str(&format!(
            "{:<14} {:>7} {:>7.0}% {:>7.0}%\n",
            r.condition.as_str(),
            r.trials,
            100.0 * r.success_rate,
            100.0 * r.slip_rate
        ));
    }
    s
}
