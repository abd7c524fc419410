use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::runner::{ErrorRow, RunResult, TrackingSummary};
use crate::aggregate::{FlexibilityEnvelope, Variant};
use crate::error::Result;

/// Six significant digits, trailing zeros kept.
///
/// Fixed notation for decimal exponents in `-4..6`, scientific otherwise.
pub fn fmt6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, v)
    } else {
        sci
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// `time_h,reference_kw,imm_p,imm_u,imm_l,ssm_p,ssm_u,ssm_l,essm_p,essm_u,essm_l`.
/// Absent series leave their fields empty.
pub fn write_timeseries<W: Write>(mut w: W, run: &RunResult) -> io::Result<()> {
    writeln!(
        w,
        "time_h,reference_kw,imm_p,imm_u,imm_l,ssm_p,ssm_u,ssm_l,essm_p,essm_u,essm_l"
    )?;
    let ssm = run.model(Variant::Ssm);
    let essm = run.model(Variant::Essm);
    for (k, t) in run.times.iter().enumerate() {
        let reference = run.reference.as_ref().map(|r| r[k]);
        let mut fields = vec![fmt6(*t), opt(reference)];
        let mut push = |env: Option<&FlexibilityEnvelope>| match env {
            Some(e) => fields.extend(e.as_array().map(fmt6)),
            None => fields.extend([String::new(), String::new(), String::new()]),
        };
        push(Some(&run.imm[k]));
        push(ssm.map(|m| &m.envelopes[k]));
        push(essm.map(|m| &m.envelopes[k]));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_errors<W: Write>(mut w: W, rows: &[ErrorRow]) -> io::Result<()> {
    writeln!(w, "n_ev,variant,upper_err,lower_err,power_err")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.n_ev,
            r.variant,
            opt(r.upper_err),
            opt(r.lower_err),
            opt(r.power_err)
        )?;
    }
    Ok(())
}

/// Per-step state vector of one model, one column per state.
pub fn write_states<W: Write>(mut w: W, run: &RunResult, variant: Variant) -> io::Result<()> {
    let Some(m) = run.model(variant) else {
        return Ok(());
    };
    let labels: Vec<String> = (0..m.layout.dimension())
        .map(|i| m.layout.state_label(i))
        .collect();
    writeln!(w, "time_h,{}", labels.join(","))?;
    for (t, x) in run.times.iter().zip(&m.states) {
        let row: Vec<String> = x.iter().map(|v| fmt6(*v)).collect();
        writeln!(w, "{},{}", fmt6(*t), row.join(","))?;
    }
    Ok(())
}

pub fn write_commands<W: Write>(mut w: W, run: &RunResult) -> io::Result<()> {
    writeln!(w, "issue_time_h,mode,interval,probability")?;
    for r in &run.commands {
        writeln!(
            w,
            "{},{},{},{}",
            fmt6(r.issue_time),
            r.mode.label(),
            r.interval,
            fmt6(r.probability)
        )?;
    }
    Ok(())
}

pub fn write_tracking<W: Write>(mut w: W, summaries: &[TrackingSummary]) -> io::Result<()> {
    writeln!(w, "driver,rms_kw,fleet_rated_kw,rms_pct,saturated_steps")?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.driver,
            fmt6(s.rms_kw),
            fmt6(s.fleet_rated_kw),
            fmt6(s.rms_pct),
            s.saturated_steps
        )?;
    }
    Ok(())
}

/// `timeseries.csv`, `errors.csv`, `states_<variant>.csv` and, for
/// controlled runs, `commands.csv` under `dir`.
pub fn write_run(dir: &Path, run: &RunResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("timeseries.csv"))?;
    write_timeseries(&mut w, run)?;
    w.flush()?;
    let mut w = create(&dir.join("errors.csv"))?;
    write_errors(&mut w, &run.errors())?;
    w.flush()?;
    for m in &run.models {
        let mut w = create(&dir.join(format!("states_{}.csv", m.variant)))?;
        write_states(&mut w, run, m.variant)?;
        w.flush()?;
    }
    if run.tracking.is_some() {
        let mut w = create(&dir.join("commands.csv"))?;
        write_commands(&mut w, run)?;
        w.flush()?;
    }
    Ok(())
}

/// One `track_<driver>/` directory per run plus a `tracking.csv` summary.
pub fn write_tracking_runs(dir: &Path, runs: &[RunResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut summaries = Vec::new();
    for run in runs {
        if let Some(s) = run.tracking {
            write_run(&dir.join(format!("track_{}", s.driver)), run)?;
            summaries.push(s);
        }
    }
    let mut w = create(&dir.join("tracking.csv"))?;
    write_tracking(&mut w, &summaries)?;
    w.flush()?;
    Ok(())
}

pub fn write_sweep(dir: &Path, rows: &[ErrorRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("errors.csv"))?;
    write_errors(&mut w, rows)?;
    w.flush()?;
    Ok(())
}
