//! CSV and JSON output. Floats are written with 17 significant digits.

use std::io::Write;

use serde::Serialize;

use super::SimulationRecord;
use crate::error::Result;
use crate::fmt_float;
use crate::optimizers::TracePoint;

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn join_times(times: &[usize], sep: &str) -> String {
    times.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(sep)
}

/// `evaluation_count,best_cost,population_mean_cost`
pub fn write_trace_csv(mut w: impl Write, trace: &[TracePoint]) -> Result<()> {
    writeln!(w, "evaluation_count,best_cost,population_mean_cost")?;
    for p in trace {
        writeln!(w, "{},{},{}", p.evaluations, fmt_float(p.best_cost), opt_float(p.population_mean))?;
    }
    Ok(())
}

/// Several traces in one table, keyed by the first column.
pub fn write_multi_trace_csv<'a>(mut w: impl Write, traces: impl IntoIterator<Item = (&'a str, &'a [TracePoint])>) -> Result<()> {
    writeln!(w, "optimizer,evaluation_count,best_cost,population_mean_cost")?;
    for (name, trace) in traces {
        for p in trace {
            writeln!(w, "{name},{},{},{}", p.evaluations, fmt_float(p.best_cost), opt_float(p.population_mean))?;
        }
    }
    Ok(())
}

/// `sim_id,seed,mse,mse_reg,gain,schedule` with `;`-joined times.
pub fn write_simulations_csv(mut w: impl Write, records: &[SimulationRecord]) -> Result<()> {
    writeln!(w, "sim_id,seed,mse,mse_reg,gain,schedule")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.sim_id,
            r.seed,
            fmt_float(r.report.mse),
            fmt_float(r.report.mse_reg),
            opt_float(r.report.gain),
            join_times(&r.schedule, ";")
        )?;
    }
    Ok(())
}

pub fn write_json(mut w: impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| crate::Error::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}
