//! Locale-independent CSV and JSON writers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use hypergrad::outer::OptTrace;
use serde::Serialize;

pub const TRACE_HEADER: [&str; 8] =
    ["iter", "f_value", "grad_est_norm", "true_grad_norm", "bias", "cosine", "descent_ratio", "wallclock_s"];

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Absent diagnostics are empty; a diagnostic that was computed but is
/// undefined (zero denominator) is written as `undefined`.
fn opt_cell(recorded: bool, v: Option<f64>) -> String {
    match (recorded, v) {
        (false, _) => String::new(),
        (true, Some(x)) => fmt_f64(x),
        (true, None) => "undefined".into(),
    }
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn trace_rows(trace: &OptTrace) -> Vec<[String; 8]> {
    trace
        .records
        .iter()
        .map(|r| {
            let tg = r.true_gradient.as_ref();
            let rec = tg.is_some();
            [
                r.iter.to_string(),
                fmt_f64(r.upper_value),
                fmt_f64(r.estimate_norm),
                opt_cell(rec, tg.map(|t| t.norm)),
                opt_cell(rec, tg.map(|t| t.bias)),
                opt_cell(rec, tg.and_then(|t| t.cosine)),
                opt_cell(rec, tg.and_then(|t| t.descent_ratio)),
                fmt_f64(r.wallclock),
            ]
        })
        .collect()
}

pub fn write_trace<W: Write>(trace: &OptTrace, w: W) -> anyhow::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(TRACE_HEADER)?;
    for row in trace_rows(trace) {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &OptTrace, path: &Path) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_trace(trace, std::io::BufWriter::new(f))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(2.0), "2");
        assert_eq!(fmt_f64(1.5e-7), "1.5e-7");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(-3.25e20), "-3.25e20");
        for x in [0.1, 1.0 / 3.0, 1.5e-7, 6.02e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn cells() {
        assert_eq!(opt_cell(false, Some(1.0)), "");
        assert_eq!(opt_cell(true, None), "undefined");
        assert_eq!(opt_cell(true, Some(0.5)), "0.5");
    }
}
