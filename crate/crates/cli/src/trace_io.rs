//! Trace CSV files. Floats are written in their shortest round-trip form, so reading a
//! file back gives bit-identical values.

use std::io::{Read, Write};
use std::path::Path;

use conecoord_core::solver::IterationRecord;

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 9] = [
    "k",
    "block",
    "eps",
    "objective",
    "suboptimality",
    "feasibility",
    "dual_residual",
    "lyapunov",
    "wall_ns",
];

/// Shortest decimal that parses back to the same `f64`. Plain notation for moderate
/// magnitudes, exponent notation otherwise.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn row(r: &IterationRecord) -> [String; 9] {
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    [
        r.k.to_string(),
        r.block.map(|b| b.to_string()).unwrap_or_default(),
        format_float(r.eps),
        format_float(r.objective),
        opt(r.suboptimality),
        format_float(r.feasibility),
        format_float(r.dual_residual),
        opt(r.lyapunov),
        r.wall_ns.to_string(),
    ]
}

pub fn write_records<W: Write>(records: &[IterationRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(records: &[IterationRecord], path: &Path) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_records(records, std::io::BufWriter::new(file)).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<IterationRecord>, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(HEADER) {
        return Err(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        ));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let err = |i: usize| format!("row {}: bad {} {:?}", line + 1, HEADER[i], at(i));
        let float = |i: usize| at(i).parse::<f64>().map_err(|_| err(i));
        let opt = |i: usize| -> Result<Option<f64>, String> {
            if at(i).is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        out.push(IterationRecord {
            k: at(0).parse().map_err(|_| err(0))?,
            block: if at(1).is_empty() {
                None
            } else {
                Some(at(1).parse().map_err(|_| err(1))?)
            },
            eps: float(2)?,
            objective: float(3)?,
            suboptimality: opt(4)?,
            feasibility: float(5)?,
            dual_residual: float(6)?,
            lyapunov: opt(7)?,
            wall_ns: at(8).parse().map_err(|_| err(8))?,
        });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> CliResult<Vec<IterationRecord>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_records(std::io::BufReader::new(file))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Record-wise mean over runs, truncated to the longest common prefix of iteration
/// indices. Optional columns are averaged only when every run has them.
pub fn mean_records(runs: &[&[IterationRecord]]) -> Vec<IterationRecord> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let count = runs.len() as f64;
    let mut out = Vec::new();
    for (i, head) in first.iter().enumerate() {
        let rows: Option<Vec<&IterationRecord>> = runs
            .iter()
            .map(|r| r.get(i).filter(|x| x.k == head.k))
            .collect();
        let Some(rows) = rows else { break };
        let mean =
            |f: &dyn Fn(&IterationRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / count;
        let mean_opt = |f: &dyn Fn(&IterationRecord) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
            vals.map(|v| v.iter().sum::<f64>() / count)
        };
        out.push(IterationRecord {
            k: head.k,
            block: None,
            eps: mean(&|r| r.eps),
            objective: mean(&|r| r.objective),
            suboptimality: mean_opt(&|r| r.suboptimality),
            feasibility: mean(&|r| r.feasibility),
            dual_residual: mean(&|r| r.dual_residual),
            lyapunov: mean_opt(&|r| r.lyapunov),
            wall_ns: (rows.iter().map(|r| r.wall_ns as u128).sum::<u128>() / rows.len() as u128)
                as u64,
        });
    }
    out
}
