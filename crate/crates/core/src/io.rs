//! Versioned CSV formats for matrices, transport plans and sweep curves.
//!
//! Every file starts with the line `# qmetric-lab v1`. Numbers are written
//! with Rust's shortest round-trip formatting, independent of locale.

use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::lab::search::{CurvePoint, LabMetric};
use crate::sampler::CSV_VERSION_LINE;
use crate::transport::Coupling;

fn expect_version<R: BufRead>(input: &mut R) -> Result<()> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != CSV_VERSION_LINE {
        return Err(Error::Format(format!("expected '{CSV_VERSION_LINE}', found '{}'", line.trim_end())));
    }
    Ok(())
}

/// Dense matrix, one row per line, no header row.
pub fn write_matrix_csv<W: Write>(mut out: W, m: &Array2<f64>) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in m.rows() {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(mut input: R) -> Result<Array2<f64>> {
    expect_version(&mut input)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Format(format!("row {rows} has {} columns, expected {}", rec.len(), cols.unwrap_or(0))));
        }
        for field in rec.iter() {
            values.push(field.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number '{field}'")))?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("empty matrix".into()))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Format(e.to_string()))
}

/// Nonzero plan cells as `i,j,mass` rows.
pub fn write_plan_csv<W: Write>(mut out: W, plan: &Coupling, threshold: f64) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "mass"])?;
    for (i, j, m) in plan.sparse(threshold) {
        w.write_record([i.to_string(), j.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,k,N,trial,M` rows; flagged trials leave `M` empty.
pub fn write_curve_csv<W: Write>(mut out: W, metric: LabMetric, points: &[CurvePoint]) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "k", "N", "trial", "M"])?;
    let k = metric.order().map(|k| k.to_string()).unwrap_or_default();
    for p in points {
        for t in &p.trials {
            let m = t.m.map(|m| m.to_string()).unwrap_or_default();
            w.write_record([metric.to_string(), k.clone(), p.n.to_string(), t.trial.to_string(), m])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_round_trip() {
        let m = array![[0.1, 0.2, 1.0 / 3.0], [0.0, 1e-17, 0.5]];
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        assert_eq!(read_matrix_csv(&buf[..]).unwrap(), m);
        assert!(read_matrix_csv(&b"0.1,0.2\n"[..]).is_err());
        assert!(read_matrix_csv(&b"# qmetric-lab v1\n0.1,0.2\n0.3\n"[..]).is_err());
    }
}
