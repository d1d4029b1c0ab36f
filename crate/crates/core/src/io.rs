//! CSV readers and writers for traces, spectra, eye grids, S11 and C–V data.
//!
//! Readers report the 1-based line number of the first bad row.

use std::io::{Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::analysis::EyeDiagram;
use crate::extraction::TransmissionSweep;
use crate::solver::Trace;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("bad header: {0}")]
    Header(String),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(p) => DataError::Row { line: p.line(), msg: e.to_string() },
            None => match e.into_kind() {
                csv::ErrorKind::Io(io) => DataError::Io(io),
                k => DataError::Header(format!("{k:?}")),
            },
        }
    }
}

pub type DataResult<T> = std::result::Result<T, DataError>;

pub const TRACE_COLUMNS: [&str; 8] = ["t_s", "v_m_V", "ein_x", "ein_y", "eout_x", "eout_y", "p_out_W", "dlambda_m"];

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// One row of a trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub v_m: f64,
    pub e_in: Complex64,
    pub e_out: Complex64,
    pub p_out: f64,
    pub d_lambda: f64,
}

impl TraceRow {
    pub fn p_in(&self) -> f64 {
        self.e_in.norm_sqr()
    }
}

pub fn trace_rows(trace: &Trace) -> Vec<TraceRow> {
    trace
        .points
        .iter()
        .map(|p| TraceRow {
            t: p.t,
            v_m: p.electrical.v_m,
            e_in: p.e_in,
            e_out: p.e_out,
            p_out: p.p_out(),
            d_lambda: p.d_lambda,
        })
        .collect()
}

/// Writes every `every`-th row (the last row is always kept).
pub fn write_trace_csv<W: Write>(w: W, rows: &[TraceRow], every: usize) -> DataResult<()> {
    let every = every.max(1);
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TRACE_COLUMNS)?;
    for (i, r) in rows.iter().enumerate() {
        if i % every != 0 && i + 1 != rows.len() {
            continue;
        }
        wr.write_record([
            num(r.t),
            num(r.v_m),
            num(r.e_in.re),
            num(r.e_in.im),
            num(r.e_out.re),
            num(r.e_out.im),
            num(r.p_out),
            num(r.d_lambda),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

fn parse_row(rec: &csv::StringRecord, n: usize) -> DataResult<Vec<f64>> {
    let line = rec.position().map_or(0, |p| p.line());
    if rec.len() != n {
        return Err(DataError::Row { line, msg: format!("expected {n} fields, found {}", rec.len()) });
    }
    rec.iter()
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Row { line, msg: format!("not a finite number: {s:?}") })
        })
        .collect()
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> DataResult<()> {
    let h = rdr.headers()?;
    let got: Vec<&str> = h.iter().map(str::trim).collect();
    if got != expected {
        return Err(DataError::Header(format!("expected {expected:?}, found {got:?}")));
    }
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> DataResult<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &TRACE_COLUMNS)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let v = parse_row(&rec?, 8)?;
        rows.push(TraceRow {
            t: v[0],
            v_m: v[1],
            e_in: Complex64::new(v[2], v[3]),
            e_out: Complex64::new(v[4], v[5]),
            p_out: v[6],
            d_lambda: v[7],
        });
    }
    Ok(rows)
}

/// Spectrum files: `lambda_nm` plus either `transmission` (linear) or
/// `transmission_dB`; the header names the scale.
pub fn write_sweep_csv<W: Write>(w: W, sweep: &TransmissionSweep, db: bool) -> DataResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lambda_nm", if db { "transmission_dB" } else { "transmission" }])?;
    for &(l, t) in &sweep.points {
        let y = if db { 10.0 * t.log10() } else { t };
        wr.write_record([num(l * 1e9), num(y)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R, bias: f64, heater_power: f64) -> DataResult<TransmissionSweep> {
    let mut rdr = csv::Reader::from_reader(r);
    let h = rdr.headers()?.clone();
    let names: Vec<&str> = h.iter().map(str::trim).collect();
    let db = match names.as_slice() {
        ["lambda_nm", "transmission"] => false,
        ["lambda_nm", "transmission_dB"] => true,
        _ => {
            return Err(DataError::Header(format!(
                "expected lambda_nm,transmission or lambda_nm,transmission_dB, found {names:?}"
            )))
        }
    };
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = parse_row(&rec, 2)?;
        let t = if db { 10f64.powf(v[1] / 10.0) } else { v[1] };
        if !(t > 0.0) {
            return Err(DataError::Row { line, msg: format!("transmission must be positive, got {}", v[1]) });
        }
        if let Some(&(prev, _)) = points.last() {
            if !(v[0] * 1e-9 > prev) {
                return Err(DataError::Row { line, msg: "wavelengths must increase strictly".into() });
            }
        }
        points.push((v[0] * 1e-9, t));
    }
    Ok(TransmissionSweep { bias, heater_power, points })
}

pub const S11_COLUMNS: [&str; 3] = ["f_Hz", "re_s11", "im_s11"];

pub fn write_s11_csv<W: Write>(w: W, points: &[(f64, Complex64)]) -> DataResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(S11_COLUMNS)?;
    for &(f, s) in points {
        wr.write_record([num(f), num(s.re), num(s.im)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_s11_csv<R: Read>(r: R) -> DataResult<Vec<(f64, Complex64)>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &S11_COLUMNS)?;
    rdr.records()
        .map(|rec| {
            let v = parse_row(&rec?, 3)?;
            Ok((v[0], Complex64::new(v[1], v[2])))
        })
        .collect()
}

pub const CV_COLUMNS: [&str; 2] = ["v_V", "cj_F"];

pub fn write_cv_csv<W: Write>(w: W, points: &[(f64, f64)]) -> DataResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CV_COLUMNS)?;
    for &(v, c) in points {
        wr.write_record([num(v), num(c)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_cv_csv<R: Read>(r: R) -> DataResult<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &CV_COLUMNS)?;
    rdr.records()
        .map(|rec| {
            let v = parse_row(&rec?, 2)?;
            Ok((v[0], v[1]))
        })
        .collect()
}

pub const EYE_COLUMNS: [&str; 3] = ["t_s", "p_W", "count"];

/// Full histogram, one row per bin centre, time-major.
pub fn write_eye_csv<W: Write>(w: W, eye: &EyeDiagram) -> DataResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(EYE_COLUMNS)?;
    for it in 0..eye.n_t {
        for ip in 0..eye.n_p {
            let (t, p) = eye.bin_center(it, ip);
            wr.write_record([num(t), num(p), eye.count(it, ip).to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_round_trip_linear_and_db() {
        let s = TransmissionSweep {
            bias: 0.5,
            heater_power: 0.0,
            points: vec![(1566.0e-9, 0.9), (1566.001e-9, 0.25), (1566.002e-9, 0.8)],
        };
        for db in [false, true] {
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &s, db).unwrap();
            let back = read_sweep_csv(buf.as_slice(), 0.5, 0.0).unwrap();
            for (a, b) in back.points.iter().zip(&s.points) {
                assert!((a.0 - b.0).abs() < 1e-20 && (a.1 - b.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn corrupt_row_reports_line() {
        let text = "f_Hz,re_s11,im_s11\n1e9,0.1,0.2\n2e9,abc,0.3\n";
        match read_s11_csv(text.as_bytes()) {
            Err(DataError::Row { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
        let short = "f_Hz,re_s11,im_s11\n1e9,0.1\n";
        assert!(matches!(read_s11_csv(short.as_bytes()), Err(DataError::Row { line: 2, .. })));
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let rows: Vec<TraceRow> = (0..5)
            .map(|i| TraceRow {
                t: i as f64 * 1.1e-13,
                v_m: 0.3 * i as f64,
                e_in: Complex64::new(0.0316, 0.0),
                e_out: Complex64::new(0.01 / (1.0 + i as f64), -1e-3),
                p_out: 1e-4 / 3.0,
                d_lambda: 1e-12,
            })
            .collect();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows, 1).unwrap();
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), rows);
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows, 3).unwrap();
        let back = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2], rows[4]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(read_cv_csv("v,c\n0,1\n".as_bytes()), Err(DataError::Header(_))));
    }
}
