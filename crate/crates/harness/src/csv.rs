//! CSV output with shortest round-trip float formatting and LF line endings.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use pdm_core::transforms::ReferenceTrajectory;
use pdm_core::Trajectory;

fn write_row<W: Write>(out: &mut W, buf: &mut ryu::Buffer, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        out.write_all(buf.format(v).as_bytes())?;
    }
    out.write_all(b"\n")
}

pub fn trajectory_header(dim: usize) -> String {
    let mut cols = vec!["t".to_string(), "tau".to_string()];
    cols.extend((1..=dim).map(|i| format!("x{i}")));
    cols.extend((1..=dim).map(|i| format!("v{i}")));
    cols.push("E".into());
    cols.join(",")
}

/// `t,tau,x1..xn,v1..vn,E`, one row per sample.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", trajectory_header(traj.model.dim))?;
    let mut buf = ryu::Buffer::new();
    for s in &traj.samples {
        let row = [s.state.t, s.tau]
            .into_iter()
            .chain(s.state.x.iter().copied())
            .chain(s.state.v.iter().copied())
            .chain([s.energy]);
        write_row(&mut out, &mut buf, row)?;
    }
    out.flush()
}

pub fn write_trajectory_file(path: &Path, traj: &Trajectory) -> io::Result<()> {
    write_trajectory(File::create(path)?, traj)
}

/// `t,tau,q1..qn,qt1..qtn`; `times` are the source sample times.
pub fn write_reference<W: Write>(out: W, times: &[f64], reference: &ReferenceTrajectory) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    let dim = reference.dim();
    let mut cols = vec!["t".to_string(), "tau".to_string()];
    cols.extend((1..=dim).map(|i| format!("q{i}")));
    cols.extend((1..=dim).map(|i| format!("qt{i}")));
    writeln!(out, "{}", cols.join(","))?;
    let mut buf = ryu::Buffer::new();
    for (k, &t) in times.iter().enumerate().take(reference.len()) {
        let row = [t, reference.tau[k]]
            .into_iter()
            .chain(reference.q[k].iter().copied())
            .chain(reference.qtilde[k].iter().copied());
        write_row(&mut out, &mut buf, row)?;
    }
    out.flush()
}

/// Generic table writer for sweep results.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", header.join(","))?;
    let mut buf = ryu::Buffer::new();
    for row in rows {
        let mut first = true;
        for cell in row {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            match cell {
                Cell::Num(x) => out.write_all(buf.format(*x).as_bytes())?,
                Cell::Int(i) => write!(out, "{i}")?,
                Cell::Text(s) => write_text(&mut out, s)?,
                Cell::Empty => {}
            }
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn write_text<W: Write>(out: &mut W, s: &str) -> io::Result<()> {
    if s.contains([',', '"', '\n']) {
        write!(out, "\"{}\"", s.replace('"', "\"\""))
    } else {
        out.write_all(s.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

/// Numeric CSV: header columns and rows of parsed floats.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_numeric<R: io::Read>(input: R) -> io::Result<NumericTable> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty csv"))??
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row = line
            .split(',')
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("row {}: `{c}`: {e}", i + 1)))
            })
            .collect::<io::Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("row {} has {} fields, header has {}", i + 1, row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

pub fn read_numeric_file(path: &Path) -> io::Result<NumericTable> {
    read_numeric(File::open(path)?)
}
