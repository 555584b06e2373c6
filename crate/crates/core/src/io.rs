//! Binary operator files and CSV trajectories.
//!
//! Floats are written in the shortest form that parses back to the same bits,
//! so a write/read round trip is lossless.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;

use crate::fracops::{FracParams, NonlocalOperator, OffsetKernel, QUAD_RTOL};
use crate::geometry::Grid;
use crate::solver::Trajectory;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"FPLOP01\0";

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Layout (little endian): magic, `n`, `dim`, `s`, `h`, a 32-byte caller
/// fingerprint, kernel table size `m` and table, `kappa`, then the matrix in
/// column-major order.
pub fn write_operator(mut w: impl Write, op: &NonlocalOperator, fingerprint: &[u8; 32]) -> Result<()> {
    let n = op.len();
    let params = op.kernel.params();
    w.write_all(MAGIC)?;
    put_u64(&mut w, n as u64)?;
    put_u64(&mut w, params.n as u64)?;
    put_f64s(&mut w, &[params.s, op.grid.h()])?;
    w.write_all(fingerprint)?;
    let (m, table) = op.kernel.table();
    put_u64(&mut w, m as u64)?;
    put_u64(&mut w, table.len() as u64)?;
    put_f64s(&mut w, table)?;
    put_f64s(&mut w, &op.kappa)?;
    put_f64s(&mut w, op.matrix.as_slice())?;
    w.flush()?;
    Ok(())
}

/// Reads an operator written by [`write_operator`] for `grid`; returns it with
/// the stored fingerprint.
pub fn read_operator(mut r: impl Read, grid: &Grid, s: f64) -> Result<(NonlocalOperator, [u8; 32])> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an operator file".into()));
    }
    let n = get_u64(&mut r)? as usize;
    let dim = get_u64(&mut r)? as usize;
    let sh = get_f64s(&mut r, 2)?;
    if n != grid.len() || dim != grid.dim() || sh[0] != s || sh[1] != grid.h() {
        return Err(Error::Format(format!(
            "operator is for n = {n}, dim = {dim}, s = {}, h = {}; expected n = {}, dim = {}, s = {s}, h = {}",
            sh[0],
            sh[1],
            grid.len(),
            grid.dim(),
            grid.h()
        )));
    }
    let mut fingerprint = [0u8; 32];
    r.read_exact(&mut fingerprint)?;
    let m = get_u64(&mut r)? as usize;
    let len = get_u64(&mut r)? as usize;
    let table = get_f64s(&mut r, len)?;
    let kappa = get_f64s(&mut r, n)?;
    let data = get_f64s(&mut r, n * n)?;
    let params = FracParams::new(dim, s)?;
    let kernel = OffsetKernel::from_table(params, grid.h(), m, table)?;
    let op = NonlocalOperator { grid: grid.clone(), matrix: DMatrix::from_vec(n, n, data), kappa, kernel, quad_rtol: QUAD_RTOL };
    Ok((op, fingerprint))
}

/// One row per snapshot: `t, u_0, ..., u_{n-1}`, after a `#` line carrying
/// the scheme, internal step and range-warning count.
pub fn write_trajectory_csv(mut w: impl Write, traj: &Trajectory) -> Result<()> {
    writeln!(w, "# scheme={} dt={} range_warnings={}", traj.scheme, fmt_f64(traj.dt), traj.range_warnings)?;
    let n = traj.states.first().map_or(0, Vec::len);
    let mut csv = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("t".to_string()).chain((0..n).map(|i| format!("u_{i}"))).collect();
    csv.write_record(&header).map_err(csv_err)?;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        csv.write_record(std::iter::once(*t).chain(u.iter().copied()).map(fmt_f64)).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn read_trajectory_csv(r: impl Read) -> Result<Trajectory> {
    let mut r = std::io::BufReader::new(r);
    let mut meta = String::new();
    r.read_line(&mut meta)?;
    let meta = meta.trim().strip_prefix('#').ok_or_else(|| Error::Format("missing trajectory header line".into()))?;
    let (mut scheme, mut dt, mut warnings) = (None, None, None);
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("scheme", v)) => scheme = Some(v.to_string()),
            Some(("dt", v)) => dt = v.parse::<f64>().ok(),
            Some(("range_warnings", v)) => warnings = v.parse::<usize>().ok(),
            _ => return Err(Error::Format(format!("unexpected header entry `{kv}`"))),
        }
    }
    let (Some(scheme), Some(dt), Some(range_warnings)) = (scheme, dt, warnings) else {
        return Err(Error::Format("incomplete trajectory header line".into()));
    };
    let mut csv = csv::Reader::from_reader(r);
    let width = csv.headers().map_err(csv_err)?.len();
    let (mut times, mut states) = (Vec::new(), Vec::new());
    for rec in csv.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != width {
            return Err(Error::Format(format!("row of {} fields, expected {width}", rec.len())));
        }
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Format(format!("bad number `{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        times.push(vals[0]);
        states.push(vals[1..].to_vec());
    }
    if times.is_empty() {
        return Err(Error::Format("trajectory has no snapshots".into()));
    }
    Ok(Trajectory { times, states, dt, scheme, range_warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::{assemble_operator, DEFAULT_CAP};
    use crate::geometry::Domain;

    #[test]
    fn operator_round_trip() {
        let d = Domain::rectangle(1.0, 0.5).unwrap();
        let g = Grid::new(&d, 0.25).unwrap();
        let op = assemble_operator(&g, &d, &FracParams::new(2, 0.3).unwrap(), DEFAULT_CAP).unwrap();
        let mut buf = Vec::new();
        write_operator(&mut buf, &op, &[7; 32]).unwrap();
        let (back, fp) = read_operator(buf.as_slice(), &g, 0.3).unwrap();
        assert_eq!(fp, [7; 32]);
        assert_eq!(back.matrix, op.matrix);
        assert_eq!(back.kappa, op.kappa);
        assert_eq!(back.kernel.weight(9, 4), op.kernel.weight(9, 4));
        assert!(read_operator(buf.as_slice(), &g, 0.4).is_err());
        assert!(read_operator(&buf[..40], &g, 0.3).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let traj = Trajectory {
            times: vec![0.0, 0.1, 0.2],
            states: vec![vec![1.0, 1e-300, -0.3], vec![0.1 + 0.2, 5e-324, 2.0], vec![f64::MAX, 0.0, -0.0]],
            dt: 0.005,
            scheme: "imex-euler".into(),
            range_warnings: 2,
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back, traj);
        let mut again = Vec::new();
        write_trajectory_csv(&mut again, &back).unwrap();
        assert_eq!(buf, again);
        assert!(read_trajectory_csv(&b"t,u_0\n0,1\n"[..]).is_err());
    }
}
