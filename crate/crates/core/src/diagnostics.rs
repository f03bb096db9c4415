//! Error norms, convergence rates, time-series CSV and binary field files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Result, SolverError};
use crate::mesh::Mesh;
use crate::rhs::EntropyBalanceRecord;

/// Discrete L1, L2 and L∞ norms under the mesh quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Norms of `field - reference` with the `P J` quadrature. `field` holds one
/// value per global node.
pub fn error_norms<F>(mesh: &Mesh, field: &[f64], reference: F) -> Result<Norms>
where
    F: Fn(&[f64; 3]) -> f64,
{
    let nn = mesh.nodes_per_element();
    if field.len() != nn * mesh.elements.len() {
        return Err(SolverError::SizeMismatch {
            expected: nn * mesh.elements.len(),
            got: field.len(),
        });
    }
    let mut n = Norms::default();
    for (e, el) in mesh.elements.iter().enumerate() {
        for q in 0..nn {
            let d = (field[e * nn + q] - reference(&el.coords[q])).abs();
            let m = mesh.mass(e, q);
            n.l1 += m * d;
            n.l2 += m * d * d;
            n.linf = n.linf.max(d);
        }
    }
    n.l2 = n.l2.sqrt();
    Ok(n)
}

/// Errors below this are treated as exact and give no rate.
pub const ROUNDOFF_ERROR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub p: usize,
    /// Elements per direction.
    pub n: usize,
    pub norms: Norms,
    /// `log2` of the error ratio against the previous grid; `None` on the
    /// coarsest grid or when either error is at roundoff.
    pub rates: Option<[f64; 3]>,
    /// The error grew under refinement, or sits at roundoff.
    pub flagged: bool,
}

/// Rates between successive rows that share the same `p`.
pub fn convergence_rates(results: &[(usize, usize, Norms)]) -> Vec<StudyRow> {
    let mut rows: Vec<StudyRow> = Vec::with_capacity(results.len());
    for (idx, &(p, n, norms)) in results.iter().enumerate() {
        let at_roundoff = norms.l2 < ROUNDOFF_ERROR;
        let prev = idx.checked_sub(1).map(|i| results[i]).filter(|r| r.0 == p);
        let mut flagged = at_roundoff;
        let rates = prev.and_then(|(_, pn, pv)| {
            if pv.l2 < ROUNDOFF_ERROR || at_roundoff {
                return None;
            }
            let ratio = (n as f64 / pn as f64).log2();
            let r = |a: f64, b: f64| (a / b).log2() / ratio;
            let rates = [r(pv.l1, norms.l1), r(pv.l2, norms.l2), r(pv.linf, norms.linf)];
            if norms.l2 > pv.l2 {
                flagged = true;
            }
            Some(rates)
        });
        rows.push(StudyRow { p, n, norms, rates, flagged });
    }
    rows
}

/// Runs `solve(p, n)` over every pair and returns the rate table.
pub fn run_convergence_study<F>(orders: &[usize], refinements: &[usize], mut solve: F) -> Result<Vec<StudyRow>>
where
    F: FnMut(usize, usize) -> Result<Norms>,
{
    let mut results = Vec::new();
    for &p in orders {
        for &n in refinements {
            results.push((p, n, solve(p, n)?));
        }
    }
    Ok(convergence_rates(&results))
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rate table as CSV.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut s = String::from("p,n,L1,L2,Linf,rate_L1,rate_L2,rate_Linf,flagged\n");
    for r in rows {
        let rates = match r.rates {
            Some(v) => v.map(fmt17).join(","),
            None => ",,".to_string(),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.p,
            r.n,
            fmt17(r.norms.l1),
            fmt17(r.norms.l2),
            fmt17(r.norms.linf),
            rates,
            r.flagged
        ));
    }
    s
}

pub const TIMESERIES_HEADER: &str = "t,dSdt,DT,Xi,residual";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SolverError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| SolverError::io(path, e))
}

/// Streams entropy-balance records to CSV.
pub struct TimeSeriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TimeSeriesWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut out = create(&path)?;
        writeln!(out, "{TIMESERIES_HEADER}").map_err(|e| SolverError::io(&path, e))?;
        Ok(TimeSeriesWriter { path, out })
    }

    pub fn push(&mut self, r: &EntropyBalanceRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            fmt17(r.t),
            fmt17(r.dsdt),
            fmt17(r.dt),
            fmt17(r.xi),
            fmt17(r.residual)
        )
        .map_err(|e| SolverError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| SolverError::io(&self.path, e))
    }
}

pub fn write_timeseries(path: impl AsRef<Path>, records: &[EntropyBalanceRecord]) -> Result<()> {
    let mut w = TimeSeriesWriter::create(path)?;
    for r in records {
        w.push(r)?;
    }
    w.finish()
}

/// Streams wall forces to CSV: `t` then `x,y,z` columns per tag.
pub struct ForceWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl ForceWriter {
    pub fn create(path: impl AsRef<Path>, tags: &[String]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut out = create(&path)?;
        let mut header = String::from("t");
        for t in tags {
            header.push_str(&format!(",{t}_x,{t}_y,{t}_z"));
        }
        writeln!(out, "{header}").map_err(|e| SolverError::io(&path, e))?;
        Ok(ForceWriter { path, out })
    }

    pub fn push(&mut self, t: f64, forces: &[[f64; 3]]) -> Result<()> {
        let mut line = fmt17(t);
        for f in forces {
            for c in f {
                line.push(',');
                line.push_str(&fmt17(*c));
            }
        }
        writeln!(self.out, "{line}").map_err(|e| SolverError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| SolverError::io(&self.path, e))
    }
}

const MAGIC: &[u8; 8] = b"ESBPFLD\0";
const VERSION: u32 = 1;

/// Contents of a field file: per element, node coordinates and conserved
/// variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub order: usize,
    pub coords: Vec<Vec<[f64; 3]>>,
    pub q: Vec<Vec<[f64; 5]>>,
}

impl FieldFile {
    pub fn from_mesh(mesh: &Mesh, q: &[[f64; 5]]) -> Result<Self> {
        let nn = mesh.nodes_per_element();
        if q.len() != nn * mesh.elements.len() {
            return Err(SolverError::SizeMismatch {
                expected: nn * mesh.elements.len(),
                got: q.len(),
            });
        }
        Ok(FieldFile {
            order: mesh.order(),
            coords: mesh.elements.iter().map(|e| e.coords.clone()).collect(),
            q: q.chunks(nn).map(|c| c.to_vec()).collect(),
        })
    }
}

/// Layout (little endian): magic, u32 version, u64 element count, u64 order,
/// then per element the coordinates (3 per node) followed by the conserved
/// variables (5 per node) as f64.
pub fn write_fields(path: impl AsRef<Path>, field: &FieldFile) -> Result<()> {
    let path = path.as_ref();
    let nn = (field.order + 1).pow(3);
    let mut out = create(path)?;
    let io = |e| SolverError::io(path, e);
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(field.coords.len() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&(field.order as u64).to_le_bytes()).map_err(io)?;
    for (x, q) in field.coords.iter().zip(&field.q) {
        if x.len() != nn || q.len() != nn {
            return Err(SolverError::SizeMismatch { expected: nn, got: x.len().min(q.len()) });
        }
        for v in x.iter().flatten().chain(q.iter().flatten()) {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn read_fields(path: impl AsRef<Path>) -> Result<FieldFile> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SolverError::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |reason: &str| SolverError::FieldFormat {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut read = |buf: &mut [u8]| r.read_exact(buf).map_err(|_| bad("truncated file"));
    let mut magic = [0u8; 8];
    read(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    read(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(bad("unsupported version"));
    }
    let mut b8 = [0u8; 8];
    read(&mut b8)?;
    let elements = u64::from_le_bytes(b8) as usize;
    read(&mut b8)?;
    let order = u64::from_le_bytes(b8) as usize;
    if order == 0 || order > crate::sbp::MAX_ORDER {
        return Err(bad("order out of range"));
    }
    let nn = (order + 1).pow(3);
    let mut next = || -> Result<f64> {
        read(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let mut coords = Vec::new();
    let mut q = Vec::new();
    for _ in 0..elements {
        let mut x = Vec::with_capacity(nn);
        for _ in 0..nn {
            x.push([next()?, next()?, next()?]);
        }
        let mut u = Vec::with_capacity(nn);
        for _ in 0..nn {
            u.push([next()?, next()?, next()?, next()?, next()?]);
        }
        coords.push(x);
        q.push(u);
    }
    drop(next);
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| SolverError::io(path, e))? != 0 {
        return Err(bad("trailing data"));
    }
    Ok(FieldFile { order, coords, q })
}
