use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::{Forward, TransformError};

/// A uniform grid `lo, lo + h, …, hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self, TransformError> {
        let ok = lo.is_finite() && hi.is_finite() && n >= 1 && (if n == 1 { lo == hi } else { lo < hi });
        if !ok {
            return Err(TransformError::Grid(format!("axis [{lo}, {hi}] with {n} points")));
        }
        Ok(Axis { lo, hi, n })
    }

    /// Grid with spacing `h` starting at `lo` and covering `hi` (rounded to
    /// the nearest whole number of cells).
    pub fn with_step(lo: f64, hi: f64, h: f64) -> Result<Self, TransformError> {
        let cells = ((hi - lo) / h).round();
        if !(cells >= 1.0) {
            return Err(TransformError::Grid(format!("step {h} on [{lo}, {hi}]")));
        }
        Axis::new(lo, lo + cells * h, cells as usize + 1)
    }

    pub fn point(v: f64) -> Self {
        Axis { lo: v, hi: v, n: 1 }
    }

    pub fn step(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.hi - self.lo) / (self.n - 1) as f64
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.at(i)).collect()
    }

    /// Index of the node equal to `v` within a hundredth of a cell.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        if self.n == 1 {
            return (v == self.lo).then_some(0);
        }
        let i = ((v - self.lo) / self.step()).round();
        (i >= 0.0 && (i as usize) < self.n && (self.at(i as usize) - v).abs() <= 1e-2 * self.step()).then_some(i as usize)
    }
}

/// Sampled transform values on an (x, d) lattice, stored x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataGrid {
    pub x: Axis,
    pub d: Axis,
    pub values: Vec<f64>,
    pub scene_hash: u64,
    pub quad_tol: f64,
    /// Offset of the line along which x is measured (hyperplane scenes).
    pub line_offset: Option<f64>,
}

impl DataGrid {
    pub fn new(x: Axis, d: Axis, values: Vec<f64>) -> Result<Self, TransformError> {
        if values.len() != x.n * d.n {
            return Err(TransformError::Grid(format!("{} values for a {}x{} grid", values.len(), x.n, d.n)));
        }
        if d.lo != 0.0 {
            return Err(TransformError::Grid(format!("d axis must start at 0, starts at {}", d.lo)));
        }
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(TransformError::NonFinite {
                    x: x.at(k / d.n),
                    d: d.at(k % d.n),
                    value: *v,
                });
            }
        }
        Ok(DataGrid {
            x,
            d,
            values,
            scene_hash: 0,
            quad_tol: 0.0,
            line_offset: None,
        })
    }

    pub fn with_meta(mut self, scene_hash: u64, quad_tol: f64) -> Self {
        self.scene_hash = scene_hash;
        self.quad_tol = quad_tol;
        self
    }

    pub fn with_line_offset(mut self, c: f64) -> Self {
        self.line_offset = Some(c);
        self
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d.n + j]
    }

    /// Values R f(·, d_j) along x.
    pub fn row(&self, j: usize) -> Vec<f64> {
        (0..self.x.n).map(|i| self.get(i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii output")
    }

    fn write_to<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# scene_hash={:016x}", self.scene_hash)?;
        writeln!(w, "# quad_tol={:.16e}", self.quad_tol)?;
        if let Some(c) = self.line_offset {
            writeln!(w, "# line_offset={c:.16e}")?;
        }
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        csv.write_record(["x", "d", "value"])?;
        for i in 0..self.x.n {
            for j in 0..self.d.n {
                csv.write_record([
                    format!("{:.16e}", self.x.at(i)),
                    format!("{:.16e}", self.d.at(j)),
                    format!("{:.16e}", self.get(i, j)),
                ])?;
            }
        }
        csv.flush()
    }

    /// Write atomically (temporary file in the target directory, then rename).
    pub fn write_csv(&self, path: &Path) -> Result<(), TransformError> {
        write_atomic(path, |f| self.write_to(f))
    }

    pub fn from_csv(text: &str) -> Result<Self, TransformError> {
        let bad = |m: String| TransformError::Grid(m);
        let mut scene_hash = None;
        let mut quad_tol = None;
        let mut line_offset = None;
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let Some((k, v)) = line[1..].trim().split_once('=') else { continue };
            match k.trim() {
                "scene_hash" => scene_hash = Some(u64::from_str_radix(v.trim(), 16).map_err(|e| bad(format!("scene_hash: {e}")))?),
                "quad_tol" => quad_tol = Some(v.trim().parse::<f64>().map_err(|e| bad(format!("quad_tol: {e}")))?),
                "line_offset" => line_offset = Some(v.trim().parse::<f64>().map_err(|e| bad(format!("line_offset: {e}")))?),
                _ => {}
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 3 {
                return Err(bad(format!("row {} has {} fields", k + 1, rec.len())));
            }
            let mut r = [0.0; 3];
            for (slot, field) in r.iter_mut().zip(rec.iter()) {
                *slot = field.parse().map_err(|_| bad(format!("row {}: bad number {field:?}", k + 1)))?;
            }
            rows.push(r);
        }
        if rows.is_empty() {
            return Err(bad("no data rows".into()));
        }
        let nd = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
        if rows.len() % nd != 0 {
            return Err(bad("rows do not form a full grid".into()));
        }
        let nx = rows.len() / nd;
        let x = Axis::new(rows[0][0], rows[rows.len() - 1][0], nx)?;
        let d = Axis::new(rows[0][1], rows[nd - 1][1], nd)?;
        for (k, r) in rows.iter().enumerate() {
            let (xi, dj) = (x.at(k / nd), d.at(k % nd));
            let tol = |a: &Axis| 1e-9 * (1.0 + a.lo.abs().max(a.hi.abs()));
            if (r[0] - xi).abs() > tol(&x) || (r[1] - dj).abs() > tol(&d) {
                return Err(bad(format!("row {} at ({}, {}) is off the uniform grid", k + 1, r[0], r[1])));
            }
        }
        let mut g = DataGrid::new(x, d, rows.iter().map(|r| r[2]).collect())?;
        g.scene_hash = scene_hash.ok_or_else(|| bad("missing scene_hash header".into()))?;
        g.quad_tol = quad_tol.unwrap_or(0.0);
        g.line_offset = line_offset;
        Ok(g)
    }

    pub fn read_csv(path: &Path) -> Result<Self, TransformError> {
        let text = std::fs::read_to_string(path).map_err(|e| TransformError::Io(format!("{}: {e}", path.display())))?;
        DataGrid::from_csv(&text)
    }
}

/// Write a file through a temporary sibling and rename it into place.
pub(crate) fn write_atomic(path: &Path, body: impl FnOnce(&mut std::fs::File) -> std::io::Result<()>) -> Result<(), TransformError> {
    let io = |e: std::io::Error| TransformError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    body(tmp.as_file_mut()).map_err(io)?;
    tmp.as_file_mut().flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Evaluate `forward` on every node. Nodes are evaluated in parallel; the
/// result does not depend on scheduling.
pub fn sweep<F: Forward + ?Sized>(forward: &F, x: Axis, d: Axis) -> Result<DataGrid, TransformError> {
    if d.lo != 0.0 {
        return Err(TransformError::Grid(format!("d axis must start at 0, starts at {}", d.lo)));
    }
    let values: Vec<Result<f64, TransformError>> = (0..x.n * d.n)
        .into_par_iter()
        .map(|k| {
            let (xi, dj) = (x.at(k / d.n), d.at(k % d.n));
            let v = forward.eval(xi, dj).map_err(|e| TransformError::Node {
                x: xi,
                d: dj,
                source: Box::new(e),
            })?;
            if !v.is_finite() {
                return Err(TransformError::NonFinite { x: xi, d: dj, value: v });
            }
            Ok(v)
        })
        .collect();
    DataGrid::new(x, d, values.into_iter().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_node_grid() {
        let g = sweep(&|x: f64, d: f64| Ok(x + 2.0 * d), Axis::point(3.0), Axis::point(0.0)).unwrap();
        assert_eq!(g.values, vec![3.0]);
    }

    #[test]
    fn d_axis_must_start_at_zero() {
        let r = sweep(&|_: f64, _: f64| Ok(0.0), Axis::point(0.0), Axis::new(0.5, 1.0, 2).unwrap());
        assert!(matches!(r, Err(TransformError::Grid(_))));
    }

    #[test]
    fn node_errors_carry_coordinates() {
        let f = |x: f64, _: f64| if x > 0.5 { Err(TransformError::NegativeGlide(-1.0)) } else { Ok(1.0) };
        let r = sweep(&f, Axis::new(0.0, 1.0, 3).unwrap(), Axis::point(0.0));
        assert!(matches!(r, Err(TransformError::Node { x, .. }) if x == 1.0));
    }

    #[test]
    fn index_lookup() {
        let a = Axis::new(-1.0, 1.0, 201).unwrap();
        assert_eq!(a.index_of(0.0), Some(100));
        assert_eq!(a.index_of(0.005), None);
        assert_eq!(a.index_of(2.0), None);
    }

    proptest! {
        #[test]
        fn csv_preserves_grid(
            x0 in -10.0f64..10.0, w in 0.1f64..5.0, nx in 1usize..6,
            dh in 0.1f64..3.0, nd in 1usize..5,
            vals in proptest::collection::vec(-1e6f64..1e6, 30),
            hash: u64, off in proptest::option::of(-3.0f64..3.0),
        ) {
            let x = if nx == 1 { Axis::point(x0) } else { Axis::new(x0, x0 + w, nx).unwrap() };
            let d = if nd == 1 { Axis::point(0.0) } else { Axis::new(0.0, dh, nd).unwrap() };
            let mut g = DataGrid::new(x, d, vals[..nx * nd].to_vec()).unwrap().with_meta(hash, 1e-10);
            g.line_offset = off;
            let back = DataGrid::from_csv(&g.to_csv()).unwrap();
            prop_assert_eq!(back.values, g.values);
            prop_assert_eq!(back.scene_hash, hash);
            prop_assert_eq!(back.line_offset, off);
            prop_assert_eq!(back.x.n, nx);
            prop_assert_eq!(back.d.n, nd);
        }
    }
}
