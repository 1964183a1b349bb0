//! On-disk artifacts: diagnostics CSV, raw field dumps with a metadata
//! sidecar, PGM snapshots and level-set masks.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};
use crate::model::EnergyBreakdown;
use crate::potential::OBSTACLE;
use crate::solver::DiagnosticsSink;

pub const CSV_HEADER: &str =
    "step,time,energy_total,energy_mass,energy_willmore,radius_est,discrepancy_sup,u_max,interface_peak_min";

/// One CSV line, with 17 significant digits per real.
pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let radius = r.radius_estimate.map(|v| format!("{v:.16e}")).unwrap_or_default();
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
        r.step,
        r.time,
        r.energy.total,
        r.energy.mass,
        r.energy.willmore,
        radius,
        r.discrepancy_sup,
        r.u_max,
        r.interface_peak_min
    )
}

pub fn write_diagnostics_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    for r in records {
        w.push(r)?;
    }
    w.flush()
}

/// Reads a diagnostics CSV. The clipped-point count is not stored and
/// comes back as 0.
pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |msg: String| Error::InvalidState(format!("{}: {msg}", path.display()));
    match lines.next() {
        Some(Ok(h)) if h == CSV_HEADER => {}
        _ => return Err(bad("missing or unexpected header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 9 {
            return Err(bad(format!("row {} has {} cells", i + 1, cells.len())));
        }
        let num = |j: usize| -> Result<f64> {
            cells[j]
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: cannot read `{}`", i + 1, cells[j])))
        };
        out.push(DiagnosticsRecord {
            step: cells[0]
                .parse()
                .map_err(|_| bad(format!("row {}: bad step", i + 1)))?,
            time: num(1)?,
            energy: EnergyBreakdown {
                total: num(2)?,
                mass: num(3)?,
                willmore: num(4)?,
            },
            radius_estimate: if cells[5].is_empty() { None } else { Some(num(5)?) },
            discrepancy_sup: num(6)?,
            u_max: num(7)?,
            interface_peak_min: num(8)?,
            clipped: 0,
        });
    }
    Ok(out)
}

/// Streams records to a CSV file in step order.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(CsvWriter {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn push(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", csv_row(r)).map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Sidecar of a raw dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub dim: usize,
    pub n: Vec<usize>,
    pub len: Vec<f64>,
    pub eps: f64,
    pub step: u64,
    pub time: f64,
}

impl FieldMeta {
    pub fn new(grid: &Grid, eps: f64, step: u64, time: f64) -> Self {
        FieldMeta {
            dim: grid.dim(),
            n: grid.n().to_vec(),
            len: grid.len().to_vec(),
            eps,
            step,
            time,
        }
    }
}

/// Path of the metadata sidecar belonging to a payload.
pub fn sidecar_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write_payload(values: impl Iterator<Item = f64>, meta: &FieldMeta, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for v in values {
        out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let text = toml::to_string(meta).map_err(|e| Error::InvalidState(e.to_string()))?;
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

/// Writes `u` as little-endian f64, row-major, plus a text sidecar.
pub fn write_field_dump(u: &RealField, meta: &FieldMeta, path: &Path) -> Result<()> {
    write_payload(u.values().iter().copied(), meta, path)
}

pub fn load_field_dump(path: &Path) -> Result<(RealField, FieldMeta)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: FieldMeta = toml::from_str(&text).map_err(|e| Error::InvalidState(format!("{}: {e}", side.display())))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let total: usize = meta.n.iter().product();
    if bytes.len() != 8 * total || meta.n.len() != meta.dim {
        return Err(Error::InvalidState(format!(
            "{}: payload of {} bytes does not match {:?}",
            path.display(),
            bytes.len(),
            meta.n
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let grid: Arc<Grid> = Grid::new(&meta.n, &meta.len)?;
    Ok((RealField::from_values(&grid, values)?, meta))
}

/// Binary PGM of a 2-d field; width is the contiguous axis.
pub fn write_snapshot_2d(u: &RealField, path: &Path) -> Result<()> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(Error::Precondition("snapshots need a 2-d field".into()));
    }
    let (h, w) = (grid.n()[0], grid.n()[1]);
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(
        u.values()
            .iter()
            .map(|&v| ((v / OBSTACLE).clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `{u ≥ level}` as 0/1 values.
pub fn level_set_mask(u: &RealField, level: f64) -> Vec<bool> {
    u.values().iter().map(|&v| v >= level).collect()
}

/// Writes the mask of `{u ≥ level}` in the raw dump format.
pub fn export_level_set_mask(u: &RealField, level: f64, meta: &FieldMeta, path: &Path) -> Result<()> {
    let mask = level_set_mask(u, level);
    write_payload(mask.into_iter().map(|b| if b { 1.0 } else { 0.0 }), meta, path)
}

/// Writes the CSV and, at snapshot steps, a raw dump, a level-set mask and
/// (in 2-d) a PGM image into one directory.
pub struct OutputSink {
    dir: PathBuf,
    csv: CsvWriter,
    eps: f64,
    mask_level: f64,
    pub records: Vec<DiagnosticsRecord>,
}

impl OutputSink {
    pub fn create(dir: &Path, eps: f64, mask_level: f64) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputSink {
            dir: dir.to_path_buf(),
            csv: CsvWriter::create(&dir.join("diagnostics.csv"))?,
            eps,
            mask_level,
            records: Vec::new(),
        })
    }

    pub fn finish(&mut self) -> Result<()> {
        self.csv.flush()
    }
}

impl DiagnosticsSink for OutputSink {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.records.push(*record);
        self.csv.push(record)
    }

    fn snapshot(&mut self, u: &RealField, step: u64, time: f64) -> Result<()> {
        let meta = FieldMeta::new(u.grid(), self.eps, step, time);
        write_field_dump(u, &meta, &self.dir.join(format!("field_{step:08}.f64")))?;
        export_level_set_mask(u, self.mask_level, &meta, &self.dir.join(format!("mask_{step:08}.f64")))?;
        if u.grid().dim() == 2 {
            write_snapshot_2d(u, &self.dir.join(format!("snapshot_{step:08}.pgm")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64, radius: Option<f64>) -> DiagnosticsRecord {
        DiagnosticsRecord {
            step,
            time: step as f64 * 1.37e-6,
            energy: EnergyBreakdown {
                mass: 0.1 / 3.0,
                willmore: 1e-17,
                total: 0.1 / 3.0 + 1e-17,
            },
            radius_estimate: radius,
            discrepancy_sup: std::f64::consts::PI * 1e-5,
            u_max: 0.25,
            interface_peak_min: 0.2499999999999999,
            clipped: 0,
        }
    }

    #[test]
    fn csv_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_diagnostics_csv(&[], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), format!("{CSV_HEADER}\n"));

        write_diagnostics_csv(&[record(0, None)], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("0,0.0000000000000000e0,"));
        assert_eq!(lines[1].split(',').nth(5), Some(""));

        let recs = vec![record(0, Some(0.3)), record(17, Some(0.1 + 0.2)), record(40, None)];
        write_diagnostics_csv(&recs, &p).unwrap();
        assert_eq!(read_diagnostics_csv(&p).unwrap(), recs);
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(&[4, 4], &[1.0, 2.0]).unwrap();
        let p = dir.path().join("z.f64");
        let meta = FieldMeta::new(&g, 0.1, 3, 0.03);
        write_field_dump(&RealField::zeros(&g), &meta, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 128);
        assert!(bytes.iter().all(|&b| b == 0));

        let g = Grid::new(&[6, 5, 4], &[1.0, 1.0, 0.5]).unwrap();
        let u = RealField::from_fn(&g, |x| (x[0] * 7.1).sin() / 3.0 + x[1] * x[2]);
        let meta = FieldMeta::new(&g, 0.2, 9, 0.5);
        write_field_dump(&u, &meta, &p).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 8 * 120);
        let (v, m) = load_field_dump(&p).unwrap();
        assert_eq!(m, meta);
        assert_eq!(v.values(), u.values());
        assert_eq!(v.grid().as_ref(), g.as_ref());
    }

    #[test]
    fn pgm_levels() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(&[4, 6], &[1.0, 1.0]).unwrap();
        let p = dir.path().join("s.pgm");
        for (value, expected) in [(0.25, 255u8), (0.0, 0), (0.125, 128), (0.3, 255), (-0.1, 0)] {
            write_snapshot_2d(&RealField::constant(&g, value), &p).unwrap();
            let bytes = fs::read(&p).unwrap();
            let header = b"P5\n6 4\n255\n";
            assert_eq!(&bytes[..header.len()], header);
            assert_eq!(bytes.len(), header.len() + 24);
            assert!(bytes[header.len()..].iter().all(|&b| b == expected));
        }
        let g3 = Grid::cube(3, 4, 1.0).unwrap();
        assert!(write_snapshot_2d(&RealField::zeros(&g3), &p).is_err());
    }

    #[test]
    fn masks() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::cube(2, 8, 1.0).unwrap();
        let p = dir.path().join("m.f64");
        let meta = FieldMeta::new(&g, 0.1, 0, 0.0);
        export_level_set_mask(&RealField::zeros(&g), 1.0 / 6.0, &meta, &p).unwrap();
        let (m, _) = load_field_dump(&p).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        assert!(level_set_mask(&RealField::constant(&g, 0.25), 0.26).iter().all(|&b| !b));
    }

    #[test]
    fn output_sink_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::cube(2, 8, 1.0).unwrap();
        let mut sink = OutputSink::create(&dir.path().join("out"), 0.1, 1.0 / 6.0).unwrap();
        sink.record(&record(0, None)).unwrap();
        sink.snapshot(&RealField::constant(&g, 0.2), 0, 0.0).unwrap();
        sink.finish().unwrap();
        let out = dir.path().join("out");
        for name in ["diagnostics.csv", "field_00000000.f64", "field_00000000.f64.meta", "mask_00000000.f64", "snapshot_00000000.pgm"] {
            assert!(out.join(name).exists(), "{name}");
        }
    }
}
