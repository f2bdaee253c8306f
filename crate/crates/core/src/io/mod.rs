//! Configuration, tag files, tables, reports and plots on disk.

mod config;
mod plot;
mod tagfile;

pub use config::{load_config, AnalysisConfig, Detectors, ExperimentConfig, PairConfig, ReportPlan, TimeBinSection};
pub use plot::{write_svg_plot, Axis, Series};
pub use tagfile::{
    decode_tags, decode_tags_csv, encode_tags, encode_tags_csv, import_with, read_tags, read_tags_csv, write_tags,
    write_tags_csv, CsvImporter, NativeBinary, TagFileHeader, TagImporter, HEADER_LEN, MAGIC, RECORD_LEN, VERSION,
};

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::Histogram;
use crate::error::{Error, Result};
use crate::estimators::{PowerSweep, SweepPoint};
use crate::stream::Origin;

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut std::fs::File) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    fill(tmp.as_file_mut()).map_err(|e| Error::io(path, e))?;
    tmp.as_file_mut().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(path, |f| {
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")
    })
}

/// `<file>.origin.json`, next to a tag file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".origin.json");
    path.with_file_name(name)
}

pub fn write_origin(path: &Path, origin: &Origin) -> Result<()> {
    write_json(&sidecar_path(path), origin)
}

/// Reads the sidecar if present.
pub fn read_origin(path: &Path) -> Result<Option<Origin>> {
    let side = sidecar_path(path);
    match std::fs::read_to_string(&side) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Format(format!("{}: {e}", side.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(side, e)),
    }
}

#[derive(Serialize, Deserialize)]
struct HistogramRow {
    delay_ps: i64,
    counts: u64,
}

/// `delay_ps,counts`, one row per bin, `delay_ps` the left bin edge.
pub fn encode_histogram_csv<W: Write>(hist: &Histogram, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (j, &counts) in hist.counts.iter().enumerate() {
        out.serialize(HistogramRow {
            delay_ps: hist.bin_start(j),
            counts,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    atomic_write(path, |f| {
        encode_histogram_csv(hist, f).map_err(|e| std::io::Error::other(e.to_string()))
    })
}

/// Reads a histogram written by [`write_histogram_csv`]. Bins must be
/// contiguous and equally wide; at least two rows are needed to infer width.
pub fn read_histogram_csv(path: &Path) -> Result<Histogram> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(f));
    let rows: Vec<HistogramRow> = rdr
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if rows.len() < 2 {
        return Err(Error::Format(format!("{}: need at least two bins", path.display())));
    }
    let bw = rows[1].delay_ps - rows[0].delay_ps;
    if bw <= 0 || rows.windows(2).any(|w| w[1].delay_ps - w[0].delay_ps != bw) {
        return Err(Error::Format(format!(
            "{}: bins are not contiguous and equal",
            path.display()
        )));
    }
    let mut h = Histogram::new(bw as u64, rows[0].delay_ps, rows[0].delay_ps + bw * rows.len() as i64)?;
    for (c, r) in h.counts.iter_mut().zip(&rows) {
        *c = r.counts;
    }
    Ok(h)
}

pub fn write_sweep_csv(path: &Path, sweep: &PowerSweep) -> Result<()> {
    atomic_write(path, |f| {
        let mut out = csv::Writer::from_writer(f);
        for p in &sweep.points {
            out.serialize(p).map_err(std::io::Error::other)?;
        }
        out.flush()
    })
}

pub fn read_sweep_csv(path: &Path, dead_time_ns: f64) -> Result<PowerSweep> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(f));
    let points: Vec<SweepPoint> = rdr
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let sweep = PowerSweep { points, dead_time_ns };
    sweep.validate()?;
    Ok(sweep)
}

/// Writes any serializable rows as a headered CSV.
pub fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    atomic_write(path, |f| {
        let mut out = csv::Writer::from_writer(f);
        for r in rows {
            out.serialize(r).map_err(std::io::Error::other)?;
        }
        out.flush()
    })
}
