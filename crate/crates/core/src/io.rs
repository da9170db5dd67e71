//! Plain-file formats: CSV and raw little-endian grids with JSON sidecars,
//! 16-bit PGM previews, and array data.
//!
//! Every writer is deterministic: identical inputs give identical bytes.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionGeometry, ArrayData};
use crate::error::{Error, Result};
use crate::geometry::{Grid2, Point2};
use crate::imaging::{ImageGrid, Provenance};
use crate::C64;

/// Write `value` as pretty JSON with a trailing newline, creating parent
/// directories.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p)?;
        }
    }
    Ok(())
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn check_shape(grid: &Grid2, shape: (usize, usize)) -> Result<()> {
    if grid.shape() != shape {
        return Err(Error::Shape(format!("values are {shape:?}, grid is {:?}", grid.shape())));
    }
    Ok(())
}

/// Row-major CSV, one grid row (fixed `y`) per line, preceded by
/// `# origin_x=…,origin_y=…,spacing=…,nx=…,ny=…`.
pub fn write_grid_csv(path: &Path, grid: &Grid2, values: &Array2<f64>) -> Result<()> {
    check_shape(grid, values.dim())?;
    ensure_parent(path)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "# origin_x={},origin_y={},spacing={},nx={},ny={}",
        grid.origin.x, grid.origin.y, grid.spacing, grid.nx, grid.ny
    )?;
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<(Grid2, Array2<f64>)> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty grid CSV".into()))??;
    let header = header
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("grid CSV must start with a `# ` header".into()))?;
    let mut fields = std::collections::HashMap::new();
    for kv in header.split(',') {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Format(format!("bad header field `{kv}`")))?;
        fields.insert(k.trim(), v.trim().to_string());
    }
    let get = |k: &str| -> Result<&String> {
        fields.get(k).ok_or_else(|| Error::Format(format!("header lacks `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse::<f64>().map_err(|e| Error::Format(format!("{k}: {e}")))
    };
    let int = |k: &str| -> Result<usize> {
        get(k)?.parse::<usize>().map_err(|e| Error::Format(format!("{k}: {e}")))
    };
    let grid = Grid2::new(Point2::new(num("origin_x")?, num("origin_y")?), num("spacing")?, int("nx")?, int("ny")?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut data = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for v in line.split(',') {
            data.push(v.trim().parse::<f64>().map_err(|e| Error::Format(format!("value `{v}`: {e}")))?);
        }
    }
    let values = Array2::from_shape_vec(grid.shape(), data)
        .map_err(|_| Error::Format("value count does not match the header".into()))?;
    Ok((grid, values))
}

/// Sidecar describing a raw grid file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGridMeta {
    pub grid: Grid2,
    /// `f64le`, or `c64le` for interleaved real and imaginary parts.
    pub dtype: String,
    /// `[ny, nx]`, row-major.
    pub shape: [usize; 2],
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

fn f64_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(f64::to_le_bytes).collect()
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// Write `stem.bin` (little-endian f64, row-major) and `stem.json`.
pub fn write_grid_raw(stem: &Path, grid: &Grid2, values: &Array2<f64>, meta: serde_json::Value) -> Result<()> {
    check_shape(grid, values.dim())?;
    ensure_parent(stem)?;
    fs::write(with_extension(stem, "bin"), f64_bytes(values.iter().copied()))?;
    let m = RawGridMeta { grid: *grid, dtype: "f64le".into(), shape: [grid.ny, grid.nx], meta };
    write_json(&with_extension(stem, "json"), &m)
}

pub fn read_grid_raw(stem: &Path) -> Result<(RawGridMeta, Array2<f64>)> {
    let m: RawGridMeta = read_json(&with_extension(stem, "json"))?;
    if m.dtype != "f64le" {
        return Err(Error::Format(format!("expected f64le, found {}", m.dtype)));
    }
    let v = read_f64s(&with_extension(stem, "bin"))?;
    let a = Array2::from_shape_vec((m.shape[0], m.shape[1]), v)
        .map_err(|_| Error::Format("raw grid size does not match its sidecar".into()))?;
    Ok((m, a))
}

fn write_complex(path: &Path, values: &Array2<C64>) -> Result<()> {
    fs::write(path, f64_bytes(values.iter().flat_map(|z| [z.re, z.im])))?;
    Ok(())
}

fn read_complex(path: &Path, shape: (usize, usize)) -> Result<Array2<C64>> {
    let v = read_f64s(path)?;
    if v.len() != 2 * shape.0 * shape.1 {
        return Err(Error::Format(format!("{} does not hold a {shape:?} complex matrix", path.display())));
    }
    let z: Vec<C64> = v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
    Array2::from_shape_vec(shape, z).map_err(|e| Error::Format(e.to_string()))
}

/// 16-bit binary PGM of `values` scaled linearly from its minimum (black)
/// to its maximum (white). The top image row is the largest `y`. A constant
/// field is written as all zeros.
pub fn write_pgm(path: &Path, values: &Array2<f64>) -> Result<()> {
    let (ny, nx) = values.dim();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("PGM preview needs finite values"));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = hi - lo;
    ensure_parent(path)?;
    let mut out = format!("P5\n{nx} {ny}\n65535\n").into_bytes();
    out.reserve(2 * nx * ny);
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let level = if span > 0.0 { ((values[[iy, ix]] - lo) / span * 65535.0).round() as u16 } else { 0 };
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Header of a PGM file: `(width, height, maxval)`.
pub fn read_pgm_header(path: &Path) -> Result<(usize, usize, u32)> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes[..bytes.len().min(64)]).into_owned();
    let mut it = text.split_ascii_whitespace();
    if it.next() != Some("P5") {
        return Err(Error::Format("not a binary PGM".into()));
    }
    let mut next = || -> Result<u64> {
        it.next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("truncated PGM header".into()))
    };
    Ok((next()? as usize, next()? as usize, next()? as u32))
}

/// Sidecar of an [`ArrayData`] file set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayDataMeta {
    pub geometry: AcquisitionGeometry,
    pub seed: Option<u64>,
    /// `[sensors, directions]`.
    pub shape: [usize; 2],
    pub dtype: String,
    pub d1: String,
    pub d2: String,
}

/// Write `stem.json`, `stem_d1.bin` and `stem_d2.bin` (interleaved
/// little-endian complex, row-major sensors × directions).
pub fn write_array_data(stem: &Path, data: &ArrayData) -> Result<()> {
    data.validate()?;
    ensure_parent(stem)?;
    let name = stem
        .file_name()
        .ok_or_else(|| Error::invalid("array data path needs a file name"))?
        .to_string_lossy()
        .into_owned();
    let meta = ArrayDataMeta {
        geometry: data.geometry.clone(),
        seed: data.seed,
        shape: [data.geometry.n_sensors(), data.geometry.n_angles()],
        dtype: "c64le".into(),
        d1: format!("{name}_d1.bin"),
        d2: format!("{name}_d2.bin"),
    };
    let dir = stem.parent().unwrap_or(Path::new(""));
    write_complex(&dir.join(&meta.d1), &data.d1)?;
    write_complex(&dir.join(&meta.d2), &data.d2)?;
    write_json(&with_extension(stem, "json"), &meta)
}

pub fn read_array_data(stem: &Path) -> Result<ArrayData> {
    let json = if stem.extension().is_some_and(|e| e == "json") { stem.to_path_buf() } else { with_extension(stem, "json") };
    let meta: ArrayDataMeta = read_json(&json)?;
    if meta.dtype != "c64le" {
        return Err(Error::Format(format!("expected c64le, found {}", meta.dtype)));
    }
    let dir = json.parent().unwrap_or(Path::new(""));
    let shape = (meta.shape[0], meta.shape[1]);
    let d1 = read_complex(&dir.join(&meta.d1), shape)?;
    let d2 = read_complex(&dir.join(&meta.d2), shape)?;
    ArrayData::new(d1, d2, meta.geometry, meta.seed).map_err(|e| Error::Format(e.to_string()))
}

/// Write an image as `stem.csv` (raw values), `stem.pgm` (normalized
/// preview) and `stem.json` (grid and provenance).
pub fn write_image(stem: &Path, image: &ImageGrid) -> Result<()> {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        grid: &'a Grid2,
        harmonic: u8,
        max_value: f64,
        provenance: &'a Provenance,
    }
    write_grid_csv(&with_extension(stem, "csv"), &image.search.grid, &image.values)?;
    write_pgm(&with_extension(stem, "pgm"), &image.values)?;
    write_json(
        &with_extension(stem, "json"),
        &Sidecar {
            grid: &image.search.grid,
            harmonic: image.search.harmonic.order(),
            max_value: image.max_value(),
            provenance: &image.provenance,
        },
    )
}
