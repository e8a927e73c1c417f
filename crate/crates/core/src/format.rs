//! Little-endian binary containers.
//!
//! `BFF1` (directional grids):
//!
//! ```text
//! "BFF1" | u32 width | u32 height | u32 k | f64 resolution | f64 origin_x | f64 origin_y
//! | width*height*k f32 probabilities (row-major, row 0 = min y, direction fastest)
//! | optional annotation block
//! ```
//!
//! `BFFC` (count sidecars) has the same header with magic `BFFC`, then a u64
//! skip count and `width*height*k` u64 counts.
//!
//! The annotation block is `"ANNO" | u32 byte length | UTF-8 text` holding
//! `key=value` lines (`provenance`, `bin_offset`, ...). Readers that stop after
//! the payload ignore it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binning::BinningSpec;
use crate::counts::CountGrid;
use crate::directional::{DirectionalGrid, Provenance};
use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::scalar::Probability;

pub const BFF1_MAGIC: &[u8; 4] = b"BFF1";
pub const BFFC_MAGIC: &[u8; 4] = b"BFFC";
pub const ANNOTATION_MAGIC: &[u8; 4] = b"ANNO";

pub type Annotations = BTreeMap<String, String>;

pub(crate) struct LeReader<R: Read> {
    inner: R,
    format: &'static str,
}

impl<R: Read> LeReader<R> {
    pub(crate) fn new(inner: R, format: &'static str) -> Self {
        LeReader { inner, format }
    }

    pub(crate) fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format { format: self.format, reason: reason.into() }
    }

    pub(crate) fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => self.fail(format!("truncated while reading {what}")),
            _ => Error::Stream(e),
        })?;
        Ok(buf)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.bytes::<4>("magic")?;
        if &got != expected {
            return Err(self.fail(format!("bad magic {:?}", String::from_utf8_lossy(&got))));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    pub(crate) fn f32_vec(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let mut raw = vec![0u8; n * 4];
        self.inner.read_exact(&mut raw).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => self.fail(format!("truncated while reading {what}")),
            _ => Error::Stream(e),
        })?;
        Ok(raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
    }

    /// Reads an optional trailing annotation block.
    pub(crate) fn annotations(&mut self) -> Result<Annotations> {
        let mut head = [0u8; 4];
        let mut got = 0;
        while got < 4 {
            let n = self.inner.read(&mut head[got..])?;
            if n == 0 {
                break;
            }
            got += n;
        }
        match got {
            0 => return Ok(Annotations::new()),
            4 if &head == ANNOTATION_MAGIC => {}
            _ => return Err(self.fail("unexpected trailing bytes")),
        }
        let len = self.u32("annotation length")? as usize;
        let mut text = vec![0u8; len];
        self.inner.read_exact(&mut text).map_err(|_| self.fail("truncated annotation"))?;
        let text = String::from_utf8(text).map_err(|_| self.fail("annotation is not UTF-8"))?;
        Ok(text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect())
    }
}

pub(crate) fn write_annotations(w: &mut impl Write, annotations: &Annotations) -> Result<()> {
    let text: String = annotations.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    w.write_all(ANNOTATION_MAGIC)?;
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidGeometry(format!("{what} {v} does not fit in u32")))
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], geometry: &GridGeometry, k: usize) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&to_u32(geometry.width, "width")?.to_le_bytes())?;
    w.write_all(&to_u32(geometry.height, "height")?.to_le_bytes())?;
    w.write_all(&to_u32(k, "k")?.to_le_bytes())?;
    w.write_all(&geometry.resolution.to_le_bytes())?;
    w.write_all(&geometry.origin_x.to_le_bytes())?;
    w.write_all(&geometry.origin_y.to_le_bytes())?;
    Ok(())
}

fn read_header<R: Read>(r: &mut LeReader<R>, magic: &[u8; 4]) -> Result<(GridGeometry, usize)> {
    r.magic(magic)?;
    let width = r.u32("width")? as usize;
    let height = r.u32("height")? as usize;
    let k = r.u32("k")? as usize;
    let resolution = r.f64("resolution")?;
    let origin_x = r.f64("origin_x")?;
    let origin_y = r.f64("origin_y")?;
    let geometry =
        GridGeometry::new(width, height, resolution, origin_x, origin_y).map_err(|e| r.fail(e.to_string()))?;
    if k < 2 {
        return Err(r.fail(format!("k = {k}")));
    }
    Ok((geometry, k))
}

fn binning_from(annotations: &Annotations, k: usize) -> Result<BinningSpec> {
    match annotations.get("bin_offset") {
        Some(v) => {
            let offset = v.parse::<f64>().map_err(|e| Error::Format { format: "BFF1", reason: format!("bin_offset: {e}") })?;
            BinningSpec::new(k, offset)
        }
        None => BinningSpec::centered(k),
    }
}

/// Contents of a BFF1 file before any validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDirectional {
    pub geometry: GridGeometry,
    pub binning: BinningSpec,
    pub probs: Vec<f32>,
    pub annotations: Annotations,
}

impl RawDirectional {
    pub fn provenance(&self) -> Option<Provenance> {
        self.annotations.get("provenance").and_then(|p| p.parse().ok())
    }
}

pub fn read_bff1_from(reader: impl Read) -> Result<RawDirectional> {
    let mut r = LeReader::new(reader, "BFF1");
    let (geometry, k) = read_header(&mut r, BFF1_MAGIC)?;
    let n = geometry
        .cell_count()
        .checked_mul(k)
        .ok_or_else(|| r.fail("payload size overflows"))?;
    let probs = r.f32_vec(n, "probabilities")?;
    let annotations = r.annotations()?;
    let binning = binning_from(&annotations, k)?;
    Ok(RawDirectional { geometry, binning, probs, annotations })
}

pub fn read_bff1(path: &Path) -> Result<RawDirectional> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_bff1_from(BufReader::new(file))
}

pub fn write_bff1_to<T: Probability>(grid: &DirectionalGrid<T>, extra: &Annotations, w: &mut impl Write) -> Result<()> {
    write_header(w, BFF1_MAGIC, grid.geometry(), grid.k())?;
    let mut payload = Vec::with_capacity(grid.probs().len() * 4);
    for p in grid.probs() {
        payload.extend_from_slice(&(p.to_f64_lossless() as f32).to_le_bytes());
    }
    w.write_all(&payload)?;
    let mut annotations = extra.clone();
    annotations.insert("provenance".into(), grid.provenance().to_string());
    annotations.insert("bin_offset".into(), grid.binning().offset().to_string());
    write_annotations(w, &annotations)
}

pub fn write_bff1<T: Probability>(grid: &DirectionalGrid<T>, extra: &Annotations, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_bff1_to(grid, extra, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a BFF1 file, requiring every cell to be a valid distribution.
pub fn read_directional<T: Probability>(path: &Path) -> Result<DirectionalGrid<T>> {
    let raw = read_bff1(path)?;
    let provenance = raw.provenance().unwrap_or(Provenance::Prior);
    DirectionalGrid::from_probs(
        raw.geometry,
        raw.binning,
        raw.probs.iter().map(|p| T::from_f64_lossy(*p as f64)).collect(),
        provenance,
    )
}

pub fn write_counts_to(counts: &CountGrid, w: &mut impl Write) -> Result<()> {
    write_header(w, BFFC_MAGIC, counts.geometry(), counts.k())?;
    w.write_all(&counts.skipped().to_le_bytes())?;
    let mut payload = Vec::with_capacity(counts.counts().len() * 8);
    for c in counts.counts() {
        payload.extend_from_slice(&c.to_le_bytes());
    }
    w.write_all(&payload)?;
    let mut annotations = Annotations::new();
    annotations.insert("bin_offset".into(), counts.binning().offset().to_string());
    write_annotations(w, &annotations)
}

pub fn write_counts(counts: &CountGrid, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_counts_to(counts, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_counts_from(reader: impl Read) -> Result<CountGrid> {
    let mut r = LeReader::new(reader, "BFFC");
    let (geometry, k) = read_header(&mut r, BFFC_MAGIC)?;
    let skipped = r.u64("skip count")?;
    let n = geometry.cell_count() * k;
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        counts.push(r.u64("counts")?);
    }
    let annotations = r.annotations()?;
    CountGrid::from_counts(geometry, binning_from(&annotations, k)?, counts, skipped)
}

pub fn read_counts(path: &Path) -> Result<CountGrid> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_counts_from(BufReader::new(file))
}
