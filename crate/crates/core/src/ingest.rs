//! Trajectory ingestion: the canonical CSV layout, a configurable adapter for
//! ATC-style tracker dumps, heading derivation and chunking.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::binning::wrap_angle;
use crate::error::{Error, Result};

pub const CANONICAL_HEADER: [&str; 5] = ["person_id", "t", "x", "y", "delta"];

/// Minimum displacement (m) between consecutive poses for a derived heading.
pub const DEFAULT_MIN_STEP: f64 = 0.05;

/// One pedestrian position sample with its motion heading.
///
/// `delta` is wrapped to `[0, 2pi)`; `None` means the source had no heading
/// and one must be derived before the sample can be counted or scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub person_id: i64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub delta: Option<f64>,
}

impl Observation {
    pub fn new(person_id: i64, t: f64, x: f64, y: f64, delta: f64) -> Self {
        Observation { person_id, t, x, y, delta: Some(wrap_angle(delta)) }
    }
}

/// Observations in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    pub observations: Vec<Observation>,
    pub source: String,
    /// Rows dropped by a lenient parse.
    pub rejected_rows: usize,
}

impl ObservationSet {
    pub fn new(source: impl Into<String>, observations: Vec<Observation>) -> Self {
        ObservationSet { observations, source: source.into(), rejected_rows: 0 }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    pub fn missing_headings(&self) -> usize {
        self.observations.iter().filter(|o| o.delta.is_none()).count()
    }

    /// First `n` observations (the whole set when `n` exceeds its length).
    pub fn prefix(&self, n: usize) -> &[Observation] {
        &self.observations[..n.min(self.len())]
    }

    pub fn extend(&mut self, other: ObservationSet) {
        self.rejected_rows += other.rejected_rows;
        self.observations.extend(other.observations);
    }
}

impl<'a> IntoIterator for &'a ObservationSet {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Malformed rows abort the parse.
    Strict,
    /// Malformed rows are logged, counted and skipped.
    #[default]
    Lenient,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::MalformedRow { line, reason: format!("missing column {idx} ({name})") })?
        .trim();
    raw.parse::<T>().map_err(|e| Error::MalformedRow { line, reason: format!("{name} `{raw}`: {e}") })
}

fn finite(v: f64, name: &str, line: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::MalformedRow { line, reason: format!("{name} is not finite") })
    }
}

fn handle_row(
    mode: ParseMode,
    parsed: Result<Observation>,
    out: &mut ObservationSet,
) -> Result<()> {
    match parsed {
        Ok(obs) => out.observations.push(obs),
        Err(e) if mode == ParseMode::Lenient => {
            log::warn!("{}: skipping row: {e}", out.source);
            out.rejected_rows += 1;
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn parse_canonical_row(record: &csv::StringRecord, line: u64) -> Result<Observation> {
    if record.len() != CANONICAL_HEADER.len() {
        return Err(Error::MalformedRow { line, reason: format!("expected 5 fields, found {}", record.len()) });
    }
    let person_id = field::<i64>(record, 0, "person_id", line)?;
    let t = finite(field(record, 1, "t", line)?, "t", line)?;
    let x = finite(field(record, 2, "x", line)?, "x", line)?;
    let y = finite(field(record, 3, "y", line)?, "y", line)?;
    let delta = match record.get(4).map(str::trim) {
        None | Some("") => None,
        Some(_) => Some(wrap_angle(finite(field(record, 4, "delta", line)?, "delta", line)?)),
    };
    Ok(Observation { person_id, t, x, y, delta })
}

/// Reads the canonical `person_id,t,x,y,delta` CSV from any reader.
pub fn read_canonical(reader: impl Read, source: &str, mode: ParseMode) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != CANONICAL_HEADER {
        return Err(Error::MalformedRow { line: 1, reason: format!("expected header {CANONICAL_HEADER:?}, found {names:?}") });
    }
    let mut out = ObservationSet::new(source, Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        handle_row(mode, parse_canonical_row(&record, line), &mut out)?;
    }
    Ok(out)
}

pub fn parse_canonical(path: &Path, mode: ParseMode) -> Result<ObservationSet> {
    read_canonical(open(path)?, &path.display().to_string(), mode)
}

pub fn write_canonical_to(set: &ObservationSet, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CANONICAL_HEADER)?;
    for o in set {
        let delta = o.delta.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([o.person_id.to_string(), o.t.to_string(), o.x.to_string(), o.y.to_string(), delta])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_canonical(set: &ObservationSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_canonical_to(set, std::io::BufWriter::new(file))
}

/// Column layout of a delimiter-separated tracker dump.
///
/// The defaults follow the public ATC release: `time, person_id, x, y, z,
/// velocity, motion_angle, facing_angle` with positions in millimetres.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub delimiter: char,
    pub has_header: bool,
    pub time_column: usize,
    pub person_column: usize,
    pub x_column: usize,
    pub y_column: usize,
    /// Heading column in radians; `None` when the source has no headings.
    pub angle_column: Option<usize>,
    /// Multiplier from source units to metres.
    pub scale: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            delimiter: ',',
            has_header: false,
            time_column: 0,
            person_column: 1,
            x_column: 2,
            y_column: 3,
            angle_column: Some(6),
            scale: 0.001,
        }
    }
}

impl AdapterConfig {
    /// Parses a TOML config; omitted keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AdapterConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Config(format!("scale must be positive, got {}", self.scale)));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config("delimiter must be a single ASCII character".into()));
        }
        Ok(())
    }
}

fn parse_adapter_row(record: &csv::StringRecord, line: u64, cfg: &AdapterConfig) -> Result<Observation> {
    let t = finite(field(record, cfg.time_column, "time", line)?, "time", line)?;
    let person_id = match field::<i64>(record, cfg.person_column, "person_id", line) {
        Ok(id) => id,
        // some dumps write ids as floats
        Err(_) => {
            let f: f64 = field(record, cfg.person_column, "person_id", line)?;
            if f.fract() != 0.0 || !f.is_finite() {
                return Err(Error::MalformedRow { line, reason: format!("person_id {f} is not an integer") });
            }
            f as i64
        }
    };
    let x = finite(field::<f64>(record, cfg.x_column, "x", line)?, "x", line)? * cfg.scale;
    let y = finite(field::<f64>(record, cfg.y_column, "y", line)?, "y", line)? * cfg.scale;
    let delta = match cfg.angle_column {
        Some(c) => Some(wrap_angle(finite(field(record, c, "motion_angle", line)?, "motion_angle", line)?)),
        None => None,
    };
    Ok(Observation { person_id, t, x, y, delta })
}

pub fn read_atc(reader: impl Read, source: &str, cfg: &AdapterConfig, mode: ParseMode) -> Result<ObservationSet> {
    cfg.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(cfg.has_header)
        .delimiter(cfg.delimiter as u8)
        .flexible(true)
        .from_reader(reader);
    let mut out = ObservationSet::new(source, Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        handle_row(mode, parse_adapter_row(&record, line, cfg), &mut out)?;
    }
    Ok(out)
}

pub fn parse_atc(path: &Path, cfg: &AdapterConfig, mode: ParseMode) -> Result<ObservationSet> {
    read_atc(open(path)?, &path.display().to_string(), cfg, mode)
}

/// Replaces headings with the direction of travel to each person's next pose.
///
/// Consecutive same-person pairs (in source order) closer than `min_step` and
/// each person's final pose are dropped. Output keeps source order.
pub fn derive_headings(set: &ObservationSet, min_step: f64) -> ObservationSet {
    let mut next_of: Vec<Option<usize>> = vec![None; set.len()];
    let mut last_seen: HashMap<i64, usize> = HashMap::new();
    for (i, o) in set.iter().enumerate() {
        if let Some(prev) = last_seen.insert(o.person_id, i) {
            next_of[prev] = Some(i);
        }
    }
    let observations = set
        .iter()
        .zip(&next_of)
        .filter_map(|(o, next)| {
            let n = &set.observations[(*next)?];
            let (dx, dy) = (n.x - o.x, n.y - o.y);
            if dx.hypot(dy) < min_step {
                return None;
            }
            Some(Observation { delta: Some(wrap_angle(dy.atan2(dx))), ..*o })
        })
        .collect();
    ObservationSet { observations, source: set.source.clone(), rejected_rows: set.rejected_rows }
}

/// Consecutive slices of `size` observations; the last may be short.
pub fn chunk(set: &ObservationSet, size: usize) -> Result<Vec<&[Observation]>> {
    if size == 0 {
        return Err(Error::InvalidParameter("chunk size must be at least 1".into()));
    }
    Ok(set.observations.chunks(size).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn canonical(body: &str, mode: ParseMode) -> Result<ObservationSet> {
        read_canonical(format!("person_id,t,x,y,delta\n{body}").as_bytes(), "test", mode)
    }

    #[test]
    fn canonical_rows() {
        let s = canonical("7,0.0,1.0,2.0,1.5708\n7,0.1,1.0,2.0,\n", ParseMode::Strict).unwrap();
        assert_eq!(s.observations[0], Observation { person_id: 7, t: 0.0, x: 1.0, y: 2.0, delta: Some(1.5708) });
        assert_eq!(s.observations[1].delta, None);
        assert_eq!(s.missing_headings(), 1);
    }

    #[test]
    fn short_row_lenient_vs_strict() {
        let body = "1,0.0,1.0,2.0,0.5\n2,0.0,1.0\n3,0.0,1.0,2.0,0.5\n";
        let s = canonical(body, ParseMode::Lenient).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.rejected_rows, 1);
        match canonical(body, ParseMode::Strict) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed row, got {other:?}"),
        }
        assert!(canonical("x,0.0,1.0,2.0,0.5\n", ParseMode::Strict).is_err());
        assert!(canonical("1,0.0,inf,2.0,0.5\n", ParseMode::Strict).is_err());
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(read_canonical("id,t,x,y,delta\n".as_bytes(), "t", ParseMode::Lenient).is_err());
    }

    #[test]
    fn canonical_wraps_headings() {
        let s = canonical("1,0,0,0,-1.5707963267948966\n", ParseMode::Strict).unwrap();
        assert!((s.observations[0].delta.unwrap() - 3.0 * FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn atc_default_layout() {
        let cfg = AdapterConfig::default();
        let s = read_atc("1351728000.0,123,1000,2000,1200,500,1.57,1.60\n".as_bytes(), "atc", &cfg, ParseMode::Strict)
            .unwrap();
        let o = s.observations[0];
        assert_eq!(o.person_id, 123);
        assert!((o.x - 1.0).abs() < 1e-12 && (o.y - 2.0).abs() < 1e-12);
        assert_eq!(o.delta, Some(1.57));
        assert_eq!(o.t, 1351728000.0);

        let s = read_atc(format!("0,1,0,0,0,0,{},0\n", -FRAC_PI_2).as_bytes(), "atc", &cfg, ParseMode::Strict).unwrap();
        assert!((s.observations[0].delta.unwrap() - 3.0 * FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn atc_ignores_unused_columns() {
        let cfg = AdapterConfig::default();
        let a = read_atc("5.0,9,1500,-250,1200,500,0.3,1.60\n".as_bytes(), "a", &cfg, ParseMode::Strict).unwrap();
        let b = read_atc("5.0,9,1500,-250,-7,99999,0.3,-2.0\n".as_bytes(), "b", &cfg, ParseMode::Strict).unwrap();
        assert_eq!(a.observations, b.observations);
    }

    #[test]
    fn adapter_config_from_toml() {
        let cfg = AdapterConfig::from_toml("delimiter = ';'\nscale = 1.0\nangle_column = 4\n").unwrap();
        assert_eq!(cfg.delimiter, ';');
        assert_eq!(cfg.angle_column, Some(4));
        assert_eq!(cfg.x_column, 2);
        assert!(AdapterConfig::from_toml("scale = 0.0\n").is_err());
        assert!(AdapterConfig::from_toml("bogus = 1\n").is_err());
        let s = read_atc("1;2;3;4;0.5\n".as_bytes(), "x", &cfg, ParseMode::Strict).unwrap();
        assert_eq!(s.observations[0].x, 3.0);
        assert_eq!(s.observations[0].delta, Some(0.5));
    }

    fn track(points: &[(i64, f64, f64)]) -> ObservationSet {
        ObservationSet::new(
            "t",
            points.iter().enumerate().map(|(i, &(id, x, y))| Observation { person_id: id, t: i as f64, x, y, delta: None }).collect(),
        )
    }

    #[test]
    fn derived_headings() {
        let s = derive_headings(&track(&[(1, 0.0, 0.0), (1, 1.0, 0.0)]), DEFAULT_MIN_STEP);
        assert_eq!(s.len(), 1);
        assert_eq!(s.observations[0].delta, Some(0.0));

        let s = derive_headings(&track(&[(1, 0.0, 0.0), (1, 0.0, 1.0)]), DEFAULT_MIN_STEP);
        assert_eq!(s.observations[0].delta, Some(FRAC_PI_2));

        let s = derive_headings(&track(&[(1, 0.0, 0.0), (1, 0.01, 0.0)]), DEFAULT_MIN_STEP);
        assert!(s.is_empty());
    }

    #[test]
    fn derived_headings_interleaved_people() {
        let s = derive_headings(
            &track(&[(1, 0.0, 0.0), (2, 5.0, 5.0), (1, 1.0, 0.0), (2, 5.0, 4.0), (1, 1.0, 1.0)]),
            DEFAULT_MIN_STEP,
        );
        let deltas: Vec<(i64, f64)> = s.iter().map(|o| (o.person_id, o.delta.unwrap())).collect();
        assert_eq!(deltas, vec![(1, 0.0), (2, 3.0 * FRAC_PI_2), (1, FRAC_PI_2)]);
    }

    #[test]
    fn reversed_segment_differs_by_pi() {
        let fwd = derive_headings(&track(&[(1, 0.3, 0.1), (1, 2.0, 1.4)]), 0.05);
        let back = derive_headings(&track(&[(1, 2.0, 1.4), (1, 0.3, 0.1)]), 0.05);
        let d = wrap_angle(back.observations[0].delta.unwrap() - fwd.observations[0].delta.unwrap());
        assert!((d - PI).abs() < 1e-12);
    }

    #[test]
    fn chunking() {
        let set = ObservationSet::new(
            "c",
            (0..5000).map(|i| Observation::new(0, i as f64, 0.0, 0.0, 0.0)).collect(),
        );
        let chunks = chunk(&set, 2000).unwrap();
        assert_eq!(chunks.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![2000, 2000, 1000]);
        assert_eq!(set.prefix(2000), chunks[0]);
        assert_eq!(chunks.concat(), set.observations);
        assert!(chunk(&ObservationSet::default(), 2000).unwrap().is_empty());
        assert!(chunk(&set, 0).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let set = ObservationSet::new(
            "r",
            vec![
                Observation::new(3, 0.123456789, -1.5e-3, 2.0 / 3.0, 6.2),
                Observation { person_id: -4, t: 1e9, x: 0.1, y: 0.2, delta: None },
            ],
        );
        let mut buf = Vec::new();
        write_canonical_to(&set, &mut buf).unwrap();
        let back = read_canonical(buf.as_slice(), "r", ParseMode::Strict).unwrap();
        assert_eq!(back.observations, set.observations);
    }
}
