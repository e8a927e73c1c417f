//! Occupancy grids: loading from map-server style image + sidecar pairs,
//! world/cell transforms and resolution-rescaled window extraction.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::{Error, Result};
use crate::geometry::{CellIndex, GridGeometry};
use crate::scalar::Probability;

/// Side length of the square occupancy windows, in cells.
pub const WINDOW_SIZE: usize = 64;

/// Value assigned to window samples that fall outside the source map.
pub const DEFAULT_PADDING: f64 = 0.5;

/// Static occupancy probabilities on a metric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid<T: Probability> {
    geometry: GridGeometry,
    values: Vec<T>,
}

impl<T: Probability> OccupancyGrid<T> {
    pub fn from_values(geometry: GridGeometry, values: Vec<T>) -> Result<Self> {
        if values.len() != geometry.cell_count() {
            return Err(Error::InvalidGeometry(format!(
                "expected {} occupancy values, got {}",
                geometry.cell_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::InvalidParameter(format!("occupancy value {} at cell {i} outside [0, 1]", values[i])));
        }
        Ok(OccupancyGrid { geometry, values })
    }

    pub fn filled(geometry: GridGeometry, value: T) -> Result<Self> {
        Self::from_values(geometry, vec![value; geometry.cell_count()])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, cell: CellIndex) -> T {
        self.values[self.geometry.index(cell)]
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> Result<CellIndex> {
        self.geometry.world_to_cell(x, y)
    }

    pub fn is_free(&self, cell: CellIndex) -> bool {
        self.get(cell).to_f64_lossless() < 0.5
    }

    /// Bilinear sample between cell centers at a world point.
    ///
    /// Points outside the map extent return `padding`; points inside the
    /// extent but beyond the outermost cell centers replicate the edge cells.
    pub fn sample_bilinear(&self, x: f64, y: f64, padding: f64) -> f64 {
        let g = &self.geometry;
        let gx = (x - g.origin_x) / g.resolution;
        let gy = (y - g.origin_y) / g.resolution;
        if !(gx >= 0.0 && gy >= 0.0 && gx < g.width as f64 && gy < g.height as f64) {
            return padding;
        }
        let u = (gx - 0.5).clamp(0.0, (g.width - 1) as f64);
        let v = (gy - 0.5).clamp(0.0, (g.height - 1) as f64);
        let c0 = u.floor() as usize;
        let r0 = v.floor() as usize;
        let c1 = (c0 + 1).min(g.width - 1);
        let r1 = (r0 + 1).min(g.height - 1);
        let fu = u - c0 as f64;
        let fv = v - r0 as f64;
        let at = |c: usize, r: usize| self.values[r * g.width + c].to_f64_lossless();
        let bottom = at(c0, r0) * (1.0 - fu) + at(c1, r0) * fu;
        let top = at(c0, r1) * (1.0 - fu) + at(c1, r1) * fu;
        bottom * (1.0 - fv) + top * fv
    }

    /// Resample onto another geometry by bilinear sampling at target cell centers.
    pub fn resample_to(&self, target: &GridGeometry) -> OccupancyGrid<T> {
        if target.same_as(&self.geometry) {
            return self.clone();
        }
        let values = (0..target.cell_count())
            .map(|i| {
                let (x, y) = target.cell_center(target.cell_at(i));
                T::from_f64_lossy(self.sample_bilinear(x, y, 1.0))
            })
            .collect();
        OccupancyGrid { geometry: *target, values }
    }

    /// 64x64 window centered on a world point, resampled to `window_resolution`.
    pub fn extract_window(&self, center_x: f64, center_y: f64, window_resolution: f64) -> Result<Window<T>> {
        self.extract_window_padded(center_x, center_y, window_resolution, DEFAULT_PADDING)
    }

    /// Window centered on the center of a cell of `self`.
    pub fn extract_window_at(&self, cell: CellIndex, window_resolution: f64) -> Result<Window<T>> {
        let (x, y) = self.geometry.cell_center(cell);
        self.extract_window(x, y, window_resolution)
    }

    /// Sample `(row, col)` of the window sits at
    /// `center + ((col - 32) * res, (row - 32) * res)`, so sample (32, 32) is
    /// the reference point itself.
    pub fn extract_window_padded(
        &self,
        center_x: f64,
        center_y: f64,
        window_resolution: f64,
        padding: f64,
    ) -> Result<Window<T>> {
        if !(window_resolution > 0.0) || !window_resolution.is_finite() {
            return Err(Error::InvalidParameter(format!("window resolution must be positive, got {window_resolution}")));
        }
        if !(0.0..=1.0).contains(&padding) {
            return Err(Error::InvalidParameter(format!("padding {padding} outside [0, 1]")));
        }
        let half = (WINDOW_SIZE / 2) as f64;
        let mut values = Vec::with_capacity(WINDOW_SIZE * WINDOW_SIZE);
        for row in 0..WINDOW_SIZE {
            let y = center_y + (row as f64 - half) * window_resolution;
            for col in 0..WINDOW_SIZE {
                let x = center_x + (col as f64 - half) * window_resolution;
                values.push(T::from_f64_lossy(self.sample_bilinear(x, y, padding)));
            }
        }
        Ok(Window { resolution: window_resolution, center_world: (center_x, center_y), values })
    }
}

/// Occupancy patch around a reference point; row 0 is the minimum-y row.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T: Probability> {
    pub resolution: f64,
    pub center_world: (f64, f64),
    pub values: Vec<T>,
}

impl<T: Probability> Window<T> {
    pub fn size(&self) -> usize {
        WINDOW_SIZE
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * WINDOW_SIZE + col]
    }
}

/// Sidecar describing how an occupancy image maps to the world.
#[derive(Debug, Clone, PartialEq)]
pub struct MapMetadata {
    pub image: Option<PathBuf>,
    pub resolution: f64,
    pub origin: (f64, f64),
    pub negate: bool,
}

impl MapMetadata {
    /// Parses `key: value` lines. Unknown keys (thresholds, mode, ...) are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut image = None;
        let mut resolution = None;
        let mut origin = None;
        let mut negate = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                return Err(Error::Metadata(format!("line {}: expected `key: value`", lineno + 1)));
            };
            let value = value.trim();
            match key.trim() {
                "image" => image = Some(PathBuf::from(value.trim_matches(|c| c == '"' || c == '\''))),
                "resolution" => {
                    resolution = Some(
                        value.parse::<f64>().map_err(|e| Error::Metadata(format!("resolution `{value}`: {e}")))?,
                    )
                }
                "origin" => {
                    let inner = value.trim_start_matches('[').trim_end_matches(']');
                    let parts = inner
                        .split(',')
                        .map(|p| p.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::Metadata(format!("origin `{value}`: {e}")))?;
                    if parts.len() < 2 {
                        return Err(Error::Metadata(format!("origin `{value}` needs at least x and y")));
                    }
                    origin = Some((parts[0], parts[1]));
                }
                "negate" => {
                    negate = match value {
                        "0" | "false" => false,
                        "1" | "true" => true,
                        other => return Err(Error::Metadata(format!("negate must be 0 or 1, got `{other}`"))),
                    }
                }
                _ => {}
            }
        }
        let resolution = resolution.ok_or_else(|| Error::Metadata("missing `resolution`".into()))?;
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::Metadata(format!("resolution must be positive, got {resolution}")));
        }
        let origin = origin.ok_or_else(|| Error::Metadata("missing `origin`".into()))?;
        Ok(MapMetadata { image, resolution, origin, negate })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(image) = &self.image {
            out.push_str(&format!("image: {}\n", image.display()));
        }
        out.push_str(&format!(
            "resolution: {}\norigin: [{}, {}, 0.0]\nnegate: {}\n",
            self.resolution,
            self.origin.0,
            self.origin.1,
            u8::from(self.negate)
        ));
        out
    }
}

/// Loads an 8-bit grayscale PGM/PNG. Occupancy is `(255 - p) / 255`, or
/// `p / 255` when `negate` is set. Image rows are flipped so row 0 is min y.
pub fn load_occupancy<T: Probability>(image_path: &Path, metadata: &MapMetadata) -> Result<OccupancyGrid<T>> {
    let bytes = fs::read(image_path).map_err(|e| Error::io(image_path, e))?;
    let img = image::load_from_memory(&bytes)?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => return Err(Error::NotGrayscale(format!("{:?}", other.color()))),
    };
    occupancy_from_gray(&gray, metadata)
}

/// Loads a map given either its sidecar (`.yaml`, `.yml`, `.txt`) with an
/// `image:` entry, or the image itself with a sidecar of the same stem.
pub fn load_map<T: Probability>(path: &Path) -> Result<OccupancyGrid<T>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if matches!(ext.as_str(), "yaml" | "yml" | "txt") {
        let meta = MapMetadata::load(path)?;
        let image = meta
            .image
            .clone()
            .ok_or_else(|| Error::Metadata(format!("{} has no `image` entry", path.display())))?;
        let image = if image.is_absolute() { image } else { path.parent().unwrap_or(Path::new(".")).join(image) };
        load_occupancy(&image, &meta)
    } else {
        let sidecar = ["yaml", "yml", "txt"]
            .iter()
            .map(|e| path.with_extension(e))
            .find(|p| p.exists())
            .ok_or_else(|| Error::Metadata(format!("no metadata sidecar next to {}", path.display())))?;
        load_occupancy(path, &MapMetadata::load(&sidecar)?)
    }
}

fn occupancy_from_gray<T: Probability>(gray: &GrayImage, metadata: &MapMetadata) -> Result<OccupancyGrid<T>> {
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let geometry = GridGeometry::new(w, h, metadata.resolution, metadata.origin.0, metadata.origin.1)?;
    let mut values = Vec::with_capacity(w * h);
    for row in 0..h {
        let img_row = (h - 1 - row) as u32;
        for col in 0..w {
            let p = gray.get_pixel(col as u32, img_row).0[0] as f64;
            let occ = if metadata.negate { p / 255.0 } else { (255.0 - p) / 255.0 };
            values.push(T::from_f64_lossy(occ));
        }
    }
    OccupancyGrid::from_values(geometry, values)
}

/// Writes the grid as an 8-bit image (format from the extension, PGM or PNG)
/// using the `negate = 0` convention.
pub fn write_occupancy<T: Probability>(grid: &OccupancyGrid<T>, image_path: &Path) -> Result<()> {
    let g = grid.geometry();
    let mut img = GrayImage::new(g.width as u32, g.height as u32);
    for row in 0..g.height {
        for col in 0..g.width {
            let occ = grid.get(CellIndex::new(col, row)).to_f64_lossless();
            let p = (255.0 * (1.0 - occ)).round().clamp(0.0, 255.0) as u8;
            img.put_pixel(col as u32, (g.height - 1 - row) as u32, image::Luma([p]));
        }
    }
    let format = ImageFormat::from_path(image_path).unwrap_or(ImageFormat::Pnm);
    img.save_with_format(image_path, format)?;
    Ok(())
}

/// Writes image plus `<stem>.yaml` sidecar; returns the sidecar path.
pub fn write_map<T: Probability>(grid: &OccupancyGrid<T>, image_path: &Path) -> Result<PathBuf> {
    write_occupancy(grid, image_path)?;
    let g = grid.geometry();
    let meta = MapMetadata {
        image: image_path.file_name().map(PathBuf::from),
        resolution: g.resolution,
        origin: (g.origin_x, g.origin_y),
        negate: false,
    };
    let sidecar = image_path.with_extension("yaml");
    fs::write(&sidecar, meta.to_text()).map_err(|e| Error::io(&sidecar, e))?;
    Ok(sidecar)
}
