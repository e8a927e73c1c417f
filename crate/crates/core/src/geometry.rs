use crate::error::{Error, Result};

/// Metric placement of a regular grid.
///
/// Row 0 is the row with the smallest world y; `origin_*` is the world
/// position of the lower-left corner of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub fn new(col: usize, row: usize) -> Self {
        CellIndex { col, row }
    }
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64, origin_x: f64, origin_y: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!("grid must be at least 1x1, got {width}x{height}")));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidGeometry(format!("resolution must be positive, got {resolution}")));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::InvalidGeometry("origin must be finite".into()));
        }
        Ok(GridGeometry { width, height, resolution, origin_x, origin_y })
    }

    /// Geometry covering the same metric extent as `self` at a new resolution.
    /// Partial cells at the far edges are kept.
    pub fn rescaled(&self, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidGeometry(format!("resolution must be positive, got {resolution}")));
        }
        let w = (self.width as f64 * self.resolution / resolution - 1e-9).ceil().max(1.0) as usize;
        let h = (self.height as f64 * self.resolution / resolution - 1e-9).ceil().max(1.0) as usize;
        GridGeometry::new(w, h, resolution, self.origin_x, self.origin_y)
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, cell: CellIndex) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> CellIndex {
        CellIndex { col: index % self.width, row: index / self.width }
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        cell.col < self.width && cell.row < self.height
    }

    /// Cell containing the world point, or `OutOfBounds`.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Result<CellIndex> {
        let fx = ((x - self.origin_x) / self.resolution).floor();
        let fy = ((y - self.origin_y) / self.resolution).floor();
        if !(fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64) {
            return Err(Error::OutOfBounds { x, y });
        }
        Ok(CellIndex { col: fx as usize, row: fy as usize })
    }

    pub fn cell_center(&self, cell: CellIndex) -> (f64, f64) {
        (
            self.origin_x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin_y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// True when both grids place identical cells; the tolerance on the
    /// floating fields absorbs text round trips of the metadata.
    pub fn same_as(&self, other: &GridGeometry) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        self.width == other.width
            && self.height == other.height
            && close(self.resolution, other.resolution)
            && close(self.origin_x, other.origin_x)
            && close(self.origin_y, other.origin_y)
    }

    pub fn ensure_same(&self, other: &GridGeometry) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}
