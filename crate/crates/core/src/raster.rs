//! Raster data model shared by every imputation method.
//!
//! A [`Raster`] is a multi-band grid stored band-major, then row-major.
//! Final products hold `u8` radiometry; intermediate products (block
//! averages, calibrated images) hold `f64` values that stay inside
//! `[0, 255]` and are only quantized when written out.

use crate::error::{invalid, Error, Result};

/// Element type of a raster.
pub trait Sample: Copy + Default + PartialEq + Send + Sync + std::fmt::Debug + 'static {
    fn to_f64(self) -> f64;

    /// Whether the value is an admissible radiometric level.
    fn is_radiometric(self) -> bool;
}

impl Sample for u8 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn is_radiometric(self) -> bool {
        true
    }
}

impl Sample for f64 {
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline]
    fn is_radiometric(self) -> bool {
        self.is_finite() && (0.0..=255.0).contains(&self)
    }
}

/// Round half up and clamp into `[0, 255]`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    if !v.is_finite() {
        return if v == f64::INFINITY { 255 } else { 0 };
    }
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T = u8> {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<T>,
}

impl<T: Sample> Raster<T> {
    pub fn new(width: usize, height: usize, bands: usize) -> Result<Self> {
        check_dims(width, height, bands)?;
        Ok(Self {
            width,
            height,
            bands,
            data: vec![T::default(); width * height * bands],
        })
    }

    pub fn filled(width: usize, height: usize, bands: usize, value: T) -> Result<Self> {
        check_dims(width, height, bands)?;
        if !value.is_radiometric() {
            return Err(invalid(format!("value {value:?} outside [0, 255]")));
        }
        Ok(Self {
            width,
            height,
            bands,
            data: vec![value; width * height * bands],
        })
    }

    /// Build from band-major, row-major samples.
    pub fn from_vec(width: usize, height: usize, bands: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height, bands)?;
        if data.len() != width * height * bands {
            return Err(invalid(format!(
                "data length {} does not match {width}x{height}x{bands}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_radiometric()) {
            return Err(invalid(format!("value {v:?} outside [0, 255]")));
        }
        Ok(Self {
            width,
            height,
            bands,
            data,
        })
    }

    /// Build from one slice per band.
    pub fn from_bands(width: usize, height: usize, bands: Vec<Vec<T>>) -> Result<Self> {
        let n = bands.len();
        let data: Vec<T> = bands.into_iter().flatten().collect();
        Self::from_vec(width, height, n, data)
    }

    /// Build by evaluating `f(band, row, col)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        check_dims(width, height, bands)?;
        let mut data = Vec::with_capacity(width * height * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(b, r, c));
                }
            }
        }
        Self::from_vec(width, height, bands, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.bands
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn band(&self, b: usize) -> &[T] {
        let n = self.pixels();
        &self.data[b * n..(b + 1) * n]
    }

    #[inline]
    pub fn band_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.pixels();
        &mut self.data[b * n..(b + 1) * n]
    }

    #[inline]
    pub fn get(&self, band: usize, row: usize, col: usize) -> T {
        self.data[(band * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, band: usize, row: usize, col: usize, value: T) {
        let i = (band * self.height + row) * self.width + col;
        self.data[i] = value;
    }

    /// All bands of one pixel, as reals.
    pub fn pixel_vec(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.bands)
            .map(|b| self.get(b, row, col).to_f64())
            .collect()
    }

    pub fn same_support<U: Sample>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn to_real(&self) -> Raster<f64> {
        Raster {
            width: self.width,
            height: self.height,
            bands: self.bands,
            data: self.data.iter().map(|v| v.to_f64()).collect(),
        }
    }

    /// Quantize into final 8-bit radiometry.
    pub fn to_u8(&self) -> Raster<u8> {
        Raster {
            width: self.width,
            height: self.height,
            bands: self.bands,
            data: self.data.iter().map(|v| quantize(v.to_f64())).collect(),
        }
    }

    /// Per-band `(min, max)`.
    pub fn band_range(&self, b: usize) -> (f64, f64) {
        self.band(b)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let v = v.to_f64();
                (lo.min(v), hi.max(v))
            })
    }
}

impl Raster<f64> {
    /// Build from reals, clamping into `[0, 255]`.
    pub fn from_real_clamped(
        width: usize,
        height: usize,
        bands: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 255.0) })
            .collect();
        Self::from_vec(width, height, bands, data)
    }
}

fn check_dims(width: usize, height: usize, bands: usize) -> Result<()> {
    if width == 0 || height == 0 || bands == 0 {
        return Err(invalid(format!(
            "raster dimensions must be >= 1, got {width}x{height}x{bands}"
        )));
    }
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bands))
        .ok_or(Error::DimensionOverflow {
            width: width as u64,
            height: height as u64,
            bands: bands as u64,
        })?;
    Ok(())
}

/// Replace each low-resolution pixel by an `n_z × n_z` constant tile.
pub fn expand_lowres<T: Sample>(z: &Raster<T>, n_z: usize) -> Result<Raster<T>> {
    if n_z == 0 {
        return Err(invalid("n_z must be >= 1"));
    }
    let width = z
        .width
        .checked_mul(n_z)
        .ok_or_else(|| invalid("expanded width overflows"))?;
    let height = z
        .height
        .checked_mul(n_z)
        .ok_or_else(|| invalid("expanded height overflows"))?;
    check_dims(width, height, z.bands)?;
    let mut data = Vec::with_capacity(width * height * z.bands);
    for b in 0..z.bands {
        for r in 0..height {
            let src = &z.band(b)[(r / n_z) * z.width..(r / n_z + 1) * z.width];
            for c in 0..width {
                data.push(src[c / n_z]);
            }
        }
    }
    Ok(Raster {
        width,
        height,
        bands: z.bands,
        data,
    })
}

/// Sub-raster with top-left corner `(row, col)` and size `width × height`.
pub fn crop<T: Sample>(
    r: &Raster<T>,
    origin: (usize, usize),
    size: (usize, usize),
) -> Result<Raster<T>> {
    let (row0, col0) = origin;
    let (width, height) = size;
    if width == 0
        || height == 0
        || col0.checked_add(width).is_none_or(|e| e > r.width)
        || row0.checked_add(height).is_none_or(|e| e > r.height)
    {
        return Err(invalid(format!(
            "crop window at (row {row0}, col {col0}) of {width}x{height} exceeds {}x{}",
            r.width, r.height
        )));
    }
    let mut data = Vec::with_capacity(width * height * r.bands);
    for b in 0..r.bands {
        let band = r.band(b);
        for row in row0..row0 + height {
            data.extend_from_slice(&band[row * r.width + col0..row * r.width + col0 + width]);
        }
    }
    Ok(Raster {
        width,
        height,
        bands: r.bands,
        data,
    })
}

/// The set of missing pixels. One mask is shared by all bands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapMask {
    width: usize,
    height: usize,
    missing: Vec<bool>,
}

impl GapMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            missing: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, missing: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || missing.len() != width * height {
            return Err(invalid(format!(
                "mask of {} cells does not match {width}x{height}",
                missing.len()
            )));
        }
        Ok(Self {
            width,
            height,
            missing,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut missing = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                missing.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            missing,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.width + col]
    }

    #[inline]
    pub fn is_missing_index(&self, i: usize) -> bool {
        self.missing[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.missing
    }

    pub fn count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.missing.iter().any(|&m| m)
    }

    pub fn gap_fraction(&self) -> f64 {
        self.count() as f64 / self.missing.len() as f64
    }

    pub fn matches<T: Sample>(&self, r: &Raster<T>) -> bool {
        self.width == r.width() && self.height == r.height()
    }

    pub(crate) fn check<T: Sample>(&self, r: &Raster<T>) -> Result<()> {
        if self.matches(r) {
            Ok(())
        } else {
            Err(invalid(format!(
                "mask {}x{} does not match raster {}x{}",
                self.width,
                self.height,
                r.width(),
                r.height()
            )))
        }
    }
}

/// Tiling of a raster into `n_z × n_z` blocks.
///
/// Pixel `(row, col)` lives in block `(row / n_z, col / n_z)` at offset
/// `(row % n_z, col % n_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    n_z: usize,
    blocks_x: usize,
    blocks_y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockPos {
    pub block_row: usize,
    pub block_col: usize,
    pub d: usize,
    pub g: usize,
}

impl BlockGrid {
    /// Requires both sides to be exact multiples of `n_z`.
    pub fn new(width: usize, height: usize, n_z: usize) -> Result<Self> {
        if n_z == 0 {
            return Err(invalid("n_z must be >= 1"));
        }
        if !width.is_multiple_of(n_z) || !height.is_multiple_of(n_z) {
            return Err(invalid(format!(
                "raster {width}x{height} is not tiled exactly by {n_z}x{n_z} blocks"
            )));
        }
        Ok(Self {
            n_z,
            blocks_x: width / n_z,
            blocks_y: height / n_z,
        })
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn block_count(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    #[inline]
    pub fn locate(&self, row: usize, col: usize) -> BlockPos {
        BlockPos {
            block_row: row / self.n_z,
            block_col: col / self.n_z,
            d: row % self.n_z,
            g: col % self.n_z,
        }
    }

    #[inline]
    pub fn pixel(&self, pos: BlockPos) -> (usize, usize) {
        (
            pos.block_row * self.n_z + pos.d,
            pos.block_col * self.n_z + pos.g,
        )
    }

    /// Validity per block (row-major over blocks): true iff no pixel is masked.
    pub fn valid_blocks(&self, mask: &GapMask) -> Vec<bool> {
        let mut valid = vec![true; self.block_count()];
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if mask.is_missing(r, c) {
                    valid[(r / self.n_z) * self.blocks_x + c / self.n_z] = false;
                }
            }
        }
        valid
    }
}

/// Integer class labels; 0 marks pixels without radiometric information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    width: usize,
    height: usize,
    k: usize,
    labels: Vec<u16>,
}

impl ClassMap {
    pub fn new(width: usize, height: usize, k: usize, labels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(invalid(format!(
                "class map of {} labels does not match {width}x{height}",
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize > k) {
            return Err(invalid(format!("label {l} exceeds class count {k}")));
        }
        Ok(Self {
            width,
            height,
            k,
            labels,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of real classes.
    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize, label: u16) {
        self.labels[row * self.width + col] = label;
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn zero_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 0).count()
    }

    /// Apply `map[old] = new` to every label.
    pub fn relabel(&self, map: &[u16]) -> Result<Self> {
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                map.get(l as usize)
                    .copied()
                    .ok_or_else(|| invalid("relabel map too short"))
            })
            .collect::<Result<Vec<_>>>()?;
        let k = labels.iter().copied().max().unwrap_or(0).max(self.k as u16) as usize;
        Self::new(self.width, self.height, k, labels)
    }
}
