//! Simulated study inputs: strip gaps, low-resolution companions and a
//! synthetic older acquisition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::raster::{quantize, GapMask, Raster, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Horizontal,
    Vertical,
}

impl std::str::FromStr for Orientation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "h" => Ok(Self::Horizontal),
            "vertical" | "v" => Ok(Self::Vertical),
            _ => Err(invalid(format!("unknown orientation `{s}`"))),
        }
    }
}

/// Periodic strip gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSpec {
    /// Maximum width of one strip, in pixels.
    pub strip_width: usize,
    /// Distance between consecutive strip starts.
    pub period: usize,
    pub orientation: Orientation,
    pub target_fraction: f64,
}

impl Default for GapSpec {
    fn default() -> Self {
        Self {
            strip_width: 14,
            period: 54,
            orientation: Orientation::Horizontal,
            target_fraction: 0.26,
        }
    }
}

impl GapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strip_width == 0 {
            return Err(invalid("strip_width must be >= 1"));
        }
        if self.period <= self.strip_width {
            return Err(invalid(format!(
                "period {} must exceed strip_width {}",
                self.period, self.strip_width
            )));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 0.5) {
            return Err(invalid(format!(
                "target_fraction {} outside (0, 0.5]",
                self.target_fraction
            )));
        }
        Ok(())
    }
}

const FRACTION_TOLERANCE: f64 = 0.02;

/// Periodic strips whose width is the narrowest that reaches the target
/// fraction, capped at `strip_width`. The strip phase is the one whose
/// realized fraction is closest to the target, ties going to the most
/// centred phase.
pub fn make_gap_mask(spec: &GapSpec, width: usize, height: usize) -> Result<GapMask> {
    spec.validate()?;
    let extent = match spec.orientation {
        Orientation::Horizontal => height,
        Orientation::Vertical => width,
    };
    if width == 0 || height == 0 || extent < spec.period {
        return Err(invalid(format!(
            "image {width}x{height} smaller than strip period {}",
            spec.period
        )));
    }
    let ideal = (spec.target_fraction * spec.period as f64).round() as usize;
    let strip = ideal.clamp(1, spec.strip_width);
    let centred = (spec.period - strip) / 2;
    let target = spec.target_fraction * extent as f64;
    let phase = (0..=spec.period - strip)
        .min_by(|&a, &b| {
            let ea = (strip_lines(extent, strip, spec.period, a) as f64 - target).abs();
            let eb = (strip_lines(extent, strip, spec.period, b) as f64 - target).abs();
            ea.total_cmp(&eb)
                .then(a.abs_diff(centred).cmp(&b.abs_diff(centred)))
                .then(a.cmp(&b))
        })
        .expect("period exceeds strip width");

    let mask = strip_mask(width, height, spec.orientation, strip, spec.period, phase);
    let realized = mask.gap_fraction();
    if (realized - spec.target_fraction).abs() > FRACTION_TOLERANCE + 1e-12 {
        return Err(invalid(format!(
            "target fraction {} unreachable with strip_width {} and period {} (realized {realized:.4})",
            spec.target_fraction, spec.strip_width, spec.period
        )));
    }
    Ok(mask)
}

#[inline]
fn in_strip(i: usize, strip: usize, period: usize, phase: usize) -> bool {
    i >= phase && (i - phase) % period < strip
}

fn strip_lines(extent: usize, strip: usize, period: usize, phase: usize) -> usize {
    (0..extent)
        .filter(|&i| in_strip(i, strip, period, phase))
        .count()
}

/// Strips of `strip` lines every `period` lines, the first starting at `phase`.
pub fn strip_mask(
    width: usize,
    height: usize,
    orientation: Orientation,
    strip: usize,
    period: usize,
    phase: usize,
) -> GapMask {
    GapMask::from_fn(width, height, |r, c| match orientation {
        Orientation::Horizontal => in_strip(r, strip, period, phase),
        Orientation::Vertical => in_strip(c, strip, period, phase),
    })
}

/// Resolution reduction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RrmKind {
    /// Block average.
    BlockAverage,
    /// Bilinear sample at block centres.
    SmoothResample,
    /// Block average of the image translated by `(rows, cols)`.
    ShiftedAverage { rows: usize, cols: usize },
}

impl RrmKind {
    /// Index used in result tables: 0, 1 or 2.
    pub fn id(&self) -> u8 {
        match self {
            Self::BlockAverage => 0,
            Self::SmoothResample => 1,
            Self::ShiftedAverage { .. } => 2,
        }
    }

    pub fn reduce<T: Sample>(&self, x: &Raster<T>, n_z: usize) -> Result<Raster<f64>> {
        match *self {
            Self::BlockAverage => rrm0_block_average(x, n_z),
            Self::SmoothResample => rrm1_smooth_resample(x, n_z),
            Self::ShiftedAverage { rows, cols } => rrm2_shifted_average(x, n_z, (rows, cols)),
        }
    }
}

fn check_tiling<T: Sample>(x: &Raster<T>, n_z: usize) -> Result<(usize, usize)> {
    if n_z == 0 {
        return Err(invalid("n_z must be >= 1"));
    }
    if !x.width().is_multiple_of(n_z) || !x.height().is_multiple_of(n_z) {
        return Err(invalid(format!(
            "raster {}x{} sides are not multiples of n_z = {n_z}",
            x.width(),
            x.height()
        )));
    }
    Ok((x.width() / n_z, x.height() / n_z))
}

pub fn rrm0_block_average<T: Sample>(x: &Raster<T>, n_z: usize) -> Result<Raster<f64>> {
    block_average_with(x, n_z, |r, c| (r, c))
}

fn block_average_with<T: Sample>(
    x: &Raster<T>,
    n_z: usize,
    source: impl Fn(usize, usize) -> (usize, usize),
) -> Result<Raster<f64>> {
    let (w, h) = check_tiling(x, n_z)?;
    let area = (n_z * n_z) as f64;
    let mut data = Vec::with_capacity(w * h * x.bands());
    for b in 0..x.bands() {
        for br in 0..h {
            for bc in 0..w {
                let mut sum = 0.0;
                for r in br * n_z..(br + 1) * n_z {
                    for c in bc * n_z..(bc + 1) * n_z {
                        let (sr, sc) = source(r, c);
                        sum += x.get(b, sr, sc).to_f64();
                    }
                }
                data.push(sum / area);
            }
        }
    }
    Raster::from_real_clamped(w, h, x.bands(), data)
}

/// Bilinear interpolation of `x` at the centre of every block.
pub fn rrm1_smooth_resample<T: Sample>(x: &Raster<T>, n_z: usize) -> Result<Raster<f64>> {
    let (w, h) = check_tiling(x, n_z)?;
    let half = (n_z as f64 - 1.0) / 2.0;
    let mut data = Vec::with_capacity(w * h * x.bands());
    for b in 0..x.bands() {
        for br in 0..h {
            let y = (br * n_z) as f64 + half;
            let (r0, fy) = (y.floor() as usize, y.fract());
            let r1 = (r0 + 1).min(x.height() - 1);
            for bc in 0..w {
                let xc = (bc * n_z) as f64 + half;
                let (c0, fx) = (xc.floor() as usize, xc.fract());
                let c1 = (c0 + 1).min(x.width() - 1);
                let top = lerp(x.get(b, r0, c0).to_f64(), x.get(b, r0, c1).to_f64(), fx);
                let bottom = lerp(x.get(b, r1, c0).to_f64(), x.get(b, r1, c1).to_f64(), fx);
                data.push(lerp(top, bottom, fy));
            }
        }
    }
    Raster::from_real_clamped(w, h, x.bands(), data)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// Block average of `x` translated by `shift = (rows, cols)`, replicating
/// the last row/column for samples that fall past the border.
pub fn rrm2_shifted_average<T: Sample>(
    x: &Raster<T>,
    n_z: usize,
    shift: (usize, usize),
) -> Result<Raster<f64>> {
    let (dr, dc) = shift;
    if n_z > 0 && (dr >= n_z || dc >= n_z) {
        return Err(invalid(format!("shift {shift:?} outside [0, {n_z})^2")));
    }
    let (last_r, last_c) = (x.height() - 1, x.width() - 1);
    block_average_with(x, n_z, |r, c| ((r + dr).min(last_r), (c + dc).min(last_c)))
}

/// Parameters of the synthetic older acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlderSpec {
    pub gain: f64,
    pub bias: f64,
    /// Standard deviation of additive Gaussian noise, in gray levels.
    pub noise_sigma: f64,
    /// Fraction of the image area covered by re-shaded patches.
    pub patch_rate: f64,
}

impl Default for OlderSpec {
    fn default() -> Self {
        Self {
            gain: 1.0,
            bias: 0.0,
            noise_sigma: 4.0,
            patch_rate: 0.0,
        }
    }
}

/// `clamp(gain * x + bias + noise)` with 1 to 3 rectangular patches covering
/// about `patch_rate` of the image re-shaded by a random per-band affine map.
pub fn synth_older(x: &Raster<u8>, seed: u64, spec: &OlderSpec) -> Result<Raster<u8>> {
    if !(spec.gain > 0.0) {
        return Err(invalid(format!("gain {} must be > 0", spec.gain)));
    }
    if !(0.0..=0.5).contains(&spec.patch_rate) {
        return Err(invalid(format!(
            "patch_rate {} outside [0, 0.5]",
            spec.patch_rate
        )));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(invalid("noise_sigma must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| invalid(e.to_string()))?;
    let (w, h, bands) = (x.width(), x.height(), x.bands());

    let mut values: Vec<f64> = x
        .data()
        .iter()
        .map(|&v| {
            let n = if spec.noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            spec.gain * v as f64 + spec.bias + n
        })
        .collect();

    if spec.patch_rate > 0.0 {
        let patches = rng.random_range(1..=3usize);
        let area = spec.patch_rate * (w * h) as f64 / patches as f64;
        for _ in 0..patches {
            let aspect: f64 = rng.random_range(0.5..2.0);
            let pw = ((area * aspect).sqrt().round() as usize).clamp(1, w);
            let ph = ((area / pw as f64).round() as usize).clamp(1, h);
            let c0 = rng.random_range(0..=w - pw);
            let r0 = rng.random_range(0..=h - ph);
            for b in 0..bands {
                let scale: f64 = rng.random_range(0.6..1.4);
                let offset: f64 = rng.random_range(-40.0..40.0);
                for r in r0..r0 + ph {
                    for c in c0..c0 + pw {
                        let i = (b * h + r) * w + c;
                        values[i] = scale * values[i] + offset;
                    }
                }
            }
        }
    }
    Raster::from_vec(w, h, bands, values.into_iter().map(quantize).collect())
}

/// Overwrite masked pixels in every band with `fill`.
pub fn apply_gap(x: &Raster<u8>, mask: &GapMask, fill: u8) -> Result<Raster<u8>> {
    mask.check(x)?;
    let mut out = x.clone();
    let n = x.pixels();
    for b in 0..x.bands() {
        let band = out.band_mut(b);
        for i in 0..n {
            if mask.is_missing_index(i) {
                band[i] = fill;
            }
        }
    }
    Ok(out)
}
