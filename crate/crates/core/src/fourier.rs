//! Fourier fusion: low frequencies of the expanded low-resolution image
//! combined with high frequencies of a calibrated older image.
//!
//! Filters are ideal (hard disk) masks in the centred spectrum. A bin with
//! normalized frequency `(fy, fx)` belongs to the low-pass when
//! `hypot(fy, fx) <= cutoff * r_max`, where `r_max` is the largest such norm
//! on the grid. DC always belongs to the low-pass.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::raster::{quantize, GapMask, Raster, Sample};

/// Ideal-filter radius as a fraction of the largest spectral radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec(f64);

impl CutoffSpec {
    pub fn new(c_fraction: f64) -> Result<Self> {
        if c_fraction > 0.0 && c_fraction <= 1.0 {
            Ok(Self(c_fraction))
        } else {
            Err(invalid(format!("cutoff {c_fraction} outside (0, 1]")))
        }
    }

    pub fn fraction(&self) -> f64 {
        self.0
    }

    /// Presets A1, A2 and A3.
    pub const A1: CutoffSpec = CutoffSpec(0.2);
    pub const A2: CutoffSpec = CutoffSpec(0.5);
    pub const A3: CutoffSpec = CutoffSpec(0.8);
}

/// A real-valued plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Per-band, per-column Gaussian calibration of `x_old` onto `x_d`.
///
/// Target moments come from the unmasked pixels of the matching column of
/// `x_d`; source moments from the whole column of `x_old`. Both use the
/// population standard deviation. A constant source column maps to the
/// target mean.
pub fn calibrate_columns(
    x_old: &Raster<u8>,
    x_d: &Raster<u8>,
    mask: &GapMask,
) -> Result<Raster<f64>> {
    if !x_old.same_support(x_d) {
        return Err(invalid("older and damaged images differ in support"));
    }
    if x_old.bands() != x_d.bands() {
        return Err(Error::BandMismatch {
            what: "calibration",
            expected: x_d.bands(),
            found: x_old.bands(),
        });
    }
    mask.check(x_d)?;
    let (w, h) = (x_d.width(), x_d.height());
    let mut out = vec![0.0; x_d.data().len()];
    for b in 0..x_d.bands() {
        for c in 0..w {
            let target: Vec<f64> = (0..h)
                .filter(|&r| !mask.is_missing(r, c))
                .map(|r| x_d.get(b, r, c) as f64)
                .collect();
            if target.len() < 2 {
                return Err(Error::CalibrationDegenerate { band: b, column: c });
            }
            let source: Vec<f64> = (0..h).map(|r| x_old.get(b, r, c) as f64).collect();
            let (mu_t, sd_t) = moments(&target);
            let (mu_s, sd_s) = moments(&source);
            for (r, &v) in source.iter().enumerate() {
                let cal = if sd_s > 0.0 {
                    (v - mu_s) * (sd_t / sd_s) + mu_t
                } else {
                    mu_t
                };
                out[(b * h + r) * w + c] = cal;
            }
        }
    }
    Raster::from_real_clamped(w, h, x_d.bands(), out)
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fft_2d(buf: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (
            planner.plan_fft_inverse(width),
            planner.plan_fft_inverse(height),
        )
    } else {
        (
            planner.plan_fft_forward(width),
            planner.plan_fft_forward(height),
        )
    };
    row_fft.process(buf);
    let mut col = vec![Complex::default(); height];
    for c in 0..width {
        for r in 0..height {
            col[r] = buf[r * width + c];
        }
        col_fft.process(&mut col);
        for r in 0..height {
            buf[r * width + c] = col[r];
        }
    }
}

/// Normalized signed frequency of DFT bin `k` out of `n`, in `[-0.5, 0.5]`.
#[inline]
fn freq(k: usize, n: usize) -> f64 {
    let k = if k > n / 2 {
        k as f64 - n as f64
    } else {
        k as f64
    };
    k / n as f64
}

fn max_freq(n: usize) -> f64 {
    (n / 2) as f64 / n as f64
}

/// Low-pass membership of every bin, in natural (unshifted) DFT order.
pub fn low_pass_mask(width: usize, height: usize, cutoff: CutoffSpec) -> Vec<bool> {
    let r_max = max_freq(width).hypot(max_freq(height));
    let radius = cutoff.fraction() * r_max;
    let mut mask = Vec::with_capacity(width * height);
    for ky in 0..height {
        let fy = freq(ky, height);
        for kx in 0..width {
            let fx = freq(kx, width);
            mask.push((ky == 0 && kx == 0) || fy.hypot(fx) <= radius);
        }
    }
    mask
}

/// Split one band into ideal low-pass and high-pass parts.
pub fn ideal_filters(
    band: &[f64],
    width: usize,
    height: usize,
    cutoff: CutoffSpec,
) -> Result<(Grid, Grid)> {
    if width < 2 || height < 2 {
        return Err(invalid(format!("band {width}x{height} smaller than 2x2")));
    }
    if band.len() != width * height {
        return Err(invalid("band length does not match dimensions"));
    }
    let mut spectrum: Vec<Complex<f64>> = band.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_2d(&mut spectrum, width, height, false);
    let low_mask = low_pass_mask(width, height, cutoff);
    let mut low: Vec<Complex<f64>> = spectrum
        .iter()
        .zip(&low_mask)
        .map(|(&s, &keep)| if keep { s } else { Complex::default() })
        .collect();
    let mut high: Vec<Complex<f64>> = spectrum
        .iter()
        .zip(&low_mask)
        .map(|(&s, &keep)| if keep { Complex::default() } else { s })
        .collect();
    fft_2d(&mut low, width, height, true);
    fft_2d(&mut high, width, height, true);
    let scale = 1.0 / (width * height) as f64;
    let real = |v: Vec<Complex<f64>>| Grid {
        width,
        height,
        data: v.into_iter().map(|c| c.re * scale).collect(),
    };
    Ok((real(low), real(high)))
}

/// Gap filling with `|L_C(z) + H_C(x_old_cal)|` on masked pixels, band by band.
pub fn method_a<Z: Sample, O: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z_expanded: &Raster<Z>,
    x_old_cal: &Raster<O>,
    cutoff: CutoffSpec,
) -> Result<Raster<u8>> {
    mask.check(x_d)?;
    if !x_d.same_support(z_expanded) || !x_d.same_support(x_old_cal) {
        return Err(invalid("method A inputs differ in support"));
    }
    for (what, bands) in [
        ("expanded low-resolution", z_expanded.bands()),
        ("older", x_old_cal.bands()),
    ] {
        if bands != x_d.bands() {
            return Err(Error::BandMismatch {
                what,
                expected: x_d.bands(),
                found: bands,
            });
        }
    }
    let mut out = x_d.clone();
    if mask.is_empty() {
        return Ok(out);
    }
    let (w, h) = (x_d.width(), x_d.height());
    for b in 0..x_d.bands() {
        let z: Vec<f64> = z_expanded.band(b).iter().map(|v| v.to_f64()).collect();
        let old: Vec<f64> = x_old_cal.band(b).iter().map(|v| v.to_f64()).collect();
        let (low, _) = ideal_filters(&z, w, h, cutoff)?;
        let (_, high) = ideal_filters(&old, w, h, cutoff)?;
        let band = out.band_mut(b);
        for i in 0..w * h {
            if mask.is_missing_index(i) {
                band[i] = quantize((low.data[i] + high.data[i]).abs());
            }
        }
    }
    Ok(out)
}
