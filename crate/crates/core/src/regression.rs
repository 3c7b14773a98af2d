//! Per-position regression imputation.
//!
//! For each band and within-block offset `(d, g)`, the damaged image is
//! regressed on the low-resolution value of the enclosing block across all
//! valid blocks (blocks with no missing pixel). Missing pixels are then
//! predicted from the fitted line.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::raster::{quantize, BlockGrid, BlockPos, GapMask, Raster, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetFit {
    pub alpha: f64,
    pub beta: f64,
    pub n_valid: usize,
    /// Set when the regressor had no spread; then `alpha = 0` and `beta`
    /// is the offset mean.
    pub fallback: bool,
    /// `SSE / (n_valid - 2)`, only when `n_valid > 2`.
    pub residual_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionField {
    n_z: usize,
    bands: usize,
    fits: Vec<OffsetFit>,
}

impl RegressionField {
    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn get(&self, band: usize, d: usize, g: usize) -> &OffsetFit {
        &self.fits[(band * self.n_z + d) * self.n_z + g]
    }

    /// CSV dump: `band,d,g,alpha,beta,n_valid,fallback`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "band,d,g,alpha,beta,n_valid,fallback")?;
        for b in 0..self.bands {
            for d in 0..self.n_z {
                for g in 0..self.n_z {
                    let f = self.get(b, d, g);
                    writeln!(
                        w,
                        "{b},{d},{g},{},{},{},{}",
                        f.alpha, f.beta, f.n_valid, f.fallback
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn check_inputs<Z: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z: &Raster<Z>,
    n_z: usize,
) -> Result<BlockGrid> {
    mask.check(x_d)?;
    if z.bands() != x_d.bands() {
        return Err(Error::BandMismatch {
            what: "method B needs one low-resolution band per damaged band",
            expected: x_d.bands(),
            found: z.bands(),
        });
    }
    let grid = BlockGrid::new(x_d.width(), x_d.height(), n_z)?;
    if grid.blocks_x() != z.width() || grid.blocks_y() != z.height() {
        return Err(invalid(format!(
            "low-resolution raster {}x{} does not match {}x{} blocks",
            z.width(),
            z.height(),
            grid.blocks_x(),
            grid.blocks_y()
        )));
    }
    Ok(grid)
}

/// Fit the per-offset OLS field over valid blocks.
pub fn fit_field<Z: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z: &Raster<Z>,
    n_z: usize,
) -> Result<RegressionField> {
    let grid = check_inputs(x_d, mask, z, n_z)?;
    let valid = grid.valid_blocks(mask);
    let blocks: Vec<(usize, usize)> = (0..grid.block_count())
        .filter(|&i| valid[i])
        .map(|i| (i / grid.blocks_x(), i % grid.blocks_x()))
        .collect();
    if blocks.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "{} valid blocks, at least 2 required",
            blocks.len()
        )));
    }
    let n = blocks.len() as f64;
    let mut fits = Vec::with_capacity(x_d.bands() * n_z * n_z);
    for b in 0..x_d.bands() {
        let zs: Vec<f64> = blocks
            .iter()
            .map(|&(br, bc)| z.get(b, br, bc).to_f64())
            .collect();
        let z_mean = zs.iter().sum::<f64>() / n;
        let z_const = zs.iter().all(|&v| v == zs[0]);
        let sxx: f64 = zs.iter().map(|v| (v - z_mean) * (v - z_mean)).sum();
        for d in 0..n_z {
            for g in 0..n_z {
                let xs: Vec<f64> = blocks
                    .iter()
                    .map(|&(block_row, block_col)| {
                        let (r, c) = grid.pixel(BlockPos {
                            block_row,
                            block_col,
                            d,
                            g,
                        });
                        x_d.get(b, r, c) as f64
                    })
                    .collect();
                let x_mean = xs.iter().sum::<f64>() / n;
                let fit = if z_const || sxx == 0.0 {
                    OffsetFit {
                        alpha: 0.0,
                        beta: x_mean,
                        n_valid: blocks.len(),
                        fallback: true,
                        residual_var: None,
                    }
                } else {
                    let sxy: f64 = zs
                        .iter()
                        .zip(&xs)
                        .map(|(zv, xv)| (zv - z_mean) * (xv - x_mean))
                        .sum();
                    let alpha = sxy / sxx;
                    let beta = x_mean - alpha * z_mean;
                    let residual_var = (blocks.len() > 2).then(|| {
                        let sse: f64 = zs
                            .iter()
                            .zip(&xs)
                            .map(|(zv, xv)| {
                                let e = xv - (alpha * zv + beta);
                                e * e
                            })
                            .sum();
                        sse / (n - 2.0)
                    });
                    OffsetFit {
                        alpha,
                        beta,
                        n_valid: blocks.len(),
                        fallback: false,
                        residual_var,
                    }
                };
                fits.push(fit);
            }
        }
    }
    Ok(RegressionField {
        n_z,
        bands: x_d.bands(),
        fits,
    })
}

/// Fill masked pixels with `alpha(d, g) * Z(block) + beta(d, g)`.
pub fn method_b<Z: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z: &Raster<Z>,
    n_z: usize,
) -> Result<Raster<u8>> {
    let grid = check_inputs(x_d, mask, z, n_z)?;
    if mask.is_empty() {
        return Ok(x_d.clone());
    }
    let field = fit_field(x_d, mask, z, n_z)?;
    Ok(predict(x_d, mask, z, &grid, &field))
}

/// Apply an already fitted field.
pub fn apply_field<Z: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z: &Raster<Z>,
    field: &RegressionField,
) -> Result<Raster<u8>> {
    let grid = check_inputs(x_d, mask, z, field.n_z())?;
    Ok(predict(x_d, mask, z, &grid, field))
}

fn predict<Z: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z: &Raster<Z>,
    grid: &BlockGrid,
    field: &RegressionField,
) -> Raster<u8> {
    let mut out = x_d.clone();
    for b in 0..x_d.bands() {
        for r in 0..x_d.height() {
            for c in 0..x_d.width() {
                if mask.is_missing(r, c) {
                    let pos = grid.locate(r, c);
                    let fit = field.get(b, pos.d, pos.g);
                    let zv = z.get(b, pos.block_row, pos.block_col).to_f64();
                    out.set(b, r, c, quantize(fit.alpha * zv + fit.beta));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::apply_gap;
    use crate::raster::expand_lowres;

    /// Low-res raster with spread, and x = 2 z_expanded + 3.
    fn linear_scene(n_z: usize) -> (Raster<u8>, Raster<u8>) {
        let z = Raster::from_fn(4, 4, 2, |b, r, c| (10 + b * 5 + r * 11 + c * 7) as u8).unwrap();
        let ze = expand_lowres(&z, n_z).unwrap();
        let x = Raster::from_fn(ze.width(), ze.height(), 2, |b, r, c| {
            2 * ze.get(b, r, c) + 3
        })
        .unwrap();
        (z, x)
    }

    #[test]
    fn exact_linear_relation() {
        let (z, x) = linear_scene(3);
        let mask = GapMask::from_fn(12, 12, |r, _| r == 4);
        let d = apply_gap(&x, &mask, 0).unwrap();
        let field = fit_field(&d, &mask, &z, 3).unwrap();
        for b in 0..2 {
            for dd in 0..3 {
                for g in 0..3 {
                    let f = field.get(b, dd, g);
                    assert!((f.alpha - 2.0).abs() < 1e-12 && (f.beta - 3.0).abs() < 1e-9);
                    assert_eq!(f.n_valid, 12);
                    assert!(!f.fallback);
                    assert!(f.residual_var.unwrap() < 1e-18);
                }
            }
        }
        assert_eq!(method_b(&d, &mask, &z, 3).unwrap(), x);
    }

    #[test]
    fn constant_regressor_falls_back() {
        let z = Raster::filled(3, 1, 1, 50u8).unwrap();
        let x = Raster::from_fn(6, 2, 1, |_, r, c| (r * 6 + c) as u8).unwrap();
        let field = fit_field(&x, &GapMask::empty(6, 2), &z, 2).unwrap();
        let f = field.get(0, 1, 0);
        assert!(f.fallback);
        assert_eq!(f.alpha, 0.0);
        // offset (1, 0) holds values 6, 8, 10
        assert_eq!(f.beta, 8.0);
    }

    #[test]
    fn three_point_ols() {
        // n_z = 1, blocks are pixels: (z, x) = (0, 1), (1, 3), (2, 5); a fourth masked pixel.
        let z = Raster::from_vec(4, 1, 1, vec![0u8, 1, 2, 10]).unwrap();
        let x = Raster::from_vec(4, 1, 1, vec![1u8, 3, 5, 0]).unwrap();
        let mask = GapMask::from_fn(4, 1, |_, c| c == 3);
        let f = *fit_field(&x, &mask, &z, 1).unwrap().get(0, 0, 0);
        assert!((f.alpha - 2.0).abs() < 1e-12 && (f.beta - 1.0).abs() < 1e-12);
        assert_eq!(f.residual_var, Some(0.0));
        // single masked block with z = 10: 2 * 10 + 1
        assert_eq!(method_b(&x, &mask, &z, 1).unwrap().get(0, 0, 3), 21);
    }

    #[test]
    fn errors() {
        let (z, x) = linear_scene(2);
        let all = GapMask::from_fn(8, 8, |r, c| r != 0 || c != 0);
        assert!(matches!(
            fit_field(&x, &all, &z, 2),
            Err(Error::NotEnoughData(_))
        ));
        let one_band = Raster::filled(4, 4, 1, 1u8).unwrap();
        assert!(matches!(
            method_b(&x, &GapMask::empty(8, 8), &one_band, 2),
            Err(Error::BandMismatch { .. })
        ));
        let wrong = Raster::filled(3, 4, 2, 1u8).unwrap();
        assert!(fit_field(&x, &GapMask::empty(8, 8), &wrong, 2).is_err());
    }

    #[test]
    fn empty_mask_is_noop() {
        let (z, x) = linear_scene(2);
        let noisy =
            Raster::from_fn(8, 8, 2, |b, r, c| x.get(b, r, c) ^ ((r * c) as u8 & 3)).unwrap();
        assert_eq!(
            method_b(&noisy, &GapMask::empty(8, 8), &z, 2).unwrap(),
            noisy
        );
    }

    #[test]
    fn shift_in_target_moves_intercept_only() {
        let z = Raster::from_fn(4, 3, 1, |_, r, c| (r * 17 + c * 5 + (r * c) % 3) as u8).unwrap();
        let x =
            Raster::from_fn(8, 6, 1, |_, r, c| (20 + r * 9 + c * 4 + (r * c) % 7) as u8).unwrap();
        let mask = GapMask::from_fn(8, 6, |r, c| r == 5 && c < 2);
        let base = *fit_field(&x, &mask, &z, 2).unwrap().get(0, 1, 0);
        let shifted = Raster::from_fn(8, 6, 1, |_, r, c| {
            x.get(0, r, c) + if r % 2 == 1 && c % 2 == 0 { 7 } else { 0 }
        })
        .unwrap();
        let moved = *fit_field(&shifted, &mask, &z, 2).unwrap().get(0, 1, 0);
        assert!((moved.alpha - base.alpha).abs() < 1e-12);
        assert!((moved.beta - base.beta - 7.0).abs() < 1e-9);
    }

    #[test]
    fn locality_of_imputation() {
        let z = Raster::from_fn(5, 5, 1, |_, r, c| (30 + r * 13 + c * 9) as u8).unwrap();
        let x = Raster::from_fn(10, 10, 1, |_, r, c| (r * 11 + c * 6 + (r ^ c)) as u8).unwrap();
        let mask = GapMask::from_fn(10, 10, |r, _| r == 4 || r == 5);
        let d = apply_gap(&x, &mask, 0).unwrap();
        let base = method_b(&d, &mask, &z, 2).unwrap();
        let mut z2 = z.clone();
        z2.set(0, 2, 3, 200);
        let moved = method_b(&d, &mask, &z2, 2).unwrap();
        for r in 0..10 {
            for c in 0..10 {
                if (r / 2, c / 2) != (2, 3) {
                    assert_eq!(base.get(0, r, c), moved.get(0, r, c));
                }
            }
        }
    }

    #[test]
    fn csv_dump() {
        let (z, x) = linear_scene(2);
        let field = fit_field(&x, &GapMask::empty(8, 8), &z, 2).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("band,d,g,alpha,beta,n_valid,fallback\n0,0,0,2,"));
        assert_eq!(text.lines().count(), 1 + 2 * 4);
    }
}
