//! Synthetic multi-band scenes: a Voronoi mosaic of land-cover classes with
//! per-class texture, an illumination gradient and one bright spot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::raster::{quantize, Raster};

/// Approximate mosaic cell side, in pixels.
const CELL_SIZE: f64 = 42.0;
const CLASSES: usize = 5;
/// Fraction of cells whose class differs between epochs.
const CHANGE_RATE: f64 = 0.3;
/// Largest displacement of a cell site between epochs, in pixels.
const SITE_JITTER: f64 = 8.0;

/// Fixed geometry and class spectra of one scene; `render` draws one epoch.
#[derive(Debug, Clone)]
pub struct SceneModel {
    width: usize,
    height: usize,
    bands: usize,
    seed: u64,
    sites: Vec<(f64, f64)>,
    site_class: Vec<usize>,
    /// `spectra[class][band]`
    spectra: Vec<Vec<f64>>,
}

impl SceneModel {
    pub fn new(width: usize, height: usize, bands: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_sites = (((width * height) as f64 / (CELL_SIZE * CELL_SIZE)).round() as usize).max(2);
        let sites: Vec<(f64, f64)> = (0..n_sites)
            .map(|_| {
                (
                    rng.random_range(0.0..height as f64),
                    rng.random_range(0.0..width as f64),
                )
            })
            .collect();
        let site_class = (0..n_sites).map(|_| rng.random_range(0..CLASSES)).collect();
        let spectra = (0..CLASSES)
            .map(|_| (0..bands).map(|_| rng.random_range(45.0..190.0)).collect())
            .collect();
        Self {
            width,
            height,
            bands,
            seed,
            sites,
            site_class,
            spectra,
        }
    }

    /// Epoch 0 is the reference acquisition. Later epochs move cell
    /// boundaries, reassign some cells, drift the class spectra and redraw
    /// the texture.
    pub fn render(&self, epoch: u64) -> Result<Raster<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch + 1);
        let (w, h, bands) = (self.width, self.height, self.bands);

        let mut sites = self.sites.clone();
        let mut site_class = self.site_class.clone();
        let mut spectra = self.spectra.clone();
        if epoch > 0 {
            for (y, x) in sites.iter_mut() {
                *y += rng.random_range(-SITE_JITTER..SITE_JITTER);
                *x += rng.random_range(-SITE_JITTER..SITE_JITTER);
            }
            for class in site_class.iter_mut() {
                if rng.random_bool(CHANGE_RATE) {
                    *class = rng.random_range(0..CLASSES);
                }
            }
            for v in spectra.iter_mut().flatten() {
                *v += rng.random_range(-12.0..12.0);
            }
        }
        let cell_of = voronoi(&sites, w, h);

        let coarse = ValueNoise::new(w, h, 16.0, &mut rng);
        let fine = ValueNoise::new(w, h, 2.5, &mut rng);
        let band_weight: Vec<f64> = (0..bands).map(|_| rng.random_range(0.7..1.3)).collect();
        let band_own: Vec<ValueNoise> = (0..bands)
            .map(|_| ValueNoise::new(w, h, 2.5, &mut rng))
            .collect();
        let class_texture: Vec<f64> = (0..CLASSES).map(|_| rng.random_range(4.0..14.0)).collect();
        let grain = Normal::new(0.0, 3.0).expect("valid sigma");
        let tilt = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));

        let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
        let spot_sigma = w.min(h) as f64 / 14.0;
        let mut data = vec![0u8; w * h * bands];
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let class = site_class[cell_of[i] as usize];
                let amp = class_texture[class];
                let shared = coarse.at(r, c) * amp * 0.4 + fine.at(r, c) * amp;
                let gradient = 14.0
                    * (tilt.0 * (r as f64 / h as f64 - 0.5) + tilt.1 * (c as f64 / w as f64 - 0.5));
                let d2 = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2))
                    / (2.0 * spot_sigma * spot_sigma);
                let spot = 55.0 * (-d2).exp();
                for b in 0..bands {
                    let v = spectra[class][b]
                        + shared * band_weight[b]
                        + band_own[b].at(r, c) * amp * 0.4
                        + gradient
                        + spot
                        + grain.sample(&mut rng);
                    data[b * w * h + i] = quantize(v);
                }
            }
        }
        Raster::from_vec(w, h, bands, data)
    }

    pub fn sites(&self) -> usize {
        self.sites.len()
    }
}

/// Index of the nearest site for every pixel centre.
fn voronoi(sites: &[(f64, f64)], width: usize, height: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
            let nearest = sites
                .iter()
                .enumerate()
                .map(|(i, &(sy, sx))| (i, (sy - y).powi(2) + (sx - x).powi(2)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map_or(0, |(i, _)| i);
            out.push(nearest as u32);
        }
    }
    out
}

/// Smooth noise in [-1, 1]: random lattice values, smoothstep-interpolated.
struct ValueNoise {
    scale: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(width: usize, height: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let cols = (width as f64 / scale).ceil() as usize + 2;
        let rows = (height as f64 / scale).ceil() as usize + 2;
        let lattice = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Self {
            scale,
            cols,
            lattice,
        }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        let (y, x) = (r as f64 / self.scale, c as f64 / self.scale);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (ty, tx) = (smooth(y - y0 as f64), smooth(x - x0 as f64));
        let v = |yy: usize, xx: usize| self.lattice[yy * self.cols + xx];
        let top = v(y0, x0) * (1.0 - tx) + v(y0, x0 + 1) * tx;
        let bottom = v(y0 + 1, x0) * (1.0 - tx) + v(y0 + 1, x0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = SceneModel::new(60, 40, 3, 9);
        assert_eq!(a.render(0).unwrap(), a.render(0).unwrap());
        assert_ne!(a.render(0).unwrap(), a.render(1).unwrap());
        assert_ne!(
            a.render(0).unwrap(),
            SceneModel::new(60, 40, 3, 10).render(0).unwrap()
        );
        assert!(a.sites() >= 2);
    }

    #[test]
    fn scene_has_contrast() {
        let x = SceneModel::new(100, 100, 2, 1).render(0).unwrap();
        for b in 0..2 {
            let (lo, hi) = x.band_range(b);
            assert!(hi - lo > 40.0);
        }
    }
}
