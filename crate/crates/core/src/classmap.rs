//! Class-map imputation.
//!
//! The damaged image is segmented with K-means (gap pixels get label 0),
//! optionally cleaned up with forward/backward mode filters, then every
//! zero pixel receives the class whose local mean in the low-resolution
//! image is closest to its own low-resolution value. Radiometry is finally
//! drawn at random from the convex hull of nearby same-class pixels.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::raster::{quantize, ClassMap, GapMask, Raster, Sample};

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub k: usize,
    /// `k` centroids of `bands` coordinates each; centroid `i` is label `i + 1`.
    pub centroids: Vec<Vec<f64>>,
    pub assignments: ClassMap,
    pub iterations_run: usize,
    pub seed: u64,
}

impl KMeansModel {
    /// Nearest centroid label (1-based), ties to the lowest label.
    pub fn nearest(&self, v: &[f64]) -> u16 {
        nearest(&self.centroids, v) as u16 + 1
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; strict comparison keeps the lowest on ties.
#[inline]
fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(c, v);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// K-means over unmasked pixels with k-means++ seeding.
///
/// Centroids are sorted lexicographically after convergence so labels are
/// stable across runs that converge to the same partition.
pub fn kmeans_segment<T: Sample>(
    x: &Raster<T>,
    mask: &GapMask,
    k: usize,
    seed: u64,
) -> Result<KMeansModel> {
    mask.check(x)?;
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    if k > u16::MAX as usize {
        return Err(invalid(format!("k = {k} too large")));
    }
    let bands = x.bands();
    let idx: Vec<usize> = (0..x.pixels())
        .filter(|&i| !mask.is_missing_index(i))
        .collect();
    if idx.is_empty() {
        return Err(Error::NotEnoughData("every pixel is masked".into()));
    }
    let points: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| (0..bands).map(|b| x.band(b)[i].to_f64()).collect())
        .collect();
    let distinct: HashSet<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|v| v.to_bits()).collect())
        .collect();
    if distinct.len() < k {
        return Err(Error::NotEnoughData(format!(
            "{} distinct pixel vectors for k = {k}",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(&points, k, &mut rng)?;
    let mut assign = vec![usize::MAX; points.len()];
    let mut iterations_run = 0;
    loop {
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(&points) {
            let n = nearest(&centroids, p);
            if *a != n {
                *a = n;
                changed = true;
            }
        }
        if !changed || iterations_run == MAX_ITERATIONS {
            break;
        }
        iterations_run += 1;
        update_centroids(&points, &mut assign, &mut centroids);
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        centroids[a]
            .iter()
            .zip(&centroids[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rank = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let centroids: Vec<Vec<f64>> = order.iter().map(|&i| centroids[i].clone()).collect();

    let mut labels = vec![0u16; x.pixels()];
    for (&i, &a) in idx.iter().zip(&assign) {
        labels[i] = rank[a] as u16 + 1;
    }
    Ok(KMeansModel {
        k,
        centroids,
        assignments: ClassMap::new(x.width(), x.height(), k, labels)?,
        iterations_run,
        seed,
    })
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let dist = WeightedIndex::new(&d2).map_err(|e| Error::NotEnoughData(e.to_string()))?;
        let next = points[dist.sample(rng)].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &next));
        }
        centroids.push(next);
    }
    Ok(centroids)
}

fn update_centroids(points: &[Vec<f64>], assign: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let bands = centroids[0].len();
    let mut sums = vec![vec![0.0; bands]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign.iter()) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            for (c, s) in centroids[j].iter_mut().zip(&sums[j]) {
                *c = s / counts[j] as f64;
            }
        }
    }
    // Re-seed empty clusters at the point farthest from its own centroid.
    for j in 0..k {
        if counts[j] == 0 {
            let far = (0..points.len())
                .max_by(|&a, &b| {
                    dist2(&points[a], &centroids[assign[a]])
                        .total_cmp(&dist2(&points[b], &centroids[assign[b]]))
                        .then(b.cmp(&a))
                })
                .expect("points are nonempty");
            counts[assign[far]] -= 1;
            assign[far] = j;
            counts[j] = 1;
            centroids[j] = points[far].clone();
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];
/// Causal half-neighborhood: W, NW, N, NE.
const FORWARD: [(isize, isize); 4] = [(0, -1), (-1, -1), (-1, 0), (-1, 1)];
/// Anti-causal half-neighborhood: E, SE, S, SW.
const BACKWARD: [(isize, isize); 4] = [(0, 1), (1, 1), (1, 0), (1, -1)];

#[inline]
fn offset(
    row: usize,
    col: usize,
    (dr, dc): (isize, isize),
    h: usize,
    w: usize,
) -> Option<(usize, usize)> {
    let r = row.checked_add_signed(dr)?;
    let c = col.checked_add_signed(dc)?;
    (r < h && c < w).then_some((r, c))
}

/// Mode of the nonzero labels in a half-neighborhood; ties to the lowest label.
fn half_mode(map: &ClassMap, row: usize, col: usize, half: &[(isize, isize)]) -> Option<u16> {
    let mut counts: Vec<(u16, usize)> = Vec::with_capacity(4);
    for &o in half {
        if let Some((r, c)) = offset(row, col, o, map.height(), map.width()) {
            let l = map.get(r, c);
            if l == 0 {
                continue;
            }
            match counts.iter_mut().find(|(x, _)| *x == l) {
                Some(e) => e.1 += 1,
                None => counts.push((l, 1)),
            }
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
}

/// Pixels touched by the enhancement, as row-major indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnhancementSets {
    /// No 8-neighbor shares the pixel's label.
    pub n_g: Vec<usize>,
    /// Forward and backward mode filters disagreed.
    pub n_m: Vec<usize>,
}

/// Coherence enhancement of a class map.
///
/// Lonely pixels (no same-label 8-neighbor) are relabeled when the mode of
/// the causal half-neighborhood agrees with the mode of the anti-causal
/// half. When they disagree, nonzero pixels take the class whose mean
/// radiometry over the 8-neighborhood is closest to their own value.
/// Half-neighborhoods with no nonzero label give no opinion and leave the
/// pixel untouched. Every decision reads the input map.
pub fn enhance<T: Sample>(c_d: &ClassMap, x: &Raster<T>, mask: &GapMask) -> Result<ClassMap> {
    Ok(enhance_with_sets(c_d, x, mask)?.0)
}

pub fn enhance_with_sets<T: Sample>(
    c_d: &ClassMap,
    x: &Raster<T>,
    mask: &GapMask,
) -> Result<(ClassMap, EnhancementSets)> {
    mask.check(x)?;
    if c_d.width() != x.width() || c_d.height() != x.height() {
        return Err(invalid("class map and raster differ in support"));
    }
    let (w, h) = (c_d.width(), c_d.height());
    let mut sets = EnhancementSets::default();
    for r in 0..h {
        for c in 0..w {
            let l = c_d.get(r, c);
            let lonely = !NEIGHBORS
                .iter()
                .any(|&o| offset(r, c, o, h, w).is_some_and(|(nr, nc)| c_d.get(nr, nc) == l));
            if lonely {
                sets.n_g.push(r * w + c);
            }
        }
    }

    let mut out = c_d.clone();
    for &i in &sets.n_g {
        let (r, c) = (i / w, i % w);
        let (Some(fwd), Some(bwd)) = (
            half_mode(c_d, r, c, &FORWARD),
            half_mode(c_d, r, c, &BACKWARD),
        ) else {
            continue;
        };
        if fwd == bwd {
            out.set(r, c, fwd);
        } else {
            sets.n_m.push(i);
        }
    }

    let stage3 = out.clone();
    for &i in &sets.n_m {
        let (r, c) = (i / w, i % w);
        if stage3.get(r, c) == 0 || mask.is_missing(r, c) {
            continue;
        }
        let mut classes: Vec<(u16, Vec<f64>, usize)> = Vec::new();
        for &o in &NEIGHBORS {
            let Some((nr, nc)) = offset(r, c, o, h, w) else {
                continue;
            };
            let l = stage3.get(nr, nc);
            if l == 0 || mask.is_missing(nr, nc) {
                continue;
            }
            let v = x.pixel_vec(nr, nc);
            match classes.iter_mut().find(|e| e.0 == l) {
                Some(e) => {
                    e.1.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
                    e.2 += 1;
                }
                None => classes.push((l, v, 1)),
            }
        }
        let own = x.pixel_vec(r, c);
        let best = classes
            .into_iter()
            .map(|(l, sum, n)| {
                let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
                (l, dist2(&mean, &own))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((l, _)) = best {
            out.set(r, c, l);
        }
    }
    Ok((out, sets))
}

/// Assign a real class to every zero pixel.
///
/// `N_t` is the smallest square (Chebyshev) neighborhood holding a nonzero
/// label. Within it, `Z̄_k` is the mean low-resolution vector over class-`k`
/// pixels, and the pixel takes the class minimizing `‖Z(pixel) − Z̄_k‖`.
/// Labels are read from the input map only.
pub fn impute_zero_class<T: Sample>(c: &ClassMap, z_expanded: &Raster<T>) -> Result<ClassMap> {
    if c.width() != z_expanded.width() || c.height() != z_expanded.height() {
        return Err(invalid(
            "class map and expanded low-resolution raster differ in support",
        ));
    }
    if c.zero_count() == c.labels().len() {
        return Err(Error::NotEnoughData(
            "class map has no nonzero label".into(),
        ));
    }
    let (w, h) = (c.width(), c.height());
    let bands = z_expanded.bands();
    let mut out = c.clone();
    let mut acc: Vec<(u16, Vec<f64>, usize)> = Vec::new();
    for r in 0..h {
        for col in 0..w {
            if c.get(r, col) != 0 {
                continue;
            }
            let max_t = r.max(h - 1 - r).max(col).max(w - 1 - col);
            for t in 1..=max_t {
                acc.clear();
                let (r0, r1) = (r.saturating_sub(t), (r + t).min(h - 1));
                let (c0, c1) = (col.saturating_sub(t), (col + t).min(w - 1));
                for nr in r0..=r1 {
                    for nc in c0..=c1 {
                        let l = c.get(nr, nc);
                        if l == 0 {
                            continue;
                        }
                        let idx = match acc.iter().position(|e| e.0 == l) {
                            Some(i) => i,
                            None => {
                                acc.push((l, vec![0.0; bands], 0));
                                acc.len() - 1
                            }
                        };
                        let e = &mut acc[idx];
                        for b in 0..bands {
                            e.1[b] += z_expanded.get(b, nr, nc).to_f64();
                        }
                        e.2 += 1;
                    }
                }
                if acc.is_empty() {
                    continue;
                }
                let own = z_expanded.pixel_vec(r, col);
                let label = acc
                    .iter()
                    .map(|(l, sum, n)| {
                        let d: f64 = sum
                            .iter()
                            .zip(&own)
                            .map(|(s, o)| {
                                let e = s / *n as f64 - o;
                                e * e
                            })
                            .sum();
                        (*l, d)
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .map(|(l, _)| l)
                    .expect("nonempty");
                out.set(r, col, label);
                break;
            }
        }
    }
    Ok(out)
}

/// Per-pixel generator derived from `(seed, pixel index)`.
fn pixel_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Fill masked pixels with a uniform-Dirichlet convex combination of the
/// unmasked same-class pixels within `window` (Chebyshev radius), growing
/// the window until a donor exists. Classes without any donor fall back to
/// `centroids[label - 1]` when provided.
pub fn sample_radiometric(
    c_filled: &ClassMap,
    x_d: &Raster<u8>,
    mask: &GapMask,
    window: usize,
    seed: u64,
    centroids: Option<&[Vec<f64>]>,
) -> Result<Raster<u8>> {
    mask.check(x_d)?;
    if c_filled.width() != x_d.width() || c_filled.height() != x_d.height() {
        return Err(invalid("class map and damaged image differ in support"));
    }
    if window == 0 {
        return Err(invalid("window must be >= 1"));
    }
    if c_filled.zero_count() > 0 {
        return Err(invalid("class map still holds zero labels"));
    }
    let (w, h, bands) = (x_d.width(), x_d.height(), x_d.bands());
    let mut has_donor = vec![false; c_filled.k() + 1];
    for i in 0..w * h {
        if !mask.is_missing_index(i) {
            has_donor[c_filled.labels()[i] as usize] = true;
        }
    }
    let mut out = x_d.clone();
    let mut warned = vec![false; c_filled.k() + 1];
    let mut donors: Vec<usize> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !mask.is_missing_index(i) {
                continue;
            }
            let label = c_filled.get(r, c);
            if !has_donor[label as usize] {
                let centroid = centroids
                    .and_then(|cs| cs.get(label as usize - 1))
                    .ok_or_else(|| Error::NotEnoughData(format!("class {label} has no donors")))?;
                if !warned[label as usize] {
                    log::warn!("class {label} has no unmasked donors; using its centroid");
                    warned[label as usize] = true;
                }
                for b in 0..bands {
                    out.set(b, r, c, quantize(centroid[b]));
                }
                continue;
            }
            let max_t = r.max(h - 1 - r).max(c).max(w - 1 - c);
            let mut t = window;
            loop {
                donors.clear();
                let (r0, r1) = (r.saturating_sub(t), (r + t).min(h - 1));
                let (c0, c1) = (c.saturating_sub(t), (c + t).min(w - 1));
                for nr in r0..=r1 {
                    for nc in c0..=c1 {
                        let j = nr * w + nc;
                        if !mask.is_missing_index(j) && c_filled.labels()[j] == label {
                            donors.push(j);
                        }
                    }
                }
                if !donors.is_empty() || t >= max_t {
                    break;
                }
                t += 1;
            }
            let mut rng = pixel_rng(seed, i);
            let weights: Vec<f64> = donors.iter().map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = weights.iter().sum();
            for b in 0..bands {
                let band = x_d.band(b);
                let v: f64 = donors
                    .iter()
                    .zip(&weights)
                    .map(|(&j, &wt)| wt * band[j] as f64)
                    .sum::<f64>()
                    / total;
                out.set(b, r, c, quantize(v));
            }
        }
    }
    Ok(out)
}

/// Options for the full class-map pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMapOptions {
    pub k: usize,
    pub seed: u64,
    /// Variant C when true, C1 when false.
    pub enhance: bool,
    pub window: usize,
}

impl Default for ClassMapOptions {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            enhance: true,
            window: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassMapResult {
    pub raster: Raster<u8>,
    pub classes: ClassMap,
    pub model: KMeansModel,
}

/// Segment, optionally enhance, fill class zero, then sample radiometry.
pub fn method_c<Z: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z_expanded: &Raster<Z>,
    opts: &ClassMapOptions,
) -> Result<ClassMapResult> {
    let model = kmeans_segment(x_d, mask, opts.k, opts.seed)?;
    method_c_with_model(x_d, mask, z_expanded, model, opts)
}

/// As [`method_c`], reusing an existing segmentation of `x_d`.
pub fn method_c_with_model<Z: Sample>(
    x_d: &Raster<u8>,
    mask: &GapMask,
    z_expanded: &Raster<Z>,
    model: KMeansModel,
    opts: &ClassMapOptions,
) -> Result<ClassMapResult> {
    mask.check(x_d)?;
    if !x_d.same_support(z_expanded) {
        return Err(invalid(
            "damaged and expanded low-resolution images differ in support",
        ));
    }
    let base = if opts.enhance {
        enhance(&model.assignments, x_d, mask)?
    } else {
        model.assignments.clone()
    };
    let classes = impute_zero_class(&base, z_expanded)?;
    let raster = sample_radiometric(
        &classes,
        x_d,
        mask,
        opts.window,
        opts.seed,
        Some(&model.centroids),
    )?;
    Ok(ClassMapResult {
        raster,
        classes,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::apply_gap;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, k: usize, labels: &[u16]) -> ClassMap {
        ClassMap::new(w, h, k, labels.to_vec()).unwrap()
    }

    fn halves(w: usize, h: usize) -> Raster<u8> {
        Raster::from_fn(w, h, 1, |_, _, c| if c < w / 2 { 10 } else { 200 }).unwrap()
    }

    #[test]
    fn kmeans_single_cluster() {
        let x = Raster::from_fn(4, 3, 2, |b, r, c| (b * 3 + r * 4 + c) as u8).unwrap();
        let mask = GapMask::from_fn(4, 3, |r, c| r == 0 && c == 0);
        let m = kmeans_segment(&x, &mask, 1, 7).unwrap();
        assert_eq!(m.assignments.get(0, 0), 0);
        assert!(m.assignments.labels()[1..].iter().all(|&l| l == 1));
        for b in 0..2 {
            let mean = (1..12).map(|i| x.band(b)[i] as f64).sum::<f64>() / 11.0;
            assert!((m.centroids[0][b] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn kmeans_two_halves() {
        let x = halves(8, 6);
        for seed in 0..10 {
            let m = kmeans_segment(&x, &GapMask::empty(8, 6), 2, seed).unwrap();
            // lexicographic centroid order puts 10 first
            assert_eq!(m.centroids, vec![vec![10.0], vec![200.0]]);
            for r in 0..6 {
                for c in 0..8 {
                    assert_eq!(m.assignments.get(r, c), if c < 4 { 1 } else { 2 });
                }
            }
        }
    }

    #[test]
    fn kmeans_errors() {
        let x = halves(4, 4);
        assert!(matches!(
            kmeans_segment(&x, &GapMask::from_fn(4, 4, |_, _| true), 1, 0),
            Err(Error::NotEnoughData(_))
        ));
        assert!(matches!(
            kmeans_segment(&x, &GapMask::empty(4, 4), 3, 0),
            Err(Error::NotEnoughData(_))
        ));
        assert!(kmeans_segment(&x, &GapMask::empty(4, 4), 0, 0).is_err());
    }

    #[test]
    fn enhance_homogeneous_unchanged() {
        let m = map(3, 3, 2, &[1; 9]);
        let x = Raster::filled(3, 3, 1, 5u8).unwrap();
        let (out, sets) = enhance_with_sets(&m, &x, &GapMask::empty(3, 3)).unwrap();
        assert_eq!(out, m);
        assert!(sets.n_g.is_empty());
    }

    #[test]
    fn enhance_lonely_pixel() {
        let mut labels = vec![1u16; 25];
        labels[12] = 2;
        let m = map(5, 5, 2, &labels);
        let x = Raster::filled(5, 5, 1, 5u8).unwrap();
        let (out, sets) = enhance_with_sets(&m, &x, &GapMask::empty(5, 5)).unwrap();
        assert_eq!(sets.n_g, vec![12]);
        assert!(out.labels().iter().all(|&l| l == 1));
    }

    /// Direct transcription of the enhancement rules, pixel by pixel.
    fn enhance_reference(m: &ClassMap, x: &Raster<u8>, mask: &GapMask) -> ClassMap {
        let (w, h) = (m.width() as isize, m.height() as isize);
        let at = |r: isize, c: isize| -> Option<u16> {
            (r >= 0 && c >= 0 && r < h && c < w).then(|| m.get(r as usize, c as usize))
        };
        let mode = |cells: [(isize, isize); 4], r: isize, c: isize| -> Option<u16> {
            let mut counts = std::collections::BTreeMap::new();
            for (dr, dc) in cells {
                if let Some(l) = at(r + dr, c + dc).filter(|&l| l != 0) {
                    *counts.entry(l).or_insert(0) += 1;
                }
            }
            let max = *counts.values().max()?;
            counts.into_iter().find(|&(_, n)| n == max).map(|(l, _)| l)
        };
        let mut step3 = m.clone();
        let mut n_m = vec![];
        for r in 0..h {
            for c in 0..w {
                let l = at(r, c).unwrap();
                let mut lonely = true;
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        if (dr, dc) != (0, 0) && at(r + dr, c + dc) == Some(l) {
                            lonely = false;
                        }
                    }
                }
                if !lonely {
                    continue;
                }
                let f = mode([(0, -1), (-1, -1), (-1, 0), (-1, 1)], r, c);
                let b = mode([(0, 1), (1, 1), (1, 0), (1, -1)], r, c);
                match (f, b) {
                    (Some(f), Some(b)) if f == b => step3.set(r as usize, c as usize, f),
                    (Some(_), Some(_)) => n_m.push((r, c)),
                    _ => {}
                }
            }
        }
        let mut out = step3.clone();
        for (r, c) in n_m {
            if step3.get(r as usize, c as usize) == 0 {
                continue;
            }
            let own = x.get(0, r as usize, c as usize) as f64;
            let mut best: Option<(f64, u16)> = None;
            for l in 1..=m.k() as u16 {
                let vals: Vec<f64> = (-1..=1)
                    .flat_map(|dr| (-1..=1).map(move |dc| (dr, dc)))
                    .filter(|&(dr, dc)| (dr, dc) != (0, 0))
                    .filter(|&(dr, dc)| {
                        r + dr >= 0
                            && c + dc >= 0
                            && r + dr < h
                            && c + dc < w
                            && step3.get((r + dr) as usize, (c + dc) as usize) == l
                            && !mask.is_missing((r + dr) as usize, (c + dc) as usize)
                    })
                    .map(|(dr, dc)| x.get(0, (r + dr) as usize, (c + dc) as usize) as f64)
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let d = (mean - own).abs();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, l));
                }
            }
            if let Some((_, l)) = best {
                out.set(r as usize, c as usize, l);
            }
        }
        out
    }

    #[test]
    fn enhance_checkerboard_matches_reference() {
        let labels: Vec<u16> = (0..36).map(|i| 1 + ((i / 6 + i % 6) % 2) as u16).collect();
        let m = map(6, 6, 2, &labels);
        let x = Raster::from_fn(6, 6, 1, |_, r, c| (r * 30 + c * 7) as u8).unwrap();
        let (out, sets) = enhance_with_sets(&m, &x, &GapMask::empty(6, 6)).unwrap();
        // Diagonal neighbors share the label, so no checkerboard pixel is lonely.
        assert!(sets.n_g.is_empty());
        assert_eq!(
            out,
            enhance_reference(&m, &x, &GapMask::empty(m.width(), m.height()))
        );
    }

    #[test]
    fn enhance_stripes_match_reference() {
        // Alternating columns: every pixel lonely horizontally but not vertically.
        // Alternating single-pixel cells on a 3-label lattice are lonely.
        let labels: Vec<u16> = (0..49)
            .map(|i| 1 + (((i / 7) * 2 + i % 7) % 3) as u16)
            .collect();
        let m = map(7, 7, 3, &labels);
        let x = Raster::from_fn(7, 7, 1, |_, r, c| ((r * 41 + c * 23) % 256) as u8).unwrap();
        let (out, sets) = enhance_with_sets(&m, &x, &GapMask::empty(7, 7)).unwrap();
        assert!(!sets.n_g.is_empty());
        assert_eq!(
            out,
            enhance_reference(&m, &x, &GapMask::empty(m.width(), m.height()))
        );
    }

    proptest! {
        #[test]
        fn enhance_matches_reference_on_random_maps(
            w in 2usize..9, h in 2usize..9, k in 1u16..4,
            labels in proptest::collection::vec(0u16..4, 64),
            values in proptest::collection::vec(any::<u8>(), 64),
        ) {
            let labels: Vec<u16> = labels[..w * h].iter().map(|&l| l.min(k)).collect();
            let m = ClassMap::new(w, h, k as usize, labels).unwrap();
            let mask = GapMask::from_fn(w, h, |r, c| m.get(r, c) == 0);
            let x = Raster::from_vec(w, h, 1, values[..w * h].to_vec()).unwrap();
            let (out, sets) = enhance_with_sets(&m, &x, &mask).unwrap();
            prop_assert_eq!(&out, &enhance_reference(&m, &x, &mask));
            let n_g: HashSet<usize> = sets.n_g.iter().copied().collect();
            prop_assert!(sets.n_m.iter().all(|i| n_g.contains(i)));
            for i in 0..w * h {
                if !n_g.contains(&i) {
                    prop_assert_eq!(out.labels()[i], m.labels()[i]);
                }
            }
        }
    }

    #[test]
    fn zero_class_single_candidate() {
        let mut labels = vec![3u16; 9];
        labels[4] = 0;
        let z = Raster::filled(3, 3, 1, 77u8).unwrap();
        let out = impute_zero_class(&map(3, 3, 3, &labels), &z).unwrap();
        assert!(out.labels().iter().all(|&l| l == 3));
    }

    #[test]
    fn zero_class_nearest_mean() {
        // Row: [1, 0, 2]; Z = [10, 15, 200] -> label 1.
        let m = map(3, 1, 2, &[1, 0, 2]);
        let z = Raster::from_vec(3, 1, 1, vec![10u8, 15, 200]).unwrap();
        assert_eq!(impute_zero_class(&m, &z).unwrap().labels(), &[1, 1, 2]);
        // Equidistant: Z = [10, 105, 200] -> tie to label 1.
        let z = Raster::from_vec(3, 1, 1, vec![10u8, 105, 200]).unwrap();
        assert_eq!(impute_zero_class(&m, &z).unwrap().labels(), &[1, 1, 2]);
    }

    #[test]
    fn zero_class_grows_neighborhood_without_propagation() {
        // Column of 5 with labels only at the ends.
        let m = map(1, 5, 2, &[1, 0, 0, 0, 2]);
        let z = Raster::from_vec(1, 5, 1, vec![10u8, 12, 14, 190, 200]).unwrap();
        // Row 1: N_1 = {rows 0..2} holds only class 1. Row 2: N_2 holds both, z=14 -> 1.
        // Row 3: N_1 holds only class 2.
        assert_eq!(
            impute_zero_class(&m, &z).unwrap().labels(),
            &[1, 1, 1, 2, 2]
        );
        assert!(matches!(
            impute_zero_class(
                &map(2, 1, 2, &[0, 0]),
                &Raster::filled(2, 1, 1, 0u8).unwrap()
            ),
            Err(Error::NotEnoughData(_))
        ));
    }

    #[test]
    fn sampling_single_donor_and_interval() {
        let x = Raster::from_vec(3, 1, 1, vec![42u8, 0, 9]).unwrap();
        let mask = GapMask::from_fn(3, 1, |_, c| c == 1);
        let m = map(3, 1, 2, &[1, 1, 2]);
        let out = sample_radiometric(&m, &x, &mask, 1, 5, None).unwrap();
        assert_eq!(out.band(0), &[42, 42, 9]);

        let x = Raster::from_vec(3, 1, 1, vec![10u8, 0, 20]).unwrap();
        let m = map(3, 1, 1, &[1, 1, 1]);
        for seed in 0..50 {
            let v = sample_radiometric(&m, &x, &mask, 1, seed, None)
                .unwrap()
                .get(0, 0, 1);
            assert!((10..=20).contains(&v));
        }
    }

    #[test]
    fn sampling_falls_back_to_centroid() {
        let x = Raster::from_vec(2, 1, 1, vec![10u8, 0]).unwrap();
        let mask = GapMask::from_fn(2, 1, |_, c| c == 1);
        let m = map(2, 1, 2, &[1, 2]);
        let cents = vec![vec![10.0], vec![123.4]];
        let out = sample_radiometric(&m, &x, &mask, 1, 0, Some(&cents)).unwrap();
        assert_eq!(out.band(0), &[10, 123]);
        assert!(sample_radiometric(&m, &x, &mask, 1, 0, None).is_err());
    }

    proptest! {
        #[test]
        fn sampled_vectors_within_donor_bounds(
            w in 3usize..10, h in 3usize..10, seed in any::<u64>(), window in 1usize..3,
            labels in proptest::collection::vec(1u16..4, 100),
            values in proptest::collection::vec(any::<u8>(), 200),
            holes in proptest::collection::vec(any::<bool>(), 100),
        ) {
            let n = w * h;
            let mut holes = holes[..n].to_vec();
            holes[0] = false;
            let labels = labels[..n].to_vec();
            let m = ClassMap::new(w, h, 3, labels.clone()).unwrap();
            let mask = GapMask::from_vec(w, h, holes).unwrap();
            let x = Raster::from_vec(w, h, 2, values[..2 * n].to_vec()).unwrap();
            let cents = vec![vec![0.0, 0.0]; 3];
            let out = sample_radiometric(&m, &x, &mask, window, seed, Some(&cents)).unwrap();
            for r in 0..h {
                for c in 0..w {
                    let i = r * w + c;
                    if !mask.is_missing_index(i) {
                        prop_assert_eq!(out.get(0, r, c), x.get(0, r, c));
                        continue;
                    }
                    // brute-force donor enumeration with the same growth rule
                    let any_donor = (0..n).any(|j| !mask.is_missing_index(j) && labels[j] == labels[i]);
                    if !any_donor {
                        continue;
                    }
                    let mut t = window;
                    let donors = loop {
                        let d: Vec<usize> = (0..n)
                            .filter(|&j| {
                                let (jr, jc) = (j / w, j % w);
                                !mask.is_missing_index(j) && labels[j] == labels[i]
                                    && jr.abs_diff(r) <= t && jc.abs_diff(c) <= t
                            })
                            .collect();
                        if !d.is_empty() { break d; }
                        t += 1;
                    };
                    for b in 0..2 {
                        let lo = donors.iter().map(|&j| x.band(b)[j]).min().unwrap();
                        let hi = donors.iter().map(|&j| x.band(b)[j]).max().unwrap();
                        let v = out.get(b, r, c);
                        prop_assert!(v >= lo && v <= hi);
                    }
                }
            }
        }
    }

    fn strips(w: usize, h: usize) -> GapMask {
        GapMask::from_fn(w, h, |r, _| r % 10 >= 7)
    }

    #[test]
    fn method_c_two_regions() {
        let x = halves(40, 40);
        let mask = strips(40, 40);
        let d = apply_gap(&x, &mask, 0).unwrap();
        let z =
            crate::raster::expand_lowres(&crate::degrade::rrm0_block_average(&x, 5).unwrap(), 5)
                .unwrap();
        for enhance in [false, true] {
            let opts = ClassMapOptions {
                k: 2,
                seed: 3,
                enhance,
                window: 3,
            };
            let res = method_c(&d, &mask, &z, &opts).unwrap();
            assert_eq!(res.classes.zero_count(), 0);
            for r in 0..40 {
                for c in 0..40 {
                    assert_eq!(res.classes.get(r, c), if c < 20 { 1 } else { 2 });
                }
            }
            assert_eq!(res.raster, x);
        }
    }

    #[test]
    fn method_c_empty_mask_and_determinism() {
        let x = Raster::from_fn(20, 20, 2, |b, r, c| {
            ((r * 13 + c * 29 + b * 71) % 256) as u8
        })
        .unwrap();
        let z = x.clone();
        let opts = ClassMapOptions {
            k: 3,
            seed: 11,
            enhance: true,
            window: 2,
        };
        let empty = GapMask::empty(20, 20);
        for enhance in [true, false] {
            let o = ClassMapOptions { enhance, ..opts };
            assert_eq!(method_c(&x, &empty, &z, &o).unwrap().raster, x);
        }
        let mask = strips(20, 20);
        let d = apply_gap(&x, &mask, 0).unwrap();
        let a = method_c(&d, &mask, &z, &opts).unwrap();
        let b = method_c(&d, &mask, &z, &opts).unwrap();
        assert_eq!(a.raster, b.raster);
        assert_eq!(a.classes, b.classes);
    }
}
