//! Quality measures: RMSE and the Q index for radiometry, confusion
//! matrix with Overall Accuracy and Cohen's kappa for class maps.

use std::fmt;

use crate::classmap::KMeansModel;
use crate::error::{invalid, Error, Result};
use crate::raster::{ClassMap, GapMask, Raster, Sample};

/// Pixels over which a measure is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Full,
    Gap(&'a GapMask),
}

impl Region<'_> {
    #[inline]
    fn contains(&self, i: usize) -> bool {
        match self {
            Region::Full => true,
            Region::Gap(m) => m.is_missing_index(i),
        }
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        match self {
            Region::Gap(m) if m.width() != width || m.height() != height => {
                Err(invalid("region mask does not match the compared images"))
            }
            _ => Ok(()),
        }
    }
}

/// Which region a record was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum EvalRegion {
    #[default]
    Gap,
    Full,
}

impl EvalRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalRegion::Gap => "gap",
            EvalRegion::Full => "full",
        }
    }

    pub fn region<'a>(&self, mask: &'a GapMask) -> Region<'a> {
        match self {
            EvalRegion::Gap => Region::Gap(mask),
            EvalRegion::Full => Region::Full,
        }
    }
}

impl fmt::Display for EvalRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EvalRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gap" => Ok(EvalRegion::Gap),
            "full" => Ok(EvalRegion::Full),
            _ => Err(invalid(format!(
                "unknown region `{s}` (expected gap or full)"
            ))),
        }
    }
}

fn check_pair<A: Sample, B: Sample>(y: &Raster<A>, w: &Raster<B>) -> Result<()> {
    if !y.same_support(w) || y.bands() != w.bands() {
        return Err(invalid(format!(
            "images differ: {}x{}x{} vs {}x{}x{}",
            y.width(),
            y.height(),
            y.bands(),
            w.width(),
            w.height(),
            w.bands()
        )));
    }
    Ok(())
}

/// `sqrt(Σ_s ‖y_s − w_s‖² / |S|)`, the norm taken across bands.
pub fn rmse<A: Sample, B: Sample>(y: &Raster<A>, w: &Raster<B>, region: Region<'_>) -> Result<f64> {
    check_pair(y, w)?;
    region.check(y.width(), y.height())?;
    let n = y.pixels();
    let count = (0..n).filter(|&i| region.contains(i)).count();
    if count == 0 {
        return Err(invalid("empty evaluation region"));
    }
    let mut sum = 0.0;
    for b in 0..y.bands() {
        let (yb, wb) = (y.band(b), w.band(b));
        for i in 0..n {
            if region.contains(i) {
                let d = yb[i].to_f64() - wb[i].to_f64();
                sum += d * d;
            }
        }
    }
    Ok((sum / count as f64).sqrt())
}

/// Q index with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QIndex {
    pub q: f64,
    /// Windows that entered the average, summed over bands.
    pub windows: usize,
    /// Windows skipped for a zero denominator.
    pub degenerate: usize,
}

/// Window statistic `4 σ_yw ȳ w̄ / ((σ_y² + σ_w²)(ȳ² + w̄²))` with `N − 1`
/// divisors, or `None` when the denominator vanishes or `N < 2`.
pub fn window_index(y: &[f64], w: &[f64]) -> Option<f64> {
    let n = y.len();
    if n < 2 || w.len() != n {
        return None;
    }
    let nf = n as f64;
    let my = y.iter().sum::<f64>() / nf;
    let mw = w.iter().sum::<f64>() / nf;
    let (mut syy, mut sww, mut syw) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(w) {
        let (dy, dw) = (a - my, b - mw);
        syy += dy * dy;
        sww += dw * dw;
        syw += dy * dw;
    }
    let (vy, vw, cyw) = (syy / (nf - 1.0), sww / (nf - 1.0), syw / (nf - 1.0));
    let den = (vy + vw) * (my * my + mw * mw);
    (den != 0.0).then(|| 4.0 * cyw * my * mw / den)
}

/// Q over non-overlapping `window × window` tiles (ragged edges dropped),
/// using only region pixels inside each tile; averaged per band, then
/// across bands.
pub fn q_index_detail<A: Sample, B: Sample>(
    y: &Raster<A>,
    w: &Raster<B>,
    window: usize,
    region: Region<'_>,
) -> Result<QIndex> {
    check_pair(y, w)?;
    region.check(y.width(), y.height())?;
    if window < 2 {
        return Err(invalid("Q window must be >= 2"));
    }
    let (width, height) = (y.width(), y.height());
    let mut band_q = Vec::with_capacity(y.bands());
    let (mut windows, mut degenerate) = (0, 0);
    let mut ys = Vec::with_capacity(window * window);
    let mut ws = Vec::with_capacity(window * window);
    for b in 0..y.bands() {
        let (yb, wb) = (y.band(b), w.band(b));
        let (mut sum, mut used) = (0.0, 0usize);
        for tr in 0..height / window {
            for tc in 0..width / window {
                ys.clear();
                ws.clear();
                for r in tr * window..(tr + 1) * window {
                    for c in tc * window..(tc + 1) * window {
                        let i = r * width + c;
                        if region.contains(i) {
                            ys.push(yb[i].to_f64());
                            ws.push(wb[i].to_f64());
                        }
                    }
                }
                if ys.is_empty() {
                    continue;
                }
                match window_index(&ys, &ws) {
                    Some(v) => {
                        sum += v;
                        used += 1;
                    }
                    None => degenerate += 1,
                }
            }
        }
        if used > 0 {
            band_q.push(sum / used as f64);
            windows += used;
        }
    }
    if band_q.is_empty() {
        return Err(Error::UndefinedMeasure(format!(
            "all {degenerate} Q windows are degenerate"
        )));
    }
    Ok(QIndex {
        q: band_q.iter().sum::<f64>() / band_q.len() as f64,
        windows,
        degenerate,
    })
}

pub fn q_index<A: Sample, B: Sample>(
    y: &Raster<A>,
    w: &Raster<B>,
    window: usize,
    region: Region<'_>,
) -> Result<f64> {
    Ok(q_index_detail(y, w, window, region)?.q)
}

/// Entry `(i, j)` counts pixels of true class `j + 1` assigned class `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
    n: u64,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(invalid("confusion matrix must be square"));
        }
        let flat: Vec<u64> = counts.into_iter().flatten().collect();
        let n = flat.iter().sum();
        Ok(Self { k, counts: flat, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Pixels of true class `j` assigned class `i` (0-based indices).
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.k + j]
    }

    pub fn row_total(&self, i: usize) -> u64 {
        (0..self.k).map(|j| self.get(i, j)).sum()
    }

    pub fn col_total(&self, j: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }
}

pub fn confusion(truth: &ClassMap, pred: &ClassMap, region: Region<'_>) -> Result<ConfusionMatrix> {
    if truth.width() != pred.width() || truth.height() != pred.height() {
        return Err(invalid("class maps differ in support"));
    }
    region.check(truth.width(), truth.height())?;
    let k = truth.k().max(pred.k());
    let mut counts = vec![0u64; k * k];
    let mut n = 0;
    for (i, (&t, &p)) in truth.labels().iter().zip(pred.labels()).enumerate() {
        if !region.contains(i) {
            continue;
        }
        if t == 0 || p == 0 {
            return Err(invalid(format!(
                "zero label at pixel {i}: imputation incomplete"
            )));
        }
        counts[(p as usize - 1) * k + t as usize - 1] += 1;
        n += 1;
    }
    Ok(ConfusionMatrix { k, counts, n })
}

pub fn overall_accuracy(m: &ConfusionMatrix) -> Result<f64> {
    if m.n == 0 {
        return Err(invalid("empty confusion matrix"));
    }
    Ok(m.trace() as f64 / m.n as f64)
}

/// Cohen's kappa, `(p_o − p_c) / (1 − p_c)`.
pub fn kappa(m: &ConfusionMatrix) -> Result<f64> {
    if m.n == 0 {
        return Err(invalid("empty confusion matrix"));
    }
    let n = m.n as f64;
    let p_o = m.trace() as f64 / n;
    let p_c: f64 = (0..m.k)
        .map(|i| (m.row_total(i) as f64 / n) * (m.col_total(i) as f64 / n))
        .sum();
    if p_c >= 1.0 {
        return Err(Error::UndefinedMeasure(
            "kappa: chance agreement is 1".into(),
        ));
    }
    Ok((p_o - p_c) / (1.0 - p_c))
}

/// Label every pixel of `pred` by its nearest ground-truth centroid.
pub fn align_labels<T: Sample>(truth_model: &KMeansModel, pred: &Raster<T>) -> Result<ClassMap> {
    let bands = truth_model.centroids.first().map_or(0, Vec::len);
    if bands != pred.bands() {
        return Err(Error::BandMismatch {
            what: "label alignment",
            expected: bands,
            found: pred.bands(),
        });
    }
    let mut v = vec![0.0; bands];
    let mut labels = Vec::with_capacity(pred.pixels());
    for i in 0..pred.pixels() {
        for (b, x) in v.iter_mut().enumerate() {
            *x = pred.band(b)[i].to_f64();
        }
        labels.push(truth_model.nearest(&v));
    }
    ClassMap::new(pred.width(), pred.height(), truth_model.k, labels)
}

/// Relabeling of `pred`'s classes onto `truth`'s: `map[l]` is the truth
/// label for predicted label `l` (`map[0] = 0`). Chooses the permutation
/// minimizing the summed squared centroid distance; exhaustive up to 8
/// classes, greedy beyond.
pub fn match_labels(truth: &KMeansModel, pred: &KMeansModel) -> Result<Vec<u16>> {
    if truth.k != pred.k {
        return Err(invalid(format!(
            "class counts differ: {} vs {}",
            truth.k, pred.k
        )));
    }
    let k = truth.k;
    let cost: Vec<Vec<f64>> = pred
        .centroids
        .iter()
        .map(|p| {
            truth
                .centroids
                .iter()
                .map(|t| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect()
        })
        .collect();
    let assignment = if k <= 8 {
        best_permutation(&cost)
    } else {
        greedy_assignment(&cost)
    };
    let mut map = vec![0u16; k + 1];
    for (p, &t) in assignment.iter().enumerate() {
        map[p + 1] = t as u16 + 1;
    }
    Ok(map)
}

fn best_permutation(cost: &[Vec<f64>]) -> Vec<usize> {
    fn recurse(
        cost: &[Vec<f64>],
        row: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if acc >= best.0 {
            return;
        }
        if row == cost.len() {
            *best = (acc, current.clone());
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                current.push(j);
                recurse(cost, row + 1, used, current, acc + cost[row][j], best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let k = cost.len();
    let mut best = (f64::INFINITY, (0..k).collect());
    recurse(
        cost,
        0,
        &mut vec![false; k],
        &mut Vec::with_capacity(k),
        0.0,
        &mut best,
    );
    best.1
}

fn greedy_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let k = cost.len();
    let mut pairs: Vec<(f64, usize, usize)> = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| (cost[i][j], i, j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![usize::MAX; k];
    let mut taken = vec![false; k];
    for (_, i, j) in pairs {
        if out[i] == usize::MAX && !taken[j] {
            out[i] = j;
            taken[j] = true;
        }
    }
    out
}

/// One cell of the experiment: the response vector and its factor levels.
/// `None` marks a measure that could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRecord {
    pub method: String,
    pub rrm: u8,
    pub image: usize,
    pub subimage: usize,
    pub region: EvalRegion,
    pub rmse: Option<f64>,
    pub q: Option<f64>,
    pub kappa: Option<f64>,
    pub oa: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn rmse_examples() {
        let y = Raster::from_vec(2, 2, 1, vec![3u8, 4, 0, 0]).unwrap();
        let w = Raster::filled(2, 2, 1, 0u8).unwrap();
        assert_eq!(rmse(&y, &y, Region::Full).unwrap(), 0.0);
        assert_eq!(rmse(&y, &w, Region::Full).unwrap(), 2.5);
        let y2 = Raster::from_vec(1, 1, 2, vec![3u8, 4]).unwrap();
        let w2 = Raster::from_vec(1, 1, 2, vec![0u8, 0]).unwrap();
        assert_eq!(rmse(&y2, &w2, Region::Full).unwrap(), 5.0);
        let empty = GapMask::empty(2, 2);
        assert!(rmse(&y, &w, Region::Gap(&empty)).is_err());
    }

    #[test]
    fn q_examples() {
        assert_eq!(window_index(&[1.0, 2.0], &[2.0, 1.0]), Some(-1.0));
        assert_eq!(window_index(&[5.0, 5.0], &[5.0, 5.0]), None);
        let y = Raster::from_fn(16, 16, 2, |b, r, c| (r * 7 + c * 3 + b) as u8).unwrap();
        let q = q_index_detail(&y, &y, 8, Region::Full).unwrap();
        assert!((q.q - 1.0).abs() < 1e-12);
        assert_eq!((q.windows, q.degenerate), (8, 0));
        let flat = Raster::filled(8, 8, 1, 4u8).unwrap();
        assert!(matches!(
            q_index(&flat, &flat, 8, Region::Full),
            Err(Error::UndefinedMeasure(_))
        ));
        assert!(q_index(&y, &y, 1, Region::Full).is_err());
    }

    #[test]
    fn confusion_examples() {
        let t = ClassMap::new(2, 2, 2, vec![1, 2, 2, 1]).unwrap();
        let m = confusion(&t, &t, Region::Full).unwrap();
        assert_eq!(
            (m.get(0, 0), m.get(1, 1), m.get(0, 1), m.get(1, 0)),
            (2, 2, 0, 0)
        );
        let ones = ClassMap::new(2, 2, 2, vec![1; 4]).unwrap();
        let twos = ClassMap::new(2, 2, 2, vec![2; 4]).unwrap();
        let m = confusion(&ones, &twos, Region::Full).unwrap();
        assert_eq!((m.get(1, 0), m.trace(), m.n()), (4, 0, 4));
        let zero = ClassMap::new(2, 2, 2, vec![0, 1, 1, 1]).unwrap();
        assert!(confusion(&zero, &ones, Region::Full).is_err());
        let mask = GapMask::from_fn(2, 2, |r, c| r + c > 0);
        assert_eq!(confusion(&zero, &ones, Region::Gap(&mask)).unwrap().n(), 3);
    }

    #[test]
    fn oa_and_kappa_examples() {
        let m = cm(&[&[40, 10], &[10, 40]]);
        assert!((overall_accuracy(&m).unwrap() - 0.8).abs() < 1e-15);
        assert!((kappa(&m).unwrap() - 0.6).abs() < 1e-15);
        let diag = cm(&[&[5, 0], &[0, 7]]);
        assert_eq!(overall_accuracy(&diag).unwrap(), 1.0);
        assert_eq!(kappa(&diag).unwrap(), 1.0);
        assert_eq!(overall_accuracy(&cm(&[&[0, 3], &[4, 0]])).unwrap(), 0.0);
        assert_eq!(kappa(&cm(&[&[25, 25], &[25, 25]])).unwrap(), 0.0);
        assert!(matches!(
            kappa(&cm(&[&[9, 0], &[0, 0]])),
            Err(Error::UndefinedMeasure(_))
        ));
        assert!(overall_accuracy(&cm(&[&[0]])).is_err());
    }

    fn model(centroids: Vec<Vec<f64>>) -> KMeansModel {
        let k = centroids.len();
        KMeansModel {
            k,
            centroids,
            assignments: ClassMap::new(1, 1, k, vec![1]).unwrap(),
            iterations_run: 0,
            seed: 0,
        }
    }

    #[test]
    fn align_examples() {
        let m = model(vec![vec![0.0], vec![10.0]]);
        let pred = Raster::from_vec(3, 1, 1, vec![2u8, 5, 9]).unwrap();
        assert_eq!(align_labels(&m, &pred).unwrap().labels(), &[1, 1, 2]);
        let two = Raster::filled(3, 1, 2, 1u8).unwrap();
        assert!(align_labels(&m, &two).is_err());
    }

    #[test]
    fn match_labels_recovers_permutation() {
        let truth = model(vec![vec![0.0], vec![100.0], vec![200.0]]);
        let pred = model(vec![vec![195.0], vec![3.0], vec![110.0]]);
        assert_eq!(match_labels(&truth, &pred).unwrap(), vec![0, 3, 1, 2]);
        let cost = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(greedy_assignment(&cost), vec![1, 0]);
    }
}
