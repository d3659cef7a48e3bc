//! Ordinary kriging with an exponential variogram.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::KrigingError;
use crate::geometry::Vec2;

/// Number of lag bins of the empirical semivariogram.
pub const LAG_BINS: usize = 15;
/// Minimum sample count for a variogram fit.
pub const MIN_FIT_SAMPLES: usize = 5;
/// Positions closer than this are treated as the same location.
const SAME_POSITION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub position: Vec2,
    pub value: f64,
}

impl Sample {
    pub fn new(position: Vec2, value: f64) -> Self {
        Sample { position, value }
    }
}

/// Exponential variogram `γ(h) = n + (s − n)(1 − exp(−h / a))` for `h > 0`,
/// `γ(0) = 0`. `sill` is the total sill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variogram {
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl Variogram {
    pub fn new(nugget: f64, sill: f64, range: f64) -> Result<Self, KrigingError> {
        if !(nugget >= 0.0 && sill >= nugget && range > 0.0 && sill.is_finite() && range.is_finite()) {
            return Err(KrigingError::InvalidModel(format!(
                "need sill >= nugget >= 0 and range > 0 (nugget {nugget}, sill {sill}, range {range})"
            )));
        }
        Ok(Variogram { nugget, sill, range })
    }

    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.nugget + (self.sill - self.nugget) * (1.0 - (-h / self.range).exp())
        }
    }
}

/// One bin of the empirical semivariogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagBin {
    pub lag: f64,
    pub semivariance: f64,
    pub pairs: usize,
}

/// Empirical semivariogram over `bins` equal-width bins up to half the
/// largest pairwise distance. Empty bins are dropped.
pub fn empirical_semivariogram(samples: &[Sample], bins: usize) -> Vec<LagBin> {
    let mut max_d: f64 = 0.0;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            max_d = max_d.max(a.position.distance(b.position));
        }
    }
    let cutoff = max_d / 2.0;
    if cutoff <= 0.0 || bins == 0 {
        return Vec::new();
    }
    let width = cutoff / bins as f64;
    let mut sum_h = vec![0.0; bins];
    let mut sum_g = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let h = a.position.distance(b.position);
            if h <= SAME_POSITION || h > cutoff {
                continue;
            }
            let k = ((h / width).ceil() as usize).clamp(1, bins) - 1;
            sum_h[k] += h;
            sum_g[k] += 0.5 * (a.value - b.value).powi(2);
            count[k] += 1;
        }
    }
    (0..bins)
        .filter(|&k| count[k] > 0)
        .map(|k| LagBin {
            lag: sum_h[k] / count[k] as f64,
            semivariance: sum_g[k] / count[k] as f64,
            pairs: count[k],
        })
        .collect()
}

/// Pair-count weighted least squares for (nugget, partial sill) at a fixed
/// range, both constrained to be non-negative. Returns (nugget, partial, sse).
fn fit_linear(bins: &[LagBin], range: f64) -> (f64, f64, f64) {
    let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for b in bins {
        let w = b.pairs as f64;
        let x = 1.0 - (-b.lag / range).exp();
        sw += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * b.semivariance;
        sxy += w * x * b.semivariance;
    }
    let sse = |n: f64, p: f64| {
        bins.iter()
            .map(|b| {
                let r = n + p * (1.0 - (-b.lag / range).exp()) - b.semivariance;
                b.pairs as f64 * r * r
            })
            .sum::<f64>()
    };
    let det = sw * sxx - sx * sx;
    if det.abs() > 1e-12 * sw * sxx.max(1e-300) {
        let n = (sxx * sy - sx * sxy) / det;
        let p = (sw * sxy - sx * sy) / det;
        if n >= 0.0 && p >= 0.0 {
            return (n, p, sse(n, p));
        }
    }
    // boundary candidates
    let p_only = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let n_only = if sw > 0.0 { (sy / sw).max(0.0) } else { 0.0 };
    let a = (0.0, p_only, sse(0.0, p_only));
    let b = (n_only, 0.0, sse(n_only, 0.0));
    if a.2 <= b.2 {
        a
    } else {
        b
    }
}

/// Merge samples that share a position into their mean value.
pub fn merge_duplicates(samples: &[Sample]) -> Vec<Sample> {
    let mut sorted: Vec<Sample> = samples.to_vec();
    sorted.sort_by(|a, b| {
        a.position
            .x
            .total_cmp(&b.position.x)
            .then(a.position.y.total_cmp(&b.position.y))
    });
    let mut out: Vec<(Sample, usize)> = Vec::with_capacity(sorted.len());
    for s in sorted {
        let dup = out
            .iter_mut()
            .rev()
            .take_while(|(o, _)| s.position.x - o.position.x <= SAME_POSITION)
            .find(|(o, _)| o.position.distance(s.position) <= SAME_POSITION);
        match dup {
            Some((o, n)) => {
                o.value += s.value;
                *n += 1;
            }
            None => out.push((s, 1)),
        }
    }
    out.into_iter()
        .map(|(s, n)| Sample::new(s.position, s.value / n as f64))
        .collect()
}

/// Neighbourhood used for each prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Neighbourhood {
    /// Nearest `k` samples.
    Nearest { k: usize },
    /// Every sample.
    Full,
}

impl Default for Neighbourhood {
    fn default() -> Self {
        Neighbourhood::Nearest { k: 32 }
    }
}

/// A variogram together with its (de-duplicated) conditioning samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingModel {
    pub variogram: Variogram,
    samples: Vec<Sample>,
}

/// Fit the exponential variogram to the empirical semivariogram.
pub fn fit_variogram(samples: &[Sample]) -> Result<KrigingModel, KrigingError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(KrigingError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    let merged = merge_duplicates(samples);
    if merged.len() < 2 {
        return Err(KrigingError::Degenerate("all samples share one position".into()));
    }
    let bins = empirical_semivariogram(&merged, LAG_BINS);
    if bins.is_empty() {
        return Err(KrigingError::Degenerate("no usable sample pairs".into()));
    }
    let max_lag = bins.iter().map(|b| b.lag).fold(0.0, f64::max) * 2.0;
    let min_lag = bins.iter().map(|b| b.lag).fold(f64::INFINITY, f64::min);

    // coarse log grid over the range, then golden-section refinement
    let (lo, hi) = ((min_lag / 10.0).ln(), (max_lag * 2.0).ln());
    let cost = |ln_a: f64| fit_linear(&bins, ln_a.exp()).2;
    let steps = 80;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let c = cost(x);
        if c < best.1 {
            best = (x, c);
        }
    }
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if cost(c) <= cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let ln_range = if cost((a + b) / 2.0) <= best.1 { (a + b) / 2.0 } else { best.0 };
    let range = ln_range.exp();
    let (nugget, partial, _) = fit_linear(&bins, range);
    Ok(KrigingModel {
        variogram: Variogram::new(nugget, nugget + partial, range)?,
        samples: merged,
    })
}

/// Prediction at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub variance: f64,
    /// Sample indices used and their weights.
    pub neighbours: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

impl KrigingModel {
    /// Use a given variogram. Duplicate positions are averaged.
    pub fn new(variogram: Variogram, samples: &[Sample]) -> Result<Self, KrigingError> {
        if samples.is_empty() {
            return Err(KrigingError::TooFewSamples { needed: 1, got: 0 });
        }
        Ok(KrigingModel {
            variogram,
            samples: merge_duplicates(samples),
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    fn neighbours(&self, x: Vec2, hood: Neighbourhood) -> Vec<usize> {
        let n = self.samples.len();
        match hood {
            Neighbourhood::Nearest { k } if k < n => {
                let mut idx: Vec<usize> = (0..n).collect();
                let d = |i: &usize| self.samples[*i].position.distance_sq(x);
                idx.select_nth_unstable_by(k.max(1) - 1, |a, b| d(a).total_cmp(&d(b)).then(a.cmp(b)));
                idx.truncate(k.max(1));
                idx.sort_unstable();
                idx
            }
            _ => (0..n).collect(),
        }
    }

    pub fn predict(&self, x: Vec2, hood: Neighbourhood) -> Prediction {
        let idx = self.neighbours(x, hood);
        let m = idx.len();
        let pts: Vec<&Sample> = idx.iter().map(|&i| &self.samples[i]).collect();

        if m == 1 || self.variogram.sill <= 0.0 {
            // flat variogram: every unbiased combination is equally good
            let w = 1.0 / m as f64;
            let value = pts.iter().map(|s| s.value).sum::<f64>() * w;
            return Prediction {
                value,
                variance: if m == 1 { 2.0 * self.variogram.gamma(pts[0].position.distance(x)) } else { 0.0 },
                neighbours: idx,
                weights: vec![w; m],
            };
        }

        let g = &self.variogram;
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut rhs = DVector::<f64>::zeros(m + 1);
        for i in 0..m {
            for j in 0..i {
                let v = g.gamma(pts[i].position.distance(pts[j].position));
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
            a[(i, m)] = 1.0;
            a[(m, i)] = 1.0;
            rhs[i] = g.gamma(pts[i].position.distance(x));
        }
        rhs[m] = 1.0;
        let sol = a
            .lu()
            .solve(&rhs)
            .expect("ordinary kriging system with distinct positions is non-singular");
        let weights: Vec<f64> = sol.iter().take(m).copied().collect();
        let value = weights.iter().zip(&pts).map(|(w, s)| w * s.value).sum();
        let variance = weights.iter().zip(rhs.iter()).map(|(w, r)| w * r).sum::<f64>() + sol[m];
        Prediction {
            value,
            variance: variance.max(0.0),
            neighbours: idx,
            weights,
        }
    }
}

/// Regular prediction lattice; cell (col, row) is centred at
/// `origin + ((col + ½)·cell, (row + ½)·cell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec2,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridSpec {
    pub fn covering(min: Vec2, max: Vec2, cell_size: f64) -> Self {
        GridSpec {
            origin: min,
            cell_size,
            cols: ((max.x - min.x) / cell_size).ceil().max(1.0) as usize,
            rows: ((max.y - min.y) / cell_size).ceil().max(1.0) as usize,
        }
    }

    pub fn cell_centre(&self, col: usize, row: usize) -> Vec2 {
        self.origin + Vec2::new((col as f64 + 0.5) * self.cell_size, (row as f64 + 0.5) * self.cell_size)
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major (south to north) prediction and error standard deviation maps.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigedMaps {
    pub grid: GridSpec,
    pub prediction: Vec<f64>,
    pub error_std: Vec<f64>,
}

impl KrigedMaps {
    pub fn mean_error_std(&self) -> f64 {
        let v: Vec<f64> = self.error_std.iter().copied().filter(|x| !x.is_nan()).collect();
        crate::evolution::mean(&v)
    }
}

/// Krige every cell for which `mask` holds; other cells are NaN.
pub fn krige<M>(model: &KrigingModel, grid: GridSpec, hood: Neighbourhood, mask: M) -> KrigedMaps
where
    M: Fn(Vec2) -> bool + Sync,
{
    let cells: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.cell_centre(i % grid.cols, i / grid.cols);
            if !mask(x) {
                return (f64::NAN, f64::NAN);
            }
            let p = model.predict(x, hood);
            (p.value, p.std())
        })
        .collect();
    let (prediction, error_std) = cells.into_iter().unzip();
    KrigedMaps {
        grid,
        prediction,
        error_std,
    }
}

/// Draw a zero-mean Gaussian random field with covariance
/// `sill·exp(−h / range)` at the given points.
pub fn gaussian_field(points: &[Vec2], sill: f64, range: f64, seed: u64) -> Result<Vec<f64>, KrigingError> {
    use rand::{Rng, SeedableRng};
    let n = points.len();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        sill * (-points[i].distance(points[j]) / range).exp() + if i == j { 1e-10 } else { 0.0 }
    });
    let l = cov
        .cholesky()
        .ok_or_else(|| KrigingError::Degenerate("covariance is not positive definite".into()))?
        .l();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    Ok((l * z).iter().copied().collect())
}
