//! Divergence and entropy figures-of-merit, weight histograms and the 2D
//! magnitude spectrum of weight matrices.
//!
//! All logarithms take an explicit base; [`BITS`] (base 2) is the default used
//! throughout the crate, which bounds the Jensen–Shannon divergence by 1.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Logarithm base giving values in bits.
pub const BITS: f64 = 2.0;
/// Logarithm base giving values in nats.
pub const NATS: f64 = std::f64::consts::E;

const SUM_TOLERANCE: f64 = 1e-9;

/// A finite probability vector: entries are non-negative and sum to one
/// within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {x}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self(p))
    }

    /// Normalizes a vector of non-negative weights (e.g. histogram counts).
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if let Some(x) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {x}")));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        Self::new(w.iter().map(|x| x / total).collect())
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::from_weights(&w)
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        Ok(Self(vec![1.0 / dim as f64; dim]))
    }

    pub fn one_hot(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "one-hot index {index} out of range for dimension {dim}"
            )));
        }
        let mut p = vec![0.0; dim];
        p[index] = 1.0;
        Ok(Self(p))
    }

    /// Arithmetic mean of equally weighted distributions of equal dimension.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Distribution>) -> Result<Self> {
        let mut acc: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for d in items {
            if acc.is_empty() {
                acc = vec![0.0; d.len()];
            } else if acc.len() != d.len() {
                return Err(Error::DimensionMismatch {
                    context: "distribution mean",
                    expected: acc.len(),
                    actual: d.len(),
                });
            }
            for (a, p) in acc.iter_mut().zip(d.iter()) {
                *a += p;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidDistribution("mean of nothing".into()));
        }
        Self::new(acc.into_iter().map(|a| a / n as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Index of the largest entry (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_base(log_base: f64) -> Result<f64> {
    if !(log_base.is_finite() && log_base > 1.0) {
        return Err(Error::InvalidParameter(format!("log base must be > 1, got {log_base}")));
    }
    Ok(log_base.ln())
}

fn check_dims(p: &Distribution, q: &Distribution, context: &'static str) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context,
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok(())
}

/// Shannon entropy `-Σ p_i log p_i`, with `0 log 0 = 0`.
pub fn shannon_entropy(p: &Distribution, log_base: f64) -> Result<f64> {
    let ln_base = check_base(log_base)?;
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    Ok((h / ln_base).max(0.0))
}

/// Jensen–Shannon divergence
/// `½ Σ [p_i log(2p_i/(p_i+q_i)) + q_i log(2q_i/(p_i+q_i))]`.
///
/// This is the divergence itself, not the square-root distance returned by
/// many toolkits; see [`jsd_distance`] for that.
pub fn jsd(p: &Distribution, q: &Distribution, log_base: f64) -> Result<f64> {
    let ln_base = check_base(log_base)?;
    check_dims(p, q, "jsd")?;
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        let m = pi + qi;
        if pi > 0.0 {
            sum += pi * (2.0 * pi / m).ln();
        }
        if qi > 0.0 {
            sum += qi * (2.0 * qi / m).ln();
        }
    }
    Ok((0.5 * sum / ln_base).max(0.0))
}

/// Square root of [`jsd`], the Jensen–Shannon distance.
pub fn jsd_distance(p: &Distribution, q: &Distribution, log_base: f64) -> Result<f64> {
    jsd(p, q, log_base).map(f64::sqrt)
}

/// Kullback–Leibler divergence `Σ p_i log(p_i/q_i)`; `+∞` when `q` assigns
/// zero mass where `p` does not.
pub fn kld(p: &Distribution, q: &Distribution, log_base: f64) -> Result<f64> {
    let ln_base = check_base(log_base)?;
    check_dims(p, q, "kld")?;
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi > 0.0 {
            if qi == 0.0 {
                return Ok(f64::INFINITY);
            }
            sum += pi * (pi / qi).ln();
        }
    }
    Ok((sum / ln_base).max(0.0))
}

/// Equal-width bins over `[lo, hi]`. Bins are left-closed/right-open except
/// the last, which is closed; out-of-range values are clamped into the end
/// bins.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HistogramGrid {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for HistogramGrid {
    /// 101 bins over `[-1, 1]`; the odd count centers a bin on zero.
    fn default() -> Self {
        Self {
            bins: 101,
            lo: -1.0,
            hi: 1.0,
        }
    }
}

impl HistogramGrid {
    pub fn new(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        let grid = Self { bins, lo, hi };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "degenerate histogram range [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn edges(&self) -> Vec<f64> {
        let width = (self.hi - self.lo) / self.bins as f64;
        (0..=self.bins)
            .map(|i| {
                if i == self.bins {
                    self.hi
                } else {
                    self.lo + i as f64 * width
                }
            })
            .collect()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        if x.is_nan() || x <= self.lo {
            return 0;
        }
        if x >= self.hi {
            return self.bins - 1;
        }
        let t = (x - self.lo) / (self.hi - self.lo) * self.bins as f64;
        (t.floor() as usize).min(self.bins - 1)
    }

    /// Index of the bin containing zero (or the nearest end bin).
    pub fn central_bin(&self) -> usize {
        self.bin_of(0.0)
    }

    pub fn counts<'a>(&self, values: impl IntoIterator<Item = &'a f64>) -> Vec<u64> {
        let mut counts = vec![0u64; self.bins];
        for &x in values {
            counts[self.bin_of(x)] += 1;
        }
        counts
    }
}

/// Histogram counts of every entry of `w` over `bins` equal-width bins on
/// `[lo, hi]`.
pub fn weight_histogram(w: &Array2<f64>, bins: usize, lo: f64, hi: f64) -> Result<Vec<u64>> {
    let grid = HistogramGrid::new(bins, lo, hi)?;
    Ok(grid.counts(w.iter()))
}

/// JSD (bits) between two count vectors on the same bin grid, each first
/// normalized to a [`Distribution`].
pub fn histogram_divergence(h1: &[u64], h2: &[u64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch {
            context: "histogram divergence",
            expected: h1.len(),
            actual: h2.len(),
        });
    }
    let p = Distribution::from_counts(h1)?;
    let q = Distribution::from_counts(h2)?;
    jsd(&p, &q, BITS)
}

/// Histogram rows of one weight matrix recorded over training iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightHistory {
    grid: HistogramGrid,
    stamps: Vec<usize>,
    counts: Vec<Vec<u64>>,
    entries: u64,
}

impl WeightHistory {
    pub fn new(grid: HistogramGrid) -> Result<Self> {
        grid.validate()?;
        Ok(Self {
            grid,
            stamps: Vec::new(),
            counts: Vec::new(),
            entries: 0,
        })
    }

    pub fn record(&mut self, iteration: usize, w: &Array2<f64>) {
        if self.stamps.last() == Some(&iteration) {
            return;
        }
        self.entries = w.len() as u64;
        self.stamps.push(iteration);
        self.counts.push(self.grid.counts(w.iter()));
    }

    pub fn grid(&self) -> HistogramGrid {
        self.grid
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        self.grid.edges()
    }

    pub fn iteration_stamps(&self) -> &[usize] {
        &self.stamps
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Number of matrix entries behind each row.
    pub fn entries(&self) -> u64 {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn first(&self) -> Option<&[u64]> {
        self.counts.first().map(Vec::as_slice)
    }

    pub fn last(&self) -> Option<&[u64]> {
        self.counts.last().map(Vec::as_slice)
    }

    /// One row per iteration stamp: `iteration,bin_0,…,bin_{B-1}`. The header
    /// names each bin by its lower edge.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let edges = self.grid.edges();
        let mut header = vec!["iteration".to_string()];
        header.extend(edges.windows(2).map(|e| {
            format!(
                "[{:.6},{:.6}{}",
                e[0],
                e[1],
                if e[1] == self.grid.hi { "]" } else { ")" }
            )
        }));
        w.write_record(&header)?;
        for (stamp, row) in self.stamps.iter().zip(&self.counts) {
            let mut rec = vec![stamp.to_string()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Magnitude of the 2D discrete Fourier transform of `w`, with the
/// zero-frequency cell shifted to the center (index `(rows/2, cols/2)`).
pub fn spectrum2d(w: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = w.dim();
    if rows == 0 || cols == 0 {
        return Array2::zeros((rows, cols));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut data: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();

    let row_fft = planner.plan_fft_forward(cols);
    for row in data.chunks_exact_mut(cols) {
        row_fft.process(row);
    }

    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }

    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let sr = (r + rows / 2) % rows;
            let sc = (c + cols / 2) % cols;
            out[[sr, sc]] = data[r * cols + c].norm();
        }
    }
    out
}
