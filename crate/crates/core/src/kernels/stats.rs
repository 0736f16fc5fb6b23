//! Query–key distance distributions.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_NUM_BINS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMetric {
    L1,
    L2Squared,
}

impl DistanceMetric {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMetric::L1 => "l1",
            DistanceMetric::L2Squared => "l2_squared",
        }
    }

    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        match self {
            DistanceMetric::L1 => x.iter().zip(y).map(|(&a, &b)| (a - b).abs()).sum(),
            DistanceMetric::L2Squared => x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

/// Histogram and the first four standardized moments of all pairwise
/// distances. Variance is the population variance; skewness and excess
/// kurtosis are reported as 0 when the variance is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceStats {
    pub metric: DistanceMetric,
    pub bins: Vec<HistogramBin>,
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Running central moments (Pébay's one-pass update).
#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }
}

pub fn distance_stats<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    metric: DistanceMetric,
    num_bins: usize,
) -> Result<DistanceStats> {
    if q.cols() != k.cols() {
        return Err(Error::shape("distance_stats", q.shape(), k.shape()));
    }
    if num_bins == 0 {
        return Err(Error::contract("num_bins must be >= 1"));
    }

    let mut distances = Vec::with_capacity(q.rows() * k.rows());
    let mut moments = Moments::default();
    for qi in q.row_iter() {
        for kj in k.row_iter() {
            let d = metric.eval(qi, kj).as_f64();
            moments.push(d);
            distances.push(d);
        }
    }

    let lo = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / num_bins as f64;
    let mut bins: Vec<HistogramBin> = (0..num_bins)
        .map(|b| HistogramBin {
            lower: lo + b as f64 * width,
            upper: if b + 1 == num_bins { hi } else { lo + (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for &d in &distances {
        let idx = if width > 0.0 {
            (((d - lo) / width) as usize).min(num_bins - 1)
        } else {
            0
        };
        bins[idx].count += 1;
    }

    let n = moments.n;
    let variance = moments.m2 / n;
    let (skewness, excess_kurtosis) = if variance > 0.0 {
        (
            (moments.m3 / n) / variance.powf(1.5),
            (moments.m4 / n) / (variance * variance) - 3.0,
        )
    } else {
        (0.0, 0.0)
    };

    Ok(DistanceStats {
        metric,
        bins,
        count: distances.len() as u64,
        mean: moments.mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}

impl DistanceStats {
    /// `bin_lower,bin_upper,count` rows followed by a
    /// `# moments: mean,var,skew,kurt` footer carrying the values.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lower,bin_upper,count\n");
        for b in &self.bins {
            let _ = writeln!(s, "{},{},{}", b.lower, b.upper, b.count);
        }
        let _ = writeln!(
            s,
            "# moments: {},{},{},{}",
            self.mean, self.variance, self.skewness, self.excess_kurtosis
        );
        s
    }
}
