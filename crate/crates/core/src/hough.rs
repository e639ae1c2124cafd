//! Standard `(rho, theta)` Hough voting and the per-orientation energy
//! signature derived from it.

use std::f64::consts::PI;

use thiserror::Error;

use crate::image::BinaryImage;

pub const DEFAULT_THETA_BINS: usize = 180;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HoughError {
    #[error("theta_bins must be at least 2, got {0}")]
    TooFewThetaBins(usize),
}

/// Vote table indexed by `[theta_bin][rho_bin]`.
///
/// Theta bin `j` covers angle `j * PI / theta_bins`; rho bin `r` is the
/// signed distance `r - rho_max` in pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoughAccumulator {
    theta_bins: usize,
    rho_max: usize,
    counts: Vec<u32>,
}

impl HoughAccumulator {
    pub fn theta_bins(&self) -> usize {
        self.theta_bins
    }

    pub fn rho_bins(&self) -> usize {
        2 * self.rho_max + 1
    }

    pub fn rho_max(&self) -> usize {
        self.rho_max
    }

    pub fn count(&self, theta_bin: usize, rho_bin: usize) -> u32 {
        self.counts[theta_bin * self.rho_bins() + rho_bin]
    }

    /// One row of the table: every rho bin for a single theta.
    pub fn column(&self, theta_bin: usize) -> &[u32] {
        let r = self.rho_bins();
        &self.counts[theta_bin * r..(theta_bin + 1) * r]
    }

    pub fn total_votes(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Builds an accumulator from explicit counts, mainly for tests.
    pub fn from_counts(theta_bins: usize, rho_max: usize, counts: Vec<u32>) -> Option<Self> {
        (theta_bins >= 1 && counts.len() == theta_bins * (2 * rho_max + 1)).then_some(Self {
            theta_bins,
            rho_max,
            counts,
        })
    }
}

/// Angle of theta bin `j` in radians.
pub fn theta_of_bin(j: usize, theta_bins: usize) -> f64 {
    j as f64 * PI / theta_bins as f64
}

/// Smallest integer not below the image diagonal.
pub fn rho_max_for(width: usize, height: usize) -> usize {
    ((width * width + height * height) as f64).sqrt().ceil() as usize
}

/// `t.round()` for `0 <= t < 2^31`, branch-free so callers vectorize.
///
/// Adding 2^52 leaves an ulp of 1, so the sum is `t` rounded to the nearest
/// integer with ties to even, and its low mantissa bits hold that integer.
/// An exact half that went down to the even neighbour is bumped back up.
#[inline]
fn round_positive(t: f64) -> u32 {
    const SHIFT: f64 = 4_503_599_627_370_496.0;
    let m = t + SHIFT;
    m.to_bits() as u32 + u32::from(t - (m - SHIFT) == 0.5)
}

/// Votes every foreground pixel into every theta bin.
///
/// The origin is the top-left pixel, x grows rightward and y downward;
/// `rho = x cos(theta) + y sin(theta)` is rounded to the nearest bin.
pub fn hough_transform(bin: &BinaryImage, theta_bins: usize) -> Result<HoughAccumulator, HoughError> {
    if theta_bins < 2 {
        return Err(HoughError::TooFewThetaBins(theta_bins));
    }
    let rho_max = rho_max_for(bin.width(), bin.height());
    let rho_bins = 2 * rho_max + 1;
    // foreground x coordinates grouped by row
    let rows: Vec<(f64, Vec<f64>)> = (0..bin.height())
        .map(|y| {
            let xs = (0..bin.width())
                .filter(|&x| bin.get(x, y))
                .map(|x| x as f64)
                .collect::<Vec<_>>();
            (y as f64, xs)
        })
        .filter(|(_, xs)| !xs.is_empty())
        .collect();
    let offset = rho_max as f64;
    let mut counts = vec![0u32; theta_bins * rho_bins];
    let mut bins = vec![0u32; bin.width()];
    // Consecutive pixels of a line usually land in the same bin; spreading
    // them over four partial rows avoids serializing on one counter.
    let mut lanes = vec![0u32; 4 * rho_bins];
    for (j, row) in counts.chunks_exact_mut(rho_bins).enumerate() {
        let (s, c) = theta_of_bin(j, theta_bins).sin_cos();
        for (y, xs) in &rows {
            let ys = y * s;
            let bins = &mut bins[..xs.len()];
            // t > 0 because rho >= -(width - 1) > -rho_max
            for (b, &x) in bins.iter_mut().zip(xs) {
                *b = round_positive(x * c + ys + offset);
            }
            for (k, &r) in bins.iter().enumerate() {
                lanes[4 * r as usize + (k & 3)] += 1;
            }
        }
        for (cell, lane) in row.iter_mut().zip(lanes.chunks_exact_mut(4)) {
            *cell = lane.iter().sum();
            lane.fill(0);
        }
    }
    Ok(HoughAccumulator {
        theta_bins,
        rho_max,
        counts,
    })
}

/// Collinearity energy per orientation: `values[j] = sum_r counts[j][r]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionDensity {
    values: Vec<f64>,
}

impl DirectionDensity {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV with one `theta_degrees,value` line per bin.
    pub fn to_csv(&self) -> String {
        let n = self.values.len();
        let mut out = String::new();
        for (j, v) in self.values.iter().enumerate() {
            let deg = j as f64 * 180.0 / n as f64;
            out.push_str(&format!("{deg},{v}\n"));
        }
        out
    }
}

/// Sums squared counts per theta column. The sum is exact in `u64` before
/// conversion.
pub fn direction_density(acc: &HoughAccumulator) -> DirectionDensity {
    let values = (0..acc.theta_bins)
        .map(|j| acc.column(j).iter().map(|&c| u64::from(c) * u64::from(c)).sum::<u64>() as f64)
        .collect();
    DirectionDensity { values }
}
