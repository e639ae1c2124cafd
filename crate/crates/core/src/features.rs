//! Statistical summary of a direction-density signature.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hough::DirectionDensity;

/// Number of values in a [`FeatureVector`].
pub const FEATURE_DIM: usize = 12;

/// Field order of a [`FeatureVector`], recorded in model files.
pub const FEATURE_ORDER: &str = "a.mean,a.min_value,a.min_pos,a.max_value,a.max_pos,a.std_dev,\
b.mean,b.min_value,b.min_pos,b.max_value,b.max_pos,b.std_dev";

/// How extremum positions are scaled, recorded in model files.
pub const POSITION_NORMALIZATION: &str = "theta_bin_index / (theta_bins - 1)";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("direction density is empty")]
    EmptyDensity,
}

/// Six statistics of one camera view's density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewFeatures {
    pub mean: f64,
    pub min_value: f64,
    /// Index of the first minimum divided by `len - 1`.
    pub min_pos: f64,
    pub max_value: f64,
    /// Index of the first maximum divided by `len - 1`.
    pub max_pos: f64,
    /// Population standard deviation.
    pub std_dev: f64,
}

impl ViewFeatures {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.mean,
            self.min_value,
            self.min_pos,
            self.max_value,
            self.max_pos,
            self.std_dev,
        ]
    }
}

/// Classifier input: view A's six statistics followed by view B's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_DIM] {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Exchanges the A and B halves.
    pub fn swapped(&self) -> Self {
        let mut out = [0.0; FEATURE_DIM];
        out[..6].copy_from_slice(&self.0[6..]);
        out[6..].copy_from_slice(&self.0[..6]);
        Self(out)
    }
}

impl From<[f64; FEATURE_DIM]> for FeatureVector {
    fn from(values: [f64; FEATURE_DIM]) -> Self {
        Self(values)
    }
}

pub fn extract_features(dd: &DirectionDensity) -> Result<ViewFeatures, FeatureError> {
    let v = dd.values();
    if v.is_empty() {
        return Err(FeatureError::EmptyDensity);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;

    let (mut min_i, mut max_i) = (0, 0);
    for (i, &x) in v.iter().enumerate() {
        if x < v[min_i] {
            min_i = i;
        }
        if x > v[max_i] {
            max_i = i;
        }
    }
    let scale = if v.len() > 1 { (v.len() - 1) as f64 } else { 1.0 };

    // Rounding can push the mean a hair outside [min, max] on constant input.
    let mean = mean.clamp(v[min_i], v[max_i]);
    Ok(ViewFeatures {
        mean,
        min_value: v[min_i],
        min_pos: min_i as f64 / scale,
        max_value: v[max_i],
        max_pos: max_i as f64 / scale,
        std_dev: if v[min_i] == v[max_i] { 0.0 } else { var.sqrt() },
    })
}

pub fn combine(a: &ViewFeatures, b: &ViewFeatures) -> FeatureVector {
    let mut out = [0.0; FEATURE_DIM];
    out[..6].copy_from_slice(&a.to_array());
    out[6..].copy_from_slice(&b.to_array());
    FeatureVector(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dd(v: &[f64]) -> DirectionDensity {
        DirectionDensity::new(v.to_vec())
    }

    /// Two-pass reference with explicit index scans.
    fn reference(v: &[f64]) -> [f64; 6] {
        let mut total = 0.0;
        for x in v {
            total += x;
        }
        let mean = total / v.len() as f64;
        let mut ss = 0.0;
        for x in v {
            ss += (x - mean).powi(2);
        }
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_i = v.iter().position(|&x| x == min).unwrap();
        let max_i = v.iter().position(|&x| x == max).unwrap();
        let d = (v.len() - 1) as f64;
        [
            mean,
            min,
            min_i as f64 / d,
            max,
            max_i as f64 / d,
            (ss / v.len() as f64).sqrt(),
        ]
    }

    #[test]
    fn three_values() {
        let f = extract_features(&dd(&[1.0, 2.0, 3.0])).unwrap();
        assert!((f.mean - 2.0).abs() < 1e-12);
        assert_eq!((f.min_value, f.min_pos), (1.0, 0.0));
        assert_eq!((f.max_value, f.max_pos), (3.0, 1.0));
        assert!((f.std_dev - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_density_ties_to_first_index() {
        let f = extract_features(&dd(&[5.0; 4])).unwrap();
        assert_eq!(f.to_array(), [5.0, 5.0, 0.0, 5.0, 0.0, 0.0]);
    }

    #[test]
    fn single_bin_positions_are_zero() {
        let f = extract_features(&dd(&[7.0])).unwrap();
        assert_eq!(f.to_array(), [7.0, 7.0, 0.0, 7.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_density_is_an_error() {
        assert_eq!(extract_features(&dd(&[])), Err(FeatureError::EmptyDensity));
    }

    #[test]
    fn matches_reference_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let v: Vec<f64> = (0..180).map(|_| rng.random_range(0.0..1e6)).collect();
            let got = extract_features(&dd(&v)).unwrap().to_array();
            let want = reference(&v);
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn combine_orders_views() {
        let a = extract_features(&dd(&[1.0, 2.0, 3.0])).unwrap();
        let b = extract_features(&dd(&[9.0, 0.0, 4.0, 4.0])).unwrap();
        let ab = combine(&a, &b);
        assert_eq!(&ab.values()[..6], &a.to_array());
        assert_eq!(&ab.values()[6..], &b.to_array());
        assert_eq!(combine(&b, &a), ab.swapped());
        let aa = combine(&a, &a);
        assert_eq!(aa.values()[..6], aa.values()[6..]);
    }

    proptest! {
        #[test]
        fn ordering_and_range(v in proptest::collection::vec(0.0f64..1e9, 1..200)) {
            let f = extract_features(&dd(&v)).unwrap();
            prop_assert!(f.min_value <= f.mean && f.mean <= f.max_value);
            prop_assert!(f.std_dev >= 0.0);
            prop_assert!((0.0..=1.0).contains(&f.min_pos) && (0.0..=1.0).contains(&f.max_pos));
            let all_equal = v.iter().all(|&x| x == v[0]);
            prop_assert_eq!(f.std_dev == 0.0, all_equal);
        }

        #[test]
        fn scale_equivariance(v in proptest::collection::vec(0.0f64..1e6, 2..100), c in 0.01f64..100.0) {
            let f = extract_features(&dd(&v)).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let g = extract_features(&dd(&scaled)).unwrap();
            let tol = |x: f64| 1e-9 * (x * c).abs().max(1.0);
            prop_assert!((g.mean - c * f.mean).abs() <= tol(f.mean));
            prop_assert!((g.min_value - c * f.min_value).abs() <= tol(f.min_value));
            prop_assert!((g.max_value - c * f.max_value).abs() <= tol(f.max_value));
            prop_assert!((g.std_dev - c * f.std_dev).abs() <= tol(f.std_dev.max(f.mean)));
            // products can collapse near-ties, so compare positions only when extrema are strict
            let strict = |vals: &[f64], i: usize| vals.iter().enumerate().all(|(j, &x)| j == i || x != vals[i]);
            let min_i = (f.min_pos * (v.len() - 1) as f64).round() as usize;
            let max_i = (f.max_pos * (v.len() - 1) as f64).round() as usize;
            if strict(&scaled, min_i) {
                prop_assert_eq!(g.min_pos, f.min_pos);
            }
            if strict(&scaled, max_i) {
                prop_assert_eq!(g.max_pos, f.max_pos);
            }
        }

        #[test]
        fn positions_survive_monotone_transforms(v in proptest::collection::vec(0.0f64..1e3, 2..100)) {
            let f = extract_features(&dd(&v)).unwrap();
            let t: Vec<f64> = v.iter().map(|x| (x + 1.0).ln() * 3.0 + x).collect();
            let g = extract_features(&dd(&t)).unwrap();
            prop_assert_eq!(g.min_pos, f.min_pos);
            prop_assert_eq!(g.max_pos, f.max_pos);
        }
    }
}
