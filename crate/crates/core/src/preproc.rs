//! Denoising, contour extraction, binarization and thinning.
//!
//! The chain turns a camera frame into a one-pixel-wide skeleton:
//! Gaussian blur, 4-neighbour Laplacian magnitude, Otsu (or fixed)
//! threshold, then Zhang-Suen thinning. Every stage replicates edge pixels
//! at the border.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{BinaryImage, GrayImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocError {
    #[error("gaussian sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("gaussian radius must be at least 1, got {0}")]
    BadRadius(usize),
    #[error("image {width}x{height} is smaller than the {needed}x{needed} kernel")]
    ImageTooSmall { width: usize, height: usize, needed: usize },
}

/// A square, odd-sized filter kernel stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel from row-major weights; `size` must be odd.
    pub fn new(size: usize, weights: Vec<f64>) -> Option<Self> {
        (size % 2 == 1 && weights.len() == size * size).then_some(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at row `i`, column `j`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeMethod {
    #[default]
    Otsu,
    Fixed,
}

impl std::str::FromStr for BinarizeMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "otsu" => Ok(Self::Otsu),
            "fixed" => Ok(Self::Fixed),
            other => Err(format!("unknown binarize method {other:?} (expected otsu or fixed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocConfig {
    pub gaussian_sigma: f64,
    pub gaussian_radius: usize,
    pub binarize_method: BinarizeMethod,
    pub fixed_threshold: u8,
    /// Omits the Gaussian stage. Used to measure the effect of denoising.
    pub skip_noise_filter: bool,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            gaussian_sigma: 1.0,
            gaussian_radius: 2,
            binarize_method: BinarizeMethod::Otsu,
            fixed_threshold: 128,
            skip_noise_filter: false,
        }
    }
}

/// Normalized isotropic Gaussian of side `2 * radius + 1`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel, PreprocError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(PreprocError::BadSigma(sigma));
    }
    if radius < 1 {
        return Err(PreprocError::BadRadius(radius));
    }
    let size = 2 * radius + 1;
    let r = radius as i64;
    let two_s2 = 2.0 * sigma * sigma;
    let mut weights = Vec::with_capacity(size * size);
    for di in -r..=r {
        for dj in -r..=r {
            weights.push((-((di * di + dj * dj) as f64) / two_s2).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Kernel { size, weights })
}

/// Correlates `img` with `k`, replicating border pixels. Results are rounded
/// to the nearest integer and clamped to `0..=255`.
pub fn convolve(img: &GrayImage, k: &Kernel) -> Result<GrayImage, PreprocError> {
    let (w, h) = (img.width(), img.height());
    if w < k.size || h < k.size {
        return Err(PreprocError::ImageTooSmall {
            width: w,
            height: h,
            needed: k.size,
        });
    }
    let r = k.radius();
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    // edge-replicated copy, widened to f64 once
    let mut padded = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let row = img.data()[(py.saturating_sub(r)).min(h - 1) * w..][..w].to_vec();
        padded.extend((0..pw).map(|px| f64::from(row[px.saturating_sub(r).min(w - 1)])));
    }
    let mut out = vec![0u8; w * h];
    let mut acc = vec![0.0f64; w];
    for (y, out_row) in out.chunks_exact_mut(w).enumerate() {
        acc.fill(0.0);
        // taps in row-major order, so each pixel sums its terms in the same
        // sequence as a direct per-pixel loop
        for (i, kw) in k.weights.chunks_exact(k.size).enumerate() {
            let line = &padded[(y + i) * pw..][..pw];
            for (j, &wt) in kw.iter().enumerate() {
                for (a, v) in acc.iter_mut().zip(&line[j..j + w]) {
                    *a += wt * v;
                }
            }
        }
        for (o, a) in out_row.iter_mut().zip(&acc) {
            *o = a.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(GrayImage::from_vec(w, h, out).expect("dimensions preserved"))
}

/// Absolute 4-neighbour Laplacian (`4c - n - s - e - w`), clamped to 255.
pub fn laplacian(img: &GrayImage) -> Result<GrayImage, PreprocError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(PreprocError::ImageTooSmall {
            width: w,
            height: h,
            needed: 3,
        });
    }
    let src = img.data();
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            let c = i32::from(src[y * w + x]);
            let v = 4 * c
                - i32::from(src[up * w + x])
                - i32::from(src[down * w + x])
                - i32::from(src[y * w + left])
                - i32::from(src[y * w + right]);
            out[y * w + x] = v.unsigned_abs().min(255) as u8;
        }
    }
    Ok(GrayImage::from_vec(w, h, out).expect("dimensions preserved"))
}

/// Otsu threshold over the 256-bin histogram.
///
/// Pixels `>= t` form the foreground class. The score compared between
/// candidates is `(s0*n1 - s1*n0)^2 / (n0*n1)`, proportional to the
/// between-class variance, evaluated exactly in integers; ties resolve to
/// the smallest `t`. Returns `None` when no threshold separates two
/// non-empty classes with positive score (a single-valued image).
pub fn otsu_threshold(img: &GrayImage) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let total_n: u64 = hist.iter().sum();
    let total_s: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut best: Option<(u8, u128, u128)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 0..256usize {
        // class 0 is every value strictly below t
        if t > 0 {
            n0 += hist[t - 1];
            s0 += (t as u64 - 1) * hist[t - 1];
        }
        let n1 = total_n - n0;
        let s1 = total_s - s0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = i128::from(s0 as i64) * i128::from(n1 as i64) - i128::from(s1 as i64) * i128::from(n0 as i64);
        let num = (diff * diff) as u128;
        let den = u128::from(n0) * u128::from(n1);
        if num == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}

pub fn binarize(img: &GrayImage, cfg: &PreprocConfig) -> BinaryImage {
    let threshold = match cfg.binarize_method {
        BinarizeMethod::Otsu => otsu_threshold(img),
        BinarizeMethod::Fixed => Some(cfg.fixed_threshold),
    };
    let data = match threshold {
        Some(t) => img.data().iter().map(|&v| u8::from(v >= t)).collect(),
        None => vec![0; img.data().len()],
    };
    BinaryImage::from_vec(img.width(), img.height(), data).expect("dimensions preserved")
}

/// Neighbour offsets P2..P9, clockwise from north.
const NEIGHBOURS: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Binary raster with a one-pixel background frame, so every real pixel
/// has eight addressable neighbours.
struct Padded {
    stride: usize,
    cells: Vec<u8>,
    /// Offsets of P2..P9 relative to a cell index.
    ring: [isize; 8],
}

impl Padded {
    fn new(img: &BinaryImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 2;
        let mut cells = vec![0u8; stride * (h + 2)];
        for (y, row) in img.data().chunks_exact(w).enumerate() {
            let start = (y + 1) * stride + 1;
            cells[start..start + w].copy_from_slice(row);
        }
        let s = stride as isize;
        let ring = NEIGHBOURS.map(|(dx, dy)| dy * s + dx);
        Self { stride, cells, ring }
    }

    /// Indices of foreground cells in raster order.
    fn foreground(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.cells[i] != 0).collect()
    }

    /// Neighbour bits, P2 in bit 0 through P9 in bit 7.
    fn mask(&self, i: usize) -> u8 {
        let mut m = 0u8;
        for (bit, &off) in self.ring.iter().enumerate() {
            m |= self.cells[(i as isize + off) as usize] << bit;
        }
        m
    }

    fn into_image(self, w: usize, h: usize) -> BinaryImage {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let start = (y + 1) * self.stride + 1;
            data.extend_from_slice(&self.cells[start..start + w]);
        }
        BinaryImage::from_vec(w, h, data).expect("dimensions preserved")
    }
}

fn unpack(mask: u8) -> [bool; 8] {
    std::array::from_fn(|i| mask >> i & 1 == 1)
}

/// Count of background-to-foreground transitions around the ring P2..P9,P2.
fn transitions(n: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count()
}

fn zhang_suen_deletable(n: &[bool; 8], first: bool) -> bool {
    let count = n.iter().filter(|&&b| b).count();
    if !(2..=6).contains(&count) || transitions(n) != 1 {
        return false;
    }
    // indices: 0=P2(N) 2=P4(E) 4=P6(S) 6=P8(W)
    let (c1, c2) = if first {
        (n[0] && n[2] && n[4], n[2] && n[4] && n[6])
    } else {
        (n[0] && n[2] && n[6], n[0] && n[4] && n[6])
    };
    !c1 && !c2
}

/// 8-connectivity crossing number (Yokoi). A pixel whose value is 1 can be
/// removed without changing the 8-connected topology.
fn connectivity_number(n: &[bool; 8]) -> usize {
    // Yokoi indexes from east counter-clockwise; the formula only needs a
    // consistent ring order, so the P2..P9 ring works with 4-neighbours at
    // even indices.
    let bg = |i: usize| !n[i % 8];
    [0usize, 2, 4, 6]
        .iter()
        .filter(|&&k| bg(k) && !(bg(k + 1) && bg(k + 2)))
        .count()
}

fn table(f: impl Fn(&[bool; 8]) -> bool) -> [bool; 256] {
    std::array::from_fn(|m| f(&unpack(m as u8)))
}

/// One Zhang-Suen subiteration over the candidate cells. Deleted cells are
/// dropped from `fg`; returns how many were deleted.
fn zhang_suen_pass(img: &mut Padded, fg: &mut Vec<usize>, deletable: &[bool; 256]) -> usize {
    let marked: Vec<usize> = fg
        .iter()
        .copied()
        .filter(|&i| deletable[img.mask(i) as usize])
        .collect();
    for &i in &marked {
        img.cells[i] = 0;
    }
    fg.retain(|&i| img.cells[i] != 0);
    marked.len()
}

/// Removes one pixel from every remaining 2x2 all-foreground block, scanning
/// blocks by their top-left corner in raster order.
///
/// Within a block the first pixel (top-left, top-right, bottom-left,
/// bottom-right) whose deletion keeps the 8-connected topology is removed;
/// if none qualifies the top-left pixel goes. Returns the deletion count.
fn break_square_blocks(img: &mut Padded, fg: &mut Vec<usize>, simple: &[bool; 256]) -> usize {
    let stride = img.stride;
    let mut removed = 0;
    for &i in fg.iter() {
        let block = [i, i + 1, i + stride, i + stride + 1];
        if block.iter().any(|&b| img.cells[b] == 0) {
            continue;
        }
        let victim = block.into_iter().find(|&b| simple[img.mask(b) as usize]).unwrap_or(i);
        img.cells[victim] = 0;
        removed += 1;
    }
    if removed > 0 {
        fg.retain(|&i| img.cells[i] != 0);
    }
    removed
}

/// Zhang-Suen thinning to a one-pixel-wide skeleton.
///
/// Subiteration pairs run until a full pass deletes nothing. Any 2x2 block
/// that survives (Zhang-Suen keeps some junction squares) is then broken,
/// and the whole procedure repeats until both steps are stable, so the
/// result is a fixed point: `thin(thin(b)) == thin(b)`.
pub fn thin(bin: &BinaryImage) -> BinaryImage {
    let first = table(|n| zhang_suen_deletable(n, true));
    let second = table(|n| zhang_suen_deletable(n, false));
    let simple = table(|n| connectivity_number(n) == 1);

    let mut img = Padded::new(bin);
    let mut fg = img.foreground();
    loop {
        loop {
            let deleted = zhang_suen_pass(&mut img, &mut fg, &first) + zhang_suen_pass(&mut img, &mut fg, &second);
            if deleted == 0 {
                break;
            }
        }
        if break_square_blocks(&mut img, &mut fg, &simple) == 0 {
            break;
        }
    }
    img.into_image(bin.width(), bin.height())
}

/// Full chain: optional Gaussian, Laplacian, binarization, thinning.
pub fn preprocess(img: &GrayImage, cfg: &PreprocConfig) -> Result<BinaryImage, PreprocError> {
    let smoothed;
    let source = if cfg.skip_noise_filter {
        img
    } else {
        let k = gaussian_kernel(cfg.gaussian_sigma, cfg.gaussian_radius)?;
        smoothed = convolve(img, &k)?;
        &smoothed
    };
    let edges = laplacian(source)?;
    Ok(thin(&binarize(&edges, cfg)))
}

/// True when some 2x2 window is entirely foreground.
pub fn has_square_block(img: &BinaryImage) -> bool {
    let (w, h) = (img.width(), img.height());
    (0..h.saturating_sub(1)).any(|y| {
        (0..w.saturating_sub(1))
            .any(|x| img.get(x, y) && img.get(x + 1, y) && img.get(x, y + 1) && img.get(x + 1, y + 1))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gray(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random()).unwrap()
    }

    /// Direct per-pixel thinning: mark-then-delete Zhang-Suen subiterations
    /// and an in-place square-breaking scan, reading neighbours through
    /// bounds-checked accessors.
    fn reference_thin(bin: &BinaryImage) -> BinaryImage {
        let ring = |img: &BinaryImage, x: usize, y: usize| -> [bool; 8] {
            NEIGHBOURS.map(|(dx, dy)| img.get_or_background(x as isize + dx, y as isize + dy))
        };
        let mut img = bin.clone();
        loop {
            loop {
                let mut deleted = 0;
                for first in [true, false] {
                    let mut marked = Vec::new();
                    for y in 0..img.height() {
                        for x in 0..img.width() {
                            if img.get(x, y) && zhang_suen_deletable(&ring(&img, x, y), first) {
                                marked.push((x, y));
                            }
                        }
                    }
                    for &(x, y) in &marked {
                        img.set(x, y, false);
                    }
                    deleted += marked.len();
                }
                if deleted == 0 {
                    break;
                }
            }
            let mut removed = 0;
            for y in 0..img.height() - 1 {
                for x in 0..img.width() - 1 {
                    let block = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)];
                    if block.iter().all(|&(bx, by)| img.get(bx, by)) {
                        let (vx, vy) = block
                            .into_iter()
                            .find(|&(bx, by)| connectivity_number(&ring(&img, bx, by)) == 1)
                            .unwrap_or((x, y));
                        img.set(vx, vy, false);
                        removed += 1;
                    }
                }
            }
            if removed == 0 {
                return img;
            }
        }
    }

    #[test]
    fn thin_matches_reference_on_random_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for round in 0..60 {
            let (w, h) = (rng.random_range(2..40), rng.random_range(2..40));
            let density = rng.random_range(0.2..0.9);
            let b = BinaryImage::from_fn(w, h, |_, _| rng.random_bool(density)).unwrap();
            assert_eq!(thin(&b), reference_thin(&b), "round {round} ({w}x{h})");
        }
    }

    /// Quadruple-loop correlation with clamp-to-edge.
    fn reference_convolve(img: &GrayImage, k: &Kernel) -> GrayImage {
        let r = k.radius() as isize;
        GrayImage::from_fn(img.width(), img.height(), |x, y| {
            let mut acc = 0.0;
            for i in 0..k.size() {
                for j in 0..k.size() {
                    let sx = x as isize + j as isize - r;
                    let sy = y as isize + i as isize - r;
                    acc += k.at(i, j) * f64::from(img.get_clamped(sx, sy));
                }
            }
            acc.round().clamp(0.0, 255.0) as u8
        })
        .unwrap()
    }

    #[test]
    fn gaussian_weights_are_normalized() {
        for (sigma, radius) in [(0.5, 1), (1.0, 2), (2.3, 4), (10.0, 3)] {
            let k = gaussian_kernel(sigma, radius).unwrap();
            let sum: f64 = k.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(k.weights().iter().all(|&w| w > 0.0));
            assert_eq!(k.size(), 2 * radius + 1);
        }
    }

    #[test]
    fn gaussian_is_isotropic() {
        let k = gaussian_kernel(1.7, 3).unwrap();
        let n = k.size();
        for i in 0..n {
            for j in 0..n {
                let w = k.at(i, j);
                assert_eq!(w, k.at(j, n - 1 - i), "rotation");
                assert_eq!(w, k.at(i, n - 1 - j), "reflection");
                assert_eq!(w, k.at(j, i), "transpose");
            }
        }
    }

    #[test]
    fn gaussian_center_to_corner_ratio() {
        let k = gaussian_kernel(1.0, 1).unwrap();
        let ratio = k.at(1, 1) / k.at(0, 0);
        assert!((ratio - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_rejects_bad_parameters() {
        assert_eq!(gaussian_kernel(0.0, 2), Err(PreprocError::BadSigma(0.0)));
        assert!(gaussian_kernel(-1.0, 2).is_err());
        assert!(gaussian_kernel(f64::NAN, 2).is_err());
        assert_eq!(gaussian_kernel(1.0, 0), Err(PreprocError::BadRadius(0)));
    }

    #[test]
    fn convolve_preserves_constants() {
        let img = GrayImage::filled(9, 7, 128).unwrap();
        let k = gaussian_kernel(1.3, 2).unwrap();
        assert_eq!(convolve(&img, &k).unwrap(), img);
    }

    #[test]
    fn convolve_impulse_response_is_kernel() {
        let mut img = GrayImage::filled(11, 11, 0).unwrap();
        img.set(5, 5, 255);
        let k = gaussian_kernel(1.0, 2).unwrap();
        let out = convolve(&img, &k).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = (255.0 * k.at(i, j)).round() as u8;
                assert_eq!(out.get(3 + j, 3 + i), expected);
            }
        }
    }

    #[test]
    fn convolve_matches_reference() {
        for seed in 0..8 {
            let img = random_gray(32, 32, seed);
            for (sigma, radius) in [(1.0, 2), (0.7, 1), (2.0, 3)] {
                let k = gaussian_kernel(sigma, radius).unwrap();
                assert_eq!(convolve(&img, &k).unwrap(), reference_convolve(&img, &k));
            }
        }
        let img = random_gray(13, 5, 99);
        let k = gaussian_kernel(1.0, 2).unwrap();
        assert_eq!(convolve(&img, &k).unwrap(), reference_convolve(&img, &k));
    }

    #[test]
    fn convolve_rejects_small_images() {
        let img = GrayImage::filled(4, 10, 0).unwrap();
        let k = gaussian_kernel(1.0, 2).unwrap();
        assert!(matches!(
            convolve(&img, &k),
            Err(PreprocError::ImageTooSmall { needed: 5, .. })
        ));
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let img = GrayImage::filled(8, 8, 77).unwrap();
        assert!(laplacian(&img).unwrap().data().iter().all(|&v| v == 0));
    }

    #[test]
    fn laplacian_of_ramp_vanishes_inside() {
        let img = GrayImage::from_fn(40, 6, |x, _| x as u8).unwrap();
        let out = laplacian(&img).unwrap();
        for y in 0..6 {
            for x in 1..39 {
                assert_eq!(out.get(x, y), 0);
            }
        }
    }

    #[test]
    fn laplacian_of_step() {
        let img = GrayImage::from_fn(32, 8, |x, _| if x < 16 { 0 } else { 200 }).unwrap();
        let out = laplacian(&img).unwrap();
        for y in 0..8 {
            for x in 0..32 {
                let expected = if x == 15 || x == 16 { 200 } else { 0 };
                assert_eq!(out.get(x, y), expected, "({x},{y})");
            }
        }
    }

    #[test]
    fn laplacian_is_translation_equivariant_inside() {
        let base = random_gray(20, 20, 5);
        let shifted = GrayImage::from_fn(20, 20, |x, y| base.get_clamped(x as isize - 2, y as isize - 1)).unwrap();
        let a = laplacian(&base).unwrap();
        let b = laplacian(&shifted).unwrap();
        for y in 3..19 {
            for x in 4..19 {
                assert_eq!(b.get(x, y), a.get(x - 2, y - 1));
            }
        }
    }

    #[test]
    fn laplacian_rejects_tiny_images() {
        assert!(laplacian(&GrayImage::filled(2, 5, 0).unwrap()).is_err());
    }

    #[test]
    fn otsu_on_bimodal_image() {
        let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 50 } else { 200 }).unwrap();
        let t = otsu_threshold(&img).unwrap();
        assert!((51..=200).contains(&t), "threshold {t}");
        assert_eq!(t, 51, "ties resolve to the smallest threshold");
        let bin = binarize(&img, &PreprocConfig::default());
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(bin.get(x, y), x >= 5);
            }
        }
    }

    #[test]
    fn otsu_on_flat_image_is_all_background() {
        let img = GrayImage::filled(6, 6, 90).unwrap();
        assert_eq!(otsu_threshold(&img), None);
        assert_eq!(binarize(&img, &PreprocConfig::default()).foreground_count(), 0);
    }

    #[test]
    fn fixed_threshold_mode() {
        let img = GrayImage::from_vec(4, 1, vec![10, 99, 100, 250]).unwrap();
        let cfg = PreprocConfig {
            binarize_method: BinarizeMethod::Fixed,
            fixed_threshold: 100,
            ..Default::default()
        };
        assert_eq!(binarize(&img, &cfg).data(), &[0, 0, 1, 1]);
    }

    #[test]
    fn thin_empty_is_empty() {
        let b = BinaryImage::empty(12, 9).unwrap();
        assert_eq!(thin(&b), b);
    }

    #[test]
    fn thin_keeps_diagonal_line() {
        let b = BinaryImage::from_fn(12, 12, |x, y| x == y && (1..11).contains(&x)).unwrap();
        assert_eq!(thin(&b), b);
    }

    #[test]
    fn thin_bar_to_middle_row() {
        // rows 3..=5, columns 3..=12 of a 9x16 canvas. A hand trace of the two
        // subiterations leaves row 4, columns 4..=10: the west end loses one
        // pixel and the east end two.
        let b = BinaryImage::from_fn(16, 9, |x, y| (3..=5).contains(&y) && (3..=12).contains(&x)).unwrap();
        let t = thin(&b);
        let expected = BinaryImage::from_fn(16, 9, |x, y| y == 4 && (4..=10).contains(&x)).unwrap();
        assert_eq!(t, expected);
    }

    #[test]
    fn thin_breaks_junction_squares() {
        // An X whose centre is a 2x2 square: Zhang-Suen alone keeps it.
        let mut b = BinaryImage::empty(12, 12).unwrap();
        for i in 0..5 {
            b.set(5 - i, 5 - i, true);
            b.set(6 + i, 5 - i, true);
            b.set(5 - i, 6 + i, true);
            b.set(6 + i, 6 + i, true);
        }
        let t = thin(&b);
        assert!(!has_square_block(&t));
        assert_eq!(thin(&t), t);
    }

    #[test]
    fn preprocess_of_constant_is_empty() {
        let img = GrayImage::filled(16, 16, 140).unwrap();
        let out = preprocess(&img, &PreprocConfig::default()).unwrap();
        assert_eq!(out.foreground_count(), 0);
    }

    #[test]
    fn preprocess_propagates_size_errors() {
        let img = GrayImage::filled(4, 4, 0).unwrap();
        assert!(preprocess(&img, &PreprocConfig::default()).is_err());
        let cfg = PreprocConfig {
            skip_noise_filter: true,
            ..Default::default()
        };
        assert!(preprocess(&img, &cfg).is_ok());
    }

    #[test]
    fn binarize_method_parses() {
        assert_eq!("otsu".parse::<BinarizeMethod>(), Ok(BinarizeMethod::Otsu));
        assert_eq!("fixed".parse::<BinarizeMethod>(), Ok(BinarizeMethod::Fixed));
        assert!("adaptive".parse::<BinarizeMethod>().is_err());
    }
}
