//! Seeded synthetic Jacquard-like textures with injected defects.
//!
//! A frame pair shows the same piece of fabric from two camera angles. The
//! fabric is a grid of dark warp and weft threads on a light ground; the two
//! views differ by a rotation and a brightness multiplier. Defects live in
//! fabric coordinates so both views see the same flaw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::GrayImage;
use crate::mlp::Label;

const GROUND_LEVEL: f64 = 240.0;
const THREAD_LEVEL: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("defect fraction {0} is outside [0, 1]")]
    BadFraction(f64),
    #[error("corpus size must be at least 1")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    None,
    /// One warp or weft thread is absent.
    MissingThread,
    /// One thread has a gap of `magnitude * period` pixels.
    BrokenLine,
    /// A filled dark disk.
    Blob,
    /// One thread runs at a perturbed angle.
    Misweave,
}

impl DefectKind {
    /// Defect types in the order `make_corpus` cycles through them.
    pub const INJECTED: [DefectKind; 4] = [
        DefectKind::MissingThread,
        DefectKind::BrokenLine,
        DefectKind::Blob,
        DefectKind::Misweave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DefectKind::None => "none",
            DefectKind::MissingThread => "missing_thread",
            DefectKind::BrokenLine => "broken_line",
            DefectKind::Blob => "blob",
            DefectKind::Misweave => "misweave",
        }
    }

    pub fn label(self) -> Label {
        if self == DefectKind::None {
            Label::Clean
        } else {
            Label::Defect
        }
    }
}

impl std::str::FromStr for DefectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [DefectKind::None]
            .into_iter()
            .chain(DefectKind::INJECTED)
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown defect type {s:?}"))
    }
}

/// Rendering parameters for one frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub warp_period: f64,
    pub weft_period: f64,
    pub thread_thickness: f64,
    /// Weave rotation seen by camera A, degrees.
    pub pattern_angle_a: f64,
    /// Weave rotation seen by camera B, degrees.
    pub pattern_angle_b: f64,
    pub brightness_a: f64,
    pub brightness_b: f64,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_sigma: f64,
    pub defect: DefectKind,
    pub defect_magnitude: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            warp_period: 16.0,
            weft_period: 16.0,
            thread_thickness: 4.0,
            pattern_angle_a: 0.0,
            pattern_angle_b: 8.0,
            brightness_a: 1.0,
            brightness_b: 0.9,
            noise_sigma: 5.0,
            defect: DefectKind::None,
            defect_magnitude: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Default spec at benchmark resolution.
    pub fn benchmark() -> Self {
        Self {
            width: 512,
            height: 512,
            ..Self::default()
        }
    }

    pub fn label(&self) -> Label {
        self.defect.label()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.width < 1 || self.height < 1 {
            return bad(format!("size {}x{} must be positive", self.width, self.height));
        }
        if !(self.thread_thickness >= 1.0 && self.thread_thickness.is_finite()) {
            return bad(format!("thread_thickness {} must be at least 1", self.thread_thickness));
        }
        for (name, p) in [("warp_period", self.warp_period), ("weft_period", self.weft_period)] {
            if !(p >= 4.0 && p.is_finite()) {
                return bad(format!("{name} {p} must be at least 4"));
            }
            if p < 2.0 * self.thread_thickness {
                return bad(format!(
                    "{name} {p} is below twice the thread thickness {}",
                    self.thread_thickness
                ));
            }
        }
        for (name, v) in [
            ("pattern_angle_a", self.pattern_angle_a),
            ("pattern_angle_b", self.pattern_angle_b),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        for (name, v) in [("brightness_a", self.brightness_a), ("brightness_b", self.brightness_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be positive"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be non-negative", self.noise_sigma));
        }
        if !(self.defect_magnitude > 0.0 && self.defect_magnitude <= 1.0) {
            return bad(format!("defect_magnitude {} must lie in (0, 1]", self.defect_magnitude));
        }
        Ok(())
    }
}

/// Simultaneous views of one fabric region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePair {
    pub a: GrayImage,
    pub b: GrayImage,
}

/// Thread family a defect is attached to.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Warp,
    Weft,
}

/// Fabric-space description of the weave and its flaw.
///
/// Fabric coordinates `(u, v)` are centred on the frame; warp threads run
/// along `v` at `u = phase_u + k * warp_period`, weft threads along `u`.
#[derive(Debug, Clone)]
struct Fabric {
    warp_period: f64,
    weft_period: f64,
    half_thickness: f64,
    phase_u: f64,
    phase_v: f64,
    flaw: Flaw,
}

#[derive(Debug, Clone)]
enum Flaw {
    None,
    /// Thread `index` of `family` is absent where `|along - center| <= half_len`.
    Gap {
        family: Family,
        index: i64,
        center: f64,
        half_len: f64,
    },
    Disk {
        u: f64,
        v: f64,
        radius: f64,
    },
    /// Thread `index` of `family` is replaced by a copy tilted by `tilt`
    /// radians about its point at `along = pivot`.
    Tilt {
        family: Family,
        index: i64,
        pivot: f64,
        tilt: f64,
    },
}

impl Fabric {
    fn new(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let phase_u = rng.random_range(0.0..spec.warp_period);
        let phase_v = rng.random_range(0.0..spec.weft_period);
        let half_extent = 0.5 * spec.width.min(spec.height) as f64;
        let family = if rng.random_bool(0.5) {
            Family::Warp
        } else {
            Family::Weft
        };
        let (period, phase) = match family {
            Family::Warp => (spec.warp_period, phase_u),
            Family::Weft => (spec.weft_period, phase_v),
        };
        // a thread whose centre lies in the middle half of the frame
        let reach = (0.5 * half_extent / period).floor().max(0.0) as i64;
        let index = rng.random_range(-reach..=reach) + ((-phase / period).round() as i64);
        let mag = spec.defect_magnitude;
        let center = rng.random_range(-0.3..0.3) * half_extent;

        let flaw = match spec.defect {
            DefectKind::None => Flaw::None,
            DefectKind::MissingThread => Flaw::Gap {
                family,
                index,
                center: 0.0,
                // magnitude 1 clears the thread across the whole frame
                half_len: mag * 2.0 * half_extent,
            },
            DefectKind::BrokenLine => Flaw::Gap {
                family,
                index,
                center,
                half_len: 0.5 * mag * period,
            },
            DefectKind::Blob => Flaw::Disk {
                u: rng.random_range(-0.3..0.3) * half_extent,
                v: rng.random_range(-0.3..0.3) * half_extent,
                radius: (mag * 0.15 * 2.0 * half_extent).max(1.0),
            },
            DefectKind::Misweave => {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                Flaw::Tilt {
                    family,
                    index,
                    pivot: center,
                    tilt: sign * mag * 15f64.to_radians(),
                }
            }
        };
        Self {
            warp_period: spec.warp_period,
            weft_period: spec.weft_period,
            half_thickness: 0.5 * spec.thread_thickness,
            phase_u,
            phase_v,
            flaw,
        }
    }

    fn coverage(&self, dist: f64) -> f64 {
        (self.half_thickness + 0.5 - dist).clamp(0.0, 1.0)
    }

    /// Thread index nearest to `across` and the distance to its centre line.
    fn nearest(across: f64, phase: f64, period: f64) -> (i64, f64) {
        let k = ((across - phase) / period).round();
        (k as i64, (across - phase - k * period).abs())
    }

    /// Coverage of one thread family at a fabric point, honouring gaps and tilts.
    fn family_coverage(&self, family: Family, across: f64, along: f64) -> f64 {
        let (phase, period) = match family {
            Family::Warp => (self.phase_u, self.warp_period),
            Family::Weft => (self.phase_v, self.weft_period),
        };
        let (k, dist) = Self::nearest(across, phase, period);
        let mut cov = self.coverage(dist);
        match self.flaw {
            Flaw::Gap {
                family: f,
                index,
                center,
                half_len,
            } if f == family && index == k && (along - center).abs() <= half_len => {
                cov = 0.0;
            }
            Flaw::Tilt {
                family: f,
                index,
                pivot,
                tilt,
            } if f == family => {
                if index == k {
                    cov = 0.0;
                }
                // tilted replacement: line through (index centre, pivot)
                let base = phase + index as f64 * period;
                let d = ((across - base) * tilt.cos() - (along - pivot) * tilt.sin()).abs();
                cov = cov.max(self.coverage(d));
            }
            _ => {}
        }
        cov
    }

    /// Darkness in `[0, 1]` at fabric point `(u, v)`.
    fn darkness(&self, u: f64, v: f64) -> f64 {
        if let Flaw::Disk { u: cu, v: cv, radius } = self.flaw {
            let r = ((u - cu).powi(2) + (v - cv).powi(2)).sqrt();
            let disk = (radius + 0.5 - r).clamp(0.0, 1.0);
            if disk >= 1.0 {
                return 1.0;
            }
            let weave = self.weave(u, v);
            return disk + (1.0 - disk) * weave;
        }
        self.weave(u, v)
    }

    fn weave(&self, u: f64, v: f64) -> f64 {
        let warp = self.family_coverage(Family::Warp, u, v);
        let weft = self.family_coverage(Family::Weft, v, u);
        warp.max(weft)
    }
}

fn render_view(
    fabric: &Fabric,
    width: usize,
    height: usize,
    angle_deg: f64,
    brightness: f64,
    noise: Option<(Normal<f64>, &mut ChaCha8Rng)>,
) -> GrayImage {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let ground = GROUND_LEVEL * brightness;
    let thread = THREAD_LEVEL * brightness;
    let mut noise = noise;
    GrayImage::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        let mut value = ground - (ground - thread) * fabric.darkness(u, v);
        if let Some((dist, rng)) = noise.as_mut() {
            value += dist.sample(*rng);
        }
        value.round().clamp(0.0, 255.0) as u8
    })
    .expect("spec dimensions validated")
}

/// Renders a frame pair. Deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> Result<(FramePair, Label), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fabric = Fabric::new(spec, &mut rng);
    let mut noise_a = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0xA));
    let mut noise_b = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0xB));
    let dist = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma validated"));

    let a = render_view(
        &fabric,
        spec.width,
        spec.height,
        spec.pattern_angle_a,
        spec.brightness_a,
        dist.map(|d| (d, &mut noise_a)),
    );
    let b = render_view(
        &fabric,
        spec.width,
        spec.height,
        spec.pattern_angle_b,
        spec.brightness_b,
        dist.map(|d| (d, &mut noise_b)),
    );
    Ok((FramePair { a, b }, spec.label()))
}

/// SplitMix64 finalizer over `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub pair: FramePair,
    pub label: Label,
    pub defect: DefectKind,
    /// The fully resolved spec this item was rendered from.
    pub spec: SynthSpec,
}

/// Which items of an `n`-item corpus carry a defect: `round(n * fraction)`
/// of them, spread evenly.
pub fn defect_schedule(n: usize, defect_fraction: f64) -> Result<Vec<bool>, SynthError> {
    if !(0.0..=1.0).contains(&defect_fraction) {
        return Err(SynthError::BadFraction(defect_fraction));
    }
    let k = (n as f64 * defect_fraction).round() as usize;
    Ok((0..n).map(|i| (i + 1) * k / n > i * k / n).collect())
}

/// Per-item spec: `base` with jitter drawn from `(seed, index)`.
///
/// Periods are scaled by up to +/-10%, both view angles shift together by up
/// to +/-2 degrees, noise sigma varies by up to +/-20% and brightness by
/// up to +/-5%.
pub fn jittered_spec(base: &SynthSpec, seed: u64, index: usize, defect: DefectKind) -> SynthSpec {
    let item_seed = derive_seed(seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
    let mut spec = base.clone();
    let thick = spec.thread_thickness;
    spec.warp_period = (base.warp_period * rng.random_range(0.9..=1.1))
        .max(2.0 * thick)
        .max(4.0);
    spec.weft_period = (base.weft_period * rng.random_range(0.9..=1.1))
        .max(2.0 * thick)
        .max(4.0);
    let tilt = rng.random_range(-2.0..=2.0);
    spec.pattern_angle_a = base.pattern_angle_a + tilt;
    spec.pattern_angle_b = base.pattern_angle_b + tilt;
    spec.noise_sigma = base.noise_sigma * rng.random_range(0.8..=1.2);
    spec.brightness_a = base.brightness_a * rng.random_range(0.95..=1.05);
    spec.brightness_b = base.brightness_b * rng.random_range(0.95..=1.05);
    spec.defect = defect;
    spec.seed = rng.random();
    spec
}

/// Builds `n` labeled pairs; defect types cycle through
/// [`DefectKind::INJECTED`]. Deterministic in the arguments.
pub fn make_corpus(base: &SynthSpec, n: usize, defect_fraction: f64, seed: u64) -> Result<Vec<CorpusItem>, SynthError> {
    if n == 0 {
        return Err(SynthError::EmptyCorpus);
    }
    base.validate()?;
    let schedule = defect_schedule(n, defect_fraction)?;
    let mut defects_seen = 0;
    let mut items = Vec::with_capacity(n);
    for (index, defective) in schedule.into_iter().enumerate() {
        let defect = if defective {
            let kind = DefectKind::INJECTED[defects_seen % DefectKind::INJECTED.len()];
            defects_seen += 1;
            kind
        } else {
            DefectKind::None
        };
        let spec = jittered_spec(base, seed, index, defect);
        let (pair, label) = generate(&spec)?;
        items.push(CorpusItem {
            pair,
            label,
            defect,
            spec,
        });
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dark_pixels(img: &GrayImage, ground: f64) -> usize {
        img.data().iter().filter(|&&v| f64::from(v) < ground).count()
    }

    #[test]
    fn identical_specs_render_identically() {
        let spec = SynthSpec {
            defect: DefectKind::Blob,
            seed: 11,
            ..Default::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn clean_noiseless_matching_views_are_identical() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            pattern_angle_b: 0.0,
            brightness_b: 1.0,
            seed: 3,
            ..Default::default()
        };
        let (pair, label) = generate(&spec).unwrap();
        assert_eq!(pair.a, pair.b);
        assert_eq!(label, Label::Clean);
    }

    #[test]
    fn missing_thread_removes_dark_pixels() {
        for seed in 0..10 {
            let clean = SynthSpec {
                noise_sigma: 0.0,
                seed,
                ..Default::default()
            };
            let flawed = SynthSpec {
                defect: DefectKind::MissingThread,
                ..clean.clone()
            };
            let (c, _) = generate(&clean).unwrap();
            let (f, label) = generate(&flawed).unwrap();
            assert_eq!(label, Label::Defect);
            assert!(dark_pixels(&f.a, GROUND_LEVEL) < dark_pixels(&c.a, GROUND_LEVEL));
            assert!(dark_pixels(&f.b, GROUND_LEVEL * 0.9) < dark_pixels(&c.b, GROUND_LEVEL * 0.9));
        }
    }

    #[test]
    fn every_defect_changes_both_views() {
        for kind in DefectKind::INJECTED {
            let clean = SynthSpec {
                noise_sigma: 0.0,
                seed: 5,
                ..Default::default()
            };
            let flawed = SynthSpec {
                defect: kind,
                ..clean.clone()
            };
            let (c, _) = generate(&clean).unwrap();
            let (f, _) = generate(&flawed).unwrap();
            assert_ne!(c.a, f.a, "{kind:?}");
            assert_ne!(c.b, f.b, "{kind:?}");
        }
    }

    #[test]
    fn spec_validation() {
        let ok = SynthSpec::default();
        assert!(ok.validate().is_ok());
        let merged = SynthSpec {
            warp_period: 6.0,
            thread_thickness: 4.0,
            ..ok.clone()
        };
        assert!(generate(&merged).is_err());
        let tiny = SynthSpec {
            weft_period: 3.0,
            thread_thickness: 1.0,
            ..ok.clone()
        };
        assert!(tiny.validate().is_err());
        let magnitude = SynthSpec {
            defect_magnitude: 0.0,
            ..ok.clone()
        };
        assert!(magnitude.validate().is_err());
        let noise = SynthSpec {
            noise_sigma: -1.0,
            ..ok
        };
        assert!(noise.validate().is_err());
    }

    #[test]
    fn schedule_rounds_and_spreads() {
        let s = defect_schedule(10, 0.5).unwrap();
        assert_eq!(s.iter().filter(|&&d| d).count(), 5);
        assert_eq!(defect_schedule(7, 0.0).unwrap(), vec![false; 7]);
        assert_eq!(defect_schedule(7, 1.0).unwrap(), vec![true; 7]);
        assert_eq!(defect_schedule(3, 0.5).unwrap().iter().filter(|&&d| d).count(), 2);
        assert_eq!(defect_schedule(3, 1.5), Err(SynthError::BadFraction(1.5)));
    }

    #[test]
    fn corpus_labels_and_determinism() {
        let base = SynthSpec {
            width: 32,
            height: 32,
            warp_period: 8.0,
            weft_period: 8.0,
            thread_thickness: 2.0,
            ..Default::default()
        };
        let corpus = make_corpus(&base, 10, 0.5, 9).unwrap();
        assert_eq!(corpus.len(), 10);
        assert_eq!(corpus.iter().filter(|c| c.label == Label::Defect).count(), 5);
        for item in &corpus {
            assert_eq!(item.label == Label::Clean, item.defect == DefectKind::None);
        }
        let kinds: Vec<_> = corpus
            .iter()
            .filter(|c| c.label.is_defect())
            .map(|c| c.defect)
            .collect();
        assert_eq!(&kinds[..4], &DefectKind::INJECTED);
        assert_eq!(make_corpus(&base, 10, 0.5, 9).unwrap(), corpus);
        assert_ne!(make_corpus(&base, 10, 0.5, 10).unwrap(), corpus);
        assert_eq!(make_corpus(&base, 0, 0.5, 9), Err(SynthError::EmptyCorpus));
    }

    #[test]
    fn jitter_stays_in_bounds() {
        let base = SynthSpec::default();
        for i in 0..200 {
            let s = jittered_spec(&base, 4, i, DefectKind::None);
            assert!((14.4..=17.6).contains(&s.warp_period));
            assert!((14.4..=17.6).contains(&s.weft_period));
            let tilt = s.pattern_angle_a - base.pattern_angle_a;
            assert!(tilt.abs() <= 2.0);
            assert!((s.pattern_angle_b - base.pattern_angle_b - tilt).abs() < 1e-12);
            assert!(s.validate().is_ok());
        }
    }

    #[test]
    fn defect_names_parse() {
        for kind in DefectKind::INJECTED.into_iter().chain([DefectKind::None]) {
            assert_eq!(kind.name().parse::<DefectKind>(), Ok(kind));
        }
        assert!("tear".parse::<DefectKind>().is_err());
    }
}
