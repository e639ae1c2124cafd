//! End-to-end inspection: both camera views go through the same
//! preprocessing, Hough signature and statistics; the combined vector is
//! classified and thresholded into a decision.

use std::io;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{combine, extract_features, FeatureError, FeatureVector, ViewFeatures, FEATURE_DIM};
use crate::hough::{direction_density, hough_transform, DirectionDensity, HoughError, DEFAULT_THETA_BINS};
use crate::image::GrayImage;
use crate::mlp::{Label, LabeledSample, MlpError, MlpModel};
use crate::preproc::{preprocess, PreprocConfig, PreprocError};
use crate::synthgen::FramePair;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preproc(#[from] PreprocError),
    #[error(transparent)]
    Hough(#[from] HoughError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] MlpError),
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus must contain both clean and defective pairs")]
    SingleClassCorpus,
    #[error("at least one repetition required")]
    NoRepetitions,
    #[error("frame {seq}: {message}")]
    Frame { seq: u64, message: String },
    #[error("failed to emit stream event: {0}")]
    Sink(#[source] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preproc: PreprocConfig,
    pub theta_bins: usize,
    /// A pair is defective when its probability is at least this value.
    pub decision_threshold: f64,
    pub model_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preproc: PreprocConfig::default(),
            theta_bins: DEFAULT_THETA_BINS,
            decision_threshold: 0.5,
            model_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let t = self.decision_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(PipelineError::Config(format!(
                "decision_threshold {t} must lie strictly inside (0, 1)"
            )));
        }
        if self.theta_bins < 2 {
            return Err(PipelineError::Config(format!(
                "theta_bins {} must be at least 2",
                self.theta_bins
            )));
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_slice(bytes).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_defect(&self, probability: f64) -> bool {
        probability >= self.decision_threshold
    }
}

/// Anything that maps a feature vector to a defect probability.
pub trait Classifier {
    fn predict(&self, features: &FeatureVector) -> Result<f64, MlpError>;
}

impl Classifier for MlpModel {
    fn predict(&self, features: &FeatureVector) -> Result<f64, MlpError> {
        if self.input_dim() != FEATURE_DIM {
            return Err(MlpError::DimensionMismatch {
                expected: FEATURE_DIM,
                actual: self.input_dim(),
            });
        }
        self.forward(features.as_slice())
    }
}

impl<F> Classifier for F
where
    F: Fn(&FeatureVector) -> f64,
{
    fn predict(&self, features: &FeatureVector) -> Result<f64, MlpError> {
        Ok(self(features))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub sequence_id: u64,
    pub probability: f64,
    pub is_defect: bool,
    pub features: FeatureVector,
    pub latency_micros: u64,
}

impl Decision {
    /// The line-delimited stream record `{"seq":..,"p":..,"defect":..,"latency_us":..}`.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "seq": self.sequence_id,
            "p": self.probability,
            "defect": self.is_defect,
            "latency_us": self.latency_micros,
        })
        .to_string()
    }
}

/// Direction density of a single view after preprocessing.
pub fn view_density(img: &GrayImage, cfg: &PipelineConfig) -> Result<DirectionDensity, PipelineError> {
    let skeleton = preprocess(img, &cfg.preproc)?;
    let acc = hough_transform(&skeleton, cfg.theta_bins)?;
    Ok(direction_density(&acc))
}

pub fn view_features(img: &GrayImage, cfg: &PipelineConfig) -> Result<ViewFeatures, PipelineError> {
    Ok(extract_features(&view_density(img, cfg)?)?)
}

/// Runs both views through the identical chain and concatenates them.
pub fn pair_features(pair: &FramePair, cfg: &PipelineConfig) -> Result<FeatureVector, PipelineError> {
    let a = view_features(&pair.a, cfg)?;
    let b = view_features(&pair.b, cfg)?;
    Ok(combine(&a, &b))
}

/// Classifies one frame pair. `sequence_id` is left at 0.
pub fn detect<C: Classifier + ?Sized>(
    pair: &FramePair,
    classifier: &C,
    cfg: &PipelineConfig,
) -> Result<Decision, PipelineError> {
    cfg.validate()?;
    let start = Instant::now();
    let features = pair_features(pair, cfg)?;
    let probability = classifier.predict(&features)?;
    let latency_micros = start.elapsed().as_micros() as u64;
    Ok(Decision {
        sequence_id: 0,
        probability,
        is_defect: cfg.is_defect(probability),
        features,
        latency_micros,
    })
}

/// Features for every pair, paired with its label.
pub fn corpus_samples<'a, I>(items: I, cfg: &PipelineConfig) -> Result<Vec<LabeledSample>, PipelineError>
where
    I: IntoIterator<Item = (&'a FramePair, Label)>,
{
    items
        .into_iter()
        .map(|(pair, label)| {
            Ok(LabeledSample {
                features: pair_features(pair, cfg)?,
                label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequencedPair {
    pub seq: u64,
    pub pair: FramePair,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    Decision(Decision),
    /// Production must halt; carries the offending sequence id.
    Stop {
        seq: u64,
    },
}

impl StreamEvent {
    pub fn to_json_line(&self) -> String {
        match self {
            StreamEvent::Decision(d) => d.to_json_line(),
            StreamEvent::Stop { seq } => serde_json::json!({ "stop_at": seq }).to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOptions {
    /// Halt at the first defect. When false every pair is processed.
    pub stop_on_defect: bool,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self { stop_on_defect: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StreamSummary {
    pub decisions: usize,
    pub defects: usize,
    pub stopped_at: Option<u64>,
}

/// Processes pairs in source order, emitting one decision each.
///
/// With `stop_on_defect`, the first defective decision is followed by a
/// [`StreamEvent::Stop`] and the source is not read any further. A source
/// error or an unprocessable frame aborts the stream with
/// [`PipelineError::Frame`] naming the sequence id.
pub fn run_stream<I, C, S>(
    source: I,
    classifier: &C,
    cfg: &PipelineConfig,
    opts: StreamOptions,
    mut sink: S,
) -> Result<StreamSummary, PipelineError>
where
    I: IntoIterator<Item = Result<SequencedPair, PipelineError>>,
    C: Classifier + ?Sized,
    S: FnMut(StreamEvent) -> io::Result<()>,
{
    cfg.validate()?;
    let mut summary = StreamSummary::default();
    let mut last_seq: Option<u64> = None;
    for item in source {
        let SequencedPair { seq, pair } = item?;
        if last_seq.is_some_and(|prev| seq <= prev) {
            return Err(PipelineError::Frame {
                seq,
                message: format!("sequence id does not increase (previous {})", last_seq.unwrap_or(0)),
            });
        }
        last_seq = Some(seq);

        let mut decision = detect(&pair, classifier, cfg).map_err(|e| PipelineError::Frame {
            seq,
            message: e.to_string(),
        })?;
        decision.sequence_id = seq;
        let defect = decision.is_defect;
        summary.decisions += 1;
        sink(StreamEvent::Decision(decision)).map_err(PipelineError::Sink)?;
        if defect {
            summary.defects += 1;
            if opts.stop_on_defect {
                summary.stopped_at = Some(seq);
                sink(StreamEvent::Stop { seq }).map_err(PipelineError::Sink)?;
                break;
            }
        }
    }
    Ok(summary)
}

/// Latency summary in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub min_us: u64,
    pub mean_us: f64,
    pub p95_us: u64,
    pub max_us: u64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over the samples. `None` when empty.
    pub fn from_samples(samples: &[u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(Self {
            count: n,
            min_us: sorted[0],
            mean_us: sorted.iter().map(|&v| v as f64).sum::<f64>() / n as f64,
            p95_us: sorted[rank - 1],
            max_us: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// TP / (TP + FN)
    pub detection_rate: f64,
    /// FP / (FP + TN)
    pub false_alarm_rate: f64,
    pub latency: LatencyStats,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    /// Builds a report from `(is_defect, label)` outcomes and latencies.
    pub fn from_outcomes(outcomes: &[(bool, Label)], latencies: &[u64]) -> Result<Self, PipelineError> {
        if outcomes.is_empty() {
            return Err(PipelineError::EmptyCorpus);
        }
        let count = |flagged: bool, label: Label| outcomes.iter().filter(|&&o| o == (flagged, label)).count();
        let tp = count(true, Label::Defect);
        let fn_ = count(false, Label::Defect);
        let fp = count(true, Label::Clean);
        let tn = count(false, Label::Clean);
        if tp + fn_ == 0 || fp + tn == 0 {
            return Err(PipelineError::SingleClassCorpus);
        }
        let latency = LatencyStats::from_samples(latencies).unwrap_or(LatencyStats {
            count: 0,
            min_us: 0,
            mean_us: 0.0,
            p95_us: 0,
            max_us: 0,
        });
        Ok(Self {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            detection_rate: tp as f64 / (tp + fn_) as f64,
            false_alarm_rate: fp as f64 / (fp + tn) as f64,
            latency,
        })
    }
}

/// Runs [`detect`] over a labeled corpus and tallies the confusion matrix.
pub fn evaluate<'a, I, C>(items: I, classifier: &C, cfg: &PipelineConfig) -> Result<EvalReport, PipelineError>
where
    I: IntoIterator<Item = (&'a FramePair, Label)>,
    C: Classifier + ?Sized,
{
    let mut outcomes = Vec::new();
    let mut latencies = Vec::new();
    for (pair, label) in items {
        let d = detect(pair, classifier, cfg)?;
        outcomes.push((d.is_defect, label));
        latencies.push(d.latency_micros);
    }
    EvalReport::from_outcomes(&outcomes, &latencies)
}

/// Times [`detect`] on every pair, `repetitions` times over.
pub fn benchmark<C: Classifier + ?Sized>(
    pairs: &[FramePair],
    classifier: &C,
    cfg: &PipelineConfig,
    repetitions: usize,
) -> Result<LatencyStats, PipelineError> {
    if repetitions == 0 {
        return Err(PipelineError::NoRepetitions);
    }
    if pairs.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let mut latencies = Vec::with_capacity(pairs.len() * repetitions);
    for _ in 0..repetitions {
        for pair in pairs {
            latencies.push(detect(pair, classifier, cfg)?.latency_micros);
        }
    }
    Ok(LatencyStats::from_samples(&latencies).expect("non-empty"))
}

/// CSV header for per-pair feature dumps.
pub fn features_csv_header() -> String {
    let mut cols: Vec<String> = crate::features::FEATURE_ORDER.split(',').map(str::to_owned).collect();
    cols.push("label".into());
    cols.join(",")
}

pub fn features_csv_row(features: &FeatureVector, label: Label) -> String {
    let mut cols: Vec<String> = features.values().iter().map(f64::to_string).collect();
    cols.push(u8::from(label).to_string());
    cols.join(",")
}
