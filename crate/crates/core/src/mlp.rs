//! One-hidden-layer perceptron written from scratch.
//!
//! Inputs are z-scored with statistics captured at training time, pass
//! through a `tanh` hidden layer and a single logistic output unit that
//! reads as the defect probability. Training is full-batch gradient descent
//! with momentum on mean binary cross-entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_DIM, FEATURE_ORDER, POSITION_NORMALIZATION};

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN_DIM: usize = 8;

/// Lower bound applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-8;
const PROB_CLAMP: f64 = 1e-12;
const INIT_PRNG: &str =
    "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9), uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), W1 then W2 row-major";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("expected {expected} input features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("sample list is empty")]
    NoSamples,
    #[error("training data contains a single class; both labels are required")]
    SingleClass,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("unsupported model schema: {0}")]
    Schema(String),
    #[error("inconsistent model dimensions: {0}")]
    Dimensions(String),
    #[error("model contains a non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("model file is not valid JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    /// Correct pattern.
    Clean,
    Defect,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Clean => 0.0,
            Label::Defect => 1.0,
        }
    }

    pub fn is_defect(self) -> bool {
        self == Label::Defect
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.is_defect() as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Clean),
            1 => Ok(Label::Defect),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: Label,
}

/// Trainable parameters. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `hidden_dim x input_dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Output weights, one per hidden unit.
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w1: vec![0.0; input_dim * hidden_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; hidden_dim],
            b2: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All parameters in the order W1, b1, W2, b2.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    /// Mutable access by flat index, in the same order as [`Self::to_flat`].
    pub fn flat_mut(&mut self, mut i: usize) -> &mut f64 {
        if i < self.w1.len() {
            return &mut self.w1[i];
        }
        i -= self.w1.len();
        if i < self.b1.len() {
            return &mut self.b1[i];
        }
        i -= self.b1.len();
        if i < self.w2.len() {
            return &mut self.w2[i];
        }
        assert_eq!(i, self.w2.len(), "parameter index out of range");
        &mut self.b2
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    fn zip_apply(&mut self, other: &MlpParams, mut f: impl FnMut(&mut f64, f64)) {
        for (a, &b) in self.w1.iter_mut().zip(&other.w1) {
            f(a, b);
        }
        for (a, &b) in self.b1.iter_mut().zip(&other.b1) {
            f(a, b);
        }
        for (a, &b) in self.w2.iter_mut().zip(&other.w2) {
            f(a, b);
        }
        f(&mut self.b2, other.b2);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    hidden_dim: usize,
    pub params: MlpParams,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    init_seed: Option<u64>,
}

impl MlpModel {
    /// All-zero weights and identity normalization.
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            params: MlpParams::zeros(input_dim, hidden_dim),
            feat_mean: vec![0.0; input_dim],
            feat_std: vec![1.0; input_dim],
            init_seed: None,
        }
    }

    /// Assembles a model from parts, validating shapes and values.
    pub fn from_parts(params: MlpParams, feat_mean: Vec<f64>, feat_std: Vec<f64>) -> Result<Self, MlpError> {
        let hidden_dim = params.b1.len();
        let input_dim = feat_mean.len();
        let model = Self {
            input_dim,
            hidden_dim,
            params,
            feat_mean,
            feat_std,
            init_seed: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// A constant-output model: every input maps to `probability`.
    pub fn constant(input_dim: usize, probability: f64) -> Self {
        let mut m = Self::zeros(input_dim, 1);
        m.params.b2 = (probability / (1.0 - probability)).ln();
        m
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn feat_mean(&self) -> &[f64] {
        &self.feat_mean
    }

    pub fn feat_std(&self) -> &[f64] {
        &self.feat_std
    }

    fn validate(&self) -> Result<(), MlpError> {
        let (d, h) = (self.input_dim, self.hidden_dim);
        if d == 0 || h == 0 {
            return Err(MlpError::Dimensions(format!(
                "input_dim {d} and hidden_dim {h} must be positive"
            )));
        }
        let checks = [
            ("w1", self.params.w1.len(), d * h),
            ("b1", self.params.b1.len(), h),
            ("w2", self.params.w2.len(), h),
            ("feat_mean", self.feat_mean.len(), d),
            ("feat_std", self.feat_std.len(), d),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(MlpError::Dimensions(format!(
                    "{name} has {got} values, expected {want}"
                )));
            }
        }
        let finite = |name: &'static str, v: &[f64]| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(MlpError::NonFinite(name))
            }
        };
        finite("w1", &self.params.w1)?;
        finite("b1", &self.params.b1)?;
        finite("w2", &self.params.w2)?;
        finite("b2", &[self.params.b2])?;
        finite("feat_mean", &self.feat_mean)?;
        finite("feat_std", &self.feat_std)?;
        if self.feat_std.iter().any(|&s| s <= 0.0) {
            return Err(MlpError::Dimensions("feat_std entries must be positive".into()));
        }
        Ok(())
    }

    fn normalize(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        if input.len() != self.input_dim {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        Ok(input
            .iter()
            .zip(self.feat_mean.iter().zip(&self.feat_std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    /// Hidden activations and output probability for a normalized input.
    fn activations(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let d = self.input_dim;
        let hidden: Vec<f64> = (0..self.hidden_dim)
            .map(|k| {
                let row = &self.params.w1[k * d..(k + 1) * d];
                let a: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.params.b1[k];
                a.tanh()
            })
            .collect();
        let out = hidden.iter().zip(&self.params.w2).map(|(h, w)| h * w).sum::<f64>() + self.params.b2;
        (hidden, sigmoid(out))
    }

    /// Defect probability for a raw (unnormalized) feature slice.
    pub fn forward(&self, input: &[f64]) -> Result<f64, MlpError> {
        let z = self.normalize(input)?;
        Ok(self.activations(&z).1)
    }

    /// Mean binary cross-entropy over `samples`.
    pub fn loss(&self, samples: &[LabeledSample]) -> Result<f64, MlpError> {
        if samples.is_empty() {
            return Err(MlpError::NoSamples);
        }
        let mut total = 0.0;
        for s in samples {
            let p = self.forward(s.features.as_slice())?;
            total += binary_cross_entropy(p, s.label);
        }
        Ok(total / samples.len() as f64)
    }

    /// Analytic gradient of [`Self::loss`] with respect to every parameter.
    pub fn gradient(&self, samples: &[LabeledSample]) -> Result<MlpParams, MlpError> {
        self.loss_and_gradient(samples).map(|(_, g)| g)
    }

    pub fn loss_and_gradient(&self, samples: &[LabeledSample]) -> Result<(f64, MlpParams), MlpError> {
        if samples.is_empty() {
            return Err(MlpError::NoSamples);
        }
        let n = samples.len() as f64;
        let d = self.input_dim;
        let mut grad = MlpParams::zeros(d, self.hidden_dim);
        let mut total = 0.0;
        for s in samples {
            let z = self.normalize(s.features.as_slice())?;
            let (hidden, p) = self.activations(&z);
            total += binary_cross_entropy(p, s.label);

            let delta_out = (p - s.label.as_f64()) / n;
            grad.b2 += delta_out;
            for (k, &h) in hidden.iter().enumerate() {
                grad.w2[k] += delta_out * h;
                let delta_h = delta_out * self.params.w2[k] * (1.0 - h * h);
                grad.b1[k] += delta_h;
                for (g, x) in grad.w1[k * d..(k + 1) * d].iter_mut().zip(&z) {
                    *g += delta_h * x;
                }
            }
        }
        Ok((total / n, grad))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p` clamped to `[1e-12, 1 - 1e-12]`.
pub fn binary_cross_entropy(p: f64, label: Label) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    match label {
        Label::Defect => -p.ln(),
        Label::Clean => -(1.0 - p).ln(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 200,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// `loss_history[e]` is the loss before update `e`; the last entry is
    /// the loss of the returned model, so the length is `epochs + 1`.
    pub loss_history: Vec<f64>,
}

/// Per-column mean and population standard deviation, floored at
/// [`STD_FLOOR`].
pub fn feature_statistics(samples: &[LabeledSample]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; FEATURE_DIM];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.features.values()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; FEATURE_DIM];
    for s in samples {
        for ((v, x), m) in std.iter_mut().zip(s.features.values()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    std.iter_mut().for_each(|v| *v = (*v / n).sqrt().max(STD_FLOOR));
    (mean, std)
}

/// Trains a fresh model. Deterministic in `(samples, cfg)`.
pub fn train(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<TrainOutcome, MlpError> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(MlpError::BadConfig(format!(
            "learning_rate {} must be positive",
            cfg.learning_rate
        )));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(MlpError::BadConfig(format!(
            "momentum {} must lie in [0, 1)",
            cfg.momentum
        )));
    }
    if cfg.epochs == 0 || cfg.hidden_dim == 0 {
        return Err(MlpError::BadConfig("epochs and hidden_dim must be at least 1".into()));
    }
    if samples.len() < 2 {
        return Err(if samples.is_empty() {
            MlpError::NoSamples
        } else {
            MlpError::SingleClass
        });
    }
    let defects = samples.iter().filter(|s| s.label.is_defect()).count();
    if defects == 0 || defects == samples.len() {
        return Err(MlpError::SingleClass);
    }

    let (feat_mean, feat_std) = feature_statistics(samples);
    let mut model = MlpModel {
        input_dim: FEATURE_DIM,
        hidden_dim: cfg.hidden_dim,
        params: init_params(FEATURE_DIM, cfg.hidden_dim, cfg.seed),
        feat_mean,
        feat_std,
        init_seed: Some(cfg.seed),
    };

    let mut velocity = MlpParams::zeros(FEATURE_DIM, cfg.hidden_dim);
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = model.loss_and_gradient(samples)?;
        if !loss.is_finite() {
            return Err(MlpError::NonFiniteLoss { epoch });
        }
        history.push(loss);
        velocity.zip_apply(&grad, |v, g| *v = cfg.momentum * *v - cfg.learning_rate * g);
        model.params.zip_apply(&velocity, |w, v| *w += v);
    }
    let final_loss = model.loss(samples)?;
    if !final_loss.is_finite() {
        return Err(MlpError::NonFiniteLoss { epoch: cfg.epochs });
    }
    history.push(final_loss);

    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

fn init_params(input_dim: usize, hidden_dim: usize, seed: u64) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::zeros(input_dim, hidden_dim);
    let a1 = 1.0 / (input_dim as f64).sqrt();
    for w in params.w1.iter_mut() {
        *w = rng.random_range(-a1..a1);
    }
    let a2 = 1.0 / (hidden_dim as f64).sqrt();
    for w in params.w2.iter_mut() {
        *w = rng.random_range(-a2..a2);
    }
    params
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    hidden_activation: String,
    output_activation: String,
    feature_order: String,
    position_normalization: String,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<InitRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitRecord {
    prng: String,
    seed: u64,
}

/// Serializes a model to pretty-printed JSON.
pub fn save_model(model: &MlpModel) -> Vec<u8> {
    let d = model.input_dim;
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        input_dim: d,
        hidden_dim: model.hidden_dim,
        output_dim: 1,
        hidden_activation: "tanh".into(),
        output_activation: "sigmoid".into(),
        feature_order: FEATURE_ORDER.into(),
        position_normalization: POSITION_NORMALIZATION.into(),
        w1: model.params.w1.chunks(d).map(<[f64]>::to_vec).collect(),
        b1: model.params.b1.clone(),
        w2: vec![model.params.w2.clone()],
        b2: vec![model.params.b2],
        feat_mean: model.feat_mean.clone(),
        feat_std: model.feat_std.clone(),
        init: model.init_seed.map(|seed| InitRecord {
            prng: INIT_PRNG.into(),
            seed,
        }),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("model serializes");
    out.push(b'\n');
    out
}

/// Parses and validates a model file. Never returns a partial model.
pub fn load_model(bytes: &[u8]) -> Result<MlpModel, MlpError> {
    let raw: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| MlpError::Json(e.to_string()))?;
    match raw.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(MODEL_SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(MlpError::Schema(format!(
                "schema_version {v} is not {MODEL_SCHEMA_VERSION}"
            )))
        }
        None => return Err(MlpError::Schema("missing schema_version".into())),
    }
    let file: ModelFile = serde_json::from_value(raw).map_err(|e| MlpError::Json(e.to_string()))?;

    if file.hidden_activation != "tanh" || file.output_activation != "sigmoid" {
        return Err(MlpError::Schema(format!(
            "activations {}/{} are not tanh/sigmoid",
            file.hidden_activation, file.output_activation
        )));
    }
    if file.output_dim != 1 {
        return Err(MlpError::Dimensions(format!("output_dim {} is not 1", file.output_dim)));
    }
    if file.input_dim == FEATURE_DIM && file.feature_order != FEATURE_ORDER {
        return Err(MlpError::Schema(format!(
            "unknown feature order {:?}",
            file.feature_order
        )));
    }
    if file.w1.len() != file.hidden_dim {
        return Err(MlpError::Dimensions(format!(
            "w1 has {} rows but hidden_dim is {}",
            file.w1.len(),
            file.hidden_dim
        )));
    }
    if let Some(row) = file.w1.iter().find(|r| r.len() != file.input_dim) {
        return Err(MlpError::Dimensions(format!(
            "w1 row has {} columns but input_dim is {}",
            row.len(),
            file.input_dim
        )));
    }
    if file.w2.len() != 1 || file.b2.len() != 1 {
        return Err(MlpError::Dimensions(
            "w2 and b2 must describe exactly one output".into(),
        ));
    }

    let model = MlpModel {
        input_dim: file.input_dim,
        hidden_dim: file.hidden_dim,
        params: MlpParams {
            w1: file.w1.concat(),
            b1: file.b1,
            w2: file.w2.into_iter().next().unwrap_or_default(),
            b2: file.b2[0],
        },
        feat_mean: file.feat_mean,
        feat_std: file.feat_std,
        init_seed: file.init.map(|i| i.seed),
    };
    model.validate()?;
    Ok(model)
}
