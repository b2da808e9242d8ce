//! JSON model envelope. Large parameter arrays are stored as base64 of their
//! little-endian `f64` bytes so a reload is bit-exact.

use serde::{Deserialize, Serialize};

use super::{ClassifyError, ModelKind, ModelParams, TrainedModel, TrainingMetadata};
use crate::vectorize::{restore_tfidf, FeaturePipeline};

pub const MODEL_FORMAT: &str = "hartype-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub(crate) mod f64_b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text).map_err(D::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(D::Error::custom("float payload length is not a multiple of 8"));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    kind: ModelKind,
    label_space: Vec<String>,
    feature_spec: Option<String>,
    metadata: TrainingMetadata,
    params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<FeaturePipeline>,
}

impl TrainedModel {
    /// Serializes the model, optionally with the fitted feature pipeline that
    /// produced its inputs.
    pub fn to_json(&self, features: Option<&FeaturePipeline>) -> String {
        let envelope = Envelope {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            kind: self.kind(),
            label_space: self.label_space.clone(),
            feature_spec: self.feature_spec.clone(),
            metadata: self.metadata.clone(),
            params: self.params.clone(),
            features: features.cloned(),
        };
        serde_json::to_string_pretty(&envelope).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<(TrainedModel, Option<FeaturePipeline>), ClassifyError> {
        let env: Envelope = serde_json::from_str(text).map_err(|e| ClassifyError::Persist(e.to_string()))?;
        if env.format != MODEL_FORMAT {
            return Err(ClassifyError::Persist(format!("not a model file (format `{}`)", env.format)));
        }
        if env.version != MODEL_FORMAT_VERSION {
            return Err(ClassifyError::Persist(format!("unsupported model version {}", env.version)));
        }
        let model = TrainedModel {
            label_space: env.label_space,
            params: env.params,
            feature_spec: env.feature_spec,
            metadata: env.metadata,
        };
        if model.kind() != env.kind {
            return Err(ClassifyError::Persist("kind does not match parameters".into()));
        }
        if model.label_space.is_empty() {
            return Err(ClassifyError::Persist("empty label space".into()));
        }
        let mut features = env.features;
        if let Some(p) = features.as_mut() {
            p.tfidf = p.tfidf.take().map(restore_tfidf);
            if p.width() != model.n_features() {
                return Err(ClassifyError::DimensionMismatch {
                    expected: model.n_features(),
                    actual: p.width(),
                });
            }
        }
        Ok((model, features))
    }
}
