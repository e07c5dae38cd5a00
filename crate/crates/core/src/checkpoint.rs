//! Versioned JSON checkpoint for model parameters. Weights are stored as
//! flat row-major arrays; `serde_json` round-trips every finite float
//! bit-exactly, so a reloaded checkpoint reproduces predictions exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reranker::{Hyperparams, ModelParams};
use crate::scalar::Scalar;

pub const CHECKPOINT_SCHEMA: &str = "warntriage/checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported checkpoint schema {schema:?} version {version}")]
    Schema { schema: String, version: u32 },
    #[error("checkpoint scalar type {found:?} does not match expected {expected:?}")]
    ScalarMismatch { found: String, expected: String },
    #[error("checkpoint is internally inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct CheckpointFile<S: Scalar> {
    schema: String,
    version: u32,
    scalar: String,
    dim: usize,
    hidden: usize,
    seed: u64,
    hyper: Hyperparams,
    shared_w: Vec<S>,
    shared_b: Vec<S>,
    binary_w: Vec<S>,
    binary_b: Vec<S>,
    multi_w: Vec<S>,
    multi_b: Vec<S>,
}

pub fn to_json<S: Scalar>(params: &ModelParams<S>) -> String {
    let file = CheckpointFile {
        schema: CHECKPOINT_SCHEMA.to_string(),
        version: CHECKPOINT_VERSION,
        scalar: S::TAG.to_string(),
        dim: params.dim,
        hidden: params.hidden,
        seed: params.seed,
        hyper: params.hyper,
        shared_w: params.shared_w.clone(),
        shared_b: params.shared_b.clone(),
        binary_w: params.binary_w.clone(),
        binary_b: params.binary_b.clone(),
        multi_w: params.multi_w.clone(),
        multi_b: params.multi_b.clone(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes")
}

pub fn from_json<S: Scalar>(json: &str) -> Result<ModelParams<S>, CheckpointError> {
    // Peek at the envelope first so scalar mismatches surface as such
    // instead of as number-parse noise.
    #[derive(Deserialize)]
    struct Envelope {
        schema: String,
        version: u32,
        scalar: String,
    }
    let env: Envelope = serde_json::from_str(json)?;
    if env.schema != CHECKPOINT_SCHEMA || env.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Schema { schema: env.schema, version: env.version });
    }
    if env.scalar != S::TAG {
        return Err(CheckpointError::ScalarMismatch {
            found: env.scalar,
            expected: S::TAG.to_string(),
        });
    }
    let file: CheckpointFile<S> = serde_json::from_str(json)?;
    let params = ModelParams {
        dim: file.dim,
        hidden: file.hidden,
        seed: file.seed,
        hyper: file.hyper,
        shared_w: file.shared_w,
        shared_b: file.shared_b,
        binary_w: file.binary_w,
        binary_b: file.binary_b,
        multi_w: file.multi_w,
        multi_b: file.multi_b,
    };
    let h = params.hidden;
    let checks = [
        (params.shared_w.len(), params.dim * h, "shared_w"),
        (params.shared_b.len(), h, "shared_b"),
        (params.binary_w.len(), 2 * h, "binary_w"),
        (params.binary_b.len(), 2, "binary_b"),
        (params.multi_w.len(), 4 * h, "multi_w"),
        (params.multi_b.len(), 4, "multi_b"),
    ];
    for (got, want, name) in checks {
        if got != want {
            return Err(CheckpointError::Inconsistent(format!(
                "{name} has {got} values, expected {want}"
            )));
        }
    }
    Ok(params)
}

pub fn save<S: Scalar>(params: &ModelParams<S>, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, to_json(params))?;
    Ok(())
}

pub fn load<S: Scalar>(path: &Path) -> Result<ModelParams<S>, CheckpointError> {
    from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reranker::init_params;

    #[test]
    fn round_trip_is_bit_exact() {
        let params: ModelParams<f64> = init_params(64, 8, 7, Hyperparams::default());
        let json = to_json(&params);
        let back: ModelParams<f64> = from_json(&json).unwrap();
        assert_eq!(back, params);
        // Serializing again yields identical bytes.
        assert_eq!(to_json(&back), json);
    }

    #[test]
    fn reloaded_checkpoint_reproduces_predictions_bit_exactly() {
        use crate::encoder::{Encoder, HashingEncoder};
        use crate::features::{FeatureBundle, TextInput};
        use crate::reranker::predict;

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        let params: ModelParams<f64> = init_params(64, 8, 11, Hyperparams::default());
        save(&params, &path).unwrap();
        let reloaded: ModelParams<f64> = load(&path).unwrap();

        let encoder = HashingEncoder::new(64);
        for i in 0..20 {
            let bundle = FeatureBundle {
                text: TextInput {
                    bug_type: "Dead Store".into(),
                    qualifier: format!("probe {i} tokens vary"),
                    ..Default::default()
                },
                ..Default::default()
            };
            assert_eq!(
                predict(&params, &encoder as &dyn Encoder<f64>, &bundle),
                predict(&reloaded, &encoder as &dyn Encoder<f64>, &bundle)
            );
        }
    }

    #[test]
    fn scalar_mismatch_is_detected() {
        let params: ModelParams<f32> = init_params(16, 4, 7, Hyperparams::default());
        let json = to_json(&params);
        let err = from_json::<f64>(&json).unwrap_err();
        assert!(matches!(err, CheckpointError::ScalarMismatch { .. }));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let err = from_json::<f64>(r#"{"schema":"other","version":1,"scalar":"f64"}"#).unwrap_err();
        assert!(matches!(err, CheckpointError::Schema { .. }));
    }

    #[test]
    fn truncated_weights_are_rejected() {
        let params: ModelParams<f64> = init_params(16, 4, 7, Hyperparams::default());
        let mut json = serde_json::from_str::<serde_json::Value>(&to_json(&params)).unwrap();
        json["shared_w"] = serde_json::json!([0.0, 1.0]);
        let err = from_json::<f64>(&json.to_string()).unwrap_err();
        assert!(matches!(err, CheckpointError::Inconsistent(_)));
    }
}
