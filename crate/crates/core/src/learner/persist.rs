//! Model files: a versioned JSON envelope whose numeric arrays are stored
//! as base-64 little-endian `f64` with an explicit shape.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Serialize;

use crate::error::{Error, ModelFileError, Result};
use crate::learner::model::Model;

pub const FORMAT_VERSION: i64 = 1;

fn encode_f64(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

fn decode_f64(data: &str, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(data).map_err(|e| format!("bad base-64 array: {e}"))?;
    if bytes.len() != expected * 8 {
        return Err(format!(
            "array holds {} bytes but its shape needs {}",
            bytes.len(),
            expected * 8
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err("array contains a non-finite value".into());
    }
    Ok(values)
}

/// `Array2<f64>` as `{"shape": [rows, cols], "data": "<base64>"}`.
pub mod array2 {
    use ndarray::Array2;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Encoded {
        shape: [usize; 2],
        data: String,
    }

    pub fn serialize<S: Serializer>(a: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let a = a.as_standard_layout();
        Encoded {
            shape: [a.nrows(), a.ncols()],
            data: super::encode_f64(a.as_slice().expect("standard layout")),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let e = Encoded::deserialize(d)?;
        let n = e.shape[0]
            .checked_mul(e.shape[1])
            .ok_or_else(|| D::Error::custom("array shape overflows"))?;
        let values = super::decode_f64(&e.data, n).map_err(D::Error::custom)?;
        Array2::from_shape_vec((e.shape[0], e.shape[1]), values).map_err(D::Error::custom)
    }
}

/// `Vec<f64>` as `{"shape": [len], "data": "<base64>"}`.
pub mod vec_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Encoded {
        shape: [usize; 1],
        data: String,
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        Encoded {
            shape: [v.len()],
            data: super::encode_f64(v),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let e = Encoded::deserialize(d)?;
        super::decode_f64(&e.data, e.shape[0]).map_err(D::Error::custom)
    }
}

/// Unlabelled bags as a list of `{"task_id", "points"}`.
pub mod bags {
    use ndarray::Array2;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::bag::Bag;

    #[derive(Serialize, Deserialize)]
    struct Encoded {
        task_id: String,
        #[serde(with = "super::array2")]
        points: Array2<f64>,
    }

    pub fn serialize<S: Serializer>(bags: &[Bag], s: S) -> Result<S::Ok, S::Error> {
        let encoded: Vec<Encoded> = bags
            .iter()
            .map(|b| Encoded {
                task_id: b.task_id().to_owned(),
                points: b.points().to_owned(),
            })
            .collect();
        encoded.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Bag>, D::Error> {
        Vec::<Encoded>::deserialize(d)?
            .into_iter()
            .map(|e| Bag::new(e.task_id, e.points, None).map_err(D::Error::custom))
            .collect()
    }
}

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    format_version: i64,
    #[serde(flatten)]
    model: &'a Model,
}

pub fn model_to_json(model: &Model) -> Result<String> {
    serde_json::to_string(&EnvelopeRef {
        format_version: FORMAT_VERSION,
        model,
    })
    .map_err(|e| Error::Numerical(format!("cannot serialize model: {e}")))
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ModelFileError::Schema("top level is not an object".into()))?;
    let version = obj
        .remove("format_version")
        .ok_or_else(|| ModelFileError::Schema("missing format_version".into()))?;
    let version = version
        .as_i64()
        .ok_or_else(|| ModelFileError::Schema("format_version is not an integer".into()))?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::Version {
            found: version,
            supported: FORMAT_VERSION,
        }
        .into());
    }
    let model: Model = serde_json::from_value(value).map_err(|e| ModelFileError::Schema(e.to_string()))?;
    model.validate().map_err(|e| ModelFileError::Schema(e.to_string()))?;
    Ok(model)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
    model_from_json(&text)
}
