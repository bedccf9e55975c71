//! Versioned JSON model documents.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelSpec};
use super::params::Params;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "skelfreq-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    spec: ModelSpec,
    params: Params,
}

#[derive(Deserialize)]
struct Header {
    format: Option<String>,
    version: Option<u32>,
}

impl Model {
    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            spec: self.spec.clone(),
            params: self.params.clone(),
        };
        // serde_json prints the shortest decimal that round-trips each f64.
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::ModelMismatch(format!("not a model document: {e}")))?;
        if header.format.as_deref() != Some(MODEL_FORMAT) {
            return Err(Error::ModelMismatch(format!(
                "format is {:?}, expected {MODEL_FORMAT:?}",
                header.format
            )));
        }
        if header.version != Some(MODEL_VERSION) {
            return Err(Error::ModelMismatch(format!(
                "version {:?} is not supported (expected {MODEL_VERSION})",
                header.version
            )));
        }
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::ModelMismatch(format!("malformed model: {e}")))?;
        doc.spec
            .validate()
            .map_err(|e| Error::ModelMismatch(format!("invalid architecture: {e}")))?;
        Model::new(doc.spec, doc.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::BinSpec;
    use crate::graph::SkeletonTopology;

    fn model() -> Model {
        let spec = ModelSpec::new(SkeletonTopology::builtin("toy5").unwrap(), BinSpec::new(1.15, 4).unwrap(), &[5, 3])
            .unwrap();
        let mut m = Model::init(spec, 42, 1.0).unwrap();
        m.params.attention.w_alpha = vec![0.1 + 0.2, -1.0 / 3.0];
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = Model::from_json(&m.to_json()).unwrap();
        let bits = |m: &Model| m.params.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
        assert_eq!(back.spec, m.spec);
        assert_eq!(back.to_json(), m.to_json());
    }

    #[test]
    fn rejects_version_and_shape_mismatch() {
        let text = model().to_json();
        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(Model::from_json(&bumped), Err(Error::ModelMismatch(m)) if m.contains("version")));

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["spec"]["channels"] = serde_json::json!([2, 5, 4]);
        assert!(matches!(Model::from_json(&doc.to_string()), Err(Error::ModelMismatch(_))));

        assert!(matches!(Model::from_json("{ nope"), Err(Error::ModelMismatch(_))));
        assert!(matches!(Model::from_json("{\"format\":\"other\"}"), Err(Error::ModelMismatch(_))));
    }
}
