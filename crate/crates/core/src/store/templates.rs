use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::emg::{FeatureConfig, GestureLabel};

pub const SCHEMA_VERSION: u32 = 1;

/// Lower bound applied to every per-dimension spread.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Centroid and spread of one gesture's calibration vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureTemplate {
    pub label: GestureLabel,
    pub centroid: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sample_count: u32,
}

/// The gesture database: shared feature settings plus one template per
/// calibrated gesture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DbFile", try_from = "DbFile")]
pub struct TemplateDatabase {
    pub schema_version: u32,
    pub feature_config: FeatureConfig,
    pub templates: BTreeMap<GestureLabel, GestureTemplate>,
}

#[derive(Serialize, Deserialize)]
struct DbFile {
    schema_version: u32,
    feature_config: FeatureConfig,
    templates: BTreeMap<GestureLabel, TemplateFile>,
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    centroid: Vec<f64>,
    sigma: Vec<f64>,
    sample_count: u32,
}

impl From<TemplateDatabase> for DbFile {
    fn from(db: TemplateDatabase) -> Self {
        DbFile {
            schema_version: db.schema_version,
            feature_config: db.feature_config,
            templates: db
                .templates
                .into_values()
                .map(|t| (t.label, TemplateFile { centroid: t.centroid, sigma: t.sigma, sample_count: t.sample_count }))
                .collect(),
        }
    }
}

impl TryFrom<DbFile> for TemplateDatabase {
    type Error = StoreError;

    fn try_from(f: DbFile) -> Result<Self, StoreError> {
        let db = TemplateDatabase {
            schema_version: f.schema_version,
            feature_config: f.feature_config,
            templates: f
                .templates
                .into_iter()
                .map(|(label, t)| {
                    (
                        label,
                        GestureTemplate { label, centroid: t.centroid, sigma: t.sigma, sample_count: t.sample_count },
                    )
                })
                .collect(),
        };
        db.validate()?;
        Ok(db)
    }
}

impl TemplateDatabase {
    pub fn new(feature_config: FeatureConfig) -> Self {
        Self { schema_version: SCHEMA_VERSION, feature_config, templates: BTreeMap::new() }
    }

    /// Structural checks: supported schema, valid feature settings, and
    /// templates that match the feature dimension.
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema(u64::from(self.schema_version)));
        }
        self.feature_config.validate().map_err(|e| StoreError::CorruptDatabase(e.to_string()))?;
        let dim = self.feature_config.dimension();
        for (label, t) in &self.templates {
            let bad = |why: String| Err(StoreError::CorruptDatabase(format!("template {label}: {why}")));
            if *label == GestureLabel::Unknown || t.label != *label {
                return bad("invalid label".into());
            }
            if t.centroid.len() != dim || t.sigma.len() != dim {
                return bad(format!(
                    "dimension {}/{} does not match feature dimension {dim}",
                    t.centroid.len(),
                    t.sigma.len()
                ));
            }
            if t.centroid.iter().any(|v| !v.is_finite()) {
                return bad("non-finite centroid".into());
            }
            if t.sigma.iter().any(|s| !s.is_finite() || *s < SIGMA_FLOOR) {
                return bad("sigma below floor".into());
            }
            if t.sample_count == 0 {
                return bad("no samples".into());
            }
        }
        Ok(())
    }

    /// A session needs Rest plus at least one active gesture.
    pub fn check_session_ready(&self) -> Result<(), StoreError> {
        if !self.templates.contains_key(&GestureLabel::Rest) {
            return Err(StoreError::NotSessionReady("no rest template".into()));
        }
        if !self.templates.keys().any(|l| l.is_active()) {
            return Err(StoreError::NotSessionReady("no active gesture template".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("database serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| StoreError::CorruptDatabase(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(StoreError::UnsupportedSchema(v)),
            None => return Err(StoreError::CorruptDatabase("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| StoreError::CorruptDatabase(e.to_string()))
    }
}

pub fn save_db(db: &TemplateDatabase, path: &Path) -> Result<(), StoreError> {
    super::write_atomic(path, db.to_json().as_bytes())
}

pub fn load_db(path: &Path) -> Result<TemplateDatabase, StoreError> {
    let text = std::fs::read_to_string(path)?;
    TemplateDatabase::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_db() -> TemplateDatabase {
        let mut db = TemplateDatabase::new(FeatureConfig::default());
        for (i, label) in [GestureLabel::Rest, GestureLabel::Fist].into_iter().enumerate() {
            db.templates.insert(
                label,
                GestureTemplate {
                    label,
                    centroid: (0..32).map(|j| (i * 32 + j) as f64 / 3.0).collect(),
                    sigma: vec![0.1; 32],
                    sample_count: 25,
                },
            );
        }
        db
    }

    #[test]
    fn json_key_names() {
        let v: serde_json::Value = serde_json::from_str(&sample_db().to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
        let fc = &v["feature_config"];
        for key in ["sample_rate_hz", "window_ms", "step_ms", "features", "zc_deadband"] {
            assert!(fc.get(key).is_some(), "{key}");
        }
        assert_eq!(fc["features"], serde_json::json!(["mav", "rms", "wl", "zc"]));
        let fist = &v["templates"]["fist"];
        assert_eq!(fist["sample_count"], 25);
        assert_eq!(fist["centroid"].as_array().unwrap().len(), 32);
        assert_eq!(fist["sigma"].as_array().unwrap().len(), 32);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("templates.json");
        let db = sample_db();
        save_db(&db, &path).unwrap();
        assert_eq!(load_db(&path).unwrap(), db);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let json = sample_db().to_json();
        let cut = &json[..json.len() / 2];
        assert!(matches!(TemplateDatabase::from_json(cut), Err(StoreError::CorruptDatabase(_))));
    }

    #[test]
    fn future_schema_is_unsupported() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_db().to_json()).unwrap();
        v["schema_version"] = 999.into();
        let err = TemplateDatabase::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, StoreError::UnsupportedSchema(999)));
    }

    #[test]
    fn structural_violations_are_corrupt() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_db().to_json()).unwrap();
        v["templates"]["fist"]["sigma"] = serde_json::json!([1.0]);
        assert!(matches!(TemplateDatabase::from_json(&v.to_string()), Err(StoreError::CorruptDatabase(_))));

        let mut v: serde_json::Value = serde_json::from_str(&sample_db().to_json()).unwrap();
        v["templates"]["unknown"] = v["templates"]["fist"].clone();
        assert!(matches!(TemplateDatabase::from_json(&v.to_string()), Err(StoreError::CorruptDatabase(_))));
    }

    #[test]
    fn session_readiness() {
        let mut db = sample_db();
        db.check_session_ready().unwrap();
        db.templates.remove(&GestureLabel::Fist);
        assert!(matches!(db.check_session_ready(), Err(StoreError::NotSessionReady(_))));
        let mut db = sample_db();
        db.templates.remove(&GestureLabel::Rest);
        assert!(db.check_session_ready().is_err());
    }
}
