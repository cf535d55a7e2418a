//! Nearest-centroid gesture classification with rejection.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::label::GestureLabel;
use super::EmgError;
use crate::store::{GestureTemplate, TemplateDatabase, SIGMA_FLOOR};

/// Default rejection threshold in sigma-normalized units.
pub const DEFAULT_REJECT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: GestureLabel,
    /// Standardized distance to the nearest template.
    pub distance: f64,
    /// End time of the classified window.
    pub timestamp_us: u64,
}

/// Root-mean-square z-score of `values` against a template.
pub fn standardized_distance(values: &[f64], template: &GestureTemplate) -> f64 {
    let dim = values.len();
    let sum: f64 = values
        .iter()
        .zip(&template.centroid)
        .zip(&template.sigma)
        .map(|((x, c), s)| {
            let z = (x - c) / s.max(SIGMA_FLOOR);
            z * z
        })
        .sum();
    (sum / dim as f64).sqrt()
}

/// Labels `fv` with its nearest template, or `Unknown` when even the nearest
/// one is farther than `reject_threshold`. Exact ties go to the label that
/// comes first in [`GestureLabel`] order.
pub fn classify(
    fv: &FeatureVector,
    db: &TemplateDatabase,
    reject_threshold: f64,
    timestamp_us: u64,
) -> Result<Classification, EmgError> {
    if reject_threshold.is_nan() || reject_threshold <= 0.0 {
        return Err(EmgError::BadConfig(format!("reject threshold must be positive, got {reject_threshold}")));
    }
    let expected = db.feature_config.id();
    if fv.config_id != expected {
        return Err(EmgError::ConfigMismatch { expected, found: fv.config_id });
    }
    if db.templates.is_empty() {
        return Err(EmgError::EmptyDatabase);
    }
    let mut best: Option<(GestureLabel, f64)> = None;
    // BTreeMap iteration follows label order, so strict `<` keeps the
    // earliest label on ties.
    for (label, template) in &db.templates {
        if template.centroid.len() != fv.dimension() {
            return Err(EmgError::ConfigMismatch { expected, found: fv.config_id });
        }
        let d = standardized_distance(&fv.values, template);
        match best {
            Some((_, bd)) if d.is_nan() || d >= bd => {}
            _ => best = Some((*label, d)),
        }
    }
    let (label, distance) = best.expect("non-empty database");
    let label = if distance <= reject_threshold { label } else { GestureLabel::Unknown };
    Ok(Classification { label, distance, timestamp_us })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emg::{FeatureConfig, FeatureConfigId};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn template(label: GestureLabel, centroid: Vec<f64>, sigma: Vec<f64>) -> GestureTemplate {
        GestureTemplate { label, centroid, sigma, sample_count: 20 }
    }

    fn db(templates: Vec<GestureTemplate>) -> TemplateDatabase {
        TemplateDatabase {
            schema_version: crate::store::SCHEMA_VERSION,
            feature_config: FeatureConfig::default(),
            templates: templates.into_iter().map(|t| (t.label, t)).collect(),
        }
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector::new(values, FeatureConfig::default().id())
    }

    #[test]
    fn exact_centroid_is_zero_distance() {
        let fist: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let d = db(vec![
            template(GestureLabel::Rest, vec![0.0; 32], vec![1.0; 32]),
            template(GestureLabel::Fist, fist.clone(), vec![2.0; 32]),
        ]);
        let c = classify(&fv(fist), &d, 3.0, 7).unwrap();
        assert_eq!((c.label, c.distance, c.timestamp_us), (GestureLabel::Fist, 0.0, 7));
    }

    #[test]
    fn far_vector_is_rejected_with_min_distance() {
        let d = db(vec![
            template(GestureLabel::Rest, vec![0.0; 32], vec![1.0; 32]),
            template(GestureLabel::Fist, vec![10.0; 32], vec![1.0; 32]),
        ]);
        let c = classify(&fv(vec![20.0; 32]), &d, 3.0, 0).unwrap();
        assert_eq!(c.label, GestureLabel::Unknown);
        assert_eq!(c.distance, 10.0);
    }

    #[test]
    fn ties_go_to_earlier_label() {
        let d = db(vec![
            template(GestureLabel::WaveIn, vec![2.0; 32], vec![1.0; 32]),
            template(GestureLabel::Fist, vec![0.0; 32], vec![1.0; 32]),
        ]);
        let c = classify(&fv(vec![1.0; 32]), &d, 3.0, 0).unwrap();
        assert_eq!(c.label, GestureLabel::Fist);
    }

    #[test]
    fn error_paths() {
        let d = db(vec![template(GestureLabel::Rest, vec![0.0; 32], vec![1.0; 32])]);
        let wrong = FeatureVector::new(vec![0.0; 32], FeatureConfigId(1));
        assert!(matches!(classify(&wrong, &d, 3.0, 0), Err(EmgError::ConfigMismatch { .. })));
        assert_eq!(classify(&fv(vec![0.0; 32]), &db(vec![]), 3.0, 0), Err(EmgError::EmptyDatabase));
        assert!(matches!(classify(&fv(vec![0.0; 32]), &d, 0.0, 0), Err(EmgError::BadConfig(_))));
    }

    #[test]
    fn degenerate_sigma_uses_floor() {
        let d = db(vec![template(GestureLabel::Rest, vec![0.0; 32], vec![0.0; 32])]);
        let c = classify(&fv(vec![1e-6; 32]), &d, 3.0, 0).unwrap();
        assert_eq!(c.label, GestureLabel::Rest);
        assert!((c.distance - 1.0).abs() < 1e-12);
    }

    fn arb_db() -> impl Strategy<Value = TemplateDatabase> {
        let t = (prop::collection::vec(-5.0f64..5.0, 32), prop::collection::vec(0.1f64..3.0, 32));
        (prop::collection::vec(t, 5), prop::sample::subsequence(GestureLabel::TEMPLATE_LABELS.to_vec(), 1..=5))
            .prop_map(|(params, labels)| {
                let templates: BTreeMap<_, _> =
                    labels.into_iter().zip(params).map(|(l, (c, s))| (l, template(l, c, s))).collect();
                TemplateDatabase { templates, ..db(vec![]) }
            })
    }

    proptest! {
        #[test]
        fn label_invariant_under_threshold_rescaling(
            d in arb_db(),
            values in prop::collection::vec(-6.0f64..6.0, 32),
            t in 0.5f64..5.0,
            k in 0.1f64..10.0,
        ) {
            let v = fv(values);
            let a = classify(&v, &d, t, 0).unwrap();
            let b = classify(&v, &d, t * k, 0).unwrap();
            prop_assert_eq!(a.distance, b.distance);
            if (a.distance <= t) == (a.distance <= t * k) {
                prop_assert_eq!(a.label, b.label);
            }
        }
    }
}
