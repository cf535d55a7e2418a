use std::collections::BTreeMap;

use super::templates::{GestureTemplate, TemplateDatabase, SIGMA_FLOOR};
use super::StoreError;
use crate::emg::{featurize, slide_windows, EmgFrame, EmgWindow, FeatureConfig, FeatureVector, GestureLabel};

/// Windows needed per gesture before a template is built.
pub const MIN_CALIBRATION_WINDOWS: usize = 20;

/// Feature vectors collected per gesture during calibration.
#[derive(Debug, Clone)]
pub struct CalibrationSet {
    config: FeatureConfig,
    buffers: BTreeMap<GestureLabel, Vec<FeatureVector>>,
}

impl CalibrationSet {
    pub fn new(config: FeatureConfig) -> Result<Self, StoreError> {
        config.validate()?;
        Ok(Self { config, buffers: BTreeMap::new() })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Featurizes `windows` and buffers them under `label`. Returns the
    /// buffer size afterwards.
    pub fn record(&mut self, label: GestureLabel, windows: &[EmgWindow]) -> Result<usize, StoreError> {
        if label == GestureLabel::Unknown {
            return Err(StoreError::BadLabel(label));
        }
        let vectors = windows.iter().map(|w| featurize(w, &self.config)).collect::<Result<Vec<_>, _>>()?;
        if vectors.is_empty() {
            return Ok(self.count(label));
        }
        let buf = self.buffers.entry(label).or_default();
        buf.extend(vectors);
        Ok(buf.len())
    }

    /// Windows a contiguous recording of one held gesture and buffers it.
    pub fn record_stream(&mut self, label: GestureLabel, frames: &[EmgFrame]) -> Result<usize, StoreError> {
        let windows = slide_windows(frames, &self.config.window_spec())?;
        self.record(label, &windows)
    }

    pub fn count(&self, label: GestureLabel) -> usize {
        self.buffers.get(&label).map_or(0, Vec::len)
    }

    pub fn labels(&self) -> impl Iterator<Item = GestureLabel> + '_ {
        self.buffers.keys().copied()
    }

    pub fn vectors(&self, label: GestureLabel) -> &[FeatureVector] {
        self.buffers.get(&label).map_or(&[], Vec::as_slice)
    }

    pub fn clear(&mut self, label: GestureLabel) {
        self.buffers.remove(&label);
    }

    /// Builds one template per buffered gesture: per-dimension mean and
    /// population standard deviation, floored at [`SIGMA_FLOOR`].
    pub fn finalize(&self, min_windows: usize) -> Result<TemplateDatabase, StoreError> {
        let mut db = TemplateDatabase::new(self.config.clone());
        for (label, vectors) in &self.buffers {
            if vectors.len() < min_windows.max(1) {
                return Err(StoreError::InsufficientCalibration {
                    label: *label,
                    have: vectors.len(),
                    need: min_windows.max(1),
                });
            }
            db.templates.insert(*label, build_template(*label, vectors));
        }
        Ok(db)
    }
}

fn build_template(label: GestureLabel, vectors: &[FeatureVector]) -> GestureTemplate {
    let dim = vectors[0].dimension();
    let n = vectors.len() as f64;
    let mut centroid = Vec::with_capacity(dim);
    let mut sigma = Vec::with_capacity(dim);
    let mut column = Vec::with_capacity(vectors.len());
    for j in 0..dim {
        column.clear();
        column.extend(vectors.iter().map(|v| v.values[j]));
        // sorted so the sums do not depend on recording order
        column.sort_by(f64::total_cmp);
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        centroid.push(mean);
        sigma.push(var.sqrt().max(SIGMA_FLOOR));
    }
    GestureTemplate { label, centroid, sigma, sample_count: vectors.len() as u32 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emg::{EmgError, WindowSpec, CHANNELS};
    use proptest::prelude::*;

    fn constant_window(value: i8) -> EmgWindow {
        let frames = (0..40).map(|i| EmgFrame::new(i * 5_000, [value; CHANNELS])).collect();
        EmgWindow::new(frames, &WindowSpec::default()).unwrap()
    }

    fn set() -> CalibrationSet {
        CalibrationSet::new(FeatureConfig::default()).unwrap()
    }

    #[test]
    fn records_each_window() {
        let mut cal = set();
        let windows: Vec<_> = (0..30).map(|i| constant_window(i as i8)).collect();
        assert_eq!(cal.record(GestureLabel::Fist, &windows).unwrap(), 30);
        assert_eq!(cal.count(GestureLabel::Fist), 30);
        assert_eq!(cal.record(GestureLabel::Fist, &[]).unwrap(), 30);
        assert_eq!(cal.record(GestureLabel::Rest, &[]).unwrap(), 0);
        assert_eq!(cal.labels().collect::<Vec<_>>(), vec![GestureLabel::Fist]);
    }

    #[test]
    fn unknown_label_is_rejected() {
        let err = set().record(GestureLabel::Unknown, &[constant_window(1)]).unwrap_err();
        assert_eq!(err, StoreError::BadLabel(GestureLabel::Unknown));
    }

    #[test]
    fn malformed_frames_propagate() {
        let rows: Vec<(u64, Vec<i8>)> = vec![(0, vec![0; 8]), (5_000, vec![0; 7])];
        let run = || -> Result<usize, StoreError> {
            let frames = rows.iter().map(|(t, ch)| EmgFrame::from_slice(*t, ch)).collect::<Result<Vec<_>, _>>()?;
            set().record_stream(GestureLabel::Fist, &frames)
        };
        assert!(matches!(run(), Err(StoreError::Emg(EmgError::MalformedStream(_)))));

        let mut frames: Vec<_> = (0..50).map(|i| EmgFrame::new(i * 5_000, [0; 8])).collect();
        frames[10].timestamp_us = 0;
        assert!(matches!(
            set().record_stream(GestureLabel::Fist, &frames),
            Err(StoreError::Emg(EmgError::MalformedStream(_)))
        ));
    }

    #[test]
    fn identical_vectors_hit_the_floor() {
        let mut cal = set();
        cal.record(GestureLabel::Rest, &vec![constant_window(3); 20]).unwrap();
        let db = cal.finalize(20).unwrap();
        let t = &db.templates[&GestureLabel::Rest];
        assert_eq!(t.sigma, vec![SIGMA_FLOOR; 32]);
        assert_eq!(t.centroid[0], 3.0);
        assert_eq!(t.sample_count, 20);
    }

    #[test]
    fn two_point_population_sigma() {
        let mut cal = set();
        let id = cal.config.id();
        let buf = cal.buffers.entry(GestureLabel::Fist).or_default();
        buf.push(FeatureVector::new(vec![0.0; 32], id));
        buf.push(FeatureVector::new(vec![2.0; 32], id));
        let db = cal.finalize(2).unwrap();
        let t = &db.templates[&GestureLabel::Fist];
        assert_eq!(t.centroid, vec![1.0; 32]);
        assert_eq!(t.sigma, vec![1.0; 32]);
    }

    #[test]
    fn too_few_windows() {
        let mut cal = set();
        cal.record(GestureLabel::Fist, &vec![constant_window(3); 19]).unwrap();
        assert_eq!(
            cal.finalize(MIN_CALIBRATION_WINDOWS).unwrap_err(),
            StoreError::InsufficientCalibration { label: GestureLabel::Fist, have: 19, need: 20 }
        );
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            (rows, shuffled) in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 32), 3..40)
                .prop_flat_map(|rows| (Just(rows.clone()), Just(rows).prop_shuffle())),
        ) {
            let id = FeatureConfig::default().id();
            let to_vectors = |rows: Vec<Vec<f64>>| -> Vec<FeatureVector> {
                rows.into_iter().map(|r| FeatureVector::new(r, id)).collect()
            };
            let a = build_template(GestureLabel::Fist, &to_vectors(rows));
            let b = build_template(GestureLabel::Fist, &to_vectors(shuffled));
            prop_assert_eq!(a, b);
        }
    }
}
