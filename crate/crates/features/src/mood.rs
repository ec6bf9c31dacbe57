//! Valence/arousal regressors trained on an external emotion dataset.

use std::path::Path;

use memorability_learn::{train_svr, Kernel, SvrConfig, SvrModel};
use serde::{Deserialize, Serialize};

use crate::error::{io, FeatureError, Result};

pub const MIN_MOOD_ROWS: usize = 10;
pub const MOOD_EPSILON: f64 = 0.01;

/// One annotated clip of the emotion dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoodRow {
    pub features: Vec<f64>,
    pub valence: f64,
    pub arousal: f64,
}

/// Two linear SVRs over a fixed input space. Standardization lives inside
/// each regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoodModel {
    pub input_names: Vec<String>,
    pub valence: SvrModel,
    pub arousal: SvrModel,
}

fn check_target(name: &str, y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FeatureError::Validation(format!("{name} target {v} outside [0, 1]")));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(FeatureError::Degenerate(format!("{name} targets are constant")));
    }
    Ok(())
}

pub fn train_mood_model(rows: &[MoodRow], input_names: &[String]) -> Result<MoodModel> {
    if rows.len() < MIN_MOOD_ROWS {
        return Err(FeatureError::Validation(format!(
            "mood dataset has {} rows, need at least {MIN_MOOD_ROWS}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.features.len() != input_names.len()) {
        return Err(FeatureError::Validation(format!(
            "mood row of width {} for {} inputs",
            r.features.len(),
            input_names.len()
        )));
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.valence).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.arousal).collect();
    check_target("valence", &v)?;
    check_target("arousal", &a)?;
    let cfg = SvrConfig {
        kernel: Kernel::Linear,
        epsilon: MOOD_EPSILON,
        ..Default::default()
    };
    Ok(MoodModel {
        input_names: input_names.to_vec(),
        valence: train_svr(&x, &v, &cfg)?,
        arousal: train_svr(&x, &a, &cfg)?,
    })
}

impl MoodModel {
    /// (valence, arousal), each clamped to [0, 1].
    pub fn predict(&self, features: &[f64]) -> Result<(f64, f64)> {
        if features.len() != self.input_names.len() {
            return Err(FeatureError::Validation(format!(
                "mood input of width {} for {} inputs",
                features.len(),
                self.input_names.len()
            )));
        }
        let v = self.valence.predict_row(features).clamp(0.0, 1.0);
        let a = self.arousal.predict_row(features).clamp(0.0, 1.0);
        Ok((v, a))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn predict_mood(model: &MoodModel, features: &[f64]) -> Result<(f64, f64)> {
    model.predict(features)
}
