//! Genre-tag scores produced by an external audio tagger.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io, FeatureError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenreTags {
    pub music: f64,
    pub musical_instrument: f64,
    /// The sidecar was missing and defaults were substituted.
    pub defaulted: bool,
}

impl GenreTags {
    pub const DEFAULT: GenreTags = GenreTags {
        music: 1.0,
        musical_instrument: 1.0,
        defaulted: true,
    };
}

pub fn sidecar_path(dir: &Path, clip_id: &str) -> std::path::PathBuf {
    dir.join(format!("{clip_id}.tags.json"))
}

/// Reads `{"Music": .., "Musical Instrument": ..}`. A missing file is an
/// error unless `allow_defaults`, which yields (1.0, 1.0) and a warning.
pub fn load_genre_tags(path: &Path, allow_defaults: bool) -> Result<GenreTags> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            if allow_defaults {
                tracing::warn!(path = %path.display(), "tag sidecar missing, using defaults");
                return Ok(GenreTags::DEFAULT);
            }
            return Err(FeatureError::MissingSidecar(path.to_path_buf()));
        }
        Err(e) => return Err(io(path, e)),
    };
    let map: BTreeMap<String, f64> = serde_json::from_str(&text)?;
    let get = |key: &str| -> Result<f64> {
        let v = *map
            .get(key)
            .ok_or_else(|| FeatureError::Validation(format!("{}: no \"{key}\" score", path.display())))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(FeatureError::Validation(format!(
                "{}: \"{key}\" score {v} outside [0, 1]",
                path.display()
            )));
        }
        Ok(v)
    };
    Ok(GenreTags {
        music: get("Music")?,
        musical_instrument: get("Musical Instrument")?,
        defaulted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let p = sidecar_path(dir.path(), "c1");
        std::fs::write(&p, r#"{"Music":0.97,"Musical Instrument":0.88,"Speech":0.01}"#).unwrap();
        let t = load_genre_tags(&p, false).unwrap();
        assert_eq!((t.music, t.musical_instrument, t.defaulted), (0.97, 0.88, false));
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = sidecar_path(dir.path(), "nope");
        assert!(matches!(load_genre_tags(&p, false), Err(FeatureError::MissingSidecar(_))));
        assert_eq!(load_genre_tags(&p, true).unwrap(), GenreTags::DEFAULT);
    }

    #[test]
    fn out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = sidecar_path(dir.path(), "c2");
        std::fs::write(&p, r#"{"Music":1.2,"Musical Instrument":0.5}"#).unwrap();
        assert!(matches!(load_genre_tags(&p, false), Err(FeatureError::Validation(_))));
    }
}
