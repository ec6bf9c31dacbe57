//! Canonical feature names and their order.

pub const N_FEATURES: usize = 40;
/// Everything except valence and arousal.
pub const N_BASE: usize = 38;

pub const STEMS: [&str; 4] = ["vocals", "bass", "drums", "other"];

/// The 40 feature names in vector order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "chroma_C_mean",
    "chroma_C#_mean",
    "chroma_D_mean",
    "chroma_D#_mean",
    "chroma_E_mean",
    "chroma_F_mean",
    "chroma_F#_mean",
    "chroma_G_mean",
    "chroma_G#_mean",
    "chroma_A_mean",
    "chroma_A#_mean",
    "chroma_B_mean",
    "chroma_C_std",
    "chroma_C#_std",
    "chroma_D_std",
    "chroma_D#_std",
    "chroma_E_std",
    "chroma_F_std",
    "chroma_F#_std",
    "chroma_G_std",
    "chroma_G#_std",
    "chroma_A_std",
    "chroma_A#_std",
    "chroma_B_std",
    "bpm",
    "vocals_db_mean",
    "bass_db_mean",
    "drums_db_mean",
    "other_db_mean",
    "vocals_db_std",
    "bass_db_std",
    "drums_db_std",
    "other_db_std",
    "zc_count",
    "zcr_mean",
    "zcr_median",
    "valence",
    "arousal",
    "tag_music",
    "tag_musical_instrument",
];

pub const VALENCE: usize = 36;
pub const AROUSAL: usize = 37;

/// Names of the 38 mood-model inputs, in order.
pub fn base_names() -> Vec<&'static str> {
    FEATURE_NAMES
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != VALENCE && *i != AROUSAL)
        .map(|(_, n)| *n)
        .collect()
}

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Inserts valence and arousal into a base vector.
pub fn with_mood(base: &[f64], valence: f64, arousal: f64) -> Vec<f64> {
    let mut v = base[..VALENCE].to_vec();
    v.push(valence);
    v.push(arousal);
    v.extend_from_slice(&base[VALENCE..]);
    v
}

/// Drops valence and arousal from a full vector.
pub fn without_mood(full: &[f64]) -> Vec<f64> {
    full.iter()
        .enumerate()
        .filter(|(i, _)| *i != VALENCE && *i != AROUSAL)
        .map(|(_, v)| *v)
        .collect()
}
