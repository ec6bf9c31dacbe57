//! The 40-dimensional explainable handcrafted feature vector: harmony,
//! rhythm, stem loudness, zero crossings, mood and genre tags.

pub mod error;
pub mod extract;
pub mod harmony;
pub mod mood;
pub mod names;
pub mod table;
pub mod tags;
pub mod timbre;

pub use error::{FeatureError, Result};
pub use extract::{
    assemble_features, augment_batch, augment_clip, complete_features, extract_base_features, extract_batch,
    load_inputs, preprocess, AugmentedRow, BaseFeatures, ClipInput, EhcFeatureVector, Provenance, SourceDirs,
};
pub use harmony::extract_harmony;
pub use mood::{predict_mood, train_mood_model, MoodModel, MoodRow};
pub use names::{base_names, feature_names, FEATURE_NAMES, N_BASE, N_FEATURES};
pub use table::{read_mood_dataset, AugmentedTable, FeatureTable};
pub use tags::{load_genre_tags, GenreTags};
pub use timbre::{extract_timbre, load_stems, StemSet, Timbre};
