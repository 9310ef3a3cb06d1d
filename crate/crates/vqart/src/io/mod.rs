//! Readers and writers for every file the toolkit consumes or produces.

pub mod ema;
pub mod feature_csv;
pub mod json;
pub mod manifest;
pub mod phone_table;
pub mod report;
pub mod segmentation;
pub mod wav;

pub use ema::{read_ema_csv, write_ema_csv, EmaTrack};
pub use feature_csv::{read_features, sidecar_path, write_features, FeatureSidecar};
pub use json::{read_json, sha256_file, sha256_hex, write_json};
pub use manifest::{CorpusManifest, LayoutSpec, LoadedManifest, UtteranceRecord};
pub use phone_table::{builtin_phone_table, parse_phone_table, read_phone_table, write_phone_table};
pub use segmentation::{parse_segmentation, read_segmentation, write_segmentation};
pub use wav::{read_wav, write_wav, Waveform};
