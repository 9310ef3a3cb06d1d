use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqart_core::abx::PhoneInventory;
use vqart_core::features::ArticulatoryLayout;

use crate::error::{Error, Result};
use crate::io::json::sha256_hex;
use crate::io::phone_table::{builtin_phone_table, read_phone_table};

const BUILTIN: &str = "builtin:";

/// Either a preset name (`mocha`, `pb2007`) or an explicit coil list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutSpec {
    Preset(String),
    Custom(ArticulatoryLayout),
}

impl LayoutSpec {
    pub fn resolve(&self) -> Result<ArticulatoryLayout> {
        match self {
            LayoutSpec::Preset(name) => match name.as_str() {
                "mocha" => Ok(ArticulatoryLayout::mocha()),
                "pb2007" => Ok(ArticulatoryLayout::pb2007()),
                other => Err(Error::Usage(format!("unknown articulatory layout `{other}` (try mocha or pb2007)"))),
            },
            LayoutSpec::Custom(layout) => {
                layout.validate()?;
                Ok(layout.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker: String,
    pub wav: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ema: Option<PathBuf>,
    pub segmentation: PathBuf,
}

/// Paths are relative to the manifest's directory unless absolute.
/// `phone_table` is a CSV path or `builtin:mocha` / `builtin:pb2007`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub corpus: String,
    pub layout: LayoutSpec,
    pub phone_table: String,
    pub utterances: Vec<UtteranceRecord>,
}

/// A manifest that passed validation, with its location and content hash.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: CorpusManifest,
    pub path: PathBuf,
    pub dir: PathBuf,
    pub sha256: String,
    pub layout: ArticulatoryLayout,
    pub inventory: PhoneInventory,
}

impl LoadedManifest {
    /// Reads and checks a manifest: unique ids, existing files, a usable
    /// layout and phone table. Nothing is written.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest: CorpusManifest =
            serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if manifest.utterances.is_empty() {
            return Err(Error::format(path, "manifest lists no utterances"));
        }
        let mut seen = BTreeSet::new();
        for u in &manifest.utterances {
            if !seen.insert(u.utterance_id.as_str()) {
                return Err(Error::format(path, format!("utterance id `{}` appears twice", u.utterance_id)));
            }
            let files = [Some(&u.wav), u.ema.as_ref(), Some(&u.segmentation)];
            for f in files.into_iter().flatten() {
                let full = dir.join(f);
                if !full.is_file() {
                    return Err(Error::format(
                        path,
                        format!("utterance `{}` references missing file {}", u.utterance_id, full.display()),
                    ));
                }
            }
        }
        let layout = manifest.layout.resolve()?;
        let inventory = match manifest.phone_table.strip_prefix(BUILTIN) {
            Some(name) => builtin_phone_table(name)?,
            None => read_phone_table(&dir.join(&manifest.phone_table))?,
        };
        Ok(LoadedManifest {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
            manifest,
            dir,
            layout,
            inventory,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.dir.join(p)
    }

    /// Speaker names in sorted order.
    pub fn speakers(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.manifest.utterances.iter().map(|u| u.speaker.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn speaker_records(&self, speaker: &str) -> Vec<&UtteranceRecord> {
        self.manifest.utterances.iter().filter(|u| u.speaker == speaker).collect()
    }

    /// The named speaker, or the only one when `None`.
    pub fn pick_speaker(&self, speaker: Option<&str>) -> Result<String> {
        let all = self.speakers();
        match speaker {
            Some(s) if all.iter().any(|a| a == s) => Ok(s.to_string()),
            Some(s) => Err(Error::Usage(format!("speaker `{s}` is not in the manifest (have: {})", all.join(", ")))),
            None if all.len() == 1 => Ok(all[0].clone()),
            None => Err(Error::Usage(format!(
                "manifest has several speakers ({}); pick one with --speaker",
                all.join(", ")
            ))),
        }
    }
}
