//! JSON schemas for dataset directories and summary files.
//!
//! A dataset directory contains:
//!
//! ```text
//! manifest.json                  ManifestFile
//! references.json                SummaryFile (reference summaries)
//! videos/<id>.chf                shot features (CHF1)
//! videos/<id>.annotations.json   AnnotationFile
//! ```
//!
//! Every JSON document carries a mandatory `version` field.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::features::{load_features, save_features, ShotFeatureSequence};
use super::vocab::{ConceptVocabulary, Query};
use crate::error::{ChanError, Result};
use crate::evaluation::ShotConceptSets;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Duration of one shot.
pub const SHOT_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub version: u32,
    pub vocabulary: Vec<String>,
    /// One embedding per vocabulary entry, inline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<Vec<Vec<f64>>>,
    /// Alternatively, a GloVe-style text file (`word v1 v2 ...`) relative
    /// to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings_path: Option<String>,
    pub queries: Vec<[String; 2]>,
    pub videos: Vec<VideoEntry>,
    pub references: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoEntry {
    pub id: String,
    pub features: String,
    pub annotations: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub version: u32,
    pub video_id: String,
    pub shots: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryFile {
    pub version: u32,
    pub summaries: Vec<SummaryEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryEntry {
    pub video_id: String,
    pub query: [String; 2],
    pub shots: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

/// A selected (or reference) shot set for one video and query.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub video_id: String,
    pub query: Query,
    pub shots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub features: ShotFeatureSequence,
    pub annotations: ShotConceptSets,
}

impl VideoRecord {
    pub fn n_shots(&self) -> usize {
        self.features.n_shots()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_shots() as f64 * SHOT_SECONDS
    }
}

/// A fully loaded and cross-validated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocabulary: ConceptVocabulary,
    pub queries: Vec<Query>,
    pub videos: Vec<VideoRecord>,
    pub references: Vec<Summary>,
    pub generator: Option<serde_json::Value>,
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| ChanError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ChanError::json(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ChanError::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| ChanError::io(path, e))
}

fn check_version(found: u32, what: &Path) -> Result<()> {
    if found != FORMAT_VERSION {
        log::error!("{}: version {found}", what.display());
        return Err(ChanError::UnsupportedVersion { found, expected: FORMAT_VERSION });
    }
    Ok(())
}

fn parse_glove(path: &Path, vocabulary: &[String]) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| ChanError::io(path, e))?;
    let wanted: HashSet<&str> = vocabulary.iter().map(String::as_str).collect();
    let mut found: HashMap<&str, Vec<f64>> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        if !wanted.contains(word) {
            continue;
        }
        let values = parts
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| ChanError::Validation(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        found.insert(word, values);
    }
    vocabulary
        .iter()
        .map(|w| {
            found
                .remove(w.as_str())
                .ok_or_else(|| ChanError::Validation(format!("no embedding for `{w}` in {}", path.display())))
        })
        .collect()
}

pub fn summaries_from_file(file: SummaryFile, vocab: &ConceptVocabulary, path: &Path) -> Result<Vec<Summary>> {
    check_version(file.version, path)?;
    file.summaries
        .into_iter()
        .map(|e| {
            Ok(Summary {
                query: Query::new(vocab.id(&e.query[0])?, vocab.id(&e.query[1])?),
                video_id: e.video_id,
                shots: e.shots,
            })
        })
        .collect()
}

pub fn read_summaries(path: impl AsRef<Path>, vocab: &ConceptVocabulary) -> Result<Vec<Summary>> {
    let path = path.as_ref();
    summaries_from_file(read_json(path)?, vocab, path)
}

pub fn summary_file(summaries: &[Summary], scores: Option<&[Vec<f64>]>, vocab: &ConceptVocabulary) -> SummaryFile {
    SummaryFile {
        version: FORMAT_VERSION,
        summaries: summaries
            .iter()
            .enumerate()
            .map(|(i, s)| SummaryEntry {
                video_id: s.video_id.clone(),
                query: s.query.names(vocab),
                shots: s.shots.clone(),
                scores: scores.map(|sc| sc[i].clone()),
            })
            .collect(),
    }
}

pub fn write_summaries(path: impl AsRef<Path>, summaries: &[Summary], vocab: &ConceptVocabulary) -> Result<()> {
    write_json(path.as_ref(), &summary_file(summaries, None, vocab))
}

impl Dataset {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: ManifestFile = read_json(&manifest_path)?;
        check_version(manifest.version, &manifest_path)?;
        let embeddings = match (manifest.embeddings, &manifest.embeddings_path) {
            (Some(e), None) => e,
            (None, Some(p)) => parse_glove(&dir.join(p), &manifest.vocabulary)?,
            _ => {
                return Err(ChanError::Validation(
                    "manifest needs exactly one of `embeddings` or `embeddings_path`".into(),
                ))
            }
        };
        let vocabulary = ConceptVocabulary::new(manifest.vocabulary, embeddings)?;
        let queries = manifest
            .queries
            .iter()
            .map(|[a, b]| Ok(Query::new(vocabulary.id(a)?, vocabulary.id(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut videos = Vec::with_capacity(manifest.videos.len());
        for entry in &manifest.videos {
            let features = load_features(dir.join(&entry.features))?;
            let ann_path = dir.join(&entry.annotations);
            let ann: AnnotationFile = read_json(&ann_path)?;
            check_version(ann.version, &ann_path)?;
            if ann.video_id != entry.id {
                return Err(ChanError::Validation(format!(
                    "{} annotates `{}`, expected `{}`",
                    ann_path.display(),
                    ann.video_id,
                    entry.id
                )));
            }
            let sets = ann
                .shots
                .iter()
                .map(|names| names.iter().map(|n| vocabulary.id(n)).collect::<Result<BTreeSet<_>>>())
                .collect::<Result<Vec<_>>>()?;
            videos.push(VideoRecord {
                id: entry.id.clone(),
                features,
                annotations: ShotConceptSets::new(sets),
            });
        }
        let references = read_summaries(dir.join(&manifest.references), &vocabulary)?;
        let dataset = Dataset {
            vocabulary,
            queries,
            videos,
            references,
            generator: manifest.generator,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Checks every cross-reference: annotation lengths, reference video
    /// ids, reference shot indices and query membership.
    pub fn validate(&self) -> Result<()> {
        if self.videos.is_empty() {
            return Err(ChanError::Validation("dataset has no videos".into()));
        }
        let mut ids = HashSet::new();
        for v in &self.videos {
            if !ids.insert(v.id.as_str()) {
                return Err(ChanError::Validation(format!("duplicate video id `{}`", v.id)));
            }
            if v.annotations.len() != v.n_shots() {
                return Err(ChanError::Validation(format!(
                    "video `{}`: {} annotations for {} shots",
                    v.id,
                    v.annotations.len(),
                    v.n_shots()
                )));
            }
            if v.annotations.iter().flatten().any(|c| c.0 >= self.vocabulary.len()) {
                return Err(ChanError::Validation(format!("video `{}` uses an unknown concept", v.id)));
            }
        }
        let queries: HashSet<Query> = self.queries.iter().map(|q| q.canonical()).collect();
        for q in &self.queries {
            for c in q.concepts() {
                self.vocabulary.embedding(c)?;
            }
        }
        for r in &self.references {
            let video = self
                .video(&r.video_id)
                .ok_or_else(|| ChanError::Validation(format!("reference for unknown video `{}`", r.video_id)))?;
            if !queries.contains(&r.query.canonical()) {
                return Err(ChanError::Validation(format!(
                    "reference for video `{}` uses a query not in the manifest",
                    r.video_id
                )));
            }
            if let Some(&bad) = r.shots.iter().find(|&&s| s >= video.n_shots()) {
                return Err(ChanError::Validation(format!(
                    "reference shot {bad} out of range for video `{}` ({} shots)",
                    r.video_id,
                    video.n_shots()
                )));
            }
        }
        Ok(())
    }

    pub fn video(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn reference(&self, video_id: &str, query: Query) -> Option<&[usize]> {
        let q = query.canonical();
        self.references
            .iter()
            .find(|r| r.video_id == video_id && r.query.canonical() == q)
            .map(|r| r.shots.as_slice())
    }

    pub fn references_for(&self, video_id: &str) -> Vec<Summary> {
        self.references.iter().filter(|r| r.video_id == video_id).cloned().collect()
    }

    pub fn annotations_map(&self) -> HashMap<String, ShotConceptSets> {
        self.videos.iter().map(|v| (v.id.clone(), v.annotations.clone())).collect()
    }

    /// Writes the dataset in the directory layout described above.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let videos_dir = dir.join("videos");
        fs::create_dir_all(&videos_dir).map_err(|e| ChanError::io(&videos_dir, e))?;
        let mut entries = Vec::with_capacity(self.videos.len());
        for v in &self.videos {
            let features: PathBuf = ["videos", &format!("{}.chf", v.id)].iter().collect();
            let annotations: PathBuf = ["videos", &format!("{}.annotations.json", v.id)].iter().collect();
            save_features(dir.join(&features), &v.features)?;
            let ann = AnnotationFile {
                version: FORMAT_VERSION,
                video_id: v.id.clone(),
                shots: v
                    .annotations
                    .iter()
                    .map(|s| s.iter().map(|&c| self.vocabulary.name(c).to_string()).collect())
                    .collect(),
            };
            write_json(&dir.join(&annotations), &ann)?;
            entries.push(VideoEntry {
                id: v.id.clone(),
                features: features.to_string_lossy().into_owned(),
                annotations: annotations.to_string_lossy().into_owned(),
            });
        }
        write_summaries(dir.join("references.json"), &self.references, &self.vocabulary)?;
        let manifest = ManifestFile {
            version: FORMAT_VERSION,
            vocabulary: self.vocabulary.names().to_vec(),
            embeddings: Some(self.vocabulary.embeddings().to_vec()),
            embeddings_path: None,
            queries: self.queries.iter().map(|q| q.names(&self.vocabulary)).collect(),
            videos: entries,
            references: "references.json".into(),
            generator: self.generator.clone(),
        };
        write_json(&dir.join(MANIFEST_FILE), &manifest)
    }
}
