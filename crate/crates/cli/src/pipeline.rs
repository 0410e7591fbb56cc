//! Command implementations: dataset plumbing, cached embeddings, artifact
//! directories, and run manifests.
//!
//! Every artifact-writing command drops a `manifest.json` beside its outputs
//! with the resolved config, seeds, and content hashes of inputs and
//! outputs, so a run can be reproduced bit for bit from the manifest alone.
//! Expensive prerequisites (trained word vectors) are cached under
//! `<out>/cache`, keyed by the hash of the data bytes and the embedding
//! config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emre_core::dataset::{load_dataset, ColumnMapping, Dataset, FileFormat};
use emre_core::embeddings::{
    load_vectors, save_vectors, train_skipgram, SkipGramConfig, WordVectors,
};
use emre_core::error::{Error, Result};
use emre_core::features::{AblationSpec, FeatureExtractor, FeatureGroup};
use emre_core::names::tokenize;
use emre_core::nn::TrainConfig;
use emre_core::parser::{build_lexicon, Lexicon};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Defaults shared by every command; flags override file values, file values
/// override built-ins.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub mapping: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub embedding: Option<EmbeddingOverrides>,
    #[serde(default)]
    pub train: Option<TrainOverrides>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EmbeddingOverrides {
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    pub fn skipgram_config(&self, seed: u64) -> SkipGramConfig {
        let mut cfg = SkipGramConfig {
            seed,
            ..Default::default()
        };
        if let Some(e) = &self.embedding {
            if let Some(v) = e.dim {
                cfg.dim = v;
            }
            if let Some(v) = e.window {
                cfg.window = v;
            }
            if let Some(v) = e.negatives {
                cfg.negatives = v;
            }
            if let Some(v) = e.epochs {
                cfg.epochs = v;
            }
            if let Some(v) = e.learning_rate {
                cfg.learning_rate = v;
            }
        }
        cfg
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig {
            seed,
            ..Default::default()
        };
        if let Some(t) = &self.train {
            if let Some(v) = t.epochs {
                cfg.epochs = v;
            }
            if let Some(v) = t.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = t.learning_rate {
                cfg.optimizer.learning_rate = v;
            }
        }
        cfg
    }
}

/// Resolved data-source choices for one run.
pub struct DataSource {
    pub path: PathBuf,
    pub format: FileFormat,
    pub mapping_path: Option<PathBuf>,
    pub mapping: ColumnMapping,
}

impl DataSource {
    pub fn resolve(
        cfg: &PipelineConfig,
        data: Option<PathBuf>,
        format: Option<String>,
        mapping: Option<PathBuf>,
    ) -> Result<DataSource> {
        let path = data
            .or_else(|| cfg.data.clone())
            .ok_or_else(|| Error::Config("no data file (--data or config \"data\")".into()))?;
        let format = match format.or_else(|| cfg.format.clone()).as_deref() {
            None | Some("csv") => FileFormat::Csv,
            Some("tsv") => FileFormat::Tsv,
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown format \"{other}\" (csv or tsv)"
                )))
            }
        };
        let mapping_path = mapping.or_else(|| cfg.mapping.clone());
        let mapping = match &mapping_path {
            Some(p) => ColumnMapping::from_json_file(p)?,
            None => ColumnMapping::default(),
        };
        Ok(DataSource {
            path,
            format,
            mapping_path,
            mapping,
        })
    }

    pub fn load(&self) -> Result<Dataset> {
        load_dataset(&self.path, self.format, &self.mapping)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run manifest written beside every artifact set.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Manifest {
        Manifest {
            tool_version: TOOL_VERSION,
            command: command.to_string(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Record the data file and any column-mapping file as inputs.
    pub fn source_inputs(&mut self, source: &DataSource) -> Result<()> {
        self.input(&source.path)?;
        if let Some(mapping) = &source.mapping_path {
            self.input(mapping)?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

pub fn artifact_dir(out: &Path, command: &str) -> Result<PathBuf> {
    let dir = out.join(command);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Train word vectors for the dataset, or reuse the cached table keyed by
/// (data bytes, embedding config).
pub fn ensure_vectors(
    source: &DataSource,
    ds: &Dataset,
    cfg: &SkipGramConfig,
    out: &Path,
) -> Result<(WordVectors, PathBuf, bool)> {
    let cache_dir = out.join("cache");
    std::fs::create_dir_all(&cache_dir)?;
    let mut key_material = std::fs::read(&source.path)?;
    key_material.extend_from_slice(serde_json::to_string(cfg)?.as_bytes());
    let key = hex_digest(&key_material);
    let cache_path = cache_dir.join(format!("vectors-{}.json", &key[..16]));
    if cache_path.exists() {
        return Ok((load_vectors(&cache_path)?, cache_path, true));
    }
    let corpus: Vec<Vec<String>> = ds
        .records
        .iter()
        .filter(|r| !r.utterance.trim().is_empty())
        .map(|r| tokenize(&r.utterance))
        .collect();
    let wv = train_skipgram(&corpus, cfg)?;
    save_vectors(&wv, &cache_path)?;
    Ok((wv, cache_path, false))
}

/// Build the feature extractor, training or loading vectors only when some
/// spec needs the embedding group.
pub fn build_extractor(
    source: &DataSource,
    ds: &Dataset,
    specs: &[AblationSpec],
    sg_cfg: &SkipGramConfig,
    out: &Path,
) -> Result<(FeatureExtractor, Lexicon, Option<PathBuf>)> {
    let (lexicon, unknown) = build_lexicon(ds)?;
    if !unknown.is_empty() {
        log::warn!("unclassified utterance tokens: {unknown:?}");
    }
    let needs_vectors = specs
        .iter()
        .any(|s| s.groups.contains(&FeatureGroup::Embedding));
    let (vectors, cache) = if needs_vectors {
        let (wv, path, cached) = ensure_vectors(source, ds, sg_cfg, out)?;
        log::info!(
            "word vectors {} ({})",
            path.display(),
            if cached { "cached" } else { "trained" }
        );
        (Some(wv), Some(path))
    } else {
        (None, None)
    };
    let extractor = FeatureExtractor::build(ds, lexicon.clone(), vectors)?;
    Ok((extractor, lexicon, cache))
}

/// Expanded per-column header names for a feature matrix.
pub fn feature_headers(extractor: &FeatureExtractor, spec: &AblationSpec) -> Vec<String> {
    let mut names = Vec::new();
    for d in extractor.active_descriptors(spec) {
        if d.width == 1 {
            names.push(d.name.clone());
        } else {
            for i in 0..d.width {
                names.push(format!("{}[{i}]", d.name));
            }
        }
    }
    names
}
