//! Pipeline configuration: a TOML file where every key can be overridden by
//! the CLI flag of the same name. Paths in the file are resolved relative to
//! the file's directory; flag paths are taken as given.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use etlinks_core::embedding::EmbeddingFormat;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorMode {
    Supplied,
    MutualNn,
}

impl AnchorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorMode::Supplied => "supplied",
            AnchorMode::MutualNn => "mutual-nn",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "supplied" => Ok(AnchorMode::Supplied),
            "mutual-nn" => Ok(AnchorMode::MutualNn),
            other => Err(CliError::input(format!(
                "anchor_mode must be \"supplied\" or \"mutual-nn\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarvestConfig {
    pub endpoint: String,
    pub root_category: String,
    pub max_depth: usize,
    pub cache_dir: PathBuf,
    pub request_delay_ms: u64,
    pub user_agent: String,
}

/// Fully resolved configuration for one run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub embeddings: Option<PathBuf>,
    pub format: EmbeddingFormat,
    pub companies: Option<PathBuf>,
    pub technologies: Option<PathBuf>,
    pub patents: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub anchor_mode: AnchorMode,
    pub refine_rounds: usize,
    pub clusters: usize,
    pub top_k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub exclude_zero: bool,
    pub raw_counts: bool,
    pub permutation: bool,
    pub entity_prefix: String,
    pub label_top_m: usize,
    pub harvest: Option<HarvestConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            embeddings: None,
            format: EmbeddingFormat::Text,
            companies: None,
            technologies: None,
            patents: None,
            anchors: None,
            out_dir: PathBuf::from("out"),
            anchor_mode: AnchorMode::Supplied,
            refine_rounds: 5,
            clusters: 9,
            top_k: 5,
            alpha: 0.05,
            seed: 42,
            exclude_zero: false,
            raw_counts: false,
            permutation: false,
            entity_prefix: "ENTITY/".to_string(),
            label_top_m: 12,
            harvest: None,
        }
    }
}

/// Flag-level overrides collected from the command line; `None` means the
/// flag was not given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub embeddings: Option<PathBuf>,
    pub format: Option<String>,
    pub companies: Option<PathBuf>,
    pub technologies: Option<PathBuf>,
    pub patents: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub anchor_mode: Option<String>,
    pub refine_rounds: Option<usize>,
    pub clusters: Option<usize>,
    pub top_k: Option<usize>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub exclude_zero: bool,
    pub raw_counts: bool,
    pub permutation: bool,
    pub entity_prefix: Option<String>,
    pub label_top_m: Option<usize>,
    pub endpoint: Option<String>,
    pub root_category: Option<String>,
    pub max_depth: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

// Raw TOML shape.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    inputs: FileInputs,
    #[serde(default)]
    output: FileOutput,
    #[serde(default)]
    pipeline: FilePipeline,
    harvest: Option<FileHarvest>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInputs {
    embeddings: Option<String>,
    format: Option<String>,
    companies: Option<String>,
    technologies: Option<String>,
    patents: Option<String>,
    anchors: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    dir: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePipeline {
    anchor_mode: Option<String>,
    refine_rounds: Option<usize>,
    clusters: Option<usize>,
    top_k: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    exclude_zero: Option<bool>,
    raw_counts: Option<bool>,
    permutation: Option<bool>,
    entity_prefix: Option<String>,
    label_top_m: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHarvest {
    endpoint: String,
    root_category: String,
    max_depth: usize,
    cache_dir: Option<String>,
    request_delay_ms: Option<u64>,
    user_agent: Option<String>,
}

fn parse_format(s: &str) -> Result<EmbeddingFormat, CliError> {
    match s {
        "text" => Ok(EmbeddingFormat::Text),
        "binary" => Ok(EmbeddingFormat::Binary),
        other => Err(CliError::input(format!(
            "format must be \"text\" or \"binary\", got {other:?}"
        ))),
    }
}

/// Load the config file (when given), apply flag overrides, validate ranges.
pub fn resolve_config(
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::default();

    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::input(format!("cannot read config {}: {e}", path.display()))
        })?;
        let file: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |s: &String| -> PathBuf { base.join(s) };

        config.embeddings = file.inputs.embeddings.as_ref().map(rel);
        config.companies = file.inputs.companies.as_ref().map(rel);
        config.technologies = file.inputs.technologies.as_ref().map(rel);
        config.patents = file.inputs.patents.as_ref().map(rel);
        config.anchors = file.inputs.anchors.as_ref().map(rel);
        if let Some(f) = &file.inputs.format {
            config.format = parse_format(f)?;
        }
        if let Some(dir) = &file.output.dir {
            config.out_dir = rel(dir);
        }
        let p = &file.pipeline;
        if let Some(m) = &p.anchor_mode {
            config.anchor_mode = AnchorMode::parse(m)?;
        }
        if let Some(v) = p.refine_rounds {
            config.refine_rounds = v;
        }
        if let Some(v) = p.clusters {
            config.clusters = v;
        }
        if let Some(v) = p.top_k {
            config.top_k = v;
        }
        if let Some(v) = p.alpha {
            config.alpha = v;
        }
        if let Some(v) = p.seed {
            config.seed = v;
        }
        if let Some(v) = p.exclude_zero {
            config.exclude_zero = v;
        }
        if let Some(v) = p.raw_counts {
            config.raw_counts = v;
        }
        if let Some(v) = p.permutation {
            config.permutation = v;
        }
        if let Some(v) = &p.entity_prefix {
            config.entity_prefix = v.clone();
        }
        if let Some(v) = p.label_top_m {
            config.label_top_m = v;
        }
        if let Some(h) = &file.harvest {
            config.harvest = Some(HarvestConfig {
                endpoint: h.endpoint.clone(),
                root_category: h.root_category.clone(),
                max_depth: h.max_depth,
                cache_dir: h
                    .cache_dir
                    .as_ref()
                    .map(rel)
                    .unwrap_or_else(|| base.join(".harvest-cache")),
                request_delay_ms: h.request_delay_ms.unwrap_or(1000),
                user_agent: h
                    .user_agent
                    .clone()
                    .unwrap_or_else(default_user_agent),
            });
        }
    }

    let o = overrides;
    if let Some(v) = &o.embeddings {
        config.embeddings = Some(v.clone());
    }
    if let Some(f) = &o.format {
        config.format = parse_format(f)?;
    }
    if let Some(v) = &o.companies {
        config.companies = Some(v.clone());
    }
    if let Some(v) = &o.technologies {
        config.technologies = Some(v.clone());
    }
    if let Some(v) = &o.patents {
        config.patents = Some(v.clone());
    }
    if let Some(v) = &o.anchors {
        config.anchors = Some(v.clone());
    }
    if let Some(v) = &o.out {
        config.out_dir = v.clone();
    }
    if let Some(m) = &o.anchor_mode {
        config.anchor_mode = AnchorMode::parse(m)?;
    }
    if let Some(v) = o.refine_rounds {
        config.refine_rounds = v;
    }
    if let Some(v) = o.clusters {
        config.clusters = v;
    }
    if let Some(v) = o.top_k {
        config.top_k = v;
    }
    if let Some(v) = o.alpha {
        config.alpha = v;
    }
    if let Some(v) = o.seed {
        config.seed = v;
    }
    if o.exclude_zero {
        config.exclude_zero = true;
    }
    if o.raw_counts {
        config.raw_counts = true;
    }
    if o.permutation {
        config.permutation = true;
    }
    if let Some(v) = &o.entity_prefix {
        config.entity_prefix = v.clone();
    }
    if let Some(v) = o.label_top_m {
        config.label_top_m = v;
    }
    if o.endpoint.is_some() || o.root_category.is_some() {
        let endpoint = o
            .endpoint
            .clone()
            .or_else(|| config.harvest.as_ref().map(|h| h.endpoint.clone()))
            .ok_or_else(|| CliError::input("harvest requires --endpoint"))?;
        let root_category = o
            .root_category
            .clone()
            .or_else(|| config.harvest.as_ref().map(|h| h.root_category.clone()))
            .ok_or_else(|| CliError::input("harvest requires --root-category"))?;
        let previous = config.harvest.take();
        config.harvest = Some(HarvestConfig {
            endpoint,
            root_category,
            max_depth: o
                .max_depth
                .or(previous.as_ref().map(|h| h.max_depth))
                .unwrap_or(1),
            cache_dir: o
                .cache_dir
                .clone()
                .or(previous.as_ref().map(|h| h.cache_dir.clone()))
                .unwrap_or_else(|| PathBuf::from(".harvest-cache")),
            request_delay_ms: previous.as_ref().map_or(1000, |h| h.request_delay_ms),
            user_agent: previous
                .as_ref()
                .map_or_else(default_user_agent, |h| h.user_agent.clone()),
        });
    } else if let (Some(h), Some(depth)) = (config.harvest.as_mut(), o.max_depth) {
        h.max_depth = depth;
    }

    validate(&config)?;
    Ok(config)
}

fn default_user_agent() -> String {
    format!(
        "etlinks/{} (technology-company linkage pipeline)",
        env!("CARGO_PKG_VERSION")
    )
}

fn validate(config: &PipelineConfig) -> Result<(), CliError> {
    if config.clusters < 1 {
        return Err(CliError::input("clusters must be at least 1"));
    }
    if config.top_k < 1 {
        return Err(CliError::input("top_k must be at least 1"));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(CliError::input(format!(
            "alpha must be strictly between 0 and 1, got {}",
            config.alpha
        )));
    }
    Ok(())
}

impl PipelineConfig {
    /// Every decision flag with its effective value, for the manifest and
    /// the model's decision block.
    pub fn decision_map(&self) -> BTreeMap<String, String> {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "(unset)".to_string())
        };
        let mut map = BTreeMap::new();
        map.insert("embeddings".into(), path(&self.embeddings));
        map.insert(
            "format".into(),
            match self.format {
                EmbeddingFormat::Text => "text".into(),
                EmbeddingFormat::Binary => "binary".into(),
            },
        );
        map.insert("companies".into(), path(&self.companies));
        map.insert("technologies".into(), path(&self.technologies));
        map.insert("patents".into(), path(&self.patents));
        map.insert("anchors".into(), path(&self.anchors));
        map.insert("out".into(), self.out_dir.display().to_string());
        map.insert("anchor_mode".into(), self.anchor_mode.as_str().into());
        map.insert("refine_rounds".into(), self.refine_rounds.to_string());
        map.insert("clusters".into(), self.clusters.to_string());
        map.insert("top_k".into(), self.top_k.to_string());
        map.insert("alpha".into(), self.alpha.to_string());
        map.insert("seed".into(), self.seed.to_string());
        map.insert("exclude_zero".into(), self.exclude_zero.to_string());
        map.insert("raw_counts".into(), self.raw_counts.to_string());
        map.insert("permutation".into(), self.permutation.to_string());
        map.insert("entity_prefix".into(), self.entity_prefix.clone());
        map.insert("label_top_m".into(), self.label_top_m.to_string());
        map.insert("similarity_metric".into(), "cosine".into());
        map.insert("distance".into(), "1 - cosine".into());
        map.insert("linkage".into(), "average".into());
        map.insert("reduction".into(), "pca".into());
        map.insert(
            "significance".into(),
            "pearson one-sided positive".into(),
        );
        map.insert(
            "count_transform".into(),
            if self.raw_counts { "raw" } else { "log1p" }.into(),
        );
        map
    }

    /// The methodological decisions only — the decision map without
    /// filesystem paths, which vary between hosts. This is what the model
    /// export and the report carry; the manifest keeps the full map.
    pub fn method_decisions(&self) -> BTreeMap<String, String> {
        let mut map = self.decision_map();
        for path_key in [
            "embeddings",
            "companies",
            "technologies",
            "patents",
            "anchors",
            "out",
        ] {
            map.remove(path_key);
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn file_paths_resolve_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "[inputs]\nembeddings = \"emb.txt\"\n[output]\ndir = \"result\"\n",
        );
        let config = resolve_config(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(config.embeddings.unwrap(), dir.path().join("emb.txt"));
        assert_eq!(config.out_dir, dir.path().join("result"));
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "[pipeline]\nclusters = 9\nalpha = 0.05\n",
        );
        let overrides = Overrides {
            clusters: Some(4),
            ..Overrides::default()
        };
        let config = resolve_config(Some(&path), &overrides).unwrap();
        assert_eq!(config.clusters, 4);
        assert_eq!(config.alpha, 0.05);
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let overrides = Overrides {
            alpha: Some(1.5),
            ..Overrides::default()
        };
        assert!(resolve_config(None, &overrides).is_err());
        let overrides = Overrides {
            clusters: Some(0),
            ..Overrides::default()
        };
        assert!(resolve_config(None, &overrides).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), "[pipeline]\nclusterz = 9\n");
        assert!(resolve_config(Some(&path), &Overrides::default()).is_err());
    }

    #[test]
    fn decision_map_covers_every_flag() {
        let config = PipelineConfig::default();
        let map = config.decision_map();
        for key in [
            "embeddings", "format", "companies", "technologies", "patents", "anchors", "out",
            "anchor_mode", "refine_rounds", "clusters", "top_k", "alpha", "seed", "exclude_zero",
            "raw_counts", "permutation", "entity_prefix", "label_top_m",
        ] {
            assert!(map.contains_key(key), "missing decision key {key}");
        }
    }
}
