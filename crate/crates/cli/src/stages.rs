//! Pipeline stages. Every stage reads its inputs from plain artifact files
//! in the output directory and writes plain files back, so stages compose:
//! running them one at a time is byte-identical to `etlinks all`, and every
//! intermediate product can be inspected or re-used.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use etlinks_core::alignment::{
    anchor_matrices, apply_alignment, fit_procrustes, load_anchors, refine_anchors, AnchorSource,
    OrthogonalMap,
};
use etlinks_core::clustering::{agglomerate, cut, profile_clusters, ClusterMember};
use etlinks_core::embedding::parse_embeddings;
use etlinks_core::mapgen::{
    export_model_json, render_svg, report_markdown, AlignmentInfo, FileRef, LandscapeModel,
    ModelEntity, ModelMetadata, SvgOptions, UnresolvedEntity,
};
use etlinks_core::projection::{fit_pca, transform};
use etlinks_core::registry::{
    load_companies, load_technologies, resolve_entities, EntityKind, RosterEntity,
};
use etlinks_core::sigfig::format_sig9;
use etlinks_core::similarity::{cross_similarity, SimilarityMatrix};
use etlinks_core::validation::{
    correlate_technology, load_patents, validation_summary, CorrelationOptions, CorrelationResult,
    PermutationOptions, ValidationError,
};
use etlinks_harvest::{
    export_roster, fetch_category_tree, CachedFetch, CrawlConfig, HttpFetcher, RetryingFetch,
};

use crate::config::{AnchorMode, PipelineConfig};
use crate::error::CliError;
use crate::manifest::write_manifest;

pub const RESOLUTION_FILE: &str = "resolution.json";
pub const ALIGNMENT_FILE: &str = "alignment.json";
pub const ALIGNED_FILE: &str = "aligned.json";
pub const SIMILARITY_FILE: &str = "similarity.csv";
pub const DENDROGRAM_FILE: &str = "dendrogram.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const LAYOUT_FILE: &str = "layout.csv";
pub const VALIDATION_CSV_FILE: &str = "validation.csv";
pub const VALIDATION_JSON_FILE: &str = "validation.json";
pub const MAP_FILE: &str = "map.svg";
pub const REPORT_FILE: &str = "report.md";
pub const MODEL_FILE: &str = "model.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HARVESTED_ROSTER_FILE: &str = "technologies.csv";

/// Entity id paired with its vector, the common currency between stages.
type IdVectors = Vec<(String, Vec<f64>)>;

/// Records every file written during a run so a failed run can remove its
/// partial outputs.
#[derive(Debug, Default)]
pub struct OutputTracker {
    created: Vec<PathBuf>,
}

impl OutputTracker {
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::internal(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
        fs::write(path, bytes)
            .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
        self.created.push(path.to_path_buf());
        Ok(())
    }

    pub fn cleanup(&self) {
        for path in &self.created {
            let _ = fs::remove_file(path);
        }
    }
}

// ---------------------------------------------------------------------------
// Artifact shapes (full-precision JSON; field order fixed by declaration).

#[derive(Debug, Serialize, Deserialize)]
struct TechRecord {
    tech_id: String,
    name: String,
    wiki_title: String,
    theme: Option<String>,
    key: String,
    vector: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CompanyRecord {
    rank: u32,
    name: String,
    wiki_title: String,
    rnd_meur: f64,
    country: String,
    industry: String,
    key: String,
    vector: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UnresolvedRecord {
    kind: String,
    entity_id: String,
    wiki_title: String,
    reason: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResolutionFile {
    dimension: usize,
    embedding_digest: String,
    technologies: Vec<TechRecord>,
    companies: Vec<CompanyRecord>,
    unresolved: Vec<UnresolvedRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RoundRecord {
    round: usize,
    anchor_count: usize,
    residual: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AlignmentFile {
    mode: String,
    dimension: usize,
    anchor_count: usize,
    residual: f64,
    rank: usize,
    rank_deficient: bool,
    anchors: Vec<(String, String)>,
    rounds: Vec<RoundRecord>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IdVector {
    id: String,
    vector: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AlignedFile {
    dimension: usize,
    technologies: Vec<IdVector>,
    companies: Vec<IdVector>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ValidationFile {
    alpha: f64,
    exclude_zero: bool,
    log_transform: bool,
    permutation: bool,
    company_scope: Vec<String>,
    results: Vec<CorrelationResult>,
}

// ---------------------------------------------------------------------------
// Shared IO helpers.

fn require_path<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    let path = path
        .as_ref()
        .ok_or_else(|| CliError::input(format!("no {what} path configured")))?;
    if !path.exists() {
        return Err(CliError::input(format!(
            "{what} path {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

fn read_input(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read {what} {}: {e}", path.display())))
}

fn read_artifact_bytes(config: &PipelineConfig, name: &str, stage: &str) -> Result<Vec<u8>, CliError> {
    let path = config.out_dir.join(name);
    if !path.exists() {
        return Err(CliError::input(format!(
            "missing artifact {}; run `etlinks {stage}` first",
            path.display()
        )));
    }
    fs::read(&path)
        .map_err(|e| CliError::input(format!("cannot read artifact {}: {e}", path.display())))
}

fn read_artifact<T: serde::de::DeserializeOwned>(
    config: &PipelineConfig,
    name: &str,
    stage: &str,
) -> Result<T, CliError> {
    let bytes = read_artifact_bytes(config, name, stage)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        CliError::input(format!(
            "artifact {name} is corrupt ({e}); re-run `etlinks {stage}`"
        ))
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The technology roster defaults to a previously harvested file when the
/// config does not name one.
fn technologies_path(config: &PipelineConfig) -> Option<PathBuf> {
    config.technologies.clone().or_else(|| {
        let harvested = config.out_dir.join(HARVESTED_ROSTER_FILE);
        harvested.exists().then_some(harvested)
    })
}

// ---------------------------------------------------------------------------
// Stages.

pub fn run_harvest(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let harvest = config
        .harvest
        .as_ref()
        .ok_or_else(|| CliError::input("harvest requires a [harvest] config section or --endpoint/--root-category"))?;
    let http = HttpFetcher::new(
        &harvest.user_agent,
        Duration::from_millis(harvest.request_delay_ms),
    )?;
    let stack = CachedFetch::new(
        RetryingFetch::new(http, 3, Duration::from_millis(500)),
        &harvest.cache_dir,
    );
    let crawl = CrawlConfig::new(&harvest.endpoint, &harvest.root_category, harvest.max_depth);
    let outcome = fetch_category_tree(&stack, &crawl)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    let mut csv = Vec::new();
    export_roster(&outcome.pages, &mut csv)?;
    tracker.write(&config.out_dir.join(HARVESTED_ROSTER_FILE), &csv)?;
    eprintln!(
        "harvested {} members ({} pages) from {:?}",
        outcome.pages.len(),
        outcome
            .pages
            .iter()
            .filter(|p| p.kind == etlinks_harvest::CategoryKind::Page)
            .count(),
        harvest.root_category
    );
    Ok(())
}

pub fn run_resolve(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let embeddings_path = require_path(&config.embeddings, "embeddings")?;
    let embedding_bytes = read_input(embeddings_path, "embeddings")?;
    let store = parse_embeddings(embedding_bytes.as_slice(), config.format)?;
    let store = store.unit_normalize()?;

    let companies_path = require_path(&config.companies, "companies")?;
    let companies = load_companies(read_input(companies_path, "companies")?.as_slice())?;
    let technologies_path = technologies_path(config);
    let technologies_path = require_path(&technologies_path, "technologies")?;
    let technologies =
        load_technologies(read_input(technologies_path, "technologies")?.as_slice())?;

    let tech_set = resolve_entities(&technologies, &store, &config.entity_prefix);
    let company_set = resolve_entities(&companies, &store, &config.entity_prefix);

    let mut unresolved = Vec::new();
    for (tech, reason) in &tech_set.unresolved {
        unresolved.push(UnresolvedRecord {
            kind: EntityKind::Technology.as_str().to_string(),
            entity_id: tech.entity_id().to_string(),
            wiki_title: tech.wiki_title.clone(),
            reason: reason.clone(),
        });
    }
    for (company, reason) in &company_set.unresolved {
        unresolved.push(UnresolvedRecord {
            kind: EntityKind::Company.as_str().to_string(),
            entity_id: company.entity_id().to_string(),
            wiki_title: company.wiki_title.clone(),
            reason: reason.clone(),
        });
    }
    for u in &unresolved {
        eprintln!("warning: unresolved {} {:?} ({})", u.kind, u.entity_id, u.reason);
    }

    let file = ResolutionFile {
        dimension: store.dimension(),
        embedding_digest: sha256_hex(&embedding_bytes),
        technologies: tech_set
            .resolved
            .iter()
            .map(|r| TechRecord {
                tech_id: r.entity.tech_id.clone(),
                name: r.entity.name.clone(),
                wiki_title: r.entity.wiki_title.clone(),
                theme: r.entity.theme.clone(),
                key: r.key.clone(),
                vector: r.vector.clone(),
            })
            .collect(),
        companies: company_set
            .resolved
            .iter()
            .map(|r| CompanyRecord {
                rank: r.entity.rank,
                name: r.entity.name.clone(),
                wiki_title: r.entity.wiki_title.clone(),
                rnd_meur: r.entity.rnd_meur,
                country: r.entity.country.clone(),
                industry: r.entity.industry.clone(),
                key: r.key.clone(),
                vector: r.vector.clone(),
            })
            .collect(),
        unresolved,
    };
    if file.technologies.is_empty() || file.companies.is_empty() {
        return Err(CliError::input(format!(
            "resolution left {} technologies and {} companies; nothing to align",
            file.technologies.len(),
            file.companies.len()
        )));
    }
    tracker.write(
        &config.out_dir.join(RESOLUTION_FILE),
        &serde_json::to_vec_pretty(&file)?,
    )?;
    Ok(())
}

fn id_vectors_companies(resolution: &ResolutionFile) -> IdVectors {
    resolution
        .companies
        .iter()
        .map(|c| (c.wiki_title.clone(), c.vector.clone()))
        .collect()
}

fn id_vectors_technologies(resolution: &ResolutionFile) -> IdVectors {
    resolution
        .technologies
        .iter()
        .map(|t| (t.tech_id.clone(), t.vector.clone()))
        .collect()
}

pub fn run_align(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let resolution: ResolutionFile = read_artifact(config, RESOLUTION_FILE, "resolve")?;
    let companies = id_vectors_companies(&resolution);
    let technologies = id_vectors_technologies(&resolution);
    let dim = resolution.dimension;

    let (map, anchors, rounds, mode): (OrthogonalMap, Vec<(String, String)>, Vec<RoundRecord>, &str) =
        match config.anchor_mode {
            AnchorMode::Supplied => {
                let anchors_path = require_path(&config.anchors, "anchors")?;
                let set = load_anchors(read_input(anchors_path, "anchors")?.as_slice())?;
                // anchors.csv names wiki titles; map the technology side to ids.
                let pairs: Vec<(String, String)> = set
                    .pairs
                    .iter()
                    .map(|(company_title, tech_title)| {
                        let tech = resolution
                            .technologies
                            .iter()
                            .find(|t| &t.wiki_title == tech_title)
                            .ok_or_else(|| {
                                CliError::input(format!(
                                    "anchor technology {tech_title:?} is not among the resolved technologies"
                                ))
                            })?;
                        if !resolution.companies.iter().any(|c| &c.wiki_title == company_title) {
                            return Err(CliError::input(format!(
                                "anchor company {company_title:?} is not among the resolved companies"
                            )));
                        }
                        Ok((company_title.clone(), tech.tech_id.clone()))
                    })
                    .collect::<Result<_, CliError>>()?;
                let (x, y) = anchor_matrices(&companies, &technologies, &pairs)?;
                let map = fit_procrustes(&x, &y)?;
                (map, pairs, Vec::new(), AnchorSource::UserSupplied.as_str())
            }
            AnchorMode::MutualNn => {
                let seed = OrthogonalMap::identity(dim);
                let refinement =
                    refine_anchors(&companies, &technologies, &seed, config.refine_rounds)?;
                let rounds = refinement
                    .rounds
                    .iter()
                    .map(|r| RoundRecord {
                        round: r.round,
                        anchor_count: r.anchor_count,
                        residual: r.residual,
                    })
                    .collect();
                (
                    refinement.map,
                    refinement.anchors,
                    rounds,
                    AnchorSource::MutualNnRefined.as_str(),
                )
            }
        };

    if map.is_rank_deficient() {
        eprintln!(
            "warning: anchor cross-product rank {} is below the dimension {dim}; the map is not unique",
            map.rank
        );
    }

    let aligned_companies = apply_alignment(&companies, &map)?;

    let alignment = AlignmentFile {
        mode: mode.to_string(),
        dimension: dim,
        anchor_count: map.anchor_count,
        residual: map.residual,
        rank: map.rank,
        rank_deficient: map.is_rank_deficient(),
        anchors,
        rounds,
        matrix: (0..dim).map(|i| map.matrix.row(i).to_vec()).collect(),
    };
    tracker.write(
        &config.out_dir.join(ALIGNMENT_FILE),
        &serde_json::to_vec_pretty(&alignment)?,
    )?;

    let aligned = AlignedFile {
        dimension: dim,
        technologies: technologies
            .into_iter()
            .map(|(id, vector)| IdVector { id, vector })
            .collect(),
        companies: aligned_companies
            .into_iter()
            .map(|(id, vector)| IdVector { id, vector })
            .collect(),
    };
    tracker.write(
        &config.out_dir.join(ALIGNED_FILE),
        &serde_json::to_vec_pretty(&aligned)?,
    )?;
    Ok(())
}

fn aligned_pairs(file: &AlignedFile) -> (IdVectors, IdVectors) {
    let techs = file
        .technologies
        .iter()
        .map(|iv| (iv.id.clone(), iv.vector.clone()))
        .collect();
    let comps = file
        .companies
        .iter()
        .map(|iv| (iv.id.clone(), iv.vector.clone()))
        .collect();
    (techs, comps)
}

pub fn run_link(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let aligned: AlignedFile = read_artifact(config, ALIGNED_FILE, "align")?;
    let (techs, comps) = aligned_pairs(&aligned);
    let matrix = cross_similarity(&techs, &comps)?;
    let mut csv = Vec::new();
    matrix.to_csv(&mut csv)?;
    tracker.write(&config.out_dir.join(SIMILARITY_FILE), &csv)?;
    Ok(())
}

pub fn run_cluster(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let aligned: AlignedFile = read_artifact(config, ALIGNED_FILE, "align")?;
    let (techs, comps) = aligned_pairs(&aligned);
    let joint: Vec<(String, EntityKind, Vec<f64>)> = techs
        .iter()
        .map(|(id, v)| (id.clone(), EntityKind::Technology, v.clone()))
        .chain(
            comps
                .iter()
                .map(|(id, v)| (id.clone(), EntityKind::Company, v.clone())),
        )
        .collect();
    let vectors: Vec<Vec<f64>> = joint.iter().map(|(_, _, v)| v.clone()).collect();
    if config.clusters > vectors.len() {
        return Err(CliError::input(format!(
            "clusters = {} but the joint set has only {} entities",
            config.clusters,
            vectors.len()
        )));
    }
    let dendrogram = agglomerate(&vectors)?;

    let mut dendro_csv = String::from("cluster_a,cluster_b,height,new_id\n");
    for merge in &dendrogram.merges {
        dendro_csv.push_str(&format!(
            "{},{},{},{}\n",
            merge.a,
            merge.b,
            format_sig9(merge.height),
            merge.id
        ));
    }
    tracker.write(&config.out_dir.join(DENDROGRAM_FILE), dendro_csv.as_bytes())?;

    let labels = cut(&dendrogram, config.clusters)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["entity_id", "kind", "cluster"])
        .map_err(|e| CliError::internal(e.to_string()))?;
    for ((id, kind, _), cluster) in joint.iter().zip(&labels) {
        writer
            .write_record([id.as_str(), kind.as_str(), &cluster.to_string()])
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::internal(e.to_string()))?;
    tracker.write(&config.out_dir.join(ASSIGNMENT_FILE), &bytes)?;
    Ok(())
}

fn read_assignment(config: &PipelineConfig) -> Result<BTreeMap<String, usize>, CliError> {
    let bytes = read_artifact_bytes(config, ASSIGNMENT_FILE, "cluster")?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input(format!("bad assignment.csv: {e}")))?;
        let id = record.get(0).unwrap_or("").to_string();
        let cluster: usize = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| CliError::input("bad cluster index in assignment.csv".to_string()))?;
        map.insert(id, cluster);
    }
    Ok(map)
}

pub fn run_project(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let aligned: AlignedFile = read_artifact(config, ALIGNED_FILE, "align")?;
    let resolution: ResolutionFile = read_artifact(config, RESOLUTION_FILE, "resolve")?;
    let assignment = read_assignment(config)?;
    let (techs, comps) = aligned_pairs(&aligned);

    let entities: Vec<(String, EntityKind, Vec<f64>)> = techs
        .iter()
        .map(|(id, v)| (id.clone(), EntityKind::Technology, v.clone()))
        .chain(
            comps
                .iter()
                .map(|(id, v)| (id.clone(), EntityKind::Company, v.clone())),
        )
        .collect();
    let vectors: Vec<Vec<f64>> = entities.iter().map(|(_, _, v)| v.clone()).collect();
    let projection = fit_pca(&vectors)?;
    let layout = transform(&projection, &entities)?;

    let spend_of: BTreeMap<&str, f64> = resolution
        .companies
        .iter()
        .map(|c| (c.wiki_title.as_str(), c.rnd_meur))
        .collect();

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["entity_id", "kind", "x", "y", "cluster", "rnd_meur"])
        .map_err(|e| CliError::internal(e.to_string()))?;
    for point in &layout.points {
        let cluster = assignment.get(&point.entity_id).ok_or_else(|| {
            CliError::input(format!(
                "entity {:?} missing from assignment.csv; re-run `etlinks cluster`",
                point.entity_id
            ))
        })?;
        let spend = match point.kind {
            EntityKind::Company => spend_of
                .get(point.entity_id.as_str())
                .map(|s| format_sig9(*s))
                .unwrap_or_default(),
            EntityKind::Technology => String::new(),
        };
        writer
            .write_record([
                point.entity_id.as_str(),
                point.kind.as_str(),
                &format_sig9(point.x),
                &format_sig9(point.y),
                &cluster.to_string(),
                &spend,
            ])
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::internal(e.to_string()))?;
    tracker.write(&config.out_dir.join(LAYOUT_FILE), &bytes)?;
    Ok(())
}

pub fn run_validate(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let matrix_bytes = read_artifact_bytes(config, SIMILARITY_FILE, "link")?;
    let matrix = SimilarityMatrix::from_csv(matrix_bytes.as_slice())?;
    let patents_path = require_path(&config.patents, "patents")?;
    let patents = load_patents(read_input(patents_path, "patents")?.as_slice())?;

    let company_axis: std::collections::BTreeSet<String> =
        matrix.companies().iter().cloned().collect();
    let tech_axis: std::collections::BTreeSet<String> =
        matrix.technologies().iter().cloned().collect();
    for warning in patents.unknown_ids(&company_axis, &tech_axis) {
        eprintln!("warning: {warning}");
    }

    // The correlation sample is every company with any patent data that is
    // also on the matrix axis, in sorted order.
    let scope: Vec<String> = patents
        .coverage
        .iter()
        .filter(|c| company_axis.contains(*c))
        .cloned()
        .collect();

    let options = CorrelationOptions {
        alpha: config.alpha,
        exclude_zero: config.exclude_zero,
        log_transform: !config.raw_counts,
        permutation: config.permutation.then_some(PermutationOptions {
            shuffles: 10_000,
            seed: config.seed,
        }),
    };

    let mut results = Vec::with_capacity(matrix.technologies().len());
    for tech_id in matrix.technologies() {
        match correlate_technology(tech_id, &matrix, &patents, &scope, &options) {
            Ok(result) => results.push(result),
            Err(ValidationError::SampleTooSmall { n }) => results.push(CorrelationResult {
                tech_id: tech_id.clone(),
                n,
                pearson_r: None,
                pearson_p: None,
                spearman_rho: None,
                spearman_p: None,
                permutation_p: None,
                significant: false,
                degenerate: true,
            }),
            Err(other) => return Err(other.into()),
        }
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "tech_id",
            "n",
            "pearson_r",
            "pearson_p",
            "spearman_rho",
            "spearman_p",
            "significant",
            "degenerate",
        ])
        .map_err(|e| CliError::internal(e.to_string()))?;
    let stat = |v: Option<f64>| v.map(format_sig9).unwrap_or_default();
    for r in &results {
        writer
            .write_record([
                r.tech_id.as_str(),
                &r.n.to_string(),
                &stat(r.pearson_r),
                &stat(r.pearson_p),
                &stat(r.spearman_rho),
                &stat(r.spearman_p),
                &r.significant.to_string(),
                &r.degenerate.to_string(),
            ])
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::internal(e.to_string()))?;
    tracker.write(&config.out_dir.join(VALIDATION_CSV_FILE), &bytes)?;

    let file = ValidationFile {
        alpha: config.alpha,
        exclude_zero: config.exclude_zero,
        log_transform: !config.raw_counts,
        permutation: config.permutation,
        company_scope: scope,
        results,
    };
    tracker.write(
        &config.out_dir.join(VALIDATION_JSON_FILE),
        &serde_json::to_vec_pretty(&file)?,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Model assembly from artifacts (shared by render and report).

fn read_layout(
    config: &PipelineConfig,
) -> Result<BTreeMap<String, (f64, f64)>, CliError> {
    let bytes = read_artifact_bytes(config, LAYOUT_FILE, "project")?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input(format!("bad layout.csv: {e}")))?;
        let id = record.get(0).unwrap_or("").to_string();
        let x: f64 = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| CliError::input("bad x in layout.csv".to_string()))?;
        let y: f64 = record
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|_| CliError::input("bad y in layout.csv".to_string()))?;
        map.insert(id, (x, y));
    }
    Ok(map)
}

pub fn assemble_model(config: &PipelineConfig) -> Result<LandscapeModel, CliError> {
    let resolution: ResolutionFile = read_artifact(config, RESOLUTION_FILE, "resolve")?;
    let alignment: AlignmentFile = read_artifact(config, ALIGNMENT_FILE, "align")?;
    let aligned_bytes = read_artifact_bytes(config, ALIGNED_FILE, "align")?;
    let aligned: AlignedFile = serde_json::from_slice(&aligned_bytes)
        .map_err(|e| CliError::input(format!("aligned.json is corrupt: {e}")))?;
    let matrix_bytes = read_artifact_bytes(config, SIMILARITY_FILE, "link")?;
    let similarity = SimilarityMatrix::from_csv(matrix_bytes.as_slice())?;
    let assignment = read_assignment(config)?;
    let layout = read_layout(config)?;

    let cluster_count = assignment.values().max().map_or(1, |m| m + 1);

    let lookup = |id: &str,
                  what: &str|
     -> Result<(usize, (f64, f64)), CliError> {
        let cluster = assignment.get(id).ok_or_else(|| {
            CliError::input(format!("{what} {id:?} missing from assignment.csv"))
        })?;
        let position = layout.get(id).ok_or_else(|| {
            CliError::input(format!("{what} {id:?} missing from layout.csv"))
        })?;
        Ok((*cluster, *position))
    };

    let mut entities = Vec::new();
    for tech in &resolution.technologies {
        let (cluster, (x, y)) = lookup(&tech.tech_id, "technology")?;
        entities.push(ModelEntity {
            entity_id: tech.tech_id.clone(),
            kind: EntityKind::Technology,
            name: tech.name.clone(),
            cluster,
            x,
            y,
            rnd_meur: None,
            theme: tech.theme.clone(),
        });
    }
    for company in &resolution.companies {
        let (cluster, (x, y)) = lookup(&company.wiki_title, "company")?;
        entities.push(ModelEntity {
            entity_id: company.wiki_title.clone(),
            kind: EntityKind::Company,
            name: company.name.clone(),
            cluster,
            x,
            y,
            rnd_meur: Some(company.rnd_meur),
            theme: None,
        });
    }

    // Profiles come from the joint aligned vectors in clustering order.
    let name_of: BTreeMap<&str, &str> = resolution
        .technologies
        .iter()
        .map(|t| (t.tech_id.as_str(), t.name.as_str()))
        .chain(
            resolution
                .companies
                .iter()
                .map(|c| (c.wiki_title.as_str(), c.name.as_str())),
        )
        .collect();
    let spend_of: BTreeMap<&str, f64> = resolution
        .companies
        .iter()
        .map(|c| (c.wiki_title.as_str(), c.rnd_meur))
        .collect();
    let mut members = Vec::new();
    let mut leaf_labels = Vec::new();
    for (kind, ivs) in [
        (EntityKind::Technology, &aligned.technologies),
        (EntityKind::Company, &aligned.companies),
    ] {
        for iv in ivs {
            let cluster = assignment.get(&iv.id).ok_or_else(|| {
                CliError::input(format!("{:?} missing from assignment.csv", iv.id))
            })?;
            leaf_labels.push(*cluster);
            members.push(ClusterMember {
                entity_id: iv.id.clone(),
                kind,
                name: name_of.get(iv.id.as_str()).unwrap_or(&iv.id.as_str()).to_string(),
                rnd_meur: spend_of.get(iv.id.as_str()).copied(),
                vector: iv.vector.clone(),
            });
        }
    }
    let profiles = profile_clusters(&leaf_labels, cluster_count, &members);

    let (correlations, validation) = {
        let path = config.out_dir.join(VALIDATION_JSON_FILE);
        if path.exists() {
            let file: ValidationFile = read_artifact(config, VALIDATION_JSON_FILE, "validate")?;
            let summary = validation_summary(&file.results);
            (file.results, Some(summary))
        } else {
            (Vec::new(), None)
        }
    };

    let model = LandscapeModel {
        metadata: ModelMetadata {
            embedding_digest: resolution.embedding_digest.clone(),
            embedding_dimension: resolution.dimension,
            technologies_total: resolution.technologies.len()
                + resolution
                    .unresolved
                    .iter()
                    .filter(|u| u.kind == EntityKind::Technology.as_str())
                    .count(),
            companies_total: resolution.companies.len()
                + resolution
                    .unresolved
                    .iter()
                    .filter(|u| u.kind == EntityKind::Company.as_str())
                    .count(),
            unresolved: resolution
                .unresolved
                .iter()
                .map(|u| UnresolvedEntity {
                    kind: if u.kind == EntityKind::Technology.as_str() {
                        EntityKind::Technology
                    } else {
                        EntityKind::Company
                    },
                    entity_id: u.entity_id.clone(),
                    wiki_title: u.wiki_title.clone(),
                    reason: u.reason.clone(),
                })
                .collect(),
            alignment: AlignmentInfo {
                mode: alignment.mode.clone(),
                anchor_count: alignment.anchor_count,
                residual: alignment.residual,
                rank: alignment.rank,
                rank_deficient: alignment.rank_deficient,
            },
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        decisions: config.method_decisions(),
        aligned_vectors: FileRef {
            path: ALIGNED_FILE.to_string(),
            sha256: sha256_hex(&aligned_bytes),
        },
        entities,
        similarity,
        cluster_count,
        profiles,
        correlations,
        validation,
    };
    model
        .check_consistency()
        .map_err(|e| CliError::input(format!("artifacts are inconsistent: {e}")))?;
    Ok(model)
}

pub fn run_render(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let model = assemble_model(config)?;
    let options = SvgOptions {
        label_top_m: config.label_top_m,
        ..SvgOptions::default()
    };
    let svg = render_svg(&model, &options);
    tracker.write(&config.out_dir.join(MAP_FILE), svg.as_bytes())?;
    Ok(())
}

pub fn run_report(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    let model = assemble_model(config)?;
    let report = report_markdown(&model, config.top_k);
    tracker.write(&config.out_dir.join(REPORT_FILE), report.as_bytes())?;
    let json = export_model_json(&model);
    tracker.write(&config.out_dir.join(MODEL_FILE), &json)?;
    Ok(())
}

pub fn run_all(config: &PipelineConfig, tracker: &mut OutputTracker) -> Result<(), CliError> {
    if config.harvest.is_some() {
        run_harvest(config, tracker)?;
    }
    run_resolve(config, tracker)?;
    run_align(config, tracker)?;
    run_link(config, tracker)?;
    run_cluster(config, tracker)?;
    run_project(config, tracker)?;
    if config.patents.is_some() {
        run_validate(config, tracker)?;
    } else {
        eprintln!("note: no patents path configured; skipping validation");
    }
    run_render(config, tracker)?;
    run_report(config, tracker)?;
    Ok(())
}

/// Run one subcommand with cleanup-on-failure and manifest writing.
pub fn run_stage(command: &str, config: &PipelineConfig) -> Result<(), CliError> {
    let mut tracker = OutputTracker::default();
    let outcome = match command {
        "harvest" => run_harvest(config, &mut tracker),
        "resolve" => run_resolve(config, &mut tracker),
        "align" => run_align(config, &mut tracker),
        "link" => run_link(config, &mut tracker),
        "cluster" => run_cluster(config, &mut tracker),
        "project" => run_project(config, &mut tracker),
        "validate" => run_validate(config, &mut tracker),
        "render" => run_render(config, &mut tracker),
        "report" => run_report(config, &mut tracker),
        "all" => run_all(config, &mut tracker),
        other => Err(CliError::internal(format!("unknown stage {other:?}"))),
    };
    match outcome {
        Ok(()) => {
            write_manifest(command, config, &mut tracker)?;
            Ok(())
        }
        Err(e) => {
            tracker.cleanup();
            Err(e)
        }
    }
}
