//! The assembled landscape model and its canonical JSON serialization.
//!
//! Canonical form: object keys sorted, arrays in roster order, floats at 9
//! significant digits, integers plain. Serializing a parsed canonical
//! document reproduces it byte for byte, so the export is a fixpoint.

use std::collections::BTreeMap;

use crate::clustering::ClusterProfile;
use crate::registry::EntityKind;
use crate::sigfig::format_sig9;
use crate::similarity::SimilarityMatrix;
use crate::validation::{CorrelationResult, ValidationSummary};

/// Reference to a sibling artifact file.
#[derive(Debug, Clone)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

/// One resolved entity with everything the map and report need.
#[derive(Debug, Clone)]
pub struct ModelEntity {
    pub entity_id: String,
    pub kind: EntityKind,
    pub name: String,
    pub cluster: usize,
    pub x: f64,
    pub y: f64,
    /// R&D spend in million EUR; companies only.
    pub rnd_meur: Option<f64>,
    /// Theme tag; technologies only.
    pub theme: Option<String>,
}

/// An entity that could not be resolved against the embedding store.
#[derive(Debug, Clone)]
pub struct UnresolvedEntity {
    pub kind: EntityKind,
    pub entity_id: String,
    pub wiki_title: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct AlignmentInfo {
    pub mode: String,
    pub anchor_count: usize,
    pub residual: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone)]
pub struct ModelMetadata {
    pub embedding_digest: String,
    pub embedding_dimension: usize,
    pub technologies_total: usize,
    pub companies_total: usize,
    pub unresolved: Vec<UnresolvedEntity>,
    pub alignment: AlignmentInfo,
    pub tool_version: String,
}

/// The complete pipeline product.
#[derive(Debug, Clone)]
pub struct LandscapeModel {
    pub metadata: ModelMetadata,
    /// Effective decision flags, recorded verbatim in exports and reports.
    pub decisions: BTreeMap<String, String>,
    pub aligned_vectors: FileRef,
    /// Resolved technologies in roster order, then resolved companies in
    /// roster order.
    pub entities: Vec<ModelEntity>,
    pub similarity: SimilarityMatrix,
    pub cluster_count: usize,
    pub profiles: Vec<ClusterProfile>,
    pub correlations: Vec<CorrelationResult>,
    pub validation: Option<ValidationSummary>,
}

impl LandscapeModel {
    pub fn technologies(&self) -> impl Iterator<Item = &ModelEntity> {
        self.entities
            .iter()
            .filter(|e| e.kind == EntityKind::Technology)
    }

    pub fn companies(&self) -> impl Iterator<Item = &ModelEntity> {
        self.entities.iter().filter(|e| e.kind == EntityKind::Company)
    }

    pub fn entity_name(&self, entity_id: &str) -> Option<&str> {
        self.entities
            .iter()
            .find(|e| e.entity_id == entity_id)
            .map(|e| e.name.as_str())
    }

    /// Check the structural invariant: every entity in the layout appears in
    /// the cluster assignment range and on the similarity matrix axes.
    pub fn check_consistency(&self) -> Result<(), String> {
        for entity in &self.entities {
            if entity.cluster >= self.cluster_count {
                return Err(format!(
                    "entity {:?} has cluster {} outside 0..{}",
                    entity.entity_id, entity.cluster, self.cluster_count
                ));
            }
            let on_axis = match entity.kind {
                EntityKind::Technology => self.similarity.tech_index(&entity.entity_id).is_some(),
                EntityKind::Company => self.similarity.company_index(&entity.entity_id).is_some(),
            };
            if !on_axis {
                return Err(format!(
                    "entity {:?} missing from the similarity matrix axes",
                    entity.entity_id
                ));
            }
        }
        let tech_count = self.technologies().count();
        let company_count = self.companies().count();
        if self.similarity.technologies().len() != tech_count
            || self.similarity.companies().len() != company_count
        {
            return Err("similarity matrix axes do not match the entity list".to_string());
        }
        Ok(())
    }
}

/// A JSON document in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(BTreeMap<String, Json>),
}

impl Json {
    pub fn obj(entries: Vec<(&str, Json)>) -> Json {
        Json::Obj(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    fn write(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Float(v) => out.push_str(&format_sig9(*v)),
            Json::Str(s) => write_json_string(s, out),
            Json::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Json::Obj(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_json_string(k, out);
                    out.push(':');
                    v.write(out);
                }
                out.push('}');
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        self.write(&mut out);
        out.push('\n');
        out.into_bytes()
    }
}

fn write_json_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Convert a parsed `serde_json::Value` into canonical form. Numbers that
/// parse as integers stay integers, so a canonical document survives a
/// parse/serialize round trip unchanged.
pub fn canonicalize_value(value: &serde_json::Value) -> Json {
    match value {
        serde_json::Value::Null => Json::Null,
        serde_json::Value::Bool(b) => Json::Bool(*b),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Json::Int(i)
            } else {
                Json::Float(n.as_f64().expect("number is i64 or f64"))
            }
        }
        serde_json::Value::String(s) => Json::Str(s.clone()),
        serde_json::Value::Array(items) => {
            Json::Arr(items.iter().map(canonicalize_value).collect())
        }
        serde_json::Value::Object(map) => Json::Obj(
            map.iter()
                .map(|(k, v)| (k.clone(), canonicalize_value(v)))
                .collect(),
        ),
    }
}

fn opt_float(v: Option<f64>) -> Json {
    v.map_or(Json::Null, Json::Float)
}

fn opt_str(v: &Option<String>) -> Json {
    v.as_ref().map_or(Json::Null, |s| Json::Str(s.clone()))
}

fn entity_json(e: &ModelEntity) -> Json {
    Json::obj(vec![
        ("cluster", Json::Int(e.cluster as i64)),
        ("entity_id", Json::Str(e.entity_id.clone())),
        ("kind", Json::Str(e.kind.as_str().to_string())),
        ("name", Json::Str(e.name.clone())),
        ("rnd_meur", opt_float(e.rnd_meur)),
        ("theme", opt_str(&e.theme)),
        ("x", Json::Float(e.x)),
        ("y", Json::Float(e.y)),
    ])
}

fn profile_json(p: &ClusterProfile) -> Json {
    Json::obj(vec![
        ("cluster", Json::Int(p.cluster as i64)),
        ("companies", Json::Int(p.companies as i64)),
        (
            "label_candidates",
            Json::Arr(p.label_candidates.iter().map(|s| Json::Str(s.clone())).collect()),
        ),
        ("members", Json::Int(p.members as i64)),
        ("rnd_meur_total", Json::Float(p.rnd_meur_total)),
        ("technologies", Json::Int(p.technologies as i64)),
    ])
}

fn correlation_json(r: &CorrelationResult) -> Json {
    Json::obj(vec![
        ("degenerate", Json::Bool(r.degenerate)),
        ("n", Json::Int(r.n as i64)),
        ("pearson_p", opt_float(r.pearson_p)),
        ("pearson_r", opt_float(r.pearson_r)),
        ("permutation_p", opt_float(r.permutation_p)),
        ("significant", Json::Bool(r.significant)),
        ("spearman_p", opt_float(r.spearman_p)),
        ("spearman_rho", opt_float(r.spearman_rho)),
        ("tech_id", Json::Str(r.tech_id.clone())),
    ])
}

fn metadata_json(m: &ModelMetadata) -> Json {
    Json::obj(vec![
        (
            "alignment",
            Json::obj(vec![
                ("anchor_count", Json::Int(m.alignment.anchor_count as i64)),
                ("mode", Json::Str(m.alignment.mode.clone())),
                ("rank", Json::Int(m.alignment.rank as i64)),
                ("rank_deficient", Json::Bool(m.alignment.rank_deficient)),
                ("residual", Json::Float(m.alignment.residual)),
            ]),
        ),
        ("companies_total", Json::Int(m.companies_total as i64)),
        ("embedding_digest", Json::Str(m.embedding_digest.clone())),
        (
            "embedding_dimension",
            Json::Int(m.embedding_dimension as i64),
        ),
        (
            "technologies_total",
            Json::Int(m.technologies_total as i64),
        ),
        ("tool_version", Json::Str(m.tool_version.clone())),
        (
            "unresolved",
            Json::Arr(
                m.unresolved
                    .iter()
                    .map(|u| {
                        Json::obj(vec![
                            ("entity_id", Json::Str(u.entity_id.clone())),
                            ("kind", Json::Str(u.kind.as_str().to_string())),
                            ("reason", Json::Str(u.reason.clone())),
                            ("wiki_title", Json::Str(u.wiki_title.clone())),
                        ])
                    })
                    .collect(),
            ),
        ),
    ])
}

/// Serialize the complete model in canonical JSON.
pub fn export_model_json(model: &LandscapeModel) -> Vec<u8> {
    let similarity = Json::obj(vec![
        (
            "companies",
            Json::Arr(
                model
                    .similarity
                    .companies()
                    .iter()
                    .map(|c| Json::Str(c.clone()))
                    .collect(),
            ),
        ),
        (
            "technologies",
            Json::Arr(
                model
                    .similarity
                    .technologies()
                    .iter()
                    .map(|t| Json::Str(t.clone()))
                    .collect(),
            ),
        ),
        (
            "values",
            Json::Arr(
                (0..model.similarity.technologies().len())
                    .map(|i| {
                        Json::Arr(
                            model
                                .similarity
                                .tech_row(i)
                                .iter()
                                .map(|v| Json::Float(*v))
                                .collect(),
                        )
                    })
                    .collect(),
            ),
        ),
    ]);

    let validation = model.validation.as_ref().map_or(Json::Null, |s| {
        Json::obj(vec![
            ("degenerate", Json::Int(s.degenerate as i64)),
            ("not_significant", Json::Int(s.not_significant as i64)),
            ("significant", Json::Int(s.significant as i64)),
            ("total", Json::Int(s.total as i64)),
        ])
    });

    Json::obj(vec![
        (
            "aligned_vectors",
            Json::obj(vec![
                ("path", Json::Str(model.aligned_vectors.path.clone())),
                ("sha256", Json::Str(model.aligned_vectors.sha256.clone())),
            ]),
        ),
        (
            "clusters",
            Json::obj(vec![
                ("k", Json::Int(model.cluster_count as i64)),
                (
                    "profiles",
                    Json::Arr(model.profiles.iter().map(profile_json).collect()),
                ),
            ]),
        ),
        (
            "correlations",
            Json::obj(vec![
                (
                    "results",
                    Json::Arr(model.correlations.iter().map(correlation_json).collect()),
                ),
                ("summary", validation),
            ]),
        ),
        (
            "decisions",
            Json::Obj(
                model
                    .decisions
                    .iter()
                    .map(|(k, v)| (k.clone(), Json::Str(v.clone())))
                    .collect(),
            ),
        ),
        (
            "entities",
            Json::Arr(model.entities.iter().map(entity_json).collect()),
        ),
        ("metadata", metadata_json(&model.metadata)),
        ("similarity", similarity),
    ])
    .to_bytes()
}

/// Parse any JSON bytes and re-serialize them canonically. Applying this to
/// `export_model_json` output reproduces it exactly.
pub fn recanonicalize(bytes: &[u8]) -> Result<Vec<u8>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    Ok(canonicalize_value(&value).to_bytes())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::cross_similarity;

    fn tiny_model() -> LandscapeModel {
        let techs = vec![
            ("t1".to_string(), vec![1.0, 0.0]),
            ("t2".to_string(), vec![0.0, 1.0]),
            ("t3".to_string(), vec![0.6, 0.8]),
        ];
        let comps = vec![
            ("CompA".to_string(), vec![0.8, 0.6]),
            ("CompB".to_string(), vec![1.0, 0.0]),
        ];
        let similarity = cross_similarity(&techs, &comps).unwrap();
        let mut entities = Vec::new();
        for (i, (id, _)) in techs.iter().enumerate() {
            entities.push(ModelEntity {
                entity_id: id.clone(),
                kind: EntityKind::Technology,
                name: format!("Tech {i}"),
                cluster: i % 2,
                x: i as f64 * 0.5,
                y: -(i as f64),
                rnd_meur: None,
                theme: if i == 0 { Some("circular-economy".into()) } else { None },
            });
        }
        for (i, (id, _)) in comps.iter().enumerate() {
            entities.push(ModelEntity {
                entity_id: id.clone(),
                kind: EntityKind::Company,
                name: id.clone(),
                cluster: i % 2,
                x: 1.0 + i as f64,
                y: 0.25,
                rnd_meur: Some(100.0 * (i + 1) as f64),
                theme: None,
            });
        }
        LandscapeModel {
            metadata: ModelMetadata {
                embedding_digest: "abc123".into(),
                embedding_dimension: 2,
                technologies_total: 3,
                companies_total: 2,
                unresolved: vec![],
                alignment: AlignmentInfo {
                    mode: "user_supplied".into(),
                    anchor_count: 2,
                    residual: 0.001234,
                    rank: 2,
                    rank_deficient: false,
                },
                tool_version: "0.1.0".into(),
            },
            decisions: [("alpha".to_string(), "0.05".to_string())].into(),
            aligned_vectors: FileRef {
                path: "aligned.json".into(),
                sha256: "deadbeef".into(),
            },
            entities,
            similarity,
            cluster_count: 2,
            profiles: vec![
                ClusterProfile {
                    cluster: 0,
                    members: 3,
                    technologies: 2,
                    companies: 1,
                    rnd_meur_total: 100.0,
                    label_candidates: vec!["Tech 0".into()],
                },
                ClusterProfile {
                    cluster: 1,
                    members: 2,
                    technologies: 1,
                    companies: 1,
                    rnd_meur_total: 200.0,
                    label_candidates: vec!["Tech 1".into()],
                },
            ],
            correlations: vec![],
            validation: None,
        }
    }

    #[test]
    fn export_is_a_serialization_fixpoint() {
        let bytes = export_model_json(&tiny_model());
        let again = recanonicalize(&bytes).unwrap();
        assert_eq!(bytes, again);
        let thrice = recanonicalize(&again).unwrap();
        assert_eq!(again, thrice);
    }

    #[test]
    fn technologies_array_has_roster_length() {
        let bytes = export_model_json(&tiny_model());
        let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(
            value["similarity"]["technologies"].as_array().unwrap().len(),
            3
        );
        let tech_entities = value["entities"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|e| e["kind"] == "technology")
            .count();
        assert_eq!(tech_entities, 3);
    }

    #[test]
    fn identical_models_export_identical_bytes() {
        assert_eq!(export_model_json(&tiny_model()), export_model_json(&tiny_model()));
    }

    #[test]
    fn consistency_check_accepts_and_rejects() {
        let model = tiny_model();
        assert!(model.check_consistency().is_ok());
        let mut broken = tiny_model();
        broken.entities[0].cluster = 99;
        assert!(broken.check_consistency().is_err());
        let mut missing = tiny_model();
        missing.entities[0].entity_id = "ghost".into();
        assert!(missing.check_consistency().is_err());
    }

    #[test]
    fn string_escaping_is_json_safe() {
        let mut out = String::new();
        write_json_string("a\"b\\c\nd\u{1}", &mut out);
        assert_eq!(out, "\"a\\\"b\\\\c\\nd\\u0001\"");
        let parsed: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed.as_str().unwrap(), "a\"b\\c\nd\u{1}");
    }
}
