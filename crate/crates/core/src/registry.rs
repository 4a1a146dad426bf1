//! Technology and company rosters: CSV loading, metadata, and resolution of
//! each entry to an embedding key.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingStore;

/// Default prefix applied when mangling a page title into an embedding key.
pub const DEFAULT_ENTITY_PREFIX: &str = "ENTITY/";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("missing column {column:?} in {file} header")]
    MissingColumn {
        file: &'static str,
        column: &'static str,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: column {column:?} has invalid value {value:?}")]
    BadValue {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("duplicate wiki_title {title:?} on lines {first} and {second}")]
    DuplicateWikiTitle {
        title: String,
        first: u64,
        second: u64,
    },
    #[error("duplicate tech_id {id:?} on lines {first} and {second}")]
    DuplicateTechId { id: String, first: u64, second: u64 },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One row of the company roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Company {
    pub rank: u32,
    pub name: String,
    pub wiki_title: String,
    pub rnd_meur: f64,
    pub country: String,
    pub industry: String,
}

/// One row of the technology roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub tech_id: String,
    pub name: String,
    pub wiki_title: String,
    pub theme: Option<String>,
}

/// Which roster an entity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Technology,
    Company,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Technology => "technology",
            EntityKind::Company => "company",
        }
    }
}

/// Roster entries that can be resolved against an embedding store.
pub trait RosterEntity {
    /// Stable identifier used across artifacts: `tech_id` for technologies,
    /// `wiki_title` for companies.
    fn entity_id(&self) -> &str;
    fn wiki_title(&self) -> &str;
    fn display_name(&self) -> &str;
    fn kind(&self) -> EntityKind;
}

impl RosterEntity for Company {
    fn entity_id(&self) -> &str {
        &self.wiki_title
    }
    fn wiki_title(&self) -> &str {
        &self.wiki_title
    }
    fn display_name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> EntityKind {
        EntityKind::Company
    }
}

impl RosterEntity for Technology {
    fn entity_id(&self) -> &str {
        &self.tech_id
    }
    fn wiki_title(&self) -> &str {
        &self.wiki_title
    }
    fn display_name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> EntityKind {
        EntityKind::Technology
    }
}

/// A roster entry that found its vector.
#[derive(Debug, Clone)]
pub struct Resolved<T> {
    pub entity: T,
    pub key: String,
    pub vector: Vec<f64>,
}

/// Outcome of resolving a roster against a store. Misses are data, not
/// errors; they are carried alongside so reports can list them.
#[derive(Debug, Clone)]
pub struct ResolvedEntitySet<T> {
    pub resolved: Vec<Resolved<T>>,
    pub unresolved: Vec<(T, String)>,
}

impl<T> ResolvedEntitySet<T> {
    pub fn total(&self) -> usize {
        self.resolved.len() + self.unresolved.len()
    }
}

/// Turn a page title into an embedding key: prefix plus the title with
/// spaces replaced by underscores. Case is left untouched.
pub fn mangle_title(prefix: &str, wiki_title: &str) -> String {
    format!("{prefix}{}", wiki_title.replace(' ', "_"))
}

fn header_index(
    headers: &csv::StringRecord,
    file: &'static str,
    columns: &[&'static str],
) -> Result<Vec<usize>, RegistryError> {
    columns
        .iter()
        .map(|col| {
            headers
                .iter()
                .position(|h| h == *col)
                .ok_or(RegistryError::MissingColumn { file, column: col })
        })
        .collect()
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Load the company roster CSV (`rank,name,wiki_title,rnd_meur,country,industry`).
pub fn load_companies<R: Read>(source: R) -> Result<Vec<Company>, RegistryError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = header_index(
        &headers,
        "companies.csv",
        &["rank", "name", "wiki_title", "rnd_meur", "country", "industry"],
    )?;

    let mut companies = Vec::new();
    let mut seen_titles: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() < headers.len() {
            return Err(RegistryError::FieldCount {
                line,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let field = |i: usize| record.get(cols[i]).unwrap_or("").to_string();
        let rank: u32 = field(0).parse().map_err(|_| RegistryError::BadValue {
            line,
            column: "rank",
            value: field(0),
        })?;
        if rank == 0 {
            return Err(RegistryError::BadValue {
                line,
                column: "rank",
                value: field(0),
            });
        }
        let rnd_meur: f64 = field(3).parse().map_err(|_| RegistryError::BadValue {
            line,
            column: "rnd_meur",
            value: field(3),
        })?;
        if !rnd_meur.is_finite() || rnd_meur < 0.0 {
            return Err(RegistryError::BadValue {
                line,
                column: "rnd_meur",
                value: field(3),
            });
        }
        let wiki_title = field(2);
        if wiki_title.is_empty() {
            return Err(RegistryError::BadValue {
                line,
                column: "wiki_title",
                value: wiki_title,
            });
        }
        if let Some(&first) = seen_titles.get(&wiki_title) {
            return Err(RegistryError::DuplicateWikiTitle {
                title: wiki_title,
                first,
                second: line,
            });
        }
        seen_titles.insert(wiki_title.clone(), line);
        companies.push(Company {
            rank,
            name: field(1),
            wiki_title,
            rnd_meur,
            country: field(4),
            industry: field(5),
        });
    }
    Ok(companies)
}

/// Load the technology roster CSV (`tech_id,name,wiki_title,theme`).
pub fn load_technologies<R: Read>(source: R) -> Result<Vec<Technology>, RegistryError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = header_index(
        &headers,
        "technologies.csv",
        &["tech_id", "name", "wiki_title", "theme"],
    )?;

    let mut technologies = Vec::new();
    let mut seen_ids: HashMap<String, u64> = HashMap::new();
    let mut seen_titles: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() < headers.len() {
            return Err(RegistryError::FieldCount {
                line,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let field = |i: usize| record.get(cols[i]).unwrap_or("").to_string();
        let tech_id = field(0);
        if tech_id.is_empty() {
            return Err(RegistryError::BadValue {
                line,
                column: "tech_id",
                value: tech_id,
            });
        }
        let wiki_title = field(2);
        if wiki_title.is_empty() {
            return Err(RegistryError::BadValue {
                line,
                column: "wiki_title",
                value: wiki_title,
            });
        }
        if let Some(&first) = seen_ids.get(&tech_id) {
            return Err(RegistryError::DuplicateTechId {
                id: tech_id,
                first,
                second: line,
            });
        }
        if let Some(&first) = seen_titles.get(&wiki_title) {
            return Err(RegistryError::DuplicateWikiTitle {
                title: wiki_title,
                first,
                second: line,
            });
        }
        seen_ids.insert(tech_id.clone(), line);
        seen_titles.insert(wiki_title.clone(), line);
        let theme = field(3);
        technologies.push(Technology {
            tech_id,
            name: field(1),
            wiki_title,
            theme: if theme.is_empty() { None } else { Some(theme) },
        });
    }
    Ok(technologies)
}

/// Resolve every roster entry to an embedding key and vector. Entries whose
/// mangled key is absent from the store land in `unresolved` with the reason
/// `"missing key"`.
pub fn resolve_entities<T: RosterEntity + Clone>(
    roster: &[T],
    store: &EmbeddingStore,
    prefix: &str,
) -> ResolvedEntitySet<T> {
    let mut resolved = Vec::new();
    let mut unresolved = Vec::new();
    for entry in roster {
        let key = mangle_title(prefix, entry.wiki_title());
        match store.get_vector(&key) {
            Some(v) => resolved.push(Resolved {
                entity: entry.clone(),
                key,
                vector: v.to_vec(),
            }),
            None => unresolved.push((entry.clone(), "missing key".to_string())),
        }
    }
    ResolvedEntitySet { resolved, unresolved }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingStore;

    const COMPANY_HEADER: &str = "rank,name,wiki_title,rnd_meur,country,industry\n";

    #[test]
    fn loads_company_row() {
        let csv = format!("{COMPANY_HEADER}1,Nokia,Nokia,4500.0,Finland,Telecommunications\n");
        let companies = load_companies(csv.as_bytes()).unwrap();
        assert_eq!(companies.len(), 1);
        assert_eq!(companies[0].rank, 1);
        assert_eq!(companies[0].rnd_meur, 4500.0);
        assert_eq!(companies[0].wiki_title, "Nokia");
    }

    #[test]
    fn header_only_is_empty_roster() {
        assert!(load_companies(COMPANY_HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn bad_spend_names_row() {
        let csv = format!("{COMPANY_HEADER}1,A,A,100,X,Y\n2,B,B,abc,X,Y\n");
        match load_companies(csv.as_bytes()).unwrap_err() {
            RegistryError::BadValue { line, column, value } => {
                assert_eq!(line, 3);
                assert_eq!(column, "rnd_meur");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn renamed_column_is_detected() {
        let csv = "rank,name,page,rnd_meur,country,industry\n1,A,A,1,X,Y\n";
        assert!(matches!(
            load_companies(csv.as_bytes()).unwrap_err(),
            RegistryError::MissingColumn { column: "wiki_title", .. }
        ));
    }

    #[test]
    fn duplicate_company_title_names_both_rows() {
        let csv = format!("{COMPANY_HEADER}1,A,Same,1,X,Y\n2,B,Same,2,X,Y\n");
        match load_companies(csv.as_bytes()).unwrap_err() {
            RegistryError::DuplicateWikiTitle { title, first, second } => {
                assert_eq!(title, "Same");
                assert_eq!((first, second), (2, 3));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn loads_technology_row() {
        let csv = "tech_id,name,wiki_title,theme\nt005,5G,5G,telecom\n";
        let techs = load_technologies(csv.as_bytes()).unwrap();
        assert_eq!(techs[0].tech_id, "t005");
        assert_eq!(techs[0].theme.as_deref(), Some("telecom"));
    }

    #[test]
    fn empty_theme_becomes_none() {
        let csv = "tech_id,name,wiki_title,theme\nt001,Robotics,Robotics,\n";
        let techs = load_technologies(csv.as_bytes()).unwrap();
        assert_eq!(techs[0].theme, None);
    }

    #[test]
    fn duplicate_tech_id_names_both_rows() {
        let csv = "tech_id,name,wiki_title,theme\nt001,A,A,\nt001,B,B,\n";
        match load_technologies(csv.as_bytes()).unwrap_err() {
            RegistryError::DuplicateTechId { id, first, second } => {
                assert_eq!(id, "t001");
                assert_eq!((first, second), (2, 3));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn hundred_row_roster_loads_in_full() {
        let mut csv = String::from("tech_id,name,wiki_title,theme\n");
        for i in 0..100 {
            csv.push_str(&format!("t{i:03},Tech {i},Tech {i},\n"));
        }
        assert_eq!(load_technologies(csv.as_bytes()).unwrap().len(), 100);
    }

    #[test]
    fn quoted_fields_are_supported() {
        let csv = format!("{COMPANY_HEADER}1,\"Acme, Inc.\",Acme Inc.,10.5,US,Chemicals\n");
        let companies = load_companies(csv.as_bytes()).unwrap();
        assert_eq!(companies[0].name, "Acme, Inc.");
    }

    #[test]
    fn mangling_prefixes_and_underscores() {
        assert_eq!(
            mangle_title(DEFAULT_ENTITY_PREFIX, "Electric vehicle"),
            "ENTITY/Electric_vehicle"
        );
        assert_eq!(mangle_title("", "5G"), "5G");
    }

    fn store_with(keys: &[&str]) -> EmbeddingStore {
        let entries = keys
            .iter()
            .map(|k| (k.to_string(), vec![1.0, 0.0]))
            .collect();
        EmbeddingStore::from_entries(2, entries).unwrap()
    }

    fn tech(id: &str, title: &str) -> Technology {
        Technology {
            tech_id: id.to_string(),
            name: title.to_string(),
            wiki_title: title.to_string(),
            theme: None,
        }
    }

    #[test]
    fn resolves_present_title() {
        let store = store_with(&["ENTITY/Electric_vehicle"]);
        let roster = vec![tech("t001", "Electric vehicle")];
        let set = resolve_entities(&roster, &store, DEFAULT_ENTITY_PREFIX);
        assert_eq!(set.resolved.len(), 1);
        assert_eq!(set.resolved[0].key, "ENTITY/Electric_vehicle");
    }

    #[test]
    fn missing_title_is_unresolved_with_reason() {
        let store = store_with(&["ENTITY/Other"]);
        let roster = vec![tech("t001", "Electric vehicle")];
        let set = resolve_entities(&roster, &store, DEFAULT_ENTITY_PREFIX);
        assert!(set.resolved.is_empty());
        assert_eq!(set.unresolved[0].1, "missing key");
    }

    #[test]
    fn resolution_counts_are_conserved() {
        let present: Vec<String> = (0..7).map(|i| format!("ENTITY/T{i}")).collect();
        let store = store_with(&present.iter().map(String::as_str).collect::<Vec<_>>());
        let roster: Vec<Technology> = (0..10).map(|i| tech(&format!("t{i:03}"), &format!("T{i}"))).collect();
        let set = resolve_entities(&roster, &store, DEFAULT_ENTITY_PREFIX);
        assert_eq!(set.resolved.len(), 7);
        assert_eq!(set.unresolved.len(), 3);
        assert_eq!(set.total(), roster.len());
    }
}
