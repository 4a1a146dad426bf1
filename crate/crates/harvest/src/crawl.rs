//! Breadth-first traversal of a MediaWiki category tree via the
//! `list=categorymembers` query API, following continuation tokens until
//! each category is exhausted.

use std::collections::{HashSet, VecDeque};

use crate::fetch::Fetch;
use crate::HarvestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryKind {
    Page,
    Subcategory,
}

/// One discovered member. `depth` is the number of subcategory hops below
/// the root category of the category that listed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryPage {
    pub title: String,
    pub kind: CategoryKind,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct CrawlConfig {
    pub endpoint: String,
    pub root_category: String,
    pub max_depth: usize,
    /// `cmlimit` sent with every request.
    pub page_limit: usize,
}

impl CrawlConfig {
    pub fn new(endpoint: &str, root_category: &str, max_depth: usize) -> Self {
        CrawlConfig {
            endpoint: endpoint.to_string(),
            root_category: root_category.to_string(),
            max_depth,
            page_limit: 500,
        }
    }
}

/// Crawl result: pages in discovery order plus any skip warnings.
#[derive(Debug, Clone)]
pub struct CrawlOutcome {
    pub pages: Vec<CategoryPage>,
    pub warnings: Vec<String>,
}

fn member_url(
    config: &CrawlConfig,
    category: &str,
    token: Option<&str>,
) -> Result<String, HarvestError> {
    let mut url = url::Url::parse(&config.endpoint).map_err(|e| HarvestError::BadEndpoint {
        url: config.endpoint.clone(),
        detail: e.to_string(),
    })?;
    {
        let mut pairs = url.query_pairs_mut();
        pairs.append_pair("action", "query");
        pairs.append_pair("list", "categorymembers");
        pairs.append_pair("cmtitle", &format!("Category:{category}"));
        pairs.append_pair("cmlimit", &config.page_limit.to_string());
        pairs.append_pair("format", "json");
        if let Some(token) = token {
            pairs.append_pair("cmcontinue", token);
        }
    }
    Ok(url.into())
}

struct MemberBatch {
    members: Vec<(String, CategoryKind)>,
    continue_token: Option<String>,
}

fn parse_members(url: &str, body: &str) -> Result<MemberBatch, HarvestError> {
    let malformed = |detail: &str| HarvestError::Malformed {
        url: url.to_string(),
        detail: detail.to_string(),
    };
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| malformed(&format!("not JSON: {e}")))?;
    let members = value
        .get("query")
        .and_then(|q| q.get("categorymembers"))
        .and_then(|m| m.as_array())
        .ok_or_else(|| malformed("missing query.categorymembers array"))?;
    let mut parsed = Vec::with_capacity(members.len());
    for member in members {
        let title = member
            .get("title")
            .and_then(|t| t.as_str())
            .ok_or_else(|| malformed("member without a title"))?
            .to_string();
        // Namespace 14 is the category namespace.
        let ns = member.get("ns").and_then(|n| n.as_i64());
        let kind = if ns == Some(14) || title.starts_with("Category:") {
            CategoryKind::Subcategory
        } else {
            CategoryKind::Page
        };
        parsed.push((title, kind));
    }
    let continue_token = value
        .get("continue")
        .and_then(|c| c.get("cmcontinue"))
        .and_then(|t| t.as_str())
        .map(str::to_string);
    Ok(MemberBatch {
        members: parsed,
        continue_token,
    })
}

/// List every member of one category, following continuation tokens.
fn category_members(
    fetch: &dyn Fetch,
    config: &CrawlConfig,
    category: &str,
) -> Result<Vec<(String, CategoryKind)>, HarvestError> {
    let mut members = Vec::new();
    let mut token: Option<String> = None;
    loop {
        let url = member_url(config, category, token.as_deref())?;
        let response = fetch.get(&url)?;
        if response.status != 200 {
            return Err(HarvestError::Status {
                url,
                status: response.status,
            });
        }
        let batch = parse_members(&url, &response.body)?;
        members.extend(batch.members);
        match batch.continue_token {
            Some(next) => token = Some(next),
            None => return Ok(members),
        }
    }
}

/// Breadth-first category walk to `max_depth`. Members of the root have
/// depth 0; a category's members inherit its entry depth plus one. Duplicate
/// titles are reported once at their first (shallowest) discovery, and a
/// category is never requested twice, so subcategory cycles terminate with
/// a warning instead of looping.
pub fn fetch_category_tree(
    fetch: &dyn Fetch,
    config: &CrawlConfig,
) -> Result<CrawlOutcome, HarvestError> {
    let mut pages = Vec::new();
    let mut warnings = Vec::new();
    let mut seen_titles: HashSet<String> = HashSet::new();
    let mut visited_categories: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<(String, usize)> = VecDeque::new();
    queue.push_back((config.root_category.clone(), 0));

    while let Some((category, member_depth)) = queue.pop_front() {
        if !visited_categories.insert(category.clone()) {
            let warning = format!(
                "category {category:?} reached again at depth {member_depth}; skipping to avoid a cycle"
            );
            log::warn!("{warning}");
            warnings.push(warning);
            continue;
        }
        for (title, kind) in category_members(fetch, config, &category)? {
            if seen_titles.insert(title.clone()) {
                pages.push(CategoryPage {
                    title: title.clone(),
                    kind,
                    depth: member_depth,
                });
            }
            if kind == CategoryKind::Subcategory && member_depth < config.max_depth {
                let name = title.strip_prefix("Category:").unwrap_or(&title).to_string();
                queue.push_back((name, member_depth + 1));
            }
        }
    }

    Ok(CrawlOutcome { pages, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_is_built_with_stable_parameter_order() {
        let config = CrawlConfig::new("https://wiki.example/w/api.php", "Emerging technologies", 1);
        let url = member_url(&config, "Emerging technologies", None).unwrap();
        assert_eq!(
            url,
            "https://wiki.example/w/api.php?action=query&list=categorymembers&cmtitle=Category%3AEmerging+technologies&cmlimit=500&format=json"
        );
        let with_token = member_url(&config, "X", Some("page|123")).unwrap();
        assert!(with_token.ends_with("&cmcontinue=page%7C123"));
    }

    #[test]
    fn member_parse_reads_titles_kinds_and_token() {
        let body = r#"{
            "query": {"categorymembers": [
                {"pageid": 1, "ns": 0, "title": "Carbon capture and storage"},
                {"pageid": 2, "ns": 14, "title": "Category:Sensors"}
            ]},
            "continue": {"cmcontinue": "page|42", "continue": "-||"}
        }"#;
        let batch = parse_members("u", body).unwrap();
        assert_eq!(batch.members.len(), 2);
        assert_eq!(batch.members[0].1, CategoryKind::Page);
        assert_eq!(batch.members[1].1, CategoryKind::Subcategory);
        assert_eq!(batch.continue_token.as_deref(), Some("page|42"));
    }

    #[test]
    fn malformed_body_is_rejected() {
        assert!(matches!(
            parse_members("u", "{}"),
            Err(HarvestError::Malformed { .. })
        ));
        assert!(matches!(
            parse_members("u", "not json"),
            Err(HarvestError::Malformed { .. })
        ));
    }
}
