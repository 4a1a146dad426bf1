//! Patent-count validation of model linkages: per-technology correlation of
//! similarity against patent counts across companies, with significance
//! testing and a summary over all technologies.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::similarity::SimilarityMatrix;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("patents csv, line {line}: {detail}")]
    Csv { line: u64, detail: String },
    #[error("line {line}: patent count {value:?} is not a non-negative integer")]
    BadCount { line: u64, value: String },
    #[error("unknown technology {id:?}")]
    UnknownTech { id: String },
    #[error("sample of {n} companies is too small (minimum 3)")]
    SampleTooSmall { n: usize },
}

/// Patent counts per (company, technology); an absent pair counts as zero.
#[derive(Debug, Clone, Default)]
pub struct PatentTable {
    counts: HashMap<(String, String), u64>,
    /// Companies with any patent data at all; defines the default
    /// correlation sample.
    pub coverage: BTreeSet<String>,
}

impl PatentTable {
    pub fn count(&self, company_id: &str, tech_id: &str) -> u64 {
        self.counts
            .get(&(company_id.to_string(), tech_id.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Row ids referencing companies or technologies missing from the given
    /// rosters. Rows are kept; these are warnings, not errors.
    pub fn unknown_ids(
        &self,
        companies: &BTreeSet<String>,
        technologies: &BTreeSet<String>,
    ) -> Vec<String> {
        let mut warnings = BTreeSet::new();
        for (company, tech) in self.counts.keys() {
            if !companies.contains(company) {
                warnings.insert(format!("unknown company {company:?} in patent data"));
            }
            if !technologies.contains(tech) {
                warnings.insert(format!("unknown technology {tech:?} in patent data"));
            }
        }
        warnings.into_iter().collect()
    }
}

/// Load `company_wiki_title,tech_id,patent_count` rows. Duplicate pairs are
/// summed.
pub fn load_patents<R: Read>(source: R) -> Result<PatentTable, ValidationError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| ValidationError::Csv { line: 1, detail: e.to_string() })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ValidationError::Csv {
                line: 1,
                detail: format!("missing column {name:?}"),
            })
    };
    let c_idx = col("company_wiki_title")?;
    let t_idx = col("tech_id")?;
    let n_idx = col("patent_count")?;

    let mut table = PatentTable::default();
    for record in reader.records() {
        let record = record.map_err(|e| ValidationError::Csv {
            line: 0,
            detail: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let company = record.get(c_idx).unwrap_or("").to_string();
        let tech = record.get(t_idx).unwrap_or("").to_string();
        let raw = record.get(n_idx).unwrap_or("");
        if company.is_empty() || tech.is_empty() {
            return Err(ValidationError::Csv {
                line,
                detail: "empty company or technology id".to_string(),
            });
        }
        let count: u64 = raw.parse().map_err(|_| ValidationError::BadCount {
            line,
            value: raw.to_string(),
        })?;
        *table.counts.entry((company.clone(), tech)).or_insert(0) += count;
        table.coverage.insert(company);
    }
    Ok(table)
}

/// Knobs for the correlation run; all defaults are recorded in the report.
#[derive(Debug, Clone)]
pub struct CorrelationOptions {
    /// One-sided significance level for positive correlation.
    pub alpha: f64,
    /// Drop zero-count companies from each technology's sample instead of
    /// keeping them as zeros.
    pub exclude_zero: bool,
    /// Apply log1p to counts before the Pearson test (counts are heavy
    /// tailed). Spearman is rank-based and unaffected.
    pub log_transform: bool,
    /// Also estimate a one-sided permutation p-value with this many
    /// seeded shuffles.
    pub permutation: Option<PermutationOptions>,
}

#[derive(Debug, Clone, Copy)]
pub struct PermutationOptions {
    pub shuffles: usize,
    pub seed: u64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions {
            alpha: 0.05,
            exclude_zero: false,
            log_transform: true,
            permutation: None,
        }
    }
}

/// Correlation statistics for one technology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub tech_id: String,
    pub n: usize,
    pub pearson_r: Option<f64>,
    pub pearson_p: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub spearman_p: Option<f64>,
    pub permutation_p: Option<f64>,
    /// Positive Pearson correlation with one-sided p below alpha.
    pub significant: bool,
    /// Zero variance in either variable, or too few companies to test.
    pub degenerate: bool,
}

/// Pearson correlation coefficient; `None` when either variable has zero
/// variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks with ties receiving the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; the tied block i..=j shares the mean rank.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation on average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided p-value for a correlation coefficient via the t statistic
/// `t = r·√((n−2)/(1−r²))` with `n − 2` degrees of freedom.
pub fn correlation_p_two_sided(r: f64, n: usize) -> f64 {
    assert!(n >= 3, "p-value needs n >= 3");
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * ((n as f64 - 2.0) / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 2.0).expect("valid dof");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// One-sided (positive) p-value from the two-sided value.
pub fn one_sided_positive_p(r: f64, p_two_sided: f64) -> f64 {
    if r >= 0.0 {
        p_two_sided / 2.0
    } else {
        1.0 - p_two_sided / 2.0
    }
}

/// Seeded one-sided permutation p-value for positive Pearson correlation:
/// the fraction of label shuffles whose coefficient reaches the observed one.
pub fn permutation_pvalue(x: &[f64], y: &[f64], shuffles: usize, seed: u64) -> Option<f64> {
    let observed = pearson(x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled: Vec<f64> = y.to_vec();
    let mut at_least = 0usize;
    for _ in 0..shuffles {
        shuffled.shuffle(&mut rng);
        if let Some(r) = pearson(x, &shuffled) {
            if r >= observed {
                at_least += 1;
            }
        }
    }
    Some((at_least as f64 + 1.0) / (shuffles as f64 + 1.0))
}

/// Correlate one technology's similarity column against patent counts over
/// the given company sample.
pub fn correlate_technology(
    tech_id: &str,
    matrix: &SimilarityMatrix,
    patents: &PatentTable,
    companies: &[String],
    options: &CorrelationOptions,
) -> Result<CorrelationResult, ValidationError> {
    let tech_idx = matrix
        .tech_index(tech_id)
        .ok_or_else(|| ValidationError::UnknownTech { id: tech_id.to_string() })?;

    let mut sims = Vec::new();
    let mut counts = Vec::new();
    for company in companies {
        let count = patents.count(company, tech_id);
        if options.exclude_zero && count == 0 {
            continue;
        }
        let j = match matrix.company_index(company) {
            Some(j) => j,
            None => continue,
        };
        sims.push(matrix.value(tech_idx, j));
        counts.push(count as f64);
    }

    let n = sims.len();
    if n < 3 {
        return Err(ValidationError::SampleTooSmall { n });
    }

    let pearson_counts: Vec<f64> = if options.log_transform {
        counts.iter().map(|c| c.ln_1p()).collect()
    } else {
        counts.clone()
    };

    let pearson_r = pearson(&sims, &pearson_counts);
    let spearman_rho = spearman(&sims, &counts);
    let degenerate = pearson_r.is_none() || spearman_rho.is_none();

    let pearson_p = pearson_r.map(|r| correlation_p_two_sided(r, n));
    let spearman_p = spearman_rho.map(|r| correlation_p_two_sided(r, n));
    let permutation_p = options
        .permutation
        .as_ref()
        .and_then(|p| permutation_pvalue(&sims, &pearson_counts, p.shuffles, p.seed));

    let significant = match (pearson_r, pearson_p) {
        (Some(r), Some(p2)) => r > 0.0 && one_sided_positive_p(r, p2) < options.alpha,
        _ => false,
    };

    Ok(CorrelationResult {
        tech_id: tech_id.to_string(),
        n,
        pearson_r,
        pearson_p,
        spearman_rho,
        spearman_p,
        permutation_p,
        significant,
        degenerate,
    })
}

/// Counts plus an ordering for reporting: strongest coefficient first,
/// degenerate results last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub total: usize,
    pub significant: usize,
    pub not_significant: usize,
    pub degenerate: usize,
    /// Indices into the result list, sorted for display.
    pub order: Vec<usize>,
}

pub fn validation_summary(results: &[CorrelationResult]) -> ValidationSummary {
    let significant = results.iter().filter(|r| r.significant).count();
    let degenerate = results.iter().filter(|r| r.degenerate).count();
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = results[a].pearson_r.unwrap_or(f64::NEG_INFINITY);
        let rb = results[b].pearson_r.unwrap_or(f64::NEG_INFINITY);
        rb.partial_cmp(&ra)
            .unwrap()
            .then_with(|| results[a].tech_id.cmp(&results[b].tech_id))
    });
    ValidationSummary {
        total: results.len(),
        significant,
        not_significant: results.len() - significant - degenerate,
        degenerate,
        order,
    }
}
