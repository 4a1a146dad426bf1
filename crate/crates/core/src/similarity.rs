//! Cosine similarities between technology and aligned company vectors, the
//! dense cross-similarity matrix, and ranked top-k linkages both ways.

use std::collections::HashMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::sigfig::format_sig9;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("zero vector for {id:?}")]
    ZeroVector { id: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{side} entity set is empty")]
    EmptySet { side: &'static str },
    #[error("unknown query id {id:?}")]
    UnknownQuery { id: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("similarity matrix csv, line {line}: {detail}")]
    Csv { line: usize, detail: String },
    #[error("csv error: {0}")]
    CsvWrite(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Cosine similarity of two non-zero vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroVector { id: String::new() });
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Which axis a top-k query runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    TechToCompanies,
    CompanyToTechs,
}

/// Ranked neighbors for one query entity, most similar first. Ties are
/// broken by ascending entity id.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: String,
    pub neighbors: Vec<(String, f64)>,
}

/// Dense technologies × companies cosine matrix in roster order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    technologies: Vec<String>,
    companies: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn technologies(&self) -> &[String] {
        &self.technologies
    }

    pub fn companies(&self) -> &[String] {
        &self.companies
    }

    pub fn value(&self, tech_idx: usize, company_idx: usize) -> f64 {
        self.values[tech_idx * self.companies.len() + company_idx]
    }

    pub fn tech_index(&self, tech_id: &str) -> Option<usize> {
        self.technologies.iter().position(|t| t == tech_id)
    }

    pub fn company_index(&self, company_id: &str) -> Option<usize> {
        self.companies.iter().position(|c| c == company_id)
    }

    /// Similarity row for one technology across all companies.
    pub fn tech_row(&self, tech_idx: usize) -> &[f64] {
        let w = self.companies.len();
        &self.values[tech_idx * w..(tech_idx + 1) * w]
    }

    /// Top `min(k, axis len)` neighbors for a query entity.
    pub fn top_k(
        &self,
        query: &str,
        direction: Direction,
        k: usize,
    ) -> Result<NeighborList, SimilarityError> {
        if k == 0 {
            return Err(SimilarityError::InvalidK);
        }
        let mut scored: Vec<(String, f64)> = match direction {
            Direction::CompanyToTechs => {
                let j = self
                    .company_index(query)
                    .ok_or_else(|| SimilarityError::UnknownQuery { id: query.to_string() })?;
                self.technologies
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.clone(), self.value(i, j)))
                    .collect()
            }
            Direction::TechToCompanies => {
                let i = self
                    .tech_index(query)
                    .ok_or_else(|| SimilarityError::UnknownQuery { id: query.to_string() })?;
                self.companies
                    .iter()
                    .enumerate()
                    .map(|(j, c)| (c.clone(), self.value(i, j)))
                    .collect()
            }
        };
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(NeighborList {
            query: query.to_string(),
            neighbors: scored,
        })
    }

    /// Export as CSV: empty corner cell, company ids as column header,
    /// technology ids leading each row, values at 9 significant digits.
    pub fn to_csv<W: Write>(&self, out: W) -> Result<(), SimilarityError> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.companies.iter().cloned());
        writer.write_record(&header)?;
        for (i, tech) in self.technologies.iter().enumerate() {
            let mut row = vec![tech.clone()];
            row.extend(self.tech_row(i).iter().map(|v| format_sig9(*v)));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(source: R) -> Result<Self, SimilarityError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(source);
        let mut records = reader.records();
        let header = records
            .next()
            .transpose()
            .map_err(|e| SimilarityError::Csv { line: 1, detail: e.to_string() })?
            .ok_or(SimilarityError::Csv {
                line: 1,
                detail: "empty file".to_string(),
            })?;
        let companies: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut technologies = Vec::new();
        let mut values = Vec::new();
        for (n, record) in records.enumerate() {
            let line = n + 2;
            let record = record.map_err(|e| SimilarityError::Csv { line, detail: e.to_string() })?;
            if record.len() != companies.len() + 1 {
                return Err(SimilarityError::Csv {
                    line,
                    detail: format!(
                        "expected {} fields, found {}",
                        companies.len() + 1,
                        record.len()
                    ),
                });
            }
            technologies.push(record.get(0).unwrap_or("").to_string());
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| SimilarityError::Csv {
                    line,
                    detail: format!("bad value {field:?}"),
                })?;
                values.push(v);
            }
        }
        Ok(SimilarityMatrix {
            technologies,
            companies,
            values,
        })
    }
}

/// Build the full cross-similarity matrix between resolved technologies and
/// aligned companies. Each entry goes through `cosine_similarity`, so the
/// matrix agrees bitwise with scalar recomputation.
pub fn cross_similarity(
    technologies: &[(String, Vec<f64>)],
    companies: &[(String, Vec<f64>)],
) -> Result<SimilarityMatrix, SimilarityError> {
    if technologies.is_empty() {
        return Err(SimilarityError::EmptySet { side: "technology" });
    }
    if companies.is_empty() {
        return Err(SimilarityError::EmptySet { side: "company" });
    }
    let mut values = Vec::with_capacity(technologies.len() * companies.len());
    for (tid, tvec) in technologies {
        for (cid, cvec) in companies {
            let sim = cosine_similarity(tvec, cvec).map_err(|e| match e {
                SimilarityError::ZeroVector { .. } => SimilarityError::ZeroVector {
                    id: if tvec.iter().all(|v| *v == 0.0) {
                        tid.clone()
                    } else {
                        cid.clone()
                    },
                },
                other => other,
            })?;
            values.push(sim);
        }
    }
    Ok(SimilarityMatrix {
        technologies: technologies.iter().map(|(id, _)| id.clone()).collect(),
        companies: companies.iter().map(|(id, _)| id.clone()).collect(),
        values,
    })
}

/// Mutual nearest neighbors between two id→vector sets: pairs `(a, b)` where
/// each is the other's top-1 by cosine, ties broken by ascending id.
pub fn mutual_nearest_neighbors(
    left: &[(String, Vec<f64>)],
    right: &[(String, Vec<f64>)],
) -> Result<Vec<(String, String)>, SimilarityError> {
    if left.is_empty() || right.is_empty() {
        return Ok(Vec::new());
    }
    let best = |from: &[(String, Vec<f64>)], to: &[(String, Vec<f64>)]| {
        from.iter()
            .map(|(_, v)| {
                let mut best_idx = 0usize;
                let mut best_sim = f64::NEG_INFINITY;
                for (j, (jid, w)) in to.iter().enumerate() {
                    let sim = cosine_similarity(v, w)?;
                    if sim > best_sim || (sim == best_sim && *jid < to[best_idx].0) {
                        best_sim = sim;
                        best_idx = j;
                    }
                }
                Ok(best_idx)
            })
            .collect::<Result<Vec<usize>, SimilarityError>>()
    };
    let left_best = best(left, right)?;
    let right_best = best(right, left)?;
    let mut pairs = Vec::new();
    for (i, &j) in left_best.iter().enumerate() {
        if right_best[j] == i {
            pairs.push((left[i].0.clone(), right[j].0.clone()));
        }
    }
    Ok(pairs)
}

/// Reusable index from entity id to vector.
pub fn vector_index(entries: &[(String, Vec<f64>)]) -> HashMap<&str, &[f64]> {
    entries
        .iter()
        .map(|(id, v)| (id.as_str(), v.as_slice()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_have_similarity_one() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_vectors_have_similarity_zero() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn forty_five_degrees_is_inverse_sqrt_two() {
        let sim = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((sim - 0.70710678).abs() < 1e-8);
    }

    #[test]
    fn zero_vector_and_dim_mismatch_error() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(SimilarityError::ZeroVector { .. })
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(SimilarityError::DimensionMismatch { .. })
        ));
    }

    fn entities(rows: &[(&str, Vec<f64>)]) -> Vec<(String, Vec<f64>)> {
        rows.iter().map(|(id, v)| (id.to_string(), v.clone())).collect()
    }

    #[test]
    fn single_pair_matrix_is_one() {
        let t = entities(&[("t", vec![0.6, 0.8])]);
        let c = entities(&[("c", vec![0.6, 0.8])]);
        let m = cross_similarity(&t, &c).unwrap();
        assert_eq!(m.value(0, 0), 1.0);
    }

    #[test]
    fn planar_angles_match_hand_trigonometry() {
        let deg = |d: f64| d.to_radians();
        let at = |a: f64| vec![a.cos(), a.sin()];
        let t = entities(&[("t0", at(deg(0.0))), ("t1", at(deg(90.0)))]);
        let c = entities(&[("c0", at(deg(30.0))), ("c1", at(deg(60.0)))]);
        let m = cross_similarity(&t, &c).unwrap();
        assert!((m.value(0, 0) - deg(30.0).cos()).abs() < 1e-12);
        assert!((m.value(0, 1) - deg(60.0).cos()).abs() < 1e-12);
        assert!((m.value(1, 0) - deg(60.0).cos()).abs() < 1e-12);
        assert!((m.value(1, 1) - deg(30.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn matrix_matches_scalar_recomputation_bitwise() {
        let t = entities(&[
            ("t0", vec![0.9, 0.1, 0.3]),
            ("t1", vec![-0.2, 0.8, 0.1]),
            ("t2", vec![0.4, -0.4, 0.6]),
        ]);
        let c = entities(&[("c0", vec![0.5, 0.5, 0.5]), ("c1", vec![-0.1, 0.2, 0.9])]);
        let m = cross_similarity(&t, &c).unwrap();
        for (i, (_, tv)) in t.iter().enumerate() {
            for (j, (_, cv)) in c.iter().enumerate() {
                assert_eq!(m.value(i, j), cosine_similarity(tv, cv).unwrap());
            }
        }
    }

    #[test]
    fn empty_side_is_an_error() {
        let t = entities(&[("t", vec![1.0, 0.0])]);
        assert!(matches!(
            cross_similarity(&t, &[]),
            Err(SimilarityError::EmptySet { side: "company" })
        ));
        assert!(matches!(
            cross_similarity(&[], &t),
            Err(SimilarityError::EmptySet { side: "technology" })
        ));
    }

    #[test]
    fn top_one_finds_identical_company() {
        let t = entities(&[("t", vec![1.0, 0.0])]);
        let c = entities(&[("far", vec![0.0, 1.0]), ("same", vec![1.0, 0.0])]);
        let m = cross_similarity(&t, &c).unwrap();
        let nn = m.top_k("t", Direction::TechToCompanies, 1).unwrap();
        assert_eq!(nn.neighbors, vec![("same".to_string(), 1.0)]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let t = entities(&[("t", vec![1.0, 0.0])]);
        let c = entities(&[
            ("zeta", vec![1.0, 0.0]),
            ("alpha", vec![1.0, 0.0]),
            ("mid", vec![0.0, 1.0]),
        ]);
        let m = cross_similarity(&t, &c).unwrap();
        let nn = m.top_k("t", Direction::TechToCompanies, 3).unwrap();
        let ids: Vec<&str> = nn.neighbors.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "zeta", "mid"]);
    }

    #[test]
    fn k_larger_than_axis_is_clipped() {
        let t = entities(&[("t", vec![1.0, 0.0])]);
        let c = entities(&[("c", vec![1.0, 0.0])]);
        let m = cross_similarity(&t, &c).unwrap();
        assert_eq!(m.top_k("t", Direction::TechToCompanies, 10).unwrap().neighbors.len(), 1);
        assert!(matches!(
            m.top_k("missing", Direction::TechToCompanies, 1),
            Err(SimilarityError::UnknownQuery { .. })
        ));
    }

    #[test]
    fn transposed_build_matches_entrywise() {
        let t = entities(&[("t0", vec![0.6, 0.8]), ("t1", vec![1.0, 0.0])]);
        let c = entities(&[("c0", vec![0.0, 1.0]), ("c1", vec![0.8, 0.6])]);
        let tc = cross_similarity(&t, &c).unwrap();
        let ct = cross_similarity(&c, &t).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((tc.value(i, j) - ct.value(j, i)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn csv_roundtrip_preserves_matrix() {
        let t = entities(&[("t0", vec![0.6, 0.8]), ("t1", vec![1.0, 0.0])]);
        let c = entities(&[("c, inc", vec![0.0, 1.0]), ("c1", vec![0.8, 0.6])]);
        let m = cross_similarity(&t, &c).unwrap();
        let mut buf = Vec::new();
        m.to_csv(&mut buf).unwrap();
        let back = SimilarityMatrix::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back.technologies(), m.technologies());
        assert_eq!(back.companies(), m.companies());
        for i in 0..2 {
            for j in 0..2 {
                assert!((back.value(i, j) - m.value(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mutual_nn_on_two_point_space_pairs_both() {
        let left = entities(&[("a0", vec![1.0, 0.0]), ("a1", vec![0.0, 1.0])]);
        let right = entities(&[("b0", vec![0.99, 0.14]), ("b1", vec![0.14, 0.99])]);
        let pairs = mutual_nearest_neighbors(&left, &right).unwrap();
        assert_eq!(
            pairs,
            vec![
                ("a0".to_string(), "b0".to_string()),
                ("a1".to_string(), "b1".to_string())
            ]
        );
    }
}
