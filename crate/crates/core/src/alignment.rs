//! Orthogonal map carrying the company vector space onto the technology
//! space.
//!
//! The map is the orthogonal Procrustes solution: for anchor matrices X
//! (companies) and Y (technologies) with corresponding rows, W minimizes
//! ‖XW − Y‖_F over the full orthogonal group and is obtained as W = U·Vᵀ
//! from the SVD of XᵀY. Reflections are permitted. Because W is orthogonal,
//! applying it preserves all pairwise cosines and Euclidean distances among
//! company vectors.

use std::collections::HashSet;
use std::io::Read;

use thiserror::Error;

use crate::linalg::{jacobi_svd, Matrix};
use crate::similarity::mutual_nearest_neighbors;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("anchor matrices disagree: X is {x_rows}×{x_cols}, Y is {y_rows}×{y_cols}")]
    ShapeMismatch {
        x_rows: usize,
        x_cols: usize,
        y_rows: usize,
        y_cols: usize,
    },
    #[error("at least one anchor pair is required")]
    NoAnchors,
    #[error("vector dimension {found} does not match the map dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no mutual nearest neighbors at refinement round {round}")]
    EmptyMutualNn { round: usize },
    #[error("anchors csv, line {line}: {detail}")]
    AnchorsCsv { line: u64, detail: String },
    #[error("duplicate anchor pair on line {line}")]
    DuplicateAnchor { line: u64 },
    #[error("zero vector encountered for {id:?}")]
    ZeroVector { id: String },
}

/// Source of an anchor correspondence set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorSource {
    UserSupplied,
    MutualNnRefined,
}

impl AnchorSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorSource::UserSupplied => "user_supplied",
            AnchorSource::MutualNnRefined => "mutual_nn_refined",
        }
    }
}

/// Company/technology anchor correspondences used to fit the map.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    pub pairs: Vec<(String, String)>,
    pub source: AnchorSource,
}

/// Fitted d×d orthogonal map plus fit diagnostics.
#[derive(Debug, Clone)]
pub struct OrthogonalMap {
    pub matrix: Matrix,
    /// Root-mean-square anchor error after alignment: ‖XW − Y‖_F / √n.
    pub residual: f64,
    pub anchor_count: usize,
    /// Numerical rank of XᵀY; below the dimension the solution is not
    /// unique and callers should surface a warning.
    pub rank: usize,
}

impl OrthogonalMap {
    pub fn identity(dim: usize) -> Self {
        OrthogonalMap {
            matrix: Matrix::identity(dim),
            residual: 0.0,
            anchor_count: 0,
            rank: dim,
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.rows()
    }

    /// ‖WᵀW − I‖_max; ≤ 1e-8 for every fitted map.
    pub fn orthogonality_error(&self) -> f64 {
        self.matrix.orthogonality_error()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.dimension()
    }
}

fn check_shapes(x: &Matrix, y: &Matrix) -> Result<(), AlignError> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(AlignError::ShapeMismatch {
            x_rows: x.rows(),
            x_cols: x.cols(),
            y_rows: y.rows(),
            y_cols: y.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(AlignError::NoAnchors);
    }
    Ok(())
}

/// Solve the orthogonal Procrustes problem for corresponding anchor rows.
pub fn fit_procrustes(x: &Matrix, y: &Matrix) -> Result<OrthogonalMap, AlignError> {
    check_shapes(x, y)?;
    let cross = x.transpose().matmul(y);
    let svd = jacobi_svd(&cross);
    let w = svd.u.matmul(&svd.v.transpose());
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let rank = svd
        .sigma
        .iter()
        .filter(|s| **s > sigma_max * 1e-10 && **s > 0.0)
        .count();
    let map = OrthogonalMap {
        residual: residual_for(x, y, &w),
        anchor_count: x.rows(),
        rank,
        matrix: w,
    };
    Ok(map)
}

fn residual_for(x: &Matrix, y: &Matrix, w: &Matrix) -> f64 {
    let mut sum = 0.0;
    for i in 0..x.rows() {
        let mapped = w.left_mul_vec(x.row(i));
        for (m, t) in mapped.iter().zip(y.row(i)) {
            let d = m - t;
            sum += d * d;
        }
    }
    (sum / x.rows() as f64).sqrt()
}

/// ‖XW − Y‖_F / √n for corresponding anchor rows under a given map.
pub fn alignment_residual(x: &Matrix, y: &Matrix, map: &OrthogonalMap) -> Result<f64, AlignError> {
    check_shapes(x, y)?;
    if x.cols() != map.dimension() {
        return Err(AlignError::DimensionMismatch {
            expected: map.dimension(),
            found: x.cols(),
        });
    }
    Ok(residual_for(x, y, &map.matrix))
}

/// Rotate every vector into the technology space: each row `x` becomes `xW`.
pub fn apply_alignment(
    vectors: &[(String, Vec<f64>)],
    map: &OrthogonalMap,
) -> Result<Vec<(String, Vec<f64>)>, AlignError> {
    let d = map.dimension();
    vectors
        .iter()
        .map(|(id, v)| {
            if v.len() != d {
                return Err(AlignError::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            Ok((id.clone(), map.matrix.left_mul_vec(v)))
        })
        .collect()
}

/// Per-round refinement diagnostics.
#[derive(Debug, Clone)]
pub struct RefinementRound {
    pub round: usize,
    pub anchor_count: usize,
    pub residual: f64,
}

/// Outcome of mutual-nearest-neighbor anchor refinement.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub map: OrthogonalMap,
    /// Anchor pairs from the final round; empty when `rounds` was 0.
    pub anchors: Vec<(String, String)>,
    pub rounds: Vec<RefinementRound>,
}

impl Refinement {
    pub fn anchor_set(&self) -> Option<AnchorSet> {
        if self.anchors.is_empty() {
            None
        } else {
            Some(AnchorSet {
                pairs: self.anchors.clone(),
                source: AnchorSource::MutualNnRefined,
            })
        }
    }
}

/// Iteratively refine the map: each round pairs mutual nearest neighbors
/// under the current map and refits Procrustes on them, stopping after
/// `rounds` rounds or as soon as the anchor set repeats.
///
/// `companies` holds the original (unaligned) company vectors; the current
/// map is applied internally when searching for neighbors.
pub fn refine_anchors(
    companies: &[(String, Vec<f64>)],
    technologies: &[(String, Vec<f64>)],
    seed_map: &OrthogonalMap,
    rounds: usize,
) -> Result<Refinement, AlignError> {
    let mut map = seed_map.clone();
    let mut anchors: Vec<(String, String)> = Vec::new();
    let mut stats = Vec::new();

    for round in 1..=rounds {
        let aligned = apply_alignment(companies, &map)?;
        let pairs = mutual_nearest_neighbors(&aligned, technologies)
            .map_err(map_similarity_error)?;
        if pairs.is_empty() {
            return Err(AlignError::EmptyMutualNn { round });
        }
        if pairs == anchors {
            break;
        }
        let (x, y) = anchor_matrices(companies, technologies, &pairs)?;
        map = fit_procrustes(&x, &y)?;
        stats.push(RefinementRound {
            round,
            anchor_count: pairs.len(),
            residual: map.residual,
        });
        anchors = pairs;
    }

    Ok(Refinement {
        map,
        anchors,
        rounds: stats,
    })
}

fn map_similarity_error(e: crate::similarity::SimilarityError) -> AlignError {
    match e {
        crate::similarity::SimilarityError::ZeroVector { id } => AlignError::ZeroVector { id },
        crate::similarity::SimilarityError::DimensionMismatch { left, right } => {
            AlignError::DimensionMismatch {
                expected: left,
                found: right,
            }
        }
        other => AlignError::ZeroVector {
            id: format!("unexpected: {other}"),
        },
    }
}

/// Build corresponding anchor matrices from id pairs, erroring on ids that
/// are not present in the supplied vector sets.
pub fn anchor_matrices(
    companies: &[(String, Vec<f64>)],
    technologies: &[(String, Vec<f64>)],
    pairs: &[(String, String)],
) -> Result<(Matrix, Matrix), AlignError> {
    if pairs.is_empty() {
        return Err(AlignError::NoAnchors);
    }
    let find = |set: &[(String, Vec<f64>)], id: &str| {
        set.iter()
            .find(|(sid, _)| sid == id)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| AlignError::ZeroVector {
                id: format!("anchor id {id:?} not found among resolved entities"),
            })
    };
    let mut x_rows = Vec::with_capacity(pairs.len());
    let mut y_rows = Vec::with_capacity(pairs.len());
    for (company_id, tech_id) in pairs {
        x_rows.push(find(companies, company_id)?);
        y_rows.push(find(technologies, tech_id)?);
    }
    Ok((Matrix::from_rows(&x_rows), Matrix::from_rows(&y_rows)))
}

/// Load a user-supplied anchors CSV (`company_wiki_title,technology_wiki_title`).
pub fn load_anchors<R: Read>(source: R) -> Result<AnchorSet, AlignError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| AlignError::AnchorsCsv { line: 1, detail: e.to_string() })?
        .clone();
    for col in ["company_wiki_title", "technology_wiki_title"] {
        if !headers.iter().any(|h| h == col) {
            return Err(AlignError::AnchorsCsv {
                line: 1,
                detail: format!("missing column {col:?}"),
            });
        }
    }
    let c_idx = headers.iter().position(|h| h == "company_wiki_title").unwrap();
    let t_idx = headers
        .iter()
        .position(|h| h == "technology_wiki_title")
        .unwrap();

    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| AlignError::AnchorsCsv {
            line: 0,
            detail: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let company = record.get(c_idx).unwrap_or("").to_string();
        let tech = record.get(t_idx).unwrap_or("").to_string();
        if company.is_empty() || tech.is_empty() {
            return Err(AlignError::AnchorsCsv {
                line,
                detail: "empty anchor field".to_string(),
            });
        }
        if !seen.insert((company.clone(), tech.clone())) {
            return Err(AlignError::DuplicateAnchor { line });
        }
        pairs.push((company, tech));
    }
    if pairs.is_empty() {
        return Err(AlignError::NoAnchors);
    }
    Ok(AnchorSet {
        pairs,
        source: AnchorSource::UserSupplied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rows(rows: &[Vec<f64>]) -> Matrix {
        let normed: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.iter().map(|v| v / n).collect()
            })
            .collect();
        Matrix::from_rows(&normed)
    }

    #[test]
    fn identical_anchors_give_identity() {
        let x = unit_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let map = fit_procrustes(&x, &x).unwrap();
        assert!(map.matrix.max_abs_diff(&Matrix::identity(2)) < 1e-10);
        assert!(map.residual < 1e-12);
        assert_eq!(map.anchor_count, 3);
    }

    #[test]
    fn planar_quarter_turn_is_recovered() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let map = fit_procrustes(&x, &y).unwrap();
        let expected = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(map.matrix.max_abs_diff(&expected) < 1e-12);
        assert!(map.residual < 1e-12);
        assert!((map.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_reflection_is_allowed() {
        let x = Matrix::from_rows(&[vec![1.0]]);
        let y = Matrix::from_rows(&[vec![-1.0]]);
        let map = fit_procrustes(&x, &y).unwrap();
        assert!(map.residual < 1e-12);
        assert!((map.determinant() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors_are_reported() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let y = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            fit_procrustes(&x, &y),
            Err(AlignError::ShapeMismatch { .. })
        ));
        let empty = Matrix::zeros(0, 2);
        assert!(matches!(
            fit_procrustes(&empty, &empty),
            Err(AlignError::NoAnchors)
        ));
    }

    #[test]
    fn apply_with_identity_is_noop() {
        let map = OrthogonalMap::identity(2);
        let vectors = vec![("a".to_string(), vec![0.3, -0.4])];
        let aligned = apply_alignment(&vectors, &map).unwrap();
        assert_eq!(aligned, vectors);
    }

    #[test]
    fn apply_planar_quarter_turn() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let map = fit_procrustes(&x, &y).unwrap();
        let aligned = apply_alignment(&[("e1".to_string(), vec![1.0, 0.0])], &map).unwrap();
        assert!((aligned[0].1[0] - 0.0).abs() < 1e-12);
        assert!((aligned[0].1[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_on_apply() {
        let map = OrthogonalMap::identity(3);
        let r = apply_alignment(&[("a".to_string(), vec![1.0, 0.0])], &map);
        assert!(matches!(r, Err(AlignError::DimensionMismatch { expected: 3, found: 2 })));
    }

    #[test]
    fn residual_zero_only_for_exact_alignment() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let map = fit_procrustes(&x, &y).unwrap();
        assert!(alignment_residual(&x, &y, &map).unwrap() < 1e-10);
        let y_off = Matrix::from_rows(&[vec![0.1, 1.0], vec![-1.0, 0.0]]);
        assert!(alignment_residual(&x, &y_off, &map).unwrap() > 1e-3);
    }

    #[test]
    fn rank_deficiency_is_flagged_but_map_stays_orthogonal() {
        // Two identical anchors in 3-d: rank 1.
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        let y = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let map = fit_procrustes(&x, &y).unwrap();
        assert!(map.is_rank_deficient());
        assert_eq!(map.rank, 1);
        assert!(map.orthogonality_error() < 1e-10);
        assert!(map.residual < 1e-10);
    }

    fn entities(rows: &[(&str, Vec<f64>)]) -> Vec<(String, Vec<f64>)> {
        rows.iter().map(|(id, v)| (id.to_string(), v.clone())).collect()
    }

    #[test]
    fn refinement_zero_rounds_returns_seed_map() {
        let comps = entities(&[("c", vec![1.0, 0.0])]);
        let techs = entities(&[("t", vec![1.0, 0.0])]);
        let seed = OrthogonalMap::identity(2);
        let refined = refine_anchors(&comps, &techs, &seed, 0).unwrap();
        assert!(refined.map.matrix.max_abs_diff(&seed.matrix) == 0.0);
        assert!(refined.anchors.is_empty());
        assert!(refined.anchor_set().is_none());
    }

    #[test]
    fn refinement_on_aligned_spaces_finds_true_pairing() {
        let comps = entities(&[("c0", vec![1.0, 0.0]), ("c1", vec![0.0, 1.0])]);
        let techs = entities(&[("t0", vec![0.995, 0.1]), ("t1", vec![0.1, 0.995])]);
        let seed = OrthogonalMap::identity(2);
        let refined = refine_anchors(&comps, &techs, &seed, 3).unwrap();
        assert_eq!(
            refined.anchors,
            vec![("c0".to_string(), "t0".to_string()), ("c1".to_string(), "t1".to_string())]
        );
        assert!(refined.map.orthogonality_error() < 1e-10);
        assert_eq!(refined.anchor_set().unwrap().source, AnchorSource::MutualNnRefined);
    }

    #[test]
    fn refinement_recovers_small_rotation_and_improves_monotonically() {
        // 8 degrees is well inside the angular gaps of the fixture, so the
        // identity-seeded mutual-NN pairing is already the true one.
        let th = 8f64.to_radians();
        let rot = |v: &[f64]| vec![v[0] * th.cos() - v[1] * th.sin(), v[0] * th.sin() + v[1] * th.cos()];
        let base = [
            vec![1.0, 0.0],
            vec![0.8, 0.6],
            vec![0.0, 1.0],
            vec![-0.6, 0.8],
        ];
        let techs: Vec<(String, Vec<f64>)> = base
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("t{i}"), v.clone()))
            .collect();
        let comps: Vec<(String, Vec<f64>)> = base
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("c{i}"), rot(v)))
            .collect();
        let refined = refine_anchors(&comps, &techs, &OrthogonalMap::identity(2), 5).unwrap();
        let expected: Vec<(String, String)> =
            (0..4).map(|i| (format!("c{i}"), format!("t{i}"))).collect();
        assert_eq!(refined.anchors, expected);
        assert!(refined.map.residual < 1e-10);
        for pair in refined.rounds.windows(2) {
            assert!(pair[1].residual <= pair[0].residual + 1e-12);
        }
    }

    #[test]
    fn anchors_csv_roundtrip_and_errors() {
        let csv = "company_wiki_title,technology_wiki_title\nNokia,5G\nNissan,Electric vehicle\n";
        let set = load_anchors(csv.as_bytes()).unwrap();
        assert_eq!(set.pairs.len(), 2);
        assert_eq!(set.source, AnchorSource::UserSupplied);

        let dup = "company_wiki_title,technology_wiki_title\nNokia,5G\nNokia,5G\n";
        assert!(matches!(
            load_anchors(dup.as_bytes()),
            Err(AlignError::DuplicateAnchor { line: 3 })
        ));
        assert!(matches!(
            load_anchors("company_wiki_title,technology_wiki_title\n".as_bytes()),
            Err(AlignError::NoAnchors)
        ));
        assert!(matches!(
            load_anchors("company,technology\na,b\n".as_bytes()),
            Err(AlignError::AnchorsCsv { .. })
        ));
    }
}
