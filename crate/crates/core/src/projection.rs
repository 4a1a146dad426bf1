//! Deterministic 2D projection of the joint aligned space for map layout.
//!
//! Plain PCA: principal components of the mean-centered data, computed by a
//! cyclic Jacobi eigendecomposition of the sample covariance (1/(n−1)).
//! Sign convention: each component's largest-magnitude coordinate is
//! positive, so identical input bytes always yield identical layout bytes.

use thiserror::Error;

use crate::linalg::{jacobi_eigh, Matrix};
use crate::registry::EntityKind;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("at least 3 points are required, found {n}")]
    TooFewPoints { n: usize },
    #[error("dimension must be at least 2, found {d}")]
    DimensionTooSmall { d: usize },
    #[error("data has zero total variance")]
    ZeroVariance,
    #[error("vector dimension {found} does not match the fitted dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ragged input: vector {index} has dimension {found}, expected {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        found: usize,
    },
}

/// Fitted 2D principal-component projection.
#[derive(Debug, Clone)]
pub struct Projection2D {
    pub mean: Vec<f64>,
    /// Two orthonormal component rows of length d.
    pub components: [Vec<f64>; 2],
    /// Variance captured by each component, non-increasing.
    pub explained_variance: [f64; 2],
}

/// One placed entity.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutPoint {
    pub entity_id: String,
    pub kind: EntityKind,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extents {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

/// 2D coordinates for every projected entity plus the bounding box.
#[derive(Debug, Clone)]
pub struct MapLayout {
    pub points: Vec<LayoutPoint>,
    pub extents: Extents,
}

fn check_dims(vectors: &[Vec<f64>]) -> Result<usize, ProjectionError> {
    let d = vectors[0].len();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != d {
            return Err(ProjectionError::Ragged {
                index: i,
                expected: d,
                found: v.len(),
            });
        }
    }
    Ok(d)
}

/// Fit the two leading principal components of the vectors.
pub fn fit_pca(vectors: &[Vec<f64>]) -> Result<Projection2D, ProjectionError> {
    let n = vectors.len();
    if n < 3 {
        return Err(ProjectionError::TooFewPoints { n });
    }
    let d = check_dims(vectors)?;
    if d < 2 {
        return Err(ProjectionError::DimensionTooSmall { d });
    }

    let mut mean = vec![0.0f64; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // Sample covariance of the centered data.
    let mut cov = Matrix::zeros(d, d);
    for v in vectors {
        let centered: Vec<f64> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            if centered[i] == 0.0 {
                continue;
            }
            for j in i..d {
                let add = centered[i] * centered[j];
                cov.set(i, j, cov.get(i, j) + add);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let total_variance: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    if total_variance <= 0.0 {
        return Err(ProjectionError::ZeroVariance);
    }

    let (eigvals, eigvecs) = jacobi_eigh(&cov);
    let mut components: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
    let mut explained = [0.0f64; 2];
    for c in 0..2 {
        let mut row: Vec<f64> = (0..d).map(|i| eigvecs.get(i, c)).collect();
        // Sign convention: largest-magnitude coordinate positive, first
        // index winning magnitude ties.
        let lead = row
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .unwrap()
                    .then_with(|| ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        if row[lead] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        components[c] = row;
        // Clamp eigenvalue round-off below zero.
        explained[c] = eigvals[c].max(0.0);
    }

    Ok(Projection2D {
        mean,
        components,
        explained_variance: explained,
    })
}

/// Project entities into the fitted 2D frame: `point = components · (v − mean)`.
pub fn transform(
    projection: &Projection2D,
    entities: &[(String, EntityKind, Vec<f64>)],
) -> Result<MapLayout, ProjectionError> {
    let d = projection.mean.len();
    let mut points = Vec::with_capacity(entities.len());
    let mut extents = Extents {
        min_x: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        min_y: f64::INFINITY,
        max_y: f64::NEG_INFINITY,
    };
    for (id, kind, v) in entities {
        if v.len() != d {
            return Err(ProjectionError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let mut coords = [0.0f64; 2];
        for (c, comp) in projection.components.iter().enumerate() {
            coords[c] = v
                .iter()
                .zip(&projection.mean)
                .zip(comp)
                .map(|((x, m), w)| (x - m) * w)
                .sum();
        }
        extents.min_x = extents.min_x.min(coords[0]);
        extents.max_x = extents.max_x.max(coords[0]);
        extents.min_y = extents.min_y.min(coords[1]);
        extents.max_y = extents.max_y.max(coords[1]);
        points.push(LayoutPoint {
            entity_id: id.clone(),
            kind: *kind,
            x: coords[0],
            y: coords[1],
        });
    }
    if points.is_empty() {
        extents = Extents {
            min_x: 0.0,
            max_x: 0.0,
            min_y: 0.0,
            max_y: 0.0,
        };
    }
    Ok(MapLayout { points, extents })
}
