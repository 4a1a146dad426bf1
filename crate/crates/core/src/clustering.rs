//! Agglomerative hierarchical clustering of the joint technology + aligned
//! company vector set, plus cluster profiling.
//!
//! Linkage is average, distance is cosine (1 − cosine similarity). Merges
//! are chosen as the globally closest active pair; equal-distance candidates
//! are resolved by the lexicographically smallest `(min id, max id)` pair,
//! which makes the merge sequence fully deterministic. Cluster ids follow
//! the usual stepwise convention: leaves are `0..n`, merge `i` creates id
//! `n + i`.
//!
//! Internally the merge loop maintains the Lance-Williams distance matrix
//! together with a per-cluster nearest-neighbor cache. The cache always
//! holds each cluster's true closest partner under the tie-break order, so
//! the selected sequence is identical to a full scan of all active pairs at
//! every step, just cheaper.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::registry::EntityKind;
use crate::similarity::cosine_similarity;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("at least 2 vectors are required, found {n}")]
    TooFew { n: usize },
    #[error("cluster count {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("zero vector for {id:?}")]
    ZeroVector { id: String },
    #[error("dimension mismatch between vectors {left} and {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// One agglomeration step: clusters `a` and `b` merge at `height` into a
/// new cluster `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub id: usize,
}

/// Stepwise dendrogram: exactly `leaves − 1` merges with non-decreasing
/// heights (average linkage produces no inversions).
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

/// Cosine distance between two joint-set members.
fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, ClusterError> {
    match cosine_similarity(u, v) {
        Ok(sim) => Ok(1.0 - sim),
        Err(crate::similarity::SimilarityError::DimensionMismatch { left, right }) => {
            Err(ClusterError::DimensionMismatch { left, right })
        }
        Err(_) => Err(ClusterError::ZeroVector { id: String::new() }),
    }
}

/// Candidate pair normalized for the deterministic tie-break: compare by
/// distance, then by `(min id, max id)`.
#[inline]
fn pair_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[inline]
fn candidate_less(d1: f64, p1: (usize, usize), d2: f64, p2: (usize, usize)) -> bool {
    d1 < d2 || (d1 == d2 && p1 < p2)
}

/// Average-linkage agglomeration of the given vectors under cosine distance.
pub fn agglomerate(vectors: &[Vec<f64>]) -> Result<Dendrogram, ClusterError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ClusterError::TooFew { n });
    }
    let total = 2 * n - 1;

    // dist[i][j] for active cluster slots; slots 0..n are leaves, merged
    // clusters reuse ids n..2n-1. Stored as a flat lower triangle over all
    // possible ids to keep indexing simple at this scale.
    let idx = |a: usize, b: usize| -> usize {
        let (lo, hi) = pair_key(a, b);
        hi * (hi - 1) / 2 + lo
    };
    let mut dist = vec![0.0f64; total * (total - 1) / 2];
    for i in 0..n {
        for j in i + 1..n {
            dist[idx(i, j)] = cosine_distance(&vectors[i], &vectors[j])?;
        }
    }

    let mut active: Vec<usize> = (0..n).collect();
    let mut size = vec![0usize; total];
    for s in size.iter_mut().take(n) {
        *s = 1;
    }

    // Per-cluster nearest neighbor cache: partner id and distance.
    let mut nn: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for &i in &active {
        nn.insert(i, rescan_with_new(i, &active, usize::MAX, &dist, idx));
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        // Global minimum over the per-cluster minima.
        let mut best: Option<(f64, (usize, usize))> = None;
        for (&i, &(partner, d)) in &nn {
            let key = pair_key(i, partner);
            match best {
                Some((bd, bp)) if !candidate_less(d, key, bd, bp) => {}
                _ => best = Some((d, key)),
            }
        }
        let (height, (a, b)) = best.expect("at least two active clusters");
        let new_id = n + step;

        // Lance-Williams average-linkage update against every survivor.
        active.retain(|&x| x != a && x != b);
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for &k in &active {
            let d_new = (sa * dist[idx(a, k)] + sb * dist[idx(b, k)]) / (sa + sb);
            dist[idx(new_id, k)] = d_new;
        }
        size[new_id] = size[a] + size[b];
        nn.remove(&a);
        nn.remove(&b);

        // Survivors whose cached partner vanished rescan; the rest only
        // need to consider the new cluster as a candidate.
        for &k in &active {
            let entry = nn.get_mut(&k).expect("active cluster has a cache entry");
            if entry.0 == a || entry.0 == b {
                *entry = rescan_with_new(k, &active, new_id, &dist, idx);
            } else {
                let d_new = dist[idx(k, new_id)];
                if candidate_less(d_new, pair_key(k, new_id), entry.1, pair_key(k, entry.0)) {
                    *entry = (new_id, d_new);
                }
            }
        }
        if !active.is_empty() {
            let new_entry = rescan_with_new(new_id, &active, usize::MAX, &dist, idx);
            nn.insert(new_id, new_entry);
        }
        active.push(new_id);

        merges.push(Merge {
            a,
            b,
            height,
            id: new_id,
        });
    }

    Ok(Dendrogram { leaves: n, merges })
}

fn rescan_with_new(
    target: usize,
    active: &[usize],
    extra: usize,
    dist: &[f64],
    idx: impl Fn(usize, usize) -> usize,
) -> (usize, f64) {
    let mut best_partner = usize::MAX;
    let mut best_dist = f64::INFINITY;
    let mut consider = |other: usize| {
        if other == target || other == usize::MAX {
            return;
        }
        let d = dist[idx(target, other)];
        if best_partner == usize::MAX
            || d < best_dist
            || (d == best_dist && pair_key(target, other) < pair_key(target, best_partner))
        {
            best_partner = other;
            best_dist = d;
        }
    };
    for &other in active {
        consider(other);
    }
    consider(extra);
    (best_partner, best_dist)
}

/// Cut the dendrogram into `k` clusters by undoing the last `k − 1` merges.
/// Returns one cluster index per leaf; indices are assigned by ascending
/// smallest member.
pub fn cut(dendrogram: &Dendrogram, k: usize) -> Result<Vec<usize>, ClusterError> {
    let n = dendrogram.leaves;
    if k < 1 || k > n {
        return Err(ClusterError::KOutOfRange { k, n });
    }
    // Union-find over the first n - k merges.
    let total = 2 * n - 1;
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for merge in dendrogram.merges.iter().take(n - k) {
        let ra = find(&mut parent, merge.a);
        let rb = find(&mut parent, merge.b);
        parent[ra] = merge.id;
        parent[rb] = merge.id;
    }

    // Group leaves by root, then order groups by smallest leaf.
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        groups.entry(root).or_default().push(leaf);
    }
    let mut ordered: Vec<&Vec<usize>> = groups.values().collect();
    ordered.sort_by_key(|members| members[0]);

    let mut labels = vec![0usize; n];
    for (cluster, members) in ordered.iter().enumerate() {
        for &leaf in members.iter() {
            labels[leaf] = cluster;
        }
    }
    Ok(labels)
}

/// A joint-set member carrying what profiling needs.
#[derive(Debug, Clone)]
pub struct ClusterMember {
    pub entity_id: String,
    pub kind: EntityKind,
    pub name: String,
    pub rnd_meur: Option<f64>,
    pub vector: Vec<f64>,
}

/// Aggregate statistics for one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub members: usize,
    pub technologies: usize,
    pub companies: usize,
    pub rnd_meur_total: f64,
    /// Names of the up-to-3 members nearest the cluster centroid, a
    /// deterministic stand-in for model-suggested labels.
    pub label_candidates: Vec<String>,
}

/// Cluster labels plus per-cluster profiles for the joint entity set.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub k: usize,
    /// entity id → cluster index, covering every member exactly once.
    pub labels: BTreeMap<String, usize>,
    pub profiles: Vec<ClusterProfile>,
}

/// Label the members with `cut(dendrogram, k)` and fill per-cluster profiles.
/// `members` must be in the same order as the vectors given to `agglomerate`.
pub fn assign_clusters(
    dendrogram: &Dendrogram,
    k: usize,
    members: &[ClusterMember],
) -> Result<ClusterAssignment, ClusterError> {
    let leaf_labels = cut(dendrogram, k)?;
    assert_eq!(members.len(), dendrogram.leaves, "member/leaf count mismatch");
    let labels: BTreeMap<String, usize> = members
        .iter()
        .zip(&leaf_labels)
        .map(|(m, &c)| (m.entity_id.clone(), c))
        .collect();
    let profiles = profile_clusters(&leaf_labels, k, members);
    Ok(ClusterAssignment { k, labels, profiles })
}

/// Per-cluster member counts, split by kind, total R&D spend, and centroid
/// label candidates.
pub fn profile_clusters(
    leaf_labels: &[usize],
    k: usize,
    members: &[ClusterMember],
) -> Vec<ClusterProfile> {
    let mut profiles = Vec::with_capacity(k);
    for cluster in 0..k {
        let ids: Vec<usize> = leaf_labels
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect();
        let mut technologies = 0;
        let mut companies = 0;
        let mut spend = 0.0;
        for &i in &ids {
            match members[i].kind {
                EntityKind::Technology => technologies += 1,
                EntityKind::Company => companies += 1,
            }
            spend += members[i].rnd_meur.unwrap_or(0.0);
        }
        profiles.push(ClusterProfile {
            cluster,
            members: ids.len(),
            technologies,
            companies,
            rnd_meur_total: spend,
            label_candidates: centroid_labels(&ids, members),
        });
    }
    profiles
}

fn centroid_labels(ids: &[usize], members: &[ClusterMember]) -> Vec<String> {
    if ids.is_empty() {
        return Vec::new();
    }
    let dim = members[ids[0]].vector.len();
    let mut centroid = vec![0.0f64; dim];
    for &i in ids {
        for (c, v) in centroid.iter_mut().zip(&members[i].vector) {
            *c += v;
        }
    }
    let norm = centroid.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut ranked: Vec<(f64, &str, &str)> = if norm < 1e-12 {
        // Degenerate centroid: fall back to id order.
        ids.iter()
            .map(|&i| (0.0, members[i].entity_id.as_str(), members[i].name.as_str()))
            .collect()
    } else {
        ids.iter()
            .map(|&i| {
                let d = cosine_similarity(&centroid, &members[i].vector)
                    .map(|s| 1.0 - s)
                    .unwrap_or(f64::INFINITY);
                (d, members[i].entity_id.as_str(), members[i].name.as_str())
            })
            .collect()
    };
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)));
    ranked.iter().take(3).map(|(_, _, name)| name.to_string()).collect()
}
