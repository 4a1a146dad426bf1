//! Brute-force reference implementations for the property and acceptance
//! suites. These recompute everything from first principles on every step,
//! trading speed for obviousness.

/// One reference merge step.
#[derive(Debug, Clone, PartialEq)]
pub struct RefMerge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub id: usize,
}

/// Exhaustive average-linkage agglomeration over a point-index distance
/// function. At every step the mean cross-pair distance of every active
/// cluster pair is recomputed from the leaf members; the merged pair is the
/// minimum, ties resolved by smallest `(min id, max id)`.
pub fn average_linkage_reference(
    n: usize,
    dist: impl Fn(usize, usize) -> f64,
) -> Vec<RefMerge> {
    assert!(n >= 2);
    // cluster id -> leaf members; ids follow the stepwise convention.
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (ida, members_a) = &clusters[i];
                let (idb, members_b) = &clusters[j];
                let mut sum = 0.0;
                for &p in members_a {
                    for &q in members_b {
                        sum += dist(p, q);
                    }
                }
                let mean = sum / (members_a.len() * members_b.len()) as f64;
                let key = if ida < idb { (*ida, *idb) } else { (*idb, *ida) };
                let better = match &best {
                    None => true,
                    Some((bd, bk, _, _)) => mean < *bd || (mean == *bd && key < *bk),
                };
                if better {
                    best = Some((mean, key, i, j));
                }
            }
        }
        let (height, (a, b), i, j) = best.expect("two active clusters remain");
        let new_id = n + step;
        let mut members = clusters[i].1.clone();
        members.extend(clusters[j].1.iter().copied());
        // Remove the higher index first.
        clusters.remove(j);
        clusters.remove(i);
        clusters.push((new_id, members));
        merges.push(RefMerge {
            a,
            b,
            height,
            id: new_id,
        });
    }
    merges
}

/// Leading eigenpairs of a symmetric positive semi-definite matrix by power
/// iteration with Hotelling deflation. Independent of the Jacobi route used
/// in production.
pub fn power_iteration_eig(matrix: &[Vec<f64>], count: usize) -> Vec<(f64, Vec<f64>)> {
    let n = matrix.len();
    let mut work: Vec<Vec<f64>> = matrix.to_vec();
    let mut pairs = Vec::with_capacity(count);
    for comp in 0..count {
        // Deterministic start vector biased away from symmetry traps.
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i + comp) as f64 * 0.754877).sin() * 0.5)
            .collect();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let mut next = vec![0.0f64; n];
            for (i, row) in work.iter().enumerate() {
                next[i] = row.iter().zip(&v).map(|(m, x)| m * x).sum();
            }
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                // Null space reached; eigenvalue is zero.
                lambda = 0.0;
                break;
            }
            for x in next.iter_mut() {
                *x /= norm;
            }
            let new_lambda: f64 = (0..n)
                .map(|i| {
                    let row_dot: f64 = work[i].iter().zip(&next).map(|(m, x)| m * x).sum();
                    next[i] * row_dot
                })
                .sum();
            let converged = (new_lambda - lambda).abs() <= 1e-14 * new_lambda.abs().max(1.0);
            v = next;
            lambda = new_lambda;
            if converged {
                break;
            }
        }
        // Deflate: A ← A − λ v vᵀ
        for i in 0..n {
            for j in 0..n {
                work[i][j] -= lambda * v[i] * v[j];
            }
        }
        pairs.push((lambda.max(0.0), v));
    }
    pairs
}

/// Sample covariance matrix (1/(n−1)) of row vectors.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0f64; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0f64; d]; d];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    cov
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_merges_three_points_on_a_line() {
        // Points 0,1,9 on a line with |·| distance: first merge (0,1) at 1,
        // then ({0,1},9) at mean(9,8) = 8.5.
        let xs = [0.0f64, 1.0, 9.0];
        let merges = average_linkage_reference(3, |a, b| (xs[a] - xs[b]).abs());
        assert_eq!(merges[0].a, 0);
        assert_eq!(merges[0].b, 1);
        assert!((merges[0].height - 1.0).abs() < 1e-12);
        assert!((merges[1].height - 8.5).abs() < 1e-12);
        assert_eq!(merges[1].id, 4);
    }

    #[test]
    fn power_iteration_matches_2x2_closed_form() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let pairs = power_iteration_eig(&m, 2);
        assert!((pairs[0].0 - 3.0).abs() < 1e-10);
        assert!((pairs[1].0 - 1.0).abs() < 1e-10);
    }
}
