//! Projection properties: agreement with an independent eigensolver,
//! rigid-motion covariance, and byte-level determinism.

use etlinks_core::projection::{fit_pca, transform};
use etlinks_core::registry::EntityKind;
use etlinks_testkit::oracle::{covariance, power_iteration_eig};
use etlinks_testkit::random::{gauss_vec, mat_apply, random_orthogonal, rng};

fn random_cloud(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let stretch: Vec<f64> = (0..d).map(|i| 1.0 + 2.0 * i as f64).collect();
    (0..n)
        .map(|_| {
            gauss_vec(&mut r, d)
                .into_iter()
                .zip(&stretch)
                .map(|(x, s)| x * s)
                .collect()
        })
        .collect()
}

#[test]
fn components_match_power_iteration_oracle() {
    for (seed, d) in [(11u64, 2usize), (12, 5), (13, 5)] {
        let data = random_cloud(seed, 60, d);
        let fitted = fit_pca(&data).unwrap();
        let reference = power_iteration_eig(&covariance(&data), 2);
        for (c, (eig, vec)) in reference.iter().enumerate() {
            assert!(
                (fitted.explained_variance[c] - eig).abs() <= 1e-8 * eig.max(1.0),
                "eigenvalue {c}: {} vs {eig}",
                fitted.explained_variance[c]
            );
            // Eigenvectors match up to sign.
            let dot: f64 = fitted.components[c].iter().zip(vec).map(|(a, b)| a * b).sum();
            assert!(
                (dot.abs() - 1.0).abs() <= 1e-8,
                "component {c} misaligned: |dot| = {}",
                dot.abs()
            );
        }
        assert!(fitted.explained_variance[0] >= fitted.explained_variance[1]);
    }
}

#[test]
fn rigid_motion_preserves_pairwise_layout_distances() {
    let mut r = rng(21);
    let d = 5;
    let data = random_cloud(31, 40, d);
    let q = random_orthogonal(&mut r, d);
    let rotated: Vec<Vec<f64>> = data.iter().map(|v| mat_apply(&q, v)).collect();

    let layout = |cloud: &[Vec<f64>]| {
        let p = fit_pca(cloud).unwrap();
        let entities: Vec<(String, EntityKind, Vec<f64>)> = cloud
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("e{i}"), EntityKind::Company, v.clone()))
            .collect();
        transform(&p, &entities).unwrap()
    };
    let base = layout(&data);
    let moved = layout(&rotated);
    for i in 0..base.points.len() {
        for j in i + 1..base.points.len() {
            let d1 = ((base.points[i].x - base.points[j].x).powi(2)
                + (base.points[i].y - base.points[j].y).powi(2))
            .sqrt();
            let d2 = ((moved.points[i].x - moved.points[j].x).powi(2)
                + (moved.points[i].y - moved.points[j].y).powi(2))
            .sqrt();
            assert!(
                (d1 - d2).abs() <= 1e-8,
                "pair ({i},{j}): {d1} vs {d2}"
            );
        }
    }
}

#[test]
fn identical_inputs_give_identical_layout_bytes() {
    let data = random_cloud(77, 25, 4);
    let render = |cloud: &[Vec<f64>]| {
        let p = fit_pca(cloud).unwrap();
        let entities: Vec<(String, EntityKind, Vec<f64>)> = cloud
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("e{i}"), EntityKind::Technology, v.clone()))
            .collect();
        let layout = transform(&p, &entities).unwrap();
        layout
            .points
            .iter()
            .map(|pt| format!("{},{},{}\n", pt.entity_id, pt.x, pt.y))
            .collect::<String>()
    };
    assert_eq!(render(&data), render(&data));
}
