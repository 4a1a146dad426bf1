//! Similarity properties: top-k equals a naive full sort for every k on
//! random matrices (ties included), and all entries stay in range.

use etlinks_core::similarity::{cross_similarity, Direction};
use etlinks_testkit::random::{rng, unit_vec};
use rand::Rng;

type IdVectors = Vec<(String, Vec<f64>)>;

fn random_sets(
    r: &mut impl Rng,
    n_tech: usize,
    n_comp: usize,
    d: usize,
    quantize: bool,
) -> (IdVectors, IdVectors) {
    // Quantized angles force plenty of exact similarity ties.
    let mut techs = Vec::with_capacity(n_tech);
    let mut comps = Vec::with_capacity(n_comp);
    for slot in 0..n_tech + n_comp {
        let v = if quantize {
            let a = (r.gen_range(0..8) as f64 * 45.0).to_radians();
            vec![a.cos(), a.sin()]
        } else {
            unit_vec(r, d)
        };
        if slot < n_tech {
            techs.push((format!("t{slot:03}"), v));
        } else {
            comps.push((format!("c{:03}", slot - n_tech), v));
        }
    }
    (techs, comps)
}

#[test]
fn top_k_equals_naive_full_sort_for_every_k() {
    let mut r = rng(8080);
    for trial in 0..50 {
        let n_tech = 1 + r.gen_range(0..12);
        let n_comp = 1 + r.gen_range(0..12);
        let quantize = trial % 3 == 0;
        let (techs, comps) = random_sets(&mut r, n_tech, n_comp, 6, quantize);
        let matrix = cross_similarity(&techs, &comps).unwrap();

        for (i, (tid, _)) in techs.iter().enumerate() {
            // Naive oracle: full decorate-sort over the row.
            let mut naive: Vec<(String, f64)> = comps
                .iter()
                .enumerate()
                .map(|(j, (cid, _))| (cid.clone(), matrix.value(i, j)))
                .collect();
            naive.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            for k in 1..=n_comp {
                let got = matrix.top_k(tid, Direction::TechToCompanies, k).unwrap();
                assert_eq!(got.neighbors, naive[..k], "trial {trial}, tech {tid}, k {k}");
            }
        }
        for (j, (cid, _)) in comps.iter().enumerate() {
            let mut naive: Vec<(String, f64)> = techs
                .iter()
                .enumerate()
                .map(|(i, (tid, _))| (tid.clone(), matrix.value(i, j)))
                .collect();
            naive.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            for k in 1..=n_tech {
                let got = matrix.top_k(cid, Direction::CompanyToTechs, k).unwrap();
                assert_eq!(got.neighbors, naive[..k], "trial {trial}, company {cid}, k {k}");
            }
        }
    }
}

#[test]
fn all_entries_stay_in_the_unit_interval() {
    let mut r = rng(999);
    let (techs, comps) = random_sets(&mut r, 40, 40, 12, false);
    let matrix = cross_similarity(&techs, &comps).unwrap();
    for i in 0..40 {
        for j in 0..40 {
            let v = matrix.value(i, j);
            assert!((-1.0..=1.0).contains(&v), "out of range: {v}");
        }
    }
}
