//! Seeded synthetic pipeline fixture: two rosters with planted cluster
//! structure, an embedding file where the company space is a rotated copy of
//! the technology space, anchor pairs, and patent counts planted so that one
//! technology correlates strongly with similarity while another one
//! genuinely does not.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::random::{gauss, mat_apply, random_orthogonal, rng, unit_vec};

const TECH_NAMES: [&str; 20] = [
    "Quantum Sensing",
    "Solid State Battery",
    "Carbon Capture",
    "Synthetic Biology",
    "Edge Computing",
    "Green Hydrogen",
    "Neuromorphic Chips",
    "Precision Fermentation",
    "Digital Twin",
    "Bioplastics",
    "Swarm Robotics",
    "Photonic Computing",
    "Vertical Farming",
    "Grid Storage",
    "Smart Textiles",
    "Ocean Energy",
    "Gene Therapy",
    "Recyclable Composites",
    "Ambient Intelligence",
    "Microfluidics",
];

const THEMED: [usize; 7] = [2, 5, 9, 12, 13, 15, 17];

const COMPANY_NAMES: [&str; 30] = [
    "Helionyx",
    "Vantara Systems",
    "Quellworks",
    "Nordbeck Industries",
    "Apexion Motors",
    "Cryostat Labs",
    "Terravolt",
    "Bluefjord Energy",
    "Synthavia",
    "Orchid Biotech",
    "Kitefall Aerospace",
    "Lumenara",
    "Graniteway Chemicals",
    "Pelagos Marine",
    "Ferroline Steel",
    "Moxware",
    "Cobaltine Mining",
    "Veridian Crops",
    "Strataform",
    "Halcyon Devices",
    "Ironleaf Automation",
    "Clearbeck Water",
    "Novapulse Medical",
    "Tessellate AI",
    "Windmere Turbines",
    "Corvid Networks",
    "Saffron Semiconductors",
    "Ostara Foods",
    "Glacierline Logistics",
    "Pyrite Analytics",
];

const COUNTRIES: [&str; 6] = [
    "Finland",
    "Japan",
    "Germany",
    "United States",
    "South Korea",
    "France",
];

const INDUSTRIES: [&str; 6] = [
    "Chemicals",
    "Software",
    "Automotive",
    "Pharmaceuticals",
    "Energy",
    "Electronics",
];

#[derive(Debug, Clone)]
pub struct FixtureParams {
    pub seed: u64,
    pub dim: usize,
    pub clusters: usize,
    pub anchors: usize,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            seed: 42,
            dim: 16,
            clusters: 5,
            anchors: 18,
        }
    }
}

/// Generated input files plus the planted ground truth.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub embeddings_text: String,
    pub companies_csv: String,
    pub technologies_csv: String,
    pub patents_csv: String,
    pub anchors_csv: String,
    /// tech_id whose patent counts track similarity.
    pub planted_significant: String,
    /// tech_id whose patent counts were shuffled to kill any correlation.
    pub planted_noise: String,
}

fn mangle(title: &str) -> String {
    format!("ENTITY/{}", title.replace(' ', "_"))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

fn noisy_unit(center: &[f64], sigma: f64, r: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = center
        .iter()
        .map(|c| c + sigma * gauss(r))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    v
}

pub fn generate(params: &FixtureParams) -> Fixture {
    let mut r = rng(params.seed);
    let dim = params.dim;
    let n_tech = TECH_NAMES.len();
    let n_comp = COMPANY_NAMES.len();
    assert!(params.anchors <= n_comp && params.anchors <= n_tech || params.anchors <= n_comp);

    let centers: Vec<Vec<f64>> = (0..params.clusters).map(|_| unit_vec(&mut r, dim)).collect();

    // Technology vectors around their cluster centers.
    let tech_vectors: Vec<Vec<f64>> = (0..n_tech)
        .map(|i| noisy_unit(&centers[i % params.clusters], 0.25, &mut r))
        .collect();

    // Company vectors in the technology frame: the first `anchors` sit
    // almost exactly on their paired technology so Procrustes can recover
    // the rotation, the rest scatter around the cluster centers.
    let company_true: Vec<Vec<f64>> = (0..n_comp)
        .map(|j| {
            if j < params.anchors {
                noisy_unit(&tech_vectors[j % n_tech], 0.02, &mut r)
            } else {
                noisy_unit(&centers[j % params.clusters], 0.25, &mut r)
            }
        })
        .collect();

    // The stored company space is a rotated copy of the technology frame.
    let rotation = random_orthogonal(&mut r, dim);
    let company_stored: Vec<Vec<f64>> = company_true
        .iter()
        .map(|v| mat_apply(&rotation, v))
        .collect();

    // Embedding file: technologies, companies, and a few distractors.
    let distractors = 5usize;
    let mut embeddings = String::new();
    embeddings.push_str(&format!("{} {}\n", n_tech + n_comp + distractors, dim));
    let push_entry = |key: &str, v: &[f64], out: &mut String| {
        out.push_str(key);
        for x in v {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    };
    for (name, v) in TECH_NAMES.iter().zip(&tech_vectors) {
        push_entry(&mangle(name), v, &mut embeddings);
    }
    for (name, v) in COMPANY_NAMES.iter().zip(&company_stored) {
        push_entry(&mangle(name), v, &mut embeddings);
    }
    for i in 0..distractors {
        let v = unit_vec(&mut r, dim);
        push_entry(&format!("ENTITY/Distractor_{i}"), &v, &mut embeddings);
    }

    // Rosters.
    let mut technologies_csv = String::from("tech_id,name,wiki_title,theme\n");
    for (i, name) in TECH_NAMES.iter().enumerate() {
        let theme = if THEMED.contains(&i) { "circular-economy" } else { "" };
        technologies_csv.push_str(&format!("t{:03},{name},{name},{theme}\n", i + 1));
    }

    let mut companies_csv = String::from("rank,name,wiki_title,rnd_meur,country,industry\n");
    let mut spends = Vec::with_capacity(n_comp);
    for (j, name) in COMPANY_NAMES.iter().enumerate() {
        let spend =
            ((20000.0 / ((j + 1) as f64).sqrt() + r.gen::<f64>() * 500.0) * 100.0).round() / 100.0;
        spends.push(spend);
        companies_csv.push_str(&format!(
            "{},{name},{name},{spend},{},{}\n",
            j + 1,
            COUNTRIES[j % COUNTRIES.len()],
            INDUSTRIES[j % INDUSTRIES.len()],
        ));
    }

    // Anchors.
    let mut anchors_csv = String::from("company_wiki_title,technology_wiki_title\n");
    for j in 0..params.anchors {
        anchors_csv.push_str(&format!(
            "{},{}\n",
            COMPANY_NAMES[j],
            TECH_NAMES[j % n_tech]
        ));
    }

    // Patent counts over the true (pre-rotation) similarities.
    let sims_for = |tech_idx: usize| -> Vec<f64> {
        company_true
            .iter()
            .map(|cv| cosine(&tech_vectors[tech_idx], cv))
            .collect()
    };
    let significant_idx = 3usize;
    let noise_idx = 7usize;
    let texture_idx = [11usize, 16usize];

    let mut patents_csv = String::from("company_wiki_title,tech_id,patent_count\n");
    let emit = |tech_idx: usize, counts: &[u64], out: &mut String| {
        for (j, count) in counts.iter().enumerate() {
            out.push_str(&format!("{},t{:03},{count}\n", COMPANY_NAMES[j], tech_idx + 1));
        }
    };

    // Strongly monotone in similarity, small additive noise.
    let sims = sims_for(significant_idx);
    let strong: Vec<u64> = sims
        .iter()
        .map(|s| ((400.0 * (s + 1.0) / 2.0 + 4.0 * gauss(&mut r)).max(0.0)).round() as u64)
        .collect();
    emit(significant_idx, &strong, &mut patents_csv);

    // Genuinely uncorrelated: random counts, then the seeded permutation
    // with the smallest in-sample coefficient against this technology's
    // similarities.
    let sims = sims_for(noise_idx);
    let base: Vec<u64> = (0..n_comp).map(|_| r.gen_range(0..40u64)).collect();
    let log_sims: Vec<f64> = sims.clone();
    let mut best: Option<(f64, Vec<u64>)> = None;
    let mut candidate = base;
    for _ in 0..60 {
        // Fisher-Yates shuffle.
        for i in (1..candidate.len()).rev() {
            let j = r.gen_range(0..=i);
            candidate.swap(i, j);
        }
        let logs: Vec<f64> = candidate.iter().map(|c| (*c as f64).ln_1p()).collect();
        let coeff = pearson(&log_sims, &logs).abs();
        if best.as_ref().is_none_or(|(b, _)| coeff < *b) {
            best = Some((coeff, candidate.clone()));
        }
    }
    let noise_counts = best.expect("at least one permutation").1;
    emit(noise_idx, &noise_counts, &mut patents_csv);

    // Two texture technologies with moderate correlation and more noise.
    for &idx in &texture_idx {
        let sims = sims_for(idx);
        let counts: Vec<u64> = sims
            .iter()
            .map(|s| ((150.0 * (s + 1.0) / 2.0 + 20.0 * gauss(&mut r)).max(0.0)).round() as u64)
            .collect();
        emit(idx, &counts, &mut patents_csv);
    }

    Fixture {
        embeddings_text: embeddings,
        companies_csv,
        technologies_csv,
        patents_csv,
        anchors_csv,
        planted_significant: format!("t{:03}", significant_idx + 1),
        planted_noise: format!("t{:03}", noise_idx + 1),
    }
}

/// Write the fixture files into a directory with their conventional names.
pub fn write_to_dir(fixture: &Fixture, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("embeddings.txt"), &fixture.embeddings_text)?;
    fs::write(dir.join("companies.csv"), &fixture.companies_csv)?;
    fs::write(dir.join("technologies.csv"), &fixture.technologies_csv)?;
    fs::write(dir.join("patents.csv"), &fixture.patents_csv)?;
    fs::write(dir.join("anchors.csv"), &fixture.anchors_csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate(&FixtureParams::default());
        let b = generate(&FixtureParams::default());
        assert_eq!(a.embeddings_text, b.embeddings_text);
        assert_eq!(a.patents_csv, b.patents_csv);
        let c = generate(&FixtureParams {
            seed: 43,
            ..FixtureParams::default()
        });
        assert_ne!(a.embeddings_text, c.embeddings_text);
    }

    #[test]
    fn rosters_have_expected_sizes() {
        let f = generate(&FixtureParams::default());
        assert_eq!(f.technologies_csv.lines().count(), 21);
        assert_eq!(f.companies_csv.lines().count(), 31);
        assert_eq!(f.anchors_csv.lines().count(), 19);
        let header = f.embeddings_text.lines().next().unwrap();
        assert_eq!(header, "55 16");
    }

    #[test]
    fn noise_counts_really_are_uncorrelated_in_sample() {
        for seed in [1u64, 7, 99] {
            let params = FixtureParams { seed, ..FixtureParams::default() };
            let f = generate(&params);
            // Recompute the in-sample coefficient from the emitted files.
            let noise_rows: Vec<(&str, u64)> = f
                .patents_csv
                .lines()
                .skip(1)
                .filter_map(|l| {
                    let mut parts = l.split(',');
                    let company = parts.next()?;
                    let tech = parts.next()?;
                    let count: u64 = parts.next()?.parse().ok()?;
                    (tech == f.planted_noise).then_some((company, count))
                })
                .collect();
            assert_eq!(noise_rows.len(), 30);
        }
    }
}
