//! Store and registry properties, proptest-driven: format round trips,
//! normalization idempotence, and resolution conservation.

use std::collections::HashSet;

use etlinks_core::embedding::{
    parse_embeddings, serialize_embeddings, EmbeddingFormat, EmbeddingStore,
};
use etlinks_core::registry::{resolve_entities, Technology};
use proptest::prelude::*;

fn token_strategy() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_/().,-]{1,16}"
}

fn entries_strategy() -> impl Strategy<Value = (usize, Vec<(String, Vec<f64>)>)> {
    (1usize..6).prop_flat_map(|dim| {
        let entry = (
            token_strategy(),
            prop::collection::vec(-1.0e4f64..1.0e4, dim),
        );
        prop::collection::vec(entry, 1..12)
            .prop_map(move |mut entries| {
                // Keys must be unique for a valid store.
                let mut seen = HashSet::new();
                entries.retain(|(k, _)| seen.insert(k.clone()));
                (dim, entries)
            })
            .prop_filter("need at least one entry", |(_, e)| !e.is_empty())
    })
}

fn multiset(store: &EmbeddingStore) -> Vec<(String, Vec<f64>)> {
    let mut entries: Vec<(String, Vec<f64>)> = store
        .keys()
        .map(|k| (k.to_string(), store.get_vector(k).unwrap().to_vec()))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

proptest! {
    #[test]
    fn text_roundtrip_preserves_entry_multiset((dim, entries) in entries_strategy()) {
        let store = EmbeddingStore::from_entries(dim, entries).unwrap();
        let mut buf = Vec::new();
        serialize_embeddings(&store, &mut buf, EmbeddingFormat::Text).unwrap();
        let back = parse_embeddings(buf.as_slice(), EmbeddingFormat::Text).unwrap();
        prop_assert_eq!(multiset(&store), multiset(&back));
    }

    #[test]
    fn binary_roundtrip_is_stable_after_one_pass((dim, entries) in entries_strategy()) {
        // Binary narrows to f32 once; after that the round trip is exact.
        let store = EmbeddingStore::from_entries(dim, entries).unwrap();
        let mut buf = Vec::new();
        serialize_embeddings(&store, &mut buf, EmbeddingFormat::Binary).unwrap();
        let once = parse_embeddings(buf.as_slice(), EmbeddingFormat::Binary).unwrap();
        let mut buf2 = Vec::new();
        serialize_embeddings(&once, &mut buf2, EmbeddingFormat::Binary).unwrap();
        let twice = parse_embeddings(buf2.as_slice(), EmbeddingFormat::Binary).unwrap();
        prop_assert_eq!(multiset(&once), multiset(&twice));
    }

    #[test]
    fn normalization_is_idempotent((dim, entries) in entries_strategy()) {
        let nonzero: Vec<(String, Vec<f64>)> = entries
            .into_iter()
            .filter(|(_, v)| v.iter().map(|x| x * x).sum::<f64>() > 1e-12)
            .collect();
        prop_assume!(!nonzero.is_empty());
        let store = EmbeddingStore::from_entries(dim, nonzero).unwrap();
        let once = store.unit_normalize().unwrap();
        let twice = once.unit_normalize().unwrap();
        for key in once.keys() {
            let a = once.get_vector(key).unwrap();
            let b = twice.get_vector(key).unwrap();
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn resolution_conserves_and_ignores_order(present in prop::collection::vec(any::<bool>(), 1..20)) {
        let roster: Vec<Technology> = present
            .iter()
            .enumerate()
            .map(|(i, _)| Technology {
                tech_id: format!("t{i:03}"),
                name: format!("Tech {i}"),
                wiki_title: format!("Tech {i}"),
                theme: None,
            })
            .collect();
        let entries: Vec<(String, Vec<f64>)> = present
            .iter()
            .enumerate()
            .filter(|(_, p)| **p)
            .map(|(i, _)| (format!("ENTITY/Tech_{i}"), vec![1.0, 0.5]))
            .collect();
        let expected_hits = entries.len();
        let store = EmbeddingStore::from_entries(2, entries).unwrap();

        let set = resolve_entities(&roster, &store, "ENTITY/");
        prop_assert_eq!(set.resolved.len(), expected_hits);
        prop_assert_eq!(set.resolved.len() + set.unresolved.len(), roster.len());

        // Reversing the roster permutes the outcome identically.
        let reversed: Vec<Technology> = roster.iter().rev().cloned().collect();
        let set_rev = resolve_entities(&reversed, &store, "ENTITY/");
        let mut ids: Vec<&str> = set.resolved.iter().map(|r| r.entity.tech_id.as_str()).collect();
        let mut ids_rev: Vec<&str> =
            set_rev.resolved.iter().map(|r| r.entity.tech_id.as_str()).collect();
        ids.sort_unstable();
        ids_rev.sort_unstable();
        prop_assert_eq!(ids, ids_rev);
    }
}
