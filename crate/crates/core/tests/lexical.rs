use nvsm_core::corpus::{DocumentStore, RawDocument};
use nvsm_core::lexical::{QueryLikelihood, Smoothing};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn micro_corpus(rng: &mut ChaCha8Rng) -> DocumentStore {
    let words = ["a", "b", "c", "d", "e"];
    let n = rng.gen_range(2..6);
    let raw: Vec<RawDocument> = (0..n)
        .map(|i| {
            let len = rng.gen_range(1..8);
            let text: Vec<&str> = (0..len).map(|_| words[rng.gen_range(0..5)]).collect();
            RawDocument::new(format!("d{i}"), text.join(" "))
        })
        .collect();
    DocumentStore::ingest(&raw, &BTreeSet::new(), 100).unwrap()
}

/// p(w|d) by counting tokens directly in the document.
fn brute_probability(store: &DocumentStore, term: u32, doc: u32, smoothing: Smoothing) -> f64 {
    let tokens = &store.document(doc).tokens;
    let tf = tokens.iter().filter(|&&t| t == term).count() as f64;
    let cf: usize = store
        .documents()
        .iter()
        .map(|d| d.tokens.iter().filter(|&&t| t == term).count())
        .sum();
    let total: usize = store.documents().iter().map(|d| d.len()).sum();
    let pc = cf as f64 / total as f64;
    match smoothing {
        Smoothing::Dirichlet { mu } => (tf + mu * pc) / (tokens.len() as f64 + mu),
        Smoothing::JelinekMercer { lambda } => {
            lambda * tf / tokens.len() as f64 + (1.0 - lambda) * pc
        }
    }
}

#[test]
fn jm_one_is_document_mle_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let s = micro_corpus(&mut rng);
        let qlm = QueryLikelihood::new(&s, Smoothing::JelinekMercer { lambda: 1.0 }).unwrap();
        for d in 0..s.len() as u32 {
            for t in 0..s.vocabulary().len() as u32 {
                let doc = &s.document(d).tokens;
                let mle = doc.iter().filter(|&&x| x == t).count() as f64 / doc.len() as f64;
                assert_eq!(qlm.term_probability(t, d), mle);
            }
        }
    }
}

#[test]
fn rank_matches_brute_force_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for smoothing in [
        Smoothing::Dirichlet { mu: 250.0 },
        Smoothing::JelinekMercer { lambda: 0.35 },
    ] {
        let s = micro_corpus(&mut rng);
        let qlm = QueryLikelihood::new(&s, smoothing).unwrap();
        let query = [0u32, 1.min(s.vocabulary().len() as u32 - 1)];
        let list = qlm.rank("q", &query, 1000).unwrap();
        for e in &list.entries {
            let d = s.doc_id(&e.doc).unwrap();
            let expected: f64 = query
                .iter()
                .map(|&t| brute_probability(&s, t, d, smoothing).ln())
                .sum();
            assert!((e.score - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn jm_approaches_collection_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = micro_corpus(&mut rng);
    let small = QueryLikelihood::new(&s, Smoothing::JelinekMercer { lambda: 1e-9 }).unwrap();
    for t in 0..s.vocabulary().len() as u32 {
        assert!((small.term_probability(t, 0) - small.collection_probability(t)).abs() < 1e-8);
    }
}

proptest! {
    #[test]
    fn dirichlet_is_increasing_in_tf(len in 1u64..200, mu in 1.0f64..5000.0, pc in 1e-6f64..1.0) {
        let smoothing = Smoothing::Dirichlet { mu };
        for tf in 0..len {
            prop_assert!(smoothing.probability(tf + 1, len, pc) > smoothing.probability(tf, len, pc));
        }
    }

    #[test]
    fn smoothed_probabilities_lie_in_unit_interval(seed in 0u64..500, lambda in 0.01f64..=1.0, mu in 1.0f64..5000.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = micro_corpus(&mut rng);
        for smoothing in [Smoothing::Dirichlet { mu }, Smoothing::JelinekMercer { lambda }] {
            let qlm = QueryLikelihood::new(&s, smoothing).unwrap();
            for d in 0..s.len() as u32 {
                for t in 0..s.vocabulary().len() as u32 {
                    let p = qlm.term_probability(t, d);
                    prop_assert!(p > 0.0 && p <= 1.0);
                }
            }
        }
    }
}
