//! Topic-clustered toy corpora with known relevance.

use nvsm_core::corpus::RawDocument;
use nvsm_core::eval::Qrels;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a generated collection.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub documents: usize,
    /// Words owned by each topic; no two topics share one.
    pub topic_vocabulary: usize,
    /// Words every topic draws from.
    pub background_vocabulary: usize,
    pub document_length: usize,
    /// Chance that a token comes from the document's topic rather than the background.
    pub topic_probability: f64,
    pub queries_per_topic: usize,
    pub query_length: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            topics: 4,
            documents: 200,
            topic_vocabulary: 30,
            background_vocabulary: 60,
            document_length: 60,
            topic_probability: 0.5,
            queries_per_topic: 5,
            query_length: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<RawDocument>,
    /// Topic index of each document.
    pub membership: Vec<usize>,
    pub topics: Vec<(String, String)>,
    /// Every document of a query's topic is relevant with grade 1.
    pub qrels: Qrels,
}

pub fn topic_word(topic: usize, k: usize) -> String {
    format!("t{topic}w{k}")
}

pub fn background_word(k: usize) -> String {
    format!("bg{k}")
}

/// Documents are assigned to topics round-robin; each token is a uniform
/// draw from the topic's words with probability `topic_probability`, and
/// from the background otherwise. Queries are distinct topic words.
pub fn generate(config: &SyntheticConfig, seed: u64) -> SyntheticCorpus {
    assert!(
        config.topics > 0 && config.documents > 0 && config.topic_vocabulary >= config.query_length
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::with_capacity(config.documents);
    let mut membership = Vec::with_capacity(config.documents);
    for i in 0..config.documents {
        let topic = i % config.topics;
        let words: Vec<String> = (0..config.document_length)
            .map(|_| {
                if config.background_vocabulary == 0 || rng.gen_bool(config.topic_probability) {
                    topic_word(topic, rng.gen_range(0..config.topic_vocabulary))
                } else {
                    background_word(rng.gen_range(0..config.background_vocabulary))
                }
            })
            .collect();
        documents.push(RawDocument::new(format!("doc{i:04}"), words.join(" ")));
        membership.push(topic);
    }
    let mut topics = Vec::new();
    let mut qrels = Qrels::new();
    for topic in 0..config.topics {
        for j in 0..config.queries_per_topic {
            let qid = format!("t{topic}q{j}");
            let words: Vec<String> = sample(&mut rng, config.topic_vocabulary, config.query_length)
                .into_iter()
                .map(|k| topic_word(topic, k))
                .collect();
            topics.push((qid.clone(), words.join(" ")));
            for (d, &m) in membership.iter().enumerate() {
                if m == topic {
                    qrels.insert(qid.as_str(), documents[d].name.as_str(), 1);
                }
            }
        }
    }
    SyntheticCorpus {
        documents,
        membership,
        topics,
        qrels,
    }
}
