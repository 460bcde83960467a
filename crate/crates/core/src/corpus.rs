// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Documents, keyword extraction, dataset splitting and inverted indexes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Zipf};

use crate::bitset::DocSet;
use crate::error::{Error, Result};
use crate::rng;

pub type DocId = u32;

/// A document as read from disk, before keyword extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: DocId,
    pub tokens: Vec<String>,
}

/// A document reduced to the keyword universe. `keyword_ids` is sorted and
/// never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Document {
    pub doc_id: DocId,
    pub keyword_ids: Vec<u32>,
}

impl Document {
    pub fn new(doc_id: DocId, mut keyword_ids: Vec<u32>) -> Self {
        keyword_ids.sort_unstable();
        keyword_ids.dedup();
        Self { doc_id, keyword_ids }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordUniverse {
    keywords: Vec<String>,
    lookup: BTreeMap<String, u32>,
}

impl KeywordUniverse {
    pub fn new(keywords: Vec<String>) -> Result<Self> {
        let mut lookup = BTreeMap::new();
        for (i, k) in keywords.iter().enumerate() {
            if lookup.insert(k.clone(), i as u32).is_some() {
                return Err(Error::param("keywords", alloc::format!("duplicate keyword `{k}`")));
            }
        }
        Ok(Self { keywords, lookup })
    }

    /// A universe of placeholder names `kw0, kw1, ...` for instances that are
    /// built directly in index space.
    pub fn anonymous(n: usize) -> Self {
        Self::new((0..n).map(|i| alloc::format!("kw{i}")).collect()).expect("names are distinct")
    }

    pub fn n(&self) -> usize {
        self.keywords.len()
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn keyword(&self, i: u32) -> &str {
        &self.keywords[i as usize]
    }

    pub fn index_of(&self, keyword: &str) -> Option<u32> {
        self.lookup.get(keyword).copied()
    }
}

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "also", "and", "any", "are", "because",
    "been", "before", "being", "below", "between", "both", "but", "can", "could", "did", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "her", "here", "hers", "herself", "him", "himself", "his", "how", "into", "its",
    "itself", "just", "more", "most", "myself", "nor", "not", "now", "off", "once", "only",
    "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should", "some",
    "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "too", "under", "until", "very", "was", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "yourself", "yourselves",
];

/// Lowercase, trim non-alphabetic characters from both ends, and reject
/// tokens shorter than three characters or on the stopword list.
pub fn normalize_token(token: &str) -> Option<String> {
    let trimmed = token.trim_matches(|c: char| !c.is_alphabetic());
    let lower = trimmed.to_lowercase();
    if lower.chars().count() < 3 || STOPWORDS.binary_search(&lower.as_str()).is_ok() {
        return None;
    }
    Some(lower)
}

/// Keyword extraction: the universe is the `n` keywords with the highest
/// document frequency (ties broken lexicographically); each document keeps
/// only universe keywords and documents left without any are dropped.
pub fn extract_universe(
    raw: &[RawDocument],
    n: usize,
) -> Result<(Vec<Document>, KeywordUniverse)> {
    if raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut seen_ids = BTreeSet::new();
    let mut normalized: Vec<(DocId, BTreeSet<String>)> = Vec::with_capacity(raw.len());
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in raw {
        if !seen_ids.insert(doc.doc_id) {
            return Err(Error::DuplicateDocId(doc.doc_id));
        }
        let words: BTreeSet<String> = doc.tokens.iter().filter_map(|t| normalize_token(t)).collect();
        for w in &words {
            *df.entry(w.clone()).or_default() += 1;
        }
        normalized.push((doc.doc_id, words));
    }
    if df.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if df.len() < n {
        return Err(Error::TooFewKeywords { requested: n, available: df.len() });
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    // BTreeMap iteration is already lexicographic, so a stable sort on
    // descending frequency keeps the lexicographic tie-break.
    ranked.sort_by_key(|e| core::cmp::Reverse(e.1));
    ranked.truncate(n);
    let universe = KeywordUniverse::new(ranked.into_iter().map(|(w, _)| w).collect())?;

    let docs: Vec<Document> = normalized
        .into_iter()
        .filter_map(|(id, words)| {
            let ids: Vec<u32> = words.iter().filter_map(|w| universe.index_of(w)).collect();
            (!ids.is_empty()).then(|| Document::new(id, ids))
        })
        .collect();
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok((docs, universe))
}

/// Shuffle under `seed` and cut into two halves; the first half (the client
/// half) receives the extra document when the count is odd. Each half is
/// returned sorted by `doc_id`.
pub fn split_dataset(docs: &[Document], seed: u64) -> Result<(Vec<Document>, Vec<Document>)> {
    if docs.len() < 2 {
        return Err(Error::TooFewDocuments(docs.len()));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let cut = docs.len().div_ceil(2);
    let take = |idx: &[usize]| {
        let mut half: Vec<Document> = idx.iter().map(|&i| docs[i].clone()).collect();
        half.sort_by_key(|d| d.doc_id);
        half
    };
    Ok((take(&order[..cut]), take(&order[cut..])))
}

/// Keyword → document postings over one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedIndex {
    doc_ids: Vec<DocId>,
    postings: Vec<Vec<DocId>>,
}

impl InvertedIndex {
    /// Assemble an index from raw parts. `doc_ids` must be the full document
    /// list; postings are sorted and deduplicated here.
    pub fn from_parts(mut doc_ids: Vec<DocId>, mut postings: Vec<Vec<DocId>>) -> Result<Self> {
        doc_ids.sort_unstable();
        if doc_ids.windows(2).any(|w| w[0] == w[1]) {
            let dup = doc_ids.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]).unwrap_or(0);
            return Err(Error::DuplicateDocId(dup));
        }
        for p in &mut postings {
            p.sort_unstable();
            p.dedup();
            if let Some(&bad) = p.iter().find(|id| doc_ids.binary_search(id).is_err()) {
                return Err(Error::param("postings", alloc::format!("doc {bad} not in document list")));
            }
        }
        Ok(Self { doc_ids, postings })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_keywords(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_ids(&self) -> &[DocId] {
        &self.doc_ids
    }

    pub fn posting(&self, keyword: u32) -> &[DocId] {
        &self.postings[keyword as usize]
    }

    pub fn postings(&self) -> &[Vec<DocId>] {
        &self.postings
    }

    pub fn volume(&self, keyword: u32) -> usize {
        self.postings[keyword as usize].len()
    }

    pub fn doc_frequencies(&self) -> Vec<usize> {
        self.postings.iter().map(Vec::len).collect()
    }

    pub fn max_doc_id(&self) -> Option<DocId> {
        self.doc_ids.last().copied()
    }

    /// Position of a document in `doc_ids`, used as its bit index.
    pub fn position(&self, doc: DocId) -> Option<usize> {
        self.doc_ids.binary_search(&doc).ok()
    }

    /// One bitset per keyword over document positions.
    pub fn incidence(&self) -> Vec<DocSet> {
        let width = self.n_docs();
        self.postings
            .iter()
            .map(|p| DocSet::from_positions(width, p.iter().map(|d| self.position(*d).expect("validated"))))
            .collect()
    }

    /// Documents matching every keyword of `keywords`.
    pub fn intersect(&self, keywords: &[u32]) -> Vec<DocId> {
        let Some((&first, rest)) = keywords.split_first() else {
            return Vec::new();
        };
        let mut acc: Vec<DocId> = self.posting(first).to_vec();
        for &k in rest {
            let other = self.posting(k);
            acc.retain(|d| other.binary_search(d).is_ok());
            if acc.is_empty() {
                break;
            }
        }
        acc
    }
}

pub fn build_index(docs: &[Document], universe: &KeywordUniverse) -> Result<InvertedIndex> {
    let n = universe.n();
    let mut postings = alloc::vec![Vec::new(); n];
    for doc in docs {
        for &k in &doc.keyword_ids {
            if k as usize >= n {
                return Err(Error::KeywordOutOfRange { keyword: k, n });
            }
            postings[k as usize].push(doc.doc_id);
        }
    }
    InvertedIndex::from_parts(docs.iter().map(|d| d.doc_id).collect(), postings)
}

/// Parameters of the synthetic text generator that stands in for a real mail
/// corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub n_docs: usize,
    pub vocab_size: usize,
    pub mean_doc_len: usize,
    /// Zipf exponent of the global word distribution.
    pub zipf_s: f64,
    /// Number of latent topics; each document draws from one.
    pub topics: usize,
    /// Probability that a token comes from the document's topic cluster
    /// instead of the global distribution. This is what correlates keywords.
    pub topic_strength: f64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            n_docs: 4000,
            vocab_size: 600,
            mean_doc_len: 40,
            zipf_s: 1.0,
            topics: 12,
            topic_strength: 0.35,
        }
    }
}

const CONSONANTS: &[u8] = b"bcdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Deterministic pronounceable word for a vocabulary index; distinct indices
/// give distinct words and every word survives [`normalize_token`].
pub fn synthetic_word(mut idx: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut out = String::new();
    for _ in 0..3 {
        let syl = idx % base;
        idx /= base;
        out.push(CONSONANTS[syl / VOWELS.len()] as char);
        out.push(VOWELS[syl % VOWELS.len()] as char);
    }
    while idx > 0 {
        out.push(CONSONANTS[idx % CONSONANTS.len()] as char);
        idx /= CONSONANTS.len();
    }
    out
}

pub fn synthesize_corpus(spec: &SyntheticCorpusSpec, seed: u64) -> Result<Vec<RawDocument>> {
    if spec.n_docs == 0 {
        return Err(Error::EmptyCorpus);
    }
    if spec.vocab_size < 2 || spec.topics == 0 || spec.mean_doc_len == 0 {
        return Err(Error::param("corpus", "vocab_size >= 2, topics >= 1 and mean_doc_len >= 1 required"));
    }
    if !(0.0..=1.0).contains(&spec.topic_strength) {
        return Err(Error::param("topic_strength", "must lie in [0, 1]"));
    }
    let global = Zipf::new(spec.vocab_size as f64, spec.zipf_s)
        .map_err(|_| Error::param("zipf_s", "must be positive"))?;
    let mut r = rng::stage_rng(seed, "corpus", 0);

    // Each topic owns a random cluster of words ordered by its own popularity.
    let cluster_len = (spec.vocab_size / spec.topics).max(2);
    let topic_zipf = Zipf::new(cluster_len as f64, spec.zipf_s).expect("cluster_len >= 2");
    let mut perm: Vec<usize> = (0..spec.vocab_size).collect();
    let clusters: Vec<Vec<usize>> = (0..spec.topics)
        .map(|_| {
            perm.shuffle(&mut r);
            perm[..cluster_len].to_vec()
        })
        .collect();
    let words: Vec<String> = (0..spec.vocab_size).map(synthetic_word).collect();

    let lo = (spec.mean_doc_len / 2).max(1);
    let hi = spec.mean_doc_len + spec.mean_doc_len / 2;
    Ok((0..spec.n_docs)
        .map(|d| {
            let topic = &clusters[r.random_range(0..spec.topics)];
            let len = r.random_range(lo..=hi.max(lo));
            let tokens = (0..len)
                .map(|_| {
                    let w = if r.random::<f64>() < spec.topic_strength {
                        topic[topic_zipf.sample(&mut r) as usize - 1]
                    } else {
                        global.sample(&mut r) as usize - 1
                    };
                    words[w].clone()
                })
                .collect();
            RawDocument { doc_id: d as DocId, tokens }
        })
        .collect())
}
