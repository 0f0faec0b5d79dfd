//! Okapi BM25 lexical baseline over the same item texts the dense path sees.
//!
//! Scoring uses the non-negative IDF variant
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))` and the standard term
//! weight `tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))` with
//! k1 = 0.9 and b = 0.4. Each query token occurrence contributes, so a
//! repeated query term counts twice. Every document receives a score (zero
//! when nothing matches), and ties break by item id ascending, exactly as in
//! the dense ranker.

use std::collections::HashMap;

use super::{RankedList, ScoreError};

pub const K1: f64 = 0.9;
pub const B: f64 = 0.4;

/// Inverted index over tokenized documents. Postings keep insertion order of
/// documents; scoring visits them in that order, so results are
/// deterministic.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
}

impl InvertedIndex {
    /// Builds from (id, tokens) pairs.
    pub fn build<I>(docs: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_ids = Vec::new();
        let mut doc_lengths = Vec::new();
        for (id, tokens) in docs {
            let doc_idx = doc_ids.len();
            doc_ids.push(id);
            doc_lengths.push(tokens.len());
            let mut counts: HashMap<&str, u32> = HashMap::new();
            for token in &tokens {
                *counts.entry(token).or_insert(0) += 1;
            }
            // Sorted term order keeps posting construction deterministic.
            let mut counted: Vec<(&str, u32)> = counts.into_iter().collect();
            counted.sort_unstable();
            for (token, tf) in counted {
                postings.entry(token.to_string()).or_default().push((doc_idx, tf));
            }
        }
        let total_len: usize = doc_lengths.iter().sum();
        let avgdl = if doc_ids.is_empty() {
            0.0
        } else {
            total_len as f64 / doc_ids.len() as f64
        };
        Self {
            postings,
            doc_ids,
            doc_lengths,
            avgdl,
        }
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }
}

/// BM25 top-k over the whole index. Documents matching no query token keep
/// score zero and are ordered by id.
pub fn bm25_rank(
    query_tokens: &[String],
    index: &InvertedIndex,
    k: usize,
) -> Result<RankedList, ScoreError> {
    if index.is_empty() {
        return Err(ScoreError::EmptyIndex);
    }
    let n = index.len() as f64;
    let mut scores = vec![0.0f64; index.len()];
    for token in query_tokens {
        let Some(posting) = index.postings.get(token) else {
            continue;
        };
        let df = posting.len() as f64;
        // IDF: ln(1 + (N - df + 0.5) / (df + 0.5)), never negative.
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        for &(doc_idx, tf) in posting {
            let tf = f64::from(tf);
            let dl = index.doc_lengths[doc_idx] as f64;
            let norm = 1.0 - B + B * dl / index.avgdl;
            scores[doc_idx] += idf * tf * (K1 + 1.0) / (tf + K1 * norm);
        }
    }
    let pairs = index
        .doc_ids
        .iter()
        .cloned()
        .zip(scores)
        .collect::<Vec<_>>();
    Ok(RankedList::from_scores(pairs, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn fixture() -> InvertedIndex {
        InvertedIndex::build(vec![
            ("d1".to_string(), toks("red fish blue fish")),
            ("d2".to_string(), toks("green fish")),
            ("d3".to_string(), toks("purple cat")),
        ])
    }

    #[test]
    fn hand_computed_three_doc_oracle() {
        // Worked by hand: N=3, avgdl=8/3, query "fish red".
        // d1: ln(1.6)*2*1.9/3.08 + ln(8/3)*1.9/2.08, d2: ln(1.6)*1.9/1.81.
        let index = fixture();
        let ranked = bm25_rank(&toks("fish red"), &index, 3).unwrap();
        assert_eq!(ranked.entries[0].item_id, "d1");
        assert!((ranked.entries[0].score - 1.4758244059351453).abs() < 1e-9);
        assert_eq!(ranked.entries[1].item_id, "d2");
        assert!((ranked.entries[1].score - 0.49337397545132466).abs() < 1e-9);
        assert_eq!(ranked.entries[2].item_id, "d3");
        assert_eq!(ranked.entries[2].score, 0.0);
    }

    #[test]
    fn repeated_query_token_counts_twice() {
        let index = fixture();
        let once = bm25_rank(&toks("fish"), &index, 3).unwrap();
        let twice = bm25_rank(&toks("fish fish"), &index, 3).unwrap();
        let d2_once = once.entries.iter().find(|e| e.item_id == "d2").unwrap();
        let d2_twice = twice.entries.iter().find(|e| e.item_id == "d2").unwrap();
        assert!((d2_twice.score - 2.0 * d2_once.score).abs() < 1e-12);
        assert!((d2_twice.score - 0.9867479509026493).abs() < 1e-9);
    }

    #[test]
    fn unmatched_query_ranks_all_docs_by_id_at_zero() {
        let index = fixture();
        let ranked = bm25_rank(&toks("zebra"), &index, 10).unwrap();
        let ids: Vec<&str> = ranked.ids().collect();
        assert_eq!(ids, vec!["d1", "d2", "d3"]);
        assert!(ranked.entries.iter().all(|e| e.score == 0.0));
    }

    #[test]
    fn single_match_ranks_first() {
        let index = fixture();
        let ranked = bm25_rank(&toks("cat"), &index, 3).unwrap();
        assert_eq!(ranked.entries[0].item_id, "d3");
        assert!(ranked.entries[0].score > 0.0);
        assert_eq!(ranked.entries[1].score, 0.0);
    }

    #[test]
    fn empty_index_is_an_error() {
        let index = InvertedIndex::build(Vec::<(String, Vec<String>)>::new());
        assert_eq!(bm25_rank(&toks("x"), &index, 5), Err(ScoreError::EmptyIndex));
    }

    #[test]
    fn build_is_deterministic() {
        let a = fixture();
        let b = fixture();
        let ra = bm25_rank(&toks("fish red green"), &a, 3).unwrap();
        let rb = bm25_rank(&toks("fish red green"), &b, 3).unwrap();
        assert_eq!(ra, rb);
    }
}
