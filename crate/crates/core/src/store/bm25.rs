//! Okapi BM25 over small evidence pools.

use std::collections::HashMap;

use super::Evidence;
use crate::text::tokenize;

/// Term-frequency saturation.
pub const BM25_K1: f64 = 1.2;
/// Length normalization strength.
pub const BM25_B: f64 = 0.75;

/// Corpus statistics for a fixed, ordered document collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bm25Stats {
    pub doc_freq: HashMap<String, usize>,
    pub term_counts: Vec<HashMap<String, usize>>,
    pub doc_lens: Vec<usize>,
    pub avg_len: f64,
}

impl Bm25Stats {
    pub fn from_token_docs<I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[String]>,
    {
        let mut stats = Self::default();
        for doc in docs {
            let doc = doc.as_ref();
            let mut counts: HashMap<String, usize> = HashMap::new();
            for t in doc {
                *counts.entry(t.clone()).or_default() += 1;
            }
            for t in counts.keys() {
                *stats.doc_freq.entry(t.clone()).or_default() += 1;
            }
            stats.doc_lens.push(doc.len());
            stats.term_counts.push(counts);
        }
        let n = stats.doc_lens.len();
        stats.avg_len = if n == 0 {
            0.0
        } else {
            stats.doc_lens.iter().sum::<usize>() as f64 / n as f64
        };
        stats
    }

    pub fn from_evidences<'a>(evidences: impl IntoIterator<Item = &'a Evidence>) -> Self {
        Self::from_token_docs(evidences.into_iter().map(|e| tokenize(&e.text)))
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lens.len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Score of document `doc` for the distinct terms of `query_terms`.
    pub fn score(&self, doc: usize, query_terms: &[String]) -> f64 {
        let avg = if self.avg_len > 0.0 {
            self.avg_len
        } else {
            1.0
        };
        let len_norm = 1.0 - BM25_B + BM25_B * self.doc_lens[doc] as f64 / avg;
        let mut seen: Vec<&str> = Vec::new();
        let mut score = 0.0;
        for term in query_terms {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term);
            let tf = self.term_counts[doc].get(term).copied().unwrap_or(0) as f64;
            if tf == 0.0 {
                continue;
            }
            score += self.idf(term) * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * len_norm);
        }
        score
    }
}

/// Keeps the `k` evidences scoring highest against `query` under BM25 with
/// statistics taken from `evidences` itself. Pools of at most `k` are returned
/// unchanged; otherwise the result is in rank order, ties by ascending id.
pub fn cap_bm25(evidences: Vec<Evidence>, query: &str, k: usize) -> Vec<Evidence> {
    if evidences.len() <= k {
        return evidences;
    }
    let stats = Bm25Stats::from_evidences(&evidences);
    let terms = tokenize(query);
    let mut scored: Vec<(f64, Evidence)> = evidences
        .into_iter()
        .enumerate()
        .map(|(i, ev)| (stats.score(i, &terms), ev))
        .collect();
    scored.sort_by(|(sa, a), (sb, b)| sb.total_cmp(sa).then_with(|| a.id.cmp(&b.id)));
    scored.truncate(k);
    scored.into_iter().map(|(_, ev)| ev).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Source;

    fn ev(id: &str, text: &str) -> Evidence {
        Evidence {
            id: id.into(),
            source: Source::Text,
            text: text.into(),
            mentions: vec![],
            anchor_entities: vec![],
        }
    }

    #[test]
    fn below_cap_is_identity() {
        let pool = vec![ev("c", "x"), ev("a", "y"), ev("b", "z")];
        let out = cap_bm25(pool.clone(), "y", 500);
        assert_eq!(out, pool);
    }

    #[test]
    fn hand_computed_ranking() {
        // docs: d1 = "apple banana" (len 2), d2 = "apple apple cherry" (len 3),
        // d3 = "banana cherry cherry date" (len 4); avg = 3; query "apple date".
        // idf(apple) = ln((3-2+.5)/(2+.5)+1) = ln(1.6); idf(date) = ln((3-1+.5)/1.5+1) = ln(8/3)
        let idf_apple = (1.6f64).ln();
        let idf_date = (8.0f64 / 3.0).ln();
        let tf = |tf: f64, len: f64| tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * len / 3.0));
        let s1 = idf_apple * tf(1.0, 2.0);
        let s2 = idf_apple * tf(2.0, 3.0);
        let s3 = idf_date * tf(1.0, 4.0);
        let pool = vec![
            ev("d1", "apple banana"),
            ev("d2", "apple apple cherry"),
            ev("d3", "banana cherry cherry date"),
        ];
        let stats = Bm25Stats::from_evidences(&pool);
        let q = tokenize("apple date");
        assert!((stats.score(0, &q) - s1).abs() < 1e-12);
        assert!((stats.score(1, &q) - s2).abs() < 1e-12);
        assert!((stats.score(2, &q) - s3).abs() < 1e-12);
        // s3 ≈ 0.863, s2 ≈ 0.646, s1 ≈ 0.544
        let ids: Vec<_> = cap_bm25(pool, "apple date", 2)
            .into_iter()
            .map(|e| e.id)
            .collect();
        assert_eq!(ids, vec!["d3", "d2"]);
    }

    #[test]
    fn zero_overlap_keeps_first_ids() {
        let pool = vec![ev("e3", "x"), ev("e1", "y"), ev("e2", "z")];
        let ids: Vec<_> = cap_bm25(pool, "nothing shared", 2)
            .into_iter()
            .map(|e| e.id)
            .collect();
        assert_eq!(ids, vec!["e1", "e2"]);
    }
}
