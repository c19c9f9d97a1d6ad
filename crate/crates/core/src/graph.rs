//! Bipartite entity/evidence answering graph.
//!
//! Nodes are stored in ascending id order so that construction is
//! independent of input order. Adjacency is kept as index lists on both
//! sides; every edge joins one entity and one evidence.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{matches_any, GoldAnswer};
use crate::store::{EntityRef, Evidence, Source};
use crate::temporal::detect_temporal_entities;

#[derive(Debug, Clone, PartialEq)]
pub struct EntityNode {
    pub entity: EntityRef,
    /// Indices of incident evidence nodes, ascending.
    pub evidences: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceNode {
    pub evidence: Evidence,
    /// Indices of incident entity nodes, ascending.
    pub entities: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnswerGraph {
    entities: Vec<EntityNode>,
    evidences: Vec<EvidenceNode>,
    /// Evidences dropped at construction for lack of any linked entity.
    pub dropped_evidences: usize,
}

/// Entities linked to an evidence: mentions, anchors and detected dates.
pub fn evidence_entities(ev: &Evidence) -> Vec<EntityRef> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in ev.linked_entities() {
        if seen.insert(e.id.clone()) {
            out.push(e.clone());
        }
    }
    for t in detect_temporal_entities(&ev.text) {
        let e = t.entity();
        if seen.insert(e.id.clone()) {
            out.push(e);
        }
    }
    out
}

impl AnswerGraph {
    /// Builds the graph from evidences and their linked entity lists.
    /// Evidences with no entity are dropped and counted.
    fn from_links(links: Vec<(Evidence, Vec<EntityRef>)>) -> Self {
        let mut by_id: BTreeMap<String, (Evidence, Vec<EntityRef>)> = BTreeMap::new();
        for (ev, ents) in links {
            by_id.entry(ev.id.clone()).or_insert((ev, ents));
        }
        let mut dropped = 0;
        let mut entity_refs: BTreeMap<String, EntityRef> = BTreeMap::new();
        let mut kept = Vec::new();
        for (_, (ev, ents)) in by_id {
            if ents.is_empty() {
                dropped += 1;
                continue;
            }
            for e in &ents {
                entity_refs.entry(e.id.clone()).or_insert_with(|| e.clone());
            }
            kept.push((ev, ents));
        }
        let pos: HashMap<&str, usize> = entity_refs
            .keys()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut entities: Vec<EntityNode> = entity_refs
            .values()
            .map(|e| EntityNode {
                entity: e.clone(),
                evidences: Vec::new(),
            })
            .collect();
        let mut evidences = Vec::with_capacity(kept.len());
        for (ev_idx, (ev, ents)) in kept.into_iter().enumerate() {
            let mut idx: Vec<usize> = ents.iter().map(|e| pos[e.id.as_str()]).collect();
            idx.sort_unstable();
            idx.dedup();
            for &i in &idx {
                entities[i].evidences.push(ev_idx);
            }
            evidences.push(EvidenceNode {
                evidence: ev,
                entities: idx,
            });
        }
        Self {
            entities,
            evidences,
            dropped_evidences: dropped,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_evidences(&self) -> usize {
        self.evidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evidences.is_empty()
    }

    pub fn entities(&self) -> &[EntityNode] {
        &self.entities
    }

    pub fn evidences(&self) -> &[EvidenceNode] {
        &self.evidences
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entities
            .binary_search_by(|n| n.entity.id.as_str().cmp(id))
            .ok()
    }

    pub fn evidence_index(&self, id: &str) -> Option<usize> {
        self.evidences
            .binary_search_by(|n| n.evidence.id.as_str().cmp(id))
            .ok()
    }

    /// All (entity id, evidence id) edges.
    pub fn edges(&self) -> BTreeSet<(String, String)> {
        self.evidences
            .iter()
            .flat_map(|ev| {
                ev.entities
                    .iter()
                    .map(move |&e| (self.entities[e].entity.id.clone(), ev.evidence.id.clone()))
            })
            .collect()
    }

    pub fn num_edges(&self) -> usize {
        self.evidences.iter().map(|e| e.entities.len()).sum()
    }

    /// Subgraph induced by the given evidence indices and their entities.
    pub fn induced(&self, keep: &[usize]) -> AnswerGraph {
        let links = keep
            .iter()
            .map(|&i| {
                let node = &self.evidences[i];
                let ents = node
                    .entities
                    .iter()
                    .map(|&e| self.entities[e].entity.clone())
                    .collect();
                (node.evidence.clone(), ents)
            })
            .collect();
        AnswerGraph::from_links(links)
    }

    /// Entity indices matching any gold answer.
    pub fn gold_entities(&self, golds: &[GoldAnswer]) -> Vec<usize> {
        self.entities
            .iter()
            .enumerate()
            .filter(|(_, n)| matches_any(&n.entity, golds))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn contains_answer(&self, golds: &[GoldAnswer]) -> bool {
        !self.gold_entities(golds).is_empty()
    }

    /// Graph dump record.
    pub fn to_record(&self, graph_id: &str, sr: Option<&str>, golds: &[GoldAnswer]) -> GraphRecord {
        GraphRecord {
            graph_id: graph_id.to_string(),
            sr: sr.map(str::to_string),
            evidences: self
                .evidences
                .iter()
                .map(|n| EvidenceRecord {
                    id: n.evidence.id.clone(),
                    text: n.evidence.text.clone(),
                    source: n.evidence.source,
                    entity_ids: n
                        .entities
                        .iter()
                        .map(|&e| self.entities[e].entity.id.clone())
                        .collect(),
                })
                .collect(),
            entities: self.entities.iter().map(|n| n.entity.clone()).collect(),
            gold_entity_ids: self
                .gold_entities(golds)
                .into_iter()
                .map(|i| self.entities[i].entity.id.clone())
                .collect(),
        }
    }

    /// Rebuilds a graph from a dump record. Edges are taken from the record
    /// verbatim; no temporal detection is re-run.
    pub fn from_record(record: &GraphRecord) -> Result<Self> {
        let ents: HashMap<&str, &EntityRef> =
            record.entities.iter().map(|e| (e.id.as_str(), e)).collect();
        let mut links = Vec::new();
        for ev in &record.evidences {
            let linked = ev
                .entity_ids
                .iter()
                .map(|id| {
                    ents.get(id.as_str()).map(|e| (*e).clone()).ok_or_else(|| {
                        Error::Config(format!(
                            "graph {}: evidence {} references unknown entity {id}",
                            record.graph_id, ev.id
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let evidence = Evidence {
                id: ev.id.clone(),
                source: ev.source,
                text: ev.text.clone(),
                mentions: Vec::new(),
                anchor_entities: linked.clone(),
            };
            links.push((evidence, linked));
        }
        Ok(Self::from_links(links))
    }
}

/// One entity/evidence graph, as written to and read from dump files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub graph_id: String,
    /// Serialized SR the graph was retrieved for; needed to encode it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<String>,
    pub evidences: Vec<EvidenceRecord>,
    pub entities: Vec<EntityRef>,
    #[serde(default)]
    pub gold_entity_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub id: String,
    pub text: String,
    pub source: Source,
    pub entity_ids: Vec<String>,
}

/// Builds the answering graph: one node per evidence with at least one
/// linked entity (mention, anchor or detected date), entities merged by id.
pub fn build_graph(evidences: &[Evidence]) -> AnswerGraph {
    let links = evidences
        .iter()
        .map(|ev| (ev.clone(), evidence_entities(ev)))
        .collect();
    AnswerGraph::from_links(links)
}

/// Keeps the `k` highest-scoring evidences (ties by ascending id) and the
/// entities adjacent to them.
pub fn shrink_graph(
    graph: &AnswerGraph,
    scores: &HashMap<String, f64>,
    k: usize,
) -> Result<AnswerGraph> {
    if k == 0 {
        return Err(Error::Config("shrink budget must be at least 1".into()));
    }
    let mut ranked = Vec::with_capacity(graph.num_evidences());
    for (i, node) in graph.evidences.iter().enumerate() {
        let s = scores
            .get(&node.evidence.id)
            .copied()
            .ok_or_else(|| Error::MissingScore(node.evidence.id.clone()))?;
        ranked.push((i, s));
    }
    if k >= graph.num_evidences() {
        return Ok(graph.clone());
    }
    // nodes are in ascending id order, so a stable sort keeps id tie-breaks
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut keep: Vec<usize> = ranked.into_iter().take(k).map(|(i, _)| i).collect();
    keep.sort_unstable();
    Ok(graph.induced(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Mention;
    use proptest::prelude::*;

    fn ent(id: &str) -> EntityRef {
        EntityRef::new(id, format!("label {id}"), "")
    }

    fn ev(id: &str, ents: &[&str]) -> Evidence {
        Evidence {
            id: id.into(),
            source: Source::Kb,
            text: format!("evidence {id}"),
            mentions: ents
                .iter()
                .map(|e| Mention {
                    entity: ent(e),
                    span: (0, 1),
                })
                .collect(),
            anchor_entities: vec![],
        }
    }

    fn check_consistent(g: &AnswerGraph) {
        for (ei, n) in g.entities().iter().enumerate() {
            assert!(!n.evidences.is_empty(), "isolated entity {}", n.entity.id);
            for &v in &n.evidences {
                assert!(g.evidences()[v].entities.contains(&ei));
            }
        }
        for (vi, n) in g.evidences().iter().enumerate() {
            assert!(!n.entities.is_empty());
            for &e in &n.entities {
                assert!(g.entities()[e].evidences.contains(&vi));
            }
        }
    }

    #[test]
    fn merges_entities_by_id() {
        let g = build_graph(&[ev("e1", &["Q1"]), ev("e2", &["Q1"])]);
        assert_eq!(
            (g.num_entities(), g.num_evidences(), g.num_edges()),
            (1, 2, 2)
        );
        check_consistent(&g);
    }

    #[test]
    fn edges_are_exactly_mentions() {
        let g = build_graph(&[ev("x", &["A", "B"])]);
        let expected: BTreeSet<_> = [
            ("A".to_string(), "x".to_string()),
            ("B".to_string(), "x".to_string()),
        ]
        .into();
        assert_eq!(g.edges(), expected);
    }

    #[test]
    fn entityless_evidence_dropped() {
        let g = build_graph(&[ev("x", &[]), ev("y", &["A"])]);
        assert_eq!(g.num_evidences(), 1);
        assert_eq!(g.dropped_evidences, 1);
    }

    #[test]
    fn anchors_and_dates_link() {
        let mut e = ev("x", &[]);
        e.text = "released on 14 May 2009 in cinemas".into();
        e.anchor_entities = vec![ent("Q9")];
        let g = build_graph(&[e]);
        let ids: Vec<_> = g.entities().iter().map(|n| n.entity.id.as_str()).collect();
        assert_eq!(ids, vec!["Q9", "date:2009-05-14"]);
        assert_eq!(g.entities()[1].entity.kb_type, "date");
    }

    #[test]
    fn shrink_keeps_top_k() {
        let g = build_graph(&[
            ev("a", &["A", "S"]),
            ev("b", &["B", "S"]),
            ev("c", &["C"]),
            ev("d", &["D"]),
            ev("e", &["E"]),
        ]);
        let scores: HashMap<String, f64> =
            [("a", 0.4), ("b", 0.3), ("c", 0.1), ("d", 0.1), ("e", 0.1)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
        let s = shrink_graph(&g, &scores, 2).unwrap();
        let evs: Vec<_> = s
            .evidences()
            .iter()
            .map(|n| n.evidence.id.as_str())
            .collect();
        let ents: Vec<_> = s.entities().iter().map(|n| n.entity.id.as_str()).collect();
        assert_eq!(evs, vec!["a", "b"]);
        assert_eq!(ents, vec!["A", "B", "S"]);
        assert!(s.edges().is_subset(&g.edges()));
        check_consistent(&s);
        assert_eq!(shrink_graph(&g, &scores, 5).unwrap(), g);
        assert_eq!(shrink_graph(&g, &scores, 50).unwrap(), g);
    }

    #[test]
    fn shrink_tie_breaks_by_id() {
        let g = build_graph(&[ev("ev9", &["A"]), ev("ev7", &["B"]), ev("ev1", &["C"])]);
        let scores: HashMap<String, f64> = [("ev9", 0.3), ("ev7", 0.3), ("ev1", 0.4)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let s = shrink_graph(&g, &scores, 2).unwrap();
        let evs: Vec<_> = s
            .evidences()
            .iter()
            .map(|n| n.evidence.id.as_str())
            .collect();
        assert_eq!(evs, vec!["ev1", "ev7"]);
    }

    #[test]
    fn shrink_requires_all_scores() {
        let g = build_graph(&[ev("a", &["A"]), ev("b", &["B"])]);
        let scores: HashMap<String, f64> = [("a".to_string(), 1.0)].into();
        assert!(matches!(shrink_graph(&g, &scores, 1), Err(Error::MissingScore(id)) if id == "b"));
    }

    #[test]
    fn record_round_trip() {
        let g = build_graph(&[ev("a", &["A", "S"]), ev("b", &["B", "S"])]);
        let rec = g.to_record("g1", Some("|S|r|"), &[GoldAnswer::new("S", "")]);
        assert_eq!(rec.gold_entity_ids, vec!["S"]);
        let line = serde_json::to_string(&rec).unwrap();
        let back = AnswerGraph::from_record(&serde_json::from_str(&line).unwrap()).unwrap();
        assert_eq!(back.edges(), g.edges());
    }

    proptest! {
        #[test]
        fn construction_is_order_insensitive(perm_seed in 0u64..500, n in 1usize..12) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
            let pool = ["A", "B", "C", "D", "E", "F"];
            let evs: Vec<Evidence> = (0..n)
                .map(|i| {
                    let k = rng.gen_range(0..3);
                    let ents: Vec<&str> = pool.choose_multiple(&mut rng, k).copied().collect();
                    ev(&format!("ev{i}"), &ents)
                })
                .collect();
            let g1 = build_graph(&evs);
            let mut shuffled = evs.clone();
            shuffled.shuffle(&mut rng);
            let g2 = build_graph(&shuffled);
            prop_assert_eq!(&g1, &g2);
            check_consistent(&g1);
            if g1.num_evidences() > 0 {
                let scores: HashMap<String, f64> = g1.evidences().iter().map(|n| (n.evidence.id.clone(), rng.gen::<f64>())).collect();
                let k = rng.gen_range(1..=g1.num_evidences());
                let s = shrink_graph(&g1, &scores, k).unwrap();
                prop_assert_eq!(s.num_evidences(), k);
                prop_assert!(s.edges().is_subset(&g1.edges()));
                check_consistent(&s);
            }
        }
    }
}
