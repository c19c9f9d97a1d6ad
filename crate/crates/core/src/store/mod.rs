//! Local heterogeneous knowledge snapshot: ingestion, verbalization into
//! evidences, entity index and slot-restricted retrieval.

pub mod bm25;
pub mod verbalize;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bm25::{cap_bm25, Bm25Stats};
pub use verbalize::{
    verbalize_fact, verbalize_infobox_entry, verbalize_table_record, FactObject, InfoboxEntry,
    KbFact, TableRecord,
};

use crate::error::{Error, Result};
use crate::sr::StructuredRepresentation;
use crate::temporal::{date_entity, normalize_date};
use crate::text::{char_slice, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityRef {
    pub id: String,
    pub label: String,
    #[serde(rename = "type", default)]
    pub kb_type: String,
}

impl EntityRef {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        kb_type: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            kb_type: kb_type.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Kb,
    Text,
    Table,
    Infobox,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Kb, Source::Text, Source::Table, Source::Infobox];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Kb => "kb",
            Source::Text => "text",
            Source::Table => "table",
            Source::Infobox => "infobox",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kb" => Ok(Source::Kb),
            "text" => Ok(Source::Text),
            "table" => Ok(Source::Table),
            "infobox" => Ok(Source::Infobox),
            other => Err(Error::Config(format!("unknown evidence source '{other}'"))),
        }
    }
}

/// Parses a comma-separated source list such as `kb,text`.
pub fn parse_sources(list: &str) -> Result<Vec<Source>> {
    let mut out: Vec<Source> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Source::from_str)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub entity: EntityRef,
    /// Half-open character span into the evidence text.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub id: String,
    pub source: Source,
    pub text: String,
    #[serde(default)]
    pub mentions: Vec<Mention>,
    /// Entities this evidence was retrieved for (its page entity).
    #[serde(default)]
    pub anchor_entities: Vec<EntityRef>,
}

impl Evidence {
    /// Mentioned and anchored entities, deduplicated by id, in first-seen order.
    pub fn linked_entities(&self) -> Vec<&EntityRef> {
        let mut seen = BTreeSet::new();
        self.mentions
            .iter()
            .map(|m| &m.entity)
            .chain(self.anchor_entities.iter())
            .filter(|e| seen.insert(e.id.as_str()))
            .collect()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("evidence id is empty".into());
        }
        if self.text.is_empty() {
            return Err(format!("evidence {} has empty text", self.id));
        }
        let n = self.text.chars().count();
        for m in &self.mentions {
            if m.entity.id.is_empty() {
                return Err(format!(
                    "evidence {} mentions an entity with empty id",
                    self.id
                ));
            }
            if m.span.0 > m.span.1 || m.span.1 > n {
                return Err(format!(
                    "mention span [{}, {}) of {} outside text of {n} chars",
                    m.span.0, m.span.1, m.entity.id
                ));
            }
        }
        Ok(())
    }
}

/// Immutable collection of evidences with entity and BM25 indexes.
#[derive(Debug, Clone, Default)]
pub struct EvidenceStore {
    evidences: BTreeMap<String, Evidence>,
    entities: BTreeMap<String, EntityRef>,
    entity_index: BTreeMap<String, BTreeSet<String>>,
    /// First label token -> (label tokens, entity id).
    label_index: HashMap<String, Vec<(Vec<String>, String)>>,
    bm25: Bm25Stats,
}

impl EvidenceStore {
    pub fn from_evidences(evidences: impl IntoIterator<Item = Evidence>) -> Result<Self> {
        let mut store = Self::default();
        for ev in evidences {
            ev.validate().map_err(Error::Config)?;
            if store.evidences.contains_key(&ev.id) {
                return Err(Error::DuplicateEvidence(ev.id));
            }
            store.evidences.insert(ev.id.clone(), ev);
        }
        store.build_indexes();
        Ok(store)
    }

    fn build_indexes(&mut self) {
        for ev in self.evidences.values() {
            for e in ev.linked_entities() {
                self.entities
                    .entry(e.id.clone())
                    .or_insert_with(|| e.clone());
                self.entity_index
                    .entry(e.id.clone())
                    .or_default()
                    .insert(ev.id.clone());
            }
        }
        for e in self.entities.values() {
            let toks = tokenize(&e.label);
            if let Some(first) = toks.first() {
                self.label_index
                    .entry(first.clone())
                    .or_default()
                    .push((toks.clone(), e.id.clone()));
            }
        }
        self.bm25 = Bm25Stats::from_evidences(self.evidences.values());
    }

    pub fn len(&self) -> usize {
        self.evidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evidences.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Evidence> {
        self.evidences.get(id)
    }

    pub fn evidences(&self) -> impl Iterator<Item = &Evidence> {
        self.evidences.values()
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityRef> {
        self.entities.values()
    }

    pub fn entity(&self, id: &str) -> Option<&EntityRef> {
        self.entities.get(id)
    }

    /// Evidence ids mentioning or anchored to `entity_id`.
    pub fn evidences_for_entity(&self, entity_id: &str) -> impl Iterator<Item = &str> {
        self.entity_index
            .get(entity_id)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    /// Corpus-level BM25 statistics, aligned with `evidences()` order.
    pub fn bm25_stats(&self) -> &Bm25Stats {
        &self.bm25
    }

    /// Store entities whose normalized label occurs as a whole-token
    /// subsequence of the given slot text.
    pub fn entities_in_text(&self, text: &str) -> BTreeSet<&str> {
        let toks = tokenize(text);
        let mut out = BTreeSet::new();
        for (i, t) in toks.iter().enumerate() {
            if let Some(cands) = self.label_index.get(t) {
                for (label, id) in cands {
                    if toks[i..].starts_with(label) {
                        out.insert(id.as_str());
                    }
                }
            }
        }
        out
    }

    /// Entities matched by the context and question-entity slots only.
    pub fn matched_entities(&self, sr: &StructuredRepresentation) -> BTreeSet<&str> {
        let mut ids = self.entities_in_text(&sr.context_entity);
        ids.extend(self.entities_in_text(&sr.question_entity));
        ids
    }

    /// Evidences linked to an entity named in the context or question-entity
    /// slot, deduplicated and sorted by id.
    pub fn retrieve(&self, sr: &StructuredRepresentation) -> Vec<Evidence> {
        self.retrieve_from(sr, &Source::ALL)
    }

    /// As [`retrieve`](Self::retrieve), restricted to the given sources.
    pub fn retrieve_from(
        &self,
        sr: &StructuredRepresentation,
        sources: &[Source],
    ) -> Vec<Evidence> {
        let ids: BTreeSet<&str> = self
            .matched_entities(sr)
            .into_iter()
            .flat_map(|e| self.evidences_for_entity(e))
            .collect();
        ids.into_iter()
            .filter_map(|id| self.evidences.get(id))
            .filter(|ev| sources.contains(&ev.source))
            .cloned()
            .collect()
    }

    /// Writes `evidences.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(STORE_FILE))?);
        for ev in self.evidences.values() {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(STORE_FILE);
        let mut evs = Vec::new();
        for_each_line(&path, |line_no, line| {
            let ev: Evidence =
                serde_json::from_str(line).map_err(|e| record_err(&path, line_no, e))?;
            evs.push(ev);
            Ok(())
        })?;
        Self::from_evidences(evs)
    }
}

pub const STORE_FILE: &str = "evidences.jsonl";

fn record_err(path: &Path, line: usize, message: impl ToString) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}

fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let reader = BufReader::new(File::open(path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        f(i + 1, &line)?;
    }
    Ok(())
}

// ---- snapshot record formats ----

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawObject {
    Entity(EntityRef),
    Literal { literal: serde_json::Value },
}

#[derive(Debug, Deserialize)]
struct RawQualifier {
    predicate: String,
    object: RawObject,
}

#[derive(Debug, Deserialize)]
struct RawFact {
    id: String,
    subject: EntityRef,
    predicate: String,
    object: RawObject,
    #[serde(default)]
    qualifiers: Vec<RawQualifier>,
}

#[derive(Debug, Deserialize)]
struct RawAnchor {
    span: (usize, usize),
    entity_id: String,
}

#[derive(Debug, Deserialize)]
struct RawSentence {
    id: String,
    page_entity_id: String,
    #[serde(default)]
    page_entity_label: Option<String>,
    #[serde(default)]
    page_entity_type: Option<String>,
    sentence: String,
    #[serde(default)]
    anchors: Vec<RawAnchor>,
}

#[derive(Debug, Deserialize)]
struct RawPair {
    attribute: String,
    value: String,
    #[serde(default)]
    anchors: Vec<RawAnchor>,
}

#[derive(Debug, Deserialize)]
struct RawTableRecord {
    id: String,
    page_entity_id: String,
    #[serde(default)]
    page_entity_label: Option<String>,
    #[serde(default)]
    page_entity_type: Option<String>,
    row_entity_label: String,
    pairs: Vec<RawPair>,
}

#[derive(Debug, Deserialize)]
struct RawInfobox {
    id: String,
    page_entity_id: String,
    #[serde(default)]
    page_entity_label: Option<String>,
    #[serde(default)]
    page_entity_type: Option<String>,
    attribute: String,
    value: String,
    #[serde(default)]
    anchors: Vec<RawAnchor>,
}

/// Paths of the four line-delimited snapshot files. Missing optional files
/// are treated as empty.
#[derive(Debug, Clone, Default)]
pub struct SnapshotPaths {
    pub facts: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub tables: Option<PathBuf>,
    pub infoboxes: Option<PathBuf>,
}

impl SnapshotPaths {
    /// `facts.jsonl`, `text.jsonl`, `tables.jsonl`, `infoboxes.jsonl` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Self {
            facts: opt("facts.jsonl"),
            text: opt("text.jsonl"),
            tables: opt("tables.jsonl"),
            infoboxes: opt("infoboxes.jsonl"),
        }
    }
}

/// Literal fact objects become pseudo-entities: dates under `date:`, other
/// values under `lit:` with an empty type.
pub fn literal_entity(value: &str) -> EntityRef {
    match normalize_date(value) {
        Some(iso) => {
            let mut e = date_entity(&iso);
            e.label = value.to_string();
            e
        }
        None => EntityRef::new(format!("lit:{value}"), value, ""),
    }
}

#[derive(Default)]
struct Ingester {
    registry: HashMap<String, EntityRef>,
    evidences: Vec<Evidence>,
    ids: BTreeSet<String>,
}

impl Ingester {
    fn register(&mut self, e: &EntityRef) {
        self.registry
            .entry(e.id.clone())
            .or_insert_with(|| e.clone());
    }

    fn add(&mut self, path: &Path, line: usize, ev: Evidence) -> Result<()> {
        ev.validate().map_err(|m| record_err(path, line, m))?;
        if !self.ids.insert(ev.id.clone()) {
            return Err(record_err(
                path,
                line,
                format!("duplicate evidence id {}", ev.id),
            ));
        }
        self.evidences.push(ev);
        Ok(())
    }

    fn fact_object(&mut self, obj: RawObject) -> FactObject {
        match obj {
            RawObject::Entity(e) => {
                self.register(&e);
                FactObject::Entity(e)
            }
            RawObject::Literal { literal } => FactObject::Literal(match literal {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            }),
        }
    }

    fn page_entity(
        &mut self,
        path: &Path,
        line: usize,
        id: &str,
        label: Option<String>,
        kb_type: Option<String>,
    ) -> Result<EntityRef> {
        if id.is_empty() {
            return Err(record_err(path, line, "page_entity_id is empty"));
        }
        if let Some(e) = self.registry.get(id) {
            return Ok(e.clone());
        }
        match label {
            Some(label) if !label.is_empty() => {
                let e = EntityRef::new(id, label, kb_type.unwrap_or_default());
                self.register(&e);
                Ok(e)
            }
            _ => Err(record_err(
                path,
                line,
                format!("unknown page entity {id} (not in facts and no page_entity_label given)"),
            )),
        }
    }

    /// Resolves anchors over `source_field`, shifting spans by `offset`.
    fn anchors(
        &mut self,
        path: &Path,
        line: usize,
        source_field: &str,
        anchors: &[RawAnchor],
        offset: usize,
    ) -> Result<Vec<Mention>> {
        let mut out = Vec::new();
        for a in anchors {
            let surface = char_slice(source_field, a.span.0, a.span.1).ok_or_else(|| {
                record_err(
                    path,
                    line,
                    format!("anchor span [{}, {}) out of bounds", a.span.0, a.span.1),
                )
            })?;
            if a.entity_id.is_empty() {
                return Err(record_err(path, line, "anchor entity_id is empty"));
            }
            let entity = match self.registry.get(&a.entity_id) {
                Some(e) => e.clone(),
                None => {
                    let e = EntityRef::new(a.entity_id.clone(), surface, "");
                    self.register(&e);
                    e
                }
            };
            out.push(Mention {
                entity,
                span: (a.span.0 + offset, a.span.1 + offset),
            });
        }
        Ok(out)
    }

    fn facts(&mut self, path: &Path) -> Result<()> {
        for_each_line(path, |line, text| {
            let raw: RawFact = serde_json::from_str(text).map_err(|e| record_err(path, line, e))?;
            if raw.subject.id.is_empty() || raw.predicate.is_empty() {
                return Err(record_err(
                    path,
                    line,
                    "fact subject and predicate must be non-empty",
                ));
            }
            self.register(&raw.subject);
            let object = self.fact_object(raw.object);
            let qualifiers = raw
                .qualifiers
                .into_iter()
                .map(|q| (q.predicate, self.fact_object(q.object)))
                .collect();
            let fact = KbFact {
                subject: raw.subject,
                predicate: raw.predicate,
                object,
                qualifiers,
            };
            let (verbalized, spans) = verbalize::verbalize_fact_spans(&fact);
            let objects =
                std::iter::once(&fact.object).chain(fact.qualifiers.iter().map(|(_, o)| o));
            let mut mentions = vec![Mention {
                entity: fact.subject.clone(),
                span: spans[0],
            }];
            for (obj, span) in objects.zip(&spans[1..]) {
                let entity = match obj {
                    FactObject::Entity(e) => e.clone(),
                    FactObject::Literal(v) => literal_entity(v),
                };
                mentions.push(Mention {
                    entity,
                    span: *span,
                });
            }
            let ev = Evidence {
                id: raw.id,
                source: Source::Kb,
                text: verbalized,
                mentions,
                anchor_entities: vec![fact.subject.clone()],
            };
            self.add(path, line, ev)
        })
    }

    fn sentences(&mut self, path: &Path) -> Result<()> {
        for_each_line(path, |line, text| {
            let raw: RawSentence =
                serde_json::from_str(text).map_err(|e| record_err(path, line, e))?;
            let page = self.page_entity(
                path,
                line,
                &raw.page_entity_id,
                raw.page_entity_label,
                raw.page_entity_type,
            )?;
            let mentions = self.anchors(path, line, &raw.sentence, &raw.anchors, 0)?;
            let ev = Evidence {
                id: raw.id,
                source: Source::Text,
                text: raw.sentence,
                mentions,
                anchor_entities: vec![page],
            };
            self.add(path, line, ev)
        })
    }

    fn tables(&mut self, path: &Path) -> Result<()> {
        for_each_line(path, |line, text| {
            let raw: RawTableRecord =
                serde_json::from_str(text).map_err(|e| record_err(path, line, e))?;
            if raw.pairs.is_empty() {
                return Err(record_err(
                    path,
                    line,
                    "table record has no attribute/value pairs",
                ));
            }
            if raw.pairs.iter().any(|p| p.attribute.trim().is_empty()) {
                return Err(record_err(
                    path,
                    line,
                    "table record has an empty attribute name",
                ));
            }
            if raw.row_entity_label.is_empty() {
                return Err(record_err(
                    path,
                    line,
                    "table record has an empty row_entity_label",
                ));
            }
            let page = self.page_entity(
                path,
                line,
                &raw.page_entity_id,
                raw.page_entity_label,
                raw.page_entity_type,
            )?;
            let record = TableRecord {
                row_entity_label: raw.row_entity_label,
                pairs: raw
                    .pairs
                    .iter()
                    .map(|p| (p.attribute.clone(), p.value.clone()))
                    .collect(),
            };
            let (verbalized, offsets) = verbalize::verbalize_table_record_offsets(&record);
            let mut mentions = Vec::new();
            for (pair, off) in raw.pairs.iter().zip(offsets) {
                mentions.extend(self.anchors(path, line, &pair.value, &pair.anchors, off)?);
            }
            let ev = Evidence {
                id: raw.id,
                source: Source::Table,
                text: verbalized,
                mentions,
                anchor_entities: vec![page],
            };
            self.add(path, line, ev)
        })
    }

    fn infoboxes(&mut self, path: &Path) -> Result<()> {
        for_each_line(path, |line, text| {
            let raw: RawInfobox =
                serde_json::from_str(text).map_err(|e| record_err(path, line, e))?;
            if raw.attribute.trim().is_empty() {
                return Err(record_err(
                    path,
                    line,
                    "infobox entry has an empty attribute",
                ));
            }
            let page = self.page_entity(
                path,
                line,
                &raw.page_entity_id,
                raw.page_entity_label,
                raw.page_entity_type,
            )?;
            let entry = InfoboxEntry {
                entity_label: page.label.clone(),
                attribute: raw.attribute,
                value: raw.value,
            };
            let (verbalized, off) = verbalize::verbalize_infobox_entry_offset(&entry);
            let mentions = self.anchors(path, line, &entry.value, &raw.anchors, off)?;
            let ev = Evidence {
                id: raw.id,
                source: Source::Infobox,
                text: verbalized,
                mentions,
                anchor_entities: vec![page],
            };
            self.add(path, line, ev)
        })
    }
}

/// Ingests the four snapshot files. Facts are read first so that their
/// entities resolve anchors and page ids in the other files.
pub fn ingest_snapshot(paths: &SnapshotPaths) -> Result<EvidenceStore> {
    let mut ing = Ingester::default();
    if let Some(p) = &paths.facts {
        ing.facts(p)?;
    }
    if let Some(p) = &paths.text {
        ing.sentences(p)?;
    }
    if let Some(p) = &paths.tables {
        ing.tables(p)?;
    }
    if let Some(p) = &paths.infoboxes {
        ing.infoboxes(p)?;
    }
    EvidenceStore::from_evidences(ing.evidences)
}
