//! Turning structured records into evidence text.
//!
//! Each verbalizer returns the text together with the character spans of the
//! entities it placed, so mentions stay aligned with the emitted string.

use super::EntityRef;

#[derive(Debug, Clone, PartialEq)]
pub enum FactObject {
    Entity(EntityRef),
    Literal(String),
}

impl FactObject {
    pub fn label(&self) -> &str {
        match self {
            FactObject::Entity(e) => &e.label,
            FactObject::Literal(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbFact {
    pub subject: EntityRef,
    pub predicate: String,
    pub object: FactObject,
    pub qualifiers: Vec<(String, FactObject)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRecord {
    pub row_entity_label: String,
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoboxEntry {
    pub entity_label: String,
    pub attribute: String,
    pub value: String,
}

/// Appends `piece` to `out`, returning its char span.
fn push(out: &mut String, len: &mut usize, piece: &str) -> (usize, usize) {
    let start = *len;
    out.push_str(piece);
    *len += piece.chars().count();
    (start, *len)
}

/// Verbalized fact plus spans of the subject, object and qualifier objects
/// (in that order).
pub fn verbalize_fact_spans(fact: &KbFact) -> (String, Vec<(usize, usize)>) {
    let mut out = String::new();
    let mut len = 0;
    let mut spans = Vec::new();
    spans.push(push(&mut out, &mut len, &fact.subject.label));
    push(&mut out, &mut len, " ");
    push(&mut out, &mut len, &fact.predicate);
    push(&mut out, &mut len, " ");
    spans.push(push(&mut out, &mut len, fact.object.label()));
    for (pred, obj) in &fact.qualifiers {
        push(&mut out, &mut len, ", ");
        push(&mut out, &mut len, pred);
        push(&mut out, &mut len, " ");
        spans.push(push(&mut out, &mut len, obj.label()));
    }
    (out, spans)
}

pub fn verbalize_fact(fact: &KbFact) -> String {
    verbalize_fact_spans(fact).0
}

/// Verbalized table record plus the char offset at which each value starts.
pub fn verbalize_table_record_offsets(record: &TableRecord) -> (String, Vec<usize>) {
    let mut out = String::new();
    let mut len = 0;
    let mut offsets = Vec::new();
    push(&mut out, &mut len, &record.row_entity_label);
    for (attr, value) in &record.pairs {
        push(&mut out, &mut len, ", ");
        push(&mut out, &mut len, attr);
        push(&mut out, &mut len, " is ");
        offsets.push(push(&mut out, &mut len, value).0);
    }
    (out, offsets)
}

pub fn verbalize_table_record(record: &TableRecord) -> String {
    verbalize_table_record_offsets(record).0
}

/// Verbalized infobox entry plus the char offset of the value.
pub fn verbalize_infobox_entry_offset(entry: &InfoboxEntry) -> (String, usize) {
    let mut out = String::new();
    let mut len = 0;
    push(&mut out, &mut len, &entry.entity_label);
    push(&mut out, &mut len, ", ");
    push(&mut out, &mut len, &entry.attribute);
    push(&mut out, &mut len, " is ");
    let (start, _) = push(&mut out, &mut len, &entry.value);
    (out, start)
}

pub fn verbalize_infobox_entry(entry: &InfoboxEntry) -> String {
    verbalize_infobox_entry_offset(entry).0
}
