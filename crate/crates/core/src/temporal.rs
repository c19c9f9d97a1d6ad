//! Regex-based detection of dates and years in evidence text.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::store::EntityRef;

/// Id prefix reserved for temporal pseudo-entities.
pub const DATE_ID_PREFIX: &str = "date:";
pub const DATE_KB_TYPE: &str = "date";

const MONTHS: &str = "January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec";

static DAY_MONTH_YEAR: Lazy<Regex> = Lazy::new(|| {
    Regex::new(&format!(
        r"(?i)\b(\d{{1,2}})(?:st|nd|rd|th)?\s+({MONTHS})\.?,?\s+([12]\d{{3}})\b"
    ))
    .unwrap()
});
static MONTH_DAY_YEAR: Lazy<Regex> = Lazy::new(|| {
    Regex::new(&format!(
        r"(?i)\b({MONTHS})\.?\s+(\d{{1,2}})(?:st|nd|rd|th)?,?\s+([12]\d{{3}})\b"
    ))
    .unwrap()
});
static ISO_DATE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\b([12]\d{3})-(\d{2})-(\d{2})\b").unwrap());
static NUMERIC_DMY: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\b(\d{1,2})[.\-](\d{1,2})[.\-]([12]\d{3})\b").unwrap());
static NUMERIC_MDY: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\b(\d{1,2})/(\d{1,2})/([12]\d{3})\b").unwrap());
static YEAR: Lazy<Regex> = Lazy::new(|| Regex::new(r"\b([12]\d{3})\b").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalMatch {
    /// `YYYY` or `YYYY-MM-DD`.
    pub iso: String,
    /// Half-open character span.
    pub span: (usize, usize),
}

impl TemporalMatch {
    pub fn entity(&self) -> EntityRef {
        date_entity(&self.iso)
    }
}

pub fn date_entity(iso: &str) -> EntityRef {
    EntityRef {
        id: format!("{DATE_ID_PREFIX}{iso}"),
        label: iso.to_string(),
        kb_type: DATE_KB_TYPE.to_string(),
    }
}

fn month_number(name: &str) -> Option<u32> {
    let n = name.to_ascii_lowercase();
    let idx = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ]
    .iter()
    .position(|m| n.starts_with(m))?;
    Some(idx as u32 + 1)
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ => {
            if (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400) {
                29
            } else {
                28
            }
        }
    }
}

fn iso(year: u32, month: u32, day: u32) -> Option<String> {
    if !(1000..=2999).contains(&year) || !(1..=12).contains(&month) {
        return None;
    }
    if day == 0 || day > days_in_month(year, month) {
        return None;
    }
    Some(format!("{year:04}-{month:02}-{day:02}"))
}

/// Detects dates and four-digit years (1000-2999). Full dates take
/// precedence over the bare years they contain; results are sorted by
/// position and never overlap.
pub fn detect_temporal_entities(text: &str) -> Vec<TemporalMatch> {
    let mut found: Vec<(usize, usize, String)> = Vec::new();
    let overlaps = |found: &[(usize, usize, String)], s: usize, e: usize| {
        found.iter().any(|(fs, fe, _)| s < *fe && *fs < e)
    };

    let num = |m: Option<regex::Match>| m.and_then(|m| m.as_str().parse::<u32>().ok());

    for caps in ISO_DATE.captures_iter(text) {
        let m = caps.get(0).unwrap();
        if let (Some(y), Some(mo), Some(d)) = (num(caps.get(1)), num(caps.get(2)), num(caps.get(3)))
        {
            if let Some(iso) = iso(y, mo, d) {
                if !overlaps(&found, m.start(), m.end()) {
                    found.push((m.start(), m.end(), iso));
                }
            }
        }
    }
    for caps in DAY_MONTH_YEAR.captures_iter(text) {
        let m = caps.get(0).unwrap();
        let month = caps.get(2).and_then(|m| month_number(m.as_str()));
        if let (Some(d), Some(mo), Some(y)) = (num(caps.get(1)), month, num(caps.get(3))) {
            if let Some(iso) = iso(y, mo, d) {
                if !overlaps(&found, m.start(), m.end()) {
                    found.push((m.start(), m.end(), iso));
                }
            }
        }
    }
    for caps in MONTH_DAY_YEAR.captures_iter(text) {
        let m = caps.get(0).unwrap();
        let month = caps.get(1).and_then(|m| month_number(m.as_str()));
        if let (Some(mo), Some(d), Some(y)) = (month, num(caps.get(2)), num(caps.get(3))) {
            if let Some(iso) = iso(y, mo, d) {
                if !overlaps(&found, m.start(), m.end()) {
                    found.push((m.start(), m.end(), iso));
                }
            }
        }
    }
    for caps in NUMERIC_DMY.captures_iter(text) {
        let m = caps.get(0).unwrap();
        if let (Some(d), Some(mo), Some(y)) = (num(caps.get(1)), num(caps.get(2)), num(caps.get(3)))
        {
            if let Some(iso) = iso(y, mo, d) {
                if !overlaps(&found, m.start(), m.end()) {
                    found.push((m.start(), m.end(), iso));
                }
            }
        }
    }
    for caps in NUMERIC_MDY.captures_iter(text) {
        let m = caps.get(0).unwrap();
        if let (Some(mo), Some(d), Some(y)) = (num(caps.get(1)), num(caps.get(2)), num(caps.get(3)))
        {
            if let Some(iso) = iso(y, mo, d) {
                if !overlaps(&found, m.start(), m.end()) {
                    found.push((m.start(), m.end(), iso));
                }
            }
        }
    }
    for m in YEAR.find_iter(text) {
        if overlaps(&found, m.start(), m.end()) {
            continue;
        }
        // a year glued to other digits by separators belongs to a number like 1,234,567
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        let glued = |c: Option<char>, next: Option<char>| {
            matches!(c, Some(',') | Some('.')) && next.map(|n| n.is_ascii_digit()).unwrap_or(false)
        };
        if glued(before, text[..m.start()].chars().rev().nth(1))
            || glued(after, text[m.end()..].chars().nth(1))
        {
            continue;
        }
        found.push((m.start(), m.end(), m.as_str().to_string()));
    }

    found.sort_by_key(|(s, _, _)| *s);
    found
        .into_iter()
        .map(|(s, e, iso)| TemporalMatch {
            iso,
            span: (text[..s].chars().count(), text[..e].chars().count()),
        })
        .collect()
}

/// Normalizes a whole string to ISO form if it is exactly one date or year.
pub fn normalize_date(text: &str) -> Option<String> {
    let trimmed = text.trim();
    let found = detect_temporal_entities(trimmed);
    match found.as_slice() {
        [only] if only.span == (0, trimmed.chars().count()) => Some(only.iso.clone()),
        _ => None,
    }
}
