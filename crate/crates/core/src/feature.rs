use std::fmt;

use serde::{Serialize, Serializer};

/// Canonical answer-option path: `<question-id>/<option-key>`.
///
/// Question ids are themselves slash-joined (`c.1.1/ranking/order`), so the
/// option key is always the last segment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(String);

impl FeatureId {
    pub fn new(question: &str, key: &str) -> Self {
        FeatureId(format!("{question}/{key}"))
    }

    /// Parses a path, checking only its syntax. Whether it names a real option
    /// is up to the taxonomy.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let Some((q, key)) = s.rsplit_once('/') else {
            return Err(format!("feature path `{s}` has no option segment"));
        };
        if !is_question_id(q) {
            return Err(format!("feature path `{s}` has an invalid question id"));
        }
        if !is_key(key) {
            return Err(format!("feature path `{s}` has an invalid option key `{key}`"));
        }
        Ok(FeatureId(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn question(&self) -> &str {
        self.0.rsplit_once('/').map(|(q, _)| q).unwrap_or("")
    }

    pub fn key(&self) -> &str {
        self.0.rsplit_once('/').map(|(_, k)| k).unwrap_or(&self.0)
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for FeatureId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// `c.N` or `c.N.M...` with N in 1..=4.
pub fn is_code(s: &str) -> bool {
    let Some(rest) = s.strip_prefix("c.") else { return false };
    let mut parts = rest.split('.');
    match parts.next() {
        Some("1" | "2" | "3" | "4") => {}
        _ => return false,
    }
    parts.all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()))
}

/// Lowercase kebab-case: `[a-z0-9]+(-[a-z0-9]+)*`.
pub fn is_key(s: &str) -> bool {
    !s.is_empty()
        && s.split('-').all(|p| {
            !p.is_empty() && p.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
        })
}

pub fn is_question_id(s: &str) -> bool {
    let mut segs = s.split('/');
    match segs.next() {
        Some(code) if is_code(code) => segs.all(is_key),
        _ => false,
    }
}
