//! Partial answer assignments and the session file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::diagnostic::Diagnostic;
use crate::feature::FeatureId;
use crate::taxonomy::{SelectMode, Taxonomy};

/// Answers given so far. An unanswered question means "I don't know".
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Session {
    answers: BTreeMap<String, BTreeSet<String>>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn answers(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.answers
    }

    pub fn get(&self, question: &str) -> Option<&BTreeSet<String>> {
        self.answers.get(question)
    }

    pub fn is_answered(&self, question: &str) -> bool {
        self.answers.contains_key(question)
    }

    pub fn is_selected(&self, f: &FeatureId) -> bool {
        self.answers.get(f.question()).is_some_and(|keys| keys.contains(f.key()))
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    /// Sets an answer without any validation. The engine's `answer` is the
    /// checked way in.
    pub fn set_raw<I, S>(&mut self, question: &str, keys: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.answers.insert(question.to_string(), keys.into_iter().map(Into::into).collect());
    }

    pub fn remove_raw(&mut self, question: &str) -> Option<BTreeSet<String>> {
        self.answers.remove(question)
    }

    /// Selected features in display order (question order, then option order).
    pub fn selected_features(&self, tax: &Taxonomy) -> Vec<FeatureId> {
        let mut out = Vec::new();
        for q in tax.questions() {
            if let Some(keys) = self.answers.get(&q.id) {
                out.extend(q.options.iter().filter(|o| keys.contains(&o.key)).map(|o| o.feature.clone()));
            }
        }
        out
    }

    /// Structural problems: unknown ids, wrong cardinality, answers to
    /// questions that are not enabled.
    pub fn check(&self, tax: &Taxonomy) -> Vec<String> {
        let mut problems = Vec::new();
        for (qid, keys) in &self.answers {
            let Some(q) = tax.question(qid) else {
                problems.push(format!("unknown question `{qid}`"));
                continue;
            };
            for k in keys {
                if q.option(k).is_none() {
                    problems.push(format!("question `{qid}` has no option `{k}`"));
                }
            }
            if keys.is_empty() {
                problems.push(format!("question `{qid}` has an empty selection"));
            }
            if q.mode == SelectMode::Single && keys.len() > 1 {
                problems.push(format!("question `{qid}` accepts a single option"));
            }
            if !tax.is_enabled(self, qid) {
                problems.push(format!("question `{qid}` is not enabled by the other answers"));
            }
        }
        problems
    }
}

pub(crate) struct Document {
    pub headers: Vec<(String, String, usize)>,
    pub session: Session,
}

/// Reads `qid = key[,key]` lines plus the named `header: value` lines.
pub(crate) fn parse_document(tax: &Taxonomy, text: &str, headers: &[&str]) -> Result<Document, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut out_headers = Vec::new();
    let mut session = Session::new();
    let mut lines_of: BTreeMap<String, usize> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some((name, value)) = trimmed.split_once(':') {
            if !name.contains('=') && !name.contains('/') && !name.contains(' ') && !name.contains('.') {
                if headers.contains(&name) {
                    out_headers.push((name.to_string(), value.trim().to_string(), line));
                } else {
                    diags.push(Diagnostic::at_line(line, format!("unexpected header `{name}`")));
                }
                continue;
            }
        }
        let content = trimmed.split('#').next().unwrap_or("").trim();
        let Some((qid, keys)) = content.split_once('=') else {
            diags.push(Diagnostic::at_line(line, "expected `<question-id> = <option-key>[,<option-key>...]`"));
            continue;
        };
        let qid = qid.trim();
        let keys: Vec<&str> = keys.split(',').map(str::trim).collect();
        let Some(q) = tax.question(qid) else {
            diags.push(Diagnostic::at_line(line, format!("unknown question `{qid}`")));
            continue;
        };
        if keys.iter().any(|k| k.is_empty()) {
            diags.push(Diagnostic::at_line(line, format!("empty option key for `{qid}`")));
            continue;
        }
        let mut bad = false;
        for k in &keys {
            if q.option(k).is_none() {
                diags.push(Diagnostic::at_line(line, format!("question `{qid}` has no option `{k}`")));
                bad = true;
            }
        }
        let set: BTreeSet<String> = keys.iter().map(|k| k.to_string()).collect();
        if set.len() != keys.len() {
            diags.push(Diagnostic::at_line(line, format!("repeated option for `{qid}`")));
            bad = true;
        }
        if q.mode == SelectMode::Single && set.len() > 1 {
            diags.push(Diagnostic::at_line(line, format!("question `{qid}` accepts a single option")));
            bad = true;
        }
        if let Some(prev) = lines_of.insert(qid.to_string(), line) {
            diags.push(Diagnostic::at_line(line, format!("question `{qid}` already answered at line {prev}")));
            bad = true;
        }
        if !bad {
            session.set_raw(qid, set);
        }
    }

    if diags.is_empty() {
        for (qid, line) in &lines_of {
            if !tax.is_enabled(&session, qid) {
                let gate = tax.question(qid).and_then(|q| q.gate.clone()).map(|g| g.to_string()).unwrap_or_default();
                diags.push(Diagnostic::at_line(*line, format!("question `{qid}` is not enabled (needs `{gate}`)")));
            }
        }
    }
    if diags.is_empty() {
        Ok(Document { headers: out_headers, session })
    } else {
        diags.sort_by_key(|d| d.location.trim_start_matches("line ").parse::<usize>().unwrap_or(0));
        Err(diags)
    }
}

pub fn parse_session(tax: &Taxonomy, text: &str) -> Result<Session, Vec<Diagnostic>> {
    parse_document(tax, text, &[]).map(|d| d.session)
}

/// Canonical session text: one line per answer in display order.
pub fn format_session(tax: &Taxonomy, session: &Session) -> String {
    let mut out = String::new();
    for q in tax.questions() {
        if let Some(keys) = session.get(&q.id) {
            let ordered: Vec<&str> = q.options.iter().filter(|o| keys.contains(&o.key)).map(|o| o.key.as_str()).collect();
            let _ = writeln!(out, "{} = {}", q.id, ordered.join(","));
        }
    }
    out
}
