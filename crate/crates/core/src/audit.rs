//! Case-study audits: does the method a study used fit the study's own
//! description, and what would have fit better?

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::diagnostic::Diagnostic;
use crate::engine::{self, AppliesTo, NearMatch, Warning};
use crate::feature::FeatureId;
use crate::method_db::MethodDb;
use crate::session::{parse_document, Session};
use crate::taxonomy::Taxonomy;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseStudy {
    pub id: String,
    pub citation: String,
    pub chosen_method: String,
    pub session: Session,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

/// Session format plus `case:`, `citation:` and `chosen:` headers.
pub fn parse_case(tax: &Taxonomy, text: &str) -> Result<CaseStudy, Vec<Diagnostic>> {
    let doc = parse_document(tax, text, &["case", "citation", "chosen"])?;
    let mut diags = Vec::new();
    let mut get = |name: &str| -> String {
        let found: Vec<&(String, String, usize)> = doc.headers.iter().filter(|(n, _, _)| n == name).collect();
        match found.as_slice() {
            [one] => one.1.clone(),
            [] => {
                diags.push(Diagnostic::error("header", format!("missing `{name}:` header")));
                String::new()
            }
            [_, dup, ..] => {
                diags.push(Diagnostic::at_line(dup.2, format!("repeated `{name}:` header")));
                String::new()
            }
        }
    };
    let id = get("case");
    let citation = get("citation");
    let chosen_method = get("chosen");
    if diags.is_empty() {
        Ok(CaseStudy { id, citation, chosen_method, session: doc.session })
    } else {
        Err(diags)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub case: String,
    pub citation: String,
    pub chosen: String,
    pub chosen_is_complete_match: bool,
    pub chosen_missed: Vec<FeatureId>,
    pub complete_matches: Vec<String>,
    /// Every method at the smallest miss count, filled only when there is no
    /// complete match.
    pub nearest_alternatives: Vec<NearMatch>,
    pub warnings: Vec<Warning>,
}

pub fn audit_case(db: &MethodDb, tax: &Taxonomy, case: &CaseStudy) -> Result<AuditReport, AuditError> {
    let chosen_missed = engine::missed_features(db, tax, &case.session, &case.chosen_method)
        .map_err(|_| AuditError::UnknownMethod(case.chosen_method.clone()))?;
    let complete_matches = engine::matching_methods(db, tax, &case.session);
    let mut nearest_alternatives = Vec::new();
    if complete_matches.is_empty() {
        let all = engine::closest_match(db, tax, &case.session, &BTreeSet::new(), db.len())
            .expect("empty binding is always valid");
        if let Some(best) = all.first().map(|n| n.miss_count) {
            nearest_alternatives = all.into_iter().take_while(|n| n.miss_count == best).collect();
        }
    }
    let advised: Vec<String> = if complete_matches.is_empty() {
        nearest_alternatives.iter().map(|n| n.method.clone()).collect()
    } else {
        complete_matches.clone()
    };
    let warnings = engine::recommendation_warnings(tax, &case.session, &advised, db);
    Ok(AuditReport {
        case: case.id.clone(),
        citation: case.citation.clone(),
        chosen: case.chosen_method.clone(),
        chosen_is_complete_match: chosen_missed.is_empty(),
        chosen_missed,
        complete_matches,
        nearest_alternatives,
        warnings,
    })
}

fn method_name<'a>(db: &'a MethodDb, id: &'a str) -> &'a str {
    db.get(id).map(|m| m.name.as_str()).unwrap_or(id)
}

fn label(tax: &Taxonomy, f: &FeatureId) -> String {
    tax.feature_label(f).unwrap_or_else(|| f.to_string())
}

/// Plain-text report, one block per case.
pub fn render_report(report: &AuditReport, tax: &Taxonomy, db: &MethodDb) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Case: {}", report.case);
    let _ = writeln!(out, "Citation: {}", report.citation);
    let _ = writeln!(out, "Chosen method: {} ({})", method_name(db, &report.chosen), report.chosen);
    let verdict = if report.chosen_is_complete_match { "Complete match" } else { "Mismatch" };
    let _ = writeln!(out, "Verdict: {verdict}");
    let _ = writeln!(out, "Missed: {}", report.chosen_missed.len());
    for f in &report.chosen_missed {
        let _ = writeln!(out, "  - {}", label(tax, f));
    }
    if report.complete_matches.is_empty() {
        out.push_str("Complete matches: none\n");
    } else {
        let names: Vec<&str> = report.complete_matches.iter().map(|id| method_name(db, id)).collect();
        let _ = writeln!(out, "Complete matches: {}", names.join(", "));
    }
    if let Some(first) = report.nearest_alternatives.first() {
        let _ = writeln!(out, "Nearest alternatives (missed {} each):", first.miss_count);
        for n in &report.nearest_alternatives {
            let labels: Vec<String> = n.missed.iter().map(|f| label(tax, f)).collect();
            let _ = writeln!(out, "  - {} [{}]", n.name, labels.join("; "));
        }
    }
    for w in &report.warnings {
        let scope = match &w.applies_to {
            AppliesTo::All => "all methods".to_string(),
            AppliesTo::Methods(ids) => ids.iter().map(|id| method_name(db, id)).collect::<Vec<_>>().join(", "),
        };
        let _ = writeln!(out, "Warning {} ({scope}): {}", w.kind.code(), w.message);
    }
    out
}
