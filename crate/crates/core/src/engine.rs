//! Matching, counting, relaxation and question selection over a closed db.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::feature::FeatureId;
use crate::method_db::{MethodDb, MethodProfile};
use crate::session::Session;
use crate::taxonomy::{Combinator, SelectMode, Taxonomy};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("question `{question}` has no option `{option}`")]
    UnknownOption { question: String, option: String },
    #[error("question `{0}` is not enabled by the current answers")]
    Disabled(String),
    #[error("question `{0}` needs at least one option")]
    EmptySelection(String),
    #[error("question `{0}` accepts a single option")]
    NotMulti(String),
    #[error("`{0}` is not a selected feature of this session")]
    NotSelected(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

impl EngineError {
    /// The request field a client should highlight.
    pub fn field(&self) -> &'static str {
        match self {
            EngineError::UnknownQuestion(_) | EngineError::Disabled(_) => "question",
            EngineError::UnknownOption { .. } | EngineError::EmptySelection(_) | EngineError::NotMulti(_) => "selection",
            EngineError::NotSelected(_) => "binding",
            EngineError::UnknownMethod(_) => "method",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    Set(Vec<String>),
    Clear,
}

impl Selection {
    pub fn one(key: &str) -> Self {
        Selection::Set(vec![key.to_string()])
    }
}

/// Sets or clears one answer, then drops answers whose questions are no longer
/// enabled (transitively).
pub fn answer(tax: &Taxonomy, session: &Session, question: &str, selection: &Selection) -> Result<Session, EngineError> {
    let q = tax.question(question).ok_or_else(|| EngineError::UnknownQuestion(question.to_string()))?;
    if !tax.is_enabled(session, question) {
        return Err(EngineError::Disabled(question.to_string()));
    }
    let mut next = session.clone();
    match selection {
        Selection::Clear => {
            next.remove_raw(question);
        }
        Selection::Set(keys) => {
            if keys.is_empty() {
                return Err(EngineError::EmptySelection(question.to_string()));
            }
            for k in keys {
                if q.option(k).is_none() {
                    return Err(EngineError::UnknownOption { question: question.to_string(), option: k.clone() });
                }
            }
            let set: BTreeSet<&String> = keys.iter().collect();
            if q.mode == SelectMode::Single && set.len() > 1 {
                return Err(EngineError::NotMulti(question.to_string()));
            }
            next.set_raw(question, set.into_iter().cloned());
        }
    }
    prune(tax, &mut next);
    Ok(next)
}

fn prune(tax: &Taxonomy, session: &mut Session) {
    let flags = tax.enabled_flags(session);
    let stale: Vec<String> = tax
        .questions()
        .iter()
        .zip(flags)
        .filter(|(q, on)| !on && session.is_answered(&q.id))
        .map(|(q, _)| q.id.clone())
        .collect();
    for q in stale {
        session.remove_raw(&q);
    }
}

/// One answered question as a condition on a method.
struct Requirement {
    features: Vec<FeatureId>,
    any: bool,
}

impl Requirement {
    fn holds(&self, m: &MethodProfile) -> bool {
        if self.any {
            self.features.iter().any(|f| m.supports(f))
        } else {
            self.features.iter().all(|f| m.supports(f))
        }
    }

    /// Features counted as missed. For ANY questions the whole selection is
    /// missed only when none of it is supported.
    fn missed<'a>(&'a self, m: &MethodProfile, out: &mut Vec<&'a FeatureId>) {
        if self.any {
            if !self.holds(m) {
                out.extend(self.features.iter());
            }
        } else {
            out.extend(self.features.iter().filter(|f| !m.supports(f)));
        }
    }
}

fn requirements(tax: &Taxonomy, session: &Session) -> Vec<Requirement> {
    let mut out = Vec::new();
    for q in tax.questions() {
        let Some(keys) = session.get(&q.id) else { continue };
        let features: Vec<FeatureId> = q.options.iter().filter(|o| keys.contains(&o.key)).map(|o| o.feature.clone()).collect();
        let any = matches!(q.mode, SelectMode::Multi(Combinator::Any));
        out.push(Requirement { features, any });
    }
    out
}

fn matching<'a>(db: &'a MethodDb, reqs: &[Requirement]) -> Vec<&'a MethodProfile> {
    db.methods.iter().filter(|m| reqs.iter().all(|r| r.holds(m))).collect()
}

/// Ids of methods that satisfy every answer, in db order.
pub fn matching_methods(db: &MethodDb, tax: &Taxonomy, session: &Session) -> Vec<String> {
    let reqs = requirements(tax, session);
    matching(db, &reqs).into_iter().map(|m| m.id.clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OptionCounts {
    pub question: String,
    /// Option key and count, in option order.
    pub counts: Vec<(String, usize)>,
    pub dont_know: usize,
}

impl OptionCounts {
    pub fn get(&self, key: &str) -> Option<usize> {
        self.counts.iter().find(|(k, _)| k == key).map(|(_, c)| *c)
    }
}

/// Counts per option of `question`, computed as if it were unanswered.
pub fn option_counts(db: &MethodDb, tax: &Taxonomy, session: &Session, question: &str) -> Result<OptionCounts, EngineError> {
    let q = tax.question(question).ok_or_else(|| EngineError::UnknownQuestion(question.to_string()))?;
    if !tax.is_enabled(session, question) {
        return Err(EngineError::Disabled(question.to_string()));
    }
    let base = answer(tax, session, question, &Selection::Clear)?;
    let pool = matching(db, &requirements(tax, &base));
    let counts = q
        .options
        .iter()
        .map(|o| (o.key.clone(), pool.iter().filter(|m| m.supports(&o.feature)).count()))
        .collect();
    Ok(OptionCounts { question: question.to_string(), counts, dont_know: pool.len() })
}

fn check_binding(session: &Session, binding: &BTreeSet<FeatureId>) -> Result<(), EngineError> {
    match binding.iter().find(|f| !session.is_selected(f)) {
        Some(f) => Err(EngineError::NotSelected(f.to_string())),
        None => Ok(()),
    }
}

/// For each selected feature, the number of methods supporting it together
/// with every binding feature.
pub fn binding_feature_counts(
    db: &MethodDb,
    tax: &Taxonomy,
    session: &Session,
    binding: &BTreeSet<FeatureId>,
) -> Result<Vec<(FeatureId, usize)>, EngineError> {
    check_binding(session, binding)?;
    let pool: Vec<&MethodProfile> = db.methods.iter().filter(|m| binding.iter().all(|f| m.supports(f))).collect();
    Ok(session
        .selected_features(tax)
        .into_iter()
        .map(|f| {
            let n = pool.iter().filter(|m| m.supports(&f)).count();
            (f, n)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NearMatch {
    pub method: String,
    pub name: String,
    /// Missed features in display order.
    pub missed: Vec<FeatureId>,
    pub miss_count: usize,
}

fn near_match(tax: &Taxonomy, reqs: &[Requirement], m: &MethodProfile) -> NearMatch {
    let mut missed = Vec::new();
    for r in reqs {
        r.missed(m, &mut missed);
    }
    let mut missed: Vec<FeatureId> = missed.into_iter().cloned().collect();
    missed.sort_by_key(|f| display_key(tax, f));
    NearMatch { method: m.id.clone(), name: m.name.clone(), miss_count: missed.len(), missed }
}

fn display_key(tax: &Taxonomy, f: &FeatureId) -> (usize, usize) {
    let qi = tax.position(f.question()).unwrap_or(usize::MAX);
    let oi = tax.question(f.question()).and_then(|q| q.options.iter().position(|o| o.key == f.key())).unwrap_or(usize::MAX);
    (qi, oi)
}

/// Methods supporting every binding feature, ranked by how many other
/// selected features they miss, then by name.
pub fn closest_match(
    db: &MethodDb,
    tax: &Taxonomy,
    session: &Session,
    binding: &BTreeSet<FeatureId>,
    limit: usize,
) -> Result<Vec<NearMatch>, EngineError> {
    check_binding(session, binding)?;
    let reqs = requirements(tax, session);
    let mut out: Vec<NearMatch> = db
        .methods
        .iter()
        .filter(|m| binding.iter().all(|f| m.supports(f)))
        .map(|m| near_match(tax, &reqs, m))
        .collect();
    out.sort_by(|a, b| (a.miss_count, &a.name, &a.method).cmp(&(b.miss_count, &b.name, &b.method)));
    out.truncate(limit);
    Ok(out)
}

/// Missed features of one method against the whole session.
pub fn missed_features(db: &MethodDb, tax: &Taxonomy, session: &Session, method: &str) -> Result<Vec<FeatureId>, EngineError> {
    let m = db.get(method).ok_or_else(|| EngineError::UnknownMethod(method.to_string()))?;
    Ok(near_match(tax, &requirements(tax, session), m).missed)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelectivityOptions {
    /// Leave options that would match nothing out of the worst case.
    pub exclude_zero_count_options: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelectiveQuestion {
    pub question: String,
    pub worst_case: usize,
}

/// Enabled, unanswered questions ordered by the largest match count any
/// single-option answer could leave (ascending, ties in display order).
pub fn most_selective_questions(
    db: &MethodDb,
    tax: &Taxonomy,
    session: &Session,
    k: usize,
    opts: SelectivityOptions,
) -> Vec<SelectiveQuestion> {
    let pool = matching(db, &requirements(tax, session));
    let flags = tax.enabled_flags(session);
    let mut ranked: Vec<(usize, usize, &str)> = Vec::new();
    for (i, (q, on)) in tax.questions().iter().zip(flags).enumerate() {
        if !on || session.is_answered(&q.id) {
            continue;
        }
        let worst = q
            .options
            .iter()
            .map(|o| pool.iter().filter(|m| m.supports(&o.feature)).count())
            .filter(|&c| !(opts.exclude_zero_count_options && c == 0))
            .max()
            .unwrap_or(0);
        ranked.push((worst, i, &q.id));
    }
    ranked.sort();
    ranked.into_iter().take(k).map(|(w, _, id)| SelectiveQuestion { question: id.to_string(), worst_case: w }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WarningKind {
    IncrementalRecommendationMayChange,
    IncompleteCriteriaCaution,
}

impl WarningKind {
    pub fn code(self) -> &'static str {
        match self {
            WarningKind::IncrementalRecommendationMayChange => "INCREMENTAL_RECOMMENDATION_MAY_CHANGE",
            WarningKind::IncompleteCriteriaCaution => "INCOMPLETE_CRITERIA_CAUTION",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum AppliesTo {
    #[serde(serialize_with = "ser_all")]
    All,
    Methods(Vec<String>),
}

fn ser_all<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str("ALL")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub applies_to: AppliesTo,
    pub message: String,
}

const INCREMENTAL_TRIGGERS: &[&str] = &["c.1.1/ranking", "c.1.1/choice", "c.1.1/sorting/cardinality/with-constraints", "c.1.1/clustering"];

pub fn recommendation_warnings(_tax: &Taxonomy, session: &Session, recommended: &[String], db: &MethodDb) -> Vec<Warning> {
    let sel = |s: &str| FeatureId::parse(s).map(|f| session.is_selected(&f)).unwrap_or(false);
    let mut out = Vec::new();
    if sel("c.1.2/incremental") && INCREMENTAL_TRIGGERS.iter().any(|t| sel(t)) {
        out.push(Warning {
            kind: WarningKind::IncrementalRecommendationMayChange,
            applies_to: AppliesTo::All,
            message: "The set of alternatives is incremental: the recommendation produced by these methods may change when new alternatives are added."
                .into(),
        });
    }
    if sel("c.1.6/incomplete") {
        let rules = FeatureId::new("c.2.8/yes/mode", "rules");
        let flagged: Vec<String> = recommended
            .iter()
            .filter(|id| db.get(id).is_some_and(|m| !m.supports(&rules)))
            .cloned()
            .collect();
        if !flagged.is_empty() {
            out.push(Warning {
                kind: WarningKind::IncompleteCriteriaCaution,
                applies_to: AppliesTo::Methods(flagged),
                message: "The criteria set is incomplete: methods that are not based on decision rules should only be used once all relevant criteria are accounted for."
                    .into(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub matched: Vec<String>,
    pub warnings: Vec<Warning>,
}

/// `None` means no method satisfies every answer; callers should offer a
/// binding search.
pub fn recommend(db: &MethodDb, tax: &Taxonomy, session: &Session) -> Option<Recommendation> {
    let matched = matching_methods(db, tax, session);
    if matched.is_empty() {
        return None;
    }
    let warnings = recommendation_warnings(tax, session, &matched, db);
    Some(Recommendation { matched, warnings })
}
