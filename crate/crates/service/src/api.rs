//! The service facade: every operation is a thin wrapper over an engine call
//! on the stored session. The HTTP layer only translates requests.

use std::collections::BTreeSet;
use std::sync::Arc;

use mcda_mss::{
    answer, audit_case, binding_feature_counts, closest_match, option_counts, parse_case, recommend,
    recommendation_warnings, render_report, AuditError, AuditReport, Combinator, EngineError, FeatureId,
    MethodDb, MethodProfile, NearMatch, Question, Recommendation, SelectMode, Selection, SelectivityOptions,
    Session, Taxonomy, Warning,
};
use serde::Serialize;

use crate::store::{SessionRecord, SessionStore, StoreError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<&'static str>,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), field: None }
    }

    pub fn with_field(mut self, field: &'static str) -> Self {
        self.field = Some(field);
        self
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::NotFound(_) => ApiError::new(404, "session_not_found", e.to_string()),
            StoreError::Conflict { .. } => ApiError::new(409, "revision_conflict", e.to_string()).with_field("revision"),
            StoreError::Corrupt { .. } => ApiError::new(500, "session_corrupt", e.to_string()),
            StoreError::Io(_) => ApiError::new(500, "storage_failure", e.to_string()),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::UnknownQuestion(_) => "unknown_question",
            EngineError::UnknownOption { .. } => "unknown_option",
            EngineError::Disabled(_) => "question_disabled",
            EngineError::EmptySelection(_) => "empty_selection",
            EngineError::NotMulti(_) => "single_option_only",
            EngineError::NotSelected(_) => "binding_not_selected",
            EngineError::UnknownMethod(_) => "unknown_method",
        };
        ApiError::new(422, code, e.to_string()).with_field(e.field())
    }
}

fn mode_name(mode: SelectMode) -> &'static str {
    match mode {
        SelectMode::Single => "single",
        SelectMode::Multi(Combinator::Any) => "multi_any",
        SelectMode::Multi(Combinator::All) => "multi_all",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OptionState {
    pub key: String,
    pub label: String,
    pub info: Option<String>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuestionState {
    pub id: String,
    pub section: String,
    pub title: String,
    pub prompt: Option<String>,
    pub info: Option<String>,
    pub mode: &'static str,
    pub options: Vec<OptionState>,
    pub dont_know_count: usize,
    /// Selected keys in display order, `None` for "don't know".
    pub answer: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionState {
    pub id: String,
    pub revision: u64,
    pub created: u64,
    pub updated: u64,
    pub answers: Session,
    pub questions: Vec<QuestionState>,
    pub no_complete_match: bool,
    pub recommendation: Option<Recommendation>,
    pub warnings: Vec<Warning>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeatureCount {
    pub feature: FeatureId,
    pub label: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BindingResult {
    pub feature_counts: Vec<FeatureCount>,
    pub near_matches: Vec<NearMatch>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelectiveEntry {
    pub question: String,
    pub title: String,
    pub worst_case: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditResult {
    #[serde(flatten)]
    pub report: AuditReport,
    pub rendered: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MethodSummary {
    pub id: String,
    pub name: String,
    pub citation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OptionDoc {
    pub key: String,
    pub label: String,
    pub feature: FeatureId,
    pub info: Option<String>,
    pub enables: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuestionDoc {
    pub id: String,
    pub title: String,
    pub prompt: Option<String>,
    pub info: Option<String>,
    pub mode: &'static str,
    pub gate: Option<FeatureId>,
    pub options: Vec<OptionDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SectionDoc {
    pub code: String,
    pub title: String,
    pub info: Option<String>,
    pub questions: Vec<QuestionDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TaxonomyDoc {
    pub fingerprint: String,
    pub feature_count: usize,
    pub sections: Vec<SectionDoc>,
}

pub const DEFAULT_SELECTIVE_K: usize = 5;

pub struct Service {
    pub tax: Arc<Taxonomy>,
    pub db: Arc<MethodDb>,
    pub store: SessionStore,
}

impl Service {
    pub fn new(tax: Arc<Taxonomy>, db: Arc<MethodDb>, data_dir: impl Into<std::path::PathBuf>) -> Result<Self, ApiError> {
        let store = SessionStore::open(data_dir, tax.clone())?;
        Ok(Service { tax, db, store })
    }

    pub fn create_session(&self) -> Result<SessionState, ApiError> {
        let rec = self.store.create()?;
        Ok(self.state(&rec))
    }

    pub fn get_state(&self, id: &str) -> Result<SessionState, ApiError> {
        Ok(self.state(&self.store.get(id)?))
    }

    pub fn submit_answer(&self, id: &str, revision: u64, question: &str, selection: &Selection) -> Result<SessionState, ApiError> {
        let rec = self.store.update(id, revision, |s| answer(&self.tax, s, question, selection).map_err(ApiError::from))?;
        Ok(self.state(&rec))
    }

    pub fn binding_search(&self, id: &str, binding: &[String], limit: Option<usize>) -> Result<BindingResult, ApiError> {
        let mut set = BTreeSet::new();
        for raw in binding {
            let f = FeatureId::parse(raw)
                .map_err(|e| ApiError::new(422, "invalid_feature", format!("`{raw}`: {e}")).with_field("binding"))?;
            set.insert(f);
        }
        let rec = self.store.get(id)?;
        let counts = binding_feature_counts(&self.db, &self.tax, &rec.session, &set)?;
        let near_matches = closest_match(&self.db, &self.tax, &rec.session, &set, limit.unwrap_or(self.db.len()))?;
        let feature_counts = counts
            .into_iter()
            .map(|(feature, count)| FeatureCount { label: self.tax.feature_label(&feature).unwrap_or_default(), feature, count })
            .collect();
        Ok(BindingResult { feature_counts, near_matches })
    }

    pub fn selective_questions(&self, id: &str, k: usize) -> Result<Vec<SelectiveEntry>, ApiError> {
        let rec = self.store.get(id)?;
        let ranked = mcda_mss::most_selective_questions(&self.db, &self.tax, &rec.session, k, SelectivityOptions::default());
        Ok(ranked
            .into_iter()
            .map(|s| SelectiveEntry {
                title: self.tax.question(&s.question).map(|q| q.title.clone()).unwrap_or_default(),
                question: s.question,
                worst_case: s.worst_case,
            })
            .collect())
    }

    pub fn run_audit(&self, case_text: &str) -> Result<AuditResult, ApiError> {
        let case = parse_case(&self.tax, case_text).map_err(|d| {
            let lines: Vec<String> = d.iter().map(|x| x.to_string()).collect();
            ApiError::new(422, "invalid_case", lines.join("; ")).with_field("case")
        })?;
        let report = audit_case(&self.db, &self.tax, &case).map_err(|e| match e {
            AuditError::UnknownMethod(_) => ApiError::new(422, "unknown_method", e.to_string()).with_field("chosen"),
        })?;
        let rendered = render_report(&report, &self.tax, &self.db);
        Ok(AuditResult { report, rendered })
    }

    pub fn methods(&self) -> Vec<MethodSummary> {
        self.db
            .methods
            .iter()
            .map(|m| MethodSummary { id: m.id.clone(), name: m.name.clone(), citation: m.citation.clone() })
            .collect()
    }

    pub fn method(&self, id: &str) -> Result<&MethodProfile, ApiError> {
        self.db.get(id).ok_or_else(|| ApiError::new(404, "method_not_found", format!("no method `{id}`")))
    }

    pub fn taxonomy(&self) -> TaxonomyDoc {
        let sections = self
            .tax
            .sections()
            .iter()
            .map(|s| SectionDoc {
                code: s.code.clone(),
                title: s.title.clone(),
                info: s.info.clone(),
                questions: s.questions.iter().filter_map(|id| self.tax.question(id)).map(question_doc).collect(),
            })
            .collect();
        TaxonomyDoc { fingerprint: self.tax.fingerprint().to_string(), feature_count: self.tax.feature_count(), sections }
    }

    fn state(&self, rec: &SessionRecord) -> SessionState {
        let s = &rec.session;
        let questions = self
            .tax
            .enabled_questions(s)
            .into_iter()
            .filter_map(|id| self.tax.question(id))
            .map(|q| {
                let counts = option_counts(&self.db, &self.tax, s, &q.id).expect("enabled question");
                let selected = s.get(&q.id);
                QuestionState {
                    id: q.id.clone(),
                    section: q.section.clone(),
                    title: q.title.clone(),
                    prompt: q.prompt.clone(),
                    info: q.info.clone(),
                    mode: mode_name(q.mode),
                    options: q
                        .options
                        .iter()
                        .map(|o| OptionState {
                            key: o.key.clone(),
                            label: o.label.clone(),
                            info: o.info.clone(),
                            count: counts.get(&o.key).unwrap_or(0),
                        })
                        .collect(),
                    dont_know_count: counts.dont_know,
                    answer: selected.map(|keys| {
                        q.options.iter().filter(|o| keys.contains(&o.key)).map(|o| o.key.clone()).collect()
                    }),
                }
            })
            .collect();
        let recommendation = recommend(&self.db, &self.tax, s);
        let warnings = match &recommendation {
            Some(r) => r.warnings.clone(),
            None => recommendation_warnings(&self.tax, s, &[], &self.db),
        };
        SessionState {
            id: rec.id.clone(),
            revision: rec.revision,
            created: rec.created,
            updated: rec.updated,
            answers: s.clone(),
            questions,
            no_complete_match: recommendation.is_none(),
            recommendation,
            warnings,
        }
    }
}

fn question_doc(q: &Question) -> QuestionDoc {
    QuestionDoc {
        id: q.id.clone(),
        title: q.title.clone(),
        prompt: q.prompt.clone(),
        info: q.info.clone(),
        mode: mode_name(q.mode),
        gate: q.gate.clone(),
        options: q
            .options
            .iter()
            .map(|o| OptionDoc {
                key: o.key.clone(),
                label: o.label.clone(),
                feature: o.feature.clone(),
                info: o.info.clone(),
                enables: o.enables.clone(),
            })
            .collect(),
    }
}
