//! Method selection support for multiple-criteria decision analysis.
//!
//! A [`Taxonomy`] describes a decision problem as a forest of gated questions.
//! A [`MethodDb`] records which answer options each method supports. The
//! [`engine`] filters methods against a partially answered [`Session`], ranks
//! near matches when nothing fits, and picks the most selective next question.

pub mod audit;
pub mod diagnostic;
pub mod engine;
pub mod feature;
pub mod method_db;
pub mod seed;
pub mod session;
pub mod taxonomy;

pub use audit::{audit_case, parse_case, render_report, AuditError, AuditReport, CaseStudy};
pub use diagnostic::{Diagnostic, Severity};
pub use engine::{
    answer, binding_feature_counts, closest_match, matching_methods, most_selective_questions,
    option_counts, recommend, recommendation_warnings, AppliesTo, EngineError, NearMatch,
    OptionCounts, Recommendation, SelectiveQuestion, Selection, SelectivityOptions, Warning,
    WarningKind,
};
pub use feature::FeatureId;
pub use method_db::{
    all_closure_rules, apply_closure, default_closure_rules, load_closed_db, export_dense_matrix, export_method_db,
    import_dense_matrix, parse_method_db, structural_closure_rules, validate_db, ClosureRule,
    MethodDb, MethodProfile,
};
pub use session::{format_session, parse_session, Session};
pub use taxonomy::{parse_taxonomy, Combinator, OptionDef, Question, SelectMode, Taxonomy};
