//! The shipped taxonomy, method database, literature cases and example
//! sessions, embedded at compile time.

use crate::diagnostic::Diagnostic;
use crate::method_db::{load_closed_db, MethodDb};
use crate::taxonomy::{parse_taxonomy, Taxonomy};

macro_rules! data {
    ($path:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/", $path))
    };
}

pub const TAXONOMY: &str = data!("taxonomy.mss");
pub const METHODS: &str = data!("methods.db");

/// `(file name, text)` for every literature case.
pub const CASES: &[(&str, &str)] = &[
    ("case-01.case", data!("cases/case-01.case")),
    ("case-02.case", data!("cases/case-02.case")),
    ("case-03.case", data!("cases/case-03.case")),
    ("case-04.case", data!("cases/case-04.case")),
    ("case-05.case", data!("cases/case-05.case")),
    ("case-06.case", data!("cases/case-06.case")),
    ("case-07.case", data!("cases/case-07.case")),
    ("case-08.case", data!("cases/case-08.case")),
    ("case-09.case", data!("cases/case-09.case")),
    ("case-10.case", data!("cases/case-10.case")),
];

/// Example sessions: the four decision-rule examples and the no-match demo.
pub const SESSIONS: &[(&str, &str)] = &[
    ("rule-1-grip.session", data!("sessions/rule-1-grip.session")),
    ("rule-2-ror-utadis.session", data!("sessions/rule-2-ror-utadis.session")),
    ("rule-3-mcuc-csa.session", data!("sessions/rule-3-mcuc-csa.session")),
    ("rule-4-electre-i.session", data!("sessions/rule-4-electre-i.session")),
    ("no-match.session", data!("sessions/no-match.session")),
];

pub fn case_text(name: &str) -> Option<&'static str> {
    CASES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn session_text(name: &str) -> Option<&'static str> {
    SESSIONS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn taxonomy() -> Result<Taxonomy, Vec<Diagnostic>> {
    parse_taxonomy(TAXONOMY)
}

/// Seed taxonomy and closed seed db.
pub fn load() -> Result<(Taxonomy, MethodDb), Vec<Diagnostic>> {
    let tax = taxonomy()?;
    let (db, _) = load_closed_db(&tax, METHODS)?;
    Ok((tax, db))
}
