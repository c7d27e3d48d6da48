//! Method capability profiles, closure rules and the two file formats.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::feature::{is_key, FeatureId};
use crate::taxonomy::Taxonomy;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MethodProfile {
    pub id: String,
    pub name: String,
    pub citation: String,
    pub description: String,
    pub supports: BTreeSet<FeatureId>,
}

impl MethodProfile {
    pub fn supports(&self, f: &FeatureId) -> bool {
        self.supports.contains(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDb {
    pub methods: Vec<MethodProfile>,
    pub closure_applied: bool,
    pub taxonomy_fingerprint: String,
}

impl MethodDb {
    pub fn empty(tax: &Taxonomy) -> Self {
        MethodDb { methods: Vec::new(), closure_applied: false, taxonomy_fingerprint: tax.fingerprint().to_string() }
    }

    pub fn get(&self, id: &str) -> Option<&MethodProfile> {
        self.methods.iter().find(|m| m.id == id)
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }
}

/// "A method supporting `if_supports` also supports `then_supports`."
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureRule {
    pub if_supports: FeatureId,
    pub then_supports: FeatureId,
    pub rationale: String,
}

impl ClosureRule {
    pub fn new(tax: &Taxonomy, if_supports: &str, then_supports: &str, rationale: &str) -> Result<Self, Diagnostic> {
        let loc = format!("rule {if_supports} => {then_supports}");
        let a = FeatureId::parse(if_supports).map_err(|e| Diagnostic::error(&loc, e))?;
        let b = FeatureId::parse(then_supports).map_err(|e| Diagnostic::error(&loc, e))?;
        for f in [&a, &b] {
            if !tax.contains(f) {
                return Err(Diagnostic::error(&loc, format!("unknown feature `{f}`")));
            }
        }
        if a == b {
            return Err(Diagnostic::error(&loc, "rule implies itself"));
        }
        Ok(ClosureRule { if_supports: a, then_supports: b, rationale: rationale.to_string() })
    }
}

fn is_problem_statement(f: &FeatureId) -> bool {
    let q = f.question();
    q == "c.1.1" || q.starts_with("c.1.1/")
}

// ---------------------------------------------------------------------------
// Sparse format

/// Parses the sparse record format. The result has no closure applied.
pub fn parse_method_db(tax: &Taxonomy, text: &str) -> Result<MethodDb, Vec<Diagnostic>> {
    struct Pending {
        profile: MethodProfile,
        line: usize,
        seen: HashSet<&'static str>,
    }
    let mut diags = Vec::new();
    let mut done: Vec<(MethodProfile, usize)> = Vec::new();
    let mut cur: Option<Pending> = None;
    let mut in_supports = false;

    let add_features = |p: &mut Pending, list: &str, line: usize, diags: &mut Vec<Diagnostic>| {
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match FeatureId::parse(item) {
                Ok(f) if tax.contains(&f) => {
                    if !p.profile.supports.insert(f) {
                        diags.push(Diagnostic::warning(format!("line {line}"), format!("`{item}` listed twice for `{}`", p.profile.id)));
                    }
                }
                _ => diags.push(Diagnostic::at_line(line, format!("unknown feature path `{item}`"))),
            }
        }
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let indented = content.starts_with(' ') || content.starts_with('\t');
        let t = content.trim();

        if let Some(rest) = t.strip_prefix("method ").filter(|_| !indented) {
            if let Some(p) = cur.take() {
                done.push((p.profile, p.line));
            }
            in_supports = false;
            let id = rest.trim();
            if !is_key(id) {
                diags.push(Diagnostic::at_line(line, format!("invalid method id `{id}`")));
            }
            cur = Some(Pending {
                profile: MethodProfile {
                    id: id.to_string(),
                    name: id.to_string(),
                    citation: String::new(),
                    description: String::new(),
                    supports: BTreeSet::new(),
                },
                line,
                seen: HashSet::new(),
            });
            continue;
        }

        let Some(p) = cur.as_mut() else {
            diags.push(Diagnostic::at_line(line, "expected `method <id>`"));
            continue;
        };

        if in_supports && indented {
            add_features(p, t, line, &mut diags);
            continue;
        }
        in_supports = false;

        let Some((field, value)) = t.split_once(':') else {
            diags.push(Diagnostic::at_line(line, format!("expected `field: value`, found `{t}`")));
            continue;
        };
        // Only the text before a `#` was kept; free-text fields use the raw line.
        let raw_value = raw.trim().split_once(':').map(|(_, v)| v.trim()).unwrap_or("");
        let key: &'static str = match field.trim() {
            "name" => "name",
            "ref" => "ref",
            "desc" => "desc",
            "supports" => "supports",
            other => {
                diags.push(Diagnostic::at_line(line, format!("unknown field `{other}`")));
                continue;
            }
        };
        if !p.seen.insert(key) {
            diags.push(Diagnostic::at_line(line, format!("field `{key}` repeated for `{}`", p.profile.id)));
            continue;
        }
        match key {
            "name" => p.profile.name = raw_value.to_string(),
            "ref" => p.profile.citation = raw_value.to_string(),
            "desc" => p.profile.description = raw_value.to_string(),
            _ => {
                in_supports = true;
                add_features(p, value, line, &mut diags);
            }
        }
    }
    if let Some(p) = cur.take() {
        done.push((p.profile, p.line));
    }

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut methods = Vec::new();
    for (m, line) in done {
        if let Some(prev) = ids.insert(m.id.clone(), line) {
            diags.push(Diagnostic::at_line(line, format!("duplicate method id `{}` (first at line {prev})", m.id)));
            continue;
        }
        if !m.supports.iter().any(is_problem_statement) {
            diags.push(Diagnostic::at_line(line, format!("method `{}` supports no problem statement (c.1.1)", m.id)));
        }
        methods.push(m);
    }

    if has_errors(&diags) {
        return Err(diags);
    }
    Ok(MethodDb { methods, closure_applied: false, taxonomy_fingerprint: tax.fingerprint().to_string() })
}

/// Canonical sparse text. Features are listed in taxonomy display order.
pub fn export_method_db(tax: &Taxonomy, db: &MethodDb) -> String {
    let order = tax.all_features();
    let mut out = String::new();
    for (i, m) in db.methods.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "method {}", m.id);
        let _ = writeln!(out, "name: {}", m.name);
        if !m.citation.is_empty() {
            let _ = writeln!(out, "ref: {}", m.citation);
        }
        if !m.description.is_empty() {
            let _ = writeln!(out, "desc: {}", m.description);
        }
        out.push_str("supports:\n");
        for f in order.iter().filter(|f| m.supports.contains(f)) {
            let _ = writeln!(out, "  {f}");
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Dense format

pub fn import_dense_matrix(tax: &Taxonomy, matrix_text: &str) -> Result<MethodDb, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(matrix_text.as_bytes());
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Ok(MethodDb::empty(tax)),
        Some(Err(e)) => return Err(vec![Diagnostic::at_line(1, format!("malformed CSV: {e}"))]),
        Some(Ok(h)) => h,
    };
    if header.get(0).map(str::trim) != Some("method_id") {
        diags.push(Diagnostic::at_line(1, "first header cell must be `method_id`"));
    }
    let mut columns: Vec<Option<FeatureId>> = Vec::new();
    let mut seen = HashSet::new();
    for (c, cell) in header.iter().enumerate().skip(1) {
        let cell = cell.trim();
        match FeatureId::parse(cell) {
            Ok(f) if tax.contains(&f) => {
                if !seen.insert(f.clone()) {
                    diags.push(Diagnostic::error(format!("line 1, column {}", c + 1), format!("duplicate column `{cell}`")));
                }
                columns.push(Some(f));
            }
            _ => {
                diags.push(Diagnostic::error(format!("line 1, column {}", c + 1), format!("unknown column `{cell}`")));
                columns.push(None);
            }
        }
    }

    let mut methods = Vec::new();
    let mut ids: HashMap<String, u64> = HashMap::new();
    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                diags.push(Diagnostic::error("", format!("malformed CSV: {e}")));
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            diags.push(Diagnostic::error(format!("line {line}"), format!("row has {} cells, header has {}", rec.len(), header.len())));
            continue;
        }
        let id = rec.get(0).unwrap_or("").trim().to_string();
        if !is_key(&id) {
            diags.push(Diagnostic::error(format!("line {line}, column 1"), format!("invalid method id `{id}`")));
        }
        if let Some(prev) = ids.insert(id.clone(), line) {
            diags.push(Diagnostic::error(format!("line {line}"), format!("duplicate method id `{id}` (first at line {prev})")));
            continue;
        }
        let mut supports = BTreeSet::new();
        for (c, cell) in rec.iter().enumerate().skip(1) {
            match cell.trim() {
                "0" => {}
                "1" => {
                    if let Some(f) = &columns[c - 1] {
                        supports.insert(f.clone());
                    }
                }
                other => diags.push(Diagnostic::error(format!("line {line}, column {}", c + 1), format!("non-binary cell `{other}`"))),
            }
        }
        if !supports.iter().any(is_problem_statement) {
            diags.push(Diagnostic::error(format!("line {line}"), format!("method `{id}` supports no problem statement (c.1.1)")));
        }
        methods.push(MethodProfile { name: id.clone(), id, citation: String::new(), description: String::new(), supports });
    }

    if has_errors(&diags) {
        return Err(diags);
    }
    Ok(MethodDb { methods, closure_applied: false, taxonomy_fingerprint: tax.fingerprint().to_string() })
}

/// Dense CSV with one column per taxonomy feature in document order.
pub fn export_dense_matrix(tax: &Taxonomy, db: &MethodDb) -> String {
    let cols = tax.all_features();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let mut header = vec!["method_id".to_string()];
    header.extend(cols.iter().map(|f| f.to_string()));
    w.write_record(&header).expect("writing to memory");
    for m in &db.methods {
        let mut row = vec![m.id.clone()];
        row.extend(cols.iter().map(|f| if m.supports.contains(f) { "1".into() } else { "0".into() }));
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

// ---------------------------------------------------------------------------
// Closure

const DEFAULT_RULES: &[(&str, &str, &str)] = &[
    ("c.1.2/incremental", "c.1.2/stable", "methods that handle an incremental set of alternatives also handle a stable one"),
    ("c.1.3/hierarchical", "c.1.3/flat", "methods for hierarchical criteria also handle a flat criteria structure"),
    ("c.1.4/uncertain", "c.1.4/deterministic", "methods for uncertain performances also handle deterministic ones"),
    (
        "c.1.4/uncertain/type/per-alternative",
        "c.1.4/deterministic/type/per-alternative",
        "uncertain per-alternative performances degrade to deterministic per-alternative ones",
    ),
    (
        "c.1.4/uncertain/type/relative-comparison",
        "c.1.4/deterministic/type/relative-comparison",
        "uncertain relative comparisons degrade to deterministic relative comparisons",
    ),
    ("c.1.6/incomplete", "c.1.6/complete", "methods for an incomplete criteria set also work with a complete one"),
    (
        "c.3.1.1.1/yes/form/imprecise-pairwise-ratio",
        "c.3.1.1.1/yes/form/importance-coefficients-pairwise-ratio",
        "methods accepting imprecise weights also accept them in precise form",
    ),
    ("c.3.1.1.2/yes/type/indifference/imprecise", "c.3.1.1.2/yes/type/indifference/precise", "imprecise thresholds can also be given precisely"),
    ("c.3.1.1.2/yes/type/preference/imprecise", "c.3.1.1.2/yes/type/preference/precise", "imprecise thresholds can also be given precisely"),
    ("c.3.1.1.2/yes/type/veto/imprecise", "c.3.1.1.2/yes/type/veto/precise", "imprecise thresholds can also be given precisely"),
    (
        "c.3.1.1.4/yes/purpose/sorting/type/characteristic/number/single-imprecise",
        "c.3.1.1.4/yes/purpose/sorting/type/characteristic/number/single-precise",
        "imprecise sorting profiles can also be given precisely",
    ),
    (
        "c.3.1.1.4/yes/purpose/sorting/type/characteristic/number/multiple-imprecise",
        "c.3.1.1.4/yes/purpose/sorting/type/characteristic/number/multiple-precise",
        "imprecise sorting profiles can also be given precisely",
    ),
    (
        "c.3.1.1.4/yes/purpose/sorting/type/boundary/number/single-imprecise",
        "c.3.1.1.4/yes/purpose/sorting/type/boundary/number/single-precise",
        "imprecise sorting profiles can also be given precisely",
    ),
    (
        "c.3.1.1.4/yes/purpose/sorting/type/boundary/number/multiple-imprecise",
        "c.3.1.1.4/yes/purpose/sorting/type/boundary/number/multiple-precise",
        "imprecise sorting profiles can also be given precisely",
    ),
    ("c.3.3/accepted", "c.3.3/not-accepted", "methods accepting a confidence level also work without one"),
];

/// The modeling assumptions. Rules whose features the taxonomy lacks are
/// dropped and reported as warnings.
pub fn default_closure_rules(tax: &Taxonomy) -> (Vec<ClosureRule>, Vec<Diagnostic>) {
    let mut rules = Vec::new();
    let mut warnings = Vec::new();
    for (a, b, why) in DEFAULT_RULES {
        match ClosureRule::new(tax, a, b, why) {
            Ok(r) => rules.push(r),
            Err(d) => warnings.push(Diagnostic::warning(d.location, format!("{}; rule dropped", d.message))),
        }
    }
    (rules, warnings)
}

/// One rule per gated option: supporting a sub-option implies supporting the
/// option that opens its question.
pub fn structural_closure_rules(tax: &Taxonomy) -> Vec<ClosureRule> {
    let mut rules = Vec::new();
    for q in tax.questions() {
        let Some(gate) = &q.gate else { continue };
        for o in &q.options {
            rules.push(ClosureRule {
                if_supports: o.feature.clone(),
                then_supports: gate.clone(),
                rationale: format!("answering `{}` presupposes `{gate}`", q.id),
            });
        }
    }
    rules
}

/// Default plus structural rules.
pub fn all_closure_rules(tax: &Taxonomy) -> (Vec<ClosureRule>, Vec<Diagnostic>) {
    let (mut rules, warnings) = default_closure_rules(tax);
    rules.extend(structural_closure_rules(tax));
    (rules, warnings)
}

/// Least fixpoint of `rules` over every profile.
pub fn apply_closure(tax: &Taxonomy, db: &MethodDb, rules: &[ClosureRule]) -> Result<MethodDb, Vec<Diagnostic>> {
    let bad: Vec<Diagnostic> = rules
        .iter()
        .flat_map(|r| [&r.if_supports, &r.then_supports])
        .filter(|f| !tax.contains(f))
        .map(|f| Diagnostic::error(format!("rule on {f}"), format!("closure rule references unknown feature `{f}`")))
        .collect();
    if !bad.is_empty() {
        return Err(bad);
    }
    let mut out = db.clone();
    for m in &mut out.methods {
        close_set(&mut m.supports, rules);
    }
    out.closure_applied = true;
    Ok(out)
}

pub(crate) fn close_set(set: &mut BTreeSet<FeatureId>, rules: &[ClosureRule]) {
    let mut changed = true;
    while changed {
        changed = false;
        for r in rules {
            if set.contains(&r.if_supports) && !set.contains(&r.then_supports) {
                set.insert(r.then_supports.clone());
                changed = true;
            }
        }
    }
}

/// Parses the sparse text and applies default and structural closure.
/// Returns the closed db with any non-fatal diagnostics.
pub fn load_closed_db(tax: &Taxonomy, text: &str) -> Result<(MethodDb, Vec<Diagnostic>), Vec<Diagnostic>> {
    let db = parse_method_db(tax, text)?;
    let (rules, mut warnings) = all_closure_rules(tax);
    let db = apply_closure(tax, &db, &rules)?;
    warnings.extend(validate_db(tax, &db));
    if has_errors(&warnings) {
        return Err(warnings);
    }
    Ok((db, warnings))
}

// ---------------------------------------------------------------------------
// Validation

pub fn validate_db(tax: &Taxonomy, db: &MethodDb) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if db.taxonomy_fingerprint != tax.fingerprint() {
        diags.push(Diagnostic::warning("db", "database was built against a different taxonomy"));
    }
    let mut seen = HashSet::new();
    for m in &db.methods {
        if !seen.insert(m.id.as_str()) {
            diags.push(Diagnostic::error(&m.id, format!("duplicate method id `{}`", m.id)));
        }
        for f in &m.supports {
            if !tax.contains(f) {
                diags.push(Diagnostic::error(&m.id, format!("unknown feature `{f}`")));
            }
        }
        if !m.supports.iter().any(is_problem_statement) {
            diags.push(Diagnostic::error(&m.id, "supports no problem statement (c.1.1)"));
        }
        let imprecise = FeatureId::new("c.3.1.1.1/yes/form", "imprecise-per-criterion");
        let precise = [
            FeatureId::new("c.3.1.1.1/yes/form", "trade-offs"),
            FeatureId::new("c.3.1.1.1/yes/form", "importance-coefficients-per-criterion"),
        ];
        if tax.contains(&imprecise) && m.supports(&imprecise) && !precise.iter().any(|p| m.supports(p)) {
            diags.push(Diagnostic::warning(&m.id, "imprecise per-criterion weights without any precise per-criterion form"));
        }
    }

    let (mut rules, _) = default_closure_rules(tax);
    rules.extend(structural_closure_rules(tax));
    let mut unclosed = 0;
    for m in &db.methods {
        let broken: Vec<&ClosureRule> = rules
            .iter()
            .filter(|r| m.supports(&r.if_supports) && !m.supports(&r.then_supports))
            .collect();
        if broken.is_empty() {
            continue;
        }
        unclosed += 1;
        if db.closure_applied {
            for r in broken {
                diags.push(Diagnostic::error(
                    &m.id,
                    format!("closure violated: supports `{}` but not `{}` ({})", r.if_supports, r.then_supports, r.rationale),
                ));
            }
        }
    }
    if !db.closure_applied && unclosed > 0 {
        diags.push(Diagnostic::warning("db", format!("closure not applied; {unclosed} method(s) would gain features")));
    }
    diags
}
