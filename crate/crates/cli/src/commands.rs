use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mcda_mss::{
    audit_case, binding_feature_counts, closest_match, export_method_db, import_dense_matrix, load_closed_db,
    most_selective_questions, parse_case, parse_session, parse_taxonomy, recommend, recommendation_warnings,
    render_report, seed, AuditReport, Diagnostic, FeatureId, MethodDb, NearMatch, Recommendation, Session,
    SelectivityOptions, Taxonomy, Warning,
};
use serde::Serialize;

use crate::{Cli, Command, Format};

type Outcome = Result<(), Vec<String>>;

fn read(path: &Path) -> Result<String, Vec<String>> {
    std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])
}

fn located(source: &str, diags: &[Diagnostic]) -> Vec<String> {
    diags.iter().map(|d| format!("{source}: {d}")).collect()
}

struct Data {
    tax: Taxonomy,
    db: MethodDb,
    warnings: Vec<Diagnostic>,
}

fn load(taxonomy: Option<&Path>, db: Option<&Path>) -> Result<Data, Vec<String>> {
    let (tax_text, tax_src) = match taxonomy {
        Some(p) => (read(p)?, p.display().to_string()),
        None => (seed::TAXONOMY.to_string(), "<shipped taxonomy>".to_string()),
    };
    let (db_text, db_src) = match db {
        Some(p) => (read(p)?, p.display().to_string()),
        None => (seed::METHODS.to_string(), "<shipped db>".to_string()),
    };
    let tax = parse_taxonomy(&tax_text).map_err(|d| located(&tax_src, &d))?;
    let (db, warnings) = load_closed_db(&tax, &db_text).map_err(|d| located(&db_src, &d))?;
    for line in located(&db_src, &warnings) {
        eprintln!("{line}");
    }
    Ok(Data { tax, db, warnings })
}

fn load_session(tax: &Taxonomy, path: &Path) -> Result<Session, Vec<String>> {
    parse_session(tax, &read(path)?).map_err(|d| located(&path.display().to_string(), &d))
}

fn emit_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output types serialize"));
}

fn method_name<'a>(db: &'a MethodDb, id: &'a str) -> &'a str {
    db.get(id).map(|m| m.name.as_str()).unwrap_or(id)
}

fn label(tax: &Taxonomy, f: &FeatureId) -> String {
    tax.feature_label(f).unwrap_or_else(|| f.to_string())
}

/// Left-aligned columns separated by two spaces; the last column is not padded.
fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c + 1 == r.len() {
                line.push_str(cell);
            } else {
                let _ = write!(line, "{cell:<w$}  ", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn run(cli: Cli) -> Outcome {
    let taxonomy = cli.taxonomy.as_deref();
    let db = cli.db.as_deref();
    match cli.command {
        Command::Validate { format } => validate(load(taxonomy, db)?, format),
        Command::Recommend { session, binding, limit, format } => {
            let data = load(taxonomy, db)?;
            let s = load_session(&data.tax, &session)?;
            match binding {
                None => recommend_complete(&data, &s, format),
                Some(list) => recommend_binding(&data, &s, &list, limit, format),
            }
        }
        Command::Selective { session, top, format } => {
            let data = load(taxonomy, db)?;
            let s = load_session(&data.tax, &session)?;
            selective(&data, &s, top, format)
        }
        Command::Audit { case, corpus, out, format } => {
            let data = load(taxonomy, db)?;
            match (case, corpus) {
                (Some(path), _) => audit_one(&data, &path, format),
                (None, Some(dir)) => {
                    let out = out.unwrap_or_else(|| dir.clone());
                    audit_corpus(&data, &dir, &out, format)
                }
                (None, None) => unreachable!("clap requires --case or --corpus"),
            }
        }
        Command::Import { matrix, out, format } => {
            let tax_text = match taxonomy {
                Some(p) => read(p)?,
                None => seed::TAXONOMY.to_string(),
            };
            let tax = parse_taxonomy(&tax_text).map_err(|d| located("taxonomy", &d))?;
            import(&tax, &matrix, &out, format)
        }
    }
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    command: &'static str,
    questions: usize,
    features: usize,
    leaf_features: usize,
    methods: usize,
    diagnostics: &'a [Diagnostic],
}

fn validate(data: Data, format: Format) -> Outcome {
    let out = ValidateOutput {
        command: "validate",
        questions: data.tax.questions().len(),
        features: data.tax.feature_count(),
        leaf_features: data.tax.leaf_features().len(),
        methods: data.db.len(),
        diagnostics: &data.warnings,
    };
    match format {
        Format::Json => emit_json(&out),
        Format::Text => {
            println!("taxonomy: {} questions, {} features ({} leaves)", out.questions, out.features, out.leaf_features);
            println!("methods: {}", out.methods);
            println!("warnings: {}", out.diagnostics.len());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CompleteOutput {
    command: &'static str,
    mode: &'static str,
    no_complete_match: bool,
    recommendation: Option<Recommendation>,
    warnings: Vec<Warning>,
}

fn recommend_complete(data: &Data, s: &Session, format: Format) -> Outcome {
    let rec = recommend(&data.db, &data.tax, s);
    let warnings = match &rec {
        Some(r) => r.warnings.clone(),
        None => recommendation_warnings(&data.tax, s, &[], &data.db),
    };
    let out = CompleteOutput { command: "recommend", mode: "complete", no_complete_match: rec.is_none(), recommendation: rec, warnings };
    match format {
        Format::Json => emit_json(&out),
        Format::Text => {
            match &out.recommendation {
                Some(r) => {
                    println!("Complete matches: {}", r.matched.len());
                    for id in &r.matched {
                        println!("  - {} ({id})", method_name(&data.db, id));
                    }
                }
                None => {
                    println!("No complete match: no method supports every answer in this session.");
                    println!("Rerun with --binding to rank near matches.");
                }
            }
            for w in &out.warnings {
                println!("Warning {}: {}", w.kind.code(), w.message);
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FeatureCount {
    feature: FeatureId,
    label: String,
    count: usize,
}

#[derive(Serialize)]
struct BindingOutput {
    command: &'static str,
    mode: &'static str,
    binding: Vec<FeatureId>,
    feature_counts: Vec<FeatureCount>,
    near_matches: Vec<NearMatch>,
}

fn recommend_binding(data: &Data, s: &Session, list: &[String], limit: usize, format: Format) -> Outcome {
    let mut binding = BTreeSet::new();
    let mut errors = Vec::new();
    for raw in list.iter().map(|x| x.trim()).filter(|x| !x.is_empty()) {
        match FeatureId::parse(raw) {
            Ok(f) => {
                binding.insert(f);
            }
            Err(e) => errors.push(format!("--binding `{raw}`: {e}")),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let err = |e: mcda_mss::EngineError| vec![format!("--binding: {e}")];
    let counts = binding_feature_counts(&data.db, &data.tax, s, &binding).map_err(err)?;
    let near = closest_match(&data.db, &data.tax, s, &binding, limit).map_err(err)?;
    let out = BindingOutput {
        command: "recommend",
        mode: "binding",
        binding: binding.into_iter().collect(),
        feature_counts: counts
            .into_iter()
            .map(|(feature, count)| FeatureCount { label: label(&data.tax, &feature), feature, count })
            .collect(),
        near_matches: near,
    };
    match format {
        Format::Json => emit_json(&out),
        Format::Text => {
            let bound: Vec<&str> = out.binding.iter().map(FeatureId::as_str).collect();
            println!("Binding: {}", if bound.is_empty() { "(none)".to_string() } else { bound.join(", ") });
            println!("Methods supporting each selected feature, within the binding:");
            let rows: Vec<Vec<String>> =
                out.feature_counts.iter().map(|c| vec![format!("  {}", c.count), c.label.clone()]).collect();
            print!("{}", table(&rows));
            println!("Near matches:");
            let mut rows = vec![vec!["Missed".to_string(), "Method".to_string(), "Missed features".to_string()]];
            for n in &out.near_matches {
                let missed: Vec<String> = n.missed.iter().map(|f| label(&data.tax, f)).collect();
                rows.push(vec![n.miss_count.to_string(), n.name.clone(), missed.join("; ")]);
            }
            print!("{}", table(&rows));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectiveRow {
    question: String,
    title: String,
    worst_case: usize,
}

#[derive(Serialize)]
struct SelectiveOutput {
    command: &'static str,
    questions: Vec<SelectiveRow>,
}

fn selective(data: &Data, s: &Session, top: usize, format: Format) -> Outcome {
    let ranked = most_selective_questions(&data.db, &data.tax, s, top, SelectivityOptions::default());
    let out = SelectiveOutput {
        command: "selective",
        questions: ranked
            .into_iter()
            .map(|q| SelectiveRow {
                title: data.tax.question(&q.question).map(|x| x.title.clone()).unwrap_or_default(),
                question: q.question,
                worst_case: q.worst_case,
            })
            .collect(),
    };
    match format {
        Format::Json => emit_json(&out),
        Format::Text if out.questions.is_empty() => println!("No unanswered questions are enabled."),
        Format::Text => {
            let mut rows = vec![vec!["Worst case".to_string(), "Question".to_string(), "Title".to_string()]];
            rows.extend(out.questions.iter().map(|q| vec![q.worst_case.to_string(), q.question.clone(), q.title.clone()]));
            print!("{}", table(&rows));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    case: String,
    file: String,
    chosen: String,
    verdict: &'static str,
    missed: usize,
    complete_matches: Vec<String>,
    nearest: Vec<String>,
}

#[derive(Serialize)]
struct AuditOutput {
    command: &'static str,
    reports: Vec<AuditReport>,
    summary: Vec<SummaryRow>,
}

fn audit_file(data: &Data, path: &Path) -> Result<AuditReport, Vec<String>> {
    let src = path.display().to_string();
    let case = parse_case(&data.tax, &read(path)?).map_err(|d| located(&src, &d))?;
    audit_case(&data.db, &data.tax, &case).map_err(|e| vec![format!("{src}: {e}")])
}

fn summary_row(file: &str, r: &AuditReport) -> SummaryRow {
    SummaryRow {
        case: r.case.clone(),
        file: file.to_string(),
        chosen: r.chosen.clone(),
        verdict: if r.chosen_is_complete_match { "complete_match" } else { "mismatch" },
        missed: r.chosen_missed.len(),
        complete_matches: r.complete_matches.clone(),
        nearest: r.nearest_alternatives.iter().map(|n| n.method.clone()).collect(),
    }
}

fn summary_table(data: &Data, rows: &[SummaryRow]) -> String {
    let names = |ids: &[String]| ids.iter().map(|id| method_name(&data.db, id)).collect::<Vec<_>>().join(", ");
    let mut t = vec![["Case", "Chosen", "Verdict", "Missed", "Complete matches or nearest alternatives"].map(String::from).to_vec()];
    for r in rows {
        let alternatives = if r.complete_matches.is_empty() {
            format!("nearest: {}", names(&r.nearest))
        } else {
            names(&r.complete_matches)
        };
        let verdict = if r.verdict == "complete_match" { "Complete match" } else { "Mismatch" };
        t.push(vec![r.case.clone(), method_name(&data.db, &r.chosen).to_string(), verdict.into(), r.missed.to_string(), alternatives]);
    }
    table(&t)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn audit_one(data: &Data, path: &Path, format: Format) -> Outcome {
    let report = audit_file(data, path)?;
    match format {
        Format::Json => {
            let summary = vec![summary_row(&file_name(path), &report)];
            emit_json(&AuditOutput { command: "audit", reports: vec![report], summary });
        }
        Format::Text => print!("{}", render_report(&report, &data.tax, &data.db)),
    }
    Ok(())
}

fn audit_corpus(data: &Data, dir: &Path, out_dir: &Path, format: Format) -> Outcome {
    let entries = std::fs::read_dir(dir).map_err(|e| vec![format!("{}: {e}", dir.display())])?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "case"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(vec![format!("{}: no .case files", dir.display())]);
    }

    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for f in &files {
        match audit_file(data, f) {
            Ok(r) => reports.push((f, r)),
            Err(e) => errors.extend(e),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let summary: Vec<SummaryRow> = reports.iter().map(|(f, r)| summary_row(&file_name(f), r)).collect();
    let text = summary_table(data, &summary);
    std::fs::create_dir_all(out_dir).map_err(|e| vec![format!("{}: {e}", out_dir.display())])?;
    let write = |name: String, body: &str| {
        let p = out_dir.join(name);
        std::fs::write(&p, body).map_err(|e| vec![format!("{}: {e}", p.display())])
    };
    for (f, r) in &reports {
        let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write(format!("{stem}.report"), &render_report(r, &data.tax, &data.db))?;
    }
    write("summary.txt".into(), &text)?;
    eprintln!("wrote {} reports and summary.txt to {}", reports.len(), out_dir.display());

    match format {
        Format::Json => emit_json(&AuditOutput { command: "audit", reports: reports.into_iter().map(|(_, r)| r).collect(), summary }),
        Format::Text => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct ImportOutput {
    command: &'static str,
    methods: usize,
    out: String,
}

fn import(tax: &Taxonomy, matrix: &Path, out: &Path, format: Format) -> Outcome {
    let db = import_dense_matrix(tax, &read(matrix)?).map_err(|d| located(&matrix.display().to_string(), &d))?;
    std::fs::write(out, export_method_db(tax, &db)).map_err(|e| vec![format!("{}: {e}", out.display())])?;
    let result = ImportOutput { command: "import", methods: db.len(), out: out.display().to_string() };
    match format {
        Format::Json => emit_json(&result),
        Format::Text => println!("imported {} methods into {}", result.methods, result.out),
    }
    Ok(())
}
