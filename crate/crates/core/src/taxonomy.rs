//! The gated question tree and its text format.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostic::Diagnostic;
use crate::feature::{is_code, is_key, is_question_id, FeatureId};
use crate::session::Session;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Combinator {
    Any,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMode {
    Single,
    Multi(Combinator),
}

impl SelectMode {
    pub fn is_multi(self) -> bool {
        matches!(self, SelectMode::Multi(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptionDef {
    pub key: String,
    pub label: String,
    pub info: Option<String>,
    pub enables: Vec<String>,
    pub feature: FeatureId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub section: String,
    pub title: String,
    /// The question sentence shown under the title, when the schema has one.
    pub prompt: Option<String>,
    pub info: Option<String>,
    pub mode: SelectMode,
    pub options: Vec<OptionDef>,
    /// The option that enables this question; `None` for roots.
    pub gate: Option<FeatureId>,
}

impl Question {
    pub fn option(&self, key: &str) -> Option<&OptionDef> {
        self.options.iter().find(|o| o.key == key)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub code: String,
    pub title: String,
    pub info: Option<String>,
    /// Question ids in document order.
    pub questions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    sections: Vec<Section>,
    questions: Vec<Question>,
    by_id: HashMap<String, usize>,
    features: BTreeMap<FeatureId, (usize, usize)>,
    fingerprint: String,
}

impl Taxonomy {
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    /// All questions in display (document) order.
    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.by_id.get(id).map(|&i| &self.questions[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn resolve(&self, f: &FeatureId) -> Option<(&Question, &OptionDef)> {
        self.features.get(f).map(|&(q, o)| {
            let q = &self.questions[q];
            (q, &q.options[o])
        })
    }

    pub fn contains(&self, f: &FeatureId) -> bool {
        self.features.contains_key(f)
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Every option of every question, in document order.
    pub fn all_features(&self) -> Vec<FeatureId> {
        self.questions
            .iter()
            .flat_map(|q| q.options.iter().map(|o| o.feature.clone()))
            .collect()
    }

    /// Options that gate nothing.
    pub fn leaf_features(&self) -> Vec<FeatureId> {
        self.questions
            .iter()
            .flat_map(|q| q.options.iter().filter(|o| o.enables.is_empty()).map(|o| o.feature.clone()))
            .collect()
    }

    pub fn feature_label(&self, f: &FeatureId) -> Option<String> {
        self.resolve(f).map(|(q, o)| format!("{} : {}", q.title, o.label))
    }

    /// Questions reachable under `session`, in display order.
    pub fn enabled_questions(&self, session: &Session) -> Vec<&str> {
        let flags = self.enabled_flags(session);
        self.questions
            .iter()
            .zip(flags)
            .filter(|(_, on)| *on)
            .map(|(q, _)| q.id.as_str())
            .collect()
    }

    pub fn is_enabled(&self, session: &Session, id: &str) -> bool {
        let Some(mut i) = self.position(id) else { return false };
        // Walk up the gate chain; depth is bounded because the forest is acyclic.
        loop {
            match &self.questions[i].gate {
                None => return true,
                Some(g) => {
                    if !session.is_selected(g) {
                        return false;
                    }
                    i = self.by_id[g.question()];
                }
            }
        }
    }

    pub(crate) fn enabled_flags(&self, session: &Session) -> Vec<bool> {
        let mut memo: Vec<Option<bool>> = vec![None; self.questions.len()];
        (0..self.questions.len()).map(|i| self.enabled_memo(session, i, &mut memo)).collect()
    }

    fn enabled_memo(&self, session: &Session, i: usize, memo: &mut [Option<bool>]) -> bool {
        if let Some(v) = memo[i] {
            return v;
        }
        let v = match &self.questions[i].gate {
            None => true,
            Some(g) => session.is_selected(g) && self.enabled_memo(session, self.by_id[g.question()], memo),
        };
        memo[i] = Some(v);
        v
    }

    /// Canonical text form. `parse_taxonomy(t.serialize())` rebuilds `t`.
    pub fn serialize(&self) -> String {
        render(&self.sections, &self.questions)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn render(sections: &[Section], questions: &[Question]) -> String {
    let by_id: HashMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut out = String::new();
    for (si, s) in sections.iter().enumerate() {
        if si > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "section {} {} {{", s.code, quote(&s.title));
        if let Some(info) = &s.info {
            let _ = writeln!(out, "  info {}", quote(info));
        }
        for qid in &s.questions {
            let q = by_id[qid.as_str()];
            out.push('\n');
            let mode = match q.mode {
                SelectMode::Single => "",
                SelectMode::Multi(Combinator::Any) => " multi any",
                SelectMode::Multi(Combinator::All) => " multi all",
            };
            let _ = writeln!(out, "  question {} {}{} {{", q.id, quote(&q.title), mode);
            if let Some(p) = &q.prompt {
                let _ = writeln!(out, "    ask {}", quote(p));
            }
            if let Some(info) = &q.info {
                let _ = writeln!(out, "    info {}", quote(info));
            }
            for o in &q.options {
                let _ = write!(out, "    option {} {}", o.key, quote(&o.label));
                if o.info.is_none() && o.enables.is_empty() {
                    out.push('\n');
                    continue;
                }
                out.push_str(" {\n");
                if let Some(info) = &o.info {
                    let _ = writeln!(out, "      info {}", quote(info));
                }
                if !o.enables.is_empty() {
                    let _ = writeln!(out, "      enables {}", o.enables.join(", "));
                }
                out.push_str("    }\n");
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    out
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Open,
    Close,
    Comma,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

fn lex(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<(Tok, usize)> {
    let mut lx = Lexer { chars: text.chars().peekable(), line: 1 };
    let mut toks = Vec::new();
    while let Some(&c) = lx.chars.peek() {
        match c {
            '\n' => {
                lx.line += 1;
                lx.chars.next();
            }
            c if c.is_whitespace() => {
                lx.chars.next();
            }
            '#' => {
                while let Some(&c) = lx.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    lx.chars.next();
                }
            }
            '{' => {
                lx.chars.next();
                toks.push((Tok::Open, lx.line));
            }
            '}' => {
                lx.chars.next();
                toks.push((Tok::Close, lx.line));
            }
            ',' => {
                lx.chars.next();
                toks.push((Tok::Comma, lx.line));
            }
            '"' => {
                let start = lx.line;
                lx.chars.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some(c) = lx.chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match lx.chars.next() {
                            Some('n') => s.push('\n'),
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some(other) => {
                                diags.push(Diagnostic::at_line(lx.line, format!("unknown escape `\\{other}`")));
                                s.push(other);
                            }
                            None => break,
                        },
                        '\n' => {
                            lx.line += 1;
                            break;
                        }
                        c => s.push(c),
                    }
                }
                if !closed {
                    diags.push(Diagnostic::at_line(start, "unterminated string"));
                }
                toks.push((Tok::Str(s), start));
            }
            _ => {
                let mut w = String::new();
                while let Some(&c) = lx.chars.peek() {
                    if c.is_whitespace() || matches!(c, '{' | '}' | ',' | '"' | '#') {
                        break;
                    }
                    w.push(c);
                    lx.chars.next();
                }
                toks.push((Tok::Word(w), lx.line));
            }
        }
    }
    toks
}

struct RawOption {
    key: String,
    label: String,
    info: Option<String>,
    enables: Vec<(String, usize)>,
    line: usize,
}

struct RawQuestion {
    id: String,
    section: String,
    title: String,
    prompt: Option<String>,
    info: Option<String>,
    mode: SelectMode,
    options: Vec<RawOption>,
    line: usize,
}

struct RawSection {
    code: String,
    title: String,
    info: Option<String>,
    line: usize,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    last_line: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map(|(_, l)| *l).unwrap_or(self.last_line)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::at_line(self.line(), msg))
    }

    fn describe(t: Option<&Tok>) -> String {
        match t {
            None => "end of file".into(),
            Some(Tok::Word(w)) => format!("`{w}`"),
            Some(Tok::Str(_)) => "a string".into(),
            Some(Tok::Open) => "`{`".into(),
            Some(Tok::Close) => "`}`".into(),
            Some(Tok::Comma) => "`,`".into(),
        }
    }

    fn word(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            other => self.err(format!("expected {what}, found {}", Self::describe(other))),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => self.err(format!("expected {what}, found {}", Self::describe(other))),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            let want = Self::describe(Some(&tok));
            self.err(format!("expected {want}, found {}", Self::describe(self.peek())))
        }
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    /// Skips to the next `question` or `section` keyword.
    fn recover(&mut self) {
        while let Some(t) = self.peek() {
            if matches!(t, Tok::Word(w) if w == "question" || w == "section") {
                return;
            }
            self.pos += 1;
        }
    }

    fn question(&mut self, section: &str) -> PResult<RawQuestion> {
        let line = self.line();
        self.word("`question`")?;
        let id = self.word("a question id")?;
        let title = self.string("a question title")?;
        let mut mode = SelectMode::Single;
        if self.at_word("multi") {
            self.pos += 1;
            mode = match self.word("`any` or `all`")?.as_str() {
                "any" => SelectMode::Multi(Combinator::Any),
                "all" => SelectMode::Multi(Combinator::All),
                other => return Err(Diagnostic::at_line(self.line(), format!("expected `any` or `all`, found `{other}`"))),
            };
        }
        self.expect(Tok::Open)?;
        let mut q = RawQuestion { id, section: section.to_string(), title, prompt: None, info: None, mode, options: Vec::new(), line };
        loop {
            match self.peek() {
                Some(Tok::Close) => {
                    self.pos += 1;
                    return Ok(q);
                }
                Some(Tok::Word(w)) if w == "ask" => {
                    self.pos += 1;
                    let s = self.string("prompt text")?;
                    if q.prompt.replace(s).is_some() {
                        return self.err("duplicate `ask`");
                    }
                }
                Some(Tok::Word(w)) if w == "info" => {
                    self.pos += 1;
                    let s = self.string("info text")?;
                    if q.info.replace(s).is_some() {
                        return self.err("duplicate `info`");
                    }
                }
                Some(Tok::Word(w)) if w == "option" => {
                    self.pos += 1;
                    q.options.push(self.option()?);
                }
                other => {
                    let d = Self::describe(other);
                    return self.err(format!("expected `ask`, `info`, `option` or `}}` in question, found {d}"));
                }
            }
        }
    }

    fn option(&mut self) -> PResult<RawOption> {
        let line = self.line();
        let key = self.word("an option key")?;
        let label = self.string("an option label")?;
        let mut o = RawOption { key, label, info: None, enables: Vec::new(), line };
        if self.peek() != Some(&Tok::Open) {
            return Ok(o);
        }
        self.pos += 1;
        loop {
            match self.peek() {
                Some(Tok::Close) => {
                    self.pos += 1;
                    return Ok(o);
                }
                Some(Tok::Word(w)) if w == "info" => {
                    self.pos += 1;
                    let s = self.string("info text")?;
                    if o.info.replace(s).is_some() {
                        return self.err("duplicate `info`");
                    }
                }
                Some(Tok::Word(w)) if w == "enables" => {
                    self.pos += 1;
                    loop {
                        let l = self.line();
                        let target = self.word("a question id")?;
                        o.enables.push((target, l));
                        if self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                other => {
                    let d = Self::describe(other);
                    return self.err(format!("expected `info`, `enables` or `}}` in option, found {d}"));
                }
            }
        }
    }
}

/// Parses and validates a schema. On failure every diagnostic found is
/// returned, not just the first.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let toks = lex(text, &mut diags);
    let last_line = toks.last().map(|(_, l)| *l).unwrap_or(1);
    let mut p = Parser { toks, pos: 0, last_line };

    let mut sections: Vec<RawSection> = Vec::new();
    let mut questions: Vec<RawQuestion> = Vec::new();

    while p.peek().is_some() {
        if !p.at_word("section") {
            let d = Parser::describe(p.peek());
            diags.push(Diagnostic::at_line(p.line(), format!("expected `section`, found {d}")));
            p.pos += 1;
            p.recover();
            if p.at_word("question") {
                // Orphan question outside any section: parse it to keep going, then drop it.
                let _ = p.question("");
                continue;
            }
            continue;
        }
        let line = p.line();
        p.pos += 1;
        let head = (|| -> PResult<(String, String)> {
            let code = p.word("a section code")?;
            let title = p.string("a section title")?;
            p.expect(Tok::Open)?;
            Ok((code, title))
        })();
        let (code, title) = match head {
            Ok(h) => h,
            Err(d) => {
                diags.push(d);
                p.recover();
                continue;
            }
        };
        let mut sec = RawSection { code: code.clone(), title, info: None, line };
        loop {
            match p.peek() {
                None => {
                    diags.push(Diagnostic::at_line(p.line(), format!("section {code} is not closed")));
                    break;
                }
                Some(Tok::Close) => {
                    p.pos += 1;
                    break;
                }
                Some(Tok::Word(w)) if w == "section" => break,
                Some(Tok::Word(w)) if w == "info" => {
                    p.pos += 1;
                    match p.string("info text") {
                        Ok(s) => {
                            if sec.info.replace(s).is_some() {
                                diags.push(Diagnostic::at_line(p.line(), "duplicate `info`"));
                            }
                        }
                        Err(d) => {
                            diags.push(d);
                            p.recover();
                        }
                    }
                }
                Some(Tok::Word(w)) if w == "question" => match p.question(&code) {
                    Ok(q) => questions.push(q),
                    Err(d) => {
                        diags.push(d);
                        p.recover();
                    }
                },
                other => {
                    let d = Parser::describe(other);
                    diags.push(Diagnostic::at_line(p.line(), format!("expected `info`, `question` or `}}` in section, found {d}")));
                    p.pos += 1;
                    p.recover();
                }
            }
        }
        sections.push(sec);
    }

    let built = build(sections, questions, &mut diags);
    if crate::diagnostic::has_errors(&diags) {
        Err(diags)
    } else {
        Ok(built.expect("no errors implies a built taxonomy"))
    }
}

fn build(raw_sections: Vec<RawSection>, raw_questions: Vec<RawQuestion>, diags: &mut Vec<Diagnostic>) -> Option<Taxonomy> {
    let mut sections: Vec<Section> = Vec::new();
    let mut seen_codes = HashMap::new();
    for s in raw_sections {
        if !is_code(&s.code) || s.code.matches('.').count() != 1 {
            diags.push(Diagnostic::at_line(s.line, format!("invalid section code `{}`", s.code)));
        }
        if let Some(prev) = seen_codes.insert(s.code.clone(), s.line) {
            diags.push(Diagnostic::at_line(s.line, format!("duplicate section `{}` (first at line {prev})", s.code)));
            continue;
        }
        sections.push(Section { code: s.code, title: s.title, info: s.info, questions: Vec::new() });
    }

    let mut questions: Vec<Question> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    let mut option_lines: Vec<Vec<(usize, Vec<(String, usize)>)>> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    for rq in raw_questions {
        if !is_question_id(&rq.id) {
            diags.push(Diagnostic::at_line(rq.line, format!("invalid question id `{}`", rq.id)));
            continue;
        }
        let first = rq.id.split('/').next().unwrap_or("");
        if !(first == rq.section || first.starts_with(&format!("{}.", rq.section))) {
            diags.push(Diagnostic::at_line(rq.line, format!("question `{}` does not belong to section {}", rq.id, rq.section)));
        }
        if let Some(&prev) = by_id.get(&rq.id) {
            diags.push(Diagnostic::at_line(rq.line, format!("duplicate question id `{}` (first at line {})", rq.id, lines[prev])));
            continue;
        }
        if rq.options.len() < 2 {
            diags.push(Diagnostic::at_line(rq.line, format!("question `{}` needs at least 2 options", rq.id)));
        }
        let mut options = Vec::new();
        let mut olines = Vec::new();
        let mut keys: HashMap<String, usize> = HashMap::new();
        for ro in rq.options {
            if !is_key(&ro.key) {
                diags.push(Diagnostic::at_line(ro.line, format!("invalid option key `{}`", ro.key)));
                continue;
            }
            if let Some(prev) = keys.insert(ro.key.clone(), ro.line) {
                diags.push(Diagnostic::at_line(ro.line, format!("duplicate option key `{}` in question `{}` (first at line {prev})", ro.key, rq.id)));
                continue;
            }
            let feature = FeatureId::new(&rq.id, &ro.key);
            let enables: Vec<String> = ro.enables.iter().map(|(t, _)| t.clone()).collect();
            olines.push((ro.line, ro.enables));
            options.push(OptionDef { key: ro.key, label: ro.label, info: ro.info, enables, feature });
        }
        by_id.insert(rq.id.clone(), questions.len());
        lines.push(rq.line);
        option_lines.push(olines);
        if let Some(s) = sections.iter_mut().find(|s| s.code == rq.section) {
            s.questions.push(rq.id.clone());
        }
        questions.push(Question {
            id: rq.id,
            section: rq.section,
            title: rq.title,
            prompt: rq.prompt,
            info: rq.info,
            mode: rq.mode,
            options,
            gate: None,
        });
    }

    // Gating edges.
    let mut gates: Vec<Vec<FeatureId>> = vec![Vec::new(); questions.len()];
    for (qi, q) in questions.iter().enumerate() {
        for (oi, o) in q.options.iter().enumerate() {
            for (target, line) in &option_lines[qi][oi].1 {
                match by_id.get(target) {
                    None => diags.push(Diagnostic::at_line(*line, format!("`enables` target `{target}` does not exist"))),
                    Some(&t) => {
                        if gates[t].contains(&o.feature) {
                            diags.push(Diagnostic::at_line(*line, format!("`{}` enables `{target}` twice", o.feature)));
                        } else {
                            gates[t].push(o.feature.clone());
                        }
                    }
                }
            }
        }
    }
    for (qi, g) in gates.iter().enumerate() {
        if g.len() > 1 {
            let list: Vec<&str> = g.iter().map(FeatureId::as_str).collect();
            diags.push(Diagnostic::at_line(lines[qi], format!("question `{}` is gated by more than one option: {}", questions[qi].id, list.join(", "))));
        }
        questions[qi].gate = g.first().cloned();
    }

    // Cycles: with in-degree <= 1 every cycle is found by walking parents.
    let mut state = vec![0u8; questions.len()]; // 0 new, 1 on current walk, 2 done
    for start in 0..questions.len() {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => {
                    let from = path.iter().position(|&p| p == i).unwrap_or(0);
                    let mut ids: Vec<&str> = path[from..].iter().rev().map(|&p: &usize| questions[p].id.as_str()).collect();
                    ids.push(questions[i].id.as_str());
                    diags.push(Diagnostic::at_line(lines[i], format!("gating cycle: {}", ids.join(" -> "))));
                    break;
                }
                _ => {}
            }
            state[i] = 1;
            path.push(i);
            cur = questions[i].gate.as_ref().and_then(|g| by_id.get(g.question()).copied());
        }
        for p in path {
            state[p] = 2;
        }
    }

    if crate::diagnostic::has_errors(diags) {
        return None;
    }

    // Display order is section order, then document order within a section.
    let order: Vec<String> = sections.iter().flat_map(|s| s.questions.iter().cloned()).collect();
    let mut slots: Vec<Option<Question>> = questions.into_iter().map(Some).collect();
    let questions: Vec<Question> = order.iter().map(|id| slots[by_id[id]].take().expect("question listed once")).collect();
    let by_id: HashMap<String, usize> = questions.iter().enumerate().map(|(i, q)| (q.id.clone(), i)).collect();
    let mut features = BTreeMap::new();
    for (qi, q) in questions.iter().enumerate() {
        for (oi, o) in q.options.iter().enumerate() {
            features.insert(o.feature.clone(), (qi, oi));
        }
    }

    let canonical = render(&sections, &questions);
    let fingerprint = hex::encode(Sha256::digest(canonical.as_bytes()));
    Some(Taxonomy { sections, questions, by_id, features, fingerprint })
}
