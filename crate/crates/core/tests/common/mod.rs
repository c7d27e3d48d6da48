//! Random small instances and brute-force reference implementations.
//!
//! The oracles below work on the plain [`Instance`] model (indices, not
//! feature ids) and never call into the engine, so agreement between the two
//! is meaningful.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use mcda_mss::{
    parse_method_db, parse_taxonomy, ClosureRule, FeatureId, MethodDb, NearMatch, SelectiveQuestion, Session, Taxonomy,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Single,
    Any,
    All,
}

#[derive(Clone, Debug)]
pub struct Q {
    pub id: String,
    pub section: u8,
    pub options: usize,
    pub mode: Mode,
    /// (question index, option index) that enables this question.
    pub gate: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct M {
    pub id: String,
    pub name: String,
    pub supports: BTreeSet<(usize, usize)>,
}

/// Questions are listed in display order; gates always point backwards.
#[derive(Clone, Debug)]
pub struct Instance {
    pub questions: Vec<Q>,
    pub methods: Vec<M>,
}

/// Answers by question index.
pub type Answers = BTreeMap<usize, BTreeSet<usize>>;

const NAMES: [&str; 5] = ["Alpha", "Beta", "Gamma", "Delta", "Beta"];

impl Instance {
    pub fn random(r: &mut ChaCha8Rng, max_questions: usize, max_options: usize, max_methods: usize) -> Instance {
        let nq = r.gen_range(1..=max_questions);
        let mut sections: Vec<u8> = (0..nq).map(|i| if i == 0 { 1 } else { r.gen_range(1..=4) }).collect();
        sections.sort();
        let mut questions: Vec<Q> = Vec::with_capacity(nq);
        for (i, &section) in sections.iter().enumerate() {
            let options = r.gen_range(2..=max_options);
            let mode = if i == 0 {
                Mode::Single
            } else {
                match r.gen_range(0..5) {
                    0 => Mode::Any,
                    1 => Mode::All,
                    _ => Mode::Single,
                }
            };
            let gate = if i > 0 && r.gen_bool(0.5) {
                let j = r.gen_range(0..i);
                Some((j, r.gen_range(0..questions[j].options)))
            } else {
                None
            };
            questions.push(Q { id: format!("c.{section}.{}", i + 1), section, options, mode, gate });
        }
        // The problem-statement question must be c.1.1.
        questions[0].id = "c.1.1".into();

        let density = r.gen_range(0.2..0.9);
        let nm = r.gen_range(0..=max_methods);
        let methods = (0..nm)
            .map(|k| {
                let mut supports = BTreeSet::new();
                for (qi, q) in questions.iter().enumerate() {
                    for o in 0..q.options {
                        if r.gen_bool(density) {
                            supports.insert((qi, o));
                        }
                    }
                }
                if !(0..questions[0].options).any(|o| supports.contains(&(0, o))) {
                    supports.insert((0, r.gen_range(0..questions[0].options)));
                }
                M { id: format!("m{k:02}"), name: NAMES[r.gen_range(0..NAMES.len())].to_string(), supports }
            })
            .collect();
        Instance { questions, methods }
    }

    pub fn key(o: usize) -> String {
        format!("o{o}")
    }

    pub fn feature(&self, qi: usize, o: usize) -> FeatureId {
        FeatureId::new(&self.questions[qi].id, &Self::key(o))
    }

    pub fn features(&self) -> Vec<(usize, usize)> {
        self.questions.iter().enumerate().flat_map(|(qi, q)| (0..q.options).map(move |o| (qi, o))).collect()
    }

    pub fn schema_text(&self) -> String {
        let mut out = String::new();
        let mut current = 0u8;
        for (qi, q) in self.questions.iter().enumerate() {
            if q.section != current {
                if current != 0 {
                    out.push_str("}\n");
                }
                current = q.section;
                let _ = writeln!(out, "section c.{current} \"Section {current}\" {{");
            }
            let mode = match q.mode {
                Mode::Single => "",
                Mode::Any => " multi any",
                Mode::All => " multi all",
            };
            let _ = writeln!(out, "  question {} \"Question {qi}\"{mode} {{", q.id);
            for o in 0..q.options {
                let targets: Vec<&str> = self
                    .questions
                    .iter()
                    .filter(|t| t.gate == Some((qi, o)))
                    .map(|t| t.id.as_str())
                    .collect();
                if targets.is_empty() {
                    let _ = writeln!(out, "    option {} \"option {o}\"", Self::key(o));
                } else {
                    let _ = writeln!(out, "    option {} \"option {o}\" {{ enables {} }}", Self::key(o), targets.join(", "));
                }
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    pub fn db_text(&self) -> String {
        let mut out = String::new();
        for m in &self.methods {
            let _ = writeln!(out, "method {}\nname: {}\nsupports:", m.id, m.name);
            for &(qi, o) in &m.supports {
                let _ = writeln!(out, "  {}", self.feature(qi, o));
            }
        }
        out
    }

    pub fn taxonomy(&self) -> Taxonomy {
        parse_taxonomy(&self.schema_text()).unwrap_or_else(|e| panic!("{e:?}\n{}", self.schema_text()))
    }

    pub fn db(&self, tax: &Taxonomy) -> MethodDb {
        parse_method_db(tax, &self.db_text()).unwrap_or_else(|e| panic!("{e:?}"))
    }

    pub fn session(&self, answers: &Answers) -> Session {
        let mut s = Session::new();
        for (&qi, keys) in answers {
            s.set_raw(&self.questions[qi].id, keys.iter().map(|&o| Self::key(o)));
        }
        s
    }

    pub fn enabled(&self, answers: &Answers) -> Vec<bool> {
        let mut on = vec![false; self.questions.len()];
        for (qi, q) in self.questions.iter().enumerate() {
            on[qi] = match q.gate {
                None => true,
                Some((g, o)) => on[g] && answers.get(&g).is_some_and(|k| k.contains(&o)),
            };
        }
        on
    }

    /// A random answer for question `qi` that fits its mode.
    pub fn random_selection(&self, r: &mut ChaCha8Rng, qi: usize) -> BTreeSet<usize> {
        let q = &self.questions[qi];
        match q.mode {
            Mode::Single => [r.gen_range(0..q.options)].into(),
            Mode::Any | Mode::All => {
                let mut pick: BTreeSet<usize> = (0..q.options).filter(|_| r.gen_bool(0.5)).collect();
                if pick.is_empty() {
                    pick.insert(r.gen_range(0..q.options));
                }
                pick
            }
        }
    }

    /// A random gating-consistent session.
    pub fn random_answers(&self, r: &mut ChaCha8Rng, p: f64) -> Answers {
        let mut answers = Answers::new();
        for qi in 0..self.questions.len() {
            if self.enabled(&answers)[qi] && r.gen_bool(p) {
                let sel = self.random_selection(r, qi);
                answers.insert(qi, sel);
            }
        }
        answers
    }

    pub fn selected(&self, answers: &Answers) -> Vec<(usize, usize)> {
        answers.iter().flat_map(|(&qi, keys)| keys.iter().map(move |&o| (qi, o))).collect()
    }

    pub fn random_rules(&self, r: &mut ChaCha8Rng, tax: &Taxonomy, n: usize) -> Vec<(usize, usize, usize, usize)> {
        let all = self.features();
        let mut out = Vec::new();
        for _ in 0..n {
            let a = *all.choose(r).unwrap();
            let b = *all.choose(r).unwrap();
            if a != b {
                ClosureRule::new(tax, self.feature(a.0, a.1).as_str(), self.feature(b.0, b.1).as_str(), "random").unwrap();
                out.push((a.0, a.1, b.0, b.1));
            }
        }
        out
    }
}

// ---- oracles -------------------------------------------------------------

fn satisfies(inst: &Instance, m: &M, answers: &Answers) -> bool {
    answers.iter().all(|(&qi, keys)| match inst.questions[qi].mode {
        Mode::Any => keys.iter().any(|&o| m.supports.contains(&(qi, o))),
        Mode::Single | Mode::All => keys.iter().all(|&o| m.supports.contains(&(qi, o))),
    })
}

pub fn oracle_matching(inst: &Instance, answers: &Answers) -> Vec<String> {
    inst.methods.iter().filter(|m| satisfies(inst, m, answers)).map(|m| m.id.clone()).collect()
}

/// Removes `qi` and then anything no longer enabled, one sweep at a time.
pub fn oracle_clear(inst: &Instance, answers: &Answers, qi: usize) -> Answers {
    let mut a = answers.clone();
    a.remove(&qi);
    loop {
        let on = inst.enabled(&a);
        let before = a.len();
        a.retain(|&q, _| on[q]);
        if a.len() == before {
            return a;
        }
    }
}

pub fn oracle_option_counts(inst: &Instance, answers: &Answers, qi: usize) -> (Vec<usize>, usize) {
    let base = oracle_clear(inst, answers, qi);
    let counts = (0..inst.questions[qi].options)
        .map(|o| {
            let mut a = base.clone();
            a.insert(qi, [o].into());
            oracle_matching(inst, &a).len()
        })
        .collect();
    (counts, oracle_matching(inst, &base).len())
}

pub fn oracle_binding_counts(inst: &Instance, answers: &Answers, binding: &BTreeSet<(usize, usize)>) -> Vec<(FeatureId, usize)> {
    inst.selected(answers)
        .into_iter()
        .map(|f| {
            let n = inst
                .methods
                .iter()
                .filter(|m| m.supports.contains(&f) && binding.iter().all(|b| m.supports.contains(b)))
                .count();
            (inst.feature(f.0, f.1), n)
        })
        .collect()
}

fn oracle_missed(inst: &Instance, m: &M, answers: &Answers) -> Vec<(usize, usize)> {
    let mut missed = Vec::new();
    for (&qi, keys) in answers {
        let lacking: Vec<(usize, usize)> = keys.iter().map(|&o| (qi, o)).filter(|f| !m.supports.contains(f)).collect();
        match inst.questions[qi].mode {
            Mode::Any if lacking.len() < keys.len() => {}
            Mode::Any => missed.extend(keys.iter().map(|&o| (qi, o))),
            _ => missed.extend(lacking),
        }
    }
    missed
}

pub fn oracle_closest(
    inst: &Instance,
    answers: &Answers,
    binding: &BTreeSet<(usize, usize)>,
    limit: usize,
) -> Vec<NearMatch> {
    let mut out: Vec<NearMatch> = inst
        .methods
        .iter()
        .filter(|m| binding.iter().all(|b| m.supports.contains(b)))
        .map(|m| {
            let missed: Vec<FeatureId> = oracle_missed(inst, m, answers).into_iter().map(|(q, o)| inst.feature(q, o)).collect();
            NearMatch { method: m.id.clone(), name: m.name.clone(), miss_count: missed.len(), missed }
        })
        .collect();
    // Stable selection sort on (miss_count, name, id).
    for i in 0..out.len() {
        let mut best = i;
        for j in i + 1..out.len() {
            let kj = (out[j].miss_count, &out[j].name, &out[j].method);
            let kb = (out[best].miss_count, &out[best].name, &out[best].method);
            if kj < kb {
                best = j;
            }
        }
        out.swap(i, best);
    }
    out.truncate(limit);
    out
}

pub fn oracle_selective(inst: &Instance, answers: &Answers, k: usize, exclude_zero: bool) -> Vec<SelectiveQuestion> {
    let on = inst.enabled(answers);
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for qi in 0..inst.questions.len() {
        if !on[qi] || answers.contains_key(&qi) {
            continue;
        }
        let mut worst = 0;
        for o in 0..inst.questions[qi].options {
            let mut a = answers.clone();
            a.insert(qi, [o].into());
            let n = oracle_matching(inst, &a).len();
            if exclude_zero && n == 0 {
                continue;
            }
            worst = worst.max(n);
        }
        rows.push((worst, qi));
    }
    let mut out = Vec::new();
    while out.len() < k && !rows.is_empty() {
        let best = (0..rows.len()).min_by_key(|&i| rows[i]).unwrap();
        let (w, qi) = rows.remove(best);
        out.push(SelectiveQuestion { question: inst.questions[qi].id.clone(), worst_case: w });
    }
    out
}

/// Naive least fixpoint: fire rules until nothing changes.
pub fn oracle_closure(supports: &BTreeSet<(usize, usize)>, rules: &[(usize, usize, usize, usize)]) -> BTreeSet<(usize, usize)> {
    let mut s = supports.clone();
    loop {
        let mut changed = false;
        for &(a, ao, b, bo) in rules {
            if s.contains(&(a, ao)) && s.insert((b, bo)) {
                changed = true;
            }
        }
        if !changed {
            return s;
        }
    }
}

pub fn closed_under(s: &BTreeSet<(usize, usize)>, rules: &[(usize, usize, usize, usize)]) -> bool {
    rules.iter().all(|&(a, ao, b, bo)| !s.contains(&(a, ao)) || s.contains(&(b, bo)))
}

/// Supports of a method, as instance indices.
pub fn support_indices(inst: &Instance, db: &MethodDb, id: &str) -> BTreeSet<(usize, usize)> {
    let m = db.get(id).unwrap();
    inst.features().into_iter().filter(|&(q, o)| m.supports(&inst.feature(q, o))).collect()
}

// ---- checks shared by the test suites and the acceptance harness ----------

use mcda_mss::{
    answer, apply_closure, binding_feature_counts, closest_match, export_dense_matrix, export_method_db,
    import_dense_matrix, matching_methods, most_selective_questions, option_counts, EngineError, Selection,
    SelectivityOptions,
};

/// Compares every engine query with its oracle on one random instance.
/// Returns a description of each discrepancy.
pub fn oracle_discrepancies(seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let inst = Instance::random(&mut r, 10, 4, 12);
    let tax = inst.taxonomy();
    let db = inst.db(&tax);
    let p = r.gen_range(0.2..0.9);
    let answers = inst.random_answers(&mut r, p);
    let session = inst.session(&answers);
    let mut bad = Vec::new();

    let got = matching_methods(&db, &tax, &session);
    let want = oracle_matching(&inst, &answers);
    if got != want {
        bad.push(format!("seed {seed}: matching_methods {got:?} != {want:?}"));
    }

    let on = inst.enabled(&answers);
    for (qi, q) in inst.questions.iter().enumerate() {
        let got = option_counts(&db, &tax, &session, &q.id);
        if !on[qi] {
            if !matches!(got, Err(EngineError::Disabled(_))) {
                bad.push(format!("seed {seed}: option_counts on disabled {} gave {got:?}", q.id));
            }
            continue;
        }
        let got = got.unwrap();
        let (counts, dont_know) = oracle_option_counts(&inst, &answers, qi);
        let got_counts: Vec<usize> = got.counts.iter().map(|(_, n)| *n).collect();
        if got_counts != counts || got.dont_know != dont_know {
            bad.push(format!("seed {seed}: option_counts {}: {got:?} != {counts:?}/{dont_know}", q.id));
        }
    }

    let selected = inst.selected(&answers);
    let binding: BTreeSet<(usize, usize)> = selected.iter().copied().filter(|_| r.gen_bool(0.3)).collect();
    let binding_ids: BTreeSet<FeatureId> = binding.iter().map(|&(q, o)| inst.feature(q, o)).collect();
    let limit = r.gen_range(1..=14);
    let got = closest_match(&db, &tax, &session, &binding_ids, limit).unwrap();
    let want = oracle_closest(&inst, &answers, &binding, limit);
    if got != want {
        bad.push(format!("seed {seed}: closest_match {got:?} != {want:?}"));
    }
    let got = binding_feature_counts(&db, &tax, &session, &binding_ids).unwrap();
    let want = oracle_binding_counts(&inst, &answers, &binding);
    if got != want {
        bad.push(format!("seed {seed}: binding_feature_counts {got:?} != {want:?}"));
    }

    let k = r.gen_range(1..=12);
    for exclude in [false, true] {
        let opts = SelectivityOptions { exclude_zero_count_options: exclude };
        let got = most_selective_questions(&db, &tax, &session, k, opts);
        let want = oracle_selective(&inst, &answers, k, exclude);
        if got != want {
            bad.push(format!("seed {seed}: most_selective_questions(exclude_zero={exclude}) {got:?} != {want:?}"));
        }
    }
    bad
}

/// Adds one legal answer to a random session and checks the match set
/// shrinks or stays. `None` when the session has no open question.
pub fn monotone_on(seed: u64) -> Option<bool> {
    let mut r = rng(seed);
    let inst = Instance::random(&mut r, 8, 4, 12);
    let tax = inst.taxonomy();
    let db = inst.db(&tax);
    let answers = inst.random_answers(&mut r, 0.4);
    let session = inst.session(&answers);
    let on = inst.enabled(&answers);
    let open: Vec<usize> = (0..inst.questions.len()).filter(|&q| on[q] && !answers.contains_key(&q)).collect();
    let &qi = open.choose(&mut r)?;
    let keys: Vec<String> = inst.random_selection(&mut r, qi).into_iter().map(Instance::key).collect();
    let next = answer(&tax, &session, &inst.questions[qi].id, &Selection::Set(keys)).unwrap();
    let before: BTreeSet<String> = matching_methods(&db, &tax, &session).into_iter().collect();
    Some(matching_methods(&db, &tax, &next).iter().all(|m| before.contains(m)))
}

/// Closure checks on one small instance: agreement with the naive fixpoint,
/// idempotence, monotonicity and minimality.
pub fn closure_violations(seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let inst = Instance::random(&mut r, 5, 3, 6);
    let tax = inst.taxonomy();
    let db = inst.db(&tax);
    let n_rules = r.gen_range(0..10);
    let raw = inst.random_rules(&mut r, &tax, n_rules);
    let rules: Vec<ClosureRule> = raw
        .iter()
        .map(|&(a, ao, b, bo)| ClosureRule::new(&tax, inst.feature(a, ao).as_str(), inst.feature(b, bo).as_str(), "random").unwrap())
        .collect();
    let closed = apply_closure(&tax, &db, &rules).unwrap();
    let twice = apply_closure(&tax, &closed, &rules).unwrap();
    let mut bad = Vec::new();
    if !closed.closure_applied {
        bad.push(format!("seed {seed}: closure_applied not set"));
    }
    if twice != closed {
        bad.push(format!("seed {seed}: closure not idempotent"));
    }
    for m in &inst.methods {
        let got = support_indices(&inst, &closed, &m.id);
        if !m.supports.is_subset(&got) {
            bad.push(format!("seed {seed}: {} lost features", m.id));
        }
        if got != oracle_closure(&m.supports, &raw) {
            bad.push(format!("seed {seed}: {} closure differs from naive fixpoint", m.id));
        }
        for f in got.difference(&m.supports) {
            let mut fewer = got.clone();
            fewer.remove(f);
            if closed_under(&fewer, &raw) {
                bad.push(format!("seed {seed}: {} closure not minimal at {f:?}", m.id));
            }
        }
    }
    bad
}

/// Sparse and dense formats carry the same db, and each round-trips.
pub fn round_trip_violations(seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let inst = Instance::random(&mut r, 8, 4, 12);
    let tax = inst.taxonomy();
    let db = inst.db(&tax);
    let mut bad = Vec::new();
    let profile = |d: &MethodDb| -> Vec<(String, BTreeSet<FeatureId>)> {
        d.methods.iter().map(|m| (m.id.clone(), m.supports.clone())).collect()
    };
    let dense = export_dense_matrix(&tax, &db);
    match import_dense_matrix(&tax, &dense) {
        Ok(back) => {
            if profile(&back) != profile(&db) {
                bad.push(format!("seed {seed}: dense import differs from sparse parse"));
            }
            if export_dense_matrix(&tax, &back) != dense {
                bad.push(format!("seed {seed}: dense export not a fixpoint"));
            }
        }
        Err(e) => bad.push(format!("seed {seed}: dense import failed: {e:?}")),
    }
    match parse_method_db(&tax, &export_method_db(&tax, &db)) {
        Ok(back) if back == db => {}
        Ok(_) => bad.push(format!("seed {seed}: sparse round trip changed the db")),
        Err(e) => bad.push(format!("seed {seed}: sparse re-parse failed: {e:?}")),
    }
    bad
}

/// Random answer/clear calls, legal or not. After each call the session must
/// be gating-consistent, failures must leave it untouched, and the enabled
/// list must agree with the oracle.
pub fn gating_violations(seed: u64, steps: usize) -> Vec<String> {
    let mut r = rng(seed);
    let inst = Instance::random(&mut r, 10, 4, 0);
    let tax = inst.taxonomy();
    let mut session = Session::new();
    let mut answers = Answers::new();
    let mut bad = Vec::new();
    for step in 0..steps {
        let qi = r.gen_range(0..inst.questions.len());
        let id = inst.questions[qi].id.clone();
        let sel = match r.gen_range(0..10) {
            0 => Selection::Clear,
            1 => Selection::Set(vec!["nope".into()]),
            2 => Selection::Set(vec![]),
            3 => Selection::Set(vec![Instance::key(0), Instance::key(1)]),
            _ => Selection::Set(inst.random_selection(&mut r, qi).into_iter().map(Instance::key).collect()),
        };
        let expect_ok = inst.enabled(&answers)[qi]
            && match &sel {
                Selection::Clear => true,
                Selection::Set(keys) if keys.is_empty() => false,
                Selection::Set(keys) if keys.iter().any(|k| k == "nope") => false,
                Selection::Set(keys) => keys.len() == 1 || inst.questions[qi].mode != Mode::Single,
            };
        match answer(&tax, &session, &id, &sel) {
            Ok(next) => {
                if !expect_ok {
                    bad.push(format!("seed {seed} step {step}: accepted {sel:?} for {id}"));
                }
                match &sel {
                    Selection::Clear => answers = oracle_clear(&inst, &answers, qi),
                    Selection::Set(keys) => {
                        let mut a = answers.clone();
                        a.insert(qi, keys.iter().map(|k| k[1..].parse().unwrap()).collect());
                        // Re-answering can turn off gates of dependents.
                        loop {
                            let before = a.len();
                            let on_now = inst.enabled(&a);
                            a.retain(|&q, _| on_now[q]);
                            if a.len() == before {
                                break;
                            }
                        }
                        answers = a;
                    }
                }
                session = next;
            }
            Err(_) => {
                if expect_ok {
                    bad.push(format!("seed {seed} step {step}: rejected {sel:?} for {id}"));
                }
            }
        }
        if session != inst.session(&answers) {
            bad.push(format!("seed {seed} step {step}: session diverged from oracle"));
            break;
        }
        let problems = session.check(&tax);
        if !problems.is_empty() {
            bad.push(format!("seed {seed} step {step}: {problems:?}"));
        }
        let on = inst.enabled(&answers);
        let want: Vec<&str> = inst.questions.iter().zip(&on).filter(|(_, o)| **o).map(|(q, _)| q.id.as_str()).collect();
        if tax.enabled_questions(&session) != want {
            bad.push(format!("seed {seed} step {step}: enabled_questions differs"));
        }
    }
    bad
}
