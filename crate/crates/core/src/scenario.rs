//! Text scenario files.
//!
//! ```text
//! [group]
//! ranks = 1
//! generators = (1/3)
//! embedding = [[3]]
//!
//! [ring R]
//! ranks = 1
//! x1 @1 = (1)
//!
//! [ring S]
//! ranks = 1
//! units = gamma
//! y1 @1 = (1/3)
//!
//! [extension]
//! matrix = [[3]]
//! unit.1 = gamma
//!
//! [query]
//! analyze
//! certify y1^2 ; y1 max_steps=50
//! ```
//!
//! Parameters are listed per ring as `name @level = value`; their order at a
//! level fixes their index. `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::extension::{ex_validate, MonomialExtension};
use crate::ring_state::{rs_validate, Monomial, Parameter, RingState};
use crate::value_groups::{GroupElement, SubgroupEmbedding, ValueGroupSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSection {
    pub spec: ValueGroupSpec,
    pub embedding: Option<SubgroupEmbedding>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryKind {
    Analyze,
    Normalize,
    /// `M1 ; M2` over `R`.
    Divide { m1: Monomial, m2: Monomial },
    /// `g ; h` over `S`.
    Certify { g: Monomial, h: Monomial },
}

impl QueryKind {
    pub fn command(&self) -> &'static str {
        match self {
            QueryKind::Analyze => "analyze",
            QueryKind::Normalize => "normalize",
            QueryKind::Divide { .. } => "divide",
            QueryKind::Certify { .. } => "certify",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Query {
    pub kind: QueryKind,
    pub options: BTreeMap<String, String>,
    /// Source line, for error messages only.
    pub line: usize,
}

impl PartialEq for Query {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.options == other.options
    }
}

impl Eq for Query {}

impl Query {
    pub fn emit(&self) -> String {
        let mut out = self.kind.command().to_string();
        match &self.kind {
            QueryKind::Divide { m1: a, m2: b } | QueryKind::Certify { g: a, h: b } => {
                write!(out, " {a} ; {b}").unwrap();
            }
            _ => {}
        }
        for (k, v) in &self.options {
            write!(out, " {k}={v}").unwrap();
        }
        out
    }

    pub fn option_usize(&self, key: &str) -> Result<Option<usize>> {
        self.options
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::parse(self.line, 1, format!("option {key} expects a nonnegative integer")))
            })
            .transpose()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scenario {
    pub group: Option<GroupSection>,
    pub r: Option<RingState>,
    pub s: Option<RingState>,
    pub extension: Option<MonomialExtension>,
    pub queries: Vec<Query>,
}

const QUERY_OPTIONS: [&str; 2] = ["max_steps", "box"];

/// One logical line with its 1-based number and the column of its start.
struct Line<'a> {
    number: usize,
    text: &'a str,
}

impl<'a> Line<'a> {
    fn err(&self, col: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.number, col, msg)
    }

    /// Splits `key = value`; returns the value with its 1-based column.
    fn key_value(&self) -> Result<(&'a str, &'a str, usize)> {
        let eq = self
            .text
            .find('=')
            .ok_or_else(|| self.err(1, "expected `key = value`"))?;
        let key = self.text[..eq].trim();
        let raw = &self.text[eq + 1..];
        let lead = raw.len() - raw.trim_start().len();
        Ok((key, raw.trim(), eq + 2 + lead))
    }
}

fn column_of(line: &str, sub: &str) -> usize {
    sub.as_ptr() as usize - line.as_ptr() as usize + 1
}

fn parse_element(line: &Line, text: &str, col: usize) -> Result<GroupElement> {
    GroupElement::parse_literal(text).map_err(|(c, m)| line.err(col + c.saturating_sub(1), m))
}

fn parse_list_usize(line: &Line, text: &str, col: usize) -> Result<Vec<usize>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| line.err(col + column_of(text, t) - 1, format!("expected an integer, got `{}`", t.trim())))
        })
        .collect()
}

fn parse_matrix(line: &Line, text: &str, col: usize) -> Result<Vec<Vec<i64>>> {
    serde_json::from_str(text).map_err(|e| line.err(col + e.column().saturating_sub(1), format!("bad matrix: {e}")))
}

fn parse_bool(line: &Line, text: &str, col: usize) -> Result<bool> {
    match text {
        "yes" | "true" => Ok(true),
        "no" | "false" => Ok(false),
        _ => Err(line.err(col, "expected yes or no")),
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

/// Parses `a^k * b * …` (or `1`) against the names of `state`.
pub fn parse_monomial(state: &RingState, text: &str) -> std::result::Result<Monomial, (usize, String)> {
    let trimmed = text.trim();
    if trimmed == "1" {
        return Ok(Monomial::one());
    }
    let mut m = Monomial::one();
    for factor in text.split('*') {
        let col = column_of(text, factor) + (factor.len() - factor.trim_start().len());
        let f = factor.trim();
        if f.is_empty() {
            return Err((col, "empty factor".into()));
        }
        let (name, exp) = match f.split_once('^') {
            Some((n, e)) => {
                let k: i64 = e.trim().parse().map_err(|_| (col + n.len() + 1, format!("bad exponent `{}`", e.trim())))?;
                (n.trim(), k)
            }
            None => (f, 1),
        };
        if !is_identifier(name) {
            return Err((col, format!("bad name `{name}`")));
        }
        let term = if state.position(name).is_some() {
            Monomial::power(name, exp)
        } else if state.unit_symbols.contains(name) {
            Monomial::unit(name, exp)
        } else if state.aux_values.contains_key(name) {
            Monomial::aux_power(name, exp)
        } else {
            return Err((col, format!("undeclared name `{name}`")));
        };
        m = m.mul(&term);
    }
    Ok(m)
}

#[derive(Default)]
struct RingDraft {
    prefix: Option<String>,
    ranks: Option<Vec<usize>>,
    units: Vec<String>,
    s_good: BTreeSet<usize>,
    very_good: bool,
    params: Vec<(String, usize, GroupElement, usize)>,
}

impl RingDraft {
    fn finish(self, label: &str, header: usize) -> Result<RingState> {
        let ranks = self
            .ranks
            .ok_or_else(|| Error::parse(header, 1, format!("ring {label} needs `ranks`")))?;
        let u = ranks.len();
        let mut levels: Vec<Vec<Parameter>> = vec![Vec::new(); u];
        let mut seen = BTreeSet::new();
        for (name, level, value, line) in self.params {
            if level == 0 || level > u {
                return Err(Error::parse(line, 1, format!("level {level} is not in 1..={u}")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::parse(line, 1, format!("duplicate parameter `{name}`")));
            }
            levels[level - 1].push(Parameter { name, value });
        }
        let prefix = self
            .prefix
            .unwrap_or_else(|| if label == "R" { "x".into() } else { "y".into() });
        let mut state = RingState::new(u, ranks, levels, &prefix);
        state.unit_symbols = self.units.into_iter().collect();
        state.s_good = self.s_good;
        state.very_good = self.very_good;
        let report = rs_validate(&state);
        if !report.is_valid() {
            return Err(Error::parse(header, 1, format!("ring {label}: {}", report.issues.join("; "))));
        }
        Ok(state)
    }
}

#[derive(Default)]
struct GroupDraft {
    ranks: Option<Vec<usize>>,
    generators: Option<Vec<GroupElement>>,
    embedding: Option<Vec<Vec<i64>>>,
}

#[derive(Default)]
struct ExtensionDraft {
    matrix: Option<Vec<Vec<i64>>>,
    units: BTreeMap<usize, (String, usize)>,
    residue_degree: u64,
    normal_form: bool,
}

enum Section {
    None,
    Group(usize, GroupDraft),
    Ring(usize, String, RingDraft),
    Extension(usize, ExtensionDraft),
    Query,
}

pub fn io_parse(text: &str) -> Result<Scenario> {
    let mut sc = Scenario::default();
    let mut section = Section::None;
    let mut seen_sections = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let line = Line {
            number: i + 1,
            text: content,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('[') {
            close_section(&mut sc, std::mem::replace(&mut section, Section::None))?;
            let name = trimmed
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| line.err(column_of(content, trimmed), "unterminated section header"))?
                .trim();
            if !seen_sections.insert(name.to_string()) {
                return Err(line.err(1, format!("duplicate section [{name}]")));
            }
            section = match name {
                "group" => Section::Group(line.number, GroupDraft::default()),
                "ring R" => Section::Ring(line.number, "R".into(), RingDraft::default()),
                "ring S" => Section::Ring(line.number, "S".into(), RingDraft::default()),
                "extension" => {
                    if sc.r.is_none() || sc.s.is_none() {
                        return Err(line.err(1, "[extension] must follow [ring R] and [ring S]"));
                    }
                    Section::Extension(
                        line.number,
                        ExtensionDraft {
                            residue_degree: 1,
                            ..Default::default()
                        },
                    )
                }
                "query" => Section::Query,
                other => return Err(line.err(2, format!("unknown section [{other}]"))),
            };
            continue;
        }
        match &mut section {
            Section::None => return Err(line.err(1, "content outside of a section")),
            Section::Group(_, g) => group_line(&line, g)?,
            Section::Ring(_, _, r) => ring_line(&line, r)?,
            Section::Extension(_, x) => extension_line(&line, x)?,
            Section::Query => sc.queries.push(query_line(&line, &sc)?),
        }
    }
    close_section(&mut sc, section)?;
    Ok(sc)
}

fn group_line(line: &Line, g: &mut GroupDraft) -> Result<()> {
    let (key, value, col) = line.key_value()?;
    match key {
        "u" => {}
        "ranks" => g.ranks = Some(parse_list_usize(line, value, col)?),
        "generators" => {
            let mut gens = Vec::new();
            for part in value.split(';') {
                gens.push(parse_element(line, part, col + column_of(value, part) - 1)?);
            }
            g.generators = Some(gens);
        }
        "embedding" => g.embedding = Some(parse_matrix(line, value, col)?),
        other => return Err(line.err(1, format!("unknown key `{other}` in [group]"))),
    }
    Ok(())
}

fn ring_line(line: &Line, r: &mut RingDraft) -> Result<()> {
    let (key, value, col) = line.key_value()?;
    if let Some((name, level)) = key.split_once('@') {
        let name = name.trim();
        if !is_identifier(name) {
            return Err(line.err(1, format!("bad parameter name `{name}`")));
        }
        let level: usize = level
            .trim()
            .parse()
            .map_err(|_| line.err(column_of(line.text, level), "expected a level after `@`"))?;
        let v = parse_element(line, value, col)?;
        r.params.push((name.to_string(), level, v, line.number));
        return Ok(());
    }
    match key {
        "prefix" if is_identifier(value) => r.prefix = Some(value.to_string()),
        "ranks" => r.ranks = Some(parse_list_usize(line, value, col)?),
        "units" => {
            for u in value.split(',').map(str::trim).filter(|u| !u.is_empty()) {
                if !is_identifier(u) {
                    return Err(line.err(col, format!("bad unit name `{u}`")));
                }
                r.units.push(u.to_string());
            }
        }
        "s_good" => r.s_good = parse_list_usize(line, value, col)?.into_iter().collect(),
        "very_good" => r.very_good = parse_bool(line, value, col)?,
        other => return Err(line.err(1, format!("unknown key `{other}` in ring section"))),
    }
    Ok(())
}

fn extension_line(line: &Line, x: &mut ExtensionDraft) -> Result<()> {
    let (key, value, col) = line.key_value()?;
    if let Some(row) = key.strip_prefix("unit.") {
        let row: usize = row
            .parse()
            .map_err(|_| line.err(1, "expected `unit.<row> = <unit word>`"))?;
        x.units.insert(row, (value.to_string(), line.number));
        return Ok(());
    }
    match key {
        "matrix" => x.matrix = Some(parse_matrix(line, value, col)?),
        "residue_degree" => {
            x.residue_degree = value
                .parse()
                .ok()
                .filter(|f| *f >= 1)
                .ok_or_else(|| line.err(col, "residue degree must be a positive integer"))?
        }
        "normal_form" => x.normal_form = parse_bool(line, value, col)?,
        other => return Err(line.err(1, format!("unknown key `{other}` in [extension]"))),
    }
    Ok(())
}

fn query_line(line: &Line, sc: &Scenario) -> Result<Query> {
    let trimmed = line.text.trim();
    let (command, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
    let mut body = rest.trim();
    let mut options = BTreeMap::new();
    while let Some((head, last)) = body.rsplit_once(char::is_whitespace).or(Some(("", body))) {
        let Some((k, v)) = last.split_once('=') else { break };
        if !QUERY_OPTIONS.contains(&k) {
            return Err(line.err(column_of(line.text, last), format!("unknown option `{k}`")));
        }
        options.insert(k.to_string(), v.to_string());
        body = head.trim_end();
        if head.is_empty() {
            break;
        }
    }
    let pair = |state: Option<&RingState>, which: &str| -> Result<(Monomial, Monomial)> {
        let state = state.ok_or_else(|| line.err(1, format!("`{command}` needs [ring {which}]")))?;
        let (a, b) = body
            .split_once(';')
            .ok_or_else(|| line.err(1, format!("`{command}` expects two monomials separated by `;`")))?;
        let parse = |t: &str| {
            parse_monomial(state, t).map_err(|(c, m)| line.err(column_of(line.text, t) + c - 1, m))
        };
        Ok((parse(a)?, parse(b)?))
    };
    let kind = match command {
        "analyze" => QueryKind::Analyze,
        "normalize" => QueryKind::Normalize,
        "divide" => {
            let (m1, m2) = pair(sc.r.as_ref(), "R")?;
            QueryKind::Divide { m1, m2 }
        }
        "certify" => {
            let (g, h) = pair(sc.s.as_ref(), "S")?;
            QueryKind::Certify { g, h }
        }
        other => return Err(line.err(column_of(line.text, command), format!("unknown query `{other}`"))),
    };
    if matches!(kind, QueryKind::Analyze | QueryKind::Normalize) && !body.is_empty() {
        return Err(line.err(column_of(line.text, body), format!("`{command}` takes no arguments")));
    }
    Ok(Query {
        kind,
        options,
        line: line.number,
    })
}

fn close_section(sc: &mut Scenario, section: Section) -> Result<()> {
    match section {
        Section::None | Section::Query => {}
        Section::Group(header, g) => {
            let ranks = g.ranks.ok_or_else(|| Error::parse(header, 1, "[group] needs `ranks`"))?;
            let gens = g
                .generators
                .ok_or_else(|| Error::parse(header, 1, "[group] needs `generators`"))?;
            let spec = ValueGroupSpec::new(ranks.len(), ranks, gens).map_err(|e| Error::parse(header, 1, e.to_string()))?;
            let embedding = g
                .embedding
                .map(|c| SubgroupEmbedding::new(&spec, c))
                .transpose()
                .map_err(|e| Error::parse(header, 1, e.to_string()))?;
            sc.group = Some(GroupSection { spec, embedding });
        }
        Section::Ring(header, label, draft) => {
            let state = draft.finish(&label, header)?;
            if label == "R" {
                sc.r = Some(state);
            } else {
                sc.s = Some(state);
            }
        }
        Section::Extension(header, x) => {
            let r = sc.r.clone().expect("checked at header");
            let s = sc.s.clone().expect("checked at header");
            let c = x
                .matrix
                .ok_or_else(|| Error::parse(header, 1, "[extension] needs `matrix`"))?;
            let n = c.len();
            let mut units = vec![BTreeMap::new(); n];
            for (row, (word, line)) in x.units {
                if row == 0 || row > n {
                    return Err(Error::parse(line, 1, format!("row {row} is not in 1..={n}")));
                }
                let m = parse_monomial(&s, &word).map_err(|(c, m)| Error::parse(line, c, m))?;
                if !m.is_unit() {
                    return Err(Error::parse(line, 1, "row units must be a product of unit symbols"));
                }
                units[row - 1] = m.unit_word;
            }
            let ext = MonomialExtension {
                r,
                s,
                c,
                units,
                residue_degree: x.residue_degree,
                normal_form: x.normal_form,
                generation_asserted: false,
            };
            let report = ex_validate(&ext);
            if !report.is_valid() {
                return Err(Error::parse(header, 1, format!("extension: {}", report.issues.join("; "))));
            }
            if ext.normal_form && !ext.is_normal_shape() {
                return Err(Error::parse(header, 1, "extension is flagged normal but is not in normal form"));
            }
            sc.extension = Some(ext);
        }
    }
    Ok(())
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn matrix_text(m: &[Vec<i64>]) -> String {
    serde_json::to_string(m).expect("integer matrix serializes")
}

fn emit_ring(out: &mut String, label: &str, r: &RingState) {
    writeln!(out, "[ring {label}]").unwrap();
    writeln!(out, "prefix = {}", r.prefix).unwrap();
    writeln!(out, "ranks = {}", join(&r.level_ranks, ", ")).unwrap();
    if !r.unit_symbols.is_empty() {
        writeln!(out, "units = {}", join(&r.unit_symbols, ", ")).unwrap();
    }
    if !r.s_good.is_empty() {
        writeln!(out, "s_good = {}", join(&r.s_good, ", ")).unwrap();
    }
    writeln!(out, "very_good = {}", if r.very_good { "yes" } else { "no" }).unwrap();
    for (pos, p) in r.params() {
        writeln!(out, "{} @{} = {}", p.name, pos.level, p.value).unwrap();
    }
    out.push('\n');
}

impl Scenario {
    /// Canonical text; parsing it yields an equal scenario.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        if let Some(g) = &self.group {
            out.push_str("[group]\n");
            writeln!(out, "ranks = {}", join(&g.spec.level_ranks, ", ")).unwrap();
            writeln!(out, "generators = {}", join(&g.spec.generators, "; ")).unwrap();
            if let Some(emb) = &g.embedding {
                writeln!(out, "embedding = {}", matrix_text(&emb.c)).unwrap();
            }
            out.push('\n');
        }
        if let Some(r) = &self.r {
            emit_ring(&mut out, "R", r);
        }
        if let Some(s) = &self.s {
            emit_ring(&mut out, "S", s);
        }
        if let Some(x) = &self.extension {
            out.push_str("[extension]\n");
            writeln!(out, "matrix = {}", matrix_text(&x.c)).unwrap();
            for (i, word) in x.units.iter().enumerate() {
                if !word.is_empty() {
                    let m = Monomial {
                        unit_word: word.clone(),
                        ..Monomial::one()
                    };
                    writeln!(out, "unit.{} = {m}", i + 1).unwrap();
                }
            }
            writeln!(out, "residue_degree = {}", x.residue_degree).unwrap();
            writeln!(out, "normal_form = {}", if x.normal_form { "yes" } else { "no" }).unwrap();
            out.push('\n');
        }
        if !self.queries.is_empty() {
            out.push_str("[query]\n");
            for q in &self.queries {
                writeln!(out, "{}", q.emit()).unwrap();
            }
        }
        out
    }

    /// SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.emit().as_bytes()))
    }
}
