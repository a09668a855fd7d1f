//! Monomial skeleton of a regular local ring dominated by a valuation.
//!
//! Parameters are stratified by the convex level of their values. At level
//! `i` the first `s_i` parameters form the rational basis; the remaining ones
//! have level-`i` coordinates in its Q-span. Every parameter, unit symbol and
//! auxiliary factor carries a unique name, and monomials are keyed by name.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::exact_reals::Sign;
use crate::perron::TransformRecord;
use crate::value_groups::{level_rank, GroupElement};

/// 1-based (level, index) position of a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamPos {
    pub level: usize,
    pub index: usize,
}

impl ParamPos {
    pub fn new(level: usize, index: usize) -> Self {
        ParamPos { level, index }
    }
}

impl fmt::Display for ParamPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.level, self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    pub value: GroupElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingState {
    pub u: usize,
    /// Rational ranks `s_i`.
    pub level_ranks: Vec<usize>,
    /// `levels[i - 1][j - 1]` is the parameter at position `(i, j)`.
    pub levels: Vec<Vec<Parameter>>,
    pub unit_symbols: BTreeSet<String>,
    /// Named factors of positive value that are not parameters, produced when
    /// a rationally dependent parameter is split off by a type-(2, m) step.
    pub aux_values: BTreeMap<String, GroupElement>,
    pub s_good: BTreeSet<usize>,
    pub very_good: bool,
    /// Prefix for generated parameter names.
    pub prefix: String,
    pub log: Vec<TransformRecord>,
}

impl RingState {
    pub fn new(u: usize, level_ranks: Vec<usize>, levels: Vec<Vec<Parameter>>, prefix: &str) -> Self {
        RingState {
            u,
            level_ranks,
            levels,
            unit_symbols: BTreeSet::new(),
            aux_values: BTreeMap::new(),
            s_good: BTreeSet::new(),
            very_good: false,
            prefix: prefix.to_string(),
            log: Vec::new(),
        }
    }

    /// `t_i` for every level.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn n(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn param(&self, pos: ParamPos) -> Option<&Parameter> {
        self.levels.get(pos.level.wrapping_sub(1))?.get(pos.index.wrapping_sub(1))
    }

    pub fn position(&self, name: &str) -> Option<ParamPos> {
        self.levels.iter().enumerate().find_map(|(i, params)| {
            params
                .iter()
                .position(|p| p.name == name)
                .map(|j| ParamPos::new(i + 1, j + 1))
        })
    }

    pub fn value_of(&self, name: &str) -> Option<&GroupElement> {
        self.position(name)
            .and_then(|pos| self.param(pos))
            .map(|p| &p.value)
            .or_else(|| self.aux_values.get(name))
    }

    pub fn is_basis(&self, pos: ParamPos) -> bool {
        pos.index <= self.level_ranks[pos.level - 1]
    }

    /// Parameters in position order (level 1 first).
    pub fn params(&self) -> impl Iterator<Item = (ParamPos, &Parameter)> {
        self.levels.iter().enumerate().flat_map(|(i, params)| {
            params
                .iter()
                .enumerate()
                .map(move |(j, p)| (ParamPos::new(i + 1, j + 1), p))
        })
    }

    pub fn basis_values(&self, level: usize) -> Vec<GroupElement> {
        self.levels[level - 1][..self.level_ranks[level - 1]]
            .iter()
            .map(|p| p.value.clone())
            .collect()
    }

    pub fn is_known_name(&self, name: &str) -> bool {
        self.position(name).is_some() || self.unit_symbols.contains(name) || self.aux_values.contains_key(name)
    }

    /// First unused name of the form `{prefix}_{k}`.
    pub fn fresh_name(&self, prefix: &str, taken: &BTreeSet<String>) -> String {
        (1..)
            .map(|k| format!("{prefix}_{k}"))
            .find(|c| !self.is_known_name(c) && !taken.contains(c))
            .expect("unbounded search")
    }

    /// Canonical multi-line description (no log).
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (i, params) in self.levels.iter().enumerate() {
            let entries: Vec<String> = params
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    let star = if j < self.level_ranks[i] { "*" } else { "" };
                    format!("{}{star}={}", p.name, p.value)
                })
                .collect();
            out.push_str(&format!("level {}: {}\n", i + 1, entries.join(", ")));
        }
        if !self.unit_symbols.is_empty() {
            let units: Vec<&str> = self.unit_symbols.iter().map(String::as_str).collect();
            out.push_str(&format!("units: {}\n", units.join(", ")));
        }
        if !self.aux_values.is_empty() {
            let aux: Vec<String> = self.aux_values.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.push_str(&format!("aux: {}\n", aux.join(", ")));
        }
        let good: Vec<String> = self.s_good.iter().map(usize::to_string).collect();
        out.push_str(&format!(
            "s-good: {{{}}} very-good: {}\n",
            good.join(","),
            if self.very_good { "yes" } else { "no" }
        ));
        out
    }
}

/// `Π x^a · Π unit^b · Π aux^c`. Exponents are integers so that quotients can
/// be formed; a monomial proper has nonnegative parameter exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub exponents: BTreeMap<String, i64>,
    pub unit_word: BTreeMap<String, i64>,
    pub aux: BTreeMap<String, i64>,
}

fn bump(map: &mut BTreeMap<String, i64>, key: &str, by: i64) {
    if by == 0 {
        return;
    }
    let entry = map.entry(key.to_string()).or_insert(0);
    *entry += by;
    if *entry == 0 {
        map.remove(key);
    }
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn var(name: &str) -> Self {
        Monomial::power(name, 1)
    }

    pub fn power(name: &str, e: i64) -> Self {
        let mut m = Monomial::one();
        bump(&mut m.exponents, name, e);
        m
    }

    pub fn unit(name: &str, e: i64) -> Self {
        let mut m = Monomial::one();
        bump(&mut m.unit_word, name, e);
        m
    }

    pub fn aux_power(name: &str, e: i64) -> Self {
        let mut m = Monomial::one();
        bump(&mut m.aux, name, e);
        m
    }

    pub fn from_exponents<'a>(entries: impl IntoIterator<Item = (&'a str, i64)>) -> Self {
        let mut m = Monomial::one();
        for (k, e) in entries {
            bump(&mut m.exponents, k, e);
        }
        m
    }

    pub fn is_one(&self) -> bool {
        self.exponents.is_empty() && self.unit_word.is_empty() && self.aux.is_empty()
    }

    /// True when the monomial has no parameter or auxiliary factors.
    pub fn is_unit(&self) -> bool {
        self.exponents.is_empty() && self.aux.is_empty()
    }

    pub fn exponent(&self, name: &str) -> i64 {
        self.exponents.get(name).copied().unwrap_or(0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.exponents.values().chain(self.aux.values()).all(|e| *e >= 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.clone();
        for (k, e) in &other.exponents {
            bump(&mut m.exponents, k, *e);
        }
        for (k, e) in &other.unit_word {
            bump(&mut m.unit_word, k, *e);
        }
        for (k, e) in &other.aux {
            bump(&mut m.aux, k, *e);
        }
        m
    }

    pub fn pow(&self, k: i64) -> Monomial {
        let scale = |map: &BTreeMap<String, i64>| -> BTreeMap<String, i64> {
            if k == 0 {
                return BTreeMap::new();
            }
            map.iter().map(|(n, e)| (n.clone(), e * k)).collect()
        };
        Monomial {
            exponents: scale(&self.exponents),
            unit_word: scale(&self.unit_word),
            aux: scale(&self.aux),
        }
    }

    /// `mul` that reports exponent overflow instead of wrapping or panicking.
    pub fn checked_mul(&self, other: &Monomial) -> Option<Monomial> {
        fn merge(into: &mut BTreeMap<String, i64>, from: &BTreeMap<String, i64>) -> Option<()> {
            for (k, e) in from {
                let sum = into.get(k).copied().unwrap_or(0).checked_add(*e)?;
                if sum == 0 {
                    into.remove(k);
                } else {
                    into.insert(k.clone(), sum);
                }
            }
            Some(())
        }
        let mut m = self.clone();
        merge(&mut m.exponents, &other.exponents)?;
        merge(&mut m.unit_word, &other.unit_word)?;
        merge(&mut m.aux, &other.aux)?;
        Some(m)
    }

    pub fn checked_pow(&self, k: i64) -> Option<Monomial> {
        let scale = |map: &BTreeMap<String, i64>| -> Option<BTreeMap<String, i64>> {
            if k == 0 {
                return Some(BTreeMap::new());
            }
            map.iter().map(|(n, e)| Some((n.clone(), e.checked_mul(k)?))).collect()
        };
        Some(Monomial {
            exponents: scale(&self.exponents)?,
            unit_word: scale(&self.unit_word)?,
            aux: scale(&self.aux)?,
        })
    }

    pub fn inverse(&self) -> Monomial {
        self.pow(-1)
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        self.mul(&other.inverse())
    }

    /// Same monomial with the unit word dropped.
    pub fn without_units(&self) -> Monomial {
        Monomial {
            unit_word: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.exponents.keys().chain(self.unit_word.keys()).chain(self.aux.keys())
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return f.write_str("1");
        }
        let mut first = true;
        for (name, e) in self.exponents.iter().chain(&self.aux).chain(&self.unit_word) {
            if !first {
                f.write_str(" * ")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::precondition(self.issues.join("; ")))
        }
    }
}

pub fn rs_validate(state: &RingState) -> ValidationReport {
    let mut issues = Vec::new();
    let u = state.u;
    if state.level_ranks.len() != u || state.levels.len() != u {
        issues.push(format!("expected {u} levels"));
        return ValidationReport { issues };
    }
    let mut names = BTreeSet::new();
    for (pos, p) in state.params() {
        if !names.insert(p.name.clone()) {
            issues.push(format!("duplicate name {}", p.name));
        }
        if p.value.rank() != u {
            issues.push(format!("{} has a value of rank {}", p.name, p.value.rank()));
            continue;
        }
        if p.value.convex_level() != pos.level {
            issues.push(format!(
                "{} at level {} has value {} of convex level {}",
                p.name,
                pos.level,
                p.value,
                p.value.convex_level()
            ));
        }
        match p.value.sign() {
            Ok(Sign::Positive) => {}
            Ok(_) => issues.push(format!("{} has nonpositive value {}", p.name, p.value)),
            Err(e) => issues.push(format!("{}: {e}", p.name)),
        }
    }
    for name in state.unit_symbols.iter().chain(state.aux_values.keys()) {
        if !names.insert(name.clone()) {
            issues.push(format!("duplicate name {name}"));
        }
    }
    for (name, v) in &state.aux_values {
        if v.rank() != u || v.sign().ok() != Some(Sign::Positive) {
            issues.push(format!("auxiliary factor {name} needs a positive value of rank {u}"));
        }
    }
    for level in 1..=u {
        let s = state.level_ranks[level - 1];
        let params = &state.levels[level - 1];
        if s == 0 || params.len() < s {
            issues.push(format!("level {level} needs 1 <= s_i <= t_i (s={s}, t={})", params.len()));
            continue;
        }
        if params.iter().any(|p| p.value.rank() != u) {
            continue;
        }
        let basis = state.basis_values(level);
        if level_rank(&basis, level) != s {
            issues.push(format!("basis values at level {level} are rationally dependent"));
            continue;
        }
        for p in &params[s..] {
            let mut with = basis.clone();
            with.push(p.value.clone());
            if level_rank(&with, level) != s {
                issues.push(format!(
                    "{} has a level-{level} coordinate outside the span of the basis values",
                    p.name
                ));
            }
        }
    }
    if state.s_good.iter().any(|l| *l == 0 || *l > u) {
        issues.push("s-good levels out of range".into());
    }
    if state.very_good && state.s_good.len() != u {
        issues.push("very good parameters must be good at every level".into());
    }
    ValidationReport { issues }
}

pub fn rs_monomial_value(state: &RingState, m: &Monomial) -> Result<GroupElement> {
    let mut total = GroupElement::zero(state.u);
    for (name, e) in m.exponents.iter().chain(&m.aux) {
        let v = state
            .value_of(name)
            .ok_or_else(|| Error::ForeignParameter(name.clone()))?;
        total = total.add(&v.scale(*e));
    }
    for name in m.unit_word.keys() {
        if !state.unit_symbols.contains(name) {
            return Err(Error::ForeignParameter(name.clone()));
        }
    }
    Ok(total)
}

/// Replaces a non-basis parameter by a new one. With a unit factor the new
/// parameter is `old · unit_factor` and must keep the old value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replacement {
    pub pos: ParamPos,
    pub name: String,
    pub value: GroupElement,
    pub unit_factor: BTreeMap<String, i64>,
}

pub fn rs_change_of_parameters(
    state: &RingState,
    replacements: &[Replacement],
    s_good: Option<BTreeSet<usize>>,
) -> Result<RingState> {
    let mut next = state.clone();
    for rep in replacements {
        let old = state
            .param(rep.pos)
            .ok_or_else(|| Error::precondition(format!("no parameter at {}", rep.pos)))?;
        if state.is_basis(rep.pos) {
            return Err(Error::precondition(format!(
                "{} at {} is a basis parameter and cannot be replaced",
                old.name, rep.pos
            )));
        }
        if rep.value.convex_level() != rep.pos.level {
            return Err(Error::precondition(format!(
                "replacement for {} has convex level {} instead of {}",
                old.name,
                rep.value.convex_level(),
                rep.pos.level
            )));
        }
        if !rep.unit_factor.is_empty() && rep.value != old.value {
            return Err(Error::precondition(format!(
                "absorbing a unit into {} cannot change its value",
                old.name
            )));
        }
        for unit in rep.unit_factor.keys() {
            next.unit_symbols.insert(unit.clone());
        }
        next.levels[rep.pos.level - 1][rep.pos.index - 1] = Parameter {
            name: rep.name.clone(),
            value: rep.value.clone(),
        };
    }
    if let Some(good) = s_good {
        next.s_good = good;
        next.very_good = next.very_good && next.s_good.len() == next.u;
    }
    rs_validate(&next).into_result()?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(s: &str) -> GroupElement {
        GroupElement::parse_literal(s).unwrap()
    }

    fn state(ranks: &[usize], levels: &[&[(&str, &str)]]) -> RingState {
        let levels = levels
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|(n, v)| Parameter {
                        name: n.to_string(),
                        value: el(v),
                    })
                    .collect()
            })
            .collect();
        RingState::new(ranks.len(), ranks.to_vec(), levels, "x")
    }

    #[test]
    fn validation_examples() {
        assert!(rs_validate(&state(&[2], &[&[("x1", "1"), ("x2", "sqrt(2)")]])).is_valid());
        assert!(!rs_validate(&state(&[2], &[&[("x1", "1"), ("x2", "2")]])).is_valid());
        assert!(!rs_validate(&state(&[1, 1], &[&[("x1", "(0, 1)")], &[("x2", "(0, 1)")]])).is_valid());
        assert!(rs_validate(&state(&[1], &[&[("x1", "1"), ("x2", "5/2")]])).is_valid());
        assert!(!rs_validate(&state(&[1], &[&[("x1", "1"), ("x2", "sqrt(3)")]])).is_valid());
        assert!(!rs_validate(&state(&[1], &[&[("x1", "-1")]])).is_valid());
    }

    #[test]
    fn monomial_values() {
        let s = state(&[2], &[&[("x1", "1"), ("x2", "sqrt(2)")]]);
        assert!(rs_monomial_value(&s, &Monomial::one()).unwrap().is_zero());
        assert_eq!(rs_monomial_value(&s, &Monomial::power("x1", 2)).unwrap(), el("2"));
        let m = Monomial::from_exponents([("x1", 1), ("x2", 1)]);
        assert_eq!(rs_monomial_value(&s, &m).unwrap(), el("1 + sqrt(2)"));
        assert!(matches!(
            rs_monomial_value(&s, &Monomial::var("z")),
            Err(Error::ForeignParameter(_))
        ));
    }

    #[test]
    fn monomial_algebra() {
        let a = Monomial::from_exponents([("x", 2), ("y", 1)]).mul(&Monomial::unit("g", -1));
        let b = Monomial::from_exponents([("x", 1)]);
        let q = a.div(&b);
        assert_eq!(q.to_string(), "x * y * g^-1");
        assert_eq!(q.mul(&b), a);
        assert!(a.div(&a).is_one());
        assert!(!b.div(&a).is_nonnegative());
    }

    #[test]
    fn change_of_parameters() {
        let s = state(&[1], &[&[("x1", "1"), ("x2", "3/2")]]);
        assert_eq!(rs_change_of_parameters(&s, &[], None).unwrap(), s);

        let absorb = Replacement {
            pos: ParamPos::new(1, 2),
            name: "x2'".into(),
            value: el("3/2"),
            unit_factor: BTreeMap::from([("gamma".to_string(), -1)]),
        };
        let t = rs_change_of_parameters(&s, &[absorb], None).unwrap();
        assert_eq!(t.param(ParamPos::new(1, 2)).unwrap().value, el("3/2"));
        assert!(t.unit_symbols.contains("gamma"));

        let basis = Replacement {
            pos: ParamPos::new(1, 1),
            name: "z".into(),
            value: el("1"),
            unit_factor: BTreeMap::new(),
        };
        assert!(rs_change_of_parameters(&s, &[basis], None).is_err());

        let s2 = state(&[1, 1], &[&[("x1", "(1, 0)"), ("x2", "(2, 0)")], &[("x3", "(0, 1)")]]);
        let wrong_level = Replacement {
            pos: ParamPos::new(1, 2),
            name: "z".into(),
            value: el("(0, 1)"),
            unit_factor: BTreeMap::new(),
        };
        assert!(rs_change_of_parameters(&s2, &[wrong_level], None).is_err());
    }
}
