//! Perron transforms of types (1,m), (2,m), (3,m) and monomial divisibility.
//!
//! Every transform is described by a [`TransformRecord`]: each replaced
//! parameter of the old state is written as a monomial (possibly with unit
//! and auxiliary factors) in the parameters of the new state. The engine
//! builds a record, then [`apply_record`] checks and installs it; replaying a
//! transcript goes through the same function.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice;
use crate::ring_state::{rs_monomial_value, rs_validate, Monomial, ParamPos, Parameter, RingState};
use crate::value_groups::{level_coordinates, GroupElement};

pub const DEFAULT_STEP_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Type1 { m: usize },
    Type2 { m: usize, r: usize, lambda: usize },
    Type3 { m: usize, k: usize, l: usize, d: Vec<u64> },
    /// A monomial change of variables with unimodular or nonsingular matrix.
    Birational { label: String },
    /// Parameters multiplied by unit words.
    UnitAbsorption,
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::Type1 { m } => write!(f, "type1(m={m})"),
            TransformKind::Type2 { m, r, lambda } => write!(f, "type2(m={m},r={r},lambda={lambda})"),
            TransformKind::Type3 { m, k, l, d } => {
                let d: Vec<String> = d.iter().map(u64::to_string).collect();
                write!(f, "type3(m={m},k={k},l={l},d=[{}])", d.join(","))
            }
            TransformKind::Birational { label } => write!(f, "birational({label})"),
            TransformKind::UnitAbsorption => f.write_str("units"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformRecord {
    pub kind: TransformKind,
    /// Old parameter name -> expression in the new state.
    pub substitutions: BTreeMap<String, Monomial>,
    /// Rows: affected old parameters; columns: new ones.
    pub exponent_matrix: Vec<Vec<i64>>,
    /// Parameter names per level after the transform.
    pub layout: Vec<Vec<String>>,
    pub level_ranks: Vec<usize>,
    /// Values of parameters introduced by this transform.
    pub values: BTreeMap<String, GroupElement>,
    pub new_units: BTreeSet<String>,
    pub new_aux: BTreeMap<String, GroupElement>,
    pub s_good: BTreeSet<usize>,
    pub very_good: bool,
}

impl TransformRecord {
    /// A record that changes nothing, to be filled in by the caller.
    pub fn unchanged(state: &RingState, kind: TransformKind) -> Self {
        TransformRecord {
            kind,
            substitutions: BTreeMap::new(),
            exponent_matrix: vec![vec![1]],
            layout: state
                .levels
                .iter()
                .map(|ps| ps.iter().map(|p| p.name.clone()).collect())
                .collect(),
            level_ranks: state.level_ranks.clone(),
            values: BTreeMap::new(),
            new_units: BTreeSet::new(),
            new_aux: BTreeMap::new(),
            s_good: state.s_good.clone(),
            very_good: state.very_good,
        }
    }

    pub fn determinant(&self) -> BigInt {
        lattice::det(&lattice::from_i64(&self.exponent_matrix))
    }

    pub fn is_identity(&self) -> bool {
        self.substitutions.is_empty() && self.values.is_empty() && self.new_units.is_empty() && self.new_aux.is_empty()
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.layout.iter().flatten().any(|n| n == name)
    }

    pub fn position(&self, name: &str) -> Option<ParamPos> {
        self.layout.iter().enumerate().find_map(|(i, names)| {
            names
                .iter()
                .position(|n| n == name)
                .map(|j| ParamPos::new(i + 1, j + 1))
        })
    }

    /// Canonical multi-line form.
    pub fn emit(&self) -> String {
        let mut out = format!("{}\n", self.kind);
        for (old, expr) in &self.substitutions {
            out.push_str(&format!("  sub {old} = {expr}\n"));
        }
        for (name, v) in &self.values {
            out.push_str(&format!("  new {name} = {v}\n"));
        }
        for unit in &self.new_units {
            out.push_str(&format!("  unit {unit}\n"));
        }
        for (name, v) in &self.new_aux {
            out.push_str(&format!("  aux {name} = {v}\n"));
        }
        let rows: Vec<String> = self
            .exponent_matrix
            .iter()
            .map(|r| format!("[{}]", r.iter().map(i64::to_string).collect::<Vec<_>>().join(",")))
            .collect();
        out.push_str(&format!("  matrix [{}]\n", rows.join(",")));
        let levels: Vec<String> = self
            .layout
            .iter()
            .zip(&self.level_ranks)
            .map(|(names, s)| {
                let named: Vec<String> = names
                    .iter()
                    .enumerate()
                    .map(|(j, n)| if j < *s { format!("{n}*") } else { n.clone() })
                    .collect();
                format!("[{}]", named.join(" "))
            })
            .collect();
        out.push_str(&format!("  layout {}\n", levels.join(" ")));
        out
    }
}

/// Checks `rec` against `state` and returns the transformed state.
pub fn apply_record(state: &RingState, rec: &TransformRecord) -> Result<RingState> {
    if rec.layout.len() != state.u || rec.level_ranks.len() != state.u {
        return Err(Error::precondition("record has the wrong number of levels"));
    }
    let mut levels = Vec::new();
    for names in &rec.layout {
        let mut params = Vec::new();
        for name in names {
            let value = match rec.values.get(name) {
                Some(v) => v.clone(),
                None if !rec.substitutions.contains_key(name) => state
                    .position(name)
                    .and_then(|p| state.param(p))
                    .map(|p| p.value.clone())
                    .ok_or_else(|| Error::precondition(format!("record refers to unknown parameter {name}")))?,
                None => return Err(Error::precondition(format!("{name} is substituted but kept"))),
            };
            params.push(Parameter {
                name: name.clone(),
                value,
            });
        }
        levels.push(params);
    }
    let mut log = state.log.clone();
    log.push(rec.clone());
    let next = RingState {
        u: state.u,
        level_ranks: rec.level_ranks.clone(),
        levels,
        unit_symbols: state.unit_symbols.union(&rec.new_units).cloned().collect(),
        aux_values: state
            .aux_values
            .iter()
            .chain(&rec.new_aux)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        s_good: rec.s_good.clone(),
        very_good: rec.very_good,
        prefix: state.prefix.clone(),
        log,
    };
    for (_, p) in state.params() {
        if !rec.substitutions.contains_key(&p.name) && next.position(&p.name).is_none() {
            return Err(Error::precondition(format!("{} dropped without a substitution", p.name)));
        }
    }
    for (old, expr) in &rec.substitutions {
        let before = state
            .value_of(old)
            .ok_or_else(|| Error::ForeignParameter(old.clone()))?;
        let after = rs_monomial_value(&next, expr)?;
        if *before != after {
            return Err(Error::precondition(format!(
                "substitution {old} = {expr} changes the value {before} to {after}"
            )));
        }
    }
    rs_validate(&next).into_result()?;
    Ok(next)
}

fn check_level(state: &RingState, m: usize) -> Result<()> {
    if m == 0 || m > state.u {
        return Err(Error::precondition(format!("level {m} is not in 1..={}", state.u)));
    }
    Ok(())
}

fn check_unimodular(rec: &TransformRecord) -> Result<()> {
    if rec.determinant().abs() != BigInt::one() {
        return Err(Error::precondition(format!("{} produced a non-unimodular matrix", rec.kind)));
    }
    Ok(())
}

fn monomial_of(names: &[String], exps: &[i64]) -> Monomial {
    Monomial::from_exponents(names.iter().map(String::as_str).zip(exps.iter().copied()))
}

/// Type (1,m) as a Brun step: with `a` the basis parameter of largest value
/// at level `m` and `b` the runner-up, `x_a = N_b·N_a` and every other
/// parameter is kept, so `ν(N_a) = ν(x_a) - ν(x_b)`.
///
/// With two basis values this is the Euclid step that subtracts the smaller
/// from the larger. Subtracting the minimum from every other value instead
/// is not convergent from three values on: two values can shrink to zero
/// while the third stays put, and a monomial quotient never turns
/// nonnegative.
pub fn pe_type1_step(state: &RingState, m: usize) -> Result<(RingState, TransformRecord)> {
    check_level(state, m)?;
    let s = state.level_ranks[m - 1];
    let mut rec = TransformRecord::unchanged(state, TransformKind::Type1 { m });
    if s >= 2 {
        let basis = &state.levels[m - 1][..s];
        let mut order: Vec<usize> = (0..s).collect();
        let mut err = None;
        order.sort_by(|&i, &j| {
            basis[i].value.compare(&basis[j].value).unwrap_or_else(|e| {
                err.get_or_insert(e);
                std::cmp::Ordering::Equal
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        let (a, b) = (order[s - 1], order[s - 2]);
        let mut e = vec![vec![0i64; s]; s];
        for (j, row) in e.iter_mut().enumerate() {
            row[j] = 1;
        }
        e[a][b] = 1;
        let name = state.fresh_name(&state.prefix, &BTreeSet::new());
        rec.values.insert(name.clone(), basis[a].value.sub(&basis[b].value));
        rec.substitutions.insert(
            basis[a].name.clone(),
            Monomial::from_exponents([(basis[b].name.as_str(), 1), (name.as_str(), 1)]),
        );
        rec.layout[m - 1][a] = name;
        rec.exponent_matrix = e;
    }
    check_unimodular(&rec)?;
    let next = apply_record(state, &rec)?;
    Ok((next, rec))
}

/// Supplies the level λ and value of the fresh parameter of a type-(2,m)
/// transform, which depend on ring data outside the monomial skeleton.
pub trait ResidueOracle {
    fn fresh_parameter(&self, state: &RingState, m: usize, r: usize) -> Result<(usize, GroupElement)>;
}

impl<F> ResidueOracle for F
where
    F: Fn(&RingState, usize, usize) -> Result<(usize, GroupElement)>,
{
    fn fresh_parameter(&self, state: &RingState, m: usize, r: usize) -> Result<(usize, GroupElement)> {
        self(state, m, r)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedOracle {
    pub lambda: usize,
    pub value: GroupElement,
}

impl ResidueOracle for FixedOracle {
    fn fresh_parameter(&self, _: &RingState, _: usize, _: usize) -> Result<(usize, GroupElement)> {
        Ok((self.lambda, self.value.clone()))
    }
}

/// Primitive integer relation `Σ c_i w_i = 0` among level-`m` coordinates,
/// where the last value is in the span of the others.
fn level_relation(values: &[GroupElement], m: usize) -> Result<Vec<i64>> {
    let rows = level_coordinates(values, m);
    let (target, basis) = rows.split_last().expect("nonempty");
    let q = lattice::solve_left_rational(&basis.to_vec(), target)
        .ok_or_else(|| Error::precondition("the dependent parameter is outside the span of the basis values"))?;
    let mut q: Vec<BigRational> = q;
    q.push(-BigRational::one());
    let lcm = q.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = q.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    ints.iter()
        .map(|x| (x / &g).to_i64().ok_or(Error::Overflow("type-2 relation")))
        .collect()
}

/// Type (2,m) on the dependent parameter `x_{m,r}`.
///
/// Subtractive steps `w_b ← w_b − w_a` (for `ν_m(w_a) < ν_m(w_b)`) run on the
/// basis values and `ν(x_{m,r})`. Each step maps the integer relation among
/// them by `c_a ← c_a + c_b`; the step kept is the one minimizing `Σ|c_i|`,
/// which ends in a pair with equal level-`m` values.
pub fn pe_type2(
    state: &RingState,
    m: usize,
    r: usize,
    oracle: &dyn ResidueOracle,
    step_cap: usize,
) -> Result<(RingState, TransformRecord)> {
    check_level(state, m)?;
    let s = state.level_ranks[m - 1];
    let t = state.levels[m - 1].len();
    if r <= s || r > t {
        return Err(Error::precondition(format!("type (2,{m}) needs {s} < r <= {t}, got r={r}")));
    }
    let old: Vec<&Parameter> = state.levels[m - 1][..s]
        .iter()
        .chain(std::iter::once(&state.levels[m - 1][r - 1]))
        .collect();
    let mut w: Vec<GroupElement> = old.iter().map(|p| p.value.clone()).collect();
    let mut c = level_relation(&w, m)?;
    let size = s + 1;
    let mut e: Vec<Vec<i64>> = (0..size).map(|i| (0..size).map(|j| i64::from(i == j)).collect()).collect();
    let phi = |c: &[i64]| c.iter().map(|x| x.abs()).sum::<i64>();
    let mut steps = 0;
    while phi(&c) != 2 {
        if steps >= step_cap {
            return Err(Error::StepCap(step_cap));
        }
        let mut best: Option<(i64, usize, usize)> = None;
        for a in 0..size {
            for b in 0..size {
                if a == b || !w[a].compare_from_level(&w[b], m)?.is_lt() {
                    continue;
                }
                let next = phi(&c) - c[a].abs() + (c[a] + c[b]).abs();
                if best.is_none_or(|(p, _, _)| next < p) {
                    best = Some((next, a, b));
                }
            }
        }
        let (_, a, b) = best.ok_or_else(|| Error::precondition("no subtractive step available"))?;
        w[b] = w[b].sub(&w[a]);
        c[a] += c[b];
        for row in e.iter_mut() {
            row[a] += row[b];
        }
        steps += 1;
    }
    let tied: Vec<usize> = (0..size).filter(|&i| c[i] != 0).collect();
    let (p, q) = (tied[0], tied[1]);
    let (lo, hi) = if w[p].compare(&w[q])?.is_le() { (p, q) } else { (q, p) };
    for row in e.iter_mut() {
        row[lo] += row[hi];
    }
    let rest_value = w[hi].sub(&w[lo]);
    let cols: Vec<usize> = (0..size).filter(|&j| j != hi).collect();

    let (lambda, y_value) = oracle.fresh_parameter(state, m, r)?;
    if lambda == 0 || lambda > state.u {
        return Err(Error::Oracle(format!("level {lambda} out of range")));
    }
    if y_value.rank() != state.u || y_value.convex_level() != lambda {
        return Err(Error::Oracle(format!(
            "value {y_value} has convex level {} but the oracle claims {lambda}",
            y_value.convex_level()
        )));
    }
    if state.s_good.contains(&(m + 1)) && lambda > m {
        return Err(Error::Oracle(format!(
            "level {} is s-good so the fresh parameter must have level <= {m}, got {lambda}",
            m + 1
        )));
    }

    let mut rec = TransformRecord::unchanged(state, TransformKind::Type2 { m, r, lambda });
    let mut taken = BTreeSet::new();
    let mut new_names = Vec::new();
    for (i, &col) in cols.iter().enumerate() {
        let identical = (0..size).all(|j| e[i][j] == i64::from(j == col));
        let name = if identical {
            old[i].name.clone()
        } else {
            let n = state.fresh_name(&state.prefix, &taken);
            taken.insert(n.clone());
            rec.values.insert(n.clone(), w[col].clone());
            n
        };
        new_names.push(name);
    }
    let rest_name = if rest_value.is_zero() {
        let n = state.fresh_name(&format!("{}u", state.prefix), &taken);
        rec.new_units.insert(n.clone());
        n
    } else {
        let n = state.fresh_name(&format!("{}a", state.prefix), &taken);
        rec.new_aux.insert(n.clone(), rest_value.clone());
        n
    };
    taken.insert(rest_name.clone());
    let y_name = state.fresh_name(&state.prefix, &taken);
    rec.values.insert(y_name.clone(), y_value);

    for (i, p) in old.iter().enumerate() {
        let exps: Vec<i64> = cols.iter().map(|&j| e[i][j]).collect();
        let mut expr = monomial_of(&new_names, &exps);
        let k = e[i][hi];
        expr = expr.mul(&if rest_value.is_zero() {
            Monomial::unit(&rest_name, k)
        } else {
            Monomial::aux_power(&rest_name, k)
        });
        if expr != Monomial::var(&p.name) {
            rec.substitutions.insert(p.name.clone(), expr);
        }
    }
    rec.exponent_matrix = e
        .iter()
        .map(|row| cols.iter().chain(std::iter::once(&hi)).map(|&j| row[j]).collect())
        .collect();
    check_unimodular(&rec)?;

    let level_m = &mut rec.layout[m - 1];
    level_m[..s].clone_from_slice(&new_names);
    if lambda == m {
        level_m[r - 1] = y_name;
    } else {
        level_m.remove(r - 1);
        rec.layout[lambda - 1].push(y_name);
    }
    rec.s_good = state.s_good.iter().copied().filter(|j| *j > m).collect();
    rec.very_good = false;
    let next = apply_record(state, &rec).map_err(|err| match err {
        Error::Precondition(msg) => Error::Oracle(msg),
        other => other,
    })?;
    Ok((next, rec))
}

/// Type (3,m): `x_{k,l} = N · Π_j x_{m,j}^{d_j}` for `k > m`.
pub fn pe_type3(state: &RingState, m: usize, k: usize, l: usize, d: &[u64]) -> Result<(RingState, TransformRecord)> {
    check_level(state, m)?;
    check_level(state, k)?;
    if k <= m {
        return Err(Error::precondition(format!("type (3,{m}) needs k > m, got k={k}")));
    }
    let s = state.level_ranks[m - 1];
    if l == 0 || l > state.levels[k - 1].len() {
        return Err(Error::precondition(format!("no parameter at ({k},{l})")));
    }
    if d.len() != s {
        return Err(Error::precondition(format!("d must have length {s}, got {}", d.len())));
    }
    let kind = TransformKind::Type3 {
        m,
        k,
        l,
        d: d.to_vec(),
    };
    let mut rec = TransformRecord::unchanged(state, kind);
    if d.iter().any(|x| *x != 0) {
        let d_i64: Vec<i64> = d
            .iter()
            .map(|x| i64::try_from(*x).map_err(|_| Error::Overflow("type-3 exponent")))
            .collect::<Result<_>>()?;
        let target = &state.levels[k - 1][l - 1];
        let basis = &state.levels[m - 1][..s];
        let mut value = target.value.clone();
        for (p, dj) in basis.iter().zip(&d_i64) {
            value = value.sub(&p.value.scale(*dj));
        }
        let name = state.fresh_name(&state.prefix, &BTreeSet::new());
        let basis_names: Vec<String> = basis.iter().map(|p| p.name.clone()).collect();
        rec.substitutions.insert(
            target.name.clone(),
            Monomial::var(&name).mul(&monomial_of(&basis_names, &d_i64)),
        );
        rec.values.insert(name.clone(), value);
        rec.layout[k - 1][l - 1] = name;
        let mut matrix = vec![std::iter::once(1).chain(d_i64.iter().copied()).collect::<Vec<_>>()];
        for j in 0..s {
            matrix.push((0..=s).map(|c| i64::from(c == j + 1)).collect());
        }
        rec.exponent_matrix = matrix;
    }
    let next = apply_record(state, &rec)?;
    Ok((next, rec))
}

/// Rewrites `m` (over the state before `log`) in the parameters after it.
pub fn pe_reexpress(log: &[TransformRecord], m: &Monomial) -> Result<Monomial> {
    let mut cur = m.clone();
    for rec in log {
        let mut next = Monomial {
            exponents: BTreeMap::new(),
            ..cur.clone()
        };
        for (name, e) in &cur.exponents {
            let factor = if let Some(expr) = rec.substitutions.get(name) {
                expr.checked_pow(*e)
            } else if rec.has_param(name) {
                Some(Monomial::power(name, *e))
            } else {
                return Err(Error::ForeignParameter(name.clone()));
            };
            next = factor
                .and_then(|f| next.checked_mul(&f))
                .ok_or(Error::Overflow("monomial exponent"))?;
        }
        cur = next;
    }
    Ok(cur)
}

#[derive(Clone, Debug)]
pub struct DivideOutcome {
    pub state: RingState,
    /// `M2/M1` in the final parameters, all exponents nonnegative.
    pub witness: Monomial,
    pub m1: Monomial,
    pub m2: Monomial,
    pub log: Vec<TransformRecord>,
}

/// Transforms `state` until `m1` divides `m2`.
///
/// While the quotient has a negative exponent, let `l` be the largest level
/// where it is nonzero. Type-(1,l) steps make its level-`l` part
/// nonnegative; then for a positive exponent at `x_{l,j0}`, one type-(3,i)
/// step per lower level `i` pulls enough `x_{i,j}` out of `x_{l,j0}` to
/// clear the negative exponents there.
pub fn pe_monomial_divide(state: &RingState, m1: &Monomial, m2: &Monomial, step_cap: usize) -> Result<DivideOutcome> {
    for m in [m1, m2] {
        if !m.is_nonnegative() || !m.aux.is_empty() {
            return Err(Error::precondition(format!("{m} is not a monomial in the parameters")));
        }
        for name in m.exponents.keys() {
            let pos = state
                .position(name)
                .ok_or_else(|| Error::ForeignParameter(name.clone()))?;
            if !state.is_basis(pos) {
                return Err(Error::precondition(format!("{name} is not a basis parameter")));
            }
        }
    }
    let v1 = rs_monomial_value(state, m1)?;
    let v2 = rs_monomial_value(state, m2)?;
    if v1.compare(&v2)?.is_gt() {
        return Err(Error::precondition(format!("ν(M1) = {v1} exceeds ν(M2) = {v2}")));
    }
    let mut cur = state.clone();
    let mut a = m1.clone();
    let mut b = m2.clone();
    let mut log = Vec::new();
    loop {
        let quotient = b.div(&a);
        if quotient.is_nonnegative() {
            return Ok(DivideOutcome {
                state: cur,
                witness: quotient,
                m1: a,
                m2: b,
                log,
            });
        }
        let mut by_level: BTreeMap<usize, Vec<(usize, i64)>> = BTreeMap::new();
        for (name, e) in &quotient.exponents {
            let pos = cur.position(name).ok_or_else(|| Error::ForeignParameter(name.clone()))?;
            by_level.entry(pos.level).or_default().push((pos.index, *e));
        }
        let (&l, top) = by_level.iter().next_back().expect("quotient has a negative exponent");
        let mut records = Vec::new();
        if top.iter().any(|(_, e)| *e < 0) {
            records.push(TransformKind::Type1 { m: l });
        } else {
            let &(j0, dl) = top.iter().find(|(_, e)| *e > 0).expect("nonzero level part");
            for (&i, entries) in by_level.range(..l) {
                if entries.iter().all(|(_, e)| *e >= 0) {
                    continue;
                }
                let mut d = vec![0u64; cur.level_ranks[i - 1]];
                for &(j, e) in entries {
                    if e < 0 {
                        d[j - 1] = Integer::div_ceil(&(-e), &dl) as u64;
                    }
                }
                records.push(TransformKind::Type3 { m: i, k: l, l: j0, d });
            }
        }
        for kind in records {
            if log.len() >= step_cap {
                return Err(Error::StepCap(step_cap));
            }
            let (next, rec) = match kind {
                TransformKind::Type1 { m } => pe_type1_step(&cur, m)?,
                TransformKind::Type3 { m, k, l, d } => pe_type3(&cur, m, k, l, &d)?,
                _ => unreachable!(),
            };
            a = pe_reexpress(std::slice::from_ref(&rec), &a)?;
            b = pe_reexpress(std::slice::from_ref(&rec), &b)?;
            cur = next;
            log.push(rec);
        }
    }
}
