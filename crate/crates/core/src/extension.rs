//! Locally monomial extensions `R → S`: every parameter `z_i` of `R` is a
//! unit times a monomial `Π w_j^{c_ij}` in the parameters of `S`.
//!
//! Normalization brings the matrix to `diag(e, 1, …, 1)` with a single unit
//! `γ` on the first row. In that form every Perron transform of `R` other
//! than type (1,1) lifts to `S`, which is what the division certificate uses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice;
use crate::perron::{apply_record, pe_monomial_divide, pe_reexpress, pe_type3, TransformKind, TransformRecord};
use crate::ring_state::{rs_monomial_value, Monomial, ParamPos, RingState};
use crate::value_groups::{
    embedding_from_values, group_from_values, vg_first_level_lattice, vg_initial_index, vg_ramification_index,
    GroupElement, SubgroupEmbedding, ValueGroupSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    R,
    S,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::R => "R",
            Side::S => "S",
        })
    }
}

pub type Step = (Side, TransformRecord);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialExtension {
    pub r: RingState,
    pub s: RingState,
    /// Row `i`: exponents of the `S` parameters (position order) in the
    /// `i`-th parameter of `R`.
    pub c: Vec<Vec<i64>>,
    /// Unit word attached to each row.
    pub units: Vec<BTreeMap<String, i64>>,
    pub residue_degree: u64,
    pub normal_form: bool,
    /// Tracked assertion that `S` is a localization of `R[z_1, …, z_m]`.
    pub generation_asserted: bool,
}

fn positions(state: &RingState) -> Vec<ParamPos> {
    state.params().map(|(p, _)| p).collect()
}

fn names(state: &RingState) -> Vec<String> {
    state.params().map(|(_, p)| p.name.clone()).collect()
}

impl MonomialExtension {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// `z_i` as a monomial over the names of `S`.
    pub fn relation(&self, i: usize) -> Monomial {
        let s_names = names(&self.s);
        let mut m = Monomial::from_exponents(s_names.iter().map(String::as_str).zip(self.c[i].iter().copied()));
        for (u, k) in &self.units[i] {
            m = m.mul(&Monomial::unit(u, *k));
        }
        m
    }

    /// Rebuilds the matrix and units from relations keyed by `R` names.
    fn with_relations(r: RingState, s: RingState, rel: &BTreeMap<String, Monomial>, template: &MonomialExtension) -> Result<Self> {
        let s_names = names(&s);
        let mut c = Vec::new();
        let mut units = Vec::new();
        for name in names(&r) {
            let m = rel
                .get(&name)
                .ok_or_else(|| Error::precondition(format!("no relation for {name}")))?;
            if !m.aux.is_empty() || m.exponents.keys().any(|k| !s_names.contains(k)) {
                return Err(Error::precondition(format!("{name} = {m} is not a monomial over S")));
            }
            c.push(s_names.iter().map(|y| m.exponent(y)).collect());
            units.push(m.unit_word.clone());
        }
        Ok(MonomialExtension {
            r,
            s,
            c,
            units,
            residue_degree: template.residue_degree,
            normal_form: false,
            generation_asserted: template.generation_asserted,
        })
    }

    fn relations(&self) -> BTreeMap<String, Monomial> {
        names(&self.r)
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, self.relation(i)))
            .collect()
    }

    pub fn determinant(&self) -> BigInt {
        lattice::det(&lattice::from_i64(&self.c))
    }

    pub fn e(&self) -> Result<u64> {
        self.determinant()
            .abs()
            .to_u64()
            .ok_or(Error::Overflow("ramification index"))
    }

    /// `C = diag(e, 1, …, 1)`, units only on row 1, none when `e = 1`.
    pub fn is_normal_shape(&self) -> bool {
        let n = self.n();
        if n == 0 || self.c[0][0] < 1 {
            return false;
        }
        let diag_ok = (0..n).all(|i| {
            (0..n).all(|j| {
                let want = if i != j {
                    0
                } else if i == 0 {
                    self.c[0][0]
                } else {
                    1
                };
                self.c[i][j] == want
            })
        });
        let units_ok = self.units.iter().skip(1).all(BTreeMap::is_empty) && (self.c[0][0] > 1 || self.units[0].is_empty());
        diag_ok && units_ok
    }

    pub fn gamma(&self) -> &BTreeMap<String, i64> {
        &self.units[0]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtensionReport {
    pub issues: Vec<String>,
    pub e: Option<u64>,
    pub induced_e: Option<u64>,
    pub invariant_factors: Vec<u64>,
    pub residue_degree: u64,
    pub defect: u64,
}

impl ExtensionReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Γ_ω from the values of the `S` parameters, Γ_ν ⊂ Γ_ω from those of `R`.
pub fn induced_groups(ext: &MonomialExtension) -> Result<(ValueGroupSpec, SubgroupEmbedding)> {
    let omega: Vec<GroupElement> = ext.s.params().map(|(_, p)| p.value.clone()).collect();
    let nu: Vec<GroupElement> = ext.r.params().map(|(_, p)| p.value.clone()).collect();
    let spec = group_from_values(ext.s.u, &omega)?;
    let emb = embedding_from_values(&spec, &nu)?;
    Ok((spec, emb))
}

pub fn ex_validate(ext: &MonomialExtension) -> ExtensionReport {
    let mut report = ExtensionReport {
        residue_degree: ext.residue_degree,
        defect: 1,
        ..Default::default()
    };
    let issues = &mut report.issues;
    for (side, state) in [("R", &ext.r), ("S", &ext.s)] {
        for issue in crate::ring_state::rs_validate(state).issues {
            issues.push(format!("{side}: {issue}"));
        }
    }
    if ext.r.u != ext.s.u || ext.r.level_ranks != ext.s.level_ranks || ext.r.level_sizes() != ext.s.level_sizes() {
        issues.push("R and S must have the same rank and level layout".into());
        return report;
    }
    let n = ext.r.n();
    if ext.c.len() != n || ext.c.iter().any(|row| row.len() != n) || ext.units.len() != n {
        issues.push(format!("the exponent matrix must be {n}x{n} with one unit word per row"));
        return report;
    }
    if ext.c.iter().flatten().any(|x| *x < 0) {
        issues.push("the exponent matrix must be nonnegative".into());
    }
    let det = ext.determinant();
    if det.is_zero() {
        issues.push("the exponent matrix is singular".into());
        return report;
    }
    report.e = det.abs().to_u64();
    for (i, (_, p)) in ext.r.params().enumerate() {
        for u in ext.units[i].keys() {
            if !ext.s.unit_symbols.contains(u) {
                issues.push(format!("unit {u} of row {} is not declared in S", i + 1));
            }
        }
        match rs_monomial_value(&ext.s, &ext.relation(i).without_units()) {
            Ok(v) if v == p.value => {}
            Ok(v) => issues.push(format!("{}: ν = {} but the monomial has value {}", p.name, p.value, v)),
            Err(e) => issues.push(format!("{}: {e}", p.name)),
        }
    }
    if !report.issues.is_empty() {
        return report;
    }
    match induced_groups(ext).and_then(|(_, emb)| vg_ramification_index(&emb)) {
        Ok(ram) => {
            report.induced_e = Some(ram.e);
            report.invariant_factors = ram.invariant_factors;
            if report.e != Some(ram.e) {
                report.issues.push(format!(
                    "|det C| = {} differs from the index {} of the induced value groups",
                    report.e.unwrap_or(0),
                    ram.e
                ));
            }
        }
        Err(e) => report.issues.push(format!("induced value groups: {e}")),
    }
    report
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureCheck {
    pub factors_cyclic: bool,
    pub first_level_rank: usize,
    pub first_level_index: u64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionReport {
    pub e: u64,
    pub epsilon: u64,
    pub invariant_factors: Vec<u64>,
    pub efg: bool,
    pub defect: u64,
    /// Present when `1 < ε = e`.
    pub structure: Option<StructureCheck>,
}

pub fn ex_efg_decide(spec: &ValueGroupSpec, emb: &SubgroupEmbedding) -> Result<DecisionReport> {
    let ram = vg_ramification_index(emb)?;
    let epsilon = vg_initial_index(spec, emb)?;
    let efg = ram.e == epsilon;
    let structure = (efg && epsilon > 1).then(|| {
        let k = ram.invariant_factors.len();
        let factors_cyclic = ram
            .invariant_factors
            .iter()
            .enumerate()
            .all(|(i, f)| *f == if i + 1 == k { ram.e } else { 1 });
        let first = vg_first_level_lattice(spec, Some(emb));
        let first_level_rank = first.omega.len();
        let first_level_index = match (&first.omega[..], first.nu.as_deref()) {
            ([g], Some([h])) => g
                .iter()
                .zip(h)
                .find(|(x, _)| !x.is_zero())
                .and_then(|(x, y)| (y / x).abs().to_u64())
                .unwrap_or(0),
            _ => 0,
        };
        StructureCheck {
            factors_cyclic,
            first_level_rank,
            first_level_index,
            holds: factors_cyclic && first_level_rank == 1 && first_level_index == ram.e,
        }
    });
    Ok(DecisionReport {
        e: ram.e,
        epsilon,
        invariant_factors: ram.invariant_factors,
        efg,
        defect: 1,
        structure,
    })
}

pub fn ex_efg_decide_extension(ext: &MonomialExtension) -> Result<DecisionReport> {
    let (spec, emb) = induced_groups(ext)?;
    ex_efg_decide(&spec, &emb)
}

/// Expresses the new parameters of `rec` through the old ones. Works when
/// the substitutions form a square system in the new names whose exponent
/// matrix is unimodular.
fn invert_record(rec: &TransformRecord) -> Result<BTreeMap<String, Monomial>> {
    let eqs: Vec<(&String, &Monomial)> = rec.substitutions.iter().collect();
    let unknowns: Vec<String> = eqs
        .iter()
        .flat_map(|(_, m)| m.exponents.keys())
        .filter(|n| rec.values.contains_key(*n))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if eqs.len() != unknowns.len() {
        return Err(Error::precondition(format!("{} cannot be inverted", rec.kind)));
    }
    let e: Vec<Vec<i64>> = eqs
        .iter()
        .map(|(_, m)| unknowns.iter().map(|u| m.exponent(u)).collect())
        .collect();
    let inv = lattice::inverse_unimodular(&lattice::from_i64(&e))?;
    let bases: Vec<Monomial> = eqs
        .iter()
        .map(|(old, m)| {
            let mut known = (*m).clone();
            known.exponents.retain(|k, _| !unknowns.contains(k));
            Monomial::var(old).div(&known)
        })
        .collect();
    let mut out = BTreeMap::new();
    for (k, name) in unknowns.iter().enumerate() {
        let mut m = Monomial::one();
        for (i, base) in bases.iter().enumerate() {
            let x = inv[k][i].to_i64().ok_or(Error::Overflow("inverse substitution"))?;
            m = m.mul(&base.pow(x));
        }
        out.insert(name.clone(), m);
    }
    Ok(out)
}

/// Replaces `R` names in `m` by their relations.
fn substitute(m: &Monomial, rel: &BTreeMap<String, Monomial>) -> Result<Monomial> {
    let mut out = Monomial {
        exponents: BTreeMap::new(),
        ..m.clone()
    };
    for (name, e) in &m.exponents {
        let r = rel.get(name).ok_or_else(|| Error::ForeignParameter(name.clone()))?;
        out = out.mul(&r.pow(*e));
    }
    Ok(out)
}

/// Tracks an extension through transforms of either side.
struct Tracker {
    r: RingState,
    s: RingState,
    rel: BTreeMap<String, Monomial>,
    steps: Vec<Step>,
}

impl Tracker {
    fn new(ext: &MonomialExtension) -> Self {
        Tracker {
            r: ext.r.clone(),
            s: ext.s.clone(),
            rel: ext.relations(),
            steps: Vec::new(),
        }
    }

    fn apply_r(&mut self, rec: TransformRecord) -> Result<()> {
        if rec.is_identity() {
            return Ok(());
        }
        let next = apply_record(&self.r, &rec)?;
        let inverse = invert_record(&rec)?;
        let mut rel = BTreeMap::new();
        for name in names(&next) {
            let m = match inverse.get(&name) {
                Some(expr) => substitute(expr, &self.rel)?,
                None => self.rel[&name].clone(),
            };
            rel.insert(name, m);
        }
        self.r = next;
        self.rel = rel;
        self.steps.push((Side::R, rec));
        Ok(())
    }

    fn apply_s(&mut self, rec: TransformRecord) -> Result<()> {
        if rec.is_identity() {
            return Ok(());
        }
        self.s = apply_record(&self.s, &rec)?;
        for m in self.rel.values_mut() {
            *m = pe_reexpress(std::slice::from_ref(&rec), m)?;
        }
        self.steps.push((Side::S, rec));
        Ok(())
    }

    fn extension(&self, template: &MonomialExtension) -> Result<MonomialExtension> {
        MonomialExtension::with_relations(self.r.clone(), self.s.clone(), &self.rel, template)
    }
}

/// Multiplies the `S` parameters at `targets` (flat indices) by unit words:
/// the new parameter is `old · U`.
fn unit_absorption(s: &RingState, targets: &[(usize, BTreeMap<String, i64>)]) -> TransformRecord {
    let mut rec = TransformRecord::unchanged(s, TransformKind::UnitAbsorption);
    let pos = positions(s);
    let mut taken = BTreeSet::new();
    for (idx, word) in targets {
        if word.is_empty() {
            continue;
        }
        let p = pos[*idx];
        let old = s.param(p).expect("position in range");
        let name = s.fresh_name(&s.prefix, &taken);
        taken.insert(name.clone());
        let mut expr = Monomial::var(&name);
        for (u, k) in word {
            expr = expr.mul(&Monomial::unit(u, -k));
        }
        rec.substitutions.insert(old.name.clone(), expr);
        rec.values.insert(name.clone(), old.value.clone());
        rec.layout[p.level - 1][p.index - 1] = name;
    }
    let k = rec.substitutions.len().max(1);
    rec.exponent_matrix = (0..k).map(|i| (0..k).map(|j| i64::from(i == j)).collect()).collect();
    rec
}

/// Monomial change of variables on `state`: for each `(flat index, row)` the
/// old parameter becomes `Π new^row` over fresh parameters placed at
/// `new_slots`, with the given values.
fn birational(
    state: &RingState,
    label: &str,
    rows: &[(usize, Vec<i64>)],
    new_slots: &[usize],
    new_values: &[GroupElement],
    kept: &[(usize, Vec<(usize, i64)>)],
) -> TransformRecord {
    let mut rec = TransformRecord::unchanged(state, TransformKind::Birational { label: label.into() });
    let pos = positions(state);
    let mut taken = BTreeSet::new();
    let mut fresh = Vec::new();
    for (slot, value) in new_slots.iter().zip(new_values) {
        let name = state.fresh_name(&state.prefix, &taken);
        taken.insert(name.clone());
        rec.values.insert(name.clone(), value.clone());
        fresh.push((slot, name));
    }
    let old_names = names(state);
    for (idx, row) in rows {
        let mut expr = Monomial::from_exponents(fresh.iter().map(|(_, n)| n.as_str()).zip(row.iter().copied()));
        if let Some((_, extra)) = kept.iter().find(|(i, _)| i == idx) {
            for (j, k) in extra {
                expr = expr.mul(&Monomial::power(&old_names[*j], *k));
            }
        }
        rec.substitutions.insert(old_names[*idx].clone(), expr);
    }
    for (slot, name) in &fresh {
        let p = pos[**slot];
        rec.layout[p.level - 1][p.index - 1] = name.clone();
    }
    rec.exponent_matrix = rows.iter().map(|(_, r)| r.clone()).collect();
    rec
}

fn flat_value(state: &RingState, idx: usize) -> GroupElement {
    state.params().nth(idx).expect("index in range").1.value.clone()
}

#[derive(Clone, Debug)]
pub struct NormalizeOutcome {
    pub ext: MonomialExtension,
    pub steps: Vec<Step>,
    /// `(r, v)` of the `e > 1` branch.
    pub shift: Option<(Vec<i64>, i64)>,
}

impl NormalizeOutcome {
    pub fn log(&self, side: Side) -> Vec<TransformRecord> {
        self.steps
            .iter()
            .filter(|(s, _)| *s == side)
            .map(|(_, r)| r.clone())
            .collect()
    }
}

fn to_i64_matrix(m: &lattice::IMat) -> Result<Vec<Vec<i64>>> {
    lattice::to_i64(m)
}

pub fn ex_normalize(ext: &MonomialExtension) -> Result<NormalizeOutcome> {
    let report = ex_validate(ext);
    if !report.is_valid() {
        return Err(Error::precondition(report.issues.join("; ")));
    }
    if ext.is_normal_shape() {
        return Ok(NormalizeOutcome {
            ext: MonomialExtension {
                normal_form: true,
                ..ext.clone()
            },
            steps: Vec::new(),
            shift: None,
        });
    }
    let e = ext.e()?;
    let (spec, emb) = induced_groups(ext)?;
    let epsilon = vg_initial_index(&spec, &emb)?;
    if epsilon != e {
        return Err(Error::NotEssentiallyFinite { e, epsilon });
    }
    let n = ext.n();
    let mut tr = Tracker::new(ext);
    let mut shift = None;
    if e == 1 {
        absorb_and_untangle(&mut tr, ext, 0)?;
    } else {
        shift = Some(normalize_ramified(&mut tr, ext, e)?);
    }
    let mut out = tr.extension(ext)?;
    out.normal_form = true;
    out.generation_asserted = true;
    if !out.is_normal_shape() || out.e()? != e || out.n() != n {
        return Err(Error::precondition("normalization did not reach the normal form"));
    }
    if e > 1 && !first_level_generators_hold(&out)? {
        return Err(Error::precondition("first parameters do not generate the first-level lattices"));
    }
    Ok(NormalizeOutcome {
        ext: out,
        steps: tr.steps,
        shift,
    })
}

/// Rows and columns `from..n`: absorb the units with `B = C̄⁻¹`, then
/// replace the `R` parameters by `x_j = Π x'_k^{c̄_jk}` so that `x'_k = y_k`.
fn absorb_and_untangle(tr: &mut Tracker, template: &MonomialExtension, from: usize) -> Result<()> {
    let cur = tr.extension(template)?;
    let n = cur.n();
    let block: Vec<Vec<i64>> = cur.c[from..].iter().map(|row| row[from..].to_vec()).collect();
    if cur.c[from..].iter().any(|row| row[..from].iter().any(|x| *x != 0)) {
        return Err(Error::precondition("matrix is not block triangular"));
    }
    let b = to_i64_matrix(&lattice::inverse_unimodular(&lattice::from_i64(&block))?)?;
    let mut targets = Vec::new();
    for k in 0..n - from {
        let mut word: BTreeMap<String, i64> = BTreeMap::new();
        for (j, row_units) in cur.units[from..].iter().enumerate() {
            for (u, x) in row_units {
                *word.entry(u.clone()).or_insert(0) += b[k][j] * x;
            }
        }
        word.retain(|_, x| *x != 0);
        targets.push((from + k, word));
    }
    let rec = unit_absorption(&tr.s, &targets);
    tr.apply_s(rec)?;

    let identity = (0..block.len()).all(|i| (0..block.len()).all(|j| block[i][j] == i64::from(i == j)));
    if !identity {
        let rows: Vec<(usize, Vec<i64>)> = (from..n).map(|j| (j, block[j - from].clone())).collect();
        let slots: Vec<usize> = (from..n).collect();
        let values: Vec<GroupElement> = slots.iter().map(|&k| flat_value(&tr.s, k)).collect();
        let rec = birational(&tr.r, "untangle", &rows, &slots, &values, &[]);
        tr.apply_r(rec)?;
    }
    Ok(())
}

fn normalize_ramified(tr: &mut Tracker, ext: &MonomialExtension, e: u64) -> Result<(Vec<i64>, i64)> {
    let e_i = i64::try_from(e).map_err(|_| Error::Overflow("ramification index"))?;
    if ext.r.level_ranks[0] != 1 {
        return Err(Error::precondition("e > 1 requires a single basis parameter at level 1"));
    }
    let t1 = ext.r.levels[0].len();
    let n = ext.n();
    let c = &ext.c;
    if c[0][0] != e_i || c[0][1..].iter().any(|x| *x != 0) {
        return Err(Error::precondition("row 1 must be x_11 = γ·y_11^e"));
    }
    for i in 1..t1 {
        let unit_row = (0..n).all(|j| c[i][j] == i64::from(i == j));
        if !unit_row || !ext.units[i].is_empty() {
            return Err(Error::precondition(format!("row {} must be x = y without units", i + 1)));
        }
    }
    let pos = positions(&ext.r);

    // (i) clear the level-1 non-basis columns from the higher rows.
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut slots = Vec::new();
    let mut values = Vec::new();
    for j in t1..n {
        let extra: Vec<(usize, i64)> = (1..t1).filter(|&i| c[j][i] != 0).map(|i| (i, c[j][i])).collect();
        if extra.is_empty() {
            continue;
        }
        let mut v = flat_value(&tr.r, j);
        for (i, k) in &extra {
            v = v.sub(&flat_value(&tr.r, *i).scale(*k));
        }
        let mut row = vec![0; slots.len()];
        row.push(1);
        for r in rows.iter_mut() {
            let (_, r): &mut (usize, Vec<i64>) = r;
            r.push(0);
        }
        rows.push((j, row));
        kept.push((j, extra));
        slots.push(j);
        values.push(v);
    }
    if !rows.is_empty() {
        let rec = birational(&tr.r, "clear-level-one", &rows, &slots, &values, &kept);
        tr.apply_r(rec)?;
    }

    // (ii) C̄ r = -(c_{j,1}), (iii) least v with r_i + v·e > 0.
    let cur = tr.extension(ext)?;
    let bar: Vec<Vec<i64>> = cur.c[t1..].iter().map(|row| row[t1..].to_vec()).collect();
    let first: Vec<i64> = cur.c[t1..].iter().map(|row| row[0]).collect();
    let b = to_i64_matrix(&lattice::inverse_unimodular(&lattice::from_i64(&bar))?)?;
    let r: Vec<i64> = b
        .iter()
        .map(|row| -row.iter().zip(&first).map(|(x, y)| x * y).sum::<i64>())
        .collect();
    let v = r
        .iter()
        .map(|ri| num_integer::Integer::div_floor(&-ri, &e_i) + 1)
        .max()
        .unwrap_or(1)
        .max(1);

    // (iv) y_i = y'_i · y_11^{r_i + v·e} on S.
    for (k, ri) in r.iter().enumerate() {
        let p = pos[t1 + k];
        let d = u64::try_from(ri + v * e_i).expect("positive by choice of v");
        let (_, rec) = pe_type3(&tr.s, 1, p.level, p.index, &[d])?;
        tr.apply_s(rec)?;
    }

    // (v) x_j = x'_j · x_11^{v·g_j} on R, g = C̄·1.
    for (k, row) in bar.iter().enumerate() {
        let g: i64 = row.iter().sum();
        if g == 0 {
            continue;
        }
        let p = pos[t1 + k];
        let d = u64::try_from(v * g).map_err(|_| Error::precondition("negative exponent in the lower block"))?;
        let (_, rec) = pe_type3(&tr.r, 1, p.level, p.index, &[d])?;
        tr.apply_r(rec)?;
    }

    // (vi)-(vii) unit absorption with B and the final change of variables.
    absorb_and_untangle(tr, ext, t1)?;
    Ok((r, v))
}

/// After normalization with `e > 1`: `ν(x_11)` spans the first-level lattice
/// of Γ_ν and `ω(y_11)` that of Γ_ω.
pub fn first_level_generators_hold(ext: &MonomialExtension) -> Result<bool> {
    let (spec, emb) = induced_groups(ext)?;
    let first = vg_first_level_lattice(&spec, Some(&emb));
    let coords = |g: &GroupElement| -> Option<Vec<BigInt>> { spec.coordinates(g) };
    let x11 = &ext.r.levels[0][0].value;
    let y11 = &ext.s.levels[0][0].value;
    let same_up_to_sign = |basis: &[Vec<BigInt>], v: Option<Vec<BigInt>>| match (basis, v) {
        ([b], Some(v)) => *b == v || b.iter().zip(&v).all(|(x, y)| *x == -y),
        _ => false,
    };
    Ok(same_up_to_sign(&first.omega, coords(y11)) && same_up_to_sign(first.nu.as_deref().unwrap_or(&[]), coords(x11)))
}

/// Lifts a transform of `R` to `S` for an extension in normal form.
///
/// With `x_p = U_p · Π x'_q^{E_pq}` on `R`, the `S` side is
/// `y_p = U_p · γ^{E_{p,11}} · y'_11^{e·E_{p,11}} · Π_{q≠11} y'_q^{E_pq}`,
/// which keeps `x'_11 = γ·y'_11^e` and `x'_q = y'_q`. When `e > 1`, `x_11`
/// itself must not change.
pub fn ex_lift_gmts(ext: &MonomialExtension, rec: &TransformRecord) -> Result<(MonomialExtension, TransformRecord)> {
    if !ext.normal_form || !ext.is_normal_shape() {
        return Err(Error::precondition("lifting needs an extension in normal form"));
    }
    let e = ext.c[0][0];
    if e > 1 && matches!(rec.kind, TransformKind::Type1 { m: 1 }) {
        return Err(Error::precondition("a type (1,1) transform cannot be lifted when e > 1"));
    }
    let r_next = apply_record(&ext.r, rec)?;
    let x11_old = ext.r.levels[0][0].name.clone();
    let x11_new = rec.layout[0][0].clone();

    let mut name_map: BTreeMap<String, String> = names(&ext.r).into_iter().zip(names(&ext.s)).collect();
    let mut taken = BTreeSet::new();
    let mut srec = TransformRecord::unchanged(&ext.s, rec.kind.clone());
    for (i, level) in rec.layout.iter().enumerate() {
        for (j, name) in level.iter().enumerate() {
            let s_name = match name_map.get(name) {
                Some(s) if !rec.substitutions.contains_key(name) => s.clone(),
                _ => {
                    let fresh = ext.s.fresh_name(&ext.s.prefix, &taken);
                    taken.insert(fresh.clone());
                    name_map.insert(name.clone(), fresh.clone());
                    let value = rec.values.get(name).cloned().ok_or_else(|| {
                        Error::precondition(format!("no value recorded for {name}"))
                    })?;
                    srec.values.insert(fresh.clone(), value);
                    fresh
                }
            };
            if srec.layout.len() <= i {
                srec.layout.push(Vec::new());
            }
            if j < srec.layout[i].len() {
                srec.layout[i][j] = s_name;
            } else {
                srec.layout[i].push(s_name);
            }
        }
        srec.layout[i].truncate(level.len());
    }
    for name in rec.new_units.iter().chain(rec.new_aux.keys()) {
        if ext.s.is_known_name(name) {
            return Err(Error::precondition(format!("{name} already names an object of S")));
        }
    }
    let gamma = Monomial {
        unit_word: ext.gamma().clone(),
        ..Monomial::one()
    };
    let y11_new = name_map[&x11_new].clone();
    for (old, expr) in &rec.substitutions {
        if *old == x11_old && e > 1 {
            if *expr != Monomial::var(&x11_new) {
                return Err(Error::precondition("the transform changes x_11, which cannot be lifted when e > 1"));
            }
            srec.substitutions.insert(name_map_old(ext, old), Monomial::var(&y11_new));
            continue;
        }
        let mut s_expr = Monomial {
            exponents: BTreeMap::new(),
            ..expr.clone()
        };
        for (q, k) in &expr.exponents {
            let y = name_map
                .get(q)
                .ok_or_else(|| Error::ForeignParameter(q.clone()))?;
            if *q == x11_new && e > 1 {
                s_expr = s_expr.mul(&gamma.pow(*k)).mul(&Monomial::power(y, e * k));
            } else {
                s_expr = s_expr.mul(&Monomial::power(y, *k));
            }
        }
        srec.substitutions.insert(name_map_old(ext, old), s_expr);
    }
    srec.new_units = rec.new_units.clone();
    srec.new_aux = rec.new_aux.clone();
    srec.s_good = rec.s_good.clone();
    srec.very_good = rec.very_good;
    srec.level_ranks = rec.level_ranks.clone();
    srec.exponent_matrix = rec.exponent_matrix.clone();
    if let TransformKind::Type3 { m: 1, k, l, d } = &rec.kind {
        if e > 1 {
            let scaled: Vec<u64> = d.iter().map(|x| x * e as u64).collect();
            for (x, y) in srec.exponent_matrix[0].iter_mut().skip(1).zip(&scaled) {
                *x = *y as i64;
            }
            srec.kind = TransformKind::Type3 {
                m: 1,
                k: *k,
                l: *l,
                d: scaled,
            };
        }
    }
    let s_next = apply_record(&ext.s, &srec)?;
    let lifted = MonomialExtension {
        r: r_next,
        s: s_next,
        ..ext.clone()
    };
    let report = ex_validate(&lifted);
    if !report.is_valid() {
        return Err(Error::precondition(format!("lift broke the extension: {}", report.issues.join("; "))));
    }
    Ok((lifted, srec))
}

fn name_map_old(ext: &MonomialExtension, r_name: &str) -> String {
    let pos = ext.r.position(r_name).expect("substituted parameter exists");
    ext.s.param(pos).expect("same layout").name.clone()
}

#[derive(Clone, Debug)]
pub struct CertifyOutcome {
    pub e: u64,
    pub epsilon: u64,
    pub steps: Vec<Step>,
    pub w1: Option<Monomial>,
    pub w2: Option<Monomial>,
    pub g_final: Monomial,
    pub h_final: Monomial,
    pub witness: Monomial,
    pub final_ext: MonomialExtension,
    pub unit_certificate: bool,
}

fn check_basis_monomial(state: &RingState, m: &Monomial) -> Result<()> {
    if !m.is_nonnegative() || !m.aux.is_empty() {
        return Err(Error::precondition(format!("{m} is not a monomial")));
    }
    for name in m.exponents.keys() {
        let pos = state.position(name).ok_or_else(|| Error::ForeignParameter(name.clone()))?;
        if !state.is_basis(pos) {
            return Err(Error::precondition(format!("{name} is not a basis parameter of S")));
        }
    }
    for u in m.unit_word.keys() {
        if !state.unit_symbols.contains(u) {
            return Err(Error::ForeignParameter(u.clone()));
        }
    }
    Ok(())
}

/// Certifies that `h` divides `g` in the valuation ring of `S`.
pub fn ex_certify_division(ext: &MonomialExtension, g: &Monomial, h: &Monomial, step_cap: usize) -> Result<CertifyOutcome> {
    let report = ex_validate(ext);
    if !report.is_valid() {
        return Err(Error::precondition(report.issues.join("; ")));
    }
    let e = ext.e()?;
    let (spec, emb) = induced_groups(ext)?;
    let epsilon = vg_initial_index(&spec, &emb)?;
    if e != epsilon {
        return Err(Error::NotEssentiallyFinite { e, epsilon });
    }
    check_basis_monomial(&ext.s, g)?;
    check_basis_monomial(&ext.s, h)?;
    let wg = rs_monomial_value(&ext.s, g)?;
    let wh = rs_monomial_value(&ext.s, h)?;
    let order = wg.compare(&wh)?;
    if order.is_lt() {
        return Err(Error::NotInValuationRing);
    }
    if order.is_eq() {
        let witness = g.div(h);
        if !witness.is_unit() {
            return Err(Error::precondition("equal values but distinct monomials in basis parameters"));
        }
        return Ok(CertifyOutcome {
            e,
            epsilon,
            steps: Vec::new(),
            w1: None,
            w2: None,
            g_final: g.clone(),
            h_final: h.clone(),
            witness,
            final_ext: ext.clone(),
            unit_certificate: true,
        });
    }
    let normalized = ex_normalize(ext)?;
    let s_log = normalized.log(Side::S);
    let mut steps = normalized.steps;
    let mut cur = normalized.ext;
    let g1 = pe_reexpress(&s_log, g)?;
    let h1 = pe_reexpress(&s_log, h)?;

    let ee = i64::try_from(e).map_err(|_| Error::Overflow("ramification index"))?;
    let to_r = |m: &Monomial| -> Result<Monomial> {
        let mut w = Monomial::one();
        for (name, k) in &m.exponents {
            let pos = cur.s.position(name).ok_or_else(|| Error::ForeignParameter(name.clone()))?;
            let x = &cur.r.param(pos).expect("same layout").name;
            let scale = if pos == ParamPos::new(1, 1) { 1 } else { ee };
            w = w.mul(&Monomial::power(x, k * scale));
        }
        Ok(w)
    };
    let w1 = to_r(&g1)?;
    let w2 = to_r(&h1)?;
    let divided = pe_monomial_divide(&cur.r, &w2, &w1, step_cap)?;
    let mut lifted_s = Vec::new();
    for rec in &divided.log {
        let (next, srec) = ex_lift_gmts(&cur, rec)?;
        steps.push((Side::R, rec.clone()));
        steps.push((Side::S, srec.clone()));
        lifted_s.push(srec);
        cur = next;
    }
    let g_final = pe_reexpress(&lifted_s, &g1)?;
    let h_final = pe_reexpress(&lifted_s, &h1)?;
    let witness = g_final.div(&h_final);
    if !witness.is_nonnegative() {
        return Err(Error::precondition(format!("quotient {witness} has a negative exponent")));
    }
    if rs_monomial_value(&cur.s, &witness)? != wg.sub(&wh) {
        return Err(Error::precondition("quotient value differs from ω(g) - ω(h)"));
    }
    Ok(CertifyOutcome {
        e,
        epsilon,
        steps,
        w1: Some(w1),
        w2: Some(w2),
        g_final,
        h_final,
        witness,
        final_ext: cur,
        unit_certificate: false,
    })
}

/// Re-applies recorded steps to the initial rings.
pub fn replay_steps(ext: &MonomialExtension, steps: &[Step]) -> Result<(RingState, RingState)> {
    let mut r = ext.r.clone();
    let mut s = ext.s.clone();
    for (side, rec) in steps {
        match side {
            Side::R => r = apply_record(&r, rec)?,
            Side::S => s = apply_record(&s, rec)?,
        }
    }
    Ok((r, s))
}

pub fn steps_log(steps: &[Step], side: Side) -> Vec<TransformRecord> {
    steps.iter().filter(|(s, _)| *s == side).map(|(_, r)| r.clone()).collect()
}
