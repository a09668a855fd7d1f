//! Finitely generated lexicographically ordered value groups.
//!
//! An element is a `u`-tuple of [`QuadExt`] coordinates; index `0` is level 1
//! (the smallest convex subgroup) and the last coordinate is the dominant one.
//! Γ_ω is given by a level-structured generator list, Γ_ν ⊂ Γ_ω by an integer
//! matrix whose rows express the generators of Γ_ν in that basis.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact_reals::{QuadExt, Sign};
use crate::lattice::{self, IMat, QMat};

/// Default radius of the enumeration boxes used by the brute-force oracles.
pub const DEFAULT_BOX_RADIUS: u32 = 20;

const EXHAUSTIVE_LIMIT: u128 = 20_000;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    coords: Vec<QuadExt>,
}

impl GroupElement {
    pub fn new(coords: Vec<QuadExt>) -> Self {
        GroupElement { coords }
    }

    pub fn zero(u: usize) -> Self {
        GroupElement {
            coords: vec![QuadExt::zero(); u],
        }
    }

    /// Element whose only nonzero coordinate sits at `level` (1-based).
    pub fn at_level(u: usize, level: usize, value: QuadExt) -> Self {
        let mut g = GroupElement::zero(u);
        g.coords[level - 1] = value;
        g
    }

    pub fn rank(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[QuadExt] {
        &self.coords
    }

    /// Coordinate at `level` (1-based).
    pub fn coord(&self, level: usize) -> &QuadExt {
        &self.coords[level - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(QuadExt::is_zero)
    }

    /// Largest level with a nonzero coordinate; `0` for the zero element.
    pub fn convex_level(&self) -> usize {
        self.coords
            .iter()
            .rposition(|c| !c.is_zero())
            .map_or(0, |i| i + 1)
    }

    pub fn sign(&self) -> Result<Sign> {
        match self.convex_level() {
            0 => Ok(Sign::Zero),
            l => self.coords[l - 1].sign(),
        }
    }

    pub fn is_positive(&self) -> Result<bool> {
        Ok(self.sign()? == Sign::Positive)
    }

    pub fn compare(&self, other: &GroupElement) -> Result<Ordering> {
        self.compare_from_level(other, 1)
    }

    /// Compares only coordinates at levels `>= level` (the specialization ν_m).
    pub fn compare_from_level(&self, other: &GroupElement, level: usize) -> Result<Ordering> {
        if self.rank() != other.rank() {
            return Err(Error::RankMismatch {
                left: self.rank(),
                right: other.rank(),
            });
        }
        for i in (level.max(1) - 1..self.rank()).rev() {
            if self.coords[i] == other.coords[i] {
                continue;
            }
            return self.coords[i].cmp_exact(&other.coords[i]);
        }
        Ok(Ordering::Equal)
    }

    pub fn add(&self, other: &GroupElement) -> GroupElement {
        debug_assert_eq!(self.rank(), other.rank());
        GroupElement {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &GroupElement) -> GroupElement {
        debug_assert_eq!(self.rank(), other.rank());
        GroupElement {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, k: i64) -> GroupElement {
        GroupElement {
            coords: self.coords.iter().map(|c| c.scale_int(k)).collect(),
        }
    }

    pub fn scale_big(&self, k: &BigInt) -> GroupElement {
        let k = BigRational::from_integer(k.clone());
        GroupElement {
            coords: self.coords.iter().map(|c| c.scale(&k)).collect(),
        }
    }

    pub fn scale_rational(&self, k: &BigRational) -> GroupElement {
        GroupElement {
            coords: self.coords.iter().map(|c| c.scale(k)).collect(),
        }
    }

    /// `Σ k_i·g_i`.
    pub fn combination(u: usize, coeffs: &[i64], gens: &[GroupElement]) -> GroupElement {
        coeffs
            .iter()
            .zip(gens)
            .filter(|(k, _)| **k != 0)
            .fold(GroupElement::zero(u), |acc, (k, g)| acc.add(&g.scale(*k)))
    }

    pub fn combination_big(u: usize, coeffs: &[BigInt], gens: &[GroupElement]) -> GroupElement {
        coeffs
            .iter()
            .zip(gens)
            .filter(|(k, _)| !k.is_zero())
            .fold(GroupElement::zero(u), |acc, (k, g)| acc.add(&g.scale_big(k)))
    }

    /// Parses `(c_1, …, c_u)`; a bare literal is accepted for rank 1.
    pub fn parse_literal(text: &str) -> std::result::Result<GroupElement, (usize, String)> {
        let trimmed = text.trim_start();
        let lead = text.len() - trimmed.len();
        let body = trimmed.trim_end();
        if let Some(inner) = body.strip_prefix('(') {
            let Some(inner) = inner.strip_suffix(')') else {
                return Err((lead + body.len(), "expected ')'".into()));
            };
            let mut coords = Vec::new();
            let mut offset = lead + 1;
            for part in inner.split(',') {
                let q = QuadExt::parse_literal(part).map_err(|(c, m)| (offset + c, m))?;
                coords.push(q);
                offset += part.len() + 1;
            }
            Ok(GroupElement { coords })
        } else {
            let q = QuadExt::parse_literal(text)?;
            Ok(GroupElement { coords: vec![q] })
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement{self}")
    }
}

pub fn vg_compare(g: &GroupElement, h: &GroupElement) -> Result<Ordering> {
    g.compare(h)
}

pub fn vg_convex_level(g: &GroupElement) -> usize {
    g.convex_level()
}

/// Rational coordinate rows of `elements` in the (level, radicand) basis,
/// restricted to levels accepted by `keep`. Columns are ordered by level
/// descending, then radicand ascending.
fn coordinate_rows(elements: &[GroupElement], keep: impl Fn(usize) -> bool) -> QMat {
    let mut keys = BTreeSet::new();
    for g in elements {
        for (i, c) in g.coords.iter().enumerate() {
            if keep(i + 1) {
                for d in c.radicands() {
                    keys.insert((std::cmp::Reverse(i + 1), d));
                }
            }
        }
    }
    elements
        .iter()
        .map(|g| {
            keys.iter()
                .map(|(std::cmp::Reverse(level), d)| g.coords[level - 1].coefficient(*d))
                .collect()
        })
        .collect()
}

/// Rank over Q of the level-`level` coordinates of `elements`.
pub fn level_rank(elements: &[GroupElement], level: usize) -> usize {
    lattice::rational_rank(&coordinate_rows(elements, |l| l == level))
}

/// A rank-`u` value group with level-structured free generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueGroupSpec {
    pub u: usize,
    pub level_ranks: Vec<usize>,
    pub generators: Vec<GroupElement>,
}

impl ValueGroupSpec {
    pub fn new(u: usize, level_ranks: Vec<usize>, generators: Vec<GroupElement>) -> Result<Self> {
        let spec = ValueGroupSpec {
            u,
            level_ranks,
            generators,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.generators.len()
    }

    /// Convex level of generator slot `k` (0-based).
    pub fn slot_level(&self, k: usize) -> usize {
        let mut acc = 0;
        for (i, s) in self.level_ranks.iter().enumerate() {
            acc += s;
            if k < acc {
                return i + 1;
            }
        }
        panic!("generator slot {k} out of range")
    }

    /// 0-based slot indices of the generators at `level`.
    pub fn level_slots(&self, level: usize) -> std::ops::Range<usize> {
        let start: usize = self.level_ranks[..level - 1].iter().sum();
        start..start + self.level_ranks[level - 1]
    }

    pub fn validate(&self) -> Result<()> {
        validate_generators(self.u, &self.level_ranks, &self.generators, "generator")
    }

    pub fn element(&self, coeffs: &[i64]) -> GroupElement {
        GroupElement::combination(self.u, coeffs, &self.generators)
    }

    /// Coordinates of `g` in the generator basis, if `g` lies in the Q-span.
    pub fn rational_coordinates(&self, g: &GroupElement) -> Option<Vec<BigRational>> {
        let mut all = self.generators.clone();
        all.push(g.clone());
        let rows = coordinate_rows(&all, |_| true);
        let (target, basis) = rows.split_last().expect("nonempty");
        lattice::solve_left_rational(&basis.to_vec(), target)
    }

    /// Integer coordinates of `g`, if `g` is in the group.
    pub fn coordinates(&self, g: &GroupElement) -> Option<Vec<BigInt>> {
        self.rational_coordinates(g)?
            .into_iter()
            .map(|q| q.is_integer().then(|| q.to_integer()))
            .collect()
    }
}

fn validate_generators(
    u: usize,
    level_ranks: &[usize],
    generators: &[GroupElement],
    what: &str,
) -> Result<()> {
    if level_ranks.len() != u || u == 0 {
        return Err(Error::MalformedGroup(format!(
            "expected {u} level ranks, got {}",
            level_ranks.len()
        )));
    }
    if level_ranks.contains(&0) {
        return Err(Error::MalformedGroup("every level needs rational rank >= 1".into()));
    }
    let n: usize = level_ranks.iter().sum();
    if generators.len() != n {
        return Err(Error::MalformedGroup(format!(
            "expected {n} {what}s, got {}",
            generators.len()
        )));
    }
    let mut k = 0;
    for (i, s) in level_ranks.iter().enumerate() {
        let level = i + 1;
        let block = &generators[k..k + s];
        for (j, g) in block.iter().enumerate() {
            if g.rank() != u {
                return Err(Error::RankMismatch {
                    left: g.rank(),
                    right: u,
                });
            }
            if g.convex_level() != level {
                return Err(Error::MalformedGroup(format!(
                    "{what} {} of level {level} has convex level {}",
                    k + j + 1,
                    g.convex_level()
                )));
            }
        }
        if level_rank(block, level) != *s {
            return Err(Error::MalformedGroup(format!(
                "level-{level} {what}s are not rationally independent"
            )));
        }
        k += s;
    }
    Ok(())
}

/// Γ_ν ⊂ Γ_ω: row `i` of `c` holds the coordinates of the `i`-th generator of
/// Γ_ν in the generator basis of Γ_ω, so that Γ_ω/Γ_ν ≅ Z^n / Cᵗ Z^n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupEmbedding {
    pub c: Vec<Vec<i64>>,
}

impl SubgroupEmbedding {
    pub fn new(spec: &ValueGroupSpec, c: Vec<Vec<i64>>) -> Result<Self> {
        let emb = SubgroupEmbedding { c };
        emb.validate(spec)?;
        Ok(emb)
    }

    pub fn identity(n: usize) -> Self {
        SubgroupEmbedding {
            c: (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect(),
        }
    }

    pub fn matrix(&self) -> IMat {
        lattice::from_i64(&self.c)
    }

    pub fn validate(&self, spec: &ValueGroupSpec) -> Result<()> {
        let n = spec.n();
        if self.c.len() != n || self.c.iter().any(|r| r.len() != n) {
            return Err(Error::MalformedGroup(format!("embedding matrix must be {n}x{n}")));
        }
        if lattice::det(&self.matrix()).is_zero() {
            return Err(Error::Singular);
        }
        validate_generators(spec.u, &spec.level_ranks, &self.subgroup_generators(spec), "subgroup generator")
    }

    /// The generators of Γ_ν as elements.
    pub fn subgroup_generators(&self, spec: &ValueGroupSpec) -> Vec<GroupElement> {
        self.c
            .iter()
            .map(|row| GroupElement::combination(spec.u, row, &spec.generators))
            .collect()
    }
}

/// Bases (coordinate rows in the Γ_ω generator basis) of the level-1 parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FirstLevelLattice {
    pub omega: IMat,
    pub nu: Option<IMat>,
}

/// Integer coefficient vectors `v` (w.r.t. `gens`) with `Σ v_i g_i` in level 1.
fn level_one_kernel(gens: &[GroupElement]) -> IMat {
    let rows = coordinate_rows(gens, |l| l >= 2);
    if rows.first().is_none_or(Vec::is_empty) {
        return lattice::identity(gens.len());
    }
    lattice::left_kernel(&lattice::clear_denominators(&rows))
}

pub fn vg_first_level_lattice(
    spec: &ValueGroupSpec,
    emb: Option<&SubgroupEmbedding>,
) -> FirstLevelLattice {
    let omega = lattice::row_lattice_basis(&level_one_kernel(&spec.generators));
    let nu = emb.map(|emb| {
        let k = level_one_kernel(&emb.subgroup_generators(spec));
        if k.is_empty() {
            return k;
        }
        lattice::row_lattice_basis(&lattice::mat_mul(&k, &emb.matrix()))
    });
    FirstLevelLattice { omega, nu }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RamificationIndex {
    pub e: u64,
    pub invariant_factors: Vec<u64>,
}

pub fn vg_ramification_index(emb: &SubgroupEmbedding) -> Result<RamificationIndex> {
    let m = emb.matrix();
    let d = lattice::det(&m).abs();
    if d.is_zero() {
        return Err(Error::Singular);
    }
    let e = d.to_u64().ok_or(Error::Overflow("ramification index"))?;
    let invariant_factors = lattice::smith_diagonal(&lattice::transpose(&m))
        .into_iter()
        .map(|f| f.to_u64().ok_or(Error::Overflow("invariant factor")))
        .collect::<Result<Vec<_>>>()?;
    Ok(RamificationIndex {
        e,
        invariant_factors,
    })
}

/// Initial index from the level-1 lattices: dense first level gives 1, a
/// discrete first level `Z·g_0` gives `[G_1 : H_1]`.
pub fn vg_initial_index(spec: &ValueGroupSpec, emb: &SubgroupEmbedding) -> Result<u64> {
    let first = vg_first_level_lattice(spec, Some(emb));
    let nu = first.nu.unwrap_or_default();
    if first.omega.is_empty() {
        return Err(Error::MalformedGroup("first convex level is trivial".into()));
    }
    if nu.is_empty() {
        return Err(Error::InfiniteInitialIndex);
    }
    if first.omega.len() >= 2 {
        return Ok(1);
    }
    let g0 = &first.omega[0];
    let h0 = &nu[0];
    let (i, gi) = g0
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_zero())
        .expect("basis vector is nonzero");
    let k = (&h0[i] / gi).abs();
    k.to_u64().ok_or(Error::Overflow("initial index"))
}

fn box_vectors(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-radius..=radius).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

fn box_size(dim: usize, radius: u32) -> u128 {
    (2 * radius as u128 + 1).saturating_pow(dim as u32)
}

/// Counts `g ∈ Γ_ω`, `g ≥ 0`, with coordinates in `[-r, r]^n`, lying below
/// every positive element of Γ_ν with coordinates in the same box.
///
/// Small boxes are enumerated exhaustively. Larger ones use the lex order:
/// an element with a nonzero block above level 1 has convex level >= 2, so
/// when positive it exceeds every level-1 element; hence the minimum positive
/// element of Γ_ν and all candidates `g` live in the level-1 blocks.
///
/// When more than one candidate survives, a Euclidean descent on the level-1
/// basis of Γ_ν looks for a positive element below the smallest positive
/// candidate.
pub fn vg_initial_index_bruteforce(
    spec: &ValueGroupSpec,
    emb: &SubgroupEmbedding,
    box_radius: u32,
) -> Result<u64> {
    let (mut hmin, below) = if box_size(spec.n(), box_radius) <= EXHAUSTIVE_LIMIT {
        initial_index_exhaustive(spec, emb, box_radius)?
    } else {
        initial_index_level_one(spec, emb, box_radius)?
    };
    let mut count = count_below(below.iter().cloned(), &hmin)?;
    if count > 1 {
        let smallest = below
            .iter()
            .filter(|g| !g.is_zero())
            .try_fold(None::<&GroupElement>, |best, g| -> Result<_> {
                Ok(match best {
                    Some(b) if b.compare(g)?.is_le() => Some(b),
                    _ => Some(g),
                })
            })?;
        if let Some(target) = smallest {
            if let Some(h) = euclid_descent(spec.u, first_level_nu_basis(spec, emb), target)? {
                if h.compare(&hmin)?.is_lt() {
                    hmin = h;
                    count = count_below(below.iter().cloned(), &hmin)?;
                }
            }
        }
    }
    Ok(count)
}

const DESCENT_LIMIT: usize = 10_000;

/// Looks for `h` in the span of `pool` with `0 < h <= target` by running the
/// Euclidean algorithm on the largest two elements, one division per step.
/// A box of any fixed radius misses such `h` when the first level is dense,
/// since `Γ_ω` then has smaller elements in the same box than `Γ_ν` does.
fn euclid_descent(u: usize, pool: Vec<GroupElement>, target: &GroupElement) -> Result<Option<GroupElement>> {
    let zero = GroupElement::new(vec![QuadExt::zero(); u]);
    let mut live = Vec::new();
    for h in pool {
        match h.sign()? {
            Sign::Zero => {}
            Sign::Positive => live.push(h),
            Sign::Negative => live.push(zero.sub(&h)),
        }
    }
    for _ in 0..DESCENT_LIMIT {
        let mut order: Vec<usize> = (0..live.len()).collect();
        let mut err = None;
        order.sort_by(|&i, &j| {
            live[j].compare(&live[i]).unwrap_or_else(|e| {
                err.get_or_insert(e);
                Ordering::Equal
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        match order.last() {
            None => return Ok(None),
            Some(&m) if live[m].compare(target)?.is_le() => return Ok(Some(live[m].clone())),
            _ => {}
        }
        if live.len() < 2 {
            return Ok(None);
        }
        let (l, small) = (order[0], live[order[1]].clone());
        let mut powers = vec![small];
        while let Some(p) = powers.last() {
            let twice = p.add(p);
            if twice.compare(&live[l])?.is_gt() {
                break;
            }
            powers.push(twice);
        }
        let mut rest = live[l].clone();
        for p in powers.iter().rev() {
            if p.compare(&rest)?.is_le() {
                rest = rest.sub(p);
            }
        }
        if rest.is_zero() {
            live.swap_remove(l);
        } else {
            live[l] = rest;
        }
    }
    Ok(None)
}

/// A basis of the level-1 part of Γ_ν, as elements.
fn first_level_nu_basis(spec: &ValueGroupSpec, emb: &SubgroupEmbedding) -> Vec<GroupElement> {
    vg_first_level_lattice(spec, Some(emb))
        .nu
        .unwrap_or_default()
        .iter()
        .map(|row| GroupElement::combination_big(spec.u, row, &spec.generators))
        .collect()
}

fn min_positive(candidates: impl Iterator<Item = GroupElement>) -> Result<Option<GroupElement>> {
    let mut best: Option<GroupElement> = None;
    for h in candidates {
        if !h.is_positive()? {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => h.compare(b)? == Ordering::Less,
        };
        if better {
            best = Some(h);
        }
    }
    Ok(best)
}

fn count_below(candidates: impl Iterator<Item = GroupElement>, bound: &GroupElement) -> Result<u64> {
    let mut count = 0;
    for g in candidates {
        if g.compare(bound)? == Ordering::Less {
            count += 1;
        }
    }
    Ok(count)
}

/// Minimum positive element of Γ_ν in the box, with the nonnegative
/// elements of Γ_ω below it.
type BoxCount = (GroupElement, Vec<GroupElement>);

fn nonnegative_below(candidates: impl Iterator<Item = GroupElement>, bound: &GroupElement) -> Result<Vec<GroupElement>> {
    let mut out = Vec::new();
    for g in candidates {
        if g.sign()? != Sign::Negative && g.compare(bound)? == Ordering::Less {
            out.push(g);
        }
    }
    Ok(out)
}

pub(crate) fn initial_index_exhaustive(
    spec: &ValueGroupSpec,
    emb: &SubgroupEmbedding,
    box_radius: u32,
) -> Result<BoxCount> {
    let r = i64::from(box_radius);
    let nu_gens = emb.subgroup_generators(spec);
    let vectors = box_vectors(spec.n(), r);
    let hmin = min_positive(vectors.iter().map(|b| GroupElement::combination(spec.u, b, &nu_gens)))?
        .ok_or(Error::InfiniteInitialIndex)?;
    let below = nonnegative_below(vectors.iter().map(|a| spec.element(a)), &hmin)?;
    Ok((hmin, below))
}

pub(crate) fn initial_index_level_one(
    spec: &ValueGroupSpec,
    emb: &SubgroupEmbedding,
    box_radius: u32,
) -> Result<BoxCount> {
    let r = i64::from(box_radius);
    let slots = spec.level_slots(1);
    let nu_basis = first_level_nu_basis(spec, emb);
    let hmin = min_positive(
        box_vectors(nu_basis.len(), r)
            .iter()
            .map(|b| GroupElement::combination(spec.u, b, &nu_basis)),
    )?
    .ok_or(Error::InfiniteInitialIndex)?;
    let vectors = box_vectors(slots.len(), r);
    let below = nonnegative_below(
        vectors
            .iter()
            .map(|a| GroupElement::combination(spec.u, a, &spec.generators[slots.clone()])),
        &hmin,
    )?;
    Ok((hmin, below))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FgModuleReport {
    pub is_fg: bool,
    /// Representatives `g_i` (one per coset), ascending; empty on failure.
    pub representatives: Vec<GroupElement>,
    /// A nonnegative element not covered by the candidate representatives.
    pub witness: Option<GroupElement>,
}

/// Canonical residues of Z^n modulo the row lattice of C.
struct CosetReducer {
    hnf: IMat,
}

impl CosetReducer {
    fn new(emb: &SubgroupEmbedding) -> Self {
        CosetReducer {
            hnf: lattice::row_lattice_basis(&emb.matrix()),
        }
    }

    fn reduce(&self, v: &[BigInt]) -> Vec<BigInt> {
        let mut v = v.to_vec();
        for (i, row) in self.hnf.iter().enumerate() {
            let q = num_integer::Integer::div_floor(&v[i], &row[i]);
            if !q.is_zero() {
                for (x, r) in v.iter_mut().zip(row) {
                    *x -= &q * r;
                }
            }
        }
        v
    }

    fn add(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let s: Vec<BigInt> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        self.reduce(&s)
    }

    fn sub(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let s: Vec<BigInt> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.reduce(&s)
    }
}

struct Block {
    element: GroupElement,
    residue: Vec<BigInt>,
    top: QuadExt,
    is_zero: bool,
}

/// Lexicographic minimum search over a box, coset by coset. Generators are
/// level-structured with independent level coordinates, so the level-L
/// coordinate of a block determines the block and blocks can be chosen from
/// the top level down.
struct CosetMinimizer<'a> {
    reducer: &'a CosetReducer,
    blocks: Vec<Vec<Block>>,
    /// `reachable[l]`: residues realized by blocks of levels `1..=l`.
    reachable: Vec<BTreeSet<Vec<BigInt>>>,
    u: usize,
}

impl<'a> CosetMinimizer<'a> {
    fn new(spec: &ValueGroupSpec, reducer: &'a CosetReducer, radius: u32) -> Self {
        let n = spec.n();
        let mut blocks = Vec::new();
        for level in 1..=spec.u {
            let slots = spec.level_slots(level);
            let level_blocks: Vec<Block> = box_vectors(slots.len(), i64::from(radius))
                .into_iter()
                .map(|b| {
                    let element = GroupElement::combination(spec.u, &b, &spec.generators[slots.clone()]);
                    let mut full = vec![BigInt::zero(); n];
                    for (k, x) in slots.clone().zip(&b) {
                        full[k] = BigInt::from(*x);
                    }
                    Block {
                        top: element.coord(level).clone(),
                        is_zero: b.iter().all(|x| *x == 0),
                        residue: reducer.reduce(&full),
                        element,
                    }
                })
                .collect();
            blocks.push(level_blocks);
        }
        let mut reachable = vec![BTreeSet::from([vec![BigInt::zero(); n]])];
        for level in 0..spec.u {
            let next: BTreeSet<Vec<BigInt>> = reachable[level]
                .iter()
                .flat_map(|r| blocks[level].iter().map(move |b| (r, b)))
                .map(|(r, b)| reducer.add(r, &b.residue))
                .collect();
            reachable.push(next);
        }
        CosetMinimizer {
            reducer,
            blocks,
            reachable,
            u: spec.u,
        }
    }

    fn cosets(&self) -> &BTreeSet<Vec<BigInt>> {
        &self.reachable[self.u]
    }

    fn min_nonnegative(&self, coset: &[BigInt]) -> Result<Option<GroupElement>> {
        self.search(self.u, coset, true, GroupElement::zero(self.u))
    }

    fn search(
        &self,
        level: usize,
        coset: &[BigInt],
        need_nonneg: bool,
        offset: GroupElement,
    ) -> Result<Option<GroupElement>> {
        if level == 0 {
            return Ok(coset.iter().all(Zero::is_zero).then_some(offset));
        }
        if !self.reachable[level].contains(coset) {
            return Ok(None);
        }
        if need_nonneg {
            if let Some(found) = self.search(level - 1, coset, true, offset.clone())? {
                return Ok(Some(found));
            }
        }
        let mut best: Option<&Block> = None;
        for b in &self.blocks[level - 1] {
            if b.is_zero && need_nonneg {
                continue;
            }
            if need_nonneg && b.top.sign()? != Sign::Positive {
                continue;
            }
            let rest = self.reducer.sub(coset, &b.residue);
            if !self.reachable[level - 1].contains(&rest) {
                continue;
            }
            let better = match best {
                None => true,
                Some(cur) => b.top.cmp_exact(&cur.top)? == Ordering::Less,
            };
            if better {
                best = Some(b);
            }
        }
        match best {
            None => Ok(None),
            Some(b) => {
                let rest = self.reducer.sub(coset, &b.residue);
                self.search(level - 1, &rest, false, offset.add(&b.element))
            }
        }
    }
}

/// Box semi-decision of whether (Γ_ω)≥0 is a finitely generated (Γ_ν)≥0-module.
///
/// Candidates are the least nonnegative element of each coset of Γ_ν within
/// radius `⌊r/2⌋`; they must cover every nonnegative element of radius `r`,
/// i.e. the coset minima over the two boxes must coincide. A candidate `m`
/// is also refuted by any `h ∈ Γ_ν` with `0 < h < m`, found by Euclidean
/// descent, since `m - h` is then a smaller element of the same coset.
pub fn vg_fg_module_test(
    spec: &ValueGroupSpec,
    emb: &SubgroupEmbedding,
    box_radius: u32,
) -> Result<FgModuleReport> {
    let reducer = CosetReducer::new(emb);
    let full = CosetMinimizer::new(spec, &reducer, box_radius);
    let half = CosetMinimizer::new(spec, &reducer, box_radius / 2);
    let mut reps = Vec::new();
    for coset in full.cosets() {
        let Some(m_full) = full.min_nonnegative(coset)? else {
            continue;
        };
        match half.min_nonnegative(coset)? {
            Some(m_half) if m_half == m_full => reps.push(m_half),
            _ => {
                return Ok(FgModuleReport {
                    is_fg: false,
                    representatives: Vec::new(),
                    witness: Some(m_full),
                })
            }
        }
    }
    let basis = first_level_nu_basis(spec, emb);
    for m in reps.iter().filter(|m| !m.is_zero()) {
        if let Some(h) = euclid_descent(spec.u, basis.clone(), m)? {
            if h.compare(m)?.is_lt() {
                return Ok(FgModuleReport {
                    is_fg: false,
                    representatives: Vec::new(),
                    witness: Some(m.sub(&h)),
                });
            }
        }
    }
    sort_elements(&mut reps)?;
    Ok(FgModuleReport {
        is_fg: true,
        representatives: reps,
        witness: None,
    })
}

pub fn sort_elements(v: &mut [GroupElement]) -> Result<()> {
    let mut err = None;
    v.sort_by(|a, b| {
        a.compare(b).unwrap_or_else(|e| {
            err.get_or_insert(e);
            Ordering::Equal
        })
    });
    err.map_or(Ok(()), Err)
}

/// Z-basis of the subgroup generated by `values`, level-structured (level 1
/// first). Level ranks are the rational ranks of the successive quotients.
pub fn group_from_values(u: usize, values: &[GroupElement]) -> Result<ValueGroupSpec> {
    let rows = coordinate_rows(values, |_| true);
    let keys_per_level = level_column_counts(values, u);
    let lcm = rows
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, q| num_integer::Integer::lcm(&acc, q.denom()));
    let basis = lattice::row_lattice_basis(&lattice::clear_denominators(&rows));
    let scale = BigRational::from_integer(lcm).recip();
    let mut gens: Vec<GroupElement> = basis
        .iter()
        .map(|row| element_from_row(u, &keys_per_level, row, &scale))
        .collect();
    gens.reverse();
    let mut level_ranks = vec![0; u];
    for g in &gens {
        let l = g.convex_level();
        if l == 0 {
            return Err(Error::MalformedGroup("zero generator".into()));
        }
        level_ranks[l - 1] += 1;
    }
    ValueGroupSpec::new(u, level_ranks, gens)
}

fn level_column_counts(values: &[GroupElement], u: usize) -> Vec<(usize, u64)> {
    let mut keys = BTreeSet::new();
    for g in values {
        for (i, c) in g.coords.iter().enumerate() {
            for d in c.radicands() {
                keys.insert((std::cmp::Reverse(i + 1), d));
            }
        }
    }
    debug_assert!(keys.iter().all(|(std::cmp::Reverse(l), _)| *l <= u));
    keys.into_iter().map(|(std::cmp::Reverse(l), d)| (l, d)).collect()
}

fn element_from_row(u: usize, keys: &[(usize, u64)], row: &[BigInt], scale: &BigRational) -> GroupElement {
    let mut per_level: BTreeMap<usize, QuadExt> = BTreeMap::new();
    for ((level, d), x) in keys.iter().zip(row) {
        if x.is_zero() {
            continue;
        }
        let q = BigRational::from_integer(x.clone()) * scale;
        let t = QuadExt::term(q, *d).expect("radicand from canonical value");
        let slot = per_level.entry(*level).or_default();
        *slot = &*slot + &t;
    }
    let mut g = GroupElement::zero(u);
    for (level, c) in per_level {
        g.coords[level - 1] = c;
    }
    g
}

/// Whether `a` and `b` generate the same subgroup.
pub fn same_subgroup(a: &[GroupElement], b: &[GroupElement]) -> bool {
    let all: Vec<GroupElement> = a.iter().chain(b).cloned().collect();
    if all.is_empty() {
        return true;
    }
    let ints = lattice::clear_denominators(&coordinate_rows(&all, |_| true));
    let (ra, rb) = ints.split_at(a.len());
    lattice::row_lattice_basis(&ra.to_vec()) == lattice::row_lattice_basis(&rb.to_vec())
}

/// Level-`level` coordinate rows of `elements` over their common radicands.
pub fn level_coordinates(elements: &[GroupElement], level: usize) -> QMat {
    coordinate_rows(elements, |l| l == level)
}

/// Expresses the subgroup generated by `sub_values` in the basis of `spec`.
pub fn embedding_from_values(spec: &ValueGroupSpec, sub_values: &[GroupElement]) -> Result<SubgroupEmbedding> {
    let sub = group_from_values(spec.u, sub_values)?;
    if sub.n() != spec.n() {
        return Err(Error::precondition(format!(
            "subgroup has rank {} but the group has rank {}; the index is infinite",
            sub.n(),
            spec.n()
        )));
    }
    let mut c = Vec::new();
    for g in &sub.generators {
        let coords = spec
            .coordinates(g)
            .ok_or_else(|| Error::precondition(format!("{g} is not in the ambient group")))?;
        c.push(
            coords
                .iter()
                .map(|x| x.to_i64().ok_or(Error::Overflow("embedding entry")))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    SubgroupEmbedding::new(spec, c)
}
