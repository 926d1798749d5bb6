//! The finite-quotient engine: enumerate the isomorphism classes of finite
//! epimorphic images of a finitely presented module up to an order bound.
//!
//! Per maximal ideal P the primary quotient classes come from a breadth-first
//! descent through action-stable lattices: each node's children are the
//! kernels of the residue-field functionals on L/(P L + relations), found as
//! the nonzero solutions of an intertwining linear system over F_p. Classes
//! at distinct maximal ideals combine freely subject to the order bound
//! (their kernels are pairwise comaximal, so the combined quotient exists
//! and is unique).
//!
//! Lattice rings (integers, localized integers, quadratic orders) descend
//! from the flattened presentation directly. The Laurent ring instead
//! enumerates quotients of the target universe (R/P^l)^g, complete for
//! quotients needing at most g generators, and keeps a class exactly when
//! the module admits an epimorphism onto it — the same route doubles as an
//! independent cross-check for the lattice rings.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fmod::{
    canonical_code, direct_sum, elem_action_matrix, quotient_from_lattice, subgroup_module,
    FiniteModule,
};
use crate::fq::{fq_nullspace, fq_rref, Fq, FqMat};
use crate::matrix::{hnf_cols, hnf_solve_mat, lat_index, lat_intersect, Mat};
use crate::module::{FlatPresentation, FpModule};
use crate::ring::{
    ideal_generators, ideal_power, maximal_ideals, residue_field, residue_generator_matrix, Ideal,
    RingElem, RingSpec,
};
use crate::EngineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Descend through stable sublattices of the flattened presentation.
    Descent,
    /// Enumerate quotients of (R/P^l)^g and test for epimorphisms.
    Targets,
}

#[derive(Clone, Debug)]
pub struct QuotientClass {
    pub order: u64,
    pub code: String,
    pub rep: FiniteModule,
}

#[derive(Clone, Debug)]
pub struct PerIdealClasses {
    pub ideal: Ideal,
    pub norm: u64,
    /// Distinct nonzero primary quotient classes, order ascending.
    pub classes: Vec<QuotientClass>,
    /// Stable-lattice kernels (index, lattice), root included; empty for
    /// the target strategy.
    pub kernels: Vec<(u64, Mat)>,
}

#[derive(Clone, Debug)]
pub struct FingerprintData {
    pub ring: RingSpec,
    pub bound: u64,
    /// Canonical codes of every quotient class of order at most the bound.
    pub codes: BTreeSet<String>,
    pub per_ideal: Vec<PerIdealClasses>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompareVerdict {
    /// Equal quotient class sets up to the bound — never a claim beyond it.
    IndistinguishableUpTo(u64),
    Distinguished { witness: String, witness_in_first: bool },
}

type CodeCache = HashMap<FiniteModule, String>;

// ---------------------------------------------------------------------------
// Stable-lattice descent
// ---------------------------------------------------------------------------

/// Residue characteristic and degree of a maximal ideal.
fn ideal_char_deg(ideal: &Ideal) -> Result<(u64, usize)> {
    match ideal {
        Ideal::Int(g) => {
            let p: u64 = g
                .try_into()
                .map_err(|_| Error::resource("residue characteristic exceeds u64".to_string()))?;
            Ok((p, 1))
        }
        Ideal::Quad { a, c, .. } => {
            if c.is_one() {
                let p: u64 = a.try_into().map_err(|_| {
                    Error::resource("residue characteristic exceeds u64".to_string())
                })?;
                Ok((p, 1))
            } else {
                let p: u64 = c.try_into().map_err(|_| {
                    Error::resource("residue characteristic exceeds u64".to_string())
                })?;
                Ok((p, 2))
            }
        }
        Ideal::LaurentPF { p, f } => Ok((*p, f.len() - 1)),
        _ => Err(Error::invalid("not a maximal ideal".to_string())),
    }
}

/// Ambient matrix of a ring element on Z^n, given the generator's matrix.
fn elem_ambient_matrix(e: &RingElem, n: usize, action: Option<&Mat>) -> Result<Mat> {
    match e {
        RingElem::Int(v) => Ok(Mat::identity(n).scale(v)),
        RingElem::Quad(x, y) => {
            let a = action.ok_or_else(|| Error::invalid("missing ambient action".to_string()))?;
            let mut m = Mat::identity(n).scale(x);
            let ya = a.scale(y);
            for i in 0..n {
                for j in 0..n {
                    let v = m.at(i, j) + ya.at(i, j);
                    m.set(i, j, v);
                }
            }
            Ok(m)
        }
        RingElem::Laurent(terms) => {
            let a = action.ok_or_else(|| Error::invalid("missing ambient action".to_string()))?;
            let mut acc = Mat::zero(n, n);
            for (e, c) in terms {
                if *e < 0 {
                    return Err(Error::unsupported(
                        "ambient matrices only for non-negative exponents".to_string(),
                    ));
                }
                let mut pw = Mat::identity(n);
                for _ in 0..*e {
                    pw = a.mul(&pw);
                }
                let term = pw.scale(c);
                for i in 0..n {
                    for j in 0..n {
                        let v = acc.at(i, j) + term.at(i, j);
                        acc.set(i, j, v);
                    }
                }
            }
            Ok(acc)
        }
    }
}

/// Maximal stable sublattices of L containing P L + base, as kernels of
/// residue-field functionals.
fn maximal_stable_children(
    p: u64,
    deg: usize,
    cmat: Option<&Vec<Vec<u64>>>,
    node: &Mat,
    sub: &Mat,
    action: Option<&Mat>,
) -> Result<Vec<Mat>> {
    let n = node.rows;
    let field = Fq::prime_field(p)?;
    let x = hnf_solve_mat(node, sub).expect("P L + base lies inside L");
    let omega_bar: Option<Mat> = action.map(|a| {
        hnf_solve_mat(node, &a.mul(node)).expect("nodes are action-stable lattices")
    });
    // Unknowns: psi as deg x n over F_p, row-major.
    let vars = deg * n;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let pb = BigInt::from(p);
    let modp = |v: &BigInt| -> u64 { (&v.mod_floor(&pb)).try_into().unwrap() };
    for c in 0..x.cols {
        for r in 0..deg {
            let mut row = vec![0u64; vars];
            let mut nonzero = false;
            for j in 0..n {
                let v = modp(x.at(j, c));
                row[r * n + j] = v;
                nonzero |= v != 0;
            }
            if nonzero {
                rows.push(row);
            }
        }
    }
    if let Some(ob) = &omega_bar {
        let cm = cmat.expect("action rings carry a residue generator matrix");
        for r in 0..deg {
            for j in 0..n {
                // sum_l psi[r,l] ob[l,j] - sum_s cm[r][s] psi[s,j] = 0
                let mut row = vec![0u64; vars];
                for l in 0..n {
                    row[r * n + l] = (row[r * n + l] + modp(ob.at(l, j))) % p;
                }
                for s in 0..deg {
                    row[s * n + j] = (row[s * n + j] + p - cm[r][s] % p) % p;
                }
                if row.iter().any(|&v| v != 0) {
                    rows.push(row);
                }
            }
        }
    }
    let mut sys = FqMat::zero(&field, rows.len(), vars);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0 {
                sys.set(i, j, field.from_int(v as i64));
            }
        }
    }
    let basis = fq_nullspace(&field, &sys);
    let dim = basis.len();
    if dim == 0 {
        return Ok(vec![]);
    }
    let total = (p as u128).saturating_pow(dim as u32);
    if total > 2_000_000 {
        return Err(Error::resource(format!(
            "functional space of size {p}^{dim} during descent"
        )));
    }
    let elem_val = |e: &crate::fq::FqElem| -> u64 { e.first().copied().unwrap_or(0) };
    let mut seen_kernels: HashSet<Vec<u64>> = HashSet::new();
    let mut children = Vec::new();
    let mut coeffs = vec![0u64; dim];
    'outer: loop {
        // Advance mixed-radix coefficients, skipping the zero vector.
        let mut i = 0;
        loop {
            if i == dim {
                break 'outer;
            }
            coeffs[i] += 1;
            if coeffs[i] < p {
                break;
            }
            coeffs[i] = 0;
            i += 1;
        }
        let mut psi = vec![0u64; vars];
        for (ci, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (j, pv) in psi.iter_mut().enumerate() {
                *pv = (*pv + c * elem_val(&basis[ci][j])) % p;
            }
        }
        // Canonical key: reduced row echelon form of the deg x n matrix.
        let mut pm = FqMat::zero(&field, deg, n);
        for r in 0..deg {
            for j in 0..n {
                pm.set(r, j, field.from_int(psi[r * n + j] as i64));
            }
        }
        let (rank, _) = fq_rref(&field, &mut pm);
        if rank < deg {
            continue; // not surjective onto the residue field
        }
        let mut key = Vec::with_capacity(vars);
        for r in 0..deg {
            for j in 0..n {
                key.push(elem_val(pm.at(r, j)));
            }
        }
        if !seen_kernels.insert(key) {
            continue;
        }
        // Kernel of psi over F_p, lifted through the node basis.
        let mut psimat = FqMat::zero(&field, deg, n);
        for r in 0..deg {
            for j in 0..n {
                psimat.set(r, j, field.from_int(psi[r * n + j] as i64));
            }
        }
        let ker = fq_nullspace(&field, &psimat);
        let mut cols: Vec<Vec<BigInt>> = Vec::new();
        for v in &ker {
            let lift: Vec<BigInt> = v.iter().map(|e| BigInt::from(elem_val(e))).collect();
            cols.push(node.mul_vec(&lift));
        }
        for j in 0..sub.cols {
            cols.push(sub.col(j));
        }
        let scaled = node.scale(&pb);
        for j in 0..scaled.cols {
            cols.push(scaled.col(j));
        }
        let child = hnf_cols(&Mat::from_cols(n, &cols));
        debug_assert_eq!(
            lat_index(&child).unwrap(),
            lat_index(node).unwrap() * BigInt::from(p).pow(deg as u32),
            "child index must grow by the residue field size"
        );
        children.push(child);
    }
    Ok(children)
}

/// All action-stable lattices between Z^n and base with P-power index at
/// most the bound, paired with their indices. Root (index 1) included.
fn ideal_bfs(
    ring: &RingSpec,
    n: usize,
    base: &Mat,
    action: Option<&Mat>,
    ideal: &Ideal,
    bound: u64,
    _cfg: &EngineConfig,
) -> Result<Vec<(u64, Mat)>> {
    let (p, deg) = ideal_char_deg(ideal)?;
    let q = (p as u128).pow(deg as u32);
    let cmat = residue_generator_matrix(ring, ideal)?;
    let gen_mats: Vec<Mat> = ideal_generators(ring, ideal)?
        .iter()
        .map(|g| elem_ambient_matrix(g, n, action))
        .collect::<Result<_>>()?;
    let root = Mat::identity(n);
    let mut out: Vec<(u64, Mat)> = vec![(1, root.clone())];
    let mut visited: HashSet<Mat> = HashSet::new();
    visited.insert(root.clone());
    let mut level: Vec<(u64, Mat)> = vec![(1, root)];
    while !level.is_empty() {
        let mut next: Vec<(u64, Mat)> = Vec::new();
        for (index, node) in &level {
            let child_index = *index as u128 * q;
            if child_index > bound as u128 {
                continue;
            }
            // P L + base.
            let mut cols: Vec<Vec<BigInt>> = Vec::new();
            for gm in &gen_mats {
                let img = gm.mul(node);
                for j in 0..img.cols {
                    cols.push(img.col(j));
                }
            }
            for j in 0..base.cols {
                cols.push(base.col(j));
            }
            let sub = hnf_cols(&Mat::from_cols(n, &cols));
            for child in
                maximal_stable_children(p, deg, cmat.as_ref(), node, &sub, action)?
            {
                if visited.insert(child.clone()) {
                    next.push((child_index as u64, child.clone()));
                    out.push((child_index as u64, child));
                }
            }
        }
        level = next;
    }
    Ok(out)
}

fn class_code(m: &FiniteModule, cfg: &EngineConfig, bound: u64, cache: &mut CodeCache) -> Result<String> {
    if let Some(c) = cache.get(m) {
        return Ok(c.clone());
    }
    let code = canonical_code(m, cfg.ceiling.max(bound))?;
    cache.insert(m.clone(), code.clone());
    Ok(code)
}

/// Primary quotient classes at one maximal ideal via lattice descent.
fn descent_classes(
    ring: &RingSpec,
    flat: &FlatPresentation,
    ideal: &Ideal,
    bound: u64,
    cfg: &EngineConfig,
    cache: &mut CodeCache,
) -> Result<PerIdealClasses> {
    let base = hnf_cols(&flat.rels);
    let nodes = ideal_bfs(ring, flat.n, &base, flat.action.as_ref(), ideal, bound, cfg)?;
    let mut by_code: BTreeMap<String, QuotientClass> = BTreeMap::new();
    for (index, lattice) in &nodes {
        if *index == 1 {
            continue;
        }
        let lq = quotient_from_lattice(ring, flat.n, lattice, flat.action.as_ref())?;
        let code = class_code(&lq.module, cfg, bound, cache)?;
        by_code.entry(code.clone()).or_insert(QuotientClass {
            order: *index,
            code,
            rep: lq.module,
        });
    }
    let mut classes: Vec<QuotientClass> = by_code.into_values().collect();
    classes.sort_by_key(|c| (c.order, c.code.clone()));
    let norm: u64 = (&ideal.norm()?).try_into().unwrap();
    Ok(PerIdealClasses { ideal: ideal.clone(), norm, classes, kernels: nodes })
}

// ---------------------------------------------------------------------------
// Target-universe strategy
// ---------------------------------------------------------------------------

pub(crate) struct Universe {
    pub(crate) n: usize,
    pub(crate) base: Mat,
    pub(crate) action: Option<Mat>,
}

/// The universe (R/P^l)^g with l maximal for |R/P^l| <= bound on cyclic
/// pieces; every P-primary quotient of a g-generator module with order
/// within the bound is a quotient of it.
fn target_universe(ring: &RingSpec, ideal: &Ideal, bound: u64, gens: usize) -> Result<Universe> {
    let (p, deg) = ideal_char_deg(ideal)?;
    let q = (p as u128).pow(deg as u32);
    let mut l = 0u32;
    let mut acc: u128 = 1;
    while acc * q <= bound as u128 {
        acc *= q;
        l += 1;
    }
    assert!(l >= 1, "maximal ideals are pre-filtered by norm");
    universe_at_level(ring, ideal, l, gens)
}

/// Lattice data of (R/P^l)^g at a fixed level: ambient rank, the base
/// lattice spanned by P^l, and the ambient generator action.
pub(crate) fn universe_at_level(
    ring: &RingSpec,
    ideal: &Ideal,
    l: u32,
    gens: usize,
) -> Result<Universe> {
    let (p, _) = ideal_char_deg(ideal)?;
    match ring {
        RingSpec::ZZ | RingSpec::ZZLoc(_) => {
            let n = gens;
            let mut base = Mat::zero(n, n);
            let pk = BigInt::from(p).pow(l);
            for i in 0..n {
                base.set(i, i, pk.clone());
            }
            Ok(Universe { n, base, action: None })
        }
        RingSpec::QuadOrder(_) => {
            let pl = ideal_power(ring, ideal, l)?;
            let (a, b, c) = match &pl {
                Ideal::Quad { a, b, c, den } => {
                    assert!(den.is_one());
                    (a.clone(), b.clone(), c.clone())
                }
                _ => unreachable!("powers of quadratic ideals stay quadratic"),
            };
            let n = 2 * gens;
            let mut base = Mat::zero(n, n);
            for j in 0..gens {
                base.set(2 * j, 2 * j, a.clone());
                base.set(2 * j, 2 * j + 1, b.clone());
                base.set(2 * j + 1, 2 * j + 1, c.clone());
            }
            Ok(Universe { n, base, action: crate::module::ambient_action(ring, gens) })
        }
        RingSpec::LaurentZ => {
            let (pp, f) = match ideal {
                Ideal::LaurentPF { p, f } => (*p, f.clone()),
                _ => return Err(Error::invalid("expected a maximal Laurent ideal".to_string())),
            };
            // Ambient Z[x]/(ftilde^l) with ftilde the monic lift; the ideal
            // image (p, ftilde)^l spans the base lattice.
            let d = f.len() - 1;
            let dl = d * (l as usize);
            // Monic lift and its powers over the integers.
            let lift: Vec<BigInt> = f.iter().map(|&c| BigInt::from(c)).collect();
            let mut fpowers: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
            for _ in 0..l {
                let prev = fpowers.last().unwrap();
                let mut nxt = vec![BigInt::zero(); prev.len() + lift.len() - 1];
                for (i, a) in prev.iter().enumerate() {
                    for (j, b) in lift.iter().enumerate() {
                        nxt[i + j] += a * b;
                    }
                }
                fpowers.push(nxt);
            }
            let ftop = fpowers[l as usize].clone(); // monic of degree dl
            // Companion matrix of ftilde^l: x action on the power basis.
            let mut comp = Mat::zero(dl, dl);
            for i in 0..dl - 1 {
                comp.set(i + 1, i, BigInt::one());
            }
            for i in 0..dl {
                comp.set(i, dl - 1, -ftop[i].clone());
            }
            // Base lattice: x^j * p^{l-i} ftilde^i for i < l, reduced into
            // the power basis by the companion action; the i = l generator
            // is ftilde^l itself, zero in the ambient.
            let mut cols: Vec<Vec<BigInt>> = Vec::new();
            for i in 0..l {
                let scale = BigInt::from(pp).pow(l - i);
                let gi = &fpowers[i as usize];
                let mut vec0 = vec![BigInt::zero(); dl];
                for (t, c) in gi.iter().enumerate() {
                    vec0[t] = c * &scale;
                }
                let mut cur = vec0;
                for _ in 0..dl {
                    cols.push(cur.clone());
                    cur = comp.mul_vec(&cur);
                }
            }
            let base = hnf_cols(&Mat::from_cols(dl, &cols));
            // g block copies.
            let n = dl * gens;
            let mut bbase = Mat::zero(n, n);
            for bj in 0..gens {
                for i in 0..dl {
                    for j in 0..dl {
                        bbase.set(bj * dl + i, bj * dl + j, base.at(i, j).clone());
                    }
                }
            }
            let mut baction = Mat::zero(n, n);
            for bj in 0..gens {
                for i in 0..dl {
                    for j in 0..dl {
                        baction.set(bj * dl + i, bj * dl + j, comp.at(i, j).clone());
                    }
                }
            }
            Ok(Universe { n, base: bbase, action: Some(baction) })
        }
    }
}

/// Epimorphism assignments from the module onto a finite quotient class:
/// tuples of generator images that satisfy the relations and span. Stops at
/// the first hit unless all are requested.
fn epi_assignments(
    m: &FpModule,
    q: &FiniteModule,
    collect_all: bool,
) -> Result<Vec<Vec<Vec<i64>>>> {
    let g = m.gens;
    if q.is_zero_module() {
        return Ok(vec![vec![vec![]; g]]);
    }
    if g == 0 {
        return Ok(vec![]);
    }
    let elems = q.elements()?;
    let order = q.order();
    // Largest cyclic submodule size bounds how much one more generator can
    // multiply the span.
    let mut maxcyc = BigInt::one();
    for v in &elems {
        let span = q.subgroup_span(std::slice::from_ref(v));
        let s = q.subgroup_size(&span);
        if s > maxcyc {
            maxcyc = s;
        }
    }
    // Relation matrices per column per generator.
    struct RelCheck {
        mats: Vec<(usize, Vec<Vec<i64>>)>,
        last: usize,
    }
    let mut rels: Vec<RelCheck> = Vec::new();
    for col in &m.rels {
        let mut mats = Vec::new();
        let mut last = 0usize;
        for (j, e) in col.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            mats.push((j, elem_action_matrix(q, e)?));
            last = j;
        }
        if !mats.is_empty() {
            rels.push(RelCheck { mats, last });
        }
    }
    let mut found: Vec<Vec<Vec<i64>>> = Vec::new();
    let mut images: Vec<Vec<i64>> = Vec::new();
    let mut spans: Vec<Mat> = Vec::new();
    fn rec(
        m: &FpModule,
        q: &FiniteModule,
        elems: &[Vec<i64>],
        rels: &[RelCheck],
        maxcyc: &BigInt,
        order: &BigInt,
        images: &mut Vec<Vec<i64>>,
        spans: &mut Vec<Mat>,
        found: &mut Vec<Vec<Vec<i64>>>,
        collect_all: bool,
    ) {
        let g = m.gens;
        let j = images.len();
        if j == g {
            let span = spans.last().unwrap();
            if q.subgroup_size(span) == *order {
                found.push(images.clone());
            }
            return;
        }
        for cand in elems {
            if !collect_all && !found.is_empty() {
                return;
            }
            images.push(cand.clone());
            // Relations fully supported by the assigned prefix must vanish.
            let ok = rels
                .iter()
                .filter(|r| r.last == j)
                .all(|r| {
                    let mut acc = vec![0i64; q.k()];
                    for (jj, mat) in &r.mats {
                        let term = crate::fmod::apply_matrix_mod(mat, &images[*jj], &q.factors);
                        acc = q.add_elems(&acc, &term);
                    }
                    acc.iter().all(|&x| x == 0)
                });
            if ok {
                let mut vecs: Vec<Vec<i64>> = Vec::new();
                if let Some(prev) = spans.last() {
                    for c in 0..prev.cols {
                        let col: Vec<i64> = (0..prev.rows)
                            .map(|i| {
                                let v: i64 = prev.at(i, c).try_into().unwrap();
                                v
                            })
                            .collect();
                        vecs.push(col);
                    }
                }
                vecs.push(cand.clone());
                let span = q.subgroup_span(&vecs);
                let size = q.subgroup_size(&span);
                // The remaining generators can grow the span at most
                // maxcyc-fold each.
                let mut reach = size.clone();
                for _ in j + 1..g {
                    reach *= maxcyc;
                }
                if reach >= *order {
                    spans.push(span);
                    rec(m, q, elems, rels, maxcyc, order, images, spans, found, collect_all);
                    spans.pop();
                }
            }
            images.pop();
        }
    }
    rec(m, q, &elems, &rels, &maxcyc, &order, &mut images, &mut spans, &mut found, collect_all);
    Ok(found)
}

/// Primary quotient classes at one maximal ideal via the target universe.
fn target_classes(
    m: &FpModule,
    ideal: &Ideal,
    bound: u64,
    cfg: &EngineConfig,
    cache: &mut CodeCache,
) -> Result<PerIdealClasses> {
    let norm: u64 = (&ideal.norm()?).try_into().unwrap();
    if m.gens == 0 || norm > bound {
        return Ok(PerIdealClasses { ideal: ideal.clone(), norm, classes: vec![], kernels: vec![] });
    }
    let uni = target_universe(&m.ring, ideal, bound, m.gens)?;
    let nodes = ideal_bfs(&m.ring, uni.n, &uni.base, uni.action.as_ref(), ideal, bound, cfg)?;
    let mut by_code: BTreeMap<String, QuotientClass> = BTreeMap::new();
    for (index, lattice) in &nodes {
        if *index == 1 {
            continue;
        }
        let lq = quotient_from_lattice(&m.ring, uni.n, lattice, uni.action.as_ref())?;
        let code = class_code(&lq.module, cfg, bound, cache)?;
        if by_code.contains_key(&code) {
            continue;
        }
        if !epi_assignments(m, &lq.module, false)?.is_empty() {
            by_code.insert(code.clone(), QuotientClass { order: *index, code, rep: lq.module });
        }
    }
    let mut classes: Vec<QuotientClass> = by_code.into_values().collect();
    classes.sort_by_key(|c| (c.order, c.code.clone()));
    Ok(PerIdealClasses { ideal: ideal.clone(), norm, classes, kernels: vec![] })
}

// ---------------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------------

/// Cross-ideal combination: pick at most one primary class per maximal
/// ideal with the order product within the bound; kernels at distinct
/// maximal ideals are comaximal, so each selection is realized by exactly
/// one quotient class.
fn combine_codes(
    per_ideal: &[PerIdealClasses],
    bound: u64,
    cfg: &EngineConfig,
    cache: &mut CodeCache,
) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    out.insert("()".to_string());
    let mut memo: HashMap<Vec<String>, String> = HashMap::new();
    fn rec(
        per_ideal: &[PerIdealClasses],
        idx: usize,
        order: u64,
        picked: &mut Vec<FiniteModule>,
        keys: &mut Vec<String>,
        bound: u64,
        cfg: &EngineConfig,
        cache: &mut CodeCache,
        memo: &mut HashMap<Vec<String>, String>,
        out: &mut BTreeSet<String>,
    ) -> Result<()> {
        if idx == per_ideal.len() {
            if !picked.is_empty() {
                let mut key = keys.clone();
                key.sort();
                let code = if let Some(c) = memo.get(&key) {
                    c.clone()
                } else {
                    let mut acc = picked[0].clone();
                    for part in &picked[1..] {
                        acc = direct_sum(&acc, part)?;
                    }
                    let c = class_code(&acc, cfg, bound, cache)?;
                    memo.insert(key, c.clone());
                    c
                };
                out.insert(code);
            }
            return Ok(());
        }
        rec(per_ideal, idx + 1, order, picked, keys, bound, cfg, cache, memo, out)?;
        for class in &per_ideal[idx].classes {
            if order.saturating_mul(class.order) <= bound {
                picked.push(class.rep.clone());
                keys.push(class.code.clone());
                rec(
                    per_ideal,
                    idx + 1,
                    order * class.order,
                    picked,
                    keys,
                    bound,
                    cfg,
                    cache,
                    memo,
                    out,
                )?;
                keys.pop();
                picked.pop();
            }
        }
        Ok(())
    }
    let mut picked = Vec::new();
    let mut keys = Vec::new();
    rec(per_ideal, 0, 1, &mut picked, &mut keys, bound, cfg, cache, &mut memo, &mut out)?;
    Ok(out)
}

pub fn fingerprint(m: &FpModule, bound: u64, cfg: &EngineConfig) -> Result<FingerprintData> {
    let strategy = if m.ring == RingSpec::LaurentZ { Strategy::Targets } else { Strategy::Descent };
    fingerprint_with_strategy(m, bound, cfg, strategy)
}

pub fn fingerprint_with_strategy(
    m: &FpModule,
    bound: u64,
    cfg: &EngineConfig,
    strategy: Strategy,
) -> Result<FingerprintData> {
    if bound == 0 {
        return Err(Error::invalid("the order bound must be at least 1".to_string()));
    }
    if bound > cfg.ceiling {
        return Err(Error::CeilingExceeded { bound, ceiling: cfg.ceiling });
    }
    let mut cache = CodeCache::new();
    let ideals = maximal_ideals(&m.ring, bound)?;
    let mut per_ideal = Vec::new();
    match strategy {
        Strategy::Descent => {
            let flat = m.flatten()?;
            for ideal in &ideals {
                per_ideal.push(descent_classes(&m.ring, &flat, ideal, bound, cfg, &mut cache)?);
            }
        }
        Strategy::Targets => {
            for ideal in &ideals {
                per_ideal.push(target_classes(m, ideal, bound, cfg, &mut cache)?);
            }
        }
    }
    let codes = combine_codes(&per_ideal, bound, cfg, &mut cache)?;
    Ok(FingerprintData { ring: m.ring.clone(), bound, codes, per_ideal })
}

/// Quotient classes at a single maximal ideal only (orders remain bounded).
pub fn localized_fingerprint(
    m: &FpModule,
    ideal: &Ideal,
    bound: u64,
    cfg: &EngineConfig,
) -> Result<FingerprintData> {
    ideal.validate(&m.ring)?;
    residue_field(&m.ring, ideal)?; // rejects non-maximal ideals
    let mut cache = CodeCache::new();
    let per = if m.ring == RingSpec::LaurentZ {
        target_classes(m, ideal, bound, cfg, &mut cache)?
    } else {
        let flat = m.flatten()?;
        descent_classes(&m.ring, &flat, ideal, bound, cfg, &mut cache)?
    };
    let per_ideal = vec![per];
    let codes = combine_codes(&per_ideal, bound, cfg, &mut cache)?;
    Ok(FingerprintData { ring: m.ring.clone(), bound, codes, per_ideal })
}

pub fn compare(
    a: &FpModule,
    b: &FpModule,
    bound: u64,
    cfg: &EngineConfig,
) -> Result<(CompareVerdict, FingerprintData, FingerprintData)> {
    if a.ring != b.ring {
        return Err(Error::invalid("comparison across different rings".to_string()));
    }
    let fa = fingerprint(a, bound, cfg)?;
    let fb = fingerprint(b, bound, cfg)?;
    let verdict = if fa.codes == fb.codes {
        CompareVerdict::IndistinguishableUpTo(bound)
    } else {
        let only_b: Vec<&String> = fb.codes.difference(&fa.codes).collect();
        if let Some(w) = only_b.first() {
            CompareVerdict::Distinguished { witness: (*w).clone(), witness_in_first: false }
        } else {
            let w = fa.codes.difference(&fb.codes).next().unwrap();
            CompareVerdict::Distinguished { witness: w.clone(), witness_in_first: true }
        }
    };
    Ok((verdict, fa, fb))
}

// ---------------------------------------------------------------------------
// Truncations M(nu)
// ---------------------------------------------------------------------------

/// A finite truncation of a module together with the images of the
/// presentation's generators.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub module: FiniteModule,
    pub gen_images: Vec<Vec<i64>>,
    /// Ambient kernel lattice for descent truncations (flattened coords).
    pub kernel: Option<Mat>,
}

/// Intersection truncation over the given maximal ideals (lattice rings).
fn truncation_lattice(
    m: &FpModule,
    ideals: &[Ideal],
    nu: u64,
    cfg: &EngineConfig,
) -> Result<Truncation> {
    let flat = m.flatten()?;
    let base = hnf_cols(&flat.rels);
    let mut kernel = Mat::identity(flat.n);
    for ideal in ideals {
        for (index, lattice) in ideal_bfs(&m.ring, flat.n, &base, flat.action.as_ref(), ideal, nu, cfg)? {
            if index == 1 {
                continue;
            }
            kernel = lat_intersect(&kernel, &lattice);
        }
    }
    let lq = quotient_from_lattice(&m.ring, flat.n, &kernel, flat.action.as_ref())?;
    let fr = m.ring.flat_rank();
    let gen_images = (0..m.gens)
        .map(|j| {
            let mut v = vec![BigInt::zero(); flat.n];
            v[fr * j] = BigInt::one();
            lq.map_vec(&v)
        })
        .collect();
    Ok(Truncation { module: lq.module, gen_images, kernel: Some(kernel) })
}

/// Product-embedding truncation over the given maximal ideals (Laurent
/// ring): the image of the module in the product of all of its primary
/// quotients of order within the bound, over all epimorphisms.
fn truncation_targets(
    m: &FpModule,
    ideals: &[Ideal],
    nu: u64,
    cfg: &EngineConfig,
) -> Result<Truncation> {
    let mut cache = CodeCache::new();
    // Components: (class, one tuple of generator images) per epimorphism.
    let mut comp_modules: Vec<FiniteModule> = Vec::new();
    let mut comp_assignments: Vec<Vec<Vec<i64>>> = Vec::new();
    for ideal in ideals {
        let per = target_classes(m, ideal, nu, cfg, &mut cache)?;
        for class in &per.classes {
            for assignment in epi_assignments(m, &class.rep, true)? {
                comp_modules.push(class.rep.clone());
                comp_assignments.push(assignment);
            }
        }
    }
    if comp_modules.is_empty() {
        let zero = FiniteModule::zero(&m.ring);
        return Ok(Truncation {
            module: zero,
            gen_images: vec![vec![]; m.gens],
            kernel: None,
        });
    }
    // Assemble the product as a normalized finite module, tracking where
    // each component's coordinates land.
    let total_k: usize = comp_modules.iter().map(|c| c.k()).sum();
    let mut diag = Mat::zero(total_k, total_k);
    let mut action = Mat::zero(total_k, total_k);
    let mut off = 0usize;
    for c in comp_modules.iter() {
        let w = c.action.as_ref().expect("Laurent classes carry actions");
        for i in 0..c.k() {
            diag.set(off + i, off + i, BigInt::from(c.factors[i]));
            for j in 0..c.k() {
                action.set(off + i, off + j, BigInt::from(w[i][j]));
            }
        }
        off += c.k();
    }
    let lq = quotient_from_lattice(&m.ring, total_k, &diag, Some(&action))?;
    // Generator images in the product, then the image submodule.
    let mut gen_vecs: Vec<Vec<i64>> = Vec::new();
    for j in 0..m.gens {
        let mut v = vec![BigInt::zero(); total_k];
        let mut off = 0usize;
        for (c, assignment) in comp_modules.iter().zip(&comp_assignments) {
            for (i, &x) in assignment[j].iter().enumerate() {
                v[off + i] = BigInt::from(x);
            }
            off += c.k();
        }
        gen_vecs.push(lq.map_vec(&v));
    }
    let span = lq.module.subgroup_span(&gen_vecs);
    let sub = subgroup_module(&lq.module, &span)?;
    let gen_images = gen_vecs.iter().map(|v| sub.coords(v)).collect();
    Ok(Truncation { module: sub.module, gen_images, kernel: None })
}

/// The truncation M(nu): the quotient of M by the intersection of the
/// kernels of all finite quotients of order at most nu.
pub fn m_nu_quotient(m: &FpModule, nu: u64, cfg: &EngineConfig) -> Result<Truncation> {
    if nu > cfg.ceiling {
        return Err(Error::CeilingExceeded { bound: nu, ceiling: cfg.ceiling });
    }
    let ideals = maximal_ideals(&m.ring, nu)?;
    if m.ring == RingSpec::LaurentZ {
        truncation_targets(m, &ideals, nu, cfg)
    } else {
        truncation_lattice(m, &ideals, nu, cfg)
    }
}

// ---------------------------------------------------------------------------
// Epimorphism rigidity check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct EpiIsoPart {
    pub ideal: Ideal,
    pub order_a: BigInt,
    pub order_b: BigInt,
    pub epi_count: BigInt,
    pub all_bijective: bool,
}

#[derive(Clone, Debug)]
pub struct EpiIsoReport {
    pub bound: u64,
    pub fingerprints_agree: bool,
    pub parts: Vec<EpiIsoPart>,
    pub total_epis: BigInt,
    pub all_epis_bijective: bool,
}

/// Count the epimorphisms A(nu) -> B(nu) per maximal ideal and check that
/// each is forced to be bijective. Kernel parts at distinct maximal ideals
/// admit no homomorphisms between each other, so the count decomposes as a
/// product over ideals.
pub fn epi_implies_iso_check(
    a: &FpModule,
    b: &FpModule,
    nu: u64,
    cfg: &EngineConfig,
) -> Result<EpiIsoReport> {
    if a.ring != b.ring {
        return Err(Error::invalid("modules over different rings".to_string()));
    }
    let (verdict, _, _) = compare(a, b, nu, cfg)?;
    let fingerprints_agree = matches!(verdict, CompareVerdict::IndistinguishableUpTo(_));
    let ideals = maximal_ideals(&a.ring, nu)?;
    let mut parts = Vec::new();
    let mut total = BigInt::one();
    for ideal in &ideals {
        let single = std::slice::from_ref(ideal);
        let (ta, tb) = if a.ring == RingSpec::LaurentZ {
            (truncation_targets(a, single, nu, cfg)?, truncation_targets(b, single, nu, cfg)?)
        } else {
            (truncation_lattice(a, single, nu, cfg)?, truncation_lattice(b, single, nu, cfg)?)
        };
        let count = if a.ring == RingSpec::LaurentZ {
            count_epis_graph(a, &ta, &tb)?
        } else {
            count_epis_lattice(a, &ta, &tb)?
        };
        let order_a = ta.module.order();
        let order_b = tb.module.order();
        let all_bijective = count.is_zero() || order_a == order_b;
        total *= &count;
        parts.push(EpiIsoPart { ideal: ideal.clone(), order_a, order_b, epi_count: count, all_bijective });
    }
    let all_epis_bijective = parts.iter().all(|p| p.all_bijective);
    Ok(EpiIsoReport { bound: nu, fingerprints_agree, parts, total_epis: total, all_epis_bijective })
}

/// Epimorphisms between descent truncations: generator images must satisfy
/// the kernel lattice's columns read as module relations.
fn count_epis_lattice(a: &FpModule, ta: &Truncation, tb: &Truncation) -> Result<BigInt> {
    let g = a.gens;
    if tb.module.is_zero_module() {
        // Only the zero map, an epi; bijective iff A's part is zero too.
        return Ok(BigInt::one());
    }
    if g == 0 {
        return Ok(BigInt::zero());
    }
    let kernel = ta.kernel.as_ref().expect("descent truncations carry kernels");
    let fr = a.ring.flat_rank();
    // Kernel columns as relation vectors over the ring.
    let mut rel_cols: Vec<Vec<RingElem>> = Vec::new();
    for c in 0..kernel.cols {
        let mut col = Vec::with_capacity(g);
        for j in 0..g {
            let e = match fr {
                1 => RingElem::Int(kernel.at(j, c).clone()),
                2 => RingElem::Quad(kernel.at(2 * j, c).clone(), kernel.at(2 * j + 1, c).clone()),
                _ => unreachable!(),
            };
            col.push(e);
        }
        rel_cols.push(col);
    }
    let probe = FpModule::new(a.ring.clone(), g, rel_cols)?;
    let epis = epi_assignments(&probe, &tb.module, true)?;
    Ok(BigInt::from(epis.len()))
}

/// Epimorphisms between target truncations via the graph criterion: a
/// generator assignment defines a homomorphism exactly when the span of the
/// paired generators inside A x B has the order of A.
fn count_epis_graph(a: &FpModule, ta: &Truncation, tb: &Truncation) -> Result<BigInt> {
    let g = a.gens;
    if tb.module.is_zero_module() {
        return Ok(BigInt::one());
    }
    if g == 0 {
        return Ok(BigInt::zero());
    }
    let (ka, kb) = (ta.module.k(), tb.module.k());
    let total_k = ka + kb;
    let mut diag = Mat::zero(total_k, total_k);
    let mut action = Mat::zero(total_k, total_k);
    for (m, off) in [(&ta.module, 0usize), (&tb.module, ka)] {
        let w = m.action.as_ref().expect("Laurent truncations carry actions");
        for i in 0..m.k() {
            diag.set(off + i, off + i, BigInt::from(m.factors[i]));
            for j in 0..m.k() {
                action.set(off + i, off + j, BigInt::from(w[i][j]));
            }
        }
    }
    let lq = quotient_from_lattice(&a.ring, total_k, &diag, Some(&action))?;
    let order_a = ta.module.order();
    let order_b = tb.module.order();
    let elems = tb.module.elements()?;
    let mut count = BigInt::zero();
    let mut images: Vec<Vec<i64>> = Vec::new();
    fn rec(
        g: usize,
        ta: &Truncation,
        tb: &FiniteModule,
        lq: &crate::fmod::LatticeQuotient,
        prod: &FiniteModule,
        elems: &[Vec<i64>],
        order_a: &BigInt,
        order_b: &BigInt,
        images: &mut Vec<Vec<i64>>,
        count: &mut BigInt,
    ) {
        if images.len() == g {
            // Graph span in A x B.
            let mut pairs: Vec<Vec<i64>> = Vec::new();
            for (ga, y) in ta.gen_images.iter().zip(images.iter()) {
                let mut v = vec![BigInt::zero(); ta.module.k() + tb.k()];
                for (i, &x) in ga.iter().enumerate() {
                    v[i] = BigInt::from(x);
                }
                for (i, &x) in y.iter().enumerate() {
                    v[ta.module.k() + i] = BigInt::from(x);
                }
                pairs.push(lq.map_vec(&v));
            }
            let span = prod.subgroup_span(&pairs);
            if prod.subgroup_size(&span) != *order_a {
                return; // not a well-defined homomorphism
            }
            let byspan = tb.subgroup_span(images);
            if tb.subgroup_size(&byspan) == *order_b {
                *count += 1;
            }
            return;
        }
        for cand in elems {
            images.push(cand.clone());
            rec(g, ta, tb, lq, prod, elems, order_a, order_b, images, count);
            images.pop();
        }
    }
    rec(
        g,
        ta,
        &tb.module,
        &lq,
        &lq.module,
        &elems,
        &order_a,
        &order_b,
        &mut images,
        &mut count,
    );
    Ok(count)
}

// ---------------------------------------------------------------------------
// Invariant sublattices
// ---------------------------------------------------------------------------

/// All action-stable finite-index subgroups of the module with index at most
/// the bound (the whole module included), with their quotients.
pub fn invariant_sublattices(
    m: &FpModule,
    bound: u64,
    cfg: &EngineConfig,
) -> Result<Vec<(Mat, FiniteModule)>> {
    if m.ring == RingSpec::LaurentZ {
        return Err(Error::unsupported(
            "stable sublattice enumeration needs a finite-rank ambient lattice".to_string(),
        ));
    }
    let flat = m.flatten()?;
    let base = hnf_cols(&flat.rels);
    let ideals = maximal_ideals(&m.ring, bound)?;
    let mut per: Vec<Vec<(u64, Mat)>> = Vec::new();
    for ideal in &ideals {
        per.push(ideal_bfs(&m.ring, flat.n, &base, flat.action.as_ref(), ideal, bound, cfg)?);
    }
    let mut found: BTreeMap<(BigInt, Vec<BigInt>), Mat> = BTreeMap::new();
    fn rec(
        per: &[Vec<(u64, Mat)>],
        idx: usize,
        order: u64,
        current: &Mat,
        bound: u64,
        found: &mut BTreeMap<(BigInt, Vec<BigInt>), Mat>,
    ) {
        if idx == per.len() {
            let key = (
                lat_index(current).expect("full-rank sublattice"),
                current.columns().concat(),
            );
            found.entry(key).or_insert_with(|| current.clone());
            return;
        }
        for (index, lattice) in &per[idx] {
            if order.saturating_mul(*index) > bound {
                continue;
            }
            let next = if *index == 1 { current.clone() } else { lat_intersect(current, lattice) };
            rec(per, idx + 1, order * index, &next, bound, found);
        }
    }
    rec(&per, 0, 1, &Mat::identity(flat.n), bound, &mut found);
    let mut out = Vec::new();
    for (_, lattice) in found {
        let lq = quotient_from_lattice(&m.ring, flat.n, &lattice, flat.action.as_ref())?;
        out.push((lattice, lq.module));
    }
    Ok(out)
}
