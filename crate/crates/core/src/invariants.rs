//! Presentation-level invariants that finite quotient data cannot change:
//! annihilators, local generator counts, Fitting ideals, and a projectivity
//! verdict certified up to a maximal-ideal norm bound.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::fmod::elem_action_matrix;
use crate::fq::{fq_rank, FqMat};
use crate::matrix::{smith_decompose, Mat};
use crate::module::{z_decomposition, FpModule, SteinitzModule};
use crate::quotients::fingerprint;
use crate::ring::{
    ideal_membership, ideal_power, ideal_product, laurent_normalize_generator, maximal_ideals,
    residue_field, residue_reduce_with, Ideal, RingElem, RingSpec,
};
use crate::EngineConfig;

// ---------------------------------------------------------------------------
// Annihilators
// ---------------------------------------------------------------------------

/// The annihilator ideal of the module. Integer rings accept any
/// presentation; quadratic orders require Steinitz input (see
/// annihilator_steinitz); the Laurent ring accepts direct sums of cyclic
/// modules only.
pub fn annihilator(m: &FpModule) -> Result<Ideal> {
    match &m.ring {
        RingSpec::ZZ | RingSpec::ZZLoc(_) => {
            let dec = z_decomposition(m)?;
            if dec.free_rank > 0 {
                return Ok(Ideal::Zero);
            }
            match dec.torsion.last() {
                None => Ok(Ideal::unit(&m.ring)),
                Some(d) => Ok(Ideal::Int(d.clone())),
            }
        }
        RingSpec::QuadOrder(_) => Err(Error::unsupported(
            "annihilators over quadratic orders take Steinitz input".to_string(),
        )),
        RingSpec::LaurentZ => annihilator_laurent(m),
    }
}

/// Annihilator from Steinitz data: zero as soon as a projective summand is
/// present, else the intersection of the torsion annihilators P^k.
pub fn annihilator_steinitz(s: &SteinitzModule) -> Result<Ideal> {
    if s.rank > 0 {
        return Ok(Ideal::Zero);
    }
    // Max exponent per distinct maximal ideal; intersection across distinct
    // maximal ideals is their product.
    let mut groups: Vec<(Ideal, u32)> = Vec::new();
    for (ideal, k) in &s.torsion {
        match groups.iter_mut().find(|(i, _)| i == ideal) {
            Some(entry) => entry.1 = entry.1.max(*k),
            None => groups.push((ideal.clone(), *k)),
        }
    }
    let mut acc = Ideal::unit(&s.ring);
    for (ideal, k) in &groups {
        acc = ideal_product(&s.ring, &acc, &ideal_power(&s.ring, ideal, *k)?)?;
    }
    Ok(acc)
}

/// One cyclic summand's annihilator data over the Laurent ring.
enum CyclicAnn {
    Unit,
    Principal(RingElem),
    Maximal { p: u64, f: Vec<u64> },
}

fn annihilator_laurent(m: &FpModule) -> Result<Ideal> {
    let coupled = || {
        Error::unsupported(
            "Laurent annihilators need a direct sum of cyclic modules (cyclic-sum required)"
                .to_string(),
        )
    };
    // Every relation may touch one generator only.
    let mut per_gen: Vec<Vec<RingElem>> = vec![vec![]; m.gens];
    for col in &m.rels {
        let support: Vec<usize> =
            col.iter().enumerate().filter(|(_, e)| !e.is_zero()).map(|(j, _)| j).collect();
        match support[..] {
            [] => {}
            [j] => per_gen[j].push(col[j].clone()),
            _ => return Err(coupled()),
        }
    }
    let mut parts: Vec<CyclicAnn> = Vec::new();
    for rels in &per_gen {
        if rels.is_empty() {
            return Ok(Ideal::Zero); // free summand
        }
        parts.push(classify_cyclic(rels)?);
    }
    // Intersect: units drop out; principals combine by lcm; a maximal part
    // must either repeat or absorb the principal part.
    let mut principal: Option<RingElem> = None;
    let mut maximal: Option<(u64, Vec<u64>)> = None;
    for part in parts {
        match part {
            CyclicAnn::Unit => {}
            CyclicAnn::Principal(f) => {
                principal = Some(match principal {
                    None => f,
                    Some(g) => laurent_lcm(&g, &f),
                });
            }
            CyclicAnn::Maximal { p, f } => match &maximal {
                None => maximal = Some((p, f)),
                Some((q, g)) if *q == p && *g == f => {}
                Some(_) => {
                    return Err(Error::unsupported(
                        "annihilator is an intersection of distinct maximal ideals, outside the supported ideal shapes".to_string(),
                    ))
                }
            },
        }
    }
    match (principal, maximal) {
        (None, None) => Ok(Ideal::unit(&m.ring)),
        (Some(f), None) => Ok(Ideal::LaurentPoly(laurent_normalize_generator(&f))),
        (None, Some((p, f))) => Ok(Ideal::LaurentPF { p, f }),
        (Some(f), Some((p, g))) => {
            // (f) ∩ (p, g) = (f) exactly when f lies in the maximal ideal.
            let pf = Ideal::LaurentPF { p, f: g };
            if ideal_membership(&m.ring, &pf, &f)? {
                Ok(Ideal::LaurentPoly(laurent_normalize_generator(&f)))
            } else {
                Err(Error::unsupported(
                    "annihilator mixes a principal part with a maximal ideal it does not lie in"
                        .to_string(),
                ))
            }
        }
    }
}

/// Recognize the annihilator ideal of Λ/(rels): a single generator, or the
/// maximal-ideal pair (prime constant, irreducible polynomial).
fn classify_cyclic(rels: &[RingElem]) -> Result<CyclicAnn> {
    let norm: Vec<RingElem> = rels.iter().map(laurent_normalize_generator).collect();
    if norm.len() == 1 {
        let f = norm.into_iter().next().unwrap();
        // Normalized units are exactly the constant 1.
        let terms = f.laurent_terms();
        if terms.len() == 1 && terms.values().next().unwrap().is_one() {
            return Ok(CyclicAnn::Unit);
        }
        return Ok(CyclicAnn::Principal(f));
    }
    if norm.len() == 2 {
        // Try both orders for (p, f).
        for (a, b) in [(&norm[0], &norm[1]), (&norm[1], &norm[0])] {
            if let Some(p) = as_prime_constant(a) {
                if let Some(f) = as_irreducible_mod_p(b, p) {
                    return Ok(CyclicAnn::Maximal { p, f });
                }
            }
        }
    }
    Err(Error::unsupported(
        "cyclic relation set is neither principal nor a (p, f) maximal pair".to_string(),
    ))
}

fn as_prime_constant(e: &RingElem) -> Option<u64> {
    let terms = e.laurent_terms();
    if terms.len() != 1 {
        return None;
    }
    let (&exp, c) = terms.iter().next().unwrap();
    if exp != 0 {
        return None;
    }
    let v: u64 = c.abs().try_into().ok()?;
    crate::arith::is_prime_u64(v).then_some(v)
}

fn as_irreducible_mod_p(e: &RingElem, p: u64) -> Option<Vec<u64>> {
    let terms = e.laurent_terms();
    let deg = *terms.keys().next_back()?;
    let mut f = vec![0u64; deg as usize + 1];
    for (&exp, c) in terms {
        let r: u64 = c.mod_floor(&BigInt::from(p)).try_into().unwrap();
        f[exp as usize] = r;
    }
    crate::fq::pf_trim(&mut f);
    // Monic normalization mod p.
    let lead = *f.last()?;
    if lead != 1 {
        let inv = crate::arith::invmod(lead, p)?;
        for c in f.iter_mut() {
            *c = *c * inv % p;
        }
    }
    if f.len() < 2 || (f.len() == 2 && f[0] == 0) {
        return None; // constant, or an associate of x
    }
    crate::fq::pf_is_irreducible(&f, p).then_some(f)
}

// Integer-coefficient polynomial helpers for Laurent lcm computations.

fn zpoly_of(e: &RingElem) -> Vec<BigInt> {
    let n = laurent_normalize_generator(e);
    let terms = n.laurent_terms();
    let deg = terms.keys().next_back().copied().unwrap_or(0);
    let mut v = vec![BigInt::zero(); deg as usize + 1];
    for (&exp, c) in terms {
        v[exp as usize] = c.clone();
    }
    v
}

fn zpoly_trim(v: &mut Vec<BigInt>) {
    while v.last().map(|c| c.is_zero()).unwrap_or(false) {
        v.pop();
    }
}

fn zpoly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn zpoly_content(a: &[BigInt]) -> BigInt {
    let mut g = BigInt::zero();
    for c in a {
        g = g.gcd(c);
    }
    g
}

fn zpoly_primitive(a: &[BigInt]) -> Vec<BigInt> {
    let g = zpoly_content(a);
    if g.is_zero() || g.is_one() {
        return a.to_vec();
    }
    a.iter().map(|c| c / &g).collect()
}

/// Pseudo-remainder of a by b (b nonzero): lead(b)^(deg a - deg b + 1) * a
/// reduced by b.
fn zpoly_prem(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut r = a.to_vec();
    zpoly_trim(&mut r);
    let db = b.len() - 1;
    let lb = b.last().unwrap().clone();
    while r.len() > db {
        let dr = r.len() - 1;
        let lr = r.last().unwrap().clone();
        for c in r.iter_mut() {
            *c *= &lb;
        }
        for i in 0..=db {
            let v = &r[dr - db + i] - &lr * &b[i];
            r[dr - db + i] = v;
        }
        zpoly_trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    r
}

fn zpoly_gcd(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    zpoly_trim(&mut a);
    zpoly_trim(&mut b);
    if a.is_empty() {
        return b;
    }
    if b.is_empty() {
        return a;
    }
    let content = zpoly_content(&a).gcd(&zpoly_content(&b));
    let (mut f, mut g) = (zpoly_primitive(&a), zpoly_primitive(&b));
    if f.len() < g.len() {
        std::mem::swap(&mut f, &mut g);
    }
    while !g.is_empty() {
        let r = zpoly_primitive(&zpoly_prem(&f, &g));
        f = g;
        g = r;
    }
    let mut out: Vec<BigInt> = f.iter().map(|c| c * &content).collect();
    if out.last().map(|c| c.is_negative()).unwrap_or(false) {
        for c in out.iter_mut() {
            *c = -c.clone();
        }
    }
    out
}

/// Exact quotient a / b over Z[x]; panics if the division is inexact
/// (callers divide a product by its own gcd).
fn zpoly_divexact(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut r = a.to_vec();
    zpoly_trim(&mut r);
    let mut b = b.to_vec();
    zpoly_trim(&mut b);
    let db = b.len() - 1;
    let lb = b.last().unwrap().clone();
    let mut q = vec![BigInt::zero(); r.len().saturating_sub(db)];
    while r.len() > db {
        let dr = r.len() - 1;
        let (head, rem) = r.last().unwrap().div_rem(&lb);
        assert!(rem.is_zero(), "inexact polynomial division");
        q[dr - db] = head.clone();
        for i in 0..=db {
            let v = &r[dr - db + i] - &head * &b[i];
            r[dr - db + i] = v;
        }
        zpoly_trim(&mut r);
    }
    assert!(r.is_empty(), "inexact polynomial division");
    q
}

fn laurent_lcm(a: &RingElem, b: &RingElem) -> RingElem {
    let (pa, pb) = (zpoly_of(a), zpoly_of(b));
    let g = zpoly_gcd(&pa, &pb);
    let l = zpoly_divexact(&zpoly_mul(&pa, &pb), &g);
    let terms: Vec<(i64, i64)> = Vec::new();
    let mut e = RingElem::laurent(&terms);
    if let RingElem::Laurent(m) = &mut e {
        for (i, c) in l.iter().enumerate() {
            if !c.is_zero() {
                m.insert(i as i64, c.clone());
            }
        }
    }
    laurent_normalize_generator(&e)
}

// ---------------------------------------------------------------------------
// Truncated annihilator probes
// ---------------------------------------------------------------------------

/// Does the element act as zero on the finite module?
pub fn annihilates(q: &crate::fmod::FiniteModule, e: &RingElem) -> Result<bool> {
    if q.is_zero_module() {
        return Ok(true);
    }
    let mat = elem_action_matrix(q, e)?;
    for (i, row) in mat.iter().enumerate() {
        for v in row {
            if v.rem_euclid(q.factors[i]) != 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Finite-level annihilator probe: the elements of a finite probe set that
/// kill every fingerprint member at the bound. Probes: integers of absolute
/// value up to the height (integer rings), or a·x^e − b with exponents up to
/// the probe degree plus all constants (Laurent ring).
pub fn truncated_profinite_annihilator(
    m: &FpModule,
    bound: u64,
    probe_degree: u32,
    probe_height: u64,
    cfg: &EngineConfig,
) -> Result<Vec<RingElem>> {
    let fp = fingerprint(m, bound, cfg)?;
    // Killing every combined member is killing every primary class.
    let reps: Vec<&crate::fmod::FiniteModule> =
        fp.per_ideal.iter().flat_map(|per| per.classes.iter().map(|c| &c.rep)).collect();
    let h = probe_height as i64;
    let mut probes: Vec<RingElem> = Vec::new();
    let mut seen: HashSet<RingElem> = HashSet::new();
    let mut push = |e: RingElem, probes: &mut Vec<RingElem>| {
        if seen.insert(e.clone()) {
            probes.push(e);
        }
    };
    match &m.ring {
        RingSpec::ZZ | RingSpec::ZZLoc(_) => {
            for v in -h..=h {
                push(RingElem::from_int(&m.ring, v), &mut probes);
            }
        }
        RingSpec::LaurentZ => {
            for c in -h..=h {
                push(RingElem::laurent(&[(0, c)]), &mut probes);
            }
            for e in 1..=probe_degree.max(1) as i64 {
                for a in -h..=h {
                    if a == 0 {
                        continue;
                    }
                    for b in -h..=h {
                        push(RingElem::laurent(&[(e, a), (0, -b)]), &mut probes);
                    }
                }
            }
        }
        RingSpec::QuadOrder(_) => {
            return Err(Error::unsupported(
                "annihilator probes are defined for integer and Laurent rings".to_string(),
            ))
        }
    }
    let mut out = Vec::new();
    'probe: for e in probes {
        for rep in &reps {
            if !annihilates(rep, &e)? {
                continue 'probe;
            }
        }
        out.push(e);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Local generator counts
// ---------------------------------------------------------------------------

/// Minimal generator count of the localization at a maximal ideal: the
/// corank of the relation matrix over the residue field (Nakayama).
pub fn mu_local(m: &FpModule, ideal: &Ideal) -> Result<u32> {
    ideal.validate(&m.ring)?;
    let field = residue_field(&m.ring, ideal)?;
    let mut mat = FqMat::zero(&field, m.gens, m.rels.len());
    for (c, col) in m.rels.iter().enumerate() {
        for (i, e) in col.iter().enumerate() {
            mat.set(i, c, residue_reduce_with(&field, &m.ring, ideal, e));
        }
    }
    Ok((m.gens - fq_rank(&field, &mat)) as u32)
}

// ---------------------------------------------------------------------------
// Fitting ideals
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FittingIdeal {
    Zero,
    Unit,
    Minors(Vec<RingElem>),
}

pub(crate) fn det_rec(ring: &RingSpec, m: &[Vec<RingElem>]) -> RingElem {
    let n = m.len();
    if n == 0 {
        return RingElem::one(ring);
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = RingElem::zero(ring);
    for (j, pivot) in m[0].iter().enumerate() {
        if pivot.is_zero() {
            continue;
        }
        let minor: Vec<Vec<RingElem>> = m[1..]
            .iter()
            .map(|row| {
                row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, e)| e.clone()).collect()
            })
            .collect();
        let term = pivot.mul(&det_rec(ring, &minor), ring);
        acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

pub(crate) fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Sign normalization for reported generators: positive integers, positive
/// leading coefficients, lexicographically positive quadratic pairs.
fn normalize_generator(ring: &RingSpec, e: &RingElem) -> RingElem {
    match e {
        RingElem::Int(v) => RingElem::Int(v.abs()),
        RingElem::Quad(x, y) => {
            if x.is_negative() || (x.is_zero() && y.is_negative()) {
                RingElem::Quad(-x.clone(), -y.clone())
            } else {
                e.clone()
            }
        }
        RingElem::Laurent(_) => {
            let _ = ring;
            laurent_normalize_generator(e)
        }
    }
}

/// Fitting ideal Fitt_k: the ideal of (g−k)×(g−k) minors of the relation
/// matrix. Unit when g−k ≤ 0, zero when no minor of that size exists or all
/// vanish, else the explicit minor list.
pub fn fitting_ideal(m: &FpModule, k: usize) -> Result<FittingIdeal> {
    let g = m.gens;
    if k >= g {
        return Ok(FittingIdeal::Unit);
    }
    let s = g - k;
    let r = m.rels.len();
    if s > r {
        return Ok(FittingIdeal::Zero);
    }
    let mut minors: Vec<RingElem> = Vec::new();
    let mut seen: HashSet<RingElem> = HashSet::new();
    for rows in subsets(g, s) {
        for cols in subsets(r, s) {
            let sub: Vec<Vec<RingElem>> = rows
                .iter()
                .map(|&i| cols.iter().map(|&c| m.rels[c][i].clone()).collect())
                .collect();
            let d = det_rec(&m.ring, &sub);
            if d.is_zero() {
                continue;
            }
            let d = normalize_generator(&m.ring, &d);
            if seen.insert(d.clone()) {
                minors.push(d);
            }
        }
    }
    if minors.is_empty() {
        return Ok(FittingIdeal::Zero);
    }
    minors.sort_by_key(|e| e.render());
    Ok(FittingIdeal::Minors(minors))
}

// ---------------------------------------------------------------------------
// Projectivity
// ---------------------------------------------------------------------------

/// Rank of the cokernel over the fraction field.
pub fn generic_rank(m: &FpModule) -> Result<usize> {
    match &m.ring {
        RingSpec::ZZ | RingSpec::ZZLoc(_) => {
            let flat = m.flatten()?;
            Ok(flat.n - smith_decompose(&flat.rels).rank)
        }
        RingSpec::QuadOrder(_) => {
            // Flattening doubles the rank exactly.
            let flat = m.flatten()?;
            let rank = smith_decompose(&flat.rels).rank;
            debug_assert_eq!(rank % 2, 0, "flattened quadratic relations pair up");
            Ok(m.gens - rank / 2)
        }
        RingSpec::LaurentZ => {
            // Shift each relation to plain polynomials (unit multiples),
            // then take the best rank over enough integer evaluation
            // points: a nonvanishing minor of degree D survives one of any
            // D+1 distinct points.
            let g = m.gens;
            let r = m.rels.len();
            if r == 0 {
                return Ok(g);
            }
            let mut maxdeg = 0i64;
            let mut shifted: Vec<Vec<RingElem>> = Vec::new();
            for col in &m.rels {
                let minexp = col
                    .iter()
                    .filter(|e| !e.is_zero())
                    .map(|e| *e.laurent_terms().keys().next().unwrap())
                    .min()
                    .unwrap_or(0);
                let col: Vec<RingElem> = col.iter().map(|e| e.laurent_shift(-minexp)).collect();
                for e in &col {
                    if let Some(d) = e.laurent_terms().keys().next_back() {
                        maxdeg = maxdeg.max(*d);
                    }
                }
                shifted.push(col);
            }
            let points = (g.min(r) as i64) * maxdeg + 1;
            let mut best = 0usize;
            for t in 0..points {
                let x = BigInt::from(2 + t);
                let mut mat = Mat::zero(g, r);
                for (c, col) in shifted.iter().enumerate() {
                    for (i, e) in col.iter().enumerate() {
                        let mut acc = BigInt::zero();
                        for (&exp, cf) in e.laurent_terms() {
                            acc += cf * x.pow(exp as u32);
                        }
                        mat.set(i, c, acc);
                    }
                }
                best = best.max(smith_decompose(&mat).rank);
            }
            Ok(g - best)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProjectivityVerdict {
    NotProjective { reason: String },
    ProjectiveOfRank { rank: usize, certified_up_to_norm: u64 },
    Unknown { reason: String },
}

/// Projectivity test: candidate rank ν from the fraction field, the
/// (ν−1)-st Fitting ideal must vanish, and every sampled localization must
/// need exactly ν generators. The verdict carries the sampling bound.
pub fn projectivity_verdict(m: &FpModule, norm_bound: u64) -> Result<ProjectivityVerdict> {
    if norm_bound < 2 {
        return Err(Error::invalid("projectivity needs a norm bound of at least 2".to_string()));
    }
    let nu = generic_rank(m)?;
    if nu > 0 {
        match fitting_ideal(m, nu - 1)? {
            FittingIdeal::Zero => {}
            FittingIdeal::Unit => {
                return Ok(ProjectivityVerdict::NotProjective {
                    reason: format!("Fitt_{} is the unit ideal", nu - 1),
                })
            }
            FittingIdeal::Minors(ms) => {
                return Ok(ProjectivityVerdict::NotProjective {
                    reason: format!(
                        "Fitt_{} contains the nonzero element {}",
                        nu - 1,
                        ms[0].render()
                    ),
                })
            }
        }
    }
    for ideal in maximal_ideals(&m.ring, norm_bound)? {
        let mu = mu_local(m, &ideal)?;
        if mu as usize != nu {
            return Ok(ProjectivityVerdict::NotProjective {
                reason: format!(
                    "{} generators needed at {} but the generic rank is {nu}",
                    mu,
                    ideal.render()
                ),
            });
        }
    }
    Ok(ProjectivityVerdict::ProjectiveOfRank { rank: nu, certified_up_to_norm: norm_bound })
}

/// Steinitz inputs are projective exactly when no torsion is present.
pub fn projectivity_steinitz(s: &SteinitzModule, norm_bound: u64) -> ProjectivityVerdict {
    if s.torsion.is_empty() {
        ProjectivityVerdict::ProjectiveOfRank { rank: s.rank, certified_up_to_norm: norm_bound }
    } else {
        let (ideal, k) = &s.torsion[0];
        ProjectivityVerdict::NotProjective {
            reason: format!("torsion summand at {}^{}", ideal.render(), k),
        }
    }
}

// ---------------------------------------------------------------------------
// Combined report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum AnnihilatorValue {
    Ideal(Ideal),
    Unavailable(String),
}

#[derive(Clone, Debug)]
pub struct InvariantReport {
    pub annihilator: AnnihilatorValue,
    /// (maximal ideal, μ) for every maximal ideal of norm up to the bound.
    pub mu_table: Vec<(Ideal, u32)>,
    pub projectivity: ProjectivityVerdict,
    pub norm_bound: u64,
}

pub fn invariant_report(m: &FpModule, norm_bound: u64) -> Result<InvariantReport> {
    let annihilator = match annihilator(m) {
        Ok(i) => AnnihilatorValue::Ideal(i),
        Err(e) => AnnihilatorValue::Unavailable(e.to_string()),
    };
    let mut mu_table = Vec::new();
    for ideal in maximal_ideals(&m.ring, norm_bound)? {
        let mu = mu_local(m, &ideal)?;
        mu_table.push((ideal, mu));
    }
    let projectivity = projectivity_verdict(m, norm_bound)?;
    Ok(InvariantReport { annihilator, mu_table, projectivity, norm_bound })
}

/// Report for Steinitz inputs: annihilator and projectivity from the
/// structural data, μ from the derived presentation.
pub fn invariant_report_steinitz(s: &SteinitzModule, norm_bound: u64) -> Result<InvariantReport> {
    let m = crate::module::steinitz_to_presentation(s)?;
    let annihilator = AnnihilatorValue::Ideal(annihilator_steinitz(s)?);
    let mut mu_table = Vec::new();
    for ideal in maximal_ideals(&s.ring, norm_bound)? {
        let mu = mu_local(&m, &ideal)?;
        mu_table.push((ideal, mu));
    }
    let projectivity = projectivity_steinitz(s, norm_bound);
    Ok(InvariantReport { annihilator, mu_table, projectivity, norm_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::module::steinitz_to_presentation;

    fn zz_module(factors: &[i64]) -> FpModule {
        let ring = RingSpec::ZZ;
        let n = factors.len();
        let mut cols = Vec::new();
        for (i, &d) in factors.iter().enumerate() {
            let mut col = vec![RingElem::from_int(&ring, 0); n];
            col[i] = RingElem::from_int(&ring, d);
            cols.push(col);
        }
        FpModule::new(ring, n, cols).unwrap()
    }

    fn laurent_cyclic(terms: &[(i64, i64)]) -> FpModule {
        FpModule::cyclic(RingSpec::LaurentZ, &[RingElem::laurent(terms)]).unwrap()
    }

    #[test]
    fn annihilators_pinned() {
        // Z/6 + Z/4 is killed exactly by multiples of 12.
        assert_eq!(annihilator(&zz_module(&[6, 4])).unwrap(), Ideal::Int(BigInt::from(12)));
        // A free summand forces the zero annihilator.
        assert_eq!(annihilator(&FpModule::free(RingSpec::ZZ, 1)).unwrap(), Ideal::Zero);
        // Cyclic Laurent module: the principal generator itself.
        let ann = annihilator(&laurent_cyclic(&[(1, 1), (0, -2)])).unwrap();
        assert_eq!(ann, Ideal::LaurentPoly(RingElem::laurent(&[(1, 1), (0, -2)])));
        assert_eq!(annihilator(&FpModule::free(RingSpec::LaurentZ, 1)).unwrap(), Ideal::Zero);
        // Sum of two cyclic modules: least common multiple.
        let ring = RingSpec::LaurentZ;
        let zero = RingElem::zero(&ring);
        let m = FpModule::new(
            ring.clone(),
            2,
            vec![
                vec![RingElem::laurent(&[(1, 1), (0, -2)]), zero.clone()],
                vec![zero.clone(), RingElem::laurent(&[(1, 1), (0, -3)])],
            ],
        )
        .unwrap();
        let ann = annihilator(&m).unwrap();
        // (x-2)(x-3) = x^2 - 5x + 6.
        assert_eq!(ann, Ideal::LaurentPoly(RingElem::laurent(&[(2, 1), (1, -5), (0, 6)])));
        // Single cyclic summand killed by a maximal ideal.
        let m = FpModule::cyclic(
            ring.clone(),
            &[RingElem::laurent(&[(0, 3)]), RingElem::laurent(&[(1, 1), (0, 1)])],
        )
        .unwrap();
        assert_eq!(annihilator(&m).unwrap(), Ideal::LaurentPF { p: 3, f: vec![1, 1] });
        // Principal part absorbed into a maximal part: x-2 = (x+1) - 3 lies
        // in (3, x+1), so the intersection is just (x-2).
        let m = FpModule::new(
            ring.clone(),
            2,
            vec![
                vec![RingElem::laurent(&[(1, 1), (0, -2)]), zero.clone()],
                vec![zero.clone(), RingElem::laurent(&[(0, 3)])],
                vec![zero.clone(), RingElem::laurent(&[(1, 1), (0, 1)])],
            ],
        )
        .unwrap();
        assert_eq!(
            annihilator(&m).unwrap(),
            Ideal::LaurentPoly(RingElem::laurent(&[(1, 1), (0, -2)]))
        );
        // Coupled relations rejected.
        let coupled = FpModule::new(
            RingSpec::LaurentZ,
            2,
            vec![vec![RingElem::laurent(&[(0, 2)]), RingElem::laurent(&[(0, 3)])]],
        )
        .unwrap();
        assert!(annihilator(&coupled).is_err());
    }

    #[test]
    fn annihilator_steinitz_pinned() {
        let ring = RingSpec::QuadOrder(-5);
        let p2 = crate::ring::quad_ideal_span(
            &ring,
            &[RingElem::from_int(&ring, 2), RingElem::quad(1, 1)],
        );
        // Torsion R/P2 + R/P2^2: annihilator P2^2 = (2).
        let s = SteinitzModule {
            ring: ring.clone(),
            torsion: vec![(p2.clone(), 1), (p2.clone(), 2)],
            rank: 0,
            ideal: Ideal::unit(&ring),
        };
        assert_eq!(annihilator_steinitz(&s).unwrap(), ideal_power(&ring, &p2, 2).unwrap());
        // Any projective part: zero.
        let s = SteinitzModule {
            ring: ring.clone(),
            torsion: vec![(p2, 1)],
            rank: 1,
            ideal: Ideal::unit(&ring),
        };
        assert_eq!(annihilator_steinitz(&s).unwrap(), Ideal::Zero);
    }

    #[test]
    fn truncated_annihilator_pinned() {
        let cfg = EngineConfig::default();
        // Z/6: probes up to 12 surviving are the multiples of 6.
        let m = zz_module(&[6]);
        let got = truncated_profinite_annihilator(&m, 6, 0, 12, &cfg).unwrap();
        let want: Vec<RingElem> =
            [-12, -6, 0, 6, 12].iter().map(|&v| RingElem::from_int(&RingSpec::ZZ, v)).collect();
        let got_set: HashSet<_> = got.into_iter().collect();
        assert_eq!(got_set, want.into_iter().collect());
        // Conjugacy module of x-2: survivors are the probe multiples of x-2.
        let m = laurent_cyclic(&[(1, 1), (0, -2)]);
        let got = truncated_profinite_annihilator(&m, 50, 1, 5, &cfg).unwrap();
        let mut want: HashSet<RingElem> = HashSet::new();
        want.insert(RingElem::laurent(&[])); // zero
        for a in [-2i64, -1, 1, 2] {
            want.insert(RingElem::laurent(&[(1, a), (0, -2 * a)]));
        }
        assert_eq!(got.into_iter().collect::<HashSet<_>>(), want);
        // Free Laurent module: only zero survives.
        let m = FpModule::free(RingSpec::LaurentZ, 1);
        let got = truncated_profinite_annihilator(&m, 10, 1, 3, &cfg).unwrap();
        assert_eq!(got, vec![RingElem::laurent(&[])]);
    }

    #[test]
    fn mu_local_pinned() {
        let m = zz_module(&[6, 4]);
        assert_eq!(mu_local(&m, &Ideal::int(2)).unwrap(), 2);
        assert_eq!(mu_local(&m, &Ideal::int(3)).unwrap(), 1);
        assert_eq!(mu_local(&m, &Ideal::int(5)).unwrap(), 0);
        let m = laurent_cyclic(&[(1, 1), (0, -2)]);
        let at2 = Ideal::LaurentPF { p: 5, f: vec![3, 1] }; // x - 2 mod 5
        let at3 = Ideal::LaurentPF { p: 5, f: vec![2, 1] }; // x - 3 mod 5
        assert_eq!(mu_local(&m, &at2).unwrap(), 1);
        assert_eq!(mu_local(&m, &at3).unwrap(), 0);
        let free = FpModule::free(RingSpec::LaurentZ, 3);
        assert_eq!(mu_local(&free, &at2).unwrap(), 3);
        // Non-maximal ideal rejected.
        assert!(mu_local(&zz_module(&[6]), &Ideal::int(6)).is_err());
    }

    #[test]
    fn fitting_pinned() {
        let free = FpModule::free(RingSpec::LaurentZ, 1);
        assert_eq!(fitting_ideal(&free, 0).unwrap(), FittingIdeal::Zero);
        assert_eq!(fitting_ideal(&free, 1).unwrap(), FittingIdeal::Unit);
        let m = laurent_cyclic(&[(1, 1), (0, -2)]);
        assert_eq!(
            fitting_ideal(&m, 0).unwrap(),
            FittingIdeal::Minors(vec![RingElem::laurent(&[(1, 1), (0, -2)])])
        );
        assert_eq!(fitting_ideal(&m, 1).unwrap(), FittingIdeal::Unit);
        let m = zz_module(&[6, 4]);
        assert_eq!(
            fitting_ideal(&m, 0).unwrap(),
            FittingIdeal::Minors(vec![RingElem::Int(BigInt::from(24))])
        );
        let got = fitting_ideal(&m, 1).unwrap();
        let want: HashSet<RingElem> =
            [4, 6].iter().map(|&v| RingElem::Int(BigInt::from(v))).collect();
        match got {
            FittingIdeal::Minors(ms) => assert_eq!(ms.into_iter().collect::<HashSet<_>>(), want),
            other => panic!("expected minors, got {other:?}"),
        }
        assert_eq!(fitting_ideal(&m, 2).unwrap(), FittingIdeal::Unit);
    }

    #[test]
    fn projectivity_pinned() {
        // Free modules certify at any bound.
        let free2 = FpModule::free(RingSpec::LaurentZ, 2);
        assert_eq!(
            projectivity_verdict(&free2, 30).unwrap(),
            ProjectivityVerdict::ProjectiveOfRank { rank: 2, certified_up_to_norm: 30 }
        );
        // Torsion Laurent module: generic rank 0, caught by a localization.
        let m = laurent_cyclic(&[(1, 1), (0, -2)]);
        assert!(matches!(
            projectivity_verdict(&m, 30).unwrap(),
            ProjectivityVerdict::NotProjective { .. }
        ));
        // Mixed integer module: caught by mu at 2.
        let ring = RingSpec::ZZ;
        let m = FpModule::new(
            ring.clone(),
            2,
            vec![vec![RingElem::from_int(&ring, 6), RingElem::from_int(&ring, 0)]],
        )
        .unwrap();
        assert!(matches!(
            projectivity_verdict(&m, 10).unwrap(),
            ProjectivityVerdict::NotProjective { .. }
        ));
        // Lambda + nonprincipal ideal over QuadOrder(-5): projective rank 2
        // through the presentation route.
        let ring = RingSpec::QuadOrder(-5);
        let p2 = crate::ring::quad_ideal_span(
            &ring,
            &[RingElem::from_int(&ring, 2), RingElem::quad(1, 1)],
        );
        let s = SteinitzModule {
            ring: ring.clone(),
            torsion: vec![],
            rank: 2,
            ideal: p2,
        };
        let m = steinitz_to_presentation(&s).unwrap();
        assert_eq!(
            projectivity_verdict(&m, 20).unwrap(),
            ProjectivityVerdict::ProjectiveOfRank { rank: 2, certified_up_to_norm: 20 }
        );
        assert_eq!(
            projectivity_steinitz(&s, 20),
            ProjectivityVerdict::ProjectiveOfRank { rank: 2, certified_up_to_norm: 20 }
        );
    }

    #[test]
    fn generic_ranks() {
        assert_eq!(generic_rank(&FpModule::free(RingSpec::ZZ, 3)).unwrap(), 3);
        assert_eq!(generic_rank(&zz_module(&[6, 4])).unwrap(), 0);
        assert_eq!(generic_rank(&laurent_cyclic(&[(1, 1), (0, -2)])).unwrap(), 0);
        assert_eq!(generic_rank(&FpModule::free(RingSpec::LaurentZ, 2)).unwrap(), 2);
        // Laurent relation with a negative exponent.
        let m = laurent_cyclic(&[(-1, 2), (0, -3)]);
        assert_eq!(generic_rank(&m).unwrap(), 0);
    }

    #[test]
    fn report_shape() {
        let m = zz_module(&[6]);
        let r = invariant_report(&m, 10).unwrap();
        assert_eq!(r.mu_table.len(), 4); // ideals (2), (3), (5), (7)
        assert!(matches!(r.annihilator, AnnihilatorValue::Ideal(Ideal::Int(ref d)) if *d == BigInt::from(6)));
        assert!(matches!(r.projectivity, ProjectivityVerdict::NotProjective { .. }));
    }
}
