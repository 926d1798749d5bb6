//! Finite modules presented as abelian groups Z/d_1 + ... + Z/d_k (ascending
//! divisibility chain) with an optional action matrix for the distinguished
//! ring generator (w for quadratic orders, x for the Laurent ring).
//!
//! The canonical code of a finite module is a string that two finite modules
//! share exactly when they are isomorphic as modules. Group structure is
//! canonical already (invariant factors); the action matrix is canonicalized
//! per primary component: rational canonical form over F_p for elementary
//! components, a minimum over cyclic generators for cyclic components, and a
//! lexicographic minimum over the automorphism-group orbit as the fallback.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Euclid, One, Signed, Zero};

use crate::arith::{factorize, unit_group_generators};
use crate::error::{Error, Result};
use crate::fq::{pf_trim, PolyFp};
use crate::matrix::{
    hnf_cols, hnf_solve_mat, kernel_basis, lat_contains, lat_span, smith_decompose, solve_integer,
    Mat,
};
use crate::ring::{Ideal, RingElem, RingSpec};

pub fn ring_has_action(ring: &RingSpec) -> bool {
    matches!(ring, RingSpec::QuadOrder(_) | RingSpec::LaurentZ)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteModule {
    pub ring: RingSpec,
    /// Invariant factors, ascending divisibility chain, all >= 2. Empty = zero module.
    pub factors: Vec<i64>,
    /// k x k matrix, column j = image of generator j. Present iff the ring
    /// has a designated generator.
    pub action: Option<Vec<Vec<i64>>>,
}

impl FiniteModule {
    pub fn new(
        ring: RingSpec,
        factors: Vec<i64>,
        action: Option<Vec<Vec<i64>>>,
    ) -> Result<FiniteModule> {
        ring.validate()?;
        let k = factors.len();
        for (i, &d) in factors.iter().enumerate() {
            if d < 2 {
                return Err(Error::invalid(format!("invariant factor {d} must be >= 2")));
            }
            if i + 1 < k && factors[i + 1] % d != 0 {
                return Err(Error::invalid("factors must form a divisibility chain".to_string()));
            }
        }
        if let Some(s) = ring.inverted_primes() {
            for &d in &factors {
                for &p in s {
                    if d % p as i64 == 0 {
                        return Err(Error::invalid(format!(
                            "factor {d} is divisible by the inverted prime {p}"
                        )));
                    }
                }
            }
        }
        match (&action, ring_has_action(&ring)) {
            (None, false) => {}
            (Some(w), true) => {
                if w.len() != k || w.iter().any(|row| row.len() != k) {
                    return Err(Error::invalid("action matrix must be k x k".to_string()));
                }
                for (i, row) in w.iter().enumerate() {
                    for (j, &e) in row.iter().enumerate() {
                        if e < 0 || e >= factors[i] {
                            return Err(Error::invalid(format!(
                                "action entry {e} out of range [0, {})",
                                factors[i]
                            )));
                        }
                        // Column j must be killed by d_j.
                        if (e as i128 * factors[j] as i128) % factors[i] as i128 != 0 {
                            return Err(Error::invalid(
                                "action matrix does not define a homomorphism".to_string(),
                            ));
                        }
                    }
                }
            }
            (None, true) if k == 0 => {
                // Normalize: zero module over an action ring carries the empty matrix.
                return Ok(FiniteModule { ring, factors, action: Some(vec![]) });
            }
            _ => {
                return Err(Error::invalid(
                    "action must be present exactly for quadratic and Laurent rings".to_string(),
                ));
            }
        }
        let m = FiniteModule { ring, factors, action };
        m.check_ring_relations()?;
        Ok(m)
    }

    fn check_ring_relations(&self) -> Result<()> {
        let Some(w) = &self.action else { return Ok(()) };
        let k = self.factors.len();
        match &self.ring {
            RingSpec::LaurentZ => {
                // x acts invertibly: for each prime p dividing the order, the
                // induced map on G/pG (rows and columns with p | d_i) must be
                // invertible over F_p.
                let top = *self.factors.last().unwrap_or(&1);
                for (p, _) in factorize(top as u64) {
                    let idx: Vec<usize> =
                        (0..k).filter(|&i| self.factors[i] % p as i64 == 0).collect();
                    let field = crate::fq::Fq::prime_field(p)?;
                    let mut m = crate::fq::FqMat::zero(&field, idx.len(), idx.len());
                    for (a, &i) in idx.iter().enumerate() {
                        for (b, &j) in idx.iter().enumerate() {
                            m.set(a, b, field.from_int(w[i][j]));
                        }
                    }
                    if crate::fq::fq_rank(&field, &m) != idx.len() {
                        return Err(Error::invalid(format!(
                            "x-action is not invertible at the prime {p}"
                        )));
                    }
                }
            }
            RingSpec::QuadOrder(_) => {
                // w^2 = t*w - nn row-wise mod d_i.
                let t = self.ring.omega_trace() as i128;
                let nn = self.ring.omega_norm() as i128;
                for i in 0..k {
                    for j in 0..k {
                        let mut sq: i128 = 0;
                        for (l, row) in w.iter().enumerate() {
                            sq += w[i][l] as i128 * row[j] as i128;
                        }
                        let lin = t * w[i][j] as i128 - if i == j { nn } else { 0 };
                        if (sq - lin).rem_euclid(self.factors[i] as i128) != 0 {
                            return Err(Error::invalid(
                                "action does not satisfy the quadratic relation".to_string(),
                            ));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn zero(ring: &RingSpec) -> FiniteModule {
        let action = if ring_has_action(ring) { Some(vec![]) } else { None };
        FiniteModule { ring: ring.clone(), factors: vec![], action }
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn order(&self) -> BigInt {
        self.factors.iter().map(|&d| BigInt::from(d)).product()
    }

    pub fn is_zero_module(&self) -> bool {
        self.factors.is_empty()
    }

    /// Order as u64 when it fits.
    pub fn order_u64(&self) -> Result<u64> {
        (&self.order())
            .try_into()
            .map_err(|_| Error::resource("module order exceeds u64".to_string()))
    }

    pub fn add_elems(&self, a: &[i64], b: &[i64]) -> Vec<i64> {
        (0..self.k()).map(|i| (a[i] + b[i]).rem_euclid(self.factors[i])).collect()
    }

    pub fn apply_action(&self, v: &[i64]) -> Vec<i64> {
        let w = self.action.as_ref().expect("apply_action without an action");
        apply_matrix_mod(w, v, &self.factors)
    }

    /// All elements, coordinate 0 varying fastest. Guarded.
    pub fn elements(&self) -> Result<Vec<Vec<i64>>> {
        let order = self.order_u64()?;
        if order > 1 << 20 {
            return Err(Error::resource(format!("element enumeration of order {order}")));
        }
        let k = self.k();
        let mut out = Vec::with_capacity(order as usize);
        let mut cur = vec![0i64; k];
        loop {
            out.push(cur.clone());
            let mut i = 0;
            loop {
                if i == k {
                    return Ok(out);
                }
                cur[i] += 1;
                if cur[i] < self.factors[i] {
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }

    pub fn element_order(&self, v: &[i64]) -> i64 {
        let mut ord: i64 = 1;
        for i in 0..self.k() {
            let d = self.factors[i];
            let o = d / num_integer::gcd(d, v[i].rem_euclid(d));
            ord = num_integer::lcm(ord, o);
        }
        ord
    }

    /// Lattice diag(d_1..d_k), the zero subgroup.
    pub fn diag_lattice(&self) -> Mat {
        let k = self.k();
        let mut m = Mat::zero(k, k);
        for i in 0..k {
            m.set(i, i, BigInt::from(self.factors[i]));
        }
        m
    }

    pub fn action_mat(&self) -> Option<Mat> {
        self.action.as_ref().map(|w| small_to_mat(w))
    }

    /// Hermite form of the subgroup generated by the given elements, closed
    /// under the action when one is present. Columns span a full-rank lattice
    /// diag <= L <= Z^k.
    pub fn subgroup_span(&self, vecs: &[Vec<i64>]) -> Mat {
        let k = self.k();
        let mut cols: Vec<Vec<BigInt>> =
            vecs.iter().map(|v| v.iter().map(|&x| BigInt::from(x)).collect()).collect();
        for j in 0..k {
            let mut c = vec![BigInt::zero(); k];
            c[j] = BigInt::from(self.factors[j]);
            cols.push(c);
        }
        let mut h = lat_span(k, &cols);
        if let Some(a) = self.action_mat() {
            loop {
                let img = a.mul(&h);
                let h2 = hnf_cols(&h.hstack(&img));
                if h2 == h {
                    break;
                }
                h = h2;
            }
        }
        h
    }

    /// Size of the subgroup L/diag for a full-rank Hermite form L.
    pub fn subgroup_size(&self, h: &Mat) -> BigInt {
        let idx: BigInt = (0..h.rows).map(|i| h.at(i, i).clone()).product();
        self.order() / idx
    }
}

pub fn small_to_mat(w: &[Vec<i64>]) -> Mat {
    Mat::from_i64_rows(&w.to_vec())
}

pub fn apply_matrix_mod(w: &[Vec<i64>], v: &[i64], factors: &[i64]) -> Vec<i64> {
    let k = factors.len();
    (0..k)
        .map(|i| {
            let mut acc: i128 = 0;
            for j in 0..k {
                acc += w[i][j] as i128 * v[j] as i128;
            }
            acc.rem_euclid(factors[i] as i128) as i64
        })
        .collect()
}

/// Multiply two action matrices, reducing row i mod factors[i].
pub fn mul_matrix_mod(a: &[Vec<i64>], b: &[Vec<i64>], factors: &[i64]) -> Vec<Vec<i64>> {
    let k = factors.len();
    let mut out = vec![vec![0i64; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut acc: i128 = 0;
            for (l, brow) in b.iter().enumerate() {
                acc += a[i][l] as i128 * brow[j] as i128;
            }
            out[i][j] = acc.rem_euclid(factors[i] as i128) as i64;
        }
    }
    out
}

/// Inverse of an action matrix modulo the factor chain, if the map is bijective.
pub fn matrix_inverse_mod(w: &[Vec<i64>], factors: &[i64]) -> Option<Vec<Vec<i64>>> {
    let k = factors.len();
    let wm = small_to_mat(w);
    let mut diag = Mat::zero(k, k);
    for i in 0..k {
        diag.set(i, i, BigInt::from(factors[i]));
    }
    let stacked = wm.hstack(&diag);
    let mut out = vec![vec![0i64; k]; k];
    for j in 0..k {
        let mut e = vec![BigInt::zero(); k];
        e[j] = BigInt::one();
        let sol = solve_integer(&stacked, &e)?;
        for i in 0..k {
            let v = sol[i].mod_floor(&BigInt::from(factors[i]));
            out[i][j] = (&v).try_into().ok()?;
        }
    }
    Some(out)
}

/// A finite quotient Z^n / L together with the coordinate transform.
pub struct LatticeQuotient {
    pub module: FiniteModule,
    u: Mat,
    kept: Vec<usize>,
    factors_big: Vec<BigInt>,
}

impl LatticeQuotient {
    /// Image of an ambient vector in the quotient's coordinates.
    pub fn map_vec(&self, v: &[BigInt]) -> Vec<i64> {
        let y = self.u.mul_vec(v);
        self.kept
            .iter()
            .enumerate()
            .map(|(t, &i)| {
                let r = y[i].mod_floor(&self.factors_big[t]);
                (&r).try_into().expect("reduced coordinate fits i64")
            })
            .collect()
    }
}

/// Quotient Z^n / span(lat) as a finite module; `lat` must span a full-rank
/// sublattice. `action` is the ambient matrix of the ring generator and must
/// stabilize the lattice.
pub fn quotient_from_lattice(
    ring: &RingSpec,
    n: usize,
    lat: &Mat,
    action: Option<&Mat>,
) -> Result<LatticeQuotient> {
    let h = hnf_cols(lat);
    if h.cols != n {
        return Err(Error::invalid(
            "lattice is not full rank; the quotient is infinite".to_string(),
        ));
    }
    let s = smith_decompose(&h);
    let mut kept = Vec::new();
    let mut factors = Vec::new();
    let mut factors_big = Vec::new();
    for i in 0..n {
        let mut d = s.d.at(i, i).clone();
        assert!(d.is_positive(), "full-rank lattice with zero diagonal");
        // Over a localized ring the inverted primes are units, so their
        // contribution to a quotient collapses.
        if let Some(set) = ring.inverted_primes() {
            for &p in set {
                let pb = BigInt::from(p);
                while (&d % &pb).is_zero() {
                    d /= &pb;
                }
            }
        }
        if !d.is_one() {
            let di: i64 = (&d)
                .try_into()
                .map_err(|_| Error::resource("quotient factor exceeds i64".to_string()))?;
            kept.push(i);
            factors.push(di);
            factors_big.push(d.clone());
        }
    }
    let action_small = match action {
        None => None,
        Some(a) => {
            debug_assert!(
                (0..h.cols).all(|j| lat_contains(&h, &a.mul_vec(&h.col(j)))),
                "action does not stabilize the lattice"
            );
            let b = s.u.mul(a).mul(&s.u_inv);
            let mut w = vec![vec![0i64; kept.len()]; kept.len()];
            for (ti, &i) in kept.iter().enumerate() {
                for (tj, &j) in kept.iter().enumerate() {
                    let v = b.at(i, j).mod_floor(&factors_big[ti]);
                    w[ti][tj] = (&v)
                        .try_into()
                        .map_err(|_| Error::resource("action entry exceeds i64".to_string()))?;
                }
            }
            Some(w)
        }
    };
    let module = FiniteModule::new(ring.clone(), factors, action_small)?;
    Ok(LatticeQuotient { module, u: s.u, kept, factors_big })
}

/// Direct sum, renormalized to an invariant factor chain.
pub fn direct_sum(a: &FiniteModule, b: &FiniteModule) -> Result<FiniteModule> {
    if a.ring != b.ring {
        return Err(Error::invalid("direct sum across different rings".to_string()));
    }
    let stacked: Vec<i64> = a.factors.iter().chain(b.factors.iter()).copied().collect();
    let action = match (&a.action, &b.action) {
        (None, None) => None,
        (Some(wa), Some(wb)) => {
            let (ka, kb) = (a.k(), b.k());
            let mut w = vec![vec![0i64; ka + kb]; ka + kb];
            for i in 0..ka {
                w[i][..ka].copy_from_slice(&wa[i]);
            }
            for i in 0..kb {
                w[ka + i][ka..].copy_from_slice(&wb[i]);
            }
            Some(w)
        }
        _ => return Err(Error::invalid("mismatched action presence".to_string())),
    };
    normalize_module(&a.ring, &stacked, action.as_deref())
}

/// Renormalize (factors, action) with factors any positive integers into a
/// proper invariant-factor chain via the Smith form of the diagonal lattice.
pub fn normalize_module(
    ring: &RingSpec,
    factors: &[i64],
    action: Option<&[Vec<i64>]>,
) -> Result<FiniteModule> {
    let n = factors.len();
    let mut diag = Mat::zero(n, n);
    for (i, &d) in factors.iter().enumerate() {
        if d < 1 {
            return Err(Error::invalid("factors must be positive".to_string()));
        }
        diag.set(i, i, BigInt::from(d));
    }
    let amat = action.map(small_to_mat);
    Ok(quotient_from_lattice(ring, n, &diag, amat.as_ref())?.module)
}

// ---------------------------------------------------------------------------
// Canonical codes
// ---------------------------------------------------------------------------

/// Canonical code string; equal codes exactly characterize isomorphism.
pub fn canonical_code(m: &FiniteModule, ceiling: u64) -> Result<String> {
    let order = m.order();
    if order > BigInt::from(ceiling) {
        return Err(Error::CeilingExceeded {
            bound: (&order).try_into().unwrap_or(u64::MAX),
            ceiling,
        });
    }
    if m.factors.is_empty() {
        return Ok("()".to_string());
    }
    let Some(_) = &m.action else {
        let list: Vec<String> = m.factors.iter().map(|d| d.to_string()).collect();
        return Ok(format!("({})", list.join(",")));
    };
    // Split into p-parts, canonicalize each, reassemble deterministically.
    let order_u: u64 = (&order).try_into().unwrap();
    let mut parts: Vec<(Vec<i64>, Vec<Vec<i64>>)> = Vec::new();
    for (p, _) in factorize(order_u) {
        let (pf, pw) = extract_stable_part(m, &p_part_lattice(m, p))?;
        let sub = canonical_p_part(p, &pf, &pw)?;
        parts.push(sub);
    }
    let mut all_factors: Vec<i64> = Vec::new();
    let mut blocks: Vec<Vec<Vec<i64>>> = Vec::new();
    for (f, w) in parts {
        all_factors.extend_from_slice(&f);
        blocks.push(w);
    }
    let total: usize = all_factors.len();
    let mut w = vec![vec![0i64; total]; total];
    let mut off = 0;
    for b in blocks {
        for (i, row) in b.iter().enumerate() {
            w[off + i][off..off + row.len()].copy_from_slice(row);
        }
        off += b.len();
    }
    let normalized = normalize_module(&m.ring, &all_factors, Some(&w))?;
    Ok(render_code(&normalized))
}

fn render_code(m: &FiniteModule) -> String {
    let list: Vec<String> = m.factors.iter().map(|d| d.to_string()).collect();
    match &m.action {
        None => format!("({})", list.join(",")),
        Some(w) => {
            let sym = match m.ring {
                RingSpec::QuadOrder(_) => "w",
                RingSpec::LaurentZ => "u",
                _ => unreachable!("action on a ring without a generator"),
            };
            let rows: Vec<String> = w
                .iter()
                .map(|row| {
                    let es: Vec<String> = row.iter().map(|e| e.to_string()).collect();
                    format!("[{}]", es.join(","))
                })
                .collect();
            format!("({}|{}=[{}])", list.join(","), sym, rows.join(","))
        }
    }
}

/// Lattice of the p-primary subgroup: spanned by (d_i / p^{v_p(d_i)}) e_i.
fn p_part_lattice(m: &FiniteModule, p: u64) -> Mat {
    let k = m.k();
    let mut l = Mat::zero(k, k);
    for i in 0..k {
        let mut c = m.factors[i];
        while c % p as i64 == 0 {
            c /= p as i64;
        }
        l.set(i, i, BigInt::from(c));
    }
    l
}

/// An action-stable subgroup of a finite module, reconstituted as a module
/// in its own right, with the map from ambient coordinates.
pub struct SubgroupModule {
    pub module: FiniteModule,
    basis: Mat,
    lq: LatticeQuotient,
}

impl SubgroupModule {
    /// Coordinates in the subgroup module of an ambient element that lies in
    /// the subgroup.
    pub fn coords(&self, ambient: &[i64]) -> Vec<i64> {
        let v: Vec<BigInt> = ambient.iter().map(|&x| BigInt::from(x)).collect();
        let z = crate::matrix::hnf_solve(&self.basis, &v)
            .expect("element lies in the subgroup lattice");
        self.lq.map_vec(&z)
    }
}

/// Present an action-stable subgroup (a full-rank Hermite lattice containing
/// the diagonal) as a standalone finite module.
pub fn subgroup_module(m: &FiniteModule, sub: &Mat) -> Result<SubgroupModule> {
    let k = m.k();
    let b = hnf_cols(sub);
    assert_eq!(b.cols, k, "subgroup lattice must be full rank");
    let x = hnf_solve_mat(&b, &m.diag_lattice()).expect("diag inside subgroup lattice");
    let y = match m.action_mat() {
        Some(a) => Some(
            hnf_solve_mat(&b, &a.mul(&b))
                .ok_or_else(|| Error::invalid("subgroup not action-stable".to_string()))?,
        ),
        None => None,
    };
    let lq = quotient_from_lattice(&m.ring, k, &x, y.as_ref())?;
    Ok(SubgroupModule { module: lq.module.clone(), basis: b, lq })
}

/// Extract an action-stable subgroup as a bare (factors, action) pair.
fn extract_stable_part(m: &FiniteModule, sub: &Mat) -> Result<(Vec<i64>, Vec<Vec<i64>>)> {
    let s = subgroup_module(m, sub)?;
    let w = s.module.action.clone().unwrap_or_default();
    Ok((s.module.factors.clone(), w))
}

/// Canonicalize one p-part (factors all powers of p, with action). Splits
/// further along the irreducible factors of the characteristic polynomial.
fn canonical_p_part(
    p: u64,
    factors: &[i64],
    w: &[Vec<i64>],
) -> Result<(Vec<i64>, Vec<Vec<i64>>)> {
    if factors.is_empty() {
        return Ok((vec![], vec![]));
    }
    let cp = charpoly_mod_p(w, p);
    let irr = pf_factor_monic(&cp, p)?;
    let mut pieces: Vec<(PolyFp, Vec<i64>, Vec<Vec<i64>>)> = Vec::new();
    if irr.len() == 1 {
        pieces.push((irr[0].0.clone(), factors.to_vec(), w.to_vec()));
    } else {
        let helper = part_module_for(p, factors, w)?;
        for (f, _) in &irr {
            let kf = stable_kernel_of_poly(&helper, f, p);
            let (pf, pw) = extract_stable_part(&helper, &kf)?;
            pieces.push((f.clone(), pf, pw));
        }
        let total: BigInt = pieces.iter().flat_map(|(_, f, _)| f.iter()).map(|&d| BigInt::from(d)).product();
        assert_eq!(total, helper.order(), "primary decomposition lost elements");
    }
    pieces.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
    let mut out_f: Vec<i64> = Vec::new();
    let mut blocks: Vec<Vec<Vec<i64>>> = Vec::new();
    for (_, pf, pw) in pieces {
        let (cf, cw) = canonical_primary_piece(p, &pf, &pw)?;
        out_f.extend_from_slice(&cf);
        blocks.push(cw);
    }
    let total = out_f.len();
    let mut bw = vec![vec![0i64; total]; total];
    let mut off = 0;
    for b in blocks {
        for (i, row) in b.iter().enumerate() {
            bw[off + i][off..off + row.len()].copy_from_slice(row);
        }
        off += b.len();
    }
    Ok((out_f, bw))
}

/// Wrap a (factors, action) pair as a LaurentZ-style module for the stable
/// subgroup machinery. Ring relations are not checked here: this is internal
/// scaffolding, so bypass validation with a Laurent shell only when the
/// matrix is invertible, else fall back to a quad shell trick is not
/// possible; instead we construct directly.
fn part_module_for(_p: u64, factors: &[i64], w: &[Vec<i64>]) -> Result<FiniteModule> {
    Ok(FiniteModule {
        ring: RingSpec::LaurentZ,
        factors: factors.to_vec(),
        action: Some(w.to_vec()),
    })
}

/// Lattice of { v : f(W)^N v = 0 } for N large enough to capture the full
/// f-primary component (kernels iterated to stability).
fn stable_kernel_of_poly(m: &FiniteModule, f: &PolyFp, p: u64) -> Mat {
    let k = m.k();
    let w = m.action.as_ref().unwrap();
    // f(W) mod the factor chain, with coefficients lifted from [0, p).
    let mut fw = vec![vec![0i64; k]; k];
    let mut power: Vec<Vec<i64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1 } else { 0 }).collect())
        .collect();
    for (deg, &c) in f.iter().enumerate() {
        if c != 0 {
            for i in 0..k {
                for j in 0..k {
                    fw[i][j] = (fw[i][j] as i128 + c as i128 * power[i][j] as i128)
                        .rem_euclid(m.factors[i] as i128) as i64;
                }
            }
        }
        if deg + 1 < f.len() {
            power = mul_matrix_mod(w, &power, &m.factors);
        }
    }
    let _ = p;
    // Iterate preimages: K_{t+1} = { v : f(W) v in K_t }, starting at the
    // zero subgroup (the diagonal lattice).
    let fw_mat = small_to_mat(&fw);
    let mut kcur = m.diag_lattice();
    loop {
        let stacked = fw_mat.hstack(&kcur.scale(&BigInt::from(-1)));
        let ker = kernel_basis(&stacked);
        let mut cols: Vec<Vec<BigInt>> = Vec::new();
        for j in 0..ker.cols {
            cols.push((0..k).map(|i| ker.at(i, j).clone()).collect());
        }
        for j in 0..k {
            cols.push(m.diag_lattice().col(j));
        }
        let knext = lat_span(k, &cols);
        if knext == kcur {
            return kcur;
        }
        kcur = knext;
    }
}

/// Canonicalize a single f-primary piece of a p-part.
fn canonical_primary_piece(
    p: u64,
    factors: &[i64],
    w: &[Vec<i64>],
) -> Result<(Vec<i64>, Vec<Vec<i64>>)> {
    if factors.is_empty() {
        return Ok((vec![], vec![]));
    }
    if factors.iter().all(|&d| d == p as i64) {
        return Ok(rcf_canonical(p, factors.len(), w));
    }
    if let Some(res) = cyclic_canonical(factors, w)? {
        return Ok(res);
    }
    orbit_canonical(p, factors, w)
}

// --- rational canonical form over F_p (elementary abelian parts) ---

fn rcf_canonical(p: u64, m: usize, w: &[Vec<i64>]) -> (Vec<i64>, Vec<Vec<i64>>) {
    // Invariant factor polynomials of xI - W over F_p[x].
    let mut pm: Vec<Vec<PolyFp>> = vec![vec![vec![]; m]; m];
    for i in 0..m {
        for j in 0..m {
            let c = (w[i][j] as u64) % p;
            let mut e: PolyFp = vec![(p - c % p) % p];
            if i == j {
                e.push(1); // x on the diagonal
            } else if e[0] == 0 {
                e.clear();
            }
            pm[i][j] = e;
        }
    }
    let invariants = polymat_snf_diag(pm, p);
    let mut factors = Vec::new();
    let mut blocks: Vec<Vec<Vec<i64>>> = Vec::new();
    for f in invariants {
        let deg = f.len() - 1;
        if deg == 0 {
            continue;
        }
        // Companion block of the monic polynomial f.
        let mut b = vec![vec![0i64; deg]; deg];
        for i in 0..deg.saturating_sub(1) {
            b[i + 1][i] = 1;
        }
        for i in 0..deg {
            b[i][deg - 1] = ((p - f[i] % p) % p) as i64;
        }
        for _ in 0..deg {
            factors.push(p as i64);
        }
        blocks.push(b);
    }
    let total = factors.len();
    let mut bw = vec![vec![0i64; total]; total];
    let mut off = 0;
    for b in blocks {
        for (i, row) in b.iter().enumerate() {
            bw[off + i][off..off + row.len()].copy_from_slice(row);
        }
        off += b.len();
    }
    (factors, bw)
}

/// Diagonal of the Smith form of a polynomial matrix over F_p[x]; returns the
/// monic invariant factors (units dropped, chain order).
fn polymat_snf_diag(mut a: Vec<Vec<PolyFp>>, p: u64) -> Vec<PolyFp> {
    use crate::fq::{pf_mul, pf_rem, pf_scale, pf_sub};
    let rows = a.len();
    let cols = if rows > 0 { a[0].len() } else { 0 };
    let deg = |f: &PolyFp| -> usize { f.len() };
    let mut t = 0usize;
    while t < rows && t < cols {
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !a[i][j].is_empty()
                    && pivot.is_none_or(|(pi, pj)| deg(&a[i][j]) < deg(&a[pi][pj]))
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        'reduce: loop {
            for i in t + 1..rows {
                if a[i][t].is_empty() {
                    continue;
                }
                // a[i][t] = q * a[t][t] + r
                let (q, r) = pf_divmod(&a[i][t], &a[t][t], p);
                for j in t..cols {
                    let sub = pf_mul(&q, &a[t][j], p);
                    a[i][j] = pf_sub(&a[i][j], &sub, p);
                }
                debug_assert_eq!(a[i][t], r);
                if !a[i][t].is_empty() {
                    a.swap(t, i);
                    continue 'reduce;
                }
            }
            for j in t + 1..cols {
                if a[t][j].is_empty() {
                    continue;
                }
                let (q, r) = pf_divmod(&a[t][j], &a[t][t], p);
                for row in a.iter_mut().skip(t) {
                    let sub = pf_mul(&q, &row[t], p);
                    row[j] = pf_sub(&row[j], &sub, p);
                }
                debug_assert_eq!(a[t][j], r);
                if !a[t][j].is_empty() {
                    for row in a.iter_mut() {
                        row.swap(t, j);
                    }
                    continue 'reduce;
                }
            }
            // Divisibility fixup.
            let mut fixed = true;
            'find: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !pf_rem(&a[i][j], &a[t][t], p).is_empty() {
                        for jj in t..cols {
                            let add = a[i][jj].clone();
                            a[t][jj] = crate::fq::pf_add(&a[t][jj], &add, p);
                        }
                        fixed = false;
                        break 'find;
                    }
                }
            }
            if fixed {
                break;
            }
        }
        // Monic pivot.
        let lead = *a[t][t].last().unwrap();
        let inv = crate::arith::invmod(lead, p).unwrap();
        a[t][t] = pf_scale(&a[t][t], inv, p);
        t += 1;
    }
    (0..t).map(|i| a[i][i].clone()).collect()
}

fn pf_divmod(a: &PolyFp, b: &PolyFp, p: u64) -> (PolyFp, PolyFp) {
    use crate::fq::pf_trim as trim;
    assert!(!b.is_empty());
    let mut r = a.clone();
    trim(&mut r);
    let db = b.len() - 1;
    let lead_inv = crate::arith::invmod(*b.last().unwrap(), p).unwrap();
    let mut q: PolyFp = vec![];
    while r.len() > db {
        let c = (*r.last().unwrap() as u128 * lead_inv as u128 % p as u128) as u64;
        let shift = r.len() - 1 - db;
        if q.len() < shift + 1 {
            q.resize(shift + 1, 0);
        }
        q[shift] = (q[shift] + c) % p;
        for (i, &bi) in b.iter().enumerate() {
            let sub = (c as u128 * bi as u128 % p as u128) as u64;
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        trim(&mut r);
        if r.len() <= db {
            break;
        }
    }
    trim(&mut q);
    (q, r)
}

// --- cyclic canonical form (minimum over cyclic generators) ---

/// If the part is cyclic over Z[W], return the canonical (factors, action):
/// the minimum over cyclic generators v of the quotient presentation
/// Z[x] -> G, g -> g(W) v. Returns None when no single generator suffices.
fn cyclic_canonical(factors: &[i64], w: &[Vec<i64>]) -> Result<Option<(Vec<i64>, Vec<Vec<i64>>)>> {
    let shell = FiniteModule {
        ring: RingSpec::LaurentZ,
        factors: factors.to_vec(),
        action: Some(w.to_vec()),
    };
    let order = shell.order();
    if order > BigInt::from(1u64 << 16) {
        return Ok(None);
    }
    let elements = shell.elements()?;
    let mut best: Option<(Vec<i64>, Vec<Vec<i64>>)> = None;
    let mut found_generator = false;
    for v in &elements {
        // Z[W]-span of v.
        let mut orbit_vecs = vec![v.clone()];
        for _ in 0..64 {
            let next = shell.apply_action(orbit_vecs.last().unwrap());
            if orbit_vecs.contains(&next) {
                break;
            }
            orbit_vecs.push(next);
        }
        let span = shell.subgroup_span(&orbit_vecs);
        if shell.subgroup_size(&span) != order {
            continue;
        }
        found_generator = true;
        let cand = cyclic_presentation(&shell, v)?;
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
    }
    if !found_generator {
        return Ok(None);
    }
    Ok(best)
}

/// Canonical presentation of the cyclic module Z[W]v: ambient Z^r with basis
/// the images of 1, x, ..., x^{r-1}, relation lattice the coefficient vectors
/// that vanish on (v, Wv, ..., W^{r-1}v).
fn cyclic_presentation(
    shell: &FiniteModule,
    v: &[i64],
) -> Result<(Vec<i64>, Vec<Vec<i64>>)> {
    let k = shell.k();
    // u_i = W^i v until u_r lies in the group span of the earlier ones.
    let mut us: Vec<Vec<i64>> = vec![v.to_vec()];
    let r = loop {
        let prev_span = {
            let mut cols: Vec<Vec<BigInt>> =
                us.iter().map(|u| u.iter().map(|&x| BigInt::from(x)).collect()).collect();
            for j in 0..k {
                let mut c = vec![BigInt::zero(); k];
                c[j] = BigInt::from(shell.factors[j]);
                cols.push(c);
            }
            lat_span(k, &cols)
        };
        let next = shell.apply_action(us.last().unwrap());
        let nb: Vec<BigInt> = next.iter().map(|&x| BigInt::from(x)).collect();
        if lat_contains(&prev_span, &nb) {
            break us.len();
        }
        us.push(next);
        if us.len() > 64 {
            return Err(Error::resource("cyclic presentation did not close".to_string()));
        }
    };
    // Relation lattice L = { c in Z^r : sum c_i u_i = 0 in the group }.
    let umat = Mat::from_cols(
        k,
        &us.iter()
            .map(|u| u.iter().map(|&x| BigInt::from(x)).collect::<Vec<BigInt>>())
            .collect::<Vec<_>>(),
    );
    let stacked = umat.hstack(&shell.diag_lattice().scale(&BigInt::from(-1)));
    let ker = kernel_basis(&stacked);
    let mut cols = Vec::new();
    for j in 0..ker.cols {
        cols.push((0..r).map(|i| ker.at(i, j).clone()).collect::<Vec<BigInt>>());
    }
    let l = lat_span(r, &cols);
    assert_eq!(l.cols, r, "relation lattice of a finite cyclic module is full rank");
    // x-action on Z^r/L: e_i -> e_{i+1}; e_{r-1} -> a with U a = u_r (mod diag),
    // reduced canonically mod L.
    let next = shell.apply_action(us.last().unwrap());
    let nb: Vec<BigInt> = next.iter().map(|&x| BigInt::from(x)).collect();
    let sol = solve_integer(&umat.hstack(&shell.diag_lattice()), &nb)
        .expect("u_r lies in the span by construction");
    let mut a_col: Vec<BigInt> = sol[..r].to_vec();
    // Reduce a_col into the fundamental domain of L (forward reduction).
    for col in 0..l.cols {
        let pivot_row = (0..l.rows).find(|&i| !l.at(i, col).is_zero()).unwrap();
        let q = a_col[pivot_row].div_euclid(l.at(pivot_row, col));
        if !q.is_zero() {
            for i in 0..r {
                let sub = &q * l.at(i, col);
                a_col[i] -= sub;
            }
        }
    }
    let mut x_action = Mat::zero(r, r);
    for i in 0..r.saturating_sub(1) {
        x_action.set(i + 1, i, BigInt::one());
    }
    for i in 0..r {
        x_action.set(i, r - 1, a_col[i].clone());
    }
    let q = quotient_from_lattice(&shell.ring, r, &l, Some(&x_action))?;
    let w = q.module.action.clone().unwrap_or_default();
    Ok((q.module.factors.clone(), w))
}

// --- orbit minimization fallback (mixed, non-cyclic parts) ---

const ORBIT_CAP: usize = 400_000;

fn orbit_canonical(
    p: u64,
    factors: &[i64],
    w: &[Vec<i64>],
) -> Result<(Vec<i64>, Vec<Vec<i64>>)> {
    let m = factors.len();
    let exps: Vec<u32> = factors.iter().map(|&d| crate::arith::valuation(d as u64, p)).collect();
    // Generators of Aut(G) for G = + Z/p^{e_i}: elementary maps
    // e_j -> e_j + p^{(e_i - e_j)+} e_i and diagonal unit scalings.
    let mut gens: Vec<(Vec<Vec<i64>>, Vec<Vec<i64>>)> = Vec::new();
    let ident: Vec<Vec<i64>> =
        (0..m).map(|i| (0..m).map(|j| i64::from(i == j)).collect()).collect();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let c = (p as i64).pow(exps[i].saturating_sub(exps[j]));
            let mut a = ident.clone();
            a[i][j] = c;
            let mut ainv = ident.clone();
            ainv[i][j] = -c;
            gens.push((a.clone(), ainv.clone()));
            gens.push((ainv, a));
        }
    }
    for i in 0..m {
        for (s, sinv) in unit_group_generators(p, exps[i])? {
            let mut a = ident.clone();
            a[i][i] = s as i64;
            let mut ainv = ident.clone();
            ainv[i][i] = sinv as i64;
            gens.push((a, ainv));
        }
    }
    let reduce = |mat: &[Vec<i64>]| -> Vec<i64> {
        let mut flat = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                flat.push(mat[i][j].rem_euclid(factors[i]));
            }
        }
        flat
    };
    let unflatten = |flat: &[i64]| -> Vec<Vec<i64>> {
        (0..m).map(|i| flat[i * m..(i + 1) * m].to_vec()).collect()
    };
    let start = reduce(w);
    let mut best = start.clone();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(start.clone());
    let mut queue: VecDeque<Vec<i64>> = VecDeque::new();
    queue.push_back(start);
    while let Some(cur) = queue.pop_front() {
        let cur_mat = unflatten(&cur);
        for (a, ainv) in &gens {
            let conj = mul_matrix_mod(&mul_matrix_mod(a, &cur_mat, factors), ainv, factors);
            let key = reduce(&conj);
            if seen.contains(&key) {
                continue;
            }
            if seen.len() >= ORBIT_CAP {
                return Err(Error::resource(format!(
                    "action orbit exceeded {ORBIT_CAP} states during canonicalization"
                )));
            }
            if key < best {
                best = key.clone();
            }
            seen.insert(key.clone());
            queue.push_back(key);
        }
    }
    Ok((factors.to_vec(), unflatten(&best)))
}

/// Characteristic polynomial of the action mod p (monic, ascending coeffs).
fn charpoly_mod_p(w: &[Vec<i64>], p: u64) -> PolyFp {
    let m = w.len();
    // det(xI - W) over Z by cofactor expansion with memoization on column sets.
    fn poly_mul_z(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
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
    fn poly_add_z(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); a.len().max(b.len())];
        for (i, o) in out.iter_mut().enumerate() {
            let x = a.get(i).cloned().unwrap_or_else(BigInt::zero);
            let y = b.get(i).cloned().unwrap_or_else(BigInt::zero);
            *o = x + y;
        }
        out
    }
    fn minor_det(
        w: &[Vec<i64>],
        row: usize,
        cols: u32,
        memo: &mut HashMap<(usize, u32), Vec<BigInt>>,
    ) -> Vec<BigInt> {
        let m = w.len();
        if row == m {
            return vec![BigInt::one()];
        }
        if let Some(v) = memo.get(&(row, cols)) {
            return v.clone();
        }
        let mut acc: Vec<BigInt> = vec![];
        let mut sign = 1i64;
        for (pos, j) in (0..m).filter(|j| cols & (1 << j) != 0).enumerate() {
            let _ = pos;
            // Entry (row, j) of xI - W.
            let entry: Vec<BigInt> = if row == j {
                vec![BigInt::from(-w[row][j]), BigInt::one()]
            } else {
                vec![BigInt::from(-w[row][j])]
            };
            let sub = minor_det(w, row + 1, cols & !(1 << j), memo);
            let term = poly_mul_z(&entry, &sub);
            let signed: Vec<BigInt> =
                term.iter().map(|c| if sign > 0 { c.clone() } else { -c }).collect();
            acc = poly_add_z(&acc, &signed);
            sign = -sign;
        }
        memo.insert((row, cols), acc.clone());
        acc
    }
    let mut memo = HashMap::new();
    let det = minor_det(w, 0, (1u32 << m) - 1, &mut memo);
    let pb = BigInt::from(p);
    let mut out: PolyFp = det
        .iter()
        .map(|c| {
            let r: u64 = (&c.mod_floor(&pb)).try_into().unwrap();
            r
        })
        .collect();
    pf_trim(&mut out);
    out
}

/// Factor a monic polynomial over F_p by trial division with ascending degree.
fn pf_factor_monic(f: &PolyFp, p: u64) -> Result<Vec<(PolyFp, u32)>> {
    use crate::fq::pf_rem;
    let mut g = f.clone();
    pf_trim(&mut g);
    assert_eq!(g.last(), Some(&1), "factoring expects a monic polynomial");
    let mut out: Vec<(PolyFp, u32)> = Vec::new();
    let mut d = 1usize;
    while 2 * d <= g.len() - 1 {
        let count = (p as u128).pow(d as u32);
        if count > 1 << 20 {
            return Err(Error::resource("polynomial factoring range too large".to_string()));
        }
        for idx in 0..count as u64 {
            let mut h: PolyFp = Vec::with_capacity(d + 1);
            let mut rem = idx;
            for _ in 0..d {
                h.push(rem % p);
                rem /= p;
            }
            h.push(1);
            if g.len() - 1 < d {
                break;
            }
            let mut mult = 0u32;
            while pf_rem(&g, &h, p).is_empty() {
                let (q, _) = pf_divmod(&g, &h, p);
                g = q;
                mult += 1;
            }
            if mult > 0 {
                out.push((h, mult));
            }
        }
        d += 1;
    }
    if g.len() > 1 {
        out.push((g, 1));
    }
    out.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Ideal action helpers
// ---------------------------------------------------------------------------

/// Matrix of a ring element acting on the module.
pub fn elem_action_matrix(m: &FiniteModule, elem: &RingElem) -> Result<Vec<Vec<i64>>> {
    let k = m.k();
    let ident: Vec<Vec<i64>> =
        (0..k).map(|i| (0..k).map(|j| i64::from(i == j)).collect()).collect();
    let scal = |n: &BigInt| -> Result<Vec<Vec<i64>>> {
        let mut out = vec![vec![0i64; k]; k];
        for i in 0..k {
            let v = n.mod_floor(&BigInt::from(m.factors[i]));
            out[i][i] = (&v)
                .try_into()
                .map_err(|_| Error::resource("scalar exceeds i64".to_string()))?;
        }
        Ok(out)
    };
    match elem {
        RingElem::Int(n) => scal(n),
        RingElem::Quad(x, y) => {
            let w = m
                .action
                .as_ref()
                .ok_or_else(|| Error::invalid("quad element on module without action".to_string()))?;
            let mut out = scal(x)?;
            for i in 0..k {
                for j in 0..k {
                    let add = y.clone() * w[i][j];
                    let v = (BigInt::from(out[i][j]) + add).mod_floor(&BigInt::from(m.factors[i]));
                    out[i][j] = (&v).try_into().unwrap();
                }
            }
            Ok(out)
        }
        RingElem::Laurent(terms) => {
            let w = m
                .action
                .as_ref()
                .ok_or_else(|| Error::invalid("Laurent element on module without action".to_string()))?;
            let winv = matrix_inverse_mod(w, &m.factors)
                .ok_or_else(|| Error::invalid("x-action is not invertible".to_string()))?;
            let mut out = vec![vec![0i64; k]; k];
            for (e, c) in terms {
                let base = if *e >= 0 { w } else { &winv };
                let mut powm = ident.clone();
                for _ in 0..e.unsigned_abs() {
                    powm = mul_matrix_mod(base, &powm, &m.factors);
                }
                for i in 0..k {
                    for j in 0..k {
                        let add = c.clone() * powm[i][j];
                        let v = (BigInt::from(out[i][j]) + add)
                            .mod_floor(&BigInt::from(m.factors[i]));
                        out[i][j] = (&v).try_into().unwrap();
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Matrices of a set of ideal generators acting on the module.
pub fn ideal_action_matrices(m: &FiniteModule, ideal: &Ideal) -> Result<Vec<Vec<Vec<i64>>>> {
    let gens = crate::ring::ideal_generators(&m.ring, ideal)?;
    gens.iter().map(|g| elem_action_matrix(m, g)).collect()
}

/// Lattice of the subgroup I*G (image of the ideal acting on the module).
pub fn ideal_image_lattice(m: &FiniteModule, ideal: &Ideal) -> Result<Mat> {
    let mats = ideal_action_matrices(m, ideal)?;
    let k = m.k();
    let mut cols: Vec<Vec<i64>> = Vec::new();
    for mat in &mats {
        for j in 0..k {
            cols.push((0..k).map(|i| mat[i][j]).collect());
        }
    }
    Ok(m.subgroup_span(&cols))
}

/// Minimal generator count at a maximal ideal: |G / I G| = q^mu.
pub fn mu_at(m: &FiniteModule, ideal: &Ideal) -> Result<u32> {
    let img = ideal_image_lattice(m, ideal)?;
    let quotient_size = {
        let idx: BigInt = (0..img.rows).map(|i| img.at(i, i).clone()).product();
        idx
    };
    let q = ideal.norm()?;
    let mut mu = 0u32;
    let mut acc = BigInt::one();
    while acc < quotient_size {
        acc *= &q;
        mu += 1;
    }
    if acc != quotient_size {
        return Err(Error::invalid(
            "quotient by a maximal ideal is not a residue-field power".to_string(),
        ));
    }
    Ok(mu)
}

/// Is the module I-primary (killed by a power of the ideal)?
pub fn ideal_primary(m: &FiniteModule, ideal: &Ideal) -> Result<bool> {
    let mats = ideal_action_matrices(m, ideal)?;
    let k = m.k();
    // Iterate I^t G until stable; primary iff the stable value is zero.
    let mut cur: Mat = {
        let mut cols = Vec::new();
        for j in 0..k {
            let mut c = vec![0i64; k];
            c[j] = 1;
            cols.push(c);
        }
        m.subgroup_span(&cols)
    };
    loop {
        let mut cols: Vec<Vec<i64>> = Vec::new();
        for mat in &mats {
            let mm = small_to_mat(mat);
            let img = mm.mul(&cur);
            for j in 0..img.cols {
                let col: Vec<i64> = (0..k)
                    .map(|i| {
                        let v = img.at(i, j).mod_floor(&BigInt::from(m.factors[i]));
                        (&v).try_into().unwrap()
                    })
                    .collect();
                cols.push(col);
            }
        }
        let next = m.subgroup_span(&cols);
        if next == cur {
            return Ok(m.subgroup_size(&cur).is_one());
        }
        cur = next;
    }
}

// ---------------------------------------------------------------------------
// Explicit isomorphism search (exhaustive oracle)
// ---------------------------------------------------------------------------

/// Exhaustive search for a module isomorphism; the slow oracle used to
/// validate canonical codes. Guarded to modest orders.
pub fn explicit_isomorphism_exists(a: &FiniteModule, b: &FiniteModule) -> Result<bool> {
    if a.ring != b.ring {
        return Err(Error::invalid("isomorphism search across rings".to_string()));
    }
    if a.factors != b.factors {
        return Ok(false);
    }
    if a.order() > BigInt::from(4096u64) {
        return Err(Error::resource("isomorphism search beyond order 4096".to_string()));
    }
    if a.factors.is_empty() {
        return Ok(true);
    }
    if a.action.is_none() {
        return Ok(true); // equal invariant factors suffice without an action
    }
    let elements = b.elements()?;
    // Backtrack over images of the generators; the image of e_1..e_j must
    // span a subgroup of size d_1 * ... * d_j, and the full map must commute
    // with the actions.
    let mut images: Vec<Vec<i64>> = Vec::new();
    fn backtrack(
        a: &FiniteModule,
        b: &FiniteModule,
        elements: &[Vec<i64>],
        images: &mut Vec<Vec<i64>>,
    ) -> bool {
        let j = images.len();
        if j == a.k() {
            return commutes(a, b, images);
        }
        let needed: BigInt = a.factors[..=j].iter().map(|&d| BigInt::from(d)).product();
        for cand in elements {
            if b.element_order(cand) != a.factors[j] {
                continue;
            }
            images.push(cand.clone());
            let span = b.subgroup_span(
                &images.iter().cloned().collect::<Vec<_>>(),
            );
            // Group span only: strip action closure by spanning directly.
            let span = {
                let cols: Vec<Vec<BigInt>> = images
                    .iter()
                    .map(|v| v.iter().map(|&x| BigInt::from(x)).collect())
                    .chain((0..b.k()).map(|t| {
                        let mut c = vec![BigInt::zero(); b.k()];
                        c[t] = BigInt::from(b.factors[t]);
                        c
                    }))
                    .collect();
                let _ = span;
                lat_span(b.k(), &cols)
            };
            if b.subgroup_size(&span) == needed && backtrack(a, b, elements, images) {
                return true;
            }
            images.pop();
        }
        false
    }
    fn commutes(a: &FiniteModule, b: &FiniteModule, images: &[Vec<i64>]) -> bool {
        let (wa, wb) = (a.action.as_ref().unwrap(), b.action.as_ref().unwrap());
        for j in 0..a.k() {
            // phi(W_a e_j) = sum_i (W_a)_{ij} images[i]  must equal  W_b images[j].
            let mut lhs = vec![0i64; b.k()];
            for (i, img) in images.iter().enumerate() {
                for (t, l) in lhs.iter_mut().enumerate() {
                    *l = (*l as i128 + wa[i][j] as i128 * img[t] as i128)
                        .rem_euclid(b.factors[t] as i128) as i64;
                }
            }
            let rhs = apply_matrix_mod(wb, &images[j], &b.factors);
            if lhs != rhs {
                return false;
            }
        }
        true
    }
    Ok(backtrack(a, b, &elements, &mut images))
}
