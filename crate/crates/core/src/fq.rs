//! Finite fields F_{p^d} presented as F_p[x]/(f) for a monic irreducible f,
//! plus the polynomial-over-F_p helpers and the exact linear algebra over
//! these fields used by rank and nullspace computations.

use crate::arith::{invmod, is_prime_u64};
use crate::error::{Error, Result};

/// Coefficients ascending, reduced mod p, no trailing zeros.
pub type PolyFp = Vec<u64>;

pub fn pf_trim(v: &mut PolyFp) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

pub fn pf_deg(v: &PolyFp) -> Option<usize> {
    if v.is_empty() { None } else { Some(v.len() - 1) }
}

pub fn pf_add(a: &PolyFp, b: &PolyFp, p: u64) -> PolyFp {
    let mut out = vec![0u64; a.len().max(b.len())];
    for (i, o) in out.iter_mut().enumerate() {
        let x = a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0);
        *o = x % p;
    }
    pf_trim(&mut out);
    out
}

pub fn pf_neg(a: &PolyFp, p: u64) -> PolyFp {
    let mut out: PolyFp = a.iter().map(|&x| (p - x % p) % p).collect();
    pf_trim(&mut out);
    out
}

pub fn pf_sub(a: &PolyFp, b: &PolyFp, p: u64) -> PolyFp {
    pf_add(a, &pf_neg(b, p), p)
}

pub fn pf_scale(a: &PolyFp, c: u64, p: u64) -> PolyFp {
    let mut out: PolyFp = a.iter().map(|&x| (x as u128 * c as u128 % p as u128) as u64).collect();
    pf_trim(&mut out);
    out
}

pub fn pf_mul(a: &PolyFp, b: &PolyFp, p: u64) -> PolyFp {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = ((out[i + j] as u128 + x as u128 * y as u128) % p as u128) as u64;
        }
    }
    pf_trim(&mut out);
    out
}

/// Remainder of `a` modulo `f` (any nonzero f; leading coefficient inverted mod p).
pub fn pf_rem(a: &PolyFp, f: &PolyFp, p: u64) -> PolyFp {
    assert!(!f.is_empty(), "division by zero polynomial");
    let mut r = a.clone();
    pf_trim(&mut r);
    let df = f.len() - 1;
    let lead_inv = invmod(*f.last().unwrap(), p).expect("leading coeff invertible");
    while r.len() > df {
        let c = (*r.last().unwrap() as u128 * lead_inv as u128 % p as u128) as u64;
        let shift = r.len() - 1 - df;
        for (i, &fi) in f.iter().enumerate() {
            let sub = (c as u128 * fi as u128 % p as u128) as u64;
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        pf_trim(&mut r);
        if r.len() <= df {
            break;
        }
    }
    r
}

/// Monic gcd of two polynomials over F_p.
pub fn pf_gcd(a: &PolyFp, b: &PolyFp, p: u64) -> PolyFp {
    let (mut a, mut b) = (a.clone(), b.clone());
    pf_trim(&mut a);
    pf_trim(&mut b);
    while !b.is_empty() {
        let r = pf_rem(&a, &b, p);
        a = b;
        b = r;
    }
    if let Some(&lead) = a.last() {
        let inv = invmod(lead, p).unwrap();
        a = pf_scale(&a, inv, p);
    }
    a
}

/// `base^e mod f` over F_p.
pub fn pf_powmod(base: &PolyFp, mut e: u64, f: &PolyFp, p: u64) -> PolyFp {
    let mut acc = pf_rem(&[1].to_vec(), f, p);
    let mut b = pf_rem(base, f, p);
    while e > 0 {
        if e & 1 == 1 {
            acc = pf_rem(&pf_mul(&acc, &b, p), f, p);
        }
        b = pf_rem(&pf_mul(&b, &b, p), f, p);
        e >>= 1;
    }
    acc
}

/// Irreducibility of a monic polynomial over F_p: x^{p^d} = x mod f, and
/// x^{p^{d/l}} - x is coprime to f for every prime l dividing d.
pub fn pf_is_irreducible(f: &PolyFp, p: u64) -> bool {
    let Some(d) = pf_deg(f) else { return false };
    if d == 0 {
        return false;
    }
    if d == 1 {
        return true;
    }
    let x: PolyFp = vec![0, 1];
    let q = (p as u128).checked_pow(d as u32);
    let Some(q) = q else { return false };
    if q > u64::MAX as u128 {
        return false;
    }
    let xq = pf_powmod(&x, q as u64, f, p);
    if pf_sub(&xq, &pf_rem(&x, f, p), p) != Vec::<u64>::new() {
        return false;
    }
    for (l, _) in crate::arith::factorize(d as u64) {
        let e = (p as u128).pow((d as u64 / l) as u32) as u64;
        let xe = pf_powmod(&x, e, f, p);
        let g = pf_gcd(&pf_sub(&xe, &x, p), f, p);
        if pf_deg(&g) != Some(0) {
            return false;
        }
    }
    true
}

/// A finite field F_{p^d} = F_p[x]/(modulus), modulus monic irreducible.
/// d = 1 uses modulus x so that elements are single coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fq {
    pub p: u64,
    pub modulus: PolyFp,
}

/// Field elements: coefficient vectors of length `deg`, entries in [0, p).
pub type FqElem = Vec<u64>;

impl Fq {
    pub fn prime_field(p: u64) -> Result<Fq> {
        if !is_prime_u64(p) {
            return Err(Error::invalid(format!("{p} is not prime")));
        }
        Ok(Fq { p, modulus: vec![0, 1] })
    }

    pub fn extension(p: u64, modulus: PolyFp) -> Result<Fq> {
        if !is_prime_u64(p) {
            return Err(Error::invalid(format!("{p} is not prime")));
        }
        let mut m: PolyFp = modulus.iter().map(|&c| c % p).collect();
        pf_trim(&mut m);
        if m.last() != Some(&1) {
            return Err(Error::invalid("extension modulus must be monic".to_string()));
        }
        if m.len() >= 3 && !pf_is_irreducible(&m, p) {
            return Err(Error::invalid("extension modulus must be irreducible".to_string()));
        }
        Ok(Fq { p, modulus: m })
    }

    pub fn deg(&self) -> usize {
        self.modulus.len() - 1
    }

    /// Field size p^deg.
    pub fn size(&self) -> u64 {
        self.p.pow(self.deg() as u32)
    }

    pub fn zero(&self) -> FqElem {
        vec![0; self.deg()]
    }

    pub fn one(&self) -> FqElem {
        let mut e = self.zero();
        e[0] = 1 % self.p;
        e
    }

    pub fn from_int(&self, n: i64) -> FqElem {
        let mut e = self.zero();
        e[0] = n.rem_euclid(self.p as i64) as u64;
        e
    }

    /// Pack a reduced polynomial into a fixed-width element.
    fn pad(&self, mut v: PolyFp) -> FqElem {
        v.resize(self.deg(), 0);
        v
    }

    pub fn from_poly(&self, v: &PolyFp) -> FqElem {
        let r: PolyFp = v.iter().map(|&c| c % self.p).collect();
        self.pad(pf_rem(&r, &self.modulus, self.p))
    }

    pub fn is_zero(&self, a: &FqElem) -> bool {
        a.iter().all(|&x| x == 0)
    }

    pub fn add(&self, a: &FqElem, b: &FqElem) -> FqElem {
        (0..self.deg()).map(|i| (a[i] + b[i]) % self.p).collect()
    }

    pub fn sub(&self, a: &FqElem, b: &FqElem) -> FqElem {
        (0..self.deg()).map(|i| (a[i] + self.p - b[i]) % self.p).collect()
    }

    pub fn neg(&self, a: &FqElem) -> FqElem {
        (0..self.deg()).map(|i| (self.p - a[i] % self.p) % self.p).collect()
    }

    pub fn mul(&self, a: &FqElem, b: &FqElem) -> FqElem {
        self.pad(pf_rem(&pf_mul(a, b, self.p), &self.modulus, self.p))
    }

    pub fn inv(&self, a: &FqElem) -> Result<FqElem> {
        if self.is_zero(a) {
            return Err(Error::invalid("inverse of zero in finite field".to_string()));
        }
        // Extended Euclid in F_p[x]: s*a + t*modulus = gcd = unit.
        let p = self.p;
        let mut r0 = self.modulus.clone();
        let mut r1: PolyFp = a.clone();
        pf_trim(&mut r1);
        let mut s0: PolyFp = vec![];
        let mut s1: PolyFp = vec![1];
        while !r1.is_empty() {
            // r0 = q*r1 + r2
            let mut q: PolyFp = vec![];
            let mut r2 = r0.clone();
            let lead_inv = invmod(*r1.last().unwrap(), p).unwrap();
            while r2.len() >= r1.len() && !r2.is_empty() {
                let c = (*r2.last().unwrap() as u128 * lead_inv as u128 % p as u128) as u64;
                let shift = r2.len() - r1.len();
                if q.len() < shift + 1 {
                    q.resize(shift + 1, 0);
                }
                q[shift] = (q[shift] + c) % p;
                for (i, &fi) in r1.iter().enumerate() {
                    let sub = (c as u128 * fi as u128 % p as u128) as u64;
                    r2[shift + i] = (r2[shift + i] + p - sub) % p;
                }
                pf_trim(&mut r2);
            }
            let s2 = pf_sub(&s0, &pf_mul(&q, &s1, p), p);
            (r0, r1) = (r1, r2);
            (s0, s1) = (s1, s2);
        }
        // r0 is a nonzero constant gcd.
        assert_eq!(pf_deg(&r0), Some(0), "noninvertible element in a field");
        let c_inv = invmod(r0[0], p).unwrap();
        Ok(self.pad(pf_scale(&s0, c_inv, p)))
    }

    pub fn pow(&self, a: &FqElem, mut e: u64) -> FqElem {
        let mut acc = self.one();
        let mut b = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &b);
            }
            b = self.mul(&b, &b);
            e >>= 1;
        }
        acc
    }

    /// All field elements in lexicographic coefficient order.
    pub fn elements(&self) -> Vec<FqElem> {
        let d = self.deg();
        let mut out = Vec::with_capacity(self.size() as usize);
        let mut cur = self.zero();
        loop {
            out.push(cur.clone());
            let mut i = 0;
            loop {
                if i == d {
                    return out;
                }
                cur[i] += 1;
                if cur[i] < self.p {
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }
}

/// Dense matrix over a fixed Fq, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FqMat {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<FqElem>,
}

impl FqMat {
    pub fn zero(field: &Fq, rows: usize, cols: usize) -> Self {
        FqMat { rows, cols, a: vec![field.zero(); rows * cols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &FqElem {
        &self.a[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: FqElem) {
        self.a[i * self.cols + j] = v;
    }
}

/// Row echelon reduction; returns (rank, pivot column indices).
/// The matrix is reduced in place to reduced row echelon form.
pub fn fq_rref(field: &Fq, m: &mut FqMat) -> (usize, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0usize;
    for c in 0..m.cols {
        let Some(pr) = (r..m.rows).find(|&i| !field.is_zero(m.at(i, c))) else { continue };
        for j in 0..m.cols {
            let tmp = m.at(r, j).clone();
            m.set(r, j, m.at(pr, j).clone());
            m.set(pr, j, tmp);
        }
        let inv = field.inv(m.at(r, c)).unwrap();
        for j in 0..m.cols {
            let v = field.mul(m.at(r, j), &inv);
            m.set(r, j, v);
        }
        for i in 0..m.rows {
            if i != r && !field.is_zero(m.at(i, c)) {
                let f = m.at(i, c).clone();
                for j in 0..m.cols {
                    let v = field.sub(m.at(i, j), &field.mul(&f, m.at(r, j)));
                    m.set(i, j, v);
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.rows {
            break;
        }
    }
    (r, pivots)
}

pub fn fq_rank(field: &Fq, m: &FqMat) -> usize {
    let mut w = m.clone();
    fq_rref(field, &mut w).0
}

/// Basis of the right nullspace { x : m x = 0 }, one column vector per basis element.
pub fn fq_nullspace(field: &Fq, m: &FqMat) -> Vec<Vec<FqElem>> {
    let mut w = m.clone();
    let (_, pivots) = fq_rref(field, &mut w);
    let mut out = Vec::new();
    let pivot_of_col: Vec<Option<usize>> = {
        let mut v = vec![None; m.cols];
        for (r, &c) in pivots.iter().enumerate() {
            v[c] = Some(r);
        }
        v
    };
    for free in 0..m.cols {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut x = vec![field.zero(); m.cols];
        x[free] = field.one();
        for (c, pr) in pivot_of_col.iter().enumerate() {
            if let Some(r) = pr {
                x[c] = field.neg(w.at(*r, free));
            }
        }
        out.push(x);
    }
    out
}
