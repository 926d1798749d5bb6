//! Finite-stage structure at a maximal ideal: truncations M/I^k M with
//! their tower maps, product decompositions of finite-index ideals, and
//! unit inversion by Newton iteration.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::factorize;
use crate::error::{Error, Result};
use crate::fmod::{
    canonical_code, elem_action_matrix, quotient_from_lattice, small_to_mat, FiniteModule,
};
use crate::matrix::{hnf_cols, lat_contains_all, Mat};
use crate::module::{ambient_action, FpModule};
use crate::quotients::universe_at_level;
use crate::ring::{
    ideal_generators, ideal_power, quad_ideal_span, residue_field, residue_reduce_with, Ideal,
    RingElem, RingSpec,
};
use crate::EngineConfig;

// ---------------------------------------------------------------------------
// Truncations
// ---------------------------------------------------------------------------

/// The finite stage M/I^k M at a maximal ideal.
#[derive(Clone, Debug)]
pub struct AdicTruncation {
    pub ideal: Ideal,
    pub level: u32,
    pub quotient: FiniteModule,
}

pub fn adic_truncation(
    m: &FpModule,
    ideal: &Ideal,
    k: u32,
    cfg: &EngineConfig,
) -> Result<AdicTruncation> {
    if k == 0 {
        return Err(Error::invalid("truncation level must be positive".to_string()));
    }
    ideal.validate(&m.ring)?;
    residue_field(&m.ring, ideal)?; // rejects non-maximal ideals
    if m.gens == 0 {
        return Ok(AdicTruncation {
            ideal: ideal.clone(),
            level: k,
            quotient: FiniteModule::zero(&m.ring),
        });
    }
    let uni = universe_at_level(&m.ring, ideal, k, m.gens)?;
    let quotient = match &m.ring {
        RingSpec::ZZ | RingSpec::ZZLoc(_) | RingSpec::QuadOrder(_) => {
            let flat = m.flatten()?;
            debug_assert_eq!(flat.n, uni.n);
            let lat = flat.rels.hstack(&uni.base);
            quotient_from_lattice(&m.ring, uni.n, &lat, flat.action.as_ref())?.module
        }
        RingSpec::LaurentZ => {
            let dl = uni.n / m.gens;
            let act = uni.action.as_ref().expect("Laurent universes carry an action");
            let mut cols: Vec<Vec<BigInt>> = (0..uni.n).map(|j| uni.base.col(j)).collect();
            for col in &m.rels {
                let minexp = col
                    .iter()
                    .filter(|e| !e.is_zero())
                    .map(|e| *e.laurent_terms().keys().next().unwrap())
                    .min();
                let Some(minexp) = minexp else { continue };
                // A common power of x is a unit; shifting does not change
                // the submodule the relation generates in the quotient.
                let shift = if minexp < 0 { -minexp } else { 0 };
                let mut v = vec![BigInt::zero(); uni.n];
                for (j, e) in col.iter().enumerate() {
                    let e = e.laurent_shift(shift);
                    let mut cur = vec![BigInt::zero(); uni.n];
                    cur[j * dl] = BigInt::one();
                    let mut at = 0i64;
                    for (&t, c) in e.laurent_terms() {
                        while at < t {
                            cur = act.mul_vec(&cur);
                            at += 1;
                        }
                        for (vi, ci) in v.iter_mut().zip(&cur) {
                            *vi += c * ci;
                        }
                    }
                }
                // Close the relation under the generator action.
                let mut cur = v;
                for _ in 0..dl {
                    cols.push(cur.clone());
                    cur = act.mul_vec(&cur);
                }
            }
            let lat = Mat::from_cols(uni.n, &cols);
            quotient_from_lattice(&m.ring, uni.n, &lat, uni.action.as_ref())?.module
        }
    };
    if quotient.order() > BigInt::from(cfg.ceiling) {
        return Err(Error::resource(format!(
            "truncation order {} exceeds the ceiling {}",
            quotient.order(),
            cfg.ceiling
        )));
    }
    debug_assert!(
        ideal_power_generators(&m.ring, ideal, k)?
            .iter()
            .all(|g| crate::invariants::annihilates(&quotient, g).unwrap()),
        "truncation must be killed by the ideal power"
    );
    Ok(AdicTruncation { ideal: ideal.clone(), level: k, quotient })
}

/// Generators of I^k as ring elements, avoiding ideal powers for maximal
/// Laurent ideals (where p^{k-i} ftilde^i span the power directly).
fn ideal_power_generators(ring: &RingSpec, ideal: &Ideal, k: u32) -> Result<Vec<RingElem>> {
    match ideal {
        Ideal::LaurentPF { p, f } => {
            let lift: Vec<(i64, i64)> =
                f.iter().enumerate().map(|(e, &c)| (e as i64, c as i64)).collect();
            let ftilde = RingElem::laurent(&lift);
            let mut out = Vec::new();
            let mut fp = RingElem::laurent(&[(0, 1)]);
            for i in 0..=k {
                let scale = BigInt::from(*p).pow(k - i);
                out.push(fp.mul_int(&scale));
                fp = fp.mul(&ftilde, ring);
            }
            Ok(out)
        }
        _ => ideal_generators(ring, &ideal_power(ring, ideal, k)?),
    }
}

/// Lattice of I^k T inside a finite module T (own coordinates), including
/// the zero lattice.
pub fn ideal_power_image(
    t: &FiniteModule,
    ring: &RingSpec,
    ideal: &Ideal,
    k: u32,
) -> Result<Mat> {
    let n = t.k();
    let diag = t.diag_lattice();
    let gens = ideal_generators(ring, ideal)?;
    let gen_mats: Vec<Mat> = gens
        .iter()
        .map(|g| elem_action_matrix(t, g).map(|w| small_to_mat(&w)))
        .collect::<Result<_>>()?;
    let mut lat = Mat::identity(n);
    for _ in 0..k {
        let mut next = diag.clone();
        for g in &gen_mats {
            next = next.hstack(&g.mul(&lat));
        }
        lat = hnf_cols(&next);
    }
    Ok(lat)
}

/// Tower compatibility at one level: the natural surjection
/// M/I^{k+1}M -> M/I^k M exists and matches actions, checked as
/// (M/I^{k+1}M) / I^k(M/I^{k+1}M) being isomorphic to M/I^k M.
pub fn tower_check(m: &FpModule, ideal: &Ideal, k: u32, cfg: &EngineConfig) -> Result<bool> {
    let hi = adic_truncation(m, ideal, k + 1, cfg)?;
    let lo = adic_truncation(m, ideal, k, cfg)?;
    let lat = ideal_power_image(&hi.quotient, &m.ring, ideal, k)?;
    let act = hi.quotient.action_mat();
    let q = quotient_from_lattice(&m.ring, hi.quotient.k(), &lat, act.as_ref())?.module;
    Ok(canonical_code(&q, cfg.ceiling)? == canonical_code(&lo.quotient, cfg.ceiling)?)
}

/// Injectivity of multiplication by an element on a finite module, by
/// exhaustive enumeration.
pub fn multiplication_injective(t: &FiniteModule, elem: &RingElem) -> Result<bool> {
    let mat = elem_action_matrix(t, elem)?;
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    for v in t.elements()? {
        if !seen.insert(crate::fmod::apply_matrix_mod(&mat, &v, &t.factors)) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Product decomposition of finite-index ideals
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CrtDecomposition {
    pub modulus: Ideal,
    /// One factor R/P^e per maximal ideal P dividing the modulus.
    pub factors: Vec<AdicTruncation>,
    /// True when the product map was checked bijective element by element
    /// (total order within the ceiling).
    pub verified: bool,
}

pub fn crt_decompose(
    ring: &RingSpec,
    modulus: &Ideal,
    cfg: &EngineConfig,
) -> Result<CrtDecomposition> {
    modulus.validate(ring)?;
    let free = FpModule::free(ring.clone(), 1);
    match (ring, modulus) {
        (RingSpec::ZZ | RingSpec::ZZLoc(_), Ideal::Int(n)) => {
            if n.is_zero() {
                return Err(Error::invalid("the zero ideal has infinite index".to_string()));
            }
            let n: u64 = n
                .abs()
                .try_into()
                .map_err(|_| Error::resource("modulus exceeds u64".to_string()))?;
            let mut factors = Vec::new();
            for (p, a) in factorize(n) {
                factors.push(adic_truncation(&free, &Ideal::int(p as i64), a, cfg)?);
            }
            let verified = if n <= cfg.ceiling {
                verify_product_map_int(n, &factors)?;
                true
            } else {
                false
            };
            Ok(CrtDecomposition { modulus: modulus.clone(), factors, verified })
        }
        (RingSpec::QuadOrder(_), Ideal::Quad { a, b, c, den }) => {
            if !den.is_one() {
                return Err(Error::invalid(
                    "fractional ideals do not have finite quotient rings".to_string(),
                ));
            }
            let index = a * c;
            let index_u64: u64 = (&index)
                .try_into()
                .map_err(|_| Error::resource("modulus index exceeds u64".to_string()))?;
            let modulus_lat = quad_lattice(a, b, c);
            let mut factors = Vec::new();
            let mut norm_product = BigInt::one();
            for (p, _) in factorize(index_u64) {
                for prime in primes_above_quad(ring, p)? {
                    let e = quad_valuation(ring, &prime, &modulus_lat)?;
                    if e > 0 {
                        norm_product *= prime.norm()?.pow(e);
                        factors.push(adic_truncation(&free, &prime, e, cfg)?);
                    }
                }
            }
            if norm_product != index {
                return Err(Error::invalid(
                    "ideal does not factor into the supported maximal ideals".to_string(),
                ));
            }
            let verified = if index_u64 <= cfg.ceiling {
                verify_product_map_quad(ring, a, b, c, &factors)?;
                true
            } else {
                false
            };
            Ok(CrtDecomposition { modulus: modulus.clone(), factors, verified })
        }
        (RingSpec::LaurentZ, Ideal::LaurentPF { .. }) => {
            let factor = adic_truncation(&free, modulus, 1, cfg)?;
            Ok(CrtDecomposition {
                modulus: modulus.clone(),
                factors: vec![factor],
                verified: true,
            })
        }
        _ => Err(Error::unsupported(
            "finite-index decomposition needs a nonzero integer, integral quadratic, or maximal Laurent ideal"
                .to_string(),
        )),
    }
}

/// Exhaustive bijectivity of v -> (v mod p^a) on Z/n.
fn verify_product_map_int(n: u64, factors: &[AdicTruncation]) -> Result<()> {
    let orders: Vec<u64> =
        factors.iter().map(|f| f.quotient.order_u64()).collect::<Result<_>>()?;
    let total: u64 = orders.iter().product();
    if total != n {
        return Err(Error::invalid("factor orders do not multiply to the modulus".to_string()));
    }
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for v in 0..n {
        let image: Vec<u64> = orders.iter().map(|&m| v % m).collect();
        if !seen.insert(image) {
            return Err(Error::invalid("product map is not injective".to_string()));
        }
    }
    Ok(())
}

/// Exhaustive bijectivity of the reduction map R/I -> prod R/P^e for a
/// quadratic order, on the HNF coset representatives of I.
fn verify_product_map_quad(
    ring: &RingSpec,
    a: &BigInt,
    _b: &BigInt,
    c: &BigInt,
    factors: &[AdicTruncation],
) -> Result<()> {
    let act = ambient_action(ring, 1);
    let mut quotients = Vec::new();
    let mut total = BigInt::one();
    for f in factors {
        let pk = ideal_power(ring, &f.ideal, f.level)?;
        let (pa, pb, pc) = match &pk {
            Ideal::Quad { a, b, c, .. } => (a, b, c),
            _ => unreachable!("powers of quadratic ideals stay quadratic"),
        };
        let lq = quotient_from_lattice(ring, 2, &quad_lattice(pa, pb, pc), act.as_ref())?;
        total *= lq.module.order();
        quotients.push(lq);
    }
    if total != a * c {
        return Err(Error::invalid("factor orders do not multiply to the index".to_string()));
    }
    let (au, cu): (u64, u64) = ((a).try_into().unwrap(), (c).try_into().unwrap());
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    for u in 0..au {
        for v in 0..cu {
            let vec = vec![BigInt::from(u), BigInt::from(v)];
            let mut image = Vec::new();
            for lq in &quotients {
                image.extend(lq.map_vec(&vec));
            }
            if !seen.insert(image) {
                return Err(Error::invalid("product map is not injective".to_string()));
            }
        }
    }
    Ok(())
}

fn quad_lattice(a: &BigInt, b: &BigInt, c: &BigInt) -> Mat {
    let mut m = Mat::zero(2, 2);
    m.set(0, 0, a.clone());
    m.set(0, 1, b.clone());
    m.set(1, 1, c.clone());
    m
}

/// The maximal ideals above a rational prime in a quadratic order, from the
/// splitting of w's minimal polynomial mod p.
fn primes_above_quad(ring: &RingSpec, p: u64) -> Result<Vec<Ideal>> {
    let t = ring.omega_trace();
    let nn = ring.omega_norm();
    let pb = BigInt::from(p);
    let mut roots = Vec::new();
    for r in 0..p {
        let val = (BigInt::from(r) * BigInt::from(r) - t * BigInt::from(r) + nn).mod_floor(&pb);
        if val.is_zero() {
            roots.push(r);
        }
    }
    if roots.is_empty() {
        // Inert: (p) itself is maximal.
        return Ok(vec![quad_ideal_span(ring, &[RingElem::from_int(ring, p as i64)])]);
    }
    roots.sort_unstable();
    roots.dedup();
    Ok(roots
        .into_iter()
        .map(|r| {
            quad_ideal_span(
                ring,
                &[RingElem::from_int(ring, p as i64), RingElem::Quad(BigInt::from(-(r as i64)), BigInt::one())],
            )
        })
        .collect())
}

/// Largest e with the lattice contained in P^e.
fn quad_valuation(ring: &RingSpec, prime: &Ideal, lat: &Mat) -> Result<u32> {
    let mut e = 0u32;
    loop {
        let pk = ideal_power(ring, prime, e + 1)?;
        let (a, b, c) = match &pk {
            Ideal::Quad { a, b, c, .. } => (a, b, c),
            _ => unreachable!("powers of quadratic ideals stay quadratic"),
        };
        if lat_contains_all(&hnf_cols(&quad_lattice(a, b, c)), lat) {
            e += 1;
        } else {
            return Ok(e);
        }
    }
}

// ---------------------------------------------------------------------------
// Unit inversion
// ---------------------------------------------------------------------------

/// Inverse of a unit in R/I^k by Newton iteration z <- z(2 - ez), doubling
/// the valuation of 1 - ez each step. Non-units are rejected with their
/// residue-field image as the witness.
pub fn hensel_invert(
    ring: &RingSpec,
    ideal: &Ideal,
    k: u32,
    elem: &RingElem,
) -> Result<RingElem> {
    if k == 0 {
        return Err(Error::invalid("inversion level must be positive".to_string()));
    }
    ideal.validate(ring)?;
    if !elem.matches_ring(ring) {
        return Err(Error::invalid("element does not belong to the ring".to_string()));
    }
    let field = residue_field(ring, ideal)?;
    let residue = residue_reduce_with(&field, ring, ideal, elem);
    if field.is_zero(&residue) {
        return Err(Error::invalid(format!(
            "not a unit: residue-field image is 0 in the field of order {}",
            field.size()
        )));
    }
    let z0 = field.inv(&residue)?;
    match (ring, ideal) {
        (RingSpec::ZZ | RingSpec::ZZLoc(_), Ideal::Int(p)) => {
            let modulus = p.pow(k);
            let e = match elem {
                RingElem::Int(v) => v.clone(),
                _ => unreachable!("integer rings hold integer elements"),
            };
            let mut z = BigInt::from(z0[0]);
            for _ in 0..64 {
                if ((&e * &z).mod_floor(&modulus)).is_one() {
                    break;
                }
                z = (&z * (BigInt::from(2) - &e * &z)).mod_floor(&modulus);
            }
            if !((&e * &z).mod_floor(&modulus)).is_one() {
                return Err(Error::invalid("Newton iteration failed to converge".to_string()));
            }
            Ok(RingElem::Int(z))
        }
        (RingSpec::QuadOrder(_), Ideal::Quad { .. }) => {
            let pk = ideal_power(ring, ideal, k)?;
            let (a, b, c) = match &pk {
                Ideal::Quad { a, b, c, .. } => (a.clone(), b.clone(), c.clone()),
                _ => unreachable!("powers of quadratic ideals stay quadratic"),
            };
            // Canonical representative modulo the HNF lattice {a, b + c w}.
            let red = |e: &RingElem| -> RingElem {
                let (x, y) = match e {
                    RingElem::Quad(x, y) => (x.clone(), y.clone()),
                    _ => unreachable!("quadratic elements expected"),
                };
                let y1 = y.mod_floor(&c);
                let q = (&y - &y1).div_floor(&c);
                let x1 = (x - q * &b).mod_floor(&a);
                RingElem::Quad(x1, y1)
            };
            let mut z = red(&RingElem::Quad(BigInt::from(z0[0]), BigInt::from(*z0.get(1).unwrap_or(&0))));
            let one = red(&RingElem::from_int(ring, 1));
            let two = RingElem::from_int(ring, 2);
            for _ in 0..64 {
                if red(&elem.mul(&z, ring)) == one {
                    break;
                }
                z = red(&z.mul(&two.sub(&elem.mul(&z, ring)), ring));
            }
            if red(&elem.mul(&z, ring)) != one {
                return Err(Error::invalid("Newton iteration failed to converge".to_string()));
            }
            Ok(z)
        }
        (RingSpec::LaurentZ, Ideal::LaurentPF { .. }) => {
            let uni = universe_at_level(ring, ideal, k, 1)?;
            let n = uni.n;
            let base = hnf_cols(&uni.base);
            let comp = uni.action.expect("Laurent universes carry an action");
            // Forward reduction against the column HNF (zeros above each
            // pivot) gives canonical coordinates.
            let red = |mut v: Vec<BigInt>| -> Vec<BigInt> {
                for j in 0..n {
                    let q = v[j].div_floor(base.at(j, j));
                    if !q.is_zero() {
                        for i in j..n {
                            let w = &v[i] - &q * base.at(i, j);
                            v[i] = w;
                        }
                    }
                }
                v
            };
            // Ring multiplication u * v via the polynomial of u in the
            // generator action.
            let mul = |u: &[BigInt], v: &[BigInt]| -> Vec<BigInt> {
                let mut acc = vec![BigInt::zero(); n];
                let mut cur = v.to_vec();
                for ui in u {
                    for (ai, ci) in acc.iter_mut().zip(&cur) {
                        *ai += ui * ci;
                    }
                    cur = comp.mul_vec(&cur);
                }
                acc
            };
            // Clear negative exponents with a unit power of x.
            let minexp = elem.laurent_terms().keys().next().copied().unwrap_or(0);
            let shift = if minexp < 0 { -minexp } else { 0 };
            let shifted = elem.laurent_shift(shift);
            let mut g = vec![BigInt::zero(); n];
            {
                let mut cur = vec![BigInt::zero(); n];
                cur[0] = BigInt::one();
                let mut at = 0i64;
                for (&t, cf) in shifted.laurent_terms() {
                    while at < t {
                        cur = comp.mul_vec(&cur);
                        at += 1;
                    }
                    for (gi, ci) in g.iter_mut().zip(&cur) {
                        *gi += cf * ci;
                    }
                }
                g = red(g);
            }
            let mut one = vec![BigInt::zero(); n];
            one[0] = BigInt::one();
            let one = red(one);
            // Seed with the residue inverse of the shifted element (the
            // Newton target), not of elem itself.
            let seed = field.inv(&residue_reduce_with(&field, ring, ideal, &shifted))?;
            let mut z = vec![BigInt::zero(); n];
            for (i, &cf) in seed.iter().enumerate() {
                z[i] = BigInt::from(cf);
            }
            for _ in 0..64 {
                if red(mul(&g, &z)) == one {
                    break;
                }
                let mut t = mul(&g, &z);
                for (i, ti) in t.iter_mut().enumerate() {
                    let w = if i == 0 { BigInt::from(2) - &*ti } else { -&*ti };
                    *ti = w;
                }
                z = red(mul(&z, &t));
            }
            if red(mul(&g, &z)) != one {
                return Err(Error::invalid("Newton iteration failed to converge".to_string()));
            }
            // elem = x^{-shift} * shifted, so its inverse is x^shift * z.
            for _ in 0..shift {
                z = comp.mul_vec(&z);
            }
            z = red(z);
            let terms: std::collections::BTreeMap<i64, BigInt> = z
                .into_iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (i as i64, c))
                .collect();
            Ok(RingElem::Laurent(terms))
        }
        _ => Err(Error::unsupported(
            "inversion needs a maximal ideal in its ring's shape".to_string(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotients::{fingerprint, localized_fingerprint};

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn truncation_pinned() {
        // (Z, (2), 3) -> Z/8.
        let t = adic_truncation(&FpModule::free(RingSpec::ZZ, 1), &Ideal::int(2), 3, &cfg())
            .unwrap();
        assert_eq!(t.quotient.factors, vec![8]);
        // Conjugacy module of x-2 at (3, x-2), level 2 -> Z/9 with u = 2.
        let m = FpModule::cyclic(RingSpec::LaurentZ, &[RingElem::laurent(&[(1, 1), (0, -2)])])
            .unwrap();
        let ideal = Ideal::LaurentPF { p: 3, f: vec![1, 1] };
        let t = adic_truncation(&m, &ideal, 2, &cfg()).unwrap();
        assert_eq!(t.quotient.factors, vec![9]);
        let gen = vec![1i64];
        // x acts as multiplication by 2 on the cyclic generator.
        let img = t.quotient.apply_action(&gen);
        assert_eq!(img, vec![2]);
        // Quadratic order over itself at (2, 1+w), level 2: the square is
        // (2), so the quotient is the order-4 module R/(2).
        let ring = RingSpec::QuadOrder(-5);
        let p2 = quad_ideal_span(
            &ring,
            &[RingElem::from_int(&ring, 2), RingElem::quad(1, 1)],
        );
        let t =
            adic_truncation(&FpModule::free(ring.clone(), 1), &p2, 2, &cfg()).unwrap();
        assert_eq!(t.quotient.order_u64().unwrap(), 4);
        assert_eq!(t.quotient.factors, vec![2, 2]);
        // Level validation and non-maximal rejection.
        assert!(adic_truncation(&FpModule::free(RingSpec::ZZ, 1), &Ideal::int(2), 0, &cfg())
            .is_err());
        assert!(adic_truncation(&FpModule::free(RingSpec::ZZ, 1), &Ideal::int(6), 1, &cfg())
            .is_err());
    }

    #[test]
    fn truncation_laurent_free_level() {
        // R/(5, x-2)^2 has order 5^3: one copy of the residue field per
        // basis step of the filtration 1, 2 at levels below 2.
        let ideal = Ideal::LaurentPF { p: 5, f: vec![3, 1] };
        let m = FpModule::free(RingSpec::LaurentZ, 1);
        let t = adic_truncation(&m, &ideal, 2, &cfg()).unwrap();
        assert_eq!(t.quotient.order_u64().unwrap(), 125);
    }

    #[test]
    fn tower_pinned() {
        let cfg = cfg();
        let m = FpModule::free(RingSpec::ZZ, 1);
        for k in 1..=4 {
            assert!(tower_check(&m, &Ideal::int(2), k, &cfg).unwrap());
        }
        let m = FpModule::cyclic(RingSpec::LaurentZ, &[RingElem::laurent(&[(1, 1), (0, -2)])])
            .unwrap();
        let ideal = Ideal::LaurentPF { p: 3, f: vec![1, 1] };
        for k in 1..=3 {
            assert!(tower_check(&m, &ideal, k, &cfg).unwrap());
        }
    }

    #[test]
    fn crt_pinned() {
        let cfg = cfg();
        // 360 = 8 * 9 * 5.
        let d = crt_decompose(&RingSpec::ZZ, &Ideal::int(360), &cfg).unwrap();
        let orders: Vec<u64> =
            d.factors.iter().map(|f| f.quotient.order_u64().unwrap()).collect();
        assert_eq!(orders, vec![8, 9, 5]);
        assert!(!d.verified); // 360 > default ceiling 256
        let d = crt_decompose(&RingSpec::ZZ, &Ideal::int(7), &cfg).unwrap();
        assert_eq!(d.factors.len(), 1);
        assert!(d.verified);
        // (6) over QuadOrder(-5): 2 ramifies, 3 splits -> P2^2 * P3 * P3'.
        let ring = RingSpec::QuadOrder(-5);
        let six = quad_ideal_span(&ring, &[RingElem::from_int(&ring, 6)]);
        let d = crt_decompose(&ring, &six, &cfg).unwrap();
        assert!(d.verified); // index 36 <= 256
        let mut shape: Vec<(u64, u32)> = d
            .factors
            .iter()
            .map(|f| {
                let n: u64 = (&f.ideal.norm().unwrap()).try_into().unwrap();
                (n, f.level)
            })
            .collect();
        shape.sort_unstable();
        assert_eq!(shape, vec![(2, 2), (3, 1), (3, 1)]);
        // Zero and infinite-index moduli rejected.
        assert!(crt_decompose(&RingSpec::ZZ, &Ideal::Zero, &cfg).is_err());
        assert!(crt_decompose(
            &RingSpec::LaurentZ,
            &Ideal::LaurentPoly(RingElem::laurent(&[(1, 1), (0, -2)])),
            &cfg
        )
        .is_err());
        // Maximal Laurent ideal: a single residue-field factor.
        let d = crt_decompose(
            &RingSpec::LaurentZ,
            &Ideal::LaurentPF { p: 7, f: vec![4, 1] },
            &cfg,
        )
        .unwrap();
        assert_eq!(d.factors.len(), 1);
        assert_eq!(d.factors[0].quotient.order_u64().unwrap(), 7);
    }

    #[test]
    fn crt_bijective_range() {
        let cfg = cfg();
        for n in 2..=64i64 {
            let d = crt_decompose(&RingSpec::ZZ, &Ideal::int(n), &cfg).unwrap();
            assert!(d.verified, "n = {n}");
        }
    }

    #[test]
    fn hensel_pinned() {
        // 7^{-1} mod 81 = 58.
        let z = hensel_invert(&RingSpec::ZZ, &Ideal::int(3), 4, &RingElem::Int(BigInt::from(7)))
            .unwrap();
        assert_eq!(z, RingElem::Int(BigInt::from(58)));
        // 3^{-1} mod 2 = 1.
        let z = hensel_invert(&RingSpec::ZZ, &Ideal::int(2), 1, &RingElem::Int(BigInt::from(3)))
            .unwrap();
        assert_eq!(z, RingElem::Int(BigInt::from(1)));
        // x^{-1} in LZ/(5, x-2)^2: canonical representative 1 + 6x, whose
        // value at x = 2 is 13, the inverse of 2 mod 25.
        let ideal = Ideal::LaurentPF { p: 5, f: vec![3, 1] };
        let z = hensel_invert(&RingSpec::LaurentZ, &ideal, 2, &RingElem::laurent(&[(1, 1)]))
            .unwrap();
        assert_eq!(z, RingElem::laurent(&[(0, 1), (1, 6)]));
        let at2: BigInt = z
            .laurent_terms()
            .iter()
            .map(|(&e, c)| c * BigInt::from(2).pow(e as u32))
            .sum();
        assert_eq!(at2.mod_floor(&BigInt::from(25)), BigInt::from(13));
        // Negative exponents are units too: (x^{-1})^{-1} recovers x.
        let z = hensel_invert(&RingSpec::LaurentZ, &ideal, 2, &RingElem::laurent(&[(-1, 1)]))
            .unwrap();
        assert_eq!(z, RingElem::laurent(&[(1, 1)]));
        // Non-units rejected with the residue witness.
        let err = hensel_invert(&RingSpec::ZZ, &Ideal::int(3), 2, &RingElem::Int(BigInt::from(6)))
            .unwrap_err();
        assert!(err.to_string().contains("not a unit"));
        // Quadratic order: invert 1 + w mod (2, 1+w)^3... use a unit at the
        // ramified prime: 1 + 2w has nonzero residue.
        let ring = RingSpec::QuadOrder(-5);
        let p2 = quad_ideal_span(
            &ring,
            &[RingElem::from_int(&ring, 2), RingElem::quad(1, 1)],
        );
        let e = RingElem::quad(1, 2);
        let z = hensel_invert(&ring, &p2, 4, &e).unwrap();
        // Verify by multiplication modulo P2^4 = (4).
        let prod = e.mul(&z, &ring);
        let pk = ideal_power(&ring, &p2, 4).unwrap();
        let (a, b, c) = match &pk {
            Ideal::Quad { a, b, c, .. } => (a.clone(), b.clone(), c.clone()),
            _ => unreachable!(),
        };
        let (x, y) = match &prod {
            RingElem::Quad(x, y) => (x.clone(), y.clone()),
            _ => unreachable!(),
        };
        let y1 = y.mod_floor(&c);
        let x1 = (x - (&y - &y1).div_floor(&c) * &b).mod_floor(&a);
        assert_eq!((x1, y1), (BigInt::one(), BigInt::zero()));
        // Inert prime: residue field of order 121 over QuadOrder(-5) at 11?
        // 11 splits? x^2+5 mod 11 has roots? 4^2=16=5 -> -5... r^2 = -5 mod 11:
        // squares mod 11: 1,4,9,5,3 -> 5 appears (4^2=5). So 11 splits; use 13:
        // squares mod 13: 1,4,9,3,12,10 -> -5=8 absent, inert.
        let p13 = quad_ideal_span(&ring, &[RingElem::from_int(&ring, 13)]);
        let e = RingElem::quad(3, 1);
        let z = hensel_invert(&ring, &p13, 2, &e).unwrap();
        let prod = e.mul(&z, &ring);
        let m169 = BigInt::from(169);
        let (x, y) = match &prod {
            RingElem::Quad(x, y) => (x.clone(), y.clone()),
            _ => unreachable!(),
        };
        assert_eq!(
            (x.mod_floor(&m169), y.mod_floor(&m169)),
            (BigInt::one(), BigInt::zero())
        );
    }

    #[test]
    fn torsion_free_at_finite_level() {
        let cfg = cfg();
        // Multiplication by residue units is injective on R/I^k.
        let m = FpModule::free(RingSpec::ZZ, 1);
        let t = adic_truncation(&m, &Ideal::int(2), 3, &cfg).unwrap();
        assert!(multiplication_injective(&t.quotient, &RingElem::Int(BigInt::from(3))).unwrap());
        assert!(!multiplication_injective(&t.quotient, &RingElem::Int(BigInt::from(2))).unwrap());
        let m = FpModule::free(RingSpec::LaurentZ, 1);
        let ideal = Ideal::LaurentPF { p: 3, f: vec![1, 1] };
        let t = adic_truncation(&m, &ideal, 2, &cfg).unwrap();
        assert!(multiplication_injective(&t.quotient, &RingElem::laurent(&[(1, 1)])).unwrap());
        assert!(
            !multiplication_injective(&t.quotient, &RingElem::laurent(&[(0, 3)])).unwrap()
        );
    }

    #[test]
    fn localized_fingerprint_examples() {
        let cfg = cfg();
        // Z/6 at (2): the 2-primary members.
        let m = FpModule::cyclic(RingSpec::ZZ, &[RingElem::from_int(&RingSpec::ZZ, 6)]).unwrap();
        let fp = localized_fingerprint(&m, &Ideal::int(2), 8, &cfg).unwrap();
        let want: std::collections::BTreeSet<String> =
            ["()", "(2)"].iter().map(|s| s.to_string()).collect();
        assert_eq!(fp.codes, want);
        // Z at (3): 3-power cyclic quotients.
        let m = FpModule::free(RingSpec::ZZ, 1);
        let fp = localized_fingerprint(&m, &Ideal::int(3), 27, &cfg).unwrap();
        let want: std::collections::BTreeSet<String> =
            ["()", "(3)", "(9)", "(27)"].iter().map(|s| s.to_string()).collect();
        assert_eq!(fp.codes, want);
        // Conjugacy module of x-2 at (3, x-2).
        let m = FpModule::cyclic(RingSpec::LaurentZ, &[RingElem::laurent(&[(1, 1), (0, -2)])])
            .unwrap();
        let ideal = Ideal::LaurentPF { p: 3, f: vec![1, 1] };
        let fp = localized_fingerprint(&m, &ideal, 10, &cfg).unwrap();
        let want: std::collections::BTreeSet<String> = ["()", "(3|u=[[2]])", "(9|u=[[2]])"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(fp.codes, want);
        // Localized members sit inside the full fingerprint.
        let full = fingerprint(&m, 10, &cfg).unwrap();
        assert!(fp.codes.is_subset(&full.codes));
    }
}
