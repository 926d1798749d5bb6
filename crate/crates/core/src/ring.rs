//! The four coefficient rings, their elements, and their ideals.
//!
//! Rings: ZZ; localizations ZZ[1/m] inverting a finite set of primes;
//! imaginary quadratic orders Z[w] for squarefree d < 0, where w = sqrt(d)
//! for d = 2, 3 mod 4 and w = (1 + sqrt(d))/2 for d = 1 mod 4; and the
//! Laurent ring LZ = Z[x, 1/x].

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::{is_prime_u64, is_squarefree, primes_upto, sqrt_mod_p};
use crate::error::{Error, Result};
use crate::fq::{pf_is_irreducible, pf_trim, Fq, FqElem, PolyFp};
use crate::matrix::{hnf_cols, Mat};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RingSpec {
    ZZ,
    /// ZZ with the primes in the set inverted.
    ZZLoc(BTreeSet<u64>),
    /// Z[w] for squarefree d < 0.
    QuadOrder(i64),
    /// Z[x, 1/x].
    LaurentZ,
}

impl RingSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RingSpec::ZZ | RingSpec::LaurentZ => Ok(()),
            RingSpec::ZZLoc(s) => {
                if s.is_empty() {
                    return Err(Error::invalid("localization needs at least one prime".to_string()));
                }
                for &p in s {
                    if !is_prime_u64(p) {
                        return Err(Error::invalid(format!("localized at non-prime {p}")));
                    }
                }
                Ok(())
            }
            RingSpec::QuadOrder(d) => {
                if *d >= 0 || !is_squarefree(*d) {
                    return Err(Error::invalid(format!(
                        "quadratic order needs squarefree d < 0, got {d}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Trace of w: w^2 = t*w - nn.
    pub fn omega_trace(&self) -> i64 {
        match self {
            RingSpec::QuadOrder(d) => {
                if d.rem_euclid(4) == 1 {
                    1
                } else {
                    0
                }
            }
            _ => panic!("omega_trace on non-quadratic ring"),
        }
    }

    /// Norm of w: w^2 = t*w - nn.
    pub fn omega_norm(&self) -> i64 {
        match self {
            RingSpec::QuadOrder(d) => {
                if d.rem_euclid(4) == 1 {
                    (1 - d) / 4
                } else {
                    -d
                }
            }
            _ => panic!("omega_norm on non-quadratic ring"),
        }
    }

    /// Field discriminant: d for d = 1 mod 4, else 4d. Equals t^2 - 4*nn.
    pub fn discriminant(&self) -> i64 {
        match self {
            RingSpec::QuadOrder(d) => {
                if d.rem_euclid(4) == 1 {
                    *d
                } else {
                    4 * d
                }
            }
            _ => panic!("discriminant on non-quadratic ring"),
        }
    }

    /// Rings whose modules flatten to integer lattices with a finite action.
    pub fn is_lattice_ring(&self) -> bool {
        !matches!(self, RingSpec::LaurentZ)
    }

    /// Z-rank of the ring as an abelian group per module generator.
    pub fn flat_rank(&self) -> usize {
        match self {
            RingSpec::QuadOrder(_) => 2,
            _ => 1,
        }
    }

    pub fn inverted_primes(&self) -> Option<&BTreeSet<u64>> {
        match self {
            RingSpec::ZZLoc(s) => Some(s),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            RingSpec::ZZ => "ZZ".to_string(),
            RingSpec::ZZLoc(s) => {
                let m: u64 = s.iter().product();
                format!("ZZ[1/{m}]")
            }
            RingSpec::QuadOrder(d) => format!("QO({d})"),
            RingSpec::LaurentZ => "LZ".to_string(),
        }
    }
}

/// Elements. Laurent elements are exponent -> coefficient maps with no zero
/// coefficients stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RingElem {
    Int(BigInt),
    Quad(BigInt, BigInt),
    Laurent(BTreeMap<i64, BigInt>),
}

impl RingElem {
    pub fn zero(ring: &RingSpec) -> RingElem {
        match ring {
            RingSpec::QuadOrder(_) => RingElem::Quad(BigInt::zero(), BigInt::zero()),
            RingSpec::LaurentZ => RingElem::Laurent(BTreeMap::new()),
            _ => RingElem::Int(BigInt::zero()),
        }
    }

    pub fn one(ring: &RingSpec) -> RingElem {
        match ring {
            RingSpec::QuadOrder(_) => RingElem::Quad(BigInt::one(), BigInt::zero()),
            RingSpec::LaurentZ => {
                let mut m = BTreeMap::new();
                m.insert(0, BigInt::one());
                RingElem::Laurent(m)
            }
            _ => RingElem::Int(BigInt::one()),
        }
    }

    pub fn from_int(ring: &RingSpec, n: i64) -> RingElem {
        Self::from_bigint(ring, BigInt::from(n))
    }

    pub fn from_bigint(ring: &RingSpec, n: BigInt) -> RingElem {
        match ring {
            RingSpec::QuadOrder(_) => RingElem::Quad(n, BigInt::zero()),
            RingSpec::LaurentZ => {
                let mut m = BTreeMap::new();
                if !n.is_zero() {
                    m.insert(0, n);
                }
                RingElem::Laurent(m)
            }
            _ => RingElem::Int(n),
        }
    }

    pub fn laurent(terms: &[(i64, i64)]) -> RingElem {
        let mut m: BTreeMap<i64, BigInt> = BTreeMap::new();
        for &(e, c) in terms {
            let entry = m.entry(e).or_insert_with(BigInt::zero);
            *entry += BigInt::from(c);
        }
        m.retain(|_, v| !v.is_zero());
        RingElem::Laurent(m)
    }

    pub fn quad(x: i64, y: i64) -> RingElem {
        RingElem::Quad(BigInt::from(x), BigInt::from(y))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RingElem::Int(n) => n.is_zero(),
            RingElem::Quad(x, y) => x.is_zero() && y.is_zero(),
            RingElem::Laurent(m) => m.is_empty(),
        }
    }

    pub fn matches_ring(&self, ring: &RingSpec) -> bool {
        matches!(
            (self, ring),
            (RingElem::Int(_), RingSpec::ZZ)
                | (RingElem::Int(_), RingSpec::ZZLoc(_))
                | (RingElem::Quad(_, _), RingSpec::QuadOrder(_))
                | (RingElem::Laurent(_), RingSpec::LaurentZ)
        )
    }

    pub fn add(&self, rhs: &RingElem) -> RingElem {
        match (self, rhs) {
            (RingElem::Int(a), RingElem::Int(b)) => RingElem::Int(a + b),
            (RingElem::Quad(a, b), RingElem::Quad(c, d)) => RingElem::Quad(a + c, b + d),
            (RingElem::Laurent(a), RingElem::Laurent(b)) => {
                let mut m = a.clone();
                for (e, c) in b {
                    let entry = m.entry(*e).or_insert_with(BigInt::zero);
                    *entry += c;
                }
                m.retain(|_, v| !v.is_zero());
                RingElem::Laurent(m)
            }
            _ => panic!("mixed element shapes"),
        }
    }

    pub fn neg(&self) -> RingElem {
        match self {
            RingElem::Int(a) => RingElem::Int(-a),
            RingElem::Quad(a, b) => RingElem::Quad(-a, -b),
            RingElem::Laurent(m) => {
                RingElem::Laurent(m.iter().map(|(e, c)| (*e, -c)).collect())
            }
        }
    }

    pub fn sub(&self, rhs: &RingElem) -> RingElem {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &RingElem, ring: &RingSpec) -> RingElem {
        match (self, rhs) {
            (RingElem::Int(a), RingElem::Int(b)) => RingElem::Int(a * b),
            (RingElem::Quad(x1, y1), RingElem::Quad(x2, y2)) => {
                let t = BigInt::from(ring.omega_trace());
                let nn = BigInt::from(ring.omega_norm());
                // (x1 + y1 w)(x2 + y2 w) with w^2 = t w - nn
                let rat = x1 * x2 - &nn * y1 * y2;
                let om = x1 * y2 + x2 * y1 + &t * y1 * y2;
                RingElem::Quad(rat, om)
            }
            (RingElem::Laurent(a), RingElem::Laurent(b)) => {
                let mut m: BTreeMap<i64, BigInt> = BTreeMap::new();
                for (e1, c1) in a {
                    for (e2, c2) in b {
                        let entry = m.entry(e1 + e2).or_insert_with(BigInt::zero);
                        *entry += c1 * c2;
                    }
                }
                m.retain(|_, v| !v.is_zero());
                RingElem::Laurent(m)
            }
            _ => panic!("mixed element shapes"),
        }
    }

    pub fn mul_int(&self, n: &BigInt) -> RingElem {
        match self {
            RingElem::Int(a) => RingElem::Int(a * n),
            RingElem::Quad(a, b) => RingElem::Quad(a * n, b * n),
            RingElem::Laurent(m) => {
                let mut out: BTreeMap<i64, BigInt> =
                    m.iter().map(|(e, c)| (*e, c * n)).collect();
                out.retain(|_, v| !v.is_zero());
                RingElem::Laurent(out)
            }
        }
    }

    /// Conjugate of a quadratic element: x + y*conj(w), conj(w) = t - w.
    pub fn quad_conj(&self, ring: &RingSpec) -> RingElem {
        match self {
            RingElem::Quad(x, y) => {
                let t = BigInt::from(ring.omega_trace());
                RingElem::Quad(x + &t * y, -y)
            }
            _ => panic!("quad_conj on non-quadratic element"),
        }
    }

    /// Multiply a Laurent element by x^k.
    pub fn laurent_shift(&self, k: i64) -> RingElem {
        match self {
            RingElem::Laurent(m) => {
                RingElem::Laurent(m.iter().map(|(e, c)| (e + k, c.clone())).collect())
            }
            _ => panic!("laurent_shift on non-Laurent element"),
        }
    }

    pub fn laurent_terms(&self) -> &BTreeMap<i64, BigInt> {
        match self {
            RingElem::Laurent(m) => m,
            _ => panic!("laurent_terms on non-Laurent element"),
        }
    }

    /// Human-readable form; w denotes the quadratic generator, x the Laurent one.
    pub fn render(&self) -> String {
        match self {
            RingElem::Int(n) => n.to_string(),
            RingElem::Quad(x, y) => {
                if y.is_zero() {
                    return x.to_string();
                }
                let wpart = if y.is_one() {
                    "w".to_string()
                } else if (-y.clone()).is_one() {
                    "-w".to_string()
                } else {
                    format!("{y}w")
                };
                if x.is_zero() {
                    wpart
                } else if y.is_negative() {
                    format!("{x}{wpart}")
                } else {
                    format!("{x}+{wpart}")
                }
            }
            RingElem::Laurent(m) => {
                if m.is_empty() {
                    return "0".to_string();
                }
                let mut s = String::new();
                for (i, (e, c)) in m.iter().rev().enumerate() {
                    let mag = c.abs();
                    let sign = if c.is_negative() { "-" } else { "+" };
                    if i > 0 || c.is_negative() {
                        s.push_str(sign);
                    }
                    let coeff = if mag.is_one() && *e != 0 { String::new() } else { mag.to_string() };
                    let xpow = match e {
                        0 => String::new(),
                        1 => "x".to_string(),
                        _ => format!("x^{e}"),
                    };
                    s.push_str(&coeff);
                    s.push_str(&xpow);
                }
                s
            }
        }
    }
}

/// Normalize a nonzero Laurent element as a principal ideal generator:
/// shift the minimal exponent to 0 and make the leading coefficient positive.
pub fn laurent_normalize_generator(e: &RingElem) -> RingElem {
    let m = e.laurent_terms();
    if m.is_empty() {
        return e.clone();
    }
    let min_e = *m.keys().next().unwrap();
    let shifted = e.laurent_shift(-min_e);
    let lead_neg = shifted.laurent_terms().values().next_back().unwrap().is_negative();
    if lead_neg {
        shifted.neg()
    } else {
        shifted
    }
}

/// Strip all prime factors in `s` from `n` (sign preserved).
pub fn strip_inverted_primes(n: &BigInt, s: &BTreeSet<u64>) -> BigInt {
    if n.is_zero() {
        return n.clone();
    }
    let mut n = n.clone();
    for &p in s {
        let p = BigInt::from(p);
        while (&n % &p).is_zero() {
            n /= &p;
        }
    }
    n
}

/// Ideals, in the shapes each ring supports.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ideal {
    Zero,
    /// (g) with g > 0; ZZ and localizations (g coprime to the inverted primes).
    Int(BigInt),
    /// Fractional ideal of a quadratic order: (1/den) * lattice with Z-basis
    /// {a, b + c*w}; a, c > 0, c | a, c | b, 0 <= b < a, den >= 1, content 1.
    Quad { a: BigInt, b: BigInt, c: BigInt, den: BigInt },
    /// Principal (f) in LZ, f normalized via laurent_normalize_generator.
    LaurentPoly(RingElem),
    /// (p, f) in LZ with f monic irreducible mod p and f != x.
    LaurentPF { p: u64, f: PolyFp },
}

impl Ideal {
    pub fn unit(ring: &RingSpec) -> Ideal {
        match ring {
            RingSpec::QuadOrder(_) => Ideal::Quad {
                a: BigInt::one(),
                b: BigInt::zero(),
                c: BigInt::one(),
                den: BigInt::one(),
            },
            RingSpec::LaurentZ => Ideal::LaurentPoly(RingElem::one(ring)),
            _ => Ideal::Int(BigInt::one()),
        }
    }

    pub fn int(g: i64) -> Ideal {
        if g == 0 {
            Ideal::Zero
        } else {
            Ideal::Int(BigInt::from(g.abs()))
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Ideal::Zero)
    }

    pub fn is_unit(&self, ring: &RingSpec) -> bool {
        self == &Ideal::unit(ring)
    }

    /// Norm of an integral ideal (index of its lattice). Errors on zero,
    /// fractional, or infinite-index ideals.
    pub fn norm(&self) -> Result<BigInt> {
        match self {
            Ideal::Zero => Err(Error::invalid("norm of the zero ideal".to_string())),
            Ideal::Int(g) => Ok(g.clone()),
            Ideal::Quad { a, c, den, .. } => {
                if !den.is_one() {
                    return Err(Error::invalid("norm of a fractional ideal".to_string()));
                }
                Ok(a * c)
            }
            Ideal::LaurentPoly(_) => Err(Error::unsupported(
                "a principal Laurent ideal has infinite index".to_string(),
            )),
            Ideal::LaurentPF { p, f } => Ok(BigInt::from(p.pow((f.len() - 1) as u32))),
        }
    }

    pub fn render(&self) -> String {
        match self {
            Ideal::Zero => "(0)".to_string(),
            Ideal::Int(g) => format!("({g})"),
            Ideal::Quad { a, b, c, den } => {
                let second = RingElem::Quad(b.clone(), c.clone()).render();
                let base = format!("({a}, {second})");
                if den.is_one() {
                    base
                } else {
                    format!("{base}/{den}")
                }
            }
            Ideal::LaurentPoly(f) => format!("({})", f.render()),
            Ideal::LaurentPF { p, f } => {
                let poly = RingElem::Laurent(
                    f.iter()
                        .enumerate()
                        .filter(|(_, &c)| c != 0)
                        .map(|(e, &c)| (e as i64, BigInt::from(c)))
                        .collect(),
                );
                format!("({p}, {})", poly.render())
            }
        }
    }

    /// Validate against a ring, checking shape and stability conditions.
    pub fn validate(&self, ring: &RingSpec) -> Result<()> {
        match (self, ring) {
            (Ideal::Zero, _) => Ok(()),
            (Ideal::Int(g), RingSpec::ZZ) => {
                if g.is_positive() {
                    Ok(())
                } else {
                    Err(Error::invalid("integer ideal generator must be positive".to_string()))
                }
            }
            (Ideal::Int(g), RingSpec::ZZLoc(s)) => {
                if !g.is_positive() {
                    return Err(Error::invalid(
                        "integer ideal generator must be positive".to_string(),
                    ));
                }
                if &strip_inverted_primes(g, s) != g {
                    return Err(Error::invalid(format!(
                        "generator {g} is divisible by an inverted prime"
                    )));
                }
                Ok(())
            }
            (Ideal::Quad { a, b, c, den }, RingSpec::QuadOrder(_)) => {
                if !a.is_positive() || !c.is_positive() || !den.is_positive() {
                    return Err(Error::invalid("quad ideal needs a, c, den > 0".to_string()));
                }
                if b.is_negative() || b >= a {
                    return Err(Error::invalid("quad ideal needs 0 <= b < a".to_string()));
                }
                if !(a % c).is_zero() || !(b % c).is_zero() {
                    return Err(Error::invalid(
                        "quad ideal lattice is not w-stable (c must divide a and b)".to_string(),
                    ));
                }
                let t = BigInt::from(ring.omega_trace());
                let nn = BigInt::from(ring.omega_norm());
                let val = b * b + b * c * &t + c * c * &nn;
                if !(val % (a * c)).is_zero() {
                    return Err(Error::invalid(
                        "quad ideal lattice is not w-stable (norm form condition)".to_string(),
                    ));
                }
                let g = a.gcd(b).gcd(c).gcd(den);
                if !g.is_one() {
                    return Err(Error::invalid("quad ideal not in lowest terms".to_string()));
                }
                Ok(())
            }
            (Ideal::LaurentPoly(f), RingSpec::LaurentZ) => {
                if !f.matches_ring(ring) {
                    return Err(Error::invalid("generator is not a Laurent element".to_string()));
                }
                if f.is_zero() {
                    return Err(Error::invalid("zero generator; use the zero ideal".to_string()));
                }
                if &laurent_normalize_generator(f) != f {
                    return Err(Error::invalid("Laurent generator not normalized".to_string()));
                }
                Ok(())
            }
            (Ideal::LaurentPF { p, f }, RingSpec::LaurentZ) => {
                if !is_prime_u64(*p) {
                    return Err(Error::invalid(format!("{p} is not prime")));
                }
                let mut g = f.clone();
                pf_trim(&mut g);
                if &g != f || f.last() != Some(&1) || f.len() < 2 {
                    return Err(Error::invalid("f must be monic and reduced mod p".to_string()));
                }
                if f.iter().any(|&c| c >= *p) {
                    return Err(Error::invalid("f has coefficients outside [0, p)".to_string()));
                }
                if f == &vec![0, 1] {
                    return Err(Error::invalid(
                        "(p, x) is the unit ideal in LZ since x is a unit".to_string(),
                    ));
                }
                if !pf_is_irreducible(f, *p) {
                    return Err(Error::invalid("f is not irreducible mod p".to_string()));
                }
                Ok(())
            }
            _ => Err(Error::invalid(format!(
                "ideal shape does not match ring {}",
                ring.render()
            ))),
        }
    }

    /// Deterministic ordering key.
    pub fn sort_key(&self) -> (BigInt, String) {
        let n = self.norm().unwrap_or_else(|_| BigInt::zero());
        (n, self.render())
    }
}

/// Canonical quadratic ideal from a set of lattice generators (coordinates
/// (rational, w)), closing under multiplication by w. Returns Zero for an
/// empty span.
pub fn quad_ideal_span(ring: &RingSpec, gens: &[RingElem]) -> Ideal {
    let t = BigInt::from(ring.omega_trace());
    let nn = BigInt::from(ring.omega_norm());
    let mut cols: Vec<Vec<BigInt>> = Vec::new();
    for g in gens {
        let RingElem::Quad(x, y) = g else { panic!("quad_ideal_span needs quad elements") };
        // Reversed coordinate order (w part first) so the Hermite form comes
        // out in the classical (a, b + c*w) shape.
        cols.push(vec![y.clone(), x.clone()]);
        // w * (x + y w) = -nn*y + (x + t*y) w
        let wx = -&nn * y;
        let wy = x + &t * y;
        cols.push(vec![wy, wx]);
    }
    let h = hnf_cols(&Mat::from_cols(2, &cols));
    if h.cols < 2 {
        return Ideal::Zero;
    }
    // Columns: (c, b) and (0, a) in reversed coordinates.
    let c = h.at(0, 0).clone();
    let b = h.at(1, 0).clone();
    let a = h.at(1, 1).clone();
    let ideal =
        Ideal::Quad { a, b, c, den: BigInt::one() };
    debug_assert!(ideal.validate(ring).is_ok(), "span produced invalid ideal: {ideal:?}");
    ideal
}

/// Reduce a fractional quad ideal to lowest terms.
fn quad_reduce(a: BigInt, b: BigInt, c: BigInt, den: BigInt) -> Ideal {
    let g = a.gcd(&b).gcd(&c).gcd(&den);
    Ideal::Quad { a: a / &g, b: b / &g, c: c / &g, den: den / &g }
}

/// All maximal ideals of norm <= norm_bound, sorted by (norm, render).
pub fn maximal_ideals(ring: &RingSpec, norm_bound: u64) -> Result<Vec<Ideal>> {
    ring.validate()?;
    if norm_bound < 1 {
        return Err(Error::invalid("norm bound must be >= 1".to_string()));
    }
    let mut out: Vec<Ideal> = Vec::new();
    match ring {
        RingSpec::ZZ => {
            for p in primes_upto(norm_bound) {
                out.push(Ideal::Int(BigInt::from(p)));
            }
        }
        RingSpec::ZZLoc(s) => {
            for p in primes_upto(norm_bound) {
                if !s.contains(&p) {
                    out.push(Ideal::Int(BigInt::from(p)));
                }
            }
        }
        RingSpec::QuadOrder(_) => {
            let t = ring.omega_trace();
            let nn = ring.omega_norm();
            for p in primes_upto(norm_bound) {
                // Roots of x^2 - t x + nn mod p decide the splitting.
                let roots: Vec<u64> = if p == 2 {
                    (0..2u64)
                        .filter(|&r| {
                            (r * r) % 2 == ((t * r as i64 - nn).rem_euclid(2)) as u64
                        })
                        .collect()
                } else {
                    let disc = (t * t - 4 * nn).rem_euclid(p as i64) as u64;
                    let sqrts = sqrt_mod_p(disc as i64, p);
                    let inv2 = crate::arith::invmod(2, p).unwrap();
                    let mut rs: Vec<u64> = sqrts
                        .iter()
                        .map(|&s| {
                            ((t.rem_euclid(p as i64) as u64 + s) as u128 * inv2 as u128
                                % p as u128) as u64
                        })
                        .collect();
                    rs.sort_unstable();
                    rs.dedup();
                    rs
                };
                if roots.is_empty() {
                    // Inert: (p), norm p^2.
                    if (p as u128) * (p as u128) <= norm_bound as u128 {
                        out.push(quad_ideal_span(ring, &[RingElem::from_int(ring, p as i64)]));
                    }
                } else {
                    // One root: ramified; two roots: split. Norm p either way.
                    for r in roots {
                        out.push(quad_ideal_span(
                            ring,
                            &[
                                RingElem::from_int(ring, p as i64),
                                RingElem::Quad(BigInt::from(-(r as i64)), BigInt::one()),
                            ],
                        ));
                    }
                }
            }
        }
        RingSpec::LaurentZ => {
            for p in primes_upto(norm_bound) {
                let mut q = p;
                let mut deg = 1usize;
                while q <= norm_bound {
                    // Monic degree-deg polynomials over F_p, f != x, irreducible.
                    let count = p.pow(deg as u32);
                    for idx in 0..count {
                        let mut f: PolyFp = Vec::with_capacity(deg + 1);
                        let mut rem = idx;
                        for _ in 0..deg {
                            f.push(rem % p);
                            rem /= p;
                        }
                        f.push(1);
                        if deg == 1 && f[0] == 0 {
                            continue; // (p, x) is the unit ideal
                        }
                        if pf_is_irreducible(&f, p) {
                            out.push(Ideal::LaurentPF { p, f });
                        }
                    }
                    deg += 1;
                    q = match q.checked_mul(p) {
                        Some(v) => v,
                        None => break,
                    };
                }
            }
        }
    }
    out.sort_by_key(|i| i.sort_key());
    Ok(out)
}

/// The residue field of a maximal ideal.
pub fn residue_field(ring: &RingSpec, ideal: &Ideal) -> Result<Fq> {
    ideal.validate(ring)?;
    match (ring, ideal) {
        (RingSpec::ZZ, Ideal::Int(g)) | (RingSpec::ZZLoc(_), Ideal::Int(g)) => {
            let p: u64 = g.try_into().map_err(|_| Error::invalid("modulus too large".to_string()))?;
            Fq::prime_field(p)
        }
        (RingSpec::QuadOrder(_), Ideal::Quad { a, c, den, .. }) => {
            if !den.is_one() {
                return Err(Error::invalid("fractional ideal is not maximal".to_string()));
            }
            let norm = a * c;
            if c.is_one() {
                let p: u64 =
                    (&norm).try_into().map_err(|_| Error::invalid("norm too large".to_string()))?;
                if !is_prime_u64(p) {
                    return Err(Error::invalid(format!("ideal of norm {p} is not maximal")));
                }
                Fq::prime_field(p)
            } else {
                // Must be (p) for an inert prime p.
                if a != c {
                    return Err(Error::invalid("ideal is not maximal".to_string()));
                }
                let p: u64 =
                    a.try_into().map_err(|_| Error::invalid("norm too large".to_string()))?;
                if !is_prime_u64(p) {
                    return Err(Error::invalid("ideal is not maximal".to_string()));
                }
                let t = ring.omega_trace().rem_euclid(p as i64) as u64;
                let nn = ring.omega_norm().rem_euclid(p as i64) as u64;
                // Minimal polynomial of w mod p: x^2 - t x + nn.
                let f: PolyFp = {
                    let mut f = vec![nn, (p - t) % p, 1];
                    pf_trim(&mut f);
                    f
                };
                if !pf_is_irreducible(&f, p) {
                    return Err(Error::invalid(format!("({p}) is not maximal: {p} splits")));
                }
                Fq::extension(p, f)
            }
        }
        (RingSpec::LaurentZ, Ideal::LaurentPF { p, f }) => Fq::extension(*p, f.clone()),
        (RingSpec::LaurentZ, Ideal::LaurentPoly(_)) => Err(Error::invalid(
            "a principal Laurent ideal is not maximal (the quotient is infinite)".to_string(),
        )),
        (_, Ideal::Zero) => Err(Error::invalid("the zero ideal is not maximal".to_string())),
        _ => Err(Error::invalid("ideal shape does not match ring".to_string())),
    }
}

/// Reduce an element into the residue field of a maximal ideal.
pub fn residue_field_reduce(ring: &RingSpec, ideal: &Ideal, elem: &RingElem) -> Result<FqElem> {
    let field = residue_field(ring, ideal)?;
    if !elem.matches_ring(ring) {
        return Err(Error::invalid("element shape does not match ring".to_string()));
    }
    Ok(residue_reduce_with(&field, ring, ideal, elem))
}

/// Same as residue_field_reduce with the field precomputed (hot path).
pub fn residue_reduce_with(field: &Fq, _ring: &RingSpec, ideal: &Ideal, elem: &RingElem) -> FqElem {
    match (ideal, elem) {
        (_, RingElem::Int(n)) => {
            let p = BigInt::from(field.p);
            let r: i64 = n.mod_floor(&p).try_into().unwrap();
            field.from_int(r)
        }
        (Ideal::Quad { b, c, .. }, RingElem::Quad(x, y)) => {
            let p = BigInt::from(field.p);
            if c.is_one() {
                // w = -b in the residue field.
                let val = (x - y * b).mod_floor(&p);
                let r: i64 = val.try_into().unwrap();
                field.from_int(r)
            } else {
                // Inert: w is the class of the variable.
                let xr: u64 = x.mod_floor(&p).try_into().unwrap();
                let yr: u64 = y.mod_floor(&p).try_into().unwrap();
                field.from_poly(&vec![xr, yr])
            }
        }
        (Ideal::LaurentPF { p, .. }, RingElem::Laurent(terms)) => {
            // x maps to the class of the variable, a unit since f != x.
            let xbar = field.from_poly(&vec![0, 1]);
            let xinv = field.inv(&xbar).expect("x is a unit mod (p, f)");
            let pb = BigInt::from(*p);
            let mut acc = field.zero();
            for (e, cf) in terms {
                let c: u64 = cf.mod_floor(&pb).try_into().unwrap();
                let base = if *e >= 0 {
                    field.pow(&xbar, *e as u64)
                } else {
                    field.pow(&xinv, (-e) as u64)
                };
                acc = field.add(&acc, &field.mul(&field.from_poly(&vec![c]), &base));
            }
            acc
        }
        _ => panic!("mismatched ideal/element in residue reduction"),
    }
}

/// Matrix of the distinguished ring generator acting on the residue field,
/// as a deg x deg matrix over F_p in the power basis. None for ZZ and
/// localizations (no generator beyond 1).
pub fn residue_generator_matrix(ring: &RingSpec, ideal: &Ideal) -> Result<Option<Vec<Vec<u64>>>> {
    let field = residue_field(ring, ideal)?;
    let gen = match ring {
        RingSpec::ZZ | RingSpec::ZZLoc(_) => return Ok(None),
        RingSpec::QuadOrder(_) => {
            residue_reduce_with(&field, ring, ideal, &RingElem::Quad(BigInt::zero(), BigInt::one()))
        }
        RingSpec::LaurentZ => field.from_poly(&vec![0, 1]),
    };
    let d = field.deg();
    // Column j = gen * x^j in the power basis.
    let mut cols = Vec::with_capacity(d);
    let mut basis = field.one();
    let xpoly = field.from_poly(&vec![0, 1]);
    for _ in 0..d {
        cols.push(field.mul(&gen, &basis));
        basis = field.mul(&basis, &xpoly);
    }
    let mut m = vec![vec![0u64; d]; d];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..d {
            m[i][j] = col[i];
        }
    }
    Ok(Some(m))
}

/// Product of two ideals.
pub fn ideal_product(ring: &RingSpec, lhs: &Ideal, rhs: &Ideal) -> Result<Ideal> {
    lhs.validate(ring)?;
    rhs.validate(ring)?;
    match (lhs, rhs) {
        (Ideal::Zero, _) | (_, Ideal::Zero) => Ok(Ideal::Zero),
        (Ideal::Int(g), Ideal::Int(h)) => Ok(Ideal::Int(g * h)),
        (
            Ideal::Quad { a: a1, b: b1, c: c1, den: d1 },
            Ideal::Quad { a: a2, b: b2, c: c2, den: d2 },
        ) => {
            let gens1 = [
                RingElem::Quad(a1.clone(), BigInt::zero()),
                RingElem::Quad(b1.clone(), c1.clone()),
            ];
            let gens2 = [
                RingElem::Quad(a2.clone(), BigInt::zero()),
                RingElem::Quad(b2.clone(), c2.clone()),
            ];
            let mut prods = Vec::new();
            for x in &gens1 {
                for y in &gens2 {
                    prods.push(x.mul(y, ring));
                }
            }
            let span = quad_ideal_span(ring, &prods);
            let Ideal::Quad { a, b, c, .. } = span else {
                return Err(Error::invalid("product of nonzero ideals collapsed".to_string()));
            };
            Ok(quad_reduce(a, b, c, d1 * d2))
        }
        (Ideal::LaurentPoly(f), Ideal::LaurentPoly(g)) => {
            Ok(Ideal::LaurentPoly(laurent_normalize_generator(&f.mul(g, ring))))
        }
        (Ideal::LaurentPoly(f), Ideal::LaurentPF { p, f: g })
        | (Ideal::LaurentPF { p, f: g }, Ideal::LaurentPoly(f)) => {
            if f == &RingElem::one(ring) {
                Ok(Ideal::LaurentPF { p: *p, f: g.clone() })
            } else {
                Err(Error::unsupported(
                    "products mixing (f) and (p, f) ideals in LZ leave the supported shapes"
                        .to_string(),
                ))
            }
        }
        (Ideal::LaurentPF { .. }, Ideal::LaurentPF { .. }) => Err(Error::unsupported(
            "products of two (p, f) ideals in LZ leave the supported shapes".to_string(),
        )),
        _ => Err(Error::invalid("ideal shapes do not match the ring".to_string())),
    }
}

/// k-th power of an ideal by repeated products. k = 0 gives the unit ideal.
pub fn ideal_power(ring: &RingSpec, ideal: &Ideal, k: u32) -> Result<Ideal> {
    let mut acc = Ideal::unit(ring);
    for _ in 0..k {
        acc = ideal_product(ring, &acc, ideal)?;
    }
    Ok(acc)
}

/// Exact polynomial division over Z of Laurent elements: does f divide e?
fn laurent_divides(f: &RingElem, e: &RingElem) -> bool {
    if e.is_zero() {
        return true;
    }
    if f.is_zero() {
        return false;
    }
    // Shift both to honest polynomials with nonzero constant term.
    let fm = f.laurent_terms();
    let em = e.laurent_terms();
    let f0 = *fm.keys().next().unwrap();
    let e0 = *em.keys().next().unwrap();
    let fs = f.laurent_shift(-f0);
    let mut rem: BTreeMap<i64, BigInt> = e.laurent_shift(-e0).laurent_terms().clone();
    let fd = *fs.laurent_terms().keys().next_back().unwrap();
    let flead = fs.laurent_terms()[&fd].clone();
    // Long division from the top; the quotient must be integral, and its
    // leading term is forced at each step.
    while let Some((&rd, _)) = rem.iter().next_back() {
        if rd < fd {
            return false;
        }
        let rlead = rem[&rd].clone();
        let (q, r) = rlead.div_rem(&flead);
        if !r.is_zero() {
            return false;
        }
        for (fe, fc) in fs.laurent_terms() {
            let key = fe + rd - fd;
            let entry = rem.entry(key).or_insert_with(BigInt::zero);
            *entry -= &q * fc;
            if entry.is_zero() {
                rem.remove(&key);
            }
        }
    }
    true
}

/// Membership of an element in an ideal.
pub fn ideal_membership(ring: &RingSpec, ideal: &Ideal, elem: &RingElem) -> Result<bool> {
    ideal.validate(ring)?;
    if !elem.matches_ring(ring) {
        return Err(Error::invalid("element shape does not match ring".to_string()));
    }
    match (ideal, elem) {
        (Ideal::Zero, e) => Ok(e.is_zero()),
        (Ideal::Int(g), RingElem::Int(n)) => {
            let n = match ring {
                RingSpec::ZZLoc(s) => strip_inverted_primes(n, s),
                _ => n.clone(),
            };
            Ok((n % g).is_zero())
        }
        (Ideal::Quad { a, b, c, den }, RingElem::Quad(x, y)) => {
            // e in (1/den) L  <=>  den*e in L.
            let x = x * den;
            let y = y * den;
            if !(&y % c).is_zero() {
                return Ok(false);
            }
            let k = &y / c;
            Ok(((x - k * b) % a).is_zero())
        }
        (Ideal::LaurentPoly(f), e @ RingElem::Laurent(_)) => Ok(laurent_divides(f, e)),
        (Ideal::LaurentPF { p, f }, RingElem::Laurent(terms)) => {
            // Reduce mod p, clear the (unit) negative powers of x, reduce mod f.
            let pb = BigInt::from(*p);
            let shift = terms.keys().next().map_or(0, |&e| (-e).max(0));
            let mut poly: PolyFp = vec![];
            for (e, c) in terms {
                let idx = (e + shift) as usize;
                if poly.len() <= idx {
                    poly.resize(idx + 1, 0);
                }
                let cv: u64 = c.mod_floor(&pb).try_into().unwrap();
                poly[idx] = cv;
            }
            pf_trim(&mut poly);
            Ok(crate::fq::pf_rem(&poly, f, *p).is_empty())
        }
        _ => Err(Error::invalid("ideal shape does not match ring".to_string())),
    }
}

/// Generators of an ideal as ring elements (integral ideals only), used to
/// push ideals into module lattices.
pub fn ideal_generators(ring: &RingSpec, ideal: &Ideal) -> Result<Vec<RingElem>> {
    ideal.validate(ring)?;
    match ideal {
        Ideal::Zero => Ok(vec![]),
        Ideal::Int(g) => Ok(vec![RingElem::from_bigint(ring, g.clone())]),
        Ideal::Quad { a, b, c, den } => {
            if !den.is_one() {
                return Err(Error::invalid("generators of a fractional ideal".to_string()));
            }
            Ok(vec![
                RingElem::Quad(a.clone(), BigInt::zero()),
                RingElem::Quad(b.clone(), c.clone()),
            ])
        }
        Ideal::LaurentPoly(f) => Ok(vec![f.clone()]),
        Ideal::LaurentPF { p, f } => {
            let fp = RingElem::Laurent(
                f.iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0)
                    .map(|(e, &c)| (e as i64, BigInt::from(c)))
                    .collect(),
            );
            Ok(vec![RingElem::from_int(ring, *p as i64), fp])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zz() -> RingSpec {
        RingSpec::ZZ
    }
    fn qo5() -> RingSpec {
        RingSpec::QuadOrder(-5)
    }
    fn lz() -> RingSpec {
        RingSpec::LaurentZ
    }

    #[test]
    fn ring_validation() {
        assert!(RingSpec::QuadOrder(-5).validate().is_ok());
        assert!(RingSpec::QuadOrder(-4).validate().is_err());
        assert!(RingSpec::QuadOrder(5).validate().is_err());
        assert!(RingSpec::ZZLoc([2, 3].into()).validate().is_ok());
        assert!(RingSpec::ZZLoc([4].into()).validate().is_err());
        assert_eq!(RingSpec::ZZLoc([2, 3].into()).render(), "ZZ[1/6]");
    }

    #[test]
    fn quad_parameters() {
        // d = -5: w = sqrt(-5), w^2 = -5.
        assert_eq!(qo5().omega_trace(), 0);
        assert_eq!(qo5().omega_norm(), 5);
        assert_eq!(qo5().discriminant(), -20);
        // d = -7 = 1 mod 4: w = (1+sqrt(-7))/2, w^2 = w - 2.
        let q7 = RingSpec::QuadOrder(-7);
        assert_eq!(q7.omega_trace(), 1);
        assert_eq!(q7.omega_norm(), 2);
        assert_eq!(q7.discriminant(), -7);
        // Multiplication respects w^2 = t w - nn.
        let w = RingElem::quad(0, 1);
        assert_eq!(w.mul(&w, &qo5()), RingElem::quad(-5, 0));
        assert_eq!(w.mul(&w, &q7), RingElem::quad(-2, 1));
        assert_eq!(w.quad_conj(&q7), RingElem::quad(1, -1));
    }

    #[test]
    fn maximal_ideals_zz_bound_10() {
        let ids = maximal_ideals(&zz(), 10).unwrap();
        let expect: Vec<Ideal> = [2, 3, 5, 7].iter().map(|&p| Ideal::int(p)).collect();
        assert_eq!(ids, expect);
        // Localization drops inverted primes.
        let ids = maximal_ideals(&RingSpec::ZZLoc([2, 3].into()), 10).unwrap();
        assert_eq!(ids, vec![Ideal::int(5), Ideal::int(7)]);
    }

    #[test]
    fn maximal_ideals_lz_bound_4() {
        let ids = maximal_ideals(&lz(), 4).unwrap();
        // (2, x+1), (3, x+1), (3, x+2), (2, x^2+x+1); never (2, x).
        let expect = vec![
            Ideal::LaurentPF { p: 2, f: vec![1, 1] },
            Ideal::LaurentPF { p: 3, f: vec![1, 1] },
            Ideal::LaurentPF { p: 3, f: vec![2, 1] },
            Ideal::LaurentPF { p: 2, f: vec![1, 1, 1] },
        ];
        assert_eq!(ids, expect);
    }

    #[test]
    fn maximal_ideals_qo5_bound_5() {
        let ids = maximal_ideals(&qo5(), 5).unwrap();
        // Ramified above 2; split above 3 and 5(ramified): x^2+5 mod 3 has
        // roots 1, 2; mod 5 has the double root 0.
        assert_eq!(ids.len(), 4);
        assert_eq!(
            ids[0],
            Ideal::Quad {
                a: BigInt::from(2),
                b: BigInt::one(),
                c: BigInt::one(),
                den: BigInt::one()
            }
        );
        assert_eq!(ids[0].render(), "(2, 1+w)");
        assert_eq!(ids[1].norm().unwrap(), BigInt::from(3));
        assert_eq!(ids[2].norm().unwrap(), BigInt::from(3));
        assert_ne!(ids[1], ids[2]);
        assert_eq!(ids[3].norm().unwrap(), BigInt::from(5));
        // Inert prime appears only when p^2 fits under the bound.
        let ids11 = maximal_ideals(&qo5(), 121).unwrap();
        assert!(ids11.iter().any(|i| i.norm().unwrap() == BigInt::from(121)));
        let ids120 = maximal_ideals(&qo5(), 120).unwrap();
        assert!(!ids120.iter().any(|i| i.norm().unwrap() == BigInt::from(121)));
    }

    #[test]
    fn residue_reduction_pinned() {
        // (ZZ, (7), 23) -> 2
        let r = residue_field_reduce(&zz(), &Ideal::int(7), &RingElem::from_int(&zz(), 23)).unwrap();
        assert_eq!(r, vec![2]);
        // (LZ, (5, x-2), x^3) -> 2^3 = 3 mod 5
        let i = Ideal::LaurentPF { p: 5, f: vec![3, 1] }; // x + 3 = x - 2 mod 5
        let e = RingElem::laurent(&[(3, 1)]);
        assert_eq!(residue_field_reduce(&lz(), &i, &e).unwrap(), vec![3]);
        // (QO(-5), (2, 1+w), w) -> w = -1 = 1 mod 2
        let p2 = Ideal::Quad {
            a: BigInt::from(2),
            b: BigInt::one(),
            c: BigInt::one(),
            den: BigInt::one(),
        };
        assert_eq!(residue_field_reduce(&qo5(), &p2, &RingElem::quad(0, 1)).unwrap(), vec![1]);
        // Negative exponents reduce through the inverse of x.
        let e = RingElem::laurent(&[(-1, 1)]); // x^{-1} = inverse of 2 = 3 mod 5
        assert_eq!(residue_field_reduce(&lz(), &i, &e).unwrap(), vec![3]);
    }

    #[test]
    fn ideal_products_pinned() {
        // (2, 1+w)^2 = (2) in QO(-5).
        let p2 = Ideal::Quad {
            a: BigInt::from(2),
            b: BigInt::one(),
            c: BigInt::one(),
            den: BigInt::one(),
        };
        let sq = ideal_product(&qo5(), &p2, &p2).unwrap();
        assert_eq!(
            sq,
            Ideal::Quad {
                a: BigInt::from(2),
                b: BigInt::zero(),
                c: BigInt::from(2),
                den: BigInt::one()
            }
        );
        assert_eq!(sq.norm().unwrap(), BigInt::from(4));
        // (3)(5) = (15) in ZZ.
        assert_eq!(
            ideal_product(&zz(), &Ideal::int(3), &Ideal::int(5)).unwrap(),
            Ideal::int(15)
        );
        // I * (1) = I.
        let unit = Ideal::unit(&qo5());
        assert_eq!(ideal_product(&qo5(), &p2, &unit).unwrap(), p2);
    }

    #[test]
    fn membership_pinned() {
        assert!(ideal_membership(&zz(), &Ideal::int(12), &RingElem::from_int(&zz(), 36)).unwrap());
        assert!(!ideal_membership(&zz(), &Ideal::int(12), &RingElem::from_int(&zz(), 30)).unwrap());
        // (x - 2) contains x^2 - 4.
        let f = laurent_normalize_generator(&RingElem::laurent(&[(1, 1), (0, -2)]));
        let i = Ideal::LaurentPoly(f);
        assert!(ideal_membership(&lz(), &i, &RingElem::laurent(&[(2, 1), (0, -4)])).unwrap());
        assert!(!ideal_membership(&lz(), &i, &RingElem::laurent(&[(2, 1), (0, -3)])).unwrap());
        // Shift-invariance: x^k (x-2) is still in (x-2).
        assert!(ideal_membership(&lz(), &i, &RingElem::laurent(&[(3, 1), (2, -2)])).unwrap());
        // (2, 1+w) contains w - 1.
        let p2 = Ideal::Quad {
            a: BigInt::from(2),
            b: BigInt::one(),
            c: BigInt::one(),
            den: BigInt::one(),
        };
        assert!(ideal_membership(&qo5(), &p2, &RingElem::quad(-1, 1)).unwrap());
        assert!(!ideal_membership(&qo5(), &p2, &RingElem::quad(0, 1)).unwrap());
        // Localization: 2 is a unit in ZZ[1/2], so (3) contains 6/2... i.e. 6
        // and even 3*2^k for any k; and membership strips powers of 2.
        let loc = RingSpec::ZZLoc([2].into());
        assert!(ideal_membership(&loc, &Ideal::int(3), &RingElem::from_int(&loc, 24)).unwrap());
        assert!(!ideal_membership(&loc, &Ideal::int(9), &RingElem::from_int(&loc, 24)).unwrap());
    }

    #[test]
    fn laurent_generator_normalization() {
        // 2 - x normalizes (shift 0) to x - 2? No: leading coefficient of
        // 2 - x is -1 at x^1, so negate: x - 2.
        let e = RingElem::laurent(&[(0, 2), (1, -1)]);
        assert_eq!(laurent_normalize_generator(&e), RingElem::laurent(&[(1, 1), (0, -2)]));
        // x^{-3}(x - 2) normalizes to x - 2.
        let e = RingElem::laurent(&[(-2, 1), (-3, -2)]);
        assert_eq!(laurent_normalize_generator(&e), RingElem::laurent(&[(1, 1), (0, -2)]));
    }

    #[test]
    fn quad_ideal_validation() {
        // (2, 1+w) valid over QO(-5); lattice {2, w} is not w-stable.
        let good = Ideal::Quad {
            a: BigInt::from(2),
            b: BigInt::one(),
            c: BigInt::one(),
            den: BigInt::one(),
        };
        assert!(good.validate(&qo5()).is_ok());
        let bad = Ideal::Quad {
            a: BigInt::from(2),
            b: BigInt::zero(),
            c: BigInt::one(),
            den: BigInt::one(),
        };
        assert!(bad.validate(&qo5()).is_err());
        // (p, x) rejected in LZ.
        assert!(Ideal::LaurentPF { p: 2, f: vec![0, 1] }.validate(&lz()).is_err());
        // Reducible f rejected.
        assert!(Ideal::LaurentPF { p: 5, f: vec![4, 0, 1] }.validate(&lz()).is_err());
    }
}
