//! The solvable Baumslag-Solitar groups BS(1, n) = <a, t | t^-1 a t = a^n>:
//! conjugacy module over the Laurent ring, abelianization, the metacyclic
//! family of finite quotients, and the arithmetic survivor scan that
//! singles out the defining parameter from multiplicative-order data.

use std::collections::BTreeSet;

use crate::arith::{
    invmod, mult_order, mult_order_naive, powmod, primes_upto, radical,
};
use crate::error::{Error, Result};
use crate::fmod::{canonical_code, FiniteModule};
use crate::module::{z_decomposition, FpModule, ZDecomp};
use crate::quotients::fingerprint;
use crate::ring::{RingElem, RingSpec};
use crate::EngineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BsGroup {
    pub n: i64,
}

impl BsGroup {
    pub fn new(n: i64) -> Result<BsGroup> {
        if n.abs() <= 1 {
            return Err(Error::invalid(format!(
                "BS(1, {n}) is virtually abelian; the rank-one solvable tools \
                 require |n| >= 2 — use the plain integer-module operations instead"
            )));
        }
        Ok(BsGroup { n })
    }

    pub fn abelianization(&self) -> Result<ZDecomp> {
        abelianization(self.n)
    }
}

/// The conjugation action of t on the normal closure of a, as a cyclic
/// module over the Laurent ring: one generator, relation x - n.
pub fn conjugacy_module(g: &BsGroup) -> Result<FpModule> {
    FpModule::cyclic(RingSpec::LaurentZ, &[RingElem::laurent(&[(1, 1), (0, -g.n)])])
}

/// Underlying abelian group of BS(1, n) mod commutators: the relation
/// collapses to (n - 1) a = 0, giving Z/(n-1) x Z.
pub fn abelianization(n: i64) -> Result<ZDecomp> {
    let ring = RingSpec::ZZ;
    let rel = vec![RingElem::from_int(&ring, 1 - n), RingElem::from_int(&ring, 0)];
    let m = FpModule::new(ring, 2, vec![rel])?;
    z_decomposition(&m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct StandardQuotient {
    pub m: u64,
    pub k: u64,
    /// Outcome of the defining-relation check in the constructed group.
    pub verified: bool,
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Semidirect product Z/m x| Z/k where conjugation by the Z/k generator
/// raises the Z/m part to the n-th power. Elements are (i, j); moving a
/// torsion element past j applies the inverse action j times.
struct Metacyclic {
    m: u64,
    k: u64,
    /// Multiplier realizing conjugation: w = n^-1 mod m, so that
    /// t^-1 a t = a^n holds literally.
    w: u64,
}

impl Metacyclic {
    fn new(n: i64, m: u64, k: u64) -> Result<Metacyclic> {
        validate_pair(n, m, k)?;
        let w = if m == 1 {
            0
        } else {
            invmod(n.rem_euclid(m as i64) as u64, m)
                .ok_or_else(|| Error::invalid("parameter not invertible".to_string()))?
        };
        Ok(Metacyclic { m, k, w })
    }

    fn mul(&self, x: (u64, u64), y: (u64, u64)) -> (u64, u64) {
        let shift = powmod(self.w, x.1, self.m);
        let i = ((x.0 as u128 + shift as u128 * y.0 as u128) % self.m as u128) as u64;
        (i, (x.1 + y.1) % self.k)
    }

    fn inv(&self, x: (u64, u64)) -> (u64, u64) {
        let j = (self.k - x.1) % self.k;
        let shift = powmod(self.w, j, self.m);
        let i = (self.m - ((shift as u128 * x.0 as u128) % self.m as u128) as u64) % self.m;
        (i, j)
    }

    /// t^-1 a t = a^n, checked on the explicit elements.
    fn relation_holds(&self, n: i64) -> bool {
        let a = (1 % self.m, 0);
        let t = (0, 1 % self.k);
        let lhs = self.mul(self.mul(self.inv(t), a), t);
        let rhs = (n.rem_euclid(self.m as i64) as u64, 0);
        lhs == rhs
    }
}

fn validate_pair(n: i64, m: u64, k: u64) -> Result<()> {
    if m == 0 || k == 0 {
        return Err(Error::invalid("quotient parameters must be positive".to_string()));
    }
    if gcd_u64(m, n.unsigned_abs()) != 1 {
        return Err(Error::invalid(format!(
            "torsion size {m} shares a factor with the parameter {n}"
        )));
    }
    if powmod(n.rem_euclid(m as i64) as u64, k, m) != 1 % m {
        return Err(Error::invalid(format!(
            "{n}^{k} is not 1 mod {m}: the twist does not close up"
        )));
    }
    Ok(())
}

/// All metacyclic quotients Z/m x|_n Z/k of order at most the bound, each
/// checked against the defining relation.
pub fn standard_quotients(g: &BsGroup, order_bound: u64) -> Result<Vec<StandardQuotient>> {
    if order_bound == 0 {
        return Err(Error::invalid("order bound must be positive".to_string()));
    }
    let mut out = Vec::new();
    for m in 1..=order_bound {
        if gcd_u64(m, g.n.unsigned_abs()) != 1 {
            continue;
        }
        let nm = g.n.rem_euclid(m as i64) as u64;
        for k in 1..=(order_bound / m) {
            if powmod(nm, k, m) != 1 % m {
                continue;
            }
            let group = Metacyclic::new(g.n, m, k)?;
            out.push(StandardQuotient { m, k, verified: group.relation_holds(g.n) });
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Image of the conjugacy module inside the quotient Z/m x|_n Z/k: the
/// torsion part Z/m with the generator acting as multiplication by n.
/// Membership in the module's quotient fingerprint is asserted.
pub fn restrict_quotient_to_module(g: &BsGroup, m: u64, k: u64) -> Result<FiniteModule> {
    validate_pair(g.n, m, k)?;
    let ring = RingSpec::LaurentZ;
    let module = if m == 1 {
        FiniteModule::zero(&ring)
    } else {
        FiniteModule::new(
            ring.clone(),
            vec![m as i64],
            Some(vec![vec![g.n.rem_euclid(m as i64)]]),
        )?
    };
    let cfg = EngineConfig { ceiling: m.max(EngineConfig::default().ceiling) };
    let fp = fingerprint(&conjugacy_module(g)?, m, &cfg)?;
    let code = canonical_code(&module, cfg.ceiling)?;
    if !fp.codes.contains(&code) {
        return Err(Error::invalid(format!(
            "restricted quotient (Z/{m}, action {}) is not a fingerprint member",
            g.n.rem_euclid(m as i64)
        )));
    }
    Ok(module)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileRow {
    pub p: u64,
    /// Multiplicative order of n mod p.
    pub ord_n: u64,
    /// Multiplicative order of b/a mod p.
    pub ord_ratio: u64,
    /// Whether <n> and <b/a> coincide inside the units mod p.
    pub subgroup_equal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderProfile {
    pub n: i64,
    pub a: i64,
    pub b: i64,
    pub prime_bound: u64,
    pub rows: Vec<ProfileRow>,
}

impl OrderProfile {
    pub fn all_equal(&self) -> bool {
        self.rows.iter().all(|r| r.subgroup_equal)
    }
}

fn validate_candidate(n: i64, a: i64, b: i64) -> Result<()> {
    if n == 0 || a == 0 || b == 0 {
        return Err(Error::invalid("parameters must be nonzero".to_string()));
    }
    if gcd_u64(a.unsigned_abs(), b.unsigned_abs()) != 1 {
        return Err(Error::invalid(format!("candidate pair ({a}, {b}) is not coprime")));
    }
    Ok(())
}

/// Per-prime comparison of the cyclic subgroups generated by n and by b/a
/// in the units mod p, over all primes up to the bound dividing neither
/// n nor ab. The units form a cyclic group, so the subgroups coincide
/// exactly when each generator lies in the other's span, i.e. when the
/// orders divide each other.
pub fn order_profile(n: i64, a: i64, b: i64, prime_bound: u64) -> Result<OrderProfile> {
    validate_candidate(n, a, b)?;
    let mut rows = Vec::new();
    for p in primes_upto(prime_bound) {
        if let Some(row) = profile_row(n, a, b, p)? {
            rows.push(row);
        }
    }
    Ok(OrderProfile { n, a, b, prime_bound, rows })
}

fn profile_row(n: i64, a: i64, b: i64, p: u64) -> Result<Option<ProfileRow>> {
    if n.unsigned_abs() % p == 0 || a.unsigned_abs() % p == 0 || b.unsigned_abs() % p == 0 {
        return Ok(None);
    }
    let nr = n.rem_euclid(p as i64) as u64;
    let ar = a.rem_euclid(p as i64) as u64;
    let br = b.rem_euclid(p as i64) as u64;
    let ratio = ((br as u128 * invmod(ar, p).expect("p does not divide a") as u128)
        % p as u128) as u64;
    let ord_n = mult_order(nr, p)?;
    let ord_ratio = mult_order(ratio, p)?;
    debug_assert!((p - 1) % ord_n == 0 && (p - 1) % ord_ratio == 0);
    let subgroup_equal = ord_n % ord_ratio == 0 && ord_ratio % ord_n == 0;
    Ok(Some(ProfileRow { p, ord_n, ord_ratio, subgroup_equal }))
}

/// Whether n and ab have the same prime divisors.
pub fn prime_support_check(n: i64, a: i64, b: i64) -> Result<bool> {
    validate_candidate(n, a, b)?;
    let ab = (a as i128 * b as i128).unsigned_abs();
    let ab: u64 = ab
        .try_into()
        .map_err(|_| Error::resource("candidate product overflows".to_string()))?;
    Ok(radical(n.unsigned_abs()) == radical(ab))
}

/// Exhaustive scan over coprime pairs (a, b) in the height box for those
/// indistinguishable from (1, n) by prime support and by every per-prime
/// subgroup comparison up to the prime bound. Survivors are closed under
/// the inversion symmetry (a, b) -> (b, a) (with signs normalized so the
/// first entry stays positive), deduplicated, and sorted.
pub fn rigidity_scan(n: i64, height: u64, prime_bound: u64) -> Result<Vec<(i64, i64)>> {
    if n.abs() <= 1 {
        return Err(Error::invalid("the scan needs |n| >= 2".to_string()));
    }
    if height == 0 || prime_bound < 2 {
        return Err(Error::invalid("height and prime bound must be positive".to_string()));
    }
    let primes = primes_upto(prime_bound);
    let h = height as i64;
    let mut raw: Vec<(i64, i64)> = Vec::new();
    for a in 1..=h {
        for b in -h..=h {
            if b == 0 || gcd_u64(a.unsigned_abs(), b.unsigned_abs()) != 1 {
                continue;
            }
            if !prime_support_check(n, a, b)? {
                continue;
            }
            let mut passes = true;
            for &p in &primes {
                match profile_row(n, a, b, p)? {
                    Some(row) if !row.subgroup_equal => {
                        passes = false;
                        break;
                    }
                    _ => {}
                }
            }
            if passes {
                verify_survivor(n, a, b, &primes)?;
                raw.push((a, b));
            }
        }
    }
    let mut normalized: BTreeSet<(i64, i64)> = BTreeSet::new();
    for &(a, b) in &raw {
        normalized.insert((a, b));
        // Inverting t swaps the roles of a and b; keep the first entry
        // positive by flipping both signs if needed.
        normalized.insert(if b > 0 { (b, a) } else { (-b, -a) });
    }
    Ok(normalized.into_iter().collect())
}

/// The pairs the rigidity statement predicts: ratio n or 1/n, clipped to
/// the scanned box.
pub fn expected_survivors(n: i64, height: u64) -> Vec<(i64, i64)> {
    let h = height as i64;
    let mut set = BTreeSet::new();
    for pair in [(1, n), (n.abs(), n.signum())] {
        if pair.0 <= h && pair.1.abs() <= h {
            set.insert(pair);
        }
    }
    set.into_iter().collect()
}

/// Independent recheck of one survivor: naive multiplicative orders and
/// subgroup membership by explicit enumeration of powers.
fn verify_survivor(n: i64, a: i64, b: i64, primes: &[u64]) -> Result<()> {
    for &p in primes {
        if n.unsigned_abs() % p == 0 || a.unsigned_abs() % p == 0 || b.unsigned_abs() % p == 0
        {
            continue;
        }
        let nr = n.rem_euclid(p as i64) as u64;
        let ar = a.rem_euclid(p as i64) as u64;
        let br = b.rem_euclid(p as i64) as u64;
        let ratio =
            ((br as u128 * invmod(ar, p).expect("unit") as u128) % p as u128) as u64;
        let fast = profile_row(n, a, b, p)?.expect("row present");
        if mult_order_naive(nr, p)? != fast.ord_n
            || mult_order_naive(ratio, p)? != fast.ord_ratio
        {
            return Err(Error::invalid(format!(
                "order computations disagree at p = {p} for ({a}, {b})"
            )));
        }
        if !(member_naive(nr, ratio, p) && member_naive(ratio, nr, p)) {
            return Err(Error::invalid(format!(
                "survivor ({a}, {b}) fails the power-enumeration recheck at p = {p}"
            )));
        }
    }
    Ok(())
}

/// x lies among the powers of y mod p.
fn member_naive(x: u64, y: u64, p: u64) -> bool {
    let mut z = 1u64;
    loop {
        z = ((z as u128 * y as u128) % p as u128) as u64;
        if z == x {
            return true;
        }
        if z == 1 {
            return x == 1;
        }
    }
}
