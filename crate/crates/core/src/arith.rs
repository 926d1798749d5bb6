//! Small-integer number theory helpers: primes, factorization, modular
//! arithmetic, multiplicative orders, unit-group generators.

use crate::error::{Error, Result};

/// Sieve of Eratosthenes: all primes `<= n`.
pub fn primes_upto(n: u64) -> Vec<u64> {
    if n < 2 {
        return vec![];
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            out.push(p as u64);
            let mut m = p * p;
            while m <= n {
                composite[m] = true;
                m += p;
            }
        }
    }
    out
}

/// Trial-division primality. Adequate for the word-sized values used here.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Prime factorization `n = prod p_i^{e_i}` with ascending primes. `n >= 1`.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0u32;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Product of the distinct prime divisors of `n`. `radical(1) = 1`.
pub fn radical(n: u64) -> u64 {
    factorize(n).iter().map(|&(p, _)| p).product::<u64>().max(1)
}

pub fn powmod(mut a: u64, mut e: u64, m: u64) -> u64 {
    assert!(m > 0);
    a %= m;
    let mut acc = 1u64 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * a as u128) % m as u128) as u64;
        }
        a = ((a as u128 * a as u128) % m as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Inverse of `a` mod `m`, if `gcd(a, m) = 1`.
pub fn invmod(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(s0.rem_euclid(m as i128) as u64)
}

/// Multiplicative order of `a` in `(Z/p)^*` for prime `p`, by refining `p - 1`
/// along its prime divisors.
pub fn mult_order(a: u64, p: u64) -> Result<u64> {
    if !is_prime_u64(p) {
        return Err(Error::invalid(format!("mult_order: modulus {p} is not prime")));
    }
    if a % p == 0 {
        return Err(Error::invalid(format!("mult_order: {a} is 0 mod {p}")));
    }
    let mut ord = p - 1;
    for (q, _) in factorize(p - 1) {
        while ord % q == 0 && powmod(a, ord / q, p) == 1 {
            ord /= q;
        }
    }
    Ok(ord)
}

/// Multiplicative order by direct iteration; the slow oracle for `mult_order`.
pub fn mult_order_naive(a: u64, p: u64) -> Result<u64> {
    if !is_prime_u64(p) || a % p == 0 {
        return Err(Error::invalid("mult_order_naive: bad input".to_string()));
    }
    let a = a % p;
    let mut x = a;
    let mut k = 1u64;
    while x != 1 {
        x = ((x as u128 * a as u128) % p as u128) as u64;
        k += 1;
    }
    Ok(k)
}

pub fn is_squarefree(d: i64) -> bool {
    let n = d.unsigned_abs();
    if n == 0 {
        return false;
    }
    factorize(n).iter().all(|&(_, e)| e == 1)
}

/// Square roots of `a` mod prime `p` by direct scan (moduli here are small).
pub fn sqrt_mod_p(a: i64, p: u64) -> Vec<u64> {
    let a = a.rem_euclid(p as i64) as u64;
    let mut out: Vec<u64> = (0..p)
        .filter(|&r| ((r as u128 * r as u128) % p as u128) as u64 == a)
        .collect();
    out.sort_unstable();
    out
}

/// A primitive root mod `p^e` for odd prime `p`, `e >= 1`.
pub fn primitive_root(p: u64, e: u32) -> Result<u64> {
    if p == 2 || !is_prime_u64(p) {
        return Err(Error::invalid(format!("primitive_root: need odd prime, got {p}")));
    }
    let mut g = 0u64;
    for cand in 2..p {
        if mult_order(cand, p)? == p - 1 {
            g = cand;
            break;
        }
    }
    assert!(g != 0, "every prime has a primitive root");
    if e == 1 {
        return Ok(g);
    }
    // g generates mod p^e unless g^{p-1} = 1 mod p^2, in which case g + p does.
    let p2 = p * p;
    if powmod(g, p - 1, p2) == 1 {
        g += p;
    }
    Ok(g)
}

/// Generators of the unit group `(Z/p^e)^*`, paired with their inverses.
/// Odd p: a single primitive root. p = 2: the standard generators
/// {-1, 5} for e >= 3, {3} for e = 2, nothing for e = 1.
pub fn unit_group_generators(p: u64, e: u32) -> Result<Vec<(u64, u64)>> {
    let m = p.checked_pow(e).ok_or_else(|| Error::resource("modulus overflow".to_string()))?;
    if p == 2 {
        return Ok(match e {
            0 | 1 => vec![],
            2 => vec![(3, 3)],
            _ => {
                let five_inv = invmod(5, m).unwrap();
                vec![(m - 1, m - 1), (5, five_inv), (five_inv, 5)]
            }
        });
    }
    if e == 0 || m <= 2 {
        return Ok(vec![]);
    }
    let g = primitive_root(p, e)?;
    let ginv = invmod(g, m).unwrap();
    Ok(vec![(g, ginv), (ginv, g)])
}

/// p-adic valuation of `n != 0`.
pub fn valuation(mut n: u64, p: u64) -> u32 {
    assert!(n != 0 && p >= 2);
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}
