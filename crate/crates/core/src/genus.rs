//! Class groups of imaginary quadratic orders via reduced binary quadratic
//! forms, Steinitz classes of projective modules, and genus candidate
//! tables keyed by ideal class.

use num_bigint::BigInt;
use num_traits::One;

use crate::arith::factorize;
use crate::error::{Error, Result};
use crate::invariants::{det_rec, projectivity_verdict, subsets, ProjectivityVerdict};
use crate::module::{steinitz_to_presentation, FpModule, SteinitzModule};
use crate::quotients::{fingerprint, FingerprintData};
use crate::ring::{quad_ideal_span, Ideal, RingElem, RingSpec};
use crate::EngineConfig;

pub type Form = (i64, i64, i64);

/// The form class group of a fundamental imaginary discriminant, with an
/// explicit composition table over the reduced primitive forms.
#[derive(Clone, Debug)]
pub struct FormClassGroup {
    /// Squarefree negative d defining the order.
    pub d: i64,
    /// Fundamental discriminant: d when d = 1 mod 4, else 4d.
    pub disc: i64,
    /// Reduced primitive forms (a, b, c), lexicographically sorted.
    pub forms: Vec<Form>,
    /// table[i][j] = index of the composite of forms i and j.
    pub table: Vec<Vec<usize>>,
    pub identity: usize,
}

impl FormClassGroup {
    pub fn h(&self) -> usize {
        self.forms.len()
    }

    pub fn compose(&self, i: usize, j: usize) -> usize {
        self.table[i][j]
    }

    pub fn inverse(&self, i: usize) -> usize {
        (0..self.h())
            .find(|&j| self.table[i][j] == self.identity)
            .expect("verified groups have inverses")
    }
}

fn form_disc(f: &Form) -> i64 {
    f.1 * f.1 - 4 * f.0 * f.2
}

/// Standard reduction of a positive definite form.
fn reduce_form(mut f: Form) -> Form {
    let d = form_disc(&f);
    loop {
        let (a, b, c) = f;
        if b > a || b <= -a {
            // Normalize b into (-a, a].
            let mut b1 = b.rem_euclid(2 * a);
            if b1 > a {
                b1 -= 2 * a;
            }
            let c1 = (b1 * b1 - d) / (4 * a);
            f = (a, b1, c1);
            continue;
        }
        if c < a {
            f = (c, -b, a);
            continue;
        }
        break;
    }
    let (a, b, c) = f;
    if (a == c && b < 0) || b == -a {
        (a, -b, c)
    } else {
        (a, b, c)
    }
}

/// Dirichlet composition after uniting the forms: replace the first by an
/// equivalent form whose leading coefficient is coprime to 2 a2 D, align
/// the middle coefficients by CRT, multiply.
fn compose_forms(f1: &Form, f2: &Form) -> Form {
    let d = form_disc(f1);
    debug_assert_eq!(d, form_disc(f2));
    let (a1, b1, c1) = *f1;
    let (a2, b2, _) = *f2;
    // A coprime pair (x, y) with f1(x, y) coprime to 2 a2 D; primitive
    // positive definite forms represent such values at small arguments.
    let target = (2 * a2 * d).abs();
    let mut rep: Option<(i64, i64, i64)> = None;
    'search: for r in 1..200i64 {
        for x in -r..=r {
            for y in [-(r - x.abs()), r - x.abs()] {
                if gcd_i64(x, y) != 1 {
                    continue;
                }
                let m = a1 * x * x + b1 * x * y + c1 * y * y;
                if gcd_i64(m, target) == 1 {
                    rep = Some((x, y, m));
                    break 'search;
                }
            }
        }
    }
    let (x, y, m1) = rep.expect("primitive forms represent values coprime to any modulus");
    // Extend (x, y) to a determinant-1 change of variables.
    let (s, t) = bezout(x, y); // s x + t y = 1
    let (u, v) = (-t, s); // x v - y u = 1
    let bb = 2 * a1 * x * u + b1 * (x * v + y * u) + 2 * c1 * y * v;
    debug_assert_eq!(bb * bb - 4 * m1 * (bb * bb - d) / (4 * m1), d);
    // CRT: B = bb mod 2 m1, B = b2 mod 2 a2 (gcd(m1, a2) = 1, both sides
    // share the parity of D).
    let bcrt = crt_pair(bb, 2 * m1, b2, 2 * a2);
    let a = m1 * a2;
    let b = bcrt.rem_euclid(2 * a);
    let c = (b as i128 * b as i128 - d as i128) / (4 * a as i128);
    let c: i64 = c.try_into().expect("composite coefficient fits i64");
    reduce_form((a, b, c))
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// (s, t) with s a + t b = gcd(a, b).
fn bezout(a: i64, b: i64) -> (i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-s0, -t0)
    } else {
        (s0, t0)
    }
}

/// x = r1 mod m1 and x = r2 mod m2, for compatible congruences.
fn crt_pair(r1: i64, m1: i64, r2: i64, m2: i64) -> i64 {
    let g = gcd_i64(m1, m2);
    debug_assert_eq!((r1 - r2).rem_euclid(g), 0);
    let l = m1 / g * m2;
    let (s, _) = bezout((m1 / g).rem_euclid(l), (m2 / g).rem_euclid(l));
    // r1 + m1 * k where k solves (m1/g) k = (r2 - r1)/g mod m2/g.
    let step = (r2 - r1) / g;
    let k = ((s as i128 * step as i128).rem_euclid((m2 / g) as i128)) as i64;
    (r1 as i128 + m1 as i128 * k as i128).rem_euclid(l as i128) as i64
}

/// Class group of the order for squarefree negative d, with the group laws
/// verified exhaustively.
pub fn class_group(d: i64) -> Result<FormClassGroup> {
    if d >= 0 {
        return Err(Error::invalid("the discriminant parameter must be negative".to_string()));
    }
    let ad = (-d) as u64;
    if factorize(ad).iter().any(|&(_, e)| e > 1) {
        return Err(Error::invalid("the discriminant parameter must be squarefree".to_string()));
    }
    let disc = if d.rem_euclid(4) == 1 { d } else { 4 * d };
    // Enumerate reduced primitive forms: |b| <= a <= c, b = disc mod 2,
    // with b >= 0 when |b| = a or a = c.
    let mut forms: Vec<Form> = Vec::new();
    let mut a = 1i64;
    while 3 * a * a <= -disc {
        for b in -a..=a {
            if (b - disc).rem_euclid(2) != 0 {
                continue;
            }
            let num = b * b - disc;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a {
                continue;
            }
            if b < 0 && (-b == a || a == c) {
                continue;
            }
            if gcd_i64(gcd_i64(a, b), c) != 1 {
                continue;
            }
            forms.push((a, b, c));
        }
        a += 1;
    }
    forms.sort_unstable();
    let identity_form = if disc.rem_euclid(4) == 0 {
        (1, 0, -disc / 4)
    } else {
        (1, 1, (1 - disc) / 4)
    };
    let identity = forms
        .iter()
        .position(|f| *f == identity_form)
        .ok_or_else(|| Error::invalid("principal form missing from enumeration".to_string()))?;
    let h = forms.len();
    let mut table = vec![vec![0usize; h]; h];
    for i in 0..h {
        for j in 0..h {
            let composite = compose_forms(&forms[i], &forms[j]);
            let idx = forms.iter().position(|f| *f == composite).ok_or_else(|| {
                Error::invalid("composition left the reduced form list".to_string())
            })?;
            table[i][j] = idx;
        }
    }
    let group = FormClassGroup { d, disc, forms, table, identity };
    verify_group(&group)?;
    Ok(group)
}

fn verify_group(g: &FormClassGroup) -> Result<()> {
    let h = g.h();
    let fail = |what: &str| Err(Error::invalid(format!("class group law failed: {what}")));
    for i in 0..h {
        if g.table[g.identity][i] != i || g.table[i][g.identity] != i {
            return fail("identity");
        }
        if !(0..h).any(|j| g.table[i][j] == g.identity) {
            return fail("inverses");
        }
        for j in 0..h {
            if g.table[i][j] != g.table[j][i] {
                return fail("commutativity");
            }
            for k in 0..h {
                if g.table[g.table[i][j]][k] != g.table[i][g.table[j][k]] {
                    return fail("associativity");
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ideals <-> classes
// ---------------------------------------------------------------------------

/// Class index of a nonzero fractional ideal: the reduced form of the norm
/// form on an oriented basis.
pub fn ideal_to_class(group: &FormClassGroup, ideal: &Ideal) -> Result<usize> {
    let ring = RingSpec::QuadOrder(group.d);
    ideal.validate(&ring)?;
    let (a, b, c) = match ideal {
        Ideal::Zero => return Err(Error::invalid("the zero ideal has no class".to_string())),
        Ideal::Quad { a, b, c, .. } => (a.clone(), b.clone(), c.clone()),
        _ => return Err(Error::invalid("expected a quadratic-order ideal".to_string())),
    };
    let t = BigInt::from(ring.omega_trace());
    let nn = BigInt::from(ring.omega_norm());
    // Scaling (den and the content c) does not move the class: use the
    // primitive lattice {a/c, b/c + w}.
    let fa: BigInt = &a / &c;
    let fb: BigInt = (BigInt::from(2) * &b + &c * &t) / &c;
    let fc: BigInt = (&b * &b + &b * &c * &t + &nn * &c * &c) / (&a * &c);
    let form = (
        (&fa).try_into().map_err(|_| Error::resource("form coefficient overflow".to_string()))?,
        (&fb).try_into().map_err(|_| Error::resource("form coefficient overflow".to_string()))?,
        (&fc).try_into().map_err(|_| Error::resource("form coefficient overflow".to_string()))?,
    );
    debug_assert_eq!(form_disc(&form), group.disc);
    let reduced = reduce_form(form);
    group
        .forms
        .iter()
        .position(|f| *f == reduced)
        .ok_or_else(|| Error::invalid("reduced form missing from the class list".to_string()))
}

/// A fixed integral ideal representative of a class: {A, b0 + w} for the
/// reduced form (A, B, C), with 2 b0 + trace(w) = B mod 2A.
pub fn class_to_ideal(group: &FormClassGroup, class: usize) -> Ideal {
    let ring = RingSpec::QuadOrder(group.d);
    let (fa, fb, _) = group.forms[class];
    let t = ring.omega_trace();
    let b0 = ((fb - t) / 2).rem_euclid(fa);
    quad_ideal_span(
        &ring,
        &[RingElem::from_int(&ring, fa), RingElem::Quad(BigInt::from(b0), BigInt::one())],
    )
}

// ---------------------------------------------------------------------------
// Steinitz classes
// ---------------------------------------------------------------------------

/// Class of the ideal factor in the decomposition torsion + free^(r-1) + I.
pub fn steinitz_class(group: &FormClassGroup, s: &SteinitzModule) -> Result<usize> {
    if s.ring != RingSpec::QuadOrder(group.d) {
        return Err(Error::invalid("module ring does not match the class group".to_string()));
    }
    if s.rank == 0 {
        return Err(Error::invalid(
            "Steinitz class needs a projective part (rank is zero)".to_string(),
        ));
    }
    ideal_to_class(group, &s.ideal)
}

/// Class of a direct sum of ideals: the class of their product.
pub fn ideal_list_class(group: &FormClassGroup, ideals: &[Ideal]) -> Result<usize> {
    let mut acc = group.identity;
    for i in ideals {
        acc = group.compose(acc, ideal_to_class(group, i)?);
    }
    Ok(acc)
}

/// Steinitz class of a presentation certified projective: the cokernel of
/// A splits free^g as M + im(A), so the class of M is the inverse of the
/// class of the top-exterior-power ideal of the relation image.
pub fn steinitz_class_presentation(
    group: &FormClassGroup,
    m: &FpModule,
    norm_bound: u64,
) -> Result<usize> {
    let ring = RingSpec::QuadOrder(group.d);
    if m.ring != ring {
        return Err(Error::invalid("module ring does not match the class group".to_string()));
    }
    let nu = match projectivity_verdict(m, norm_bound)? {
        ProjectivityVerdict::ProjectiveOfRank { rank, .. } => rank,
        ProjectivityVerdict::NotProjective { reason } => {
            return Err(Error::invalid(format!(
                "presentation is not projective ({reason}); provide Steinitz data"
            )))
        }
        ProjectivityVerdict::Unknown { reason } => {
            return Err(Error::invalid(format!("projectivity undetermined: {reason}")))
        }
    };
    if nu == 0 {
        return Err(Error::invalid(
            "Steinitz class needs a projective part (rank is zero)".to_string(),
        ));
    }
    let s = m.gens - nu; // rank of the relation image
    if s == 0 {
        return Ok(group.identity);
    }
    // One row subset with a nonzero minor; the ideal spanned by its minors
    // over all column subsets represents the image's top exterior power.
    let r = m.rels.len();
    for rows in subsets(m.gens, s) {
        let mut minors: Vec<RingElem> = Vec::new();
        for cols in subsets(r, s) {
            let sub: Vec<Vec<RingElem>> = rows
                .iter()
                .map(|&i| cols.iter().map(|&c| m.rels[c][i].clone()).collect())
                .collect();
            let det = det_rec(&ring, &sub);
            if !det.is_zero() {
                minors.push(det);
            }
        }
        if !minors.is_empty() {
            let ideal = quad_ideal_span(&ring, &minors);
            let class = ideal_to_class(group, &ideal)?;
            return Ok(group.inverse(class));
        }
    }
    Err(Error::invalid("relation matrix has lower rank than certified".to_string()))
}

// ---------------------------------------------------------------------------
// Genus candidates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct GenusEntry {
    pub class_index: usize,
    pub form: Form,
    pub candidate: SteinitzModule,
    /// Fingerprint agreement with the base module at the table's bound.
    pub indistinguishable: bool,
}

#[derive(Clone, Debug)]
pub struct GenusTable {
    pub base: SteinitzModule,
    pub bound: u64,
    pub entries: Vec<GenusEntry>,
    pub group: FormClassGroup,
}

/// One candidate per ideal class, sharing the base's torsion and rank,
/// cross-checked against the base by fingerprint comparison at the bound.
/// Candidates with distinct classes have distinct Steinitz data, hence are
/// non-isomorphic.
pub fn genus_candidates(
    m: &SteinitzModule,
    bound: u64,
    cfg: &EngineConfig,
) -> Result<GenusTable> {
    let d = match &m.ring {
        RingSpec::QuadOrder(d) => *d,
        _ => {
            return Err(Error::invalid(
                "genus tables are defined over quadratic orders".to_string(),
            ))
        }
    };
    let group = class_group(d)?;
    let base_fp = steinitz_fingerprint(m, bound, cfg)?;
    if m.rank == 0 {
        // Torsion modules: the candidate set is the module itself.
        let entries = vec![GenusEntry {
            class_index: group.identity,
            form: group.forms[group.identity],
            candidate: m.clone(),
            indistinguishable: true,
        }];
        return Ok(GenusTable { base: m.clone(), bound, entries, group });
    }
    let own_class = steinitz_class(&group, m)?;
    let mut entries = Vec::new();
    for class in 0..group.h() {
        let candidate = if class == own_class {
            m.clone()
        } else {
            SteinitzModule {
                ring: m.ring.clone(),
                torsion: m.torsion.clone(),
                rank: m.rank,
                ideal: class_to_ideal(&group, class),
            }
        };
        let fp = if class == own_class {
            base_fp.codes.clone()
        } else {
            steinitz_fingerprint(&candidate, bound, cfg)?.codes
        };
        entries.push(GenusEntry {
            class_index: class,
            form: group.forms[class],
            candidate,
            indistinguishable: fp == base_fp.codes,
        });
    }
    Ok(GenusTable { base: m.clone(), bound, entries, group })
}

fn steinitz_fingerprint(
    s: &SteinitzModule,
    bound: u64,
    cfg: &EngineConfig,
) -> Result<FingerprintData> {
    let m = steinitz_to_presentation(s)?;
    fingerprint(&m, bound, cfg)
}
