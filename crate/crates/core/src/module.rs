//! Finitely presented modules: a generator count and a list of relation
//! columns with ring-element entries. Modules over the integers and the
//! quadratic orders flatten to integer lattices (a quadratic generator
//! contributes the pair of ambient coordinates e_j, w*e_j); Laurent modules
//! stay symbolic and are handled by the quotient engine directly.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fmod::{quotient_from_lattice, LatticeQuotient};
use crate::matrix::{hnf_cols, kernel_basis, smith_decompose, Mat};
use crate::ring::{ideal_generators, ideal_power, Ideal, RingElem, RingSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpModule {
    pub ring: RingSpec,
    pub gens: usize,
    /// Relation columns; each has one entry per generator.
    pub rels: Vec<Vec<RingElem>>,
}

impl FpModule {
    pub fn new(ring: RingSpec, gens: usize, rels: Vec<Vec<RingElem>>) -> Result<FpModule> {
        ring.validate()?;
        for col in &rels {
            if col.len() != gens {
                return Err(Error::invalid(format!(
                    "relation column with {} entries on {} generators",
                    col.len(),
                    gens
                )));
            }
            for e in col {
                if !e.matches_ring(&ring) {
                    return Err(Error::invalid("relation entry from a different ring".to_string()));
                }
            }
        }
        Ok(FpModule { ring, gens, rels })
    }

    pub fn free(ring: RingSpec, gens: usize) -> FpModule {
        FpModule { ring, gens, rels: vec![] }
    }

    /// Cyclic module with the given relation generators.
    pub fn cyclic(ring: RingSpec, rels: &[RingElem]) -> Result<FpModule> {
        let cols = rels.iter().map(|e| vec![e.clone()]).collect();
        FpModule::new(ring, 1, cols)
    }

    /// Ambient rank over the integers after flattening.
    pub fn flat_gens(&self) -> usize {
        self.gens * self.ring.flat_rank()
    }

    /// Integer form: ambient rank, relation columns, ambient generator action.
    pub fn flatten(&self) -> Result<FlatPresentation> {
        if self.ring == RingSpec::LaurentZ {
            return Err(Error::unsupported(
                "Laurent modules do not flatten to finite-rank integer lattices".to_string(),
            ));
        }
        let n = self.flat_gens();
        let mut cols: Vec<Vec<BigInt>> = Vec::new();
        match &self.ring {
            RingSpec::ZZ | RingSpec::ZZLoc(_) => {
                for col in &self.rels {
                    let mut v = Vec::with_capacity(n);
                    for e in col {
                        match e {
                            RingElem::Int(x) => v.push(x.clone()),
                            _ => unreachable!("validated integer entries"),
                        }
                    }
                    cols.push(v);
                }
            }
            RingSpec::QuadOrder(_) => {
                let omega = RingElem::quad(0, 1);
                for col in &self.rels {
                    let mut direct = Vec::with_capacity(n);
                    let mut twisted = Vec::with_capacity(n);
                    for e in col {
                        let we = e.mul(&omega, &self.ring);
                        match (e, &we) {
                            (RingElem::Quad(x, y), RingElem::Quad(wx, wy)) => {
                                direct.push(x.clone());
                                direct.push(y.clone());
                                twisted.push(wx.clone());
                                twisted.push(wy.clone());
                            }
                            _ => unreachable!("validated quadratic entries"),
                        }
                    }
                    cols.push(direct);
                    cols.push(twisted);
                }
            }
            RingSpec::LaurentZ => unreachable!(),
        }
        let rels = if cols.is_empty() { Mat::zero(n, 0) } else { Mat::from_cols(n, &cols) };
        Ok(FlatPresentation { n, rels, action: ambient_action(&self.ring, self.gens) })
    }

    /// The module as a finite abelian-group quotient, when the relation
    /// lattice has full rank.
    pub fn finite_quotient(&self) -> Result<LatticeQuotient> {
        let flat = self.flatten()?;
        quotient_from_lattice(&self.ring, flat.n, &flat.rels, flat.action.as_ref())
    }
}

pub struct FlatPresentation {
    pub n: usize,
    pub rels: Mat,
    pub action: Option<Mat>,
}

/// Matrix of the ring generator on the flattened ambient lattice: block
/// diagonal copies of [[0, -nn], [1, t]] on the (e_j, w e_j) coordinate pairs.
pub fn ambient_action(ring: &RingSpec, gens: usize) -> Option<Mat> {
    match ring {
        RingSpec::QuadOrder(_) => {
            let t = ring.omega_trace();
            let nn = ring.omega_norm();
            let n = 2 * gens;
            let mut a = Mat::zero(n, n);
            for j in 0..gens {
                a.set(2 * j, 2 * j + 1, BigInt::from(-nn));
                a.set(2 * j + 1, 2 * j, BigInt::from(1));
                a.set(2 * j + 1, 2 * j + 1, BigInt::from(t));
            }
            Some(a)
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZDecomp {
    /// Nontrivial invariant factors of the underlying abelian group.
    pub torsion: Vec<BigInt>,
    pub free_rank: usize,
}

/// Structure of the underlying abelian group (integer and quadratic rings).
pub fn z_decomposition(m: &FpModule) -> Result<ZDecomp> {
    let flat = m.flatten()?;
    if flat.rels.cols == 0 {
        return Ok(ZDecomp { torsion: vec![], free_rank: flat.n });
    }
    let s = smith_decompose(&flat.rels);
    let mut torsion = Vec::new();
    for i in 0..s.rank {
        let mut d = s.d.at(i, i).clone();
        if let Some(set) = m.ring.inverted_primes() {
            for &p in set {
                let pb = BigInt::from(p);
                while (&d % &pb).is_zero() {
                    d /= &pb;
                }
            }
        }
        if d > BigInt::from(1) {
            torsion.push(d);
        }
    }
    Ok(ZDecomp { torsion, free_rank: flat.n - s.rank })
}

// ---------------------------------------------------------------------------
// Steinitz form
// ---------------------------------------------------------------------------

/// A module in Steinitz form: primary torsion, a free rank, and a single
/// ideal class representative carrying the projective part's class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SteinitzModule {
    pub ring: RingSpec,
    /// (maximal ideal, exponent) torsion summands R/P^k.
    pub torsion: Vec<(Ideal, u32)>,
    /// Rank of the projective part.
    pub rank: usize,
    /// Steinitz class; the unit ideal for a free projective part.
    pub ideal: Ideal,
}

impl SteinitzModule {
    pub fn new(
        ring: RingSpec,
        torsion: Vec<(Ideal, u32)>,
        rank: usize,
        ideal: Ideal,
    ) -> Result<SteinitzModule> {
        ring.validate()?;
        for (p, k) in &torsion {
            p.validate(&ring)?;
            if *k == 0 {
                return Err(Error::invalid("torsion exponent must be positive".to_string()));
            }
        }
        ideal.validate(&ring)?;
        if ideal.is_zero() {
            return Err(Error::invalid("the Steinitz ideal must be nonzero".to_string()));
        }
        if rank == 0 && !ideal.is_unit(&ring) {
            return Err(Error::invalid(
                "rank zero forces the unit Steinitz ideal".to_string(),
            ));
        }
        Ok(SteinitzModule { ring, torsion, rank, ideal })
    }
}

/// Presentation of T(P_1^{k_1}) + ... + R^{r-1} + I: one generator per
/// torsion summand with the ideal-power generators as relations; the ideal
/// summand gets two generators and the two syzygies between them.
pub fn steinitz_to_presentation(s: &SteinitzModule) -> Result<FpModule> {
    let principal = !matches!(s.ring, RingSpec::QuadOrder(_)) || s.ideal.is_unit(&s.ring);
    let t = s.torsion.len();
    let free_gens = if s.rank == 0 {
        0
    } else if principal {
        s.rank
    } else {
        s.rank + 1 // rank-1 free summands plus two generators for the ideal
    };
    let gens = t + free_gens;
    let zero = RingElem::zero(&s.ring);
    let mut rels: Vec<Vec<RingElem>> = Vec::new();
    for (i, (p, k)) in s.torsion.iter().enumerate() {
        let pk = ideal_power(&s.ring, p, *k)?;
        for g in ideal_generators(&s.ring, &pk)? {
            let mut col = vec![zero.clone(); gens];
            col[i] = g;
            rels.push(col);
        }
    }
    if s.rank > 0 && !principal {
        // Map R^2 -> I, (u, v) -> u*alpha + v*beta; its integer kernel has
        // rank two and yields the two relation columns on the last two
        // generators.
        let gs = ideal_generators(&s.ring, &s.ideal)?;
        assert_eq!(gs.len(), 2, "non-principal quadratic ideal has two generators");
        let omega = RingElem::quad(0, 1);
        let mut cols: Vec<Vec<BigInt>> = Vec::new();
        for g in &gs {
            for e in [g.clone(), g.mul(&omega, &s.ring)] {
                match e {
                    RingElem::Quad(x, y) => cols.push(vec![x, y]),
                    _ => unreachable!(),
                }
            }
        }
        let ker = kernel_basis(&Mat::from_cols(2, &cols));
        assert_eq!(ker.cols, 2, "syzygy module of a rank-one ideal has rank two");
        for j in 0..ker.cols {
            let mut col = vec![zero.clone(); gens];
            col[gens - 2] = RingElem::Quad(ker.at(0, j).clone(), ker.at(1, j).clone());
            col[gens - 1] = RingElem::Quad(ker.at(2, j).clone(), ker.at(3, j).clone());
            rels.push(col);
        }
    }
    FpModule::new(s.ring.clone(), gens, rels)
}

/// Hermite form of the flattened relation lattice.
pub fn relation_lattice(m: &FpModule) -> Result<Mat> {
    Ok(hnf_cols(&m.flatten()?.rels))
}
