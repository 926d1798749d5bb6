//! Shared module corpus for the integration suites.
//!
//! The corpus spans all four ring families and deliberately contains
//! clusters of distinct presentations with equal fingerprints (scrambled
//! relation matrices, unit-rescaled relations, block-sum rearrangements,
//! and the rank-two projectives over QO(-5) that witness a nontrivial
//! genus), alongside modules that are pairwise distinguishable.

// Each integration target uses its own subset of these helpers.
#![allow(dead_code)]

use std::collections::BTreeSet;

use profinite_core::module::{steinitz_to_presentation, FpModule, SteinitzModule};
use profinite_core::ring::{quad_ideal_span, Ideal, RingElem, RingSpec};
use profinite_core::EngineConfig;

pub fn cfg() -> EngineConfig {
    EngineConfig::default()
}

pub fn cfg_with_ceiling(ceiling: u64) -> EngineConfig {
    EngineConfig { ceiling }
}

pub fn qo5() -> RingSpec {
    RingSpec::QuadOrder(-5)
}

pub fn zloc2() -> RingSpec {
    RingSpec::ZZLoc([2u64].into_iter().collect::<BTreeSet<_>>())
}

/// The nonprincipal prime above 2 in QO(-5): (2, 1+w).
pub fn p2_ideal() -> Ideal {
    let ring = qo5();
    quad_ideal_span(&ring, &[RingElem::from_int(&ring, 2), RingElem::Quad(1.into(), 1.into())])
}

/// Integer-matrix presentation over any of the integer-like rings; `cols`
/// are relation columns, one entry per generator.
pub fn int_module(ring: &RingSpec, gens: usize, cols: &[&[i64]]) -> FpModule {
    let rels: Vec<Vec<RingElem>> = cols
        .iter()
        .map(|col| {
            assert_eq!(col.len(), gens);
            col.iter().map(|&v| RingElem::from_int(ring, v)).collect()
        })
        .collect();
    FpModule::new(ring.clone(), gens, rels).expect("valid presentation")
}

/// Cyclic Laurent module with one relation per listed polynomial.
pub fn laurent_cyclic(polys: &[&[(i64, i64)]]) -> FpModule {
    let rels: Vec<RingElem> = polys.iter().map(|terms| RingElem::laurent(terms)).collect();
    FpModule::cyclic(RingSpec::LaurentZ, &rels).expect("valid cyclic presentation")
}

/// Block direct sum of two presentations over the same ring.
pub fn direct_sum_presentation(a: &FpModule, b: &FpModule) -> FpModule {
    assert_eq!(a.ring, b.ring);
    let zero = RingElem::zero(&a.ring);
    let gens = a.gens + b.gens;
    let mut rels: Vec<Vec<RingElem>> = Vec::new();
    for col in &a.rels {
        let mut full = col.clone();
        full.extend(std::iter::repeat(zero.clone()).take(b.gens));
        rels.push(full);
    }
    for col in &b.rels {
        let mut full = vec![zero.clone(); a.gens];
        full.extend(col.iter().cloned());
        rels.push(full);
    }
    FpModule::new(a.ring.clone(), gens, rels).expect("valid block sum")
}

/// Rank-2 projective with Steinitz class of (2, 1+w) over QO(-5).
pub fn qo_lambda_plus_p2() -> SteinitzModule {
    SteinitzModule::new(qo5(), vec![], 2, p2_ideal()).expect("valid Steinitz data")
}

/// Free rank-2 module over QO(-5) in Steinitz form.
pub fn qo_free_rank2() -> SteinitzModule {
    let ring = qo5();
    let unit = quad_ideal_span(&ring, &[RingElem::from_int(&ring, 1)]);
    SteinitzModule::new(ring, vec![], 2, unit).expect("valid Steinitz data")
}

/// Named presentation corpus used by the acceptance and property suites.
pub fn corpus() -> Vec<(String, FpModule)> {
    let zz = RingSpec::ZZ;
    let zl = zloc2();
    let qo = qo5();
    let mut out: Vec<(String, FpModule)> = Vec::new();

    // --- Integers ---
    out.push(("zz-diag-6-4".into(), int_module(&zz, 2, &[&[6, 0], &[0, 4]])));
    // Same cokernel (invariant factors 2, 12) under a different matrix.
    out.push(("zz-6-4-scrambled".into(), int_module(&zz, 2, &[&[6, 6], &[4, 8]])));
    out.push(("zz-free-1".into(), FpModule::free(zz.clone(), 1)));
    out.push(("zz-zero".into(), int_module(&zz, 1, &[&[1]])));
    out.push(("zz-8".into(), int_module(&zz, 1, &[&[8]])));
    out.push(("zz-2-2".into(), int_module(&zz, 2, &[&[2, 0], &[0, 2]])));
    out.push(("zz-free-plus-3".into(), int_module(&zz, 2, &[&[0, 3]])));
    out.push(("zz-5".into(), int_module(&zz, 1, &[&[5]])));

    // --- Integers with 2 inverted ---
    out.push(("zloc2-3".into(), int_module(&zl, 1, &[&[3]])));
    // 12 = 4 * 3 and 4 is a unit, so this is the same cyclic module.
    out.push(("zloc2-12".into(), int_module(&zl, 1, &[&[12]])));
    // Redundant second generator killed by a unit relation.
    out.push(("zloc2-3-padded".into(), int_module(&zl, 2, &[&[3, 0], &[0, 1]])));
    out.push(("zloc2-free-1".into(), FpModule::free(zl.clone(), 1)));

    // --- Imaginary quadratic order QO(-5) ---
    out.push(("qo-free-1".into(), FpModule::free(qo.clone(), 1)));
    out.push(("qo-free-2".into(), FpModule::free(qo.clone(), 2)));
    out.push((
        "qo-lambda-p2".into(),
        steinitz_to_presentation(&qo_lambda_plus_p2()).expect("presentable"),
    ));
    // Lambda + (2) in syzygy form: the ideal (2) is principal, so this is
    // isomorphic to free rank 2 (and to P2 + P2, whose Steinitz class is
    // [P2]^2 = [(2)] = trivial) while presented on three generators.
    let two_ideal = quad_ideal_span(&qo, &[RingElem::from_int(&qo, 2)]);
    let lambda_plus_two = SteinitzModule::new(qo.clone(), vec![], 2, two_ideal).expect("valid");
    out.push((
        "qo-free-2-syzygy".into(),
        steinitz_to_presentation(&lambda_plus_two).expect("presentable"),
    ));
    // Torsion: Lambda/(3, 1+w) and Lambda/(2).
    out.push(("qo-mod-p3".into(), {
        let rels = vec![
            vec![RingElem::from_int(&qo, 3)],
            vec![RingElem::Quad(1.into(), 1.into())],
        ];
        FpModule::new(qo.clone(), 1, rels).expect("valid")
    }));
    out.push(("qo-mod-2".into(), int_module(&qo, 1, &[&[2]])));
    out.push(("qo-mod-p2-plus-free".into(), {
        let rels = vec![
            vec![RingElem::from_int(&qo, 2), RingElem::zero(&qo)],
            vec![RingElem::Quad(1.into(), 1.into()), RingElem::zero(&qo)],
        ];
        FpModule::new(qo.clone(), 2, rels).expect("valid")
    }));

    // --- Laurent ring Z[x, x^-1] ---
    // Multi-generator Laurent presentations are kept out of the corpus:
    // enumerating their quotient targets at bound 64 means walking the
    // full finite-module landscape of Z[x, x^-1] and takes minutes, while
    // every corpus consumer needs bound-64 fingerprints of each entry.
    out.push(("lz-x-minus-2".into(), laurent_cyclic(&[&[(1, 1), (0, -2)]])));
    // Same module under a redundant extra relation x(x-2).
    out.push((
        "lz-x-minus-2-redundant".into(),
        laurent_cyclic(&[&[(1, 1), (0, -2)], &[(2, 1), (1, -2)]]),
    ));
    out.push(("lz-x-minus-3".into(), laurent_cyclic(&[&[(1, 1), (0, -3)]])));
    out.push(("lz-2x-minus-3".into(), laurent_cyclic(&[&[(1, 2), (0, -3)]])));

    out
}

/// The ZZ and QO(-5) subset, the domain of the two enumeration strategies.
pub fn corpus_zz_qo() -> Vec<(String, FpModule)> {
    corpus()
        .into_iter()
        .filter(|(_, m)| matches!(m.ring, RingSpec::ZZ | RingSpec::QuadOrder(_)))
        .collect()
}
