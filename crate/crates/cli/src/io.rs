//! JSON module files: parsing with path-annotated errors, canonical
//! emission (alphabetical keys, fixed nesting), and content hashing.
//!
//! A module file is a single JSON object:
//!
//! ```json
//! {
//!   "ring": "ZZ" | "ZZ[1/m]" | "QO(d)" | "LZ",
//!   "label": "optional name",
//!   "gens": 2, "rel": [[entry, entry], ...],        // presentation form
//!   "steinitz": {"torsion": [{"ideal": I, "k": 1}], // or Steinitz form
//!                "rank": 2, "ideal": I},
//!   "expected": { ... }                              // preserved verbatim
//! }
//! ```
//!
//! Matrix entries: integers (ZZ, ZZ[1/m]); integers or `[a, b]` for a + b w
//! (QO); term lists `[{"x": e, "c": c}, ...]` with nonzero coefficients
//! (LZ). Single-generator relations over LZ may be written as the bare term
//! list, and over QO as the bare `[a, b]` pair. Ideals: `{"gen": g}`,
//! `{"p": p, "f": [terms]}`, or `{"hnf": [[a, b], [0, c]], "den": k}`.

use anyhow::{anyhow, bail, Result};
use num_bigint::BigInt;
use num_traits::Zero;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use profinite_core::arith::factorize;
use profinite_core::module::{steinitz_to_presentation, FpModule, SteinitzModule};
use profinite_core::ring::{
    laurent_normalize_generator, quad_ideal_span, residue_field, Ideal, RingElem, RingSpec,
};

#[derive(Clone, Debug)]
pub enum ParsedModule {
    Presentation(FpModule),
    Steinitz(SteinitzModule),
}

#[derive(Clone, Debug)]
pub struct ModuleFile {
    pub ring: RingSpec,
    pub label: Option<String>,
    pub module: ParsedModule,
    /// Free-form block preserved for regression tooling; no semantics here.
    pub expected: Option<Value>,
}

impl ModuleFile {
    /// The presentation behind the file, realizing Steinitz data explicitly.
    pub fn presentation(&self) -> Result<FpModule> {
        match &self.module {
            ParsedModule::Presentation(m) => Ok(m.clone()),
            ParsedModule::Steinitz(s) => Ok(steinitz_to_presentation(s)?),
        }
    }
}

pub fn parse_ring(tag: &str) -> Result<RingSpec> {
    let ring = if tag == "ZZ" {
        RingSpec::ZZ
    } else if tag == "LZ" {
        RingSpec::LaurentZ
    } else if let Some(d) = tag.strip_prefix("QO(").and_then(|s| s.strip_suffix(')')) {
        let d: i64 = d.parse().map_err(|_| anyhow!("bad discriminant in {tag:?}"))?;
        RingSpec::QuadOrder(d)
    } else if let Some(m) = tag.strip_prefix("ZZ[1/").and_then(|s| s.strip_suffix(']')) {
        let m: u64 = m.parse().map_err(|_| anyhow!("bad inverted modulus in {tag:?}"))?;
        if m < 2 {
            bail!("inverted modulus must be at least 2");
        }
        let fac = factorize(m);
        if fac.iter().any(|&(_, e)| e > 1) {
            bail!("inverted modulus {m} must be a squarefree product of primes");
        }
        RingSpec::ZZLoc(fac.into_iter().map(|(p, _)| p).collect())
    } else {
        bail!("unrecognized ring tag {tag:?} (expected ZZ, ZZ[1/m], QO(d), or LZ)");
    };
    ring.validate()?;
    Ok(ring)
}

pub fn parse_module_file(text: &str) -> Result<ModuleFile> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| anyhow!("$: invalid JSON: {e}"))?;
    let obj = as_object(&root, "$")?;
    for key in obj.keys() {
        if !matches!(
            key.as_str(),
            "ring" | "label" | "gens" | "rel" | "steinitz" | "expected"
        ) {
            bail!("$.{key}: unknown key");
        }
    }
    let ring_tag = as_str(require(obj, "ring", "$")?, "$.ring")?;
    let ring = parse_ring(ring_tag).map_err(|e| anyhow!("$.ring: {e}"))?;
    let label = match obj.get("label") {
        Some(v) => Some(as_str(v, "$.label")?.to_string()),
        None => None,
    };
    let expected = obj.get("expected").cloned();
    let has_presentation = obj.contains_key("gens") || obj.contains_key("rel");
    let module = match (has_presentation, obj.contains_key("steinitz")) {
        (true, true) => bail!("$: give either gens/rel or steinitz, not both"),
        (false, false) => bail!("$: missing module data (gens/rel or steinitz)"),
        (true, false) => ParsedModule::Presentation(parse_presentation(&ring, obj)?),
        (false, true) => ParsedModule::Steinitz(parse_steinitz(
            &ring,
            obj.get("steinitz").unwrap(),
            "$.steinitz",
        )?),
    };
    Ok(ModuleFile { ring, label, module, expected })
}

fn parse_presentation(ring: &RingSpec, obj: &Map<String, Value>) -> Result<FpModule> {
    let gens = as_u64(require(obj, "gens", "$")?, "$.gens")? as usize;
    let mut rels = Vec::new();
    if let Some(rv) = obj.get("rel") {
        let arr = as_array(rv, "$.rel")?;
        for (i, r) in arr.iter().enumerate() {
            rels.push(parse_relation(ring, gens, r, &format!("$.rel[{i}]"))?);
        }
    }
    FpModule::new(ring.clone(), gens, rels).map_err(|e| anyhow!("$: {e}"))
}

fn parse_relation(
    ring: &RingSpec,
    gens: usize,
    v: &Value,
    path: &str,
) -> Result<Vec<RingElem>> {
    let arr = as_array(v, path)?;
    if gens == 1 {
        // Single-generator shorthand: the relation is the entry itself.
        match ring {
            RingSpec::LaurentZ if arr.is_empty() || arr.iter().all(Value::is_object) => {
                return Ok(vec![parse_entry(ring, v, path)?]);
            }
            RingSpec::QuadOrder(_) if arr.len() == 2 && arr.iter().all(Value::is_i64) => {
                return Ok(vec![parse_entry(ring, v, path)?]);
            }
            _ => {}
        }
    }
    if arr.len() != gens {
        bail!("{path}: relation has {} entries, expected {gens}", arr.len());
    }
    arr.iter()
        .enumerate()
        .map(|(j, e)| parse_entry(ring, e, &format!("{path}[{j}]")))
        .collect()
}

fn parse_entry(ring: &RingSpec, v: &Value, path: &str) -> Result<RingElem> {
    match ring {
        RingSpec::ZZ | RingSpec::ZZLoc(_) => Ok(RingElem::from_int(ring, as_i64(v, path)?)),
        RingSpec::QuadOrder(_) => {
            if let Some(n) = v.as_i64() {
                return Ok(RingElem::from_int(ring, n));
            }
            if let Some(arr) = v.as_array() {
                if arr.len() == 2 {
                    let a = as_i64(&arr[0], &format!("{path}[0]"))?;
                    let b = as_i64(&arr[1], &format!("{path}[1]"))?;
                    return Ok(RingElem::quad(a, b));
                }
            }
            bail!("{path}: expected an integer or an [a, b] pair")
        }
        RingSpec::LaurentZ => {
            let arr = as_array(v, path)?;
            let mut terms = Vec::new();
            for (j, t) in arr.iter().enumerate() {
                terms.push(parse_term(t, &format!("{path}[{j}]"))?);
            }
            Ok(RingElem::laurent(&terms))
        }
    }
}

/// One `{"x": exponent, "c": coefficient}` term; coefficients nonzero.
fn parse_term(v: &Value, path: &str) -> Result<(i64, i64)> {
    let obj = as_object(v, path)?;
    for key in obj.keys() {
        if key != "x" && key != "c" {
            bail!("{path}.{key}: unknown key in term (want x, c)");
        }
    }
    let x = as_i64(require(obj, "x", path)?, &format!("{path}.x"))?;
    let c = as_i64(require(obj, "c", path)?, &format!("{path}.c"))?;
    if c == 0 {
        bail!("{path}.c: term coefficients must be nonzero");
    }
    Ok((x, c))
}

fn parse_steinitz(ring: &RingSpec, v: &Value, path: &str) -> Result<SteinitzModule> {
    if !matches!(ring, RingSpec::QuadOrder(_)) {
        bail!("{path}: Steinitz data is only defined over QO(d) rings");
    }
    let obj = as_object(v, path)?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "torsion" | "rank" | "ideal") {
            bail!("{path}.{key}: unknown key");
        }
    }
    let rank = as_u64(require(obj, "rank", path)?, &format!("{path}.rank"))? as usize;
    let mut torsion = Vec::new();
    if let Some(tv) = obj.get("torsion") {
        let arr = as_array(tv, &format!("{path}.torsion"))?;
        for (i, t) in arr.iter().enumerate() {
            let tpath = format!("{path}.torsion[{i}]");
            let tobj = as_object(t, &tpath)?;
            for key in tobj.keys() {
                if key != "ideal" && key != "k" {
                    bail!("{tpath}.{key}: unknown key (want ideal, k)");
                }
            }
            let ideal =
                parse_ideal(ring, require(tobj, "ideal", &tpath)?, &format!("{tpath}.ideal"))?;
            residue_field(ring, &ideal)
                .map_err(|e| anyhow!("{tpath}.ideal: torsion ideal must be maximal: {e}"))?;
            let k = as_u64(require(tobj, "k", &tpath)?, &format!("{tpath}.k"))? as u32;
            if k == 0 {
                bail!("{tpath}.k: exponent must be positive");
            }
            torsion.push((ideal, k));
        }
    }
    let ideal = match obj.get("ideal") {
        Some(iv) => {
            let ideal = parse_ideal(ring, iv, &format!("{path}.ideal"))?;
            if rank == 0 && !ideal.is_unit(ring) {
                bail!("{path}.ideal: a rank-zero module carries no ideal class");
            }
            ideal
        }
        None => Ideal::unit(ring),
    };
    let s = SteinitzModule { ring: ring.clone(), torsion, rank, ideal };
    steinitz_to_presentation(&s).map_err(|e| anyhow!("{path}: {e}"))?;
    Ok(s)
}

pub fn parse_ideal(ring: &RingSpec, v: &Value, path: &str) -> Result<Ideal> {
    let obj = as_object(v, path)?;
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    let ideal = if obj.contains_key("gen") {
        if keys.iter().any(|&k| k != "gen") {
            bail!("{path}: a principal ideal takes only the key gen");
        }
        let gv = obj.get("gen").unwrap();
        let gpath = format!("{path}.gen");
        match ring {
            RingSpec::ZZ | RingSpec::ZZLoc(_) => {
                let n = as_i64(gv, &gpath)?;
                if n == 0 {
                    Ideal::Zero
                } else {
                    Ideal::Int(BigInt::from(n.abs()))
                }
            }
            RingSpec::QuadOrder(_) => {
                let e = parse_entry(ring, gv, &gpath)?;
                quad_ideal_span(ring, &[e])
            }
            RingSpec::LaurentZ => {
                let e = if gv.is_i64() {
                    RingElem::laurent(&[(0, as_i64(gv, &gpath)?)])
                } else {
                    parse_entry(ring, gv, &gpath)?
                };
                if e.is_zero() {
                    Ideal::Zero
                } else {
                    Ideal::LaurentPoly(laurent_normalize_generator(&e))
                }
            }
        }
    } else if obj.contains_key("p") || obj.contains_key("f") {
        if !matches!(ring, RingSpec::LaurentZ) {
            bail!("{path}: the {{p, f}} ideal shape is specific to LZ");
        }
        if keys.iter().any(|&k| k != "p" && k != "f") {
            bail!("{path}: a {{p, f}} ideal takes only the keys p and f");
        }
        let p = as_u64(require(obj, "p", path)?, &format!("{path}.p"))?;
        let fv = as_array(require(obj, "f", path)?, &format!("{path}.f"))?;
        let mut terms = Vec::new();
        for (j, t) in fv.iter().enumerate() {
            let tpath = format!("{path}.f[{j}]");
            let (x, c) = parse_term(t, &tpath)?;
            if x < 0 {
                bail!("{tpath}.x: the polynomial part cannot have negative exponents");
            }
            terms.push((x as usize, c));
        }
        let deg = terms.iter().map(|&(x, _)| x).max().unwrap_or(0);
        let mut f = vec![0u64; deg + 1];
        if p < 2 {
            bail!("{path}.p: expected a prime");
        }
        for (x, c) in terms {
            f[x] = (f[x] + c.rem_euclid(p as i64) as u64) % p;
        }
        while f.len() > 1 && *f.last().unwrap() == 0 {
            f.pop();
        }
        Ideal::LaurentPF { p, f }
    } else if obj.contains_key("hnf") {
        if !matches!(ring, RingSpec::QuadOrder(_)) {
            bail!("{path}: the {{hnf}} ideal shape is specific to QO(d)");
        }
        if keys.iter().any(|&k| k != "hnf" && k != "den") {
            bail!("{path}: an hnf ideal takes only the keys hnf and den");
        }
        let rows = as_array(obj.get("hnf").unwrap(), &format!("{path}.hnf"))?;
        if rows.len() != 2 {
            bail!("{path}.hnf: expected two rows [[a, b], [0, c]]");
        }
        let mut m = [[0i64; 2]; 2];
        for (i, rv) in rows.iter().enumerate() {
            let row = as_array(rv, &format!("{path}.hnf[{i}]"))?;
            if row.len() != 2 {
                bail!("{path}.hnf[{i}]: expected two entries");
            }
            for (j, e) in row.iter().enumerate() {
                m[i][j] = as_i64(e, &format!("{path}.hnf[{i}][{j}]"))?;
            }
        }
        if m[1][0] != 0 {
            bail!("{path}.hnf[1][0]: the basis must be upper triangular (0 here)");
        }
        let den = match obj.get("den") {
            Some(dv) => as_i64(dv, &format!("{path}.den"))?,
            None => 1,
        };
        if den < 1 {
            bail!("{path}.den: denominator must be positive");
        }
        Ideal::Quad {
            a: BigInt::from(m[0][0]),
            b: BigInt::from(m[0][1]),
            c: BigInt::from(m[1][1]),
            den: BigInt::from(den),
        }
    } else {
        bail!("{path}: expected an ideal: {{\"gen\"}}, {{\"p\", \"f\"}}, or {{\"hnf\"}}");
    };
    ideal.validate(ring).map_err(|e| anyhow!("{path}: {e}"))?;
    Ok(ideal)
}

/// Parse a command-line JSON argument as a ring element.
pub fn parse_elem_arg(ring: &RingSpec, text: &str) -> Result<RingElem> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| anyhow!("elem: invalid JSON: {e}"))?;
    parse_entry(ring, &v, "elem")
}

/// Parse a command-line JSON argument as an ideal.
pub fn parse_ideal_arg(ring: &RingSpec, text: &str) -> Result<Ideal> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| anyhow!("ideal: invalid JSON: {e}"))?;
    parse_ideal(ring, &v, "ideal")
}

// ---------------------------------------------------------------------------
// Canonical emission
// ---------------------------------------------------------------------------

pub fn emit_module_file(f: &ModuleFile) -> Result<String> {
    let mut obj = Map::new();
    if let Some(e) = &f.expected {
        obj.insert("expected".to_string(), e.clone());
    }
    match &f.module {
        ParsedModule::Presentation(m) => {
            obj.insert("gens".to_string(), Value::from(m.gens as u64));
            if let Some(l) = &f.label {
                obj.insert("label".to_string(), Value::from(l.clone()));
            }
            let rels = m
                .rels
                .iter()
                .map(|r| emit_relation(&f.ring, m.gens, r))
                .collect::<Result<Vec<_>>>()?;
            obj.insert("rel".to_string(), Value::Array(rels));
        }
        ParsedModule::Steinitz(s) => {
            if let Some(l) = &f.label {
                obj.insert("label".to_string(), Value::from(l.clone()));
            }
            obj.insert("steinitz".to_string(), emit_steinitz_value(s)?);
        }
    }
    obj.insert("ring".to_string(), Value::from(f.ring.render()));
    Ok(serde_json::to_string_pretty(&Value::Object(obj))? + "\n")
}

pub fn emit_steinitz_value(s: &SteinitzModule) -> Result<Value> {
    let mut obj = Map::new();
    let ideal = emit_ideal_value(&s.ideal)?;
    obj.insert("ideal".to_string(), ideal);
    obj.insert("rank".to_string(), Value::from(s.rank as u64));
    let torsion = s
        .torsion
        .iter()
        .map(|(i, k)| {
            let mut t = Map::new();
            t.insert("ideal".to_string(), emit_ideal_value(i)?);
            t.insert("k".to_string(), Value::from(*k));
            Ok(Value::Object(t))
        })
        .collect::<Result<Vec<_>>>()?;
    obj.insert("torsion".to_string(), Value::Array(torsion));
    Ok(Value::Object(obj))
}

pub fn emit_ideal_value(i: &Ideal) -> Result<Value> {
    let mut obj = Map::new();
    match i {
        Ideal::Zero => {
            obj.insert("gen".to_string(), Value::from(0));
        }
        Ideal::Int(g) => {
            obj.insert("gen".to_string(), json_int(g)?);
        }
        Ideal::LaurentPoly(f) => {
            obj.insert("gen".to_string(), emit_entry(f)?);
        }
        Ideal::LaurentPF { p, f } => {
            let terms = f
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c != 0)
                .map(|(e, &c)| term_value(e as i64, c as i64))
                .collect();
            obj.insert("f".to_string(), Value::Array(terms));
            obj.insert("p".to_string(), Value::from(*p));
        }
        Ideal::Quad { a, b, c, den } => {
            if *den != BigInt::from(1) {
                obj.insert("den".to_string(), json_int(den)?);
            }
            let row0 = Value::Array(vec![json_int(a)?, json_int(b)?]);
            let row1 = Value::Array(vec![Value::from(0), json_int(c)?]);
            obj.insert("hnf".to_string(), Value::Array(vec![row0, row1]));
        }
    }
    Ok(Value::Object(obj))
}

fn emit_relation(ring: &RingSpec, gens: usize, rel: &[RingElem]) -> Result<Value> {
    if gens == 1 {
        // Mirror the single-generator shorthand accepted on input.
        match (ring, &rel[0]) {
            (RingSpec::LaurentZ, _) => return emit_entry(&rel[0]),
            (RingSpec::QuadOrder(_), RingElem::Quad(_, y)) if !y.is_zero() => {
                return emit_entry(&rel[0]);
            }
            _ => {}
        }
    }
    Ok(Value::Array(rel.iter().map(emit_entry).collect::<Result<Vec<_>>>()?))
}

fn emit_entry(e: &RingElem) -> Result<Value> {
    Ok(match e {
        RingElem::Int(n) => json_int(n)?,
        RingElem::Quad(x, y) => {
            if y.is_zero() {
                json_int(x)?
            } else {
                Value::Array(vec![json_int(x)?, json_int(y)?])
            }
        }
        RingElem::Laurent(terms) => {
            let mut out = Vec::new();
            for (x, c) in terms {
                let c = i64::try_from(c)
                    .map_err(|_| anyhow!("coefficient too large for emission"))?;
                out.push(term_value(*x, c));
            }
            Value::Array(out)
        }
    })
}

fn term_value(x: i64, c: i64) -> Value {
    let mut t = Map::new();
    t.insert("c".to_string(), Value::from(c));
    t.insert("x".to_string(), Value::from(x));
    Value::Object(t)
}

fn json_int(n: &BigInt) -> Result<Value> {
    let v: i64 = n
        .try_into()
        .map_err(|_| anyhow!("integer {n} too large for JSON emission"))?;
    Ok(Value::from(v))
}

/// Content hash of the canonical module serialization; labels and expected
/// blocks do not participate.
pub fn module_hash(f: &ModuleFile) -> Result<String> {
    let stripped = ModuleFile {
        ring: f.ring.clone(),
        label: None,
        module: f.module.clone(),
        expected: None,
    };
    let text = emit_module_file(&stripped)?;
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    Ok(format!("{:x}", h.finalize()))
}

// ---------------------------------------------------------------------------
// Value access with path-annotated errors
// ---------------------------------------------------------------------------

fn require<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| anyhow!("{path}.{key}: missing"))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| anyhow!("{path}: expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| anyhow!("{path}: expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| anyhow!("{path}: expected a string"))
}

fn as_i64(v: &Value, path: &str) -> Result<i64> {
    v.as_i64().ok_or_else(|| anyhow!("{path}: expected an integer"))
}

fn as_u64(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| anyhow!("{path}: expected a nonnegative integer"))
}
