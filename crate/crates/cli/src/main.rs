//! profinite: finite-quotient fingerprints, comparisons, invariants, genus
//! tables, the BS(1,n) survivor scan, and ideal-adic computations for
//! finitely presented modules, with deterministic JSON reports.

mod cache;
mod io;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use profinite_core::adic::{adic_truncation, crt_decompose, hensel_invert};
use profinite_core::bs::{expected_survivors, rigidity_scan};
use profinite_core::genus::genus_candidates;
use profinite_core::invariants::{
    invariant_report, invariant_report_steinitz, AnnihilatorValue, ProjectivityVerdict,
};
use profinite_core::quotients::fingerprint;
use profinite_core::EngineConfig;

use crate::cache::{FingerprintCache, CACHE_ENV_VAR};
use crate::io::{
    emit_steinitz_value, module_hash, parse_elem_arg, parse_ideal_arg, parse_module_file,
    parse_ring, ModuleFile, ParsedModule,
};

#[derive(Parser)]
#[command(
    name = "profinite",
    version,
    about = "Finite-quotient fingerprints and profinite invariants of finitely presented modules"
)]
struct Cli {
    /// Fingerprint cache file (defaults to $PROFINITE_CACHE when set).
    #[arg(long, global = true, value_name = "FILE")]
    cache: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Hard cap on the order of any single finite quotient handled exactly.
    #[arg(long, global = true, default_value_t = 256)]
    ceiling: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the isomorphism classes of finite quotients up to an order bound.
    Fingerprint {
        module: PathBuf,
        #[arg(long)]
        bound: u64,
    },
    /// Compare two modules' quotient class sets at a bound.
    ///
    /// Exit code 0: indistinguishable up to the bound; 1: distinguished,
    /// with a witness class; 2: usage or data errors.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        bound: u64,
    },
    /// Annihilator, local generator counts, and the projectivity verdict.
    Invariants {
        module: PathBuf,
        /// Check localizations at all maximal ideals of norm up to this.
        #[arg(long, default_value_t = 25)]
        norm_bound: u64,
    },
    /// Genus candidate table over an imaginary quadratic order.
    Genus {
        module: PathBuf,
        /// Fingerprint bound for the indistinguishability cross-check.
        #[arg(long)]
        bound: u64,
    },
    /// Scan coprime pairs for the BS(1,n) multiplicative-order test.
    ///
    /// Exit code 0 when the survivors match the predicted set, 3 when
    /// unexpected survivors remain (a finding, not an error).
    #[command(name = "bs-scan")]
    BsScan {
        #[arg(long)]
        n: i64,
        #[arg(long)]
        height: u64,
        #[arg(long)]
        prime_bound: u64,
    },
    /// Ideal-adic truncations, CRT decomposition, and unit inversion.
    Adic {
        #[command(subcommand)]
        cmd: AdicCmd,
    },
}

#[derive(Subcommand)]
enum AdicCmd {
    /// The finite quotient M / I^k M.
    Truncate {
        module: PathBuf,
        /// Maximal ideal as JSON, e.g. '{"gen":2}' or '{"p":3,"f":[...]}'.
        #[arg(long)]
        ideal: String,
        #[arg(long)]
        level: u32,
    },
    /// Factor a modulus into prime-power parts and verify the product map.
    Crt {
        /// Ring tag: ZZ, ZZ[1/m], QO(d), or LZ.
        #[arg(long)]
        ring: String,
        /// Modulus ideal as JSON.
        #[arg(long)]
        modulus: String,
    },
    /// Invert a unit modulo I^k by Newton iteration.
    Hensel {
        #[arg(long)]
        ring: String,
        #[arg(long)]
        ideal: String,
        #[arg(long)]
        level: u32,
        /// Element as JSON: an integer, [a, b], or a term list.
        #[arg(long)]
        elem: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let mut cache = match cache_path(&cli) {
        Some(p) => FingerprintCache::open(&p),
        None => FingerprintCache::disabled(),
    };
    let code = dispatch(&cli, &mut cache)?;
    cache.save()?;
    Ok(code)
}

fn cache_path(cli: &Cli) -> Option<PathBuf> {
    cli.cache
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV_VAR).map(PathBuf::from))
}

fn dispatch(cli: &Cli, cache: &mut FingerprintCache) -> Result<u8> {
    match &cli.cmd {
        Cmd::Fingerprint { module, bound } => cmd_fingerprint(cli, cache, module, *bound),
        Cmd::Compare { a, b, bound } => cmd_compare(cli, cache, a, b, *bound),
        Cmd::Invariants { module, norm_bound } => cmd_invariants(cli, module, *norm_bound),
        Cmd::Genus { module, bound } => cmd_genus(cli, module, *bound),
        Cmd::BsScan { n, height, prime_bound } => cmd_bs_scan(cli, *n, *height, *prime_bound),
        Cmd::Adic { cmd } => match cmd {
            AdicCmd::Truncate { module, ideal, level } => {
                cmd_adic_truncate(cli, module, ideal, *level)
            }
            AdicCmd::Crt { ring, modulus } => cmd_adic_crt(cli, ring, modulus),
            AdicCmd::Hensel { ring, ideal, level, elem } => {
                cmd_adic_hensel(cli, ring, ideal, *level, elem)
            }
        },
    }
}

fn load(path: &Path) -> Result<ModuleFile> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_module_file(&text).with_context(|| path.display().to_string())
}

fn engine_config(cli: &Cli, bound: u64) -> EngineConfig {
    EngineConfig { ceiling: cli.ceiling.max(bound) }
}

/// Sorted class list for a module file, through the cache when one is open.
fn fingerprint_classes(
    cli: &Cli,
    cache: &mut FingerprintCache,
    file: &ModuleFile,
    bound: u64,
) -> Result<Vec<String>> {
    let hash = module_hash(file)?;
    if let Some(hit) = cache.get(&hash, bound) {
        return Ok(hit.classes.clone());
    }
    let m = file.presentation()?;
    let fp = fingerprint(&m, bound, &engine_config(cli, bound))?;
    let classes: Vec<String> = fp.codes.iter().cloned().collect();
    cache.put(&hash, bound, classes.clone());
    Ok(classes)
}

fn print_report(format: Format, report: &Value, text: &str) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report)?),
        Format::Text => print!("{text}"),
    }
    Ok(())
}

fn cmd_fingerprint(
    cli: &Cli,
    cache: &mut FingerprintCache,
    module: &Path,
    bound: u64,
) -> Result<u8> {
    let file = load(module)?;
    let classes = fingerprint_classes(cli, cache, &file, bound)?;
    let mut report = json!({
        "bound": bound,
        "classes": classes,
        "count": classes.len(),
        "module_hash": module_hash(&file)?,
        "ring": file.ring.render(),
    });
    if let Some(l) = &file.label {
        report["label"] = json!(l);
    }
    let mut text = format!("{} quotient classes up to order {bound}:\n", classes.len());
    for c in &classes {
        text.push_str(&format!("  {c}\n"));
    }
    print_report(cli.format, &report, &text)?;
    Ok(0)
}

fn cmd_compare(
    cli: &Cli,
    cache: &mut FingerprintCache,
    a: &Path,
    b: &Path,
    bound: u64,
) -> Result<u8> {
    let fa = load(a)?;
    let fb = load(b)?;
    if fa.ring != fb.ring {
        bail!(
            "comparison across different rings ({} vs {})",
            fa.ring.render(),
            fb.ring.render()
        );
    }
    let ca: BTreeSet<String> =
        fingerprint_classes(cli, cache, &fa, bound)?.into_iter().collect();
    let cb: BTreeSet<String> =
        fingerprint_classes(cli, cache, &fb, bound)?.into_iter().collect();
    let side = |f: &ModuleFile| -> Result<Value> {
        let mut v = json!({ "module_hash": module_hash(f)? });
        if let Some(l) = &f.label {
            v["label"] = json!(l);
        }
        Ok(v)
    };
    let mut report = json!({
        "bound": bound,
        "first": side(&fa)?,
        "second": side(&fb)?,
    });
    if ca == cb {
        report["verdict"] = json!("indistinguishable-up-to");
        let text = format!("indistinguishable up to order {bound}\n");
        print_report(cli.format, &report, &text)?;
        return Ok(0);
    }
    // Prefer a witness present only in the second fingerprint.
    let (witness, witness_in_first) = match cb.difference(&ca).next() {
        Some(w) => (w.clone(), false),
        None => (ca.difference(&cb).next().unwrap().clone(), true),
    };
    report["verdict"] = json!("distinguished");
    report["witness"] = json!(witness);
    report["witness_in_first"] = json!(witness_in_first);
    let place = if witness_in_first { "first" } else { "second" };
    let text =
        format!("distinguished at bound {bound}: class {witness} appears only in the {place} module\n");
    print_report(cli.format, &report, &text)?;
    Ok(1)
}

fn cmd_invariants(cli: &Cli, module: &Path, norm_bound: u64) -> Result<u8> {
    let file = load(module)?;
    let rep = match &file.module {
        ParsedModule::Presentation(m) => invariant_report(m, norm_bound)?,
        ParsedModule::Steinitz(s) => invariant_report_steinitz(s, norm_bound)?,
    };
    let annihilator = match &rep.annihilator {
        AnnihilatorValue::Ideal(i) => json!({ "ideal": i.render() }),
        AnnihilatorValue::Unavailable(r) => json!({ "unavailable": r }),
    };
    let mu_table: Vec<Value> = rep
        .mu_table
        .iter()
        .map(|(i, mu)| json!({ "ideal": i.render(), "mu": mu }))
        .collect();
    let projectivity = match &rep.projectivity {
        ProjectivityVerdict::NotProjective { reason } => {
            json!({ "reason": reason, "status": "not-projective" })
        }
        ProjectivityVerdict::ProjectiveOfRank { rank, certified_up_to_norm } => json!({
            "certified_up_to_norm": certified_up_to_norm,
            "rank": rank,
            "status": "projective",
        }),
        ProjectivityVerdict::Unknown { reason } => {
            json!({ "reason": reason, "status": "unknown" })
        }
    };
    let report = json!({
        "annihilator": annihilator,
        "mu_table": mu_table,
        "norm_bound": rep.norm_bound,
        "projectivity": projectivity,
        "ring": file.ring.render(),
    });
    let mut text = String::new();
    text.push_str(&format!(
        "annihilator: {}\n",
        match &rep.annihilator {
            AnnihilatorValue::Ideal(i) => i.render(),
            AnnihilatorValue::Unavailable(r) => format!("unavailable ({r})"),
        }
    ));
    for (i, mu) in &rep.mu_table {
        text.push_str(&format!("mu at {}: {mu}\n", i.render()));
    }
    text.push_str(&format!(
        "projectivity: {}\n",
        match &rep.projectivity {
            ProjectivityVerdict::NotProjective { reason } => format!("not projective ({reason})"),
            ProjectivityVerdict::ProjectiveOfRank { rank, certified_up_to_norm } =>
                format!("projective of rank {rank} (norms up to {certified_up_to_norm})"),
            ProjectivityVerdict::Unknown { reason } => format!("unknown ({reason})"),
        }
    ));
    print_report(cli.format, &report, &text)?;
    Ok(0)
}

fn cmd_genus(cli: &Cli, module: &Path, bound: u64) -> Result<u8> {
    let file = load(module)?;
    let s = match &file.module {
        ParsedModule::Steinitz(s) => s.clone(),
        ParsedModule::Presentation(_) => bail!(
            "genus tables need Steinitz data: give {{\"steinitz\": {{\"torsion\": [...], \
             \"rank\": r, \"ideal\": ...}}}} in the module file"
        ),
    };
    let table = genus_candidates(&s, bound, &engine_config(cli, bound))?;
    let entries = table
        .entries
        .iter()
        .map(|e| {
            Ok(json!({
                "class": e.class_index,
                "form": [e.form.0, e.form.1, e.form.2],
                "indistinguishable": e.indistinguishable,
                "steinitz": emit_steinitz_value(&e.candidate)?,
            }))
        })
        .collect::<Result<Vec<Value>>>()?;
    let report = json!({
        "base": emit_steinitz_value(&table.base)?,
        "bound": table.bound,
        "class_number": table.group.h(),
        "discriminant": table.group.disc,
        "entries": entries,
        "ring": file.ring.render(),
    });
    let mut text = format!(
        "class number {} for discriminant {}\n",
        table.group.h(),
        table.group.disc
    );
    for e in &table.entries {
        text.push_str(&format!(
            "class {} form ({}, {}, {}): {}\n",
            e.class_index,
            e.form.0,
            e.form.1,
            e.form.2,
            if e.indistinguishable {
                format!("indistinguishable from the base up to {}", table.bound)
            } else {
                "distinguished from the base".to_string()
            }
        ));
    }
    print_report(cli.format, &report, &text)?;
    Ok(0)
}

fn cmd_bs_scan(cli: &Cli, n: i64, height: u64, prime_bound: u64) -> Result<u8> {
    let survivors = rigidity_scan(n, height, prime_bound)?;
    let expected = expected_survivors(n, height);
    let pair = |&(a, b): &(i64, i64)| json!([a, b]);
    let extra: Vec<&(i64, i64)> =
        survivors.iter().filter(|p| !expected.contains(p)).collect();
    let missing: Vec<&(i64, i64)> =
        expected.iter().filter(|p| !survivors.contains(p)).collect();
    let matches = extra.is_empty() && missing.is_empty();
    let report = json!({
        "expected": expected.iter().map(pair).collect::<Vec<_>>(),
        "extra": extra.iter().copied().map(pair).collect::<Vec<_>>(),
        "height": height,
        "match": matches,
        "missing": missing.iter().copied().map(pair).collect::<Vec<_>>(),
        "n": n,
        "prime_bound": prime_bound,
        "survivors": survivors.iter().map(pair).collect::<Vec<_>>(),
    });
    let mut text = format!("survivors for n = {n} (height {height}, primes to {prime_bound}):\n");
    for (a, b) in &survivors {
        text.push_str(&format!("  ({a}, {b})\n"));
    }
    text.push_str(if matches {
        "matches the predicted set\n"
    } else {
        "DOES NOT match the predicted set\n"
    });
    print_report(cli.format, &report, &text)?;
    Ok(if matches { 0 } else { 3 })
}

fn cmd_adic_truncate(cli: &Cli, module: &Path, ideal: &str, level: u32) -> Result<u8> {
    let file = load(module)?;
    let m = file.presentation()?;
    let ideal = parse_ideal_arg(&file.ring, ideal)?;
    let t = adic_truncation(&m, &ideal, level, &engine_config(cli, 0))?;
    let report = json!({
        "action": t.quotient.action,
        "factors": t.quotient.factors,
        "ideal": ideal.render(),
        "level": level,
        "order": t.quotient.order().to_string(),
        "ring": file.ring.render(),
    });
    let text = format!(
        "truncation at {}^{level}: invariant factors {:?}, order {}\n",
        ideal.render(),
        t.quotient.factors,
        t.quotient.order()
    );
    print_report(cli.format, &report, &text)?;
    Ok(0)
}

fn cmd_adic_crt(cli: &Cli, ring: &str, modulus: &str) -> Result<u8> {
    let ring = parse_ring(ring)?;
    let modulus = parse_ideal_arg(&ring, modulus)?;
    let d = crt_decompose(&ring, &modulus, &engine_config(cli, 0))?;
    let factors = d
        .factors
        .iter()
        .map(|t| {
            json!({
                "factors": t.quotient.factors,
                "ideal": t.ideal.render(),
                "level": t.level,
                "order": t.quotient.order().to_string(),
            })
        })
        .collect::<Vec<_>>();
    let report = json!({
        "factors": factors,
        "modulus": modulus.render(),
        "ring": ring.render(),
        "verified": d.verified,
    });
    let mut text = format!("decomposition of {}:\n", modulus.render());
    for t in &d.factors {
        text.push_str(&format!(
            "  {}^{} of order {}\n",
            t.ideal.render(),
            t.level,
            t.quotient.order()
        ));
    }
    text.push_str(if d.verified {
        "product map verified bijective\n"
    } else {
        "product map not verified (over the ceiling)\n"
    });
    print_report(cli.format, &report, &text)?;
    Ok(0)
}

fn cmd_adic_hensel(cli: &Cli, ring: &str, ideal: &str, level: u32, elem: &str) -> Result<u8> {
    let ring = parse_ring(ring)?;
    let ideal = parse_ideal_arg(&ring, ideal)?;
    let elem = parse_elem_arg(&ring, elem)?;
    let inverse = hensel_invert(&ring, &ideal, level, &elem)?;
    let report = json!({
        "element": elem.render(),
        "ideal": ideal.render(),
        "inverse": inverse.render(),
        "level": level,
        "ring": ring.render(),
    });
    let text = format!(
        "({})^-1 = {} mod {}^{level}\n",
        elem.render(),
        inverse.render(),
        ideal.render()
    );
    print_report(cli.format, &report, &text)?;
    Ok(0)
}
