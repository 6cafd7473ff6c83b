//! Subcommand bodies. Each returns a JSON value; the binary prints it.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use tplab_core::census::{
    cycle_span_of_02_minors, defect_census, enumerate_bstar_witnesses, enumerate_identity_minors, minor_type_census,
    rectangle_multiplicity, sample_bstar_witness, CensusOptions,
};
use tplab_core::holonomy::{bridge_cycle, cycle_holonomy, factorize_labels, find_bridge_lines, three_chart_cycle, Factorization, LabeledZeroGraph};
use tplab_core::patterns::{census_03, census_by_type};
use tplab_core::plane::{graph_diameter, ingest_plane};
use tplab_core::residue::{cross_ratio, witness_equation_checks};
use tplab_core::{build_pg2, canonical_residue_model, nonincidence_graph, Error, ProjectivePlane, ResidueModel};

/// Adds the rerun hint to scan-cap errors.
fn guide(e: Error) -> anyhow::Error {
    match e {
        Error::ScanTooLarge(q) => anyhow::anyhow!(
            "SCAN_TOO_LARGE: a full scan at q={q} is above the default cap of q=4; rerun with --allow-long (supported up to q=5)"
        ),
        other => other.into(),
    }
}

/// A plane from `--plane PATH` or `--q Q`.
pub fn load_plane(path: Option<&Path>, q: Option<usize>) -> Result<Arc<ProjectivePlane>> {
    match (path, q) {
        (Some(p), None) => Ok(ingest_plane(p)?),
        (None, Some(q)) => Ok(build_pg2(q)?),
        (Some(_), Some(_)) => bail!("pass either --plane or --q, not both"),
        (None, None) => bail!("a plane is required: pass --plane PATH or --q Q"),
    }
}

/// The model stored at `path`, or the canonical one when no path is given.
pub fn load_model(plane: &Arc<ProjectivePlane>, path: Option<&Path>) -> Result<ResidueModel> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ResidueModel::parse(&text, plane.clone())?)
        }
        None => canonical_residue_model(plane)
            .context("the canonical model needs a plane built with --q; pass --model for a plane read from a file"),
    }
}

pub fn pg2(q: usize, out: Option<&Path>) -> Result<(Value, String)> {
    let plane = build_pg2(q)?;
    let text = plane.dump();
    if let Some(p) = out {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok((json!({ "q": q, "points": plane.size(), "out": out.map(|p| p.display().to_string()) }), text))
}

pub fn ingest_check(path: &Path) -> Result<Value> {
    let plane = ingest_plane(path)?;
    let zg = nonincidence_graph(&plane);
    Ok(json!({
        "q": plane.order(),
        "points": plane.size(),
        "valid": true,
        "nonincidenceDiameter": graph_diameter(&zg).ok(),
    }))
}

pub struct CensusFlags {
    pub types: bool,
    pub cycles: bool,
    pub degenerate: bool,
    pub span: bool,
    pub allow_long: bool,
}

pub fn census(plane: &Arc<ProjectivePlane>, flags: &CensusFlags) -> Result<Value> {
    let opts = CensusOptions {
        allow_long: flags.allow_long,
        cycle_types: flags.cycles,
        degenerate_stats: flags.degenerate,
        ..Default::default()
    };
    let c = minor_type_census(plane, &opts).map_err(guide)?;
    let mut out = json!({ "q": c.q, "totalMinors": c.total_minors });
    if flags.types || !(flags.cycles || flags.degenerate || flags.span) {
        let types: BTreeMap<String, u64> = c.counts.iter().map(|t| (format!("({},{})", t.min_weight, t.minimizers), t.count)).collect();
        out["types"] = json!(types);
    }
    if let Some([c4, c6, c8]) = c.cycle_lengths {
        out["cycles02"] = json!({ "length4": c4, "length6": c6, "length8": c8 });
    }
    if let Some(d) = &c.degenerate {
        out["degenerate"] = json!(d);
    }
    if flags.span {
        let s = cycle_span_of_02_minors(plane, flags.allow_long, 16).map_err(guide)?;
        out["cycleSpan"] = json!(s);
    }
    Ok(out)
}

pub fn patterns(histogram: bool) -> Result<Value> {
    let c = census_03();
    let orbits: Vec<Value> = c
        .orbits
        .iter()
        .map(|o| json!({ "canonicalForm": o.canonical_form.to_string(), "bits": o.canonical_form.0, "orbitSize": o.orbit_size, "hasDiamond": o.has_diamond }))
        .collect();
    let mut out = json!({
        "raw03Count": c.raw03_count,
        "orbitCount": c.orbit_count,
        "diamondOrbitCount": c.diamond_orbit_count,
        "rawDiamondCount": c.raw_diamond_count,
        "rawNonDiamondCount": c.raw_non_diamond_count,
        "exceptionalCanonical": c.exceptional_canonical.to_string(),
        "orbits": orbits,
    });
    if histogram {
        out["zeroMatchingHistogram"] = json!(census_by_type());
    }
    Ok(out)
}

pub fn witnesses(plane: &Arc<ProjectivePlane>, samples: Option<usize>, seed: u64) -> Result<Value> {
    match samples {
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ws = (0..n).map(|_| sample_bstar_witness(plane, &mut rng)).collect::<tplab_core::Result<Vec<_>>>()?;
            Ok(json!({ "q": plane.order(), "sampled": ws }))
        }
        None => Ok(json!(enumerate_bstar_witnesses(plane)?)),
    }
}

pub fn identity(plane: &Arc<ProjectivePlane>, full_scan: bool, multiplicity: bool, allow_long: bool) -> Result<Value> {
    let mut out = json!({ "identity": enumerate_identity_minors(plane, full_scan)? });
    if plane.order() < 3 {
        out["note"] = json!("no constructive identity minors when q-2 = 0");
    }
    if multiplicity {
        out["multiplicity"] = json!(rectangle_multiplicity(plane, allow_long).map_err(guide)?);
    }
    Ok(out)
}

pub fn residue_check(model: &ResidueModel, samples: usize, seed: u64, defects: bool, allow_long: bool) -> Result<Value> {
    let plane = model.plane();
    let rank = model.rank();
    let mut out = json!({ "q": plane.order(), "characteristic": model.field().characteristic(), "rank": rank });
    if plane.order() >= 3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws = (0..samples).map(|_| sample_bstar_witness(plane, &mut rng)).collect::<tplab_core::Result<Vec<_>>>()?;
        let (mut eq, mut sum, mut rho) = (0u64, 0u64, 0u64);
        let mut asserted = true;
        let mut rho_asserted = true;
        for w in &ws {
            let c = witness_equation_checks(model, w)?;
            eq += c.witness_equation as u64;
            sum += c.rho_plus_sigma as u64;
            rho += c.rho_not_one as u64;
            asserted = c.asserted;
            rho_asserted = c.rho_not_one_asserted;
        }
        out["witnessChecks"] = json!({
            "samples": ws.len(),
            "witnessEquationHolds": eq,
            "rhoPlusSigmaIsOne": sum,
            "rhoNotOne": rho,
            "asserted": asserted,
            "rhoNotOneAsserted": rho_asserted,
        });
    }
    if defects {
        out["defects"] = json!(defect_census(model, allow_long).map_err(guide)?);
    }
    Ok(out)
}

pub fn holonomy(model: &ResidueModel) -> Result<Value> {
    let g = LabeledZeroGraph::from_model(model);
    Ok(match factorize_labels(&g)? {
        Factorization::Potentials { alpha, beta } => json!({
            "factorizes": true,
            "alpha": alpha.iter().map(|a| a.map(|x| model.field().format_elem(x))).collect::<Vec<_>>(),
            "beta": beta.iter().map(|b| b.map(|x| model.field().format_elem(x))).collect::<Vec<_>>(),
        }),
        Factorization::Failing(c) => {
            let h = cycle_holonomy(&g, &c)?;
            json!({ "factorizes": false, "cycle": c, "holonomy": model.field().format_elem(h) })
        }
    })
}

pub fn atlas(model: &ResidueModel, samples: usize, seed: u64) -> Result<Value> {
    let plane = model.plane();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut three_ok, mut three_exhausted, mut bridge_ok, mut bridge_missing, mut nontrivial) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for _ in 0..samples {
        let w = sample_bstar_witness(plane, &mut rng)?;
        match three_chart_cycle(plane, &w) {
            Ok(c) if c.certify(&w) => three_ok += 1,
            Ok(_) => {}
            Err(Error::SearchExhausted) => three_exhausted += 1,
            Err(e) => return Err(e.into()),
        }
        match find_bridge_lines(plane, &w) {
            Ok((t, s)) => {
                let r = bridge_cycle(model, &w, t, s)?;
                let (a, b, l0, l1) = w.rectangle();
                bridge_ok += (r.all_ok() && r.holonomy == cross_ratio(model, a, b, l0, l1)?) as u64;
                nontrivial += (r.holonomy != tplab_core::Elem::ONE) as u64;
            }
            Err(Error::NoValidBridge) => bridge_missing += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(json!({
        "q": plane.order(),
        "samples": samples,
        "threeChartCertified": three_ok,
        "threeChartExhausted": three_exhausted,
        "bridgeIdentitiesHold": bridge_ok,
        "bridgeUnavailable": bridge_missing,
        "nontrivialBridgeHolonomy": nontrivial,
    }))
}

pub fn dump_model(model: &ResidueModel, out: Option<&Path>) -> Result<(Value, String)> {
    let text = model.dump();
    if let Some(p) = out {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok((json!({ "q": model.plane().order(), "rank": model.rank(), "out": out.map(|p| p.display().to_string()) }), text))
}
