//! The verification suite behind `verify-all` and the acceptance gate.
//!
//! Each criterion produces a list of check records. Expected values come from the
//! manifest; every random choice is drawn from a generator seeded by the suite seed.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Result;
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use tplab_core::census::{
    bstar_formula, cycle_span_of_02_minors, defect_census, degenerate_rectangles, degenerate_square_family_census,
    enumerate_bstar_witnesses, incidence_pattern, minor_type_census, multiplicity_bound, rectangle_multiplicity,
    sample_bstar_witness, CensusOptions, DefectReport, MinorTypeCensus, WitnessRecord, DEFAULT_SCAN_CAP, LONG_SCAN_CAP,
};
use tplab_core::gf::{jet_det, tie_depth_crossratio_check};
use tplab_core::holonomy::{
    alternating_product, bridge_cycle, cycle_holonomy, factorize_labels, find_bridge_lines, signed_cycle_holonomy,
    three_chart_cycle, EvenCycle, Factorization, LabeledZeroGraph,
};
use tplab_core::patterns::{canonical_form, census_03, EXCEPTIONAL_03};
use tplab_core::plane::graph_diameter;
use tplab_core::residue::{
    cross_ratio, derangement_sign_sum, initial_form, monomial_block_rank, overlap_elimination_check, psi4, tangent_first_order,
    theta4, turan_support_check, witness_equation_checks, Block4, IdentityBlockData, TangentFactorization,
};
use tplab_core::tropical::{cycle_between, tropical_profile};
use tplab_core::{
    build_pg2, canonical_residue_model, nonincidence_graph, CheckReport, Elem, Error, Field, Jet, Matrix, Pattern4,
    ProjectivePlane, ResidueModel, Status, Valuation,
};

use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteConfig {
    /// checks on planes of larger order are reported as skipped
    pub q_max: usize,
    pub seed: u64,
    /// lifts the scan cap from q=4 to q=5
    pub allow_long: bool,
}

impl SuiteConfig {
    pub const DEFAULT_SEED: u64 = 20240601;

    /// Every plane order the criteria mention, with long scans enabled.
    pub fn full(seed: u64) -> SuiteConfig {
        SuiteConfig { q_max: 9, seed, allow_long: true }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub status: Status,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl CriterionReport {
    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    pub fn failing_checks(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| c.failed())
    }
}

type CriterionFn = fn(&mut Ctx) -> Result<()>;

const CRITERIA: [(u8, &str, CriterionFn); 12] = [
    (1, "pattern atlas of (0,3) minors", pattern_atlas),
    (2, "PG(2,3) minor census", pg23_census),
    (3, "(0,2) censuses and cycle spans", census_02),
    (4, "nonincidence graph diameter", graph_diameters),
    (5, "B* witness enumeration", bstar_witnesses),
    (6, "derangement arithmetic", derangements),
    (7, "canonical-model consequences", canonical_consequences),
    (8, "jet-oracle properties", jet_oracles),
    (9, "holonomy and factorization", holonomy_suite),
    (10, "chart atlas and bridge cycles", atlas_bridge),
    (11, "rank machinery", rank_machinery),
    (12, "multiplicity and defect bounds", multiplicity_defects),
];

/// Criterion ids and titles in run order.
pub fn criteria() -> impl Iterator<Item = (u8, &'static str)> {
    CRITERIA.iter().map(|c| (c.0, c.1))
}

/// Runs one criterion; an error inside it becomes a failing record.
pub fn run_criterion(id: u8, cfg: &SuiteConfig, cache: &mut Cache) -> CriterionReport {
    let (_, title, f) = CRITERIA.iter().copied().find(|c| c.0 == id).expect("criterion ids are 1..=12");
    let start = Instant::now();
    let mut ctx = Ctx::new(id, cfg, cache);
    if let Err(e) = f(&mut ctx) {
        ctx.checks.push(CheckReport {
            check_name: format!("criterion{id}.error"),
            parameters: json!({}),
            expected: None,
            actual: Value::String(format!("{e:#}")),
            status: Status::Fail,
            elapsed_ms: None,
        });
    }
    let checks = std::mem::take(&mut ctx.checks);
    let status = if checks.iter().any(|c| c.failed()) {
        Status::Fail
    } else if checks.iter().any(|c| c.status == Status::Pass) {
        Status::Pass
    } else if checks.iter().all(|c| c.status == Status::Skipped) {
        Status::Skipped
    } else {
        Status::Informational
    };
    CriterionReport { id, title, status, checks, elapsed_ms: Some(start.elapsed().as_millis() as u64) }
}

/// All criteria in dependency order, sharing planes, models and censuses.
pub fn run_all(cfg: &SuiteConfig) -> Vec<CriterionReport> {
    let mut cache = Cache::default();
    CRITERIA.iter().map(|c| run_criterion(c.0, cfg, &mut cache)).collect()
}

/// Drops timing fields, for determinism comparisons.
pub fn strip_timing(reports: &mut [CriterionReport]) {
    for r in reports {
        r.elapsed_ms = None;
        for c in &mut r.checks {
            c.elapsed_ms = None;
        }
    }
}

/// Intermediate results reused across criteria.
#[derive(Default)]
pub struct Cache {
    planes: BTreeMap<usize, Arc<ProjectivePlane>>,
    models: BTreeMap<usize, Arc<ResidueModel>>,
    censuses: BTreeMap<usize, Arc<MinorTypeCensus>>,
    witnesses: BTreeMap<usize, Arc<Vec<WitnessRecord>>>,
    defects: BTreeMap<usize, Arc<DefectReport>>,
}

struct Ctx<'a> {
    cfg: SuiteConfig,
    manifest: &'static Manifest,
    cache: &'a mut Cache,
    checks: Vec<CheckReport>,
    rng: ChaCha8Rng,
    last: Instant,
}

impl<'a> Ctx<'a> {
    fn new(id: u8, cfg: &SuiteConfig, cache: &'a mut Cache) -> Self {
        Ctx {
            cfg: *cfg,
            manifest: Manifest::builtin(),
            cache,
            checks: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            last: Instant::now(),
        }
    }

    fn push(&mut self, r: CheckReport) {
        let ms = self.last.elapsed().as_millis() as u64;
        self.last = Instant::now();
        self.checks.push(r.with_elapsed(ms));
    }

    fn expect(&mut self, name: &str, params: Value, actual: impl Serialize) -> Result<()> {
        let expected = self.manifest.get(name)?.clone();
        let r = CheckReport::compare(name, params, expected, serde_json::to_value(actual)?);
        self.push(r);
        Ok(())
    }

    fn info(&mut self, name: &str, params: Value, actual: impl Serialize) -> Result<()> {
        let r = CheckReport::informational(name, params, serde_json::to_value(actual)?);
        self.push(r);
        Ok(())
    }

    fn skip(&mut self, name: &str, params: Value, reason: &str) {
        self.push(CheckReport::skipped(name, params, reason));
    }

    /// Why plane order q is out of scope for this run, if it is.
    fn out_of_scope(&self, q: usize, needs_scan: bool) -> Option<String> {
        if q > self.cfg.q_max {
            return Some(format!("q={q} is above --q-max {}", self.cfg.q_max));
        }
        let cap = if self.cfg.allow_long { LONG_SCAN_CAP } else { DEFAULT_SCAN_CAP };
        (needs_scan && q > cap).then(|| format!("full scan at q={q} needs --allow-long"))
    }

    /// Skips every named check when q is out of scope; returns whether to proceed.
    fn in_scope(&mut self, q: usize, needs_scan: bool, names: &[&str]) -> bool {
        match self.out_of_scope(q, needs_scan) {
            Some(reason) => {
                for n in names {
                    self.skip(n, json!({ "q": q }), &reason);
                }
                false
            }
            None => true,
        }
    }

    fn plane(&mut self, q: usize) -> Result<Arc<ProjectivePlane>> {
        if let Some(p) = self.cache.planes.get(&q) {
            return Ok(p.clone());
        }
        let p = build_pg2(q)?;
        self.cache.planes.insert(q, p.clone());
        Ok(p)
    }

    fn model(&mut self, q: usize) -> Result<Arc<ResidueModel>> {
        if let Some(m) = self.cache.models.get(&q) {
            return Ok(m.clone());
        }
        let m = Arc::new(canonical_residue_model(&self.plane(q)?)?);
        self.cache.models.insert(q, m.clone());
        Ok(m)
    }

    fn census(&mut self, q: usize) -> Result<Arc<MinorTypeCensus>> {
        if let Some(c) = self.cache.censuses.get(&q) {
            return Ok(c.clone());
        }
        let opts = CensusOptions { allow_long: self.cfg.allow_long, ..Default::default() };
        let c = Arc::new(minor_type_census(&*self.plane(q)?, &opts)?);
        self.cache.censuses.insert(q, c.clone());
        Ok(c)
    }

    fn witnesses(&mut self, q: usize) -> Result<Arc<Vec<WitnessRecord>>> {
        if let Some(w) = self.cache.witnesses.get(&q) {
            return Ok(w.clone());
        }
        let w = Arc::new(enumerate_bstar_witnesses(&*self.plane(q)?)?.witnesses);
        self.cache.witnesses.insert(q, w.clone());
        Ok(w)
    }

    fn defects(&mut self, q: usize) -> Result<Arc<DefectReport>> {
        if let Some(d) = self.cache.defects.get(&q) {
            return Ok(d.clone());
        }
        let d = Arc::new(defect_census(&*self.model(q)?, self.cfg.allow_long)?);
        self.cache.defects.insert(q, d.clone());
        Ok(d)
    }
}

fn nonzero(f: &Field, rng: &mut impl Rng) -> Elem {
    Elem(rng.gen_range(1..f.order()))
}

fn inversion_sign(p: &[u8; 4]) -> i64 {
    let inv = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

fn pattern_atlas(ctx: &mut Ctx) -> Result<()> {
    let c = census_03();
    let p = json!({});
    ctx.expect("patterns.raw03Count", p.clone(), c.raw03_count)?;
    ctx.expect("patterns.orbitCount", p.clone(), c.orbit_count)?;
    ctx.expect("patterns.diamondOrbitCount", p.clone(), c.diamond_orbit_count)?;
    ctx.expect("patterns.rawDiamondSplit", p.clone(), [c.raw_diamond_count, c.raw_non_diamond_count])?;
    let displayed = canonical_form(Pattern4::from_rows(EXCEPTIONAL_03));
    ctx.expect("patterns.exceptionalCanonicalMatches", p.clone(), c.exceptional_canonical == displayed)?;
    ctx.info("patterns.exceptionalCanonical", p, c.exceptional_canonical.to_string())
}

fn pg23_census(ctx: &mut Ctx) -> Result<()> {
    let names = ["census.q3.totalMinors", "census.q3.type03", "census.q3.degenerate03", "census.q3.swapPairInMinimizers"];
    if !ctx.in_scope(3, true, &names) {
        return Ok(());
    }
    let c = ctx.census(3)?;
    let p = json!({ "q": 3 });
    let d = c.degenerate.clone().expect("requested");
    ctx.expect(names[0], p.clone(), c.total_minors)?;
    ctx.expect(names[1], p.clone(), c.count(0, 3))?;
    ctx.expect(names[2], p.clone(), d.with03_degenerate)?;
    ctx.expect(names[3], p.clone(), d.swap_pair_in_minimizers)?;
    let types: BTreeMap<String, u64> = c.counts.iter().map(|t| (format!("({},{})", t.min_weight, t.minimizers), t.count)).collect();
    ctx.info("census.q3.typeHistogram", p, types)
}

fn census_02(ctx: &mut Ctx) -> Result<()> {
    for q in [2usize, 3] {
        let names = [format!("census.q{q}.type02"), format!("census.q{q}.cycleLengths"), format!("census.q{q}.cycleSpan")];
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        if !ctx.in_scope(q, true, &refs) {
            continue;
        }
        let c = ctx.census(q)?;
        let p = json!({ "q": q });
        ctx.expect(&names[0], p.clone(), c.count(0, 2))?;
        ctx.expect(&names[1], p.clone(), c.cycle_lengths)?;
        let span = cycle_span_of_02_minors(&ctx.plane(q)?, ctx.cfg.allow_long, 16)?;
        ctx.expect(&names[2], p, [span.span_dim, span.ambient_dim])?;
    }
    Ok(())
}

fn graph_diameters(ctx: &mut Ctx) -> Result<()> {
    for q in [2usize, 3, 4, 5, 7, 8, 9] {
        let name = format!("graph.q{q}.diameter");
        if !ctx.in_scope(q, false, &[&name]) {
            continue;
        }
        let zg = nonincidence_graph(&ctx.plane(q)?);
        // a finite diameter certifies connectivity
        let actual = match graph_diameter(&zg) {
            Ok(d) => json!(d),
            Err(Error::Disconnected) => json!("disconnected"),
            Err(e) => return Err(e.into()),
        };
        ctx.expect(&name, json!({ "q": q, "vertices": zg.vertex_count(), "edges": zg.edge_count() }), actual)?;
    }
    Ok(())
}

fn bstar_witnesses(ctx: &mut Ctx) -> Result<()> {
    for q in [3usize, 4, 5] {
        let count_name = format!("witnesses.q{q}.orderedCount");
        let names =
            [count_name.as_str(), "witnesses.matchesFormula", "witnesses.perTripleCount", "witnesses.skewRectangleBijection", "witnesses.patternValid"];
        if !ctx.in_scope(q, false, &names) {
            continue;
        }
        let r = enumerate_bstar_witnesses(&*ctx.plane(q)?)?;
        let p = json!({ "q": q });
        ctx.expect(&count_name, p.clone(), r.ordered_count)?;
        ctx.expect("witnesses.matchesFormula", p.clone(), r.ordered_count == bstar_formula(q as u64))?;
        ctx.expect("witnesses.perTripleCount", p.clone(), r.per_triple_ok)?;
        ctx.expect("witnesses.skewRectangleBijection", p.clone(), r.bijection_ok && r.skew_rectangle_count == r.ordered_count)?;
        ctx.expect("witnesses.patternValid", p.clone(), r.pattern_ok)?;
        ctx.info("witnesses.distinctMinorCount", p, r.distinct_minor_count)?;
        ctx.cache.witnesses.insert(q, Arc::new(r.witnesses));
    }
    Ok(())
}

fn rank1_block(f: &Field, alpha: &[Elem; 4], beta: &[Elem; 4]) -> Block4 {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { Elem::ZERO } else { f.mul(alpha[i], beta[j]) }))
}

fn derangements(ctx: &mut Ctx) -> Result<()> {
    for k in 2..=6usize {
        ctx.expect(&format!("derangements.k{k}.signSum"), json!({ "k": k }), derangement_sign_sum(k))?;
    }
    let orders = [2u64, 3, 4, 5, 7, 8, 9, 11, 13];
    let trials = 200;
    let (mut mismatches, mut wrong_vanishing) = (0u64, 0u64);
    for q in orders {
        let f = Field::with_order(q)?;
        let minus3 = f.from_int(-3);
        for _ in 0..trials {
            let alpha: [Elem; 4] = std::array::from_fn(|_| nonzero(&f, &mut ctx.rng));
            let beta: [Elem; 4] = std::array::from_fn(|_| nonzero(&f, &mut ctx.rng));
            let t = theta4(&f, &rank1_block(&f, &alpha, &beta))?;
            let want = f.mul(minus3, f.mul(f.product(alpha), f.product(beta)));
            mismatches += (t != want) as u64;
            wrong_vanishing += (t.is_zero() != (f.characteristic() == 3)) as u64;
        }
    }
    let p = json!({ "fieldOrders": orders, "trialsPerField": trials });
    ctx.expect("theta4.rank1.mismatches", p.clone(), mismatches)?;
    ctx.expect("theta4.rank1.vanishingOffCharThree", p, wrong_vanishing)
}

fn canonical_consequences(ctx: &mut Ctx) -> Result<()> {
    for q in [3usize, 4, 5] {
        let names = [
            "canonical.rank",
            "canonical.zeroPatternMismatches",
            "witnesses.equationFailures",
            "witnesses.rhoPlusSigmaFailures",
            "witnesses.rhoNotOneFailures",
        ];
        if !ctx.in_scope(q, false, &names) {
            continue;
        }
        let plane = ctx.plane(q)?;
        let model = ctx.model(q)?;
        let p = json!({ "q": q });
        ctx.expect("canonical.rank", p.clone(), model.rank())?;
        let v = plane.size();
        let zero_bad = (0..v).flat_map(|a| (0..v).map(move |l| (a, l))).filter(|&(a, l)| model.get(a, l).is_zero() != plane.incident(a, l)).count();
        ctx.expect("canonical.zeroPatternMismatches", p.clone(), zero_bad)?;

        let ws = ctx.witnesses(q)?;
        let (mut eq_bad, mut sum_bad, mut rho_one) = (0u64, 0u64, 0u64);
        for w in ws.iter() {
            let c = witness_equation_checks(&model, w)?;
            eq_bad += !c.witness_equation as u64;
            sum_bad += !c.rho_plus_sigma as u64;
            rho_one += !c.rho_not_one as u64;
        }
        let pw = json!({ "q": q, "witnesses": ws.len() });
        ctx.expect("witnesses.equationFailures", pw.clone(), eq_bad)?;
        ctx.expect("witnesses.rhoPlusSigmaFailures", pw.clone(), sum_bad)?;
        if model.field().characteristic() == 2 {
            ctx.info("witnesses.rhoNotOneFailures", pw, rho_one)?;
        } else {
            ctx.expect("witnesses.rhoNotOneFailures", pw, rho_one)?;
        }
    }

    for q in [2usize, 3, 4, 5] {
        let names = ["identity.theta4NonzeroBlocks", "identity.blocksWithoutDefect"];
        if q == 2 {
            for n in names {
                ctx.skip(n, json!({ "q": 2 }), "no constructive identity minors at q=2 (q-2=0)");
            }
            continue;
        }
        if !ctx.in_scope(q, true, &names) {
            continue;
        }
        let d = ctx.defects(q)?;
        let p = json!({ "q": q, "identityBlocks": d.identity_count });
        ctx.expect(names[0], p.clone(), d.theta_nonzero_blocks)?;
        if d.asserted {
            ctx.expect(names[1], p, d.blocks_without_defect)?;
        } else {
            ctx.info(names[1], p, d.blocks_without_defect)?;
        }
    }

    for q in [3usize, 4, 5] {
        let size_name = format!("family.q{q}.size");
        if !ctx.in_scope(q, false, &[&size_name, "family.profileFailures"]) {
            continue;
        }
        let plane = ctx.plane(q)?;
        let rects = degenerate_rectangles(&plane);
        let step = rects.len() / 40 + 1;
        let (mut sizes, mut bad, mut tested) = (BTreeSet::new(), 0u64, 0u64);
        for &(x, y, m, n) in rects.iter().step_by(step) {
            for (mm, nn) in [(m, n), (n, m)] {
                let r = degenerate_square_family_census(&plane, x, y, mm, nn)?;
                sizes.insert(r.family_size);
                bad += !(r.all_four_minimizers && r.swap_pair_all) as u64;
                tested += 1;
            }
        }
        let p = json!({ "q": q, "rectanglesTested": tested });
        let size = if sizes.len() == 1 { json!(sizes.first()) } else { json!(sizes) };
        ctx.expect(&size_name, p.clone(), size)?;
        ctx.expect("family.profileFailures", p, bad)?;
    }
    Ok(())
}

/// Jets whose valuation pattern is `pat`, with the given leading coefficients.
fn pattern_jets(f: &Field, pat: Pattern4, lead: &[[Elem; 4]; 4], rng: &mut impl Rng) -> Vec<Vec<Jet>> {
    const ORDER: usize = 4;
    (0..4)
        .map(|r| {
            (0..4)
                .map(|c| {
                    let v = pat.get(r, c) as usize;
                    let mut coeffs = vec![Elem::ZERO; ORDER];
                    coeffs[v] = lead[r][c];
                    for x in coeffs.iter_mut().skip(v + 1) {
                        *x = Elem(rng.gen_range(0..f.order()));
                    }
                    Jet::new(f, ORDER, &coeffs)
                })
                .collect()
        })
        .collect()
}

fn term(f: &Field, lead: &[[Elem; 4]; 4], p: &[u8; 4]) -> Elem {
    let t = f.product((0..4).map(|i| lead[i][p[i] as usize]));
    if inversion_sign(p) < 0 {
        f.neg(t)
    } else {
        t
    }
}

/// Forces the minimizer residues to cancel by solving for one entry of the first minimizer.
fn force_cancellation(f: &Field, lead: &mut [[Elem; 4]; 4], mins: &[[u8; 4]]) {
    let c0 = mins[0][0];
    let (mut with, mut without) = (Elem::ZERO, Elem::ZERO);
    for p in mins {
        if p[0] == c0 {
            with = f.add(with, term(f, lead, p));
        } else {
            without = f.add(without, term(f, lead, p));
        }
    }
    let x = lead[0][c0 as usize];
    let coeff = f.div(with, x).expect("leading coefficients are nonzero");
    if !coeff.is_zero() && !without.is_zero() {
        lead[0][c0 as usize] = f.div(f.neg(without), coeff).expect("nonzero");
    }
}

fn jet_oracles(ctx: &mut Ctx) -> Result<()> {
    let primes = [2u32, 3, 5, 7];
    let trials = 1000;
    let (mut theta_bad, mut psi_bad) = (0u64, 0u64);
    let (mut raised_bad, mut raised_seen, mut lifts) = (0u64, 0u64, 0u64);
    let mut tie_bad = 0u64;
    for p in primes {
        let f = Field::prime(p)?;
        for _ in 0..trials {
            let b = IdentityBlockData::random(&f, &mut ctx.rng);
            let det = jet_det(&b.jets(&f, 3))?;
            theta_bad += (det.coeff(0) != theta4(&f, &b.u)?) as u64;
            psi_bad += (det.coeff(1) != psi4(&f, &b)?) as u64;
        }

        let mut done = 0;
        while done < trials {
            let pat = Pattern4(ctx.rng.gen());
            let prof = tropical_profile(pat);
            if !matches!(prof.type_tag(), (0, 2) | (0, 3)) {
                continue;
            }
            done += 1;
            let mins = prof.minimizers();
            let mut lead: [[Elem; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| nonzero(&f, &mut ctx.rng)));
            if ctx.rng.gen_bool(0.5) {
                force_cancellation(&f, &mut lead, &mins);
            }
            let want = f.sum(mins.iter().map(|m| term(&f, &lead, m)));
            let r = initial_form(&pattern_jets(&f, pat, &lead, &mut ctx.rng))?;
            raised_bad += (r.raised != want.is_zero() || r.residue_sum != want) as u64;
            raised_seen += r.raised as u64;
            lifts += 1;
        }

        for _ in 0..trials {
            let mut unit = || loop {
                let c: Vec<Elem> = (0..4).map(|_| Elem(ctx.rng.gen_range(0..f.order()))).collect();
                let j = Jet::new(&f, 4, &c);
                if j.valuation() == Valuation::Finite(0) {
                    break j;
                }
            };
            let (a, b, c, d) = (unit(), unit(), unit(), unit());
            tie_bad += !tie_depth_crossratio_check(&a, &b, &c, &d)?.equal as u64;
        }
    }
    let p = json!({ "primes": primes, "trialsPerField": trials });
    ctx.expect("jets.thetaMismatches", p.clone(), theta_bad)?;
    ctx.expect("jets.psiMismatches", p.clone(), psi_bad)?;
    ctx.expect("initialForm.raisedMismatches", json!({ "primes": primes, "lifts": lifts, "raised": raised_seen }), raised_bad)?;
    ctx.expect("tieDepth.unequal", p, tie_bad)
}

fn random_subset4(v: usize, rng: &mut impl Rng) -> [usize; 4] {
    let mut out = [0usize; 4];
    let mut n = 0;
    while n < 4 {
        let x = rng.gen_range(0..v);
        if !out[..n].contains(&x) {
            out[n] = x;
            n += 1;
        }
    }
    out
}

/// sHol = 1 exactly when a random jet lift of a (0,2) minor has positive valuation.
fn signed_holonomy_mismatches(plane: &ProjectivePlane, f: &Field, samples: usize, rng: &mut impl Rng) -> Result<(u64, u64)> {
    let v = plane.size();
    let (mut bad, mut positive, mut done) = (0u64, 0u64, 0);
    while done < samples {
        let (rows, cols) = (random_subset4(v, rng), random_subset4(v, rng));
        let pat = incidence_pattern(plane, &rows, &cols);
        let prof = tropical_profile(pat);
        if prof.type_tag() != (0, 2) {
            continue;
        }
        done += 1;
        let lead: [[Elem; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| nonzero(f, rng)));
        let is_positive = jet_det(&pattern_jets(f, pat, &lead, rng))?.valuation() > Valuation::Finite(0);
        let m = prof.minimizers();
        let mc = cycle_between(&m[0], &m[1]).expect("two minimizers differ on one cycle");
        let cycle = EvenCycle {
            points: mc.points.iter().map(|&i| rows[i as usize]).collect(),
            lines: mc.lines.iter().map(|&j| cols[j as usize]).collect(),
        };
        let local = |p: usize, l: usize| Some(lead[rows.iter().position(|&x| x == p)?][cols.iter().position(|&x| x == l)?]);
        let hol = alternating_product(f, &cycle, local)?;
        let shol = if cycle.half_length() % 2 == 1 { f.neg(hol) } else { hol };
        bad += (is_positive != (shol == Elem::ONE)) as u64;
        positive += is_positive as u64;
    }
    Ok((bad, positive))
}

/// Row-reduced constraint system over a prime field, one column per edge.
struct Echelon {
    f: Field,
    rows: Vec<(usize, Vec<Elem>)>,
}

impl Echelon {
    fn insert(&mut self, mut row: Vec<Elem>) -> bool {
        let f = &self.f;
        for (piv, r) in &self.rows {
            let c = row[*piv];
            if !c.is_zero() {
                for (x, &y) in row.iter_mut().zip(r) {
                    *x = f.sub(*x, f.mul(c, y));
                }
            }
        }
        let Some(piv) = row.iter().position(|x| !x.is_zero()) else { return false };
        let inv = f.inv(row[piv]).expect("nonzero pivot");
        row.iter_mut().for_each(|x| *x = f.mul(*x, inv));
        for (_, r) in &mut self.rows {
            let c = r[piv];
            if !c.is_zero() {
                for (x, &y) in r.iter_mut().zip(&row) {
                    *x = f.sub(*x, f.mul(c, y));
                }
            }
        }
        self.rows.push((piv, row));
        true
    }

    /// A uniformly random solution of the homogeneous system.
    fn random_solution(&self, n: usize, rng: &mut impl Rng) -> Vec<Elem> {
        let pivots: BTreeSet<usize> = self.rows.iter().map(|r| r.0).collect();
        let mut x: Vec<Elem> = (0..n).map(|i| if pivots.contains(&i) { Elem::ZERO } else { Elem(rng.gen_range(0..self.f.order())) }).collect();
        for (piv, r) in &self.rows {
            let s = self.f.sum((0..n).filter(|i| !pivots.contains(i)).map(|i| self.f.mul(r[i], x[i])));
            x[*piv] = self.f.neg(s);
        }
        x
    }
}

/// The (0,2) constraints on characteristic-2 labels, as a linear system on discrete logarithms.
///
/// The multiplicative group of GF(2^k) is cyclic, here of prime order, so each constraint
/// sHol = Hol = 1 is a linear equation in the exponents. Random solutions are exponentiated
/// back into labels without ever choosing potentials.
struct Char2System {
    field: Field,
    graph: tplab_core::plane::BipartiteGraph,
    generator: Elem,
    system: Option<Echelon>,
    constraints: Vec<EvenCycle>,
}

impl Char2System {
    fn build(plane: &Arc<ProjectivePlane>, f: &Field) -> Result<Char2System> {
        let zg = nonincidence_graph(plane);
        let ne = zg.edge_count();
        let ambient = ne - zg.vertex_count() + 1;
        let group = f.order() - 1;
        let generator = f.nonzero_elements().find(|&x| x != Elem::ONE).unwrap_or(Elem::ONE);
        let mut sys = Char2System { field: f.clone(), graph: zg.graph.clone(), generator, system: None, constraints: Vec::new() };
        if group == 1 {
            return Ok(sys);
        }
        let logs = Field::prime(group)?;
        let mut ech = Echelon { f: logs.clone(), rows: Vec::new() };
        let v = plane.size();
        'scan: for rows in (0..v).combinations(4) {
            let rows: [usize; 4] = rows.try_into().expect("4 rows");
            for cols in (0..v).combinations(4) {
                let cols: [usize; 4] = cols.try_into().expect("4 columns");
                let prof = tropical_profile(incidence_pattern(plane, &rows, &cols));
                if prof.type_tag() != (0, 2) {
                    continue;
                }
                let m = prof.minimizers();
                let mc = cycle_between(&m[0], &m[1]).expect("single cycle");
                let cycle = EvenCycle {
                    points: mc.points.iter().map(|&i| rows[i as usize]).collect(),
                    lines: mc.lines.iter().map(|&j| cols[j as usize]).collect(),
                };
                let mut row = vec![Elem::ZERO; ne];
                for (i, (p, l)) in cycle.edges().into_iter().enumerate() {
                    let e = zg.edge_id(p, l).expect("nonincident");
                    row[e] = logs.add(row[e], logs.from_int(if i % 2 == 0 { 1 } else { -1 }));
                }
                if ech.insert(row) {
                    sys.constraints.push(cycle);
                    if ech.rows.len() == ambient {
                        break 'scan;
                    }
                }
            }
        }
        sys.system = Some(ech);
        Ok(sys)
    }

    fn rank(&self) -> usize {
        self.system.as_ref().map_or(0, |e| e.rows.len())
    }

    fn sample(&self, rng: &mut impl Rng) -> Result<LabeledZeroGraph> {
        let ne = self.graph.edge_count();
        let labels = match &self.system {
            Some(ech) => ech.random_solution(ne, rng).iter().map(|e| self.field.pow(self.generator, e.0 as u64)).collect(),
            None => vec![Elem::ONE; ne],
        };
        Ok(LabeledZeroGraph::new(self.field.clone(), self.graph.clone(), labels)?)
    }
}

fn holonomy_suite(ctx: &mut Ctx) -> Result<()> {
    // potential-generated labels and single-edge perturbations
    let trials = 100;
    let orders = [5u64, 7, 9, 11, 13];
    let (mut round_bad, mut perturb_bad) = (0u64, 0u64);
    let plane = ctx.plane(3)?;
    let zg = nonincidence_graph(&plane);
    for t in 0..trials {
        let f = Field::with_order(orders[t % orders.len()])?;
        let v = plane.size();
        let alpha: Vec<Elem> = (0..v).map(|_| nonzero(&f, &mut ctx.rng)).collect();
        let beta: Vec<Elem> = (0..v).map(|_| nonzero(&f, &mut ctx.rng)).collect();
        let g = LabeledZeroGraph::from_potentials(f.clone(), zg.graph.clone(), &alpha, &beta)?;
        round_bad += match factorize_labels(&g)? {
            Factorization::Potentials { alpha: a, beta: b } => {
                let ok = g.graph.edges().iter().zip(&g.labels).all(|(&(p, l), &u)| match (a[p as usize], b[l as usize]) {
                    (Some(x), Some(y)) => f.mul(x, y) == u,
                    _ => false,
                });
                !ok as u64
            }
            Factorization::Failing(_) => 1,
        };
        let mut bent = g.clone();
        let e = ctx.rng.gen_range(0..bent.labels.len());
        let c = Elem(ctx.rng.gen_range(2..f.order()));
        bent.labels[e] = f.mul(bent.labels[e], c);
        perturb_bad += match factorize_labels(&bent)? {
            Factorization::Failing(cycle) => (cycle_holonomy(&bent, &cycle)? == Elem::ONE) as u64,
            Factorization::Potentials { .. } => 1,
        };
    }
    let p = json!({ "q": 3, "fieldOrders": orders, "trials": trials });
    ctx.expect("holonomy.factorizationRoundTripFailures", p.clone(), round_bad)?;
    ctx.expect("holonomy.perturbationFailures", p, perturb_bad)?;

    for q in [2usize, 3] {
        let names = ["holonomy.signedHolonomyMismatches", "holonomy.char2FactorizationFailures"];
        if !ctx.in_scope(q, false, &names) {
            continue;
        }
        let plane = ctx.plane(q)?;
        let samples = 1000;
        let (mut bad, mut positive) = (0, 0);
        for pf in [3u32, 5] {
            let (b, pos) = signed_holonomy_mismatches(&plane, &Field::prime(pf)?, samples, &mut ctx.rng)?;
            bad += b;
            positive += pos;
        }
        ctx.expect(names[0], json!({ "q": q, "primes": [3, 5], "samplesPerField": samples, "positive": positive }), bad)?;

        let mut failures = 0u64;
        let mut ranks = BTreeMap::new();
        for order in [2u64, 4, 8] {
            let sys = Char2System::build(&plane, &Field::with_order(order)?)?;
            ranks.insert(order, sys.rank());
            for _ in 0..10 {
                let labels = sys.sample(&mut ctx.rng)?;
                let violated = sys
                    .constraints
                    .iter()
                    .map(|c| signed_cycle_holonomy(&labels, c))
                    .collect::<tplab_core::Result<Vec<_>>>()?
                    .into_iter()
                    .any(|h| h != Elem::ONE);
                let factors = matches!(factorize_labels(&labels)?, Factorization::Potentials { .. });
                failures += (violated || !factors) as u64;
            }
        }
        ctx.expect(names[1], json!({ "q": q, "fieldOrders": [2, 4, 8], "solutionsPerField": 10, "constraintRank": ranks }), failures)?;
    }

    let f = Field::prime(101)?;
    let r = overlap_elimination_check(&f, 1000, &mut ctx.rng)?;
    let p = json!({ "field": 101 });
    ctx.expect("overlap.samples", p.clone(), r.samples)?;
    ctx.expect("overlap.failures", json!({ "field": 101, "counterexample": r.counterexample }), r.failures + r.general_failures)?;
    ctx.info("overlap.negativeControlFailures", p, r.negative_control_failures)
}

fn atlas_bridge(ctx: &mut Ctx) -> Result<()> {
    for q in [7usize, 8] {
        if !ctx.in_scope(q, false, &["atlas.threeChartFailures", "bridge.failures"]) {
            continue;
        }
        let plane = ctx.plane(q)?;
        let samples = 100;
        let mut bad = 0u64;
        for _ in 0..samples {
            let w = sample_bstar_witness(&plane, &mut ctx.rng)?;
            bad += !three_chart_cycle(&plane, &w).is_ok_and(|c| c.certify(&w)) as u64;
        }
        ctx.expect("atlas.threeChartFailures", json!({ "q": q, "witnesses": samples }), bad)?;

        let model = ctx.model(q)?;
        let mut bad = 0u64;
        for _ in 0..samples {
            let w = sample_bstar_witness(&plane, &mut ctx.rng)?;
            let (a, b, l0, l1) = w.rectangle();
            let direct = cross_ratio(&model, a, b, l0, l1)?;
            let ok = find_bridge_lines(&plane, &w)
                .and_then(|(t, s)| bridge_cycle(&model, &w, t, s))
                .is_ok_and(|r| r.all_ok() && r.witness_equation && r.identity23_7 && r.holonomy == direct);
            bad += !ok as u64;
        }
        ctx.expect("bridge.failures", json!({ "q": q, "witnesses": samples, "model": "canonical" }), bad)?;
    }
    Ok(())
}

fn random_matrix(f: &Field, r: usize, c: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| Elem(rng.gen_range(0..f.order())))
}

/// A random square matrix of rank at most `r` with no zero on the diagonal.
fn low_rank_nonzero_diagonal(f: &Field, n: usize, r: usize, rng: &mut impl Rng) -> Result<Matrix> {
    loop {
        let m = random_matrix(f, n, r, rng).mul(f, &random_matrix(f, r, n, rng))?;
        if (0..n).all(|i| !m.get(i, i).is_zero()) {
            return Ok(m);
        }
    }
}

fn rank_machinery(ctx: &mut Ctx) -> Result<()> {
    for q in [2usize, 3, 4, 5, 7] {
        let name = format!("rank.monomialBlock.q{q}");
        if !ctx.in_scope(q, false, &[&name]) {
            continue;
        }
        let plane = ctx.plane(q)?;
        let mut results = BTreeSet::new();
        for line in 0..plane.size() {
            let choices: Vec<usize> =
                plane.line_points(line).iter().map(|&p| *plane.pencil(p).iter().find(|&&l| l != line).expect("q+1 >= 2 lines")).collect();
            results.insert(monomial_block_rank(&plane, line, &choices)?);
        }
        let actual = match results.iter().collect::<Vec<_>>().as_slice() {
            [(diag, rank)] => json!({ "diagonal": diag, "rank": rank }),
            many => json!(many),
        };
        ctx.expect(&name, json!({ "q": q, "lines": plane.size() }), actual)?;
    }

    let f = Field::prime(7)?;
    let mut violations = 0u64;
    for r in 1..=3usize {
        for _ in 0..100 {
            let t = TangentFactorization {
                a0: random_matrix(&f, 13, r, &mut ctx.rng),
                b0: random_matrix(&f, r, 13, &mut ctx.rng),
                a1: random_matrix(&f, 13, r, &mut ctx.rng),
                b1: random_matrix(&f, r, 13, &mut ctx.rng),
            };
            violations += (tangent_first_order(&f, &t)?.rank(&f) > 2 * r) as u64;
        }
    }
    ctx.expect("tangent.rankViolations", json!({ "field": 7, "size": 13, "ranks": [1, 2, 3], "trialsPerRank": 100 }), violations)?;

    let f = Field::prime(11)?;
    let mut failures = 0u64;
    for _ in 0..100 {
        let r = ctx.rng.gen_range(1..=6);
        let v = low_rank_nonzero_diagonal(&f, 12, r, &mut ctx.rng)?;
        let rep = turan_support_check(&f, &v, 6)?;
        failures += !(rep.independent_ok && rep.edge_ok) as u64;
    }
    ctx.expect("turan.n12.failures", json!({ "field": 11, "n": 12, "maxRank": 6, "trials": 100 }), failures)?;

    let mut violations = 0u64;
    let mut largest = 0;
    for n in 7..=14 {
        for _ in 0..20 {
            let r = ctx.rng.gen_range(1..=6);
            let v = low_rank_nonzero_diagonal(&f, n, r, &mut ctx.rng)?;
            let m = turan_support_check(&f, &v, 6)?.max_independent.expect("exhaustive at n <= 14");
            largest = largest.max(m);
            violations += (m > 6) as u64;
        }
    }
    ctx.expect("turan.exhaustiveViolations", json!({ "field": 11, "n": "7..=14", "trialsPerN": 20, "largestIndependent": largest }), violations)
}

fn multiplicity_defects(ctx: &mut Ctx) -> Result<()> {
    if ctx.in_scope(3, true, &["multiplicity.q3.bound", "multiplicity.q3.boundHolds"]) {
        let plane = ctx.plane(3)?;
        let r = rectangle_multiplicity(&plane, ctx.cfg.allow_long)?;
        let p = json!({ "q": 3 });
        ctx.expect("multiplicity.q3.bound", p.clone(), multiplicity_bound(3))?;
        ctx.expect("multiplicity.q3.boundHolds", p.clone(), r.max_multiplicity as u64 <= r.bound)?;
        ctx.info("multiplicity.q3.maxMultiplicity", json!({ "q": 3, "identityMinors": r.identity_minors, "zeroRectangles": r.zero_rectangles }), r.max_multiplicity)?;
    }
    for q in [4usize, 5] {
        if !ctx.in_scope(q, true, &["defects.lowerBoundHolds"]) {
            continue;
        }
        let d = ctx.defects(q)?;
        let p = json!({
            "q": q,
            "defectCount": d.defect_count,
            "identityCount": d.identity_count,
            "maxMultiplicity": d.max_multiplicity,
        });
        // defectCount >= identityCount / maxMultiplicity, compared without division
        let holds = d.max_multiplicity > 0 && d.defect_count * d.max_multiplicity as u64 >= d.identity_count;
        ctx.expect("defects.lowerBoundHolds", p, holds)?;
    }
    Ok(())
}
