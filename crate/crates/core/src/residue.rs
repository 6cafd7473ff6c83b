//! Residue-field algebra of lifts: identity-block equations, cross-ratios, gauges,
//! initial forms, first-order structure and the rank checks built on them.

use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::Serialize;

use crate::census::WitnessRecord;
use crate::error::{Error, Result};
use crate::gf::{jet_det, Elem, Field, Jet, Matrix, Valuation};
use crate::perm;
use crate::plane::{dot, ProjectivePlane};
use crate::tropical::{detect_diamond_pairs, tropical_profile, Pattern4, PERMS4, PERM_SIGNS};

/// A v x v residue matrix attached to a plane, zero exactly on incidences.
#[derive(Debug, Clone)]
pub struct ResidueModel {
    field: Field,
    plane: Arc<ProjectivePlane>,
    u: Vec<Elem>,
    rank: OnceLock<usize>,
}

impl ResidueModel {
    pub fn new(field: Field, plane: Arc<ProjectivePlane>, u: Vec<Elem>) -> Result<ResidueModel> {
        let v = plane.size();
        if u.len() != v * v {
            return Err(Error::ShapeMismatch(format!("expected {} entries, got {}", v * v, u.len())));
        }
        for p in 0..v {
            for l in 0..v {
                if u[p * v + l].is_zero() != plane.incident(p, l) {
                    return Err(Error::ZeroPatternMismatch(p, l));
                }
            }
        }
        Ok(ResidueModel { field, plane, u, rank: OnceLock::new() })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn plane(&self) -> &Arc<ProjectivePlane> {
        &self.plane
    }
    pub fn get(&self, p: usize, l: usize) -> Elem {
        self.u[p * self.plane.size() + l]
    }
    pub fn entries(&self) -> &[Elem] {
        &self.u
    }
    pub fn matrix(&self) -> Matrix {
        let v = self.plane.size();
        Matrix { rows: v, cols: v, data: self.u.clone() }
    }
    pub fn rank(&self) -> usize {
        *self.rank.get_or_init(|| self.matrix().rank(&self.field))
    }

    pub fn dump(&self) -> String {
        let d = self.field.descriptor();
        let mut s = format!("model q={} p={} k={}\n", self.plane.order(), d.p, d.k);
        let v = self.plane.size();
        for p in 0..v {
            let row: Vec<String> = (0..v).map(|l| self.field.format_elem(self.get(p, l))).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn parse(text: &str, plane: Arc<ProjectivePlane>) -> Result<ResidueModel> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| perr(1, "empty input".into()))?;
        let mut q = None;
        let mut p = None;
        let mut k = None;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("model") {
            return Err(perr(1, format!("bad header {header:?}")));
        }
        for t in parts {
            let (key, val) = t.split_once('=').ok_or_else(|| perr(1, format!("bad field {t:?}")))?;
            let val: u64 = val.parse().map_err(|_| perr(1, format!("bad number in {t:?}")))?;
            match key {
                "q" => q = Some(val),
                "p" => p = Some(val),
                "k" => k = Some(val as u32),
                _ => return Err(perr(1, format!("unknown field {key:?}"))),
            }
        }
        let (Some(q), Some(p), Some(k)) = (q, p, k) else {
            return Err(perr(1, "header needs q, p and k".into()));
        };
        if q as usize != plane.order() {
            return Err(perr(1, format!("model order {q} does not match plane order {}", plane.order())));
        }
        let field = Field::with_order(p.pow(k)).map_err(|e| perr(1, e.to_string()))?;
        let v = plane.size();
        let mut u = Vec::with_capacity(v * v);
        for (i, row) in lines.enumerate() {
            let toks: Vec<&str> = row.split_whitespace().collect();
            if toks.len() != v {
                return Err(perr(i + 2, format!("expected {v} entries, found {}", toks.len())));
            }
            for t in toks {
                u.push(field.parse_elem(t).map_err(|e| perr(i + 2, e.to_string()))?);
            }
        }
        if u.len() != v * v {
            return Err(perr(v + 1, format!("expected {v} rows")));
        }
        ResidueModel::new(field, plane, u)
    }
}

/// The dot-product model U[p][l] = <p, l> over the plane's own field.
pub fn canonical_residue_model(plane: &Arc<ProjectivePlane>) -> Result<ResidueModel> {
    let coords = plane.coordinates().ok_or(Error::NotConstructed)?;
    let f = &coords.field;
    let mut u = Vec::with_capacity(coords.points.len() * coords.lines.len());
    for pt in &coords.points {
        for ln in &coords.lines {
            u.push(dot(f, pt, ln));
        }
    }
    ResidueModel::new(f.clone(), plane.clone(), u)
}

pub type Block4 = [[Elem; 4]; 4];

fn check_offdiag(u: &Block4) -> Result<()> {
    for i in 0..4 {
        for j in 0..4 {
            if i != j && u[i][j].is_zero() {
                return Err(Error::ZeroEntry);
            }
        }
    }
    Ok(())
}

fn signed(f: &Field, x: Elem, sign: i64) -> Elem {
    if sign > 0 {
        x
    } else {
        f.neg(x)
    }
}

/// Signed sum over the nine derangements of the off-diagonal residues.
pub fn theta4(f: &Field, u: &Block4) -> Result<Elem> {
    check_offdiag(u)?;
    let mut acc = Elem::ZERO;
    for (i, p) in PERMS4.iter().enumerate() {
        if (0..4).any(|r| p[r] as usize == r) {
            continue;
        }
        let term = f.product((0..4).map(|r| u[r][p[r] as usize]));
        acc = f.add(acc, signed(f, term, PERM_SIGNS[i] as i64));
    }
    Ok(acc)
}

/// Sum of derangement signs on k letters, by enumeration.
pub fn derangement_sign_sum(k: usize) -> i64 {
    assert!((2..=6).contains(&k), "k must lie in 2..=6");
    perm::permutations(k).iter().filter(|p| perm::is_derangement(p)).map(|p| perm::sign(p)).sum()
}

/// Count of derangements on k letters, by enumeration.
pub fn derangement_count(k: usize) -> usize {
    perm::permutations(k).iter().filter(|p| perm::is_derangement(p)).count()
}

fn complement3(i: usize) -> [usize; 3] {
    let mut out = [0; 3];
    let mut n = 0;
    for j in 0..4 {
        if j != i {
            out[n] = j;
            n += 1;
        }
    }
    out
}

/// The two 3-cycle monomials on the complement of each index.
pub fn d_terms(f: &Field, u: &Block4) -> Result<[Elem; 4]> {
    check_offdiag(u)?;
    let mut out = [Elem::ZERO; 4];
    for (i, d) in out.iter_mut().enumerate() {
        let [j, k, l] = complement3(i);
        let a = f.product([u[j][k], u[k][l], u[l][j]]);
        let b = f.product([u[j][l], u[l][k], u[k][j]]);
        *d = f.add(a, b);
    }
    Ok(out)
}

/// Identity-pattern block data: residues, diagonal first coefficients, first corrections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityBlockData {
    pub u: Block4,
    pub a: [Elem; 4],
    pub w: Block4,
}

impl IdentityBlockData {
    pub fn validate(&self) -> Result<()> {
        check_offdiag(&self.u)?;
        if self.a.iter().any(|x| x.is_zero()) {
            return Err(Error::ZeroEntry);
        }
        Ok(())
    }

    /// The lift with diagonal a_i t and off-diagonal u_ij + w_ij t.
    pub fn jets(&self, f: &Field, order: usize) -> Vec<Vec<Jet>> {
        (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        if i == j {
                            Jet::monomial(f, order, self.a[i], 1)
                        } else {
                            Jet::new(f, order, &[self.u[i][j], self.w[i][j]])
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn random<R: Rng>(f: &Field, rng: &mut R) -> IdentityBlockData {
        let q = f.order();
        let nz = |rng: &mut R| Elem(rng.gen_range(1..q));
        let mut u = [[Elem::ZERO; 4]; 4];
        let mut w = [[Elem::ZERO; 4]; 4];
        let mut a = [Elem::ZERO; 4];
        for i in 0..4 {
            a[i] = nz(rng);
            for j in 0..4 {
                if i != j {
                    u[i][j] = nz(rng);
                    w[i][j] = Elem(rng.gen_range(0..q));
                }
            }
        }
        IdentityBlockData { u, a, w }
    }
}

/// First-order coefficient of the identity-block determinant.
pub fn psi4(f: &Field, block: &IdentityBlockData) -> Result<Elem> {
    block.validate()?;
    let d = d_terms(f, &block.u)?;
    let mut acc = f.sum((0..4).map(|i| f.mul(block.a[i], d[i])));
    for (i, p) in PERMS4.iter().enumerate() {
        if (0..4).any(|r| p[r] as usize == r) {
            continue;
        }
        let prod = f.product((0..4).map(|r| block.u[r][p[r] as usize]));
        let mut ratio = Elem::ZERO;
        for r in 0..4 {
            let c = p[r] as usize;
            ratio = f.add(ratio, f.div(block.w[r][c], block.u[r][c])?);
        }
        acc = f.add(acc, signed(f, f.mul(prod, ratio), PERM_SIGNS[i] as i64));
    }
    Ok(acc)
}

/// rho = (u[p][m]/u[p][l]) (u[q][l]/u[q][m]).
pub fn cross_ratio(model: &ResidueModel, p: usize, q: usize, l: usize, m: usize) -> Result<Elem> {
    let f = model.field();
    let (pm, pl, ql, qm) = (model.get(p, m), model.get(p, l), model.get(q, l), model.get(q, m));
    if p == q || l == m || [pm, pl, ql, qm].iter().any(|x| x.is_zero()) {
        return Err(Error::NotAZeroRectangle);
    }
    Ok(f.mul(f.div(pm, pl)?, f.div(ql, qm)?))
}

pub fn apply_gauge(model: &ResidueModel, alpha: &[Elem], beta: &[Elem]) -> Result<ResidueModel> {
    let v = model.plane().size();
    if alpha.len() != v || beta.len() != v {
        return Err(Error::ShapeMismatch(format!("gauge vectors must have length {v}")));
    }
    if alpha.iter().chain(beta).any(|x| x.is_zero()) {
        return Err(Error::ZeroScalar);
    }
    let f = model.field();
    let mut u = model.entries().to_vec();
    for p in 0..v {
        for l in 0..v {
            u[p * v + l] = f.mul(f.mul(alpha[p], u[p * v + l]), beta[l]);
        }
    }
    ResidueModel::new(f.clone(), model.plane().clone(), u)
}

/// Cross-ratio of rows {i,j} and columns {a,b} inside a 4x4 block.
pub fn admissible_cross_ratio(f: &Field, u: &Block4, i: usize, j: usize, a: usize, b: usize) -> Result<Elem> {
    Ok(f.mul(f.div(u[i][b], u[i][a])?, f.div(u[j][a], u[j][b])?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Flatness {
    Rank1 { alpha: [Elem; 4], beta: [Elem; 4] },
    Defect { rows: (usize, usize), cols: (usize, usize), rho: Elem },
}

/// Factors off-diagonal residues as alpha_i beta_j, or names a non-flat admissible rectangle.
pub fn flatness_to_rank1(f: &Field, u: &Block4) -> Result<Flatness> {
    check_offdiag(u)?;
    for i in 0..4 {
        for j in i + 1..4 {
            let [a, b] = [0, 1, 2, 3].into_iter().filter(|&x| x != i && x != j).collect::<Vec<_>>()[..] else {
                unreachable!()
            };
            let rho = admissible_cross_ratio(f, u, i, j, a, b)?;
            if rho != Elem::ONE {
                return Ok(Flatness::Defect { rows: (i, j), cols: (a, b), rho });
            }
        }
    }
    let mut alpha = [Elem::ONE; 4];
    let mut beta = [Elem::ONE; 4];
    for j in 1..4 {
        beta[j] = u[0][j];
    }
    for i in 1..4 {
        let a = (1..4).find(|&c| c != i).unwrap();
        alpha[i] = f.div(u[i][a], u[0][a])?;
    }
    beta[0] = f.div(u[1][0], alpha[1])?;
    for i in 0..4 {
        for j in 0..4 {
            if i != j && f.mul(alpha[i], beta[j]) != u[i][j] {
                return Err(Error::PreconditionViolated("flat block failed to factor".into()));
            }
        }
    }
    Ok(Flatness::Rank1 { alpha, beta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InitialForm {
    pub min_weight: u8,
    pub residue_sum: Elem,
    pub raised: bool,
    pub det_valuation: Valuation,
}

/// Leading-term analysis of a 4x4 jet minor whose valuations form a {0,1} pattern.
pub fn initial_form(minor: &[Vec<Jet>]) -> Result<InitialForm> {
    if minor.len() != 4 || minor.iter().any(|r| r.len() != 4) {
        return Err(Error::ShapeMismatch("initial_form needs a 4x4 minor".into()));
    }
    let f = minor[0][0].field().clone();
    let mut rows = [[0u8; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            rows[r][c] = match minor[r][c].valuation() {
                Valuation::Finite(v) if v <= 1 => v as u8,
                other => return Err(Error::PreconditionViolated(format!("entry ({r},{c}) has valuation {other}"))),
            };
        }
    }
    let profile = tropical_profile(Pattern4::from_rows(rows));
    let mut residue_sum = Elem::ZERO;
    for i in profile.indices() {
        let p = PERMS4[i];
        let term = f.product((0..4).map(|r| minor[r][p[r] as usize].leading_coefficient().unwrap()));
        residue_sum = f.add(residue_sum, signed(&f, term, PERM_SIGNS[i] as i64));
    }
    if profile.min_weight as usize >= minor[0][0].order() {
        return Err(Error::TruncationTooShallow);
    }
    let det_valuation = jet_det(minor)?.valuation();
    let raised = match det_valuation {
        Valuation::Finite(v) => v > profile.min_weight as u32,
        Valuation::Saturated(_) | Valuation::Infinite => true,
    };
    Ok(InitialForm { min_weight: profile.min_weight, residue_sum, raised, det_valuation })
}

pub fn rank_gf(f: &Field, m: &Matrix) -> usize {
    m.rank(f)
}

/// Rank-3 factors U = A0 B0 with a first-order direction (A1, B1).
#[derive(Debug, Clone)]
pub struct TangentFactorization {
    pub a0: Matrix,
    pub b0: Matrix,
    pub a1: Matrix,
    pub b1: Matrix,
}

/// V = A1 B0 + A0 B1.
pub fn tangent_first_order(f: &Field, t: &TangentFactorization) -> Result<Matrix> {
    if t.a0.rows != t.a1.rows || t.a0.cols != t.a1.cols || t.b0.rows != t.b1.rows || t.b0.cols != t.b1.cols {
        return Err(Error::ShapeMismatch("A0/A1 or B0/B1 shapes differ".into()));
    }
    t.a1.mul(f, &t.b0)?.add(f, &t.a0.mul(f, &t.b1)?)
}

/// Incidence block on the points of `line` against one chosen line through each.
pub fn monomial_block_rank(plane: &ProjectivePlane, line: usize, choices: &[usize]) -> Result<(bool, usize)> {
    let pts = plane.line_points(line);
    if choices.len() != pts.len() {
        return Err(Error::InvalidChoice(format!("need {} choices, got {}", pts.len(), choices.len())));
    }
    for (&p, &l) in pts.iter().zip(choices) {
        if l == line || l >= plane.size() || !plane.incident(p, l) {
            return Err(Error::InvalidChoice(format!("line {l} is not a valid choice for point {p}")));
        }
    }
    let n = pts.len();
    let block = Matrix::from_fn(n, n, |i, j| if plane.incident(pts[i], choices[j]) { Elem::ONE } else { Elem::ZERO });
    let diagonal = (0..n).all(|i| (0..n).all(|j| (block.get(i, j) == Elem::ONE) == (i == j)));
    let f = Field::prime(65521)?;
    Ok((diagonal, block.rank(&f)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TuranReport {
    pub independent_ok: bool,
    /// exact independence number when N is at most 14
    pub max_independent: Option<usize>,
    pub edge_count: usize,
    pub bound: usize,
    pub edge_ok: bool,
}

/// ceil(N(N-6)/12), clamped at zero.
pub fn turan_bound(n: usize) -> usize {
    if n <= 6 {
        0
    } else {
        (n * (n - 6)).div_ceil(12)
    }
}

pub fn turan_support_check(f: &Field, v: &Matrix, max_rank: usize) -> Result<TuranReport> {
    let n = v.rows;
    if v.cols != n {
        return Err(Error::PreconditionViolated("matrix must be square".into()));
    }
    if (0..n).any(|i| v.get(i, i).is_zero()) {
        return Err(Error::PreconditionViolated("diagonal has a zero".into()));
    }
    let rank = v.rank(f);
    if rank > max_rank {
        return Err(Error::PreconditionViolated(format!("rank {rank} exceeds {max_rank}")));
    }
    let mut adj = vec![0u64; n];
    let mut edge_count = 0;
    for i in 0..n {
        for j in i + 1..n {
            if !v.get(i, j).is_zero() || !v.get(j, i).is_zero() {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
                edge_count += 1;
            }
        }
    }
    let max_independent = (n <= 14).then(|| {
        let mut best = 0;
        for s in 0u64..(1 << n) {
            let size = s.count_ones() as usize;
            if size <= best {
                continue;
            }
            if (0..n).all(|i| s >> i & 1 == 0 || adj[i] & s == 0) {
                best = size;
            }
        }
        best
    });
    let independent_ok = max_independent.map_or(rank <= max_rank, |m| m <= max_rank);
    let bound = turan_bound(n);
    Ok(TuranReport { independent_ok, max_independent, edge_count, bound, edge_ok: edge_count >= bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WitnessChecks {
    pub witness_equation: bool,
    pub rho_plus_sigma: bool,
    pub rho_not_one: bool,
    /// false when the model rank exceeds 3, so nothing is implied
    pub asserted: bool,
    /// whether the rho != 1 check is asserted (characteristic other than 2)
    pub rho_not_one_asserted: bool,
}

/// The three residue identities a B* witness forces on a rank-3 model.
pub fn witness_equation_checks(model: &ResidueModel, w: &WitnessRecord) -> Result<WitnessChecks> {
    let f = model.field();
    let [a, b, c, _d] = w.points;
    let [l0, l1, l2, _l3] = w.lines;
    let u = |p, l| model.get(p, l);
    let delta = f.sub(f.mul(u(a, l0), u(b, l1)), f.mul(u(a, l1), u(b, l0)));
    let lhs = f.mul(u(c, l2), delta);
    let rhs = f.product([u(a, l2), u(b, l1), u(c, l0)]);
    let rho = cross_ratio(model, a, b, l0, l1)?;
    let sigma = f.mul(f.div(u(a, l2), u(a, l0))?, f.div(u(c, l0), u(c, l2))?);
    Ok(WitnessChecks {
        witness_equation: lhs == rhs,
        rho_plus_sigma: f.add(rho, sigma) == Elem::ONE,
        rho_not_one: rho != Elem::ONE,
        asserted: model.rank() <= 3,
        rho_not_one_asserted: f.characteristic() != 2,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlapReport {
    pub samples: usize,
    pub failures: usize,
    pub counterexample: Option<String>,
    /// samples where the shared difference vanished and (A') had no nonzero solution
    pub delta_zero_samples: usize,
    /// perturbed samples violating (A') whose binomial failed (negative control)
    pub negative_control_failures: usize,
    pub general_samples: usize,
    pub general_failures: usize,
}

fn nonzero<R: Rng>(f: &Field, rng: &mut R) -> Elem {
    Elem(rng.gen_range(1..f.order()))
}

/// Samples residues satisfying the two overlapping trimonials and checks the forced binomial,
/// then the general shared-diamond elimination on random pairs of diamond patterns.
pub fn overlap_elimination_check<R: Rng>(f: &Field, samples: usize, rng: &mut R) -> Result<OverlapReport> {
    let mut rep = OverlapReport {
        samples,
        failures: 0,
        counterexample: None,
        delta_zero_samples: 0,
        negative_control_failures: 0,
        general_samples: samples,
        general_failures: 0,
    };
    // over GF(2) every nonzero sample has Delta = 0, so attempts are capped
    let max_attempts = samples.saturating_mul(64).max(64);
    let mut done = 0;
    for _ in 0..max_attempts {
        if done == samples {
            break;
        }
        let [u00, u11, u22, u12, u21, u20, u44, u50] = [0; 8].map(|_| nonzero(f, rng));
        let delta = f.sub(f.mul(u11, u22), f.mul(u12, u21));
        let k = f.mul(u11, u20);
        if delta.is_zero() {
            // (A') would read 0 = u02 u11 u20, impossible with nonzero residues.
            rep.delta_zero_samples += 1;
            continue;
        }
        let u02 = f.div(f.mul(u00, delta), k)?;
        let u52 = f.div(f.mul(delta, u50), k)?;
        // Original trimonials (A) and (B) with the common factor u44 restored.
        let a_form = f.mul(u44, f.sub(f.mul(u00, delta), f.mul(u02, k)));
        let b_form = f.mul(u44, f.sub(f.mul(k, u52), f.mul(delta, u50)));
        let binomial = f.mul(u02, u50) == f.mul(u00, u52);
        if !a_form.is_zero() || !b_form.is_zero() || !binomial {
            rep.failures += 1;
            rep.counterexample.get_or_insert_with(|| format!("u00={u00} u11={u11} u22={u22} u12={u12} u21={u21} u20={u20} u50={u50}"));
        }
        let bad = f.add(u02, nonzero(f, rng));
        if !bad.is_zero() && f.mul(bad, u50) != f.mul(u00, u52) {
            rep.negative_control_failures += 1;
        }
        done += 1;
    }
    rep.samples = done;
    let diamonds: Vec<Pattern4> = crate::patterns::census_03()
        .orbits
        .iter()
        .filter(|o| o.has_diamond)
        .map(|o| o.canonical_form)
        .collect();
    for _ in 0..samples {
        let pa = diamonds[rng.gen_range(0..diamonds.len())];
        let pb = diamonds[rng.gen_range(0..diamonds.len())];
        let shared = [0; 4].map(|_| nonzero(f, rng));
        let delta = f.sub(f.mul(shared[0], shared[3]), f.mul(shared[1], shared[2]));
        if delta.is_zero() {
            rep.general_samples -= 1;
            continue;
        }
        let (a, b) = (diamond_equation(f, pa, shared, rng)?, diamond_equation(f, pb, shared, rng)?);
        let lhs = f.mul(a.p, b.q);
        let rhs = signed(f, f.mul(b.p, a.q), a.eps * b.eps);
        if lhs != rhs {
            rep.general_failures += 1;
        }
    }
    Ok(rep)
}

struct DiamondEquation {
    p: Elem,
    q: Elem,
    eps: i64,
}

/// Random residues on a diamond pattern's zero cells with the diamond cells set to
/// `shared` = (u_ra, u_rb, u_sa, u_sb) and one cell of the third matching solved so the
/// trimonial vanishes. Returns P, Q and epsilon with P * Delta = eps * Q.
fn diamond_equation<R: Rng>(f: &Field, pat: Pattern4, shared: [Elem; 4], rng: &mut R) -> Result<DiamondEquation> {
    let prof = tropical_profile(pat);
    let d = detect_diamond_pairs(&prof)[0];
    let third = prof.minimizers().into_iter().find(|p| *p != d.first && *p != d.second).unwrap();
    let (r, s) = (d.rows.0 as usize, d.rows.1 as usize);
    let (a, b) = (d.cols.0 as usize, d.cols.1 as usize);
    let mut u = [[Elem::ZERO; 4]; 4];
    for (i, row) in u.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if pat.get(i, j) == 0 {
                *x = nonzero(f, rng);
            }
        }
    }
    u[r][a] = shared[0];
    u[r][b] = shared[1];
    u[s][a] = shared[2];
    u[s][b] = shared[3];
    let delta = f.sub(f.mul(u[r][a], u[s][b]), f.mul(u[r][b], u[s][a]));
    let sgn = |p: &[u8; 4]| PERM_SIGNS[crate::tropical::perm_index(p)] as i64;
    let p_mon = f.product((0..4).filter(|&i| i != r && i != s).map(|i| u[i][d.first[i] as usize]));
    let eps = -sgn(&d.first) * sgn(&third);
    let in_pair = |i: usize, j: usize| d.first[i] as usize == j || d.second[i] as usize == j;
    let free = (0..4).find(|&i| !in_pair(i, third[i] as usize)).expect("third matching leaves the diamond");
    let rest = f.product((0..4).filter(|&i| i != free).map(|i| u[i][third[i] as usize]));
    // P * Delta = eps * x * rest
    let x = signed(f, f.div(f.mul(p_mon, delta), rest)?, eps);
    u[free][third[free] as usize] = x;
    let q_mon = f.product((0..4).map(|i| u[i][third[i] as usize]));
    let trimonial = f.add(
        signed(f, f.mul(p_mon, delta), sgn(&d.first)),
        signed(f, q_mon, sgn(&third)),
    );
    if !trimonial.is_zero() || f.mul(p_mon, delta) != signed(f, q_mon, eps) {
        return Err(Error::PreconditionViolated("diamond equation construction failed".into()));
    }
    Ok(DiamondEquation { p: p_mon, q: q_mon, eps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum TransportBranch {
    /// Delta^{mn} nonzero: the grid factors through u_{Z,m} and constant column ratios.
    GridFactorization,
    /// Delta^{mn} vanishes at residue level; positive depth is required on any lift.
    DeltaZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TransportReport {
    pub members: usize,
    pub square_initial_form_factorizes: bool,
    pub ratio_constancy: bool,
    pub branch: TransportBranch,
    /// grid factorization and vanishing 2x2 determinants, when that branch is taken
    pub grid_ok: bool,
}

impl TransportReport {
    pub fn all_ok(&self) -> bool {
        self.square_initial_form_factorizes && self.ratio_constancy && self.grid_ok
    }
}

/// Transport identities around the degenerate rectangle (X,Y;m,n) on a rank-3 model.
pub fn degenerate_transport_checks(model: &ResidueModel, x: usize, y: usize, m: usize, n: usize) -> Result<TransportReport> {
    if model.rank() > 3 {
        return Err(Error::RankTooHigh(model.rank()));
    }
    evaluate_degenerate_transport(model, x, y, m, n)
}

/// The same evaluation without the rank precondition, for synthetic label sets.
pub fn evaluate_degenerate_transport(model: &ResidueModel, x: usize, y: usize, m: usize, n: usize) -> Result<TransportReport> {
    let plane = model.plane();
    if crate::tropical::degenerate_diamond_test(plane, x, y, m, n) != crate::tropical::RectangleKind::Degenerate {
        return Err(Error::NotDegenerate);
    }
    let f = model.field();
    let u = |p, l| model.get(p, l);
    let w = plane.meet(m, n).unwrap();
    let ell = plane.join(x, y).unwrap();
    let delta = |c1: usize, c2: usize| f.sub(f.mul(u(x, c1), u(y, c2)), f.mul(u(x, c2), u(y, c1)));
    let rows: Vec<usize> = plane.line_points(n).iter().copied().filter(|&z| z != w).collect();
    let cols: Vec<usize> = plane.pencil(w).iter().copied().filter(|&r| r != n && r != ell).collect();
    let d_mn = delta(m, n);
    let mut square = true;
    let mut ratio = true;
    let mut members = 0;
    for &z in &rows {
        for &r in cols.iter().filter(|&&r| r != m) {
            members += 1;
            let form = f.add(f.mul(u(z, r), d_mn), f.mul(u(z, m), delta(n, r)));
            square &= form.is_zero();
        }
        for &r1 in &cols {
            for &r2 in &cols {
                ratio &= f.mul(u(z, r1), delta(n, r2)) == f.mul(u(z, r2), delta(n, r1));
            }
        }
    }
    let (branch, grid_ok) = if d_mn.is_zero() {
        (TransportBranch::DeltaZero, true)
    } else {
        let mut ok = true;
        for &r in &cols {
            let beta = f.neg(f.div(delta(n, r), d_mn)?);
            for &z in &rows {
                ok &= u(z, r) == f.mul(u(z, m), beta);
            }
        }
        for (i, &z1) in rows.iter().enumerate() {
            for &z2 in &rows[i + 1..] {
                for (j, &r1) in cols.iter().enumerate() {
                    for &r2 in &cols[j + 1..] {
                        ok &= f.mul(u(z1, r1), u(z2, r2)) == f.mul(u(z1, r2), u(z2, r1));
                    }
                }
            }
        }
        (TransportBranch::GridFactorization, ok)
    };
    Ok(TransportReport { members, square_initial_form_factorizes: square, ratio_constancy: ratio, branch, grid_ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derangement_sums() {
        assert_eq!(derangement_sign_sum(2), -1);
        assert_eq!(derangement_sign_sum(4), -3);
        assert_eq!(derangement_sign_sum(5), 4);
        assert_eq!(derangement_count(5), 44);
    }

    #[test]
    fn turan_bounds() {
        assert_eq!(turan_bound(7), 1);
        assert_eq!(turan_bound(12), 6);
        assert_eq!(turan_bound(5), 0);
    }
}
