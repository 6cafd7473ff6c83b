//! Plane-wide exhaustive scans: minor types, degenerate diamonds, B* witnesses,
//! identity minors, rectangle multiplicities and defect counts.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::OnceLock;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holonomy::{CycleVector, F2Basis};
use crate::plane::{nonincidence_graph, ProjectivePlane};
use crate::residue::{cross_ratio, theta4, ResidueModel};
use crate::tropical::{cycle_between, profile_table, tropical_profile, Pattern4, PERMS4};
use crate::Elem;

/// Incidence pattern of an ordered B* witness (A,B,C,D) x (L0,L1,L2,L3).
pub const WITNESS_PATTERN: [[u8; 4]; 4] = [[0, 0, 0, 1], [0, 0, 1, 1], [0, 1, 0, 1], [1, 1, 1, 0]];

/// The B* matrix in its displayed orientation; a column permutation of `WITNESS_PATTERN`.
pub const BSTAR_DISPLAYED: [[u8; 4]; 4] = [[0, 1, 0, 1], [1, 0, 0, 1], [0, 0, 0, 1], [1, 1, 1, 0]];

/// Default cap on the plane order for full minor scans.
pub const DEFAULT_SCAN_CAP: usize = 4;
/// Cap with the long-run flag.
pub const LONG_SCAN_CAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct WitnessRecord {
    /// A, B, C, D
    pub points: [usize; 4],
    /// L0, L1, L2, L3
    pub lines: [usize; 4],
}

impl WitnessRecord {
    /// The skew rectangle (A,B;L0,L1).
    pub fn rectangle(&self) -> (usize, usize, usize, usize) {
        (self.points[0], self.points[1], self.lines[0], self.lines[1])
    }

    pub fn pattern(&self, plane: &ProjectivePlane) -> Pattern4 {
        incidence_pattern(plane, &self.points, &self.lines)
    }

    /// Pattern check plus D = L0 meet L1 off the line AB.
    pub fn is_valid(&self, plane: &ProjectivePlane) -> bool {
        let [a, b, _, d] = self.points;
        self.pattern(plane) == Pattern4::from_rows(WITNESS_PATTERN)
            && plane.meet(self.lines[0], self.lines[1]) == Some(d)
            && !plane.incident(d, plane.join(a, b).unwrap())
    }
}

pub fn incidence_pattern(plane: &ProjectivePlane, rows: &[usize; 4], cols: &[usize; 4]) -> Pattern4 {
    let mut bits = 0u16;
    for r in 0..4 {
        for c in 0..4 {
            if plane.incident(rows[r], cols[c]) {
                bits |= 1 << (4 * r + c);
            }
        }
    }
    Pattern4(bits)
}

fn check_cap(plane: &ProjectivePlane, cap: usize, allow_long: bool) -> Result<()> {
    let q = plane.order();
    let limit = if allow_long { LONG_SCAN_CAP.max(cap) } else { cap };
    if q > limit {
        return Err(Error::ScanTooLarge(q));
    }
    Ok(())
}

/// Shared machinery for scanning all C(v,4)^2 minors.
struct MinorScan<'a> {
    plane: std::marker::PhantomData<&'a ProjectivePlane>,
    subsets: Vec<[u16; 4]>,
    /// nib[p * ns + c]: incidences of point p against column subset c
    nib: Vec<u8>,
}

impl<'a> MinorScan<'a> {
    fn new(plane: &'a ProjectivePlane) -> Self {
        let v = plane.size();
        let subsets: Vec<[u16; 4]> =
            (0..v as u16).combinations(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        let ns = subsets.len();
        let mut nib = vec![0u8; v * ns];
        for p in 0..v {
            for (ci, cs) in subsets.iter().enumerate() {
                let mut b = 0u8;
                for (j, &l) in cs.iter().enumerate() {
                    if plane.incident(p, l as usize) {
                        b |= 1 << j;
                    }
                }
                nib[p * ns + ci] = b;
            }
        }
        MinorScan { plane: std::marker::PhantomData, subsets, nib }
    }

    fn total(&self) -> u64 {
        (self.subsets.len() as u64).pow(2)
    }

    /// Visits every minor; chunks of row subsets are processed in parallel and merged in order.
    fn run<T: Send>(
        &self,
        partitions: usize,
        init: impl Fn() -> T + Sync,
        visit: impl Fn(&mut T, usize, usize, u16) + Sync,
        merge: impl Fn(T, T) -> T,
    ) -> T {
        let ns = self.subsets.len();
        let parts = partitions.clamp(1, ns);
        let bounds: Vec<(usize, usize)> = (0..parts).map(|i| (i * ns / parts, (i + 1) * ns / parts)).collect();
        let results: Vec<T> = bounds
            .par_iter()
            .map(|&(lo, hi)| {
                let mut acc = init();
                for ri in lo..hi {
                    let r = self.subsets[ri];
                    let n0 = &self.nib[r[0] as usize * ns..][..ns];
                    let n1 = &self.nib[r[1] as usize * ns..][..ns];
                    let n2 = &self.nib[r[2] as usize * ns..][..ns];
                    let n3 = &self.nib[r[3] as usize * ns..][..ns];
                    for ci in 0..ns {
                        let pat = n0[ci] as u16 | (n1[ci] as u16) << 4 | (n2[ci] as u16) << 8 | (n3[ci] as u16) << 12;
                        visit(&mut acc, ri, ci, pat);
                    }
                }
                acc
            })
            .collect();
        let mut it = results.into_iter();
        let first = it.next().unwrap_or_else(&init);
        it.fold(first, merge)
    }

    fn rows(&self, ri: usize) -> [usize; 4] {
        self.subsets[ri].map(|x| x as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CensusOptions {
    pub allow_long: bool,
    pub cycle_types: bool,
    pub degenerate_stats: bool,
    /// number of row-subset chunks; results do not depend on it
    pub partitions: usize,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions { allow_long: false, cycle_types: true, degenerate_stats: true, partitions: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TypeCount {
    pub min_weight: u8,
    pub minimizers: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DegenerateStats {
    pub with03_degenerate: u64,
    pub swap_pair_in_minimizers: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MinorTypeCensus {
    pub q: usize,
    pub total_minors: u64,
    pub counts: Vec<TypeCount>,
    /// (0,2) minors by cycle length 4, 6, 8
    pub cycle_lengths: Option<[u64; 3]>,
    pub degenerate: Option<DegenerateStats>,
}

impl MinorTypeCensus {
    pub fn count(&self, min_weight: u8, minimizers: u32) -> u64 {
        self.counts
            .iter()
            .find(|t| t.min_weight == min_weight && t.minimizers == minimizers)
            .map_or(0, |t| t.count)
    }
}

/// Cycle length (4, 6 or 8) of each two-minimizer pattern, 0 otherwise.
fn cycle_length_table() -> &'static [u8] {
    static T: OnceLock<Vec<u8>> = OnceLock::new();
    T.get_or_init(|| {
        profile_table()
            .iter()
            .map(|p| {
                if p.count() != 2 {
                    return 0;
                }
                let m = p.minimizers();
                cycle_between(&m[0], &m[1]).map_or(0, |c| c.length as u8)
            })
            .collect()
    })
}

#[derive(Clone)]
struct CensusAcc {
    counts: Vec<u64>,
    cycles: [u64; 3],
    degenerate: u64,
    swap: u64,
}

/// Whether a (0,3) minor contains a degenerate zero 2x2 block, and whether some such
/// block's swap pair lies in the minimizer set.
fn degenerate_flags(plane: &ProjectivePlane, rows: &[usize; 4], cols: &[usize; 4], pat: u16, mask: u32) -> (bool, bool) {
    let mut any = false;
    let mut swap = false;
    for i in 0..4 {
        for j in i + 1..4 {
            let line = plane.join(rows[i], rows[j]).unwrap();
            for a in 0..4 {
                for b in a + 1..4 {
                    let cells = [4 * i + a, 4 * i + b, 4 * j + a, 4 * j + b];
                    if cells.iter().any(|&c| pat >> c & 1 == 1) {
                        continue;
                    }
                    let w = plane.meet(cols[a], cols[b]).unwrap();
                    if !plane.incident(w, line) {
                        continue;
                    }
                    any = true;
                    if swap_pair_in_mask(mask, i, j, a, b) {
                        swap = true;
                    }
                }
            }
        }
    }
    (any, swap)
}

fn swap_pair_in_mask(mask: u32, i: usize, j: usize, a: usize, b: usize) -> bool {
    for (k, p) in PERMS4.iter().enumerate() {
        if mask >> k & 1 == 0 || p[i] as usize != a || p[j] as usize != b {
            continue;
        }
        let mut other = *p;
        other.swap(i, j);
        let idx = PERMS4.iter().position(|x| *x == other).unwrap();
        if mask >> idx & 1 == 1 {
            return true;
        }
    }
    false
}

pub fn minor_type_census(plane: &ProjectivePlane, opts: &CensusOptions) -> Result<MinorTypeCensus> {
    check_cap(plane, DEFAULT_SCAN_CAP, opts.allow_long)?;
    let scan = MinorScan::new(plane);
    let table = profile_table();
    let cyc = cycle_length_table();
    let acc = scan.run(
        opts.partitions,
        || CensusAcc { counts: vec![0; 5 * 25], cycles: [0; 3], degenerate: 0, swap: 0 },
        |acc, ri, ci, pat| {
            let p = table[pat as usize];
            let n = p.count();
            acc.counts[p.min_weight as usize * 25 + n as usize] += 1;
            if p.min_weight == 0 {
                if n == 2 && opts.cycle_types {
                    acc.cycles[(cyc[pat as usize] as usize - 4) / 2] += 1;
                } else if n == 3 && opts.degenerate_stats {
                    let (any, swap) = degenerate_flags(plane, &scan.rows(ri), &scan.rows(ci), pat, p.mask);
                    acc.degenerate += any as u64;
                    acc.swap += swap as u64;
                }
            }
        },
        |mut a, b| {
            for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                *x += y;
            }
            for k in 0..3 {
                a.cycles[k] += b.cycles[k];
            }
            a.degenerate += b.degenerate;
            a.swap += b.swap;
            a
        },
    );
    let counts = (0..5u8)
        .flat_map(|w| (1..=24u32).map(move |n| (w, n)))
        .filter_map(|(w, n)| {
            let c = acc.counts[w as usize * 25 + n as usize];
            (c > 0).then_some(TypeCount { min_weight: w, minimizers: n, count: c })
        })
        .collect();
    Ok(MinorTypeCensus {
        q: plane.order(),
        total_minors: scan.total(),
        counts,
        cycle_lengths: opts.cycle_types.then_some(acc.cycles),
        degenerate: opts.degenerate_stats.then_some(DegenerateStats { with03_degenerate: acc.degenerate, swap_pair_in_minimizers: acc.swap }),
    })
}

pub fn degenerate_diamond_census(plane: &ProjectivePlane, allow_long: bool) -> Result<DegenerateStats> {
    let opts = CensusOptions { allow_long, cycle_types: false, degenerate_stats: true, ..Default::default() };
    Ok(minor_type_census(plane, &opts)?.degenerate.unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpanReport {
    pub span_dim: usize,
    pub ambient_dim: usize,
    pub equal: bool,
    pub vectors: u64,
}

/// GF(2) span of the symmetric-difference cycles of all (0,2) minors.
pub fn cycle_span_of_02_minors(plane: &std::sync::Arc<ProjectivePlane>, allow_long: bool, partitions: usize) -> Result<SpanReport> {
    check_cap(plane, 3, allow_long)?;
    let zg = nonincidence_graph(plane);
    let ne = zg.edge_count();
    let ambient = ne - zg.vertex_count() + 1;
    let scan = MinorScan::new(plane);
    let table = profile_table();
    let (basis, vectors) = scan.run(
        partitions,
        || (F2Basis::new(ne), 0u64),
        |(basis, n), ri, ci, pat| {
            let p = table[pat as usize];
            if p.min_weight != 0 || p.count() != 2 || basis.rank() == ambient {
                if p.min_weight == 0 && p.count() == 2 {
                    *n += 1;
                }
                return;
            }
            *n += 1;
            let m = p.minimizers();
            let c = cycle_between(&m[0], &m[1]).unwrap();
            let rows = scan.rows(ri);
            let cols = scan.rows(ci);
            let mut v = CycleVector::zero(ne);
            let k = c.points.len();
            for i in 0..k {
                let l = cols[c.lines[i] as usize];
                v.toggle(zg.edge_id(rows[c.points[i] as usize], l).unwrap());
                v.toggle(zg.edge_id(rows[c.points[(i + 1) % k] as usize], l).unwrap());
            }
            basis.insert(v);
        },
        |(mut a, n1), (b, n2)| {
            for v in b.into_vectors() {
                a.insert(v);
            }
            (a, n1 + n2)
        },
    );
    let span = basis.rank();
    Ok(SpanReport { span_dim: span, ambient_dim: ambient, equal: span == ambient, vectors })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BStarReport {
    pub q: usize,
    pub ordered_count: u64,
    pub formula: u64,
    pub per_triple_ok: bool,
    pub pattern_ok: bool,
    pub skew_rectangle_count: u64,
    pub bijection_ok: bool,
    /// distinct (row set, column set) pairs realizing the pattern under some ordering
    pub distinct_minor_count: u64,
    #[serde(skip)]
    pub witnesses: Vec<WitnessRecord>,
}

pub fn bstar_formula(q: u64) -> u64 {
    (q * q + q + 1) * (q + 1) * q * (q - 1) * q * q * (q - 2)
}

fn witnesses_at(plane: &ProjectivePlane, d: usize) -> (Vec<WitnessRecord>, bool) {
    let q = plane.order();
    let mut out = Vec::new();
    let mut per_triple_ok = true;
    let pencil = plane.pencil(d);
    for &l0 in pencil {
        for &l1 in pencil {
            for &l2 in pencil {
                if l0 == l1 || l0 == l2 || l1 == l2 {
                    continue;
                }
                let before = out.len();
                for &b in plane.line_points(l2).iter().filter(|&&b| b != d) {
                    for &c in plane.line_points(l1).iter().filter(|&&c| c != d) {
                        let l3 = plane.join(b, c).unwrap();
                        let e = plane.meet(l0, l3).unwrap();
                        for &a in plane.line_points(l3) {
                            if a != b && a != c && a != e {
                                out.push(WitnessRecord { points: [a, b, c, d], lines: [l0, l1, l2, l3] });
                            }
                        }
                    }
                }
                per_triple_ok &= out.len() - before == q * q * (q - 2);
            }
        }
    }
    (out, per_triple_ok)
}

/// The unique witness extending a skew rectangle (A,B;L0,L1), if it is one.
pub fn witness_from_rectangle(plane: &ProjectivePlane, a: usize, b: usize, l0: usize, l1: usize) -> Option<WitnessRecord> {
    if a == b || l0 == l1 || [(a, l0), (a, l1), (b, l0), (b, l1)].iter().any(|&(p, l)| plane.incident(p, l)) {
        return None;
    }
    let d = plane.meet(l0, l1)?;
    let l3 = plane.join(a, b)?;
    if plane.incident(d, l3) {
        return None;
    }
    let l2 = plane.join(b, d)?;
    let c = plane.meet(l1, l3)?;
    let w = WitnessRecord { points: [a, b, c, d], lines: [l0, l1, l2, l3] };
    w.is_valid(plane).then_some(w)
}

/// A uniformly random ordered witness, by rejection on random rectangles.
pub fn sample_bstar_witness<R: rand::Rng>(plane: &ProjectivePlane, rng: &mut R) -> Result<WitnessRecord> {
    if plane.order() < 3 {
        return Err(Error::PreconditionViolated("B* witnesses need q >= 3".into()));
    }
    let v = plane.size();
    loop {
        let (a, b, l0, l1) = (rng.gen_range(0..v), rng.gen_range(0..v), rng.gen_range(0..v), rng.gen_range(0..v));
        if let Some(w) = witness_from_rectangle(plane, a, b, l0, l1) {
            return Ok(w);
        }
    }
}

/// Enumerates ordered B* witnesses and checks the count, pattern and skew-rectangle bijection.
pub fn enumerate_bstar_witnesses(plane: &ProjectivePlane) -> Result<BStarReport> {
    let q = plane.order();
    if q < 3 {
        return Err(Error::PreconditionViolated("B* witnesses need q >= 3".into()));
    }
    let v = plane.size();
    let parts: Vec<(Vec<WitnessRecord>, bool)> = (0..v).into_par_iter().map(|d| witnesses_at(plane, d)).collect();
    let per_triple_ok = parts.iter().all(|p| p.1);
    let witnesses: Vec<WitnessRecord> = parts.into_iter().flat_map(|p| p.0).collect();
    let pattern_ok = witnesses.par_iter().all(|w| w.is_valid(plane));

    // Skew rectangles: ordered A != B, L0 != L1, all nonincident, L0 meet L1 off AB.
    let skew_rectangle_count: u64 = (0..v)
        .into_par_iter()
        .map(|a| {
            let mut n = 0u64;
            for b in (0..v).filter(|&b| b != a) {
                let ab = plane.join(a, b).unwrap();
                for l0 in (0..v).filter(|&l| !plane.incident(a, l) && !plane.incident(b, l)) {
                    for l1 in (0..v).filter(|&l| l != l0 && !plane.incident(a, l) && !plane.incident(b, l)) {
                        if !plane.incident(plane.meet(l0, l1).unwrap(), ab) {
                            n += 1;
                        }
                    }
                }
            }
            n
        })
        .sum();
    let hit: Vec<AtomicU32> = (0..v.pow(4)).map(|_| AtomicU32::new(0)).collect();
    let unique_extension = witnesses.par_iter().all(|w| {
        let (a, b, l0, l1) = w.rectangle();
        hit[((a * v + b) * v + l0) * v + l1].fetch_add(1, Ordering::Relaxed);
        let d = plane.meet(l0, l1).unwrap();
        let l3 = plane.join(a, b).unwrap();
        let l2 = plane.join(b, d).unwrap();
        let c = plane.meet(l1, l3).unwrap();
        *w == WitnessRecord { points: [a, b, c, d], lines: [l0, l1, l2, l3] }
    });
    let injective = hit.par_iter().all(|h| h.load(Ordering::Relaxed) <= 1);
    let bijection_ok = unique_extension && injective && skew_rectangle_count == witnesses.len() as u64;
    let distinct: HashSet<([usize; 4], [usize; 4])> = witnesses
        .iter()
        .map(|w| {
            let mut p = w.points;
            let mut l = w.lines;
            p.sort_unstable();
            l.sort_unstable();
            (p, l)
        })
        .collect();
    Ok(BStarReport {
        q,
        ordered_count: witnesses.len() as u64,
        formula: bstar_formula(q as u64),
        per_triple_ok,
        pattern_ok,
        skew_rectangle_count,
        bijection_ok,
        distinct_minor_count: distinct.len() as u64,
        witnesses,
    })
}

/// Ordered private-line identity minors: a quadrangle P1..P4 and, for each Pi, a line
/// through Pi missing the other three points.
pub fn for_each_identity_minor<F: Fn([usize; 4], [usize; 4]) + Sync>(plane: &ProjectivePlane, f: F) {
    let v = plane.size();
    (0..v).into_par_iter().for_each(|p1| {
        let mut pts = [p1, 0, 0, 0];
        for p2 in (0..v).filter(|&x| x != p1) {
            pts[1] = p2;
            let l12 = plane.join(p1, p2).unwrap();
            for p3 in (0..v).filter(|&x| !plane.incident(x, l12)) {
                pts[2] = p3;
                let l13 = plane.join(p1, p3).unwrap();
                let l23 = plane.join(p2, p3).unwrap();
                for p4 in (0..v).filter(|&x| !plane.incident(x, l12) && !plane.incident(x, l13) && !plane.incident(x, l23)) {
                    pts[3] = p4;
                    let private: Vec<Vec<usize>> = (0..4)
                        .map(|i| {
                            plane
                                .pencil(pts[i])
                                .iter()
                                .copied()
                                .filter(|&l| (0..4).all(|j| j == i || !plane.incident(pts[j], l)))
                                .collect()
                        })
                        .collect();
                    for &a in &private[0] {
                        for &b in &private[1] {
                            for &c in &private[2] {
                                for &d in &private[3] {
                                    f(pts, [a, b, c, d]);
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

pub fn identity_formula(q: u64) -> u64 {
    let v = q * q + q + 1;
    if q < 2 {
        return 0;
    }
    v * (v - 1) * q * q * (q - 1) * (q - 1) * (q - 2).pow(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentityReport {
    pub q: usize,
    pub ordered_constructive_count: u64,
    pub formula_lower_bound: u64,
    /// unordered (row set, column set) minors whose pattern is a permutation matrix
    pub full_scan_exact_count: Option<u64>,
}

fn is_permutation_pattern(pat: u16) -> bool {
    let rows_ok = (0..4).all(|r| (pat >> (4 * r) & 0xF).count_ones() == 1);
    let cols_ok = (0..4).all(|c| (0..4).filter(|r| pat >> (4 * r + c) & 1 == 1).count() == 1);
    rows_ok && cols_ok
}

pub fn enumerate_identity_minors(plane: &ProjectivePlane, full_scan: bool) -> Result<IdentityReport> {
    let q = plane.order();
    let count = AtomicCounter::default();
    for_each_identity_minor(plane, |_, _| count.add(1));
    let full = if full_scan && q <= 3 {
        let scan = MinorScan::new(plane);
        Some(scan.run(64, || 0u64, |n, _, _, pat| *n += is_permutation_pattern(pat) as u64, |a, b| a + b))
    } else {
        None
    };
    Ok(IdentityReport {
        q,
        ordered_constructive_count: count.get(),
        formula_lower_bound: identity_formula(q as u64),
        full_scan_exact_count: full,
    })
}

#[derive(Default)]
struct AtomicCounter(std::sync::atomic::AtomicU64);

impl AtomicCounter {
    fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }
    fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

fn pair_index(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    b * (b - 1) / 2 + a
}

/// The six admissible rectangles of an ordered identity minor: rows {Pi,Pj}, columns the complement lines.
pub fn admissible_rectangles(pts: &[usize; 4], lines: &[usize; 4]) -> [(usize, usize, usize, usize); 6] {
    let mut out = [(0, 0, 0, 0); 6];
    let mut n = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            let rest: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
            out[n] = (pts[i], pts[j], lines[rest[0]], lines[rest[1]]);
            n += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MultiplicityReport {
    pub q: usize,
    pub zero_rectangles: u64,
    /// multiplicity -> number of unordered 0-rectangles
    pub histogram: BTreeMap<u32, u64>,
    pub max_multiplicity: u32,
    pub bound: u64,
    pub bound_ok: bool,
    pub identity_minors: u64,
}

pub fn multiplicity_bound(q: u64) -> u64 {
    16 * 576 * (q + 1).pow(4)
}

/// How many ordered identity minors contain each 0-rectangle as an admissible rectangle.
pub fn rectangle_multiplicity(plane: &ProjectivePlane, allow_long: bool) -> Result<MultiplicityReport> {
    check_cap(plane, DEFAULT_SCAN_CAP, allow_long)?;
    let v = plane.size();
    let np = v * (v - 1) / 2;
    let mult: Vec<AtomicU32> = (0..np * np).map(|_| AtomicU32::new(0)).collect();
    let minors = AtomicCounter::default();
    for_each_identity_minor(plane, |pts, lines| {
        minors.add(1);
        for (a, b, l, m) in admissible_rectangles(&pts, &lines) {
            mult[pair_index(a, b) * np + pair_index(l, m)].fetch_add(1, Ordering::Relaxed);
        }
    });
    let mut histogram = BTreeMap::new();
    let mut zero_rectangles = 0;
    for b in 1..v {
        for a in 0..b {
            for m in 1..v {
                for l in 0..m {
                    if [(a, l), (a, m), (b, l), (b, m)].iter().any(|&(p, x)| plane.incident(p, x)) {
                        continue;
                    }
                    zero_rectangles += 1;
                    let k = mult[pair_index(a, b) * np + pair_index(l, m)].load(Ordering::Relaxed);
                    *histogram.entry(k).or_insert(0u64) += 1;
                }
            }
        }
    }
    let max_multiplicity = histogram.keys().copied().max().unwrap_or(0);
    let bound = multiplicity_bound(plane.order() as u64);
    Ok(MultiplicityReport {
        q: plane.order(),
        zero_rectangles,
        histogram,
        max_multiplicity,
        bound,
        bound_ok: (max_multiplicity as u64) <= bound,
        identity_minors: minors.get(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DefectReport {
    pub q: usize,
    pub zero_rectangles: u64,
    pub defect_count: u64,
    pub identity_count: u64,
    pub theta_zero_all: bool,
    pub per_identity_block_witness: bool,
    pub theta_nonzero_blocks: u64,
    pub blocks_without_defect: u64,
    pub max_multiplicity: u32,
    pub lower_bound_ok: bool,
    /// false in characteristic 3, where the per-block claim is informational
    pub asserted: bool,
}

/// Counts non-flat 0-rectangles and checks that every identity block carries one.
pub fn defect_census(model: &ResidueModel, allow_long: bool) -> Result<DefectReport> {
    if model.rank() > 3 {
        return Err(Error::RankTooHigh(model.rank()));
    }
    let plane = model.plane();
    let v = plane.size();
    let f = model.field();
    let defect_count: u64 = (1..v)
        .into_par_iter()
        .map(|b| {
            let mut n = 0u64;
            for a in 0..b {
                for m in 1..v {
                    for l in 0..m {
                        if let Ok(rho) = cross_ratio(model, a, b, l, m) {
                            n += (rho != Elem::ONE) as u64;
                        }
                    }
                }
            }
            n
        })
        .sum();
    let mult = rectangle_multiplicity(plane, allow_long)?;
    let theta_bad = AtomicCounter::default();
    let no_witness = AtomicCounter::default();
    let count = AtomicCounter::default();
    for_each_identity_minor(plane, |pts, lines| {
        count.add(1);
        let mut u = [[Elem::ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                u[i][j] = model.get(pts[i], lines[j]);
            }
        }
        if theta4(f, &u).map_or(true, |t| !t.is_zero()) {
            theta_bad.add(1);
        }
        let has = admissible_rectangles(&pts, &lines)
            .iter()
            .any(|&(a, b, l, m)| cross_ratio(model, a, b, l, m).is_ok_and(|r| r != Elem::ONE));
        if !has {
            no_witness.add(1);
        }
    });
    let identity_count = count.get();
    let lower_bound_ok = mult.max_multiplicity > 0 && defect_count * mult.max_multiplicity as u64 >= identity_count;
    Ok(DefectReport {
        q: plane.order(),
        zero_rectangles: mult.zero_rectangles,
        defect_count,
        identity_count,
        theta_zero_all: theta_bad.get() == 0,
        per_identity_block_witness: no_witness.get() == 0,
        theta_nonzero_blocks: theta_bad.get(),
        blocks_without_defect: no_witness.get(),
        max_multiplicity: mult.max_multiplicity,
        lower_bound_ok,
        asserted: f.characteristic() != 3,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilyReport {
    /// size of the parameter set (r, Z, s)
    pub family_size: u64,
    /// members with r != m, i.e. genuine minors with four distinct columns
    pub distinct_minor_count: u64,
    pub all_four_minimizers: bool,
    pub swap_pair_all: bool,
}

/// Square-minimizer minors (X,Y,Z,W) x (m,n,r,s) around a degenerate diamond.
pub fn degenerate_square_family_census(plane: &ProjectivePlane, x: usize, y: usize, m: usize, n: usize) -> Result<FamilyReport> {
    use crate::tropical::{degenerate_diamond_test, RectangleKind};
    if degenerate_diamond_test(plane, x, y, m, n) != RectangleKind::Degenerate {
        return Err(Error::NotDegenerate);
    }
    let w = plane.meet(m, n).unwrap();
    let ell = plane.join(x, y).unwrap();
    let mut rep = FamilyReport { family_size: 0, distinct_minor_count: 0, all_four_minimizers: true, swap_pair_all: true };
    for &r in plane.pencil(w).iter().filter(|&&r| r != n && r != ell) {
        for &z in plane.line_points(n).iter().filter(|&&z| z != w) {
            for s in (0..plane.size()).filter(|&s| !plane.incident(w, s)) {
                rep.family_size += 1;
                rep.distinct_minor_count += (r != m) as u64;
                let prof = tropical_profile(incidence_pattern(plane, &[x, y, z, w], &[m, n, r, s]));
                rep.all_four_minimizers &= prof.type_tag() == (0, 4);
                let mins = prof.minimizers();
                rep.swap_pair_all &= mins.contains(&[0, 1, 2, 3]) && mins.contains(&[1, 0, 2, 3]);
            }
        }
    }
    Ok(rep)
}

/// All degenerate 0-rectangles (X<Y, m<n) in index order.
pub fn degenerate_rectangles(plane: &ProjectivePlane) -> Vec<(usize, usize, usize, usize)> {
    use crate::tropical::{degenerate_diamond_test, RectangleKind};
    let v = plane.size();
    let mut out = Vec::new();
    for x in 0..v {
        for y in x + 1..v {
            for m in 0..v {
                for n in m + 1..v {
                    if degenerate_diamond_test(plane, x, y, m, n) == RectangleKind::Degenerate {
                        out.push((x, y, m, n));
                    }
                }
            }
        }
    }
    out
}
