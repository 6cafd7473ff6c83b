//! Census of all 2^16 zero-one 4x4 patterns up to row and column permutations.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::tropical::{detect_diamond_pairs, tropical_profile, zero_matching_count4, Pattern4, PERMS4};

/// The (0,3) orbit without a diamond pair, in its displayed orientation.
pub const EXCEPTIONAL_03: [[u8; 4]; 4] = [[0, 0, 0, 1], [0, 1, 1, 0], [1, 0, 1, 0], [1, 1, 0, 0]];

/// col_lut[t][nibble]: the nibble after permuting its columns by t.
fn col_lut() -> &'static [[u8; 16]; 24] {
    static LUT: OnceLock<[[u8; 16]; 24]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [[0u8; 16]; 24];
        for (t, perm) in PERMS4.iter().enumerate() {
            for nib in 0..16u8 {
                let mut out = 0u8;
                for j in 0..4 {
                    if nib >> perm[j] & 1 == 1 {
                        out |= 1 << j;
                    }
                }
                lut[t][nib as usize] = out;
            }
        }
        lut
    })
}

/// Image with entries m'[i][j] = m[rows[i]][cols[j]].
pub fn permute(m: Pattern4, rows: &[u8; 4], cols: &[u8; 4]) -> Pattern4 {
    let t = PERMS4.iter().position(|p| p == cols).expect("column permutation");
    let lut = &col_lut()[t];
    let mut out = 0u16;
    for i in 0..4 {
        out |= (lut[m.row_bits(rows[i] as usize) as usize] as u16) << (4 * i);
    }
    Pattern4(out)
}

/// Minimum 16-bit id over the 576 row/column permutation images.
pub fn canonical_form(m: Pattern4) -> Pattern4 {
    let lut = col_lut();
    let nib = [m.row_bits(0), m.row_bits(1), m.row_bits(2), m.row_bits(3)];
    let mut best = u16::MAX;
    for row_perm in PERMS4.iter() {
        for col in lut.iter() {
            let id = (col[nib[row_perm[0] as usize] as usize] as u16)
                | (col[nib[row_perm[1] as usize] as usize] as u16) << 4
                | (col[nib[row_perm[2] as usize] as usize] as u16) << 8
                | (col[nib[row_perm[3] as usize] as usize] as u16) << 12;
            best = best.min(id);
        }
    }
    Pattern4(best)
}

/// Whether the zero matchings of a pattern contain a diamond pair.
pub fn has_diamond(m: Pattern4) -> bool {
    let p = tropical_profile(m);
    p.min_weight == 0 && !detect_diamond_pairs(&p).is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternOrbit {
    pub canonical_form: Pattern4,
    pub orbit_size: u32,
    pub zero_matching_count: u32,
    pub has_diamond: bool,
}

/// Every orbit of the row-by-column action, sorted by canonical id.
pub fn all_orbits() -> Vec<PatternOrbit> {
    let canon: Vec<u16> = (0..=u16::MAX).into_par_iter().map(|b| canonical_form(Pattern4(b)).0).collect();
    let mut sizes: BTreeMap<u16, u32> = BTreeMap::new();
    for &c in &canon {
        *sizes.entry(c).or_default() += 1;
    }
    sizes
        .into_iter()
        .map(|(c, n)| {
            let m = Pattern4(c);
            PatternOrbit { canonical_form: m, orbit_size: n, zero_matching_count: zero_matching_count4(m), has_diamond: has_diamond(m) }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Census03 {
    pub raw03_count: u64,
    pub orbit_count: u64,
    pub diamond_orbit_count: u64,
    pub raw_diamond_count: u64,
    pub raw_non_diamond_count: u64,
    pub exceptional_canonical: Pattern4,
    pub canonical_ids: Vec<u16>,
    pub orbits: Vec<PatternOrbit>,
}

pub fn census_03() -> Census03 {
    let raw: Vec<u16> = (0..=u16::MAX).into_par_iter().filter(|&b| zero_matching_count4(Pattern4(b)) == 3).collect();
    let mut orbits: BTreeMap<u16, u32> = BTreeMap::new();
    for c in raw.par_iter().map(|&b| canonical_form(Pattern4(b)).0).collect::<Vec<_>>() {
        *orbits.entry(c).or_default() += 1;
    }
    let orbits: Vec<PatternOrbit> = orbits
        .into_iter()
        .map(|(c, n)| PatternOrbit {
            canonical_form: Pattern4(c),
            orbit_size: n,
            zero_matching_count: 3,
            has_diamond: has_diamond(Pattern4(c)),
        })
        .collect();
    let raw_diamond_count: u64 = orbits.iter().filter(|o| o.has_diamond).map(|o| o.orbit_size as u64).sum();
    let exceptional = orbits.iter().find(|o| !o.has_diamond).map(|o| o.canonical_form).unwrap_or(Pattern4::ZERO);
    Census03 {
        raw03_count: raw.len() as u64,
        orbit_count: orbits.len() as u64,
        diamond_orbit_count: orbits.iter().filter(|o| o.has_diamond).count() as u64,
        raw_diamond_count,
        raw_non_diamond_count: raw.len() as u64 - raw_diamond_count,
        exceptional_canonical: exceptional,
        canonical_ids: orbits.iter().map(|o| o.canonical_form.0).collect(),
        orbits,
    }
}

/// Histogram of zero-matching counts over all 2^16 patterns.
pub fn census_by_type() -> BTreeMap<u32, u64> {
    (0..=u16::MAX)
        .into_par_iter()
        .fold(BTreeMap::new, |mut h: BTreeMap<u32, u64>, b| {
            *h.entry(zero_matching_count4(Pattern4(b))).or_default() += 1;
            h
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        })
}
