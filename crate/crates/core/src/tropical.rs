//! Tropical determinants of 4x4 {0,1} patterns: minimizers, matching cycles, diamonds.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::ProjectivePlane;

pub type Perm4 = [u8; 4];

/// The 24 permutations of {0,1,2,3} in lexicographic order.
pub const PERMS4: [Perm4; 24] = {
    let mut out = [[0u8; 4]; 24];
    let mut n = 0;
    let mut a = 0;
    while a < 4 {
        let mut b = 0;
        while b < 4 {
            let mut c = 0;
            while c < 4 {
                let d = 6 - a - b - c;
                if a != b && a != c && b != c && d != a && d != b && d != c {
                    out[n] = [a as u8, b as u8, c as u8, d as u8];
                    n += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
};

/// Cell mask of each permutation: bit 4r + sigma(r).
pub const PERM_MASKS: [u16; 24] = {
    let mut out = [0u16; 24];
    let mut i = 0;
    while i < 24 {
        let p = PERMS4[i];
        out[i] = (1 << p[0]) | (1 << (4 + p[1])) | (1 << (8 + p[2])) | (1 << (12 + p[3]));
        i += 1;
    }
    out
};

/// +1 or -1 for each permutation in `PERMS4`.
pub const PERM_SIGNS: [i8; 24] = {
    let mut out = [0i8; 24];
    let mut i = 0;
    while i < 24 {
        let p = PERMS4[i];
        let mut inv = 0;
        let mut a = 0;
        while a < 4 {
            let mut b = a + 1;
            while b < 4 {
                if p[a] > p[b] {
                    inv += 1;
                }
                b += 1;
            }
            a += 1;
        }
        out[i] = if inv % 2 == 0 { 1 } else { -1 };
        i += 1;
    }
    out
};

pub fn perm_index(p: &Perm4) -> usize {
    PERMS4.iter().position(|x| x == p).expect("not a permutation of 0..4")
}

/// A 4x4 {0,1} valuation pattern; bit 4*row + col is set when the entry is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern4(pub u16);

impl Pattern4 {
    pub const ZERO: Pattern4 = Pattern4(0);

    pub fn from_rows(rows: [[u8; 4]; 4]) -> Pattern4 {
        let mut bits = 0u16;
        for (r, row) in rows.iter().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                assert!(x <= 1, "pattern entries are 0 or 1");
                if x == 1 {
                    bits |= 1 << (4 * r + c);
                }
            }
        }
        Pattern4(bits)
    }

    pub fn identity() -> Pattern4 {
        Pattern4::from_rows([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    }

    pub fn get(self, r: usize, c: usize) -> u8 {
        (self.0 >> (4 * r + c) & 1) as u8
    }

    pub fn rows(self) -> [[u8; 4]; 4] {
        let mut out = [[0u8; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = self.get(r, c);
            }
        }
        out
    }

    /// Nibble of row r (bit c is the entry in column c).
    pub fn row_bits(self, r: usize) -> u8 {
        (self.0 >> (4 * r) & 0xF) as u8
    }

    /// Weight of a permutation: the sum of the entries it selects.
    pub fn weight(self, p: &Perm4) -> u32 {
        (0..4).map(|r| self.get(r, p[r] as usize) as u32).sum()
    }
}

impl fmt::Display for Pattern4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.rows();
        let s: Vec<String> = rows.iter().map(|r| format!("{}{}{}{}", r[0], r[1], r[2], r[3])).collect();
        write!(f, "{}", s.join("/"))
    }
}

/// Minimum weight and the set of permutations attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TropicalProfile {
    pub min_weight: u8,
    /// bit i set when `PERMS4[i]` is a minimizer
    pub mask: u32,
}

impl TropicalProfile {
    pub fn count(&self) -> u32 {
        self.mask.count_ones()
    }
    pub fn type_tag(&self) -> (u8, u32) {
        (self.min_weight, self.count())
    }
    /// Minimizers in lexicographic order.
    pub fn minimizers(&self) -> Vec<Perm4> {
        self.indices().map(|i| PERMS4[i]).collect()
    }
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..24).filter(move |i| self.mask >> i & 1 == 1)
    }
}

pub fn tropical_profile(m: Pattern4) -> TropicalProfile {
    let mut w = [0u8; 24];
    for i in 0..24 {
        w[i] = (m.0 & PERM_MASKS[i]).count_ones() as u8;
    }
    let min = *w.iter().min().unwrap();
    let mut mask = 0u32;
    for (i, &x) in w.iter().enumerate() {
        if x == min {
            mask |= 1 << i;
        }
    }
    TropicalProfile { min_weight: min, mask }
}

/// Profiles of all 2^16 patterns, built once.
pub fn profile_table() -> &'static [TropicalProfile] {
    static TABLE: OnceLock<Vec<TropicalProfile>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=u16::MAX).map(|b| tropical_profile(Pattern4(b))).collect())
}

/// The even cycle formed by the symmetric difference of two minimizers.
///
/// `points[i]` and `lines[i]` are local row and column indices with the first
/// minimizer using (points[i], lines[i]) and the second (points[i+1], lines[i]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingCycle {
    pub length: usize,
    pub sign_ratio: i8,
    pub points: Vec<u8>,
    pub lines: Vec<u8>,
}

/// Cycle between two permutations that differ on a single cycle; `None` otherwise.
pub fn cycle_between(first: &Perm4, second: &Perm4) -> Option<MatchingCycle> {
    let mut inv2 = [0u8; 4];
    for r in 0..4 {
        inv2[second[r] as usize] = r as u8;
    }
    let moved: Vec<u8> = (0..4u8).filter(|&r| first[r as usize] != second[r as usize]).collect();
    let start = *moved.first()?;
    let (mut points, mut lines) = (Vec::new(), Vec::new());
    let mut r = start;
    loop {
        points.push(r);
        let c = first[r as usize];
        lines.push(c);
        r = inv2[c as usize];
        if r == start {
            break;
        }
    }
    if points.len() != moved.len() {
        return None;
    }
    let k = points.len();
    let s1 = PERM_SIGNS[perm_index(first)];
    let s2 = PERM_SIGNS[perm_index(second)];
    Some(MatchingCycle { length: 2 * k, sign_ratio: s1 * s2, points, lines })
}

pub fn matching_cycle(p: &TropicalProfile) -> Result<MatchingCycle> {
    if p.count() != 2 {
        return Err(Error::NotTwoMinimizers);
    }
    let m = p.minimizers();
    cycle_between(&m[0], &m[1]).ok_or(Error::NotTwoMinimizers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiamondPair {
    pub rows: (u8, u8),
    pub cols: (u8, u8),
    pub first: Perm4,
    pub second: Perm4,
}

/// Unordered minimizer pairs differing by one row swap.
pub fn detect_diamond_pairs(p: &TropicalProfile) -> Vec<DiamondPair> {
    let m = p.minimizers();
    let mut out = Vec::new();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            let (a, b) = (m[i], m[j]);
            let diff: Vec<usize> = (0..4).filter(|&r| a[r] != b[r]).collect();
            if diff.len() == 2 {
                let (r, s) = (diff[0], diff[1]);
                if a[r] == b[s] && a[s] == b[r] {
                    out.push(DiamondPair { rows: (r as u8, s as u8), cols: (a[r], a[s]), first: a, second: b });
                }
            }
        }
    }
    out
}

/// Square {0,1} pattern of size up to 6, as row bitmasks of the 1-entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquarePattern {
    pub k: usize,
    pub rows: Vec<u8>,
}

impl SquarePattern {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<SquarePattern> {
        let k = rows.len();
        if k == 0 || k > 6 || rows.iter().any(|r| r.len() != k || r.iter().any(|&x| x > 1)) {
            return Err(Error::ShapeMismatch(format!("expected a square 0/1 pattern of size at most 6, got {k} rows")));
        }
        let bits = rows
            .iter()
            .map(|r| r.iter().enumerate().fold(0u8, |acc, (c, &x)| acc | (x << c)))
            .collect();
        Ok(SquarePattern { k, rows: bits })
    }

    pub fn from_pattern4(m: Pattern4) -> SquarePattern {
        SquarePattern { k: 4, rows: (0..4).map(|r| m.row_bits(r)).collect() }
    }
}

/// Number of permutations selecting only 0-entries.
pub fn zero_matching_count(m: &SquarePattern) -> u64 {
    let k = m.k;
    let full = (1usize << k) - 1;
    let mut dp = vec![0u64; 1 << k];
    dp[0] = 1;
    for mask in 0..=full {
        let r = (mask as u32).count_ones() as usize;
        if r >= k || dp[mask] == 0 {
            continue;
        }
        let zeros = !m.rows[r] as usize & full;
        for c in 0..k {
            if zeros >> c & 1 == 1 && mask >> c & 1 == 0 {
                dp[mask | 1 << c] += dp[mask];
            }
        }
    }
    dp[full]
}

pub fn zero_matching_count4(m: Pattern4) -> u32 {
    PERM_MASKS.iter().filter(|&&pm| m.0 & pm == 0).count() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RectangleKind {
    Skew,
    Degenerate,
    NotARectangle,
}

/// Classifies the 2x2 block {X,Y} x {m,n}.
pub fn degenerate_diamond_test(plane: &ProjectivePlane, x: usize, y: usize, m: usize, n: usize) -> RectangleKind {
    if x == y || m == n {
        return RectangleKind::NotARectangle;
    }
    if [(x, m), (x, n), (y, m), (y, n)].iter().any(|&(p, l)| plane.incident(p, l)) {
        return RectangleKind::NotARectangle;
    }
    let w = plane.meet(m, n).expect("distinct lines meet");
    let xy = plane.join(x, y).expect("distinct points span a line");
    if plane.incident(w, xy) {
        RectangleKind::Degenerate
    } else {
        RectangleKind::Skew
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables() {
        assert_eq!(PERMS4[0], [0, 1, 2, 3]);
        assert_eq!(PERMS4[23], [3, 2, 1, 0]);
        assert_eq!(PERM_SIGNS.iter().filter(|&&s| s == 1).count(), 12);
    }

    #[test]
    fn small_counts() {
        let p = SquarePattern::from_rows(&[vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(zero_matching_count(&p), 2);
        assert_eq!(zero_matching_count4(Pattern4::identity()), 9);
    }
}
