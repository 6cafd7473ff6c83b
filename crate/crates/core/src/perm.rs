//! Small permutation helpers shared by the determinant and derangement code.

use itertools::Itertools;

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    (0..n).permutations(n).collect()
}

/// Sign of a permutation given in one-line notation.
pub fn sign(p: &[usize]) -> i64 {
    let mut seen = vec![false; p.len()];
    let mut s = 1;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = p[i];
            len += 1;
        }
        if len % 2 == 0 {
            s = -s;
        }
    }
    s
}

pub fn is_derangement(p: &[usize]) -> bool {
    p.iter().enumerate().all(|(i, &x)| i != x)
}

/// Disjoint cycles of length at least two, each starting at its smallest element.
pub fn cycles(p: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; p.len()];
    let mut out = Vec::new();
    for start in 0..p.len() {
        if seen[start] || p[start] == start {
            continue;
        }
        let mut c = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            c.push(i);
            i = p[i];
        }
        out.push(c);
    }
    out
}
