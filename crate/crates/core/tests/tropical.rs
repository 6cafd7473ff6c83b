use proptest::prelude::*;

use tplab_core::build_pg2;
use tplab_core::census::{enumerate_bstar_witnesses, BSTAR_DISPLAYED, WITNESS_PATTERN};
use tplab_core::patterns::EXCEPTIONAL_03;
use tplab_core::tropical::{
    cycle_between, detect_diamond_pairs, degenerate_diamond_test, matching_cycle, profile_table, tropical_profile,
    zero_matching_count, zero_matching_count4, RectangleKind, SquarePattern, PERMS4,
};
use tplab_core::{Error, Pattern4};

/// Recursive row-by-row minimum with the minimizer list, independent of the permutation tables.
fn expand(m: &[[u8; 4]; 4], row: usize, used: u8, acc: u32, prefix: &mut Vec<u8>, out: &mut Vec<(u32, [u8; 4])>) {
    if row == 4 {
        out.push((acc, [prefix[0], prefix[1], prefix[2], prefix[3]]));
        return;
    }
    for c in 0..4u8 {
        if used >> c & 1 == 0 {
            prefix.push(c);
            expand(m, row + 1, used | 1 << c, acc + m[row][c as usize] as u32, prefix, out);
            prefix.pop();
        }
    }
}

fn oracle(m: Pattern4) -> (u8, Vec<[u8; 4]>) {
    let mut all = Vec::new();
    expand(&m.rows(), 0, 0, 0, &mut Vec::new(), &mut all);
    let min = all.iter().map(|x| x.0).min().unwrap();
    let mut mins: Vec<[u8; 4]> = all.into_iter().filter(|x| x.0 == min).map(|x| x.1).collect();
    mins.sort();
    (min as u8, mins)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]
    #[test]
    fn profile_matches_recursive_expansion(bits in any::<u16>()) {
        let p = tropical_profile(Pattern4(bits));
        let (w, mins) = oracle(Pattern4(bits));
        prop_assert_eq!(p.min_weight, w);
        prop_assert_eq!(p.minimizers(), mins);
    }
}

#[test]
fn documented_profiles() {
    let id = tropical_profile(Pattern4::identity());
    assert_eq!(id.type_tag(), (0, 9));
    assert!(id.minimizers().iter().all(|s| (0..4).all(|i| s[i] as usize != i)));
    assert_eq!(tropical_profile(Pattern4::from_rows(BSTAR_DISPLAYED)).type_tag(), (0, 3));
    assert_eq!(tropical_profile(Pattern4::from_rows(WITNESS_PATTERN)).type_tag(), (0, 3));
    assert_eq!(tropical_profile(Pattern4::ZERO).type_tag(), (0, 24));
    assert_eq!(tropical_profile(Pattern4(u16::MAX)).type_tag(), (4, 24));
}

#[test]
fn serialization_is_bit_exact() {
    for bits in [0u16, 1, 0x8421, 0xffff, 0x1234] {
        let m = Pattern4(bits);
        assert_eq!(Pattern4::from_rows(m.rows()), m);
        assert_eq!(m.get(0, 0) as u16, bits & 1);
    }
    assert_eq!(Pattern4::identity().0, 0x8421);
}

#[test]
fn cycle_examples() {
    let id = [0, 1, 2, 3];
    let c = cycle_between(&id, &[1, 0, 2, 3]).unwrap();
    assert_eq!((c.length, c.sign_ratio), (4, -1));
    let c = cycle_between(&id, &[1, 2, 0, 3]).unwrap();
    assert_eq!((c.length, c.sign_ratio), (6, 1));
    let c = cycle_between(&id, &[1, 2, 3, 0]).unwrap();
    assert_eq!((c.length, c.sign_ratio), (8, -1));
    // two disjoint transpositions are not a single cycle
    assert!(cycle_between(&id, &[1, 0, 3, 2]).is_none());
    assert_eq!(matching_cycle(&tropical_profile(Pattern4::ZERO)), Err(Error::NotTwoMinimizers));
}

#[test]
fn two_minimizer_profiles_are_single_cycles() {
    let mut seen = 0;
    for (bits, p) in profile_table().iter().enumerate() {
        if p.count() != 2 {
            continue;
        }
        seen += 1;
        let c = matching_cycle(p).unwrap_or_else(|_| panic!("pattern {bits:#06x}"));
        let k = (c.length / 2) as i32;
        assert_eq!(c.sign_ratio as i32, (-1i32).pow((k - 1) as u32));
        let m = p.minimizers();
        let moved = (0..4).filter(|&r| m[0][r] != m[1][r]).count();
        assert_eq!(moved, c.length / 2);
    }
    assert!(seen > 0);
}

#[test]
fn diamond_examples() {
    let p = tropical_profile(Pattern4::from_rows(WITNESS_PATTERN));
    let pairs = detect_diamond_pairs(&p);
    assert!(pairs.iter().any(|d| d.rows == (0, 1) && d.cols == (0, 1) || d.rows == (0, 1) && d.cols == (1, 0)));
    for d in &pairs {
        let (r, s) = (d.rows.0 as usize, d.rows.1 as usize);
        assert!((0..4).filter(|&i| i != r && i != s).all(|i| d.first[i] == d.second[i]));
        assert_eq!((d.first[r], d.first[s]), (d.second[s], d.second[r]));
    }
    assert!(detect_diamond_pairs(&tropical_profile(Pattern4::from_rows(EXCEPTIONAL_03))).is_empty());
    let single = tropical_profile(Pattern4::from_rows([[0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]]));
    assert_eq!(single.count(), 1);
    assert!(detect_diamond_pairs(&single).is_empty());
}

/// Brute-force permanent of the zero indicator over all permutations of 0..k.
fn brute_zero_matchings(rows: &[Vec<u8>]) -> u64 {
    let k = rows.len();
    tplab_core::perm::permutations(k).iter().filter(|s| (0..k).all(|i| rows[i][s[i]] == 0)).count() as u64
}

#[test]
fn zero_matching_examples() {
    assert_eq!(zero_matching_count4(Pattern4::identity()), 9);
    assert_eq!(zero_matching_count4(Pattern4(u16::MAX)), 0);
    assert_eq!(zero_matching_count(&SquarePattern::from_pattern4(Pattern4::identity())), 9);
    let ones = vec![vec![1u8; 5]; 5];
    assert_eq!(zero_matching_count(&SquarePattern::from_rows(&ones).unwrap()), 0);
    let zeros = vec![vec![0u8; 6]; 6];
    assert_eq!(zero_matching_count(&SquarePattern::from_rows(&zeros).unwrap()), 720);
    assert!(SquarePattern::from_rows(&vec![vec![0u8; 7]; 7]).is_err());
    assert!(SquarePattern::from_rows(&[vec![0, 2], vec![0, 0]]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]
    #[test]
    fn zero_matchings_match_brute_force(k in 1usize..=6, seed in any::<u64>()) {
        let rows: Vec<Vec<u8>> = (0..k).map(|i| (0..k).map(|j| ((seed >> ((i * k + j) % 64)) & 1) as u8).collect()).collect();
        prop_assert_eq!(zero_matching_count(&SquarePattern::from_rows(&rows).unwrap()), brute_zero_matchings(&rows));
    }

    #[test]
    fn identical_zero_rows_give_even_count(k in 2usize..=6, seed in any::<u64>(), r in 0usize..6, s in 0usize..6) {
        let (r, s) = (r % k, s % k);
        prop_assume!(r != s);
        let mut rows: Vec<Vec<u8>> = (0..k).map(|i| (0..k).map(|j| ((seed >> ((i * k + j) % 64)) & 1) as u8).collect()).collect();
        rows[s] = rows[r].clone();
        prop_assert_eq!(zero_matching_count(&SquarePattern::from_rows(&rows).unwrap()) % 2, 0);
    }
}

#[test]
fn identical_neighborhood_parity_exhaustive() {
    for bits in 0..=u16::MAX {
        let m = Pattern4(bits);
        let dup = (0..4).any(|r| (r + 1..4).any(|s| m.row_bits(r) == m.row_bits(s)));
        if dup {
            assert_eq!(zero_matching_count4(m) % 2, 0, "{bits:#06x}");
        }
        assert_eq!(zero_matching_count4(m) as u64, zero_matching_count(&SquarePattern::from_pattern4(m)));
    }
    assert_eq!(PERMS4.len(), 24);
}

#[test]
fn rectangle_classification() {
    let plane = build_pg2(3).unwrap();
    let report = enumerate_bstar_witnesses(&plane).unwrap();
    for w in report.witnesses.iter().take(200) {
        let (a, b, l0, l1) = w.rectangle();
        assert_eq!(degenerate_diamond_test(&plane, a, b, l0, l1), RectangleKind::Skew);
    }
    // a point on m is never part of a rectangle
    let m = 0;
    let x = plane.line_points(m)[0];
    assert_eq!(degenerate_diamond_test(&plane, x, (x + 1) % 13, m, 1), RectangleKind::NotARectangle);
    // choose W, lines m,n through W, a line l through W, and two points of l off W
    let w = 0;
    let pencil = plane.pencil(w);
    let (m, n, l) = (pencil[0], pencil[1], pencil[2]);
    let off: Vec<usize> = plane.line_points(l).iter().copied().filter(|&p| p != w).collect();
    assert_eq!(degenerate_diamond_test(&plane, off[0], off[1], m, n), RectangleKind::Degenerate);
}
