use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tplab_core::patterns::{all_orbits, canonical_form, census_03, census_by_type, has_diamond, permute, EXCEPTIONAL_03};
use tplab_core::tropical::{zero_matching_count4, PERMS4};
use tplab_core::Pattern4;

/// Canonical form straight from the definition: minimum over all 576 images.
fn canonical_oracle(m: Pattern4) -> Pattern4 {
    let r = m.rows();
    let mut best = u16::MAX;
    for rp in PERMS4.iter() {
        for cp in PERMS4.iter() {
            let mut img = [[0u8; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    img[i][j] = r[rp[i] as usize][cp[j] as usize];
                }
            }
            best = best.min(Pattern4::from_rows(img).0);
        }
    }
    Pattern4(best)
}

#[test]
fn census_03_counts() {
    let c = census_03();
    assert_eq!(c.raw03_count, 4992);
    assert_eq!(c.orbit_count, 13);
    assert_eq!(c.diamond_orbit_count, 12);
    assert_eq!(c.raw_diamond_count, 4896);
    assert_eq!(c.raw_non_diamond_count, 96);
    assert_eq!(c.exceptional_canonical, canonical_form(Pattern4::from_rows(EXCEPTIONAL_03)));
    let exceptional: Vec<_> = c.orbits.iter().filter(|o| !o.has_diamond).collect();
    assert_eq!(exceptional.len(), 1);
    assert_eq!(exceptional[0].orbit_size, 96);
    assert_eq!(c.orbits.iter().map(|o| o.orbit_size as u64).sum::<u64>(), 4992);
}

#[test]
fn histogram_and_orbit_sums() {
    let h = census_by_type();
    assert_eq!(h.values().sum::<u64>(), 65536);
    assert_eq!(h[&3], 4992);
    assert_eq!(h[&24], 1);
    let orbits = all_orbits();
    let identity_canon = canonical_form(Pattern4::identity());
    assert!(orbits.iter().any(|o| o.canonical_form == identity_canon && o.zero_matching_count == 9));
    for (&k, &n) in &h {
        let s: u64 = orbits.iter().filter(|o| o.zero_matching_count == k).map(|o| o.orbit_size as u64).sum();
        assert_eq!(s, n, "class {k}");
    }
}

#[test]
fn canonical_form_matches_definition_and_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let m = Pattern4(rng.gen());
        let c = canonical_form(m);
        assert_eq!(canonical_form(c), c);
        if rng.gen_ratio(1, 20) {
            assert_eq!(c, canonical_oracle(m));
        }
    }
    let id = canonical_form(Pattern4::identity());
    for rp in PERMS4.iter() {
        for cp in PERMS4.iter() {
            assert_eq!(canonical_form(permute(Pattern4::identity(), rp, cp)), id);
        }
    }
}

#[test]
fn orbit_invariants_are_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for o in all_orbits() {
        for _ in 0..5 {
            let rp = PERMS4[rng.gen_range(0..24)];
            let cp = PERMS4[rng.gen_range(0..24)];
            let member = permute(o.canonical_form, &rp, &cp);
            assert_eq!(has_diamond(member), o.has_diamond);
            assert_eq!(zero_matching_count4(member), o.zero_matching_count);
        }
    }
}
