use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tplab_core::census::{degenerate_rectangles, enumerate_bstar_witnesses};
use tplab_core::gf::jet_det;
use tplab_core::patterns::all_orbits;
use tplab_core::residue::{
    admissible_cross_ratio, apply_gauge, cross_ratio, d_terms, degenerate_transport_checks, derangement_sign_sum,
    evaluate_degenerate_transport, flatness_to_rank1, initial_form, monomial_block_rank, overlap_elimination_check, psi4,
    rank_gf, tangent_first_order, theta4, turan_bound, turan_support_check, witness_equation_checks, Block4, Flatness,
    IdentityBlockData, TangentFactorization, TransportBranch,
};
use tplab_core::tropical::tropical_profile;
use tplab_core::{build_pg2, canonical_residue_model, Elem, Error, Field, Jet, Matrix, Pattern4, ProjectivePlane, ResidueModel};

fn inversions_sign(p: &[usize]) -> i64 {
    let inv = (0..p.len()).flat_map(|i| (i + 1..p.len()).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

fn all_perms4() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j])) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn signed(f: &Field, x: Elem, s: i64) -> Elem {
    if s < 0 {
        f.neg(x)
    } else {
        x
    }
}

/// Derangement sum written out independently of the library tables.
fn theta_oracle(f: &Field, u: &Block4) -> Elem {
    let mut acc = Elem::ZERO;
    for p in all_perms4() {
        if (0..4).all(|i| p[i] != i) {
            acc = f.add(acc, signed(f, f.product((0..4).map(|i| u[i][p[i]])), inversions_sign(&p)));
        }
    }
    acc
}

fn nz(f: &Field, rng: &mut impl Rng) -> Elem {
    Elem(rng.gen_range(1..f.order()))
}

fn rank1_block(f: &Field, alpha: [Elem; 4], beta: [Elem; 4]) -> Block4 {
    let mut u = [[Elem::ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                u[i][j] = f.mul(alpha[i], beta[j]);
            }
        }
    }
    u
}

#[test]
fn theta4_examples() {
    let f5 = Field::prime(5).unwrap();
    let ones = rank1_block(&f5, [Elem::ONE; 4], [Elem::ONE; 4]);
    assert_eq!(theta4(&f5, &ones).unwrap(), Elem(2));
    let f3 = Field::prime(3).unwrap();
    assert_eq!(theta4(&f3, &rank1_block(&f3, [Elem::ONE; 4], [Elem::ONE; 4])).unwrap(), Elem::ZERO);
    let mut bad = ones;
    bad[0][1] = Elem::ZERO;
    assert_eq!(theta4(&f5, &bad), Err(Error::ZeroEntry));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for q in [4u64, 5, 7, 9] {
        let f = Field::with_order(q).unwrap();
        for _ in 0..200 {
            let b = IdentityBlockData::random(&f, &mut rng);
            assert_eq!(theta4(&f, &b.u).unwrap(), theta_oracle(&f, &b.u));
        }
    }
}

#[test]
fn theta4_vanishes_on_canonical_identity_blocks() {
    let plane = build_pg2(5).unwrap();
    let model = canonical_residue_model(&plane).unwrap();
    let f = model.field().clone();
    let mut checked = 0;
    // direct construction: points on l*, one chosen line per point
    let v = plane.size();
    'outer: for a in 0..v {
        for b in a + 1..v {
            for c in b + 1..v {
                for d in c + 1..v {
                    let pts = [a, b, c, d];
                    let mut lines = [0usize; 4];
                    for i in 0..4 {
                        let found = (0..v).find(|&l| {
                            plane.incident(pts[i], l) && (0..4).all(|j| j == i || !plane.incident(pts[j], l)) && !lines[..i].contains(&l)
                        });
                        match found {
                            Some(l) => lines[i] = l,
                            None => continue 'outer,
                        }
                    }
                    let mut u = [[Elem::ZERO; 4]; 4];
                    for i in 0..4 {
                        for j in 0..4 {
                            u[i][j] = model.get(pts[i], lines[j]);
                        }
                    }
                    assert_eq!(theta4(&f, &u).unwrap(), Elem::ZERO);
                    checked += 1;
                    if checked >= 500 {
                        break 'outer;
                    }
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn derangement_sums() {
    for k in 2..=6usize {
        let want = (k as i64 - 1) * if k % 2 == 0 { -1 } else { 1 };
        assert_eq!(derangement_sign_sum(k), want);
    }
    assert_eq!(derangement_sign_sum(2), -1);
    assert_eq!(derangement_sign_sum(4), -3);
    assert_eq!(derangement_sign_sum(5), 4);
}

#[test]
fn d_terms_examples() {
    let f7 = Field::prime(7).unwrap();
    assert_eq!(d_terms(&f7, &rank1_block(&f7, [Elem::ONE; 4], [Elem::ONE; 4])).unwrap(), [Elem(2); 4]);
    let f2 = Field::prime(2).unwrap();
    assert_eq!(d_terms(&f2, &rank1_block(&f2, [Elem::ONE; 4], [Elem::ONE; 4])).unwrap(), [Elem::ZERO; 4]);
    let f11 = Field::prime(11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let u = IdentityBlockData::random(&f11, &mut rng).u;
        let d = d_terms(&f11, &u).unwrap();
        let literal = [
            f11.add(f11.product([u[1][2], u[2][3], u[3][1]]), f11.product([u[1][3], u[3][2], u[2][1]])),
            f11.add(f11.product([u[0][2], u[2][3], u[3][0]]), f11.product([u[0][3], u[3][2], u[2][0]])),
            f11.add(f11.product([u[0][1], u[1][3], u[3][0]]), f11.product([u[0][3], u[3][1], u[1][0]])),
            f11.add(f11.product([u[0][1], u[1][2], u[2][0]]), f11.product([u[0][2], u[2][1], u[1][0]])),
        ];
        assert_eq!(d, literal);
    }
}

#[test]
fn psi4_matches_jet_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in [2u32, 3, 5, 7] {
        let f = Field::prime(p).unwrap();
        for _ in 0..1000 {
            let b = IdentityBlockData::random(&f, &mut rng);
            let det = jet_det(&b.jets(&f, 3)).unwrap();
            assert_eq!(det.coeff(0), theta4(&f, &b.u).unwrap());
            assert_eq!(det.coeff(1), psi4(&f, &b).unwrap());
        }
        let mut b = IdentityBlockData::random(&f, &mut rng);
        b.w = [[Elem::ZERO; 4]; 4];
        let d = d_terms(&f, &b.u).unwrap();
        assert_eq!(psi4(&f, &b).unwrap(), f.sum((0..4).map(|i| f.mul(b.a[i], d[i]))));
    }
}

fn random_gauge(f: &Field, v: usize, rng: &mut impl Rng) -> (Vec<Elem>, Vec<Elem>) {
    ((0..v).map(|_| nz(f, rng)).collect(), (0..v).map(|_| nz(f, rng)).collect())
}

fn random_rectangle(plane: &ProjectivePlane, rng: &mut impl Rng) -> (usize, usize, usize, usize) {
    let v = plane.size();
    loop {
        let (p, q, l, m) = (rng.gen_range(0..v), rng.gen_range(0..v), rng.gen_range(0..v), rng.gen_range(0..v));
        if p != q && l != m && [(p, l), (p, m), (q, l), (q, m)].iter().all(|&(a, b)| !plane.incident(a, b)) {
            return (p, q, l, m);
        }
    }
}

#[test]
fn cross_ratio_properties() {
    let f7 = Field::prime(7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let alpha = [nz(&f7, &mut rng), nz(&f7, &mut rng), nz(&f7, &mut rng), nz(&f7, &mut rng)];
    let beta = [nz(&f7, &mut rng), nz(&f7, &mut rng), nz(&f7, &mut rng), nz(&f7, &mut rng)];
    assert_eq!(admissible_cross_ratio(&f7, &rank1_block(&f7, alpha, beta), 0, 1, 2, 3).unwrap(), Elem::ONE);

    let plane = build_pg2(3).unwrap();
    let model = canonical_residue_model(&plane).unwrap();
    let f = model.field().clone();
    for _ in 0..500 {
        let (p, q, l, m) = random_rectangle(&plane, &mut rng);
        let rho = cross_ratio(&model, p, q, l, m).unwrap();
        assert_eq!(cross_ratio(&model, q, p, l, m).unwrap(), f.inv(rho).unwrap());
    }
    let l = plane.pencil(0)[0];
    assert_eq!(cross_ratio(&model, 0, 1, l, (l + 1) % 13), Err(Error::NotAZeroRectangle));

    let report = enumerate_bstar_witnesses(&plane).unwrap();
    assert_eq!(report.witnesses.len(), 2808);
    for w in &report.witnesses {
        let (a, b, l0, l1) = w.rectangle();
        assert_ne!(cross_ratio(&model, a, b, l0, l1).unwrap(), Elem::ONE);
    }
}

#[test]
fn gauge_invariance() {
    let plane = build_pg2(3).unwrap();
    let model = canonical_residue_model(&plane).unwrap();
    let f = model.field().clone();
    let v = plane.size();
    let same = apply_gauge(&model, &vec![Elem::ONE; v], &vec![Elem::ONE; v]).unwrap();
    assert_eq!(same.entries(), model.entries());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let (a, b) = random_gauge(&f, v, &mut rng);
        let g = apply_gauge(&model, &a, &b).unwrap();
        assert_eq!(g.rank(), 3);
        for _ in 0..1000 {
            let (p, q, l, m) = random_rectangle(&plane, &mut rng);
            assert_eq!(cross_ratio(&g, p, q, l, m).unwrap(), cross_ratio(&model, p, q, l, m).unwrap());
        }
    }
    let mut a = vec![Elem::ONE; v];
    a[3] = Elem::ZERO;
    assert!(matches!(apply_gauge(&model, &a, &vec![Elem::ONE; v]), Err(Error::ZeroScalar)));
}

#[test]
fn flatness_examples() {
    let f = Field::prime(7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let alpha = [(); 4].map(|_| nz(&f, &mut rng));
        let beta = [(); 4].map(|_| nz(&f, &mut rng));
        let u = rank1_block(&f, alpha, beta);
        match flatness_to_rank1(&f, &u).unwrap() {
            Flatness::Rank1 { alpha: a, beta: b } => {
                for i in 0..4 {
                    for j in 0..4 {
                        if i != j {
                            assert_eq!(f.mul(a[i], b[j]), u[i][j]);
                        }
                    }
                }
            }
            other => panic!("{other:?}"),
        }
        let mut bent = u;
        bent[2][3] = f.mul(bent[2][3], Elem(3));
        match flatness_to_rank1(&f, &bent).unwrap() {
            Flatness::Defect { rows, cols, rho } => {
                assert_ne!(rho, Elem::ONE);
                assert_eq!(admissible_cross_ratio(&f, &bent, rows.0, rows.1, cols.0, cols.1).unwrap(), rho);
            }
            other => panic!("{other:?}"),
        }
    }
    // an identity block of the canonical rank-3 model over GF(5)
    let plane = build_pg2(5).unwrap();
    let model = canonical_residue_model(&plane).unwrap();
    let mut found = None;
    let l_star = 0;
    let pts: Vec<usize> = plane.line_points(l_star)[..4].to_vec();
    let mut lines = Vec::new();
    for &p in &pts {
        let l = plane.pencil(p).iter().copied().find(|&l| l != l_star && !lines.contains(&l)).unwrap();
        lines.push(l);
    }
    if (0..4).all(|i| (0..4).all(|j| plane.incident(pts[i], lines[j]) == (i == j))) {
        let mut u = [[Elem::ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                u[i][j] = model.get(pts[i], lines[j]);
            }
        }
        found = Some(flatness_to_rank1(model.field(), &u).unwrap());
    }
    assert!(matches!(found, Some(Flatness::Defect { .. })));
}

/// Jets with valuation pattern `pat`, leading coefficient `lead[r][c]` and random higher terms.
fn pattern_jets(f: &Field, pat: Pattern4, lead: &[[Elem; 4]; 4], order: usize, rng: &mut impl Rng) -> Vec<Vec<Jet>> {
    (0..4)
        .map(|r| {
            (0..4)
                .map(|c| {
                    let v = pat.get(r, c) as usize;
                    let mut coeffs = vec![Elem::ZERO; order];
                    coeffs[v] = lead[r][c];
                    for x in coeffs.iter_mut().skip(v + 1) {
                        *x = Elem(rng.gen_range(0..f.order()));
                    }
                    Jet::new(f, order, &coeffs)
                })
                .collect()
        })
        .collect()
}

/// Signed minimizer terms computed from scratch.
fn minimizer_terms(f: &Field, pat: Pattern4, lead: &[[Elem; 4]; 4]) -> Vec<Elem> {
    let weights: Vec<(u32, [usize; 4])> =
        all_perms4().into_iter().map(|p| ((0..4).map(|i| pat.get(i, p[i]) as u32).sum(), p)).collect();
    let min = weights.iter().map(|x| x.0).min().unwrap();
    weights
        .into_iter()
        .filter(|x| x.0 == min)
        .map(|(_, p)| signed(f, f.product((0..4).map(|i| lead[i][p[i]])), inversions_sign(&p)))
        .collect()
}

#[test]
fn initial_form_examples() {
    let f = Field::prime(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    // zeros on the diagonal and on (0,1),(1,0): minimizers id and the swap
    let two = Pattern4::from_rows([[0, 0, 1, 1], [0, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]]);
    assert_eq!(tropical_profile(two).type_tag(), (0, 2));
    let lead = [[Elem::ONE; 4]; 4];
    let r = initial_form(&pattern_jets(&f, two, &lead, 4, &mut rng)).unwrap();
    assert_eq!(r.residue_sum, Elem::ZERO);
    assert!(r.raised);

    let bstar = Pattern4::from_rows(tplab_core::census::BSTAR_DISPLAYED);
    let mut tested = 0;
    while tested < 200 {
        let lead = [(); 4].map(|_| [(); 4].map(|_| nz(&f, &mut rng)));
        let want = f.sum(minimizer_terms(&f, bstar, &lead));
        if want.is_zero() {
            continue;
        }
        let r = initial_form(&pattern_jets(&f, bstar, &lead, 4, &mut rng)).unwrap();
        assert_eq!(r.residue_sum, want);
        assert!(!r.raised);
        tested += 1;
    }

    let alpha = [(); 4].map(|_| nz(&f, &mut rng));
    let beta = [(); 4].map(|_| nz(&f, &mut rng));
    let lead: [[Elem; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| f.mul(alpha[i], beta[j])));
    let r = initial_form(&pattern_jets(&f, Pattern4::identity(), &lead, 4, &mut rng)).unwrap();
    let unit = f.mul(f.product(alpha), f.product(beta));
    assert_eq!(r.residue_sum, f.mul(f.from_int(-3), unit));
    assert!(!r.raised);

    let shallow: Vec<Vec<Jet>> = (0..4).map(|_| (0..4).map(|_| Jet::new(&f, 1, &[])).collect()).collect();
    assert!(initial_form(&shallow).is_err());
}

#[test]
fn raised_iff_residue_sum_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for p in [2u32, 3, 5] {
        let f = Field::prime(p).unwrap();
        for _ in 0..2000 {
            let pat = Pattern4(rng.gen());
            let lead = [(); 4].map(|_| [(); 4].map(|_| nz(&f, &mut rng)));
            let r = initial_form(&pattern_jets(&f, pat, &lead, 6, &mut rng)).unwrap();
            assert_eq!(r.residue_sum, f.sum(minimizer_terms(&f, pat, &lead)));
            assert_eq!(r.raised, r.residue_sum.is_zero());
        }
    }
}

#[test]
fn pure_gauge_obstruction_on_strict_03() {
    let orbits: Vec<_> = all_orbits().into_iter().filter(|o| o.zero_matching_count == 3 && o.has_diamond).collect();
    assert_eq!(orbits.len(), 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for p in [5u32, 7, 11] {
        let f = Field::prime(p).unwrap();
        for o in &orbits {
            for _ in 0..20 {
                let alpha = [(); 4].map(|_| nz(&f, &mut rng));
                let beta = [(); 4].map(|_| nz(&f, &mut rng));
                let lead: [[Elem; 4]; 4] = std::array::from_fn(|i| {
                    std::array::from_fn(|j| if o.canonical_form.get(i, j) == 0 { f.mul(alpha[i], beta[j]) } else { nz(&f, &mut rng) })
                });
                let r = initial_form(&pattern_jets(&f, o.canonical_form, &lead, 4, &mut rng)).unwrap();
                let unit = f.mul(f.product(alpha), f.product(beta));
                let s = f.div(r.residue_sum, unit).unwrap();
                assert!([1i64, -1, 3, -3].iter().any(|&k| f.from_int(k) == s), "orbit {}", o.canonical_form);
                assert!(!r.raised);
            }
        }
    }
}

#[test]
fn pair_only_cancellation_does_not_raise() {
    let f = Field::prime(7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let pat = Pattern4::from_rows(tplab_core::census::WITNESS_PATTERN);
    let mut hits = 0;
    for _ in 0..20_000 {
        let lead = [(); 4].map(|_| [(); 4].map(|_| nz(&f, &mut rng)));
        let c = minimizer_terms(&f, pat, &lead);
        assert_eq!(c.len(), 3);
        if f.add(c[0], c[1]).is_zero() && !c[2].is_zero() {
            hits += 1;
            assert!(!initial_form(&pattern_jets(&f, pat, &lead, 4, &mut rng)).unwrap().raised);
        }
    }
    assert!(hits > 0);
}

#[test]
fn rank_examples() {
    let model = canonical_residue_model(&build_pg2(2).unwrap()).unwrap();
    assert_eq!(rank_gf(model.field(), &model.matrix()), 3);
    let f = Field::prime(3).unwrap();
    assert_eq!(rank_gf(&f, &Matrix::from_fn(7, 7, |_, _| Elem::ONE)), 1);
    assert_eq!(rank_gf(&f, &Matrix::identity(7)), 7);
}

fn random_matrix(f: &Field, r: usize, c: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| Elem(rng.gen_range(0..f.order())))
}

#[test]
fn tangent_rank_bounds() {
    let f = Field::prime(7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let t = TangentFactorization {
        a0: random_matrix(&f, 13, 3, &mut rng),
        b0: random_matrix(&f, 3, 13, &mut rng),
        a1: Matrix::zeros(13, 3),
        b1: Matrix::zeros(3, 13),
    };
    assert!(tangent_first_order(&f, &t).unwrap().is_zero());
    for _ in 0..100 {
        let t = TangentFactorization {
            a0: random_matrix(&f, 13, 3, &mut rng),
            b0: random_matrix(&f, 3, 13, &mut rng),
            a1: random_matrix(&f, 13, 3, &mut rng),
            b1: random_matrix(&f, 3, 13, &mut rng),
        };
        assert!(tangent_first_order(&f, &t).unwrap().rank(&f) <= 6);
    }
    for r in 1..=4 {
        for _ in 0..20 {
            let t = TangentFactorization {
                a0: random_matrix(&f, 13, r, &mut rng),
                b0: random_matrix(&f, r, 13, &mut rng),
                a1: random_matrix(&f, 13, r, &mut rng),
                b1: random_matrix(&f, r, 13, &mut rng),
            };
            assert!(tangent_first_order(&f, &t).unwrap().rank(&f) <= 2 * r);
        }
    }
    let bad = TangentFactorization { a0: Matrix::zeros(13, 3), b0: Matrix::zeros(3, 13), a1: Matrix::zeros(13, 2), b1: Matrix::zeros(3, 13) };
    assert!(matches!(tangent_first_order(&f, &bad), Err(Error::ShapeMismatch(_))));
}

fn choices(plane: &ProjectivePlane, line: usize) -> Vec<usize> {
    plane.line_points(line).iter().map(|&p| plane.pencil(p).iter().copied().find(|&l| l != line).unwrap()).collect()
}

#[test]
fn monomial_block_examples() {
    for (q, rank) in [(2, 3), (3, 4), (7, 8)] {
        let plane = build_pg2(q).unwrap();
        assert_eq!(monomial_block_rank(&plane, 0, &choices(&plane, 0)).unwrap(), (true, rank));
    }
    let plane = build_pg2(3).unwrap();
    let mut c = choices(&plane, 0);
    c[0] = 0;
    assert!(matches!(monomial_block_rank(&plane, 0, &c), Err(Error::InvalidChoice(_))));
}

#[test]
fn turan_examples() {
    assert_eq!(turan_bound(7), 1);
    assert_eq!(turan_bound(12), 6);
    let f = Field::prime(11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut trials = 0;
    while trials < 100 {
        let v = random_matrix(&f, 12, 6, &mut rng).mul(&f, &random_matrix(&f, 6, 12, &mut rng)).unwrap();
        if (0..12).any(|i| v.get(i, i).is_zero()) {
            continue;
        }
        let r = turan_support_check(&f, &v, 6).unwrap();
        assert!(r.independent_ok && r.edge_ok, "{r:?}");
        assert!(r.max_independent.unwrap() <= 6);
        trials += 1;
    }
    assert!(matches!(turan_support_check(&f, &Matrix::zeros(12, 12), 6), Err(Error::PreconditionViolated(_))));
}

#[test]
fn witness_equations_on_canonical_models() {
    for q in [3, 4, 5] {
        let plane = build_pg2(q).unwrap();
        let model = canonical_residue_model(&plane).unwrap();
        let report = enumerate_bstar_witnesses(&plane).unwrap();
        for w in &report.witnesses {
            let c = witness_equation_checks(&model, w).unwrap();
            assert!(c.witness_equation && c.rho_plus_sigma && c.asserted, "q={q}");
            assert_eq!(c.rho_not_one_asserted, q != 4);
            if q != 4 {
                assert!(c.rho_not_one);
            }
        }
    }
}

#[test]
fn overlap_elimination() {
    let f = Field::prime(101).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let r = overlap_elimination_check(&f, 1000, &mut rng).unwrap();
    assert_eq!(r.failures, 0, "{:?}", r.counterexample);
    assert_eq!(r.general_failures, 0);
    assert!(r.negative_control_failures > 0);
    for q in [3u64, 4, 7] {
        let f = Field::with_order(q).unwrap();
        let r = overlap_elimination_check(&f, 300, &mut rng).unwrap();
        assert_eq!((r.failures, r.general_failures), (0, 0), "GF({q})");
    }
    // GF(2) only has the Delta = 0 branch
    let r = overlap_elimination_check(&Field::prime(2).unwrap(), 50, &mut rng).unwrap();
    assert_eq!((r.samples, r.general_samples, r.failures), (0, 0, 0));
    assert!(r.delta_zero_samples > 0);
}

#[test]
fn degenerate_transport_on_canonical_models() {
    for q in [3, 4] {
        let plane = build_pg2(q).unwrap();
        let model = canonical_residue_model(&plane).unwrap();
        let rects = degenerate_rectangles(&plane);
        assert!(!rects.is_empty());
        for &(x, y, m, n) in rects.iter().step_by(rects.len() / 200 + 1) {
            let r = degenerate_transport_checks(&model, x, y, m, n).unwrap();
            assert!(r.all_ok(), "q={q} {:?}", (x, y, m, n));
        }
    }
}

#[test]
fn synthetic_rank1_grid_takes_factorization_branch() {
    let plane = build_pg2(3).unwrap();
    let f = Field::prime(5).unwrap();
    let (x, y, m, n) = degenerate_rectangles(&plane)[0];
    let w = plane.meet(m, n).unwrap();
    let ell = plane.join(x, y).unwrap();
    let v = plane.size();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let alpha: Vec<Elem> = (0..v).map(|_| nz(&f, &mut rng)).collect();
    let beta: Vec<Elem> = (0..v).map(|_| nz(&f, &mut rng)).collect();
    let grid_cols: Vec<usize> = plane.pencil(w).iter().copied().filter(|&r| r != n && r != ell).collect();
    let mut u = vec![Elem::ZERO; v * v];
    for p in 0..v {
        for l in 0..v {
            if plane.incident(p, l) {
                continue;
            }
            u[p * v + l] = if plane.incident(p, n) {
                f.mul(alpha[p], beta[l])
            } else if p == x && (l == n || grid_cols.contains(&l)) {
                beta[l]
            } else if p == y && grid_cols.contains(&l) {
                beta[l]
            } else if p == y && l == n {
                f.mul(Elem(2), beta[l])
            } else {
                nz(&f, &mut rng)
            };
        }
    }
    let model = ResidueModel::new(f, plane.clone(), u).unwrap();
    let r = evaluate_degenerate_transport(&model, x, y, m, n).unwrap();
    assert_eq!(r.branch, TransportBranch::GridFactorization);
    assert!(r.all_ok());

    let skew = enumerate_bstar_witnesses(&plane).unwrap().witnesses[0].rectangle();
    let canon = canonical_residue_model(&plane).unwrap();
    assert_eq!(degenerate_transport_checks(&canon, skew.0, skew.1, skew.2, skew.3), Err(Error::NotDegenerate));
}

#[test]
fn model_dump_round_trip() {
    for q in [3, 4, 9] {
        let plane = build_pg2(q).unwrap();
        let model = canonical_residue_model(&plane).unwrap();
        let text = model.dump();
        let back = ResidueModel::parse(&text, plane.clone()).unwrap();
        assert_eq!(back.entries(), model.entries());
        assert_eq!(back.dump(), text);
    }
    let plane: Arc<ProjectivePlane> = build_pg2(2).unwrap();
    let bad = "model q=2 p=2 k=1\n0 0 0 0 0 0 0\n";
    assert!(matches!(ResidueModel::parse(bad, plane), Err(Error::Parse { .. }) | Err(Error::ZeroPatternMismatch(..))));
}
