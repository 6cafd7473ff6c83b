use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tplab_core::gf::{
    cancellation_depth, field_arith, is_irreducible, jet_arith, jet_det, prime_power, tie_depth_crossratio_check, FieldOp, JetOp,
};
use tplab_core::{Elem, Error, Field, FieldDescriptor, Jet, Matrix, Valuation};

const ORDERS: [u64; 10] = [2, 3, 4, 5, 7, 8, 9, 16, 25, 27];

/// Schoolbook polynomial product reduced by the modulus, independent of the field tables.
fn poly_mul_oracle(f: &Field, a: Elem, b: Elem) -> Elem {
    let d = f.descriptor();
    let (p, k) = (d.p, d.k as usize);
    if k == 1 {
        return Elem((a.0 as u64 * b.0 as u64 % p as u64) as u32);
    }
    let (ca, cb) = (f.coefficients(a), f.coefficients(b));
    let mut prod = vec![0u32; 2 * k - 1];
    for i in 0..k {
        for j in 0..k {
            prod[i + j] = (prod[i + j] + ca[i] * cb[j]) % p;
        }
    }
    for deg in (k..prod.len()).rev() {
        let c = prod[deg];
        if c == 0 {
            continue;
        }
        for i in 0..=k {
            let idx = deg - k + i;
            prod[idx] = (prod[idx] + (p - c) * d.modulus[i] % p) % p;
        }
    }
    f.from_coefficients(&prod[..k]).unwrap()
}

#[test]
fn documented_examples() {
    let f3 = Field::prime(3).unwrap();
    assert_eq!(f3.add(Elem(2), Elem(2)), Elem(1));
    let f4 = Field::with_order(4).unwrap();
    assert_eq!(f4.descriptor().modulus, vec![1, 1, 1]);
    let x = f4.from_coefficients(&[0, 1]).unwrap();
    assert_eq!(f4.coefficients(f4.mul(x, x)), vec![1, 1]);
    let f7 = Field::prime(7).unwrap();
    assert_eq!(f7.div(Elem(3), Elem(5)).unwrap(), Elem(2));
    let inv5 = (1..7).find(|&y| 5 * y % 7 == 1).unwrap();
    assert_eq!(f7.mul(Elem(3), Elem(inv5)), Elem(2));
}

#[test]
fn errors() {
    let f5 = Field::prime(5).unwrap();
    assert_eq!(f5.div(Elem(1), Elem::ZERO), Err(Error::DivisionByZero));
    let a = f5.element(Elem(1)).unwrap();
    let b = Field::prime(7).unwrap().element(Elem(1)).unwrap();
    assert_eq!(field_arith(&a, &b, FieldOp::Add), Err(Error::DescriptorMismatch));
    assert!(matches!(Field::prime(6), Err(Error::InvalidDescriptor(_))));
    assert!(matches!(Field::new(FieldDescriptor { p: 2, k: 2, modulus: vec![1, 0, 1] }), Err(Error::InvalidDescriptor(_))));
    assert!(matches!(Field::with_order(6), Err(Error::UnsupportedOrder(6))));
}

#[test]
fn builtin_moduli_are_irreducible() {
    for q in ORDERS {
        let f = Field::with_order(q).unwrap();
        let d = f.descriptor();
        if d.k > 1 {
            assert!(is_irreducible(&d.modulus, d.p), "GF({q})");
        }
        assert_eq!(prime_power(q), Some((d.p as u64, d.k)));
    }
}

#[test]
fn multiplication_matches_polynomial_oracle() {
    for q in ORDERS {
        let f = Field::with_order(q).unwrap();
        for a in f.elements() {
            for b in f.elements() {
                assert_eq!(f.mul(a, b), poly_mul_oracle(&f, a, b), "GF({q}) {a}*{b}");
            }
        }
    }
}

#[test]
fn multiplicative_group_is_cyclic() {
    for q in ORDERS {
        let f = Field::with_order(q).unwrap();
        let has_generator = f.nonzero_elements().any(|g| (1..q - 1).all(|e| f.pow(g, e) != Elem::ONE));
        assert!(has_generator || q == 2, "GF({q})");
    }
}

fn field_strategy() -> impl Strategy<Value = Field> {
    prop::sample::select(ORDERS.to_vec()).prop_map(|q| Field::with_order(q).unwrap())
}

proptest! {
    #[test]
    fn field_axioms(f in field_strategy(), a in 0u32..1000, b in 0u32..1000, c in 0u32..1000) {
        let q = f.order();
        let (a, b, c) = (Elem(a % q), Elem(b % q), Elem(c % q));
        prop_assert_eq!(f.add(a, b), f.add(b, a));
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(a, f.neg(a)), Elem::ZERO);
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        if !a.is_zero() {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), Elem::ONE);
            prop_assert_eq!(f.pow(a, q as u64 - 1), Elem::ONE);
        }
        prop_assert_eq!(f.parse_elem(&f.format_elem(a)).unwrap(), a);
    }

    #[test]
    fn field_arith_wrapper(f in field_strategy(), a in 0u32..1000, b in 1u32..1000) {
        let q = f.order();
        let (a, b) = (Elem(a % q), Elem(1 + b % (q - 1)));
        let (x, y) = (f.element(a).unwrap(), f.element(b).unwrap());
        prop_assert_eq!(field_arith(&x, &y, FieldOp::Div).unwrap().value, f.div(a, b).unwrap());
        prop_assert_eq!(field_arith(&x, &y, FieldOp::Sub).unwrap().value, f.sub(a, b));
    }
}

fn random_jet(f: &Field, k: usize, rng: &mut impl Rng) -> Jet {
    let c: Vec<Elem> = (0..k).map(|_| Elem(rng.gen_range(0..f.order()))).collect();
    Jet::new(f, k, &c)
}

#[test]
fn jet_valuations() {
    let f = Field::prime(5).unwrap();
    let z = Jet::exact_zero(&f, 3);
    assert_eq!(z.valuation(), Valuation::Infinite);
    let s = Jet::new(&f, 3, &[]);
    assert_eq!(s.valuation(), Valuation::Saturated(3));
    let a = Jet::from_ints(&f, 3, &[0, 2, 1]);
    assert_eq!(a.valuation(), Valuation::Finite(1));
    assert_eq!(a.leading_coefficient(), Some(Elem(2)));
    // (1 + t) - (1 + t) is zero only up to the truncation
    let b = Jet::from_ints(&f, 3, &[1, 1]);
    assert_eq!(jet_arith(&b, &b, JetOp::Sub).unwrap().valuation(), Valuation::Saturated(3));
    assert_eq!(cancellation_depth(&b, &Jet::from_ints(&f, 3, &[1, 1, 4])).unwrap(), Valuation::Finite(2));
    assert!(matches!(cancellation_depth(&a, &b), Err(Error::ValuationMismatch(_, _))));
    assert_eq!(a.inverse(), Err(Error::NotAUnit));
    let g = Field::prime(7).unwrap();
    assert_eq!(a.add(&Jet::new(&g, 3, &[])), Err(Error::DescriptorMismatch));
    assert_eq!(a.add(&Jet::new(&f, 4, &[])), Err(Error::DescriptorMismatch));
}

#[test]
fn jet_product_matches_convolution_and_valuations_add() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in [2u64, 3, 4, 9] {
        let f = Field::with_order(q).unwrap();
        for _ in 0..300 {
            let k = rng.gen_range(1..6);
            let (a, b) = (random_jet(&f, k, &mut rng), random_jet(&f, k, &mut rng));
            let prod = jet_arith(&a, &b, JetOp::Mul).unwrap();
            for n in 0..k {
                let want = f.sum((0..=n).map(|i| f.mul(a.coeff(i), b.coeff(n - i))));
                assert_eq!(prod.coeff(n), want);
            }
            if let (Valuation::Finite(x), Valuation::Finite(y)) = (a.valuation(), b.valuation()) {
                if ((x + y) as usize) < k {
                    assert_eq!(prod.valuation(), Valuation::Finite(x + y));
                }
            }
            let sum = a.add(&b).unwrap();
            assert!(sum.valuation() >= a.valuation().min(b.valuation()));
            if a.valuation() == Valuation::Finite(0) {
                let one = a.mul(&a.inverse().unwrap()).unwrap();
                assert_eq!(one, Jet::constant(&f, k, Elem::ONE));
            }
        }
    }
}

/// Cofactor expansion along the first row; independent of the Leibniz implementation.
fn laplace(m: &[Vec<Jet>]) -> Jet {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let f = m[0][0].field().clone();
    let mut acc = Jet::new(&f, m[0][0].order(), &[]);
    for c in 0..n {
        let minor: Vec<Vec<Jet>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| x.clone()).collect()).collect();
        let term = m[0][c].mul(&laplace(&minor)).unwrap();
        acc = if c % 2 == 0 { acc.add(&term).unwrap() } else { acc.sub(&term).unwrap() };
    }
    acc
}

#[test]
fn jet_det_matches_cofactor_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = Field::prime(7).unwrap();
    for n in 1..=5 {
        for _ in 0..20 {
            let m: Vec<Vec<Jet>> = (0..n).map(|_| (0..n).map(|_| random_jet(&f, 3, &mut rng)).collect()).collect();
            assert_eq!(jet_det(&m).unwrap().coeffs(), laplace(&m).coeffs());
        }
    }
    assert!(matches!(jet_det(&[]), Err(Error::ShapeMismatch(_))));
}

#[test]
fn tie_depth_on_random_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in [2u32, 3, 5, 7] {
        let f = Field::prime(p).unwrap();
        for _ in 0..250 {
            let mut unit = || {
                let mut j = random_jet(&f, 4, &mut rng);
                while j.valuation() != Valuation::Finite(0) {
                    j = random_jet(&f, 4, &mut rng);
                }
                j
            };
            let (a, b, c, d) = (unit(), unit(), unit(), unit());
            assert!(tie_depth_crossratio_check(&a, &b, &c, &d).unwrap().equal);
        }
    }
}

#[test]
fn matrix_rank() {
    let f = Field::prime(5).unwrap();
    assert_eq!(Matrix::identity(4).rank(&f), 4);
    let m = Matrix::from_fn(3, 3, |i, j| f.from_int(((i + 1) * (j + 1)) as i64));
    assert_eq!(m.rank(&f), 1);
    assert_eq!(Matrix::zeros(2, 3).rank(&f), 0);
}
