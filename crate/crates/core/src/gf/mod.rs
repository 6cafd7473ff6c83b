//! Finite fields GF(p^k), truncated power series over them, and dense matrices.

mod jet;
mod matrix;

pub use jet::{
    cancellation_depth, jet_arith, jet_det, tie_depth_crossratio_check, Jet, JetOp, TieDepthCheck,
    Valuation,
};
pub use matrix::Matrix;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest extension-field order for which addition and log tables are built.
const MAX_EXTENSION_ORDER: u64 = 1 << 12;
/// Largest prime accepted for prime fields; keeps products inside u64.
const MAX_PRIME: u64 = 1 << 31;

/// Characteristic, degree and (for k > 1) the monic modulus, low coefficient first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub p: u32,
    pub k: u32,
    pub modulus: Vec<u32>,
}

impl FieldDescriptor {
    pub fn order(&self) -> u64 {
        (self.p as u64).pow(self.k)
    }
}

/// Field element in its integer encoding `sum c_i p^i`, coefficients low first.
///
/// Zero encodes as 0 and one as 1 in every field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Elem(pub u32);

impl Elem {
    pub const ZERO: Elem = Elem(0);
    pub const ONE: Elem = Elem(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

struct Inner {
    desc: FieldDescriptor,
    q: u32,
    tables: Option<Tables>,
}

struct Tables {
    add: Vec<u32>,
    neg: Vec<u32>,
    /// exp[i] = g^i for i in 0..2(q-1)
    exp: Vec<u32>,
    /// log[x] for x != 0
    log: Vec<u32>,
}

/// Shared handle to a finite field. Cloning is cheap.
#[derive(Clone)]
pub struct Field(Arc<Inner>);

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})", self.0.desc.p, self.0.desc.k)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.desc == other.0.desc
    }
}
impl Eq for Field {}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Splits `q` as `p^k` when it is a prime power.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while p * p <= q && q % p != 0 {
        p += 1;
    }
    if q % p != 0 {
        p = q;
    }
    let mut k = 0;
    let mut r = q;
    while r % p == 0 {
        r /= p;
        k += 1;
    }
    (r == 1).then_some((p, k))
}

fn builtin_modulus(p: u32, k: u32) -> Option<Vec<u32>> {
    Some(match (p, k) {
        (2, 2) => vec![1, 1, 1],
        (2, 3) => vec![1, 1, 0, 1],
        (3, 2) => vec![1, 0, 1],
        (2, 4) => vec![1, 1, 0, 0, 1],
        (5, 2) => vec![2, 0, 1],
        (3, 3) => vec![1, 2, 0, 1],
        _ => return None,
    })
}

// Polynomials over GF(p) as coefficient vectors, low degree first.

fn poly_trim(mut a: Vec<u32>) -> Vec<u32> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = poly_trim(a.to_vec());
    let m = poly_trim(m.to_vec());
    let dm = m.len() - 1;
    let inv_lead = inv_mod(m[dm] as u64, p as u64) as u32;
    while r.len() > dm {
        let dr = r.len() - 1;
        let c = (r[dr] as u64 * inv_lead as u64 % p as u64) as u32;
        for (i, &mi) in m.iter().enumerate() {
            let idx = dr - dm + i;
            r[idx] = ((r[idx] as u64 + (p - c) as u64 * mi as u64) % p as u64) as u32;
        }
        r = poly_trim(r);
    }
    r
}

fn poly_mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
        }
    }
    poly_trim(out.into_iter().map(|c| c as u32).collect())
}

fn inv_mod(a: u64, p: u64) -> u64 {
    // Extended Euclid; a is nonzero mod p.
    let (mut r0, mut r1) = (p as i64, (a % p) as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let qt = r0 / r1;
        (r0, r1) = (r1, r0 - qt * r1);
        (t0, t1) = (t1, t0 - qt * t1);
    }
    t0.rem_euclid(p as i64) as u64
}

/// Monic polynomials of the given degree, in lexicographic order of the lower coefficients.
fn monic_polys(p: u32, deg: u32) -> impl Iterator<Item = Vec<u32>> {
    let count = (p as u64).pow(deg);
    (0..count).map(move |mut n| {
        let mut c = Vec::with_capacity(deg as usize + 1);
        for _ in 0..deg {
            c.push((n % p as u64) as u32);
            n /= p as u64;
        }
        c.push(1);
        c
    })
}

/// Irreducibility by trial division with every monic polynomial of degree up to k/2.
pub fn is_irreducible(modulus: &[u32], p: u32) -> bool {
    let m = poly_trim(modulus.to_vec());
    if m.len() < 2 {
        return false;
    }
    let k = (m.len() - 1) as u32;
    for d in 1..=k / 2 {
        for f in monic_polys(p, d) {
            if poly_rem(&m, &f, p).is_empty() {
                return false;
            }
        }
    }
    true
}

fn decode(x: u32, p: u32, k: u32) -> Vec<u32> {
    let mut c = Vec::with_capacity(k as usize);
    let mut n = x;
    for _ in 0..k {
        c.push(n % p);
        n /= p;
    }
    c
}

fn encode(c: &[u32], p: u32) -> u32 {
    c.iter().rev().fold(0, |acc, &d| acc * p + d)
}

impl Field {
    /// Builds a field from a descriptor, checking primality and irreducibility.
    pub fn new(desc: FieldDescriptor) -> Result<Field> {
        let p = desc.p;
        if !is_prime(p as u64) || p as u64 >= MAX_PRIME {
            return Err(Error::InvalidDescriptor(format!("{p} is not a supported prime")));
        }
        if desc.k == 0 || desc.k > 4 {
            return Err(Error::InvalidDescriptor(format!("degree {} outside 1..=4", desc.k)));
        }
        if desc.k == 1 {
            let desc = FieldDescriptor { p, k: 1, modulus: Vec::new() };
            return Ok(Field(Arc::new(Inner { desc, q: p, tables: None })));
        }
        let q = desc.order();
        if q > MAX_EXTENSION_ORDER {
            return Err(Error::InvalidDescriptor(format!("extension order {q} too large")));
        }
        let m = &desc.modulus;
        if m.len() != desc.k as usize + 1 || m[desc.k as usize] != 1 || m.iter().any(|&c| c >= p) {
            return Err(Error::InvalidDescriptor("modulus must be monic of degree k with reduced coefficients".into()));
        }
        if !is_irreducible(m, p) {
            return Err(Error::InvalidDescriptor(format!("modulus {m:?} is reducible over GF({p})")));
        }
        let q = q as u32;
        let k = desc.k;
        let mulpoly = |a: u32, b: u32| -> u32 {
            let prod = poly_mul(&poly_trim(decode(a, p, k)), &poly_trim(decode(b, p, k)), p);
            encode(&poly_rem(&prod, m, p), p)
        };
        let mut add = vec![0u32; (q * q) as usize];
        let mut neg = vec![0u32; q as usize];
        for a in 0..q {
            let da = decode(a, p, k);
            for b in 0..q {
                let db = decode(b, p, k);
                let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[(a * q + b) as usize] = encode(&s, p);
            }
            let n: Vec<u32> = da.iter().map(|x| (p - x) % p).collect();
            neg[a as usize] = encode(&n, p);
        }
        // Find a primitive element by direct order computation.
        let mut exp = Vec::new();
        for g in 2..q.max(3) {
            let mut seq = vec![1u32];
            let mut x = g;
            while x != 1 {
                seq.push(x);
                x = mulpoly(x, g);
                if seq.len() as u32 > q {
                    break;
                }
            }
            if seq.len() as u32 == q - 1 {
                exp = seq;
                break;
            }
        }
        if q == 2 {
            exp = vec![1];
        }
        if exp.len() as u32 != q - 1 {
            return Err(Error::InvalidDescriptor("no primitive element found".into()));
        }
        let mut log = vec![0u32; q as usize];
        for (i, &x) in exp.iter().enumerate() {
            log[x as usize] = i as u32;
        }
        let doubled: Vec<u32> = exp.iter().chain(exp.iter()).copied().collect();
        let tables = Tables { add, neg, exp: doubled, log };
        Ok(Field(Arc::new(Inner { desc, q, tables: Some(tables) })))
    }

    /// Prime field GF(p).
    pub fn prime(p: u32) -> Result<Field> {
        Field::new(FieldDescriptor { p, k: 1, modulus: Vec::new() })
    }

    /// GF(q) with the built-in modulus, or the first irreducible monic one otherwise.
    pub fn with_order(q: u64) -> Result<Field> {
        let (p, k) = prime_power(q).ok_or(Error::UnsupportedOrder(q))?;
        if k > 4 || p >= MAX_PRIME || (k > 1 && q > MAX_EXTENSION_ORDER) {
            return Err(Error::UnsupportedOrder(q));
        }
        let p = p as u32;
        let modulus = if k == 1 {
            Vec::new()
        } else {
            builtin_modulus(p, k).unwrap_or_else(|| {
                monic_polys(p, k)
                    .find(|m| is_irreducible(m, p))
                    .expect("irreducible polynomials exist in every degree")
            })
        };
        Field::new(FieldDescriptor { p, k, modulus })
    }

    pub fn descriptor(&self) -> &FieldDescriptor {
        &self.0.desc
    }
    pub fn characteristic(&self) -> u32 {
        self.0.desc.p
    }
    pub fn degree(&self) -> u32 {
        self.0.desc.k
    }
    pub fn order(&self) -> u32 {
        self.0.q
    }

    /// All elements in encoding order.
    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        (0..self.0.q).map(Elem)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Elem> {
        (1..self.0.q).map(Elem)
    }

    /// Coefficient vector (length k) of an element.
    pub fn coefficients(&self, a: Elem) -> Vec<u32> {
        decode(a.0, self.0.desc.p, self.0.desc.k)
    }

    pub fn from_coefficients(&self, c: &[u32]) -> Result<Elem> {
        let p = self.0.desc.p;
        if c.len() != self.0.desc.k as usize || c.iter().any(|&x| x >= p) {
            return Err(Error::InvalidDescriptor(format!("bad coefficient vector {c:?}")));
        }
        Ok(Elem(encode(c, p)))
    }

    /// Image of an integer under the prime-field embedding.
    pub fn from_int(&self, n: i64) -> Elem {
        let p = self.0.desc.p as i64;
        Elem(n.rem_euclid(p) as u32)
    }

    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        match &self.0.tables {
            None => {
                let s = a.0 as u64 + b.0 as u64;
                let p = self.0.q as u64;
                Elem(if s >= p { s - p } else { s } as u32)
            }
            Some(t) => Elem(t.add[(a.0 * self.0.q + b.0) as usize]),
        }
    }

    pub fn neg(&self, a: Elem) -> Elem {
        match &self.0.tables {
            None => Elem(if a.0 == 0 { 0 } else { self.0.q - a.0 }),
            Some(t) => Elem(t.neg[a.0 as usize]),
        }
    }

    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a.0 == 0 || b.0 == 0 {
            return Elem::ZERO;
        }
        match &self.0.tables {
            None => Elem((a.0 as u64 * b.0 as u64 % self.0.q as u64) as u32),
            Some(t) => Elem(t.exp[(t.log[a.0 as usize] + t.log[b.0 as usize]) as usize]),
        }
    }

    pub fn inv(&self, a: Elem) -> Result<Elem> {
        if a.0 == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(match &self.0.tables {
            None => Elem(inv_mod(a.0 as u64, self.0.q as u64) as u32),
            Some(t) => {
                let l = t.log[a.0 as usize];
                Elem(t.exp[((self.0.q - 1 - l) % (self.0.q - 1)) as usize])
            }
        })
    }

    pub fn div(&self, a: Elem, b: Elem) -> Result<Elem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Elem, mut e: u64) -> Elem {
        let mut base = a;
        let mut acc = Elem::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Product of a slice of elements.
    pub fn product(&self, xs: impl IntoIterator<Item = Elem>) -> Elem {
        xs.into_iter().fold(Elem::ONE, |acc, x| self.mul(acc, x))
    }

    pub fn sum(&self, xs: impl IntoIterator<Item = Elem>) -> Elem {
        xs.into_iter().fold(Elem::ZERO, |acc, x| self.add(acc, x))
    }

    /// Textual form used by model dumps: comma-separated coefficients, low first.
    pub fn format_elem(&self, a: Elem) -> String {
        if self.degree() == 1 {
            return a.0.to_string();
        }
        self.coefficients(a).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn parse_elem(&self, s: &str) -> Result<Elem> {
        let parts: std::result::Result<Vec<u32>, _> = s.split(',').map(|t| t.trim().parse::<u32>()).collect();
        let parts = parts.map_err(|e| Error::InvalidDescriptor(format!("bad element {s:?}: {e}")))?;
        self.from_coefficients(&parts)
    }

    pub fn element(&self, value: Elem) -> Result<FieldElement> {
        if value.0 >= self.0.q {
            return Err(Error::InvalidDescriptor(format!("{} is not an element of GF({})", value.0, self.0.q)));
        }
        Ok(FieldElement { field: self.clone(), value })
    }

    pub fn same(&self, other: &Field) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DescriptorMismatch)
        }
    }
}

/// An element bundled with its field, for checked arithmetic across descriptors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldElement {
    pub field: Field,
    pub value: Elem,
}

impl FieldElement {
    pub fn coefficients(&self) -> Vec<u32> {
        self.field.coefficients(self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn field_arith(a: &FieldElement, b: &FieldElement, op: FieldOp) -> Result<FieldElement> {
    a.field.same(&b.field)?;
    let f = &a.field;
    let value = match op {
        FieldOp::Add => f.add(a.value, b.value),
        FieldOp::Sub => f.sub(a.value, b.value),
        FieldOp::Mul => f.mul(a.value, b.value),
        FieldOp::Div => f.div(a.value, b.value)?,
    };
    Ok(FieldElement { field: f.clone(), value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_power_split() {
        assert_eq!(prime_power(27), Some((3, 3)));
        assert_eq!(prime_power(6), None);
        assert_eq!(prime_power(7), Some((7, 1)));
        assert_eq!(prime_power(1), None);
    }

    #[test]
    fn builtin_moduli_are_irreducible() {
        for q in [4u64, 8, 9, 16, 25, 27, 49, 81, 625] {
            let f = Field::with_order(q).unwrap();
            assert_eq!(f.order() as u64, q);
        }
        assert!(!is_irreducible(&[1, 0, 1], 2));
    }

    #[test]
    fn reducible_modulus_rejected() {
        let d = FieldDescriptor { p: 2, k: 2, modulus: vec![1, 0, 1] };
        assert!(matches!(Field::new(d), Err(Error::InvalidDescriptor(_))));
        let d = FieldDescriptor { p: 4, k: 1, modulus: vec![] };
        assert!(Field::new(d).is_err());
    }

    #[test]
    fn gf4_generator_squares() {
        let f = Field::with_order(4).unwrap();
        // x encodes as 2, x + 1 as 3.
        assert_eq!(f.mul(Elem(2), Elem(2)), Elem(3));
    }
}
