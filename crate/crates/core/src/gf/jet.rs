use std::fmt;

use serde::Serialize;

use super::{Elem, Field};
use crate::error::{Error, Result};
use crate::perm;

/// Valuation of a jet, or a depth measured on jets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Valuation {
    Finite(u32),
    /// All stored coefficients vanish; the true value is at least the payload.
    Saturated(u32),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<u32> {
        match self {
            Valuation::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Saturated(k) => write!(f, "SATURATED({k})"),
            Valuation::Infinite => write!(f, "INFINITY"),
        }
    }
}

/// Power series over a finite field truncated at order K.
///
/// Only the exact zero carries no unknown tail; every other jet is known modulo t^K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Jet {
    field: Field,
    coeffs: Vec<Elem>,
    exact_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
}

impl Jet {
    /// Jet from its leading coefficients; missing ones are zero, extra ones are dropped.
    pub fn new(field: &Field, order: usize, coeffs: &[Elem]) -> Jet {
        assert!(order >= 1, "truncation order must be positive");
        let mut c = vec![Elem::ZERO; order];
        for (dst, &src) in c.iter_mut().zip(coeffs) {
            *dst = src;
        }
        Jet { field: field.clone(), coeffs: c, exact_zero: false }
    }

    pub fn from_ints(field: &Field, order: usize, coeffs: &[i64]) -> Jet {
        let c: Vec<Elem> = coeffs.iter().map(|&n| field.from_int(n)).collect();
        Jet::new(field, order, &c)
    }

    pub fn constant(field: &Field, order: usize, c: Elem) -> Jet {
        Jet::new(field, order, &[c])
    }

    /// c * t^w.
    pub fn monomial(field: &Field, order: usize, c: Elem, w: usize) -> Jet {
        let mut coeffs = vec![Elem::ZERO; order];
        if w < order {
            coeffs[w] = c;
        }
        Jet { field: field.clone(), coeffs, exact_zero: false }
    }

    pub fn exact_zero(field: &Field, order: usize) -> Jet {
        Jet { field: field.clone(), coeffs: vec![Elem::ZERO; order], exact_zero: true }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
    pub fn coeffs(&self) -> &[Elem] {
        &self.coeffs
    }
    pub fn coeff(&self, i: usize) -> Elem {
        self.coeffs.get(i).copied().unwrap_or(Elem::ZERO)
    }
    pub fn is_exact_zero(&self) -> bool {
        self.exact_zero
    }

    pub fn valuation(&self) -> Valuation {
        if self.exact_zero {
            return Valuation::Infinite;
        }
        match self.coeffs.iter().position(|c| !c.is_zero()) {
            Some(i) => Valuation::Finite(i as u32),
            None => Valuation::Saturated(self.order() as u32),
        }
    }

    pub fn leading_coefficient(&self) -> Option<Elem> {
        self.valuation().finite().map(|v| self.coeffs[v as usize])
    }

    fn compatible(&self, other: &Jet) -> Result<()> {
        self.field.same(&other.field)?;
        if self.order() != other.order() {
            return Err(Error::DescriptorMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.compatible(other)?;
        if self.exact_zero {
            return Ok(other.clone());
        }
        if other.exact_zero {
            return Ok(self.clone());
        }
        let f = &self.field;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f.add(a, b)).collect();
        Ok(Jet { field: f.clone(), coeffs, exact_zero: false })
    }

    pub fn neg(&self) -> Jet {
        let f = &self.field;
        Jet { field: f.clone(), coeffs: self.coeffs.iter().map(|&a| f.neg(a)).collect(), exact_zero: self.exact_zero }
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.compatible(other)?;
        let f = &self.field;
        let k = self.order();
        if self.exact_zero || other.exact_zero {
            return Ok(Jet::exact_zero(f, k));
        }
        let mut coeffs = vec![Elem::ZERO; k];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs[..k - i].iter().enumerate() {
                coeffs[i + j] = f.add(coeffs[i + j], f.mul(a, b));
            }
        }
        Ok(Jet { field: f.clone(), coeffs, exact_zero: false })
    }

    pub fn scale(&self, c: Elem) -> Jet {
        let f = &self.field;
        if c.is_zero() && !self.exact_zero {
            return Jet::new(f, self.order(), &[]);
        }
        Jet { field: f.clone(), coeffs: self.coeffs.iter().map(|&a| f.mul(a, c)).collect(), exact_zero: self.exact_zero }
    }

    /// Inverse of a unit (valuation 0) modulo t^K.
    pub fn inverse(&self) -> Result<Jet> {
        if self.valuation() != Valuation::Finite(0) {
            return Err(Error::NotAUnit);
        }
        let f = &self.field;
        let k = self.order();
        let inv0 = f.inv(self.coeffs[0])?;
        let mut out = vec![Elem::ZERO; k];
        out[0] = inv0;
        for n in 1..k {
            let mut s = Elem::ZERO;
            for i in 1..=n {
                s = f.add(s, f.mul(self.coeffs[i], out[n - i]));
            }
            out[n] = f.neg(f.mul(s, inv0));
        }
        Ok(Jet { field: f.clone(), coeffs: out, exact_zero: false })
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.mul(&other.inverse()?)
    }
}

pub fn jet_arith(a: &Jet, b: &Jet, op: JetOp) -> Result<Jet> {
    match op {
        JetOp::Add => a.add(b),
        JetOp::Sub => a.sub(b),
        JetOp::Mul => a.mul(b),
    }
}

/// val(a - b) - val(a) for jets of equal finite valuation.
pub fn cancellation_depth(a: &Jet, b: &Jet) -> Result<Valuation> {
    a.compatible(b)?;
    let (va, vb) = (a.valuation(), b.valuation());
    let v = match (va, vb) {
        (Valuation::Finite(x), Valuation::Finite(y)) if x == y => x,
        _ => return Err(Error::ValuationMismatch(va.to_string(), vb.to_string())),
    };
    Ok(match a.sub(b)?.valuation() {
        Valuation::Finite(w) => Valuation::Finite(w - v),
        Valuation::Saturated(k) => Valuation::Saturated(k - v),
        Valuation::Infinite => Valuation::Infinite,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TieDepthCheck {
    pub lhs: Valuation,
    pub rhs: Valuation,
    pub equal: bool,
}

/// Compares val(ad - bc) with val(rho - 1) for rho = ad/(bc).
pub fn tie_depth_crossratio_check(a: &Jet, b: &Jet, c: &Jet, d: &Jet) -> Result<TieDepthCheck> {
    for x in [a, b, c, d] {
        if x.valuation() != Valuation::Finite(0) {
            return Err(Error::PreconditionViolated("all four jets must be units".into()));
        }
    }
    let ad = a.mul(d)?;
    let bc = b.mul(c)?;
    let lhs = ad.sub(&bc)?.valuation();
    let rho = ad.div(&bc)?;
    let one = Jet::constant(a.field(), a.order(), Elem::ONE);
    let rhs = rho.sub(&one)?.valuation();
    Ok(TieDepthCheck { lhs, rhs, equal: lhs == rhs })
}

/// Determinant of a square jet matrix by the Leibniz expansion (n at most 6).
pub fn jet_det(m: &[Vec<Jet>]) -> Result<Jet> {
    let n = m.len();
    if n == 0 || n > 6 || m.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(format!("jet_det needs a square matrix of size 1..=6, got {n}")));
    }
    let field = m[0][0].field().clone();
    let k = m[0][0].order();
    let mut acc = Jet::new(&field, k, &[]);
    for p in perm::permutations(n) {
        let mut term = Jet::constant(&field, k, Elem::ONE);
        for (r, &c) in p.iter().enumerate() {
            term = term.mul(&m[r][c])?;
        }
        acc = if perm::sign(&p) > 0 { acc.add(&term)? } else { acc.sub(&term)? };
    }
    Ok(acc)
}
