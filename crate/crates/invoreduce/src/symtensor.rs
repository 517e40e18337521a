//! Sparse multivariate polynomials in `n` commuting symbol variables.
//!
//! A polynomial here is the symbol of a constant-coefficient differential
//! operator: the monomial `y^alpha` stands for the derivative `d^alpha`, so
//! operator composition is plain polynomial multiplication and the symmetric
//! tensor product needs no multinomial bookkeeping. A linear map `A` acts on
//! symbols by the transpose substitution `y -> A^T y`, which is exactly the
//! tensor action `v1 (.) ... (.) vk -> Av1 (.) ... (.) Avk` on symbols (the
//! symbol of `D_{Av}` is `v . (A^T y)`).
//!
//! Term maps are ordered graded-lexicographically, which fixes the
//! serialization and summation order.

use crate::linalg::Matrix;
use crate::scalars::{parse_scalar, CycScalar, ScalarError};
use num::complex::Complex64;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("invalid polynomial JSON: {0}")]
    Json(String),
}

/// Exponent vector of a monomial; the degree is the entry sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for MultiIndex {
    /// Graded-lexicographic: lower total degree first, then lexicographic on
    /// the exponent vector.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial over [`CycScalar`]; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<MultiIndex, CycScalar>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: CycScalar) -> Self {
        let mut p = Self::zero(dim);
        if !c.is_zero() {
            p.terms.insert(MultiIndex(vec![0; dim]), c);
        }
        p
    }

    pub fn one(dim: usize, conductor: u32) -> Self {
        Self::constant(dim, CycScalar::one(conductor))
    }

    pub fn monomial(dim: usize, exponents: &[u32], c: CycScalar) -> Result<Self, PolyError> {
        if exponents.len() != dim {
            return Err(PolyError::DimMismatch(exponents.len(), dim));
        }
        let mut p = Self::zero(dim);
        if !c.is_zero() {
            p.terms.insert(MultiIndex(exponents.to_vec()), c);
        }
        Ok(p)
    }

    /// Symbol of the directional derivative along `v`: the linear form `v.y`.
    pub fn linear_form(v: &[CycScalar]) -> Self {
        let dim = v.len();
        let mut p = Self::zero(dim);
        for (i, c) in v.iter().enumerate() {
            if !c.is_zero() {
                let mut e = vec![0u32; dim];
                e[i] = 1;
                p.terms.insert(MultiIndex(e), c.clone());
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CycScalar)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Option<&CycScalar> {
        self.terms.get(alpha)
    }

    /// Total degree; zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    /// Conductor of the coefficients, if any term is present.
    pub fn conductor(&self) -> Option<u32> {
        self.terms.values().next().map(|c| c.conductor())
    }

    fn insert_add(&mut self, alpha: MultiIndex, c: CycScalar) -> Result<(), PolyError> {
        use std::collections::btree_map::Entry;
        match self.terms.entry(alpha) {
            Entry::Vacant(e) => {
                if !c.is_zero() {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().checked_add(&c)?;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Poly) -> Result<Poly, PolyError> {
        if self.dim != other.dim {
            return Err(PolyError::DimMismatch(self.dim, other.dim));
        }
        let mut out = self.clone();
        for (alpha, c) in &other.terms {
            out.insert_add(alpha.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.checked_add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &CycScalar) -> Result<Poly, PolyError> {
        if c.is_zero() {
            return Ok(Poly::zero(self.dim));
        }
        let mut out = Poly::zero(self.dim);
        for (alpha, coeff) in &self.terms {
            out.terms.insert(alpha.clone(), coeff.checked_mul(c)?);
        }
        Ok(out)
    }

    /// Exact product; realizes the symmetric tensor product and therefore
    /// composition of constant-coefficient derivative operators.
    pub fn checked_mul(&self, other: &Poly) -> Result<Poly, PolyError> {
        if self.dim != other.dim {
            return Err(PolyError::DimMismatch(self.dim, other.dim));
        }
        let mut out = Poly::zero(self.dim);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.insert_add(a.add(b), ca.checked_mul(cb)?)?;
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Result<Poly, PolyError> {
        let conductor = self.conductor().unwrap_or(1);
        let mut acc = Poly::one(self.dim, conductor);
        for _ in 0..e {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    /// Degree-k homogeneous part; summing over all k reconstructs the
    /// polynomial.
    pub fn homogeneous_part(&self, k: u32) -> Poly {
        Poly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(alpha, _)| alpha.degree() == k)
                .map(|(alpha, c)| (alpha.clone(), c.clone()))
                .collect(),
        }
    }

    /// Direct monomial evaluation at a complex point, summed in canonical
    /// (graded-lex) key order.
    pub fn eval_symbol(&self, y: &[Complex64]) -> Complex64 {
        assert_eq!(y.len(), self.dim, "evaluation point dimension");
        let mut acc = Complex64::new(0.0, 0.0);
        for (alpha, c) in &self.terms {
            let mut term = c.to_complex();
            for (i, &e) in alpha.0.iter().enumerate() {
                for _ in 0..e {
                    term *= y[i];
                }
            }
            acc += term;
        }
        acc
    }
}

/// Exact polynomial product (spec operation name).
pub fn poly_mul(a: &Poly, b: &Poly) -> Result<Poly, PolyError> {
    a.checked_mul(b)
}

/// Returns `p(M^T y)`, expanded and collected exactly. For a linear map `A`
/// this is the action on symmetric tensors read through symbols: substituting
/// first by `M1` and then by `M2` equals substituting by `M2 * M1`.
pub fn linear_substitute(m: &Matrix, p: &Poly) -> Result<Poly, PolyError> {
    if !m.is_square() || m.rows() != p.dim() {
        return Err(PolyError::DimMismatch(m.rows(), p.dim()));
    }
    let dim = p.dim();
    // variable i maps to the linear form sum_j M[j][i] y_j (column i of M)
    let images: Vec<Poly> = (0..dim)
        .map(|i| {
            let col: Vec<CycScalar> = (0..dim).map(|j| m.get(j, i).clone()).collect();
            Poly::linear_form(&col)
        })
        .collect();
    let conductor = p.conductor().unwrap_or(m.conductor());
    let mut out = Poly::zero(dim);
    for (alpha, c) in p.terms() {
        let mut term = Poly::constant(dim, c.clone());
        for (i, &e) in alpha.0.iter().enumerate() {
            for _ in 0..e {
                term = term.checked_mul(&images[i])?;
            }
        }
        out = out.checked_add(&term)?;
    }
    let _ = conductor;
    Ok(out)
}

/// Dimension of the space of symmetric tensors of order `k` over an
/// `n`-dimensional space: `binom(n + k - 1, k)`.
pub fn sym_dimension(n: u32, k: u32) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 + i) / (i + 1);
    }
    acc
}

// --- serialization -------------------------------------------------------

impl Poly {
    /// JSON form `{"dim": 2, "terms": [{"alpha": [2,0], "c": "-4"}, ...]}`
    /// with terms in graded-lex order; bit-stable across runs.
    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(alpha, c)| {
                serde_json::json!({
                    "alpha": alpha.0,
                    "c": c.to_string(),
                })
            })
            .collect();
        serde_json::json!({ "dim": self.dim, "terms": terms })
    }

    pub fn from_json(value: &serde_json::Value, conductor: u32) -> Result<Poly, PolyError> {
        let dim = value
            .get("dim")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| PolyError::Json("missing dim".into()))? as usize;
        let mut poly = Poly::zero(dim);
        let terms = value
            .get("terms")
            .and_then(|v| v.as_array())
            .ok_or_else(|| PolyError::Json("missing terms".into()))?;
        for t in terms {
            let alpha: Vec<u32> = t
                .get("alpha")
                .and_then(|v| v.as_array())
                .ok_or_else(|| PolyError::Json("missing alpha".into()))?
                .iter()
                .map(|e| e.as_u64().map(|x| x as u32))
                .collect::<Option<_>>()
                .ok_or_else(|| PolyError::Json("bad exponent".into()))?;
            if alpha.len() != dim {
                return Err(PolyError::DimMismatch(alpha.len(), dim));
            }
            let c_text = t
                .get("c")
                .and_then(|v| v.as_str())
                .ok_or_else(|| PolyError::Json("missing coefficient".into()))?;
            let c = parse_scalar(c_text, conductor)?;
            poly.insert_add(MultiIndex(alpha), c)?;
        }
        Ok(poly)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        // highest degree first reads more naturally
        for (alpha, c) in self.terms.iter().rev() {
            let body = {
                let vars: Vec<String> = alpha
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| {
                        if e == 1 {
                            format!("y{}", i + 1)
                        } else {
                            format!("y{}^{}", i + 1, e)
                        }
                    })
                    .collect();
                let c_str = c.to_string();
                if vars.is_empty() {
                    c_str
                } else if c.is_one() {
                    vars.join("*")
                } else if c.neg().is_one() {
                    format!("-{}", vars.join("*"))
                } else if c_str.contains(' ') {
                    format!("({})*{}", c_str, vars.join("*"))
                } else {
                    format!("{}*{}", c_str, vars.join("*"))
                }
            };
            if first {
                write!(f, "{body}")?;
                first = false;
            } else if let Some(stripped) = body.strip_prefix('-') {
                write!(f, " - {stripped}")?;
            } else {
                write!(f, " + {body}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::Rational;
    use num::BigInt;

    fn c1(n: i64) -> CycScalar {
        CycScalar::from_int(1, n)
    }

    fn mono(dim: usize, exps: &[u32], c: i64) -> Poly {
        Poly::monomial(dim, exps, c1(c)).unwrap()
    }

    fn half(_dim: usize) -> CycScalar {
        CycScalar::from_rational(1, Rational::new(BigInt::from(1), BigInt::from(2)))
    }

    #[test]
    fn mul_basic_square() {
        let y1 = mono(2, &[1, 0], 1);
        let sq = poly_mul(&y1, &y1).unwrap();
        assert_eq!(sq, mono(2, &[2, 0], 1));
    }

    #[test]
    fn laplacian_symbol_from_tensor_decomposition() {
        // (1/2)[(y1+y2)^2 + (y1-y2)^2] = y1^2 + y2^2
        let u = mono(2, &[1, 0], 1).checked_add(&mono(2, &[0, 1], 1)).unwrap();
        let v = mono(2, &[1, 0], 1).checked_sub(&mono(2, &[0, 1], 1)).unwrap();
        let sum = poly_mul(&u, &u)
            .unwrap()
            .checked_add(&poly_mul(&v, &v).unwrap())
            .unwrap();
        let lap = sum.scale(&half(2)).unwrap();
        let want = mono(2, &[2, 0], 1).checked_add(&mono(2, &[0, 2], 1)).unwrap();
        assert_eq!(lap, want);
    }

    #[test]
    fn reduced_symbol_of_first_example() {
        // (-2 y1 + 3 y2) (2 y1 + 3 y2) = -4 y1^2 + 9 y2^2
        let a = mono(2, &[1, 0], -2).checked_add(&mono(2, &[0, 1], 3)).unwrap();
        let b = mono(2, &[1, 0], 2).checked_add(&mono(2, &[0, 1], 3)).unwrap();
        let prod = poly_mul(&a, &b).unwrap();
        let want = mono(2, &[2, 0], -4).checked_add(&mono(2, &[0, 2], 9)).unwrap();
        assert_eq!(prod, want);
    }

    #[test]
    fn mul_dim_mismatch_is_error() {
        let a = mono(2, &[1, 0], 1);
        let b = mono(3, &[1, 0, 0], 1);
        assert!(matches!(poly_mul(&a, &b), Err(PolyError::DimMismatch(2, 3))));
    }

    #[test]
    fn substitute_reflection_fixes_laplacian() {
        let refl = Matrix::from_i64_rows(&[&[1, 0], &[0, -1]], 1);
        let lap = mono(2, &[2, 0], 1).checked_add(&mono(2, &[0, 2], 1)).unwrap();
        assert_eq!(linear_substitute(&refl, &lap).unwrap(), lap);
    }

    #[test]
    fn substitute_reflection_on_linear_form() {
        let refl = Matrix::from_i64_rows(&[&[1, 0], &[0, -1]], 1);
        let p = mono(2, &[1, 0], 2).checked_add(&mono(2, &[0, 1], 3)).unwrap();
        let want = mono(2, &[1, 0], 2).checked_add(&mono(2, &[0, 1], -3)).unwrap();
        assert_eq!(linear_substitute(&refl, &p).unwrap(), want);
    }

    #[test]
    fn substitute_scaled_identity_scales_by_degree() {
        let scaled = Matrix::from_i64_rows(&[&[3, 0], &[0, 3]], 1);
        let p = mono(2, &[2, 1], 5); // homogeneous of degree 3
        let want = p.scale(&c1(27)).unwrap();
        assert_eq!(linear_substitute(&scaled, &p).unwrap(), want);
    }

    #[test]
    fn substitute_transpose_convention() {
        // non-symmetric M: y -> M^T y, so coefficient vector v maps to M v
        let m = Matrix::from_i64_rows(&[&[0, -1], &[1, -1]], 1);
        let y1 = mono(2, &[1, 0], 1); // symbol of D_{e1}
        // M e1 = (0, 1), whose symbol is y2
        assert_eq!(linear_substitute(&m, &y1).unwrap(), mono(2, &[0, 1], 1));
    }

    #[test]
    fn homogeneous_parts() {
        let p = mono(2, &[0, 0], 1).checked_add(&mono(2, &[2, 0], 1)).unwrap();
        assert_eq!(p.homogeneous_part(0), mono(2, &[0, 0], 1));
        assert_eq!(p.homogeneous_part(2), mono(2, &[2, 0], 1));
        assert!(p.homogeneous_part(1).is_zero());
    }

    #[test]
    fn sym_dimension_values() {
        assert_eq!(sym_dimension(2, 2), 3);
        assert_eq!(sym_dimension(1, 5), 1);
        // oracle: brute-force enumeration of degree-3 multi-indices in 3 vars
        let mut count = 0u128;
        for a in 0..=3u32 {
            for b in 0..=3u32 {
                for c in 0..=3u32 {
                    if a + b + c == 3 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 10);
        assert_eq!(sym_dimension(3, 3), count);
    }

    #[test]
    fn eval_symbol_examples() {
        let p = mono(2, &[2, 0], 1).checked_add(&mono(2, &[0, 2], 1)).unwrap();
        let v = p.eval_symbol(&[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
        assert!((v.re - 5.0).abs() < 1e-14 && v.im.abs() < 1e-14);

        let one = Poly::one(2, 1);
        let v = one.eval_symbol(&[Complex64::new(9.0, 3.0), Complex64::new(-2.0, 0.1)]);
        assert!((v.re - 1.0).abs() < 1e-14 && v.im.abs() < 1e-14);

        let p = mono(2, &[2, 0], -4)
            .checked_add(&mono(2, &[0, 2], 9))
            .unwrap()
            .checked_add(&mono(2, &[0, 0], 1))
            .unwrap();
        let v = p.eval_symbol(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!((v.re - 6.0).abs() < 1e-14);
    }

    #[test]
    fn json_roundtrip_and_shape() {
        let p = mono(2, &[2, 0], -4)
            .checked_add(&mono(2, &[0, 2], 9))
            .unwrap()
            .checked_add(&mono(2, &[0, 0], 1))
            .unwrap();
        let j = p.to_json();
        let text = serde_json::to_string(&j).unwrap();
        // graded-lex ascending: constant first, then y2^2 before y1^2? No:
        // within degree 2, lex on vectors puts [0,2] before [2,0].
        assert_eq!(
            text,
            r#"{"dim":2,"terms":[{"alpha":[0,0],"c":"1"},{"alpha":[0,2],"c":"9"},{"alpha":[2,0],"c":"-4"}]}"#
        );
        let back = Poly::from_json(&j, 1).unwrap();
        assert_eq!(back, p);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly(dim: usize, max_deg: u32) -> impl Strategy<Value = Poly> {
            proptest::collection::vec(
                (
                    proptest::collection::vec(0..=max_deg, dim),
                    -9i64..=9,
                ),
                0..6,
            )
            .prop_map(move |terms| {
                let mut p = Poly::zero(dim);
                for (exps, c) in terms {
                    if exps.iter().sum::<u32>() > max_deg {
                        continue;
                    }
                    let m = Poly::monomial(dim, &exps, CycScalar::from_int(1, c)).unwrap();
                    p = p.checked_add(&m).unwrap();
                }
                p
            })
        }

        fn arb_matrix(dim: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(-3i64..=3, dim * dim).prop_map(move |vals| {
                let rows: Vec<Vec<CycScalar>> = vals
                    .chunks(dim)
                    .map(|row| row.iter().map(|&v| CycScalar::from_int(1, v)).collect())
                    .collect();
                Matrix::from_rows(rows, 1).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn mul_commutative_and_associative(
                a in arb_poly(3, 4), b in arb_poly(3, 4), c in arb_poly(3, 4)
            ) {
                prop_assert_eq!(
                    poly_mul(&a, &b).unwrap(),
                    poly_mul(&b, &a).unwrap()
                );
                let ab_c = poly_mul(&poly_mul(&a, &b).unwrap(), &c).unwrap();
                let a_bc = poly_mul(&a, &poly_mul(&b, &c).unwrap()).unwrap();
                prop_assert_eq!(ab_c, a_bc);
            }

            #[test]
            fn substitution_composition_order(
                m1 in arb_matrix(2), m2 in arb_matrix(2), p in arb_poly(2, 3)
            ) {
                // substituting first by M1 then by M2 equals substituting by M2*M1
                let seq = linear_substitute(&m2, &linear_substitute(&m1, &p).unwrap()).unwrap();
                let prod = m2.mul(&m1).unwrap();
                prop_assert_eq!(seq, linear_substitute(&prod, &p).unwrap());
            }

            #[test]
            fn substitution_is_ring_hom(
                m in arb_matrix(2), p in arb_poly(2, 3), q in arb_poly(2, 3)
            ) {
                let lhs = linear_substitute(&m, &poly_mul(&p, &q).unwrap()).unwrap();
                let rhs = poly_mul(
                    &linear_substitute(&m, &p).unwrap(),
                    &linear_substitute(&m, &q).unwrap(),
                )
                .unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn homogeneous_scaling(
                m in arb_matrix(2), p in arb_poly(2, 3), k in 0u32..=3, c in -3i64..=3
            ) {
                // for homogeneous p of degree k: subst(cA, p) = c^k subst(A, p)
                let hom = p.homogeneous_part(k);
                let scalar = CycScalar::from_int(1, c);
                let mut scaled = Matrix::zero(2, 2, 1);
                for i in 0..2 {
                    for j in 0..2 {
                        scaled.set(i, j, m.get(i, j).checked_mul(&scalar).unwrap());
                    }
                }
                let lhs = linear_substitute(&scaled, &hom).unwrap();
                let rhs = linear_substitute(&m, &hom).unwrap()
                    .scale(&scalar.pow(k))
                    .unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn homogeneous_term_count_bounded(p in arb_poly(3, 4), k in 0u32..=4) {
                let part = p.homogeneous_part(k);
                prop_assert!(part.term_count() as u128 <= sym_dimension(3, k));
            }

            #[test]
            fn parts_reassemble(p in arb_poly(3, 4)) {
                let mut sum = Poly::zero(3);
                for k in 0..=p.degree() {
                    sum = sum.checked_add(&p.homogeneous_part(k)).unwrap();
                }
                prop_assert_eq!(sum, p);
            }
        }
    }
}
