//! Exact coefficient field: rationals and small cyclotomic extensions.
//!
//! A [`CycScalar`] is an element of `Q[z]/Phi_m(z)` where `Phi_m` is the m-th
//! cyclotomic polynomial, stored as a coefficient vector of length `phi(m)`.
//! Conductor `m = 1` degenerates to plain rationals. Mixed-conductor
//! arithmetic is rejected rather than coerced; every computation fixes one
//! conductor up front.

use num::complex::Complex64;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use std::fmt;
use thiserror::Error;

/// Exact rational number with reduced representation and positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("incompatible scalar fields: conductor {0} vs conductor {1}")]
    ConductorMismatch(u32, u32),
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid scalar literal: {0}")]
    Parse(String),
}

/// Euler totient of `m`.
pub fn euler_phi(m: u32) -> u32 {
    let mut n = m;
    let mut result = m;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Dense polynomial helpers over `Q`, ascending coefficient order.
mod densepoly {
    use super::Rational;
    use num::Zero;

    pub fn trim(p: &mut Vec<Rational>) {
        while p.len() > 1 && p.last().map_or(false, |c| c.is_zero()) {
            p.pop();
        }
    }

    pub fn mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
        for (i, ca) in a.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (j, cb) in b.iter().enumerate() {
                if !cb.is_zero() {
                    out[i + j] += ca * cb;
                }
            }
        }
        trim(&mut out);
        out
    }

    /// Euclidean division `a = q*b + r`, requires `b` nonzero.
    pub fn divmod(a: &[Rational], b: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
        let mut rem: Vec<Rational> = a.to_vec();
        trim(&mut rem);
        let mut divisor = b.to_vec();
        trim(&mut divisor);
        assert!(
            !(divisor.len() == 1 && divisor[0].is_zero()),
            "division by zero polynomial"
        );
        let db = divisor.len() - 1;
        let da = rem.len() - 1;
        if (rem.len() == 1 && rem[0].is_zero()) || da < db {
            return (vec![Rational::zero()], rem);
        }
        let lead = divisor[db].clone();
        let mut quot = vec![Rational::zero(); da - db + 1];
        for k in (0..=(da - db)).rev() {
            let coeff = rem[k + db].clone();
            if coeff.is_zero() {
                continue;
            }
            let factor = &coeff / &lead;
            quot[k] = factor.clone();
            for (i, bc) in divisor.iter().enumerate() {
                let sub = &factor * bc;
                rem[k + i] -= sub;
            }
        }
        trim(&mut rem);
        (quot, rem)
    }
}

/// Coefficients of the m-th cyclotomic polynomial, ascending, monic.
pub fn cyclotomic_polynomial(m: u32) -> Vec<Rational> {
    assert!(m >= 1);
    // (z^m - 1) / prod_{d | m, d < m} Phi_d
    let mut num = vec![Rational::zero(); m as usize + 1];
    num[0] = -Rational::one();
    num[m as usize] = Rational::one();
    for d in 1..m {
        if m % d == 0 {
            let phi_d = cyclotomic_polynomial(d);
            let (q, r) = densepoly::divmod(&num, &phi_d);
            debug_assert!(r.iter().all(|c| c.is_zero()));
            num = q;
        }
    }
    num
}

/// Element of the cyclotomic field `Q(zeta_m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycScalar {
    conductor: u32,
    coeffs: Vec<Rational>,
}

impl CycScalar {
    pub fn zero(conductor: u32) -> Self {
        CycScalar {
            conductor,
            coeffs: vec![Rational::zero(); euler_phi(conductor) as usize],
        }
    }

    pub fn one(conductor: u32) -> Self {
        Self::from_rational(conductor, Rational::one())
    }

    pub fn from_rational(conductor: u32, q: Rational) -> Self {
        let mut s = Self::zero(conductor);
        s.coeffs[0] = q;
        s
    }

    pub fn from_int(conductor: u32, n: i64) -> Self {
        Self::from_rational(conductor, rat(n))
    }

    /// The generator `zeta_m` reduced modulo `Phi_m` (so `zeta_1 = 1`,
    /// `zeta_2 = -1`).
    pub fn zeta(conductor: u32) -> Self {
        let deg = euler_phi(conductor) as usize;
        if deg >= 2 {
            let mut s = Self::zero(conductor);
            s.coeffs[1] = Rational::one();
            s
        } else {
            // Phi_m linear: z = -c0 for monic z + c0.
            let phi = cyclotomic_polynomial(conductor);
            Self::from_rational(conductor, -phi[0].clone())
        }
    }

    pub fn conductor(&self) -> u32 {
        self.conductor
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    /// Returns the value as a rational when no `z` part is present.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    fn check(&self, other: &Self) -> Result<(), ScalarError> {
        if self.conductor != other.conductor {
            return Err(ScalarError::ConductorMismatch(
                self.conductor,
                other.conductor,
            ));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, ScalarError> {
        self.check(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(CycScalar {
            conductor: self.conductor,
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, ScalarError> {
        self.check(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CycScalar {
            conductor: self.conductor,
            coeffs,
        })
    }

    pub fn neg(&self) -> Self {
        CycScalar {
            conductor: self.conductor,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    /// Exact product reduced modulo `Phi_m`.
    pub fn checked_mul(&self, other: &Self) -> Result<Self, ScalarError> {
        self.check(other)?;
        let raw = densepoly::mul(&self.coeffs, &other.coeffs);
        Ok(Self::reduce(self.conductor, raw))
    }

    /// Exact multiplicative inverse via the extended Euclidean algorithm
    /// against `Phi_m` (irreducible, so the gcd is a nonzero constant).
    pub fn checked_inv(&self) -> Result<Self, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        let phi = cyclotomic_polynomial(self.conductor);
        // extended euclid on (a, phi): r0 = a, r1 = phi
        let mut r0: Vec<Rational> = self.coeffs.clone();
        densepoly::trim(&mut r0);
        let mut r1 = phi;
        let mut s0 = vec![Rational::one()];
        let mut s1 = vec![Rational::zero()];
        while !(r1.len() == 1 && r1[0].is_zero()) {
            let (q, r) = densepoly::divmod(&r0, &r1);
            let qs1 = densepoly::mul(&q, &s1);
            let mut s2 = vec![Rational::zero(); s0.len().max(qs1.len())];
            for (i, c) in s0.iter().enumerate() {
                s2[i] += c;
            }
            for (i, c) in qs1.iter().enumerate() {
                s2[i] -= c;
            }
            densepoly::trim(&mut s2);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s2;
        }
        // r0 is a nonzero constant gcd; inverse = s0 / r0
        debug_assert!(r0.len() == 1 && !r0[0].is_zero());
        let g = r0[0].clone();
        let scaled: Vec<Rational> = s0.iter().map(|c| c / &g).collect();
        Ok(Self::reduce(self.conductor, scaled))
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, ScalarError> {
        self.checked_mul(&other.checked_inv()?)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(self.conductor);
        for _ in 0..e {
            acc = acc.checked_mul(self).expect("same conductor");
        }
        acc
    }

    fn reduce(conductor: u32, raw: Vec<Rational>) -> Self {
        let phi = cyclotomic_polynomial(conductor);
        let (_, rem) = densepoly::divmod(&raw, &phi);
        let deg = euler_phi(conductor) as usize;
        let mut coeffs = vec![Rational::zero(); deg];
        for (i, c) in rem.into_iter().enumerate() {
            if i < deg {
                coeffs[i] = c;
            }
        }
        CycScalar { conductor, coeffs }
    }

    /// Evaluates the representative polynomial at `zeta_m = exp(2 pi i / m)`.
    pub fn to_complex(&self) -> Complex64 {
        let m = self.conductor as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            let angle = 2.0 * std::f64::consts::PI * (k as f64) / m;
            let root = Complex64::new(angle.cos(), angle.sin());
            acc += root * c.to_f64().expect("rational fits in f64");
        }
        acc
    }
}

/// Free-function aliases matching the operation names used elsewhere.
pub fn cyc_mul(a: &CycScalar, b: &CycScalar) -> Result<CycScalar, ScalarError> {
    a.checked_mul(b)
}

pub fn cyc_inv(a: &CycScalar) -> Result<CycScalar, ScalarError> {
    a.checked_inv()
}

impl std::ops::Add for &CycScalar {
    type Output = CycScalar;
    fn add(self, rhs: &CycScalar) -> CycScalar {
        self.checked_add(rhs).expect("incompatible scalar fields")
    }
}

impl std::ops::Sub for &CycScalar {
    type Output = CycScalar;
    fn sub(self, rhs: &CycScalar) -> CycScalar {
        self.checked_sub(rhs).expect("incompatible scalar fields")
    }
}

impl std::ops::Mul for &CycScalar {
    type Output = CycScalar;
    fn mul(self, rhs: &CycScalar) -> CycScalar {
        self.checked_mul(rhs).expect("incompatible scalar fields")
    }
}

impl std::ops::Neg for &CycScalar {
    type Output = CycScalar;
    fn neg(self) -> CycScalar {
        CycScalar::neg(self)
    }
}

fn render_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for CycScalar {
    /// Canonical textual form: `p/q` pieces plus `z` powers, ascending in the
    /// power of `z`, e.g. `3/2 + 1/2*z` or `-z^2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            let body = match k {
                0 => render_rational(&mag),
                _ => {
                    let z = if k == 1 {
                        "z".to_string()
                    } else {
                        format!("z^{k}")
                    };
                    if mag.is_one() {
                        z
                    } else {
                        format!("{}*{}", render_rational(&mag), z)
                    }
                }
            };
            if first {
                if c.is_negative() {
                    write!(f, "-{body}")?;
                } else {
                    write!(f, "{body}")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - {body}")?;
            } else {
                write!(f, " + {body}")?;
            }
        }
        Ok(())
    }
}

/// Parses the textual scalar syntax: sums/differences of products of atoms,
/// where an atom is `INT`, `INT/INT`, `z`, `z^K`, or a parenthesized group.
pub fn parse_scalar(src: &str, conductor: u32) -> Result<CycScalar, ScalarError> {
    let chars: Vec<char> = src.chars().collect();
    let mut pos = 0usize;
    let value = parse_sum(&chars, &mut pos, conductor)?;
    skip_ws(&chars, &mut pos);
    if pos != chars.len() {
        return Err(ScalarError::Parse(format!(
            "unexpected trailing input at byte {pos} in {src:?}"
        )));
    }
    Ok(value)
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn parse_sum(chars: &[char], pos: &mut usize, m: u32) -> Result<CycScalar, ScalarError> {
    skip_ws(chars, pos);
    let mut negate = false;
    if *pos < chars.len() && (chars[*pos] == '-' || chars[*pos] == '+') {
        negate = chars[*pos] == '-';
        *pos += 1;
    }
    let mut acc = parse_product(chars, pos, m)?;
    if negate {
        acc = acc.neg();
    }
    loop {
        skip_ws(chars, pos);
        if *pos >= chars.len() || (chars[*pos] != '+' && chars[*pos] != '-') {
            break;
        }
        let sub = chars[*pos] == '-';
        *pos += 1;
        let term = parse_product(chars, pos, m)?;
        acc = if sub {
            acc.checked_sub(&term)?
        } else {
            acc.checked_add(&term)?
        };
    }
    Ok(acc)
}

fn parse_product(chars: &[char], pos: &mut usize, m: u32) -> Result<CycScalar, ScalarError> {
    let mut acc = parse_atom(chars, pos, m)?;
    loop {
        skip_ws(chars, pos);
        if *pos >= chars.len() || chars[*pos] != '*' {
            break;
        }
        *pos += 1;
        let rhs = parse_atom(chars, pos, m)?;
        acc = acc.checked_mul(&rhs)?;
    }
    Ok(acc)
}

fn parse_atom(chars: &[char], pos: &mut usize, m: u32) -> Result<CycScalar, ScalarError> {
    skip_ws(chars, pos);
    if *pos >= chars.len() {
        return Err(ScalarError::Parse("unexpected end of scalar".into()));
    }
    match chars[*pos] {
        '(' => {
            *pos += 1;
            let inner = parse_sum(chars, pos, m)?;
            skip_ws(chars, pos);
            if *pos >= chars.len() || chars[*pos] != ')' {
                return Err(ScalarError::Parse("expected ')'".into()));
            }
            *pos += 1;
            Ok(inner)
        }
        'z' => {
            *pos += 1;
            skip_ws(chars, pos);
            let mut exp = 1u32;
            if *pos < chars.len() && chars[*pos] == '^' {
                *pos += 1;
                exp = parse_uint(chars, pos)? as u32;
            }
            Ok(CycScalar::zeta(m).pow(exp))
        }
        c if c.is_ascii_digit() => {
            let numer = parse_uint(chars, pos)?;
            skip_ws(chars, pos);
            if *pos < chars.len() && chars[*pos] == '/' {
                *pos += 1;
                skip_ws(chars, pos);
                let denom = parse_uint(chars, pos)?;
                if denom == 0 {
                    return Err(ScalarError::DivisionByZero);
                }
                Ok(CycScalar::from_rational(
                    m,
                    Rational::new(BigInt::from(numer), BigInt::from(denom)),
                ))
            } else {
                Ok(CycScalar::from_rational(
                    m,
                    Rational::from_integer(BigInt::from(numer)),
                ))
            }
        }
        '-' => {
            *pos += 1;
            Ok(parse_atom(chars, pos, m)?.neg())
        }
        other => Err(ScalarError::Parse(format!(
            "unexpected character {other:?} in scalar"
        ))),
    }
}

fn parse_uint(chars: &[char], pos: &mut usize) -> Result<u128, ScalarError> {
    skip_ws(chars, pos);
    let start = *pos;
    while *pos < chars.len() && chars[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(ScalarError::Parse("expected integer".into()));
    }
    let text: String = chars[start..*pos].iter().collect();
    text.parse::<u128>()
        .map_err(|_| ScalarError::Parse(format!("integer out of range: {text}")))
}
