//! Bessel functions of the first kind `J_n`, their derivatives, and their
//! positive zeros.
//!
//! Two evaluation regimes split at `x = 12`:
//!
//! * ascending series `J_n(x) = sum_k (-1)^k / (k! (k+n)!) (x/2)^{2k+n}`,
//!   summed in double-double arithmetic so the alternating cancellation near
//!   the split still leaves ~1e-15 absolute accuracy;
//! * Miller's backward recurrence `J_{k-1} = (2k/x) J_k - J_{k+1}` from a
//!   high order down to 0, normalized by `J_0(x) + 2 sum_k J_{2k}(x) = 1`.
//!
//! Derivatives use `J_n'(z) = (n/z) J_n(z) - J_{n+1}(z)`. Zeros `mu_{n,m}`
//! come from a McMahon-guess Newton iteration where the asymptotic guess is
//! trustworthy, and otherwise from a bracketing scan that walks the zeros in
//! order (guaranteeing the index m), followed by bisection and Newton polish.
//!
//! Validated ranges: `n <= 200`, `x <= 1000` for evaluation; `n <= 60`,
//! `m <= 200` for zeros. All summations run in a fixed left-to-right order.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument out of validated range: n = {n}, x = {x} (need n <= 200, 0 <= x <= 1000)")]
    OutOfRange { n: u32, x: f64 },
    #[error("derivative at x = 0 is only defined here for n = 1")]
    DerivativeAtOrigin { n: u32 },
    #[error("zero index out of validated range: n = {n}, m = {m} (need n <= 60, 1 <= m <= 200)")]
    ZeroIndexOutOfRange { n: u32, m: u32 },
    #[error("zero search failed to converge for n = {n}, m = {m}")]
    ZeroNonConvergence { n: u32, m: u32 },
}

// --- double-double helpers (hi + lo with |lo| <= ulp(hi)/2) ---------------

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    fn new(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    fn from_prod(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    fn add(self, other: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, other.hi);
        let s2 = s2 + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    fn mul(self, other: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, other.hi);
        let p2 = p2 + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        let p2 = p2 + self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p1, p2) = two_prod(q1, b);
        let (s, e) = two_sum(self.hi, -p1);
        let q2 = (s + (e + self.lo - p2)) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

// --- evaluation -----------------------------------------------------------

const SERIES_SPLIT: f64 = 12.0;

fn bessel_series(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = Dd::new(1.0);
    for k in 1..=n {
        term = term.mul_f64(half).div_f64(k as f64);
        if term.hi == 0.0 {
            return 0.0; // underflow: J_n(x) is far below 1e-300
        }
    }
    let quarter_sq = Dd::from_prod(half, half);
    let mut sum = term;
    for k in 1..=600u32 {
        term = term
            .mul(quarter_sq)
            .div_f64(k as f64)
            .div_f64((k + n) as f64)
            .neg();
        sum = sum.add(term);
        if term.hi.abs() <= 1e-40 * (sum.hi.abs() + 1e-300) && (k as f64) > half {
            break;
        }
    }
    sum.value()
}

fn bessel_miller(n: u32, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let top = (n as f64).max(x);
    let mut start = (top + 14.0 * top.cbrt() + 30.0).ceil() as u64;
    if start % 2 == 1 {
        start += 1;
    }
    let mut above = 0.0f64; // J_{k+1} (unnormalized)
    let mut current = 1e-30f64; // J_k
    let mut norm = 0.0f64; // J_0 + 2 sum J_{2k}
    let mut result = 0.0f64;
    let mut k = start;
    loop {
        if k == n as u64 {
            result = current;
        }
        if k % 2 == 0 {
            norm += if k == 0 { current } else { 2.0 * current };
        }
        if k == 0 {
            break;
        }
        let below = (2.0 * k as f64 / x) * current - above;
        above = current;
        current = below;
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
        k -= 1;
    }
    result / norm
}

/// Bessel function of the first kind. Absolute accuracy is ~1e-13 or better
/// over the validated range.
pub fn bessel_j(n: u32, x: f64) -> Result<f64, SpecFunError> {
    if !(0.0..=1000.0).contains(&x) || n > 200 {
        return Err(SpecFunError::OutOfRange { n, x });
    }
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    if x < SERIES_SPLIT {
        Ok(bessel_series(n, x))
    } else {
        Ok(bessel_miller(n, x))
    }
}

/// Derivative via `J_n'(z) = (n/z) J_n(z) - J_{n+1}(z)`; the origin is only
/// handled for `n = 1` (series limit 1/2).
pub fn bessel_j_prime(n: u32, x: f64) -> Result<f64, SpecFunError> {
    if x == 0.0 {
        return if n == 1 {
            Ok(0.5)
        } else {
            Err(SpecFunError::DerivativeAtOrigin { n })
        };
    }
    let jn = bessel_j(n, x)?;
    let jn1 = bessel_j(n + 1, x)?;
    Ok((n as f64 / x) * jn - jn1)
}

// --- zeros ----------------------------------------------------------------

const ZERO_TOL_SCALE: f64 = 1e-12;

fn mcmahon_guess(n: u32, m: u32) -> f64 {
    let beta = (m as f64 + n as f64 / 2.0 - 0.25) * std::f64::consts::PI;
    let mu = 4.0 * (n as f64) * (n as f64);
    let b8 = 8.0 * beta;
    beta - (mu - 1.0) / b8 - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3))
}

fn newton_refine(n: u32, guess: f64) -> Option<f64> {
    let mut x = guess;
    for _ in 0..50 {
        let f = bessel_j(n, x).ok()?;
        if f.abs() <= ZERO_TOL_SCALE * (1.0 + x) {
            return Some(x);
        }
        let fp = bessel_j_prime(n, x).ok()?;
        if fp == 0.0 {
            return None;
        }
        let step = f / fp;
        x -= step;
        if !(0.0..=1010.0).contains(&x) {
            return None;
        }
    }
    let f = bessel_j(n, x).ok()?;
    (f.abs() <= ZERO_TOL_SCALE * (1.0 + x)).then_some(x)
}

fn sign_change_verified(n: u32, mu: f64) -> bool {
    let h = 1e-6 * (1.0 + mu);
    match (bessel_j(n, mu - h), bessel_j(n, mu + h)) {
        (Ok(a), Ok(b)) => a * b < 0.0,
        _ => false,
    }
}

/// Walks the zeros of `J_n` in increasing order up to index `m`, bracketing
/// each by a sign-change scan and refining by bisection plus Newton polish.
fn march_zero(n: u32, m: u32) -> Result<f64, SpecFunError> {
    let step = 0.5;
    let mut x = if n == 0 { 0.5 } else { n as f64 + 0.25 };
    let mut f = bessel_j(n, x).map_err(|_| SpecFunError::ZeroNonConvergence { n, m })?;
    let mut found = 0u32;
    let mut guard = 0u32;
    loop {
        guard += 1;
        if guard > 10_000 {
            return Err(SpecFunError::ZeroNonConvergence { n, m });
        }
        let x_next = x + step;
        let f_next =
            bessel_j(n, x_next).map_err(|_| SpecFunError::ZeroNonConvergence { n, m })?;
        if f == 0.0 || f * f_next < 0.0 {
            // bracket [x, x_next]
            let (mut a, mut b, mut fa) = (x, x_next, f);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                let fm =
                    bessel_j(n, mid).map_err(|_| SpecFunError::ZeroNonConvergence { n, m })?;
                if fa * fm <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            let mut zero = 0.5 * (a + b);
            if let Some(polished) = newton_refine(n, zero) {
                if polished > x - step && polished < x_next + step {
                    zero = polished;
                }
            }
            found += 1;
            if found == m {
                let fz =
                    bessel_j(n, zero).map_err(|_| SpecFunError::ZeroNonConvergence { n, m })?;
                if fz.abs() > ZERO_TOL_SCALE * (1.0 + zero) || !sign_change_verified(n, zero) {
                    return Err(SpecFunError::ZeroNonConvergence { n, m });
                }
                return Ok(zero);
            }
        }
        x = x_next;
        f = f_next;
    }
}

/// The m-th positive zero `mu_{n,m}` of `J_n` (m counts from 1).
///
/// The McMahon-Newton fast path is only taken when the leading asymptotic
/// correction is small enough to identify the zero unambiguously; otherwise
/// the ordered bracketing scan is used.
pub fn bessel_zero(n: u32, m: u32) -> Result<f64, SpecFunError> {
    if n > 60 || m == 0 || m > 200 {
        return Err(SpecFunError::ZeroIndexOutOfRange { n, m });
    }
    let beta = (m as f64 + n as f64 / 2.0 - 0.25) * std::f64::consts::PI;
    let correction = (4.0 * (n as f64) * (n as f64) - 1.0) / (8.0 * beta);
    if correction < 0.5 {
        let guess = mcmahon_guess(n, m);
        if let Some(zero) = newton_refine(n, guess) {
            if (zero - guess).abs() < 1.0 && sign_change_verified(n, zero) {
                return Ok(zero);
            }
        }
    }
    march_zero(n, m)
}

/// Table of Bessel zeros, strictly increasing in m for every n.
#[derive(Debug, Clone)]
pub struct BesselZeroTable {
    n_max: u32,
    m_max: u32,
    entries: Vec<Vec<f64>>, // entries[n][m-1]
}

impl BesselZeroTable {
    pub fn build(n_max: u32, m_max: u32) -> Result<Self, SpecFunError> {
        if n_max > 60 || m_max == 0 || m_max > 200 {
            return Err(SpecFunError::ZeroIndexOutOfRange { n: n_max, m: m_max });
        }
        let mut entries = Vec::with_capacity(n_max as usize + 1);
        for n in 0..=n_max {
            let mut row = Vec::with_capacity(m_max as usize);
            for m in 1..=m_max {
                let zero = bessel_zero(n, m)?;
                if let Some(&prev) = row.last() {
                    if zero <= prev {
                        return Err(SpecFunError::ZeroNonConvergence { n, m });
                    }
                }
                row.push(zero);
            }
            entries.push(row);
        }
        Ok(BesselZeroTable {
            n_max,
            m_max,
            entries,
        })
    }

    pub fn get(&self, n: u32, m: u32) -> Option<f64> {
        if n > self.n_max || m == 0 || m > self.m_max {
            return None;
        }
        Some(self.entries[n as usize][m as usize - 1])
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    /// CSV dump with header `n,m,mu`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,mu\n");
        for n in 0..=self.n_max {
            for m in 1..=self.m_max {
                out.push_str(&format!(
                    "{},{},{:.16e}\n",
                    n,
                    m,
                    self.entries[n as usize][m as usize - 1]
                ));
            }
        }
        out
    }
}
