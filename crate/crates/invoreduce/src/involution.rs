//! Order-p linear involutions: exact validation of the defining conditions
//! (`A^p = Id`, `A^j != Id` for `0 < j < p`) and the spectral construction
//! `A = U^{-1} diag(roots of unity) U`.
//!
//! Note: over the reals only order-2 involutions arise from the spectral
//! characterization with real eigenvalues, yet integer matrices such as
//! `[[0,-1],[1,-1]]` satisfy the definition with order 3. The definition is
//! the operative contract here, so such matrices are accepted.

use crate::linalg::{LinalgError, Matrix};
use crate::scalars::CycScalar;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvolutionError {
    #[error("matrix must be square")]
    NotSquare,
    #[error("order must be at least 2, got {0}")]
    OrderTooSmall(u32),
    #[error("not an involution of order {p}: A^{j} = Id for j < p")]
    EarlyIdentity { p: u32, j: u32 },
    #[error("not an involution of order {p}: A^{p} != Id")]
    PowerNotIdentity { p: u32 },
    #[error("spectral data: U is singular")]
    SingularBasis,
    #[error("identity is not an involution (all eigenvalues are 1)")]
    IdentityNotInvolution,
    #[error("spectral data: expected {expected} eigenvalues, got {got}")]
    EigenvalueCount { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A matrix together with its verified involution order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvolutionMatrix {
    matrix: Matrix,
    order: u32,
}

impl InvolutionMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn conductor(&self) -> u32 {
        self.matrix.conductor()
    }

    /// Powers `A^0 .. A^{p-1}`, used by operator composition.
    pub fn powers(&self) -> Result<Vec<Matrix>, LinalgError> {
        let mut out = Vec::with_capacity(self.order as usize);
        let mut acc = Matrix::identity(self.dim(), self.conductor());
        for _ in 0..self.order {
            out.push(acc.clone());
            acc = acc.mul(&self.matrix)?;
        }
        Ok(out)
    }
}

/// Wraps `m` after checking both involution conditions by exact matrix
/// powers; the error names the failing condition.
pub fn validate_involution(m: Matrix, p: u32) -> Result<InvolutionMatrix, InvolutionError> {
    if !m.is_square() {
        return Err(InvolutionError::NotSquare);
    }
    if p < 2 {
        return Err(InvolutionError::OrderTooSmall(p));
    }
    let mut power = Matrix::identity(m.rows(), m.conductor());
    for j in 1..=p {
        power = power.mul(&m)?;
        let is_id = power.is_identity();
        if j < p && is_id {
            return Err(InvolutionError::EarlyIdentity { p, j });
        }
        if j == p && !is_id {
            return Err(InvolutionError::PowerNotIdentity { p });
        }
    }
    Ok(InvolutionMatrix { matrix: m, order: p })
}

/// Builds `A = U^{-1} L U` where `L = diag(zeta_m^{e_i})`; the order is the
/// lcm of the eigenvalue orders and is validated before returning.
pub fn build_from_spectral(
    u: &Matrix,
    eigen_exponents: &[u32],
    conductor: u32,
) -> Result<InvolutionMatrix, InvolutionError> {
    if !u.is_square() {
        return Err(InvolutionError::NotSquare);
    }
    let n = u.rows();
    if eigen_exponents.len() != n {
        return Err(InvolutionError::EigenvalueCount {
            expected: n,
            got: eigen_exponents.len(),
        });
    }
    let u_inv = u.inverse().map_err(|e| match e {
        LinalgError::Singular => InvolutionError::SingularBasis,
        other => InvolutionError::Linalg(other),
    })?;

    let mut order: u32 = 1;
    let mut lambda = Matrix::zero(n, n, conductor);
    let zeta = CycScalar::zeta(conductor);
    for (i, &e) in eigen_exponents.iter().enumerate() {
        let e_mod = e % conductor;
        lambda.set(i, i, zeta.pow(e_mod));
        // order of zeta_m^e is m / gcd(m, e); gcd(m, 0) = m gives order 1
        order = lcm(order, conductor / gcd(conductor, e_mod));
    }
    if order == 1 {
        return Err(InvolutionError::IdentityNotInvolution);
    }
    let a = u_inv.mul(&lambda)?.mul(u)?;
    validate_involution(a, order)
}

/// Exact basis of the fixed subspace `{v : Av = v}` via the nullspace of
/// `A - Id`.
pub fn fixed_subspace(a: &InvolutionMatrix) -> Result<Vec<Vec<CycScalar>>, LinalgError> {
    let id = Matrix::identity(a.dim(), a.conductor());
    a.matrix().sub(&id)?.nullspace()
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reflection(conductor: u32) -> Matrix {
        Matrix::from_i64_rows(&[&[1, 0], &[0, -1]], conductor)
    }

    #[test]
    fn reflection_is_order_two() {
        let inv = validate_involution(reflection(1), 2).unwrap();
        assert_eq!(inv.order(), 2);
    }

    #[test]
    fn integer_matrix_of_order_three() {
        // oracle: A^2 and A^3 computed independently in linalg tests
        let m = Matrix::from_i64_rows(&[&[0, -1], &[1, -1]], 1);
        let inv = validate_involution(m, 3).unwrap();
        assert_eq!(inv.order(), 3);
    }

    #[test]
    fn identity_rejected() {
        let id = Matrix::identity(2, 1);
        assert_eq!(
            validate_involution(id, 2),
            Err(InvolutionError::EarlyIdentity { p: 2, j: 1 })
        );
    }

    #[test]
    fn wrong_order_rejected() {
        let m = Matrix::from_i64_rows(&[&[0, -1], &[1, -1]], 1);
        assert_eq!(
            validate_involution(m, 2),
            Err(InvolutionError::PowerNotIdentity { p: 2 })
        );
    }

    #[test]
    fn spectral_diagonal() {
        let u = Matrix::identity(2, 4);
        let inv = build_from_spectral(&u, &[0, 2], 4).unwrap();
        assert_eq!(inv.order(), 2);
        assert_eq!(inv.matrix(), &reflection(4));
    }

    #[test]
    fn spectral_conjugated() {
        // U = [[1,1],[0,1]], eigenvalues (1,-1): A = [[1,2],[0,-1]], checked by hand
        let u = Matrix::from_i64_rows(&[&[1, 1], &[0, 1]], 4);
        let inv = build_from_spectral(&u, &[0, 2], 4).unwrap();
        assert_eq!(inv.order(), 2);
        assert_eq!(
            inv.matrix(),
            &Matrix::from_i64_rows(&[&[1, 2], &[0, -1]], 4)
        );
        assert!(inv.matrix().pow(2).unwrap().is_identity());
    }

    #[test]
    fn spectral_order_three_diagonal() {
        let u = Matrix::identity(3, 3);
        let inv = build_from_spectral(&u, &[0, 1, 2], 3).unwrap();
        assert_eq!(inv.order(), 3);
        let z = CycScalar::zeta(3);
        assert_eq!(inv.matrix().get(1, 1), &z);
        assert_eq!(inv.matrix().get(2, 2), &z.pow(2));
    }

    #[test]
    fn spectral_identity_rejected() {
        let u = Matrix::identity(2, 4);
        assert_eq!(
            build_from_spectral(&u, &[0, 0], 4),
            Err(InvolutionError::IdentityNotInvolution)
        );
    }

    #[test]
    fn spectral_singular_basis_rejected() {
        let u = Matrix::from_i64_rows(&[&[1, 1], &[1, 1]], 4);
        assert_eq!(
            build_from_spectral(&u, &[0, 2], 4),
            Err(InvolutionError::SingularBasis)
        );
    }

    #[test]
    fn fixed_subspace_of_reflection() {
        let inv = validate_involution(reflection(1), 2).unwrap();
        let basis = fixed_subspace(&inv).unwrap();
        assert_eq!(basis.len(), 1);
        assert!(basis[0][0].is_one());
        assert!(basis[0][1].is_zero());
    }

    #[test]
    fn fixed_subspace_empty_for_order_three() {
        // det(A - I) = 3 != 0 by direct computation
        let m = Matrix::from_i64_rows(&[&[0, -1], &[1, -1]], 1);
        let inv = validate_involution(m, 3).unwrap();
        assert!(fixed_subspace(&inv).unwrap().is_empty());
    }

    #[test]
    fn fixed_subspace_block_diagonal() {
        let m = Matrix::from_i64_rows(&[&[1, 0, 0], &[0, 0, -1], &[0, 1, -1]], 1);
        let inv = validate_involution(m, 3).unwrap();
        let basis = fixed_subspace(&inv).unwrap();
        assert_eq!(basis.len(), 1);
        assert!(basis[0][0].is_one());
        assert!(basis[0][1].is_zero() && basis[0][2].is_zero());
    }

    #[test]
    fn fixed_vectors_are_fixed() {
        for rows in [
            vec![vec![1i64, 0], vec![0, -1]],
            vec![vec![1, 2], vec![0, -1]],
        ] {
            let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
            let m = Matrix::from_i64_rows(&refs, 1);
            let inv = validate_involution(m, 2).unwrap();
            for v in fixed_subspace(&inv).unwrap() {
                let image = inv.matrix().mul_vec(&v).unwrap();
                assert_eq!(image, v);
            }
        }
    }

    #[test]
    fn spectral_roundtrip_random_cases() {
        // build then validate never fails on valid spectral input
        let cases: Vec<(Vec<Vec<i64>>, Vec<u32>)> = vec![
            (vec![vec![1, 1], vec![0, 1]], vec![0, 2]),
            (vec![vec![2, 1], vec![1, 1]], vec![2, 2]),
            (vec![vec![1, 0], vec![3, 1]], vec![2, 0]),
        ];
        for (urows, exps) in cases {
            let refs: Vec<&[i64]> = urows.iter().map(|r| r.as_slice()).collect();
            let u = Matrix::from_i64_rows(&refs, 4);
            let inv = build_from_spectral(&u, &exps, 4).unwrap();
            assert!(validate_involution(inv.matrix().clone(), inv.order()).is_ok());
        }
    }
}
