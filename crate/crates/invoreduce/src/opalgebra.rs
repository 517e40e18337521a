//! The algebra of constant-coefficient differential operators with a linear
//! involution pullback.
//!
//! An operator is stored as `p` symbol polynomials `(P_0, ..., P_{p-1})`,
//! meaning `sum_j (A*)^j D_{P_j}` where `A*` is the pullback `y -> y o A`.
//! Composition normalizes products with the rule `D_w A* = A* D_{Aw}`, which
//! on symbols is the transpose substitution, giving
//!
//! ```text
//! (R L)_t = sum_{l + j = t mod p}  subst(A^j, Q_l) * P_j
//! ```
//!
//! for `R = (Q_0, ..., Q_{p-1})` and `L = (P_0, ..., P_{p-1})`.
//!
//! For order-2 involutions the closed-form reducer `Q_0 = -subst(A, P_0)`,
//! `Q_1 = P_1` cancels the pullback component of `R L` and commutes with `L`.
//! For higher orders [`find_reducer`] searches a bounded-degree coefficient
//! space for annihilators of the pullback components by exact linear algebra.

use crate::involution::InvolutionMatrix;
use crate::linalg::{LinalgError, Matrix};
use crate::scalars::{parse_scalar, CycScalar, ScalarError};
use crate::symtensor::{linear_substitute, MultiIndex, Poly, PolyError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OperatorError {
    #[error("operators use different involutions")]
    InvolutionMismatch,
    #[error("component count {got} does not match involution order {expected}")]
    ComponentCount { expected: usize, got: usize },
    #[error("component dimension {got} does not match involution dimension {expected}")]
    ComponentDim { expected: usize, got: usize },
    #[error("closed-form reducer requires order-2 involution, got order {0}")]
    ReducerNeedsOrderTwo(u32),
    #[error("reducer search produced a non-annihilating candidate")]
    SearchInconsistent,
    #[error("invalid operator JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// Element of the operator algebra: involution plus `p` component symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvOperator {
    involution: InvolutionMatrix,
    components: Vec<Poly>,
}

impl InvOperator {
    pub fn new(
        involution: InvolutionMatrix,
        components: Vec<Poly>,
    ) -> Result<Self, OperatorError> {
        let p = involution.order() as usize;
        if components.len() != p {
            return Err(OperatorError::ComponentCount {
                expected: p,
                got: components.len(),
            });
        }
        for c in &components {
            if c.dim() != involution.dim() {
                return Err(OperatorError::ComponentDim {
                    expected: involution.dim(),
                    got: c.dim(),
                });
            }
        }
        Ok(InvOperator {
            involution,
            components,
        })
    }

    pub fn zero(involution: InvolutionMatrix) -> Self {
        let dim = involution.dim();
        let p = involution.order() as usize;
        InvOperator {
            involution,
            components: vec![Poly::zero(dim); p],
        }
    }

    /// The identity operator: component 0 is the constant 1.
    pub fn identity(involution: InvolutionMatrix) -> Self {
        let dim = involution.dim();
        let conductor = involution.conductor();
        let mut op = Self::zero(involution);
        op.components[0] = Poly::one(dim, conductor);
        op
    }

    /// The operator `(A*)^j D_{poly}` placed in component `j mod p`.
    pub fn pullback_term(
        involution: InvolutionMatrix,
        j: u32,
        poly: Poly,
    ) -> Result<Self, OperatorError> {
        let p = involution.order();
        let mut op = Self::zero(involution);
        if poly.dim() != op.involution.dim() {
            return Err(OperatorError::ComponentDim {
                expected: op.involution.dim(),
                got: poly.dim(),
            });
        }
        op.components[(j % p) as usize] = poly;
        Ok(op)
    }

    pub fn involution(&self) -> &InvolutionMatrix {
        &self.involution
    }

    pub fn order(&self) -> u32 {
        self.involution.order()
    }

    pub fn dim(&self) -> usize {
        self.involution.dim()
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &Poly {
        &self.components[j]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    /// Top total degree over all components (zero operator reports 0).
    pub fn degree(&self) -> u32 {
        self.components.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    fn check_same_involution(&self, other: &Self) -> Result<(), OperatorError> {
        if self.involution != other.involution {
            return Err(OperatorError::InvolutionMismatch);
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, OperatorError> {
        self.check_same_involution(other)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.checked_add(b))
            .collect::<Result<_, _>>()?;
        Ok(InvOperator {
            involution: self.involution.clone(),
            components,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, OperatorError> {
        self.check_same_involution(other)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.checked_sub(b))
            .collect::<Result<_, _>>()?;
        Ok(InvOperator {
            involution: self.involution.clone(),
            components,
        })
    }

    pub fn scale(&self, c: &CycScalar) -> Result<Self, OperatorError> {
        let components = self
            .components
            .iter()
            .map(|p| p.scale(c))
            .collect::<Result<_, _>>()?;
        Ok(InvOperator {
            involution: self.involution.clone(),
            components,
        })
    }

    pub fn neg(&self) -> Self {
        InvOperator {
            involution: self.involution.clone(),
            components: self.components.iter().map(|p| p.neg()).collect(),
        }
    }
}

/// Exact composition `R o L`; both operators must share the involution
/// (bit-identical matrix and order). Pullback exponents reduce mod `p`.
pub fn op_compose(r: &InvOperator, l: &InvOperator) -> Result<InvOperator, OperatorError> {
    r.check_same_involution(l)?;
    let p = r.order() as usize;
    let dim = r.dim();
    let powers = r.involution.powers()?;
    let mut components = vec![Poly::zero(dim); p];
    for (lq, q) in r.components.iter().enumerate() {
        if q.is_zero() {
            continue;
        }
        for (j, pj) in l.components.iter().enumerate() {
            if pj.is_zero() {
                continue;
            }
            let t = (lq + j) % p;
            let moved = linear_substitute(&powers[j], q)?;
            let contrib = moved.checked_mul(pj)?;
            components[t] = components[t].checked_add(&contrib)?;
        }
    }
    Ok(InvOperator {
        involution: r.involution.clone(),
        components,
    })
}

/// True when every pullback component (index 1 .. p-1) vanishes, i.e. the
/// operator is a plain partial differential operator.
pub fn is_pure_pde(op: &InvOperator) -> bool {
    op.components[1..].iter().all(|c| c.is_zero())
}

/// Closed-form reducer for order-2 involutions: `Q_0 = -subst(A, P_0)`,
/// `Q_1 = P_1`. The returned operator satisfies `is_pure_pde(R o L)` and
/// commutes with `L`, both exactly.
pub fn reduce_order2(l: &InvOperator) -> Result<InvOperator, OperatorError> {
    if l.order() != 2 {
        return Err(OperatorError::ReducerNeedsOrderTwo(l.order()));
    }
    let reflected = linear_substitute(l.involution.matrix(), &l.components[0])?;
    let components = vec![reflected.neg(), l.components[1].clone()];
    Ok(InvOperator {
        involution: l.involution.clone(),
        components,
    })
}

/// Commutator `L o R - R o L`, exact.
pub fn op_commutator(l: &InvOperator, r: &InvOperator) -> Result<InvOperator, OperatorError> {
    let lr = op_compose(l, r)?;
    let rl = op_compose(r, l)?;
    lr.checked_sub(&rl)
}

/// Outcome of the bounded-degree reducer search.
#[derive(Debug, Clone)]
pub struct ReducerSearch {
    /// A reducer with `R o L` pure and nonzero, when one exists in the
    /// searched coefficient space.
    pub reducer: Option<InvOperator>,
    /// Dimension of the nullspace of the annihilation constraints.
    pub nullspace_dim: usize,
}

/// All exponent vectors of total degree at most `max_degree`, graded-lex
/// ascending. This is the canonical unknown ordering of the reducer search.
pub fn monomials_up_to(dim: usize, max_degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    collect_monomials(dim, max_degree, 0, 0, &mut current, &mut out);
    out.sort();
    out
}

fn collect_monomials(
    dim: usize,
    max_degree: u32,
    pos: usize,
    used: u32,
    current: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
) {
    if pos == dim {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for e in 0..=(max_degree - used) {
        current[pos] = e;
        collect_monomials(dim, max_degree, pos + 1, used + e, current, out);
    }
    current[pos] = 0;
}

/// Linear constraint system whose nullspace is the set of coefficient
/// vectors `(Q_0, ..., Q_{p-1})` (over monomials of degree <= `max_degree`)
/// for which components 1..p-1 of `R o L` vanish exactly.
pub struct ReducerConstraints {
    matrix: Matrix,
    monomials: Vec<MultiIndex>,
    order: usize,
}

impl ReducerConstraints {
    pub fn build(l: &InvOperator, max_degree: u32) -> Result<Self, OperatorError> {
        let p = l.order() as usize;
        let dim = l.dim();
        let conductor = l.involution.conductor();
        let powers = l.involution.powers()?;
        let monomials = monomials_up_to(dim, max_degree);
        let ncols = p * monomials.len();

        // rows keyed by (component t in 1..p, result monomial), discovered in
        // a fixed order via a BTreeMap
        let mut row_index: std::collections::BTreeMap<(usize, MultiIndex), usize> =
            std::collections::BTreeMap::new();
        let mut entries: Vec<((usize, MultiIndex), usize, CycScalar)> = Vec::new();

        for (lq, alpha) in itertools_product(p, &monomials) {
            let col = lq * monomials.len() + alpha_index(&monomials, alpha);
            let basis = Poly::monomial(dim, &alpha.0, CycScalar::one(conductor))?;
            for (j, pj) in l.components().iter().enumerate() {
                if pj.is_zero() {
                    continue;
                }
                let t = (lq + j) % p;
                if t == 0 {
                    continue;
                }
                let moved = linear_substitute(&powers[j], &basis)?;
                let contrib = moved.checked_mul(pj)?;
                for (gamma, coeff) in contrib.terms() {
                    entries.push(((t, gamma.clone()), col, coeff.clone()));
                }
            }
        }
        for (key, _, _) in &entries {
            let next = row_index.len();
            row_index.entry(key.clone()).or_insert(next);
        }
        let mut matrix = Matrix::zero(row_index.len().max(1), ncols, conductor);
        for (key, col, coeff) in entries {
            let row = row_index[&key];
            let sum = matrix.get(row, col).checked_add(&coeff)?;
            matrix.set(row, col, sum);
        }
        Ok(ReducerConstraints {
            matrix,
            monomials,
            order: p,
        })
    }

    /// Exact membership test: does `candidate` (with components of degree at
    /// most the search bound) satisfy every annihilation constraint?
    pub fn contains(&self, candidate: &InvOperator) -> Result<bool, OperatorError> {
        let Some(vec) = self.coefficient_vector(candidate) else {
            return Ok(false);
        };
        let image = self.matrix.mul_vec(&vec)?;
        Ok(image.iter().all(|c| c.is_zero()))
    }

    fn coefficient_vector(&self, op: &InvOperator) -> Option<Vec<CycScalar>> {
        if op.order() as usize != self.order {
            return None;
        }
        let conductor = self.matrix.conductor();
        let mut vec = vec![CycScalar::zero(conductor); self.order * self.monomials.len()];
        for (l, poly) in op.components().iter().enumerate() {
            for (alpha, c) in poly.terms() {
                let idx = self.monomials.iter().position(|m| m == alpha)?;
                vec[l * self.monomials.len() + idx] = c.clone();
            }
        }
        Some(vec)
    }

    fn operator_from_vector(
        &self,
        inv: &InvolutionMatrix,
        vec: &[CycScalar],
    ) -> Result<InvOperator, OperatorError> {
        let dim = inv.dim();
        let mut components = Vec::with_capacity(self.order);
        for l in 0..self.order {
            let mut poly = Poly::zero(dim);
            for (k, alpha) in self.monomials.iter().enumerate() {
                let c = &vec[l * self.monomials.len() + k];
                if !c.is_zero() {
                    poly = poly.checked_add(&Poly::monomial(dim, &alpha.0, c.clone())?)?;
                }
            }
            components.push(poly);
        }
        InvOperator::new(inv.clone(), components)
    }
}

fn alpha_index(monomials: &[MultiIndex], alpha: &MultiIndex) -> usize {
    monomials
        .iter()
        .position(|m| m == alpha)
        .expect("monomial from own enumeration")
}

fn itertools_product<'a>(
    p: usize,
    monomials: &'a [MultiIndex],
) -> impl Iterator<Item = (usize, &'a MultiIndex)> {
    (0..p).flat_map(move |l| monomials.iter().map(move |m| (l, m)))
}

/// Searches for `R` with components of degree at most `max_degree` such that
/// `R o L` is a pure, nonzero partial differential operator.
///
/// The nullspace basis is scanned in canonical order; the first element whose
/// composition with `L` is nonzero wins, then the sum of all basis elements
/// is tried, then the search gives up. The purity postcondition is re-checked
/// through `op_compose` independently of the linear solve.
pub fn find_reducer(l: &InvOperator, max_degree: u32) -> Result<ReducerSearch, OperatorError> {
    let constraints = ReducerConstraints::build(l, max_degree)?;
    let basis = constraints.matrix.nullspace()?;
    let nullspace_dim = basis.len();

    let mut candidates: Vec<Vec<CycScalar>> = basis.clone();
    if basis.len() > 1 {
        let conductor = l.involution.conductor();
        let mut sum = vec![CycScalar::zero(conductor); basis[0].len()];
        for v in &basis {
            for (acc, c) in sum.iter_mut().zip(v) {
                *acc = acc.checked_add(c)?;
            }
        }
        candidates.push(sum);
    }

    for vec in candidates {
        let candidate = constraints.operator_from_vector(&l.involution, &vec)?;
        let composed = op_compose(&candidate, l)?;
        if !is_pure_pde(&composed) {
            return Err(OperatorError::SearchInconsistent);
        }
        if !composed.is_zero() {
            return Ok(ReducerSearch {
                reducer: Some(candidate),
                nullspace_dim,
            });
        }
    }
    Ok(ReducerSearch {
        reducer: None,
        nullspace_dim,
    })
}

// --- serialization -------------------------------------------------------

impl InvOperator {
    /// JSON form:
    /// `{"dim":2,"p":2,"conductor":1,"involution":[["1","0"],["0","-1"]],"components":[...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let a = self.involution.matrix();
        let involution: Vec<Vec<String>> = (0..a.rows())
            .map(|i| (0..a.cols()).map(|j| a.get(i, j).to_string()).collect())
            .collect();
        serde_json::json!({
            "dim": self.dim(),
            "p": self.order(),
            "conductor": self.involution.conductor(),
            "involution": involution,
            "components": self.components.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, OperatorError> {
        let get = |k: &str| {
            value
                .get(k)
                .ok_or_else(|| OperatorError::Json(format!("missing field {k}")))
        };
        let dim = get("dim")?
            .as_u64()
            .ok_or_else(|| OperatorError::Json("dim must be an integer".into()))?
            as usize;
        let p = get("p")?
            .as_u64()
            .ok_or_else(|| OperatorError::Json("p must be an integer".into()))? as u32;
        let conductor = get("conductor")?
            .as_u64()
            .ok_or_else(|| OperatorError::Json("conductor must be an integer".into()))?
            as u32;
        let inv_rows = get("involution")?
            .as_array()
            .ok_or_else(|| OperatorError::Json("involution must be a matrix".into()))?;
        let mut rows = Vec::with_capacity(inv_rows.len());
        for row in inv_rows {
            let row = row
                .as_array()
                .ok_or_else(|| OperatorError::Json("involution row must be an array".into()))?;
            let mut parsed = Vec::with_capacity(row.len());
            for cell in row {
                let text = cell
                    .as_str()
                    .ok_or_else(|| OperatorError::Json("matrix entry must be a string".into()))?;
                parsed.push(parse_scalar(text, conductor)?);
            }
            rows.push(parsed);
        }
        let matrix = Matrix::from_rows(rows, conductor)?;
        if matrix.rows() != dim {
            return Err(OperatorError::Json("involution size disagrees with dim".into()));
        }
        let involution = crate::involution::validate_involution(matrix, p)
            .map_err(|e| OperatorError::Json(e.to_string()))?;
        let comps = get("components")?
            .as_array()
            .ok_or_else(|| OperatorError::Json("components must be an array".into()))?;
        let components = comps
            .iter()
            .map(|c| Poly::from_json(c, conductor))
            .collect::<Result<Vec<_>, _>>()?;
        InvOperator::new(involution, components)
    }
}

impl std::fmt::Display for InvOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (j, c) in self.components.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match j {
                0 => write!(f, "[{c}]")?,
                1 => write!(f, "A*[{c}]")?,
                _ => write!(f, "(A*)^{j}[{c}]")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}
