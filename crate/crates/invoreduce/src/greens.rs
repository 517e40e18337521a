//! Green's-function kernels on the disk and their compositions.
//!
//! Heat model (`L = a*Lap + b*(A* - Id)`, `A` the reflection `y -> -y`):
//!
//! * `G1` — Poisson kernel with Dirichlet data on the disk of radius `rho`,
//!   in polar coordinates
//!   `G1 = -(1/4pi) ln[(r^2 rt^2 - 2 rho^2 r rt cos(dphi) + rho^4) /
//!   (rho^2 (r^2 - 2 r rt cos(dphi) + rt^2))]`;
//! * `G2` — eigenfunction series for the shifted Helmholtz factor
//!   `(-a^2 Lap + 2ab) v = f`, built from `w1_nm = J_n(mu_nm r / rho) cos(n phi)`
//!   and `w2_nm = J_n(mu_nm r / rho) sin(n phi)` with norms
//!   `|w1|^2 = (pi rho^2 / 2)(1 + delta_{n0}) J_n'(mu_nm)^2`;
//! * `R G2` — the reducer applied termwise through
//!   `Lap w_nm = -(mu_nm/rho)^2 w_nm` and the reflection parity of cos/sin:
//!   multipliers `a mu^2/rho^2 + 2b` (cosine) and `a mu^2/rho^2` (sine);
//! * `G3 = int G2(x, s) G1(s, xi) ds` by tensor-product quadrature, and
//!   `G4 = R G3` with `R` passed under the integral onto `G2`.
//!
//! Biharmonic model (`L = a*Lap + b*A*Lap`): the fundamental solution
//! `(1/8pi) d^2 ln d` of the bi-Laplacian, the two-parameter family
//! `(1/8pi) d^2 (mu + ln d) + nu/8pi`, and the faithful application of
//! `R = -a*Lap + b*A*Lap` through the analytic Laplacian of each closed form.
//! The printed single-distance closed forms for the reduced kernels hold only
//! on the reflection axis (where `|A eta - xi| = |eta - xi|`); they are
//! exposed separately for comparison and never asserted globally.

use crate::parallel::{map_indexed, map_indexed_seq};
use crate::quad::{DiskRule, QuadSpec};
use crate::specfun::{bessel_j, bessel_j_prime, BesselZeroTable, SpecFunError};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel singularity: coincident evaluation points")]
    Singularity,
    #[error("point outside the closed disk of radius {rho}: r = {r}")]
    OutsideDomain { rho: f64, r: f64 },
    #[error("unsupported base kernel: {0}")]
    UnsupportedBase(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Disk geometry and model coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskSpec {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DiskSpec {
    /// `rho > 0`, `alpha > 0`, `beta >= 0` (zero coupling is the Poisson
    /// degeneration used by the verification pipeline).
    pub fn new(rho: f64, alpha: f64, beta: f64) -> Result<Self, KernelError> {
        if !(rho > 0.0) || !(alpha > 0.0) || !(beta >= 0.0) {
            return Err(KernelError::InvalidParameter(format!(
                "need rho > 0, alpha > 0, beta >= 0; got rho = {rho}, alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(DiskSpec { rho, alpha, beta })
    }
}

/// Truncation of the eigenfunction double series: `n <= n_max`, `1 <= m <= m_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeriesTruncation {
    pub n_max: u32,
    pub m_max: u32,
}

impl SeriesTruncation {
    pub fn new(n_max: u32, m_max: u32) -> Result<Self, KernelError> {
        if m_max == 0 {
            return Err(KernelError::InvalidParameter(
                "m_max must be at least 1".into(),
            ));
        }
        Ok(SeriesTruncation { n_max, m_max })
    }
}

/// Point in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub fn new(r: f64, phi: f64) -> Self {
        PolarPoint { r, phi }
    }

    pub fn to_cartesian(self) -> (f64, f64) {
        (self.r * self.phi.cos(), self.r * self.phi.sin())
    }

    pub fn from_cartesian(x: f64, y: f64) -> Self {
        PolarPoint {
            r: x.hypot(y),
            phi: y.atan2(x),
        }
    }

    /// Image under the plate reflection `(x, y) -> (x, -y)`.
    pub fn reflected(self) -> Self {
        PolarPoint {
            r: self.r,
            phi: -self.phi,
        }
    }
}

/// One mode of the eigenfunction series, with the reducer multipliers folded
/// into `cos_mult` / `sin_mult` (both 1 for the plain kernel).
#[derive(Debug, Clone)]
pub(crate) struct ModeTerm {
    pub n: u32,
    pub mu: f64,
    /// `1 / (a^2 (mu^2/rho^2 + 2b/a) |w1|^2)`
    pub coeff: f64,
    pub cos_mult: f64,
    pub sin_mult: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SeriesData {
    pub rho: f64,
    pub spec: DiskSpec,
    pub truncation: SeriesTruncation,
    pub r_applied: bool,
    /// n outer (ascending), m inner (ascending): the fixed summation order.
    pub terms: Vec<ModeTerm>,
}

/// Base kind accepted by the biharmonic reducer application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiharmBase {
    Fundamental,
    Family { mu: f64, nu: f64 },
}

#[derive(Clone)]
pub(crate) enum KernelKind {
    Zero,
    PoissonDisk {
        rho: f64,
    },
    HelmholtzSeries(Arc<SeriesData>),
    Composed {
        outer: Arc<KernelFn>,
        inner: Arc<KernelFn>,
        quad: QuadSpec,
        rho: f64,
    },
    BiharmFundamental,
    BiharmFamily {
        mu: f64,
        nu: f64,
    },
    BiharmRApplied {
        alpha: f64,
        beta: f64,
        base: BiharmBase,
    },
    Custom {
        eval: Arc<dyn Fn(PolarPoint, PolarPoint) -> f64 + Send + Sync>,
        singular: bool,
    },
}

/// A numeric Green's-function kernel `G(x, s)`: `x` is the field point (the
/// variable operators like `R` act on), `s` the source.
#[derive(Clone)]
pub struct KernelFn {
    pub(crate) kind: KernelKind,
}

impl KernelFn {
    pub fn zero() -> Self {
        KernelFn {
            kind: KernelKind::Zero,
        }
    }

    /// Wraps an arbitrary evaluator; `singular` marks a near-diagonal
    /// singularity so that integral application switches to the
    /// singularity-centered rule.
    pub fn custom<F>(eval: F, singular: bool) -> Self
    where
        F: Fn(PolarPoint, PolarPoint) -> f64 + Send + Sync + 'static,
    {
        KernelFn {
            kind: KernelKind::Custom {
                eval: Arc::new(eval),
                singular,
            },
        }
    }

    pub fn eval(&self, field: PolarPoint, source: PolarPoint) -> Result<f64, KernelError> {
        match &self.kind {
            KernelKind::Zero => Ok(0.0),
            KernelKind::PoissonDisk { rho } => poisson_eval(*rho, field, source),
            KernelKind::HelmholtzSeries(data) => series_eval(data, field, source),
            KernelKind::Composed {
                outer,
                inner,
                quad,
                rho,
            } => composed_eval(outer, inner, *quad, *rho, field, source, true),
            KernelKind::BiharmFundamental => biharm_fundamental_eval(field, source),
            KernelKind::BiharmFamily { mu, nu } => Ok(biharm_family_eval(*mu, *nu, field, source)),
            KernelKind::BiharmRApplied { alpha, beta, base } => {
                biharm_r_applied_eval(*alpha, *beta, *base, field, source)
            }
            KernelKind::Custom { eval, .. } => Ok(eval(field, source)),
        }
    }

    /// Batch evaluation over point pairs; parallel over pairs when the
    /// `parallel` feature is on, with a fixed output order either way.
    pub fn eval_over_points(
        &self,
        pairs: &[(PolarPoint, PolarPoint)],
    ) -> Result<Vec<f64>, KernelError> {
        map_indexed(pairs.len(), |i| self.eval(pairs[i].0, pairs[i].1))
            .into_iter()
            .collect()
    }

    /// Sequential baseline for [`KernelFn::eval_over_points`].
    pub fn eval_over_points_seq(
        &self,
        pairs: &[(PolarPoint, PolarPoint)],
    ) -> Result<Vec<f64>, KernelError> {
        map_indexed_seq(pairs.len(), |i| self.eval(pairs[i].0, pairs[i].1))
            .into_iter()
            .collect()
    }

    pub(crate) fn series(&self) -> Option<&SeriesData> {
        match &self.kind {
            KernelKind::HelmholtzSeries(data) => Some(data),
            _ => None,
        }
    }

    pub(crate) fn composed(&self) -> Option<(&KernelFn, &KernelFn, QuadSpec, f64)> {
        match &self.kind {
            KernelKind::Composed {
                outer,
                inner,
                quad,
                rho,
            } => Some((outer, inner, *quad, *rho)),
            _ => None,
        }
    }

    /// Closed-form kernels with a diagonal singularity (or a non-smooth
    /// diagonal): their integral application uses the singularity-centered
    /// polar rule.
    pub(crate) fn singular_closed_form(&self) -> bool {
        match &self.kind {
            KernelKind::PoissonDisk { .. }
            | KernelKind::BiharmFundamental
            | KernelKind::BiharmFamily { .. }
            | KernelKind::BiharmRApplied { .. } => true,
            KernelKind::Custom { singular, .. } => *singular,
            _ => false,
        }
    }

    /// Metadata describing the kernel (for CSV sidecars and reports).
    pub fn describe(&self) -> serde_json::Value {
        match &self.kind {
            KernelKind::Zero => serde_json::json!({"kind": "zero"}),
            KernelKind::PoissonDisk { rho } => {
                serde_json::json!({"kind": "poisson-disk", "rho": rho})
            }
            KernelKind::HelmholtzSeries(d) => serde_json::json!({
                "kind": if d.r_applied { "helmholtz-series-r-applied" } else { "helmholtz-series" },
                "spec": d.spec,
                "truncation": d.truncation,
            }),
            KernelKind::Composed {
                outer,
                inner,
                quad,
                rho,
            } => serde_json::json!({
                "kind": "composed",
                "outer": outer.describe(),
                "inner": inner.describe(),
                "quad": quad,
                "rho": rho,
            }),
            KernelKind::BiharmFundamental => serde_json::json!({"kind": "biharm-fundamental"}),
            KernelKind::BiharmFamily { mu, nu } => {
                serde_json::json!({"kind": "biharm-family", "mu": mu, "nu": nu})
            }
            KernelKind::BiharmRApplied { alpha, beta, base } => serde_json::json!({
                "kind": "biharm-r-applied",
                "alpha": alpha,
                "beta": beta,
                "base": match base {
                    BiharmBase::Fundamental => serde_json::json!("fundamental"),
                    BiharmBase::Family { mu, nu } => serde_json::json!({"mu": mu, "nu": nu}),
                },
            }),
            KernelKind::Custom { singular, .. } => {
                serde_json::json!({"kind": "custom", "singular": singular})
            }
        }
    }
}

// --- closed-form kernels ---------------------------------------------------

fn check_in_disk(rho: f64, p: PolarPoint) -> Result<(), KernelError> {
    if p.r > rho * (1.0 + 1e-9) || p.r < 0.0 {
        return Err(KernelError::OutsideDomain { rho, r: p.r });
    }
    Ok(())
}

/// Dirichlet Green's function of the Laplacian on the disk, via the
/// cancellation-free form
/// `num = (r rt - rho^2)^2 + 4 r rt rho^2 sin^2(dphi/2)`,
/// `den = rho^2 [(r - rt)^2 + 4 r rt sin^2(dphi/2)]`.
fn poisson_eval(rho: f64, x: PolarPoint, s: PolarPoint) -> Result<f64, KernelError> {
    check_in_disk(rho, x)?;
    check_in_disk(rho, s)?;
    let sin_half = (0.5 * (x.phi - s.phi)).sin();
    let cross = 4.0 * x.r * s.r * sin_half * sin_half;
    let num = {
        let t = x.r * s.r - rho * rho;
        t * t + cross * rho * rho
    };
    let den_core = {
        let t = x.r - s.r;
        t * t + cross
    };
    if den_core == 0.0 {
        return Err(KernelError::Singularity);
    }
    Ok(-(num / (rho * rho * den_core)).ln() / (4.0 * std::f64::consts::PI))
}

fn squared_distance(x: PolarPoint, s: PolarPoint) -> f64 {
    let sin_half = (0.5 * (x.phi - s.phi)).sin();
    let t = x.r - s.r;
    t * t + 4.0 * x.r * s.r * sin_half * sin_half
}

/// `(1/8pi) d^2 ln d`, the fundamental solution of the bi-Laplacian.
fn biharm_fundamental_eval(x: PolarPoint, s: PolarPoint) -> Result<f64, KernelError> {
    let d2 = squared_distance(x, s);
    if d2 == 0.0 {
        return Err(KernelError::Singularity);
    }
    Ok(d2 * d2.ln() / (16.0 * std::f64::consts::PI))
}

/// `(1/8pi) d^2 (mu + ln d) + nu/8pi`; continuous across the diagonal.
fn biharm_family_eval(mu: f64, nu: f64, x: PolarPoint, s: PolarPoint) -> f64 {
    let d2 = squared_distance(x, s);
    let eight_pi = 8.0 * std::f64::consts::PI;
    if d2 == 0.0 {
        return nu / eight_pi;
    }
    (d2 * (mu + 0.5 * d2.ln()) + nu) / eight_pi
}

/// Analytic Laplacian (in the field point) of the closed-form bases at
/// distance `d`: `(mu + 1 + ln d) / 2pi` with `mu = 0` for the fundamental
/// solution.
fn biharm_base_laplacian(base: BiharmBase, d2: f64) -> Result<f64, KernelError> {
    if d2 == 0.0 {
        return Err(KernelError::Singularity);
    }
    let mu = match base {
        BiharmBase::Fundamental => 0.0,
        BiharmBase::Family { mu, .. } => mu,
    };
    Ok((mu + 1.0 + 0.5 * d2.ln()) / TWO_PI)
}

/// Faithful `R G = -a (Lap G)(eta, xi) + b (Lap G)(A eta, xi)`.
fn biharm_r_applied_eval(
    alpha: f64,
    beta: f64,
    base: BiharmBase,
    x: PolarPoint,
    s: PolarPoint,
) -> Result<f64, KernelError> {
    let direct = biharm_base_laplacian(base, squared_distance(x, s))?;
    let reflected = biharm_base_laplacian(base, squared_distance(x.reflected(), s))?;
    Ok(-alpha * direct + beta * reflected)
}

// --- series kernels --------------------------------------------------------

fn build_series(
    spec: &DiskSpec,
    truncation: &SeriesTruncation,
    r_applied: bool,
) -> Result<SeriesData, KernelError> {
    let table = BesselZeroTable::build(truncation.n_max, truncation.m_max)?;
    let rho = spec.rho;
    let mut terms = Vec::with_capacity(
        (truncation.n_max as usize + 1) * truncation.m_max as usize,
    );
    for n in 0..=truncation.n_max {
        for m in 1..=truncation.m_max {
            let mu = table.get(n, m).expect("within table bounds");
            let jp = bessel_j_prime(n, mu)?;
            let delta = if n == 0 { 1.0 } else { 0.0 };
            let norm = 0.5 * std::f64::consts::PI * rho * rho * (1.0 + delta) * jp * jp;
            let lambda = spec.alpha * spec.alpha * (mu * mu / (rho * rho))
                + 2.0 * spec.alpha * spec.beta;
            let (cos_mult, sin_mult) = if r_applied {
                (
                    spec.alpha * mu * mu / (rho * rho) + 2.0 * spec.beta,
                    spec.alpha * mu * mu / (rho * rho),
                )
            } else {
                (1.0, 1.0)
            };
            terms.push(ModeTerm {
                n,
                mu,
                coeff: 1.0 / (lambda * norm),
                cos_mult,
                sin_mult,
            });
        }
    }
    Ok(SeriesData {
        rho,
        spec: *spec,
        truncation: *truncation,
        r_applied,
        terms,
    })
}

fn series_eval(data: &SeriesData, x: PolarPoint, s: PolarPoint) -> Result<f64, KernelError> {
    let mut acc = 0.0;
    for term in &data.terms {
        let jr = bessel_j(term.n, term.mu * x.r / data.rho)?;
        let js = bessel_j(term.n, term.mu * s.r / data.rho)?;
        let nf = term.n as f64;
        let angular = term.cos_mult * (nf * x.phi).cos() * (nf * s.phi).cos()
            + term.sin_mult * (nf * x.phi).sin() * (nf * s.phi).sin();
        acc += term.coeff * jr * js * angular;
    }
    Ok(acc)
}

fn composed_eval(
    outer: &KernelFn,
    inner: &KernelFn,
    quad: QuadSpec,
    rho: f64,
    x: PolarPoint,
    s: PolarPoint,
    parallel: bool,
) -> Result<f64, KernelError> {
    let rule = DiskRule::build(rho, &quad);
    let count = rule.node_count();
    let eval_node = |q: usize| -> Result<f64, KernelError> {
        let (r, phi, w) = rule.node(q);
        let node = PolarPoint::new(r, phi);
        Ok(w * outer.eval(x, node)? * inner.eval(node, s)?)
    };
    let contributions: Result<Vec<f64>, KernelError> = if parallel {
        map_indexed(count, eval_node).into_iter().collect()
    } else {
        map_indexed_seq(count, eval_node).into_iter().collect()
    };
    Ok(contributions?.iter().sum())
}

// --- public constructors ---------------------------------------------------

/// Dirichlet Green's function of the Laplacian on the disk (`G1`).
pub fn g1_poisson_disk(spec: &DiskSpec) -> KernelFn {
    KernelFn {
        kind: KernelKind::PoissonDisk { rho: spec.rho },
    }
}

/// Eigenfunction-series Green's function of the shifted Helmholtz factor
/// `(-a^2 Lap + 2ab) v = f` with Dirichlet data (`G2`).
pub fn g2_helmholtz_disk(
    spec: &DiskSpec,
    truncation: &SeriesTruncation,
) -> Result<KernelFn, KernelError> {
    Ok(KernelFn {
        kind: KernelKind::HelmholtzSeries(Arc::new(build_series(spec, truncation, false)?)),
    })
}

/// `R G2` with `R = -a*Lap + b*A* + b*Id` applied termwise in the field
/// variable: each mode of `G2` is scaled by `a mu^2/rho^2 + 2b` on its cosine
/// part and by `a mu^2/rho^2` on its sine part.
pub fn apply_r_heat_termwise(
    spec: &DiskSpec,
    truncation: &SeriesTruncation,
) -> Result<KernelFn, KernelError> {
    Ok(KernelFn {
        kind: KernelKind::HelmholtzSeries(Arc::new(build_series(spec, truncation, true)?)),
    })
}

/// Kernel composition `G(x, xi) = int outer(x, s) inner(s, xi) [ds]` by
/// tensor-product quadrature over the disk; `quad.jacobian` selects whether
/// the composition measure carries the polar area element (the Lebesgue
/// reading) or not (the literal iterated-integral reading).
pub fn g3_compose(
    outer: &KernelFn,
    inner: &KernelFn,
    spec: &DiskSpec,
    quad: &QuadSpec,
) -> KernelFn {
    KernelFn {
        kind: KernelKind::Composed {
            outer: Arc::new(outer.clone()),
            inner: Arc::new(inner.clone()),
            quad: *quad,
            rho: spec.rho,
        },
    }
}

/// Green's function of the bent-plate problem `L u = h`, `u = 0` on the
/// boundary: `G4 = (R G2) o G1`.
pub fn g4_heat_disk(
    spec: &DiskSpec,
    truncation: &SeriesTruncation,
    quad: &QuadSpec,
) -> Result<KernelFn, KernelError> {
    let r_g2 = apply_r_heat_termwise(spec, truncation)?;
    let g1 = g1_poisson_disk(spec);
    Ok(g3_compose(&r_g2, &g1, spec, quad))
}

/// Fundamental solution of the bi-Laplacian, `(1/8pi) d^2 ln d`.
pub fn biharm_g1() -> KernelFn {
    KernelFn {
        kind: KernelKind::BiharmFundamental,
    }
}

/// The bi-Laplacian kernel family `(1/8pi) d^2 (mu + ln d) + nu/8pi`.
pub fn biharm_family(mu: f64, nu: f64) -> KernelFn {
    KernelFn {
        kind: KernelKind::BiharmFamily { mu, nu },
    }
}

/// The family member solving the Navier problem on the disk of radius `rho`
/// (`mu = ln rho - 1`, `nu = rho^2`).
pub fn biharm_navier_disk(rho: f64) -> KernelFn {
    biharm_family(rho.ln() - 1.0, rho * rho)
}

/// Faithful application of `R = -a*Lap + b*A*Lap` to a closed-form
/// bi-Laplacian kernel, using the analytic Laplacian of the base and the
/// exact reflected distance. Errors on unsupported bases.
pub fn biharm_apply_r(spec: &DiskSpec, base: &KernelFn) -> Result<KernelFn, KernelError> {
    let base_kind = match &base.kind {
        KernelKind::BiharmFundamental => BiharmBase::Fundamental,
        KernelKind::BiharmFamily { mu, nu } => BiharmBase::Family { mu: *mu, nu: *nu },
        other => {
            let name = KernelFn { kind: other.clone() }.describe();
            return Err(KernelError::UnsupportedBase(name.to_string()));
        }
    };
    Ok(KernelFn {
        kind: KernelKind::BiharmRApplied {
            alpha: spec.alpha,
            beta: spec.beta,
            base: base_kind,
        },
    })
}

// --- printed closed forms (hold on the reflection axis only) ---------------

/// Printed reduced kernel for the biharmonic model: `(b - a)(ln d + 1)/2pi`.
pub fn printed_biharm_g2(alpha: f64, beta: f64, dist: f64) -> f64 {
    (beta - alpha) * (dist.ln() + 1.0) / TWO_PI
}

/// Printed reduced Navier kernel: `(ln rho + ln d)/2pi`.
pub fn printed_biharm_g4(rho: f64, dist: f64) -> f64 {
    (rho.ln() + dist.ln()) / TWO_PI
}

/// Printed reduced family kernel: `(1 + mu + ln d)/2pi`.
pub fn printed_biharm_g6(mu: f64, dist: f64) -> f64 {
    (1.0 + mu + dist.ln()) / TWO_PI
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    fn spec(rho: f64, alpha: f64, beta: f64) -> DiskSpec {
        DiskSpec::new(rho, alpha, beta).unwrap()
    }

    #[test]
    fn poisson_boundary_and_symmetry() {
        let g = g1_poisson_disk(&spec(1.0, 1.0, 0.5));
        for k in 0..8 {
            let phi = TWO_PI * k as f64 / 8.0;
            let v = g
                .eval(PolarPoint::new(1.0, phi), PolarPoint::new(0.4, 1.3))
                .unwrap();
            assert!(v.abs() <= 1e-14, "boundary value {v:e}");
        }
        let a = PolarPoint::new(0.3, 0.7);
        let b = PolarPoint::new(0.8, 2.9);
        assert_eq!(g.eval(a, b).unwrap(), g.eval(b, a).unwrap());
    }

    #[test]
    fn poisson_coincident_is_error() {
        let g = g1_poisson_disk(&spec(1.0, 1.0, 0.5));
        let p = PolarPoint::new(0.5, 1.0);
        assert_eq!(g.eval(p, p), Err(KernelError::Singularity));
    }

    #[test]
    fn poisson_outside_domain_is_error() {
        let g = g1_poisson_disk(&spec(1.0, 1.0, 0.5));
        assert!(matches!(
            g.eval(PolarPoint::new(1.5, 0.0), PolarPoint::new(0.2, 0.0)),
            Err(KernelError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn poisson_matches_log_singularity_scale() {
        // G ~ (1/2pi) ln d near the diagonal
        let g = g1_poisson_disk(&spec(1.0, 1.0, 0.0));
        let x = PolarPoint::new(0.5, 1.0);
        for d in [1e-3, 1e-5] {
            let s = PolarPoint::new(0.5 + d, 1.0);
            let got = g.eval(x, s).unwrap();
            let leading = d.ln() / TWO_PI;
            assert!(
                (got - leading).abs() < 0.2,
                "d = {d}: got {got}, leading {leading}"
            );
        }
    }

    #[test]
    fn poisson_harmonic_in_field_point() {
        // centered polar FD Laplacian away from the source
        let g = g1_poisson_disk(&spec(1.0, 1.0, 0.0));
        let s = PolarPoint::new(0.62, 2.2);
        let h = 1e-4;
        for (r, phi) in [(0.3, 0.5), (0.45, 4.0), (0.7, 1.0)] {
            let u = |rr: f64, pp: f64| g.eval(PolarPoint::new(rr, pp), s).unwrap();
            let urr = (u(r + h, phi) - 2.0 * u(r, phi) + u(r - h, phi)) / (h * h);
            let ur = (u(r + h, phi) - u(r - h, phi)) / (2.0 * h);
            let upp = (u(r, phi + h) - 2.0 * u(r, phi) + u(r, phi - h)) / (h * h);
            let lap = urr + ur / r + upp / (r * r);
            let scale = 1.0 + u(r, phi).abs();
            assert!(lap.abs() <= 1e-4 * scale, "FD Laplacian {lap:e}");
        }
    }

    #[test]
    fn series_norm_uses_prime_identity() {
        // |w1_{0,1}|^2 = pi J_1(mu_01)^2 for rho = 1; oracle 0.84670359181461522
        let mu01 = crate::specfun::bessel_zero(0, 1).unwrap();
        let jp = bessel_j_prime(0, mu01).unwrap();
        let norm = 0.5 * PI * 2.0 * jp * jp;
        assert!((norm - 0.84670359181461522).abs() < 1e-13);

        // and the built series term carries 1/(lambda * norm)
        let sp = spec(1.0, 1.0, 0.5);
        let g2 = g2_helmholtz_disk(&sp, &SeriesTruncation::new(0, 1).unwrap()).unwrap();
        let data = g2.series().unwrap();
        let lambda = mu01 * mu01 + 1.0; // a^2 mu^2/rho^2 + 2ab with a=1, b=1/2
        assert!((data.terms[0].coeff - 1.0 / (lambda * norm)).abs() < 1e-15);
    }

    #[test]
    fn series_vanishes_on_boundary() {
        let sp = spec(1.0, 1.0, 0.5);
        let g2 = g2_helmholtz_disk(&sp, &SeriesTruncation::new(6, 6).unwrap()).unwrap();
        let v = g2
            .eval(PolarPoint::new(1.0, 0.9), PolarPoint::new(0.5, 2.0))
            .unwrap();
        assert!(v.abs() <= 1e-11, "boundary series value {v:e}");
    }

    #[test]
    fn series_truncation_is_cauchy() {
        // doubling m_max changes sampled values by a decreasing amount; the
        // envelope is taken over a sample of separated point pairs since a
        // single pair oscillates with the eigenfunction phases
        let sp = spec(1.0, 1.0, 0.5);
        let pairs: Vec<(PolarPoint, PolarPoint)> = vec![
            (PolarPoint::new(0.35, 0.8), PolarPoint::new(0.72, 3.9)),
            (PolarPoint::new(0.15, 2.1), PolarPoint::new(0.64, 0.3)),
            (PolarPoint::new(0.52, 4.4), PolarPoint::new(0.31, 1.7)),
            (PolarPoint::new(0.81, 5.6), PolarPoint::new(0.22, 2.8)),
            (PolarPoint::new(0.47, 0.1), PolarPoint::new(0.58, 4.9)),
        ];
        let levels: Vec<Vec<f64>> = [4u32, 8, 16, 32, 64]
            .iter()
            .map(|&m| {
                let g = g2_helmholtz_disk(&sp, &SeriesTruncation::new(8, m).unwrap()).unwrap();
                pairs.iter().map(|&(x, s)| g.eval(x, s).unwrap()).collect()
            })
            .collect();
        let envelope: Vec<f64> = levels
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .collect();
        for k in 1..envelope.len() {
            assert!(
                envelope[k] <= envelope[k - 1],
                "envelope not decreasing: {envelope:?}"
            );
        }
    }

    #[test]
    fn r_termwise_multipliers() {
        let sp = spec(1.0, 2.0, 0.0);
        let trunc = SeriesTruncation::new(3, 3).unwrap();
        let applied = apply_r_heat_termwise(&sp, &trunc).unwrap();
        let data = applied.series().unwrap();
        for t in &data.terms {
            // with b = 0 both multipliers reduce to a mu^2 / rho^2
            assert_eq!(t.cos_mult, t.sin_mult);
            assert!((t.cos_mult - 2.0 * t.mu * t.mu).abs() < 1e-10);
        }

        let sp = spec(1.0, 1.0, 0.5);
        let applied = apply_r_heat_termwise(&sp, &trunc).unwrap();
        for t in applied.series().unwrap().terms.iter() {
            assert!((t.cos_mult - (t.mu * t.mu + 1.0)).abs() < 1e-10);
            assert!((t.sin_mult - t.mu * t.mu).abs() < 1e-10);
        }
    }

    #[test]
    fn r_termwise_matches_finite_difference_operator() {
        // R = -a [d_rr + (1/r) d_r + (1/r^2) d_pp] + b A* + b Id applied to
        // G2 in its field variable, against the termwise multipliers
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(5, 5).unwrap();
        let g2 = g2_helmholtz_disk(&sp, &trunc).unwrap();
        let rg2 = apply_r_heat_termwise(&sp, &trunc).unwrap();
        let s = PolarPoint::new(0.55, 2.4);
        let h = 3e-4;
        let mut worst = 0.0f64;
        for (r, phi) in [
            (0.30, 0.7),
            (0.42, 1.9),
            (0.66, 3.3),
            (0.51, 5.1),
            (0.75, 0.2),
        ] {
            let u = |rr: f64, pp: f64| g2.eval(PolarPoint::new(rr, pp), s).unwrap();
            let urr = (u(r + h, phi) - 2.0 * u(r, phi) + u(r - h, phi)) / (h * h);
            let ur = (u(r + h, phi) - u(r - h, phi)) / (2.0 * h);
            let upp = (u(r, phi + h) - 2.0 * u(r, phi) + u(r, phi - h)) / (h * h);
            let lap = urr + ur / r + upp / (r * r);
            let pullback = u(r, -phi);
            let fd = -sp.alpha * lap + sp.beta * pullback + sp.beta * u(r, phi);
            let termwise = rg2.eval(PolarPoint::new(r, phi), s).unwrap();
            worst = worst.max((fd - termwise).abs());
        }
        assert!(worst <= 1e-4, "termwise vs FD: {worst:e}");
    }

    #[test]
    fn biharm_fundamental_values() {
        let g = biharm_g1();
        // unit separation: ln 1 = 0
        let v = g
            .eval(PolarPoint::new(1.0, 0.0), PolarPoint::new(0.0, 0.0))
            .unwrap();
        assert!(v.abs() < 1e-15);
        let p = PolarPoint::new(0.3, 1.0);
        assert_eq!(g.eval(p, p), Err(KernelError::Singularity));
    }

    #[test]
    fn biharm_fundamental_laplacian() {
        // Lap[(1/8pi) d^2 ln d] = (ln d + 1)/2pi, cartesian centered FD
        let g = biharm_g1();
        let s = PolarPoint::new(0.0, 0.0);
        for dist in [0.4, 0.9, 1.7] {
            let h = 1e-3 * dist;
            let f = |x: f64, y: f64| {
                g.eval(PolarPoint::from_cartesian(x, y), s).unwrap()
            };
            let (x0, y0) = (dist / 2.0f64.sqrt(), dist / 2.0f64.sqrt());
            let lap = (f(x0 + h, y0) + f(x0 - h, y0) + f(x0, y0 + h) + f(x0, y0 - h)
                - 4.0 * f(x0, y0))
                / (h * h);
            let want = (dist.ln() + 1.0) / TWO_PI;
            assert!(
                (lap - want).abs() <= 1e-6,
                "dist {dist}: {:e}",
                (lap - want).abs()
            );
        }
    }

    #[test]
    fn biharm_family_off_diagonal_biharmonic() {
        // 13-point bi-Laplacian stencil vanishes off the diagonal for any mu, nu
        for (mu, nu) in [(0.0, 0.0), (ln_m1(2.0), 4.0), (3.7, -1.2)] {
            let g = biharm_family(mu, nu);
            let s = PolarPoint::new(0.0, 0.0);
            let f = |x: f64, y: f64| g.eval(PolarPoint::from_cartesian(x, y), s).unwrap();
            let (x0, y0) = (0.8, 0.35);
            let h = 2e-3;
            let lap2 = (20.0 * f(x0, y0)
                - 8.0 * (f(x0 + h, y0) + f(x0 - h, y0) + f(x0, y0 + h) + f(x0, y0 - h))
                + 2.0
                    * (f(x0 + h, y0 + h)
                        + f(x0 + h, y0 - h)
                        + f(x0 - h, y0 + h)
                        + f(x0 - h, y0 - h))
                + (f(x0 + 2.0 * h, y0)
                    + f(x0 - 2.0 * h, y0)
                    + f(x0, y0 + 2.0 * h)
                    + f(x0, y0 - 2.0 * h)))
                / (h * h * h * h);
            assert!(lap2.abs() <= 1e-4, "bi-Laplacian residual {lap2:e}");
        }
    }

    fn ln_m1(rho: f64) -> f64 {
        rho.ln() - 1.0
    }

    #[test]
    fn biharm_family_degenerations() {
        let fam = biharm_family(0.0, 0.0);
        let fund = biharm_g1();
        let x = PolarPoint::new(0.9, 0.4);
        let s = PolarPoint::new(0.2, 2.0);
        assert_eq!(fam.eval(x, s).unwrap(), fund.eval(x, s).unwrap());

        // Navier member at separation rho: (rho^2/4pi) ln rho
        let rho = 2.0;
        let nav = biharm_navier_disk(rho);
        let v = nav
            .eval(PolarPoint::new(rho, 0.0), PolarPoint::new(0.0, 0.0))
            .unwrap();
        let want = rho * rho * rho.ln() / (4.0 * PI);
        assert!((v - want).abs() < 1e-14);
    }

    #[test]
    fn biharm_r_application() {
        let sp = spec(1.0, 3.0, 2.0);
        let rg = biharm_apply_r(&sp, &biharm_g1()).unwrap();

        // on the reflection axis the printed closed form holds to 1e-12
        let x = PolarPoint::new(0.7, 0.0);
        let s = PolarPoint::new(0.25, 0.0);
        let got = rg.eval(x, s).unwrap();
        let want = printed_biharm_g2(sp.alpha, sp.beta, 0.45);
        assert!((got - want).abs() <= 1e-12);

        // off the axis the faithful value differs from the printed form
        let x = PolarPoint::new(0.7, 1.1);
        let s = PolarPoint::new(0.4, 2.6);
        let d = squared_distance(x, s).sqrt();
        let faithful = rg.eval(x, s).unwrap();
        assert!((faithful - printed_biharm_g2(sp.alpha, sp.beta, d)).abs() > 1e-6);

        // alpha = beta: the residual reflection difference in closed form
        let sp_eq = spec(1.0, 2.0, 2.0);
        let rg_eq = biharm_apply_r(&sp_eq, &biharm_g1()).unwrap();
        let d_direct = squared_distance(x, s).sqrt();
        let d_reflect = squared_distance(x.reflected(), s).sqrt();
        let want = sp_eq.beta * (d_reflect.ln() - d_direct.ln()) / TWO_PI;
        assert!((rg_eq.eval(x, s).unwrap() - want).abs() <= 1e-13);

        // beta = 0: only the -a*Lap term remains
        let sp0 = spec(1.0, 2.0, 0.0);
        let rg0 = biharm_apply_r(&sp0, &biharm_g1()).unwrap();
        let want = -sp0.alpha * (d_direct.ln() + 1.0) / TWO_PI;
        assert!((rg0.eval(x, s).unwrap() - want).abs() <= 1e-13);
    }

    #[test]
    fn biharm_apply_r_rejects_series_base() {
        let sp = spec(1.0, 1.0, 0.5);
        let g2 = g2_helmholtz_disk(&sp, &SeriesTruncation::new(1, 1).unwrap()).unwrap();
        assert!(matches!(
            biharm_apply_r(&sp, &g2),
            Err(KernelError::UnsupportedBase(_))
        ));
    }

    #[test]
    fn composed_kernel_vanishes_at_boundary_field_point() {
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(4, 4).unwrap();
        let g2 = g2_helmholtz_disk(&sp, &trunc).unwrap();
        let g1 = g1_poisson_disk(&sp);
        let g3 = g3_compose(&g2, &g1, &sp, &QuadSpec::new(24, 64));
        let v = g3
            .eval(PolarPoint::new(1.0, 0.3), PolarPoint::new(0.5, 1.0))
            .unwrap();
        assert!(v.abs() <= 1e-9, "boundary composed value {v:e}");
    }

    #[test]
    fn evaluation_is_deterministic_and_matches_sequential() {
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(4, 4).unwrap();
        let g2 = g2_helmholtz_disk(&sp, &trunc).unwrap();
        let pairs: Vec<(PolarPoint, PolarPoint)> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                (
                    PolarPoint::new(0.1 + 0.8 * t, TWO_PI * t),
                    PolarPoint::new(0.9 - 0.7 * t, 1.0 + t),
                )
            })
            .collect();
        let par = g2.eval_over_points(&pairs).unwrap();
        let seq = g2.eval_over_points_seq(&pairs).unwrap();
        assert_eq!(par, seq);
        let again = g2.eval_over_points(&pairs).unwrap();
        assert_eq!(par, again);
    }
}
