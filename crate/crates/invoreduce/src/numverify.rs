//! Numeric verification: quadrature application of the integral operator
//! `H_G(h)(x) = int_B G(x, s) h(s) ds`, finite-difference application of the
//! bent-plate operator on reflection-invariant polar grids, residual reports,
//! and boundary checks for the reduced-kernel construction.
//!
//! Dispatch inside [`hg_apply`]:
//!
//! * eigenfunction-series kernels integrate by separating the finite series
//!   (inner products of the modes against `h`, then synthesis at the
//!   evaluation points) — an exact reordering of the double quadrature;
//! * composed kernels first apply the inner kernel at the composition nodes
//!   (with a staggered rule when the inner kernel is singular, so nodes never
//!   coincide), then run the outer kernel over the composition rule;
//! * singular closed-form kernels use a quadrature in polar coordinates
//!   centered at the evaluation point (angle rays and Gauss-Legendre along
//!   each chord), which removes the logarithmic diagonal singularity from the
//!   integrand entirely.
//!
//! Reductions (norms, quadrature sums) always run sequentially over the
//! canonical node order, so parallel and sequential paths are bit-identical.

use crate::greens::{KernelError, KernelFn, PolarPoint};
use crate::parallel::{map_indexed, map_indexed_seq};
use crate::quad::{gauss_legendre, DiskRule, QuadSpec};
use crate::specfun::bessel_j;
use serde::Serialize;
use thiserror::Error;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("grid needs an even angular node count, got {0}")]
    OddAngularCount(usize),
    #[error("grid needs at least {need} radial rings, got {got}")]
    TooFewRings { need: usize, got: usize },
    #[error("grid value vector has length {got}, expected {expected}")]
    ValueLength { expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Radial node placement of a [`PolarGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RadialLayout {
    /// `r_i = (i + 1/2) rho / nr` with midpoint weights; uniform spacing
    /// suits the finite-difference stencils.
    UniformOffset,
    /// Gauss-Legendre nodes on `(0, rho)`.
    GaussLegendre,
}

/// Polar evaluation grid. The angular count is even, so the reflection
/// `phi -> -phi` permutes the node set exactly; radial nodes stay strictly
/// inside `(0, rho)`, avoiding the coordinate singularity at the origin.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    rho: f64,
    nr: usize,
    nphi: usize,
    layout: RadialLayout,
    r: Vec<f64>,
    /// Radial quadrature weights including the polar Jacobian `r`.
    wr: Vec<f64>,
}

impl PolarGrid {
    pub fn uniform_offset(rho: f64, nr: usize, nphi: usize) -> Result<Self, VerifyError> {
        Self::build(rho, nr, nphi, RadialLayout::UniformOffset)
    }

    pub fn gauss_legendre(rho: f64, nr: usize, nphi: usize) -> Result<Self, VerifyError> {
        Self::build(rho, nr, nphi, RadialLayout::GaussLegendre)
    }

    fn build(
        rho: f64,
        nr: usize,
        nphi: usize,
        layout: RadialLayout,
    ) -> Result<Self, VerifyError> {
        if nphi % 2 != 0 || nphi == 0 {
            return Err(VerifyError::OddAngularCount(nphi));
        }
        if nr < 1 {
            return Err(VerifyError::TooFewRings { need: 1, got: nr });
        }
        let (r, wr) = match layout {
            RadialLayout::UniformOffset => {
                let h = rho / nr as f64;
                let r: Vec<f64> = (0..nr).map(|i| (i as f64 + 0.5) * h).collect();
                let wr = r.iter().map(|&ri| h * ri).collect();
                (r, wr)
            }
            RadialLayout::GaussLegendre => {
                let (nodes, weights) = gauss_legendre(nr);
                let half = rho / 2.0;
                let r: Vec<f64> = nodes.iter().map(|&t| half * (t + 1.0)).collect();
                let wr = weights
                    .iter()
                    .zip(&r)
                    .map(|(&w, &ri)| w * half * ri)
                    .collect();
                (r, wr)
            }
        };
        Ok(PolarGrid {
            rho,
            nr,
            nphi,
            layout,
            r,
            wr,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn layout(&self) -> RadialLayout {
        self.layout
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.r[i]
    }

    pub fn angle(&self, k: usize) -> f64 {
        TWO_PI * k as f64 / self.nphi as f64
    }

    /// Node weight for grid quadrature (polar Jacobian included).
    pub fn weight(&self, i: usize) -> f64 {
        self.wr[i] * TWO_PI / self.nphi as f64
    }

    /// Index of the reflected angular node: `phi_k -> -phi_k` is node
    /// `(nphi - k) mod nphi`.
    pub fn reflect_angle_index(&self, k: usize) -> usize {
        (self.nphi - k) % self.nphi
    }

    pub fn node_count(&self) -> usize {
        self.nr * self.nphi
    }

    /// Row-major points: radius outer, angle inner.
    pub fn points(&self) -> Vec<PolarPoint> {
        let mut out = Vec::with_capacity(self.node_count());
        for i in 0..self.nr {
            for k in 0..self.nphi {
                out.push(PolarPoint::new(self.r[i], self.angle(k)));
            }
        }
        out
    }

    /// Boundary trace sample points `(rho, phi_k)`.
    pub fn boundary_points(&self) -> Vec<PolarPoint> {
        (0..self.nphi)
            .map(|k| PolarPoint::new(self.rho, self.angle(k)))
            .collect()
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "rho": self.rho,
            "nr": self.nr,
            "nphi": self.nphi,
            "layout": self.layout,
        })
    }
}

/// Dirichlet boundary data sampled at the `nphi` boundary nodes.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCondition {
    pub samples: Vec<f64>,
}

impl BoundaryCondition {
    pub fn dirichlet_trace(samples: Vec<f64>) -> Self {
        BoundaryCondition { samples }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

// --- H_G application -------------------------------------------------------

/// Applies `H_G` to `h`, evaluated at the grid nodes (row-major in radius
/// then angle). `quad` controls the source-side integration rule.
pub fn hg_apply<F>(
    kernel: &KernelFn,
    h: &F,
    grid: &PolarGrid,
    quad: &QuadSpec,
) -> Result<Vec<f64>, VerifyError>
where
    F: Fn(PolarPoint) -> f64 + Sync,
{
    hg_apply_at_points(kernel, h, &grid.points(), grid.rho(), quad, true)
}

/// Sequential baseline of [`hg_apply`] (bit-identical results).
pub fn hg_apply_seq<F>(
    kernel: &KernelFn,
    h: &F,
    grid: &PolarGrid,
    quad: &QuadSpec,
) -> Result<Vec<f64>, VerifyError>
where
    F: Fn(PolarPoint) -> f64 + Sync,
{
    hg_apply_at_points(kernel, h, &grid.points(), grid.rho(), quad, false)
}

fn maybe_par<T, G>(parallel: bool, count: usize, f: G) -> Vec<T>
where
    T: Send,
    G: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        map_indexed(count, f)
    } else {
        map_indexed_seq(count, f)
    }
}

/// Core dispatch; public so sampled-point checks can reuse it.
pub fn hg_apply_at_points<F>(
    kernel: &KernelFn,
    h: &F,
    points: &[PolarPoint],
    rho: f64,
    quad: &QuadSpec,
    parallel: bool,
) -> Result<Vec<f64>, VerifyError>
where
    F: Fn(PolarPoint) -> f64 + Sync,
{
    if let Some(series) = kernel.series() {
        let _ = series;
        let rule = DiskRule::build(rho, &QuadSpec::new(quad.nr, quad.nphi));
        let values = sample_function(h, &rule, parallel);
        return series_apply(kernel, &rule, &values, points, parallel);
    }
    if let Some((outer, inner, comp_quad, comp_rho)) = kernel.composed() {
        let comp_rule = DiskRule::build(comp_rho, &comp_quad);
        let comp_points: Vec<PolarPoint> = (0..comp_rule.node_count())
            .map(|q| {
                let (r, phi, _) = comp_rule.node(q);
                PolarPoint::new(r, phi)
            })
            .collect();
        // evaluating the inner application at the composition nodes requires
        // a rule whose nodes cannot coincide with them when the inner kernel
        // is singular on the diagonal
        let inner_quad = if inner.singular_closed_form() {
            quad.staggered()
        } else {
            *quad
        };
        let w = hg_apply_at_points(inner, h, &comp_points, comp_rho, &inner_quad, parallel)?;
        if outer.series().is_some() {
            return series_apply(outer, &comp_rule, &w, points, parallel);
        }
        // generic outer: weighted sum over the composition rule
        let results = maybe_par(parallel, points.len(), |j| -> Result<f64, VerifyError> {
            let mut acc = 0.0;
            for (q, node) in comp_points.iter().enumerate() {
                let (_, _, weight) = comp_rule.node(q);
                acc += weight * outer.eval(points[j], *node)? * w[q];
            }
            Ok(acc)
        });
        return results.into_iter().collect();
    }
    if kernel.singular_closed_form() {
        let results = maybe_par(parallel, points.len(), |j| {
            singularity_centered_apply(kernel, h, points[j], rho, quad)
        });
        return results.into_iter().collect();
    }
    // smooth direct kernel (zero kernel, custom smooth evaluators)
    let rule = DiskRule::build(rho, &QuadSpec::new(quad.nr, quad.nphi));
    let values = sample_function(h, &rule, parallel);
    let results = maybe_par(parallel, points.len(), |j| -> Result<f64, VerifyError> {
        let mut acc = 0.0;
        for q in 0..rule.node_count() {
            let (r, phi, w) = rule.node(q);
            acc += w * kernel.eval(points[j], PolarPoint::new(r, phi))? * values[q];
        }
        Ok(acc)
    });
    results.into_iter().collect()
}

fn sample_function<F>(h: &F, rule: &DiskRule, parallel: bool) -> Vec<f64>
where
    F: Fn(PolarPoint) -> f64 + Sync,
{
    maybe_par(parallel, rule.node_count(), |q| {
        let (r, phi, _) = rule.node(q);
        h(PolarPoint::new(r, phi))
    })
}

/// Series-kernel application by mode separation: for each mode `T` compute
/// `int T(s) v(s) [ds]` over the rule (angular transform first, then the
/// radial dot product), then synthesize `sum coeff * mult * T(x) * <T, v>`
/// at the evaluation points.
fn series_apply(
    series_kernel: &KernelFn,
    rule: &DiskRule,
    node_values: &[f64],
    points: &[PolarPoint],
    parallel: bool,
) -> Result<Vec<f64>, VerifyError> {
    let data = series_kernel.series().expect("series kernel");
    let nr = rule.r.len();
    let nphi = rule.phi.len();
    debug_assert_eq!(node_values.len(), nr * nphi);
    let n_max = data.truncation.n_max;

    // angular transforms: a_c[n][i] = sum_k cos(n phi_k) v[i,k], same for sin
    let mut a_cos = vec![vec![0.0f64; nr]; n_max as usize + 1];
    let mut a_sin = vec![vec![0.0f64; nr]; n_max as usize + 1];
    for n in 0..=n_max as usize {
        for i in 0..nr {
            let mut c = 0.0;
            let mut s = 0.0;
            for k in 0..nphi {
                let angle = n as f64 * rule.phi[k];
                let v = node_values[i * nphi + k];
                c += angle.cos() * v;
                s += angle.sin() * v;
            }
            a_cos[n][i] = c * rule.wphi;
            a_sin[n][i] = s * rule.wphi;
        }
    }

    // radial inner products per mode
    let projections: Vec<Result<(f64, f64), KernelError>> =
        maybe_par(parallel, data.terms.len(), |t| {
            let term = &data.terms[t];
            let mut pc = 0.0;
            let mut ps = 0.0;
            for i in 0..nr {
                let j = bessel_j(term.n, term.mu * rule.r[i] / data.rho)?;
                pc += rule.wr[i] * j * a_cos[term.n as usize][i];
                ps += rule.wr[i] * j * a_sin[term.n as usize][i];
            }
            Ok((pc, ps))
        });
    let projections: Vec<(f64, f64)> = projections
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(VerifyError::from)?;

    // synthesis at the evaluation points, fixed term order
    let results = maybe_par(parallel, points.len(), |j| -> Result<f64, VerifyError> {
        let p = points[j];
        let mut acc = 0.0;
        for (t, term) in data.terms.iter().enumerate() {
            let jr = bessel_j(term.n, term.mu * p.r / data.rho).map_err(KernelError::from)?;
            let nf = term.n as f64;
            let (pc, ps) = projections[t];
            acc += term.coeff
                * jr
                * (term.cos_mult * (nf * p.phi).cos() * pc
                    + term.sin_mult * (nf * p.phi).sin() * ps);
        }
        Ok(acc)
    });
    results.into_iter().collect()
}

/// Integral of a singular closed-form kernel against `h`, in polar
/// coordinates centered at the evaluation point `x`: rays `theta_t`
/// (trapezoid) and Gauss-Legendre nodes along each chord `[0, s_max(theta)]`.
/// The integrand `G(x, x + s e_theta) h s` is bounded, so no node ever lands
/// on the singularity.
fn singularity_centered_apply<F>(
    kernel: &KernelFn,
    h: &F,
    x: PolarPoint,
    rho: f64,
    quad: &QuadSpec,
) -> Result<f64, VerifyError>
where
    F: Fn(PolarPoint) -> f64 + Sync,
{
    let (gl_nodes, gl_weights) = gauss_legendre(quad.nr);
    let n_rays = quad.nphi;
    let (xc, yc) = x.to_cartesian();
    let r2 = x.r * x.r;
    let mut acc = 0.0;
    for t in 0..n_rays {
        let theta = TWO_PI * t as f64 / n_rays as f64;
        // chord length from x to the boundary along direction theta
        let along = x.r * (theta - x.phi).cos();
        let disc = (along * along + rho * rho - r2).max(0.0);
        let s_max = -along + disc.sqrt();
        // near-tangent rays at boundary points leave chords at rounding
        // scale; their contribution is O(s_max^2 ln s_max)
        if s_max <= 1e-9 * rho {
            continue;
        }
        let half = s_max / 2.0;
        let (ct, st) = (theta.cos(), theta.sin());
        let mut ray = 0.0;
        for (node, weight) in gl_nodes.iter().zip(&gl_weights) {
            let s = half * (node + 1.0);
            let px = xc + s * ct;
            let py = yc + s * st;
            let mut p = PolarPoint::from_cartesian(px, py);
            if p.r > rho {
                p.r = rho; // chord endpoint rounding
            }
            ray += weight * half * s * kernel.eval(x, p)? * h(p);
        }
        acc += ray * TWO_PI / n_rays as f64;
    }
    Ok(acc)
}

// --- finite-difference operator --------------------------------------------

/// Applies `L u = a Lap u + b (A* - Id) u` on the grid by second-order
/// centered differences (periodic in the angle), with the pullback read off
/// the reflected angular node exactly. The innermost ring mirrors through the
/// origin on uniform-offset grids (`u(-r, phi) = u(r, phi + pi)`); elsewhere
/// the boundary rings fall back to one-sided three-point stencils, which the
/// residual checks exclude anyway.
pub fn fd_apply_heat_operator(
    u: &[f64],
    alpha: f64,
    beta: f64,
    grid: &PolarGrid,
) -> Result<Vec<f64>, VerifyError> {
    let (nr, nphi) = (grid.nr(), grid.nphi());
    if nr < 3 {
        return Err(VerifyError::TooFewRings { need: 3, got: nr });
    }
    if u.len() != nr * nphi {
        return Err(VerifyError::ValueLength {
            expected: nr * nphi,
            got: u.len(),
        });
    }
    let dphi = TWO_PI / nphi as f64;
    let idx = |i: usize, k: usize| i * nphi + k;
    let mut out = vec![0.0f64; nr * nphi];
    for i in 0..nr {
        let r = grid.radius(i);
        for k in 0..nphi {
            let center = u[idx(i, k)];
            // radial part: three points (value, radius), derivative at r
            let (p0, p1, p2) = radial_stencil(u, grid, i, k);
            let (urr, ur) = quadratic_derivatives(p0, p1, p2, r);
            let k_prev = (k + nphi - 1) % nphi;
            let k_next = (k + 1) % nphi;
            let upp = (u[idx(i, k_next)] - 2.0 * center + u[idx(i, k_prev)]) / (dphi * dphi);
            let lap = urr + ur / r + upp / (r * r);
            let pullback = u[idx(i, grid.reflect_angle_index(k))];
            out[idx(i, k)] = alpha * lap + beta * (pullback - center);
        }
    }
    Ok(out)
}

type PointValue = (f64, f64); // (radius, value)

fn radial_stencil(u: &[f64], grid: &PolarGrid, i: usize, k: usize) -> (PointValue, PointValue, PointValue) {
    let nphi = grid.nphi();
    let nr = grid.nr();
    let idx = |i: usize, k: usize| i * nphi + k;
    let at = |i: usize| (grid.radius(i), u[idx(i, k)]);
    if i == 0 {
        if grid.layout() == RadialLayout::UniformOffset {
            // mirror through the origin: r_{-1} = -r_0 with value at phi + pi
            let opposite = (k + nphi / 2) % nphi;
            let ghost = (-grid.radius(0), u[idx(0, opposite)]);
            (ghost, at(0), at(1))
        } else {
            (at(0), at(1), at(2))
        }
    } else if i == nr - 1 {
        (at(nr - 3), at(nr - 2), at(nr - 1))
    } else {
        (at(i - 1), at(i), at(i + 1))
    }
}

/// First and second derivative at `t` of the quadratic through three points.
fn quadratic_derivatives(p0: PointValue, p1: PointValue, p2: PointValue, t: f64) -> (f64, f64) {
    let (x0, u0) = p0;
    let (x1, u1) = p1;
    let (x2, u2) = p2;
    let d0 = (x0 - x1) * (x0 - x2);
    let d1 = (x1 - x0) * (x1 - x2);
    let d2 = (x2 - x0) * (x2 - x1);
    let second = 2.0 * (u0 / d0 + u1 / d1 + u2 / d2);
    let first = u0 * (2.0 * t - x1 - x2) / d0
        + u1 * (2.0 * t - x0 - x2) / d1
        + u2 * (2.0 * t - x0 - x1) / d2;
    (second, first)
}

// --- residual report --------------------------------------------------------

/// Relative residual norms of `L(H_G h) - h` plus the boundary trace.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub l2_relative: f64,
    pub linf_relative: f64,
    pub boundary_max: f64,
    pub metadata: serde_json::Value,
}

impl ResidualReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "l2_relative": self.l2_relative,
            "linf_relative": self.linf_relative,
            "boundary_max": self.boundary_max,
            "metadata": self.metadata,
        })
    }
}

/// Computes `u = H_G h`, applies the operator by finite differences, and
/// reports relative residual norms over the interior rings (one ring dropped
/// at each radial extreme, where the stencils are one-sided) together with
/// the Dirichlet boundary trace maximum.
pub fn residual_check<F>(
    kernel: &KernelFn,
    h: &F,
    alpha: f64,
    beta: f64,
    grid: &PolarGrid,
    quad: &QuadSpec,
) -> Result<ResidualReport, VerifyError>
where
    F: Fn(PolarPoint) -> f64 + Sync,
{
    let u = hg_apply(kernel, h, grid, quad)?;
    let lu = fd_apply_heat_operator(&u, alpha, beta, grid)?;
    let (nr, nphi) = (grid.nr(), grid.nphi());

    let mut res_l2 = 0.0f64;
    let mut h_l2 = 0.0f64;
    let mut res_max = 0.0f64;
    let mut h_max = 0.0f64;
    for i in 1..nr.saturating_sub(1) {
        for k in 0..nphi {
            let p = PolarPoint::new(grid.radius(i), grid.angle(k));
            let hv = h(p);
            let res = lu[i * nphi + k] - hv;
            let w = grid.weight(i);
            res_l2 += w * res * res;
            h_l2 += w * hv * hv;
            res_max = res_max.max(res.abs());
            h_max = h_max.max(hv.abs());
        }
    }
    let l2_relative = if h_l2 > 0.0 {
        (res_l2 / h_l2).sqrt()
    } else {
        res_l2.sqrt()
    };
    let linf_relative = if h_max > 0.0 { res_max / h_max } else { res_max };

    let boundary_values = hg_apply_at_points(
        kernel,
        h,
        &grid.boundary_points(),
        grid.rho(),
        quad,
        true,
    )?;
    let boundary = BoundaryCondition::dirichlet_trace(boundary_values);

    Ok(ResidualReport {
        l2_relative,
        linf_relative,
        boundary_max: boundary.max_abs(),
        metadata: serde_json::json!({
            "grid": grid.describe(),
            "kernel": kernel.describe(),
            "quad": quad,
            "interior_rings": [1, nr.saturating_sub(1)],
            "alpha": alpha,
            "beta": beta,
        }),
    })
}

/// Boundary checks for the reduced-kernel pair: the kernel itself and the
/// reducer-applied kernel must both vanish at boundary field points
/// (Dirichlet trace and transformed trace). The remaining conditions of the
/// construction are operator-exchange identities certified structurally, not
/// sampled; they are recorded in the notes.
#[derive(Debug, Clone, Serialize)]
pub struct ChecklistReport {
    pub dirichlet_trace_max: f64,
    pub transformed_trace_max: f64,
    pub notes: Vec<String>,
    pub metadata: serde_json::Value,
}

impl ChecklistReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable report")
    }
}

pub fn theorem_checklist(
    kernel: &KernelFn,
    r_kernel: &KernelFn,
    rho: f64,
    n_boundary: usize,
    sources: &[PolarPoint],
) -> Result<ChecklistReport, VerifyError> {
    let mut dirichlet = 0.0f64;
    let mut transformed = 0.0f64;
    for k in 0..n_boundary {
        let bp = PolarPoint::new(rho, TWO_PI * k as f64 / n_boundary as f64);
        for &src in sources {
            dirichlet = dirichlet.max(kernel.eval(bp, src)?.abs());
            transformed = transformed.max(r_kernel.eval(bp, src)?.abs());
        }
    }
    Ok(ChecklistReport {
        dirichlet_trace_max: dirichlet,
        transformed_trace_max: transformed,
        notes: vec![
            "annihilation of the composed operator holds termwise through the eigenfunction multipliers".into(),
            "operator-exchange identities between traces and the integral operator are structural (finite sums and quadratures commute with point evaluation)".into(),
        ],
        metadata: serde_json::json!({
            "kernel": kernel.describe(),
            "r_kernel": r_kernel.describe(),
            "rho": rho,
            "boundary_samples": n_boundary,
            "sources": sources.iter().map(|p| [p.r, p.phi]).collect::<Vec<_>>(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{
        apply_r_heat_termwise, biharm_navier_disk, g1_poisson_disk, g2_helmholtz_disk,
        g3_compose, g4_heat_disk, DiskSpec, SeriesTruncation,
    };
    use crate::specfun::bessel_zero;

    fn spec(rho: f64, alpha: f64, beta: f64) -> DiskSpec {
        DiskSpec::new(rho, alpha, beta).unwrap()
    }

    #[test]
    fn grid_shape_checks() {
        assert!(matches!(
            PolarGrid::uniform_offset(1.0, 8, 7),
            Err(VerifyError::OddAngularCount(7))
        ));
        let g = PolarGrid::uniform_offset(1.0, 8, 16).unwrap();
        assert_eq!(g.points().len(), 128);
        // reflection is an exact involution on angular indices
        for k in 0..16 {
            assert_eq!(g.reflect_angle_index(g.reflect_angle_index(k)), k);
        }
        // grid quadrature integrates 1 to the disk area
        let total: f64 = (0..8).map(|i| g.weight(i) * 16.0).sum();
        assert!((total - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn hg_zero_kernel_is_zero() {
        let grid = PolarGrid::uniform_offset(1.0, 6, 8).unwrap();
        let out = hg_apply(&KernelFn::zero(), &|_p| 1.0, &grid, &QuadSpec::new(8, 16)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hg_poisson_constant_source_matches_analytic() {
        // Lap u = 1, u = 0 on the boundary: u = (r^2 - 1)/4
        let sp = spec(1.0, 1.0, 0.0);
        let g1 = g1_poisson_disk(&sp);
        let pts = vec![
            PolarPoint::new(1e-9, 0.0),
            PolarPoint::new(0.3, 1.2),
            PolarPoint::new(0.6, 4.0),
        ];
        let quad = QuadSpec::new(48, 128);
        let got = hg_apply_at_points(&g1, &|_p| 1.0, &pts, 1.0, &quad, true).unwrap();
        for (p, v) in pts.iter().zip(&got) {
            let want = (p.r * p.r - 1.0) / 4.0;
            assert!(
                (v - want).abs() <= 1e-3,
                "r = {}: got {v}, want {want}",
                p.r
            );
        }
    }

    #[test]
    fn hg_series_eigenload_returns_eigenfunction() {
        // f = lambda_{1,1} w11 -> H_{G2} f = w11 by orthogonality
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(8, 8).unwrap();
        let g2 = g2_helmholtz_disk(&sp, &trunc).unwrap();
        let mu11 = bessel_zero(1, 1).unwrap();
        let lambda = sp.alpha * sp.alpha * mu11 * mu11 + 2.0 * sp.alpha * sp.beta;
        let w11 = move |p: PolarPoint| {
            crate::specfun::bessel_j(1, mu11 * p.r).unwrap() * p.phi.cos()
        };
        let f = move |p: PolarPoint| lambda * w11(p);
        let grid = PolarGrid::uniform_offset(1.0, 24, 48).unwrap();
        let got = hg_apply(&g2, &f, &grid, &QuadSpec::new(48, 128)).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (idx, p) in grid.points().iter().enumerate() {
            let w = grid.weight(idx / grid.nphi());
            let d = got[idx] - w11(*p);
            num += w * d * d;
            den += w * w11(*p) * w11(*p);
        }
        let rel = (num / den).sqrt();
        assert!(rel <= 1e-6, "relative L2 error {rel:e}");
    }

    #[test]
    fn fd_constant_maps_to_zero() {
        let grid = PolarGrid::uniform_offset(1.0, 12, 16).unwrap();
        let u = vec![3.25; grid.node_count()];
        let out = fd_apply_heat_operator(&u, 1.7, 0.9, &grid).unwrap();
        for v in out {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn fd_odd_mode_picks_up_reflection_term() {
        // u = r^2 sin(phi): Lap u = 3 sin(phi), (A* - Id) u = -2 u
        let grid = PolarGrid::uniform_offset(1.0, 48, 128).unwrap();
        let (alpha, beta) = (1.3, 0.7);
        let u: Vec<f64> = grid
            .points()
            .iter()
            .map(|p| p.r * p.r * p.phi.sin())
            .collect();
        let out = fd_apply_heat_operator(&u, alpha, beta, &grid).unwrap();
        for i in 1..grid.nr() - 1 {
            for k in 0..grid.nphi() {
                let p = PolarPoint::new(grid.radius(i), grid.angle(k));
                let want = alpha * 3.0 * p.phi.sin() - 2.0 * beta * p.r * p.r * p.phi.sin();
                let got = out[i * grid.nphi() + k];
                assert!(
                    (got - want).abs() <= 1e-3,
                    "node ({i},{k}): got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn fd_eigenfunction_relation() {
        // u = w11: cosine mode, so L u = -alpha mu^2 u. The comparison stays
        // away from the polar origin, where the 1/r^2 angular term amplifies
        // the stencil truncation error.
        let grid = PolarGrid::uniform_offset(1.0, 64, 128).unwrap();
        let mu11 = bessel_zero(1, 1).unwrap();
        let u: Vec<f64> = grid
            .points()
            .iter()
            .map(|p| crate::specfun::bessel_j(1, mu11 * p.r).unwrap() * p.phi.cos())
            .collect();
        let (alpha, beta) = (2.0, 0.8);
        let out = fd_apply_heat_operator(&u, alpha, beta, &grid).unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 1..grid.nr() - 1 {
            if grid.radius(i) < 0.15 {
                continue;
            }
            for k in 0..grid.nphi() {
                let want = -alpha * mu11 * mu11 * u[i * grid.nphi() + k];
                let got = out[i * grid.nphi() + k];
                worst = worst.max((got - want).abs());
                scale = scale.max(want.abs());
            }
        }
        assert!(worst / scale <= 1e-3, "relative error {:e}", worst / scale);
    }

    #[test]
    fn fd_is_linear() {
        let grid = PolarGrid::uniform_offset(1.0, 10, 12).unwrap();
        let n = grid.node_count();
        let u: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 97) as f64 / 97.0).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 53 + 29) % 89) as f64 / 89.0).collect();
        let (a, b) = (1.375, -0.625);
        let combo: Vec<f64> = u.iter().zip(&v).map(|(&x, &y)| a * x + b * y).collect();
        let fu = fd_apply_heat_operator(&u, 1.1, 0.4, &grid).unwrap();
        let fv = fd_apply_heat_operator(&v, 1.1, 0.4, &grid).unwrap();
        let fc = fd_apply_heat_operator(&combo, 1.1, 0.4, &grid).unwrap();
        for i in 0..n {
            let want = a * fu[i] + b * fv[i];
            assert!((fc[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn residual_zero_source() {
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(3, 3).unwrap();
        let g4 = g4_heat_disk(&sp, &trunc, &QuadSpec::new(16, 32)).unwrap();
        let grid = PolarGrid::uniform_offset(1.0, 8, 8).unwrap();
        let report =
            residual_check(&g4, &|_p| 0.0, sp.alpha, sp.beta, &grid, &QuadSpec::new(16, 32))
                .unwrap();
        assert_eq!(report.l2_relative, 0.0);
        assert_eq!(report.boundary_max, 0.0);
    }

    #[test]
    fn residual_poisson_degeneration() {
        // beta = 0 reduces the model to the Poisson problem
        let sp = spec(1.0, 1.0, 0.0);
        let g1 = g1_poisson_disk(&sp);
        let grid = PolarGrid::uniform_offset(1.0, 32, 64).unwrap();
        let report = residual_check(
            &g1,
            &|_p| 1.0,
            sp.alpha,
            sp.beta,
            &grid,
            &QuadSpec::new(48, 128),
        )
        .unwrap();
        assert!(report.l2_relative <= 1e-2, "l2 {:e}", report.l2_relative);
        assert!(report.boundary_max <= 1e-10, "boundary {:e}", report.boundary_max);
    }

    #[test]
    fn residual_converges_under_refinement() {
        // the constant source solves exactly through the quadratic stencils,
        // so the ladder uses a source with angular structure
        let sp = spec(1.0, 1.0, 0.0);
        let g1 = g1_poisson_disk(&sp);
        let quad = QuadSpec::new(48, 128);
        let h = |p: PolarPoint| 1.0 + 1.5 * p.r * p.r * (2.0 * p.phi).cos();
        let mut last = f64::INFINITY;
        for (nr, nphi) in [(8, 16), (16, 32), (32, 64)] {
            let grid = PolarGrid::uniform_offset(1.0, nr, nphi).unwrap();
            let report = residual_check(&g1, &h, sp.alpha, sp.beta, &grid, &quad).unwrap();
            assert!(
                report.l2_relative < last,
                "no improvement at {nr}x{nphi}: {:e} vs {last:e}",
                report.l2_relative
            );
            last = report.l2_relative;
        }
    }

    #[test]
    fn navier_composition_solves_bilaplacian() {
        // H of (G1 o G1) against h = 1 solves Lap^2 u = 1 with Navier data:
        // u(r) = (1 - r^2)(3 - r^2)/64 on the unit disk
        let sp = spec(1.0, 1.0, 0.0);
        let g1 = g1_poisson_disk(&sp);
        let composed = g3_compose(&g1, &g1, &sp, &QuadSpec::new(48, 128));
        let pts = vec![
            PolarPoint::new(1e-9, 0.0),
            PolarPoint::new(0.35, 2.0),
            PolarPoint::new(0.62, 5.2),
        ];
        let got =
            hg_apply_at_points(&composed, &|_p| 1.0, &pts, 1.0, &QuadSpec::new(48, 128), true)
                .unwrap();
        for (p, v) in pts.iter().zip(&got) {
            let want = (1.0 - p.r * p.r) * (3.0 - p.r * p.r) / 64.0;
            assert!(
                (v - want).abs() <= 1e-3,
                "r = {}: got {v}, want {want}",
                p.r
            );
        }
    }

    #[test]
    fn mollified_composition_recovers_outer_kernel() {
        // composing with a normalized bump converges to the outer kernel as
        // the bump narrows
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(4, 4).unwrap();
        let g2 = g2_helmholtz_disk(&sp, &trunc).unwrap();
        let x = PolarPoint::new(0.42, 1.1);
        let targets = [
            PolarPoint::new(0.3, 0.9),
            PolarPoint::new(0.55, 3.0),
            PolarPoint::new(0.2, 5.0),
        ];
        let mut errs = Vec::new();
        for eps in [0.2, 0.1] {
            let bump = KernelFn::custom(
                move |s: PolarPoint, xi: PolarPoint| {
                    let (sx, sy) = s.to_cartesian();
                    let (tx, ty) = xi.to_cartesian();
                    let d2 = (sx - tx) * (sx - tx) + (sy - ty) * (sy - ty);
                    let e2 = eps * eps;
                    if d2 >= e2 {
                        0.0
                    } else {
                        2.0 / (std::f64::consts::PI * e2) * (1.0 - d2 / e2)
                    }
                },
                false,
            );
            let composed = g3_compose(&g2, &bump, &sp, &QuadSpec::new(96, 256));
            let mut worst = 0.0f64;
            for &xi in &targets {
                let direct = g2.eval(x, xi).unwrap();
                let moll = composed.eval(x, xi).unwrap();
                worst = worst.max((moll - direct).abs());
            }
            errs.push(worst);
        }
        // quadratic convergence in the bump width, with quadrature slack
        assert!(
            errs[1] <= 0.5 * errs[0] + 1e-4,
            "mollifier errors {errs:?}"
        );
    }

    #[test]
    fn checklist_boundary_traces() {
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(4, 4).unwrap();
        let quad = QuadSpec::new(24, 64);
        let g2 = g2_helmholtz_disk(&sp, &trunc).unwrap();
        let rg2 = apply_r_heat_termwise(&sp, &trunc).unwrap();
        let g1 = g1_poisson_disk(&sp);
        let g3 = g3_compose(&g2, &g1, &sp, &quad);
        let g4 = g3_compose(&rg2, &g1, &sp, &quad);
        let sources = [PolarPoint::new(0.33, 0.4), PolarPoint::new(0.61, 2.1)];
        let report = theorem_checklist(&g3, &g4, 1.0, 6, &sources).unwrap();
        assert!(report.dirichlet_trace_max <= 1e-8);
        assert!(report.transformed_trace_max <= 1e-8);
        assert_eq!(report.notes.len(), 2);
    }

    #[test]
    fn navier_boundary_trace() {
        let sp = spec(1.0, 1.0, 0.0);
        let g1 = g1_poisson_disk(&sp);
        let composed = g3_compose(&g1, &g1, &sp, &QuadSpec::new(24, 64));
        let nav = biharm_navier_disk(1.0);
        let report = theorem_checklist(
            &composed,
            &nav,
            1.0,
            4,
            &[PolarPoint::new(0.3, 0.5)],
        )
        .unwrap();
        // the composed kernel vanishes on the boundary exactly (log form);
        // the closed-form family member depends only on the separation, so
        // its trace is reported, not asserted
        assert!(report.dirichlet_trace_max <= 1e-12);
        assert!(report.transformed_trace_max.is_finite());
    }

    #[test]
    fn hg_parallel_equals_sequential() {
        let sp = spec(1.0, 1.0, 0.5);
        let trunc = SeriesTruncation::new(3, 3).unwrap();
        let g2 = g2_helmholtz_disk(&sp, &trunc).unwrap();
        let grid = PolarGrid::uniform_offset(1.0, 10, 12).unwrap();
        let quad = QuadSpec::new(16, 32);
        let h = |p: PolarPoint| 1.0 - p.r * p.r;
        let a = hg_apply(&g2, &h, &grid, &quad).unwrap();
        let b = hg_apply_seq(&g2, &h, &grid, &quad).unwrap();
        assert_eq!(a, b);
    }
}
