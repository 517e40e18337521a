//! Quadrature rules for disk integrals: Gauss-Legendre in the radial
//! direction, uniform trapezoid in the angle (spectrally accurate for
//! periodic integrands). The polar area element `r dr dphi` is carried in
//! the radial weights unless a rule is explicitly built without it.

use serde::{Deserialize, Serialize};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Nodes are symmetric and strictly inside the interval.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, then Newton
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tensor-product quadrature parameters for disk integrals. `jacobian`
/// controls whether the composition integral carries the polar area element
/// `r`; integrals realizing `H_G` always use the Lebesgue (jacobian) form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub nr: usize,
    pub nphi: usize,
    pub jacobian: bool,
}

impl QuadSpec {
    pub fn new(nr: usize, nphi: usize) -> Self {
        QuadSpec {
            nr,
            nphi,
            jacobian: true,
        }
    }

    pub fn without_jacobian(nr: usize, nphi: usize) -> Self {
        QuadSpec {
            nr,
            nphi,
            jacobian: false,
        }
    }

    /// A companion rule whose nodes cannot coincide with this rule's nodes,
    /// used when integrating a singular kernel that must later be evaluated
    /// at this rule's own nodes.
    pub fn staggered(&self) -> QuadSpec {
        QuadSpec {
            nr: self.nr + 9,
            nphi: self.nphi + 4,
            jacobian: self.jacobian,
        }
    }
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec::new(64, 256)
    }
}

/// Concrete nodes/weights on the disk of radius `rho`.
#[derive(Debug, Clone)]
pub struct DiskRule {
    pub r: Vec<f64>,
    pub wr: Vec<f64>,
    pub phi: Vec<f64>,
    pub wphi: f64,
}

impl DiskRule {
    pub fn build(rho: f64, spec: &QuadSpec) -> DiskRule {
        let (nodes, weights) = gauss_legendre(spec.nr);
        let half = rho / 2.0;
        let r: Vec<f64> = nodes.iter().map(|&t| half * (t + 1.0)).collect();
        let wr: Vec<f64> = weights
            .iter()
            .zip(&r)
            .map(|(&w, &ri)| w * half * if spec.jacobian { ri } else { 1.0 })
            .collect();
        let nphi = spec.nphi;
        let phi: Vec<f64> = (0..nphi)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / nphi as f64)
            .collect();
        DiskRule {
            r,
            wr,
            phi,
            wphi: 2.0 * std::f64::consts::PI / nphi as f64,
        }
    }

    pub fn node_count(&self) -> usize {
        self.r.len() * self.phi.len()
    }

    /// Node `(i, k) -> (r_i, phi_k)` with flattened index `i * nphi + k`.
    pub fn node(&self, flat: usize) -> (f64, f64, f64) {
        let nphi = self.phi.len();
        let i = flat / nphi;
        let k = flat % nphi;
        (self.r[i], self.phi[k], self.wr[i] * self.wphi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is exact for an 8-point rule
        let integral: f64 = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| wi * (xi.powi(14) + 3.0 * xi.powi(5) - xi * xi))
            .sum();
        let exact = 2.0 / 15.0 - 2.0 / 3.0;
        assert!((integral - exact).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gl_nodes_sorted_and_interior() {
        for n in [1usize, 2, 5, 64, 73] {
            let (x, w) = gauss_legendre(n);
            for i in 1..n {
                assert!(x[i] > x[i - 1]);
            }
            assert!(x[0] > -1.0 && x[n - 1] < 1.0);
            assert!(w.iter().all(|&wi| wi > 0.0));
        }
    }

    #[test]
    fn disk_rule_measures_area() {
        let rule = DiskRule::build(2.0, &QuadSpec::new(16, 32));
        let mut total = 0.0;
        for q in 0..rule.node_count() {
            let (_, _, w) = rule.node(q);
            total += w;
        }
        assert!((total - std::f64::consts::PI * 4.0).abs() < 1e-10);
    }

    #[test]
    fn disk_rule_integrates_smooth_field() {
        // integral of r^2 over unit disk = pi/2
        let rule = DiskRule::build(1.0, &QuadSpec::new(24, 48));
        let mut total = 0.0;
        for q in 0..rule.node_count() {
            let (r, _, w) = rule.node(q);
            total += w * r * r;
        }
        assert!((total - std::f64::consts::PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn staggered_nodes_do_not_coincide() {
        let a = DiskRule::build(1.0, &QuadSpec::new(64, 256));
        let b = DiskRule::build(1.0, &QuadSpec::new(64, 256).staggered());
        for &ra in &a.r {
            for &rb in &b.r {
                assert!((ra - rb).abs() > 1e-9);
            }
        }
    }
}
