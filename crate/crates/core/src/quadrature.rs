//! Product quadrature over the rotation group.
//!
//! Gauss–Legendre in `cos θ` times uniform (periodic trapezoid) rules in `φ`
//! and `ψ`. The weights integrate the invariant measure
//! `dΩ = dφ dψ sinθ dθ`, total mass `8π²`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{EulerAngles, HalfInt};
use crate::error::{invalid, Result};
use crate::exec::{map_range, Exec};

/// Total mass of the invariant measure.
pub const GROUP_VOLUME: f64 = 8.0 * PI * PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaNode {
    pub theta: f64,
    /// Weight in the `d(cos θ)` measure; the nodes' weights sum to 2.
    pub weight: f64,
}

/// One point of a [`QuadratureGrid`] with its full product weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub angles: EulerAngles,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    theta_nodes: Vec<ThetaNode>,
    n_phi: usize,
    n_psi: usize,
    twice_j_design: HalfInt,
}

/// Gauss–Legendre nodes `x_k` and weights on `[-1, 1]`, ascending in `x`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    let half = n.div_ceil(2);
    for k in 0..half {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[k] = (-x, w);
        out[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Largest `2j` a grid of these sizes integrates exactly.
fn design_for(n_theta: usize, n_phi: usize, n_psi: usize) -> Option<HalfInt> {
    if n_theta < 2 || n_phi == 0 || n_psi == 0 {
        return None;
    }
    let by_phi = (n_phi - 1) / 2;
    let by_psi = (n_psi - 1) / 2;
    let by_theta = n_theta - 2;
    let twice = by_phi.min(by_psi).min(by_theta);
    Some(HalfInt::from_twice(twice as i32))
}

/// Default grid for spin `j`: `4·(2j) + 2` nodes along every angle, well
/// above the minimum of [`minimal_grid`].
pub fn build_grid(twice_j: HalfInt) -> QuadratureGrid {
    let n = 4 * twice_j.twice().max(0) as usize + 2;
    QuadratureGrid::with_sizes(n, n, n).expect("default sizes are always valid")
}

/// Smallest grid exact for spin `j`: `2j + 2` θ nodes and `4j + 1` points in φ and ψ.
pub fn minimal_grid(twice_j: HalfInt) -> QuadratureGrid {
    let tj = twice_j.twice().max(0) as usize;
    QuadratureGrid::with_sizes(tj + 2, 2 * tj + 1, 2 * tj + 1).expect("minimal sizes are valid")
}

impl QuadratureGrid {
    /// Grid with `n_theta` Gauss–Legendre nodes and uniform `φ`, `ψ` rules.
    pub fn with_sizes(n_theta: usize, n_phi: usize, n_psi: usize) -> Result<Self> {
        let nodes = gauss_legendre(n_theta)
            .into_iter()
            .map(|(x, weight)| ThetaNode {
                theta: x.clamp(-1.0, 1.0).acos(),
                weight,
            })
            .collect();
        Self::from_parts(nodes, n_phi, n_psi)
    }

    /// Rebuilds a grid from its stored description (θ nodes need not be Gauss–Legendre).
    pub fn from_parts(theta_nodes: Vec<ThetaNode>, n_phi: usize, n_psi: usize) -> Result<Self> {
        let twice_j_design = design_for(theta_nodes.len(), n_phi, n_psi).ok_or_else(|| {
            invalid!(
                "grid {}x{}x{} is too small to integrate anything exactly",
                theta_nodes.len(),
                n_phi,
                n_psi
            )
        })?;
        for node in &theta_nodes {
            if !(0.0..=PI).contains(&node.theta) || !node.weight.is_finite() || node.weight <= 0.0 {
                return Err(invalid!("bad theta node {node:?}"));
            }
        }
        let total: f64 = theta_nodes.iter().map(|n| n.weight).sum();
        if (total - 2.0).abs() > 1e-10 {
            return Err(invalid!("theta weights sum to {total}, expected 2"));
        }
        Ok(QuadratureGrid {
            theta_nodes,
            n_phi,
            n_psi,
            twice_j_design,
        })
    }

    pub fn theta_nodes(&self) -> &[ThetaNode] {
        &self.theta_nodes
    }

    pub fn n_theta(&self) -> usize {
        self.theta_nodes.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    /// Largest spin this grid reconstructs exactly.
    pub fn twice_j_design(&self) -> HalfInt {
        self.twice_j_design
    }

    pub fn len(&self) -> usize {
        self.theta_nodes.len() * self.n_phi * self.n_psi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of distinct measurement axes `(θ, φ)`.
    pub fn n_axes(&self) -> usize {
        self.theta_nodes.len() * self.n_phi
    }

    pub fn phi_at(&self, p: usize) -> f64 {
        TAU * p as f64 / self.n_phi as f64
    }

    pub fn psi_at(&self, q: usize) -> f64 {
        TAU * q as f64 / self.n_psi as f64
    }

    pub fn phi_weight(&self) -> f64 {
        TAU / self.n_phi as f64
    }

    pub fn psi_weight(&self) -> f64 {
        TAU / self.n_psi as f64
    }

    /// Flat index of `(θ node, φ point, ψ point)`; θ-major.
    pub fn flat_index(&self, t: usize, p: usize, q: usize) -> usize {
        (t * self.n_phi + p) * self.n_psi + q
    }

    /// Inverse of [`QuadratureGrid::flat_index`].
    pub fn split_index(&self, index: usize) -> (usize, usize, usize) {
        let q = index % self.n_psi;
        let rest = index / self.n_psi;
        (rest / self.n_phi, rest % self.n_phi, q)
    }

    /// Axis index `t * n_phi + p` of a flat point index.
    pub fn axis_of(&self, index: usize) -> usize {
        index / self.n_psi
    }

    pub fn point(&self, index: usize) -> GridPoint {
        let (t, p, q) = self.split_index(index);
        let node = self.theta_nodes[t];
        GridPoint {
            angles: EulerAngles::new(self.phi_at(p), node.theta, self.psi_at(q))
                .expect("grid angles are in range"),
            weight: node.weight * self.phi_weight() * self.psi_weight(),
        }
    }

    /// All points in θ-major, then φ, then ψ order.
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Measurement axis `(θ, φ)` of axis index `a` (with `ψ = 0`).
    pub fn axis(&self, a: usize) -> EulerAngles {
        let (t, p) = (a / self.n_phi, a % self.n_phi);
        EulerAngles::new(self.phi_at(p), self.theta_nodes[t].theta, 0.0)
            .expect("grid angles are in range")
    }

    /// The same grid with twice as many θ nodes.
    pub fn refined_theta(&self) -> Self {
        Self::with_sizes(2 * self.n_theta(), self.n_phi, self.n_psi)
            .expect("refining keeps a valid grid")
    }

    /// Checks the grid resolves spin `j`.
    pub fn require_design(&self, twice_j: HalfInt) -> Result<()> {
        if self.twice_j_design < twice_j {
            return Err(invalid!(
                "grid {}x{}x{} resolves j <= {} only, need j = {}",
                self.n_theta(),
                self.n_phi,
                self.n_psi,
                self.twice_j_design,
                twice_j
            ));
        }
        Ok(())
    }
}

/// `Σ weight · f(point)` over the grid.
///
/// Rows of fixed θ may be evaluated concurrently; the row sums are always
/// added in θ order, so the result is independent of [`Exec`].
pub fn integrate<F>(grid: &QuadratureGrid, f: F) -> Complex64
where
    F: Fn(&EulerAngles) -> Complex64 + Sync + Send,
{
    integrate_with(grid, Exec::default(), f)
}

pub fn integrate_with<F>(grid: &QuadratureGrid, exec: Exec, f: F) -> Complex64
where
    F: Fn(&EulerAngles) -> Complex64 + Sync + Send,
{
    let per_row = grid.n_phi * grid.n_psi;
    let rows = map_range(exec, grid.n_theta(), |t| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..per_row {
            let pt = grid.point(t * per_row + k);
            acc += f(&pt.angles) * pt.weight;
        }
        acc
    });
    rows.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::wigner_d;
    use approx::assert_abs_diff_eq;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..=20 {
            let rule = gauss_legendre(n);
            for deg in 0..2 * n {
                let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert_abs_diff_eq!(got, want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn default_grid_sizes() {
        let g = build_grid(h(1));
        assert_eq!((g.n_theta(), g.n_phi(), g.n_psi()), (6, 6, 6));
        assert!(g.twice_j_design() >= h(1));
        let total: f64 = g.points().map(|p| p.weight).sum();
        assert_abs_diff_eq!(total, GROUP_VOLUME, epsilon = 1e-10);
        for tj in 0..=6 {
            let g = minimal_grid(h(tj));
            assert_eq!(g.twice_j_design(), h(tj));
            let total: f64 = g.points().map(|p| p.weight).sum();
            assert_abs_diff_eq!(total, GROUP_VOLUME, epsilon = 1e-10);
        }
    }

    #[test]
    fn design_follows_minimum_sizes() {
        // 2j = 2 needs n_phi, n_psi >= 5 and 4 theta nodes
        let g = QuadratureGrid::with_sizes(4, 5, 5).unwrap();
        assert_eq!(g.twice_j_design(), h(2));
        let g = QuadratureGrid::with_sizes(3, 5, 5).unwrap();
        assert_eq!(g.twice_j_design(), h(1));
        assert!(QuadratureGrid::with_sizes(1, 5, 5).is_err());
        assert!(g.require_design(h(2)).is_err());
    }

    #[test]
    fn constants_integrate_to_one() {
        let g = build_grid(h(0));
        let v = integrate(&g, |_| Complex64::new(1.0, 0.0)) / GROUP_VOLUME;
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn d_functions_integrate_as_expected() {
        let g = build_grid(h(2));
        let v = integrate(&g, |u| wigner_d(h(2), h(0), h(0), u).unwrap()) / GROUP_VOLUME;
        assert!(v.norm() < 1e-14);
        let v = integrate(&g, |u| wigner_d(h(2), h(0), h(2), u).unwrap());
        assert!(v.norm() < 1e-12);
        let g = build_grid(h(1));
        let v = integrate(&g, |u| {
            Complex64::from(wigner_d(h(1), h(1), h(1), u).unwrap().norm_sqr())
        });
        assert_abs_diff_eq!(v.re, GROUP_VOLUME / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn index_round_trip() {
        let g = QuadratureGrid::with_sizes(3, 4, 5).unwrap();
        for i in 0..g.len() {
            let (t, p, q) = g.split_index(i);
            assert_eq!(g.flat_index(t, p, q), i);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let g = build_grid(h(3));
        let f = |u: &EulerAngles| wigner_d(h(3), h(1), h(-1), u).unwrap();
        let a = integrate_with(&g, Exec::Sequential, f);
        let b = integrate_with(&g, Exec::Parallel, f);
        assert_eq!(a, b);
    }
}
