//! Spin tomograms: the map from a density matrix to the probabilities
//! `w(i, u)` of finding projection `i` along a rotated axis, and its exact
//! inverse.
//!
//! The inverse is the 3j-kernel formula
//!
//! ```text
//! ρ_{m m'} = Σ_{k=0}^{2j} Σ_{l=-k}^{k} (2k+1)² Σ_i (-1)^{i-m'}
//!            ∫ w(i,u) D^k_{0l}(u) dΩ/8π²  (j j k; i -i 0) (j j k; m -m' l)
//! ```
//!
//! evaluated with a product quadrature that is exact for the band-limited
//! integrand.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::angular::{parity_sign, with_phases, EulerAngles, HalfInt, WignerTable};
use crate::error::{invalid, Result};
use crate::exec::{map_range, Exec};
use crate::linalg::{self, CMatrix};
use crate::quadrature::{QuadratureGrid, GROUP_VOLUME};
use crate::states::{BlochVector, DensityMatrix};

/// Allowed `|Σ_i w(i,u) - 1|` at every grid point.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;
/// Negative probabilities above this are rounding noise and are clamped to 0.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Probabilities `w(i, u)` tabulated on a quadrature grid.
///
/// Values are stored outcome-major: `values[i * grid.len() + point]`, with
/// `i` running from `j` down to `-j` and points in the grid's θ-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinTomogram {
    twice_j: HalfInt,
    grid: QuadratureGrid,
    values: Vec<f64>,
}

impl SpinTomogram {
    /// Checks shape, range and per-point normalization; clamps rounding noise.
    pub fn new(twice_j: HalfInt, grid: QuadratureGrid, mut values: Vec<f64>) -> Result<Self> {
        if twice_j.twice() < 0 {
            return Err(invalid!("negative spin {twice_j}"));
        }
        let expected = twice_j.multiplicity() * grid.len();
        if values.len() != expected {
            return Err(invalid!(
                "tomogram has {} values, expected {expected}",
                values.len()
            ));
        }
        clamp_probabilities(&mut values)?;
        let tomo = SpinTomogram {
            twice_j,
            grid,
            values,
        };
        let residual = tomo.normalization_residual();
        if residual > NORMALIZATION_TOLERANCE {
            return Err(invalid!(
                "tomogram is not normalized (worst point off by {residual:e})"
            ));
        }
        Ok(tomo)
    }

    pub fn twice_j(&self) -> HalfInt {
        self.twice_j
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `w(i, point)` for outcome row `i_index` (0 is `i = j`).
    pub fn value(&self, i_index: usize, point: usize) -> f64 {
        self.values[i_index * self.grid.len() + point]
    }

    /// `w(·, point)` ordered `i = j … -j`.
    pub fn probabilities_at(&self, point: usize) -> Vec<f64> {
        (0..self.twice_j.multiplicity())
            .map(|i| self.value(i, point))
            .collect()
    }

    /// Largest `|Σ_i w(i, u) - 1|` over the grid.
    pub fn normalization_residual(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| (self.probabilities_at(p).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `w` from its ψ-average at fixed `(θ, φ)`.
    pub fn psi_spread(&self) -> f64 {
        let n_psi = self.grid.n_psi();
        let mut worst = 0.0_f64;
        for i in 0..self.twice_j.multiplicity() {
            for axis in 0..self.grid.n_axes() {
                let row = &self.values[i * self.grid.len() + axis * n_psi..][..n_psi];
                let mean = row.iter().sum::<f64>() / n_psi as f64;
                for &v in row {
                    worst = worst.max((v - mean).abs());
                }
            }
        }
        worst
    }
}

fn clamp_probabilities(values: &mut [f64]) -> Result<()> {
    for v in values.iter_mut() {
        if !v.is_finite() || *v < -NEGATIVE_CLAMP || *v > 1.0 + NEGATIVE_CLAMP {
            return Err(invalid!("probability {v} outside [0, 1]"));
        }
        *v = v.clamp(0.0, 1.0);
    }
    Ok(())
}

/// `w(i, u) = Σ_{s,m} D_{is}(u) ρ_{sm} D*_{im}(u)`, ordered `i = j … -j`.
pub fn forward_point(rho: &DensityMatrix, u: &EulerAngles) -> Vec<f64> {
    let d = WignerTable::global()
        .d_matrix(rho.twice_j(), u)
        .expect("valid density matrices have valid spin");
    rotated_diagonal(&d, rho.entries())
}

fn rotated_diagonal(d: &CMatrix, rho: &CMatrix) -> Vec<f64> {
    let dr = d * rho;
    (0..d.nrows())
        .map(|i| {
            (0..d.ncols())
                .map(|m| dr[(i, m)] * d[(i, m)].conj())
                .sum::<Complex64>()
                .re
        })
        .collect()
}

/// Closed-form spin-1/2 probabilities `(w(+1/2, u), w(-1/2, u))`.
///
/// `w(±1/2) = cos²(θ/2)|a|² ± (sinθ/2)(e^{iφ} a b* + c.c.) + sin²(θ/2)|b|²`
/// with `|a|²`, `a b*`, `|b|²` read off `ρ`.
pub fn forward_closed_form_half(rho: &DensityMatrix, u: &EulerAngles) -> Result<(f64, f64)> {
    if rho.twice_j() != HalfInt::HALF {
        return Err(invalid!(
            "closed form needs spin 1/2, got {}",
            rho.twice_j()
        ));
    }
    let e = rho.entries();
    let (aa, ab, ba, bb) = (e[(0, 0)].re, e[(0, 1)], e[(1, 0)], e[(1, 1)].re);
    let theta = u.theta();
    let (c2, s2) = ((theta / 2.0).cos().powi(2), (theta / 2.0).sin().powi(2));
    let phase = Complex64::from_polar(1.0, u.phi());
    let cross = (theta.sin() / 2.0) * (phase * ab + phase.conj() * ba).re;
    Ok((c2 * aa + cross + s2 * bb, s2 * aa - cross + c2 * bb))
}

/// Mixed-state form `w(±1/2, u) = 1/2 ± (s̄_z cosθ + s̄_x sinθ cosφ + s̄_y sinθ sinφ)`.
pub fn closed_form_mixed(s: &BlochVector, u: &EulerAngles) -> (f64, f64) {
    let (theta, phi) = (u.theta(), u.phi());
    let proj = s.sz * theta.cos() + s.sx * theta.sin() * phi.cos() + s.sy * theta.sin() * phi.sin();
    (0.5 + proj, 0.5 - proj)
}

/// `d^j(θ_t)` for every θ node of the grid.
pub(crate) fn small_d_per_node(j: HalfInt, grid: &QuadratureGrid) -> Result<Vec<DMatrix<f64>>> {
    let table = WignerTable::global();
    grid.theta_nodes()
        .iter()
        .map(|node| table.small_d_matrix(j, node.theta))
        .collect()
}

/// Tabulates `w(i, u)` over every grid point.
pub fn forward_tomogram(rho: &DensityMatrix, grid: &QuadratureGrid) -> Result<SpinTomogram> {
    forward_tomogram_with(rho, grid, Exec::default())
}

pub fn forward_tomogram_with(
    rho: &DensityMatrix,
    grid: &QuadratureGrid,
    exec: Exec,
) -> Result<SpinTomogram> {
    let j = rho.twice_j();
    grid.require_design(j)?;
    let small = small_d_per_node(j, grid)?;
    let per_point = map_range(exec, grid.len(), |p| {
        let (t, _, _) = grid.split_index(p);
        let d = with_phases(j, &small[t], &grid.point(p).angles);
        rotated_diagonal(&d, rho.entries())
    });
    let n = j.multiplicity();
    let npts = grid.len();
    let mut values = vec![0.0; n * npts];
    for (p, w) in per_point.into_iter().enumerate() {
        for (i, v) in w.into_iter().enumerate() {
            values[i * npts + p] = v;
        }
    }
    SpinTomogram::new(j, grid.clone(), values)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReconstructOptions {
    /// Replace the raw estimate by the nearest physical state.
    pub project: bool,
    pub exec: Exec,
}

/// Inverts a tomogram with the 3j-kernel formula; raw output, no projection.
pub fn reconstruct(tomogram: &SpinTomogram) -> Result<DensityMatrix> {
    reconstruct_with(tomogram, &ReconstructOptions::default())
}

pub fn reconstruct_with(
    tomogram: &SpinTomogram,
    opts: &ReconstructOptions,
) -> Result<DensityMatrix> {
    let j = tomogram.twice_j();
    let grid = tomogram.grid();
    grid.require_design(j)?;
    let residual = tomogram.normalization_residual();
    if residual > NORMALIZATION_TOLERANCE {
        return Err(invalid!(
            "tomogram is not normalized (worst point off by {residual:e})"
        ));
    }

    let moments = kernel_moments(tomogram, opts.exec);
    let raw = assemble(j, |i, k, l| moments.get(i, k, l));
    let rho = DensityMatrix::from_raw(j, raw)?;
    Ok(if opts.project {
        project_to_physical(&rho)
    } else {
        rho
    })
}

/// `∫ w(i,u) D^k_{0l}(u) dΩ/8π²` for every outcome `i` and `0 ≤ k ≤ 2j`, `|l| ≤ k`.
pub(crate) struct KernelMoments {
    n_outcomes: usize,
    max_k: usize,
    // [(k, l) pair][i]
    values: Vec<Vec<Complex64>>,
}

impl KernelMoments {
    fn pair_index(k: usize, l: i32) -> usize {
        k * k + (l + k as i32) as usize
    }

    pub(crate) fn get(&self, i: usize, k: usize, l: i32) -> Complex64 {
        debug_assert!(k <= self.max_k && i < self.n_outcomes);
        self.values[Self::pair_index(k, l)][i]
    }
}

/// ψ-summed, weighted tomogram rows `S[i][t][p] = Σ_q w · W_θ W_φ W_ψ / 8π²`.
fn psi_collapsed(tomogram: &SpinTomogram) -> Vec<Vec<Vec<f64>>> {
    let grid = tomogram.grid();
    let scale = grid.phi_weight() * grid.psi_weight() / GROUP_VOLUME;
    (0..tomogram.twice_j().multiplicity())
        .map(|i| {
            (0..grid.n_theta())
                .map(|t| {
                    let wt = grid.theta_nodes()[t].weight * scale;
                    (0..grid.n_phi())
                        .map(|p| {
                            let base = grid.flat_index(t, p, 0);
                            let s: f64 =
                                (0..grid.n_psi()).map(|q| tomogram.value(i, base + q)).sum();
                            s * wt
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn kernel_moments(tomogram: &SpinTomogram, exec: Exec) -> KernelMoments {
    let j = tomogram.twice_j();
    let grid = tomogram.grid();
    let max_k = j.twice() as usize;
    let n = j.multiplicity();
    let rows = psi_collapsed(tomogram);
    let table = WignerTable::global();

    let pairs: Vec<(usize, i32)> = (0..=max_k)
        .flat_map(|k| (-(k as i32)..=k as i32).map(move |l| (k, l)))
        .collect();
    let values = map_range(exec, pairs.len(), |idx| {
        let (k, l) = pairs[idx];
        let kk = HalfInt::from_twice(2 * k as i32);
        let phases: Vec<Complex64> = (0..grid.n_phi())
            .map(|p| {
                Complex64::from_polar(1.0, f64::from(l) * TAU * p as f64 / grid.n_phi() as f64)
            })
            .collect();
        let d_theta: Vec<f64> = grid
            .theta_nodes()
            .iter()
            .map(|node| {
                table
                    .small_d(kk, HalfInt::ZERO, HalfInt::from_twice(2 * l), node.theta)
                    .expect("k <= 2j is inside the table")
            })
            .collect();
        (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &d) in d_theta.iter().enumerate() {
                    let row: Complex64 =
                        rows[i][t].iter().zip(&phases).map(|(&s, &ph)| ph * s).sum();
                    acc += row * d;
                }
                acc
            })
            .collect()
    });
    KernelMoments {
        n_outcomes: n,
        max_k,
        values,
    }
}

/// 3j-kernel sum turning moments `μ(i, k, l)` into `ρ_{m m'}`.
pub(crate) fn assemble(j: HalfInt, moment: impl Fn(usize, usize, i32) -> Complex64) -> CMatrix {
    let kernel = InversionKernel::new(j);
    let n = j.multiplicity();
    CMatrix::from_fn(n, n, |r, c| {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in kernel.terms(r, c) {
            for (i, &diag) in term.diag.iter().enumerate() {
                acc += moment(i, term.k, term.l) * (term.coeff * diag);
            }
        }
        acc
    })
}

/// Precomputed 3j products for one spin.
pub(crate) struct InversionKernel {
    j: HalfInt,
    // diag3j[k][i] = (j j k; i -i 0)
    diag3j: Vec<Vec<f64>>,
}

pub(crate) struct KernelTerm {
    pub k: usize,
    pub l: i32,
    /// `(2k+1)² (j j k; m -m' l)`
    pub coeff: f64,
    /// `(-1)^{i - m'} (j j k; i -i 0)` per outcome row. The two half-integer
    /// phases only make sense combined into one integer power.
    pub diag: Vec<f64>,
}

impl InversionKernel {
    pub(crate) fn new(j: HalfInt) -> Self {
        let table = WignerTable::global();
        let diag3j = (0..=j.twice() as usize)
            .map(|k| {
                let kk = HalfInt::from_twice(2 * k as i32);
                j.projections()
                    .map(|i| {
                        table
                            .three_j(j, j, kk, i, HalfInt::from_twice(-i.twice()), HalfInt::ZERO)
                            .expect("projections of j are admissible")
                    })
                    .collect()
            })
            .collect();
        InversionKernel { j, diag3j }
    }

    /// Non-vanishing terms for entry `(row m, col m')`.
    pub(crate) fn terms(&self, row: usize, col: usize) -> Vec<KernelTerm> {
        let j = self.j;
        let table = WignerTable::global();
        let m = j.projection_at(row);
        let mp = j.projection_at(col);
        // selection rule m - m' + l = 0
        let l = (mp.twice() - m.twice()) / 2;
        let mut out = Vec::new();
        for k in l.unsigned_abs() as usize..=j.twice() as usize {
            let kk = HalfInt::from_twice(2 * k as i32);
            let coupling = table
                .three_j(
                    j,
                    j,
                    kk,
                    m,
                    HalfInt::from_twice(-mp.twice()),
                    HalfInt::from_twice(2 * l),
                )
                .expect("admissible projections");
            if coupling == 0.0 {
                continue;
            }
            let weight = ((2 * k + 1) * (2 * k + 1)) as f64;
            let diag = j
                .projections()
                .zip(&self.diag3j[k])
                .map(|(i, &tj)| parity_sign(i.twice() - mp.twice()) * tj)
                .collect();
            out.push(KernelTerm {
                k,
                l,
                coeff: weight * coupling,
                diag,
            });
        }
        out
    }
}

/// Nearest unit-trace positive semidefinite matrix in Frobenius norm.
///
/// The spectrum of the Hermitian part is projected onto the probability
/// simplex (shift, then clip at zero); eigenvectors are kept.
pub fn project_to_physical(raw: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_raw(raw.twice_j(), project_matrix(raw.entries()))
        .expect("shape is preserved")
}

pub(crate) fn project_matrix(raw: &CMatrix) -> CMatrix {
    let (values, vectors) = linalg::hermitian_eigen(raw);
    let projected = simplex_projection(values.as_slice());
    let n = vectors.nrows();
    let scaled = CMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * projected[c]);
    linalg::hermitian_part(&(&scaled * vectors.adjoint()))
}

/// Euclidean projection of `v` onto `{x ≥ 0, Σx = 1}`.
pub(crate) fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (r, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - 1.0) / (r + 1) as f64;
        if x - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_grid;
    use crate::states::{density_from_bloch, Fiducial};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::from(re)
    }

    #[test]
    fn z_plus_probabilities() {
        let rho = Fiducial::ZPlus.density();
        for &(phi, theta) in &[(0.0, 0.0), (1.0, 0.4), (4.0, 2.5), (6.0, PI)] {
            let u = EulerAngles::new(phi, theta, 0.9).unwrap();
            let w = forward_point(&rho, &u);
            assert_abs_diff_eq!(w[0], (theta / 2.0).cos().powi(2), epsilon = 1e-15);
            assert_abs_diff_eq!(w[1], (theta / 2.0).sin().powi(2), epsilon = 1e-15);
        }
    }

    #[test]
    fn maximally_mixed_is_flat() {
        let rho = DensityMatrix::maximally_mixed(HalfInt::HALF);
        let w = forward_point(&rho, &EulerAngles::new(1.0, 2.0, 3.0).unwrap());
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-15);
        let s = BlochVector::new(0.0, 0.0, 0.0).unwrap();
        let (a, b) = closed_form_mixed(&s, &EulerAngles::new(1.0, 2.0, 3.0).unwrap());
        assert_eq!((a, b), (0.5, 0.5));
    }

    #[test]
    fn spin_one_worked_example() {
        let rho = DensityMatrix::diagonal(HalfInt::ONE, &[1.0, 0.0, 0.0]).unwrap();
        let theta = 1.234_f64;
        let w = forward_point(&rho, &EulerAngles::new(0.3, theta, 2.0).unwrap());
        let x = theta.cos();
        assert_abs_diff_eq!(w[0], (1.0 + x).powi(2) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], (1.0 - x * x) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], (1.0 - x).powi(2) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_half_rejects_other_spins() {
        let rho = DensityMatrix::maximally_mixed(HalfInt::ONE);
        assert!(forward_closed_form_half(&rho, &EulerAngles::IDENTITY).is_err());
    }

    #[test]
    fn closed_form_fiducials() {
        let u = EulerAngles::new(0.7, 1.1, 0.2).unwrap();
        let (st, cp, sp) = (u.theta().sin(), u.phi().cos(), u.phi().sin());
        let (a, b) = forward_closed_form_half(&Fiducial::XPlus.density(), &u).unwrap();
        assert_abs_diff_eq!(a, 0.5 * (1.0 + st * cp), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.5 * (1.0 - st * cp), epsilon = 1e-15);
        let (a, b) = forward_closed_form_half(&Fiducial::YMinus.density(), &u).unwrap();
        assert_abs_diff_eq!(a, 0.5 * (1.0 - st * sp), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.5 * (1.0 + st * sp), epsilon = 1e-15);
    }

    #[test]
    fn tabulated_z_plus_and_mixed() {
        let grid = build_grid(HalfInt::HALF);
        let tomo = forward_tomogram(&Fiducial::ZPlus.density(), &grid).unwrap();
        for p in 0..grid.len() {
            let theta = grid.point(p).angles.theta();
            assert_abs_diff_eq!(
                tomo.value(0, p),
                (theta / 2.0).cos().powi(2),
                epsilon = 1e-14
            );
        }
        let flat = forward_tomogram(&DensityMatrix::maximally_mixed(HalfInt::HALF), &grid).unwrap();
        assert!(flat.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        let grid = crate::quadrature::minimal_grid(HalfInt::HALF);
        let rho = DensityMatrix::maximally_mixed(HalfInt::ONE);
        assert!(forward_tomogram(&rho, &grid).is_err());
        let good = forward_tomogram(&rho, &build_grid(HalfInt::ONE)).unwrap();
        let shrunk = SpinTomogram {
            twice_j: HalfInt::from_twice(3),
            grid: grid.clone(),
            values: vec![0.25; 4 * grid.len()],
        };
        assert!(reconstruct(&shrunk).is_err());
        assert!(reconstruct(&good).is_ok());
    }

    #[test]
    fn non_normalized_tomogram_is_rejected() {
        let grid = build_grid(HalfInt::HALF);
        assert!(SpinTomogram::new(HalfInt::HALF, grid.clone(), vec![0.4; 2 * grid.len()]).is_err());
        assert!(SpinTomogram::new(HalfInt::HALF, grid.clone(), vec![0.5; 3]).is_err());
        let mut v = vec![0.5; 2 * grid.len()];
        v[0] = -0.2;
        v[grid.len()] = 1.2;
        assert!(SpinTomogram::new(HalfInt::HALF, grid, v).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let grid = build_grid(HalfInt::HALF);
        let up = Fiducial::ZPlus.density();
        let back = reconstruct(&forward_tomogram(&up, &grid).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(back.entries(), up.entries()) < 1e-12);

        let rho = density_from_bloch(&BlochVector::new(0.1, 0.2, 0.15).unwrap());
        let back = reconstruct(&forward_tomogram(&rho, &grid).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(back.entries(), rho.entries()) < 1e-10);

        let grid = build_grid(HalfInt::ONE);
        let rho = DensityMatrix::diagonal(HalfInt::ONE, &[1.0, 0.0, 0.0]).unwrap();
        let back = reconstruct(&forward_tomogram(&rho, &grid).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(back.entries(), rho.entries()) < 1e-10);
    }

    #[test]
    fn projection_examples() {
        let raw = DensityMatrix::from_raw(
            HalfInt::HALF,
            CMatrix::from_row_slice(2, 2, &[c(1.1), c(0.0), c(0.0), c(-0.1)]),
        )
        .unwrap();
        let p = project_to_physical(&raw);
        assert!(linalg::max_abs_diff(p.entries(), Fiducial::ZPlus.density().entries()) < 1e-14);

        let valid = density_from_bloch(&BlochVector::new(0.1, -0.2, 0.3).unwrap());
        let p = project_to_physical(&valid);
        assert!(linalg::max_abs_diff(p.entries(), valid.entries()) < 1e-14);
    }

    #[test]
    fn simplex_projection_cases() {
        assert_eq!(simplex_projection(&[1.1, -0.1]), vec![1.0, 0.0]);
        let p = simplex_projection(&[0.7, 0.4, -0.1]);
        assert_abs_diff_eq!(p[0], 0.65, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.35, epsilon = 1e-15);
        assert_eq!(p[2], 0.0);
        let p = simplex_projection(&[0.0, 0.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }
}
