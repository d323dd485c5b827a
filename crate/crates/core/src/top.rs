//! Symmetric-top rotational states.
//!
//! A fixed-`j` subspace of the top is `(2j+1)²`-dimensional, spanned by
//! `|j M k⟩` with `M` the projection on the space-fixed axis and `k` the
//! projection on the body axis. Density matrices are stored as
//! `(2j+1)² × (2j+1)²` matrices with pair index `(M, k) ↦ M_idx·(2j+1) + k_idx`,
//! both indices running from `j` down to `-j`.
//!
//! The tomogram uses two independent rotations, `u` acting on the `M` labels
//! and `u'` on the `k` labels:
//! `w(i1, i2, u, u') = [(D(u) ⊗ D(u')) ρ (D(u) ⊗ D(u'))†]_{(i1 i2), (i1 i2)}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::angular::{with_phases, EulerAngles, HalfInt, WignerTable};
use crate::error::{invalid, Error, Result};
use crate::exec::{map_range, Exec};
use crate::linalg::{self, CMatrix};
use crate::quadrature::{QuadratureGrid, GROUP_VOLUME};
use crate::spin::{
    project_matrix, small_d_per_node, InversionKernel, NEGATIVE_CLAMP, NORMALIZATION_TOLERANCE,
};
use crate::states::{
    matrix_fidelity, DensityMatrix, HERMITIAN_TOLERANCE, NORM_TOLERANCE, PSD_TOLERANCE,
};

/// Moments of inertia and the unit of action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopParameters {
    pub inertia_a: f64,
    pub inertia_c: f64,
    pub hbar: f64,
}

impl TopParameters {
    pub fn new(inertia_a: f64, inertia_c: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [("I_A", inertia_a), ("I_C", inertia_c), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid!("{name} must be positive, got {v}"));
            }
        }
        Ok(TopParameters {
            inertia_a,
            inertia_c,
            hbar,
        })
    }
}

/// Sign in front of `1/I_A` in the `J_ζ²` coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnergyConvention {
    /// `(ħ²/2)(1/I_C + 1/I_A)`
    #[default]
    Paper,
    /// `(ħ²/2)(1/I_C - 1/I_A)`, the usual rigid-rotor result.
    Standard,
}

impl FromStr for EnergyConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(EnergyConvention::Paper),
            "standard" => Ok(EnergyConvention::Standard),
            other => Err(Error::Format(format!(
                "unknown energy convention {other:?}"
            ))),
        }
    }
}

impl fmt::Display for EnergyConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyConvention::Paper => "paper",
            EnergyConvention::Standard => "standard",
        })
    }
}

/// `E(j, k) = (ħ²/2I_A) j(j+1) + (ħ²/2)(1/I_C ± 1/I_A) k²`; independent of `M`.
pub fn top_energy(
    twice_j: HalfInt,
    twice_k: HalfInt,
    params: &TopParameters,
    convention: EnergyConvention,
) -> Result<f64> {
    twice_j.check_projection(twice_k)?;
    let j = twice_j.value();
    let k = twice_k.value();
    let hb2 = params.hbar * params.hbar;
    let inv_a = 1.0 / params.inertia_a;
    let axial = match convention {
        EnergyConvention::Paper => 1.0 / params.inertia_c + inv_a,
        EnergyConvention::Standard => 1.0 / params.inertia_c - inv_a,
    };
    Ok(0.5 * hb2 * inv_a * j * (j + 1.0) + 0.5 * hb2 * axial * k * k)
}

/// `(k, E)` for `k = -j … j`.
pub fn energy_table(
    twice_j: HalfInt,
    params: &TopParameters,
    convention: EnergyConvention,
) -> Result<Vec<(HalfInt, f64)>> {
    if twice_j.twice() < 0 {
        return Err(invalid!("negative j = {twice_j}"));
    }
    twice_j
        .projections()
        .rev()
        .map(|k| Ok((k, top_energy(twice_j, k, params, convention)?)))
        .collect()
}

/// Stationary state with space label `M` and body-frame amplitudes `ψ⁰_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TopState {
    pub twice_j: HalfInt,
    /// Amplitudes ordered `k = j … -j`.
    pub psi0: Vec<Complex64>,
    pub twice_m: HalfInt,
}

/// `ρ = ψ ψ†` for `ψ_{M'k} = δ_{M' M} ψ⁰_k`, normalized to unit trace.
pub fn top_pure_state(state: &TopState) -> Result<TopDensityMatrix> {
    let j = state.twice_j;
    j.check_projection(state.twice_m)
        .map_err(|e| invalid!("bad space projection: {e}"))?;
    let n = j.multiplicity();
    if state.psi0.len() != n {
        return Err(invalid!(
            "expected {n} body-frame amplitudes, got {}",
            state.psi0.len()
        ));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); n * n];
    let row = j.index_of(state.twice_m);
    amps[row * n..(row + 1) * n].copy_from_slice(&state.psi0);
    TopDensityMatrix::pure(j, &amps)
}

/// Density matrix of the top in the `(M, k)` pair basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TopDensityMatrix {
    twice_j: HalfInt,
    entries: CMatrix,
}

impl TopDensityMatrix {
    pub fn new(twice_j: HalfInt, entries: CMatrix) -> Result<Self> {
        let rho = Self::from_raw(twice_j, entries)?;
        rho.validate()?;
        Ok(rho)
    }

    pub fn from_raw(twice_j: HalfInt, entries: CMatrix) -> Result<Self> {
        if twice_j.twice() < 0 {
            return Err(invalid!("negative j = {twice_j}"));
        }
        let n = twice_j.multiplicity() * twice_j.multiplicity();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(invalid!(
                "top with j = {twice_j} needs a {n}x{n} matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(invalid!("top density matrix has non-finite entries"));
        }
        Ok(TopDensityMatrix { twice_j, entries })
    }

    pub fn maximally_mixed(twice_j: HalfInt) -> Self {
        let n = twice_j.multiplicity().pow(2);
        TopDensityMatrix {
            twice_j,
            entries: CMatrix::identity(n, n) * Complex64::from(1.0 / n as f64),
        }
    }

    /// Pure state from `(2j+1)²` amplitudes in pair order; normalized here.
    pub fn pure(twice_j: HalfInt, amplitudes: &[Complex64]) -> Result<Self> {
        let n = twice_j.multiplicity().pow(2);
        if amplitudes.len() != n {
            return Err(invalid!(
                "expected {n} amplitudes, got {}",
                amplitudes.len()
            ));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm == 0.0 || !norm.is_finite() {
            return Err(invalid!("zero-norm top state"));
        }
        let entries = CMatrix::from_fn(n, n, |r, c| amplitudes[r] * amplitudes[c].conj() / norm);
        Ok(TopDensityMatrix { twice_j, entries })
    }

    /// `ρ_{MkM'k'} = a_{MM'} b_{kk'}`.
    pub fn product(space: &DensityMatrix, body: &DensityMatrix) -> Result<Self> {
        if space.twice_j() != body.twice_j() {
            return Err(invalid!(
                "product of spin {} and spin {} factors",
                space.twice_j(),
                body.twice_j()
            ));
        }
        Ok(TopDensityMatrix {
            twice_j: space.twice_j(),
            entries: space.entries().kronecker(body.entries()),
        })
    }

    /// Random full-rank state of the `(2j+1)²`-dimensional space.
    pub fn random_mixed<R: Rng + ?Sized>(twice_j: HalfInt, rng: &mut R) -> Self {
        // a spin whose multiplicity is (2j+1)^2 has the same Ginibre law
        let big = HalfInt::from_twice((twice_j.multiplicity().pow(2) - 1) as i32);
        let rho = DensityMatrix::random_mixed(big, rng);
        TopDensityMatrix {
            twice_j,
            entries: rho.into_entries(),
        }
    }

    pub fn twice_j(&self) -> HalfInt {
        self.twice_j
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    fn pair(&self, m: HalfInt, k: HalfInt) -> usize {
        self.twice_j.index_of(m) * self.twice_j.multiplicity() + self.twice_j.index_of(k)
    }

    /// `ρ_{M k M' k'}`.
    pub fn entry(&self, m: HalfInt, k: HalfInt, m_prime: HalfInt, k_prime: HalfInt) -> Complex64 {
        self.entries[(self.pair(m, k), self.pair(m_prime, k_prime))]
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.entries)
    }

    pub fn trace_residual(&self) -> f64 {
        (linalg::trace(&self.entries) - Complex64::from(1.0)).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigen(&self.entries)
            .0
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest physical state in Frobenius norm.
    pub fn project_to_physical(&self) -> Self {
        TopDensityMatrix {
            twice_j: self.twice_j,
            entries: project_matrix(&self.entries),
        }
    }

    /// Uhlmann fidelity with another top state of the same `j`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.twice_j != other.twice_j {
            return Err(invalid!(
                "fidelity of top states with j = {} and j = {}",
                self.twice_j,
                other.twice_j
            ));
        }
        Ok(matrix_fidelity(&self.entries, &other.entries))
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_residual();
        if herm > HERMITIAN_TOLERANCE {
            return Err(invalid!(
                "top density matrix is not Hermitian (residual {herm:e})"
            ));
        }
        let tr = self.trace_residual();
        if tr > NORM_TOLERANCE {
            return Err(invalid!("top density matrix trace is off by {tr:e}"));
        }
        let low = self.min_eigenvalue();
        if low < -PSD_TOLERANCE {
            return Err(invalid!(
                "top density matrix has negative eigenvalue {low:e}"
            ));
        }
        Ok(())
    }
}

/// `w(i1, i2, u, u')` on the product of two grids.
///
/// Layout: `values[((i1·n + i2)·|grid_u| + p)·|grid_u'| + p']`, outcomes
/// ordered `j … -j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TopTomogram {
    twice_j: HalfInt,
    grid_u: QuadratureGrid,
    grid_uprime: QuadratureGrid,
    values: Vec<f64>,
}

impl TopTomogram {
    pub fn new(
        twice_j: HalfInt,
        grid_u: QuadratureGrid,
        grid_uprime: QuadratureGrid,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if twice_j.twice() < 0 {
            return Err(invalid!("negative j = {twice_j}"));
        }
        let expected = twice_j.multiplicity().pow(2) * grid_u.len() * grid_uprime.len();
        if values.len() != expected {
            return Err(invalid!(
                "top tomogram has {} values, expected {expected}",
                values.len()
            ));
        }
        for v in values.iter_mut() {
            if !v.is_finite() || *v < -NEGATIVE_CLAMP || *v > 1.0 + NEGATIVE_CLAMP {
                return Err(invalid!("probability {v} outside [0, 1]"));
            }
            *v = v.clamp(0.0, 1.0);
        }
        let tomo = TopTomogram {
            twice_j,
            grid_u,
            grid_uprime,
            values,
        };
        let residual = tomo.normalization_residual();
        if residual > NORMALIZATION_TOLERANCE {
            return Err(invalid!(
                "top tomogram is not normalized (worst point off by {residual:e})"
            ));
        }
        Ok(tomo)
    }

    pub fn twice_j(&self) -> HalfInt {
        self.twice_j
    }

    pub fn grid_u(&self) -> &QuadratureGrid {
        &self.grid_u
    }

    pub fn grid_uprime(&self) -> &QuadratureGrid {
        &self.grid_uprime
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn n_pairs(&self) -> usize {
        self.grid_u.len() * self.grid_uprime.len()
    }

    /// `w(i1, i2, point, point')` by outcome row indices.
    pub fn value(&self, i1: usize, i2: usize, point: usize, point_prime: usize) -> f64 {
        let n = self.twice_j.multiplicity();
        self.values[(i1 * n + i2) * self.n_pairs() + point * self.grid_uprime.len() + point_prime]
    }

    /// Largest `|Σ_{i1,i2} w - 1|` over all point pairs.
    pub fn normalization_residual(&self) -> f64 {
        let outcomes = self.twice_j.multiplicity().pow(2);
        let pairs = self.n_pairs();
        (0..pairs)
            .map(|p| {
                let s: f64 = (0..outcomes).map(|o| self.values[o * pairs + p]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `w(i1, i2, u, u')` in row-major `(i1, i2)` order.
pub fn top_forward_point(
    rho: &TopDensityMatrix,
    u: &EulerAngles,
    uprime: &EulerAngles,
) -> Vec<f64> {
    let table = WignerTable::global();
    let j = rho.twice_j();
    let d = table.d_matrix(j, u).expect("valid spin");
    let dp = table.d_matrix(j, uprime).expect("valid spin");
    let partial = space_contraction(&d, rho.entries());
    body_contraction(&dp, &partial)
}

/// `A_{i1}(p, l) = Σ_{n,s} D_{i1 n} ρ_{(n p),(s l)} D*_{i1 s}` for every `i1`.
fn space_contraction(d: &CMatrix, rho: &CMatrix) -> Vec<CMatrix> {
    let n = d.nrows();
    (0..n)
        .map(|i1| {
            CMatrix::from_fn(n, n, |p, l| {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    let da = d[(i1, a)];
                    for s in 0..n {
                        acc += da * rho[(a * n + p, s * n + l)] * d[(i1, s)].conj();
                    }
                }
                acc
            })
        })
        .collect()
}

/// `w(i1, i2) = Σ_{p,l} D'_{i2 p} A_{i1}(p, l) D'*_{i2 l}`.
fn body_contraction(dp: &CMatrix, partial: &[CMatrix]) -> Vec<f64> {
    let n = dp.nrows();
    let mut out = Vec::with_capacity(n * n);
    for a in partial {
        let da = dp * a;
        for i2 in 0..n {
            let w: Complex64 = (0..n).map(|l| da[(i2, l)] * dp[(i2, l)].conj()).sum();
            out.push(w.re);
        }
    }
    out
}

/// Tabulates the top tomogram on `grid_u × grid_uprime`.
pub fn top_forward_tomogram(
    rho: &TopDensityMatrix,
    grid_u: &QuadratureGrid,
    grid_uprime: &QuadratureGrid,
) -> Result<TopTomogram> {
    top_forward_tomogram_with(rho, grid_u, grid_uprime, Exec::default())
}

pub fn top_forward_tomogram_with(
    rho: &TopDensityMatrix,
    grid_u: &QuadratureGrid,
    grid_uprime: &QuadratureGrid,
    exec: Exec,
) -> Result<TopTomogram> {
    let j = rho.twice_j();
    grid_u.require_design(j)?;
    grid_uprime.require_design(j)?;
    let small_u = small_d_per_node(j, grid_u)?;
    let small_up = small_d_per_node(j, grid_uprime)?;
    let body: Vec<CMatrix> = (0..grid_uprime.len())
        .map(|p| {
            let (t, _, _) = grid_uprime.split_index(p);
            with_phases(j, &small_up[t], &grid_uprime.point(p).angles)
        })
        .collect();

    let rows = map_range(exec, grid_u.len(), |p| {
        let (t, _, _) = grid_u.split_index(p);
        let d = with_phases(j, &small_u[t], &grid_u.point(p).angles);
        let partial = space_contraction(&d, rho.entries());
        body.iter()
            .map(|dp| body_contraction(dp, &partial))
            .collect::<Vec<_>>()
    });

    let outcomes = j.multiplicity().pow(2);
    let (nu, nup) = (grid_u.len(), grid_uprime.len());
    let mut values = vec![0.0; outcomes * nu * nup];
    for (p, row) in rows.into_iter().enumerate() {
        for (pp, w) in row.into_iter().enumerate() {
            for (o, v) in w.into_iter().enumerate() {
                values[o * nu * nup + p * nup + pp] = v;
            }
        }
    }
    TopTomogram::new(j, grid_u.clone(), grid_uprime.clone(), values)
}

/// `(dΩ/8π²)`-weighted kernel `D^k_{0l}` on the axes of a grid, with the ψ
/// weight folded in; rows are axes `(θ, φ)`, columns `(k, l)` pairs.
fn axis_kernel(grid: &QuadratureGrid, max_k: usize) -> CMatrix {
    let table = WignerTable::global();
    let n_kl = (max_k + 1).pow(2);
    let mut out = CMatrix::zeros(grid.n_axes(), n_kl);
    let scale = grid.phi_weight() * grid.psi_weight() / GROUP_VOLUME;
    for a in 0..grid.n_axes() {
        let (t, p) = (a / grid.n_phi(), a % grid.n_phi());
        let node = grid.theta_nodes()[t];
        for k in 0..=max_k {
            let kk = HalfInt::from_twice(2 * k as i32);
            for l in -(k as i32)..=k as i32 {
                let d = table
                    .small_d(kk, HalfInt::ZERO, HalfInt::from_twice(2 * l), node.theta)
                    .expect("k within table");
                let col = k * k + (l + k as i32) as usize;
                out[(a, col)] =
                    Complex64::from_polar(node.weight * scale * d, f64::from(l) * grid.phi_at(p));
            }
        }
    }
    out
}

/// Inverts a top tomogram with the two-rotation 3j-kernel formula.
pub fn top_reconstruct(tomogram: &TopTomogram) -> Result<TopDensityMatrix> {
    top_reconstruct_with(tomogram, Exec::default())
}

pub fn top_reconstruct_with(tomogram: &TopTomogram, exec: Exec) -> Result<TopDensityMatrix> {
    let j = tomogram.twice_j();
    let (gu, gup) = (tomogram.grid_u(), tomogram.grid_uprime());
    gu.require_design(j)?;
    gup.require_design(j)?;
    let residual = tomogram.normalization_residual();
    if residual > NORMALIZATION_TOLERANCE {
        return Err(invalid!(
            "top tomogram is not normalized (worst point off by {residual:e})"
        ));
    }

    let n = j.multiplicity();
    let max_k = j.twice() as usize;
    let ku = axis_kernel(gu, max_k).transpose();
    let kup = axis_kernel(gup, max_k);

    // moments[(i1, i2)] = K_u^T · S · K_u', S summed over ψ and ψ'
    let moments: Vec<CMatrix> = map_range(exec, n * n, |o| {
        let (i1, i2) = (o / n, o % n);
        let s = DMatrix::from_fn(gu.n_axes(), gup.n_axes(), |a, ap| {
            let mut acc = 0.0;
            for q in 0..gu.n_psi() {
                for qp in 0..gup.n_psi() {
                    acc += tomogram.value(i1, i2, a * gu.n_psi() + q, ap * gup.n_psi() + qp);
                }
            }
            Complex64::from(acc)
        });
        &ku * s * &kup
    });

    let kernel = InversionKernel::new(j);
    let col = |k: usize, l: i32| k * k + (l + k as i32) as usize;
    let dim = n * n;
    let mut entries = CMatrix::zeros(dim, dim);
    for m1 in 0..n {
        for m1p in 0..n {
            let terms_u = kernel.terms(m1, m1p);
            for m2 in 0..n {
                for m2p in 0..n {
                    let terms_up = kernel.terms(m2, m2p);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for tu in &terms_u {
                        for tp in &terms_up {
                            let coeff = tu.coeff * tp.coeff;
                            let mut inner = Complex64::new(0.0, 0.0);
                            for i1 in 0..n {
                                for i2 in 0..n {
                                    inner += moments[i1 * n + i2]
                                        [(col(tu.k, tu.l), col(tp.k, tp.l))]
                                        * (tu.diag[i1] * tp.diag[i2]);
                                }
                            }
                            acc += inner * coeff;
                        }
                    }
                    entries[(m1 * n + m2, m1p * n + m2p)] = acc;
                }
            }
        }
    }
    TopDensityMatrix::from_raw(j, entries)
}
