//! Spin states: spinors, density matrices, Bloch vectors and the six
//! spin-1/2 fiducial states.
//!
//! Rows and columns run over `m = j, j-1, …, -j`, so for spin 1/2 the first
//! component is the `+1/2` amplitude.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::angular::HalfInt;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};

/// Tolerance for unit norm and unit trace.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Tolerance on `|ρ - ρ†|`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Most negative eigenvalue accepted as positive semidefinite.
pub const PSD_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Spinor {
    twice_j: HalfInt,
    amplitudes: Vec<Complex64>,
}

impl Spinor {
    pub fn new(twice_j: HalfInt, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_spin(twice_j)?;
        if amplitudes.len() != twice_j.multiplicity() {
            return Err(invalid!(
                "spin {twice_j} needs {} amplitudes, got {}",
                twice_j.multiplicity(),
                amplitudes.len()
            ));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid!("spinor norm^2 = {norm}, expected 1"));
        }
        Ok(Spinor {
            twice_j,
            amplitudes,
        })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(twice_j: HalfInt, amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(invalid!("cannot normalize a zero or non-finite spinor"));
        }
        Self::new(twice_j, amplitudes.into_iter().map(|a| a / norm).collect())
    }

    pub fn twice_j(&self) -> HalfInt {
        self.twice_j
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Amplitude of projection `m`.
    pub fn amplitude(&self, m: HalfInt) -> Complex64 {
        self.amplitudes[self.twice_j.index_of(m)]
    }
}

fn check_spin(twice_j: HalfInt) -> Result<()> {
    if twice_j.twice() < 0 {
        return Err(invalid!("negative spin {twice_j}"));
    }
    Ok(())
}

/// Hermitian, unit-trace, positive semidefinite matrix of spin `j`.
///
/// Matrices produced by reconstruction from noisy data are stored without the
/// positivity check; call [`DensityMatrix::validate`] or
/// [`crate::spin::project_to_physical`] before relying on it.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    twice_j: HalfInt,
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(twice_j: HalfInt, entries: CMatrix) -> Result<Self> {
        let rho = Self::from_raw(twice_j, entries)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix after checking only its shape.
    pub fn from_raw(twice_j: HalfInt, entries: CMatrix) -> Result<Self> {
        check_spin(twice_j)?;
        let n = twice_j.multiplicity();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(invalid!(
                "spin {twice_j} needs a {n}x{n} matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(invalid!("density matrix has non-finite entries"));
        }
        Ok(DensityMatrix { twice_j, entries })
    }

    pub fn maximally_mixed(twice_j: HalfInt) -> Self {
        let n = twice_j.multiplicity();
        DensityMatrix {
            twice_j,
            entries: CMatrix::identity(n, n) * Complex64::from(1.0 / n as f64),
        }
    }

    /// Diagonal state with the given populations (ordered `j … -j`).
    pub fn diagonal(twice_j: HalfInt, populations: &[f64]) -> Result<Self> {
        let n = twice_j.multiplicity();
        if populations.len() != n {
            return Err(invalid!(
                "expected {n} populations, got {}",
                populations.len()
            ));
        }
        let mut m = CMatrix::zeros(n, n);
        for (k, &p) in populations.iter().enumerate() {
            m[(k, k)] = Complex64::from(p);
        }
        Self::new(twice_j, m)
    }

    /// Random full-rank state from the Ginibre ensemble, `G G† / Tr(G G†)`.
    pub fn random_mixed<R: Rng + ?Sized>(twice_j: HalfInt, rng: &mut R) -> Self {
        let n = twice_j.multiplicity();
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = &g * g.adjoint();
        let tr = linalg::trace(&m).re;
        DensityMatrix {
            twice_j,
            entries: linalg::hermitian_part(&(m / Complex64::from(tr))),
        }
    }

    /// Random pure state with Haar-distributed amplitudes.
    pub fn random_pure<R: Rng + ?Sized>(twice_j: HalfInt, rng: &mut R) -> Self {
        let amps = (0..twice_j.multiplicity())
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        density_from_spinor(&Spinor::normalized(twice_j, amps).expect("gaussian vector is nonzero"))
    }

    pub fn twice_j(&self) -> HalfInt {
        self.twice_j
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    /// `ρ_{m m'}`.
    pub fn entry(&self, m: HalfInt, m_prime: HalfInt) -> Complex64 {
        self.entries[(self.twice_j.index_of(m), self.twice_j.index_of(m_prime))]
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.entries)
    }

    /// `|Tr ρ - 1|`.
    pub fn trace_residual(&self) -> f64 {
        (linalg::trace(&self.entries) - ONE).norm()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.entries)
            .0
            .iter()
            .copied()
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_residual();
        if herm > HERMITIAN_TOLERANCE {
            return Err(invalid!(
                "density matrix is not Hermitian (residual {herm:e})"
            ));
        }
        let tr = self.trace_residual();
        if tr > NORM_TOLERANCE {
            return Err(invalid!("density matrix trace is off by {tr:e}"));
        }
        let low = self.min_eigenvalue();
        if low < -PSD_TOLERANCE {
            return Err(invalid!("density matrix has negative eigenvalue {low:e}"));
        }
        Ok(())
    }
}

/// Mean spin projections `(s̄_x, s̄_y, s̄_z)` of a spin-1/2 state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochVector {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let s = BlochVector { sx, sy, sz };
        if !(sx.is_finite() && sy.is_finite() && sz.is_finite()) {
            return Err(invalid!("non-finite Bloch vector"));
        }
        if s.norm_sqr() > 0.25 + NORM_TOLERANCE {
            return Err(invalid!("|s|^2 = {} exceeds 1/4", s.norm_sqr()));
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sx * self.sx + self.sy * self.sy + self.sz * self.sz
    }

    /// Mean spin of a spin-1/2 density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        if rho.twice_j() != HalfInt::HALF {
            return Err(invalid!(
                "Bloch vectors exist for spin 1/2 only, got {}",
                rho.twice_j()
            ));
        }
        let e = rho.entries();
        // ρ_{+-} = s̄_x - i s̄_y
        Ok(BlochVector {
            sx: e[(1, 0)].re,
            sy: e[(1, 0)].im,
            sz: e[(0, 0)].re - 0.5,
        })
    }
}

/// `ψ ψ†`.
pub fn density_from_spinor(psi: &Spinor) -> DensityMatrix {
    let n = psi.amplitudes.len();
    let entries = CMatrix::from_fn(n, n, |r, c| psi.amplitudes[r] * psi.amplitudes[c].conj());
    DensityMatrix {
        twice_j: psi.twice_j,
        entries,
    }
}

/// `[[1/2 + s̄_z, s̄_x - i s̄_y], [s̄_x + i s̄_y, 1/2 - s̄_z]]`.
pub fn density_from_bloch(s: &BlochVector) -> DensityMatrix {
    let s = BlochVector::new(s.sx, s.sy, s.sz).expect("BlochVector is validated on construction");
    let entries = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::from(0.5 + s.sz),
            Complex64::new(s.sx, -s.sy),
            Complex64::new(s.sx, s.sy),
            Complex64::from(0.5 - s.sz),
        ],
    );
    DensityMatrix {
        twice_j: HalfInt::HALF,
        entries,
    }
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    (rho.entries() * rho.entries()).trace().re
}

/// Uhlmann fidelity `(Tr √(√a b √a))²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.twice_j() != b.twice_j() {
        return Err(invalid!(
            "fidelity of spin {} and spin {} states",
            a.twice_j(),
            b.twice_j()
        ));
    }
    Ok(matrix_fidelity(a.entries(), b.entries()))
}

pub(crate) fn matrix_fidelity(a: &CMatrix, b: &CMatrix) -> f64 {
    let sqrt_a = linalg::spectral_map(a, |x| x.max(0.0).sqrt());
    let inner = &sqrt_a * b * &sqrt_a;
    let (values, _) = linalg::hermitian_eigen(&inner);
    let root_sum: f64 = values.iter().map(|&x| x.max(0.0).sqrt()).sum();
    (root_sum * root_sum).clamp(0.0, 1.0)
}

/// Pauli matrices `σ_x, σ_y, σ_z` in the `(+1/2, -1/2)` basis.
///
/// `σ_y` is the Hermitian `[[0, -i], [i, 0]]`.
pub fn pauli() -> [CMatrix; 3] {
    [
        DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// The six spin-1/2 eigenstates of `σ_x`, `σ_y`, `σ_z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fiducial {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
    ZPlus,
    ZMinus,
}

impl Fiducial {
    pub const ALL: [Fiducial; 6] = [
        Fiducial::XPlus,
        Fiducial::XMinus,
        Fiducial::YPlus,
        Fiducial::YMinus,
        Fiducial::ZPlus,
        Fiducial::ZMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fiducial::XPlus => "x+",
            Fiducial::XMinus => "x-",
            Fiducial::YPlus => "y+",
            Fiducial::YMinus => "y-",
            Fiducial::ZPlus => "z+",
            Fiducial::ZMinus => "z-",
        }
    }

    pub fn spinor(self) -> Spinor {
        let r = Complex64::from(FRAC_1_SQRT_2);
        let amps = match self {
            Fiducial::XPlus => [r, r],
            Fiducial::XMinus => [r, -r],
            Fiducial::YPlus => [r, I * r],
            Fiducial::YMinus => [r, -I * r],
            Fiducial::ZPlus => [ONE, ZERO],
            Fiducial::ZMinus => [ZERO, ONE],
        };
        Spinor::new(HalfInt::HALF, amps.to_vec()).expect("fiducial spinors are normalized")
    }

    pub fn density(self) -> DensityMatrix {
        density_from_spinor(&self.spinor())
    }
}

impl fmt::Display for Fiducial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fiducial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // accept the unicode minus too
        let norm = s.trim().to_ascii_lowercase().replace('\u{2212}', "-");
        Fiducial::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::Format(format!("unknown fiducial state {s:?}")))
    }
}

/// `fiducial("y+")` and friends.
pub fn fiducial(name: &str) -> Result<Spinor> {
    Ok(name.parse::<Fiducial>()?.spinor())
}
