//! Angular-momentum special functions.
//!
//! Quantum numbers are carried as doubled integers ([`HalfInt`]) so that
//! spin-1/2 bookkeeping never compares floats. Rotation matrices use the
//! phase convention of the two-level rotation
//!
//! ```text
//! ⎡ cos(θ/2)·e^{ i(φ+ψ)/2}   sin(θ/2)·e^{-i(φ-ψ)/2} ⎤
//! ⎣-sin(θ/2)·e^{ i(φ-ψ)/2}   cos(θ/2)·e^{-i(φ+ψ)/2} ⎦
//! ```
//!
//! generalised to any `j` as `D^j_{ab}(φ,θ,ψ) = e^{iaψ} d^j_{ab}(θ) e^{ibφ}`,
//! where `d^j_{ab}(θ)` is the transpose of the textbook Wigner small-d
//! (equivalently `d^j = exp(+iθ J_y)`). With this choice the diagonal of
//! `D ρ D†` depends on `(θ, φ)` only.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A half-integer stored as twice its value, so `j = 1/2` is `HalfInt(1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) * 0.5
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Number of projections `2j + 1` for a non-negative `j`.
    pub fn multiplicity(self) -> usize {
        debug_assert!(self.0 >= 0);
        self.0 as usize + 1
    }

    /// Projections `m = j, j-1, …, -j`, the row order used everywhere in the crate.
    pub fn projections(self) -> impl DoubleEndedIterator<Item = HalfInt> + Clone {
        let j = self.0;
        (0..=j.max(-1)).map(move |n| HalfInt(j - 2 * n))
    }

    /// Row index of projection `m` in a `j`-block (`m = j` is row 0).
    pub fn index_of(self, m: HalfInt) -> usize {
        ((self.0 - m.0) / 2) as usize
    }

    /// Inverse of [`HalfInt::index_of`].
    pub fn projection_at(self, index: usize) -> HalfInt {
        HalfInt(self.0 - 2 * index as i32)
    }

    /// Checks that `m` is an admissible projection of `self` (taken as `j`).
    pub fn check_projection(self, m: HalfInt) -> Result<()> {
        if self.0 < 0 {
            return Err(domain!("negative angular momentum j = {self}"));
        }
        if m.0.abs() > self.0 {
            return Err(domain!("projection {m} exceeds j = {self}"));
        }
        if (self.0 - m.0) % 2 != 0 {
            return Err(domain!(
                "projection {m} has the wrong parity for j = {self}"
            ));
        }
        Ok(())
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl std::str::FromStr for HalfInt {
    type Err = crate::Error;

    /// Accepts `"3"`, `"-1"`, `"3/2"`, `"-1/2"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || crate::Error::Format(format!("not a half-integer: {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            Some((num, "2")) => {
                let n: i32 = num.trim().parse().map_err(|_| bad())?;
                if n % 2 == 0 {
                    return Err(bad());
                }
                Ok(HalfInt(n))
            }
            Some(_) => Err(bad()),
            None => s.parse::<i32>().map(|n| HalfInt(2 * n)).map_err(|_| bad()),
        }
    }
}

/// `(-1)^n` for an integer exponent given as a doubled half-integer.
pub(crate) fn parity_sign(twice_exponent: i32) -> f64 {
    debug_assert!(twice_exponent % 2 == 0, "non-integer exponent of -1");
    if (twice_exponent / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Euler angles `(φ, θ, ψ)` in radians; `φ, ψ ∈ [0, 2π)`, `θ ∈ [0, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    phi: f64,
    theta: f64,
    psi: f64,
}

impl EulerAngles {
    pub const IDENTITY: EulerAngles = EulerAngles {
        phi: 0.0,
        theta: 0.0,
        psi: 0.0,
    };

    /// Reduces `phi` and `psi` modulo 2π; rejects `theta` outside `[0, π]`.
    pub fn new(phi: f64, theta: f64, psi: f64) -> Result<Self> {
        if !(phi.is_finite() && theta.is_finite() && psi.is_finite()) {
            return Err(domain!("non-finite Euler angle ({phi}, {theta}, {psi})"));
        }
        const SLACK: f64 = 1e-12;
        if !(-SLACK..=PI + SLACK).contains(&theta) {
            return Err(domain!("theta = {theta} outside [0, pi]"));
        }
        Ok(EulerAngles {
            phi: reduce_angle(phi),
            theta: theta.clamp(0.0, PI),
            psi: reduce_angle(psi),
        })
    }

    /// Measurement axis with polar angle `theta` and azimuth `phi`; `psi = 0`.
    pub fn axis(theta: f64, phi: f64) -> Result<Self> {
        Self::new(phi, theta, 0.0)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }
}

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Factorial cache backing the small-d and 3j evaluations.
///
/// Immutable after construction and valid for every `j ≤ twice_j_max / 2`,
/// including 3j symbols of the form `(j j k)` with `k ≤ 2j`.
#[derive(Clone, Debug)]
pub struct WignerTable {
    twice_j_max: HalfInt,
    ln_fact: Vec<f64>,
}

/// Largest `2j` served by [`WignerTable::global`].
pub const GLOBAL_TWICE_J_MAX: i32 = 60;

impl WignerTable {
    pub fn new(twice_j_max: HalfInt) -> Self {
        let len = 2 * twice_j_max.twice().max(0) as usize + 2;
        let mut ln_fact = Vec::with_capacity(len);
        let mut fact = 1.0_f64;
        let mut acc = 0.0_f64;
        for n in 0..len {
            if n > 0 {
                fact *= n as f64;
                acc += (n as f64).ln();
            }
            // the direct product stays exact-to-rounding up to 170!
            ln_fact.push(if n <= 170 { fact.ln() } else { acc });
        }
        WignerTable {
            twice_j_max,
            ln_fact,
        }
    }

    /// Shared table for `2j ≤ 60`.
    pub fn global() -> &'static WignerTable {
        static TABLE: OnceLock<WignerTable> = OnceLock::new();
        TABLE.get_or_init(|| WignerTable::new(HalfInt::from_twice(GLOBAL_TWICE_J_MAX)))
    }

    pub fn twice_j_max(&self) -> HalfInt {
        self.twice_j_max
    }

    fn ln_fact(&self, twice_n: i32) -> f64 {
        debug_assert!(twice_n >= 0 && twice_n % 2 == 0);
        self.ln_fact[(twice_n / 2) as usize]
    }

    fn check_j(&self, j: HalfInt) -> Result<()> {
        if j.twice() > self.twice_j_max.twice() {
            return Err(domain!(
                "j = {j} exceeds the table limit {}",
                self.twice_j_max
            ));
        }
        Ok(())
    }

    /// Rotation core `d^j_{ab}(θ)` (transpose of the textbook small-d).
    pub fn small_d(&self, j: HalfInt, a: HalfInt, b: HalfInt, theta: f64) -> Result<f64> {
        self.check_j(j)?;
        j.check_projection(a)?;
        j.check_projection(b)?;
        Ok(self.small_d_unchecked(j, a, b, theta))
    }

    fn small_d_unchecked(&self, j: HalfInt, a: HalfInt, b: HalfInt, theta: f64) -> f64 {
        let (tj, ta, tb) = (j.twice(), a.twice(), b.twice());
        let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
        // textbook d_{m'm} with m' = b, m = a
        let prefactor = 0.5
            * (self.ln_fact(tj + tb)
                + self.ln_fact(tj - tb)
                + self.ln_fact(tj + ta)
                + self.ln_fact(tj - ta));
        let k_min = 0.max((ta - tb) / 2);
        let k_max = ((tj + ta) / 2).min((tj - tb) / 2);
        let mut terms: Vec<f64> = Vec::with_capacity((k_max - k_min + 1).max(0) as usize);
        for k in k_min..=k_max {
            let tk = 2 * k;
            let cos_pow = (2 * tj + ta - tb - 2 * tk) / 2;
            let sin_pow = (tb - ta + 2 * tk) / 2;
            let ln_mag = prefactor
                - self.ln_fact(tj + ta - tk)
                - self.ln_fact(tk)
                - self.ln_fact(tb - ta + tk)
                - self.ln_fact(tj - tb - tk);
            let sign = parity_sign(tb - ta + tk);
            terms.push(sign * ln_mag.exp() * c.powi(cos_pow) * s.powi(sin_pow));
        }
        terms.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
        terms.iter().sum()
    }

    /// `D^j_{ab}(φ, θ, ψ) = e^{iaψ} d^j_{ab}(θ) e^{ibφ}`.
    pub fn big_d(&self, j: HalfInt, a: HalfInt, b: HalfInt, u: &EulerAngles) -> Result<Complex64> {
        let d = self.small_d(j, a, b, u.theta)?;
        let phase = a.value() * u.psi + b.value() * u.phi;
        Ok(Complex64::from_polar(d, phase))
    }

    /// Real matrix `[d^j_{ab}(θ)]` with rows and columns ordered `j … -j`.
    pub fn small_d_matrix(&self, j: HalfInt, theta: f64) -> Result<DMatrix<f64>> {
        self.check_j(j)?;
        if j.twice() < 0 {
            return Err(domain!("negative angular momentum j = {j}"));
        }
        let n = j.multiplicity();
        Ok(DMatrix::from_fn(n, n, |r, c| {
            self.small_d_unchecked(j, j.projection_at(r), j.projection_at(c), theta)
        }))
    }

    /// Unitary rotation matrix `[D^j_{ab}(u)]`, rows and columns ordered `j … -j`.
    pub fn d_matrix(&self, j: HalfInt, u: &EulerAngles) -> Result<DMatrix<Complex64>> {
        Ok(with_phases(j, &self.small_d_matrix(j, u.theta)?, u))
    }

    /// Wigner 3j symbol by the Racah formula.
    ///
    /// Returns 0 when the triangle rule or `m1 + m2 + m3 = 0` fails.
    #[allow(clippy::too_many_arguments)]
    pub fn three_j(
        &self,
        j1: HalfInt,
        j2: HalfInt,
        j3: HalfInt,
        m1: HalfInt,
        m2: HalfInt,
        m3: HalfInt,
    ) -> Result<f64> {
        j1.check_projection(m1)?;
        j2.check_projection(m2)?;
        j3.check_projection(m3)?;
        let (a, b, c) = (j1.twice(), j2.twice(), j3.twice());
        let (x, y, z) = (m1.twice(), m2.twice(), m3.twice());
        if x + y + z != 0 {
            return Ok(0.0);
        }
        if (a + b + c) % 2 != 0 || c > a + b || c < (a - b).abs() {
            return Ok(0.0);
        }
        if ((a + b + c) / 2 + 1) as usize >= self.ln_fact.len() {
            return Err(domain!(
                "3j arguments ({j1} {j2} {j3}) exceed the table limit {}",
                self.twice_j_max
            ));
        }

        let ln_triangle =
            self.ln_fact(a + b - c) + self.ln_fact(a - b + c) + self.ln_fact(-a + b + c)
                - self.ln_fact(a + b + c + 2);
        let ln_proj = self.ln_fact(a + x)
            + self.ln_fact(a - x)
            + self.ln_fact(b + y)
            + self.ln_fact(b - y)
            + self.ln_fact(c + z)
            + self.ln_fact(c - z);
        let ln_pre = 0.5 * (ln_triangle + ln_proj);

        // all bounds below are integers (in units of one, not halves)
        let t_min = 0.max((b - c - x) / 2).max((a - c + y) / 2);
        let t_max = ((a + b - c) / 2).min((a - x) / 2).min((b + y) / 2);
        let mut terms = Vec::with_capacity((t_max - t_min + 1).max(0) as usize);
        for t in t_min..=t_max {
            let tt = 2 * t;
            let ln_den = self.ln_fact(tt)
                + self.ln_fact(c - b + tt + x)
                + self.ln_fact(c - a + tt - y)
                + self.ln_fact(a + b - c - tt)
                + self.ln_fact(a - tt - x)
                + self.ln_fact(b - tt + y);
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(sign * (ln_pre - ln_den).exp());
        }
        terms.sort_by(|p, q| q.abs().total_cmp(&p.abs()));
        let sum: f64 = terms.iter().sum();
        Ok(parity_sign(a - b - z) * sum)
    }
}

/// `D^j(u)` from a precomputed `d^j(θ)` for the same `θ`.
pub(crate) fn with_phases(j: HalfInt, small: &DMatrix<f64>, u: &EulerAngles) -> DMatrix<Complex64> {
    let phases: Vec<(Complex64, Complex64)> = j
        .projections()
        .map(|m| {
            (
                Complex64::from_polar(1.0, m.value() * u.psi),
                Complex64::from_polar(1.0, m.value() * u.phi),
            )
        })
        .collect();
    let n = j.multiplicity();
    DMatrix::from_fn(n, n, |r, c| phases[r].0 * small[(r, c)] * phases[c].1)
}

/// `d^j_{ab}(θ)` from the shared table.
pub fn wigner_small_d(j: HalfInt, a: HalfInt, b: HalfInt, theta: f64) -> Result<f64> {
    WignerTable::global().small_d(j, a, b, theta)
}

/// `D^j_{ab}(u)` from the shared table.
pub fn wigner_d(j: HalfInt, a: HalfInt, b: HalfInt, u: &EulerAngles) -> Result<Complex64> {
    WignerTable::global().big_d(j, a, b, u)
}

/// Full rotation matrix `D^j(u)` from the shared table.
pub fn d_matrix(j: HalfInt, u: &EulerAngles) -> Result<DMatrix<Complex64>> {
    WignerTable::global().d_matrix(j, u)
}

/// 3j symbol from the shared table.
pub fn three_j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<f64> {
    WignerTable::global().three_j(j1, j2, j3, m1, m2, m3)
}
