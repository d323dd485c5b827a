//! Finite-shot measurement simulation.
//!
//! Each record holds the outcome counts of `n` projective measurements of
//! `J·n(u)` on one axis. Outcomes are drawn by inverse CDF over `i = j … -j`,
//! one uniform deviate per shot, from a PCG-XSH-RR 64/32 generator
//! ([`rand_pcg::Pcg32`]) seeded with [`rand::SeedableRng::seed_from_u64`].
//! Grid-wide sampling derives one seed per axis with [`mix_seed`], so results
//! do not depend on how axes are scheduled across threads.
//!
//! None of the statistical thresholds used with this module come from the
//! underlying theory; they are chosen for this crate and checked empirically.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;

use crate::angular::{EulerAngles, HalfInt};
use crate::error::{domain, invalid, Result};
use crate::exec::{map_range, Exec};
use crate::quadrature::QuadratureGrid;
use crate::spin::{forward_point, reconstruct_with, ReconstructOptions, SpinTomogram};
use crate::states::DensityMatrix;

/// Number of independent seeds averaged per budget in [`convergence_study`].
pub const CONVERGENCE_REPEATS: u64 = 10;

/// Two axes closer than this in θ and φ count as the same axis.
const AXIS_MATCH_TOLERANCE: f64 = 1e-12;

/// Outcome counts on one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    pub axis: EulerAngles,
    pub twice_j: HalfInt,
    /// Counts ordered `i = j … -j`.
    pub counts: Vec<u64>,
    pub total: u64,
    pub seed: u64,
}

impl ShotRecord {
    /// Builds a record from given counts; `total` is their sum.
    pub fn new(axis: EulerAngles, twice_j: HalfInt, counts: Vec<u64>, seed: u64) -> Result<Self> {
        if counts.len() != twice_j.multiplicity() {
            return Err(invalid!(
                "spin {twice_j} has {} outcomes, record has {}",
                twice_j.multiplicity(),
                counts.len()
            ));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(invalid!("record with no shots"));
        }
        Ok(ShotRecord {
            axis,
            twice_j,
            counts,
            total,
            seed,
        })
    }

    /// Count for projection `i`.
    pub fn count(&self, twice_i: HalfInt) -> u64 {
        self.counts[self.twice_j.index_of(twice_i)]
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }
}

/// SplitMix64 finalizer of `seed` combined with `index`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `n` outcomes from `w(·, axis)`.
pub fn sample(rho: &DensityMatrix, axis: &EulerAngles, n: u64, seed: u64) -> Result<ShotRecord> {
    if n == 0 {
        return Err(domain!("number of shots must be at least 1"));
    }
    let w = forward_point(rho, axis);
    let mut cdf = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for p in &w {
        acc += p;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    let mut rng = Pcg32::seed_from_u64(seed);
    let mut counts = vec![0u64; w.len()];
    for _ in 0..n {
        let x: f64 = rng.random::<f64>() * acc;
        let i = cdf.partition_point(|&c| c <= x).min(last);
        counts[i] += 1;
    }
    Ok(ShotRecord {
        axis: *axis,
        twice_j: rho.twice_j(),
        counts,
        total: n,
        seed,
    })
}

/// One record of `n` shots per `(θ, φ)` axis of the grid, seeds from [`mix_seed`].
pub fn sample_grid(
    rho: &DensityMatrix,
    grid: &QuadratureGrid,
    n: u64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<ShotRecord>> {
    map_range(exec, grid.n_axes(), |a| {
        sample(rho, &grid.axis(a), n, mix_seed(seed, a as u64))
    })
    .into_iter()
    .collect()
}

fn same_axis(a: &EulerAngles, b: &EulerAngles) -> bool {
    let dphi = (a.phi() - b.phi()).abs();
    let dphi = dphi.min(std::f64::consts::TAU - dphi);
    (a.theta() - b.theta()).abs() < AXIS_MATCH_TOLERANCE && dphi < AXIS_MATCH_TOLERANCE
}

/// Frequencies on every grid axis, replicated over `ψ`.
///
/// Records on the same axis are pooled. Every axis must be covered.
pub fn empirical_tomogram(records: &[ShotRecord], grid: &QuadratureGrid) -> Result<SpinTomogram> {
    let first = records.first().ok_or_else(|| invalid!("no shot records"))?;
    let j = first.twice_j;
    if let Some(r) = records.iter().find(|r| r.twice_j != j) {
        return Err(invalid!("records mix spin {j} and spin {}", r.twice_j));
    }
    let n_out = j.multiplicity();
    let mut pooled = vec![vec![0u64; n_out]; grid.n_axes()];
    let mut totals = vec![0u64; grid.n_axes()];
    for a in 0..grid.n_axes() {
        let axis = grid.axis(a);
        for r in records.iter().filter(|r| same_axis(&r.axis, &axis)) {
            for (dst, c) in pooled[a].iter_mut().zip(&r.counts) {
                *dst += c;
            }
            totals[a] += r.total;
        }
        if totals[a] == 0 {
            return Err(invalid!(
                "no records for grid axis theta = {}, phi = {}",
                axis.theta(),
                axis.phi()
            ));
        }
    }
    let npts = grid.len();
    let mut values = vec![0.0; n_out * npts];
    for p in 0..npts {
        let a = grid.axis_of(p);
        for i in 0..n_out {
            values[i * npts + p] = pooled[a][i] as f64 / totals[a] as f64;
        }
    }
    SpinTomogram::new(j, grid.clone(), values)
}

/// One row of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergencePoint {
    /// Shots per axis.
    pub shots: u64,
    /// Mean Frobenius distance of the projected reconstruction from the input.
    pub mean_error: f64,
}

/// Reconstruction error against shots per axis, averaged over
/// [`CONVERGENCE_REPEATS`] seeds derived from `seed`.
pub fn convergence_study(
    rho: &DensityMatrix,
    grid: &QuadratureGrid,
    budgets: &[u64],
    seed: u64,
) -> Result<Vec<ConvergencePoint>> {
    convergence_study_with(rho, grid, budgets, seed, Exec::default())
}

pub fn convergence_study_with(
    rho: &DensityMatrix,
    grid: &QuadratureGrid,
    budgets: &[u64],
    seed: u64,
    exec: Exec,
) -> Result<Vec<ConvergencePoint>> {
    if budgets.is_empty() {
        return Err(domain!("empty shot budget list"));
    }
    if budgets[0] == 0 || budgets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain!("shot budgets must be positive and increasing"));
    }
    grid.require_design(rho.twice_j())?;
    let opts = ReconstructOptions {
        project: true,
        exec,
    };
    budgets
        .iter()
        .enumerate()
        .map(|(b, &shots)| {
            let mut sum = 0.0;
            for r in 0..CONVERGENCE_REPEATS {
                let s = mix_seed(mix_seed(seed, b as u64), r);
                let records = sample_grid(rho, grid, shots, s, exec)?;
                let est = reconstruct_with(&empirical_tomogram(&records, grid)?, &opts)?;
                sum += (est.entries() - rho.entries()).norm();
            }
            Ok(ConvergencePoint {
                shots,
                mean_error: sum / CONVERGENCE_REPEATS as f64,
            })
        })
        .collect()
}

/// Least-squares slope of `ln(error)` against `ln(shots)`.
pub fn log_log_slope(points: &[ConvergencePoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(domain!("need at least two points for a slope"));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p.shots as f64).ln(), p.mean_error.ln()))
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_grid, minimal_grid};
    use crate::spin::forward_tomogram;
    use crate::states::Fiducial;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn deterministic_outcome() {
        let rho = DensityMatrix::diagonal(h(1), &[1.0, 0.0]).unwrap();
        let rec = sample(&rho, &EulerAngles::IDENTITY, 500, 1).unwrap();
        assert_eq!(rec.counts, vec![500, 0]);
        assert_eq!(rec.count(h(1)), 500);
        assert!(sample(&rho, &EulerAngles::IDENTITY, 0, 1).is_err());
    }

    #[test]
    fn same_seed_same_record() {
        let rho = Fiducial::XPlus.density();
        let u = EulerAngles::axis(1.0, 0.3).unwrap();
        let a = sample(&rho, &u, 1000, 42).unwrap();
        assert_eq!(a, sample(&rho, &u, 1000, 42).unwrap());
        assert_ne!(a, sample(&rho, &u, 1000, 43).unwrap());
    }

    #[test]
    fn fair_coin_within_five_sigma() {
        let rho = DensityMatrix::maximally_mixed(h(1));
        let n = 1_000_000u64;
        let rec = sample(&rho, &EulerAngles::IDENTITY, n, 9).unwrap();
        let sigma = (n as f64 / 4.0).sqrt();
        for &c in &rec.counts {
            assert!((c as f64 - n as f64 / 2.0).abs() < 5.0 * sigma);
        }
        assert_eq!(rec.counts.iter().sum::<u64>(), n);
    }

    #[test]
    fn x_plus_on_x_axis_is_certain() {
        let rho = Fiducial::XPlus.density();
        let u = EulerAngles::axis(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let rec = sample(&rho, &u, 10_000, 5).unwrap();
        assert!(rec.frequencies()[0] > 0.9999);
    }

    #[test]
    fn exact_records_reproduce_forward_tomogram() {
        let rho = DensityMatrix::diagonal(h(2), &[0.5, 0.3, 0.2]).unwrap();
        let grid = build_grid(h(2));
        let scale = (1u64 << 52) as f64;
        let records: Vec<ShotRecord> = (0..grid.n_axes())
            .map(|a| {
                let axis = grid.axis(a);
                let counts = forward_point(&rho, &axis)
                    .iter()
                    .map(|w| (w * scale).round() as u64)
                    .collect();
                ShotRecord::new(axis, h(2), counts, 0).unwrap()
            })
            .collect();
        let emp = empirical_tomogram(&records, &grid).unwrap();
        let exact = forward_tomogram(&rho, &grid).unwrap();
        for (a, b) in emp.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn one_shot_records_are_one_hot() {
        let rho = Fiducial::YPlus.density();
        let grid = minimal_grid(h(1));
        let records = sample_grid(&rho, &grid, 1, 3, Exec::default()).unwrap();
        let tomo = empirical_tomogram(&records, &grid).unwrap();
        for p in 0..grid.len() {
            let w = tomo.probabilities_at(p);
            assert!(w.iter().all(|&x| x == 0.0 || x == 1.0));
            assert_eq!(w.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn missing_axis_is_rejected() {
        let rho = Fiducial::ZPlus.density();
        let grid = minimal_grid(h(1));
        let mut records = sample_grid(&rho, &grid, 10, 3, Exec::default()).unwrap();
        records.pop();
        assert!(empirical_tomogram(&records, &grid).is_err());
    }

    #[test]
    fn grid_sampling_ignores_scheduling() {
        let rho = Fiducial::XMinus.density();
        let grid = build_grid(h(1));
        let a = sample_grid(&rho, &grid, 200, 77, Exec::Sequential).unwrap();
        let b = sample_grid(&rho, &grid, 200, 77, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<ConvergencePoint> = [100u64, 1000, 10000]
            .iter()
            .map(|&n| ConvergencePoint {
                shots: n,
                mean_error: 3.0 / (n as f64).sqrt(),
            })
            .collect();
        assert!((log_log_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn budgets_must_increase() {
        let rho = Fiducial::ZPlus.density();
        let grid = minimal_grid(h(1));
        assert!(convergence_study(&rho, &grid, &[100, 100], 0).is_err());
        assert!(convergence_study(&rho, &grid, &[], 0).is_err());
    }
}
