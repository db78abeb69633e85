//! Time-domain wavepacket evolution synthesized from stationary scattering
//! states.
//!
//! The packet is a superposition of the unit-incoming states `psi(q, z)`
//! weighted by a Gaussian momentum distribution:
//!
//! ```text
//! phi(z, t) = (2 pi)^(-1/2) * Integral  exp(-i q^2 t) psi(q, z) f0(q) dq
//! f0(q)     = N * exp(-a^2 (q - q0)^2 / 2) * exp(-i q z0)
//! ```
//!
//! with `N` fixed so the discrete quadrature of `|f0|^2` over the sampled
//! momentum grid is exactly 1; the `(2 pi)^(-1/2)` prefactor then makes the
//! synthesized packet carry unit norm. The free dispersion phase `q^2 t` is
//! exact for stationary states of eigenvalue `q^2`.
//!
//! Momenta are processed in ascending order in fixed-size blocks (solves
//! within a block run in parallel, accumulation is sequential), so results
//! are bitwise independent of the worker count.

use crate::grid::SpatialGrid;
use crate::potential::PotentialSpec;
use crate::scattering::{sample_potential, solve_sampled, ScatteringError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Gaussian wavepacket parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    /// Momentum-space inverse-width parameter (dimensionless length).
    pub a: f64,
    /// Central momentum (units of hbar k).
    pub q0: f64,
    /// Initial center position (units of 1/k).
    pub z0: f64,
    /// Momentum cutoff in units of the 1/a width. Default 5.
    pub n_sigma: f64,
    /// Number of momentum samples, odd and >= 129. Default 513.
    pub n_q: usize,
}

impl WavepacketSpec {
    pub fn new(a: f64, q0: f64, z0: f64) -> Self {
        WavepacketSpec { a, q0, z0, n_sigma: 5.0, n_q: 513 }
    }

    pub fn validate(&self) -> Result<(), WavepacketError> {
        if !(self.a > 0.0) {
            return Err(WavepacketError::InvalidSpec(format!("a must be positive, got {}", self.a)));
        }
        if !(self.q0 - self.n_sigma / self.a > 0.0) {
            return Err(WavepacketError::InvalidSpec(format!(
                "momentum support crosses zero: q0 - n_sigma/a = {}",
                self.q0 - self.n_sigma / self.a
            )));
        }
        if self.n_q < 129 || self.n_q % 2 == 0 {
            return Err(WavepacketError::InvalidSpec(format!(
                "n_q must be odd and >= 129, got {}",
                self.n_q
            )));
        }
        Ok(())
    }

    /// Sampled momenta, uniform over `q0 +- n_sigma/a`.
    pub fn q_nodes(&self) -> Vec<f64> {
        let half = self.n_sigma / self.a;
        let dq = 2.0 * half / (self.n_q - 1) as f64;
        (0..self.n_q).map(|i| self.q0 - half + i as f64 * dq).collect()
    }

    fn trapezoid_weights(&self) -> Vec<f64> {
        let half = self.n_sigma / self.a;
        let dq = 2.0 * half / (self.n_q - 1) as f64;
        (0..self.n_q)
            .map(|i| if i == 0 || i + 1 == self.n_q { 0.5 * dq } else { dq })
            .collect()
    }

    /// Normalization constant of `f0`: quadrature of `|f0|^2` over the
    /// momentum grid equals 1.
    pub fn norm_constant(&self) -> f64 {
        let w = self.trapezoid_weights();
        let total: f64 = self
            .q_nodes()
            .iter()
            .zip(&w)
            .map(|(&q, &wi)| {
                let u = self.a * (q - self.q0);
                wi * (-u * u).exp()
            })
            .sum();
        1.0 / total.sqrt()
    }
}

/// Initial momentum distribution `f0(q)`.
pub fn initial_distribution(wp: &WavepacketSpec, q: f64) -> Complex64 {
    let u = wp.a * (q - wp.q0);
    wp.norm_constant() * (-0.5 * u * u).exp() * Complex64::cis(-q * wp.z0)
}

/// Probability split around the laser region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub left_bound: f64,
    pub right_bound: f64,
    pub p_left: f64,
    pub p_inside: f64,
    pub p_right: f64,
}

/// `|phi(z, t)|^2` and the complex amplitude at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub grid: SpatialGrid,
    pub amplitude: Vec<Complex64>,
    pub density: Vec<f64>,
    pub norm: f64,
    pub partition: Partition,
}

impl Snapshot {
    /// Contiguous density regions above `1e-4 * max` carrying mass >= 1e-3.
    pub fn lobe_count(&self) -> usize {
        count_lobes(&self.density, &self.grid)
    }
}

/// Wavepacket evolution over a set of times.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub wp: WavepacketSpec,
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Lobes seen leaving the laser region: local maxima of outward flux at
    /// the region boundaries over a dense internal time grid.
    pub emission_events: usize,
}

impl EvolutionResult {
    /// Cumulative frame-to-frame lobe-count increases, in time order.
    pub fn splitting_events(&self) -> usize {
        let mut order: Vec<usize> = (0..self.snapshots.len()).collect();
        order.sort_by(|&i, &j| self.times[i].total_cmp(&self.times[j]));
        let counts: Vec<usize> =
            order.iter().map(|&i| self.snapshots[i].lobe_count()).collect();
        counts.windows(2).map(|w| w[1].saturating_sub(w[0])).sum()
    }
}

#[derive(Debug, Error)]
pub enum WavepacketError {
    #[error("invalid wavepacket: {0}")]
    InvalidSpec(String),
    #[error("stationary state missing for q = {q}: {source}")]
    StateFailed {
        q: f64,
        #[source]
        source: ScatteringError,
    },
    #[error("times must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("partition bounds must satisfy z_min <= left < right <= z_max")]
    BadPartitionBounds,
}

/// Probability in `[z_min, left)`, `[left, right]`, `(right, z_max]` by
/// trapezoid quadrature of the density. The three parts sum to the snapshot
/// norm exactly.
pub fn partition_probability(
    s: &Snapshot,
    left_bound: f64,
    right_bound: f64,
) -> Result<(f64, f64, f64), WavepacketError> {
    partition_density(&s.density, &s.grid, left_bound, right_bound)
}

fn partition_density(
    density: &[f64],
    grid: &SpatialGrid,
    left_bound: f64,
    right_bound: f64,
) -> Result<(f64, f64, f64), WavepacketError> {
    let z_last = grid.point(grid.n_points - 1);
    if !(grid.z_min <= left_bound && left_bound < right_bound && right_bound <= z_last) {
        return Err(WavepacketError::BadPartitionBounds);
    }
    let (mut l, mut c, mut r) = (0.0, 0.0, 0.0);
    for (i, rho) in density.iter().enumerate() {
        let z = grid.point(i);
        let m = rho * grid.trapezoid_weight(i);
        if z < left_bound {
            l += m;
        } else if z <= right_bound {
            c += m;
        } else {
            r += m;
        }
    }
    Ok((l, c, r))
}

/// Default partition bounds: `z_c +- 2d/cos(phi)`, where the envelope has
/// fallen to `exp(-8)` of its peak, clamped to the grid.
pub fn default_region_bounds(spec: &PotentialSpec, grid: &SpatialGrid) -> (f64, f64) {
    let half = 2.0 * spec.d / spec.phi.cos();
    let z_last = grid.point(grid.n_points - 1);
    let left = (spec.z_c - half).max(grid.z_min);
    let right = (spec.z_c + half).min(z_last);
    (left, right)
}

fn count_lobes(density: &[f64], grid: &SpatialGrid) -> usize {
    let peak = density.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0;
    }
    let threshold = 1e-4 * peak;
    let mut count = 0;
    let mut mass = 0.0;
    let mut inside = false;
    for (i, &rho) in density.iter().enumerate() {
        if rho > threshold {
            mass += rho * grid.trapezoid_weight(i);
            inside = true;
        } else if inside {
            if mass >= 1e-3 {
                count += 1;
            }
            mass = 0.0;
            inside = false;
        }
    }
    if inside && mass >= 1e-3 {
        count += 1;
    }
    count
}

/// Precomputed stationary states on a (possibly strided) storage grid, for
/// repeated synthesis at many times. Memory is
/// `n_q * ceil(n_points/stride) * 16` bytes.
pub struct StationaryTable {
    pub wp: WavepacketSpec,
    /// Stored positions (every `stride`-th grid point).
    pub z_stored: Vec<f64>,
    q_nodes: Vec<f64>,
    weights: Vec<f64>,
    f0: Vec<Complex64>,
    /// Row `j` holds `psi(q_j, z_stored)`.
    psi: Vec<Vec<Complex64>>,
}

impl StationaryTable {
    pub fn build(
        wp: &WavepacketSpec,
        spec: &PotentialSpec,
        grid: &SpatialGrid,
        stride: usize,
    ) -> Result<Self, WavepacketError> {
        wp.validate()?;
        let stride = stride.max(1);
        let u = sample_potential(spec, grid);
        let q_nodes = wp.q_nodes();
        let psi: Vec<Vec<Complex64>> = q_nodes
            .par_iter()
            .map(|&q| {
                let sol = solve_sampled(q, &u, grid)
                    .map_err(|source| WavepacketError::StateFailed { q, source })?;
                Ok(sol.psi.iter().step_by(stride).copied().collect())
            })
            .collect::<Result<_, WavepacketError>>()?;
        let z_stored = (0..grid.n_points).step_by(stride).map(|i| grid.point(i)).collect();
        let f0 = q_nodes.iter().map(|&q| initial_distribution(wp, q)).collect();
        Ok(StationaryTable {
            wp: *wp,
            z_stored,
            q_nodes,
            weights: wp.trapezoid_weights(),
            f0,
            psi,
        })
    }

    /// Amplitude at the stored points for the table's own `f0`.
    pub fn amplitude_at(&self, t: f64) -> Vec<Complex64> {
        self.synthesize_with(&self.f0, t)
    }

    /// Synthesis with an arbitrary momentum distribution sampled on the
    /// table's q-grid; linear in `f_values`.
    pub fn synthesize_with(&self, f_values: &[Complex64], t: f64) -> Vec<Complex64> {
        assert_eq!(f_values.len(), self.q_nodes.len());
        let mut acc = vec![Complex64::new(0.0, 0.0); self.z_stored.len()];
        let pref = 1.0 / (2.0 * PI).sqrt();
        for ((&q, &w), (f, row)) in self
            .q_nodes
            .iter()
            .zip(&self.weights)
            .zip(f_values.iter().zip(&self.psi))
        {
            let c = pref * w * f * Complex64::cis(-q * q * t);
            for (dst, &p) in acc.iter_mut().zip(row) {
                *dst += c * p;
            }
        }
        acc
    }
}

/// Momenta per parallel block of the evolution accumulator.
const Q_BLOCK: usize = 32;
/// Internal time samples for boundary-flux emission detection.
const FLUX_SAMPLES: usize = 160;

/// Snapshot of the packet at one time. Equivalent to a one-element
/// [`evolve`]; prefer `evolve` for several times, which shares the solves.
pub fn synthesize(
    wp: &WavepacketSpec,
    spec: &PotentialSpec,
    grid: &SpatialGrid,
    t: f64,
) -> Result<Snapshot, WavepacketError> {
    let result = evolve(wp, spec, grid, &[t])?;
    Ok(result.snapshots.into_iter().next().expect("one snapshot per time"))
}

/// Evolves the packet, producing one snapshot per entry of `times` plus
/// boundary-flux emission counting on a dense internal time grid.
pub fn evolve(
    wp: &WavepacketSpec,
    spec: &PotentialSpec,
    grid: &SpatialGrid,
    times: &[f64],
) -> Result<EvolutionResult, WavepacketError> {
    wp.validate()?;
    if let Some(&t) = times.iter().find(|&&t| t < 0.0) {
        return Err(WavepacketError::NegativeTime(t));
    }
    let u = sample_potential(spec, grid);
    let q_nodes = wp.q_nodes();
    let weights = wp.trapezoid_weights();
    let pref = 1.0 / (2.0 * PI).sqrt();
    let n = grid.n_points;

    let (left_bound, right_bound) = default_region_bounds(spec, grid);
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let flux_times: Vec<f64> = if t_max > 0.0 {
        (0..FLUX_SAMPLES).map(|i| t_max * i as f64 / (FLUX_SAMPLES - 1) as f64).collect()
    } else {
        Vec::new()
    };
    // three adjacent points per boundary for a centered derivative
    let idx_of = |zb: f64| -> usize {
        let i = ((zb - grid.z_min) / grid.h).round() as isize;
        i.clamp(1, n as isize - 2) as usize
    };
    let il = idx_of(left_bound);
    let ir = idx_of(right_bound);
    let probes = [il - 1, il, il + 1, ir - 1, ir, ir + 1];

    let mut acc: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; times.len()];
    let mut flux_acc: Vec<[Complex64; 6]> =
        vec![[Complex64::new(0.0, 0.0); 6]; flux_times.len()];

    // ascending-q blocks: parallel solves, sequential accumulation
    for block_start in (0..q_nodes.len()).step_by(Q_BLOCK) {
        let block: Vec<usize> =
            (block_start..(block_start + Q_BLOCK).min(q_nodes.len())).collect();
        let solved: Vec<(usize, Vec<Complex64>)> = block
            .par_iter()
            .map(|&j| {
                let q = q_nodes[j];
                let sol = solve_sampled(q, &u, grid)
                    .map_err(|source| WavepacketError::StateFailed { q, source })?;
                Ok((j, sol.psi))
            })
            .collect::<Result<_, WavepacketError>>()?;
        for (j, psi) in solved {
            let q = q_nodes[j];
            let base = pref * weights[j] * initial_distribution(wp, q);
            for (ti, &t) in times.iter().enumerate() {
                let c = base * Complex64::cis(-q * q * t);
                let dst = &mut acc[ti];
                for (d, &p) in dst.iter_mut().zip(&psi) {
                    *d += c * p;
                }
            }
            for (fi, &t) in flux_times.iter().enumerate() {
                let c = base * Complex64::cis(-q * q * t);
                for (slot, &pi) in flux_acc[fi].iter_mut().zip(probes.iter()) {
                    *slot += c * psi[pi];
                }
            }
        }
    }

    let snapshots: Vec<Snapshot> = times
        .iter()
        .zip(acc)
        .map(|(&t, amplitude)| {
            let density: Vec<f64> = amplitude.iter().map(|c| c.norm_sqr()).collect();
            let norm: f64 =
                density.iter().enumerate().map(|(i, d)| d * grid.trapezoid_weight(i)).sum();
            let (p_left, p_inside, p_right) =
                partition_density(&density, grid, left_bound, right_bound)?;
            Ok(Snapshot {
                time: t,
                grid: *grid,
                amplitude,
                density,
                norm,
                partition: Partition { left_bound, right_bound, p_left, p_inside, p_right },
            })
        })
        .collect::<Result<_, WavepacketError>>()?;

    let emission_events = count_emissions(&flux_acc, grid.h);

    Ok(EvolutionResult { wp: *wp, times: times.to_vec(), snapshots, emission_events })
}

/// Counts local maxima of outward probability flux at the two region
/// boundaries. `J = 2 Im(conj(phi) dphi/dz)`; outward means -J on the left
/// boundary and +J on the right.
fn count_emissions(flux_acc: &[[Complex64; 6]], h: f64) -> usize {
    if flux_acc.len() < 3 {
        return 0;
    }
    let series: Vec<(f64, f64)> = flux_acc
        .iter()
        .map(|probe| {
            let dl = (probe[2] - probe[0]) / (2.0 * h);
            let dr = (probe[5] - probe[3]) / (2.0 * h);
            let j_left = 2.0 * (probe[1].conj() * dl).im;
            let j_right = 2.0 * (probe[4].conj() * dr).im;
            (-j_left, j_right)
        })
        .collect();
    let peak = series
        .iter()
        .map(|&(l, r)| l.max(r))
        .fold(0.0, f64::max);
    if peak < 1e-12 {
        return 0;
    }
    let floor = 0.02 * peak;
    let mut events = 0;
    for side in 0..2 {
        let y: Vec<f64> = series.iter().map(|&(l, r)| if side == 0 { l } else { r }).collect();
        for i in 1..y.len() - 1 {
            if y[i] > floor && y[i] >= y[i - 1] && y[i] > y[i + 1] {
                events += 1;
            }
        }
    }
    events
}
