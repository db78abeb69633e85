//! Band structure of the infinite cosine-squared lattice and the
//! position-resolved spatial gap map.
//!
//! Two independent routes to the same band edges:
//!
//! 1. [`band_edges`] integrates the Hill equation
//!    `psi'' + (E - A cos^2(kappa z)) psi = 0` over one period with a
//!    fixed-step RK4 scheme and locates the energies where the monodromy
//!    (transfer-matrix) trace crosses +-2.
//! 2. [`hill_band_edges`] diagonalizes the lattice Hamiltonian in the plane
//!    wave basis `exp(i (2m + nu) kappa z)` at Bloch phases `nu = 0, 1`,
//!    where the band extrema sit. This is the oracle the trace route is
//!    validated against; the two must agree wherever a gap is wide enough
//!    for the discriminant to resolve it.
//!
//! The map `E = kappa^2 a + A/2`, `q_M = A/(4 kappa^2)` relates the edges to
//! Mathieu characteristic values, which test fixtures use as frozen
//! references.

use crate::potential::PotentialSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// One allowed-energy interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub e_min: f64,
    pub e_max: f64,
}

/// Allowed bands of an infinite cosine-squared lattice of fixed amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    /// Signed lattice amplitude `A`.
    pub amplitude: f64,
    /// Lattice wavenumber `kappa` (the potential is `A cos^2(kappa z)`).
    pub kappa: f64,
    /// Disjoint intervals sorted ascending.
    pub bands: Vec<Band>,
}

impl BandSet {
    /// True iff `e` lies inside some allowed band (edges inclusive).
    pub fn is_allowed(&self, e: f64) -> bool {
        let i = self.bands.partition_point(|b| b.e_min <= e);
        i > 0 && e <= self.bands[i - 1].e_max
    }

    /// Merges bands separated by gaps narrower than `min_gap`.
    ///
    /// Gaps below the discriminant's conditioning limit cannot be located
    /// reliably by either route; comparisons between routes should merge
    /// them on both sides first.
    pub fn merge_gaps_below(&self, min_gap: f64) -> BandSet {
        let mut bands: Vec<Band> = Vec::with_capacity(self.bands.len());
        for b in &self.bands {
            match bands.last_mut() {
                Some(last) if b.e_min - last.e_max < min_gap => last.e_max = b.e_max,
                _ => bands.push(*b),
            }
        }
        BandSet { amplitude: self.amplitude, kappa: self.kappa, bands }
    }
}

/// Boolean raster over (momentum, position): is the local energy allowed by
/// the band structure of the lattice with the local envelope amplitude?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGapMap {
    pub q_grid: Vec<f64>,
    pub z_grid: Vec<f64>,
    /// Row-major over `(q, z)`: entry `iq * z_grid.len() + iz`.
    pub allowed: Vec<bool>,
    pub beta_used: f64,
}

impl SpatialGapMap {
    pub fn at(&self, iq: usize, iz: usize) -> bool {
        self.allowed[iq * self.z_grid.len() + iz]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BandError {
    #[error(
        "discriminant step too coarse: {required} RK4 steps needed for E={energy}, A={amplitude} \
         (cap {cap}); the local wavelength would be under-resolved"
    )]
    StepTooCoarse { energy: f64, amplitude: f64, required: usize, cap: usize },
    #[error("kappa must be positive, got {0}")]
    BadKappa(f64),
    #[error("band-edge tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("e_max = {e_max} must exceed the spectrum floor {floor}")]
    BadCeiling { e_max: f64, floor: f64 },
    #[error(
        "edge assembly inconsistent for A={amplitude}, kappa={kappa}: scan of {n_scan} points on \
         [{e_lo}, {e_max}] with step {step} produced a non-alternating crossing sequence"
    )]
    EdgeAssembly { amplitude: f64, kappa: f64, e_lo: f64, e_max: f64, step: f64, n_scan: usize },
    #[error("basis_size = {basis_size} below required {required} (4*n_bands + 8)")]
    BasisPrecondition { basis_size: usize, required: usize },
    #[error(
        "basis_size = {basis_size} too small: doubling it moves an edge by {shift:.3e} (> 1e-8)"
    )]
    BasisTooSmall { basis_size: usize, shift: f64 },
    #[error("grids must be non-empty and sorted ascending")]
    BadGrid,
}

const STEP_CAP: usize = 4_000_000;

/// Fixed-step RK4 evaluator of the Floquet discriminant for one
/// `(A, kappa)` pair. The cosine table is shared across energies.
struct Discriminant {
    amplitude: f64,
    h: f64,
    n: usize,
    /// cos^2(kappa z) at the 2n+1 half-step nodes of one period.
    cos2: Vec<f64>,
}

impl Discriminant {
    /// `per_radian` controls accuracy: steps per unit of phase
    /// `sqrt(|E|+|A|) * period`. 400 holds |D| error near 1e-11 over the
    /// acceptance energy range; 80 is enough for map rendering.
    fn new(
        amplitude: f64,
        kappa: f64,
        e_abs_max: f64,
        per_radian: f64,
        min_steps: usize,
    ) -> Result<Self, BandError> {
        if !(kappa > 0.0) {
            return Err(BandError::BadKappa(kappa));
        }
        let period = PI / kappa;
        let rate = (e_abs_max.abs() + amplitude.abs()).sqrt().max(1.0);
        let ideal = (per_radian * rate * period).ceil() as usize;
        let n = ideal.max(min_steps);
        if n > STEP_CAP {
            return Err(BandError::StepTooCoarse {
                energy: e_abs_max,
                amplitude,
                required: n,
                cap: STEP_CAP,
            });
        }
        let h = period / n as f64;
        let cos2 = (0..=2 * n)
            .map(|i| {
                let c = (kappa * (i as f64) * h / 2.0).cos();
                c * c
            })
            .collect();
        Ok(Discriminant { amplitude, h, n, cos2 })
    }

    /// Trace of the monodromy matrix at energy `e`.
    fn eval(&self, e: f64) -> f64 {
        let h = self.h;
        // fundamental solutions (1,0) and (0,1): y = (psi, psi') per column
        let (mut y0, mut y1, mut y2, mut y3) = (1.0_f64, 0.0_f64, 0.0_f64, 1.0_f64);
        for i in 0..self.n {
            let w0 = e - self.amplitude * self.cos2[2 * i];
            let wh = e - self.amplitude * self.cos2[2 * i + 1];
            let w1 = e - self.amplitude * self.cos2[2 * i + 2];

            let a0 = y1;
            let a1 = -w0 * y0;
            let a2 = y3;
            let a3 = -w0 * y2;

            let b0 = y1 + 0.5 * h * a1;
            let b1 = -wh * (y0 + 0.5 * h * a0);
            let b2 = y3 + 0.5 * h * a3;
            let b3 = -wh * (y2 + 0.5 * h * a2);

            let c0 = y1 + 0.5 * h * b1;
            let c1 = -wh * (y0 + 0.5 * h * b0);
            let c2 = y3 + 0.5 * h * b3;
            let c3 = -wh * (y2 + 0.5 * h * b2);

            let d0 = y1 + h * c1;
            let d1 = -w1 * (y0 + h * c0);
            let d2 = y3 + h * c3;
            let d3 = -w1 * (y2 + h * c2);

            y0 += h / 6.0 * (a0 + 2.0 * (b0 + c0) + d0);
            y1 += h / 6.0 * (a1 + 2.0 * (b1 + c1) + d1);
            y2 += h / 6.0 * (a2 + 2.0 * (b2 + c2) + d2);
            y3 += h / 6.0 * (a3 + 2.0 * (b3 + c3) + d3);
        }
        y0 + y3
    }
}

/// Trace of the transfer matrix of one lattice period at energy `e`.
///
/// `e` is allowed iff `|trace| <= 2`. Step count is chosen internally from
/// the phase budget; pathological energies that would exceed the step cap
/// are reported as [`BandError::StepTooCoarse`].
pub fn monodromy_trace(e: f64, amplitude: f64, kappa: f64) -> Result<f64, BandError> {
    let disc = Discriminant::new(amplitude, kappa, e, 400.0, 2000)?;
    Ok(disc.eval(e))
}

fn golden_extremum(disc: &Discriminant, mut a: f64, mut b: f64, maximize: bool) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let sign = if maximize { 1.0 } else { -1.0 };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = disc.eval(c);
    let mut fd = disc.eval(d);
    for _ in 0..200 {
        if b - a <= 1e-12 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if sign * fc > sign * fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = disc.eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = disc.eval(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, disc.eval(mid))
}

fn bisect_level(
    disc: &Discriminant,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    level: f64,
    tol: f64,
) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = disc.eval(mid) - level;
        if (f_lo < 0.0) == (fm < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All allowed bands with `e_min < e_max`, edges located by bisection of
/// `|trace| - 2` to within `tol` in energy.
///
/// The energy axis is pre-scanned with step `min(kappa^2/50, |A|/50 + 1e-3)`
/// from the spectrum floor `min(0, A)`; every monotone segment of the
/// discriminant between refined extrema is then searched for +-2 crossings.
/// Gaps too narrow for the discriminant to resolve in f64 (below roughly
/// 1e-5) may be reported closed; see [`BandSet::merge_gaps_below`].
pub fn band_edges(amplitude: f64, kappa: f64, e_max: f64, tol: f64) -> Result<BandSet, BandError> {
    if !(kappa > 0.0) {
        return Err(BandError::BadKappa(kappa));
    }
    if !(tol > 0.0) {
        return Err(BandError::BadTolerance(tol));
    }
    let floor = amplitude.min(0.0);
    if !(e_max > floor) {
        return Err(BandError::BadCeiling { e_max, floor });
    }
    if amplitude == 0.0 {
        // free particle: no gaps
        return Ok(BandSet { amplitude, kappa, bands: vec![Band { e_min: 0.0, e_max }] });
    }

    // accuracy tier: tight tolerances get the high-accuracy integrator
    let (per_radian, min_steps) = if tol < 1e-7 { (400.0, 2000) } else { (80.0, 600) };
    let disc = Discriminant::new(amplitude, kappa, e_max.abs().max(floor.abs()), per_radian, min_steps)?;

    let step = (kappa * kappa / 50.0).min(amplitude.abs() / 50.0 + 1e-3);
    let n_scan = ((e_max - floor) / step).ceil() as usize + 1;
    let scan: Vec<(f64, f64)> = (0..n_scan)
        .map(|i| {
            let e = (floor + i as f64 * step).min(e_max);
            (e, disc.eval(e))
        })
        .collect();

    // nodes = scan points plus refined extrema between them; the
    // discriminant is monotone between consecutive extrema, so every band
    // and gap boundary is a bracketed +-2 crossing of some segment
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(scan.len() + 16);
    nodes.push(scan[0]);
    for i in 1..scan.len() - 1 {
        let (e_prev, f_prev) = scan[i - 1];
        let (_, f_here) = scan[i];
        let (e_next, f_next) = scan[i + 1];
        if (f_here - f_prev) * (f_next - f_here) < 0.0 {
            let (e_star, f_star) = golden_extremum(&disc, e_prev, e_next, f_here > f_prev);
            nodes.push((e_star, f_star));
        }
        nodes.push(scan[i]);
    }
    nodes.push(scan[scan.len() - 1]);
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut crossings: Vec<f64> = Vec::new();
    for pair in nodes.windows(2) {
        let (x0, f0) = pair[0];
        let (x1, f1) = pair[1];
        for level in [2.0, -2.0] {
            let g0 = f0 - level;
            let g1 = f1 - level;
            if (g0 < 0.0) != (g1 < 0.0) {
                crossings.push(bisect_level(&disc, x0, x1, g0, level, tol));
            }
        }
    }
    crossings.sort_by(f64::total_cmp);

    let mut bands = Vec::new();
    let mut allowed = scan[0].1.abs() <= 2.0;
    let mut start = if allowed { Some(floor) } else { None };
    for e in crossings {
        if allowed {
            let s = start.take().ok_or(BandError::EdgeAssembly {
                amplitude,
                kappa,
                e_lo: floor,
                e_max,
                step,
                n_scan,
            })?;
            if e > s {
                bands.push(Band { e_min: s, e_max: e });
            }
            allowed = false;
        } else {
            start = Some(e);
            allowed = true;
        }
    }
    if allowed {
        if let Some(s) = start {
            if e_max > s {
                bands.push(Band { e_min: s, e_max });
            }
        }
    }
    Ok(BandSet { amplitude, kappa, bands })
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`
/// (Sturm sequence / LDL pivot count).
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let off2 = off * off;
    let mut count = 0;
    let mut p = diag[0] - x;
    if p < 0.0 {
        count += 1;
    }
    for &d in &diag[1..] {
        if p.abs() < 1e-300 {
            p = -1e-300;
        }
        p = d - x - off2 / p;
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `m` eigenvalues by bisection on the Sturm count.
fn lowest_eigenvalues(diag: &[f64], off: f64, m: usize) -> Vec<f64> {
    let gmin = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * off.abs() - 1.0;
    let gmax = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off.abs() + 1.0;
    (0..m)
        .map(|k| {
            let (mut lo, mut hi) = (gmin, gmax);
            for _ in 0..200 {
                if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if count_below(diag, off, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn hill_edges_once(amplitude: f64, kappa: f64, n_bands: usize, basis_size: usize) -> Vec<f64> {
    let half = basis_size / 2;
    let per_nu = n_bands + 2;
    let mut edges: Vec<f64> = Vec::with_capacity(2 * per_nu);
    for nu in [0i64, 1] {
        let diag: Vec<f64> = (-(half as i64)..=half as i64)
            .map(|m| {
                let g = (2 * m + nu) as f64 * kappa;
                g * g + amplitude / 2.0
            })
            .collect();
        edges.extend(lowest_eigenvalues(&diag, amplitude / 4.0, per_nu));
    }
    edges.sort_by(f64::total_cmp);
    edges.truncate(2 * n_bands);
    edges
}

/// Band edges from plane-wave diagonalization: the independent oracle.
///
/// Edges are the sorted union of the periodic (`nu = 0`) and antiperiodic
/// (`nu = 1`) spectra of the tridiagonal Hamiltonian with diagonal
/// `(2m+nu)^2 kappa^2 + A/2` and off-diagonal `A/4`, paired consecutively.
/// The basis is doubled once to verify convergence; an edge shift above
/// 1e-8 is reported as an error.
pub fn hill_band_edges(
    amplitude: f64,
    kappa: f64,
    n_bands: usize,
    basis_size: usize,
) -> Result<BandSet, BandError> {
    if !(kappa > 0.0) {
        return Err(BandError::BadKappa(kappa));
    }
    let required = 4 * n_bands + 8;
    if basis_size < required {
        return Err(BandError::BasisPrecondition { basis_size, required });
    }
    let coarse = hill_edges_once(amplitude, kappa, n_bands, basis_size);
    let fine = hill_edges_once(amplitude, kappa, n_bands, 2 * basis_size);
    let shift = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if shift > 1e-8 {
        return Err(BandError::BasisTooSmall { basis_size, shift });
    }
    let bands = fine
        .chunks_exact(2)
        .map(|pair| Band { e_min: pair[0], e_max: pair[1] })
        .collect();
    Ok(BandSet { amplitude, kappa, bands })
}

/// Position-resolved band structure: entry `(q, z)` is true iff the local
/// energy `q^2 + beta z` falls in an allowed band of the infinite lattice
/// with amplitude `A(z)` (the envelope value at `z`).
pub fn spatial_gap_map(
    spec: &PotentialSpec,
    q_grid: &[f64],
    z_grid: &[f64],
    tol: f64,
) -> Result<SpatialGapMap, BandError> {
    if q_grid.is_empty()
        || z_grid.is_empty()
        || q_grid.windows(2).any(|w| w[0] > w[1])
        || z_grid.windows(2).any(|w| w[0] > w[1])
    {
        return Err(BandError::BadGrid);
    }
    let kappa = spec.lattice_wavenumber();
    let q_max = q_grid.last().copied().unwrap_or(0.0);
    let e_top = q_max * q_max
        + z_grid.iter().map(|&z| spec.beta * z).fold(0.0, f64::max)
        + 0.5;

    // columns are independent; evaluation order never affects the bits
    let columns: Vec<Vec<bool>> = z_grid
        .par_iter()
        .map(|&z| {
            let a = spec.envelope_amplitude(z);
            let set = band_edges(a, kappa, e_top, tol)?;
            Ok(q_grid
                .iter()
                .map(|&q| set.is_allowed(q * q + spec.beta * z))
                .collect())
        })
        .collect::<Result<_, BandError>>()?;

    let nz = z_grid.len();
    let mut allowed = vec![false; q_grid.len() * nz];
    for (iz, col) in columns.iter().enumerate() {
        for (iq, &ok) in col.iter().enumerate() {
            allowed[iq * nz + iz] = ok;
        }
    }
    Ok(SpatialGapMap {
        q_grid: q_grid.to_vec(),
        z_grid: z_grid.to_vec(),
        allowed,
        beta_used: spec.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const KAPPA: f64 = 0.866_025_403_784_438_6; // sqrt(3)/2

    // Mathieu characteristic values via E = kappa^2 a + A/2, q_M = A/(4 kappa^2),
    // lowest five bands at kappa = sqrt(3)/2.
    const EDGES_A_M5: [f64; 10] = [
        -3.340453085180, -3.211685667668, -0.814232859283, 0.328425659575, 1.163946585131,
        4.331447320377, 4.433864771447, 9.567378538053, 9.572308527021, 16.293420829221,
    ];
    const EDGES_A_M05: [f64; 10] = [
        -0.260385219532, 0.372449682584, 0.622341233231, 2.748264098142, 2.758648815417,
        6.501248225317, 6.501356673362, 11.750694232178, 11.750694734432, 18.500434035347,
    ];
    const EDGES_A_01: [f64; 10] = [
        0.049583383957, 0.774896266749, 0.824895398712, 3.049930555890, 3.050347171130,
        6.800051649903, 6.800052517939, 12.050027777438, 12.050027778242, 18.800017361124,
    ];
    const EDGES_A_2: [f64; 10] = [
        0.840699617193, 1.211684794046, 2.204799772406, 3.972275568278, 4.131447722651,
        7.767480127468, 7.774363811283, 13.011056997586, 13.011185217095, 19.756945883367,
    ];

    fn flat_edges(set: &BandSet) -> Vec<f64> {
        set.bands.iter().flat_map(|b| [b.e_min, b.e_max]).collect()
    }

    #[test]
    fn trace_free_particle() {
        // trace = 2 cos(sqrt(E) * period)
        for (e, kappa) in [(1.0f64, KAPPA), (0.5, 1.0), (7.3, 0.7)] {
            let period = PI / kappa;
            let expected = 2.0 * (e.sqrt() * period).cos();
            let got = monodromy_trace(e, 0.0, kappa).unwrap();
            assert_abs_diff_eq!(got, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn trace_bragg_edge_degeneracy() {
        // E = 4, kappa = 1: empty-lattice zone boundary, trace touches +2
        let got = monodromy_trace(4.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn trace_inside_weak_coupling_gap() {
        // first gap is centered near kappa^2 + A/2 = 0.80 with width ~ A/2
        let t = monodromy_trace(0.80, 0.1, KAPPA).unwrap();
        assert!(t.abs() > 2.0, "trace = {t}");
    }

    #[test]
    fn trace_step_cap_error() {
        assert!(matches!(
            monodromy_trace(1e12, 0.0, 1e-3),
            Err(BandError::StepTooCoarse { .. })
        ));
    }

    #[test]
    fn band_edges_free_lattice() {
        let set = band_edges(0.0, 1.0, 10.0, 1e-9).unwrap();
        assert_eq!(set.bands.len(), 1);
        assert_eq!(set.bands[0].e_min, 0.0);
        assert_eq!(set.bands[0].e_max, 10.0);
        assert!(set.is_allowed(5.0));
    }

    #[test]
    fn band_edges_weak_coupling_first_gap() {
        // first-order perturbation: gap [kappa^2 + A/2 - A/4, kappa^2 + A/2 + A/4]
        let set = band_edges(0.1, KAPPA, 2.0, 1e-9).unwrap();
        assert!(set.bands.len() >= 2, "bands: {:?}", set.bands);
        let gap_lo = set.bands[0].e_max;
        let gap_hi = set.bands[1].e_min;
        assert_abs_diff_eq!(gap_lo, 0.775, epsilon = 3e-3);
        assert_abs_diff_eq!(gap_hi, 0.825, epsilon = 3e-3);
        // and the frozen Mathieu values pin them much tighter
        assert_abs_diff_eq!(gap_lo, 0.774896266749, epsilon = 5e-7);
        assert_abs_diff_eq!(gap_hi, 0.824895398712, epsilon = 5e-7);
    }

    #[test]
    fn band_edges_match_mathieu_repulsive() {
        let set = band_edges(2.0, KAPPA, 20.0, 1e-9).unwrap();
        let edges = flat_edges(&set);
        assert!(edges.len() >= 10, "edges: {edges:?}");
        for (got, want) in edges.iter().zip(EDGES_A_2.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 5e-7);
        }
    }

    #[test]
    fn band_edges_match_mathieu_attractive() {
        let set = band_edges(-5.0, KAPPA, 17.0, 1e-9).unwrap();
        let edges = flat_edges(&set);
        assert!(edges.len() >= 10, "edges: {edges:?}");
        for (got, want) in edges.iter().zip(EDGES_A_M5.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 5e-7);
        }
    }

    #[test]
    fn band_edges_resolve_narrow_gap() {
        // A = -0.5 gap 3 is 1.08e-4 wide; the extremum refinement must find it
        let set = band_edges(-0.5, KAPPA, 7.0, 1e-9).unwrap();
        let edges = flat_edges(&set);
        assert!(edges.len() >= 7, "edges: {edges:?}");
        for (got, want) in edges.iter().take(7).zip(EDGES_A_M05.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 5e-7);
        }
    }

    #[test]
    fn band_edges_weak_lattice_first_two_edges() {
        let set = band_edges(0.1, KAPPA, 3.5, 1e-9).unwrap();
        let edges = flat_edges(&set);
        assert!(edges.len() >= 5);
        for (got, want) in edges.iter().take(5).zip(EDGES_A_01.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 5e-7);
        }
    }

    #[test]
    fn edges_sit_on_trace_two() {
        let set = band_edges(2.0, KAPPA, 9.0, 1e-10).unwrap();
        for b in &set.bands {
            for e in [b.e_min, b.e_max] {
                if e == set.amplitude.min(0.0) || e == 9.0 {
                    continue; // scan boundary, not a crossing
                }
                let t = monodromy_trace(e, 2.0, KAPPA).unwrap();
                assert_abs_diff_eq!(t.abs(), 2.0, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn empty_lattice_limit_gap_measure() {
        let a = 1e-3;
        let set = band_edges(a, KAPPA, 8.0, 1e-10).unwrap();
        for w in set.bands.windows(2).take(3) {
            let gap = w[1].e_min - w[0].e_max;
            assert!(gap < a, "gap {gap} not below {a}");
        }
    }

    #[test]
    fn nested_first_gaps() {
        let inner = band_edges(0.3, KAPPA, 2.0, 1e-9).unwrap();
        let outer = band_edges(0.6, KAPPA, 2.0, 1e-9).unwrap();
        let (il, ih) = (inner.bands[0].e_max, inner.bands[1].e_min);
        let (ol, oh) = (outer.bands[0].e_max, outer.bands[1].e_min);
        assert!(ol < il && ih < oh, "gap [{il},{ih}] not inside [{ol},{oh}]");
    }

    #[test]
    fn hill_empty_lattice_degenerate_edges() {
        let set = hill_band_edges(0.0, 1.0, 2, 16).unwrap();
        let edges = flat_edges(&set);
        let expected = [0.0, 1.0, 1.0, 4.0];
        for (got, want) in edges.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn hill_matches_mathieu_table() {
        for (a, table) in [
            (-5.0, &EDGES_A_M5),
            (-0.5, &EDGES_A_M05),
            (0.1, &EDGES_A_01),
            (2.0, &EDGES_A_2),
        ] {
            let set = hill_band_edges(a, KAPPA, 5, 64).unwrap();
            let edges = flat_edges(&set);
            for (got, want) in edges.iter().zip(table.iter()) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn hill_basis_precondition() {
        assert!(matches!(
            hill_band_edges(1.0, 1.0, 5, 16),
            Err(BandError::BasisPrecondition { .. })
        ));
    }

    #[test]
    fn dual_route_agreement_at_eta_two() {
        let trace_set = band_edges(2.0, KAPPA, 20.0, 1e-9).unwrap();
        let hill_set = hill_band_edges(2.0, KAPPA, 5, 64).unwrap();
        for (t, h) in trace_set.bands.iter().zip(hill_set.bands.iter()) {
            assert_abs_diff_eq!(t.e_min, h.e_min, epsilon = 1e-6);
            assert_abs_diff_eq!(t.e_max, h.e_max, epsilon = 1e-6);
        }
    }

    #[test]
    fn gap_map_small_grid_invariants() {
        let spec = PotentialSpec::taylor(
            2.0,
            PI / 3.0,
            300.0 * std::f64::consts::SQRT_2 * PI,
            100.0 * PI,
            0.0,
        )
        .unwrap();
        let q: Vec<f64> = (0..12).map(|i| 0.5 + i as f64 * 0.2).collect();
        // symmetric grid about z_c plus the far-left column
        let mut z = vec![0.0];
        for s in [-600.0, -300.0, -100.0, 0.0, 100.0, 300.0, 600.0] {
            z.push(spec.z_c + s);
        }
        z.sort_by(f64::total_cmp);
        let map = spatial_gap_map(&spec, &q, &z, 1e-6).unwrap();
        assert_eq!(map.allowed.len(), q.len() * z.len());

        // far from the beams the envelope is ~0 and everything propagates
        let iz0 = z.iter().position(|&v| v == 0.0).unwrap();
        for iq in 0..q.len() {
            assert!(map.at(iq, iz0), "q={} should be allowed at z=0", q[iq]);
        }

        // symmetry about z_c for beta = 0
        for (s_lo, s_hi) in [(-600.0, 600.0), (-300.0, 300.0), (-100.0, 100.0)] {
            let a = z.iter().position(|&v| v == spec.z_c + s_lo).unwrap();
            let b = z.iter().position(|&v| v == spec.z_c + s_hi).unwrap();
            for iq in 0..q.len() {
                assert_eq!(map.at(iq, a), map.at(iq, b));
            }
        }

        // every cell equals an independent band-set query at that column
        for (iz, &zv) in z.iter().enumerate() {
            let set = band_edges(spec.envelope_amplitude(zv), spec.lattice_wavenumber(), 9.0, 1e-6)
                .unwrap();
            for (iq, &qv) in q.iter().enumerate() {
                assert_eq!(map.at(iq, iz), set.is_allowed(qv * qv));
            }
        }
    }

    #[test]
    fn gap_map_rejects_bad_grid() {
        let spec = PotentialSpec::taylor(2.0, PI / 3.0, 100.0, 50.0, 0.0).unwrap();
        assert!(matches!(spatial_gap_map(&spec, &[], &[0.0], 1e-6), Err(BandError::BadGrid)));
        assert!(matches!(
            spatial_gap_map(&spec, &[1.0, 0.5], &[0.0], 1e-6),
            Err(BandError::BadGrid)
        ));
    }

    #[test]
    fn merge_gaps_below_threshold() {
        let set = BandSet {
            amplitude: 1.0,
            kappa: 1.0,
            bands: vec![
                Band { e_min: 0.0, e_max: 1.0 },
                Band { e_min: 1.0 + 1e-9, e_max: 2.0 },
                Band { e_min: 2.5, e_max: 3.0 },
            ],
        };
        let merged = set.merge_gaps_below(1e-6);
        assert_eq!(merged.bands.len(), 2);
        assert_relative_eq!(merged.bands[0].e_max, 2.0);
    }
}
