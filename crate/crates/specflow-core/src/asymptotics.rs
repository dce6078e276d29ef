//! Two-term Weyl counting asymptotics, short-time heat-trace models, and
//! least-squares fits that recover domain geometry from a spectrum.
//!
//! The counting function of a d-dimensional Dirichlet domain obeys
//! N(E) ~ c0 E^{d/2} - c1 E^{(d-1)/2} with c0, c1 fixed by the volume and
//! boundary volume ([`WeylModel`]). The partition function Z(T) = sum over
//! the spectrum of exp(-E/T) has the matching short-time expansion in
//! powers of sqrt(T) ([`HeatTraceModel`]); its constant term is sensitive
//! to how the boundary's mean curvature enters, and the two candidate
//! coefficient conventions are both implemented ([`CoefficientSet`]) so
//! spectra can arbitrate between them numerically.

use crate::spectrum::Spectrum;
use crate::util::lsq::lsq_fit;
use crate::util::special::{gamma, unit_ball_volume};
use serde::Serialize;
use thiserror::Error;

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    /// Fewer eigenvalues in the fit window than a two-coefficient fit can
    /// responsibly use.
    #[error("fit window holds {found} eigenvalues, need at least {need}")]
    WindowTooSmall { found: usize, need: usize },
    /// The fit window reaches past the spectrum's completeness bound, where
    /// the counting function is not trustworthy.
    #[error("window end {requested} exceeds completeness bound {available}")]
    WindowBeyondCompleteness { requested: f64, available: f64 },
    /// The Weyl tail estimate exceeds 1% of the partial sum: the requested
    /// temperature is too large for the stored cutoff.
    #[error("tail bound {tail_bound} exceeds 1% of partition value {value}")]
    TailDominates { value: f64, tail_bound: f64 },
    /// The spectrum's metadata lacks a geometric quantity the operation
    /// needs (e.g. the area entering the tail estimate).
    #[error("spectrum metadata lacks {0}")]
    MissingGeometry(&'static str),
}

/// Only the Dirichlet branch is implemented; the enum records the sign
/// convention N ~ c0 E^{d/2} - c1 E^{(d-1)/2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    Dirichlet,
}

/// Two-term counting asymptotics of a d-dimensional domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylModel {
    pub d: usize,
    pub vol: f64,
    pub bvol: f64,
    /// omega_d vol / (2 pi)^d, with omega_k the unit-ball volume.
    pub c0: f64,
    /// omega_{d-1} bvol / (4 (2 pi)^{d-1}).
    pub c1: f64,
    pub boundary_condition: BoundaryCondition,
}

impl WeylModel {
    pub fn new(d: usize, vol: f64, bvol: f64) -> Self {
        assert!(d >= 1 && vol > 0.0 && bvol >= 0.0);
        let two_pi = 2.0 * PI;
        let c0 = unit_ball_volume(d) * vol / two_pi.powi(d as i32);
        let c1 = unit_ball_volume(d - 1) * bvol / (4.0 * two_pi.powi(d as i32 - 1));
        WeylModel {
            d,
            vol,
            bvol,
            c0,
            c1,
            boundary_condition: BoundaryCondition::Dirichlet,
        }
    }

    /// Canonical partition function of the model: the Laplace transform of
    /// dN, Z(T) = c0 Gamma(d/2+1) T^{d/2} - c1 Gamma((d+1)/2) T^{(d-1)/2}.
    pub fn partition_function(&self, t: f64) -> f64 {
        assert!(t > 0.0);
        let d = self.d as f64;
        self.c0 * gamma(d / 2.0 + 1.0) * t.powf(d / 2.0)
            - self.c1 * gamma((d + 1.0) / 2.0) * t.powf((d - 1.0) / 2.0)
    }

    /// Exact dZ/dT of [`Self::partition_function`].
    pub fn partition_function_derivative(&self, t: f64) -> f64 {
        assert!(t > 0.0);
        let d = self.d as f64;
        self.c0 * gamma(d / 2.0 + 1.0) * (d / 2.0) * t.powf(d / 2.0 - 1.0)
            - self.c1 * gamma((d + 1.0) / 2.0) * ((d - 1.0) / 2.0) * t.powf((d - 3.0) / 2.0)
    }
}

/// N(E) ~ c0 E^{d/2} - c1 E^{(d-1)/2} (Dirichlet sign).
pub fn weyl_two_term(model: &WeylModel, e: f64) -> f64 {
    assert!(e > 0.0);
    let d = model.d as f64;
    model.c0 * e.powf(d / 2.0) - model.c1 * e.powf((d - 1.0) / 2.0)
}

/// Which convention fixes the boundary mean-curvature term of the heat
/// trace. The two differ only in the d=2 constant: `MeanCurvature` uses
/// -int H / (6 (4 pi)^{d/2}) (disk: -1/12), `Classical` uses the
/// Kac/McKean-Singer value, which by Gauss-Bonnet makes the d=2 constant
/// exactly chi/6 (disk: +1/6). Spectra arbitrate; see
/// [`heat_trace_constant_extract`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSet {
    MeanCurvature,
    Classical,
}

/// Short-time heat-trace expansion data for a d-dimensional domain or
/// closed manifold. Closed manifolds simply have `bvol = integral_h = 0`.
/// `integral_q` is the quadratic curvature invariant normalized so that
/// Q = 3 R^2 on a constant-curvature surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatTraceModel {
    pub d: usize,
    pub vol: f64,
    pub bvol: f64,
    pub integral_r: f64,
    pub integral_q: f64,
    pub integral_h: f64,
    pub coefficient_set: CoefficientSet,
}

impl HeatTraceModel {
    /// Flat planar domain: area, perimeter, and the total turning of the
    /// boundary (int H ds, = 2 pi for any smooth convex boundary).
    pub fn flat_open_d2(
        area: f64,
        perimeter: f64,
        boundary_turning: f64,
        coefficient_set: CoefficientSet,
    ) -> Self {
        assert!(area > 0.0 && perimeter > 0.0);
        HeatTraceModel {
            d: 2,
            vol: area,
            bvol: perimeter,
            integral_r: 0.0,
            integral_q: 0.0,
            integral_h: boundary_turning,
            coefficient_set,
        }
    }

    /// Closed surface with given total scalar curvature and total Q.
    pub fn closed_surface_d2(vol: f64, integral_r: f64, integral_q: f64) -> Self {
        assert!(vol > 0.0);
        HeatTraceModel {
            d: 2,
            vol,
            bvol: 0.0,
            integral_r,
            integral_q,
            integral_h: 0.0,
            coefficient_set: CoefficientSet::Classical,
        }
    }

    /// Round sphere of radius r: R = 2/r^2, Q = 3R^2.
    pub fn round_sphere(r: f64) -> Self {
        assert!(r > 0.0);
        let vol = 4.0 * PI * r * r;
        let scalar = 2.0 / (r * r);
        Self::closed_surface_d2(vol, scalar * vol, 3.0 * scalar * scalar * vol)
    }

    /// Flat torus of the given area: every curvature term vanishes.
    pub fn flat_torus(area: f64) -> Self {
        Self::closed_surface_d2(area, 0.0, 0.0)
    }
}

/// Heat-trace expansion Z(T) of the model:
/// T^{d/2} Vol/(4 pi)^{d/2} + T^{d/2-1} int R/(6 (4 pi)^{d/2})
/// + T^{d/2-2} int Q/(180 (4 pi)^{d/2})
/// - T^{(d-1)/2} Vol dM/(4 (4 pi)^{(d-1)/2}) + (mean-curvature term per
/// the coefficient set).
pub fn heat_trace_model(m: &HeatTraceModel, t: f64) -> f64 {
    assert!(t > 0.0);
    let d = m.d as f64;
    let four_pi_d2 = (4.0 * PI).powf(d / 2.0);
    let mut z = t.powf(d / 2.0) * m.vol / four_pi_d2
        + t.powf(d / 2.0 - 1.0) * m.integral_r / (6.0 * four_pi_d2)
        + t.powf(d / 2.0 - 2.0) * m.integral_q / (180.0 * four_pi_d2);
    if m.bvol != 0.0 || m.integral_h != 0.0 {
        z -= t.powf((d - 1.0) / 2.0) * m.bvol / (4.0 * (4.0 * PI).powf((d - 1.0) / 2.0));
        z += match m.coefficient_set {
            CoefficientSet::MeanCurvature => {
                -t.powf(d / 2.0 - 1.0) * m.integral_h / (6.0 * four_pi_d2)
            }
            // Classical d=2 constant: with the int R/(24 pi) bulk term this
            // sums to chi/6 by Gauss-Bonnet. Other dimensions keep the
            // mean-curvature convention.
            CoefficientSet::Classical if m.d == 2 => m.integral_h / (3.0 * four_pi_d2),
            CoefficientSet::Classical => {
                -t.powf(d / 2.0 - 1.0) * m.integral_h / (6.0 * four_pi_d2)
            }
        };
    }
    z
}

/// Exact dZ/dT of [`heat_trace_model`]: every term is a power of T, so the
/// derivative is the same term list with each power stepped down. Kept next
/// to the model evaluation so the two share one term inventory.
pub fn heat_trace_model_derivative(m: &HeatTraceModel, t: f64) -> f64 {
    assert!(t > 0.0);
    let d = m.d as f64;
    let four_pi_d2 = (4.0 * PI).powf(d / 2.0);
    let mut dz = (d / 2.0) * t.powf(d / 2.0 - 1.0) * m.vol / four_pi_d2
        + (d / 2.0 - 1.0) * t.powf(d / 2.0 - 2.0) * m.integral_r / (6.0 * four_pi_d2)
        + (d / 2.0 - 2.0) * t.powf(d / 2.0 - 3.0) * m.integral_q / (180.0 * four_pi_d2);
    if m.bvol != 0.0 || m.integral_h != 0.0 {
        dz -= ((d - 1.0) / 2.0) * t.powf((d - 3.0) / 2.0) * m.bvol
            / (4.0 * (4.0 * PI).powf((d - 1.0) / 2.0));
        // The classical d=2 mean-curvature term is a constant; otherwise
        // the term carries T^{d/2-1}.
        if !(m.coefficient_set == CoefficientSet::Classical && m.d == 2) {
            dz -= (d / 2.0 - 1.0) * t.powf(d / 2.0 - 2.0) * m.integral_h / (6.0 * four_pi_d2);
        }
    }
    dz
}

/// Partition function from a stored spectrum: the partial sum of
/// exp(-E/T) plus a conservative Weyl tail estimate
/// int_Lambda^inf (A/4 pi) exp(-E/T) dE = (A/4 pi) T exp(-Lambda/T).
/// Returns (value, tail_bound); errs when the tail exceeds 1% of the value.
pub fn partition_function_from_spectrum(
    s: &Spectrum,
    t: f64,
) -> Result<(f64, f64), AsymptoticsError> {
    assert!(t > 0.0);
    let area = s
        .meta()
        .area
        .ok_or(AsymptoticsError::MissingGeometry("area"))?;
    // Smallest terms first (largest eigenvalues) for a well-ordered sum.
    let value: f64 = s.values().iter().rev().map(|&e| (-e / t).exp()).sum();
    let tail_bound = area / (4.0 * PI) * t * (-s.complete_up_to() / t).exp();
    if tail_bound > 0.01 * value {
        return Err(AsymptoticsError::TailDominates { value, tail_bound });
    }
    Ok((value, tail_bound))
}

/// Everything a geometry fit reports. Inapplicable entries are `None` so
/// the JSON shape is stable across fit kinds.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub vol_est: Option<f64>,
    pub bvol_est: Option<f64>,
    pub const_term: Option<f64>,
    /// Root mean square misfit over the evaluation grid.
    pub residual: f64,
    pub window: [f64; 2],
    pub coefficient_set: Option<CoefficientSet>,
}

/// Number of grid points used by the window fits.
const FIT_GRID: usize = 400;
/// Minimum eigenvalue count inside a counting-function fit window.
const MIN_WINDOW_EIGENVALUES: usize = 100;

/// Least-squares fit of the counting function against the (E, sqrt E)
/// basis on an even grid over `[e_min, e_max]`, mapped back to geometry
/// through the two-term constants: vol = 4 pi c0, bvol = 4 pi c1 (d = 2).
pub fn weyl_fit(s: &Spectrum, e_min: f64, e_max: f64) -> Result<FitReport, AsymptoticsError> {
    assert!(e_min > 0.0 && e_max > e_min);
    if e_max > s.complete_up_to() {
        return Err(AsymptoticsError::WindowBeyondCompleteness {
            requested: e_max,
            available: s.complete_up_to(),
        });
    }
    let in_window = s
        .values()
        .iter()
        .filter(|&&v| v >= e_min && v <= e_max)
        .count();
    if in_window < MIN_WINDOW_EIGENVALUES {
        return Err(AsymptoticsError::WindowTooSmall {
            found: in_window,
            need: MIN_WINDOW_EIGENVALUES,
        });
    }
    let mut es = Vec::with_capacity(FIT_GRID);
    let mut roots = Vec::with_capacity(FIT_GRID);
    let mut counts = Vec::with_capacity(FIT_GRID);
    for i in 0..FIT_GRID {
        let e = e_min + (e_max - e_min) * i as f64 / (FIT_GRID - 1) as f64;
        es.push(e);
        roots.push(e.sqrt());
        counts.push(s.counting_function(e).expect("window checked") as f64);
    }
    let (coef, residual) = lsq_fit(&[es, roots], &counts);
    Ok(FitReport {
        vol_est: Some(4.0 * PI * coef[0]),
        bvol_est: Some(-4.0 * PI * coef[1]),
        const_term: None,
        residual,
        window: [e_min, e_max],
        coefficient_set: None,
    })
}

/// Extract the constant term of Z(T) over a temperature grid by fitting
/// Z - a T - b sqrt(T). With `pinned = Some((area, perimeter))` the slopes
/// are fixed at their Weyl values a = A/4 pi, b = -L/(8 sqrt pi) and only
/// the constant is averaged; with `None` all three coefficients are free.
/// Tail errors from the spectral sum propagate.
pub fn heat_trace_constant_extract(
    s: &Spectrum,
    t_grid: &[f64],
    pinned: Option<(f64, f64)>,
) -> Result<FitReport, AsymptoticsError> {
    assert!(t_grid.len() >= 3, "need at least 3 grid temperatures");
    let mut zs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        zs.push(partition_function_from_spectrum(s, t)?.0);
    }
    let window = [
        t_grid.iter().copied().fold(f64::INFINITY, f64::min),
        t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ];
    let report = match pinned {
        Some((area, perimeter)) => {
            let a = area / (4.0 * PI);
            let b = -perimeter / (8.0 * PI.sqrt());
            let deviations: Vec<f64> = t_grid
                .iter()
                .zip(&zs)
                .map(|(&t, &z)| z - a * t - b * t.sqrt())
                .collect();
            let c = deviations.iter().sum::<f64>() / deviations.len() as f64;
            let rms = (deviations.iter().map(|d| (d - c) * (d - c)).sum::<f64>()
                / deviations.len() as f64)
                .sqrt();
            FitReport {
                vol_est: Some(area),
                bvol_est: Some(perimeter),
                const_term: Some(c),
                residual: rms,
                window,
                coefficient_set: None,
            }
        }
        None => {
            let ts: Vec<f64> = t_grid.to_vec();
            let roots: Vec<f64> = t_grid.iter().map(|t| t.sqrt()).collect();
            let ones = vec![1.0; t_grid.len()];
            let (coef, residual) = lsq_fit(&[ts, roots, ones], &zs);
            FitReport {
                vol_est: Some(4.0 * PI * coef[0]),
                bvol_est: Some(-8.0 * PI.sqrt() * coef[1]),
                const_term: Some(coef[2]),
                residual,
                window,
                coefficient_set: None,
            }
        }
    };
    Ok(report)
}
