//! Extrinsic flows of axisymmetric closed surfaces in 3-space.
//!
//! A surface is described by its generating curve `(rho(u), z(u))` in the
//! half-plane `rho >= 0`, rotated about the z-axis. Both endpoints sit on the
//! axis, so the surface is closed with two poles. All operators share one
//! set of conventions:
//!
//! * the parameter runs south pole to north pole with positive enclosed
//!   volume, which makes `nu = (z', -rho') / sqrt(E)` the outward normal;
//! * the second fundamental form is taken against the outward normal with
//!   the sign that gives a sphere of radius `r` the mean curvature
//!   `H = 2/r` (sum of principal curvatures);
//! * derivatives across the poles use mirror ghosts with the parity of a
//!   smooth axis point (`rho` odd, `z` even), the same device the warped
//!   metrics use, and the azimuthal principal curvature at a pole is set to
//!   its meridian limit (poles are umbilic).
//!
//! The volume-preserving mean-curvature flow moves the surface with the
//! lapse `N = <H> - H`, whose area integral vanishes identically. A general
//! lapse/shift step and its first-order rate predictors for the induced
//! metric and the shape tensor are provided for consistency probes of the
//! evolution equations.
//!
//! Explicit steps obey
//!
//! ```text
//! dt <= min(0.35 h^2 / max(1, max|H|),  0.5 h / max speed)
//! ```
//!
//! with `h` the smallest node spacing: the first bound is the parabolic
//! limit of the curvature-driven flows, the second keeps any node from
//! jumping a full cell in one step.

use crate::util::quadrature::simpson;
use thiserror::Error;

/// Safety factor of the parabolic step bound.
pub const LAPSE_C_STAB: f64 = 0.35;

/// Convergence threshold on `max|H - <H>|` for [`run_vpmcf`]. Sits above the
/// curvature-sampling floor of moderate grids (about `2 h^2` relative);
/// coarser runs simply end at `t_end` instead of converging.
pub const VPMCF_DEV_TOL: f64 = 1e-3;

/// Fraction of the stable bound that [`run_vpmcf`] actually takes when its
/// step cap is not the binding limit.
pub const VPMCF_BOUND_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypersurfaceError {
    #[error("profile needs an even segment count of at least 8, got {found} nodes")]
    BadNodeCount { found: usize },
    #[error("profile endpoint {index} must sit on the axis, got rho = {value:e}")]
    EndpointOffAxis { index: usize, value: f64 },
    #[error("interior node {index} has rho = {value:e}; the curve must stay in the open half-plane")]
    NonpositiveRadius { index: usize, value: f64 },
    #[error("coordinate {name}[{index}] is not finite")]
    NonfiniteCoordinate { name: &'static str, index: usize },
    #[error("enclosed volume {value:e} is not positive; the curve must run south pole to north pole without crossing itself")]
    NonpositiveVolume { value: f64 },
    #[error("{name} carries {found} values but the surface has {expected} nodes")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("step {dt:e} exceeds the stable bound {max_dt:e}")]
    StepTooLarge { dt: f64, max_dt: f64 },
    #[error("node {index} crossed the symmetry axis during a step")]
    AxisCrossing { index: usize },
}

/// Closed surface of revolution: generating curve sampled on a uniform
/// parameter grid `u_j = span * j / n`, endpoints on the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisymSurface {
    rho: Vec<f64>,
    z: Vec<f64>,
    span: f64,
}

/// Normal speed and tangential speed of a surface deformation, per node. The
/// shift is the contravariant component along the generating curve; at the
/// poles the tangent leaves the axis, so pole shifts are ignored by steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LapseShift {
    pub lapse: Vec<f64>,
    pub shift: Vec<f64>,
}

/// Induced metric `diag(g_uu, g_tt)` in (parameter, angle) coordinates:
/// `g_uu = rho'^2 + z'^2`, `g_tt = rho^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMetric {
    pub g_uu: Vec<f64>,
    pub g_tt: Vec<f64>,
}

/// Second fundamental form `diag(h_uu, h_tt)`, the mean curvature
/// `H = g^{uu} h_uu + g^{tt} h_tt` per node, and its area average.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondFundamentalForm {
    pub h_uu: Vec<f64>,
    pub h_tt: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    pub area_average: f64,
}

/// Boundary area and enclosed volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceGeometry {
    pub area: f64,
    pub volume: f64,
}

/// First-order rate of the induced metric under a lapse/shift deformation:
/// `2 N h_ij` plus the symmetrized covariant gradient of the shift.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRate {
    pub g_uu: Vec<f64>,
    pub g_tt: Vec<f64>,
}

/// First-order rate of the second fundamental form under a lapse/shift
/// deformation: `-Hess N + N h h + Lie(shift) h` componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRate {
    pub h_uu: Vec<f64>,
    pub h_tt: Vec<f64>,
}

/// Scalar or (diagonal) tensor datum driving a variance step.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceField {
    /// Conformal step `delta g = dt q(<q> - q) g`.
    Scalar(Vec<f64>),
    /// Tensor step `delta g_ij = dt (<m> - m) m_ij` with `m = g^{ij} m_ij`.
    Tensor { m_uu: Vec<f64>, m_tt: Vec<f64> },
}

/// Outcome of a variance step: the updated boundary metric plus the measured
/// and predicted boundary-area changes.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceStep {
    pub g_uu: Vec<f64>,
    pub g_tt: Vec<f64>,
    /// Quadrature of the new area density minus the old one.
    pub measured: f64,
    /// `-dt * area * var(q)` (conformal, two-dimensional boundary) or
    /// `-dt/2 * area * var(m)` (tensor).
    pub predicted: f64,
}

/// One row of a volume-preserving mean-curvature-flow trace.
#[derive(Debug, Clone, PartialEq)]
pub struct McfSample {
    pub step: usize,
    pub t: f64,
    pub area: f64,
    pub volume: f64,
    pub h_average: f64,
    pub max_dev: f64,
    pub entropy_rate: f64,
}

/// Trace and final state of a [`run_vpmcf`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct McfRun {
    pub samples: Vec<McfSample>,
    pub final_surface: AxisymSurface,
    pub converged: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Parity {
    Even,
    Odd,
}

impl AxisymSurface {
    /// Build a surface from a sampled generating curve. The node count must
    /// be odd (an even segment count, so Simpson weights apply cleanly);
    /// endpoints must sit on the axis exactly; interior radii must be
    /// positive; the enclosed volume must come out positive, which pins the
    /// south-to-north orientation and catches gross self-intersections.
    pub fn from_profile(
        rho: Vec<f64>,
        z: Vec<f64>,
        span: f64,
    ) -> Result<Self, HypersurfaceError> {
        if rho.len() != z.len() {
            return Err(HypersurfaceError::LengthMismatch {
                name: "z",
                expected: rho.len(),
                found: z.len(),
            });
        }
        let n = rho.len();
        if n < 9 || n % 2 == 0 {
            return Err(HypersurfaceError::BadNodeCount { found: n });
        }
        assert!(span > 0.0 && span.is_finite());
        for (name, v) in [("rho", &rho), ("z", &z)] {
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(HypersurfaceError::NonfiniteCoordinate { name, index });
            }
        }
        for index in [0, n - 1] {
            if rho[index] != 0.0 {
                return Err(HypersurfaceError::EndpointOffAxis {
                    index,
                    value: rho[index],
                });
            }
        }
        for (index, &value) in rho.iter().enumerate().take(n - 1).skip(1) {
            if value <= 0.0 {
                return Err(HypersurfaceError::NonpositiveRadius { index, value });
            }
        }
        let s = Self { rho, z, span };
        let volume = s.geometry().volume;
        if volume <= 0.0 {
            return Err(HypersurfaceError::NonpositiveVolume { value: volume });
        }
        Ok(s)
    }

    /// Round sphere of radius `r` on `n + 1` nodes (`n` even).
    pub fn sphere(n: usize, r: f64) -> Self {
        Self::spheroid(n, r, r)
    }

    /// Spheroid with polar semi-axis `a` (along z) and equatorial semi-axis
    /// `b`, parametrized by the polar angle.
    pub fn spheroid(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 8 && n % 2 == 0);
        assert!(a > 0.0 && b > 0.0);
        let span = std::f64::consts::PI;
        let mut rho = Vec::with_capacity(n + 1);
        let mut z = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let v = span * j as f64 / n as f64;
            rho.push(if j == 0 || j == n { 0.0 } else { b * v.sin() });
            z.push(-a * v.cos());
        }
        Self { rho, z, span }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn zed(&self) -> &[f64] {
        &self.z
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn du(&self) -> f64 {
        self.span / (self.len() - 1) as f64
    }

    /// Parameter values of the nodes.
    pub fn nodes(&self) -> Vec<f64> {
        let du = self.du();
        (0..self.len()).map(|j| du * j as f64).collect()
    }

    /// Mirror lookup across the poles: index `-k` reflects to `k` and
    /// `n-1+k` to `n-1-k`, negated for odd fields.
    fn get(&self, v: &[f64], j: isize, parity: Parity) -> f64 {
        let last = (v.len() - 1) as isize;
        let (idx, reflected) = if j < 0 {
            (-j, true)
        } else if j > last {
            (2 * last - j, true)
        } else {
            (j, false)
        };
        debug_assert!((0..=last).contains(&idx), "stencil reaches past one reflection");
        let value = v[idx as usize];
        if reflected && parity == Parity::Odd {
            -value
        } else {
            value
        }
    }

    /// Centered first derivative in the parameter, with pole-parity ghosts.
    fn d1(&self, v: &[f64], parity: Parity) -> Vec<f64> {
        let du = self.du();
        (0..v.len() as isize)
            .map(|j| (self.get(v, j + 1, parity) - self.get(v, j - 1, parity)) / (2.0 * du))
            .collect()
    }

    /// Centered second derivative in the parameter, with pole-parity ghosts.
    fn d2(&self, v: &[f64], parity: Parity) -> Vec<f64> {
        let du = self.du();
        (0..v.len() as isize)
            .map(|j| {
                (self.get(v, j + 1, parity) - 2.0 * v[j as usize] + self.get(v, j - 1, parity))
                    / (du * du)
            })
            .collect()
    }

    fn derivs(&self) -> Derivs {
        let rp = self.d1(&self.rho, Parity::Odd);
        let zp = self.d1(&self.z, Parity::Even);
        let rpp = self.d2(&self.rho, Parity::Odd);
        let zpp = self.d2(&self.z, Parity::Even);
        let e: Vec<f64> = rp.iter().zip(&zp).map(|(&r, &z)| r * r + z * z).collect();
        let se: Vec<f64> = e.iter().map(|&x| x.sqrt()).collect();
        Derivs {
            rp,
            zp,
            rpp,
            zpp,
            e,
            se,
        }
    }

    /// Area density `rho sqrt(E)` per node (the azimuthal `2 pi` factored
    /// out), zero at the poles.
    fn area_density(&self) -> Vec<f64> {
        let d = self.derivs();
        (0..self.len()).map(|j| self.rho[j] * d.se[j]).collect()
    }

    /// Area-weighted mean of a nodal field.
    fn surface_mean(&self, field: &[f64]) -> f64 {
        let w = self.area_density();
        let fw: Vec<f64> = field.iter().zip(&w).map(|(&f, &x)| f * x).collect();
        simpson(&fw, self.du()) / simpson(&w, self.du())
    }

    fn geometry(&self) -> SurfaceGeometry {
        let d = self.derivs();
        let du = self.du();
        let area_density = self.area_density();
        let area = 2.0 * std::f64::consts::PI * simpson(&area_density, du);
        // Divergence-theorem volume (1/3) closed-integral of x . nu dS; the
        // normalizations collapse to (2 pi / 3) int rho (rho z' - z rho') du.
        let integrand: Vec<f64> = (0..self.len())
            .map(|j| self.rho[j] * (self.rho[j] * d.zp[j] - self.z[j] * d.rp[j]))
            .collect();
        let volume = 2.0 * std::f64::consts::PI / 3.0 * simpson(&integrand, du);
        SurfaceGeometry { area, volume }
    }

    /// Smallest and largest chord between neighboring nodes.
    fn spacing_range(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        for j in 0..self.len() - 1 {
            let dr = self.rho[j + 1] - self.rho[j];
            let dz = self.z[j + 1] - self.z[j];
            let chord = (dr * dr + dz * dz).sqrt();
            min = min.min(chord);
            max = max.max(chord);
        }
        (min, max)
    }

    /// Smallest chord between neighboring nodes.
    fn min_spacing(&self) -> f64 {
        self.spacing_range().0
    }

    /// Move every node by `dt (N nu + shift tangent)` and revalidate. Pole
    /// nodes move only along the axis.
    fn displaced(&self, ls: &LapseShift, dt: f64) -> Result<Self, HypersurfaceError> {
        let n = self.len();
        let d = self.derivs();
        let mut rho = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for j in 0..n {
            let (nu_r, nu_z) = (d.zp[j] / d.se[j], -d.rp[j] / d.se[j]);
            let shift = if j == 0 || j == n - 1 { 0.0 } else { ls.shift[j] };
            let vr = ls.lapse[j] * nu_r + shift * d.rp[j];
            let vz = ls.lapse[j] * nu_z + shift * d.zp[j];
            rho.push(self.rho[j] + dt * vr);
            z.push(self.z[j] + dt * vz);
        }
        // z'(pole) vanishes by parity, so the normal is axial there; pin the
        // endpoints to the axis exactly rather than trusting roundoff.
        rho[0] = 0.0;
        rho[n - 1] = 0.0;
        for (name, v) in [("rho", &rho), ("z", &z)] {
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(HypersurfaceError::NonfiniteCoordinate { name, index });
            }
        }
        if let Some(index) = rho[1..n - 1].iter().position(|&r| r <= 0.0) {
            return Err(HypersurfaceError::AxisCrossing { index: index + 1 });
        }
        Ok(Self {
            rho,
            z,
            span: self.span,
        })
    }
}

struct Derivs {
    rp: Vec<f64>,
    zp: Vec<f64>,
    rpp: Vec<f64>,
    zpp: Vec<f64>,
    e: Vec<f64>,
    se: Vec<f64>,
}

fn check_field_len(
    s: &AxisymSurface,
    name: &'static str,
    found: usize,
) -> Result<(), HypersurfaceError> {
    if found != s.len() {
        return Err(HypersurfaceError::LengthMismatch {
            name,
            expected: s.len(),
            found,
        });
    }
    Ok(())
}

/// Induced metric `diag(rho'^2 + z'^2, rho^2)` per node.
pub fn induced_metric(s: &AxisymSurface) -> InducedMetric {
    let d = s.derivs();
    let g_tt = s.rho.iter().map(|&r| r * r).collect();
    InducedMetric { g_uu: d.e, g_tt }
}

/// Second fundamental form against the outward normal, mean curvature
/// `H = kappa_meridian + kappa_azimuthal`, and its area average. At the
/// poles the azimuthal curvature takes its meridian limit.
pub fn second_fundamental_form(s: &AxisymSurface) -> SecondFundamentalForm {
    let n = s.len();
    let d = s.derivs();
    let mut h_uu = Vec::with_capacity(n);
    let mut h_tt = Vec::with_capacity(n);
    let mut mean = Vec::with_capacity(n);
    for j in 0..n {
        let huu = (d.zpp[j] * d.rp[j] - d.rpp[j] * d.zp[j]) / d.se[j];
        let htt = s.rho[j] * d.zp[j] / d.se[j];
        let km = huu / d.e[j];
        let kp = if j == 0 || j == n - 1 {
            km
        } else {
            d.zp[j] / (s.rho[j] * d.se[j])
        };
        h_uu.push(huu);
        h_tt.push(htt);
        mean.push(km + kp);
    }
    let area_average = s.surface_mean(&mean);
    SecondFundamentalForm {
        h_uu,
        h_tt,
        mean_curvature: mean,
        area_average,
    }
}

/// Boundary area (surface quadrature) and enclosed volume (divergence
/// theorem).
pub fn geometry_functionals(s: &AxisymSurface) -> SurfaceGeometry {
    s.geometry()
}

/// Lapse of the volume-preserving mean-curvature flow, `N = <H> - H` with
/// zero shift. Its area integral vanishes up to roundoff because the average
/// uses the same quadrature weights.
pub fn vpmcf_velocity(s: &AxisymSurface) -> LapseShift {
    let sff = second_fundamental_form(s);
    let lapse = sff
        .mean_curvature
        .iter()
        .map(|&h| sff.area_average - h)
        .collect();
    LapseShift {
        lapse,
        shift: vec![0.0; s.len()],
    }
}

/// Largest stable step for a lapse/shift deformation: the parabolic bound of
/// curvature-driven motion and a cell-crossing bound on the speed.
pub fn lapse_stable_step(s: &AxisymSurface, ls: &LapseShift) -> f64 {
    let sff = second_fundamental_form(s);
    let h_max = sff
        .mean_curvature
        .iter()
        .fold(0.0f64, |acc, &h| acc.max(h.abs()));
    let d = s.derivs();
    let speed = (0..s.len())
        .map(|j| ls.lapse[j].abs() + ls.shift[j].abs() * d.se[j])
        .fold(0.0f64, f64::max);
    let h_min = s.min_spacing();
    let parabolic = LAPSE_C_STAB * h_min * h_min / h_max.max(1.0);
    if speed > 0.0 {
        parabolic.min(0.5 * h_min / speed)
    } else {
        parabolic
    }
}

/// Move the surface by `dt (N nu + shift tangent)`. The parametrization is
/// left alone so material points keep their indices (rate probes depend on
/// that); apply [`resampled_uniform`] afterwards to restore uniform
/// arclength, as [`run_vpmcf`] does on a cadence.
pub fn lapse_shift_step(
    s: &AxisymSurface,
    ls: &LapseShift,
    dt: f64,
) -> Result<AxisymSurface, HypersurfaceError> {
    check_field_len(s, "lapse", ls.lapse.len())?;
    check_field_len(s, "shift", ls.shift.len())?;
    let max_dt = lapse_stable_step(s, ls);
    // Ulp slack so a fixed dt equal to the bound survives roundoff drift.
    if dt > max_dt * (1.0 + 1e-9) {
        return Err(HypersurfaceError::StepTooLarge { dt, max_dt });
    }
    s.displaced(ls, dt)
}

/// Resample the generating curve to uniform arclength (by chord length) with
/// a cubic through each segment's four surrounding nodes, pole ghosts
/// included. Endpoints are preserved exactly; the parameter span becomes the
/// total chord length, so the resampled metric has `g_uu` close to 1.
pub fn resampled_uniform(s: &AxisymSurface) -> Result<AxisymSurface, HypersurfaceError> {
    let n = s.len();
    let mut cum = Vec::with_capacity(n);
    cum.push(0.0);
    for j in 0..n - 1 {
        let dr = s.rho[j + 1] - s.rho[j];
        let dz = s.z[j + 1] - s.z[j];
        cum.push(cum[j] + (dr * dr + dz * dz).sqrt());
    }
    let total = cum[n - 1];
    let catmull = |p0: f64, p1: f64, p2: f64, p3: f64, x: f64| -> f64 {
        0.5 * (2.0 * p1
            + (p2 - p0) * x
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * x * x
            + (3.0 * (p1 - p2) + p3 - p0) * x * x * x)
    };
    let mut rho = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        if k == 0 || k == n - 1 {
            rho.push(s.rho[if k == 0 { 0 } else { n - 1 }]);
            z.push(s.z[if k == 0 { 0 } else { n - 1 }]);
            continue;
        }
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 2 < n && cum[seg + 1] < target {
            seg += 1;
        }
        let x = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
        let j = seg as isize;
        rho.push(catmull(
            s.get(&s.rho, j - 1, Parity::Odd),
            s.rho[seg],
            s.rho[seg + 1],
            s.get(&s.rho, j + 2, Parity::Odd),
            x,
        ));
        z.push(catmull(
            s.get(&s.z, j - 1, Parity::Even),
            s.z[seg],
            s.z[seg + 1],
            s.get(&s.z, j + 2, Parity::Even),
            x,
        ));
    }
    if let Some(index) = rho[1..n - 1].iter().position(|&r| r <= 0.0) {
        return Err(HypersurfaceError::AxisCrossing { index: index + 1 });
    }
    Ok(AxisymSurface {
        rho,
        z,
        span: total,
    })
}

/// Seeded low-order Fourier lapse/shift over the surface's parameter span:
/// three cosine modes for the lapse (even about both poles) and three sine
/// modes for the shift (odd, vanishing at the poles), with coefficients
/// drawn uniformly from [-1, 1].  Smooth at the poles by construction, so
/// it exercises the evolution equations without manufacturing pole
/// singularities.  Deterministic in `seed`.
pub fn seeded_fourier_lapse_shift(s: &AxisymSurface, seed: u64) -> LapseShift {
    let mut rng = crate::util::rng::SplitMix64::new(seed);
    let coeffs: Vec<f64> = (0..6).map(|_| rng.next_in(-1.0, 1.0)).collect();
    let span = s.span();
    let us = s.nodes();
    let pi = std::f64::consts::PI;
    let lapse = us
        .iter()
        .map(|&u| {
            (1..=3)
                .map(|k| coeffs[k - 1] * (k as f64 * pi * u / span).cos())
                .sum()
        })
        .collect();
    let shift = us
        .iter()
        .map(|&u| {
            (1..=3)
                .map(|k| coeffs[k + 2] * (k as f64 * pi * u / span).sin())
                .sum()
        })
        .collect();
    LapseShift { lapse, shift }
}

/// Predicted first-order rate of the induced metric under a lapse/shift:
///
/// ```text
/// dg_uu/dt = 2 N h_uu + 2 E S' + E' S
/// dg_tt/dt = 2 N h_tt + G' S
/// ```
///
/// (`S` the contravariant shift, `G = rho^2`), the symmetrized covariant
/// shift gradient written out for the diagonal metric.
pub fn adm_metric_rate(
    s: &AxisymSurface,
    ls: &LapseShift,
) -> Result<MetricRate, HypersurfaceError> {
    check_field_len(s, "lapse", ls.lapse.len())?;
    check_field_len(s, "shift", ls.shift.len())?;
    let n = s.len();
    let sff = second_fundamental_form(s);
    let g = induced_metric(s);
    let ep = s.d1(&g.g_uu, Parity::Even);
    let gp = s.d1(&g.g_tt, Parity::Even);
    let sp = s.d1(&ls.shift, Parity::Odd);
    let mut g_uu = Vec::with_capacity(n);
    let mut g_tt = Vec::with_capacity(n);
    for j in 0..n {
        g_uu.push(
            2.0 * ls.lapse[j] * sff.h_uu[j]
                + 2.0 * g.g_uu[j] * sp[j]
                + ep[j] * ls.shift[j],
        );
        g_tt.push(2.0 * ls.lapse[j] * sff.h_tt[j] + gp[j] * ls.shift[j]);
    }
    Ok(MetricRate { g_uu, g_tt })
}

/// Predicted first-order rate of the second fundamental form:
///
/// ```text
/// dh_uu/dt = -(N'' - (E'/2E) N') + N h_uu^2 / E + 2 h_uu S' + S h_uu'
/// dh_tt/dt = -(G'/2E) N'        + N z'^2 / E   + S h_tt'
/// ```
///
/// The azimuthal square `h_tt^2 / g_tt` is written in its pole-regular form
/// `z'^2 / E`.
pub fn adm_shape_rate(
    s: &AxisymSurface,
    ls: &LapseShift,
) -> Result<ShapeRate, HypersurfaceError> {
    check_field_len(s, "lapse", ls.lapse.len())?;
    check_field_len(s, "shift", ls.shift.len())?;
    let n = s.len();
    let d = s.derivs();
    let sff = second_fundamental_form(s);
    let g = induced_metric(s);
    let ep = s.d1(&g.g_uu, Parity::Even);
    let gp = s.d1(&g.g_tt, Parity::Even);
    let np = s.d1(&ls.lapse, Parity::Even);
    let npp = s.d2(&ls.lapse, Parity::Even);
    let sp = s.d1(&ls.shift, Parity::Odd);
    let huup = s.d1(&sff.h_uu, Parity::Even);
    let http = s.d1(&sff.h_tt, Parity::Even);
    let mut h_uu = Vec::with_capacity(n);
    let mut h_tt = Vec::with_capacity(n);
    for j in 0..n {
        let (nl, sh) = (ls.lapse[j], ls.shift[j]);
        let e = g.g_uu[j];
        h_uu.push(
            -(npp[j] - ep[j] / (2.0 * e) * np[j])
                + nl * sff.h_uu[j] * sff.h_uu[j] / e
                + 2.0 * sff.h_uu[j] * sp[j]
                + sh * huup[j],
        );
        h_tt.push(
            -gp[j] / (2.0 * e) * np[j] + nl * d.zp[j] * d.zp[j] / e + sh * http[j],
        );
    }
    Ok(ShapeRate { h_uu, h_tt })
}

/// Run the volume-preserving mean-curvature flow with midpoint steps. One
/// trace row per step; the run ends at convergence (`max|H - <H>| <`
/// [`VPMCF_DEV_TOL`]) or `t_end`, whichever comes first.
///
/// `dt` is a step cap: every step takes
/// `min(dt, VPMCF_BOUND_FRACTION * stable bound, time remaining)`, so the
/// run survives the bound tightening as pole spacing contracts. The
/// parametrization is never touched mid-run. A transit to a round limit
/// distorts the node spacing only boundedly (about 2.9:1 for the 2:1
/// prolate), which resolution absorbs, while any reparametrization would
/// move the discrete area estimate by a relative O(h^2) in either direction
/// and spoil the monotone area trace; condition inputs with
/// [`resampled_uniform`] beforehand if their parametrization is poor.
pub fn run_vpmcf(
    s0: &AxisymSurface,
    t_end: f64,
    dt: f64,
    temperature: f64,
) -> Result<McfRun, HypersurfaceError> {
    assert!(t_end > 0.0 && dt > 0.0);
    assert!(temperature > 0.0);
    let mut s = s0.clone();
    let mut t = 0.0;
    let mut samples = Vec::new();
    let mut converged = false;
    let mut step = 0usize;
    loop {
        let geo = s.geometry();
        let sff = second_fundamental_form(&s);
        let v = vpmcf_velocity(&s);
        let max_dev = sff
            .mean_curvature
            .iter()
            .fold(0.0f64, |acc, &h| acc.max((h - sff.area_average).abs()));
        samples.push(McfSample {
            step,
            t,
            area: geo.area,
            volume: geo.volume,
            h_average: sff.area_average,
            max_dev,
            entropy_rate: open_entropy_rate(&s, &v, temperature, geo.volume),
        });
        if max_dev < VPMCF_DEV_TOL {
            converged = true;
            break;
        }
        if t >= t_end {
            break;
        }
        let step_dt = dt
            .min(VPMCF_BOUND_FRACTION * lapse_stable_step(&s, &v))
            .min(t_end - t);
        assert!(
            step_dt > t_end * 1e-14,
            "stability bound collapsed; the surface is degenerating"
        );
        let mid = s.displaced(&v, 0.5 * step_dt)?;
        let v_mid = vpmcf_velocity(&mid);
        s = s.displaced(&v_mid, step_dt)?;
        t += step_dt;
        step += 1;
    }
    Ok(McfRun {
        samples,
        final_surface: s,
        converged,
    })
}

/// Apply one variance step to the boundary metric and report the measured
/// area change next to its variance prediction.
///
/// The conformal choice `delta g = dt q(<q> - q) g` predicts
/// `-dt * area * var(q)` (the boundary here is two-dimensional, so the
/// trace factor is 1); the tensor choice `delta g_ij = dt (<m> - m) m_ij`
/// predicts `-dt/2 * area * var(m)` with `m` the metric trace of `m_ij`.
/// The conformal prediction is exact up to roundoff; the tensor one carries
/// an `O(dt^2)` remainder from the area density's square root.
pub fn variance_flow_step(
    s: &AxisymSurface,
    field: &VarianceField,
    dt: f64,
) -> Result<VarianceStep, HypersurfaceError> {
    assert!(dt > 0.0);
    let n = s.len();
    let du = s.du();
    let g = induced_metric(s);
    let w = s.area_density();
    let area = 2.0 * std::f64::consts::PI * simpson(&w, du);
    let mean = |f: &[f64]| -> f64 {
        let fw: Vec<f64> = f.iter().zip(&w).map(|(&a, &b)| a * b).collect();
        simpson(&fw, du) / simpson(&w, du)
    };
    let (g_uu, g_tt, predicted) = match field {
        VarianceField::Scalar(q) => {
            check_field_len(s, "q", q.len())?;
            let qm = mean(q);
            let var = mean(&q.iter().map(|&x| x * x).collect::<Vec<_>>()) - qm * qm;
            let p: Vec<f64> = q.iter().map(|&x| x * (qm - x)).collect();
            let p_min = p.iter().fold(0.0f64, |acc, &x| acc.min(x));
            if p_min < 0.0 && dt >= -1.0 / p_min {
                // The conformal factor 1 + dt p must stay positive.
                return Err(HypersurfaceError::StepTooLarge {
                    dt,
                    max_dt: -0.5 / p_min,
                });
            }
            let mut g_uu = Vec::with_capacity(n);
            let mut g_tt = Vec::with_capacity(n);
            for j in 0..n {
                let factor = 1.0 + dt * p[j];
                g_uu.push(factor * g.g_uu[j]);
                g_tt.push(factor * g.g_tt[j]);
            }
            (g_uu, g_tt, -dt * area * var)
        }
        VarianceField::Tensor { m_uu, m_tt } => {
            check_field_len(s, "m_uu", m_uu.len())?;
            check_field_len(s, "m_tt", m_tt.len())?;
            // Metric trace; at the poles g_tt vanishes together with m_tt
            // (any smooth tensor does), so take the ratio's parity limit
            // m_tt'' / g_tt'' there.
            let mttpp = s.d2(m_tt, Parity::Even);
            let gttpp = s.d2(&g.g_tt, Parity::Even);
            let trace: Vec<f64> = (0..n)
                .map(|j| {
                    let azimuthal = if j == 0 || j == n - 1 {
                        mttpp[j] / gttpp[j]
                    } else {
                        m_tt[j] / g.g_tt[j]
                    };
                    m_uu[j] / g.g_uu[j] + azimuthal
                })
                .collect();
            let tm = mean(&trace);
            let var = mean(&trace.iter().map(|&x| x * x).collect::<Vec<_>>()) - tm * tm;
            let mut g_uu = Vec::with_capacity(n);
            let mut g_tt = Vec::with_capacity(n);
            for j in 0..n {
                let guu = g.g_uu[j] + dt * (tm - trace[j]) * m_uu[j];
                let gtt = g.g_tt[j] + dt * (tm - trace[j]) * m_tt[j];
                if guu <= 0.0 || (gtt <= 0.0 && j != 0 && j != n - 1) {
                    return Err(HypersurfaceError::StepTooLarge { dt, max_dt: 0.5 * dt });
                }
                g_uu.push(guu);
                g_tt.push(gtt.max(0.0));
            }
            (g_uu, g_tt, -0.5 * dt * area * var)
        }
    };
    let density_new: Vec<f64> = (0..n).map(|j| (g_uu[j] * g_tt[j]).sqrt()).collect();
    let measured = 2.0 * std::f64::consts::PI * simpson(&density_new, du) - area;
    Ok(VarianceStep {
        g_uu,
        g_tt,
        measured,
        predicted,
    })
}

/// Surface integral `int f dS` of a node field against the area measure
/// `2 pi rho sqrt(E) du` (Simpson weights). With `f = 1` this is the area;
/// with the volume-preserving lapse `N = <H> - H` it vanishes to roundoff.
pub fn area_integral(s: &AxisymSurface, field: &[f64]) -> f64 {
    assert_eq!(field.len(), s.len(), "field length mismatch");
    let w = s.area_density();
    let integrand: Vec<f64> = (0..s.len()).map(|j| field[j] * w[j]).collect();
    2.0 * std::f64::consts::PI * simpson(&integrand, s.du())
}

/// Leading entropy rate of the open-manifold expansion for a deformation
/// with lapse `N`:
///
/// ```text
/// dS/dt = -sqrt(4 pi) T^{-1/2} / (8 Vol M) * int N H dS
/// ```
///
/// With `N = <H> - H` the integral is minus a curvature variance, so the
/// rate is nonnegative on every surface.
pub fn open_entropy_rate(s: &AxisymSurface, ls: &LapseShift, temperature: f64, vol_m: f64) -> f64 {
    assert!(temperature > 0.0 && vol_m > 0.0);
    assert_eq!(ls.lapse.len(), s.len(), "lapse length mismatch");
    let sff = second_fundamental_form(s);
    let w = s.area_density();
    let integrand: Vec<f64> = (0..s.len())
        .map(|j| ls.lapse[j] * sff.mean_curvature[j] * w[j])
        .collect();
    let nh = 2.0 * std::f64::consts::PI * simpson(&integrand, s.du());
    -(4.0 * std::f64::consts::PI).sqrt() / temperature.sqrt() / (8.0 * vol_m) * nh
}
