//! Intrinsic entropy-derived flows of warped product 2-metrics.
//!
//! The state is a metric `g = A(x) dx^2 + B(x) dy^2` with a periodic fiber
//! `y` of length `2 pi`, sampled on a uniform grid in `x`. Two topologies
//! are supported: a torus (`x` periodic) and a sphere of revolution (`x` in
//! `[0, X]` with the fiber collapsing at both ends). Sphere grids are
//! staggered, `x_j = (j + 1/2) h`, so no node sits on a pole; pole-crossing
//! stencils use reflection ghosts with the parity each field actually has
//! there (`sqrt(B)` odd, `A` and scalars even).
//!
//! All second-order operators are built from one flux form. With
//! `phi = sqrt(B)`:
//!
//! ```text
//! Lap psi = (flux[j+1/2] - flux[j-1/2]) / (h sqrt(A B))
//! flux[k] = (phi_bar / sqrt(A)_bar)[k] * (psi[k] - psi[k-1]) / h
//! ```
//!
//! The face average of an odd field vanishes identically at a pole face, so
//! the integral of `Lap psi` telescopes to exactly zero on both topologies,
//! and the yy-Hessian is folded into the xx-component so that the discrete
//! trace `g^{ij} Hess_ij` reproduces the flux Laplacian bitwise. That
//! exactness is what makes the normalized flow's trace identity and volume
//! conservation hold at roundoff rather than discretization accuracy.
//!
//! Time stepping is classical RK4. The entropy flows move the metric with
//! two derivatives of the scalar curvature (four of the metric), so the
//! explicit-scheme bound is quartic in the spacing:
//!
//! ```text
//! dt_max = c_stab h^4 / max(1, max|R|^3)
//! ```
//!
//! with `c_stab = 0.02`. The curvature factor normalizes the bound across
//! sphere radii; it assumes metric coefficients of order one, and data far
//! below unit scale can defeat it, in which case the positivity backstop
//! inside the stepper fires instead of silently producing garbage.

use crate::ensembles::gibbs_entropy_closed_d2_from_moments;
use crate::util::fd::sampled_derivative;
use crate::util::lsq::linear_fit;
use crate::util::ode::rkf45;
use std::f64::consts::PI;
use thiserror::Error;

/// Stability-margin factor for the entropy flows (quartic bound).
pub const ENTROPY_C_STAB: f64 = 0.02;
/// Stability-margin factor for the weighted Ricci-type flow (quadratic bound).
pub const PERELMAN_C_STAB: f64 = 0.1;
/// A smooth (cone-free) pole needs `sqrt(B) / (s sqrt(A)) -> 1` with `s` the
/// coordinate distance to the pole; this is the accepted deviation.
pub const POLE_REGULARITY_TOL: f64 = 0.1;
/// Temperature used for entropy traces when the caller does not pick one.
pub const DEFAULT_GIBBS_TEMPERATURE: f64 = 100.0;
/// Below this curvature contrast (relative to the mean) a perturbation is
/// considered absent and no decay rate is fitted.
pub const NO_PERTURBATION_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceFlowError {
    #[error("metric coefficient {name}[{index}] = {value:e} is not positive")]
    NonpositiveMetric {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("field length {found} does not match the grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(
        "pole regularity violated at the {which} pole: sqrt(B)/(s sqrt(A)) = {ratio} \
         (a cone-free pole needs 1)"
    )]
    PoleRegularityViolated { which: &'static str, ratio: f64 },
    #[error("time step {dt:e} exceeds the stability bound {max_dt:e}")]
    StepTooLarge { dt: f64, max_dt: f64 },
    #[error("metric positivity lost during a step (stage {stage})")]
    PositivityLost { stage: usize },
    #[error("adaptive step size {step:e} underflowed at t = {t}")]
    ToleranceFailure { t: f64, step: f64 },
}

/// Which 1-manifold the warped metric lives over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// `x` periodic with the given period; nodes `x_j = j h`.
    Torus { period: f64 },
    /// `x` in `[0, length]` with poles at both ends; staggered nodes
    /// `x_j = (j + 1/2) h`.
    SphereOfRevolution { length: f64 },
}

impl Topology {
    fn extent(self) -> f64 {
        match self {
            Topology::Torus { period } => period,
            Topology::SphereOfRevolution { length } => length,
        }
    }
}

/// Reflection parity of a field across a pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parity {
    Even,
    Odd,
}

/// Warped product metric `A(x) dx^2 + B(x) dy^2` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedMetric2D {
    topology: Topology,
    h: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Log-density weight `f` entering the weighted functional `F(g, f)`;
/// sampled on the same grid as the metric it accompanies.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensity {
    pub values: Vec<f64>,
}

/// Symmetric velocity `(v_xx, v_yy)` of the metric, one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricVelocity {
    pub va: Vec<f64>,
    pub vb: Vec<f64>,
}

/// Which member of the entropy-flow family drives the metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowVariant {
    /// `dg/dt = (R^2/4) g - Hess R + g Lap R`. Grows volume where the
    /// curvature varies.
    Unnormalized,
    /// `dg/dt = ((R^2 - <R^2>)/4) g - Hess R`. The mean subtraction and the
    /// dropped Laplacian term make the velocity trace-free in the integrated
    /// sense, so total volume is conserved.
    Normalized,
    /// `dg/dt = ((R^2 - <R^2>)/4) g - Hess R + g Lap R`: the unnormalized
    /// law with its volume mode projected out. Diagnostic variant; unlike
    /// the normalized law it damps non-round sphere perturbations.
    VolumeProjected,
}

/// Whether the Ricci-type step carries the `exp(-f)` weight in the velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerelmanVariant {
    /// `dg/dt = -2 exp(-f) (Ric + Hess f)`; the gradient reading in which
    /// the weight multiplies the descent direction pointwise.
    Weighted,
    /// `dg/dt = -2 (Ric + Hess f)`: the usual modified Ricci flow.
    Standard,
}

/// Maximally symmetric state: a round d-sphere of radius `r` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxSymState {
    pub d: usize,
    pub r: f64,
    pub t: f64,
}

/// Result of a perturbation-decay fit.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayEstimate {
    /// The initial curvature contrast was below [`NO_PERTURBATION_FLOOR`];
    /// there is nothing to fit a rate to.
    NoPerturbation,
    /// Fitted slope of `ln max|R - <R>|` against time. Negative means the
    /// perturbation decays.
    Slope { slope: f64, samples: usize },
}

/// One sampled row of an entropy-flow run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub step: usize,
    pub t: f64,
    pub vol: f64,
    pub mean_r2: f64,
    pub entropy: f64,
    /// Finite-difference derivative of the sampled entropy trace.
    pub dsdt_fd: f64,
    /// Curvature-fluctuation prediction `(<R^4> - <R^2>^2) / (240 T^2)`.
    pub dsdt_variance: f64,
}

/// Trace and final state of an entropy-flow run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub samples: Vec<FlowSample>,
    pub final_metric: WarpedMetric2D,
}

/// Volume and curvature moments of a metric, the inputs of the closed-surface
/// entropy expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureMoments {
    pub vol: f64,
    pub mean_r: f64,
    pub mean_r2: f64,
    pub mean_r4: f64,
}

impl WarpedMetric2D {
    /// Build a metric from raw coefficient arrays, validating positivity and
    /// (for spheres) pole regularity.
    pub fn from_parts(
        topology: Topology,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self, SurfaceFlowError> {
        if a.len() != b.len() {
            return Err(SurfaceFlowError::LengthMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        let n = a.len();
        assert!(n >= 8, "grid needs at least 8 nodes, got {n}");
        let extent = topology.extent();
        assert!(
            extent.is_finite() && extent > 0.0,
            "domain extent must be positive"
        );
        for (name, field) in [("A", &a), ("B", &b)] {
            for (index, &value) in field.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(SurfaceFlowError::NonpositiveMetric { name, index, value });
                }
            }
        }
        let m = WarpedMetric2D {
            topology,
            h: extent / n as f64,
            a,
            b,
        };
        m.check_pole_regularity()?;
        Ok(m)
    }

    /// Flat torus: `A = B = 1`, `x` of the given period.
    pub fn flat_torus(n: usize, period: f64) -> Self {
        Self::from_parts(Topology::Torus { period }, vec![1.0; n], vec![1.0; n])
            .expect("constant coefficients are valid")
    }

    /// Torus with `A = 1`, `B = (1 + amplitude cos x)^2`, period `2 pi`.
    pub fn perturbed_torus(n: usize, amplitude: f64) -> Self {
        assert!(amplitude.abs() < 1.0, "warp amplitude must stay below 1");
        let b = (0..n)
            .map(|j| {
                let x = 2.0 * PI * j as f64 / n as f64;
                (1.0 + amplitude * x.cos()).powi(2)
            })
            .collect();
        Self::from_parts(Topology::Torus { period: 2.0 * PI }, vec![1.0; n], b)
            .expect("positive warp is valid")
    }

    /// Round sphere of the given radius: `A = r^2`, `B = r^2 sin^2 x` on
    /// `[0, pi]`.
    pub fn round_sphere(n: usize, radius: f64) -> Self {
        assert!(radius.is_finite() && radius > 0.0);
        let h = PI / n as f64;
        let b = (0..n)
            .map(|j| {
                let x = (j as f64 + 0.5) * h;
                (radius * x.sin()).powi(2)
            })
            .collect();
        Self::from_parts(
            Topology::SphereOfRevolution { length: PI },
            vec![radius * radius; n],
            b,
        )
        .expect("round sphere data is regular")
    }

    /// Round sphere with an axisymmetric warp `sqrt(B) -> sqrt(B) (1 + s sin^2 x)`.
    /// The curvature perturbation it induces is a pure degree-two harmonic
    /// (plus the mean shift), the slowest non-round mode of the sphere flows.
    pub fn perturbed_sphere(n: usize, radius: f64, s: f64) -> Self {
        assert!(radius.is_finite() && radius > 0.0);
        assert!(s.abs() < 0.5, "warp amplitude must stay small");
        let h = PI / n as f64;
        let b = (0..n)
            .map(|j| {
                let x = (j as f64 + 0.5) * h;
                let phi = radius * x.sin() * (1.0 + s * x.sin() * x.sin());
                phi * phi
            })
            .collect();
        Self::from_parts(
            Topology::SphereOfRevolution { length: PI },
            vec![radius * radius; n],
            b,
        )
        .expect("warped sphere data is regular")
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Node coordinate `x_j`.
    pub fn x(&self, j: usize) -> f64 {
        match self.topology {
            Topology::Torus { .. } => j as f64 * self.h,
            Topology::SphereOfRevolution { .. } => (j as f64 + 0.5) * self.h,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    /// Euler characteristic of the underlying surface.
    pub fn euler_characteristic(&self) -> f64 {
        match self.topology {
            Topology::Torus { .. } => 0.0,
            Topology::SphereOfRevolution { .. } => 2.0,
        }
    }

    /// Total volume (area) `int sqrt(A B) dx dy`.
    pub fn volume(&self) -> f64 {
        2.0 * PI
            * self.h
            * self
                .a
                .iter()
                .zip(&self.b)
                .map(|(&a, &b)| (a * b).sqrt())
                .sum::<f64>()
    }

    /// Integral of a nodal field against the volume element.
    pub fn integral(&self, field: &[f64]) -> f64 {
        assert_eq!(field.len(), self.len());
        2.0 * PI
            * self.h
            * field
                .iter()
                .zip(self.a.iter().zip(&self.b))
                .map(|(&v, (&a, &b))| v * (a * b).sqrt())
                .sum::<f64>()
    }

    /// Ghost-aware sample of a nodal field one reflection beyond the grid.
    fn get(&self, v: &[f64], j: isize, parity: Parity) -> f64 {
        let n = v.len() as isize;
        match self.topology {
            Topology::Torus { .. } => v[j.rem_euclid(n) as usize],
            Topology::SphereOfRevolution { .. } => {
                let (idx, reflected) = if j < 0 {
                    (-1 - j, true)
                } else if j >= n {
                    (2 * n - 1 - j, true)
                } else {
                    (j, false)
                };
                debug_assert!((0..n).contains(&idx), "stencil reaches past one reflection");
                let value = v[idx as usize];
                if reflected && parity == Parity::Odd {
                    -value
                } else {
                    value
                }
            }
        }
    }

    /// Centered first derivative of a nodal field with the given pole parity.
    fn centered(&self, v: &[f64], parity: Parity) -> Vec<f64> {
        let n = v.len() as isize;
        (0..n)
            .map(|j| (self.get(v, j + 1, parity) - self.get(v, j - 1, parity)) / (2.0 * self.h))
            .collect()
    }

    fn phi(&self) -> Vec<f64> {
        self.b.iter().map(|&b| b.sqrt()).collect()
    }

    fn sqrt_a(&self) -> Vec<f64> {
        self.a.iter().map(|&a| a.sqrt()).collect()
    }

    /// `sqrt(B)/(s sqrt(A))` at the node nearest each pole, `s` the
    /// coordinate distance to the pole. Both are 1 for a smooth pole.
    fn pole_ratios(&self) -> Option<(f64, f64)> {
        match self.topology {
            Topology::Torus { .. } => None,
            Topology::SphereOfRevolution { length } => {
                let n = self.len();
                let s = 0.5 * self.h;
                let left = self.b[0].sqrt() / (s * self.a[0].sqrt());
                let right = self.b[n - 1].sqrt() / ((length - self.x(n - 1)) * self.a[n - 1].sqrt());
                Some((left, right))
            }
        }
    }

    fn check_pole_regularity(&self) -> Result<(), SurfaceFlowError> {
        if let Some((left, right)) = self.pole_ratios() {
            if (left - 1.0).abs() > POLE_REGULARITY_TOL {
                return Err(SurfaceFlowError::PoleRegularityViolated {
                    which: "left",
                    ratio: left,
                });
            }
            if (right - 1.0).abs() > POLE_REGULARITY_TOL {
                return Err(SurfaceFlowError::PoleRegularityViolated {
                    which: "right",
                    ratio: right,
                });
            }
        }
        Ok(())
    }

    /// Metric advanced by `dt` along a velocity, with a positivity check.
    fn advanced(
        &self,
        dt: f64,
        va: &[f64],
        vb: &[f64],
        stage: usize,
    ) -> Result<Self, SurfaceFlowError> {
        let step = |old: &[f64], vel: &[f64]| -> Option<Vec<f64>> {
            let mut out = Vec::with_capacity(old.len());
            for (&g, &v) in old.iter().zip(vel) {
                let next = g + dt * v;
                if !(next.is_finite() && next > 0.0) {
                    return None;
                }
                out.push(next);
            }
            Some(out)
        };
        let a = step(&self.a, va).ok_or(SurfaceFlowError::PositivityLost { stage })?;
        let b = step(&self.b, vb).ok_or(SurfaceFlowError::PositivityLost { stage })?;
        Ok(WarpedMetric2D {
            topology: self.topology,
            h: self.h,
            a,
            b,
        })
    }
}

/// Scalar curvature `R = -(2/sqrt(B)) (1/sqrt(A)) d/dx [(1/sqrt(A)) d sqrt(B)/dx]`
/// at every node, via face-centered differences. Exact for the round sphere
/// (constant to roundoff) and second-order accurate in general.
pub fn scalar_curvature(m: &WarpedMetric2D) -> Result<Vec<f64>, SurfaceFlowError> {
    m.check_pole_regularity()?;
    let n = m.len();
    let phi = m.phi();
    let sa = m.sqrt_a();
    // w[k] = (1/sqrt(A)) d phi/dx at face k (between nodes k-1 and k).
    let w: Vec<f64> = (0..=n as isize)
        .map(|k| {
            let dphi = m.get(&phi, k, Parity::Odd) - m.get(&phi, k - 1, Parity::Odd);
            let sa_face = 0.5 * (m.get(&sa, k - 1, Parity::Even) + m.get(&sa, k, Parity::Even));
            dphi / (m.h() * sa_face)
        })
        .collect();
    Ok((0..n)
        .map(|j| -2.0 * (w[j + 1] - w[j]) / (m.h() * sa[j] * phi[j]))
        .collect())
}

/// Flux-form Laplace-Beltrami operator on a scalar field. The face
/// coefficient is the averaged `sqrt(B/A)`, which vanishes identically at
/// pole faces, so the integral of the result telescopes to exactly zero.
pub fn laplacian(m: &WarpedMetric2D, psi: &[f64]) -> Result<Vec<f64>, SurfaceFlowError> {
    if psi.len() != m.len() {
        return Err(SurfaceFlowError::LengthMismatch {
            expected: m.len(),
            found: psi.len(),
        });
    }
    let n = m.len();
    let phi = m.phi();
    let sa = m.sqrt_a();
    let flux: Vec<f64> = (0..=n as isize)
        .map(|k| {
            let phi_face = 0.5 * (m.get(&phi, k - 1, Parity::Odd) + m.get(&phi, k, Parity::Odd));
            let sa_face = 0.5 * (m.get(&sa, k - 1, Parity::Even) + m.get(&sa, k, Parity::Even));
            let dpsi = m.get(psi, k, Parity::Even) - m.get(psi, k - 1, Parity::Even);
            (phi_face / sa_face) * dpsi / m.h()
        })
        .collect();
    Ok((0..n)
        .map(|j| (flux[j + 1] - flux[j]) / (m.h() * sa[j] * phi[j]))
        .collect())
}

/// Covariant Hessian `(Hess psi)_xx, (Hess psi)_yy` of a scalar field.
///
/// The yy-component is the Christoffel term `B'/(2A) psi'`; the xx-component
/// is then defined through the flux Laplacian, `A (Lap psi - hyy / B)`, so
/// the discrete trace identity `g^{ij} (Hess psi)_ij = Lap psi` holds bitwise
/// rather than to discretization order.
pub fn covariant_hessian(
    m: &WarpedMetric2D,
    psi: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), SurfaceFlowError> {
    let lap = laplacian(m, psi)?;
    let bp = m.centered(m.b(), Parity::Even);
    let pp = m.centered(psi, Parity::Even);
    let hyy: Vec<f64> = (0..m.len())
        .map(|j| bp[j] * pp[j] / (2.0 * m.a()[j]))
        .collect();
    let hxx: Vec<f64> = (0..m.len())
        .map(|j| m.a()[j] * (lap[j] - hyy[j] / m.b()[j]))
        .collect();
    Ok((hxx, hyy))
}

/// Volume-weighted mean of a nodal field.
pub fn manifold_mean(m: &WarpedMetric2D, field: &[f64]) -> f64 {
    assert_eq!(field.len(), m.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (&v, (&a, &b)) in field.iter().zip(m.a().iter().zip(m.b())) {
        let w = (a * b).sqrt();
        num += v * w;
        den += w;
    }
    num / den
}

/// `int R dV - 4 pi chi`: the Gauss-Bonnet defect of the discrete curvature.
/// Exactly zero on tori (telescoping); on spheres it is carried entirely by
/// the two pole-face slope estimates and shrinks as `h^2`.
pub fn gauss_bonnet_defect(m: &WarpedMetric2D) -> Result<f64, SurfaceFlowError> {
    let r = scalar_curvature(m)?;
    Ok(m.integral(&r) - 4.0 * PI * m.euler_characteristic())
}

/// Volume and curvature moments in one sweep.
pub fn curvature_moments(m: &WarpedMetric2D) -> Result<CurvatureMoments, SurfaceFlowError> {
    let r = scalar_curvature(m)?;
    let r2: Vec<f64> = r.iter().map(|&v| v * v).collect();
    let r4: Vec<f64> = r2.iter().map(|&v| v * v).collect();
    Ok(CurvatureMoments {
        vol: m.volume(),
        mean_r: manifold_mean(m, &r),
        mean_r2: manifold_mean(m, &r2),
        mean_r4: manifold_mean(m, &r4),
    })
}

/// Canonical entropy of the metric at temperature `t` through the
/// closed-surface expansion in curvature moments.
pub fn closed_surface_entropy(m: &WarpedMetric2D, t: f64) -> Result<f64, SurfaceFlowError> {
    let mom = curvature_moments(m)?;
    Ok(gibbs_entropy_closed_d2_from_moments(
        mom.vol, mom.mean_r, mom.mean_r2, t,
    ))
}

/// Metric velocity of the selected entropy flow at the current state.
pub fn entropy_flow_velocity(
    m: &WarpedMetric2D,
    variant: FlowVariant,
) -> Result<MetricVelocity, SurfaceFlowError> {
    let r = scalar_curvature(m)?;
    let lap_r = laplacian(m, &r)?;
    let (hxx, hyy) = covariant_hessian(m, &r)?;
    let mean_r2 = match variant {
        FlowVariant::Unnormalized => 0.0,
        FlowVariant::Normalized | FlowVariant::VolumeProjected => {
            let r2: Vec<f64> = r.iter().map(|&v| v * v).collect();
            manifold_mean(m, &r2)
        }
    };
    let keep_lap = !matches!(variant, FlowVariant::Normalized);
    let n = m.len();
    let mut va = Vec::with_capacity(n);
    let mut vb = Vec::with_capacity(n);
    for j in 0..n {
        let conformal = (r[j] * r[j] - mean_r2) / 4.0;
        let lap_term = if keep_lap { lap_r[j] } else { 0.0 };
        va.push(conformal * m.a()[j] - hxx[j] + m.a()[j] * lap_term);
        vb.push(conformal * m.b()[j] - hyy[j] + m.b()[j] * lap_term);
    }
    Ok(MetricVelocity { va, vb })
}

/// `int sqrt(g) g^{ij} v_ij dx dy`: the volume derivative (twice) induced by
/// a metric velocity. Zero at roundoff for the volume-conserving variants.
pub fn trace_integral(m: &WarpedMetric2D, v: &MetricVelocity) -> f64 {
    let tr: Vec<f64> = (0..m.len())
        .map(|j| v.va[j] / m.a()[j] + v.vb[j] / m.b()[j])
        .collect();
    m.integral(&tr)
}

/// Largest stable RK4 step for the entropy flows at the current state.
pub fn stable_step(m: &WarpedMetric2D) -> Result<f64, SurfaceFlowError> {
    let r = scalar_curvature(m)?;
    let r_max = r.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    Ok(ENTROPY_C_STAB * m.h().powi(4) / r_max.powi(3).max(1.0))
}

/// One classical RK4 step of the selected entropy flow.
pub fn flow_step(
    m: &WarpedMetric2D,
    variant: FlowVariant,
    dt: f64,
) -> Result<WarpedMetric2D, SurfaceFlowError> {
    let max_dt = stable_step(m)?;
    // Slack of a few ulps so a fixed dt equal to the bound of the initial
    // state survives roundoff drift of the recomputed bound.
    if dt > max_dt * (1.0 + 1e-9) {
        return Err(SurfaceFlowError::StepTooLarge { dt, max_dt });
    }
    let k1 = entropy_flow_velocity(m, variant)?;
    let m2 = m.advanced(0.5 * dt, &k1.va, &k1.vb, 1)?;
    let k2 = entropy_flow_velocity(&m2, variant)?;
    let m3 = m.advanced(0.5 * dt, &k2.va, &k2.vb, 2)?;
    let k3 = entropy_flow_velocity(&m3, variant)?;
    let m4 = m.advanced(dt, &k3.va, &k3.vb, 3)?;
    let k4 = entropy_flow_velocity(&m4, variant)?;
    let n = m.len();
    let mut va = Vec::with_capacity(n);
    let mut vb = Vec::with_capacity(n);
    for j in 0..n {
        va.push((k1.va[j] + 2.0 * k2.va[j] + 2.0 * k3.va[j] + k4.va[j]) / 6.0);
        vb.push((k1.vb[j] + 2.0 * k2.vb[j] + 2.0 * k3.vb[j] + k4.vb[j]) / 6.0);
    }
    m.advanced(dt, &va, &vb, 4)
}

/// Rate of change of the scalar curvature induced by a metric velocity:
///
/// ```text
/// dR/dt = -R^{ij} v_ij + div div v - Lap (g^{ij} v_ij)
/// ```
///
/// evaluated with the same flux operators as the flow itself (in d = 2 the
/// Ricci term is `(R/2) g^{ij} v_ij`).
pub fn scalar_curvature_rate(
    m: &WarpedMetric2D,
    v: &MetricVelocity,
) -> Result<Vec<f64>, SurfaceFlowError> {
    let n = m.len();
    for (found, _) in [(v.va.len(), "va"), (v.vb.len(), "vb")] {
        if found != n {
            return Err(SurfaceFlowError::LengthMismatch { expected: n, found });
        }
    }
    let r = scalar_curvature(m)?;
    let tr: Vec<f64> = (0..n)
        .map(|j| v.va[j] / m.a()[j] + v.vb[j] / m.b()[j])
        .collect();
    let lap_tr = laplacian(m, &tr)?;
    let ap = m.centered(m.a(), Parity::Even);
    let bp = m.centered(m.b(), Parity::Even);
    let vap = m.centered(&v.va, Parity::Even);
    // Covector divergence W_x = grad^j v_xj; its y-component vanishes by
    // axisymmetry.
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let (a, b) = (m.a()[j], m.b()[j]);
            vap[j] / a - ap[j] * v.va[j] / (a * a) + bp[j] * v.va[j] / (2.0 * a * b)
                - bp[j] * v.vb[j] / (2.0 * b * b)
        })
        .collect();
    // div W = (1/sqrt(AB)) d/dx (sqrt(B/A) W_x); the product is even across
    // poles (odd vector component times odd weight).
    let phi = m.phi();
    let sa = m.sqrt_a();
    let q: Vec<f64> = (0..n).map(|j| phi[j] / sa[j] * w[j]).collect();
    let dq = m.centered(&q, Parity::Even);
    Ok((0..n)
        .map(|j| -0.5 * r[j] * tr[j] + dq[j] / (sa[j] * phi[j]) - lap_tr[j])
        .collect())
}

/// Run the selected flow on a sphere of revolution and fit the exponential
/// rate of the curvature contrast `max|R - <R>|`.
///
/// The initial contrast must not exceed 5% of the mean curvature (the linear
/// regime); an unperturbed sphere yields [`DecayEstimate::NoPerturbation`].
/// Growth beyond ten times the initial contrast stops the run early and fits
/// whatever was collected, so an unstable mode reports its (positive) rate
/// instead of leaving the linear regime entirely. A growing mode that drives
/// the metric out of the regular-pole class likewise ends the sampling early
/// once at least eight samples exist; the fit then covers the regular
/// segment of the run.
pub fn perturbation_decay(
    m0: &WarpedMetric2D,
    variant: FlowVariant,
    t_end: f64,
) -> Result<DecayEstimate, SurfaceFlowError> {
    assert!(
        matches!(m0.topology(), Topology::SphereOfRevolution { .. }),
        "decay rates are defined against a round-sphere background"
    );
    assert!(t_end > 0.0);
    let contrast = |m: &WarpedMetric2D| -> Result<f64, SurfaceFlowError> {
        let r = scalar_curvature(m)?;
        let mean = manifold_mean(m, &r);
        Ok(r.iter().fold(0.0f64, |acc, &v| acc.max((v - mean).abs())))
    };
    let r0 = scalar_curvature(m0)?;
    let mean0 = manifold_mean(m0, &r0);
    let sigma0 = r0
        .iter()
        .fold(0.0f64, |acc, &v| acc.max((v - mean0).abs()));
    if sigma0 <= NO_PERTURBATION_FLOOR * mean0.abs().max(1.0) {
        return Ok(DecayEstimate::NoPerturbation);
    }
    assert!(
        sigma0 <= 0.0501 * mean0.abs(),
        "initial contrast {sigma0:.3e} exceeds 5% of the mean curvature {mean0:.3e}"
    );

    const SAMPLES: usize = 48;
    let mut m = m0.clone();
    let mut t = 0.0;
    let mut ts = vec![0.0];
    let mut lns = vec![sigma0.ln()];
    'outer: for i in 1..=SAMPLES {
        let target = t_end * i as f64 / SAMPLES as f64;
        while t < target {
            let dt = stable_step(&m)?.min(target - t);
            match flow_step(&m, variant, dt) {
                Ok(next) => {
                    m = next;
                    t += dt;
                }
                // The collected samples still describe the regular segment,
                // so fit those rather than discarding the whole run.
                Err(SurfaceFlowError::PoleRegularityViolated { .. }) if lns.len() >= 8 => {
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        let sigma = contrast(&m)?;
        ts.push(t);
        lns.push(sigma.ln());
        if sigma > 10.0 * sigma0 {
            break 'outer;
        }
    }
    let (_, slope) = linear_fit(&ts, &lns);
    Ok(DecayEstimate::Slope {
        slope,
        samples: ts.len(),
    })
}

/// The weighted functional `F(g, f) = int exp(-f) (R + |grad f|^2) dV`.
pub fn perelman_f(m: &WarpedMetric2D, f: &LogDensity) -> Result<f64, SurfaceFlowError> {
    if f.values.len() != m.len() {
        return Err(SurfaceFlowError::LengthMismatch {
            expected: m.len(),
            found: f.values.len(),
        });
    }
    let r = scalar_curvature(m)?;
    let fp = m.centered(&f.values, Parity::Even);
    let integrand: Vec<f64> = (0..m.len())
        .map(|j| (-f.values[j]).exp() * (r[j] + fp[j] * fp[j] / m.a()[j]))
        .collect();
    Ok(m.integral(&integrand))
}

/// Largest stable RK4 step for the Ricci-type flow at the current state:
/// the quadratic diffusive bound scaled by `min A`, capped by a curvature
/// guard against overshooting collapse.
pub fn perelman_stable_step(
    m: &WarpedMetric2D,
    f: &LogDensity,
    variant: PerelmanVariant,
) -> Result<f64, SurfaceFlowError> {
    if f.values.len() != m.len() {
        return Err(SurfaceFlowError::LengthMismatch {
            expected: m.len(),
            found: f.values.len(),
        });
    }
    let r = scalar_curvature(m)?;
    let r_max = r.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let a_min = m.a().iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
    let w_max = match variant {
        PerelmanVariant::Standard => 1.0,
        PerelmanVariant::Weighted => f
            .values
            .iter()
            .fold(0.0f64, |acc, &v| acc.max((-v).exp())),
    };
    let diffusive = PERELMAN_C_STAB * m.h() * m.h() * a_min / w_max;
    let collapse_guard = 0.25 / (w_max * r_max.max(1.0));
    Ok(diffusive.min(collapse_guard))
}

/// One RK4 step of the Ricci-type flow `dg/dt = -2 w (Ric + Hess f)` with
/// `w = exp(-f)` (weighted) or `w = 1` (standard), coupled to
/// `df/dt = (1/2) g^{ij} dg_ij/dt`.
///
/// The log-density update is integrated exactly as
/// `f_new = f_old + (1/2) ln(det g_new / det g_old)` pointwise, which is the
/// closed-form solution of its equation along the metric path; the weighted
/// measure `exp(-f) sqrt(g)` is therefore conserved to roundoff per node, not
/// merely to integrator order.
pub fn perelman_flow_step(
    m: &WarpedMetric2D,
    f: &LogDensity,
    dt: f64,
    variant: PerelmanVariant,
) -> Result<(WarpedMetric2D, LogDensity), SurfaceFlowError> {
    let max_dt = perelman_stable_step(m, f, variant)?;
    if dt > max_dt * (1.0 + 1e-9) {
        return Err(SurfaceFlowError::StepTooLarge { dt, max_dt });
    }
    let n = m.len();
    let det0: Vec<f64> = (0..n).map(|j| m.a()[j] * m.b()[j]).collect();
    let velocity = |state: &WarpedMetric2D| -> Result<MetricVelocity, SurfaceFlowError> {
        let fs: Vec<f64> = (0..n)
            .map(|j| f.values[j] + 0.5 * ((state.a()[j] * state.b()[j]) / det0[j]).ln())
            .collect();
        let r = scalar_curvature(state)?;
        let (hxx, hyy) = covariant_hessian(state, &fs)?;
        let mut va = Vec::with_capacity(n);
        let mut vb = Vec::with_capacity(n);
        for j in 0..n {
            let w = match variant {
                PerelmanVariant::Weighted => (-fs[j]).exp(),
                PerelmanVariant::Standard => 1.0,
            };
            // In d = 2, Ric = (R/2) g.
            va.push(-2.0 * w * (0.5 * r[j] * state.a()[j] + hxx[j]));
            vb.push(-2.0 * w * (0.5 * r[j] * state.b()[j] + hyy[j]));
        }
        Ok(MetricVelocity { va, vb })
    };
    let k1 = velocity(m)?;
    let m2 = m.advanced(0.5 * dt, &k1.va, &k1.vb, 1)?;
    let k2 = velocity(&m2)?;
    let m3 = m.advanced(0.5 * dt, &k2.va, &k2.vb, 2)?;
    let k3 = velocity(&m3)?;
    let m4 = m.advanced(dt, &k3.va, &k3.vb, 3)?;
    let k4 = velocity(&m4)?;
    let mut va = Vec::with_capacity(n);
    let mut vb = Vec::with_capacity(n);
    for j in 0..n {
        va.push((k1.va[j] + 2.0 * k2.va[j] + 2.0 * k3.va[j] + k4.va[j]) / 6.0);
        vb.push((k1.vb[j] + 2.0 * k2.vb[j] + 2.0 * k3.vb[j] + k4.vb[j]) / 6.0);
    }
    let m_new = m.advanced(dt, &va, &vb, 4)?;
    let f_new: Vec<f64> = (0..n)
        .map(|j| f.values[j] + 0.5 * ((m_new.a()[j] * m_new.b()[j]) / det0[j]).ln())
        .collect();
    Ok((m_new, LogDensity { values: f_new }))
}

/// Coupling constant of the maximally symmetric reduction:
/// `C(d) = 5/2 - 1/d + 2/(d(d-1))`.
pub fn maxsym_coefficient(d: usize) -> f64 {
    assert!(d >= 2);
    let d = d as f64;
    2.5 - 1.0 / d + 2.0 / (d * (d - 1.0))
}

/// Right-hand side `du/dt` of the reduction in the variable `u = r^2`:
///
/// ```text
/// du/dt = [5 R^2 (1/d - 1/2) + C(d) R^2 (2/d - 1/2)] u,   R = d(d-1)/u
/// ```
pub fn maxsym_flow_rhs(state: &MaxSymState) -> f64 {
    assert!(state.d >= 2);
    assert!(state.r.is_finite() && state.r > 0.0);
    let d = state.d as f64;
    let u = state.r * state.r;
    let rr = d * (d - 1.0) / u;
    let c = maxsym_coefficient(state.d);
    (5.0 * rr * rr * (1.0 / d - 0.5) + c * rr * rr * (2.0 / d - 0.5)) * u
}

/// Integrate the reduction from `s0` and report the state at each requested
/// time (absolute, nondecreasing, starting at or after `s0.t`). Adaptive
/// embedded RK45; approaching a collapse (`u -> 0`) exhausts the step size
/// and surfaces as [`SurfaceFlowError::ToleranceFailure`].
pub fn maxsym_integrate(
    s0: &MaxSymState,
    out_times: &[f64],
    rtol: f64,
) -> Result<Vec<MaxSymState>, SurfaceFlowError> {
    assert!(!out_times.is_empty());
    assert!(out_times.windows(2).all(|w| w[0] <= w[1]));
    assert!(out_times[0] >= s0.t);
    let d = s0.d;
    let rhs = move |_t: f64, y: &[f64]| -> Vec<f64> {
        let u = y[0];
        if !(u.is_finite() && u > 0.0) {
            // Forces the error controller to reject and shrink.
            return vec![f64::INFINITY];
        }
        let state = MaxSymState {
            d,
            r: u.sqrt(),
            t: 0.0,
        };
        vec![maxsym_flow_rhs(&state)]
    };
    let states = rkf45(rhs, s0.t, &[s0.r * s0.r], out_times, rtol, 1e-14)
        .map_err(|e| SurfaceFlowError::ToleranceFailure { t: e.t, step: e.step })?;
    let mut out = Vec::with_capacity(out_times.len());
    for (&t, y) in out_times.iter().zip(&states) {
        let u = y[0];
        if !(u.is_finite() && u > 0.0) {
            return Err(SurfaceFlowError::ToleranceFailure { t, step: 0.0 });
        }
        out.push(MaxSymState { d, r: u.sqrt(), t });
    }
    Ok(out)
}

/// Drive an entropy flow for `steps` fixed steps of size `dt`, sampling
/// volume, curvature moments, and the closed-surface entropy at `t`
/// every `stride` steps (plus the initial state). The finite-difference
/// entropy rate column is filled from the sampled trace afterwards.
pub fn run_entropy_flow(
    m0: &WarpedMetric2D,
    variant: FlowVariant,
    dt: f64,
    steps: usize,
    stride: usize,
    temperature: f64,
) -> Result<FlowRun, SurfaceFlowError> {
    assert!(stride >= 1);
    assert!(temperature > 0.0);
    let mut m = m0.clone();
    let mut samples = Vec::new();
    let record = |samples: &mut Vec<FlowSample>,
                  m: &WarpedMetric2D,
                  step: usize|
     -> Result<(), SurfaceFlowError> {
        let mom = curvature_moments(m)?;
        let entropy =
            gibbs_entropy_closed_d2_from_moments(mom.vol, mom.mean_r, mom.mean_r2, temperature);
        samples.push(FlowSample {
            step,
            t: step as f64 * dt,
            vol: mom.vol,
            mean_r2: mom.mean_r2,
            entropy,
            dsdt_fd: 0.0,
            dsdt_variance: (mom.mean_r4 - mom.mean_r2 * mom.mean_r2)
                / (240.0 * temperature * temperature),
        });
        Ok(())
    };
    record(&mut samples, &m, 0)?;
    for step in 1..=steps {
        m = flow_step(&m, variant, dt)?;
        if step % stride == 0 {
            record(&mut samples, &m, step)?;
        }
    }
    if samples.len() >= 2 {
        let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let ss: Vec<f64> = samples.iter().map(|s| s.entropy).collect();
        for (sample, d) in samples.iter_mut().zip(sampled_derivative(&ts, &ss)) {
            sample.dsdt_fd = d;
        }
    }
    Ok(FlowRun {
        samples,
        final_metric: m,
    })
}
