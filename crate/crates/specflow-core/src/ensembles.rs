//! Statistical ensembles built on eigenvalue spectra and their asymptotic
//! models: canonical partition functions, Gibbs and microcanonical
//! entropies, internal energy, and the closed-form entropy expansions used
//! to monitor geometric flows.
//!
//! The canonical quantities all come from one place, `ln Z(T)` and its
//! temperature derivative: S = ln Z + T dlnZ/dT, U = T^2 dlnZ/dT, so the
//! identity S = U/T + ln Z is structural. What is worth testing is that
//! *different sources* (a stored spectrum, a heat-trace model, a counting
//! model) agree where their regimes overlap; see the dual-path tests.

use crate::asymptotics::{
    heat_trace_model, heat_trace_model_derivative, partition_function_from_spectrum,
    AsymptoticsError, HeatTraceModel, WeylModel,
};
use crate::spectrum::{Spectrum, SpectrumError};
use crate::util::special::unit_sphere_area;
use thiserror::Error;

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum EnsemblesError {
    /// Z(T) evaluated to zero or below; the source cannot support this
    /// temperature (underflow at small T, or a truncated model gone
    /// negative).
    #[error("partition function is {z} at T = {t}; entropy undefined")]
    NonpositiveZ { t: f64, z: f64 },
    /// The microcanonical window contains no states.
    #[error("no states in the window at E = {energy}")]
    EmptyWindow { energy: f64 },
    /// The requested quantity is not defined for this source kind.
    #[error("operation not defined for this source: {0}")]
    UnsupportedSource(&'static str),
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Where Z(T) comes from. Spectrum sources are summed directly and
/// differentiated numerically; the two model sources have analytic
/// derivatives.
#[derive(Debug, Clone)]
pub enum ZSource {
    Spectrum(Spectrum),
    HeatTrace(HeatTraceModel),
    Weyl(WeylModel),
}

impl ZSource {
    fn z(&self, t: f64) -> Result<f64, EnsemblesError> {
        let z = match self {
            ZSource::Spectrum(s) => partition_function_from_spectrum(s, t)?.0,
            ZSource::HeatTrace(m) => heat_trace_model(m, t),
            ZSource::Weyl(m) => m.partition_function(t),
        };
        if z <= 0.0 {
            return Err(EnsemblesError::NonpositiveZ { t, z });
        }
        Ok(z)
    }

    fn ln_z(&self, t: f64) -> Result<f64, EnsemblesError> {
        Ok(self.z(t)?.ln())
    }

    /// d ln Z / dT: analytic for the model sources (term-by-term power
    /// derivative), numeric for spectra.
    fn dlnz_dt(&self, t: f64, rel_step: f64) -> Result<f64, EnsemblesError> {
        match self {
            ZSource::Spectrum(_) => self.dlnz_dt_numeric(t, rel_step),
            ZSource::HeatTrace(m) => Ok(heat_trace_model_derivative(m, t) / self.z(t)?),
            ZSource::Weyl(m) => Ok(m.partition_function_derivative(t) / self.z(t)?),
        }
    }

    /// Fourth-order central difference, Richardson-extrapolated from steps
    /// h and h/2 so the leading h^4 truncation cancels as well.
    fn dlnz_dt_numeric(&self, t: f64, rel_step: f64) -> Result<f64, EnsemblesError> {
        let stencil = |h: f64| -> Result<f64, EnsemblesError> {
            let f = |x: f64| self.ln_z(x);
            Ok(
                (-f(t + 2.0 * h)? + 8.0 * f(t + h)? - 8.0 * f(t - h)? + f(t - 2.0 * h)?)
                    / (12.0 * h),
            )
        };
        let h = rel_step * t;
        let d1 = stencil(h)?;
        let d2 = stencil(0.5 * h)?;
        Ok((16.0 * d2 - d1) / 15.0)
    }
}

/// Ensemble parameters: a fixed energy window or a temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleKind {
    /// Energy shell `[E, E + width]`; the width is an explicit choice
    /// (default 1.0 in the constructors), never inferred from the data.
    Microcanonical { energy: f64, width: f64 },
    Canonical { temperature: f64 },
}

/// A Z source paired with ensemble parameters.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub source: ZSource,
    pub kind: EnsembleKind,
}

impl EnsembleModel {
    pub fn microcanonical(source: ZSource, energy: f64) -> Self {
        EnsembleModel {
            source,
            kind: EnsembleKind::Microcanonical { energy, width: 1.0 },
        }
    }

    pub fn microcanonical_with_width(source: ZSource, energy: f64, width: f64) -> Self {
        assert!(width > 0.0);
        EnsembleModel {
            source,
            kind: EnsembleKind::Microcanonical { energy, width },
        }
    }

    pub fn canonical(source: ZSource, temperature: f64) -> Self {
        assert!(temperature > 0.0);
        EnsembleModel {
            source,
            kind: EnsembleKind::Canonical { temperature },
        }
    }

    /// The ensemble's entropy: Boltzmann S_B for microcanonical (see
    /// [`microcanonical_entropy`]), Gibbs for canonical.
    pub fn entropy(&self) -> Result<f64, EnsemblesError> {
        match self.kind {
            EnsembleKind::Microcanonical { energy, width } => {
                Ok(microcanonical_entropy(&self.source, energy, width)?.0)
            }
            EnsembleKind::Canonical { temperature } => gibbs_entropy(&self.source, temperature),
        }
    }
}

/// Boltzmann and surface entropies of an energy shell:
/// S_B = ln(nu(E) dE), S_surf = ln(nu(E)).
///
/// For a spectrum source, nu is the windowed density of states over
/// `[E, E + width]`. For a counting model, S_surf is evaluated through
/// [`surface_entropy_expansion`] — the same closed form, so the two code
/// paths agree to rounding, not merely to the expansion's own accuracy.
/// Heat-trace sources carry no state density and are rejected.
pub fn microcanonical_entropy(
    source: &ZSource,
    energy: f64,
    width: f64,
) -> Result<(f64, f64), EnsemblesError> {
    assert!(width > 0.0);
    let s_surf = match source {
        ZSource::Spectrum(s) => {
            let nu = s.density_of_states(energy, width)?;
            if nu <= 0.0 {
                return Err(EnsemblesError::EmptyWindow { energy });
            }
            nu.ln()
        }
        ZSource::Weyl(m) => surface_entropy_expansion(m.d, energy, m.vol, m.bvol),
        ZSource::HeatTrace(_) => {
            return Err(EnsemblesError::UnsupportedSource(
                "heat-trace models have no state density",
            ))
        }
    };
    Ok((s_surf + width.ln(), s_surf))
}

/// Gibbs entropy S = d(T ln Z)/dT = ln Z + T dlnZ/dT, with the derivative
/// taken analytically for model sources and by fourth-order central
/// differences (relative step 1e-4, Richardson-refined) for spectra.
pub fn gibbs_entropy(source: &ZSource, t: f64) -> Result<f64, EnsemblesError> {
    gibbs_entropy_with_step(source, t, DEFAULT_REL_STEP)
}

/// [`gibbs_entropy`] with an explicit relative differentiation step.
pub fn gibbs_entropy_with_step(
    source: &ZSource,
    t: f64,
    rel_step: f64,
) -> Result<f64, EnsemblesError> {
    assert!(t > 0.0 && rel_step > 0.0 && rel_step < 0.1);
    Ok(source.ln_z(t)? + t * source.dlnz_dt(t, rel_step)?)
}

/// Internal energy U = T^2 dlnZ/dT.
pub fn internal_energy(source: &ZSource, t: f64) -> Result<f64, EnsemblesError> {
    internal_energy_with_step(source, t, DEFAULT_REL_STEP)
}

/// [`internal_energy`] with an explicit relative differentiation step.
pub fn internal_energy_with_step(
    source: &ZSource,
    t: f64,
    rel_step: f64,
) -> Result<f64, EnsemblesError> {
    assert!(t > 0.0 && rel_step > 0.0 && rel_step < 0.1);
    Ok(t * t * source.dlnz_dt(t, rel_step)?)
}

/// ln Z for external reporting (entropy traces record it alongside S, U).
pub fn ln_partition(source: &ZSource, t: f64) -> Result<f64, EnsemblesError> {
    source.ln_z(t)
}

const DEFAULT_REL_STEP: f64 = 1e-4;

/// Two-term expansion of the microcanonical surface entropy
/// `ln(dN/dE)` for a `d`-dimensional region with volume `vol` and boundary
/// volume `bvol`, evaluated at energy `energy`.
///
/// Differentiating the two-term eigenvalue counting law
/// `N(E) = c0 E^{d/2} - c1 E^{(d-1)/2}` and expanding the logarithm to
/// first order in the boundary correction gives
///
/// ```text
/// S_surf(E) = ln( d omega_d E^{(d-2)/2} vol / (2 (2 pi)^d) )
///             - (pi (d-1) / 2) E^{-1/2} bvol / vol
/// ```
///
/// where `omega_d` is the unit-ball volume (`d omega_d` is the unit-sphere
/// area). The boundary coefficient `pi (d-1)/2` is what the ratio
/// `(d-1) c1 / (d c0)` reduces to in the normalization used throughout this
/// crate. Monotonicity of this quantity along area-preserving curve flow
/// (volume fixed, boundary shrinking) is the discrete second-law check the
/// flow drivers record.
pub fn surface_entropy_expansion(d: usize, energy: f64, vol: f64, bvol: f64) -> f64 {
    assert!(d >= 1, "dimension must be positive");
    assert!(energy > 0.0 && vol > 0.0 && bvol >= 0.0);
    let df = d as f64;
    let leading = unit_sphere_area(d) * energy.powf((df - 2.0) / 2.0) * vol
        / (2.0 * (2.0 * std::f64::consts::PI).powi(d as i32));
    let boundary_coeff = std::f64::consts::PI * (df - 1.0) / 2.0;
    leading.ln() - boundary_coeff * energy.powf(-0.5) * bvol / vol
}

/// Gibbs entropy of a closed surface from its curvature moments, keeping
/// terms through T^{-2} of the heat-trace expansion and differentiating
/// term by term:
///
/// ```text
/// S(T) = ln(T Vol / 4 pi) + 1 - <Q>/(180 T^2) + <R>^2/(72 T^2),
/// ```
///
/// with Q = 3 R^2, `mean_r = <R>`, `mean_r2 = <R^2>` (volume-normalized
/// averages). Flat torus: ln(T Vol/4 pi) + 1 exactly. Round unit sphere:
/// ln T + 1 - 1/(90 T^2).
pub fn gibbs_entropy_closed_d2_from_moments(
    vol: f64,
    mean_r: f64,
    mean_r2: f64,
    t: f64,
) -> f64 {
    assert!(vol > 0.0 && t > 0.0 && mean_r2 >= 0.0);
    (t * vol / (4.0 * PI)).ln() + 1.0 - mean_r2 / (60.0 * t * t)
        + mean_r * mean_r / (72.0 * t * t)
}

/// Temperature floor below which the truncated T^{-2} expansion behind
/// [`gibbs_entropy_closed_d2_from_moments`] stops being trustworthy: the T
/// where the quadratic-curvature heat term reaches 10% of the leading one,
/// sqrt(<Q>/18) = sqrt(<R^2>/6). Callers should warn below it.
pub fn closed_d2_validity_floor(mean_r2: f64) -> f64 {
    assert!(mean_r2 >= 0.0);
    (mean_r2 / 6.0).sqrt()
}

/// Per-sample dS/dt along a recorded trace: central differences inside,
/// one-sided at the ends. Times must be strictly increasing.
pub fn entropy_rate_along_flow(times: &[f64], entropies: &[f64]) -> Vec<f64> {
    let n = times.len();
    assert!(n >= 2, "need at least two samples");
    assert_eq!(entropies.len(), n);
    assert!(
        times.windows(2).all(|w| w[1] > w[0]),
        "times must increase strictly"
    );
    let mut rates = Vec::with_capacity(n);
    rates.push((entropies[1] - entropies[0]) / (times[1] - times[0]));
    for i in 1..n - 1 {
        rates.push((entropies[i + 1] - entropies[i - 1]) / (times[i + 1] - times[i - 1]));
    }
    rates.push((entropies[n - 1] - entropies[n - 2]) / (times[n - 1] - times[n - 2]));
    rates
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::CoefficientSet;
    use crate::spectrum::{
        rectangle_spectrum, torus_spectrum, DomainMeta, SpectrumSource,
    };
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    #[test]
    fn surface_entropy_frozen_values() {
        // Unit disk and unit square at E = 100, unit cube at E = 100;
        // reference values computed independently from the closed form.
        assert_relative_eq!(
            surface_entropy_expansion(2, 100.0, PI, 2.0 * PI),
            -1.7004536264788699,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            surface_entropy_expansion(2, 100.0, 1.0, 4.0),
            -3.1593427776872494,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            surface_entropy_expansion(3, 100.0, 1.0, 6.0),
            -3.258124631978521,
            epsilon = 1e-12
        );
    }

    #[test]
    fn surface_entropy_monotone_in_boundary() {
        // At fixed volume, a shorter boundary means higher entropy; this is
        // the mechanism behind the second-law check on curve flows.
        let s_long = surface_entropy_expansion(2, 1e4, 1.0, 4.0);
        let s_short = surface_entropy_expansion(2, 1e4, 1.0, 3.6);
        assert!(s_short > s_long);
        assert_relative_eq!(s_long, -2.5938561000410867, epsilon = 1e-12);
    }

    #[test]
    fn microcanonical_weyl_leading_density() {
        // With no boundary term the d=2 density is A/(4 pi) at every E.
        let m = WeylModel::new(2, 1.0, 0.0);
        let (s_b, s_surf) =
            microcanonical_entropy(&ZSource::Weyl(m), 100.0, 10.0).unwrap();
        assert_relative_eq!(s_surf, -(4.0 * PI).ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(s_surf, -2.5310242469692907, epsilon = 1e-12);
        assert_relative_eq!(s_b, s_surf + 10.0_f64.ln(), epsilon = 1e-13);
    }

    #[test]
    fn microcanonical_weyl_delegates_to_expansion() {
        // Same formula, two code paths; agreement is to rounding.
        let m = WeylModel::new(2, 1.0, 4.0);
        for &e in &[50.0, 100.0, 1600.0] {
            let (_, s_surf) = microcanonical_entropy(&ZSource::Weyl(m), e, 1.0).unwrap();
            assert_abs_diff_eq!(
                s_surf,
                surface_entropy_expansion(2, e, 1.0, 4.0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn microcanonical_spectrum_counts_states() {
        let s = rectangle_spectrum(1.0, 1.0, 250.0).unwrap();
        // Between 100 and 150 the square has exactly two states (13 pi^2,
        // doubly degenerate).
        let (s_b, s_surf) =
            microcanonical_entropy(&ZSource::Spectrum(s.clone()), 100.0, 50.0).unwrap();
        assert_relative_eq!(s_surf, (2.0 / 50.0_f64).ln(), epsilon = 1e-13);
        assert_relative_eq!(s_b, 2.0_f64.ln(), epsilon = 1e-13);
        // Below the ground state the shell is empty.
        assert!(matches!(
            microcanonical_entropy(&ZSource::Spectrum(s), 1.0, 10.0),
            Err(EnsemblesError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn microcanonical_rejects_heat_trace_source() {
        let m = HeatTraceModel::flat_torus(1.0);
        assert!(matches!(
            microcanonical_entropy(&ZSource::HeatTrace(m), 10.0, 1.0),
            Err(EnsemblesError::UnsupportedSource(_))
        ));
    }

    #[test]
    fn gibbs_flat_torus_model_analytic() {
        let src = ZSource::HeatTrace(HeatTraceModel::flat_torus(2.0));
        for &t in &[1.0, 20.0, 300.0] {
            let s = gibbs_entropy(&src, t).unwrap();
            assert_relative_eq!(s, (t * 2.0 / (4.0 * PI)).ln() + 1.0, epsilon = 1e-9);
            let u = internal_energy(&src, t).unwrap();
            assert_relative_eq!(u, t, max_relative = 1e-9);
        }
    }

    #[test]
    fn single_level_spectrum_has_zero_entropy() {
        // One state carries no uncertainty: ln Z = -gamma/T gives S = 0
        // identically and U = gamma at every temperature.
        let s = Spectrum::from_values(
            vec![1.0],
            1e12,
            SpectrumSource::Synthetic,
            DomainMeta {
                area: Some(0.0),
                perimeter: None,
                grid_spacing: None,
            },
        );
        let src = ZSource::Spectrum(s);
        for &t in &[0.5, 10.0, 1e6] {
            let entropy = gibbs_entropy(&src, t).unwrap();
            assert_abs_diff_eq!(entropy, 0.0, epsilon = 1e-9);
            let u = internal_energy(&src, t).unwrap();
            assert_relative_eq!(u, 1.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn identity_s_equals_u_over_t_plus_lnz() {
        let sources = [
            ZSource::Spectrum(rectangle_spectrum(1.0, 1.0, 2.0e4).unwrap()),
            ZSource::Spectrum(torus_spectrum(1.0, 4000.0).unwrap()),
            ZSource::HeatTrace(HeatTraceModel::flat_open_d2(
                PI,
                2.0 * PI,
                2.0 * PI,
                CoefficientSet::Classical,
            )),
            ZSource::HeatTrace(HeatTraceModel::round_sphere(1.0)),
            ZSource::Weyl(WeylModel::new(2, 1.0, 4.0)),
        ];
        for src in &sources {
            for &t in &[15.0, 40.0] {
                let s = gibbs_entropy(src, t).unwrap();
                let u = internal_energy(src, t).unwrap();
                let lnz = ln_partition(src, t).unwrap();
                assert_abs_diff_eq!(s, u / t + lnz, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gibbs_is_nondecreasing_in_t_for_spectra() {
        let src = ZSource::Spectrum(rectangle_spectrum(1.0, 1.0, 2.0e4).unwrap());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=18 {
            let t = 5.0 + 2.5 * i as f64;
            let s = gibbs_entropy(&src, t).unwrap();
            assert!(s >= prev - 1e-12, "S dropped at T = {t}");
            prev = s;
        }
    }

    #[test]
    fn torus_dual_path_agreement() {
        // Spectrum sum vs analytic model: by T = 100 the lattice images
        // decay below 1e-9, so the two entropies agree to 1e-8.
        let spec = ZSource::Spectrum(torus_spectrum(1.0, 4000.0).unwrap());
        let model = ZSource::HeatTrace(HeatTraceModel::flat_torus(1.0));
        let s_spec = gibbs_entropy(&spec, 100.0).unwrap();
        let s_model = gibbs_entropy(&model, 100.0).unwrap();
        assert_abs_diff_eq!(s_spec, s_model, epsilon = 1e-8);
        assert_relative_eq!(
            s_model,
            (100.0 / (4.0 * PI)).ln() + 1.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn nonpositive_z_is_reported() {
        // A truncated open-domain expansion goes negative at small T.
        let m = HeatTraceModel::flat_open_d2(
            PI,
            2.0 * PI,
            2.0 * PI,
            CoefficientSet::MeanCurvature,
        );
        assert!(matches!(
            gibbs_entropy(&ZSource::HeatTrace(m), 0.1),
            Err(EnsemblesError::NonpositiveZ { .. })
        ));
    }

    #[test]
    fn closed_surface_moment_entropy() {
        // Flat torus: exact.
        assert_relative_eq!(
            gibbs_entropy_closed_d2_from_moments(4.0 * PI, 0.0, 0.0, 7.0),
            (7.0_f64).ln() + 1.0,
            epsilon = 1e-14
        );
        // Round unit sphere: ln T + 1 - 1/(90 T^2).
        assert_relative_eq!(
            gibbs_entropy_closed_d2_from_moments(4.0 * PI, 2.0, 4.0, 10.0),
            10.0_f64.ln() + 1.0 - 1.0 / 9000.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            gibbs_entropy_closed_d2_from_moments(4.0 * PI, 2.0, 4.0, 10.0),
            3.3024739818829349,
            epsilon = 1e-13
        );
        // Entropy decreases as curvature variance grows at fixed T, Vol.
        let calm = gibbs_entropy_closed_d2_from_moments(1.0, 0.0, 0.5, 5.0);
        let rough = gibbs_entropy_closed_d2_from_moments(1.0, 0.0, 1.5, 5.0);
        assert!(rough < calm);
        // Validity floor: quadratic term at 10% of leading.
        assert_relative_eq!(
            closed_d2_validity_floor(6.0),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn entropy_rate_traces() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let flat = vec![3.0; 10];
        assert!(entropy_rate_along_flow(&t, &flat).iter().all(|&r| r == 0.0));
        let linear: Vec<f64> = t.iter().map(|&x| x).collect();
        for r in entropy_rate_along_flow(&t, &linear) {
            assert_relative_eq!(r, 1.0, epsilon = 1e-12);
        }
        let quad: Vec<f64> = t.iter().map(|&x| x * x).collect();
        let rates = entropy_rate_along_flow(&t, &quad);
        for (i, r) in rates.iter().enumerate().skip(1).take(8) {
            assert_relative_eq!(*r, 2.0 * t[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn ensemble_model_dispatch() {
        let src = ZSource::Weyl(WeylModel::new(2, 1.0, 0.0));
        let micro = EnsembleModel::microcanonical(src.clone(), 100.0);
        // Default width 1.0 makes S_B = S_surf.
        assert_relative_eq!(
            micro.entropy().unwrap(),
            -(4.0 * PI).ln(),
            epsilon = 1e-13
        );
        let canon = EnsembleModel::canonical(src, 25.0);
        let direct = gibbs_entropy(&ZSource::Weyl(WeylModel::new(2, 1.0, 0.0)), 25.0).unwrap();
        assert_relative_eq!(canon.entropy().unwrap(), direct, epsilon = 1e-13);
    }
}
