//! Dirichlet Laplacian spectra on plane domains, plus a flat-torus
//! enumeration for closed-surface checks.
//!
//! Three constructions produce a [`Spectrum`]:
//!
//! * [`rectangle_spectrum`]: lattice enumeration of pi^2 (m^2/a^2 + n^2/b^2),
//! * [`disk_spectrum`]: squared Bessel zeros (j_{m,k}/r)^2 with the m >= 1
//!   doublets counted twice,
//! * [`fd_dirichlet_spectrum`]: the 5-point finite-difference operator on a
//!   [`DomainMask`], solved densely below a size threshold and by blocked
//!   Lanczos with full reorthogonalization above it.
//!
//! A spectrum knows the energy `complete_up_to` below which no eigenvalue is
//! missing; the counting function N(E) and the windowed density of states
//! refuse to answer past that bound instead of silently undercounting. The
//! density uses the forward window `[E, E + dE]`.

use crate::util::rng::SplitMix64;
use crate::util::roots::newton_bracketed_from;
use crate::util::special::ln_gamma;
use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    /// A cutoff would demand more storage or higher Bessel orders than the
    /// implementation supports.
    #[error("cutoff needs {needed} {what} but the cap is {cap}")]
    CutoffTooLarge {
        what: &'static str,
        needed: usize,
        cap: usize,
    },
    /// Root bracketing or polishing failed to settle.
    #[error("no convergence while {0}")]
    NoConvergence(&'static str),
    /// The mask interior is not 4-connected, so the domain is not a single
    /// region and its spectrum is ambiguous.
    #[error("mask interior is not connected")]
    NotConnected,
    /// The iterative eigensolver hit its iteration cap before the requested
    /// eigenvalues converged.
    #[error("eigensolver did not converge within {iterations} block iterations")]
    ConvergenceFailure { iterations: usize },
    /// A counting or density query reached past the energy up to which the
    /// spectrum is complete.
    #[error("query at energy {requested} exceeds completeness bound {available}")]
    BeyondCompleteness { requested: f64, available: f64 },
    /// Structured text for a mask could not be parsed. `line` is 1-based.
    #[error("mask text line {line}: {message}")]
    MaskFormat { line: usize, message: String },
    /// A mask with inconsistent dimensions or no interior at all.
    #[error("invalid mask: {0}")]
    InvalidMask(String),
}

/// Where a spectrum's eigenvalues came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumSource {
    AnalyticRectangle,
    AnalyticDisk,
    /// Flat torus (closed surface, eigenvalue 0 present).
    AnalyticTorus,
    FiniteDifference,
    /// Hand-assembled list (tests, synthetic ensembles).
    Synthetic,
}

/// Geometry the spectrum's domain is known to have. `grid_spacing` is set for
/// finite-difference sources; eigenvalues then carry an O(h^2) discretization
/// error on top of what `complete_up_to` promises.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DomainMeta {
    pub area: Option<f64>,
    pub perimeter: Option<f64>,
    pub grid_spacing: Option<f64>,
}

/// A sorted list of Laplacian eigenvalues together with the energy below
/// which the list is complete.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Vec<f64>,
    complete_up_to: f64,
    source: SpectrumSource,
    meta: DomainMeta,
}

impl Spectrum {
    /// Assemble a spectrum from raw values (sorted internally). All values
    /// must be finite and nonnegative; zero is legitimate for closed
    /// surfaces (the constant mode).
    pub fn from_values(
        mut values: Vec<f64>,
        complete_up_to: f64,
        source: SpectrumSource,
        meta: DomainMeta,
    ) -> Self {
        assert!(!values.is_empty(), "a spectrum needs at least one eigenvalue");
        assert!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "eigenvalues must be finite and nonnegative"
        );
        assert!(complete_up_to.is_finite() && complete_up_to > 0.0);
        values.sort_by(f64::total_cmp);
        Spectrum {
            values,
            complete_up_to,
            source,
            meta,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every eigenvalue `<= complete_up_to` is present in [`Self::values`].
    pub fn complete_up_to(&self) -> f64 {
        self.complete_up_to
    }

    pub fn source(&self) -> SpectrumSource {
        self.source
    }

    pub fn meta(&self) -> DomainMeta {
        self.meta
    }

    /// N(E): the number of eigenvalues `<= energy`, counted with
    /// multiplicity. Refuses energies past the completeness bound.
    pub fn counting_function(&self, energy: f64) -> Result<usize, SpectrumError> {
        if energy > self.complete_up_to {
            return Err(SpectrumError::BeyondCompleteness {
                requested: energy,
                available: self.complete_up_to,
            });
        }
        Ok(self.values.partition_point(|v| *v <= energy))
    }

    /// Windowed density of states (N(E + dE) - N(E)) / dE over the forward
    /// window `[E, E + dE]`, which must sit inside the completeness bound.
    pub fn density_of_states(&self, energy: f64, window: f64) -> Result<f64, SpectrumError> {
        assert!(window > 0.0, "density window must be positive");
        let hi = energy + window;
        if hi > self.complete_up_to {
            return Err(SpectrumError::BeyondCompleteness {
                requested: hi,
                available: self.complete_up_to,
            });
        }
        let below = self.values.partition_point(|v| *v <= energy);
        let upto = self.values.partition_point(|v| *v <= hi);
        Ok((upto - below) as f64 / window)
    }
}

/// Hard cap on enumerated eigenvalue counts; a memory guard, not a precision
/// limit (10^7 values = 80 MB).
pub const DEFAULT_EIGENVALUE_CAP: usize = 10_000_000;

/// Dirichlet spectrum of an a x b rectangle up to `lambda_max`:
/// pi^2 (m^2/a^2 + n^2/b^2) over m, n >= 1, with multiplicity.
pub fn rectangle_spectrum(a: f64, b: f64, lambda_max: f64) -> Result<Spectrum, SpectrumError> {
    rectangle_spectrum_with_cap(a, b, lambda_max, DEFAULT_EIGENVALUE_CAP)
}

/// [`rectangle_spectrum`] with an explicit cap on the eigenvalue count.
pub fn rectangle_spectrum_with_cap(
    a: f64,
    b: f64,
    lambda_max: f64,
    cap: usize,
) -> Result<Spectrum, SpectrumError> {
    assert!(a > 0.0 && b > 0.0 && lambda_max > 0.0);
    let pi = std::f64::consts::PI;
    let m_max = (a * lambda_max.sqrt() / pi).floor() as usize;
    // Exact count first (cheap, no allocation), then fill.
    let mut count = 0usize;
    for m in 1..=m_max {
        let rest = lambda_max - pi * pi * (m * m) as f64 / (a * a);
        if rest < 0.0 {
            break;
        }
        count += (b * rest.sqrt() / pi).floor() as usize;
    }
    if count > cap {
        return Err(SpectrumError::CutoffTooLarge {
            what: "eigenvalues",
            needed: count,
            cap,
        });
    }
    if count == 0 {
        return Err(SpectrumError::CutoffTooLarge {
            what: "eigenvalues (cutoff below the ground state)",
            needed: 1,
            cap: 0,
        });
    }
    let mut values = Vec::with_capacity(count);
    for m in 1..=m_max {
        let base = pi * pi * (m * m) as f64 / (a * a);
        if base > lambda_max {
            break;
        }
        for n in 1.. {
            let lam = base + pi * pi * (n * n) as f64 / (b * b);
            if lam > lambda_max {
                break;
            }
            values.push(lam);
        }
    }
    Ok(Spectrum::from_values(
        values,
        lambda_max,
        SpectrumSource::AnalyticRectangle,
        DomainMeta {
            area: Some(a * b),
            perimeter: Some(2.0 * (a + b)),
            grid_spacing: None,
        },
    ))
}

/// Laplacian spectrum of a flat square torus of side `l` up to `lambda_max`:
/// (2 pi / l)^2 (p^2 + q^2) over all integer pairs, eigenvalue 0 included.
pub fn torus_spectrum(l: f64, lambda_max: f64) -> Result<Spectrum, SpectrumError> {
    assert!(l > 0.0 && lambda_max > 0.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let scale = (two_pi / l) * (two_pi / l);
    let rho2 = lambda_max / scale;
    let p_max = rho2.sqrt().floor() as i64;
    let mut count = 0usize;
    for p in -p_max..=p_max {
        let rest = rho2 - (p * p) as f64;
        count += 2 * rest.sqrt().floor() as usize + 1;
    }
    if count > DEFAULT_EIGENVALUE_CAP {
        return Err(SpectrumError::CutoffTooLarge {
            what: "eigenvalues",
            needed: count,
            cap: DEFAULT_EIGENVALUE_CAP,
        });
    }
    let mut values = Vec::with_capacity(count);
    for p in -p_max..=p_max {
        let rest = rho2 - (p * p) as f64;
        let q_max = rest.sqrt().floor() as i64;
        for q in -q_max..=q_max {
            values.push(scale * ((p * p + q * q) as f64));
        }
    }
    Ok(Spectrum::from_values(
        values,
        lambda_max,
        SpectrumSource::AnalyticTorus,
        DomainMeta {
            area: Some(l * l),
            perimeter: None,
            grid_spacing: None,
        },
    ))
}

// ---------------------------------------------------------------------------
// Bessel J_m and its zeros
// ---------------------------------------------------------------------------

/// Past this order the backward recurrence and the scan windows are not
/// validated; the disk cutoff must keep r sqrt(lambda) below it.
pub const BESSEL_ORDER_CAP: u32 = 400;

const BESSEL_SERIES_CUTOFF: f64 = 10.0;

/// Ascending series for J_m(x); accurate for small x, terms decay
/// factorially. The leading coefficient goes through logs so large m cannot
/// overflow (it underflows to an honest 0 instead).
fn bessel_series(m: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    let mf = f64::from(m);
    let mut term = (mf * half.ln() - ln_gamma(mf + 1.0)).exp();
    let q = half * half;
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (mf + kf));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Miller's backward recurrence: seed a decaying solution far above the
/// turning point, recur down, normalize with J_0 + 2 J_2 + 2 J_4 + ... = 1.
/// Returns (J_{m-1}, J_m, J_{m+1}); J_{-1} = -J_1 when m = 0.
fn bessel_miller(m: u32, x: f64) -> (f64, f64, f64) {
    debug_assert!(x >= BESSEL_SERIES_CUTOFF);
    let mu = m as usize;
    let n = x.ceil() as usize + mu + 40;
    let mut fkp1 = 0.0_f64;
    let mut fk = 1e-30_f64;
    let mut sum = if n % 2 == 0 { 2.0 * fk } else { 0.0 };
    let (mut jm1, mut jm, mut jp1) = (0.0, 0.0, 0.0);
    for k in (1..=n).rev() {
        let fkm1 = (2.0 * k as f64 / x) * fk - fkp1;
        let idx = k - 1;
        if idx == 0 {
            sum += fkm1;
        } else if idx % 2 == 0 {
            sum += 2.0 * fkm1;
        }
        if mu >= 1 && idx == mu - 1 {
            jm1 = fkm1;
        }
        if idx == mu {
            jm = fkm1;
        }
        if idx == mu + 1 {
            jp1 = fkm1;
        }
        fkp1 = fk;
        fk = fkm1;
        if fk.abs() > 1e200 {
            // Rescale everything tracked; the normalization cancels it.
            for v in [&mut fk, &mut fkp1, &mut sum, &mut jm1, &mut jm, &mut jp1] {
                *v *= 1e-200;
            }
        }
    }
    if m == 0 {
        jm1 = -jp1;
    }
    (jm1 / sum, jm / sum, jp1 / sum)
}

/// (J_{m-1}, J_m, J_{m+1}) at x > 0; one backward recurrence serves all
/// three, and the pair feeds J'_m = (J_{m-1} - J_{m+1}) / 2.
pub fn bessel_j_triple(m: u32, x: f64) -> (f64, f64, f64) {
    assert!(x > 0.0, "bessel_j_triple needs x > 0");
    if x >= BESSEL_SERIES_CUTOFF {
        return bessel_miller(m, x);
    }
    let jm = bessel_series(m, x);
    let jp1 = bessel_series(m + 1, x);
    let jm1 = if m == 0 {
        -jp1
    } else {
        // One downward step of the three-term recurrence is stable.
        (2.0 * f64::from(m) / x) * jm - jp1
    };
    (jm1, jm, jp1)
}

/// J_m(x) for integer order m >= 0 and x >= 0.
pub fn bessel_j(m: u32, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_j needs x >= 0");
    if x < BESSEL_SERIES_CUTOFF {
        bessel_series(m, x)
    } else {
        bessel_miller(m, x).1
    }
}

/// McMahon's asymptotic estimate for the k-th zero of J_m; used only as a
/// Newton starting point inside a verified bracket, so its large-m
/// inaccuracy is harmless.
fn mcmahon_guess(m: u32, k: usize) -> f64 {
    let beta = (k as f64 + 0.5 * f64::from(m) - 0.25) * std::f64::consts::PI;
    let mu = 4.0 * f64::from(m) * f64::from(m);
    beta - (mu - 1.0) / (8.0 * beta)
}

/// Consecutive zeros of J_m are separated by at least j_{0,2} - j_{0,1}
/// = 3.115 (gaps approach pi from below only for m = 0), so a scan step of
/// 1.5 sees at most one sign change per interval and can skip 3.0 ahead
/// after each zero.
const ZERO_SCAN_STEP: f64 = 1.5;
const ZERO_SKIP_AFTER: f64 = 3.0;

enum ZeroStop {
    UpTo(f64),
    Count(usize),
}

fn bessel_zeros(m: u32, stop: ZeroStop) -> Result<Vec<f64>, SpectrumError> {
    let mut zeros = Vec::new();
    // J_m > 0 on (0, j_{m,1}) and j_{m,1} > m, so starting at max(m, 1/2)
    // starts in the positive lobe.
    let mut x = f64::from(m).max(0.5);
    let mut fx = bessel_j(m, x);
    let limit = match stop {
        ZeroStop::UpTo(x_max) => x_max,
        // j_{m,k} < (k + m/2 - 1/4) pi + 4 with room to spare; past this the
        // scan has provably missed something.
        ZeroStop::Count(k) => mcmahon_guess(m, k).max(f64::from(m)) + f64::from(m) + 8.0,
    };
    while x < limit {
        let x2 = x + ZERO_SCAN_STEP;
        let f2 = bessel_j(m, x2);
        if fx.signum() != f2.signum() || f2 == 0.0 {
            let guess = mcmahon_guess(m, zeros.len() + 1);
            let z = newton_bracketed_from(
                |t| bessel_j(m, t),
                |t| {
                    let (a, _, c) = bessel_j_triple(m, t);
                    0.5 * (a - c)
                },
                x,
                x2,
                guess,
                1e-13,
                100,
            )
            .ok_or(SpectrumError::NoConvergence("polishing a Bessel zero"))?;
            match stop {
                ZeroStop::UpTo(x_max) => {
                    if z > x_max {
                        return Ok(zeros);
                    }
                    zeros.push(z);
                }
                ZeroStop::Count(k) => {
                    zeros.push(z);
                    if zeros.len() == k {
                        return Ok(zeros);
                    }
                }
            }
            x = z + ZERO_SKIP_AFTER;
            fx = bessel_j(m, x);
        } else {
            x = x2;
            fx = f2;
        }
    }
    match stop {
        ZeroStop::UpTo(_) => Ok(zeros),
        ZeroStop::Count(_) => Err(SpectrumError::NoConvergence("scanning for a Bessel zero")),
    }
}

/// k-th positive zero of J_m (k >= 1), found by a sign-change scan from the
/// edge of the positive lobe with safeguarded Newton polishing. Relative
/// accuracy ~1e-12.
pub fn bessel_j_zero(m: u32, k: u32) -> Result<f64, SpectrumError> {
    assert!(k >= 1, "zero index starts at 1");
    assert!(
        m <= BESSEL_ORDER_CAP,
        "order {m} beyond the validated cap {BESSEL_ORDER_CAP}"
    );
    let zeros = bessel_zeros(m, ZeroStop::Count(k as usize))?;
    Ok(zeros[k as usize - 1])
}

/// Dirichlet spectrum of a disk of radius `r` up to `lambda_max`:
/// (j_{m,k}/r)^2, with multiplicity 2 for every m >= 1.
pub fn disk_spectrum(r: f64, lambda_max: f64) -> Result<Spectrum, SpectrumError> {
    assert!(r > 0.0 && lambda_max > 0.0);
    let x_max = r * lambda_max.sqrt();
    // Orders with zeros below x_max satisfy m < x_max (since j_{m,1} > m);
    // refuse upfront when the cap is clearly insufficient. The Airy-type
    // offset j_{m,1} ~ m + 1.8558 m^{1/3} keeps this conservative.
    let cap1 = f64::from(BESSEL_ORDER_CAP + 1);
    if x_max > cap1 + 1.8558 * cap1.cbrt() + 2.0 {
        return Err(SpectrumError::CutoffTooLarge {
            what: "Bessel orders",
            needed: x_max as usize,
            cap: BESSEL_ORDER_CAP as usize,
        });
    }
    let mut values = Vec::new();
    for m in 0u32.. {
        if f64::from(m) >= x_max {
            break; // j_{m,1} > m >= x_max: no zeros left
        }
        if m > BESSEL_ORDER_CAP {
            return Err(SpectrumError::CutoffTooLarge {
                what: "Bessel orders",
                needed: m as usize,
                cap: BESSEL_ORDER_CAP as usize,
            });
        }
        let zeros = bessel_zeros(m, ZeroStop::UpTo(x_max))?;
        if zeros.is_empty() {
            break; // j_{m,1} grows with m, later orders are empty too
        }
        for z in zeros {
            let lam = (z / r) * (z / r);
            values.push(lam);
            if m >= 1 {
                values.push(lam);
            }
        }
    }
    Ok(Spectrum::from_values(
        values,
        lambda_max,
        SpectrumSource::AnalyticDisk,
        DomainMeta {
            area: Some(std::f64::consts::PI * r * r),
            perimeter: Some(2.0 * std::f64::consts::PI * r),
            grid_spacing: None,
        },
    ))
}

// ---------------------------------------------------------------------------
// Grid masks and the finite-difference operator
// ---------------------------------------------------------------------------

/// Boolean inclusion grid for a plane domain, spacing `h` between nodes.
/// Off-grid nodes are exterior, so the grid may be stored tightly around the
/// interior. Constructors for exact shapes stamp the true continuum area and
/// perimeter; parsed masks only get the node-count area estimate, because a
/// staircase perimeter overestimates smooth boundaries by up to 4/pi.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    h: f64,
    nx: usize,
    ny: usize,
    inside: Vec<bool>,
    area_hint: Option<f64>,
    perimeter_hint: Option<f64>,
}

impl DomainMask {
    /// Interior grid nodes of (0,a) x (0,b): positions (i+1, j+1) h strictly
    /// inside the rectangle.
    pub fn rectangle(a: f64, b: f64, h: f64) -> Self {
        assert!(a > 0.0 && b > 0.0 && h > 0.0);
        let count = |side: f64| ((side - 1e-9 * h) / h).floor() as usize;
        let (nx, ny) = (count(a), count(b));
        assert!(nx >= 1 && ny >= 1, "spacing {h} too coarse for {a} x {b}");
        DomainMask {
            h,
            nx,
            ny,
            inside: vec![true; nx * ny],
            area_hint: Some(a * b),
            perimeter_hint: Some(2.0 * (a + b)),
        }
    }

    /// Interior grid nodes of a disk of radius `r` centered on a lattice
    /// node, so the mask keeps the full symmetry group of the square.
    pub fn disk(r: f64, h: f64) -> Self {
        assert!(r > 0.0 && h > 0.0);
        let half = ((r - 1e-9 * h) / h).floor() as i64;
        assert!(half >= 1, "spacing {h} too coarse for radius {r}");
        let n = (2 * half + 1) as usize;
        let r2 = r * r * (1.0 - 1e-12);
        let mut inside = vec![false; n * n];
        for j in 0..n {
            let y = (j as i64 - half) as f64 * h;
            for i in 0..n {
                let x = (i as i64 - half) as f64 * h;
                inside[j * n + i] = x * x + y * y < r2;
            }
        }
        DomainMask {
            h,
            nx: n,
            ny: n,
            inside,
            area_hint: Some(std::f64::consts::PI * r * r),
            perimeter_hint: Some(2.0 * std::f64::consts::PI * r),
        }
    }

    /// Assemble from a raw inclusion grid (row-major, `j * nx + i`).
    pub fn from_grid(h: f64, nx: usize, ny: usize, inside: Vec<bool>) -> Result<Self, SpectrumError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(SpectrumError::InvalidMask(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        if nx == 0 || ny == 0 || inside.len() != nx * ny {
            return Err(SpectrumError::InvalidMask(format!(
                "dimensions {nx} x {ny} do not match {} flags",
                inside.len()
            )));
        }
        if !inside.iter().any(|&b| b) {
            return Err(SpectrumError::InvalidMask("no interior nodes".into()));
        }
        Ok(DomainMask {
            h,
            nx,
            ny,
            inside,
            area_hint: None,
            perimeter_hint: None,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.inside[j * self.nx + i]
    }

    pub fn interior_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Known continuum area if constructed from a shape, else count * h^2.
    pub fn area_estimate(&self) -> f64 {
        self.area_hint
            .unwrap_or(self.interior_count() as f64 * self.h * self.h)
    }

    /// Known continuum perimeter if constructed from a shape.
    pub fn perimeter_hint(&self) -> Option<f64> {
        self.perimeter_hint
    }

    /// True when every interior node reaches every other through 4-neighbor
    /// steps.
    pub fn is_connected(&self) -> bool {
        let n = self.interior_count();
        if n == 0 {
            return false;
        }
        let start = self.inside.iter().position(|&b| b).unwrap();
        let mut seen = vec![false; self.inside.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut reached = 1usize;
        while let Some(u) = queue.pop_front() {
            let (i, j) = (u % self.nx, u / self.nx);
            let mut push = |v: usize| {
                if self.inside[v] && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                    reached += 1;
                }
            };
            if i > 0 {
                push(u - 1);
            }
            if i + 1 < self.nx {
                push(u + 1);
            }
            if j > 0 {
                push(u - self.nx);
            }
            if j + 1 < self.ny {
                push(u + self.nx);
            }
        }
        reached == n
    }
}

/// Text format: `h=<spacing>`, then `<nx> <ny>`, then `ny` rows of `nx`
/// characters ('1' interior, '0' exterior), top row = largest j.
impl fmt::Display for DomainMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "h={:?}", self.h)?;
        writeln!(f, "{} {}", self.nx, self.ny)?;
        for j in (0..self.ny).rev() {
            for i in 0..self.nx {
                f.write_str(if self.inside[j * self.nx + i] { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for DomainMask {
    type Err = SpectrumError;

    fn from_str(s: &str) -> Result<Self, SpectrumError> {
        let bad = |line: usize, message: &str| SpectrumError::MaskFormat {
            line,
            message: message.into(),
        };
        let mut lines = s.lines().map(str::trim_end).enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
        let h: f64 = header
            .strip_prefix("h=")
            .ok_or_else(|| bad(1, "expected `h=<spacing>`"))?
            .trim()
            .parse()
            .map_err(|_| bad(1, "unreadable spacing"))?;
        let (_, dims) = lines.next().ok_or_else(|| bad(2, "missing dimensions"))?;
        let mut it = dims.split_whitespace().map(str::parse::<usize>);
        let (nx, ny) = match (it.next(), it.next(), it.next()) {
            (Some(Ok(nx)), Some(Ok(ny)), None) => (nx, ny),
            _ => return Err(bad(2, "expected `<nx> <ny>`")),
        };
        if nx == 0 || ny == 0 {
            return Err(bad(2, "dimensions must be positive"));
        }
        let mut inside = vec![false; nx * ny];
        let mut rows = 0usize;
        for (lineno, row) in lines {
            if row.is_empty() {
                continue; // tolerate trailing blank lines
            }
            if rows == ny {
                return Err(bad(lineno + 1, "more rows than the declared height"));
            }
            if row.len() != nx {
                return Err(bad(
                    lineno + 1,
                    &format!("row has {} characters, expected {nx}", row.len()),
                ));
            }
            let j = ny - 1 - rows;
            for (i, c) in row.chars().enumerate() {
                inside[j * nx + i] = match c {
                    '1' => true,
                    '0' => false,
                    _ => return Err(bad(lineno + 1, "rows may contain only '0' and '1'")),
                };
            }
            rows += 1;
        }
        if rows != ny {
            return Err(bad(0, "fewer rows than the declared height"));
        }
        DomainMask::from_grid(h, nx, ny, inside)
    }
}

/// Matrix-free 5-point negative Laplacian on the interior nodes of a mask;
/// exterior values are 0 (Dirichlet).
struct FdOperator {
    n: usize,
    inv_h2: f64,
    neighbors: Vec<[u32; 4]>,
}

const NO_NEIGHBOR: u32 = u32::MAX;

impl FdOperator {
    fn new(mask: &DomainMask) -> Self {
        let (nx, ny) = (mask.nx, mask.ny);
        let mut index = vec![NO_NEIGHBOR; nx * ny];
        let mut n = 0u32;
        for (u, &ins) in mask.inside.iter().enumerate() {
            if ins {
                index[u] = n;
                n += 1;
            }
        }
        let mut neighbors = vec![[NO_NEIGHBOR; 4]; n as usize];
        for j in 0..ny {
            for i in 0..nx {
                let u = j * nx + i;
                if index[u] == NO_NEIGHBOR {
                    continue;
                }
                let mut nb = [NO_NEIGHBOR; 4];
                if i > 0 {
                    nb[0] = index[u - 1];
                }
                if i + 1 < nx {
                    nb[1] = index[u + 1];
                }
                if j > 0 {
                    nb[2] = index[u - nx];
                }
                if j + 1 < ny {
                    nb[3] = index[u + nx];
                }
                neighbors[index[u] as usize] = nb;
            }
        }
        FdOperator {
            n: n as usize,
            inv_h2: 1.0 / (mask.h * mask.h),
            neighbors,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (u, nb) in self.neighbors.iter().enumerate() {
            let mut s = 4.0 * x[u];
            for &t in nb {
                if t != NO_NEIGHBOR {
                    s -= x[t as usize];
                }
            }
            y[u] = s * self.inv_h2;
        }
    }

    /// Gershgorin bound on the operator norm.
    fn norm_bound(&self) -> f64 {
        8.0 * self.inv_h2
    }

    fn dense_eigenvalues(&self) -> Vec<f64> {
        let mut a = DMatrix::<f64>::zeros(self.n, self.n);
        for (u, nb) in self.neighbors.iter().enumerate() {
            a[(u, u)] = 4.0 * self.inv_h2;
            for &t in nb {
                if t != NO_NEIGHBOR {
                    a[(u, t as usize)] = -self.inv_h2;
                }
            }
        }
        let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Below this interior size the dense symmetric solver is cheaper and exact.
const DENSE_FALLBACK_THRESHOLD: usize = 2000;
/// Residual stopping rule: |A y - theta y| <= this times the Gershgorin
/// bound. The eigenvalue error is then residual^2 / gap, far below any
/// discretization error of interest.
const LANCZOS_TOL_SCALE: f64 = 1e-8;
const MAX_BLOCK_STEPS: usize = 1000;
const LANCZOS_STREAM: u64 = 0x51ec;

/// k lowest eigenvalues of the 5-point Dirichlet Laplacian on `mask`.
///
/// Below [`DENSE_FALLBACK_THRESHOLD`] interior nodes the operator is solved
/// densely; above it by block Lanczos (block size 2, full
/// reorthogonalization, seeded random start block). The block form is what
/// lets exact two-fold degeneracies — every domain with the square's
/// symmetry group has them — be reported with their multiplicity, which a
/// single-vector Krylov space cannot do.
///
/// The result is deterministic given (mask, k, seed). `complete_up_to` is
/// the k-th value; `grid_spacing` in the metadata records that everything
/// carries an O(h^2) discretization error beyond that promise.
pub fn fd_dirichlet_spectrum(
    mask: &DomainMask,
    k: usize,
    seed: u64,
) -> Result<Spectrum, SpectrumError> {
    let n = mask.interior_count();
    assert!(k >= 1, "need at least one eigenvalue");
    assert!(k <= n, "asked for {k} eigenvalues, mask has {n} interior nodes");
    if !mask.is_connected() {
        return Err(SpectrumError::NotConnected);
    }
    let op = FdOperator::new(mask);
    let mut values = if n < DENSE_FALLBACK_THRESHOLD {
        op.dense_eigenvalues()
    } else {
        lanczos_lowest(&op, k, seed)?
    };
    values.truncate(k);
    let complete = *values.last().unwrap();
    Ok(Spectrum::from_values(
        values,
        complete,
        SpectrumSource::FiniteDifference,
        DomainMeta {
            area: Some(mask.area_estimate()),
            perimeter: mask.perimeter_hint(),
            grid_spacing: Some(mask.h),
        },
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Block Lanczos (block 2) with full reorthogonalization. Returns the k
/// smallest eigenvalues, ascending.
fn lanczos_lowest(op: &FdOperator, k: usize, seed: u64) -> Result<Vec<f64>, SpectrumError> {
    let n = op.n;
    let anorm = op.norm_bound();
    let res_tol = LANCZOS_TOL_SCALE * anorm;
    let break_tol = 1e-14 * anorm;
    let mut rng = SplitMix64::from_seed_and_stream(seed, LANCZOS_STREAM);

    // Flat column-major storage for the orthonormal basis, grown in chunks
    // to avoid doubling spikes at several hundred MB.
    let mut v: Vec<f64> = Vec::new();
    let reserve_for = |v: &mut Vec<f64>, cols: usize| {
        let want = cols * n;
        if v.capacity() < want {
            v.reserve_exact(128 * n);
        }
    };
    reserve_for(&mut v, 2);
    for _ in 0..2 * n {
        v.push(rng.next_in(-1.0, 1.0));
    }
    {
        let (c0, c1) = v.split_at_mut(n);
        let s = 1.0 / norm(c0);
        c0.iter_mut().for_each(|x| *x *= s);
        let proj = dot(c0, c1);
        axpy(c1, -proj, c0);
        let s = 1.0 / norm(c1);
        c1.iter_mut().for_each(|x| *x *= s);
    }

    // Diagonal blocks [a11, a12, a22] and upper-triangular couplings
    // [r11, r12, r22] of the projected block-tridiagonal matrix.
    let mut alphas: Vec<[f64; 3]> = Vec::new();
    let mut betas: Vec<[f64; 3]> = Vec::new();
    let mut w = vec![0.0_f64; 2 * n];
    let mut next_check = (k / 2).max(12);

    for j in 0..MAX_BLOCK_STEPS {
        let cols = 2 * (j + 1);
        {
            let (w0, w1) = w.split_at_mut(n);
            let q0 = &v[(cols - 2) * n..(cols - 1) * n];
            let q1 = &v[(cols - 1) * n..cols * n];
            op.apply(q0, w0);
            op.apply(q1, w1);
            if j > 0 {
                let b = betas[j - 1];
                let qm0 = &v[(cols - 4) * n..(cols - 3) * n];
                let qm1 = &v[(cols - 3) * n..(cols - 2) * n];
                axpy(w0, -b[0], qm0);
                axpy(w0, -b[1], qm1);
                axpy(w1, -b[2], qm1);
            }
            let a11 = dot(q0, w0);
            let a12 = 0.5 * (dot(q0, w1) + dot(q1, w0));
            let a22 = dot(q1, w1);
            alphas.push([a11, a12, a22]);
            axpy(w0, -a11, q0);
            axpy(w0, -a12, q1);
            axpy(w1, -a12, q0);
            axpy(w1, -a22, q1);
            // Full reorthogonalization; a second pass per column when the
            // first one cancelled most of it ("twice is enough").
            for wc in [&mut *w0, &mut *w1] {
                let before = norm(wc);
                for c in 0..cols {
                    let col = &v[c * n..(c + 1) * n];
                    let coef = dot(col, wc);
                    axpy(wc, -coef, col);
                }
                if norm(wc) < 0.7 * before {
                    for c in 0..cols {
                        let col = &v[c * n..(c + 1) * n];
                        let coef = dot(col, wc);
                        axpy(wc, -coef, col);
                    }
                }
            }
            // QR of the residual block.
            let r11 = norm(w0);
            if r11 < break_tol {
                return Err(SpectrumError::ConvergenceFailure { iterations: j });
            }
            let s = 1.0 / r11;
            w0.iter_mut().for_each(|x| *x *= s);
            let r12 = dot(w0, w1);
            axpy(w1, -r12, w0);
            let r22 = norm(w1);
            if r22 < break_tol {
                return Err(SpectrumError::ConvergenceFailure { iterations: j });
            }
            let s = 1.0 / r22;
            w1.iter_mut().for_each(|x| *x *= s);
            betas.push([r11, r12, r22]);
        }

        let saturated = cols + 2 > n;
        if j + 1 >= next_check || saturated || j + 1 == MAX_BLOCK_STEPS {
            if let Some(theta) = converged_lowest(&alphas, &betas, k, res_tol) {
                return Ok(theta);
            }
            if saturated {
                // The Krylov space cannot grow further; with full
                // reorthogonalization this should have converged.
                return Err(SpectrumError::ConvergenceFailure { iterations: j });
            }
            next_check = next_check + (next_check / 2).max(10);
        }

        reserve_for(&mut v, cols + 2);
        v.extend_from_slice(&w[..n]);
        v.extend_from_slice(&w[n..]);
    }
    Err(SpectrumError::ConvergenceFailure {
        iterations: MAX_BLOCK_STEPS,
    })
}

/// Solve the projected block-tridiagonal matrix; if the k lowest Ritz
/// values all have residual bound |B_{j+1} s_last| within tolerance, return
/// them.
fn converged_lowest(
    alphas: &[[f64; 3]],
    betas: &[[f64; 3]],
    k: usize,
    res_tol: f64,
) -> Option<Vec<f64>> {
    let blocks = alphas.len();
    let dim = 2 * blocks;
    if dim < k {
        return None;
    }
    let mut t = DMatrix::<f64>::zeros(dim, dim);
    for (b, a) in alphas.iter().enumerate() {
        t[(2 * b, 2 * b)] = a[0];
        t[(2 * b, 2 * b + 1)] = a[1];
        t[(2 * b + 1, 2 * b)] = a[1];
        t[(2 * b + 1, 2 * b + 1)] = a[2];
    }
    for (b, r) in betas.iter().enumerate().take(blocks - 1) {
        let (row, col) = (2 * (b + 1), 2 * b);
        t[(row, col)] = r[0];
        t[(row, col + 1)] = r[1];
        t[(row + 1, col + 1)] = r[2];
        t[(col, row)] = r[0];
        t[(col + 1, row)] = r[1];
        t[(col + 1, row + 1)] = r[2];
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let tail = betas[blocks - 1];
    for &c in order.iter().take(k) {
        let s0 = eig.eigenvectors[(dim - 2, c)];
        let s1 = eig.eigenvectors[(dim - 1, c)];
        let res = (tail[0] * s0 + tail[1] * s1).hypot(tail[2] * s1);
        if res > res_tol {
            return None;
        }
    }
    Some(order.iter().take(k).map(|&c| eig.eigenvalues[c]).collect())
}
