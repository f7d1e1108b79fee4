//! Dimensional constants and the scalar pinching functions, together with the
//! sharp product-of-spheres family that saturates the pinching condition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from constructing profiles or evaluating the scalar functions.
#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("intrinsic dimension must be at least 2, got {0}")]
    DimensionTooSmall(u32),
    #[error("scalar pinching functions require n >= 3, got {0}")]
    DimensionUnsupported(u32),
    #[error("codimension must be at least 1, got {0}")]
    CodimensionTooSmall(u32),
    #[error("ambient curvature must be positive and finite, got {0}")]
    BadCurvature(f64),
    #[error("pinching slack must satisfy 0 <= eps < n^(-5/2), got {eps} (limit {limit})")]
    EpsOutOfRange { eps: f64, limit: f64 },
    #[error("{name} must be finite and nonnegative, got {value}")]
    NegativeInput { name: &'static str, value: f64 },
    #[error("|A|^2 = {a2} lies below the Cauchy-Schwarz floor |H|^2/n = {floor}")]
    InconsistentNorms { a2: f64, floor: f64 },
    #[error("sphere factors need p >= 1 and q >= 1, got p={p}, q={q}")]
    BadFactors { p: u32, q: u32 },
    #[error("angle must lie in ({lo}, {hi}), got {phi}")]
    AngleOutOfRange { phi: f64, lo: f64, hi: f64 },
}

/// Guard band keeping `phi` away from the collapsed endpoints where
/// `tan`/`cot` overflow.
pub const PHI_GUARD: f64 = 1e-6;

/// Relative tolerance on the `|A|^2 >= |H|^2/n` floor; discretized round data
/// sits exactly on the floor up to rounding.
const NORM_FLOOR_REL_TOL: f64 = 1e-9;

fn non_negative(name: &'static str, value: f64) -> Result<(), ProfileError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ProfileError::NegativeInput { name, value })
    }
}

/// The dimensional constants `(n, m, K̄, ε)` and every scalar pinching
/// function built from them.
///
/// All methods are pure functions of `(self, args)` and are safe to call
/// concurrently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchingProfile {
    n: u32,
    m: u32,
    kbar: f64,
    eps: f64,
}

impl PinchingProfile {
    /// Default pinching slack `ε = 0.01 · n^(-5/2)`.
    ///
    /// The theory only requires `ε` to be much smaller than `n^(-5/2)`; a
    /// fixed small multiple makes runs reproducible. `ε = 0` is also accepted
    /// by [`PinchingProfile::new`] (the unstrengthened condition).
    pub fn default_eps(n: u32) -> f64 {
        0.01 * (n as f64).powf(-2.5)
    }

    /// Builds a profile, validating every invariant.
    ///
    /// `n >= 2` and `m >= 1` are accepted; dimensions outside the
    /// theorem range (`n >= 8`, `m >= 2`) are flagged by
    /// [`PinchingProfile::in_theorem_range`] rather than rejected.
    pub fn new(n: u32, m: u32, kbar: f64, eps: f64) -> Result<Self, ProfileError> {
        if n < 2 {
            return Err(ProfileError::DimensionTooSmall(n));
        }
        if m < 1 {
            return Err(ProfileError::CodimensionTooSmall(m));
        }
        if !kbar.is_finite() || kbar <= 0.0 {
            return Err(ProfileError::BadCurvature(kbar));
        }
        let limit = (n as f64).powf(-2.5);
        if !eps.is_finite() || eps < 0.0 || eps >= limit {
            return Err(ProfileError::EpsOutOfRange { eps, limit });
        }
        Ok(Self { n, m, kbar, eps })
    }

    /// Profile with the default slack `ε = 0.01 · n^(-5/2)`.
    pub fn with_default_eps(n: u32, m: u32, kbar: f64) -> Result<Self, ProfileError> {
        Self::new(n, m, kbar, Self::default_eps(n))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn kbar(&self) -> f64 {
        self.kbar
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// True when `(n, m)` sit in the range the main theorems require
    /// (`n >= 8`, `m >= 2`).
    pub fn in_theorem_range(&self) -> bool {
        self.n >= 8 && self.m >= 2
    }

    fn require_scalar_dim(&self) -> Result<(), ProfileError> {
        if self.n < 3 {
            Err(ProfileError::DimensionUnsupported(self.n))
        } else {
            Ok(())
        }
    }

    /// The pinching threshold `a(x) = √((x/(n−2) + 4K̄)² + (4n−16)K̄²)`,
    /// where `x` stands for `|H|²`.
    ///
    /// For `n > 4` it satisfies `x/(n−2) + 4K̄ < a(x) < x/(n−2) + 2√n·K̄`.
    pub fn a_of(&self, x: f64) -> Result<f64, ProfileError> {
        self.require_scalar_dim()?;
        non_negative("x", x)?;
        let n = self.n as f64;
        let k = self.kbar;
        let y = x / (n - 2.0) + 4.0 * k;
        Ok((y * y + (4.0 * n - 16.0) * k * k).sqrt())
    }

    /// The excess `å(x) = a(x) − x/n` above the umbilic floor.
    pub fn a_ring(&self, x: f64) -> Result<f64, ProfileError> {
        Ok(self.a_of(x)? - x / self.n as f64)
    }

    /// Derivative `å′(x) = (x/(n−2) + 4K̄) / ((n−2)·a(x)) − 1/n`.
    ///
    /// Strictly below its asymptote `2/(n(n−2))` for every finite `x`.
    pub fn a_ring_prime(&self, x: f64) -> Result<f64, ProfileError> {
        let a = self.a_of(x)?;
        let n = self.n as f64;
        let y = x / (n - 2.0) + 4.0 * self.kbar;
        Ok(y / ((n - 2.0) * a) - 1.0 / n)
    }

    /// Second derivative `å″(x) = (4n−16)K̄² / ((n−2)²·a(x)³)`; positive for
    /// all `x >= 0` when `n > 4`.
    pub fn a_ring_double_prime(&self, x: f64) -> Result<f64, ProfileError> {
        let a = self.a_of(x)?;
        let n = self.n as f64;
        let k = self.kbar;
        Ok((4.0 * n - 16.0) * k * k / ((n - 2.0) * (n - 2.0) * a * a * a))
    }

    /// The comparison weight `ω(h2) = h2/(n−2) + 4n√n·K̄`.
    ///
    /// Satisfies `ω > a(h2)` and `n·å(h2) > a(h2)` for every `h2 >= 0`. The
    /// stronger chain `ω > n·å(h2)` only holds on a bounded curvature range:
    /// since `n·å > 2·h2/(n−2) + 4nK̄`, the chain necessarily breaks once
    /// `h2` exceeds roughly `4n(√n−1)(n−2)·K̄` (measured crossover ≈ 351 for
    /// `n = 8, K̄ = 1`).
    pub fn omega_of(&self, h2: f64) -> Result<f64, ProfileError> {
        self.require_scalar_dim()?;
        non_negative("h2", h2)?;
        let n = self.n as f64;
        Ok(h2 / (n - 2.0) + 4.0 * n * n.sqrt() * self.kbar)
    }

    /// The pinching gap `f = a(h2) − a2 − ε·ω(h2)`; positivity is the strict
    /// pinching predicate.
    ///
    /// Requires the Cauchy–Schwarz consistency `a2 >= h2/n` (up to a small
    /// relative tolerance for discretized inputs).
    pub fn pinching_gap(&self, a2: f64, h2: f64) -> Result<f64, ProfileError> {
        non_negative("a2", a2)?;
        let floor = h2 / self.n as f64;
        if a2 < floor * (1.0 - NORM_FLOOR_REL_TOL) - f64::EPSILON {
            return Err(ProfileError::InconsistentNorms { a2, floor });
        }
        Ok(self.a_of(h2)? - a2 - self.eps * self.omega_of(h2)?)
    }

    /// True iff `a2 <= a(h2) − ε·ω(h2)`, i.e. the pinching gap is
    /// nonnegative.
    pub fn quartic_pinched(&self, a2: f64, h2: f64) -> Result<bool, ProfileError> {
        Ok(self.pinching_gap(a2, h2)? >= 0.0)
    }
}

/// One member of the sharp family `S^p(cos φ) × S^q(sin φ) ⊂ S^{p+q+1}(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpFamilyPoint {
    pub p: u32,
    pub q: u32,
    pub phi: f64,
}

impl SharpFamilyPoint {
    /// Validates `p, q >= 1` and `phi` strictly inside `(0, π/2)` with a
    /// guard band of [`PHI_GUARD`].
    pub fn new(p: u32, q: u32, phi: f64) -> Result<Self, ProfileError> {
        if p < 1 || q < 1 {
            return Err(ProfileError::BadFactors { p, q });
        }
        let lo = PHI_GUARD;
        let hi = std::f64::consts::FRAC_PI_2 - PHI_GUARD;
        if !phi.is_finite() || phi <= lo || phi >= hi {
            return Err(ProfileError::AngleOutOfRange { phi, lo, hi });
        }
        Ok(Self { p, q, phi })
    }

    /// Radii `(r, s) = (cos φ, sin φ)`; `r² + s² = 1` by construction.
    pub fn radii(&self) -> (f64, f64) {
        (self.phi.cos(), self.phi.sin())
    }
}

/// Closed-form `(|A|², |H|²)` of `S^p(r) × S^q(s) ⊂ S^{p+q+1}(1)` with
/// `r = cos φ`, `s = sin φ`:
///
/// `|A|² = p·s²/r² + q·r²/s²` and `|H| = |p·s/r − q·r/s|`.
///
/// The two principal curvature bands are `s/r` (p-fold) and `−r/s` (q-fold)
/// with respect to a unit normal inside the great `S^{p+q+1}`.
pub fn sharp_family_geometry(point: &SharpFamilyPoint) -> (f64, f64) {
    let t = point.phi.tan();
    let (p, q) = (point.p as f64, point.q as f64);
    let a2 = p * t * t + q / (t * t);
    let h = p * t - q / t;
    (a2, h * h)
}

/// Outcome of measuring how far a sharp-family member sits above the pinching
/// threshold, compared against the two closed-form coefficient candidates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SharpnessDefect {
    /// `|A|⁴ − (|H|²/(n−2) + 4K̄)² − (4n−16)K̄²` from the closed-form
    /// geometry.
    pub measured: f64,
    /// Candidate `4((n−2)² − 1)/(n−2)² · s⁴/r⁴ · K̄²`.
    pub coeff_a_value: f64,
    /// Candidate `4((n−2)² − 4)/(n−2)² · s⁴/r⁴ · K̄²`.
    pub coeff_b_value: f64,
    /// Whether each candidate reproduces `measured` to 1e-8 relative.
    pub coeff_a_matches: bool,
    pub coeff_b_matches: bool,
}

/// Measures the quartic-pinching defect of `S^2(r) × S^{n-2}(s)` and reports
/// which closed-form coefficient matches it.
///
/// Requires `p = 2`; `n = p + q` is read off the point. Symbolic expansion
/// gives `defect = 4t²(q² − 4)/q²` with `t = s²/r²`, i.e. the
/// `((n−2)² − 4)` candidate; the `((n−2)² − 1)` variant is reported alongside
/// as data.
pub fn sharpness_defect(point: &SharpFamilyPoint, kbar: f64) -> Result<SharpnessDefect, ProfileError> {
    if point.p != 2 {
        return Err(ProfileError::BadFactors { p: point.p, q: point.q });
    }
    if !kbar.is_finite() || kbar <= 0.0 {
        return Err(ProfileError::BadCurvature(kbar));
    }
    let n = (point.p + point.q) as f64;
    // Geometry in the unit sphere scales linearly in curvature: the family in
    // the sphere of curvature K̄ has |A|², |H|² equal to K̄ times the unit
    // values.
    let (a2_unit, h2_unit) = sharp_family_geometry(point);
    let (a2, h2) = (a2_unit * kbar, h2_unit * kbar);
    let base = h2 / (n - 2.0) + 4.0 * kbar;
    let measured = a2 * a2 - base * base - (4.0 * n - 16.0) * kbar * kbar;
    let (r, s) = point.radii();
    let t2 = (s * s) / (r * r);
    let q2 = (n - 2.0) * (n - 2.0);
    let coeff_a_value = 4.0 * (q2 - 1.0) / q2 * t2 * t2 * kbar * kbar;
    let coeff_b_value = 4.0 * (q2 - 4.0) / q2 * t2 * t2 * kbar * kbar;
    let rel = |cand: f64| {
        let scale = measured.abs().max(cand.abs()).max(f64::MIN_POSITIVE);
        (cand - measured).abs() / scale
    };
    Ok(SharpnessDefect {
        measured,
        coeff_a_value,
        coeff_b_value,
        coeff_a_matches: rel(coeff_a_value) < 1e-8,
        coeff_b_matches: rel(coeff_b_value) < 1e-8,
    })
}
