//! Value-semantic tensor algebra for normal-bundle-valued second fundamental
//! forms: decompositions, norms, normal curvature, and the reaction terms the
//! inequality lab consumes.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::PinchingProfile;

/// Largest supported intrinsic dimension (dense desk-scale storage).
pub const MAX_N: usize = 64;
/// Largest supported codimension.
pub const MAX_M: usize = 8;

/// Relative `|H|` threshold below which the principal normal is treated as
/// undefined.
pub const DEGENERATE_H_REL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SffError {
    #[error("supported envelope is n <= {MAX_N}, m <= {MAX_M}; got n={n}, m={m}")]
    EnvelopeExceeded { n: usize, m: usize },
    #[error("need at least one block of positive dimension")]
    Empty,
    #[error("block {0} is not exactly symmetric as stored")]
    NotSymmetric(usize),
    #[error("block {0} contains a non-finite entry")]
    NonFinite(usize),
    #[error("blocks disagree in shape: block {0}")]
    ShapeMismatch(usize),
    #[error("|H| = {hnorm} is degenerate relative to |A| = {anorm}")]
    DegenerateMeanCurvature { hnorm: f64, anorm: f64 },
    #[error("sampler scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("sampler could not reach a pinched configuration")]
    SamplerExhausted,
    #[error("flat payload length {got} does not match n^2*m = {want}")]
    BadPayload { got: usize, want: usize },
}

/// A normal-bundle-valued second fundamental form: `m` symmetric `n × n`
/// blocks, one per normal direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SffTensor {
    n: usize,
    m: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl SffTensor {
    /// Builds a tensor from blocks, validating shape, exact symmetry,
    /// finiteness, and the supported envelope.
    pub fn from_blocks(blocks: Vec<DMatrix<f64>>) -> Result<Self, SffError> {
        let m = blocks.len();
        if m == 0 {
            return Err(SffError::Empty);
        }
        let n = blocks[0].nrows();
        if n == 0 {
            return Err(SffError::Empty);
        }
        if n > MAX_N || m > MAX_M {
            return Err(SffError::EnvelopeExceeded { n, m });
        }
        for (idx, b) in blocks.iter().enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(SffError::ShapeMismatch(idx));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(SffError::NonFinite(idx));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if b[(i, j)] != b[(j, i)] {
                        return Err(SffError::NotSymmetric(idx));
                    }
                }
            }
        }
        Ok(Self { n, m, blocks })
    }

    /// Builds a tensor after symmetrizing each block (`(B + Bᵀ)/2`).
    pub fn from_symmetrized(blocks: Vec<DMatrix<f64>>) -> Result<Self, SffError> {
        let sym = blocks
            .into_iter()
            .map(|b| {
                let bt = b.transpose();
                (b + bt) * 0.5
            })
            .collect();
        Self::from_blocks(sym)
    }

    pub fn zeros(n: usize, m: usize) -> Result<Self, SffError> {
        Self::from_blocks(vec![DMatrix::zeros(n, n); m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// `H^α = tr A^α`, one component per normal direction.
    pub fn mean_curvature(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace()).collect()
    }

    /// `|H|²`.
    pub fn h_norm_sq(&self) -> f64 {
        self.mean_curvature().iter().map(|h| h * h).sum()
    }

    /// `|A|² = Σ_α |A^α|²_F`.
    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    /// `Å = A − (H/n) g`: removes the trace of every block.
    pub fn traceless_part(&self) -> SffTensor {
        let n = self.n as f64;
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut out = b.clone();
                let shift = b.trace() / n;
                for i in 0..self.n {
                    out[(i, i)] -= shift;
                }
                out
            })
            .collect();
        SffTensor { n: self.n, m: self.m, blocks }
    }

    /// Splits `A` into its principal-normal part `h` and the orthogonal
    /// complement `A⁻`, in a normal frame whose first axis is `ν₁ = H/|H|`.
    pub fn principal_split(&self) -> Result<PrincipalSplit, SffError> {
        let hvec = self.mean_curvature();
        let hnorm = hvec.iter().map(|h| h * h).sum::<f64>().sqrt();
        let anorm = self.norm_sq().sqrt();
        if hnorm <= DEGENERATE_H_REL * anorm || hnorm == 0.0 {
            return Err(SffError::DegenerateMeanCurvature { hnorm, anorm });
        }
        let nu1: Vec<f64> = hvec.iter().map(|h| h / hnorm).collect();

        // Householder reflector with first column ν₁: Q = I − 2uuᵀ/|u|²,
        // u = ν₁ − e₁. Q is orthogonal and symmetric, Q e₁ = ν₁.
        let mut u = nu1.clone();
        u[0] -= 1.0;
        let unorm_sq: f64 = u.iter().map(|v| v * v).sum();
        let rotated = |alpha: usize| -> DMatrix<f64> {
            // Column α of Q.
            let mut out = DMatrix::zeros(self.n, self.n);
            for beta in 0..self.m {
                let mut q = if beta == alpha { 1.0 } else { 0.0 };
                if unorm_sq > 0.0 {
                    q -= 2.0 * u[beta] * u[alpha] / unorm_sq;
                }
                if q != 0.0 {
                    out += &self.blocks[beta] * q;
                }
            }
            out
        };

        let h = rotated(0);
        let nf = self.n as f64;
        let mut h_ring = h.clone();
        let shift = h.trace() / nf;
        for i in 0..self.n {
            h_ring[(i, i)] -= shift;
        }
        let a_minus: Vec<DMatrix<f64>> = (1..self.m)
            .map(|alpha| {
                let mut b = rotated(alpha);
                // Exactly traceless by construction up to rounding; enforce.
                let shift = b.trace() / nf;
                for i in 0..self.n {
                    b[(i, i)] -= shift;
                }
                b
            })
            .collect();
        Ok(PrincipalSplit { h, h_ring, a_minus, hnorm })
    }

    /// Normal curvature `R⊥_{ijαβ} = [A^α, A^β]_{ij}` (constant-curvature
    /// ambient: no extrinsic contribution), with its norms.
    pub fn normal_curvature(&self) -> NormalCurvature {
        let mut components = Vec::new();
        let mut pair_sum = 0.0;
        for alpha in 0..self.m {
            for beta in (alpha + 1)..self.m {
                let c = &self.blocks[alpha] * &self.blocks[beta]
                    - &self.blocks[beta] * &self.blocks[alpha];
                pair_sum += c.iter().map(|v| v * v).sum::<f64>();
                components.push(PairComponent { alpha, beta, matrix: c });
            }
        }
        // The full sum over ordered pairs (α, β) double-counts each unordered
        // pair.
        let norm_sq = 2.0 * pair_sum;
        let principal_norms = self.principal_split().ok().map(|split| {
            let nu1_sq: f64 = split
                .a_minus
                .iter()
                .map(|b| {
                    let c = &split.h * b - b * &split.h;
                    c.iter().map(|v| v * v).sum::<f64>()
                })
                .sum();
            let mut hat_pair = 0.0;
            for a in 0..split.a_minus.len() {
                for b in (a + 1)..split.a_minus.len() {
                    let c = &split.a_minus[a] * &split.a_minus[b]
                        - &split.a_minus[b] * &split.a_minus[a];
                    hat_pair += c.iter().map(|v| v * v).sum::<f64>();
                }
            }
            PrincipalNormalCurvature { hat_sq: 2.0 * hat_pair, nu1_sq }
        });
        NormalCurvature { components, norm_sq, principal_norms }
    }

    /// The reaction terms `(R₁, R₂, P₂)` driving the evolution of `|A|²` and
    /// `|H|²`.
    pub fn reaction_terms(&self) -> ReactionTerms {
        let mut s_sq = 0.0;
        for alpha in 0..self.m {
            for beta in 0..self.m {
                let s = self.blocks[alpha].dot(&self.blocks[beta]);
                s_sq += s * s;
            }
        }
        let r1 = s_sq + self.normal_curvature().norm_sq;

        let hvec = self.mean_curvature();
        let mut ha = DMatrix::zeros(self.n, self.n);
        for alpha in 0..self.m {
            if hvec[alpha] != 0.0 {
                ha += &self.blocks[alpha] * hvec[alpha];
            }
        }
        let r2 = ha.iter().map(|v| v * v).sum::<f64>();

        let p2 = match self.principal_split() {
            Ok(split) => split.a_minus_norm_sq(),
            // With H degenerate there is no preferred normal direction; the
            // whole traceless tensor plays the role of the complement.
            Err(_) => self.norm_sq(),
        };
        ReactionTerms { r1, r2, p2 }
    }

    /// Row-major, block-major flat encoding used by fixtures and
    /// counterexample reports.
    pub fn to_flat(&self) -> FlatSff {
        let mut data = Vec::with_capacity(self.n * self.n * self.m);
        for b in &self.blocks {
            for i in 0..self.n {
                for j in 0..self.n {
                    data.push(b[(i, j)]);
                }
            }
        }
        FlatSff { n: self.n, m: self.m, data }
    }
}

/// Flat JSON-friendly encoding of an [`SffTensor`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatSff {
    pub n: usize,
    pub m: usize,
    /// Row-major entries, block-major order.
    pub data: Vec<f64>,
}

impl TryFrom<FlatSff> for SffTensor {
    type Error = SffError;

    fn try_from(flat: FlatSff) -> Result<Self, Self::Error> {
        let want = flat.n * flat.n * flat.m;
        if flat.data.len() != want {
            return Err(SffError::BadPayload { got: flat.data.len(), want });
        }
        let blocks = (0..flat.m)
            .map(|alpha| {
                DMatrix::from_fn(flat.n, flat.n, |i, j| {
                    flat.data[alpha * flat.n * flat.n + i * flat.n + j]
                })
            })
            .collect();
        SffTensor::from_blocks(blocks)
    }
}

/// Decomposition `A = A⁻ + h ν₁` in the principal normal frame.
#[derive(Debug, Clone)]
pub struct PrincipalSplit {
    /// `h = ⟨A, ν₁⟩`.
    pub h: DMatrix<f64>,
    /// Traceless part `h̊ = h − (|H|/n) g`.
    pub h_ring: DMatrix<f64>,
    /// Traceless blocks orthogonal to the principal normal.
    pub a_minus: Vec<DMatrix<f64>>,
    /// `|H|`.
    pub hnorm: f64,
}

impl PrincipalSplit {
    pub fn h_norm_sq(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }

    pub fn h_ring_norm_sq(&self) -> f64 {
        self.h_ring.iter().map(|v| v * v).sum()
    }

    pub fn a_minus_norm_sq(&self) -> f64 {
        self.a_minus.iter().map(|b| b.iter().map(|v| v * v).sum::<f64>()).sum()
    }
}

/// One independent component `R⊥(ν_α, ν_β)` of the normal curvature.
#[derive(Debug, Clone)]
pub struct PairComponent {
    pub alpha: usize,
    pub beta: usize,
    /// Antisymmetric `n × n` matrix `[A^α, A^β]`.
    pub matrix: DMatrix<f64>,
}

/// Norms of the normal curvature split along the principal normal.
#[derive(Debug, Clone, Copy)]
pub struct PrincipalNormalCurvature {
    /// Full sum over normal pairs orthogonal to `ν₁`.
    pub hat_sq: f64,
    /// `Σ_{β≥2} |[h, A^β]|²` — the mixed part; the full norm is
    /// `hat_sq + 2 · nu1_sq`.
    pub nu1_sq: f64,
}

/// Normal curvature with its (frame-invariant) scalar norms.
#[derive(Debug, Clone)]
pub struct NormalCurvature {
    pub components: Vec<PairComponent>,
    /// Full quadruple-index sum `Σ_{i,j,α,β} (R⊥_{ijαβ})²`.
    pub norm_sq: f64,
    /// Present when the principal normal is well defined.
    pub principal_norms: Option<PrincipalNormalCurvature>,
}

/// Reaction terms of the curvature evolution equations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReactionTerms {
    /// `R₁ = Σ_{α,β} (tr A^α A^β)² + |R⊥|²`.
    pub r1: f64,
    /// `R₂ = Σ_{i,j} (Σ_α H^α A^α_{ij})² = |h|²|H|²`.
    pub r2: f64,
    /// `P₂ = |A⁻|²` (falls back to `|A|²` when `H` is degenerate).
    pub p2: f64,
}

/// Draws a random tensor satisfying the strict pinching condition, with
/// `|H|` rescaled to `scale`. Deterministic for a fixed seed.
pub fn random_pinched(
    profile: &PinchingProfile,
    seed: u64,
    scale: f64,
) -> Result<SffTensor, SffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pinched_with(profile, &mut rng, scale)
}

/// As [`random_pinched`] but drawing from a caller-managed stream.
pub fn random_pinched_with(
    profile: &PinchingProfile,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> Result<SffTensor, SffError> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(SffError::BadScale(scale));
    }
    let n = profile.n() as usize;
    let m = profile.m() as usize;
    if n > MAX_N || m > MAX_M {
        return Err(SffError::EnvelopeExceeded { n, m });
    }
    let normal = StandardNormal;
    let blocks: Vec<DMatrix<f64>> = (0..m)
        .map(|_| DMatrix::from_fn(n, n, |_, _| normal.sample(rng)))
        .collect();
    let raw = SffTensor::from_symmetrized(blocks)?;

    // Separate the trace part, point it along the current mean-curvature
    // direction (or the first normal axis if degenerate), and give it the
    // requested magnitude.
    let ring = raw.traceless_part();
    let hvec = raw.mean_curvature();
    let hnorm = hvec.iter().map(|h| h * h).sum::<f64>().sqrt();
    let nu: Vec<f64> = if hnorm > 0.0 {
        hvec.iter().map(|h| h / hnorm).collect()
    } else {
        let mut e = vec![0.0; m];
        e[0] = 1.0;
        e
    };

    let h2 = scale * scale;
    let a = profile.a_of(h2).map_err(|_| SffError::SamplerExhausted)?;
    let omega = profile.omega_of(h2).map_err(|_| SffError::SamplerExhausted)?;
    let budget = a - h2 / n as f64 - profile.eps() * omega;
    if budget <= 0.0 {
        return Err(SffError::SamplerExhausted);
    }
    // Fill a random fraction of the admissible traceless budget, leaving a
    // strictly positive pinching gap.
    let theta: f64 = rng.random::<f64>().clamp(f64::MIN_POSITIVE, 1.0 - 1e-12);
    let ring_sq = ring.norm_sq();
    let factor = if ring_sq > 0.0 { (theta * budget / ring_sq).sqrt() } else { 0.0 };

    let nf = n as f64;
    let blocks = (0..m)
        .map(|alpha| {
            let mut b = &ring.blocks[alpha] * factor;
            let diag = nu[alpha] * scale / nf;
            for i in 0..n {
                b[(i, i)] += diag;
            }
            b
        })
        .collect();
    SffTensor::from_blocks(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn random_tensor(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SffTensor {
        let normal = StandardNormal;
        let blocks = (0..m)
            .map(|_| DMatrix::from_fn(n, n, |_, _| normal.sample(rng)))
            .collect();
        SffTensor::from_symmetrized(blocks).unwrap()
    }

    /// Random orthogonal matrix via QR of a Gaussian matrix.
    fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
        let normal = StandardNormal;
        let g = DMatrix::from_fn(k, k, |_, _| normal.sample(rng));
        g.qr().q()
    }

    #[test]
    fn mean_curvature_of_identity_block() {
        let n = 5;
        let mut blocks = vec![DMatrix::zeros(n, n); 3];
        blocks[0] = DMatrix::identity(n, n);
        let a = SffTensor::from_blocks(blocks).unwrap();
        assert_eq!(a.mean_curvature(), vec![5.0, 0.0, 0.0]);
        assert_eq!(SffTensor::zeros(4, 2).unwrap().mean_curvature(), vec![0.0, 0.0]);
    }

    #[test]
    fn traceless_part_identities() {
        let n = 6;
        let mut blocks = vec![DMatrix::zeros(n, n); 2];
        blocks[0] = DMatrix::identity(n, n);
        let a = SffTensor::from_blocks(blocks).unwrap();
        assert!(a.traceless_part().norm_sq() < 1e-28);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tensor(&mut rng, 5, 3);
        let ring = a.traceless_part();
        // Traceless input returned unchanged.
        assert_relative_eq!(
            ring.traceless_part().norm_sq(),
            ring.norm_sq(),
            max_relative = 1e-14
        );
        for h in ring.mean_curvature() {
            assert_abs_diff_eq!(h, 0.0, epsilon = 1e-12);
        }
        // |Å|² = |A|² − |H|²/n.
        assert_relative_eq!(
            ring.norm_sq(),
            a.norm_sq() - a.h_norm_sq() / 5.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn principal_split_of_identity_block() {
        let n = 4;
        let mut blocks = vec![DMatrix::zeros(n, n); 2];
        blocks[0] = DMatrix::identity(n, n);
        let a = SffTensor::from_blocks(blocks).unwrap();
        let split = a.principal_split().unwrap();
        assert_relative_eq!(split.hnorm, 4.0, max_relative = 1e-14);
        assert_relative_eq!(split.h_norm_sq(), 4.0, max_relative = 1e-14);
        assert!(split.h_ring_norm_sq() < 1e-24);
        assert!(split.a_minus_norm_sq() < 1e-24);
    }

    #[test]
    fn principal_split_is_frame_covariant() {
        // Put all of H on the second normal axis; the split must not care.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = random_tensor(&mut rng, 5, 3);
        let split_a = {
            // H along axis 1: shift trace into block 0.
            let ring = base.traceless_part();
            let mut blocks: Vec<_> = ring.blocks().to_vec();
            for i in 0..5 {
                blocks[0][(i, i)] += 2.0;
            }
            SffTensor::from_blocks(blocks).unwrap().principal_split().unwrap()
        };
        let split_b = {
            let ring = base.traceless_part();
            // Same tensor with normal axes 0 and 1 swapped.
            let mut blocks = vec![
                ring.blocks()[1].clone(),
                ring.blocks()[0].clone(),
                ring.blocks()[2].clone(),
            ];
            for i in 0..5 {
                blocks[1][(i, i)] += 2.0;
            }
            SffTensor::from_blocks(blocks).unwrap().principal_split().unwrap()
        };
        assert_relative_eq!(split_a.hnorm, split_b.hnorm, max_relative = 1e-12);
        assert_relative_eq!(split_a.h_norm_sq(), split_b.h_norm_sq(), max_relative = 1e-10);
        assert_relative_eq!(
            split_a.a_minus_norm_sq(),
            split_b.a_minus_norm_sq(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn split_norms_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_tensor(&mut rng, 6, 3);
            if let Ok(split) = a.principal_split() {
                assert_relative_eq!(
                    split.h_norm_sq() + split.a_minus_norm_sq(),
                    a.norm_sq(),
                    max_relative = 1e-12
                );
                assert_relative_eq!(
                    split.h_norm_sq(),
                    split.h_ring_norm_sq() + split.hnorm * split.hnorm / 6.0,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn degenerate_mean_curvature_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(&mut rng, 4, 2).traceless_part();
        assert!(matches!(
            a.principal_split(),
            Err(SffError::DegenerateMeanCurvature { .. })
        ));
    }

    #[test]
    fn normal_curvature_vanishes_for_commuting_blocks() {
        let n = 4;
        let d1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 3.0, 2.0, 1.0]));
        let a = SffTensor::from_blocks(vec![d1, d2]).unwrap();
        assert_abs_diff_eq!(a.normal_curvature().norm_sq, 0.0, epsilon = 1e-24);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let single = random_tensor(&mut rng, n, 1);
        assert_eq!(single.normal_curvature().norm_sq, 0.0);
    }

    #[test]
    fn normal_curvature_matches_quadruple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (n, m) in [(3, 2), (4, 3), (2, 3)] {
            let a = random_tensor(&mut rng, n, m);
            let fast = a.normal_curvature().norm_sq;
            let slow = oracle::normal_curvature_norm_sq_bruteforce(&a);
            assert_relative_eq!(fast, slow, max_relative = 1e-10);
        }
    }

    #[test]
    fn normal_curvature_split_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let a = random_tensor(&mut rng, 5, 3);
            let nc = a.normal_curvature();
            if let Some(p) = nc.principal_norms {
                assert_relative_eq!(
                    nc.norm_sq,
                    p.hat_sq + 2.0 * p.nu1_sq,
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn reaction_terms_of_identity_block() {
        let n = 4;
        let mut blocks = vec![DMatrix::zeros(n, n); 2];
        blocks[0] = DMatrix::identity(n, n);
        let a = SffTensor::from_blocks(blocks).unwrap();
        let r = a.reaction_terms();
        assert_relative_eq!(r.r1, 16.0, max_relative = 1e-14); // n²
        assert_relative_eq!(r.r2, 64.0, max_relative = 1e-14); // n³
        assert_abs_diff_eq!(r.p2, 0.0, epsilon = 1e-24);

        let z = SffTensor::zeros(3, 2).unwrap().reaction_terms();
        assert_eq!((z.r1, z.r2, z.p2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn reaction_terms_match_index_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for (n, m) in [(3, 2), (4, 3), (2, 2)] {
            let a = random_tensor(&mut rng, n, m);
            let fast = a.reaction_terms();
            let (r1, r2) = oracle::reaction_terms_bruteforce(&a);
            assert_relative_eq!(fast.r1, r1, max_relative = 1e-10);
            assert_relative_eq!(fast.r2, r2, max_relative = 1e-10);
        }
    }

    #[test]
    fn r2_identity_and_cauchy_schwarz() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let a = random_tensor(&mut rng, 5, 3);
            let r = a.reaction_terms();
            assert!(r.r2 <= a.norm_sq() * a.h_norm_sq() * (1.0 + 1e-12));
            if let Ok(split) = a.principal_split() {
                assert_relative_eq!(
                    r.r2,
                    split.h_norm_sq() * a.h_norm_sq(),
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn scalar_outputs_are_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (n, m) = (5, 3);
        let a = random_tensor(&mut rng, n, m);
        let o_tan = random_orthogonal(&mut rng, n);
        let o_nor = random_orthogonal(&mut rng, m);
        let blocks: Vec<DMatrix<f64>> = (0..m)
            .map(|alpha| {
                let mut b = DMatrix::zeros(n, n);
                for beta in 0..m {
                    b += &a.blocks()[beta] * o_nor[(beta, alpha)];
                }
                // Also rotate the tangent basis; re-symmetrize against
                // rounding noise.
                let rb = o_tan.transpose() * b * &o_tan;
                let rbt = rb.transpose();
                (rb + rbt) * 0.5
            })
            .collect();
        let rotated = SffTensor::from_blocks(blocks).unwrap();

        assert_relative_eq!(a.norm_sq(), rotated.norm_sq(), max_relative = 1e-10);
        assert_relative_eq!(a.h_norm_sq(), rotated.h_norm_sq(), max_relative = 1e-10);
        let (ra, rb) = (a.reaction_terms(), rotated.reaction_terms());
        assert_relative_eq!(ra.r1, rb.r1, max_relative = 1e-10);
        assert_relative_eq!(ra.r2, rb.r2, max_relative = 1e-10);
        assert_relative_eq!(ra.p2, rb.p2, max_relative = 1e-8);
        assert_relative_eq!(
            a.normal_curvature().norm_sq,
            rotated.normal_curvature().norm_sq,
            max_relative = 1e-10
        );
    }

    #[test]
    fn sampler_is_deterministic_and_pinched() {
        let profile = PinchingProfile::with_default_eps(8, 3, 1.0).unwrap();
        let a = random_pinched(&profile, 42, 3.0).unwrap();
        let b = random_pinched(&profile, 42, 3.0).unwrap();
        assert_eq!(a, b);
        let c = random_pinched(&profile, 43, 3.0).unwrap();
        assert_ne!(a, c);

        for seed in 0..50 {
            let t = random_pinched(&profile, seed, 3.0).unwrap();
            assert_relative_eq!(t.h_norm_sq(), 9.0, max_relative = 1e-10);
            let gap = profile.pinching_gap(t.norm_sq(), t.h_norm_sq()).unwrap();
            assert!(gap > 0.0, "sampler must leave a strictly positive gap");
        }
        assert!(matches!(
            random_pinched(&profile, 1, 0.0),
            Err(SffError::BadScale(_))
        ));
    }

    #[test]
    fn validation_rejects_bad_blocks() {
        let mut bad = DMatrix::zeros(3, 3);
        bad[(0, 1)] = 1.0;
        assert!(matches!(
            SffTensor::from_blocks(vec![bad]),
            Err(SffError::NotSymmetric(0))
        ));
        let mut inf = DMatrix::zeros(3, 3);
        inf[(1, 1)] = f64::INFINITY;
        assert!(matches!(
            SffTensor::from_blocks(vec![inf]),
            Err(SffError::NonFinite(0))
        ));
        assert!(SffTensor::from_blocks(vec![]).is_err());
        assert!(SffTensor::zeros(MAX_N + 1, 1).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = random_tensor(&mut rng, 4, 3);
        let flat = a.to_flat();
        let json = serde_json::to_string(&flat).unwrap();
        let back: FlatSff = serde_json::from_str(&json).unwrap();
        let b = SffTensor::try_from(back).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn norm_decomposition_holds(seed in 0u64..1000, n in 2usize..6, m in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_tensor(&mut rng, n, m);
            let ring = a.traceless_part();
            prop_assert!(
                (ring.norm_sq() + a.h_norm_sq() / n as f64 - a.norm_sq()).abs()
                    <= 1e-12 * a.norm_sq().max(1.0)
            );
        }
    }
}
