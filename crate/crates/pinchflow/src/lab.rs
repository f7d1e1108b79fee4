//! Certifies, by dense grid scan and seeded random sampling, every
//! standalone inequality of the pinching machinery: the scalar profile
//! lemmas, the matrix and reaction lemmas, the gradient-term coefficient
//! bookkeeping, and the decay drift chain. Emits machine-readable
//! verification reports and optional per-sample CSV rows.
//!
//! Every check is deterministic: grid cells and random samples are evaluated
//! in parallel with an associative (min-slack, first-index) reduction, and
//! per-sample RNG streams are derived from `(seed, sample_index)`, so results
//! are bit-identical across thread counts and across serial/parallel paths.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::profile::PinchingProfile;

/// Cap on emitted CSV rows per report, to keep counterexample artifacts at
/// desk scale; rows are kept in deterministic index order.
pub const MAX_ROWS_PER_REPORT: usize = 10_000;

/// Scan domain for the grid-based checks.
///
/// `x_max` is measured in units of the ambient curvature: the log grid for a
/// given `kbar` spans `[1e-3·kbar, x_max·kbar]`. With `refine_near_zero` an
/// additional 10³ linear points cover `(0, 1]`. The exact zero is excluded:
/// two of the scalar inequalities are equalities at `x = 0` (checked
/// separately as unit cases), so a grid containing 0 could never certify
/// strictly positive slack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanSpec {
    pub x_max: f64,
    pub grid_points: usize,
    pub refine_near_zero: bool,
    pub n_set: Vec<u32>,
    pub kbar_set: Vec<f64>,
}

impl ScanSpec {
    /// The certification domain used by the acceptance suite.
    pub fn certification() -> Self {
        Self {
            x_max: 1e6,
            grid_points: 10_000,
            refine_near_zero: true,
            n_set: vec![8, 10, 12, 16, 32, 64, 128],
            kbar_set: vec![0.25, 1.0, 4.0],
        }
    }

    /// A reduced domain for fast smoke tests.
    pub fn smoke() -> Self {
        Self {
            x_max: 1e6,
            grid_points: 400,
            refine_near_zero: false,
            n_set: vec![8, 16],
            kbar_set: vec![1.0],
        }
    }

    /// The x-grid for one curvature value.
    pub fn x_grid(&self, kbar: f64) -> Vec<f64> {
        let lo = 1e-3 * kbar;
        let hi = self.x_max * kbar;
        let pts = self.grid_points.max(2);
        let mut grid = Vec::with_capacity(pts + 1000);
        let ratio = hi / lo;
        for i in 0..pts {
            let t = i as f64 / (pts - 1) as f64;
            grid.push(lo * ratio.powf(t));
        }
        if self.refine_near_zero {
            for i in 1..=1000 {
                grid.push(i as f64 * 1e-3);
            }
        }
        grid
    }
}

/// Tunable constants entering the reaction, gradient, and decay lemmas.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LemmaParams {
    /// Interpolation weight of the combined reaction bound; `0 < δ ≤ 1/2`.
    pub delta: f64,
    /// Pinching ratio constant; `1/n < c_n ≤ 1/(n−2)`.
    pub c_n: f64,
    /// Gradient constant; `1/n < c̃ ≤ 3/(n+2)`.
    pub c_tilde: f64,
    /// Young constants of the gradient-term bookkeeping.
    pub a2_young: f64,
    pub a3_young: f64,
    /// Ambient curvature-variation bound; 0 in a space form. Positive values
    /// exercise the general statements by adding sampled envelope scalars to
    /// the weak side only.
    pub rbar: f64,
    /// High-curvature regime threshold for the reaction and decay checks:
    /// samples use `|H|² ≥ h2_threshold`.
    pub h2_threshold: f64,
    /// Upper end of the sampled `|H|²` range.
    pub h2_max: f64,
}

impl LemmaParams {
    /// Defaults for a given profile: `δ = 1/2`, `c_n = 1/(n−2)`,
    /// `c̃ = 2(n−1)/(n(n+2))`, the standard Young constants, `rbar = 0`, and
    /// the high-curvature window `[10³(n−2)K̄, 10⁶K̄]`.
    pub fn for_profile(profile: &PinchingProfile) -> Self {
        let n = profile.n() as f64;
        let k = profile.kbar();
        Self {
            delta: 0.5,
            c_n: 1.0 / (n - 2.0),
            c_tilde: 2.0 * (n - 1.0) / (n * (n + 2.0)),
            a2_young: 2.0 * (n + 2.0) / ((n - 1.0) * (n - 2.0)),
            a3_young: 2.0 * (n + 2.0) / ((n - 1.0) * (n - 2.0) - 2.0 * (n + 2.0)),
            rbar: 0.0,
            h2_threshold: 1e3 * (n - 2.0) * k,
            h2_max: 1e6 * k,
        }
    }

    pub fn validate(&self, n: u32) -> Result<(), String> {
        let nf = n as f64;
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(format!("delta must be in (0, 1/2], got {}", self.delta));
        }
        if !(self.c_n > 1.0 / nf && self.c_n <= 1.0 / (nf - 2.0)) {
            return Err(format!("c_n must be in (1/n, 1/(n-2)], got {}", self.c_n));
        }
        if !(self.c_tilde > 1.0 / nf && self.c_tilde <= 3.0 / (nf + 2.0)) {
            return Err(format!("c_tilde must be in (1/n, 3/(n+2)], got {}", self.c_tilde));
        }
        if !(self.rbar >= 0.0) {
            return Err(format!("rbar must be nonnegative, got {}", self.rbar));
        }
        if !(self.h2_threshold >= 0.0 && self.h2_max > self.h2_threshold) {
            return Err("need 0 <= h2_threshold < h2_max".to_string());
        }
        Ok(())
    }
}

/// Outcome of one certified inequality: sample counts, violation counts, the
/// minimum signed slack (slack = strong side − weak side in the inequality's
/// stated direction), and the input attaining it.
///
/// Invariant: `violations == 0 ⟺ min_slack > 0`; a sample is a violation
/// exactly when its slack is not strictly positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma_id: String,
    pub samples: u64,
    pub violations: u64,
    pub min_slack: f64,
    pub worst_case: Value,
    /// Always 0 in artifacts so reruns are byte-identical; real timing is
    /// reported on stderr by the CLI.
    pub wallclock_ms: u64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// How much per-sample CSV detail a check should emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowPolicy {
    /// No rows; checks run fully parallel.
    None,
    /// Only violating samples (counterexample evidence).
    Violations,
    /// Every sample (capped per report).
    All,
}

/// One CSV row of sample evidence (`lemma_id,n,m,kbar,eps,x,p2,lhs,rhs,slack,pass`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRow {
    pub lemma_id: String,
    pub n: u32,
    pub m: u32,
    pub kbar: f64,
    pub eps: f64,
    pub x: f64,
    pub p2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Reports plus optional per-sample rows from one check.
#[derive(Debug, Clone)]
pub struct LabOutput {
    pub reports: Vec<VerificationReport>,
    pub rows: Vec<SampleRow>,
}

impl LabOutput {
    pub fn merge(mut self, mut other: LabOutput) -> LabOutput {
        self.reports.append(&mut other.reports);
        self.rows.append(&mut other.rows);
        self
    }
}

// ---------------------------------------------------------------------------
// Generic deterministic scan driver
// ---------------------------------------------------------------------------

/// One evaluated inequality instance at one scan index.
#[derive(Debug, Clone, Copy)]
struct EvalResult {
    report: usize,
    n: u32,
    m: u32,
    kbar: f64,
    eps: f64,
    x: f64,
    p2: f64,
    lhs: f64,
    rhs: f64,
    slack: f64,
}

/// Associative (count, violation count, min-by-(slack, index)) accumulator.
#[derive(Debug, Clone, Copy)]
struct Agg {
    samples: u64,
    violations: u64,
    min_slack: f64,
    min_index: u64,
}

impl Agg {
    fn new() -> Self {
        Self { samples: 0, violations: 0, min_slack: f64::INFINITY, min_index: u64::MAX }
    }

    fn key(slack: f64) -> f64 {
        // NaN sorts below everything so it is always surfaced as the worst
        // case (it also counts as a violation).
        if slack.is_nan() { f64::NEG_INFINITY } else { slack }
    }

    fn push(&mut self, index: u64, slack: f64) {
        self.samples += 1;
        if !(slack > 0.0) {
            self.violations += 1;
        }
        let k = Self::key(slack);
        if k < Self::key(self.min_slack)
            || (k == Self::key(self.min_slack) && index < self.min_index)
        {
            self.min_slack = slack;
            self.min_index = index;
        }
    }

    fn merge(self, other: Self) -> Self {
        let (a, b) = (Self::key(self.min_slack), Self::key(other.min_slack));
        let take_other = b < a || (b == a && other.min_index < self.min_index);
        Self {
            samples: self.samples + other.samples,
            violations: self.violations + other.violations,
            min_slack: if take_other { other.min_slack } else { self.min_slack },
            min_index: if take_other { other.min_index } else { self.min_index },
        }
    }
}

/// Runs `eval` over `count` indices, aggregating per-report slacks. Parallel
/// (and row-free) under `RowPolicy::None`, serial with row collection
/// otherwise; both paths produce identical reports.
fn drive<F>(count: u64, ids: &[&str], rows: RowPolicy, eval: F) -> LabOutput
where
    F: Fn(u64, &mut Vec<EvalResult>) + Sync,
{
    let n_reports = ids.len();
    let aggs: Vec<Agg> = if rows == RowPolicy::None {
        (0..count)
            .into_par_iter()
            .fold(
                || (vec![Agg::new(); n_reports], Vec::new()),
                |(mut aggs, mut buf), idx| {
                    buf.clear();
                    eval(idx, &mut buf);
                    for e in &buf {
                        aggs[e.report].push(idx, e.slack);
                    }
                    (aggs, buf)
                },
            )
            .map(|(aggs, _)| aggs)
            .reduce(
                || vec![Agg::new(); n_reports],
                |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
            )
    } else {
        let mut aggs = vec![Agg::new(); n_reports];
        let mut buf = Vec::new();
        for idx in 0..count {
            buf.clear();
            eval(idx, &mut buf);
            for e in &buf {
                aggs[e.report].push(idx, e.slack);
            }
        }
        aggs
    };

    // Second (serial) pass for rows, bounded per report.
    let mut out_rows = Vec::new();
    if rows != RowPolicy::None {
        let mut counts = vec![0usize; n_reports];
        let mut buf = Vec::new();
        'outer: for idx in 0..count {
            buf.clear();
            eval(idx, &mut buf);
            for e in &buf {
                let pass = e.slack > 0.0;
                if (rows == RowPolicy::All || !pass) && counts[e.report] < MAX_ROWS_PER_REPORT {
                    counts[e.report] += 1;
                    out_rows.push(SampleRow {
                        lemma_id: ids[e.report].to_string(),
                        n: e.n,
                        m: e.m,
                        kbar: e.kbar,
                        eps: e.eps,
                        x: e.x,
                        p2: e.p2,
                        lhs: e.lhs,
                        rhs: e.rhs,
                        slack: e.slack,
                        pass,
                    });
                }
            }
            if counts.iter().all(|&c| c >= MAX_ROWS_PER_REPORT) {
                break 'outer;
            }
        }
    }

    let reports = aggs
        .iter()
        .enumerate()
        .filter(|(_, a)| a.samples > 0)
        .map(|(r, a)| {
            // Re-evaluate the worst index to recover its full input record.
            let mut buf = Vec::new();
            eval(a.min_index, &mut buf);
            let worst = buf
                .iter()
                .find(|e| e.report == r)
                .map(|e| {
                    json!({
                        "index": a.min_index,
                        "n": e.n,
                        "m": e.m,
                        "kbar": e.kbar,
                        "eps": e.eps,
                        "x": e.x,
                        "p2": e.p2,
                        "lhs": e.lhs,
                        "rhs": e.rhs,
                        "slack": e.slack,
                    })
                })
                .unwrap_or(Value::Null);
            let report = VerificationReport {
                lemma_id: ids[r].to_string(),
                samples: a.samples,
                violations: a.violations,
                min_slack: a.min_slack,
                worst_case: worst,
                wallclock_ms: 0,
            };
            debug_assert_eq!(report.violations == 0, report.min_slack > 0.0);
            report
        })
        .collect();

    LabOutput { reports, rows: out_rows }
}

// ---------------------------------------------------------------------------
// Scalar profile lemmas
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Scalars {
    n: f64,
    k: f64,
    x: f64,
    a: f64,
    aring: f64,
    ap: f64,
    app: f64,
    omega: f64,
}

fn scalars(n: u32, k: f64, x: f64) -> Scalars {
    let nf = n as f64;
    let y = x / (nf - 2.0) + 4.0 * k;
    let a = (y * y + (4.0 * nf - 16.0) * k * k).sqrt();
    Scalars {
        n: nf,
        k,
        x,
        a,
        aring: a - x / nf,
        ap: y / ((nf - 2.0) * a) - 1.0 / nf,
        app: (4.0 * nf - 16.0) * k * k / ((nf - 2.0) * (nf - 2.0) * a * a * a),
        omega: x / (nf - 2.0) + 4.0 * nf * nf.sqrt() * k,
    }
}

/// `nK̄(å + xå′) − a(å − xå′)` in its cancellation-free rational form.
///
/// The textbook arrangement of this quantity loses all significant digits at
/// large `x` (it is an `O(1/x²)` difference of `O(x²)` terms); the rational
/// rewrite below is exactly equal and evaluates with full relative accuracy.
fn weighted_excess_lhs(s: &Scalars) -> f64 {
    let (n, k, x, a) = (s.n, s.k, s.x, s.a);
    let d = n - 2.0;
    let num = 8.0 * n * (n - 4.0) * d * (2.0 * x + n * d * k) * k.powi(4);
    let den = (x * x + 6.0 * x * d * k + 2.0 * n * d * d * k * k) * a
        + (x + 2.0 * d * k) * d * a * a;
    num / den
}

/// Closed-form lower bound of the weighted excess (equality at `x = 0`).
fn weighted_excess_rhs(n: f64, k: f64, x: f64) -> f64 {
    let d = n - 2.0;
    let den = x + (8.0 + 4.0 * n.sqrt()).sqrt() * d * k;
    8.0 * n * (n - 4.0) * d * d * k.powi(4) / (den * den)
}

/// Direct (numerically fragile) form of the weighted excess, kept for
/// oracle cross-checks at moderate `x`.
#[cfg(test)]
fn weighted_excess_lhs_direct(s: &Scalars) -> f64 {
    s.n * s.k * (s.aring + s.x * s.ap) - s.a * (s.aring - s.x * s.ap)
}

/// `2å − x/n + xå′`, the linear-in-`P₂` coefficient of the scalar master
/// inequality.
fn linear_coeff(s: &Scalars) -> f64 {
    2.0 * s.aring - s.x / s.n + s.x * s.ap
}

/// Closed-form upper bound for [`linear_coeff`] (equality at `x = 0`).
fn linear_coeff_bound(n: f64, k: f64, x: f64) -> f64 {
    let sq = n.sqrt();
    4.0 * sq * k - (n - 8.0) * x / (n * (n - 2.0))
        - 6.0 * (2.0 * sq - 4.0) * x * k / (3.0 * x + 4.0 * sq * (n - 2.0) * k)
}

/// Slack of `linear_coeff <= linear_coeff_bound` in a fully factored rational
/// form: manifestly positive for `x > 0` (every coefficient group is positive
/// for `n >= 5`) and exactly zero at `x = 0`. The naive difference of the two
/// sides underflows to noise at small `x`.
fn linear_coeff_slack(s: &Scalars) -> f64 {
    let (n, k, x, a) = (s.n, s.k, s.x, s.a);
    let sq = n.sqrt();
    let d = n - 2.0;
    let aa = d * a;
    let d2 = 3.0 * x + 4.0 * sq * d * k;
    let n2 = 3.0 * x * x + 20.0 * d * x * k + 8.0 * n * d * d * k * k;
    let t = d2 * d2 - 6.0 * (2.0 * sq - 4.0) * d * x * k;
    let g = k * k
        * (160.0 * sq.powi(7) - 256.0 * sq.powi(6) - 640.0 * sq.powi(5) + 1024.0 * sq.powi(4)
            + 640.0 * sq.powi(3)
            - 1024.0 * sq * sq)
        + k * x * (24.0 * sq.powi(4) + 336.0 * sq.powi(3) - 624.0 * sq * sq - 672.0 * sq + 1152.0)
        + x * x * (45.0 * sq - 54.0);
    let p = 4.0 * k * k * x * x * (sq - 2.0) * (n - 2.0) * (n - 2.0) * g;
    p / (d * d2 * aa * (aa * t + d2 * n2))
}

/// Certifies the five properties of the scalar excess functions over the
/// scan grid. Report ids `lemma_3_1_i` … `lemma_3_1_v`.
///
/// Items iii and iv are equalities at `x = 0` (grid excludes 0; the equality
/// cases live in unit tests); item v requires `n >= 8` and is skipped for
/// smaller n in the scan set.
pub fn check_lemma_3_1(spec: &ScanSpec, rows: RowPolicy) -> LabOutput {
    let ids = ["lemma_3_1_i", "lemma_3_1_ii", "lemma_3_1_iii", "lemma_3_1_iv", "lemma_3_1_v"];
    let mut cells: Vec<(u32, f64, f64)> = Vec::new();
    for &n in &spec.n_set {
        if n < 5 {
            continue;
        }
        for &k in &spec.kbar_set {
            for x in spec.x_grid(k) {
                cells.push((n, k, x));
            }
        }
    }

    drive(cells.len() as u64, &ids, rows, |idx, out| {
        let (n, k, x) = cells[idx as usize];
        let s = scalars(n, k, x);
        let mk = |report: usize, lhs: f64, rhs: f64, slack: f64| EvalResult {
            report,
            n,
            m: 0,
            kbar: k,
            eps: 0.0,
            x,
            p2: 0.0,
            lhs,
            rhs,
            slack,
        };

        // (i) 4x å′²/å < 1.
        let lhs = 4.0 * x * s.ap * s.ap / s.aring;
        out.push(mk(0, lhs, 1.0, 1.0 - lhs));

        // (ii) 2x å″ + å′ < 2(n−1)/(n(n+2)).
        let lhs = 2.0 * x * s.app + s.ap;
        let rhs = 2.0 * (s.n - 1.0) / (s.n * (s.n + 2.0));
        out.push(mk(1, lhs, rhs, rhs - lhs));

        // (iii) weighted excess >= its closed-form floor (strict for x > 0).
        let lhs = weighted_excess_lhs(&s);
        let rhs = weighted_excess_rhs(s.n, k, x);
        out.push(mk(2, lhs, rhs, lhs - rhs));

        // (iv) linear coefficient <= its closed-form cap (strict for x > 0).
        let lhs = linear_coeff(&s);
        let rhs = linear_coeff_bound(s.n, k, x);
        out.push(mk(3, lhs, rhs, linear_coeff_slack(&s)));

        // (v) weighted comparison bound, n >= 8 only.
        if n >= 8 {
            let lhs = x / (s.n - 2.0) * (s.a + s.n * k)
                - s.omega * (s.aring + s.a - s.n * k - x * s.ap);
            let rhs = -2.0 * x * k * (2.0 * s.n * s.n.sqrt() - s.n + 2.0) / (s.n - 2.0)
                + 4.0 * s.n * s.n.sqrt() * (s.n - 8.0) * k * k;
            out.push(mk(4, lhs, rhs, rhs - lhs));
        }
    })
}

/// The scalar master expression
/// `a(å − xå′) − nK̄(å + xå′) + P₂·(2å − x/n + xå′) − (3/2)P₂²`,
/// required to be negative. Evaluated through the stable forms.
fn master_expression(s: &Scalars, p2: f64) -> f64 {
    -weighted_excess_lhs(s) + p2 * linear_coeff(s) - 1.5 * p2 * p2
}

/// Scans the scalar master inequality over `(x, P₂)` per dimension, and the
/// proof-level discriminant condition per `x`. Report ids `lemma_3_2_n{n}`
/// and `lemma_3_2_discriminant_n{n}`.
///
/// Besides the rectangular grid, every `x` also contributes the analytic
/// interior maximizer `P₂* = clamp((2å − x/n + xå′)/3, 0, p2_max)`, so sign
/// changes between grid lines cannot be missed.
pub fn check_lemma_3_2(
    spec: &ScanSpec,
    p2_max: f64,
    p2_points: usize,
    rows: RowPolicy,
) -> LabOutput {
    let mut out = LabOutput { reports: Vec::new(), rows: Vec::new() };
    let p2_points = p2_points.max(2);
    for &n in &spec.n_set {
        if n < 8 {
            continue;
        }
        let scan_id = format!("lemma_3_2_n{n}");
        let disc_id = format!("lemma_3_2_discriminant_n{n}");
        let ids = [scan_id.as_str(), disc_id.as_str()];

        let mut cells: Vec<(f64, f64)> = Vec::new();
        for &k in &spec.kbar_set {
            for x in spec.x_grid(k) {
                cells.push((k, x));
            }
        }
        // Per x: p2_points grid values, the interior maximizer, and (paired
        // with p2 slot 0) one discriminant evaluation.
        let per_cell = (p2_points + 1) as u64;
        let count = cells.len() as u64 * per_cell;

        let result = drive(count, &ids, rows, |idx, buf| {
            let cell = (idx / per_cell) as usize;
            let slot = (idx % per_cell) as usize;
            let (k, x) = cells[cell];
            let s = scalars(n, k, x);
            let p2 = if slot < p2_points {
                p2_max * slot as f64 / (p2_points - 1) as f64
            } else {
                (linear_coeff(&s) / 3.0).clamp(0.0, p2_max)
            };
            let expr = master_expression(&s, p2);
            buf.push(EvalResult {
                report: 0,
                n,
                m: 0,
                kbar: k,
                eps: 0.0,
                x,
                p2,
                lhs: expr,
                rhs: 0.0,
                slack: -expr,
            });
            if slot == 0 {
                // Proof-level sufficient condition: the capped linear
                // coefficient must stay below the discriminant threshold
                // √(6 · floor of the weighted excess).
                let lhs = linear_coeff_bound(s.n, k, x);
                let rhs = (6.0 * weighted_excess_rhs(s.n, k, x)).sqrt();
                buf.push(EvalResult {
                    report: 1,
                    n,
                    m: 0,
                    kbar: k,
                    eps: 0.0,
                    x,
                    p2: 0.0,
                    lhs,
                    rhs,
                    slack: rhs - lhs,
                });
            }
        });
        out = out.merge(result);
    }
    out
}

/// The printed dimensional-constant expression
/// `(1/2 − 4/n)(√(12(1−4/n)) − √(32/n + 16/√n))` whose claimed enclosing
/// windows are checked by [`check_pinching_constants`].
pub fn constant_window_expression(n: u32) -> f64 {
    let nf = n as f64;
    (0.5 - 4.0 / nf)
        * ((12.0 * (1.0 - 4.0 / nf)).sqrt() - (32.0 / nf + 16.0 / nf.sqrt()).sqrt())
}

/// Checks the printed constant windows `(2.31, 2.46)` for `n ∈ 8…100` and
/// `(1.249, 1.787)` for `n ∈ 101…n_hi` — each side as its own report, since
/// the measured expression respects the upper bounds but sits far below the
/// printed lower bounds (it is 0 at `n = 8`).
pub fn check_pinching_constants(n_hi: u32) -> LabOutput {
    let ids = [
        "lemma_3_2_constants_lower_8_100",
        "lemma_3_2_constants_upper_8_100",
        "lemma_3_2_constants_lower_101_up",
        "lemma_3_2_constants_upper_101_up",
    ];
    let count = (n_hi.max(101) - 8 + 1) as u64;
    drive(count, &ids, RowPolicy::None, |idx, buf| {
        let n = 8 + idx as u32;
        let v = constant_window_expression(n);
        let (lo, hi, r0) = if n <= 100 { (2.31, 2.46, 0) } else { (1.249, 1.787, 2) };
        let mk = |report: usize, lhs: f64, rhs: f64, slack: f64| EvalResult {
            report,
            n,
            m: 0,
            kbar: 1.0,
            eps: 0.0,
            x: 0.0,
            p2: 0.0,
            lhs,
            rhs,
            slack,
        };
        buf.push(mk(r0, lo, v, v - lo));
        buf.push(mk(r0 + 1, v, hi, hi - v));
    })
}

// ---------------------------------------------------------------------------
// Matrix lemmas
// ---------------------------------------------------------------------------

/// The frame quantities entering the matrix and reaction inequalities, all
/// computed in the principal normal frame: `h̊` (traceless principal block)
/// and the `A⁻` blocks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MatrixTerms {
    /// `Σ_{β} (tr h̊ A^β)²`.
    pub t45a: f64,
    /// `Σ_{β} |[h̊, A^β]|²` — the mixed normal-curvature part.
    pub n1: f64,
    /// `Σ_{α,β} (tr A^α A^β)²` over the complement blocks.
    pub t46: f64,
    /// `Σ_{α,β} |[A^α, A^β]|²` over the complement blocks.
    pub rhat: f64,
}

pub(crate) fn matrix_terms(h_ring: &DMatrix<f64>, a_minus: &[DMatrix<f64>]) -> MatrixTerms {
    let mut t45a = 0.0;
    let mut n1 = 0.0;
    for b in a_minus {
        let s = h_ring.dot(b);
        t45a += s * s;
        let c = h_ring * b - b * h_ring;
        n1 += c.iter().map(|v| v * v).sum::<f64>();
    }
    let mut t46 = 0.0;
    let mut rhat = 0.0;
    for (i, a) in a_minus.iter().enumerate() {
        let s = a.dot(a);
        t46 += s * s;
        for b in a_minus.iter().skip(i + 1) {
            let s = a.dot(b);
            t46 += 2.0 * s * s;
            let c = a * b - b * a;
            rhat += 2.0 * c.iter().map(|v| v * v).sum::<f64>();
        }
    }
    MatrixTerms { t45a, n1, t46, rhat }
}

fn random_traceless_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let normal = StandardNormal;
    let g = DMatrix::from_fn(n, n, |_, _| normal.sample(rng));
    let gt = g.transpose();
    let mut m = (g + gt) * 0.5;
    let shift = m.trace() / n as f64;
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    m
}

/// Draws `h̊` with `|h̊|² = u` and `m − 1` complement blocks with joint norm
/// `|A⁻|² = v`.
fn sample_frame(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    u: f64,
    v: f64,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let mut h_ring = random_traceless_sym(rng, n);
    let hn = h_ring.iter().map(|x| x * x).sum::<f64>().sqrt();
    if hn > 0.0 {
        h_ring *= u.sqrt() / hn;
    }
    let mut blocks: Vec<DMatrix<f64>> =
        (0..m.saturating_sub(1)).map(|_| random_traceless_sym(rng, n)).collect();
    let joint = blocks.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
    if joint > 0.0 {
        let f = v.sqrt() / joint;
        for b in &mut blocks {
            *b *= f;
        }
    }
    (h_ring, blocks)
}

fn per_sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Certifies the pointwise matrix inequalities bounding the mixed and pure
/// complement reaction terms by `2|h̊|²|A⁻|²` and `(3/2)|A⁻|⁴`. Report ids
/// `lemma_4_1_eq_4_5`, `_4_6`, `_4_9` (the curvature-free algebraic core),
/// and `lemma_4_2_eq_4_10` (the sum).
///
/// Sampling is scale-mixed (`|h̊|²`, `|A⁻|²` log-uniform over four decades);
/// with `rbar > 0` the weak sides gain envelope scalars drawn from
/// `[0, rbar]`, exercising the general ambient form.
pub fn check_matrix_lemma_4_1(
    dims: &[(u32, u32)],
    samples: u64,
    seed: u64,
    rbar: f64,
    rows: RowPolicy,
) -> LabOutput {
    let ids = ["lemma_4_1_eq_4_5", "lemma_4_1_eq_4_6", "lemma_4_1_eq_4_9", "lemma_4_2_eq_4_10"];
    let dims = dims.to_vec();
    let count = dims.len() as u64 * samples;

    drive(count, &ids, rows, move |idx, buf| {
        let (n, m) = dims[(idx / samples) as usize];
        let mut rng = per_sample_rng(seed, idx);
        let u = 10f64.powf(rng.random::<f64>() * 4.0 - 2.0);
        let v = 10f64.powf(rng.random::<f64>() * 4.0 - 2.0);
        let (h_ring, blocks) = sample_frame(&mut rng, n as usize, m as usize, u, v);
        let t = matrix_terms(&h_ring, &blocks);
        let (rb1, rb2) = if rbar > 0.0 {
            (rng.random::<f64>() * rbar, rng.random::<f64>() * rbar)
        } else {
            (0.0, 0.0)
        };
        let add5 = rb1 * rb1 + 4.0 * rb1 * u.sqrt() * v.sqrt();
        let add6 = rb2 * rb2 + 4.0 * rb2 * v;

        let mk = |report: usize, lhs: f64, rhs: f64| EvalResult {
            report,
            n,
            m,
            kbar: 0.0,
            eps: 0.0,
            x: 0.0,
            p2: v,
            lhs,
            rhs,
            slack: rhs - lhs,
        };
        buf.push(mk(0, t.t45a + t.n1, 2.0 * u * v + add5));
        buf.push(mk(1, t.t46 + t.rhat, 1.5 * v * v + add6));
        buf.push(mk(2, t.t46 + t.rhat, 1.5 * v * v));
        buf.push(mk(3, t.t45a + t.n1 + t.t46 + t.rhat, 2.0 * u * v + 1.5 * v * v + add5 + add6));
    })
}

// ---------------------------------------------------------------------------
// Reaction lemmas and decay chain (pinched tensor sampling)
// ---------------------------------------------------------------------------

/// One pinched configuration with every contraction the reaction and decay
/// inequalities consume.
#[derive(Debug, Clone, Copy)]
struct PinchedTerms {
    x: f64,
    u: f64,
    v: f64,
    f: f64,
    t45a: f64,
    n1: f64,
    t46: f64,
    rhat: f64,
}

impl PinchedTerms {
    /// `Σ_{α,β over all normal directions} (tr A^α A^β)²` in the principal
    /// frame: `|h|⁴ + 2·T₄₅ₐ + T₄₆`.
    fn saa(&self, n: f64) -> f64 {
        let h2n = self.u + self.x / n;
        h2n * h2n + 2.0 * self.t45a + self.t46
    }

    /// Full normal-curvature norm `|R̂⊥|² + 2 Σ|R⊥(ν₁)|²`.
    fn full_perp(&self) -> f64 {
        self.rhat + 2.0 * self.n1
    }

    /// `R₁ = Σ(tr A A)² + |R⊥|²` and `R₂ = |h|²|H|²`.
    fn r1(&self, n: f64) -> f64 {
        self.saa(n) + self.full_perp()
    }

    fn r2(&self, n: f64) -> f64 {
        (self.u + self.x / n) * self.x
    }
}

/// Draws a strictly pinched configuration at curvature level `x`, splitting
/// a random fraction of the traceless budget between `|h̊|²` and `|A⁻|²`.
/// Half the draws push the budget fraction toward saturation
/// (`θ = 1 − 10^{−U(0,8)}`) to probe the `f → 0` boundary.
fn sample_pinched_terms(
    profile: &PinchingProfile,
    rng: &mut ChaCha8Rng,
    x: f64,
) -> PinchedTerms {
    let n = profile.n() as usize;
    let m = profile.m() as usize;
    let nf = n as f64;
    let s = scalars(profile.n(), profile.kbar(), x);
    let budget = s.a - x / nf - profile.eps() * s.omega;
    let theta = if rng.random::<f64>() < 0.5 {
        rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12)
    } else {
        1.0 - 10f64.powf(-(rng.random::<f64>() * 8.0))
    };
    let total = theta * budget;
    let lambda = rng.random::<f64>();
    let (u, v) = if m >= 2 { (lambda * total, (1.0 - lambda) * total) } else { (total, 0.0) };
    let (h_ring, blocks) = sample_frame(rng, n, m, u, v);
    let t = matrix_terms(&h_ring, &blocks);
    PinchedTerms { x, u, v, f: (1.0 - theta) * budget, t45a: t.t45a, n1: t.n1, t46: t.t46, rhat: t.rhat }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo * (hi / lo).powf(rng.random::<f64>())
}

/// Maps exact-zero slack of a non-strict inequality to the smallest positive
/// float, so boundary equality (a valid pass for `<=` statements) satisfies
/// the report invariant `violations = 0 ⟺ min_slack > 0`.
fn nonstrict(slack: f64) -> f64 {
    if slack == 0.0 { f64::MIN_POSITIVE } else { slack }
}

/// Certifies the pinching-gap reaction bounds on the high-curvature regime
/// `|H|² ∈ [h2_threshold, h2_max]`: the strict lower bound for the gap's
/// reaction terms (`lemma_4_3_eq_4_12`), the interpolated upper bound for
/// the complement reaction terms at weight `δ` (`lemma_4_4_eq_4_14`), and
/// the two non-strict coefficient conditions the latter's proof needs
/// (`lemma_4_4_coefficients`, evaluated at the configured `δ`, `c_n`).
pub fn check_reaction_lemmas(
    profile: &PinchingProfile,
    params: &LemmaParams,
    samples: u64,
    seed: u64,
    rows: RowPolicy,
) -> LabOutput {
    let ids = ["lemma_4_3_eq_4_12", "lemma_4_4_eq_4_14", "lemma_4_4_coefficients"];
    let profile = *profile;
    let params = *params;
    let nf = profile.n() as f64;
    let k = profile.kbar();
    let cn = params.c_n;
    let ncn1 = nf * cn - 1.0;
    let delta = params.delta;

    drive(samples + 1, &ids, rows, move |idx, buf| {
        if idx == samples {
            // The two scalar coefficient conditions (non-strict).
            let c1 = 1.5 - 2.0 * (1.0 - delta) / ncn1;
            let c2 = 2.0 - nf * cn * (1.0 - delta) / ncn1;
            for (c, which) in [(c1, 0.0), (c2, 1.0)] {
                buf.push(EvalResult {
                    report: 2,
                    n: profile.n(),
                    m: profile.m(),
                    kbar: k,
                    eps: profile.eps(),
                    x: which,
                    p2: 0.0,
                    lhs: c,
                    rhs: 0.0,
                    slack: nonstrict(-c),
                });
            }
            return;
        }
        let mut rng = per_sample_rng(seed, idx);
        let x = log_uniform(&mut rng, params.h2_threshold.max(1e-12), params.h2_max);
        let t = sample_pinched_terms(&profile, &mut rng, x);
        let s = scalars(profile.n(), k, x);
        let (u, v, f) = (t.u, t.v, t.f);
        let sq = nf.sqrt();
        let inner = (1.0 / nf + s.ap) * t.r2(nf) - t.saa(nf) - t.full_perp();

        // Envelope scalars for the general ambient form (all on the weak
        // side; zero in a space form).
        let (rb1, rb2) = if params.rbar > 0.0 {
            (rng.random::<f64>() * params.rbar, rng.random::<f64>() * params.rbar)
        } else {
            (0.0, 0.0)
        };
        let ambient = rb2 * rb2 + 4.0 * rb2 * v + 2.0 * rb1 * rb1 + 8.0 * rb1 * u.sqrt() * v.sqrt();

        // Strict lower bound for the gap reaction terms.
        let lhs12 = (v / f) * inner;
        let rhs12 = -(v / f)
            * (ambient + 2.0 * sq * k * (v + 2.0 * f) / ncn1 + (nf * cn / ncn1) * 2.0 * sq * k * u)
            + (2.0 / ncn1) * v * v
            + (nf * cn / ncn1) * u * v;
        buf.push(EvalResult {
            report: 0,
            n: profile.n(),
            m: profile.m(),
            kbar: k,
            eps: profile.eps(),
            x,
            p2: v,
            lhs: rhs12,
            rhs: lhs12,
            slack: lhs12 - rhs12,
        });

        // Interpolated upper bound for the complement reaction terms.
        let lhs14 = t.t46 + t.rhat + t.n1;
        let rhs14 = (1.0 - delta) * (v / f) * inner
            + (1.0 - delta)
                * (v / f)
                * (ambient
                    + 2.0 * sq * k * (v + 2.0 * f) / ncn1
                    + (nf * cn / ncn1) * 2.0 * sq * k * u);
        buf.push(EvalResult {
            report: 1,
            n: profile.n(),
            m: profile.m(),
            kbar: k,
            eps: profile.eps(),
            x,
            p2: v,
            lhs: lhs14,
            rhs: rhs14,
            slack: rhs14 - lhs14,
        });
    })
}

// ---------------------------------------------------------------------------
// Gradient-term coefficient bookkeeping (exact rational arithmetic)
// ---------------------------------------------------------------------------

/// `delta_max(n) = (n³ − 11n² + 24n + 4)/(n³ − 7n² + 8n + 4)` as an exact
/// fraction (numerator, denominator).
pub fn delta_max_fraction(n: i128) -> (i128, i128) {
    (n * n * n - 11 * n * n + 24 * n + 4, n * n * n - 7 * n * n + 8 * n + 4)
}

/// The δ-ordering bound `(3n² − 5n − 10)/(2(n−2)(n+2))` as an exact fraction.
pub fn delta_bound_fraction(n: i128) -> (i128, i128) {
    (3 * n * n - 5 * n - 10, 2 * (n - 2) * (n + 2))
}

/// Verifies the gradient-term coefficient bookkeeping for `n ∈ 6…n_hi`:
///
/// * `lemma_74_8_young_equivalence` — with the standard Young constants the
///   coefficient inequality holds iff `δ ≤ delta_max(n)`. Checked two ways
///   per `n`: the boundary identity `n³−7n²+8n+4 = (n−2)(n²−5n−2)` exactly in
///   integers, and a numeric bracket just below/above `delta_max`.
/// * `lemma_74_9_delta_ordering` — `delta_max(n) ≤ (3n²−5n−10)/(2(n−2)(n+2))`
///   strictly for every `n ≥ 6` (exact cross-multiplied integers).
/// * `lemma_74_9_delta_ordering_below_range` — the ordering reverses at
///   `n = 5`, as the theory predicts; the report passes when the reversal is
///   present.
pub fn check_gradient_lemmas(n_hi: u32) -> LabOutput {
    let ids = [
        "lemma_74_8_young_equivalence",
        "lemma_74_9_delta_ordering",
        "lemma_74_9_delta_ordering_below_range",
    ];
    let n_hi = n_hi.max(8);
    let count = (n_hi - 6 + 1) as u64 + 1;

    drive(count, &ids, RowPolicy::None, move |idx, buf| {
        if idx == count - 1 {
            // n = 5: ordering must fail.
            let (an, ad) = delta_max_fraction(5);
            let (bn, bd) = delta_bound_fraction(5);
            // delta_max(5) = 13/3 (both parts negative); bound = 40/42.
            let lhs = an as f64 / ad as f64;
            let rhs = bn as f64 / bd as f64;
            buf.push(EvalResult {
                report: 2,
                n: 5,
                m: 0,
                kbar: 1.0,
                eps: 0.0,
                x: 0.0,
                p2: 0.0,
                lhs,
                rhs,
                slack: lhs - rhs,
            });
            return;
        }
        let n = 6 + idx as u32;
        let ni = n as i128;
        let nf = n as f64;

        // Boundary identity of the Young bookkeeping (exact).
        let (dm_num, dm_den) = delta_max_fraction(ni);
        let identity_holds = dm_den == (ni - 2) * (ni * ni - 5 * ni - 2);

        // Numeric bracket around delta_max: the coefficient inequality
        // lhs <= (1 − δ)(n+2)/(n−1) flips exactly there.
        let a2 = 2.0 * (nf + 2.0) / ((nf - 1.0) * (nf - 2.0));
        let a3 = 2.0 * (nf + 2.0) / ((nf - 1.0) * (nf - 2.0) - 2.0 * (nf + 2.0));
        let lhs = 2.0 * a2 + 2.0 * a3 * (nf + 2.0) / ((nf - 1.0) * (nf - 2.0));
        let rhs_at = |delta: f64| (1.0 - delta) * (nf + 2.0) / (nf - 1.0);
        let dm = dm_num as f64 / dm_den as f64;
        let h = 1e-6 * dm.abs().max(1.0);
        let below_ok = rhs_at(dm - h) - lhs; // > 0: inequality holds below
        let above_ok = lhs - rhs_at(dm + h); // > 0: inequality fails above
        let bracket = below_ok.min(above_ok);
        buf.push(EvalResult {
            report: 0,
            n,
            m: 0,
            kbar: 1.0,
            eps: 0.0,
            x: dm,
            p2: 0.0,
            lhs,
            rhs: rhs_at(dm),
            slack: if identity_holds { bracket } else { -1.0 },
        });

        // Strict ordering delta_max(n) < bound(n), exact in integers.
        let (bn, bd) = delta_bound_fraction(ni);
        // Both denominators positive for n >= 6.
        debug_assert!(dm_den > 0 && bd > 0);
        let diff = bn * dm_den - dm_num * bd; // > 0 means strict ordering
        buf.push(EvalResult {
            report: 1,
            n,
            m: 0,
            kbar: 1.0,
            eps: 0.0,
            x: 0.0,
            p2: 0.0,
            lhs: dm_num as f64 / dm_den as f64,
            rhs: bn as f64 / bd as f64,
            slack: diff as f64 / (dm_den * bd) as f64,
        });
    })
}

// ---------------------------------------------------------------------------
// Decay chain
// ---------------------------------------------------------------------------

/// Certifies the reaction-level decay chain:
///
/// * `decay_i` — the traceless reaction terms are bounded by `2q·b` with
///   `q = |Å|²/2`, over the full curvature range including `|H| = 0`.
/// * `decay_ii_high_h` — the gap reaction terms are bounded by `2Q·B`
///   (`Q = −f/2`) on the high-curvature regime `|H|² ≥ h2_threshold`.
/// * `decay_iii` — the drift bound `2(b − B) ≤ −4√n·K̄(1 − 2εn)`; the two
///   rate bundles differ by exactly `−nK̄(1 + (2/√n)(1 − 2εn))`, leaving
///   slack `2nK̄` on every sample.
/// * `decay_ii_low_h_diagnostic` (only with `include_low_h_diagnostic`) —
///   the same `2Q·B` bound sampled at `|H|² ∈ [0, K̄]`. This bound is
///   *measurably false* at low curvature; the report documents the
///   counterexamples and is intended as diagnostic evidence, not a
///   certification.
pub fn check_decay_chain(
    profile: &PinchingProfile,
    params: &LemmaParams,
    samples: u64,
    seed: u64,
    include_low_h_diagnostic: bool,
    rows: RowPolicy,
) -> LabOutput {
    let mut ids = vec!["decay_i", "decay_ii_high_h", "decay_iii"];
    if include_low_h_diagnostic {
        ids.push("decay_ii_low_h_diagnostic");
    }
    let profile = *profile;
    let params = *params;
    let nf = profile.n() as f64;
    let k = profile.kbar();
    let eps = profile.eps();
    let sq = nf.sqrt();

    let rates = move |t: &PinchedTerms| -> (f64, f64) {
        let b = t.u + (nf - 2.0) / (2.0 - eps * nf) * t.v + t.x / nf - nf * k;
        let cap_b = b + nf * k + (2.0 / sq) * (1.0 - 2.0 * eps * nf) * nf * k;
        (b, cap_b)
    };

    drive(samples, &ids, rows, move |idx, buf| {
        let mut rng = per_sample_rng(seed, idx);

        // Full-range sample (x = 0 every eighth draw) for items i and iii.
        let x_full =
            if idx % 8 == 0 { 0.0 } else { log_uniform(&mut rng, 1e-6 * k, params.h2_max) };
        let t = sample_pinched_terms(&profile, &mut rng, x_full);
        let s = scalars(profile.n(), k, x_full);
        let (b, cap_b) = rates(&t);
        let q = (t.u + t.v) / 2.0;
        let reaction_q = t.r1(nf) - t.r2(nf) / nf - nf * k * (t.u + t.v);
        let mk = |report: usize, x: f64, p2: f64, lhs: f64, rhs: f64| EvalResult {
            report,
            n: profile.n(),
            m: profile.m(),
            kbar: k,
            eps,
            x,
            p2,
            lhs,
            rhs,
            slack: rhs - lhs,
        };
        buf.push(mk(0, x_full, t.v, reaction_q, 2.0 * q * b));
        buf.push(mk(2, x_full, t.v, 2.0 * (b - cap_b), -4.0 * sq * k * (1.0 - 2.0 * eps * nf)));

        // High-curvature sample for item ii.
        let x_hi = log_uniform(&mut rng, params.h2_threshold.max(1e-12), params.h2_max);
        let t = sample_pinched_terms(&profile, &mut rng, x_hi);
        let sc = scalars(profile.n(), k, x_hi);
        let (_, cap_b) = rates(&t);
        let reaction_cap =
            t.r1(nf) - (1.0 / nf + sc.ap) * t.r2(nf) - nf * k * (t.u + t.v + x_hi / nf);
        buf.push(mk(1, x_hi, t.v, reaction_cap, 2.0 * (-t.f / 2.0) * cap_b));

        if include_low_h_diagnostic {
            let x_lo = if idx % 4 == 0 { 0.0 } else { rng.random::<f64>() * k };
            let t = sample_pinched_terms(&profile, &mut rng, x_lo);
            let sl = scalars(profile.n(), k, x_lo);
            let (_, cap_b) = rates(&t);
            let reaction_cap =
                t.r1(nf) - (1.0 / nf + sl.ap) * t.r2(nf) - nf * k * (t.u + t.v + x_lo / nf);
            buf.push(mk(3, x_lo, t.v, reaction_cap, 2.0 * (-t.f / 2.0) * cap_b));
        }
        let _ = s;
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn stable_forms_match_direct_evaluation_at_moderate_x() {
        for n in [5u32, 8, 16, 32] {
            for k in [0.25, 1.0, 4.0] {
                for x in [0.1, 1.0, 10.0, 100.0] {
                    let s = scalars(n, k, x);
                    assert_relative_eq!(
                        weighted_excess_lhs(&s),
                        weighted_excess_lhs_direct(&s),
                        max_relative = 1e-9
                    );
                    let direct = linear_coeff_bound(s.n, k, x) - linear_coeff(&s);
                    assert_relative_eq!(linear_coeff_slack(&s), direct, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn weighted_excess_floor_is_an_equality_at_zero() {
        for n in [5u32, 8, 16, 64] {
            for k in [0.25, 1.0, 4.0] {
                let s = scalars(n, k, 0.0);
                let lhs = weighted_excess_lhs(&s);
                let rhs = weighted_excess_rhs(s.n, k, 0.0);
                assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
                // Closed-form value 2n(n−4)K̄²/(2 + √n).
                let nf = n as f64;
                assert_relative_eq!(
                    lhs,
                    2.0 * nf * (nf - 4.0) * k * k / (2.0 + nf.sqrt()),
                    max_relative = 1e-13
                );
                assert_eq!(linear_coeff_slack(&s), 0.0);
                // ...and the cap itself is 4√n·K̄ there.
                assert_relative_eq!(
                    linear_coeff_bound(s.n, k, 0.0),
                    4.0 * nf.sqrt() * k,
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn scalar_lemma_scan_passes_on_a_smoke_grid() {
        let out = check_lemma_3_1(&ScanSpec::smoke(), RowPolicy::None);
        assert_eq!(out.reports.len(), 5);
        for r in &out.reports {
            assert!(r.passed(), "{} min_slack {}", r.lemma_id, r.min_slack);
            assert!(r.min_slack > 0.0);
        }
    }

    #[test]
    fn master_inequality_fails_small_n_holds_large_n() {
        let spec = ScanSpec {
            x_max: 1e6,
            grid_points: 500,
            refine_near_zero: false,
            n_set: vec![8, 10, 12, 16, 32],
            kbar_set: vec![1.0],
        };
        let out = check_lemma_3_2(&spec, 1e3, 200, RowPolicy::None);
        let find = |id: &str| out.reports.iter().find(|r| r.lemma_id == id).unwrap();
        for n in [8u32, 10, 12] {
            assert!(find(&format!("lemma_3_2_n{n}")).violations > 0, "n={n} should fail");
            assert!(find(&format!("lemma_3_2_discriminant_n{n}")).violations > 0);
        }
        for n in [16u32, 32] {
            let r = find(&format!("lemma_3_2_n{n}"));
            assert!(r.passed(), "n={n} min_slack {}", r.min_slack);
            assert!(find(&format!("lemma_3_2_discriminant_n{n}")).passed());
        }
    }

    #[test]
    fn master_inequality_counterexample_rows_are_emitted() {
        let spec = ScanSpec {
            x_max: 1e6,
            grid_points: 200,
            refine_near_zero: false,
            n_set: vec![8],
            kbar_set: vec![1.0],
        };
        let out = check_lemma_3_2(&spec, 1e3, 100, RowPolicy::Violations);
        assert!(!out.rows.is_empty());
        assert!(out.rows.iter().all(|r| !r.pass));
        // Both the scan and its discriminant condition produce evidence.
        assert!(out.rows.iter().any(|r| r.lemma_id == "lemma_3_2_n8"));
        assert!(out.rows.iter().any(|r| r.lemma_id == "lemma_3_2_discriminant_n8"));
        // Rows carry reproducible evidence: re-evaluating one reproduces it.
        let row = out.rows.iter().find(|r| r.lemma_id == "lemma_3_2_n8").unwrap();
        let s = scalars(row.n, row.kbar, row.x);
        assert_relative_eq!(master_expression(&s, row.p2), row.lhs, max_relative = 1e-12);
    }

    #[test]
    fn constant_windows_fail_below_and_hold_above() {
        let out = check_pinching_constants(10_000);
        let find = |id: &str| out.reports.iter().find(|r| r.lemma_id == id).unwrap();
        // Expression is 0 at n = 8, far below the printed 2.31.
        assert_abs_diff_eq!(constant_window_expression(8), 0.0, epsilon = 1e-12);
        assert!(find("lemma_3_2_constants_lower_8_100").violations > 0);
        assert!(find("lemma_3_2_constants_lower_101_up").violations > 0);
        assert!(find("lemma_3_2_constants_upper_8_100").passed());
        assert!(find("lemma_3_2_constants_upper_101_up").passed());
    }

    #[test]
    fn matrix_terms_match_bruteforce_loops() {
        let mut rng = per_sample_rng(77, 0);
        for (n, m) in [(3usize, 2usize), (4, 3), (2, 3)] {
            let (h, blocks) = sample_frame(&mut rng, n, m, 1.3, 0.7);
            let t = matrix_terms(&h, &blocks);
            // Independent index-loop evaluation.
            let mut t45a = 0.0;
            let mut n1 = 0.0;
            for b in &blocks {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += h[(i, j)] * b[(i, j)];
                    }
                }
                t45a += s * s;
                for i in 0..n {
                    for j in 0..n {
                        let mut c = 0.0;
                        for p in 0..n {
                            c += h[(i, p)] * b[(p, j)] - b[(i, p)] * h[(p, j)];
                        }
                        n1 += c * c;
                    }
                }
            }
            let mut t46 = 0.0;
            let mut rhat = 0.0;
            for a in &blocks {
                for b in &blocks {
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            s += a[(i, j)] * b[(i, j)];
                        }
                    }
                    t46 += s * s;
                    for i in 0..n {
                        for j in 0..n {
                            let mut c = 0.0;
                            for p in 0..n {
                                c += a[(i, p)] * b[(p, j)] - b[(i, p)] * a[(p, j)];
                            }
                            rhat += c * c;
                        }
                    }
                }
            }
            assert_relative_eq!(t.t45a, t45a, max_relative = 1e-10);
            assert_relative_eq!(t.n1, n1, max_relative = 1e-10);
            assert_relative_eq!(t.t46, t46, max_relative = 1e-10);
            if m > 1 {
                assert_relative_eq!(t.rhat + 1.0, rhat + 1.0, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn matrix_lemmas_have_zero_violations() {
        let out =
            check_matrix_lemma_4_1(&[(8, 2), (12, 3), (16, 5)], 2000, 7, 0.0, RowPolicy::None);
        assert_eq!(out.reports.len(), 4);
        for r in &out.reports {
            assert!(r.passed(), "{}: min_slack {}", r.lemma_id, r.min_slack);
            assert_eq!(r.samples, 6000);
        }
    }

    #[test]
    fn matrix_lemmas_with_ambient_envelope_still_pass() {
        let out = check_matrix_lemma_4_1(&[(8, 3)], 1000, 11, 0.5, RowPolicy::None);
        for r in &out.reports {
            assert!(r.passed(), "{}", r.lemma_id);
        }
    }

    #[test]
    fn single_complement_block_saturates_three_halves() {
        // With m = 2 there is one complement block: the pure-complement bound
        // reduces to |A⁻|⁴ ≤ (3/2)|A⁻|⁴, slack exactly v²/2.
        let mut rng = per_sample_rng(3, 5);
        let (_, blocks) = sample_frame(&mut rng, 6, 2, 0.0, 2.0);
        let t = matrix_terms(&DMatrix::zeros(6, 6), &blocks);
        assert_relative_eq!(t.t46, 4.0, max_relative = 1e-12);
        assert_eq!(t.rhat, 0.0);
    }

    #[test]
    fn reaction_lemmas_pass_in_the_high_curvature_regime() {
        let profile = PinchingProfile::with_default_eps(8, 3, 1.0).unwrap();
        let params = LemmaParams::for_profile(&profile);
        params.validate(8).unwrap();
        let out = check_reaction_lemmas(&profile, &params, 2000, 13, RowPolicy::None);
        for r in &out.reports {
            assert!(r.passed(), "{}: min_slack {}", r.lemma_id, r.min_slack);
        }
        // At n = 8, δ = 1/2, c_n = 1/6 the second coefficient condition is an
        // exact boundary equality; it must register as a (non-strict) pass.
        let coeff = out.reports.iter().find(|r| r.lemma_id == "lemma_4_4_coefficients").unwrap();
        assert_eq!(coeff.samples, 2);
        assert_eq!(coeff.violations, 0);
    }

    #[test]
    fn reaction_lemmas_hold_even_below_the_threshold() {
        // The threshold is conservative: the bounds hold over the whole
        // pinched range, including |H|² near zero.
        let profile = PinchingProfile::with_default_eps(8, 3, 1.0).unwrap();
        let mut params = LemmaParams::for_profile(&profile);
        params.h2_threshold = 1e-9;
        params.h2_max = 10.0;
        let out = check_reaction_lemmas(&profile, &params, 2000, 17, RowPolicy::None);
        for r in &out.reports {
            assert!(r.passed(), "{}: min_slack {}", r.lemma_id, r.min_slack);
        }
    }

    #[test]
    fn gradient_bookkeeping_spot_values() {
        let (num, den) = delta_max_fraction(8);
        assert_eq!((num, den), (4, 132));
        assert_eq!(num * 33, den); // delta_max(8) == 1/33 exactly

        let out = check_gradient_lemmas(128);
        assert_eq!(out.reports.len(), 3);
        for r in &out.reports {
            assert!(r.passed(), "{}: min_slack {}", r.lemma_id, r.min_slack);
        }
    }

    #[test]
    fn decay_chain_passes_with_high_curvature_cap_bound() {
        let profile = PinchingProfile::with_default_eps(8, 3, 1.0).unwrap();
        let params = LemmaParams::for_profile(&profile);
        let out = check_decay_chain(&profile, &params, 2000, 19, false, RowPolicy::None);
        assert_eq!(out.reports.len(), 3);
        for r in &out.reports {
            assert!(r.passed(), "{}: min_slack {}", r.lemma_id, r.min_slack);
        }
        // Item iii is an identity with slack exactly 2nK̄.
        let r = out.reports.iter().find(|r| r.lemma_id == "decay_iii").unwrap();
        assert_relative_eq!(r.min_slack, 16.0, max_relative = 1e-9);
    }

    #[test]
    fn decay_low_curvature_bound_is_measurably_false() {
        let profile = PinchingProfile::with_default_eps(8, 3, 1.0).unwrap();
        let params = LemmaParams::for_profile(&profile);
        let out = check_decay_chain(&profile, &params, 2000, 23, true, RowPolicy::None);
        let diag =
            out.reports.iter().find(|r| r.lemma_id == "decay_ii_low_h_diagnostic").unwrap();
        assert!(diag.violations > 0, "the low-|H| cap bound should fail");
        assert!(diag.min_slack < 0.0);
        // ...while the certified reports still pass.
        for r in out.reports.iter().filter(|r| r.lemma_id != "decay_ii_low_h_diagnostic") {
            assert!(r.passed(), "{}", r.lemma_id);
        }
    }

    #[test]
    fn reports_are_deterministic_across_thread_counts() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let profile = PinchingProfile::with_default_eps(8, 3, 1.0).unwrap();
                let params = LemmaParams::for_profile(&profile);
                let out = check_reaction_lemmas(&profile, &params, 1500, 29, RowPolicy::None)
                    .merge(check_matrix_lemma_4_1(&[(8, 3)], 1500, 29, 0.0, RowPolicy::None));
                serde_json::to_string(&out.reports).unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
    }

    #[test]
    fn serial_row_path_agrees_with_parallel_reports() {
        let out_par = check_matrix_lemma_4_1(&[(8, 2)], 500, 31, 0.0, RowPolicy::None);
        let out_ser = check_matrix_lemma_4_1(&[(8, 2)], 500, 31, 0.0, RowPolicy::All);
        assert_eq!(
            serde_json::to_string(&out_par.reports).unwrap(),
            serde_json::to_string(&out_ser.reports).unwrap()
        );
        assert_eq!(out_ser.rows.len(), 500 * 4);
        assert!(out_ser.rows.iter().all(|r| r.pass));
    }

    #[test]
    fn worst_case_reproduces_min_slack() {
        let out = check_matrix_lemma_4_1(&[(8, 3)], 1000, 37, 0.0, RowPolicy::None);
        for r in &out.reports {
            let w = &r.worst_case;
            assert_eq!(w["n"], 8);
            assert_relative_eq!(
                w["slack"].as_f64().unwrap(),
                r.min_slack,
                max_relative = 1e-12
            );
        }
    }
}
