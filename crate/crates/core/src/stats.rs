//! One-sided two-sample location tests and the group-resampling
//! verification curve.
//!
//! The verification procedure splits instances into groups, pools each
//! group's sample sets and tests whether the correct side has the larger
//! mean. The fraction of groups that verify, averaged over repeated random
//! splits, traces how evidence accumulates with group size.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisSets;
use crate::seeding::{derive_seed, STREAM_GRID, STREAM_SPLIT};

/// Equal-variance (pooled) or unequal-variance two-sample statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TTestKind {
    #[default]
    Welch,
    Student,
}

impl TTestKind {
    pub fn name(self) -> &'static str {
        match self {
            TTestKind::Welch => "welch",
            TTestKind::Student => "student",
        }
    }
}

impl std::str::FromStr for TTestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "welch" => Ok(TTestKind::Welch),
            "student" => Ok(TTestKind::Student),
            other => Err(Error::UnknownName {
                what: "t-test kind",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    NotVerified,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Verified => "verified",
            Verdict::NotVerified => "not_verified",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of a one-sided comparison of the correct side against the
/// incorrect side.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    /// t statistic; +/- infinity for degenerate perfect separation.
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for "correct mean exceeds incorrect mean".
    pub p: f64,
    pub verdict: Verdict,
    pub n_correct: usize,
    pub n_incorrect: usize,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} is outside (0, 1)"
        )));
    }
    Ok(())
}

fn mean_and_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn t_cdf(x: f64, df: f64) -> f64 {
    // statrs evaluates both tails through one regularized incomplete beta
    // call, so cdf(t) and cdf(-t) are exact floating-point complements.
    StudentsT::new(0.0, 1.0, df)
        .expect("degrees of freedom are positive here")
        .cdf(x)
}

/// Upper-tail probability of the Student-t distribution.
pub fn student_t_upper_tail(t: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom {df} must be positive"
        )));
    }
    Ok(1.0 - t_cdf(t, df))
}

/// One-sided Welch test of mean(correct) > mean(incorrect).
pub fn one_sided_t_test(correct: &[f64], incorrect: &[f64], alpha: f64) -> Result<TestResult> {
    one_sided_t_test_with(correct, incorrect, alpha, TTestKind::Welch)
}

/// One-sided test with an explicit statistic kind.
///
/// Degenerate inputs do not error: fewer than two samples on either side
/// is inconclusive with p = 1; two zero-variance samples decide by mean
/// order alone (p = 0 when separated the right way, otherwise p = 1, with
/// equal means inconclusive).
pub fn one_sided_t_test_with(
    correct: &[f64],
    incorrect: &[f64],
    alpha: f64,
    kind: TTestKind,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let n_correct = correct.len();
    let n_incorrect = incorrect.len();

    if n_correct < 2 || n_incorrect < 2 {
        return Ok(TestResult {
            t: 0.0,
            df: 1.0,
            p: 1.0,
            verdict: Verdict::Inconclusive,
            n_correct,
            n_incorrect,
        });
    }

    let nc = n_correct as f64;
    let ni = n_incorrect as f64;
    // Constant samples must take the degenerate path even when two-pass
    // summation rounds their variance to a nonzero speck.
    let const_correct = correct.iter().all(|&v| v == correct[0]);
    let const_incorrect = incorrect.iter().all(|&v| v == incorrect[0]);
    let (mc, vc) = if const_correct {
        (correct[0], 0.0)
    } else {
        mean_and_var(correct)
    };
    let (mi, vi) = if const_incorrect {
        (incorrect[0], 0.0)
    } else {
        mean_and_var(incorrect)
    };

    if vc == 0.0 && vi == 0.0 {
        let df = (n_correct + n_incorrect - 2) as f64;
        let (t, p, verdict) = if mc > mi {
            (f64::INFINITY, 0.0, Verdict::Verified)
        } else if mc == mi {
            (0.0, 1.0, Verdict::Inconclusive)
        } else {
            (f64::NEG_INFINITY, 1.0, Verdict::NotVerified)
        };
        return Ok(TestResult {
            t,
            df,
            p,
            verdict,
            n_correct,
            n_incorrect,
        });
    }

    let (t, df) = match kind {
        TTestKind::Welch => {
            let a = vc / nc;
            let b = vi / ni;
            let t = (mc - mi) / (a + b).sqrt();
            let df = (a + b) * (a + b) / (a * a / (nc - 1.0) + b * b / (ni - 1.0));
            (t, df)
        }
        TTestKind::Student => {
            let df = nc + ni - 2.0;
            let sp2 = ((nc - 1.0) * vc + (ni - 1.0) * vi) / df;
            let t = (mc - mi) / (sp2 * (1.0 / nc + 1.0 / ni)).sqrt();
            (t, df)
        }
    };
    let p = 1.0 - t_cdf(t, df);
    let verdict = if p <= alpha {
        Verdict::Verified
    } else {
        Verdict::NotVerified
    };

    Ok(TestResult {
        t,
        df,
        p,
        verdict,
        n_correct,
        n_incorrect,
    })
}

/// Difference of side means, mean(correct) - mean(incorrect).
pub fn mean_difference(sets: &HypothesisSets) -> Result<f64> {
    if sets.correct.is_empty() {
        return Err(Error::EmptySide { side: "correct" });
    }
    if sets.incorrect.is_empty() {
        return Err(Error::EmptySide { side: "incorrect" });
    }
    let mc = sets.correct.iter().sum::<f64>() / sets.correct.len() as f64;
    let mi = sets.incorrect.iter().sum::<f64>() / sets.incorrect.len() as f64;
    Ok(mc - mi)
}

/// Verification rate at one group count.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoPoint {
    pub n_groups: usize,
    /// Mean fraction of groups that verified, over all repetitions.
    pub rho_mean: f64,
    /// Population variance of the per-repetition fractions; 0 when
    /// repetitions = 1.
    pub rho_variance: f64,
    pub repetitions: usize,
}

fn check_same_kind(sets: &[HypothesisSets]) -> Result<()> {
    let first = &sets[0];
    for s in sets {
        if s.hypothesis != first.hypothesis {
            return Err(Error::MixedSets { what: "hypothesis" });
        }
        if s.variant != first.variant {
            return Err(Error::MixedSets { what: "variant" });
        }
    }
    Ok(())
}

/// Welch-flavored [`fraction_verified_with`].
pub fn fraction_verified(
    instance_sets: &[HypothesisSets],
    n_groups: usize,
    repetitions: usize,
    seed: u64,
    alpha: f64,
) -> Result<RhoPoint> {
    fraction_verified_with(
        instance_sets,
        n_groups,
        repetitions,
        seed,
        alpha,
        TTestKind::Welch,
    )
}

/// Repeatedly splits instances into `n_groups` near-equal random groups,
/// pools each group's sets, tests each group, and averages the fraction of
/// verified groups over the repetitions. Inconclusive groups count as not
/// verified. Instances whose sets are empty on a side simply contribute
/// nothing to that side.
pub fn fraction_verified_with(
    instance_sets: &[HypothesisSets],
    n_groups: usize,
    repetitions: usize,
    seed: u64,
    alpha: f64,
    kind: TTestKind,
) -> Result<RhoPoint> {
    let n = instance_sets.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    check_same_kind(instance_sets)?;
    if n_groups < 1 || n_groups > n {
        return Err(Error::InvalidGroupCount { n_groups, n });
    }
    if repetitions < 1 {
        return Err(Error::InvalidParameter(
            "repetitions must be at least 1".into(),
        ));
    }
    check_alpha(alpha)?;

    let mut rhos = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SPLIT, rep as u64));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        // Deal round-robin so group sizes differ by at most one.
        let mut verified = 0usize;
        for g in 0..n_groups {
            let mut correct = Vec::new();
            let mut incorrect = Vec::new();
            for &id in order.iter().skip(g).step_by(n_groups) {
                correct.extend_from_slice(&instance_sets[id].correct);
                incorrect.extend_from_slice(&instance_sets[id].incorrect);
            }
            let result = one_sided_t_test_with(&correct, &incorrect, alpha, kind)?;
            if result.verdict == Verdict::Verified {
                verified += 1;
            }
        }
        rhos.push(verified as f64 / n_groups as f64);
    }

    let mean = rhos.iter().sum::<f64>() / repetitions as f64;
    let variance = rhos.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / repetitions as f64;
    Ok(RhoPoint {
        n_groups,
        rho_mean: mean,
        rho_variance: variance,
        repetitions,
    })
}

/// Evaluates [`fraction_verified_with`] at every group count in `grid`,
/// which must be strictly increasing within [1, n]. Each grid point gets
/// its own derived seed, so the curve is stable under grid reshaping.
pub fn rho_curve_with(
    instance_sets: &[HypothesisSets],
    grid: &[usize],
    repetitions: usize,
    seed: u64,
    alpha: f64,
    kind: TTestKind,
) -> Result<Vec<RhoPoint>> {
    let n = instance_sets.len();
    if grid.is_empty() {
        return Err(Error::InvalidGrid {
            reason: "grid is empty".into(),
        });
    }
    for w in grid.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidGrid {
                reason: format!("grid is not strictly increasing at {} >= {}", w[0], w[1]),
            });
        }
    }
    if grid[0] < 1 || grid[grid.len() - 1] > n {
        return Err(Error::InvalidGrid {
            reason: format!("grid values must lie in [1, {n}]"),
        });
    }

    grid.iter()
        .map(|&g| {
            fraction_verified_with(
                instance_sets,
                g,
                repetitions,
                derive_seed(seed, STREAM_GRID, g as u64),
                alpha,
                kind,
            )
        })
        .collect()
}

pub fn rho_curve(
    instance_sets: &[HypothesisSets],
    grid: &[usize],
    repetitions: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<RhoPoint>> {
    rho_curve_with(
        instance_sets,
        grid,
        repetitions,
        seed,
        alpha,
        TTestKind::Welch,
    )
}

/// Group-count grid {1} plus 20 log-spaced values up to n, deduplicated.
pub fn default_grid(n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut grid = std::collections::BTreeSet::new();
    grid.insert(1);
    let ln_n = (n as f64).ln();
    for i in 1..=20 {
        let v = (ln_n * i as f64 / 20.0).exp().round() as usize;
        grid.insert(v.clamp(1, n));
    }
    grid.into_iter().collect()
}

/// Largest evaluated group count whose mean verification rate reaches
/// `rho_threshold`, as a fraction of the instance count. None when no grid
/// point qualifies.
pub fn theta_star(curve: &[RhoPoint], n: usize, rho_threshold: f64) -> Option<f64> {
    debug_assert!(rho_threshold > 0.0 && rho_threshold <= 1.0);
    curve
        .iter()
        .filter(|p| p.rho_mean >= rho_threshold)
        .map(|p| p.n_groups)
        .max()
        .map(|g| g as f64 / n as f64)
}

/// Dataset-level summary for one hypothesis/variant configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub mean_difference: f64,
    pub rho_curve: Vec<RhoPoint>,
    pub theta_star: Option<f64>,
    pub rho_threshold: f64,
}

/// Pools everything for the mean difference, traces the verification curve
/// over `grid`, and locates the largest qualifying group count.
pub fn summarize(
    instance_sets: &[HypothesisSets],
    grid: &[usize],
    repetitions: usize,
    seed: u64,
    alpha: f64,
    rho_threshold: f64,
    kind: TTestKind,
) -> Result<MetricSummary> {
    if instance_sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(rho_threshold > 0.0 && rho_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho threshold {rho_threshold} is outside (0, 1]"
        )));
    }
    let all: Vec<usize> = (0..instance_sets.len()).collect();
    let pooled = crate::hypothesis::pool_sets(instance_sets, &all)?;
    let delta = mean_difference(&pooled)?;
    let curve = rho_curve_with(instance_sets, grid, repetitions, seed, alpha, kind)?;
    let theta = theta_star(&curve, instance_sets.len(), rho_threshold);
    Ok(MetricSummary {
        mean_difference: delta,
        rho_curve: curve,
        theta_star: theta,
        rho_threshold,
    })
}
