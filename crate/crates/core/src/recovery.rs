//! Greedy sparse recovery: OMP and SOMP, with and without band priors.
//!
//! All four algorithms share one pursuit loop. The single-vector variants run
//! it on one measurement column; the joint variants score candidates by the
//! sum over SUs of correlation moduli and solve per-SU least squares on the
//! common support. With no prior the band rules are inert, so the prior-aware
//! variants reproduce the plain ones bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, IncrementalQr, LsSolution};
use crate::scalar::{norm_sq, Cx, Scalar};
use crate::sensing::{MeasurementSet, SensingMatrix};
use crate::spectrum::{BandPlan, Category, SpectrumVector};

/// Band allocation known to the receiver, if any.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriorKnowledge {
    plan: Option<BandPlan>,
}

impl PriorKnowledge {
    pub fn none() -> Self {
        PriorKnowledge { plan: None }
    }

    pub fn from_plan(plan: BandPlan) -> Self {
        PriorKnowledge { plan: Some(plan) }
    }

    pub fn plan(&self) -> Option<&BandPlan> {
        self.plan.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_none()
    }
}

/// Rule used when several candidates reach the same selection score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    HighestIndex,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryConfig<T: Scalar> {
    /// Residual tolerance `η`: stop once the (Frobenius) residual norm is at
    /// or below it.
    pub eta: T,
    /// Cap on selection iterations.
    pub max_iterations: usize,
    pub tie_break: TieBreak,
}

impl<T: Scalar> RecoveryConfig<T> {
    pub fn new(eta: T, max_iterations: usize) -> Self {
        RecoveryConfig {
            eta,
            max_iterations,
            tie_break: TieBreak::LowestIndex,
        }
    }

    /// Tolerance from the noise level: `η = √(M Σ_j σ_j²)·(1 + margin)` for
    /// per-measurement noise variances `σ_j²`, or `rel_noiseless · ‖Y‖_F`
    /// when every column is noiseless. Iterations default to `M / 2`.
    pub fn from_noise(
        m: usize,
        noise_variances: &[f64],
        measurement_norm: T,
        margin: f64,
        rel_noiseless: f64,
    ) -> Self {
        let total: f64 = noise_variances.iter().sum();
        let eta = if total > 0.0 {
            T::lit((m as f64 * total).sqrt() * (1.0 + margin))
        } else {
            measurement_norm * T::lit(rel_noiseless)
        };
        RecoveryConfig::new(eta, (m / 2).max(1))
    }

    pub fn for_measurements(ms: &MeasurementSet<T>) -> Self {
        let norm = ms.columns.iter().map(|c| norm_sq(c)).sum::<T>().sqrt();
        Self::from_noise(ms.m(), &ms.noise_variances, norm, 0.1, 1e-8)
    }
}

/// Why the pursuit loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Residual at or below `η`.
    Converged,
    /// `max_iterations` selections made.
    IterationCap,
    /// The next selection would push the support past `M` columns.
    SupportFull,
    /// No remaining column correlates with the residual.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryResult<T: Scalar> {
    /// One estimate per measurement column, zero outside `support`.
    pub estimates: Vec<SpectrumVector<T>>,
    /// Selected indices in the order they entered the support.
    pub support: Vec<usize>,
    /// Selection iterations performed (the warm start is not counted).
    pub iterations: usize,
    pub final_residual_norm: T,
    /// Residual norm after the initial solve and after every iteration.
    pub residual_trace: Vec<T>,
    pub stop: StopReason,
    /// Set if some least-squares solve met a rank-deficient sub-matrix.
    pub degenerate: bool,
}

impl<T: Scalar> RecoveryResult<T> {
    /// Estimate of the first (for single-vector recovery, the only) column.
    pub fn estimate(&self) -> &SpectrumVector<T> {
        &self.estimates[0]
    }

    pub fn sorted_support(&self) -> Vec<usize> {
        let mut s = self.support.clone();
        s.sort_unstable();
        s
    }
}

/// Least squares restricted to the columns of `theta` listed in `support`.
/// Rank-deficient sub-matrices yield the minimum-norm minimizer with
/// `degenerate` set.
pub fn least_squares_on_support<T: Scalar>(
    theta: &SensingMatrix<T>,
    support: &[usize],
    y: &[Cx<T>],
) -> Result<LsSolution<T>> {
    if support.is_empty() {
        return Err(Error::input("least squares needs a non-empty support"));
    }
    if support.len() > theta.m() {
        return Err(Error::input(format!(
            "support of {} columns exceeds {} measurements",
            support.len(),
            theta.m()
        )));
    }
    if y.len() != theta.m() {
        return Err(Error::input(format!(
            "measurement length {} differs from m = {}",
            y.len(),
            theta.m()
        )));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= theta.n()) {
        return Err(Error::input(format!("support index {bad} out of range")));
    }
    let cols: Vec<&[T]> = support.iter().map(|&i| theta.column(i)).collect();
    Ok(least_squares(&cols, y))
}

/// Orthogonal matching pursuit on a single measurement vector.
pub fn omp<T: Scalar>(
    y: &[Cx<T>],
    theta: &SensingMatrix<T>,
    cfg: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    pursue(theta, std::slice::from_ref(&y.to_vec()), None, cfg)
}

/// OMP with band priors: warm start on C1, whole-band expansion on C2 hits,
/// single-index growth for C3 hits.
pub fn mod_omp<T: Scalar>(
    y: &[Cx<T>],
    theta: &SensingMatrix<T>,
    prior: &PriorKnowledge,
    cfg: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    pursue(theta, std::slice::from_ref(&y.to_vec()), prior.plan(), cfg)
}

/// Simultaneous OMP over all columns of `y_set`.
pub fn somp<T: Scalar>(
    y_set: &MeasurementSet<T>,
    theta: &SensingMatrix<T>,
    cfg: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    check_same_matrix(y_set, theta)?;
    pursue(theta, &y_set.columns, None, cfg)
}

/// Simultaneous OMP with the same band rules as [`mod_omp`].
pub fn mod_somp<T: Scalar>(
    y_set: &MeasurementSet<T>,
    theta: &SensingMatrix<T>,
    prior: &PriorKnowledge,
    cfg: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    check_same_matrix(y_set, theta)?;
    pursue(theta, &y_set.columns, prior.plan(), cfg)
}

fn check_same_matrix<T: Scalar>(y_set: &MeasurementSet<T>, theta: &SensingMatrix<T>) -> Result<()> {
    if y_set.matrix_id != theta.id() {
        return Err(Error::input(format!(
            "measurements were taken with matrix {:#x}, not {:#x}",
            y_set.matrix_id,
            theta.id()
        )));
    }
    Ok(())
}

struct Solver<'a, T: Scalar> {
    theta: &'a SensingMatrix<T>,
    qr: IncrementalQr<T>,
    /// Set once an appended column turned out dependent; from then on every
    /// solve goes through the pivoted minimum-norm path.
    fallback: bool,
}

impl<T: Scalar> Solver<'_, T> {
    fn extend(&mut self, added: &[usize]) {
        if self.fallback {
            return;
        }
        for &i in added {
            if !self.qr.push(self.theta.column(i)) {
                self.fallback = true;
                return;
            }
        }
    }

    fn solve(&self, support: &[usize], y: &[Cx<T>]) -> (Vec<Cx<T>>, Vec<Cx<T>>) {
        if self.fallback {
            let cols: Vec<&[T]> = support.iter().map(|&i| self.theta.column(i)).collect();
            let sol = least_squares(&cols, y);
            (sol.coeffs, sol.residual)
        } else {
            self.qr.solve(y)
        }
    }
}

fn pursue<T: Scalar>(
    theta: &SensingMatrix<T>,
    columns: &[Vec<Cx<T>>],
    plan: Option<&BandPlan>,
    cfg: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    let (m, n) = (theta.m(), theta.n());
    if columns.is_empty() {
        return Err(Error::input("no measurement columns"));
    }
    if let Some(bad) = columns.iter().position(|c| c.len() != m) {
        return Err(Error::input(format!(
            "measurement column {bad} has length {} but m = {m}",
            columns[bad].len()
        )));
    }
    if let Some(plan) = plan {
        if plan.n() != n {
            return Err(Error::input(format!(
                "prior covers {} bins but the sampling matrix has {n} columns",
                plan.n()
            )));
        }
    }

    let mut in_support = vec![false; n];
    let mut support: Vec<usize> = Vec::new();
    let mut solver = Solver {
        theta,
        qr: IncrementalQr::new(m),
        fallback: false,
    };

    let mut coeffs: Vec<Vec<Cx<T>>> = vec![Vec::new(); columns.len()];
    let mut residuals: Vec<Vec<Cx<T>>> = columns.to_vec();

    if let Some(plan) = plan {
        let warm = plan.indices_in(Category::C1);
        if warm.len() > m {
            return Err(Error::input(format!(
                "C1 warm start has {} indices but only {m} measurements",
                warm.len()
            )));
        }
        if !warm.is_empty() {
            for &i in &warm {
                in_support[i] = true;
            }
            support.extend_from_slice(&warm);
            solver.extend(&warm);
            for (j, y) in columns.iter().enumerate() {
                (coeffs[j], residuals[j]) = solver.solve(&support, y);
            }
        }
    }

    let frobenius = |res: &[Vec<Cx<T>>]| res.iter().map(|r| norm_sq(r)).sum::<T>().sqrt();
    let mut residual_norm = frobenius(&residuals);
    let mut trace = vec![residual_norm];
    let mut iterations = 0;

    let stop = loop {
        if residual_norm <= cfg.eta {
            break StopReason::Converged;
        }
        if iterations >= cfg.max_iterations {
            break StopReason::IterationCap;
        }

        let Some(lambda) = select(theta, &residuals, &in_support, cfg.tie_break) else {
            break StopReason::Exhausted;
        };

        let added: Vec<usize> = match plan {
            None => vec![lambda],
            Some(plan) => {
                let k = plan.band_of(lambda);
                if !plan.band(k).contains(&lambda) {
                    return Err(Error::Invariant(format!(
                        "index {lambda} is not covered by its band {k}"
                    )));
                }
                match plan.category(k) {
                    // Every C1 index is in the warm start, and selection skips
                    // the support.
                    Category::C1 => {
                        return Err(Error::Invariant(format!(
                            "selected index {lambda} lies in warm-started C1 band {k}"
                        )))
                    }
                    Category::C2 => plan.band(k).filter(|&i| !in_support[i]).collect(),
                    Category::C3 => vec![lambda],
                }
            }
        };
        if support.len() + added.len() > m {
            break StopReason::SupportFull;
        }

        iterations += 1;
        for &i in &added {
            in_support[i] = true;
        }
        support.extend_from_slice(&added);
        solver.extend(&added);
        for (j, y) in columns.iter().enumerate() {
            (coeffs[j], residuals[j]) = solver.solve(&support, y);
        }
        residual_norm = frobenius(&residuals);
        trace.push(residual_norm);
    };

    let estimates = coeffs
        .iter()
        .enumerate()
        .map(|(owner, z)| {
            let mut s = SpectrumVector::zeros(owner, n);
            for (&i, &v) in support.iter().zip(z) {
                s.values[i] = v;
            }
            s
        })
        .collect();

    Ok(RecoveryResult {
        estimates,
        support,
        iterations,
        final_residual_norm: residual_norm,
        residual_trace: trace,
        stop,
        degenerate: solver.fallback,
    })
}

/// Index outside the support maximizing `Σ_j |⟨res_j, θ_i⟩|`, summed in SU
/// order. Returns `None` if every candidate scores zero.
fn select<T: Scalar>(
    theta: &SensingMatrix<T>,
    residuals: &[Vec<Cx<T>>],
    in_support: &[bool],
    tie_break: TieBreak,
) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for i in 0..theta.n() {
        if in_support[i] {
            continue;
        }
        let score: T = residuals
            .iter()
            .map(|r| theta.correlate(i, r).norm())
            .fold(T::zero(), |acc, x| acc + x);
        let better = match best {
            None => score > T::zero(),
            Some((_, b)) => match tie_break {
                TieBreak::LowestIndex => score > b,
                TieBreak::HighestIndex => score >= b,
            },
        };
        if better {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}
