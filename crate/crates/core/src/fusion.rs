//! Band decisions from reconstructed spectra and fusion at the fusion center.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::{mod_omp, mod_somp, omp, somp, PriorKnowledge, RecoveryConfig};
use crate::scalar::{norm_sq, Scalar};
use crate::sensing::{MeasurementSet, SensingMatrix};
use crate::spectrum::{BandPlan, Category, OccupancyVector, SpectrumVector};

/// Occupancy estimate produced by one SU.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalDecision {
    pub owner: usize,
    pub flags: OccupancyVector,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig {
    /// Amplitude threshold `T_f`.
    pub t_f: f64,
    /// Votes needed to flag a band (`L`).
    pub l_vote: usize,
}

impl FusionConfig {
    /// `L = ⌈J/2⌉`.
    pub fn majority(j: usize) -> usize {
        j.div_ceil(2).max(1)
    }
}

/// Flags band `k` iff the largest modulus of `estimate` inside it exceeds
/// `t_f` (strictly).
pub fn decide_local<T: Scalar>(
    estimate: &SpectrumVector<T>,
    plan: &BandPlan,
    t_f: f64,
) -> Result<OccupancyVector> {
    if estimate.len() != plan.n() {
        return Err(Error::input(format!(
            "estimate has {} bins but the plan covers {}",
            estimate.len(),
            plan.n()
        )));
    }
    let flags = plan
        .bands()
        .map(|band| {
            let peak = estimate.values[band]
                .iter()
                .map(|v| v.norm().as_f64())
                .fold(0.0, f64::max);
            peak > t_f
        })
        .collect();
    Ok(OccupancyVector::new(flags))
}

/// L-out-of-J vote: band `k` is occupied iff at least `l_vote` SUs flag it.
pub fn fuse_decisions(locals: &[LocalDecision], l_vote: usize) -> Result<OccupancyVector> {
    let Some(first) = locals.first() else {
        return Err(Error::input("no local decisions to fuse"));
    };
    let k = first.flags.len();
    if let Some(bad) = locals.iter().find(|d| d.flags.len() != k) {
        return Err(Error::input(format!(
            "SU {} reported {} bands, expected {k}",
            bad.owner,
            bad.flags.len()
        )));
    }
    if l_vote == 0 || l_vote > locals.len() {
        return Err(Error::config(
            "l_vote",
            format!("must lie in 1..={}, got {l_vote}", locals.len()),
        ));
    }
    let flags = (0..k)
        .map(|band| locals.iter().filter(|d| d.flags.get(band)).count() >= l_vote)
        .collect();
    Ok(OccupancyVector::new(flags))
}

/// Entry-wise sum over SUs of estimate moduli; the result is real and
/// non-negative.
pub fn aggregate_estimates<T: Scalar>(joint: &[SpectrumVector<T>]) -> SpectrumVector<T> {
    let n = joint.first().map_or(0, SpectrumVector::len);
    let mut out = SpectrumVector::zeros(0, n);
    for (i, slot) in out.values.iter_mut().enumerate() {
        let sum = joint
            .iter()
            .map(|s| s.values[i].norm())
            .fold(T::zero(), |acc, x| acc + x);
        *slot = Complex::new(sum, T::zero());
    }
    out
}

/// Threshold rule applied to the aggregated spectrum.
pub fn decide_fused_data<T: Scalar>(
    aggregate: &SpectrumVector<T>,
    plan: &BandPlan,
    t_f: f64,
) -> Result<OccupancyVector> {
    decide_local(aggregate, plan, t_f)
}

/// The four sensing schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Per-SU OMP, majority vote.
    #[serde(rename = "omp-def")]
    OmpDef,
    /// Per-SU prior-aware OMP, majority vote.
    #[serde(rename = "mod-omp-def")]
    ModOmpDef,
    /// Joint SOMP at the fusion center, thresholded aggregate.
    #[serde(rename = "somp-daf")]
    SompDaf,
    /// Joint prior-aware SOMP at the fusion center, thresholded aggregate.
    #[serde(rename = "mod-somp-daf")]
    ModSompDaf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::OmpDef,
        Variant::ModOmpDef,
        Variant::SompDaf,
        Variant::ModSompDaf,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Variant::OmpDef => "omp-def",
            Variant::ModOmpDef => "mod-omp-def",
            Variant::SompDaf => "somp-daf",
            Variant::ModSompDaf => "mod-somp-daf",
        }
    }

    pub fn uses_prior(self) -> bool {
        matches!(self, Variant::ModOmpDef | Variant::ModSompDaf)
    }

    pub fn is_decision_fusion(self) -> bool {
        matches!(self, Variant::OmpDef | Variant::ModOmpDef)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let key = key.as_str();
        Variant::ALL
            .into_iter()
            .find(|v| v.token() == key)
            .or(match key {
                "omp" => Some(Variant::OmpDef),
                "mod-omp" => Some(Variant::ModOmpDef),
                "somp" => Some(Variant::SompDaf),
                "mod-somp" => Some(Variant::ModSompDaf),
                _ => None,
            })
            .ok_or_else(|| Error::config("variant", format!("unknown variant {s:?}")))
    }
}

/// Noise-derived tolerances and fusion rules for [`run_pipeline`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// `δ` in `η = √(M σ²)(1 + δ)`.
    pub eta_margin: f64,
    /// `η = rel · ‖y‖` for noiseless measurements.
    pub noiseless_rel_eta: f64,
    /// Selection cap; `None` means `M / 2`.
    pub max_iterations: Option<usize>,
    /// `T_f = multiplier · σ`, with `σ` the per-measurement noise standard
    /// deviation.
    pub tf_multiplier: f64,
    /// Lower bound on `T_f`, the whole threshold when noiseless.
    pub tf_floor: f64,
    /// Votes required; `None` means `⌈J/2⌉`.
    pub l_vote: Option<usize>,
    /// Always report C1 bands as occupied.
    pub force_c1: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            eta_margin: 0.1,
            noiseless_rel_eta: 1e-8,
            max_iterations: None,
            tf_multiplier: 3.0,
            tf_floor: 1e-6,
            l_vote: None,
            force_c1: false,
        }
    }
}

impl PipelineConfig {
    pub fn recovery<T: Scalar>(&self, m: usize, noise_variances: &[f64], y_norm: T) -> RecoveryConfig<T> {
        let mut cfg =
            RecoveryConfig::from_noise(m, noise_variances, y_norm, self.eta_margin, self.noiseless_rel_eta);
        if let Some(cap) = self.max_iterations {
            cfg.max_iterations = cap;
        }
        cfg
    }

    /// Threshold for an estimate whose per-measurement noise variance is
    /// `noise_variance`.
    pub fn threshold(&self, noise_variance: f64) -> f64 {
        (self.tf_multiplier * noise_variance.sqrt()).max(self.tf_floor)
    }
}

/// Runs one sensing scheme end to end and returns the fused occupancy.
///
/// Decision fusion reconstructs each column separately, thresholds each
/// estimate with that SU's noise level, then votes. Data fusion reconstructs
/// all columns jointly, sums moduli across SUs and thresholds the aggregate
/// with the RMS noise level of the SUs.
pub fn run_pipeline<T: Scalar>(
    variant: Variant,
    measurements: &MeasurementSet<T>,
    theta: &SensingMatrix<T>,
    plan: &BandPlan,
    prior: &PriorKnowledge,
    cfg: &PipelineConfig,
) -> Result<OccupancyVector> {
    let j = measurements.j();
    if j == 0 {
        return Err(Error::input("measurement set is empty"));
    }
    if measurements.noise_variances.len() != j {
        return Err(Error::input("one noise variance per SU is required"));
    }
    let m = theta.m();
    let no_prior = PriorKnowledge::none();
    let prior = if variant.uses_prior() { prior } else { &no_prior };

    let mut decision = if variant.is_decision_fusion() {
        let mut locals = Vec::with_capacity(j);
        for (owner, y) in measurements.columns.iter().enumerate() {
            let var = measurements.noise_variances[owner];
            let rc = cfg.recovery(m, &[var], norm_sq(y).sqrt());
            let result = match variant {
                Variant::OmpDef => omp(y, theta, &rc)?,
                _ => mod_omp(y, theta, prior, &rc)?,
            };
            locals.push(LocalDecision {
                owner,
                flags: decide_local(result.estimate(), plan, cfg.threshold(var))?,
            });
        }
        fuse_decisions(&locals, cfg.l_vote.unwrap_or(FusionConfig::majority(j)))?
    } else {
        let y_norm = measurements.columns.iter().map(|c| norm_sq(c)).sum::<T>().sqrt();
        let rc = cfg.recovery(m, &measurements.noise_variances, y_norm);
        let result = match variant {
            Variant::SompDaf => somp(measurements, theta, &rc)?,
            _ => mod_somp(measurements, theta, prior, &rc)?,
        };
        let mean_var = measurements.noise_variances.iter().sum::<f64>() / j as f64;
        decide_fused_data(&aggregate_estimates(&result.estimates), plan, cfg.threshold(mean_var))?
    };

    if cfg.force_c1 {
        for k in plan.bands_in(Category::C1) {
            decision.set(k, true);
        }
    }
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::make_paper_band_plan;

    fn local(owner: usize, bits: &[u8]) -> LocalDecision {
        LocalDecision {
            owner,
            flags: OccupancyVector::new(bits.iter().map(|&b| b == 1).collect()),
        }
    }

    #[test]
    fn zero_estimate_flags_nothing() {
        let plan = make_paper_band_plan();
        let est = SpectrumVector::<f64>::zeros(0, 200);
        assert_eq!(decide_local(&est, &plan, 0.5).unwrap().count(), 0);
    }

    #[test]
    fn single_spike_flags_its_band() {
        let plan = make_paper_band_plan();
        let mut est = SpectrumVector::<f64>::zeros(0, 200);
        let i = plan.band(3).start + 1;
        est.values[i] = Complex::new(5.0, 0.0);
        let occ = decide_local(&est, &plan, 1.0).unwrap();
        assert_eq!(occ.occupied().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn threshold_is_strict() {
        let plan = make_paper_band_plan();
        let mut agg = SpectrumVector::<f64>::zeros(0, 200);
        agg.values[plan.band(7).start] = Complex::new(2.0, 0.0);
        assert_eq!(decide_fused_data(&agg, &plan, 2.0).unwrap().count(), 0);
        assert_eq!(decide_fused_data(&agg, &plan, 1.999).unwrap().count(), 1);
    }

    #[test]
    fn local_rejects_wrong_length() {
        let plan = make_paper_band_plan();
        let est = SpectrumVector::<f64>::zeros(0, 199);
        assert!(decide_local(&est, &plan, 0.5).is_err());
    }

    #[test]
    fn vote_boundaries() {
        let votes = |pattern: &[u8]| -> Vec<LocalDecision> {
            pattern.iter().enumerate().map(|(j, &b)| local(j, &[0, 0, b])).collect()
        };
        let all = votes(&[1; 7]);
        assert!(fuse_decisions(&all, 4).unwrap().get(2));
        assert!(fuse_decisions(&votes(&[1, 1, 1, 1, 0, 0, 0]), 4).unwrap().get(2));
        assert!(!fuse_decisions(&votes(&[1, 1, 1, 0, 0, 0, 0]), 4).unwrap().get(2));
    }

    #[test]
    fn vote_errors() {
        assert!(fuse_decisions(&[], 1).is_err());
        assert!(fuse_decisions(&[local(0, &[1, 0]), local(1, &[1])], 1).is_err());
        assert!(fuse_decisions(&[local(0, &[1])], 2).is_err());
        assert!(fuse_decisions(&[local(0, &[1])], 0).is_err());
    }

    #[test]
    fn majority_default() {
        assert_eq!(FusionConfig::majority(7), 4);
        assert_eq!(FusionConfig::majority(1), 1);
        assert_eq!(FusionConfig::majority(2), 1);
    }

    #[test]
    fn aggregate_sums_moduli() {
        assert!(aggregate_estimates::<f64>(&[SpectrumVector::zeros(0, 3)])
            .values
            .iter()
            .all(|v| v.re == 0.0));
        let mut a = SpectrumVector::<f64>::zeros(0, 2);
        let mut b = SpectrumVector::<f64>::zeros(1, 2);
        a.values[0] = Complex::new(0.0, 3.0);
        b.values[0] = Complex::new(-4.0, 0.0);
        let agg = aggregate_estimates(&[a.clone(), b]);
        assert_eq!(agg.values, vec![Complex::new(7.0, 0.0), Complex::new(0.0, 0.0)]);
        let single = aggregate_estimates(&[a]);
        assert_eq!(single.values[0], Complex::new(3.0, 0.0));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("mod-somp-daf".parse::<Variant>().unwrap(), Variant::ModSompDaf);
        assert_eq!("Mod_OMP".parse::<Variant>().unwrap(), Variant::ModOmpDef);
        assert!("lasso".parse::<Variant>().is_err());
        assert_eq!(serde_json::to_string(&Variant::OmpDef).unwrap(), "\"omp-def\"");
    }

    #[test]
    fn threshold_floor() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.threshold(0.0), 1e-6);
        assert!((cfg.threshold(0.04) - 0.6).abs() < 1e-12);
    }
}
