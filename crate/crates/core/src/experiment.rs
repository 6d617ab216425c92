//! Seeded Monte Carlo runner and result serialization.
//!
//! Every trial redraws occupancy, spectra, fading and the sampling matrix
//! from its own ChaCha stream (`stream = trial index`). Noise for SNR grid
//! point `s` comes from a second generator keyed by `s`, again on stream
//! `trial`. All variants of a trial see the same measurements. Trials run on
//! a rayon pool and are reduced in trial order, so results do not depend on
//! the worker count.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{run_pipeline, PipelineConfig, Variant};
use crate::metrics::{r_score, tally, DecisionStats, MeanStats};
use crate::recovery::PriorKnowledge;
use crate::sensing::{make_sensing_matrix, measure, MeasurementSet, SensingMatrix, Snr};
use crate::spectrum::{make_paper_band_plan, BandPlan, OccupiedCounts, ScenarioTruth, Synthesis};

/// Environment variable consulted for the seed when neither the command line
/// nor the config sets one.
pub const SEED_ENV: &str = "CWSS_SEED";
pub const DEFAULT_SEED: u64 = 1;

pub const CSV_HEADER: &str = "variant,snr_db,mean_r,stderr_r,mean_a,mean_b,mean_c,mean_d,trials";

pub fn default_snr_grid() -> Vec<Snr> {
    let mut grid: Vec<Snr> = (0..=6).map(|i| Snr::Db(5.0 * i as f64)).collect();
    grid.push(Snr::Infinite);
    grid
}

fn default_trials() -> usize {
    500
}

fn default_weights() -> (f64, f64) {
    (1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Explicit allocation; the 41-band, 200-bin layout when absent.
    #[serde(default)]
    pub plan: Option<BandPlan>,
    pub m: usize,
    pub j: usize,
    #[serde(default = "default_snr_grid")]
    pub snr_grid: Vec<Snr>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "paper_counts")]
    pub occupied_counts: OccupiedCounts,
    #[serde(default)]
    pub synthesis: Synthesis,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// `(w1, w2)` of the R score.
    #[serde(default = "default_weights")]
    pub weights: (f64, f64),
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn paper_counts() -> OccupiedCounts {
    OccupiedCounts::PAPER
}

impl ExperimentConfig {
    /// Allocation, counts and defaults of the published experiments for the
    /// given `m` and `j`.
    pub fn paper(m: usize, j: usize) -> Self {
        ExperimentConfig {
            plan: None,
            m,
            j,
            snr_grid: default_snr_grid(),
            trials: default_trials(),
            variants: all_variants(),
            seed: None,
            occupied_counts: OccupiedCounts::PAPER,
            synthesis: Synthesis::default(),
            pipeline: PipelineConfig::default(),
            weights: default_weights(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn band_plan(&self) -> BandPlan {
        self.plan.clone().unwrap_or_else(make_paper_band_plan)
    }

    /// Seed from the config, else `CWSS_SEED`, else [`DEFAULT_SEED`].
    pub fn resolved_seed(&self) -> Result<u64> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::config(SEED_ENV, format!("not a 64-bit integer: {v:?}"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let plan = self.band_plan();
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.snr_grid.is_empty() {
            return Err(Error::config("snr_grid", "must not be empty"));
        }
        if self.m == 0 || self.m > plan.n() {
            return Err(Error::config("m", format!("must lie in 1..={}, got {}", plan.n(), self.m)));
        }
        if self.j == 0 {
            return Err(Error::config("j", "at least one SU is required"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "must not be empty"));
        }
        if let Some(l) = self.pipeline.l_vote {
            if l == 0 || l > self.j {
                return Err(Error::config("pipeline.l_vote", format!("must lie in 1..={}", self.j)));
            }
        }
        if let Some(0) = self.pipeline.max_iterations {
            return Err(Error::config("pipeline.max_iterations", "must be positive"));
        }
        if self.weights.0 < 0.0 || self.weights.1 < 0.0 {
            return Err(Error::config("weights", "must be non-negative"));
        }
        if self.synthesis.c3_active_per_band == 0 {
            return Err(Error::config("synthesis.c3_active_per_band", "must be at least 1"));
        }
        Ok(())
    }
}

/// Aggregate of all trials for one `(variant, snr)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub variant: Variant,
    pub snr_db: Snr,
    pub mean_r: f64,
    pub stderr_r: f64,
    pub mean_stats: MeanStats,
    pub trials: usize,
}

/// Per-trial outcomes, in trial order, for one `(variant, snr)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellTrials {
    pub variant: Variant,
    pub snr_db: Snr,
    pub stats: Vec<DecisionStats>,
    pub r: Vec<f64>,
}

/// Everything one trial draws before noise is added.
pub struct TrialScenario {
    pub truth: ScenarioTruth<f64>,
    pub theta: SensingMatrix<f64>,
}

fn scenario_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn noise_rng(seed: u64, snr_index: usize, trial: usize) -> ChaCha8Rng {
    // Distinct key per grid point; the splitmix finalizer decorrelates
    // neighbouring seeds.
    let mut z = seed ^ (snr_index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(trial as u64);
    rng
}

/// Draws the scenario and sampling matrix of `trial`.
pub fn trial_scenario(cfg: &ExperimentConfig, seed: u64, trial: usize) -> Result<TrialScenario> {
    let plan = cfg.band_plan();
    let mut rng = scenario_rng(seed, trial);
    let truth = ScenarioTruth::generate(&plan, cfg.occupied_counts, cfg.j, &cfg.synthesis, &mut rng)?;
    let theta = make_sensing_matrix(cfg.m, plan.n(), &mut rng)?;
    Ok(TrialScenario { truth, theta })
}

/// Measurements of `trial` at grid point `snr_index`.
pub fn trial_measurements(
    cfg: &ExperimentConfig,
    seed: u64,
    trial: usize,
    snr_index: usize,
    scenario: &TrialScenario,
) -> Result<MeasurementSet<f64>> {
    let snr = *cfg
        .snr_grid
        .get(snr_index)
        .ok_or_else(|| Error::config("snr_index", format!("grid has {} points", cfg.snr_grid.len())))?;
    let mut rng = noise_rng(seed, snr_index, trial);
    measure(&scenario.theta, &scenario.truth.spectra, snr, &mut rng)
}

fn run_trial(cfg: &ExperimentConfig, seed: u64, trial: usize) -> Result<Vec<DecisionStats>> {
    let scenario = trial_scenario(cfg, seed, trial)?;
    let plan = &scenario.truth.plan;
    let prior = PriorKnowledge::from_plan(plan.clone());
    let mut out = Vec::with_capacity(cfg.snr_grid.len() * cfg.variants.len());
    for snr_index in 0..cfg.snr_grid.len() {
        let ms = trial_measurements(cfg, seed, trial, snr_index, &scenario)?;
        for &variant in &cfg.variants {
            let decision = run_pipeline(variant, &ms, &scenario.theta, plan, &prior, &cfg.pipeline)?;
            out.push(tally(&scenario.truth.occupancy, &decision)?);
        }
    }
    Ok(out)
}

/// Runs every trial and returns per-trial outcomes grouped by
/// `(variant, snr)`, variants outermost.
pub fn run_trials(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<CellTrials>> {
    cfg.validate()?;
    let seed = cfg.resolved_seed()?;
    let work = || -> Result<Vec<Vec<DecisionStats>>> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, seed, t))
            .collect()
    };
    let per_trial = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let nv = cfg.variants.len();
    let mut cells = Vec::with_capacity(nv * cfg.snr_grid.len());
    for (vi, &variant) in cfg.variants.iter().enumerate() {
        for (si, &snr_db) in cfg.snr_grid.iter().enumerate() {
            let stats: Vec<DecisionStats> = per_trial.iter().map(|t| t[si * nv + vi]).collect();
            let r = stats
                .iter()
                .map(|s| r_score(s, cfg.weights.0, cfg.weights.1))
                .collect();
            cells.push(CellTrials {
                variant,
                snr_db,
                stats,
                r,
            });
        }
    }
    Ok(cells)
}

/// Mean and standard error of the mean (sample standard deviation over
/// `√n`; zero for a single trial).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl From<&CellTrials> for ResultRow {
    fn from(cell: &CellTrials) -> Self {
        let (mean_r, stderr_r) = mean_and_stderr(&cell.r);
        ResultRow {
            variant: cell.variant,
            snr_db: cell.snr_db,
            mean_r,
            stderr_r,
            mean_stats: MeanStats::of(&cell.stats),
            trials: cell.stats.len(),
        }
    }
}

pub fn run_experiment_with(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<ResultRow>> {
    Ok(run_trials(cfg, workers)?.iter().map(ResultRow::from).collect())
}

/// One row per `(variant, snr)`, variants in config order, SNR in grid order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with(cfg, None)
}

/// Fixed-format CSV: header [`CSV_HEADER`], six decimals for every real,
/// `inf` for the noiseless grid point, `\n` line endings.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let snr = match row.snr_db {
            Snr::Db(db) => format!("{db:.6}"),
            Snr::Infinite => "inf".to_string(),
        };
        let s = &row.mean_stats;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            row.variant, snr, row.mean_r, row.stderr_r, s.a, s.b, s.c, s.d, row.trials
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub seed: u64,
    pub m: usize,
    pub j: usize,
    pub trials: usize,
    pub rows: Vec<ResultRow>,
}

/// Single-trial dump for debugging and regression fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub seed: u64,
    pub trial: usize,
    pub truth: ScenarioTruth<f64>,
    #[serde(default)]
    pub theta: Option<SensingMatrix<f64>>,
    #[serde(default)]
    pub measurements: Option<MeasurementSet<f64>>,
}

impl ScenarioDocument {
    /// Reproduces the draws of `trial`; with `snr_index` the measurements at
    /// that grid point are included too.
    pub fn generate(
        cfg: &ExperimentConfig,
        seed: u64,
        trial: usize,
        snr_index: Option<usize>,
        include_theta: bool,
    ) -> Result<Self> {
        let scenario = trial_scenario(cfg, seed, trial)?;
        let measurements = snr_index
            .map(|s| trial_measurements(cfg, seed, trial, s, &scenario))
            .transpose()?;
        Ok(ScenarioDocument {
            seed,
            trial,
            truth: scenario.truth,
            theta: (include_theta || measurements.is_some()).then_some(scenario.theta),
            measurements,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDocument =
            serde_json::from_str(text).map_err(|e| Error::config("scenario", e.to_string()))?;
        doc.check()?;
        Ok(doc)
    }

    /// Structural consistency of a loaded document.
    pub fn check(&self) -> Result<()> {
        let plan = &self.truth.plan;
        if self.truth.occupancy.len() != plan.k() {
            return Err(Error::input("occupancy length differs from band count"));
        }
        if self.truth.spectra.iter().any(|s| s.len() != plan.n()) {
            return Err(Error::input("spectrum length differs from plan length"));
        }
        if let (Some(ms), Some(theta)) = (&self.measurements, &self.theta) {
            if ms.matrix_id != theta.id() {
                return Err(Error::input("measurements do not match the stored matrix"));
            }
            if ms.columns.iter().any(|c| c.len() != theta.m()) {
                return Err(Error::input("measurement length differs from matrix rows"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            trials,
            snr_grid: vec![Snr::Db(10.0), Snr::Infinite],
            seed: Some(3),
            ..ExperimentConfig::paper(70, 3)
        }
    }

    #[test]
    fn rows_are_ordered_and_sum_to_k() {
        let rows = run_experiment(&small(4)).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].variant, Variant::OmpDef);
        assert_eq!(rows[1].snr_db, Snr::Infinite);
        for row in &rows {
            let s = &row.mean_stats;
            assert!((s.a + s.b + s.c + s.d - 41.0).abs() < 1e-9);
            assert_eq!(row.trials, 4);
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let cfg = small(6);
        let a = to_csv(&run_experiment_with(&cfg, Some(1)).unwrap());
        let b = to_csv(&run_experiment_with(&cfg, Some(4)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn single_trial_stderr_is_zero() {
        let rows = run_experiment(&small(1)).unwrap();
        assert!(rows.iter().all(|r| r.stderr_r == 0.0));
    }

    #[test]
    fn validation_names_field() {
        let mut cfg = small(1);
        cfg.trials = 0;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig { field, .. }) if field == "trials"));
        let mut cfg = small(1);
        cfg.m = 201;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig { field, .. }) if field == "m"));
        let mut cfg = small(1);
        cfg.snr_grid.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        assert!(ExperimentConfig::from_json(r#"{"m": 70, "j": 7, "bogus": 1}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"m": 70, "j": 7, "snr_grid": [15, "inf"]}"#).unwrap();
        assert_eq!(cfg.snr_grid, vec![Snr::Db(15.0), Snr::Infinite]);
        assert_eq!(cfg.trials, 500);
        assert_eq!(cfg.variants.len(), 4);
    }

    #[test]
    fn csv_format_is_fixed() {
        let row = ResultRow {
            variant: Variant::ModOmpDef,
            snr_db: Snr::Infinite,
            mean_r: 1.0,
            stderr_r: 0.0,
            mean_stats: MeanStats { a: 10.0, b: 0.0, c: 0.0, d: 31.0 },
            trials: 500,
        };
        assert_eq!(
            to_csv(&[row]),
            format!("{CSV_HEADER}\nmod-omp-def,inf,1.000000,0.000000,10.000000,0.000000,0.000000,31.000000,500\n")
        );
    }

    #[test]
    fn stderr_matches_hand_value() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // Sample variance 5/3, divided by n = 4.
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scenario_document_roundtrip() {
        let cfg = small(1);
        let doc = ScenarioDocument::generate(&cfg, 9, 2, Some(0), true).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let back = ScenarioDocument::from_json(&text).unwrap();
        assert_eq!(back, doc);
        // Same draws as the harness uses.
        let again = ScenarioDocument::generate(&cfg, 9, 2, Some(0), true).unwrap();
        assert_eq!(again, doc);
    }
}
