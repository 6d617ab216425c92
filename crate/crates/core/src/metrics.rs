//! Decision statistics and the Hanssen-Kuiper skill score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::OccupancyVector;

/// Per-band outcome counts of one decision vector against the truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionStats {
    /// `a`: occupied and flagged.
    pub hit: usize,
    /// `b`: occupied but not flagged.
    pub miss: usize,
    /// `c`: free but flagged.
    pub false_alarm: usize,
    /// `d`: free and not flagged.
    pub correct_reject: usize,
}

impl DecisionStats {
    pub fn new(hit: usize, miss: usize, false_alarm: usize, correct_reject: usize) -> Self {
        DecisionStats {
            hit,
            miss,
            false_alarm,
            correct_reject,
        }
    }

    pub fn total(&self) -> usize {
        self.hit + self.miss + self.false_alarm + self.correct_reject
    }
}

/// Trial-averaged `(a, b, c, d)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStats {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MeanStats {
    pub fn of(stats: &[DecisionStats]) -> Self {
        if stats.is_empty() {
            return MeanStats::default();
        }
        let n = stats.len() as f64;
        let sum = |f: fn(&DecisionStats) -> usize| stats.iter().map(f).sum::<usize>() as f64 / n;
        MeanStats {
            a: sum(|s| s.hit),
            b: sum(|s| s.miss),
            c: sum(|s| s.false_alarm),
            d: sum(|s| s.correct_reject),
        }
    }
}

/// Anything that can be read as `(a, b, c, d)`.
pub trait Counts {
    fn abcd(&self) -> [f64; 4];
}

impl Counts for DecisionStats {
    fn abcd(&self) -> [f64; 4] {
        [
            self.hit as f64,
            self.miss as f64,
            self.false_alarm as f64,
            self.correct_reject as f64,
        ]
    }
}

impl Counts for MeanStats {
    fn abcd(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

impl Counts for [f64; 4] {
    fn abcd(&self) -> [f64; 4] {
        *self
    }
}

/// Compares an estimated occupancy with the truth band by band.
pub fn tally(truth: &OccupancyVector, estimate: &OccupancyVector) -> Result<DecisionStats> {
    if truth.len() != estimate.len() {
        return Err(Error::input(format!(
            "truth has {} bands but the estimate has {}",
            truth.len(),
            estimate.len()
        )));
    }
    let mut stats = DecisionStats::default();
    for (&o, &e) in truth.flags().iter().zip(estimate.flags()) {
        match (o, e) {
            (true, true) => stats.hit += 1,
            (true, false) => stats.miss += 1,
            (false, true) => stats.false_alarm += 1,
            (false, false) => stats.correct_reject += 1,
        }
    }
    Ok(stats)
}

/// `R = w1·a/(a+b) − w2·c/(c+d)`. A ratio whose denominator is zero counts
/// as zero.
pub fn r_score<S: Counts + ?Sized>(stats: &S, w1: f64, w2: f64) -> f64 {
    let [a, b, c, d] = stats.abcd();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    w1 * ratio(a, a + b) - w2 * ratio(c, c + d)
}

/// An R score together with the weights it was computed with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RScore {
    pub value: f64,
    pub weights: (f64, f64),
}

impl RScore {
    pub fn compute<S: Counts + ?Sized>(stats: &S, w1: f64, w2: f64) -> Self {
        RScore {
            value: r_score(stats, w1, w2),
            weights: (w1, w2),
        }
    }

    pub fn unweighted<S: Counts + ?Sized>(stats: &S) -> Self {
        Self::compute(stats, 1.0, 1.0)
    }
}
