//! Shared sampling matrix and noisy sub-Nyquist measurements.

use std::fmt;
use std::hash::Hasher;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{cx_zero, norm_sq, Cx, Scalar};
use crate::spectrum::{complex_gaussian_t, SpectrumVector};

/// Real `m × n` sampling matrix with unit-norm columns, stored column-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingMatrix<T: Scalar> {
    m: usize,
    n: usize,
    /// Content fingerprint used to tie measurements to the matrix.
    id: u64,
    entries: Vec<T>,
}

impl<T: Scalar> SensingMatrix<T> {
    /// Wraps column-major entries as-is (no normalization).
    pub fn from_columns(m: usize, n: usize, entries: Vec<T>) -> Result<Self> {
        if m == 0 || n == 0 || entries.len() != m * n {
            return Err(Error::input(format!(
                "{} entries cannot form a {m}x{n} matrix",
                entries.len()
            )));
        }
        let id = fingerprint(&entries);
        Ok(SensingMatrix { m, n, id, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = T::one();
        }
        Self::from_columns(n, n, entries).expect("square identity")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn column(&self, i: usize) -> &[T] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[col * self.m + row]
    }

    /// `Θ s` for a complex vector of length `n`.
    pub fn apply(&self, s: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut y = vec![cx_zero(); self.m];
        for (i, &v) in s.iter().enumerate() {
            if v.re == T::zero() && v.im == T::zero() {
                continue;
            }
            for (yr, &a) in y.iter_mut().zip(self.column(i)) {
                yr.re = yr.re + a * v.re;
                yr.im = yr.im + a * v.im;
            }
        }
        y
    }

    /// Conjugated correlation `⟨r, θ_i⟩` of a complex vector with column `i`.
    #[inline]
    pub fn correlate(&self, i: usize, r: &[Cx<T>]) -> Cx<T> {
        let mut acc = cx_zero::<T>();
        for (&a, z) in self.column(i).iter().zip(r) {
            acc.re = acc.re + a * z.re;
            acc.im = acc.im + a * z.im;
        }
        acc
    }
}

fn fingerprint<T: Scalar>(entries: &[T]) -> u64 {
    // FNV-1a over the f64 bit patterns; stable across runs and platforms.
    struct Fnv(u64);
    impl Hasher for Fnv {
        fn finish(&self) -> u64 {
            self.0
        }
        fn write(&mut self, bytes: &[u8]) {
            for &b in bytes {
                self.0 ^= u64::from(b);
                self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    let mut h = Fnv(0xcbf2_9ce4_8422_2325);
    for e in entries {
        h.write(&e.as_f64().to_bits().to_le_bytes());
    }
    h.finish()
}

/// Draws an `m × n` matrix with i.i.d. standard Gaussian entries and scales
/// every column to unit Euclidean norm.
pub fn make_sensing_matrix<T: Scalar, R: Rng + ?Sized>(
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<SensingMatrix<T>> {
    if m == 0 {
        return Err(Error::config("m", "measurement count must be positive"));
    }
    if m > n {
        return Err(Error::config("m", format!("m = {m} exceeds n = {n}")));
    }
    let mut entries = Vec::with_capacity(m * n);
    let mut column = vec![0.0f64; m];
    for _ in 0..n {
        loop {
            column
                .iter_mut()
                .for_each(|x| *x = StandardNormal.sample(rng));
            let norm = column.iter().map(|x| x * x).sum::<f64>().sqrt();
            // A zero column has probability zero; redraw rather than divide.
            if norm > 0.0 {
                entries.extend(column.iter().map(|x| T::lit(x / norm)));
                break;
            }
        }
    }
    SensingMatrix::from_columns(m, n, entries)
}

/// Signal-to-noise ratio in dB, or noiseless.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum Snr {
    Db(f64),
    Infinite,
}

impl Snr {
    pub fn is_infinite(self) -> bool {
        matches!(self, Snr::Infinite)
    }

    /// Noise-to-signal power ratio, `0` when noiseless.
    pub fn noise_ratio(self) -> f64 {
        match self {
            Snr::Db(db) => 10f64.powf(-db / 10.0),
            Snr::Infinite => 0.0,
        }
    }

    pub fn parse(token: &str) -> Option<Snr> {
        match token.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => Some(Snr::Infinite),
            other => other.parse::<f64>().ok().and_then(|db| {
                if db.is_finite() {
                    Some(Snr::Db(db))
                } else if db == f64::INFINITY {
                    Some(Snr::Infinite)
                } else {
                    None
                }
            }),
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Db(db) => write!(f, "{db}"),
            Snr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Db(db) => s.serialize_f64(*db),
            Snr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(db) if db.is_finite() => Ok(Snr::Db(db)),
            Raw::Num(db) => Err(serde::de::Error::custom(format!("invalid SNR {db}"))),
            Raw::Text(t) => Snr::parse(&t)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid SNR token {t:?}"))),
        }
    }
}

/// Measurements `Y = Θ S + noise` for all SUs of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSet<T: Scalar> {
    pub columns: Vec<Vec<Cx<T>>>,
    pub snr_db: Snr,
    /// Per-SU noise variance per measurement, `E|n_j(r)|²`.
    pub noise_variances: Vec<f64>,
    pub matrix_id: u64,
}

impl<T: Scalar> MeasurementSet<T> {
    pub fn j(&self) -> usize {
        self.columns.len()
    }

    pub fn m(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Single-SU view of column `j`.
    pub fn single(&self, j: usize) -> MeasurementSet<T> {
        MeasurementSet {
            columns: vec![self.columns[j].clone()],
            snr_db: self.snr_db,
            noise_variances: vec![self.noise_variances[j]],
            matrix_id: self.matrix_id,
        }
    }
}

/// Samples every spectrum with the same `theta` and adds circularly-symmetric
/// complex Gaussian noise scaled per SU so that
/// `10 log10(‖Θ s_j‖² / E‖n_j‖²) = snr_db`.
pub fn measure<T: Scalar, R: Rng + ?Sized>(
    theta: &SensingMatrix<T>,
    spectra: &[SpectrumVector<T>],
    snr_db: Snr,
    rng: &mut R,
) -> Result<MeasurementSet<T>> {
    if spectra.is_empty() {
        return Err(Error::input("no spectra to measure"));
    }
    let m = theta.m();
    let mut columns = Vec::with_capacity(spectra.len());
    let mut noise_variances = Vec::with_capacity(spectra.len());
    for s in spectra {
        if s.len() != theta.n() {
            return Err(Error::input(format!(
                "spectrum of SU {} has length {} but the sampling matrix has {} columns",
                s.owner,
                s.len(),
                theta.n()
            )));
        }
        let mut y = theta.apply(&s.values);
        let signal_power = norm_sq(&y).as_f64();
        let variance = signal_power * snr_db.noise_ratio() / m as f64;
        if variance > 0.0 {
            let std = (variance / 2.0).sqrt();
            for v in y.iter_mut() {
                *v = *v + complex_gaussian_t::<T, R>(rng, std);
            }
        }
        columns.push(y);
        noise_variances.push(variance);
    }
    Ok(MeasurementSet {
        columns,
        snr_db,
        noise_variances,
        matrix_id: theta.id(),
    })
}
