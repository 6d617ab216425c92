//! Band allocation, ground-truth occupancy and sparse spectrum synthesis.
//!
//! Indices are zero-based throughout: band `k` covers the half-open range
//! `start(k)..end(k)` of spectrum bins `0..n`. The boundary list stored in a
//! [`BandPlan`] holds the exclusive end of every band but the last, which is
//! the same list of numbers as the one-based inclusive upper bounds
//! `b_1 .. b_{K-1}`.

use std::ops::Range;

use num_complex::Complex;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cx_zero, Cx, Scalar};

/// Occupancy class of a band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Always occupied, every bin active.
    C1,
    /// Sometimes occupied, every bin active when it is.
    C2,
    /// Sometimes occupied, only some bins active when it is.
    C3,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::C1, Category::C2, Category::C3];
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BandPlanDoc {
    n: usize,
    boundaries: Vec<usize>,
    categories: Vec<Category>,
}

/// Fixed partition of `0..n` into `K` contiguous bands, each tagged with a
/// [`Category`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BandPlanDoc", into = "BandPlanDoc")]
pub struct BandPlan {
    n: usize,
    boundaries: Vec<usize>,
    categories: Vec<Category>,
    band_of: Vec<usize>,
}

impl TryFrom<BandPlanDoc> for BandPlan {
    type Error = Error;

    fn try_from(doc: BandPlanDoc) -> Result<Self> {
        BandPlan::new(doc.n, doc.boundaries, doc.categories)
    }
}

impl From<BandPlan> for BandPlanDoc {
    fn from(plan: BandPlan) -> Self {
        BandPlanDoc {
            n: plan.n,
            boundaries: plan.boundaries,
            categories: plan.categories,
        }
    }
}

impl BandPlan {
    /// Builds a plan from the interior band boundaries (exclusive band ends,
    /// strictly increasing, all inside `1..n`) and one category per band.
    pub fn new(n: usize, boundaries: Vec<usize>, categories: Vec<Category>) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n", "spectrum length must be positive"));
        }
        if categories.len() != boundaries.len() + 1 {
            return Err(Error::config(
                "categories",
                format!(
                    "{} boundaries define {} bands but {} categories were given",
                    boundaries.len(),
                    boundaries.len() + 1,
                    categories.len()
                ),
            ));
        }
        let mut prev = 0;
        for &b in &boundaries {
            if b <= prev || b >= n {
                return Err(Error::config(
                    "boundaries",
                    format!("boundary {b} breaks strict increase inside 1..{n}"),
                ));
            }
            prev = b;
        }
        let mut band_of = Vec::with_capacity(n);
        let mut start = 0;
        for (k, end) in boundaries.iter().copied().chain(std::iter::once(n)).enumerate() {
            band_of.extend(std::iter::repeat_n(k, end - start));
            start = end;
        }
        Ok(BandPlan {
            n,
            boundaries,
            categories,
            band_of,
        })
    }

    /// Builds a plan from consecutive `(size, category)` pairs.
    pub fn from_sizes(bands: &[(usize, Category)]) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::config("bands", "at least one band is required"));
        }
        if let Some(pos) = bands.iter().position(|&(size, _)| size == 0) {
            return Err(Error::config("bands", format!("band {pos} is empty")));
        }
        let mut boundaries = Vec::with_capacity(bands.len() - 1);
        let mut end = 0;
        for &(size, _) in &bands[..bands.len() - 1] {
            end += size;
            boundaries.push(end);
        }
        let n = end + bands[bands.len() - 1].0;
        BandPlan::new(n, boundaries, bands.iter().map(|&(_, c)| c).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of bands `K`.
    pub fn k(&self) -> usize {
        self.categories.len()
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn band(&self, k: usize) -> Range<usize> {
        let start = if k == 0 { 0 } else { self.boundaries[k - 1] };
        let end = self.boundaries.get(k).copied().unwrap_or(self.n);
        start..end
    }

    pub fn bands(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.k()).map(|k| self.band(k))
    }

    pub fn category(&self, k: usize) -> Category {
        self.categories[k]
    }

    /// Band containing spectrum index `i`.
    pub fn band_of(&self, i: usize) -> usize {
        self.band_of[i]
    }

    /// Band indices belonging to `category`, in spectrum order.
    pub fn bands_in(&self, category: Category) -> Vec<usize> {
        (0..self.k())
            .filter(|&k| self.categories[k] == category)
            .collect()
    }

    /// Spectrum indices covered by the bands of `category`, ascending.
    pub fn indices_in(&self, category: Category) -> Vec<usize> {
        self.bands_in(category)
            .into_iter()
            .flat_map(|k| self.band(k))
            .collect()
    }
}

/// Allocation used throughout the experiments: `N = 200`, `K = 41`.
///
/// Two C1 bands of sizes 2 and 3 open the spectrum, followed by the C2 and C3
/// bands (five bins each) alternating left to right until the six C3 bands
/// are placed; the remaining C2 bands fill the rest.
pub fn make_paper_band_plan() -> BandPlan {
    let mut bands = vec![(2, Category::C1), (3, Category::C1)];
    let (mut c2_left, mut c3_left) = (33, 6);
    while c2_left + c3_left > 0 {
        if c2_left > 0 {
            bands.push((5, Category::C2));
            c2_left -= 1;
        }
        if c3_left > 0 {
            bands.push((5, Category::C3));
            c3_left -= 1;
        }
    }
    BandPlan::from_sizes(&bands).expect("static layout is a valid partition")
}

/// Per-band binary occupancy, `true` meaning occupied.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupancyVector {
    #[serde(with = "bits")]
    flags: Vec<bool>,
}

impl OccupancyVector {
    pub fn new(flags: Vec<bool>) -> Self {
        OccupancyVector { flags }
    }

    pub fn empty(k: usize) -> Self {
        OccupancyVector {
            flags: vec![false; k],
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn get(&self, k: usize) -> bool {
        self.flags[k]
    }

    pub fn set(&mut self, k: usize, occupied: bool) {
        self.flags[k] = occupied;
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(k, &f)| f.then_some(k))
    }

    pub fn complement(&self) -> Self {
        OccupancyVector {
            flags: self.flags.iter().map(|f| !f).collect(),
        }
    }
}

mod bits {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(flags: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let bits: Vec<u8> = flags.iter().map(|&f| u8::from(f)).collect();
        bits.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let bits = Vec::<u8>::deserialize(d)?;
        bits.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(serde::de::Error::custom(format!(
                    "occupancy flag must be 0 or 1, got {other}"
                ))),
            })
            .collect()
    }
}

/// Number of occupied bands requested per category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupiedCounts {
    pub c1: usize,
    pub c2: usize,
    pub c3: usize,
}

impl OccupiedCounts {
    /// Two C1, two C2 and six C3 bands: ten occupied bands out of 41.
    pub const PAPER: OccupiedCounts = OccupiedCounts { c1: 2, c2: 2, c3: 6 };

    pub fn get(&self, category: Category) -> usize {
        match category {
            Category::C1 => self.c1,
            Category::C2 => self.c2,
            Category::C3 => self.c3,
        }
    }

    pub fn total(&self) -> usize {
        self.c1 + self.c2 + self.c3
    }

    pub fn of(plan: &BandPlan, occupancy: &OccupancyVector) -> Self {
        let mut counts = OccupiedCounts { c1: 0, c2: 0, c3: 0 };
        for k in occupancy.occupied() {
            match plan.category(k) {
                Category::C1 => counts.c1 += 1,
                Category::C2 => counts.c2 += 1,
                Category::C3 => counts.c3 += 1,
            }
        }
        counts
    }
}

/// Draws a ground-truth occupancy: every C1 band, plus the requested number
/// of C2 and C3 bands chosen uniformly without replacement.
pub fn generate_occupancy<R: Rng + ?Sized>(
    plan: &BandPlan,
    counts: OccupiedCounts,
    rng: &mut R,
) -> Result<OccupancyVector> {
    let c1_bands = plan.bands_in(Category::C1).len();
    if counts.c1 != c1_bands {
        return Err(Error::config(
            "occupied_counts.c1",
            format!("C1 bands are always occupied: expected {c1_bands}, got {}", counts.c1),
        ));
    }
    let mut occupancy = OccupancyVector::empty(plan.k());
    for category in Category::ALL {
        let members = plan.bands_in(category);
        let wanted = counts.get(category);
        if wanted > members.len() {
            return Err(Error::config(
                format!("occupied_counts.{}", format!("{category:?}").to_lowercase()),
                format!("{wanted} requested but the plan has {} such bands", members.len()),
            ));
        }
        if category == Category::C1 {
            members.iter().for_each(|&k| occupancy.set(k, true));
        } else {
            for pick in sample(rng, members.len(), wanted) {
                occupancy.set(members[pick], true);
            }
        }
    }
    Ok(occupancy)
}

/// Per-SU channel applied to every occupied band.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    /// Unit gain.
    None,
    /// Circularly-symmetric complex Gaussian gain with unit mean square,
    /// drawn once per SU per occupied band.
    #[default]
    Rayleigh,
}

/// Options for [`synthesize_spectra`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Synthesis {
    pub fading: FadingModel,
    /// Active bins in each occupied C3 band.
    pub c3_active_per_band: usize,
    /// Amplitude of every active bin before fading.
    pub amplitude: f64,
}

impl Default for Synthesis {
    fn default() -> Self {
        Synthesis {
            fading: FadingModel::Rayleigh,
            c3_active_per_band: 1,
            amplitude: 1.0,
        }
    }
}

/// Frequency-domain spectrum observed by one SU.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumVector<T: Scalar> {
    pub owner: usize,
    pub values: Vec<Cx<T>>,
}

impl<T: Scalar> SpectrumVector<T> {
    pub fn zeros(owner: usize, n: usize) -> Self {
        SpectrumVector {
            owner,
            values: vec![cx_zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices of the non-zero entries, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| (v.re != T::zero() || v.im != T::zero()).then_some(i))
            .collect()
    }

    pub fn sparsity(&self) -> usize {
        self.support().len()
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, std_per_component: f64) -> Complex<f64> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re * std_per_component, im * std_per_component)
}

pub(crate) fn complex_gaussian_t<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    std_per_component: f64,
) -> Cx<T> {
    let z = complex_gaussian(rng, std_per_component);
    Complex::new(T::lit(z.re), T::lit(z.im))
}

/// Synthesizes `j_users` spectra sharing one support.
///
/// Occupied C1/C2 bands are active on every bin; each occupied C3 band gets
/// `c3_active_per_band` bins chosen once and reused for every SU. Active bins
/// carry `amplitude` times a per-SU, per-band fading gain.
pub fn synthesize_spectra<T: Scalar, R: Rng + ?Sized>(
    plan: &BandPlan,
    occupancy: &OccupancyVector,
    j_users: usize,
    synthesis: &Synthesis,
    rng: &mut R,
) -> Result<Vec<SpectrumVector<T>>> {
    if j_users == 0 {
        return Err(Error::config("j", "at least one SU is required"));
    }
    if occupancy.len() != plan.k() {
        return Err(Error::input(format!(
            "occupancy has {} flags but the plan has {} bands",
            occupancy.len(),
            plan.k()
        )));
    }
    if synthesis.c3_active_per_band == 0 {
        return Err(Error::config("synthesis.c3_active_per_band", "must be at least 1"));
    }

    // Active bins of each occupied band, shared by all SUs.
    let mut active: Vec<(usize, Vec<usize>)> = Vec::with_capacity(occupancy.count());
    for k in occupancy.occupied() {
        let band = plan.band(k);
        let bins = match plan.category(k) {
            Category::C1 | Category::C2 => band.collect(),
            Category::C3 => {
                let width = band.len();
                let take = synthesis.c3_active_per_band;
                if width > 1 && take >= width {
                    return Err(Error::config(
                        "synthesis.c3_active_per_band",
                        format!("{take} active bins would fully occupy a C3 band of width {width}"),
                    ));
                }
                let mut picks: Vec<usize> = sample(rng, width, take.min(width))
                    .into_iter()
                    .map(|p| band.start + p)
                    .collect();
                picks.sort_unstable();
                picks
            }
        };
        active.push((k, bins));
    }

    let amplitude = T::lit(synthesis.amplitude);
    let mut spectra = Vec::with_capacity(j_users);
    for owner in 0..j_users {
        let mut s = SpectrumVector::zeros(owner, plan.n());
        for (_, bins) in &active {
            let gain: Cx<T> = match synthesis.fading {
                FadingModel::None => Complex::new(T::one(), T::zero()),
                FadingModel::Rayleigh => complex_gaussian_t(rng, std::f64::consts::FRAC_1_SQRT_2),
            };
            for &i in bins {
                s.values[i] = gain * amplitude;
            }
        }
        spectra.push(s);
    }
    Ok(spectra)
}

/// Ground truth of one simulated sensing window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTruth<T: Scalar> {
    pub plan: BandPlan,
    pub occupancy: OccupancyVector,
    pub occupied_counts: OccupiedCounts,
    pub spectra: Vec<SpectrumVector<T>>,
}

impl<T: Scalar> ScenarioTruth<T> {
    /// Draws occupancy then spectra from one stream.
    pub fn generate<R: Rng + ?Sized>(
        plan: &BandPlan,
        counts: OccupiedCounts,
        j_users: usize,
        synthesis: &Synthesis,
        rng: &mut R,
    ) -> Result<Self> {
        let occupancy = generate_occupancy(plan, counts, rng)?;
        let spectra = synthesize_spectra(plan, &occupancy, j_users, synthesis, rng)?;
        Ok(ScenarioTruth {
            plan: plan.clone(),
            occupied_counts: OccupiedCounts::of(plan, &occupancy),
            occupancy,
            spectra,
        })
    }

    /// Support shared by every spectrum; `None` if the SUs disagree.
    pub fn common_support(&self) -> Option<Vec<usize>> {
        let first = self.spectra.first()?.support();
        self.spectra
            .iter()
            .skip(1)
            .all(|s| s.support() == first)
            .then_some(first)
    }
}
