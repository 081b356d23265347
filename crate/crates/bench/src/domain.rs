//! Two-class synthetic domains and the feature-space shift that turns a
//! source domain into a target domain.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use rfda_core::data::{mix_seed, Dataset, Label};
use rfda_core::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Two Gaussian classes whose means differ in every coordinate pair.
    GaussianBlobs,
    /// Interleaved half-circles in each coordinate pair.
    TwoMoons,
    /// A positive disc inside a negative annulus in each coordinate pair.
    Ring,
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian-blobs" => Ok(Family::GaussianBlobs),
            "two-moons" => Ok(Family::TwoMoons),
            "ring" => Ok(Family::Ring),
            other => Err(format!("unknown generator family `{other}`")),
        }
    }
}

/// `v ↦ scale · R(v) + translation`, where `R` rotates every coordinate
/// pair `(2i, 2i + 1)` by the same angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub rotation_deg: f64,
    /// Padded with zeros up to the domain dimension.
    pub translation: Vec<f64>,
    pub scale: f64,
}

impl Default for Shift {
    fn default() -> Self {
        Self {
            rotation_deg: 0.0,
            translation: Vec::new(),
            scale: 1.0,
        }
    }
}

impl Shift {
    pub fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.scale == 1.0 && self.translation.iter().all(|t| *t == 0.0)
    }

    pub fn apply(&self, v: &mut [f64]) {
        let (sin, cos) = (self.rotation_deg * PI / 180.0).sin_cos();
        for pair in v.chunks_exact_mut(2) {
            let (a, b) = (pair[0], pair[1]);
            pair[0] = cos * a - sin * b;
            pair[1] = sin * a + cos * b;
        }
        for (i, x) in v.iter_mut().enumerate() {
            *x = self.scale * *x + self.translation.get(i).copied().unwrap_or(0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub family: Family,
    pub dim: usize,
    /// Fraction of positive samples.
    pub pos_prior: f64,
    /// Standard deviation of the Gaussian noise.
    pub noise: f64,
    /// Coordinate pairs that carry class signal, counted from the front;
    /// the rest is pure noise. `None` means every pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informative_pairs: Option<usize>,
    pub n_source: usize,
    pub n_target_train: usize,
    pub n_target_test: usize,
    pub shift: Shift,
    pub seed: u64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            family: Family::GaussianBlobs,
            dim: 8,
            pos_prior: 0.5,
            noise: 1.0,
            informative_pairs: None,
            n_source: 4000,
            n_target_train: 4000,
            n_target_test: 2000,
            shift: Shift::default(),
            seed: 0,
        }
    }
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.dim < 2 {
            return bad("domain dimension must be at least 2");
        }
        if self.n_source < 2 || self.n_target_train < 2 || self.n_target_test < 2 {
            return bad("every split needs at least two samples");
        }
        if !(self.pos_prior > 0.0 && self.pos_prior < 1.0) {
            return bad("pos_prior must lie in (0, 1)");
        }
        if self.informative_pairs.is_some_and(|k| k == 0 || 2 * k > self.dim) {
            return bad("informative_pairs must lie in [1, dim / 2]");
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return bad("noise must be positive");
        }
        if !(self.shift.scale > 0.0 && self.shift.scale.is_finite()) {
            return bad("shift scale must be positive");
        }
        if self.shift.translation.len() > self.dim {
            return bad("translation is longer than the domain dimension");
        }
        if !self.shift.rotation_deg.is_finite() || self.shift.translation.iter().any(|t| !t.is_finite()) {
            return bad("shift parameters must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub source: Dataset,
    pub target_train: Dataset,
    pub target_test: Dataset,
}

/// Draws the source split from the base distribution and both target
/// splits from the base distribution followed by the shift. Labels are
/// drawn before the shift, so the class posterior moves with the features.
pub fn generate_domain_pair(spec: &DomainSpec) -> Result<DomainPair> {
    spec.validate()?;
    let identity = Shift::default();
    Ok(DomainPair {
        source: draw(spec, spec.n_source, &identity, 1)?,
        target_train: draw(spec, spec.n_target_train, &spec.shift, 2)?,
        target_test: draw(spec, spec.n_target_test, &spec.shift, 3)?,
    })
}

fn draw(spec: &DomainSpec, n: usize, shift: &Shift, stream: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, stream));
    let n_pos = ((spec.pos_prior * n as f64).round() as usize).clamp(1, n - 1);
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_pos { Label::Pos } else { Label::Neg })
        .collect();
    labels.shuffle(&mut rng);
    let noise = Normal::new(0.0, spec.noise).expect("positive noise");
    let rows = labels
        .iter()
        .map(|&label| {
            let mut v = base_sample(spec, label, &noise, &mut rng);
            shift.apply(&mut v);
            v
        })
        .collect();
    Dataset::from_rows(rows, labels)
}

fn base_sample(spec: &DomainSpec, label: Label, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let pos = label.is_pos();
    let mut v: Vec<f64> = (0..spec.dim).map(|_| noise.sample(rng)).collect();
    let pairs = spec.informative_pairs.unwrap_or(spec.dim / 2);
    for pair in v.chunks_exact_mut(2).take(pairs) {
        let (x, y) = match spec.family {
            Family::GaussianBlobs => {
                let c = if pos { 1.0 } else { -1.0 };
                (c, c)
            }
            Family::TwoMoons => {
                let t = rng.random_range(0.0..PI);
                let (s, c) = t.sin_cos();
                if pos {
                    (2.0 * c, 2.0 * s - 0.5)
                } else {
                    (2.0 - 2.0 * c, 0.5 - 2.0 * s)
                }
            }
            Family::Ring => {
                let t = rng.random_range(0.0..2.0 * PI);
                let r = if pos { 0.0 } else { 3.0 };
                let (s, c) = t.sin_cos();
                (r * c, r * s)
            }
        };
        pair[0] += x;
        pair[1] += y;
    }
    v
}
