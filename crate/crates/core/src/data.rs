//! Samples, datasets and random feature selectors.

use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Binary class label, serialized as `+1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(value: i8) -> std::result::Result<Self, String> {
        match value {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pos => "1",
            Label::Neg => "-1",
        })
    }
}

/// A dense feature vector with its class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    features: Vec<f64>,
    label: Label,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        if features.is_empty() {
            return Err(invalid("sample has no features"));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sample features"));
        }
        Ok(Self { features, label })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> Label {
        self.label
    }
}

/// Positive/negative class counts of a sample set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub pos: usize,
    pub neg: usize,
}

impl ClassCounts {
    pub fn new(pos: usize, neg: usize) -> Self {
        Self { pos, neg }
    }

    pub fn total(&self) -> usize {
        self.pos + self.neg
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::Pos => self.pos += 1,
            Label::Neg => self.neg += 1,
        }
    }

    pub fn has_both(&self) -> bool {
        self.pos > 0 && self.neg > 0
    }

    /// Fraction of the majority class; 0 for an empty set.
    pub fn majority_fraction(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.pos.max(self.neg) as f64 / self.total() as f64
    }

    /// Laplace-smoothed positive fraction `(pos + 1) / (n + 2)`.
    pub fn smoothed_posterior(&self) -> f64 {
        (self.pos as f64 + 1.0) / (self.total() as f64 + 2.0)
    }
}

/// A list of samples sharing one feature dimension. May be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<LabeledSample>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dataset dimension must be positive"));
        }
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: s.features.len(),
                });
            }
        }
        Ok(Self { dim, samples })
    }

    /// Builds a dataset from parallel feature rows and labels.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(invalid("row and label counts differ"));
        }
        let dim = rows.first().map(Vec::len).ok_or_else(|| invalid("no rows"))?;
        let samples = rows
            .into_iter()
            .zip(labels)
            .map(|(f, l)| LabeledSample::new(f, l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &LabeledSample {
        &self.samples[i]
    }

    pub fn counts(&self) -> ClassCounts {
        self.counts_of(0..self.len())
    }

    pub fn counts_of(&self, idx: impl IntoIterator<Item = usize>) -> ClassCounts {
        let mut c = ClassCounts::default();
        for i in idx {
            c.add(self.samples[i].label);
        }
        c
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.dim,
            });
        }
        Ok(())
    }

    /// Loads a labeled CSV: first column is the label (`1`/`-1`, or `1`/`0`
    /// with `0` read as negative), the rest are features. A header row is
    /// detected by a non-numeric first cell.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim: Option<usize> = None;
        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let first = rec.get(0).unwrap_or("");
            if row == 1 && first.parse::<f64>().is_err() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { row, message };
            let label = match first.parse::<f64>() {
                Ok(x) if x == 1.0 => Label::Pos,
                Ok(x) if x == -1.0 || x == 0.0 => Label::Neg,
                _ => return Err(parse_err(format!("invalid label {first:?}"))),
            };
            let features = rec
                .iter()
                .skip(1)
                .map(|c| {
                    c.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| parse_err(format!("invalid feature value {c:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if features.is_empty() {
                return Err(parse_err("row has no features".into()));
            }
            match dim {
                None => dim = Some(features.len()),
                Some(d) if d != features.len() => {
                    return Err(parse_err(format!(
                        "ragged row: expected {d} features, found {}",
                        features.len()
                    )))
                }
                _ => {}
            }
            samples.push(LabeledSample { features, label });
        }
        let dim = dim.ok_or_else(|| invalid("CSV contains no data rows"))?;
        Self::new(dim, samples)
    }

    /// Writes the dataset in the loader's format (no header, `1`/`-1` labels).
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.samples {
            let mut rec = Vec::with_capacity(self.dim + 1);
            rec.push(s.label.to_string());
            rec.extend(s.features.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// An increasing set of feature indices: the "local" view a node expert sees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FeatureSelector {
    indices: Vec<usize>,
}

impl FeatureSelector {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("selector must be nonempty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("selector indices must be strictly increasing"));
        }
        Ok(Self { indices })
    }

    /// Contiguous block `start..start + len`.
    pub fn block(start: usize, len: usize) -> Result<Self> {
        Self::new((start..start + len).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn max_index(&self) -> usize {
        *self.indices.last().expect("nonempty selector")
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if self.max_index() >= dim {
            return Err(Error::DimensionMismatch {
                expected: self.max_index() + 1,
                actual: dim,
            });
        }
        Ok(())
    }

    /// The sub-vector of `v` at the selector's indices.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        Ok(self.indices.iter().map(|&i| v[i]).collect())
    }

    /// `w · v[indices]` without materializing the projection. The caller
    /// guarantees the indices are in range.
    pub(crate) fn dot(&self, weights: &[f64], v: &[f64]) -> f64 {
        self.indices.iter().zip(weights).map(|(&i, w)| w * v[i]).sum()
    }
}

impl TryFrom<Vec<usize>> for FeatureSelector {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureSelector> for Vec<usize> {
    fn from(s: FeatureSelector) -> Vec<usize> {
        s.indices
    }
}

/// Applies `selector` to `v`; see [`FeatureSelector::apply`].
pub fn apply_selector(selector: &FeatureSelector, v: &[f64]) -> Result<Vec<f64>> {
    selector.apply(v)
}

/// Length of the blocks drawn by [`sample_selectors`].
pub fn block_len(dim: usize, block_fraction: f64) -> usize {
    // guard against products like 0.3 * 10 landing a hair above an integer
    let raw = block_fraction * dim as f64;
    let len = (raw - raw.abs() * 1e-12).ceil();
    (len.max(0.0) as usize).min(dim)
}

/// Draws `count` uniformly random contiguous blocks of length
/// `ceil(block_fraction * dim)`.
pub fn sample_selectors(
    dim: usize,
    count: usize,
    block_fraction: f64,
    seed: u64,
) -> Result<Vec<FeatureSelector>> {
    if dim == 0 || count == 0 {
        return Err(invalid("dim and selector count must be positive"));
    }
    if !(block_fraction > 0.0 && block_fraction <= 1.0) {
        return Err(invalid(format!(
            "block fraction must lie in (0, 1], got {block_fraction}"
        )));
    }
    let len = block_len(dim, block_fraction);
    if len == 0 {
        return Err(invalid("block fraction yields an empty block"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let start = rng.random_range(0..=dim - len);
            FeatureSelector::block(start, len)
        })
        .collect()
}

/// SplitMix64 finalizer; derives independent child seeds from a base seed.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn apply_selector_examples() {
        let v = [3.0, 1.0, 4.0];
        let s = |i: Vec<usize>| FeatureSelector::new(i).unwrap();
        assert_eq!(
            apply_selector(&s(vec![0, 1, 2]), &v).unwrap(),
            vec![3.0, 1.0, 4.0]
        );
        assert_eq!(apply_selector(&s(vec![1]), &v).unwrap(), vec![1.0]);
        assert_eq!(apply_selector(&s(vec![0, 2]), &v).unwrap(), vec![3.0, 4.0]);
        assert!(matches!(
            apply_selector(&s(vec![3]), &v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn selector_rejects_bad_indices() {
        assert!(FeatureSelector::new(vec![]).is_err());
        assert!(FeatureSelector::new(vec![2, 1]).is_err());
        assert!(FeatureSelector::new(vec![1, 1]).is_err());
    }

    #[test]
    fn full_fraction_gives_full_blocks() {
        let sel = sample_selectors(10, 3, 1.0, 0).unwrap();
        assert_eq!(sel.len(), 3);
        for s in sel {
            assert_eq!(s.indices(), (0..10).collect::<Vec<_>>().as_slice());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_selectors(10, 5, 0.3, 7).unwrap();
        let b = sample_selectors(10, 5, 0.3, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.len() == 3));
    }

    #[test]
    fn block_starts_are_valid() {
        let valid_starts: Vec<usize> = (0..=80).collect();
        for s in sample_selectors(100, 50, 0.2, 11).unwrap() {
            assert_eq!(s.len(), 20);
            assert!(valid_starts.contains(&s.indices()[0]));
            assert_eq!(s.indices()[19], s.indices()[0] + 19);
        }
    }

    #[test]
    fn sampling_rejects_zero_arguments() {
        assert!(sample_selectors(0, 3, 0.5, 0).is_err());
        assert!(sample_selectors(3, 0, 0.5, 0).is_err());
        assert!(sample_selectors(3, 3, 0.0, 0).is_err());
    }

    #[test]
    fn csv_loader_handles_header_and_zero_labels() {
        let text = "label,a,b\n1,0.5,2\n0,1,3\n-1,2,2.5\n";
        let d = Dataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.len(), 3);
        assert_eq!(d.get(1).label(), Label::Neg);
        assert_eq!(d.counts(), ClassCounts::new(1, 2));
    }

    #[test]
    fn csv_loader_reports_ragged_row() {
        let text = "1,0.5,2\n-1,1\n";
        match Dataset::from_csv_reader(text.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "1,0.5\n2,1\n";
        assert!(matches!(
            Dataset::from_csv_reader(text.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::from_rows(
            vec![vec![0.1, -2.5], vec![1e-17, 3.0]],
            vec![Label::Pos, Label::Neg],
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::from_csv_reader(buf.as_slice()).unwrap(), d);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn selectors_satisfy_invariants(dim in 1usize..200, k in 1usize..20, frac in 0.001f64..=1.0, seed: u64) {
            let sel = sample_selectors(dim, k, frac, seed).unwrap();
            prop_assert_eq!(sel.len(), k);
            let len = block_len(dim, frac);
            for s in &sel {
                prop_assert_eq!(s.len(), len);
                prop_assert!(s.max_index() < dim);
                prop_assert!(s.indices().windows(2).all(|w| w[1] == w[0] + 1));
            }
            prop_assert_eq!(sel, sample_selectors(dim, k, frac, seed).unwrap());
        }

        #[test]
        fn apply_length_matches_selector(v in proptest::collection::vec(-10.0f64..10.0, 1..30), seed: u64) {
            let s = sample_selectors(v.len(), 1, 0.5, seed).unwrap().remove(0);
            prop_assert_eq!(s.apply(&v).unwrap().len(), s.len());
        }
    }
}
