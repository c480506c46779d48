//! Paired samples `z_i = (x_i, y_i)`, their ingestion and generation, and the
//! split/shuffle step that turns half of a dependent sample into a draw from
//! the product of its marginals.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mst::Points;
use crate::rng::{stream_rng, STREAM_DATA, STREAM_SPLIT};
use crate::{Error, Result};

/// `n` joint samples stored row-major; each row is `dx` x-coordinates followed
/// by `dy` y-coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSampleSet {
    points: Vec<f64>,
    dx: usize,
    dy: usize,
}

impl PairedSampleSet {
    pub fn new(points: Vec<f64>, dx: usize, dy: usize) -> Result<Self> {
        if dx == 0 || dy == 0 {
            return Err(Error::InvalidParameter(format!(
                "dx and dy must be positive (got dx={dx}, dy={dy})"
            )));
        }
        let dim = dx + dy;
        if points.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {dim}",
                points.len()
            )));
        }
        let n = points.len() / dim;
        if n == 0 {
            return Err(Error::Empty);
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                line: (pos / dim) as u64 + 1,
                column: pos % dim + 1,
            });
        }
        Ok(Self { points, dx, dy })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], dx: usize, dy: usize) -> Result<Self> {
        let mut points = Vec::with_capacity(rows.len() * (dx + dy));
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dx + dy {
                return Err(Error::Shape(format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    dx + dy
                )));
            }
            points.extend_from_slice(row);
        }
        Self::new(points, dx, dy)
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.dim()
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn dim(&self) -> usize {
        self.dx + self.dy
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.row(i)[..self.dx]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.row(i)[self.dx..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn points(&self) -> Points<'_> {
        Points::new_unchecked(&self.points, self.dim())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.points
    }

    /// Builds a new set whose k-th row is `(x_{pairs[k].0}, y_{pairs[k].1})`.
    pub fn recombine(&self, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut points = Vec::with_capacity(pairs.len() * self.dim());
        for &(xi, yi) in pairs {
            points.extend_from_slice(self.x(xi));
            points.extend_from_slice(self.y(yi));
        }
        Self::new(points, self.dx, self.dy)
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let pairs: Vec<_> = rows.iter().map(|&r| (r, r)).collect();
        self.recombine(&pairs)
    }
}

/// Reads a headerless-or-headed CSV of samples: `dx` x-coordinates then `dy`
/// y-coordinates per line.
pub fn load_csv(path: impl AsRef<Path>, dx: usize, dy: usize) -> Result<PairedSampleSet> {
    if dx == 0 || dy == 0 {
        return Err(Error::InvalidParameter(format!(
            "dx and dy must be positive (got dx={dx}, dy={dy})"
        )));
    }
    let (values, _) = read_matrix(path.as_ref(), Some(dx + dy))?;
    PairedSampleSet::new(values, dx, dy)
}

/// Reads a numeric CSV of arbitrary width (inferred from the first data row).
/// Returns the row-major values and the column count.
pub fn load_points_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, usize)> {
    read_matrix(path.as_ref(), None)
}

fn read_matrix(path: &Path, width: Option<usize>) -> Result<(Vec<f64>, usize)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values = Vec::new();
    let mut width = width;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        // A leading row with no numeric field at all is a header.
        if first && record.iter().all(|f| f.parse::<f64>().is_err()) {
            first = false;
            continue;
        }
        first = false;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                line,
                column: record.len().min(expected) + 1,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: c + 1,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { line, column: c + 1 });
            }
            values.push(v);
        }
    }
    match width {
        Some(w) if !values.is_empty() => Ok((values, w)),
        _ => Err(Error::Empty),
    }
}

/// Zero-mean Gaussian with unit variances and common pairwise correlation
/// `rho` across all `dx + dy` coordinates. For `dx = dy = 1` this is the
/// bivariate normal with correlation matrix `[[1, rho], [rho, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub dx: usize,
    pub dy: usize,
    pub rho: f64,
    pub n: usize,
    pub seed: u64,
}

impl GaussianSpec {
    /// Standard normal in `d` dimensions split into `X` = first `d/2`
    /// coordinates and `Y` = the rest.
    pub fn standard(d: usize, n: usize, seed: u64) -> Self {
        Self::split(d, 0.0, n, seed)
    }

    pub fn split(d: usize, rho: f64, n: usize, seed: u64) -> Self {
        Self {
            dx: d / 2,
            dy: d - d / 2,
            rho,
            n,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.dx + self.dy
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        equicorrelation(self.dim(), self.rho)
    }
}

pub(crate) fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

/// Lower Cholesky factor, or [`Error::NotPositiveDefinite`].
pub(crate) fn cholesky_lower(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    cov.cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

pub fn generate_gaussian(spec: &GaussianSpec) -> Result<PairedSampleSet> {
    if spec.dx == 0 || spec.dy == 0 {
        return Err(Error::InvalidParameter(
            "Gaussian spec needs dx >= 1 and dy >= 1".into(),
        ));
    }
    if spec.n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples, got {}",
            spec.n
        )));
    }
    let d = spec.dim();
    let chol = cholesky_lower(spec.covariance())?;
    let mut rng = stream_rng(spec.seed, STREAM_DATA);
    let mut points = Vec::with_capacity(spec.n * d);
    let mut z = DVector::<f64>::zeros(d);
    for _ in 0..spec.n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if spec.rho == 0.0 {
            points.extend(z.iter());
        } else {
            points.extend((&chol * &z).iter());
        }
    }
    PairedSampleSet::new(points, spec.dx, spec.dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleMode {
    /// One uniform random permutation of the y-blocks of the second subset.
    #[default]
    Permutation,
    /// Each shuffled row takes an x-block and a y-block drawn independently
    /// and uniformly, with replacement, from the second subset.
    IndependentDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitShuffleConfig {
    pub alpha: f64,
    pub seed: u64,
    pub shuffle_mode: ShuffleMode,
}

impl SplitShuffleConfig {
    pub fn new(alpha: f64, seed: u64) -> Self {
        Self {
            alpha,
            seed,
            shuffle_mode: ShuffleMode::default(),
        }
    }

    pub fn with_mode(mut self, mode: ShuffleMode) -> Self {
        self.shuffle_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `(n', n'')` for a sample of size `n`, with `n' = round(alpha * n)`
    /// rounding halves up.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize)> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let n_prime = (self.alpha * n as f64 + 0.5).floor() as usize;
        let n_prime = n_prime.min(n);
        let n_dprime = n - n_prime;
        if n_prime < 2 || n_dprime < 2 {
            return Err(Error::DegenerateSplit { n_prime, n_dprime });
        }
        Ok((n_prime, n_dprime))
    }
}

/// The random choices of one split/shuffle, as row indices into the original
/// sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    /// Rows forming the unshuffled subset `Z'`.
    pub first: Vec<usize>,
    /// Rows forming `Z''` before shuffling.
    pub second: Vec<usize>,
    /// `(x-row, y-row)` of each shuffled sample; both index the original
    /// sample and are drawn from `second`.
    pub pairs: Vec<(usize, usize)>,
}

impl SplitPlan {
    pub fn draw(n: usize, cfg: &SplitShuffleConfig) -> Result<Self> {
        let (n_prime, n_dprime) = cfg.sizes(n)?;
        let mut rng = stream_rng(cfg.seed, STREAM_SPLIT);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let second = order.split_off(n_prime);
        let first = order;
        let pairs = match cfg.shuffle_mode {
            ShuffleMode::Permutation => {
                let mut ys = second.clone();
                ys.shuffle(&mut rng);
                second.iter().copied().zip(ys).collect()
            }
            ShuffleMode::IndependentDraw => (0..n_dprime)
                .map(|_| {
                    let i = second[rng.random_range(0..n_dprime)];
                    let j = second[rng.random_range(0..n_dprime)];
                    (i, j)
                })
                .collect(),
        };
        Ok(Self {
            first,
            second,
            pairs,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSample {
    pub first: PairedSampleSet,
    pub shuffled: PairedSampleSet,
}

pub fn split_and_shuffle(data: &PairedSampleSet, cfg: &SplitShuffleConfig) -> Result<SplitSample> {
    let plan = SplitPlan::draw(data.n(), cfg)?;
    Ok(SplitSample {
        first: data.select(&plan.first)?,
        shuffled: data.recombine(&plan.pairs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn correlation(data: &PairedSampleSet) -> f64 {
        let n = data.n() as f64;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..data.n() {
            let (x, y) = (data.x(i)[0], data.y(i)[0]);
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let cov = sxy / n - sx * sy / n / n;
        cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt()
    }

    #[test]
    fn load_three_rows() {
        let f = write_tmp("0,0\n1,1\n2,2\n");
        let data = load_csv(f.path(), 1, 1).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.as_slice(), &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn load_with_header() {
        let f = write_tmp("x,y\n0,0\n1,1\n");
        let data = load_csv(f.path(), 1, 1).unwrap();
        assert_eq!(data.n(), 2);
    }

    #[test]
    fn load_empty_file_fails() {
        let f = write_tmp("");
        assert!(matches!(load_csv(f.path(), 1, 1), Err(Error::Empty)));
    }

    #[test]
    fn load_rejects_nan() {
        let f = write_tmp("0,0\n1,NaN\n");
        match load_csv(f.path(), 1, 1) {
            Err(Error::NonFinite { line, column }) => assert_eq!((line, column), (2, 2)),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn load_reports_bad_field_location() {
        let f = write_tmp("0,0\n1,1\n2,oops\n");
        match load_csv(f.path(), 1, 1) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_wrong_width() {
        let f = write_tmp("0,0,0\n1,1,1\n");
        assert!(matches!(load_csv(f.path(), 1, 1), Err(Error::Parse { .. })));
    }

    #[test]
    fn load_missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", 1, 1),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn gaussian_independent_correlation() {
        let data = generate_gaussian(&GaussianSpec::split(2, 0.0, 100_000, 11)).unwrap();
        assert!(correlation(&data).abs() < 0.02);
    }

    #[test]
    fn gaussian_correlated() {
        let data = generate_gaussian(&GaussianSpec::split(2, 0.9, 100_000, 12)).unwrap();
        assert!((correlation(&data) - 0.9).abs() < 0.02);
    }

    #[test]
    fn gaussian_is_deterministic() {
        let spec = GaussianSpec::split(4, 0.3, 500, 99);
        assert_eq!(generate_gaussian(&spec).unwrap(), generate_gaussian(&spec).unwrap());
        let other = GaussianSpec { seed: 100, ..spec };
        assert_ne!(generate_gaussian(&spec).unwrap(), generate_gaussian(&other).unwrap());
    }

    #[test]
    fn gaussian_rejects_indefinite_covariance() {
        // Equicorrelation is positive definite only for rho > -1/(d-1).
        let spec = GaussianSpec::split(4, -0.5, 10, 0);
        assert!(matches!(generate_gaussian(&spec), Err(Error::NotPositiveDefinite)));
        let spec = GaussianSpec::split(2, 1.0, 10, 0);
        assert!(matches!(generate_gaussian(&spec), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn split_sizes() {
        let cfg = SplitShuffleConfig::new(0.3, 0);
        assert_eq!(cfg.sizes(1000).unwrap(), (300, 700));
        // Half rounds up.
        assert_eq!(SplitShuffleConfig::new(0.5, 0).sizes(5).unwrap(), (3, 2));
        assert!(matches!(
            SplitShuffleConfig::new(0.1, 0).sizes(10),
            Err(Error::DegenerateSplit { n_prime: 1, n_dprime: 9 })
        ));
        assert!(SplitShuffleConfig::new(0.0, 0).sizes(10).is_err());
        assert!(SplitShuffleConfig::new(1.0, 0).sizes(10).is_err());
    }

    #[test]
    fn split_is_partition() {
        for mode in [ShuffleMode::Permutation, ShuffleMode::IndependentDraw] {
            let cfg = SplitShuffleConfig::new(0.4, 5).with_mode(mode);
            let plan = SplitPlan::draw(50, &cfg).unwrap();
            let mut all: Vec<_> = plan.first.iter().chain(&plan.second).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..50).collect::<Vec<_>>());
            assert_eq!(plan.first.len(), 20);
            assert_eq!(plan.pairs.len(), 30);
            for &(i, j) in &plan.pairs {
                assert!(plan.second.contains(&i) && plan.second.contains(&j));
            }
        }
    }

    #[test]
    fn permutation_preserves_y_multiset() {
        let rows: Vec<[f64; 2]> = (0..4).map(|i| [i as f64, 10.0 + i as f64]).collect();
        let data = PairedSampleSet::from_rows(&rows, 1, 1).unwrap();
        let cfg = SplitShuffleConfig::new(0.5, 3);
        let plan = SplitPlan::draw(4, &cfg).unwrap();
        let out = split_and_shuffle(&data, &cfg).unwrap();
        let mut ys: Vec<f64> = (0..2).map(|k| out.shuffled.y(k)[0]).collect();
        let mut expect: Vec<f64> = plan.second.iter().map(|&r| data.y(r)[0]).collect();
        ys.sort_by(f64::total_cmp);
        expect.sort_by(f64::total_cmp);
        assert_eq!(ys, expect);
        let mut xs: Vec<f64> = (0..2).map(|k| out.shuffled.x(k)[0]).collect();
        let mut expect: Vec<f64> = plan.second.iter().map(|&r| data.x(r)[0]).collect();
        xs.sort_by(f64::total_cmp);
        expect.sort_by(f64::total_cmp);
        assert_eq!(xs, expect);
    }

    #[test]
    fn independent_draw_pair_frequencies() {
        // n'' = 2: every (x_i, y_j) combination of the second subset should
        // appear with probability 1/n''^2 = 1/4.
        let seeds = 100_000u64;
        let mut counts = [0u64; 4];
        let mut total = 0u64;
        for seed in 0..seeds {
            let cfg = SplitShuffleConfig::new(0.5, seed).with_mode(ShuffleMode::IndependentDraw);
            let plan = SplitPlan::draw(4, &cfg).unwrap();
            let pos = |r: usize| plan.second.iter().position(|&s| s == r).unwrap();
            for &(i, j) in &plan.pairs {
                counts[pos(i) * 2 + pos(j)] += 1;
                total += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / total as f64;
            // 4.5 binomial standard deviations at 2e5 draws.
            assert!((freq - 0.25).abs() < 0.005, "frequency {freq}");
        }
    }

    #[test]
    fn split_is_deterministic() {
        let data = generate_gaussian(&GaussianSpec::standard(4, 100, 1)).unwrap();
        let cfg = SplitShuffleConfig::new(0.5, 42);
        assert_eq!(
            split_and_shuffle(&data, &cfg).unwrap(),
            split_and_shuffle(&data, &cfg).unwrap()
        );
    }
}
