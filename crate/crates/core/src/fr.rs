//! Friedman-Rafsky estimator of the GMI.
//!
//! The sample is split into `Z'` (kept as is) and `Z''`, whose y-blocks are
//! re-paired at random so it behaves like a draw from `f_X f_Y`. An MST over
//! `Z' ∪ shuffled(Z'')` is built and its bichromatic edges counted:
//!
//! ```text
//! Î = 1 - R * (n' + n'') / (2 n' n'')   ->   I_α(X; Y)  with α = n'/n
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mst::{build_mst, MstBackend, Points, SpanningTree};
use crate::samples::{PairedSampleSet, SplitPlan, SplitShuffleConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrStatistic {
    /// Number of tree edges joining the two groups.
    pub r: usize,
    pub n1: usize,
    pub n2: usize,
}

/// Counts the bichromatic edges of `tree` under `labels`.
pub fn fr_statistic(tree: &SpanningTree, labels: &[Label]) -> Result<FrStatistic> {
    if labels.len() != tree.n_points() {
        return Err(Error::Shape(format!(
            "{} labels for a tree over {} points",
            labels.len(),
            tree.n_points()
        )));
    }
    let n1 = labels.iter().filter(|&&l| l == Label::First).count();
    let n2 = labels.len() - n1;
    if n1 == 0 || n2 == 0 {
        return Err(Error::SingleGroup);
    }
    let r = tree
        .edges
        .iter()
        .filter(|e| labels[e.i] != labels[e.j])
        .count();
    Ok(FrStatistic { r, n1, n2 })
}

impl FrStatistic {
    /// `1 - r (n1 + n2) / (2 n1 n2)`.
    pub fn gmi(&self) -> f64 {
        let (n1, n2) = (self.n1 as f64, self.n2 as f64);
        1.0 - self.r as f64 * (n1 + n2) / (2.0 * n1 * n2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmiEstimate {
    pub value: f64,
    pub alpha: f64,
    pub r: usize,
    pub n_prime: usize,
    pub n_dprime: usize,
    pub seed: u64,
    /// Whether `value` was truncated into `[0, 1]`.
    pub clamped: bool,
}

impl GmiEstimate {
    /// The unclamped estimate.
    pub fn raw(&self) -> f64 {
        FrStatistic {
            r: self.r,
            n1: self.n_prime,
            n2: self.n_dprime,
        }
        .gmi()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub clamp: bool,
    pub backend: MstBackend,
}

/// Runs the full split → shuffle → MST → count pipeline once.
pub fn estimate_gmi(
    data: &PairedSampleSet,
    cfg: &SplitShuffleConfig,
    clamp: bool,
) -> Result<GmiEstimate> {
    estimate_gmi_with(
        data,
        cfg,
        &EstimateOptions {
            clamp,
            ..Default::default()
        },
    )
}

pub fn estimate_gmi_with(
    data: &PairedSampleSet,
    cfg: &SplitShuffleConfig,
    opts: &EstimateOptions,
) -> Result<GmiEstimate> {
    let plan = SplitPlan::draw(data.n(), cfg)?;
    let (pooled, labels) = pool(data, &plan);
    let tree = build_mst(&Points::new_unchecked(&pooled, data.dim()), opts.backend)?;
    let stat = fr_statistic(&tree, &labels)?;
    let raw = stat.gmi();
    Ok(GmiEstimate {
        value: if opts.clamp { raw.clamp(0.0, 1.0) } else { raw },
        alpha: cfg.alpha,
        r: stat.r,
        n_prime: stat.n1,
        n_dprime: stat.n2,
        seed: cfg.seed,
        clamped: opts.clamp,
    })
}

/// `Z'` rows followed by the shuffled rows, with their group labels.
fn pool(data: &PairedSampleSet, plan: &SplitPlan) -> (Vec<f64>, Vec<Label>) {
    let total = plan.first.len() + plan.pairs.len();
    let mut pooled = Vec::with_capacity(total * data.dim());
    for &r in &plan.first {
        pooled.extend_from_slice(data.row(r));
    }
    for &(xi, yi) in &plan.pairs {
        pooled.extend_from_slice(data.x(xi));
        pooled.extend_from_slice(data.y(yi));
    }
    let mut labels = vec![Label::First; plan.first.len()];
    labels.resize(total, Label::Second);
    (pooled, labels)
}

/// Mean, mean squared error against a reference, and standard error of the
/// mean for a batch of estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub mse: f64,
    pub std_error: f64,
    pub count: usize,
}

impl Summary {
    pub fn from_values(values: &[f64], truth: f64) -> Self {
        let k = values.len();
        if k == 0 {
            return Self {
                mean: f64::NAN,
                mse: f64::NAN,
                std_error: f64::NAN,
                count: 0,
            };
        }
        let kf = k as f64;
        let mean = values.iter().sum::<f64>() / kf;
        let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / kf;
        let std_error = if k > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0);
            (var / kf).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            mse,
            std_error,
            count: k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub estimates: Vec<GmiEstimate>,
    pub truth: f64,
    pub summary: Summary,
}

/// Runs `trials` independent estimates. Trial `t` uses seed `cfg.seed + t`
/// both for its data (passed to `generator`) and for its split.
pub fn estimate_gmi_trials<G>(
    generator: G,
    cfg: &SplitShuffleConfig,
    opts: &EstimateOptions,
    trials: usize,
    truth: f64,
) -> Result<TrialSummary>
where
    G: Fn(u64) -> Result<PairedSampleSet> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let estimates = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_add(t);
            let data = generator(seed)?;
            estimate_gmi_with(&data, &cfg.with_seed(seed), opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    Ok(TrialSummary {
        summary: Summary::from_values(&values, truth),
        estimates,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mst::{mst_quadratic, Edge};
    use crate::samples::{generate_gaussian, GaussianSpec, ShuffleMode};

    fn path_tree(n: usize) -> SpanningTree {
        SpanningTree {
            edges: (0..n - 1).map(|i| Edge { i, j: i + 1, w: 1.0 }).collect(),
            total_weight: (n - 1) as f64,
        }
    }

    #[test]
    fn two_clusters_one_bridge() {
        let eps = 1e-3;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for k in 0..5 {
            data.push(-eps + k as f64 * eps / 2.0);
            labels.push(Label::First);
            data.push(100.0 - eps + k as f64 * eps / 2.0);
            labels.push(Label::Second);
        }
        let tree = mst_quadratic(&Points::new(&data, 1).unwrap()).unwrap();
        let stat = fr_statistic(&tree, &labels).unwrap();
        assert_eq!(stat, FrStatistic { r: 1, n1: 5, n2: 5 });
    }

    #[test]
    fn alternating_labels_on_unit_path() {
        let data: Vec<f64> = (0..6).map(f64::from).collect();
        let tree = mst_quadratic(&Points::new(&data, 1).unwrap()).unwrap();
        assert_eq!(tree, path_tree(6));
        let labels: Vec<Label> = (0..6)
            .map(|i| if i % 2 == 0 { Label::First } else { Label::Second })
            .collect();
        assert_eq!(fr_statistic(&tree, &labels).unwrap().r, 5);
    }

    #[test]
    fn label_errors() {
        let tree = path_tree(4);
        assert!(matches!(
            fr_statistic(&tree, &[Label::First; 4]),
            Err(Error::SingleGroup)
        ));
        assert!(matches!(
            fr_statistic(&tree, &[Label::First, Label::Second]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn formula_identity_and_range() {
        let data = generate_gaussian(&GaussianSpec::split(4, 0.5, 300, 3)).unwrap();
        for seed in 0..20 {
            let cfg = SplitShuffleConfig::new(0.3, seed);
            let est = estimate_gmi(&data, &cfg, false).unwrap();
            let (a, b) = (est.n_prime as f64, est.n_dprime as f64);
            let factor = (a + b) / (2.0 * a * b);
            assert!((est.value + est.r as f64 * factor - 1.0).abs() < 1e-12);
            assert!(est.value <= 1.0 - factor);
            assert_eq!((est.n_prime, est.n_dprime), (90, 210));
            assert!(est.r >= 1);
        }
    }

    #[test]
    fn clamping() {
        // Independent data gives negative raw estimates about half the time.
        let data = generate_gaussian(&GaussianSpec::standard(2, 200, 9)).unwrap();
        let mut saw_negative = false;
        for seed in 0..40 {
            let cfg = SplitShuffleConfig::new(0.5, seed);
            let raw = estimate_gmi(&data, &cfg, false).unwrap();
            let clamped = estimate_gmi(&data, &cfg, true).unwrap();
            assert!(clamped.clamped && !raw.clamped);
            assert_eq!(clamped.value, raw.value.clamp(0.0, 1.0));
            assert_eq!(clamped.raw(), raw.value);
            saw_negative |= raw.value < 0.0;
        }
        assert!(saw_negative);
    }

    #[test]
    fn degenerate_split_propagates() {
        let data = generate_gaussian(&GaussianSpec::standard(2, 5, 0)).unwrap();
        assert!(matches!(
            estimate_gmi(&data, &SplitShuffleConfig::new(0.1, 0), false),
            Err(Error::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn deterministic_and_backend_independent() {
        let data = generate_gaussian(&GaussianSpec::split(3, 0.4, 700, 5)).unwrap();
        let cfg = SplitShuffleConfig::new(0.5, 17).with_mode(ShuffleMode::IndependentDraw);
        let q = EstimateOptions {
            backend: MstBackend::Quadratic,
            ..Default::default()
        };
        let t = EstimateOptions {
            backend: MstBackend::DualTree,
            ..Default::default()
        };
        let a = estimate_gmi_with(&data, &cfg, &q).unwrap();
        assert_eq!(a, estimate_gmi_with(&data, &cfg, &q).unwrap());
        assert_eq!(a, estimate_gmi_with(&data, &cfg, &t).unwrap());
    }

    #[test]
    fn summary_arithmetic() {
        let s = Summary::from_values(&[0.0, 0.0, 0.0], 0.0);
        assert_eq!((s.mean, s.mse, s.std_error), (0.0, 0.0, 0.0));
        let s = Summary::from_values(&[0.1, -0.2, 0.4], 0.05);
        let expect = ((0.05f64).powi(2) + (0.25f64).powi(2) + (0.35f64).powi(2)) / 3.0;
        assert!((s.mse - expect).abs() < 1e-15);
        assert!((s.mean - 0.1).abs() < 1e-15);
        let s = Summary::from_values(&[0.3], 0.0);
        assert!((s.mse - 0.09).abs() < 1e-15);
    }

    #[test]
    fn trials_use_consecutive_seeds() {
        let gen = |seed| generate_gaussian(&GaussianSpec::standard(2, 100, seed));
        let cfg = SplitShuffleConfig::new(0.5, 40);
        let out = estimate_gmi_trials(gen, &cfg, &EstimateOptions::default(), 3, 0.0).unwrap();
        let seeds: Vec<u64> = out.estimates.iter().map(|e| e.seed).collect();
        assert_eq!(seeds, vec![40, 41, 42]);
        let values: Vec<f64> = out.estimates.iter().map(|e| e.value).collect();
        assert_eq!(out.summary, Summary::from_values(&values, 0.0));
        assert!(estimate_gmi_trials(gen, &cfg, &EstimateOptions::default(), 0, 0.0).is_err());
    }
}
