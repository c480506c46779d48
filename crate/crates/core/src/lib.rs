//! Geometric mutual information (GMI).
//!
//! The GMI `I_p(X;Y)` is the Henze-Penrose divergence between a joint density
//! and the product of its marginals. This crate provides:
//!
//! - [`samples`]: paired sample sets, CSV ingestion, seeded Gaussian
//!   generation and the split/shuffle step of the estimator.
//! - [`mst`]: exact Euclidean minimum spanning trees (dense Prim and a
//!   kd-tree dual-tree Borůvka).
//! - [`fr`]: the Friedman-Rafsky bichromatic edge count and the randomized
//!   shuffle estimator of `I_α`.
//! - [`divergence`]: exact HP divergence, GMI and affinity on discrete
//!   joints, plus checks of the GMI inequalities.
//! - [`alpha`]: minimax selection of the proportionality parameter.
//! - [`baselines`]: a KDE plug-in estimator and a Monte-Carlo truth oracle.
//! - [`sweep`]: the experiment harness (MSE sweeps, runtime comparison,
//!   theoretical rate envelopes).

pub mod alpha;
pub mod baselines;
pub mod divergence;
mod error;
pub mod fr;
pub mod mst;
pub mod rng;
pub mod samples;
pub mod sweep;

pub use error::{Error, Result};

pub use alpha::{select_alpha, AlphaCase, AlphaSolution, DensityBounds, GTildeForm, RateConstants};
pub use baselines::{kde_gmi, mc_true_gmi, KdeConfig, TruthEstimate, TruthOracle};
pub use divergence::{affinity, gmi, hp_divergence, ConditionalJoint, DiscreteJoint, HpParams};
pub use fr::{estimate_gmi, fr_statistic, FrStatistic, GmiEstimate, Label};
pub use mst::{mst_dualtree, mst_quadratic, Edge, MstBackend, Points, SpanningTree};
pub use samples::{PairedSampleSet, ShuffleMode, SplitShuffleConfig};
pub use sweep::{run_sweep, Estimator, SweepPlan, SweepResult};
