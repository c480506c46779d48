//! Reference estimators: a resubstitution KDE plug-in for `I_p` and a
//! Monte-Carlo oracle for the true GMI of a Gaussian family.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, STREAM_MC};
use crate::samples::{cholesky_lower, equicorrelation, PairedSampleSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KdeConfig {
    /// Kernel bandwidth; `None` uses `n^{-1/(d+1)}` with `d = dx + dy`.
    pub bandwidth: Option<f64>,
    /// Drop each point's own kernel from the densities evaluated at it.
    /// Off by default: the plug-in is the leave-in resubstitution form.
    /// Points with no other sample within kernel range are skipped.
    #[serde(default)]
    pub leave_one_out: bool,
}

impl KdeConfig {
    pub fn default_bandwidth(n: usize, d: usize) -> f64 {
        (n as f64).powf(-1.0 / (d as f64 + 1.0))
    }

    pub fn bandwidth_for(&self, n: usize, d: usize) -> Result<f64> {
        let h = self.bandwidth.unwrap_or_else(|| Self::default_bandwidth(n, d));
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        Ok(h)
    }
}

pub const KDE_MIN_SAMPLES: usize = 10;

/// Plug-in estimate `1 - mean_i (p r̂(z_i) + q)^{-1}` with
/// `r̂ = f̂_XY / (f̂_X f̂_Y)` from Gaussian product-kernel densities evaluated
/// at the sample points themselves.
pub fn kde_gmi(data: &PairedSampleSet, p: f64, cfg: &KdeConfig) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    let n = data.n();
    if n < KDE_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "KDE needs at least {KDE_MIN_SAMPLES} samples, got {n}"
        )));
    }
    let h = cfg.bandwidth_for(n, data.dim())?;
    let inv = 1.0 / (2.0 * h * h);
    let q = 1.0 - p;

    let terms: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = (data.x(i), data.y(i));
            let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
            for j in 0..n {
                let ex = (-sq_dist(xi, data.x(j)) * inv).exp();
                let ey = (-sq_dist(yi, data.y(j)) * inv).exp();
                sx += ex;
                sy += ey;
                sxy += ex * ey;
            }
            // Kernel normalizations cancel in the ratio.
            let r = if cfg.leave_one_out {
                let (sx, sy) = (sx - 1.0, sy - 1.0);
                if sx <= 0.0 || sy <= 0.0 {
                    return None;
                }
                (n - 1) as f64 * (sxy - 1.0).max(0.0) / (sx * sy)
            } else {
                n as f64 * sxy / (sx * sy)
            };
            Some(1.0 / (p * r + q))
        })
        .collect();
    let used: Vec<f64> = terms.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::Numeric("no point has a neighbour within kernel range".into()));
    }
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Numeric("KDE density ratio is not finite".into()));
    }
    Ok(1.0 - mean)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Monte-Carlo evaluation of `I_p` for the zero-mean, unit-variance
/// Gaussian with common pairwise correlation `rho` over `dx + dy`
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthOracle {
    pub dx: usize,
    pub dy: usize,
    pub rho: f64,
    pub p: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

pub const MC_MIN_SAMPLES: usize = 1_000;
const MC_BATCH: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl TruthOracle {
    pub fn bivariate(rho: f64, p: f64, mc_samples: usize, seed: u64) -> Self {
        Self {
            dx: 1,
            dy: 1,
            rho,
            p,
            mc_samples,
            seed,
        }
    }
}

struct Factor {
    l: DMatrix<f64>,
    half_logdet: f64,
}

impl Factor {
    fn new(d: usize, rho: f64) -> Result<Self> {
        let l = cholesky_lower(equicorrelation(d, rho))?;
        let half_logdet = l.diagonal().iter().map(|v| v.ln()).sum();
        Ok(Self { l, half_logdet })
    }

    /// `‖L⁻¹ v‖²`.
    fn mahalanobis(&self, v: &[f64]) -> f64 {
        let b = DVector::from_column_slice(v);
        let w = self
            .l
            .solve_lower_triangular(&b)
            .expect("Cholesky factor has a positive diagonal");
        w.norm_squared()
    }
}

/// Returns `(1 - mean, standard error)` of `(p r + q)^{-1}` over draws from
/// the joint, where `r` is the exact density ratio `f_XY / (f_X f_Y)`.
pub fn mc_true_gmi(oracle: &TruthOracle) -> Result<TruthEstimate> {
    let TruthOracle {
        dx,
        dy,
        rho,
        p,
        mc_samples,
        seed,
    } = *oracle;
    if dx == 0 || dy == 0 {
        return Err(Error::InvalidParameter("truth oracle needs dx, dy >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    if mc_samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "mc_samples must be at least {MC_MIN_SAMPLES}, got {mc_samples}"
        )));
    }
    let d = dx + dy;
    let joint = Factor::new(d, rho)?;
    let fx = Factor::new(dx, rho)?;
    let fy = Factor::new(dy, rho)?;
    let log_norm = joint.half_logdet - fx.half_logdet - fy.half_logdet;
    let q = 1.0 - p;

    let batches = mc_samples.div_ceil(MC_BATCH);
    let partial: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = MC_BATCH.min(mc_samples - b * MC_BATCH);
            let mut rng = stream_rng(seed, STREAM_MC + b as u64);
            let mut w = DVector::<f64>::zeros(d);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for v in w.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let z = &joint.l * &w;
                let zs = z.as_slice();
                // log r = -½(‖w‖² - q_x - q_y) - log |L_xy| + log |L_x| + log |L_y|
                let log_r =
                    -0.5 * (w.norm_squared() - fx.mahalanobis(&zs[..dx]) - fy.mahalanobis(&zs[dx..])) - log_norm;
                let t = 1.0 / (p * log_r.exp() + q);
                s += t;
                s2 += t * t;
            }
            (s, s2)
        })
        .collect();

    let (s, s2) = partial.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let m = mc_samples as f64;
    let mean = s / m;
    let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
    let value = 1.0 - mean;
    if !value.is_finite() {
        return Err(Error::Numeric("Monte-Carlo mean is not finite".into()));
    }
    Ok(TruthEstimate {
        value,
        std_error: (var / m).sqrt(),
    })
}
