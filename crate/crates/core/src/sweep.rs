//! Experiment harness: MSE sweeps over Gaussian families, FR-vs-KDE runtime
//! comparison and the theoretical rate envelopes.
//!
//! A sweep plan is a grid over `(estimator, d, n, ρ, α)`. Every cell runs
//! `trials` independent replicates on fresh data. Trial seeds are derived
//! from the plan seed and the cell parameters, so a cell's output does not
//! depend on which other cells are in the plan, on thread scheduling, or on
//! the estimator (FR and KDE cells with equal parameters see the same data).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::mst_degree_bound;
use crate::baselines::{kde_gmi, mc_true_gmi, KdeConfig, TruthOracle};
use crate::fr::{estimate_gmi_with, EstimateOptions, Summary};
use crate::mst::MstBackend;
use crate::rng::derive_seed;
use crate::samples::{generate_gaussian, GaussianSpec, ShuffleMode, SplitShuffleConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Fr,
    Kde,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Fr => "fr",
            Estimator::Kde => "kde",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fr" => Ok(Estimator::Fr),
            "kde" => Ok(Estimator::Kde),
            other => Err(Error::InvalidParameter(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    #[default]
    Zero,
    MonteCarlo,
}

/// Grid of experiment cells. `alpha` doubles as `p` for the KDE estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub estimators: Vec<Estimator>,
    pub d: Vec<usize>,
    pub n: Vec<usize>,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub truth: TruthSource,
    pub mc_samples: usize,
    pub shuffle: ShuffleMode,
    pub backend: MstBackend,
    /// Record wall time per cell; `false` writes 0 so output is byte-stable.
    pub timing: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            estimators: vec![Estimator::Fr],
            d: vec![2],
            n: vec![1000],
            rho: vec![0.0],
            alpha: vec![0.5],
            trials: 100,
            seed: 0,
            truth: TruthSource::Zero,
            mc_samples: 1_000_000,
            shuffle: ShuffleMode::Permutation,
            backend: MstBackend::default(),
            timing: true,
        }
    }
}

fn plan_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as u64,
        column: 1,
        message: message.into(),
    }
}

/// Parses `a, b, c` and inclusive ranges `start:step:end`.
fn parse_list<T>(value: &str, line: usize) -> Result<Vec<T>>
where
    T: FromStr + Copy + Into<f64> + PartialOrd,
    f64: TryIntoValue<T>,
{
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        let num = |s: &str| {
            s.parse::<T>()
                .map_err(|_| plan_error(line, format!("cannot parse '{s}'")))
        };
        match parts.as_slice() {
            [single] => out.push(num(single)?),
            [start, step, end] => {
                let (a, s, b): (f64, f64, f64) = (num(start)?.into(), num(step)?.into(), num(end)?.into());
                if !(s > 0.0) || b < a {
                    return Err(plan_error(line, format!("bad range '{item}'")));
                }
                let count = ((b - a) / s + 1e-9).floor() as usize + 1;
                if count > 1_000_000 {
                    return Err(plan_error(line, format!("range '{item}' is too long")));
                }
                for k in 0..count {
                    out.push(f64::try_into_value(a + k as f64 * s));
                }
            }
            _ => return Err(plan_error(line, format!("bad list item '{item}'"))),
        }
    }
    if out.is_empty() {
        return Err(plan_error(line, "empty list"));
    }
    Ok(out)
}

/// Conversion from range arithmetic back to the element type.
trait TryIntoValue<T> {
    fn try_into_value(v: f64) -> T;
}

impl TryIntoValue<f64> for f64 {
    fn try_into_value(v: f64) -> f64 {
        // Snap values like 0.30000000000000004 back to the decimal grid.
        (v * 1e12).round() / 1e12
    }
}

impl TryIntoValue<u32> for f64 {
    fn try_into_value(v: f64) -> u32 {
        v.round() as u32
    }
}

fn usize_list(value: &str, line: usize) -> Result<Vec<usize>> {
    Ok(parse_list::<u32>(value, line)?.into_iter().map(|v| v as usize).collect())
}

fn scalar<T: FromStr>(value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| plan_error(line, format!("cannot parse '{value}'")))
}

impl SweepPlan {
    /// Parses the `key = value` plan syntax. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut plan = Self::default();
        let mut cutoff = MstBackend::DEFAULT_CUTOFF;
        let mut backend_name = String::from("auto");
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| plan_error(line, format!("expected key = value, got '{content}'")))?;
            let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
            match key.as_str() {
                "estimator" | "estimators" => {
                    plan.estimators = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()
                        .map_err(|e| plan_error(line, e.to_string()))?;
                }
                "d" => plan.d = usize_list(value, line)?,
                "n" => plan.n = usize_list(value, line)?,
                "rho" => plan.rho = parse_list::<f64>(value, line)?,
                "alpha" => plan.alpha = parse_list::<f64>(value, line)?,
                "trials" => plan.trials = scalar(value, line)?,
                "seed" => plan.seed = scalar(value, line)?,
                "mc_samples" => plan.mc_samples = scalar(value, line)?,
                "timing" => plan.timing = scalar(value, line)?,
                "truth" => {
                    plan.truth = match value.to_ascii_lowercase().as_str() {
                        "zero" => TruthSource::Zero,
                        "mc" | "monte_carlo" | "montecarlo" => TruthSource::MonteCarlo,
                        other => return Err(plan_error(line, format!("unknown truth source '{other}'"))),
                    }
                }
                "shuffle" => {
                    plan.shuffle = match value.to_ascii_lowercase().as_str() {
                        "perm" | "permutation" => ShuffleMode::Permutation,
                        "indep" | "independent_draw" => ShuffleMode::IndependentDraw,
                        other => return Err(plan_error(line, format!("unknown shuffle mode '{other}'"))),
                    }
                }
                "mst" | "backend" => backend_name = value.to_ascii_lowercase(),
                "mst_cutoff" => cutoff = scalar(value, line)?,
                other => return Err(plan_error(line, format!("unknown key '{other}'"))),
            }
        }
        plan.backend = match backend_name.as_str() {
            "auto" => MstBackend::Auto {
                cutoff,
                max_dim: MstBackend::DEFAULT_MAX_DIM,
            },
            "quadratic" | "prim" => MstBackend::Quadratic,
            "dualtree" | "dual_tree" => MstBackend::DualTree,
            other => return Err(Error::InvalidParameter(format!("unknown MST backend '{other}'"))),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if [self.estimators.len(), self.d.len(), self.n.len(), self.rho.len(), self.alpha.len()].contains(&0) {
            return Err(Error::InvalidParameter("every grid axis needs at least one value".into()));
        }
        if let Some(d) = self.d.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidParameter(format!("d must be at least 2, got {d}")));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {a}")));
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r > -1.0 && **r < 1.0)) {
            return Err(Error::InvalidParameter(format!("rho must lie in (-1, 1), got {r}")));
        }
        Ok(())
    }

    /// Cells in canonical order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &estimator in &self.estimators {
            for &d in &self.d {
                for &n in &self.n {
                    for &rho in &self.rho {
                        for &alpha in &self.alpha {
                            cells.push(Cell {
                                estimator,
                                d,
                                n,
                                rho,
                                alpha,
                            });
                        }
                    }
                }
            }
        }
        cells.sort_by(Cell::canonical_cmp);
        cells.dedup();
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub estimator: Estimator,
    pub d: usize,
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
}

impl Cell {
    fn canonical_cmp(a: &Cell, b: &Cell) -> std::cmp::Ordering {
        a.estimator
            .cmp(&b.estimator)
            .then(a.d.cmp(&b.d))
            .then(a.n.cmp(&b.n))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.alpha.total_cmp(&b.alpha))
    }

    /// Seed of trial `t`; independent of the estimator.
    pub fn trial_seed(&self, plan_seed: u64, t: usize) -> u64 {
        derive_seed(
            plan_seed,
            &[self.d as u64, self.n as u64, self.rho.to_bits(), self.alpha.to_bits(), t as u64],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(flatten)]
    pub cell: Cell,
    pub trials: usize,
    pub truth: f64,
    pub mean: f64,
    pub mse: f64,
    pub stderr: f64,
    pub seconds: f64,
    /// Why the cell was not run, if it was skipped.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<CellRecord>,
}

pub const CSV_HEADER: &str = "estimator,d,n,rho,alpha,trials,mean,mse,stderr,seconds";

impl SweepResult {
    /// Writes the CSV form. Skipped cells have `trials = 0` and empty
    /// statistics.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            let c = &r.cell;
            if r.skipped.is_some() {
                writeln!(out, "{},{},{},{},{},0,,,,", c.estimator, c.d, c.n, c.rho, c.alpha)?;
            } else {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    c.estimator, c.d, c.n, c.rho, c.alpha, r.trials, r.mean, r.mse, r.stderr, r.seconds
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn find(&self, estimator: Estimator, d: usize, n: usize, rho: f64, alpha: f64) -> Option<&CellRecord> {
        self.records.iter().find(|r| {
            let c = &r.cell;
            c.estimator == estimator && c.d == d && c.n == n && c.rho == rho && c.alpha == alpha
        })
    }
}

fn skip_reason(cell: &Cell, plan: &SweepPlan) -> Option<String> {
    match cell.estimator {
        Estimator::Fr => SplitShuffleConfig::new(cell.alpha, 0)
            .with_mode(plan.shuffle)
            .sizes(cell.n)
            .err()
            .map(|e| e.to_string()),
        Estimator::Kde => (cell.n < crate::baselines::KDE_MIN_SAMPLES)
            .then(|| format!("KDE needs at least {} samples", crate::baselines::KDE_MIN_SAMPLES)),
    }
}

fn run_trial(cell: &Cell, plan: &SweepPlan, t: usize) -> Result<(f64, f64)> {
    let seed = cell.trial_seed(plan.seed, t);
    let spec = GaussianSpec::split(cell.d, cell.rho, cell.n, seed);
    let start = Instant::now();
    let data = generate_gaussian(&spec)?;
    let value = match cell.estimator {
        Estimator::Fr => {
            let cfg = SplitShuffleConfig::new(cell.alpha, seed).with_mode(plan.shuffle);
            let opts = EstimateOptions {
                clamp: false,
                backend: plan.backend,
            };
            estimate_gmi_with(&data, &cfg, &opts)?.value
        }
        Estimator::Kde => kde_gmi(&data, cell.alpha, &KdeConfig::default())?,
    };
    Ok((value, start.elapsed().as_secs_f64()))
}

type TruthKey = (usize, u64, u64);

fn truths(plan: &SweepPlan, cells: &[Cell]) -> Result<BTreeMap<TruthKey, f64>> {
    let mut keys: Vec<TruthKey> = cells
        .iter()
        .map(|c| (c.d, c.rho.to_bits(), c.alpha.to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_par_iter()
        .map(|key @ (d, rho, p)| {
            let (rho, p) = (f64::from_bits(rho), f64::from_bits(p));
            let value = match plan.truth {
                TruthSource::Zero => 0.0,
                TruthSource::MonteCarlo => {
                    let oracle = TruthOracle {
                        dx: d / 2,
                        dy: d - d / 2,
                        rho,
                        p,
                        mc_samples: plan.mc_samples,
                        seed: derive_seed(plan.seed, &[u64::MAX, key.0 as u64, key.1, key.2]),
                    };
                    mc_true_gmi(&oracle)?.value
                }
            };
            Ok((key, value))
        })
        .collect()
}

/// Runs every cell of the plan. Output order is canonical and, with
/// `timing = false`, byte-identical across runs.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let cells = plan.cells();
    let truth = truths(plan, &cells)?;

    let runnable: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| skip_reason(c, plan).is_none())
        .flat_map(|(ci, _)| (0..plan.trials).map(move |t| (ci, t)))
        .collect();
    let outcomes: Vec<((usize, usize), (f64, f64))> = runnable
        .into_par_iter()
        .map(|(ci, t)| run_trial(&cells[ci], plan, t).map(|o| ((ci, t), o)))
        .collect::<Result<_>>()?;

    let mut per_cell: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cells.len()];
    for ((ci, _), o) in outcomes {
        per_cell[ci].push(o);
    }

    let records = cells
        .iter()
        .zip(per_cell)
        .map(|(cell, outcomes)| {
            let t = truth[&(cell.d, cell.rho.to_bits(), cell.alpha.to_bits())];
            if let Some(reason) = skip_reason(cell, plan) {
                return CellRecord {
                    cell: *cell,
                    trials: 0,
                    truth: t,
                    mean: f64::NAN,
                    mse: f64::NAN,
                    stderr: f64::NAN,
                    seconds: 0.0,
                    skipped: Some(reason),
                };
            }
            let values: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
            let s = Summary::from_values(&values, t);
            CellRecord {
                cell: *cell,
                trials: values.len(),
                truth: t,
                mean: s.mean,
                mse: s.mse,
                stderr: s.std_error,
                seconds: if plan.timing { outcomes.iter().map(|o| o.1).sum() } else { 0.0 },
                skipped: None,
            }
        })
        .collect();
    Ok(SweepResult { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub n: usize,
    pub fr_seconds: f64,
    pub kde_seconds: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median wall time of one FR estimate (`α = 0.5`) and one KDE plug-in
/// estimate (`p = 0.5`) on the same standard-normal sample, per `n`.
pub fn runtime_compare(ns: &[usize], d: usize, seed: u64, reps: usize) -> Result<Vec<RuntimeRow>> {
    if reps < 3 {
        return Err(Error::InvalidParameter("runtime comparison needs at least 3 repetitions".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("n grid must be strictly ascending".into()));
    }
    ns.iter()
        .map(|&n| {
            let data = generate_gaussian(&GaussianSpec::standard(d, n, seed))?;
            let cfg = SplitShuffleConfig::new(0.5, seed);
            let opts = EstimateOptions::default();
            let mut fr = Vec::with_capacity(reps);
            let mut kde = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t = Instant::now();
                estimate_gmi_with(&data, &cfg, &opts)?;
                fr.push(t.elapsed().as_secs_f64());
                let t = Instant::now();
                kde_gmi(&data, 0.5, &KdeConfig::default())?;
                kde.push(t.elapsed().as_secs_f64());
            }
            Ok(RuntimeRow {
                n,
                fr_seconds: median(fr),
                kde_seconds: median(kde),
            })
        })
        .collect()
}

/// Bias and variance rate bounds with unit leading constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub n: usize,
    /// `n^{-η²/(d(1+η))}`, `(βn)^{-η/(1+η)}`, `c_d 2^d / n`.
    pub bias_terms: [f64; 3],
    pub bias: f64,
    /// `(1 - α) c_d / n`.
    pub variance: f64,
}

/// Rate envelopes per `n`; `c_d` defaults to the MST degree bound.
pub fn theoretical_envelope(ns: &[usize], d: usize, eta: f64, alpha: f64, c_d: Option<f64>) -> Result<Vec<EnvelopeRow>> {
    if d < 1 || !(eta > 0.0 && eta <= 1.0) || !(alpha > 0.0 && alpha < 1.0) && alpha != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "envelope needs d >= 1, eta in (0, 1], alpha in [0, 1); got d = {d}, eta = {eta}, alpha = {alpha}"
        )));
    }
    let c_d = c_d.unwrap_or_else(|| mst_degree_bound(d));
    let df = d as f64;
    let beta = 1.0 - alpha;
    Ok(ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let terms = [
                nf.powf(-eta * eta / (df * (1.0 + eta))),
                (beta * nf).powf(-eta / (1.0 + eta)),
                c_d * 2f64.powf(df) / nf,
            ];
            EnvelopeRow {
                n,
                bias_terms: terms,
                bias: terms.into_iter().fold(f64::NEG_INFINITY, f64::max),
                variance: (1.0 - alpha) * c_d / nf,
            }
        })
        .collect())
}
