//! Exact Henze-Penrose divergence, GMI and affinity on finite probability
//! tables, and randomized checks of the GMI inequalities.
//!
//! Sums replace integrals atom by atom. Atoms where both `p f` and `q g`
//! vanish contribute nothing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::{derive_seed, stream_rng, STREAM_DATA};
use crate::{Error, Result};

/// Tolerance used by the inequality checks.
pub const PROPERTY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HpParams {
    p: f64,
    q: f64,
}

impl HpParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
        }
        Ok(Self { p, q: 1.0 - p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Parameters with `p` and `q` exchanged.
    pub fn swapped(&self) -> Self {
        Self { p: self.q, q: self.p }
    }
}

fn sum_tolerance(len: usize) -> f64 {
    1e-12_f64.max(len as f64 * f64::EPSILON)
}

fn check_pmf(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidPmf(format!("{what} is empty")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidPmf(format!("{what} has entry {v}")));
    }
    let s: f64 = values.iter().sum();
    if (s - 1.0).abs() > sum_tolerance(values.len()) {
        return Err(Error::InvalidPmf(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// `D_p(f, g)` for two probability vectors on the same atoms.
pub fn hp_divergence(f: &[f64], g: &[f64], params: HpParams) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::Shape(format!("pmf lengths {} and {}", f.len(), g.len())));
    }
    check_pmf(f, "f")?;
    check_pmf(g, "g")?;
    Ok(hp_divergence_unchecked(f, g, params))
}

fn hp_divergence_unchecked(f: &[f64], g: &[f64], params: HpParams) -> f64 {
    let HpParams { p, q } = params;
    let s: f64 = f
        .iter()
        .zip(g)
        .map(|(&fi, &gi)| {
            let den = p * fi + q * gi;
            if den > 0.0 {
                (p * fi - q * gi).powi(2) / den
            } else {
                0.0
            }
        })
        .sum();
    (s - (p - q).powi(2)) / (4.0 * p * q)
}

/// Joint pmf of `(X, Y)` on a `kx × ky` grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteJoint {
    pmf: Vec<f64>,
    kx: usize,
    ky: usize,
}

impl DiscreteJoint {
    pub fn new(pmf: Vec<f64>, kx: usize, ky: usize) -> Result<Self> {
        if kx == 0 || ky == 0 || pmf.len() != kx * ky {
            return Err(Error::Shape(format!(
                "{} entries for a {kx}x{ky} table",
                pmf.len()
            )));
        }
        check_pmf(&pmf, "joint")?;
        Ok(Self { pmf, kx, ky })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let ky = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != ky) {
            return Err(Error::Shape("ragged joint table".into()));
        }
        let pmf = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(pmf, rows.len(), ky)
    }

    /// `f_X ⊗ f_Y` as a joint.
    pub fn product(fx: &[f64], fy: &[f64]) -> Result<Self> {
        check_pmf(fx, "f_X")?;
        check_pmf(fy, "f_Y")?;
        let pmf = fx.iter().flat_map(|a| fy.iter().map(move |b| a * b)).collect();
        Self::new(pmf, fx.len(), fy.len())
    }

    /// `f_X(x) f_{Y|X}(y|x)`; each row of `cond` is a pmf over `y`.
    pub fn from_conditional(fx: &[f64], cond: &[Vec<f64>]) -> Result<Self> {
        check_pmf(fx, "f_X")?;
        if cond.len() != fx.len() {
            return Err(Error::Shape("conditional needs one row per x atom".into()));
        }
        for row in cond {
            check_pmf(row, "f_{Y|X} row")?;
        }
        let rows: Vec<Vec<f64>> = fx
            .iter()
            .zip(cond)
            .map(|(a, row)| row.iter().map(|b| a * b).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn kx(&self) -> usize {
        self.kx
    }

    pub fn ky(&self) -> usize {
        self.ky
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pmf[x * self.ky + y]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.pmf.chunks(self.ky).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ky];
        for row in self.pmf.chunks(self.ky) {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m
    }

    fn product_of_marginals(&self) -> Vec<f64> {
        let (fx, fy) = (self.marginal_x(), self.marginal_y());
        fx.iter().flat_map(|a| fy.iter().map(move |b| a * b)).collect()
    }
}

/// Geometric affinity `A_p = Σ f_XY f_X f_Y / (p f_XY + q f_X f_Y)`.
pub fn affinity(joint: &DiscreteJoint, params: HpParams) -> f64 {
    let HpParams { p, q } = params;
    joint
        .pmf
        .iter()
        .zip(joint.product_of_marginals())
        .map(|(&f, g)| {
            let den = p * f + q * g;
            if den > 0.0 {
                f * g / den
            } else {
                0.0
            }
        })
        .sum()
}

/// `u_p = 1 - 4 p q A_p`.
pub fn u_p(joint: &DiscreteJoint, params: HpParams) -> f64 {
    1.0 - 4.0 * params.p * params.q * affinity(joint, params)
}

/// `I_p(X; Y) = D_p(f_XY, f_X f_Y)`, cross-checked against `1 - A_p`.
pub fn gmi(joint: &DiscreteJoint, params: HpParams) -> Result<f64> {
    let direct = hp_divergence_unchecked(&joint.pmf, &joint.product_of_marginals(), params);
    let via_affinity = 1.0 - affinity(joint, params);
    let tol = 1e-9 * (1.0 + 1.0 / (4.0 * params.p * params.q));
    if (direct - via_affinity).abs() > tol {
        return Err(Error::Numeric(format!(
            "GMI routes disagree: {direct} vs {via_affinity}"
        )));
    }
    Ok(direct)
}

/// Joint pmf over three axes, row-major `(a, b, c)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalJoint {
    pmf: Vec<f64>,
    shape: [usize; 3],
}

impl ConditionalJoint {
    pub fn new(pmf: Vec<f64>, shape: [usize; 3]) -> Result<Self> {
        if shape.contains(&0) || pmf.len() != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "{} entries for shape {shape:?}",
                pmf.len()
            )));
        }
        check_pmf(&pmf, "joint")?;
        Ok(Self { pmf, shape })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize, c: usize) -> f64 {
        self.pmf[(a * self.shape[1] + b) * self.shape[2] + c]
    }

    /// Sums out one axis; the two remaining axes keep their order.
    pub fn marginalize(&self, axis: usize) -> DiscreteJoint {
        let [k0, k1, k2] = self.shape;
        let (r, c) = match axis {
            0 => (k1, k2),
            1 => (k0, k2),
            _ => (k0, k1),
        };
        let mut pmf = vec![0.0; r * c];
        for a in 0..k0 {
            for b in 0..k1 {
                for z in 0..k2 {
                    let idx = match axis {
                        0 => b * c + z,
                        1 => a * c + z,
                        _ => a * c + b,
                    };
                    pmf[idx] += self.at(a, b, z);
                }
            }
        }
        DiscreteJoint { pmf, kx: r, ky: c }
    }

    /// Axes `(0, 1)` merged into one variable, paired with axis 2.
    pub fn merge_first_two(&self) -> DiscreteJoint {
        DiscreteJoint {
            pmf: self.pmf.clone(),
            kx: self.shape[0] * self.shape[1],
            ky: self.shape[2],
        }
    }

    fn axis_marginal(&self, axis: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.shape[axis]];
        let [k0, k1, k2] = self.shape;
        for a in 0..k0 {
            for b in 0..k1 {
                for c in 0..k2 {
                    m[[a, b, c][axis]] += self.at(a, b, c);
                }
            }
        }
        m
    }

    /// Markov chain `X -> Y -> Z` on axes `(X, Y, Z)` built from
    /// `f_Z`, rows `f_{Y|Z=z}` and rows `f_{X|Y=y}`.
    pub fn markov(fz: &[f64], y_given_z: &[Vec<f64>], x_given_y: &[Vec<f64>]) -> Result<Self> {
        check_pmf(fz, "f_Z")?;
        if y_given_z.len() != fz.len() {
            return Err(Error::Shape("f_{Y|Z} needs one row per z atom".into()));
        }
        let ky = y_given_z.first().map_or(0, Vec::len);
        if x_given_y.len() != ky {
            return Err(Error::Shape("f_{X|Y} needs one row per y atom".into()));
        }
        let kx = x_given_y.first().map_or(0, Vec::len);
        for row in y_given_z {
            check_pmf(row, "f_{Y|Z} row")?;
        }
        for row in x_given_y {
            check_pmf(row, "f_{X|Y} row")?;
        }
        if y_given_z.iter().any(|r| r.len() != ky) || x_given_y.iter().any(|r| r.len() != kx) {
            return Err(Error::Shape("ragged conditional table".into()));
        }
        let kz = fz.len();
        let mut pmf = vec![0.0; kx * ky * kz];
        for x in 0..kx {
            for y in 0..ky {
                for z in 0..kz {
                    pmf[(x * ky + y) * kz + z] = x_given_y[y][x] * y_given_z[z][y] * fz[z];
                }
            }
        }
        Self::new(pmf, [kx, ky, kz])
    }
}

/// `E_Z[I_p(X; Y | Z = z)]` for a joint on axes `(X, Y, Z)`.
pub fn conditional_gmi(joint: &ConditionalJoint, params: HpParams) -> Result<f64> {
    let [kx, ky, _] = joint.shape;
    let fz = joint.axis_marginal(2);
    let mut total = 0.0;
    for (z, &wz) in fz.iter().enumerate() {
        if wz <= 0.0 {
            continue;
        }
        let slice: Vec<f64> = (0..kx)
            .flat_map(|x| (0..ky).map(move |y| (x, y)))
            .map(|(x, y)| joint.at(x, y, z) / wz)
            .collect();
        let cond = DiscreteJoint {
            pmf: slice,
            kx,
            ky,
        };
        total += wz * gmi(&cond, params)?;
    }
    Ok(total)
}

/// Sides of the chain-rule bound `I_p(X1,X2; Y) >= I_p(X1; Y) - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainRuleGap {
    /// `I_p(X1, X2; Y)`.
    pub lhs: f64,
    /// `I_p(X1; Y)`.
    pub rhs: f64,
    pub delta: f64,
}

impl ChainRuleGap {
    /// `lhs - (rhs - delta)`; nonnegative when the bound holds.
    pub fn slack(&self) -> f64 {
        self.lhs - (self.rhs - self.delta)
    }
}

/// Chain-rule bound for a joint on axes `(X1, X2, Y)`.
///
/// `delta = E_f[(p f(x2,y|x1) / (f(x2|x1) f(y|x1)) + q)^{-1}]`.
pub fn chain_rule_gap(joint: &ConditionalJoint, params: HpParams) -> Result<ChainRuleGap> {
    let lhs = gmi(&joint.merge_first_two(), params)?;
    let x1y = joint.marginalize(1);
    let rhs = gmi(&x1y, params)?;
    let x1x2 = joint.marginalize(2);
    let f1 = joint.axis_marginal(0);

    let [k0, k1, k2] = joint.shape;
    let mut delta = 0.0;
    for a in 0..k0 {
        for b in 0..k1 {
            for c in 0..k2 {
                let f = joint.at(a, b, c);
                if f <= 0.0 {
                    continue;
                }
                let ratio = f * f1[a] / (x1x2.at(a, b) * x1y.at(a, c));
                delta += f / (params.p * ratio + params.q);
            }
        }
    }
    Ok(ChainRuleGap { lhs, rhs, delta })
}

/// Sides of the data-processing bound
/// `I_p(Y; X) >= I_p(Z; X) - (p E[delta_XY] + q)^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataProcessingGap {
    /// `I_p(Y; X)`.
    pub lhs: f64,
    /// `I_p(Z; X)`.
    pub rhs: f64,
    /// `(p E[delta_XY] + q)^{-1}`.
    pub slack_term: f64,
}

impl DataProcessingGap {
    pub fn slack(&self) -> f64 {
        self.lhs - (self.rhs - self.slack_term)
    }
}

/// Largest allowed deviation from the Markov factorization.
pub const MARKOV_TOL: f64 = 1e-10;

/// Data-processing bound for a Markov chain `X -> Y -> Z` on axes
/// `(X, Y, Z)`. Rejects joints that do not factor as `f_{X|Y} f_{YZ}`.
pub fn data_processing_gap(joint: &ConditionalJoint, params: HpParams) -> Result<DataProcessingGap> {
    let [kx, ky, kz] = joint.shape;
    let xy = joint.marginalize(2);
    let yz = joint.marginalize(0);
    let xz = joint.marginalize(1);
    let fy = joint.axis_marginal(1);
    let fz = joint.axis_marginal(2);

    let mut residual: f64 = 0.0;
    for x in 0..kx {
        for y in 0..ky {
            for z in 0..kz {
                let factored = if fy[y] > 0.0 {
                    xy.at(x, y) * yz.at(y, z) / fy[y]
                } else {
                    0.0
                };
                residual = residual.max((joint.at(x, y, z) - factored).abs());
            }
        }
    }
    if residual > MARKOV_TOL {
        return Err(Error::NotMarkov { residual });
    }

    // I_p(Y; X) and I_p(Z; X) with the conditioning variable first.
    let lhs = gmi(&transpose(&xy), params)?;
    let rhs = gmi(&transpose(&xz), params)?;

    // delta(x, y) = Σ_z f(x|y) f(z|y) / f(x|z)
    let mut expected = 0.0;
    for x in 0..kx {
        for y in 0..ky {
            let fxy = xy.at(x, y);
            if fxy <= 0.0 {
                continue;
            }
            let x_given_y = fxy / fy[y];
            let mut d = 0.0;
            for z in 0..kz {
                let z_given_y = yz.at(y, z) / fy[y];
                if z_given_y <= 0.0 {
                    continue;
                }
                let x_given_z = xz.at(x, z) / fz[z];
                d += x_given_y * z_given_y / x_given_z;
            }
            expected += fxy * d;
        }
    }
    let slack_term = 1.0 / (params.p * expected + params.q);
    Ok(DataProcessingGap {
        lhs,
        rhs,
        slack_term,
    })
}

fn transpose(j: &DiscreteJoint) -> DiscreteJoint {
    let mut pmf = vec![0.0; j.pmf.len()];
    for x in 0..j.kx {
        for y in 0..j.ky {
            pmf[y * j.kx + x] = j.at(x, y);
        }
    }
    DiscreteJoint {
        pmf,
        kx: j.ky,
        ky: j.kx,
    }
}

/// Both sides of the two mixture inequalities for one random draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureReport {
    /// `I(λ1 f g + λ2 f h)` with a shared `f_{Y|X}`.
    pub concave_lhs: f64,
    /// `λ1 I(f g) + λ2 I(f h)`.
    pub concave_rhs: f64,
    /// `I(λ1 g f + λ2 h f)` with a shared `f_X`.
    pub convex_lhs: f64,
    /// `λ1 I(g f) + λ2 I(h f)`.
    pub convex_rhs: f64,
}

impl MixtureReport {
    /// Concavity in `f_X` holds (lhs >= rhs) within `tol`.
    pub fn concave_holds(&self, tol: f64) -> bool {
        self.concave_lhs >= self.concave_rhs - tol
    }

    /// Convexity in `f_{Y|X}` holds (lhs <= rhs) within `tol`.
    pub fn convex_holds(&self, tol: f64) -> bool {
        self.convex_lhs <= self.convex_rhs + tol
    }
}

/// Inputs of one concavity/convexity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureInputs {
    pub lambda: f64,
    /// Shared conditional for the concavity part.
    pub y_given_x: Vec<Vec<f64>>,
    pub g_x: Vec<f64>,
    pub h_x: Vec<f64>,
    /// Shared marginal for the convexity part.
    pub f_x: Vec<f64>,
    pub g_y_given_x: Vec<Vec<f64>>,
    pub h_y_given_x: Vec<Vec<f64>>,
}

pub fn concavity_convexity_check(inputs: &MixtureInputs, params: HpParams) -> Result<MixtureReport> {
    let l1 = inputs.lambda;
    if !(0.0..=1.0).contains(&l1) {
        return Err(Error::InvalidParameter(format!("mixture weight {l1} outside [0, 1]")));
    }
    let l2 = 1.0 - l1;
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| l1 * u + l2 * v).collect() };

    let i = |fx: &[f64], cond: &[Vec<f64>]| DiscreteJoint::from_conditional(fx, cond).and_then(|j| gmi(&j, params));

    if inputs.g_x.len() != inputs.h_x.len() {
        return Err(Error::Shape("g_X and h_X differ in length".into()));
    }
    let concave_lhs = i(&mix(&inputs.g_x, &inputs.h_x), &inputs.y_given_x)?;
    let concave_rhs = l1 * i(&inputs.g_x, &inputs.y_given_x)? + l2 * i(&inputs.h_x, &inputs.y_given_x)?;

    if inputs.g_y_given_x.len() != inputs.h_y_given_x.len() {
        return Err(Error::Shape("g_{Y|X} and h_{Y|X} differ in size".into()));
    }
    let mixed_cond: Vec<Vec<f64>> = inputs
        .g_y_given_x
        .iter()
        .zip(&inputs.h_y_given_x)
        .map(|(g, h)| mix(g, h))
        .collect();
    let convex_lhs = i(&inputs.f_x, &mixed_cond)?;
    let convex_rhs = l1 * i(&inputs.f_x, &inputs.g_y_given_x)? + l2 * i(&inputs.f_x, &inputs.h_y_given_x)?;

    Ok(MixtureReport {
        concave_lhs,
        concave_rhs,
        convex_lhs,
        convex_rhs,
    })
}

/// Uniform draw from the probability simplex with `k` atoms.
pub fn random_pmf<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn random_conditional<R: Rng + ?Sized>(rng: &mut R, rows: usize, k: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| random_pmf(rng, k)).collect()
}

pub fn random_joint<R: Rng + ?Sized>(rng: &mut R, kx: usize, ky: usize) -> DiscreteJoint {
    DiscreteJoint {
        pmf: random_pmf(rng, kx * ky),
        kx,
        ky,
    }
}

pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R, shape: [usize; 3]) -> ConditionalJoint {
    ConditionalJoint {
        pmf: random_pmf(rng, shape.iter().product()),
        shape,
    }
}

/// Zero-mean bivariate Gaussian with unit variances and correlation `rho`,
/// discretized by the midpoint rule on `cells × cells` squares covering
/// `[-half_width, half_width]²`, then renormalized.
pub fn discretize_bivariate_gaussian(rho: f64, cells: usize, half_width: f64) -> Result<DiscreteJoint> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    if cells == 0 || !(half_width > 0.0) {
        return Err(Error::InvalidParameter("grid needs cells > 0 and half_width > 0".into()));
    }
    let h = 2.0 * half_width / cells as f64;
    let mids: Vec<f64> = (0..cells).map(|k| -half_width + (k as f64 + 0.5) * h).collect();
    let s = 1.0 - rho * rho;
    let mut pmf: Vec<f64> = mids
        .iter()
        .flat_map(|&x| mids.iter().map(move |&y| (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * s)).exp()))
        .collect();
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|v| *v /= total);
    DiscreteJoint::new(pmf, cells, cells)
}

/// One failed instance of a property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub instance: usize,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Amount by which the inequality or identity is violated.
    pub excess: f64,
    /// The tables defining the instance, flattened row-major.
    pub inputs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Largest violation seen (0 when none).
    pub worst_excess: f64,
    /// Up to [`MAX_COUNTEREXAMPLES`] failing instances.
    pub counterexamples: Vec<Counterexample>,
}

impl PropertyCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const MAX_COUNTEREXAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub sweeps: usize,
    pub tolerance: f64,
    pub passed: bool,
    pub checks: Vec<PropertyCheck>,
}

/// Outcome of one instance: `(lhs, rhs, excess, inputs)`; `excess > tol`
/// counts as a violation.
type Outcome = (f64, f64, f64, Vec<Vec<f64>>);

struct Property {
    name: &'static str,
    statement: &'static str,
    run: fn(&mut ChaCha8Rng, HpParams) -> Result<Outcome>,
}

fn size<R: Rng + ?Sized>(rng: &mut R) -> usize {
    rng.random_range(2..=5)
}

fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

const PROPERTIES: &[Property] = &[
    Property {
        name: "range",
        statement: "0 <= D_p(f, g) <= 1",
        run: |rng, hp| {
            let k = size(rng) + 2;
            let (f, g) = (random_pmf(rng, k), random_pmf(rng, k));
            let d = hp_divergence(&f, &g, hp)?;
            let excess = (-d).max(d - 1.0).max(0.0);
            Ok((d, d, excess, vec![f, g]))
        },
    },
    Property {
        name: "identity",
        statement: "D_p(f, f) = 0",
        run: |rng, hp| {
            let k = size(rng) + 2;
            let f = random_pmf(rng, k);
            let d = hp_divergence(&f, &f, hp)?;
            Ok((d, 0.0, d.abs(), vec![f]))
        },
    },
    Property {
        name: "swap_symmetry",
        statement: "D_p(f, g) = D_{1-p}(g, f)",
        run: |rng, hp| {
            let k = size(rng) + 2;
            let (f, g) = (random_pmf(rng, k), random_pmf(rng, k));
            let a = hp_divergence(&f, &g, hp)?;
            let b = hp_divergence(&g, &f, hp.swapped())?;
            Ok((a, b, (a - b).abs(), vec![f, g]))
        },
    },
    Property {
        name: "affinity_identity",
        statement: "I_p = 1 - A_p",
        run: |rng, hp| {
            let (kx, ky) = (size(rng), size(rng));
            let j = random_joint(rng, kx, ky);
            let i = gmi(&j, hp)?;
            let a = 1.0 - affinity(&j, hp);
            Ok((i, a, (i - a).abs(), vec![j.pmf]))
        },
    },
    Property {
        name: "concavity_in_f_x",
        statement: "I(l1 f g + l2 f h) >= l1 I(f g) + l2 I(f h)",
        run: |rng, hp| {
            let inputs = random_mixture(rng);
            let r = concavity_convexity_check(&inputs, hp)?;
            let excess = (r.concave_rhs - r.concave_lhs).max(0.0);
            Ok((r.concave_lhs, r.concave_rhs, excess, mixture_tables(&inputs, true)))
        },
    },
    Property {
        name: "convexity_in_f_y_given_x",
        statement: "I(l1 g f + l2 h f) <= l1 I(g f) + l2 I(h f)",
        run: |rng, hp| {
            let inputs = random_mixture(rng);
            let r = concavity_convexity_check(&inputs, hp)?;
            let excess = (r.convex_lhs - r.convex_rhs).max(0.0);
            Ok((r.convex_lhs, r.convex_rhs, excess, mixture_tables(&inputs, false)))
        },
    },
    Property {
        name: "chain_rule",
        statement: "I(X1,X2; Y) >= I(X1; Y) - delta",
        run: |rng, hp| {
            let t = { let shape = [size(rng), size(rng), size(rng)]; random_tensor(rng, shape) };
            let g = chain_rule_gap(&t, hp)?;
            Ok((g.lhs, g.rhs - g.delta, (-g.slack()).max(0.0), vec![t.pmf]))
        },
    },
    Property {
        name: "chain_rule_delta_range",
        statement: "0 <= delta <= 1",
        run: |rng, hp| {
            let t = { let shape = [size(rng), size(rng), size(rng)]; random_tensor(rng, shape) };
            let g = chain_rule_gap(&t, hp)?;
            let excess = (-g.delta).max(g.delta - 1.0).max(0.0);
            Ok((g.delta, g.delta, excess, vec![t.pmf]))
        },
    },
    Property {
        name: "data_processing",
        statement: "I(Y; X) >= I(Z; X) - (p E[delta] + q)^-1 for X -> Y -> Z",
        run: |rng, hp| {
            let (kx, ky, kz) = (size(rng), size(rng), size(rng));
            let fz = random_pmf(rng, kz);
            let yz = random_conditional(rng, kz, ky);
            let xy = random_conditional(rng, ky, kx);
            let t = ConditionalJoint::markov(&fz, &yz, &xy)?;
            let g = data_processing_gap(&t, hp)?;
            Ok((g.lhs, g.rhs - g.slack_term, (-g.slack()).max(0.0), vec![fz, flat(&yz), flat(&xy)]))
        },
    },
];

fn random_mixture(rng: &mut ChaCha8Rng) -> MixtureInputs {
    let (kx, ky) = (size(rng), size(rng));
    MixtureInputs {
        lambda: rng.random::<f64>(),
        y_given_x: random_conditional(rng, kx, ky),
        g_x: random_pmf(rng, kx),
        h_x: random_pmf(rng, kx),
        f_x: random_pmf(rng, kx),
        g_y_given_x: random_conditional(rng, kx, ky),
        h_y_given_x: random_conditional(rng, kx, ky),
    }
}

fn mixture_tables(m: &MixtureInputs, concave: bool) -> Vec<Vec<f64>> {
    if concave {
        vec![vec![m.lambda], flat(&m.y_given_x), m.g_x.clone(), m.h_x.clone()]
    } else {
        vec![vec![m.lambda], m.f_x.clone(), flat(&m.g_y_given_x), flat(&m.h_y_given_x)]
    }
}

/// Runs every property on `sweeps` random instances. Each instance draws
/// its own `p` uniformly from `[0.05, 0.95]`.
pub fn run_property_suite(sweeps: usize, seed: u64) -> Result<PropertyReport> {
    let checks = PROPERTIES
        .iter()
        .enumerate()
        .map(|(pi, prop)| {
            let outcomes: Vec<(usize, f64, Outcome)> = (0..sweeps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(derive_seed(seed, &[pi as u64, i as u64]), STREAM_DATA);
                    let p = rng.random_range(0.05..=0.95);
                    let hp = HpParams::new(p)?;
                    (prop.run)(&mut rng, hp).map(|o| (i, p, o))
                })
                .collect::<Result<_>>()?;
            let mut check = PropertyCheck {
                name: prop.name,
                statement: prop.statement,
                instances: sweeps,
                violations: 0,
                worst_excess: 0.0,
                counterexamples: Vec::new(),
            };
            for (instance, p, (lhs, rhs, excess, inputs)) in outcomes {
                if excess > PROPERTY_TOL {
                    check.violations += 1;
                    check.worst_excess = check.worst_excess.max(excess);
                    if check.counterexamples.len() < MAX_COUNTEREXAMPLES {
                        check.counterexamples.push(Counterexample {
                            instance,
                            p,
                            lhs,
                            rhs,
                            excess,
                            inputs,
                        });
                    }
                }
            }
            Ok(check)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropertyReport {
        seed,
        sweeps,
        tolerance: PROPERTY_TOL,
        passed: checks.iter().all(PropertyCheck::passed),
        checks,
    })
}
