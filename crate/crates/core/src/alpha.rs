//! Minimax choice of the proportionality parameter `α`.
//!
//! The selector minimizes the surrogate `Δ̃(α, ε*) + c_d (1 - α) / n` over
//! the feasible interval `[α_L, α_U]` with `ε* = C^U_ε`, classifying the
//! solution by the sign of its derivative `Ξ` at the endpoints.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Density bounds of the joint and marginals on their support, plus the
/// smoothness, dimension, support volume and sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBounds {
    pub cl_xy: f64,
    pub cu_xy: f64,
    pub cl_x: f64,
    pub cu_x: f64,
    pub cl_y: f64,
    pub cu_y: f64,
    pub eta: f64,
    pub d: usize,
    pub volume: f64,
    pub n: usize,
}

impl DensityBounds {
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("xy", self.cl_xy, self.cu_xy),
            ("x", self.cl_x, self.cu_x),
            ("y", self.cl_y, self.cu_y),
        ];
        for (name, lo, hi) in pairs {
            if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "density bounds for {name} need 0 < lower <= upper, got {lo}, {hi}"
                )));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("d must be at least 2, got {}", self.d)));
        }
        if !(self.volume > 0.0 && self.volume.is_finite()) {
            return Err(Error::InvalidParameter(format!("volume must be positive, got {}", self.volume)));
        }
        if self.n < 1 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.eps_lower() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "C^L_eps = {} exceeds 1",
                self.eps_lower()
            )));
        }
        Ok(())
    }

    /// `C^L_ε = cl_xy / (cu_x cu_y)`.
    pub fn eps_lower(&self) -> f64 {
        self.cl_xy / (self.cu_x * self.cu_y)
    }

    /// `C^U_ε = cu_xy / (cl_x cl_y)`.
    pub fn eps_upper(&self) -> f64 {
        self.cu_xy / (self.cl_x * self.cl_y)
    }

    /// `C_n = cl_xy n / 2`.
    pub fn c_n(&self) -> f64 {
        self.cl_xy * self.n as f64 / 2.0
    }

    /// `l_n = floor(n^{η / (d² (1 + η))})`.
    pub fn l_n(&self) -> usize {
        let d = self.d as f64;
        let e = self.eta / (d * d * (1.0 + self.eta));
        // Guard against floor landing one below an exact integer power.
        let v = (self.n as f64).powf(e);
        let r = v.round();
        if (v - r).abs() < 1e-9 * r.max(1.0) {
            r as usize
        } else {
            v.floor() as usize
        }
    }

    /// Bounds of a zero-mean bivariate Gaussian with unit variances and
    /// correlation `rho`, restricted to the box `[-a, a]²`. Marginals are
    /// standard normal on `[-a, a]`.
    pub fn gaussian_box(rho: f64, half_width: f64, eta: f64, n: usize) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidParameter("half_width must be positive".into()));
        }
        let a = half_width;
        let s = 1.0 - rho * rho;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * s.sqrt());
        // The quadratic form peaks over the box at the corner where x and y
        // have opposite signs to rho.
        let corner = (2.0 * a * a + 2.0 * rho.abs() * a * a) / (2.0 * s);
        let phi = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let b = Self {
            cl_xy: norm * (-corner).exp(),
            cu_xy: norm,
            cl_x: phi(a),
            cu_x: phi(0.0),
            cl_y: phi(a),
            cu_y: phi(0.0),
            eta,
            d: 2,
            volume: 4.0 * a * a,
            n,
        };
        b.validate()?;
        Ok(b)
    }
}

/// Maximum degree of a Euclidean MST in dimension `d`: the kissing number
/// for `d <= 8`, and `3^d - 1` (a cube-neighbour bound) above.
pub fn mst_degree_bound(d: usize) -> f64 {
    const KISSING: [f64; 9] = [0.0, 2.0, 6.0, 12.0, 24.0, 40.0, 72.0, 126.0, 240.0];
    if d <= 8 {
        KISSING[d]
    } else {
        3f64.powi(d as i32) - 1.0
    }
}

/// Unnamed constants of the rate bounds. `a`/`b` hold the weights `a_i`,
/// `b_i`; `None` means `a_i = b_i = 1` for `i = 1..l_n^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub c: f64,
    pub c_prime: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_dprime: f64,
    pub c1_prime: f64,
    pub c_d: f64,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
}

impl RateConstants {
    pub fn defaults(d: usize) -> Self {
        Self {
            c: 1.0,
            c_prime: 1.0,
            c1: 1.0,
            c2: 1.0,
            c_dprime: 1.0,
            c1_prime: 1.0,
            c_d: mst_degree_bound(d),
            a: None,
            b: None,
        }
    }

    /// Weights `(a_i, b_i)` for a given `l_n` and dimension.
    pub fn weights(&self, l: usize, d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = l.pow(d as u32);
        let a = self.a.clone().unwrap_or_else(|| vec![1.0; m]);
        let b = self.b.clone().unwrap_or_else(|| vec![1.0; a.len()]);
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::Shape("a and b weights must have the same nonzero length".into()));
        }
        let ld = (l as f64).powi(d as i32);
        for (name, w) in [("a", &a), ("b", &b)] {
            let s: f64 = w.iter().sum::<f64>() / ld;
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "sum of {name}_i l^-d is {s}, expected 1"
                )));
            }
        }
        if a.iter().zip(&b).any(|(x, y)| !(*x > 0.0 && x <= y)) {
            return Err(Error::InvalidParameter("weights need 0 < a_i <= b_i".into()));
        }
        Ok((a, b))
    }

    fn validate(&self) -> Result<()> {
        let all = [self.c, self.c_prime, self.c1, self.c2, self.c_dprime, self.c1_prime, self.c_d];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("rate constants must be positive".into()));
        }
        Ok(())
    }
}

/// Which display of the bound kernel `G̃` to use. With `s = 1/(β C_n)`:
///
/// - `Simplified`: `(1 + s ε)(1 + ε + s ε) / (α ε + β)²`
/// - `Direct`: `(ε + s)(1 + ε + s) / (α + β ε)²`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GTildeForm {
    #[default]
    Simplified,
    Direct,
}

/// Numerators, denominator base and their α-derivatives.
struct GParts {
    n1: f64,
    n2: f64,
    l: f64,
    dn1: f64,
    dn2: f64,
    dl: f64,
}

fn g_parts(eps: f64, alpha: f64, c_n: f64, form: GTildeForm) -> GParts {
    let beta = 1.0 - alpha;
    let s = 1.0 / (beta * c_n);
    let ds = s / beta;
    match form {
        GTildeForm::Simplified => GParts {
            n1: 1.0 + s * eps,
            n2: 1.0 + eps + s * eps,
            l: alpha * eps + beta,
            dn1: ds * eps,
            dn2: ds * eps,
            dl: eps - 1.0,
        },
        GTildeForm::Direct => GParts {
            n1: eps + s,
            n2: 1.0 + eps + s,
            l: alpha + beta * eps,
            dn1: ds,
            dn2: ds,
            dl: 1.0 - eps,
        },
    }
}

/// `G̃(ε, α)` with `β = 1 - α`.
pub fn g_tilde(eps: f64, alpha: f64, c_n: f64, form: GTildeForm) -> f64 {
    let g = g_parts(eps, alpha, c_n, form);
    g.n1 * g.n2 / (g.l * g.l)
}

/// `∂G̃/∂α`.
pub fn g_tilde_dalpha(eps: f64, alpha: f64, c_n: f64, form: GTildeForm) -> f64 {
    let g = g_parts(eps, alpha, c_n, form);
    (g.dn1 * g.n2 + g.n1 * g.dn2) / (g.l * g.l) - 2.0 * g.n1 * g.n2 * g.dl / (g.l * g.l * g.l)
}

/// Feasible interval `(α_L, α_U)`.
pub fn alpha_bounds(bounds: &DensityBounds) -> Result<(f64, f64)> {
    bounds.validate()?;
    let c_n = bounds.c_n();
    let n = bounds.n as f64;
    let lo = 2.0 / c_n;
    let hi = [
        0.25,
        (1.0 + 1.0 / c_n) / (4.0 + 2.0 * bounds.eps_upper()),
        1.0 - n.powf(bounds.eta / bounds.d as f64 - 1.0),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    if lo >= hi {
        return Err(Error::InfeasibleInterval { lo, hi });
    }
    Ok((lo, hi))
}

fn l_n_checked(bounds: &DensityBounds) -> Result<usize> {
    let l = bounds.l_n();
    if l < 1 {
        return Err(Error::InvalidParameter(format!(
            "l_n = 0 for n = {}, eta = {}, d = {}",
            bounds.n, bounds.eta, bounds.d
        )));
    }
    Ok(l)
}

/// The α-independent term `D(n, l_n, d, η)`.
pub fn d_term(bounds: &DensityBounds, consts: &RateConstants) -> Result<f64> {
    let l = l_n_checked(bounds)? as f64;
    let (n, d) = (bounds.n as f64, bounds.d as f64);
    let ld = l.powf(d);
    Ok(consts.c2 * ld / n
        + consts.c_d * 2f64.powf(d) / n
        + consts.c_prime * ld * n.powf(-bounds.eta / d)
        + consts.c * ld * n.powf(-1.0 / d)
        + 2.0 * consts.c1 * l.powf(d - 1.0) * n.powf(1.0 / d - 1.0))
}

/// The factor `D̃(n, l_n, d)` multiplying the `G̃` integral.
pub fn d_tilde(bounds: &DensityBounds, consts: &RateConstants) -> Result<f64> {
    let li = l_n_checked(bounds)?;
    let (a, b) = consts.weights(li, bounds.d)?;
    let l = li as f64;
    let (n, d) = (bounds.n as f64, bounds.d as f64);
    let ld = l.powf(d);
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    for (&ai, &bi) in a.iter().zip(&b) {
        s1 += l * ld / ai;
        s2 += l * l.powf(d / 2.0) * bi.sqrt() * ai * ai;
        s3 += 2.0
            * n.powf(-1.5)
            * l.powf(-d / 2.0)
            * (bi.sqrt() / (ai * ai))
            * (n * ai * ld + n * n * ai * ai).sqrt()
            * (n * bi * ld + n * n * bi * bi).sqrt();
    }
    Ok(2.0 + 2.0 * consts.c_dprime * s1 / n + 2.0 * consts.c1_prime * s2 * n.powf(-1.5) + s3 / n)
}

/// `Δ̃(α, ε*) = D + D̃ C^U_XY V G̃(ε*, α)`.
pub fn delta_tilde(
    alpha: f64,
    eps_star: f64,
    bounds: &DensityBounds,
    consts: &RateConstants,
    form: GTildeForm,
) -> Result<f64> {
    check_alpha(alpha)?;
    let scale = d_tilde(bounds, consts)? * bounds.cu_xy * bounds.volume;
    Ok(d_term(bounds, consts)? + scale * g_tilde(eps_star, alpha, bounds.c_n(), form))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Precomputed pieces of the objective for fixed bounds and constants.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    d: f64,
    scale: f64,
    eps_star: f64,
    c_n: f64,
    c_d: f64,
    n: f64,
    form: GTildeForm,
}

impl Objective {
    pub fn new(bounds: &DensityBounds, consts: &RateConstants, form: GTildeForm) -> Result<Self> {
        bounds.validate()?;
        consts.validate()?;
        Ok(Self {
            d: d_term(bounds, consts)?,
            scale: d_tilde(bounds, consts)? * bounds.cu_xy * bounds.volume,
            eps_star: bounds.eps_upper(),
            c_n: bounds.c_n(),
            c_d: consts.c_d,
            n: bounds.n as f64,
            form,
        })
    }

    /// `Δ̃(α, C^U_ε) + c_d (1 - α) / n`.
    pub fn value(&self, alpha: f64) -> f64 {
        self.d + self.scale * g_tilde(self.eps_star, alpha, self.c_n, self.form) + self.c_d * (1.0 - alpha) / self.n
    }

    /// `Ξ(α)`, the analytic α-derivative of [`Objective::value`].
    pub fn xi(&self, alpha: f64) -> f64 {
        self.scale * g_tilde_dalpha(self.eps_star, alpha, self.c_n, self.form) - self.c_d / self.n
    }
}

pub fn objective(alpha: f64, bounds: &DensityBounds, consts: &RateConstants, form: GTildeForm) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Objective::new(bounds, consts, form)?.value(alpha))
}

pub fn xi(alpha: f64, bounds: &DensityBounds, consts: &RateConstants, form: GTildeForm) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Objective::new(bounds, consts, form)?.xi(alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaCase {
    /// `Ξ(α_L) > 0`.
    LowerBound,
    /// `Ξ(α_U) < 0`.
    UpperBound,
    /// `Ξ(α̃) = 0` inside the interval.
    InteriorRoot,
    /// `Ξ(α_L) > 0` and `Ξ(α_U) < 0` together: the endpoint rules conflict,
    /// so the objective is minimized on a grid.
    GridScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSolution {
    pub alpha_tilde: f64,
    pub case: AlphaCase,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub form: GTildeForm,
    pub warning: Option<String>,
}

/// Grid size used by the [`AlphaCase::GridScan`] fallback.
pub const GRID_POINTS: usize = 10_001;

pub fn select_alpha(bounds: &DensityBounds, consts: &RateConstants, form: GTildeForm) -> Result<AlphaSolution> {
    let (lo, hi) = alpha_bounds(bounds)?;
    let obj = Objective::new(bounds, consts, form)?;
    let mut s = classify(lo, hi, |a| obj.value(a), |a| obj.xi(a))?;
    s.form = form;
    Ok(s)
}

fn classify(lo: f64, hi: f64, value: impl Fn(f64) -> f64, xi: impl Fn(f64) -> f64) -> Result<AlphaSolution> {
    let (xi_lo, xi_hi) = (xi(lo), xi(hi));
    if !(xi_lo.is_finite() && xi_hi.is_finite()) {
        return Err(Error::Numeric(format!("Xi is not finite at the endpoints: {xi_lo}, {xi_hi}")));
    }
    let solution = |alpha_tilde, case, warning| AlphaSolution {
        alpha_tilde,
        case,
        alpha_lo: lo,
        alpha_hi: hi,
        xi_lo,
        xi_hi,
        form: GTildeForm::default(),
        warning,
    };

    if xi_lo > 0.0 && xi_hi < 0.0 {
        let best = (0..GRID_POINTS)
            .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
            .map(|a| (a, value(a)))
            .fold((lo, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        return Ok(solution(
            best.0,
            AlphaCase::GridScan,
            Some("Xi is positive at alpha_lo and negative at alpha_hi; used grid minimizer".into()),
        ));
    }
    if xi_lo > 0.0 {
        return Ok(solution(lo, AlphaCase::LowerBound, None));
    }
    if xi_hi < 0.0 {
        return Ok(solution(hi, AlphaCase::UpperBound, None));
    }

    let (mut a, mut b) = (lo, hi);
    let mut mid = 0.5 * (a + b);
    for _ in 0..200 {
        mid = 0.5 * (a + b);
        let x = xi(mid);
        if x.abs() < 1e-10 || b - a < 1e-12 {
            break;
        }
        if x < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(solution(mid, AlphaCase::InteriorRoot, None))
}
