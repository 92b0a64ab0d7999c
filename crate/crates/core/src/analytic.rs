//! Fixed points and critical values of bond percolation on branching
//! processes and of the random-cluster model on regular trees.
//!
//! Every solver follows the same pattern: a monotone iteration brackets the
//! wanted root from one side, then bisection polishes it. No step relies on an
//! unguarded Newton update, so all routines are globally convergent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgf::OffspringLaw;
use crate::rcm::reduce::series_reduce;

/// Default tolerance on fixed-point values.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default tolerance on critical points in `p`.
pub const DEFAULT_P_TOL: f64 = 1e-8;

/// Internal tolerance for quantities fed into further solvers.
const INNER_TOL: f64 = 1e-14;
const MAX_ITER: usize = 100_000;
const MAX_BISECT: usize = 400;

/// A root together with the evidence for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub value: f64,
    pub iterations: usize,
    /// `|value − map(value)|`.
    pub residual: f64,
    pub bracket: (f64, f64),
}

impl FixedPointResult {
    fn exact(value: f64, residual: f64) -> Self {
        FixedPointResult { value, iterations: 0, residual, bracket: (value, value) }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("tolerance {tol} must be positive")))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} outside [0, 1]")))
    }
}

/// Bisection for a sign change of `h` with `h(lo) > 0 ≥ h(hi)`.
fn bisect_down(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64, usize) {
    let mut steps = 0;
    while hi - lo > width && steps < MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    (lo, hi, steps)
}

/// Largest fixed point in `[0, 1]` of a non-decreasing map with `map(0) = 0`.
///
/// Iterates downward from 1, then polishes by bisection. Returns exactly 0
/// when no point below the iterate has `map(x) > x`.
pub(crate) fn largest_fixed_point(map: impl Fn(f64) -> f64, tol: f64) -> FixedPointResult {
    let h = |x: f64| map(x) - x;
    let mut x = 1.0;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let next = map(x).min(x);
        iterations += 1;
        let step = x - next;
        x = next;
        if step < tol * 1e-3 {
            break;
        }
    }
    let hi = x;
    if h(hi) == 0.0 {
        return FixedPointResult { value: hi, iterations, residual: 0.0, bracket: (hi, hi) };
    }
    // below this, a positive h may be rounding noise
    let floor = 8.0 * f64::EPSILON;
    let mut lo = None;
    let mut step = (tol * 1e-3).max(hi * 1e-12);
    while step < hi {
        if h(hi - step) > floor {
            lo = Some(hi - step);
            break;
        }
        step *= 2.0;
    }
    if lo.is_none() {
        // scan towards zero geometrically in case the positive region is thin
        let mut y = hi * 0.5;
        for _ in 0..200 {
            if y <= 0.0 {
                break;
            }
            if h(y) > floor {
                lo = Some(y);
                break;
            }
            y *= 0.5;
        }
    }
    match lo {
        None => {
            let residual = map(0.0).abs();
            FixedPointResult { value: 0.0, iterations, residual, bracket: (0.0, hi) }
        }
        Some(lo) => {
            let (lo, hi, steps) = bisect_down(h, lo, hi, tol * 1e-3);
            let value = 0.5 * (lo + hi);
            FixedPointResult { value, iterations: iterations + steps, residual: h(value).abs(), bracket: (lo, hi) }
        }
    }
}

/// Percolation survival probability `θ`: the largest root in `[0, 1]` of
/// `θ = 1 − G(1 − pθ)`.
pub fn survival_theta(law: &OffspringLaw, p: f64, tol: f64) -> Result<FixedPointResult> {
    law.ensure_valid(false)?;
    check_unit("p", p)?;
    check_tol(tol)?;
    if p * law.mean() <= 1.0 {
        let residual = (1.0 - law.g(1.0)).abs();
        return Ok(FixedPointResult::exact(0.0, residual));
    }
    Ok(largest_fixed_point(|t| 1.0 - law.g(1.0 - p * t), tol))
}

fn theta_value(law: &OffspringLaw, p: f64) -> Result<f64> {
    Ok(survival_theta(law, p, INNER_TOL)?.value)
}

/// The unique `β ∈ (0, 1)` with `G'(β) = 1`.
pub fn unit_slope_point(law: &OffspringLaw) -> Result<f64> {
    law.ensure_valid(false)?;
    let (lo, hi, _) = bisect_down(|x| 1.0 - law.g1(x), 0.0, 1.0, 1e-16);
    Ok(0.5 * (lo + hi))
}

/// `f_p(α) = θ + G(α − pθ)` on `[pθ, 1]`.
pub fn f_p(law: &OffspringLaw, p: f64, theta: f64, alpha: f64) -> f64 {
    let arg = (alpha - p * theta).clamp(0.0, 1.0);
    theta + law.g(arg)
}

/// Probability `γ` that the root is black: the smallest root in `[pθ, 1]` of
/// `γ = θ + G(γ − pθ)`, reached by iterating `f_p` from `γ(0) = θ`.
pub fn black_gamma(law: &OffspringLaw, p: f64, tol: f64) -> Result<FixedPointResult> {
    law.ensure_valid(false)?;
    check_tol(tol)?;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::domain(format!("p = {p} outside [0, 1)")));
    }
    let theta = theta_value(law, p)?;
    let pt = p * theta;
    // slack absorbs the rounding in θ right at the threshold
    if law.g1(1.0 - pt) <= 1.0 + 1e-12 {
        let residual = (f_p(law, p, theta, 1.0) - 1.0).abs();
        return Ok(FixedPointResult::exact(1.0, residual));
    }
    let map = |a: f64| f_p(law, p, theta, a);
    let g = |a: f64| map(a) - a;

    let mut alpha = theta;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let next = map(alpha).max(alpha);
        iterations += 1;
        let step = next - alpha;
        alpha = next;
        if step < tol * 1e-3 {
            break;
        }
    }
    // f_p − id is convex with its minimum at β + pθ, where it is negative
    let hi = (unit_slope_point(law)? + pt).min(1.0);
    let lo = alpha.min(hi);
    if g(lo) == 0.0 {
        return Ok(FixedPointResult { value: lo, iterations, residual: 0.0, bracket: (lo, lo) });
    }
    let (lo, hi, steps) = bisect_down(g, lo, hi, tol * 1e-3);
    let value = 0.5 * (lo + hi);
    Ok(FixedPointResult { value, iterations: iterations + steps, residual: g(value).abs(), bracket: (lo, hi) })
}

/// `γ(k)`: the probability that the root is `k`-black, via `γ(k) = f_p(γ(k−1))`
/// from `γ(0) = θ`.
pub fn gamma_k(law: &OffspringLaw, p: f64, k: usize) -> Result<f64> {
    check_unit("p", p)?;
    let theta = theta_value(law, p)?;
    let mut g = theta;
    for _ in 0..k {
        g = f_p(law, p, theta, g);
    }
    Ok(g)
}

/// Roots of `α = f_p(α)` in `[pθ, 1]`, ascending: `[1]` or `[γ, 1]`.
pub fn fp_roots(law: &OffspringLaw, p: f64, tol: f64) -> Result<Vec<f64>> {
    let gamma = black_gamma(law, p, tol)?;
    if gamma.value >= 1.0 {
        Ok(vec![1.0])
    } else {
        Ok(vec![gamma.value, 1.0])
    }
}

/// Red-offspring mean `G'(1 − pθ)` of a red vertex.
pub fn red_mean(law: &OffspringLaw, p: f64) -> Result<f64> {
    law.ensure_valid(false)?;
    check_unit("p", p)?;
    let theta = theta_value(law, p)?;
    Ok(law.g1(1.0 - p * theta))
}

/// The threshold `p_G` with `G'(1 − p_G θ(p_G)) = 1`; `γ = 1` exactly for
/// `p ≥ p_G`.
pub fn p_g(law: &OffspringLaw, tol: f64) -> Result<f64> {
    law.ensure_valid(true)?;
    check_tol(tol)?;
    let target = 1.0 - unit_slope_point(law)?;
    let mut lo = 1.0 / law.mean();
    let mut hi = 1.0;
    while hi - lo > tol * 0.25 {
        let mid = 0.5 * (lo + hi);
        if mid * theta_value(law, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(1 − p) θ(p)`, maximised at `p = p_G`.
pub fn closed_survival(law: &OffspringLaw, p: f64) -> Result<f64> {
    Ok((1.0 - p) * theta_value(law, p)?)
}

/// Closed form of `p_G` for the `m`-ary tree:
/// `(1 − m^{−1/(m−1)}) / (1 − m^{−m/(m−1)})`.
pub fn p_b(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain(format!("m = {m} must be at least 2")));
    }
    let ln_m = (m as f64).ln();
    let a = -(-ln_m / (m as f64 - 1.0)).exp_m1();
    let b = -(-ln_m * m as f64 / (m as f64 - 1.0)).exp_m1();
    Ok(a / b)
}

/// Edge density `p / (p + q(1 − p))` of the product measure matching the
/// single-edge conditionals of an unconnected edge.
pub fn pi(p: f64, q: f64) -> Result<f64> {
    check_unit("p", p)?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::domain(format!("q = {q} must be positive")));
    }
    Ok(p / (p + q * (1.0 - p)))
}

fn check_mq(m: usize, q: f64) -> Result<()> {
    if m < 2 {
        return Err(Error::domain(format!("m = {m} must be at least 2")));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::domain(format!("q = {q} must be at least 1")));
    }
    Ok(())
}

/// Free-measure critical point `q / (m + q − 1)`, where `π(p, q) = 1/m`.
pub fn p_c0(m: usize, q: f64) -> Result<f64> {
    check_mq(m, q)?;
    Ok(q / (m as f64 + q - 1.0))
}

/// The polynomial whose double root in `(0, 1)` locates the wired critical
/// point for `q > 2`.
pub fn wired_polynomial(m: usize, p: f64, q: f64, x: f64) -> f64 {
    let r = 1.0 / (1.0 - p);
    let c = 1.0 - p * r - q;
    (q - 1.0) * x.powi(m as i32 + 1) + c * x.powi(m as i32) + r * x - 1.0
}

fn wired_polynomial_slope(m: usize, p: f64, q: f64, x: f64) -> f64 {
    let r = 1.0 / (1.0 - p);
    let c = 1.0 - p * r - q;
    let m_f = m as f64;
    (m_f + 1.0) * (q - 1.0) * x.powi(m as i32) + m_f * c * x.powi(m as i32 - 1) + r
}

/// Value of the wired polynomial at its interior local maximum, if any.
fn local_max_value(m: usize, p: f64, q: f64) -> Option<f64> {
    let r = 1.0 / (1.0 - p);
    let c = 1.0 - p * r - q;
    // F'' vanishes once on (0, ∞); F' decreases before it
    let turn = (-(m as f64 - 1.0) * c / ((m as f64 + 1.0) * (q - 1.0))).min(1.0);
    if wired_polynomial_slope(m, p, q, turn) >= 0.0 {
        return None;
    }
    let (lo, hi, _) = bisect_down(|x| wired_polynomial_slope(m, p, q, x), 0.0, turn, 1e-16);
    Some(wired_polynomial(m, p, q, 0.5 * (lo + hi)))
}

/// Wired critical point: `p_c0` for `1 ≤ q ≤ 2`, else the `p` at which the
/// wired polynomial acquires a double root in `(0, 1)`.
pub fn p_c1(m: usize, q: f64, tol: f64) -> Result<f64> {
    check_mq(m, q)?;
    check_tol(tol)?;
    if q <= 2.0 {
        return p_c0(m, q);
    }
    let crit = |p: f64| local_max_value(m, p, q).unwrap_or(-1.0);
    let mut lo = 1e-12;
    let mut hi = p_c0(m, q)?;
    if !(crit(lo) < 0.0 && crit(hi) > 0.0) {
        return Err(Error::NonConvergence(format!(
            "no sign change of the local maximum on [{lo}, {hi}] for m = {m}, q = {q}"
        )));
    }
    while hi - lo > tol * 0.25 {
        let mid = 0.5 * (lo + hi);
        if crit(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which critical value a [`CriticalCurvePoint`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Pc0,
    Pc1,
    Pb,
    PG,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurvePoint {
    pub q: f64,
    pub m: usize,
    pub p: f64,
    pub kind: CriticalKind,
}

impl CriticalCurvePoint {
    pub fn compute(kind: CriticalKind, m: usize, q: f64, tol: f64) -> Result<Self> {
        let p = match kind {
            CriticalKind::Pc0 => p_c0(m, q)?,
            CriticalKind::Pc1 => p_c1(m, q, tol)?,
            CriticalKind::Pb => p_b(m)?,
            CriticalKind::PG => p_g(&OffspringLaw::deterministic(m), tol)?,
        };
        Ok(CriticalCurvePoint { q, m, p, kind })
    }
}

/// Probability of an open path from a vertex down `depth` generations.
pub fn finite_depth_theta(law: &OffspringLaw, p: f64, depth: usize) -> Result<f64> {
    check_unit("p", p)?;
    let mut theta = 1.0;
    for _ in 0..depth {
        theta = 1.0 - law.g(1.0 - p * theta);
    }
    Ok(theta)
}

/// Exact expectation of the finite-horizon black indicator used by the
/// Monte Carlo engine: blue means an open path down to generation `horizon`,
/// and the root is tested for being `k`-black.
pub fn finite_depth_gamma(law: &OffspringLaw, p: f64, k: usize, horizon: usize) -> Result<f64> {
    check_unit("p", p)?;
    if k > horizon {
        return Err(Error::domain(format!("k = {k} exceeds horizon {horizon}")));
    }
    // blue[j] = P(vertex at depth j is blue) = θ_{horizon − j}
    let mut blue = vec![1.0; horizon + 1];
    for j in (0..horizon).rev() {
        blue[j] = 1.0 - law.g(1.0 - p * blue[j + 1]);
    }
    let mut g = blue[k];
    for j in (0..k).rev() {
        g = blue[j] + law.g((g - p * blue[j + 1]).clamp(0.0, 1.0));
    }
    Ok(g)
}

/// Effective single-edge parameters of wired subtrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    /// `r(1), …, r(levels)`.
    pub sequence: Vec<f64>,
    pub p_inf: FixedPointResult,
}

fn check_rc(m: usize, p: f64, q: f64) -> Result<()> {
    check_mq(m, q)?;
    check_unit("p", p)
}

fn attachment_step(m: usize, p: f64, q: f64, r: f64) -> f64 {
    1.0 - (1.0 - series_reduce(p, r, q)).powi(m as i32)
}

/// Parameter `r(j)` of one edge standing for a wired subtree of depth `j`
/// hanging below a vertex, with `r(0) = 1`.
pub fn attachment_parameter(m: usize, p: f64, q: f64, depth: usize) -> Result<f64> {
    check_rc(m, p, q)?;
    let mut r = 1.0;
    for _ in 0..depth {
        r = attachment_step(m, p, q, r);
    }
    Ok(r)
}

/// The sequence `r(1..=levels)` and its limit `p_∞`.
pub fn effective_attachment(m: usize, p: f64, q: f64, levels: usize) -> Result<Attachment> {
    check_rc(m, p, q)?;
    if levels == 0 {
        return Err(Error::domain("levels must be at least 1"));
    }
    let mut sequence = Vec::with_capacity(levels);
    let mut r = 1.0;
    for _ in 0..levels {
        r = attachment_step(m, p, q, r);
        sequence.push(r);
    }
    let p_inf = largest_fixed_point(|r| attachment_step(m, p, q, r), 1e-12);
    Ok(Attachment { sequence, p_inf })
}

/// Root-to-boundary connection probability under the wired measure on the
/// depth-`n` box of the `(m+1)`-regular tree.
pub fn theta1_finite(m: usize, p: f64, q: f64, n: usize) -> Result<f64> {
    check_rc(m, p, q)?;
    if n == 0 {
        return Err(Error::domain("box depth n must be at least 1"));
    }
    let s = series_reduce(p, attachment_parameter(m, p, q, n - 1)?, q);
    let b = (1.0 - s).powi(m as i32 + 1);
    let a = 1.0 - b;
    Ok(a / (a + q * b))
}
