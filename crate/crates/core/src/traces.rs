//! The trace functionals and their identities.
//!
//! For a principal symbol (sigma_+, sigma_-) with tail coefficients a_{2l},
//! the module computes
//!
//! * the regularized trace
//!   `tau = (2 pi)^{-n} int R(x) dx` with R the subtracted combination;
//! * the evaluation traces at central points z = (0, s), s != 0, through
//!   the regularized integral
//!   `tau_z = n!/(2 pi)^{2n+1} lim_{beta -> 0} int [ sigma_+ / (beta |x|^2 - i s)^{n+1}
//!            + sigma_- / (beta |x|^2 + i s)^{n+1} ] dx`;
//! * the residue trace
//!   `Res = -(2 (2 pi)^n)^{-1} int_{S^{2n-1}} a_{2n}`;
//!
//! and verifies the identities relating them:
//!
//! * main identity: `tau = (2 pi)^{n+1} / (2 n! i^{n+1}) (tau_+ - (-1)^n tau_-)`;
//! * central-value identity:
//!   `(2 pi)^{n+1} (-i s)^{n+1} / n! * tau_z = tau + sign(s) pi i Res`;
//! * the vanishing of the low-order tail integrals I_l, l < n, via the
//!   reduced real-line integrals;
//! * the principal-value limit that produces the residue contribution.
//!
//! Every regularized limit is realized as a geometric schedule plus
//! Richardson extrapolation; raw schedules are exposed for auditing. For
//! symbols with homogeneous tails, the integrand is split at |x| = 1 and the
//! tail part is evaluated with the radial substitution z = r^2, which avoids
//! catastrophic cancellation between the slowly decaying kernels.
//!
//! Powers such as (-i s)^{n+1} are always computed by repeated
//! multiplication of the literal complex number, never through logarithm
//! branches.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{
    self, exp_sinh, extrapolate_limit, integrate_plane, integrate_sphere, sphere_rule, tanh_sinh,
    Estimate, QuadratureSpec, ALGEBRAIC_TRUNCATION_RADIUS,
};
use crate::symbols::PrincipalSymbol;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// z^k by repeated multiplication.
fn cpow(z: Complex64, k: usize) -> Complex64 {
    let mut acc = c64(1.0, 0.0);
    for _ in 0..k {
        acc *= z;
    }
    acc
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// The constants entering the identities, checked for mutual consistency at
/// construction.
#[derive(Clone, Debug)]
pub struct TraceConstants {
    n: usize,
    /// eps_l = 1 - (-1)^{n+l} for l = 0..n-1 (0 when n+l is even, else 2).
    pub epsilon: Vec<f64>,
    /// (2 pi)^{n+1} / (2 n! i^{n+1}).
    pub c_main: Complex64,
}

impl TraceConstants {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("n must be >= 1".into()));
        }
        let epsilon: Vec<f64> = (0..n)
            .map(|l| if (n + l) % 2 == 0 { 0.0 } else { 2.0 })
            .collect();
        let two_pi = 2.0 * std::f64::consts::PI;
        let c_main =
            c64(two_pi.powi(n as i32 + 1), 0.0) / (2.0 * factorial(n) * cpow(c64(0.0, 1.0), n + 1));
        let constants = TraceConstants { n, epsilon, c_main };
        // The main identity must follow from the central-value identity at
        // s = +1 and s = -1; this pins both constants against each other.
        let sign_n = constants.sign_n();
        let diff = constants.c_main
            * (constants.c_prop(1.0).finv() - sign_n * constants.c_prop(-1.0).finv());
        let sum = constants.c_main
            * (constants.c_prop(1.0).finv() + sign_n * constants.c_prop(-1.0).finv());
        if (diff - c64(1.0, 0.0)).norm() > 1e-12 || sum.norm() > 1e-12 {
            return Err(Error::Validation(
                "inconsistent trace constants (main vs central-value identity)".into(),
            ));
        }
        Ok(constants)
    }

    /// (2 pi)^{n+1} (-i s)^{n+1} / n!.
    pub fn c_prop(&self, s: f64) -> Complex64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        cpow(c64(0.0, -s), self.n + 1) * two_pi.powi(self.n as i32 + 1) / factorial(self.n)
    }

    fn sign_n(&self) -> f64 {
        if self.n % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

// ---------------------------------------------------------------------------
// The regularized central-value integral
// ---------------------------------------------------------------------------

/// (beta r^2 + delta -+ i s)^{n+1}; `sign` is -1 for the sigma_+ kernel and
/// +1 for the sigma_- kernel.
#[inline]
fn kernel_pow(n: usize, beta: f64, delta: f64, s: f64, r2: f64, sign: f64) -> Complex64 {
    cpow(c64(beta * r2 + delta, sign * s), n + 1)
}

fn nan_c() -> Complex64 {
    c64(f64::NAN, f64::NAN)
}

/// int_{R^{2n}} [ sigma_+ / (beta|x|^2 + delta - is)^{n+1}
///              + sigma_- / (beta|x|^2 + delta + is)^{n+1} ] dx.
///
/// Schwartz symbols integrate directly. Tailed symbols split at |x| = 1:
/// the full integrand inside, the integrable truncations outside, plus the
/// declared tail terms reduced to 1D integrals by z = r^2:
///
///   int_{|x|>=1} w_{2l} [K_- + (-1)^l K_+]
///     = (int a_{2l}) * 1/2 int_1^inf z^{n-l-1} [D_-^{-1} + (-1)^l D_+^{-1}] dz.
fn central_integral(
    symbol: &PrincipalSymbol,
    s: f64,
    beta: f64,
    delta: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let n = symbol.dims.n();
    if symbol.is_schwartz() {
        let f = |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            symbol.sigma_plus.eval(x) / kernel_pow(n, beta, delta, s, r2, -1.0)
                + symbol.sigma_minus.eval(x) / kernel_pow(n, beta, delta, s, r2, 1.0)
        };
        return integrate_plane(f, n, spec, false);
    }

    let rule = sphere_rule(n, spec.sphere_order)?;
    let pw = (2 * n - 1) as i32;
    let mut total = quad::Estimate {
        value: c64(0.0, 0.0),
        error: 0.0,
    };
    let mut acc = crate::quad::KahanSum::new();
    let mut err = 0.0;

    for (theta, w) in &rule.nodes {
        // Inside the unit ball: the raw integrand.
        let inner = tanh_sinh(
            |r: f64| {
                let x: Vec<f64> = theta.iter().map(|ti| r * ti).collect();
                let r2 = r * r;
                (symbol.sigma_plus.eval(&x) / kernel_pow(n, beta, delta, s, r2, -1.0)
                    + symbol.sigma_minus.eval(&x) / kernel_pow(n, beta, delta, s, r2, 1.0))
                    * r.powi(pw)
            },
            0.0,
            1.0,
            spec.radial_order,
        )?;
        // Outside: the integrable truncations, integrated in log radius.
        let outer = tanh_sinh(
            |y: f64| {
                let r = y.exp();
                let x: Vec<f64> = theta.iter().map(|ti| r * ti).collect();
                let r2 = r * r;
                let tp = symbol.tilde_sigma(1, &x).unwrap_or_else(|_| nan_c());
                let tm = symbol.tilde_sigma(-1, &x).unwrap_or_else(|_| nan_c());
                (tp / kernel_pow(n, beta, delta, s, r2, -1.0)
                    + tm / kernel_pow(n, beta, delta, s, r2, 1.0))
                    * r.powi(pw)
                    * r
            },
            0.0,
            outer_log_radius(beta),
            spec.radial_order,
        )?;
        acc.add((inner.value + outer.value) * *w);
        err += (inner.error + outer.error) * w.abs();
    }

    // Declared tail terms, one 1D integral per l.
    for l in 0..=n {
        let a_l = integrate_sphere(|th| (symbol.tail.coeffs[l])(th), n, spec)?;
        if a_l.norm() == 0.0 {
            continue;
        }
        let zp = n as i32 - l as i32 - 1;
        let sgn_l = if l % 2 == 1 { -1.0 } else { 1.0 };
        let j = exp_sinh(
            |z: f64| {
                (kernel_pow(n, beta, delta, s, z, -1.0).finv()
                    + sgn_l * kernel_pow(n, beta, delta, s, z, 1.0).finv())
                    * z.powi(zp)
            },
            1.0,
            spec.radial_order.max(600),
        )?;
        acc.add(a_l * j.value * 0.5);
        err += a_l.norm() * j.error * 0.5;
    }

    total.value = acc.value();
    total.error = err;
    Ok(total)
}

/// Log-radius cutoff for the truncated-symbol part: the integrand decays
/// like r^{-3} there, and the kernels flatten beyond r ~ 1/sqrt(beta).
fn outer_log_radius(beta: f64) -> f64 {
    let base = ALGEBRAIC_TRUNCATION_RADIUS;
    let kernel_scale = if beta > 0.0 { 100.0 / beta.sqrt() } else { base };
    base.max(kernel_scale).ln()
}

// ---------------------------------------------------------------------------
// The functionals
// ---------------------------------------------------------------------------

fn require_consistent_tail(symbol: &PrincipalSymbol) -> Result<()> {
    let report = symbol.default_consistency_check()?;
    if report.flagged {
        return Err(Error::Validation(format!(
            "symbol '{}' fails the tail consistency check: residuals {:?} / {:?}",
            symbol.name, report.residual_plus, report.residual_minus
        )));
    }
    Ok(())
}

/// The regularized trace tau = (2 pi)^{-n} int R(x) dx.
pub fn tau(symbol: &PrincipalSymbol, spec: &QuadratureSpec) -> Result<Estimate> {
    require_consistent_tail(symbol)?;
    let n = symbol.dims.n();
    let spec_r = if symbol.is_schwartz() {
        spec.clone()
    } else {
        spec.clone().with_truncation_radius(ALGEBRAIC_TRUNCATION_RADIUS)
    };
    let origin_singular = !symbol.sigma_plus.smooth_at_origin;
    let est = integrate_plane(
        |x| symbol.r_function(x).unwrap_or_else(|_| nan_c()),
        n,
        &spec_r,
        origin_singular,
    )?;
    let scale = (2.0 * std::f64::consts::PI).powi(-(n as i32));
    let mut error = est.error * scale;
    if !symbol.is_schwartz() {
        error += truncation_tail_allowance(symbol, &spec_r)? * scale;
    }
    Ok(Estimate {
        value: est.value * scale,
        error,
    })
}

/// Bound the discarded radial tail of the R integrand beyond the truncation
/// radius, assuming the r^{-(2n+2)} decay of a consistent symbol.
fn truncation_tail_allowance(symbol: &PrincipalSymbol, spec: &QuadratureSpec) -> Result<f64> {
    let n = symbol.dims.n();
    let rule = sphere_rule(n, 8)?;
    let r = spec.truncation_radius;
    let mut worst = 0.0f64;
    for (theta, _) in rule.nodes.iter().take(16) {
        let x: Vec<f64> = theta.iter().map(|t| t * r).collect();
        worst = worst.max(symbol.r_function(&x).map(|v| v.norm()).unwrap_or(0.0));
    }
    // int_R^inf C r^{-(2n+2)} r^{2n-1} dr = C R^{-2} / 2 with C = |R(R)| R^{2n+2},
    // i.e. |R(R)| R^{2n} / 2 per unit of angular measure.
    let sphere_measure = if n == 1 {
        2.0 * std::f64::consts::PI
    } else {
        2.0 * std::f64::consts::PI.powi(2)
    };
    Ok(worst * r.powi(2 * n as i32) * sphere_measure / 2.0)
}

/// Result of the beta-extrapolated evaluation trace.
#[derive(Clone, Debug)]
pub struct TauZ {
    pub value: Complex64,
    pub error: f64,
    /// Scaled integral values along the beta schedule.
    pub table: Vec<(f64, Complex64)>,
    /// The beta-free reduction, available for Schwartz symbols.
    pub schwartz_reduction: Option<Complex64>,
}

/// The evaluation trace at the central point (0, s).
pub fn tau_z(symbol: &PrincipalSymbol, s: f64, spec: &QuadratureSpec) -> Result<TauZ> {
    if s == 0.0 {
        return Err(Error::Input("central point requires s != 0".into()));
    }
    require_consistent_tail(symbol)?;
    let n = symbol.dims.n();
    let two_pi = 2.0 * std::f64::consts::PI;
    let scale = factorial(n) / two_pi.powi(2 * n as i32 + 1);

    let mut table = Vec::with_capacity(spec.beta_schedule.len());
    let mut quad_err = 0.0f64;
    for &beta in &spec.beta_schedule {
        let est = central_integral(symbol, s, beta, 0.0, spec)?;
        table.push((beta, est.value * scale));
        quad_err = quad_err.max(est.error * scale);
    }
    let (limit, extrap_err) = extrapolate_limit(&table)?;
    let error = extrap_err + quad_err;

    let schwartz_reduction = if symbol.is_schwartz() {
        let plus = integrate_plane(|x| symbol.sigma_plus.eval(x), n, spec, false)?;
        let minus = integrate_plane(|x| symbol.sigma_minus.eval(x), n, spec, false)?;
        let red = (plus.value / cpow(c64(0.0, -s), n + 1)
            + minus.value / cpow(c64(0.0, s), n + 1))
            * scale;
        let tol = (3.0 * (error + (plus.error + minus.error) * scale)).max(1e-10);
        if (red - limit).norm() > tol {
            return Err(Error::Accuracy {
                context: format!(
                    "evaluation trace of '{}': extrapolation {} vs reduction {}",
                    symbol.name, limit, red
                ),
                last: (red - limit).norm(),
                prev: tol,
            });
        }
        Some(red)
    } else {
        None
    };

    Ok(TauZ {
        value: limit,
        error,
        table,
        schwartz_reduction,
    })
}

/// The residue trace Res = -(2 (2 pi)^n)^{-1} int_{S^{2n-1}} a_{2n}.
pub fn res(symbol: &PrincipalSymbol, spec: &QuadratureSpec) -> Result<Estimate> {
    let n = symbol.dims.n();
    if symbol.tail.is_empty() {
        return Ok(Estimate {
            value: c64(0.0, 0.0),
            error: 0.0,
        });
    }
    let a_n = integrate_sphere(|th| (symbol.tail.coeffs[n])(th), n, spec)?;
    let scale = -1.0 / (2.0 * (2.0 * std::f64::consts::PI).powi(n as i32));
    Ok(Estimate {
        value: a_n * scale,
        error: 1e-14 * a_n.norm() * scale.abs(),
    })
}

// ---------------------------------------------------------------------------
// Identity checkers
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TheoremCheck {
    pub tau: Estimate,
    pub tau_plus: TauZ,
    pub tau_minus: TauZ,
    pub residual: f64,
    pub error_estimate: f64,
}

/// |tau - c_main (tau_+ - (-1)^n tau_-)| with the combined error estimate.
pub fn check_main_theorem(symbol: &PrincipalSymbol, spec: &QuadratureSpec) -> Result<TheoremCheck> {
    let n = symbol.dims.n();
    let constants = TraceConstants::new(n)?;
    let t = tau(symbol, spec)?;
    let tp = tau_z(symbol, 1.0, spec)?;
    let tm = tau_z(symbol, -1.0, spec)?;
    let rhs = constants.c_main * (tp.value - constants.sign_n() * tm.value);
    let residual = (t.value - rhs).norm();
    let error_estimate = t.error + constants.c_main.norm() * (tp.error + tm.error);
    Ok(TheoremCheck {
        tau: t,
        tau_plus: tp,
        tau_minus: tm,
        residual,
        error_estimate,
    })
}

#[derive(Clone, Debug)]
pub struct PropositionCheck {
    pub s: f64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub error_estimate: f64,
}

/// |c_prop(s) tau_z - (tau + sign(s) pi i Res)|.
pub fn check_proposition(
    symbol: &PrincipalSymbol,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<PropositionCheck> {
    if s == 0.0 {
        return Err(Error::Input("central point requires s != 0".into()));
    }
    let constants = TraceConstants::new(symbol.dims.n())?;
    let t = tau(symbol, spec)?;
    let r = res(symbol, spec)?;
    let tz = tau_z(symbol, s, spec)?;
    let lhs = constants.c_prop(s) * tz.value;
    let pi_i = c64(0.0, std::f64::consts::PI);
    let rhs = t.value + s.signum() * pi_i * r.value;
    let residual = (lhs - rhs).norm();
    let error_estimate =
        constants.c_prop(s).norm() * tz.error + t.error + std::f64::consts::PI * r.error;
    Ok(PropositionCheck {
        s,
        lhs,
        rhs,
        residual,
        error_estimate,
    })
}

#[derive(Clone, Debug)]
pub struct VanishingCheck {
    /// Magnitude of the extrapolated limit (or its noise bound when the
    /// schedule sits at rounding level).
    pub residual: f64,
    pub values: Vec<(f64, Complex64)>,
}

/// The low-order tail integrals vanish: for 0 <= l <= n-1 and every beta,
/// int_R z^{n-l-1} / (beta z - i s)^{n+1} dz = 0 by contour integration.
/// Each schedule point is evaluated by real-line quadrature and the limit
/// extrapolated; a sequence at rounding level reports its magnitude bound.
pub fn check_i_l_vanishing(
    l: usize,
    n: usize,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<VanishingCheck> {
    if n == 0 || l >= n {
        return Err(Error::Input(format!(
            "vanishing check requires 0 <= l <= n-1, got l = {l}, n = {n}"
        )));
    }
    if s == 0.0 {
        return Err(Error::Input("central point requires s != 0".into()));
    }
    let zp = n as i32 - l as i32 - 1;
    let mut values = Vec::with_capacity(spec.beta_schedule.len());
    for &beta in &spec.beta_schedule {
        let est = quad::de_real_line(
            |z: f64| z.powi(zp) * cpow(c64(beta * z, -s), n + 1).finv(),
            800,
        )?;
        values.push((beta, est.value));
    }
    let residual = match extrapolate_limit(&values) {
        Ok((limit, _)) => limit.norm(),
        // No extrapolable signal: the values are quadrature noise around
        // zero, so their largest magnitude bounds the limit.
        Err(Error::Accuracy { .. }) => values.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max),
        Err(e) => return Err(e),
    };
    Ok(VanishingCheck { residual, values })
}

#[derive(Clone, Debug)]
pub struct PvLimitCheck {
    pub value: Complex64,
    pub expected: Complex64,
    pub residual: f64,
}

/// The principal-value limit that produces the residue contribution:
/// lim_{beta -> 0} int_{|z| >= beta} z^{-1} (z - i s)^{-(n+1)} dz
///   = -sign(s) pi i / (-i s)^{n+1}.
pub fn check_i_n_pv(n: usize, s: f64, spec: &QuadratureSpec) -> Result<PvLimitCheck> {
    if s == 0.0 {
        return Err(Error::Input("central point requires s != 0".into()));
    }
    if n == 0 {
        return Err(Error::Input("n must be >= 1".into()));
    }
    let est = quad::pv_integral_real_line(
        |z: f64| cpow(c64(z, -s), n + 1).finv() / z,
        &spec.pv_epsilon_schedule,
    )?;
    let pi_i = c64(0.0, std::f64::consts::PI);
    let expected = -s.signum() * pi_i / cpow(c64(0.0, -s), n + 1);
    Ok(PvLimitCheck {
        value: est.value,
        expected,
        residual: (est.value - expected).norm(),
    })
}

// ---------------------------------------------------------------------------
// The doubly regularized central Fourier value
// ---------------------------------------------------------------------------

/// The regularized inverse Fourier transform of the homogeneous extension,
/// evaluated at (0, s):
/// n!/(2 pi)^{2n+1} int [ sigma_+ / (beta|x|^2 + delta - is)^{n+1}
///                      + sigma_- / (beta|x|^2 + delta + is)^{n+1} ] dx.
pub fn regularized_center_ft(
    symbol: &PrincipalSymbol,
    s: f64,
    beta: f64,
    delta: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    if s == 0.0 {
        return Err(Error::Input("central point requires s != 0".into()));
    }
    if beta == 0.0 && delta == 0.0 {
        return Err(Error::Input(
            "beta = delta = 0 is the unregularized limit; use the evaluation trace".into(),
        ));
    }
    if !(beta > 0.0) || delta < 0.0 {
        return Err(Error::Input("requires beta > 0 and delta >= 0".into()));
    }
    let n = symbol.dims.n();
    let scale = factorial(n) / (2.0 * std::f64::consts::PI).powi(2 * n as i32 + 1);
    let est = central_integral(symbol, s, beta, delta, spec)?;
    Ok(Estimate {
        value: est.value * scale,
        error: est.error * scale,
    })
}

#[derive(Clone, Debug)]
pub struct LimitsOrderReport {
    /// delta -> 0 extrapolants at each beta of the schedule.
    pub delta_first: Vec<(f64, Complex64)>,
    /// The iterated limit beta -> 0 of the delta -> 0 extrapolants.
    pub delta_then_beta: Complex64,
    /// The opposite order: beta -> 0 first at each delta, then delta -> 0.
    pub beta_then_delta: Complex64,
    /// |delta_then_beta - beta_then_delta|; measured and reported, with no
    /// claim that the orders agree.
    pub discrepancy: f64,
}

/// Measure both orders of the iterated regularized limits.
pub fn limits_order_diagnostic(
    symbol: &PrincipalSymbol,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<LimitsOrderReport> {
    let betas: Vec<f64> = spec.beta_schedule.iter().copied().take(8).collect();
    let deltas = betas.clone();

    let mut delta_first = Vec::new();
    for &beta in &betas {
        let pairs: Result<Vec<(f64, Complex64)>> = deltas
            .iter()
            .map(|&d| Ok((d, regularized_center_ft(symbol, s, beta, d, spec)?.value)))
            .collect();
        let (g, _) = extrapolate_limit(&pairs?)?;
        delta_first.push((beta, g));
    }
    let (delta_then_beta, _) = extrapolate_limit(&delta_first)?;

    let mut beta_first = Vec::new();
    for &delta in &deltas {
        let pairs: Result<Vec<(f64, Complex64)>> = betas
            .iter()
            .map(|&b| Ok((b, regularized_center_ft(symbol, s, b, delta, spec)?.value)))
            .collect();
        let (h, _) = extrapolate_limit(&pairs?)?;
        beta_first.push((delta, h));
    }
    let (beta_then_delta, _) = extrapolate_limit(&beta_first)?;

    Ok(LimitsOrderReport {
        delta_first,
        delta_then_beta,
        beta_then_delta,
        discrepancy: (delta_then_beta - beta_then_delta).norm(),
    })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ValueWithError {
    pub re: f64,
    pub im: f64,
    pub err: f64,
}

impl ValueWithError {
    pub fn new(v: Complex64, err: f64) -> Self {
        ValueWithError {
            re: v.re,
            im: v.im,
            err,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub extrapolant_re: f64,
    pub extrapolant_im: f64,
    pub err_est: f64,
}

/// Running extrapolants along a schedule, for convergence tables.
pub fn sweep_table(values: &[(f64, Complex64)]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(values.len());
    for k in 0..values.len() {
        let prefix = &values[..=k];
        let spread = prefix
            .iter()
            .map(|(_, v)| (v - prefix.last().unwrap().1).norm())
            .fold(0.0f64, f64::max);
        let (ex, err) = if prefix.len() < 3 {
            (prefix.last().unwrap().1, spread)
        } else {
            match extrapolate_limit(prefix) {
                Ok((e, err)) => (e, err),
                Err(_) => (prefix.last().unwrap().1, spread),
            }
        };
        let (beta, v) = values[k];
        rows.push(SweepRow {
            beta,
            value_re: v.re,
            value_im: v.im,
            extrapolant_re: ex.re,
            extrapolant_im: ex.im,
            err_est: err,
        });
    }
    rows
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropositionEntry {
    pub s: f64,
    pub lhs: ValueWithError,
    pub rhs: ValueWithError,
    pub residual: f64,
    pub error_estimate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct ConvergenceTables {
    pub tau_plus: Vec<SweepRow>,
    pub tau_minus: Vec<SweepRow>,
}

/// Full per-symbol report of the trace values, identity residuals, and
/// convergence diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub schema: u32,
    pub symbol: String,
    pub n: usize,
    pub tau: ValueWithError,
    pub tau_plus: ValueWithError,
    pub tau_minus: ValueWithError,
    pub res: ValueWithError,
    pub theorem_residual: f64,
    pub theorem_error_estimate: f64,
    pub proposition_residual_pos: f64,
    pub proposition_residual_neg: f64,
    pub proposition: Vec<PropositionEntry>,
    pub convergence: ConvergenceTables,
    pub spec: QuadratureSpec,
}

pub const REPORT_SCHEMA: u32 = 1;

/// Compute every functional and residual for one symbol. `extra_s` lists
/// additional central points for the central-value identity beyond +-1.
pub fn build_report(
    symbol: &PrincipalSymbol,
    spec: &QuadratureSpec,
    extra_s: &[f64],
) -> Result<TraceReport> {
    let n = symbol.dims.n();
    let constants = TraceConstants::new(n)?;
    let t = tau(symbol, spec)?;
    let r = res(symbol, spec)?;
    let tp = tau_z(symbol, 1.0, spec)?;
    let tm = tau_z(symbol, -1.0, spec)?;

    let rhs_main = constants.c_main * (tp.value - constants.sign_n() * tm.value);
    let theorem_residual = (t.value - rhs_main).norm();
    let theorem_error_estimate = t.error + constants.c_main.norm() * (tp.error + tm.error);

    let pi_i = c64(0.0, std::f64::consts::PI);
    let mut proposition = Vec::new();
    let entry = |s: f64, tz: &TauZ| {
        let lhs = constants.c_prop(s) * tz.value;
        let rhs = t.value + s.signum() * pi_i * r.value;
        let err = constants.c_prop(s).norm() * tz.error + t.error + std::f64::consts::PI * r.error;
        PropositionEntry {
            s,
            lhs: ValueWithError::new(lhs, constants.c_prop(s).norm() * tz.error),
            rhs: ValueWithError::new(rhs, t.error + std::f64::consts::PI * r.error),
            residual: (lhs - rhs).norm(),
            error_estimate: err,
        }
    };
    let pos = entry(1.0, &tp);
    let neg = entry(-1.0, &tm);
    let proposition_residual_pos = pos.residual;
    let proposition_residual_neg = neg.residual;
    proposition.push(pos);
    proposition.push(neg);
    for &s in extra_s {
        if s == 0.0 || s == 1.0 || s == -1.0 {
            continue;
        }
        let tz = tau_z(symbol, s, spec)?;
        proposition.push(entry(s, &tz));
    }

    Ok(TraceReport {
        schema: REPORT_SCHEMA,
        symbol: symbol.name.clone(),
        n,
        tau: ValueWithError::new(t.value, t.error),
        tau_plus: ValueWithError::new(tp.value, tp.error),
        tau_minus: ValueWithError::new(tm.value, tm.error),
        res: ValueWithError::new(r.value, r.error),
        theorem_residual,
        theorem_error_estimate,
        proposition_residual_pos,
        proposition_residual_neg,
        proposition,
        convergence: ConvergenceTables {
            tau_plus: sweep_table(&tp.table),
            tau_minus: sweep_table(&tm.table),
        },
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgroup::GroupDims;
    use crate::registry;
    use std::f64::consts::PI;

    fn dims(n: usize) -> GroupDims {
        GroupDims::new(n).unwrap()
    }

    fn sym(name: &str, n: usize) -> PrincipalSymbol {
        registry::builtin(name, dims(n)).unwrap()
    }

    fn spec(n: usize) -> QuadratureSpec {
        QuadratureSpec::default_for(n)
    }

    #[test]
    fn constants_consistency() {
        for n in 1..=4 {
            TraceConstants::new(n).unwrap();
        }
        let c1 = TraceConstants::new(1).unwrap();
        // (2 pi)^2 / (2 * 1! * i^2) = -2 pi^2.
        assert!((c1.c_main - c64(-2.0 * PI * PI, 0.0)).norm() < 1e-12);
        assert_eq!(c1.epsilon, vec![2.0]);
        let c2 = TraceConstants::new(2).unwrap();
        assert_eq!(c2.epsilon, vec![0.0, 2.0]);
        // c_prop(1) at n = 1: (2 pi)^2 (-i)^2 = -4 pi^2.
        assert!((c1.c_prop(1.0) - c64(-4.0 * PI * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn tau_gaussian_n1() {
        let est = tau(&sym("gaussian", 1), &spec(1)).unwrap();
        assert!((est.value - c64(0.5, 0.0)).norm() < 1e-10, "{}", est.value);
    }

    #[test]
    fn tau_unit_and_parabolic_vanish() {
        let est = tau(&sym("unit", 1), &spec(1)).unwrap();
        assert!(est.value.norm() < 1e-12, "unit: {}", est.value);
        let est = tau(&sym("parabolic", 1), &spec(1)).unwrap();
        assert!(est.value.norm() < 1e-12, "parabolic: {}", est.value);
    }

    #[test]
    fn tau_parabolic_n2_value() {
        // R = 2[(1+r^4)^{-1/2} - r^{-2}] at n = 2 integrates to -1/2 after
        // the (2 pi)^{-2} normalization (beta-function evaluation).
        let est = tau(&sym("parabolic", 2), &spec(2)).unwrap();
        assert!(
            (est.value - c64(-0.5, 0.0)).norm() < 1e-6,
            "{} +- {}",
            est.value,
            est.error
        );
    }

    #[test]
    fn tau_z_gaussian_matches_reduction() {
        let tz = tau_z(&sym("gaussian", 1), 1.0, &spec(1)).unwrap();
        let expected = c64(-1.0 / (8.0 * PI * PI), 0.0);
        assert!(
            (tz.value - expected).norm() < 1e-9,
            "{} vs {expected}",
            tz.value
        );
        let red = tz.schwartz_reduction.unwrap();
        assert!((red - expected).norm() < 1e-11);
    }

    #[test]
    fn tau_z_unit_vanishes() {
        for s in [1.0, -1.0, 2.0] {
            let tz = tau_z(&sym("unit", 1), s, &spec(1)).unwrap();
            assert!(tz.value.norm() < 1e-10, "s={s}: {}", tz.value);
        }
    }

    #[test]
    fn tau_z_parabolic_beta_limit() {
        // Central-value identity chain: tau = 0, Res = -1/2 force
        // tau_+ = i/(8 pi); the beta-extrapolated integral must reproduce it.
        let tz = tau_z(&sym("parabolic", 1), 1.0, &spec(1)).unwrap();
        let expected = c64(0.0, 1.0 / (8.0 * PI));
        assert!(
            (tz.value - expected).norm() < 1e-6,
            "{} vs {expected} (err {})",
            tz.value,
            tz.error
        );
    }

    #[test]
    fn tau_z_rejects_s_zero() {
        assert!(matches!(
            tau_z(&sym("gaussian", 1), 0.0, &spec(1)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn res_values() {
        let s1 = spec(1);
        assert_eq!(res(&sym("gaussian", 1), &s1).unwrap().value, c64(0.0, 0.0));
        let v = res(&sym("parabolic", 1), &s1).unwrap().value;
        assert!((v - c64(-0.5, 0.0)).norm() < 1e-12, "{v}");
        let v = res(&sym("angular", 1), &s1).unwrap().value;
        assert!(v.norm() < 1e-13, "{v}");
    }

    #[test]
    fn main_theorem_gaussian_and_unit_and_angular() {
        let s1 = spec(1);
        let chk = check_main_theorem(&sym("gaussian", 1), &s1).unwrap();
        assert!(chk.residual < 1e-8, "gaussian residual {}", chk.residual);
        let chk = check_main_theorem(&sym("unit", 1), &s1).unwrap();
        assert!(chk.residual < 1e-10, "unit residual {}", chk.residual);
        assert!(chk.tau.value.norm() < 1e-12);
        let chk = check_main_theorem(&sym("angular", 1), &s1).unwrap();
        assert!(chk.residual < 1e-8, "angular residual {}", chk.residual);
    }

    #[test]
    fn proposition_parabolic_sign_flip() {
        let s1 = spec(1);
        let p = sym("parabolic", 1);
        let pos = check_proposition(&p, 1.0, &s1).unwrap();
        assert!(pos.residual < 1e-6, "s=+1 residual {}", pos.residual);
        // rhs = tau + pi i Res = -pi i / 2.
        assert!((pos.rhs - c64(0.0, -PI / 2.0)).norm() < 1e-9);
        let neg = check_proposition(&p, -1.0, &s1).unwrap();
        assert!(neg.residual < 1e-6, "s=-1 residual {}", neg.residual);
        assert!((neg.rhs - c64(0.0, PI / 2.0)).norm() < 1e-9);
        // The residue contribution flips sign between the two.
        assert!((pos.rhs + neg.rhs).norm() < 1e-9);
    }

    #[test]
    fn proposition_schwartz_reduces_to_main_identity() {
        let s1 = spec(1);
        let chk = check_proposition(&sym("gaussian", 1), 1.0, &s1).unwrap();
        assert!(chk.residual < 1e-8, "residual {}", chk.residual);
    }

    #[test]
    fn i_l_vanishing_examples() {
        let s1 = spec(1);
        let chk = check_i_l_vanishing(0, 1, 1.0, &s1).unwrap();
        assert!(chk.residual < 1e-8, "n=1 l=0: {}", chk.residual);
        let s2 = spec(2);
        let chk = check_i_l_vanishing(1, 2, 1.0, &s2).unwrap();
        assert!(chk.residual < 1e-8, "n=2 l=1: {}", chk.residual);
        let chk = check_i_l_vanishing(0, 2, -1.0, &s2).unwrap();
        assert!(chk.residual < 1e-8, "n=2 l=0 s=-1: {}", chk.residual);
        assert!(check_i_l_vanishing(1, 1, 1.0, &s1).is_err());
    }

    #[test]
    fn i_n_pv_values() {
        let s1 = spec(1);
        // n = 1, s = 1: -pi i / (-i)^2 = +pi i.
        let chk = check_i_n_pv(1, 1.0, &s1).unwrap();
        assert!(
            (chk.value - c64(0.0, PI)).norm() < 1e-8,
            "n=1 s=1: {}",
            chk.value
        );
        // n = 1, s = -1: -pi i.
        let chk = check_i_n_pv(1, -1.0, &s1).unwrap();
        assert!((chk.value - c64(0.0, -PI)).norm() < 1e-8);
        // n = 2, s = 1: -pi i / (-i)^3 = -pi (sign fixed by direct
        // quadrature; see the acceptance suite for the brute-force check).
        let chk = check_i_n_pv(2, 1.0, &s1).unwrap();
        assert!(
            (chk.value - c64(-PI, 0.0)).norm() < 1e-8,
            "n=2 s=1: {}",
            chk.value
        );
        assert!(chk.residual < 1e-8);
    }

    #[test]
    fn regularized_center_ft_limits() {
        let s1 = spec(1);
        let g = sym("gaussian", 1);
        // delta -> 0 at fixed beta matches the delta = 0 evaluation.
        let beta = 0.25;
        let pairs: Vec<(f64, Complex64)> = quad::geometric_schedule(0.25, 9)
            .into_iter()
            .map(|d| {
                (
                    d,
                    regularized_center_ft(&g, 1.0, beta, d, &s1).unwrap().value,
                )
            })
            .collect();
        let (lim, err) = extrapolate_limit(&pairs).unwrap();
        let direct = regularized_center_ft(&g, 1.0, beta, 0.0, &s1).unwrap();
        assert!(
            (lim - direct.value).norm() <= (3.0 * (err + direct.error)).max(1e-9),
            "{lim} vs {}",
            direct.value
        );

        // Degenerate inputs.
        assert!(regularized_center_ft(&g, 1.0, 0.0, 0.0, &s1).is_err());
        assert!(regularized_center_ft(&g, 0.0, 0.1, 0.0, &s1).is_err());
        assert!(regularized_center_ft(&g, 1.0, -0.1, 0.0, &s1).is_err());
    }

    #[test]
    fn functionals_are_linear() {
        use num_complex::Complex64 as C;
        let s1 = spec(1);
        let g = sym("gaussian", 1);
        let p = sym("parabolic", 1);
        let (alpha, beta) = (C::new(1.3, -0.4), C::new(-0.7, 2.1));
        let combo = registry::linear_combination(&g, alpha, &p, beta, "combo").unwrap();

        let t_combo = tau(&combo, &s1).unwrap().value;
        let t_parts = alpha * tau(&g, &s1).unwrap().value + beta * tau(&p, &s1).unwrap().value;
        assert!((t_combo - t_parts).norm() < 1e-8, "tau: {t_combo} vs {t_parts}");

        let r_combo = res(&combo, &s1).unwrap().value;
        let r_parts = alpha * res(&g, &s1).unwrap().value + beta * res(&p, &s1).unwrap().value;
        assert!((r_combo - r_parts).norm() < 1e-8);

        let z_combo = tau_z(&combo, 1.0, &s1).unwrap().value;
        let z_parts =
            alpha * tau_z(&g, 1.0, &s1).unwrap().value + beta * tau_z(&p, 1.0, &s1).unwrap().value;
        assert!((z_combo - z_parts).norm() < 1e-8, "tau_z: {z_combo} vs {z_parts}");
    }

    #[test]
    fn c_prop_scaled_tau_z_independent_of_s_within_sign() {
        let s1 = spec(1);
        let constants = TraceConstants::new(1).unwrap();
        let p = sym("parabolic", 1);
        let v1 = constants.c_prop(1.0) * tau_z(&p, 1.0, &s1).unwrap().value;
        let v2 = constants.c_prop(2.0) * tau_z(&p, 2.0, &s1).unwrap().value;
        assert!((v1 - v2).norm() < 1e-5, "{v1} vs {v2}");
        let w1 = constants.c_prop(-1.0) * tau_z(&p, -1.0, &s1).unwrap().value;
        let w2 = constants.c_prop(-0.5) * tau_z(&p, -0.5, &s1).unwrap().value;
        assert!((w1 - w2).norm() < 1e-5, "{w1} vs {w2}");
    }

    #[test]
    fn report_builds_and_serializes() {
        let s1 = spec(1);
        let rep = build_report(&sym("gaussian", 1), &s1, &[2.0, -0.5]).unwrap();
        assert_eq!(rep.schema, REPORT_SCHEMA);
        assert_eq!(rep.proposition.len(), 4);
        assert!(rep.theorem_residual < 1e-8);
        assert!(rep.convergence.tau_plus.len() == s1.beta_schedule.len());
        let js = serde_json::to_string(&rep).unwrap();
        let back: TraceReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back.symbol, "gaussian");
    }
}
