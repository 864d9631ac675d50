//! Numerical integration and limit-extraction engines.
//!
//! Everything downstream reduces to a handful of 1D engines plus sphere
//! product rules:
//!
//! * tanh-sinh (double-exponential) rules on finite intervals, with nested
//!   refinement and an error estimate from the last two levels;
//! * exp-sinh rules on semi-infinite intervals, used for radial tails and
//!   the substituted z = r^2 integrals;
//! * a double-exponential rule for the whole real line;
//! * Gauss-Legendre and Gauss-Laguerre rules (the latter selectable for
//!   exponentially decaying radial integrands);
//! * trapezoid rule on S^1 and a Gauss-Legendre x trapezoid product rule in
//!   Hopf angles on S^3 (higher spheres are rejected, not approximated);
//! * Richardson extrapolation of geometric parameter schedules, with the
//!   leading error power estimated from the data.
//!
//! All accumulation is compensated (Kahan) and runs in a fixed order, so
//! results are bit-stable across runs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A computed value together with an absolute error estimate.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadialScheme {
    DoubleExponential,
    GaussLaguerre,
}

/// Discretization parameters shared by all integral and limit engines.
///
/// The beta and epsilon schedules realize the regularized limits: evaluate
/// on the geometric schedule, then Richardson-extrapolate. Raw schedules are
/// exposed in reports so the extrapolation can be audited.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Target number of radial quadrature nodes.
    pub radial_order: usize,
    pub radial_scheme: RadialScheme,
    /// S^1: number of trapezoid points. S^3: Gauss-Legendre order of the
    /// polar factor (each periodic factor uses twice this many points).
    pub sphere_order: usize,
    /// Radial truncation for integrals over R^{2n} of rapidly decaying
    /// integrands. Algebraically decaying trace integrands override this
    /// with `ALGEBRAIC_TRUNCATION_RADIUS`.
    pub truncation_radius: f64,
    /// Geometric schedule beta_0 * 2^{-k} for the regularized limits.
    pub beta_schedule: Vec<f64>,
    /// Geometric schedule for principal-value exclusion radii.
    pub pv_epsilon_schedule: Vec<f64>,
    /// Per-dimension grid size of the sharp-product Fourier stage.
    pub sharp_grid: usize,
    /// Half-width of the sharp-product sampling box.
    pub sharp_halfwidth: f64,
}

/// Truncation radius for algebraically decaying trace integrands; the part
/// beyond it is either covered analytically (declared power tails, via the
/// z = r^2 substitution) or bounded into the error estimate.
pub const ALGEBRAIC_TRUNCATION_RADIUS: f64 = 1.0e4;

impl QuadratureSpec {
    /// Defaults tuned for H_n.
    pub fn default_for(n: usize) -> Self {
        let (sphere_order, sharp_grid, sharp_halfwidth) = match n {
            1 => (64, 256, 12.0),
            _ => (12, 64, 9.0),
        };
        QuadratureSpec {
            radial_order: 400,
            radial_scheme: RadialScheme::DoubleExponential,
            sphere_order,
            truncation_radius: 40.0,
            beta_schedule: geometric_schedule(0.25, 11),
            pv_epsilon_schedule: geometric_schedule(0.1, 11),
            sharp_grid,
            sharp_halfwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_order < 4 || self.sphere_order < 4 {
            return Err(Error::Validation(
                "quadrature orders must be at least 4".into(),
            ));
        }
        if !(self.truncation_radius > 1.0) {
            return Err(Error::Validation(
                "truncation radius must exceed 1".into(),
            ));
        }
        for sched in [&self.beta_schedule, &self.pv_epsilon_schedule] {
            if sched.len() < 3 {
                return Err(Error::Validation("schedules need at least 3 points".into()));
            }
            for w in sched.windows(2) {
                if !(w[1] > 0.0 && w[1] < w[0]) {
                    return Err(Error::Validation(
                        "schedules must be strictly decreasing toward 0".into(),
                    ));
                }
            }
        }
        if self.sharp_grid < 8 || !(self.sharp_halfwidth > 1.0) {
            return Err(Error::Validation("sharp grid parameters out of range".into()));
        }
        Ok(())
    }

    pub fn with_truncation_radius(mut self, r: f64) -> Self {
        self.truncation_radius = r;
        self
    }

    /// A copy with roughly halved orders, used for refinement-based error
    /// estimates.
    fn coarsened(&self) -> Self {
        let mut c = self.clone();
        c.radial_order = (self.radial_order / 2).max(4);
        c.sphere_order = (self.sphere_order * 2 / 3).max(4);
        c
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::default_for(1)
    }
}

/// start * 2^{-k} for k = 0..count-1.
pub fn geometric_schedule(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * 0.5f64.powi(k as i32)).collect()
}

// ---------------------------------------------------------------------------
// Compensated accumulation
// ---------------------------------------------------------------------------

/// Kahan-compensated complex accumulator. The trace checks push f64 to its
/// limits (residuals at 1e-8 against integrals with large absolute mass), so
/// plain summation noise is not acceptable.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum {
    sum: Complex64,
    comp: Complex64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum {
            sum: Complex64::new(0.0, 0.0),
            comp: Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    pub fn add(&mut self, term: Complex64) {
        let y = term - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        self.sum
    }
}

fn check_finite(v: Complex64, where_: &str) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!(
            "non-finite sample encountered in {where_}"
        )))
    }
}

// ---------------------------------------------------------------------------
// Gauss rules
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mh = (m + 1) / 2;
    for i in 0..mh {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Laguerre nodes and weights for weight e^{-x} on (0, inf).
pub fn gauss_laguerre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mut x = 0.0;
    for i in 0..m {
        // Stroud-Secrest style initial guesses.
        x = if i == 0 {
            3.0 / (1.0 + 2.4 * m as f64)
        } else if i == 1 {
            x + 15.0 / (1.0 + 2.5 * m as f64)
        } else {
            let fi = (i - 1) as f64;
            x + (1.0 + 2.55 * fi) / (1.9 * fi) * (x - nodes[i - 2])
        };
        for _ in 0..200 {
            let (mut l0, mut l1) = (1.0, 1.0 - x);
            for k in 2..=m {
                let kf = k as f64;
                let l2 = ((2.0 * kf - 1.0 - x) * l1 - (kf - 1.0) * l0) / kf;
                l0 = l1;
                l1 = l2;
            }
            if m == 1 {
                l1 = 1.0 - x;
                l0 = 1.0;
            }
            let dp = m as f64 * (l1 - l0) / x;
            let dx = l1 / dp;
            x -= dx;
            if dx.abs() < 1e-14 * (1.0 + x) {
                break;
            }
        }
        nodes[i] = x;
        // w_i = x_i / ((m+1)^2 [L_{m+1}(x_i)]^2)
        let (mut l0, mut l1) = (1.0, 1.0 - x);
        for k in 2..=(m + 1) {
            let kf = k as f64;
            let l2 = ((2.0 * kf - 1.0 - x) * l1 - (kf - 1.0) * l0) / kf;
            l0 = l1;
            l1 = l2;
        }
        let mp1 = (m + 1) as f64;
        weights[i] = x / (mp1 * mp1 * l1 * l1);
    }
    (nodes, weights)
}

// ---------------------------------------------------------------------------
// Double-exponential engines
// ---------------------------------------------------------------------------

// t-ranges of the double-exponential rules. The finite rule reaches far
// enough into the corners to integrate hard endpoint singularities at full
// precision while keeping endpoint offsets >= ~1e-123, so squared radii
// built from the nodes never underflow; offsets that still round to zero
// are skipped via zero weights.
const DE_TMAX_FINITE: f64 = 5.2;
const DE_TMAX_SEMI: f64 = 4.3;
const DE_TMAX_LINE: f64 = 4.5;

struct DeLevels {
    value: Complex64,
    error: f64,
}

/// Generic nested double-exponential driver. `node` maps t to (x, weight);
/// levels halve the step, reusing earlier samples, and stop once the last
/// two levels agree or the node budget is reached.
fn de_driver<F, N>(f: F, node: N, tmax: f64, order: usize, context: &str) -> Result<DeLevels>
where
    F: Fn(f64) -> Complex64,
    N: Fn(f64) -> (f64, f64),
{
    let mut h = 0.5;
    let mut acc = KahanSum::new();
    let mut abs_mass = 0.0;
    // Level 0: coarse grid including t = 0.
    {
        let (x0, w0) = node(0.0);
        let v = check_finite(f(x0), context)?;
        acc.add(w0 * h * v);
        abs_mass += (w0 * h * v).norm();
        let mut j = 1;
        loop {
            let t = j as f64 * h;
            if t > tmax {
                break;
            }
            for tt in [t, -t] {
                let (x, w) = node(tt);
                if w == 0.0 || !w.is_finite() {
                    continue;
                }
                let v = check_finite(f(x), context)?;
                acc.add(w * h * v);
                abs_mass += (w * h * v).norm();
            }
            j += 1;
        }
    }
    let mut prev = acc.value();
    let mut error = f64::MAX;
    let mut nodes_used = (2.0 * tmax / h) as usize;
    while nodes_used < order.max(16) {
        h *= 0.5;
        // Add the odd multiples of the new step; old contributions are
        // already in `acc` and just get re-weighted by the factor 1/2
        // implicit in halving h.
        let mut new_acc = KahanSum::new();
        let mut j = 1;
        loop {
            let t = j as f64 * h;
            if t > tmax {
                break;
            }
            for tt in [t, -t] {
                let (x, w) = node(tt);
                if w == 0.0 || !w.is_finite() {
                    continue;
                }
                let v = check_finite(f(x), context)?;
                new_acc.add(w * h * v);
                abs_mass += (w * h * v).norm();
            }
            j += 2;
        }
        let current = prev * 0.5 + new_acc.value();
        error = (current - prev).norm();
        nodes_used = (2.0 * tmax / h) as usize;
        let scale = current.norm().max(abs_mass * 1e-3);
        prev = current;
        if error <= 1e-14 * scale.max(1e-280) {
            break;
        }
    }
    Ok(DeLevels {
        value: prev,
        error: error.min(abs_mass) + 1e-16 * abs_mass,
    })
}

/// Tanh-sinh rule on a finite interval (a, b). Endpoint singularities that
/// are integrable are handled by the double-exponential clustering; the
/// endpoints themselves are never sampled.
pub fn tanh_sinh<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, order: usize) -> Result<Estimate> {
    if !(b > a) {
        return Err(Error::Input(format!("bad interval ({a}, {b})")));
    }
    let hl = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    let node = |t: f64| {
        let u = pi2 * t.sinh();
        // Offset from the nearer endpoint in a cancellation-free form, so
        // nodes never collapse onto an endpoint singularity.
        let e = (-2.0 * u.abs()).exp();
        let off = hl * 2.0 * e / (1.0 + e); // hl * (1 - |tanh u|)
        if off == 0.0 {
            return (a, 0.0);
        }
        let x = if t >= 0.0 { b - off } else { a + off };
        let sech = 2.0 * (-u.abs()).exp() / (1.0 + e);
        let w = hl * pi2 * t.cosh() * sech * sech;
        (x, w)
    };
    let lv = de_driver(f, node, DE_TMAX_FINITE, order, "tanh-sinh rule")?;
    Ok(Estimate {
        value: lv.value,
        error: lv.error,
    })
}

/// Exp-sinh rule on (a, inf), for integrands with algebraic or exponential
/// decay. Nodes reach ~e^50 above `a`, so slowly decaying tails with small
/// prefactors are still captured.
pub fn exp_sinh<F: Fn(f64) -> Complex64>(f: F, a: f64, order: usize) -> Result<Estimate> {
    let pi2 = std::f64::consts::FRAC_PI_2;
    let node = |t: f64| {
        let u = pi2 * t.sinh();
        let e = u.exp();
        (a + e, pi2 * t.cosh() * e)
    };
    let lv = de_driver(f, node, DE_TMAX_SEMI, order, "exp-sinh rule")?;
    Ok(Estimate {
        value: lv.value,
        error: lv.error,
    })
}

/// Double-exponential rule over the whole real line.
pub fn de_real_line<F: Fn(f64) -> Complex64>(f: F, order: usize) -> Result<Estimate> {
    let node = |t: f64| {
        let u = 2.0 * t.sinh();
        (u.sinh(), 2.0 * t.cosh() * u.cosh())
    };
    let lv = de_driver(f, node, DE_TMAX_LINE, order, "real-line rule")?;
    Ok(Estimate {
        value: lv.value,
        error: lv.error,
    })
}

// ---------------------------------------------------------------------------
// Sphere rules
// ---------------------------------------------------------------------------

/// Quadrature rule on S^{2n-1} with the unnormalized surface measure
/// (total 2*pi on S^1, 2*pi^2 on S^3).
pub struct SphereRule {
    /// (point on the sphere, weight)
    pub nodes: Vec<(Vec<f64>, f64)>,
}

/// Build the sphere rule. Only n = 1 and n = 2 are supported; larger n is a
/// declared capability bound rather than a silent accuracy loss.
pub fn sphere_rule(n: usize, sphere_order: usize) -> Result<SphereRule> {
    match n {
        1 => {
            let m = sphere_order.max(4);
            let w = 2.0 * std::f64::consts::PI / m as f64;
            let nodes = (0..m)
                .map(|j| {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    (vec![phi.cos(), phi.sin()], w)
                })
                .collect();
            Ok(SphereRule { nodes })
        }
        2 => {
            // Hopf coordinates: x = (cos(eta) e^{i phi1}, sin(eta) e^{i phi2}),
            // d theta = cos(eta) sin(eta) d eta d phi1 d phi2.
            let g = sphere_order.max(4);
            let m = 2 * g;
            let (gn, gw) = gauss_legendre(g);
            let half_pi = std::f64::consts::FRAC_PI_2;
            let wphi = 2.0 * std::f64::consts::PI / m as f64;
            let mut nodes = Vec::with_capacity(g * m * m);
            for (eta_ref, w_eta) in gn.iter().zip(&gw) {
                let eta = half_pi * 0.5 * (eta_ref + 1.0);
                let jac = half_pi * 0.5 * w_eta * eta.cos() * eta.sin();
                let (ce, se) = (eta.cos(), eta.sin());
                for j1 in 0..m {
                    let p1 = 2.0 * std::f64::consts::PI * j1 as f64 / m as f64;
                    for j2 in 0..m {
                        let p2 = 2.0 * std::f64::consts::PI * j2 as f64 / m as f64;
                        nodes.push((
                            vec![ce * p1.cos(), ce * p1.sin(), se * p2.cos(), se * p2.sin()],
                            jac * wphi * wphi,
                        ));
                    }
                }
            }
            Ok(SphereRule { nodes })
        }
        _ => Err(Error::Capability(format!(
            "sphere quadrature supports n in {{1, 2}}, got n = {n}"
        ))),
    }
}

/// Chart angles of a sphere point: [theta1] = [atan2(x2, x1)] on S^1;
/// [eta, phi1, phi2] in Hopf coordinates on S^3.
pub fn sphere_chart_angles(n: usize, theta: &[f64]) -> Result<Vec<f64>> {
    match n {
        1 => Ok(vec![theta[1].atan2(theta[0])]),
        2 => {
            let r12 = (theta[0] * theta[0] + theta[1] * theta[1]).sqrt();
            let r34 = (theta[2] * theta[2] + theta[3] * theta[3]).sqrt();
            Ok(vec![
                r34.atan2(r12),
                theta[1].atan2(theta[0]),
                theta[3].atan2(theta[2]),
            ])
        }
        _ => Err(Error::Capability(format!(
            "sphere charts support n in {{1, 2}}, got n = {n}"
        ))),
    }
}

/// Integral of a bounded angular function over S^{2n-1}.
pub fn integrate_sphere<G: Fn(&[f64]) -> Complex64>(
    g: G,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    let rule = sphere_rule(n, spec.sphere_order)?;
    let mut acc = KahanSum::new();
    for (pt, w) in &rule.nodes {
        let v = check_finite(g(pt), "sphere quadrature")?;
        acc.add(v * *w);
    }
    Ok(acc.value())
}

// ---------------------------------------------------------------------------
// Integrals over R^{2n}
// ---------------------------------------------------------------------------

fn radial_integral<F: Fn(&[f64]) -> Complex64>(
    f: &F,
    theta: &[f64],
    n: usize,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    let pw = (2 * n - 1) as i32;
    let g = |r: f64| {
        let p: Vec<f64> = theta.iter().map(|ti| r * ti).collect();
        f(&p) * r.powi(pw)
    };
    match spec.radial_scheme {
        RadialScheme::DoubleExponential => {
            // Split at r = 1 and integrate the outer part in log-radius, so
            // integrands living on scales far from the endpoints (algebraic
            // tails, regularized kernels) are resolved uniformly.
            let inner = tanh_sinh(g, 0.0, 1.0, spec.radial_order)?.value;
            let log_r = spec.truncation_radius.ln();
            let outer = tanh_sinh(
                |y: f64| {
                    let r = y.exp();
                    g(r) * r
                },
                0.0,
                log_r,
                spec.radial_order,
            )?
            .value;
            Ok(inner + outer)
        }
        RadialScheme::GaussLaguerre => {
            let m = spec.radial_order.min(96).max(4);
            let (nodes, weights) = gauss_laguerre(m);
            let mut acc = KahanSum::new();
            for (r, w) in nodes.iter().zip(&weights) {
                let v = check_finite(g(*r), "Gauss-Laguerre radial rule")?;
                acc.add(v * (w * r.exp()));
            }
            Ok(acc.value())
        }
    }
}

fn plane_pass<F: Fn(&[f64]) -> Complex64>(
    f: &F,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    let rule = sphere_rule(n, spec.sphere_order)?;
    let mut acc = KahanSum::new();
    for (theta, w) in &rule.nodes {
        let radial = radial_integral(f, theta, n, spec)?;
        acc.add(radial * *w);
    }
    Ok(acc.value())
}

/// Integral over R^{2n} in spherical coordinates:
/// int f = int_0^R int_{S^{2n-1}} f(r theta) r^{2n-1} dtheta dr,
/// with an error estimate from order refinement.
///
/// With `origin_singular` set, f may blow up slower than |x|^{-(2n-1)} at the
/// origin; the radial factor tames it and no node is placed at x = 0.
pub fn integrate_plane<F: Fn(&[f64]) -> Complex64>(
    f: F,
    n: usize,
    spec: &QuadratureSpec,
    origin_singular: bool,
) -> Result<Estimate> {
    let _ = origin_singular; // the DE radial rule never samples r = 0
    let fine = plane_pass(&f, n, spec)?;
    let coarse = plane_pass(&f, n, &spec.coarsened())?;
    let error = (fine - coarse).norm().max(1e-15 * fine.norm());
    if error > (0.05 * fine.norm()).max(1e-3) {
        return Err(Error::Accuracy {
            context: "plane integral refinement".into(),
            last: fine.norm(),
            prev: coarse.norm(),
        });
    }
    Ok(Estimate { value: fine, error })
}

// ---------------------------------------------------------------------------
// Principal values and extrapolated limits
// ---------------------------------------------------------------------------

/// lim_{eps -> 0} int_{|z| >= eps} g(z) dz, computed by folding the line onto
/// (eps, inf) (which cancels the simple-pole part pointwise) and Richardson-
/// extrapolating over the epsilon schedule.
pub fn pv_integral_real_line<G: Fn(f64) -> Complex64>(
    g: G,
    eps_schedule: &[f64],
) -> Result<Estimate> {
    if eps_schedule.len() < 3 {
        return Err(Error::Input("epsilon schedule needs at least 3 points".into()));
    }
    let mut pairs = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        if !(eps > 0.0) {
            return Err(Error::Input("epsilon schedule must be positive".into()));
        }
        let folded = |z: f64| g(z) + g(-z);
        let v = exp_sinh(folded, eps, 600)?;
        pairs.push((eps, v.value));
    }
    let (limit, error) = extrapolate_limit(&pairs)?;
    Ok(Estimate { value: limit, error })
}

/// Richardson extrapolation of a geometric schedule (beta_k, v_k), assuming
/// an asymptotic error expansion in powers of beta with the leading power
/// estimated from the data. Real and imaginary parts are extrapolated
/// separately (their expansions often carry different parities). Returns
/// the limit and the difference of the last two extrapolation columns as
/// the error estimate.
pub fn extrapolate_limit(values: &[(f64, Complex64)]) -> Result<(Complex64, f64)> {
    if values.len() < 3 {
        return Err(Error::Input(
            "extrapolation needs at least 3 schedule points".into(),
        ));
    }
    // Validate a roughly geometric schedule.
    let mut ratios = Vec::new();
    for w in values.windows(2) {
        let (b0, b1) = (w[0].0, w[1].0);
        if !(b1 > 0.0 && b1 < b0) {
            return Err(Error::Input("schedule must decrease strictly to 0".into()));
        }
        ratios.push(b1 / b0);
    }
    let q = ratios.iter().product::<f64>().powf(1.0 / ratios.len() as f64);
    if ratios.iter().any(|r| (r / q - 1.0).abs() > 0.2) {
        return Err(Error::Input("schedule must be geometric".into()));
    }

    let scale = values
        .iter()
        .map(|(_, v)| v.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let re: Vec<f64> = values.iter().map(|(_, v)| v.re).collect();
    let im: Vec<f64> = values.iter().map(|(_, v)| v.im).collect();
    let (lr, er) = extrapolate_scalar(&re, q, scale);
    let (li, ei) = extrapolate_scalar(&im, q, scale);
    let best = Complex64::new(lr, li);
    let best_err = er.hypot(ei);

    let initial_spread = {
        let last = values.last().unwrap().1;
        values
            .iter()
            .map(|(_, v)| (v - last).norm())
            .fold(0.0, f64::max)
    };
    if best_err > initial_spread.max(1e-13 * scale) && best_err > 1e-12 * scale {
        return Err(Error::Accuracy {
            context: "Richardson extrapolation".into(),
            last: best_err,
            prev: initial_spread,
        });
    }
    Ok((best, best_err))
}

/// One real extrapolation tableau. `scale` is the magnitude of the full
/// complex data, so a component at rounding level relative to its partner
/// is treated as converged rather than extrapolated noise.
fn extrapolate_scalar(values: &[f64], q: f64, scale: f64) -> (f64, f64) {
    let mut col = values.to_vec();
    let mut best = *col.last().unwrap();
    let mut best_err = col
        .iter()
        .map(|v| (v - best).abs())
        .fold(0.0f64, f64::max);
    let mut grew = 0usize;
    while col.len() >= 3 {
        let diffs: Vec<f64> = col.windows(2).map(|w| w[1] - w[0]).collect();
        let dmax = diffs.iter().map(|d| d.abs()).fold(0.0f64, f64::max);
        if dmax <= 1e-14 * scale {
            return (*col.last().unwrap(), dmax);
        }
        let mut ps = Vec::new();
        for w in diffs.windows(2) {
            let (a, b) = (w[0].abs(), w[1].abs());
            if a > 0.0 && b > 0.0 {
                ps.push((a / b).ln() / (1.0 / q).ln());
            }
        }
        if ps.is_empty() {
            break;
        }
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p = ps[ps.len() / 2];
        if p < 0.05 {
            // Differences are not shrinking: no extrapolable signal left.
            break;
        }
        // Snap near-integer (or half-integer) estimates: expansions in clean
        // powers then cancel exactly instead of leaking 0.1%-level residues
        // of the leading term into every later column.
        let snapped = {
            let nearest_int = p.round();
            let nearest_half = (2.0 * p).round() / 2.0;
            if (p - nearest_int).abs() < 0.2 {
                nearest_int
            } else if (p - nearest_half).abs() < 0.1 {
                nearest_half
            } else {
                p
            }
        };
        let p = snapped.clamp(0.25, 16.0);
        let factor = (1.0 / q).powf(p);
        let next: Vec<f64> = col
            .windows(2)
            .map(|w| (w[1] * factor - w[0]) / (factor - 1.0))
            .collect();
        let err = (next.last().unwrap() - col.last().unwrap()).abs();
        if err < best_err {
            best = *next.last().unwrap();
            best_err = err;
            grew = 0;
        } else {
            grew += 1;
            if grew >= 2 {
                break;
            }
        }
        col = next;
    }
    (best, best_err)
}
