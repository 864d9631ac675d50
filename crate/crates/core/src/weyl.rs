//! The sharp (Weyl/Moyal) product of Schwartz symbols,
//!
//! ```text
//! (sigma # sigma')(v) = (2 pi)^{-2n} iint e^{2 i omega(x,y)}
//!                       sigma(v + x) sigma'(v + y) dx dy,
//! ```
//!
//! with a closed-form Gaussian oracle and the commutator integral used for
//! the trace-property checks.
//!
//! The oscillatory integral is evaluated through its Fourier factorization:
//! the y-integral is exactly `e^{-2 i omega(x, v)} F[sigma'](2 J x)` with J
//! the symplectic matrix, so one full-dimensional FFT of sigma' followed by
//! a lattice sum over x replaces the 4n-dimensional cubature (which would be
//! infeasible at n = 2). The x-lattice is chosen so that 2 J x lands exactly
//! on the FFT frequency grid.
//!
//! The algebra unit (the symbol of the Dirac delta) is handled
//! algebraically: `sigma # 1 = 1 # sigma = sigma` by the unit law, and the
//! commutator against the unit is exactly zero. Other non-decaying symbols
//! are rejected as a capability bound.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{integrate_plane, Estimate, KahanSum, QuadratureSpec};
use crate::symbols::{DecayClass, SymbolEvaluator};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// c e^{-alpha |x - center|^2}.
#[derive(Clone, Debug)]
pub struct GaussianSymbol {
    pub amplitude: Complex64,
    pub center: Vec<f64>,
    pub width: f64,
}

impl GaussianSymbol {
    pub fn new(amplitude: Complex64, center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Input(format!(
                "gaussian width must be positive, got {width}"
            )));
        }
        Ok(GaussianSymbol {
            amplitude,
            center,
            width,
        })
    }

    pub fn centered(amplitude: Complex64, dim: usize, width: f64) -> Result<Self> {
        Self::new(amplitude, vec![0.0; dim], width)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum();
        self.amplitude * (-self.width * d2).exp()
    }

    pub fn evaluator(&self) -> SymbolEvaluator {
        let g = self.clone();
        SymbolEvaluator::schwartz(Arc::new(move |x: &[f64]| g.eval(x)))
    }
}

/// omega(a, b) on R^{2n}.
fn omega(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        acc += a[i] * b[n + i] - a[n + i] * b[i];
    }
    acc
}

// ---------------------------------------------------------------------------
// Fourier engine
// ---------------------------------------------------------------------------

/// Precomputed Fourier data of one factor: samples of F[sigma'](xi) on the
/// frequency lattice xi = (pi / L) k, |k_d| < N/2.
pub struct SharpEngine {
    n: usize,
    grid: usize,
    halfwidth: f64,
    /// Full FFT cube, dimension-major order, with the e^{i xi L} phase and
    /// h^{2n} normalization folded in.
    table: Vec<Complex64>,
    /// Largest magnitude in the table, for pruning negligible lattice nodes.
    hat_max: f64,
}

impl SharpEngine {
    /// Sample sigma' on the box [-L, L)^{2n} and transform. `grid` is the
    /// per-dimension size N.
    pub fn new(sigma_prime: &SymbolEvaluator, n: usize, grid: usize, halfwidth: f64) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::Capability(format!(
                "sharp product supports n in {{1, 2}}, got n = {n}"
            )));
        }
        let dim = 2 * n;
        let nn = grid;
        let l = halfwidth;
        let h = 2.0 * l / nn as f64;
        let total = nn.pow(dim as u32);

        let mut data = vec![c64(0.0, 0.0); total];
        let mut x = vec![0.0f64; dim];
        for (flat, slot) in data.iter_mut().enumerate() {
            let mut rem = flat;
            for d in (0..dim).rev() {
                let j = rem % nn;
                rem /= nn;
                x[d] = -l + j as f64 * h;
            }
            let v = sigma_prime.eval(&x);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Domain(
                    "non-finite sample while transforming the sharp-product factor".into(),
                ));
            }
            *slot = v;
        }

        fft_nd(&mut data, nn, dim);

        // F[sigma'](xi_k) = h^{2n} (-1)^{sum k_d} DFT[k mod N], with k the
        // signed frequency index.
        let norm = h.powi(dim as i32);
        let mut table = data;
        for (flat, v) in table.iter_mut().enumerate() {
            let mut rem = flat;
            let mut parity = 0i64;
            for _ in 0..dim {
                let j = (rem % nn) as i64;
                rem /= nn;
                let k = if j < (nn as i64 + 1) / 2 { j } else { j - nn as i64 };
                parity += k;
            }
            let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            *v *= sign * norm;
        }
        let hat_max = table.iter().map(|v| v.norm()).fold(0.0f64, f64::max);

        Ok(SharpEngine {
            n,
            grid: nn,
            halfwidth: l,
            table,
            hat_max,
        })
    }

    /// Table entry at the signed frequency index k = J m.
    #[inline]
    fn lookup_jm(&self, m: &[i64]) -> Complex64 {
        let nn = self.grid as i64;
        let half = m.len() / 2;
        let mut flat = 0usize;
        for i in 0..half {
            flat = flat * self.grid + m[half + i].rem_euclid(nn) as usize;
        }
        for i in 0..half {
            flat = flat * self.grid + (-m[i]).rem_euclid(nn) as usize;
        }
        self.table[flat]
    }

    /// (sigma # sigma')(v) by the lattice sum
    /// (2 pi)^{-2n} Delta^{2n} sum_m sigma(v + x_m) e^{-2 i omega(x_m, v)}
    /// F[sigma'](2 J x_m), with x_m = (pi / 2L) m.
    pub fn apply(&self, sigma: &SymbolEvaluator, v: &[f64]) -> Complex64 {
        let dim = 2 * self.n;
        let step = std::f64::consts::PI / (2.0 * self.halfwidth);
        // Keep |x|_inf within both the sampling box (where F[sigma'] is
        // accurate) and the frequency range.
        let m_cut = (((self.halfwidth * 0.75) / step).floor() as i64)
            .min(self.grid as i64 / 2 - 1);
        let hat_floor2 = (self.hat_max * 1e-16).powi(2);
        let mut acc = KahanSum::new();
        let mut m = [0i64; 4];
        let mut x = [0.0f64; 4];
        let mut shifted = [0.0f64; 4];
        m[..dim].fill(-m_cut);
        loop {
            // The transform of a Schwartz factor concentrates near zero
            // frequency; skipping nodes with a negligible table entry avoids
            // most of the evaluator calls.
            let hat = self.lookup_jm(&m[..dim]);
            if hat.norm_sqr() > hat_floor2 {
                for d in 0..dim {
                    x[d] = step * m[d] as f64;
                    shifted[d] = x[d] + v[d];
                }
                let sval = sigma.eval(&shifted[..dim]);
                if sval.norm_sqr() > 0.0 {
                    let phase = -2.0 * omega(&x[..dim], v);
                    acc.add(sval * c64(phase.cos(), phase.sin()) * hat);
                }
            }
            // Advance the multi-index.
            let mut d = dim;
            loop {
                if d == 0 {
                    let scale =
                        step.powi(dim as i32) / (2.0 * std::f64::consts::PI).powi(dim as i32);
                    return acc.value() * scale;
                }
                d -= 1;
                m[d] += 1;
                if m[d] <= m_cut {
                    break;
                }
                m[d] = -m_cut;
            }
        }
    }
}

/// In-place multidimensional FFT of a `size^dim` cube in dimension-major
/// order.
fn fft_nd(data: &mut [Complex64], size: usize, dim: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    let mut line = vec![c64(0.0, 0.0); size];
    let total = data.len();
    for axis in 0..dim {
        // Stride of the axis in the flat layout (last axis is contiguous).
        let stride = size.pow((dim - 1 - axis) as u32);
        let block = stride * size;
        let mut base = 0;
        while base < total {
            for offset in 0..stride {
                let start = base + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + i * stride];
                }
                fft.process(&mut line);
                for (i, value) in line.iter().enumerate() {
                    data[start + i * stride] = *value;
                }
            }
            base += block;
        }
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

fn check_operand(e: &SymbolEvaluator) -> Result<()> {
    if e.unit {
        return Ok(());
    }
    if e.decay != DecayClass::Schwartz {
        return Err(Error::Capability(
            "sharp product operands must be Schwartz class (or the unit)".into(),
        ));
    }
    Ok(())
}

/// (sigma # sigma')(v) with an error estimate from grid refinement. The
/// unit operand short-circuits through the unit law.
pub fn sharp(
    sigma: &SymbolEvaluator,
    sigma_prime: &SymbolEvaluator,
    v: &[f64],
    n: usize,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    check_operand(sigma)?;
    check_operand(sigma_prime)?;
    if sigma_prime.unit {
        return Ok(Estimate {
            value: sigma.eval(v),
            error: 0.0,
        });
    }
    if sigma.unit {
        return Ok(Estimate {
            value: sigma_prime.eval(v),
            error: 0.0,
        });
    }
    let fine = SharpEngine::new(sigma_prime, n, spec.sharp_grid, spec.sharp_halfwidth)?;
    let coarse = SharpEngine::new(
        sigma_prime,
        n,
        (spec.sharp_grid * 3 / 4).max(16),
        spec.sharp_halfwidth,
    )?;
    let value = fine.apply(sigma, v);
    let value_coarse = coarse.apply(sigma, v);
    Ok(Estimate {
        value,
        error: (value - value_coarse).norm().max(1e-15 * value.norm()),
    })
}

/// Closed form of g # g' for centered Gaussians:
/// amplitude c c' / (4 (1 + a a'))^n, width (a + a')/(1 + a a').
pub fn gaussian_sharp_oracle(g: &GaussianSymbol, gp: &GaussianSymbol) -> Result<GaussianSymbol> {
    if g.center.iter().any(|&c| c != 0.0) || gp.center.iter().any(|&c| c != 0.0) {
        return Err(Error::Input(
            "the closed-form oracle takes centered Gaussians; use gaussian_sharp_value".into(),
        ));
    }
    if g.center.len() != gp.center.len() {
        return Err(Error::Dimension {
            expected: g.center.len(),
            got: gp.center.len(),
        });
    }
    let n = g.center.len() / 2;
    let (a, ap) = (g.width, gp.width);
    let denom = 1.0 + a * ap;
    let amplitude = g.amplitude * gp.amplitude / (4.0 * denom).powi(n as i32);
    GaussianSymbol::centered(amplitude, g.center.len(), (a + ap) / denom)
}

/// Analytic value of (g # g')(v) for arbitrary centers, from the exact
/// Gaussian quadratic-phase integral:
///
/// (g # g')(v) = c c' / (4(1+aa'))^n *
///   exp( 2 i omega(p, p') - [a|p|^2 + a'|p'|^2 + 2 i omega(p, p')] / (1+aa') ),
/// with p = v - center, p' = v - center'.
pub fn gaussian_sharp_value(g: &GaussianSymbol, gp: &GaussianSymbol, v: &[f64]) -> Complex64 {
    let n = g.center.len() / 2;
    let (a, ap) = (g.width, gp.width);
    let denom = 1.0 + a * ap;
    let p: Vec<f64> = v.iter().zip(&g.center).map(|(vi, ci)| vi - ci).collect();
    let pp: Vec<f64> = v.iter().zip(&gp.center).map(|(vi, ci)| vi - ci).collect();
    let w = omega(&p, &pp);
    let p2: f64 = p.iter().map(|t| t * t).sum();
    let pp2: f64 = pp.iter().map(|t| t * t).sum();
    let exponent = c64(0.0, 2.0 * w) - (c64(a * p2 + ap * pp2, 2.0 * w)) / denom;
    g.amplitude * gp.amplitude / (4.0 * denom).powi(n as i32) * exponent.exp()
}

/// int_{R^{2n}} [(sigma # sigma') - (sigma' # sigma)](v) dv. Exactly zero
/// when either operand is the unit or both are the same evaluator.
pub fn commutator_integral(
    sigma: &SymbolEvaluator,
    sigma_prime: &SymbolEvaluator,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    check_operand(sigma)?;
    check_operand(sigma_prime)?;
    if sigma.unit || sigma_prime.unit || Arc::ptr_eq(&sigma.f, &sigma_prime.f) {
        return Ok(Estimate {
            value: c64(0.0, 0.0),
            error: 0.0,
        });
    }
    let engine_ab = SharpEngine::new(sigma_prime, n, spec.sharp_grid, spec.sharp_halfwidth)?;
    let engine_ba = SharpEngine::new(sigma, n, spec.sharp_grid, spec.sharp_halfwidth)?;
    integrate_plane(
        |v: &[f64]| engine_ab.apply(sigma, v) - engine_ba.apply(sigma_prime, v),
        n,
        &commutator_spec(spec),
        false,
    )
}

/// The commutator integrand costs two lattice sums per node; a moderate
/// sphere/radial order is plenty for Gaussian-type decay at 1e-5 targets.
fn commutator_spec(spec: &QuadratureSpec) -> QuadratureSpec {
    let mut s = spec.clone();
    s.radial_order = s.radial_order.min(48);
    s.sphere_order = s.sphere_order.min(16);
    s.truncation_radius = s.truncation_radius.min(12.0);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn spec1() -> QuadratureSpec {
        QuadratureSpec::default_for(1)
    }

    fn unit_gauss(n: usize) -> GaussianSymbol {
        GaussianSymbol::centered(c64(1.0, 0.0), 2 * n, 1.0).unwrap()
    }

    #[test]
    fn oracle_point_value_one_eighth() {
        let g = unit_gauss(1);
        let prod = gaussian_sharp_oracle(&g, &g).unwrap();
        assert!((prod.amplitude - c64(0.125, 0.0)).norm() < 1e-15);
        assert!((prod.width - 1.0).abs() < 1e-15);
        assert!((gaussian_sharp_value(&g, &g, &[0.0, 0.0]) - c64(0.125, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sharp_matches_oracle_at_origin() {
        let g = unit_gauss(1);
        let est = sharp(&g.evaluator(), &g.evaluator(), &[0.0, 0.0], 1, &spec1()).unwrap();
        assert!(
            (est.value - c64(0.125, 0.0)).norm() < 1e-7,
            "got {} err {}",
            est.value,
            est.error
        );
    }

    #[test]
    fn sharp_matches_oracle_on_random_widths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spec = spec1();
        for trial in 0..10 {
            let a = rng.gen_range(0.5..2.0);
            let ap = rng.gen_range(0.5..2.0);
            let g = GaussianSymbol::centered(c64(1.0, 0.0), 2, a).unwrap();
            let gp = GaussianSymbol::centered(c64(1.0, 0.0), 2, ap).unwrap();
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let est = sharp(&g.evaluator(), &gp.evaluator(), &v, 1, &spec).unwrap();
            let exact = gaussian_sharp_value(&g, &gp, &v);
            assert!(
                (est.value - exact).norm() <= 1e-6,
                "trial {trial}: widths ({a}, {ap}) at {v:?}: {} vs {exact}",
                est.value
            );
        }
    }

    #[test]
    fn sharp_matches_oracle_displaced() {
        let spec = spec1();
        let g = GaussianSymbol::new(c64(1.0, 0.0), vec![0.6, -0.2], 1.2).unwrap();
        let gp = GaussianSymbol::new(c64(0.8, 0.3), vec![-0.4, 0.5], 0.7).unwrap();
        for v in [[0.0, 0.0], [0.5, 0.3], [-1.0, 0.8]] {
            let est = sharp(&g.evaluator(), &gp.evaluator(), &v, 1, &spec).unwrap();
            let exact = gaussian_sharp_value(&g, &gp, &v);
            assert!(
                (est.value - exact).norm() <= 1e-6,
                "at {v:?}: {} vs {exact}",
                est.value
            );
        }
    }

    #[test]
    fn sharp_n2_smoke() {
        let mut spec = QuadratureSpec::default_for(2);
        spec.sharp_grid = 48;
        spec.sharp_halfwidth = 8.0;
        let g = unit_gauss(2);
        let gp = GaussianSymbol::centered(c64(1.0, 0.0), 4, 1.5).unwrap();
        let v = [0.2, -0.1, 0.0, 0.3];
        let est = sharp(&g.evaluator(), &gp.evaluator(), &v, 2, &spec).unwrap();
        let exact = gaussian_sharp_value(&g, &gp, &v);
        assert!(
            (est.value - exact).norm() <= 2e-5,
            "{} vs {exact} (err est {})",
            est.value,
            est.error
        );
    }

    #[test]
    fn unit_laws_are_algebraic() {
        let spec = spec1();
        let unit = SymbolEvaluator::unit();
        let g = unit_gauss(1).evaluator();
        for v in [[0.3, -0.2], [1.0, 2.0]] {
            let right = sharp(&g, &unit, &v, 1, &spec).unwrap();
            assert_eq!(right.value, g.eval(&v));
            assert_eq!(right.error, 0.0);
            let left = sharp(&unit, &g, &v, 1, &spec).unwrap();
            assert_eq!(left.value, g.eval(&v));
        }
    }

    #[test]
    fn tailed_operands_are_rejected() {
        let spec = spec1();
        let d = crate::hgroup::GroupDims::new(1).unwrap();
        let parabolic = crate::registry::builtin("parabolic", d).unwrap();
        let g = unit_gauss(1).evaluator();
        assert!(matches!(
            sharp(&parabolic.sigma_plus, &g, &[0.0, 0.0], 1, &spec),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn sharp_is_bilinear() {
        let spec = spec1();
        let g = unit_gauss(1);
        let scaled = GaussianSymbol::centered(c64(2.0, 1.0), 2, 1.0).unwrap();
        let gp = GaussianSymbol::centered(c64(0.0, -3.0), 2, 1.4).unwrap();
        let v = [0.4, 0.2];
        let base = sharp(&g.evaluator(), &gp.evaluator(), &v, 1, &spec).unwrap();
        let s = sharp(&scaled.evaluator(), &gp.evaluator(), &v, 1, &spec).unwrap();
        // scaled = (2 + i) g, gp carries its own amplitude already.
        let factor = c64(2.0, 1.0);
        assert!(
            (s.value - factor * base.value).norm() < 1e-9,
            "{} vs {}",
            s.value,
            factor * base.value
        );
    }

    #[test]
    fn oracle_unit_width_limit() {
        // alpha' -> 0 flattens the second factor toward the constant 1; the
        // product amplitude approaches c c' / 4^n under this normalization.
        let g = unit_gauss(1);
        let flat = GaussianSymbol::centered(c64(1.0, 0.0), 2, 1e-9).unwrap();
        let prod = gaussian_sharp_oracle(&g, &flat).unwrap();
        assert!((prod.amplitude - c64(0.25, 0.0)).norm() < 1e-8);
        assert!((prod.width - 1.0).abs() < 1e-8);
    }

    #[test]
    fn commutator_exact_zero_cases() {
        let spec = spec1();
        let g = unit_gauss(1).evaluator();
        let unit = SymbolEvaluator::unit();
        let est = commutator_integral(&g, &unit, 1, &spec).unwrap();
        assert_eq!(est.value, c64(0.0, 0.0));
        let est = commutator_integral(&g, &g, 1, &spec).unwrap();
        assert_eq!(est.value, c64(0.0, 0.0));
    }

    #[test]
    fn commutator_displaced_gaussians_vanishes() {
        let spec = spec1();
        let g = unit_gauss(1).evaluator();
        let shifted = GaussianSymbol::new(c64(1.0, 0.0), vec![1.0, 0.0], 1.0)
            .unwrap()
            .evaluator();
        let est = commutator_integral(&g, &shifted, 1, &spec).unwrap();
        assert!(
            est.value.norm() < 1e-5,
            "commutator {} (err {})",
            est.value,
            est.error
        );
    }

    #[test]
    fn unit_law_on_a_grid() {
        // max over a 5x5 grid of |(sigma # 1)(v) - sigma(v)|: exactly 0 by
        // the algebraic unit law.
        let spec = spec1();
        let unit = SymbolEvaluator::unit();
        let g = unit_gauss(1).evaluator();
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                let v = [-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64];
                let est = sharp(&g, &unit, &v, 1, &spec).unwrap();
                worst = worst.max((est.value - g.eval(&v)).norm());
            }
        }
        assert!(worst <= 1e-8, "unit law deviation {worst}");
    }

    #[test]
    fn gaussian_invariant_formula_agreement() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = GaussianSymbol::centered(c64(rng.gen_range(-1.0..1.0), 0.3), 2, 1.3).unwrap();
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let direct = g.amplitude * (-1.3f64 * (x[0] * x[0] + x[1] * x[1])).exp();
            assert!((g.eval(&x) - direct).norm() < 1e-14);
        }
        let _ = PI;
    }
}
