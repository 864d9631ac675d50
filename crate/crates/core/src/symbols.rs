//! Fourier-side representation of principal symbols.
//!
//! A symbol is the pair (sigma_+, sigma_-) of complex evaluators on R^{2n},
//! the restrictions of the homogeneous leading kernel's Fourier transform to
//! the paraboloids t = +1 and t = -1, together with the declared angular
//! coefficients a_{2l} of the large-|x| expansion
//!
//! ```text
//! sigma_+(x) ~ sum_l w_{2l}(x),     sigma_-(x) ~ sum_l (-1)^l w_{2l}(x),
//! w_{2l}(x) = a_{2l}(x/|x|) |x|^{-2l}.
//! ```
//!
//! Only l = 0..n is stored. Tails are declared, not extracted numerically;
//! `tail_consistency_check` guards against misdeclaration by sampling the
//! scaled remainders on a geometric radius ladder.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hgroup::GroupDims;
use crate::symexpr::CEval;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayClass {
    /// Rapid decay; all tail terms vanish.
    Schwartz,
    /// Smooth away from the origin with a declared homogeneous tail.
    HomogeneousTail,
}

/// A complex-valued evaluator on R^{2n} with its decay metadata.
#[derive(Clone)]
pub struct SymbolEvaluator {
    pub f: CEval,
    pub decay: DecayClass,
    /// Whether quadrature may place nodes at x = 0.
    pub smooth_at_origin: bool,
    /// Marks the constant-1 component of the algebra unit (the symbol of
    /// the Dirac delta); the sharp product short-circuits on it.
    pub unit: bool,
}

impl SymbolEvaluator {
    pub fn schwartz(f: CEval) -> Self {
        SymbolEvaluator {
            f,
            decay: DecayClass::Schwartz,
            smooth_at_origin: true,
            unit: false,
        }
    }

    pub fn homogeneous_tail(f: CEval, smooth_at_origin: bool) -> Self {
        SymbolEvaluator {
            f,
            decay: DecayClass::HomogeneousTail,
            smooth_at_origin,
            unit: false,
        }
    }

    pub fn unit() -> Self {
        SymbolEvaluator {
            f: std::sync::Arc::new(|_x: &[f64]| Complex64::new(1.0, 0.0)),
            decay: DecayClass::HomogeneousTail,
            smooth_at_origin: true,
            unit: true,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        (self.f)(x)
    }
}

impl std::fmt::Debug for SymbolEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolEvaluator")
            .field("decay", &self.decay)
            .field("smooth_at_origin", &self.smooth_at_origin)
            .field("unit", &self.unit)
            .finish()
    }
}

/// Angular coefficients a_{2l}: S^{2n-1} -> C for l = 0..n. An empty list
/// means Schwartz class (all w_{2l} = 0).
#[derive(Clone, Default)]
pub struct TailDescriptor {
    pub coeffs: Vec<CEval>,
}

impl TailDescriptor {
    pub fn schwartz() -> Self {
        TailDescriptor { coeffs: Vec::new() }
    }

    pub fn new(coeffs: Vec<CEval>) -> Self {
        TailDescriptor { coeffs }
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl std::fmt::Debug for TailDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TailDescriptor({} coefficients)", self.coeffs.len())
    }
}

/// Report of the tail-consistency diagnostic.
#[derive(Clone, Debug)]
pub struct TailReport {
    /// max over the angular grid of |sigma_+(r th) - sum_l w_{2l}| r^{2n},
    /// one entry per ladder radius.
    pub residual_plus: Vec<f64>,
    /// The sigma_- analogue with the (-1)^l signs.
    pub residual_minus: Vec<f64>,
    pub radii: Vec<f64>,
    /// Set when either residual sequence fails to decrease along the ladder.
    pub flagged: bool,
}

/// A principal symbol: the evaluator pair plus its declared tail.
#[derive(Clone, Debug)]
pub struct PrincipalSymbol {
    pub dims: GroupDims,
    pub sigma_plus: SymbolEvaluator,
    pub sigma_minus: SymbolEvaluator,
    pub tail: TailDescriptor,
    pub name: String,
}

impl PrincipalSymbol {
    pub fn new(
        dims: GroupDims,
        sigma_plus: SymbolEvaluator,
        sigma_minus: SymbolEvaluator,
        tail: TailDescriptor,
        name: impl Into<String>,
    ) -> Result<Self> {
        let n = dims.n();
        if !tail.is_empty() && tail.coeffs.len() != n + 1 {
            return Err(Error::Validation(format!(
                "tail must list l = 0..{n} ({} coefficients), got {}",
                n + 1,
                tail.coeffs.len()
            )));
        }
        if tail.is_empty()
            && (sigma_plus.decay != DecayClass::Schwartz
                || sigma_minus.decay != DecayClass::Schwartz)
        {
            return Err(Error::Validation(
                "an empty tail requires Schwartz evaluators".into(),
            ));
        }
        Ok(PrincipalSymbol {
            dims,
            sigma_plus,
            sigma_minus,
            tail,
            name: name.into(),
        })
    }

    pub fn is_schwartz(&self) -> bool {
        self.tail.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.sigma_plus.unit && self.sigma_minus.unit
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let d = self.dims.horizontal_dim();
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// w_{2l}(x) = a_{2l}(x/|x|) |x|^{-2l}; homogeneous of degree -2l.
    pub fn eval_w(&self, l: usize, x: &[f64]) -> Result<Complex64> {
        self.check_point(x)?;
        let n = self.dims.n();
        if l > n {
            return Err(Error::Input(format!("tail index l = {l} exceeds n = {n}")));
        }
        if self.tail.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return Err(Error::OriginSingularity);
        }
        let r = r2.sqrt();
        let theta: Vec<f64> = x.iter().map(|v| v / r).collect();
        let a = (self.tail.coeffs[l])(&theta);
        Ok(a * r.powi(-2 * (l as i32)))
    }

    /// The integrable combination
    /// R = sigma_+ - (-1)^n sigma_- - sum_{l<n} eps_l w_{2l},
    /// eps_l = 1 - (-1)^{n+l}.
    pub fn r_function(&self, x: &[f64]) -> Result<Complex64> {
        self.check_point(x)?;
        let n = self.dims.n();
        let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut v = self.sigma_plus.eval(x) - sign_n * self.sigma_minus.eval(x);
        if !self.tail.is_empty() {
            for l in 0..n {
                let eps = if (n + l) % 2 == 0 { 0.0 } else { 2.0 };
                if eps != 0.0 {
                    v -= eps * self.eval_w(l, x)?;
                }
            }
        }
        Ok(v)
    }

    /// The integrable truncations: sigma_+ minus the tail terms through
    /// l = n for |x| >= 1 and through l = n-1 for |x| < 1 (sigma_- with the
    /// (-1)^l signs). `sign` is +1 or -1.
    pub fn tilde_sigma(&self, sign: i8, x: &[f64]) -> Result<Complex64> {
        self.check_point(x)?;
        let n = self.dims.n();
        let base = match sign {
            1 => self.sigma_plus.eval(x),
            -1 => self.sigma_minus.eval(x),
            _ => return Err(Error::Input("sign must be +1 or -1".into())),
        };
        if self.tail.is_empty() {
            return Ok(base);
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let lmax = if r2 >= 1.0 { n } else { n - 1 };
        let mut v = base;
        for l in 0..=lmax {
            let term = self.eval_w(l, x)?;
            let sgn_l = if sign == -1 && l % 2 == 1 { -1.0 } else { 1.0 };
            v -= sgn_l * term;
        }
        Ok(v)
    }

    /// Sample the scaled expansion remainders on an increasing radius ladder
    /// and flag the declaration if they fail to decrease.
    pub fn tail_consistency_check(&self, r_ladder: &[f64], theta_grid: &[Vec<f64>]) -> Result<TailReport> {
        if r_ladder.len() < 2 {
            return Err(Error::Input("radius ladder needs at least 2 entries".into()));
        }
        for w in r_ladder.windows(2) {
            if !(w[0] >= 1.0 && w[1] > w[0]) {
                return Err(Error::Input(
                    "radius ladder must be increasing and >= 1".into(),
                ));
            }
        }
        let n = self.dims.n();
        let pw = 2 * n as i32;
        let mut residual_plus = Vec::with_capacity(r_ladder.len());
        let mut residual_minus = Vec::with_capacity(r_ladder.len());
        for &r in r_ladder {
            let mut worst_p = 0.0f64;
            let mut worst_m = 0.0f64;
            for theta in theta_grid {
                let x: Vec<f64> = theta.iter().map(|v| v * r).collect();
                let mut sp = self.sigma_plus.eval(&x);
                let mut sm = self.sigma_minus.eval(&x);
                if !self.tail.is_empty() {
                    for l in 0..=n {
                        let w = self.eval_w(l, &x)?;
                        sp -= w;
                        let sgn = if l % 2 == 1 { -1.0 } else { 1.0 };
                        sm -= sgn * w;
                    }
                }
                worst_p = worst_p.max(sp.norm() * r.powi(pw));
                worst_m = worst_m.max(sm.norm() * r.powi(pw));
            }
            residual_plus.push(worst_p);
            residual_minus.push(worst_m);
        }
        // A declared tail is consistent when the scaled remainders decrease
        // along the ladder (allowing a rounding floor for exact cases).
        let decreasing = |v: &[f64]| {
            v.windows(2)
                .all(|w| w[1] <= (0.9 * w[0]).max(1e-12))
        };
        let flagged = !(decreasing(&residual_plus) && decreasing(&residual_minus));
        Ok(TailReport {
            residual_plus,
            residual_minus,
            radii: r_ladder.to_vec(),
            flagged,
        })
    }

    /// Default diagnostic grid: geometric radius ladder and a coarse sphere
    /// grid appropriate for the dimension.
    pub fn default_consistency_check(&self) -> Result<TailReport> {
        let ladder = [2.0, 4.0, 8.0, 16.0, 32.0];
        let rule = crate::quad::sphere_rule(self.dims.n(), 8)?;
        let grid: Vec<Vec<f64>> = rule.nodes.into_iter().map(|(p, _)| p).collect();
        self.tail_consistency_check(&ladder, &grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use num_complex::Complex64 as C;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn dims(n: usize) -> GroupDims {
        GroupDims::new(n).unwrap()
    }

    fn gaussian(n: usize) -> PrincipalSymbol {
        registry::builtin("gaussian", dims(n)).unwrap()
    }

    fn parabolic(n: usize) -> PrincipalSymbol {
        registry::builtin("parabolic", dims(n)).unwrap()
    }

    fn angular() -> PrincipalSymbol {
        registry::builtin("angular", dims(1)).unwrap()
    }

    #[test]
    fn eval_w_examples() {
        // Schwartz symbol: empty tail evaluates to 0 for any l.
        let g = gaussian(1);
        assert_eq!(g.eval_w(0, &[1.0, 2.0]).unwrap(), C::new(0.0, 0.0));
        assert_eq!(g.eval_w(1, &[1.0, 2.0]).unwrap(), C::new(0.0, 0.0));

        // a_2 = 1, |x| = 2, l = 1 -> 1/4.
        let p = parabolic(1);
        let v = p.eval_w(1, &[2.0, 0.0]).unwrap();
        assert!((v.re - 0.25).abs() < 1e-15 && v.im.abs() < 1e-15);

        // Errors.
        assert!(matches!(
            p.eval_w(1, &[0.0, 0.0]),
            Err(Error::OriginSingularity)
        ));
        assert!(p.eval_w(2, &[1.0, 0.0]).is_err());
        assert!(p.eval_w(1, &[1.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn eval_w_homogeneity(xr in -3.0f64..3.0, yr in -3.0f64..3.0, lam in 0.2f64..4.0) {
            prop_assume!(xr * xr + yr * yr > 0.01);
            let p = parabolic(1);
            for l in 0..=1usize {
                let v1 = p.eval_w(l, &[lam * xr, lam * yr]).unwrap();
                let v0 = p.eval_w(l, &[xr, yr]).unwrap();
                let scaled = v0 * lam.powi(-2 * l as i32);
                prop_assert!((v1 - scaled).norm() < 1e-12 * (1.0 + scaled.norm()));
            }
        }
    }

    #[test]
    fn r_function_schwartz_sign_table() {
        // n = 1 (odd): R = sigma_+ + sigma_-.
        let g = registry::builtin("gaussian-pair", dims(1)).unwrap();
        let x = [0.7, -0.3];
        let expected = g.sigma_plus.eval(&x) + g.sigma_minus.eval(&x);
        assert!((g.r_function(&x).unwrap() - expected).norm() < 1e-15);

        // n = 2 (even): R = sigma_+ - sigma_-.
        let g2 = registry::builtin("gaussian-pair", dims(2)).unwrap();
        let x2 = [0.7, -0.3, 0.1, 0.4];
        let expected2 = g2.sigma_plus.eval(&x2) - g2.sigma_minus.eval(&x2);
        assert!((g2.r_function(&x2).unwrap() - expected2).norm() < 1e-15);
    }

    #[test]
    fn r_function_parabolic_vanishes() {
        let p = parabolic(1);
        for x in [[0.3, 0.4], [2.0, -1.0], [10.0, 3.0]] {
            assert!(p.r_function(&x).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn r_function_angular_closed_form() {
        // R(x) = -2 cos(2 theta) / (1 + r^4).
        let a = angular();
        for x in [[0.5, 0.2], [1.5, -0.7], [3.0, 1.0]] {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let cos2t = (x[0] * x[0] - x[1] * x[1]) / r2;
            let expected = -2.0 * cos2t / (1.0 + r2 * r2);
            let got = a.r_function(&x).unwrap();
            assert!(
                (got - C::new(expected, 0.0)).norm() < 1e-13,
                "at {x:?}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn r_function_linear_in_the_symbol() {
        let g = gaussian(1);
        let p = parabolic(1);
        let (alpha, beta) = (C::new(0.37, -1.2), C::new(-2.1, 0.45));
        let combo = registry::linear_combination(&g, alpha, &p, beta, "combo").unwrap();
        for x in [[0.4, 0.1], [1.7, -2.2], [5.0, 0.3]] {
            let lhs = combo.r_function(&x).unwrap();
            let rhs = alpha * g.r_function(&x).unwrap() + beta * p.r_function(&x).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn tilde_sigma_schwartz_is_identity() {
        let g = gaussian(1);
        let x = [0.9, 1.1];
        assert_eq!(g.tilde_sigma(1, &x).unwrap(), g.sigma_plus.eval(&x));
        assert_eq!(g.tilde_sigma(-1, &x).unwrap(), g.sigma_minus.eval(&x));
    }

    #[test]
    fn tilde_sigma_parabolic_outside_unit_ball() {
        // |x| >= 1: tilde sigma_+ = (1+r^4)^{-1/2} - r^{-2}.
        let p = parabolic(1);
        for r in [1.5f64, 3.0, 10.0] {
            let x = [r, 0.0];
            let expected = (1.0 + r.powi(4)).powf(-0.5) - r.powi(-2);
            let got = p.tilde_sigma(1, &x).unwrap();
            assert!((got.re - expected).abs() < 1e-14, "r={r}");
            // And tilde sigma_- = -(1+r^4)^{-1/2} + r^{-2} (sign (-1)^1 on w_2).
            let got_m = p.tilde_sigma(-1, &x).unwrap();
            assert!((got_m.re + expected).abs() < 1e-14, "r={r}");
        }
        // |x| < 1: only l <= n-1 subtracted (a_0 = 0 here), so tilde = sigma.
        let x = [0.5, 0.0];
        assert_eq!(p.tilde_sigma(1, &x).unwrap(), p.sigma_plus.eval(&x));
    }

    #[test]
    fn r_equals_tilde_combination_under_the_integral() {
        // integral R = integral tilde_+ + (-1)^{n+1} integral tilde_-, both
        // via the plane quadrature (n = 1).
        let spec = crate::quad::QuadratureSpec::default_for(1)
            .with_truncation_radius(crate::quad::ALGEBRAIC_TRUNCATION_RADIUS);
        for sym in [parabolic(1), angular()] {
            let ir = crate::quad::integrate_plane(
                |x| sym.r_function(x).unwrap_or(C::new(f64::NAN, 0.0)),
                1,
                &spec,
                true,
            )
            .unwrap();
            let ip = crate::quad::integrate_plane(
                |x| sym.tilde_sigma(1, x).unwrap_or(C::new(f64::NAN, 0.0)),
                1,
                &spec,
                true,
            )
            .unwrap();
            let im = crate::quad::integrate_plane(
                |x| sym.tilde_sigma(-1, x).unwrap_or(C::new(f64::NAN, 0.0)),
                1,
                &spec,
                true,
            )
            .unwrap();
            let rhs = ip.value + im.value; // (-1)^{n+1} = +1 at n = 1
            assert!(
                (ir.value - rhs).norm() < 1e-8,
                "{}: {} vs {}",
                sym.name,
                ir.value,
                rhs
            );
        }
    }

    #[test]
    fn tail_consistency_builtins_pass() {
        for n in [1usize, 2] {
            for sym in registry::builtins_for(dims(n)).unwrap() {
                let rep = sym.default_consistency_check().unwrap();
                assert!(!rep.flagged, "{} at n={n}: {rep:?}", sym.name);
            }
        }
    }

    #[test]
    fn tail_consistency_gaussian_residuals_decay_fast() {
        let rep = gaussian(1).default_consistency_check().unwrap();
        assert!(!rep.flagged);
        assert!(rep.residual_plus[1] < rep.residual_plus[0] * 1e-3);
    }

    #[test]
    fn tail_consistency_flags_misdeclared_coefficient() {
        // Parabolic profile with a_2 = 2 instead of 1: remainder ~ r^{-2},
        // scaled residual ~ 1, not decreasing.
        let d = dims(1);
        let f: CEval = Arc::new(|x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            C::new((1.0 + r2 * r2).powf(-0.5), 0.0)
        });
        let neg: CEval = Arc::new(move |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            C::new(-(1.0 + r2 * r2).powf(-0.5), 0.0)
        });
        let zero: CEval = Arc::new(|_: &[f64]| C::new(0.0, 0.0));
        let two: CEval = Arc::new(|_: &[f64]| C::new(2.0, 0.0));
        let bad = PrincipalSymbol::new(
            d,
            SymbolEvaluator::homogeneous_tail(f, true),
            SymbolEvaluator::homogeneous_tail(neg, true),
            TailDescriptor::new(vec![zero, two]),
            "parabolic-misdeclared",
        )
        .unwrap();
        let rep = bad.default_consistency_check().unwrap();
        assert!(rep.flagged, "{rep:?}");
    }

    #[test]
    fn constructor_validates_shapes() {
        let d = dims(1);
        let zero: CEval = Arc::new(|_: &[f64]| C::new(0.0, 0.0));
        // Wrong tail length.
        assert!(PrincipalSymbol::new(
            d,
            SymbolEvaluator::homogeneous_tail(zero.clone(), true),
            SymbolEvaluator::homogeneous_tail(zero.clone(), true),
            TailDescriptor::new(vec![zero.clone()]),
            "bad"
        )
        .is_err());
        // Tailed evaluator with empty tail.
        assert!(PrincipalSymbol::new(
            d,
            SymbolEvaluator::homogeneous_tail(zero.clone(), true),
            SymbolEvaluator::homogeneous_tail(zero, true),
            TailDescriptor::schwartz(),
            "bad"
        )
        .is_err());
    }
}
