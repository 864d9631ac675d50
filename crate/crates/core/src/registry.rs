//! Built-in symbols and symbol definition files.
//!
//! Each built-in ships in two forms: a hand-coded evaluator (used by the
//! numerics, written in overflow-safe arrangements) and an equivalent
//! expression-language definition. The two are cross-checked in tests, and
//! user-supplied JSON files go through the same expression pipeline.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::GroupDims;
use crate::symbols::{PrincipalSymbol, SymbolEvaluator, TailDescriptor};
use crate::symexpr::{self, CEval};

pub const BUILTIN_NAMES: [&str; 5] = ["gaussian", "gaussian-pair", "unit", "parabolic", "angular"];

/// Symbol definition file: expressions for the evaluator pair and the
/// angular tail coefficients (l = 0..n, empty for Schwartz class).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolDefinition {
    pub name: String,
    pub n: usize,
    pub sigma_plus: String,
    pub sigma_minus: String,
    #[serde(default)]
    pub tail: Vec<String>,
    #[serde(default = "default_true")]
    pub smooth_at_origin: bool,
}

fn default_true() -> bool {
    true
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn zero_eval() -> CEval {
    Arc::new(|_: &[f64]| Complex64::new(0.0, 0.0))
}

fn const_eval(v: f64) -> CEval {
    Arc::new(move |_: &[f64]| Complex64::new(v, 0.0))
}

/// (1 + r^4)^{-1/2}, arranged to stay finite for every representable r.
fn parabolic_profile(x: &[f64]) -> f64 {
    let r2 = norm2(x);
    let r4 = r2 * r2;
    if r4.is_finite() {
        (1.0 + r4).powf(-0.5)
    } else {
        0.0
    }
}

/// cos(2 theta) r^4/(1+r^4) on R^2, using r^4/(1+r^4) = 1/(1+r^-4) for
/// r >= 1 so the quotient never degrades to inf/inf.
fn angular_profile(x: &[f64]) -> f64 {
    let r2 = norm2(x);
    if r2 == 0.0 {
        return 0.0;
    }
    let cos2t = (x[0] * x[0] - x[1] * x[1]) / r2;
    let r4 = r2 * r2;
    let radial = if r4 >= 1.0 {
        1.0 / (1.0 + 1.0 / r4)
    } else {
        r4 / (1.0 + r4)
    };
    cos2t * radial
}

/// Build a built-in symbol with hand-coded evaluators.
pub fn builtin(name: &str, dims: GroupDims) -> Result<PrincipalSymbol> {
    let n = dims.n();
    let tail_len = n + 1;
    match name {
        "gaussian" => {
            let plus: CEval = Arc::new(|x: &[f64]| c((-norm2(x)).exp()));
            PrincipalSymbol::new(
                dims,
                SymbolEvaluator::schwartz(plus),
                SymbolEvaluator::schwartz(zero_eval()),
                TailDescriptor::schwartz(),
                "gaussian",
            )
        }
        "gaussian-pair" => {
            let plus: CEval = Arc::new(|x: &[f64]| c((-norm2(x)).exp()));
            let minus: CEval = Arc::new(|x: &[f64]| c((-norm2(x)).exp()));
            PrincipalSymbol::new(
                dims,
                SymbolEvaluator::schwartz(plus),
                SymbolEvaluator::schwartz(minus),
                TailDescriptor::schwartz(),
                "gaussian-pair",
            )
        }
        "unit" => {
            let mut coeffs = vec![const_eval(1.0)];
            coeffs.extend((1..tail_len).map(|_| zero_eval()));
            PrincipalSymbol::new(
                dims,
                SymbolEvaluator::unit(),
                SymbolEvaluator::unit(),
                TailDescriptor::new(coeffs),
                "unit",
            )
        }
        "parabolic" => {
            let plus: CEval = Arc::new(|x: &[f64]| c(parabolic_profile(x)));
            let minus: CEval = Arc::new(|x: &[f64]| c(-parabolic_profile(x)));
            let coeffs = (0..tail_len)
                .map(|l| if l == 1 { const_eval(1.0) } else { zero_eval() })
                .collect();
            PrincipalSymbol::new(
                dims,
                SymbolEvaluator::homogeneous_tail(plus, true),
                SymbolEvaluator::homogeneous_tail(minus, true),
                TailDescriptor::new(coeffs),
                "parabolic",
            )
        }
        "angular" => {
            if n != 1 {
                return Err(Error::Capability(
                    "the 'angular' symbol is defined for n = 1 only".into(),
                ));
            }
            let plus: CEval = Arc::new(|x: &[f64]| c(angular_profile(x)));
            let minus: CEval = Arc::new(|x: &[f64]| c(angular_profile(x)));
            let a0: CEval = Arc::new(|theta: &[f64]| c(theta[0] * theta[0] - theta[1] * theta[1]));
            PrincipalSymbol::new(
                dims,
                SymbolEvaluator::homogeneous_tail(plus, true),
                SymbolEvaluator::homogeneous_tail(minus, true),
                TailDescriptor::new(vec![a0, zero_eval()]),
                "angular",
            )
        }
        _ => Err(Error::UnknownSymbol(name.to_string())),
    }
}

/// All built-ins applicable at the given dims, ordered by name.
pub fn builtins_for(dims: GroupDims) -> Result<Vec<PrincipalSymbol>> {
    let mut names: Vec<&str> = BUILTIN_NAMES
        .iter()
        .copied()
        .filter(|name| *name != "angular" || dims.n() == 1)
        .collect();
    names.sort_unstable();
    names.into_iter().map(|name| builtin(name, dims)).collect()
}

/// The expression-language form of a built-in, as would appear in a symbol
/// definition file.
pub fn builtin_definition(name: &str, n: usize) -> Result<SymbolDefinition> {
    let tail_of = |entries: &[(usize, &str)]| -> Vec<String> {
        (0..=n)
            .map(|l| {
                entries
                    .iter()
                    .find(|(ll, _)| *ll == l)
                    .map(|(_, s)| s.to_string())
                    .unwrap_or_else(|| "0".to_string())
            })
            .collect()
    };
    let def = match name {
        "gaussian" => SymbolDefinition {
            name: name.into(),
            n,
            sigma_plus: "exp(-norm2(x))".into(),
            sigma_minus: "0".into(),
            tail: vec![],
            smooth_at_origin: true,
        },
        "gaussian-pair" => SymbolDefinition {
            name: name.into(),
            n,
            sigma_plus: "exp(-norm2(x))".into(),
            sigma_minus: "exp(-norm2(x))".into(),
            tail: vec![],
            smooth_at_origin: true,
        },
        "unit" => SymbolDefinition {
            name: name.into(),
            n,
            sigma_plus: "1".into(),
            sigma_minus: "1".into(),
            tail: tail_of(&[(0, "1")]),
            smooth_at_origin: true,
        },
        "parabolic" => SymbolDefinition {
            name: name.into(),
            n,
            sigma_plus: "1/(1+r^4)^(1/2)".into(),
            sigma_minus: "-1/(1+r^4)^(1/2)".into(),
            tail: tail_of(&[(1, "1")]),
            smooth_at_origin: true,
        },
        "angular" => {
            if n != 1 {
                return Err(Error::Capability(
                    "the 'angular' symbol is defined for n = 1 only".into(),
                ));
            }
            SymbolDefinition {
                name: name.into(),
                n,
                sigma_plus: "cos(2*theta1)*r^4/(1+r^4)".into(),
                sigma_minus: "cos(2*theta1)*r^4/(1+r^4)".into(),
                tail: tail_of(&[(0, "cos(2*theta1)")]),
                smooth_at_origin: true,
            }
        }
        _ => return Err(Error::UnknownSymbol(name.to_string())),
    };
    Ok(def)
}

/// Compile a definition into a symbol backed by expression evaluators.
pub fn from_definition(def: &SymbolDefinition) -> Result<PrincipalSymbol> {
    let dims = GroupDims::new(def.n)?;
    let n = def.n;
    if !def.tail.is_empty() && def.tail.len() != n + 1 {
        return Err(Error::Validation(format!(
            "tail must list l = 0..{n} ({} expressions), got {}",
            n + 1,
            def.tail.len()
        )));
    }
    let plus = symexpr::compile_point(&symexpr::parse(&def.sigma_plus)?, n)?;
    let minus = symexpr::compile_point(&symexpr::parse(&def.sigma_minus)?, n)?;
    let (ev_plus, ev_minus, tail) = if def.tail.is_empty() {
        (
            SymbolEvaluator::schwartz(plus),
            SymbolEvaluator::schwartz(minus),
            TailDescriptor::schwartz(),
        )
    } else {
        let coeffs: Result<Vec<CEval>> = def
            .tail
            .iter()
            .map(|s| symexpr::compile_angular(&symexpr::parse(s)?, n))
            .collect();
        (
            SymbolEvaluator::homogeneous_tail(plus, def.smooth_at_origin),
            SymbolEvaluator::homogeneous_tail(minus, def.smooth_at_origin),
            TailDescriptor::new(coeffs?),
        )
    };
    PrincipalSymbol::new(dims, ev_plus, ev_minus, tail, def.name.clone())
}

/// Load a symbol definition from a JSON file.
pub fn load_file(path: &Path) -> Result<PrincipalSymbol> {
    let text = std::fs::read_to_string(path)?;
    let def: SymbolDefinition = serde_json::from_str(&text)?;
    from_definition(&def)
}

/// Resolve a name: a built-in, or a path to a definition file.
pub fn resolve(name: &str, dims: GroupDims) -> Result<PrincipalSymbol> {
    if BUILTIN_NAMES.contains(&name) {
        return builtin(name, dims);
    }
    let path = Path::new(name);
    if path.exists() {
        let sym = load_file(path)?;
        if sym.dims != dims {
            return Err(Error::Input(format!(
                "symbol file declares n = {}, requested n = {}",
                sym.dims.n(),
                dims.n()
            )));
        }
        return Ok(sym);
    }
    Err(Error::UnknownSymbol(name.to_string()))
}

/// alpha * a + beta * b, combining evaluators and tails componentwise.
pub fn linear_combination(
    a: &PrincipalSymbol,
    alpha: Complex64,
    b: &PrincipalSymbol,
    beta: Complex64,
    name: impl Into<String>,
) -> Result<PrincipalSymbol> {
    if a.dims != b.dims {
        return Err(Error::Dimension {
            expected: a.dims.horizontal_dim(),
            got: b.dims.horizontal_dim(),
        });
    }
    let n = a.dims.n();
    let schwartz = a.is_schwartz() && b.is_schwartz();
    let combine = |fa: CEval, fb: CEval| -> CEval {
        Arc::new(move |x: &[f64]| alpha * fa(x) + beta * fb(x))
    };
    let plus = combine(a.sigma_plus.f.clone(), b.sigma_plus.f.clone());
    let minus = combine(a.sigma_minus.f.clone(), b.sigma_minus.f.clone());
    let (ev_plus, ev_minus, tail) = if schwartz {
        (
            SymbolEvaluator::schwartz(plus),
            SymbolEvaluator::schwartz(minus),
            TailDescriptor::schwartz(),
        )
    } else {
        let smooth = a.sigma_plus.smooth_at_origin && b.sigma_plus.smooth_at_origin;
        let coeffs: Vec<CEval> = (0..=n)
            .map(|l| {
                let fa = a.tail.coeffs.get(l).cloned().unwrap_or_else(zero_eval);
                let fb = b.tail.coeffs.get(l).cloned().unwrap_or_else(zero_eval);
                combine(fa, fb)
            })
            .collect();
        (
            SymbolEvaluator::homogeneous_tail(plus, smooth),
            SymbolEvaluator::homogeneous_tail(minus, smooth),
            TailDescriptor::new(coeffs),
        )
    };
    PrincipalSymbol::new(a.dims, ev_plus, ev_minus, tail, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn builtin_names_resolve() {
        let d1 = GroupDims::new(1).unwrap();
        for name in BUILTIN_NAMES {
            builtin(name, d1).unwrap();
        }
        assert!(matches!(
            builtin("nope", d1),
            Err(Error::UnknownSymbol(_))
        ));
        let d2 = GroupDims::new(2).unwrap();
        assert!(matches!(builtin("angular", d2), Err(Error::Capability(_))));
        assert_eq!(builtins_for(d2).unwrap().len(), 4);
    }

    #[test]
    fn expression_forms_match_hand_coded() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2] {
            let dims = GroupDims::new(n).unwrap();
            for name in BUILTIN_NAMES {
                if name == "angular" && n != 1 {
                    continue;
                }
                let hand = builtin(name, dims).unwrap();
                let expr = from_definition(&builtin_definition(name, n).unwrap()).unwrap();
                for _ in 0..100 {
                    let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    if x.iter().map(|v| v * v).sum::<f64>() < 0.09 {
                        continue;
                    }
                    let hp = hand.sigma_plus.eval(&x);
                    let ep = expr.sigma_plus.eval(&x);
                    assert!(
                        (hp - ep).norm() <= 1e-14 * (1.0 + hp.norm()),
                        "{name} sigma_plus at {x:?}: {hp} vs {ep}"
                    );
                    let hm = hand.sigma_minus.eval(&x);
                    let em = expr.sigma_minus.eval(&x);
                    assert!(
                        (hm - em).norm() <= 1e-14 * (1.0 + hm.norm()),
                        "{name} sigma_minus at {x:?}: {hm} vs {em}"
                    );
                    // Tail coefficients on the normalized direction.
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let th: Vec<f64> = x.iter().map(|v| v / r).collect();
                    for l in 0..hand.tail.coeffs.len() {
                        let ha = (hand.tail.coeffs[l])(&th);
                        let ea = (expr.tail.coeffs[l])(&th);
                        assert!(
                            (ha - ea).norm() <= 1e-14 * (1.0 + ha.norm()),
                            "{name} a_{} at {th:?}: {ha} vs {ea}",
                            2 * l
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn definition_file_round_trip() {
        let def = builtin_definition("parabolic", 1).unwrap();
        let text = serde_json::to_string_pretty(&def).unwrap();
        let dir = std::env::temp_dir().join("heisentrace-registry-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("parabolic.json");
        std::fs::write(&path, &text).unwrap();
        let sym = load_file(&path).unwrap();
        assert_eq!(sym.name, "parabolic");
        assert!(!sym.is_schwartz());
        let rep = sym.default_consistency_check().unwrap();
        assert!(!rep.flagged);
    }

    #[test]
    fn malformed_definitions_are_rejected() {
        let mut def = builtin_definition("parabolic", 1).unwrap();
        def.tail = vec!["1".into()];
        assert!(matches!(from_definition(&def), Err(Error::Validation(_))));

        let mut def = builtin_definition("gaussian", 1).unwrap();
        def.sigma_plus = "exp(-norm2(x)".into();
        assert!(matches!(from_definition(&def), Err(Error::Parse { .. })));

        let mut def = builtin_definition("gaussian", 1).unwrap();
        def.sigma_plus = "x3".into();
        assert!(from_definition(&def).is_err());
    }

    #[test]
    fn unit_symbol_is_marked() {
        let d = GroupDims::new(1).unwrap();
        assert!(builtin("unit", d).unwrap().is_unit());
        assert!(!builtin("gaussian", d).unwrap().is_unit());
    }

    #[test]
    fn linear_combination_shapes() {
        let d = GroupDims::new(1).unwrap();
        let g = builtin("gaussian", d).unwrap();
        let p = builtin("parabolic", d).unwrap();
        let c1 = Complex64::new(2.0, 0.0);
        let combo = linear_combination(&g, c1, &p, c1, "combo").unwrap();
        assert!(!combo.is_schwartz());
        let s = linear_combination(&g, c1, &g, c1, "gg").unwrap();
        assert!(s.is_schwartz());
        let x = [0.5, 0.5];
        let expect = 2.0 * (g.sigma_plus.eval(&x) + p.sigma_plus.eval(&x));
        assert!((s.sigma_plus.eval(&x) - 4.0 * g.sigma_plus.eval(&x)).norm() < 1e-15);
        assert!((combo.sigma_plus.eval(&x) - expect).norm() < 1e-15);
    }
}
