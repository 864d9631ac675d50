//! The Heisenberg group H_n = R^{2n} x R.
//!
//! Points are pairs (x, t) with x in R^{2n} and t central. The product is
//! (x,t)(y,s) = (x+y, t+s+omega(x,y)/2) where omega is the standard
//! symplectic form on R^{2n}, and the parabolic dilations act by
//! (x,t) -> (lambda x, lambda^2 t), giving homogeneous dimension Q = 2n+2.

use crate::error::{Error, Result};

/// Dimensional data of H_n. `n` is half the horizontal dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupDims {
    n: usize,
}

impl GroupDims {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("group dimension n must be >= 1".into()));
        }
        Ok(GroupDims { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension 2n of the horizontal slice.
    pub fn horizontal_dim(&self) -> usize {
        2 * self.n
    }

    /// Homogeneous dimension Q = 2n + 2 under the parabolic dilations.
    pub fn homogeneous_dim(&self) -> usize {
        2 * self.n + 2
    }
}

/// A point (x, t) of H_n. The ambient dims are carried explicitly so that
/// mismatched operands are rejected eagerly rather than silently zipped.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub dims: GroupDims,
    pub x: Vec<f64>,
    pub t: f64,
}

impl GroupElement {
    pub fn new(dims: GroupDims, x: Vec<f64>, t: f64) -> Result<Self> {
        if x.len() != dims.horizontal_dim() {
            return Err(Error::Dimension {
                expected: dims.horizontal_dim(),
                got: x.len(),
            });
        }
        Ok(GroupElement { dims, x, t })
    }

    pub fn identity(dims: GroupDims) -> Self {
        GroupElement {
            dims,
            x: vec![0.0; dims.horizontal_dim()],
            t: 0.0,
        }
    }

    /// Group inverse (-x, -t).
    pub fn inverse(&self) -> Self {
        GroupElement {
            dims: self.dims,
            x: self.x.iter().map(|v| -v).collect(),
            t: -self.t,
        }
    }

    /// The central element z = (0, s).
    pub fn central(dims: GroupDims, s: f64) -> Self {
        GroupElement {
            dims,
            x: vec![0.0; dims.horizontal_dim()],
            t: s,
        }
    }
}

/// Standard symplectic form omega(x, y) = sum_i x_i y_{n+i} - x_{n+i} y_i.
pub fn symplectic_form(dims: GroupDims, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = dims.horizontal_dim();
    if x.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    if y.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: y.len(),
        });
    }
    let n = dims.n();
    let mut acc = 0.0;
    for i in 0..n {
        acc += x[i] * y[n + i] - x[n + i] * y[i];
    }
    Ok(acc)
}

/// Group product (x,t)(y,s) = (x+y, t+s+omega(x,y)/2).
pub fn group_multiply(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    if a.dims != b.dims {
        return Err(Error::Dimension {
            expected: a.dims.horizontal_dim(),
            got: b.dims.horizontal_dim(),
        });
    }
    let omega = symplectic_form(a.dims, &a.x, &b.x)?;
    let x = a.x.iter().zip(&b.x).map(|(u, v)| u + v).collect();
    Ok(GroupElement {
        dims: a.dims,
        x,
        t: a.t + b.t + 0.5 * omega,
    })
}

/// Parabolic dilation delta_lambda(x, t) = (lambda x, lambda^2 t).
pub fn dilate(lambda: f64, a: &GroupElement) -> Result<GroupElement> {
    if !(lambda > 0.0) {
        return Err(Error::Input(format!(
            "dilation parameter must be positive, got {lambda}"
        )));
    }
    Ok(GroupElement {
        dims: a.dims,
        x: a.x.iter().map(|v| lambda * v).collect(),
        t: lambda * lambda * a.t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(n: usize) -> GroupDims {
        GroupDims::new(n).unwrap()
    }

    #[test]
    fn homogeneous_dimension() {
        assert_eq!(dims(1).homogeneous_dim(), 4);
        assert_eq!(dims(2).homogeneous_dim(), 6);
        assert!(GroupDims::new(0).is_err());
    }

    #[test]
    fn symplectic_basic_values() {
        let d = dims(1);
        assert_eq!(symplectic_form(d, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        let d2 = dims(2);
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [4.0, 3.0, 2.0, 1.0];
        // (1*2 - 3*4) + (2*1 - 4*3) = -20
        assert_eq!(symplectic_form(d2, &x, &y).unwrap(), -20.0);
    }

    #[test]
    fn symplectic_dimension_mismatch() {
        let d = dims(1);
        assert!(symplectic_form(d, &[1.0], &[0.0, 1.0]).is_err());
        assert!(symplectic_form(d, &[1.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn group_law_example() {
        let d = dims(1);
        let a = GroupElement::new(d, vec![1.0, 0.0], 0.0).unwrap();
        let b = GroupElement::new(d, vec![0.0, 1.0], 0.0).unwrap();
        let ab = group_multiply(&a, &b).unwrap();
        assert_eq!(ab.x, vec![1.0, 1.0]);
        assert_eq!(ab.t, 0.5);
    }

    #[test]
    fn identity_and_inverse() {
        let d = dims(2);
        let a = GroupElement::new(d, vec![0.3, -1.0, 2.0, 0.7], -0.4).unwrap();
        let e = GroupElement::identity(d);
        assert_eq!(group_multiply(&a, &e).unwrap(), a);
        assert_eq!(group_multiply(&e, &a).unwrap(), a);
        let prod = group_multiply(&a, &a.inverse()).unwrap();
        for v in &prod.x {
            assert!(v.abs() < 1e-15);
        }
        assert!(prod.t.abs() < 1e-15);
    }

    #[test]
    fn dilation_examples() {
        let d = dims(1);
        let a = GroupElement::new(d, vec![1.0, -2.0], 3.0).unwrap();
        assert_eq!(dilate(1.0, &a).unwrap(), a);
        let b = dilate(2.0, &a).unwrap();
        assert_eq!(b.x, vec![2.0, -4.0]);
        assert_eq!(b.t, 12.0);
        assert!(dilate(0.0, &a).is_err());
        assert!(dilate(-1.0, &a).is_err());
    }

    fn vec2n(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 2 * n)
    }

    proptest! {
        #[test]
        fn omega_antisymmetric_bilinear(x in vec2n(2), y in vec2n(2), z in vec2n(2),
                                        a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let d = dims(2);
            let wxy = symplectic_form(d, &x, &y).unwrap();
            let wyx = symplectic_form(d, &y, &x).unwrap();
            prop_assert!((wxy + wyx).abs() < 1e-12 * (1.0 + wxy.abs()));
            prop_assert!(symplectic_form(d, &x, &x).unwrap().abs() < 1e-12);
            let comb: Vec<f64> = y.iter().zip(&z).map(|(u, v)| a * u + b * v).collect();
            let lhs = symplectic_form(d, &x, &comb).unwrap();
            let rhs = a * wxy + b * symplectic_form(d, &x, &z).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn multiplication_associative(ax in vec2n(1), at in -5.0f64..5.0,
                                      bx in vec2n(1), bt in -5.0f64..5.0,
                                      cx in vec2n(1), ct in -5.0f64..5.0) {
            let d = dims(1);
            let a = GroupElement::new(d, ax, at).unwrap();
            let b = GroupElement::new(d, bx, bt).unwrap();
            let c = GroupElement::new(d, cx, ct).unwrap();
            let lhs = group_multiply(&group_multiply(&a, &b).unwrap(), &c).unwrap();
            let rhs = group_multiply(&a, &group_multiply(&b, &c).unwrap()).unwrap();
            for (u, v) in lhs.x.iter().zip(&rhs.x) {
                prop_assert!((u - v).abs() < 1e-12);
            }
            prop_assert!((lhs.t - rhs.t).abs() < 1e-10);
        }

        #[test]
        fn dilation_is_automorphism(ax in vec2n(1), at in -5.0f64..5.0,
                                    bx in vec2n(1), bt in -5.0f64..5.0,
                                    lambda in 0.1f64..4.0) {
            let d = dims(1);
            let a = GroupElement::new(d, ax, at).unwrap();
            let b = GroupElement::new(d, bx, bt).unwrap();
            let lhs = dilate(lambda, &group_multiply(&a, &b).unwrap()).unwrap();
            let rhs = group_multiply(&dilate(lambda, &a).unwrap(), &dilate(lambda, &b).unwrap()).unwrap();
            for (u, v) in lhs.x.iter().zip(&rhs.x) {
                prop_assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
            }
            prop_assert!((lhs.t - rhs.t).abs() < 1e-10 * (1.0 + lhs.t.abs()));
        }

        #[test]
        fn dilation_composes(lam in 0.2f64..3.0, mu in 0.2f64..3.0,
                             ax in vec2n(1), at in -5.0f64..5.0) {
            let d = dims(1);
            let a = GroupElement::new(d, ax, at).unwrap();
            let lhs = dilate(lam, &dilate(mu, &a).unwrap()).unwrap();
            let rhs = dilate(lam * mu, &a).unwrap();
            for (u, v) in lhs.x.iter().zip(&rhs.x) {
                prop_assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
            }
            prop_assert!((lhs.t - rhs.t).abs() < 1e-10 * (1.0 + lhs.t.abs()));
        }
    }
}
