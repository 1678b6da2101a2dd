//! Real trigonometric basis induced by a hyperbolic-cross set.
//!
//! Every antipodal pair `{m, -m}` of complex exponentials spans the same real
//! space as `cos(2πλ m·x)` and `sin(2πλ m·x)`. The pair is represented by the
//! member whose first nonzero entry is positive; the zero frequency contributes
//! only the constant. The basis therefore has exactly as many functions as the
//! index set has frequencies.
//!
//! All evaluations take the displacement `x - x_j` from a subdomain center.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hypercross::{HcIndexSet, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Cosine,
    Sine,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisFunction {
    pub index: MultiIndex,
    pub kind: Kind,
}

#[derive(Clone, Debug)]
pub struct RealFourierBasis {
    dim: usize,
    lambda: f64,
    functions: Vec<BasisFunction>,
    // Row-major (function, axis) angular frequencies 2πλ m_l.
    freqs: Vec<f64>,
    // -(2πλ)² |m|² per function.
    lap: Vec<f64>,
}

fn is_representative(m: &MultiIndex) -> bool {
    m.entries().iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

impl RealFourierBasis {
    /// Realifies the whole index set, keeping its canonical order with the
    /// cosine of each representative ahead of its sine.
    pub fn from_index_set(set: &HcIndexSet) -> Self {
        let mut functions = Vec::with_capacity(set.len());
        for m in set.indices() {
            if m.is_zero() {
                functions.push(BasisFunction {
                    index: m.clone(),
                    kind: Kind::Cosine,
                });
            } else if is_representative(m) {
                functions.push(BasisFunction {
                    index: m.clone(),
                    kind: Kind::Cosine,
                });
                functions.push(BasisFunction {
                    index: m.clone(),
                    kind: Kind::Sine,
                });
            }
        }
        Self::from_functions(set.dim(), set.lambda(), functions)
    }

    fn from_functions(dim: usize, lambda: f64, functions: Vec<BasisFunction>) -> Self {
        let scale = 2.0 * PI * lambda;
        let mut freqs = Vec::with_capacity(functions.len() * dim);
        let mut lap = Vec::with_capacity(functions.len());
        for f in &functions {
            freqs.extend(f.index.entries().iter().map(|&v| scale * f64::from(v)));
            lap.push(-scale * scale * f.index.norm_sq());
        }
        RealFourierBasis {
            dim,
            lambda,
            functions,
            freqs,
            lap,
        }
    }

    /// The first `count` functions of the canonical order.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count > self.functions.len() {
            return Err(Error::invalid(format!(
                "cannot truncate a basis of {} functions to {count}",
                self.functions.len()
            )));
        }
        Ok(Self::from_functions(
            self.dim,
            self.lambda,
            self.functions[..count].to_vec(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    /// Largest `|m|²` among the functions.
    pub fn max_norm_sq(&self) -> f64 {
        self.functions.iter().map(|f| f.index.norm_sq()).fold(0.0, f64::max)
    }

    fn check_point(&self, x_rel: &[f64]) -> Result<()> {
        if x_rel.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {}, basis has {}",
                x_rel.len(),
                self.dim
            )));
        }
        Ok(())
    }

    #[inline]
    fn phase(&self, k: usize, x_rel: &[f64]) -> f64 {
        let row = &self.freqs[k * self.dim..(k + 1) * self.dim];
        row.iter().zip(x_rel).map(|(w, x)| w * x).sum()
    }

    pub fn eval(&self, x_rel: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x_rel, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x_rel: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(x_rel)?;
        for (k, (f, o)) in self.functions.iter().zip(out.iter_mut()).enumerate() {
            let theta = self.phase(k, x_rel);
            *o = match f.kind {
                Kind::Cosine => theta.cos(),
                Kind::Sine => theta.sin(),
            };
        }
        Ok(())
    }

    /// `p`-th partial derivative along `axis` (zero-based) of every function.
    pub fn eval_deriv(&self, x_rel: &[f64], axis: usize, order: u32) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_deriv_into(x_rel, axis, order, &mut out)?;
        Ok(out)
    }

    pub fn eval_deriv_into(&self, x_rel: &[f64], axis: usize, order: u32, out: &mut [f64]) -> Result<()> {
        self.check_point(x_rel)?;
        if axis >= self.dim {
            return Err(Error::invalid(format!(
                "axis {axis} out of range for dimension {}",
                self.dim
            )));
        }
        if order == 0 {
            return Err(Error::invalid("derivative order must be at least 1"));
        }
        for (k, (f, o)) in self.functions.iter().zip(out.iter_mut()).enumerate() {
            let w = self.freqs[k * self.dim + axis];
            if w == 0.0 {
                *o = 0.0;
                continue;
            }
            let theta = self.phase(k, x_rel);
            let (s, c) = theta.sin_cos();
            // d^p/dθ^p of cos and sin, i.e. a rotation by p·π/2.
            let rotated = match (f.kind, order % 4) {
                (Kind::Cosine, 0) | (Kind::Sine, 1) => c,
                (Kind::Cosine, 1) | (Kind::Sine, 2) => -s,
                (Kind::Cosine, 2) | (Kind::Sine, 3) => -c,
                (Kind::Cosine, _) | (Kind::Sine, _) => s,
            };
            *o = w.powi(order as i32) * rotated;
        }
        Ok(())
    }

    pub fn eval_laplacian(&self, x_rel: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_laplacian_into(x_rel, &mut out)?;
        Ok(out)
    }

    pub fn eval_laplacian_into(&self, x_rel: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval_into(x_rel, out)?;
        for (o, l) in out.iter_mut().zip(&self.lap) {
            *o *= l;
        }
        Ok(())
    }
}
