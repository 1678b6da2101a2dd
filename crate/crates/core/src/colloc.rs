//! Per-subdomain collocation systems `F_j c_j = U_j` and the shape functions
//! `φ(x) = F_λ(x - x_j)ᵀ F_j⁻¹` built from them.

use rayon::prelude::*;

use crate::basis::RealFourierBasis;
use crate::domain::{Face, NodeSet, Partition};
use crate::error::{Error, Result};
use crate::hypercross::{build_hc_set, minimal_order_for_count};
use crate::linalg::{condition_number_1, Lu, Matrix};

/// Factorizations with a smaller pivot ratio are rejected.
pub const PIVOT_RATIO_FLOOR: f64 = 1e-12;

/// Diagonal shift applied by the ridge fallback, relative to `‖F‖₁`.
pub const RIDGE_SHIFT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderChoice {
    /// Smallest `K` whose set holds `M_j` indices.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalOptions {
    pub lambda: f64,
    pub order: OrderChoice,
    pub superposition_cap: Option<usize>,
    pub ridge: bool,
}

impl LocalOptions {
    pub fn new(lambda: f64) -> Self {
        LocalOptions {
            lambda,
            order: OrderChoice::Auto,
            superposition_cap: None,
            ridge: false,
        }
    }
}

/// `λ = 1 / (2 w_max)` with `w_max` the largest subbox edge plus twice the
/// fictitious offset.
pub fn default_lambda(partition: &Partition, max_offset: f64) -> f64 {
    1.0 / (2.0 * (partition.max_edge() + 2.0 * max_offset))
}

#[derive(Clone, Debug)]
pub struct LocalSystem {
    subdomain: usize,
    center: Vec<f64>,
    node_ids: Vec<usize>,
    order_cap: f64,
    basis: RealFourierBasis,
    matrix: Matrix,
    lu: Lu,
    kappa: f64,
    ridged: bool,
}

/// Builds the system of subdomain `j` from the nodes it owns (owners must be
/// assigned).
pub fn build_local(partition: &Partition, nodes: &NodeSet, j: usize, opts: &LocalOptions) -> Result<LocalSystem> {
    if j >= partition.len() {
        return Err(Error::invalid(format!("subdomain {j} out of range")));
    }
    let lists = nodes.nodes_by_owner(partition.len())?;
    build_from_ids(partition, nodes, j, &lists[j], opts)
}

/// Builds every subdomain's system in parallel.
pub fn build_all(partition: &Partition, nodes: &NodeSet, opts: &LocalOptions) -> Result<Vec<LocalSystem>> {
    let lists = nodes.nodes_by_owner(partition.len())?;
    lists
        .par_iter()
        .enumerate()
        .map(|(j, ids)| build_from_ids(partition, nodes, j, ids, opts))
        .collect()
}

fn build_from_ids(
    partition: &Partition,
    nodes: &NodeSet,
    j: usize,
    ids: &[usize],
    opts: &LocalOptions,
) -> Result<LocalSystem> {
    let m = ids.len();
    if m == 0 {
        return Err(Error::invalid(format!("subdomain {j} owns no nodes")));
    }
    if !(opts.lambda.is_finite() && opts.lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {}", opts.lambda)));
    }
    let dim = nodes.dim();
    let minimal = minimal_order_for_count(dim, opts.lambda, m, opts.superposition_cap)?;
    let k = match opts.order {
        OrderChoice::Auto => minimal,
        OrderChoice::Fixed(k) => k,
    };
    let set = build_hc_set(dim, opts.lambda, k, opts.superposition_cap)?;
    if set.len() < m {
        return Err(Error::InsufficientBasis {
            subdomain: j,
            needed: m,
            available: set.len(),
            minimal_k: minimal,
        });
    }
    let basis = RealFourierBasis::from_index_set(&set).truncated(m)?;
    let center = partition.subdomain(j).center.clone();

    let mut matrix = Matrix::zeros(m, m);
    let mut rel = vec![0.0; dim];
    for (r, &i) in ids.iter().enumerate() {
        relative(nodes.point(i), &center, &mut rel);
        basis.eval_into(&rel, matrix.row_mut(r))?;
    }

    let (lu, ridged) = match factor_checked(&matrix) {
        Ok(lu) => (lu, false),
        Err(ratio) if opts.ridge => {
            let mut shifted = matrix.clone();
            let shift = RIDGE_SHIFT * matrix.norm1();
            for d in 0..m {
                shifted[(d, d)] += shift;
            }
            match factor_checked(&shifted) {
                Ok(lu) => {
                    matrix = shifted;
                    (lu, true)
                }
                Err(_) => {
                    return Err(Error::IllConditioned {
                        subdomain: j,
                        pivot_ratio: ratio,
                    })
                }
            }
        }
        Err(ratio) => {
            return Err(Error::IllConditioned {
                subdomain: j,
                pivot_ratio: ratio,
            })
        }
    };
    let kappa = condition_number_1(&matrix, &lu);
    Ok(LocalSystem {
        subdomain: j,
        center,
        node_ids: ids.to_vec(),
        order_cap: k,
        basis,
        matrix,
        lu,
        kappa,
        ridged,
    })
}

fn factor_checked(a: &Matrix) -> std::result::Result<Lu, f64> {
    match Lu::factor(a) {
        Ok(lu) if lu.pivot_ratio() >= PIVOT_RATIO_FLOOR => Ok(lu),
        Ok(lu) => Err(lu.pivot_ratio()),
        Err(_) => Err(0.0),
    }
}

fn relative(x: &[f64], center: &[f64], out: &mut [f64]) {
    for ((o, a), c) in out.iter_mut().zip(x).zip(center) {
        *o = a - c;
    }
}

impl LocalSystem {
    pub fn subdomain(&self) -> usize {
        self.subdomain
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Global ids of the owned nodes, in column order.
    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    /// The `K` the basis was drawn from.
    pub fn order_cap(&self) -> f64 {
        self.order_cap
    }

    pub fn basis(&self) -> &RealFourierBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Whether the ridge fallback had to shift the diagonal.
    pub fn ridged(&self) -> bool {
        self.ridged
    }

    pub fn condition_number(&self) -> f64 {
        self.kappa
    }

    /// Coefficients `c = F⁻¹ U`.
    pub fn coefficients(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} nodal values, got {}",
                self.len(),
                values.len()
            )));
        }
        let mut c = values.to_vec();
        self.lu.solve(&mut c);
        Ok(c)
    }

    fn shape_from(
        &self,
        x: &[f64],
        fill: impl FnOnce(&RealFourierBasis, &[f64], &mut [f64]) -> Result<()>,
    ) -> Result<Vec<f64>> {
        if x.len() != self.center.len() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.center.len()
            )));
        }
        let mut rel = vec![0.0; x.len()];
        relative(x, &self.center, &mut rel);
        let mut row = vec![0.0; self.len()];
        fill(&self.basis, &rel, &mut row)?;
        self.lu.solve_transpose(&mut row);
        Ok(row)
    }

    /// `φ(x)`, so that the interpolant is `φ(x)·U`.
    pub fn shape_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.shape_from(x, |b, r, out| b.eval_into(r, out))
    }

    pub fn shape_laplacian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.shape_from(x, |b, r, out| b.eval_laplacian_into(r, out))
    }

    /// `∂^p φ / ∂x_axis^p` with a 0-based axis.
    pub fn shape_deriv(&self, x: &[f64], axis: usize, order: u32) -> Result<Vec<f64>> {
        self.shape_from(x, |b, r, out| b.eval_deriv_into(r, axis, order, out))
    }

    /// Outward normal derivative of `φ` across `face`.
    pub fn shape_normal(&self, x: &[f64], face: Face) -> Result<Vec<f64>> {
        let mut row = self.shape_deriv(x, face.axis, 1)?;
        let s = face.outward_sign();
        row.iter_mut().for_each(|v| *v *= s);
        Ok(row)
    }

    pub fn interpolate(&self, x: &[f64], values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::invalid("nodal value count mismatch"));
        }
        Ok(crate::linalg::dot(&self.shape_values(x)?, values))
    }
}

/// Largest `κ(F_j)` over the subdomains.
pub fn max_condition_number(locals: &[LocalSystem]) -> f64 {
    locals.iter().map(LocalSystem::condition_number).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{add_fictitious, generate_nodes, partition_box, BoxDomain, NodeStrategy};
    use std::f64::consts::PI;

    fn single_node() -> (Partition, NodeSet) {
        let d = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let p = partition_box(&d, &[1, 1]).unwrap();
        let mut n = NodeSet::from_points(&d, &[vec![0.0, 0.0]]).unwrap();
        n.assign_owners(&p).unwrap();
        (p, n)
    }

    #[test]
    fn single_node_system() {
        let (p, n) = single_node();
        let l = build_local(&p, &n, 0, &LocalOptions::new(0.25)).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.matrix()[(0, 0)], 1.0);
        assert_eq!(l.coefficients(&[3.5]).unwrap(), vec![3.5]);
        assert_eq!(l.condition_number(), 1.0);
    }

    #[test]
    fn fixed_order_too_small_reports_minimal_k() {
        let d = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let p = partition_box(&d, &[1, 1]).unwrap();
        let mut n = generate_nodes(&d, 30, NodeStrategy::Sobol, 0).unwrap();
        n.assign_owners(&p).unwrap();
        let mut o = LocalOptions::new(0.4);
        o.order = OrderChoice::Fixed(1.0);
        match build_local(&p, &n, 0, &o) {
            Err(Error::InsufficientBasis {
                needed,
                available,
                minimal_k,
                ..
            }) => {
                assert_eq!((needed, available), (30, 1));
                let set = build_hc_set(2, 0.4, minimal_k, None).unwrap();
                assert!(set.len() >= 30);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_nodes_are_ill_conditioned() {
        let d = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let p = partition_box(&d, &[1]).unwrap();
        let mut n = NodeSet::from_points(&d, &[vec![0.3], vec![0.3], vec![0.6]]).unwrap();
        n.assign_owners(&p).unwrap();
        let o = LocalOptions::new(0.3);
        assert!(matches!(
            build_local(&p, &n, 0, &o),
            Err(Error::IllConditioned { subdomain: 0, .. })
        ));
        let mut r = o.clone();
        r.ridge = true;
        let l = build_local(&p, &n, 0, &r).unwrap();
        assert!(l.ridged());
    }

    fn config_2d() -> (Partition, NodeSet, Vec<LocalSystem>) {
        let d = BoxDomain::cube(2, -7.0, 7.0).unwrap();
        let p = partition_box(&d, &[7, 7]).unwrap();
        let nodes = generate_nodes(&d, 3249, NodeStrategy::Sobol, 0).unwrap();
        let nodes = add_fictitious(&nodes, &p, 0.2).unwrap();
        let lambda = default_lambda(&p, 0.2);
        let locals = build_all(&p, &nodes, &LocalOptions::new(lambda)).unwrap();
        (p, nodes, locals)
    }

    #[test]
    fn unit_rows_and_constants() {
        let (_, nodes, locals) = config_2d();
        for l in &locals {
            let tol = 1e-8_f64.max(l.condition_number() * f64::EPSILON * 100.0);
            for (r, &i) in l.node_ids().iter().enumerate() {
                let phi = l.shape_values(nodes.point(i)).unwrap();
                for (c, v) in phi.iter().enumerate() {
                    let e = if c == r { 1.0 } else { 0.0 };
                    assert!((v - e).abs() <= tol, "subdomain {} row {r} col {c}: {v}", l.subdomain());
                }
            }
            let x = l.center().to_vec();
            let ones = vec![1.0; l.len()];
            assert!((l.interpolate(&x, &ones).unwrap() - 1.0).abs() < 1e-8);
            let lap: f64 = l.shape_laplacian(&x).unwrap().iter().sum();
            assert!(lap.abs() < 1e-6 * l.condition_number().max(1.0));
        }
    }

    #[test]
    fn cosine_mode_is_laplacian_eigenfunction() {
        let (_, nodes, locals) = config_2d();
        let l = &locals[24];
        let lam = l.basis().lambda();
        let w = 2.0 * PI * lam;
        let g = |x: &[f64]| (w * (x[0] - l.center()[0])).cos();
        let vals: Vec<f64> = l.node_ids().iter().map(|&i| g(nodes.point(i))).collect();
        let x = [l.center()[0] + 0.3, l.center()[1] - 0.7];
        let lap = crate::linalg::dot(&l.shape_laplacian(&x).unwrap(), &vals);
        assert!((lap + w * w * g(&x)).abs() < 1e-6, "{lap}");
    }

    #[test]
    fn default_lambda_rule() {
        let d = BoxDomain::cube(2, -7.0, 7.0).unwrap();
        let p = partition_box(&d, &[7, 7]).unwrap();
        assert!((default_lambda(&p, 0.5) - 1.0 / 6.0).abs() < 1e-15);
    }
}
