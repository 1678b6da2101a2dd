//! Hyperbolic-cross frequency sets and their HDMR (superposition order) structure.
//!
//! A frequency `m ∈ ℤⁿ` belongs to the set of order `K` when
//!
//! ```text
//! ∏_j max{2πλ|m_j|, 1} <= K
//! ```
//!
//! The number of nonzero coordinates of `m` is its HDMR order: frequencies of
//! order `v` build the `v`-variate component functions of the expansion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Upper bound on the number of indices a single set may hold.
pub const MAX_SET_SIZE: usize = 20_000_000;

/// A lattice point `m ∈ ℤⁿ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<i32>);

impl MultiIndex {
    pub fn new(entries: Vec<i32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("multi-index must have at least one entry"));
        }
        Ok(MultiIndex(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "multi-index dimension must be positive");
        MultiIndex(vec![0; dim])
    }

    pub fn entries(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn order(&self) -> usize {
        hdmr_order(&self.0)
    }

    pub fn negated(&self) -> Self {
        MultiIndex(self.0.iter().map(|v| -v).collect())
    }

    /// Squared Euclidean norm `|m|²`.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[inline]
fn factor(scale: f64, v: i32) -> f64 {
    (scale * f64::from(v.unsigned_abs())).max(1.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be a positive finite number, got {lambda}"
        )));
    }
    Ok(())
}

/// Hyperbolic-cross weight `∏_j max{2πλ|m_j|, 1}`. Always `>= 1`.
pub fn hc_weight(m: &[i32], lambda: f64) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::invalid("multi-index must have at least one entry"));
    }
    check_lambda(lambda)?;
    let scale = 2.0 * PI * lambda;
    Ok(m.iter().fold(1.0, |w, &v| w * factor(scale, v)))
}

/// Number of nonzero coordinates, i.e. the order of the HDMR component that
/// the frequency contributes to.
pub fn hdmr_order(m: &[i32]) -> usize {
    m.iter().filter(|&&v| v != 0).count()
}

/// The hyperbolic-cross set of order `K`, optionally truncated to frequencies
/// with at most `superposition_cap` nonzero coordinates.
///
/// Indices are kept sorted by weight, then lexicographically.
#[derive(Clone, Debug)]
pub struct HcIndexSet {
    dim: usize,
    lambda: f64,
    order_cap: f64,
    superposition_cap: Option<usize>,
    indices: Vec<MultiIndex>,
    weights: Vec<f64>,
}

impl HcIndexSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn order_cap(&self) -> f64 {
        self.order_cap
    }

    pub fn superposition_cap(&self) -> Option<usize> {
        self.superposition_cap
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.indices.iter().zip(self.weights.iter().copied())
    }

    pub fn contains(&self, m: &MultiIndex) -> bool {
        self.position(m).is_some()
    }

    /// Position of `m` in the canonical ordering.
    pub fn position(&self, m: &MultiIndex) -> Option<usize> {
        if m.dim() != self.dim {
            return None;
        }
        let w = hc_weight(m.entries(), self.lambda).ok()?;
        let start = self.weights.partition_point(|&pw| pw < w);
        let end = self.weights.partition_point(|&pw| pw <= w);
        self.indices[start..end]
            .binary_search(m)
            .ok()
            .map(|offset| start + offset)
    }

    /// Groups the indices by HDMR order. The groups are disjoint and their
    /// union is the whole set.
    pub fn by_order(&self) -> BTreeMap<usize, Vec<&MultiIndex>> {
        let mut groups: BTreeMap<usize, Vec<&MultiIndex>> = BTreeMap::new();
        for m in &self.indices {
            groups.entry(m.order()).or_default().push(m);
        }
        groups
    }

    pub fn max_order(&self) -> usize {
        self.indices.iter().map(MultiIndex::order).max().unwrap_or(0)
    }
}

/// Enumerates the hyperbolic-cross set by a per-coordinate descent that
/// carries the partial weight and prunes once it exceeds `K`.
pub fn build_hc_set(dim: usize, lambda: f64, order_cap: f64, superposition_cap: Option<usize>) -> Result<HcIndexSet> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    check_lambda(lambda)?;
    if order_cap.is_nan() || order_cap.is_infinite() {
        return Err(Error::invalid(format!("K must be finite, got {order_cap}")));
    }
    if order_cap < 1.0 {
        return Err(Error::EmptySet { order_cap });
    }
    if superposition_cap == Some(0) {
        // Only the constant mode survives.
        return Ok(HcIndexSet {
            dim,
            lambda,
            order_cap,
            superposition_cap,
            indices: vec![MultiIndex::zeros(dim)],
            weights: vec![1.0],
        });
    }
    let scale = 2.0 * PI * lambda;
    let nz_cap = superposition_cap.unwrap_or(dim).min(dim);

    let mut out: Vec<(f64, Vec<i32>)> = Vec::new();
    let mut current = vec![0i32; dim];
    descend(
        &mut Descent {
            scale,
            cap: order_cap,
            nz_cap,
            out: &mut out,
        },
        &mut current,
        0,
        1.0,
        0,
    )?;

    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let (weights, indices) = out.into_iter().map(|(w, m)| (w, MultiIndex(m))).unzip();
    Ok(HcIndexSet {
        dim,
        lambda,
        order_cap,
        superposition_cap,
        indices,
        weights,
    })
}

struct Descent<'a> {
    scale: f64,
    cap: f64,
    nz_cap: usize,
    out: &'a mut Vec<(f64, Vec<i32>)>,
}

fn descend(st: &mut Descent<'_>, current: &mut Vec<i32>, axis: usize, partial: f64, nonzeros: usize) -> Result<()> {
    if axis == current.len() {
        if st.out.len() >= MAX_SET_SIZE {
            return Err(Error::invalid(format!(
                "hyperbolic-cross set exceeds {MAX_SET_SIZE} indices; lower K or raise lambda"
            )));
        }
        st.out.push((partial, current.clone()));
        return Ok(());
    }
    current[axis] = 0;
    descend(st, current, axis + 1, partial, nonzeros)?;
    if nonzeros < st.nz_cap {
        let mut v = 1i32;
        loop {
            let w = partial * factor(st.scale, v);
            if w > st.cap {
                break;
            }
            for s in [-v, v] {
                current[axis] = s;
                descend(st, current, axis + 1, w, nonzeros + 1)?;
            }
            v = v
                .checked_add(1)
                .ok_or_else(|| Error::invalid("frequency range overflow"))?;
        }
    }
    current[axis] = 0;
    Ok(())
}

/// Smallest order `K` whose set holds at least `count` indices, searched over
/// the weights of a set that is large enough.
pub fn minimal_order_for_count(dim: usize, lambda: f64, count: usize, superposition_cap: Option<usize>) -> Result<f64> {
    if count <= 1 {
        return Ok(1.0);
    }
    let mut k = 2.0;
    loop {
        let set = build_hc_set(dim, lambda, k, superposition_cap)?;
        if set.len() >= count {
            return Ok(set.weights()[count - 1]);
        }
        if superposition_cap == Some(0) {
            return Err(Error::invalid("superposition cap 0 only admits the constant mode"));
        }
        k *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    /// Independent oracle: scan the full box and apply the membership test.
    fn brute_force(dim: usize, lambda: f64, k: f64, cap: Option<usize>) -> BTreeSet<Vec<i32>> {
        let bound = (k / (2.0 * PI * lambda)).ceil() as i32;
        let side = (2 * bound + 1) as usize;
        let total = side.pow(dim as u32);
        let mut found = BTreeSet::new();
        for flat in 0..total {
            let mut rem = flat;
            let mut m = Vec::with_capacity(dim);
            for _ in 0..dim {
                m.push((rem % side) as i32 - bound);
                rem /= side;
            }
            let mut w = 1.0f64;
            for &v in &m {
                let f = 2.0 * PI * lambda * (v.abs() as f64);
                w *= if f > 1.0 { f } else { 1.0 };
            }
            let nz = m.iter().filter(|v| **v != 0).count();
            if w <= k && cap.is_none_or(|c| nz <= c) {
                found.insert(m);
            }
        }
        found
    }

    fn as_set(s: &HcIndexSet) -> BTreeSet<Vec<i32>> {
        s.indices().iter().map(|m| m.entries().to_vec()).collect()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(hc_weight(&[0, 0, 0], 0.37).unwrap(), 1.0);
        assert!((hc_weight(&[1, 0], 1.0 / PI).unwrap() - 2.0).abs() < 1e-15);
        assert!((hc_weight(&[2, 1], 1.0 / PI).unwrap() - 8.0).abs() < 1e-14);
        assert!(matches!(hc_weight(&[], 1.0), Err(Error::InvalidArgument(_))));
        assert!(hc_weight(&[1], 0.0).is_err());
    }

    #[test]
    fn order_examples() {
        assert_eq!(hdmr_order(&[0, 0, 0, 0, 0]), 0);
        assert_eq!(hdmr_order(&[0, 3, 0]), 1);
        assert_eq!(hdmr_order(&[1, -2, 0, 4]), 3);
    }

    #[test]
    fn set_size_examples() {
        let l = 1.0 / (2.0 * PI);
        let s1 = build_hc_set(1, l, 3.0, None).unwrap();
        assert_eq!(s1.len(), 7);
        assert_eq!(as_set(&s1), (-3..=3).map(|v| vec![v]).collect());
        assert_eq!(build_hc_set(2, l, 3.0, None).unwrap().len(), 33);
        assert_eq!(brute_force(2, l, 3.0, None).len(), 33);
        let s5 = build_hc_set(5, 1.0 / PI, 1.0, None).unwrap();
        assert_eq!(s5.len(), 1);
        assert!(s5.indices()[0].is_zero());
    }

    #[test]
    fn k_below_one_is_empty_set_error() {
        assert!(matches!(build_hc_set(2, 0.3, 0.99, None), Err(Error::EmptySet { .. })));
        assert!(build_hc_set(0, 0.3, 2.0, None).is_err());
    }

    #[test]
    fn ordering_is_weight_then_lex() {
        let s = build_hc_set(3, 1.0 / (2.0 * PI), 6.0, None).unwrap();
        for pair in s.iter().collect::<Vec<_>>().windows(2) {
            let ((a, wa), (b, wb)) = (pair[0], pair[1]);
            assert!(wa < wb || (wa == wb && a < b));
        }
    }

    #[test]
    fn superposition_cap_filters_orders() {
        let l = 1.0 / (2.0 * PI);
        let s = build_hc_set(4, l, 12.0, Some(2)).unwrap();
        assert!(s.max_order() <= 2);
        assert_eq!(as_set(&s), brute_force(4, l, 12.0, Some(2)));
        let full = build_hc_set(4, l, 12.0, None).unwrap();
        assert!(full.max_order() > 2);
        assert_eq!(build_hc_set(3, l, 10.0, Some(0)).unwrap().len(), 1);
    }

    #[test]
    fn five_dim_example_admits_third_order_terms() {
        // With 2πλ = 2 an order-r frequency costs at least 2^r, so K = 31
        // reaches order 4 and stops short of order 5.
        let s = build_hc_set(5, 1.0 / PI, 31.0, None).unwrap();
        assert_eq!(s.max_order(), 4);
        let fourth = &s.by_order()[&4];
        assert!(fourth.iter().all(|m| m.entries().iter().all(|v| v.abs() <= 1)));
        assert!(!s.by_order()[&3].is_empty());
    }

    #[test]
    fn position_matches_canonical_order() {
        let s = build_hc_set(2, 0.2, 9.0, None).unwrap();
        for (i, m) in s.indices().iter().enumerate() {
            assert_eq!(s.position(m), Some(i));
        }
        assert_eq!(s.position(&MultiIndex::new(vec![100, 0]).unwrap()), None);
    }

    #[test]
    fn minimal_order_reaches_count() {
        let l = 0.21;
        for count in [1, 2, 7, 40, 66] {
            let k = minimal_order_for_count(2, l, count, None).unwrap();
            let s = build_hc_set(2, l, k, None).unwrap();
            assert!(s.len() >= count);
            if count > 1 {
                let below = build_hc_set(2, l, k * (1.0 - 1e-9), None).unwrap();
                assert!(below.len() < count);
            }
        }
    }

    #[test]
    fn by_order_is_disjoint_cover() {
        let s = build_hc_set(3, 1.0 / (2.0 * PI), 8.0, None).unwrap();
        let groups = s.by_order();
        let total: usize = groups.values().map(Vec::len).sum();
        assert_eq!(total, s.len());
        for (order, members) in &groups {
            assert!(members.iter().all(|m| m.order() == *order));
        }
        assert_eq!(groups[&0].len(), 1);
    }

    proptest! {
        #[test]
        fn matches_brute_force(dim in 1usize..=3, li in 0usize..3, k in 1.0f64..14.0) {
            let lambda = [1.0 / PI, 1.0 / (2.0 * PI), 1.0 / (4.0 * PI)][li];
            let s = build_hc_set(dim, lambda, k, None).unwrap();
            prop_assert_eq!(as_set(&s), brute_force(dim, lambda, k, None));
        }

        #[test]
        fn monotone_in_k(dim in 1usize..=3, k1 in 1.0f64..10.0, dk in 0.0f64..10.0, lambda in 0.05f64..0.5) {
            let small = as_set(&build_hc_set(dim, lambda, k1, None).unwrap());
            let large = as_set(&build_hc_set(dim, lambda, k1 + dk, None).unwrap());
            prop_assert!(small.is_subset(&large));
        }

        #[test]
        fn symmetric_under_negation(dim in 1usize..=4, k in 1.0f64..12.0, lambda in 0.05f64..0.5) {
            let s = build_hc_set(dim, lambda, k, None).unwrap();
            for m in s.indices() {
                prop_assert!(s.contains(&m.negated()));
            }
        }
    }
}
