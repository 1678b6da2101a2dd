//! Sine-Gordon problem instances `u_tt + β u_t = Δu - ψ(x) sin u` on a box
//! with Neumann data, and the kink family `4 arctan(C exp(a·x - b t))`.

use std::fmt;
use std::sync::Arc;

use crate::domain::{BoxDomain, Face};
use crate::error::{Error, Result};

pub type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Outward normal derivative prescribed on a face at a time.
pub type BoundaryData = Arc<dyn Fn(&[f64], Face, f64) -> f64 + Send + Sync>;
pub type Solution = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SgeProblem {
    pub name: String,
    pub domain: BoxDomain,
    pub beta: f64,
    pub psi: Field,
    pub v1: Field,
    pub v2: Field,
    pub w: BoundaryData,
    pub exact: Option<Solution>,
}

impl fmt::Debug for SgeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SgeProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("beta", &self.beta)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl SgeProblem {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be nonnegative, got {}", self.beta)));
        }
        Ok(())
    }

    /// Kink problem with `β = 0`, `ψ ≡ 1` and all data taken from the exact
    /// solution.
    pub fn soliton(name: impl Into<String>, params: SolitonParams, domain: BoxDomain) -> Result<Self> {
        if params.dim() != domain.dim() {
            return Err(Error::invalid(format!(
                "soliton has {} coefficients but the box has dimension {}",
                params.dim(),
                domain.dim()
            )));
        }
        let p = Arc::new(params);
        let (p1, p2, p3, p4) = (p.clone(), p.clone(), p.clone(), p);
        Ok(SgeProblem {
            name: name.into(),
            domain,
            beta: 0.0,
            psi: Arc::new(|_| 1.0),
            v1: Arc::new(move |x| p1.exact(x, 0.0)),
            v2: Arc::new(move |x| p2.time_derivative(x, 0.0)),
            w: Arc::new(move |x, face, t| p3.normal_derivative(x, t, face)),
            exact: Some(Arc::new(move |x, t| p4.exact(x, t))),
        })
    }

    /// `ψ ≡ 1` with zero data; `u ≡ 0` is the solution.
    pub fn zero(domain: BoxDomain) -> Self {
        SgeProblem {
            name: "zero".into(),
            domain,
            beta: 0.0,
            psi: Arc::new(|_| 1.0),
            v1: Arc::new(|_| 0.0),
            v2: Arc::new(|_| 0.0),
            w: Arc::new(|_, _, _| 0.0),
            exact: Some(Arc::new(|_, _| 0.0)),
        }
    }

    /// `ψ ≡ 0` with `u ≡ c`.
    pub fn constant(domain: BoxDomain, c: f64) -> Self {
        SgeProblem {
            name: format!("constant:c={c}"),
            domain,
            beta: 0.0,
            psi: Arc::new(|_| 0.0),
            v1: Arc::new(move |_| c),
            v2: Arc::new(|_| 0.0),
            w: Arc::new(|_, _, _| 0.0),
            exact: Some(Arc::new(move |_, _| c)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolitonParams {
    c: f64,
    a: Vec<f64>,
    b: f64,
}

/// Allowed violation of `Σ a_i² = 1 + b²`.
pub const SPEED_CONSTRAINT_TOL: f64 = 1e-12;

impl SolitonParams {
    pub fn new(c: f64, a: Vec<f64>, b: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("soliton needs at least one coefficient a_i"));
        }
        if !(c.is_finite() && b.is_finite() && a.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("soliton parameters must be finite"));
        }
        let lhs: f64 = a.iter().map(|v| v * v).sum();
        let gap = (lhs - (1.0 + b * b)).abs();
        if gap > SPEED_CONSTRAINT_TOL {
            return Err(Error::invalid(format!(
                "soliton needs sum a_i^2 = 1 + b^2, got {lhs} vs {} (gap {gap:.3e})",
                1.0 + b * b
            )));
        }
        Ok(SolitonParams { c, a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `a·x - b t + ln|C|`, the phase in which the kink is centered.
    fn phase(&self, x: &[f64], t: f64) -> f64 {
        self.a.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - self.b * t + self.c.abs().ln()
    }

    pub fn exact(&self, x: &[f64], t: f64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        self.c.signum() * 4.0 * self.phase(x, t).exp().atan()
    }

    /// `2 sign(C) / cosh(phase)`, the derivative of the profile in the phase.
    fn slope(&self, x: &[f64], t: f64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        self.c.signum() * 2.0 / self.phase(x, t).cosh()
    }

    pub fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        -self.b * self.slope(x, t)
    }

    pub fn partial(&self, x: &[f64], t: f64, axis: usize) -> f64 {
        self.a[axis] * self.slope(x, t)
    }

    pub fn normal_derivative(&self, x: &[f64], t: f64, face: Face) -> f64 {
        face.outward_sign() * self.partial(x, t, face.axis)
    }
}

/// Kink `4 arctan(exp(x + y - t))` on `[-7, 7]²`.
pub fn make_test_2d() -> SgeProblem {
    let p = SolitonParams::new(1.0, vec![1.0, 1.0], 1.0).expect("valid parameters");
    let d = BoxDomain::cube(2, -7.0, 7.0).expect("valid box");
    SgeProblem::soliton("test2d", p, d).expect("matching dimensions")
}

/// Five-dimensional kink on `[-6, 6]⁵`.
pub fn make_test_5d() -> SgeProblem {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let p = SolitonParams::new(1.0, vec![h, h, h, 0.5, 0.5], 1.0).expect("valid parameters");
    let d = BoxDomain::cube(5, -6.0, 6.0).expect("valid box");
    SgeProblem::soliton("test5d", p, d).expect("matching dimensions")
}

/// Resolves `test2d`, `test5d`, `zero:dim=..;lower=..;upper=..`,
/// `constant:c=..;dim=..;lower=..;upper=..` and
/// `soliton:c=..;b=..;a=a1,a2,..;lower=..;upper=..`.
///
/// `lower`/`upper` take one value for every axis or a comma list.
pub fn problem_by_name(text: &str) -> Result<SgeProblem> {
    let (head, rest) = match text.split_once(':') {
        Some((h, r)) => (h.trim(), r),
        None => (text.trim(), ""),
    };
    let kv = parse_params(rest)?;
    let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice());
    let known = |allowed: &[&str]| -> Result<()> {
        for (k, _) in &kv {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::invalid(format!("problem '{head}' has no parameter '{k}'")));
            }
        }
        Ok(())
    };
    let scalar = |key: &str, default: Option<f64>| -> Result<f64> {
        match get(key) {
            Some([v]) => Ok(*v),
            Some(_) => Err(Error::invalid(format!("parameter '{key}' takes one value"))),
            None => default.ok_or_else(|| Error::invalid(format!("missing parameter '{key}'"))),
        }
    };
    let bounds = |dim: usize, lo: f64, hi: f64| -> Result<BoxDomain> {
        let expand = |key: &str, d: f64| -> Result<Vec<f64>> {
            match get(key) {
                None => Ok(vec![d; dim]),
                Some([v]) => Ok(vec![*v; dim]),
                Some(vs) if vs.len() == dim => Ok(vs.to_vec()),
                Some(vs) => Err(Error::invalid(format!(
                    "parameter '{key}' has {} values for dimension {dim}",
                    vs.len()
                ))),
            }
        };
        BoxDomain::new(expand("lower", lo)?, expand("upper", hi)?)
    };
    let dim_param = || -> Result<usize> {
        let d = scalar("dim", Some(2.0))?;
        if d < 1.0 || d.fract() != 0.0 {
            return Err(Error::invalid(format!("dim must be a positive integer, got {d}")));
        }
        Ok(d as usize)
    };
    match head {
        "test2d" => {
            known(&[])?;
            Ok(make_test_2d())
        }
        "test5d" => {
            known(&[])?;
            Ok(make_test_5d())
        }
        "zero" => {
            known(&["dim", "lower", "upper"])?;
            Ok(SgeProblem::zero(bounds(dim_param()?, -1.0, 1.0)?))
        }
        "constant" => {
            known(&["c", "dim", "lower", "upper"])?;
            let c = scalar("c", None)?;
            Ok(SgeProblem::constant(bounds(dim_param()?, -1.0, 1.0)?, c))
        }
        "soliton" => {
            known(&["c", "b", "a", "lower", "upper"])?;
            let a = get("a")
                .ok_or_else(|| Error::invalid("missing parameter 'a'"))?
                .to_vec();
            let params = SolitonParams::new(scalar("c", Some(1.0))?, a, scalar("b", None)?)?;
            let domain = bounds(params.dim(), -7.0, 7.0)?;
            SgeProblem::soliton(text.trim(), params, domain)
        }
        other => Err(Error::invalid(format!("unknown problem '{other}'"))),
    }
}

fn parse_params(s: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got '{part}'")))?;
        let k = k.trim().to_ascii_lowercase();
        if out.iter().any(|(e, _)| *e == k) {
            return Err(Error::invalid(format!("parameter '{k}' given twice")));
        }
        let vals = v
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("parameter '{k}': cannot parse '{}'", x.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push((k, vals));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Side;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn exact_values() {
        let p = SolitonParams::new(1.0, vec![1.0, 1.0], 1.0).unwrap();
        assert!((p.exact(&[0.5, 0.5], 1.0) - PI).abs() < 1e-15);
        assert!(p.exact(&[-400.0, -400.0], 0.0).abs() < 1e-12);
        assert!((p.exact(&[400.0, 400.0], 0.0) - 2.0 * PI).abs() < 1e-12);
        assert_eq!(p.time_derivative(&[0.0, 0.0], 0.0), -2.0);
        assert_eq!(p.normal_derivative(&[0.0, 0.0], 0.0, Face::new(0, Side::Upper)), 2.0);
        assert_eq!(p.normal_derivative(&[0.0, 0.0], 0.0, Face::new(0, Side::Lower)), -2.0);
        let still = SolitonParams::new(2.0, vec![1.0], 0.0).unwrap();
        assert_eq!(still.time_derivative(&[0.3], 1.0), 0.0);
        let flat = SolitonParams::new(1.0, vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(flat.partial(&[0.4, 0.1], 0.0, 0), 0.0);
    }

    #[test]
    fn constraint_is_enforced() {
        assert!(SolitonParams::new(1.0, vec![1.0, 1.0], 0.5).is_err());
        assert!(SolitonParams::new(1.0, vec![1.0, 1.0 + 1e-9], 1.0).is_err());
        assert!(SolitonParams::new(1.0, vec![], 0.0).is_err());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(SolitonParams::new(1.0, vec![h, h, h, 0.5, 0.5], 1.0).is_ok());
    }

    #[test]
    fn test_problems() {
        let p2 = make_test_2d();
        let e = p2.exact.as_ref().unwrap();
        assert!((e(&[0.0, 0.0], 0.0) - PI).abs() < 1e-15);
        assert!(((p2.v1)(&[0.0, 0.0]) - PI).abs() < 1e-15);
        assert_eq!((p2.v2)(&[0.0, 0.0]), -2.0);
        let p5 = make_test_5d();
        assert!((p5.exact.as_ref().unwrap()(&[0.0; 5], 0.0) - PI).abs() < 1e-15);
        let x = [0.1, -0.2, 0.3, 0.4, -0.5];
        let f4 = Face::new(3, Side::Upper);
        let slope = 2.0 / (0.5f64.sqrt() * 0.2 + 0.5 * -0.1).cosh();
        assert!(((p5.w)(&x, f4, 0.0) - 0.5 * slope).abs() < 1e-14);
    }

    #[test]
    fn negative_amplitude_is_mirrored() {
        let p = SolitonParams::new(-1.0, vec![1.0], 0.0).unwrap();
        let q = SolitonParams::new(1.0, vec![1.0], 0.0).unwrap();
        assert_eq!(p.exact(&[0.3], 0.0), -q.exact(&[0.3], 0.0));
        let z = SolitonParams::new(0.0, vec![1.0], 0.0).unwrap();
        assert_eq!(z.exact(&[2.0], 1.0), 0.0);
    }

    /// Derivatives of the closed-form profile by central differences.
    fn fd_checks(p: &SolitonParams, rng: &mut ChaCha8Rng) {
        let n = p.dim();
        let h = 1e-5;
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let t = rng.gen_range(0.0..2.0);
            let dt = (p.exact(&x, t + h) - p.exact(&x, t - h)) / (2.0 * h);
            let an = p.time_derivative(&x, t);
            assert!((dt - an).abs() <= 1e-6 * an.abs().max(1e-3), "{dt} vs {an}");
            for j in 0..n {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let dx = (p.exact(&xp, t) - p.exact(&xm, t)) / (2.0 * h);
                let an = p.partial(&x, t, j);
                assert!((dx - an).abs() <= 1e-6 * an.abs().max(1e-3), "{dx} vs {an}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        fd_checks(&SolitonParams::new(1.0, vec![1.0, 1.0], 1.0).unwrap(), &mut rng);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        fd_checks(
            &SolitonParams::new(1.0, vec![h, h, h, 0.5, 0.5], 1.0).unwrap(),
            &mut rng,
        );
        fd_checks(&SolitonParams::new(-0.3, vec![0.6, 1.0], 0.6).unwrap(), &mut rng);
    }

    #[test]
    fn data_matches_exact_solution() {
        let p = make_test_2d();
        let e = p.exact.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-6;
        for _ in 0..200 {
            let x = [rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0)];
            assert!(((p.v1)(&x) - e(&x, 0.0)).abs() < 1e-10);
            let dt = (e(&x, h) - e(&x, -h)) / (2.0 * h);
            assert!(((p.v2)(&x) - dt).abs() < 1e-8);
            for face in p.domain.faces() {
                let (mut xp, mut xm) = (x, x);
                xp[face.axis] += h;
                xm[face.axis] -= h;
                let d = face.outward_sign() * (e(&xp, 0.3) - e(&xm, 0.3)) / (2.0 * h);
                assert!(((p.w)(&x, face, 0.3) - d).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn names_resolve() {
        assert_eq!(problem_by_name("test2d").unwrap().dim(), 2);
        assert_eq!(problem_by_name("test5d").unwrap().dim(), 5);
        let s = problem_by_name("soliton:c=2;b=0;a=1;lower=-3;upper=4").unwrap();
        assert_eq!(s.domain.lower(), &[-3.0]);
        assert_eq!(s.domain.upper(), &[4.0]);
        let z = problem_by_name("zero:dim=3").unwrap();
        assert_eq!(z.dim(), 3);
        let c = problem_by_name("constant:c=0.5;lower=0,0;upper=1,2").unwrap();
        assert_eq!((c.v1)(&[0.1, 0.1]), 0.5);
        assert!(problem_by_name("soliton:b=0;a=1,1").is_err());
        assert!(problem_by_name("bogus").is_err());
        assert!(problem_by_name("test2d:c=1").is_err());
        assert!(problem_by_name("constant:c=x").is_err());
    }
}
