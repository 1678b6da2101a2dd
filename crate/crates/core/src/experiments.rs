//! Drivers behind the command-line subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::basis::RealFourierBasis;
use crate::colloc::{build_local, LocalOptions, OrderChoice};
use crate::config::{resolve_path, ApproxConfig, RunConfig};
use crate::domain::{generate_nodes_with, partition_box, BoxDomain, NodeStrategy};
use crate::error::{Error, Result};
use crate::hypercross::build_hc_set;
use crate::linalg::dot;
use crate::metrics::sig9;
use crate::stepper::{discretize, place_nodes, solve_on, SolveOutput};

/// Name of the resolved-config sidecar written next to every report.
pub const SIDECAR: &str = "resolved_config.json";

#[derive(Debug)]
pub struct SolveRun {
    pub output: SolveOutput,
    pub report_path: PathBuf,
    pub sidecar_path: PathBuf,
}

/// Runs a configured solve and writes the report CSV and the sidecar into
/// `out_dir`.
pub fn run_solve(cfg: &RunConfig, out_dir: &Path, verbose: bool) -> Result<SolveRun> {
    let problem = cfg.problem()?;
    let disc = cfg.discretization(out_dir);
    let times = cfg.resolved_times()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let d = discretize(&problem, &disc)?;
    let sidecar_path = out_dir.join(SIDECAR);
    let resolved = cfg.resolved(d.lambda)?;
    fs::write(&sidecar_path, resolved.to_json_pretty() + "\n").map_err(|e| Error::io(&sidecar_path, e))?;
    if verbose {
        let ops = &d.ops;
        eprintln!(
            "{}: {} subdomains, {} field + {} fictitious nodes, lambda {}, max kappa {:.3e}",
            problem.name,
            d.partition.len(),
            ops.field_ids().len(),
            ops.dofs() - ops.field_ids().len(),
            d.lambda,
            ops.kappa()
        );
    }

    let output = solve_on(&problem, &disc, &d, &times)?;
    let report_path = resolve_path(out_dir, &cfg.report);
    if let Some(parent) = report_path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(&report_path, output.report.to_csv_string()).map_err(|e| Error::io(&report_path, e))?;
    if verbose {
        for r in output.report.rows() {
            eprintln!("t = {}: linf {:.4e}, rms {:.4e}", r.time, r.linf, r.rms);
        }
        for w in &output.report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(SolveRun {
        output,
        report_path,
        sidecar_path,
    })
}

/// Writes the node set of a configured run (fictitious nodes included).
pub fn dump_nodes(cfg: &RunConfig, path: &Path) -> Result<usize> {
    let problem = cfg.problem()?;
    let disc = cfg.discretization(Path::new("."));
    let (_, nodes, _) = place_nodes(&problem, &disc)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    nodes.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(nodes.len())
}

/// Test functions of `approx-check`, in coordinates relative to the box
/// center, with `ω = 2πλ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    /// `¼ + cos(ω y₁) + ½ sin(ω y_n)`, inside the span once `K ≥ max(ω, 1)`.
    Trig,
    /// `exp(Σ sin(ω y_j))`, smooth and `1/λ`-periodic.
    Periodic,
    /// `4 arctan(exp(Σ y_j / √n))`.
    Kink,
}

impl TestFunction {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "trig" => Ok(TestFunction::Trig),
            "periodic" => Ok(TestFunction::Periodic),
            "kink" => Ok(TestFunction::Kink),
            other => Err(Error::invalid(format!("unknown test function '{other}'"))),
        }
    }

    /// Value and Laplacian at `y`.
    pub fn eval(&self, y: &[f64], omega: f64) -> (f64, f64) {
        let n = y.len();
        match self {
            TestFunction::Trig => {
                let (a, b) = (omega * y[0], omega * y[n - 1]);
                let v = 0.25 + a.cos() + 0.5 * b.sin();
                let lap = if n == 1 {
                    -omega * omega * (a.cos() + 0.5 * b.sin())
                } else {
                    -omega * omega * a.cos() - 0.5 * omega * omega * b.sin()
                };
                (v, lap)
            }
            TestFunction::Periodic => {
                let s: f64 = y.iter().map(|v| (omega * v).sin()).sum();
                let g = s.exp();
                let lap: f64 = y
                    .iter()
                    .map(|v| {
                        let (sn, cs) = (omega * v).sin_cos();
                        omega * omega * (cs * cs - sn)
                    })
                    .sum();
                (g, g * lap)
            }
            TestFunction::Kink => {
                let a = 1.0 / (n as f64).sqrt();
                let s: f64 = y.iter().map(|v| a * v).sum();
                let c = s.cosh();
                (4.0 * s.exp().atan(), -2.0 * s.sinh() / (c * c))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxRow {
    pub order_cap: f64,
    pub basis_size: usize,
    pub interp_max: f64,
    pub laplacian_max: f64,
    pub kappa: f64,
}

pub const APPROX_HEADER: &str = "K,basis_size,interp_max,laplacian_max,kappa";

/// Interpolates the test function on one box for every `K` in the ladder,
/// using as many Sobol nodes as the set has indices.
pub fn approx_check(cfg: &ApproxConfig) -> Result<Vec<ApproxRow>> {
    let f = TestFunction::parse(&cfg.function)?;
    let domain = BoxDomain::new(cfg.lower.clone(), cfg.upper.clone())?;
    let dim = domain.dim();
    let partition = partition_box(&domain, &vec![1; dim])?;
    let center = domain.center();
    let omega = 2.0 * std::f64::consts::PI * cfg.lambda;
    let eval = generate_nodes_with(&domain, cfg.eval_points, NodeStrategy::Sobol, cfg.seed + 7919, Some(0))?;
    let rel = |x: &[f64]| -> Vec<f64> { x.iter().zip(&center).map(|(a, c)| a - c).collect() };

    let mut rows = Vec::with_capacity(cfg.orders.len());
    for &k in &cfg.orders {
        let set = build_hc_set(dim, cfg.lambda, k, cfg.superposition_cap)?;
        let m = set.len();
        let mut nodes = generate_nodes_with(&domain, m, NodeStrategy::Sobol, cfg.seed, Some(0))?;
        nodes.assign_owners(&partition)?;
        let opts = LocalOptions {
            lambda: cfg.lambda,
            order: OrderChoice::Fixed(k),
            superposition_cap: cfg.superposition_cap,
            ridge: false,
        };
        let local = match build_local(&partition, &nodes, 0, &opts) {
            Ok(l) => l,
            Err(Error::IllConditioned { .. }) => {
                rows.push(ApproxRow {
                    order_cap: k,
                    basis_size: m,
                    interp_max: f64::NAN,
                    laplacian_max: f64::NAN,
                    kappa: f64::INFINITY,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let values: Vec<f64> = local
            .node_ids()
            .iter()
            .map(|&i| f.eval(&rel(nodes.point(i)), omega).0)
            .collect();
        let (mut ie, mut le) = (0.0f64, 0.0f64);
        for i in 0..eval.len() {
            let x = eval.point(i);
            let (v, lap) = f.eval(&rel(x), omega);
            ie = ie.max((dot(&local.shape_values(x)?, &values) - v).abs());
            le = le.max((dot(&local.shape_laplacian(x)?, &values) - lap).abs());
        }
        rows.push(ApproxRow {
            order_cap: k,
            basis_size: m,
            interp_max: ie,
            laplacian_max: le,
            kappa: local.condition_number(),
        });
    }
    Ok(rows)
}

pub fn approx_csv(rows: &[ApproxRow]) -> String {
    let mut s = String::from(APPROX_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            sig9(r.order_cap),
            r.basis_size,
            sig9(r.interp_max),
            sig9(r.laplacian_max),
            sig9(r.kappa)
        ));
    }
    s
}

/// Size of the set and, when `list` is set, one index per line with its
/// weight and order.
pub fn enumerate(dim: usize, lambda: f64, k: f64, cap: Option<usize>, list: bool) -> Result<(usize, String)> {
    let set = build_hc_set(dim, lambda, k, cap)?;
    let mut text = String::new();
    if list {
        for (m, w) in set.iter() {
            text.push_str(&format!("{m} {w} {}\n", m.order()));
        }
    }
    Ok((set.len(), text))
}

/// Real basis size for the same parameters (equals the set size).
pub fn basis_size(dim: usize, lambda: f64, k: f64, cap: Option<usize>) -> Result<usize> {
    Ok(RealFourierBasis::from_index_set(&build_hc_set(dim, lambda, k, cap)?).len())
}
