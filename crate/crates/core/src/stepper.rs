//! Quasilinearized three-level Crank–Nicolson stepping.
//!
//! With `μ = τ⁻²`, `η = β/(2τ)` and `φ = ψ cos û^k` every field node carries
//!
//! ```text
//! ⅓Δu⁺ - (η+μ+φ)u⁺ = -⅓Δu^k - (2μ+φ)u^k + ψ sin û^k - ⅓Δu⁻ + (μ-η)u⁻
//! ```
//!
//! and every fictitious node carries the Neumann row of its paired boundary
//! node, `∂_l u⁺ + ∂_l u^k + ∂_l u⁻ = w⁺ + w^k + w⁻`. Each row only touches
//! the columns of its own subdomain, so the global system splits into one
//! dense block per subdomain.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::colloc::{build_all, default_lambda, max_condition_number, LocalOptions, LocalSystem, OrderChoice};
use crate::domain::{
    add_fictitious_with, default_face_offsets, generate_nodes_with, partition_box, Face, NodeKind, NodeSet,
    NodeStrategy, Partition,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, Lu, Matrix};
use crate::metrics::{linf_error, rms_error, ErrorReport, ReportRow};
use crate::problems::SgeProblem;

/// Relative residual above which a step is flagged in the report.
pub const RESIDUAL_WARNING: f64 = 1e-6;

/// Sine linearized about `u_k`: `sin u_k + (u_next - u_k) cos u_k`.
pub fn qlm_sin(u_k: f64, u_next: f64) -> f64 {
    u_k.sin() + (u_next - u_k) * u_k.cos()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Pde,
    /// Neumann condition of the paired boundary node, on a fictitious row.
    Boundary,
}

/// One subdomain's rows and columns of the global operators.
#[derive(Clone, Debug)]
pub struct Block {
    pub subdomain: usize,
    /// Global dof ids, shared by rows and columns.
    pub ids: Vec<usize>,
    pub kinds: Vec<RowKind>,
    /// `⅓Δφ(x_i)` on pde rows, zero on boundary rows.
    pub a: Matrix,
    /// `φ(x_i)` on pde rows, zero on boundary rows.
    pub b: Matrix,
    /// `∂φ/∂l` at the paired boundary node on boundary rows, zero elsewhere.
    pub normal: Matrix,
    /// For boundary rows, the paired boundary node and the face.
    pub pairs: Vec<Option<(usize, Face)>>,
}

#[derive(Clone, Debug)]
pub struct GlobalOperators {
    nodes: NodeSet,
    blocks: Vec<Block>,
    kappa: f64,
}

/// Builds `A`, `B` and the Neumann rows once; they do not depend on time.
pub fn assemble_static(nodes: &NodeSet, locals: &[LocalSystem]) -> Result<GlobalOperators> {
    let mut seen = vec![false; nodes.len()];
    for l in locals {
        for &i in l.node_ids() {
            if seen[i] {
                return Err(Error::Internal(format!("node {i} owned twice")));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Internal(format!("node {i} has no owning subdomain")));
    }
    let blocks = locals
        .par_iter()
        .map(|l| assemble_block(nodes, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(GlobalOperators {
        nodes: nodes.clone(),
        blocks,
        kappa: max_condition_number(locals),
    })
}

fn assemble_block(nodes: &NodeSet, local: &LocalSystem) -> Result<Block> {
    let ids = local.node_ids().to_vec();
    let m = ids.len();
    let mut a = Matrix::zeros(m, m);
    let mut b = Matrix::zeros(m, m);
    let mut normal = Matrix::zeros(m, m);
    let mut kinds = Vec::with_capacity(m);
    let mut pairs = Vec::with_capacity(m);
    for (r, &i) in ids.iter().enumerate() {
        match nodes.kind(i) {
            NodeKind::Fictitious => {
                let p = nodes
                    .paired(i)
                    .ok_or_else(|| Error::Internal(format!("fictitious node {i} is unpaired")))?;
                let face = nodes.faces(i)[0];
                normal
                    .row_mut(r)
                    .copy_from_slice(&local.shape_normal(nodes.point(p), face)?);
                kinds.push(RowKind::Boundary);
                pairs.push(Some((p, face)));
            }
            _ => {
                let x = nodes.point(i);
                let lap = local.shape_laplacian(x)?;
                for (dst, v) in a.row_mut(r).iter_mut().zip(&lap) {
                    *dst = v / 3.0;
                }
                b.row_mut(r).copy_from_slice(&local.shape_values(x)?);
                kinds.push(RowKind::Pde);
                pairs.push(None);
            }
        }
    }
    Ok(Block {
        subdomain: local.subdomain(),
        ids,
        kinds,
        a,
        b,
        normal,
        pairs,
    })
}

impl GlobalOperators {
    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Total unknowns, field plus fictitious.
    pub fn dofs(&self) -> usize {
        self.nodes.len()
    }

    /// Largest local condition number.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Stored entries of the block-diagonal system matrix.
    pub fn stored_entries(&self) -> usize {
        self.blocks.iter().map(|b| b.ids.len() * b.ids.len()).sum()
    }

    fn apply(&self, u: &[f64], pick: impl Fn(&Block) -> &Matrix + Sync) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs()];
        for blk in &self.blocks {
            let local: Vec<f64> = blk.ids.iter().map(|&i| u[i]).collect();
            let y = pick(blk).matvec(&local);
            for (&i, v) in blk.ids.iter().zip(y) {
                out[i] = v;
            }
        }
        out
    }

    pub fn apply_a(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u, |b| &b.a)
    }

    pub fn apply_b(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u, |b| &b.b)
    }

    pub fn apply_normal(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u, |b| &b.normal)
    }

    /// Field-node ids (interior and boundary).
    pub fn field_ids(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes.kind(i).is_field())
            .collect()
    }

    /// Evaluates `f` at every dof.
    pub fn sample(&self, f: &(dyn Fn(&[f64]) -> f64 + Send + Sync)) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| f(self.nodes.point(i))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTimeRule {
    /// `w(t_{k+1}) + w(t_k) + w(t_{k-1})`.
    Average,
    /// `3 w(t_k)`.
    Current,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOptions {
    pub boundary_rule: BoundaryTimeRule,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            boundary_rule: BoundaryTimeRule::Average,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepState {
    pub k: usize,
    pub tau: f64,
    pub u_curr: Vec<f64>,
    pub u_prev: Vec<f64>,
}

impl StepState {
    pub fn mu(&self) -> f64 {
        1.0 / (self.tau * self.tau)
    }

    pub fn eta(&self, beta: f64) -> f64 {
        beta / (2.0 * self.tau)
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.tau
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub u_next: Vec<f64>,
    /// Largest relative residual over the blocks.
    pub residual: f64,
}

/// Which term the `u^{k-1}` slot holds.
enum Previous<'a> {
    /// A regular step: `H u^{k-1}` on the right.
    Level(&'a [f64]),
    /// Start-up: `u^{-1} = u^1 - 2τ v₂` folded into the left side.
    Velocity(&'a [f64]),
}

/// Advances one step; `frozen_phi` replaces `ψ cos û^k` in `E` and `G` when
/// given (one entry per dof).
pub fn step(state: &StepState, ops: &GlobalOperators, problem: &SgeProblem, opts: &StepOptions) -> Result<StepResult> {
    advance(state, ops, problem, opts, Previous::Level(&state.u_prev), None)
}

/// Like [`step`] with `φ` taken from `frozen_phi` instead of `u^k`.
pub fn step_frozen(
    state: &StepState,
    ops: &GlobalOperators,
    problem: &SgeProblem,
    opts: &StepOptions,
    frozen_phi: &[f64],
) -> Result<StepResult> {
    advance(
        state,
        ops,
        problem,
        opts,
        Previous::Level(&state.u_prev),
        Some(frozen_phi),
    )
}

/// Returns `(u⁰, u¹)` with `u⁰ = v₁` and `u¹` from the `k = 0` system after
/// eliminating `u^{-1} = u¹ - 2τ v₂`.
pub fn startup(
    ops: &GlobalOperators,
    problem: &SgeProblem,
    tau: f64,
    opts: &StepOptions,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    check_tau(tau)?;
    let u0 = ops.sample(&*problem.v1);
    let v2 = ops.sample(&*problem.v2);
    let state = StepState {
        k: 0,
        tau,
        u_curr: u0.clone(),
        u_prev: Vec::new(),
    };
    let r = advance(&state, ops, problem, opts, Previous::Velocity(&v2), None)?;
    Ok((u0, r.u_next, r.residual))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {tau}")));
    }
    Ok(())
}

/// `ψ cos û` at every dof (zero on fictitious rows).
pub fn linearization_weights(ops: &GlobalOperators, problem: &SgeProblem, u: &[f64]) -> Vec<f64> {
    let uhat = ops.apply_b(u);
    (0..ops.dofs())
        .map(|i| {
            if ops.nodes.kind(i).is_field() {
                (problem.psi)(ops.nodes.point(i)) * uhat[i].cos()
            } else {
                0.0
            }
        })
        .collect()
}

fn advance(
    state: &StepState,
    ops: &GlobalOperators,
    problem: &SgeProblem,
    opts: &StepOptions,
    prev: Previous<'_>,
    frozen_phi: Option<&[f64]>,
) -> Result<StepResult> {
    check_tau(state.tau)?;
    let n = ops.dofs();
    let z = match prev {
        Previous::Level(u) => u,
        Previous::Velocity(v) => v,
    };
    if state.u_curr.len() != n || z.len() != n || frozen_phi.is_some_and(|f| f.len() != n) {
        return Err(Error::invalid(format!("state vectors must have {n} entries")));
    }
    // start-up folds H into the left side and scales the velocity term
    let (sigma, zscale) = match prev {
        Previous::Level(_) => (0.0, 1.0),
        Previous::Velocity(_) => (1.0, -2.0 * state.tau),
    };
    let mu = state.mu();
    let eta = state.eta(problem.beta);
    let t = state.time();
    let tau = state.tau;
    let nodes = &ops.nodes;

    let w_sum = |p: usize, face: Face| -> f64 {
        let x = nodes.point(p);
        match opts.boundary_rule {
            BoundaryTimeRule::Average => {
                (problem.w)(x, face, t + tau) + (problem.w)(x, face, t) + (problem.w)(x, face, t - tau)
            }
            BoundaryTimeRule::Current => 3.0 * (problem.w)(x, face, t),
        }
    };

    let solved: Vec<(Vec<f64>, f64)> = ops
        .blocks
        .par_iter()
        .map(|blk| -> Result<(Vec<f64>, f64)> {
            let m = blk.ids.len();
            let uk: Vec<f64> = blk.ids.iter().map(|&i| state.u_curr[i]).collect();
            let zk: Vec<f64> = blk.ids.iter().map(|&i| zscale * z[i]).collect();
            let mut sys = Matrix::zeros(m, m);
            let mut rhs = vec![0.0; m];
            for (r, slot) in rhs.iter_mut().enumerate() {
                match blk.kinds[r] {
                    RowKind::Pde => {
                        let i = blk.ids[r];
                        let (ar, br) = (blk.a.row(r), blk.b.row(r));
                        let uhat = dot(br, &uk);
                        let psi = (problem.psi)(nodes.point(i));
                        let phi = frozen_phi.map_or(psi * uhat.cos(), |f| f[i]);
                        let diag_b = (eta + mu + phi) - sigma * (eta - mu);
                        for (s, (a, b)) in sys.row_mut(r).iter_mut().zip(ar.iter().zip(br)) {
                            *s = (1.0 + sigma) * a - diag_b * b;
                        }
                        let g = -dot(ar, &uk) - (2.0 * mu + phi) * uhat;
                        let h = -dot(ar, &zk) - (eta - mu) * dot(br, &zk);
                        *slot = g + h + psi * uhat.sin();
                    }
                    RowKind::Boundary => {
                        let nr = blk.normal.row(r);
                        for (s, v) in sys.row_mut(r).iter_mut().zip(nr) {
                            *s = (1.0 + sigma) * v;
                        }
                        let (p, face) = blk.pairs[r].expect("boundary rows are paired");
                        *slot = -dot(nr, &uk) - dot(nr, &zk) + w_sum(p, face);
                    }
                }
            }
            let lu = Lu::factor(&sys).map_err(|_| Error::StepFailure {
                k: state.k,
                worst_pivot: 0.0,
            })?;
            if !lu.min_pivot().is_finite() || lu.pivot_ratio() < f64::EPSILON * 1e-3 {
                return Err(Error::StepFailure {
                    k: state.k,
                    worst_pivot: lu.min_pivot(),
                });
            }
            let mut x = rhs.clone();
            lu.solve(&mut x);
            let res = sys
                .matvec(&x)
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let rel = if scale > 0.0 { res / scale } else { res };
            Ok((x, rel))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut u_next = vec![0.0; n];
    let mut residual = 0.0f64;
    for (blk, (x, rel)) in ops.blocks.iter().zip(solved) {
        for (&i, v) in blk.ids.iter().zip(x) {
            u_next[i] = v;
        }
        residual = residual.max(rel);
    }
    Ok(StepResult { u_next, residual })
}

/// Fictitious-node offset: one value for every face, or the per-face mean
/// boundary spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OffsetChoice {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizationConfig {
    pub splits: Vec<usize>,
    pub nodes: usize,
    pub strategy: NodeStrategy,
    pub seed: u64,
    pub boundary_nodes: Option<usize>,
    pub tau: f64,
    pub lambda: Option<f64>,
    pub order: OrderChoice,
    pub superposition_cap: Option<usize>,
    pub offset: OffsetChoice,
    pub ridge: bool,
    /// Recompute `φ` in the system matrix every this many steps.
    pub refactor_every: usize,
    pub boundary_rule: BoundaryTimeRule,
    /// Record wall-clock seconds in the report (otherwise 0).
    pub timing: bool,
    /// Write `id value` checkpoints at report times.
    pub checkpoint_dir: Option<PathBuf>,
}

impl DiscretizationConfig {
    pub fn new(splits: Vec<usize>, nodes: usize, tau: f64) -> Self {
        DiscretizationConfig {
            splits,
            nodes,
            strategy: NodeStrategy::Sobol,
            seed: 0,
            boundary_nodes: None,
            tau,
            lambda: None,
            order: OrderChoice::Auto,
            superposition_cap: None,
            offset: OffsetChoice::Auto,
            ridge: false,
            refactor_every: 1,
            boundary_rule: BoundaryTimeRule::Average,
            timing: false,
            checkpoint_dir: None,
        }
    }
}

/// Everything built before the first step.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub partition: Partition,
    pub locals: Vec<LocalSystem>,
    pub ops: GlobalOperators,
    pub lambda: f64,
    pub offsets: Vec<(Face, f64)>,
}

/// Fictitious-node offset of each face.
pub type FaceOffsets = Vec<(Face, f64)>;

/// Partition, node set (fictitious nodes included and owners assigned) and
/// per-face offsets, without building any collocation system.
pub fn place_nodes(problem: &SgeProblem, disc: &DiscretizationConfig) -> Result<(Partition, NodeSet, FaceOffsets)> {
    problem.validate()?;
    let domain = &problem.domain;
    let partition = partition_box(domain, &disc.splits)?;
    let field = generate_nodes_with(domain, disc.nodes, disc.strategy, disc.seed, disc.boundary_nodes)?;
    let offsets: Vec<(Face, f64)> = match disc.offset {
        OffsetChoice::Fixed(h) => domain.faces().map(|f| (f, h)).collect(),
        OffsetChoice::Auto => default_face_offsets(&field, domain),
    };
    let nodes = if field.count(NodeKind::Boundary) > 0 {
        add_fictitious_with(&field, &partition, |face| {
            offsets.iter().find(|(f, _)| *f == face).map_or(0.0, |(_, h)| *h)
        })?
    } else {
        let mut n = field;
        n.assign_owners(&partition)?;
        n
    };
    Ok((partition, nodes, offsets))
}

pub fn discretize(problem: &SgeProblem, disc: &DiscretizationConfig) -> Result<Discretization> {
    let (partition, nodes, offsets) = place_nodes(problem, disc)?;
    let max_offset = offsets.iter().map(|(_, h)| *h).fold(0.0, f64::max);
    let lambda = disc.lambda.unwrap_or_else(|| default_lambda(&partition, max_offset));
    let opts = LocalOptions {
        lambda,
        order: disc.order,
        superposition_cap: disc.superposition_cap,
        ridge: disc.ridge,
    };
    let locals = build_all(&partition, &nodes, &opts)?;
    let ops = assemble_static(&nodes, &locals)?;
    Ok(Discretization {
        partition,
        locals,
        ops,
        lambda,
        offsets,
    })
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub report: ErrorReport,
    /// `(time, u)` over all dofs at each report time.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub lambda: f64,
}

/// Step counts for the report times, which must be nonnegative multiples of
/// `τ` and strictly increasing.
pub fn report_steps(report_times: &[f64], tau: f64) -> Result<Vec<usize>> {
    check_tau(tau)?;
    let mut out: Vec<usize> = Vec::with_capacity(report_times.len());
    for &t in report_times {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid(format!("report time {t} must be nonnegative")));
        }
        let k = (t / tau).round();
        if (k * tau - t).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "report time {t} is not a multiple of tau = {tau}"
            )));
        }
        let k = k as usize;
        if out.last().is_some_and(|&last| k <= last) {
            return Err(Error::invalid("report times must be strictly increasing"));
        }
        out.push(k);
    }
    Ok(out)
}

pub fn solve_sge(problem: &SgeProblem, disc: &DiscretizationConfig, report_times: &[f64]) -> Result<SolveOutput> {
    let steps = report_steps(report_times, disc.tau)?;
    if disc.refactor_every == 0 {
        return Err(Error::invalid("refactor_every must be at least 1"));
    }
    let start = Instant::now();
    let d = discretize(problem, disc)?;
    run(problem, disc, &d, report_times, &steps, start)
}

/// Runs the time loop on an existing discretization.
pub fn solve_on(
    problem: &SgeProblem,
    disc: &DiscretizationConfig,
    d: &Discretization,
    report_times: &[f64],
) -> Result<SolveOutput> {
    let steps = report_steps(report_times, disc.tau)?;
    if disc.refactor_every == 0 {
        return Err(Error::invalid("refactor_every must be at least 1"));
    }
    run(problem, disc, d, report_times, &steps, Instant::now())
}

fn run(
    problem: &SgeProblem,
    disc: &DiscretizationConfig,
    d: &Discretization,
    report_times: &[f64],
    steps: &[usize],
    start: Instant,
) -> Result<SolveOutput> {
    let ops = &d.ops;
    let tau = disc.tau;
    let opts = StepOptions {
        boundary_rule: disc.boundary_rule,
    };
    let field = ops.field_ids();
    let mut report = ErrorReport::new();
    let mut snapshots = Vec::new();
    let mut worst_residual = 0.0f64;

    let mut record = |k: usize, t: f64, u: &[f64], residual: f64, report: &mut ErrorReport| -> Result<()> {
        let approx: Vec<f64> = field.iter().map(|&i| u[i]).collect();
        let (linf, rms) = match &problem.exact {
            Some(e) => {
                let exact: Vec<f64> = field.iter().map(|&i| e(ops.nodes.point(i), t)).collect();
                (linf_error(&exact, &approx)?, rms_error(&exact, &approx)?)
            }
            None => (f64::NAN, f64::NAN),
        };
        if residual > RESIDUAL_WARNING {
            report
                .warnings
                .push(format!("step {k}: relative residual {residual:.3e}"));
        }
        report.push(ReportRow {
            time: t,
            linf,
            rms,
            kappa: ops.kappa(),
            residual,
            wall_seconds: if disc.timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })?;
        if let Some(dir) = &disc.checkpoint_dir {
            write_checkpoint(dir, t, u)?;
        }
        snapshots.push((t, u.to_vec()));
        Ok(())
    };

    let last = steps.last().copied().unwrap_or(0);
    let mut next_report = 0;
    let (u0, u1, r1) = if last >= 1 {
        startup(ops, problem, tau, &opts)?
    } else {
        let u0 = ops.sample(&*problem.v1);
        (u0.clone(), u0, 0.0)
    };
    if steps.first() == Some(&0) {
        record(0, report_times[0], &u0, 0.0, &mut report)?;
        next_report = 1;
    }
    worst_residual = worst_residual.max(r1);
    let mut state = StepState {
        k: 1,
        tau,
        u_curr: u1,
        u_prev: u0,
    };
    let mut frozen: Option<Vec<f64>> = None;
    loop {
        if next_report < steps.len() && steps[next_report] == state.k {
            record(
                state.k,
                report_times[next_report],
                &state.u_curr,
                worst_residual,
                &mut report,
            )?;
            worst_residual = 0.0;
            next_report += 1;
        }
        if next_report >= steps.len() || state.k >= last {
            break;
        }
        let result = if disc.refactor_every == 1 {
            step(&state, ops, problem, &opts)?
        } else {
            if (state.k - 1).is_multiple_of(disc.refactor_every) || frozen.is_none() {
                frozen = Some(linearization_weights(ops, problem, &state.u_curr));
            }
            step_frozen(&state, ops, problem, &opts, frozen.as_deref().expect("set above"))?
        };
        worst_residual = worst_residual.max(result.residual);
        state.u_prev = std::mem::replace(&mut state.u_curr, result.u_next);
        state.k += 1;
    }
    Ok(SolveOutput {
        report,
        snapshots,
        lambda: d.lambda,
    })
}

fn write_checkpoint(dir: &std::path::Path, t: f64, u: &[f64]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("u_t{t}.txt"));
    let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
    for (i, v) in u.iter().enumerate() {
        // print -0 as 0
        writeln!(f, "{i} {}", v + 0.0).map_err(|e| Error::io(&path, e))?;
    }
    f.flush().map_err(|e| Error::io(&path, e))
}
