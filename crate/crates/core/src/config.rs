//! JSON run configurations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::colloc::OrderChoice;
use crate::domain::NodeStrategy;
use crate::error::{Error, Result};
use crate::problems::{problem_by_name, SgeProblem};
use crate::stepper::{BoundaryTimeRule, DiscretizationConfig, OffsetChoice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeRule {
    Average,
    Current,
}

/// Configuration of a `solve` or `dump-nodes` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Problem name understood by [`problem_by_name`].
    pub problem: String,
    pub splits: Vec<usize>,
    /// Interior plus boundary nodes.
    pub nodes: usize,
    #[serde(default = "default_strategy")]
    pub node_strategy: NodeStrategy,
    #[serde(default)]
    pub seed: u64,
    /// Boundary node count for the Sobol strategy; `null` uses the default share.
    #[serde(default)]
    pub boundary_nodes: Option<usize>,
    pub tau: f64,
    /// Defaults to the last report time.
    #[serde(default)]
    pub end_time: Option<f64>,
    /// Defaults to `[end_time]`.
    #[serde(default)]
    pub report_times: Option<Vec<f64>>,
    /// `K`; `null` picks the smallest `K` per subdomain.
    #[serde(default)]
    pub order_cap: Option<f64>,
    #[serde(default)]
    pub superposition_cap: Option<usize>,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// One offset for every face; `null` uses per-face boundary spacing.
    #[serde(default)]
    pub fictitious_offset: Option<f64>,
    #[serde(default)]
    pub ridge: bool,
    #[serde(default = "one")]
    pub refactor_every: usize,
    #[serde(default = "default_rule")]
    pub boundary_time_rule: TimeRule,
    #[serde(default)]
    pub timing: bool,
    /// Report CSV path, relative to the output directory.
    #[serde(default = "default_report")]
    pub report: String,
    /// Checkpoint directory, relative to the output directory.
    #[serde(default)]
    pub checkpoint_dir: Option<String>,
}

fn default_strategy() -> NodeStrategy {
    NodeStrategy::Sobol
}

fn one() -> usize {
    1
}

fn default_rule() -> TimeRule {
    TimeRule::Average
}

fn default_report() -> String {
    "report.csv".into()
}

/// Line of the first occurrence of `"key"` in the source, 1-based.
fn line_of(source: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    source.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

fn field_error(source: &str, key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        message: format!("field '{key}': {}", msg.into()),
        line: line_of(source, key),
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Config {
        message: e.to_string(),
        line: (e.line() > 0).then_some(e.line()),
    }
}

impl RunConfig {
    pub fn from_json(source: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(source).map_err(parse_error)?;
        cfg.validate(source)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked before building nodes.
    /// `source` is used for line numbers and may be empty.
    pub fn validate(&self, source: &str) -> Result<()> {
        let err = |k: &str, m: String| field_error(source, k, m);
        let problem = problem_by_name(&self.problem).map_err(|e| err("problem", e.to_string()))?;
        let dim = problem.dim();
        if self.splits.len() != dim {
            return Err(err(
                "splits",
                format!("{} entries for a {dim}-dimensional problem", self.splits.len()),
            ));
        }
        if self.splits.contains(&0) {
            return Err(err("splits", "every entry must be at least 1".into()));
        }
        let subdomains: usize = self.splits.iter().product();
        if self.nodes < subdomains {
            return Err(err(
                "nodes",
                format!("{} nodes cannot populate {subdomains} subdomains", self.nodes),
            ));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(err("tau", format!("must be positive, got {}", self.tau)));
        }
        let times = self.resolved_times().map_err(|e| match e {
            Error::InvalidArgument(m) => err(
                if self.report_times.is_some() {
                    "report_times"
                } else {
                    "end_time"
                },
                m,
            ),
            other => other,
        })?;
        crate::stepper::report_steps(&times, self.tau).map_err(|e| err("report_times", e.to_string()))?;
        if let Some(k) = self.order_cap {
            if !(k >= 1.0 && k.is_finite()) {
                return Err(err("order_cap", format!("must be at least 1, got {k}")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(err("lambda", format!("must be positive, got {l}")));
            }
        }
        if let Some(h) = self.fictitious_offset {
            if !(h.is_finite() && h > 0.0) {
                return Err(err("fictitious_offset", format!("must be positive, got {h}")));
            }
        }
        if self.refactor_every == 0 {
            return Err(err("refactor_every", "must be at least 1".into()));
        }
        if let Some(nb) = self.boundary_nodes {
            if nb >= self.nodes {
                return Err(err(
                    "boundary_nodes",
                    format!("{nb} leaves no interior nodes out of {}", self.nodes),
                ));
            }
            if self.node_strategy == NodeStrategy::Grid {
                return Err(err("boundary_nodes", "only applies to the sobol strategy".into()));
            }
        }
        if self.report.trim().is_empty() {
            return Err(err("report", "path is empty".into()));
        }
        Ok(())
    }

    pub fn resolved_times(&self) -> Result<Vec<f64>> {
        match (&self.report_times, self.end_time) {
            (Some(ts), end) => {
                if ts.is_empty() {
                    return Err(Error::invalid("report_times is empty"));
                }
                if let Some(e) = end {
                    if ts.iter().any(|t| *t > e) {
                        return Err(Error::invalid(format!("report time beyond end_time {e}")));
                    }
                }
                Ok(ts.clone())
            }
            (None, Some(e)) => Ok(vec![e]),
            (None, None) => Err(Error::invalid("give end_time or report_times")),
        }
    }

    pub fn problem(&self) -> Result<SgeProblem> {
        problem_by_name(&self.problem)
    }

    pub fn discretization(&self, out_dir: &Path) -> DiscretizationConfig {
        let mut d = DiscretizationConfig::new(self.splits.clone(), self.nodes, self.tau);
        d.strategy = self.node_strategy;
        d.seed = self.seed;
        d.boundary_nodes = self.boundary_nodes;
        d.lambda = self.lambda;
        d.order = self.order_cap.map_or(OrderChoice::Auto, OrderChoice::Fixed);
        d.superposition_cap = self.superposition_cap;
        d.offset = self.fictitious_offset.map_or(OffsetChoice::Auto, OffsetChoice::Fixed);
        d.ridge = self.ridge;
        d.refactor_every = self.refactor_every;
        d.boundary_rule = match self.boundary_time_rule {
            TimeRule::Average => BoundaryTimeRule::Average,
            TimeRule::Current => BoundaryTimeRule::Current,
        };
        d.timing = self.timing;
        d.checkpoint_dir = self.checkpoint_dir.as_ref().map(|c| out_dir.join(c));
        d
    }

    /// The same run with every default spelled out.
    pub fn resolved(&self, lambda: f64) -> Result<RunConfig> {
        let mut r = self.clone();
        let times = self.resolved_times()?;
        r.end_time = Some(self.end_time.unwrap_or(*times.last().expect("nonempty")));
        r.report_times = Some(times);
        r.lambda = Some(lambda);
        Ok(r)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Configuration of an `approx-check` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxConfig {
    /// `trig`, `periodic` or `kink`.
    pub function: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lambda: f64,
    /// Ladder of `K` values.
    pub orders: Vec<f64>,
    #[serde(default)]
    pub superposition_cap: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
    #[serde(default = "default_approx_report")]
    pub report: String,
}

fn default_eval_points() -> usize {
    200
}

fn default_approx_report() -> String {
    "approx.csv".into()
}

impl ApproxConfig {
    pub fn from_json(source: &str) -> Result<Self> {
        let cfg: ApproxConfig = serde_json::from_str(source).map_err(parse_error)?;
        let err = |k: &str, m: String| field_error(source, k, m);
        if cfg.lower.is_empty() || cfg.lower.len() != cfg.upper.len() {
            return Err(err(
                "lower",
                "lower and upper must be nonempty and of equal length".into(),
            ));
        }
        if !(cfg.lambda.is_finite() && cfg.lambda > 0.0) {
            return Err(err("lambda", format!("must be positive, got {}", cfg.lambda)));
        }
        if cfg.orders.is_empty() {
            return Err(err("orders", "ladder is empty".into()));
        }
        if let Some(k) = cfg.orders.iter().find(|k| !(**k >= 1.0 && k.is_finite())) {
            return Err(err("orders", format!("every K must be at least 1, got {k}")));
        }
        if cfg.eval_points == 0 {
            return Err(err("eval_points", "must be at least 1".into()));
        }
        if !["trig", "periodic", "kink"].contains(&cfg.function.as_str()) {
            return Err(err("function", format!("unknown test function '{}'", cfg.function)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `base.join(rel)` unless `rel` is absolute.
pub fn resolve_path(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "problem": "test2d",
  "splits": [7, 7],
  "nodes": 3249,
  "tau": 0.01,
  "end_time": 1.0
}"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.node_strategy, NodeStrategy::Sobol);
        assert_eq!(c.refactor_every, 1);
        assert_eq!(c.resolved_times().unwrap(), vec![1.0]);
        let r = c.resolved(0.2).unwrap();
        assert_eq!(r.report_times, Some(vec![1.0]));
        let again = RunConfig::from_json(&r.to_json_pretty()).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn errors_name_field_and_line() {
        let bad = MINIMAL.replace("\"tau\": 0.01", "\"tau\": -1");
        match RunConfig::from_json(&bad) {
            Err(Error::Config { message, line }) => {
                assert!(message.contains("tau"), "{message}");
                assert_eq!(line, Some(5));
            }
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("[7, 7]", "[7, 7, 7]");
        assert!(matches!(
            RunConfig::from_json(&bad),
            Err(Error::Config { line: Some(3), .. })
        ));
        let bad = MINIMAL.replace("\"nodes\"", "\"nodez\"");
        match RunConfig::from_json(&bad) {
            Err(Error::Config { message, line }) => {
                assert!(message.contains("nodez"), "{message}");
                assert!(line.is_some());
            }
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::from_json("{ not json").is_err());
        let bad = MINIMAL.replace("\"end_time\": 1.0", "\"end_time\": 1.005");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn approx_config_validation() {
        let ok = r#"{"function": "trig", "lower": [0, 0], "upper": [2, 2], "lambda": 0.2, "orders": [2, 4]}"#;
        assert!(ApproxConfig::from_json(ok).is_ok());
        assert!(ApproxConfig::from_json(&ok.replace("[2, 4]", "[0.5, 4]")).is_err());
        assert!(ApproxConfig::from_json(&ok.replace("trig", "bogus")).is_err());
    }
}
