//! Experiment configuration: TOML documents with a closed schema, scalar
//! command-line overrides, and compilation of coefficient/data expressions
//! with bound certification.

use anyhow::{anyhow, bail, Context, Result};
use mobctrl_core::expr::Expr;
use mobctrl_core::grid::{build_grid, SpatialGrid};
use mobctrl_core::law::{DiffusionLaw, FrozenLaw, QuasilinearLaw};
use mobctrl_core::solver::SolverConfig;
use mobctrl_core::state::State;
use mobctrl_core::synthesis::{PicardConfig, SynthesisConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    Sweep,
    Pipeline,
    Picard,
    Certify,
    Witness,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

fn default_dt() -> DtSpec {
    DtSpec::Auto("auto".to_string())
}

/// `"auto"` for the `min(h, 1e-3·T)` policy, or a literal step.
#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum DtSpec {
    Number(f64),
    Auto(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: DtSpec,
}

fn default_state_range() -> (f64, f64) {
    (-10.0, 10.0)
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    /// `"frozen"` (coefficient in x, t) or `"quasilinear"` (in y).
    pub kind: String,
    pub coefficient: String,
    #[serde(default = "default_state_range")]
    pub state_range: (f64, f64),
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub eps: f64,
    pub l: f64,
    pub m_ladder_max_exp: u32,
    pub delta_ratio: f64,
    pub nnls_max_iters: usize,
    pub basis_nx: usize,
    pub basis_nt: usize,
    pub correction_passes: usize,
    pub margin_cells: usize,
    /// Constant damping for `solve` runs, applied as `u = -m`.
    pub m: f64,
    /// Window `(r, l)` for `solve` runs.
    pub window: (f64, f64),
    /// Compare `solve` runs against the sine-expansion oracle (constant
    /// coefficient and whole-domain windows only).
    pub oracle_compare: bool,
}

impl Default for ControlSection {
    fn default() -> Self {
        let s = SynthesisConfig::default();
        ControlSection {
            eps: 0.1,
            l: 0.5,
            m_ladder_max_exp: s.m_ladder_max_exp,
            delta_ratio: s.delta_ratio,
            nnls_max_iters: s.nnls_max_iters,
            basis_nx: s.basis_nx,
            basis_nt: s.basis_nt,
            correction_passes: s.correction_passes,
            margin_cells: s.margin_cells,
            m: 0.0,
            window: (0.0, 1.0),
            oracle_compare: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSection {
    pub gamma: f64,
    pub radius: f64,
    pub max_iters: usize,
    pub fix_tol: f64,
    pub time_samples: usize,
}

impl Default for PicardSection {
    fn default() -> Self {
        let p = PicardConfig::default();
        PicardSection {
            gamma: p.gamma,
            radius: p.radius,
            max_iters: p.max_iters,
            fix_tol: p.fix_tol,
            time_samples: p.time_samples,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessSection {
    /// Static control window `(r, l)`.
    pub omega: (f64, f64),
    /// Probe interval `(a, b)`, disjoint from omega.
    pub probe: (f64, f64),
    /// Controls are nodewise uniform in `[-amplitude, amplitude]`.
    pub amplitude: f64,
    pub count: usize,
    /// Piecewise-constant time pieces per control.
    pub pieces: usize,
    pub seed: u64,
}

impl Default for WitnessSection {
    fn default() -> Self {
        WitnessSection {
            omega: (0.0, 0.3),
            probe: (0.4, 0.9),
            amplitude: 100.0,
            count: 50,
            pieces: 10,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid: GridSection,
    pub time: TimeSection,
    pub law: LawSection,
    #[serde(default)]
    pub initial: DataSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<DataSection>,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub witness: WitnessSection,
}

/// Parse `key=value`; numbers with a decimal point or exponent become
/// floats, plain integers stay integers, `true`/`false` become booleans,
/// everything else is a string.
fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value)> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key.path=value"))?;
    let segments: Vec<String> = path.split('.').map(|s| s.trim().to_string()).collect();
    if segments.iter().any(|s| s.is_empty()) {
        bail!("override `{spec}` has an empty path segment");
    }
    let raw = raw.trim();
    let value = if raw == "true" || raw == "false" {
        toml::Value::Boolean(raw == "true")
    } else if !raw.contains(['.', 'e', 'E']) && raw.parse::<i64>().is_ok() {
        toml::Value::Integer(raw.parse().unwrap())
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else {
        toml::Value::String(raw.to_string())
    };
    Ok((segments, value))
}

fn apply_override(root: &mut toml::Value, segments: &[String], value: toml::Value) -> Result<()> {
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("override path `{seg}` does not point into a table"))?;
        node = table
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let last = &segments[segments.len() - 1];
    let table = node
        .as_table_mut()
        .ok_or_else(|| anyhow!("override path `{last}` does not point into a table"))?;
    table.insert(last.clone(), value);
    Ok(())
}

/// Load, apply overrides, and validate. Returns both the validated config
/// and the effective TOML document (for the artifact copy).
pub fn load_config(path: &Path, overrides: &[String]) -> Result<(ExperimentConfig, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut value: toml::Value = toml::from_str(&text)
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    for spec in overrides {
        let (segments, v) = parse_override(spec)?;
        apply_override(&mut value, &segments, v)?;
    }
    let effective =
        toml::to_string_pretty(&value).context("cannot re-serialize effective config")?;
    let cfg: ExperimentConfig = value
        .try_into()
        .map_err(|e| anyhow!("invalid config: {e}"))?;
    cfg.validate()?;
    Ok((cfg, effective))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.n < 2 {
            bail!("grid.n must be at least 2");
        }
        if !(self.time.t_final > 0.0) {
            bail!("time.t_final must be positive");
        }
        match &self.time.dt {
            DtSpec::Auto(s) if s == "auto" => {}
            DtSpec::Auto(other) => bail!("time.dt must be `auto` or a number, got `{other}`"),
            DtSpec::Number(dt) => {
                if !(*dt > 0.0) {
                    bail!("time.dt must be positive");
                }
            }
        }
        match self.law.kind.as_str() {
            "frozen" | "quasilinear" => {}
            other => bail!("law.kind must be `frozen` or `quasilinear`, got `{other}`"),
        }
        Expr::parse(&self.law.coefficient)
            .map_err(|e| anyhow!("law.coefficient: {e}"))?;
        if let Some(e) = &self.initial.expr {
            Expr::parse(e).map_err(|e| anyhow!("initial.expr: {e}"))?;
        }
        if let Some(t) = &self.target {
            if let Some(e) = &t.expr {
                Expr::parse(e).map_err(|e| anyhow!("target.expr: {e}"))?;
            }
        }
        if !(self.control.l > 0.0 && self.control.l <= 1.0) {
            bail!("control.l must lie in (0, 1]");
        }
        if !(self.control.eps > 0.0) {
            bail!("control.eps must be positive");
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<SpatialGrid> {
        build_grid(self.grid.n).map_err(|e| anyhow!("{e}"))
    }

    pub fn solver_config(&self, grid: &SpatialGrid) -> Result<SolverConfig> {
        match &self.time.dt {
            DtSpec::Auto(_) => Ok(SolverConfig::auto(grid, self.time.t_final)),
            DtSpec::Number(dt) => SolverConfig::with_dt(*dt).map_err(|e| anyhow!("{e}")),
        }
    }

    /// Compile the diffusion law, certifying the sampled bounds; a
    /// coefficient violating the uniform positivity requirement refuses to
    /// start.
    pub fn build_law(&self) -> Result<DiffusionLaw> {
        let expr = Expr::parse(&self.law.coefficient).map_err(|e| anyhow!("{e}"))?;
        match self.law.kind.as_str() {
            "frozen" => {
                if expr.depends_on_y() {
                    bail!("a frozen coefficient may depend on x and t only");
                }
                let law = FrozenLaw::new(
                    move |x, t| expr.eval(x, t, 0.0),
                    (0.0, self.time.t_final),
                    4 * (self.grid.n + 1),
                    256,
                )
                .map_err(|e| anyhow!("law.coefficient `{}`: {e}", self.law.coefficient))?;
                Ok(DiffusionLaw::Frozen(law))
            }
            "quasilinear" => {
                if expr.depends_on_t() {
                    bail!("a quasilinear coefficient may depend on y only");
                }
                let law = QuasilinearLaw::new(
                    move |y| expr.eval(0.0, 0.0, y),
                    self.law.state_range,
                )
                .map_err(|e| anyhow!("law.coefficient `{}`: {e}", self.law.coefficient))?;
                Ok(DiffusionLaw::Quasilinear(law))
            }
            _ => unreachable!("validated"),
        }
    }

    pub fn build_data(&self, section: &DataSection, grid: &SpatialGrid) -> Result<State> {
        if let Some(vals) = &section.values {
            if vals.len() != grid.n {
                bail!("data values length {} does not match grid n = {}", vals.len(), grid.n);
            }
            return State::new(vals.clone(), 0.0).map_err(|e| anyhow!("{e}"));
        }
        let src = section
            .expr
            .as_deref()
            .ok_or_else(|| anyhow!("data section needs `expr` or `values`"))?;
        let expr = Expr::parse(src).map_err(|e| anyhow!("{e}"))?;
        if expr.depends_on_y() {
            bail!("data expressions may depend on x (and t = 0) only");
        }
        let state = State::from_fn(grid, 0.0, |x| expr.eval(x, 0.0, 0.0));
        if state.values.iter().any(|v| !v.is_finite()) {
            bail!("data expression `{src}` produced non-finite values on the grid");
        }
        Ok(state)
    }

    pub fn synthesis_config(&self) -> SynthesisConfig {
        let mut s = SynthesisConfig::default();
        s.m_ladder_max_exp = self.control.m_ladder_max_exp;
        s.delta_ratio = self.control.delta_ratio;
        s.nnls_max_iters = self.control.nnls_max_iters;
        s.basis_nx = self.control.basis_nx;
        s.basis_nt = self.control.basis_nt;
        s.correction_passes = self.control.correction_passes;
        s.margin_cells = self.control.margin_cells;
        s
    }

    pub fn picard_config(&self) -> PicardConfig {
        PicardConfig {
            radius: self.picard.radius,
            gamma: self.picard.gamma,
            max_iters: self.picard.max_iters,
            fix_tol: self.picard.fix_tol,
            time_samples: self.picard.time_samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const MINIMAL: &str = r#"
kind = "solve"
[grid]
n = 50
[time]
t_final = 0.1
[law]
kind = "frozen"
coefficient = "1"
[initial]
expr = "sin(pi*x)"
"#;

    #[test]
    fn minimal_solve_config_parses_with_defaults() {
        let f = write_config(MINIMAL);
        let (cfg, _) = load_config(f.path(), &[]).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Solve);
        assert_eq!(cfg.grid.n, 50);
        assert_eq!(cfg.time.dt, DtSpec::Auto("auto".into()));
        assert_eq!(cfg.control.eps, 0.1);
        let grid = cfg.build_grid().unwrap();
        let law = cfg.build_law().unwrap();
        assert!(law.as_frozen().is_some());
        let y0 = cfg.build_data(&cfg.initial, &grid).unwrap();
        assert_eq!(y0.n(), 50);
    }

    #[test]
    fn negative_coefficient_is_refused() {
        let f = write_config(&MINIMAL.replace("coefficient = \"1\"", "coefficient = \"-1\""));
        let (cfg, _) = load_config(f.path(), &[]).unwrap();
        let err = cfg.build_law().unwrap_err().to_string();
        assert!(err.contains("law.coefficient"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let f = write_config(&format!("{MINIMAL}\n[nonsense]\nfoo = 1\n"));
        assert!(load_config(f.path(), &[]).is_err());
    }

    #[test]
    fn overrides_apply_to_scalars() {
        let f = write_config(MINIMAL);
        let (cfg, effective) = load_config(
            f.path(),
            &["grid.n=80".into(), "control.eps=0.05".into(), "time.dt=1e-3".into()],
        )
        .unwrap();
        assert_eq!(cfg.grid.n, 80);
        assert_eq!(cfg.control.eps, 0.05);
        assert_eq!(cfg.time.dt, DtSpec::Number(1e-3));
        assert!(effective.contains("n = 80"));
    }

    #[test]
    fn quasilinear_law_certifies_bounds() {
        let f = write_config(
            &MINIMAL
                .replace("kind = \"frozen\"", "kind = \"quasilinear\"")
                .replace("coefficient = \"1\"", "coefficient = \"1 + 0.5/(1 + y*y)\""),
        );
        let (cfg, _) = load_config(f.path(), &[]).unwrap();
        let law = cfg.build_law().unwrap();
        match law {
            DiffusionLaw::Quasilinear(q) => {
                assert!(q.a_min >= 1.0);
            }
            _ => panic!("expected quasilinear"),
        }
    }
}
