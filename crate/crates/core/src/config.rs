//! JSON configuration for problem instances and command runs.
//!
//! A run config names an instance file (or embeds one) and carries the
//! command-specific settings. Relative paths are resolved against the
//! directory of the file that mentions them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControlProblem, CostSpec, OperatorFamily, ParameterSpace};
use crate::error::{Error, Result};
use crate::inclusion::{MultiMap, SelectionStrategy, TimeGrid};
use crate::operators::{HypothesisConstants, MonotoneOp, PiecewiseLinear, WeightedPLaplacian};
use crate::pgconv::{CoefficientFamily, Generator};
use crate::sensitivity::Datum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::uniform(self.horizon, self.steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
}

fn resolve_weights(
    weights: &Option<Vec<f64>>,
    file: &Option<PathBuf>,
    constant: Option<f64>,
    m: Option<usize>,
    base: &Path,
) -> Result<Vec<f64>> {
    match (weights, file, constant, m) {
        (Some(w), None, None, _) => Ok(w.clone()),
        (None, Some(f), None, _) => crate::io::read_numbers(&base.join(f)),
        (None, None, Some(c), Some(m)) => Ok(vec![c; m + 1]),
        _ => Err(Error::invalid(
            "weights need exactly one of `weights`, `weights_file` or `constant` with `m`",
        )),
    }
}

/// `A_λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorConfig {
    Zero {
        dim: usize,
    },
    Identity {
        dim: usize,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<Vec<Vec<f64>>>,
    },
    Power {
        dim: usize,
        coeff: f64,
        exponent: f64,
    },
    /// Componentwise `∂|·|`.
    Sign {
        dim: usize,
    },
    Prox {
        pieces: Vec<PieceConfig>,
        #[serde(default)]
        quadratic: f64,
        dim: usize,
    },
    /// Half-node weights inline, from a number-list file, or constant on
    /// `m` interior nodes.
    PLaplacian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights_file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constant: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights_lambda: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulation: Option<[f64; 2]>,
    },
}

impl OperatorConfig {
    /// Builds `λ ↦ A_λ`; `constants` replaces the declared hypothesis
    /// constants of a λ-independent operator.
    pub fn build(&self, base: &Path, constants: Option<&HypothesisConstants<f64>>) -> Result<OperatorFamily<f64>> {
        let fam = match self {
            OperatorConfig::Zero { dim } => OperatorFamily::Fixed(MonotoneOp::zero(*dim)),
            OperatorConfig::Identity { dim } => OperatorFamily::Fixed(MonotoneOp::identity(*dim)),
            OperatorConfig::Linear { matrix, slope: None } => OperatorFamily::Fixed(MonotoneOp::linear(matrix.clone())?),
            OperatorConfig::Linear { matrix, slope: Some(s) } => OperatorFamily::Linear {
                base: matrix.clone(),
                slope: s.clone(),
            },
            OperatorConfig::Power { dim, coeff, exponent } => OperatorFamily::Fixed(MonotoneOp::power(*dim, *coeff, *exponent)?),
            OperatorConfig::Sign { dim } => OperatorFamily::Fixed(MonotoneOp::abs_subdifferential(*dim)),
            OperatorConfig::Prox { pieces, quadratic, dim } => {
                let pcs = pieces
                    .iter()
                    .map(|p| PiecewiseLinear::new(p.breakpoints.clone(), p.slopes.clone()))
                    .collect::<Result<Vec<_>>>()?;
                OperatorFamily::Fixed(MonotoneOp::prox(*dim, pcs, *quadratic)?)
            }
            OperatorConfig::PLaplacian {
                weights,
                weights_file,
                constant,
                m,
                p,
                weights_lambda,
                modulation,
            } => {
                let w = resolve_weights(weights, weights_file, *constant, *m, base)?;
                match (weights_lambda, modulation) {
                    (Some(wl), None) => OperatorFamily::PLaplacian {
                        weights: w,
                        weights_lambda: wl.clone(),
                        p: *p,
                    },
                    (Some(_), Some(_)) => {
                        return Err(Error::invalid("weights_lambda and modulation cannot be combined"));
                    }
                    (None, m) => {
                        let mut lap = WeightedPLaplacian::new(w, *p)?;
                        if let Some([amp, freq]) = m {
                            lap = lap.with_modulation(*amp, *freq)?;
                        }
                        OperatorFamily::Fixed(MonotoneOp::p_laplacian(lap))
                    }
                }
            }
        };
        match (constants, fam) {
            (None, fam) => Ok(fam),
            (Some(c), OperatorFamily::Fixed(op)) => Ok(OperatorFamily::Fixed(op.with_constants(c.clone()))),
            (Some(_), _) => Err(Error::invalid("constants can only be declared for a λ-independent operator")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeConfig {
    Point,
    Box {
        half_width: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        half_width_lambda: Option<Vec<f64>>,
    },
    Ball {
        radius: f64,
        #[serde(default)]
        radius_lambda: f64,
    },
}

/// `F(t, x, λ) = M x + c + λ c_λ + t c_t` plus a box or ball, optionally
/// evaluated at a radial retraction of `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiMapConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    pub offset: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_time: Option<Vec<f64>>,
    #[serde(default = "point_shape")]
    pub shape: ShapeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate: Option<f64>,
}

fn point_shape() -> ShapeConfig {
    ShapeConfig::Point
}

impl MultiMapConfig {
    pub fn build(&self) -> Result<MultiMap<f64>> {
        let mut f = MultiMap::affine(self.matrix.clone(), self.offset.clone())?;
        f = match &self.shape {
            ShapeConfig::Point => f,
            ShapeConfig::Box {
                half_width,
                half_width_lambda,
            } => {
                let g = f.with_box(half_width.clone())?;
                match half_width_lambda {
                    Some(s) => g.with_size_lambda(s.clone())?,
                    None => g,
                }
            }
            ShapeConfig::Ball { radius, radius_lambda } => f.with_ball(*radius)?.with_size_lambda(vec![*radius_lambda])?,
        };
        if let Some(v) = &self.offset_lambda {
            f = f.with_offset_lambda(v.clone())?;
        }
        if let Some(v) = &self.offset_time {
            f = f.with_offset_time(v.clone())?;
        }
        if let Some(r) = self.truncate {
            f = f.truncated(r)?;
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_lambda: Option<Vec<f64>>,
    pub radius: f64,
    #[serde(default)]
    pub radius_lambda: f64,
    #[serde(default)]
    pub radius_time: f64,
}

/// Cost coefficients; omitted entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub q_state: f64,
    pub q_state_lambda: f64,
    pub x_ref: Option<Vec<f64>>,
    pub lin_state: Option<Vec<f64>>,
    pub q_control: f64,
    pub q_control_lambda: f64,
    pub lin_control: Option<Vec<f64>>,
    pub q_terminal: f64,
    pub x_terminal: Option<Vec<f64>>,
    pub lin_terminal: Option<Vec<f64>>,
    pub xi_coupling: f64,
}

impl CostConfig {
    fn build(&self, n: usize) -> CostSpec<f64> {
        let v = |o: &Option<Vec<f64>>| o.clone().unwrap_or_else(|| vec![0.0; n]);
        CostSpec {
            q_state: self.q_state,
            q_state_lambda: self.q_state_lambda,
            x_ref: v(&self.x_ref),
            lin_state: v(&self.lin_state),
            q_control: self.q_control,
            q_control_lambda: self.q_control_lambda,
            lin_control: v(&self.lin_control),
            q_terminal: self.q_terminal,
            x_terminal: v(&self.x_terminal),
            lin_terminal: v(&self.lin_terminal),
            xi_coupling: self.xi_coupling,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ParameterConfig {
    Interval {
        lo: f64,
        hi: f64,
    },
    Finite {
        points: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distances: Option<Vec<Vec<f64>>>,
    },
}

/// A problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub operator: OperatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_constants: Option<HypothesisConstants<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multimap: Option<MultiMapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlConfig>,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParameterConfig>,
    pub grid: GridConfig,
    pub xi: Vec<f64>,
    #[serde(default)]
    pub lambda: f64,
    /// Embedding constant `β` used by the smallness check.
    #[serde(default = "one")]
    pub embedding: f64,
}

fn one() -> f64 {
    1.0
}

impl InstanceConfig {
    /// Builds the control problem; `grid` overrides the instance grid.
    pub fn build(&self, base: &Path, grid: Option<&GridConfig>, tol: Option<f64>) -> Result<ControlProblem<f64>> {
        let operator = self.operator.build(base, self.operator_constants.as_ref())?;
        let n = operator.dim();
        let map = match &self.multimap {
            Some(m) => m.build()?,
            None => MultiMap::zero(n),
        };
        let grid = grid.unwrap_or(&self.grid).build()?;
        let control = self.control.clone().unwrap_or(ControlConfig {
            gain: None,
            gain_lambda: None,
            radius: 0.0,
            radius_lambda: 0.0,
            radius_time: 0.0,
        });
        let mut prob = ControlProblem::new(operator, map, control.radius, grid)?;
        prob.gain = control.gain.unwrap_or_else(|| vec![1.0; n]);
        prob.gain_lambda = control.gain_lambda.unwrap_or_else(|| vec![0.0; n]);
        prob.radius_lambda = control.radius_lambda;
        prob.radius_time = control.radius_time;
        prob.cost = self.cost.build(n);
        if let Some(p) = &self.parameters {
            prob.parameters = match p {
                ParameterConfig::Interval { lo, hi } => ParameterSpace::Interval { lo: *lo, hi: *hi },
                ParameterConfig::Finite { points, distances } => ParameterSpace::Finite {
                    points: points.clone(),
                    distances: distances.clone(),
                },
            };
        }
        if let Some(t) = tol {
            prob.tol = t;
        }
        prob.validate()?;
        if self.xi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.xi.len() });
        }
        prob.check_parameter(self.lambda)?;
        Ok(prob)
    }
}

/// `(ξₙ, λₙ) = (ξ + rⁿ d, λ + rⁿ s)` for `n = 1..=count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricSequence {
    pub count: usize,
    #[serde(default = "half")]
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_direction: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_step: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    pub xi: Vec<f64>,
    pub lambda: f64,
}

/// An explicit list or a geometric sequence towards the instance datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceConfig {
    Explicit(Vec<DatumConfig>),
    Geometric(GeometricSequence),
}

impl SequenceConfig {
    pub fn build(&self, target: &Datum<f64>) -> Result<Vec<Datum<f64>>> {
        match self {
            SequenceConfig::Explicit(v) => Ok(v.iter().map(|d| Datum::new(d.xi.clone(), d.lambda)).collect()),
            SequenceConfig::Geometric(g) => {
                if g.count == 0 || !(g.ratio > 0.0 && g.ratio < 1.0) {
                    return Err(Error::invalid("geometric sequence needs count >= 1 and ratio in (0, 1)"));
                }
                let dir = g.xi_direction.clone().unwrap_or_else(|| vec![0.0; target.xi.len()]);
                if dir.len() != target.xi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: target.xi.len(),
                        got: dir.len(),
                    });
                }
                Ok((1..=g.count)
                    .map(|n| {
                        let r = g.ratio.powi(n as i32);
                        let xi = target.xi.iter().zip(&dir).map(|(&x, &d)| x + r * d).collect();
                        Datum::new(xi, target.lambda + r * g.lambda_step)
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub generator: Generator<f64>,
    pub p: f64,
    pub m: usize,
}

impl FamilyConfig {
    pub fn build(&self) -> Result<CoefficientFamily<f64>> {
        CoefficientFamily::new(self.generator.clone(), self.p, self.m)
    }
}

/// Settings of the `pgconv` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgConfig {
    pub family: FamilyConfig,
    pub grid: GridConfig,
    /// Sine coefficients of the time-constant forcing.
    pub forcing: Vec<f64>,
    pub n_list: Vec<usize>,
    #[serde(default = "five")]
    pub modes: usize,
    #[serde(default = "three")]
    pub windows: usize,
    pub tol: f64,
}

fn five() -> usize {
    5
}

fn three() -> usize {
    3
}

/// Reference trajectory for the `filippov` command: the solution of
/// `−u′ ∈ A(t, u) + h` with constant `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilippovConfig {
    pub forcing: Vec<f64>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

/// Tolerance overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub resolvent: Option<f64>,
    pub value: Option<f64>,
    pub set: Option<f64>,
    pub admissible: Option<f64>,
}

/// The problem for a run: a path to an instance file or the instance itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRef {
    Path(PathBuf),
    Inline(Box<InstanceConfig>),
}

/// One command run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceRef>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<SelectionStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_grid: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filippov: Option<FilippovConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pgconv: Option<PgConfig>,
    /// Sample budget of the hypothesis checks in `validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

fn one_usize() -> usize {
    1
}

/// A parsed run config with its instance resolved.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub run: RunConfig,
    pub instance: Option<InstanceConfig>,
    /// Directory against which the instance's relative paths resolve.
    pub instance_dir: PathBuf,
}

impl LoadedRun {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read run config {}: {e}", path.display())))?;
        let run: RunConfig = serde_json::from_str(&text).map_err(|e| Error::invalid(format!("run config: {e}")))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_run(run, &dir)
    }

    pub fn from_run(run: RunConfig, dir: &Path) -> Result<Self> {
        let (instance, instance_dir) = match &run.instance {
            None => (None, dir.to_path_buf()),
            Some(InstanceRef::Inline(i)) => (Some((**i).clone()), dir.to_path_buf()),
            Some(InstanceRef::Path(p)) => {
                let full = dir.join(p);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::invalid(format!("cannot read instance {}: {e}", full.display())))?;
                let inst: InstanceConfig =
                    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("instance {}: {e}", full.display())))?;
                (Some(inst), full.parent().map(Path::to_path_buf).unwrap_or_default())
            }
        };
        Ok(LoadedRun {
            run,
            instance,
            instance_dir,
        })
    }

    pub fn instance(&self) -> Result<&InstanceConfig> {
        self.instance.as_ref().ok_or_else(|| Error::invalid("this command needs an `instance`"))
    }

    pub fn problem(&self) -> Result<ControlProblem<f64>> {
        self.instance()?
            .build(&self.instance_dir, self.run.grid.as_ref(), self.run.tolerances.resolvent)
    }

    pub fn target(&self) -> Result<Datum<f64>> {
        let i = self.instance()?;
        Ok(Datum::new(i.xi.clone(), i.lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_instance() {
        let text = r#"{
            "operator": {"kind": "identity", "dim": 1},
            "control": {"radius": 1.0},
            "cost": {"lin_terminal": [1.0]},
            "grid": {"horizon": 1.0, "steps": 10},
            "xi": [0.5]
        }"#;
        let inst: InstanceConfig = serde_json::from_str(text).unwrap();
        let p = inst.build(Path::new("."), None, None).unwrap();
        assert_eq!(p.grid.steps(), 10);
        assert_eq!(p.cost.lin_terminal, vec![1.0]);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_dims() {
        let bad = r#"{"operator": {"kind": "identity", "dim": 1}, "grid": {"horizon": 1, "steps": 2}, "xi": [0], "oops": 1}"#;
        assert!(serde_json::from_str::<InstanceConfig>(bad).is_err());
        let dims = r#"{"operator": {"kind": "identity", "dim": 2}, "grid": {"horizon": 1, "steps": 2}, "xi": [0]}"#;
        let inst: InstanceConfig = serde_json::from_str(dims).unwrap();
        assert!(inst.build(Path::new("."), None, None).is_err());
    }

    #[test]
    fn p_laplacian_weights_variants() {
        let text = r#"{"kind": "p-laplacian", "constant": 2.0, "m": 4, "p": 3.0}"#;
        let op: OperatorConfig = serde_json::from_str(text).unwrap();
        assert_eq!(op.build(Path::new("."), None).unwrap().dim(), 4);
        let both = r#"{"kind": "p-laplacian", "constant": 2.0, "m": 4, "weights": [1,1], "p": 3.0}"#;
        let op: OperatorConfig = serde_json::from_str(both).unwrap();
        assert!(op.build(Path::new("."), None).is_err());
    }

    #[test]
    fn geometric_sequence() {
        let s: SequenceConfig = serde_json::from_str(r#"{"count": 3, "xi_direction": [1.0]}"#).unwrap();
        let seq = s.build(&Datum::new(vec![0.0], 0.0)).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq[2].xi, vec![0.125]);
    }
}
